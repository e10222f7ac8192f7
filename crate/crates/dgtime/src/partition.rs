//! Partitions of the time interval (0, T] into half-open slabs.

use crate::error::{Error, Result};

/// Strictly increasing time nodes 0 = t_0 < ... < t_N = T. Slab n is the
/// half-open interval (t_n, t_{n+1}] with width tau_n.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition {
    nodes: Vec<f64>,
    exceeds_unit_width: bool,
}

impl TimePartition {
    /// Builds a partition of (0, T] with `n_slabs` slabs. `grading = 1`
    /// is uniform; otherwise widths are proportional to grading^n,
    /// rescaled to sum to T.
    pub fn new(t_final: f64, n_slabs: usize, grading: f64) -> Result<Self> {
        if !(t_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if n_slabs == 0 {
            return Err(Error::InvalidArgument("need at least one slab".into()));
        }
        if !(grading > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grading must be positive, got {grading}"
            )));
        }
        let weights: Vec<f64> = (0..n_slabs).map(|n| grading.powi(n as i32)).collect();
        let total: f64 = weights.iter().sum();
        let mut nodes = Vec::with_capacity(n_slabs + 1);
        nodes.push(0.0);
        let mut acc = 0.0;
        for w in &weights {
            acc += w / total * t_final;
            nodes.push(acc);
        }
        nodes[n_slabs] = t_final;
        Self::from_nodes(nodes)
    }

    /// Builds a partition from explicit nodes; the first node must be 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("need at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        for w in nodes.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "nodes must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let max_width = nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        Ok(TimePartition {
            nodes,
            // Widths above 1 are admitted but flagged; the analysis
            // normalizes to tau <= 1.
            exceeds_unit_width: max_width > 1.0,
        })
    }

    pub fn n_slabs(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn final_time(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Width tau_n of slab n.
    pub fn width(&self, n: usize) -> f64 {
        self.nodes[n + 1] - self.nodes[n]
    }

    pub fn max_width(&self) -> f64 {
        (0..self.n_slabs())
            .map(|n| self.width(n))
            .fold(0.0f64, f64::max)
    }

    /// True when some slab is wider than 1; callers may warn.
    pub fn exceeds_unit_width(&self) -> bool {
        self.exceeds_unit_width
    }

    pub fn is_uniform(&self) -> bool {
        let tau = self.width(0);
        (0..self.n_slabs()).all(|n| (self.width(n) - tau).abs() <= 1e-12 * tau.abs())
    }

    /// Index of the slab owning t, i.e. with t in (t_n, t_{n+1}].
    /// t = 0 is owned by no slab and rejected here.
    pub fn slab_of(&self, t: f64) -> Result<usize> {
        if !(t > 0.0) || t > self.final_time() {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside (0, {}]",
                self.final_time()
            )));
        }
        // Binary search for the smallest n with t <= t_{n+1}.
        let mut lo = 0usize;
        let mut hi = self.n_slabs() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if t <= self.nodes[mid + 1] {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Ok(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_split() {
        let p = TimePartition::new(1.0, 4, 1.0).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (a, b) in p.nodes().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_grading_rescaled() {
        // Weights 1:2 rescaled to sum 1.
        let p = TimePartition::new(1.0, 2, 2.0).unwrap();
        assert!((p.width(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.width(1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_slab() {
        let p = TimePartition::new(1.0, 1, 5.0).unwrap();
        assert_eq!(p.n_slabs(), 1);
        assert_eq!(p.final_time(), 1.0);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(TimePartition::new(0.0, 4, 1.0).is_err());
        assert!(TimePartition::new(-1.0, 4, 1.0).is_err());
        assert!(TimePartition::new(1.0, 0, 1.0).is_err());
        assert!(TimePartition::new(1.0, 4, 0.0).is_err());
        assert!(TimePartition::new(1.0, 4, -2.0).is_err());
    }

    #[test]
    fn wide_slabs_flagged_not_rejected() {
        let p = TimePartition::new(10.0, 2, 1.0).unwrap();
        assert!(p.exceeds_unit_width());
        let q = TimePartition::new(1.0, 2, 1.0).unwrap();
        assert!(!q.exceeds_unit_width());
    }

    #[test]
    fn slab_ownership_is_half_open() {
        let p = TimePartition::new(1.0, 4, 1.0).unwrap();
        assert_eq!(p.slab_of(0.25).unwrap(), 0);
        assert_eq!(p.slab_of(0.2500001).unwrap(), 1);
        assert_eq!(p.slab_of(1.0).unwrap(), 3);
        assert!(p.slab_of(0.0).is_err());
        assert!(p.slab_of(1.5).is_err());
    }

    proptest! {
        // Grading ratios beyond f64 resolution (g^N near 1e16) collapse
        // nodes and are rejected by construction, so the property range
        // stays within representable partitions.
        #[test]
        fn construction_is_valid(t_final in 0.1f64..50.0, n in 1usize..32, g in 0.5f64..2.5) {
            let p = TimePartition::new(t_final, n, g).unwrap();
            prop_assert_eq!(p.n_slabs(), n);
            prop_assert!((p.final_time() - t_final).abs() < 1e-12 * t_final);
            let total: f64 = (0..n).map(|i| p.width(i)).sum();
            prop_assert!((total - t_final).abs() < 1e-10 * t_final);
            for i in 0..n {
                prop_assert!(p.width(i) > 0.0);
            }
        }
    }
}
