//! Observed-order estimation from error ladders.

use serde::Serialize;

use crate::error::{Error, Result};

/// Errors below this are treated as exact reproduction, where a rate is
/// meaningless.
pub const EXACT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum RateValue {
    Rate(f64),
    Exact,
}

#[derive(Debug, Clone)]
pub struct RateEstimate {
    /// Pairwise log-ratio rates; entry 0 is None.
    pub pairwise: Vec<Option<RateValue>>,
    /// Least-squares slope of log(error) against log(step) over the
    /// last three levels; None when any of them is exact.
    pub slope: Option<f64>,
    /// Some level in the regression window sat at the floor.
    pub exact: bool,
}

/// Pairwise rates log(e_prev/e)/log(step_prev/step) plus the
/// least-squares slope over the last three levels.
pub fn estimate_rates(errors: &[f64], steps: &[f64]) -> Result<RateEstimate> {
    if errors.len() < 2 {
        return Err(Error::InvalidArgument(
            "rate estimation needs at least two levels".into(),
        ));
    }
    if errors.len() != steps.len() {
        return Err(Error::DimensionMismatch(
            "errors and steps must have equal length".into(),
        ));
    }
    for &e in errors {
        if e < 0.0 || !e.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid error entry {e}")));
        }
    }
    for &s in steps {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid step entry {s}")));
        }
    }
    let mut pairwise = vec![None];
    for i in 1..errors.len() {
        pairwise.push(if errors[i - 1] <= EXACT_FLOOR || errors[i] <= EXACT_FLOOR {
            Some(RateValue::Exact)
        } else {
            Some(RateValue::Rate(
                (errors[i - 1] / errors[i]).ln() / (steps[i - 1] / steps[i]).ln(),
            ))
        });
    }
    let window = errors.len().min(3);
    let tail = &errors[errors.len() - window..];
    let tail_steps = &steps[steps.len() - window..];
    if tail.iter().any(|&e| e <= EXACT_FLOOR) {
        return Ok(RateEstimate {
            pairwise,
            slope: None,
            exact: true,
        });
    }
    let xs: Vec<f64> = tail_steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|e| e.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Ok(RateEstimate {
        pairwise,
        slope: Some(num / den),
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_decay_gives_exact_rate() {
        let est = estimate_rates(&[0.1, 0.025, 0.00625], &[0.1, 0.05, 0.025]).unwrap();
        assert_eq!(est.pairwise[0], None);
        for p in &est.pairwise[1..] {
            match p {
                Some(RateValue::Rate(r)) => assert!((r - 2.0).abs() < 1e-12),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!((est.slope.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equal_errors_give_rate_zero() {
        let est = estimate_rates(&[0.5, 0.5], &[0.1, 0.05]).unwrap();
        assert_eq!(est.pairwise[1], Some(RateValue::Rate(0.0)));
    }

    #[test]
    fn floor_detection() {
        let est = estimate_rates(&[1e-15, 1e-15], &[0.1, 0.05]).unwrap();
        assert!(est.exact);
        assert_eq!(est.pairwise[1], Some(RateValue::Exact));
        assert!(est.slope.is_none());
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(estimate_rates(&[0.1], &[0.1]).is_err());
        assert!(estimate_rates(&[0.1, -0.1], &[0.1, 0.05]).is_err());
        assert!(estimate_rates(&[0.1, 0.1], &[0.1, 0.0]).is_err());
        assert!(estimate_rates(&[0.1, 0.1], &[0.1]).is_err());
    }

    #[test]
    fn slope_uses_last_three_levels() {
        // The first level is off-trend; the last three decay at rate 1.
        let est = estimate_rates(&[1.0, 0.4, 0.2, 0.1], &[0.8, 0.4, 0.2, 0.1]).unwrap();
        assert!((est.slope.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonuniform_steps_use_log_ratio() {
        // errors ~ step^1.5 on an uneven ladder.
        let steps = [0.3, 0.17, 0.05];
        let errors: Vec<f64> = steps.iter().map(|s| 2.0 * s.powf(1.5)).collect();
        let est = estimate_rates(&errors, &steps).unwrap();
        assert!((est.slope.unwrap() - 1.5).abs() < 1e-10);
    }
}
