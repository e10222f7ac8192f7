//! Quadrature rules on the reference interval (0, 1).
//!
//! Gauss rules integrate degree 2s-1 exactly with s points; right Radau
//! rules include the right endpoint and integrate degree 2s-2 exactly.

use crate::error::{Error, Result};

/// Points and weights on the reference interval (0, 1).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over (0, 1).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// The rule mapped to the interval (a, a + width).
    pub fn mapped(&self, a: f64, width: f64) -> QuadratureRule {
        QuadratureRule {
            points: self.points.iter().map(|&x| a + width * x).collect(),
            weights: self.weights.iter().map(|&w| w * width).collect(),
            exactness: self.exactness,
        }
    }
}

/// Legendre polynomial P_n and its derivative at x, on [-1, 1].
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let dp = (n as f64) * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre rule with `points` nodes, exact to degree 2*points - 1.
pub fn gauss_rule(points: usize) -> Result<QuadratureRule> {
    if points == 0 {
        return Err(Error::InvalidArgument(
            "quadrature rule needs at least one point".into(),
        ));
    }
    let n = points;
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 1..=n {
        // Newton iteration from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to (0, 1).
        xs.push(0.5 * (1.0 - x));
        ws.push(0.5 * w);
    }
    xs.reverse();
    ws.reverse();
    Ok(QuadratureRule {
        points: xs,
        weights: ws,
        exactness: 2 * n - 1,
    })
}

/// Jacobi polynomial P_n^(1,0) and its derivative at x, on [-1, 1].
fn jacobi10_with_deriv(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut dp_prev = 0.0;
    let mut p = 0.5 * (1.0 + 3.0 * x);
    let mut dp = 1.5;
    for k in 2..=n {
        let kf = k as f64;
        // (k+1)(2k-1) P_k = [(2k+1)(2k-1) x + 1] P_{k-1} - (k-1)(2k+1) P_{k-2}
        let a = (2.0 * kf + 1.0) * (2.0 * kf - 1.0);
        let c = (kf - 1.0) * (2.0 * kf + 1.0);
        let denom = (kf + 1.0) * (2.0 * kf - 1.0);
        let p_next = ((a * x + 1.0) * p - c * p_prev) / denom;
        let dp_next = (a * p + (a * x + 1.0) * dp - c * dp_prev) / denom;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (p, dp)
}

/// Roots of P_n^(1,0) on (-1, 1), found by interlacing bisection plus a
/// Newton polish. Roots of consecutive orthogonal polynomials interlace,
/// so each level brackets the next.
fn jacobi10_roots(n: usize) -> Vec<f64> {
    let mut roots: Vec<f64> = vec![];
    for k in 1..=n {
        let mut brackets = Vec::with_capacity(k + 1);
        brackets.push(-1.0);
        brackets.extend_from_slice(&roots);
        brackets.push(1.0);
        let mut next = Vec::with_capacity(k);
        for w in brackets.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let flo = jacobi10_with_deriv(k, lo).0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = jacobi10_with_deriv(k, mid).0;
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut x = 0.5 * (lo + hi);
            for _ in 0..8 {
                let (p, dp) = jacobi10_with_deriv(k, x);
                if dp == 0.0 {
                    break;
                }
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            next.push(x);
        }
        roots = next;
    }
    roots
}

/// Right Radau rule with `points` nodes on (0, 1], containing the right
/// endpoint; exact to degree 2*points - 2.
pub fn radau_right_rule(points: usize) -> Result<QuadratureRule> {
    if points == 0 {
        return Err(Error::InvalidArgument(
            "quadrature rule needs at least one point".into(),
        ));
    }
    let mut xs: Vec<f64> = jacobi10_roots(points - 1)
        .into_iter()
        .map(|x| 0.5 * (x + 1.0))
        .collect();
    xs.push(1.0);
    // Weights integrate the Lagrange cardinal polynomials exactly with a
    // Gauss rule of sufficient order.
    let helper = gauss_rule(points)?;
    let ws: Vec<f64> = (0..xs.len())
        .map(|i| {
            helper.integrate(|t| {
                let mut l = 1.0;
                for (j, &xj) in xs.iter().enumerate() {
                    if j != i {
                        l *= (t - xj) / (xs[i] - xj);
                    }
                }
                l
            })
        })
        .collect();
    Ok(QuadratureRule {
        points: xs,
        weights: ws,
        exactness: 2 * points - 2,
    })
}

/// Right Radau points on (0, 1] (the nodes of [`radau_right_rule`]).
pub fn radau_right_points(points: usize) -> Result<Vec<f64>> {
    Ok(radau_right_rule(points)?.points)
}
