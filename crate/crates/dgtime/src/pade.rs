//! Sub-diagonal rational approximations of exp(-z).
//!
//! The (q+1, q) approximant has numerator degree q and denominator degree
//! q+1 and matches the Taylor series of exp(-z) through order 2q+1; it is
//! the one-step amplification of the dG(q) scheme for y' = -lambda y.

use nalgebra::Complex;

use crate::error::Result;

/// Rational function with coefficients in ascending powers of z; the
/// denominator is normalized to constant term 1.
#[derive(Debug, Clone)]
pub struct RationalApprox {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl RationalApprox {
    pub fn eval(&self, z: f64) -> f64 {
        horner(&self.numerator, z) / horner(&self.denominator, z)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        horner_complex(&self.numerator, z) / horner_complex(&self.denominator, z)
    }
}

fn horner(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
}

fn horner_complex(coeffs: &[f64], z: Complex<f64>) -> Complex<f64> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Taylor coefficient of exp(-z): (-1)^k / k!.
fn exp_neg_coeff(k: usize) -> f64 {
    let mut c = 1.0;
    for i in 1..=k {
        c /= i as f64;
    }
    if k % 2 == 0 {
        c
    } else {
        -c
    }
}

/// The (q+1, q) sub-diagonal approximant of exp(-z). The matching
/// conditions (series agreement through order 2q+1 with denominator
/// constant term 1) have the closed-form solution
/// `p_j = (-1)^j (2q+1-j)! q! / ((2q+1)! j! (q-j)!)` and
/// `d_j = (2q+1-j)! (q+1)! / ((2q+1)! j! (q+1-j)!)`, evaluated here by
/// stable term ratios.
pub fn subdiagonal(q: usize) -> Result<RationalApprox> {
    let qf = q as f64;
    let mut numerator = Vec::with_capacity(q + 1);
    numerator.push(1.0);
    for j in 1..=q {
        let jf = j as f64;
        let prev = numerator[j - 1];
        numerator.push(prev * -(qf - jf + 1.0) / ((2.0 * qf + 2.0 - jf) * jf));
    }
    let mut denominator = Vec::with_capacity(q + 2);
    denominator.push(1.0);
    for j in 1..=(q + 1) {
        let jf = j as f64;
        let prev = denominator[j - 1];
        denominator.push(prev * (qf + 2.0 - jf) / ((2.0 * qf + 2.0 - jf) * jf));
    }
    Ok(RationalApprox {
        numerator,
        denominator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Independent route: solve the linear matching system for the
    /// denominator (series coefficients of Q(z) exp(-z) vanish for
    /// orders q+1 .. 2q+1 with q_0 = 1), then collect the numerator.
    fn matching_system(q: usize) -> RationalApprox {
        let n = q + 1;
        let mut a = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (row, k) in ((q + 1)..=(2 * q + 1)).enumerate() {
            rhs[row] = -exp_neg_coeff(k);
            for j in 1..=n {
                if k >= j {
                    a[(row, j - 1)] = exp_neg_coeff(k - j);
                }
            }
        }
        let sol = a.lu().solve(&rhs).expect("matching system");
        let mut den = vec![1.0];
        den.extend(sol.iter());
        let mut num = Vec::with_capacity(q + 1);
        for k in 0..=q {
            let mut p = 0.0;
            for (j, dj) in den.iter().enumerate().take(k + 1) {
                p += dj * exp_neg_coeff(k - j);
            }
            num.push(p);
        }
        RationalApprox {
            numerator: num,
            denominator: den,
        }
    }

    #[test]
    fn q0_is_one_over_one_plus_z() {
        let r = subdiagonal(0).unwrap();
        assert_eq!(r.numerator.len(), 1);
        assert_eq!(r.denominator.len(), 2);
        assert!((r.numerator[0] - 1.0).abs() < 1e-14);
        assert!((r.denominator[0] - 1.0).abs() < 1e-14);
        assert!((r.denominator[1] - 1.0).abs() < 1e-14);
        assert!((r.eval(1.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn q1_closed_form() {
        // (1 - z/3) / (1 + 2z/3 + z^2/6)
        let r = subdiagonal(1).unwrap();
        assert!((r.numerator[0] - 1.0).abs() < 1e-14);
        assert!((r.numerator[1] + 1.0 / 3.0).abs() < 1e-14);
        assert!((r.denominator[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((r.denominator[2] - 1.0 / 6.0).abs() < 1e-14);
        assert!((r.eval(1.0) - 4.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn matches_linear_matching_system() {
        for q in 0..=8 {
            let closed = subdiagonal(q).unwrap();
            let solved = matching_system(q);
            // The solved system loses digits as q grows; the closed form
            // is the accurate route.
            let tol = if q <= 4 { 1e-12 } else { 1e-8 };
            for (a, b) in closed.numerator.iter().zip(&solved.numerator) {
                assert!((a - b).abs() < tol * b.abs().max(1.0), "q={q}: {a} vs {b}");
            }
            for (a, b) in closed.denominator.iter().zip(&solved.denominator) {
                assert!((a - b).abs() < tol * b.abs().max(1.0), "q={q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn matches_taylor_series_through_order_2q_plus_1() {
        for q in 0..=5 {
            let r = subdiagonal(q).unwrap();
            // Series of P/Q by long division against exp(-z).
            let order = 2 * q + 1;
            let mut series = vec![0.0; order + 1];
            for k in 0..=order {
                let mut s = if k < r.numerator.len() { r.numerator[k] } else { 0.0 };
                for j in 1..=k.min(r.denominator.len() - 1) {
                    s -= r.denominator[j] * series[k - j];
                }
                series[k] = s;
            }
            for (k, &s) in series.iter().enumerate() {
                assert!(
                    (s - exp_neg_coeff(k)).abs() < 1e-12,
                    "q={q} order {k}: {s} vs {}",
                    exp_neg_coeff(k)
                );
            }
        }
    }

    #[test]
    fn value_one_at_origin() {
        for q in 0..=6 {
            assert!((subdiagonal(q).unwrap().eval(0.0) - 1.0).abs() < 1e-14);
        }
    }
}
