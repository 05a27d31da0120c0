//! The dual change of variables.
//!
//! `f` is the odd, increasing solution of `f'(t) = 1 / sqrt(1 + 2 f(t)^2)`,
//! `f(0) = 0`. Its inverse is the closed-form primitive
//!
//! ```text
//! F(s) = ∫₀ˢ sqrt(1 + 2x²) dx = s·sqrt(1 + 2s²)/2 + asinh(√2·s)/(2√2)
//! ```
//!
//! so `f` is evaluated by inverting `F` with a bracketed Newton iteration.
//! `f'` and `f''` then follow from the defining ODE without further
//! approximation.

use crate::error::{Error, Result};

/// `2^{1/4}`, the large-argument constant in `|f(t)| ~ 2^{1/4} |t|^{1/2}`.
pub const FOURTH_ROOT_TWO: f64 = 1.189_207_115_002_721;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualMap {
    newton_tol: f64,
    max_newton_iters: usize,
}

impl Default for DualMap {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            max_newton_iters: 100,
        }
    }
}

/// Closed-form `F(s) = ∫₀ˢ sqrt(1 + 2x²) dx`, which is `f⁻¹`.
pub fn primitive(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("primitive of non-finite argument {s}")));
    }
    Ok(primitive_unchecked(s))
}

#[inline]
fn primitive_unchecked(s: f64) -> f64 {
    let root2 = std::f64::consts::SQRT_2;
    0.5 * s * (1.0 + 2.0 * s * s).sqrt() + (root2 * s).asinh() / (2.0 * root2)
}

#[inline]
fn primitive_derivative(s: f64) -> f64 {
    (1.0 + 2.0 * s * s).sqrt()
}

impl DualMap {
    pub fn new(newton_tol: f64, max_newton_iters: usize) -> Result<Self> {
        if !(newton_tol > 0.0 && newton_tol.is_finite()) {
            return Err(Error::Parameter(format!(
                "newton_tol must be positive, got {newton_tol}"
            )));
        }
        if max_newton_iters == 0 {
            return Err(Error::Parameter("max_newton_iters must be at least 1".into()));
        }
        Ok(Self {
            newton_tol,
            max_newton_iters,
        })
    }

    pub fn newton_tol(&self) -> f64 {
        self.newton_tol
    }

    pub fn max_newton_iters(&self) -> usize {
        self.max_newton_iters
    }

    /// `F(s)`; see [`primitive`].
    pub fn primitive(&self, s: f64) -> Result<f64> {
        primitive(s)
    }

    /// `f⁻¹(u)`. Identical to the primitive.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        primitive(u)
    }

    pub fn f(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("f of non-finite argument {t}")));
        }
        let s = self.invert_nonneg(t.abs())?;
        Ok(if t.is_sign_negative() { -s } else { s })
    }

    pub fn f_prime(&self, t: f64) -> Result<f64> {
        let s = self.f(t)?;
        Ok(prime_from_value(s))
    }

    /// `f''(t) = -2 f(t) f'(t)^4`.
    pub fn f_second(&self, t: f64) -> Result<f64> {
        let s = self.f(t)?;
        let d = prime_from_value(s);
        Ok(-2.0 * s * d.powi(4))
    }

    /// `(f(t), f'(t))` from a single inversion.
    #[inline]
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let s = self.f(t)?;
        Ok((s, prime_from_value(s)))
    }

    pub fn map_field(&self, values: &[f64]) -> Result<Vec<f64>> {
        values
            .iter()
            .enumerate()
            .map(|(i, &t)| self.f(t).map_err(|e| at_index(e, i)))
            .collect()
    }

    pub fn map_prime_field(&self, values: &[f64]) -> Result<Vec<f64>> {
        values
            .iter()
            .enumerate()
            .map(|(i, &t)| self.f_prime(t).map_err(|e| at_index(e, i)))
            .collect()
    }

    /// Solves `F(s) = t` for `t >= 0`.
    fn invert_nonneg(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        // |f(t)| <= |t| and |f(t)| <= 2^{1/4} |t|^{1/2}
        let guess = t.min(FOURTH_ROOT_TWO * t.sqrt());
        let mut lo = 0.0_f64;
        let mut hi = guess + 1.0;
        let tol = self.newton_tol * t.max(1.0);

        let mut s = guess;
        for _ in 0..self.max_newton_iters {
            let r = primitive_unchecked(s) - t;
            if r > 0.0 {
                hi = hi.min(s);
            } else {
                lo = lo.max(s);
            }
            let d = primitive_derivative(s);
            if r.abs() <= tol {
                // one more Newton correction recovers full precision
                let polished = s - r / d;
                let s = if polished > lo && polished < hi { polished } else { s };
                // the exact value obeys both bounds; rounding can overshoot by an ulp
                return Ok(s.min(t).min(FOURTH_ROOT_TWO * t.sqrt()));
            }
            let mut next = s - r / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == s {
                return Ok(s.min(t).min(FOURTH_ROOT_TWO * t.sqrt()));
            }
            s = next;
        }
        Err(Error::Inversion { target: t, lo, hi })
    }
}

#[inline]
pub(crate) fn prime_from_value(s: f64) -> f64 {
    1.0 / (1.0 + 2.0 * s * s).sqrt()
}

fn at_index(e: Error, i: usize) -> Error {
    match e {
        Error::Inversion { target, lo, hi } => Error::Numeric(format!(
            "entry {i}: inversion at t = {target} did not converge (bracket [{lo}, {hi}])"
        )),
        other => Error::Numeric(format!("entry {i}: {other}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Adaptive Simpson quadrature, independent of the closed form.
    fn simpson<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, eps: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = g(lm);
            let frm = g(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(g, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + rec(g, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
        let fa = g(a);
        let fb = g(b);
        let fm = g(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(g, a, b, fa, fm, fb, whole, eps, 40)
    }

    fn quad_primitive(s: f64) -> f64 {
        simpson(&|x: f64| (1.0 + 2.0 * x * x).sqrt(), 0.0, s, 1e-13)
    }

    #[test]
    fn primitive_matches_quadrature() {
        let oracle = quad_primitive(1.0);
        assert_abs_diff_eq!(oracle, 1.27127, epsilon = 1e-5);
        assert_abs_diff_eq!(primitive(1.0).unwrap(), oracle, epsilon = 1e-11);
        for s in [0.01, 0.3, 2.0, 7.5] {
            assert_abs_diff_eq!(primitive(s).unwrap(), quad_primitive(s), epsilon = 1e-9 * s.max(1.0));
        }
    }

    #[test]
    fn primitive_is_odd_and_rejects_nan() {
        assert_eq!(primitive(0.0).unwrap(), 0.0);
        assert_eq!(primitive(-0.7).unwrap(), -primitive(0.7).unwrap());
        assert!(matches!(primitive(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(primitive(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn f_inverts_quadrature_oracle() {
        let d = DualMap::default();
        assert_eq!(d.f(0.0).unwrap(), 0.0);
        let t = quad_primitive(1.0);
        assert_abs_diff_eq!(d.f(1.27127).unwrap(), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(d.f(t).unwrap(), 1.0, epsilon = 1e-11);
    }

    #[test]
    fn large_argument_limit() {
        let d = DualMap::default();
        let ratio = d.f(1e6).unwrap() / 1e3;
        assert_abs_diff_eq!(ratio, FOURTH_ROOT_TWO, epsilon = 1e-3);
        assert!(ratio <= FOURTH_ROOT_TWO);
    }

    #[test]
    fn derivative_bounds() {
        let d = DualMap::default();
        assert_eq!(d.f_prime(0.0).unwrap(), 1.0);
        for t in [0.1, 1.0, 10.0, 1e3] {
            assert!(d.f_prime(t).unwrap() <= 1.0);
            assert!(d.f_prime(-t).unwrap() <= 1.0);
        }
        let big = d.f_prime(1e6).unwrap();
        assert!(big > 0.0 && big < 1e-2);
        // f ≈ 2^{1/4} sqrt(t)  =>  f' ≈ (2 sqrt(2) t)^{-1/2}
        let asym = 1.0 / (2.0 * std::f64::consts::SQRT_2 * 1e6_f64).sqrt();
        assert!((big - asym).abs() / asym < 1e-2);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let d = DualMap::default();
        assert_eq!(d.f_second(0.0).unwrap(), 0.0);
        assert_eq!(d.f_second(-2.5).unwrap(), -d.f_second(2.5).unwrap());
        let exact = d.f_second(1.0).unwrap();
        let f1 = d.f(1.0).unwrap();
        let fp1 = d.f_prime(1.0).unwrap();
        assert_eq!(exact, -2.0 * f1 * fp1.powi(4));
        let step = 1e-5;
        let fd = (d.f_prime(1.0 + step).unwrap() - d.f_prime(1.0 - step).unwrap()) / (2.0 * step);
        assert!((exact - fd).abs() <= 1e-6, "{exact} vs {fd}");
        assert!(d.f_second(0.3).unwrap() < 0.0);
    }

    #[test]
    fn field_maps() {
        let d = DualMap::default();
        assert_eq!(d.map_field(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(d.map_field(&[0.42]).unwrap()[0], d.f(0.42).unwrap());
        assert_abs_diff_eq!(d.map_field(&[1.27127]).unwrap()[0], 1.0, epsilon = 1e-4);
        assert_eq!(d.map_prime_field(&[0.0]).unwrap(), vec![1.0]);
        let err = d.map_field(&[0.0, f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("entry 1"));
    }

    #[test]
    fn constructor_validates() {
        assert!(DualMap::new(0.0, 10).is_err());
        assert!(DualMap::new(1e-12, 0).is_err());
        assert!(DualMap::new(1e-10, 5).is_ok());
    }

    #[test]
    fn round_trip_and_ode_consistency_on_log_samples() {
        let d = DualMap::default();
        for k in 0..=1600 {
            let t = 10f64.powf(-8.0 + k as f64 * 0.01);
            for t in [t, -t] {
                let s = d.f(t).unwrap();
                let back = primitive(s).unwrap();
                assert!((back - t).abs() <= 10.0 * d.newton_tol() * t.abs().max(1.0), "t={t}");
                let ode = d.f_prime(t).unwrap() * (1.0 + 2.0 * s * s).sqrt();
                assert!((ode - 1.0).abs() <= 1e-10);
                assert_eq!(d.f(-t).unwrap(), -s);
            }
        }
    }

    #[test]
    fn small_argument_limit() {
        let d = DualMap::default();
        for t in [1e-4, 3e-5, 1e-6, 1e-8] {
            assert!((d.f(t).unwrap() / t - 1.0).abs() <= 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone(a in -1e6f64..1e6, b in -1e6f64..1e6) {
                prop_assume!(a < b);
                let d = DualMap::default();
                prop_assert!(d.f(a).unwrap() < d.f(b).unwrap());
            }

            #[test]
            fn pointwise_bounds(t in -1e8f64..1e8) {
                let d = DualMap::default();
                let s = d.f(t).unwrap().abs();
                let a = t.abs();
                prop_assert!(s <= a);
                prop_assert!(s <= FOURTH_ROOT_TWO * a.sqrt());
                let tf = a * d.f_prime(t).unwrap();
                prop_assert!(tf <= s && s / 2.0 <= tf);
            }
        }
    }
}
