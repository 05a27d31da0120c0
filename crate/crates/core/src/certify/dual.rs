use crate::certify::{CertReport, Check};
use crate::dualmap::{DualMap, FOURTH_ROOT_TWO};
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 1000;

/// Log-spaced `|t|` in `[1e-8, 1e8]`, both signs, plus 0.
fn samples(count: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    for i in 0..count {
        let e = -8.0 + 16.0 * i as f64 / (count - 1) as f64;
        let t = 10f64.powf(e);
        out.push(t);
        out.push(-t);
    }
    out
}

/// Sweeps the six properties of the dual map and measures
/// `C₁ = inf_{|t|≤1} |f(t)|/|t|` and `C₂ = inf_{|t|≥1} |f(t)|/√|t|`.
pub fn certify_dual(dual: &DualMap, sample_count: usize) -> Result<CertReport> {
    if sample_count < MIN_SAMPLES {
        return Err(Error::Parameter(format!(
            "sample_count must be at least {MIN_SAMPLES} (got {sample_count})"
        )));
    }
    let ts = samples(sample_count);
    let mut values = Vec::with_capacity(ts.len());
    for &t in &ts {
        let (s, d) = dual.eval(t)?;
        values.push((t, s, d));
    }

    // (1) well defined, odd, strictly increasing, inverse of the primitive
    let mut smooth = f64::INFINITY;
    let mut sorted: Vec<(f64, f64)> = values.iter().map(|&(t, s, _)| (t, s)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        smooth = smooth.min(w[1].1 - w[0].1);
    }
    for &(t, s, d) in &values {
        let ode = (d * (1.0 + 2.0 * s * s).sqrt() - 1.0).abs();
        smooth = smooth.min(1e-10 - ode);
        let odd = dual.f(-t)?;
        smooth = smooth.min(if odd == -s { 1.0 } else { -(odd + s).abs() });
        let back = dual.inverse(s)?;
        smooth = smooth.min(10.0 * dual.newton_tol() * t.abs().max(1.0) - (back - t).abs());
    }

    // (2) both limits: small-t ratio within 1e-6 for |t| <= 1e-4, and the
    // large-t ratio within 1e-3 from t = 1e6 on
    let mut limits = f64::INFINITY;
    for &(t, s, _) in &values {
        let a = t.abs();
        if a > 0.0 && a <= 1e-4 {
            limits = limits.min(1e-6 - (s / t - 1.0).abs());
        }
        if a >= 1e6 {
            limits = limits.min(1e-3 - (s.abs() / a.sqrt() - FOURTH_ROOT_TWO).abs());
        }
    }

    let mut bounded = f64::INFINITY;
    let mut two_sided = f64::INFINITY;
    let mut sqrt_bound = f64::INFINITY;
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::INFINITY;
    for &(t, s, d) in &values {
        let (a, s) = (t.abs(), s.abs());
        bounded = bounded.min((1.0 - d.abs()).min(a - s));
        // f and f' each carry a relative error of an ulp or so, while the
        // exact gap s - t f' shrinks like t^3; allow a few ulps of s
        let td = a * d;
        let slack = 4.0 * f64::EPSILON * s;
        two_sided = two_sided.min((td - s / 2.0).min(s - td + slack));
        sqrt_bound = sqrt_bound.min(FOURTH_ROOT_TWO * a.sqrt() - s);
        if a > 0.0 && a <= 1.0 {
            c1 = c1.min(s / a);
        }
        if a >= 1.0 {
            c2 = c2.min(s / a.sqrt());
        }
    }

    let n = values.len();
    let mut report = CertReport::default();
    report.checks.push(Check::new("smooth_odd_invertible", n, smooth));
    report.checks.push(Check::new("limits_at_zero_and_infinity", n, limits));
    report.checks.push(Check::new("derivative_and_value_bounds", n, bounded));
    report.checks.push(Check::new("two_sided_derivative_bound", n, two_sided));
    report.checks.push(Check::new("square_root_bound", n, sqrt_bound));
    report.checks.push(Check::new("positive_lower_constants", n, c1.min(c2)));
    report.constants.insert("C1".into(), c1);
    report.constants.insert("C2".into(), c2);
    report.constants.insert("f(1e6)/1e3".into(), dual.f(1e6)? / 1e3);
    Ok(report)
}
