use crate::certify::{CertReport, Check};
use crate::domain::{critical_exponent, regime_of, upper_exponent, ModelParams, Regime};
use crate::error::{Error, Result};

/// Exponents of the lower bound
/// `I(v) ≥ ½‖∇v‖² − C λ^{e_M} ‖∇v‖^{2 e_E}` on the mass shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    /// `(p−2)(N−2) / (2(N+2))`
    pub theta: f64,
    /// `(p−2)N / (2(N+2))`
    pub energy: f64,
    /// `(4N − (N−2)p) / (2(N+2))`
    pub mass: f64,
}

impl Exponents {
    pub fn new(n_dim: usize, p: f64) -> Self {
        let n = n_dim as f64;
        let denom = 2.0 * (n + 2.0);
        Self {
            theta: (p - 2.0) * (n - 2.0) / denom,
            energy: (p - 2.0) * n / denom,
            mass: (4.0 * n - (n - 2.0) * p) / denom,
        }
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Subcritical => "subcritical",
        Regime::Intermediate => "intermediate",
    }
}

pub fn coercivity_report(params: &ModelParams) -> Result<CertReport> {
    params.validate()?;
    let e = Exponents::new(params.n_dim, params.p);
    let mut report = CertReport::default();
    report.checks.push(Check::new("energy_exponent_below_one", 1, 1.0 - e.energy));
    report.constants.insert("theta".into(), e.theta);
    report.constants.insert("e_E".into(), e.energy);
    report.constants.insert("e_M".into(), e.mass);
    report.constants.insert("critical_exponent".into(), critical_exponent(params.n_dim));
    report.constants.insert("upper_exponent".into(), upper_exponent(params.n_dim));
    report.notes.push(format!("regime: {}", regime_name(params.regime())));
    Ok(report)
}

fn next_down(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    f64::from_bits(x.to_bits() - 1)
}

fn next_up(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    f64::from_bits(x.to_bits() + 1)
}

/// Dense sweep over admissible `p` for one dimension: `e_E < 1` everywhere,
/// and the regime boundaries sit exactly at `2 + 4/N` and `4 + 4/N`.
pub fn exponent_sweep(n_dim: usize, samples: usize) -> Result<CertReport> {
    if samples < 2 {
        return Err(Error::Parameter("need at least two p samples".into()));
    }
    let m = 2;
    let upper = upper_exponent(n_dim);
    let critical = critical_exponent(n_dim);
    let mut ps: Vec<f64> = (1..=samples)
        .map(|i| 2.0 + (upper - 2.0) * i as f64 / (samples + 1) as f64)
        .collect();
    ps.extend([next_up(2.0), next_down(critical), critical, next_down(upper)]);

    let mut worst = f64::INFINITY;
    for &p in &ps {
        let params = ModelParams::new(n_dim, m, p, 1.0)?;
        worst = worst.min(1.0 - Exponents::new(params.n_dim, p).energy);
    }

    // +1 where the classification matches, −1 where it does not
    let agree = |ok: bool| if ok { 1.0 } else { -1.0 };
    let lower_boundary = agree(
        regime_of(n_dim, next_down(critical)) == Regime::Subcritical && regime_of(n_dim, critical) == Regime::Intermediate,
    );
    let upper_boundary = agree(
        ModelParams::new(n_dim, m, next_down(upper), 1.0).is_ok()
            && ModelParams::new(n_dim, m, upper, 1.0).is_err()
            && ModelParams::new(n_dim, m, 2.0, 1.0).is_err()
            && ModelParams::new(n_dim, m, next_up(2.0), 1.0).is_ok(),
    );

    let mut report = CertReport::default();
    report.checks.push(Check::new(format!("energy_exponent_below_one_N{n_dim}"), ps.len(), worst));
    report.checks.push(Check::new(format!("regime_boundary_N{n_dim}"), 2, lower_boundary));
    report.checks.push(Check::new(format!("admissible_range_N{n_dim}"), 4, upper_boundary));
    report.constants.insert(format!("max_e_E_N{n_dim}"), 1.0 - worst);
    Ok(report)
}
