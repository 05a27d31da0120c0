use std::sync::Arc;

use crate::certify::parallel_map;
use crate::domain::{Field, ModelParams, ReducedGrid, Regime};
use crate::dualmap::DualMap;
use crate::error::{Error, Result};
use crate::flow::project_mass;
use crate::functionals;

/// `(r₁ − r₂) exp(−|r|² / (2b²))` on the grid, exactly antisymmetric.
pub fn trial_field(grid: &Arc<ReducedGrid>, width: f64) -> Result<Field> {
    let two_b2 = 2.0 * width * width;
    Field::from_fn(grid.clone(), |r| (r[0] - r[1]) * (-((r[0] * r[0] + r[1] * r[1]) + r[2] * r[2]) / two_b2).exp())
        .map(|f| f.antisymmetrize())
}

/// 24 log-spaced widths from two cells up to `L/6`, where the trial has
/// decayed below 1e-8 at the outer boundary.
pub fn default_widths(grid: &ReducedGrid) -> Vec<f64> {
    let lo = 2.0 * grid.spacing();
    let hi = grid.length() / 6.0;
    if hi <= lo {
        return vec![hi];
    }
    let count = 24;
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

fn probe_tolerance(lambda: f64) -> f64 {
    1e-10 * lambda.max(1.0)
}

fn check_grid(params: &ModelParams, grid: &ReducedGrid) -> Result<()> {
    params.validate()?;
    let g = grid.params();
    if g.n_dim != params.n_dim || g.m != params.m {
        return Err(Error::Parameter(format!(
            "grid is built for N={}, m={} but the probe asks for N={}, m={}",
            g.n_dim, g.m, params.n_dim, params.m
        )));
    }
    Ok(())
}

/// `I` of the mass-projected trial for every width; `None` marks a width
/// whose trial vanishes on the grid.
pub fn probe_curve(
    params: &ModelParams,
    dual: &DualMap,
    widths: &[f64],
    grid: &Arc<ReducedGrid>,
) -> Result<Vec<(f64, Option<f64>)>> {
    check_grid(params, grid)?;
    if let Some(b) = widths.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::Parameter(format!("widths must be positive (got {b})")));
    }
    let tol = probe_tolerance(params.lambda);
    parallel_map(widths, |&b| -> Result<(f64, Option<f64>)> {
        let trial = trial_field(grid, b)?;
        match project_mass(&trial, params.lambda, dual, tol) {
            Ok((v, _)) => Ok((b, Some(functionals::energy_i(&v, dual, params)?))),
            Err(Error::Degenerate(_)) => Ok((b, None)),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect()
}

/// Smallest `I` over the trial family and the width attaining it. This is an
/// upper bound for the constrained infimum, not the infimum itself.
pub fn negativity_probe(
    params: &ModelParams,
    dual: &DualMap,
    widths: &[f64],
    grid: &Arc<ReducedGrid>,
) -> Result<(f64, f64)> {
    probe_curve(params, dual, widths, grid)?
        .into_iter()
        .filter_map(|(b, e)| e.map(|e| (e, b)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::Degenerate("every trial width vanished on the grid".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScan {
    /// Smallest grid mass with a negative probe value.
    pub lambda_star: Option<f64>,
    /// `(λ, best_I)` in input order.
    pub curve: Vec<(f64, f64)>,
    /// Whether negativity, once reached, persists for every larger grid mass.
    pub upward_closed: bool,
    pub warnings: Vec<String>,
}

/// Probes every mass on `lambda_grid` with [`default_widths`]. Only for the
/// intermediate regime, where a positive threshold is expected.
pub fn lambda_threshold_scan(
    params: &ModelParams,
    dual: &DualMap,
    lambda_grid: &[f64],
    grid: &Arc<ReducedGrid>,
) -> Result<ThresholdScan> {
    check_grid(params, grid)?;
    if params.regime() != Regime::Intermediate {
        return Err(Error::Parameter(format!(
            "the threshold scan needs p in [2+4/N, 4+4/N) (got p={}); use the probe directly below 2+4/N",
            params.p
        )));
    }
    if lambda_grid.is_empty() {
        return Err(Error::Parameter("lambda_grid is empty".into()));
    }
    if lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) || lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("lambda_grid must be positive and increasing".into()));
    }
    let widths = default_widths(grid);
    let mut curve = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let p = params.with_lambda(lambda)?;
        let (best, _) = negativity_probe(&p, dual, &widths, grid)?;
        curve.push((lambda, best));
    }
    let lambda_star = curve.iter().find(|(_, e)| *e < 0.0).map(|(l, _)| *l);
    let mut warnings = Vec::new();
    let upward_closed = match curve.iter().position(|(_, e)| *e < 0.0) {
        Some(first) => curve[first..].iter().all(|(_, e)| *e < 0.0),
        None => true,
    };
    if !upward_closed {
        warnings.push("probe values turn nonnegative again above lambda_star; the trial family is only an upper bound".into());
    }
    Ok(ThresholdScan {
        lambda_star,
        curve,
        upward_closed,
        warnings,
    })
}
