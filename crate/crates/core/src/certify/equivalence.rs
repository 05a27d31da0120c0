use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{parallel_map, CertReport, Check};
use crate::domain::{Field, ModelParams, ReducedGrid};
use crate::dualmap::DualMap;
use crate::error::{Error, Result};
use crate::functionals;

/// Box radius for the equivalence trials; the random bumps are below 1e-4
/// of their peak there.
const BOX: f64 = 10.0;

/// Errors of one trial field across the grid sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceSample {
    /// `|J(f(v)) − I(v)|` per grid size.
    pub errors: Vec<f64>,
    pub energy_i: Vec<f64>,
    /// `|(J̄ − J) − (Ī − I)|` per grid size, together with its rounding scale.
    pub mu_mismatch: Vec<(f64, f64)>,
}

/// A smooth field: 1 to 3 Gaussian bumps with centres in `[0, 2]`, widths in
/// `[0.8, 1.6]` and amplitudes of either sign between 0.5 and 1.
fn bumps(seed: u64) -> Vec<([f64; 3], f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=3);
    (0..count)
        .map(|_| {
            let c = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)];
            let a = rng.gen_range(0.5..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (c, a, rng.gen_range(0.8..1.6))
        })
        .collect()
}

fn sample(grid: &Arc<ReducedGrid>, bumps: &[([f64; 3], f64, f64)], axes: usize) -> Result<Field> {
    Field::from_fn(grid.clone(), |r| {
        bumps
            .iter()
            .map(|(c, a, b)| {
                let d2: f64 = (0..axes).map(|k| (r[k] - c[k]).powi(2)).sum();
                a * (-d2 / (2.0 * b * b)).exp()
            })
            .sum()
    })
}

/// Errors of the discrete identity for one field `v` given on every grid.
pub fn equivalence_errors(
    fields: &[Field],
    mu: f64,
    dual: &DualMap,
    params: &ModelParams,
) -> Result<EquivalenceSample> {
    let mut out = EquivalenceSample {
        errors: Vec::new(),
        energy_i: Vec::new(),
        mu_mismatch: Vec::new(),
    };
    for v in fields {
        let u = functionals::to_physical(v, dual)?;
        let i = functionals::energy_i(v, dual, params)?;
        let j = functionals::energy_j(&u, params)?;
        let i_bar = functionals::energy_i_bar(v, mu, dual, params)?;
        let j_bar = functionals::energy_j_bar(&u, mu, params)?;
        out.errors.push((j - i).abs());
        out.energy_i.push(i);
        let scale = 8.0 * f64::EPSILON * (i.abs() + j.abs() + i_bar.abs() + j_bar.abs());
        out.mu_mismatch.push((((j_bar - j) - (i_bar - i)).abs(), scale));
    }
    Ok(out)
}

/// Least-squares slope of `−log e` against `log n`; `None` when any error
/// is exactly zero.
fn observed_order(sizes: &[usize], errors: &[f64]) -> Option<f64> {
    if errors.iter().any(|&e| e == 0.0) {
        return None;
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Refinement study of `J(f(v)) = I(v)` on random smooth fields.
pub fn check_equivalence(params: &ModelParams, grid_sizes: &[usize], trials: usize, seed: u64) -> Result<CertReport> {
    params.validate()?;
    if trials < 5 {
        return Err(Error::Parameter(format!("trials must be at least 5 (got {trials})")));
    }
    if grid_sizes.len() < 2 || grid_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("grid_sizes must hold at least two increasing sizes".into()));
    }
    let grids = grid_sizes
        .iter()
        .map(|&n| ReducedGrid::new(*params, BOX, n).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let axes = grids[0].axes();
    let dual = DualMap::default();

    let seeds: Vec<u64> = (0..trials as u64).map(|t| seed.wrapping_add(t)).collect();
    let results = parallel_map(&seeds, |&s| -> Result<EquivalenceSample> {
        let b = bumps(s);
        let fields = grids.iter().map(|g| sample(g, &b, axes)).collect::<Result<Vec<_>>>()?;
        let mu = ChaCha8Rng::seed_from_u64(s ^ 0x5eed).gen_range(-2.0..2.0);
        equivalence_errors(&fields, mu, &dual, params)
    });

    let mut order_margin = f64::INFINITY;
    let mut error_margin = f64::INFINITY;
    let mut mu_margin = f64::INFINITY;
    let mut min_order = f64::INFINITY;
    let mut worst_finest = 0.0f64;
    for r in results {
        let r = r?;
        if let Some(order) = observed_order(grid_sizes, &r.errors) {
            min_order = min_order.min(order);
            order_margin = order_margin.min(order - 1.8);
        }
        let finest = *r.errors.last().expect("at least two sizes");
        let energy = *r.energy_i.last().expect("at least two sizes");
        worst_finest = worst_finest.max(finest);
        error_margin = error_margin.min(1e-4 * (1.0 + energy.abs()) - finest);
        for (gap, scale) in r.mu_mismatch {
            mu_margin = mu_margin.min(scale - gap);
        }
    }

    let samples = trials * grid_sizes.len();
    let mut report = CertReport::default();
    report.checks.push(Check::new("observed_order_at_least_1.8", trials, order_margin));
    report.checks.push(Check::new("finest_grid_error", trials, error_margin));
    report.checks.push(Check::new("multiplier_terms_agree", samples, mu_margin));
    if min_order.is_finite() {
        report.constants.insert("min_observed_order".into(), min_order);
    }
    report.constants.insert("max_finest_error".into(), worst_finest);
    Ok(report)
}
