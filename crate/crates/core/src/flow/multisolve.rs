//! Deflated multi-start search for several distinct solution pairs.
//!
//! This is a heuristic: it returns distinct constrained critical points in
//! the antisymmetric sector, not minimax levels. Start `i` uses seed
//! `seed + i`. Once solutions are known, each start first runs the flow on
//! `I` plus the deflation penalty, then is polished on the undeflated
//! equation by deflated Newton, which converges to critical points of `I`
//! while being repelled from the known pairs.

use std::sync::Arc;

use crate::domain::{Field, ModelParams, ReducedGrid, Sector};
use crate::dualmap::DualMap;
use crate::error::{Error, Result};
use crate::flow::newton::{newton_polish, NewtonOptions};
use crate::flow::{random_start, run_flow, FlowConfig, MethodRegistry, Objective, SolveReport, TraceRow};
use crate::functionals;

#[derive(Debug, Clone, PartialEq)]
pub struct MultisolveOptions {
    /// Number of distinct pairs wanted.
    pub k: usize,
    pub max_starts: usize,
    /// Iteration cap for the deflated flow stage of each start. The stage
    /// only smooths the start; Newton does the rest.
    pub deflated_iters: usize,
    pub newton: NewtonOptions,
}

impl Default for MultisolveOptions {
    fn default() -> Self {
        Self {
            k: 3,
            max_starts: 12,
            deflated_iters: 5,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultisolveOutcome {
    /// Distinct pairs sorted by `energy_I` ascending.
    pub solutions: Vec<SolveReport>,
    pub starts_used: usize,
    /// Fewer than `k` pairs were found within the start budget.
    pub shortfall: bool,
}

/// Distance between the pairs `±a` and `±b`.
pub fn pair_distance(a: &Field, b: &Field) -> f64 {
    let minus = a.add_scaled(-1.0, b).norm();
    let plus = a.add_scaled(1.0, b).norm();
    minus.min(plus)
}

pub fn multisolve(
    grid: &Arc<ReducedGrid>,
    params: &ModelParams,
    config: &FlowConfig,
    dual: &DualMap,
    options: &MultisolveOptions,
) -> Result<MultisolveOutcome> {
    multisolve_with(grid, params, config, dual, options, &MethodRegistry::default())
}

pub fn multisolve_with(
    grid: &Arc<ReducedGrid>,
    params: &ModelParams,
    config: &FlowConfig,
    dual: &DualMap,
    options: &MultisolveOptions,
    registry: &MethodRegistry,
) -> Result<MultisolveOutcome> {
    if options.k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    config.validate()?;
    params.validate()?;
    registry.get(&config.method)?;
    let separation = 1e-3 * params.lambda.sqrt();

    let mut found: Vec<SolveReport> = Vec::new();
    let mut starts_used = 0;
    for start in 0..options.max_starts {
        if found.len() >= options.k {
            break;
        }
        starts_used += 1;
        let seed = config.seed.wrapping_add(start as u64);
        let v0 = random_start(grid, Sector::Antisymmetric, seed, params.lambda, dual, config.tol_mass)?;
        let known: Vec<Field> = found.iter().map(|r| r.field.clone()).collect();
        let Some(report) = run_start(&v0, params, config, dual, options, registry, &known)? else {
            continue;
        };
        if known.iter().all(|w| pair_distance(&report.field, w) > separation) {
            found.push(report);
        }
    }
    found.sort_by(|a, b| a.diagnostics.energy_i.total_cmp(&b.diagnostics.energy_i));
    Ok(MultisolveOutcome {
        shortfall: found.len() < options.k,
        solutions: found,
        starts_used,
    })
}

/// One start: flow (deflated once solutions are known), then Newton polish.
/// `None` when the start does not reach a critical point.
fn run_start(
    v0: &Field,
    params: &ModelParams,
    config: &FlowConfig,
    dual: &DualMap,
    options: &MultisolveOptions,
    registry: &MethodRegistry,
    known: &[Field],
) -> Result<Option<SolveReport>> {
    let mut stage = config.clone();
    if !known.is_empty() {
        stage.max_iters = stage.max_iters.min(options.deflated_iters);
    }
    let objective = Objective {
        params,
        dual,
        deflate: known,
        strength: config.deflation_strength,
    };
    let flowed = match run_flow(v0, &stage, registry, objective) {
        Ok(report) => report,
        Err(Error::Stagnation { report, .. }) => *report,
        Err(e) if e.is_parameter() => return Err(e),
        Err(_) => return Ok(None),
    };
    if known.is_empty() && flowed.converged {
        return Ok(Some(flowed));
    }

    let polished = match newton_polish(
        &flowed.field,
        params,
        dual,
        known,
        config.tol_grad,
        config.tol_mass,
        &options.newton,
    ) {
        Ok(p) => p,
        Err(e) if e.is_parameter() => return Err(e),
        Err(_) => return Ok(None),
    };
    if !polished.converged {
        return Ok(None);
    }
    let diagnostics = functionals::diagnostics(&polished.field, dual, params)?;
    if (diagnostics.mass - params.lambda).abs() > config.tol_mass {
        return Ok(None);
    }
    let mut trace = flowed.trace;
    trace.push(TraceRow {
        iter: flowed.iterations + polished.iterations,
        diagnostics,
        step_size: 0.0,
    });
    Ok(Some(SolveReport {
        converged: true,
        iterations: flowed.iterations + polished.iterations,
        diagnostics,
        trace,
        field: polished.field,
        sector: Sector::Antisymmetric,
    }))
}
