//! Constrained critical points of `I` on `{∫ f(v)² = λ}`.
//!
//! Each iteration takes a tangential descent step chosen by a registered
//! [`DescentMethod`], backtracks until the Armijo condition holds, and maps
//! the trial point back onto the mass shell by scaling `c·v`. Scaling is an
//! exact projection because `c ↦ ∫ f(c v)²` is strictly increasing.

mod methods;
mod multisolve;
mod newton;
mod precond;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Field, ModelParams, ReducedGrid, Sector};
use crate::dualmap::DualMap;
use crate::error::{Error, Result};
use crate::functionals::{self, Diagnostics, DualValues};

pub use methods::{DescentMethod, FlowState, L2Gradient, MethodRegistry, SearchDirection, SobolevGradient};
pub use multisolve::{multisolve, multisolve_with, pair_distance, MultisolveOptions, MultisolveOutcome};
pub use newton::{newton_polish, NewtonOptions, Polished};
pub use precond::ShiftedLaplacianSolver;

/// Smallest trial step before the line search gives up.
pub const MIN_STEP: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub tol_grad: f64,
    pub tol_mass: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub deflation_strength: f64,
    /// Name of the descent strategy in the [`MethodRegistry`].
    pub method: String,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step_init: 0.1,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            tol_grad: 1e-6,
            tol_mass: 1e-10,
            max_iters: 50_000,
            seed: 0,
            deflation_strength: 1.0,
            method: "sobolev".into(),
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(what.to_string()));
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad("step_init must be positive");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.tol_grad > 0.0) {
            return bad("tol_grad must be positive");
        }
        if !(self.tol_mass > 0.0) {
            return bad("tol_mass must be positive");
        }
        if !(self.deflation_strength >= 0.0 && self.deflation_strength.is_finite()) {
            return bad("deflation_strength must be nonnegative");
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    #[serde(flatten)]
    pub diagnostics: Diagnostics,
    /// Step that produced this iterate (0 for the starting point).
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
    pub trace: Vec<TraceRow>,
    pub field: Field,
    pub sector: Sector,
}

/// Rescales `v` onto `∫ f(c v)² = λ`; returns `(c v, c)`.
pub fn project_mass(v: &Field, lambda: f64, dual: &DualMap, tol: f64) -> Result<(Field, f64)> {
    if v.is_zero() {
        return Err(Error::Degenerate("cannot project the zero field onto a mass shell".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!("lambda must be positive (got {lambda})")));
    }
    let grid = v.grid();
    let weights = grid.weights();
    // (mass(c v) - λ, d/dc mass(c v))
    let eval = |c: f64| -> Result<(f64, f64)> {
        let mut m = 0.0;
        let mut dm = 0.0;
        for (&t, &w) in v.values().iter().zip(weights) {
            let (s, d) = dual.eval(c * t)?;
            m += w * s * s;
            dm += w * 2.0 * s * d * t;
        }
        Ok((m - lambda, dm))
    };

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let (mut r_hi, _) = eval(hi)?;
    while r_hi < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 2f64.powi(64) {
            return Err(Error::Numeric("mass projection bracket exceeded 2^64".into()));
        }
        r_hi = eval(hi)?.0;
    }

    let mut c = if lo == 0.0 { 1.0 } else { hi };
    let (mut r, mut dr) = eval(c)?;
    for _ in 0..200 {
        if r.abs() <= tol {
            // polish: the line search compares energies at roundoff level,
            // so the shell is hit as tightly as the arithmetic allows
            for _ in 0..3 {
                let next = c - r / dr;
                if !(next > 0.0) || next == c {
                    break;
                }
                let (r_next, dr_next) = eval(next)?;
                if r_next.abs() >= r.abs() {
                    break;
                }
                (c, r, dr) = (next, r_next, dr_next);
            }
            return Ok((v.scaled(c), c));
        }
        if r > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        let mut next = c - r / dr;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == c {
            break;
        }
        c = next;
        (r, dr) = eval(c)?;
    }
    Err(Error::Numeric(format!(
        "mass projection stalled at c = {c} with mass error {r:e} (tolerance {tol:e})"
    )))
}

/// Energy plus optional deflation of previously found solution pairs:
/// `I(v) + s Σᵢ 1 / (‖v − vᵢ‖² ‖v + vᵢ‖²)`.
#[derive(Clone, Copy)]
pub(crate) struct Objective<'a> {
    pub params: &'a ModelParams,
    pub dual: &'a DualMap,
    pub deflate: &'a [Field],
    pub strength: f64,
}

pub(crate) struct Evaluation {
    pub fv: DualValues,
    pub energy_i: f64,
    pub value: f64,
}

impl Objective<'_> {
    fn deflated(&self) -> bool {
        self.strength > 0.0 && !self.deflate.is_empty()
    }

    fn penalty_terms(&self, v: &Field) -> Vec<(f64, f64, f64)> {
        self.deflate
            .iter()
            .map(|w| {
                let minus = v.add_scaled(-1.0, w).dot(&v.add_scaled(-1.0, w));
                let plus = v.add_scaled(1.0, w).dot(&v.add_scaled(1.0, w));
                (minus, plus, 1.0 / (minus * plus))
            })
            .collect()
    }

    pub fn evaluate(&self, v: &Field) -> Result<Evaluation> {
        let fv = DualValues::new(v, self.dual)?;
        let energy_i = functionals::energy_i_with(v, &fv, self.params);
        let mut value = energy_i;
        if self.deflated() {
            value += self.strength * self.penalty_terms(v).iter().map(|t| t.2).sum::<f64>();
        }
        if !value.is_finite() {
            return Err(Error::Numeric("objective is not finite".into()));
        }
        Ok(Evaluation { fv, energy_i, value })
    }

    pub fn gradient(&self, v: &Field, eval: &Evaluation) -> Field {
        let mut grad = functionals::grad_i_with(v, &eval.fv, self.params);
        if self.deflated() {
            // ∇ 1/(ab) = −(1/(ab)) (2(v − w)/a + 2(v + w)/b)
            for (w, (a, b, p)) in self.deflate.iter().zip(self.penalty_terms(v)) {
                let k = -2.0 * self.strength * p;
                grad = grad
                    .add_scaled(k / a, &v.add_scaled(-1.0, w))
                    .add_scaled(k / b, &v.add_scaled(1.0, w));
            }
        }
        grad
    }
}

/// Seeded start: a few Gaussians with random centres and amplitudes in
/// `[−1, 1]`, projected onto the sector and then onto the mass shell.
/// A start annihilated by the projection is redrawn with the next seed, up
/// to 100 times.
pub fn random_start(
    grid: &Arc<ReducedGrid>,
    sector: Sector,
    seed: u64,
    lambda: f64,
    dual: &DualMap,
    tol_mass: f64,
) -> Result<Field> {
    let axes = grid.axes();
    let reach = grid.length() / 4.0;
    // widths are relative to the box: 0.6..1.4 at L = 8
    let scale = grid.length() / 8.0;
    for attempt in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let count = rng.gen_range(2..=4);
        let bumps: Vec<([f64; 3], f64, f64)> = (0..count)
            .map(|_| {
                let mut c = [0.0; 3];
                for slot in c.iter_mut().take(axes) {
                    *slot = rng.gen_range(0.0..reach);
                }
                (c, rng.gen_range(-1.0..1.0), scale * rng.gen_range(0.6..1.4))
            })
            .collect();
        let raw = Field::from_fn(grid.clone(), |r| {
            bumps
                .iter()
                .map(|(c, a, b)| {
                    let d2: f64 = (0..3).map(|k| (r[k] - c[k]).powi(2)).sum();
                    a * (-d2 / (2.0 * b * b)).exp()
                })
                .sum()
        })?;
        let v = match sector {
            Sector::Antisymmetric => raw.antisymmetrize(),
            Sector::Unrestricted => raw,
        };
        if v.max_abs() < 1e-12 {
            continue;
        }
        return Ok(project_mass(&v, lambda, dual, tol_mass)?.0);
    }
    Err(Error::Degenerate(format!(
        "no usable start in 100 seeds from {seed}"
    )))
}

pub fn solve(v0: &Field, params: &ModelParams, config: &FlowConfig, dual: &DualMap) -> Result<SolveReport> {
    solve_with(v0, params, config, dual, &MethodRegistry::default())
}

pub fn solve_with(
    v0: &Field,
    params: &ModelParams,
    config: &FlowConfig,
    dual: &DualMap,
    registry: &MethodRegistry,
) -> Result<SolveReport> {
    let objective = Objective {
        params,
        dual,
        deflate: &[],
        strength: 0.0,
    };
    run_flow(v0, config, registry, objective)
}

/// Snapshot of a feasible iterate.
struct Iterate {
    v: Field,
    eval: Evaluation,
    grad: Field,
    normal: Field,
    mu: f64,
    proj_norm: f64,
    mass: f64,
}

impl Iterate {
    fn new(v: Field, objective: &Objective<'_>) -> Result<Self> {
        let eval = objective.evaluate(&v)?;
        Self::from_eval(v, eval, objective)
    }

    fn from_eval(v: Field, eval: Evaluation, objective: &Objective<'_>) -> Result<Self> {
        let grad = objective.gradient(&v, &eval);
        let normal = functionals::constraint_normal(&v, &eval.fv);
        let mu = functionals::least_squares_mu(&grad, &normal)?;
        let proj_norm = grad.add_scaled(-mu, &normal).norm();
        let mass = v.grid().dot_values(&eval.fv.f, &eval.fv.f);
        if !proj_norm.is_finite() {
            return Err(Error::Numeric("projected gradient is not finite".into()));
        }
        Ok(Self {
            v,
            eval,
            grad,
            normal,
            mu,
            proj_norm,
            mass,
        })
    }

    fn diagnostics(&self, objective: &Objective<'_>) -> Result<Diagnostics> {
        if objective.deflated() {
            // deflated runs still report the undeflated stationarity measures
            return functionals::diagnostics(&self.v, objective.dual, objective.params);
        }
        let u = self.v.with_values(self.eval.fv.f.clone())?;
        Ok(Diagnostics {
            energy_i: self.eval.energy_i,
            energy_j: functionals::energy_j(&u, objective.params)?,
            mass: self.mass,
            l2_of_v: self.v.dot(&self.v),
            mu: self.mu,
            residual_norm: self.proj_norm,
            projected_grad_norm: self.proj_norm,
        })
    }
}

pub(crate) fn run_flow(
    v0: &Field,
    config: &FlowConfig,
    registry: &MethodRegistry,
    objective: Objective<'_>,
) -> Result<SolveReport> {
    config.validate()?;
    objective.params.validate()?;
    let method = registry.get(&config.method)?;
    let lambda = objective.params.lambda;
    let sector = v0.sector();
    let (start, _) = project_mass(v0, lambda, objective.dual, config.tol_mass)?;
    let mut direction = method.bind(start.grid());

    let mut it = Iterate::new(start, &objective)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        diagnostics: it.diagnostics(&objective)?,
        step_size: 0.0,
    }];
    let is_converged = |it: &Iterate| it.proj_norm <= config.tol_grad && (it.mass - lambda).abs() <= config.tol_mass;

    let mut step = config.step_init;
    let mut iterations = 0;
    let mut converged = is_converged(&it);
    while !converged && iterations < config.max_iters {
        let d = direction.direction(&FlowState {
            field: &it.v,
            gradient: &it.grad,
            normal: &it.normal,
            mu: it.mu,
        })?;
        let slope = it.grad.add_scaled(-it.mu, &it.normal).dot(&d);
        if !(slope > 0.0) {
            return Err(stagnation(iterations, &it, trace, sector, &objective));
        }
        // resolution of objective differences; stays under the 1e-12 descent slack
        let slack = (64.0 * f64::EPSILON * (it.eval.value.abs() + it.v.grid().dirichlet_energy(it.v.values())))
            .min(1e-12);

        let mut h = step;
        let mut first_try = true;
        let accepted = loop {
            let trial = it.v.add_scaled(-h, &d);
            if !trial.is_zero() {
                let (candidate, _) = project_mass(&trial, lambda, objective.dual, config.tol_mass)?;
                let eval = objective.evaluate(&candidate)?;
                let predicted = config.armijo_c * h * slope;
                let change = eval.value - it.eval.value;
                if predicted > slack {
                    if change <= slack - predicted {
                        break Some(Iterate::from_eval(candidate, eval, &objective)?);
                    }
                } else if change <= slack {
                    // below energy resolution: accept only on stationarity progress
                    let next = Iterate::from_eval(candidate, eval, &objective)?;
                    if next.proj_norm < it.proj_norm {
                        break Some(next);
                    }
                }
            }
            h *= config.backtrack_factor;
            first_try = false;
            if h < MIN_STEP {
                break None;
            }
        };
        let Some(next) = accepted else {
            return Err(stagnation(iterations, &it, trace, sector, &objective));
        };
        iterations += 1;
        it = next;
        trace.push(TraceRow {
            iter: iterations,
            diagnostics: it.diagnostics(&objective)?,
            step_size: h,
        });
        step = if first_try {
            (2.0 * h).min(1e3 * config.step_init.max(1.0))
        } else {
            h
        };
        converged = is_converged(&it);
    }

    let diagnostics = it.diagnostics(&objective)?;
    Ok(SolveReport {
        converged,
        iterations,
        diagnostics,
        trace,
        field: it.v,
        sector,
    })
}

fn stagnation(
    iterations: usize,
    it: &Iterate,
    trace: Vec<TraceRow>,
    sector: Sector,
    objective: &Objective<'_>,
) -> Error {
    let diagnostics = match it.diagnostics(objective) {
        Ok(d) => d,
        Err(e) => return e,
    };
    Error::Stagnation {
        iterations,
        grad_norm: it.proj_norm,
        report: Box::new(SolveReport {
            converged: false,
            iterations,
            diagnostics,
            trace,
            field: it.v.clone(),
            sector,
        }),
    }
}
