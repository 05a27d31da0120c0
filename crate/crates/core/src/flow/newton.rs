//! Deflated Newton polishing of constrained critical points.
//!
//! Solves `grad I(v) − μ g(v) = 0`, `∫ f(v)² = λ` with the bordered Jacobian
//!
//! ```text
//! [ H − μ B   −g ] [δv]   [−R]
//! [   −gᵀ      0 ] [δμ] = [ c]
//! ```
//!
//! by preconditioned MINRES in the weighted inner product. Known solution
//! pairs are deflated by rescaling each Newton step, which keeps the
//! iteration from returning to them without changing the set of roots.

use crate::domain::{Field, ModelParams, Sector};
use crate::dualmap::DualMap;
use crate::error::{Error, Result};
use crate::flow::precond::ShiftedLaplacianSolver;
use crate::flow::project_mass;
use crate::functionals::{self, signed_power, DualValues};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iters: usize,
    pub max_linear_iters: usize,
    /// Line-search halvings per Newton step.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iters: 60,
            max_linear_iters: 400,
            max_halvings: 30,
        }
    }
}

/// Outcome of a polish: the final feasible iterate and its residual.
#[derive(Debug, Clone)]
pub struct Polished {
    pub field: Field,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Linearisation of the residual at a feasible `v`.
struct Linearization {
    residual: Vec<f64>,
    normal: Vec<f64>,
    /// `−∂(|f|^{p−2} f f′)/∂v − μ ∂(f f′)/∂v`, the diagonal part of the Hessian.
    diag: Vec<f64>,
    mu: f64,
    norm: f64,
}

fn linearize(v: &Field, params: &ModelParams, dual: &DualMap) -> Result<Linearization> {
    let fv = DualValues::new(v, dual)?;
    let grad = functionals::grad_i_with(v, &fv, params);
    let g = functionals::constraint_normal(v, &fv);
    let mu = functionals::least_squares_mu(&grad, &g)?;
    let r = grad.add_scaled(-mu, &g);
    let norm = r.norm();
    if !norm.is_finite() {
        return Err(Error::Numeric("residual is not finite".into()));
    }
    let p = params.p;
    let diag = fv
        .f
        .iter()
        .zip(&fv.f_prime)
        .map(|(&s, &d)| {
            let d2 = -2.0 * s * d.powi(4);
            let a = s.abs().powf(p - 2.0);
            let nonlinear = (p - 1.0) * a * d * d + signed_power(s, p) * d2;
            let normal = d * d + s * d2;
            -nonlinear - mu * normal
        })
        .collect();
    Ok(Linearization {
        residual: r.into_values(),
        normal: g.into_values(),
        diag,
        mu,
        norm,
    })
}

/// Vectors of the bordered system: a field part and the multiplier part.
#[derive(Clone)]
struct Bordered {
    v: Vec<f64>,
    mu: f64,
}

impl Bordered {
    fn zeros(n: usize) -> Self {
        Self { v: vec![0.0; n], mu: 0.0 }
    }

    fn axpy(&mut self, a: f64, x: &Bordered) {
        self.v.iter_mut().zip(&x.v).for_each(|(s, x)| *s += a * x);
        self.mu += a * x.mu;
    }

    fn scale(&mut self, a: f64) {
        self.v.iter_mut().for_each(|s| *s *= a);
        self.mu *= a;
    }
}

struct BorderedSystem<'a> {
    field: &'a Field,
    lin: &'a Linearization,
    solver: &'a ShiftedLaplacianSolver,
    shift: f64,
    schur: f64,
}

impl BorderedSystem<'_> {
    fn dot(&self, a: &Bordered, b: &Bordered) -> f64 {
        self.field.grid().dot_values(&a.v, &b.v) + a.mu * b.mu
    }

    fn apply(&self, x: &Bordered) -> Bordered {
        let grid = self.field.grid();
        let lap = grid.laplacian_values(&x.v);
        let v = lap
            .iter()
            .zip(&x.v)
            .zip(self.lin.diag.iter().zip(&self.lin.normal))
            .map(|((l, xv), (d, g))| -l + d * xv - g * x.mu)
            .collect();
        let mu = -grid.dot_values(&self.lin.normal, &x.v);
        Bordered { v, mu }
    }

    fn precondition(&self, x: &Bordered) -> Bordered {
        let mut v = self.solver.solve(self.shift, &x.v);
        if self.field.sector() == Sector::Antisymmetric {
            v = self.field.grid().antisymmetrize_values(&v);
        }
        Bordered { v, mu: x.mu / self.schur }
    }

    /// Preconditioned MINRES from a zero initial guess.
    fn minres(&self, b: &Bordered, rtol: f64, max_iters: usize) -> Bordered {
        let n = b.v.len();
        let mut x = Bordered::zeros(n);
        let mut v_prev = Bordered::zeros(n);
        let mut v_cur = b.clone();
        let mut z = self.precondition(&v_cur);
        let mut gamma = self.dot(&z, &v_cur).max(0.0).sqrt();
        if gamma == 0.0 {
            return x;
        }
        let gamma0 = gamma;
        let mut gamma_prev = 1.0;
        let mut eta = gamma;
        let (mut s_prev, mut s_cur) = (0.0, 0.0);
        let (mut c_prev, mut c_cur) = (1.0, 1.0);
        let mut w_prev = Bordered::zeros(n);
        let mut w_cur = Bordered::zeros(n);
        for _ in 0..max_iters {
            z.scale(1.0 / gamma);
            let az = self.apply(&z);
            let delta = self.dot(&az, &z);
            let mut v_next = az;
            v_next.axpy(-delta / gamma, &v_cur);
            v_next.axpy(-gamma / gamma_prev, &v_prev);
            let z_next = self.precondition(&v_next);
            let gamma_next = self.dot(&z_next, &v_next).max(0.0).sqrt();

            let a0 = c_cur * delta - c_prev * s_cur * gamma;
            let a1 = (a0 * a0 + gamma_next * gamma_next).sqrt();
            let a2 = s_cur * delta + c_prev * c_cur * gamma;
            let a3 = s_prev * gamma;
            if a1 == 0.0 {
                break;
            }
            let c_next = a0 / a1;
            let s_next = gamma_next / a1;
            let mut w_next = z.clone();
            w_next.axpy(-a3, &w_prev);
            w_next.axpy(-a2, &w_cur);
            w_next.scale(1.0 / a1);
            x.axpy(c_next * eta, &w_next);
            eta *= -s_next;

            if eta.abs() <= rtol * gamma0 || gamma_next == 0.0 {
                break;
            }
            v_prev = std::mem::replace(&mut v_cur, v_next);
            z = z_next;
            gamma_prev = gamma;
            gamma = gamma_next;
            (s_prev, s_cur) = (s_cur, s_next);
            (c_prev, c_cur) = (c_cur, c_next);
            w_prev = std::mem::replace(&mut w_cur, w_next);
        }
        x
    }
}

/// `log m(v)` and its weighted gradient for `m = Πᵢ (λ² / (‖v−vᵢ‖² ‖v+vᵢ‖²) + 1)`.
fn deflation(v: &Field, known: &[Field], lambda: f64) -> (f64, Vec<f64>) {
    let mut log_m = 0.0;
    let mut grad = vec![0.0; v.values().len()];
    for w in known {
        let minus = v.add_scaled(-1.0, w);
        let plus = v.add_scaled(1.0, w);
        let a = minus.dot(&minus);
        let b = plus.dot(&plus);
        let q = lambda * lambda / (a * b);
        log_m += q.ln_1p();
        // ∇ log(q + 1) = −q/(q + 1) · (2(v − w)/a + 2(v + w)/b)
        let k = -2.0 * q / (q + 1.0);
        for ((g, m), p) in grad.iter_mut().zip(minus.values()).zip(plus.values()) {
            *g += k * (m / a + p / b);
        }
    }
    (log_m, grad)
}

/// Damped, deflated Newton from a feasible or near-feasible `v0`.
pub fn newton_polish(
    v0: &Field,
    params: &ModelParams,
    dual: &DualMap,
    known: &[Field],
    tol_grad: f64,
    tol_mass: f64,
    options: &NewtonOptions,
) -> Result<Polished> {
    let lambda = params.lambda;
    let grid = v0.grid().clone();
    let solver = ShiftedLaplacianSolver::new(&grid);
    let (mut v, _) = project_mass(v0, lambda, dual, tol_mass)?;
    let mut lin = linearize(&v, params, dual)?;
    // the line search measures the residual in the (α − Δ)⁻¹ norm, the norm
    // in which the inexact linear solves are accurate
    let merit_shift = (-lin.mu).max(1e-3);
    let merit = |v: &Field, lin: &Linearization| -> f64 {
        let z = solver.solve(merit_shift, &lin.residual);
        let dual_norm = grid.dot_values(&z, &lin.residual).max(0.0).sqrt();
        deflation(v, known, lambda).0.exp() * dual_norm
    };
    let mut current = merit(&v, &lin);

    for iter in 0..options.max_iters {
        if lin.norm <= tol_grad {
            return Ok(Polished {
                field: v,
                residual_norm: lin.norm,
                iterations: iter,
                converged: true,
            });
        }
        let shift = (-lin.mu).max(1e-3);
        let pg = solver.solve(shift, &lin.normal);
        let schur = grid.dot_values(&lin.normal, &pg).max(f64::MIN_POSITIVE);
        let system = BorderedSystem {
            field: &v,
            lin: &lin,
            solver: &solver,
            shift,
            schur,
        };
        let rhs = Bordered {
            v: lin.residual.iter().map(|r| -r).collect(),
            mu: 0.0,
        };
        let rtol = (0.5 * lin.norm).clamp(1e-10, 1e-2);
        let step = system.minres(&rhs, rtol, options.max_linear_iters);
        let mut dv = step.v;
        if v.sector() == Sector::Antisymmetric {
            dv = grid.antisymmetrize_values(&dv);
        }
        if !known.is_empty() {
            let (_, dlog) = deflation(&v, known, lambda);
            let tau = 1.0 - grid.dot_values(&dlog, &dv);
            if tau.abs() > 1e-8 {
                dv.iter_mut().for_each(|x| *x /= tau);
            }
        }
        let direction = v.with_values(dv)?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let trial = v.add_scaled(t, &direction);
            if !trial.is_zero() {
                if let Ok((candidate, _)) = project_mass(&trial, lambda, dual, tol_mass) {
                    if let Ok(next) = linearize(&candidate, params, dual) {
                        let value = merit(&candidate, &next);
                        if value < (1.0 - 1e-4 * t) * current {
                            accepted = Some((candidate, next, value));
                            break;
                        }
                    }
                }
            }
            t *= 0.5;
        }
        let Some((next_v, next_lin, value)) = accepted else {
            return Ok(Polished {
                field: v,
                residual_norm: lin.norm,
                iterations: iter,
                converged: false,
            });
        };
        v = next_v;
        lin = next_lin;
        current = value;
    }
    Ok(Polished {
        converged: lin.norm <= tol_grad,
        field: v,
        residual_norm: lin.norm,
        iterations: options.max_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ReducedGrid;
    use crate::flow::random_start;
    use std::sync::Arc;

    fn setup(p: f64, lambda: f64) -> (Arc<ReducedGrid>, ModelParams) {
        let params = ModelParams::new(4, 2, p, lambda).unwrap();
        (Arc::new(ReducedGrid::new(params, 6.0, 24).unwrap()), params)
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let (grid, params) = setup(2.5, 3.0);
        let dual = DualMap::default();
        let v = random_start(&grid, Sector::Antisymmetric, 4, params.lambda, &dual, 1e-12).unwrap();
        let w = random_start(&grid, Sector::Antisymmetric, 9, 1.0, &dual, 1e-12).unwrap();
        let lin = linearize(&v, &params, &dual).unwrap();
        let solver = ShiftedLaplacianSolver::new(&grid);
        let sys = BorderedSystem {
            field: &v,
            lin: &lin,
            solver: &solver,
            shift: 1.0,
            schur: 1.0,
        };
        let hw = sys.apply(&Bordered { v: w.values().to_vec(), mu: 0.0 });
        // (R(v + εw) − R(v − εw)) / 2ε at fixed μ
        let residual_at = |x: &Field| functionals::residual(x, lin.mu, &dual, &params).unwrap().0;
        let eps = 1e-5;
        let fd = residual_at(&v.add_scaled(eps, &w))
            .add_scaled(-1.0, &residual_at(&v.add_scaled(-eps, &w)))
            .scaled(0.5 / eps);
        let err = fd.add_scaled(-1.0, &v.with_values(hw.v).unwrap()).norm();
        assert!(err <= 1e-6 * fd.norm().max(1.0), "error {err}");
        assert!((hw.mu + grid.dot_values(&lin.normal, w.values())).abs() <= 1e-14);
    }

    #[test]
    fn minres_solves_the_bordered_system() {
        let (grid, params) = setup(2.5, 3.0);
        let dual = DualMap::default();
        let v = random_start(&grid, Sector::Unrestricted, 2, params.lambda, &dual, 1e-12).unwrap();
        let lin = linearize(&v, &params, &dual).unwrap();
        let solver = ShiftedLaplacianSolver::new(&grid);
        let shift = (-lin.mu).max(1e-3);
        let pg = solver.solve(shift, &lin.normal);
        let sys = BorderedSystem {
            field: &v,
            lin: &lin,
            solver: &solver,
            shift,
            schur: grid.dot_values(&lin.normal, &pg),
        };
        let b = Bordered {
            v: lin.residual.clone(),
            mu: 0.3,
        };
        let x = sys.minres(&b, 1e-12, 2000);
        let mut r = sys.apply(&x);
        r.axpy(-1.0, &b);
        assert!(sys.dot(&r, &r).sqrt() <= 1e-8 * sys.dot(&b, &b).sqrt());
    }

    #[test]
    fn polish_converges_from_a_flow_iterate() {
        let (grid, params) = setup(2.5, 3.0);
        let dual = DualMap::default();
        let v0 = random_start(&grid, Sector::Antisymmetric, 1, params.lambda, &dual, 1e-12).unwrap();
        let config = crate::flow::FlowConfig {
            max_iters: 40,
            ..Default::default()
        };
        let rough = crate::flow::solve(&v0, &params, &config, &dual).unwrap();
        let out = newton_polish(&rough.field, &params, &dual, &[], 1e-9, 1e-12, &NewtonOptions::default()).unwrap();
        assert!(out.converged, "residual {}", out.residual_norm);
        assert!(grid.is_antisymmetric(out.field.values()));
        let m = functionals::mass(&out.field, &dual).unwrap();
        assert!((m - params.lambda).abs() <= 1e-10);
    }
}
