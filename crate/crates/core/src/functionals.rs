//! Energies, mass, gradient, multiplier and residual.
//!
//! The dual energy is `I(v) = ½∫|∇v|² − (1/p)∫|f(v)|^p`, the quasilinear
//! energy is `J(u) = ½∫|∇u|² + ∫|∇u|²u² − (1/p)∫|u|^p`, and constrained
//! critical points satisfy `−Δv = |f|^{p−2} f f'(v) + μ f f'(v)` with
//! `∫ f(v)² = λ`.
//!
//! All gradients are taken in the grid-weighted L² inner product, and the
//! Dirichlet term reuses the face sums behind the discrete Laplacian so that
//! `⟨grad_i(v), w⟩` is the exact derivative of the discrete `energy_i`.

use serde::{Deserialize, Serialize};

use crate::domain::{Field, ModelParams};
use crate::dualmap::DualMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub energy_i: f64,
    pub energy_j: f64,
    /// `∫ f(v)²`
    pub mass: f64,
    /// `∫ v²`
    pub l2_of_v: f64,
    pub mu: f64,
    pub residual_norm: f64,
    pub projected_grad_norm: f64,
}

/// `f(v)` and `f'(v)` at every node of a field.
#[derive(Debug, Clone)]
pub struct DualValues {
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
}

impl DualValues {
    pub fn new(v: &Field, dual: &DualMap) -> Result<Self> {
        let mut f = Vec::with_capacity(v.values().len());
        let mut f_prime = Vec::with_capacity(v.values().len());
        for (i, &t) in v.values().iter().enumerate() {
            let (s, d) = dual
                .eval(t)
                .map_err(|e| Error::Numeric(format!("node {i}: {e}")))?;
            f.push(s);
            f_prime.push(d);
        }
        Ok(Self { f, f_prime })
    }
}

/// `|s|^{p−2} s`, written as `sign(s)|s|^{p−1}` so zeros stay finite.
#[inline]
pub(crate) fn signed_power(s: f64, p: f64) -> f64 {
    s.signum() * s.abs().powf(p - 1.0)
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numeric(format!("{what} is not finite")))
    }
}

fn potential(values: &[f64], weights: &[f64], p: f64) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(s, w)| w * s.abs().powf(p))
        .sum::<f64>()
        / p
}

/// `I(v)`.
pub fn energy_i(v: &Field, dual: &DualMap, params: &ModelParams) -> Result<f64> {
    let fv = DualValues::new(v, dual)?;
    Ok(energy_i_with(v, &fv, params))
}

pub(crate) fn energy_i_with(v: &Field, fv: &DualValues, params: &ModelParams) -> f64 {
    let grid = v.grid();
    grid.dirichlet_energy(v.values()) - potential(&fv.f, grid.weights(), params.p)
}

/// `J(u)`. The quartic term evaluates `u²` on each face as the mean of the
/// two adjacent nodal values.
pub fn energy_j(u: &Field, params: &ModelParams) -> Result<f64> {
    let grid = u.grid();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let quartic = inv_h2
        * grid.face_sum(u.values(), |w, a, b| w * (b - a) * (b - a) * 0.5 * (a * a + b * b));
    let total = grid.dirichlet_energy(u.values()) + quartic - potential(u.values(), grid.weights(), params.p);
    finite(total, "J(u)")
}

/// `Ī(v) = I(v) − (μ/2)∫f(v)²`.
pub fn energy_i_bar(v: &Field, mu: f64, dual: &DualMap, params: &ModelParams) -> Result<f64> {
    let fv = DualValues::new(v, dual)?;
    let mass = v.grid().dot_values(&fv.f, &fv.f);
    finite(energy_i_with(v, &fv, params) - 0.5 * mu * mass, "Ī(v)")
}

/// `J̄(u) = J(u) − (μ/2)∫u²`.
pub fn energy_j_bar(u: &Field, mu: f64, params: &ModelParams) -> Result<f64> {
    let l2 = u.dot(u);
    finite(energy_j(u, params)? - 0.5 * mu * l2, "J̄(u)")
}

/// `∫ f(v)²`.
pub fn mass(v: &Field, dual: &DualMap) -> Result<f64> {
    let fv = DualValues::new(v, dual)?;
    Ok(v.grid().dot_values(&fv.f, &fv.f))
}

/// `u = f(v)` as a field on the same grid and sector.
pub fn to_physical(v: &Field, dual: &DualMap) -> Result<Field> {
    v.with_values(dual.map_field(v.values())?)
}

/// Unconstrained gradient `−Δv − |f(v)|^{p−2} f(v) f'(v)`.
pub fn grad_i(v: &Field, dual: &DualMap, params: &ModelParams) -> Result<Field> {
    let fv = DualValues::new(v, dual)?;
    Ok(grad_i_with(v, &fv, params))
}

pub(crate) fn grad_i_with(v: &Field, fv: &DualValues, params: &ModelParams) -> Field {
    let lap = v.laplacian();
    let values = lap
        .values()
        .iter()
        .zip(fv.f.iter().zip(&fv.f_prime))
        .map(|(l, (&s, &d))| -l - signed_power(s, params.p) * d)
        .collect();
    Field::from_parts(v.grid().clone(), values, v.sector())
}

/// Constraint normal `g = f(v) f'(v)`, half the gradient of the mass.
pub(crate) fn constraint_normal(v: &Field, fv: &DualValues) -> Field {
    let values = fv.f.iter().zip(&fv.f_prime).map(|(s, d)| s * d).collect();
    Field::from_parts(v.grid().clone(), values, v.sector())
}

/// Least-squares multiplier `⟨grad_i, g⟩ / ⟨g, g⟩`.
pub fn multiplier_mu(v: &Field, dual: &DualMap, params: &ModelParams) -> Result<f64> {
    let fv = DualValues::new(v, dual)?;
    let grad = grad_i_with(v, &fv, params);
    let g = constraint_normal(v, &fv);
    least_squares_mu(&grad, &g)
}

pub(crate) fn least_squares_mu(grad: &Field, g: &Field) -> Result<f64> {
    let gg = g.dot(g);
    if gg == 0.0 {
        return Err(Error::Degenerate("multiplier undefined for v = 0".into()));
    }
    Ok(grad.dot(g) / gg)
}

/// `R = −Δv − |f|^{p−2} f f'(v) − μ f f'(v)` and its weighted L² norm.
pub fn residual(v: &Field, mu: f64, dual: &DualMap, params: &ModelParams) -> Result<(Field, f64)> {
    let fv = DualValues::new(v, dual)?;
    let grad = grad_i_with(v, &fv, params);
    let g = constraint_normal(v, &fv);
    let r = grad.add_scaled(-mu, &g);
    let norm = finite(r.norm(), "residual norm")?;
    Ok((r, norm))
}

/// Full diagnostic record at `v`, with `μ` from the least-squares formula.
/// The projected gradient is the residual at that `μ`, so the two norms
/// coincide.
pub fn diagnostics(v: &Field, dual: &DualMap, params: &ModelParams) -> Result<Diagnostics> {
    let fv = DualValues::new(v, dual)?;
    let grid = v.grid();
    let energy_i = finite(energy_i_with(v, &fv, params), "I(v)")?;
    let u = v.with_values(fv.f.clone())?;
    let energy_j = energy_j(&u, params)?;
    let mass = grid.dot_values(&fv.f, &fv.f);
    let l2_of_v = v.dot(v);
    let grad = grad_i_with(v, &fv, params);
    let g = constraint_normal(v, &fv);
    let mu = least_squares_mu(&grad, &g)?;
    let residual_norm = finite(grad.add_scaled(-mu, &g).norm(), "residual norm")?;
    Ok(Diagnostics {
        energy_i,
        energy_j,
        mass,
        l2_of_v,
        mu,
        residual_norm,
        projected_grad_norm: residual_norm,
    })
}
