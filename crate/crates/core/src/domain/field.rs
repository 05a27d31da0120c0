use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::grid::ReducedGrid;
use crate::error::{Error, Result};

/// Symmetry class of a field under the block swap `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Unrestricted,
    /// `v(r₂, r₁, r₃) = -v(r₁, r₂, r₃)` at every node, bit for bit.
    Antisymmetric,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sector::Unrestricted => "unrestricted",
            Sector::Antisymmetric => "antisymmetric",
        })
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unrestricted" => Ok(Sector::Unrestricted),
            "antisymmetric" => Ok(Sector::Antisymmetric),
            other => Err(Error::Parameter(format!("unknown sector '{other}'"))),
        }
    }
}

/// Nodal values on a [`ReducedGrid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<ReducedGrid>,
    values: Vec<f64>,
    sector: Sector,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.sector == other.sector && self.values == other.values
    }
}

impl Field {
    /// Validates length, finiteness and (for the antisymmetric sector) exact
    /// node-pair antisymmetry.
    pub fn new(grid: Arc<ReducedGrid>, values: Vec<f64>, sector: Sector) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("field value at node {i} is not finite")));
        }
        if sector == Sector::Antisymmetric && !grid.is_antisymmetric(&values) {
            return Err(Error::Shape("values are not antisymmetric under r1 <-> r2".into()));
        }
        Ok(Self { grid, values, sector })
    }

    /// Caller guarantees length, finiteness and sector.
    pub(crate) fn from_parts(grid: Arc<ReducedGrid>, values: Vec<f64>, sector: Sector) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, sector }
    }

    pub fn zeros(grid: Arc<ReducedGrid>, sector: Sector) -> Self {
        let n = grid.len();
        Self::from_parts(grid, vec![0.0; n], sector)
    }

    /// Samples `g(r₁, r₂, r₃)` at the nodes as an unrestricted field.
    pub fn from_fn<G: Fn([f64; 3]) -> f64>(grid: Arc<ReducedGrid>, g: G) -> Result<Self> {
        let values = (0..grid.len()).map(|i| g(grid.coords(i))).collect();
        Self::new(grid, values, Sector::Unrestricted)
    }

    pub fn grid(&self) -> &Arc<ReducedGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Same grid and sector, new values. Fails on non-finite input.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        self.grid.check_len(values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value at node {i}")));
        }
        Ok(Self::from_parts(self.grid.clone(), values, self.sector))
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate_values(&self.values)
    }

    /// Weighted inner product.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.dot_values(&self.values, &other.values)
    }

    /// Weighted L² norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Result keeps the sector. Mirror images of IEEE products and
    /// differences are exact negations, so antisymmetry survives.
    pub fn laplacian(&self) -> Field {
        let values = self.grid.laplacian_values(&self.values);
        Self::from_parts(self.grid.clone(), values, self.sector)
    }

    pub fn antisymmetrize(&self) -> Field {
        let values = self.grid.antisymmetrize_values(&self.values);
        Self::from_parts(self.grid.clone(), values, Sector::Antisymmetric)
    }

    pub fn scaled(&self, c: f64) -> Field {
        let values = self.values.iter().map(|v| c * v).collect();
        Self::from_parts(self.grid.clone(), values, self.sector)
    }

    /// `self + a·other`; the sector is kept only if both agree.
    pub fn add_scaled(&self, a: f64, other: &Field) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        let sector = if self.sector == other.sector {
            self.sector
        } else {
            Sector::Unrestricted
        };
        Self::from_parts(self.grid.clone(), values, sector)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `(min, max)` over the nodes.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|v|` on the nodes adjacent to the outer boundary.
    pub fn boundary_max_abs(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| self.grid.on_outer_ring(i))
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ModelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n_dim: usize, n: usize, length: f64) -> Arc<ReducedGrid> {
        let p = ModelParams::new(n_dim, 2, 3.0, 1.0).unwrap();
        Arc::new(ReducedGrid::new(p, length, n).unwrap())
    }

    fn random_field(g: &Arc<ReducedGrid>, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::new(g.clone(), values, Sector::Unrestricted).unwrap()
    }

    /// Random field vanishing within `depth` cells of the outer boundary.
    fn interior_field(g: &Arc<ReducedGrid>, seed: u64, depth: usize) -> Field {
        let f = random_field(g, seed);
        let values = f
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| if g.near_outer_boundary(i, depth) { 0.0 } else { v })
            .collect();
        f.with_values(values).unwrap()
    }

    #[test]
    fn rejects_bad_values() {
        let g = grid(4, 16, 4.0);
        assert!(matches!(Field::new(g.clone(), vec![0.0; 3], Sector::Unrestricted), Err(Error::Shape(_))));
        let mut v = vec![0.0; g.len()];
        v[5] = f64::NAN;
        assert!(matches!(Field::new(g.clone(), v, Sector::Unrestricted), Err(Error::Domain(_))));
        let f = random_field(&g, 1);
        assert!(Field::new(g, f.values().to_vec(), Sector::Antisymmetric).is_err());
    }

    #[test]
    fn gaussian_integral_in_four_dimensions() {
        let g = grid(4, 256, 8.0);
        let f = Field::from_fn(g, |r| (-(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])).exp()).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((f.integrate() - pi2).abs() <= 1e-2, "{}", f.integrate());
        assert_eq!(Field::zeros(f.grid().clone(), Sector::Unrestricted).integrate(), 0.0);
    }

    #[test]
    fn gaussian_integral_in_six_dimensions() {
        let g = grid(6, 64, 6.0);
        let f = Field::from_fn(g, |r| (-(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])).exp()).unwrap();
        let pi3 = std::f64::consts::PI.powi(3);
        assert!((f.integrate() - pi3).abs() / pi3 <= 1e-2);
    }

    #[test]
    fn antisymmetric_fields_integrate_to_zero() {
        for g in [grid(4, 32, 4.0), grid(6, 16, 4.0)] {
            let v = random_field(&g, 7).antisymmetrize();
            assert!(v.integrate().abs() <= 1e-12);
        }
    }

    #[test]
    fn antisymmetrize_is_an_exact_projection() {
        let g = grid(6, 16, 4.0);
        let v = random_field(&g, 3);
        let a = v.antisymmetrize();
        assert_eq!(a.sector(), Sector::Antisymmetric);
        assert!(g.is_antisymmetric(a.values()));
        assert_eq!(a.antisymmetrize().values(), a.values());
        let sym = Field::from_fn(g.clone(), |r| (r[0] * r[1]).sin() + r[2]).unwrap();
        assert!(sym.antisymmetrize().is_zero());
    }

    #[test]
    fn laplacian_preserves_antisymmetry_exactly() {
        for g in [grid(4, 32, 4.0), grid(6, 16, 4.0)] {
            let a = random_field(&g, 11).antisymmetrize();
            let lap = a.laplacian();
            assert!(g.is_antisymmetric(lap.values()));
            // commutes with the projection
            let b = random_field(&g, 12);
            let lhs = b.laplacian().antisymmetrize();
            let rhs = b.antisymmetrize().laplacian();
            let diff = lhs.add_scaled(-1.0, &rhs).max_abs();
            assert!(diff <= 1e-12 * lhs.max_abs());
        }
    }

    #[test]
    fn laplacian_is_self_adjoint_and_nonpositive() {
        for g in [grid(4, 32, 4.0), grid(6, 16, 4.0)] {
            for seed in 0..5 {
                let u = interior_field(&g, seed, 2);
                let v = interior_field(&g, seed + 100, 2);
                let lhs = u.dot(&v.laplacian());
                let rhs = v.dot(&u.laplacian());
                assert!((lhs - rhs).abs() <= 1e-8 * u.norm() * v.norm());
                assert!(v.dot(&v.laplacian()) <= 0.0);
            }
        }
    }

    #[test]
    fn laplacian_of_gaussian_is_second_order() {
        // Δ e^{-|x|²/2} = (|x|² - N) e^{-|x|²/2}
        let max_err = |n: usize| {
            let g = grid(4, n, 8.0);
            let f = Field::from_fn(g.clone(), |r| (-(r[0] * r[0] + r[1] * r[1]) / 2.0).exp()).unwrap();
            let lap = f.laplacian();
            (0..g.len())
                .filter(|&i| !g.near_outer_boundary(i, 1))
                .map(|i| {
                    let r = g.coords(i);
                    let rr = r[0] * r[0] + r[1] * r[1];
                    (lap.values()[i] - (rr - 4.0) * (-rr / 2.0).exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let coarse = max_err(64);
        let fine = max_err(128);
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() <= 0.2, "observed order {order}");
    }

    #[test]
    fn quadrature_of_squares_is_positive() {
        let g = grid(4, 16, 4.0);
        let v = random_field(&g, 5);
        assert!(v.dot(&v) > 0.0);
        assert_eq!(Field::zeros(g, Sector::Unrestricted).norm(), 0.0);
    }
}
