//! Symmetry-reduced geometry.
//!
//! Functions on `ℝᴺ` invariant under `O(m) × O(m) × O(N−2m)` depend only on
//! the block radii `(r₁, r₂, r₃)`. This module holds the reduced grid with
//! its weighted quadrature, the block-radial Laplacian and the projection
//! onto functions odd under the block swap `(x₁, x₂, x₃) ↦ (x₂, x₁, x₃)`.

mod field;
mod grid;
mod params;

pub use field::{Field, Sector};
pub use grid::{sphere_area, ReducedGrid};
pub use params::{critical_exponent, regime_of, upper_exponent, ModelParams, Regime};
