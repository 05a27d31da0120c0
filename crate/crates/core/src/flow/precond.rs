//! Exact inverse of `α − Δ` on a reduced grid.
//!
//! The block-radial Laplacian is a Kronecker sum of one-dimensional radial
//! operators, each self-adjoint in its `r^{d−1}` weight. Diagonalising the
//! symmetrised 1-D operators once makes every solve a sequence of dense
//! per-axis transforms.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::domain::ReducedGrid;

#[derive(Debug, Clone)]
struct AxisBasis {
    /// Orthonormal eigenvectors of the symmetrised operator, column-major.
    vectors: DMatrix<f64>,
    /// Eigenvalues (all negative).
    values: Vec<f64>,
    sqrt_weight: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ShiftedLaplacianSolver {
    n: usize,
    axes: usize,
    strides: [usize; 3],
    bases: Vec<AxisBasis>,
}

impl ShiftedLaplacianSolver {
    pub fn new(grid: &ReducedGrid) -> Self {
        let n = grid.points_per_axis();
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let bases = (0..grid.axes())
            .map(|axis| {
                let q = grid.axis_node_pow(axis);
                let e = grid.axis_face_pow(axis);
                let mut s = DMatrix::<f64>::zeros(n, n);
                for j in 0..n {
                    let left = if j > 0 { e[j - 1] } else { 0.0 };
                    s[(j, j)] = -(e[j] + left) * inv_h2 / q[j];
                    if j + 1 < n {
                        let off = e[j] * inv_h2 / (q[j] * q[j + 1]).sqrt();
                        s[(j, j + 1)] = off;
                        s[(j + 1, j)] = off;
                    }
                }
                let eig = SymmetricEigen::new(s);
                AxisBasis {
                    vectors: eig.eigenvectors,
                    values: eig.eigenvalues.iter().copied().collect(),
                    sqrt_weight: q.iter().map(|w| w.sqrt()).collect(),
                }
            })
            .collect();
        Self {
            n,
            axes: grid.axes(),
            strides: [grid.stride(0), grid.stride(1), grid.stride(2)],
            bases,
        }
    }

    /// Solves `(α − Δ) z = b`. Requires `α > 0`.
    pub fn solve(&self, alpha: f64, rhs: &[f64]) -> Vec<f64> {
        debug_assert!(alpha > 0.0);
        let mut data = rhs.to_vec();
        // into the orthonormal eigenbasis: z̃ = Uᵀ Q^{1/2} b along each axis
        for axis in 0..self.axes {
            let b = &self.bases[axis];
            self.scale_axis(&mut data, axis, &b.sqrt_weight, false);
            self.transform_axis(&mut data, axis, &b.vectors, true);
        }
        for (idx, x) in data.iter_mut().enumerate() {
            let mut lam = 0.0;
            for axis in 0..self.axes {
                lam += self.bases[axis].values[idx / self.strides[axis] % self.n];
            }
            *x /= alpha - lam;
        }
        for axis in 0..self.axes {
            let b = &self.bases[axis];
            self.transform_axis(&mut data, axis, &b.vectors, false);
            self.scale_axis(&mut data, axis, &b.sqrt_weight, true);
        }
        data
    }

    fn scale_axis(&self, data: &mut [f64], axis: usize, s: &[f64], divide: bool) {
        let stride = self.strides[axis];
        for (idx, x) in data.iter_mut().enumerate() {
            let j = idx / stride % self.n;
            if divide {
                *x /= s[j];
            } else {
                *x *= s[j];
            }
        }
    }

    /// Applies `U` (or `Uᵀ`) to every line along `axis`.
    fn transform_axis(&self, data: &mut [f64], axis: usize, u: &DMatrix<f64>, transpose: bool) {
        let n = self.n;
        let stride = self.strides[axis];
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        for start in 0..data.len() {
            if start / stride % n != 0 {
                continue;
            }
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = data[start + j * stride];
            }
            if transpose {
                for (k, o) in out.iter_mut().enumerate() {
                    let col = u.column(k);
                    *o = col.iter().zip(&line).map(|(a, b)| a * b).sum();
                }
            } else {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (k, &c) in line.iter().enumerate() {
                    let col = u.column(k);
                    for (o, a) in out.iter_mut().zip(col.iter()) {
                        *o += a * c;
                    }
                }
            }
            for (j, &v) in out.iter().enumerate() {
                data[start + j * stride] = v;
            }
        }
    }
}
