use crate::domain::params::ModelParams;
use crate::error::{Error, Result};

/// Surface area of the unit sphere in `ℝᵈ`, `2π^{d/2}/Γ(d/2)`, with the
/// convention `σ(0) = 1` for an absent block.
pub fn sphere_area(d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    2.0 * pi.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// `Γ(d/2)` for a positive integer `d`.
fn gamma_half_integer(d: usize) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        // Γ(k + 1/2) = (k - 1/2)(k - 3/2)...(1/2) √π
        let k = (d - 1) / 2;
        (0..k).map(|j| j as f64 + 0.5).product::<f64>() * std::f64::consts::PI.sqrt()
    }
}

/// Cell-centred tensor grid over the block radii `(r₁, r₂[, r₃])` on
/// `[0, L]^axes`, with nodes at `(j + ½) h`.
///
/// Values are stored row-major: axis 1 varies slowest.
#[derive(Debug, Clone)]
pub struct ReducedGrid {
    params: ModelParams,
    block_dims: [usize; 3],
    axes: usize,
    length: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
    /// Quadrature weight of each cell.
    weights: Vec<f64>,
    /// Weight of the face between a node and its `+1` neighbour along each
    /// axis. The last face along an axis sits on the outer boundary `r = L`.
    face_weights: [Vec<f64>; 3],
    /// `r^{d-1}` at the nodes and at the outer faces, per axis.
    node_pow: [Vec<f64>; 3],
    face_pow: [Vec<f64>; 3],
    strides: [usize; 3],
}

impl ReducedGrid {
    pub fn new(params: ModelParams, length: f64, n: usize) -> Result<Self> {
        Self::check(&params, length, n)?;
        let block_dims = params.block_dims();
        let axes = if block_dims[2] == 0 { 2 } else { 3 };
        let h = length / n as f64;
        let nodes: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();

        let radial = |d: usize, r: f64| r.powi(d as i32 - 1);
        let node_pow: [Vec<f64>; 3] =
            block_dims.map(|d| nodes.iter().map(|&r| radial(d, r)).collect());
        let face_pow: [Vec<f64>; 3] =
            block_dims.map(|d| (0..n).map(|j| radial(d, (j + 1) as f64 * h)).collect());

        let scale = block_dims.iter().map(|&d| sphere_area(d)).product::<f64>() * h.powi(axes as i32);
        let total = n.pow(axes as u32);
        let strides = if axes == 2 { [n, 1, 0] } else { [n * n, n, 1] };

        // Products are grouped as (axis1 * axis2) * axis3 so the weight of a
        // cell and of its swapped mirror are bit-identical.
        let product = |a: [&[f64]; 3], idx: usize| -> f64 {
            let i = idx / strides[0] % n;
            let j = idx / strides[1] % n;
            let pair = a[0][i] * a[1][j];
            if axes == 3 {
                scale * (pair * a[2][idx % n])
            } else {
                scale * pair
            }
        };
        let weights = (0..total)
            .map(|idx| product([&node_pow[0], &node_pow[1], &node_pow[2]], idx))
            .collect();
        let mut face_weights: [Vec<f64>; 3] = Default::default();
        face_weights[0] = (0..total)
            .map(|idx| product([&face_pow[0], &node_pow[1], &node_pow[2]], idx))
            .collect();
        face_weights[1] = (0..total)
            .map(|idx| product([&node_pow[0], &face_pow[1], &node_pow[2]], idx))
            .collect();
        if axes == 3 {
            face_weights[2] = (0..total)
                .map(|idx| product([&node_pow[0], &node_pow[1], &face_pow[2]], idx))
                .collect();
        }

        Ok(Self {
            params,
            block_dims,
            axes,
            length,
            n,
            h,
            nodes,
            weights,
            face_weights,
            node_pow,
            face_pow,
            strides,
        })
    }

    /// The checks [`ReducedGrid::new`] performs, without allocating.
    pub fn check(params: &ModelParams, length: f64, n: usize) -> Result<()> {
        params.validate()?;
        if 2 * params.m > params.n_dim {
            return Err(Error::Parameter("N-2m must be nonnegative".into()));
        }
        if params.n_dim - 2 * params.m == 1 {
            return Err(Error::Parameter("N-2m must not equal 1".into()));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Parameter(format!("box length L must be positive (got {length})")));
        }
        if n < 16 {
            return Err(Error::Parameter(format!("points per axis must be at least 16 (got {n})")));
        }
        Ok(())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn block_dims(&self) -> [usize; 3] {
        self.block_dims
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Radii of the cell centres, shared by all axes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `r^{d-1}` at the nodes of one axis.
    pub fn axis_node_pow(&self, axis: usize) -> &[f64] {
        &self.node_pow[axis]
    }

    /// `r^{d-1}` at the faces `r = (j+1) h` of one axis.
    pub fn axis_face_pow(&self, axis: usize) -> &[f64] {
        &self.face_pow[axis]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Per-axis node indices of a flat index.
    pub fn index_of(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for (a, slot) in out.iter_mut().enumerate().take(self.axes) {
            *slot = idx / self.strides[a] % self.n;
        }
        out
    }

    /// `(r₁, r₂, r₃)` of a flat index; `r₃ = 0` on two-axis grids.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let ix = self.index_of(idx);
        let mut r = [0.0; 3];
        for a in 0..self.axes {
            r[a] = self.nodes[ix[a]];
        }
        r
    }

    /// Flat index of the node with `r₁` and `r₂` exchanged.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        let i = idx / self.strides[0] % self.n;
        let j = idx / self.strides[1] % self.n;
        idx - i * self.strides[0] - j * self.strides[1] + j * self.strides[0] + i * self.strides[1]
    }

    /// Whether the node touches the outer boundary `r = L` on some axis.
    pub fn on_outer_ring(&self, idx: usize) -> bool {
        self.index_of(idx)[..self.axes].iter().any(|&j| j + 1 == self.n)
    }

    /// Whether the node lies within `depth` cells of the outer boundary.
    pub fn near_outer_boundary(&self, idx: usize, depth: usize) -> bool {
        self.index_of(idx)[..self.axes].iter().any(|&j| j + depth >= self.n)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Shape(format!(
                "field has {len} values but the grid has {} nodes",
                self.len()
            )));
        }
        Ok(())
    }

    /// `Σ wᵢ vᵢ`.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Weighted inner product `Σ wᵢ aᵢ bᵢ`.
    pub fn dot_values(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Visits every face (including outer-boundary faces, whose exterior
    /// value is the Dirichlet ghost `0`) as `(face_weight, inner, outer)`
    /// and sums the visitor's results. The inner-axis faces at `r = 0` carry
    /// zero weight and are skipped.
    pub fn face_sum<F>(&self, values: &[f64], mut visit: F) -> f64
    where
        F: FnMut(f64, f64, f64) -> f64,
    {
        let mut total = 0.0;
        for axis in 0..self.axes {
            let stride = self.strides[axis];
            let faces = &self.face_weights[axis];
            for idx in 0..values.len() {
                let j = idx / stride % self.n;
                let outer = if j + 1 < self.n { values[idx + stride] } else { 0.0 };
                total += visit(faces[idx], values[idx], outer);
            }
        }
        total
    }

    /// Discrete Dirichlet energy `½ Σ_faces w_face (Δv / h)²`; the weighted
    /// gradient of this quantity is exactly `-laplacian`.
    pub fn dirichlet_energy(&self, values: &[f64]) -> f64 {
        let inv_h2 = 1.0 / (self.h * self.h);
        0.5 * inv_h2 * self.face_sum(values, |w, a, b| w * (b - a) * (b - a))
    }

    /// Divergence-form block-radial Laplacian
    /// `Σᵢ r^{1-dᵢ} ∂ᵢ(r^{dᵢ-1} ∂ᵢ v)` with zero flux through the axes and a
    /// homogeneous Dirichlet ghost beyond `r = L`.
    pub fn laplacian_values(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let axis_term = |axis: usize, idx: usize| -> f64 {
            let stride = self.strides[axis];
            let faces = &self.face_weights[axis];
            let j = idx / stride % n;
            let v = values[idx];
            let up = if j + 1 < n { values[idx + stride] } else { 0.0 };
            let plus = faces[idx] * (up - v);
            let minus = if j > 0 {
                faces[idx - stride] * (v - values[idx - stride])
            } else {
                0.0
            };
            plus - minus
        };
        (0..values.len())
            .map(|idx| {
                let mut flux = axis_term(0, idx) + axis_term(1, idx);
                if self.axes == 3 {
                    flux += axis_term(2, idx);
                }
                flux * inv_h2 / self.weights[idx]
            })
            .collect()
    }

    /// `(v - v∘swap) / 2`.
    pub fn antisymmetrize_values(&self, values: &[f64]) -> Vec<f64> {
        (0..values.len())
            .map(|idx| 0.5 * (values[idx] - values[self.mirror(idx)]))
            .collect()
    }

    pub fn is_antisymmetric(&self, values: &[f64]) -> bool {
        (0..values.len()).all(|idx| values[idx] == -values[self.mirror(idx)])
    }
}
