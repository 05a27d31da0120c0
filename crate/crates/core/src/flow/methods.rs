//! Search-direction strategies for the constrained flow, selectable by name.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::domain::{Field, ReducedGrid, Sector};
use crate::error::{Error, Result};
use crate::flow::precond::ShiftedLaplacianSolver;

/// What a strategy sees at the current feasible iterate.
pub struct FlowState<'a> {
    pub field: &'a Field,
    /// Weighted-L² gradient of the objective being minimised.
    pub gradient: &'a Field,
    /// Constraint normal `f(v) f'(v)`.
    pub normal: &'a Field,
    /// Least-squares multiplier for `gradient` against `normal`.
    pub mu: f64,
}

/// Produces a direction `d` with `⟨d, normal⟩ = 0` and `⟨gradient, d⟩ ≥ 0`;
/// the flow steps to `v − h d` before re-projecting onto the mass shell.
pub trait SearchDirection {
    fn direction(&mut self, state: &FlowState<'_>) -> Result<Field>;
}

/// A named descent strategy. [`bind`](Self::bind) sets up any per-grid
/// state once per solve.
pub trait DescentMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn bind(&self, grid: &ReducedGrid) -> Box<dyn SearchDirection>;
}

/// Plain tangential L² gradient `grad − μ g`.
#[derive(Debug, Default)]
pub struct L2Gradient;

struct L2Direction;

impl SearchDirection for L2Direction {
    fn direction(&mut self, s: &FlowState<'_>) -> Result<Field> {
        Ok(s.gradient.add_scaled(-s.mu, s.normal))
    }
}

impl DescentMethod for L2Gradient {
    fn name(&self) -> &'static str {
        "gradient"
    }

    fn summary(&self) -> &'static str {
        "tangential L2 gradient"
    }

    fn bind(&self, _grid: &ReducedGrid) -> Box<dyn SearchDirection> {
        Box::new(L2Direction)
    }
}

/// Sobolev gradient: the gradient is preconditioned by `(α − Δ)⁻¹` with the
/// shift tracking `−μ`, then made tangent in the preconditioned inner
/// product.
#[derive(Debug)]
pub struct SobolevGradient {
    pub min_shift: f64,
    pub max_shift: f64,
}

impl Default for SobolevGradient {
    fn default() -> Self {
        Self {
            min_shift: 0.25,
            max_shift: 1e3,
        }
    }
}

struct SobolevDirection {
    solver: ShiftedLaplacianSolver,
    min_shift: f64,
    max_shift: f64,
}

impl SearchDirection for SobolevDirection {
    fn direction(&mut self, s: &FlowState<'_>) -> Result<Field> {
        let alpha = (-s.mu).clamp(self.min_shift, self.max_shift);
        // precondition the residual rather than the raw gradient to avoid cancellation
        let residual = s.gradient.add_scaled(-s.mu, s.normal);
        let pr = s.gradient.with_values(self.solver.solve(alpha, residual.values()))?;
        let pn = s.normal.with_values(self.solver.solve(alpha, s.normal.values()))?;
        let denom = s.normal.dot(&pn);
        if !(denom > 0.0) {
            return Err(Error::Degenerate("constraint normal vanishes".into()));
        }
        let beta = residual.dot(&pn) / denom;
        let d = pr.add_scaled(-beta, &pn);
        // the dense transforms do not preserve node-pair antisymmetry bit for bit
        Ok(match s.field.sector() {
            Sector::Antisymmetric => d.antisymmetrize(),
            Sector::Unrestricted => d,
        })
    }
}

impl DescentMethod for SobolevGradient {
    fn name(&self) -> &'static str {
        "sobolev"
    }

    fn summary(&self) -> &'static str {
        "gradient preconditioned by (alpha - Laplacian)^-1, alpha = -mu"
    }

    fn bind(&self, grid: &ReducedGrid) -> Box<dyn SearchDirection> {
        Box::new(SobolevDirection {
            solver: ShiftedLaplacianSolver::new(grid),
            min_shift: self.min_shift,
            max_shift: self.max_shift,
        })
    }
}

/// Name → strategy table.
#[derive(Clone)]
pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Arc<dyn DescentMethod>>,
}

impl fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.methods.keys()).finish()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        let mut registry = Self::empty();
        registry.register(Arc::new(L2Gradient));
        registry.register(Arc::new(SobolevGradient::default()));
        registry
    }
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self {
            methods: BTreeMap::new(),
        }
    }

    /// Replaces any strategy registered under the same name.
    pub fn register(&mut self, method: Arc<dyn DescentMethod>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn DescentMethod>> {
        self.methods.get(name).cloned().ok_or_else(|| {
            Error::Parameter(format!(
                "unknown descent method '{name}' (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let r = MethodRegistry::default();
        assert_eq!(r.names(), vec!["gradient", "sobolev"]);
        assert_eq!(r.get("sobolev").unwrap().name(), "sobolev");
        let err = r.get("newton").err().unwrap();
        assert!(err.is_parameter());
        assert!(err.to_string().contains("gradient, sobolev"));
    }
}
