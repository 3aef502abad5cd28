//! Problem data: exponents, parameter, sign, weights, and solver options.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::weight::WeightField;

/// Which reaction the convex term carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Plus => write!(f, "plus"),
            Sign::Minus => write!(f, "minus"),
        }
    }
}

/// Reaction data for -div(|grad u|^{p-2} grad u) = lambda k u^q +/- h u^sigma.
///
/// The exponents must satisfy 0 < q < p-1 < sigma. When p is below the mesh
/// dimension the subcritical range additionally wants sigma < p* - 1 with
/// p* = N p / (N - p); violating that is reported as a warning, not an error.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub sign: Sign,
    pub k: WeightField,
    pub h: WeightField,
    pub mesh: Arc<Mesh>,
}

impl ProblemSpec {
    pub fn new(
        mesh: &Arc<Mesh>,
        p: f64,
        q: f64,
        sigma: f64,
        lambda: f64,
        sign: Sign,
        k: WeightField,
        h: WeightField,
    ) -> Result<Self> {
        let spec = Self {
            p,
            q,
            sigma,
            lambda,
            sign,
            k,
            h,
            mesh: Arc::clone(mesh),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Check invariants; returns any non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.p > 1.0) {
            return Err(Error::InvalidSpec(format!("p = {} must exceed 1", self.p)));
        }
        if !(self.q > 0.0 && self.q < self.p - 1.0 && self.p - 1.0 < self.sigma) {
            return Err(Error::InvalidSpec(format!(
                "need 0 < q < p-1 < sigma, got q={}, p-1={}, sigma={}",
                self.q,
                self.p - 1.0,
                self.sigma
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "lambda = {} must be >= 0",
                self.lambda
            )));
        }
        if !Arc::ptr_eq(&self.k.mesh, &self.mesh) || !Arc::ptr_eq(&self.h.mesh, &self.mesh) {
            return Err(Error::IncompatibleFields(
                "weights must live on the problem mesh".into(),
            ));
        }
        let mut warnings = Vec::new();
        let n = self.mesh.dim as f64;
        if self.p < n {
            let p_star = n * self.p / (n - self.p);
            if self.sigma >= p_star - 1.0 {
                warnings.push(format!(
                    "sigma = {} is not subcritical (p* - 1 = {})",
                    self.sigma,
                    p_star - 1.0
                ));
            }
        }
        Ok(warnings)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut s = self.clone();
        s.lambda = lambda;
        s
    }

    pub fn with_sign(&self, sign: Sign) -> Self {
        let mut s = self.clone();
        s.sign = sign;
        s
    }

    /// min(ess inf k, ess inf h) over the nodal samples.
    pub fn weight_floor(&self) -> f64 {
        self.k.inf.min(self.h.inf)
    }
}

/// Tolerances and iteration limits shared by the solvers.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Gradient regularization used in Jacobians; residuals are always
    /// evaluated unregularized.
    pub eps_reg: f64,
    /// Sup-norm residual tolerance that defines a discrete solution.
    pub tol_newton: f64,
    /// Sup-norm step tolerance for outer fixed-point iterations.
    pub tol_mono: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Iterate sup-norm above this is treated as blow-up.
    pub blow_up: f64,
    /// Gradient sup-norm tolerance for descent minimizers.
    pub tol_grad: f64,
    /// Energy below -tol_energy counts as a nontrivial minimizer.
    pub tol_energy: f64,
    pub max_descent: usize,
}

impl SolverOptions {
    /// Defaults scaled to the mesh: eps_reg = 1e-8 / diameter.
    pub fn for_mesh(mesh: &Mesh) -> Self {
        Self {
            eps_reg: 1e-8 / mesh.diameter(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.tol_newton,
            self.tol_mono,
            self.tol_grad,
            self.tol_energy,
        ];
        if pos.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidSpec("tolerances must be positive".into()));
        }
        if !(self.blow_up > 1.0) {
            return Err(Error::InvalidSpec("blow-up threshold must exceed 1".into()));
        }
        if self.eps_reg < 0.0 {
            return Err(Error::InvalidSpec("eps_reg must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_reg: 1e-8,
            tol_newton: 1e-10,
            tol_mono: 1e-11,
            max_newton: 60,
            max_outer: 20_000,
            blow_up: 1e6,
            tol_grad: 1e-8,
            tol_energy: 1e-8,
            max_descent: 200_000,
        }
    }
}
