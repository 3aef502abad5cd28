//! First eigenpair of the Dirichlet p-Laplacian by inverse-power iteration.
//!
//! Each step solves -div(|grad z|^{p-2} grad z) = |phi|^{p-2} phi for the
//! current normalized iterate phi and renormalizes to sup-norm one. The
//! eigenvalue estimate is the Rayleigh quotient
//!
//!   integral |grad phi|^p / integral |phi|^p,
//!
//! and the iteration stops when the quotient's relative change stalls.

use std::sync::Arc;

use crate::error::{Error, Result, SolveFailure};
use crate::field::{integrate_power, GridFunction};
use crate::mesh::Mesh;
use crate::operator::{assemble_load, dirichlet_integral};
use crate::problem::SolverOptions;
use crate::solve::{solve_torsion, solve_with_rhs};

/// First eigenvalue with its eigenfunction normalized to sup-norm one.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi1: GridFunction,
}

/// Rayleigh quotient of a nonzero Dirichlet-zero field.
pub fn rayleigh_quotient(u: &GridFunction, p: f64) -> f64 {
    dirichlet_integral(u, p) / integrate_power(u, p)
}

const STALL_REL: f64 = 1e-8;
const MAX_POWER_ITER: usize = 400;

pub fn first_eigenpair(mesh: &Arc<Mesh>, p: f64, opts: &SolverOptions) -> Result<EigenPair> {
    if !(p > 1.0) {
        return Err(Error::InvalidSpec(format!("p = {p} must exceed 1")));
    }
    let torsion = solve_torsion(mesh, p, opts)?;
    let mut phi = torsion.scale(1.0 / torsion.sup_norm());
    let mut quotient = rayleigh_quotient(&phi, p);
    for it in 0..MAX_POWER_ITER {
        let b = assemble_load(mesh, |ei, qp| {
            let v = phi.at_qp(ei, qp);
            if v == 0.0 {
                // all-boundary corner elements interpolate to zero; the
                // limit of |v|^{p-2} v is zero for every p > 1
                0.0
            } else {
                v.abs().powf(p - 2.0) * v
            }
        });
        let z = solve_with_rhs(mesh, &b, p, opts, Some(&phi))?.solution;
        let sup = z.sup_norm();
        if sup == 0.0 {
            return Err(Error::nonconvergence(SolveFailure::Stagnated, it, quotient, z));
        }
        phi = z.scale(1.0 / sup);
        let next = rayleigh_quotient(&phi, p);
        let stalled = (next - quotient).abs() <= STALL_REL * next;
        quotient = next;
        if stalled {
            if phi.values.iter().sum::<f64>() < 0.0 {
                phi = phi.scale(-1.0);
            }
            if phi
                .mesh
                .interior
                .iter()
                .any(|&n| phi.values[n] <= 0.0)
            {
                return Err(Error::nonconvergence(
                    SolveFailure::Stagnated,
                    it,
                    quotient,
                    phi,
                ));
            }
            return Ok(EigenPair {
                lambda1: quotient,
                phi1: phi,
            });
        }
    }
    Err(Error::nonconvergence(
        SolveFailure::Stagnated,
        MAX_POWER_ITER,
        quotient,
        phi,
    ))
}
