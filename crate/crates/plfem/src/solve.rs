//! Nonlinear solves for the auxiliary boundary-value problems: fixed loads,
//! the torsion field, and the pure-concave problem.
//!
//! The workhorse is a damped Newton iteration with backtracking on the
//! sup-norm of the residual. Residuals are always the unregularized weak
//! form; Jacobians carry the gradient regularization. When Newton stalls on
//! the concave problem the solver falls back to the fixed-point scheme
//! u <- solve(load(u)), which converges linearly for sublinear reactions.

use std::sync::Arc;

use crate::error::{Error, Result, SolveFailure};
use crate::field::GridFunction;
use crate::linalg::{solve_pcg, solve_tridiagonal, sup_norm, Csr};
use crate::mesh::Mesh;
use crate::operator::{assemble_load, interior_dot, load_constant, load_of_field, plap_apply, plap_jacobian};
use crate::problem::SolverOptions;
use crate::weight::WeightField;

/// Converged solve with its iteration count and final residual norm.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: GridFunction,
    pub iterations: usize,
    pub residual_norm: f64,
}

fn solve_linear(mesh: &Mesh, a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    if mesh.dim == 1 {
        solve_tridiagonal(a, b)
    } else {
        solve_pcg(a, b, 1e-13, 40 * a.n + 200)
    }
}

/// Damped Newton with backtracking line search on the residual sup-norm.
///
/// `project` is applied to every trial iterate (used to keep iterates in the
/// nonnegative cone before fractional powers are taken). Divergence (iterate
/// sup-norm past the blow-up threshold, or non-finite values) is reported
/// distinctly from stagnation.
pub fn newton_engine<R, J, P>(
    initial: &GridFunction,
    residual: R,
    jacobian_map: J,
    project: P,
    opts: &SolverOptions,
) -> Result<NewtonOutcome>
where
    R: Fn(&GridFunction) -> Result<Vec<f64>>,
    J: Fn(&GridFunction) -> Result<Csr>,
    P: Fn(GridFunction) -> GridFunction,
{
    let mesh = Arc::clone(&initial.mesh);
    let mut u = project(initial.clone());
    let mut res = residual(&u)?;
    let mut rnorm = sup_norm(&res);
    for iter in 0..opts.max_newton {
        if rnorm <= opts.tol_newton {
            return Ok(NewtonOutcome {
                solution: u,
                iterations: iter,
                residual_norm: rnorm,
            });
        }
        if !rnorm.is_finite() || u.sup_norm() > opts.blow_up {
            return Err(Error::nonconvergence(SolveFailure::Diverged, iter, rnorm, u));
        }
        let jac = jacobian_map(&u)?;
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = solve_linear(&mesh, &jac, &neg)?;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let mut trial = u.clone();
            for (dof, &node) in mesh.interior.iter().enumerate() {
                trial.values[node] += t * step[dof];
            }
            let trial = project(trial);
            let tres = residual(&trial)?;
            let tnorm = sup_norm(&tres);
            if tnorm.is_finite() && tnorm <= (1.0 - 1e-4 * t) * rnorm {
                u = trial;
                res = tres;
                rnorm = tnorm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::nonconvergence(SolveFailure::Stagnated, iter, rnorm, u));
        }
    }
    if rnorm <= opts.tol_newton {
        Ok(NewtonOutcome {
            solution: u,
            iterations: opts.max_newton,
            residual_norm: rnorm,
        })
    } else {
        Err(Error::nonconvergence(
            SolveFailure::Stagnated,
            opts.max_newton,
            rnorm,
            u,
        ))
    }
}

/// Solve the p-Laplacian problem with a fixed interior load vector.
///
/// The initial guess defaults to the p=2 solution of the same load, scaled
/// along its ray to minimize the p-energy. For p = 2 Newton finishes in one
/// step.
pub fn solve_with_rhs(
    mesh: &Arc<Mesh>,
    b: &[f64],
    p: f64,
    opts: &SolverOptions,
    initial: Option<&GridFunction>,
) -> Result<NewtonOutcome> {
    // p = 2 is linear: one cached-stiffness solve replaces the Newton loop
    if p == 2.0 {
        let tol = opts.tol_newton * sup_norm(b).max(1.0);
        if let Some(g) = initial {
            let mut r = plap_apply(g, 2.0, 0.0);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= bi;
            }
            let rn = sup_norm(&r);
            if rn <= tol {
                return Ok(NewtonOutcome {
                    solution: g.clone(),
                    iterations: 0,
                    residual_norm: rn,
                });
            }
        }
        let x = solve_linear(mesh, mesh.stiffness(), b)?;
        let u = GridFunction::from_interior(mesh, &x);
        if !u.sup_norm().is_finite() || u.sup_norm() > opts.blow_up {
            return Err(Error::nonconvergence(
                SolveFailure::Diverged,
                1,
                f64::INFINITY,
                u,
            ));
        }
        let mut r = plap_apply(&u, 2.0, 0.0);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        let rn = sup_norm(&r);
        if rn <= tol {
            return Ok(NewtonOutcome {
                solution: u,
                iterations: 1,
                residual_norm: rn,
            });
        }
        // direct solve fell short (severe ill-conditioning); polish below
    }
    let guess = match initial {
        Some(g) => g.clone(),
        None => {
            let z = solve_linear(mesh, mesh.stiffness(), b)?;
            let z = GridFunction::from_interior(mesh, &z);
            if p == 2.0 {
                z
            } else {
                // minimize (s^p/p) I[|grad z|^p] - s <b, z> over the ray s z
                let g = crate::operator::dirichlet_integral(&z, p);
                let bz = interior_dot(mesh, b, &z);
                if g > 0.0 && bz > 0.0 {
                    z.scale((bz / g).powf(1.0 / (p - 1.0)))
                } else {
                    z
                }
            }
        }
    };
    let eps = opts.eps_reg;
    // residual entries scale with the load, so the tolerance must too or a
    // large-load solve can never terminate in floating point
    let mut eff = opts.clone();
    eff.tol_newton = opts.tol_newton * sup_norm(b).max(1.0);
    newton_engine(
        &guess,
        |u| {
            let mut r = plap_apply(u, p, 0.0);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= bi;
            }
            Ok(r)
        },
        |u| plap_jacobian(u, p, eps),
        |u| u,
        &eff,
    )
}

/// Solve -div(|grad u|^{p-2} grad u) = g with zero boundary data, g >= 0
/// given nodally. The output is positive at every interior node.
pub fn solve_load(
    g: &GridFunction,
    p: f64,
    opts: &SolverOptions,
    initial: Option<&GridFunction>,
) -> Result<GridFunction> {
    if g.min_value() < 0.0 || g.sup_norm() == 0.0 {
        return Err(Error::InvalidField(
            "load must be nonnegative and not identically zero".into(),
        ));
    }
    let b = load_of_field(g);
    Ok(solve_with_rhs(&g.mesh, &b, p, opts, initial)?.solution)
}

/// Torsion field: unit load, zero boundary values.
pub fn solve_torsion(mesh: &Arc<Mesh>, p: f64, opts: &SolverOptions) -> Result<GridFunction> {
    let b = load_constant(mesh, 1.0);
    Ok(solve_with_rhs(mesh, &b, p, opts, None)?.solution)
}

/// Solve the pure-concave problem -div(|grad u|^{p-2} grad u) = lambda k u^q.
///
/// Newton with a clamped concave linearization is tried first; if it
/// stagnates the solver switches to the fixed-point iteration, whose
/// contraction factor for a sublinear reaction is roughly q/(p-1).
pub fn solve_concave(
    lambda: f64,
    k: &WeightField,
    q: f64,
    p: f64,
    opts: &SolverOptions,
    initial: Option<&GridFunction>,
) -> Result<GridFunction> {
    if !(lambda > 0.0) || !(q > 0.0 && q < p - 1.0) {
        return Err(Error::InvalidSpec(format!(
            "concave problem needs lambda > 0 and 0 < q < p-1, got lambda={lambda}, q={q}"
        )));
    }
    let mesh = Arc::clone(&k.mesh);
    let torsion = solve_torsion(&mesh, p, opts)?;
    let guess = match initial {
        Some(g) => g.clip_below(0.0),
        None => {
            // scale the torsion field so the operator magnitude balances the load
            let vbar = 0.5 * torsion.sup_norm();
            let kbar = 0.5 * (k.inf + k.sup);
            let s = (lambda * kbar * vbar.powf(q)).powf(1.0 / (p - 1.0 - q));
            torsion.scale(s)
        }
    };

    let load = |u: &GridFunction| -> Vec<f64> {
        assemble_load(&mesh, |ei, qp| {
            lambda * k.at_qp(ei, qp) * u.at_qp(ei, qp).max(0.0).powf(q)
        })
    };
    let floor_of = |u: &GridFunction| crate::operator::CLAMP_FLOOR_REL * u.sup_norm();

    let newton_attempt = newton_engine(
        &guess,
        |u| {
            let mut r = plap_apply(u, p, 0.0);
            for (ri, bi) in r.iter_mut().zip(&load(u)) {
                *ri -= bi;
            }
            Ok(r)
        },
        |u| {
            let floor = floor_of(u);
            if floor == 0.0 {
                return Err(Error::DegenerateLinearization("zero iterate".into()));
            }
            let diffusion = plap_jacobian(u, p, opts.eps_reg)?;
            let mut a = crate::linalg::CsrBuilder::new(mesh.interior_count());
            for i in 0..diffusion.n {
                for kk in diffusion.indptr[i]..diffusion.indptr[i + 1] {
                    a.add(i, diffusion.indices[kk], diffusion.data[kk]);
                }
            }
            for (ei, e) in mesh.elems.iter().enumerate() {
                for qp in 0..mesh.qp_weight.len() {
                    let uv = u.at_qp(ei, qp).max(floor);
                    let slope = lambda * q * k.at_qp(ei, qp) * uv.powf(q - 1.0);
                    let w = e.measure * mesh.qp_weight[qp];
                    for i in 0..mesh.verts {
                        let Some(di) = mesh.interior_id[e.nodes[i]] else { continue };
                        for j in 0..mesh.verts {
                            let Some(dj) = mesh.interior_id[e.nodes[j]] else { continue };
                            a.add(di, dj, -slope * w * mesh.qp_basis[qp][i] * mesh.qp_basis[qp][j]);
                        }
                    }
                }
            }
            Ok(a.build())
        },
        |u| u.clip_below(0.0),
        opts,
    );

    let mut u = match newton_attempt {
        Ok(out) => return Ok(out.solution),
        Err(Error::Nonconvergence(b)) if b.failure == SolveFailure::Stagnated => b.last,
        Err(Error::DegenerateLinearization(_)) => guess,
        Err(e) => return Err(e),
    };

    // fixed-point fallback
    let mut prev_step = f64::INFINITY;
    for iter in 0..opts.max_outer {
        let b = load(&u);
        let next = solve_with_rhs(&mesh, &b, p, opts, Some(&u))?.solution;
        let step = next
            .values
            .iter()
            .zip(&u.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        u = next;
        if step <= opts.tol_mono * (1.0 + u.sup_norm()) {
            let mut r = plap_apply(&u, p, 0.0);
            for (ri, bi) in r.iter_mut().zip(&load(&u)) {
                *ri -= bi;
            }
            let rn = sup_norm(&r);
            if rn <= opts.tol_newton {
                return Ok(u);
            }
        }
        if !step.is_finite() || u.sup_norm() > opts.blow_up {
            return Err(Error::nonconvergence(SolveFailure::Diverged, iter, step, u));
        }
        prev_step = step;
    }
    Err(Error::nonconvergence(
        SolveFailure::Stagnated,
        opts.max_outer,
        prev_step,
        u,
    ))
}
