//! Discrete p-Laplacian operator, weak residuals, Jacobians, and the two
//! energy functionals.
//!
//! All residual-type vectors are indexed by interior dof (boundary nodes are
//! pinned to zero). Entry i of the operator action is
//!
//!   sum over elements of (|grad u|^2 + eps^2)^{(p-2)/2} grad u . grad phi_i
//!   times the element measure,
//!
//! which is exact for P1 fields. Residuals are always evaluated with eps = 0;
//! the regularization only enters Jacobians, where it removes the degeneracy
//! (p > 2) or singularity (p < 2) at critical points of u.

use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::linalg::{Csr, CsrBuilder};
use crate::mesh::Mesh;
use crate::problem::{ProblemSpec, SolverOptions};

/// Relative floor under which the concave linearization is clamped.
pub const CLAMP_FLOOR_REL: f64 = 1e-10;

fn grad_sq(g: &[f64; 2]) -> f64 {
    g[0] * g[0] + g[1] * g[1]
}

/// Action of the regularized p-Laplacian on the interior dofs.
pub fn plap_apply(u: &GridFunction, p: f64, eps: f64) -> Vec<f64> {
    let mesh = &u.mesh;
    let grads = u.grad_eval();
    let mut res = vec![0.0; mesh.interior_count()];
    for (ei, e) in mesh.elems.iter().enumerate() {
        let g = grads[ei];
        let s = grad_sq(&g) + eps * eps;
        if s == 0.0 {
            continue; // |grad u|^{p-1} -> 0 as grad u -> 0 for p > 1
        }
        let coef = s.powf(0.5 * (p - 2.0));
        for j in 0..mesh.verts {
            if let Some(dof) = mesh.interior_id[e.nodes[j]] {
                let flux = g[0] * e.grads[j][0] + g[1] * e.grads[j][1];
                res[dof] += coef * flux * e.measure;
            }
        }
    }
    res
}

/// Load vector b_i = integral of f phi_i, with f given at quadrature points.
pub fn assemble_load(mesh: &Mesh, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.interior_count()];
    for (ei, e) in mesh.elems.iter().enumerate() {
        for qp in 0..mesh.qp_weight.len() {
            let fv = f(ei, qp);
            let w = e.measure * mesh.qp_weight[qp];
            for j in 0..mesh.verts {
                if let Some(dof) = mesh.interior_id[e.nodes[j]] {
                    b[dof] += w * fv * mesh.qp_basis[qp][j];
                }
            }
        }
    }
    b
}

/// Load vector of a constant right-hand side.
pub fn load_constant(mesh: &Mesh, c: f64) -> Vec<f64> {
    assemble_load(mesh, |_, _| c)
}

/// Load vector of a nodal field interpolated at the quadrature points.
pub fn load_of_field(g: &GridFunction) -> Vec<f64> {
    assemble_load(&g.mesh, |ei, qp| g.at_qp(ei, qp))
}

/// Reaction lambda k u^q +/- h u^sigma evaluated at a quadrature point, with
/// the interpolated value of u clipped at zero before fractional powers.
pub fn reaction_at_qp(spec: &ProblemSpec, u: &GridFunction, ei: usize, qp: usize) -> f64 {
    let uv = u.at_qp(ei, qp).max(0.0);
    let k = spec.k.at_qp(ei, qp);
    let h = spec.h.at_qp(ei, qp);
    spec.lambda * k * uv.powf(spec.q) + spec.sign.factor() * h * uv.powf(spec.sigma)
}

/// Load vector of the reaction term for the current spec.
pub fn reaction_load(spec: &ProblemSpec, u: &GridFunction) -> Vec<f64> {
    assemble_load(&spec.mesh, |ei, qp| reaction_at_qp(spec, u, ei, qp))
}

/// Residual of the weak form: p-Laplacian action minus the reaction load.
/// A field is a discrete solution when the sup-norm of this vector is below
/// the Newton tolerance.
pub fn weak_residual(u: &GridFunction, spec: &ProblemSpec) -> Result<Vec<f64>> {
    u.require_dirichlet_zero("weak residual argument")?;
    if u.min_value() < 0.0 {
        return Err(Error::Domain(
            "negative nodal value under a fractional power".into(),
        ));
    }
    let mut res = plap_apply(u, spec.p, 0.0);
    let load = reaction_load(spec, u);
    for (r, b) in res.iter_mut().zip(&load) {
        *r -= b;
    }
    Ok(res)
}

/// Jacobian of the p-Laplacian action alone (always positive semidefinite).
pub fn plap_jacobian(u: &GridFunction, p: f64, eps: f64) -> Result<Csr> {
    let mesh = &u.mesh;
    let grads = u.grad_eval();
    let mut a = CsrBuilder::new(mesh.interior_count());
    for (ei, e) in mesh.elems.iter().enumerate() {
        let g = grads[ei];
        let s = grad_sq(&g) + eps * eps;
        if s == 0.0 {
            if p < 2.0 {
                return Err(Error::DegenerateLinearization(
                    "vanishing gradient with p < 2 and no regularization".into(),
                ));
            }
            if p > 2.0 {
                continue;
            }
        }
        let coef0 = if p == 2.0 { 1.0 } else { s.powf(0.5 * (p - 2.0)) };
        let coef1 = if p == 2.0 {
            0.0
        } else {
            (p - 2.0) * s.powf(0.5 * (p - 4.0))
        };
        for i in 0..mesh.verts {
            let Some(di) = mesh.interior_id[e.nodes[i]] else {
                continue;
            };
            let gui = g[0] * e.grads[i][0] + g[1] * e.grads[i][1];
            for j in 0..mesh.verts {
                let Some(dj) = mesh.interior_id[e.nodes[j]] else {
                    continue;
                };
                let guj = g[0] * e.grads[j][0] + g[1] * e.grads[j][1];
                let gij =
                    e.grads[i][0] * e.grads[j][0] + e.grads[i][1] * e.grads[j][1];
                a.add(di, dj, e.measure * (coef0 * gij + coef1 * gui * guj));
            }
        }
    }
    Ok(a.build())
}

/// Jacobian of the weak residual: regularized diffusion block minus the
/// reaction mass block. Where a power's derivative is singular at zero the
/// value of u is clamped at CLAMP_FLOOR_REL times its sup-norm; the residual
/// itself is never clamped.
pub fn jacobian(u: &GridFunction, spec: &ProblemSpec, opts: &SolverOptions) -> Result<Csr> {
    let mesh = &spec.mesh;
    let floor = CLAMP_FLOOR_REL * u.sup_norm();
    if floor == 0.0 && (spec.q < 1.0 || spec.sigma < 1.0) {
        return Err(Error::DegenerateLinearization(
            "reaction derivative is singular at the zero field".into(),
        ));
    }
    let diffusion = plap_jacobian(u, spec.p, opts.eps_reg)?;
    let mut a = CsrBuilder::new(mesh.interior_count());
    for i in 0..diffusion.n {
        for kk in diffusion.indptr[i]..diffusion.indptr[i + 1] {
            a.add(i, diffusion.indices[kk], diffusion.data[kk]);
        }
    }
    for (ei, e) in mesh.elems.iter().enumerate() {
        for qp in 0..mesh.qp_weight.len() {
            let uv = u.at_qp(ei, qp).max(0.0);
            let uq = if spec.q < 1.0 { uv.max(floor) } else { uv };
            let us = if spec.sigma < 1.0 { uv.max(floor) } else { uv };
            let k = spec.k.at_qp(ei, qp);
            let h = spec.h.at_qp(ei, qp);
            let slope = spec.lambda * spec.q * k * uq.powf(spec.q - 1.0)
                + spec.sign.factor() * spec.sigma * h * us.powf(spec.sigma - 1.0);
            let w = e.measure * mesh.qp_weight[qp];
            for i in 0..mesh.verts {
                let Some(di) = mesh.interior_id[e.nodes[i]] else {
                    continue;
                };
                for j in 0..mesh.verts {
                    let Some(dj) = mesh.interior_id[e.nodes[j]] else {
                        continue;
                    };
                    a.add(
                        di,
                        dj,
                        -slope * w * mesh.qp_basis[qp][i] * mesh.qp_basis[qp][j],
                    );
                }
            }
        }
    }
    Ok(a.build())
}

/// Integral of |grad u|^p over the mesh (exact for P1 data).
pub fn dirichlet_integral(u: &GridFunction, p: f64) -> f64 {
    let grads = u.grad_eval();
    u.mesh
        .elems
        .iter()
        .zip(&grads)
        .map(|(e, g)| grad_sq(g).powf(0.5 * p) * e.measure)
        .sum()
}

/// Integral of (|grad u|^2 + eps^2)^{(p-2)/2} |grad u|^2; equals the
/// Dirichlet integral when eps = 0.
pub fn regularized_dirichlet_integral(u: &GridFunction, p: f64, eps: f64) -> f64 {
    let grads = u.grad_eval();
    u.mesh
        .elems
        .iter()
        .zip(&grads)
        .map(|(e, g)| {
            let s = grad_sq(g);
            if s + eps * eps == 0.0 {
                0.0
            } else {
                (s + eps * eps).powf(0.5 * (p - 2.0)) * s * e.measure
            }
        })
        .sum()
}

fn weighted_power_term(spec: &ProblemSpec, u: &GridFunction, w: &crate::weight::WeightField, r: f64) -> f64 {
    let mesh = &spec.mesh;
    let mut acc = 0.0;
    for (ei, e) in mesh.elems.iter().enumerate() {
        let mut local = 0.0;
        for qp in 0..mesh.qp_weight.len() {
            local += mesh.qp_weight[qp] * w.at_qp(ei, qp) * u.at_qp(ei, qp).abs().powf(r);
        }
        acc += e.measure * local;
    }
    acc
}

/// Energy whose critical points solve the plus problem:
/// (1/p) I[|grad u|^p] - (lambda/(q+1)) I[k |u|^{q+1}] - (1/(sigma+1)) I[h |u|^{sigma+1}].
pub fn energy_e(u: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    u.require_dirichlet_zero("energy argument")?;
    Ok(dirichlet_integral(u, spec.p) / spec.p
        - spec.lambda / (spec.q + 1.0) * weighted_power_term(spec, u, &spec.k, spec.q + 1.0)
        - 1.0 / (spec.sigma + 1.0) * weighted_power_term(spec, u, &spec.h, spec.sigma + 1.0))
}

/// Energy whose minimizers solve the minus problem; the sign of the convex
/// term flips relative to `energy_e`. Evaluated on the nodal absolute value,
/// so F(u) = F(|u|) holds exactly by construction.
pub fn energy_f(u: &GridFunction, spec: &ProblemSpec) -> Result<f64> {
    u.require_dirichlet_zero("energy argument")?;
    let a = u.abs_nodal();
    Ok(dirichlet_integral(&a, spec.p) / spec.p
        - spec.lambda / (spec.q + 1.0) * weighted_power_term(spec, &a, &spec.k, spec.q + 1.0)
        + 1.0 / (spec.sigma + 1.0) * weighted_power_term(spec, &a, &spec.h, spec.sigma + 1.0))
}

/// Inner product of an interior-dof vector with the interior values of u.
pub fn interior_dot(mesh: &Mesh, vec: &[f64], u: &GridFunction) -> f64 {
    mesh.interior
        .iter()
        .enumerate()
        .map(|(dof, &node)| vec[dof] * u.values[node])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sup_norm;
    use crate::mesh::Mesh;
    use crate::problem::Sign;
    use crate::weight::WeightField;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn s0(mesh: &Arc<Mesh>, lambda: f64, sign: Sign) -> ProblemSpec {
        let k = WeightField::constant(mesh, 1.0).unwrap();
        let h = WeightField::constant(mesh, 1.0).unwrap();
        ProblemSpec::new(mesh, 2.0, 0.5, 3.0, lambda, sign, k, h).unwrap()
    }

    #[test]
    fn zero_field_has_zero_action() {
        let m = Mesh::interval(0.0, 1.0, 16).unwrap();
        let u = GridFunction::zeros(&m);
        assert!(plap_apply(&u, 2.5, 0.0).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn laplacian_of_parabola_matches_unit_load() {
        // -u'' = 1 for u = x(1-x)/2; exact for P1 second differences
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let u = GridFunction::from_fn(&m, |x, _| 0.5 * x * (1.0 - x));
        let res = plap_apply(&u, 2.0, 0.0);
        let load = load_constant(&m, 1.0);
        for (r, b) in res.iter().zip(&load) {
            assert!((r - b).abs() < 1e-10);
        }
    }

    #[test]
    fn p3_action_matches_direct_summation() {
        // independent re-assembly from raw differences
        let n = 32;
        let m = Mesh::interval(0.0, 1.0, n).unwrap();
        let h = 1.0 / n as f64;
        let u = GridFunction::from_fn(&m, |x, _| 0.5 * x * (1.0 - x));
        let p = 3.0;
        let res = plap_apply(&u, p, 0.0);
        for i in 1..n {
            let dl = (u.values[i] - u.values[i - 1]) / h;
            let dr = (u.values[i + 1] - u.values[i]) / h;
            let expect = dl.abs().powf(p - 2.0) * dl - dr.abs().powf(p - 2.0) * dr;
            assert_relative_eq!(res[i - 1], expect, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn weak_residual_rejects_negative_values() {
        let m = Mesh::interval(0.0, 1.0, 8).unwrap();
        let spec = s0(&m, 1.0, Sign::Plus);
        let mut u = GridFunction::zeros(&m);
        u.values[3] = -0.1;
        assert!(matches!(
            weak_residual(&u, &spec),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn weak_residual_of_zero_field_vanishes() {
        let m = Mesh::interval(0.0, 1.0, 8).unwrap();
        let spec = s0(&m, 1.0, Sign::Plus);
        let u = GridFunction::zeros(&m);
        assert_eq!(sup_norm(&weak_residual(&u, &spec).unwrap()), 0.0);
    }

    #[test]
    fn torsion_weak_residual_decomposes() {
        // residual of the torsion field = unit load minus the reaction load,
        // up to the solver tolerance of the torsion solve
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let spec = s0(&m, 1.0, Sign::Plus);
        let mut opts = SolverOptions::for_mesh(&m);
        opts.tol_newton = 1e-13;
        let v = crate::solve::solve_torsion(&m, 2.0, &opts).unwrap();
        let res = weak_residual(&v, &spec).unwrap();
        let unit = load_constant(&m, 1.0);
        let reaction = reaction_load(&spec, &v);
        for i in 0..res.len() {
            assert!((res[i] - (unit[i] - reaction[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn accepted_newton_step_decreases_energy() {
        // one damped step on the residual from a perturbed solution state
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let opts = SolverOptions::for_mesh(&m);
        let spec = s0(&m, 1.0, Sign::Plus);
        let u_star = crate::branch::monotone_iterate(&spec, &opts)
            .unwrap()
            .solution
            .unwrap();
        let u = u_star.scale(0.95);
        let r0 = weak_residual(&u, &spec).unwrap();
        let jac = jacobian(&u, &spec, &opts).unwrap();
        let neg: Vec<f64> = r0.iter().map(|r| -r).collect();
        let step = crate::linalg::solve_tridiagonal(&jac, &neg).unwrap();
        let n0 = sup_norm(&r0);
        let e0 = energy_e(&u, &spec).unwrap();
        let mut t = 1.0;
        loop {
            let mut trial = u.clone();
            for (dof, &node) in m.interior.iter().enumerate() {
                trial.values[node] = (trial.values[node] + t * step[dof]).max(0.0);
            }
            let rn = sup_norm(&weak_residual(&trial, &spec).unwrap());
            if rn <= (1.0 - 1e-4 * t) * n0 {
                let e1 = energy_e(&trial, &spec).unwrap();
                assert!(e1 < e0, "energy rose from {e0} to {e1}");
                break;
            }
            t *= 0.5;
            assert!(t > 1e-8, "line search never accepted a step");
        }
    }

    #[test]
    fn energies_vanish_at_zero() {
        let m = Mesh::interval(0.0, 1.0, 8).unwrap();
        let spec = s0(&m, 1.0, Sign::Minus);
        let u = GridFunction::zeros(&m);
        assert_eq!(energy_e(&u, &spec).unwrap(), 0.0);
        assert_eq!(energy_f(&u, &spec).unwrap(), 0.0);
    }

    #[test]
    fn energy_terms_match_independent_quadrature() {
        // term-by-term re-evaluation of E at the parabola
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let spec = s0(&m, 1.0, Sign::Plus);
        let u = GridFunction::from_fn(&m, |x, _| 0.5 * x * (1.0 - x));
        let e = energy_e(&u, &spec).unwrap();

        let n = m.elems.len();
        let h = 1.0 / n as f64;
        let mut grad_term = 0.0;
        for i in 0..n {
            let d = (u.values[i + 1] - u.values[i]) / h;
            grad_term += d * d * h;
        }
        let g = (0.6f64).sqrt();
        let pts = [0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)];
        let wts = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let mut q_term = 0.0;
        let mut s_term = 0.0;
        for i in 0..n {
            for (t, w) in pts.iter().zip(&wts) {
                let val = u.values[i] * (1.0 - t) + u.values[i + 1] * t;
                q_term += h * w * val.abs().powf(1.5);
                s_term += h * w * val.abs().powi(4);
            }
        }
        let expect = 0.5 * grad_term - q_term / 1.5 - 0.25 * s_term;
        assert_relative_eq!(e, expect, epsilon = 1e-12);
    }

    #[test]
    fn energy_f_is_even_under_sign_flips() {
        let m = Mesh::interval(0.0, 1.0, 32).unwrap();
        let spec = s0(&m, 1.3, Sign::Minus);
        let mut u = GridFunction::from_fn(&m, |x, _| (3.0 * x).sin() * x * (1.0 - x));
        for b in &m.boundary {
            u.values[*b] = 0.0;
        }
        let f1 = energy_f(&u, &spec).unwrap();
        let f2 = energy_f(&u.abs_nodal(), &spec).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn action_pairing_equals_gradient_integral() {
        let m = Mesh::interval(0.0, 1.0, 48).unwrap();
        let mut u = GridFunction::from_fn(&m, |x, _| (2.4 * x).sin() * x * (1.0 - x) + 0.02);
        for b in &m.boundary {
            u.values[*b] = 0.0;
        }
        for &(p, eps) in &[(2.0, 0.0), (3.0, 0.0), (1.6, 1e-4), (2.7, 1e-3)] {
            let res = plap_apply(&u, p, eps);
            let pair = interior_dot(&m, &res, &u);
            let integral = regularized_dirichlet_integral(&u, p, eps);
            assert_relative_eq!(pair, integral, epsilon = 1e-12, max_relative = 1e-12);
            if eps == 0.0 {
                assert_relative_eq!(
                    pair,
                    dirichlet_integral(&u, p),
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn operator_is_monotone_on_random_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for mesh in [
            Mesh::interval(0.0, 1.0, 24).unwrap(),
            Mesh::unit_square(5).unwrap(),
        ] {
            for &p in &[1.5, 2.0, 2.8, 3.5] {
                for _ in 0..25 {
                    let mut u = GridFunction::zeros(&mesh);
                    let mut w = GridFunction::zeros(&mesh);
                    for &node in &mesh.interior {
                        u.values[node] = rng.gen_range(-1.0..1.0);
                        w.values[node] = rng.gen_range(-1.0..1.0);
                    }
                    let ru = plap_apply(&u, p, 0.0);
                    let rw = plap_apply(&w, p, 0.0);
                    let mut pairing = 0.0;
                    for (dof, &node) in mesh.interior.iter().enumerate() {
                        pairing += (ru[dof] - rw[dof]) * (u.values[node] - w.values[node]);
                    }
                    assert!(
                        pairing >= -1e-10,
                        "monotonicity violated: {pairing} at p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_at_interior_constant_matches_hand_assembly() {
        // p=2, u = 1 at interior nodes, k = h = 1: diffusion block is the
        // stiffness matrix, reaction block is -(lambda q + sigma) times the
        // mass matrix restricted to quadrature points where u interpolates
        // to a positive value.
        let n = 8;
        let m = Mesh::interval(0.0, 1.0, n).unwrap();
        let lambda = 1.7;
        let spec = s0(&m, lambda, Sign::Plus);
        let u = GridFunction::from_interior(&m, &vec![1.0; m.interior_count()]);
        let opts = SolverOptions::default();
        let jac = jacobian(&u, &spec, &opts).unwrap();

        let h = 1.0 / n as f64;
        let g = (0.6f64).sqrt();
        let pts = [0.5 * (1.0 - g), 0.5, 0.5 * (1.0 + g)];
        let wts = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let ndof = m.interior_count();
        let mut expect = vec![vec![0.0; ndof]; ndof];
        for e in 0..n {
            let nodes = [e, e + 1];
            let basis = |j: usize, t: f64| if j == 0 { 1.0 - t } else { t };
            for i in 0..2 {
                let Some(di) = m.interior_id[nodes[i]] else { continue };
                for j in 0..2 {
                    let Some(dj) = m.interior_id[nodes[j]] else { continue };
                    let gi = if i == 0 { -1.0 / h } else { 1.0 / h };
                    let gj = if j == 0 { -1.0 / h } else { 1.0 / h };
                    expect[di][dj] += gi * gj * h;
                    for (t, w) in pts.iter().zip(&wts) {
                        let uval: f64 = (0..2)
                            .map(|l| basis(l, *t) * u.values[nodes[l]])
                            .sum();
                        let slope = lambda * 0.5 * uval.max(1e-10).powf(-0.5)
                            + 3.0 * uval.powi(2);
                        expect[di][dj] -= slope * h * w * basis(i, *t) * basis(j, *t);
                    }
                }
            }
        }
        for i in 0..ndof {
            for j in 0..ndof {
                assert_relative_eq!(jac.get(i, j), expect[i][j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = Mesh::interval(0.0, 1.0, 40).unwrap();
        let k = WeightField::sin_bump(&m, 0.3).unwrap();
        let h = WeightField::constant(&m, 1.0).unwrap();
        let spec = ProblemSpec::new(&m, 2.5, 0.5, 3.0, 1.2, Sign::Plus, k, h).unwrap();
        let opts = SolverOptions { eps_reg: 0.0, ..Default::default() };

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let interior: Vec<f64> = (0..m.interior_count())
            .map(|_| rng.gen_range(0.5..1.5))
            .collect();
        let u = GridFunction::from_interior(&m, &interior);
        let delta: Vec<f64> = (0..m.interior_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();

        let jac = jacobian(&u, &spec, &opts).unwrap();
        assert!(jac.asymmetry() < 1e-12);
        let jd = jac.matvec(&delta);
        assert_eq!(sup_norm(&jac.matvec(&vec![0.0; jac.n])), 0.0);

        let t = 1e-6;
        let r0 = weak_residual(&u, &spec).unwrap();
        let mut shifted = interior.clone();
        for (s, d) in shifted.iter_mut().zip(&delta) {
            *s += t * d;
        }
        let u1 = GridFunction::from_interior(&m, &shifted);
        let r1 = weak_residual(&u1, &spec).unwrap();
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..jd.len() {
            let fd = (r1[i] - r0[i]) / t;
            err = err.max((fd - jd[i]).abs());
            scale = scale.max(fd.abs());
        }
        assert!(err / scale <= 1e-5, "relative error {}", err / scale);
    }

    #[test]
    fn jacobian_flags_zero_field() {
        let m = Mesh::interval(0.0, 1.0, 8).unwrap();
        let spec = s0(&m, 1.0, Sign::Plus);
        let u = GridFunction::zeros(&m);
        assert!(matches!(
            jacobian(&u, &spec, &SolverOptions::default()),
            Err(Error::DegenerateLinearization(_))
        ));
    }
}
