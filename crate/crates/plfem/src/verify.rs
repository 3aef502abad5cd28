//! Standalone checkers for the structural inequalities and identities the
//! constructions rely on. Pure functions over fields; nothing here feeds
//! back into the solvers.

use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::operator::{dirichlet_integral, interior_dot, plap_apply, reaction_load};
use crate::problem::ProblemSpec;

/// Pointwise minimum and integral of the Picone remainder
///
///   R(u, v) = |grad u|^p - grad(u^p / v^{p-1}) . |grad v|^{p-2} grad v,
///
/// expanded at each quadrature point as
///
///   R = |grad u|^p - [p (u/v)^{p-1} grad u - (p-1) (u/v)^p grad v]
///       . |grad v|^{p-2} grad v.
///
/// The remainder is nonnegative for u >= 0, v > 0 and vanishes exactly when
/// u is a constant multiple of v.
pub fn picone_remainder(u: &GridFunction, v: &GridFunction, p: f64) -> Result<(f64, f64)> {
    if !u.same_mesh(v) {
        return Err(Error::IncompatibleFields(
            "Picone arguments live on different meshes".into(),
        ));
    }
    if u.min_value() < 0.0 {
        return Err(Error::Domain("Picone needs u >= 0".into()));
    }
    let mesh = &u.mesh;
    let gu = u.grad_eval();
    let gv = v.grad_eval();
    let mut min_r = f64::INFINITY;
    let mut integral = 0.0;
    for (ei, e) in mesh.elems.iter().enumerate() {
        for qp in 0..mesh.qp_weight.len() {
            let uv = u.at_qp(ei, qp);
            let vv = v.at_qp(ei, qp);
            if vv <= 0.0 {
                return Err(Error::Domain(format!(
                    "Picone needs v > 0 at evaluation points, found {vv}"
                )));
            }
            let ratio = uv / vv;
            let ngu = (gu[ei][0] * gu[ei][0] + gu[ei][1] * gu[ei][1]).sqrt();
            let ngv = (gv[ei][0] * gv[ei][0] + gv[ei][1] * gv[ei][1]).sqrt();
            let dot_uv = gu[ei][0] * gv[ei][0] + gu[ei][1] * gv[ei][1];
            let r = ngu.powf(p)
                - (p * ratio.powf(p - 1.0) * dot_uv - (p - 1.0) * ratio.powf(p) * ngv * ngv)
                    * ngv.powf(p - 2.0);
            min_r = min_r.min(r);
            integral += e.measure * mesh.qp_weight[qp] * r;
        }
    }
    Ok((min_r, integral))
}

/// Does the componentwise operator-action ordering hold? This is the premise
/// of the comparison check.
pub fn comparison_premise(u: &GridFunction, v: &GridFunction, p: f64) -> bool {
    let au = plap_apply(u, p, 0.0);
    let av = plap_apply(v, p, 0.0);
    au.iter().zip(&av).all(|(a, b)| a <= b)
}

/// Conclusion of the comparison principle: u <= v nodewise within slack.
/// Meaningful when the premise holds and u <= v on the boundary.
pub fn check_comparison(u: &GridFunction, v: &GridFunction, _p: f64) -> bool {
    u.below(v, 1e-10)
}

/// Report of the energy sign, the stability inequality, the solution
/// identity, and the reaction-balance inequality at a converged
/// minimal-branch solution.
///
/// With T1 = I[|grad u|^p], T2 = I[k u^{q+1}], T3 = I[h u^{sigma+1}]:
///
/// - energy: E(u) < 0,
/// - stability: T1 - (lambda q/(p-1)) T2 - (sigma/(p-1)) T3 >= 0 (holds on
///   the minimal branch, where the linearized operator is nonnegative),
/// - identity: T1 = lambda T2 + T3 (testing the equation with u itself),
/// - balance: lambda (p-1-q) T2 >= (sigma+1-p) T3 (stability + identity).
#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    pub energy: f64,
    pub stability_slack: f64,
    pub identity_residual: f64,
    pub balance_slack: f64,
    /// max(|T1|, lambda |T2|, |T3|): the scale the slacks are measured on.
    pub scale: f64,
    pub energy_negative: bool,
    pub stability_ok: bool,
    pub identity_ok: bool,
    pub balance_ok: bool,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.energy_negative && self.stability_ok && self.identity_ok && self.balance_ok
    }
}

pub const IDENTITY_REL_SLACK: f64 = 1e-6;

pub fn check_identities(u: &GridFunction, spec: &ProblemSpec) -> Result<IdentityReport> {
    u.require_dirichlet_zero("identity-check argument")?;
    let (p, q, sigma, lambda) = (spec.p, spec.q, spec.sigma, spec.lambda);
    let t1 = dirichlet_integral(u, p);
    let t2 = crate::field::integrate_weighted_power(u, &spec.k, q + 1.0)?;
    let t3 = crate::field::integrate_weighted_power(u, &spec.h, sigma + 1.0)?;
    let scale = t1.abs().max(lambda * t2).max(t3).max(f64::MIN_POSITIVE);
    let tol = IDENTITY_REL_SLACK * scale;

    let energy = crate::operator::energy_e(u, spec)?;
    let stability = t1 - lambda * q / (p - 1.0) * t2 - sigma / (p - 1.0) * t3;
    let identity = t1 - lambda * t2 - t3;
    let balance = lambda * (p - 1.0 - q) * t2 - (sigma + 1.0 - p) * t3;

    Ok(IdentityReport {
        energy,
        stability_slack: stability,
        identity_residual: identity,
        balance_slack: balance,
        scale,
        energy_negative: energy < 0.0,
        stability_ok: stability >= -tol,
        identity_ok: identity.abs() <= tol,
        balance_ok: balance >= -tol,
    })
}

/// Minimum inward slope over boundary nodes: one-sided difference toward the
/// nearest interior node. A positive minimum certifies the discrete version
/// of the negative outward normal derivative.
pub fn boundary_slope_check(u: &GridFunction) -> f64 {
    u.mesh
        .nearest_interior()
        .iter()
        .map(|&(b, i, d)| (u.values[i] - u.values[b]) / d)
        .fold(f64::INFINITY, f64::min)
}

/// Strict positivity at every interior node.
pub fn interior_positive(u: &GridFunction) -> bool {
    u.mesh.interior.iter().all(|&n| u.values[n] > 0.0)
}

/// Pairing form of the solution identity: <action(u), u> versus the
/// reaction load paired with u. Returns (difference, scale).
pub fn pairing_identity(u: &GridFunction, spec: &ProblemSpec) -> (f64, f64) {
    let act = plap_apply(u, spec.p, 0.0);
    let lhs = interior_dot(&spec.mesh, &act, u);
    let load = reaction_load(spec, u);
    let rhs = interior_dot(&spec.mesh, &load, u);
    ((lhs - rhs).abs(), lhs.abs().max(rhs.abs()))
}
