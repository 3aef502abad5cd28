//! Minimal-branch machinery for the plus problem: monotone iteration from
//! the concave solution, lambda sweeps, and bisection bracketing of the
//! extremal parameter.
//!
//! The iteration starts at the solution w of the pure-concave problem and
//! repeatedly solves
//!
//!   -div(|grad u_n|^{p-2} grad u_n) = lambda k u_{n-1}^q + h u_{n-1}^sigma,
//!
//! which climbs monotonically toward the minimal solution when one exists.
//! A diverging iteration is treated as evidence that lambda lies past the
//! extremal value; because that predicate is heuristic at fixed mesh, every
//! estimate also carries the guaranteed bracket [lambda0, lambda_prime].

use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::linalg::sup_norm;
use crate::operator::{energy_e, plap_apply, reaction_load};
use crate::problem::{ProblemSpec, Sign, SolverOptions};
use crate::solve::{solve_concave, solve_with_rhs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Converged,
    Diverged,
    Stagnated,
}

impl std::fmt::Display for PointStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointStatus::Converged => write!(f, "converged"),
            PointStatus::Diverged => write!(f, "diverged"),
            PointStatus::Stagnated => write!(f, "stagnated"),
        }
    }
}

/// One lambda sample of the minimal branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    /// Converged solution; None when the iteration diverged or stagnated.
    pub solution: Option<GridFunction>,
    /// Sup-norm of the solution (or of the last iterate).
    pub sup_norm: f64,
    /// Energy of the converged solution; NaN otherwise.
    pub energy: f64,
    pub iterations: usize,
    /// Largest nodewise decrease between consecutive iterates, relative to
    /// the iterate sup-norm. The monotone chain keeps this at rounding level.
    pub monotonicity_violation: f64,
    pub status: PointStatus,
}

/// Bracketed estimate of an extremal parameter.
#[derive(Debug, Clone)]
pub struct LambdaStarEstimate {
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
    /// (lambda, predicate) pairs in evaluation order.
    pub history: Vec<(f64, bool)>,
    /// Guaranteed lower bound when one exists (lambda0 for the plus sign).
    pub guaranteed_lo: Option<f64>,
    /// Guaranteed upper bound (lambda_prime for plus, Lambda for minus).
    pub guaranteed_hi: Option<f64>,
    /// Set when a predicate stagnated even after widening the iteration
    /// budget; the bracket is still valid but the interior point is soft.
    pub low_confidence: bool,
}

/// Monotone iteration from an arbitrary nonnegative start; `observe` sees
/// every accepted iterate (the start included).
pub fn monotone_iterate_from(
    spec: &ProblemSpec,
    start: GridFunction,
    opts: &SolverOptions,
    mut observe: impl FnMut(&GridFunction),
) -> Result<BranchPoint> {
    if spec.sign != Sign::Plus {
        return Err(Error::InvalidSpec(
            "monotone iteration applies to the plus problem".into(),
        ));
    }
    if !(spec.lambda > 0.0) {
        return Err(Error::InvalidSpec("need lambda > 0".into()));
    }
    let mut u = start.clip_below(0.0);
    observe(&u);
    let mut load = reaction_load(spec, &u);
    let mut worst_violation = 0.0f64;
    for iter in 1..=opts.max_outer {
        let next = match solve_with_rhs(&spec.mesh, &load, spec.p, opts, Some(&u)) {
            Ok(out) => out.solution,
            Err(e) if e.is_divergence() => {
                return Ok(BranchPoint {
                    lambda: spec.lambda,
                    solution: None,
                    sup_norm: u.sup_norm(),
                    energy: f64::NAN,
                    iterations: iter,
                    monotonicity_violation: worst_violation,
                    status: PointStatus::Diverged,
                })
            }
            Err(e) => return Err(e),
        };
        observe(&next);
        let sup = next.sup_norm();
        let decrease = next.max_excess_over(&u).max(0.0); // max of (u - next)
        if sup > 0.0 {
            worst_violation = worst_violation.max(decrease / sup);
        }
        if !sup.is_finite() || sup > opts.blow_up {
            return Ok(BranchPoint {
                lambda: spec.lambda,
                solution: None,
                sup_norm: sup,
                energy: f64::NAN,
                iterations: iter,
                monotonicity_violation: worst_violation,
                status: PointStatus::Diverged,
            });
        }
        let next_load = reaction_load(spec, &next);
        let mut res = plap_apply(&next, spec.p, 0.0);
        for (r, b) in res.iter_mut().zip(&next_load) {
            *r -= b;
        }
        // same load scaling as the inner solves, so the two criteria agree
        if sup_norm(&res) <= opts.tol_newton * sup_norm(&next_load).max(1.0) {
            let energy = energy_e(&next, spec)?;
            return Ok(BranchPoint {
                lambda: spec.lambda,
                solution: Some(next),
                sup_norm: sup,
                energy,
                iterations: iter,
                monotonicity_violation: worst_violation,
                status: PointStatus::Converged,
            });
        }
        u = next;
        load = next_load;
    }
    Ok(BranchPoint {
        lambda: spec.lambda,
        solution: None,
        sup_norm: u.sup_norm(),
        energy: f64::NAN,
        iterations: opts.max_outer,
        monotonicity_violation: worst_violation,
        status: PointStatus::Stagnated,
    })
}

/// Monotone iteration started at the concave solution w.
pub fn monotone_iterate(spec: &ProblemSpec, opts: &SolverOptions) -> Result<BranchPoint> {
    let w = solve_concave(spec.lambda, &spec.k, spec.q, spec.p, opts, None)?;
    monotone_iterate_from(spec, w, opts, |_| {})
}

/// Run the monotone iteration over an increasing lambda grid.
pub fn sweep_minimal_branch(
    spec: &ProblemSpec,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<BranchPoint>> {
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("lambda grid must be increasing".into()));
    }
    lambdas
        .iter()
        .map(|&l| monotone_iterate(&spec.with_lambda(l), opts))
        .collect()
}

/// Existence predicate at one lambda: did the monotone iteration converge?
/// Stagnation is retried once with a four-fold iteration budget; if it still
/// stagnates the point is counted as nonexistence and flagged.
fn existence_predicate(
    spec: &ProblemSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<(bool, bool)> {
    let point = monotone_iterate(&spec.with_lambda(lambda), opts)?;
    match point.status {
        PointStatus::Converged => Ok((true, false)),
        PointStatus::Diverged => Ok((false, false)),
        PointStatus::Stagnated => {
            let mut wide = opts.clone();
            wide.max_outer *= 4;
            let retry = monotone_iterate(&spec.with_lambda(lambda), &wide)?;
            match retry.status {
                PointStatus::Converged => Ok((true, false)),
                PointStatus::Diverged => Ok((false, false)),
                PointStatus::Stagnated => Ok((false, true)),
            }
        }
    }
}

const BRACKET_REL_WIDTH: f64 = 1e-3;

/// Bisection between the guaranteed bounds, using convergence of the
/// monotone iteration as the existence test.
pub fn estimate_lambda_star_plus(
    spec: &ProblemSpec,
    lambda0: f64,
    lambda_prime: f64,
    opts: &SolverOptions,
) -> Result<LambdaStarEstimate> {
    if !(lambda0 > 0.0 && lambda_prime > lambda0) {
        return Err(Error::InvalidSpec(format!(
            "need 0 < lambda0 < lambda_prime, got [{lambda0}, {lambda_prime}]"
        )));
    }
    let mut history = Vec::new();
    let mut low_confidence = false;

    let (at_hi, soft) = existence_predicate(spec, lambda_prime, opts)?;
    history.push((lambda_prime, at_hi));
    low_confidence |= soft;
    if at_hi {
        // solutions persist all the way to the nonexistence bound
        return Ok(LambdaStarEstimate {
            lower: lambda_prime,
            upper: lambda_prime,
            estimate: lambda_prime,
            history,
            guaranteed_lo: Some(lambda0),
            guaranteed_hi: Some(lambda_prime),
            low_confidence,
        });
    }
    let (at_lo, soft) = existence_predicate(spec, lambda0, opts)?;
    history.push((lambda0, at_lo));
    low_confidence |= soft || !at_lo;

    let (mut lo, mut hi) = (lambda0, lambda_prime);
    while (hi - lo) / (0.5 * (hi + lo)) > BRACKET_REL_WIDTH {
        let mid = 0.5 * (lo + hi);
        let (exists, soft) = existence_predicate(spec, mid, opts)?;
        history.push((mid, exists));
        low_confidence |= soft;
        if exists {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LambdaStarEstimate {
        lower: lo,
        upper: hi,
        estimate: 0.5 * (lo + hi),
        history,
        guaranteed_lo: Some(lambda0),
        guaranteed_hi: Some(lambda_prime),
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::operator::{interior_dot, weak_residual};
    use crate::subsuper::SubSuperBundle;
    use crate::weight::WeightField;
    use std::sync::Arc;

    fn s0(mesh: &Arc<Mesh>, lambda: f64) -> ProblemSpec {
        let k = WeightField::constant(mesh, 1.0).unwrap();
        let h = WeightField::constant(mesh, 1.0).unwrap();
        ProblemSpec::new(mesh, 2.0, 0.5, 3.0, lambda, Sign::Plus, k, h).unwrap()
    }

    /// Finite-difference Picard oracle for -u'' = lambda u^q + u^sigma on a
    /// fine grid; independent of the finite-element path.
    fn fd_minimal_solution(n: usize, lambda: f64, q: f64, sigma: f64) -> Vec<f64> {
        let h = 1.0 / n as f64;
        let solve_fd = |rhs: &[f64]| -> Vec<f64> {
            let m = n - 1;
            let mut diag = vec![2.0; m];
            let mut b: Vec<f64> = rhs.iter().map(|g| h * h * g).collect();
            for i in 1..m {
                let f = -1.0 / diag[i - 1];
                diag[i] -= f * -1.0;
                b[i] -= f * b[i - 1];
            }
            let mut x = vec![0.0; m];
            x[m - 1] = b[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                x[i] = (b[i] + x[i + 1]) / diag[i];
            }
            x
        };
        // concave start
        let mut u = vec![0.05; n - 1];
        for _ in 0..400 {
            let rhs: Vec<f64> = u.iter().map(|&v: &f64| lambda * v.max(0.0).powf(q)).collect();
            u = solve_fd(&rhs);
        }
        // full reaction
        for _ in 0..2000 {
            let rhs: Vec<f64> = u
                .iter()
                .map(|&v: &f64| lambda * v.max(0.0).powf(q) + v.max(0.0).powf(sigma))
                .collect();
            let next = solve_fd(&rhs);
            let step = next
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            u = next;
            if step < 1e-13 {
                break;
            }
        }
        let mut full = vec![0.0; n + 1];
        full[1..n].copy_from_slice(&u);
        full
    }

    #[test]
    fn converges_at_unit_lambda_with_negative_energy() {
        let m = Mesh::interval(0.0, 1.0, 256).unwrap();
        let spec = s0(&m, 1.0);
        let opts = SolverOptions::for_mesh(&m);
        let point = monotone_iterate(&spec, &opts).unwrap();
        assert_eq!(point.status, PointStatus::Converged);
        assert!(point.energy < 0.0, "energy {}", point.energy);
        assert!(point.monotonicity_violation <= 1e-8);
        let u = point.solution.unwrap();
        let res = weak_residual(&u, &spec).unwrap();
        assert!(sup_norm(&res) <= opts.tol_newton);

        // fine-grid finite-difference oracle
        let fine = fd_minimal_solution(4096, 1.0, 0.5, 3.0);
        let fsup = fine.iter().cloned().fold(0.0f64, f64::max);
        let mut worst = 0.0f64;
        for (i, c) in m.coords.iter().enumerate() {
            let fi = (c[0] * 4096.0).round() as usize;
            worst = worst.max((u.values[i] - fine[fi]).abs());
        }
        assert!(worst / fsup < 1e-3, "relative deviation {}", worst / fsup);
    }

    #[test]
    fn diverges_past_the_nonexistence_bound() {
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let spec = s0(&m, 20.0);
        let opts = SolverOptions::for_mesh(&m);
        let point = monotone_iterate(&spec, &opts).unwrap();
        assert_eq!(point.status, PointStatus::Diverged);
        assert!(point.solution.is_none());
        assert!(point.energy.is_nan());
    }

    #[test]
    fn small_lambda_respects_super_solution_cap() {
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let spec = s0(&m, 0.01);
        let opts = SolverOptions::for_mesh(&m);
        let bundle = SubSuperBundle::assemble(&spec, &opts).unwrap();
        let point = monotone_iterate(&spec, &opts).unwrap();
        assert_eq!(point.status, PointStatus::Converged);
        let cap = bundle.super_scale.powf(1.0 / (spec.p - 1.0)) * bundle.torsion.sup_norm();
        assert!(
            point.sup_norm <= cap + 1e-8,
            "sup {} exceeds cap {cap}",
            point.sup_norm
        );
    }

    #[test]
    fn sweep_is_increasing_and_ordered() {
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let spec = s0(&m, 1.0);
        let opts = SolverOptions::for_mesh(&m);
        let grid: Vec<f64> = (1..=7).map(|i| i as f64).collect();
        let points = sweep_minimal_branch(&spec, &grid, &opts).unwrap();
        assert!(points.iter().all(|p| p.status == PointStatus::Converged));
        for w in points.windows(2) {
            assert!(w[1].sup_norm > w[0].sup_norm);
            let a = w[0].solution.as_ref().unwrap();
            let b = w[1].solution.as_ref().unwrap();
            assert!(a.below(b, 1e-8), "branch not nodewise ordered");
        }
        for p in &points {
            assert!(p.energy < 0.0);
        }
    }

    #[test]
    fn sweep_handles_empty_and_diverging_entries() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let spec = s0(&m, 1.0);
        let opts = SolverOptions::for_mesh(&m);
        assert!(sweep_minimal_branch(&spec, &[], &opts).unwrap().is_empty());
        let points = sweep_minimal_branch(&spec, &[1.0, 20.0], &opts).unwrap();
        assert_eq!(points[0].status, PointStatus::Converged);
        assert_eq!(points[1].status, PointStatus::Diverged);
        assert!(sweep_minimal_branch(&spec, &[2.0, 1.0], &opts).is_err());
    }

    #[test]
    fn iteration_from_subsolution_stays_under_supersolution() {
        // in the certified range the whole chain is trapped by the pair,
        // and the limit obeys the super-solution cap
        let m = Mesh::interval(0.0, 1.0, 96).unwrap();
        let opts = SolverOptions::for_mesh(&m);
        for lambda in [1.0, 5.0] {
            let spec = s0(&m, lambda);
            let bundle = SubSuperBundle::assemble(&spec, &opts).unwrap();
            assert!(bundle.super_verified);
            let sup_field = bundle.super_field.clone();
            let mut trapped = true;
            let point = monotone_iterate_from(&spec, bundle.sub.clone(), &opts, |u| {
                trapped &= u.below(&sup_field, 1e-8 * (1.0 + u.sup_norm()));
            })
            .unwrap();
            assert!(trapped, "an iterate escaped the super-solution at lambda {lambda}");
            assert_eq!(point.status, PointStatus::Converged);
            assert!(point
                .solution
                .unwrap()
                .below(&bundle.super_field, 1e-8));
            // the pair itself satisfies the comparison conclusion
            assert!(crate::verify::comparison_premise(
                &bundle.sub,
                &bundle.super_field,
                spec.p
            ));
            assert!(crate::verify::check_comparison(
                &bundle.sub,
                &bundle.super_field,
                spec.p
            ));
        }
    }

    #[test]
    fn two_dimensional_branch_point_converges() {
        let m = Mesh::unit_square(8).unwrap();
        let k = WeightField::constant(&m, 1.0).unwrap();
        let h = WeightField::constant(&m, 1.0).unwrap();
        let spec = ProblemSpec::new(&m, 2.0, 0.5, 3.0, 1.0, Sign::Plus, k, h).unwrap();
        let opts = SolverOptions::for_mesh(&m);
        let point = monotone_iterate(&spec, &opts).unwrap();
        assert_eq!(point.status, PointStatus::Converged);
        assert!(point.energy < 0.0);
        assert!(point.monotonicity_violation <= 1e-8);
        let u = point.solution.unwrap();
        assert!(u.interior_values().iter().all(|&v| v > 0.0));
        let report = crate::verify::check_identities(&u, &spec).unwrap();
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn pairing_identity_holds_at_converged_points() {
        // <action(u), u> = lambda I[k u^{q+1}] + I[h u^{sigma+1}] at solutions
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let spec = s0(&m, 3.0);
        let opts = SolverOptions::for_mesh(&m);
        let u = monotone_iterate(&spec, &opts).unwrap().solution.unwrap();
        let act = plap_apply(&u, spec.p, 0.0);
        let lhs = interior_dot(&m, &act, &u);
        let load = reaction_load(&spec, &u);
        let rhs = interior_dot(&m, &load, &u);
        let scale = lhs.abs().max(rhs.abs());
        assert!((lhs - rhs).abs() <= 1e-6 * scale);
    }

    #[test]
    fn estimate_lands_in_the_guaranteed_sandwich() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let spec = s0(&m, 1.0);
        let opts = SolverOptions::for_mesh(&m);
        let bundle = SubSuperBundle::assemble(&spec, &opts).unwrap();
        let est = estimate_lambda_star_plus(
            &spec,
            bundle.constants.lambda0,
            bundle.lambda_prime,
            &opts,
        )
        .unwrap();
        assert!(est.lower <= est.estimate && est.estimate <= est.upper);
        assert!(est.lower >= bundle.constants.lambda0 * (1.0 - 1e-12));
        assert!(est.upper <= bundle.lambda_prime * (1.0 + 1e-12));
        assert!((est.upper - est.lower) / est.estimate <= 2e-3);
        assert!(estimate_lambda_star_plus(&spec, 5.0, 5.0, &opts).is_err());
    }

    #[test]
    fn doubling_k_halves_the_estimate() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let opts = SolverOptions::for_mesh(&m);
        let spec1 = s0(&m, 1.0);
        let b1 = SubSuperBundle::assemble(&spec1, &opts).unwrap();
        let e1 = estimate_lambda_star_plus(
            &spec1,
            b1.constants.lambda0,
            b1.lambda_prime,
            &opts,
        )
        .unwrap();

        let k2 = WeightField::constant(&m, 2.0).unwrap();
        let h = WeightField::constant(&m, 1.0).unwrap();
        let spec2 = ProblemSpec::new(&m, 2.0, 0.5, 3.0, 1.0, Sign::Plus, k2, h).unwrap();
        let b2 = SubSuperBundle::assemble(&spec2, &opts).unwrap();
        let e2 = estimate_lambda_star_plus(
            &spec2,
            b2.constants.lambda0,
            b2.lambda_prime,
            &opts,
        )
        .unwrap();
        let ratio = e1.estimate / e2.estimate;
        assert!((ratio - 2.0).abs() / 2.0 < 5e-3, "ratio {ratio}");
    }
}
