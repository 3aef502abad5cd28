//! Minimization machinery for the minus problem: coercive descent on the
//! energy, the constrained level that seeds the existence threshold, the
//! obstacle variant, and the extremal-parameter estimator.
//!
//! The energy is nonsmooth at the zero field for q < 1, so the minimizers
//! use projected gradient descent (with Barzilai-Borwein steps and a
//! monotone backtracking line search) rather than Newton. The projection is
//! the nodal absolute value, mirroring the evenness of the functional.

use std::sync::Arc;

use crate::branch::LambdaStarEstimate;
use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::linalg::sup_norm;
use crate::operator::{assemble_load, energy_f, plap_apply};
use crate::problem::{ProblemSpec, Sign, SolverOptions};
use crate::solve::solve_torsion;

/// Result of one descent run.
#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub minimizer: GridFunction,
    pub f_value: f64,
    /// Exit value of the stationarity measure (gradient sup-norm, or the
    /// bound-constrained analogue for the obstacle problem).
    pub grad_norm: f64,
    /// Feasibility defect of the constrained problem; None when unconstrained.
    pub constraint_residual: Option<f64>,
    pub steps: usize,
    pub converged: bool,
}

struct DescentOutcome {
    x: GridFunction,
    f: f64,
    crit: f64,
    steps: usize,
    converged: bool,
}

/// Projected gradient descent with BB steps and monotone backtracking.
/// `observe` sees the objective value of every accepted iterate.
fn descend(
    x0: GridFunction,
    objective: &dyn Fn(&GridFunction) -> f64,
    gradient: &dyn Fn(&GridFunction) -> Vec<f64>,
    project: &dyn Fn(GridFunction) -> GridFunction,
    stationarity: &dyn Fn(&GridFunction, &[f64]) -> f64,
    opts: &SolverOptions,
    observe: &mut dyn FnMut(f64),
) -> DescentOutcome {
    let mesh = Arc::clone(&x0.mesh);
    let mut x = project(x0);
    let mut f = objective(&x);
    observe(f);
    let mut g = gradient(&x);
    let mut step = {
        let gn = sup_norm(&g);
        if gn > 0.0 {
            (1.0 / gn).min(1.0)
        } else {
            1.0
        }
    };
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (x interior, g)
    for it in 0..opts.max_descent {
        let crit = stationarity(&x, &g);
        if crit <= opts.tol_grad {
            return DescentOutcome {
                x,
                f,
                crit,
                steps: it,
                converged: true,
            };
        }
        // BB1 step from the last accepted move
        if let Some((px, pg)) = &prev {
            let mut sy = 0.0;
            let mut ss = 0.0;
            for (dof, &node) in mesh.interior.iter().enumerate() {
                let dx = x.values[node] - px[dof];
                let dg = g[dof] - pg[dof];
                sy += dx * dg;
                ss += dx * dx;
            }
            if sy > 0.0 && ss > 0.0 {
                step = (ss / sy).clamp(1e-12, 1e12);
            }
        }
        let x_int: Vec<f64> = mesh.interior.iter().map(|&n| x.values[n]).collect();
        let mut s = step;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = x.clone();
            for (dof, &node) in mesh.interior.iter().enumerate() {
                trial.values[node] -= s * g[dof];
            }
            let trial = project(trial);
            let ft = objective(&trial);
            if ft.is_finite() && ft < f {
                prev = Some((x_int.clone(), g.clone()));
                x = trial;
                f = ft;
                observe(f);
                g = gradient(&x);
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return DescentOutcome {
                x,
                f,
                crit,
                steps: it,
                converged: crit <= opts.tol_grad,
            };
        }
    }
    let crit = stationarity(&x, &g);
    DescentOutcome {
        x,
        f,
        crit,
        steps: opts.max_descent,
        converged: crit <= opts.tol_grad,
    }
}

/// Gradient of the energy for the minus problem on a nonnegative field;
/// identical to the weak residual with the minus sign.
fn energy_gradient(spec: &ProblemSpec, u: &GridFunction) -> Vec<f64> {
    let mut g = plap_apply(u, spec.p, 0.0);
    let load = assemble_load(&spec.mesh, |ei, qp| {
        let uv = u.at_qp(ei, qp).max(0.0);
        spec.lambda * spec.k.at_qp(ei, qp) * uv.powf(spec.q)
            - spec.h.at_qp(ei, qp) * uv.powf(spec.sigma)
    });
    for (gi, li) in g.iter_mut().zip(&load) {
        *gi -= li;
    }
    g
}

/// Pick a starting amplitude along the normalized torsion profile by a
/// coarse scan; keeps the initial value at or below zero.
fn default_start(spec: &ProblemSpec, opts: &SolverOptions) -> Result<GridFunction> {
    let torsion = solve_torsion(&spec.mesh, spec.p, opts)?;
    let profile = torsion.scale(1.0 / torsion.sup_norm());
    let mut best = (GridFunction::zeros(&spec.mesh), 0.0);
    for i in 0..60 {
        let t = 10f64.powf(-6.0 + 8.0 * i as f64 / 59.0);
        let cand = profile.scale(t);
        let f = energy_f(&cand, spec)?;
        if f < best.1 {
            best = (cand, f);
        }
    }
    Ok(best.0)
}

/// Global descent on the minus-problem energy over the nonnegative cone.
pub fn minimize_energy(
    spec: &ProblemSpec,
    initial: Option<&GridFunction>,
    opts: &SolverOptions,
) -> Result<MinimizeReport> {
    minimize_energy_observed(spec, initial, opts, &mut |_| {})
}

pub fn minimize_energy_observed(
    spec: &ProblemSpec,
    initial: Option<&GridFunction>,
    opts: &SolverOptions,
    observe: &mut dyn FnMut(f64),
) -> Result<MinimizeReport> {
    if spec.sign != Sign::Minus {
        return Err(Error::InvalidSpec(
            "energy minimization applies to the minus problem".into(),
        ));
    }
    let x0 = match initial {
        Some(g) => {
            g.require_dirichlet_zero("initial field")?;
            g.abs_nodal()
        }
        None => default_start(spec, opts)?,
    };
    // Descend to a coarse stationarity level relative to the starting
    // gradient, then run Newton on the gradient (= the minus-sign weak
    // residual), whose linearization is definite in the basin of a
    // minimizer. A rejected polish (energy went up, e.g. Newton drifting
    // toward the trivial critical point) tightens the descent and retries.
    let g0 = sup_norm(&energy_gradient(spec, &x0));
    let mut tau = (1e-2 * g0).max(opts.tol_grad);
    let mut x = x0;
    let mut steps = 0usize;
    loop {
        let mut coarse = opts.clone();
        coarse.tol_grad = tau;
        let out = descend(
            x,
            &|u| energy_f(u, spec).unwrap_or(f64::INFINITY),
            &|u| energy_gradient(spec, u),
            &|u| u.abs_nodal(),
            &|_, g| sup_norm(g),
            &coarse,
            observe,
        );
        steps += out.steps;
        x = out.x;

        let mut polish_opts = opts.clone();
        polish_opts.tol_newton = opts.tol_grad;
        let polish = crate::solve::newton_engine(
            &x,
            |u| Ok(energy_gradient(spec, u)),
            |u| crate::operator::jacobian(u, spec, opts),
            |u| u.clip_below(0.0),
            &polish_opts,
        );
        match polish {
            // accept only if the polished point stayed in the descent basin
            Ok(p) if energy_f(&p.solution, spec)? <= out.f + 1e-9 * (1.0 + out.f.abs()) => {
                let f = energy_f(&p.solution, spec)?;
                return Ok(MinimizeReport {
                    minimizer: p.solution,
                    f_value: f,
                    grad_norm: p.residual_norm,
                    constraint_residual: None,
                    steps: steps + p.iterations,
                    converged: true,
                });
            }
            _ if tau > opts.tol_grad => {
                tau = (1e-2 * tau).max(opts.tol_grad);
            }
            _ => {
                return Ok(MinimizeReport {
                    minimizer: x,
                    f_value: out.f,
                    grad_norm: out.crit,
                    constraint_residual: None,
                    steps,
                    converged: out.converged,
                });
            }
        }
    }
}

/// Scalar coercivity floor: the minimum of C2 t^{sigma+1} - C1 t^{q+1} with
/// C1 = lambda ||k||_inf / (q+1) and C2 = ess inf h / (sigma+1). The energy
/// of the minus problem never drops below it (up to the norm-comparison
/// factor; see `holder_factor`).
#[derive(Debug, Clone, Copy)]
pub struct CoercivityFloor {
    pub c1: f64,
    pub c2: f64,
    pub argmin: f64,
    pub value: f64,
}

pub fn coercivity_floor(spec: &ProblemSpec) -> CoercivityFloor {
    let c1 = spec.lambda / (spec.q + 1.0) * spec.k.sup;
    let c2 = 1.0 / (spec.sigma + 1.0) * spec.h.inf;
    floor_from_caps(spec, c1, c2)
}

fn floor_from_caps(spec: &ProblemSpec, c1: f64, c2: f64) -> CoercivityFloor {
    let argmin = (c1 * (spec.q + 1.0) / (c2 * (spec.sigma + 1.0))).powf(1.0 / (spec.sigma - spec.q));
    let value = c2 * argmin.powf(spec.sigma + 1.0) - c1 * argmin.powf(spec.q + 1.0);
    CoercivityFloor {
        c1,
        c2,
        argmin,
        value,
    }
}

/// |domain|^{1 - (q+1)/(sigma+1)}: the constant comparing the two reaction
/// norms on a finite-measure domain. One on unit-measure domains.
pub fn holder_factor(spec: &ProblemSpec) -> f64 {
    spec.mesh
        .volume()
        .powf(1.0 - (spec.q + 1.0) / (spec.sigma + 1.0))
}

/// Floor with the norm-comparison factor absorbed into C1; every energy
/// value evaluated on the mesh stays above this number.
pub fn coercivity_floor_discrete(spec: &ProblemSpec) -> CoercivityFloor {
    let c1 = spec.lambda / (spec.q + 1.0) * spec.k.sup * holder_factor(spec);
    let c2 = 1.0 / (spec.sigma + 1.0) * spec.h.inf;
    floor_from_caps(spec, c1, c2)
}

/// Constrained level and its minimizer.
#[derive(Debug, Clone)]
pub struct ConstrainedLevel {
    pub level: f64,
    pub minimizer: GridFunction,
    pub constraint_residual: f64,
    /// Largest deviation of F_lambda(v) from level - lambda over the probe
    /// lambdas used for verification.
    pub identity_gap: f64,
}

fn constraint_value(spec: &ProblemSpec, u: &GridFunction) -> f64 {
    let mesh = &spec.mesh;
    let mut acc = 0.0;
    for (ei, e) in mesh.elems.iter().enumerate() {
        for qp in 0..mesh.qp_weight.len() {
            acc += e.measure
                * mesh.qp_weight[qp]
                * spec.k.at_qp(ei, qp)
                * u.at_qp(ei, qp).abs().powf(spec.q + 1.0);
        }
    }
    acc / (spec.q + 1.0)
}

/// Rescale so the constraint integral equals one exactly.
fn rescale_to_constraint(spec: &ProblemSpec, u: GridFunction) -> GridFunction {
    let c = constraint_value(spec, &u);
    if !(c > 0.0) || !c.is_finite() {
        return u; // leave infeasible; the line search will reject it
    }
    let t = (1.0 / c).powf(1.0 / (spec.q + 1.0));
    u.scale(t)
}

/// Minimize (1/p) I[|grad v|^p] + (1/(sigma+1)) I[h |v|^{sigma+1}] subject to
/// (1/(q+1)) I[k |v|^{q+1}] = 1, by descent with exact rescaling after every
/// step. Returns the level and verifies the shifted-energy identity at three
/// probe lambdas.
pub fn compute_level(spec: &ProblemSpec, opts: &SolverOptions) -> Result<ConstrainedLevel> {
    compute_level_from(spec, None, opts)
}

pub fn compute_level_from(
    spec: &ProblemSpec,
    initial: Option<&GridFunction>,
    opts: &SolverOptions,
) -> Result<ConstrainedLevel> {
    if spec.sign != Sign::Minus {
        return Err(Error::InvalidSpec(
            "the constrained level belongs to the minus problem".into(),
        ));
    }
    let objective = |u: &GridFunction| {
        crate::operator::dirichlet_integral(u, spec.p) / spec.p
            + assemble_weighted(spec, u, spec.sigma + 1.0) / (spec.sigma + 1.0)
    };
    let raw_gradient = |u: &GridFunction| -> Vec<f64> {
        let mut g = plap_apply(u, spec.p, 0.0);
        let load = assemble_load(&spec.mesh, |ei, qp| {
            let uv = u.at_qp(ei, qp).max(0.0);
            spec.h.at_qp(ei, qp) * uv.powf(spec.sigma)
        });
        for (gi, li) in g.iter_mut().zip(&load) {
            *gi += li;
        }
        g
    };
    let constraint_gradient = |u: &GridFunction| -> Vec<f64> {
        assemble_load(&spec.mesh, |ei, qp| {
            let uv = u.at_qp(ei, qp).max(0.0);
            spec.k.at_qp(ei, qp) * uv.powf(spec.q)
        })
    };
    // reduced gradient: remove the component along the constraint normal
    let gradient = |u: &GridFunction| -> Vec<f64> {
        let g = raw_gradient(u);
        let cg = constraint_gradient(u);
        let denom = crate::linalg::dot(&cg, &cg);
        if denom == 0.0 {
            return g;
        }
        let mu = crate::linalg::dot(&g, &cg) / denom;
        g.iter().zip(&cg).map(|(a, b)| a - mu * b).collect()
    };

    let x0 = match initial {
        Some(g) => {
            g.require_dirichlet_zero("initial field")?;
            g.abs_nodal()
        }
        None => {
            let t = solve_torsion(&spec.mesh, spec.p, opts)?;
            t.scale(1.0 / t.sup_norm())
        }
    };
    let out = descend(
        rescale_to_constraint(spec, x0),
        &objective,
        &gradient,
        &|u| rescale_to_constraint(spec, u.abs_nodal()),
        &|_, g| sup_norm(g),
        opts,
        &mut |_| {},
    );
    let v = out.x;
    let level = objective(&v);
    let residual = (constraint_value(spec, &v) - 1.0).abs();

    let mut identity_gap = 0.0f64;
    for probe in [level + 0.5, level + 2.0, 2.0 * level + 1.0] {
        let f = energy_f(&v, &spec.with_lambda(probe))?;
        identity_gap = identity_gap.max((f - (level - probe)).abs());
    }
    if identity_gap > 1e-6 {
        return Err(Error::InvalidSpec(format!(
            "shifted-energy identity failed: gap {identity_gap:.3e}"
        )));
    }
    Ok(ConstrainedLevel {
        level,
        minimizer: v,
        constraint_residual: residual,
        identity_gap,
    })
}

fn assemble_weighted(spec: &ProblemSpec, u: &GridFunction, r: f64) -> f64 {
    let mesh = &spec.mesh;
    let mut acc = 0.0;
    for (ei, e) in mesh.elems.iter().enumerate() {
        for qp in 0..mesh.qp_weight.len() {
            acc += e.measure
                * mesh.qp_weight[qp]
                * spec.h.at_qp(ei, qp)
                * u.at_qp(ei, qp).abs().powf(r);
        }
    }
    acc
}

/// Minimize the minus-problem energy over fields dominating `obstacle`.
/// The projection clips nodewise, so the exit iterate satisfies the bound
/// exactly.
pub fn obstacle_minimize(
    spec: &ProblemSpec,
    obstacle: &GridFunction,
    opts: &SolverOptions,
) -> Result<MinimizeReport> {
    if spec.sign != Sign::Minus {
        return Err(Error::InvalidSpec(
            "the obstacle problem belongs to the minus problem".into(),
        ));
    }
    if !obstacle.is_dirichlet_zero() {
        return Err(Error::InvalidObstacle(
            "lower field must vanish on the boundary".into(),
        ));
    }
    if obstacle.min_value() < 0.0 {
        return Err(Error::InvalidObstacle("lower field must be nonnegative".into()));
    }
    let obs = obstacle.clone();
    let stationarity = {
        let obs = obs.clone();
        move |u: &GridFunction, g: &[f64]| -> f64 {
            let mesh = &u.mesh;
            let mut worst = 0.0f64;
            for (dof, &node) in mesh.interior.iter().enumerate() {
                let active = u.values[node] <= obs.values[node] + 1e-14 * (1.0 + obs.values[node]);
                let m = if active { (-g[dof]).max(0.0) } else { g[dof].abs() };
                worst = worst.max(m);
            }
            worst
        }
    };
    // the zero field is a critical point of the energy, so a vacuous
    // obstacle needs a start that has already left it
    let start = default_start(spec, opts)?.max_with(&obs);
    let out = descend(
        start,
        &|u| energy_f(u, spec).unwrap_or(f64::INFINITY),
        &|u| energy_gradient(spec, u),
        &|u| u.max_with(&obs),
        &stationarity,
        opts,
        &mut |_| {},
    );
    Ok(MinimizeReport {
        minimizer: out.x,
        f_value: out.f,
        grad_norm: out.crit,
        constraint_residual: None,
        steps: out.steps,
        converged: out.converged,
    })
}

/// Did the descent find an energy strictly below -tol_energy? Stagnation is
/// retried once with a wider budget, mirroring the plus-side predicate.
fn nontrivial_predicate(
    spec: &ProblemSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<(bool, bool)> {
    let run = minimize_energy(&spec.with_lambda(lambda), None, opts)?;
    if run.converged {
        return Ok((run.f_value < -opts.tol_energy, false));
    }
    let mut wide = opts.clone();
    wide.max_descent *= 4;
    let retry = minimize_energy(&spec.with_lambda(lambda), None, &wide)?;
    Ok((retry.f_value < -opts.tol_energy, !retry.converged))
}

const BRACKET_REL_WIDTH: f64 = 1e-3;

/// Bisection on the nontriviality predicate over (0, level]; the level from
/// the constrained problem is the guaranteed upper bound.
pub fn estimate_lambda_star_minus(
    spec: &ProblemSpec,
    level: f64,
    opts: &SolverOptions,
) -> Result<LambdaStarEstimate> {
    if !(level > 0.0) {
        return Err(Error::InvalidSpec(format!("level {level} must be positive")));
    }
    let mut history = Vec::new();
    let mut low_confidence = false;

    let (at_level, soft) = nontrivial_predicate(spec, level, opts)?;
    history.push((level, at_level));
    low_confidence |= soft;
    if !at_level {
        return Ok(LambdaStarEstimate {
            lower: level,
            upper: level,
            estimate: level,
            history,
            guaranteed_lo: None,
            guaranteed_hi: Some(level),
            low_confidence: true,
        });
    }
    let mut hi = level;
    let mut lo = 0.5 * level;
    let mut shrinks = 0;
    loop {
        let (nontrivial, soft) = nontrivial_predicate(spec, lo, opts)?;
        history.push((lo, nontrivial));
        low_confidence |= soft;
        if !nontrivial {
            break;
        }
        hi = lo;
        lo *= 0.5;
        shrinks += 1;
        if shrinks > 60 {
            low_confidence = true;
            break;
        }
    }
    while (hi - lo) / (0.5 * (hi + lo)) > BRACKET_REL_WIDTH {
        let mid = 0.5 * (lo + hi);
        let (nontrivial, soft) = nontrivial_predicate(spec, mid, opts)?;
        history.push((mid, nontrivial));
        low_confidence |= soft;
        if nontrivial {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LambdaStarEstimate {
        lower: lo,
        upper: hi,
        estimate: 0.5 * (lo + hi),
        history,
        guaranteed_lo: None,
        guaranteed_hi: Some(level),
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::operator::weak_residual;
    use crate::subsuper::golden_min;
    use crate::weight::WeightField;
    use approx::assert_relative_eq;

    fn s0_minus(mesh: &Arc<Mesh>, lambda: f64) -> ProblemSpec {
        let k = WeightField::constant(mesh, 1.0).unwrap();
        let h = WeightField::constant(mesh, 1.0).unwrap();
        ProblemSpec::new(mesh, 2.0, 0.5, 3.0, lambda, Sign::Minus, k, h).unwrap()
    }

    #[test]
    fn floor_matches_hand_value_and_scalar_oracle() {
        let m = Mesh::interval(0.0, 1.0, 32).unwrap();
        let spec = s0_minus(&m, 1.5);
        let fl = coercivity_floor(&spec);
        assert_relative_eq!(fl.c1, 1.0, epsilon = 1e-14);
        assert_relative_eq!(fl.c2, 0.25, epsilon = 1e-14);
        assert_relative_eq!(fl.argmin, 1.5f64.powf(0.4), epsilon = 1e-12);
        assert_relative_eq!(fl.value, -0.7971405, epsilon = 1e-6);
        let (_, oracle) = golden_min(|t| 0.25 * t.powi(4) - t.powf(1.5), 1e-6, 1e6);
        assert_relative_eq!(fl.value, oracle, max_relative = 1e-9);
    }

    #[test]
    fn floor_limits() {
        let m = Mesh::interval(0.0, 1.0, 16).unwrap();
        let tiny = coercivity_floor(&s0_minus(&m, 1e-9));
        assert!(tiny.value < 0.0 && tiny.value > -1e-12);
        // doubling h raises (un-negates) the floor
        let k = WeightField::constant(&m, 1.0).unwrap();
        let h2 = WeightField::constant(&m, 2.0).unwrap();
        let spec2 = ProblemSpec::new(&m, 2.0, 0.5, 3.0, 1.5, Sign::Minus, k, h2).unwrap();
        assert!(coercivity_floor(&spec2).value > coercivity_floor(&s0_minus(&m, 1.5)).value);
    }

    #[test]
    fn tiny_lambda_minimizer_is_trivial() {
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let spec = s0_minus(&m, 0.01);
        let opts = SolverOptions::for_mesh(&m);
        let run = minimize_energy(&spec, None, &opts).unwrap();
        assert!(run.converged);
        assert!(run.f_value <= 0.0);
        assert!(run.f_value > -1e-6, "f = {}", run.f_value);
        assert!(run.minimizer.sup_norm() < 1e-2);
    }

    #[test]
    fn descent_is_monotone_and_floored() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let opts = SolverOptions::for_mesh(&m);
        for lambda in [0.5, 2.0, 8.0] {
            let spec = s0_minus(&m, lambda);
            let floor = coercivity_floor_discrete(&spec).value;
            let mut trace = Vec::new();
            let run =
                minimize_energy_observed(&spec, None, &opts, &mut |f| trace.push(f)).unwrap();
            assert!(run.converged);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0], "energy increased along accepted steps");
            }
            for f in &trace {
                assert!(*f >= floor - 1e-9, "f {} dipped under floor {floor}", f);
            }
        }
    }

    #[test]
    fn restart_is_idempotent() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let spec = s0_minus(&m, 6.0);
        let opts = SolverOptions::for_mesh(&m);
        let first = minimize_energy(&spec, None, &opts).unwrap();
        let second = minimize_energy(&spec, Some(&first.minimizer), &opts).unwrap();
        assert!(second.steps <= 5, "restart took {} steps", second.steps);
        assert!((second.f_value - first.f_value).abs() <= 1e-10);
    }

    #[test]
    fn constrained_level_identity_and_feasibility() {
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let spec = s0_minus(&m, 1.0);
        let opts = SolverOptions::for_mesh(&m);
        let lv = compute_level(&spec, &opts).unwrap();
        assert!(lv.level > 0.0);
        assert!(lv.constraint_residual <= 1e-10);
        assert!(lv.identity_gap <= 1e-6);
        // spot check: F at level+2 equals -2
        let f = energy_f(&lv.minimizer, &spec.with_lambda(lv.level + 2.0)).unwrap();
        assert_relative_eq!(f, -2.0, epsilon = 1e-6);
    }

    #[test]
    fn constrained_level_is_stable_across_meshes_and_starts() {
        let mut levels = Vec::new();
        for n in [128usize, 256] {
            let m = Mesh::interval(0.0, 1.0, n).unwrap();
            let spec = s0_minus(&m, 1.0);
            let opts = SolverOptions::for_mesh(&m);
            levels.push(compute_level(&spec, &opts).unwrap().level);
            let bump =
                GridFunction::from_fn(&m, |x, _| (std::f64::consts::PI * x).sin()).zero_boundary();
            levels.push(
                compute_level_from(&spec, Some(&bump), &opts)
                    .unwrap()
                    .level,
            );
        }
        let base = levels[0];
        for l in &levels {
            assert!(
                (l - base).abs() / base < 5e-3,
                "levels scattered: {levels:?}"
            );
        }
    }

    #[test]
    fn nontrivial_minimizer_past_the_level() {
        let m = Mesh::interval(0.0, 1.0, 128).unwrap();
        let opts = SolverOptions::for_mesh(&m);
        let base = s0_minus(&m, 1.0);
        let lv = compute_level(&base, &opts).unwrap();
        for lambda in [lv.level + 1.0, 2.0 * lv.level] {
            let spec = base.with_lambda(lambda);
            let run = minimize_energy(&spec, None, &opts).unwrap();
            assert!(run.converged);
            assert!(run.f_value < 0.0);
            assert!(run.minimizer.interior_values().iter().all(|&v| v > 0.0));
            let res = weak_residual(&run.minimizer, &spec).unwrap();
            assert!(sup_norm(&res) <= opts.tol_grad * 1.01);
        }
    }

    #[test]
    fn obstacle_reduces_to_plain_descent_when_vacuous() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let spec = s0_minus(&m, 5.0);
        let opts = SolverOptions::for_mesh(&m);
        let plain = minimize_energy(&spec, None, &opts).unwrap();
        let zero = GridFunction::zeros(&m);
        let obst = obstacle_minimize(&spec, &zero, &opts).unwrap();
        assert!((obst.f_value - plain.f_value).abs() <= 1e-7,
            "plain {} vs obstacle {}", plain.f_value, obst.f_value);
    }

    #[test]
    fn obstacle_constraints_hold_exactly() {
        let m = Mesh::interval(0.0, 1.0, 64).unwrap();
        let opts = SolverOptions::for_mesh(&m);
        let mu_spec = s0_minus(&m, 4.0);
        let u_mu = minimize_energy(&mu_spec, None, &opts).unwrap().minimizer;
        let spec = s0_minus(&m, 6.0);
        let run = obstacle_minimize(&spec, &u_mu, &opts).unwrap();
        // feasible start means the value can only improve on the obstacle's
        assert!(run.f_value <= energy_f(&u_mu, &spec).unwrap());
        for (v, o) in run.minimizer.values.iter().zip(&u_mu.values) {
            assert!(v >= o, "obstacle violated");
        }
        // infeasible lower field: nonzero boundary values
        let bad = GridFunction::constant(&m, 0.1);
        assert!(matches!(
            obstacle_minimize(&spec, &bad, &opts),
            Err(Error::InvalidObstacle(_))
        ));
    }

    #[test]
    fn minus_estimate_sits_under_the_level() {
        let m = Mesh::interval(0.0, 1.0, 96).unwrap();
        let spec = s0_minus(&m, 1.0);
        let opts = SolverOptions::for_mesh(&m);
        let lv = compute_level(&spec, &opts).unwrap();
        let est = estimate_lambda_star_minus(&spec, lv.level, &opts).unwrap();
        assert!(est.estimate <= lv.level);
        assert!(est.lower <= est.estimate && est.estimate <= est.upper);
        // predicate is monotone over the evaluation history
        let mut trues: Vec<f64> = Vec::new();
        let mut falses: Vec<f64> = Vec::new();
        for (l, b) in &est.history {
            if *b {
                trues.push(*l);
            } else {
                falses.push(*l);
            }
        }
        let min_true = trues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_false = falses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(max_false < min_true);

        // far below the threshold the minimizer is trivial
        let below = minimize_energy(&spec.with_lambda(0.5 * est.estimate), None, &opts).unwrap();
        assert!(below.f_value >= -opts.tol_energy);
    }
}
