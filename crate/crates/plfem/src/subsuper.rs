//! Explicit sub/super-solution constructions for the plus problem and the
//! two parameter bounds they induce.
//!
//! With v the torsion field and w the solution of the pure-concave problem,
//! the candidate pair is
//!
//!   sub   = eps^{1/(p-1)} w          (any eps in (0,1)),
//!   super = M^{1/(p-1)} v            with M = C lambda^{(p-1)/(sigma-q)},
//!
//! where C balances the two reaction caps A = ||k||_inf ||v||_inf^q and
//! B = ||h||_inf ||v||_inf^sigma. The super-solution scale condition
//!
//!   1 >= lambda A M^{(q-p+1)/(p-1)} + B M^{(sigma-p+1)/(p-1)}
//!
//! holds exactly at lambda0 and for every smaller lambda, which is the
//! guaranteed-existence bound. The nonexistence bound lambda_prime is the
//! smallest L with inf_{t>0} m (L t^{q-p+1} + t^{sigma-p+1}) equal to the
//! first eigenvalue; both brackets enclose the extremal parameter.

use crate::eigen::first_eigenpair;
use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::operator::{plap_apply, reaction_load};
use crate::problem::{ProblemSpec, Sign, SolverOptions};
use crate::solve::{solve_concave, solve_torsion};

/// The scalar constants derived from a spec and its torsion field.
#[derive(Debug, Clone)]
pub struct Constants {
    /// ||k||_inf ||v||_inf^q — cap of the concave reaction on scaled torsion.
    pub a_cap: f64,
    /// ||h||_inf ||v||_inf^sigma — cap of the convex reaction.
    pub b_cap: f64,
    /// Coefficient of the optimal super-solution scale M(lambda).
    pub c_scale: f64,
    /// Largest lambda at which the scale condition is satisfiable.
    pub lambda0: f64,
    /// Value obtained with the alternative closing exponent
    /// -(sigma-p)/(sigma-p+1); recorded for comparison, not used by the
    /// constructions (NaN when sigma = p).
    pub lambda0_alt: f64,
    /// |condition - 1| at lambda0 with the optimal scale; a consistency check.
    pub equality_gap: f64,
    /// (q-p+1)/(p-1), the concave exponent of the scale condition.
    pub a_exp: f64,
    /// (sigma-p+1)/(p-1), the convex exponent.
    pub b_exp: f64,
    /// (p-1)/(sigma-q), the lambda-exponent of the optimal scale.
    pub scale_exp: f64,
}

impl Constants {
    /// Optimal super-solution scale M(lambda) = C lambda^{(p-1)/(sigma-q)}.
    pub fn super_scale(&self, lambda: f64) -> f64 {
        self.c_scale * lambda.powf(self.scale_exp)
    }

    /// The two terms of the scale condition at (lambda, M); their sum must
    /// not exceed 1 for M^{1/(p-1)} v to be a super-solution.
    pub fn condition_terms(&self, lambda: f64, m_scale: f64) -> (f64, f64) {
        (
            lambda * self.a_cap * m_scale.powf(self.a_exp),
            self.b_cap * m_scale.powf(self.b_exp),
        )
    }
}

/// Derive A, B, C and lambda0 from the torsion field, then re-verify the
/// defining equality numerically.
pub fn compute_constants(spec: &ProblemSpec, torsion: &GridFunction) -> Result<Constants> {
    spec.validate()?;
    let vsup = torsion.sup_norm();
    if vsup <= 0.0 {
        return Err(Error::InvalidField("torsion field is zero".into()));
    }
    let (p, q, sigma) = (spec.p, spec.q, spec.sigma);
    let a_cap = spec.k.sup * vsup.powf(q);
    let b_cap = spec.h.sup * vsup.powf(sigma);
    let a_exp = (q - p + 1.0) / (p - 1.0);
    let b_exp = (sigma - p + 1.0) / (p - 1.0);
    let scale_exp = (p - 1.0) / (sigma - q);
    let c_scale =
        (a_cap / b_cap * (p - 1.0 - q) / (sigma - p + 1.0)).powf(scale_exp);
    let level = a_cap * c_scale.powf(a_exp) + b_cap * c_scale.powf(b_exp);
    let lambda0 = level.powf(-(sigma - q) / (sigma - p + 1.0));
    let lambda0_alt = if (sigma - p).abs() < 1e-12 {
        f64::NAN
    } else {
        level.powf(-(sigma - p) / (sigma - p + 1.0))
    };
    let c = Constants {
        a_cap,
        b_cap,
        c_scale,
        lambda0,
        lambda0_alt,
        equality_gap: 0.0,
        a_exp,
        b_exp,
        scale_exp,
    };
    let (t1, t2) = c.condition_terms(lambda0, c.super_scale(lambda0));
    let gap = (t1 + t2 - 1.0).abs();
    if gap > 1e-6 {
        return Err(Error::InvalidSpec(format!(
            "scale-condition equality failed at lambda0: gap {gap:.3e}"
        )));
    }
    Ok(Constants {
        equality_gap: gap,
        ..c
    })
}

/// Minimize f over t > 0 by golden-section search in log t.
/// Assumes f is unimodal on the bracket, which holds for sums of a
/// decreasing and an increasing power.
pub fn golden_min(f: impl Fn(f64) -> f64, t_lo: f64, t_hi: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (t_lo.ln(), t_hi.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(d.exp());
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d.exp());
        }
    }
    let t = (0.5 * (a + b)).exp();
    (t, f(t))
}

/// inf over t > 0 of m (L t^{q-p+1} + t^{sigma-p+1}).
pub fn reaction_inf(m: f64, level: f64, p: f64, q: f64, sigma: f64) -> f64 {
    let alpha = q - p + 1.0;
    let beta = sigma - p + 1.0;
    let (_, fmin) = golden_min(
        |t| m * (level * t.powf(alpha) + t.powf(beta)),
        1e-8,
        1e8,
    );
    fmin
}

/// Smallest L such that inf_t m (L t^{q-p+1} + t^{sigma-p+1}) reaches
/// lambda1; above it the reaction beats the first eigenvalue at every
/// amplitude, which rules out solutions. Found by bisection on the inf.
pub fn lambda_prime(m: f64, lambda1: f64, p: f64, q: f64, sigma: f64) -> Result<f64> {
    if !(m > 0.0) || !(lambda1 > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "lambda_prime needs m > 0 and lambda1 > 0, got {m}, {lambda1}"
        )));
    }
    let inf_at = |level: f64| reaction_inf(m, level, p, q, sigma);
    let mut lo = 1.0;
    let mut hi = 1.0;
    while inf_at(hi) < lambda1 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidSpec("lambda_prime bracket blew up".into()));
        }
    }
    while inf_at(lo) >= lambda1 {
        lo *= 0.5;
        if lo < 1e-12 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inf_at(mid) < lambda1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// sub = eps^{1/(p-1)} w. The inequality holds for every eps in (0, 1).
pub fn build_subsolution(spec: &ProblemSpec, w: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidSpec(format!("eps = {eps} must be in (0,1)")));
    }
    Ok(w.scale(eps.powf(1.0 / (spec.p - 1.0))))
}

/// Super-solution candidate with its verification status.
#[derive(Debug, Clone)]
pub struct SuperSolution {
    pub field: GridFunction,
    pub m_scale: f64,
    /// True when the scale condition certifies the inequality
    /// (lambda <= lambda0). The field is returned either way.
    pub verified: bool,
}

/// super = M(lambda)^{1/(p-1)} v; certified only for lambda <= lambda0.
pub fn build_supersolution(
    spec: &ProblemSpec,
    torsion: &GridFunction,
    constants: &Constants,
) -> Result<SuperSolution> {
    let m_scale = constants.super_scale(spec.lambda);
    let (t1, t2) = constants.condition_terms(spec.lambda, m_scale);
    Ok(SuperSolution {
        field: torsion.scale(m_scale.powf(1.0 / (spec.p - 1.0))),
        m_scale,
        verified: t1 + t2 <= 1.0 + 1e-12,
    })
}

/// min over interior dofs of (reaction load - operator action); nonnegative
/// up to tolerance certifies the discrete sub-solution inequality.
pub fn subsolution_margin(spec: &ProblemSpec, sub: &GridFunction) -> f64 {
    let act = plap_apply(sub, spec.p, 0.0);
    let load = reaction_load(spec, sub);
    act.iter()
        .zip(&load)
        .map(|(a, b)| b - a)
        .fold(f64::INFINITY, f64::min)
}

/// min over interior dofs of (operator action - reaction load); nonnegative
/// up to tolerance certifies the discrete super-solution inequality.
pub fn supersolution_margin(spec: &ProblemSpec, sup: &GridFunction) -> f64 {
    let act = plap_apply(sup, spec.p, 0.0);
    let load = reaction_load(spec, sup);
    act.iter()
        .zip(&load)
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min)
}

/// Everything the constructions produce for one spec at one lambda.
#[derive(Debug, Clone)]
pub struct SubSuperBundle {
    pub constants: Constants,
    pub lambda_prime: f64,
    pub lambda1: f64,
    /// min(ess inf k, ess inf h).
    pub m_inf: f64,
    pub eps: f64,
    pub torsion: GridFunction,
    pub concave: GridFunction,
    pub sub: GridFunction,
    pub super_field: GridFunction,
    pub super_verified: bool,
    pub super_scale: f64,
}

impl SubSuperBundle {
    /// Solve the auxiliary fields, derive every constant, and construct an
    /// ordered sub/super pair (shrinking eps when needed).
    pub fn assemble(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SubSuperBundle> {
        if spec.sign != Sign::Plus {
            return Err(Error::InvalidSpec(
                "sub/super constructions apply to the plus problem".into(),
            ));
        }
        if !(spec.lambda > 0.0) {
            return Err(Error::InvalidSpec("need lambda > 0".into()));
        }
        let mut tight = opts.clone();
        tight.tol_newton = opts.tol_newton.min(1e-12);
        let torsion = solve_torsion(&spec.mesh, spec.p, &tight)?;
        let concave = solve_concave(spec.lambda, &spec.k, spec.q, spec.p, &tight, None)?;
        let constants = compute_constants(spec, &torsion)?;
        let m_inf = spec.weight_floor();
        let pair = first_eigenpair(&spec.mesh, spec.p, opts)?;
        let lp = lambda_prime(m_inf, pair.lambda1, spec.p, spec.q, spec.sigma)?;
        let sup = build_supersolution(spec, &torsion, &constants)?;

        let mut eps = 0.5;
        let mut sub = build_subsolution(spec, &concave, eps)?;
        let mut shrink = 0;
        while !sub.below(&sup.field, 0.0) && shrink < 1000 {
            eps *= 0.5;
            sub = build_subsolution(spec, &concave, eps)?;
            shrink += 1;
        }
        Ok(SubSuperBundle {
            constants,
            lambda_prime: lp,
            lambda1: pair.lambda1,
            m_inf,
            eps,
            torsion,
            concave,
            sub,
            super_field: sup.field,
            super_verified: sup.verified,
            super_scale: sup.m_scale,
        })
    }
}
