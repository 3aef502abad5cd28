//! Command-line front end: problem assembly from flags or a config file,
//! runs of the individual tools, CSV emission.
//!
//! Exit codes: 0 success, 2 nonconvergence, 3 invalid spec or usage.

use std::collections::HashMap;
use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use plfem::branch::{estimate_lambda_star_plus, monotone_iterate, sweep_minimal_branch, PointStatus};
use plfem::eigen::first_eigenpair;
use plfem::error::Error;
use plfem::field::GridFunction;
use plfem::mesh::Mesh;
use plfem::problem::{ProblemSpec, Sign, SolverOptions};
use plfem::subsuper::SubSuperBundle;
use plfem::varmin::{compute_level, estimate_lambda_star_minus, minimize_energy};
use plfem::weight::WeightField;

const EXIT_OK: u8 = 0;
const EXIT_RUNTIME: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "plfem", version, about = "Concave-convex p-Laplacian laboratory")]
struct Cli {
    /// Plain-text `key = value` defaults; flags override file entries.
    #[arg(long, global = true)]
    config: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct SpecArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// 1 for an interval, 2 for the unit square.
    #[arg(long)]
    dim: Option<usize>,
    /// Elements per direction.
    #[arg(long)]
    n: Option<usize>,
    /// Interval endpoints `a,b` (1-D only).
    #[arg(long)]
    extent: Option<String>,
    /// Weight family: const:c | sin:alpha | affine:c0,c1 | file:path
    #[arg(long = "weight-k")]
    weight_k: Option<String>,
    #[arg(long = "weight-h")]
    weight_h: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "tol-newton")]
    tol_newton: Option<f64>,
    #[arg(long = "max-outer")]
    max_outer: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the torsion problem (unit load) and dump the field.
    Torsion(SpecArgs),
    /// First eigenvalue and eigenfunction of the Dirichlet p-Laplacian.
    Eigen(SpecArgs),
    /// Constants and parameter bounds from the sub/super constructions.
    Bounds(SpecArgs),
    /// Monotone iteration for the plus problem at one lambda.
    SolvePlus(SpecArgs),
    /// Energy minimization for the minus problem at one lambda.
    SolveMinus(SpecArgs),
    /// Sweep the minimal branch over a lambda grid.
    Bifurcation {
        #[command(flatten)]
        spec: SpecArgs,
        /// Comma-separated lambda grid, e.g. `1,2,3`.
        #[arg(long)]
        lambdas: Option<String>,
        #[arg(long = "lambda-min")]
        lambda_min: Option<f64>,
        #[arg(long = "lambda-max")]
        lambda_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Bracket the extremal parameter of either sign.
    LambdaStar {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value = "plus")]
        sign: String,
    },
    /// Run the structural property suite; nonzero exit on any failure.
    Verify(SpecArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version through the error path with exit 0
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(EXIT_INVALID);
            }
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match &e {
                Error::Nonconvergence(_) | Error::DegenerateLinearization(_) => EXIT_NONCONVERGENCE,
                Error::Io(_) => EXIT_RUNTIME,
                _ => EXIT_INVALID,
            })
        }
    }
}

/// Fully resolved run configuration (file defaults merged under flags).
struct RunConfig {
    p: f64,
    q: f64,
    sigma: f64,
    lambda: f64,
    dim: usize,
    n: usize,
    extent: (f64, f64),
    weight_k: String,
    weight_h: String,
    seed: u64,
    opts_tol_newton: Option<f64>,
    opts_max_outer: Option<usize>,
    out: Option<String>,
}

fn parse_config_file(path: &str) -> Result<HashMap<String, String>, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("{path}:{}: expected `key = value`", lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn merge(args: &SpecArgs, config: Option<&str>) -> Result<RunConfig, Error> {
    let file = match config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let lookup = |key: &str| file.get(key).cloned();
    let parse_f64 = |key: &str| -> Result<Option<f64>, Error> {
        lookup(key)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("config key {key}: bad number `{s}`")))
            })
            .transpose()
    };
    let extent_str = args
        .extent
        .clone()
        .or_else(|| lookup("extent"))
        .unwrap_or_else(|| "0,1".into());
    let (a, b) = extent_str
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("extent `{extent_str}`: expected `a,b`")))?;
    let extent = (
        a.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("extent start `{a}`")))?,
        b.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("extent end `{b}`")))?,
    );
    Ok(RunConfig {
        p: args.p.or(parse_f64("p")?).unwrap_or(2.0),
        q: args.q.or(parse_f64("q")?).unwrap_or(0.5),
        sigma: args.sigma.or(parse_f64("sigma")?).unwrap_or(3.0),
        lambda: args.lambda.or(parse_f64("lambda")?).unwrap_or(1.0),
        dim: args
            .dim
            .or(lookup("dim").and_then(|s| s.parse().ok()))
            .unwrap_or(1),
        n: args
            .n
            .or(lookup("n").and_then(|s| s.parse().ok()))
            .unwrap_or(256),
        extent,
        weight_k: args
            .weight_k
            .clone()
            .or_else(|| lookup("weight-k"))
            .unwrap_or_else(|| "const:1".into()),
        weight_h: args
            .weight_h
            .clone()
            .or_else(|| lookup("weight-h"))
            .unwrap_or_else(|| "const:1".into()),
        seed: args
            .seed
            .or(lookup("seed").and_then(|s| s.parse().ok()))
            .unwrap_or(0),
        opts_tol_newton: args.tol_newton.or(parse_f64("tol-newton")?),
        opts_max_outer: args
            .max_outer
            .or(lookup("max-outer").and_then(|s| s.parse().ok())),
        out: args.out.clone(),
    })
}

fn parse_weight(mesh: &Arc<Mesh>, desc: &str) -> Result<WeightField, Error> {
    let (kind, rest) = desc
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("weight `{desc}`: expected kind:params")))?;
    match kind {
        "const" => {
            let c = rest
                .parse()
                .map_err(|_| Error::Parse(format!("weight constant `{rest}`")))?;
            WeightField::constant(mesh, c)
        }
        "sin" => {
            let a = rest
                .parse()
                .map_err(|_| Error::Parse(format!("sin amplitude `{rest}`")))?;
            WeightField::sin_bump(mesh, a)
        }
        "affine" => {
            let (c0, c1) = rest
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("affine weight `{rest}`: expected c0,c1")))?;
            WeightField::affine(
                mesh,
                c0.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("affine c0 `{c0}`")))?,
                c1.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("affine c1 `{c1}`")))?,
            )
        }
        "file" => {
            let f = std::fs::File::open(rest)?;
            WeightField::from_nodal_file(mesh, std::io::BufReader::new(f))
        }
        other => Err(Error::Parse(format!("unknown weight kind `{other}`"))),
    }
}

struct Setup {
    mesh: Arc<Mesh>,
    opts: SolverOptions,
    cfg: RunConfig,
}

impl Setup {
    fn new(args: &SpecArgs, config: Option<&str>) -> Result<Setup, Error> {
        let cfg = merge(args, config)?;
        let mesh = match cfg.dim {
            1 => Mesh::interval(cfg.extent.0, cfg.extent.1, cfg.n)?,
            2 => Mesh::unit_square(cfg.n)?,
            d => return Err(Error::InvalidMesh(format!("dimension {d} not supported"))),
        };
        let mut opts = SolverOptions::for_mesh(&mesh);
        if let Some(t) = cfg.opts_tol_newton {
            opts.tol_newton = t;
        }
        if let Some(m) = cfg.opts_max_outer {
            opts.max_outer = m;
        }
        opts.validate()?;
        Ok(Setup { mesh, opts, cfg })
    }

    fn spec(&self, sign: Sign) -> Result<ProblemSpec, Error> {
        let k = parse_weight(&self.mesh, &self.cfg.weight_k)?;
        let h = parse_weight(&self.mesh, &self.cfg.weight_h)?;
        let spec = ProblemSpec::new(
            &self.mesh,
            self.cfg.p,
            self.cfg.q,
            self.cfg.sigma,
            self.cfg.lambda,
            sign,
            k,
            h,
        )?;
        for w in spec.validate()? {
            eprintln!("warning: {w}");
        }
        Ok(spec)
    }

    fn writer(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.cfg.out {
            Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
            None => Box::new(std::io::stdout().lock()),
        })
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Torsion(args) => {
            let setup = Setup::new(args, config)?;
            let v = plfem::solve::solve_torsion(&setup.mesh, setup.cfg.p, &setup.opts)?;
            v.write_csv(&mut setup.writer()?)?;
            Ok(EXIT_OK)
        }
        Command::Eigen(args) => {
            let setup = Setup::new(args, config)?;
            let pair = first_eigenpair(&setup.mesh, setup.cfg.p, &setup.opts)?;
            let mut out = setup.writer()?;
            writeln!(out, "lambda1")?;
            writeln!(out, "{}", pair.lambda1)?;
            Ok(EXIT_OK)
        }
        Command::Bounds(args) => {
            let setup = Setup::new(args, config)?;
            let spec = setup.spec(Sign::Plus)?;
            let bundle = SubSuperBundle::assemble(&spec, &setup.opts)?;
            let c = &bundle.constants;
            let mut out = setup.writer()?;
            writeln!(out, "A,B,C,lambda0,lambda_prime,lambda1,m,lambda0_alt")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.a_cap,
                c.b_cap,
                c.c_scale,
                c.lambda0,
                bundle.lambda_prime,
                bundle.lambda1,
                bundle.m_inf,
                c.lambda0_alt
            )?;
            Ok(EXIT_OK)
        }
        Command::SolvePlus(args) => {
            let setup = Setup::new(args, config)?;
            let spec = setup.spec(Sign::Plus)?;
            let point = monotone_iterate(&spec, &setup.opts)?;
            let mut out = setup.writer()?;
            writeln!(out, "lambda,sup_norm,energy,iters,status")?;
            writeln!(
                out,
                "{},{},{},{},{}",
                point.lambda, point.sup_norm, point.energy, point.iterations, point.status
            )?;
            if let Some(u) = &point.solution {
                if let Some(path) = setup.cfg.out.as_ref() {
                    let field_path = format!("{path}.field.csv");
                    let mut f = std::io::BufWriter::new(std::fs::File::create(&field_path)?);
                    u.write_csv(&mut f)?;
                }
            }
            Ok(if point.status == PointStatus::Converged {
                EXIT_OK
            } else {
                EXIT_NONCONVERGENCE
            })
        }
        Command::SolveMinus(args) => {
            let setup = Setup::new(args, config)?;
            let spec = setup.spec(Sign::Minus)?;
            let report = minimize_energy(&spec, None, &setup.opts)?;
            let mut out = setup.writer()?;
            writeln!(out, "lambda,sup_norm,energy,steps,status")?;
            writeln!(
                out,
                "{},{},{},{},{}",
                spec.lambda,
                report.minimizer.sup_norm(),
                report.f_value,
                report.steps,
                if report.converged { "converged" } else { "stagnated" }
            )?;
            if let Some(path) = setup.cfg.out.as_ref() {
                let field_path = format!("{path}.field.csv");
                let mut f = std::io::BufWriter::new(std::fs::File::create(&field_path)?);
                report.minimizer.write_csv(&mut f)?;
            }
            Ok(if report.converged {
                EXIT_OK
            } else {
                EXIT_NONCONVERGENCE
            })
        }
        Command::Bifurcation {
            spec: args,
            lambdas,
            lambda_min,
            lambda_max,
            steps,
        } => {
            let setup = Setup::new(args, config)?;
            let spec = setup.spec(Sign::Plus)?;
            let mut grid: Vec<f64> = match (lambdas, lambda_min, lambda_max, steps) {
                (Some(list), _, _, _) => list
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::Parse(format!("lambda `{s}`")))
                    })
                    .collect::<Result<_, _>>()?,
                (None, Some(lo), Some(hi), Some(k)) if *k >= 2 => (0..*k)
                    .map(|i| lo + (hi - lo) * i as f64 / (*k - 1) as f64)
                    .collect(),
                _ => {
                    return Err(Error::InvalidSpec(
                        "need --lambdas or --lambda-min/--lambda-max/--steps".into(),
                    ))
                }
            };
            grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let points = sweep_minimal_branch(&spec, &grid, &setup.opts)?;
            let mut out = setup.writer()?;
            writeln!(out, "lambda,sup_norm,energy,iters,status")?;
            for p in &points {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    p.lambda, p.sup_norm, p.energy, p.iterations, p.status
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::LambdaStar { spec: args, sign } => {
            let setup = Setup::new(args, config)?;
            match sign.as_str() {
                "plus" => {
                    let spec = setup.spec(Sign::Plus)?;
                    let bundle = SubSuperBundle::assemble(&spec, &setup.opts)?;
                    let est = estimate_lambda_star_plus(
                        &spec,
                        bundle.constants.lambda0,
                        bundle.lambda_prime,
                        &setup.opts,
                    )?;
                    if est.low_confidence {
                        eprintln!("warning: low-confidence estimate (a predicate stagnated)");
                    }
                    let mut out = setup.writer()?;
                    writeln!(out, "sign,lambda0,lambda_prime,Lambda,lo,hi,estimate")?;
                    writeln!(
                        out,
                        "plus,{},{},,{},{},{}",
                        bundle.constants.lambda0,
                        bundle.lambda_prime,
                        est.lower,
                        est.upper,
                        est.estimate
                    )?;
                    Ok(EXIT_OK)
                }
                "minus" => {
                    let spec = setup.spec(Sign::Minus)?;
                    let lv = compute_level(&spec, &setup.opts)?;
                    let est = estimate_lambda_star_minus(&spec, lv.level, &setup.opts)?;
                    if est.low_confidence {
                        eprintln!("warning: low-confidence estimate (a predicate stagnated)");
                    }
                    let mut out = setup.writer()?;
                    writeln!(out, "sign,lambda0,lambda_prime,Lambda,lo,hi,estimate")?;
                    writeln!(
                        out,
                        "minus,,,{},{},{},{}",
                        lv.level, est.lower, est.upper, est.estimate
                    )?;
                    Ok(EXIT_OK)
                }
                other => Err(Error::InvalidSpec(format!("sign `{other}`"))),
            }
        }
        Command::Verify(args) => {
            let setup = Setup::new(args, config)?;
            run_verify(&setup)
        }
    }
}

/// Structural property suite; prints one line per check.
fn run_verify(setup: &Setup) -> Result<u8, Error> {
    use plfem::verify as vf;
    use rand::{Rng, SeedableRng};

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{}: {name} ({detail})", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let mesh = &setup.mesh;
    let opts = &setup.opts;
    let spec = setup.spec(Sign::Plus)?;

    // Picone remainder on seeded smooth positive pairs
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(setup.cfg.seed);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let coef: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let field = |base: f64, c: &[f64]| {
            GridFunction::from_fn(mesh, |x, y| {
                base + c[0] * (std::f64::consts::PI * x).sin()
                    + c[1] * (2.0 * std::f64::consts::PI * x).sin() / 2.0
                    + c[2] * (std::f64::consts::PI * (x + y)).cos() / 3.0
            })
        };
        let u = field(0.7, &coef[0..3]);
        let v = field(0.7, &coef[3..6]);
        let (min_r, _) = vf::picone_remainder(&u, &v, setup.cfg.p)?;
        worst = worst.min(min_r);
    }
    check("picone-pointwise", worst >= -1e-12, format!("min {worst:.3e}"));

    let v = plfem::solve::solve_torsion(mesh, setup.cfg.p, opts)?;
    let (min_prop, int_prop) = vf::picone_remainder(&v.scale(2.0), &v, setup.cfg.p)?;
    check(
        "picone-equality-case",
        min_prop.abs() <= 1e-12 && int_prop.abs() <= 1e-12,
        format!("min {min_prop:.3e} integral {int_prop:.3e}"),
    );

    // comparison principle on ordered loads
    let g1 = GridFunction::constant(mesh, 1.0);
    let g2 = GridFunction::constant(mesh, 2.0);
    let u1 = plfem::solve::solve_load(&g1, setup.cfg.p, opts, None)?;
    let u2 = plfem::solve::solve_load(&g2, setup.cfg.p, opts, None)?;
    check(
        "comparison-ordered-loads",
        vf::comparison_premise(&u1, &u2, setup.cfg.p) && vf::check_comparison(&u1, &u2, setup.cfg.p),
        "unit load vs doubled load".into(),
    );

    // sub/super construction at the spec lambda (certified range only)
    let bundle = SubSuperBundle::assemble(&spec, opts)?;
    let sub_margin = plfem::subsuper::subsolution_margin(&spec, &bundle.sub);
    check(
        "subsolution-inequality",
        sub_margin >= -1e-10,
        format!("margin {sub_margin:.3e}"),
    );
    if bundle.super_verified {
        let sup_margin = plfem::subsuper::supersolution_margin(&spec, &bundle.super_field);
        check(
            "supersolution-inequality",
            sup_margin >= -1e-10,
            format!("margin {sup_margin:.3e}"),
        );
        check(
            "sub-below-super",
            bundle.sub.below(&bundle.super_field, 0.0),
            format!("eps {}", bundle.eps),
        );
    } else {
        check(
            "supersolution-certified",
            false,
            format!(
                "lambda {} exceeds lambda0 {}",
                spec.lambda, bundle.constants.lambda0
            ),
        );
    }
    check(
        "bracket-ordering",
        bundle.constants.lambda0 <= bundle.lambda_prime,
        format!(
            "lambda0 {} lambda' {}",
            bundle.constants.lambda0, bundle.lambda_prime
        ),
    );

    // minimal-branch identities at the spec lambda
    let point = monotone_iterate(&spec, opts)?;
    match (&point.solution, point.status) {
        (Some(u), _) => {
            let report = vf::check_identities(u, &spec)?;
            check(
                "minimal-branch-identities",
                report.all_pass(),
                format!(
                    "E {:.3e} stability {:.3e} identity {:.3e} balance {:.3e}",
                    report.energy,
                    report.stability_slack,
                    report.identity_residual,
                    report.balance_slack
                ),
            );
            check(
                "monotone-chain",
                point.monotonicity_violation <= 1e-8,
                format!("worst relative decrease {:.3e}", point.monotonicity_violation),
            );
            check("interior-positivity", vf::interior_positive(u), String::new());
            let slope = vf::boundary_slope_check(u);
            check("boundary-slope", slope > 0.0, format!("min inward slope {slope:.3e}"));
        }
        (None, status) => {
            check(
                "minimal-branch-identities",
                false,
                format!("iteration did not converge: {status}"),
            );
        }
    }

    if failures == 0 {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_RUNTIME)
    }
}
