//! `mechkit`: solve, verify, compare and converge from JSON files.
//!
//! Exit codes: 0 success, 1 a verification, ordering or usc check failed
//! (or the LP broke down), 2 enumeration cap exceeded, 3 I/O error,
//! 4 malformed or unsupported input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mechkit::convergence::{
    converge, infinite_expectation_demo, monotone_limit_check, wrong_way_demo, ConvergeOptions, HeavyTailOptions,
};
use mechkit::io::{self, Instance, InstanceOptions};
use mechkit::mechanism::{verify_ic_outcomes, verify_ir_outcomes, verify_npt_outcomes};
use mechkit::numeric::set_float_tolerance;
use mechkit::solver::{self, DEFAULT_CAP};
use mechkit::{
    random, AllocationKind, AllocationSet, Mechanism, MonotoneMode, NumericMode, Rational, Scalar, SolveClass,
    StandardKind,
};

#[derive(Parser, Debug)]
#[command(name = "mechkit", version, about = "Revenue-maximizing menus over compact allocation sets")]
struct Cli {
    /// Exact rational arithmetic. Overrides MECHKIT_NUMERIC and the instance options.
    #[arg(long, global = true)]
    exact: bool,
    /// Numeric mode when --exact is absent: exact or float.
    #[arg(long, global = true, env = "MECHKIT_NUMERIC")]
    numeric: Option<NumericMode>,
    /// Float comparison tolerance (default 1e-9).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for grid checks, enumeration and sequence evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal revenue and a witness menu for one mechanism class.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "rev")]
        class: SolveClass,
        /// Largest number of assignments the deterministic search may enumerate.
        #[arg(long)]
        cap: Option<u128>,
    },
    /// IC/IR/NPT check of a menu, or of an explicit assignment when the file has one.
    Verify {
        mechanism: PathBuf,
        instance: PathBuf,
        /// JSON array of probe points (default: the verification grid of the support).
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Rev, DRev, SRev, BRev and the monotone upper bounds as one CSV row.
    Compare {
        instance: PathBuf,
        #[arg(long)]
        cap: Option<u128>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Pointwise limit of a menu family and the revenue usc comparison.
    Converge {
        /// Family file; omit with --infinite-expectation.
        family: Option<PathBuf>,
        instance: Option<PathBuf>,
        #[arg(long)]
        n_max: Option<usize>,
        /// JSON array of probe points (default: a box around the support).
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Revenue sequence as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Escaping-price family on the heavy-tailed single-good valuation.
        #[arg(long)]
        infinite_expectation: bool,
    },
    /// Built-in experiments.
    Demo {
        which: Demo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trials for the randomized demos.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Demo {
    /// Posted prices on P[X >= t] = 1/(t+1) and the escaping-price family.
    HeavyTail,
    /// Payment monotonicity lost under a cheapest-offer tie rule.
    WrongWay,
    /// Random convergent affine families: usc slack per trial.
    Usc,
    /// Random chain families: payment monotonicity and supermodularity of limits.
    Monotone,
}

#[derive(Debug)]
enum Failure {
    Check(String),
    Core(mechkit::Error),
    Io(PathBuf, std::io::Error),
    Input(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Core(e) => match e {
                mechkit::Error::CapExceeded { .. } => 2,
                mechkit::Error::Lp(_) | mechkit::Error::NoFeasibleGradient(_) | mechkit::Error::NoCoordinatewiseMax(_) => 1,
                _ => 4,
            },
            Failure::Io(..) => 3,
            Failure::Input(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Check(m) | Failure::Input(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<mechkit::Error> for Failure {
    fn from(e: mechkit::Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn read_json(path: &Path) -> Outcome<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn emit(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn read_grid<S: Scalar>(path: &Path) -> Outcome<Vec<Vec<S>>> {
    let v = read_json(path)?;
    let points = v.get("grid").unwrap_or(&v);
    Ok(io::vectors(points)?)
}

/// Numeric settings: --exact, then MECHKIT_NUMERIC (or --numeric), then the
/// instance options, then float.
fn mode_for(cli: &Cli, opts: &InstanceOptions) -> NumericMode {
    if cli.exact {
        return NumericMode::Exact;
    }
    cli.numeric.or(opts.numeric).unwrap_or(NumericMode::Float)
}

fn apply_tolerance(cli: &Cli, opts: &InstanceOptions) -> Outcome {
    let tol = cli.tol.or(opts.tol).unwrap_or(1e-9);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Failure::Input("--tol must be a nonnegative number".into()));
    }
    set_float_tolerance(tol);
    Ok(())
}

/// Runs `body` with the scalar type chosen by the numeric mode.
macro_rules! dispatch {
    ($mode:expr, $f:ident ( $($arg:expr),* )) => {
        match $mode {
            NumericMode::Exact => $f::<Rational>($($arg),*),
            NumericMode::Float => $f::<f64>($($arg),*),
        }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("mechkit: {e}");
            return ExitCode::from(4);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mechkit: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Solve { instance, class, cap } => {
            let raw = read_json(instance)?;
            let opts = io::options_from_json(&raw)?;
            apply_tolerance(cli, &opts)?;
            let cap = cap.or(opts.cap).unwrap_or(DEFAULT_CAP);
            dispatch!(mode_for(cli, &opts), cmd_solve(&raw, *class, cap))
        }
        Command::Verify { mechanism, instance, grid } => {
            let raw = read_json(instance)?;
            let mech = read_json(mechanism)?;
            let opts = io::options_from_json(&raw)?;
            apply_tolerance(cli, &opts)?;
            dispatch!(mode_for(cli, &opts), cmd_verify(&mech, &raw, grid.as_deref()))
        }
        Command::Compare { instance, cap, csv } => {
            let raw = read_json(instance)?;
            let opts = io::options_from_json(&raw)?;
            apply_tolerance(cli, &opts)?;
            let cap = cap.or(opts.cap).unwrap_or(DEFAULT_CAP);
            dispatch!(mode_for(cli, &opts), cmd_compare(&raw, cap, csv.as_deref()))
        }
        Command::Converge {
            family,
            instance,
            n_max,
            grid,
            csv,
            infinite_expectation,
        } => {
            if *infinite_expectation {
                apply_tolerance(cli, &InstanceOptions::default())?;
                let mode = mode_for(cli, &InstanceOptions::default());
                return dispatch!(mode, cmd_heavy_tail(*n_max, csv.as_deref()));
            }
            let (Some(family), Some(instance)) = (family, instance) else {
                return Err(Failure::Input("converge needs a family file and an instance file".into()));
            };
            let fam = read_json(family)?;
            let raw = read_json(instance)?;
            let opts = io::options_from_json(&raw)?;
            apply_tolerance(cli, &opts)?;
            let n_max = n_max.or(opts.n_max).unwrap_or(200);
            dispatch!(mode_for(cli, &opts), cmd_converge(&fam, &raw, n_max, grid.as_deref(), csv.as_deref()))
        }
        Command::Demo {
            which,
            seed,
            trials,
            n_max,
            csv,
        } => {
            apply_tolerance(cli, &InstanceOptions::default())?;
            let mode = mode_for(cli, &InstanceOptions::default());
            match which {
                Demo::HeavyTail => dispatch!(mode, cmd_heavy_tail(*n_max, csv.as_deref())),
                Demo::WrongWay => dispatch!(mode, cmd_wrong_way()),
                Demo::Usc => dispatch!(mode, cmd_usc_demo(*seed, *trials, n_max.unwrap_or(200), csv.as_deref())),
                Demo::Monotone => dispatch!(mode, cmd_monotone_demo(*seed, *trials, n_max.unwrap_or(80))),
            }
        }
    }
}

fn load_instance<S: Scalar>(raw: &Value) -> Outcome<Instance<S>> {
    Ok(io::instance_from_json(raw)?)
}

fn cmd_solve<S: Scalar>(raw: &Value, class: SolveClass, cap: u128) -> Outcome {
    let inst = load_instance::<S>(raw)?;
    // each class runs on its own version of Γ: lotteries for the LP classes,
    // pure allocations for the deterministic search
    let gamma = match class {
        SolveClass::Rev | SolveClass::Mono | SolveClass::Amono if inst.gamma.kind() == AllocationKind::Finite => {
            Arc::new(inst.gamma.convex_hull())
        }
        SolveClass::Drev => deterministic_set(&inst.gamma)?,
        _ => inst.gamma.clone(),
    };
    let result = solver::solve(class, &gamma, &inst.distribution, cap)?;
    emit(&io::solve_result_to_json(&result, &inst.distribution));
    Ok(())
}

fn cmd_verify<S: Scalar>(mech: &Value, raw: &Value, grid: Option<&Path>) -> Outcome {
    let inst = load_instance::<S>(raw)?;
    let file = io::mechanism_from_json(mech, Some(&inst.gamma))?;
    let (report, revenue, points) = match file.outcomes() {
        Some(outcomes) => {
            let report = verify_ic_outcomes(&outcomes, &file.raw_items)
                .merge(verify_ir_outcomes(&outcomes))
                .merge(verify_npt_outcomes(&outcomes, &file.raw_items));
            let dist = &inst.distribution;
            let revenue = dist
                .support()
                .iter()
                .zip(dist.probs())
                .map(|(x, p)| {
                    outcomes
                        .iter()
                        .find(|o| &o.point == x)
                        .map(|o| o.payment.clone() * p.clone())
                        .ok_or_else(|| Failure::Input("assignment does not cover the support".into()))
                })
                .collect::<Outcome<Vec<S>>>()?;
            (report, S::sum_all(revenue), outcomes.len())
        }
        None => {
            let points = match grid {
                Some(p) => read_grid::<S>(p)?,
                None => inst.grid.clone().unwrap_or_else(|| solver::verification_points(&inst.distribution)),
            };
            let m = Mechanism::new(file.menu.clone());
            (m.verify_all(&points), m.revenue(&inst.distribution), points.len())
        }
    };
    let mut out = io::report_to_json(&report);
    out["revenue"] = revenue.to_json();
    out["points_checked"] = json!(points);
    emit(&out);
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} violation(s)", report.violations.len())))
    }
}

/// The deterministic counterpart of Γ: cube → its vertices, unit demand →
/// unit vectors, other polytopes → their vertex set.
fn deterministic_set<S: Scalar>(gamma: &Arc<AllocationSet<S>>) -> Outcome<Arc<AllocationSet<S>>> {
    let k = gamma.dim();
    let det = match gamma.standard_kind() {
        Some(StandardKind::Cube) => AllocationSet::standard(StandardKind::CubeVertices, k)?,
        Some(StandardKind::UnitDemand) => AllocationSet::standard(StandardKind::UnitDemandDet, k)?,
        Some(StandardKind::SimplexEq) => AllocationSet::standard(StandardKind::SimplexVertices, k)?,
        _ if gamma.kind() == AllocationKind::Finite => return Ok(gamma.clone()),
        _ => AllocationSet::finite(k, gamma.vertices().to_vec())?,
    };
    Ok(Arc::new(det))
}

fn cmd_compare<S: Scalar>(raw: &Value, cap: u128, csv: Option<&Path>) -> Outcome {
    let inst = load_instance::<S>(raw)?;
    let dist = &inst.distribution;
    let hull = Arc::new(inst.gamma.convex_hull());
    let det = deterministic_set(&inst.gamma)?;
    let rev = solver::solve_rev(&hull, dist)?.optimal_revenue;
    let drev = solver::solve_deterministic(&det, dist, cap)?.optimal_revenue;
    // posted prices need the 0/1 allocations; NA otherwise
    let posted = |r: mechkit::Result<solver::SolveResult<S>>| -> Outcome<Option<S>> {
        match r {
            Ok(r) => Ok(Some(r.optimal_revenue)),
            Err(mechkit::Error::Unsupported(_)) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let srev = posted(solver::solve_srev(&inst.gamma, dist))?;
    let brev = posted(solver::solve_brev(&inst.gamma, dist))?;
    let mon = solver::solve_monotone(&hull, dist, MonotoneMode::Payment, cap)?.optimal_revenue;
    let amon = solver::solve_monotone(&hull, dist, MonotoneMode::Allocation, cap)?.optimal_revenue;

    let within = |a: &S, b: &S| mechkit::numeric::approx_le(a, b);
    let mut broken = Vec::new();
    for (name, v) in [("DRev", Some(&drev)), ("SRev", srev.as_ref()), ("BRev", brev.as_ref()), ("MonRev_UB", Some(&mon)), ("AMonRev_UB", Some(&amon))] {
        if let Some(v) = v {
            if !within(v, &rev) {
                broken.push(format!("{name} = {v} exceeds Rev = {rev}"));
            }
        }
    }
    if broken.is_empty() {
        let mut text = String::from("Rev,DRev,SRev,BRev,MonRev_UB,AMonRev_UB\n");
        let cell = |v: Option<&S>| v.map_or("NA".to_string(), |v| v.to_string());
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            rev,
            drev,
            cell(srev.as_ref()),
            cell(brev.as_ref()),
            mon,
            amon
        );
        print!("{text}");
        if let Some(path) = csv {
            write_file(path, &text)?;
        }
        Ok(())
    } else {
        Err(Failure::Check(format!("revenue ordering violated: {}", broken.join("; "))))
    }
}

fn revenue_csv<S: Scalar>(revenues: &[S], limit: Option<&S>) -> String {
    let mut text = String::from("n,revenue\n");
    for (i, r) in revenues.iter().enumerate() {
        let _ = writeln!(text, "{},{}", i + 1, r);
    }
    if let Some(l) = limit {
        let _ = writeln!(text, "limit,{l}");
    }
    text
}

fn cmd_converge<S: Scalar>(fam: &Value, raw: &Value, n_max: usize, grid: Option<&Path>, csv: Option<&Path>) -> Outcome {
    let inst = load_instance::<S>(raw)?;
    let seq = io::family_from_json(fam, &inst.gamma)?;
    let grid = match grid {
        Some(p) => Some(read_grid::<S>(p)?),
        None => inst.grid.clone(),
    };
    let opts = ConvergeOptions {
        n_max,
        grid,
        ..ConvergeOptions::default()
    };
    let report = converge(&seq, &inst.distribution, &opts)?;
    emit(&io::convergence_to_json(&report));
    if let Some(path) = csv {
        write_file(path, &revenue_csv(&report.revenue_sequence, report.limit_revenue.as_ref()))?;
    }
    match report.usc_holds {
        Some(false) => Err(Failure::Check(format!(
            "limit revenue falls short of the limsup by {}",
            report.usc_slack.map(|s| (-s).to_string()).unwrap_or_default()
        ))),
        _ => Ok(()),
    }
}

fn cmd_heavy_tail<S: Scalar>(n_max: Option<usize>, csv: Option<&Path>) -> Outcome {
    let mut opts = HeavyTailOptions::default();
    if let Some(n) = n_max {
        opts.n_max = n;
    }
    let report = infinite_expectation_demo::<S>(&opts)?;
    emit(&io::heavy_tail_to_json(&report));
    if let Some(path) = csv {
        write_file(path, &revenue_csv(&report.escaping_revenues, Some(&report.limit_revenue)))?;
    }
    if report.prices.iter().all(|p| p.matches) && report.escaping_expected_ok {
        Ok(())
    } else {
        Err(Failure::Check("posted-price revenues differ from p/(p+1)".into()))
    }
}

fn cmd_wrong_way<S: Scalar>() -> Outcome {
    let report = wrong_way_demo::<S>()?;
    emit(&io::wrong_way_to_json(&report));
    Ok(())
}

fn cmd_usc_demo<S: Scalar>(seed: u64, trials: usize, n_max: usize, csv: Option<&Path>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut failures = 0;
    let mut unsettled = 0;
    while rows.len() < trials {
        let k = rng.gen_range(1..=2);
        let gamma = if rng.gen_bool(0.5) {
            Arc::new(AllocationSet::standard(StandardKind::Cube, k)?)
        } else {
            Arc::new(random::polytope::<S, _>(&mut rng, k)?)
        };
        let n = rng.gen_range(1..=8);
        let dist = random::valuation::<S, _>(&mut rng, k, n, 12);
        let size = rng.gen_range(1..=4);
        let seq = random::affine_sequence(&mut rng, &gamma, size)?;
        let opts = ConvergeOptions {
            n_max,
            ..ConvergeOptions::default()
        };
        let report = match converge(&seq, &dist, &opts) {
            Ok(r) if r.converged => r,
            Ok(_) | Err(mechkit::Error::NoFeasibleGradient(_)) => {
                unsettled += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let pointwise_ok = report.pointwise.iter().all(|p| p.holds);
        let holds = report.usc_holds == Some(true) && pointwise_ok;
        failures += (!holds) as usize;
        rows.push(json!({
            "trial": rows.len(),
            "k": k,
            "support_size": n,
            "limsup": report.limsup.to_json(),
            "limit_revenue": report.limit_revenue.as_ref().map(S::to_json),
            "usc_slack": report.usc_slack.as_ref().map(S::to_json),
            "usc_slack_f64": report.usc_slack.as_ref().map(S::to_f64),
            "pointwise_holds": pointwise_ok,
        }));
    }
    if let Some(path) = csv {
        let mut text = String::from("trial,usc_slack\n");
        for r in &rows {
            let _ = writeln!(text, "{},{}", r["trial"], r["usc_slack_f64"]);
        }
        write_file(path, &text)?;
    }
    emit(&json!({"seed": seed, "trials": rows, "unsettled_redrawn": unsettled, "failures": failures}));
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("usc failed in {failures} trial(s)")))
    }
}

fn cmd_monotone_demo<S: Scalar>(seed: u64, trials: usize, n_max: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Arc::new(AllocationSet::standard(StandardKind::Cube, 2)?);
    let mut rows = Vec::new();
    let mut failures = 0;
    for t in 0..trials {
        let n = rng.gen_range(1..=4);
        let dist = random::valuation::<S, _>(&mut rng, 2, n, 8);
        let size = rng.gen_range(1..=4);
        let seq = random::chain_sequence(&mut rng, &gamma, size)?;
        let grid = solver::verification_points(&dist);
        for mode in [MonotoneMode::Payment, MonotoneMode::Allocation] {
            let report = monotone_limit_check(&seq, &grid, mode, n_max, &S::tol())?;
            failures += (!report.holds) as usize;
            let mut row = io::monotone_limit_to_json(&report);
            row["trial"] = json!(t);
            row.as_object_mut().expect("object").remove("limit_mechanism");
            rows.push(row);
        }
    }
    emit(&json!({"seed": seed, "checks": rows, "failures": failures}));
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{failures} limit(s) lost the property")))
    }
}
