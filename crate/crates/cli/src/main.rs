//! `ymhd`: command-line driver for the field laboratory.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 I/O or structural
//! error, 3 numerical failure (failed invariant, stagnated flow, unconverged
//! gauge fixing).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ymhd_core::action::{action_total, densities};
use ymhd_core::blowup::{bubble_candidate, concentration_scan, scaling_identities};
use ymhd_core::checks::{run_checks, CheckSettings};
use ymhd_core::fields::{apply_gauge, coulomb_fix_abelian, coulomb_fix_descent, coulomb_residual, DescentOptions};
use ymhd_core::io::{read_snapshot, read_snapshot_header, write_grid_csv, write_snapshot, InitSpec, RunConfig};
use ymhd_core::lie::FiberPoint;
use ymhd_core::solver::{run_flow, FlowStatus};
use ymhd_core::{synthetic, Domain, FieldState, Group, YmhdError};

#[derive(Parser, Debug)]
#[command(name = "ymhd", version, about = "Discrete Yang-Mills-Higgs-Dirac field laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the invariant battery on seeded data.
    CheckInvariants {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured flow and write snapshots plus a trace CSV.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Initial snapshot; overrides `init.*`.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Concentration scan over snapshots matching a glob pattern.
    Scan {
        #[command(flatten)]
        common: Common,
        pattern: String,
    },
    /// Rescale a snapshot around `rescale.center` by `rescale.factor`.
    Rescale {
        #[command(flatten)]
        common: Common,
        snapshot: PathBuf,
    },
    /// Put a snapshot into Coulomb gauge.
    GaugeFix {
        #[command(flatten)]
        common: Common,
        snapshot: PathBuf,
    },
    /// Write per-node density grids of a snapshot.
    Plotdata {
        #[command(flatten)]
        common: Common,
        snapshot: PathBuf,
    },
}

/// Errors with their exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<YmhdError> for Failure {
    fn from(e: YmhdError) -> Self {
        let code = match &e {
            YmhdError::Config { .. } | YmhdError::Unsupported(_) | YmhdError::Domain(_) => 1,
            YmhdError::Io(_) | YmhdError::Structural(_) | YmhdError::Format { .. } => 2,
            YmhdError::Convergence { .. } => 3,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 2, msg: e.to_string() }
    }
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

type Outcome = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = init_threads() {
        eprintln!("error: {}", f.msg);
        return ExitCode::from(f.code);
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn init_threads() -> std::result::Result<(), Failure> {
    let Ok(v) = std::env::var("YMHD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| fail(1, format!("YMHD_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| fail(1, format!("cannot size the thread pool: {e}")))
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::CheckInvariants { common } => check_invariants(&setup(&common)?),
        Command::Flow { common, init } => flow(&setup(&common)?, init.as_deref()),
        Command::Scan { common, pattern } => scan(&setup(&common)?, &pattern),
        Command::Rescale { common, snapshot } => rescale(&setup(&common)?, &snapshot),
        Command::GaugeFix { common, snapshot } => gauge_fix(&setup(&common)?, &snapshot),
        Command::Plotdata { common, snapshot } => plotdata(&setup(&common)?, &snapshot),
    }
}

fn setup(common: &Common) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| fail(1, format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::parse(&text).map_err(|e| fail(1, format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg)
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

/// Reads a snapshot and applies the configured algebra normalization.
fn load(cfg: &RunConfig, path: &Path) -> std::result::Result<FieldState, Failure> {
    let mut s = read_snapshot(path)?;
    s.model.inner_scale = cfg.inner_scale;
    Ok(s)
}

fn check_invariants(cfg: &RunConfig) -> Outcome {
    let report = run_checks(&CheckSettings {
        seed: cfg.seed,
        gamma: cfg.gamma,
    });
    print!("{}", report.to_table());
    fs::write(out(cfg, "checks.csv"), report.to_csv())?;
    let failed = report.failures().len();
    println!("{} checks, {} failed", report.results.len(), failed);
    Ok(if failed == 0 { 0 } else { 3 })
}

fn initial_state(cfg: &RunConfig, init: Option<&Path>) -> std::result::Result<FieldState, Failure> {
    if let Some(p) = init {
        return load(cfg, p);
    }
    let dom = cfg.domain()?;
    let model = cfg.model();
    let s = match &cfg.init {
        InitSpec::Zero => FieldState::vacuum(dom, model, &FiberPoint::new([0.0, 0.0, 1.0].into())?),
        InitSpec::Constant { point } => {
            let y = FiberPoint::normalized([point[0], point[1], point[2]].into())?;
            FieldState::vacuum(dom, model, &y)
        }
        InitSpec::PerturbedConstant { amplitude } => synthetic::perturbed_constant(&dom, model, *amplitude),
        InitSpec::RandomSmooth { amplitude } => {
            synthetic::random_state(&dom, model, cfg.seed, *amplitude, *amplitude)?
        }
        InitSpec::Bubble { center, lambda } => {
            let mut s = synthetic::shrinking_bubbles(&dom, model, *center, &[*lambda]).remove(0);
            s.model = model;
            s
        }
        InitSpec::Snapshot(p) => load(cfg, p)?,
    };
    Ok(s)
}

fn flow(cfg: &RunConfig, init: Option<&Path>) -> Outcome {
    let s0 = initial_state(cfg, init)?;
    let fc = cfg.flow_config();
    let outcome = run_flow(&s0, &fc)?;
    fs::write(out(cfg, "trace.csv"), outcome.trace.to_csv())?;
    for (step, s) in &outcome.snapshots {
        write_snapshot(&out(cfg, &format!("snapshot_{step:06}.ymhd")), s, cfg.output_mode)?;
    }
    let last = outcome.trace.last().expect("trace has at least the initial row");
    println!(
        "{} {:?} after {} steps: total {:.6e}, residuals ({:.3e}, {:.3e}, {:.3e})",
        fc.mode.name(),
        outcome.trace.status,
        last.step,
        last.action.total,
        last.residuals.0,
        last.residuals.1,
        last.residuals.2
    );
    Ok(match outcome.trace.status {
        FlowStatus::Converged => 0,
        FlowStatus::MaxSteps => {
            eprintln!("warning: step budget exhausted before the residual tolerance was met");
            0
        }
        FlowStatus::Stagnated => {
            eprintln!("error: line search stagnated; trace written");
            3
        }
    })
}

fn scan(cfg: &RunConfig, pattern: &str) -> Outcome {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| fail(1, format!("bad glob pattern '{pattern}': {e}")))?
        .filter_map(|p| p.ok())
        .collect();
    paths.sort();
    if paths.len() < 2 {
        return Err(fail(2, format!("scan needs at least 2 snapshots, '{pattern}' matched {}", paths.len())));
    }
    let first = read_snapshot_header(&paths[0])?;
    for p in &paths[1..] {
        let h = read_snapshot_header(p)?;
        if h != first {
            return Err(fail(
                2,
                format!(
                    "snapshot {} has header ({}, {}, {}) but {} has ({}, {}, {})",
                    p.display(),
                    h.n_side,
                    h.length,
                    h.group.name(),
                    paths[0].display(),
                    first.n_side,
                    first.length,
                    first.group.name()
                ),
            ));
        }
    }
    let states = paths.iter().map(|p| load(cfg, p)).collect::<std::result::Result<Vec<_>, _>>()?;
    let report = concentration_scan(&states, &cfg.scan)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    fs::write(out(cfg, "scan.csv"), csv)?;
    let summary = report.summary();
    fs::write(out(cfg, "scan_summary.txt"), &summary)?;
    print!("{summary}");
    for (k, b) in report.bubbles.iter().enumerate() {
        if let Some(rs) = bubble_candidate(&states[b.snapshot], b, cfg.rescale.target_n, 8.0)? {
            write_snapshot(&out(cfg, &format!("bubble_{k:03}.ymhd")), &rs, cfg.output_mode)?;
        }
    }
    Ok(0)
}

fn rescale(cfg: &RunConfig, path: &Path) -> Outcome {
    let s = load(cfg, path)?;
    let target = Domain::new(cfg.rescale.target_n, cfg.rescale.target_length)?;
    let rs = ymhd_core::blowup::rescale(&s, cfg.rescale.center, cfg.rescale.factor, &target)?;
    write_snapshot(&out(cfg, "rescaled.ymhd"), &rs, cfg.output_mode)?;
    let dom = &s.domain;
    let fi = (cfg.rescale.center.0 / dom.h()).round() as isize;
    let fj = (cfg.rescale.center.1 / dom.h()).round() as isize;
    let (ci, cj) = dom.ij(dom.idx(fi, fj));
    let radius = 0.45 * target.length();
    let id = scaling_identities(&s, (ci, cj), cfg.rescale.factor, &target, radius)?;
    println!("identity,rescaled,predicted,rel_error");
    for (name, p) in id.pairs() {
        println!("{name},{:.16e},{:.16e},{:.3e}", p.rescaled, p.predicted, p.rel_error());
    }
    Ok(0)
}

fn gauge_fix(cfg: &RunConfig, path: &Path) -> Outcome {
    let s = load(cfg, path)?;
    let dom = &s.domain;
    let (g, connection) = match s.group() {
        Group::U1 => coulomb_fix_abelian(dom, &s.gauge)?,
        Group::Su2 => {
            let r = coulomb_fix_descent(
                dom,
                &s.model,
                &s.gauge,
                DescentOptions {
                    tol: cfg.gauge_fix.tol,
                    max_iter: cfg.gauge_fix.max_iter,
                },
            )?
            .into_result()?;
            (r.gauge, r.connection)
        }
    };
    let mut fixed = apply_gauge(&g, &s)?;
    fixed.gauge = connection;
    let worst = coulomb_residual(dom, &fixed.gauge)?;
    write_snapshot(&out(cfg, "gauge_fixed.ymhd"), &fixed, cfg.output_mode)?;
    println!("coulomb residual {worst:.3e}");
    Ok(0)
}

fn plotdata(cfg: &RunConfig, path: &Path) -> Outcome {
    let s = load(cfg, path)?;
    let d = densities(&s)?;
    for (name, v) in [
        ("yang_mills", &d.yang_mills),
        ("higgs", &d.higgs),
        ("spinor_l4", &d.spinor_l4),
        ("dirac", &d.dirac),
    ] {
        let f = fs::File::create(out(cfg, &format!("{name}.csv")))?;
        write_grid_csv(f, &s.domain, v)?;
    }
    let a = action_total(&s)?;
    let text = format!(
        "yang_mills {:.16e}\nhiggs {:.16e}\ndirac {:.16e}\ntotal {:.16e}\nspinor_l4 {:.16e}\n",
        a.yang_mills, a.higgs, a.dirac, a.total, a.spinor_l4
    );
    fs::write(out(cfg, "action.txt"), &text)?;
    print!("{text}");
    Ok(0)
}
