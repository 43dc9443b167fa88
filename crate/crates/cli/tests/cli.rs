use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use ymhd_core::action::action_total;
use ymhd_core::checks::registry;
use ymhd_core::io::{read_grid_csv, read_snapshot, write_snapshot, OutputMode};
use ymhd_core::lie::FiberPoint;
use ymhd_core::synthetic;
use ymhd_core::{Domain, FieldState, Group, Model};

fn ymhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ymhd")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn save(dir: &Path, name: &str, state: &FieldState) -> PathBuf {
    let p = dir.join(name);
    write_snapshot(&p, state, OutputMode::Text).unwrap();
    p
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn check_invariants_default_config_passes() {
    let t = TempDir::new().unwrap();
    let o = ymhd(&["check-invariants", "--out", s(t.path())]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let n = registry().len();
    assert!(n >= 20);
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS ")).count(), n);
    let csv = fs::read_to_string(t.path().join("checks.csv")).unwrap();
    assert_eq!(csv.lines().count(), n + 1);
}

#[test]
fn corrupted_gamma_fails_clifford() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "bad.cfg", "# fault injection\ngamma.convention = corrupted\n");
    let o = ymhd(&["check-invariants", "--config", &cfg, "--out", s(t.path())]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL clifford_relation")));
}

#[test]
fn usage_and_config_errors_exit_1() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "u.cfg", "domain.n_side = 16\nflow.speed = 3\n");
    let o = ymhd(&["flow", "--config", &cfg, "--out", s(t.path())]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let cfg = write_config(t.path(), "n.cfg", "domain.n_side = 12\n");
    assert_eq!(code(&ymhd(&["flow", "--config", &cfg, "--out", s(t.path())])), 1);

    assert_eq!(code(&ymhd(&["flow", "--frobnicate"])), 1);
    assert_eq!(code(&ymhd(&["nonsense"])), 1);
    assert_eq!(code(&ymhd(&["--help"])), 0);

    let o = Command::new(env!("CARGO_BIN_EXE_ymhd"))
        .args(["check-invariants", "--out", s(t.path())])
        .env("YMHD_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn zero_flow_gives_one_snapshot() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "z.cfg", "domain.n_side = 16\nflow.mode = coupled_flow\ninit.kind = zero\n");
    let o = ymhd(&["flow", "--config", &cfg, "--out", s(t.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let snaps: Vec<_> = fs::read_dir(t.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "ymhd"))
        .collect();
    assert_eq!(snaps.len(), 1);
    let trace = fs::read_to_string(t.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    for c in ["resA", "resU", "resPsi", "total"] {
        assert_eq!(column(&trace, c), vec![0.0]);
    }
}

#[test]
fn flow_is_deterministic() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(
        t.path(),
        "r.cfg",
        "domain.n_side = 16\ngroup = su2\nflow.mode = coupled_flow\nflow.max_steps = 30\n\
         init.kind = random_smooth\ninit.amplitude = 0.4\noutput.snapshot_interval = 10\noutput.mode = binary\n",
    );
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(code(&ymhd(&["flow", "--config", &cfg, "--seed", "5", "--out", s(d)])), 0);
    }
    for f in ["trace.csv", "snapshot_000010.ymhd", "snapshot_000030.ymhd"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = t.path().join("c");
    ymhd(&["flow", "--config", &cfg, "--seed", "6", "--out", s(&c)]);
    assert_ne!(fs::read(a.join("trace.csv")).unwrap(), fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn harmonic_flow_reaches_tolerance() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(
        t.path(),
        "h.cfg",
        "[domain]\nn_side = 16\n[flow]\nmode = harmonic_section_flow\nmax_steps = 20000\ntol_residual = 1e-6\n\
         [init]\nkind = perturbed_constant\namplitude = 0.3\n",
    );
    let o = ymhd(&["flow", "--config", &cfg, "--out", s(t.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = fs::read_to_string(t.path().join("trace.csv")).unwrap();
    assert!(*column(&trace, "resU").last().unwrap() <= 1e-6);
    let e = column(&trace, "total");
    assert!(e.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn unreadable_snapshot_is_io_error() {
    let t = TempDir::new().unwrap();
    let missing = t.path().join("missing.ymhd");
    let o = ymhd(&["flow", "--init", s(&missing), "--out", s(t.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.ymhd"));
    fs::write(t.path().join("junk.ymhd"), "YMHD1 8 1.0 u1 2\n1 2 3\n").unwrap();
    assert_eq!(code(&ymhd(&["plotdata", s(&t.path().join("junk.ymhd")), "--out", s(t.path())])), 2);
}

fn u1() -> Model {
    Model::new(Group::U1)
}

#[test]
fn scan_flags_shrinking_bubble_center() {
    let t = TempDir::new().unwrap();
    let dom = Domain::new(64, 1.0).unwrap();
    let lambdas: Vec<f64> = (2..=6).map(|k| 1.0 / f64::powi(2.0, k)).collect();
    for (k, st) in synthetic::shrinking_bubbles(&dom, u1(), (0.5, 0.25), &lambdas).iter().enumerate() {
        save(t.path(), &format!("b_{k}.ymhd"), st);
    }
    let cfg = write_config(t.path(), "s.cfg", "diagnostics.radii = 0.03125, 0.0625\ndiagnostics.stride = 1\n");
    let out = t.path().join("out");
    let pattern = format!("{}/b_*.ymhd", s(t.path()));
    let o = ymhd(&["scan", &pattern, "--config", &cfg, "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("scan_summary.txt")).unwrap();
    assert!(summary.contains("S1 (higgs): 1 point(s)\n  (32, 16)"), "{summary}");
    assert!(summary.contains("S2 (spinor_l4): 0 point(s)"));
    assert!(summary.contains("S3 (yang_mills): 0 point(s)"));
    assert!(!summary.contains("warning"));
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("center_i,center_j,radius,type,energy,flagged"));
    let flagged = csv.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert!(flagged > 0);
    assert!(out.join("bubble_000.ymhd").exists());
}

#[test]
fn scan_of_constant_snapshots_is_empty() {
    let t = TempDir::new().unwrap();
    let dom = Domain::new(16, 1.0).unwrap();
    let y = FiberPoint::new([1.0, 0.0, 0.0].into()).unwrap();
    for k in 0..3 {
        save(t.path(), &format!("c_{k}.ymhd"), &FieldState::vacuum(dom.clone(), u1(), &y));
    }
    let pattern = format!("{}/c_*.ymhd", s(t.path()));
    let o = ymhd(&["scan", &pattern, "--out", s(t.path())]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(t.path().join("scan.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")));
    assert!(stdout(&o).contains("bubbles: 0"));
}

#[test]
fn scan_rejects_mixed_resolution_and_single_match() {
    let t = TempDir::new().unwrap();
    let y = FiberPoint::new([0.0, 0.0, 1.0].into()).unwrap();
    save(t.path(), "m_0.ymhd", &FieldState::vacuum(Domain::new(16, 1.0).unwrap(), u1(), &y));
    let pattern = format!("{}/m_*.ymhd", s(t.path()));
    assert_eq!(code(&ymhd(&["scan", &pattern, "--out", s(t.path())])), 2);
    save(t.path(), "m_1.ymhd", &FieldState::vacuum(Domain::new(32, 1.0).unwrap(), u1(), &y));
    let o = ymhd(&["scan", &pattern, "--out", s(t.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("m_1.ymhd"), "{}", stderr(&o));
}

#[test]
fn plotdata_resums_to_action() {
    let t = TempDir::new().unwrap();
    let dom = Domain::new(32, 1.0).unwrap();
    let st = synthetic::random_state(&dom, Model::new(Group::Su2), 3, 0.5, 0.6).unwrap();
    let p = save(t.path(), "r.ymhd", &st);
    let cfg = write_config(t.path(), "p.cfg", "group = su2\n");
    let o = ymhd(&["plotdata", s(&p), "--config", &cfg, "--out", s(t.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = action_total(&read_snapshot(&p).unwrap()).unwrap();
    let h2 = dom.h() * dom.h();
    for (name, want) in [
        ("yang_mills", a.yang_mills),
        ("higgs", a.higgs),
        ("spinor_l4", a.spinor_l4),
        ("dirac", a.dirac),
    ] {
        let grid = read_grid_csv(&fs::read_to_string(t.path().join(format!("{name}.csv"))).unwrap()).unwrap();
        assert_eq!(grid.len(), 32);
        assert!(grid.iter().all(|r| r.len() == 32));
        let sum: f64 = grid.iter().flatten().sum::<f64>() * h2;
        assert!((sum - want).abs() <= 1e-12 * want.abs().max(1.0), "{name}: {sum} vs {want}");
        assert!(want.abs() > 0.0);
    }
}

#[test]
fn plotdata_of_zero_snapshot_is_zero() {
    let t = TempDir::new().unwrap();
    let y = FiberPoint::new([0.0, 0.0, 1.0].into()).unwrap();
    let p = save(t.path(), "z.ymhd", &FieldState::vacuum(Domain::new(8, 1.0).unwrap(), u1(), &y));
    assert_eq!(code(&ymhd(&["plotdata", s(&p), "--out", s(t.path())])), 0);
    for name in ["yang_mills", "higgs", "spinor_l4", "dirac"] {
        let grid = read_grid_csv(&fs::read_to_string(t.path().join(format!("{name}.csv"))).unwrap()).unwrap();
        assert_eq!(grid.len(), 8);
        assert!(grid.iter().flatten().all(|&v| v == 0.0));
    }
}

#[test]
fn gauge_fix_reaches_coulomb_gauge() {
    let t = TempDir::new().unwrap();
    let dom = Domain::new(32, 1.0).unwrap();
    for (group, name) in [(Group::U1, "u1"), (Group::Su2, "su2")] {
        let st = synthetic::random_state(&dom, Model::new(group), 9, 0.5, 0.5).unwrap();
        let p = save(t.path(), &format!("{name}.ymhd"), &st);
        let cfg = write_config(t.path(), "g.cfg", &format!("group = {name}\n"));
        let out = t.path().join(name);
        let o = ymhd(&["gauge-fix", s(&p), "--config", &cfg, "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let fixed = read_snapshot(&out.join("gauge_fixed.ymhd")).unwrap();
        let div = ymhd_core::fields::coulomb_residual(&dom, &fixed.gauge).unwrap();
        let tol = if group == Group::U1 { 1e-10 } else { 1e-4 };
        assert!(div <= tol, "{name}: {div}");
        let (a, b) = (action_total(&st).unwrap(), action_total(&fixed).unwrap());
        assert!((a.total - b.total).abs() < 0.05 * a.total, "{name}: {} vs {}", a.total, b.total);
    }
}

#[test]
fn rescale_writes_target_grid() {
    let t = TempDir::new().unwrap();
    let dom = Domain::new(64, 1.0).unwrap();
    let st = synthetic::bump_state(&dom, u1(), (0.5, 0.5), 0.1).unwrap();
    let p = save(t.path(), "b.ymhd", &st);
    let cfg = write_config(
        t.path(),
        "r.cfg",
        "rescale.center = 0.5, 0.5\nrescale.factor = 0.5\nrescale.n_side = 32\nrescale.length = 1.0\n",
    );
    let o = ymhd(&["rescale", s(&p), "--config", &cfg, "--out", s(t.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_snapshot(&t.path().join("rescaled.ymhd")).unwrap();
    assert_eq!(r.domain.n(), 32);
    assert!(stdout(&o).starts_with("identity,rescaled,predicted,rel_error"));
}
