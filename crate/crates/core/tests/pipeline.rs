use std::f64::consts::PI;

use tempfile::TempDir;
use ymhd_core::action::action_total;
use ymhd_core::blowup::{bubble_accounting, find_bubbles, scaling_identities};
use ymhd_core::checks::fitted_order;
use ymhd_core::io::{read_snapshot, read_snapshot_header, write_snapshot, OutputMode, RunConfig};
use ymhd_core::solver::run_flow;
use ymhd_core::synthetic::{bump_state, random_state, two_bubbles};
use ymhd_core::{Domain, Group, Model};

#[test]
fn snapshot_files_round_trip() {
    let t = TempDir::new().unwrap();
    let dom = Domain::new(16, 2.0).unwrap();
    let st = random_state(&dom, Model::new(Group::Su2), 2, 0.6, 0.6).unwrap();
    for mode in [OutputMode::Text, OutputMode::Binary] {
        let p = t.path().join(format!("s.{}", mode.name()));
        write_snapshot(&p, &st, mode).unwrap();
        let h = read_snapshot_header(&p).unwrap();
        assert_eq!((h.n_side, h.length, h.group), (16, 2.0, Group::Su2));
        let back = read_snapshot(&p).unwrap();
        let (a, b) = (action_total(&st).unwrap(), action_total(&back).unwrap());
        assert!((a.total - b.total).abs() <= 1e-14 * a.total.abs());
        if mode == OutputMode::Binary {
            assert_eq!(back, st);
        }
    }
}

#[test]
fn config_drives_a_reproducible_flow() {
    let text = "\
# coupled flow on random data
[domain]
n_side = 16
group = su2
[flow]
mode = coupled_flow
dt = 1e-4
max_steps = 25
[init]
kind = random_smooth
amplitude = 0.3
[output]
snapshot_interval = 5
";
    let cfg = RunConfig::parse(text).unwrap();
    let dom = cfg.domain().unwrap();
    let st = random_state(&dom, cfg.model(), cfg.seed, 0.3, 0.3).unwrap();
    let a = run_flow(&st, &cfg.flow_config()).unwrap();
    let b = run_flow(&st, &cfg.flow_config()).unwrap();
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
    let steps: Vec<usize> = a.snapshots.iter().map(|s| s.0).collect();
    assert_eq!(steps, vec![0, 5, 10, 15, 20, 25]);
    assert!(a.trace.is_non_increasing(|r| r.action.total));
}

#[test]
fn scaling_identity_error_shrinks_with_resolution() {
    let mut h = Vec::new();
    let mut e = Vec::new();
    for n in [64usize, 128, 256] {
        let dom = Domain::new(n, 1.0).unwrap();
        let c = (n / 2 + n / 16, n / 2 - n / 32);
        let st = bump_state(&dom, Model::new(Group::Su2), dom.point(dom.idx(c.0 as isize, c.1 as isize)), 0.08).unwrap();
        let id = scaling_identities(&st, c, 0.5, &Domain::new(n, 1.0).unwrap(), 0.45).unwrap();
        h.push(dom.h());
        e.push(id.max_rel_error());
    }
    assert!(e[2] < e[0], "{e:?}");
    assert!(fitted_order(&h, &e) >= 1.0, "{e:?}");
}

#[test]
fn two_bubbles_are_found_and_accounted() {
    let dom = Domain::new(256, 1.0).unwrap();
    let (c1, c2) = ((64usize, 64usize), (192usize, 160usize));
    let p = |c: (usize, usize)| dom.point(dom.idx(c.0 as isize, c.1 as isize));
    let st = two_bubbles(&dom, Model::new(Group::U1), p(c1), 1.0 / 40.0, p(c2), 1.0 / 32.0);
    let found = find_bubbles(&st, 16.0 * PI, 4.0, 2).unwrap();
    let mut centers: Vec<_> = found.iter().map(|b| b.center).collect();
    centers.sort();
    assert_eq!(centers, vec![c1, c2]);
    let acc = bubble_accounting(&st, &found, 3.0, 128).unwrap();
    assert!(acc.rel_defect() < 0.05, "{acc:?}");
    assert!(acc.bubble_energies.iter().all(|&b| b > 4.0 * PI));
}
