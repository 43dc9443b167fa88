//! The invariant battery behind `ymhd check-invariants`.
//!
//! Every check runs on seeded data, measures one number and compares it with
//! a fixed tolerance. A check that errors counts as a failure.

use std::time::Instant;

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{action_total, densities, twisted_dirac, ActionBreakdown};
use crate::blowup::{ball_integral, scaling_identities, ScalingIdentities};
use crate::error::Result;
use crate::fields::{
    apply_gauge, coulomb_fix_abelian, coulomb_fix_descent, tangency_defect, DescentOptions,
    FieldState, GaugeField, GaugeTransformation, TwistedSpinorField,
};
use crate::geometry::{codiff1, d0, diff, node_map, Domain, GammaConvention, PlainSpinor};
use crate::gradcheck::{gradient_consistency, FieldKind};
use crate::io::{decode_snapshot, encode_snapshot, OutputMode};
use crate::lie::{
    curvature_n, d1d2mu, killing_field, tangent_frame, FiberPoint, Group, GroupElement,
    LieAlgebraElement, Model, TangentVector,
};
use crate::solver::{heat_flow_harmonic_section, FlowConfig, FlowStatus};
use crate::synthetic;

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    /// Passes when `measured ≤ tolerance`.
    AtMost,
    /// Passes when `measured ≥ tolerance`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Inputs shared by all checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckSettings {
    pub seed: u64,
    pub gamma: GammaConvention,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            seed: 1,
            gamma: GammaConvention::Standard,
        }
    }
}

/// What a check function returns before the comparison.
struct Measured {
    value: f64,
    detail: String,
}

fn measured(value: f64) -> Result<Measured> {
    Ok(Measured {
        value,
        detail: String::new(),
    })
}

type CheckFn = fn(&CheckSettings) -> Result<Measured>;

/// A registered check: name, tolerance, comparison and the measurement.
pub struct Check {
    pub name: &'static str,
    pub tolerance: f64,
    pub comparison: Comparison,
    run: CheckFn,
}

impl Check {
    pub fn run(&self, settings: &CheckSettings) -> CheckResult {
        let t0 = Instant::now();
        let (value, detail) = match (self.run)(settings) {
            Ok(m) => (m.value, m.detail),
            Err(e) => (f64::NAN, format!("error: {e}")),
        };
        let passed = match self.comparison {
            Comparison::AtMost => value <= self.tolerance,
            Comparison::AtLeast => value >= self.tolerance,
        };
        CheckResult {
            name: self.name,
            measured: value,
            tolerance: self.tolerance,
            comparison: self.comparison,
            passed,
            detail,
            seconds: t0.elapsed().as_secs_f64(),
        }
    }
}

const fn at_most(name: &'static str, tolerance: f64, run: CheckFn) -> Check {
    Check {
        name,
        tolerance,
        comparison: Comparison::AtMost,
        run,
    }
}

const fn at_least(name: &'static str, tolerance: f64, run: CheckFn) -> Check {
    Check {
        name,
        tolerance,
        comparison: Comparison::AtLeast,
        run,
    }
}

/// All registered checks in report order.
pub fn registry() -> Vec<Check> {
    vec![
        at_most("clifford_relation", 0.0, clifford_relation),
        at_most("gamma_skew_hermitian", 0.0, gamma_skew_hermitian),
        at_most("chirality_anticommutes", 0.0, chirality_anticommutes),
        at_most("flat_dirac_self_adjoint_n64", 1e-12, flat_dirac_self_adjoint),
        at_most("twisted_dirac_self_adjoint_n64", 1e-8, twisted_dirac_self_adjoint),
        at_most("twisted_dirac_tangent_output", 1e-10, twisted_dirac_tangent),
        at_most("gauge_constant_yang_mills", 1e-10, gauge_constant_ym),
        at_most("gauge_constant_higgs", 1e-10, gauge_constant_higgs),
        at_most("gauge_constant_dirac", 1e-10, gauge_constant_dirac),
        at_least("gauge_smooth_order", 1.9, gauge_smooth_order),
        at_most("d1d2mu_skew_symmetry", 1e-12, d1d2mu_skew),
        at_most("killing_field_tangency", 1e-10, killing_tangency),
        at_most("group_action_isometry", 1e-10, action_isometry),
        at_most("curvature_first_bianchi", 1e-12, first_bianchi),
        at_most("curvature_pair_symmetry", 1e-12, curvature_symmetries),
        at_most("gradient_a_n32", 1e-4, grad_a_32),
        at_most("gradient_u_n32", 1e-4, grad_u_32),
        at_most("gradient_psi_n32", 1e-4, grad_psi_32),
        at_most("gradient_a_n64", 1e-5, grad_a_64),
        at_most("gradient_u_n64", 1e-5, grad_u_64),
        at_most("gradient_psi_n64", 1e-5, grad_psi_64),
        at_most("coulomb_abelian_divergence", 1e-10, coulomb_abelian),
        at_most("coulomb_pure_gauge_to_harmonic", 1e-10, coulomb_pure_gauge),
        at_most("coulomb_descent_nonabelian", 1e-4, coulomb_descent),
        at_most("scaling_higgs_n128", 0.02, scaling_higgs),
        at_most("scaling_yang_mills_n128", 0.02, scaling_ym),
        at_most("scaling_spinor_l2_n128", 0.02, scaling_l2),
        at_most("scaling_dirac_n128", 0.02, scaling_dirac),
        at_most("conformal_higgs", 1e-12, conformal_higgs),
        at_most("conformal_dirac", 1e-12, conformal_dirac),
        at_most("ball_energy_monotone", 0.0, ball_monotone),
        at_most("heat_flow_residual", 1e-6, heat_flow_residual),
        at_most("flow_determinism", 0.0, flow_determinism),
        at_most("snapshot_round_trip", 1e-15, snapshot_round_trip),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.results.iter().filter(|r| !r.passed).collect()
    }

    /// One line per check: status, name, measured value, tolerance.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let op = match r.comparison {
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
            };
            s.push_str(&format!(
                "{:<4} {:<34} measured {:>12.4e}  {op} {:.1e}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.measured,
                r.tolerance
            ));
            if !r.detail.is_empty() {
                s.push_str(&format!("  ({})", r.detail));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,status,measured,comparison,tolerance\n");
        for r in &self.results {
            s.push_str(&format!(
                "{},{},{:.16e},{},{:e}\n",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.measured,
                match r.comparison {
                    Comparison::AtMost => "at_most",
                    Comparison::AtLeast => "at_least",
                },
                r.tolerance
            ));
        }
        s
    }
}

pub fn run_checks(settings: &CheckSettings) -> CheckReport {
    CheckReport {
        results: registry().iter().map(|c| c.run(settings)).collect(),
    }
}

fn rng(settings: &CheckSettings, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(settings.seed.wrapping_mul(0x9e37_79b9).wrapping_add(salt))
}

fn state(n: usize, group: Group, settings: &CheckSettings, salt: u64) -> Result<FieldState> {
    let dom = Domain::new(n, 1.0)?;
    synthetic::random_state(&dom, Model::new(group), settings.seed.wrapping_add(salt), 0.5, 0.8)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

// Clifford algebra

fn clifford_relation(s: &CheckSettings) -> Result<Measured> {
    let g = s.gamma.matrices();
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let delta = if a == b { 2.0 } else { 0.0 };
            let m = g[a] * g[b] + g[b] * g[a] + Matrix2::identity() * C64::new(delta, 0.0);
            worst = worst.max(m.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    measured(worst)
}

fn gamma_skew_hermitian(s: &CheckSettings) -> Result<Measured> {
    let g = s.gamma.matrices();
    measured(
        g.iter()
            .map(|m| (m + m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max),
    )
}

fn chirality_anticommutes(s: &CheckSettings) -> Result<Measured> {
    let g = s.gamma.matrices();
    let c = g[0] * g[1];
    measured(
        g.iter()
            .map(|m| (c * m + m * c).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max),
    )
}

fn dirac_with(dom: &Domain, g: &[Matrix2<C64>; 2], psi: &[PlainSpinor]) -> Vec<PlainSpinor> {
    node_map(dom.len(), |k| {
        let mut out = [C64::new(0.0, 0.0); 2];
        for (dir, m) in g.iter().enumerate() {
            let d = diff(dom, psi, dir, k);
            out[0] += m[(0, 0)] * d[0] + m[(0, 1)] * d[1];
            out[1] += m[(1, 0)] * d[0] + m[(1, 1)] * d[1];
        }
        out
    })
}

fn plain_inner(dom: &Domain, a: &[PlainSpinor], b: &[PlainSpinor]) -> C64 {
    let s: C64 = a.iter().zip(b).map(|(x, y)| x[0].conj() * y[0] + x[1].conj() * y[1]).sum();
    s * dom.h() * dom.h()
}

fn flat_dirac_self_adjoint(s: &CheckSettings) -> Result<Measured> {
    let dom = Domain::new(64, 1.0)?;
    let mut r = rng(s, 1);
    let mut field = || -> Vec<PlainSpinor> {
        (0..dom.len())
            .map(|_| {
                [
                    C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
                    C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
                ]
            })
            .collect()
    };
    let (phi, psi) = (field(), field());
    let g = s.gamma.matrices();
    let lhs = plain_inner(&dom, &phi, &dirac_with(&dom, &g, &psi));
    let rhs = plain_inner(&dom, &dirac_with(&dom, &g, &phi), &psi);
    let scale = plain_inner(&dom, &phi, &phi).re.sqrt() * plain_inner(&dom, &psi, &psi).re.sqrt() / dom.h();
    measured((lhs - rhs).norm() / scale)
}

fn dirac_pair(s: &CheckSettings) -> Result<(FieldState, TwistedSpinorField)> {
    let a = state(64, Group::Su2, s, 2)?;
    let b = state(64, Group::Su2, s, 3)?;
    let phi = TwistedSpinorField::projected(b.spinor.values().to_vec(), &a.section)?;
    Ok((a, phi))
}

fn twisted_dirac_self_adjoint(s: &CheckSettings) -> Result<Measured> {
    let (st, phi) = dirac_pair(s)?;
    let dom = &st.domain;
    let dpsi = twisted_dirac(dom, &st.gauge, &st.section, &st.spinor)?;
    let dphi = twisted_dirac(dom, &st.gauge, &st.section, &phi)?;
    let lhs = phi.inner(&dpsi, dom);
    let rhs = dphi.inner(&st.spinor, dom);
    let scale = (phi.l2_norm_sq(dom) * dpsi.l2_norm_sq(dom)).sqrt();
    measured((lhs - rhs).norm() / scale)
}

fn twisted_dirac_tangent(s: &CheckSettings) -> Result<Measured> {
    let (st, _) = dirac_pair(s)?;
    let d = twisted_dirac(&st.domain, &st.gauge, &st.section, &st.spinor)?;
    measured(
        d.values()
            .iter()
            .zip(st.section.values())
            .map(|(p, u)| tangency_defect(p, u))
            .fold(0.0, f64::max),
    )
}

// Gauge invariance

fn random_constant_gauge(r: &mut ChaCha8Rng, group: Group, len: usize) -> GaugeTransformation {
    let c: Vec<f64> = (0..group.dim()).map(|_| r.gen_range(-3.0..3.0)).collect();
    GaugeTransformation::constant(GroupElement::exp(&LieAlgebraElement::from_coords(group, &c)), len)
}

fn constant_gauge_worst(s: &CheckSettings, pick: fn(&ActionBreakdown) -> f64) -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (salt, group) in [(4, Group::U1), (5, Group::Su2)] {
        let st = state(16, group, s, salt)?;
        let base = pick(&action_total(&st)?);
        let mut r = rng(s, salt);
        for _ in 0..25 {
            let g = random_constant_gauge(&mut r, group, st.domain.len());
            worst = worst.max(rel(pick(&action_total(&apply_gauge(&g, &st)?)?), base));
        }
    }
    Ok(Measured {
        value: worst,
        detail: "50 constant gauges".into(),
    })
}

fn gauge_constant_ym(s: &CheckSettings) -> Result<Measured> {
    constant_gauge_worst(s, |a| a.yang_mills)
}

fn gauge_constant_higgs(s: &CheckSettings) -> Result<Measured> {
    constant_gauge_worst(s, |a| a.higgs)
}

fn gauge_constant_dirac(s: &CheckSettings) -> Result<Measured> {
    constant_gauge_worst(s, |a| a.dirac)
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(h: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Fitted orders of h²Σ|e(g·s) − e(s)| for the three densities under a
/// smooth SU(2) gauge on n = 32, 64, 128. Signed totals are not used: their
/// O(h²) contributions can cancel at a single resolution.
pub fn smooth_gauge_orders(seed: u64) -> Result<[f64; 3]> {
    let mut errs = [[0.0; 3]; 3];
    let mut hs = [0.0; 3];
    for (k, n) in [32usize, 64, 128].into_iter().enumerate() {
        let dom = Domain::new(n, 1.0)?;
        let st = synthetic::random_state(&dom, Model::new(Group::Su2), seed, 0.5, 0.8)?;
        let g = synthetic::random_gauge_transformation(&dom, Group::Su2, seed + 17, 0.7);
        let (a, b) = (densities(&st)?, densities(&apply_gauge(&g, &st)?)?);
        let h2 = dom.h() * dom.h();
        let l1 = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() * h2;
        errs[0][k] = l1(&a.yang_mills, &b.yang_mills);
        errs[1][k] = l1(&a.higgs, &b.higgs);
        errs[2][k] = l1(&a.dirac, &b.dirac);
        hs[k] = dom.h();
    }
    Ok([0, 1, 2].map(|t| fitted_order(&hs, &errs[t])))
}

fn gauge_smooth_order(s: &CheckSettings) -> Result<Measured> {
    let o = smooth_gauge_orders(s.seed)?;
    Ok(Measured {
        value: o.iter().copied().fold(f64::INFINITY, f64::min),
        detail: format!("ym {:.3}, higgs {:.3}, dirac {:.3}", o[0], o[1], o[2]),
    })
}

// Fiber tensors

fn random_point(r: &mut ChaCha8Rng) -> FiberPoint {
    loop {
        let v = Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        if v.norm() > 0.1 {
            return FiberPoint::normalized(v).unwrap();
        }
    }
}

fn random_tangent(r: &mut ChaCha8Rng, y: &FiberPoint) -> TangentVector {
    let f = tangent_frame(y.coords());
    TangentVector::new(*y, f[0] * r.gen_range(-1.0..1.0) + f[1] * r.gen_range(-1.0..1.0)).unwrap()
}

fn random_algebra(r: &mut ChaCha8Rng, g: Group) -> LieAlgebraElement {
    let c: Vec<f64> = (0..g.dim()).map(|_| r.gen_range(-1.0..1.0)).collect();
    LieAlgebraElement::from_coords(g, &c)
}

fn d1d2mu_skew(s: &CheckSettings) -> Result<Measured> {
    let mut r = rng(s, 6);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let g = if k % 2 == 0 { Group::Su2 } else { Group::U1 };
        let y = random_point(&mut r);
        let (v, w) = (random_tangent(&mut r, &y), random_tangent(&mut r, &y));
        let xi = random_algebra(&mut r, g);
        let a = d1d2mu(&xi, &v)?.vec.dot(&w.vec);
        let b = v.vec.dot(&d1d2mu(&xi, &w)?.vec);
        worst = worst.max((a + b).abs());
    }
    measured(worst)
}

fn killing_tangency(s: &CheckSettings) -> Result<Measured> {
    let mut r = rng(s, 7);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let g = if k % 2 == 0 { Group::Su2 } else { Group::U1 };
        let y = random_point(&mut r);
        let kf = killing_field(&random_algebra(&mut r, g), &y);
        worst = worst.max(kf.vec.dot(y.coords()).abs());
    }
    measured(worst)
}

fn action_isometry(s: &CheckSettings) -> Result<Measured> {
    let mut r = rng(s, 8);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let g = if k % 2 == 0 { Group::Su2 } else { Group::U1 };
        let rot = GroupElement::exp(&(random_algebra(&mut r, g) * 3.0)).rotation();
        let (a, b) = (random_point(&mut r), random_point(&mut r));
        let (ra, rb) = (rot * a.coords(), rot * b.coords());
        worst = worst
            .max((ra.dot(&rb) - a.coords().dot(b.coords())).abs())
            .max((ra.norm() - 1.0).abs());
        // the Killing field is the derivative of the action: skew generator
        let gen = random_algebra(&mut r, g).generator();
        worst = worst.max((gen + gen.transpose()).abs().max());
    }
    measured(worst)
}

fn first_bianchi(s: &CheckSettings) -> Result<Measured> {
    let mut r = rng(s, 9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let y = random_point(&mut r);
        let (x, z, w) = (random_tangent(&mut r, &y), random_tangent(&mut r, &y), random_tangent(&mut r, &y));
        let sum = curvature_n(&y, &x, &z, &w)?.vec + curvature_n(&y, &z, &w, &x)?.vec + curvature_n(&y, &w, &x, &z)?.vec;
        worst = worst.max(sum.abs().max());
    }
    measured(worst)
}

fn curvature_symmetries(s: &CheckSettings) -> Result<Measured> {
    let mut r = rng(s, 10);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let y = random_point(&mut r);
        let t: Vec<TangentVector> = (0..4).map(|_| random_tangent(&mut r, &y)).collect();
        let rm = |a: usize, b: usize, c: usize, d: usize| -> Result<f64> {
            Ok(curvature_n(&y, &t[a], &t[b], &t[c])?.vec.dot(&t[d].vec))
        };
        let base = rm(0, 1, 2, 3)?;
        worst = worst
            .max((base + rm(1, 0, 2, 3)?).abs())
            .max((base + rm(0, 1, 3, 2)?).abs())
            .max((base - rm(2, 3, 0, 1)?).abs());
    }
    measured(worst)
}

// Gradient consistency

fn gradient(s: &CheckSettings, n: usize, field: FieldKind) -> Result<Measured> {
    let mut worst: f64 = 0.0;
    for (salt, group) in [(11, Group::U1), (12, Group::Su2)] {
        let st = state(n, group, s, salt)?;
        let rep = gradient_consistency(&st, 10, s.seed.wrapping_add(salt), field == FieldKind::Psi)?;
        worst = worst.max(rep.max_rel(field));
    }
    Ok(Measured {
        value: worst,
        detail: "20 directions".into(),
    })
}

fn grad_a_32(s: &CheckSettings) -> Result<Measured> {
    gradient(s, 32, FieldKind::A)
}
fn grad_u_32(s: &CheckSettings) -> Result<Measured> {
    gradient(s, 32, FieldKind::U)
}
fn grad_psi_32(s: &CheckSettings) -> Result<Measured> {
    gradient(s, 32, FieldKind::Psi)
}
fn grad_a_64(s: &CheckSettings) -> Result<Measured> {
    gradient(s, 64, FieldKind::A)
}
fn grad_u_64(s: &CheckSettings) -> Result<Measured> {
    gradient(s, 64, FieldKind::U)
}
fn grad_psi_64(s: &CheckSettings) -> Result<Measured> {
    gradient(s, 64, FieldKind::Psi)
}

// Coulomb gauge

fn u1_field(comps: [Vec<f64>; 2]) -> Result<GaugeField> {
    GaugeField::new(
        Group::U1,
        comps.map(|c| c.iter().map(|v| LieAlgebraElement::from_coords(Group::U1, &[*v])).collect()),
    )
}

fn coulomb_abelian(s: &CheckSettings) -> Result<Measured> {
    let dom = Domain::new(64, 1.0)?;
    let a = synthetic::random_gauge_field(&dom, Group::U1, s.seed.wrapping_add(13), 1.0);
    let (_, ap) = coulomb_fix_abelian(&dom, &a)?;
    let c = codiff1(&dom, &[ap.coordinate(0, 0), ap.coordinate(1, 0)])?;
    measured(c.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

fn coulomb_pure_gauge(s: &CheckSettings) -> Result<Measured> {
    let dom = Domain::new(64, 1.0)?;
    let mut r = rng(s, 14);
    let harmonic = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
    let f = synthetic::SmoothFn::random(&mut r, dom.length());
    let theta = dom.sample(|x, y| f.eval(x, y));
    let dt = d0(&dom, &theta)?;
    let a = u1_field([0, 1].map(|d| dt[d].iter().map(|v| v + harmonic[d]).collect()))?;
    let (_, ap) = coulomb_fix_abelian(&dom, &a)?;
    let mut worst: f64 = 0.0;
    for d in 0..2 {
        for v in ap.coordinate(d, 0) {
            worst = worst.max((v - harmonic[d]).abs());
        }
    }
    measured(worst)
}

fn coulomb_descent(s: &CheckSettings) -> Result<Measured> {
    let dom = Domain::new(32, 1.0)?;
    let model = Model::new(Group::Su2);
    let a = synthetic::random_gauge_field(&dom, Group::Su2, s.seed.wrapping_add(15), 0.3);
    let r = coulomb_fix_descent(&dom, &model, &a, DescentOptions { tol: 1e-4, max_iter: 500 })?;
    let monotone = r.history.windows(2).all(|w| w[1] <= w[0]);
    Ok(Measured {
        value: if monotone { r.residual } else { f64::INFINITY },
        detail: format!("{} iterations, monotone {monotone}", r.iterations),
    })
}

// Scaling laws

fn scaling(s: &CheckSettings) -> Result<ScalingIdentities> {
    let dom = Domain::new(128, 1.0)?;
    let mut r = rng(s, 16);
    let c = (64 + r.gen_range(-8..=8), 64 + r.gen_range(-8..=8));
    let st = synthetic::bump_state(&dom, Model::new(Group::Su2), dom.point(dom.idx(c.0, c.1)), 0.08)?;
    let target = Domain::new(128, 1.0)?;
    scaling_identities(&st, (c.0 as usize, c.1 as usize), 0.5, &target, 0.45)
}

fn scaling_pair(s: &CheckSettings, k: usize) -> Result<Measured> {
    let (name, p) = scaling(s)?.pairs()[k];
    Ok(Measured {
        value: p.rel_error(),
        detail: format!("{name}: rescaled {:.6e}, predicted {:.6e}", p.rescaled, p.predicted),
    })
}

fn scaling_higgs(s: &CheckSettings) -> Result<Measured> {
    scaling_pair(s, 0)
}
fn scaling_ym(s: &CheckSettings) -> Result<Measured> {
    scaling_pair(s, 1)
}
fn scaling_l2(s: &CheckSettings) -> Result<Measured> {
    scaling_pair(s, 2)
}
fn scaling_dirac(s: &CheckSettings) -> Result<Measured> {
    scaling_pair(s, 3)
}

// Conformal invariance

fn conformal(s: &CheckSettings, pick: fn(&ActionBreakdown) -> f64) -> Result<Measured> {
    let st = state(32, Group::Su2, s, 17)?;
    let mut r = rng(s, 17);
    let f = synthetic::SmoothFn::random(&mut r, 1.0);
    let mut worst: f64 = 0.0;
    for amp in [0.2, 0.5, 1.0] {
        let sigma = st.domain.sample(|x, y| amp * f.eval(x, y));
        let mut c = st.clone();
        c.domain = st.domain.clone().with_conformal_exponent(sigma)?;
        worst = worst.max(rel(pick(&action_total(&c)?), pick(&action_total(&st)?)));
    }
    measured(worst)
}

fn conformal_higgs(s: &CheckSettings) -> Result<Measured> {
    conformal(s, |a| a.higgs)
}

fn conformal_dirac(s: &CheckSettings) -> Result<Measured> {
    conformal(s, |a| a.dirac)
}

// Diagnostics, flows and files

fn ball_monotone(s: &CheckSettings) -> Result<Measured> {
    let st = state(32, Group::Su2, s, 18)?;
    let d = crate::action::densities(&st)?;
    let mut worst: f64 = 0.0;
    for f in [&d.higgs, &d.yang_mills, &d.spinor_l4] {
        let mut prev = 0.0;
        for k in 1..=32 {
            let e = ball_integral(&st.domain, f, (5, 9), k as f64 / 64.0)?;
            worst = worst.max(prev - e);
            prev = e;
        }
    }
    measured(worst)
}

fn heat_flow_setup() -> Result<(FieldState, FlowConfig)> {
    let dom = Domain::new(16, 1.0)?;
    let st = synthetic::perturbed_constant(&dom, Model::new(Group::U1), 0.3);
    let cfg = FlowConfig {
        dt: 0.5 * dom.h() * dom.h(),
        max_steps: 5000,
        tol_residual: 1e-6,
        ..FlowConfig::default()
    };
    Ok((st, cfg))
}

fn heat_flow_residual(_: &CheckSettings) -> Result<Measured> {
    let (st, cfg) = heat_flow_setup()?;
    let out = heat_flow_harmonic_section(&st, &cfg)?;
    let monotone = out.trace.is_non_increasing(|r| r.action.higgs);
    let last = out.trace.last().map(|r| r.residuals.1).unwrap_or(f64::NAN);
    let ok = monotone && out.trace.status == FlowStatus::Converged;
    Ok(Measured {
        value: if ok { last } else { f64::INFINITY },
        detail: format!("{} steps, monotone {monotone}", out.trace.rows.len() - 1),
    })
}

fn flow_determinism(_: &CheckSettings) -> Result<Measured> {
    let (st, cfg) = heat_flow_setup()?;
    let cfg = FlowConfig { max_steps: 200, ..cfg };
    let a = heat_flow_harmonic_section(&st, &cfg)?.trace.to_csv();
    let b = heat_flow_harmonic_section(&st, &cfg)?.trace.to_csv();
    measured(if a == b { 0.0 } else { 1.0 })
}

fn snapshot_round_trip(s: &CheckSettings) -> Result<Measured> {
    let st = state(16, Group::Su2, s, 19)?;
    let bin = decode_snapshot(&encode_snapshot(&st, OutputMode::Binary)?, "binary")?;
    let txt = decode_snapshot(&encode_snapshot(&st, OutputMode::Text)?, "text")?;
    if bin != st {
        return measured(f64::INFINITY);
    }
    let mut worst: f64 = 0.0;
    for (a, b) in st.section.values().iter().zip(txt.section.values()) {
        for k in 0..3 {
            worst = worst.max((a[k] - b[k]).abs() / a[k].abs().max(f64::MIN_POSITIVE));
        }
    }
    for (a, b) in st.spinor.values().iter().zip(txt.spinor.values()) {
        for c in 0..2 {
            for k in 0..3 {
                let (x, y) = (a[c][k], b[c][k]);
                worst = worst
                    .max((x.re - y.re).abs() / x.re.abs().max(f64::MIN_POSITIVE))
                    .max((x.im - y.im).abs() / x.im.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    measured(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_enough() {
        let r = registry();
        assert!(r.len() >= 20);
        let mut names: Vec<_> = r.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), r.len());
    }

    #[test]
    fn corrupted_gamma_fails_clifford() {
        let s = CheckSettings {
            gamma: GammaConvention::Corrupted,
            ..CheckSettings::default()
        };
        let reg = registry();
        let c = reg.iter().find(|c| c.name == "clifford_relation").unwrap().run(&s);
        assert!(!c.passed);
        let c = reg.iter().find(|c| c.name == "flat_dirac_self_adjoint_n64").unwrap().run(&s);
        assert!(!c.passed);
    }

    #[test]
    fn cheap_checks_pass_on_defaults() {
        let s = CheckSettings::default();
        for c in registry() {
            if ["clifford_relation", "gamma_skew_hermitian", "chirality_anticommutes", "d1d2mu_skew_symmetry",
                "killing_field_tangency", "group_action_isometry", "curvature_first_bianchi",
                "curvature_pair_symmetry", "snapshot_round_trip", "ball_energy_monotone"]
                .contains(&c.name)
            {
                let r = c.run(&s);
                assert!(r.passed, "{r:?}");
            }
        }
    }

    #[test]
    fn fitted_order_of_exact_power() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((fitted_order(&h, &e) - 2.0).abs() < 1e-12);
    }
}
