//! Gradient flows on (A, u) and the Dirac eigensolver.
//!
//! All flows take explicit Euler steps along the negative residual with
//! backtracking: every step starts at `cfg.dt` and is halved until the
//! energy does not increase. Sections move along fiber geodesics, so the
//! unit-length constraint holds exactly; spinors are parallel transported
//! with them.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{action_total, densities, higgs_energy, twisted_dirac_raw, ActionBreakdown};
use crate::error::{Result, YmhdError};
use crate::euler_lagrange::{residual_a, residual_u, residuals};
use crate::fields::{
    project_spinor, spinor_dot, spinor_norm_sq, spinor_zero, FieldState, GaugeField, SectionField,
    Spinor, TwistedSpinorField,
};
use crate::geometry::Domain;
use crate::gradcheck::{geodesic_perturbation, gradient_consistency};

type C64 = Complex64;

/// Step sizes below this end a line search.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowMode {
    HarmonicSectionFlow,
    CoupledFlow,
    AlternatingDirac,
}

impl FlowMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "harmonic_section_flow" => Some(FlowMode::HarmonicSectionFlow),
            "coupled_flow" => Some(FlowMode::CoupledFlow),
            "alternating_dirac" => Some(FlowMode::AlternatingDirac),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowMode::HarmonicSectionFlow => "harmonic_section_flow",
            FlowMode::CoupledFlow => "coupled_flow",
            FlowMode::AlternatingDirac => "alternating_dirac",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub dt: f64,
    pub max_steps: usize,
    pub tol_residual: f64,
    pub mode: FlowMode,
    /// L⁴ norm of the spinor in the alternating scheme.
    pub psi_norm: f64,
    pub seed: u64,
    /// Keep a snapshot every this many steps (0: final state only).
    pub snapshot_interval: usize,
    /// Finite-difference spot check every this many steps (0: never).
    pub check_interval: usize,
    /// Descent steps per outer iteration of the alternating scheme.
    pub inner_steps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: 1e-4,
            max_steps: 10_000,
            tol_residual: 1e-6,
            mode: FlowMode::HarmonicSectionFlow,
            psi_norm: 0.0,
            seed: 0,
            snapshot_interval: 0,
            check_interval: 100,
            inner_steps: 20,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(YmhdError::domain("dt must be positive"));
        }
        if !(self.tol_residual > 0.0) {
            return Err(YmhdError::domain("tol_residual must be positive"));
        }
        if !(self.psi_norm >= 0.0) || !self.psi_norm.is_finite() {
            return Err(YmhdError::domain("psi_norm must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub action: ActionBreakdown,
    /// `(‖res_A‖_{L²}, ‖res_u‖_{L²}, ‖res_ψ‖_{L⁴})`.
    pub residuals: (f64, f64, f64),
    pub max_higgs_density: f64,
    pub max_psi4_density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    MaxSteps,
    Stagnated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    /// `(step, largest relative error)` of each finite-difference spot check.
    pub gradient_checks: Vec<(usize, f64)>,
    /// Energies after each accepted step of each descent phase of the
    /// alternating scheme, starting with the phase's initial energy.
    pub phases: Vec<Vec<f64>>,
    pub status: FlowStatus,
}

impl FlowTrace {
    pub const CSV_HEADER: &'static str =
        "step,ym,higgs,dirac,total,resA,resU,resPsi,maxHiggsDensity,maxPsi4Density";

    fn new() -> Self {
        FlowTrace {
            rows: Vec::new(),
            gradient_checks: Vec::new(),
            phases: Vec::new(),
            status: FlowStatus::MaxSteps,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let v = [
                r.action.yang_mills,
                r.action.higgs,
                r.action.dirac,
                r.action.total,
                r.residuals.0,
                r.residuals.1,
                r.residuals.2,
                r.max_higgs_density,
                r.max_psi4_density,
            ];
            s.push_str(&r.step.to_string());
            for x in v {
                // + 0.0 turns -0.0 into 0.0
                s.push_str(&format!(",{:.16e}", x + 0.0));
            }
            s.push('\n');
        }
        s
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Whether `select(row)` never increases along the trace.
    pub fn is_non_increasing(&self, select: impl Fn(&TraceRow) -> f64) -> bool {
        self.rows.windows(2).all(|w| select(&w[1]) <= select(&w[0]))
    }
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub state: FieldState,
    pub trace: FlowTrace,
    /// `(step, state)` pairs; always ends with the final state.
    pub snapshots: Vec<(usize, FieldState)>,
}

struct Recorder<'a> {
    cfg: &'a FlowConfig,
    trace: FlowTrace,
    snapshots: Vec<(usize, FieldState)>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a FlowConfig) -> Self {
        Recorder {
            cfg,
            trace: FlowTrace::new(),
            snapshots: Vec::new(),
        }
    }

    fn record(&mut self, step: usize, state: &FieldState, res: (f64, f64, f64)) -> Result<()> {
        let d = densities(state)?;
        let action = action_total(state)?;
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        self.trace.rows.push(TraceRow {
            step,
            action,
            residuals: res,
            max_higgs_density: max(&d.higgs),
            max_psi4_density: max(&d.spinor_l4),
        });
        if self.cfg.snapshot_interval > 0 && step % self.cfg.snapshot_interval == 0 {
            self.snapshots.push((step, state.clone()));
        }
        if self.cfg.check_interval > 0 && step > 0 && step % self.cfg.check_interval == 0 {
            let r = gradient_consistency(
                state,
                1,
                self.cfg.seed.wrapping_add(step as u64),
                !state.spinor.is_zero(),
            )?;
            let worst = r.checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
            self.trace.gradient_checks.push((step, worst));
        }
        Ok(())
    }

    fn finish(mut self, state: FieldState, status: FlowStatus) -> FlowOutcome {
        self.trace.status = status;
        let step = self.trace.rows.last().map_or(0, |r| r.step);
        if self.snapshots.last().map(|s| s.0) != Some(step) {
            self.snapshots.push((step, state.clone()));
        }
        FlowOutcome {
            state,
            trace: self.trace,
            snapshots: self.snapshots,
        }
    }
}

/// Halves `dt` from `dt0` until `trial(dt)` does not raise the energy above
/// `e0`. Returns `None` when the step underflows.
fn backtrack<F>(e0: f64, dt0: f64, trial: F) -> Result<Option<(FieldState, f64)>>
where
    F: Fn(f64) -> Result<(FieldState, f64)>,
{
    let mut dt = dt0;
    while dt >= MIN_STEP {
        let (s, e) = trial(dt)?;
        if e <= e0 {
            return Ok(Some((s, e)));
        }
        dt *= 0.5;
    }
    Ok(None)
}

fn step_section(state: &FieldState, grad: &[Vector3<f64>], dt: f64) -> FieldState {
    let v: Vec<Vector3<f64>> = grad.iter().map(|g| -g).collect();
    geodesic_perturbation(state, &v, dt)
}

fn l2_vectors(dom: &Domain, v: &[Vector3<f64>]) -> f64 {
    (dom.h() * dom.h() * v.iter().map(|x| x.norm_squared()).sum::<f64>()).sqrt()
}

/// Harmonic-section heat flow at fixed A with ψ = 0: `u ← exp_u(−dt·res_u)`,
/// stopping when `‖res_u‖_{L²} ≤ tol_residual`. Any spinor in `state0` is
/// discarded.
pub fn heat_flow_harmonic_section(state0: &FieldState, cfg: &FlowConfig) -> Result<FlowOutcome> {
    cfg.validate()?;
    if cfg.mode != FlowMode::HarmonicSectionFlow {
        return Err(YmhdError::Unsupported(format!(
            "heat flow called with mode {}",
            cfg.mode.name()
        )));
    }
    let dom = state0.domain.clone();
    let mut state = state0.clone();
    state.spinor = TwistedSpinorField::zero(dom.len());
    let mut rec = Recorder::new(cfg);
    let mut step = 0;
    loop {
        let res = residuals(&state)?;
        rec.record(step, &state, res.norms)?;
        if res.norms.1 <= cfg.tol_residual {
            return Ok(rec.finish(state, FlowStatus::Converged));
        }
        if step >= cfg.max_steps {
            return Ok(rec.finish(state, FlowStatus::MaxSteps));
        }
        let e0 = higgs_energy(&dom, &state.gauge, &state.section)?;
        let next = backtrack(e0, cfg.dt, |dt| {
            let s = step_section(&state, &res.res_u, dt);
            let e = higgs_energy(&dom, &s.gauge, &s.section)?;
            Ok((s, e))
        })?;
        match next {
            Some((s, _)) => state = s,
            None => return Ok(rec.finish(state, FlowStatus::Stagnated)),
        }
        step += 1;
    }
}

/// One descent step on A and then on u for the full action at fixed ψ.
/// A component whose residual is already below `tol` is left alone.
/// Returns `None` if a needed line search fails.
fn descent_step(state: &FieldState, cfg: &FlowConfig, tol: f64) -> Result<Option<FieldState>> {
    let dom = &state.domain;
    let mut cur = state.clone();
    let ra = residual_a(&cur)?;
    let mut moved = false;
    if ra.l2_norm_sq(dom, &cur.model).sqrt() > tol {
        let e0 = action_total(&cur)?.total;
        let next = backtrack(e0, cfg.dt, |dt| {
            let mut s = cur.clone();
            s.gauge = cur.gauge.axpy(-dt, &ra);
            let e = action_total(&s)?.total;
            Ok((s, e))
        })?;
        match next {
            Some((s, _)) => {
                cur = s;
                moved = true;
            }
            None => return Ok(None),
        }
    }
    let ru = residual_u(&cur)?;
    if l2_vectors(dom, &ru) > tol {
        let e0 = action_total(&cur)?.total;
        let next = backtrack(e0, cfg.dt, |dt| {
            let s = step_section(&cur, &ru, dt);
            let e = action_total(&s)?.total;
            Ok((s, e))
        })?;
        match next {
            Some((s, _)) => {
                cur = s;
                moved = true;
            }
            None => return Ok(None),
        }
    }
    if !moved {
        return Ok(None);
    }
    Ok(Some(cur))
}

/// Yang–Mills–Higgs gradient flow on (A, u) with ψ = 0 and separate line
/// searches for A and u. Stops when both residuals are below
/// `tol_residual`.
pub fn coupled_flow(state0: &FieldState, cfg: &FlowConfig) -> Result<FlowOutcome> {
    cfg.validate()?;
    if !state0.spinor.is_zero() {
        return Err(YmhdError::domain("coupled flow requires psi = 0"));
    }
    let mut state = state0.clone();
    let mut rec = Recorder::new(cfg);
    let mut step = 0;
    loop {
        let norms = residuals(&state)?.norms;
        rec.record(step, &state, norms)?;
        if norms.0.max(norms.1) <= cfg.tol_residual {
            return Ok(rec.finish(state, FlowStatus::Converged));
        }
        if step >= cfg.max_steps {
            return Ok(rec.finish(state, FlowStatus::MaxSteps));
        }
        match descent_step(&state, cfg, cfg.tol_residual)? {
            Some(s) => state = s,
            None => return Ok(rec.finish(state, FlowStatus::Stagnated)),
        }
        step += 1;
    }
}

/// Alternates eigenmode updates of ψ with descent on (A, u) at fixed ψ.
/// Each outer iteration replaces ψ by the lowest-|λ| eigenmode of D with
/// L⁴ norm `psi_norm`, records the residual norms and a snapshot, then takes
/// up to `inner_steps` descent steps. With `psi_norm = 0` this is
/// [`coupled_flow`] on the state with ψ removed.
pub fn alternating_search(state0: &FieldState, cfg: &FlowConfig) -> Result<FlowOutcome> {
    cfg.validate()?;
    if cfg.psi_norm == 0.0 {
        let mut s = state0.clone();
        s.spinor = TwistedSpinorField::zero(s.domain.len());
        return coupled_flow(&s, cfg);
    }
    let dom = state0.domain.clone();
    let mut state = state0.clone();
    let mut rec = Recorder::new(cfg);
    let opts = EigenOptions {
        seed: cfg.seed,
        ..EigenOptions::default()
    };
    let mut outer = 0;
    loop {
        let eig = dirac_eigenmode(&dom, &state.gauge, &state.section, 0, cfg.psi_norm, &opts)?;
        state.spinor = eig.psi;
        let norms = residuals(&state)?.norms;
        rec.record(outer, &state, norms)?;
        if norms.0.max(norms.1).max(norms.2) <= cfg.tol_residual {
            return Ok(rec.finish(state, FlowStatus::Converged));
        }
        if outer >= cfg.max_steps {
            return Ok(rec.finish(state, FlowStatus::MaxSteps));
        }
        let mut phase = vec![action_total(&state)?.total];
        for _ in 0..cfg.inner_steps {
            match descent_step(&state, cfg, 0.1 * cfg.tol_residual)? {
                Some(s) => {
                    state = s;
                    phase.push(action_total(&state)?.total);
                }
                None => break,
            }
        }
        rec.trace.phases.push(phase);
        outer += 1;
    }
}

/// Runs the flow selected by `cfg.mode`.
pub fn run_flow(state0: &FieldState, cfg: &FlowConfig) -> Result<FlowOutcome> {
    match cfg.mode {
        FlowMode::HarmonicSectionFlow => heat_flow_harmonic_section(state0, cfg),
        FlowMode::CoupledFlow => {
            let mut s = state0.clone();
            s.spinor = TwistedSpinorField::zero(s.domain.len());
            coupled_flow(&s, cfg)
        }
        FlowMode::AlternatingDirac => alternating_search(state0, cfg),
    }
}

// ---------------------------------------------------------------------------
// Eigensolver

#[derive(Clone, Debug, PartialEq)]
pub struct EigenOptions {
    /// Required `‖Dψ − λψ‖ / ‖ψ‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested modes.
    pub guard: usize,
    /// Shift `s` in `(D² + s)⁻¹`; defaults to `1/L²`.
    pub shift: Option<f64>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_iter: 300,
            guard: 8,
            shift: None,
            cg_tol: 1e-12,
            cg_max_iter: 4000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda: f64,
    pub psi: TwistedSpinorField,
    /// `‖Dψ − λψ‖_{L²} / ‖ψ‖_{L²}`.
    pub residual: f64,
}

fn vdot(a: &[Spinor], b: &[Spinor]) -> C64 {
    a.iter().zip(b).map(|(x, y)| spinor_dot(x, y)).sum()
}

fn vnorm(a: &[Spinor]) -> f64 {
    a.iter().map(spinor_norm_sq).sum::<f64>().sqrt()
}

fn vaxpy(y: &mut [Spinor], alpha: C64, x: &[Spinor]) {
    for (p, q) in y.iter_mut().zip(x) {
        p[0] += q[0] * alpha;
        p[1] += q[1] * alpha;
    }
}

fn vscale(x: &mut [Spinor], alpha: C64) {
    for p in x.iter_mut() {
        p[0] *= alpha;
        p[1] *= alpha;
    }
}

fn combine(basis: &[Vec<Spinor>], coeffs: &DMatrix<C64>, col: usize) -> Vec<Spinor> {
    let mut out = vec![spinor_zero(); basis[0].len()];
    for (i, b) in basis.iter().enumerate() {
        vaxpy(&mut out, coeffs[(i, col)], b);
    }
    out
}

/// Conjugate gradients for `(D² + s) x = b`; stops at relative residual
/// `tol` or after `max_iter` iterations. Inexact solves are fine for the
/// subspace iteration, so the final residual is not reported.
fn cg_shifted<D>(
    apply_d: &D,
    s: f64,
    b: &[Spinor],
    x0: Vec<Spinor>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Spinor>>
where
    D: Fn(&[Spinor]) -> Result<Vec<Spinor>>,
{
    let op = |x: &[Spinor]| -> Result<Vec<Spinor>> {
        let mut y = apply_d(&apply_d(x)?)?;
        vaxpy(&mut y, C64::new(s, 0.0), x);
        Ok(y)
    };
    let bn = vnorm(b);
    if bn == 0.0 {
        return Ok(vec![spinor_zero(); b.len()]);
    }
    let mut x = x0;
    let mut r = b.to_vec();
    vaxpy(&mut r, C64::new(-1.0, 0.0), &op(&x)?);
    let mut p = r.clone();
    let mut rr = vdot(&r, &r).re;
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * bn {
            break;
        }
        let ap = op(&p)?;
        let alpha = rr / vdot(&p, &ap).re;
        vaxpy(&mut x, C64::new(alpha, 0.0), &p);
        vaxpy(&mut r, C64::new(-alpha, 0.0), &ap);
        let rr_new = vdot(&r, &r).re;
        let beta = C64::new(rr_new / rr, 0.0);
        for (pi, ri) in p.iter_mut().zip(&r) {
            pi[0] = ri[0] + pi[0] * beta;
            pi[1] = ri[1] + pi[1] * beta;
        }
        rr = rr_new;
    }
    Ok(x)
}

/// `M_ij = ⟨a_i, b_j⟩`, symmetrized to be exactly Hermitian.
fn hermitian_gram(a: &[Vec<Spinor>], b: &[Vec<Spinor>]) -> DMatrix<C64> {
    let m = a.len();
    let mut h = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let val = vdot(&a[i], &b[j]);
            let sym = if i == j {
                C64::new(val.re, 0.0)
            } else {
                (val + vdot(&a[j], &b[i]).conj()) * 0.5
            };
            h[(i, j)] = sym;
            h[(j, i)] = sym.conj();
        }
    }
    h
}

/// Orthonormalizes tangent fields by Gram–Schmidt, repeating a pass while
/// it still removes more than half of the norm, and dropping vectors that
/// are numerically dependent on earlier ones. Each pass projects onto the
/// tangent space first: normalizing a small remainder would otherwise
/// magnify rounding in the normal directions, which lie in the kernel of
/// `P_u H`.
fn orthonormalize(u: &SectionField, vs: Vec<Vec<Spinor>>, drop_below: f64) -> Vec<Vec<Spinor>> {
    let mut out: Vec<Vec<Spinor>> = Vec::with_capacity(vs.len());
    for mut v in vs {
        let n0 = vnorm(&v);
        if n0 == 0.0 {
            continue;
        }
        let mut n = n0;
        for pass in 0..5 {
            for (p, y) in v.iter_mut().zip(u.values()) {
                *p = project_spinor(y, p);
            }
            for q in &out {
                let c = vdot(q, &v);
                vaxpy(&mut v, -c, q);
            }
            let n_new = vnorm(&v);
            let done = pass > 0 && n_new > 0.5 * n;
            n = n_new;
            if done || n <= drop_below * n0 {
                break;
            }
        }
        if n > drop_below * n0 {
            vscale(&mut v, C64::new(1.0 / n, 0.0));
            out.push(v);
        }
    }
    out
}

fn random_tangent_block(u: &SectionField, count: usize, seed: u64) -> Vec<Vec<Spinor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            u.values()
                .iter()
                .map(|y| {
                    let mut s = spinor_zero();
                    for c in 0..2 {
                        for k in 0..3 {
                            s[c][k] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        }
                    }
                    project_spinor(y, &s)
                })
                .collect()
        })
        .collect()
}

/// The `count` eigenpairs of the twisted Dirac operator on tangent fields
/// with smallest |λ|, sorted by |λ|, each with unit L² norm.
///
/// Block subspace iteration with `(D² + s)⁻¹` applied by conjugate
/// gradients, and Rayleigh–Ritz for `D²` on the span of `[W, DW]`. Ritz
/// values of the indefinite `D` itself are unreliable near 0 on a generic
/// subspace, so `D` is only diagonalized on `span[V, DV]` for the `D²` Ritz
/// block `V`, which is D-invariant once `V` has converged.
pub fn dirac_spectrum(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    count: usize,
    opts: &EigenOptions,
) -> Result<Vec<Eigenpair>> {
    if a.len() != dom.len() || u.len() != dom.len() {
        return Err(YmhdError::structural("fields do not match grid"));
    }
    let space = 4 * dom.len();
    if count == 0 || count > space {
        return Err(YmhdError::domain(format!(
            "requested {count} eigenpairs of an operator of dimension {space}"
        )));
    }
    let p = (count + opts.guard).min(space / 2).max(count);
    let inv_l2 = 1.0 / dom.length().powi(2);
    let mut shift = opts.shift.unwrap_or(inv_l2);
    let apply_d = |x: &[Spinor]| twisted_dirac_raw(dom, a, u, x);

    let mut v = orthonormalize(u, random_tangent_block(u, p, opts.seed), 1e-10);
    // D² Ritz values of `v`, used to warm-start the inner solves.
    let mut mu_v: Vec<f64> = vec![0.0; v.len()];
    // Per-vector relative D² residuals; they set the inner solve accuracy.
    let mut rel2: Vec<f64> = vec![1.0; v.len()];
    let mut worst = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let w: Vec<Vec<Spinor>> = v
            .iter()
            .zip(mu_v.iter().zip(&rel2))
            .map(|(x, (mu, rel))| {
                let mut x0 = x.clone();
                vscale(&mut x0, C64::new(1.0 / (mu.max(0.0) + shift), 0.0));
                let tol = (1e-2 * rel).clamp(opts.cg_tol, 1e-3);
                cg_shifted(&apply_d, shift, x, x0, tol, opts.cg_max_iter)
            })
            .collect::<Result<_>>()?;
        let dw: Vec<Vec<Spinor>> = w.iter().map(|x| apply_d(x)).collect::<Result<_>>()?;
        let q = orthonormalize(u, w.into_iter().chain(dw).collect(), 1e-10);
        let dq: Vec<Vec<Spinor>> = q.iter().map(|x| apply_d(x)).collect::<Result<_>>()?;
        let m = q.len();
        // Ritz pairs of D² (the target end of its spectrum is extremal).
        let g2 = hermitian_gram(&dq, &dq);
        let eig2 = g2.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| {
            eig2.eigenvalues[i]
                .partial_cmp(&eig2.eigenvalues[j])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        let keep = p.min(m);
        let mu: Vec<f64> = order.iter().map(|&c| eig2.eigenvalues[c]).collect();
        let nv: Vec<Vec<Spinor>> = order[..keep].iter().map(|&c| combine(&q, &eig2.eigenvectors, c)).collect();
        let ndv: Vec<Vec<Spinor>> = order[..keep].iter().map(|&c| combine(&dq, &eig2.eigenvectors, c)).collect();
        let mut r2 = Vec::with_capacity(keep);
        for j in 0..keep {
            let mut r = apply_d(&ndv[j])?;
            vaxpy(&mut r, C64::new(-mu[j], 0.0), &nv[j]);
            r2.push(vnorm(&r));
        }
        rel2 = (0..keep).map(|j| r2[j] / (mu[j].abs() + shift)).collect();
        // Once `nv` spans D² eigenvectors, span[nv, D nv] is D-invariant even
        // when a degenerate cluster is cut by the block edge. `D v` is left
        // out when it is below tolerance (v is then already a kernel vector)
        // and nearly dependent remainders are dropped, since normalizing
        // rounding noise would add spurious Ritz pairs.
        let extra = ndv.iter().zip(&mu).filter(|(_, m)| m.max(0.0).sqrt() > 0.1 * opts.tol).map(|(x, _)| x.clone());
        let z = orthonormalize(u, nv.iter().cloned().chain(extra).collect(), 1e-6);
        let dz: Vec<Vec<Spinor>> = z.iter().map(|x| apply_d(x)).collect::<Result<_>>()?;
        let hd = hermitian_gram(&z, &dz);
        let eig = hd.symmetric_eigen();
        let mut ord: Vec<usize> = (0..z.len()).collect();
        ord.sort_by(|&i, &j| {
            eig.eigenvalues[i]
                .abs()
                .partial_cmp(&eig.eigenvalues[j].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        // Accurate Ritz pairs only; their λ² must reproduce the D² Ritz values
        // so that no true mode is skipped.
        let mut pairs = Vec::with_capacity(count);
        let mut best_rejected = f64::INFINITY;
        for &col in &ord {
            if pairs.len() == count {
                break;
            }
            let lambda = eig.eigenvalues[col];
            let x = combine(&z, &eig.eigenvectors, col);
            let mut r = combine(&dz, &eig.eigenvectors, col);
            vaxpy(&mut r, C64::new(-lambda, 0.0), &x);
            let res = vnorm(&r) / vnorm(&x);
            if res <= 0.5 * opts.tol {
                pairs.push((lambda, x, res));
            } else {
                best_rejected = best_rejected.min(res);
            }
        }
        let consistent = pairs.len() == count
            && pairs.iter().zip(mu.iter().zip(&r2)).all(|((l, _, _), (m, e))| {
                (l * l - m).abs() <= 4.0 * opts.tol * (l.abs() + opts.tol) + 4.0 * e
            });
        worst = if consistent {
            pairs.iter().map(|p| p.2).fold(0.0, f64::max)
        } else {
            best_rejected.max(opts.tol)
        };
        let pairs: Vec<(f64, Vec<Spinor>)> = pairs.into_iter().map(|(l, x, _)| (l, x)).collect();
        if worst <= 0.5 * opts.tol {
            // Confirm with fresh operator applications.
            let mut out = Vec::with_capacity(count);
            let mut confirmed = 0.0_f64;
            for (lambda, x) in pairs {
                let mut r = apply_d(&x)?;
                vaxpy(&mut r, C64::new(-lambda, 0.0), &x);
                let rel = vnorm(&r) / vnorm(&x);
                confirmed = confirmed.max(rel);
                let scale = 1.0 / (vnorm(&x) * dom.h());
                let mut psi = x;
                vscale(&mut psi, C64::new(scale, 0.0));
                out.push(Eigenpair {
                    lambda,
                    psi: TwistedSpinorField::from_parts(psi),
                    residual: rel,
                });
            }
            if confirmed <= opts.tol {
                return Ok(out);
            }
            worst = confirmed;
        }
        if iter == opts.max_iter {
            break;
        }
        mu_v = mu[..nv.len()].to_vec();
        if opts.shift.is_none() {
            // Shift-invert works best with s below the block's largest μ;
            // the floor keeps the inner solves well conditioned.
            shift = (0.25 * mu[keep - 1]).clamp(1e-2 * inv_l2, inv_l2);
        }
        v = nv;
    }
    Err(YmhdError::Convergence {
        what: "Dirac eigensolver".into(),
        residual: worst,
        iterations: opts.max_iter,
    })
}

/// The `k`-th (0-based) smallest-|λ| eigenpair, with ψ scaled to L⁴ norm
/// `psi_norm`.
pub fn dirac_eigenmode(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    k: usize,
    psi_norm: f64,
    opts: &EigenOptions,
) -> Result<Eigenpair> {
    if !(psi_norm > 0.0) {
        return Err(YmhdError::domain("psi_norm must be positive"));
    }
    let mut pairs = dirac_spectrum(dom, a, u, k + 1, opts)?;
    let e = pairs.swap_remove(k);
    let l4 = e.psi.l4_pow4(dom).powf(0.25);
    Ok(Eigenpair {
        lambda: e.lambda,
        psi: e.psi.scaled(psi_norm / l4),
        residual: e.residual,
    })
}
