//! Field containers, gauge transformations, curvature, the vertical
//! differential and Coulomb gauge fixing.
//!
//! The gauge action in the fixed trivialization is
//!
//! ```text
//! A'_α = Ad_{g⁻¹} A_α + MC_α(g),   u' = μ_{g⁻¹} u,   ψ' = dμ_{g⁻¹} ψ,
//! MC_α(g)(n) = [log(g(n)⁻¹ g(n+e_α)) + log(g(n−e_α)⁻¹ g(n))] / 2h,
//! ```
//!
//! where `MC` is a second-order discretization of `g⁻¹ dg` that vanishes
//! exactly for constant `g` and equals `i·d0 θ` for `g = e^{iθ}` whenever
//! neighbouring phases differ by less than π.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Result, YmhdError};
use crate::geometry::{codiff1, d0, diff, node_map, poisson_solve, Domain, OneForm};
use crate::lie::{
    project, project_c, FiberPoint, Group, GroupElement, LieAlgebraElement, Model,
};

type C64 = Complex64;

/// One twisted spinor value: two spinor components, each an ambient complex
/// vector in C³ tangent to the fiber at the base point.
pub type Spinor = [Vector3<C64>; 2];

const SECTION_TOL: f64 = 1e-10;
const TANGENCY_TOL: f64 = 1e-10;

#[inline]
pub fn spinor_zero() -> Spinor {
    [Vector3::zeros(), Vector3::zeros()]
}

/// Hermitian product `Σ_s Σ_k conj(a_sk) b_sk`.
#[inline]
pub fn spinor_dot(a: &Spinor, b: &Spinor) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for c in 0..2 {
        for k in 0..3 {
            s += a[c][k].conj() * b[c][k];
        }
    }
    s
}

#[inline]
pub fn spinor_norm_sq(a: &Spinor) -> f64 {
    a[0].norm_squared() + a[1].norm_squared()
}

/// Largest `|⟨ψ_s, u⟩|` relative to `max(1, |ψ|)`.
#[inline]
pub fn tangency_defect(psi: &Spinor, u: &Vector3<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..2 {
        let d = psi[c][0] * u[0] + psi[c][1] * u[1] + psi[c][2] * u[2];
        worst = worst.max(d.norm());
    }
    worst / spinor_norm_sq(psi).sqrt().max(1.0)
}

#[inline]
pub fn project_spinor(u: &Vector3<f64>, psi: &Spinor) -> Spinor {
    [project_c(u, &psi[0]), project_c(u, &psi[1])]
}

/// Connection one-form with values in 𝔤.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeField {
    group: Group,
    comps: OneForm<LieAlgebraElement>,
}

impl GaugeField {
    pub fn zero(group: Group, len: usize) -> Self {
        let z = LieAlgebraElement::zero(group);
        GaugeField {
            group,
            comps: [vec![z; len], vec![z; len]],
        }
    }

    pub fn new(group: Group, comps: OneForm<LieAlgebraElement>) -> Result<Self> {
        if comps[0].len() != comps[1].len() {
            return Err(YmhdError::structural("gauge field components differ in length"));
        }
        if comps.iter().flatten().any(|x| x.group() != group) {
            return Err(YmhdError::structural(format!(
                "gauge field values must lie in {}",
                group.name()
            )));
        }
        if comps.iter().flatten().any(|x| !x.is_valid(1e-12)) {
            return Err(YmhdError::domain("gauge field value is not anti-Hermitian"));
        }
        Ok(GaugeField { group, comps })
    }

    /// Builds a field from algebra coordinates `f(x, y) = [coords_x, coords_y]`.
    pub fn from_fn<F>(dom: &Domain, group: Group, f: F) -> Self
    where
        F: Fn(f64, f64) -> [[f64; 3]; 2] + Sync,
    {
        let vals = dom.sample(|x, y| f(x, y));
        let d = group.dim();
        GaugeField {
            group,
            comps: [
                vals.iter().map(|v| LieAlgebraElement::from_coords(group, &v[0][..d])).collect(),
                vals.iter().map(|v| LieAlgebraElement::from_coords(group, &v[1][..d])).collect(),
            ],
        }
    }

    pub(crate) fn from_parts(group: Group, comps: OneForm<LieAlgebraElement>) -> Self {
        GaugeField { group, comps }
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps[0].is_empty()
    }

    pub fn comps(&self) -> &OneForm<LieAlgebraElement> {
        &self.comps
    }

    pub fn comp(&self, dir: usize) -> &[LieAlgebraElement] {
        &self.comps[dir]
    }

    /// `self + t·other`.
    pub fn axpy(&self, t: f64, other: &GaugeField) -> GaugeField {
        let f = |d: usize| -> Vec<LieAlgebraElement> {
            self.comps[d]
                .iter()
                .zip(&other.comps[d])
                .map(|(a, b)| *a + *b * t)
                .collect()
        };
        GaugeField {
            group: self.group,
            comps: [f(0), f(1)],
        }
    }

    pub fn scaled(&self, t: f64) -> GaugeField {
        GaugeField {
            group: self.group,
            comps: [
                self.comps[0].iter().map(|a| *a * t).collect(),
                self.comps[1].iter().map(|a| *a * t).collect(),
            ],
        }
    }

    /// Flat grid norm `h² Σ_n Σ_α ⟨A_α, A_α⟩`.
    pub fn l2_norm_sq(&self, dom: &Domain, model: &Model) -> f64 {
        let h2 = dom.h() * dom.h();
        h2 * self
            .comps
            .iter()
            .flatten()
            .map(|a| model.norm_sq(a))
            .sum::<f64>()
    }

    /// Flat grid pairing `h² Σ ⟨A_α, B_α⟩`.
    pub fn inner(&self, other: &GaugeField, dom: &Domain, model: &Model) -> f64 {
        let h2 = dom.h() * dom.h();
        h2 * self
            .comps
            .iter()
            .flatten()
            .zip(other.comps.iter().flatten())
            .map(|(a, b)| model.inner(a, b))
            .sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .map(|a| a.max_abs())
            .fold(0.0, f64::max)
    }

    /// Algebra coordinates of component `dir`, coordinate `a`.
    pub fn coordinate(&self, dir: usize, a: usize) -> Vec<f64> {
        self.comps[dir].iter().map(|x| x.coords()[a]).collect()
    }
}

/// Section of the fiber bundle in the fixed trivialization: a map into S².
#[derive(Clone, Debug, PartialEq)]
pub struct SectionField {
    u: Vec<Vector3<f64>>,
}

impl SectionField {
    pub fn new(u: Vec<Vector3<f64>>) -> Result<Self> {
        for (k, v) in u.iter().enumerate() {
            if !((v.norm() - 1.0).abs() <= SECTION_TOL) {
                return Err(YmhdError::domain(format!(
                    "section value at node {k} has norm {}",
                    v.norm()
                )));
            }
        }
        Ok(SectionField { u })
    }

    /// Normalizes every value onto the sphere.
    pub fn normalized(u: Vec<Vector3<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(u.len());
        for v in u {
            out.push(*FiberPoint::normalized(v)?.coords());
        }
        Ok(SectionField { u: out })
    }

    pub fn constant(len: usize, y: &FiberPoint) -> Self {
        SectionField {
            u: vec![*y.coords(); len],
        }
    }

    pub fn from_fn<F>(dom: &Domain, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Vector3<f64> + Sync,
    {
        SectionField::normalized(dom.sample(f))
    }

    pub(crate) fn from_parts(u: Vec<Vector3<f64>>) -> Self {
        SectionField { u }
    }

    pub fn values(&self) -> &[Vector3<f64>] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn point(&self, k: usize) -> FiberPoint {
        FiberPoint::normalized(self.u[k]).expect("section values are unit vectors")
    }
}

/// Twisted spinor field: per node, a [`Spinor`] tangent to the fiber at `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistedSpinorField {
    psi: Vec<Spinor>,
}

impl TwistedSpinorField {
    pub fn zero(len: usize) -> Self {
        TwistedSpinorField {
            psi: vec![spinor_zero(); len],
        }
    }

    /// Checks tangency against `u` node by node.
    pub fn new(psi: Vec<Spinor>, u: &SectionField) -> Result<Self> {
        if psi.len() != u.len() {
            return Err(YmhdError::structural("spinor and section lengths differ"));
        }
        let s = TwistedSpinorField { psi };
        s.check_tangent(u)?;
        Ok(s)
    }

    /// Projects every component onto the tangent plane at `u`.
    pub fn projected(psi: Vec<Spinor>, u: &SectionField) -> Result<Self> {
        if psi.len() != u.len() {
            return Err(YmhdError::structural("spinor and section lengths differ"));
        }
        Ok(TwistedSpinorField {
            psi: psi
                .iter()
                .zip(u.values())
                .map(|(p, y)| project_spinor(y, p))
                .collect(),
        })
    }

    pub(crate) fn from_parts(psi: Vec<Spinor>) -> Self {
        TwistedSpinorField { psi }
    }

    pub fn check_tangent(&self, u: &SectionField) -> Result<()> {
        for (k, (p, y)) in self.psi.iter().zip(u.values()).enumerate() {
            let d = tangency_defect(p, y);
            if d > TANGENCY_TOL {
                return Err(YmhdError::domain(format!(
                    "spinor not tangent at node {k}: defect {d:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[Spinor] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.psi.iter().all(|p| spinor_norm_sq(p) == 0.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        let c = C64::new(t, 0.0);
        TwistedSpinorField {
            psi: self.psi.iter().map(|p| [p[0] * c, p[1] * c]).collect(),
        }
    }

    /// Flat `h² Σ |ψ|²`.
    pub fn l2_norm_sq(&self, dom: &Domain) -> f64 {
        dom.h() * dom.h() * self.psi.iter().map(spinor_norm_sq).sum::<f64>()
    }

    /// `h² Σ |ψ|⁴`.
    pub fn l4_pow4(&self, dom: &Domain) -> f64 {
        dom.h()
            * dom.h()
            * self
                .psi
                .iter()
                .map(|p| spinor_norm_sq(p).powi(2))
                .sum::<f64>()
    }

    /// Flat Hermitian pairing `h² Σ ⟨a, b⟩`.
    pub fn inner(&self, other: &TwistedSpinorField, dom: &Domain) -> C64 {
        let s: C64 = self
            .psi
            .iter()
            .zip(&other.psi)
            .map(|(a, b)| spinor_dot(a, b))
            .sum();
        s * (dom.h() * dom.h())
    }
}

/// Pointwise group-valued gauge transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeTransformation {
    g: Vec<GroupElement>,
}

impl GaugeTransformation {
    pub fn identity(group: Group, len: usize) -> Self {
        GaugeTransformation {
            g: vec![GroupElement::identity(group); len],
        }
    }

    pub fn new(g: Vec<GroupElement>) -> Result<Self> {
        if let Some(first) = g.first() {
            let group = first.group();
            if g.iter().any(|x| x.group() != group) {
                return Err(YmhdError::structural("mixed groups in gauge transformation"));
            }
        }
        if g.iter().any(|x| !x.is_valid(1e-12)) {
            return Err(YmhdError::domain("gauge transformation value is not unitary"));
        }
        Ok(GaugeTransformation { g })
    }

    pub fn constant(g: GroupElement, len: usize) -> Self {
        GaugeTransformation { g: vec![g; len] }
    }

    /// `g(x, y) = exp(ξ(x, y))` from algebra coordinates.
    pub fn exp_of<F>(dom: &Domain, group: Group, f: F) -> Self
    where
        F: Fn(f64, f64) -> [f64; 3] + Sync,
    {
        let d = group.dim();
        GaugeTransformation {
            g: dom.sample(|x, y| GroupElement::exp(&LieAlgebraElement::from_coords(group, &f(x, y)[..d]))),
        }
    }

    pub fn values(&self) -> &[GroupElement] {
        &self.g
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Pointwise product `self · other`.
    pub fn compose(&self, other: &GaugeTransformation) -> GaugeTransformation {
        GaugeTransformation {
            g: self.g.iter().zip(&other.g).map(|(a, b)| a.mul(b)).collect(),
        }
    }
}

/// The triple (A, u, ψ) together with the grid and the algebra model.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub domain: Domain,
    pub model: Model,
    pub gauge: GaugeField,
    pub section: SectionField,
    pub spinor: TwistedSpinorField,
}

impl FieldState {
    pub fn new(
        domain: Domain,
        model: Model,
        gauge: GaugeField,
        section: SectionField,
        spinor: TwistedSpinorField,
    ) -> Result<Self> {
        let n = domain.len();
        if gauge.len() != n || section.len() != n || spinor.len() != n {
            return Err(YmhdError::structural(format!(
                "field lengths ({}, {}, {}) do not match grid of {n} nodes",
                gauge.len(),
                section.len(),
                spinor.len()
            )));
        }
        if gauge.group() != model.group {
            return Err(YmhdError::structural(format!(
                "gauge field lives in {} but model is {}",
                gauge.group().name(),
                model.group.name()
            )));
        }
        spinor.check_tangent(&section)?;
        Ok(FieldState {
            domain,
            model,
            gauge,
            section,
            spinor,
        })
    }

    /// A = 0, constant u = y, ψ = 0.
    pub fn vacuum(domain: Domain, model: Model, y: &FiberPoint) -> Self {
        let n = domain.len();
        FieldState {
            gauge: GaugeField::zero(model.group, n),
            section: SectionField::constant(n, y),
            spinor: TwistedSpinorField::zero(n),
            domain,
            model,
        }
    }

    pub fn group(&self) -> Group {
        self.model.group
    }
}

/// `F₁₂ = D_x A_y − D_y A_x + [A_x, A_y]`.
pub fn curvature(dom: &Domain, a: &GaugeField) -> Result<Vec<LieAlgebraElement>> {
    if a.len() != dom.len() {
        return Err(YmhdError::structural("gauge field does not match grid"));
    }
    let [ax, ay] = a.comps();
    Ok(node_map(dom.len(), |k| {
        diff(dom, ay, 0, k) - diff(dom, ax, 1, k) + ax[k].bracket_unchecked(&ay[k])
    }))
}

/// `D_α u + L_{A_α} u` without tangential projection. This is the quantity
/// whose square is integrated in the Higgs energy.
pub fn vertical_differential_ambient(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
) -> Result<OneForm<Vector3<f64>>> {
    if a.len() != dom.len() || u.len() != dom.len() {
        return Err(YmhdError::structural("fields do not match grid"));
    }
    let uv = u.values();
    let comp = |dir: usize| {
        node_map(dom.len(), |k| {
            diff(dom, uv, dir, k) + a.comp(dir)[k].generator() * uv[k]
        })
    };
    Ok([comp(0), comp(1)])
}

/// `d_A u = du + dμ_u(A)`, re-projected onto the tangent plane at `u`.
pub fn vertical_differential(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
) -> Result<OneForm<Vector3<f64>>> {
    let mut v = vertical_differential_ambient(dom, a, u)?;
    for dir in 0..2 {
        for (w, y) in v[dir].iter_mut().zip(u.values()) {
            *w = project(y, w);
        }
    }
    Ok(v)
}

fn mc_term(g0: &GroupElement, g1: &GroupElement) -> LieAlgebraElement {
    if g0 == g1 {
        LieAlgebraElement::zero(g0.group())
    } else {
        g0.inverse().mul(g1).log()
    }
}

/// `Ad_{g⁻¹} A + MC(g)`.
pub fn gauge_connection(
    dom: &Domain,
    g: &GaugeTransformation,
    a: &GaugeField,
) -> Result<GaugeField> {
    if g.len() != dom.len() || a.len() != dom.len() {
        return Err(YmhdError::structural("gauge transformation does not match grid"));
    }
    if let Some(first) = g.values().first() {
        if first.group() != a.group() {
            return Err(YmhdError::structural("gauge transformation and connection groups differ"));
        }
    }
    let gv = g.values();
    let inv_2h = 0.5 / dom.h();
    let comp = |dir: usize| {
        node_map(dom.len(), |k| {
            let p = dom.shift(k, dir, 1);
            let m = dom.shift(k, dir, -1);
            let ginv = gv[k].inverse();
            let mc = (mc_term(&gv[k], &gv[p]) + mc_term(&gv[m], &gv[k])) * inv_2h;
            ginv.ad(&a.comp(dir)[k]) + mc
        })
    };
    Ok(GaugeField::from_parts(a.group(), [comp(0), comp(1)]))
}

/// Applies a gauge transformation to all three fields.
pub fn apply_gauge(g: &GaugeTransformation, state: &FieldState) -> Result<FieldState> {
    let dom = &state.domain;
    let gauge = gauge_connection(dom, g, &state.gauge)?;
    let rots: Vec<_> = node_map(dom.len(), |k| g.values()[k].rotation().transpose());
    let u: Vec<Vector3<f64>> = rots
        .iter()
        .zip(state.section.values())
        .map(|(r, y)| {
            let v = r * y;
            v / v.norm()
        })
        .collect();
    let psi: Vec<Spinor> = rots
        .iter()
        .zip(state.spinor.values())
        .map(|(r, p)| {
            let rc = r.map(|x| C64::new(x, 0.0));
            [rc * p[0], rc * p[1]]
        })
        .collect();
    Ok(FieldState {
        domain: state.domain.clone(),
        model: state.model,
        gauge,
        section: SectionField::from_parts(u),
        spinor: TwistedSpinorField::from_parts(psi),
    })
}

/// Abelian Coulomb gauge: returns `g = e^{iθ}` and `A' = A + i·d0 θ` with
/// `codiff1(A') = 0`, where `θ` solves `Σ D_α D_α θ = codiff1(A/i)` and has
/// zero mean.
pub fn coulomb_fix_abelian(
    dom: &Domain,
    a: &GaugeField,
) -> Result<(GaugeTransformation, GaugeField)> {
    if a.group() != Group::U1 {
        return Err(YmhdError::Unsupported(format!(
            "abelian Coulomb gauge fixing needs u1, got {}; use the descent method",
            a.group().name()
        )));
    }
    if a.len() != dom.len() {
        return Err(YmhdError::structural("gauge field does not match grid"));
    }
    let real = [a.coordinate(0, 0), a.coordinate(1, 0)];
    let c = codiff1(dom, &real)?;
    let theta = poisson_solve(dom, &c)?;
    let dt = d0(dom, &theta)?;
    let comps = [0, 1].map(|dir| {
        real[dir]
            .iter()
            .zip(&dt[dir])
            .map(|(x, y)| LieAlgebraElement::from_coords(Group::U1, &[x + y]))
            .collect::<Vec<_>>()
    });
    let g = GaugeTransformation {
        g: theta.iter().map(|&t| GroupElement::phase(t)).collect(),
    };
    Ok((g, GaugeField::from_parts(Group::U1, comps)))
}

/// Settings for [`coulomb_fix_descent`].
#[derive(Clone, Copy, Debug)]
pub struct DescentOptions {
    /// Stop once `‖codiff1 A‖_∞ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Result of [`coulomb_fix_descent`].
#[derive(Clone, Debug)]
pub struct CoulombDescent {
    pub gauge: GaugeTransformation,
    pub connection: GaugeField,
    /// `‖A^g‖²` after each accepted step, starting with the input.
    pub history: Vec<f64>,
    /// Final `‖codiff1 A^g‖_∞`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CoulombDescent {
    /// Turns a non-converged run into a convergence error.
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(YmhdError::Convergence {
                what: "Coulomb gauge descent".into(),
                residual: self.residual,
                iterations: self.iterations,
            })
        }
    }
}

fn codiff_coords(dom: &Domain, a: &GaugeField) -> Result<Vec<[f64; 3]>> {
    let d = a.group().dim();
    let mut out = vec![[0.0; 3]; dom.len()];
    for c in 0..d {
        let comp = [a.coordinate(0, c), a.coordinate(1, c)];
        for (o, v) in out.iter_mut().zip(codiff1(dom, &comp)?) {
            o[c] = v;
        }
    }
    Ok(out)
}

/// `‖d*A‖_∞` over all algebra coordinates.
pub fn coulomb_residual(dom: &Domain, a: &GaugeField) -> Result<f64> {
    if a.len() != dom.len() {
        return Err(YmhdError::structural("gauge field does not match grid"));
    }
    Ok(codiff_coords(dom, a)?.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Minimizes `‖A^g‖²` over the gauge orbit by preconditioned gradient descent.
///
/// The first variation of `‖A^{exp(tX)}‖²` at `t = 0` is `2⟨codiff1 A, X⟩`.
/// Each step uses `X = Δ⁻¹ codiff1 A` (Fourier solve per algebra coordinate),
/// which is a descent direction, with backtracking by halving from `τ = 1`.
/// Accepted steps never increase the norm. For U(1) one full step lands on
/// the Coulomb gauge.
pub fn coulomb_fix_descent(
    dom: &Domain,
    model: &Model,
    a: &GaugeField,
    opts: DescentOptions,
) -> Result<CoulombDescent> {
    if a.len() != dom.len() {
        return Err(YmhdError::structural("gauge field does not match grid"));
    }
    let group = a.group();
    let dim = group.dim();
    let mut g = GaugeTransformation::identity(group, dom.len());
    let mut cur = a.clone();
    let mut norm = cur.l2_norm_sq(dom, model);
    let mut history = vec![norm];
    let mut iterations = 0;
    let sup = |c: &[[f64; 3]]| c.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let mut c = codiff_coords(dom, &cur)?;
    let mut residual = sup(&c);
    while residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let mut x = vec![[0.0; 3]; dom.len()];
        for k in 0..dim {
            let rhs: Vec<f64> = c.iter().map(|v| v[k]).collect();
            for (xo, v) in x.iter_mut().zip(poisson_solve(dom, &rhs)?) {
                xo[k] = v;
            }
        }
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let step = GaugeTransformation::exp_of_values(group, &x, tau);
            let trial = gauge_connection(dom, &step, &cur)?;
            let tn = trial.l2_norm_sq(dom, model);
            if tn <= norm {
                accepted = Some((step, trial, tn));
                break;
            }
            tau *= 0.5;
        }
        let Some((step, trial, tn)) = accepted else {
            break;
        };
        g = g.compose(&step);
        cur = trial;
        norm = tn;
        history.push(norm);
        c = codiff_coords(dom, &cur)?;
        residual = sup(&c);
    }
    Ok(CoulombDescent {
        gauge: g,
        connection: cur,
        history,
        residual,
        iterations,
        converged: residual <= opts.tol,
    })
}

impl GaugeTransformation {
    fn exp_of_values(group: Group, x: &[[f64; 3]], tau: f64) -> Self {
        let d = group.dim();
        GaugeTransformation {
            g: node_map(x.len(), |k| {
                let c: Vec<f64> = x[k][..d].iter().map(|v| v * tau).collect();
                GroupElement::exp(&LieAlgebraElement::from_coords(group, &c))
            }),
        }
    }
}
