//! Energy concentration diagnostics: ball energies, concentration scans over
//! snapshot sequences, the rescaling operators and bubble extraction.
//!
//! Ball membership is by torus distance of node centers with no partial-cell
//! weighting. Ball sums for many centers share per-row prefix sums of the
//! density, so one radius costs `O(N² ρ/h)`.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::action::{densities, higgs_density, Densities};
use crate::error::{Result, YmhdError};
use crate::fields::{
    project_spinor, spinor_norm_sq, FieldState, GaugeField, SectionField, Spinor,
    TwistedSpinorField,
};
use crate::geometry::{node_map, Domain};
use crate::lie::LieAlgebraElement;

type C64 = Complex64;

/// Default concentration threshold.
pub const DEFAULT_EPSILON0: f64 = 0.1;

/// Which energy density a ball integral uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnergyKind {
    Higgs,
    SpinorL4,
    YangMills,
}

impl EnergyKind {
    pub const ALL: [EnergyKind; 3] = [EnergyKind::Higgs, EnergyKind::SpinorL4, EnergyKind::YangMills];

    pub fn name(self) -> &'static str {
        match self {
            EnergyKind::Higgs => "higgs",
            EnergyKind::SpinorL4 => "spinor_l4",
            EnergyKind::YangMills => "yang_mills",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EnergyKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Concentration set label: S1 for the map, S2 for the spinor, S3 for
    /// the connection.
    pub fn set_label(self) -> &'static str {
        match self {
            EnergyKind::Higgs => "S1",
            EnergyKind::SpinorL4 => "S2",
            EnergyKind::YangMills => "S3",
        }
    }

    fn pick(self, d: &Densities) -> &[f64] {
        match self {
            EnergyKind::Higgs => &d.higgs,
            EnergyKind::SpinorL4 => &d.spinor_l4,
            EnergyKind::YangMills => &d.yang_mills,
        }
    }
}

/// A ball `B_radius(center)` and the density integrated over it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallEnergySpec {
    /// Grid node `(i, j)`.
    pub center: (usize, usize),
    pub radius: f64,
    pub which: EnergyKind,
}

fn check_radius(dom: &Domain, radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius <= 0.5 * dom.length() * (1.0 + 1e-12)) {
        return Err(YmhdError::domain(format!(
            "ball radius {radius} outside (0, {}]",
            0.5 * dom.length()
        )));
    }
    Ok(())
}

/// Distinct minimum-image offsets along one axis: `(−n/2, n/2]`.
fn offset_range(n: usize) -> (isize, isize) {
    (-(((n - 1) / 2) as isize), (n / 2) as isize)
}

/// Row offsets `di` and column half-ranges `[a, b]` of the nodes within
/// `radius` of a node.
fn ball_rows(dom: &Domain, radius: f64) -> Vec<(isize, isize, isize)> {
    let (lo, hi) = offset_range(dom.n());
    let r2 = (radius / dom.h()).powi(2) * (1.0 + 1e-12) + 1e-12;
    let mut rows = Vec::new();
    for di in lo..=hi {
        let rest = r2 - (di * di) as f64;
        if rest < 0.0 {
            continue;
        }
        let w = rest.sqrt().floor() as isize;
        rows.push((di, (-w).max(lo), w.min(hi)));
    }
    rows
}

/// Sorted distinct radii `h·√m` at which a ball gains nodes, up to `max`.
fn lattice_radii(dom: &Domain, max: f64) -> Vec<f64> {
    let (lo, hi) = offset_range(dom.n());
    let mut m: Vec<i64> = Vec::new();
    for di in lo..=hi {
        for dj in lo..=hi {
            m.push((di * di + dj * dj) as i64);
        }
    }
    m.sort_unstable();
    m.dedup();
    m.into_iter()
        .map(|v| dom.h() * (v as f64).sqrt())
        .filter(|&r| r > 0.0 && r <= max * (1.0 + 1e-12))
        .collect()
}

/// Prefix sums of a density along each row, over the doubled row so that
/// periodic ranges are a single difference.
pub struct BallSums<'a> {
    dom: &'a Domain,
    prefix: Vec<f64>,
}

impl<'a> BallSums<'a> {
    pub fn new(dom: &'a Domain, density: &[f64]) -> Result<Self> {
        if density.len() != dom.len() {
            return Err(YmhdError::structural("density does not match grid"));
        }
        let n = dom.n();
        let w = 2 * n + 1;
        let mut prefix = vec![0.0; n * w];
        for i in 0..n {
            let row = &density[i * n..(i + 1) * n];
            let p = &mut prefix[i * w..(i + 1) * w];
            for k in 0..2 * n {
                p[k + 1] = p[k] + row[k % n];
            }
        }
        Ok(BallSums { dom, prefix })
    }

    fn with_rows(&self, center: (usize, usize), rows: &[(isize, isize, isize)]) -> f64 {
        let n = self.dom.n();
        let w = 2 * n + 1;
        let (ci, cj) = (center.0 as isize, center.1 as isize);
        let mut s = 0.0;
        for &(di, a, b) in rows {
            let i = (ci + di).rem_euclid(n as isize) as usize;
            let start = (cj + a).rem_euclid(n as isize) as usize;
            let len = (b - a + 1) as usize;
            let p = &self.prefix[i * w..(i + 1) * w];
            s += p[start + len] - p[start];
        }
        s * self.dom.h() * self.dom.h()
    }

    /// Integral over `B_radius(center)`.
    pub fn ball(&self, center: (usize, usize), radius: f64) -> Result<f64> {
        check_radius(self.dom, radius)?;
        Ok(self.with_rows(center, &ball_rows(self.dom, radius)))
    }

    /// Integral over the ball of every node, in node order.
    pub fn all_centers(&self, radius: f64) -> Result<Vec<f64>> {
        check_radius(self.dom, radius)?;
        let rows = ball_rows(self.dom, radius);
        Ok(node_map(self.dom.len(), |k| self.with_rows(self.dom.ij(k), &rows)))
    }
}

/// Integral of `density` over the ball around node `center`.
pub fn ball_integral(dom: &Domain, density: &[f64], center: (usize, usize), radius: f64) -> Result<f64> {
    BallSums::new(dom, density)?.ball(center, radius)
}

pub fn ball_energy(state: &FieldState, spec: &BallEnergySpec) -> Result<f64> {
    let dom = &state.domain;
    if spec.center.0 >= dom.n() || spec.center.1 >= dom.n() {
        return Err(YmhdError::domain(format!(
            "ball center {:?} outside a grid of side {}",
            spec.center,
            dom.n()
        )));
    }
    let d = densities(state)?;
    ball_integral(dom, spec.which.pick(&d), spec.center, spec.radius)
}

/// Settings of [`concentration_scan`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub epsilon0: f64,
    /// Ascending radii in length units; the first one decides the flags.
    pub radii: Vec<f64>,
    /// Only nodes with `i` and `j` divisible by `stride` are scanned.
    pub stride: usize,
}

impl ScanConfig {
    pub fn new(epsilon0: f64, radii: Vec<f64>, stride: usize) -> Self {
        ScanConfig {
            epsilon0,
            radii,
            stride,
        }
    }

    /// `ε₀ = 0.1`, radii `L/64, L/32, L/16, L/8`, stride 1.
    pub fn default_for(length: f64) -> Self {
        ScanConfig {
            epsilon0: DEFAULT_EPSILON0,
            radii: vec![length / 64.0, length / 32.0, length / 16.0, length / 8.0],
            stride: 1,
        }
    }

    fn validate(&self, dom: &Domain) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0.is_finite()) {
            return Err(YmhdError::domain(format!("epsilon0 = {} must be positive", self.epsilon0)));
        }
        if self.radii.is_empty() {
            return Err(YmhdError::domain("no scan radii"));
        }
        if self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(YmhdError::domain("scan radii must be strictly increasing"));
        }
        if self.stride == 0 {
            return Err(YmhdError::domain("scan stride must be positive"));
        }
        for &r in &self.radii {
            check_radius(dom, r)?;
        }
        Ok(())
    }
}

/// One scanned (center, radius, energy type) value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub center: (usize, usize),
    pub radius: f64,
    pub kind: EnergyKind,
    /// Minimum over the tail half of the sequence.
    pub energy: f64,
    /// Whether the center is flagged for this energy type.
    pub flagged: bool,
}

/// A flagged cluster, represented by its node of largest energy.
#[derive(Clone, Debug, PartialEq)]
pub struct FlaggedPoint {
    pub center: (usize, usize),
    pub energy: f64,
    /// All flagged nodes of the cluster.
    pub members: Vec<(usize, usize)>,
}

/// Bubble parameters `(x_k, λ_k)` recovered from one snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bubble {
    pub snapshot: usize,
    pub center: (usize, usize),
    pub lambda: f64,
    /// Selection ball energy at `lambda`.
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub epsilon0: f64,
    pub radii: Vec<f64>,
    pub snapshots: usize,
    pub stride: usize,
    /// Flagged clusters indexed like [`EnergyKind::ALL`].
    pub sets: [Vec<FlaggedPoint>; 3],
    pub rows: Vec<ScanRow>,
    pub bubbles: Vec<Bubble>,
    pub warnings: Vec<String>,
}

impl ConcentrationReport {
    pub fn set(&self, kind: EnergyKind) -> &[FlaggedPoint] {
        let k = EnergyKind::ALL.iter().position(|&x| x == kind).unwrap();
        &self.sets[k]
    }

    /// Representative centers of a concentration set.
    pub fn centers(&self, kind: EnergyKind) -> Vec<(usize, usize)> {
        self.set(kind).iter().map(|p| p.center).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "center_i,center_j,radius,type,energy,flagged")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:.16e},{},{:.16e},{}",
                r.center.0,
                r.center.1,
                r.radius,
                r.kind.name(),
                r.energy,
                u8::from(r.flagged)
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "epsilon0 = {}", self.epsilon0);
        let _ = writeln!(s, "snapshots = {}", self.snapshots);
        let radii: Vec<String> = self.radii.iter().map(|r| format!("{r}")).collect();
        let _ = writeln!(s, "radii = {}", radii.join(", "));
        for (k, kind) in EnergyKind::ALL.iter().enumerate() {
            let _ = writeln!(s, "{} ({}): {} point(s)", kind.set_label(), kind.name(), self.sets[k].len());
            for p in &self.sets[k] {
                let _ = writeln!(
                    s,
                    "  ({}, {}) energy {:.6e} cluster {}",
                    p.center.0,
                    p.center.1,
                    p.energy,
                    p.members.len()
                );
            }
        }
        let _ = writeln!(s, "bubbles: {}", self.bubbles.len());
        for b in &self.bubbles {
            let _ = writeln!(
                s,
                "  snapshot {} center ({}, {}) lambda {:.6e}",
                b.snapshot, b.center.0, b.center.1, b.lambda
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

fn node_distance(dom: &Domain, a: (usize, usize), b: (usize, usize)) -> f64 {
    let n = dom.n() as isize;
    let d = |x: usize, y: usize| {
        let t = (x as isize - y as isize).rem_euclid(n);
        t.min(n - t) as f64
    };
    dom.h() * d(a.0, b.0).hypot(d(a.1, b.1))
}

/// Single-linkage clusters of `nodes` with link length `link`.
fn clusters(dom: &Domain, nodes: &[((usize, usize), f64)], link: f64) -> Vec<FlaggedPoint> {
    let m = nodes.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn root(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let tol = link * (1.0 + 1e-12);
    for a in 0..m {
        for b in a + 1..m {
            if node_distance(dom, nodes[a].0, nodes[b].0) <= tol {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut out: Vec<(usize, FlaggedPoint)> = Vec::new();
    for a in 0..m {
        let r = root(&mut parent, a);
        match out.iter_mut().find(|(k, _)| *k == r) {
            Some((_, p)) => {
                p.members.push(nodes[a].0);
                if nodes[a].1 > p.energy {
                    p.energy = nodes[a].1;
                    p.center = nodes[a].0;
                }
            }
            None => out.push((
                r,
                FlaggedPoint {
                    center: nodes[a].0,
                    energy: nodes[a].1,
                    members: vec![nodes[a].0],
                },
            )),
        }
    }
    out.into_iter().map(|(_, p)| p).collect()
}

fn check_sequence(snapshots: &[FieldState]) -> Result<&Domain> {
    let first = snapshots
        .first()
        .ok_or_else(|| YmhdError::structural("empty snapshot sequence"))?;
    for (k, s) in snapshots.iter().enumerate() {
        if !s.domain.same_grid(&first.domain) || s.group() != first.group() {
            return Err(YmhdError::structural(format!(
                "snapshot {k} does not match the grid or group of snapshot 0"
            )));
        }
    }
    Ok(&first.domain)
}

/// Scans the three ball energies over a snapshot sequence.
///
/// The liminf over the sequence is replaced by the minimum over its tail
/// half. A center is flagged for an energy type when that minimum reaches
/// `epsilon0` at the smallest radius. Flagged nodes closer than the smallest
/// radius are merged into one cluster.
pub fn concentration_scan(snapshots: &[FieldState], cfg: &ScanConfig) -> Result<ConcentrationReport> {
    let dom = check_sequence(snapshots)?;
    if snapshots.len() < 2 {
        return Err(YmhdError::structural(format!(
            "a concentration scan needs at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    cfg.validate(dom)?;
    let n = dom.n();
    let centers: Vec<(usize, usize)> = (0..n)
        .step_by(cfg.stride)
        .flat_map(|i| (0..n).step_by(cfg.stride).map(move |j| (i, j)))
        .collect();
    let tail = &snapshots[snapshots.len() / 2..];
    let row_sets: Vec<Vec<(isize, isize, isize)>> = cfg.radii.iter().map(|&r| ball_rows(dom, r)).collect();

    // min[kind][radius][center]
    let mut mins = vec![vec![vec![f64::INFINITY; centers.len()]; cfg.radii.len()]; 3];
    for s in tail {
        let d = densities(s)?;
        for (k, kind) in EnergyKind::ALL.iter().enumerate() {
            let sums = BallSums::new(dom, kind.pick(&d))?;
            for (ri, rows) in row_sets.iter().enumerate() {
                let vals = node_map(centers.len(), |c| sums.with_rows(centers[c], rows));
                for (m, v) in mins[k][ri].iter_mut().zip(vals) {
                    *m = m.min(v);
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(3 * cfg.radii.len() * centers.len());
    let mut sets: [Vec<FlaggedPoint>; 3] = Default::default();
    for (k, kind) in EnergyKind::ALL.iter().enumerate() {
        let flagged: Vec<bool> = mins[k][0].iter().map(|&e| e >= cfg.epsilon0).collect();
        for (c, &center) in centers.iter().enumerate() {
            for (ri, &radius) in cfg.radii.iter().enumerate() {
                rows.push(ScanRow {
                    center,
                    radius,
                    kind: *kind,
                    energy: mins[k][ri][c],
                    flagged: flagged[c],
                });
            }
        }
        let nodes: Vec<((usize, usize), f64)> = centers
            .iter()
            .zip(&mins[k][0])
            .zip(&flagged)
            .filter(|(_, &f)| f)
            .map(|((&c, &e), _)| (c, e))
            .collect();
        sets[k] = clusters(dom, &nodes, cfg.radii[0].max(cfg.stride as f64 * dom.h()));
    }

    let mut warnings = Vec::new();
    let link = cfg.radii[0].max(cfg.stride as f64 * dom.h()) * (1.0 + 1e-12);
    for p in &sets[1] {
        let covered = p.members.iter().any(|&a| {
            sets[0]
                .iter()
                .flat_map(|q| q.members.iter())
                .any(|&b| node_distance(dom, a, b) <= link)
        });
        if !covered {
            warnings.push(format!(
                "S2 not contained in S1: spinor concentration at ({}, {}) with energy {:.6e} has no map concentration nearby",
                p.center.0, p.center.1, p.energy
            ));
        }
    }
    for p in &sets[2] {
        warnings.push(format!(
            "S3 nonempty: connection concentration at ({}, {}) with energy {:.6e}",
            p.center.0, p.center.1, p.energy
        ));
    }

    let bubbles = if sets[0].is_empty() {
        Vec::new()
    } else {
        extract_bubble(snapshots, cfg.epsilon0)?
    };

    Ok(ConcentrationReport {
        epsilon0: cfg.epsilon0,
        radii: cfg.radii.clone(),
        snapshots: snapshots.len(),
        stride: cfg.stride,
        sets,
        rows,
        bubbles,
        warnings,
    })
}

/// Higgs plus `|ψ|⁴` density: the selection energy of bubble extraction.
pub fn selection_density(state: &FieldState) -> Result<Vec<f64>> {
    let d = densities(state)?;
    Ok(d.higgs.iter().zip(&d.spinor_l4).map(|(a, b)| a + b).collect())
}

/// Smallest lattice radius at which some ball of `density` holds `target`,
/// with the achieving center (lowest node index among ties).
fn select_scale(dom: &Domain, density: &[f64], target: f64) -> Result<Option<(f64, (usize, usize), f64)>> {
    let sums = BallSums::new(dom, density)?;
    let radii = lattice_radii(dom, 0.5 * dom.length());
    let best = |r: f64| -> (usize, f64) {
        let v = sums.with_rows_all(r);
        let mut k = 0;
        for (i, x) in v.iter().enumerate() {
            if *x > v[k] {
                k = i;
            }
        }
        (k, v[k])
    };
    if radii.is_empty() || best(*radii.last().unwrap()).1 < target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, radii.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if best(radii[mid]).1 >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let (k, e) = best(radii[hi]);
    Ok(Some((radii[hi], dom.ij(k), e)))
}

impl BallSums<'_> {
    fn with_rows_all(&self, radius: f64) -> Vec<f64> {
        let rows = ball_rows(self.dom, radius);
        node_map(self.dom.len(), |k| self.with_rows(self.dom.ij(k), &rows))
    }
}

/// Bubble scales by the maximal-ball rule: for each snapshot, `λ_k` is the
/// smallest radius at which the supremum over centers of the Higgs plus
/// `|ψ|⁴` ball energy reaches `ε₀/4`, and `x_k` is the achieving center.
/// Snapshots whose total selection energy stays below `ε₀/4` are skipped.
pub fn extract_bubble(snapshots: &[FieldState], epsilon0: f64) -> Result<Vec<Bubble>> {
    check_sequence(snapshots)?;
    if !(epsilon0 > 0.0) {
        return Err(YmhdError::domain(format!("epsilon0 = {epsilon0} must be positive")));
    }
    let mut out = Vec::new();
    for (k, s) in snapshots.iter().enumerate() {
        let d = selection_density(s)?;
        if let Some((lambda, center, energy)) = select_scale(&s.domain, &d, 0.25 * epsilon0)? {
            out.push(Bubble {
                snapshot: k,
                center,
                lambda,
                energy,
            });
        }
    }
    Ok(out)
}

/// Up to `max_bubbles` bubbles of one snapshot. After each selection the
/// density is cleared within `exclusion·λ` of the found center.
pub fn find_bubbles(state: &FieldState, epsilon0: f64, exclusion: f64, max_bubbles: usize) -> Result<Vec<Bubble>> {
    let dom = &state.domain;
    let mut d = selection_density(state)?;
    let mut out = Vec::new();
    while out.len() < max_bubbles {
        let Some((lambda, center, energy)) = select_scale(dom, &d, 0.25 * epsilon0)? else {
            break;
        };
        let reach = (exclusion * lambda).min(0.5 * dom.length());
        for (k, v) in d.iter_mut().enumerate() {
            if node_distance(dom, dom.ij(k), center) <= reach {
                *v = 0.0;
            }
        }
        out.push(Bubble {
            snapshot: 0,
            center,
            lambda,
            energy,
        });
    }
    Ok(out)
}

fn bilinear(dom: &Domain, x: f64, y: f64) -> [(usize, f64); 4] {
    let n = dom.n() as isize;
    let fx = (x / dom.h()).rem_euclid(n as f64);
    let fy = (y / dom.h()).rem_euclid(n as f64);
    let (i0, j0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - i0, fy - j0);
    let (i0, j0) = (i0 as isize, j0 as isize);
    [
        (dom.idx(i0, j0), (1.0 - tx) * (1.0 - ty)),
        (dom.idx(i0 + 1, j0), tx * (1.0 - ty)),
        (dom.idx(i0, j0 + 1), (1.0 - tx) * ty),
        (dom.idx(i0 + 1, j0 + 1), tx * ty),
    ]
}

/// Rescaled coordinates of a target node: the minimum image of its position,
/// so that target node 0 sits at the rescaling center.
fn rescaled_coords(target: &Domain, k: usize) -> (f64, f64) {
    let (x, y) = target.point(k);
    (target.periodic_delta(0.0, x), target.periodic_delta(0.0, y))
}

/// `A_r(x) = r·A(c + r x)`, `u_r(x) = u(c + r x)`, `ψ_r(x) = r^{1/2}·ψ(c + r x)`
/// sampled by bilinear interpolation on `target`, whose node 0 corresponds to
/// `center`. Interpolated sections are renormalized and spinors re-projected
/// onto the tangent planes.
pub fn rescale(state: &FieldState, center: (f64, f64), r: f64, target: &Domain) -> Result<FieldState> {
    let dom = &state.domain;
    if !(r > 0.0 && r < 1.0) {
        return Err(YmhdError::domain(format!("rescaling factor {r} outside (0, 1)")));
    }
    if r * target.length() > dom.length() * (1.0 + 1e-12) {
        return Err(YmhdError::domain(format!(
            "rescaled patch of side {} exceeds the domain side {}",
            r * target.length(),
            dom.length()
        )));
    }
    if !dom.is_flat() {
        return Err(YmhdError::Unsupported("rescaling a conformally weighted domain".into()));
    }
    let group = state.group();
    let stencils: Vec<[(usize, f64); 4]> = node_map(target.len(), |k| {
        let (x, y) = rescaled_coords(target, k);
        bilinear(dom, center.0 + r * x, center.1 + r * y)
    });
    let interp_alg = |vals: &[LieAlgebraElement]| -> Vec<LieAlgebraElement> {
        stencils
            .iter()
            .map(|st| {
                st.iter()
                    .fold(LieAlgebraElement::zero(group), |acc, &(k, w)| acc + vals[k] * (w * r))
            })
            .collect()
    };
    let gauge = GaugeField::new(group, [interp_alg(state.gauge.comp(0)), interp_alg(state.gauge.comp(1))])?;
    let u = state.section.values();
    let raw_u: Vec<Vector3<f64>> = stencils
        .iter()
        .map(|st| st.iter().fold(Vector3::zeros(), |acc, &(k, w)| acc + u[k] * w))
        .collect();
    if raw_u.iter().any(|v| v.norm() < 1e-8) {
        return Err(YmhdError::domain(
            "section interpolation degenerates: the grid is too coarse for the map",
        ));
    }
    let section = SectionField::normalized(raw_u)?;
    let psi = state.spinor.values();
    let s = C64::new(r.sqrt(), 0.0);
    let raw_psi: Vec<Spinor> = stencils
        .iter()
        .zip(section.values())
        .map(|(st, y)| {
            let mut acc: Spinor = [Vector3::zeros(), Vector3::zeros()];
            for &(k, w) in st {
                for c in 0..2 {
                    acc[c] += psi[k][c] * C64::new(w, 0.0);
                }
            }
            let p = project_spinor(y, &acc);
            [p[0] * s, p[1] * s]
        })
        .collect();
    let spinor = TwistedSpinorField::new(raw_psi, &section)?;
    FieldState::new(target.flat(), state.model, gauge, section, spinor)
}

/// The two sides of one scaling identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPair {
    /// Integral of the rescaled field over `B_R(0)`.
    pub rescaled: f64,
    /// Prediction from the original field over `B_{rR}(c)`, with the
    /// scaling exponent applied.
    pub predicted: f64,
}

impl ScalingPair {
    pub fn rel_error(&self) -> f64 {
        (self.rescaled - self.predicted).abs() / self.predicted.abs().max(1e-300)
    }
}

/// Higgs energy invariant, YM scaled by `r²`, `∫|ψ|²` scaled by `1/r`,
/// Dirac pairing invariant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingIdentities {
    pub higgs: ScalingPair,
    pub yang_mills: ScalingPair,
    pub spinor_l2: ScalingPair,
    pub dirac: ScalingPair,
}

impl ScalingIdentities {
    pub fn pairs(&self) -> [(&'static str, ScalingPair); 4] {
        [
            ("higgs", self.higgs),
            ("yang_mills", self.yang_mills),
            ("spinor_l2", self.spinor_l2),
            ("dirac", self.dirac),
        ]
    }

    pub fn max_rel_error(&self) -> f64 {
        self.pairs().iter().map(|(_, p)| p.rel_error()).fold(0.0, f64::max)
    }
}

/// Rescales around the node nearest to `center` and compares the four ball
/// integrals over `B_R(0)` after rescaling with those over `B_{rR}(c)`.
pub fn scaling_identities(
    state: &FieldState,
    center: (usize, usize),
    r: f64,
    target: &Domain,
    radius: f64,
) -> Result<ScalingIdentities> {
    let dom = &state.domain;
    let c = dom.point(dom.idx(center.0 as isize, center.1 as isize));
    let rs = rescale(state, c, r, target)?;
    let d0 = densities(state)?;
    let d1 = densities(&rs)?;
    let l2 = |s: &FieldState| -> Vec<f64> { s.spinor.values().iter().map(spinor_norm_sq).collect() };
    let orig = |f: &[f64]| ball_integral(dom, f, center, r * radius);
    let resc = |f: &[f64]| ball_integral(target, f, (0, 0), radius);
    Ok(ScalingIdentities {
        higgs: ScalingPair {
            rescaled: resc(&d1.higgs)?,
            predicted: orig(&d0.higgs)?,
        },
        yang_mills: ScalingPair {
            rescaled: resc(&d1.yang_mills)?,
            predicted: r * r * orig(&d0.yang_mills)?,
        },
        spinor_l2: ScalingPair {
            rescaled: resc(&l2(&rs))?,
            predicted: orig(&l2(state))? / r,
        },
        dirac: ScalingPair {
            rescaled: resc(&d1.dirac)?,
            predicted: orig(&d0.dirac)?,
        },
    })
}

/// Rescaled snapshot around a recovered bubble, on a grid of `target_n`
/// nodes per side spanning `units` bubble scales. `None` if the patch does
/// not fit in the domain.
pub fn bubble_candidate(state: &FieldState, bubble: &Bubble, target_n: usize, units: f64) -> Result<Option<FieldState>> {
    let dom = &state.domain;
    if bubble.lambda <= 0.0 || bubble.lambda >= 1.0 || bubble.lambda * units > dom.length() {
        return Ok(None);
    }
    let target = Domain::new(target_n, units)?;
    let c = dom.point(dom.idx(bubble.center.0 as isize, bubble.center.1 as isize));
    rescale(state, c, bubble.lambda, &target).map(Some)
}

/// Higgs energy split into recovered bubbles and the background.
#[derive(Clone, Debug, PartialEq)]
pub struct BubbleAccounting {
    /// Higgs energy of each rescaled bubble over `B_R(0)`.
    pub bubble_energies: Vec<f64>,
    /// Higgs energy of the original field outside every `B_{Rλ_i}(x_i)`.
    pub background: f64,
    pub total: f64,
}

impl BubbleAccounting {
    pub fn rel_defect(&self) -> f64 {
        let sum: f64 = self.bubble_energies.iter().sum::<f64>() + self.background;
        (sum - self.total).abs() / self.total.abs().max(1e-300)
    }
}

/// Measures each bubble on its rescaled grid (`target_n` nodes over a side of
/// `2.5·R` bubble units) and the background on the original grid.
pub fn bubble_accounting(state: &FieldState, bubbles: &[Bubble], radius: f64, target_n: usize) -> Result<BubbleAccounting> {
    let dom = &state.domain;
    let units = 2.5 * radius;
    let mut energies = Vec::with_capacity(bubbles.len());
    for b in bubbles {
        let rs = bubble_candidate(state, b, target_n, units)?.ok_or_else(|| {
            YmhdError::domain(format!(
                "bubble at {:?} with scale {} does not fit a patch of {units} units",
                b.center, b.lambda
            ))
        })?;
        let d = higgs_density(&rs.domain, &rs.gauge, &rs.section)?;
        energies.push(ball_integral(&rs.domain, &d, (0, 0), radius)?);
    }
    let d = higgs_density(dom, &state.gauge, &state.section)?;
    let h2 = dom.h() * dom.h();
    let background = h2
        * d.iter()
            .enumerate()
            .filter(|(k, _)| {
                bubbles.iter().all(|b| {
                    node_distance(dom, dom.ij(*k), b.center) > radius * b.lambda * (1.0 + 1e-12)
                })
            })
            .map(|(_, v)| v)
            .sum::<f64>();
    let total = h2 * d.iter().sum::<f64>();
    Ok(BubbleAccounting {
        bubble_energies: energies,
        background,
        total,
    })
}
