//! Periodic grid, central-difference operators, gamma matrices and quadrature.
//!
//! Nodes are indexed by `idx = i·n + j` where `i` counts along x and `j`
//! along y. Direction `0` is x and direction `1` is y throughout the crate;
//! the public [`gamma`] entry point uses the labels `1` and `2`.
//!
//! All first-order operators use the symmetric difference
//! `D_α f = (f(+e_α) − f(−e_α)) / 2h`. With periodic indexing the `D_α`
//! commute and are skew-adjoint, which makes `d1 ∘ d0 = 0` and the
//! adjointness of `d0` and `codiff1` hold to rounding.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Result, YmhdError};
use crate::lie::LieAlgebraElement;

type C64 = Complex64;

/// Values a grid field may carry.
pub trait FieldValue: Copy + Send + Sync {
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
}

impl FieldValue for f64 {
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl FieldValue for C64 {
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl FieldValue for Vector3<f64> {
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl FieldValue for Vector3<C64> {
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * C64::new(s, 0.0)
    }
}

impl FieldValue for LieAlgebraElement {
    #[inline]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl<T: FieldValue> FieldValue for [T; 2] {
    #[inline]
    fn add(self, o: Self) -> Self {
        [self[0].add(o[0]), self[1].add(o[1])]
    }
    #[inline]
    fn sub(self, o: Self) -> Self {
        [self[0].sub(o[0]), self[1].sub(o[1])]
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        [self[0].scale(s), self[1].scale(s)]
    }
}

/// A one-form: one value per node for each of the two frame directions.
pub type OneForm<T> = [Vec<T>; 2];

/// A plain (untwisted) two-component spinor.
pub type PlainSpinor = [C64; 2];

/// Periodic `n × n` grid on the flat torus of side `length`, with an
/// optional conformal exponent σ (metric `e^{2σ}·δ`).
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    n: usize,
    length: f64,
    h: f64,
    sigma: Vec<f64>,
}

impl Domain {
    pub fn new(n_side: usize, length: f64) -> Result<Self> {
        if n_side < 4 {
            return Err(YmhdError::domain(format!("n_side must be at least 4, got {n_side}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(YmhdError::domain(format!("length must be positive, got {length}")));
        }
        Ok(Domain {
            n: n_side,
            length,
            h: length / n_side as f64,
            sigma: vec![0.0; n_side * n_side],
        })
    }

    pub fn with_conformal_exponent(mut self, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != self.len() {
            return Err(YmhdError::structural(format!(
                "conformal exponent has {} entries, grid has {}",
                sigma.len(),
                self.len()
            )));
        }
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(YmhdError::domain("conformal exponent must be finite"));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Same grid with σ ≡ 0.
    pub fn flat(&self) -> Self {
        Domain {
            sigma: vec![0.0; self.len()],
            ..self.clone()
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn is_flat(&self) -> bool {
        self.sigma.iter().all(|&s| s == 0.0)
    }

    /// Same shape (side count and length).
    pub fn same_grid(&self, other: &Domain) -> bool {
        self.n == other.n && self.length == other.length
    }

    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        let n = self.n as isize;
        (i.rem_euclid(n) * n + j.rem_euclid(n)) as usize
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx / self.n, idx % self.n)
    }

    /// Physical coordinates of a node.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (i as f64 * self.h, j as f64 * self.h)
    }

    /// Neighbour of `idx` shifted by `step` nodes along direction `dir` (0 = x, 1 = y).
    #[inline]
    pub fn shift(&self, idx: usize, dir: usize, step: isize) -> usize {
        let (i, j) = self.ij(idx);
        if dir == 0 {
            self.idx(i as isize + step, j as isize)
        } else {
            self.idx(i as isize, j as isize + step)
        }
    }

    /// Minimum-image displacement from `a` to `b` along one axis.
    #[inline]
    pub fn periodic_delta(&self, a: f64, b: f64) -> f64 {
        let d = (b - a).rem_euclid(self.length);
        if d > 0.5 * self.length {
            d - self.length
        } else {
            d
        }
    }

    /// Torus distance between two physical points.
    pub fn torus_distance(&self, p: (f64, f64), q: (f64, f64)) -> f64 {
        self.periodic_delta(p.0, q.0).hypot(self.periodic_delta(p.1, q.1))
    }

    /// Evaluates `f(x, y)` at every node.
    pub fn sample<T: Send, F: Fn(f64, f64) -> T + Sync>(&self, f: F) -> Vec<T> {
        node_map(self.len(), |k| {
            let (x, y) = self.point(k);
            f(x, y)
        })
    }
}

const PAR_MIN_NODES: usize = 1024;

/// Node-parallel map; the output order is the node order, so results do not
/// depend on the thread count.
#[inline]
pub fn node_map<T: Send, F: Fn(usize) -> T + Sync>(len: usize, f: F) -> Vec<T> {
    if len < PAR_MIN_NODES {
        return (0..len).map(&f).collect();
    }
    (0..len).into_par_iter().with_min_len(PAR_MIN_NODES / 4).map(&f).collect()
}

/// Central difference along `dir` at node `k`.
#[inline]
pub fn diff<T: FieldValue>(dom: &Domain, f: &[T], dir: usize, k: usize) -> T {
    let p = dom.shift(k, dir, 1);
    let m = dom.shift(k, dir, -1);
    f[p].sub(f[m]).scale(0.5 / dom.h)
}

fn check_len<T>(dom: &Domain, f: &[T]) -> Result<()> {
    if f.len() != dom.len() {
        return Err(YmhdError::structural(format!(
            "field has {} nodes, grid has {}",
            f.len(),
            dom.len()
        )));
    }
    Ok(())
}

/// Discrete exterior derivative on functions.
pub fn d0<T: FieldValue>(dom: &Domain, f: &[T]) -> Result<OneForm<T>> {
    check_len(dom, f)?;
    Ok([
        node_map(dom.len(), |k| diff(dom, f, 0, k)),
        node_map(dom.len(), |k| diff(dom, f, 1, k)),
    ])
}

/// Discrete exterior derivative on one-forms: `D_x a_y − D_y a_x`.
pub fn d1<T: FieldValue>(dom: &Domain, a: &OneForm<T>) -> Result<Vec<T>> {
    check_len(dom, &a[0])?;
    check_len(dom, &a[1])?;
    Ok(node_map(dom.len(), |k| {
        diff(dom, &a[1], 0, k).sub(diff(dom, &a[0], 1, k))
    }))
}

/// Negative divergence, the adjoint of [`d0`] for the flat grid product.
pub fn codiff1<T: FieldValue>(dom: &Domain, a: &OneForm<T>) -> Result<Vec<T>> {
    check_len(dom, &a[0])?;
    check_len(dom, &a[1])?;
    Ok(node_map(dom.len(), |k| {
        diff(dom, &a[0], 0, k).add(diff(dom, &a[1], 1, k)).scale(-1.0)
    }))
}

/// `Σ_α D_α D_α f`, the Laplacian compatible with `−codiff1 ∘ d0`.
pub fn laplacian<T: FieldValue>(dom: &Domain, f: &[T]) -> Result<Vec<T>> {
    let g = d0(dom, f)?;
    Ok(codiff1(dom, &g)?.into_iter().map(|v| v.scale(-1.0)).collect())
}

/// Flat grid inner product `h² Σ ⟨a, b⟩` of real scalar fields.
pub fn inner_scalar(dom: &Domain, a: &[f64], b: &[f64]) -> f64 {
    dom.h * dom.h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Flat grid inner product of real one-forms.
pub fn inner_one_form(dom: &Domain, a: &OneForm<f64>, b: &OneForm<f64>) -> f64 {
    inner_scalar(dom, &a[0], &b[0]) + inner_scalar(dom, &a[1], &b[1])
}

/// `Σ f·e^{2σ}·h²`.
pub fn integrate(dom: &Domain, f: &[f64]) -> f64 {
    let h2 = dom.h * dom.h;
    f.iter()
        .zip(&dom.sigma)
        .map(|(v, s)| v * (2.0 * s).exp())
        .sum::<f64>()
        * h2
}

/// Which gamma matrices to use. `Corrupted` replaces γ₂ with a Hermitian
/// matrix and exists only to exercise failure paths of the invariant battery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaConvention {
    Standard,
    Corrupted,
}

impl GammaConvention {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "standard" => Some(GammaConvention::Standard),
            "corrupted" => Some(GammaConvention::Corrupted),
            _ => None,
        }
    }

    pub fn matrices(self) -> [Matrix2<C64>; 2] {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::i();
        let g1 = Matrix2::new(z, one, -one, z);
        let g2 = match self {
            GammaConvention::Standard => Matrix2::new(z, i, i, z),
            GammaConvention::Corrupted => Matrix2::new(z, one, one, z),
        };
        [g1, g2]
    }
}

/// γ₁ = [[0,1],[−1,0]], γ₂ = [[0,i],[i,0]] applied to a plain spinor.
/// `direction` is 1 or 2.
pub fn gamma(direction: usize, psi: PlainSpinor) -> Result<PlainSpinor> {
    match direction {
        1 | 2 => Ok(gamma_apply(direction - 1, psi)),
        _ => Err(YmhdError::structural(format!(
            "gamma direction must be 1 or 2, got {direction}"
        ))),
    }
}

/// Gamma action on the spinor index for any component type (`dir` is 0 or 1).
#[inline]
pub fn gamma_apply<T>(dir: usize, psi: [T; 2]) -> [T; 2]
where
    T: Copy + std::ops::Neg<Output = T> + std::ops::Mul<C64, Output = T>,
{
    if dir == 0 {
        [psi[1], -psi[0]]
    } else {
        let i = C64::i();
        [psi[1] * i, psi[0] * i]
    }
}

/// Chirality γ₁γ₂ = diag(i, −i).
#[inline]
pub fn chirality(psi: PlainSpinor) -> PlainSpinor {
    [psi[0] * C64::i(), psi[1] * -C64::i()]
}

/// Flat spin Dirac operator `Σ_α γ_α D_α`.
pub fn dirac_plain(dom: &Domain, psi: &[PlainSpinor]) -> Result<Vec<PlainSpinor>> {
    check_len(dom, psi)?;
    Ok(node_map(dom.len(), |k| {
        let dx = diff(dom, psi, 0, k);
        let dy = diff(dom, psi, 1, k);
        let a = gamma_apply(0, dx);
        let b = gamma_apply(1, dy);
        [a[0] + b[0], a[1] + b[1]]
    }))
}

/// Flat Hermitian product `h² Σ conj(a)·b` of plain spinor fields.
pub fn inner_plain(dom: &Domain, a: &[PlainSpinor], b: &[PlainSpinor]) -> C64 {
    let s: C64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| x[0].conj() * y[0] + x[1].conj() * y[1])
        .sum();
    s * dom.h * dom.h
}

/// In-place 2D FFT of a node-major array.
fn fft2(dom: &Domain, data: &mut [C64], inverse: bool) {
    let n = dom.n;
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // rows (fixed i, varying j) are contiguous
    fft.process(data);
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
}

/// Solves `Σ_α D_α D_α θ = rhs` by Fourier diagonalization of the exact
/// central-difference symbol `−Σ_α sin²(k_α h)/h²`.
///
/// Modes where the symbol vanishes (the constant mode and its three
/// alternating partners) are set to zero; `rhs` is assumed to have no
/// component there, which holds whenever it is a `codiff1` output.
pub fn poisson_solve(dom: &Domain, rhs: &[f64]) -> Result<Vec<f64>> {
    check_len(dom, rhs)?;
    let n = dom.n;
    let h = dom.h;
    let mut data: Vec<C64> = rhs.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft2(dom, &mut data, false);
    let sym_1d: Vec<f64> = (0..n)
        .map(|m| {
            let s = (2.0 * std::f64::consts::PI * m as f64 / n as f64).sin();
            s * s / (h * h)
        })
        .collect();
    let cutoff = 1e-12 / (h * h);
    for i in 0..n {
        for j in 0..n {
            let sym = -(sym_1d[i] + sym_1d[j]);
            let v = &mut data[i * n + j];
            if sym.abs() <= cutoff {
                *v = C64::new(0.0, 0.0);
            } else {
                *v /= sym;
            }
        }
    }
    fft2(dom, &mut data, true);
    let norm = 1.0 / (n * n) as f64;
    Ok(data.iter().map(|z| z.re * norm).collect())
}
