//! Structure groups, their Lie algebras, and the isometric action on the
//! fiber S² ⊂ R³.
//!
//! Two instances are supported:
//!
//! * `U(1)` acting on S² by rotations about the z-axis,
//! * `SU(2)` acting on S² through the double cover SU(2) → SO(3).
//!
//! Algebra and group elements are stored as 2×2 complex matrices. For
//! `U(1)` only the upper-left entry is used (`diag(it, 0)` and
//! `diag(e^{iθ}, 1)`), which keeps trace formulas identical for both groups.
//!
//! The fiber is handled in its ambient embedding: points are unit vectors of
//! R³, tangent vectors are ambient vectors orthogonal to the base point, and
//! every tensor (Killing fields, ∂₁∂₂μ, second fundamental form, curvature)
//! has a closed form.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Result, YmhdError};

pub type C64 = Complex64;

/// Default normalization of the Ad-invariant inner product ⟨x,y⟩ = −c·tr(xy).
pub const DEFAULT_INNER_SCALE: f64 = 2.0;

const UNIT_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    U1,
    Su2,
}

impl Group {
    /// Dimension of the Lie algebra.
    pub fn dim(self) -> usize {
        match self {
            Group::U1 => 1,
            Group::Su2 => 3,
        }
    }

    /// Size of the defining matrix representation.
    pub fn matrix_size(self) -> usize {
        match self {
            Group::U1 => 1,
            Group::Su2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::U1 => "u1",
            Group::Su2 => "su2",
        }
    }

    pub fn parse(s: &str) -> Option<Group> {
        match s.trim().to_ascii_lowercase().as_str() {
            "u1" | "u(1)" => Some(Group::U1),
            "su2" | "su(2)" => Some(Group::Su2),
            _ => None,
        }
    }

    pub fn is_abelian(self) -> bool {
        matches!(self, Group::U1)
    }

    /// Basis element ε_a: `i` for U(1), τ_a = −iσ_a/2 for SU(2).
    pub fn basis(self, a: usize) -> LieAlgebraElement {
        let mut c = [0.0; 3];
        c[a] = 1.0;
        LieAlgebraElement::from_coords(self, &c[..self.dim()])
    }
}

/// The pair (group, inner-product normalization) that fixes the algebra
/// geometry used by every energy and gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Model {
    pub group: Group,
    pub inner_scale: f64,
}

impl Model {
    pub fn new(group: Group) -> Self {
        Model {
            group,
            inner_scale: DEFAULT_INNER_SCALE,
        }
    }

    /// ⟨x,y⟩ = −c·Re tr(xy).
    #[inline]
    pub fn inner(&self, x: &LieAlgebraElement, y: &LieAlgebraElement) -> f64 {
        -self.inner_scale * (x.m * y.m).trace().re
    }

    #[inline]
    pub fn norm_sq(&self, x: &LieAlgebraElement) -> f64 {
        self.inner(x, x)
    }

    /// ⟨ε_a, ε_a⟩ for the coordinate basis (which is orthogonal for both groups).
    #[inline]
    pub fn basis_norm_sq(&self) -> f64 {
        match self.group {
            Group::U1 => self.inner_scale,
            Group::Su2 => 0.5 * self.inner_scale,
        }
    }

    /// Riesz representative of a linear functional given by its values on
    /// the coordinate basis.
    pub fn from_partials(&self, partials: &[f64]) -> LieAlgebraElement {
        let inv = 1.0 / self.basis_norm_sq();
        let c: Vec<f64> = partials.iter().map(|p| p * inv).collect();
        LieAlgebraElement::from_coords(self.group, &c)
    }
}

/// Element of 𝔤 = u(1) or su(2), stored as an anti-Hermitian 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieAlgebraElement {
    group: Group,
    m: Matrix2<C64>,
}

impl LieAlgebraElement {
    pub fn zero(group: Group) -> Self {
        LieAlgebraElement {
            group,
            m: Matrix2::zeros(),
        }
    }

    /// Builds an element from coordinates in the basis of [`Group::basis`].
    pub fn from_coords(group: Group, c: &[f64]) -> Self {
        let i = C64::i();
        let m = match group {
            Group::U1 => Matrix2::new(i * c[0], C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
            Group::Su2 => {
                // Σ a_k (−iσ_k/2)
                let (a1, a2, a3) = (c[0], c[1], c[2]);
                Matrix2::new(
                    C64::new(0.0, -0.5 * a3),
                    C64::new(-0.5 * a2, -0.5 * a1),
                    C64::new(0.5 * a2, -0.5 * a1),
                    C64::new(0.0, 0.5 * a3),
                )
            }
        };
        LieAlgebraElement { group, m }
    }

    /// Wraps a raw matrix after checking it lies in 𝔤.
    pub fn from_matrix(group: Group, m: Matrix2<C64>) -> Result<Self> {
        let x = LieAlgebraElement { group, m };
        if !x.is_valid(1e-12) {
            return Err(YmhdError::domain(format!(
                "matrix is not an element of {}",
                group.name()
            )));
        }
        Ok(x)
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.m
    }

    /// Coordinates in the basis of [`Group::basis`]; unused slots are zero.
    pub fn coords(&self) -> [f64; 3] {
        match self.group {
            Group::U1 => [self.m[(0, 0)].im, 0.0, 0.0],
            Group::Su2 => [
                -2.0 * self.m[(1, 0)].im,
                2.0 * self.m[(1, 0)].re,
                -2.0 * self.m[(0, 0)].im,
            ],
        }
    }

    /// Anti-Hermitian (and traceless for SU(2)) within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let ah = (self.m + self.m.adjoint()).iter().all(|z| z.norm() <= tol);
        let shape = match self.group {
            Group::U1 => [self.m[(0, 1)], self.m[(1, 0)], self.m[(1, 1)]]
                .iter()
                .all(|z| z.norm() <= tol),
            Group::Su2 => self.m.trace().norm() <= tol,
        };
        ah && shape
    }

    /// xy − yx without the group check.
    #[inline]
    pub fn bracket_unchecked(&self, other: &Self) -> Self {
        LieAlgebraElement {
            group: self.group,
            m: self.m * other.m - other.m * self.m,
        }
    }

    /// Linear generator L_ξ ∈ so(3) of the action on S²: the Killing field
    /// of ξ at y is L_ξ y.
    #[inline]
    pub fn generator(&self) -> Matrix3<f64> {
        match self.group {
            Group::U1 => {
                let t = self.m[(0, 0)].im;
                Matrix3::new(0.0, -t, 0.0, t, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
            Group::Su2 => {
                let a = self.coords();
                // a × ·
                Matrix3::new(0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0)
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Add for LieAlgebraElement {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.group, rhs.group);
        LieAlgebraElement {
            group: self.group,
            m: self.m + rhs.m,
        }
    }
}

impl AddAssign for LieAlgebraElement {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.group, rhs.group);
        self.m += rhs.m;
    }
}

impl Sub for LieAlgebraElement {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        debug_assert_eq!(self.group, rhs.group);
        LieAlgebraElement {
            group: self.group,
            m: self.m - rhs.m,
        }
    }
}

impl Neg for LieAlgebraElement {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        LieAlgebraElement {
            group: self.group,
            m: -self.m,
        }
    }
}

impl Mul<f64> for LieAlgebraElement {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        LieAlgebraElement {
            group: self.group,
            m: self.m * C64::new(s, 0.0),
        }
    }
}

fn check_same(x: &LieAlgebraElement, y: &LieAlgebraElement) -> Result<()> {
    if x.group != y.group {
        return Err(YmhdError::structural(format!(
            "algebra mismatch: {} vs {}",
            x.group.name(),
            y.group.name()
        )));
    }
    Ok(())
}

/// Lie bracket xy − yx.
pub fn bracket(x: &LieAlgebraElement, y: &LieAlgebraElement) -> Result<LieAlgebraElement> {
    check_same(x, y)?;
    Ok(x.bracket_unchecked(y))
}

/// Ad-invariant inner product −2·tr(xy) (default normalization).
pub fn inner_g(x: &LieAlgebraElement, y: &LieAlgebraElement) -> Result<f64> {
    check_same(x, y)?;
    Ok(Model::new(x.group).inner(x, y))
}

/// Element of U(1) or SU(2) as a unitary 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElement {
    group: Group,
    m: Matrix2<C64>,
}

impl GroupElement {
    pub fn identity(group: Group) -> Self {
        GroupElement {
            group,
            m: Matrix2::identity(),
        }
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.m
    }

    pub fn from_matrix(group: Group, m: Matrix2<C64>) -> Result<Self> {
        let g = GroupElement { group, m };
        if !g.is_valid(1e-12) {
            return Err(YmhdError::domain(format!(
                "matrix is not an element of {}",
                group.name()
            )));
        }
        Ok(g)
    }

    /// U(1) element e^{iθ}.
    pub fn phase(theta: f64) -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        GroupElement {
            group: Group::U1,
            m: Matrix2::new(C64::from_polar(1.0, theta), zero, zero, one),
        }
    }

    pub fn exp(xi: &LieAlgebraElement) -> Self {
        match xi.group {
            Group::U1 => GroupElement::phase(xi.m[(0, 0)].im),
            Group::Su2 => {
                // ξ² = −(|a|²/4)·I
                let a = xi.coords();
                let phi = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                let half = 0.5 * phi;
                let sinc = if phi < 1e-8 {
                    1.0 - half * half / 6.0
                } else {
                    half.sin() / half
                };
                let m = Matrix2::identity() * C64::new(half.cos(), 0.0) + xi.m * C64::new(sinc, 0.0);
                GroupElement {
                    group: Group::Su2,
                    m,
                }
            }
        }
    }

    /// Principal logarithm (rotation angle in [0, π] for SU(2)'s image).
    pub fn log(&self) -> LieAlgebraElement {
        match self.group {
            Group::U1 => LieAlgebraElement::from_coords(Group::U1, &[self.m[(0, 0)].arg()]),
            Group::Su2 => {
                let c = 0.5 * self.m.trace().re;
                let ah = LieAlgebraElement {
                    group: Group::Su2,
                    m: (self.m - self.m.adjoint()) * C64::new(0.5, 0.0),
                };
                let b = ah.coords();
                let bn = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
                // |b| = 2 sin(φ/2), c = cos(φ/2)
                let half = (0.5 * bn).atan2(c);
                let factor = if bn < 1e-8 {
                    1.0 + half * half / 6.0
                } else {
                    half / (0.5 * bn)
                };
                ah * factor
            }
        }
    }

    #[inline]
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.group, other.group);
        GroupElement {
            group: self.group,
            m: self.m * other.m,
        }
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        GroupElement {
            group: self.group,
            m: self.m.adjoint(),
        }
    }

    /// Ad_g ξ = g ξ g⁻¹.
    #[inline]
    pub fn ad(&self, xi: &LieAlgebraElement) -> LieAlgebraElement {
        debug_assert_eq!(self.group, xi.group);
        LieAlgebraElement {
            group: xi.group,
            m: self.m * xi.m * self.m.adjoint(),
        }
    }

    /// Rotation μ_g ∈ SO(3) by which g acts on S².
    pub fn rotation(&self) -> Matrix3<f64> {
        match self.group {
            Group::U1 => {
                let z = self.m[(0, 0)];
                let (c, s) = (z.re / z.norm(), z.im / z.norm());
                Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
            }
            Group::Su2 => {
                let mut r = Matrix3::zeros();
                for l in 0..3 {
                    let col = self.ad(&Group::Su2.basis(l)).coords();
                    for k in 0..3 {
                        r[(k, l)] = col[k];
                    }
                }
                r
            }
        }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let unit = (self.m * self.m.adjoint() - Matrix2::identity())
            .iter()
            .all(|z| z.norm() <= tol);
        let shape = match self.group {
            Group::U1 => {
                self.m[(0, 1)].norm() <= tol
                    && self.m[(1, 0)].norm() <= tol
                    && (self.m[(1, 1)] - C64::new(1.0, 0.0)).norm() <= tol
            }
            Group::Su2 => (self.m.determinant() - C64::new(1.0, 0.0)).norm() <= tol,
        };
        unit && shape
    }
}

/// Point of the unit sphere S² ⊂ R³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberPoint(Vector3<f64>);

impl FiberPoint {
    pub fn new(coords: Vector3<f64>) -> Result<Self> {
        if (coords.norm() - 1.0).abs() > UNIT_TOL {
            return Err(YmhdError::domain(format!(
                "fiber point has norm {} (expected 1)",
                coords.norm()
            )));
        }
        Ok(FiberPoint(coords))
    }

    /// Normalizes `v` onto the sphere.
    pub fn normalized(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(YmhdError::domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(FiberPoint(v / n))
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.0
    }
}

/// Ambient vector tangent to S² at `base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub base: FiberPoint,
    pub vec: Vector3<f64>,
}

impl TangentVector {
    pub fn new(base: FiberPoint, vec: Vector3<f64>) -> Result<Self> {
        let d = vec.dot(base.coords());
        if d.abs() > TANGENT_TOL * vec.norm().max(1.0) {
            return Err(YmhdError::domain(format!(
                "vector is not tangent: <v, y> = {d:e}"
            )));
        }
        Ok(TangentVector { base, vec })
    }

    pub fn zero(base: FiberPoint) -> Self {
        TangentVector {
            base,
            vec: Vector3::zeros(),
        }
    }
}

fn same_base(y: &FiberPoint, others: &[&TangentVector]) -> Result<()> {
    for t in others {
        if (t.base.coords() - y.coords()).norm() > UNIT_TOL {
            return Err(YmhdError::domain("tangent vectors live at different base points"));
        }
    }
    Ok(())
}

/// Killing field of ξ at y: the infinitesimal action L_ξ y.
pub fn killing_field(xi: &LieAlgebraElement, y: &FiberPoint) -> TangentVector {
    TangentVector {
        base: *y,
        vec: xi.generator() * y.coords(),
    }
}

/// ∂₁∂₂μ(ξ, W) = ∇_W (Killing field of ξ) = P_y(L_ξ W).
pub fn d1d2mu(xi: &LieAlgebraElement, w: &TangentVector) -> Result<TangentVector> {
    let w = TangentVector::new(w.base, w.vec)?;
    Ok(TangentVector {
        base: w.base,
        vec: project(w.base.coords(), &(xi.generator() * w.vec)),
    })
}

/// II(v, w) = −⟨v, w⟩·y for the unit sphere.
pub fn second_fundamental_form(
    y: &FiberPoint,
    v: &TangentVector,
    w: &TangentVector,
) -> Result<Vector3<f64>> {
    same_base(y, &[v, w])?;
    Ok(-v.vec.dot(&w.vec) * y.coords())
}

/// Riemann tensor of the unit sphere: R(X,Z)W = ⟨Z,W⟩X − ⟨X,W⟩Z.
pub fn curvature_n(
    y: &FiberPoint,
    x: &TangentVector,
    z: &TangentVector,
    w: &TangentVector,
) -> Result<TangentVector> {
    same_base(y, &[x, z, w])?;
    Ok(TangentVector {
        base: *y,
        vec: sphere_curvature(&x.vec, &z.vec, &w.vec),
    })
}

#[inline]
pub fn sphere_curvature(x: &Vector3<f64>, z: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    z.dot(w) * x - x.dot(w) * z
}

/// Great-circle exponential map.
pub fn fiber_exp(y: &FiberPoint, v: &TangentVector) -> FiberPoint {
    FiberPoint(exp_ambient(y.coords(), &v.vec))
}

/// Tangential projection P_y v = v − ⟨v,y⟩y.
#[inline]
pub fn project(y: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    v - y * v.dot(y)
}

/// Complex tangential projection, applied to one spinor component.
#[inline]
pub fn project_c(y: &Vector3<f64>, v: &Vector3<C64>) -> Vector3<C64> {
    let d = v[0] * y[0] + v[1] * y[1] + v[2] * y[2];
    Vector3::new(v[0] - d * y[0], v[1] - d * y[1], v[2] - d * y[2])
}

/// exp_y(v) on the unit sphere; the result is renormalized to absorb rounding.
#[inline]
pub fn exp_ambient(y: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let t = v.norm();
    if t == 0.0 {
        return *y;
    }
    let p = y * t.cos() + v * (t.sin() / t);
    p / p.norm()
}

/// Parallel transport of a complex tangent vector `w` at `y` along the
/// geodesic t ↦ exp_y(t v), t ∈ [0, 1].
#[inline]
pub fn transport_c(y: &Vector3<f64>, v: &Vector3<f64>, w: &Vector3<C64>) -> Vector3<C64> {
    let t = v.norm();
    if t == 0.0 {
        return *w;
    }
    let e = v / t;
    let we = w[0] * e[0] + w[1] * e[1] + w[2] * e[2];
    let d = e * (t.cos() - 1.0) - y * t.sin();
    Vector3::new(w[0] + we * d[0], w[1] + we * d[1], w[2] + we * d[2])
}

/// Real version of [`transport_c`].
pub fn parallel_transport(y: &FiberPoint, v: &TangentVector, w: &TangentVector) -> Result<TangentVector> {
    same_base(y, &[v, w])?;
    let t = v.vec.norm();
    let out = if t == 0.0 {
        w.vec
    } else {
        let e = v.vec / t;
        let we = w.vec.dot(&e);
        w.vec + (e * (t.cos() - 1.0) - y.coords() * t.sin()) * we
    };
    Ok(TangentVector {
        base: fiber_exp(y, v),
        vec: out,
    })
}

/// An orthonormal basis (e₁, e₂) of T_yS².
pub fn tangent_frame(y: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let trial = if y[0].abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = project(y, &trial).normalize();
    let e2 = y.cross(&e1);
    [e1, e2]
}
