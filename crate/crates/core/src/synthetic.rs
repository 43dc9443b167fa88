//! Analytic test fields and bubble fixtures.
//!
//! Random fields here are random *analytic* functions: the seed draws
//! Fourier coefficients of a fixed low-frequency expansion, so the same seed
//! describes the same continuum field on every grid. This is what the
//! convergence-order tests rely on.

use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fields::{
    project_spinor, FieldState, GaugeField, GaugeTransformation, SectionField, Spinor,
    TwistedSpinorField,
};
use crate::geometry::Domain;
use crate::lie::{exp_ambient, project, Group, Model};

type C64 = Complex64;

const MODES: i32 = 2;

/// A real trigonometric polynomial on the torus of side `length`.
#[derive(Clone, Debug)]
pub struct SmoothFn {
    length: f64,
    terms: Vec<(f64, f64, f64, f64)>,
}

impl SmoothFn {
    pub fn random(rng: &mut ChaCha8Rng, length: f64) -> Self {
        let mut terms = Vec::new();
        for m1 in -MODES..=MODES {
            for m2 in 0..=MODES {
                if m2 == 0 && m1 < 0 {
                    continue;
                }
                let damp = 1.0 / (1.0 + (m1 * m1 + m2 * m2) as f64);
                let a = rng.gen_range(-1.0..1.0) * damp;
                let b = rng.gen_range(-1.0..1.0) * damp;
                terms.push((m1 as f64, m2 as f64, a, b));
            }
        }
        SmoothFn { length, terms }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let w = 2.0 * PI / self.length;
        self.terms
            .iter()
            .map(|(m1, m2, a, b)| {
                let t = w * (m1 * x + m2 * y);
                a * t.cos() + b * t.sin()
            })
            .sum()
    }
}

fn smooth_fns(rng: &mut ChaCha8Rng, length: f64, count: usize) -> Vec<SmoothFn> {
    (0..count).map(|_| SmoothFn::random(rng, length)).collect()
}

/// Smooth random connection with coordinates of size about `amp`.
pub fn random_gauge_field(dom: &Domain, group: Group, seed: u64, amp: f64) -> GaugeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = smooth_fns(&mut rng, dom.length(), 6);
    GaugeField::from_fn(dom, group, |x, y| {
        let mut out = [[0.0; 3]; 2];
        for d in 0..2 {
            for a in 0..3 {
                out[d][a] = amp * f[d * 3 + a].eval(x, y);
            }
        }
        out
    })
}

/// Smooth random section: the geodesic image of a smooth tangent field at a
/// fixed base point, so it never degenerates.
pub fn random_section(dom: &Domain, seed: u64, amp: f64) -> SectionField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = smooth_fns(&mut rng, dom.length(), 3);
    let base = Vector3::new(0.2, 0.3, 0.9).normalize();
    let u = dom.sample(|x, y| {
        let v = Vector3::new(f[0].eval(x, y), f[1].eval(x, y), f[2].eval(x, y)) * amp;
        exp_ambient(&base, &project(&base, &v))
    });
    SectionField::from_parts(u)
}

/// Smooth random complex ambient spinor field, projected to be tangent to `u`.
pub fn random_spinor(dom: &Domain, u: &SectionField, seed: u64, amp: f64) -> TwistedSpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = smooth_fns(&mut rng, dom.length(), 12);
    let raw: Vec<Spinor> = dom.sample(|x, y| {
        let mut s: Spinor = [Vector3::zeros(), Vector3::zeros()];
        for c in 0..2 {
            for k in 0..3 {
                let i = (c * 3 + k) * 2;
                s[c][k] = C64::new(f[i].eval(x, y), f[i + 1].eval(x, y)) * amp;
            }
        }
        s
    });
    TwistedSpinorField::from_parts(
        raw.iter()
            .zip(u.values())
            .map(|(p, y)| project_spinor(y, p))
            .collect(),
    )
}

/// Smooth random (A, u, ψ). `amp_psi = 0` gives ψ = 0.
pub fn random_state(
    dom: &Domain,
    model: Model,
    seed: u64,
    amp_a: f64,
    amp_psi: f64,
) -> Result<FieldState> {
    let gauge = random_gauge_field(dom, model.group, seed.wrapping_mul(3).wrapping_add(1), amp_a);
    let section = random_section(dom, seed.wrapping_mul(3).wrapping_add(2), 1.0);
    let spinor = if amp_psi == 0.0 {
        TwistedSpinorField::zero(dom.len())
    } else {
        random_spinor(dom, &section, seed.wrapping_mul(3).wrapping_add(3), amp_psi)
    };
    FieldState::new(dom.clone(), model, gauge, section, spinor)
}

/// A fixed analytic state, identical in the continuum for every grid.
pub fn smooth_state(dom: &Domain, model: Model, amp_a: f64, amp_psi: f64) -> Result<FieldState> {
    random_state(dom, model, 0x5eed, amp_a, amp_psi)
}

/// Smooth random gauge transformation `exp(ξ)` with `|ξ|` of size about `amp`.
pub fn random_gauge_transformation(
    dom: &Domain,
    group: Group,
    seed: u64,
    amp: f64,
) -> GaugeTransformation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = smooth_fns(&mut rng, dom.length(), 3);
    GaugeTransformation::exp_of(dom, group, |x, y| {
        [amp * f[0].eval(x, y), amp * f[1].eval(x, y), amp * f[2].eval(x, y)]
    })
}

/// Unit-max-norm smooth direction in connection space.
pub fn random_direction_a(dom: &Domain, group: Group, seed: u64) -> GaugeField {
    let a = random_gauge_field(dom, group, seed, 1.0);
    let m = a.max_abs().max(1e-300);
    a.scaled(1.0 / m)
}

/// Smooth tangent direction along `u` with max norm one.
pub fn random_direction_u(dom: &Domain, u: &SectionField, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = smooth_fns(&mut rng, dom.length(), 3);
    let raw: Vec<Vector3<f64>> = dom.sample(|x, y| Vector3::new(f[0].eval(x, y), f[1].eval(x, y), f[2].eval(x, y)));
    let v: Vec<_> = raw
        .iter()
        .zip(u.values())
        .map(|(w, y)| project(y, w))
        .collect();
    let m = v.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    v.iter().map(|x| x / m).collect()
}

/// Smooth tangent spinor direction with max norm one.
pub fn random_direction_psi(dom: &Domain, u: &SectionField, seed: u64) -> TwistedSpinorField {
    let p = random_spinor(dom, u, seed, 1.0);
    let m = p
        .values()
        .iter()
        .map(crate::fields::spinor_norm_sq)
        .fold(0.0, f64::max)
        .sqrt()
        .max(1e-300);
    p.scaled(1.0 / m)
}

/// Inverse stereographic projection from the north pole:
/// `w ↦ (2 Re w, 2 Im w, |w|² − 1) / (|w|² + 1)`.
pub fn inverse_stereographic(w: C64) -> Vector3<f64> {
    let r2 = w.norm_sqr();
    if !r2.is_finite() {
        return Vector3::z();
    }
    Vector3::new(2.0 * w.re, 2.0 * w.im, r2 - 1.0) / (r2 + 1.0)
}

/// Degree-one bubble `u = σ⁻¹(z/λ)` with `z` the minimum-image displacement
/// from `center`. It is harmonic away from the seam `|dx| = L/2` or
/// `|dy| = L/2`, where it jumps.
pub fn bubble_patch(dom: &Domain, center: (f64, f64), lambda: f64) -> SectionField {
    let u = dom.sample(|x, y| {
        let z = C64::new(dom.periodic_delta(center.0, x), dom.periodic_delta(center.1, y));
        inverse_stereographic(z / lambda)
    });
    SectionField::from_parts(u)
}

/// Nodes whose central-difference stencil does not straddle the seam of
/// [`bubble_patch`].
pub fn bubble_patch_interior(dom: &Domain, center: (f64, f64)) -> Vec<bool> {
    let half = 0.5 * dom.length();
    let h = dom.h();
    dom.sample(|x, y| {
        dom.periodic_delta(center.0, x).abs() + h < half
            && dom.periodic_delta(center.1, y).abs() + h < half
    })
}

fn theta1_and_derivative(z: C64, q: f64) -> (C64, C64) {
    let mut t = C64::new(0.0, 0.0);
    let mut dt = C64::new(0.0, 0.0);
    for n in 0..12 {
        let nf = n as f64;
        let c = 2.0 * if n % 2 == 0 { 1.0 } else { -1.0 } * q.powf((nf + 0.5) * (nf + 0.5));
        let m = 2.0 * nf + 1.0;
        t += (z * m).sin() * c;
        dt += (z * m).cos() * (c * m);
    }
    (t, dt)
}

/// Periodic replacement for `1/z` on the square torus:
/// `f(z) = (π/L) θ₁'(πz/L) / θ₁(πz/L) + 2πi·Im(z)/L²` with nome `e^{−π}`.
pub fn periodic_inverse(z: C64, length: f64) -> C64 {
    let w = z * (PI / length);
    let (t, dt) = theta1_and_derivative(w, (-PI).exp());
    dt / t * (PI / length) + C64::new(0.0, 2.0 * PI * z.im / (length * length))
}

/// Smooth periodic degree-one map that looks like `σ⁻¹(z/λ)` near `center`:
/// `u = σ⁻¹(1 / (λ f(z)))` with `f` from [`periodic_inverse`].
pub fn bubble_periodic(dom: &Domain, center: (f64, f64), lambda: f64) -> SectionField {
    let l = dom.length();
    let u = dom.sample(|x, y| {
        let z = C64::new(dom.periodic_delta(center.0, x), dom.periodic_delta(center.1, y));
        if z.norm() < 1e-14 * l {
            return inverse_stereographic(C64::new(0.0, 0.0));
        }
        let f = periodic_inverse(z, l);
        inverse_stereographic(C64::new(1.0, 0.0) / (f * lambda))
    });
    SectionField::from_parts(u)
}

/// States with A = 0, ψ = 0 and a periodic bubble of each scale in `lambdas`.
pub fn shrinking_bubbles(
    dom: &Domain,
    model: Model,
    center: (f64, f64),
    lambdas: &[f64],
) -> Vec<FieldState> {
    lambdas
        .iter()
        .map(|&l| FieldState {
            domain: dom.clone(),
            model,
            gauge: GaugeField::zero(model.group, dom.len()),
            section: bubble_periodic(dom, center, l),
            spinor: TwistedSpinorField::zero(dom.len()),
        })
        .collect()
}

/// Degree-two map with bubbles of scales `l1`, `l2` at `c1`, `c2`:
/// `u = σ⁻¹(1 / (l1 f(z − c1) + l2 f(z − c2)))`, A = 0, ψ = 0.
pub fn two_bubbles(
    dom: &Domain,
    model: Model,
    c1: (f64, f64),
    l1: f64,
    c2: (f64, f64),
    l2: f64,
) -> FieldState {
    let l = dom.length();
    let u = dom.sample(|x, y| {
        let z1 = C64::new(dom.periodic_delta(c1.0, x), dom.periodic_delta(c1.1, y));
        let z2 = C64::new(dom.periodic_delta(c2.0, x), dom.periodic_delta(c2.1, y));
        if z1.norm() < 1e-14 * l || z2.norm() < 1e-14 * l {
            return inverse_stereographic(C64::new(0.0, 0.0));
        }
        let s = periodic_inverse(z1, l) * l1 + periodic_inverse(z2, l) * l2;
        inverse_stereographic(C64::new(1.0, 0.0) / s)
    });
    FieldState {
        domain: dom.clone(),
        model,
        gauge: GaugeField::zero(model.group, dom.len()),
        section: SectionField::from_parts(u),
        spinor: TwistedSpinorField::zero(dom.len()),
    }
}

/// A = 0, ψ = 0 and `u = exp_N(amp·(sin 2πx/L, cos 2πy/L·cos 2πx/L, 0))`
/// around the north pole N.
pub fn perturbed_constant(dom: &Domain, model: Model, amp: f64) -> FieldState {
    let l = dom.length();
    let u = dom.sample(|x, y| {
        let (s, t) = (2.0 * PI * x / l, 2.0 * PI * y / l);
        let v = Vector3::new(amp * s.sin(), amp * t.cos() * s.cos(), 0.0);
        exp_ambient(&Vector3::z(), &v)
    });
    FieldState {
        domain: dom.clone(),
        model,
        gauge: GaugeField::zero(model.group, dom.len()),
        section: SectionField::from_parts(u),
        spinor: TwistedSpinorField::zero(dom.len()),
    }
}

/// Gaussian profile `exp(−r²/ρ²)` in the torus distance to `center`.
pub fn gaussian(dom: &Domain, center: (f64, f64), rho: f64) -> Vec<f64> {
    dom.sample(|x, y| {
        let r2 = dom.periodic_delta(center.0, x).powi(2) + dom.periodic_delta(center.1, y).powi(2);
        (-r2 / (rho * rho)).exp()
    })
}

/// Constant section at the north pole with a spinor spike of width `rho`:
/// `ψ = amp·ρ^{−1/2}·exp(−r²/ρ²)·(e_x ⊗ s₀)`, whose `∫|ψ|⁴` does not depend
/// on `rho`.
pub fn spinor_spike(
    dom: &Domain,
    model: Model,
    center: (f64, f64),
    rho: f64,
    amp: f64,
) -> FieldState {
    let g = gaussian(dom, center, rho);
    let scale = amp / rho.sqrt();
    let psi: Vec<Spinor> = g
        .iter()
        .map(|v| {
            let mut s: Spinor = [Vector3::zeros(), Vector3::zeros()];
            s[0][0] = C64::new(v * scale, 0.0);
            s[1][1] = C64::new(0.0, 0.5 * v * scale);
            s
        })
        .collect();
    FieldState {
        domain: dom.clone(),
        model,
        gauge: GaugeField::zero(model.group, dom.len()),
        section: SectionField::constant(dom.len(), &crate::lie::FiberPoint::new(Vector3::z()).unwrap()),
        spinor: TwistedSpinorField::from_parts(psi),
    }
}

/// Localized smooth state supported (numerically) within a few `rho` of
/// `center`: every field is a Gaussian bump times a smooth profile.
pub fn bump_state(dom: &Domain, model: Model, center: (f64, f64), rho: f64) -> Result<FieldState> {
    let group = model.group;
    let gauge = GaugeField::from_fn(dom, group, |x, y| {
        let dx = dom.periodic_delta(center.0, x) / rho;
        let dy = dom.periodic_delta(center.1, y) / rho;
        let g = (-(dx * dx + dy * dy)).exp();
        [
            [g * (0.7 + 0.4 * dy), g * -0.3, g * 0.5 * dx],
            [g * (0.2 - 0.5 * dx), g * 0.6, g * (-0.4 + 0.3 * dy)],
        ]
    });
    let pole = Vector3::z();
    let section = SectionField::from_fn(dom, |x, y| {
        let dx = dom.periodic_delta(center.0, x) / rho;
        let dy = dom.periodic_delta(center.1, y) / rho;
        let g = (-(dx * dx + dy * dy)).exp();
        exp_ambient(&pole, &Vector3::new(1.2 * g * (1.0 + dy), -0.8 * g * dx, 0.0))
    })?;
    let raw: Vec<Spinor> = dom.sample(|x, y| {
        let dx = dom.periodic_delta(center.0, x) / rho;
        let dy = dom.periodic_delta(center.1, y) / rho;
        let g = (-(dx * dx + dy * dy)).exp() / rho.sqrt();
        [
            Vector3::new(C64::new(g, 0.3 * g * dx), C64::new(-0.5 * g * dy, 0.2 * g), C64::new(0.1 * g, 0.0)),
            Vector3::new(C64::new(0.0, 0.8 * g), C64::new(0.6 * g * dx, -0.4 * g), C64::new(0.0, 0.2 * g * dy)),
        ]
    });
    let spinor = TwistedSpinorField::projected(raw, &section)?;
    FieldState::new(dom.clone(), model, gauge, section, spinor)
}
