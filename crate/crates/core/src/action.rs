//! The coupled action, its energy densities and the twisted Dirac operator.
//!
//! With metric `e^{2σ}·δ` the discrete action is
//!
//! ```text
//! S = h² Σ_n [ e^{−2σ}⟨F₁₂, F₁₂⟩ + Σ_α |D_α u + L_{A_α} u|² + Re⟨ψ, Hψ⟩ ],
//! Hψ = Σ_α γ_α (D_α ψ + L_{A_α} ψ),      Dψ = P_u Hψ.
//! ```
//!
//! The Higgs integrand carries no σ: the inverse metric and the area element
//! cancel in two dimensions. Spinors are stored as their flat
//! representatives, so the Dirac pairing and `∫|ψ|⁴` carry no σ either.
//!
//! `H` is Hermitian on all ambient spinor fields (each `D_α` and each
//! `L_{A_α}` is skew, each `γ_α` anti-Hermitian, and they act on different
//! indices), so `D = P_u H` is self-adjoint on tangent fields to rounding.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Result, YmhdError};
use crate::fields::{
    curvature, spinor_dot, spinor_norm_sq, vertical_differential_ambient, FieldState, GaugeField,
    SectionField, Spinor, TwistedSpinorField, project_spinor,
};
use crate::geometry::{diff, gamma_apply, node_map, Domain};
use crate::lie::Model;

type C64 = Complex64;

/// The action terms and the spinor energy of one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionBreakdown {
    pub yang_mills: f64,
    pub higgs: f64,
    pub dirac: f64,
    pub total: f64,
    pub spinor_l4: f64,
}

impl ActionBreakdown {
    pub fn zero() -> Self {
        ActionBreakdown {
            yang_mills: 0.0,
            higgs: 0.0,
            dirac: 0.0,
            total: 0.0,
            spinor_l4: 0.0,
        }
    }
}

/// Per-node integrands. Each action term equals `h² Σ_n` of its density.
#[derive(Clone, Debug, PartialEq)]
pub struct Densities {
    pub yang_mills: Vec<f64>,
    pub higgs: Vec<f64>,
    pub dirac: Vec<f64>,
    pub spinor_l4: Vec<f64>,
}

fn sum_h2(dom: &Domain, v: &[f64]) -> f64 {
    dom.h() * dom.h() * v.iter().sum::<f64>()
}

pub fn yang_mills_density(dom: &Domain, model: &Model, a: &GaugeField) -> Result<Vec<f64>> {
    let f = curvature(dom, a)?;
    let sigma = dom.sigma();
    Ok(f.iter()
        .zip(sigma)
        .map(|(x, s)| (-2.0 * s).exp() * model.norm_sq(x))
        .collect())
}

/// `∫ ⟨F₁₂, F₁₂⟩` with the conformal weights.
pub fn yang_mills_energy(dom: &Domain, model: &Model, a: &GaugeField) -> Result<f64> {
    Ok(sum_h2(dom, &yang_mills_density(dom, model, a)?))
}

pub fn higgs_density(dom: &Domain, a: &GaugeField, u: &SectionField) -> Result<Vec<f64>> {
    let v = vertical_differential_ambient(dom, a, u)?;
    Ok(v[0]
        .iter()
        .zip(&v[1])
        .map(|(x, y)| x.norm_squared() + y.norm_squared())
        .collect())
}

/// `∫ |d_A u|²`.
pub fn higgs_energy(dom: &Domain, a: &GaugeField, u: &SectionField) -> Result<f64> {
    Ok(sum_h2(dom, &higgs_density(dom, a, u)?))
}

/// The ambient operator `H` (no projection). Acts on arbitrary C³-valued
/// spinor fields.
pub fn ambient_dirac(dom: &Domain, a: &GaugeField, psi: &[Spinor]) -> Result<Vec<Spinor>> {
    if psi.len() != dom.len() || a.len() != dom.len() {
        return Err(YmhdError::structural("spinor or connection does not match grid"));
    }
    Ok(node_map(dom.len(), |k| {
        let mut out = [Vector3::<C64>::zeros(), Vector3::zeros()];
        for dir in 0..2 {
            let l = a.comp(dir)[k].generator().map(|x| C64::new(x, 0.0));
            let d = diff(dom, psi, dir, k);
            let cov = [d[0] + l * psi[k][0], d[1] + l * psi[k][1]];
            let g = gamma_apply(dir, cov);
            out[0] += g[0];
            out[1] += g[1];
        }
        out
    }))
}

/// Twisted Dirac operator `Dψ = P_u Hψ` on tangent spinors.
pub fn twisted_dirac(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    psi: &TwistedSpinorField,
) -> Result<TwistedSpinorField> {
    psi.check_tangent(u)?;
    Ok(TwistedSpinorField::from_parts(twisted_dirac_raw(dom, a, u, psi.values())?))
}

/// [`twisted_dirac`] without the tangency check.
pub(crate) fn twisted_dirac_raw(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    psi: &[Spinor],
) -> Result<Vec<Spinor>> {
    let h = ambient_dirac(dom, a, psi)?;
    Ok(h.iter()
        .zip(u.values())
        .map(|(x, y)| project_spinor(y, x))
        .collect())
}

pub fn dirac_density(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    psi: &TwistedSpinorField,
) -> Result<Vec<f64>> {
    let (re, _) = dirac_pairing_density(dom, a, u, psi)?;
    Ok(re)
}

fn dirac_pairing_density(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    psi: &TwistedSpinorField,
) -> Result<(Vec<f64>, C64)> {
    psi.check_tangent(u)?;
    let h = ambient_dirac(dom, a, psi.values())?;
    let vals: Vec<C64> = psi
        .values()
        .iter()
        .zip(&h)
        .map(|(p, q)| spinor_dot(p, q))
        .collect();
    let im: f64 = vals.iter().map(|z| z.im).sum();
    let scale: f64 = psi
        .values()
        .iter()
        .zip(&h)
        .map(|(p, q)| (spinor_norm_sq(p) * spinor_norm_sq(q)).sqrt())
        .sum();
    Ok((vals.iter().map(|z| z.re).collect(), C64::new(0.0, im) + C64::new(scale, 0.0)))
}

/// `Re ∫⟨ψ, Dψ⟩`; fails if the imaginary part is not negligible.
pub fn dirac_action(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    psi: &TwistedSpinorField,
) -> Result<f64> {
    let (re, meta) = dirac_pairing_density(dom, a, u, psi)?;
    check_real(dom, meta)?;
    Ok(sum_h2(dom, &re))
}

fn check_real(dom: &Domain, meta: C64) -> Result<()> {
    let h2 = dom.h() * dom.h();
    let (im, scale) = (meta.im * h2, meta.re * h2);
    if im.abs() > 1e-10 * scale.max(1.0) {
        return Err(YmhdError::domain(format!(
            "Dirac pairing has imaginary part {im:e}"
        )));
    }
    Ok(())
}

pub fn spinor_l4_density(psi: &TwistedSpinorField) -> Vec<f64> {
    psi.values().iter().map(|p| spinor_norm_sq(p).powi(2)).collect()
}

/// All integrands of a state.
pub fn densities(state: &FieldState) -> Result<Densities> {
    let dom = &state.domain;
    let (dirac, meta) = if state.spinor.is_zero() {
        (vec![0.0; dom.len()], C64::new(0.0, 0.0))
    } else {
        dirac_pairing_density(dom, &state.gauge, &state.section, &state.spinor)?
    };
    check_real(dom, meta)?;
    Ok(Densities {
        yang_mills: yang_mills_density(dom, &state.model, &state.gauge)?,
        higgs: higgs_density(dom, &state.gauge, &state.section)?,
        dirac,
        spinor_l4: spinor_l4_density(&state.spinor),
    })
}

/// Evaluates every term of the action.
pub fn action_total(state: &FieldState) -> Result<ActionBreakdown> {
    let d = densities(state)?;
    let dom = &state.domain;
    let yang_mills = sum_h2(dom, &d.yang_mills);
    let higgs = sum_h2(dom, &d.higgs);
    let dirac = sum_h2(dom, &d.dirac);
    Ok(ActionBreakdown {
        yang_mills,
        higgs,
        dirac,
        total: yang_mills + higgs + dirac,
        spinor_l4: sum_h2(dom, &d.spinor_l4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{apply_gauge, GaugeTransformation};
    use crate::lie::{FiberPoint, Group, GroupElement, LieAlgebraElement};
    use crate::synthetic;
    use std::f64::consts::PI;

    fn north() -> FiberPoint {
        FiberPoint::new(Vector3::z()).unwrap()
    }

    #[test]
    fn vacuum_has_zero_action() {
        let dom = Domain::new(16, 1.0).unwrap();
        let s = FieldState::vacuum(dom, Model::new(Group::Su2), &north());
        assert_eq!(action_total(&s).unwrap(), ActionBreakdown::zero());
    }

    #[test]
    fn constant_nonabelian_curvature_energy() {
        // Constant A gives F = [ξ₁, ξ₂] everywhere, so YM = ⟨F,F⟩·L².
        let dom = Domain::new(16, 2.0).unwrap();
        let model = Model::new(Group::Su2);
        let (x1, x2) = ([0.5, 0.0, 0.0], [0.0, 0.8, 0.0]);
        let a = GaugeField::from_fn(&dom, Group::Su2, |_, _| [x1, x2]);
        let f = LieAlgebraElement::from_coords(Group::Su2, &x1)
            .bracket_unchecked(&LieAlgebraElement::from_coords(Group::Su2, &x2));
        // [τ₁, τ₂] = τ₃, so F = 0.4 τ₃ and ⟨F,F⟩ = 0.16.
        assert!((model.norm_sq(&f) - 0.16).abs() < 1e-15);
        let ym = yang_mills_energy(&dom, &model, &a).unwrap();
        assert!((ym - 0.16 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn yang_mills_of_shear_field() {
        // A = (−sin(2πy/L)·i, 0): F = i(2π/L)cos(2πy/L), ∫⟨F,F⟩ = 2·(2π/L)²·L²/2.
        let dom = Domain::new(128, 1.0).unwrap();
        let model = Model::new(Group::U1);
        let a = GaugeField::from_fn(&dom, Group::U1, |_, y| [[-(2.0 * PI * y).sin(), 0.0, 0.0], [0.0; 3]]);
        let ym = yang_mills_energy(&dom, &model, &a).unwrap();
        let exact = (2.0 * PI).powi(2);
        assert!((ym - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn densities_sum_to_breakdown() {
        let dom = Domain::new(16, 1.0).unwrap();
        let s = synthetic::random_state(&dom, Model::new(Group::Su2), 3, 0.5, 1.0).unwrap();
        let b = action_total(&s).unwrap();
        assert!((b.total - (b.yang_mills + b.higgs + b.dirac)).abs() <= 1e-12 * b.total.abs().max(1.0));
        assert!(b.yang_mills >= 0.0 && b.higgs >= 0.0 && b.spinor_l4 >= 0.0);
    }

    #[test]
    fn twisted_dirac_is_self_adjoint() {
        let dom = Domain::new(16, 1.0).unwrap();
        let s = synthetic::random_state(&dom, Model::new(Group::Su2), 4, 0.5, 1.0).unwrap();
        let t = synthetic::random_state(&dom, Model::new(Group::Su2), 5, 0.5, 1.0).unwrap();
        let phi = TwistedSpinorField::projected(t.spinor.values().to_vec(), &s.section).unwrap();
        let dpsi = twisted_dirac(&dom, &s.gauge, &s.section, &s.spinor).unwrap();
        let dphi = twisted_dirac(&dom, &s.gauge, &s.section, &phi).unwrap();
        let lhs = dpsi.inner(&phi, &dom);
        let rhs = s.spinor.inner(&dphi, &dom);
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        assert!(dpsi.check_tangent(&s.section).is_ok());
    }

    #[test]
    fn twisted_dirac_constant_data_is_zero() {
        let dom = Domain::new(8, 1.0).unwrap();
        let u = SectionField::constant(dom.len(), &north());
        let mut sp: Spinor = [Vector3::zeros(), Vector3::zeros()];
        sp[0][0] = C64::new(0.3, 0.1);
        sp[1][1] = C64::new(-1.0, 0.5);
        let psi = TwistedSpinorField::new(vec![sp; dom.len()], &u).unwrap();
        let d = twisted_dirac(&dom, &GaugeField::zero(Group::U1, dom.len()), &u, &psi).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn twisted_dirac_rejects_non_tangent() {
        let dom = Domain::new(8, 1.0).unwrap();
        let u = SectionField::constant(dom.len(), &north());
        let mut sp: Spinor = [Vector3::zeros(), Vector3::zeros()];
        sp[0][2] = C64::new(1.0, 0.0);
        let psi = TwistedSpinorField::from_parts(vec![sp; dom.len()]);
        assert!(twisted_dirac(&dom, &GaugeField::zero(Group::U1, dom.len()), &u, &psi).is_err());
    }

    #[test]
    fn constant_gauge_invariance() {
        let dom = Domain::new(16, 1.0).unwrap();
        let s = synthetic::random_state(&dom, Model::new(Group::Su2), 6, 0.5, 1.0).unwrap();
        let g = GroupElement::exp(&LieAlgebraElement::from_coords(Group::Su2, &[1.0, -2.0, 0.5]));
        let t = apply_gauge(&GaugeTransformation::constant(g, dom.len()), &s).unwrap();
        let (a, b) = (action_total(&s).unwrap(), action_total(&t).unwrap());
        assert!((a.yang_mills - b.yang_mills).abs() < 1e-10);
        assert!((a.higgs - b.higgs).abs() < 1e-10);
        assert!((a.dirac - b.dirac).abs() < 1e-10);
    }

    #[test]
    fn conformal_factor_leaves_higgs_and_dirac_unchanged() {
        let dom = Domain::new(16, 1.0).unwrap();
        let s = synthetic::random_state(&dom, Model::new(Group::U1), 7, 0.5, 1.0).unwrap();
        let sig = dom.sample(|x, y| 0.4 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
        let mut c = s.clone();
        c.domain = dom.clone().with_conformal_exponent(sig).unwrap();
        let (a, b) = (action_total(&s).unwrap(), action_total(&c).unwrap());
        assert!((a.higgs - b.higgs).abs() <= 1e-12 * a.higgs.max(1.0));
        assert!((a.dirac - b.dirac).abs() <= 1e-12 * a.dirac.abs().max(1.0));
        assert!((a.yang_mills - b.yang_mills).abs() > 1e-6);
    }
}
