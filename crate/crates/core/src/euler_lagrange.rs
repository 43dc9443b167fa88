//! Exact gradients of the discrete action and the coupling tensors.
//!
//! Residuals are gradients with respect to the flat grid products
//!
//! ```text
//! ⟨B, C⟩ = h² Σ_n Σ_α ⟨B_α, C_α⟩_𝔤,   ⟨v, w⟩ = h² Σ_n v·w,   ⟨φ, χ⟩ = h² Re Σ_n φ†χ.
//! ```
//!
//! * `residual_A`: `d/dt S(A + tB) = ⟨residual_A, B⟩`.
//! * `residual_u`: `d/dt S(exp_u(tv), PT ψ) = ⟨residual_u, v⟩`, with ψ parallel
//!   transported along the geodesics so that it stays tangent.
//! * `residual_psi = Dψ`: `d/dt S(ψ + tφ) = 2⟨residual_psi, φ⟩`.
//!
//! With ψ = 0 and A = 0, `residual_u = −2τ(u)` where τ is the discrete
//! harmonic-map tension field.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::action::{ambient_dirac, twisted_dirac_raw};
use crate::error::{Result, YmhdError};
use crate::fields::{
    curvature, spinor_norm_sq, vertical_differential, vertical_differential_ambient, FieldState,
    GaugeField, SectionField, Spinor, TwistedSpinorField,
};
use crate::geometry::{diff, gamma_apply, node_map, Domain};
use crate::lie::{project, sphere_curvature, tangent_frame, LieAlgebraElement, Model};

type C64 = Complex64;

/// The three residuals and their (L², L², L⁴) norms.
#[derive(Clone, Debug)]
pub struct ResidualTriple {
    pub res_a: GaugeField,
    pub res_u: Vec<Vector3<f64>>,
    pub res_psi: TwistedSpinorField,
    pub norms: (f64, f64, f64),
}

/// Frame components `ψ^i_s = e_i · ψ_s` of a tangent spinor.
#[inline]
fn frame_components(frame: &[Vector3<f64>; 2], psi: &Spinor) -> [[C64; 2]; 2] {
    let dot = |e: &Vector3<f64>, w: &Vector3<C64>| w[0] * e[0] + w[1] * e[1] + w[2] * e[2];
    [
        [dot(&frame[0], &psi[0]), dot(&frame[0], &psi[1])],
        [dot(&frame[1], &psi[0]), dot(&frame[1], &psi[1])],
    ]
}

/// `⟨a, γ_α b⟩` on the spinor index.
#[inline]
fn gamma_pair(dir: usize, a: &[C64; 2], b: &[C64; 2]) -> C64 {
    let g = gamma_apply(dir, *b);
    a[0].conj() * g[0] + a[1].conj() * g[1]
}

fn check_inputs(dom: &Domain, u: &SectionField, psi: &TwistedSpinorField) -> Result<()> {
    if u.len() != dom.len() || psi.len() != dom.len() {
        return Err(YmhdError::structural("section or spinor does not match grid"));
    }
    psi.check_tangent(u)
}

/// `Q_ψ`: the A-gradient of the Dirac term.
///
/// For each node, direction α and basis element ε_a the coefficient is
/// `Σ_ij ⟨ψ^j, γ_α ψ^i⟩ · h(∂₁∂₂μ(ε_a, e_i), e_j)` over an orthonormal tangent
/// frame `(e_1, e_2)` at `u`, converted to an algebra element by the inner
/// product.
pub fn q_psi(
    dom: &Domain,
    model: &Model,
    u: &SectionField,
    psi: &TwistedSpinorField,
) -> Result<GaugeField> {
    check_inputs(dom, u, psi)?;
    q_psi_with_frames(dom, model, u, psi, |y| tangent_frame(y))
}

/// [`q_psi`] with a caller-chosen orthonormal frame at each node.
pub fn q_psi_with_frames<F>(
    dom: &Domain,
    model: &Model,
    u: &SectionField,
    psi: &TwistedSpinorField,
    frame: F,
) -> Result<GaugeField>
where
    F: Fn(&Vector3<f64>) -> [Vector3<f64>; 2] + Sync,
{
    check_inputs(dom, u, psi)?;
    let group = model.group;
    let dim = group.dim();
    let basis: Vec<_> = (0..dim).map(|a| group.basis(a).generator()).collect();
    let per_node = node_map(dom.len(), |k| {
        let y = &u.values()[k];
        let e = frame(y);
        let c = frame_components(&e, &psi.values()[k]);
        let mut out = [[0.0; 3]; 2];
        for dir in 0..2 {
            for a in 0..dim {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..2 {
                    let le = project(y, &(basis[a] * e[i]));
                    for j in 0..2 {
                        s += gamma_pair(dir, &c[j], &c[i]) * le.dot(&e[j]);
                    }
                }
                out[dir][a] = s.re;
            }
        }
        out
    });
    Ok(partials_to_field(model, &per_node))
}

fn partials_to_field(model: &Model, per_node: &[[[f64; 3]; 2]]) -> GaugeField {
    let d = model.group.dim();
    let comp = |dir: usize| {
        per_node
            .iter()
            .map(|p| model.from_partials(&p[dir][..d]))
            .collect::<Vec<LieAlgebraElement>>()
    };
    GaugeField::from_parts(model.group, [comp(0), comp(1)])
}

/// Gradient of the Yang–Mills term.
pub fn yang_mills_gradient(dom: &Domain, a: &GaugeField) -> Result<GaugeField> {
    let f = curvature(dom, a)?;
    let w: Vec<LieAlgebraElement> = f
        .iter()
        .zip(dom.sigma())
        .map(|(x, s)| *x * (-2.0 * s).exp())
        .collect();
    let [ax, ay] = a.comps();
    let gx = node_map(dom.len(), |k| (diff(dom, &w, 1, k) + ay[k].bracket_unchecked(&w[k])) * 2.0);
    let gy = node_map(dom.len(), |k| (diff(dom, &w, 0, k) + ax[k].bracket_unchecked(&w[k])) * -2.0);
    Ok(GaugeField::from_parts(a.group(), [gx, gy]))
}

/// A-gradient of the Higgs term: `2 dμ_u^t(d_A u)`.
pub fn higgs_gradient_a(
    dom: &Domain,
    model: &Model,
    a: &GaugeField,
    u: &SectionField,
) -> Result<GaugeField> {
    let v = vertical_differential_ambient(dom, a, u)?;
    let group = model.group;
    let dim = group.dim();
    let basis: Vec<_> = (0..dim).map(|c| group.basis(c).generator()).collect();
    let per_node = node_map(dom.len(), |k| {
        let y = &u.values()[k];
        let mut out = [[0.0; 3]; 2];
        for dir in 0..2 {
            for c in 0..dim {
                out[dir][c] = 2.0 * v[dir][k].dot(&(basis[c] * y));
            }
        }
        out
    });
    Ok(partials_to_field(model, &per_node))
}

/// Discrete vertical tension `τ = P_u Σ_α (D_α V_α + L_{A_α} V_α)` with
/// `V_α = D_α u + L_{A_α} u`. The u-gradient of the Higgs term is `−2τ`.
pub fn tension(dom: &Domain, a: &GaugeField, u: &SectionField) -> Result<Vec<Vector3<f64>>> {
    let v = vertical_differential_ambient(dom, a, u)?;
    Ok(node_map(dom.len(), |k| {
        let mut s = Vector3::zeros();
        for dir in 0..2 {
            s += diff(dom, &v[dir], dir, k) + a.comp(dir)[k].generator() * v[dir][k];
        }
        project(&u.values()[k], &s)
    }))
}

/// `𝒱`: the u-gradient of the Dirac term, with ψ carried along by parallel
/// transport. Equals `−2 Re Σ_s conj(ψ_s)·(u·(Hψ)_s)`.
pub fn curvature_coupling(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    psi: &TwistedSpinorField,
) -> Result<Vec<Vector3<f64>>> {
    check_inputs(dom, u, psi)?;
    let h = ambient_dirac(dom, a, psi.values())?;
    Ok(node_map(dom.len(), |k| {
        let y = &u.values()[k];
        let p = &psi.values()[k];
        let mut out = Vector3::zeros();
        for s in 0..2 {
            let n = h[k][s][0] * y[0] + h[k][s][1] * y[1] + h[k][s][2] * y[2];
            for c in 0..3 {
                out[c] -= 2.0 * (p[s][c].conj() * n).re;
            }
        }
        project(y, &out)
    }))
}

/// Continuum form of [`curvature_coupling`]:
/// `2 Σ_α Σ_ij Re⟨ψ^i, γ_α ψ^j⟩ R(e_i, d_A u(e_α)) e_j`.
/// It agrees with the discrete gradient up to O(h²).
pub fn curvature_coupling_tensorial(
    dom: &Domain,
    a: &GaugeField,
    u: &SectionField,
    psi: &TwistedSpinorField,
) -> Result<Vec<Vector3<f64>>> {
    check_inputs(dom, u, psi)?;
    let v = vertical_differential(dom, a, u)?;
    Ok(node_map(dom.len(), |k| {
        let y = &u.values()[k];
        let e = tangent_frame(y);
        let c = frame_components(&e, &psi.values()[k]);
        let mut out = Vector3::zeros();
        for dir in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let w = gamma_pair(dir, &c[i], &c[j]).re;
                    out += sphere_curvature(&e[i], &v[dir][k], &e[j]) * (2.0 * w);
                }
            }
        }
        out
    }))
}

pub fn residual_a(state: &FieldState) -> Result<GaugeField> {
    let dom = &state.domain;
    let m = &state.model;
    let mut r = yang_mills_gradient(dom, &state.gauge)?;
    r = r.axpy(1.0, &higgs_gradient_a(dom, m, &state.gauge, &state.section)?);
    if !state.spinor.is_zero() {
        r = r.axpy(1.0, &q_psi(dom, m, &state.section, &state.spinor)?);
    }
    Ok(r)
}

pub fn residual_u(state: &FieldState) -> Result<Vec<Vector3<f64>>> {
    let dom = &state.domain;
    let t = tension(dom, &state.gauge, &state.section)?;
    let mut r: Vec<Vector3<f64>> = t.iter().map(|x| x * -2.0).collect();
    if !state.spinor.is_zero() {
        let c = curvature_coupling(dom, &state.gauge, &state.section, &state.spinor)?;
        for (x, y) in r.iter_mut().zip(&c) {
            *x += y;
        }
    }
    Ok(r)
}

pub fn residual_psi(state: &FieldState) -> Result<TwistedSpinorField> {
    state.spinor.check_tangent(&state.section)?;
    Ok(TwistedSpinorField::from_parts(twisted_dirac_raw(
        &state.domain,
        &state.gauge,
        &state.section,
        state.spinor.values(),
    )?))
}

fn l2_vec(dom: &Domain, v: &[Vector3<f64>]) -> f64 {
    (dom.h() * dom.h() * v.iter().map(|x| x.norm_squared()).sum::<f64>()).sqrt()
}

fn l4_spinor(dom: &Domain, p: &TwistedSpinorField) -> f64 {
    (dom.h() * dom.h() * p.values().iter().map(|x| spinor_norm_sq(x).powi(2)).sum::<f64>()).powf(0.25)
}

pub fn residuals(state: &FieldState) -> Result<ResidualTriple> {
    let dom = &state.domain;
    let res_a = residual_a(state)?;
    let res_u = residual_u(state)?;
    let res_psi = residual_psi(state)?;
    let norms = (
        res_a.l2_norm_sq(dom, &state.model).sqrt(),
        l2_vec(dom, &res_u),
        l4_spinor(dom, &res_psi),
    );
    Ok(ResidualTriple {
        res_a,
        res_u,
        res_psi,
        norms,
    })
}

/// `(‖res_A‖_{L²}, ‖res_u‖_{L²}, ‖res_ψ‖_{L⁴})`.
pub fn residual_norms(state: &FieldState) -> Result<(f64, f64, f64)> {
    Ok(residuals(state)?.norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::lie::{FiberPoint, Group};
    use crate::synthetic;
    use std::f64::consts::PI;

    #[test]
    fn vacuum_residuals_vanish() {
        let dom = Domain::new(16, 1.0).unwrap();
        let s = FieldState::vacuum(dom, Model::new(Group::Su2), &FiberPoint::new(Vector3::x()).unwrap());
        assert_eq!(residual_norms(&s).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_abelian_connection_at_fixed_point() {
        let dom = Domain::new(16, 1.0).unwrap();
        let mut s = FieldState::vacuum(dom.clone(), Model::new(Group::U1), &FiberPoint::new(Vector3::z()).unwrap());
        s.gauge = GaugeField::from_fn(&dom, Group::U1, |_, _| [[0.4, 0.0, 0.0], [-1.1, 0.0, 0.0]]);
        let (a, b, c) = residual_norms(&s).unwrap();
        assert_eq!((a, b, c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn equatorial_geodesic_has_vanishing_tension_to_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let dom = Domain::new(n, 1.0).unwrap();
            let mut s = FieldState::vacuum(dom.clone(), Model::new(Group::U1), &FiberPoint::new(Vector3::z()).unwrap());
            s.section = SectionField::from_fn(&dom, |x, _| {
                Vector3::new((2.0 * PI * x).cos(), (2.0 * PI * x).sin(), 0.0)
            })
            .unwrap();
            let r = residual_u(&s).unwrap();
            errs.push(r.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        // the circle map is exactly harmonic for the discrete scheme as well
        assert!(errs.iter().all(|e| *e < 1e-10), "{errs:?}");
    }

    #[test]
    fn q_psi_is_frame_independent() {
        let dom = Domain::new(8, 1.0).unwrap();
        let model = Model::new(Group::Su2);
        let s = synthetic::random_state(&dom, model, 9, 0.3, 1.0).unwrap();
        let a = q_psi(&dom, &model, &s.section, &s.spinor).unwrap();
        let rotated = |y: &Vector3<f64>| {
            let e = tangent_frame(y);
            let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
            [e[0] * c + e[1] * sn, e[1] * c - e[0] * sn]
        };
        let b = q_psi_with_frames(&dom, &model, &s.section, &s.spinor, rotated).unwrap();
        assert!(a.axpy(-1.0, &b).max_abs() < 1e-10);
        let flipped = |y: &Vector3<f64>| {
            let e = tangent_frame(y);
            [e[1], e[0]]
        };
        let c = q_psi_with_frames(&dom, &model, &s.section, &s.spinor, flipped).unwrap();
        assert!(a.axpy(-1.0, &c).max_abs() < 1e-10);
    }

    #[test]
    fn q_psi_matches_direct_pairing() {
        // ⟨ψ, γ_α L_a ψ⟩ evaluated without any frame.
        let dom = Domain::new(8, 1.0).unwrap();
        let model = Model::new(Group::Su2);
        let s = synthetic::random_state(&dom, model, 10, 0.3, 1.0).unwrap();
        let q = q_psi(&dom, &model, &s.section, &s.spinor).unwrap();
        for k in 0..dom.len() {
            let p = &s.spinor.values()[k];
            for dir in 0..2 {
                for a in 0..3 {
                    let l = Group::Su2.basis(a).generator().map(|x| C64::new(x, 0.0));
                    let lp = [l * p[0], l * p[1]];
                    let g = gamma_apply(dir, lp);
                    let v = (0..2).map(|c| p[c].dotc(&g[c])).sum::<C64>();
                    let expect = v.re / model.basis_norm_sq();
                    assert!((q.comp(dir)[k].coords()[a] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tensorial_coupling_agrees_to_second_order() {
        let mut errs = Vec::new();
        for n in [32, 64, 128, 256] {
            let dom = Domain::new(n, 1.0).unwrap();
            let s = synthetic::smooth_state(&dom, Model::new(Group::Su2), 0.3, 1.0).unwrap();
            let a = curvature_coupling(&dom, &s.gauge, &s.section, &s.spinor).unwrap();
            let b = curvature_coupling_tensorial(&dom, &s.gauge, &s.section, &s.spinor).unwrap();
            errs.push(a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
        }
        assert!((errs[2] / errs[3]).log2() > 1.8, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() > 1.8, "{errs:?}");
    }

    #[test]
    fn coupling_vanishes_for_zero_spinor_and_parallel_section() {
        let dom = Domain::new(8, 1.0).unwrap();
        let model = Model::new(Group::U1);
        let s = synthetic::random_state(&dom, model, 11, 0.3, 0.0).unwrap();
        let c = curvature_coupling(&dom, &s.gauge, &s.section, &s.spinor).unwrap();
        assert!(c.iter().all(|v| v.norm() == 0.0));
        let y = FiberPoint::new(Vector3::z()).unwrap();
        let u = SectionField::constant(dom.len(), &y);
        let rnd = synthetic::random_state(&dom, model, 12, 0.3, 1.0).unwrap();
        let psi = TwistedSpinorField::projected(rnd.spinor.values().to_vec(), &u).unwrap();
        // U(1) fixes the north pole, so d_A u = 0 for any A.
        let t = curvature_coupling_tensorial(&dom, &rnd.gauge, &u, &psi).unwrap();
        assert!(t.iter().all(|v| v.norm() < 1e-15));
    }
}
