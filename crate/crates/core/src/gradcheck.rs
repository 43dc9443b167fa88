//! Finite-difference oracle for the residuals.
//!
//! Each check compares a directional derivative of `action_total` with the
//! pairing of the analytic residual against the same direction. Derivatives
//! use the fourth-order central stencil
//! `[8(S(ε) − S(−ε)) − (S(2ε) − S(−2ε))] / 12ε`.

use nalgebra::Vector3;

use crate::action::action_total;
use crate::error::{Result, YmhdError};
use crate::euler_lagrange::{residuals, ResidualTriple};
use crate::fields::{FieldState, GaugeField, SectionField, Spinor, TwistedSpinorField};
use crate::lie::{exp_ambient, transport_c};
use crate::synthetic;

pub const DEFAULT_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    A,
    U,
    Psi,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::A => "A",
            FieldKind::U => "u",
            FieldKind::Psi => "psi",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DirectionalCheck {
    pub field: FieldKind,
    pub finite_difference: f64,
    pub analytic: f64,
    pub rel_error: f64,
}

impl DirectionalCheck {
    /// `rel_error = |fd − an| / max(|fd|, |an|, floor)`.
    fn new(field: FieldKind, fd: f64, an: f64, floor: f64) -> Self {
        let scale = fd.abs().max(an.abs()).max(floor);
        let rel_error = if scale == 0.0 { 0.0 } else { (fd - an).abs() / scale };
        DirectionalCheck {
            field,
            finite_difference: fd,
            analytic: an,
            rel_error,
        }
    }
}

/// Fourth-order central difference of `f` at 0.
pub fn central_derivative<F>(f: F, eps: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(YmhdError::domain("finite-difference step must be positive"));
    }
    let d1 = f(eps)? - f(-eps)?;
    let d2 = f(2.0 * eps)? - f(-2.0 * eps)?;
    Ok((8.0 * d1 - d2) / (12.0 * eps))
}

fn total(state: &FieldState) -> Result<f64> {
    Ok(action_total(state)?.total)
}

/// Roundoff floor for the relative error: derivatives of size
/// `1e−10·sqrt(|S|)·‖direction‖` or below count as zero. Without it a
/// direction whose derivative vanishes by symmetry compares two rounding
/// errors.
fn noise_floor(state: &FieldState, dir_norm: f64) -> Result<f64> {
    let a = action_total(state)?;
    let s = a.yang_mills.abs() + a.higgs.abs() + a.dirac.abs();
    Ok(1e-10 * s.sqrt() * dir_norm)
}

/// Moves `u` along geodesics `exp_u(t v)` and parallel transports ψ with it.
pub fn geodesic_perturbation(state: &FieldState, v: &[Vector3<f64>], t: f64) -> FieldState {
    let u = state.section.values();
    let moved: Vec<Vector3<f64>> = u.iter().zip(v).map(|(y, w)| exp_ambient(y, &(w * t))).collect();
    let psi: Vec<Spinor> = state
        .spinor
        .values()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(p, (y, w))| {
            let tw = w * t;
            [transport_c(y, &tw, &p[0]), transport_c(y, &tw, &p[1])]
        })
        .collect();
    FieldState {
        domain: state.domain.clone(),
        model: state.model,
        gauge: state.gauge.clone(),
        section: SectionField::from_parts(moved),
        spinor: TwistedSpinorField::from_parts(psi),
    }
}

fn check_a_with(state: &FieldState, res: &ResidualTriple, dir: &GaugeField, eps: f64) -> Result<DirectionalCheck> {
    let fd = central_derivative(
        |t| {
            let mut s = state.clone();
            s.gauge = state.gauge.axpy(t, dir);
            total(&s)
        },
        eps,
    )?;
    let an = res.res_a.inner(dir, &state.domain, &state.model);
    let floor = noise_floor(state, dir.l2_norm_sq(&state.domain, &state.model).sqrt())?;
    Ok(DirectionalCheck::new(FieldKind::A, fd, an, floor))
}

fn check_u_with(state: &FieldState, res: &ResidualTriple, v: &[Vector3<f64>], eps: f64) -> Result<DirectionalCheck> {
    if v.len() != state.domain.len() {
        return Err(YmhdError::structural("direction does not match grid"));
    }
    let fd = central_derivative(|t| total(&geodesic_perturbation(state, v, t)), eps)?;
    let h2 = state.domain.h().powi(2);
    let an = h2 * res.res_u.iter().zip(v).map(|(r, w)| r.dot(w)).sum::<f64>();
    let norm = (h2 * v.iter().map(|w| w.norm_squared()).sum::<f64>()).sqrt();
    Ok(DirectionalCheck::new(FieldKind::U, fd, an, noise_floor(state, norm)?))
}

fn check_psi_with(
    state: &FieldState,
    res: &ResidualTriple,
    phi: &TwistedSpinorField,
    eps: f64,
) -> Result<DirectionalCheck> {
    phi.check_tangent(&state.section)?;
    let fd = central_derivative(
        |t| {
            let mut s = state.clone();
            let psi: Vec<Spinor> = state
                .spinor
                .values()
                .iter()
                .zip(phi.values())
                .map(|(p, q)| {
                    let c = num_complex::Complex64::new(t, 0.0);
                    [p[0] + q[0] * c, p[1] + q[1] * c]
                })
                .collect();
            s.spinor = TwistedSpinorField::from_parts(psi);
            total(&s)
        },
        eps,
    )?;
    let an = 2.0 * res.res_psi.inner(phi, &state.domain).re;
    let floor = noise_floor(state, phi.l2_norm_sq(&state.domain).sqrt())?;
    Ok(DirectionalCheck::new(FieldKind::Psi, fd, an, floor))
}

/// Checks `residual_A` against `d/dt S(A + t·dir)`.
pub fn check_a(state: &FieldState, dir: &GaugeField, eps: f64) -> Result<DirectionalCheck> {
    check_a_with(state, &residuals(state)?, dir, eps)
}

/// Checks `residual_u` against the derivative along geodesics `exp_u(t v)`.
pub fn check_u(state: &FieldState, v: &[Vector3<f64>], eps: f64) -> Result<DirectionalCheck> {
    check_u_with(state, &residuals(state)?, v, eps)
}

/// Checks `2·residual_psi` against `d/dt S(ψ + tφ)`.
pub fn check_psi(state: &FieldState, phi: &TwistedSpinorField, eps: f64) -> Result<DirectionalCheck> {
    check_psi_with(state, &residuals(state)?, phi, eps)
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub checks: Vec<DirectionalCheck>,
}

impl ConsistencyReport {
    /// Largest relative error for one field.
    pub fn max_rel(&self, field: FieldKind) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.field == field)
            .map(|c| c.rel_error)
            .fold(0.0, f64::max)
    }
}

/// Runs `n_dirs` seeded random smooth directions for each field. The ψ
/// directions are skipped when ψ = 0 is part of the model (`include_psi`
/// false).
pub fn gradient_consistency(
    state: &FieldState,
    n_dirs: usize,
    seed: u64,
    include_psi: bool,
) -> Result<ConsistencyReport> {
    let res = residuals(state)?;
    let dom = &state.domain;
    let mut checks = Vec::with_capacity(3 * n_dirs);
    for i in 0..n_dirs as u64 {
        let s = seed.wrapping_mul(1000).wrapping_add(i * 3);
        let da = synthetic::random_direction_a(dom, state.model.group, s);
        checks.push(check_a_with(state, &res, &da, DEFAULT_EPS)?);
        let du = synthetic::random_direction_u(dom, &state.section, s + 1);
        checks.push(check_u_with(state, &res, &du, DEFAULT_EPS)?);
        if include_psi {
            let dp = synthetic::random_direction_psi(dom, &state.section, s + 2);
            checks.push(check_psi_with(state, &res, &dp, DEFAULT_EPS)?);
        }
    }
    Ok(ConsistencyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::lie::{Group, Model};

    #[test]
    fn stencil_is_exact_on_quartics() {
        let d = central_derivative(|t| Ok(1.0 + 3.0 * t - t * t + 2.0 * t.powi(3) + t.powi(4)), 0.1).unwrap();
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn residuals_are_gradients_both_groups() {
        let dom = Domain::new(16, 1.0).unwrap();
        for g in [Group::U1, Group::Su2] {
            let s = synthetic::random_state(&dom, Model::new(g), 4, 0.4, 0.7).unwrap();
            let r = gradient_consistency(&s, 2, 9, true).unwrap();
            for c in &r.checks {
                assert!(c.rel_error < 1e-6, "{g:?} {c:?}");
            }
        }
    }

    #[test]
    fn conformal_factor_enters_gradients_consistently() {
        let dom = Domain::new(16, 1.0).unwrap();
        let sigma = dom.sample(|x, y| 0.3 * (2.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).cos());
        let dom = dom.with_conformal_exponent(sigma).unwrap();
        let s = synthetic::random_state(&dom, Model::new(Group::Su2), 5, 0.4, 0.7).unwrap();
        let r = gradient_consistency(&s, 2, 3, true).unwrap();
        for c in &r.checks {
            assert!(c.rel_error < 1e-6, "{c:?}");
        }
    }

    #[test]
    fn direction_length_mismatch_is_structural() {
        let dom = Domain::new(8, 1.0).unwrap();
        let s = synthetic::random_state(&dom, Model::new(Group::U1), 1, 0.1, 0.0).unwrap();
        assert!(matches!(check_u(&s, &[Vector3::zeros()], 1e-3), Err(YmhdError::Structural(_))));
    }
}
