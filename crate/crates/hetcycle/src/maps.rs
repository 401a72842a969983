//! The four cross-section maps and the first-return map R.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const TWO_PI: f64 = 2.0 * PI;

/// Half-width of the unit cross sections at E.
pub const E_SECTION_HALF_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    EIn,
    EOut,
    PIn,
    POut,
}

/// A point of one of the four sections: (y,z) on E_in, (x,y) on E_out,
/// (ψ,z) on P_in and (ψ,ρ) on P_out. `psi_lift` is the unwrapped angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub section: Section,
    pub u: f64,
    pub v: f64,
    pub psi_lift: f64,
}

impl SectionPoint {
    pub fn e_in(y: f64, z: f64) -> Self {
        SectionPoint { section: Section::EIn, u: y, v: z, psi_lift: y }
    }

    pub fn e_out(x: f64, y: f64) -> Self {
        SectionPoint { section: Section::EOut, u: x, v: y, psi_lift: x }
    }

    pub fn p_in(psi: f64, z: f64) -> Self {
        SectionPoint { section: Section::PIn, u: psi, v: z, psi_lift: psi }
    }

    pub fn p_out(psi: f64, rho: f64) -> Self {
        SectionPoint { section: Section::POut, u: psi, v: rho, psi_lift: psi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EscapeReason {
    #[serde(rename = "NegativeZ_at_Pin")]
    NegativeZAtPin,
    #[serde(rename = "NegativeZ_at_Ein")]
    NegativeZAtEin,
    LeftWorkingSquare,
    NonpositiveLogArgument,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MapOutcome {
    Continued(SectionPoint),
    Escaped(EscapeReason),
}

impl MapOutcome {
    pub fn point(self) -> Option<SectionPoint> {
        match self {
            MapOutcome::Continued(p) => Some(p),
            MapOutcome::Escaped(_) => None,
        }
    }

    pub fn into_result(self) -> std::result::Result<SectionPoint, EscapeReason> {
        match self {
            MapOutcome::Continued(p) => Ok(p),
            MapOutcome::Escaped(r) => Err(r),
        }
    }
}

/// Representative of an angle in [−π, π).
pub fn principal(theta: f64) -> f64 {
    theta - TWO_PI * ((theta + PI) / TWO_PI).floor()
}

/// Number of full turns removed by the winding policy: ψ_eff = psi_lift − 2πn ∈ [−π, π).
pub fn winding(psi_lift: f64) -> i64 {
    ((psi_lift + PI) / TWO_PI).floor() as i64
}

/// Log-coordinate of a P_in point relative to winding n: A_n(ψ,z) = ψ − ln(z)/η_e − 2nπ.
pub fn a_coordinate(p: &ModelParams, psi: f64, z: f64, n: i64) -> f64 {
    psi - z.ln() / p.eta_e - TWO_PI * n as f64
}

/// Inverse of [`a_coordinate`]: the height z of the P_in point with angle ψ and coordinate A_n.
pub fn z_from_a(p: &ModelParams, psi: f64, a: f64, n: i64) -> f64 {
    (p.eta_e * (psi - a - TWO_PI * n as f64)).exp()
}

pub fn pi_e(p: &ModelParams, q: &SectionPoint) -> MapOutcome {
    debug_assert_eq!(q.section, Section::EIn);
    let (y, z) = (q.u, q.v);
    if z <= 0.0 {
        return MapOutcome::Escaped(EscapeReason::NegativeZAtEin);
    }
    let d = p.exponents();
    MapOutcome::Continued(SectionPoint::e_out(z.powf(d.delta1), y * z.powf(d.delta2)))
}

pub fn pi_p(p: &ModelParams, q: &SectionPoint) -> MapOutcome {
    debug_assert_eq!(q.section, Section::PIn);
    let z = q.v;
    if z <= 0.0 {
        return MapOutcome::Escaped(EscapeReason::NegativeZAtPin);
    }
    let turn = -z.ln() / p.eta_e;
    MapOutcome::Continued(SectionPoint {
        section: Section::POut,
        u: q.u + turn,
        v: z.powf(p.exponents().delta_p),
        psi_lift: q.psi_lift + turn,
    })
}

pub fn pi_p_inverse(p: &ModelParams, q: &SectionPoint) -> Result<SectionPoint> {
    debug_assert_eq!(q.section, Section::POut);
    let rho = q.v;
    if rho <= 0.0 {
        return Err(Error::NonpositiveLogArgument);
    }
    let dp = p.exponents().delta_p;
    let turn = rho.ln() / (p.eta_e * dp);
    Ok(SectionPoint { section: Section::PIn, u: q.u + turn, v: rho.powf(1.0 / dp), psi_lift: q.psi_lift + turn })
}

pub fn psi_ep(p: &ModelParams, q: &SectionPoint, alpha: f64) -> SectionPoint {
    debug_assert_eq!(q.section, Section::EOut);
    let [[a11, a12], [a21, a22]] = p.effective_a();
    let psi = a11 * q.u + a12 * q.v + alpha * p.xi1;
    let z = a21 * q.u + a22 * q.v + alpha;
    SectionPoint { section: Section::PIn, u: psi, v: z, psi_lift: principal(psi) }
}

/// Ψ_PE evaluated on the branch ψ_eff = psi_lift − 2πn.
pub fn psi_pe_winding(p: &ModelParams, q: &SectionPoint, beta: f64, n: i64) -> SectionPoint {
    debug_assert_eq!(q.section, Section::POut);
    let psi = q.psi_lift - TWO_PI * n as f64;
    psi_pe_local(p, psi, q.v, beta)
}

pub fn psi_pe(p: &ModelParams, q: &SectionPoint, beta: f64) -> SectionPoint {
    psi_pe_winding(p, q, beta, winding(q.psi_lift))
}

/// Ψ_PE at local angle ψ (already reduced by the winding) and radius ρ.
pub fn psi_pe_local(p: &ModelParams, psi: f64, rho: f64, beta: f64) -> SectionPoint {
    let y = p.b11 * psi + p.b12 * rho + beta * p.xi2;
    let z = p.b22 * rho + p.k * psi * psi + beta * (1.0 + p.nu * psi);
    SectionPoint::e_in(y, z)
}

/// Intermediate data of one pass around the cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnStep {
    pub winding: i64,
    pub p_out: SectionPoint,
    pub e_in: SectionPoint,
    pub e_out: SectionPoint,
    pub p_in: SectionPoint,
}

fn in_p_square(p: &ModelParams, psi_lift: f64, v: f64) -> bool {
    principal(psi_lift).abs() <= p.tau && v <= p.tau
}

fn in_e_square(q: &SectionPoint) -> bool {
    q.u.abs() <= E_SECTION_HALF_WIDTH && q.v.abs() <= E_SECTION_HALF_WIDTH
}

/// One full pass with every working-square check; the winding is chosen by the policy.
pub fn return_step(
    p: &ModelParams,
    q: &SectionPoint,
    alpha: f64,
    beta: f64,
) -> std::result::Result<ReturnStep, EscapeReason> {
    debug_assert_eq!(q.section, Section::PIn);
    if q.v <= 0.0 {
        return Err(EscapeReason::NegativeZAtPin);
    }
    if !in_p_square(p, q.psi_lift, q.v) {
        return Err(EscapeReason::LeftWorkingSquare);
    }
    let p_out = pi_p(p, q).into_result()?;
    if !in_p_square(p, p_out.psi_lift, p_out.v) {
        return Err(EscapeReason::LeftWorkingSquare);
    }
    let n = winding(p_out.psi_lift);
    let e_in = psi_pe_winding(p, &p_out, beta, n);
    if e_in.v <= 0.0 {
        return Err(EscapeReason::NegativeZAtEin);
    }
    if !in_e_square(&e_in) {
        return Err(EscapeReason::LeftWorkingSquare);
    }
    let e_out = pi_e(p, &e_in).into_result()?;
    if !in_e_square(&e_out) {
        return Err(EscapeReason::LeftWorkingSquare);
    }
    let p_in = psi_ep(p, &e_out, alpha);
    if p_in.v <= 0.0 {
        return Err(EscapeReason::NegativeZAtPin);
    }
    if !in_p_square(p, p_in.psi_lift, p_in.v) {
        return Err(EscapeReason::LeftWorkingSquare);
    }
    Ok(ReturnStep { winding: n, p_out, e_in, e_out, p_in })
}

/// R = Ψ_EP ∘ Π_E ∘ Ψ_PE ∘ Π_P with escape semantics.
pub fn return_map(p: &ModelParams, q: &SectionPoint, alpha: f64, beta: f64) -> MapOutcome {
    match return_step(p, q, alpha, beta) {
        Ok(s) => MapOutcome::Continued(s.p_in),
        Err(r) => MapOutcome::Escaped(r),
    }
}

/// E_in image (y, z) of the P_in point (ψ, z) on winding branch n, without domain checks.
pub fn to_e_in_on_branch(p: &ModelParams, psi: f64, z: f64, n: i64, beta: f64) -> (f64, f64) {
    let a = a_coordinate(p, psi, z, n);
    let e = psi_pe_local(p, a, z.powf(p.exponents().delta_p), beta);
    (e.u, e.v)
}

/// E_in image of the point with strip coordinates (ψ, A) on branch n; exact in A.
pub fn to_e_in_from_strip(p: &ModelParams, psi: f64, a: f64, n: i64, beta: f64) -> (f64, f64) {
    let rho = (p.exponents().delta_p * p.eta_e * (psi - a - TWO_PI * n as f64)).exp();
    let e = psi_pe_local(p, a, rho, beta);
    (e.u, e.v)
}

/// Second half of a pass: E_in (y, z_E) to P_in (ψ, z); None if z_E ≤ 0.
pub fn from_e_in(p: &ModelParams, y: f64, z_e: f64, alpha: f64) -> Option<(f64, f64)> {
    let out = pi_e(p, &SectionPoint::e_in(y, z_e)).point()?;
    let q = psi_ep(p, &out, alpha);
    Some((q.u, q.v))
}

/// R on branch n without working-square checks; None only if z_E ≤ 0.
pub fn return_on_branch(p: &ModelParams, psi: f64, z: f64, n: i64, alpha: f64, beta: f64) -> Option<(f64, f64)> {
    let (y, z_e) = to_e_in_on_branch(p, psi, z, n, beta);
    from_e_in(p, y, z_e, alpha)
}

/// The closed form of R under rotation, α = β = 0 and b11 = b12 = 1 (any η_e).
pub fn closed_form_r(p: &ModelParams, psi: f64, z: f64, n: i64) -> (f64, f64) {
    let d = p.exponents();
    let a = a_coordinate(p, psi, z, n);
    let zp = z.powf(d.delta_p);
    let base = p.b22 * zp + p.k * a * a;
    (-(p.b11 * a + p.b12 * zp) * base.powf(d.delta2), base.powf(d.delta1))
}

/// Chain-rule factors of DR on branch n, in application order reversed:
/// [DΨ_EP, DΠ_E, DΨ_PE, DΠ_P].
fn jacobian_factors(p: &ModelParams, psi: f64, z: f64, n: i64, beta: f64) -> [Matrix2<f64>; 4] {
    let d = p.exponents();
    let a = a_coordinate(p, psi, z, n);
    let rho = z.powf(d.delta_p);
    let d_pi_p = Matrix2::new(1.0, -1.0 / (p.eta_e * z), 0.0, d.delta_p * rho / z);
    let d_psi_pe = Matrix2::new(p.b11, p.b12, 2.0 * p.k * a + beta * p.nu, p.b22);
    let y_e = p.b11 * a + p.b12 * rho + beta * p.xi2;
    let z_e = p.b22 * rho + p.k * a * a + beta * (1.0 + p.nu * a);
    let d_pi_e = Matrix2::new(
        0.0,
        d.delta1 * z_e.powf(d.delta1 - 1.0),
        z_e.powf(d.delta2),
        d.delta2 * y_e * z_e.powf(d.delta2 - 1.0),
    );
    let [[a11, a12], [a21, a22]] = p.effective_a();
    [Matrix2::new(a11, a12, a21, a22), d_pi_e, d_psi_pe, d_pi_p]
}

/// Analytic chain-rule Jacobian of R in (ψ, z) on branch n, without domain checks.
pub fn jacobian_on_branch(p: &ModelParams, psi: f64, z: f64, n: i64, beta: f64) -> Matrix2<f64> {
    let [f1, f2, f3, f4] = jacobian_factors(p, psi, z, n, beta);
    f1 * f2 * f3 * f4
}

/// det DR as the product of the factor determinants, accurate where the entries of
/// DR cancel.
pub fn jacobian_det_on_branch(p: &ModelParams, psi: f64, z: f64, n: i64, beta: f64) -> f64 {
    jacobian_factors(p, psi, z, n, beta).iter().map(|m| m.determinant()).product()
}

/// DR⁻¹ as the product of the factor inverses; None if a factor is singular.
pub fn jacobian_inverse_on_branch(p: &ModelParams, psi: f64, z: f64, n: i64, beta: f64) -> Option<Matrix2<f64>> {
    let [f1, f2, f3, f4] = jacobian_factors(p, psi, z, n, beta);
    Some(f4.try_inverse()? * f3.try_inverse()? * f2.try_inverse()? * f1.try_inverse()?)
}

/// Jacobian of R at a point whose orbit stays in the domain.
pub fn jacobian_r(p: &ModelParams, q: &SectionPoint, alpha: f64, beta: f64) -> Result<Matrix2<f64>> {
    let step = return_step(p, q, alpha, beta).map_err(Error::NotInDomain)?;
    Ok(jacobian_on_branch(p, q.u, q.v, step.winding, beta))
}

/// Central finite-difference Jacobian of R on branch n with step 1e−7 times the coordinate scale.
pub fn jacobian_fd(p: &ModelParams, psi: f64, z: f64, n: i64, alpha: f64, beta: f64) -> Option<Matrix2<f64>> {
    let h_psi = 1e-7 * psi.abs().max(p.tau);
    let h_z = 1e-7 * z;
    let f = |s: f64, t: f64| return_on_branch(p, s, t, n, alpha, beta);
    let (a1, a2) = f(psi + h_psi, z)?;
    let (b1, b2) = f(psi - h_psi, z)?;
    let (c1, c2) = f(psi, z + h_z)?;
    let (d1, d2) = f(psi, z - h_z)?;
    Some(Matrix2::new(
        (a1 - b1) / (2.0 * h_psi),
        (c1 - d1) / (2.0 * h_z),
        (a2 - b2) / (2.0 * h_psi),
        (c2 - d2) / (2.0 * h_z),
    ))
}

/// Largest column-wise relative discrepancy between two Jacobians.
pub fn column_relative_error(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    (0..2)
        .map(|j| {
            let ca = a.column(j);
            (ca - b.column(j)).norm() / ca.norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn params_dp2() -> ModelParams {
        ModelParams { eta_c: 2.0, eta_e: 1.0, ..presets::case5_curves() }
    }

    #[test]
    fn pi_e_examples() {
        let p = ModelParams { lambda1: 1.0, lambda2: 3.0, mu: 2.0, ..presets::case5_curves() };
        let out = pi_e(&p, &SectionPoint::e_in(0.0, 0.04)).point().unwrap();
        assert!((out.u - 0.2).abs() < 1e-15 && out.v == 0.0);
        let out = pi_e(&p, &SectionPoint::e_in(1.0, 0.04)).point().unwrap();
        assert!((out.u - 0.2).abs() < 1e-15 && (out.v - 0.008).abs() < 1e-15);
        assert_eq!(
            pi_e(&p, &SectionPoint::e_in(0.3, -0.01)),
            MapOutcome::Escaped(EscapeReason::NegativeZAtEin)
        );
    }

    #[test]
    fn pi_p_examples() {
        let p = params_dp2();
        let out = pi_p(&p, &SectionPoint::p_in(0.0, (-TWO_PI).exp())).point().unwrap();
        assert!((out.u - TWO_PI).abs() < 1e-14 && (out.psi_lift - TWO_PI).abs() < 1e-14);
        assert!((out.v / (-2.0 * TWO_PI).exp() - 1.0).abs() < 1e-14);
        let out = pi_p(&p, &SectionPoint::p_in(0.3, 1.0)).point().unwrap();
        assert_eq!((out.u, out.v), (0.3, 1.0));
        assert_eq!(pi_p(&p, &SectionPoint::p_in(0.2, 0.0)), MapOutcome::Escaped(EscapeReason::NegativeZAtPin));
    }

    #[test]
    fn pi_p_inverse_examples() {
        let p = params_dp2();
        let back = pi_p_inverse(&p, &SectionPoint::p_out(0.0, (-2.0 * TWO_PI).exp())).unwrap();
        assert!((back.u + TWO_PI).abs() < 1e-14);
        assert!((back.v / (-TWO_PI).exp() - 1.0).abs() < 1e-14);
        assert_eq!(pi_p_inverse(&p, &SectionPoint::p_out(0.0, 0.0)), Err(Error::NonpositiveLogArgument));
    }

    #[test]
    fn psi_ep_examples() {
        let p = presets::case5_curves();
        let q = psi_ep(&p, &SectionPoint::e_out(0.0, 0.0), 0.0);
        assert_eq!((q.u, q.v), (0.0, 0.0));
        let q = psi_ep(&p, &SectionPoint::e_out(0.2, 0.05), 0.0);
        assert_eq!((q.u, q.v), (-0.05, 0.2));
        let p = ModelParams { a11: 1.0, a12: 0.0, a21: 1.0, a22: 1.0, xi1: 0.0, rotation_simplification: false, ..p };
        let q = psi_ep(&p, &SectionPoint::e_out(0.1, 0.02), 0.01);
        assert!((q.u - 0.1).abs() < 1e-15 && (q.v - 0.13).abs() < 1e-15);
    }

    #[test]
    fn psi_pe_examples() {
        let p = ModelParams { b11: 1.0, b12: 1.0, b22: -1.0, k: 1.0, nu: 1.0, xi2: 0.0, ..presets::case5_curves() };
        let e = psi_pe(&p, &SectionPoint::p_out(0.2, 0.3), 0.1);
        assert!((e.u - 0.5).abs() < 1e-15 && (e.v + 0.14).abs() < 1e-15);
        let e = psi_pe(&p, &SectionPoint::p_out(0.0, 0.0), 0.0);
        assert_eq!((e.u, e.v), (0.0, 0.0));
        let e = psi_pe(&p, &SectionPoint::p_out(0.07, 0.0), 0.0);
        assert!((e.u - 0.07).abs() < 1e-15 && (e.v - 0.0049).abs() < 1e-15);
    }

    #[test]
    fn winding_policy_centres_the_angle() {
        for lift in [-7.0, -3.0, 0.0, 3.1, 6.3, 40.0] {
            let n = winding(lift);
            let eff = lift - TWO_PI * n as f64;
            assert!((-PI..PI).contains(&eff));
            assert!((principal(lift) - eff).abs() < 1e-12);
        }
    }

    #[test]
    fn escapes_from_large_z() {
        let p = presets::case5_horseshoe();
        let q = SectionPoint::p_in(0.0, p.tau);
        assert_eq!(return_map(&p, &q, 0.0, 0.0), MapOutcome::Escaped(EscapeReason::LeftWorkingSquare));
        let p = presets::case2();
        let q = SectionPoint::p_in(0.0, z_from_a(&p, 0.0, 0.05, 3));
        assert_eq!(return_map(&p, &q, 0.0, 0.0), MapOutcome::Escaped(EscapeReason::NegativeZAtEin));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = presets::case5_curves();
        let z: f64 = 1e-5;
        let n = winding(-z.ln() / p.eta_e);
        let ja = jacobian_on_branch(&p, 0.0, z, n, 0.0);
        let jf = jacobian_fd(&p, 0.0, z, n, 0.0, 0.0).unwrap();
        assert!(column_relative_error(&ja, &jf) < 1e-5);
    }

    #[test]
    fn determinant_vanishes_and_trace_grows() {
        let p = presets::case5_horseshoe();
        let mut last_det = f64::INFINITY;
        for &z in &[1e-6, 1e-8, 1e-10] {
            let n = winding(-f64::ln(z) / p.eta_e);
            let psi = 0.05 + z.ln() / p.eta_e + TWO_PI * n as f64;
            let j = jacobian_on_branch(&p, psi, z, n, 0.0);
            assert!(j.determinant().abs() < last_det);
            assert!(j.trace().abs() > 2.0);
            last_det = j.determinant().abs();
        }
        assert!(last_det < 1e-6);
    }
}
