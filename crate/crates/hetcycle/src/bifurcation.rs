//! Bifurcation curves in the (α, β) unfolding plane: E-homoclinics (single and
//! multipulse), P-homoclinic tangencies, P→E heteroclinic tangencies, turn counting
//! and a labelled parameter sweep.
//!
//! Every scalar equation is solved in t = ln α (or ln of a distance to a reference
//! curve) by bracketing, never by derivative-based iteration: the residuals contain
//! α^δP and ln α, whose derivatives blow up at the organizing center.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::first_strip_index;
use crate::maps::{self, a_coordinate, SectionPoint, TWO_PI};
use crate::model::{ModelParams, Numerics};
use crate::roots::{bisect_predicate, bracketed_root, golden_min, linear_fit};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifKind {
    HomE(i64),
    HomEMulti(Vec<i64>),
    HomP,
    HomPn(i64),
    HetPE(i64),
    RegionBoundary,
}

impl BifKind {
    pub fn label(&self) -> String {
        match self {
            BifKind::HomE(n) => format!("HomE({n})"),
            BifKind::HomEMulti(v) => {
                let s: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                format!("HomE({})", s.join(","))
            }
            BifKind::HomP => "HomP".into(),
            BifKind::HomPn(n) => format!("HomP({n})"),
            BifKind::HetPE(n) => format!("HetPE({n})"),
            BifKind::RegionBoundary => "RegionBoundary".into(),
        }
    }
}

/// A curve in parameter space with per-point residuals of its defining equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifCurve {
    pub kind: BifKind,
    pub points: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
    pub tip: Option<(f64, f64)>,
    pub winding: Vec<i64>,
}

fn require_positive_a21(p: &ModelParams) -> Result<()> {
    if p.effective_a21() > 0.0 {
        Ok(())
    } else {
        Err(Error::WrongCase("requires a21 > 0".into()))
    }
}

// ---------------------------------------------------------------------------
// counting section

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingRecord {
    pub turns_per_visit: Vec<i64>,
    pub escaped: bool,
    pub total_returns: usize,
}

/// Turns around P (crossings of the half-plane ψ ≡ 0, read off the lifted angle)
/// on each visit of the orbit of `q`, until it escapes or `max_returns` passes.
pub fn count_turns(p: &ModelParams, q: &SectionPoint, alpha: f64, beta: f64, max_returns: usize) -> CountingRecord {
    let mut rec = CountingRecord { turns_per_visit: Vec::new(), escaped: false, total_returns: 0 };
    let mut q = *q;
    while rec.total_returns < max_returns {
        let Some(out) = maps::pi_p(p, &q).point() else {
            rec.escaped = true;
            break;
        };
        let turns = maps::winding(out.psi_lift) - maps::winding(q.psi_lift);
        rec.turns_per_visit.push(turns.max(0));
        match maps::return_step(p, &q, alpha, beta) {
            Ok(step) => {
                q = step.p_in;
                rec.total_returns += 1;
            }
            Err(_) => {
                rec.escaped = true;
                break;
            }
        }
    }
    rec
}

// ---------------------------------------------------------------------------
// scalar scanning

fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

/// Roots of a partially defined function on [lo, hi]: sign changes on a uniform grid
/// of `m` points, refined by bracketed bisection.
fn scan_roots<F: Fn(f64) -> Option<f64>>(f: F, lo: f64, hi: f64, m: usize) -> Vec<f64> {
    scan_roots_at(f, &linspace(lo, hi, m))
}

/// Roots of a partially defined function from sign changes between consecutive
/// sample points `xs` (ascending). Boundaries of the definition domain are located
/// first so roots next to them are not lost.
fn scan_roots_at<F: Fn(f64) -> Option<f64>>(f: F, xs: &[f64]) -> Vec<f64> {
    let mut pts: Vec<(f64, Option<f64>)> = Vec::with_capacity(xs.len() + 8);
    for &x in xs {
        let v = f(x).filter(|v| v.is_finite());
        if let Some(&(xp, vp)) = pts.last() {
            if vp.is_some() != v.is_some() {
                let defined_left = vp.is_some();
                let (a, b) = bisect_predicate(|y| f(y).filter(|v| v.is_finite()).is_some() == defined_left, xp, x);
                let edge = if defined_left { a } else { b };
                if edge != xp && edge != x {
                    pts.push((edge, f(edge)));
                }
            }
        }
        pts.push((x, v));
    }
    let mut roots = Vec::new();
    for w in pts.windows(2) {
        if let ((a, Some(fa)), (b, Some(fb))) = (w[0], w[1]) {
            if fa == 0.0 {
                roots.push(a);
            } else if fa.signum() != fb.signum() && fb != 0.0 {
                let g = |x: f64| f(x).unwrap_or(f64::NAN);
                if let Ok(r) = bracketed_root(g, a, b, 1e-15 * a.abs().max(1.0)) {
                    roots.push(r);
                }
            }
        }
    }
    if let Some(&(x, Some(v))) = pts.last() {
        if v == 0.0 {
            roots.push(x);
        }
    }
    roots
}

// ---------------------------------------------------------------------------
// E-homoclinics

/// The point W^u(E) ∩ Σ_P^in = Ψ_EP(0, 0).
fn unstable_e_point(p: &ModelParams, alpha: f64) -> SectionPoint {
    maps::psi_ep(p, &SectionPoint::e_out(0.0, 0.0), alpha)
}

/// A_n(α) = αξ1 − ln(α)/η_e − 2πn, the local angle of W^u(E) after n turns around P.
pub fn a_n_of_alpha(p: &ModelParams, alpha: f64, n: i64) -> f64 {
    let q = unstable_e_point(p, alpha);
    a_coordinate(p, q.u, q.v, n)
}

/// k·A_n² + νβ·A_n + b22·α^δP + β: zero exactly when W^u(E) returns onto W^s_loc(E)
/// after n turns around P.
pub fn home_residual(p: &ModelParams, alpha: f64, beta: f64, n: i64) -> f64 {
    let a = a_n_of_alpha(p, alpha, n);
    p.k * a * a + p.nu * beta * a + p.b22 * alpha.powf(p.exponents().delta_p) + beta
}

/// Shooting residual: z-coordinate in Σ_E^in of W^u(E) pushed through Π_P and Ψ_PE on
/// winding branch n, using the map pipeline. None if α ≤ 0.
pub fn home_shooting(p: &ModelParams, alpha: f64, beta: f64, n: i64) -> Option<f64> {
    let out = maps::pi_p(p, &unstable_e_point(p, alpha)).point()?;
    Some(maps::psi_pe_winding(p, &out, beta, n).v)
}

/// Whether k·A² + νβ·A + b22·α^δP + β = 0 has a real root A ≥ 0.
pub fn home_admissible(p: &ModelParams, alpha: f64, beta: f64) -> bool {
    let c = p.b22 * alpha.powf(p.exponents().delta_p) + beta;
    let b = p.nu * beta;
    let disc = b * b - 4.0 * p.k * c;
    if disc < 0.0 {
        return false;
    }
    let r = disc.sqrt();
    (-b + r) / (2.0 * p.k) >= 0.0 || (-b - r) / (2.0 * p.k) >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomERoot {
    pub n: i64,
    pub branch: i8,
    pub alpha: f64,
    pub beta: f64,
    pub a_n: f64,
    pub shooting_residual: f64,
}

fn t_window(p: &ModelParams, n: i64, alpha_max: f64) -> (f64, f64) {
    (-p.eta_e * (TWO_PI * (n + 2) as f64 + 20.0), alpha_max.ln())
}

/// α-roots of the E-homoclinic equation at fixed β for every n in `ns` and both
/// quadratic branches A_± = (−νβ ± √D)/2k, restricted to α ∈ (0, α_max] and A_n ≥ 0.
/// Each root is checked against the shooting residual (|z_E| ≤ 1e−10).
pub fn home_roots(p: &ModelParams, beta: f64, ns: &[i64], alpha_max: f64) -> Result<Vec<HomERoot>> {
    require_positive_a21(p)?;
    let dp = p.exponents().delta_p;
    let tasks: Vec<(i64, i8)> = ns.iter().flat_map(|&n| [(n, 1i8), (n, -1i8)]).collect();
    let found: Vec<Result<Vec<HomERoot>>> = tasks
        .par_iter()
        .map(|&(n, br)| {
            let g = |t: f64| {
                let alpha = t.exp();
                let d = (p.nu * beta).powi(2) - 4.0 * p.k * (p.b22 * alpha.powf(dp) + beta);
                if d < 0.0 {
                    return None;
                }
                let a_branch = (-p.nu * beta + br as f64 * d.sqrt()) / (2.0 * p.k);
                Some(a_n_of_alpha(p, alpha, n) - a_branch)
            };
            let (lo, hi) = t_window(p, n, alpha_max);
            let mut out = Vec::new();
            for t in scan_roots(g, lo, hi, 600) {
                let alpha = t.exp();
                let a_n = a_n_of_alpha(p, alpha, n);
                if a_n < 0.0 {
                    continue;
                }
                let res = home_shooting(p, alpha, beta, n).unwrap_or(f64::INFINITY);
                if !(res.abs() <= 1e-10) {
                    return Err(Error::NoRootInBracket(format!("n={n} branch {br}: shooting residual {res:e}")));
                }
                out.push(HomERoot { n, branch: br, alpha, beta, a_n, shooting_residual: res });
            }
            Ok(out)
        })
        .collect();
    let mut roots = Vec::new();
    for r in found {
        roots.extend(r?);
    }
    if roots.is_empty() {
        return Err(Error::NoRootInBracket(format!("no E-homoclinic root at beta={beta}")));
    }
    Ok(roots)
}

/// Roots in α of the shooting residual alone (brute-force scan, no closed form).
pub fn home_shooting_roots(p: &ModelParams, beta: f64, n: i64, alpha_max: f64) -> Vec<f64> {
    let (lo, hi) = t_window(p, n, alpha_max);
    let f = |t: f64| home_shooting(p, t.exp(), beta, n);
    let xs = linspace(lo, hi, 2000);
    let vals: Vec<Option<f64>> = xs.iter().map(|&t| f(t)).collect();
    // a close pair of roots can hide between samples of equal sign: push each local
    // extremum of the residual towards zero and add it as a sample
    let mut ts = xs.clone();
    for i in 1..xs.len() - 1 {
        if let (Some(a), Some(b), Some(c)) = (vals[i - 1], vals[i], vals[i + 1]) {
            let s = b.signum();
            if a.signum() == s && c.signum() == s && b.abs() < a.abs() && b.abs() <= c.abs() {
                let (x, _) = golden_min(|t| f(t).map_or(f64::INFINITY, |v| s * v), xs[i - 1], xs[i + 1], 1e-15);
                ts.push(x);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    scan_roots_at(f, &ts).into_iter().map(f64::exp).collect()
}

/// β on the discriminant-zero locus (νβ)² = 4k(b22α^δP + β), on the branch through
/// the origin: β = −2|k|·b22·α^δP / (|k| + √(k² + ν²k·b22·α^δP)).
fn beta_on_discriminant(p: &ModelParams, alpha: f64) -> Option<f64> {
    let c = p.b22 * alpha.powf(p.exponents().delta_p);
    let r = p.k * p.k + p.nu * p.nu * p.k * c;
    (r >= 0.0).then(|| -2.0 * p.k.abs() * c / (p.k.abs() + r.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tip {
    pub n: i64,
    pub alpha: f64,
    pub beta: f64,
    pub a_n: f64,
}

/// Tip (fold) points of Hom_n(E): the double root of the quadratic in A_n, i.e. the
/// discriminant-zero β together with A_n(α) = −νβ/2k. Tips with A_n ∈ [−π, π) are
/// accepted (the double root itself may be slightly negative).
pub fn home_tips(p: &ModelParams, ns: &[i64]) -> Result<Vec<Tip>> {
    require_positive_a21(p)?;
    ns.par_iter()
        .map(|&n| {
            let h = |t: f64| {
                let alpha = t.exp();
                let beta = beta_on_discriminant(p, alpha)?;
                Some(a_n_of_alpha(p, alpha, n) + p.nu * beta / (2.0 * p.k))
            };
            let lo = -p.eta_e * (TWO_PI * n as f64 + 2.0 * PI) - 1.0;
            let hi = -p.eta_e * (TWO_PI * n as f64 - 2.0 * PI) + 1.0;
            scan_roots(h, lo, hi, 400)
                .into_iter()
                .map(|t| {
                    let alpha = t.exp();
                    let beta = beta_on_discriminant(p, alpha).unwrap();
                    Tip { n, alpha, beta, a_n: a_n_of_alpha(p, alpha, n) }
                })
                .find(|tip| tip.a_n >= -PI && tip.a_n < PI)
                .ok_or(Error::NoTipFound(n))
        })
        .collect()
}

/// The exact fold of Hom_n(E) in the parameter plane: the extremum of the graph
/// β_n(α) next to the leading-order tip (a maximum for k > 0, a minimum for k < 0).
pub fn home_fold(p: &ModelParams, n: i64) -> Result<Tip> {
    let tip = home_tips(p, &[n])?[0];
    let dp = p.exponents().delta_p;
    let beta_n = |t: f64| {
        let alpha = t.exp();
        let a = a_n_of_alpha(p, alpha, n);
        -(p.k * a * a + p.b22 * alpha.powf(dp)) / (1.0 + p.nu * a)
    };
    let t0 = tip.alpha.ln();
    let w = 0.5 * p.eta_e;
    let (t, _) = golden_min(|t| -p.k.signum() * beta_n(t), t0 - w, t0 + w, 1e-15);
    let alpha = t.exp();
    Ok(Tip { n, alpha, beta: beta_n(t), a_n: a_n_of_alpha(p, alpha, n) })
}

/// Hom_n(E) as the graph β_n(α) = −(kA_n² + b22α^δP)/(1 + νA_n), sampled for A_n from
/// min(0, A_tip) to π, ordered by α.
pub fn home_curve(p: &ModelParams, n: i64, samples: usize) -> Result<BifCurve> {
    let tip = home_tips(p, &[n])?[0];
    let dp = p.exponents().delta_p;
    let a_lo = tip.a_n.min(0.0);
    let alpha_of_a = |a: f64| -> Option<f64> {
        let lo = -p.eta_e * (TWO_PI * n as f64 + a + PI) - 1.0;
        let hi = -p.eta_e * (TWO_PI * n as f64 + a - PI) + 1.0;
        bracketed_root(|t| a_n_of_alpha(p, t.exp(), n) - a, lo, hi, 1e-15).ok().map(f64::exp)
    };
    let mut pts = Vec::new();
    for i in 0..samples.max(2) {
        let a = a_lo + (PI - a_lo) * i as f64 / (samples.max(2) - 1) as f64;
        if 1.0 + p.nu * a <= 0.0 {
            continue;
        }
        if let Some(alpha) = alpha_of_a(a) {
            let an = a_n_of_alpha(p, alpha, n);
            let beta = -(p.k * an * an + p.b22 * alpha.powf(dp)) / (1.0 + p.nu * an);
            pts.push((alpha, beta));
        }
    }
    pts.push((tip.alpha, tip.beta));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let residuals = pts.iter().map(|&(a, b)| home_residual(p, a, b, n)).collect();
    Ok(BifCurve { kind: BifKind::HomE(n), points: pts, residuals, tip: Some((tip.alpha, tip.beta)), winding: vec![n] })
}

/// The smallest n ≥ 1 for which Hom_n(E) has a root with α ≤ α_max at the given β.
pub fn first_homoclinic_index(p: &ModelParams, beta: f64, alpha_max: f64) -> Option<i64> {
    (1..=200).find(|&n| home_roots(p, beta, &[n], alpha_max).is_ok())
}

// ---------------------------------------------------------------------------
// multipulse E-homoclinics

/// Residual of the k-pulse E-homoclinic Hom_{n_1,…,n_k}(E), n_1 ≤ … ≤ n_k: W^u(E)
/// first makes n_k turns around P, lands just above W^s_loc(E), and each later
/// excursion starts higher in Σ_P^in and so turns fewer times; the passes therefore
/// run through the list from the back. Each entry angle must lie within [−π, π) of
/// its branch, and the last pass lands on z = 0 in Σ_E^in. None if an intermediate
/// pass leaves the cycle.
pub fn multipulse_residual(p: &ModelParams, alpha: f64, beta: f64, pulses: &[i64]) -> Option<f64> {
    multipulse_pass(p, alpha, beta, pulses).map(|r| r.0)
}

/// The residual together with the smallest intermediate height above W^s_loc(E).
fn multipulse_pass(p: &ModelParams, alpha: f64, beta: f64, pulses: &[i64]) -> Option<(f64, f64)> {
    let dp = p.exponents().delta_p;
    let q = unstable_e_point(p, alpha);
    let (mut psi, mut z) = (q.u, q.v);
    let mut min_height = f64::INFINITY;
    for (j, &n) in pulses.iter().rev().enumerate() {
        if z <= 0.0 {
            return None;
        }
        let a = a_coordinate(p, psi, z, n);
        if !(-PI..PI).contains(&a) {
            return None;
        }
        let e = maps::psi_pe_local(p, a, z.powf(dp), beta);
        if j + 1 == pulses.len() {
            return Some((e.v, min_height));
        }
        min_height = min_height.min(e.v);
        (psi, z) = maps::from_e_in(p, e.u, e.v, alpha)?;
    }
    None
}

/// Intermediate passes closer than this to W^s_loc(E) are treated as landing on it:
/// there the k-pulse residual degenerates into the residual of a shorter pulse.
const MIN_INTERMEDIATE_HEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_points: usize,
    pub alpha_max: f64,
    pub beta_bounds: (f64, f64),
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            initial_step: 1e-2,
            max_step: 0.1,
            min_step: 1e-8,
            max_points: 2000,
            alpha_max: 0.1,
            beta_bounds: (-0.1, 0.1),
        }
    }
}

/// Root of a partially defined function of s nearest to s = 0, searching [−w, w]
/// and then wider windows. Next to an edge of the definition domain the function
/// may dip through zero between two samples of equal sign; such dips are found by
/// minimizing towards the edge.
fn line_root<F: Fn(f64) -> Option<f64>>(line: &F, w0: f64) -> Option<f64> {
    let val = |s: f64| line(s).filter(|v| v.is_finite());
    let mut w = w0;
    for _ in 0..4 {
        let mut pts: Vec<(f64, Option<f64>, bool)> = Vec::new();
        for k in -8..=8 {
            let s = w * k as f64 / 8.0;
            let v = val(s);
            if let Some(&(sp, vp, _)) = pts.last() {
                if vp.is_some() != v.is_some() {
                    let left = vp.is_some();
                    let (a, b) = bisect_predicate(|x| val(x).is_some() == left, sp, s);
                    let e = if left { a } else { b };
                    if e != sp && e != s {
                        pts.push((e, val(e), true));
                    }
                }
            }
            pts.push((s, v, false));
        }
        let mut brackets = Vec::new();
        for q in pts.windows(2) {
            let ((a, Some(fa), ea), (b, Some(fb), eb)) = (q[0], q[1]) else { continue };
            if fa == 0.0 {
                brackets.push((a, a));
            } else if fa.signum() != fb.signum() {
                brackets.push((a, b));
            } else if ea || eb {
                let sg = fa.signum();
                let (m, fm) = golden_min(|x| val(x).map_or(f64::INFINITY, |v| sg * v), a, b, 1e-15 * w0);
                if fm < 0.0 {
                    brackets.push(if ea { (m, b) } else { (a, m) });
                }
            }
        }
        let best = brackets.into_iter().min_by(|x, y| (x.0 + x.1).abs().total_cmp(&(y.0 + y.1).abs()));
        if let Some((a, b)) = best {
            if a == b {
                return Some(a);
            }
            return bracketed_root(|x| val(x).unwrap_or(f64::NAN), a, b, 1e-15 * w0.max(1e-300)).ok();
        }
        w *= 2.0;
    }
    None
}

/// Pseudo-arclength continuation of {F = 0} in the scaled plane (ln α, β/β_scale)
/// with a bisection corrector along the gradient direction and step halving down to
/// `min_step`.
fn continue_curve<F: Fn(f64, f64) -> Option<f64> + Sync>(
    f: &F,
    seed: (f64, f64),
    beta_scale: f64,
    opts: &ContinuationOptions,
) -> Result<Vec<(f64, f64, f64)>> {
    let g = |u: [f64; 2]| f(u[0].exp(), u[1] * beta_scale);
    // Central differences, shrinking the step when the curve hugs an edge of the
    // definition domain.
    let grad = |u: [f64; 2]| -> Option<[f64; 2]> {
        [1e-7, 1e-9, 1e-11].into_iter().find_map(|h| {
            let gt = (g([u[0] + h, u[1]])? - g([u[0] - h, u[1]])?) / (2.0 * h);
            let gb = (g([u[0], u[1] + h])? - g([u[0], u[1] - h])?) / (2.0 * h);
            let nrm = gt.hypot(gb);
            (nrm > 0.0 && nrm.is_finite()).then_some([gt / nrm, gb / nrm])
        })
    };
    let u0 = [seed.0.ln(), seed.1 / beta_scale];
    let in_range = |u: [f64; 2]| {
        let b = u[1] * beta_scale;
        u[0].exp() <= opts.alpha_max && b >= opts.beta_bounds.0 && b <= opts.beta_bounds.1
    };
    let mut branches = Vec::new();
    for dir in [1.0, -1.0] {
        let mut pts = Vec::new();
        let mut u = u0;
        let Some(n0) = grad(u) else {
            return Err(Error::ContinuationStalled { alpha: seed.0, beta: seed.1 });
        };
        let mut tan = [-n0[1] * dir, n0[0] * dir];
        let mut h = opts.initial_step;
        while pts.len() < opts.max_points {
            let pred = [u[0] + h * tan[0], u[1] + h * tan[1]];
            let corrected = grad(pred).and_then(|nv| {
                let line = |s: f64| g([pred[0] + s * nv[0], pred[1] + s * nv[1]]);
                let s = line_root(&line, h)?;
                Some([pred[0] + s * nv[0], pred[1] + s * nv[1]])
            });
            let accepted = corrected.filter(|c| {
                let r = g(*c).map_or(f64::INFINITY, f64::abs);
                let moved = (c[0] - u[0]).hypot(c[1] - u[1]);
                r <= 1e-9 && moved <= 3.0 * h
            });
            match accepted {
                Some(c) => {
                    if !in_range(c) {
                        break;
                    }
                    let Some(nv) = grad(c) else { break };
                    let mut nt = [-nv[1], nv[0]];
                    if nt[0] * tan[0] + nt[1] * tan[1] < 0.0 {
                        nt = [-nt[0], -nt[1]];
                    }
                    tan = nt;
                    u = c;
                    pts.push((u[0].exp(), u[1] * beta_scale, g(u).unwrap_or(f64::NAN)));
                    h = (h * 1.5).min(opts.max_step);
                }
                None => {
                    h *= 0.5;
                    if h < opts.min_step {
                        break;
                    }
                }
            }
        }
        branches.push(pts);
    }
    let mut back = branches.remove(1);
    back.reverse();
    let fwd = branches.remove(0);
    let r0 = g(u0).unwrap_or(f64::NAN);
    Ok(back.into_iter().chain(std::iter::once((seed.0, seed.1, r0))).chain(fwd).collect())
}

/// Multipulse E-homoclinic curves Hom_{n1,…,nk}(E) (windings non-decreasing, see
/// [`multipulse_residual`]): seeds are bracketed in α at β = `seed_beta` next to the
/// roots of the 1-pulse curve with the largest winding, then each is continued in
/// both directions.
pub fn multipulse_home(
    p: &ModelParams,
    pulses: &[i64],
    seed_beta: f64,
    opts: &ContinuationOptions,
) -> Result<Vec<BifCurve>> {
    require_positive_a21(p)?;
    if pulses.len() < 2 {
        return Err(Error::InvalidArgument("multipulse curves need at least two pulses".into()));
    }
    if pulses.windows(2).any(|w| w[0] > w[1]) || pulses[0] < 1 {
        return Err(Error::InvalidArgument("pulse windings must be positive and non-decreasing".into()));
    }
    let n1 = pulses[pulses.len() - 1];
    let (lo, hi) = t_window(p, n1, opts.alpha_max);
    // k-pulse solutions sit next to 1-pulse ones, where the first pass lands just
    // above W^s_loc(E): cluster the samples geometrically around those roots.
    let mut xs = linspace(lo, hi, 2000);
    for t in scan_roots(|t| home_shooting(p, t.exp(), seed_beta, n1), lo, hi, 2000) {
        for k in 0..=120 {
            let d = 10f64.powf(-k as f64 / 8.0);
            xs.extend([t - d, t + d]);
        }
        xs.push(t);
    }
    xs.retain(|t| *t >= lo && *t <= hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let f = |a: f64, b: f64| {
        multipulse_pass(p, a, b, pulses).filter(|r| r.1 > MIN_INTERMEDIATE_HEIGHT * b.abs().max(1e-300)).map(|r| r.0)
    };
    let seeds: Vec<f64> = scan_roots_at(|t| f(t.exp(), seed_beta), &xs)
        .into_iter()
        .map(f64::exp)
        .filter(|&a| f(a, seed_beta).is_some_and(|r| r.abs() <= 1e-9))
        .collect();
    if seeds.is_empty() {
        return Err(Error::SeedNotBracketed);
    }
    let scale = seed_beta.abs().max(1e-12);
    seeds
        .par_iter()
        .map(|&a| {
            let pts = continue_curve(&f, (a, seed_beta), scale, opts)?;
            Ok(BifCurve {
                kind: BifKind::HomEMulti(pulses.to_vec()),
                points: pts.iter().map(|t| (t.0, t.1)).collect(),
                residuals: pts.iter().map(|t| t.2).collect(),
                tip: None,
                winding: pulses.to_vec(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// P-homoclinic tangency Hom(P)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomPPoint {
    pub beta: f64,
    pub alpha: f64,
    pub psi_star: f64,
    /// α from a direct extremum search of the image of W^u(P), with the a22 term kept.
    pub alpha_search: f64,
}

/// The image of W^u(P) ∩ Σ_P^out = {ρ = 0} in Σ_E^in at angle s: (y, z).
fn unstable_p_in_e(p: &ModelParams, s: f64, beta: f64) -> (f64, f64) {
    let e = maps::psi_pe_local(p, s, 0.0, beta);
    (e.u, e.v)
}

/// Tangency of W^u(P) with W^s_loc(P) at a given β > 0: ψ* = −νβ/2k and
/// α = −a21(kψ*² + β + νβψ*)^δ1.
pub fn homp_point(p: &ModelParams, beta: f64) -> Result<HomPPoint> {
    let d = p.exponents();
    let psi_star = -p.nu * beta / (2.0 * p.k);
    let s = p.k * psi_star * psi_star + beta + p.nu * beta * psi_star;
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("no tangency at beta={beta}: stationary value {s:e} < 0")));
    }
    let [[_, _], [a21, a22]] = p.effective_a();
    let alpha = -a21 * s.powf(d.delta1);
    let height = |x: f64| {
        let (y, z) = unstable_p_in_e(p, x, beta);
        let z = z.max(0.0);
        a21 * z.powf(d.delta1) + a22 * y * z.powf(d.delta2)
    };
    let sgn = p.k.signum();
    let w = 2.0 * (psi_star.abs() + (s / p.k.abs()).sqrt());
    let (_, hv) = golden_min(|x| sgn * height(x), psi_star - w, psi_star + w, 1e-14);
    Ok(HomPPoint { beta, alpha, psi_star, alpha_search: -sgn * hv })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomPFit {
    pub curve: BifCurve,
    pub points: Vec<HomPPoint>,
    /// Slope of ln|α| against ln β.
    pub exponent: f64,
    /// exp(intercept) of the same fit.
    pub prefactor: f64,
}

/// Hom(P) over a β grid with a log-log fit of the numerically searched |α| against β.
pub fn homp_curve(p: &ModelParams, betas: &[f64]) -> Result<HomPFit> {
    if betas.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidArgument("Hom(P) needs beta > 0".into()));
    }
    let points: Vec<HomPPoint> = betas.iter().map(|&b| homp_point(p, b)).collect::<Result<_>>()?;
    let lx: Vec<f64> = points.iter().map(|q| q.beta.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|q| q.alpha_search.abs().ln()).collect();
    let (exponent, intercept) = linear_fit(&lx, &ly);
    let curve = BifCurve {
        kind: BifKind::HomP,
        points: points.iter().map(|q| (q.alpha, q.beta)).collect(),
        residuals: points.iter().map(|q| ((q.alpha - q.alpha_search) / q.alpha).abs()).collect(),
        tip: None,
        winding: vec![],
    };
    Ok(HomPFit { curve, points, exponent, prefactor: intercept.exp() })
}

// ---------------------------------------------------------------------------
// tangencies between the image of W^u(P) and preimages of stable manifolds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TangencyTarget {
    /// W^s_loc(P) after one further pass with n turns (Hom_n(P)).
    StableP,
    /// W^s_loc(E) after one further pass with n turns (Het_n(PE)).
    StableE,
}

/// Sample of a tangency function: None where the first image of W^u(P) does not
/// return to Σ_P^in; otherwise the value (None when the second-pass angle A lies
/// outside [−π, π), i.e. on another winding branch) and A itself.
type CurveSample = Option<(Option<f64>, f64)>;

/// Tangency function at angle s of W^u(P): the z-coordinate in Σ_P^in after the
/// n-turn second pass (StableP; points landing below W^s(E) are sent to the cusp
/// point) or the z-coordinate in Σ_E^in (StableE).
fn tangency_fn(p: &ModelParams, target: TangencyTarget, n: i64, alpha: f64, beta: f64, s: f64) -> CurveSample {
    let (y, z_e) = unstable_p_in_e(p, s, beta);
    if z_e <= 0.0 {
        return None;
    }
    let (psi_c, z_c) = maps::from_e_in(p, y, z_e, alpha)?;
    if z_c <= 0.0 {
        return None;
    }
    let a = a_coordinate(p, psi_c, z_c, n);
    if !(-PI..PI).contains(&a) {
        return Some((None, a));
    }
    let e = maps::psi_pe_local(p, a, z_c.powf(p.exponents().delta_p), beta);
    let v = match target {
        TangencyTarget::StableE => e.v,
        TangencyTarget::StableP => match maps::from_e_in(p, e.u, e.v, alpha) {
            Some((_, z)) => z,
            None => unstable_e_point(p, alpha).v,
        },
    };
    Some((Some(v), a))
}

fn needs_split(l: CurveSample, r: CurveSample) -> bool {
    match (l, r) {
        (Some((_, a)), Some((_, b))) => {
            (a - b).abs() > 0.05 && a.max(b) >= -PI - 0.05 && a.min(b) < PI + 0.05
        }
        (None, None) => false,
        _ => true,
    }
}

/// Adaptive samples of a tangency function on [lo, hi]: intervals are split where
/// the second-pass angle moves by more than 0.05 inside the winding window, or where
/// the curve stops returning. The coarse grid is clustered geometrically around
/// `focus`.
fn adaptive_samples<F: Fn(f64) -> CurveSample>(f: &F, lo: f64, hi: f64, focus: f64) -> Vec<(f64, Option<f64>)> {
    const COARSE: usize = 257;
    const CAP: usize = 60_000;
    let eval = |s: f64| (s, f(s));
    let mut xs: Vec<f64> = (0..COARSE).map(|i| lo + (hi - lo) * i as f64 / (COARSE - 1) as f64).collect();
    for k in 0..=120 {
        let d = (hi - lo) * 10f64.powf(-k as f64 / 8.0);
        xs.extend([focus - d, focus + d].into_iter().filter(|x| *x > lo && *x < hi));
    }
    xs.push(focus);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let coarse: Vec<(f64, CurveSample)> = xs.into_iter().map(eval).collect();
    let mut out: Vec<(f64, CurveSample)> = Vec::with_capacity(4 * coarse.len());
    let min_width = 1e-15 * (hi - lo);
    for w in coarse.windows(2) {
        out.push(w[0]);
        let mut stack = vec![(w[0], w[1], 0u32)];
        let mut inner = Vec::new();
        while let Some((l, r, depth)) = stack.pop() {
            if !needs_split(l.1, r.1) || depth > 60 || r.0 - l.0 < min_width || out.len() + inner.len() > CAP {
                continue;
            }
            let m = eval(0.5 * (l.0 + r.0));
            inner.push(m);
            stack.push((m, r, depth + 1));
            stack.push((l, m, depth + 1));
        }
        inner.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.extend(inner);
    }
    out.push(*coarse.last().unwrap());
    out.into_iter().map(|(s, v)| (s, v.and_then(|t| t.0))).collect()
}

/// Zero structure of a tangency function: number of zeros (sign changes of the
/// sequence of run endpoints and refined critical values) and the refined critical
/// values.
fn zero_structure<F: Fn(f64) -> CurveSample>(f: &F, lo: f64, hi: f64, focus: f64) -> (usize, Vec<f64>) {
    let samples = adaptive_samples(f, lo, hi, focus);
    let value = |s: f64| f(s).and_then(|t| t.0);
    let mut zeros = 0;
    let mut crits = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        if samples[i].1.is_none() {
            i += 1;
            continue;
        }
        let start = i;
        while i < samples.len() && samples[i].1.is_some() {
            i += 1;
        }
        let run = &samples[start..i];
        let mut seq = vec![run[0].1.unwrap()];
        for j in 1..run.len().saturating_sub(1) {
            let (a, b, c) = (run[j - 1].1.unwrap(), run[j].1.unwrap(), run[j + 1].1.unwrap());
            if (b - a) * (c - b) < 0.0 {
                let sgn = if b < a { 1.0 } else { -1.0 };
                let (_, v) = golden_min(
                    |s| value(s).map_or(f64::INFINITY, |v| sgn * v),
                    run[j - 1].0,
                    run[j + 1].0,
                    1e-16 * (hi - lo),
                );
                let v = sgn * v;
                crits.push(v);
                seq.push(v);
            }
        }
        if run.len() > 1 {
            seq.push(run[run.len() - 1].1.unwrap());
        }
        zeros += seq.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    }
    (zeros, crits)
}

/// One tangency found along a one-parameter path in (α, β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangency {
    pub n: i64,
    pub alpha: f64,
    pub beta: f64,
    /// Path parameter (distance to the reference curve or point).
    pub offset: f64,
    /// |critical value| at the tangency, relative to |α| (StableP) or |β| (StableE).
    pub residual: f64,
    pub zeros_before: usize,
    pub zeros_after: usize,
}

/// Tangencies of the winding-n tangency function along the path t ↦ (α(t), β(t)),
/// t ∈ [t_lo, t_hi]: changes in the zero count are bisected in t, and only changes
/// with a critical value through zero (not a window-edge effect) are kept.
fn tangencies_along<P: Fn(f64) -> (f64, f64) + Sync>(
    p: &ModelParams,
    target: TangencyTarget,
    n: i64,
    path: &P,
    t_lo: f64,
    t_hi: f64,
    grid: usize,
) -> Vec<Tangency> {
    let tau = p.tau;
    let structure = |t: f64| {
        let (a, b) = path(t);
        let f = |s: f64| tangency_fn(p, target, n, a, b, s);
        zero_structure(&f, -tau, tau, -p.nu * b / (2.0 * p.k))
    };
    let ts: Vec<f64> = (0..grid).map(|i| t_lo + (t_hi - t_lo) * i as f64 / (grid - 1) as f64).collect();
    let counts: Vec<usize> = ts.par_iter().map(|&t| structure(t).0).collect();
    let accept = |l: f64, r: f64, c0: usize, c1: usize| {
        let (a, b) = path(r);
        let scale = match target {
            TangencyTarget::StableP => a.abs(),
            TangencyTarget::StableE => b.abs(),
        };
        let best = |t: f64| structure(t).1.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        let residual = best(l).min(best(r)) / scale;
        (residual <= 1e-8).then_some(Tangency { n, alpha: a, beta: b, offset: r, residual, zeros_before: c0, zeros_after: c1 })
    };
    let mut out = Vec::new();
    for i in 1..grid {
        if counts[i] == counts[i - 1] {
            continue;
        }
        let mut from = ts[i - 1];
        let mut c0 = counts[i - 1];
        while c0 != counts[i] && out.len() < 4 * grid {
            let (l, r) = bisect_predicate(|t| structure(t).0 == c0, from, ts[i]);
            let c1 = structure(r).0;
            if let Some(t) = accept(l, r, c0, c1) {
                out.push(t);
            }
            from = r;
            c0 = c1;
        }
    }
    out
}

/// Side of Hom(P) on which to look for Hom_n(P) at fixed β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// α > α*(β)
    Above,
    /// α < α*(β)
    Below,
}

fn offset_path(alpha_star: f64, beta: f64, side: Side) -> impl Fn(f64) -> (f64, f64) + Sync {
    let sgn = match side {
        Side::Above => 1.0,
        Side::Below => -1.0,
    };
    move |t: f64| (alpha_star + sgn * t.exp() * alpha_star.abs(), beta)
}

const OFFSET_RANGE: (f64, f64) = (-36.0, -0.7);

/// Hom_n(P) at fixed β: tangencies of the n-turn return of W^u(P) with W^s_loc(P),
/// searched at α = α*(β) ± |α*|·e^t on the requested side of Hom(P). The first
/// tangency reached from Hom(P) is reported per n.
pub fn hompn_tangencies(p: &ModelParams, ns: &[i64], beta: f64, side: Side) -> Result<Vec<Tangency>> {
    require_positive_a21(p)?;
    let anchor = homp_point(p, beta)?;
    let path = offset_path(anchor.alpha, beta, side);
    ns.iter()
        .map(|&n| {
            tangencies_along(p, TangencyTarget::StableP, n, &path, OFFSET_RANGE.0, OFFSET_RANGE.1, 240)
                .into_iter()
                .min_by(|a, b| a.offset.total_cmp(&b.offset))
                .map(|mut t| {
                    t.offset = (t.alpha - anchor.alpha).abs();
                    t
                })
                .ok_or(Error::TangencyNotFound(n))
        })
        .collect()
}

/// Fixed coordinate of the one-parameter slice used for Het_n(PE).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HetSlice {
    /// Case 4 and 2: fixed β > 0, α above Hom(P).
    Beta(f64),
    /// Case 3: fixed α < 0, β decreasing to 0.
    Alpha(f64),
    /// Cases 2 and 5: α = α*_n·(1 − offset) just left of each Hom_n(E) tip.
    NearTip(f64),
}

/// Het_n(PE): tangencies of the n-turn image of W^u(P) with W^s_loc(E) on a slice.
/// NearTip slices return both β1 > β* > β2 and the merged tip of the pair.
pub fn hetpe_tangencies(p: &ModelParams, ns: &[i64], slice: HetSlice) -> Result<Vec<BifCurve>> {
    require_positive_a21(p)?;
    ns.iter()
        .map(|&n| {
            let found: Vec<Tangency> = match slice {
                HetSlice::Beta(beta) => {
                    let anchor = homp_point(p, beta)?;
                    let path = offset_path(anchor.alpha, beta, Side::Above);
                    tangencies_along(p, TangencyTarget::StableE, n, &path, OFFSET_RANGE.0, OFFSET_RANGE.1, 240)
                        .into_iter()
                        .min_by(|a, b| a.offset.total_cmp(&b.offset))
                        .into_iter()
                        .collect()
                }
                HetSlice::Alpha(alpha) => {
                    let path = move |t: f64| (alpha, t.exp());
                    tangencies_along(p, TangencyTarget::StableE, n, &path, -40.0, p.tau.ln(), 240)
                        .into_iter()
                        .max_by(|a, b| a.beta.total_cmp(&b.beta))
                        .into_iter()
                        .collect()
                }
                HetSlice::NearTip(offset) => {
                    let tip = home_tips(p, &[n])?[0];
                    het_pair(p, n, tip.alpha * (1.0 - offset), tip.beta)
                }
            };
            if found.is_empty() {
                return Err(Error::TangencyNotFound(n));
            }
            let tip = match slice {
                HetSlice::NearTip(offset) => Some(het_tip(p, n, offset)?),
                _ => None,
            };
            Ok(BifCurve {
                kind: BifKind::HetPE(n),
                points: found.iter().map(|t| (t.alpha, t.beta)).collect(),
                residuals: found.iter().map(|t| t.residual).collect(),
                tip,
                winding: vec![n],
            })
        })
        .collect()
}

/// The pair of heteroclinic tangencies at fixed α near the Hom_n(E) tip, scanning
/// β = β*·(1 + u) for u ∈ [−1, 1].
fn het_pair(p: &ModelParams, n: i64, alpha: f64, beta_star: f64) -> Vec<Tangency> {
    let path = move |u: f64| (alpha, beta_star * (1.0 + u));
    tangencies_along(p, TangencyTarget::StableE, n, &path, -1.0, 1.0, 161)
}

/// Number of tangencies in a list of count changes (each tangency moves the zero
/// count by two; coincident tangencies arrive as one larger jump).
fn tangency_multiplicity(v: &[Tangency]) -> usize {
    v.iter().map(|t| t.zeros_after.abs_diff(t.zeros_before) / 2).sum()
}

/// Tip of Het_n(PE): the largest α (bisected) at which the tangency pair exists.
fn het_tip(p: &ModelParams, n: i64, offset: f64) -> Result<(f64, f64)> {
    let tip = home_tips(p, &[n])?[0];
    let pair = |alpha: f64| {
        let v = het_pair(p, n, alpha, tip.beta);
        (tangency_multiplicity(&v) >= 2).then(|| 0.5 * (v[0].beta + v[v.len() - 1].beta))
    };
    let lo = tip.alpha * (1.0 - offset);
    let hi = tip.alpha * (1.0 + offset);
    if pair(lo).is_none() || pair(hi).is_some() {
        return Err(Error::TangencyNotFound(n));
    }
    let (a, _) = bisect_predicate(|x| pair(x).is_some(), lo, hi);
    let (a, _) = (a, ());
    Ok((a, pair(a).unwrap()))
}

// ---------------------------------------------------------------------------
// periodic orbit born at an E-homoclinic

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeriodicType {
    Sink,
    Saddle,
    Source,
}

/// Stability of the periodic orbit created when an E-homoclinic cycle breaks.
pub fn periodic_orbit_classifier(p: &ModelParams) -> Result<PeriodicType> {
    if p.lambda1 >= p.mu {
        return Err(Error::InconsistentWithH1);
    }
    Ok(if p.lambda1 + p.lambda2 > p.mu { PeriodicType::Saddle } else { PeriodicType::Source })
}

// ---------------------------------------------------------------------------
// parameter sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellLabel {
    #[serde(rename = "escapes")]
    Escapes,
    #[serde(rename = "E-homoclinic")]
    EHomoclinic,
    #[serde(rename = "P-tangency")]
    PTangency,
    #[serde(rename = "recurrent")]
    Recurrent,
    #[serde(rename = "unresolved")]
    Unresolved,
}

impl CellLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellLabel::Escapes => "escapes",
            CellLabel::EHomoclinic => "E-homoclinic",
            CellLabel::PTangency => "P-tangency",
            CellLabel::Recurrent => "recurrent",
            CellLabel::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub label: CellLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major: β outer, α inner.
    pub cells: Vec<SweepCell>,
}

fn cell_edges(grid: &[f64], i: usize) -> (f64, f64) {
    let x = grid[i];
    let left = if i > 0 { 0.5 * (grid[i - 1] + x) } else if grid.len() > 1 { x - 0.5 * (grid[1] - x) } else { x };
    let right = if i + 1 < grid.len() { 0.5 * (x + grid[i + 1]) } else if i > 0 { x + 0.5 * (x - grid[i - 1]) } else { x };
    (left, right)
}

fn sign_change(vals: &[f64]) -> bool {
    vals.iter().any(|v| *v > 0.0) && vals.iter().any(|v| *v < 0.0)
}

/// Hom(P) indicator α + a21·(extremal z of the first image of W^u(P))^δ1; None where
/// that extremum is not positive.
fn homp_indicator(p: &ModelParams, alpha: f64, beta: f64) -> Option<f64> {
    let s = beta - p.nu * p.nu * beta * beta / (4.0 * p.k);
    (s > 0.0).then(|| alpha + p.effective_a21() * s.powf(p.exponents().delta1))
}

fn classify_cell(p: &ModelParams, probes: &[(f64, f64)], max_returns: usize, cell: ((f64, f64), (f64, f64)), alpha: f64, beta: f64) -> CellLabel {
    let ((a0, a1), (b0, b1)) = cell;
    let corners = [(a0, b0), (a1, b0), (a0, b1), (a1, b1)];
    if p.effective_a21() > 0.0 {
        if alpha > 0.0 && corners.iter().all(|c| c.0 > 0.0) {
            let q = unstable_e_point(p, alpha);
            if let Some(out) = maps::pi_p(p, &q).point() {
                let n = maps::winding(out.psi_lift);
                let vals: Vec<f64> = corners.iter().map(|c| home_residual(p, c.0, c.1, n)).collect();
                if vals.iter().any(|v| !v.is_finite()) {
                    return CellLabel::Unresolved;
                }
                if sign_change(&vals) {
                    return CellLabel::EHomoclinic;
                }
            }
        }
        let ind: Option<Vec<f64>> = corners.iter().map(|c| homp_indicator(p, c.0, c.1)).collect();
        if let Some(vals) = ind {
            if sign_change(&vals) {
                return CellLabel::PTangency;
            }
        }
    }
    let mut starts = vec![unstable_e_point(p, alpha)];
    starts.extend(probes.iter().map(|&(psi, z)| SectionPoint::p_in(psi, z)));
    for start in starts {
        let mut q = start;
        let mut survived = true;
        for _ in 0..max_returns {
            match maps::return_map(p, &q, alpha, beta) {
                maps::MapOutcome::Continued(next) => {
                    if !(next.u.is_finite() && next.v.is_finite()) {
                        return CellLabel::Unresolved;
                    }
                    q = next;
                }
                maps::MapOutcome::Escaped(_) => {
                    survived = false;
                    break;
                }
            }
        }
        if survived {
            return CellLabel::Recurrent;
        }
    }
    CellLabel::Escapes
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Returns a probe must survive for the cell to count as recurrent.
    pub max_returns: usize,
    /// Probes per strip (a square grid in (ψ, A)), on the four strips from the first
    /// admissible index on.
    pub probes_per_strip: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { max_returns: 10, probes_per_strip: 16 }
    }
}

impl SweepOptions {
    pub fn from_numerics(numerics: &Numerics) -> Self {
        SweepOptions { max_returns: numerics.max_returns, ..Default::default() }
    }
}

fn sweep_probes(p: &ModelParams, per_strip: usize) -> Vec<(f64, f64)> {
    let m = (per_strip as f64).sqrt().round().max(1.0) as usize;
    let frac = |i: usize| if m == 1 { 0.0 } else { -0.8 + 1.6 * i as f64 / (m - 1) as f64 };
    let n0 = first_strip_index(p);
    let mut out = Vec::new();
    for n in n0..n0 + 4 {
        for i in 0..m {
            for j in 0..m {
                let (psi, a) = (frac(i) * p.tau, frac(j) * p.tau);
                out.push((psi, maps::z_from_a(p, psi, a, n)));
            }
        }
    }
    out
}

/// Labels every (α, β) grid cell by the first matching behaviour: E-homoclinic (the
/// E-homoclinic residual changes sign across the cell corners), P-tangency (the
/// Hom(P) indicator changes sign), recurrent (W^u(E) or a strip probe survives
/// `max_returns` returns), otherwise escapes. The homoclinic detectors apply only
/// for a21 > 0. Output order is independent of the thread count.
pub fn sweep_diagram(p: &ModelParams, alphas: &[f64], betas: &[f64], opts: &SweepOptions) -> SweepResult {
    let probes = sweep_probes(p, opts.probes_per_strip);
    let na = alphas.len();
    let cells = (0..na * betas.len())
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / na, idx % na);
            let (alpha, beta) = (alphas[i], betas[j]);
            let edges = (cell_edges(alphas, i), cell_edges(betas, j));
            let q = p.with_unfolding(alpha, beta);
            SweepCell { alpha, beta, label: classify_cell(&q, &probes, opts.max_returns, edges, alpha, beta) }
        })
        .collect();
    SweepResult { alphas: alphas.to_vec(), betas: betas.to_vec(), cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn classifier_examples() {
        let p = ModelParams { lambda1: 1.0, lambda2: 3.0, mu: 2.0, ..presets::case5_curves() };
        assert_eq!(periodic_orbit_classifier(&p).unwrap(), PeriodicType::Saddle);
        let p = ModelParams { lambda1: 0.4, lambda2: 0.5, mu: 1.0, ..presets::case5_curves() };
        assert_eq!(periodic_orbit_classifier(&p).unwrap(), PeriodicType::Source);
        let p = ModelParams { lambda1: 1.5, lambda2: 2.0, mu: 1.0, ..presets::case5_curves() };
        assert!(matches!(periodic_orbit_classifier(&p), Err(Error::InconsistentWithH1)));
    }

    #[test]
    fn count_turns_examples() {
        let p = presets::case5_curves();
        let r = count_turns(&p, &SectionPoint::p_in(0.0, 1.0), 0.0, 0.0, 5);
        assert_eq!(r.turns_per_visit, vec![0]);
        assert!(r.escaped);
        let n = 3;
        let z = maps::z_from_a(&p, 0.0, 0.0, n);
        let r = count_turns(&p, &SectionPoint::p_in(0.0, z), 0.0, 0.0, 1);
        assert_eq!(r.turns_per_visit[0], n);
        assert!(r.turns_per_visit.iter().all(|&t| t >= 0));
    }

    #[test]
    fn home_roots_match_independent_shooting() {
        let p = presets::case5_curves();
        let beta = -1e-3;
        let roots = home_roots(&p, beta, &[1, 2, 3, 4, 5], 0.1).unwrap();
        for r in &roots {
            assert!(r.shooting_residual.abs() <= 1e-10);
            let shoot: Vec<f64> = home_shooting_roots(&p, beta, r.n, 0.1)
                .into_iter()
                .filter(|&a| a_n_of_alpha(&p, a, r.n) >= 0.0)
                .collect();
            let best = shoot.iter().map(|a| ((a - r.alpha) / r.alpha).abs()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-8, "n={} rel {best:e}", r.n);
        }
    }

    #[test]
    fn tips_follow_leading_order_curve() {
        let p = presets::case5_curves();
        let tips = home_tips(&p, &[1, 2, 3, 4]).unwrap();
        let dp = p.exponents().delta_p;
        for t in &tips {
            let rel = ((t.beta + p.b22 * t.alpha.powf(dp)) / t.beta).abs();
            assert!(rel <= 1e-3, "n={} rel {rel:e}", t.n);
        }
        for w in tips.windows(2) {
            let ratio = w[1].alpha / w[0].alpha;
            let expected = (-TWO_PI * p.eta_e).exp();
            assert!((ratio / expected - 1.0).abs() <= 0.05);
        }
        let fold = home_fold(&p, 1).unwrap();
        assert!(((fold.beta - tips[0].beta) / tips[0].beta).abs() < 1e-3);
    }

    #[test]
    fn home_curve_is_ordered_and_on_the_equation() {
        let p = presets::case5_curves();
        let c = home_curve(&p, 2, 40).unwrap();
        assert!(c.points.windows(2).all(|w| w[0].0 <= w[1].0));
        let scale = c.points.iter().map(|q| q.1.abs()).fold(0.0, f64::max);
        assert!(c.residuals.iter().all(|r| r.abs() <= 1e-12 * scale.max(1.0)));
        let json = serde_json::to_string(&c).unwrap();
        let back: BifCurve = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn side_test_matches_root_existence() {
        for p in [presets::case5_curves(), presets::case4()] {
            for &(alpha, beta) in &[(1e-3f64, -1e-3f64), (1e-3, 1e-3), (1e-2, -2e-3), (1e-4, -1e-7), (1e-4, 1e-7)] {
                let c = p.b22 * alpha.powf(p.exponents().delta_p) + beta;
                let disc = (p.nu * beta).powi(2) - 4.0 * p.k * c;
                let has_root = disc >= 0.0
                    && [1.0, -1.0].iter().any(|s| (-p.nu * beta + s * disc.sqrt()) / (2.0 * p.k) >= 0.0);
                assert_eq!(home_admissible(&p, alpha, beta), has_root);
            }
        }
    }

    #[test]
    fn homp_recovers_delta1() {
        let betas: Vec<f64> = (0..12).map(|i| 10f64.powf(-5.0 + 3.0 * i as f64 / 11.0)).collect();
        for p in [presets::case4(), presets::case5_curves()] {
            let fit = homp_curve(&p, &betas).unwrap();
            let d1 = p.exponents().delta1;
            assert!((fit.exponent / d1 - 1.0).abs() <= 0.02, "{} vs {d1}", fit.exponent);
            assert!(fit.curve.residuals.iter().all(|r| *r <= 1e-6));
        }
        assert!(homp_point(&presets::case5_curves(), -1e-3).is_err());
    }

    #[test]
    fn hompn_accumulate_on_homp() {
        for (p, side) in [(presets::case4(), Side::Above), (presets::case3_curves(), Side::Above)] {
            let t = hompn_tangencies(&p, &[2, 3, 4], 1e-2, side).unwrap();
            assert!(t.windows(2).all(|w| w[1].offset < w[0].offset));
            assert!(t.iter().all(|x| x.residual <= 1e-8));
        }
        assert!(matches!(hompn_tangencies(&presets::case4(), &[2], 1e-2, Side::Below), Err(Error::TangencyNotFound(2))));
    }

    #[test]
    fn case4_het_and_hom_alternate() {
        let p = presets::case4();
        let ns = [2, 3, 4];
        let hom = hompn_tangencies(&p, &ns, 1e-2, Side::Above).unwrap();
        let het = hetpe_tangencies(&p, &ns, HetSlice::Beta(1e-2)).unwrap();
        let mut seq: Vec<(f64, char)> = hom.iter().map(|t| (t.alpha, 'P')).collect();
        seq.extend(het.iter().map(|c| (c.points[0].0, 'E')));
        seq.sort_by(|a, b| a.0.total_cmp(&b.0));
        let kinds: String = seq.iter().map(|x| x.1).collect();
        assert_eq!(kinds, "EPEPEP");
    }

    #[test]
    fn case3_het_values_decrease_to_zero() {
        let p = presets::case3_curves();
        let curves = hetpe_tangencies(&p, &[4, 5, 6], HetSlice::Alpha(-1e-2)).unwrap();
        let betas: Vec<f64> = curves.iter().map(|c| c.points.iter().map(|q| q.1).fold(0.0, f64::max)).collect();
        assert!(betas.iter().all(|b| *b > 0.0));
        assert!(betas.windows(2).all(|w| w[1] < 0.2 * w[0]));
    }

    #[test]
    fn case5_het_tip_matches_home_tip() {
        let p = presets::case5_curves();
        let curves = hetpe_tangencies(&p, &[1, 2], HetSlice::NearTip(1e-2)).unwrap();
        for c in &curves {
            let n = c.winding[0];
            let tip = home_tips(&p, &[n]).unwrap()[0];
            let (a, b) = c.tip.unwrap();
            assert!(((a - tip.alpha) / tip.alpha).abs() <= 1e-3);
            assert!(((b - tip.beta) / tip.beta).abs() <= 1e-3);
        }
        let fold = home_fold(&p, 1).unwrap();
        let pair: Vec<f64> = curves[0].points.iter().map(|q| q.1).collect();
        assert!(pair.iter().any(|b| *b > fold.beta) && pair.iter().any(|b| *b < fold.beta));
    }

    #[test]
    fn multipulse_ends_at_home_tip() {
        let opts = ContinuationOptions::default();
        for (p, pulses, seed) in [(presets::case5_curves(), [1i64, 1], -1e-3), (presets::case4(), [2, 2], 1e-4)] {
            let curves = multipulse_home(&p, &pulses, seed, &opts).unwrap();
            let tip = home_tips(&p, &[pulses[0]]).unwrap()[0];
            let d = |q: &(f64, f64)| ((q.0 - tip.alpha) / tip.alpha).abs().max(((q.1 - tip.beta) / tip.beta).abs());
            let best = curves.iter().flat_map(|c| [c.points[0], *c.points.last().unwrap()]).map(|q| d(&q)).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-2, "{best:e}");
            assert!(curves.iter().all(|c| c.residuals.iter().all(|r| r.abs() <= 1e-9)));
        }
        assert!(multipulse_home(&presets::case5_curves(), &[2, 1], -1e-3, &opts).is_err());
    }

    #[test]
    fn sweep_case1_escapes_and_is_thread_independent() {
        let grid = linspace(-0.02, 0.02, 12);
        let r = sweep_diagram(&presets::case1(), &grid, &grid, &SweepOptions::default());
        assert!(r.cells.iter().all(|c| c.label == CellLabel::Escapes));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sweep_diagram(&presets::case4(), &grid, &grid, &SweepOptions::default()))
        };
        assert_eq!(run(1), run(4));
    }
}
