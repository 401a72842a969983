//! Strips H_n, helices, double helices and images of invariant-manifold traces.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{self, principal, Section, SectionPoint, TWO_PI};
use crate::model::{ModelParams, Numerics};
use crate::roots::quadratic_vertex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
    VerticalCusp,
    HorseshoeStrip,
}

/// A strip bounded by two graphs over ψ ∈ [−τ, τ], sampled as polylines (ψ, z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub section: Section,
    pub orientation: Orientation,
    pub lower: Vec<(f64, f64)>,
    pub upper: Vec<(f64, f64)>,
    pub index: Option<i64>,
}

impl Strip {
    pub fn h_min(&self) -> f64 {
        self.lower.iter().map(|q| q.1).fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.upper.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Diameter of the sampled boundary set.
    pub fn diam(&self) -> f64 {
        let pts: Vec<_> = self.lower.iter().chain(&self.upper).collect();
        let mut d: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                d = d.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
            }
        }
        d
    }
}

/// Closed-form interval family I_n = [a_n, b_n] in log z for a vertical line ψ = ψ0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripFamilyParams {
    pub psi0: f64,
    pub n0: i64,
    pub n_max: i64,
    eta_e: f64,
    tau: f64,
}

impl StripFamilyParams {
    pub fn new(p: &ModelParams, psi0: f64, n_max: i64) -> Self {
        StripFamilyParams { psi0, n0: first_strip_index(p), n_max, eta_e: p.eta_e, tau: p.tau }
    }

    pub fn a_n(&self, n: i64) -> f64 {
        self.eta_e * (-self.tau - TWO_PI * n as f64 + self.psi0)
    }

    pub fn b_n(&self, n: i64) -> f64 {
        self.eta_e * (self.tau - TWO_PI * n as f64 + self.psi0)
    }
}

/// Smallest n whose strip H_n, and its image under Π_P, lie in the working squares.
pub fn first_strip_index(p: &ModelParams) -> i64 {
    let dp = p.exponents().delta_p;
    let cap = p.tau.ln().min(p.tau.ln() / dp);
    let mut n = 1;
    while p.eta_e * (2.0 * p.tau - TWO_PI * n as f64) > cap {
        n += 1;
    }
    n
}

pub fn strip_bounds(p: &ModelParams, psi0: f64, n: i64) -> Result<(f64, f64)> {
    let f = StripFamilyParams::new(p, psi0, n);
    if n < f.n0 {
        return Err(Error::IndexTooSmall { n, n0: f.n0 });
    }
    Ok((f.a_n(n), f.b_n(n)))
}

/// H_n = [−τ, τ] × [exp(a_n(ψ)), exp(b_n(ψ))], sampled at `samples` points per boundary.
pub fn build_hn(p: &ModelParams, n: i64, samples: usize) -> Result<Strip> {
    let n0 = first_strip_index(p);
    if n < n0 {
        return Err(Error::IndexTooSmall { n, n0 });
    }
    let samples = samples.max(2);
    let mut lower = Vec::with_capacity(samples);
    let mut upper = Vec::with_capacity(samples);
    for i in 0..samples {
        let psi = -p.tau + 2.0 * p.tau * i as f64 / (samples - 1) as f64;
        let (a, b) = strip_bounds(p, psi, n)?;
        lower.push((psi, a.exp()));
        upper.push((psi, b.exp()));
    }
    Ok(Strip { section: Section::PIn, orientation: Orientation::Horizontal, lower, upper, index: Some(n) })
}

/// Whether every sampled boundary point of a strip maps into the P_out working square.
pub fn image_in_p_out_square(p: &ModelParams, strip: &Strip) -> bool {
    strip.lower.iter().chain(&strip.upper).all(|&(psi, z)| {
        match maps::pi_p(p, &SectionPoint::p_in(psi, z)).point() {
            Some(q) => principal(q.psi_lift).abs() <= p.tau * (1.0 + 1e-12) && q.v <= p.tau,
            None => false,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceSource {
    WsLocE,
    WuLocP,
    WsLocP,
    WuLocE,
    EcuAxis,
    UserSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Fold,
    Cusp,
    TangencyCandidate,
    DomainBoundary,
}

/// An annotated location on a trace; `param` is sub-sample accurate for folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub index: usize,
    pub kind: EventKind,
    pub param: f64,
    pub u: f64,
    pub v: f64,
}

type Generator = Arc<dyn Fn(f64) -> Option<SectionPoint> + Send + Sync>;

/// A refinable curve in one section: samples at parameters `params`, optionally backed
/// by an exact generator used for further refinement.
#[derive(Clone)]
pub struct Trace {
    pub source: TraceSource,
    pub section: Section,
    pub params: Vec<f64>,
    pub points: Vec<SectionPoint>,
    pub events: Vec<TraceEvent>,
    /// Half-open index ranges of maximal runs of consecutive samples.
    pub runs: Vec<(usize, usize)>,
    generator: Option<Generator>,
}

impl fmt::Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trace")
            .field("source", &self.source)
            .field("section", &self.section)
            .field("points", &self.points.len())
            .field("events", &self.events)
            .finish()
    }
}

impl Trace {
    /// Samples `gen` at `samples` evenly spaced parameters in [t0, t1].
    pub fn from_fn<F>(source: TraceSource, section: Section, t0: f64, t1: f64, samples: usize, gen: F) -> Trace
    where
        F: Fn(f64) -> Option<SectionPoint> + Send + Sync + 'static,
    {
        let gen: Generator = Arc::new(gen);
        let samples = samples.max(2);
        let ts: Vec<f64> = (0..samples).map(|i| t0 + (t1 - t0) * i as f64 / (samples - 1) as f64).collect();
        let pts: Vec<Option<SectionPoint>> = ts.par_iter().map(|&t| gen(t)).collect();
        let (params, points): (Vec<f64>, Vec<SectionPoint>) =
            ts.into_iter().zip(pts).filter_map(|(t, q)| q.map(|q| (t, q))).unzip();
        let runs = vec![(0, points.len())];
        Trace { source, section, params, points, events: Vec::new(), runs, generator: Some(gen) }
    }

    /// A polyline trace without generator; refinement interpolates linearly.
    pub fn from_points(source: TraceSource, points: Vec<SectionPoint>) -> Result<Trace> {
        let section = points.first().ok_or_else(|| Error::MalformedCurve("empty trace".into()))?.section;
        let params = (0..points.len()).map(|i| i as f64).collect();
        let runs = vec![(0, points.len())];
        Ok(Trace { source, section, params, points, events: Vec::new(), runs, generator: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    fn eval(&self, t: f64) -> Option<SectionPoint> {
        if let Some(g) = &self.generator {
            return g(t);
        }
        let i = self.params.partition_point(|&s| s <= t).clamp(1, self.params.len() - 1);
        let (t0, t1) = (self.params[i - 1], self.params[i]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let (a, b) = (self.points[i - 1], self.points[i]);
        Some(SectionPoint {
            section: a.section,
            u: a.u + w * (b.u - a.u),
            v: a.v + w * (b.v - a.v),
            psi_lift: a.psi_lift + w * (b.psi_lift - a.psi_lift),
        })
    }
}

/// Elementary maps that can be chained in [`propagate_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapId {
    PiP,
    PiPInverse,
    PsiPE,
    PiE,
    PsiEP,
    Return,
}

pub fn apply_chain(p: &ModelParams, chain: &[MapId], q: SectionPoint, alpha: f64, beta: f64) -> Option<SectionPoint> {
    chain.iter().try_fold(q, |q, m| match m {
        MapId::PiP => maps::pi_p(p, &q).point(),
        MapId::PiPInverse => maps::pi_p_inverse(p, &q).ok(),
        MapId::PsiPE => Some(maps::psi_pe(p, &q, beta)),
        MapId::PiE => maps::pi_e(p, &q).point(),
        MapId::PsiEP => Some(maps::psi_ep(p, &q, alpha)),
        MapId::Return => maps::return_map(p, &q, alpha, beta).point(),
    })
}

fn chain_output_section(input: Section, chain: &[MapId]) -> Section {
    chain.iter().fold(input, |_, m| match m {
        MapId::PiP => Section::POut,
        MapId::PiPInverse | MapId::PsiEP | MapId::Return => Section::PIn,
        MapId::PsiPE => Section::EIn,
        MapId::PiE => Section::EOut,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoldAxis {
    U,
    V,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub refine_tol: f64,
    pub max_points: usize,
    pub fold_axis: FoldAxis,
}

impl TraceOptions {
    pub fn new(n: &Numerics, fold_axis: FoldAxis) -> Self {
        TraceOptions { refine_tol: n.refine_tol, max_points: n.max_points, fold_axis }
    }
}

/// Horizontal coordinate used for spacing and folds: the lift on P sections.
fn u_coord(q: &SectionPoint) -> f64 {
    match q.section {
        Section::PIn | Section::POut => q.psi_lift,
        _ => q.u,
    }
}

fn spacing(a: &SectionPoint, b: &SectionPoint) -> f64 {
    (u_coord(a) - u_coord(b)).hypot(a.v - b.v)
}

const MAX_DEPTH: u32 = 48;

/// Pushes a trace through a chain of maps with adaptive refinement, then annotates
/// fold and domain-boundary events.
pub fn propagate_trace(
    p: &ModelParams,
    t: &Trace,
    chain: &[MapId],
    alpha: f64,
    beta: f64,
    opts: &TraceOptions,
) -> Result<Trace> {
    if t.is_empty() {
        return Err(Error::MalformedCurve("empty trace".into()));
    }
    let image = |s: f64| t.eval(s).and_then(|q| apply_chain(p, chain, q, alpha, beta));
    let coarse: Vec<Option<SectionPoint>> = t.points.par_iter().map(|&q| apply_chain(p, chain, q, alpha, beta)).collect();
    if t.points.len() == 1 {
        let q = coarse[0].ok_or(Error::EmptyAfterEscape)?;
        return Ok(Trace {
            source: t.source,
            section: q.section,
            params: vec![t.params[0]],
            points: vec![q],
            events: Vec::new(),
            runs: vec![(0, 1)],
            generator: None,
        });
    }
    // adaptive bisection of every coarse interval, recording escapes as None
    let mut samples: Vec<(f64, Option<SectionPoint>)> = Vec::with_capacity(t.len() * 2);
    let budget = opts.max_points.max(t.len());
    let mut stack: Vec<(f64, Option<SectionPoint>, f64, Option<SectionPoint>, u32)> = Vec::new();
    samples.push((t.params[0], coarse[0]));
    for i in 0..t.len() - 1 {
        stack.push((t.params[i], coarse[i], t.params[i + 1], coarse[i + 1], 0));
        while let Some((ta, qa, tb, qb, depth)) = stack.pop() {
            let split = depth < MAX_DEPTH
                && samples.len() + stack.len() < budget
                && match (qa, qb) {
                    (Some(a), Some(b)) => spacing(&a, &b) > opts.refine_tol,
                    (None, None) => false,
                    _ => true,
                };
            let tm = 0.5 * (ta + tb);
            if split && tm != ta && tm != tb {
                let qm = image(tm);
                stack.push((tm, qm, tb, qb, depth + 1));
                stack.push((ta, qa, tm, qm, depth + 1));
            } else {
                samples.push((tb, qb));
            }
        }
    }
    let out_section = chain_output_section(t.section, chain);
    let mut params = Vec::with_capacity(samples.len());
    let mut points = Vec::with_capacity(samples.len());
    let mut events = Vec::new();
    let mut prev_escaped = false;
    for (i, (s, q)) in samples.iter().enumerate() {
        match q {
            Some(q) => {
                if prev_escaped && i > 0 {
                    events.push(TraceEvent { index: points.len(), kind: EventKind::DomainBoundary, param: *s, u: q.u, v: q.v });
                }
                params.push(*s);
                points.push(*q);
                prev_escaped = false;
            }
            None => {
                if !prev_escaped && !points.is_empty() {
                    let last: &SectionPoint = points.last().unwrap();
                    events.push(TraceEvent {
                        index: points.len() - 1,
                        kind: EventKind::DomainBoundary,
                        param: params[params.len() - 1],
                        u: last.u,
                        v: last.v,
                    });
                }
                prev_escaped = true;
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyAfterEscape);
    }
    // runs of consecutive continued samples
    let mut runs = Vec::new();
    let mut start = None;
    let mut k = 0usize;
    for (_, q) in &samples {
        match (q, start) {
            (Some(_), None) => start = Some(k),
            (None, Some(s)) => {
                runs.push((s, k));
                start = None;
            }
            _ => {}
        }
        if q.is_some() {
            k += 1;
        }
    }
    if let Some(s) = start {
        runs.push((s, k));
    }
    let axes: &[bool] = match opts.fold_axis {
        FoldAxis::U => &[true],
        FoldAxis::V => &[false],
        FoldAxis::Both => &[true, false],
    };
    for &(a, b) in &runs {
        for &use_u in axes {
            let coord = |q: &SectionPoint| if use_u { u_coord(q) } else { q.v };
            for ev in fold_events(&params[a..b], &points[a..b], coord) {
                let idx = a + ev.0;
                let q = image(ev.1).unwrap_or(points[idx]);
                events.push(TraceEvent { index: idx, kind: EventKind::Fold, param: ev.1, u: q.u, v: q.v });
            }
        }
    }
    events.sort_by(|x, y| x.index.cmp(&y.index).then(x.param.total_cmp(&y.param)));
    Ok(Trace { source: t.source, section: out_section, params, points, events, runs, generator: None })
}

/// Sign changes of the discrete derivative of `coord`, ignoring sub-tolerance steps,
/// each located by a quadratic fit through the extreme sample and its neighbours.
fn fold_events<C: Fn(&SectionPoint) -> f64>(params: &[f64], points: &[SectionPoint], coord: C) -> Vec<(usize, f64)> {
    let c: Vec<f64> = points.iter().map(&coord).collect();
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = 10.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    let mut last_sign = 0.0;
    let mut last_idx = 0usize;
    for i in 0..c.len().saturating_sub(1) {
        let d = c[i + 1] - c[i];
        if d.abs() <= noise {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign {
            // extreme sample between the two monotone runs
            let lo = last_idx + 1;
            let ext = (lo..=i)
                .max_by(|&x, &y| ((c[x] - c[lo]) * last_sign).total_cmp(&((c[y] - c[lo]) * last_sign)))
                .unwrap_or(lo);
            let j = ext.clamp(1, c.len() - 2);
            let t = quadratic_vertex([params[j - 1], params[j], params[j + 1]], [c[j - 1], c[j], c[j + 1]])
                .filter(|t| *t >= params[j - 1] && *t <= params[j + 1])
                .unwrap_or(params[j]);
            out.push((ext, t));
        }
        last_sign = s;
        last_idx = i;
    }
    out
}

/// Angle between the chord of consecutive trace points and the u-axis (the E^cu
/// direction on E_out), folded into [0, π/2].
pub fn chord_angle_to_u_axis(t: &Trace, i: usize) -> f64 {
    let (a, b) = (t.points[i], t.points[i + 1]);
    let ang = (b.v - a.v).atan2(b.u - a.u).abs();
    ang.min(std::f64::consts::PI - ang)
}

/// Trace of the vertical segment ψ = ψ0, z ∈ [z_lo, z_hi] in P_in, parameterized by ln z.
pub fn vertical_segment(psi0: f64, z_lo: f64, z_hi: f64, samples: usize) -> Trace {
    Trace::from_fn(TraceSource::UserSegment, Section::PIn, z_lo.ln(), z_hi.ln(), samples, move |t| {
        Some(SectionPoint::p_in(psi0, t.exp()))
    })
}

/// W^u_loc(P) ∩ P_out, the line ρ = 0 with ψ ∈ [−w, w].
pub fn unstable_manifold_of_p(w: f64, samples: usize) -> Trace {
    Trace::from_fn(TraceSource::WuLocP, Section::POut, -w, w, samples, |s| Some(SectionPoint::p_out(s, 0.0)))
}

/// Preimage of W^s_loc(E) ∩ E_in(+) under Ψ_PE ∘ Π_P: a single trace made of two
/// helical arms joined at a fold in the lifted angle.
pub fn double_helix_preimage(p: &ModelParams, alpha: f64, beta: f64, n: &Numerics) -> Result<Trace> {
    let pattern = (p.b22 < 0.0 && p.k < 0.0 && beta > 0.0) || (p.b22 > 0.0 && p.k > 0.0 && beta < 0.0);
    if !pattern {
        return Err(Error::WrongSignPattern);
    }
    let pp = *p;
    let rho = move |s: f64| -(pp.k * s * s + beta * (1.0 + pp.nu * s)) / pp.b22;
    // parameter window where ρ ≥ ρ_min so that z = ρ^{1/δP} stays above z_min
    let rho_min = n.z_min.powf(p.exponents().delta_p);
    let (qa, qb, qc) = (p.k, beta * p.nu, beta + p.b22 * rho_min);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return Err(Error::WrongSignPattern);
    }
    let r1 = (-qb - disc.sqrt()) / (2.0 * qa);
    let r2 = (-qb + disc.sqrt()) / (2.0 * qa);
    let (lo, hi) = (r1.min(r2), r1.max(r2));
    let helix = Trace::from_fn(TraceSource::WsLocE, Section::POut, lo, hi, 2049, move |s| {
        let r = rho(s);
        (r > 0.0).then(|| SectionPoint::p_out(s, r))
    });
    let mut out = propagate_trace(p, &helix, &[MapId::PiPInverse], alpha, beta, &TraceOptions::new(n, FoldAxis::U))?;
    out.source = TraceSource::WsLocE;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    OpenDown,
    OpenUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImageKind {
    Empty,
    ConnectedCusp,
    DisconnectedCusp,
    FoldCurve,
}

/// Classification of the Π_E image of a parabola-like curve in E_in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolaImage {
    pub kind: ImageKind,
    pub opening: CurveKind,
    pub extremum_z: f64,
    pub fold_x: Option<f64>,
    pub expected_fold_x: Option<f64>,
    pub components: usize,
}

/// The curve z = ∓c·y² + β over y ∈ [−w, w] in E_in (OpenDown uses −c).
pub fn parabola_trace(kind: CurveKind, c: f64, beta: f64, w: f64, samples: usize) -> Trace {
    let sgn = if kind == CurveKind::OpenDown { -1.0 } else { 1.0 };
    Trace::from_fn(TraceSource::WuLocP, Section::EIn, -w, w, samples, move |y| {
        Some(SectionPoint::e_in(y, sgn * c * y * y + beta))
    })
}

pub fn classify_parabola_image(p: &ModelParams, curve: &Trace, n: &Numerics) -> Result<ParabolaImage> {
    if curve.section != Section::EIn || curve.len() < 3 {
        return Err(Error::MalformedCurve("expected a sampled curve in E_in".into()));
    }
    let z: Vec<f64> = curve.points.iter().map(|q| q.v).collect();
    let ext = fold_events(&curve.params, &curve.points, |q| q.v);
    if ext.len() != 1 {
        return Err(Error::MalformedCurve(format!("expected one extremum, found {}", ext.len())));
    }
    let i = ext[0].0;
    let opening = if z[i] > z[0] { CurveKind::OpenDown } else { CurveKind::OpenUp };
    let extremum_z = curve.eval(ext[0].1).map(|q| q.v).unwrap_or(z[i]);
    let d1 = p.exponents().delta1;
    let image = propagate_trace(p, curve, &[MapId::PiE], 0.0, 0.0, &TraceOptions::new(n, FoldAxis::U));
    let image = match image {
        Err(Error::EmptyAfterEscape) => {
            return Ok(ParabolaImage { kind: ImageKind::Empty, opening, extremum_z, fold_x: None, expected_fold_x: None, components: 0 })
        }
        other => other?,
    };
    let boundaries = image.events_of(EventKind::DomainBoundary).count();
    let components = image.runs.len();
    let folds: Vec<&TraceEvent> = image.events_of(EventKind::Fold).collect();
    let fold_x = if folds.len() == 1 { Some(folds[0].u) } else { None };
    let kind = match (opening, boundaries) {
        (_, 0) => ImageKind::FoldCurve,
        (CurveKind::OpenDown, _) => ImageKind::ConnectedCusp,
        (CurveKind::OpenUp, _) => ImageKind::DisconnectedCusp,
    };
    let expected_fold_x = match kind {
        ImageKind::ConnectedCusp | ImageKind::FoldCurve => Some(extremum_z.powf(d1)),
        _ => None,
    };
    Ok(ParabolaImage { kind, opening, extremum_z, fold_x, expected_fold_x, components })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn strip_bound_examples() {
        let p = ModelParams { eta_e: 2.0, eta_c: 3.0, ..presets::case5_curves() };
        let (a, b) = strip_bounds(&p, 0.0, 1).unwrap();
        assert!((a + 12.7664).abs() < 1e-4 && (b + 12.3664).abs() < 1e-4);
        assert!(((b - a) - 2.0 * p.eta_e * p.tau).abs() < 1e-12);
        let (a2, _) = strip_bounds(&p, 0.0, 2).unwrap();
        assert!(((a - a2) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn index_too_small() {
        let p = ModelParams { eta_e: 0.3, ..presets::case5_curves() };
        let n0 = first_strip_index(&p);
        assert!(n0 > 1);
        assert_eq!(strip_bounds(&p, 0.0, n0 - 1), Err(Error::IndexTooSmall { n: n0 - 1, n0 }));
        assert!(build_hn(&p, n0 - 1, 64).is_err());
    }

    #[test]
    fn strips_nest_and_shrink() {
        let p = presets::case5_horseshoe();
        let n0 = first_strip_index(&p);
        let mut last_height = f64::INFINITY;
        for n in n0..n0 + 4 {
            let h = build_hn(&p, n, 64).unwrap();
            let h1 = build_hn(&p, n + 1, 64).unwrap();
            assert!(h1.h_max() < h.h_min());
            assert!(h.h_max() - h.h_min() < last_height);
            last_height = h.h_max() - h.h_min();
            assert!(image_in_p_out_square(&p, &h));
        }
    }

    #[test]
    fn horizontal_boundaries_become_vertical() {
        let p = presets::case5_horseshoe();
        let h = build_hn(&p, 3, 64).unwrap();
        let lifts: Vec<f64> = h
            .lower
            .iter()
            .map(|&(s, z)| maps::pi_p(&p, &SectionPoint::p_in(s, z)).point().unwrap().psi_lift)
            .collect();
        assert!(lifts.iter().all(|l| (l - lifts[0]).abs() < 1e-12));
    }

    #[test]
    fn parabola_vertex_event() {
        let p = ModelParams { k: 1.0, nu: 1.0, ..presets::case5_curves() };
        let beta = 0.02;
        let t = unstable_manifold_of_p(0.1, 65);
        let out = propagate_trace(&p, &t, &[MapId::PsiPE], 0.0, beta, &TraceOptions::new(&Numerics::default(), FoldAxis::V))
            .unwrap();
        let folds: Vec<_> = out.events_of(EventKind::Fold).collect();
        assert_eq!(folds.len(), 1);
        assert!((folds[0].param - (-p.nu * beta / (2.0 * p.k))).abs() < 1e-8);
    }

    #[test]
    fn helix_winding_law() {
        let p = presets::case5_curves();
        let f = StripFamilyParams::new(&p, 0.05, 10);
        let (lo, hi) = (f.a_n(4).exp(), f.b_n(2).exp());
        let t = vertical_segment(0.05, lo, hi, 257);
        let out = propagate_trace(&p, &t, &[MapId::PiP], 0.0, 0.0, &TraceOptions::new(&Numerics::default(), FoldAxis::U))
            .unwrap();
        let dp = p.exponents().delta_p;
        for q in &out.points {
            let z = q.v.powf(1.0 / dp);
            assert!((q.psi_lift + z.ln() / p.eta_e - 0.05).abs() < 1e-10);
        }
        let span = out.points.last().unwrap().psi_lift - out.points[0].psi_lift;
        assert!(span.abs() > 2.0 * TWO_PI);
    }

    #[test]
    fn double_helix_shape() {
        let p = presets::case5_curves();
        let n = Numerics::default();
        let t = double_helix_preimage(&p, 0.0, -1e-3, &n).unwrap();
        assert_eq!(t.events_of(EventKind::Fold).count(), 1);
        let first = t.points[0].psi_lift;
        let last = t.points.last().unwrap().psi_lift;
        let top = t.points.iter().map(|q| q.psi_lift).fold(f64::NEG_INFINITY, f64::max);
        assert!(first < top - 20.0 && last < top - 20.0);
        assert_eq!(double_helix_preimage(&p, 0.0, 1e-3, &n).unwrap_err(), Error::WrongSignPattern);
    }

    #[test]
    fn parabola_images() {
        let p = ModelParams { lambda1: 1.0, lambda2: 3.0, mu: 2.0, ..presets::case5_curves() };
        let n = Numerics::default();
        let cls = |kind, beta| classify_parabola_image(&p, &parabola_trace(kind, 1.0, beta, 0.5, 201), &n).unwrap();
        assert_eq!(cls(CurveKind::OpenDown, -0.01).kind, ImageKind::Empty);
        let r = cls(CurveKind::OpenDown, 0.01);
        assert_eq!(r.kind, ImageKind::ConnectedCusp);
        assert!((r.fold_x.unwrap() - 0.1).abs() < 1e-6);
        assert_eq!(cls(CurveKind::OpenUp, -0.01).kind, ImageKind::DisconnectedCusp);
        let r = cls(CurveKind::OpenUp, 0.01);
        assert_eq!(r.kind, ImageKind::FoldCurve);
        assert!((r.fold_x.unwrap() - 0.1).abs() < 1e-6);
    }
}
