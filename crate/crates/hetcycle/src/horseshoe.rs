//! Sampled certification of regular and cusp horseshoes, symbolic itineraries and
//! invariant cone fields of the return map.
//!
//! Points of a strip are handled in strip coordinates (ψ, A) with
//! z = exp(η_e(ψ − 2nπ − A)); A measures depth in log z and stays exact where z
//! itself would lose every significant digit to cancellation.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::first_strip_index;
use crate::maps::{self, a_coordinate, z_from_a, SectionPoint};
use crate::model::{classify_case, CaseId, CaseTag, DerivedExponents, HorseshoeKind, ModelParams};
use crate::roots::bisect_predicate;

/// Largest strip index tried when searching for a certifiable window.
pub const MAX_INDEX: i64 = 40;

const LEVELS: usize = 3;

/// A horseshoe symbol: the strip index n and the branch (+1 for A above the
/// splitting line of H_n, −1 below).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub n: i64,
    pub branch: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Layout {
    /// z_E > 0 on the whole strip; symbols are halves beyond the fold of z_E.
    Regular,
    /// z_E > 0 outside a band around A = 0 (Case 3).
    CuspOutside,
    /// z_E > 0 inside a band around the fold of z_E (Case 4).
    CuspInside,
}

/// Evaluation inequality deciding whether H_n and R(H_n) intersect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionCheck {
    pub holds: bool,
    pub margin: f64,
    pub height: f64,
}

/// The case inequality evaluated at a strip height h.
pub fn intersection_condition_at(case: CaseId, d: &DerivedExponents, tau: f64, k: f64, h: f64) -> Result<IntersectionCheck> {
    let margin = match case {
        CaseId::Case3 => tau - (h / k.abs()).powf(d.delta_p / 2.0) - h.powf(1.0 / d.delta1),
        CaseId::Case4 => h.powf(d.delta) - h,
        CaseId::Case5 => h - h.powf(d.delta),
        other => return Err(Error::WrongCase(format!("{other:?} carries no horseshoe"))),
    };
    Ok(IntersectionCheck { holds: margin > 0.0, margin, height: h })
}

/// The case inequality evaluated at the height exp(b_n) of strip H_n on ψ = 0.
pub fn intersection_condition(p: &ModelParams, case: CaseId, n: i64) -> Result<IntersectionCheck> {
    let (_, b) = crate::geometry::strip_bounds(p, 0.0, n)?;
    intersection_condition_at(case, &p.exponents(), p.tau, p.k, b.exp())
}

/// One verified (or violated) condition with a witness description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeReport {
    pub case: CaseTag,
    pub params: ModelParams,
    pub alpha: f64,
    pub beta: f64,
    pub strips_used: Vec<Symbol>,
    pub conditions: Vec<ConditionCheck>,
    /// Largest ratio of a pulled-back strip height to the height of the strip it came from.
    pub nu_hat: f64,
    /// Largest strip height per nesting level, level 0 being the symbol strips.
    pub level_heights: Vec<f64>,
    /// Largest distance from a collapsing boundary image to the cusp point.
    pub collapse_distance: Option<f64>,
    pub kind_certified: HorseshoeKind,
    pub psi_samples: usize,
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    lo: f64,
    hi: f64,
    collapse_lo: bool,
    collapse_hi: bool,
}

/// Geometry of a set of symbol strips at fixed (α, β).
#[derive(Debug, Clone)]
struct Strips {
    p: ModelParams,
    alpha: f64,
    beta: f64,
    layout: Layout,
    symbols: Vec<Symbol>,
}

impl Strips {
    fn new(p: &ModelParams, alpha: f64, beta: f64, layout: Layout, symbols: Vec<Symbol>) -> Self {
        Strips { p: *p, alpha, beta, layout, symbols }
    }

    fn z_e(&self, n: i64, psi: f64, a: f64) -> f64 {
        maps::to_e_in_from_strip(&self.p, psi, a, n, self.beta).1
    }

    /// Extremum of z_E along the line ψ (minimum for k > 0, maximum for k < 0), found
    /// by bisecting dz_E/dA so that folds very close to A = 0 keep full relative accuracy.
    fn fold_a(&self, n: i64, psi: f64) -> f64 {
        let p = &self.p;
        let (tau, sgn) = (p.tau, p.k.signum());
        let c = p.exponents().delta_p * p.eta_e;
        let slope = |a: f64| {
            let rho = (c * (psi - a - maps::TWO_PI * n as f64)).exp();
            sgn * (-c * p.b22 * rho + 2.0 * p.k * a + self.beta * p.nu)
        };
        if slope(-tau) >= 0.0 {
            return -tau;
        }
        if slope(tau) <= 0.0 {
            return tau;
        }
        bisect_predicate(|a| slope(a) < 0.0, -tau, tau).0
    }

    /// Zero of z_E between `inside` (z_E > 0) and `outside` (z_E ≤ 0), on the inside.
    fn root(&self, n: i64, psi: f64, inside: f64, outside: f64) -> Option<f64> {
        if !(self.z_e(n, psi, inside) > 0.0) || self.z_e(n, psi, outside) > 0.0 {
            return None;
        }
        Some(bisect_predicate(|a| self.z_e(n, psi, a) > 0.0, inside, outside).0)
    }

    fn bounds(&self, s: usize, psi: f64) -> Option<Bounds> {
        let Symbol { n, branch } = self.symbols[s];
        let tau = self.p.tau;
        let b = match (self.layout, branch > 0) {
            (Layout::Regular, true) => {
                let f = self.fold_a(n, psi);
                (self.z_e(n, psi, f) > 0.0).then_some(Bounds { lo: f, hi: tau, collapse_lo: false, collapse_hi: false })?
            }
            (Layout::Regular, false) => {
                let f = self.fold_a(n, psi);
                (self.z_e(n, psi, f) > 0.0).then_some(Bounds { lo: -tau, hi: f, collapse_lo: false, collapse_hi: false })?
            }
            (Layout::CuspOutside, true) => {
                let r = self.root(n, psi, tau, self.fold_a(n, psi))?;
                Bounds { lo: r, hi: tau, collapse_lo: true, collapse_hi: false }
            }
            (Layout::CuspOutside, false) => {
                let r = self.root(n, psi, -tau, self.fold_a(n, psi))?;
                Bounds { lo: -tau, hi: r, collapse_lo: false, collapse_hi: true }
            }
            (Layout::CuspInside, true) => {
                let f = self.fold_a(n, psi);
                let r = self.root(n, psi, f, tau)?;
                Bounds { lo: f, hi: r, collapse_lo: false, collapse_hi: true }
            }
            (Layout::CuspInside, false) => {
                let f = self.fold_a(n, psi);
                let r = self.root(n, psi, f, -tau)?;
                Bounds { lo: r, hi: f, collapse_lo: true, collapse_hi: false }
            }
        };
        (b.lo < b.hi).then_some(b)
    }

    /// The cusp point p* = Ψ_EP(0, 0), image of the collapsing boundaries.
    fn cusp_point(&self) -> (f64, f64) {
        let q = maps::psi_ep(&self.p, &SectionPoint::e_out(0.0, 0.0), self.alpha);
        (q.u, q.v)
    }

    /// R in strip coordinates; boundary points with z_E ≤ 0 are sent to the cusp point.
    fn image(&self, s: usize, psi: f64, a: f64) -> (f64, f64) {
        let n = self.symbols[s].n;
        let (y, z_e) = maps::to_e_in_from_strip(&self.p, psi, a, n, self.beta);
        if z_e <= 0.0 {
            return self.cusp_point();
        }
        maps::from_e_in(&self.p, y, z_e, self.alpha).expect("z_E > 0 continues")
    }

    fn target_a(&self, j: usize, psi: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return f64::INFINITY;
        }
        a_coordinate(&self.p, psi, z, self.symbols[j].n)
    }

    fn height(&self, s: usize, psi: f64, a_lo: f64, a_hi: f64) -> f64 {
        let n = self.symbols[s].n;
        (z_from_a(&self.p, psi, a_lo, n) - z_from_a(&self.p, psi, a_hi, n)).abs()
    }

    /// Sign of dA'/dA along the lines of strip s (independent of the target strip).
    fn orientation(&self, s: usize) -> Option<i8> {
        let b = self.bounds(s, 0.0)?;
        let w = b.hi - b.lo;
        let (p1, z1) = self.image(s, 0.0, b.lo + 0.25 * w);
        let (p2, z2) = self.image(s, 0.0, b.lo + 0.75 * w);
        let d = self.target_a(s, p2, z2) - self.target_a(s, p1, z1);
        if d > 0.0 {
            Some(1)
        } else if d < 0.0 {
            Some(-1)
        } else {
            None
        }
    }

    /// Position of the orbit of (ψ, A) ∈ S_word[0] relative to the nested pullback
    /// of the remaining word: −1 before, 0 inside, +1 after, nondecreasing in A.
    /// `None` when an image leaves the vertical bounds |ψ| ≤ τ.
    fn ord(&self, orient: &[i8], word: &[usize], psi: f64, a: f64) -> Option<i8> {
        if word.len() == 1 {
            return Some(0);
        }
        let (i, j) = (word[0], word[1]);
        let (psi1, z1) = self.image(i, psi, a);
        if psi1.abs() > self.p.tau {
            return None;
        }
        let a1 = self.target_a(j, psi1, z1);
        let raw = if a1.is_infinite() {
            1
        } else {
            let b = self.bounds(j, psi1)?;
            if a1 < b.lo {
                -1
            } else if a1 > b.hi {
                1
            } else {
                self.ord(orient, &word[1..], psi1, a1)?
            }
        };
        Some(raw * orient[i])
    }

    /// The A-interval on the line ψ of S_word[0] whose orbit follows the word.
    fn nested_interval(&self, orient: &[i8], word: &[usize], psi: f64) -> Option<(f64, f64)> {
        let b = self.bounds(word[0], psi)?;
        let o = |a: f64| self.ord(orient, word, psi, a);
        if o(b.lo)? != -1 || o(b.hi)? != 1 {
            return None;
        }
        let lo = bisect_predicate(|a| o(a).map_or(false, |v| v < 0), b.lo, b.hi).1;
        let hi = bisect_predicate(|a| o(a).map_or(true, |v| v <= 0), b.lo, b.hi).0;
        (lo <= hi).then_some((lo, hi))
    }
}

fn layout_for(case: CaseId) -> Option<Layout> {
    match case {
        CaseId::Case3 => Some(Layout::CuspOutside),
        CaseId::Case4 => Some(Layout::CuspInside),
        CaseId::Case5 => Some(Layout::Regular),
        _ => None,
    }
}

fn symbols_for(case: CaseId, n: i64, width: i64) -> Vec<Symbol> {
    match case {
        CaseId::Case5 => (n..n + width).map(|m| Symbol { n: m, branch: 1 }).collect(),
        _ => (n..n + width - 1).flat_map(|m| [Symbol { n: m, branch: 1 }, Symbol { n: m, branch: -1 }]).collect(),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if n == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (n - 1) as f64 })
}

fn all_words(alphabet: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..alphabet).map(move |s| {
                    let mut v = w.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    out
}

fn fail(condition: &str, witness: String) -> Error {
    Error::CertificationFailed { condition: condition.to_string(), witness }
}

/// Certifies the horseshoe of the configured case on the window starting at strip n
/// (or the first window that certifies, searching n from the first strip index up to
/// [`MAX_INDEX`]). Uses two strips for Case 5 and the two branches of H_n in Cases 3–4.
pub fn certify_horseshoe(p: &ModelParams, n: Option<i64>, max_samples: usize) -> Result<HorseshoeReport> {
    let case = classify_case(p, &p.exponents())?;
    match n {
        Some(n) => certify_window(p, case.case_id, n, 2, max_samples),
        None => {
            let start = first_strip_index(p);
            let mut first_err = None;
            for m in start..=MAX_INDEX {
                match certify_window(p, case.case_id, m, 2, max_samples) {
                    Ok(r) => return Ok(r),
                    Err(e @ Error::CertificationFailed { .. }) => {
                        first_err.get_or_insert(e);
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(first_err.unwrap_or_else(|| fail("window search", "no admissible strip index".into())))
        }
    }
}

/// Certifies the horseshoe on strips n..n+width (Case 5) or on the branches of
/// H_n..H_{n+width−2} (Cases 3–4).
pub fn certify_window(p: &ModelParams, case_id: CaseId, n: i64, width: i64, max_samples: usize) -> Result<HorseshoeReport> {
    let case = classify_case(p, &p.exponents())?;
    if case.case_id != case_id {
        return Err(Error::WrongCase(format!("configuration is {:?}", case.case_id)));
    }
    let layout = layout_for(case.case_id)
        .ok_or_else(|| fail("case", format!("{:?} carries no horseshoe", case.case_id)))?;
    if !case.horseshoe_condition_met {
        return Err(fail("case condition", case.summary()));
    }
    let n0 = first_strip_index(p);
    if n < n0 {
        return Err(Error::IndexTooSmall { n, n0 });
    }
    let inter = intersection_condition(p, case.case_id, n)?;
    if !inter.holds {
        return Err(fail("intersection condition", format!("n={n}, margin={:e}", inter.margin)));
    }
    let symbols = symbols_for(case.case_id, n, width.max(2));
    let (alpha, beta) = (p.alpha, p.beta);
    let st = Strips::new(p, alpha, beta, layout, symbols.clone());
    let ns = symbols.len();
    let samples = max_samples.max(3);
    let psis: Vec<f64> = linspace(-p.tau, p.tau, samples).collect();
    let mut conditions = vec![ConditionCheck {
        name: "intersection condition".into(),
        passed: true,
        value: Some(inter.margin),
        witness: format!("n={n}, h_n={:e}", inter.height),
    }];

    // strips exist on every sampled line
    for s in 0..ns {
        for &psi in &psis {
            if st.bounds(s, psi).is_none() {
                return Err(fail("strip construction", format!("symbol {:?} empty at psi={psi}", symbols[s])));
            }
        }
    }
    let orient: Vec<i8> = (0..ns)
        .map(|s| st.orientation(s).ok_or_else(|| fail("monotone branch", format!("symbol {:?}", symbols[s]))))
        .collect::<Result<_>>()?;

    // (i)-(ii): horizontal boundaries map to opposite sides of every target strip
    for i in 0..ns {
        for &psi in &psis {
            let b = st.bounds(i, psi).unwrap();
            for j in 0..ns {
                let side = |a: f64| -> Option<i8> {
                    let (q, z) = st.image(i, psi, a);
                    let t = st.target_a(j, q, z);
                    let bj = if t.is_infinite() { st.bounds(j, 0.0)? } else { st.bounds(j, q)? };
                    Some(if t < bj.lo { -1 } else if t > bj.hi { 1 } else { 0 })
                };
                let (s_lo, s_hi) = (side(b.lo), side(b.hi));
                let crossing = matches!((s_lo, s_hi), (Some(x), Some(y)) if x != 0 && y != 0 && x != y);
                if !crossing {
                    return Err(fail(
                        "boundary mapping",
                        format!("{:?} -> {:?} at psi={psi}: sides {s_lo:?}, {s_hi:?}", symbols[i], symbols[j]),
                    ));
                }
            }
        }
    }
    conditions.push(ConditionCheck {
        name: "boundary mapping and full crossing".into(),
        passed: true,
        value: None,
        witness: format!("{} lines per strip, {} targets", samples, ns),
    });

    // (iii) nested pullbacks, their heights and the contraction factor
    let mut height_of: std::collections::HashMap<Vec<usize>, f64> = std::collections::HashMap::new();
    for s in 0..ns {
        let h = psis.iter().map(|&psi| st.bounds(s, psi).map_or(0.0, |b| st.height(s, psi, b.lo, b.hi))).fold(0.0, f64::max);
        height_of.insert(vec![s], h);
    }
    let mut level_heights = vec![height_of.values().cloned().fold(0.0, f64::max)];
    let mut nu_hat: f64 = 0.0;
    for level in 1..=LEVELS {
        let words = all_words(ns, level + 1);
        let heights: Vec<Result<f64>> = words
            .par_iter()
            .map(|w| {
                let mut h: f64 = 0.0;
                for &psi in &psis {
                    let (lo, hi) = st
                        .nested_interval(&orient, w, psi)
                        .ok_or_else(|| fail("nested pullback", format!("word {w:?} empty at psi={psi}")))?;
                    h = h.max(st.height(w[0], psi, lo, hi));
                }
                Ok(h)
            })
            .collect();
        let mut level_max: f64 = 0.0;
        for (w, h) in words.iter().zip(heights) {
            let h = h?;
            let parent = height_of[&w[1..].to_vec()];
            nu_hat = nu_hat.max(h / parent);
            level_max = level_max.max(h);
            height_of.insert(w.clone(), h);
        }
        level_heights.push(level_max);
    }
    let contraction_ok = nu_hat < 1.0;
    conditions.push(ConditionCheck {
        name: "contraction of nested pullbacks".into(),
        passed: contraction_ok,
        value: Some(nu_hat),
        witness: format!("{LEVELS} levels, heights {level_heights:?}"),
    });
    if !contraction_ok {
        return Err(fail("contraction of nested pullbacks", format!("nu_hat={nu_hat}")));
    }

    // homeomorphism: no sign change of det DR or of dA'/dA over the level-1 pullbacks
    let mut det_sign = 0.0;
    for i in 0..ns {
        for &psi in &psis {
            for j in 0..ns {
                let (lo, hi) = st.nested_interval(&orient, &[i, j], psi).unwrap();
                for a in linspace(lo, hi, samples) {
                    let z = z_from_a(p, psi, a, symbols[i].n);
                    let det = maps::jacobian_det_on_branch(p, psi, z, symbols[i].n, beta);
                    if det == 0.0 || !det.is_finite() || (det_sign != 0.0 && det.signum() != det_sign) {
                        return Err(fail("homeomorphism", format!("det DR={det} at psi={psi}, A={a}")));
                    }
                    det_sign = det.signum();
                }
            }
        }
    }
    conditions.push(ConditionCheck {
        name: "injectivity (constant Jacobian sign)".into(),
        passed: true,
        value: Some(det_sign),
        witness: format!("{} samples per pullback line", samples),
    });

    // (iv) collapse of boundaries into the cusp point
    let mut collapse_distance = None;
    if layout != Layout::Regular {
        let cusp = st.cusp_point();
        let tol = crate::model::Numerics::default().cusp_tol;
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for s in 0..ns {
            for &psi in &psis {
                let b = st.bounds(s, psi).unwrap();
                for (flag, a) in [(b.collapse_lo, b.lo), (b.collapse_hi, b.hi)] {
                    if flag {
                        let n_s = symbols[s].n;
                        let (y, z_e) = maps::to_e_in_from_strip(p, psi, a, n_s, beta);
                        let img = maps::from_e_in(p, y, z_e.max(0.0), alpha).unwrap_or(cusp);
                        worst = worst.max((img.0 - cusp.0).hypot(img.1 - cusp.1));
                        count += 1;
                    }
                }
            }
        }
        // each branch has one collapsing boundary: the inner one of H_n in Case 3,
        // the outer one (so both boundaries of H_n) in Case 4
        let ok = worst <= tol && count == psis.len() * ns;
        let per_hn = if layout == Layout::CuspOutside { "inner boundary of each branch" } else { "both boundaries of H_n" };
        conditions.push(ConditionCheck {
            name: "boundary collapse into cusp point".into(),
            passed: ok,
            value: Some(worst),
            witness: format!("{per_hn} collapse onto cusp point {cusp:?}"),
        });
        if !ok {
            return Err(fail("boundary collapse into cusp point", format!("distance {worst:e}")));
        }
        collapse_distance = Some(worst);
    }

    let kind_certified = case.horseshoe_kind;
    Ok(HorseshoeReport {
        case,
        params: *p,
        alpha,
        beta,
        strips_used: symbols,
        conditions,
        nu_hat,
        level_heights,
        collapse_distance,
        kind_certified,
        psi_samples: samples,
    })
}

fn strips_of(report: &HorseshoeReport) -> Result<Strips> {
    if report.kind_certified == HorseshoeKind::None {
        return Err(fail("report", "not certified".into()));
    }
    let layout = layout_for(report.case.case_id).ok_or_else(|| fail("report", "case carries no horseshoe".into()))?;
    Ok(Strips::new(&report.params, report.alpha, report.beta, layout, report.strips_used.clone()))
}

/// A word over the strip alphabet and the pseudo-orbit realizing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicItinerary {
    pub symbols: Vec<usize>,
    pub realized_point: Option<SectionPoint>,
    /// Strip coordinates (ψ_k, A_k) of every visit.
    pub orbit: Vec<(f64, f64)>,
    /// Largest one-step mismatch, in (ψ, ln z) units.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub matrix: Vec<Vec<u8>>,
    pub max_word_length: usize,
    pub words_realized: usize,
    pub max_residual: f64,
    pub itineraries: Vec<SymbolicItinerary>,
}

/// Realizes a word as a pseudo-orbit: depths A_k are solved backwards by bisection
/// on each line, angles ψ_k are carried forwards, until the angles settle.
pub fn realize_word(report: &HorseshoeReport, word: &[usize]) -> Result<SymbolicItinerary> {
    let st = strips_of(report)?;
    let p = &st.p;
    let ns = st.symbols.len();
    if word.is_empty() || word.iter().any(|&s| s >= ns) {
        return Err(Error::InvalidArgument(format!("word {word:?} outside alphabet of {ns}")));
    }
    let orient: Vec<i8> = (0..ns).map(|s| st.orientation(s).unwrap_or(1)).collect();
    let l = word.len();
    let unrealized = || Error::WordUnrealized(word.to_vec());
    let mut psi = vec![0.0; l];
    let mut a = vec![0.0; l];
    for _sweep in 0..12 {
        let b = st.bounds(word[l - 1], psi[l - 1]).ok_or_else(unrealized)?;
        a[l - 1] = 0.5 * (b.lo + b.hi);
        for k in (0..l - 1).rev() {
            let (i, j) = (word[k], word[k + 1]);
            let b = st.bounds(i, psi[k]).ok_or_else(unrealized)?;
            let target = a[k + 1];
            let f = |x: f64| {
                let (q, z) = st.image(i, psi[k], x);
                orient[i] as f64 * (st.target_a(j, q, z) - target)
            };
            if !(f(b.lo) < 0.0 && f(b.hi) > 0.0) {
                return Err(unrealized());
            }
            a[k] = bisect_predicate(|x| f(x) < 0.0, b.lo, b.hi).0;
        }
        let mut moved: f64 = 0.0;
        for k in 0..l - 1 {
            let (q, _) = st.image(word[k], psi[k], a[k]);
            moved = moved.max((q - psi[k + 1]).abs());
            psi[k + 1] = q;
        }
        if moved == 0.0 {
            break;
        }
    }
    // final depths for the settled angles, then per-step residuals and membership
    let b = st.bounds(word[l - 1], psi[l - 1]).ok_or_else(unrealized)?;
    a[l - 1] = a[l - 1].clamp(b.lo, b.hi);
    let mut residual: f64 = 0.0;
    for k in 0..l {
        let b = st.bounds(word[k], psi[k]).ok_or_else(unrealized)?;
        if !(a[k] >= b.lo && a[k] <= b.hi && psi[k].abs() <= p.tau) {
            return Err(unrealized());
        }
        if k + 1 < l {
            let (q, z) = st.image(word[k], psi[k], a[k]);
            let da = st.target_a(word[k + 1], q, z) - a[k + 1];
            residual = residual.max((q - psi[k + 1]).abs()).max((p.eta_e * da).abs());
        }
    }
    if !(residual <= 1e-8) {
        return Err(unrealized());
    }
    let n0 = st.symbols[word[0]].n;
    Ok(SymbolicItinerary {
        symbols: word.to_vec(),
        realized_point: Some(SectionPoint::p_in(psi[0], z_from_a(p, psi[0], a[0], n0))),
        orbit: psi.into_iter().zip(a).collect(),
        residual,
    })
}

/// Transition matrix of the certified strips and realizations of every word up to
/// length `max_len`.
pub fn transition_structure(report: &HorseshoeReport, max_len: usize) -> Result<TransitionReport> {
    let ns = report.strips_used.len();
    let words: Vec<Vec<usize>> = (1..=max_len).flat_map(|l| all_words(ns, l)).collect();
    let realized: Vec<Result<SymbolicItinerary>> = words.par_iter().map(|w| realize_word(report, w)).collect();
    let itineraries: Vec<SymbolicItinerary> = realized.into_iter().collect::<Result<_>>()?;
    let mut matrix = vec![vec![0u8; ns]; ns];
    for it in itineraries.iter().filter(|it| it.symbols.len() == 2) {
        matrix[it.symbols[0]][it.symbols[1]] = 1;
    }
    let max_residual = itineraries.iter().map(|it| it.residual).fold(0.0, f64::max);
    Ok(TransitionReport { matrix, max_word_length: max_len, words_realized: itineraries.len(), max_residual, itineraries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeCheckReport {
    pub sigma: f64,
    pub lambda_star: f64,
    pub grid: Vec<SectionPoint>,
    pub expansion_min: f64,
    pub contraction_expansion_min: f64,
    pub max_jacobian_error: f64,
    pub max_z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub psi_points: usize,
    pub depth_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { psi_points: 64, depth_points: 64 }
    }
}

/// Checks the sector bundles S^u_σ = {|dψ| < σ|dz|} and S^s_σ = {|dz| < σ|dψ|} on a
/// grid over the level-1 pullbacks of every certified strip. σ defaults to the
/// midpoint of (1/(λ*−1), 1), where λ* is the measured minimum of |tr DR|.
pub fn cone_field_check(report: &HorseshoeReport, grid: GridSpec, sigma: Option<f64>) -> Result<ConeCheckReport> {
    let st = strips_of(report)?;
    let p = st.p;
    let ns = st.symbols.len();
    let orient: Vec<i8> = (0..ns).map(|s| st.orientation(s).unwrap_or(1)).collect();
    let mut pts: Vec<(usize, f64, f64)> = Vec::new();
    for i in 0..ns {
        for psi in linspace(-p.tau, p.tau, grid.psi_points.max(1)) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for j in 0..ns {
                if let Some((a, b)) = st.nested_interval(&orient, &[i, j], psi) {
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
            }
            if lo > hi {
                return Err(fail("cone grid", format!("empty pullback at psi={psi}")));
            }
            let m = grid.depth_points.max(1);
            for k in 0..m {
                pts.push((i, psi, lo + (hi - lo) * (k as f64 + 0.5) / m as f64));
            }
        }
    }
    let beta = st.beta;
    type GridJac = (SectionPoint, Matrix2<f64>, Option<Matrix2<f64>>, f64);
    let jac: Vec<GridJac> = pts
        .par_iter()
        .map(|&(i, psi, a)| {
            let n = st.symbols[i].n;
            let z = z_from_a(&p, psi, a, n);
            let j = maps::jacobian_on_branch(&p, psi, z, n, beta);
            let inv = maps::jacobian_inverse_on_branch(&p, psi, z, n, beta);
            let err = maps::jacobian_fd(&p, psi, z, n, st.alpha, beta)
                .map_or(f64::INFINITY, |f| maps::column_relative_error(&j, &f));
            (SectionPoint::p_in(psi, z), j, inv, err)
        })
        .collect();
    let lambda_star = jac.iter().map(|t| t.1.trace().abs()).fold(f64::INFINITY, f64::min);
    let max_jacobian_error = jac.iter().map(|t| t.3).fold(0.0, f64::max);
    let max_z = jac.iter().map(|t| t.0.v).fold(0.0, f64::max);
    if !(lambda_star > 2.0) {
        return Err(fail("cone field", format!("lambda*={lambda_star} does not exceed 2")));
    }
    let lo = 1.0 / (lambda_star - 1.0);
    let sigma = sigma.unwrap_or(0.5 * (lo + 1.0));
    if !(sigma > lo && sigma < 1.0) {
        return Err(Error::InvalidArgument(format!("sigma={sigma} outside ({lo}, 1)")));
    }
    let ts = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut expansion_min = f64::INFINITY;
    let mut contraction_expansion_min = f64::INFINITY;
    for (q, j, inv, _) in &jac {
        let inv = inv.ok_or_else(|| fail("cone field", format!("singular DR at {q:?}")))?;
        for &t in &ts {
            let v = Vector2::new(sigma * t, 1.0);
            let w = j * v;
            if !(w[0].abs() < sigma * w[1].abs()) {
                return Err(Error::ConeViolated { psi: q.u, z: q.v, du: v[0], dv: v[1] });
            }
            expansion_min = expansion_min.min(w.norm() / v.norm());
            let v = Vector2::new(1.0, sigma * t);
            let w = inv * v;
            if !(w[1].abs() < sigma * w[0].abs()) {
                return Err(Error::ConeViolated { psi: q.u, z: q.v, du: v[0], dv: v[1] });
            }
            contraction_expansion_min = contraction_expansion_min.min(w.norm() / v.norm());
        }
    }
    let pass = expansion_min > 1.0 && contraction_expansion_min > 1.0 && max_jacobian_error <= 1e-5;
    Ok(ConeCheckReport {
        sigma,
        lambda_star,
        grid: jac.into_iter().map(|t| t.0).collect(),
        expansion_min,
        contraction_expansion_min,
        max_jacobian_error,
        max_z,
        pass,
    })
}

/// ln(#symbols) of each certified window; full shifts on k symbols have entropy ln k.
pub fn entropy_lower_bound(reports: &[HorseshoeReport]) -> Vec<f64> {
    reports
        .iter()
        .filter(|r| r.kind_certified != HorseshoeKind::None)
        .map(|r| (r.strips_used.len() as f64).ln())
        .collect()
}
