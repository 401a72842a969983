use std::fmt::Display;
use std::time::Instant;

use hetcycle::bifurcation::{
    self, BifCurve, ContinuationOptions, HetSlice, Side, SweepOptions,
};
use hetcycle::geometry::{self, FoldAxis, MapId, Trace, TraceOptions};
use hetcycle::horseshoe::{self, GridSpec, HorseshoeReport};
use hetcycle::model::{classify_case, CaseId, Config};
use hetcycle::Error;
use serde::Serialize;

use crate::output::{Cell, OutputDir};
use crate::{Cli, Command, TraceObject};

/// A failed run with its process exit code: 2 usage or configuration, 3 certification
/// failure, 4 solver failure, 1 anything else (I/O).
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Self {
        Failure { code: 2, message: message.to_string() }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. }
        | Error::DegenerateParameter(_)
        | Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::IndexTooSmall { .. }
        | Error::WrongCase(_)
        | Error::WrongSignPattern => 2,
        Error::CertificationFailed { .. } | Error::WordUnrealized(_) | Error::ConeViolated { .. } => 3,
        _ => 4,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: 1, message: format!("{e:#}") }
    }
}

type Outcome = std::result::Result<(), Failure>;

pub fn run(cli: &Cli, command: Vec<String>) -> Outcome {
    let start = Instant::now();
    let config_path = match &cli.command {
        Command::Classify { config }
        | Command::Certify { config, .. }
        | Command::Curves { config, .. }
        | Command::Sweep { config, .. }
        | Command::Trace { config, .. } => config,
    };
    let bytes = std::fs::read(config_path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", config_path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Failure::usage("config is not UTF-8"))?;
    let config = Config::from_toml_str(text)?;
    let mut out = OutputDir::create(&cli.out)?;
    // the manifest is written whatever the verdict
    let verdict = match &cli.command {
        Command::Classify { .. } => classify(&config, &mut out),
        Command::Certify { n_range, sigma, grid, psi_samples, .. } => {
            certify(&config, &mut out, n_range.as_deref(), *sigma, grid, *psi_samples)
        }
        Command::Curves { kinds, n_range, beta_range, het_slice, pulses, seed_beta, .. } => {
            let req = CurvesRequest {
                kinds,
                n_range: n_range.as_deref(),
                beta_range,
                het_slice: het_slice.as_deref(),
                pulses,
                seed_beta: *seed_beta,
            };
            curves(&config, &mut out, &req)
        }
        Command::Sweep { alpha_grid, beta_grid, probes, max_returns, .. } => {
            sweep(&config, &mut out, alpha_grid, beta_grid, *probes, *max_returns)
        }
        Command::Trace { object, n_range, samples, .. } => trace(&config, &mut out, *object, n_range.as_deref(), *samples),
    };
    out.finish(config_path, &bytes, command, start.elapsed().as_millis())?;
    verdict
}

// ---------------------------------------------------------------------------
// argument parsing

fn parse_f64(s: &str, what: &str) -> std::result::Result<f64, Failure> {
    s.trim().parse::<f64>().map_err(|_| Failure::usage(format!("{what}: '{s}' is not a number")))
}

/// "N" or "N0:N1", inclusive.
pub fn parse_n_range(s: &str) -> std::result::Result<Vec<i64>, Failure> {
    let bad = || Failure::usage(format!("n-range '{s}' must be N or N0:N1 with N0 <= N1"));
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<i64> = parts.iter().map(|t| t.trim().parse::<i64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    match nums.as_slice() {
        [n] => Ok(vec![*n]),
        [a, b] if a <= b => Ok((*a..=*b).collect()),
        _ => Err(bad()),
    }
}

/// "LO:HI:COUNT" with finite LO <= HI and COUNT >= 1 (COUNT = 1 requires LO = HI).
pub fn parse_grid(s: &str, what: &str) -> std::result::Result<(f64, f64, usize), Failure> {
    let bad = |why: &str| Failure::usage(format!("{what} '{s}': {why}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected LO:HI:COUNT"));
    }
    let lo = parse_f64(parts[0], what)?;
    let hi = parse_f64(parts[1], what)?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad("COUNT must be a positive integer"))?;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(bad("need finite LO <= HI"));
    }
    if count == 0 || (count == 1 && lo != hi) || (count > 1 && lo == hi) {
        return Err(bad("COUNT must be 1 for a single value and at least 2 otherwise"));
    }
    Ok((lo, hi, count))
}

fn linear(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn logarithmic(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    linear(lo.ln(), hi.ln(), count).into_iter().map(f64::exp).collect()
}

fn parse_grid_spec(s: &str) -> std::result::Result<GridSpec, Failure> {
    let bad = || Failure::usage(format!("grid '{s}' must be PSIxDEPTH with positive counts"));
    let (a, b) = s.split_once('x').ok_or_else(bad)?;
    let psi_points: usize = a.trim().parse().map_err(|_| bad())?;
    let depth_points: usize = b.trim().parse().map_err(|_| bad())?;
    if psi_points == 0 || depth_points == 0 {
        return Err(bad());
    }
    Ok(GridSpec { psi_points, depth_points })
}

fn parse_het_slice(s: &str) -> std::result::Result<HetSlice, Failure> {
    let (key, value) =
        s.split_once('=').ok_or_else(|| Failure::usage(format!("het-slice '{s}' must be beta=B, alpha=A or near-tip=OFFSET")))?;
    let v = parse_f64(value, "het-slice")?;
    match key.trim() {
        "beta" => Ok(HetSlice::Beta(v)),
        "alpha" => Ok(HetSlice::Alpha(v)),
        "near-tip" => Ok(HetSlice::NearTip(v)),
        other => Err(Failure::usage(format!("unknown het-slice coordinate '{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// classify

#[derive(Serialize)]
struct Classification {
    case: hetcycle::CaseTag,
    exponents: hetcycle::DerivedExponents,
    summary: String,
}

fn classify(config: &Config, out: &mut OutputDir) -> Outcome {
    let p = &config.params;
    let d = p.exponents();
    let case = classify_case(p, &d)?;
    let summary = case.summary();
    println!("{summary}");
    println!("delta = {:.6}", d.delta);
    println!("deltaP*delta2 = {:.6}", d.delta_p * d.delta2);
    out.json("classify.json", &Classification { case, exponents: d, summary })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// certify

fn certify(
    config: &Config,
    out: &mut OutputDir,
    n_range: Option<&str>,
    sigma: Option<f64>,
    grid: &str,
    psi_samples: usize,
) -> Outcome {
    let grid = parse_grid_spec(grid)?;
    if let Some(s) = sigma {
        if !(s > 0.0 && s < 1.0) {
            return Err(Failure::usage(format!("sigma={s} must lie in (0, 1)")));
        }
    }
    let p = &config.params;
    let case = classify_case(p, &p.exponents())?;
    println!("{}", case.summary());
    let attempts: Vec<(Option<i64>, hetcycle::Result<HorseshoeReport>)> = match n_range {
        None => vec![(None, horseshoe::certify_horseshoe(p, None, psi_samples))],
        Some(r) => parse_n_range(r)?
            .into_iter()
            .map(|n| (Some(n), horseshoe::certify_window(p, case.case_id, n, 2, psi_samples)))
            .collect(),
    };
    let mut reports = Vec::new();
    let mut cones = Vec::new();
    let mut first_failure: Option<Failure> = None;
    for (n, attempt) in attempts {
        let label = n.map_or("auto".to_string(), |n| format!("n={n}"));
        match attempt {
            Ok(r) => {
                let cone = horseshoe::cone_field_check(&r, grid, sigma);
                let n_used = r.strips_used.first().map_or(0, |s| s.n);
                match &cone {
                    Ok(c) => println!(
                        "{label}: {:?} horseshoe on strips from n={n_used}, nu_hat={:e}; cones sigma={} lambda*={:.6} {}",
                        r.kind_certified,
                        r.nu_hat,
                        c.sigma,
                        c.lambda_star,
                        if c.pass { "PASS" } else { "FAIL" }
                    ),
                    Err(e) => println!("{label}: {:?} horseshoe on strips from n={n_used}; cone check: {e}", r.kind_certified),
                }
                match cone {
                    Ok(c) => {
                        if !c.pass && first_failure.is_none() {
                            first_failure = Some(Failure {
                                code: 3,
                                message: format!(
                                    "cone check failed at {label}: expansion {} / {}, jacobian error {:e}",
                                    c.expansion_min, c.contraction_expansion_min, c.max_jacobian_error
                                ),
                            });
                        }
                        cones.push(c);
                    }
                    Err(e) => {
                        first_failure.get_or_insert(e.into());
                    }
                }
                reports.push(r);
            }
            Err(e) => {
                println!("{label}: {e}");
                first_failure.get_or_insert(e.into());
            }
        }
    }
    out.json("horseshoe.json", &reports)?;
    out.json("cone.json", &cones)?;
    match first_failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// curves

const CURVE_HEADER: [&str; 6] = ["curve", "winding", "index", "alpha", "beta", "residual"];

fn curve_rows(curves: &[BifCurve]) -> Vec<Vec<Cell>> {
    let mut rows = Vec::new();
    for c in curves {
        let winding = c.winding.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
        for (i, (&(a, b), &r)) in c.points.iter().zip(&c.residuals).enumerate() {
            rows.push(vec![
                Cell::S(c.kind.label()),
                Cell::S(winding.clone()),
                Cell::I(i as i64),
                Cell::F(a),
                Cell::F(b),
                Cell::F(r),
            ]);
        }
    }
    rows
}

struct CurvesRequest<'a> {
    kinds: &'a [String],
    n_range: Option<&'a str>,
    beta_range: &'a str,
    het_slice: Option<&'a str>,
    pulses: &'a [i64],
    seed_beta: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    HomE,
    HomP,
    HomPn,
    HetPE,
    Multipulse,
}

impl Kind {
    fn parse(s: &str) -> std::result::Result<Kind, Failure> {
        match s.trim().to_ascii_lowercase().as_str() {
            "home" => Ok(Kind::HomE),
            "homp" => Ok(Kind::HomP),
            "hompn" => Ok(Kind::HomPn),
            "hetpe" => Ok(Kind::HetPE),
            "multipulse" => Ok(Kind::Multipulse),
            other => Err(Failure::usage(format!("unknown curve kind '{other}' (home, homp, hompn, hetpe, multipulse)"))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::HomE => "home",
            Kind::HomP => "homp",
            Kind::HomPn => "hompn",
            Kind::HetPE => "hetpe",
            Kind::Multipulse => "multipulse",
        }
    }
}

fn curves(config: &Config, out: &mut OutputDir, req: &CurvesRequest) -> Outcome {
    let kinds: Vec<Kind> = req.kinds.iter().filter(|s| !s.trim().is_empty()).map(|s| Kind::parse(s)).collect::<Result<_, _>>()?;
    if kinds.is_empty() {
        return Err(Failure::usage("no curve kinds selected (--kinds home,homp,hompn,hetpe,multipulse)"));
    }
    let p = &config.params;
    let case = classify_case(p, &p.exponents())?;
    let ns = match req.n_range {
        Some(r) => parse_n_range(r)?,
        None => {
            let n0 = geometry::first_strip_index(p).max(1);
            (n0..n0 + 8).collect()
        }
    };
    if ns.iter().any(|&n| n < 1) {
        return Err(Failure::usage("winding indices must be at least 1"));
    }
    let (blo, bhi, bcount) = parse_grid(req.beta_range, "beta-range")?;
    if !(blo > 0.0) {
        return Err(Failure::usage("beta-range must be positive"));
    }
    let slice = match req.het_slice {
        Some(s) => parse_het_slice(s)?,
        None => match case.case_id {
            CaseId::Case5 => HetSlice::NearTip(1e-2),
            CaseId::Case3 => HetSlice::Alpha(-1e-2),
            _ => HetSlice::Beta(bhi),
        },
    };
    if kinds.contains(&Kind::Multipulse) && req.pulses.len() < 2 {
        return Err(Failure::usage("multipulse needs --pulses with at least two windings"));
    }

    let mut all: Vec<BifCurve> = Vec::new();
    let mut failed: Vec<String> = Vec::new();
    let mut note_failure = |what: String, e: &dyn Display| {
        eprintln!("{what}: {e}");
        failed.push(what);
    };
    for kind in &kinds {
        match kind {
            Kind::HomE => {
                let mut found = Vec::new();
                let mut tips = Vec::new();
                for &n in &ns {
                    match bifurcation::home_curve(p, n, 200) {
                        Ok(c) => {
                            if let Some((a, b)) = c.tip {
                                println!("HomE({n}) tip alpha={a:.6e} beta={b:.6e}");
                                tips.push(vec![Cell::I(n), Cell::F(a), Cell::F(b)]);
                            }
                            found.push(c);
                        }
                        Err(e) => note_failure(format!("home n={n}"), &e),
                    }
                }
                if !found.is_empty() {
                    out.csv("home.csv", "home", &CURVE_HEADER, &curve_rows(&found))?;
                    out.csv("home_tips.csv", "home-tips", &["winding", "alpha", "beta"], &tips)?;
                    all.extend(found);
                }
            }
            Kind::HomP => {
                let betas = logarithmic(blo, bhi, bcount);
                match bifurcation::homp_curve(p, &betas) {
                    Ok(fit) => {
                        println!(
                            "HomP exponent {:.6} (delta1 = {:.6}), prefactor {:.6e}",
                            fit.exponent,
                            p.exponents().delta1,
                            fit.prefactor
                        );
                        let rows: Vec<Vec<Cell>> = fit
                            .points
                            .iter()
                            .zip(&fit.curve.residuals)
                            .map(|(q, &r)| vec![Cell::F(q.beta), Cell::F(q.alpha), Cell::F(q.alpha_search), Cell::F(q.psi_star), Cell::F(r)])
                            .collect();
                        out.csv("homp.csv", "homp", &["beta", "alpha", "alpha_search", "psi_star", "residual"], &rows)?;
                        out.csv(
                            "homp_fit.csv",
                            "homp-fit",
                            &["exponent", "prefactor", "delta1"],
                            &[vec![Cell::F(fit.exponent), Cell::F(fit.prefactor), Cell::F(p.exponents().delta1)]],
                        )?;
                        all.push(fit.curve);
                    }
                    Err(e) => note_failure("homp".into(), &e),
                }
            }
            Kind::HomPn => {
                let mut rows = Vec::new();
                for &n in &ns {
                    match bifurcation::hompn_tangencies(p, &[n], bhi, Side::Above) {
                        Ok(t) => {
                            let t = t[0];
                            println!("HomP({n}) alpha={:.9e} beta={:.3e} distance to HomP {:.3e}", t.alpha, t.beta, t.offset);
                            rows.push(vec![Cell::I(n), Cell::F(t.alpha), Cell::F(t.beta), Cell::F(t.offset), Cell::F(t.residual)]);
                            all.push(BifCurve {
                                kind: bifurcation::BifKind::HomPn(n),
                                points: vec![(t.alpha, t.beta)],
                                residuals: vec![t.residual],
                                tip: None,
                                winding: vec![n],
                            });
                        }
                        Err(e) => note_failure(format!("hompn n={n}"), &e),
                    }
                }
                if !rows.is_empty() {
                    out.csv("hompn.csv", "hompn", &["winding", "alpha", "beta", "distance", "residual"], &rows)?;
                }
            }
            Kind::HetPE => {
                let mut found = Vec::new();
                for &n in &ns {
                    match bifurcation::hetpe_tangencies(p, &[n], slice) {
                        Ok(mut c) => {
                            let c = c.remove(0);
                            match c.tip {
                                Some((a, b)) => println!("HetPE({n}) tip alpha={a:.6e} beta={b:.6e}"),
                                None => {
                                    let (a, b) = c.points[0];
                                    println!("HetPE({n}) alpha={a:.9e} beta={b:.9e}");
                                }
                            }
                            found.push(c);
                        }
                        Err(e) => note_failure(format!("hetpe n={n}"), &e),
                    }
                }
                if !found.is_empty() {
                    out.csv("hetpe.csv", "hetpe", &CURVE_HEADER, &curve_rows(&found))?;
                    all.extend(found);
                }
            }
            Kind::Multipulse => {
                match bifurcation::multipulse_home(p, req.pulses, req.seed_beta, &ContinuationOptions::default()) {
                    Ok(found) => {
                        for c in &found {
                            println!("{}: {} points", c.kind.label(), c.points.len());
                        }
                        out.csv("multipulse.csv", "multipulse", &CURVE_HEADER, &curve_rows(&found))?;
                        all.extend(found);
                    }
                    Err(e @ Error::InvalidArgument(_)) => return Err(e.into()),
                    Err(e) => note_failure("multipulse".into(), &e),
                }
            }
        }
    }
    out.csv("diagram.csv", "diagram", &CURVE_HEADER, &curve_rows(&all))?;
    if all.is_empty() {
        let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
        return Err(Failure { code: 4, message: format!("every requested kind failed ({})", names.join(", ")) });
    }
    if !failed.is_empty() {
        eprintln!("partial failure: {}", failed.join("; "));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

fn sweep(config: &Config, out: &mut OutputDir, alpha_grid: &str, beta_grid: &str, probes: usize, max_returns: usize) -> Outcome {
    let (alo, ahi, na) = parse_grid(alpha_grid, "alpha-grid")?;
    let (blo, bhi, nb) = parse_grid(beta_grid, "beta-grid")?;
    if probes == 0 || max_returns == 0 {
        return Err(Failure::usage("probes and max-returns must be positive"));
    }
    let p = &config.params;
    let alphas = linear(alo, ahi, na);
    let betas = linear(blo, bhi, nb);
    let opts = SweepOptions { max_returns, probes_per_strip: probes };
    let result = bifurcation::sweep_diagram(p, &alphas, &betas, &opts);
    let rows: Vec<Vec<Cell>> =
        result.cells.iter().map(|c| vec![Cell::F(c.alpha), Cell::F(c.beta), Cell::S(c.label.as_str().into())]).collect();
    out.csv("sweep.csv", "sweep", &["alpha", "beta", "label"], &rows)?;

    let mut counts: Vec<(&str, usize)> = Vec::new();
    for c in &result.cells {
        match counts.iter_mut().find(|(l, _)| *l == c.label.as_str()) {
            Some(entry) => entry.1 += 1,
            None => counts.push((c.label.as_str(), 1)),
        }
    }
    for (label, n) in &counts {
        println!("{label}: {n}");
    }

    let inside = |&(a, b): &(f64, f64)| a >= alo && a <= ahi && b >= blo && b <= bhi;
    let mut home = Vec::new();
    let mut homp = Vec::new();
    if p.effective_a21() > 0.0 {
        for n in 1..=200 {
            let Ok(mut c) = bifurcation::home_curve(p, n, 200) else { continue };
            let tip_alpha = c.tip.map_or(0.0, |t| t.0);
            clip(&mut c, inside);
            if !c.points.is_empty() {
                home.push(c);
            }
            if home.len() >= 40 || (alo > 0.0 && tip_alpha < 0.5 * alo) || tip_alpha < 1e-12 * ahi.abs().max(1e-300) {
                break;
            }
        }
        let positive: Vec<f64> = betas.iter().copied().filter(|&b| b > 0.0).collect();
        if let Ok(fit) = bifurcation::homp_curve(p, &positive) {
            let mut c = fit.curve;
            clip(&mut c, inside);
            if !c.points.is_empty() {
                homp.push(c);
            }
        }
    }
    out.csv("overlay_home.csv", "overlay", &CURVE_HEADER, &curve_rows(&home))?;
    out.csv("overlay_homp.csv", "overlay", &CURVE_HEADER, &curve_rows(&homp))?;
    Ok(())
}

fn clip(c: &mut BifCurve, keep: impl Fn(&(f64, f64)) -> bool) {
    let (points, residuals) = c.points.iter().zip(&c.residuals).filter(|(q, _)| keep(q)).map(|(q, r)| (*q, *r)).unzip();
    c.points = points;
    c.residuals = residuals;
}

// ---------------------------------------------------------------------------
// trace

fn trace(config: &Config, out: &mut OutputDir, object: TraceObject, n_range: Option<&str>, samples: usize) -> Outcome {
    let p = &config.params;
    if samples < 2 {
        return Err(Failure::usage("samples must be at least 2"));
    }
    match object {
        TraceObject::Strips => {
            let ns = match n_range {
                Some(r) => parse_n_range(r)?,
                None => {
                    let n0 = geometry::first_strip_index(p);
                    (n0..n0 + 4).collect()
                }
            };
            let mut rows = Vec::new();
            for n in ns {
                let s = geometry::build_hn(p, n, samples)?;
                for (side, pts) in [("lower", &s.lower), ("upper", &s.upper)] {
                    for &(u, v) in pts.iter() {
                        rows.push(vec![Cell::I(n), Cell::S(side.into()), Cell::F(u), Cell::F(v)]);
                    }
                }
            }
            out.csv("strips.csv", "strips", &["n", "boundary", "psi", "z"], &rows)?;
        }
        TraceObject::DoubleHelix => {
            let t = geometry::double_helix_preimage(p, p.alpha, p.beta, &config.numerics)?;
            write_trace(out, "double_helix", &t)?;
        }
        TraceObject::UnstableP => {
            let w = geometry::unstable_manifold_of_p(p.tau, samples);
            let chain = [MapId::PsiPE, MapId::PiE, MapId::PsiEP];
            let t = geometry::propagate_trace(p, &w, &chain, p.alpha, p.beta, &TraceOptions::new(&config.numerics, FoldAxis::U))?;
            write_trace(out, "unstable_p", &t)?;
        }
    }
    Ok(())
}

fn write_trace(out: &mut OutputDir, name: &str, t: &Trace) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for (run, &(a, b)) in t.runs.iter().enumerate() {
        for i in a..b {
            let q = t.points[i];
            rows.push(vec![Cell::I(run as i64), Cell::F(t.params[i]), Cell::F(q.u), Cell::F(q.v), Cell::F(q.psi_lift)]);
        }
    }
    out.csv(&format!("{name}.csv"), "trace", &["run", "param", "u", "v", "psi_lift"], &rows)?;
    let events: Vec<Vec<Cell>> = t
        .events
        .iter()
        .map(|e| vec![Cell::S(format!("{:?}", e.kind)), Cell::I(e.index as i64), Cell::F(e.param), Cell::F(e.u), Cell::F(e.v)])
        .collect();
    out.csv(&format!("{name}_events.csv"), "trace-events", &["kind", "index", "param", "u", "v"], &events)?;
    Ok(())
}
