//! Model constants, configuration parsing and the five-case classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every constant of the cross-section model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub eta_c: f64,
    pub eta_e: f64,
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub xi1: f64,
    pub b11: f64,
    pub b12: f64,
    pub b22: f64,
    pub k: f64,
    pub nu: f64,
    pub xi2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub rotation_simplification: bool,
}

impl ModelParams {
    /// Checks every invariant and returns the params unchanged on success.
    pub fn validated(self) -> Result<Self> {
        let p = &self;
        let bad = |field: &'static str, reason: &str| {
            Err(Error::InvalidParameter { field, reason: reason.to_string() })
        };
        let all = [
            p.lambda1, p.lambda2, p.mu, p.eta_c, p.eta_e, p.a11, p.a12, p.a21, p.a22, p.xi1,
            p.b11, p.b12, p.b22, p.k, p.nu, p.xi2, p.alpha, p.beta, p.tau,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters", "must all be finite");
        }
        if p.lambda1 <= 0.0 {
            return bad("lambda1", "must be positive");
        }
        if p.lambda2 <= p.lambda1 {
            return bad("lambda2", "must exceed lambda1");
        }
        if p.mu <= p.lambda1 {
            return bad("mu", "must exceed lambda1");
        }
        if p.eta_c <= 0.0 {
            return bad("eta_c", "must be positive");
        }
        if p.eta_e <= 0.0 {
            return bad("eta_e", "must be positive");
        }
        if p.a11 <= 0.0 {
            return bad("a11", "must be positive");
        }
        if p.a21 == 0.0 {
            return bad("a21", "must be nonzero");
        }
        if p.a11 * p.a22 - p.a12 * p.a21 == 0.0 {
            return bad("a11*a22 - a12*a21", "must be nonzero");
        }
        if p.b22 == 0.0 {
            return bad("b22", "must be nonzero");
        }
        if p.k == 0.0 {
            return bad("k", "must be nonzero");
        }
        if p.nu <= 0.0 {
            return bad("nu", "must be positive");
        }
        if !(p.tau > 0.0 && p.tau < 1.0) {
            return bad("tau", "must lie in (0, 1)");
        }
        Ok(self)
    }

    pub fn with_unfolding(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    /// Linear part of the E-to-P transition actually used by the maps.
    pub fn effective_a(&self) -> [[f64; 2]; 2] {
        if self.rotation_simplification {
            [[0.0, -1.0], [1.0, 0.0]]
        } else {
            [[self.a11, self.a12], [self.a21, self.a22]]
        }
    }

    /// Effective alpha-direction of the E-to-P transition.
    pub fn effective_xi1(&self) -> f64 {
        self.xi1
    }

    pub fn effective_a21(&self) -> f64 {
        self.effective_a()[1][0]
    }

    pub fn exponents(&self) -> DerivedExponents {
        derive_exponents(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedExponents {
    pub delta1: f64,
    pub delta2: f64,
    pub delta_p: f64,
    pub delta: f64,
}

pub fn derive_exponents(p: &ModelParams) -> DerivedExponents {
    let delta1 = p.lambda1 / p.mu;
    let delta_p = p.eta_c / p.eta_e;
    DerivedExponents { delta1, delta2: p.lambda2 / p.mu, delta_p, delta: delta1 * delta_p }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorseshoeKind {
    None,
    Cusp,
    Regular,
}

/// The inequality that decides whether the case carries a horseshoe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseCondition {
    pub expression: String,
    pub value: f64,
    pub relation: char,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTag {
    pub case_id: CaseId,
    pub horseshoe_kind: HorseshoeKind,
    pub horseshoe_condition_met: bool,
    pub condition: Option<CaseCondition>,
}

impl CaseTag {
    /// One-line summary such as `Case5 / Regular / δ=1.2>1 PASS`.
    pub fn summary(&self) -> String {
        match &self.condition {
            None => format!("{:?} / isolated", self.case_id),
            Some(c) => {
                let (rel, verdict) = if self.horseshoe_condition_met {
                    (c.relation, "PASS")
                } else {
                    (if c.relation == '>' { '≤' } else { '≥' }, "FAIL")
                };
                // ten significant digits hide the rounding of the exponent ratios
                let value: f64 = format!("{:.9e}", c.value).parse().unwrap_or(c.value);
                format!(
                    "{:?} / {:?} / {}={}{}{} {}",
                    self.case_id, self.horseshoe_kind, c.expression, value, rel, c.threshold, verdict
                )
            }
        }
    }
}

/// Table of dynamics keyed on the signs of (a21, k, b22).
pub fn classify_case(p: &ModelParams, d: &DerivedExponents) -> Result<CaseTag> {
    let a21 = p.effective_a21();
    if a21 == 0.0 {
        return Err(Error::DegenerateParameter("a21"));
    }
    if p.k == 0.0 {
        return Err(Error::DegenerateParameter("k"));
    }
    if p.b22 == 0.0 {
        return Err(Error::DegenerateParameter("b22"));
    }
    let isolated = |case_id| CaseTag {
        case_id,
        horseshoe_kind: HorseshoeKind::None,
        horseshoe_condition_met: true,
        condition: None,
    };
    let cond = |case_id, kind, expression: &str, value: f64, relation: char| {
        let met = if relation == '>' { value > 1.0 } else { value < 1.0 };
        CaseTag {
            case_id,
            horseshoe_kind: kind,
            horseshoe_condition_met: met,
            condition: Some(CaseCondition {
                expression: expression.to_string(),
                value,
                relation,
                threshold: 1.0,
            }),
        }
    };
    if a21 < 0.0 {
        return Ok(isolated(CaseId::Case1));
    }
    Ok(match (p.k > 0.0, p.b22 > 0.0) {
        (false, false) => isolated(CaseId::Case2),
        (true, false) => cond(CaseId::Case3, HorseshoeKind::Cusp, "δP·δ2", d.delta_p * d.delta2, '>'),
        (false, true) => cond(CaseId::Case4, HorseshoeKind::Cusp, "δ", d.delta, '<'),
        (true, true) => cond(CaseId::Case5, HorseshoeKind::Regular, "δ", d.delta, '>'),
    })
}

/// The two curves through the origin that split the unfolding plane.
#[derive(Debug, Clone, Copy)]
pub struct RegionBoundaries {
    b22: f64,
    delta_p: f64,
    delta1: f64,
    k_tilde: f64,
}

impl RegionBoundaries {
    /// β = −b22·α^δP on α ≥ 0.
    pub fn first(&self, alpha: f64) -> f64 {
        -self.b22 * alpha.max(0.0).powf(self.delta_p)
    }

    /// β = k̃·|α|^(1/δ1) on α ≤ 0.
    pub fn second(&self, alpha: f64) -> f64 {
        self.k_tilde * alpha.min(0.0).abs().powf(1.0 / self.delta1)
    }
}

pub fn region_boundaries(p: &ModelParams, d: &DerivedExponents, k_tilde: f64) -> Result<RegionBoundaries> {
    if p.effective_a21() < 0.0 {
        return Err(Error::WrongCase("region boundaries need a21 > 0".into()));
    }
    if !(k_tilde > 0.0) {
        return Err(Error::InvalidArgument("k_tilde must be positive".into()));
    }
    Ok(RegionBoundaries { b22: p.b22, delta_p: d.delta_p, delta1: d.delta1, k_tilde })
}

/// Numerical tolerances shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub tau: f64,
    pub refine_tol: f64,
    pub z_min: f64,
    pub max_points: usize,
    pub cusp_tol: f64,
    pub max_returns: usize,
    pub word_length: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tau: 0.1,
            refine_tol: 1e-4,
            z_min: 1e-12,
            max_points: 1 << 20,
            cusp_tol: 1e-9,
            max_returns: 50,
            word_length: 8,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct EigenTable {
    lambda1: f64,
    lambda2: f64,
    mu: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FloquetTable {
    eta_c: f64,
    eta_e: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PsiEpTable {
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
    #[serde(default)]
    xi1: f64,
    #[serde(default)]
    rotation_simplification: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PsiPeTable {
    b11: f64,
    b12: f64,
    b22: f64,
    k: f64,
    nu: f64,
    #[serde(default)]
    xi2: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct UnfoldingTable {
    #[serde(default)]
    alpha: f64,
    #[serde(default)]
    beta: f64,
    #[serde(default = "one")]
    k_tilde: f64,
}

impl Default for UnfoldingTable {
    fn default() -> Self {
        UnfoldingTable { alpha: 0.0, beta: 0.0, k_tilde: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    eigenvalues: EigenTable,
    floquet: FloquetTable,
    psi_ep: PsiEpTable,
    psi_pe: PsiPeTable,
    #[serde(default)]
    unfolding: UnfoldingTable,
    #[serde(default)]
    numerics: Numerics,
}

/// A parsed and validated configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub numerics: Numerics,
    pub k_tilde: f64,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let raw: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let params = ModelParams {
            lambda1: raw.eigenvalues.lambda1,
            lambda2: raw.eigenvalues.lambda2,
            mu: raw.eigenvalues.mu,
            eta_c: raw.floquet.eta_c,
            eta_e: raw.floquet.eta_e,
            a11: raw.psi_ep.a11,
            a12: raw.psi_ep.a12,
            a21: raw.psi_ep.a21,
            a22: raw.psi_ep.a22,
            xi1: raw.psi_ep.xi1,
            b11: raw.psi_pe.b11,
            b12: raw.psi_pe.b12,
            b22: raw.psi_pe.b22,
            k: raw.psi_pe.k,
            nu: raw.psi_pe.nu,
            xi2: raw.psi_pe.xi2,
            alpha: raw.unfolding.alpha,
            beta: raw.unfolding.beta,
            tau: raw.numerics.tau,
            rotation_simplification: raw.psi_ep.rotation_simplification,
        }
        .validated()?;
        let n = raw.numerics;
        if !(n.refine_tol > 0.0 && n.z_min > 0.0 && n.cusp_tol > 0.0) {
            return Err(Error::InvalidParameter {
                field: "numerics",
                reason: "tolerances must be positive".into(),
            });
        }
        if n.max_points < 2 || n.word_length == 0 {
            return Err(Error::InvalidParameter {
                field: "numerics",
                reason: "max_points must be at least 2 and word_length at least 1".into(),
            });
        }
        if !(raw.unfolding.k_tilde > 0.0) {
            return Err(Error::InvalidParameter { field: "k_tilde", reason: "must be positive".into() });
        }
        Ok(Config { params, numerics: n, k_tilde: raw.unfolding.k_tilde })
    }

    pub fn to_toml_string(&self) -> String {
        let p = &self.params;
        let raw = ConfigFile {
            eigenvalues: EigenTable { lambda1: p.lambda1, lambda2: p.lambda2, mu: p.mu },
            floquet: FloquetTable { eta_c: p.eta_c, eta_e: p.eta_e },
            psi_ep: PsiEpTable {
                a11: p.a11,
                a12: p.a12,
                a21: p.a21,
                a22: p.a22,
                xi1: p.xi1,
                rotation_simplification: p.rotation_simplification,
            },
            psi_pe: PsiPeTable { b11: p.b11, b12: p.b12, b22: p.b22, k: p.k, nu: p.nu, xi2: p.xi2 },
            unfolding: UnfoldingTable { alpha: p.alpha, beta: p.beta, k_tilde: self.k_tilde },
            numerics: Numerics { tau: p.tau, ..self.numerics },
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

/// Ready-made parameter sets used by the tests, benches and examples.
pub mod presets {
    use super::ModelParams;

    fn base() -> ModelParams {
        ModelParams {
            lambda1: 0.8,
            lambda2: 1.2,
            mu: 1.0,
            eta_c: 1.5,
            eta_e: 1.0,
            a11: 1.0,
            a12: 0.0,
            a21: 1.0,
            a22: 1.0,
            xi1: 0.0,
            b11: 1.0,
            b12: 1.0,
            b22: 1.0,
            k: 1.0,
            nu: 1.0,
            xi2: 0.0,
            alpha: 0.0,
            beta: 0.0,
            tau: 0.1,
            rotation_simplification: true,
        }
    }

    /// Case 5 with δ = 1.2, scaled so that regular horseshoes on two to four
    /// consecutive strips certify from n = 5 on.
    pub fn case5_horseshoe() -> ModelParams {
        ModelParams { eta_c: 0.45, eta_e: 0.3, b22: 1e-3, k: 1e-3, ..base() }
    }

    /// Case 5 with δ = 1.2 and unit coefficients, used for bifurcation curves.
    pub fn case5_curves() -> ModelParams {
        base()
    }

    /// Case 3 with δP·δ2 = 2.25.
    pub fn case3() -> ModelParams {
        ModelParams {
            lambda1: 1.0,
            lambda2: 3.0,
            mu: 2.0,
            eta_c: 3.0,
            eta_e: 2.0,
            b22: -2e-3,
            k: 1.0,
            ..base()
        }
    }

    /// Case 3 with δP·δ2 = 1.2 and unit |b22|, used for bifurcation curves: the small
    /// η_c keeps consecutive Hom_n(P) and Het_n(PE) curves resolvable in double
    /// precision.
    pub fn case3_curves() -> ModelParams {
        ModelParams {
            lambda1: 1.0,
            lambda2: 3.0,
            mu: 2.0,
            eta_c: 0.4,
            eta_e: 0.5,
            b22: -1.0,
            k: 1.0,
            ..base()
        }
    }

    /// Case 4 with δ = 0.75.
    pub fn case4() -> ModelParams {
        ModelParams {
            lambda1: 1.0,
            lambda2: 3.0,
            mu: 2.0,
            eta_c: 0.75,
            eta_e: 0.5,
            b22: 1.0,
            k: -1.0,
            ..base()
        }
    }

    /// Case 2: a21 > 0, k < 0, b22 < 0.
    pub fn case2() -> ModelParams {
        ModelParams { b22: -1.0, k: -1.0, ..base() }
    }

    /// Case 1: a21 < 0.
    pub fn case1() -> ModelParams {
        ModelParams { a21: -1.0, rotation_simplification: false, ..base() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l1: f64, l2: f64, mu: f64, ec: f64, ee: f64) -> ModelParams {
        ModelParams { lambda1: l1, lambda2: l2, mu, eta_c: ec, eta_e: ee, ..presets::case5_curves() }
    }

    #[test]
    fn exponents_from_ratios() {
        let d = derive_exponents(&params(1.0, 3.0, 2.0, 3.0, 2.0));
        assert_eq!((d.delta1, d.delta2, d.delta_p, d.delta), (0.5, 1.5, 1.5, 0.75));
        let d = derive_exponents(&params(0.8, 1.2, 1.0, 1.5, 1.0));
        assert!((d.delta - 1.2).abs() < 1e-15);
        let d = derive_exponents(&params(1.0, 1.0000001, 2.0, 1.0, 1.0));
        assert!(d.delta1 < d.delta2);
    }

    #[test]
    fn table_examples() {
        let mut p = params(1.0, 3.0, 2.0, 3.0, 2.0);
        p.rotation_simplification = false;
        p.a21 = -1.0;
        let t = classify_case(&p, &p.exponents()).unwrap();
        assert_eq!((t.case_id, t.horseshoe_kind), (CaseId::Case1, HorseshoeKind::None));
        assert_eq!(t.summary(), "Case1 / isolated");
        p.a21 = 1.0;
        p.b22 = -1.0;
        let t = classify_case(&p, &p.exponents()).unwrap();
        assert_eq!((t.case_id, t.horseshoe_kind, t.horseshoe_condition_met), (CaseId::Case3, HorseshoeKind::Cusp, true));
        p.b22 = 1.0;
        let t = classify_case(&p, &p.exponents()).unwrap();
        assert_eq!((t.case_id, t.horseshoe_kind, t.horseshoe_condition_met), (CaseId::Case5, HorseshoeKind::Regular, false));
        let p = presets::case5_curves();
        assert_eq!(classify_case(&p, &p.exponents()).unwrap().summary(), "Case5 / Regular / δ=1.2>1 PASS");
    }

    #[test]
    fn zero_sign_is_degenerate() {
        let mut p = presets::case5_curves();
        p.k = 0.0;
        assert_eq!(classify_case(&p, &p.exponents()), Err(Error::DegenerateParameter("k")));
    }

    #[test]
    fn validation_messages() {
        let mut p = presets::case1();
        p.a21 = 0.0;
        assert_eq!(p.validated().unwrap_err().to_string(), "a21 must be nonzero");
        let mut p = presets::case5_curves();
        p.lambda2 = p.lambda1;
        assert!(p.validated().is_err());
        p = presets::case5_curves();
        p.tau = 1.0;
        assert!(p.validated().is_err());
    }

    #[test]
    fn region_boundary_values() {
        let mut p = presets::case5_curves();
        p.eta_c = 2.0;
        let rb = region_boundaries(&p, &p.exponents(), 1.0).unwrap();
        assert!((rb.first(0.1) + 0.01).abs() < 1e-15);
        assert_eq!((rb.first(0.0), rb.second(0.0)), (0.0, 0.0));
        let p = ModelParams { lambda1: 0.5, ..p };
        let rb = region_boundaries(&p, &p.exponents(), 1.0).unwrap();
        assert!((rb.second(-0.04) - 1.6e-3).abs() < 1e-15);
        assert!(matches!(
            region_boundaries(&presets::case1(), &presets::case1().exponents(), 1.0),
            Err(Error::WrongCase(_))
        ));
    }

    #[test]
    fn config_round_trip_and_strictness() {
        let cfg = Config { params: presets::case4(), numerics: Numerics::default(), k_tilde: 1.0 };
        let text = cfg.to_toml_string();
        assert_eq!(Config::from_toml_str(&text).unwrap(), cfg);
        let bad = text.replace("[floquet]", "[floquet]\nextra = 1.0");
        assert!(matches!(Config::from_toml_str(&bad), Err(Error::Config(_))));
        let zero = text.replace("a21 = 1.0", "a21 = 0.0");
        assert_eq!(Config::from_toml_str(&zero).unwrap_err().to_string(), "a21 must be nonzero");
    }

    #[test]
    fn presets_are_valid() {
        for p in [
            presets::case1(),
            presets::case2(),
            presets::case3(),
            presets::case4(),
            presets::case5_curves(),
            presets::case5_horseshoe(),
        ] {
            p.validated().unwrap();
        }
    }
}
