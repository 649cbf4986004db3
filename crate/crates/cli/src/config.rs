//! Experiment configuration: a JSON document with a strict schema.
//!
//! ```json
//! { "kind": "moments", "seed": 8, "output": "runs/m", "params": { ... } }
//! ```
//!
//! Unknown keys anywhere are violations. Validation never panics and
//! reports every violation it can find.

use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sparseloc::disorder::{DisorderModel, Law};
use sparseloc::lattice::{generate_sparse_set, Cube, Generator, Site, SiteSet, SparseSet};
use sparseloc::operators::{CosineTerm, SymbolSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Norms,
    Kernel,
    Propagator,
    DecayCheck,
    Sparseness,
    Cook,
    Moments,
    DecayFit,
    SimonWolff,
    Thresholds,
    EdgeScan,
    Theorem2Cube,
}

impl Kind {
    pub const ALL: [Kind; 12] = [
        Kind::Norms,
        Kind::Kernel,
        Kind::Propagator,
        Kind::DecayCheck,
        Kind::Sparseness,
        Kind::Cook,
        Kind::Moments,
        Kind::DecayFit,
        Kind::SimonWolff,
        Kind::Thresholds,
        Kind::EdgeScan,
        Kind::Theorem2Cube,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Norms => "norms",
            Kind::Kernel => "kernel",
            Kind::Propagator => "propagator",
            Kind::DecayCheck => "decay_check",
            Kind::Sparseness => "sparseness",
            Kind::Cook => "cook",
            Kind::Moments => "moments",
            Kind::DecayFit => "decay_fit",
            Kind::SimonWolff => "simon_wolff",
            Kind::Thresholds => "thresholds",
            Kind::EdgeScan => "edge_scan",
            Kind::Theorem2Cube => "theorem2_cube",
        }
    }

    /// Keys accepted inside `params`.
    pub fn param_keys(self) -> &'static [&'static str] {
        match self {
            Kind::Norms => &["symbol", "s"],
            Kind::Kernel => &["symbol", "max_offset"],
            Kind::Propagator => &["symbol", "t", "max_offset"],
            Kind::DecayCheck => &["symbol", "t", "d_lo", "d_hi", "time"],
            Kind::Sparseness => &["symbol", "half_side", "support", "t_max", "gamma", "phi"],
            Kind::Cook => &[
                "symbol",
                "half_side",
                "support",
                "disorder",
                "phi",
                "t",
                "samples",
            ],
            Kind::Moments => &[
                "symbol",
                "half_side",
                "support",
                "disorder",
                "energy",
                "epsilon",
                "s",
                "realizations",
                "source",
                "check_am_bound",
            ],
            Kind::DecayFit => &[
                "symbol",
                "half_side",
                "support",
                "disorder",
                "energy",
                "epsilon",
                "s",
                "realizations",
                "source",
                "k_s",
            ],
            Kind::SimonWolff => &[
                "symbol",
                "half_side",
                "support",
                "disorder",
                "energy",
                "realizations",
                "source",
                "ladder",
                "expect",
            ],
            Kind::Thresholds => &["symbol", "law", "s", "energy", "lambda", "kappa_hat"],
            Kind::EdgeScan => &[
                "symbol",
                "half_side",
                "support",
                "disorder",
                "realizations",
                "s",
                "bin_width",
                "contrast",
            ],
            Kind::Theorem2Cube => &[
                "symbol",
                "half_side",
                "support",
                "law",
                "s",
                "gamma",
                "kappa_hat",
                "center",
            ],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}'"))
    }
}

/// One failed constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl Violation {
    fn new(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    /// `Σ_i 2c cos(kθ_i)` on `dim` axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Explicit cosine terms per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<Vec<CosineTerm<f64>>>>,
}

impl SymbolConfig {
    pub fn laplacian(dim: usize) -> Self {
        SymbolConfig {
            dim: Some(dim),
            k: None,
            c: None,
            axes: None,
        }
    }

    pub fn spec(&self) -> sparseloc::Result<SymbolSpec<f64>> {
        match (&self.axes, self.dim) {
            (Some(axes), None) => SymbolSpec::new(axes.clone()),
            (None, Some(dim)) => Ok(SymbolSpec::uniform_cosine(
                dim,
                self.k.unwrap_or(1),
                self.c.unwrap_or(1.0),
            )),
            _ => Err(sparseloc::Error::InvalidArgument(
                "give exactly one of dim or axes".into(),
            )),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.axes.as_ref().map(|a| a.len()).or(self.dim)
    }

    /// `(Σ 2|c|^s)^{1/s}` when the symbol is a uniform cosine.
    pub fn closed_form_norm(&self, s: f64) -> Option<f64> {
        let dim = self.dim.filter(|_| self.axes.is_none())?;
        let c = self.c.unwrap_or(1.0).abs();
        Some((2.0 * dim as f64 * c.powf(s)).powf(1.0 / s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub name: String,
    pub params: Vec<f64>,
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig {
            name: "uniform".into(),
            params: vec![-1.0, 1.0],
        }
    }
}

impl LawConfig {
    pub fn law(&self) -> sparseloc::Result<Law> {
        Law::from_name(&self.name, &self.params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    All,
    Empty,
    DeterministicPowers,
    BernoulliThinned,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportConfig {
    pub generator: SupportKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<Vec<i64>>>,
}

impl SupportConfig {
    pub fn all() -> Self {
        SupportConfig {
            generator: SupportKind::All,
            alpha: None,
            sites: None,
        }
    }

    /// The support as a tagged sparse set; needs `alpha`.
    pub fn sparse(&self, cube: &Cube, seed: u64) -> sparseloc::Result<SparseSet> {
        let alpha = self.alpha.ok_or_else(|| {
            sparseloc::Error::InvalidArgument("sparse support needs alpha".into())
        })?;
        match self.generator {
            SupportKind::All => SparseSet::from_sites(alpha, cube.clone(), cube.sites()),
            SupportKind::Empty => SparseSet::from_sites(alpha, cube.clone(), []),
            SupportKind::Explicit => SparseSet::from_sites(
                alpha,
                cube.clone(),
                self.sites
                    .iter()
                    .flatten()
                    .map(|s| Site::new(s.iter().copied())),
            ),
            SupportKind::DeterministicPowers => {
                generate_sparse_set(alpha, cube, Generator::DeterministicPowers, seed)
            }
            SupportKind::BernoulliThinned => {
                generate_sparse_set(alpha, cube, Generator::BernoulliThinned, seed)
            }
        }
    }

    /// The support sites inside `cube`.
    pub fn sites(&self, cube: &Cube, seed: u64) -> sparseloc::Result<SiteSet> {
        match self.generator {
            SupportKind::All => Ok(SiteSet::full(cube)),
            SupportKind::Empty => Ok(SiteSet::empty()),
            _ => Ok(self.sparse(cube, seed)?.sites().clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl DisorderConfig {
    pub fn model(&self, seed: u64) -> sparseloc::Result<DisorderModel> {
        let law = self.law.law()?;
        match (self.lambda, self.gamma) {
            (Some(l), None) => DisorderModel::new(law, l, seed),
            (None, Some(g)) => DisorderModel::weighted(law, g, seed),
            _ => Err(sparseloc::Error::InvalidArgument(
                "give exactly one of lambda or gamma".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub site: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_lo: f64,
    pub t_hi: f64,
    pub points: usize,
    #[serde(default)]
    pub offset: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastConfig {
    /// States with `|E| > ‖H₀‖₁ + offset` count as outer.
    pub offset: f64,
    pub min_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Extended,
    Localized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsParams {
    pub symbol: SymbolConfig,
    pub s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub symbol: SymbolConfig,
    pub max_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorParams {
    pub symbol: SymbolConfig,
    pub t: Vec<f64>,
    pub max_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCheckParams {
    pub symbol: SymbolConfig,
    pub t: f64,
    pub d_lo: u64,
    pub d_hi: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsenessParams {
    pub symbol: SymbolConfig,
    pub half_side: u32,
    pub support: SupportConfig,
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<StateEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CookParams {
    pub symbol: SymbolConfig,
    pub half_side: u32,
    pub support: SupportConfig,
    pub disorder: DisorderConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<StateEntry>>,
    pub t: Vec<f64>,
    #[serde(default = "default_cook_samples")]
    pub samples: usize,
}

fn default_cook_samples() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    pub symbol: SymbolConfig,
    pub half_side: u32,
    pub support: SupportConfig,
    pub disorder: DisorderConfig,
    pub energy: f64,
    pub epsilon: f64,
    pub s: f64,
    pub realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<i64>>,
    #[serde(default)]
    pub check_am_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFitParams {
    pub symbol: SymbolConfig,
    pub half_side: u32,
    pub support: SupportConfig,
    pub disorder: DisorderConfig,
    pub energy: f64,
    pub epsilon: f64,
    pub s: f64,
    pub realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<i64>>,
    /// Overrides the decoupling-based `k_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimonWolffParams {
    pub symbol: SymbolConfig,
    pub half_side: u32,
    pub support: SupportConfig,
    pub disorder: DisorderConfig,
    pub energy: f64,
    pub realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec<i64>>,
    pub ladder: Vec<f64>,
    pub expect: Regime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsParams {
    pub symbol: SymbolConfig,
    #[serde(default)]
    pub law: LawConfig,
    pub s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeScanParams {
    pub symbol: SymbolConfig,
    pub half_side: u32,
    pub support: SupportConfig,
    pub disorder: DisorderConfig,
    pub realizations: u64,
    pub s: f64,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<ContrastConfig>,
}

fn default_bin_width() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Params {
    pub symbol: SymbolConfig,
    pub half_side: u32,
    pub support: SupportConfig,
    #[serde(default)]
    pub law: LawConfig,
    pub s: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Params {
    Norms(NormsParams),
    Kernel(KernelParams),
    Propagator(PropagatorParams),
    DecayCheck(DecayCheckParams),
    Sparseness(SparsenessParams),
    Cook(CookParams),
    Moments(MomentsParams),
    DecayFit(DecayFitParams),
    SimonWolff(SimonWolffParams),
    Thresholds(ThresholdsParams),
    EdgeScan(EdgeScanParams),
    Theorem2Cube(Theorem2Params),
}

impl Params {
    pub fn kind(&self) -> Kind {
        match self {
            Params::Norms(_) => Kind::Norms,
            Params::Kernel(_) => Kind::Kernel,
            Params::Propagator(_) => Kind::Propagator,
            Params::DecayCheck(_) => Kind::DecayCheck,
            Params::Sparseness(_) => Kind::Sparseness,
            Params::Cook(_) => Kind::Cook,
            Params::Moments(_) => Kind::Moments,
            Params::DecayFit(_) => Kind::DecayFit,
            Params::SimonWolff(_) => Kind::SimonWolff,
            Params::Thresholds(_) => Kind::Thresholds,
            Params::EdgeScan(_) => Kind::EdgeScan,
            Params::Theorem2Cube(_) => Kind::Theorem2Cube,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub params: Params,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn new(params: Params, seed: u64) -> Self {
        ExperimentConfig {
            params,
            seed,
            output: None,
        }
    }

    pub fn kind(&self) -> Kind {
        self.params.kind()
    }

    /// Canonical JSON text (sorted object keys, no output directory).
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            map.remove("output");
        }
        // serde_json's default map is ordered, so this text is canonical
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

const TOP_KEYS: &[&str] = &["kind", "seed", "output", "params"];

fn nested_keys(key: &str) -> Option<&'static [&'static str]> {
    Some(match key {
        "symbol" => &["dim", "k", "c", "axes"],
        "support" => &["generator", "alpha", "sites"],
        "disorder" => &["law", "lambda", "gamma"],
        "law" => &["name", "params"],
        "time" => &["t_lo", "t_hi", "points", "offset"],
        "contrast" => &["offset", "min_ratio"],
        "phi" => &["site", "re", "im"],
        "axes" => &["k", "c"],
        _ => return None,
    })
}

fn scan_keys(path: &str, key: &str, value: &Value, out: &mut Vec<Violation>) {
    let Some(allowed) = nested_keys(key) else {
        return;
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let here = format!("{path}.{k}");
                if !allowed.contains(&k.as_str()) {
                    out.push(Violation::new(
                        &here,
                        format!("unknown key (expected one of {allowed:?})"),
                    ));
                } else {
                    scan_keys(&here, k, v, out);
                }
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                scan_keys(&format!("{path}[{i}]"), key, item, out);
            }
        }
        _ => {}
    }
}

fn typed<T: DeserializeOwned>(params: &Value, out: &mut Vec<Violation>) -> Option<T> {
    match serde_json::from_value(params.clone()) {
        Ok(v) => Some(v),
        Err(e) => {
            out.push(Violation::new("params", e.to_string()));
            None
        }
    }
}

/// Parse and validate `raw`. `kind` (from the command line) must agree
/// with the document's `kind` when both are present; `seed` overrides.
pub fn validate_config(
    raw: &str,
    kind: Option<Kind>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, Vec<Violation>> {
    let mut out = Vec::new();
    let doc: Value = match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(e) => return Err(vec![Violation::new("$", format!("not valid JSON: {e}"))]),
    };
    let Value::Object(top) = doc else {
        return Err(vec![Violation::new("$", "top level must be an object")]);
    };
    for k in top.keys() {
        if !TOP_KEYS.contains(&k.as_str()) {
            out.push(Violation::new(
                k,
                format!("unknown key (expected one of {TOP_KEYS:?})"),
            ));
        }
    }
    let doc_kind = match top.get("kind") {
        None => None,
        Some(Value::String(s)) => match s.parse::<Kind>() {
            Ok(k) => Some(k),
            Err(e) => {
                out.push(Violation::new("kind", e));
                None
            }
        },
        Some(_) => {
            out.push(Violation::new("kind", "must be a string"));
            None
        }
    };
    let kind = match (kind, doc_kind) {
        (Some(a), Some(b)) if a != b => {
            out.push(Violation::new(
                "kind",
                format!("document says '{b}' but the command is '{a}'"),
            ));
            None
        }
        (a, b) => a.or(b),
    };
    if kind.is_none() && !out.iter().any(|v| v.field == "kind") {
        out.push(Violation::new("kind", "missing experiment kind"));
    }
    let seed = match (seed, top.get("seed")) {
        (Some(s), _) => Some(s),
        (None, Some(v)) => match v.as_u64() {
            Some(s) => Some(s),
            None => {
                out.push(Violation::new(
                    "seed",
                    "must be a nonnegative 64-bit integer",
                ));
                None
            }
        },
        (None, None) => {
            out.push(Violation::new("seed", "missing seed"));
            None
        }
    };
    let output = match top.get("output") {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            out.push(Violation::new("output", "must be a string"));
            None
        }
    };
    let params_value = match top.get("params") {
        Some(p @ Value::Object(_)) => Some(p.clone()),
        Some(_) => {
            out.push(Violation::new("params", "must be an object"));
            None
        }
        None => {
            out.push(Violation::new("params", "missing parameter block"));
            None
        }
    };
    let mut params = None;
    if let (Some(kind), Some(pv)) = (kind, &params_value) {
        let allowed = kind.param_keys();
        if let Value::Object(map) = pv {
            for (k, v) in map {
                let path = format!("params.{k}");
                if !allowed.contains(&k.as_str()) {
                    out.push(Violation::new(
                        &path,
                        format!("unknown key for '{kind}' (expected one of {allowed:?})"),
                    ));
                } else {
                    scan_keys(&path, k, v, &mut out);
                }
            }
        }
        if out.is_empty() {
            params = parse_params(kind, pv, &mut out);
        }
    }
    if let Some(p) = &params {
        check_params(p, &mut out);
    }
    match (params, seed) {
        (Some(params), Some(seed)) if out.is_empty() => Ok(ExperimentConfig {
            params,
            seed,
            output,
        }),
        _ => Err(out),
    }
}

fn parse_params(kind: Kind, v: &Value, out: &mut Vec<Violation>) -> Option<Params> {
    Some(match kind {
        Kind::Norms => Params::Norms(typed(v, out)?),
        Kind::Kernel => Params::Kernel(typed(v, out)?),
        Kind::Propagator => Params::Propagator(typed(v, out)?),
        Kind::DecayCheck => Params::DecayCheck(typed(v, out)?),
        Kind::Sparseness => Params::Sparseness(typed(v, out)?),
        Kind::Cook => Params::Cook(typed(v, out)?),
        Kind::Moments => Params::Moments(typed(v, out)?),
        Kind::DecayFit => Params::DecayFit(typed(v, out)?),
        Kind::SimonWolff => Params::SimonWolff(typed(v, out)?),
        Kind::Thresholds => Params::Thresholds(typed(v, out)?),
        Kind::EdgeScan => Params::EdgeScan(typed(v, out)?),
        Kind::Theorem2Cube => Params::Theorem2Cube(typed(v, out)?),
    })
}

/// Re-validate an already typed configuration.
pub fn check_config(config: &ExperimentConfig) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    check_params(&config.params, &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

struct Checker<'a> {
    out: &'a mut Vec<Violation>,
}

impl Checker<'_> {
    fn fail(&mut self, field: &str, constraint: impl Into<String>) {
        self.out
            .push(Violation::new(format!("params.{field}"), constraint));
    }

    fn s_open(&mut self, field: &str, s: f64) {
        if !(s > 0.0 && s < 1.0) {
            self.fail(field, format!("s ∈ (0,1) required, got {s}"));
        }
    }

    fn positive(&mut self, field: &str, x: f64) {
        if !(x > 0.0 && x.is_finite()) {
            self.fail(field, format!("must be positive and finite, got {x}"));
        }
    }

    fn finite(&mut self, field: &str, x: f64) {
        if !x.is_finite() {
            self.fail(field, "must be finite");
        }
    }

    fn symbol(&mut self, sym: &SymbolConfig, max_dim: Option<usize>) -> Option<usize> {
        if sym.axes.is_some() && (sym.dim.is_some() || sym.k.is_some() || sym.c.is_some()) {
            self.fail(
                "symbol",
                "give either axes or dim (with optional k, c), not both",
            );
            return None;
        }
        if sym.axes.is_none() && sym.dim.is_none() {
            self.fail("symbol", "give dim or axes");
            return None;
        }
        if sym.k == Some(0) {
            self.fail("symbol.k", "harmonic must be at least 1");
        }
        if let Some(c) = sym.c {
            self.finite("symbol.c", c);
        }
        if let Some(axes) = &sym.axes {
            for (i, axis) in axes.iter().enumerate() {
                for (j, t) in axis.iter().enumerate() {
                    if t.k == 0 {
                        self.fail(
                            &format!("symbol.axes[{i}][{j}].k"),
                            "harmonic must be at least 1",
                        );
                    }
                    if !t.c.is_finite() {
                        self.fail(&format!("symbol.axes[{i}][{j}].c"), "must be finite");
                    }
                }
            }
        }
        let dim = sym.dim()?;
        if dim == 0 {
            self.fail("symbol", "dimension must be at least 1");
            return None;
        }
        if dim > 5 {
            self.fail("symbol", "dimension above 5 is not supported");
            return None;
        }
        if let Some(m) = max_dim {
            if dim > m {
                self.fail(
                    "symbol",
                    format!("this experiment supports dimension at most {m}"),
                );
            }
        }
        Some(dim)
    }

    fn site(&mut self, field: &str, site: &[i64], dim: Option<usize>, half_side: Option<u32>) {
        if let Some(d) = dim {
            if site.len() != d {
                self.fail(
                    field,
                    format!(
                        "site has {} coordinates, symbol dimension is {d}",
                        site.len()
                    ),
                );
            }
        }
        if let Some(l) = half_side {
            if site.iter().any(|x| x.unsigned_abs() > l as u64) {
                self.fail(
                    field,
                    format!("site lies outside the cube of half-side {l}"),
                );
            }
        }
    }

    fn volume(&mut self, dim: Option<usize>, half_side: u32, cap: u64) {
        if half_side == 0 {
            self.fail("half_side", "must be at least 1");
        }
        if let Some(d) = dim {
            let vol = (2 * half_side as u128 + 1).checked_pow(d as u32);
            if vol.is_none_or(|v| v > cap as u128) {
                self.fail(
                    "half_side",
                    format!("cube of half-side {half_side} in dimension {d} exceeds {cap} sites"),
                );
            }
        }
    }

    fn support(
        &mut self,
        sup: &SupportConfig,
        dim: Option<usize>,
        half_side: u32,
        sparse_required: bool,
    ) {
        let needs_alpha = matches!(
            sup.generator,
            SupportKind::DeterministicPowers | SupportKind::BernoulliThinned
        );
        match sup.alpha {
            Some(a) if !(a > 0.0 && a < 1.0) => {
                self.fail("support.alpha", format!("α ∈ (0,1) required, got {a}"))
            }
            None if needs_alpha || sparse_required => {
                self.fail("support.alpha", "sparse generators need alpha")
            }
            _ => {}
        }
        if sparse_required && matches!(sup.generator, SupportKind::All) {
            self.fail("support.generator", "the full cube is never sparse");
        }
        match (&sup.sites, sup.generator) {
            (Some(sites), SupportKind::Explicit) => {
                for (i, s) in sites.iter().enumerate() {
                    self.site(&format!("support.sites[{i}]"), s, dim, Some(half_side));
                }
            }
            (None, SupportKind::Explicit) => {
                self.fail("support.sites", "explicit support needs a site list")
            }
            (Some(_), _) => self.fail(
                "support.sites",
                "site lists are only read by the explicit generator",
            ),
            _ => {}
        }
    }

    fn disorder(&mut self, d: &DisorderConfig) {
        if let Err(e) = d.law.law() {
            self.fail("disorder.law", e.to_string());
        }
        match (d.lambda, d.gamma) {
            (Some(l), None) if !(l >= 0.0 && l.is_finite()) => {
                self.fail("disorder.lambda", "must be finite and nonnegative")
            }
            (None, Some(g)) if !(g > 0.0 && g.is_finite()) => {
                self.fail("disorder.gamma", "must be positive")
            }
            (Some(_), Some(_)) | (None, None) => {
                self.fail("disorder", "give exactly one of lambda or gamma")
            }
            _ => {}
        }
    }

    fn phi(&mut self, phi: &Option<Vec<StateEntry>>, dim: Option<usize>, half_side: u32) {
        if let Some(p) = phi {
            if p.is_empty() {
                self.fail("phi", "initial state is empty");
            }
            for (i, e) in p.iter().enumerate() {
                self.site(&format!("phi[{i}].site"), &e.site, dim, Some(half_side));
                if !(e.re.is_finite() && e.im.is_finite()) {
                    self.fail(&format!("phi[{i}]"), "amplitudes must be finite");
                }
            }
        }
    }

    fn realizations(&mut self, n: u64, min: u64) {
        if n < min {
            self.fail(
                "realizations",
                format!("at least {min} realizations required"),
            );
        }
    }
}

const MAX_SITES: u64 = 1 << 22;
const DENSE_CAP: u64 = sparseloc::spectra::DEFAULT_DENSE_CAP as u64;

fn check_params(params: &Params, out: &mut Vec<Violation>) {
    let mut c = Checker { out };
    match params {
        Params::Norms(p) => {
            c.symbol(&p.symbol, None);
            if p.s.is_empty() {
                c.fail("s", "at least one exponent required");
            }
            for (i, s) in p.s.iter().enumerate() {
                if !(*s > 0.0 && *s <= 1.0) {
                    c.fail(&format!("s[{i}]"), format!("s ∈ (0,1] required, got {s}"));
                }
            }
        }
        Params::Kernel(p) => {
            c.symbol(&p.symbol, Some(3));
            if p.max_offset > 64 {
                c.fail("max_offset", "at most 64");
            }
        }
        Params::Propagator(p) => {
            let dim = c.symbol(&p.symbol, Some(3));
            if p.t.is_empty() {
                c.fail("t", "at least one time required");
            }
            for (i, t) in p.t.iter().enumerate() {
                c.finite(&format!("t[{i}]"), *t);
            }
            if let Some(d) = dim {
                if (2 * p.max_offset + 1)
                    .checked_pow(d as u32)
                    .is_none_or(|v| v > 1 << 20)
                {
                    c.fail("max_offset", "offset box exceeds 2^20 entries");
                }
            }
        }
        Params::DecayCheck(p) => {
            c.symbol(&p.symbol, None);
            c.finite("t", p.t);
            if p.d_lo > p.d_hi {
                c.fail("d_lo", "must not exceed d_hi");
            }
            if p.d_hi > 100_000 {
                c.fail("d_hi", "at most 100000");
            }
            if let Some(t) = &p.time {
                if !(50.0 <= t.t_lo && t.t_lo < t.t_hi && t.t_hi <= 1000.0) {
                    c.fail("time", "need 50 ≤ t_lo < t_hi ≤ 1000");
                }
                if t.points < 3 {
                    c.fail("time.points", "at least 3 points");
                }
            }
        }
        Params::Sparseness(p) => {
            let dim = c.symbol(&p.symbol, None);
            if let Some(d) = dim {
                let window = 2.0 * (1.0 / 3.0 - 1.0 / d as f64);
                if d < 4 {
                    c.fail(
                        "symbol",
                        format!(
                            "sparseness claims need ν ≥ 4: the admissible window 0 < α < 2(1/3 − 1/ν) = {window:.4} is empty for ν = {d}"
                        ),
                    );
                } else if let Some(a) = p.support.alpha {
                    if !(a > 0.0 && a < window) {
                        c.fail("support.alpha", format!("α must lie in the admissible window (0, 2(1/3 − 1/ν)) = (0, {window:.4}) for ν = {d}"));
                    }
                }
            }
            if p.half_side == 0 {
                c.fail("half_side", "must be at least 1");
            }
            c.support(&p.support, dim, p.half_side, true);
            if !(p.t_max >= 8.0 && p.t_max <= 4096.0) {
                c.fail("t_max", "must lie in [8, 4096]");
            }
            if let Some(g) = p.gamma {
                if !(g > 0.0 && g.is_finite()) {
                    c.fail("gamma", "must be positive");
                }
            }
            c.phi(&p.phi, dim, p.half_side);
        }
        Params::Cook(p) => {
            let dim = c.symbol(&p.symbol, None);
            if p.half_side == 0 {
                c.fail("half_side", "must be at least 1");
            }
            c.support(&p.support, dim, p.half_side, false);
            if matches!(p.support.generator, SupportKind::All) {
                c.fail(
                    "support.generator",
                    "the Cook integrand needs an explicit or generated support",
                );
            }
            c.disorder(&p.disorder);
            c.phi(&p.phi, dim, p.half_side);
            if p.t.is_empty() {
                c.fail("t", "at least one time required");
            }
            for (i, t) in p.t.iter().enumerate() {
                c.finite(&format!("t[{i}]"), *t);
            }
            if p.samples < 30 {
                c.fail("samples", "at least 30 disorder samples");
            }
        }
        Params::Moments(p) => {
            let dim = c.symbol(&p.symbol, None);
            c.volume(dim, p.half_side, MAX_SITES);
            c.support(&p.support, dim, p.half_side, false);
            c.disorder(&p.disorder);
            c.finite("energy", p.energy);
            c.positive("epsilon", p.epsilon);
            c.s_open("s", p.s);
            c.realizations(p.realizations as u64, 2);
            if let Some(src) = &p.source {
                c.site("source", src, dim, Some(p.half_side));
            }
            if p.check_am_bound && p.disorder.lambda.is_none() {
                c.fail(
                    "check_am_bound",
                    "the uniform bound needs a coupling lambda",
                );
            }
        }
        Params::DecayFit(p) => {
            let dim = c.symbol(&p.symbol, None);
            c.volume(dim, p.half_side, MAX_SITES);
            c.support(&p.support, dim, p.half_side, false);
            c.disorder(&p.disorder);
            c.finite("energy", p.energy);
            c.positive("epsilon", p.epsilon);
            c.s_open("s", p.s);
            c.realizations(p.realizations as u64, 2);
            if let Some(src) = &p.source {
                c.site("source", src, dim, Some(p.half_side));
            }
            if let Some(k) = p.k_s {
                if !(k > 0.0 && k < 1.0) {
                    c.fail("k_s", "must lie in (0,1)");
                }
            }
        }
        Params::SimonWolff(p) => {
            let dim = c.symbol(&p.symbol, None);
            c.volume(dim, p.half_side, MAX_SITES);
            c.support(&p.support, dim, p.half_side, false);
            c.disorder(&p.disorder);
            c.finite("energy", p.energy);
            c.realizations(p.realizations as u64, 2);
            if let Some(src) = &p.source {
                c.site("source", src, dim, Some(p.half_side));
            }
            if p.ladder.is_empty() {
                c.fail("ladder", "at least one epsilon");
            }
            if p.ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                c.fail("ladder", "every epsilon must be positive (ε > 0)");
            }
            if p.ladder.windows(2).any(|w| w[1] >= w[0]) {
                c.fail("ladder", "must be strictly decreasing");
            }
        }
        Params::Thresholds(p) => {
            c.symbol(&p.symbol, None);
            if let Err(e) = p.law.law() {
                c.fail("law", e.to_string());
            }
            if p.s.is_empty() {
                c.fail("s", "at least one exponent required");
            }
            for (i, s) in p.s.iter().enumerate() {
                c.s_open(&format!("s[{i}]"), *s);
            }
            if let Some(e) = p.energy {
                c.finite("energy", e);
            }
            if let Some(l) = p.lambda {
                c.positive("lambda", l);
            }
            if let Some(k) = p.kappa_hat {
                c.positive("kappa_hat", k);
            }
            if p.energy.is_some() && p.lambda.is_none() {
                c.fail("lambda", "k_s at a given energy needs lambda");
            }
        }
        Params::EdgeScan(p) => {
            let dim = c.symbol(&p.symbol, None);
            c.volume(dim, p.half_side, DENSE_CAP);
            c.support(&p.support, dim, p.half_side, false);
            c.disorder(&p.disorder);
            c.realizations(p.realizations, 20);
            c.s_open("s", p.s);
            c.positive("bin_width", p.bin_width);
            if let Some(ct) = &p.contrast {
                c.finite("contrast.offset", ct.offset);
                c.positive("contrast.min_ratio", ct.min_ratio);
            }
        }
        Params::Theorem2Cube(p) => {
            let dim = c.symbol(&p.symbol, None);
            c.volume(dim, p.half_side, MAX_SITES);
            c.support(&p.support, dim, p.half_side, false);
            if let Err(e) = p.law.law() {
                c.fail("law", e.to_string());
            }
            c.s_open("s", p.s);
            c.positive("gamma", p.gamma);
            if let Some(k) = p.kappa_hat {
                c.positive("kappa_hat", k);
            }
            if let Some(ctr) = &p.center {
                c.site("center", ctr, dim, None);
            }
        }
    }
}
