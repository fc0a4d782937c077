//! JSON configuration shared by every subcommand.
//!
//! Regimes are numbered from 1 in the file (`y0`, matrix rows in reports) and
//! from 0 in the library.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use worstcase_core::pde::SolverSettings;
use worstcase_core::{
    DiffusionCoef, Dynamics, Interval, PayoffSpec, PiecewiseLinear, ProblemSpec, RateBoxes, RateMatrix,
};

/// A configuration problem located by its field path, e.g. `model.sigma[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub payoff: PayoffConfig,
    pub horizon: f64,
    pub alpha: f64,
    pub x0: f64,
    /// 1-based initial regime.
    pub y0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<BoxesConfig>,
    /// Full rate matrix for `price`; rows in regime order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub checks: Checks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelConfig {
    Gbm(GbmConfig),
    Cev(CevConfig),
    Driftless(DriftlessConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmConfig {
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CevConfig {
    pub sigma: Vec<f64>,
    pub gamma: f64,
}

/// `a_table` lists `[x, a(x)]` points; without it `a = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftlessConfig {
    pub sigma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PayoffConfig {
    Put(PutConfig),
    Table(TableConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PutConfig {
    pub strike: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub holder_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub points: Vec<[f64; 2]>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub holder_beta: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxesConfig {
    /// `plus[i] = [lo, hi]` bounds the rate from regime `i + 1` to `i + 2`.
    pub plus: Vec<[f64; 2]>,
    /// `minus[i] = [lo, hi]` bounds the rate from regime `i + 2` to `i + 1`.
    pub minus: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "GridConfig::default_n")]
    pub nx: usize,
    #[serde(default = "GridConfig::default_n")]
    pub nt: usize,
    #[serde(default = "GridConfig::default_width")]
    pub width_mult: f64,
}

impl GridConfig {
    fn default_n() -> usize {
        400
    }

    fn default_width() -> f64 {
        5.0
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: Self::default_n(), nt: Self::default_n(), width_mult: Self::default_width() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "McConfig::default_paths")]
    pub n_paths: usize,
    #[serde(default = "McConfig::default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

impl McConfig {
    fn default_paths() -> usize {
        100_000
    }

    fn default_dt() -> f64 {
        0.004
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_paths: Self::default_paths(), dt: Self::default_dt(), seed: 0 }
    }
}

/// Check toggles and their parameters. Every check is on unless disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Surface invariants on every solved surface.
    pub invariants: bool,
    /// `price`: binomial tree comparison (single-regime GBM put only).
    pub binomial: bool,
    pub binomial_steps: usize,
    pub binomial_rel_tol: f64,
    /// `worstcase`: HJB against the constant solve at the extremal matrix.
    pub hjb_equality: bool,
    /// `worstcase`/`verify-extremal`: regime ordering of the value.
    pub regime_monotonicity: bool,
    pub regime_tol: f64,
    /// `boundary`: strict ordering of the exercise boundaries.
    pub boundary_ordering: bool,
    /// `verify-extremal`: nodewise dominance against sampled matrices.
    pub dominance: bool,
    pub dominance_samples: usize,
    pub dominance_tol: f64,
    pub dominance_seed: u64,
    /// `verify-extremal`: endpoint brute force.
    pub brute_force: bool,
    pub brute_force_samples: usize,
    /// `game`: lower bound of the extremal boundary rule under other strategies.
    pub lower_bound: bool,
    pub lower_bound_random: usize,
    /// `game`: saddle-point inequalities.
    pub saddle: bool,
    /// `game` with CEV dynamics: floor-event fraction.
    pub floor_fraction: bool,
    /// `moments`: exponents and optional growth constant / horizon.
    pub moment_exponents: Vec<f64>,
    pub moment_k: Option<f64>,
    pub moment_t: Option<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            invariants: true,
            binomial: true,
            binomial_steps: 5000,
            binomial_rel_tol: 5e-3,
            hjb_equality: true,
            regime_monotonicity: true,
            regime_tol: 1e-8,
            boundary_ordering: true,
            dominance: true,
            dominance_samples: 20,
            dominance_tol: 1e-6,
            dominance_seed: 1,
            brute_force: true,
            brute_force_samples: 2,
            lower_bound: true,
            lower_bound_random: 3,
            saddle: true,
            floor_fraction: true,
            moment_exponents: vec![2.0, 4.0],
            moment_k: None,
            moment_t: None,
        }
    }
}

/// Tagged sections are buffered before their variant is known, which hides
/// the failing field; deserialize the variant body again to find it.
fn locate_tagged(text: &str, path: &str) -> Option<ConfigError> {
    fn body<T: serde::de::DeserializeOwned>(section: &str, mut v: serde_json::Value) -> Option<ConfigError> {
        v.as_object_mut()?.remove("type");
        serde_path_to_error::deserialize::<_, T>(v)
            .err()
            .map(|e| ConfigError::new(format!("{section}.{}", e.path()), e.into_inner()))
    }
    if path != "model" && path != "payoff" {
        return None;
    }
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let section = root.get(path)?.clone();
    match (path, section.get("type")?.as_str()?) {
        ("model", "gbm") => body::<GbmConfig>(path, section),
        ("model", "cev") => body::<CevConfig>(path, section),
        ("model", "driftless") => body::<DriftlessConfig>(path, section),
        ("payoff", "put") => body::<PutConfig>(path, section),
        ("payoff", "table") => body::<TableConfig>(path, section),
        _ => None,
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            locate_tagged(text, &path).unwrap_or_else(|| ConfigError::new(path, e.into_inner()))
        })?;
        cfg.problem()?;
        if let Some(b) = &cfg.boxes {
            b.to_boxes()?;
        }
        cfg.check_numbers()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check_numbers(&self) -> Result<(), ConfigError> {
        if self.grid.nx < 3 {
            return Err(ConfigError::new("grid.nx", "need at least 3 space nodes"));
        }
        if self.grid.nt < 2 {
            return Err(ConfigError::new("grid.nt", "need at least 2 time nodes"));
        }
        if !(self.grid.width_mult > 0.0) {
            return Err(ConfigError::new("grid.width_mult", "must be positive"));
        }
        if self.mc.n_paths == 0 {
            return Err(ConfigError::new("mc.n_paths", "need at least one path"));
        }
        if !(self.mc.dt > 0.0 && self.mc.dt <= self.horizon / 10.0) {
            return Err(ConfigError::new("mc.dt", format!("must lie in (0, horizon/10 = {}]", self.horizon / 10.0)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> &[f64] {
        match &self.model {
            ModelConfig::Gbm(GbmConfig { sigma, .. })
            | ModelConfig::Cev(CevConfig { sigma, .. })
            | ModelConfig::Driftless(DriftlessConfig { sigma, .. }) => sigma,
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        let dynamics = match &self.model {
            ModelConfig::Gbm(GbmConfig { mu, .. }) => Dynamics::Gbm { mu: *mu },
            ModelConfig::Cev(CevConfig { gamma, .. }) => Dynamics::Cev { gamma: *gamma },
            ModelConfig::Driftless(DriftlessConfig { a_table: None, .. }) => Dynamics::Driftless { a: DiffusionCoef::Constant(1.0) },
            ModelConfig::Driftless(DriftlessConfig { a_table: Some(points), .. }) => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                let table = PiecewiseLinear::from_points(&pts).map_err(|e| ConfigError::new("model.a_table", e))?;
                Dynamics::Driftless { a: DiffusionCoef::Table(table) }
            }
        };
        let payoff = match &self.payoff {
            PayoffConfig::Put(PutConfig { strike, holder_beta }) => {
                PayoffSpec { holder_beta: *holder_beta, ..PayoffSpec::put(*strike) }
            }
            PayoffConfig::Table(TableConfig { points, holder_beta }) => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                let table = PiecewiseLinear::from_points(&pts).map_err(|e| ConfigError::new("payoff.points", e))?;
                PayoffSpec { holder_beta: *holder_beta, ..PayoffSpec::table(table) }
            }
        };
        let m = self.sigma().len();
        if self.y0 == 0 || self.y0 > m {
            return Err(ConfigError::new("y0", format!("must lie in 1..={m}")));
        }
        let problem = ProblemSpec {
            dynamics,
            sigma: self.sigma().to_vec(),
            payoff,
            horizon: self.horizon,
            alpha: self.alpha,
            x0: self.x0,
            y0: self.y0 - 1,
        };
        problem.validate().map_err(|e| ConfigError::new(model_error_path(&e), e))?;
        Ok(problem)
    }

    /// The rate boxes; an error naming `boxes` when they are absent.
    pub fn boxes(&self) -> Result<RateBoxes, ConfigError> {
        let boxes = match &self.boxes {
            Some(b) => b.to_boxes()?,
            None if self.sigma().len() == 1 => RateBoxes::trivial(),
            None => return Err(ConfigError::new("boxes", "missing field required by this subcommand")),
        };
        if boxes.m() != self.sigma().len() {
            return Err(ConfigError::new(
                "boxes.plus",
                format!("{} regimes need {} boxes per direction", self.sigma().len(), self.sigma().len() - 1),
            ));
        }
        Ok(boxes)
    }

    /// The explicit rate matrix; the zero matrix for one regime.
    pub fn rate_matrix(&self) -> Result<RateMatrix, ConfigError> {
        let m = self.sigma().len();
        let q = match &self.rates {
            Some(rows) => RateMatrix::from_rows(rows).map_err(|e| ConfigError::new("rates", e))?,
            None if m == 1 => RateMatrix::zero(1),
            None => return Err(ConfigError::new("rates", "missing field required by this subcommand")),
        };
        if q.m() != m {
            return Err(ConfigError::new("rates", format!("expected a {m}x{m} matrix")));
        }
        if let Err(v) = worstcase_core::validate_rate_matrix(&q) {
            let list: Vec<String> = v.iter().map(ToString::to_string).collect();
            return Err(ConfigError::new("rates", list.join("; ")));
        }
        Ok(q)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings::default()
    }
}

impl BoxesConfig {
    pub fn to_boxes(&self) -> Result<RateBoxes, ConfigError> {
        let convert = |list: &[[f64; 2]], name: &str| {
            list.iter()
                .enumerate()
                .map(|(i, p)| Interval::new(p[0], p[1]).map_err(|e| ConfigError::new(format!("boxes.{name}[{i}]"), e)))
                .collect::<Result<Vec<_>, _>>()
        };
        let plus = convert(&self.plus, "plus")?;
        let minus = convert(&self.minus, "minus")?;
        RateBoxes::new(plus, minus).map_err(|e| ConfigError::new("boxes", e))
    }
}

fn model_error_path(e: &worstcase_core::ModelError) -> String {
    use worstcase_core::ModelError as E;
    let path = match e {
        E::Sigma { regime, .. } => return format!("model.sigma[{regime}]"),
        E::NoRegimes => "model.sigma",
        E::Horizon(_) => "horizon",
        E::Alpha(_) => "alpha",
        E::InitialRegime { .. } => "y0",
        E::InitialLevel(_) => "x0",
        E::CevGamma(_) => "model.gamma",
        E::Diffusion(_) => "model",
        E::Payoff(_) => "payoff",
        _ => "",
    };
    path.to_string()
}
