//! Subcommand orchestration: every subcommand turns a [`Config`] into a
//! typed report, a list of named checks and CSV tables.

use serde::{Deserialize, Serialize};
use worstcase_core::exec::Executor;
use worstcase_core::game::{default_left_rules, default_right_strategies, saddle_check, SaddleConfig, SaddleReport};
use worstcase_core::mc::{
    evaluate_stopped, growth_bound, growth_constant, moment_bound_check, FeedbackRule, MomentReport, RateStrategy,
    Simulator, StoppingRule, StreamSeeds, FLOOR_WARNING_FRACTION,
};
use worstcase_core::oracle::{binomial_american_put, brute_force_min};
use worstcase_core::pde::{
    build_grid, extract_boundary, regime_order_violation, solve_constant_with, solve_worstcase_hjb_with,
    surface_sup_diff, Grid, InvariantReport, SolverSettings, ValueSurface,
};
use worstcase_core::stats::Estimate;
use worstcase_core::{
    extremal_matrix, sigma_monotonicity, Dynamics, Monotonicity, PayoffKind, ProblemSpec, RateBoxes, RateMatrix,
};

use crate::config::{Config, ConfigError};
use crate::output::{boundary_csv, fmt_float, matrix_csv, surface_csv, Cell, Table};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Price,
    Worstcase,
    Boundary,
    VerifyExtremal,
    Game,
    Moments,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Price,
        Subcommand::Worstcase,
        Subcommand::Boundary,
        Subcommand::VerifyExtremal,
        Subcommand::Game,
        Subcommand::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Price => "price",
            Subcommand::Worstcase => "worstcase",
            Subcommand::Boundary => "boundary",
            Subcommand::VerifyExtremal => "verify-extremal",
            Subcommand::Game => "game",
            Subcommand::Moments => "moments",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute { step: &'static str, message: String },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Compute { step, message } => write!(f, "{step} failed: {message}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn compute<T, E: std::fmt::Display>(step: &'static str, r: Result<T, E>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Compute { step, message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.to_string(), pass, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: u32,
    pub subcommand: String,
    pub config: Config,
    pub checks: Vec<CheckOutcome>,
    pub results: T,
}

/// Everything a subcommand produces, ready to be written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub subcommand: Subcommand,
    pub checks: Vec<CheckOutcome>,
    /// Pretty-printed [`Report`].
    pub json: String,
    /// `(file name, contents)`.
    pub csv: Vec<(String, String)>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn checks_csv(&self) -> String {
        let mut t = Table::new(&["check", "pass", "detail"]);
        for c in &self.checks {
            t.push(vec![Cell::S(c.name.clone()), Cell::B(c.pass), Cell::S(c.detail.clone())]);
        }
        t.to_csv()
    }
}

fn finish<T: Serialize>(
    sub: Subcommand,
    cfg: &Config,
    checks: Vec<CheckOutcome>,
    results: T,
    csv: Vec<(String, String)>,
) -> Artifacts {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        subcommand: sub.name().to_string(),
        config: cfg.clone(),
        checks: checks.clone(),
        results,
    };
    let json = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    Artifacts { subcommand: sub, checks, json, csv }
}

pub fn run<E: Executor>(exec: &E, sub: Subcommand, cfg: &Config) -> Result<Artifacts, RunError> {
    match sub {
        Subcommand::Price => price(cfg),
        Subcommand::Worstcase => worstcase(cfg),
        Subcommand::Boundary => boundary(cfg),
        Subcommand::VerifyExtremal => verify_extremal(exec, cfg),
        Subcommand::Game => game(exec, cfg),
        Subcommand::Moments => moments(exec, cfg),
    }
}

fn grid(cfg: &Config, problem: &ProblemSpec) -> Result<Grid, RunError> {
    compute("grid", build_grid(problem, cfg.grid.nx, cfg.grid.nt, cfg.grid.width_mult))
}

fn solve(problem: &ProblemSpec, q: &RateMatrix, g: &Grid, s: &SolverSettings) -> Result<ValueSurface, RunError> {
    compute("constant-rate solve", solve_constant_with(problem, q, g, s))
}

fn invariants_check(name: &str, reports: &[InvariantReport]) -> CheckOutcome {
    let pass = reports.iter().all(InvariantReport::all_ok);
    let min_excess = reports.iter().map(|r| r.min_excess).fold(f64::INFINITY, f64::min);
    let max_init = reports.iter().map(|r| r.max_initial_dev).fold(0.0, f64::max);
    let min_inc = reports.iter().map(|r| r.min_time_increment).fold(f64::INFINITY, f64::min);
    CheckOutcome::new(
        name,
        pass,
        format!(
            "{} surfaces: min(v-g) = {}, max|v(t=0)-g| = {}, min time increment = {}",
            reports.len(),
            fmt_float(min_excess),
            fmt_float(max_init),
            fmt_float(min_inc)
        ),
    )
}

fn regime_check(s: &ValueSurface, tol: f64) -> Option<(CheckOutcome, f64)> {
    let increasing = match sigma_monotonicity(&s.problem().sigma) {
        Monotonicity::Increasing => true,
        Monotonicity::Decreasing => false,
        _ => return None,
    };
    let worst = regime_order_violation(s, increasing);
    let order = if increasing { "v(x,y+1,t) >= v(x,y,t)" } else { "v(x,y,t) >= v(x,y+1,t)" };
    Some((
        CheckOutcome::new("regime-monotonicity", worst <= tol, format!("{order}: worst violation {} (tol {})", fmt_float(worst), fmt_float(tol))),
        worst,
    ))
}

fn prices_by_regime(s: &ValueSurface) -> Vec<f64> {
    (0..s.m()).map(|y| s.price(y)).collect()
}

fn price_table(prices: &[(&'static str, Vec<f64>)], x0: f64, horizon: f64) -> String {
    let mut header = vec!["regime", "x0", "horizon"];
    header.extend(prices.iter().map(|p| p.0));
    let mut t = Table::new(&header);
    for y in 0..prices[0].1.len() {
        let mut row = vec![Cell::I(y + 1), Cell::F(x0), Cell::F(horizon)];
        row.extend(prices.iter().map(|p| Cell::F(p.1[y])));
        t.push(row);
    }
    t.to_csv()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub steps: usize,
    pub price: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceResults {
    pub rates: Vec<Vec<f64>>,
    /// Value at `(x0, y, T)` for `y = 1..m`.
    pub prices: Vec<f64>,
    pub initial_price: f64,
    pub invariants: InvariantReport,
    pub binomial: Option<OracleComparison>,
}

fn price(cfg: &Config) -> Result<Artifacts, RunError> {
    let problem = cfg.problem()?;
    let q = cfg.rate_matrix()?;
    let g = grid(cfg, &problem)?;
    let s = solve(&problem, &q, &g, &cfg.solver_settings())?;
    let mut checks = Vec::new();
    let invariants = s.invariants();
    if cfg.checks.invariants {
        checks.push(invariants_check("surface-invariants", &[invariants]));
    }
    let mut binomial = None;
    if cfg.checks.binomial && problem.m() == 1 {
        if let (Dynamics::Gbm { mu }, PayoffKind::Put { strike }) = (&problem.dynamics, &problem.payoff.kind) {
            if *mu == problem.alpha {
                let steps = cfg.checks.binomial_steps;
                let tree = binomial_american_put(problem.x0, *strike, problem.alpha, problem.sigma[0], problem.horizon, steps);
                let rel = (s.initial_price() - tree) / tree;
                checks.push(CheckOutcome::new(
                    "oracle-equivalence",
                    rel.abs() <= cfg.checks.binomial_rel_tol,
                    format!(
                        "pde {} vs binomial({steps}) {}: relative difference {} (tol {})",
                        fmt_float(s.initial_price()),
                        fmt_float(tree),
                        fmt_float(rel),
                        fmt_float(cfg.checks.binomial_rel_tol)
                    ),
                ));
                binomial = Some(OracleComparison { steps, price: tree, rel_diff: rel });
            }
        }
    }
    let prices = prices_by_regime(&s);
    let csv = vec![
        ("price.csv".to_string(), price_table(&[("price", prices.clone())], problem.x0, problem.horizon)),
        ("surface.csv".to_string(), surface_csv(&s)),
    ];
    let results = PriceResults { rates: q.rows(), prices, initial_price: s.initial_price(), invariants, binomial };
    Ok(finish(Subcommand::Price, cfg, checks, results, csv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstcaseResults {
    pub monotonicity: Monotonicity,
    /// `None` for non-monotone volatility.
    pub extremal_matrix: Option<Vec<Vec<f64>>>,
    pub price_extremal: Option<Vec<f64>>,
    pub price_hjb: Vec<f64>,
    pub sup_diff: Option<f64>,
    pub tolerance: f64,
    pub rate_field_constant: bool,
    pub rate_field_mismatches: Option<usize>,
    pub regime_order_violation: Option<f64>,
    pub invariants: Vec<InvariantReport>,
}

fn worstcase(cfg: &Config) -> Result<Artifacts, RunError> {
    let problem = cfg.problem()?;
    let boxes = cfg.boxes()?;
    let settings = cfg.solver_settings();
    let g = grid(cfg, &problem)?;
    let mono = sigma_monotonicity(&problem.sigma);
    let (h, field) = compute("worst-case solve", solve_worstcase_hjb_with(&problem, &boxes, &g, &settings))?;
    let tolerance = 10.0 * settings.tol;
    let mut checks = Vec::new();
    let mut invariants = vec![h.invariants()];
    let mut csv = Vec::new();
    let mut results = WorstcaseResults {
        monotonicity: mono,
        extremal_matrix: None,
        price_extremal: None,
        price_hjb: prices_by_regime(&h),
        sup_diff: None,
        tolerance,
        rate_field_constant: field.is_constant(),
        rate_field_mismatches: None,
        regime_order_violation: None,
        invariants: Vec::new(),
    };
    if let Ok(q) = extremal_matrix(&boxes, mono) {
        let c = solve(&problem, &q, &g, &settings)?;
        let d = compute("surface comparison", surface_sup_diff(&c, &h))?;
        let mismatches = field.count_mismatches(&q);
        invariants.push(c.invariants());
        if cfg.checks.hjb_equality {
            checks.push(CheckOutcome::new(
                "hjb-equality",
                d <= tolerance,
                format!("sup|v_hjb - v_extremal| = {} (tol {})", fmt_float(d), fmt_float(tolerance)),
            ));
            checks.push(CheckOutcome::new(
                "rate-field-constant",
                field.is_constant() && mismatches == 0,
                format!("constant: {}, nodes differing from the extremal matrix: {mismatches}", field.is_constant()),
            ));
        }
        if cfg.checks.regime_monotonicity {
            if let Some((check, worst)) = regime_check(&c, cfg.checks.regime_tol) {
                checks.push(check);
                results.regime_order_violation = Some(worst);
            }
        }
        let ext = prices_by_regime(&c);
        csv.push(("worstcase.csv".to_string(), price_table(&[("price_extremal", ext.clone()), ("price_hjb", results.price_hjb.clone())], problem.x0, problem.horizon)));
        csv.push(("extremal_matrix.csv".to_string(), matrix_csv(&q)));
        results.extremal_matrix = Some(q.rows());
        results.price_extremal = Some(ext);
        results.sup_diff = Some(d);
        results.rate_field_mismatches = Some(mismatches);
    } else {
        csv.push(("worstcase.csv".to_string(), price_table(&[("price_hjb", results.price_hjb.clone())], problem.x0, problem.horizon)));
    }
    if cfg.checks.invariants {
        checks.push(invariants_check("surface-invariants", &invariants));
    }
    results.invariants = invariants;
    Ok(finish(Subcommand::Worstcase, cfg, checks, results, csv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResults {
    pub rates: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// `curves[y][n]`, `None` where no exercise region exists.
    pub curves: Vec<Vec<Option<f64>>>,
    /// Layers `n >= 2` where consecutive regimes are not strictly ordered.
    pub ordering_violations: Option<usize>,
}

/// The configured matrix if given, else the extremal matrix of the boxes.
fn boundary_matrix(cfg: &Config, problem: &ProblemSpec) -> Result<RateMatrix, RunError> {
    if cfg.rates.is_some() || problem.m() == 1 {
        return Ok(cfg.rate_matrix()?);
    }
    let boxes = cfg.boxes()?;
    extremal_matrix(&boxes, sigma_monotonicity(&problem.sigma))
        .map_err(|e| RunError::Config(ConfigError::new("rates", format!("{e}; give an explicit matrix"))))
}

fn boundary(cfg: &Config) -> Result<Artifacts, RunError> {
    let problem = cfg.problem()?;
    let q = boundary_matrix(cfg, &problem)?;
    let g = grid(cfg, &problem)?;
    let s = solve(&problem, &q, &g, &cfg.solver_settings())?;
    let b = compute("boundary extraction", extract_boundary(&s))?;
    let mut checks = Vec::new();
    if cfg.checks.invariants {
        checks.push(invariants_check("surface-invariants", &[s.invariants()]));
    }
    let mut ordering_violations = None;
    let mono = sigma_monotonicity(&problem.sigma);
    if cfg.checks.boundary_ordering && matches!(mono, Monotonicity::Increasing | Monotonicity::Decreasing) {
        let mut bad = 0;
        let mut first = None;
        for n in 2..g.nt() {
            for y in 0..problem.m() - 1 {
                let (lo, hi) = (b.at(y, n), b.at(y + 1, n));
                // low volatility exercises earlier: its boundary is higher
                let ok = if mono == Monotonicity::Increasing { lo > hi } else { hi > lo };
                if !ok {
                    bad += 1;
                    first.get_or_insert((n, y));
                }
            }
        }
        let detail = match first {
            None => format!("strict ordering on all {} layers with t >= 2 dt", g.nt() - 2),
            Some((n, y)) => format!("{bad} violations, first at t = {} between regimes {} and {}", fmt_float(g.t()[n]), y + 1, y + 2),
        };
        checks.push(CheckOutcome::new("boundary-ordering", bad == 0, detail));
        ordering_violations = Some(bad);
    }
    let curves = (0..b.m()).map(|y| b.curve(y).iter().map(|&v| (!v.is_nan()).then_some(v)).collect()).collect();
    let csv = vec![("boundary.csv".to_string(), boundary_csv(&b))];
    let results = BoundaryResults { rates: q.rows(), times: b.times().to_vec(), curves, ordering_violations };
    Ok(finish(Subcommand::Boundary, cfg, checks, results, csv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceEntry {
    pub source: String,
    pub rates: Vec<Vec<f64>>,
    pub price: f64,
    /// `max (v_extremal - v_q)` over all nodes.
    pub max_excess: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceSummary {
    pub per_box_samples: usize,
    pub evaluated: usize,
    pub argmin: Vec<Vec<f64>>,
    pub price: f64,
    pub matches_extremal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResults {
    pub monotonicity: Monotonicity,
    pub extremal_matrix: Vec<Vec<f64>>,
    pub extremal_price: f64,
    pub tolerance: f64,
    pub dominance: Vec<DominanceEntry>,
    pub brute_force: Option<BruteForceSummary>,
}

/// Nodewise comparison of the extremal surface against sampled and
/// endpoint matrices.
#[allow(clippy::too_many_arguments)]
pub fn dominance_sweep<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    boxes: &RateBoxes,
    lower: &ValueSurface,
    samples: usize,
    seed: u64,
    tol: f64,
    settings: &SolverSettings,
) -> Result<(Vec<DominanceEntry>, Vec<InvariantReport>), RunError> {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<(String, RateMatrix)> =
        (0..samples).map(|k| (format!("sampled-{}", k + 1), boxes.sample_matrix(&mut rng))).collect();
    for (k, q) in boxes.grid_matrices(2).into_iter().enumerate() {
        candidates.push((format!("endpoint-{}", k + 1), q));
    }
    let results = exec.map(candidates.len(), |k| {
        let s = solve_constant_with(problem, &candidates[k].1, lower.grid(), settings)?;
        let excess = lower.values().iter().zip(s.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        Ok::<_, worstcase_core::pde::PdeError>((s.initial_price(), excess, s.invariants()))
    });
    let mut entries = Vec::with_capacity(candidates.len());
    let mut invariants = Vec::with_capacity(candidates.len());
    for ((source, q), r) in candidates.into_iter().zip(results) {
        let (price, max_excess, inv) = compute("constant-rate solve", r)?;
        invariants.push(inv);
        entries.push(DominanceEntry { source, rates: q.rows(), price, max_excess, pass: max_excess <= tol });
    }
    Ok((entries, invariants))
}

fn verify_extremal<E: Executor>(exec: &E, cfg: &Config) -> Result<Artifacts, RunError> {
    let problem = cfg.problem()?;
    let boxes = cfg.boxes()?;
    let settings = cfg.solver_settings();
    let mono = sigma_monotonicity(&problem.sigma);
    let q = extremal_matrix(&boxes, mono).map_err(|e| RunError::Compute { step: "extremal matrix", message: e.to_string() })?;
    let g = grid(cfg, &problem)?;
    let lower = solve(&problem, &q, &g, &settings)?;
    let mut checks = Vec::new();
    let mut invariants = vec![lower.invariants()];
    let tol = cfg.checks.dominance_tol;
    let mut dominance = Vec::new();
    let mut csv = Vec::new();
    if cfg.checks.dominance {
        let (entries, inv) =
            dominance_sweep(exec, &problem, &boxes, &lower, cfg.checks.dominance_samples, cfg.checks.dominance_seed, tol, &settings)?;
        invariants.extend(inv);
        let worst = entries.iter().map(|e| e.max_excess).fold(f64::NEG_INFINITY, f64::max);
        let failed = entries.iter().filter(|e| !e.pass).count();
        checks.push(CheckOutcome::new(
            "extremal-dominance",
            failed == 0,
            format!("{} matrices, {failed} failing; worst max(v_extremal - v_q) = {} (tol {})", entries.len(), fmt_float(worst), fmt_float(tol)),
        ));
        let mut t = Table::new(&["source", "rates", "price", "max_excess", "pass"]);
        for e in &entries {
            let m = RateMatrix::from_rows(&e.rates).expect("square");
            t.push(vec![Cell::S(e.source.clone()), Cell::S(crate::output::matrix_cell(&m)), Cell::F(e.price), Cell::F(e.max_excess), Cell::B(e.pass)]);
        }
        csv.push(("dominance.csv".to_string(), t.to_csv()));
        dominance = entries;
    }
    let mut brute = None;
    if cfg.checks.brute_force {
        let k = cfg.checks.brute_force_samples;
        let r = compute("brute force", brute_force_min(exec, &problem, &boxes, &g, k, &settings))?;
        let matches = r.argmin == q;
        checks.push(CheckOutcome::new(
            "brute-force-argmin",
            matches,
            format!("{} matrices with {k} samples per box; argmin {} is {}the extremal matrix", r.evaluated.len(), crate::output::matrix_cell(&r.argmin), if matches { "" } else { "not " }),
        ));
        let mut t = Table::new(&["rates", "price", "argmin"]);
        for (m, p) in &r.evaluated {
            t.push(vec![Cell::S(crate::output::matrix_cell(m)), Cell::F(*p), Cell::B(*m == r.argmin)]);
        }
        csv.push(("brute_force.csv".to_string(), t.to_csv()));
        brute = Some(BruteForceSummary { per_box_samples: k, evaluated: r.evaluated.len(), argmin: r.argmin.rows(), price: r.price, matches_extremal: matches });
    }
    if cfg.checks.regime_monotonicity {
        if let Some((check, _)) = regime_check(&lower, cfg.checks.regime_tol) {
            checks.push(check);
        }
    }
    if cfg.checks.invariants {
        checks.push(invariants_check("surface-invariants", &invariants));
    }
    let results = VerifyResults {
        monotonicity: mono,
        extremal_matrix: q.rows(),
        extremal_price: lower.initial_price(),
        tolerance: tol,
        dominance,
        brute_force: brute,
    };
    Ok(finish(Subcommand::VerifyExtremal, cfg, checks, results, csv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundEntry {
    pub strategy: String,
    pub estimate: Estimate,
    /// `pde_value - 3 se - grid_bias`.
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundSummary {
    pub pde_value: f64,
    pub grid_bias: f64,
    pub entries: Vec<LowerBoundEntry>,
}

impl LowerBoundSummary {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// The extremal matrix, the opposite-extremal matrix, `n_random` uniformly
/// drawn constant matrices and two feedback strategies.
pub fn lower_bound_strategies(problem: &ProblemSpec, boxes: &RateBoxes, n_random: usize, seed: u64) -> Result<Vec<RateStrategy>, RunError> {
    let mono = sigma_monotonicity(&problem.sigma);
    let opposite = extremal_matrix(boxes, mono.opposite()).map_err(|e| RunError::Compute { step: "extremal matrix", message: e.to_string() })?;
    let mut out = vec![RateStrategy::Extremal { boxes: boxes.clone(), mono }, RateStrategy::Constant(opposite)];
    out.extend((0..n_random).map(|k| RateStrategy::RandomAdmissible { boxes: boxes.clone(), seed: StreamSeeds::derive(seed, 0x3000 + k as u64) }));
    out.push(RateStrategy::Feedback { boxes: boxes.clone(), rule: FeedbackRule::BelowLevel { pivot: problem.x0, mono } });
    out.push(RateStrategy::Feedback { boxes: boxes.clone(), rule: FeedbackRule::Drawdown { fraction: 0.9, mono } });
    Ok(out)
}

/// Prices every strategy under the extremal matrix's PDE boundary rule and
/// compares against the PDE value at 3 standard errors plus grid bias.
pub fn lower_bound_check<E: Executor>(
    exec: &E,
    problem: &ProblemSpec,
    boxes: &RateBoxes,
    strategies: &[RateStrategy],
    sc: &SaddleConfig,
) -> Result<LowerBoundSummary, RunError> {
    let mono = sigma_monotonicity(&problem.sigma);
    let q = extremal_matrix(boxes, mono).map_err(|e| RunError::Compute { step: "extremal matrix", message: e.to_string() })?;
    let g = compute("grid", build_grid(problem, sc.nx, sc.nt, sc.width_mult))?;
    let coarse = compute("grid", build_grid(problem, sc.nx / 2, sc.nt / 2, sc.width_mult))?;
    let s = solve(problem, &q, &g, &sc.settings)?;
    let pde_value = s.initial_price();
    let grid_bias = (pde_value - solve(problem, &q, &coarse, &sc.settings)?.initial_price()).abs();
    let rule = StoppingRule::Boundary(compute("boundary extraction", extract_boundary(&s))?);
    let mut entries = Vec::with_capacity(strategies.len());
    for (k, strategy) in strategies.iter().enumerate() {
        let estimate = compute(
            "simulation",
            evaluate_stopped(exec, problem, strategy, &rule, sc.n_paths, sc.dt, StreamSeeds::derive(sc.seed, 0x4000 + k as u64)),
        )?;
        let threshold = pde_value - 3.0 * estimate.std_error - grid_bias;
        entries.push(LowerBoundEntry { strategy: strategy.describe(), estimate, threshold, pass: estimate.mean >= threshold });
    }
    Ok(LowerBoundSummary { pde_value, grid_bias, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorSummary {
    pub n_paths: usize,
    pub floored_paths: usize,
    pub fraction: f64,
    pub warning: bool,
}

/// Paths of the extremal strategy that hit the CEV floor at least once.
pub fn floor_events<E: Executor>(exec: &E, problem: &ProblemSpec, strategy: &RateStrategy, n: usize, dt: f64, seed: u64) -> Result<FloorSummary, RunError> {
    let sim = compute("simulation", Simulator::new(problem, strategy, dt))?;
    let seeds = StreamSeeds::from_seed(seed);
    let hits = exec.map(n, |p| sim.run_path(&seeds, p as u64, |_, _| false));
    let floored_paths = hits.iter().filter(|&&h| h).count();
    let fraction = floored_paths as f64 / n as f64;
    Ok(FloorSummary { n_paths: n, floored_paths, fraction, warning: fraction > FLOOR_WARNING_FRACTION })
}

pub fn saddle_config(cfg: &Config) -> SaddleConfig {
    SaddleConfig {
        nx: cfg.grid.nx,
        nt: cfg.grid.nt,
        width_mult: cfg.grid.width_mult,
        settings: cfg.solver_settings(),
        n_paths: cfg.mc.n_paths,
        dt: cfg.mc.dt,
        seed: cfg.mc.seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResults {
    pub saddle: Option<SaddleReport>,
    pub lower_bound: Option<LowerBoundSummary>,
    pub floor: Option<FloorSummary>,
}

fn game<E: Executor>(exec: &E, cfg: &Config) -> Result<Artifacts, RunError> {
    let problem = cfg.problem()?;
    let boxes = cfg.boxes()?;
    let sc = saddle_config(cfg);
    let mono = sigma_monotonicity(&problem.sigma);
    if mono == Monotonicity::NonMonotone {
        return Err(RunError::Compute { step: "saddle check", message: "volatility is not monotone: no saddle candidate".into() });
    }
    let mut checks = Vec::new();
    let mut csv = Vec::new();
    let mut results = GameResults { saddle: None, lower_bound: None, floor: None };
    if cfg.checks.saddle {
        let left = compute("regression fit", default_left_rules(exec, &problem, &boxes, &sc))?;
        let right = compute("challengers", default_right_strategies(&problem, &boxes, sc.seed))?;
        let r = compute("saddle check", saddle_check(exec, &problem, &boxes, &left, &right, &sc))?;
        checks.push(CheckOutcome::new(
            "saddle-point",
            r.left_pass && r.right_pass,
            format!(
                "center {} +- {}; {} of {} stopping rules and {} of {} strategies within 3 sigma",
                fmt_float(r.center.mean),
                fmt_float(r.center.std_error),
                r.left.iter().filter(|c| c.pass).count(),
                r.left.len(),
                r.right.iter().filter(|c| c.pass).count(),
                r.right.len()
            ),
        ));
        checks.push(CheckOutcome::new(
            "saddle-value-consistency",
            r.pde_consistent,
            format!("center {} vs pde {} (grid bias {})", fmt_float(r.center.mean), fmt_float(r.pde_value), fmt_float(r.grid_bias)),
        ));
        let mut t = Table::new(&["side", "description", "estimate", "std_error", "margin", "tolerance", "pass"]);
        t.push(vec![Cell::S("center".into()), Cell::S(r.candidate.clone()), Cell::F(r.center.mean), Cell::F(r.center.std_error), Cell::F(0.0), Cell::F(0.0), Cell::B(r.pde_consistent)]);
        for (side, list) in [("left", &r.left), ("right", &r.right)] {
            for c in list {
                t.push(vec![Cell::S(side.into()), Cell::S(c.description.clone()), Cell::F(c.estimate.mean), Cell::F(c.estimate.std_error), Cell::F(c.margin), Cell::F(c.tolerance), Cell::B(c.pass)]);
            }
        }
        csv.push(("saddle.csv".to_string(), t.to_csv()));
        results.saddle = Some(r);
    }
    if cfg.checks.lower_bound {
        let strategies = lower_bound_strategies(&problem, &boxes, cfg.checks.lower_bound_random, sc.seed)?;
        let lb = lower_bound_check(exec, &problem, &boxes, &strategies, &sc)?;
        let failed = lb.entries.iter().filter(|e| !e.pass).count();
        checks.push(CheckOutcome::new(
            "lower-bound",
            failed == 0,
            format!("{} strategies, {failed} below pde {} - 3 se - grid bias {}", lb.entries.len(), fmt_float(lb.pde_value), fmt_float(lb.grid_bias)),
        ));
        let mut t = Table::new(&["strategy", "estimate", "std_error", "threshold", "pass"]);
        for e in &lb.entries {
            t.push(vec![Cell::S(e.strategy.clone()), Cell::F(e.estimate.mean), Cell::F(e.estimate.std_error), Cell::F(e.threshold), Cell::B(e.pass)]);
        }
        csv.push(("lower_bound.csv".to_string(), t.to_csv()));
        results.lower_bound = Some(lb);
    }
    if cfg.checks.floor_fraction && matches!(problem.dynamics, Dynamics::Cev { .. }) {
        let f = floor_events(exec, &problem, &RateStrategy::Extremal { boxes: boxes.clone(), mono }, sc.n_paths, sc.dt, StreamSeeds::derive(sc.seed, 0x5000))?;
        checks.push(CheckOutcome::new(
            "cev-floor-fraction",
            !f.warning,
            format!("{} of {} paths floored ({}; limit {})", f.floored_paths, f.n_paths, fmt_float(f.fraction), fmt_float(FLOOR_WARNING_FRACTION)),
        ));
        results.floor = Some(f);
    }
    Ok(finish(Subcommand::Game, cfg, checks, results, csv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsResults {
    pub formula: String,
    pub strategy: String,
    pub reports: Vec<MomentReport>,
}

fn moments_strategy(cfg: &Config, problem: &ProblemSpec) -> Result<RateStrategy, RunError> {
    if cfg.rates.is_some() || problem.m() == 1 {
        return Ok(RateStrategy::Constant(cfg.rate_matrix()?));
    }
    let boxes = cfg.boxes()?;
    Ok(match sigma_monotonicity(&problem.sigma) {
        Monotonicity::NonMonotone => RateStrategy::RandomAdmissible { boxes, seed: cfg.mc.seed },
        mono => RateStrategy::Extremal { boxes, mono },
    })
}

fn moments<E: Executor>(exec: &E, cfg: &Config) -> Result<Artifacts, RunError> {
    let problem = cfg.problem()?;
    if matches!(problem.dynamics, Dynamics::Cev { .. }) {
        return Err(RunError::Config(ConfigError::new("model.type", "the moment bound needs linear growth; CEV is not supported")));
    }
    let strategy = moments_strategy(cfg, &problem)?;
    let k = match cfg.checks.moment_k {
        Some(k) => k,
        None => compute("growth constant", growth_constant(&problem))?,
    };
    let t = cfg.checks.moment_t.unwrap_or(problem.horizon);
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    let mut table = Table::new(&["q", "k_growth", "t", "empirical", "std_error", "bound", "pass"]);
    for (i, &q) in cfg.checks.moment_exponents.iter().enumerate() {
        let r = compute(
            "moment check",
            moment_bound_check(exec, &problem, &strategy, k, q, t, cfg.mc.n_paths, cfg.mc.dt, StreamSeeds::derive(cfg.mc.seed, 0x6000 + i as u64)),
        )?;
        checks.push(CheckOutcome::new(
            "moment-bound",
            r.pass,
            format!("q = {}: E[sup|X|^q] = {} +- {} vs bound {}", fmt_float(q), fmt_float(r.empirical.mean), fmt_float(r.empirical.std_error), fmt_float(r.bound)),
        ));
        table.push(vec![Cell::F(q), Cell::F(k), Cell::F(t), Cell::F(r.empirical.mean), Cell::F(r.empirical.std_error), Cell::F(r.bound), Cell::B(r.pass)]);
        reports.push(r);
    }
    let formula = format!(
        "((1 + 4 x0^2) exp(8 K^2 t (4 + t)))^(q/2); x0 = 1, K = 1, t = 1, q = 2 gives {}",
        fmt_float(growth_bound(1.0, 1.0, 1.0, 2.0))
    );
    let results = MomentsResults { formula, strategy: strategy.describe(), reports };
    Ok(finish(Subcommand::Moments, cfg, checks, results, vec![("moments.csv".to_string(), table.to_csv())]))
}
