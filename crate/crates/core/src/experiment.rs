//! Seeded experiment harness: a JSON [`ExperimentConfig`] in, a CSV
//! [`Report`] out.
//!
//! Trial `k` of every cell uses seed `seed + k`. Trials run on a rayon pool
//! but rows are emitted in `(cell, trial, policy)` order, so the same
//! config always yields the same bytes. Numeric failures land in the
//! `error` column of their row instead of aborting the run.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    cost_grps, cost_prgs, forkjoin_expected_max, grps_expected_distance, heavy_traffic_distance,
    mm1_bulk, prgs_expected_distance, uncapacitated_distance, UnidirModel,
};
use crate::assign::opt_assign_instance;
use crate::distributions::{h2_from_cv2, DistributionSpec};
use crate::embed::{clustered_instance, match_via_embedding, EmbeddingConfig, PlanarInstance};
use crate::error::{Error, Result};
use crate::hetcap::{hetcap_solve, CapacityDist};
use crate::io::{assignment_records, read_instance, read_points, ASSIGNMENT_HEADER};
use crate::spatial::{
    allocate_gs, allocate_mtr, allocate_nn, allocate_ugs, covering_servers, generate_instance,
    AssignmentResult, CapacityLaw, SpatialInstance, WARM_UP,
};
use crate::VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Simulate,
    Compare,
    Analytic,
    Hetcap,
    Assign,
    Embed,
    Sweep,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Simulate => "simulate",
            ScenarioKind::Compare => "compare",
            ScenarioKind::Analytic => "analytic",
            ScenarioKind::Hetcap => "hetcap",
            ScenarioKind::Assign => "assign",
            ScenarioKind::Embed => "embed",
            ScenarioKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Mtr,
    Ugs,
    Nn,
    Gs,
    Opt,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Mtr => "mtr",
            Policy::Ugs => "ugs",
            Policy::Nn => "nn",
            Policy::Gs => "gs",
            Policy::Opt => "opt",
        }
    }

    fn unidirectional(&self) -> bool {
        matches!(self, Policy::Mtr | Policy::Ugs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticModel {
    /// Whatever closed form fits the laws and capacity.
    Auto,
    BulkMm1,
    Grps,
    Prgs,
    Hetcap,
    HeavyTraffic,
    Uncapacitated,
    Cost,
    Forkjoin,
}

impl AnalyticModel {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticModel::Auto => "auto",
            AnalyticModel::BulkMm1 => "bulk_mm1",
            AnalyticModel::Grps => "grps",
            AnalyticModel::Prgs => "prgs",
            AnalyticModel::Hetcap => "hetcap",
            AnalyticModel::HeavyTraffic => "heavy_traffic",
            AnalyticModel::Uncapacitated => "uncapacitated",
            AnalyticModel::Cost => "cost",
            AnalyticModel::Forkjoin => "forkjoin",
        }
    }
}

/// Server capacity: a plain integer or a [`CapacityLaw`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapacitySetting {
    Fixed(u32),
    Law(CapacityLaw),
}

impl CapacitySetting {
    pub fn law(&self) -> CapacityLaw {
        match self {
            CapacitySetting::Fixed(c) => CapacityLaw::Constant(*c),
            CapacitySetting::Law(l) => l.clone(),
        }
    }
}

impl Default for CapacitySetting {
    fn default() -> Self {
        CapacitySetting::Fixed(1)
    }
}

/// Grid swept over; an empty axis keeps the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    /// Scenario run in every cell (simulate, compare, analytic or hetcap).
    pub of: ScenarioKind,
    /// Load `λ E[X] / c`; the user law is rescaled to hit it.
    pub rho: Vec<f64>,
    /// Constant server capacity.
    pub c: Vec<u32>,
    /// Squared coefficient of variation of the server gap (0, 1/3, 1 or > 1).
    pub cv2: Vec<f64>,
    /// Cost exponent.
    pub beta: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { of: ScenarioKind::Compare, rho: Vec::new(), c: Vec::new(), cv2: Vec::new(), beta: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub user_law: Option<DistributionSpec>,
    #[serde(default)]
    pub server_law: Option<DistributionSpec>,
    #[serde(default)]
    pub capacity: CapacitySetting,
    /// Defaults: `[mtr]` for simulate, all five for compare, `[opt]` for assign.
    #[serde(default)]
    pub policies: Option<Vec<Policy>>,
    #[serde(default = "default_models")]
    pub models: Vec<AnalyticModel>,
    /// Defaults: 100000 on the line, 200 in the plane.
    #[serde(default)]
    pub n_users: Option<usize>,
    /// Defaults: enough servers to cover the users on the line, 2|R| in the plane.
    #[serde(default)]
    pub n_servers: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    /// Input CSV for assign (line instance) or embed (planar points).
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    /// Side of the box servers are scattered in around a random user.
    #[serde(default = "default_box")]
    pub box_side: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_models() -> Vec<AnalyticModel> {
    vec![AnalyticModel::Auto]
}
fn default_trials() -> usize {
    50
}
fn default_t0() -> f64 {
    1.0
}
fn default_box() -> f64 {
    0.1
}

const LINE_USERS: usize = 100_000;
const PLANE_USERS: usize = 200;

impl ExperimentConfig {
    /// Minimal config of the given kind; every other field at its default.
    pub fn new(scenario: ScenarioKind) -> Self {
        serde_json::from_value(serde_json::json!({ "scenario": scenario })).expect("default config")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("config {}: {e}", path.display())]))?;
        Self::from_json(&text)
    }

    pub fn policies(&self) -> Vec<Policy> {
        if let Some(p) = &self.policies {
            return p.clone();
        }
        match self.effective_kind() {
            ScenarioKind::Compare => vec![Policy::Mtr, Policy::Ugs, Policy::Nn, Policy::Gs, Policy::Opt],
            ScenarioKind::Assign => vec![Policy::Opt],
            _ => vec![Policy::Mtr],
        }
    }

    /// Kind executed per cell (the swept kind for sweeps).
    pub fn effective_kind(&self) -> ScenarioKind {
        match (&self.scenario, &self.sweep) {
            (ScenarioKind::Sweep, Some(g)) => g.of,
            (ScenarioKind::Sweep, None) => ScenarioKind::Compare,
            (k, _) => *k,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users.unwrap_or(if self.scenario == ScenarioKind::Embed { PLANE_USERS } else { LINE_USERS })
    }

    /// Checks every field the scenario needs; all problems are reported at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let kind = self.effective_kind();
        if self.trials == 0 {
            errs.push("trials: must be at least 1".to_string());
        }
        if self.n_users == Some(0) {
            errs.push("n_users: must be at least 1".to_string());
        }
        if self.workers == Some(0) {
            errs.push("workers: must be at least 1".to_string());
        }
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            errs.push("t0: must be positive".to_string());
        }
        if let Some(b) = self.beta {
            if !(b.is_finite() && b >= 0.0) {
                errs.push("beta: must be nonnegative".to_string());
            }
        }
        if let CapacitySetting::Law(l) = &self.capacity {
            if let Err(e) = l.validate() {
                errs.push(format!("capacity: {e}"));
            }
        } else if self.capacity == CapacitySetting::Fixed(0) {
            errs.push("capacity: must be at least 1".to_string());
        }
        if self.scenario == ScenarioKind::Sweep {
            match &self.sweep {
                None => errs.push("sweep: grid required for a sweep".to_string()),
                Some(g) => {
                    if !matches!(g.of, ScenarioKind::Simulate | ScenarioKind::Compare | ScenarioKind::Analytic | ScenarioKind::Hetcap) {
                        errs.push(format!("sweep.of: cannot sweep {}", g.of.name()));
                    }
                    if g.rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
                        errs.push("sweep.rho: loads must lie in (0, 1)".to_string());
                    }
                    if g.c.contains(&0) {
                        errs.push("sweep.c: capacities must be at least 1".to_string());
                    }
                    if g.cv2.iter().any(|&v| law_for_cv2(v, 1.0).is_err()) {
                        errs.push("sweep.cv2: supported values are 0, 1/3, 1 and anything above 1".to_string());
                    }
                    if g.beta.iter().any(|&b| !(b.is_finite() && b >= 0.0)) {
                        errs.push("sweep.beta: exponents must be nonnegative".to_string());
                    }
                }
            }
        } else if self.sweep.is_some() {
            errs.push("sweep: only allowed when scenario is sweep".to_string());
        }
        let needs_laws = matches!(
            kind,
            ScenarioKind::Simulate | ScenarioKind::Compare | ScenarioKind::Analytic | ScenarioKind::Hetcap
        ) || (kind == ScenarioKind::Assign && self.instance.is_none());
        if needs_laws {
            if self.user_law.is_none() {
                errs.push("user_law: required".to_string());
            }
            if self.server_law.is_none() {
                errs.push("server_law: required".to_string());
            }
        }
        if matches!(kind, ScenarioKind::Simulate | ScenarioKind::Compare | ScenarioKind::Assign)
            && self.policies.as_ref().is_some_and(|p| p.is_empty())
        {
            errs.push("policies: at least one policy required".to_string());
        }
        if kind == ScenarioKind::Hetcap {
            if let Some(u) = &self.user_law {
                if !matches!(u, DistributionSpec::Exponential { .. }) {
                    errs.push("user_law: heterogeneous capacity needs exponential (Poisson) users".to_string());
                }
            }
        }
        if kind == ScenarioKind::Embed && self.instance.is_none() {
            let nr = self.n_users();
            if self.n_servers.is_some_and(|s| s < nr) {
                errs.push("n_servers: need at least as many servers as users".to_string());
            }
            if !(self.box_side.is_finite() && self.box_side >= 0.0) {
                errs.push("box_side: must be finite and nonnegative".to_string());
            }
        }
        // stability of every cell that will simulate or solve a queue
        if errs.is_empty() && needs_laws && kind != ScenarioKind::Assign {
            for (idx, cell) in self.cells().iter().enumerate() {
                match cell {
                    Ok(cell) if cell.rho >= 1.0 => errs.push(format!(
                        "cell {idx}: load {:.4} is not below 1 (user_law, server_law, capacity)",
                        cell.rho
                    )),
                    Err(e) => errs.push(format!("cell {idx}: {e}")),
                    _ => {}
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Resolved parameter sets, one per sweep cell (one cell without a sweep).
    pub fn cells(&self) -> Vec<Result<Cell>> {
        let grid = self.sweep.clone().unwrap_or_default();
        let axis = |v: &Vec<f64>| -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().map(|&x| Some(x)).collect()
            }
        };
        let cs: Vec<Option<u32>> = if grid.c.is_empty() { vec![None] } else { grid.c.iter().map(|&c| Some(c)).collect() };
        let mut out = Vec::new();
        for &rho in &axis(&grid.rho) {
            for &c in &cs {
                for &cv2 in &axis(&grid.cv2) {
                    for &beta in &axis(&grid.beta) {
                        out.push(self.cell(rho, c, cv2, beta.or(self.beta)));
                    }
                }
            }
        }
        out
    }

    fn cell(&self, rho: Option<f64>, c: Option<u32>, cv2: Option<f64>, beta: Option<f64>) -> Result<Cell> {
        let missing = || Error::Config(vec!["user_law and server_law are required".into()]);
        let mut server_law = self.server_law.ok_or_else(missing)?;
        let mut user_law = self.user_law.ok_or_else(missing)?;
        let capacity = match c {
            Some(c) => CapacityLaw::Constant(c),
            None => self.capacity.law(),
        };
        if let Some(v) = cv2 {
            server_law = law_for_cv2(v, server_law.mean())?;
        }
        if let Some(r) = rho {
            user_law = user_law.with_mean(server_law.mean() / (capacity.mean() * r))?;
        }
        let load = server_law.mean() / (user_law.mean() * capacity.mean());
        let n_users = self.n_users();
        let n_servers = self.n_servers.unwrap_or_else(|| covering_servers(&user_law, &server_law, n_users));
        Ok(Cell { user_law, server_law, capacity, rho: load, cv2: server_law.squared_cv(), beta, t0: self.t0, n_users, n_servers })
    }
}

/// Server law with the given squared coefficient of variation and mean.
pub fn law_for_cv2(cv2: f64, mean: f64) -> Result<DistributionSpec> {
    if cv2 == 0.0 {
        DistributionSpec::deterministic(mean)
    } else if (cv2 - 1.0 / 3.0).abs() < 1e-12 {
        DistributionSpec::uniform(2.0 * mean)
    } else if cv2 == 1.0 {
        DistributionSpec::exponential(1.0 / mean)
    } else if cv2 > 1.0 {
        h2_from_cv2(cv2, mean)
    } else {
        Err(crate::error::invalid(format!("no server law with squared CV {cv2}")))
    }
}

/// Fully resolved parameters of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub user_law: DistributionSpec,
    pub server_law: DistributionSpec,
    pub capacity: CapacityLaw,
    /// `λ E[X] / E[C]`.
    pub rho: f64,
    pub cv2: f64,
    pub beta: Option<f64>,
    pub t0: f64,
    pub n_users: usize,
    pub n_servers: usize,
}

impl Cell {
    fn lambda(&self) -> f64 {
        1.0 / self.user_law.mean()
    }

    fn mu(&self) -> f64 {
        1.0 / self.server_law.mean()
    }

    fn constant_capacity(&self) -> Option<u32> {
        match &self.capacity {
            CapacityLaw::Constant(c) => Some(*c),
            _ => None,
        }
    }

    fn capacity_dist(&self) -> Result<CapacityDist> {
        match &self.capacity {
            CapacityLaw::Constant(c) => CapacityDist::degenerate(*c as usize),
            CapacityLaw::UniformRange { lo, hi } => CapacityDist::uniform(*lo as usize, *hi as usize),
            CapacityLaw::Discrete(p) => CapacityDist::new(p.clone()),
        }
    }

    fn capacity_label(&self) -> String {
        match &self.capacity {
            CapacityLaw::Constant(c) => c.to_string(),
            CapacityLaw::UniformRange { lo, hi } => format!("uniform{{{lo}..{hi}}}"),
            CapacityLaw::Discrete(p) => format!("discrete{p:?}"),
        }
    }
}

fn law_label(law: &DistributionSpec) -> String {
    serde_json::to_string(law).unwrap_or_else(|_| law.name().to_string())
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Closed-form value a cell's unidirectional simulation should match:
/// cost when `β` is set, otherwise the expected distance.
pub fn analytic_reference(cell: &Cell, prefer_hetcap: bool) -> (String, Result<f64>) {
    let poisson_users = matches!(cell.user_law, DistributionSpec::Exponential { .. });
    let poisson_servers = matches!(cell.server_law, DistributionSpec::Exponential { .. });
    let lambda = cell.lambda();
    let mu = cell.mu();
    if let Some(beta) = cell.beta {
        if cell.constant_capacity() != Some(1) {
            return ("none".into(), Err(crate::error::invalid("cost forms need unit capacity")));
        }
        if poisson_users && beta.fract() == 0.0 {
            return ("cost_prgs".into(), cost_prgs(lambda, &cell.server_law, beta as u32, cell.t0).map(|c| c.expected_cost));
        }
        if poisson_servers {
            return ("cost_grps".into(), cost_grps(&cell.user_law, mu, beta, cell.t0).map(|c| c.expected_cost));
        }
        return ("none".into(), Err(crate::error::invalid("no cost form for these laws")));
    }
    match cell.constant_capacity() {
        Some(c) if !(prefer_hetcap && poisson_users) => {
            if poisson_users {
                ("prgs".into(), prgs_expected_distance(lambda, &cell.server_law, c as usize).map(|s| s.expected_distance))
            } else if poisson_servers {
                ("grps".into(), grps_expected_distance(&cell.user_law, mu, c).map(|g| g.expected_distance))
            } else if c == 1 {
                ("heavy_traffic".into(), heavy_traffic_distance(&cell.user_law, &cell.server_law))
            } else {
                ("none".into(), Err(crate::error::invalid("no closed form for these laws")))
            }
        }
        _ if poisson_users => (
            "hetcap".into(),
            cell.capacity_dist()
                .and_then(|cap| hetcap_solve(lambda, &cell.server_law, &cap))
                .map(|s| s.expected_distance),
        ),
        _ => ("none".into(), Err(crate::error::invalid("heterogeneous capacity needs Poisson users"))),
    }
}

/// CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell `name` of every row.
    pub fn get<'a>(&'a self, row: &'a [String], name: &str) -> Option<&'a str> {
        self.column(name).map(|c| row[c].as_str())
    }

    /// Numeric values of a column for rows matching `filter` (blank cells skipped).
    pub fn values(&self, name: &str, filter: impl Fn(&[String]) -> bool) -> Vec<f64> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter(|r| filter(r))
            .filter_map(|r| r[c].parse().ok())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| crate::error::invalid(e.to_string()))
    }
}

pub const POLICY_HEADER: &[&str] = &[
    "version", "scenario", "cell", "policy", "user_law", "server_law", "capacity", "lambda", "mu", "rho", "cv2",
    "beta", "t0", "n_users", "n_servers", "trial", "seed", "matched", "mean", "variance", "cost",
    "analytic_model", "analytic", "error",
];

pub const ANALYTIC_HEADER: &[&str] = &[
    "version", "scenario", "cell", "model", "user_law", "server_law", "capacity", "lambda", "mu", "rho", "beta",
    "t0", "expected_distance", "expected_cost", "diagnostics", "error",
];

pub const EMBED_HEADER: &[&str] = &[
    "version", "scenario", "trial", "seed", "n_users", "n_servers", "box_side", "opt_mean", "embed_mean", "ratio",
    "error",
];

/// Runs the configured scenario.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    with_pool(config.workers, || match config.scenario {
        ScenarioKind::Simulate => policy_rows(config, false, false),
        ScenarioKind::Compare => policy_rows(config, true, false),
        ScenarioKind::Hetcap => policy_rows(config, false, true),
        ScenarioKind::Analytic => analytic_rows(config),
        ScenarioKind::Sweep => sweep_inner(config),
        ScenarioKind::Assign => assign_report(config),
        ScenarioKind::Embed => embed_report(config),
    })
}

/// Runs MTR, then every other listed policy on the MTR-matched users only,
/// so that bidirectional policies face exactly the users MTR could serve.
pub fn compare_policies(config: &ExperimentConfig) -> Result<Report> {
    let mut cfg = config.clone();
    cfg.scenario = ScenarioKind::Compare;
    cfg.sweep = None;
    cfg.validate()?;
    with_pool(cfg.workers, || policy_rows(&cfg, true, false))
}

/// Runs the scenario named by `sweep.of` in every cell of the grid.
pub fn sweep(config: &ExperimentConfig) -> Result<Report> {
    let mut cfg = config.clone();
    cfg.scenario = ScenarioKind::Sweep;
    cfg.validate()?;
    with_pool(cfg.workers, || sweep_inner(&cfg))
}

fn sweep_inner(config: &ExperimentConfig) -> Result<Report> {
    match config.effective_kind() {
        ScenarioKind::Simulate => policy_rows(config, false, false),
        ScenarioKind::Hetcap => policy_rows(config, false, true),
        ScenarioKind::Analytic => analytic_rows(config),
        _ => policy_rows(config, true, false),
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(vec![format!("workers: {e}")]))?
            .install(f),
        None => f(),
    }
}

struct PolicyOutcome {
    matched: usize,
    mean: f64,
    variance: f64,
    cost: Option<f64>,
}

fn outcome(distances: &[f64], cell: &Cell) -> Result<PolicyOutcome> {
    let skip = (distances.len() as f64 * WARM_UP).floor() as usize;
    let kept = &distances[skip..];
    let stats = crate::spatial::distance_stats(kept)?;
    let cost = cell
        .beta
        .map(|b| cell.t0 * kept.iter().map(|d| d.powf(b)).sum::<f64>() / kept.len() as f64);
    Ok(PolicyOutcome { matched: distances.len(), mean: stats.mean, variance: stats.variance, cost })
}

fn run_policy(policy: Policy, instance: &SpatialInstance) -> Result<Vec<f64>> {
    let r: AssignmentResult = match policy {
        Policy::Mtr => allocate_mtr(instance).0,
        Policy::Ugs => allocate_ugs(instance).0,
        Policy::Nn => allocate_nn(instance),
        Policy::Gs => allocate_gs(instance),
        Policy::Opt => {
            let o = opt_assign_instance(instance)?;
            let users = instance.users();
            let servers = instance.servers();
            return Ok(o.assignment.iter().enumerate().map(|(i, &j)| (users[i] - servers[j]).abs()).collect());
        }
    };
    Ok(r.distances)
}

fn trial_outcomes(cell: &Cell, policies: &[Policy], compare: bool, seed: u64) -> Result<Vec<Result<PolicyOutcome>>> {
    let inst = generate_instance(&cell.user_law, &cell.server_law, cell.n_users, cell.n_servers, &cell.capacity, seed)?;
    if !compare {
        return Ok(policies.iter().map(|&p| run_policy(p, &inst).and_then(|d| outcome(&d, cell))).collect());
    }
    let (mtr, _) = allocate_mtr(&inst);
    let restricted = inst.with_users(&mtr.matched_users());
    Ok(policies
        .iter()
        .map(|&p| {
            let d = if p == Policy::Mtr { Ok(mtr.distances.clone()) } else { run_policy(p, &restricted) };
            d.and_then(|d| outcome(&d, cell))
        })
        .collect())
}

fn policy_rows(config: &ExperimentConfig, compare: bool, prefer_hetcap: bool) -> Result<Report> {
    let policies = if prefer_hetcap { vec![Policy::Mtr] } else { config.policies() };
    let scenario = config.scenario.name();
    let cells: Vec<Cell> = config.cells().into_iter().collect::<Result<_>>()?;
    let references: Vec<(String, Result<f64>)> =
        cells.par_iter().map(|c| analytic_reference(c, prefer_hetcap)).collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    let results: Vec<Result<Vec<Result<PolicyOutcome>>>> = jobs
        .par_iter()
        .map(|&(c, t)| trial_outcomes(&cells[c], &policies, compare, config.seed + t as u64))
        .collect();

    let mut report = Report::new(POLICY_HEADER);
    for (&(c, t), res) in jobs.iter().zip(results) {
        let cell = &cells[c];
        let seed = config.seed + t as u64;
        let per_policy: Vec<Result<PolicyOutcome>> = match res {
            Ok(v) => v,
            Err(e) => {
                let msg = e.to_string();
                policies.iter().map(|_| Err(Error::Numeric(msg.clone()))).collect()
            }
        };
        for (p, out) in policies.iter().zip(per_policy) {
            let (model, analytic, analytic_err) = if p.unidirectional() {
                match &references[c] {
                    (m, Ok(v)) => (m.clone(), fmt(*v), None),
                    (m, Err(e)) => (m.clone(), String::new(), Some(e.to_string())),
                }
            } else {
                (String::new(), String::new(), None)
            };
            let (matched, mean, variance, cost, err) = match out {
                Ok(o) => (o.matched.to_string(), fmt(o.mean), fmt(o.variance), fmt_opt(o.cost), None),
                Err(e) => (String::new(), String::new(), String::new(), String::new(), Some(e.to_string())),
            };
            let error = match (err, analytic_err) {
                (Some(e), _) => e,
                (None, Some(a)) if model != "none" => format!("analytic: {a}"),
                _ => String::new(),
            };
            report.rows.push(vec![
                VERSION.to_string(),
                scenario.to_string(),
                c.to_string(),
                p.name().to_string(),
                law_label(&cell.user_law),
                law_label(&cell.server_law),
                cell.capacity_label(),
                fmt(cell.lambda()),
                fmt(cell.mu()),
                fmt(cell.rho),
                fmt(cell.cv2),
                fmt_opt(cell.beta),
                fmt(cell.t0),
                cell.n_users.to_string(),
                cell.n_servers.to_string(),
                t.to_string(),
                seed.to_string(),
                matched,
                mean,
                variance,
                cost,
                model,
                analytic,
                error,
            ]);
        }
    }
    Ok(report)
}

fn analytic_value(model: AnalyticModel, cell: &Cell) -> (String, Result<(Option<f64>, Option<f64>, String)>) {
    let lambda = cell.lambda();
    let mu = cell.mu();
    let poisson_users = matches!(cell.user_law, DistributionSpec::Exponential { .. });
    let poisson_servers = matches!(cell.server_law, DistributionSpec::Exponential { .. });
    let need = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(crate::error::invalid(what.to_string()))
        }
    };
    let constant = || {
        cell.constant_capacity()
            .ok_or_else(|| crate::error::invalid("model needs a constant capacity"))
    };
    let name = model.name().to_string();
    let res = (|| -> Result<(Option<f64>, Option<f64>, String)> {
        match model {
            AnalyticModel::Auto => {
                let (m, v) = analytic_reference(cell, false);
                let v = v?;
                Ok(if cell.beta.is_some() { (None, Some(v), format!("model={m}")) } else { (Some(v), None, format!("model={m}")) })
            }
            AnalyticModel::BulkMm1 => {
                need(poisson_users && poisson_servers, "bulk M/M/1 needs exponential users and servers")?;
                let r = mm1_bulk(lambda, mu, constant()?)?;
                Ok((Some(r.expected_distance), None, format!("r0={}", r.r0)))
            }
            AnalyticModel::Grps => {
                need(poisson_servers, "GRPS needs exponential servers")?;
                let r = grps_expected_distance(&cell.user_law, mu, constant()?)?;
                Ok((Some(r.expected_distance), None, format!("r0={};mean_queue={}", r.r0, r.mean_queue)))
            }
            AnalyticModel::Prgs => {
                need(poisson_users, "PRGS needs exponential users")?;
                let s = prgs_expected_distance(lambda, &cell.server_law, constant()? as usize)?;
                Ok((
                    Some(s.expected_distance),
                    None,
                    format!("zeros={};normalization={};mean_queue={}", s.zeros.len(), s.normalization(), s.mean_queue),
                ))
            }
            AnalyticModel::Hetcap => {
                need(poisson_users, "heterogeneous capacity needs exponential users")?;
                let s = hetcap_solve(lambda, &cell.server_law, &cell.capacity_dist()?)?;
                Ok((Some(s.expected_distance), None, format!("zeros={};h_bar={};condition={:e}", s.zeros.len(), s.h_bar, s.condition)))
            }
            AnalyticModel::HeavyTraffic => Ok((Some(heavy_traffic_distance(&cell.user_law, &cell.server_law)?), None, String::new())),
            AnalyticModel::Uncapacitated => {
                let m = if poisson_users {
                    UnidirModel::Prgs
                } else if poisson_servers {
                    UnidirModel::Grps
                } else {
                    return Err(crate::error::invalid("uncapacitated limit needs Poisson users or servers"));
                };
                Ok((Some(uncapacitated_distance(m, &cell.server_law)), None, format!("model={m:?}").to_lowercase()))
            }
            AnalyticModel::Cost => {
                let beta = cell.beta.ok_or_else(|| crate::error::invalid("cost needs beta"))?;
                need(cell.constant_capacity() == Some(1), "cost forms need unit capacity")?;
                if poisson_users && beta.fract() == 0.0 {
                    Ok((None, Some(cost_prgs(lambda, &cell.server_law, beta as u32, cell.t0)?.expected_cost), "model=prgs".into()))
                } else if poisson_servers {
                    Ok((None, Some(cost_grps(&cell.user_law, mu, beta, cell.t0)?.expected_cost), "model=grps".into()))
                } else {
                    Err(crate::error::invalid("no cost form for these laws"))
                }
            }
            AnalyticModel::Forkjoin => {
                need(poisson_users && poisson_servers, "fork-join needs exponential users and servers")?;
                Ok((Some(forkjoin_expected_max(lambda, mu)?), None, String::new()))
            }
        }
    })();
    (name, res)
}

fn analytic_rows(config: &ExperimentConfig) -> Result<Report> {
    let cells: Vec<Cell> = config.cells().into_iter().collect::<Result<_>>()?;
    let jobs: Vec<(usize, AnalyticModel)> = (0..cells.len())
        .flat_map(|c| config.models.iter().map(move |&m| (c, m)))
        .collect();
    let values: Vec<_> = jobs.par_iter().map(|&(c, m)| analytic_value(m, &cells[c])).collect();
    let mut report = Report::new(ANALYTIC_HEADER);
    for (&(c, _), (name, res)) in jobs.iter().zip(values) {
        let cell = &cells[c];
        let (d, cost, diag, err) = match res {
            Ok((d, cost, diag)) => (fmt_opt(d), fmt_opt(cost), diag, String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.to_string()),
        };
        report.rows.push(vec![
            VERSION.to_string(),
            config.scenario.name().to_string(),
            c.to_string(),
            name,
            law_label(&cell.user_law),
            law_label(&cell.server_law),
            cell.capacity_label(),
            fmt(cell.lambda()),
            fmt(cell.mu()),
            fmt(cell.rho),
            fmt_opt(cell.beta),
            fmt(cell.t0),
            d,
            cost,
            diag,
            err,
        ]);
    }
    Ok(report)
}

/// Line instance for the assign scenario: read from `instance` or drawn
/// from the laws with `seed`.
pub fn assign_instance(config: &ExperimentConfig) -> Result<SpatialInstance> {
    let cap = match &config.capacity {
        CapacitySetting::Fixed(c) => *c,
        CapacitySetting::Law(_) => 1,
    };
    match &config.instance {
        Some(path) => read_instance(std::fs::File::open(path)?, cap),
        None => {
            let cell = config.cell(None, None, None, None)?;
            generate_instance(&cell.user_law, &cell.server_law, cell.n_users, cell.n_servers, &cell.capacity, config.seed)
        }
    }
}

fn assign_report(config: &ExperimentConfig) -> Result<Report> {
    let inst = assign_instance(config)?;
    let policy = config.policies()[0];
    let (assignment, distances): (Vec<Option<usize>>, Vec<Option<f64>>) = match policy {
        Policy::Opt => {
            let o = opt_assign_instance(&inst)?;
            let d = o.assignment.iter().enumerate().map(|(i, &j)| Some((inst.users()[i] - inst.servers()[j]).abs())).collect();
            (o.assignment.into_iter().map(Some).collect(), d)
        }
        p => {
            let r = match p {
                Policy::Mtr => allocate_mtr(&inst).0,
                Policy::Ugs => allocate_ugs(&inst).0,
                Policy::Nn => allocate_nn(&inst),
                _ => allocate_gs(&inst),
            };
            let d = r
                .assignment
                .iter()
                .enumerate()
                .map(|(i, s)| s.map(|j| (inst.users()[i] - inst.servers()[j]).abs()))
                .collect();
            (r.assignment, d)
        }
    };
    let mut report = Report::new(&ASSIGNMENT_HEADER);
    report.rows = assignment_records(&assignment, &distances)?.into_iter().map(|r| r.to_vec()).collect();
    Ok(report)
}

/// Planar instance for trial `t` of the embed scenario.
pub fn embed_instance(config: &ExperimentConfig, trial: usize) -> Result<PlanarInstance> {
    match &config.instance {
        Some(path) => read_points(std::fs::File::open(path)?),
        None => {
            let nr = config.n_users();
            clustered_instance(nr, config.n_servers.unwrap_or(2 * nr), config.box_side, config.seed + trial as u64)
        }
    }
}

fn embed_report(config: &ExperimentConfig) -> Result<Report> {
    let trials = if config.instance.is_some() { 1 } else { config.trials };
    let results: Vec<(PlanarInstance, Result<_>)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let inst = embed_instance(config, t)?;
            let m = match_via_embedding(&inst, &config.embedding);
            Ok((inst, m))
        })
        .collect::<Result<_>>()?;
    let mut report = Report::new(EMBED_HEADER);
    for (t, (inst, m)) in results.into_iter().enumerate() {
        let (opt, emb, ratio, err) = match m {
            Ok(m) => (fmt(m.opt_mean), fmt(m.embed_mean), fmt(m.ratio), String::new()),
            Err(e) => (String::new(), String::new(), String::new(), e.to_string()),
        };
        let seed = if config.instance.is_some() { String::new() } else { (config.seed + t as u64).to_string() };
        report.rows.push(vec![
            VERSION.to_string(),
            config.scenario.name().to_string(),
            t.to_string(),
            seed,
            inst.users().len().to_string(),
            inst.servers().len().to_string(),
            if config.instance.is_some() { String::new() } else { fmt(config.box_side) },
            opt,
            emb,
            ratio,
            err,
        ]);
    }
    Ok(report)
}

/// Embedding assignment for one planar instance: the per-user assignment
/// table (plane distances) and a one-row `opt_mean,embed_mean,ratio` summary.
pub fn embed_assignment(instance: &PlanarInstance, config: &EmbeddingConfig) -> Result<(Report, Report)> {
    let m = match_via_embedding(instance, config)?;
    let servers = instance.servers();
    let assignment: Vec<Option<usize>> = m.embedded.assignment.iter().map(|&j| Some(j)).collect();
    let distances: Vec<Option<f64>> = m
        .embedded
        .assignment
        .iter()
        .zip(instance.users())
        .map(|(&j, u)| Some((u[0] - servers[j][0]).hypot(u[1] - servers[j][1])))
        .collect();
    let mut table = Report::new(&ASSIGNMENT_HEADER);
    table.rows = assignment_records(&assignment, &distances)?.into_iter().map(|r| r.to_vec()).collect();
    let mut summary = Report::new(&["version", "opt_mean", "embed_mean", "ratio"]);
    summary.rows.push(vec![VERSION.to_string(), fmt(m.opt_mean), fmt(m.embed_mean), fmt(m.ratio)]);
    Ok((table, summary))
}

/// Grand mean of `column` per `(cell, policy)`, in first-seen order.
pub fn grand_means(report: &Report, column: &str) -> Vec<(usize, String, f64)> {
    let (Some(ci), Some(pi), Some(vi)) = (report.column("cell"), report.column("policy"), report.column(column)) else {
        return Vec::new();
    };
    let mut keys: Vec<(usize, String)> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for r in &report.rows {
        let Ok(v) = r[vi].parse::<f64>() else { continue };
        let key = (r[ci].parse().unwrap_or(0), r[pi].clone());
        match keys.iter().position(|k| *k == key) {
            Some(i) => {
                sums[i].0 += v;
                sums[i].1 += 1;
            }
            None => {
                keys.push(key);
                sums.push((v, 1));
            }
        }
    }
    keys.into_iter().zip(sums).map(|((c, p), (s, n))| (c, p, s / n as f64)).collect()
}

/// Built-in configurations, by name.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let v = match name {
        "bulk-mm1" => serde_json::json!({
            "scenario": "simulate",
            "user_law": {"kind": "exponential", "rate": 0.5},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "capacity": 1, "policies": ["mtr"], "trials": 50
        }),
        "load-sensitivity" => serde_json::json!({
            "scenario": "sweep",
            "user_law": {"kind": "exponential", "rate": 1.0},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "capacity": 2, "policies": ["mtr"], "trials": 10, "n_users": 50000,
            "sweep": {"of": "simulate", "rho": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9], "cv2": [0.0, 1.0, 4.0]}
        }),
        "capacity-sensitivity" => serde_json::json!({
            "scenario": "sweep",
            "user_law": {"kind": "exponential", "rate": 1.0},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "policies": ["mtr"], "trials": 10, "n_users": 50000,
            "sweep": {"of": "simulate", "rho": [0.8], "c": [1, 2, 3, 4, 5, 6, 8], "cv2": [0.0, 1.0, 4.0]}
        }),
        "heterogeneous-capacity" => serde_json::json!({
            "scenario": "hetcap",
            "user_law": {"kind": "exponential", "rate": 1.6},
            "server_law": {"kind": "deterministic", "value": 1.0},
            "capacity": {"uniform_range": {"lo": 1, "hi": 4}}, "trials": 20, "n_users": 50000
        }),
        "heavy-traffic" => serde_json::json!({
            "scenario": "simulate",
            "user_law": {"kind": "uniform", "max": 2.0},
            "server_law": {"kind": "uniform", "max": 1.9},
            "capacity": 1, "policies": ["mtr"], "trials": 50
        }),
        "policy-comparison" => serde_json::json!({
            "scenario": "sweep",
            "user_law": {"kind": "exponential", "rate": 1.0},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "capacity": 1, "policies": ["mtr", "nn", "gs", "opt"], "trials": 20, "n_users": 2000,
            "sweep": {"of": "compare", "rho": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]}
        }),
        "capacity-comparison" => serde_json::json!({
            "scenario": "sweep",
            "user_law": {"kind": "exponential", "rate": 1.0},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "policies": ["mtr", "nn", "gs", "opt"], "trials": 20, "n_users": 2000,
            "sweep": {"of": "compare", "rho": [0.4], "c": [1, 2, 3, 4, 5, 6]}
        }),
        "cost-comparison" => serde_json::json!({
            "scenario": "sweep",
            "user_law": {"kind": "exponential", "rate": 1.0},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "capacity": 1, "policies": ["mtr", "nn", "gs", "opt"], "trials": 20, "n_users": 2000, "t0": 1.0,
            "sweep": {"of": "compare", "rho": [0.1, 0.3, 0.5, 0.7, 0.9], "beta": [2.0]}
        }),
        "analytic-grid" => serde_json::json!({
            "scenario": "sweep",
            "user_law": {"kind": "exponential", "rate": 1.0},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "sweep": {"of": "analytic", "rho": [0.1, 0.3, 0.5, 0.7, 0.9], "c": [1, 2, 4], "cv2": [0.0, 0.3333333333333333, 1.0, 4.0]}
        }),
        "analytic-basic" => serde_json::json!({
            "scenario": "analytic",
            "user_law": {"kind": "exponential", "rate": 0.5},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "models": ["bulk_mm1", "prgs", "grps", "uncapacitated", "forkjoin"]
        }),
        "compare-basic" => serde_json::json!({
            "scenario": "compare",
            "user_law": {"kind": "exponential", "rate": 0.5},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "capacity": 1, "trials": 10, "n_users": 2000
        }),
        "assign-basic" => serde_json::json!({
            "scenario": "assign",
            "user_law": {"kind": "exponential", "rate": 0.5},
            "server_law": {"kind": "exponential", "rate": 1.0},
            "capacity": 1, "n_users": 1000
        }),
        "planar-matching" => serde_json::json!({
            "scenario": "embed", "n_users": 200, "n_servers": 400, "trials": 20
        }),
        _ => return None,
    };
    Some(serde_json::from_value(v).expect("preset parses"))
}

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &[
    "bulk-mm1",
    "load-sensitivity",
    "capacity-sensitivity",
    "heterogeneous-capacity",
    "heavy-traffic",
    "policy-comparison",
    "capacity-comparison",
    "cost-comparison",
    "analytic-grid",
    "analytic-basic",
    "compare-basic",
    "assign-basic",
    "planar-matching",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sim() -> ExperimentConfig {
        let mut c = preset("bulk-mm1").unwrap();
        c.n_users = Some(2000);
        c.trials = 3;
        c
    }

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn structured_errors_list_fields() {
        let err = ExperimentConfig::from_json(r#"{"scenario": "simulate", "trials": 0}"#).unwrap_err();
        let Error::Config(list) = err else { panic!("{err}") };
        assert!(list.iter().any(|m| m.starts_with("trials")));
        assert!(list.iter().any(|m| m.starts_with("user_law")));
        assert!(list.iter().any(|m| m.starts_with("server_law")));
    }

    #[test]
    fn unstable_rejected_before_dispatch() {
        let text = r#"{"scenario": "simulate",
            "user_law": {"kind": "exponential", "rate": 2.0},
            "server_law": {"kind": "exponential", "rate": 1.0}}"#;
        assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"scenario": "embed", "colour": 1}"#).is_err());
    }

    #[test]
    fn seeds_and_order() {
        let r = run(&small_sim()).unwrap();
        assert_eq!(r.rows.len(), 3);
        let seeds = r.values("seed", |_| true);
        assert_eq!(seeds, vec![0.0, 1.0, 2.0]);
        assert!(r.rows.iter().all(|row| row[r.column("error").unwrap()].is_empty()));
        assert_eq!(r.get(&r.rows[0], "analytic_model"), Some("prgs"));
    }

    #[test]
    fn same_config_same_bytes() {
        let a = run(&small_sim()).unwrap().to_csv_string().unwrap();
        let mut cfg = small_sim();
        cfg.workers = Some(2);
        let b = run(&cfg).unwrap().to_csv_string().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_cells_rescale_users() {
        let cfg = preset("policy-comparison").unwrap();
        let cells: Vec<Cell> = cfg.cells().into_iter().map(|c| c.unwrap()).collect();
        assert_eq!(cells.len(), 9);
        assert!((cells[3].rho - 0.4).abs() < 1e-12);
        assert!((cells[3].user_law.mean() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn cv2_laws() {
        assert_eq!(law_for_cv2(0.0, 2.0).unwrap(), DistributionSpec::deterministic(2.0).unwrap());
        assert!((law_for_cv2(1.0 / 3.0, 2.0).unwrap().squared_cv() - 1.0 / 3.0).abs() < 1e-12);
        assert!((law_for_cv2(4.0, 2.0).unwrap().squared_cv() - 4.0).abs() < 1e-12);
        assert!(law_for_cv2(0.5, 1.0).is_err());
    }

    #[test]
    fn analytic_rows_carry_diagnostics() {
        let mut cfg = ExperimentConfig::new(ScenarioKind::Analytic);
        cfg.user_law = Some(DistributionSpec::exponential(0.5).unwrap());
        cfg.server_law = Some(DistributionSpec::exponential(1.0).unwrap());
        cfg.models = vec![AnalyticModel::BulkMm1, AnalyticModel::Prgs, AnalyticModel::Grps, AnalyticModel::Forkjoin];
        let r = run(&cfg).unwrap();
        let d = r.values("expected_distance", |_| true);
        assert_eq!(d.len(), 4);
        for x in &d[..3] {
            assert!((x - 2.0).abs() < 1e-8);
        }
        assert!((d[3] - 2.875).abs() < 1e-12);
    }
}
