//! The four experiments: baseline stationarity, conservation of `E`,
//! government intervention against a paired control, and thermalization of
//! two joined economies.
//!
//! Replicas run in parallel; results are always gathered in replica order,
//! so a report is a pure function of the resolved configuration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlphaSource, EngineKind, ExperimentKind, RunConfig};
use crate::dynamics::{
    thermalize, CoupledEconomies, Economy, ExchangeParams, GovernmentChannel, KestenEngine,
    ThermalPoint, ThermalizeParams,
};
use crate::error::{Error, Result};
use crate::inference::{
    alpha_from_flows, fit_tail, mean_and_stderr, FlowPoint, ParetoFit,
};
use crate::model::{compute_conserved, gini, AgentState, Denominator, SystemAccounts};
use crate::netgen::{carve_subsystem, generate_scale_free};
use crate::rng::{derive_seed, seeded};

/// Smallest automatic burn-in, in engine steps.
pub const MIN_BURN_IN: u64 = 1_000;
/// Pilot length, in strides, for the automatic burn-in.
const PILOT_STRIDES: u64 = 100;

/// Tolerance on the recovered tail exponent.
pub const ALPHA_TOLERANCE: f64 = 0.05;
/// KS critical-value coefficient at the 1% level.
pub const KS_CRITICAL_1PCT: f64 = 1.63;
/// Tolerance on the flow-regression exponent.
pub const FLOW_TOLERANCE: f64 = 0.1;
/// Standard errors admitted by the conservation test.
pub const CONSERVATION_SIGMAS: f64 = 3.0;
/// Standard errors used by directional verdicts.
pub const DIRECTIONAL_SIGMAS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Status {
    Pass,
    Fail,
    NotRun,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    /// Replicas meeting the criterion.
    pub passes: usize,
    pub replicas: usize,
    /// Replicas that must pass for [`Status::Pass`].
    pub required: usize,
    pub tolerance: Option<f64>,
    pub note: String,
}

impl Verdict {
    fn counted(name: &str, passes: usize, replicas: usize, fraction: f64, tolerance: f64, note: impl Into<String>) -> Self {
        Self::at_least(name, passes, replicas, required_count(fraction, replicas), tolerance, note)
    }

    fn at_least(name: &str, passes: usize, replicas: usize, required: usize, tolerance: f64, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if passes >= required { Status::Pass } else { Status::Fail },
            passes,
            replicas,
            required,
            tolerance: Some(tolerance),
            note: note.into(),
        }
    }

    fn skipped(name: &str, status: Status, replicas: usize, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status,
            passes: 0,
            replicas,
            required: 0,
            tolerance: None,
            note: note.into(),
        }
    }
}

/// Smallest replica count reaching `fraction` of `replicas`, at least one.
pub fn required_count(fraction: f64, replicas: usize) -> usize {
    ((fraction * replicas as f64) - 1e-9).ceil().max(1.0) as usize
}

/// One sampled row of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub omega: f64,
    pub lambda: f64,
    pub alpha_global: f64,
    pub alpha_s: f64,
    pub e_total: f64,
    pub e_s: f64,
    pub gini_global: f64,
    pub gini_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub seed: u64,
    pub burn_in: u64,
    pub fit: Option<ParetoFit>,
    /// Named scalar measurements; non-finite values are dropped.
    pub values: BTreeMap<String, f64>,
}

impl ReplicaSummary {
    fn new(seed: u64, burn_in: u64) -> Self {
        Self {
            seed,
            burn_in,
            fit: None,
            values: BTreeMap::new(),
        }
    }

    fn put(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.values.insert(key.to_string(), value);
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    /// Trajectory of the first replica (the treatment run for interventions).
    pub trajectories: Vec<TrajectoryPoint>,
    pub verdicts: Vec<Verdict>,
    pub replicas: Vec<ReplicaSummary>,
    pub thermal: Vec<ThermalPoint>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    fn new(config: &RunConfig) -> Self {
        Self {
            experiment: config.experiment,
            config_digest: config.digest(),
            seeds: replica_seeds(config),
            trajectories: Vec::new(),
            verdicts: Vec::new(),
            replicas: Vec::new(),
            thermal: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Values of `key` across replicas, in replica order.
    pub fn values(&self, key: &str) -> Vec<f64> {
        self.replicas.iter().filter_map(|r| r.get(key)).collect()
    }
}

pub fn replica_seeds(config: &RunConfig) -> Vec<u64> {
    (0..config.replicas as u64).map(|i| config.seed.wrapping_add(i)).collect()
}

/// Runs whichever experiment the configuration names.
pub fn run(config: &RunConfig) -> Result<ExperimentReport> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Baseline => run_baseline(config),
        ExperimentKind::Conservation => run_conservation(config),
        ExperimentKind::Intervention => run_intervention(config),
        ExperimentKind::Thermalization => run_thermalization(config),
    }
}

fn par_replicas<T: Send>(config: &RunConfig, f: impl Fn(usize, u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    replica_seeds(config)
        .into_par_iter()
        .enumerate()
        .map(|(i, seed)| f(i, seed).map_err(|e| e.context(format!("replica {i} (seed {seed})"))))
        .collect()
}

// ---------------------------------------------------------------- engines

trait Engine {
    fn advance(&mut self, steps: u64) -> Result<()>;
    fn mean_log_wealth(&self) -> f64;
}

impl Engine for KestenEngine {
    fn advance(&mut self, steps: u64) -> Result<()> {
        self.run(steps)
    }

    fn mean_log_wealth(&self) -> f64 {
        self.agents.iter().map(|a| a.wealth.ln()).sum::<f64>() / self.agents.len() as f64
    }
}

struct Market<'a> {
    econ: Economy,
    params: ExchangeParams,
    channel: Option<&'a GovernmentChannel>,
    rng: crate::rng::SimRng,
}

impl Engine for Market<'_> {
    fn advance(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.econ.step(&self.params, self.channel, &mut self.rng)?;
        }
        Ok(())
    }

    fn mean_log_wealth(&self) -> f64 {
        self.econ.mean_log_wealth()
    }
}

/// Integrated autocorrelation time, summing autocorrelations until the first
/// non-positive lag.
pub fn autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 3 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = (0..n - lag)
            .map(|i| (series[i] - mean) * (series[i + lag] - mean))
            .sum::<f64>()
            / (n as f64 * var);
        if c <= 0.0 {
            break;
        }
        tau += 2.0 * c;
    }
    tau
}

/// Runs the burn-in and returns its length. A fixed length is used when
/// configured; otherwise a pilot of 100 strides estimates the
/// autocorrelation time `tau` of mean log-wealth and the burn-in is
/// `max(1000, 10 tau)` steps.
fn burn_in(engine: &mut impl Engine, config: &RunConfig) -> Result<u64> {
    if let Some(b) = config.burn_in {
        engine.advance(b)?;
        return Ok(b);
    }
    let mut pilot = Vec::with_capacity(PILOT_STRIDES as usize);
    for _ in 0..PILOT_STRIDES {
        engine.advance(config.stride)?;
        pilot.push(engine.mean_log_wealth());
    }
    let done = PILOT_STRIDES * config.stride;
    let tau_steps = autocorrelation_time(&pilot) * config.stride as f64;
    let target = MIN_BURN_IN.max((10.0 * tau_steps).ceil() as u64);
    if target > done {
        engine.advance(target - done)?;
    }
    Ok(target.max(done))
}

fn measurement_points(config: &RunConfig) -> u64 {
    config.steps / config.stride
}

fn tail_alpha(wealths: &[f64]) -> (f64, Option<ParetoFit>) {
    match fit_tail(wealths) {
        Ok(fit) => (fit.alpha_hat, Some(fit)),
        Err(_) => (f64::NAN, None),
    }
}

fn e_values(agents: &[AgentState], alpha: f64, norm: f64) -> (f64, f64) {
    compute_conserved(agents, alpha, norm)
        .map(|q| (q.e_total, q.e_subsystem))
        .unwrap_or((f64::NAN, f64::NAN))
}

fn normalizer(accounts: &SystemAccounts, d: Denominator) -> f64 {
    match d {
        Denominator::Omega => accounts.omega,
        Denominator::Lambda => accounts.lambda,
    }
}

fn kesten_point(engine: &KestenEngine, alpha: f64, d: Denominator, with_fit: bool) -> TrajectoryPoint {
    let w = engine.wealths();
    let (e_total, _) = e_values(&engine.agents, alpha, normalizer(&engine.accounts, d));
    TrajectoryPoint {
        step: engine.accounts.step,
        omega: engine.accounts.omega,
        lambda: engine.accounts.lambda,
        alpha_global: if with_fit { tail_alpha(&w).0 } else { f64::NAN },
        alpha_s: f64::NAN,
        e_total,
        e_s: f64::NAN,
        gini_global: gini(&w).unwrap_or(f64::NAN),
        gini_s: f64::NAN,
    }
}

/// Settled snapshot of the agents of an economy.
fn settled_agents(econ: &Economy) -> Vec<AgentState> {
    econ.agents
        .iter()
        .map(|a| AgentState { wealth: econ.wealth(a.id), ..*a })
        .collect()
}

struct Window {
    lambda: f64,
    omega: f64,
    lambda_s: f64,
    omega_s: f64,
}

impl Window {
    fn open(econ: &Economy) -> Self {
        Self {
            lambda: econ.accounts.lambda,
            omega: econ.accounts.omega,
            lambda_s: econ.member_wealths().iter().sum(),
            omega_s: econ.omega_by_side()[1],
        }
    }

    /// `(dLambda, dOmega)` for the whole economy and for `S`.
    fn close(&self, econ: &Economy) -> ((f64, f64), (f64, f64)) {
        let now = Window::open(econ);
        (
            (now.lambda - self.lambda, now.omega - self.omega),
            (now.lambda_s - self.lambda_s, now.omega_s - self.omega_s),
        )
    }
}

fn exchange_point(econ: &Economy, window: &Window, alpha: f64, d: Denominator) -> TrajectoryPoint {
    let agents = settled_agents(econ);
    let ((dl, dom), (dls, doms)) = window.close(econ);
    let (e_total, e_s) = e_values(&agents, alpha, normalizer(&econ.accounts, d));
    let w: Vec<f64> = agents.iter().map(|a| a.wealth).collect();
    let ws = econ.member_wealths();
    let has_s = !ws.is_empty();
    TrajectoryPoint {
        step: econ.accounts.step,
        omega: econ.accounts.omega,
        lambda: econ.accounts.lambda,
        alpha_global: if dom > 0.0 { 1.0 + dl / dom } else { f64::NAN },
        alpha_s: if has_s && doms > 0.0 { 1.0 + dls / doms } else { f64::NAN },
        e_total,
        e_s: if has_s { e_s } else { f64::NAN },
        gini_global: gini(&w).unwrap_or(f64::NAN),
        gini_s: if has_s { gini(&ws).unwrap_or(f64::NAN) } else { f64::NAN },
    }
}

fn build_economy(config: &RunConfig, seed: u64, n_agents: usize) -> Result<Economy> {
    let net = generate_scale_free(n_agents, config.network.m, derive_seed(seed, 1))?;
    let x = &config.exchange;
    Economy::new(net, x.initial_wealth, x.initial_wealth * n_agents as f64 * x.initial_omega_ratio)
}

/// Exponent used inside `E` for an exchange economy: `1 + gamma`, which the
/// accounting identity makes exact for the unperturbed market.
fn market_alpha(gamma: f64) -> f64 {
    1.0 + gamma
}

// ---------------------------------------------------------------- baseline

/// Burn-in followed by a measurement phase. Kesten runs report the tail fit
/// and its recovery of the target exponent; exchange runs report the flow
/// regression, the accounting exponent and inequality.
pub fn run_baseline(config: &RunConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(config);
    let points = measurement_points(config);
    let runs = par_replicas(config, |_, seed| match config.engine {
        EngineKind::Kesten => baseline_kesten(config, seed, points),
        EngineKind::Exchange => baseline_exchange(config, seed, points),
    })?;
    let n = runs.len();
    for (i, (traj, summary)) in runs.into_iter().enumerate() {
        if i == 0 {
            report.trajectories = traj;
        }
        report.replicas.push(summary);
    }
    if points == 0 {
        report.warnings.push("no measurement strides; verdicts not run".into());
        let names: &[&str] = match config.engine {
            EngineKind::Kesten => &["alpha_recovery", "ks_fit"],
            EngineKind::Exchange => &["accounting_identity", "flow_alpha_recovery"],
        };
        for name in names {
            report.verdicts.push(Verdict::skipped(name, Status::NotRun, n, "zero measurement steps"));
        }
        return Ok(report);
    }
    match config.engine {
        EngineKind::Kesten => {
            let target = config.kesten.alpha_target;
            let ok = report
                .replicas
                .iter()
                .filter(|r| r.fit.is_some_and(|f| (f.alpha_hat - target).abs() <= ALPHA_TOLERANCE))
                .count();
            report.verdicts.push(Verdict::counted(
                "alpha_recovery",
                ok,
                n,
                1.0,
                ALPHA_TOLERANCE,
                format!("|alpha_hat - {target}| within tolerance for KS-selected x_min"),
            ));
            let ks = report
                .replicas
                .iter()
                .filter(|r| r.fit.is_some_and(|f| f.ks_distance < KS_CRITICAL_1PCT / (f.n_tail as f64).sqrt()))
                .count();
            report.verdicts.push(Verdict::counted(
                "ks_fit",
                ks,
                n,
                0.8,
                KS_CRITICAL_1PCT,
                "KS distance below 1.63/sqrt(n_tail) in at least 80% of replicas",
            ));
        }
        EngineKind::Exchange => {
            let gamma = config.exchange.gamma;
            let ident = report.values("identity_residual").iter().filter(|&&r| r <= 1e-9).count();
            report.verdicts.push(Verdict::counted(
                "accounting_identity",
                ident,
                n,
                1.0,
                1e-9,
                "|dLambda - gamma dOmega| relative to Lambda",
            ));
            let flows = report.values("flow_alpha");
            if flows.len() < n {
                report.verdicts.push(Verdict::skipped(
                    "flow_alpha_recovery",
                    Status::NotRun,
                    n,
                    "flow regression needs 30 strides with growing gross product",
                ));
            } else {
                let ok = flows.iter().filter(|&&a| (a - (1.0 + gamma)).abs() <= FLOW_TOLERANCE).count();
                report.verdicts.push(Verdict::counted(
                    "flow_alpha_recovery",
                    ok,
                    n,
                    1.0,
                    FLOW_TOLERANCE,
                    format!("flow-regression alpha against 1 + gamma = {}", 1.0 + gamma),
                ));
            }
            if gamma == 1.0 {
                let g = report.values("gini_global");
                let ok = g.iter().filter(|&&x| (0.30..=0.37).contains(&x)).count();
                report.verdicts.push(Verdict::counted(
                    "gini_pareto_band",
                    ok,
                    n,
                    1.0,
                    0.035,
                    "Gini within [0.30, 0.37], the Pareto(2) value 1/3",
                ));
            }
        }
    }
    Ok(report)
}

fn baseline_kesten(config: &RunConfig, seed: u64, points: u64) -> Result<(Vec<TrajectoryPoint>, ReplicaSummary)> {
    let params = config.kesten.params()?;
    let alpha = config.kesten.alpha_target;
    let d = config.conserved.denominator;
    let mut engine = KestenEngine::new(config.n_agents, params, derive_seed(seed, 2))?;
    let burn = burn_in(&mut engine, config)?;
    let mut traj = Vec::with_capacity(points as usize);
    for _ in 0..points {
        engine.advance(config.stride)?;
        traj.push(kesten_point(&engine, alpha, d, true));
    }
    let mut summary = ReplicaSummary::new(seed, burn);
    if points > 0 {
        let w = engine.wealths();
        let (a, fit) = tail_alpha(&w);
        summary.fit = fit;
        summary.put("alpha_hat", a);
        summary.put("gini_global", gini(&w)?);
        summary.put("reflected_fraction", w.iter().filter(|&&x| x == params.x_min).count() as f64 / w.len() as f64);
    }
    Ok((traj, summary))
}

fn baseline_exchange(config: &RunConfig, seed: u64, points: u64) -> Result<(Vec<TrajectoryPoint>, ReplicaSummary)> {
    let params = config.exchange.params()?;
    let alpha = market_alpha(params.gamma);
    let d = config.conserved.denominator;
    let mut market = Market {
        econ: build_economy(config, seed, config.n_agents)?,
        params,
        channel: None,
        rng: seeded(derive_seed(seed, 2)),
    };
    let burn = burn_in(&mut market, config)?;
    let start = Window::open(&market.econ);
    let mut traj = Vec::with_capacity(points as usize);
    let mut flows = vec![FlowPoint {
        mean_log_wealth: market.econ.mean_log_wealth(),
        log_omega: market.econ.accounts.omega.ln(),
    }];
    for _ in 0..points {
        let w = Window::open(&market.econ);
        market.advance(config.stride)?;
        traj.push(exchange_point(&market.econ, &w, alpha, d));
        flows.push(FlowPoint {
            mean_log_wealth: market.econ.mean_log_wealth(),
            log_omega: market.econ.accounts.omega.ln(),
        });
    }
    let mut summary = ReplicaSummary::new(seed, burn);
    if points > 0 {
        let ((dl, dom), _) = start.close(&market.econ);
        let wealth = market.econ.wealths();
        let sum: f64 = wealth.iter().sum();
        summary.put("accounting_alpha", 1.0 + dl / dom);
        summary.put("identity_residual", (dl - params.gamma * dom).abs() / sum);
        summary.put("ledger_residual", (sum - market.econ.accounts.lambda).abs() / sum);
        summary.put("gini_global", gini(&wealth)?);
        summary.put("lambda_over_omega", market.econ.accounts.lambda / market.econ.accounts.omega);
        summary.put("skipped_steps", market.econ.skipped_steps() as f64);
        if let Ok(flow) = alpha_from_flows(&flows) {
            summary.put("flow_alpha", flow.alpha_hat);
            summary.put("flow_alpha_stderr", flow.alpha_stderr);
            summary.put("flow_slope", flow.slope);
        }
        let (a, fit) = tail_alpha(&wealth);
        summary.fit = fit;
        summary.put("alpha_hat", a);
    }
    Ok((traj, summary))
}

// ------------------------------------------------------------ conservation

/// Per-stride increments of `E_total` after burn-in; PASS when
/// `|mean| <= 3 stderr` in at least 95% of replicas. Replicas without
/// burn-in form the negative control, which should fail the same test.
pub fn run_conservation(config: &RunConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(config);
    let points = measurement_points(config);
    let n = config.replicas;
    if points < 2 {
        report.warnings.push("fewer than two strides; conservation not tested".into());
        report.verdicts.push(Verdict::skipped("conservation", Status::NotRun, n, "insufficient strides"));
        return Ok(report);
    }
    let runs = par_replicas(config, |_, seed| conservation_replica(config, seed, points, false))?;
    for (i, (traj, summary)) in runs.into_iter().enumerate() {
        if i == 0 {
            report.trajectories = traj;
        }
        report.replicas.push(summary);
    }
    let pass = report.values("conserved").iter().filter(|&&c| c > 0.5).count();
    report.verdicts.push(Verdict::counted(
        "conservation",
        pass,
        n,
        0.95,
        CONSERVATION_SIGMAS,
        format!("|mean dE_total| <= 3 stderr, E normalized by {:?}", config.conserved.denominator),
    ));
    let other = match config.conserved.denominator {
        Denominator::Omega => "conserved_lambda",
        Denominator::Lambda => "conserved_omega",
    };
    let pass_other = report.values(other).iter().filter(|&&c| c > 0.5).count();
    report.verdicts.push(Verdict::counted(
        &format!("conservation_alt_{}", &other["conserved_".len()..]),
        pass_other,
        n,
        0.95,
        CONSERVATION_SIGMAS,
        "same test with the other normalizer, for sensitivity",
    ));
    if config.negative_control {
        let controls = par_replicas(config, |_, seed| conservation_replica(config, seed, points, true))?;
        let detected = controls.iter().filter(|(_, s)| s.get("conserved") == Some(0.0)).count();
        let drift: Vec<f64> = controls.iter().filter_map(|(_, s)| s.get("mean_de")).collect();
        let (mean_drift, _) = mean_and_stderr(&drift);
        // the control fails the test when fewer than the required replicas conserve E
        let needed = n - required_count(0.95, n) + 1;
        report.verdicts.push(Verdict::at_least(
            "negative_control_detects_drift",
            detected,
            n,
            needed,
            CONSERVATION_SIGMAS,
            format!("runs without burn-in must fail the conservation test; mean drift per stride {mean_drift:.6e}"),
        ));
    }
    Ok(report)
}

fn conservation_replica(
    config: &RunConfig,
    seed: u64,
    points: u64,
    skip_burn_in: bool,
) -> Result<(Vec<TrajectoryPoint>, ReplicaSummary)> {
    let d = config.conserved.denominator;
    let mut traj = Vec::with_capacity(points as usize + 1);
    // per stride: (E normalized by omega, E normalized by lambda)
    let mut series: Vec<(f64, f64)> = Vec::with_capacity(points as usize + 1);
    let burn;
    match config.engine {
        EngineKind::Kesten => {
            let alpha = config.kesten.alpha_target;
            let mut engine = KestenEngine::new(config.n_agents, config.kesten.params()?, derive_seed(seed, 2))?;
            burn = if skip_burn_in { 0 } else { burn_in(&mut engine, config)? };
            engine.resync_lambda();
            let mut record = |engine: &KestenEngine, traj: &mut Vec<TrajectoryPoint>| -> Result<()> {
                let o = compute_conserved(&engine.agents, alpha, engine.accounts.omega)?.e_total;
                let l = compute_conserved(&engine.agents, alpha, engine.accounts.lambda)?.e_total;
                series.push((o, l));
                traj.push(kesten_point(engine, alpha, d, false));
                Ok(())
            };
            record(&engine, &mut traj)?;
            for _ in 0..points {
                engine.advance(config.stride)?;
                record(&engine, &mut traj)?;
            }
        }
        EngineKind::Exchange => {
            let params = config.exchange.params()?;
            let alpha = market_alpha(params.gamma);
            let mut market = Market {
                econ: build_economy(config, seed, config.n_agents)?,
                params,
                channel: None,
                rng: seeded(derive_seed(seed, 2)),
            };
            burn = if skip_burn_in { 0 } else { burn_in(&mut market, config)? };
            let mut w = Window::open(&market.econ);
            for i in 0..=points {
                if i > 0 {
                    w = Window::open(&market.econ);
                    market.advance(config.stride)?;
                }
                let agents = settled_agents(&market.econ);
                let o = compute_conserved(&agents, alpha, market.econ.accounts.omega)?.e_total;
                let l = compute_conserved(&agents, alpha, market.econ.accounts.lambda)?.e_total;
                series.push((o, l));
                traj.push(exchange_point(&market.econ, &w, alpha, d));
            }
        }
    }
    let test = |pick: fn(&(f64, f64)) -> f64| {
        let diffs: Vec<f64> = series.windows(2).map(|w| pick(&w[1]) - pick(&w[0])).collect();
        let (mean, se) = mean_and_stderr(&diffs);
        (mean, se, mean.abs() <= CONSERVATION_SIGMAS * se)
    };
    let (mo, so, ok_o) = test(|p| p.0);
    let (ml, sl, ok_l) = test(|p| p.1);
    let mut summary = ReplicaSummary::new(seed, burn);
    summary.put("conserved_omega", f64::from(u8::from(ok_o)));
    summary.put("conserved_lambda", f64::from(u8::from(ok_l)));
    let (mean, se, ok) = match d {
        Denominator::Omega => (mo, so, ok_o),
        Denominator::Lambda => (ml, sl, ok_l),
    };
    summary.put("conserved", f64::from(u8::from(ok)));
    summary.put("mean_de", mean);
    summary.put("stderr_de", se);
    summary.put("mean_de_omega", mo);
    summary.put("mean_de_lambda", ml);
    Ok((traj, summary))
}

// ------------------------------------------------------------ intervention

/// Treatment and control start from the same burned-in state and share the
/// random stream; only the government channel differs.
pub fn run_intervention(config: &RunConfig) -> Result<ExperimentReport> {
    if config.engine != EngineKind::Exchange {
        return Err(Error::validation("engine", "intervention requires the exchange engine"));
    }
    let mut report = ExperimentReport::new(config);
    let n = config.replicas;
    let runs = par_replicas(config, |_, seed| intervention_replica(config, seed))?;
    for (i, (traj, summary)) in runs.into_iter().enumerate() {
        if i == 0 {
            report.trajectories = traj;
        }
        report.replicas.push(summary);
    }
    if measurement_points(config) == 0 {
        report.verdicts.push(Verdict::skipped("e_s_direction", Status::NotRun, n, "zero measurement steps"));
        return Ok(report);
    }
    let d_e = report.values("delta_e_s");
    let d_alpha = report.values("delta_alpha_s");
    let d_gini = report.values("delta_gini_s");
    if config.channel.tax_rate == 0.0 {
        let within = |v: &[f64]| {
            let (m, se) = mean_and_stderr(v);
            v.iter().all(|&x| x == 0.0) || m.abs() <= DIRECTIONAL_SIGMAS * se
        };
        let ok = [&d_e, &d_alpha, &d_gini].iter().filter(|v| within(v)).count();
        report.verdicts.push(Verdict::at_least(
            "null_intervention",
            ok,
            3,
            3,
            DIRECTIONAL_SIGMAS,
            format!("tax_rate = 0: deltas of E_S, alpha_S, Gini_S within 2 stderr of zero over {n} replicas; counts are over the three deltas"),
        ));
        return Ok(report);
    }
    report.verdicts.push(Verdict::counted(
        "e_s_direction",
        d_e.iter().filter(|&&x| x <= 0.0).count(),
        n,
        0.8,
        0.0,
        "dE_S(treatment) - dE_S(control) <= 0, global pre-intervention alpha",
    ));
    report.verdicts.push(Verdict::counted(
        "e_s_direction_subsystem_alpha",
        report.values("delta_e_s_alpha_s").iter().filter(|&&x| x <= 0.0).count(),
        n,
        0.8,
        0.0,
        "as e_s_direction with the control run's alpha_S inside E",
    ));
    report.verdicts.push(Verdict::counted(
        "alpha_degradation",
        d_alpha.iter().filter(|&&x| x < 0.0).count(),
        n,
        0.8,
        0.0,
        "accounting alpha_S(treatment) < alpha_S(control)",
    ));
    report.verdicts.push(Verdict::counted(
        "equality_degradation",
        d_gini.iter().filter(|&&x| x >= 0.0).count(),
        n,
        0.7,
        0.0,
        "Gini_S(treatment) >= Gini_S(control)",
    ));
    Ok(report)
}

fn intervention_replica(config: &RunConfig, seed: u64) -> Result<(Vec<TrajectoryPoint>, ReplicaSummary)> {
    let params = config.exchange.params()?;
    let mut econ = build_economy(config, seed, config.n_agents)?;
    let members = carve_subsystem(&econ.network, &config.subsystem.spec(), derive_seed(seed, 3))?;
    econ.set_subsystem(&members)?;
    let channel = GovernmentChannel {
        members,
        tax_rate: config.channel.tax_rate,
        gamma_gov: config.channel.gamma_gov,
        redistribution: config.channel.redistribution,
    };
    channel.validate(params.gamma)?;

    let mut burn_market = Market {
        econ,
        params,
        channel: None,
        rng: seeded(derive_seed(seed, 2)),
    };
    let burn = burn_in(&mut burn_market, config)?;
    let start = burn_market.econ;
    let alpha = market_alpha(params.gamma);
    let d = config.conserved.denominator;
    let points = measurement_points(config);

    struct Arm {
        traj: Vec<TrajectoryPoint>,
        end: Economy,
        alpha_s: f64,
    }
    let run_arm = |channel: Option<&GovernmentChannel>| -> Result<Arm> {
        let mut m = Market {
            econ: start.clone(),
            params,
            channel,
            rng: seeded(derive_seed(seed, 4)),
        };
        let open = Window::open(&m.econ);
        let mut traj = Vec::with_capacity(points as usize);
        for _ in 0..points {
            let w = Window::open(&m.econ);
            m.advance(config.stride)?;
            traj.push(exchange_point(&m.econ, &w, alpha, d));
        }
        let (_, (dls, doms)) = open.close(&m.econ);
        Ok(Arm {
            traj,
            end: m.econ,
            alpha_s: if doms > 0.0 { 1.0 + dls / doms } else { f64::NAN },
        })
    };
    let control = run_arm(None)?;
    let treatment = run_arm(Some(&channel))?;

    let e_s = |econ: &Economy, a: f64| -> Result<f64> {
        let norm = normalizer(&econ.accounts, d);
        Ok(compute_conserved(&settled_agents(econ), a, norm)?.e_subsystem)
    };
    let e0 = e_s(&start, alpha)?;
    let delta_e = (e_s(&treatment.end, alpha)? - e0) - (e_s(&control.end, alpha)? - e0);
    let mut summary = ReplicaSummary::new(seed, burn);
    summary.put("delta_e_s", delta_e);
    // alpha_S of the control run, clamped into the admissible range
    let alpha_sub = control.alpha_s.clamp(1.0 + 1e-9, 2.0);
    if config.conserved.alpha_source == AlphaSource::Subsystem || alpha_sub.is_finite() {
        let e0s = e_s(&start, alpha_sub)?;
        summary.put(
            "delta_e_s_alpha_s",
            (e_s(&treatment.end, alpha_sub)? - e0s) - (e_s(&control.end, alpha_sub)? - e0s),
        );
    }
    let gini_s = |econ: &Economy| gini(&econ.member_wealths());
    summary.put("alpha_s_control", control.alpha_s);
    summary.put("alpha_s_treatment", treatment.alpha_s);
    summary.put("delta_alpha_s", treatment.alpha_s - control.alpha_s);
    summary.put("gini_s_control", gini_s(&control.end)?);
    summary.put("gini_s_treatment", gini_s(&treatment.end)?);
    summary.put("delta_gini_s", gini_s(&treatment.end)? - gini_s(&control.end)?);
    summary.put("subsystem_size", channel.members.len() as f64);
    Ok((treatment.traj, summary))
}

// ---------------------------------------------------------- thermalization

/// Burns in two exchange economies at `gamma = alpha - 1` each, joins them
/// with random cross-links and checks that the joint accounting exponent
/// settles strictly between the two starting exponents.
pub fn run_thermalization(config: &RunConfig) -> Result<ExperimentReport> {
    if config.engine != EngineKind::Exchange {
        return Err(Error::validation("engine", "thermalization requires the exchange engine"));
    }
    let mut report = ExperimentReport::new(config);
    let t = &config.thermalization;
    let n = config.replicas;
    if t.alpha_a == t.alpha_b {
        report.verdicts.push(Verdict::skipped(
            "intermediacy",
            Status::NotApplicable,
            n,
            "identical exponents: nothing to thermalize",
        ));
        return Ok(report);
    }
    if measurement_points(config) < 4 {
        report.verdicts.push(Verdict::skipped("intermediacy", Status::NotRun, n, "fewer than four windows"));
        return Ok(report);
    }
    let runs = par_replicas(config, |_, seed| thermal_replica(config, seed))?;
    for (i, (points, summary)) in runs.into_iter().enumerate() {
        if i == 0 {
            report.trajectories = points
                .iter()
                .map(|p| TrajectoryPoint {
                    step: p.step,
                    omega: p.omega,
                    lambda: p.lambda,
                    alpha_global: p.alpha_union,
                    alpha_s: f64::NAN,
                    e_total: f64::NAN,
                    e_s: f64::NAN,
                    gini_global: p.gini_union,
                    gini_s: f64::NAN,
                })
                .collect();
            report.thermal = points;
        }
        report.replicas.push(summary);
    }
    let ok = report.values("intermediate").iter().filter(|&&x| x > 0.5).count();
    report.verdicts.push(Verdict::counted(
        "intermediacy",
        ok,
        n,
        0.8,
        DIRECTIONAL_SIGMAS,
        "min(alpha_A, alpha_B) + 2 se < joint alpha < max(alpha_A, alpha_B) - 2 se",
    ));
    Ok(report)
}

fn thermal_replica(config: &RunConfig, seed: u64) -> Result<(Vec<ThermalPoint>, ReplicaSummary)> {
    let t = &config.thermalization;
    let params = config.exchange.params()?;
    let (gamma_a, gamma_b) = (t.alpha_a - 1.0, t.alpha_b - 1.0);
    let n_b = t.n_agents_b.unwrap_or(config.n_agents);
    let mut burned = Vec::new();
    for (k, (gamma, size)) in [(gamma_a, config.n_agents), (gamma_b, n_b)].into_iter().enumerate() {
        let mut market = Market {
            econ: build_economy(config, derive_seed(seed, 10 + k as u64), size)?,
            params: ExchangeParams { gamma, ..params },
            channel: None,
            rng: seeded(derive_seed(seed, 20 + k as u64)),
        };
        let start = Window::open(&market.econ);
        let burn = burn_in(&mut market, config)?;
        let ((dl, dom), _) = start.close(&market.econ);
        burned.push((market.econ, 1.0 + dl / dom, burn));
    }
    let (b, alpha_b_hat, burn_b) = burned.pop().expect("two systems");
    let (a, alpha_a_hat, burn_a) = burned.pop().expect("two systems");
    let mut system = CoupledEconomies::new(a, b);
    let p = ThermalizeParams {
        gamma_a,
        gamma_b,
        coupling: t.coupling,
        steps: config.steps,
        stride: config.stride,
    };
    let run = thermalize(&mut system, &p, &params, &mut seeded(derive_seed(seed, 30)))?;
    let lo = alpha_a_hat.min(alpha_b_hat);
    let hi = alpha_a_hat.max(alpha_b_hat);
    let delta = DIRECTIONAL_SIGMAS * run.final_union.stderr;
    let joint = run.final_union.alpha_hat;
    let mut summary = ReplicaSummary::new(seed, burn_a.max(burn_b));
    summary.put("alpha_a_start", alpha_a_hat);
    summary.put("alpha_b_start", alpha_b_hat);
    summary.put("alpha_a_final", run.final_a.alpha_hat);
    summary.put("alpha_b_final", run.final_b.alpha_hat);
    summary.put("alpha_union_final", joint);
    summary.put("alpha_union_stderr", run.final_union.stderr);
    summary.put("final_gap", (run.final_a.alpha_hat - run.final_b.alpha_hat).abs());
    summary.put("intermediate", f64::from(u8::from(lo + delta < joint && joint < hi - delta)));
    Ok((run.points, summary))
}
