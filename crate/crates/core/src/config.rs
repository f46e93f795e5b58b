//! Run configuration: strict JSON parsing, range validation and the content
//! digest that identifies a resolved configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ExchangeParams, KestenParams, LinkSampling, MoneyLegRule, Redistribution};
use crate::error::{Error, Result};
use crate::model::Denominator;
use crate::netgen::{Selection, SubsystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Baseline,
    Conservation,
    Intervention,
    Thermalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Kesten,
    Exchange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KestenConfig {
    pub alpha_target: f64,
    pub sigma: f64,
    pub x_min: f64,
}

impl Default for KestenConfig {
    fn default() -> Self {
        Self {
            alpha_target: 2.0,
            sigma: 0.1,
            x_min: 1.0,
        }
    }
}

impl KestenConfig {
    pub fn params(&self) -> Result<KestenParams> {
        KestenParams::for_alpha(self.alpha_target, self.sigma, self.x_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExchangeConfig {
    pub gamma: f64,
    pub f: f64,
    pub money_leg_rule: MoneyLegRule,
    pub link_sampling: LinkSampling,
    pub initial_wealth: f64,
    /// Gross product on the books at the start, per unit of initial wealth.
    pub initial_omega_ratio: f64,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            f: 0.1,
            money_leg_rule: MoneyLegRule::FixedFraction,
            link_sampling: LinkSampling::Uniform,
            initial_wealth: 1.0,
            initial_omega_ratio: 0.5,
        }
    }
}

impl ExchangeConfig {
    pub fn params(&self) -> Result<ExchangeParams> {
        let p = ExchangeParams {
            gamma: self.gamma,
            rule: self.money_leg_rule,
            f: self.f,
            payer_floor: 0.0,
            link_sampling: self.link_sampling,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Links per newcomer in preferential attachment.
    pub m: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { m: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsystemConfig {
    pub selection: Selection,
    pub fraction: f64,
}

impl Default for SubsystemConfig {
    fn default() -> Self {
        Self {
            selection: Selection::BreadthFirstBall,
            fraction: 0.2,
        }
    }
}

impl SubsystemConfig {
    pub fn spec(&self) -> SubsystemSpec {
        SubsystemSpec {
            selection: self.selection,
            fraction: self.fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub tax_rate: f64,
    pub gamma_gov: f64,
    pub redistribution: Redistribution,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tax_rate: 0.4,
            gamma_gov: 0.2,
            redistribution: Redistribution::UniformPerCapita,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalizationConfig {
    pub alpha_a: f64,
    pub alpha_b: f64,
    /// Size of system B; system A has `n_agents`.
    pub n_agents_b: Option<usize>,
    /// Cross-link exchanges per step.
    pub coupling: usize,
}

impl Default for ThermalizationConfig {
    fn default() -> Self {
        Self {
            alpha_a: 2.0,
            alpha_b: 1.2,
            n_agents_b: None,
            coupling: 1,
        }
    }
}

/// Which exponent enters `E_S` in the intervention experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    /// Whole-economy exponent before the intervention.
    #[default]
    Global,
    Subsystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConservedConfig {
    pub denominator: Denominator,
    pub alpha_source: AlphaSource,
}

impl Default for ConservedConfig {
    fn default() -> Self {
        Self {
            denominator: Denominator::Omega,
            alpha_source: AlphaSource::Global,
        }
    }
}

fn default_steps() -> u64 {
    10_000
}
fn default_stride() -> u64 {
    100
}
fn default_replicas() -> usize {
    10
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub engine: EngineKind,
    pub n_agents: usize,
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: u64,
    /// `None` selects the burn-in from the autocorrelation of mean log-wealth.
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default = "default_stride")]
    pub stride: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Conservation only: also run replicas without burn-in as a negative control.
    #[serde(default = "default_true")]
    pub negative_control: bool,
    #[serde(default)]
    pub kesten: KestenConfig,
    #[serde(default)]
    pub exchange: ExchangeConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub subsystem: SubsystemConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub thermalization: ThermalizationConfig,
    #[serde(default)]
    pub conserved: ConservedConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Parses and validates a JSON configuration. Unknown and duplicate keys are
/// rejected; errors name the offending key path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::validation(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

fn check(ok: bool, path: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation(path, message()))
    }
}

fn open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.n_agents >= 1, "n_agents", || "must be at least 1".into())?;
        check(self.stride >= 1, "stride", || "must be at least 1".into())?;
        check(self.replicas >= 1, "replicas", || "must be at least 1".into())?;
        if let Some(b) = self.burn_in {
            check(b >= 1, "burn_in", || "must be at least 1 (omit for automatic)".into())?;
        }

        let k = &self.kesten;
        check(k.alpha_target > 1.0 && k.alpha_target <= 2.0, "kesten.alpha_target", || {
            format!("{} outside the range (1, 2]", k.alpha_target)
        })?;
        check(k.sigma > 0.0 && k.sigma.is_finite(), "kesten.sigma", || "must be positive".into())?;
        check(k.x_min > 0.0 && k.x_min.is_finite(), "kesten.x_min", || "must be positive".into())?;

        let x = &self.exchange;
        check((0.0..=1.0).contains(&x.gamma), "exchange.gamma", || {
            format!("{} outside the range [0, 1]", x.gamma)
        })?;
        check(open_unit(x.f), "exchange.f", || format!("{} outside the range (0, 1)", x.f))?;
        check(x.initial_wealth > 0.0 && x.initial_wealth.is_finite(), "exchange.initial_wealth", || {
            "must be positive".into()
        })?;
        check(x.initial_omega_ratio > 0.0 && x.initial_omega_ratio.is_finite(), "exchange.initial_omega_ratio", || {
            "must be positive".into()
        })?;

        check(self.network.m >= 1, "network.m", || "must be at least 1".into())?;
        check(open_unit(self.subsystem.fraction), "subsystem.fraction", || {
            format!("{} outside the range (0, 1)", self.subsystem.fraction)
        })?;

        let c = &self.channel;
        check((0.0..1.0).contains(&c.tax_rate), "channel.tax_rate", || {
            format!("{} outside the range [0, 1)", c.tax_rate)
        })?;
        check((0.0..1.0).contains(&c.gamma_gov), "channel.gamma_gov", || {
            format!("{} outside the range [0, 1)", c.gamma_gov)
        })?;

        let t = &self.thermalization;
        for (v, path) in [(t.alpha_a, "thermalization.alpha_a"), (t.alpha_b, "thermalization.alpha_b")] {
            check(v > 1.0 && v <= 2.0, path, || format!("{v} outside the range (1, 2]"))?;
        }
        check(t.coupling >= 1, "thermalization.coupling", || "must be at least 1".into())?;
        if let Some(nb) = t.n_agents_b {
            check(nb >= 1, "thermalization.n_agents_b", || "must be at least 1".into())?;
        }

        if let (ExperimentKind::Intervention | ExperimentKind::Thermalization, EngineKind::Kesten) =
            (self.experiment, self.engine)
        {
            return Err(Error::validation("engine", "this experiment requires the exchange engine"));
        }
        if self.engine == EngineKind::Exchange {
            check(self.n_agents > self.network.m, "n_agents", || {
                format!("must exceed network.m = {}", self.network.m)
            })?;
        }
        if self.experiment == ExperimentKind::Intervention {
            check(c.gamma_gov <= x.gamma, "channel.gamma_gov", || {
                format!("{} exceeds the market gamma {}", c.gamma_gov, x.gamma)
            })?;
        }
        Ok(())
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`RunConfig::canonical_json`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
