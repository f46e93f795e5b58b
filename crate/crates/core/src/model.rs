//! Domain types shared by every engine: agents, the macroscopic ledgers,
//! the correlation exponent, and the log-wealth quantity `E`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance between the running `lambda` ledger and the sum of wealths.
pub const LEDGER_TOLERANCE: f64 = 1e-9;

/// Which part of the economy an agent belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Subsystem {
    #[default]
    Core,
    /// Inside the government perimeter.
    S,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub wealth: f64,
    pub subsystem: Subsystem,
}

impl AgentState {
    pub fn new(id: usize, wealth: f64) -> Self {
        Self {
            id,
            wealth,
            subsystem: Subsystem::Core,
        }
    }
}

/// Builds `n` agents with identical wealth, all in the core.
pub fn uniform_agents(n: usize, wealth: f64) -> Vec<AgentState> {
    (0..n).map(|id| AgentState::new(id, wealth)).collect()
}

pub fn wealths(agents: &[AgentState]) -> Vec<f64> {
    agents.iter().map(|a| a.wealth).collect()
}

/// Macroscopic ledgers: gross product `omega`, total wealth `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemAccounts {
    pub omega: f64,
    pub lambda: f64,
    pub n_agents: usize,
    pub step: u64,
}

impl SystemAccounts {
    pub fn new(agents: &[AgentState], omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::domain(format!("omega must be positive, got {omega}")));
        }
        Ok(Self {
            omega,
            lambda: agents.iter().map(|a| a.wealth).sum(),
            n_agents: agents.len(),
            step: 0,
        })
    }

    /// Adds the money leg of one exchange to the gross product.
    pub fn record_exchange(self, money_leg: f64) -> Result<Self> {
        if !(money_leg >= 0.0) || !money_leg.is_finite() {
            return Err(Error::domain(format!(
                "money leg must be non-negative and finite, got {money_leg}"
            )));
        }
        Ok(Self {
            omega: self.omega + money_leg,
            ..self
        })
    }

    /// `|lambda - sum(wealth)| <= 1e-9 * lambda`.
    pub fn ledger_consistent(&self, agents: &[AgentState]) -> bool {
        let sum: f64 = agents.iter().map(|a| a.wealth).sum();
        (self.lambda - sum).abs() <= LEDGER_TOLERANCE * self.lambda.abs().max(f64::MIN_POSITIVE)
            && agents.len() == self.n_agents
    }
}

/// Correlation exponent and slow production rate of one economy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParams {
    pub alpha_target: f64,
    pub beta: f64,
}

impl CorrelationParams {
    pub fn new(alpha_target: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha_target)?;
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::parameter(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self { alpha_target, beta })
    }
}

/// Accepts `alpha` in (1, 2].
pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::parameter(format!("alpha must lie in (1, 2], got {alpha}")))
    }
}

/// Which aggregate normalizes the per-agent log-wealth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Gross product, the currency-measured aggregate.
    #[default]
    Omega,
    /// Total wealth.
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservedQuantity {
    pub e_per_agent: Vec<f64>,
    pub e_total: f64,
    pub e_subsystem: f64,
}

/// `E_i = alpha * ln(x_i) - ln(omega)`, with totals over all agents and over `S`.
pub fn compute_conserved(
    agents: &[AgentState],
    alpha: f64,
    omega: f64,
) -> Result<ConservedQuantity> {
    check_alpha(alpha)?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain(format!("normalizer must be positive, got {omega}")));
    }
    let ln_norm = omega.ln();
    let mut e_per_agent = Vec::with_capacity(agents.len());
    let mut e_total = 0.0;
    let mut e_subsystem = 0.0;
    for a in agents {
        if !(a.wealth > 0.0 && a.wealth.is_finite()) {
            return Err(Error::domain(format!(
                "agent {} has non-positive wealth {}",
                a.id, a.wealth
            )));
        }
        let e = alpha * a.wealth.ln() - ln_norm;
        e_per_agent.push(e);
        e_total += e;
        if a.subsystem == Subsystem::S {
            e_subsystem += e;
        }
    }
    Ok(ConservedQuantity {
        e_per_agent,
        e_total,
        e_subsystem,
    })
}

/// [`compute_conserved`] with the normalizer picked from the ledgers.
pub fn compute_conserved_with(
    agents: &[AgentState],
    alpha: f64,
    accounts: &SystemAccounts,
    denominator: Denominator,
) -> Result<ConservedQuantity> {
    let norm = match denominator {
        Denominator::Omega => accounts.omega,
        Denominator::Lambda => accounts.lambda,
    };
    compute_conserved(agents, alpha, norm)
}

/// Gini coefficient by the sorted-rank formula
/// `G = 2 * sum(i * x_(i)) / (n * sum(x)) - (n + 1) / n`.
pub fn gini(wealths: &[f64]) -> Result<f64> {
    if wealths.is_empty() {
        return Err(Error::domain("gini of an empty sample"));
    }
    if let Some(bad) = wealths.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::domain(format!("gini requires positive entries, got {bad}")));
    }
    let mut sorted = wealths.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(gini_sorted(&sorted))
}

pub(crate) fn gini_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let (mut weighted, mut total) = (0.0, 0.0);
    for (i, &x) in sorted.iter().enumerate() {
        weighted += (i as f64 + 1.0) * x;
        total += x;
    }
    (2.0 * weighted / (n * total) - (n + 1.0) / n).max(0.0)
}
