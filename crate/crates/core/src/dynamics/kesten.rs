use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_alpha, AgentState, SystemAccounts};
use crate::rng::{seeded, SimRng};

/// Reflected geometric Brownian motion in discrete time.
///
/// Each step multiplies wealth by `exp(mu - sigma^2 / 2 + sigma * xi)`, so
/// `mu` is the drift of the wealth itself and `mu - sigma^2 / 2` the drift of
/// its logarithm. Against the barrier this gives a stationary Pareto tail with
/// exponent `1 - 2 mu / sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KestenParams {
    pub mu: f64,
    pub sigma: f64,
    pub x_min: f64,
}

impl KestenParams {
    /// Parameters whose stationary exponent is `alpha`.
    pub fn for_alpha(alpha: f64, sigma: f64, x_min: f64) -> Result<Self> {
        let params = Self {
            mu: target_alpha_to_drift(alpha, sigma)?,
            sigma,
            x_min,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn stationary_exponent(&self) -> f64 {
        1.0 - 2.0 * self.mu / (self.sigma * self.sigma)
    }

    /// Checks the invariants of a stationary configuration.
    pub fn validate(&self) -> Result<()> {
        self.check_step()?;
        if !(self.mu < 0.0) {
            return Err(Error::parameter(format!(
                "drift mu must be negative for a stationary law, got {}",
                self.mu
            )));
        }
        check_alpha(self.stationary_exponent())
    }

    fn check_step(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::parameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.x_min > 0.0 && self.x_min.is_finite()) {
            return Err(Error::parameter(format!("barrier must be positive, got {}", self.x_min)));
        }
        if !self.mu.is_finite() {
            return Err(Error::parameter("mu must be finite"));
        }
        Ok(())
    }
}

/// `mu = sigma^2 (1 - alpha) / 2`, the inverse of [`KestenParams::stationary_exponent`].
pub fn target_alpha_to_drift(alpha: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::parameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(sigma * sigma * (1.0 - alpha) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KestenDelta {
    /// Half the total absolute wealth change.
    pub d_omega: f64,
    pub d_lambda: f64,
    /// Agents pushed back to the barrier.
    pub reflected: usize,
}

/// One synchronous multiplicative update of every agent.
pub fn kesten_step<R: Rng + ?Sized>(
    agents: &mut [AgentState],
    params: &KestenParams,
    rng: &mut R,
) -> Result<KestenDelta> {
    params.check_step()?;
    let log_drift = params.mu - 0.5 * params.sigma * params.sigma;
    let mut delta = KestenDelta::default();
    let mut abs_change = 0.0;
    for a in agents.iter_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        let mut next = a.wealth * (log_drift + params.sigma * xi).exp();
        if next < params.x_min {
            next = params.x_min;
            delta.reflected += 1;
        }
        let change = next - a.wealth;
        abs_change += change.abs();
        delta.d_lambda += change;
        a.wealth = next;
    }
    delta.d_omega = 0.5 * abs_change;
    Ok(delta)
}

/// A population evolving under [`kesten_step`] with its ledgers.
#[derive(Debug, Clone)]
pub struct KestenEngine {
    pub agents: Vec<AgentState>,
    pub accounts: SystemAccounts,
    pub params: KestenParams,
    rng: SimRng,
}

impl KestenEngine {
    /// All agents start at the barrier; `omega` starts at the initial total wealth.
    pub fn new(n_agents: usize, params: KestenParams, seed: u64) -> Result<Self> {
        params.check_step()?;
        if n_agents == 0 {
            return Err(Error::parameter("at least one agent is required"));
        }
        let agents = crate::model::uniform_agents(n_agents, params.x_min);
        let omega = params.x_min * n_agents as f64;
        Ok(Self {
            accounts: SystemAccounts::new(&agents, omega)?,
            agents,
            params,
            rng: seeded(seed),
        })
    }

    pub fn step(&mut self) -> Result<KestenDelta> {
        let delta = kesten_step(&mut self.agents, &self.params, &mut self.rng)?;
        self.accounts = self.accounts.record_exchange(delta.d_omega)?;
        self.accounts.lambda += delta.d_lambda;
        self.accounts.step += 1;
        Ok(delta)
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Recomputes `lambda` from the agents, dropping accumulated rounding.
    pub fn resync_lambda(&mut self) {
        self.accounts.lambda = self.agents.iter().map(|a| a.wealth).sum();
    }

    pub fn wealths(&self) -> Vec<f64> {
        crate::model::wealths(&self.agents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::uniform_agents;

    #[test]
    fn drift_examples() {
        assert!((target_alpha_to_drift(2.0, 0.1).unwrap() + 0.005).abs() < 1e-15);
        let mu = target_alpha_to_drift(1.5, 0.2).unwrap();
        assert!((mu + 0.01).abs() < 1e-15);
        let p = KestenParams {
            mu,
            sigma: 0.2,
            x_min: 1.0,
        };
        assert!((p.stationary_exponent() - 1.5).abs() < 1e-12);
        assert!(target_alpha_to_drift(1.0, 0.1).is_err());
        assert!(target_alpha_to_drift(2.01, 0.1).is_err());
        assert!(target_alpha_to_drift(1.5, 0.0).is_err());
    }

    #[test]
    fn vanishing_noise_leaves_wealth_unchanged() {
        let mut agents = uniform_agents(10, 3.0);
        let p = KestenParams {
            mu: 0.0,
            sigma: 1e-13,
            x_min: 1.0,
        };
        kesten_step(&mut agents, &p, &mut seeded(1)).unwrap();
        assert!(agents.iter().all(|a| (a.wealth - 3.0).abs() < 1e-9));
    }

    #[test]
    fn barrier_holds() {
        let p = KestenParams {
            mu: -0.05,
            sigma: 0.3,
            x_min: 2.0,
        };
        let mut agents = uniform_agents(1, 2.0);
        let mut rng = seeded(2);
        for _ in 0..10_000 {
            kesten_step(&mut agents, &p, &mut rng).unwrap();
            assert!(agents[0].wealth >= 2.0);
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        let p = KestenParams {
            mu: -0.1,
            sigma: 0.0,
            x_min: 1.0,
        };
        assert!(kesten_step(&mut uniform_agents(1, 1.0), &p, &mut seeded(0)).is_err());
        let p = KestenParams { sigma: -1.0, ..p };
        assert!(p.validate().is_err());
    }

    #[test]
    fn omega_is_half_absolute_change() {
        let p = KestenParams::for_alpha(1.5, 0.2, 1.0).unwrap();
        let mut engine = KestenEngine::new(50, p, 3).unwrap();
        engine.run(20).unwrap();
        let before = engine.wealths();
        let omega = engine.accounts.omega;
        let d = engine.step().unwrap();
        let abs: f64 = engine.wealths().iter().zip(&before).map(|(a, b)| (a - b).abs()).sum();
        assert!((d.d_omega - abs / 2.0).abs() < 1e-12);
        assert_eq!(engine.accounts.omega, omega + d.d_omega);
        assert!(engine.accounts.ledger_consistent(&engine.agents));
    }
}
