use rand::Rng;
use serde::{Deserialize, Serialize};

use super::exchange::{Economy, ExchangeParams};
use crate::error::{Error, Result};
use crate::inference::{alpha_from_accounting, AccountingAlpha};
use crate::model::{gini, Subsystem};
use crate::netgen::WeightedNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalizeParams {
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Cross-system exchanges per step.
    pub coupling: usize,
    pub steps: u64,
    /// Steps per accounting window.
    pub stride: u64,
}

/// Accounting exponents of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub step: u64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub alpha_union: f64,
    /// Joint gross product and total wealth at the end of the window.
    pub omega: f64,
    pub lambda: f64,
    pub gini_union: f64,
}

/// Two economies joined by random cross-links. Agents of `a` are tagged
/// [`Subsystem::Core`], agents of `b` [`Subsystem::External`]; cross-link ids
/// in `bridge` put `b`'s agents after `a`'s.
#[derive(Debug, Clone)]
pub struct CoupledEconomies {
    pub a: Economy,
    pub b: Economy,
    pub bridge: WeightedNetwork,
}

#[derive(Debug, Clone, Copy, Default)]
struct Window {
    lambda: [f64; 2],
    omega: [f64; 2],
}

impl CoupledEconomies {
    pub fn new(mut a: Economy, mut b: Economy) -> Self {
        for ag in &mut a.agents {
            ag.subsystem = Subsystem::Core;
        }
        for ag in &mut b.agents {
            ag.subsystem = Subsystem::External;
        }
        let bridge = WeightedNetwork::empty(a.agents.len() + b.agents.len());
        Self { a, b, bridge }
    }

    fn cross_exchange<R: Rng + ?Sized>(
        &mut self,
        gamma: f64,
        params: &ExchangeParams,
        rng: &mut R,
        window: &mut Window,
    ) -> Result<()> {
        let na = self.a.agents.len();
        let i = rng.random_range(0..na);
        let j = rng.random_range(0..self.b.agents.len());
        let e = self.bridge.add_edge(i, na + j)?;
        let a_pays = rng.random::<bool>();
        let payer_wealth = if a_pays { self.a.wealth(i) } else { self.b.wealth(j) };
        let m = match params.rule {
            super::MoneyLegRule::FixedFraction => params.f * payer_wealth,
            super::MoneyLegRule::UniformFraction => rng.random::<f64>() * params.f * payer_wealth,
        };
        let (payer_econ, payer, recv_econ, receiver, k) = if a_pays {
            (&mut self.a, i, &mut self.b, j, 0)
        } else {
            (&mut self.b, j, &mut self.a, i, 1)
        };
        let loss = (1.0 - gamma) * m;
        payer_econ.agents[payer].wealth -= loss;
        payer_econ.accounts.lambda -= loss;
        payer_econ.accounts.omega += 0.5 * m;
        recv_econ.agents[receiver].wealth += m;
        recv_econ.accounts.lambda += m;
        recv_econ.accounts.omega += 0.5 * m;
        self.bridge.add_weight(e, m);
        window.lambda[k] -= loss;
        window.lambda[1 - k] += m;
        window.omega[0] += 0.5 * m;
        window.omega[1] += 0.5 * m;
        Ok(())
    }

    fn step<R: Rng + ?Sized>(
        &mut self,
        p: &ThermalizeParams,
        params: &ExchangeParams,
        rng: &mut R,
        window: &mut Window,
    ) -> Result<()> {
        let pa = ExchangeParams { gamma: p.gamma_a, ..*params };
        let pb = ExchangeParams { gamma: p.gamma_b, ..*params };
        let oa = self.a.step(&pa, None, rng)?;
        window.lambda[0] += oa.d_lambda;
        window.omega[0] += oa.d_omega;
        let ob = self.b.step(&pb, None, rng)?;
        window.lambda[1] += ob.d_lambda;
        window.omega[1] += ob.d_omega;
        let cross_gamma = 0.5 * (p.gamma_a + p.gamma_b);
        for _ in 0..p.coupling {
            self.cross_exchange(cross_gamma, params, rng, window)?;
        }
        Ok(())
    }

    pub fn wealths(&self) -> Vec<f64> {
        let mut w = self.a.wealths();
        w.extend(self.b.wealths());
        w
    }
}

/// Result of [`thermalize`]: per-window exponents and the exponents over the
/// second half of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalRun {
    pub points: Vec<ThermalPoint>,
    pub final_a: AccountingAlpha,
    pub final_b: AccountingAlpha,
    pub final_union: AccountingAlpha,
}

/// Joins two burned-in economies and runs them with `coupling` cross-link
/// exchanges per step. Internal links keep each side's `gamma`; cross-links
/// use the mean of the two.
pub fn thermalize<R: Rng + ?Sized>(
    system: &mut CoupledEconomies,
    p: &ThermalizeParams,
    params: &ExchangeParams,
    rng: &mut R,
) -> Result<ThermalRun> {
    if p.coupling == 0 {
        return Err(Error::parameter("coupling must be at least one cross-link per step"));
    }
    if p.stride == 0 || p.steps < 4 * p.stride {
        return Err(Error::parameter("thermalization needs at least four windows"));
    }
    let mut windows: Vec<Window> = Vec::new();
    let mut points = Vec::new();
    let mut current = Window::default();
    for t in 1..=p.steps {
        system.step(p, params, rng, &mut current)?;
        if t % p.stride == 0 {
            let ratio = |l: f64, o: f64| 1.0 + l / o;
            points.push(ThermalPoint {
                step: t,
                alpha_a: ratio(current.lambda[0], current.omega[0]),
                alpha_b: ratio(current.lambda[1], current.omega[1]),
                alpha_union: ratio(
                    current.lambda[0] + current.lambda[1],
                    current.omega[0] + current.omega[1],
                ),
                omega: system.a.accounts.omega + system.b.accounts.omega,
                lambda: system.a.accounts.lambda + system.b.accounts.lambda,
                gini_union: gini(&system.wealths())?,
            });
            windows.push(current);
            current = Window::default();
        }
    }
    let tail = &windows[windows.len() / 2..];
    let side = |k: usize| tail.iter().map(|w| (w.lambda[k], w.omega[k])).collect::<Vec<_>>();
    let union: Vec<(f64, f64)> = tail
        .iter()
        .map(|w| (w.lambda[0] + w.lambda[1], w.omega[0] + w.omega[1]))
        .collect();
    Ok(ThermalRun {
        points,
        final_a: alpha_from_accounting(&side(0))?,
        final_b: alpha_from_accounting(&side(1))?,
        final_union: alpha_from_accounting(&union)?,
    })
}
