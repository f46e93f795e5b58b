//! Stochastic engines: the reflected multiplicative (Kesten) process, the
//! networked pairwise exchange, the government channel acting on a subsystem,
//! and the coupling of two economies.

mod exchange;
mod kesten;
mod sampler;
mod thermal;

pub use exchange::{
    exchange_step, government_step, Economy, ExchangeOutcome, ExchangeParams, GovernmentChannel,
    LinkSampling, MoneyLegRule, Redistribution, MAX_RESAMPLES,
};
pub use kesten::{kesten_step, target_alpha_to_drift, KestenDelta, KestenEngine, KestenParams};
pub use sampler::LinkSampler;
pub use thermal::{thermalize, CoupledEconomies, ThermalPoint, ThermalRun, ThermalizeParams};
