use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::PlayerType;

/// Bounded Pareto stakes on `[L, H]`, uniform costs and idle utilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDistribution {
    /// Lower stake bound. Stakes are normalized so this is 1.
    #[serde(default = "one")]
    pub pareto_l: f64,
    pub pareto_h: f64,
    pub gamma: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    pub eps_min: f64,
    pub eps_max: f64,
}

fn one() -> f64 {
    1.0
}

impl TypeDistribution {
    /// `H = 100`, `γ = 1.5`, costs in `[0.4, 0.6]`, every `ε = 0.01`.
    pub fn baseline() -> Self {
        TypeDistribution {
            pareto_l: 1.0,
            pareto_h: 100.0,
            gamma: 1.5,
            cost_min: 0.4,
            cost_max: 0.6,
            eps_min: 0.01,
            eps_max: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pareto_l != 1.0 {
            return Err(Error::config("dist.pareto_l", "stakes are normalized to L = 1"));
        }
        if !(self.pareto_h.is_finite() && self.pareto_h > self.pareto_l) {
            return Err(Error::config("dist.pareto_h", "must be finite and above pareto_l"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::config("dist.gamma", "must be positive"));
        }
        if !(self.cost_min.is_finite() && self.cost_min >= 0.0 && self.cost_max.is_finite()) {
            return Err(Error::config("dist.cost_min", "costs must be finite and non-negative"));
        }
        if self.cost_min > self.cost_max {
            return Err(Error::config("dist.cost_max", "must be at least cost_min"));
        }
        if !(self.eps_min.is_finite() && self.eps_min > 0.0 && self.eps_max.is_finite()) {
            return Err(Error::config("dist.eps_min", "idle utilities must be positive and finite"));
        }
        if self.eps_min > self.eps_max {
            return Err(Error::config("dist.eps_max", "must be at least eps_min"));
        }
        Ok(())
    }

    /// Analytic mean of the stake distribution.
    pub fn mean_stake(&self) -> f64 {
        let (l, h, g) = (self.pareto_l, self.pareto_h, self.gamma);
        let norm = 1.0 - (l / h).powf(g);
        if (g - 1.0).abs() < 1e-12 {
            l * (h / l).ln() / norm
        } else {
            g / (g - 1.0) * (l.powf(1.0 - g) - h.powf(1.0 - g)) * l.powf(g) / norm
        }
    }
}

/// Inverse CDF of the bounded Pareto distribution, `u ∈ [0, 1]`.
pub fn sample_pareto(dist: &TypeDistribution, u: f64) -> f64 {
    let (l, h, g) = (dist.pareto_l, dist.pareto_h, dist.gamma);
    if u >= 1.0 {
        return h;
    }
    let x = l * (1.0 - u * (1.0 - (l / h).powf(g))).powf(-1.0 / g);
    x.clamp(l, h)
}

/// Independent random streams within one draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Stake = 0,
    Cost = 1,
    IdleUtility = 2,
}

/// ChaCha stream keyed by the master seed, addressed by `(draw, stream)`.
fn stream_rng(master_seed: u64, draw: u64, stream: Stream) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(draw.wrapping_mul(4).wrapping_add(stream as u64));
    rng
}

fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// The population of one draw. Depends only on the master seed, the draw
/// index and the distribution.
pub fn sample_population(config: &ExperimentConfig, draw: u64) -> Result<Vec<PlayerType>> {
    let dist = &config.dist;
    let mut stakes = stream_rng(config.master_seed, draw, Stream::Stake);
    let mut costs = stream_rng(config.master_seed, draw, Stream::Cost);
    let mut eps = stream_rng(config.master_seed, draw, Stream::IdleUtility);
    (0..config.n)
        .map(|_| {
            let stake = sample_pareto(dist, stakes.random::<f64>());
            let cost = uniform(&mut costs, dist.cost_min, dist.cost_max);
            let idle = uniform(&mut eps, dist.eps_min, dist.eps_max);
            PlayerType::new(stake, cost, idle)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_cdf_values() {
        let d = TypeDistribution::baseline();
        assert_eq!(sample_pareto(&d, 0.0), 1.0);
        assert_eq!(sample_pareto(&d, 1.0), 100.0);
        assert_relative_eq!(sample_pareto(&d, 1.0 - f64::EPSILON), 100.0, max_relative = 1e-9);
        assert_relative_eq!(sample_pareto(&d, 0.5), 0.5005_f64.powf(-2.0 / 3.0), max_relative = 1e-12);
        assert_relative_eq!(sample_pareto(&d, 0.5), 1.5863, max_relative = 1e-4);
    }

    #[test]
    fn analytic_mean() {
        let d = TypeDistribution::baseline();
        assert_relative_eq!(d.mean_stake(), 3.0 * 0.9 / 0.999, max_relative = 1e-12);
        assert_relative_eq!(d.mean_stake(), 2.7027, max_relative = 1e-4);
    }

    #[test]
    fn populations_are_reproducible_and_draws_differ() {
        let c = ExperimentConfig {
            n: 50,
            ..super::super::baseline_config()
        };
        let a = sample_population(&c, 3).unwrap();
        assert_eq!(a, sample_population(&c, 3).unwrap());
        assert_ne!(a, sample_population(&c, 4).unwrap());
        assert!(a.iter().all(|t| t.idle_utility == 0.01));
        assert!(a.iter().all(|t| (0.4..=0.6).contains(&t.cost)));
        assert!(a.iter().all(|t| (1.0..=100.0).contains(&t.stake)));
    }

    #[test]
    fn streams_are_independent_of_population_size() {
        let small = ExperimentConfig {
            n: 10,
            ..super::super::baseline_config()
        };
        let big = ExperimentConfig {
            n: 20,
            ..super::super::baseline_config()
        };
        let a = sample_population(&small, 7).unwrap();
        let b = sample_population(&big, 7).unwrap();
        assert_eq!(a[..], b[..10]);
    }

    #[test]
    fn invalid_distributions() {
        let bad = TypeDistribution {
            pareto_h: 1.0,
            ..TypeDistribution::baseline()
        };
        assert!(bad.validate().is_err());
        let bad = TypeDistribution {
            gamma: 0.0,
            ..TypeDistribution::baseline()
        };
        assert!(bad.validate().is_err());
        let bad = TypeDistribution {
            eps_min: 0.2,
            eps_max: 0.1,
            ..TypeDistribution::baseline()
        };
        assert!(bad.validate().is_err());
    }
}
