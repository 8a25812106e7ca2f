//! Closed-form reward mathematics: pool rewards, solo rates, the max-delegate
//! rate, feasibility, per-agent rewards and the SPO gap/deficit/capacity.

use crate::error::{Error, Result};
use crate::model::{Action, StrategyProfile, RewardScheme};

/// Gap, deficit and capacity of one pool at a given delegation rate.
///
/// Either both bounds are finite with `deficit <= capacity`, or the pool can
/// never be made stable and the bounds are `(+inf, -inf)`. When the rate is
/// zero the capacity is `+inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoolBounds {
    pub gap: f64,
    pub deficit: f64,
    pub capacity: f64,
}

impl PoolBounds {
    pub const UNSTABLE: PoolBounds = PoolBounds {
        gap: f64::NAN,
        deficit: f64::INFINITY,
        capacity: f64::NEG_INFINITY,
    };

    pub fn is_attainable(&self) -> bool {
        self.deficit.is_finite()
    }

    pub fn contains(&self, external: f64) -> bool {
        self.deficit <= external && external <= self.capacity
    }

    /// The gap was non-positive and the deficit was clamped to zero.
    pub fn gap_clamped(&self) -> bool {
        self.deficit.is_finite() && self.gap <= 0.0
    }
}

/// Pivotal delegation stake and the per-unit delegation rate it induces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumContext {
    pub pivotal_stake: f64,
    pub rate: f64,
}

/// `ρ(λ, β) = a(λ') + b(λ')·β'` with `λ' = min(τ, λ)`, `β' = min(τ − λ', β)`.
pub fn pool_reward(scheme: &RewardScheme, pledge: f64, external: f64) -> f64 {
    let pledge = pledge.min(scheme.cap());
    let external = external.min(scheme.cap() - pledge);
    scheme.a(pledge) + scheme.b(pledge) * external
}

/// Per-unit reward of a solo pool, `(ρ(s, 0) − c) / s`.
pub fn alpha(scheme: &RewardScheme, stake: f64, cost: f64) -> Result<f64> {
    if !(stake > 0.0) {
        return Err(Error::Domain(format!("alpha needs positive stake, got {stake}")));
    }
    Ok(solo_rate(scheme, stake, cost))
}

pub(crate) fn solo_rate(scheme: &RewardScheme, stake: f64, cost: f64) -> f64 {
    (pool_reward(scheme, stake, 0.0) - cost) / stake
}

/// Rate for a given pivotal stake; zero when nobody delegates. Negative
/// solo rates are floored at zero since delegators are never charged.
pub fn rate_for_pivotal(scheme: &RewardScheme, pivotal_stake: f64) -> f64 {
    if pivotal_stake > 0.0 {
        solo_rate(scheme, pivotal_stake, scheme.c_min()).max(0.0)
    } else {
        0.0
    }
}

pub fn max_delegate_context(profile: &StrategyProfile, scheme: &RewardScheme) -> EquilibriumContext {
    let pivotal_stake = profile
        .types()
        .iter()
        .zip(profile.actions())
        .filter(|(_, a)| matches!(a, Action::Delegate(_)))
        .map(|(t, _)| t.stake)
        .fold(0.0, f64::max);
    EquilibriumContext {
        pivotal_stake,
        rate: rate_for_pivotal(scheme, pivotal_stake),
    }
}

/// A pool is feasible when its reward covers paying its whole stake at `rate`.
pub fn is_feasible(scheme: &RewardScheme, pledge: f64, external: f64, rate: f64) -> bool {
    pool_reward(scheme, pledge, external) >= (pledge + external) * rate
}

/// The SPO's stay margin `b(λ)·β' − r·β`, compared against the gap.
pub fn stay_margin(scheme: &RewardScheme, pledge: f64, external: f64, rate: f64) -> f64 {
    let pledge = pledge.min(scheme.cap());
    let capped = external.min(scheme.cap() - pledge);
    scheme.b(pledge) * capped - rate * external
}

/// `G = max{ε + c − a(λ), [r − α(λ, c_min)]⁺·λ + (c − c_min)}`.
pub fn spo_gap(scheme: &RewardScheme, pledge: f64, cost: f64, idle_utility: f64, rate: f64) -> f64 {
    debug_assert!(pledge > 0.0);
    let idle_branch = idle_utility + cost - pool_reward(scheme, pledge, 0.0);
    let shortfall = (rate - solo_rate(scheme, pledge, scheme.c_min())).max(0.0);
    let delegate_branch = shortfall * pledge + (cost - scheme.c_min());
    idle_branch.max(delegate_branch)
}

pub fn pool_bounds(
    scheme: &RewardScheme,
    pledge: f64,
    cost: f64,
    idle_utility: f64,
    rate: f64,
) -> Result<PoolBounds> {
    if !(pledge > 0.0 && pledge < scheme.cap()) {
        return Err(Error::Domain(format!(
            "pool bounds need a pledge in (0, {}), got {pledge}",
            scheme.cap()
        )));
    }
    if !(rate >= 0.0) {
        return Err(Error::Domain(format!("rate must be non-negative, got {rate}")));
    }
    let gap = spo_gap(scheme, pledge, cost, idle_utility, rate);
    let b = scheme.b(pledge);
    let room = scheme.cap() - pledge;
    if (b - rate) * room < gap {
        return Ok(PoolBounds { gap, ..PoolBounds::UNSTABLE });
    }
    // gap <= 0: the stay condition already holds with no delegation.
    let deficit = if gap > 0.0 { gap / (b - rate) } else { 0.0 };
    let capacity = if rate > 0.0 {
        (b * room - gap) / rate
    } else {
        f64::INFINITY
    };
    Ok(PoolBounds {
        gap,
        deficit,
        capacity,
    })
}

/// Rewards of every agent under one profile, sharing the pool aggregates.
pub struct ProfileEvaluation<'a> {
    profile: &'a StrategyProfile,
    scheme: &'a RewardScheme,
    context: EquilibriumContext,
    inbound: Vec<f64>,
}

impl<'a> ProfileEvaluation<'a> {
    pub fn new(profile: &'a StrategyProfile, scheme: &'a RewardScheme) -> Self {
        ProfileEvaluation {
            profile,
            scheme,
            context: max_delegate_context(profile, scheme),
            inbound: profile.inbound_delegation(),
        }
    }

    pub fn context(&self) -> EquilibriumContext {
        self.context
    }

    pub fn rate(&self) -> f64 {
        self.context.rate
    }

    /// External delegation of agent `j`'s pool (meaningful only if `j` is an SPO).
    pub fn external(&self, j: usize) -> f64 {
        self.inbound[j]
    }

    pub fn pledge(&self, j: usize) -> f64 {
        self.profile.types()[j].stake
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.profile.action(j).is_spo()
    }

    pub fn is_active_feasible(&self, j: usize) -> bool {
        self.is_active(j) && is_feasible(self.scheme, self.pledge(j), self.inbound[j], self.rate())
    }

    pub fn pool_reward(&self, j: usize) -> f64 {
        pool_reward(self.scheme, self.pledge(j), self.inbound[j])
    }

    /// Reward an agent earns from `amount` delegated to pool `j`.
    pub fn delegation_reward(&self, j: usize, amount: f64) -> f64 {
        if !self.is_active(j) {
            0.0
        } else if self.is_active_feasible(j) {
            self.rate() * amount
        } else {
            amount / (self.pledge(j) + self.inbound[j]) * self.pool_reward(j)
        }
    }

    pub fn reward(&self, agent: usize) -> f64 {
        let t = &self.profile.types()[agent];
        match self.profile.action(agent) {
            Action::Idle => t.idle_utility,
            Action::Spo => {
                let rho = self.pool_reward(agent);
                if self.is_active_feasible(agent) {
                    rho - self.rate() * self.inbound[agent]
                } else {
                    t.stake / (t.stake + self.inbound[agent]) * rho
                }
            }
            Action::Delegate(map) => map.iter().map(|(&j, &d)| self.delegation_reward(j, d)).sum(),
        }
    }

    pub fn utility(&self, agent: usize) -> f64 {
        let r = self.reward(agent);
        if self.profile.action(agent).is_spo() {
            r - self.profile.types()[agent].cost
        } else {
            r
        }
    }
}

fn check_agent(profile: &StrategyProfile, agent: usize) -> Result<()> {
    if agent >= profile.len() {
        return Err(Error::AgentOutOfRange {
            agent,
            n: profile.len(),
        });
    }
    Ok(())
}

pub fn agent_reward(profile: &StrategyProfile, scheme: &RewardScheme, agent: usize) -> Result<f64> {
    check_agent(profile, agent)?;
    Ok(ProfileEvaluation::new(profile, scheme).reward(agent))
}

pub fn agent_utility(profile: &StrategyProfile, scheme: &RewardScheme, agent: usize) -> Result<f64> {
    check_agent(profile, agent)?;
    Ok(ProfileEvaluation::new(profile, scheme).utility(agent))
}
