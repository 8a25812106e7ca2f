//! Threshold strategies, ex post stability, the pure Nash sufficiency check
//! and a brute deviation oracle used to cross-examine it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, PlayerType, RewardScheme, StrategyProfile};
use crate::rewards::{self, PoolBounds, ProfileEvaluation};
use crate::approx_ge;

/// `f(s, c, ε) = 1` iff `s >= θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStrategy {
    pub theta: f64,
}

impl ThresholdStrategy {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return Err(Error::Domain(format!("threshold must be non-negative, got {theta}")));
        }
        Ok(ThresholdStrategy { theta })
    }

    pub fn is_spo(&self, t: &PlayerType) -> bool {
        t.stake >= self.theta
    }
}

/// Agents the strategy makes SPOs, ascending.
pub fn apply_strategy(strategy: ThresholdStrategy, types: &[PlayerType]) -> Vec<usize> {
    (0..types.len()).filter(|&i| strategy.is_spo(&types[i])).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Idle,
    Delegator,
    Spo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    /// `0 < Def <= Del <= Cap`.
    Stable,
    /// Nobody operates a pool; all three totals are zero.
    StableDegenerate,
    Unstable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySummary {
    pub del: f64,
    pub def: f64,
    pub cap: f64,
    pub pivotal_stake: f64,
    pub rate: f64,
    /// True exactly when the inequality chain holds (never for the degenerate case).
    pub stable: bool,
    pub verdict: StabilityVerdict,
    /// SPO agent indices, ascending; `per_pool_bounds[k]` belongs to `spos[k]`.
    pub spos: Vec<usize>,
    pub per_pool_bounds: Vec<PoolBounds>,
    /// Role every agent takes in the profiles consistent with this summary.
    pub roles: Vec<Role>,
}

impl StabilitySummary {
    /// Stake held by idle agents, delegators and SPOs.
    pub fn stake_split(&self, types: &[PlayerType]) -> (f64, f64, f64) {
        let mut split = (0.0, 0.0, 0.0);
        for (t, role) in types.iter().zip(&self.roles) {
            match role {
                Role::Idle => split.0 += t.stake,
                Role::Delegator => split.1 += t.stake,
                Role::Spo => split.2 += t.stake,
            }
        }
        split
    }

    pub fn role_counts(&self) -> (usize, usize, usize) {
        let count = |r: Role| self.roles.iter().filter(|&&x| x == r).count();
        (count(Role::Idle), count(Role::Delegator), count(Role::Spo))
    }
}

/// Evaluates the ex post stability certificate `0 < Def(f) <= Del(f) <= Cap(f)`.
///
/// The pivotal stake is the largest stake among non-SPOs for which delegating
/// at their own solo rate beats idling; each agent is compared against its
/// own idle utility.
pub fn stability_summary(
    strategy: ThresholdStrategy,
    types: &[PlayerType],
    scheme: &RewardScheme,
) -> Result<StabilitySummary> {
    for (i, t) in types.iter().enumerate() {
        t.validate(i)?;
    }
    scheme.check_proper(types)?;
    let c_min = scheme.c_min();
    let spos = apply_strategy(strategy, types);

    let pivotal_stake = types
        .iter()
        .filter(|t| !strategy.is_spo(t))
        .filter(|t| rewards::solo_rate(scheme, t.stake, c_min) >= t.idle_utility / t.stake)
        .map(|t| t.stake)
        .fold(0.0, f64::max);
    let rate = rewards::rate_for_pivotal(scheme, pivotal_stake);

    if spos.is_empty() {
        return Ok(StabilitySummary {
            del: 0.0,
            def: 0.0,
            cap: 0.0,
            pivotal_stake,
            rate,
            stable: false,
            verdict: StabilityVerdict::StableDegenerate,
            spos,
            per_pool_bounds: Vec::new(),
            roles: vec![Role::Idle; types.len()],
        });
    }

    let roles: Vec<Role> = types
        .iter()
        .map(|t| {
            if strategy.is_spo(t) {
                Role::Spo
            } else if rate * t.stake >= t.idle_utility {
                Role::Delegator
            } else {
                Role::Idle
            }
        })
        .collect();
    let del = types
        .iter()
        .zip(&roles)
        .filter(|(_, r)| **r == Role::Delegator)
        .map(|(t, _)| t.stake)
        .sum::<f64>();

    let per_pool_bounds = spos
        .iter()
        .map(|&i| {
            let t = &types[i];
            rewards::pool_bounds(scheme, t.stake, t.cost, t.idle_utility, rate)
        })
        .collect::<Result<Vec<_>>>()?;
    let (def, cap) = if per_pool_bounds.iter().any(|b| !b.is_attainable()) {
        (f64::INFINITY, f64::NEG_INFINITY)
    } else {
        (
            per_pool_bounds.iter().map(|b| b.deficit).sum(),
            per_pool_bounds.iter().map(|b| b.capacity).sum(),
        )
    };
    let stable = 0.0 < def && def <= del && del <= cap;
    Ok(StabilitySummary {
        del,
        def,
        cap,
        pivotal_stake,
        rate,
        stable,
        verdict: if stable {
            StabilityVerdict::Stable
        } else {
            StabilityVerdict::Unstable
        },
        spos,
        per_pool_bounds,
        roles,
    })
}

/// Which sufficient condition an agent violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Delegation reaches an inactive or infeasible pool.
    DelegationTarget,
    /// An active agent earns less than its idle utility.
    IdleUtility,
    /// An idle agent would gain by delegating or opening a solo pool.
    IdleDeviation,
    /// An SPO's external delegation is below its deficit.
    Deficit,
    /// An SPO's external delegation exceeds its capacity.
    Capacity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub agent: usize,
    pub condition: Condition,
    /// Signed margin of the failed inequality; negative when violated.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PneVerdict {
    pub sufficient: bool,
    pub pivotal_stake: f64,
    pub rate: f64,
    pub violations: Vec<Violation>,
}

/// Checks the four sufficient conditions for a pure Nash equilibrium.
///
/// An idle agent's alternative is the better of delegating (at the rate its
/// own stake would induce) and opening a solo pool; delegation pays nothing
/// when no active feasible pool exists.
pub fn check_pne_sufficient(profile: &StrategyProfile, scheme: &RewardScheme) -> PneVerdict {
    let ev = ProfileEvaluation::new(profile, scheme);
    let ctx = ev.context();
    let types = profile.types();
    let mut violations = Vec::new();
    let any_feasible = (0..profile.len()).any(|j| ev.is_active_feasible(j));

    for (i, t) in types.iter().enumerate() {
        let action = profile.action(i);
        if let Action::Delegate(map) = action {
            for (&j, &d) in map {
                if d > 0.0 && !ev.is_active_feasible(j) {
                    violations.push(Violation {
                        agent: i,
                        condition: Condition::DelegationTarget,
                        slack: -d,
                    });
                }
            }
        }
        if action.is_idle() {
            let delegating = if any_feasible {
                rewards::rate_for_pivotal(scheme, t.stake.max(ctx.pivotal_stake)) * t.stake
            } else {
                0.0
            };
            let solo = rewards::solo_rate(scheme, t.stake, t.cost) * t.stake;
            let best = delegating.max(solo);
            if !approx_ge(t.idle_utility, best) {
                violations.push(Violation {
                    agent: i,
                    condition: Condition::IdleDeviation,
                    slack: t.idle_utility - best,
                });
            }
            continue;
        }
        let u = ev.utility(i);
        if !approx_ge(u, t.idle_utility) {
            violations.push(Violation {
                agent: i,
                condition: Condition::IdleUtility,
                slack: u - t.idle_utility,
            });
        }
        if action.is_spo() && t.stake < scheme.cap() {
            let beta = ev.external(i);
            let bounds = rewards::pool_bounds(scheme, t.stake, t.cost, t.idle_utility, ctx.rate)
                .expect("pledge checked to lie below the cap");
            if !approx_ge(beta, bounds.deficit) {
                violations.push(Violation {
                    agent: i,
                    condition: Condition::Deficit,
                    slack: beta - bounds.deficit,
                });
            }
            if !approx_ge(bounds.capacity, beta) {
                violations.push(Violation {
                    agent: i,
                    condition: Condition::Capacity,
                    slack: bounds.capacity - beta,
                });
            }
        }
    }
    PneVerdict {
        sufficient: violations.is_empty(),
        pivotal_stake: ctx.pivotal_stake,
        rate: ctx.rate,
        violations,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    Idle,
    SoloPool,
    DelegateTo(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    pub current: f64,
    pub best: f64,
    pub best_deviation: Option<Deviation>,
}

impl DeviationReport {
    pub fn improvement(&self) -> f64 {
        self.best - self.current
    }
}

/// Utility of every structured unilateral deviation of `agent`, evaluated by
/// rebuilding the profile and recomputing rates and feasibility from scratch.
///
/// The family is: go idle, run a pool (for a sitting SPO, the solo value
/// `α(λ, c)·λ` of shedding all delegation), and delegate the whole stake to
/// any one currently active pool.
pub fn deviation_oracle(
    profile: &StrategyProfile,
    scheme: &RewardScheme,
    agent: usize,
) -> Result<DeviationReport> {
    let current = rewards::agent_utility(profile, scheme, agent)?;
    let t = profile.types()[agent];
    let mut options: Vec<(Deviation, f64)> = Vec::new();

    if !profile.action(agent).is_idle() {
        options.push((Deviation::Idle, t.idle_utility));
    }
    let solo = if profile.action(agent).is_spo() {
        rewards::solo_rate(scheme, t.stake, t.cost) * t.stake
    } else {
        let dev = profile.with_action(agent, Action::Spo)?;
        rewards::agent_utility(&dev, scheme, agent)?
    };
    options.push((Deviation::SoloPool, solo));

    for j in profile.spo_indices() {
        if j == agent {
            continue;
        }
        let action = Action::delegate_all(j, t.stake);
        if *profile.action(agent) == action {
            continue;
        }
        let dev = profile.with_action(agent, action)?;
        options.push((Deviation::DelegateTo(j), rewards::agent_utility(&dev, scheme, agent)?));
    }

    let best = options
        .iter()
        .copied()
        .fold(None::<(Deviation, f64)>, |acc, (d, u)| match acc {
            Some((_, bu)) if bu >= u => acc,
            _ => Some((d, u)),
        });
    Ok(DeviationReport {
        current,
        best: best.map_or(f64::NEG_INFINITY, |b| b.1),
        best_deviation: best.map(|b| b.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::pool_bounds;
    use approx::assert_relative_eq;

    fn ty(stake: f64) -> PlayerType {
        PlayerType::new(stake, 0.5, 0.01).unwrap()
    }

    fn four() -> Vec<PlayerType> {
        vec![ty(1.0), ty(29.9), ty(30.0), ty(90.0)]
    }

    #[test]
    fn apply_strategy_boundaries() {
        let types = four();
        assert_eq!(apply_strategy(ThresholdStrategy { theta: 30.0 }, &types), vec![2, 3]);
        assert_eq!(apply_strategy(ThresholdStrategy { theta: 0.0 }, &types), vec![0, 1, 2, 3]);
        assert!(apply_strategy(ThresholdStrategy { theta: 91.0 }, &types).is_empty());
    }

    #[test]
    fn four_agent_summary() {
        let s = RewardScheme::baseline();
        let sum = stability_summary(ThresholdStrategy { theta: 30.0 }, &four(), &s).unwrap();
        let r = 29.5 / 29.9;
        assert_eq!(sum.pivotal_stake, 29.9);
        assert_relative_eq!(sum.rate, r, max_relative = 1e-12);
        assert_relative_eq!(sum.del, 30.9, max_relative = 1e-12);
        let d30 = 0.1 / (30.0 - r);
        let d90 = 0.1 / (90.0 - r);
        assert_relative_eq!(sum.def, d30 + d90, max_relative = 1e-9);
        assert_relative_eq!(d30, 0.003_446_7, max_relative = 1e-4);
        assert_relative_eq!(d90, 0.001_123_5, max_relative = 1e-4);
        assert_relative_eq!(sum.def, 0.004_570_2, max_relative = 1e-4);
        let cap = (170.0 * 30.0 - 0.1) / r + (110.0 * 90.0 - 0.1) / r;
        assert_relative_eq!(sum.cap, cap, max_relative = 1e-9);
        assert!(sum.stable);
        assert_eq!(sum.verdict, StabilityVerdict::Stable);
        assert_eq!(sum.roles, vec![Role::Delegator, Role::Delegator, Role::Spo, Role::Spo]);
    }

    #[test]
    fn no_spos_is_degenerate() {
        let s = RewardScheme::baseline();
        let sum = stability_summary(ThresholdStrategy { theta: 100.0 }, &four(), &s).unwrap();
        assert_eq!((sum.del, sum.def, sum.cap), (0.0, 0.0, 0.0));
        assert_eq!(sum.verdict, StabilityVerdict::StableDegenerate);
        assert!(!sum.stable);
    }

    #[test]
    fn nobody_wants_to_delegate() {
        let s = RewardScheme::baseline();
        let types = vec![
            PlayerType::new(1.0, 0.5, 5.0).unwrap(),
            PlayerType::new(2.0, 0.5, 5.0).unwrap(),
            PlayerType::new(50.0, 0.5, 5.0).unwrap(),
        ];
        let sum = stability_summary(ThresholdStrategy { theta: 30.0 }, &types, &s).unwrap();
        assert_eq!(sum.rate, 0.0);
        assert_eq!(sum.del, 0.0);
        assert!(sum.def > 0.0);
        assert_eq!(sum.verdict, StabilityVerdict::Unstable);
    }

    #[test]
    fn improper_population_is_rejected() {
        let s = RewardScheme::baseline();
        let err = stability_summary(ThresholdStrategy { theta: 30.0 }, &[ty(250.0)], &s).unwrap_err();
        assert!(matches!(err, Error::Improper(_)));
    }

    fn four_agent_profile(to_pool2: f64) -> StrategyProfile {
        // agents 0 (stake 1) and 1 (stake 29.9) delegate 30.9 in total
        let rest = 30.9 - to_pool2;
        let a0 = if to_pool2 >= 1.0 {
            Action::delegate_all(2, 1.0)
        } else {
            Action::Delegate([(2, to_pool2), (3, 1.0 - to_pool2)].into())
        };
        let a1 = if to_pool2 >= 1.0 {
            Action::Delegate([(2, to_pool2 - 1.0), (3, rest)].into())
        } else {
            Action::delegate_all(3, 29.9)
        };
        StrategyProfile::new(four(), vec![a0, a1, Action::Spo, Action::Spo]).unwrap()
    }

    #[test]
    fn four_agent_profile_is_sufficient() {
        let s = RewardScheme::baseline();
        let p = four_agent_profile(0.003_447_2 + 0.01);
        let v = check_pne_sufficient(&p, &s);
        assert!(v.sufficient, "{:?}", v.violations);
        for i in 0..4 {
            let d = deviation_oracle(&p, &s, i).unwrap();
            assert!(d.improvement() <= 1e-9, "agent {i}: {d:?}");
        }
    }

    #[test]
    fn capacity_violation_is_reported() {
        // τ = 31 leaves one unit of room, so capacity ≈ 30.3 < 30.9.
        let s = RewardScheme::baseline().with_cap(31.0).unwrap();
        let p = StrategyProfile::new(
            four()[..3].to_vec(),
            vec![Action::delegate_all(2, 1.0), Action::delegate_all(2, 29.9), Action::Spo],
        )
        .unwrap();
        let r = 29.5 / 29.9;
        let cap2 = pool_bounds(&s, 30.0, 0.5, 0.01, r).unwrap().capacity;
        assert_relative_eq!(cap2, (30.0 - 0.1) / r, max_relative = 1e-12);
        assert!(cap2 < 30.9);
        let v = check_pne_sufficient(&p, &s);
        assert!(!v.sufficient);
        let hit = v
            .violations
            .iter()
            .find(|x| x.agent == 2 && x.condition == Condition::Capacity)
            .expect("capacity violation for agent 2");
        assert_relative_eq!(hit.slack, cap2 - 30.9, max_relative = 1e-9);
    }

    #[test]
    fn all_idle_small_players_is_sufficient() {
        // Nobody can profit from a solo pool: a(s) - c < ε for all.
        let s = RewardScheme::baseline();
        let types = vec![
            PlayerType::new(1.0, 0.9, 0.2).unwrap(),
            PlayerType::new(1.05, 0.9, 0.2).unwrap(),
        ];
        let p = StrategyProfile::all_idle(types).unwrap();
        assert!(check_pne_sufficient(&p, &s).sufficient);
    }

    #[test]
    fn all_idle_with_profitable_solo_pool_is_flagged() {
        let s = RewardScheme::baseline();
        let p = StrategyProfile::all_idle(four()).unwrap();
        let v = check_pne_sufficient(&p, &s);
        assert!(!v.sufficient);
        assert!(v.violations.iter().all(|x| x.condition == Condition::IdleDeviation));
        let d = deviation_oracle(&p, &s, 3).unwrap();
        assert_eq!(d.best_deviation, Some(Deviation::SoloPool));
        assert!(d.improvement() > 0.0);
    }

    #[test]
    fn delegation_to_inactive_pool_violates_target_condition() {
        let s = RewardScheme::baseline();
        let p = StrategyProfile::new(
            four(),
            vec![
                Action::delegate_all(1, 1.0),
                Action::delegate_all(3, 29.9),
                Action::Spo,
                Action::Spo,
            ],
        )
        .unwrap();
        let v = check_pne_sufficient(&p, &s);
        assert!(v
            .violations
            .iter()
            .any(|x| x.agent == 0 && x.condition == Condition::DelegationTarget));
    }

    #[test]
    fn oracle_delegate_values() {
        let s = RewardScheme::baseline();
        let types = vec![
            PlayerType::new(10.0, 0.5, 50.0).unwrap(),
            PlayerType::new(5.0, 0.5, 0.01).unwrap(),
            PlayerType::new(20.0, 0.5, 50.0).unwrap(),
            PlayerType::new(60.0, 0.5, 0.01).unwrap(),
        ];
        let p = StrategyProfile::new(
            types,
            vec![Action::Idle, Action::delegate_all(3, 5.0), Action::Idle, Action::Spo],
        )
        .unwrap();
        // idle agent above the pivotal stake becomes pivotal when delegating
        let d0 = deviation_oracle(&p, &s, 0).unwrap();
        assert_eq!(d0.best_deviation, Some(Deviation::DelegateTo(3)));
        assert_relative_eq!(d0.best, 9.6, max_relative = 1e-12);
        // lone SPO: no other pool to join, so the solo value is the best alternative
        let d3 = deviation_oracle(&p, &s, 3).unwrap();
        assert_eq!(d3.best_deviation, Some(Deviation::SoloPool));
        assert_relative_eq!(d3.best, 59.5, max_relative = 1e-12);
        assert_relative_eq!(d3.current, 360.0 - 0.92 * 5.0 - 0.5, max_relative = 1e-12);
    }

    #[test]
    fn oracle_idle_below_pivotal_earns_rate() {
        let s = RewardScheme::baseline();
        let types = vec![
            PlayerType::new(2.0, 0.5, 50.0).unwrap(),
            PlayerType::new(5.0, 0.5, 0.01).unwrap(),
            PlayerType::new(60.0, 0.5, 0.01).unwrap(),
        ];
        let p = StrategyProfile::new(types, vec![Action::Idle, Action::delegate_all(2, 5.0), Action::Spo]).unwrap();
        let d = deviation_oracle(&p, &s, 0).unwrap();
        let delegate: f64 = (4.6 / 5.0) * 2.0;
        assert_relative_eq!(d.best, delegate.max(1.5), max_relative = 1e-12);
    }
}
