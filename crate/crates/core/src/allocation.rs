//! Reference pledges and the greedy delegation allocator used to construct
//! representative equilibria.

use std::collections::BTreeMap;

use crate::equilibrium::{stability_summary, Role, StabilitySummary, StabilityVerdict, ThresholdStrategy};
use crate::error::{Error, Result};
use crate::model::{Action, PlayerType, RewardScheme, StrategyProfile};
use crate::REL_TOL;

/// Evenly spaced pledges from `λ_min` to `λ_max` inclusive.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePledges(Vec<f64>);

impl ReferencePledges {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `λ̄_j = λ_min + (j − 1)(λ_max − λ_min)/(m − 1)`; a single point is `λ_min`.
pub fn reference_pledges(lambda_min: f64, lambda_max: f64, m: usize) -> Result<ReferencePledges> {
    if m == 0 {
        return Err(Error::Domain("need at least one reference pledge".into()));
    }
    if !(lambda_min <= lambda_max) {
        return Err(Error::Domain(format!(
            "lambda_min {lambda_min} exceeds lambda_max {lambda_max}"
        )));
    }
    if m == 1 {
        return Ok(ReferencePledges(vec![lambda_min]));
    }
    let step = (lambda_max - lambda_min) / (m - 1) as f64;
    let mut values: Vec<f64> = (0..m).map(|j| lambda_min + j as f64 * step).collect();
    values[m - 1] = lambda_max;
    Ok(ReferencePledges(values))
}

/// Greedy delegation allocation.
///
/// Seeds every pool at its deficit, then pours the remaining stake into the
/// pool whose pledge is nearest `reference` (lowest index on ties), filling
/// each to capacity before moving on.
pub fn greedy_delegation(
    reference: f64,
    deficits: &[f64],
    capacities: &[f64],
    pledges: &[f64],
    total: f64,
) -> Result<Vec<f64>> {
    let k = pledges.len();
    if deficits.len() != k || capacities.len() != k {
        return Err(Error::Domain(format!(
            "length mismatch: {} deficits, {} capacities, {} pledges",
            deficits.len(),
            capacities.len(),
            k
        )));
    }
    if deficits.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("deficits must be finite".into()));
    }
    // Only finite stake is ever assigned, so infinite capacities act as `total`.
    let capacities: Vec<f64> = capacities.iter().map(|&c| c.min(total)).collect();
    let lo: f64 = deficits.iter().sum();
    let hi: f64 = capacities.iter().sum();
    let slack = REL_TOL * total.abs().max(1.0);
    if total < lo - slack || total > hi + slack || deficits.iter().zip(&capacities).any(|(d, c)| d > c) {
        return Err(Error::InfeasibleAllocation { total, min: lo, max: hi });
    }

    let mut beta = deficits.to_vec();
    let mut remaining = total - lo;
    for _ in 0..k {
        if remaining <= 0.0 {
            break;
        }
        let target = (0..k)
            .filter(|&i| beta[i] < capacities[i])
            .min_by(|&i, &j| {
                let (di, dj) = ((pledges[i] - reference).abs(), (pledges[j] - reference).abs());
                di.total_cmp(&dj).then(i.cmp(&j))
            });
        let Some(j) = target else { break };
        let room = capacities[j] - beta[j];
        if remaining <= room {
            beta[j] += remaining;
            remaining = 0.0;
        } else {
            beta[j] = capacities[j];
            remaining -= room;
        }
    }
    if remaining > slack {
        return Err(Error::Invariant(format!(
            "greedy allocation left {remaining} stake unassigned"
        )));
    }
    Ok(beta)
}

/// Builds the representative equilibrium for one reference pledge.
pub fn build_representative_pne(
    strategy: ThresholdStrategy,
    types: &[PlayerType],
    scheme: &RewardScheme,
    reference: f64,
) -> Result<StrategyProfile> {
    let summary = stability_summary(strategy, types, scheme)?;
    representative_from_summary(&summary, types, reference)
}

/// Same as [`build_representative_pne`] but reuses a computed summary.
///
/// Delegators are assigned to pools by water-filling: both in ascending agent
/// index, each pool taking stake until its allocated total is reached. With
/// no SPOs at all the profile is everyone idle.
pub fn representative_from_summary(
    summary: &StabilitySummary,
    types: &[PlayerType],
    reference: f64,
) -> Result<StrategyProfile> {
    match summary.verdict {
        StabilityVerdict::StableDegenerate => return StrategyProfile::all_idle(types.to_vec()),
        StabilityVerdict::Unstable => return Err(Error::Unstable),
        StabilityVerdict::Stable => {}
    }
    let pledges: Vec<f64> = summary.spos.iter().map(|&i| types[i].stake).collect();
    let deficits: Vec<f64> = summary.per_pool_bounds.iter().map(|b| b.deficit).collect();
    let capacities: Vec<f64> = summary.per_pool_bounds.iter().map(|b| b.capacity).collect();
    let beta = greedy_delegation(reference, &deficits, &capacities, &pledges, summary.del)?;

    let mut actions: Vec<Action> = summary
        .roles
        .iter()
        .map(|r| match r {
            Role::Spo => Action::Spo,
            _ => Action::Idle,
        })
        .collect();

    let mut pool = 0;
    let mut pool_left = beta.first().copied().unwrap_or(0.0);
    let last_pool = beta.iter().rposition(|&b| b > 0.0);
    for (i, t) in types.iter().enumerate() {
        if summary.roles[i] != Role::Delegator {
            continue;
        }
        let mut map = BTreeMap::new();
        let mut left = t.stake;
        while left > 0.0 {
            while pool < beta.len() && pool_left <= 0.0 {
                pool += 1;
                pool_left = beta.get(pool).copied().unwrap_or(0.0);
            }
            if pool >= beta.len() {
                // rounding residue: top up the last pool that received stake
                let j = last_pool.ok_or_else(|| Error::Invariant("no pool to delegate to".into()))?;
                *map.entry(summary.spos[j]).or_insert(0.0) += left;
                break;
            }
            let take = left.min(pool_left);
            *map.entry(summary.spos[pool]).or_insert(0.0) += take;
            left -= take;
            pool_left -= take;
            if pool_left <= 0.0 {
                pool += 1;
                pool_left = beta.get(pool).copied().unwrap_or(0.0);
            }
        }
        actions[i] = Action::Delegate(map);
    }
    StrategyProfile::new(types.to_vec(), actions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::check_pne_sufficient;
    use crate::model::reduce_profile;

    #[test]
    fn grid() {
        assert_eq!(reference_pledges(30.0, 90.0, 4).unwrap().values(), &[30.0, 50.0, 70.0, 90.0]);
        assert_eq!(reference_pledges(5.0, 5.0, 3).unwrap().values(), &[5.0, 5.0, 5.0]);
        assert_eq!(reference_pledges(5.0, 9.0, 1).unwrap().values(), &[5.0]);
        assert!(reference_pledges(5.0, 9.0, 0).is_err());
        assert!(reference_pledges(9.0, 5.0, 2).is_err());
        let g = reference_pledges(30.0, 99.0, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.values()[99], 99.0);
    }

    #[test]
    fn greedy_traces() {
        let b = greedy_delegation(60.0, &[1.0, 1.0], &[10.0, 10.0], &[30.0, 60.0], 8.0).unwrap();
        assert_eq!(b, vec![1.0, 7.0]);
        let b = greedy_delegation(60.0, &[1.0, 2.0], &[10.0, 10.0], &[30.0, 60.0], 3.0).unwrap();
        assert_eq!(b, vec![1.0, 2.0]);
        let b = greedy_delegation(60.0, &[0.0, 0.0], &[5.0, 5.0], &[50.0, 70.0], 6.0).unwrap();
        assert_eq!(b, vec![5.0, 1.0]);
    }

    #[test]
    fn greedy_spills_over_in_distance_order() {
        let b = greedy_delegation(60.0, &[1.0, 1.0, 1.0], &[4.0, 5.0, 6.0], &[10.0, 58.0, 65.0], 12.0).unwrap();
        assert_eq!(b, vec![1.0, 5.0, 6.0]);
    }

    #[test]
    fn greedy_rejects_out_of_range_totals() {
        let e = greedy_delegation(0.0, &[1.0], &[2.0], &[1.0], 0.5).unwrap_err();
        assert!(matches!(e, Error::InfeasibleAllocation { .. }));
        let e = greedy_delegation(0.0, &[1.0], &[2.0], &[1.0], 2.5).unwrap_err();
        assert!(matches!(e, Error::InfeasibleAllocation { .. }));
        assert!(greedy_delegation(0.0, &[f64::INFINITY], &[2.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn infinite_capacity_is_clamped() {
        let b = greedy_delegation(0.0, &[1.0, 1.0], &[f64::INFINITY, 3.0], &[1.0, 2.0], 7.0).unwrap();
        assert_eq!(b, vec![6.0, 1.0]);
    }

    fn four() -> Vec<PlayerType> {
        [1.0, 29.9, 30.0, 90.0]
            .iter()
            .map(|&s| PlayerType::new(s, 0.5, 0.01).unwrap())
            .collect()
    }

    #[test]
    fn four_agent_representatives() {
        let s = RewardScheme::baseline();
        let strategy = ThresholdStrategy { theta: 30.0 };
        let p = build_representative_pne(strategy, &four(), &s, 30.0).unwrap();
        assert!(matches!(p.action(0), Action::Delegate(_)));
        assert!(matches!(p.action(1), Action::Delegate(_)));
        let pools = reduce_profile(&p);
        // pool 3 keeps only its deficit; the rest goes to the pledge-30 pool
        let sum = stability_summary(strategy, &four(), &s).unwrap();
        assert!((pools.external()[1] - sum.per_pool_bounds[1].deficit).abs() < 1e-12);
        assert!((pools.external()[0] + pools.external()[1] - 30.9).abs() < 1e-9);
        assert!(check_pne_sufficient(&p, &s).sufficient);

        let top = build_representative_pne(strategy, &four(), &s, 90.0).unwrap();
        let pools = reduce_profile(&top);
        assert!((pools.external()[0] - sum.per_pool_bounds[0].deficit).abs() < 1e-12);
        assert!(check_pne_sufficient(&top, &s).sufficient);
    }

    #[test]
    fn high_idle_utility_idles_small_agents() {
        let s = RewardScheme::baseline();
        let mut types = four();
        types.push(PlayerType::new(12.0, 0.5, 10.0).unwrap());
        for t in types.iter_mut() {
            t.idle_utility = 10.0;
        }
        let strategy = ThresholdStrategy { theta: 30.0 };
        let sum = stability_summary(strategy, &types, &s).unwrap();
        // only stakes with r·s >= 10 delegate
        let expected: Vec<Role> = types
            .iter()
            .map(|t| {
                if t.stake >= 30.0 {
                    Role::Spo
                } else if sum.rate * t.stake >= 10.0 {
                    Role::Delegator
                } else {
                    Role::Idle
                }
            })
            .collect();
        assert_eq!(sum.roles, expected);
        assert_eq!(sum.roles[0], Role::Idle);
        assert_eq!(sum.roles[1], Role::Delegator);
        assert_eq!(sum.roles[4], Role::Delegator);
        if sum.stable {
            let p = representative_from_summary(&sum, &types, 60.0).unwrap();
            assert!(p.action(0).is_idle());
            assert!(check_pne_sufficient(&p, &s).sufficient);
        }
    }

    #[test]
    fn unstable_summary_is_refused() {
        let s = RewardScheme::baseline();
        let types: Vec<PlayerType> = [1.0, 2.0, 50.0]
            .iter()
            .map(|&st| PlayerType::new(st, 0.5, 5.0).unwrap())
            .collect();
        let e = build_representative_pne(ThresholdStrategy { theta: 30.0 }, &types, &s, 50.0).unwrap_err();
        assert!(matches!(e, Error::Unstable));
    }
}
