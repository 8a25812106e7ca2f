//! Random small games shared by the property and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use delegation_lab::{
    reference_pledges, representative_from_summary, stability_summary, Action, PlayerType, Polynomial, RewardScheme,
    StrategyProfile, ThresholdStrategy,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub fn random_scheme<R: Rng>(rng: &mut R, max_stake: f64) -> RewardScheme {
    let shapes: [&[f64]; 6] = [
        &[0.0, 1.0],
        &[0.0, 0.5],
        &[0.0, 2.0],
        &[0.0, 1.0, 0.01],
        &[0.2, 1.0],
        &[0.0, 0.3, 0.02],
    ];
    let a = Polynomial::new(shapes.choose(rng).unwrap().to_vec()).unwrap();
    let b = Polynomial::new(shapes.choose(rng).unwrap().to_vec()).unwrap();
    let cap = max_stake * rng.random_range(1.05..4.0);
    RewardScheme::new(a, b, cap, 0.4, 0.6).unwrap()
}

pub fn random_types<R: Rng>(rng: &mut R, n: usize) -> Vec<PlayerType> {
    (0..n)
        .map(|_| {
            let stake = if rng.random_bool(0.2) {
                rng.random_range(1..40) as f64
            } else {
                rng.random_range(1.0..40.0)
            };
            let cost = rng.random_range(0.4..=0.6);
            let eps = if rng.random_bool(0.5) { 0.01 } else { rng.random_range(0.001..8.0) };
            PlayerType::new(stake, cost, eps).unwrap()
        })
        .collect()
}

fn random_action<R: Rng>(rng: &mut R, i: usize, n: usize, stake: f64) -> Action {
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    match rng.random_range(0..4) {
        0 => Action::Idle,
        1 => Action::Spo,
        2 if !others.is_empty() => Action::delegate_all(*others.choose(rng).unwrap(), stake),
        3 if others.len() >= 2 => {
            let pick: Vec<usize> = others.choose_multiple(rng, 2).copied().collect();
            let share = rng.random_range(0.1..0.9) * stake;
            Action::Delegate(BTreeMap::from([(pick[0], share), (pick[1], stake - share)]))
        }
        _ => Action::Idle,
    }
}

/// A random game with `n` agents. About half the profiles are representative
/// equilibria of a threshold strategy, the rest arbitrary or perturbed.
pub fn random_game<R: Rng>(rng: &mut R, n: usize) -> (StrategyProfile, RewardScheme) {
    let types = random_types(rng, n);
    let max_stake = types.iter().map(|t| t.stake).fold(0.0, f64::max);
    let scheme = random_scheme(rng, max_stake);

    if rng.random_bool(0.6) {
        let theta = if rng.random_bool(0.5) {
            types.choose(rng).unwrap().stake
        } else {
            rng.random_range(0.0..45.0)
        };
        let strategy = ThresholdStrategy::new(theta).unwrap();
        let summary = stability_summary(strategy, &types, &scheme).unwrap();
        if summary.stable {
            let pledges: Vec<f64> = summary.spos.iter().map(|&i| types[i].stake).collect();
            let lo = pledges.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = pledges.iter().copied().fold(0.0, f64::max);
            let refs = reference_pledges(lo, hi, 5).unwrap();
            let r = *refs.values().choose(rng).unwrap();
            let profile = representative_from_summary(&summary, &types, r).unwrap();
            if rng.random_bool(0.8) {
                return (profile, scheme);
            }
            // perturb one agent
            let i = rng.random_range(0..n);
            let a = random_action(rng, i, n, types[i].stake);
            return (profile.with_action(i, a).unwrap(), scheme);
        }
    }
    let actions = (0..n).map(|i| random_action(rng, i, n, types[i].stake)).collect();
    (StrategyProfile::new(types, actions).unwrap(), scheme)
}
