//! Participation, expenditure and decentralization of a concrete profile.
//!
//! Decentralization is a 0-1 min-knapsack: the smallest total pledge of any
//! coalition of pools holding at least an `ℓ` fraction of the pooled stake.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reduce_profile, PublicPoolProfile, RewardScheme, StrategyProfile};
use crate::rewards::{pool_reward, ProfileEvaluation};

/// Largest pool count [`decentralization_exact`] will enumerate.
pub const EXACT_POOL_LIMIT: usize = 25;

/// Relative slack on the coverage test, absorbing summation order noise.
const COVERAGE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecentralizationMethod {
    Exact,
    Fptas { eps_approx: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub participation: f64,
    pub expenditure: f64,
    pub decentralization: f64,
    pub ell: f64,
    pub method: DecentralizationMethod,
}

/// Whether idle agents' outside utility counts as system expenditure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExpenditureMode {
    /// Only what the reward scheme pays out.
    #[default]
    SchemePayout,
    /// Sum of every agent's reward, idle utility included.
    IncludeIdleUtility,
}

/// Total pooled stake.
pub fn participation(pools: &PublicPoolProfile) -> f64 {
    pools.sizes().sum()
}

/// Total scheme payout: `Σ ρ(λ_j, β_j)` over active pools.
pub fn expenditure(profile: &StrategyProfile, scheme: &RewardScheme) -> f64 {
    expenditure_with(profile, scheme, ExpenditureMode::SchemePayout)
}

pub fn expenditure_with(profile: &StrategyProfile, scheme: &RewardScheme, mode: ExpenditureMode) -> f64 {
    let pools = reduce_profile(profile);
    let payout = pool_payout(&pools, scheme);
    match mode {
        ExpenditureMode::SchemePayout => payout,
        ExpenditureMode::IncludeIdleUtility => {
            let ev = ProfileEvaluation::new(profile, scheme);
            payout
                + (0..profile.len())
                    .filter(|&i| profile.action(i).is_idle())
                    .map(|i| ev.reward(i))
                    .sum::<f64>()
        }
    }
}

pub fn pool_payout(pools: &PublicPoolProfile, scheme: &RewardScheme) -> f64 {
    pools
        .pledges()
        .iter()
        .zip(pools.external())
        .map(|(&l, &b)| pool_reward(scheme, l, b))
        .sum()
}

fn check_ell(ell: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&ell) {
        return Err(Error::Domain(format!("ell must lie in [0, 1], got {ell}")));
    }
    Ok(())
}

fn coverage_target(pools: &PublicPoolProfile, ell: f64) -> f64 {
    let threshold = ell * participation(pools);
    threshold - COVERAGE_SLACK * threshold.abs()
}

/// Exact minimum by depth-first branch and bound.
pub fn decentralization_exact(pools: &PublicPoolProfile, ell: f64) -> Result<f64> {
    check_ell(ell)?;
    let k = pools.len();
    if k > EXACT_POOL_LIMIT {
        return Err(Error::TooManyPools {
            k,
            limit: EXACT_POOL_LIMIT,
        });
    }
    let target = coverage_target(pools, ell);
    if k == 0 || target <= 0.0 {
        return Ok(0.0);
    }
    // Larger pools first so the coverage bound prunes early.
    let mut items: Vec<(f64, f64)> = pools.pledges().iter().copied().zip(pools.sizes()).collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + items[i].1;
    }

    struct Search<'a> {
        items: &'a [(f64, f64)],
        suffix: &'a [f64],
        target: f64,
        best: f64,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, pledge: f64, cover: f64) {
            if cover >= self.target {
                self.best = self.best.min(pledge);
                return;
            }
            if i == self.items.len() || pledge >= self.best || cover + self.suffix[i] < self.target {
                return;
            }
            let (l, s) = self.items[i];
            self.go(i + 1, pledge + l, cover + s);
            self.go(i + 1, pledge, cover);
        }
    }
    let mut search = Search {
        items: &items,
        suffix: &suffix,
        target,
        best: f64::INFINITY,
    };
    search.go(0, 0.0, 0.0);
    if search.best.is_finite() {
        Ok(search.best)
    } else {
        Err(Error::Invariant("no coalition reaches the coverage threshold".into()))
    }
}

/// Min-knapsack FPTAS over rounded pledges.
///
/// Pledges are scaled by `K = eps·G/k` and floored, then a DP over the scaled
/// pledge budget records the best coverage at each budget; the first budget
/// whose coverage meets the threshold gives the coalition, whose true pledge
/// is returned. The guess `G` starts from a lower bound on the optimum and
/// doubles while no coalition fits in a budget of `2G`, so `K·k <= eps·OPT`
/// holds at the accepted guess and the result is within `(1 + eps)·OPT`.
pub fn decentralization_fptas(pools: &PublicPoolProfile, ell: f64, eps_approx: f64) -> Result<f64> {
    check_ell(ell)?;
    if !(eps_approx > 0.0 && eps_approx.is_finite()) {
        return Err(Error::Domain(format!("eps_approx must be positive, got {eps_approx}")));
    }
    let k = pools.len();
    let target = coverage_target(pools, ell);
    if k == 0 || target <= 0.0 {
        return Ok(0.0);
    }
    let pledges = pools.pledges();
    let sizes: Vec<f64> = pools.sizes().collect();
    if sizes.iter().sum::<f64>() < target {
        return Err(Error::Invariant("no coalition reaches the coverage threshold".into()));
    }

    let min_ratio = pledges
        .iter()
        .zip(&sizes)
        .map(|(l, s)| l / s)
        .fold(f64::INFINITY, f64::min);
    let min_pledge = pledges.iter().copied().fold(f64::INFINITY, f64::min);
    let total_pledge: f64 = pledges.iter().sum();
    let mut guess = (min_ratio * target).max(min_pledge);

    loop {
        let unit = eps_approx * guess / k as f64;
        let budget = (2.0 * k as f64 / eps_approx).ceil() as usize;
        if let Some(chosen) = knapsack_cover(pledges, &sizes, unit, budget, target) {
            return Ok(chosen.iter().map(|&i| pledges[i]).sum());
        }
        if guess > total_pledge {
            return Err(Error::Invariant("FPTAS failed to reach the coverage threshold".into()));
        }
        guess *= 2.0;
    }
}

/// Coalition of minimum scaled pledge (at most `budget`) reaching `target`.
fn knapsack_cover(pledges: &[f64], sizes: &[f64], unit: f64, budget: usize, target: f64) -> Option<Vec<usize>> {
    let k = pledges.len();
    let scaled: Vec<usize> = pledges
        .iter()
        .map(|&l| {
            let q = (l / unit).floor();
            if q > budget as f64 { budget + 1 } else { q as usize }
        })
        .collect();
    let width = budget + 1;
    let words = width.div_ceil(64);
    let mut take = vec![0u64; k * words];
    let mut cover = vec![0.0f64; width];
    for i in 0..k {
        let w = scaled[i];
        if w > budget {
            continue;
        }
        for b in (w..width).rev() {
            let with = cover[b - w] + sizes[i];
            if with > cover[b] {
                cover[b] = with;
                take[i * words + b / 64] |= 1 << (b % 64);
            }
        }
    }
    let mut b = (0..width).find(|&b| cover[b] >= target)?;
    let mut chosen = Vec::new();
    for i in (0..k).rev() {
        if take[i * words + b / 64] & (1 << (b % 64)) != 0 {
            chosen.push(i);
            b -= scaled[i];
        }
    }
    chosen.reverse();
    Some(chosen)
}

/// Exact when the pool count allows it, otherwise the FPTAS.
pub fn decentralization(
    pools: &PublicPoolProfile,
    ell: f64,
    eps_approx: f64,
) -> Result<(f64, DecentralizationMethod)> {
    if pools.len() <= EXACT_POOL_LIMIT {
        Ok((decentralization_exact(pools, ell)?, DecentralizationMethod::Exact))
    } else {
        Ok((
            decentralization_fptas(pools, ell, eps_approx)?,
            DecentralizationMethod::Fptas { eps_approx },
        ))
    }
}

/// All three objectives for one profile.
pub fn evaluate_objectives(
    profile: &StrategyProfile,
    scheme: &RewardScheme,
    ell: f64,
    eps_approx: f64,
    mode: ExpenditureMode,
) -> Result<ObjectiveReport> {
    let pools = reduce_profile(profile);
    let (decentralization, method) = decentralization(&pools, ell, eps_approx)?;
    Ok(ObjectiveReport {
        participation: participation(&pools),
        expenditure: expenditure_with(profile, scheme, mode),
        decentralization,
        ell,
        method,
    })
}
