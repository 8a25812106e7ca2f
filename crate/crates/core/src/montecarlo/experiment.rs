use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParam};
use super::sampling::sample_population;
use crate::allocation::{reference_pledges, representative_from_summary};
use crate::equilibrium::{check_pne_sufficient, stability_summary, StabilityVerdict, ThresholdStrategy};
use crate::error::{Error, Result};
use crate::model::reduce_profile;
use crate::objectives::{decentralization_fptas, expenditure_with, participation, ExpenditureMode};
use crate::REL_TOL;

/// Objectives of the representative equilibrium for one reference pledge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOutcome {
    pub ref_pledge: f64,
    pub participation: f64,
    pub decentralization: f64,
    pub expenditure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawResult {
    pub draw: u64,
    pub stable: bool,
    pub verdict: StabilityVerdict,
    pub idle_stake: f64,
    pub delegated_stake: f64,
    pub pledged_stake: f64,
    pub idle_n: usize,
    pub delegator_n: usize,
    pub spo_n: usize,
    pub total_stake: f64,
    /// Empty unless the draw is stable.
    pub per_reference: Vec<ReferenceOutcome>,
}

/// One draw: sample, certify, and for stable draws score `m` representatives.
///
/// The participation breakdown is the role split implied by the threshold
/// strategy and the max-delegate rate, recorded for every draw. Objectives use
/// the FPTAS with `config.eps_approx` so cost does not depend on pool count.
pub fn run_draw(config: &ExperimentConfig, draw: u64) -> Result<DrawResult> {
    run_draw_inner(config, draw).map_err(|e| Error::Draw {
        draw,
        source: Box::new(e),
    })
}

fn run_draw_inner(config: &ExperimentConfig, draw: u64) -> Result<DrawResult> {
    let types = sample_population(config, draw)?;
    let strategy = ThresholdStrategy::new(config.theta)?;
    let summary = stability_summary(strategy, &types, &config.scheme)?;
    let (idle_stake, delegated_stake, pledged_stake) = summary.stake_split(&types);
    let (idle_n, delegator_n, spo_n) = summary.role_counts();
    let total_stake: f64 = types.iter().map(|t| t.stake).sum();
    let split_total = idle_stake + delegated_stake + pledged_stake;
    if (split_total - total_stake).abs() > REL_TOL * total_stake {
        return Err(Error::Invariant(format!(
            "stake split sums to {split_total}, population holds {total_stake}"
        )));
    }

    let mut per_reference: Vec<ReferenceOutcome> = Vec::new();
    if summary.stable {
        let pledges = summary.spos.iter().map(|&i| types[i].stake);
        let lo = pledges.clone().fold(f64::INFINITY, f64::min);
        let hi = pledges.fold(f64::NEG_INFINITY, f64::max);
        let mode = if config.include_idle_epsilon {
            ExpenditureMode::IncludeIdleUtility
        } else {
            ExpenditureMode::SchemePayout
        };
        for (k, &reference) in reference_pledges(lo, hi, config.m)?.values().iter().enumerate() {
            let profile = representative_from_summary(&summary, &types, reference)?;
            let verdict = check_pne_sufficient(&profile, &config.scheme);
            if !verdict.sufficient {
                return Err(Error::Invariant(format!(
                    "representative {k} (reference pledge {reference}) fails the equilibrium check: {:?}",
                    verdict.violations
                )));
            }
            let pools = reduce_profile(&profile);
            let outcome = ReferenceOutcome {
                ref_pledge: reference,
                participation: participation(&pools),
                decentralization: decentralization_fptas(&pools, config.ell, config.eps_approx)?,
                expenditure: expenditure_with(&profile, &config.scheme, mode),
            };
            if let Some(first) = per_reference.first() {
                let p0 = first.participation;
                if (outcome.participation - p0).abs() > REL_TOL * p0.max(1.0) {
                    return Err(Error::Invariant(format!(
                        "participation {} of representative {k} differs from {p0}",
                        outcome.participation
                    )));
                }
            }
            per_reference.push(outcome);
        }
    }

    Ok(DrawResult {
        draw,
        stable: summary.stable,
        verdict: summary.verdict,
        idle_stake,
        delegated_stake,
        pledged_stake,
        idle_n,
        delegator_n,
        spo_n,
        total_stake,
        per_reference,
    })
}

/// Mean objectives at one reference index over the stable draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub ref_index: usize,
    pub mean_ref_pledge: f64,
    pub mean_participation: f64,
    pub mean_decentralization: f64,
    pub mean_expenditure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub draws: u64,
    pub stable_draws: u64,
    pub degenerate_draws: u64,
    pub stability_frequency: f64,
    /// Means over all draws of each role's share of total stake.
    pub mean_idle_fraction: f64,
    pub mean_delegated_fraction: f64,
    pub mean_pledged_fraction: f64,
    /// Mean share of agents that stay idle.
    pub mean_idle_agent_fraction: f64,
    /// Same stake shares restricted to stable draws; zero if there are none.
    pub stable_mean_idle_fraction: f64,
    pub stable_mean_delegated_fraction: f64,
    pub stable_mean_pledged_fraction: f64,
    pub per_reference: Vec<ReferenceSummary>,
}

impl RunSummary {
    pub fn from_draws(draws: &[DrawResult]) -> Self {
        let n = draws.len() as f64;
        let mean = |xs: &mut dyn Iterator<Item = f64>, count: f64| {
            if count == 0.0 {
                0.0
            } else {
                xs.sum::<f64>() / count
            }
        };
        let frac = |d: &DrawResult, x: f64| x / d.total_stake;
        let stable: Vec<&DrawResult> = draws.iter().filter(|d| d.stable).collect();
        let s = stable.len() as f64;
        let m = stable.iter().map(|d| d.per_reference.len()).max().unwrap_or(0);
        let per_reference = (0..m)
            .map(|k| {
                let at: Vec<&ReferenceOutcome> =
                    stable.iter().filter_map(|d| d.per_reference.get(k)).collect();
                let c = at.len() as f64;
                ReferenceSummary {
                    ref_index: k,
                    mean_ref_pledge: mean(&mut at.iter().map(|o| o.ref_pledge), c),
                    mean_participation: mean(&mut at.iter().map(|o| o.participation), c),
                    mean_decentralization: mean(&mut at.iter().map(|o| o.decentralization), c),
                    mean_expenditure: mean(&mut at.iter().map(|o| o.expenditure), c),
                }
            })
            .collect();
        RunSummary {
            draws: draws.len() as u64,
            stable_draws: stable.len() as u64,
            degenerate_draws: draws
                .iter()
                .filter(|d| d.verdict == StabilityVerdict::StableDegenerate)
                .count() as u64,
            stability_frequency: mean(&mut draws.iter().map(|d| f64::from(u8::from(d.stable))), n),
            mean_idle_fraction: mean(&mut draws.iter().map(|d| frac(d, d.idle_stake)), n),
            mean_delegated_fraction: mean(&mut draws.iter().map(|d| frac(d, d.delegated_stake)), n),
            mean_pledged_fraction: mean(&mut draws.iter().map(|d| frac(d, d.pledged_stake)), n),
            mean_idle_agent_fraction: mean(
                &mut draws
                    .iter()
                    .map(|d| d.idle_n as f64 / (d.idle_n + d.delegator_n + d.spo_n) as f64),
                n,
            ),
            stable_mean_idle_fraction: mean(&mut stable.iter().map(|d| frac(d, d.idle_stake)), s),
            stable_mean_delegated_fraction: mean(&mut stable.iter().map(|d| frac(d, d.delegated_stake)), s),
            stable_mean_pledged_fraction: mean(&mut stable.iter().map(|d| frac(d, d.pledged_stake)), s),
            per_reference,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub draws: Vec<DrawResult>,
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    pub label: String,
    pub output: RunOutput,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Single(RunOutput),
    Sweep { param: SweepParam, runs: Vec<SweepRun> },
}

impl Experiment {
    /// Every run with its sweep label (empty for a single run).
    pub fn runs(&self) -> Vec<(&str, &RunOutput)> {
        match self {
            Experiment::Single(run) => vec![("", run)],
            Experiment::Sweep { runs, .. } => runs.iter().map(|r| (r.label.as_str(), &r.output)).collect(),
        }
    }
}

/// All draws of one (non-sweep) configuration on the current rayon pool,
/// returned in draw order. The first failing draw in index order is reported.
pub fn run_single(config: &ExperimentConfig) -> Result<RunOutput> {
    let results: Vec<Result<DrawResult>> = (0..config.draws)
        .into_par_iter()
        .map(|d| run_draw(config, d))
        .collect();
    let draws = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = RunSummary::from_draws(&draws);
    Ok(RunOutput {
        config: config.clone(),
        draws,
        summary,
    })
}

/// Runs a configuration (expanding sweeps) on `threads` worker threads, or
/// on rayon's default pool size when `None`.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<Experiment> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    pool.install(|| match &config.sweep {
        None => Ok(Experiment::Single(run_single(config)?)),
        Some(sweep) => {
            let runs = config
                .expand()?
                .into_iter()
                .map(|(label, c)| {
                    Ok(SweepRun {
                        label,
                        output: run_single(&c)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Experiment::Sweep {
                param: sweep.param,
                runs,
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::super::baseline_config;
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n: 200,
            draws: 6,
            m: 5,
            ..baseline_config()
        }
    }

    #[test]
    fn draw_conserves_stake_and_fills_references_when_stable() {
        let c = small();
        for d in 0..c.draws {
            let r = run_draw(&c, d).unwrap();
            let sum = r.idle_stake + r.delegated_stake + r.pledged_stake;
            assert!((sum - r.total_stake).abs() <= 1e-9 * r.total_stake);
            assert_eq!(r.idle_n + r.delegator_n + r.spo_n, c.n);
            if r.stable {
                assert_eq!(r.per_reference.len(), c.m);
                let p = r.per_reference[0].participation;
                assert!(r.per_reference.iter().all(|o| (o.participation - p).abs() <= 1e-9 * p));
            } else {
                assert!(r.per_reference.is_empty());
            }
        }
    }

    #[test]
    fn unreachable_threshold_is_degenerate_and_not_stable() {
        let c = ExperimentConfig {
            theta: 1000.0,
            ..small()
        };
        let r = run_draw(&c, 0).unwrap();
        assert!(!r.stable);
        assert_eq!(r.verdict, StabilityVerdict::StableDegenerate);
        assert_eq!(r.spo_n, 0);
        assert_eq!(r.idle_n, c.n);
        assert!(r.per_reference.is_empty());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let c = small();
        let a = run_experiment(&c, Some(1)).unwrap();
        let b = run_experiment(&c, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summary_of_no_draws_is_zero() {
        let s = RunSummary::from_draws(&[]);
        assert_eq!(s.stability_frequency, 0.0);
        assert!(s.per_reference.is_empty());
    }
}
