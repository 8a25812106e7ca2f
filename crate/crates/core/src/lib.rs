//! Stake-delegation games under capped separable reward schemes.
//!
//! The crate evaluates rewards and utilities of concrete strategy profiles,
//! certifies pure Nash equilibria through a sufficient-condition check backed
//! by a brute-force deviation oracle, builds representative equilibria for
//! threshold strategies, scores them on participation, expenditure and
//! decentralization, and runs seeded Monte-Carlo sweeps over type
//! distributions.

pub mod allocation;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod objectives;
pub mod rewards;

pub use allocation::{
    build_representative_pne, greedy_delegation, reference_pledges, representative_from_summary, ReferencePledges,
};
pub use equilibrium::{
    apply_strategy, check_pne_sufficient, deviation_oracle, stability_summary, Condition, Deviation, DeviationReport,
    PneVerdict, Role, StabilitySummary, StabilityVerdict, ThresholdStrategy, Violation,
};
pub use error::{Error, Result};
pub use model::{reduce_profile, Action, PlayerType, Polynomial, PublicPoolProfile, RewardScheme, StrategyProfile};
pub use objectives::{
    decentralization, decentralization_exact, decentralization_fptas, evaluate_objectives, expenditure, participation,
    DecentralizationMethod, ExpenditureMode, ObjectiveReport,
};
pub use rewards::{
    agent_reward, agent_utility, alpha, is_feasible, max_delegate_context, pool_bounds, pool_reward, rate_for_pivotal,
    spo_gap, EquilibriumContext, PoolBounds, ProfileEvaluation,
};

/// Relative tolerance used for stake conservation and equilibrium inequalities.
pub const REL_TOL: f64 = 1e-9;

/// `a >= b` up to [`REL_TOL`], scaled by the larger magnitude (at least 1).
pub(crate) fn approx_ge(a: f64, b: f64) -> bool {
    if a >= b {
        return true;
    }
    if !(a.is_finite() && b.is_finite()) {
        return false;
    }
    a >= b - REL_TOL * a.abs().max(b.abs()).max(1.0)
}
