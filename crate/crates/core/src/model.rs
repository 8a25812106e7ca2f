//! Domain types shared by the rest of the crate.
//!
//! Everything here is an immutable value once constructed. Pool identity is
//! the index of the agent operating it: "pool j" is the pool run by agent j.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::REL_TOL;

/// One agent's type: stake, pool operating cost and utility for staying idle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerType {
    pub stake: f64,
    pub cost: f64,
    pub idle_utility: f64,
}

impl PlayerType {
    pub fn new(stake: f64, cost: f64, idle_utility: f64) -> Result<Self> {
        let t = PlayerType {
            stake,
            cost,
            idle_utility,
        };
        t.validate(0)?;
        Ok(t)
    }

    pub(crate) fn validate(&self, agent: usize) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidType {
                agent,
                reason: reason.to_string(),
            })
        };
        if !(self.stake.is_finite() && self.stake > 0.0) {
            return bad("stake must be positive and finite");
        }
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return bad("cost must be non-negative and finite");
        }
        if !(self.idle_utility.is_finite() && self.idle_utility > 0.0) {
            return bad("idle utility must be positive and finite");
        }
        Ok(())
    }
}

/// A polynomial with non-negative coefficients, constant term first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(Vec<f64>);

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidScheme(format!(
                "coefficients must be finite and non-negative, got {coeffs:?}"
            )));
        }
        Ok(Polynomial(coeffs))
    }

    /// `coeff * x`.
    pub fn linear(coeff: f64) -> Self {
        Polynomial(vec![0.0, coeff])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn constant_term(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Capped separable pool reward function plus the public cost bounds.
///
/// Pool rewards are `a(λ') + b(λ')·β'` with `λ' = min(τ, λ)` and
/// `β' = min(τ − λ', β)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme", into = "RawScheme")]
pub struct RewardScheme {
    a: Polynomial,
    b: Polynomial,
    cap: f64,
    c_min: f64,
    c_max: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    a_coeffs: Vec<f64>,
    b_coeffs: Vec<f64>,
    cap: f64,
    c_min: f64,
    c_max: f64,
}

impl TryFrom<RawScheme> for RewardScheme {
    type Error = Error;

    fn try_from(raw: RawScheme) -> Result<Self> {
        RewardScheme::new(
            Polynomial::new(raw.a_coeffs)?,
            Polynomial::new(raw.b_coeffs)?,
            raw.cap,
            raw.c_min,
            raw.c_max,
        )
    }
}

impl From<RewardScheme> for RawScheme {
    fn from(s: RewardScheme) -> Self {
        RawScheme {
            a_coeffs: s.a.0,
            b_coeffs: s.b.0,
            cap: s.cap,
            c_min: s.c_min,
            c_max: s.c_max,
        }
    }
}

impl RewardScheme {
    pub fn new(a: Polynomial, b: Polynomial, cap: f64, c_min: f64, c_max: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(Error::InvalidScheme(format!("cap must be positive, got {cap}")));
        }
        if !(c_min.is_finite() && c_min >= 0.0) {
            return Err(Error::InvalidScheme(format!(
                "c_min must be non-negative, got {c_min}"
            )));
        }
        if !(c_max.is_finite() && c_max >= c_min) {
            return Err(Error::InvalidScheme(format!(
                "c_max ({c_max}) must be at least c_min ({c_min})"
            )));
        }
        Ok(RewardScheme {
            a,
            b,
            cap,
            c_min,
            c_max,
        })
    }

    /// `a = b = identity`, `τ = 200`, costs in `[0.4, 0.6]`.
    pub fn baseline() -> Self {
        RewardScheme {
            a: Polynomial::linear(1.0),
            b: Polynomial::linear(1.0),
            cap: 200.0,
            c_min: 0.4,
            c_max: 0.6,
        }
    }

    pub fn with_a(mut self, a: Polynomial) -> Self {
        self.a = a;
        self
    }

    pub fn with_b(mut self, b: Polynomial) -> Self {
        self.b = b;
        self
    }

    pub fn with_cap(self, cap: f64) -> Result<Self> {
        RewardScheme::new(self.a, self.b, cap, self.c_min, self.c_max)
    }

    pub fn with_cost_bounds(self, c_min: f64, c_max: f64) -> Result<Self> {
        RewardScheme::new(self.a, self.b, self.cap, c_min, c_max)
    }

    pub fn pledge_component(&self) -> &Polynomial {
        &self.a
    }

    pub fn delegation_component(&self) -> &Polynomial {
        &self.b
    }

    /// Pledge reward component `a(λ)` (uncapped argument).
    pub fn a(&self, pledge: f64) -> f64 {
        self.a.eval(pledge)
    }

    /// External delegation reward component `b(λ)` (uncapped argument).
    pub fn b(&self, pledge: f64) -> f64 {
        self.b.eval(pledge)
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Checks that the game over `types` is proper: every stake below the cap
    /// and the solo per-unit reward increasing in stake.
    ///
    /// With non-negative coefficients, `α(s,c) = (a₀ − c)/s + a₁ + a₂s + …`
    /// is increasing for every `c ≥ c_min` exactly when `a₀ ≤ c_min`.
    pub fn check_proper(&self, types: &[PlayerType]) -> Result<()> {
        let s_max = types.iter().map(|t| t.stake).fold(0.0, f64::max);
        if s_max >= self.cap {
            return Err(Error::Improper(format!(
                "max stake {s_max} is not below the cap {}",
                self.cap
            )));
        }
        if self.a.constant_term() > self.c_min {
            return Err(Error::Improper(format!(
                "constant pledge reward {} exceeds c_min {}; solo rewards would not increase with stake",
                self.a.constant_term(),
                self.c_min
            )));
        }
        Ok(())
    }
}

/// High-level action of one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Idle,
    Spo,
    /// Pool-owner index to delegated amount.
    Delegate(BTreeMap<usize, f64>),
}

impl Action {
    pub fn delegate_all(target: usize, stake: f64) -> Self {
        Action::Delegate(BTreeMap::from([(target, stake)]))
    }

    pub fn is_idle(&self) -> bool {
        matches!(self, Action::Idle)
    }

    pub fn is_spo(&self) -> bool {
        matches!(self, Action::Spo)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Action::Idle => "idle",
            Action::Spo => "spo",
            Action::Delegate(_) => "delegate",
        }
    }
}

/// One action per agent, alongside the agents' types.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    types: Vec<PlayerType>,
    actions: Vec<Action>,
}

impl StrategyProfile {
    /// Validates types and delegation maps. Delegating to an agent that is not
    /// an SPO is legal; that stake simply earns nothing.
    pub fn new(types: Vec<PlayerType>, actions: Vec<Action>) -> Result<Self> {
        if types.len() != actions.len() {
            return Err(Error::InvalidProfile {
                agent: types.len().min(actions.len()),
                reason: format!("{} types but {} actions", types.len(), actions.len()),
            });
        }
        let n = types.len();
        for (i, (t, a)) in types.iter().zip(&actions).enumerate() {
            t.validate(i)?;
            if let Action::Delegate(map) = a {
                let bad = |reason: String| Err(Error::InvalidProfile { agent: i, reason });
                if map.is_empty() {
                    return bad("empty delegation map".into());
                }
                let mut total = 0.0;
                for (&target, &amount) in map {
                    if target == i {
                        return bad("self-delegation".into());
                    }
                    if target >= n {
                        return bad(format!("delegation target {target} out of range"));
                    }
                    if !(amount.is_finite() && amount >= 0.0) {
                        return bad(format!("negative or non-finite amount {amount} to {target}"));
                    }
                    total += amount;
                }
                if (total - t.stake).abs() > REL_TOL * t.stake.max(1.0) {
                    return bad(format!(
                        "delegations sum to {total} but stake is {}",
                        t.stake
                    ));
                }
            }
        }
        Ok(StrategyProfile { types, actions })
    }

    pub fn all_idle(types: Vec<PlayerType>) -> Result<Self> {
        let actions = vec![Action::Idle; types.len()];
        StrategyProfile::new(types, actions)
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn types(&self) -> &[PlayerType] {
        &self.types
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, agent: usize) -> &Action {
        &self.actions[agent]
    }

    /// Copy of this profile with one agent's action replaced.
    pub fn with_action(&self, agent: usize, action: Action) -> Result<Self> {
        if agent >= self.len() {
            return Err(Error::AgentOutOfRange {
                agent,
                n: self.len(),
            });
        }
        let mut actions = self.actions.clone();
        actions[agent] = action;
        StrategyProfile::new(self.types.clone(), actions)
    }

    /// Indices of agents operating a pool, ascending.
    pub fn spo_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.actions[i].is_spo()).collect()
    }

    /// External delegation received by each agent's pool, indexed by agent.
    /// Entries for non-SPO agents hold stake that was sent to an inactive pool.
    pub(crate) fn inbound_delegation(&self) -> Vec<f64> {
        let mut inbound = vec![0.0; self.len()];
        for a in &self.actions {
            if let Action::Delegate(map) = a {
                for (&j, &d) in map {
                    inbound[j] += d;
                }
            }
        }
        inbound
    }

    pub fn total_stake(&self) -> f64 {
        self.types.iter().map(|t| t.stake).sum()
    }
}

/// What an outside observer sees: pledge and external stake per active pool.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PublicPoolProfile {
    pledges: Vec<f64>,
    external: Vec<f64>,
}

impl PublicPoolProfile {
    pub fn new(pledges: Vec<f64>, external: Vec<f64>) -> Result<Self> {
        if pledges.len() != external.len() {
            return Err(Error::Domain(format!(
                "{} pledges but {} external delegations",
                pledges.len(),
                external.len()
            )));
        }
        if pledges.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Domain("pledges must be positive".into()));
        }
        if external.iter().any(|&b| !(b.is_finite() && b >= 0.0)) {
            return Err(Error::Domain("external delegation must be non-negative".into()));
        }
        Ok(PublicPoolProfile { pledges, external })
    }

    pub fn pledges(&self) -> &[f64] {
        &self.pledges
    }

    pub fn external(&self) -> &[f64] {
        &self.external
    }

    pub fn len(&self) -> usize {
        self.pledges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pledges.is_empty()
    }

    pub fn sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.pledges.iter().zip(&self.external).map(|(l, b)| l + b)
    }

    /// Multiplies every pledge and delegation by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        PublicPoolProfile::new(
            self.pledges.iter().map(|l| l * factor).collect(),
            self.external.iter().map(|b| b * factor).collect(),
        )
    }
}

/// Collapses a profile to its public pool form, one pool per SPO in agent
/// order. Delegations to non-SPO agents are dropped.
pub fn reduce_profile(profile: &StrategyProfile) -> PublicPoolProfile {
    let inbound = profile.inbound_delegation();
    let spos = profile.spo_indices();
    PublicPoolProfile {
        pledges: spos.iter().map(|&j| profile.types[j].stake).collect(),
        external: spos.iter().map(|&j| inbound[j]).collect(),
    }
}
