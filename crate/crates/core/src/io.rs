//! CSV snapshots of populations and strategy profiles.
//!
//! Population files have the header `agent_id,stake,cost,idle_utility`.
//! Profile files append `action,delegated_to,amount`; a delegator splitting
//! stake over several pools takes one row per target, other agents one row
//! with the last two columns empty.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, PlayerType, StrategyProfile};
use crate::montecarlo::fmt_sig9;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationRow {
    agent_id: usize,
    stake: f64,
    cost: f64,
    idle_utility: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRow {
    agent_id: usize,
    stake: f64,
    cost: f64,
    idle_utility: f64,
    action: String,
    delegated_to: Option<usize>,
    amount: Option<f64>,
}

/// Reads a population; agent ids must be exactly `0..n` in order.
pub fn read_population<R: Read>(reader: R) -> Result<Vec<PlayerType>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut types = Vec::new();
    for (i, row) in r.deserialize::<PopulationRow>().enumerate() {
        let row = row?;
        if row.agent_id != i {
            return Err(Error::InvalidType {
                agent: row.agent_id,
                reason: format!("expected agent_id {i}; ids must run 0..n in order"),
            });
        }
        let t = PlayerType {
            stake: row.stake,
            cost: row.cost,
            idle_utility: row.idle_utility,
        };
        t.validate(i)?;
        types.push(t);
    }
    Ok(types)
}

/// Writes a population with full float precision.
pub fn write_population<W: Write>(writer: W, types: &[PlayerType]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (agent_id, t) in types.iter().enumerate() {
        w.serialize(PopulationRow {
            agent_id,
            stake: t.stake,
            cost: t.cost,
            idle_utility: t.idle_utility,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a profile. Rows of one agent may be split but must agree on the
/// agent's type and action.
pub fn read_profile<R: Read>(reader: R) -> Result<StrategyProfile> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut agents: BTreeMap<usize, (PlayerType, Action)> = BTreeMap::new();
    for row in r.deserialize::<ProfileRow>() {
        let row = row?;
        let i = row.agent_id;
        let bad = |reason: String| Error::InvalidProfile { agent: i, reason };
        let t = PlayerType {
            stake: row.stake,
            cost: row.cost,
            idle_utility: row.idle_utility,
        };
        let action = match row.action.as_str() {
            "idle" | "spo" => {
                if row.delegated_to.is_some() || row.amount.is_some() {
                    return Err(bad(format!("`{}` rows take no delegation target or amount", row.action)));
                }
                if row.action == "idle" {
                    Action::Idle
                } else {
                    Action::Spo
                }
            }
            "delegate" => {
                let (Some(j), Some(amount)) = (row.delegated_to, row.amount) else {
                    return Err(bad("`delegate` rows need delegated_to and amount".into()));
                };
                Action::delegate_all(j, amount)
            }
            other => return Err(bad(format!("unknown action {other:?}"))),
        };
        match agents.get_mut(&i) {
            None => {
                agents.insert(i, (t, action));
            }
            Some((prev, prev_action)) => {
                if *prev != t {
                    return Err(bad("rows disagree on the agent's type".into()));
                }
                match (prev_action, action) {
                    (Action::Delegate(map), Action::Delegate(more)) => {
                        for (j, d) in more {
                            if map.insert(j, d).is_some() {
                                return Err(bad(format!("pool {j} listed twice")));
                            }
                        }
                    }
                    _ => return Err(bad("only delegators may span several rows".into())),
                }
            }
        }
    }
    let n = agents.len();
    if let Some((&last, _)) = agents.last_key_value() {
        if last + 1 != n {
            let missing = (0..n).find(|i| !agents.contains_key(i)).unwrap_or(n);
            return Err(Error::InvalidProfile {
                agent: missing,
                reason: "agent ids must cover 0..n".into(),
            });
        }
    }
    let (types, actions) = agents.into_values().unzip();
    StrategyProfile::new(types, actions)
}

/// Writes a profile. Amounts use 9 significant digits, so large profiles may
/// need the reader's stake tolerance on the way back in.
pub fn write_profile<W: Write>(writer: W, profile: &StrategyProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "agent_id",
        "stake",
        "cost",
        "idle_utility",
        "action",
        "delegated_to",
        "amount",
    ])?;
    for (i, (t, a)) in profile.types().iter().zip(profile.actions()).enumerate() {
        let head = [i.to_string(), t.stake.to_string(), t.cost.to_string(), t.idle_utility.to_string()];
        match a {
            Action::Delegate(map) => {
                for (j, d) in map {
                    let tail = [a.tag().to_string(), j.to_string(), fmt_sig9(*d)];
                    w.write_record(head.iter().chain(&tail))?;
                }
            }
            _ => {
                let tail = [a.tag().to_string(), String::new(), String::new()];
                w.write_record(head.iter().chain(&tail))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
