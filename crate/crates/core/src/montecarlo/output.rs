use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::experiment::{DrawResult, Experiment, RunOutput, RunSummary};
use crate::error::Result;

/// Rounds to 9 significant digits, then prints the shortest decimal that
/// reads back as the rounded value.
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    rounded.to_string()
}

fn round9(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().expect("formatted float parses")
    } else {
        x
    }
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round9).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_draws_csv(path: &Path, draws: &[DrawResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "draw",
        "stable",
        "idle_stake",
        "delegated_stake",
        "pledged_stake",
        "idle_n",
        "delegator_n",
        "spo_n",
    ])?;
    for d in draws {
        w.write_record([
            d.draw.to_string(),
            d.stable.to_string(),
            fmt_sig9(d.idle_stake),
            fmt_sig9(d.delegated_stake),
            fmt_sig9(d.pledged_stake),
            d.idle_n.to_string(),
            d.delegator_n.to_string(),
            d.spo_n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_objectives_csv(path: &Path, draws: &[DrawResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "draw",
        "ref_index",
        "ref_pledge",
        "participation",
        "decentralization",
        "expenditure",
    ])?;
    for d in draws {
        for (k, o) in d.per_reference.iter().enumerate() {
            w.write_record([
                d.draw.to_string(),
                k.to_string(),
                fmt_sig9(o.ref_pledge),
                fmt_sig9(o.participation),
                fmt_sig9(o.decentralization),
                fmt_sig9(o.expenditure),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<()> {
    write_json(path, summary)
}

/// Writes `draws.csv`, `objectives.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, run: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths = [
        dir.join("draws.csv"),
        dir.join("objectives.csv"),
        dir.join("summary.json"),
    ];
    write_draws_csv(&paths[0], &run.draws)?;
    write_objectives_csv(&paths[1], &run.draws)?;
    write_summary_json(&paths[2], &run.summary)?;
    Ok(paths.to_vec())
}

/// Writes a single run into `dir`, or a sweep as one `param=label`
/// subdirectory per value plus a top-level `summary.json` indexing them.
pub fn write_experiment(dir: &Path, experiment: &Experiment) -> Result<Vec<PathBuf>> {
    match experiment {
        Experiment::Single(run) => write_run(dir, run),
        Experiment::Sweep { param, runs } => {
            fs::create_dir_all(dir)?;
            let mut paths = Vec::new();
            let mut index = Vec::new();
            for r in runs {
                let sub = format!("{}={}", param.name(), r.label);
                paths.extend(write_run(&dir.join(&sub), &r.output)?);
                index.push(json!({
                    "label": r.label,
                    "dir": sub,
                    "summary": r.output.summary,
                }));
            }
            let top = dir.join("summary.json");
            write_json(&top, &json!({ "param": param.name(), "runs": index }))?;
            paths.push(top);
            Ok(paths)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(-0.0), "0");
        assert_eq!(fmt_sig9(1530.0), "1530");
        assert_eq!(fmt_sig9(1_480.666_666_666_7), "1480.66667");
        assert_eq!(fmt_sig9(0.003_446_685_878_962_536), "0.00344668588");
        assert_eq!(fmt_sig9(2.0 / 3.0), "0.666666667");
        assert_eq!(fmt_sig9(123_456_789_012.0), "123456789000");
        assert_eq!(fmt_sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn json_floats_are_rounded() {
        let mut v = json!({"x": 2.0 / 3.0, "n": 3, "xs": [0.1 + 0.2]});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"n":3,"x":0.666666667,"xs":[0.3]}"#);
    }
}
