use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::sampling::TypeDistribution;
use crate::error::{Error, Result};
use crate::model::{Polynomial, RewardScheme};

/// Named reward shapes `g1 … g6`, coefficients constant term first.
pub const G_PRESETS: [(&str, &[f64]); 6] = [
    ("g1", &[0.0, 0.5]),
    ("g2", &[0.0, 1.0]),
    ("g3", &[0.0, 2.0]),
    ("g4", &[0.0, 1.0, 0.005]),
    ("g5", &[0.0, 1.0, 0.01]),
    ("g6", &[0.0, 1.0, 0.05]),
];

pub fn g_preset(name: &str) -> Option<Polynomial> {
    G_PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| Polynomial::new(c.to_vec()).expect("preset coefficients are non-negative"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Theta,
    Gamma,
    ParetoH,
    /// Sets every agent's idle utility to the value.
    Eps,
    Cap,
    A,
    B,
    /// Sets both reward components to the same shape.
    Ab,
    /// `[c_min, c_max]`, applied to both the scheme and the distribution.
    CRange,
    N,
    M,
    Ell,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Theta => "theta",
            SweepParam::Gamma => "gamma",
            SweepParam::ParetoH => "pareto_h",
            SweepParam::Eps => "eps",
            SweepParam::Cap => "cap",
            SweepParam::A => "a",
            SweepParam::B => "b",
            SweepParam::Ab => "ab",
            SweepParam::CRange => "c_range",
            SweepParam::N => "n",
            SweepParam::M => "m",
            SweepParam::Ell => "ell",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: RewardScheme,
    pub dist: TypeDistribution,
    pub n: usize,
    pub draws: u64,
    pub theta: f64,
    pub m: usize,
    pub ell: f64,
    #[serde(default = "default_eps_approx")]
    pub eps_approx: f64,
    pub master_seed: u64,
    /// Count idle agents' outside utility as part of expenditure.
    #[serde(default)]
    pub include_idle_epsilon: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_eps_approx() -> f64 {
    0.01
}

/// 1000 agents, 500 draws, `θ = 30`, 100 reference pledges, `ℓ = 0.5`.
pub fn baseline_config() -> ExperimentConfig {
    ExperimentConfig {
        scheme: RewardScheme::baseline(),
        dist: TypeDistribution::baseline(),
        n: 1000,
        draws: 500,
        theta: 30.0,
        m: 100,
        ell: 0.5,
        eps_approx: default_eps_approx(),
        master_seed: 2024,
        include_idle_epsilon: false,
        sweep: None,
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Checks field ranges, and for sweeps, every swept variant.
    pub fn validate(&self) -> Result<()> {
        match &self.sweep {
            None => self.validate_point(),
            Some(sweep) => {
                if sweep.values.is_empty() {
                    return Err(Error::config("sweep.values", "must not be empty"));
                }
                self.validate_point()?;
                for v in &sweep.values {
                    self.with_value(sweep.param, v)?.validate_point()?;
                }
                Ok(())
            }
        }
    }

    fn validate_point(&self) -> Result<()> {
        self.dist.validate()?;
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.draws == 0 {
            return Err(Error::config("draws", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.ell) {
            return Err(Error::config("ell", "must lie in [0, 1]"));
        }
        if !(self.eps_approx.is_finite() && self.eps_approx > 0.0) {
            return Err(Error::config("eps_approx", "must be positive"));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::config("theta", "must be non-negative and finite"));
        }
        if self.dist.pareto_h >= self.scheme.cap() {
            return Err(Error::config(
                "scheme.cap",
                format!("must exceed the largest possible stake {}", self.dist.pareto_h),
            ));
        }
        if self.dist.cost_min < self.scheme.c_min() || self.dist.cost_max > self.scheme.c_max() {
            return Err(Error::config(
                "dist.cost_min",
                "sampled costs must lie within the scheme's [c_min, c_max]",
            ));
        }
        if self.scheme.pledge_component().constant_term() > self.scheme.c_min() {
            return Err(Error::config("scheme.a_coeffs", "constant term must not exceed c_min"));
        }
        Ok(())
    }

    /// The configurations a run covers: one per sweep value, or just this one.
    /// Labels are the rendered sweep values.
    pub fn expand(&self) -> Result<Vec<(String, ExperimentConfig)>> {
        match &self.sweep {
            None => Ok(vec![(String::new(), self.clone())]),
            Some(sweep) => sweep
                .values
                .iter()
                .map(|v| Ok((label(v), self.with_value(sweep.param, v)?)))
                .collect(),
        }
    }

    /// A copy with one parameter replaced and the sweep removed. Draw seeds
    /// are unchanged, so swept runs share populations where the parameter
    /// does not affect sampling.
    pub fn with_value(&self, param: SweepParam, value: &Value) -> Result<ExperimentConfig> {
        let field = format!("sweep.values ({})", param.name());
        let num = || {
            value
                .as_f64()
                .ok_or_else(|| Error::config(&field, format!("expected a number, got {value}")))
        };
        let count = || {
            value
                .as_u64()
                .ok_or_else(|| Error::config(&field, format!("expected a positive integer, got {value}")))
        };
        let shape = || -> Result<Polynomial> {
            match value {
                Value::String(name) => {
                    g_preset(name).ok_or_else(|| Error::config(&field, format!("unknown preset {name:?}")))
                }
                Value::Array(items) => {
                    let coeffs = items
                        .iter()
                        .map(|x| x.as_f64().ok_or_else(|| Error::config(&field, "coefficients must be numbers")))
                        .collect::<Result<Vec<_>>>()?;
                    Polynomial::new(coeffs)
                }
                _ => Err(Error::config(&field, format!("expected a preset name or coefficients, got {value}"))),
            }
        };
        let mut c = self.clone();
        c.sweep = None;
        match param {
            SweepParam::Theta => c.theta = num()?,
            SweepParam::Gamma => c.dist.gamma = num()?,
            SweepParam::ParetoH => c.dist.pareto_h = num()?,
            SweepParam::Eps => {
                let e = num()?;
                c.dist.eps_min = e;
                c.dist.eps_max = e;
            }
            SweepParam::Cap => c.scheme = c.scheme.with_cap(num()?)?,
            SweepParam::A => c.scheme = c.scheme.with_a(shape()?),
            SweepParam::B => c.scheme = c.scheme.with_b(shape()?),
            SweepParam::Ab => {
                let g = shape()?;
                c.scheme = c.scheme.with_a(g.clone()).with_b(g);
            }
            SweepParam::CRange => {
                let pair = value
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
                    .ok_or_else(|| Error::config(&field, format!("expected [c_min, c_max], got {value}")))?;
                c.scheme = c.scheme.with_cost_bounds(pair.0, pair.1)?;
                c.dist.cost_min = pair.0;
                c.dist.cost_max = pair.1;
            }
            SweepParam::N => c.n = count()? as usize,
            SweepParam::M => c.m = count()? as usize,
            SweepParam::Ell => c.ell = num()?,
        }
        Ok(c)
    }
}

/// Directory-friendly rendering of a sweep value.
fn label(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(label).collect::<Vec<_>>().join("_"),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn baseline_round_trips_through_json() {
        let c = baseline_config();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert!(text.contains("\"a_coeffs\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn missing_field_is_named() {
        let mut v = serde_json::to_value(baseline_config()).unwrap();
        v.as_object_mut().unwrap().remove("theta");
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let mut v = serde_json::to_value(baseline_config()).unwrap();
        v.as_object_mut().unwrap().insert("thetta".into(), json!(3));
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn sweep_expansion() {
        let mut c = baseline_config();
        c.sweep = Some(Sweep {
            param: SweepParam::Theta,
            values: vec![json!(10), json!(20.5)],
        });
        c.validate().unwrap();
        let runs = c.expand().unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].0, "10");
        assert_eq!(runs[1].0, "20.5");
        assert_eq!(runs[1].1.theta, 20.5);
        assert!(runs[1].1.sweep.is_none());
        assert_eq!(runs[1].1.master_seed, c.master_seed);
    }

    #[test]
    fn sweep_values_by_param() {
        let c = baseline_config();
        let e = c.with_value(SweepParam::Eps, &json!(5)).unwrap();
        assert_eq!((e.dist.eps_min, e.dist.eps_max), (5.0, 5.0));
        let ab = c.with_value(SweepParam::Ab, &json!("g6")).unwrap();
        assert_eq!(ab.scheme.pledge_component().coeffs(), &[0.0, 1.0, 0.05]);
        assert_eq!(ab.scheme.delegation_component().coeffs(), &[0.0, 1.0, 0.05]);
        let b = c.with_value(SweepParam::B, &json!([0.0, 3.0])).unwrap();
        assert_eq!(b.scheme.delegation_component().coeffs(), &[0.0, 3.0]);
        assert_eq!(b.scheme.pledge_component().coeffs(), &[0.0, 1.0]);
        let cr = c.with_value(SweepParam::CRange, &json!([0.3, 0.7])).unwrap();
        assert_eq!((cr.scheme.c_min(), cr.dist.cost_max), (0.3, 0.7));
        assert_eq!(label(&json!([0.3, 0.7])), "0.3_0.7");
        assert!(c.with_value(SweepParam::A, &json!("g9")).is_err());
        assert!(c.with_value(SweepParam::Theta, &json!("x")).is_err());
    }

    #[test]
    fn invalid_sweep_value_fails_validation() {
        let mut c = baseline_config();
        c.sweep = Some(Sweep {
            param: SweepParam::Cap,
            values: vec![json!(300), json!(50)],
        });
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("scheme.cap"), "{err}");
    }

    #[test]
    fn presets_evaluate() {
        assert_eq!(g_preset("g1").unwrap().eval(10.0), 5.0);
        assert_eq!(g_preset("g4").unwrap().eval(10.0), 10.5);
        assert_eq!(g_preset("g6").unwrap().eval(10.0), 15.0);
        assert!(g_preset("g0").is_none());
    }
}
