//! Python bindings.
//!
//! Profiles cross the boundary as a list of `PlayerType` plus a list of
//! actions, each `"idle"`, `"spo"` or a `{pool_index: amount}` dict.

use std::collections::BTreeMap;

use delegation_lab as dl;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn to_py(e: dl::Error) -> PyErr {
    match e {
        dl::Error::Io(e) => PyIOError::new_err(e.to_string()),
        dl::Error::Invariant(_) | dl::Error::Draw { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "PlayerType", frozen, from_py_object)]
#[derive(Clone)]
struct PyPlayerType(dl::PlayerType);

#[pymethods]
impl PyPlayerType {
    #[new]
    fn new(stake: f64, cost: f64, idle_utility: f64) -> PyResult<Self> {
        dl::PlayerType::new(stake, cost, idle_utility).map(Self).map_err(to_py)
    }

    #[getter]
    fn stake(&self) -> f64 {
        self.0.stake
    }

    #[getter]
    fn cost(&self) -> f64 {
        self.0.cost
    }

    #[getter]
    fn idle_utility(&self) -> f64 {
        self.0.idle_utility
    }

    fn __repr__(&self) -> String {
        format!(
            "PlayerType(stake={}, cost={}, idle_utility={})",
            self.0.stake, self.0.cost, self.0.idle_utility
        )
    }
}

#[pyclass(name = "RewardScheme", frozen, from_py_object)]
#[derive(Clone)]
struct PyRewardScheme(dl::RewardScheme);

#[pymethods]
impl PyRewardScheme {
    /// Coefficients are constant term first.
    #[new]
    #[pyo3(signature = (a_coeffs, b_coeffs, cap, c_min, c_max))]
    fn new(a_coeffs: Vec<f64>, b_coeffs: Vec<f64>, cap: f64, c_min: f64, c_max: f64) -> PyResult<Self> {
        let a = dl::Polynomial::new(a_coeffs).map_err(to_py)?;
        let b = dl::Polynomial::new(b_coeffs).map_err(to_py)?;
        dl::RewardScheme::new(a, b, cap, c_min, c_max).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn baseline() -> Self {
        Self(dl::RewardScheme::baseline())
    }

    #[getter]
    fn a_coeffs(&self) -> Vec<f64> {
        self.0.pledge_component().coeffs().to_vec()
    }

    #[getter]
    fn b_coeffs(&self) -> Vec<f64> {
        self.0.delegation_component().coeffs().to_vec()
    }

    #[getter]
    fn cap(&self) -> f64 {
        self.0.cap()
    }

    #[getter]
    fn c_min(&self) -> f64 {
        self.0.c_min()
    }

    #[getter]
    fn c_max(&self) -> f64 {
        self.0.c_max()
    }

    fn pool_reward(&self, pledge: f64, external: f64) -> f64 {
        dl::pool_reward(&self.0, pledge, external)
    }

    fn alpha(&self, stake: f64, cost: f64) -> PyResult<f64> {
        dl::alpha(&self.0, stake, cost).map_err(to_py)
    }

    fn rate_for_pivotal(&self, pivotal_stake: f64) -> f64 {
        dl::rate_for_pivotal(&self.0, pivotal_stake)
    }

    /// `(gap, deficit, capacity)`; unattainable pools give `(gap, inf, -inf)`.
    fn pool_bounds(&self, pledge: f64, cost: f64, idle_utility: f64, rate: f64) -> PyResult<(f64, f64, f64)> {
        let b = dl::pool_bounds(&self.0, pledge, cost, idle_utility, rate).map_err(to_py)?;
        Ok((b.gap, b.deficit, b.capacity))
    }

    fn __repr__(&self) -> String {
        format!(
            "RewardScheme(a_coeffs={:?}, b_coeffs={:?}, cap={}, c_min={}, c_max={})",
            self.0.pledge_component().coeffs(),
            self.0.delegation_component().coeffs(),
            self.0.cap(),
            self.0.c_min(),
            self.0.c_max()
        )
    }
}

fn action_from_py(obj: &Bound<'_, PyAny>) -> PyResult<dl::Action> {
    if let Ok(tag) = obj.extract::<String>() {
        return match tag.as_str() {
            "idle" => Ok(dl::Action::Idle),
            "spo" => Ok(dl::Action::Spo),
            other => Err(PyValueError::new_err(format!("unknown action {other:?}"))),
        };
    }
    let map: BTreeMap<usize, f64> = obj.extract()?;
    Ok(dl::Action::Delegate(map))
}

fn action_to_py<'py>(py: Python<'py>, action: &dl::Action) -> PyResult<Bound<'py, PyAny>> {
    Ok(match action {
        dl::Action::Delegate(map) => {
            let d = PyDict::new(py);
            for (j, amount) in map {
                d.set_item(j, amount)?;
            }
            d.into_any()
        }
        other => other.tag().into_pyobject(py)?.into_any(),
    })
}

fn profile_from_py(types: Vec<PyPlayerType>, actions: &Bound<'_, PyList>) -> PyResult<dl::StrategyProfile> {
    let actions = actions.iter().map(|a| action_from_py(&a)).collect::<PyResult<Vec<_>>>()?;
    dl::StrategyProfile::new(types.into_iter().map(|t| t.0).collect(), actions).map_err(to_py)
}

fn raw_types(types: Vec<PyPlayerType>) -> Vec<dl::PlayerType> {
    types.into_iter().map(|t| t.0).collect()
}

/// Reward of every agent under a profile.
#[pyfunction]
fn rewards(types: Vec<PyPlayerType>, actions: &Bound<'_, PyList>, scheme: &PyRewardScheme) -> PyResult<Vec<f64>> {
    let p = profile_from_py(types, actions)?;
    let ev = dl::ProfileEvaluation::new(&p, &scheme.0);
    Ok((0..p.len()).map(|i| ev.reward(i)).collect())
}

/// Sufficient-condition verdict as a dict with `sufficient`, `pivotal_stake`,
/// `rate` and a list of `(agent, condition, slack)` violations.
#[pyfunction]
fn check_pne<'py>(
    py: Python<'py>,
    types: Vec<PyPlayerType>,
    actions: &Bound<'py, PyList>,
    scheme: &PyRewardScheme,
) -> PyResult<Bound<'py, PyDict>> {
    let p = profile_from_py(types, actions)?;
    let v = dl::check_pne_sufficient(&p, &scheme.0);
    let out = PyDict::new(py);
    out.set_item("sufficient", v.sufficient)?;
    out.set_item("pivotal_stake", v.pivotal_stake)?;
    out.set_item("rate", v.rate)?;
    let violations: Vec<(usize, String, f64)> = v
        .violations
        .iter()
        .map(|x| {
            let tag = condition_tag(&x.condition);
            (x.agent, tag, x.slack)
        })
        .collect();
    out.set_item("violations", violations)?;
    Ok(out)
}

fn condition_tag(c: &dl::Condition) -> String {
    match c {
        dl::Condition::DelegationTarget => "delegation_target",
        dl::Condition::IdleUtility => "idle_utility",
        dl::Condition::IdleDeviation => "idle_deviation",
        dl::Condition::Deficit => "deficit",
        dl::Condition::Capacity => "capacity",
    }
    .to_string()
}

/// Best unilateral deviation of one agent: `(current, best, deviation)` where
/// deviation is `"idle"`, `"solo_pool"` or `("delegate_to", j)`, or `None`.
#[pyfunction]
fn deviation_oracle<'py>(
    py: Python<'py>,
    types: Vec<PyPlayerType>,
    actions: &Bound<'py, PyList>,
    scheme: &PyRewardScheme,
    agent: usize,
) -> PyResult<(f64, f64, Option<Bound<'py, PyAny>>)> {
    let p = profile_from_py(types, actions)?;
    let r = dl::deviation_oracle(&p, &scheme.0, agent).map_err(to_py)?;
    let dev = match r.best_deviation {
        None => None,
        Some(dl::Deviation::Idle) => Some("idle".into_pyobject(py)?.into_any()),
        Some(dl::Deviation::SoloPool) => Some("solo_pool".into_pyobject(py)?.into_any()),
        Some(dl::Deviation::DelegateTo(j)) => Some(("delegate_to", j).into_pyobject(py)?.into_any()),
    };
    Ok((r.current, r.best, dev))
}

/// Ex post stability of the threshold strategy `stake >= theta`.
#[pyfunction]
fn stability_summary<'py>(
    py: Python<'py>,
    theta: f64,
    types: Vec<PyPlayerType>,
    scheme: &PyRewardScheme,
) -> PyResult<Bound<'py, PyDict>> {
    let strategy = dl::ThresholdStrategy::new(theta).map_err(to_py)?;
    let s = dl::stability_summary(strategy, &raw_types(types), &scheme.0).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("del", s.del)?;
    out.set_item("def", s.def)?;
    out.set_item("cap", s.cap)?;
    out.set_item("pivotal_stake", s.pivotal_stake)?;
    out.set_item("rate", s.rate)?;
    out.set_item("stable", s.stable)?;
    let verdict = match s.verdict {
        dl::StabilityVerdict::Stable => "stable",
        dl::StabilityVerdict::StableDegenerate => "stable_degenerate",
        dl::StabilityVerdict::Unstable => "unstable",
    };
    out.set_item("verdict", verdict)?;
    out.set_item("spos", s.spos)?;
    Ok(out)
}

/// Actions of the representative equilibrium for one reference pledge.
#[pyfunction]
fn representative_pne<'py>(
    py: Python<'py>,
    theta: f64,
    types: Vec<PyPlayerType>,
    scheme: &PyRewardScheme,
    reference: f64,
) -> PyResult<Bound<'py, PyList>> {
    let strategy = dl::ThresholdStrategy::new(theta).map_err(to_py)?;
    let p = dl::build_representative_pne(strategy, &raw_types(types), &scheme.0, reference).map_err(to_py)?;
    let items = p.actions().iter().map(|a| action_to_py(py, a)).collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, items)
}

#[pyfunction]
fn reference_pledges(lambda_min: f64, lambda_max: f64, m: usize) -> PyResult<Vec<f64>> {
    Ok(dl::reference_pledges(lambda_min, lambda_max, m).map_err(to_py)?.values().to_vec())
}

#[pyfunction]
fn greedy_delegation(
    reference: f64,
    deficits: Vec<f64>,
    capacities: Vec<f64>,
    pledges: Vec<f64>,
    total: f64,
) -> PyResult<Vec<f64>> {
    dl::greedy_delegation(reference, &deficits, &capacities, &pledges, total).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (pledges, external, ell, exact = true, eps_approx = 0.01))]
fn decentralization(pledges: Vec<f64>, external: Vec<f64>, ell: f64, exact: bool, eps_approx: f64) -> PyResult<f64> {
    let pools = dl::PublicPoolProfile::new(pledges, external).map_err(to_py)?;
    if exact {
        dl::decentralization_exact(&pools, ell).map_err(to_py)
    } else {
        dl::decentralization_fptas(&pools, ell, eps_approx).map_err(to_py)
    }
}

/// `(participation, expenditure, decentralization)` of a profile.
#[pyfunction]
#[pyo3(signature = (types, actions, scheme, ell = 0.5, eps_approx = 0.01))]
fn objectives(
    types: Vec<PyPlayerType>,
    actions: &Bound<'_, PyList>,
    scheme: &PyRewardScheme,
    ell: f64,
    eps_approx: f64,
) -> PyResult<(f64, f64, f64)> {
    let p = profile_from_py(types, actions)?;
    let r = dl::evaluate_objectives(&p, &scheme.0, ell, eps_approx, dl::ExpenditureMode::SchemePayout)
        .map_err(to_py)?;
    Ok((r.participation, r.expenditure, r.decentralization))
}

#[pyfunction]
#[pyo3(signature = (u, pareto_h = 100.0, gamma = 1.5))]
fn sample_pareto(u: f64, pareto_h: f64, gamma: f64) -> PyResult<f64> {
    let dist = dl::montecarlo::TypeDistribution {
        pareto_h,
        gamma,
        ..dl::montecarlo::TypeDistribution::baseline()
    };
    dist.validate().map_err(to_py)?;
    Ok(dl::montecarlo::sample_pareto(&dist, u))
}

/// The baseline experiment config as a JSON string.
#[pyfunction]
fn baseline_config() -> PyResult<String> {
    serde_json::to_string_pretty(&dl::montecarlo::baseline_config()).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs a JSON experiment config, writes results under `out_dir` and returns
/// the written paths.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir, threads = None))]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: &str, threads: Option<usize>) -> PyResult<Vec<String>> {
    let config = dl::montecarlo::ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let experiment = py
        .detach(|| dl::montecarlo::run_experiment(&config, threads))
        .map_err(to_py)?;
    let paths = dl::montecarlo::write_experiment(std::path::Path::new(out_dir), &experiment).map_err(to_py)?;
    Ok(paths.into_iter().map(|p| p.display().to_string()).collect())
}

#[pymodule]
#[pyo3(name = "delegation_lab")]
fn delegation_lab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlayerType>()?;
    m.add_class::<PyRewardScheme>()?;
    m.add_function(wrap_pyfunction!(rewards, m)?)?;
    m.add_function(wrap_pyfunction!(check_pne, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(stability_summary, m)?)?;
    m.add_function(wrap_pyfunction!(representative_pne, m)?)?;
    m.add_function(wrap_pyfunction!(reference_pledges, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_delegation, m)?)?;
    m.add_function(wrap_pyfunction!(decentralization, m)?)?;
    m.add_function(wrap_pyfunction!(objectives, m)?)?;
    m.add_function(wrap_pyfunction!(sample_pareto, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
