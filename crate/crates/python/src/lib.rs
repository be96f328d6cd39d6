use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fbsense_core::chain;
use fbsense_core::experiment;
use fbsense_core::model;
use fbsense_core::optimizer::{self, InnerMethod, OptResult, OptimizerConfig};
use fbsense_core::sim;
use fbsense_core::{Error, Rate, Scheme, SystemModel};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rate(r: Rate) -> Option<f64> {
    r.value()
}

fn parse_scheme(tag: &str) -> PyResult<Scheme> {
    tag.parse().map_err(py_err)
}

#[pyclass(name = "NetworkConfig", from_py_object)]
#[derive(Clone)]
struct PyNetworkConfig {
    #[pyo3(get, set)]
    primary_users: usize,
    #[pyo3(get, set)]
    secondary_users: usize,
    #[pyo3(get, set)]
    arrival_rate: f64,
    #[pyo3(get, set)]
    primary_power: f64,
    #[pyo3(get, set)]
    secondary_power: f64,
    #[pyo3(get, set)]
    primary_link_distance: f64,
    #[pyo3(get, set)]
    secondary_link_distance: f64,
    #[pyo3(get, set)]
    cross_distance: f64,
    #[pyo3(get, set)]
    path_loss_exponent: f64,
    #[pyo3(get, set)]
    noise_density: f64,
    /// Linear outage threshold.
    #[pyo3(get, set)]
    outage_threshold: f64,
    /// Defaults to uniform shares over the primaries when `None`.
    #[pyo3(get, set)]
    resource_shares: Option<Vec<f64>>,
}

impl PyNetworkConfig {
    fn to_core(&self) -> model::NetworkConfig {
        model::NetworkConfig {
            primary_users: self.primary_users,
            secondary_users: self.secondary_users,
            arrival_rate: self.arrival_rate,
            primary_power: self.primary_power,
            secondary_power: self.secondary_power,
            primary_link_distance: self.primary_link_distance,
            secondary_link_distance: self.secondary_link_distance,
            cross_distance: self.cross_distance,
            path_loss_exponent: self.path_loss_exponent,
            noise_density: self.noise_density,
            outage_threshold: self.outage_threshold,
            resource_shares: self
                .resource_shares
                .clone()
                .unwrap_or_else(|| model::uniform_shares(self.primary_users)),
        }
    }
}

#[pymethods]
impl PyNetworkConfig {
    #[new]
    #[pyo3(signature = (arrival_rate=0.1, primary_users=4, secondary_users=2, zeta_db=10.0))]
    fn new(arrival_rate: f64, primary_users: usize, secondary_users: usize, zeta_db: f64) -> Self {
        let d = model::NetworkConfig::default();
        Self {
            primary_users,
            secondary_users,
            arrival_rate,
            primary_power: d.primary_power,
            secondary_power: d.secondary_power,
            primary_link_distance: d.primary_link_distance,
            secondary_link_distance: d.secondary_link_distance,
            cross_distance: d.cross_distance,
            path_loss_exponent: d.path_loss_exponent,
            noise_density: d.noise_density,
            outage_threshold: model::db_to_linear(zeta_db),
            resource_shares: None,
        }
    }

    fn primary_outage(&self) -> PyResult<f64> {
        self.to_core().primary_outage().map_err(py_err)
    }

    fn secondary_outage(&self) -> PyResult<f64> {
        self.to_core().secondary_outage().map_err(py_err)
    }

    fn validate(&self) -> PyResult<()> {
        self.to_core().validate().map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkConfig(M_p={}, M_s={}, lambda_p={})",
            self.primary_users, self.secondary_users, self.arrival_rate
        )
    }
}

#[pyclass(name = "SensingConfig", from_py_object)]
#[derive(Clone)]
struct PySensingConfig {
    inner: model::SensingConfig,
}

#[pymethods]
impl PySensingConfig {
    #[new]
    fn new(threshold: f64, bins: usize, idle_variance: f64, busy_variance: f64) -> Self {
        Self {
            inner: model::SensingConfig {
                threshold,
                bins,
                idle_variance,
                busy_variance,
            },
        }
    }

    #[staticmethod]
    #[pyo3(signature = (cfg, bins=4))]
    fn for_network(cfg: &PyNetworkConfig, bins: usize) -> Self {
        Self {
            inner: model::SensingConfig::for_network(&cfg.to_core(), bins),
        }
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins
    }

    fn idle_bins(&self) -> PyResult<Vec<f64>> {
        self.inner.idle_bins().map_err(py_err)
    }

    fn busy_bins(&self) -> PyResult<Vec<f64>> {
        self.inner.busy_bins().map_err(py_err)
    }
}

#[pyclass(name = "AccessPolicy", from_py_object)]
#[derive(Clone)]
struct PyAccessPolicy {
    inner: model::AccessPolicy,
}

#[pymethods]
impl PyAccessPolicy {
    #[new]
    #[pyo3(signature = (access, scheme="nofb"))]
    fn new(access: Vec<f64>, scheme: &str) -> PyResult<Self> {
        let inner = model::AccessPolicy::new(access, parse_scheme(scheme)?).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn access(&self) -> Vec<f64> {
        self.inner.access.clone()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.tag()
    }

    fn __repr__(&self) -> String {
        format!(
            "AccessPolicy({:?}, scheme={:?})",
            self.inner.access,
            self.inner.scheme.tag()
        )
    }
}

#[pyclass(name = "OptResult")]
struct PyOptResult {
    inner: OptResult,
}

#[pymethods]
impl PyOptResult {
    #[getter]
    fn policy(&self) -> PyAccessPolicy {
        PyAccessPolicy {
            inner: self.inner.policy.clone(),
        }
    }

    #[getter]
    fn access(&self) -> Vec<f64> {
        self.inner.policy.access.clone()
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn tau_star(&self) -> Option<f64> {
        self.inner.tau_star
    }

    #[getter]
    fn feasible(&self) -> bool {
        self.inner.feasible
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    fn __repr__(&self) -> String {
        format!(
            "OptResult(feasible={}, objective={}, access={:?})",
            self.inner.feasible, self.inner.objective, self.inner.policy.access
        )
    }
}

fn wrap(r: fbsense_core::Result<OptResult>) -> PyResult<PyOptResult> {
    r.map(|inner| PyOptResult { inner }).map_err(py_err)
}

#[pyfunction]
fn outage_probability(
    power: f64,
    distance: f64,
    path_loss_exponent: f64,
    threshold: f64,
    noise_density: f64,
) -> PyResult<f64> {
    model::outage_probability(
        power,
        distance,
        path_loss_exponent,
        threshold,
        noise_density,
    )
    .map_err(py_err)
}

#[pyfunction]
fn bin_probabilities(threshold: f64, bins: usize, variance: f64) -> PyResult<Vec<f64>> {
    model::bin_probabilities(threshold, bins, variance).map_err(py_err)
}

/// Secondary throughput of a policy under its scheme; `None` when unstable.
#[pyfunction]
fn throughput(
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
    policy: &PyAccessPolicy,
) -> PyResult<Option<f64>> {
    let sensing = match policy.inner.scheme {
        Scheme::HardDecision | Scheme::Genie => sensing.inner.single_bin(),
        _ => sensing.inner.clone(),
    };
    let model = SystemModel::new(&cfg.to_core(), &sensing).map_err(py_err)?;
    Ok(rate(model.throughput(&policy.inner).map_err(py_err)?))
}

#[pyfunction]
fn primary_service_rate(
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
    policy: &PyAccessPolicy,
) -> PyResult<f64> {
    fbsense_core::rates::primary_service_rate_nofb(&cfg.to_core(), &sensing.inner, &policy.inner)
        .map_err(py_err)
}

#[pyfunction]
fn pi0_feedback(
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
    policy: &PyAccessPolicy,
) -> PyResult<Option<f64>> {
    Ok(rate(
        fbsense_core::rates::pi0_feedback(&cfg.to_core(), &sensing.inner, &policy.inner)
            .map_err(py_err)?,
    ))
}

#[pyfunction]
fn delta_pi0(
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
    policy: &PyAccessPolicy,
) -> PyResult<Option<f64>> {
    Ok(rate(
        fbsense_core::rates::delta_pi0(&cfg.to_core(), &sensing.inner, &policy.inner)
            .map_err(py_err)?,
    ))
}

/// Mean primary delay in slots under the policy's scheme; `None` when unstable.
#[pyfunction]
fn delay(
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
    policy: &PyAccessPolicy,
) -> PyResult<Option<f64>> {
    let core = cfg.to_core();
    let model = SystemModel::new(&core, &sensing.inner).map_err(py_err)?;
    let s1 = model.busy_access(&policy.inner.access).map_err(py_err)?;
    let r = match policy.inner.scheme {
        Scheme::Feedback => chain::delay_fb(&model.chain_params(s1).map_err(py_err)?),
        _ => chain::delay_nofb(core.arrival_rate, model.primary_service_rate(s1)),
    };
    Ok(rate(r))
}

#[pyfunction]
fn solve_nofb(cfg: &PyNetworkConfig, sensing: &PySensingConfig) -> PyResult<PyOptResult> {
    wrap(optimizer::solve_nofb(&cfg.to_core(), &sensing.inner))
}

#[pyfunction]
#[pyo3(signature = (cfg, sensing, step=1e-3, projected_gradient=false))]
fn solve_feedback(
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
    step: f64,
    projected_gradient: bool,
) -> PyResult<PyOptResult> {
    let opt = OptimizerConfig {
        step,
        inner_method: if projected_gradient {
            InnerMethod::ProjectedGradient
        } else {
            InnerMethod::StructuredGreedy
        },
        ..OptimizerConfig::default()
    };
    wrap(optimizer::solve_feedback(
        &cfg.to_core(),
        &sensing.inner,
        &opt,
    ))
}

#[pyfunction]
fn baseline_hard_decision(
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
) -> PyResult<PyOptResult> {
    wrap(optimizer::baseline_hard_decision(
        &cfg.to_core(),
        &sensing.inner,
    ))
}

#[pyfunction]
fn baseline_genie(cfg: &PyNetworkConfig) -> PyResult<PyOptResult> {
    wrap(optimizer::baseline_genie(&cfg.to_core()))
}

/// Monte Carlo run; returns a dict of `(mean, std_error)` pairs.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (cfg, sensing, policy, slots=1_000_000, warmup=10_000, seed=1, replications=10))]
fn simulate<'py>(
    py: Python<'py>,
    cfg: &PyNetworkConfig,
    sensing: &PySensingConfig,
    policy: &PyAccessPolicy,
    slots: u64,
    warmup: u64,
    seed: u64,
    replications: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let sim_cfg = sim::SimConfig {
        slots,
        warmup,
        seed,
        replications,
        ..sim::SimConfig::default()
    };
    let core = cfg.to_core();
    let report = py
        .detach(|| sim::run(&core, &sensing.inner, &policy.inner, &sim_cfg))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    let pair = |e: sim::Estimate| (e.mean, e.std_error);
    out.set_item("mu_s", pair(report.mu_s_hat))?;
    out.set_item("mu_p", pair(report.mu_p_hat))?;
    out.set_item("delay", report.delay_hat.map(pair))?;
    out.set_item("pi0", pair(report.pi0_hat))?;
    out.set_item("collisions", report.collisions)?;
    out.set_item("seed", report.seed_used)?;
    Ok(out)
}

/// Run a sweep from config text and return the CSV.
#[pyfunction]
fn run_sweep(py: Python<'_>, config: &str) -> PyResult<String> {
    let exp = experiment::parse_experiment(config).map_err(py_err)?;
    let out = py.detach(|| experiment::run_sweep(&exp)).map_err(py_err)?;
    Ok(out.csv)
}

/// Parse a config file; raises `ValueError` listing every problem.
#[pyfunction]
fn validate_config(path: &str) -> PyResult<usize> {
    let exp = experiment::validate_config(std::path::Path::new(path)).map_err(py_err)?;
    Ok(exp.sweep.values.len() * exp.schemes.len())
}

#[pymodule]
fn fbsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkConfig>()?;
    m.add_class::<PySensingConfig>()?;
    m.add_class::<PyAccessPolicy>()?;
    m.add_class::<PyOptResult>()?;
    m.add_function(wrap_pyfunction!(outage_probability, m)?)?;
    m.add_function(wrap_pyfunction!(bin_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(throughput, m)?)?;
    m.add_function(wrap_pyfunction!(primary_service_rate, m)?)?;
    m.add_function(wrap_pyfunction!(pi0_feedback, m)?)?;
    m.add_function(wrap_pyfunction!(delta_pi0, m)?)?;
    m.add_function(wrap_pyfunction!(delay, m)?)?;
    m.add_function(wrap_pyfunction!(solve_nofb, m)?)?;
    m.add_function(wrap_pyfunction!(solve_feedback, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_hard_decision, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_genie, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    Ok(())
}
