//! Experiment configs and the parameter-sweep harness.
//!
//! Configs are TOML files written with dotted keys (`network.M_p = 4`); every
//! key is optional and an empty file yields the default experiment. `zeta_db`
//! is the only dB quantity, everything else is linear SI.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use toml::{Table, Value};

use crate::chain::{delay_fb, delay_nofb};
use crate::error::{Diagnostic, Error, Result};
use crate::model::{
    db_to_linear, threshold_for_exceedance, uniform_shares, NetworkConfig, Scheme, SensingConfig,
    DEFAULT_IDLE_EXCEEDANCE,
};
use crate::optimizer::{self, InnerMethod, OptResult, OptimizerConfig};
use crate::rates::SystemModel;
use crate::sim::{self, BackoffRule, OwnerSchedule, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    ArrivalRate,
    SecondaryUsers,
}

impl SweepVariable {
    pub fn key(self) -> &'static str {
        match self {
            SweepVariable::ArrivalRate => "lambda_p",
            SweepVariable::SecondaryUsers => "M_s",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Sweep {
    /// `start, start + step, ...` up to and including `stop` (to rounding).
    pub fn grid(variable: SweepVariable, start: f64, stop: f64, step: f64) -> Self {
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self {
            variable,
            values: (0..count).map(|k| start + k as f64 * step).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub base: NetworkConfig,
    pub sensing: SensingConfig,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    pub optimizer: OptimizerConfig,
    /// Absent means analytic results only.
    pub sim: Option<SimConfig>,
    pub output_path: Option<PathBuf>,
}

impl Default for Experiment {
    fn default() -> Self {
        let base = NetworkConfig::default();
        let sensing = SensingConfig::for_network(&base, 4);
        Self {
            base,
            sensing,
            sweep: Sweep::grid(SweepVariable::ArrivalRate, 0.0, 0.25, 0.005),
            schemes: Scheme::ALL.to_vec(),
            optimizer: OptimizerConfig::default(),
            sim: None,
            output_path: None,
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Typed access to one config section, recording problems as it goes.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    diags: &'a mut Vec<Diagnostic>,
    known: &'static [&'static str],
}

impl Section<'_> {
    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn float(&mut self, key: &str, target: &mut f64) {
        match self.get(key) {
            None => {}
            Some(Value::Float(v)) => *target = *v,
            Some(Value::Integer(v)) => *target = *v as f64,
            Some(_) => self
                .diags
                .push(Diagnostic::new(self.field(key), "expected a number")),
        }
    }

    fn opt_float(&mut self, key: &str) -> Option<f64> {
        let mut v = f64::NAN;
        self.get(key)?;
        self.float(key, &mut v);
        (!v.is_nan()).then_some(v)
    }

    fn count(&mut self, key: &str) -> Option<u64> {
        match self.get(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as u64),
            _ => {
                self.diags.push(Diagnostic::new(
                    self.field(key),
                    "expected a nonnegative integer",
                ));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.get(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.diags
                    .push(Diagnostic::new(self.field(key), "expected a string"));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.get(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.diags
                    .push(Diagnostic::new(self.field(key), "expected true or false"));
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = self.get(key)? else {
            self.diags.push(Diagnostic::new(
                self.field(key),
                "expected an array of numbers",
            ));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(v) => out.push(*v),
                Value::Integer(v) => out.push(*v as f64),
                _ => {
                    self.diags.push(Diagnostic::new(
                        self.field(key),
                        "expected an array of numbers",
                    ));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn reject_unknown(&mut self) {
        let Some(table) = self.table else { return };
        for key in table.keys() {
            if !self.known.contains(&key.as_str()) {
                self.diags
                    .push(Diagnostic::new(self.field(key), "unknown key"));
            }
        }
    }
}

const NETWORK_KEYS: &[&str] = &[
    "M_p", "M_s", "lambda_p", "G_p", "G_s", "r_pd", "r_sd", "r_ps", "gamma", "N_0", "zeta_db",
    "omega_p",
];
const SENSING_KEYS: &[&str] = &["n", "eta", "sigma0_sq", "sigma1_sq"];
const SWEEP_KEYS: &[&str] = &["variable", "start", "stop", "step", "values"];
const OPTIMIZER_KEYS: &[&str] = &["nu", "inner_tol", "inner_method", "grid_step"];
const SIM_KEYS: &[&str] = &[
    "enabled",
    "slots",
    "warmup",
    "seed",
    "replications",
    "owner_schedule",
    "backoff",
];
const OUTPUT_KEYS: &[&str] = &["path"];

/// Parse a config text into a fully resolved, validated experiment.
pub fn parse_experiment(text: &str) -> Result<Experiment> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut diags = Vec::new();
    let table_of = |name: &str, diags: &mut Vec<Diagnostic>| match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            diags.push(Diagnostic::new(name, "expected a table of dotted keys"));
            None
        }
    };
    let network = table_of("network", &mut diags);
    let sensing = table_of("sensing", &mut diags);
    let sweep = table_of("sweep", &mut diags);
    let optimizer = table_of("optimizer", &mut diags);
    let sim = table_of("sim", &mut diags);
    let output = table_of("output", &mut diags);
    for key in root.keys() {
        if ![
            "network",
            "sensing",
            "sweep",
            "optimizer",
            "sim",
            "output",
            "schemes",
        ]
        .contains(&key.as_str())
        {
            diags.push(Diagnostic::new(key.clone(), "unknown key"));
        }
    }

    let mut exp = Experiment::default();

    let mut s = Section {
        name: "network",
        table: network,
        diags: &mut diags,
        known: NETWORK_KEYS,
    };
    let cfg = &mut exp.base;
    if let Some(v) = s.count("M_p") {
        cfg.primary_users = v as usize;
        cfg.resource_shares = uniform_shares(cfg.primary_users);
    }
    if let Some(v) = s.count("M_s") {
        cfg.secondary_users = v as usize;
    }
    s.float("lambda_p", &mut cfg.arrival_rate);
    s.float("G_p", &mut cfg.primary_power);
    s.float("G_s", &mut cfg.secondary_power);
    s.float("r_pd", &mut cfg.primary_link_distance);
    s.float("r_sd", &mut cfg.secondary_link_distance);
    s.float("r_ps", &mut cfg.cross_distance);
    s.float("gamma", &mut cfg.path_loss_exponent);
    s.float("N_0", &mut cfg.noise_density);
    if let Some(db) = s.opt_float("zeta_db") {
        cfg.outage_threshold = db_to_linear(db);
    }
    if let Some(shares) = s.floats("omega_p") {
        cfg.resource_shares = shares;
    }
    s.reject_unknown();
    diags.extend(exp.base.diagnostics());

    let mut s = Section {
        name: "sensing",
        table: sensing,
        diags: &mut diags,
        known: SENSING_KEYS,
    };
    let bins = s.count("n").map_or(4, |v| v as usize);
    let derived = SensingConfig::for_network(&exp.base, bins);
    let idle_variance = s.opt_float("sigma0_sq").unwrap_or(derived.idle_variance);
    exp.sensing = SensingConfig {
        threshold: s
            .opt_float("eta")
            .unwrap_or_else(|| threshold_for_exceedance(idle_variance, DEFAULT_IDLE_EXCEEDANCE)),
        bins,
        idle_variance,
        busy_variance: s.opt_float("sigma1_sq").unwrap_or(derived.busy_variance),
    };
    s.reject_unknown();
    diags.extend(exp.sensing.diagnostics());

    let mut s = Section {
        name: "sweep",
        table: sweep,
        diags: &mut diags,
        known: SWEEP_KEYS,
    };
    let variable = match s.string("variable").as_deref() {
        None | Some("lambda_p") => SweepVariable::ArrivalRate,
        Some("M_s") => SweepVariable::SecondaryUsers,
        Some(_) => {
            s.diags.push(Diagnostic::new(
                "sweep.variable",
                "expected \"lambda_p\" or \"M_s\"",
            ));
            SweepVariable::ArrivalRate
        }
    };
    if let Some(values) = s.floats("values") {
        exp.sweep = Sweep { variable, values };
    } else {
        let (mut start, mut stop, mut step) = match variable {
            SweepVariable::ArrivalRate => (0.0, 0.25, 0.005),
            SweepVariable::SecondaryUsers => (1.0, 8.0, 1.0),
        };
        s.float("start", &mut start);
        s.float("stop", &mut stop);
        s.float("step", &mut step);
        if !(step > 0.0 && step.is_finite()) {
            s.diags
                .push(Diagnostic::new("sweep.step", "must be strictly positive"));
        } else if !(stop >= start) {
            s.diags.push(Diagnostic::new(
                "sweep.stop",
                "must not be below sweep.start",
            ));
        } else {
            exp.sweep = Sweep::grid(variable, start, stop, step);
        }
    }
    s.reject_unknown();
    if exp.sweep.values.is_empty() {
        diags.push(Diagnostic::new("sweep.values", "sweep grid is empty"));
    }
    for &v in &exp.sweep.values {
        let ok = match exp.sweep.variable {
            SweepVariable::ArrivalRate => (0.0..=1.0).contains(&v),
            SweepVariable::SecondaryUsers => v >= 1.0 && v.fract() == 0.0,
        };
        if !ok {
            diags.push(Diagnostic::new(
                "sweep.values",
                format!("{v} is not a valid {}", exp.sweep.variable.key()),
            ));
            break;
        }
    }

    match root.get("schemes") {
        None => {}
        Some(Value::Array(items)) => {
            let parsed: Option<Vec<Scheme>> = items
                .iter()
                .map(|v| v.as_str().and_then(|s| s.parse().ok()))
                .collect();
            match parsed {
                Some(list) if !list.is_empty() => exp.schemes = list,
                _ => diags.push(Diagnostic::new(
                    "schemes",
                    "expected a nonempty list of fb, nofb, hard, genie",
                )),
            }
        }
        Some(_) => diags.push(Diagnostic::new(
            "schemes",
            "expected a list of scheme names",
        )),
    }

    let mut s = Section {
        name: "optimizer",
        table: optimizer,
        diags: &mut diags,
        known: OPTIMIZER_KEYS,
    };
    s.float("nu", &mut exp.optimizer.step);
    s.float("inner_tol", &mut exp.optimizer.inner_tol);
    s.float("grid_step", &mut exp.optimizer.grid_step);
    match s.string("inner_method").as_deref() {
        None | Some("greedy") => {}
        Some("projected_gradient") => exp.optimizer.inner_method = InnerMethod::ProjectedGradient,
        Some(_) => s.diags.push(Diagnostic::new(
            "optimizer.inner_method",
            "expected \"greedy\" or \"projected_gradient\"",
        )),
    }
    s.reject_unknown();
    if let Err(Error::Config(d)) = exp.optimizer.validate() {
        diags.extend(d);
    }

    let mut s = Section {
        name: "sim",
        table: sim,
        diags: &mut diags,
        known: SIM_KEYS,
    };
    if s.table.is_some() && s.boolean("enabled") != Some(false) {
        let mut cfg = SimConfig::default();
        cfg.slots = s.count("slots").unwrap_or(cfg.slots);
        cfg.warmup = s.count("warmup").unwrap_or(cfg.warmup);
        cfg.seed = s.count("seed").unwrap_or(cfg.seed);
        cfg.replications = s
            .count("replications")
            .map_or(cfg.replications, |v| v as usize);
        match s.string("owner_schedule").as_deref() {
            None | Some("random") => {}
            Some("round_robin") => cfg.owner_schedule = OwnerSchedule::RoundRobin,
            Some(_) => s.diags.push(Diagnostic::new(
                "sim.owner_schedule",
                "expected \"random\" or \"round_robin\"",
            )),
        }
        match s.string("backoff").as_deref() {
            None | Some("per_user") => {}
            Some("next_slot") => cfg.backoff = BackoffRule::NextSlotOnly,
            Some(_) => s.diags.push(Diagnostic::new(
                "sim.backoff",
                "expected \"per_user\" or \"next_slot\"",
            )),
        }
        s.diags.extend(cfg.diagnostics());
        exp.sim = Some(cfg);
    }
    s.reject_unknown();

    let mut s = Section {
        name: "output",
        table: output,
        diags: &mut diags,
        known: OUTPUT_KEYS,
    };
    exp.output_path = s.string("path").map(PathBuf::from);
    s.reject_unknown();

    if diags.is_empty() {
        Ok(exp)
    } else {
        Err(Error::Config(diags))
    }
}

/// Read and resolve a config file.
pub fn validate_config(path: &Path) -> Result<Experiment> {
    parse_experiment(&std::fs::read_to_string(path)?)
}

/// Optimized design of one scheme with its derived primary-side metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub result: OptResult,
    pub mu_p: f64,
    pub delay: Option<f64>,
    pub pi0: Option<f64>,
}

/// Optimize a scheme and evaluate throughput, primary service rate, delay and `pi_0`.
pub fn analyze(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    scheme: Scheme,
    opt: &OptimizerConfig,
) -> Result<Analysis> {
    let result = match scheme {
        Scheme::Feedback => optimizer::solve_feedback(cfg, sensing, opt)?,
        Scheme::NoFeedback => optimizer::solve_nofb(cfg, sensing)?,
        Scheme::HardDecision => optimizer::baseline_hard_decision(cfg, sensing)?,
        Scheme::Genie => optimizer::baseline_genie(cfg)?,
    };
    let model_sensing = match scheme {
        Scheme::HardDecision | Scheme::Genie => sensing.single_bin(),
        _ => sensing.clone(),
    };
    let model = SystemModel::new(cfg, &model_sensing)?;
    let mu_p = model.primary_rate(&result.policy)?;
    let lambda = cfg.arrival_rate;
    let (delay, pi0) = if !result.feasible {
        (None, None)
    } else {
        match scheme {
            Scheme::Feedback => {
                let s1 = model.busy_access(&result.policy.access)?;
                (
                    delay_fb(&model.chain_params(s1)?).value(),
                    model.pi0_feedback(s1).value(),
                )
            }
            _ => (delay_nofb(lambda, mu_p).value(), Some(1.0 - lambda / mu_p)),
        }
    };
    Ok(Analysis {
        result,
        mu_p,
        delay,
        pi0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimColumns {
    pub mu_s_hat: f64,
    pub se_mu_s: f64,
    pub delay_hat: Option<f64>,
    pub se_delay: Option<f64>,
    pub pi0_hat: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub feasible: bool,
    pub mu_s: Option<f64>,
    pub network_throughput: Option<f64>,
    pub mu_p: Option<f64>,
    pub delay: Option<f64>,
    pub pi0: Option<f64>,
    /// Per-bin access probabilities; a hard-decision policy repeats its
    /// single value in every bin and the genie has none.
    pub access: Option<Vec<f64>>,
    pub tau_star: Option<f64>,
    pub sim: Option<SimColumns>,
}

fn point_config(exp: &Experiment, value: f64) -> NetworkConfig {
    let mut cfg = exp.base.clone();
    match exp.sweep.variable {
        SweepVariable::ArrivalRate => cfg.arrival_rate = value,
        SweepVariable::SecondaryUsers => cfg.secondary_users = value as usize,
    }
    cfg
}

fn evaluate(exp: &Experiment, point: usize, scheme_index: usize) -> Result<Row> {
    let value = exp.sweep.values[point];
    let scheme = exp.schemes[scheme_index];
    let cfg = point_config(exp, value);
    let a = analyze(&cfg, &exp.sensing, scheme, &exp.optimizer)?;
    let mut row = Row {
        sweep_value: value,
        scheme,
        feasible: a.result.feasible,
        mu_s: None,
        network_throughput: None,
        mu_p: None,
        delay: None,
        pi0: None,
        access: None,
        tau_star: None,
        sim: None,
    };
    if !a.result.feasible {
        return Ok(row);
    }
    row.mu_s = Some(a.result.objective);
    row.network_throughput = Some(a.result.objective * cfg.secondary_users as f64);
    row.mu_p = Some(a.mu_p);
    row.delay = a.delay;
    row.pi0 = a.pi0;
    row.tau_star = a.result.tau_star;
    row.access = match scheme {
        Scheme::Genie => None,
        Scheme::HardDecision => Some(vec![a.result.policy.access[0]; exp.sensing.bins]),
        _ => Some(a.result.policy.access.clone()),
    };
    if let Some(sim_cfg) = &exp.sim {
        let seed = sim_cfg
            .seed
            .wrapping_add((point * exp.schemes.len() + scheme_index) as u64);
        let sim_cfg = SimConfig {
            seed,
            ..sim_cfg.clone()
        };
        let report = sim::run(&cfg, &exp.sensing, &a.result.policy, &sim_cfg)?;
        row.sim = Some(SimColumns {
            mu_s_hat: report.mu_s_hat.mean,
            se_mu_s: report.mu_s_hat.std_error,
            delay_hat: report.delay_hat.map(|d| d.mean),
            se_delay: report.delay_hat.map(|d| d.std_error),
            pi0_hat: report.pi0_hat.mean,
            seed,
        });
    }
    Ok(row)
}

/// Evaluate every (sweep value, scheme) pair, ordered by sweep index then scheme.
pub fn run_rows(exp: &Experiment) -> Result<Vec<Row>> {
    let pairs: Vec<(usize, usize)> = (0..exp.sweep.values.len())
        .flat_map(|p| (0..exp.schemes.len()).map(move |s| (p, s)))
        .collect();
    pairs
        .par_iter()
        .map(|&(p, s)| evaluate(exp, p, s))
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render rows as CSV with a header; infeasible rows keep empty cells.
pub fn rows_to_csv(exp: &Experiment, rows: &[Row]) -> Result<String> {
    let bins = exp.sensing.bins;
    let mut header: Vec<String> = [
        "sweep_value",
        "scheme",
        "feasible",
        "mu_s",
        "network_throughput",
        "mu_p",
        "delay",
        "pi0",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=bins).map(|i| format!("a_{i}")));
    header.push("tau_star".into());
    if exp.sim.is_some() {
        header.extend(
            [
                "mu_s_hat",
                "se_mu_s",
                "delay_hat",
                "se_delay",
                "pi0_hat",
                "seed",
            ]
            .map(String::from),
        );
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.sweep_value.to_string(),
            row.scheme.tag().to_string(),
            row.feasible.to_string(),
            cell(row.mu_s),
            cell(row.network_throughput),
            cell(row.mu_p),
            cell(row.delay),
            cell(row.pi0),
        ];
        match &row.access {
            Some(a) => rec.extend(a.iter().map(|x| x.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), bins)),
        }
        rec.push(cell(row.tau_star));
        if exp.sim.is_some() {
            match &row.sim {
                Some(s) => rec.extend([
                    s.mu_s_hat.to_string(),
                    s.se_mu_s.to_string(),
                    cell(s.delay_hat),
                    cell(s.se_delay),
                    s.pi0_hat.to_string(),
                    s.seed.to_string(),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 6)),
            }
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Gnuplot script plotting throughput and delay per scheme from the CSV.
pub fn gnuplot_script(exp: &Experiment, csv_name: &str) -> String {
    let schemes: Vec<&str> = exp.schemes.iter().map(|s| s.tag()).collect();
    let (xlabel, throughput_col, throughput_label) = match exp.sweep.variable {
        SweepVariable::ArrivalRate => ("PU arrival rate", 4, "SU throughput (packets/slot)"),
        SweepVariable::SecondaryUsers => (
            "number of SUs",
            5,
            "secondary network throughput (packets/slot)",
        ),
    };
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot -p {csv_name}.gp");
    let _ = writeln!(s, "set datafile separator \",\"");
    let _ = writeln!(s, "set key outside");
    let _ = writeln!(s, "set xlabel \"{xlabel}\"");
    let _ = writeln!(s, "schemes = \"{}\"", schemes.join(" "));
    let _ = writeln!(s, "set multiplot layout 2,1");
    for (col, label) in [(throughput_col, throughput_label), (7, "PU delay (slots)")] {
        let _ = writeln!(s, "set ylabel \"{label}\"");
        let _ = writeln!(
            s,
            "plot for [s in schemes] \"{csv_name}\" every ::1 using 1:(strcol(2) eq s ? ${col} : 1/0) with linespoints title s"
        );
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

pub struct SweepOutput {
    pub rows: Vec<Row>,
    pub csv: String,
}

impl SweepOutput {
    pub fn any_feasible(&self) -> bool {
        self.rows.iter().any(|r| r.feasible)
    }
}

pub fn run_sweep(exp: &Experiment) -> Result<SweepOutput> {
    let rows = run_rows(exp)?;
    let csv = rows_to_csv(exp, &rows)?;
    Ok(SweepOutput { rows, csv })
}

/// Write the CSV and a `<path>.gp` gnuplot script next to it.
pub fn write_sweep(exp: &Experiment, output: &SweepOutput, path: &Path) -> Result<()> {
    std::fs::write(path, &output.csv)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut script = path.as_os_str().to_owned();
    script.push(".gp");
    std::fs::write(PathBuf::from(script), gnuplot_script(exp, &name))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(err: Error) -> Vec<String> {
        match err {
            Error::Config(d) => d.into_iter().map(|d| d.field).collect(),
            other => panic!("expected diagnostics, got {other}"),
        }
    }

    #[test]
    fn empty_config_is_the_default_experiment() {
        let exp = parse_experiment("").unwrap();
        assert_eq!(exp, Experiment::default());
        assert_eq!(exp.base.primary_users, 4);
        assert_eq!(exp.base.secondary_users, 2);
        assert_eq!(exp.sensing.bins, 4);
        assert_eq!(exp.sweep.values.len(), 51);
        assert!((exp.sweep.values[50] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dotted_keys_override_defaults() {
        let exp = parse_experiment(
            "network.M_p = 3\nnetwork.zeta_db = 0\nsensing.n = 2\nsweep.values = [0.1, 0.2]\nschemes = [\"fb\"]\nsim.slots = 1000\nsim.warmup = 10\n",
        )
        .unwrap();
        assert_eq!(exp.base.primary_users, 3);
        assert_eq!(exp.base.resource_shares, vec![1.0 / 3.0; 3]);
        assert_eq!(exp.base.outage_threshold, 1.0);
        assert_eq!(exp.sensing.bins, 2);
        assert_eq!(exp.sweep.values, vec![0.1, 0.2]);
        assert_eq!(exp.schemes, vec![Scheme::Feedback]);
        assert_eq!(exp.sim.unwrap().slots, 1000);
    }

    #[test]
    fn bad_values_name_their_fields() {
        let f = fields(parse_experiment("network.r_pd = -5").unwrap_err());
        assert_eq!(f, vec!["network.r_pd"]);
        let f = fields(parse_experiment("sweep.step = 0").unwrap_err());
        assert_eq!(f, vec!["sweep.step"]);
        let f = fields(parse_experiment("network.colour = 1\nschemes = [\"best\"]").unwrap_err());
        assert_eq!(f, vec!["network.colour", "schemes"]);
        let f = fields(parse_experiment("sim.slots = 10\nsim.warmup = 20").unwrap_err());
        assert_eq!(f, vec!["sim.warmup"]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let Err(Error::Parse { line, column, .. }) =
            parse_experiment("network.M_p = 4\nnetwork.M_s = = 2\n")
        else {
            panic!("expected a parse error");
        };
        assert_eq!(line, 2);
        assert!(column > 1);
    }

    #[test]
    fn empty_arrivals_row_is_feasible_with_empty_queue() {
        let exp = parse_experiment("sweep.values = [0.0]").unwrap();
        let out = run_sweep(&exp).unwrap();
        assert_eq!(out.rows.len(), 4);
        for row in &out.rows {
            assert!(row.feasible, "{:?}", row.scheme);
            assert_eq!(row.pi0, Some(1.0));
        }
    }

    #[test]
    fn infeasible_rows_have_empty_cells() {
        let exp =
            parse_experiment("sweep.values = [0.3]\nschemes = [\"nofb\", \"genie\"]").unwrap();
        let out = run_sweep(&exp).unwrap();
        assert!(!out.any_feasible());
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], "sweep_value,scheme,feasible,mu_s,network_throughput,mu_p,delay,pi0,a_1,a_2,a_3,a_4,tau_star");
        assert_eq!(lines[1], "0.3,nofb,false,,,,,,,,,,");
        assert_eq!(lines[2], "0.3,genie,false,,,,,,,,,,");
    }

    #[test]
    fn rows_are_ordered_and_hard_access_expands() {
        let exp = parse_experiment("sweep.values = [0.05, 0.1]").unwrap();
        let rows = run_rows(&exp).unwrap();
        let tags: Vec<&str> = rows.iter().map(|r| r.scheme.tag()).collect();
        assert_eq!(
            tags,
            ["fb", "nofb", "hard", "genie", "fb", "nofb", "hard", "genie"]
        );
        let hard = &rows[2];
        let a = hard.access.as_ref().unwrap();
        assert!(a.iter().all(|x| *x == a[0]));
        assert!(rows[3].access.is_none());
        assert!(rows[0].tau_star.is_some() && rows[1].tau_star.is_none());
    }

    #[test]
    fn sim_columns_and_script_are_written() {
        let exp = parse_experiment(
            "sweep.values = [0.1]\nschemes = [\"fb\"]\nsim.slots = 20000\nsim.warmup = 100\nsim.replications = 2\nsim.seed = 4",
        )
        .unwrap();
        let out = run_sweep(&exp).unwrap();
        assert!(out
            .csv
            .lines()
            .next()
            .unwrap()
            .ends_with("tau_star,mu_s_hat,se_mu_s,delay_hat,se_delay,pi0_hat,seed"));
        assert_eq!(out.rows[0].sim.as_ref().unwrap().seed, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep(&exp, &out, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), out.csv);
        let script = std::fs::read_to_string(dir.path().join("sweep.csv.gp")).unwrap();
        assert!(script.contains("\"sweep.csv\""));
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let exp = parse_experiment("sweep.values = [0.1]\nschemes = [\"genie\"]").unwrap();
        let out = run_sweep(&exp).unwrap();
        let err = write_sweep(&exp, &out, Path::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
