//! Access-probability design for every scheme.
//!
//! Both throughput objectives factor as `h(s1) * c(s0)`: a primary-side
//! empty-queue term that only decreases in `s1 = p1 . a` and a contention term
//! maximized at `s0 = p0 . a = 1/M_s`. For any budget on `s1` the largest
//! reachable `s0` is a fractional knapsack, filled greedily in decreasing
//! `p_i^0 / p_i^1` order, so optimal policies live on that greedy path.
//!
//! - Without feedback the log-objective is concave along the path and a
//!   bisection on its directional derivative finds the optimum.
//! - With feedback the empty-queue term is handled by a sweep over a lower
//!   bound `tau` on it; each inner problem is concave.

use crate::error::{Error, Result};
use crate::model::{AccessPolicy, NetworkConfig, Scheme, SensingConfig};
use crate::rates::{Rate, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerMethod {
    /// Exact greedy-knapsack solution of the inner problem.
    StructuredGreedy,
    /// Generic projected gradient ascent over the box and the `s1` cap.
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Step of the `tau` sweep over `[0, 1]`.
    pub step: f64,
    pub inner_tol: f64,
    pub inner_method: InnerMethod,
    /// Resolution of the brute-force grid oracle.
    pub grid_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            inner_tol: 1e-10,
            inner_method: InnerMethod::StructuredGreedy,
            grid_step: 0.01,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let mut diags = Vec::new();
        if !(self.step > 0.0 && self.step <= 1.0) {
            diags.push(crate::Diagnostic::new("optimizer.nu", "must lie in (0, 1]"));
        }
        if !(self.inner_tol > 0.0) {
            diags.push(crate::Diagnostic::new(
                "optimizer.inner_tol",
                "must be positive",
            ));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            diags.push(crate::Diagnostic::new(
                "optimizer.grid_step",
                "must lie in (0, 1]",
            ));
        }
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(diags))
        }
    }
}

/// One iteration of the `tau` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TauRecord {
    pub tau: f64,
    /// `None` when no policy satisfies the `tau` constraint.
    pub inner_objective: Option<f64>,
    /// Secondary throughput at the inner solution, when stable.
    pub objective: Option<f64>,
    pub access: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub policy: AccessPolicy,
    /// Achieved secondary throughput; zero when infeasible.
    pub objective: f64,
    pub tau_star: Option<f64>,
    pub feasible: bool,
    pub iterations: usize,
    pub trace: Vec<TauRecord>,
}

impl OptResult {
    fn infeasible(policy: AccessPolicy, iterations: usize, trace: Vec<TauRecord>) -> Self {
        Self {
            policy,
            objective: 0.0,
            tau_star: None,
            feasible: false,
            iterations,
            trace,
        }
    }
}

/// Greedy path through the access simplex ordered by `p^0/p^1`.
#[derive(Debug, Clone)]
pub(crate) struct Frontier {
    order: Vec<usize>,
    idle: Vec<f64>,
    busy: Vec<f64>,
}

impl Frontier {
    pub(crate) fn new(idle: &[f64], busy: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..idle.len()).collect();
        let ratio = |i: usize| {
            if busy[i] > 0.0 {
                idle[i] / busy[i]
            } else {
                f64::INFINITY
            }
        };
        order.sort_by(|&x, &y| ratio(y).total_cmp(&ratio(x)).then(x.cmp(&y)));
        Self {
            order,
            idle: idle.to_vec(),
            busy: busy.to_vec(),
        }
    }

    fn max_value(&self) -> f64 {
        self.idle.iter().sum()
    }

    fn max_cost(&self) -> f64 {
        self.busy.iter().sum()
    }

    /// Cheapest policy reaching `s0 = value`.
    fn at_value(&self, value: f64) -> Vec<f64> {
        self.fill(value, &self.idle)
    }

    /// Largest-`s0` policy with `s1 = cost`.
    fn at_cost(&self, cost: f64) -> Vec<f64> {
        self.fill(cost, &self.busy)
    }

    fn fill(&self, amount: f64, weights: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.idle.len()];
        let mut left = amount;
        for &i in &self.order {
            if left <= 0.0 {
                break;
            }
            if weights[i] <= left {
                a[i] = 1.0;
                left -= weights[i];
            } else {
                a[i] = left / weights[i];
                left = 0.0;
            }
        }
        a
    }

    fn cost_at_value(&self, value: f64) -> f64 {
        let mut left = value;
        let mut cost = 0.0;
        for &i in &self.order {
            if left <= 0.0 {
                break;
            }
            let take = (left / self.idle[i]).min(1.0);
            cost += take * self.busy[i];
            left -= take * self.idle[i];
        }
        cost
    }

    /// `s0` reached at `s1 = cost`, and the slope `ds0/ds1` just to the right.
    fn value_and_slope(&self, cost: f64) -> (f64, f64) {
        let mut left = cost;
        let mut value = 0.0;
        for &i in &self.order {
            let ratio = self.idle[i] / self.busy[i];
            if self.busy[i] <= left {
                value += self.idle[i];
                left -= self.busy[i];
            } else {
                return (value + left * ratio, ratio);
            }
        }
        (value, 0.0)
    }
}

fn contention_log_slope(model: &SystemModel, s0: f64) -> f64 {
    let ms = model.secondary_users as f64;
    if model.secondary_users > 1 {
        1.0 / s0 - (ms - 1.0) / (1.0 - s0)
    } else {
        1.0 / s0
    }
}

/// Inner objective `ln s0 + (M_s - 1) ln(1 - s0)`.
fn inner_objective(model: &SystemModel, s0: f64) -> f64 {
    let tail = if model.secondary_users > 1 {
        (model.secondary_users - 1) as f64 * (-s0).ln_1p()
    } else {
        0.0
    };
    s0.ln() + tail
}

fn saturation_value(model: &SystemModel, frontier: &Frontier) -> f64 {
    (1.0 / model.secondary_users as f64).min(frontier.max_value())
}

/// Optimal access probabilities without feedback, `max mu_s s.t. lambda < mu_p`.
pub fn solve_nofb(cfg: &NetworkConfig, sensing: &SensingConfig) -> Result<OptResult> {
    let model = SystemModel::new(cfg, sensing)?;
    solve_nofb_model(&model, Scheme::NoFeedback)
}

pub(crate) fn solve_nofb_model(model: &SystemModel, scheme: Scheme) -> Result<OptResult> {
    let n = model.bins();
    let lambda = model.arrival_rate;
    let service = model.attempt_success();
    if !(lambda == 0.0 || lambda < service) {
        return Ok(OptResult::infeasible(
            AccessPolicy::silent(n, scheme),
            0,
            Vec::new(),
        ));
    }
    let frontier = Frontier::new(&model.idle_bins, &model.busy_bins);
    let saturation = frontier.cost_at_value(saturation_value(model, &frontier));
    let stability_edge = if lambda == 0.0 {
        f64::INFINITY
    } else {
        1.0 - (lambda / service).powf(1.0 / model.secondary_users as f64)
    };
    let ms = model.secondary_users as f64;
    let slope = |s1: f64| {
        let (s0, ds0) = frontier.value_and_slope(s1);
        let pi0_term = if lambda == 0.0 {
            0.0
        } else {
            let load = lambda / model.primary_service_rate(s1);
            // d ln(1 - load) / ds1 with d load / ds1 = M_s load / (1 - s1)
            -(ms * load / (1.0 - s1)) / (1.0 - load)
        };
        pi0_term + ds0 * contention_log_slope(model, s0)
    };
    let upper = saturation.min(stability_edge);
    let (mut lo, mut hi) = (0.0, upper);
    let mut iterations = 0;
    while hi - lo > f64::EPSILON * upper.max(f64::MIN_POSITIVE) && iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let s1 =
        if upper == saturation && stability_edge > saturation && slope_left_positive(&slope, upper)
        {
            upper
        } else {
            lo
        };
    let access = if s1 == saturation {
        frontier.at_value(saturation_value(model, &frontier))
    } else {
        frontier.at_cost(s1)
    };
    let policy = AccessPolicy::new(access, scheme)?;
    finish(model, policy, None, iterations, Vec::new())
}

fn slope_left_positive(slope: &impl Fn(f64) -> f64, at: f64) -> bool {
    at > 0.0 && slope(at * (1.0 - 1e-12)) > 0.0
}

fn finish(
    model: &SystemModel,
    policy: AccessPolicy,
    tau_star: Option<f64>,
    iterations: usize,
    trace: Vec<TauRecord>,
) -> Result<OptResult> {
    match model.throughput(&policy)? {
        Rate::Stable(objective) => Ok(OptResult {
            policy,
            objective,
            tau_star,
            feasible: true,
            iterations,
            trace,
        }),
        Rate::Unstable { .. } => Ok(OptResult::infeasible(policy, iterations, trace)),
    }
}

/// `s1` cap implied by `pi_0 >= tau` under feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauConstraint {
    /// `[f(tau)]^+ = 0`: the constraint is vacuous.
    Absent,
    Cap(f64),
    /// No policy reaches `pi_0 >= tau`.
    Infeasible,
}

/// `pi_0 >= tau` rewritten as `(1 - s1)^M_s >= f(tau)` with
/// `f(tau) = tau/lambda + M_p/(1 - P_pd) - (1 - lambda)/lambda`.
pub fn tau_constraint(model: &SystemModel, tau: f64) -> TauConstraint {
    let lambda = model.arrival_rate;
    if lambda == 0.0 {
        return TauConstraint::Absent;
    }
    let f = tau / lambda + model.primary_users as f64 / (1.0 - model.primary_outage)
        - (1.0 - lambda) / lambda;
    if f <= 0.0 {
        TauConstraint::Absent
    } else if f > 1.0 {
        TauConstraint::Infeasible
    } else {
        TauConstraint::Cap(1.0 - f.powf(1.0 / model.secondary_users as f64))
    }
}

/// Solution of one inner problem of the `tau` sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerSolution {
    Solved { access: Vec<f64>, objective: f64 },
    Infeasible,
}

/// Maximize `ln s0 + (M_s - 1) ln(1 - s0)` over the box and the `tau` constraint.
pub fn inner_solve(
    tau: f64,
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    opt: &OptimizerConfig,
) -> Result<InnerSolution> {
    let model = SystemModel::new(cfg, sensing)?;
    let frontier = Frontier::new(&model.idle_bins, &model.busy_bins);
    Ok(inner_solve_model(tau, &model, &frontier, opt))
}

pub(crate) fn inner_solve_model(
    tau: f64,
    model: &SystemModel,
    frontier: &Frontier,
    opt: &OptimizerConfig,
) -> InnerSolution {
    let cap = match tau_constraint(model, tau) {
        TauConstraint::Infeasible => return InnerSolution::Infeasible,
        TauConstraint::Absent => None,
        TauConstraint::Cap(c) if c >= frontier.max_cost() => None,
        TauConstraint::Cap(c) => Some(c.max(0.0)),
    };
    let access = match opt.inner_method {
        InnerMethod::StructuredGreedy => {
            let target = saturation_value(model, frontier);
            match cap {
                Some(c) if frontier.cost_at_value(target) > c => frontier.at_cost(c),
                _ => frontier.at_value(target),
            }
        }
        InnerMethod::ProjectedGradient => projected_gradient(model, cap, opt.inner_tol),
    };
    let s0 = model.idle_access(&access).unwrap_or(0.0);
    InnerSolution::Solved {
        objective: inner_objective(model, s0),
        access,
    }
}

/// Euclidean projection onto `[0,1]^n ∩ {busy . a <= cap}`.
fn project(y: &[f64], busy: &[f64], cap: Option<f64>) -> Vec<f64> {
    let clip = |theta: f64| -> Vec<f64> {
        y.iter()
            .zip(busy)
            .map(|(v, w)| (v - theta * w).clamp(0.0, 1.0))
            .collect()
    };
    let dot = |a: &[f64]| a.iter().zip(busy).map(|(x, w)| x * w).sum::<f64>();
    let first = clip(0.0);
    let Some(cap) = cap else { return first };
    if dot(&first) <= cap {
        return first;
    }
    let mut lo = 0.0;
    let mut hi = y
        .iter()
        .zip(busy)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| v / w)
        .fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dot(&clip(mid)) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(hi)
}

fn projected_gradient(model: &SystemModel, cap: Option<f64>, tol: f64) -> Vec<f64> {
    let n = model.bins();
    let busy = &model.busy_bins;
    if cap == Some(0.0) {
        return vec![0.0; n];
    }
    let objective = |a: &[f64]| inner_objective(model, model.idle_access(a).unwrap_or(0.0));
    let mut a = project(&vec![0.5; n], busy, cap);
    let mut value = objective(&a);
    let mut step = 1.0;
    for _ in 0..20_000 {
        let s0 = model.idle_access(&a).unwrap_or(0.0);
        let g = contention_log_slope(model, s0);
        let grad: Vec<f64> = model.idle_bins.iter().map(|p| g * p).collect();
        let stationarity = {
            let probe: Vec<f64> = a.iter().zip(&grad).map(|(x, d)| x + d).collect();
            let p = project(&probe, busy, cap);
            p.iter()
                .zip(&a)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        if stationarity <= tol {
            break;
        }
        let mut accepted = false;
        while step > 1e-18 {
            let probe: Vec<f64> = a.iter().zip(&grad).map(|(x, d)| x + step * d).collect();
            let cand = project(&probe, busy, cap);
            let cand_value = objective(&cand);
            let ascent: f64 = grad
                .iter()
                .zip(cand.iter().zip(&a))
                .map(|(d, (c, x))| d * (c - x))
                .sum();
            if cand_value.is_finite() && cand_value >= value + 1e-4 * ascent {
                let improvement = cand_value - value;
                a = cand;
                value = cand_value;
                accepted = true;
                if improvement <= tol * 1e-3 {
                    return a;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
    }
    a
}

/// Feedback-scheme optimum `max mu_s s.t. lambda < chi` by the `tau` sweep.
///
/// Each `tau` on the grid `0, nu, 2 nu, ..., 1` bounds `pi_0 >= tau`; the inner
/// maximizer is scored by the full throughput and only a strict improvement
/// replaces the incumbent, so ties keep the smallest `tau`.
pub fn solve_feedback(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    opt: &OptimizerConfig,
) -> Result<OptResult> {
    opt.validate()?;
    let model = SystemModel::new(cfg, sensing)?;
    solve_feedback_model(&model, opt)
}

pub(crate) fn solve_feedback_model(
    model: &SystemModel,
    opt: &OptimizerConfig,
) -> Result<OptResult> {
    let frontier = Frontier::new(&model.idle_bins, &model.busy_bins);
    let steps = tau_steps(opt.step);
    let mut trace = Vec::with_capacity(steps + 1);
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for k in 0..=steps {
        let tau = (k as f64 * opt.step).min(1.0);
        match inner_solve_model(tau, model, &frontier, opt) {
            InnerSolution::Infeasible => trace.push(TauRecord {
                tau,
                inner_objective: None,
                objective: None,
                access: Vec::new(),
            }),
            InnerSolution::Solved { access, objective } => {
                let s0 = model.idle_access(&access)?;
                let s1 = model.busy_access(&access)?;
                let score = model.throughput_feedback(s0, s1).value();
                if let Some(v) = score {
                    if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                        best = Some((v, tau, access.clone()));
                    }
                }
                trace.push(TauRecord {
                    tau,
                    inner_objective: Some(objective),
                    objective: score,
                    access,
                });
            }
        }
    }
    let iterations = trace.len();
    match best {
        Some((_, tau, access)) => {
            let policy = AccessPolicy::new(access, Scheme::Feedback)?;
            finish(model, policy, Some(tau), iterations, trace)
        }
        None => Ok(OptResult::infeasible(
            AccessPolicy::silent(model.bins(), Scheme::Feedback),
            iterations,
            trace,
        )),
    }
}

fn tau_steps(step: f64) -> usize {
    let exact = 1.0 / step;
    if (exact - exact.round()).abs() < 1e-9 * exact {
        exact.round() as usize
    } else {
        exact.floor() as usize
    }
}

/// Hard-decision baseline: the no-feedback design restricted to one bin,
/// i.e. a single access probability for any output below the threshold.
pub fn baseline_hard_decision(cfg: &NetworkConfig, sensing: &SensingConfig) -> Result<OptResult> {
    let model = SystemModel::new(cfg, &sensing.single_bin())?;
    solve_nofb_model(&model, Scheme::HardDecision)
}

/// Genie-aided bound: SUs know when the slot owner is idle and run symmetric
/// ALOHA with `a = 1/M_s` in exactly those slots.
pub fn baseline_genie(cfg: &NetworkConfig) -> Result<OptResult> {
    cfg.validate()?;
    let sensing = SensingConfig::for_network(cfg, 1);
    let model = SystemModel::new(cfg, &sensing)?;
    let access = 1.0 / cfg.secondary_users as f64;
    let policy = AccessPolicy::new(vec![access], Scheme::Genie)?;
    finish(&model, policy, None, 1, Vec::new())
}

/// Brute-force maximum of the scheme's throughput over the lattice
/// `{0, step, ..., 1}^n`; `None` when no lattice point is stable.
pub fn grid_search(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    scheme: Scheme,
    step: f64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let model = SystemModel::new(cfg, sensing)?;
    let n = model.bins();
    let levels = tau_steps(step) + 1;
    let values: Vec<f64> = (0..levels).map(|k| (k as f64 * step).min(1.0)).collect();
    let mut digits = vec![0usize; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let access: Vec<f64> = digits.iter().map(|&d| values[d]).collect();
        let policy = AccessPolicy { access, scheme };
        if let Rate::Stable(v) = model.throughput(&policy)? {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, policy.access));
            }
        }
        // odometer increment
        let mut i = 0;
        while i < n {
            digits[i] += 1;
            if digits[i] < levels {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(lambda: f64) -> (NetworkConfig, SensingConfig) {
        let cfg = NetworkConfig {
            arrival_rate: lambda,
            ..NetworkConfig::default()
        };
        let sensing = SensingConfig::for_network(&cfg, 4);
        (cfg, sensing)
    }

    fn throughput(model: &SystemModel, a: &[f64], scheme: Scheme) -> f64 {
        let p = AccessPolicy {
            access: a.to_vec(),
            scheme,
        };
        model.throughput(&p).unwrap().value().unwrap()
    }

    #[test]
    fn greedy_path_orders_by_ratio() {
        let f = Frontier::new(&[0.4, 0.3, 0.1], &[0.01, 0.02, 0.05]);
        assert_eq!(f.order, vec![0, 1, 2]);
        let a = f.at_cost(0.02);
        assert_eq!(a, vec![1.0, 0.5, 0.0]);
        assert!((f.cost_at_value(0.55) - 0.02).abs() < 1e-15);
        let (v, slope) = f.value_and_slope(0.02);
        assert!((v - 0.55).abs() < 1e-15 && (slope - 15.0).abs() < 1e-12);
    }

    #[test]
    fn nofb_infeasible_beyond_best_service() {
        let (cfg, sensing) = defaults(0.25);
        let r = solve_nofb(&cfg, &sensing).unwrap();
        assert!(!r.feasible);
        let r = solve_feedback(&cfg, &sensing, &OptimizerConfig::default()).unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn nofb_kkt_stationarity() {
        for lambda in [0.02, 0.1, 0.18, 0.22] {
            let (cfg, sensing) = defaults(lambda);
            let model = SystemModel::new(&cfg, &sensing).unwrap();
            let r = solve_nofb(&cfg, &sensing).unwrap();
            assert!(r.feasible);
            let a = &r.policy.access;
            for i in 0..a.len() {
                if a[i] > 1e-6 && a[i] < 1.0 - 1e-6 {
                    let h = 1e-7;
                    let mut up = a.clone();
                    let mut dn = a.clone();
                    up[i] += h;
                    dn[i] -= h;
                    let g = (throughput(&model, &up, Scheme::NoFeedback)
                        - throughput(&model, &dn, Scheme::NoFeedback))
                        / (2.0 * h);
                    assert!(g.abs() < 1e-8, "lambda {lambda} coordinate {i}: {g}");
                }
            }
        }
    }

    #[test]
    fn feedback_without_arrivals_saturates_contention() {
        let (cfg, sensing) = defaults(0.0);
        let r = solve_feedback(&cfg, &sensing, &OptimizerConfig::default()).unwrap();
        let model = SystemModel::new(&cfg, &sensing).unwrap();
        let s0 = model.idle_access(&r.policy.access).unwrap();
        let total: f64 = model.idle_bins.iter().sum();
        assert!((s0 - 0.5f64.min(total)).abs() < 1e-12);
        assert_eq!(r.tau_star, Some(0.0));
    }

    #[test]
    fn tau_constraint_holds_at_every_iterate() {
        let (cfg, sensing) = defaults(0.15);
        let model = SystemModel::new(&cfg, &sensing).unwrap();
        let r = solve_feedback(&cfg, &sensing, &OptimizerConfig::default()).unwrap();
        for rec in &r.trace {
            let Some(_) = rec.inner_objective else {
                continue;
            };
            let s1 = model.busy_access(&rec.access).unwrap();
            match tau_constraint(&model, rec.tau) {
                TauConstraint::Cap(c) => assert!(s1 <= c + 1e-14),
                TauConstraint::Absent => {}
                TauConstraint::Infeasible => panic!("solved an infeasible tau"),
            }
            if rec.objective.is_some() {
                assert!(model.stability_at(s1, Scheme::Feedback).stable);
            }
        }
        assert!(r.feasible);
        let reported = model.throughput(&r.policy).unwrap().value().unwrap();
        assert_eq!(reported.to_bits(), r.objective.to_bits());
    }

    #[test]
    fn vacuous_tau_matches_unconstrained_case() {
        let (cfg, sensing) = defaults(0.1);
        let model = SystemModel::new(&cfg, &sensing).unwrap();
        assert_eq!(tau_constraint(&model, 0.0), TauConstraint::Absent);
        let opt = OptimizerConfig::default();
        let InnerSolution::Solved { access, objective } =
            inner_solve(0.0, &cfg, &sensing, &opt).unwrap()
        else {
            panic!("tau = 0 must be solvable");
        };
        let s0 = model.idle_access(&access).unwrap();
        assert!((s0 - 0.5).abs() < 1e-12);
        assert!((objective - 2.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn binding_cap_is_met_exactly() {
        let (cfg, sensing) = defaults(0.2);
        let model = SystemModel::new(&cfg, &sensing).unwrap();
        let frontier = Frontier::new(&model.idle_bins, &model.busy_bins);
        let need = frontier.cost_at_value(0.5);
        let opt = OptimizerConfig::default();
        let mut checked = 0;
        for k in 0..=1000 {
            let tau = k as f64 * 1e-3;
            if let TauConstraint::Cap(c) = tau_constraint(&model, tau) {
                if c < need && c > 0.0 {
                    let InnerSolution::Solved { access, .. } =
                        inner_solve_model(tau, &model, &frontier, &opt)
                    else {
                        panic!()
                    };
                    assert!((model.busy_access(&access).unwrap() - c).abs() <= 1e-10);
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn inner_methods_agree() {
        let greedy = OptimizerConfig::default();
        let pg = OptimizerConfig {
            inner_method: InnerMethod::ProjectedGradient,
            ..OptimizerConfig::default()
        };
        for lambda in [0.05, 0.15, 0.21] {
            let (cfg, sensing) = defaults(lambda);
            let model = SystemModel::new(&cfg, &sensing).unwrap();
            let frontier = Frontier::new(&model.idle_bins, &model.busy_bins);
            for k in (0..=1000).step_by(7) {
                let tau = k as f64 * 1e-3;
                match (
                    inner_solve_model(tau, &model, &frontier, &greedy),
                    inner_solve_model(tau, &model, &frontier, &pg),
                ) {
                    (
                        InnerSolution::Solved { objective: a, .. },
                        InnerSolution::Solved { objective: b, .. },
                    ) => {
                        if a.is_finite() {
                            assert!((a - b).abs() <= 1e-6, "tau {tau}: {a} vs {b}");
                        } else {
                            assert!(b == a);
                        }
                    }
                    (InnerSolution::Infeasible, InnerSolution::Infeasible) => {}
                    other => panic!("feasibility disagrees at tau {tau}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn hard_decision_is_one_bin_nofb() {
        let (cfg, sensing) = defaults(0.1);
        let hard = baseline_hard_decision(&cfg, &sensing).unwrap();
        let nofb = solve_nofb(&cfg, &sensing.single_bin()).unwrap();
        assert_eq!(hard.policy.access, nofb.policy.access);
        assert_eq!(hard.objective, nofb.objective);
        let soft = solve_nofb(&cfg, &sensing).unwrap();
        assert!(hard.objective <= soft.objective);
    }

    #[test]
    fn genie_examples() {
        let (mut cfg, _) = defaults(0.1);
        let r = baseline_genie(&cfg).unwrap();
        let p_sd = cfg.secondary_outage().unwrap();
        let p_pd = cfg.primary_outage().unwrap();
        let pi0 = 1.0 - 0.1 * 4.0 / (1.0 - p_pd);
        assert!((r.objective - pi0 * (1.0 - p_sd) * 0.25).abs() < 1e-15);
        cfg.secondary_users = 1;
        let r = baseline_genie(&cfg).unwrap();
        assert_eq!(r.policy.access, vec![1.0]);
        assert!((r.objective - pi0 * (1.0 - p_sd)).abs() < 1e-15);
        cfg.arrival_rate = 0.3;
        assert!(!baseline_genie(&cfg).unwrap().feasible);
    }

    #[test]
    fn finer_tau_steps_do_not_lose() {
        let (cfg, sensing) = defaults(0.12);
        let mut previous = 0.0;
        for step in [1e-2, 1e-3, 1e-4] {
            let opt = OptimizerConfig {
                step,
                ..OptimizerConfig::default()
            };
            let r = solve_feedback(&cfg, &sensing, &opt).unwrap();
            assert!(r.objective >= previous - 1e-6, "step {step}");
            previous = r.objective;
        }
    }

    #[test]
    fn grid_oracle_two_bins() {
        let cfg = NetworkConfig::default();
        let sensing = SensingConfig::for_network(&cfg, 2);
        let (grid, _) = grid_search(&cfg, &sensing, Scheme::NoFeedback, 0.01)
            .unwrap()
            .unwrap();
        let r = solve_nofb(&cfg, &sensing).unwrap();
        assert!((r.objective - grid).abs() <= 1e-3 && r.objective >= grid - 1e-12);
        let (grid, _) = grid_search(&cfg, &sensing, Scheme::Feedback, 0.01)
            .unwrap()
            .unwrap();
        let r = solve_feedback(&cfg, &sensing, &OptimizerConfig::default()).unwrap();
        assert!((r.objective - grid).abs() <= 1e-3);
    }
}
