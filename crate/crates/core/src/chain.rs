//! Primary queue chain under the feedback scheme, and both delay formulas.
//!
//! States are `k_F` (k packets, head-of-line packet on its first attempt)
//! and `k_R` (k packets, head-of-line packet being retransmitted with the
//! secondaries silent). `0_R` does not exist. Per slot, a queue in `k_F`
//! succeeds with probability `Gamma_p` and otherwise moves to the `R` class;
//! a queue in `k_R` succeeds with probability `1 - delta`. Bernoulli arrivals
//! join after service, so a packet is never served in its arrival slot.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rates::{ChainParams, Rate};

/// Largest truncation handled by the dense solver; power iteration above.
pub const DENSE_LIMIT: usize = 2000;
pub const MAX_TRUNCATION: usize = 100_000;
const MIN_TRUNCATION: usize = 50;
const POWER_TOLERANCE: f64 = 1e-13;
const POWER_MAX_SWEEPS: usize = 2_000_000;

/// Stationary probabilities of the chain truncated at `truncation` packets.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDistribution {
    /// `pi_k` for `k = 0..=K`.
    pub first: Vec<f64>,
    /// `eps_k` for `k = 0..=K`; `eps_0` is always zero.
    pub retx: Vec<f64>,
    pub truncation: usize,
    /// Probability mass above `truncation` (zero for the numeric solve).
    pub tail_mass: f64,
    pub stable: bool,
}

impl ChainDistribution {
    pub fn pi0(&self) -> f64 {
        self.first[0]
    }

    pub fn total_mass(&self) -> f64 {
        self.first.iter().chain(&self.retx).sum::<f64>() + self.tail_mass
    }

    /// Mean number of packets held, counting both first-attempt and
    /// retransmission states.
    pub fn mean_occupancy(&self) -> f64 {
        self.first
            .iter()
            .zip(&self.retx)
            .enumerate()
            .map(|(k, (p, e))| k as f64 * (p + e))
            .sum()
    }

    /// Mean sojourn from Little's law, `L / lambda`.
    pub fn little_delay(&self, arrival_rate: f64) -> Result<f64> {
        if !(arrival_rate > 0.0) {
            return Err(Error::Domain(
                "Little's law needs a positive arrival rate".into(),
            ));
        }
        Ok(self.mean_occupancy() / arrival_rate)
    }

    /// Largest entrywise difference against another distribution of the same size.
    pub fn max_abs_diff(&self, other: &ChainDistribution) -> f64 {
        self.first
            .iter()
            .zip(&other.first)
            .chain(self.retx.iter().zip(&other.retx))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn value(&self, state: State) -> f64 {
        match state {
            State::First(k) => self.first[k],
            State::Retx(k) => self.retx[k],
        }
    }
}

/// Truncation leaving a geometric tail below `1e-14`, clamped to `[50, 1e5]`.
pub fn default_truncation(psi: f64) -> usize {
    if !(psi > 0.0) {
        return MIN_TRUNCATION;
    }
    if psi >= 1.0 {
        return MAX_TRUNCATION;
    }
    let k = (1e-14f64.ln() / psi.ln()).ceil();
    (k as usize).clamp(MIN_TRUNCATION, MAX_TRUNCATION)
}

/// Closed-form stationary distribution of the chain.
///
/// `pi_0 = (chi - lambda)/(1 - delta)`, `eps_1 = lambda(1-Gamma) pi_0 / chi`,
/// `pi_1 = lambda(1 - delta(1-lambda)) pi_0 / ((1-lambda) chi)` and, for
/// `k >= 2`, `eps_k = psi^k (1-lambda)(1-Gamma) pi_0 / (1-chi)^2` with
/// `pi_k = lambda eps_k / (1 - lambda)`.
pub fn closed_form_distribution(
    params: &ChainParams,
    truncation: usize,
) -> Result<ChainDistribution> {
    if truncation < 2 {
        return Err(Error::Domain("truncation must be at least 2".into()));
    }
    let lambda = params.arrival_rate;
    let mut first = vec![0.0; truncation + 1];
    let mut retx = vec![0.0; truncation + 1];
    if lambda == 0.0 {
        first[0] = 1.0;
        return Ok(ChainDistribution {
            first,
            retx,
            truncation,
            tail_mass: 0.0,
            stable: true,
        });
    }
    if !params.is_stable() {
        return Err(Error::Unstable {
            margin: params.margin(),
        });
    }
    let (gamma, delta, chi) = (params.success, params.failure, params.chi);
    let idle = 1.0 - lambda;
    let pi0 = (chi - lambda) / (1.0 - delta);
    first[0] = pi0;
    retx[1] = lambda * (1.0 - gamma) * pi0 / chi;
    first[1] = lambda * (1.0 - delta * idle) * pi0 / (idle * chi);
    // psi^k / (1-chi)^2 = ratio^k (1-chi)^(k-2), with ratio = lambda / ((1-lambda) chi)
    let ratio = lambda / (idle * chi);
    let scale = idle * (1.0 - gamma) * pi0;
    let mut geometric = ratio * ratio;
    for k in 2..=truncation {
        retx[k] = geometric * scale;
        first[k] = lambda * retx[k] / idle;
        geometric *= ratio * (1.0 - chi);
    }
    // sum_{k>K} (pi_k + eps_k) = (1-Gamma) pi_0 psi^(K+1) / ((1-chi)^2 (1-psi))
    let tail_mass = (1.0 - gamma) * pi0 * geometric / (1.0 - params.psi);
    Ok(ChainDistribution {
        first,
        retx,
        truncation,
        tail_mass,
        stable: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    First(usize),
    Retx(usize),
}

impl State {
    fn index(self, truncation: usize) -> usize {
        match self {
            State::First(k) => k,
            State::Retx(k) => truncation + k,
        }
    }

    fn from_index(i: usize, truncation: usize) -> Self {
        if i <= truncation {
            State::First(i)
        } else {
            State::Retx(i - truncation)
        }
    }

    fn level(self) -> usize {
        match self {
            State::First(k) | State::Retx(k) => k,
        }
    }
}

/// Outgoing transitions of the untruncated chain.
fn transitions(params: &ChainParams, state: State) -> [(State, f64); 4] {
    let lambda = params.arrival_rate;
    let idle = 1.0 - lambda;
    match state {
        State::First(0) => [
            (State::First(0), idle),
            (State::First(1), lambda),
            (State::First(0), 0.0),
            (State::First(0), 0.0),
        ],
        State::First(k) | State::Retx(k) => {
            let success = match state {
                State::First(_) => params.success,
                State::Retx(_) => 1.0 - params.failure,
            };
            [
                (State::First(k - 1), idle * success),
                (State::First(k), lambda * success),
                (State::Retx(k), idle * (1.0 - success)),
                (State::Retx(k + 1), lambda * (1.0 - success)),
            ]
        }
    }
}

/// Transitions with arrivals at level `truncation` held at the boundary.
fn truncated_transitions(
    params: &ChainParams,
    state: State,
    truncation: usize,
) -> [(State, f64); 4] {
    let mut out = transitions(params, state);
    for (to, _) in out.iter_mut() {
        if to.level() > truncation {
            *to = State::Retx(truncation);
        }
    }
    out
}

/// Row-stochastic transition matrix of the truncated chain.
pub fn transition_matrix(params: &ChainParams, truncation: usize) -> DMatrix<f64> {
    let n = 2 * truncation + 1;
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let from = State::from_index(i, truncation);
        for (to, prob) in truncated_transitions(params, from, truncation) {
            p[(i, to.index(truncation))] += prob;
        }
    }
    p
}

/// Stationary law of the truncated chain by direct numerical solution.
///
/// Dense LU up to [`DENSE_LIMIT`], power iteration above.
pub fn numeric_distribution(params: &ChainParams, truncation: usize) -> Result<ChainDistribution> {
    if truncation < 2 {
        return Err(Error::Domain("truncation must be at least 2".into()));
    }
    if params.arrival_rate > 0.0 && !(params.psi.powi(truncation as i32) < 1e-12) {
        return Err(Error::Domain(format!(
            "truncation {truncation} leaves psi^K = {:e} >= 1e-12",
            params.psi.powi(truncation as i32)
        )));
    }
    let n = 2 * truncation + 1;
    let x = if truncation <= DENSE_LIMIT {
        dense_stationary(params, truncation)?
    } else {
        power_stationary(params, truncation)?
    };
    debug_assert_eq!(x.len(), n);
    let mut first = x[..=truncation].to_vec();
    let mut retx = vec![0.0];
    retx.extend_from_slice(&x[truncation + 1..]);
    for v in first.iter_mut().chain(retx.iter_mut()) {
        if *v < 0.0 && *v > -1e-15 {
            *v = 0.0;
        }
    }
    Ok(ChainDistribution {
        first,
        retx,
        truncation,
        tail_mass: 0.0,
        stable: params.is_stable(),
    })
}

fn dense_stationary(params: &ChainParams, truncation: usize) -> Result<Vec<f64>> {
    let p = transition_matrix(params, truncation);
    let n = p.nrows();
    let worst_row = p
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    if worst_row > 1e-14 {
        return Err(Error::Numeric(format!(
            "transition matrix rows deviate from 1 by {worst_row:e}"
        )));
    }
    // x (P - I) = 0 with the last balance equation replaced by normalization
    let mut a = p.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numeric(format!("singular stationary system of size {n}")))?;
    let residual = (&a * &x - &b).amax();
    if !(residual < 1e-10) {
        return Err(Error::Numeric(format!(
            "stationary solve residual {residual:e} at size {n}"
        )));
    }
    Ok(x.iter().copied().collect())
}

fn power_stationary(params: &ChainParams, truncation: usize) -> Result<Vec<f64>> {
    let n = 2 * truncation + 1;
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    let mut next = vec![0.0; n];
    for sweep in 0..POWER_MAX_SWEEPS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, mass) in x.iter().enumerate() {
            if *mass == 0.0 {
                continue;
            }
            let from = State::from_index(i, truncation);
            for (to, prob) in truncated_transitions(params, from, truncation) {
                next[to.index(truncation)] += mass * prob;
            }
        }
        let change: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change < POWER_TOLERANCE && sweep > 0 {
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= total);
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not reach {POWER_TOLERANCE:e} within {POWER_MAX_SWEEPS} sweeps (size {n})"
    )))
}

/// Largest global-balance violation of `dist` against the untruncated chain,
/// over every state whose neighbours all lie within the truncation.
pub fn balance_residual(dist: &ChainDistribution, params: &ChainParams) -> f64 {
    let k_max = dist.truncation;
    let n = 2 * k_max + 1;
    let mut inflow = vec![0.0; n];
    let mut outflow = vec![0.0; n];
    for i in 0..n {
        let from = State::from_index(i, k_max);
        if matches!(from, State::Retx(0)) {
            continue;
        }
        let mass = dist.value(from);
        for (to, prob) in transitions(params, from) {
            if to == from {
                continue;
            }
            outflow[i] += mass * prob;
            if to.level() <= k_max {
                inflow[to.index(k_max)] += mass * prob;
            }
        }
    }
    (0..n)
        .filter(|&i| State::from_index(i, k_max).level() < k_max)
        .map(|i| (inflow[i] - outflow[i]).abs())
        .fold(0.0, f64::max)
}

/// Mean primary delay without feedback, `(1 - lambda)/(mu_p - lambda)`.
pub fn delay_nofb(arrival_rate: f64, service_rate: f64) -> Rate {
    let margin = service_rate - arrival_rate;
    if margin > 0.0 {
        Rate::Stable((1.0 - arrival_rate) / margin)
    } else {
        Rate::Unstable { margin }
    }
}

/// Mean primary delay with feedback.
///
/// `[(Gamma-chi)(chi-lambda)^2 + (1-lambda)^2 (1-Gamma) chi] /
///  [(1-lambda)(1-chi)(1-delta)(chi-lambda)]`
pub fn delay_fb(params: &ChainParams) -> Rate {
    let margin = params.margin();
    if !(margin > 0.0) {
        return Rate::Unstable { margin };
    }
    let (gamma, chi, lambda) = (params.success, params.chi, params.arrival_rate);
    let idle = 1.0 - lambda;
    let num = (gamma - chi) * margin * margin + idle * idle * (1.0 - gamma) * chi;
    let den = idle * (1.0 - chi) * (1.0 - params.failure) * margin;
    Rate::Stable(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(success: f64, failure: f64, lambda: f64) -> ChainParams {
        ChainParams::new(success, failure, lambda).unwrap()
    }

    fn default_params(lambda: f64) -> ChainParams {
        // default network with a feedback-optimal policy at lambda = 0.1
        let b = 0.243798497343326;
        params(b * 0.985, 1.0 - b, lambda)
    }

    #[test]
    fn empty_arrivals_give_point_mass() {
        let p = default_params(0.0);
        let cf = closed_form_distribution(&p, 60).unwrap();
        assert_eq!(cf.first[0], 1.0);
        assert_eq!(cf.total_mass(), 1.0);
        let num = numeric_distribution(&p, 60).unwrap();
        assert!((num.first[0] - 1.0).abs() < 1e-14);
        assert!(num.max_abs_diff(&cf) < 1e-14);
    }

    #[test]
    fn boundary_balance_anchors() {
        let p = default_params(0.1);
        let d = closed_form_distribution(&p, 200).unwrap();
        let (g, dl, l) = (p.success, p.failure, p.arrival_rate);
        let lb = 1.0 - l;
        let (pi, eps) = (&d.first, &d.retx);
        // around 0_F
        assert!((pi[0] * l - (pi[1] * lb * g + eps[1] * lb * (1.0 - dl))).abs() < 1e-15);
        // around 1_R
        assert!((eps[1] * (1.0 - dl * lb) - pi[1] * lb * (1.0 - g)).abs() < 1e-15);
        // around 1_F
        let lhs = pi[1] * (1.0 - l * g);
        let rhs = pi[0] * l + eps[1] * l * (1.0 - dl) + pi[2] * lb * g + eps[2] * lb * (1.0 - dl);
        assert!((lhs - rhs).abs() < 1e-15);
        // around 2_R
        let lhs = eps[2] * (1.0 - dl * lb);
        let rhs = eps[1] * l * dl + pi[1] * l * (1.0 - g) + pi[2] * lb * (1.0 - g);
        assert!((lhs - rhs).abs() < 1e-15);
        assert!(balance_residual(&d, &p) < 1e-12);
        assert_eq!(d.retx[0], 0.0);
        for k in 2..=d.truncation {
            assert!((pi[k] - l / lb * eps[k]).abs() <= 1e-15 * pi[k].max(1e-300));
        }
    }

    #[test]
    fn closed_form_matches_numeric() {
        let p = default_params(0.1);
        let k = default_truncation(p.psi);
        let cf = closed_form_distribution(&p, k).unwrap();
        let num = numeric_distribution(&p, k).unwrap();
        assert!(cf.max_abs_diff(&num) < 1e-9);
        assert!((cf.total_mass() - 1.0).abs() < 1e-12);
        assert!((cf.mean_occupancy() - num.mean_occupancy()).abs() < 1e-8);
    }

    #[test]
    fn truncated_matrix_is_stochastic() {
        let p = default_params(0.2);
        let m = transition_matrix(&p, 40);
        for row in m.row_iter() {
            assert!((row.sum() - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let p = default_params(0.05);
        let dense = numeric_distribution(&p, 60).unwrap();
        let power = power_stationary(&p, 60).unwrap();
        let power = ChainDistribution {
            first: power[..=60].to_vec(),
            retx: std::iter::once(0.0)
                .chain(power[61..].iter().copied())
                .collect(),
            ..dense.clone()
        };
        assert!(dense.max_abs_diff(&power) < 1e-11);
    }

    #[test]
    fn unstable_chain_is_rejected() {
        let p = params(0.2, 0.8, 0.25);
        assert!(!p.is_stable());
        assert!(matches!(
            closed_form_distribution(&p, 100),
            Err(Error::Unstable { .. })
        ));
        assert!(!delay_fb(&p).is_stable());
        assert!(numeric_distribution(&p, 100).is_err());
    }

    #[test]
    fn tail_bound_dominates() {
        let p = default_params(0.2);
        let k = 30;
        let d = closed_form_distribution(&p, k).unwrap();
        let bound =
            p.psi.powi(k as i32) * (1.0 - p.success) / ((1.0 - p.chi).powi(2) * (1.0 - p.psi));
        assert!(d.tail_mass <= bound);
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_rule() {
        assert_eq!(default_truncation(0.0), 50);
        assert_eq!(default_truncation(0.5), 50);
        assert_eq!(default_truncation(0.9), 306);
        assert_eq!(default_truncation(1.0), MAX_TRUNCATION);
    }

    #[test]
    fn no_feedback_delay_examples() {
        let mu = 0.2438;
        let d = delay_nofb(mu / 2.0, mu).value().unwrap();
        assert!((d - 7.203445447087777).abs() < 1e-12);
        assert!((delay_nofb(0.0, mu).value().unwrap() - 1.0 / mu).abs() < 1e-15);
        assert!(!delay_nofb(0.3, mu).is_stable());
    }

    #[test]
    fn feedback_delay_without_arrivals() {
        // a lone packet: one protected-free attempt, then interference-free retries
        let p = default_params(0.0);
        let expected = 1.0 + (1.0 - p.success) / (1.0 - p.failure);
        assert!((delay_fb(&p).value().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn feedback_delay_matches_little() {
        let p = default_params(0.1);
        let d = closed_form_distribution(&p, default_truncation(p.psi)).unwrap();
        let little = d.little_delay(0.1).unwrap();
        let formula = delay_fb(&p).value().unwrap();
        assert!((little - formula).abs() <= 1e-6 * formula);
    }
}
