//! Closed-form service rates for the no-feedback and feedback schemes.
//!
//! Everything here depends on a policy only through two scalars:
//! `s0 = sum_i p_i^0 a_i` (an SU accesses an idle channel) and
//! `s1 = sum_i p_i^1 a_i` (an SU accesses a busy channel after missing the
//! primary). The public functions that take a policy reduce it to those two
//! numbers and call the scalar forms on [`SystemModel`].
//!
//! Throughput formulas use the secondary-link outage probability for the
//! `1 - P_sd` factor in both schemes.

use crate::error::{Error, Result};
use crate::model::{dot, AccessPolicy, NetworkConfig, Scheme, SensingConfig};

/// Result of a rate formula that is only meaningful when the primary queue is stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Stable(f64),
    /// The stability margin (service minus arrival) was not positive.
    Unstable {
        margin: f64,
    },
}

impl Rate {
    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Stable(v) => Some(v),
            Rate::Unstable { .. } => None,
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, Rate::Stable(_))
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Rate {
        match self {
            Rate::Stable(v) => Rate::Stable(f(v)),
            unstable => unstable,
        }
    }
}

/// Whether a queue with arrival rate `lambda` and the given service-side
/// quantity is stable; an empty arrival stream is always stable.
fn stable(lambda: f64, service: f64) -> bool {
    lambda == 0.0 || lambda < service
}

/// Transition parameters of the primary queue chain under feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// `Gamma_p`: success probability of a first transmission with SUs active.
    pub success: f64,
    /// `delta`: failure probability of a retransmission (SUs silent).
    pub failure: f64,
    pub arrival_rate: f64,
    /// `chi = lambda Gamma_p + (1 - lambda)(1 - delta)`.
    pub chi: f64,
    /// `psi = lambda (1 - chi) / ((1 - lambda) chi)`, the geometric tail ratio.
    pub psi: f64,
}

impl ChainParams {
    pub fn new(success: f64, failure: f64, arrival_rate: f64) -> Result<Self> {
        for (what, v) in [
            ("Gamma_p", success),
            ("delta", failure),
            ("lambda_p", arrival_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Probability { what, value: v });
            }
        }
        if success > 1.0 - failure + 1e-12 {
            return Err(Error::Domain(
                "first-transmission success cannot exceed interference-free success".into(),
            ));
        }
        let chi = arrival_rate * success + (1.0 - arrival_rate) * (1.0 - failure);
        let denom = (1.0 - arrival_rate) * chi;
        let psi = if arrival_rate == 0.0 {
            0.0
        } else if denom > 0.0 {
            arrival_rate * (1.0 - chi) / denom
        } else {
            f64::INFINITY
        };
        Ok(Self {
            success,
            failure,
            arrival_rate,
            chi,
            psi,
        })
    }

    pub fn is_stable(&self) -> bool {
        stable(self.arrival_rate, self.chi)
    }

    pub fn margin(&self) -> f64 {
        self.chi - self.arrival_rate
    }

    /// `pi_0 = (chi - lambda) / (1 - delta)`.
    pub fn pi0(&self) -> Rate {
        if self.is_stable() {
            Rate::Stable((self.chi - self.arrival_rate) / (1.0 - self.failure))
        } else {
            Rate::Unstable {
                margin: self.margin(),
            }
        }
    }
}

/// Signed stability margin of a scheme at a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    /// `mu_p - lambda` without feedback, `chi - lambda` with feedback.
    pub margin: f64,
}

/// Link and detector quantities precomputed for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub primary_users: usize,
    pub secondary_users: usize,
    pub arrival_rate: f64,
    pub primary_outage: f64,
    pub secondary_outage: f64,
    pub idle_bins: Vec<f64>,
    pub busy_bins: Vec<f64>,
}

impl SystemModel {
    pub fn new(cfg: &NetworkConfig, sensing: &SensingConfig) -> Result<Self> {
        cfg.validate()?;
        sensing.validate()?;
        Ok(Self {
            primary_users: cfg.primary_users,
            secondary_users: cfg.secondary_users,
            arrival_rate: cfg.arrival_rate,
            primary_outage: cfg.primary_outage()?,
            secondary_outage: cfg.secondary_outage()?,
            idle_bins: sensing.idle_bins()?,
            busy_bins: sensing.busy_bins()?,
        })
    }

    pub fn bins(&self) -> usize {
        self.idle_bins.len()
    }

    fn ms(&self) -> i32 {
        self.secondary_users as i32
    }

    /// `1 - delta = (1 - P_pd)/M_p`: success of an interference-free attempt.
    pub fn attempt_success(&self) -> f64 {
        (1.0 - self.primary_outage) / self.primary_users as f64
    }

    pub fn idle_access(&self, access: &[f64]) -> Result<f64> {
        dot(access, &self.idle_bins)
    }

    pub fn busy_access(&self, access: &[f64]) -> Result<f64> {
        dot(access, &self.busy_bins)
    }

    /// Probability that no SU transmits over a busy channel, `(1 - s1)^M_s`.
    pub fn clear_probability(&self, s1: f64) -> f64 {
        (1.0 - s1).powi(self.ms())
    }

    /// `mu_p = Gamma_p = ((1 - P_pd)/M_p) (1 - s1)^M_s`.
    pub fn primary_service_rate(&self, s1: f64) -> f64 {
        self.attempt_success() * self.clear_probability(s1)
    }

    pub fn chain_params(&self, s1: f64) -> Result<ChainParams> {
        ChainParams::new(
            self.primary_service_rate(s1),
            1.0 - self.attempt_success(),
            self.arrival_rate,
        )
    }

    /// `(1 - P_sd) s0 (1 - s0)^(M_s - 1)`: success of one SU in an idle slot.
    pub fn contention(&self, s0: f64) -> f64 {
        (1.0 - self.secondary_outage) * s0 * (1.0 - s0).powi(self.ms() - 1)
    }

    pub fn no_feedback_margin(&self, s1: f64) -> f64 {
        self.primary_service_rate(s1) - self.arrival_rate
    }

    pub fn feedback_margin(&self, s1: f64) -> f64 {
        let lambda = self.arrival_rate;
        lambda * self.primary_service_rate(s1) + (1.0 - lambda) * self.attempt_success() - lambda
    }

    /// Empty-queue probability without feedback, `1 - lambda / mu_p`.
    pub fn pi0_no_feedback(&self, s1: f64) -> Rate {
        let mu = self.primary_service_rate(s1);
        if !stable(self.arrival_rate, mu) {
            return Rate::Unstable {
                margin: mu - self.arrival_rate,
            };
        }
        if self.arrival_rate == 0.0 {
            return Rate::Stable(1.0);
        }
        Rate::Stable(1.0 - self.arrival_rate / mu)
    }

    /// Empty-queue probability with feedback in expanded form,
    /// `1 - lambda [(1 + M_p/(1 - P_pd)) - (1 - s1)^M_s]`.
    pub fn pi0_feedback(&self, s1: f64) -> Rate {
        let lambda = self.arrival_rate;
        let margin = self.feedback_margin(s1);
        if !(lambda == 0.0 || margin > 0.0) {
            return Rate::Unstable { margin };
        }
        let bracket = 1.0 + self.primary_users as f64 / (1.0 - self.primary_outage)
            - self.clear_probability(s1);
        Rate::Stable(1.0 - lambda * bracket)
    }

    /// `pi_0` gain of feedback, `(lambda (1 - Gamma_p)/Gamma_p) [1 - (1 - s1)^M_s]`.
    pub fn delta_pi0(&self, s1: f64) -> Rate {
        let gamma = self.primary_service_rate(s1);
        if !stable(self.arrival_rate, gamma) {
            return Rate::Unstable {
                margin: gamma - self.arrival_rate,
            };
        }
        if self.arrival_rate == 0.0 {
            return Rate::Stable(0.0);
        }
        let lambda = self.arrival_rate;
        Rate::Stable(lambda * (1.0 - gamma) / gamma * (1.0 - self.clear_probability(s1)))
    }

    pub fn throughput_no_feedback(&self, s0: f64, s1: f64) -> Rate {
        self.pi0_no_feedback(s1).map(|p| p * self.contention(s0))
    }

    pub fn throughput_feedback(&self, s0: f64, s1: f64) -> Rate {
        self.pi0_feedback(s1).map(|p| p * self.contention(s0))
    }

    /// Log of the contention factor; `-inf` when `s0 = 0`.
    pub fn log_contention(&self, s0: f64) -> f64 {
        let tail = if self.secondary_users > 1 {
            (self.ms() - 1) as f64 * (-s0).ln_1p()
        } else {
            0.0
        };
        (-self.secondary_outage).ln_1p() + s0.ln() + tail
    }

    /// `ln mu_s` without feedback, or `None` when unstable.
    pub fn log_throughput_no_feedback(&self, s0: f64, s1: f64) -> Option<f64> {
        let lambda = self.arrival_rate;
        let log_pi0 = if lambda == 0.0 {
            0.0
        } else {
            // lambda / mu_p = exp(ln(lambda/(1-delta)) - M_s ln(1 - s1))
            let log_load =
                (lambda / self.attempt_success()).ln() - self.ms() as f64 * (-s1).ln_1p();
            if log_load >= 0.0 {
                return None;
            }
            (-log_load.exp_m1()).ln()
        };
        Some(log_pi0 + self.log_contention(s0))
    }

    /// `ln mu_s` with feedback, or `None` when unstable.
    pub fn log_throughput_feedback(&self, s0: f64, s1: f64) -> Option<f64> {
        let log_pi0 = match self.pi0_feedback(s1) {
            Rate::Stable(p) => p.ln(),
            Rate::Unstable { .. } => return None,
        };
        Some(log_pi0 + self.log_contention(s0))
    }

    /// Genie-aided SUs: they access with probability `access` exactly when the
    /// slot owner's queue is empty and never disturb a primary.
    pub fn genie_throughput(&self, access: f64) -> Rate {
        let service = self.attempt_success();
        if !stable(self.arrival_rate, service) {
            return Rate::Unstable {
                margin: service - self.arrival_rate,
            };
        }
        let pi0 = 1.0 - self.arrival_rate / service;
        let ms = self.ms();
        Rate::Stable(pi0 * (1.0 - self.secondary_outage) * access * (1.0 - access).powi(ms - 1))
    }

    /// Stability of a scheme given its busy-channel access probability.
    pub fn stability_at(&self, s1: f64, scheme: Scheme) -> StabilityReport {
        let margin = match scheme {
            Scheme::NoFeedback | Scheme::HardDecision => self.no_feedback_margin(s1),
            Scheme::Feedback => self.feedback_margin(s1),
            Scheme::Genie => self.attempt_success() - self.arrival_rate,
        };
        StabilityReport {
            stable: self.arrival_rate == 0.0 || margin > 0.0,
            margin,
        }
    }

    /// Secondary throughput of a policy under its own scheme.
    pub fn throughput(&self, policy: &AccessPolicy) -> Result<Rate> {
        match policy.scheme {
            Scheme::Genie => Ok(self.genie_throughput(single(policy)?)),
            Scheme::Feedback => {
                let (s0, s1) = self.access_pair(policy)?;
                Ok(self.throughput_feedback(s0, s1))
            }
            Scheme::NoFeedback | Scheme::HardDecision => {
                let (s0, s1) = self.access_pair(policy)?;
                Ok(self.throughput_no_feedback(s0, s1))
            }
        }
    }

    /// Primary first-transmission success probability under a policy.
    pub fn primary_rate(&self, policy: &AccessPolicy) -> Result<f64> {
        match policy.scheme {
            Scheme::Genie => Ok(self.attempt_success()),
            _ => Ok(self.primary_service_rate(self.busy_access(&policy.access)?)),
        }
    }

    pub fn access_pair(&self, policy: &AccessPolicy) -> Result<(f64, f64)> {
        Ok((
            self.idle_access(&policy.access)?,
            self.busy_access(&policy.access)?,
        ))
    }
}

fn single(policy: &AccessPolicy) -> Result<f64> {
    match policy.access.as_slice() {
        [a] => Ok(*a),
        other => Err(Error::LengthMismatch {
            expected: 1,
            got: other.len(),
        }),
    }
}

/// `mu_p` without feedback; identical to `Gamma_p`.
pub fn primary_service_rate_nofb(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
) -> Result<f64> {
    let model = SystemModel::new(cfg, sensing)?;
    Ok(model.primary_service_rate(model.busy_access(&policy.access)?))
}

pub fn secondary_throughput_nofb(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
) -> Result<Rate> {
    let model = SystemModel::new(cfg, sensing)?;
    let (s0, s1) = model.access_pair(policy)?;
    Ok(model.throughput_no_feedback(s0, s1))
}

pub fn pi0_feedback(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
) -> Result<Rate> {
    let model = SystemModel::new(cfg, sensing)?;
    Ok(model.pi0_feedback(model.busy_access(&policy.access)?))
}

pub fn delta_pi0(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
) -> Result<Rate> {
    let model = SystemModel::new(cfg, sensing)?;
    Ok(model.delta_pi0(model.busy_access(&policy.access)?))
}

pub fn secondary_throughput_fb(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
) -> Result<Rate> {
    let model = SystemModel::new(cfg, sensing)?;
    let (s0, s1) = model.access_pair(policy)?;
    Ok(model.throughput_feedback(s0, s1))
}

pub fn chain_params(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
) -> Result<ChainParams> {
    let model = SystemModel::new(cfg, sensing)?;
    model.chain_params(model.busy_access(&policy.access)?)
}

pub fn stability(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
    scheme: Scheme,
) -> Result<StabilityReport> {
    let model = SystemModel::new(cfg, sensing)?;
    let s1 = match scheme {
        Scheme::Genie => 0.0,
        _ => model.busy_access(&policy.access)?,
    };
    Ok(model.stability_at(s1, scheme))
}
