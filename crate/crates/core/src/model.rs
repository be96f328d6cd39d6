//! Physical-layer and sensing primitives.
//!
//! Links are Rayleigh flat-fading with AWGN, so the SNR at distance `r` is
//! exponential and a link is in outage when `|h|^2 < zeta N0 r^gamma / G`.
//! The energy detector sees a single complex sample whose squared magnitude
//! is exponential with mean `2 sigma^2`; binning `[0, eta]` into `n` equal
//! subintervals gives the per-bin probabilities used by every rate formula.

use std::fmt;
use std::str::FromStr;

use crate::error::{Diagnostic, Error, Result};

/// Drift tolerated before a computed probability is treated as a formula bug.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Idle-channel probability that the detector output exceeds the default threshold.
pub const DEFAULT_IDLE_EXCEEDANCE: f64 = 0.1;

/// Clamp `value` into `[0, 1]` when it drifted by at most [`PROBABILITY_SLACK`].
pub fn clamp_probability(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else if value > -PROBABILITY_SLACK && value < 1.0 + PROBABILITY_SLACK {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(Error::Probability { what, value })
    }
}

/// Convert a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// All physical and topological parameters shared by one experiment.
///
/// Users are symmetric: one transmit power per class and one distance per
/// link type. `resource_shares` is the TDMA allocation vector; the rate
/// formulas assume it is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub primary_users: usize,
    pub secondary_users: usize,
    /// Bernoulli arrival probability per primary queue per slot.
    pub arrival_rate: f64,
    /// Primary transmit power, watts.
    pub primary_power: f64,
    /// Secondary transmit power, watts.
    pub secondary_power: f64,
    /// Primary transmitter to primary receiver, meters.
    pub primary_link_distance: f64,
    /// Secondary transmitter to secondary receiver, meters.
    pub secondary_link_distance: f64,
    /// Primary transmitter to secondary sensing node, meters.
    pub cross_distance: f64,
    pub path_loss_exponent: f64,
    /// Noise spectral density, W/Hz.
    pub noise_density: f64,
    /// Linear SNR outage threshold.
    pub outage_threshold: f64,
    /// Probability that each primary owns a slot; sums to at most one.
    pub resource_shares: Vec<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let primary_users = 4;
        Self {
            primary_users,
            secondary_users: 2,
            arrival_rate: 0.1,
            primary_power: 0.1,
            secondary_power: 0.1,
            primary_link_distance: 100.0,
            secondary_link_distance: 100.0,
            cross_distance: 150.0,
            path_loss_exponent: 3.7,
            noise_density: 1e-11,
            outage_threshold: db_to_linear(10.0),
            resource_shares: uniform_shares(primary_users),
        }
    }
}

pub fn uniform_shares(users: usize) -> Vec<f64> {
    vec![1.0 / users as f64; users]
}

impl NetworkConfig {
    /// Check every field, collecting one diagnostic per violation.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.primary_users == 0 {
            out.push(Diagnostic::new("network.M_p", "must be at least 1"));
        }
        if self.secondary_users == 0 {
            out.push(Diagnostic::new("network.M_s", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.arrival_rate) {
            out.push(Diagnostic::new("network.lambda_p", "must lie in [0, 1]"));
        }
        let positive = [
            ("network.G_p", self.primary_power),
            ("network.G_s", self.secondary_power),
            ("network.r_pd", self.primary_link_distance),
            ("network.r_sd", self.secondary_link_distance),
            ("network.r_ps", self.cross_distance),
            ("network.gamma", self.path_loss_exponent),
            ("network.N_0", self.noise_density),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                out.push(Diagnostic::new(field, "must be strictly positive"));
            }
        }
        if !(self.outage_threshold >= 0.0 && self.outage_threshold.is_finite()) {
            out.push(Diagnostic::new("network.zeta_db", "must be finite"));
        }
        if self.resource_shares.len() != self.primary_users {
            out.push(Diagnostic::new(
                "network.omega_p",
                format!("needs {} entries", self.primary_users),
            ));
        }
        if self.resource_shares.iter().any(|w| !(*w >= 0.0)) {
            out.push(Diagnostic::new(
                "network.omega_p",
                "entries must be nonnegative",
            ));
        }
        if self.resource_shares.iter().sum::<f64>() > 1.0 + PROBABILITY_SLACK {
            out.push(Diagnostic::new(
                "network.omega_p",
                "entries must sum to at most 1",
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(diags))
        }
    }

    /// Outage probability of the primary link.
    pub fn primary_outage(&self) -> Result<f64> {
        outage_probability(
            self.primary_power,
            self.primary_link_distance,
            self.path_loss_exponent,
            self.outage_threshold,
            self.noise_density,
        )
    }

    /// Outage probability of the secondary link.
    pub fn secondary_outage(&self) -> Result<f64> {
        outage_probability(
            self.secondary_power,
            self.secondary_link_distance,
            self.path_loss_exponent,
            self.outage_threshold,
            self.noise_density,
        )
    }

    /// Mean received primary power at a sensing node.
    pub fn cross_received_power(&self) -> f64 {
        self.primary_power * self.cross_distance.powf(-self.path_loss_exponent)
    }
}

/// Energy-detector parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingConfig {
    /// Decision threshold `eta`; outputs above it never lead to access.
    pub threshold: f64,
    /// Number of equal subintervals of `[0, threshold]`.
    pub bins: usize,
    /// Per-dimension variance of the detector output when the channel is idle.
    pub idle_variance: f64,
    /// Per-dimension variance when a primary transmits.
    pub busy_variance: f64,
}

impl SensingConfig {
    /// Single-sample detector matched to the network link budget.
    ///
    /// `idle_variance = N0/2`, `busy_variance = (N0 + G_p r_ps^-gamma)/2`, and the
    /// threshold leaves [`DEFAULT_IDLE_EXCEEDANCE`] of idle outputs above it.
    pub fn for_network(cfg: &NetworkConfig, bins: usize) -> Self {
        let idle_variance = cfg.noise_density / 2.0;
        let busy_variance = (cfg.noise_density + cfg.cross_received_power()) / 2.0;
        Self {
            threshold: threshold_for_exceedance(idle_variance, DEFAULT_IDLE_EXCEEDANCE),
            bins,
            idle_variance,
            busy_variance,
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            out.push(Diagnostic::new("sensing.eta", "must be strictly positive"));
        }
        if self.bins == 0 {
            out.push(Diagnostic::new("sensing.n", "must be at least 1"));
        }
        if !(self.idle_variance > 0.0 && self.idle_variance.is_finite()) {
            out.push(Diagnostic::new(
                "sensing.sigma0_sq",
                "must be strictly positive",
            ));
        }
        if !(self.busy_variance > self.idle_variance && self.busy_variance.is_finite()) {
            out.push(Diagnostic::new(
                "sensing.sigma1_sq",
                "must exceed sigma0_sq",
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(diags))
        }
    }

    /// Bin probabilities with the channel idle (`p_i^0`).
    pub fn idle_bins(&self) -> Result<Vec<f64>> {
        bin_probabilities(self.threshold, self.bins, self.idle_variance)
    }

    /// Bin probabilities with a primary transmitting (`p_i^1`).
    pub fn busy_bins(&self) -> Result<Vec<f64>> {
        bin_probabilities(self.threshold, self.bins, self.busy_variance)
    }

    /// Same detector collapsed to one subinterval.
    pub fn single_bin(&self) -> Self {
        Self {
            bins: 1,
            ..self.clone()
        }
    }
}

/// Threshold such that an exponential output with mean `2 sigma_sq` exceeds it
/// with probability `exceedance`.
pub fn threshold_for_exceedance(sigma_sq: f64, exceedance: f64) -> f64 {
    -2.0 * sigma_sq * exceedance.ln()
}

/// Which access scheme a policy belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    NoFeedback,
    Feedback,
    HardDecision,
    Genie,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Feedback,
        Scheme::NoFeedback,
        Scheme::HardDecision,
        Scheme::Genie,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::NoFeedback => "nofb",
            Scheme::Feedback => "fb",
            Scheme::HardDecision => "hard",
            Scheme::Genie => "genie",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nofb" => Ok(Scheme::NoFeedback),
            "fb" => Ok(Scheme::Feedback),
            "hard" => Ok(Scheme::HardDecision),
            "genie" => Ok(Scheme::Genie),
            other => Err(Error::Domain(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Per-bin access probabilities `a_1..a_n` shared by every SU.
///
/// A genie policy carries a single entry: the access probability used in
/// slots that are known to be idle.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPolicy {
    pub access: Vec<f64>,
    pub scheme: Scheme,
}

impl AccessPolicy {
    pub fn new(access: Vec<f64>, scheme: Scheme) -> Result<Self> {
        if let Some(bad) = access.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::Probability {
                what: "access probability",
                value: *bad,
            });
        }
        Ok(Self { access, scheme })
    }

    pub fn silent(bins: usize, scheme: Scheme) -> Self {
        Self {
            access: vec![0.0; bins],
            scheme,
        }
    }

    pub fn bins(&self) -> usize {
        self.access.len()
    }
}

/// Outage probability `1 - exp(-zeta N0 r^gamma / G)` of a Rayleigh link.
pub fn outage_probability(
    power: f64,
    distance: f64,
    path_loss_exponent: f64,
    threshold: f64,
    noise_density: f64,
) -> Result<f64> {
    if !(power > 0.0) || !(distance > 0.0) || !(noise_density > 0.0) {
        return Err(Error::Domain(
            "power, distance and noise density must be positive".into(),
        ));
    }
    if !(threshold >= 0.0) || !(path_loss_exponent > 0.0) {
        return Err(Error::Domain(
            "threshold must be nonnegative and path-loss exponent positive".into(),
        ));
    }
    let exponent = threshold * noise_density * distance.powf(path_loss_exponent) / power;
    clamp_probability("outage probability", -(-exponent).exp_m1())
}

/// Probability that an exponential statistic with mean `2 sigma_sq` lands in
/// each of the `n` equal subintervals of `[0, eta]`.
pub fn bin_probabilities(eta: f64, n: usize, sigma_sq: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || n == 0 || !(sigma_sq > 0.0) {
        return Err(Error::Domain(
            "bin probabilities need eta > 0, n >= 1 and sigma^2 > 0".into(),
        ));
    }
    let width = eta / (2.0 * n as f64 * sigma_sq);
    // exp(-(i-1)w) - exp(-iw) = exp(-(i-1)w) * (1 - exp(-w))
    let bin_mass = -(-width).exp_m1();
    Ok((0..n)
        .map(|i| (-(i as f64) * width).exp() * bin_mass)
        .collect())
}

/// `sum_i p_i a_i`: the probability that a SU's statistic falls in a bin and
/// the SU then decides to access.
pub fn joint_access_probability(policy: &AccessPolicy, bins: &[f64]) -> Result<f64> {
    dot(&policy.access, bins)
}

pub(crate) fn dot(access: &[f64], bins: &[f64]) -> Result<f64> {
    if access.len() != bins.len() {
        return Err(Error::LengthMismatch {
            expected: bins.len(),
            got: access.len(),
        });
    }
    let total = access.iter().zip(bins).map(|(a, p)| a * p).sum();
    clamp_probability("joint access probability", total)
}
