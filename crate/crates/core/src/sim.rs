//! Slot-level Monte Carlo simulation of the primary/secondary network.
//!
//! Per slot: the TDMA owner is drawn, every backlogged primary keeps its
//! head-of-line packet until it is delivered, the secondaries sense and
//! access, collisions and outages are resolved, and new packets arrive at the
//! end of the slot (they are first eligible in the next one).
//!
//! Under feedback the default [`BackoffRule::PerUserArq`] keeps one ARQ flag per
//! primary: once a backlogged primary fails to deliver its head-of-line packet
//! in a slot, the packet is marked for retransmission and secondaries stay
//! silent in every slot where that primary transmits it. This is the behaviour
//! the queue chain describes. [`BackoffRule::NextSlotOnly`] silences the
//! secondaries only in the slot right after a NACK, whoever owns it.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Diagnostic, Error, Result};
use crate::model::{AccessPolicy, NetworkConfig, Scheme, SensingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OwnerSchedule {
    /// Owner drawn independently each slot from the resource shares.
    Random,
    /// Owner cycles `0, 1, ..., M_p - 1`.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackoffRule {
    PerUserArq,
    NextSlotOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub slots: u64,
    pub warmup: u64,
    pub seed: u64,
    pub replications: usize,
    pub owner_schedule: OwnerSchedule,
    pub backoff: BackoffRule,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            slots: 1_000_000,
            warmup: 10_000,
            seed: 1,
            replications: 10,
            owner_schedule: OwnerSchedule::Random,
            backoff: BackoffRule::PerUserArq,
        }
    }
}

impl SimConfig {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.warmup >= self.slots {
            out.push(Diagnostic::new(
                "sim.warmup",
                "must be smaller than sim.slots",
            ));
        }
        if self.replications == 0 {
            out.push(Diagnostic::new("sim.replications", "must be at least 1"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean across replications; NaN with one replication.
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_error = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, std_error }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Counters of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    pub arrivals: Vec<u64>,
    pub departures: Vec<u64>,
    pub final_backlog: Vec<u64>,
    pub outage_losses: u64,
    pub interference_losses: u64,
    /// Losses of retransmissions shielded by back-off, split by cause.
    pub protected_outage_losses: u64,
    pub protected_interference_losses: u64,
    /// Slots with two or more simultaneous transmissions.
    pub collisions: u64,
    /// SU transmissions in slots protected by back-off; zero by construction.
    pub protected_su_transmissions: u64,
    pub mu_s: f64,
    pub mu_p: f64,
    pub delay: Option<f64>,
    pub pi0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Per-SU throughput.
    pub mu_s_hat: Estimate,
    /// Success rate of first transmission attempts of a backlogged primary.
    pub mu_p_hat: Estimate,
    /// Mean sojourn in slots; `None` when nothing departed.
    pub delay_hat: Option<Estimate>,
    pub pi0_hat: Estimate,
    pub collisions: u64,
    pub seed_used: u64,
    pub replications: Vec<ReplicationStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Idle,
    PrimarySuccess,
    PrimaryOutage,
    PrimaryCollision,
    SecondarySuccess,
    SecondaryOutage,
    SecondaryCollision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    None,
    Ack,
    Nack,
}

/// One simulated slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub owner: Option<usize>,
    /// Queue lengths at the start of the slot.
    pub queues: Vec<usize>,
    pub protected: bool,
    pub su_access: Vec<bool>,
    pub outcome: Outcome,
    pub feedback: Feedback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub warmup: u64,
    pub records: Vec<SlotRecord>,
}

/// Fraction of post-warmup slots whose owner queue is empty at slot start.
/// Slots left unallocated by the shares count as empty.
pub fn estimate_pi0(trace: &Trace) -> Result<f64> {
    let mut total = 0u64;
    let mut empty = 0u64;
    for r in trace.records.iter().filter(|r| r.slot >= trace.warmup) {
        total += 1;
        if r.owner.is_none_or(|o| r.queues[o] == 0) {
            empty += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyTrace);
    }
    Ok(empty as f64 / total as f64)
}

/// Per-slot trace CSV: `slot,owner,queues,protected,su_access,outcome,feedback`.
/// Queue lengths are `;`-joined and SU decisions written as a `0`/`1` string.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "slot",
        "owner",
        "queues",
        "protected",
        "su_access",
        "outcome",
        "feedback",
    ])?;
    for r in &trace.records {
        let queues: Vec<String> = r.queues.iter().map(|q| q.to_string()).collect();
        let access: String = r
            .su_access
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        w.write_record([
            r.slot.to_string(),
            r.owner.map(|o| o.to_string()).unwrap_or_default(),
            queues.join(";"),
            r.protected.to_string(),
            access,
            format!("{:?}", r.outcome),
            format!("{:?}", r.feedback),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &Trace, path: &Path) -> Result<()> {
    write_trace_csv(trace, std::fs::File::create(path)?)
}

/// Everything a replication needs, resolved once.
struct Setup {
    scheme: Scheme,
    backoff: BackoffRule,
    owner_schedule: OwnerSchedule,
    primary_users: usize,
    secondary_users: usize,
    arrival_rate: f64,
    cumulative_shares: Vec<f64>,
    primary_outage: f64,
    secondary_outage: f64,
    /// Energy bin width `eta / n`.
    bin_width: f64,
    idle_mean: f64,
    busy_mean: f64,
    access: Vec<f64>,
    slots: u64,
    warmup: u64,
    seed: u64,
}

impl Setup {
    fn new(
        cfg: &NetworkConfig,
        sensing: &SensingConfig,
        policy: &AccessPolicy,
        sim: &SimConfig,
    ) -> Result<Self> {
        let mut diags = cfg.diagnostics();
        diags.extend(sensing.diagnostics());
        diags.extend(sim.diagnostics());
        let bins = match policy.scheme {
            Scheme::HardDecision | Scheme::Genie => 1,
            Scheme::NoFeedback | Scheme::Feedback => sensing.bins,
        };
        if policy.bins() != bins {
            diags.push(Diagnostic::new(
                "policy.a",
                format!(
                    "expected {bins} access probabilities, got {}",
                    policy.bins()
                ),
            ));
        }
        if policy.access.iter().any(|a| !(0.0..=1.0).contains(a)) {
            diags.push(Diagnostic::new(
                "policy.a",
                "access probabilities must lie in [0, 1]",
            ));
        }
        if !diags.is_empty() {
            return Err(Error::Config(diags));
        }
        let mut acc = 0.0;
        let cumulative_shares = cfg
            .resource_shares
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            scheme: policy.scheme,
            backoff: sim.backoff,
            owner_schedule: sim.owner_schedule,
            primary_users: cfg.primary_users,
            secondary_users: cfg.secondary_users,
            arrival_rate: cfg.arrival_rate,
            cumulative_shares,
            primary_outage: cfg.primary_outage()?,
            secondary_outage: cfg.secondary_outage()?,
            bin_width: sensing.threshold / bins as f64,
            idle_mean: 2.0 * sensing.idle_variance,
            busy_mean: 2.0 * sensing.busy_variance,
            access: policy.access.clone(),
            slots: sim.slots,
            warmup: sim.warmup,
            seed: sim.seed,
        })
    }

    fn feedback(&self) -> bool {
        self.scheme == Scheme::Feedback
    }
}

/// Independent random streams of one replication.
struct Streams {
    owner: ChaCha8Rng,
    arrivals: Vec<ChaCha8Rng>,
    primary_channel: ChaCha8Rng,
    secondaries: Vec<ChaCha8Rng>,
}

impl Streams {
    fn new(seed: u64, replication: usize, primaries: usize, secondaries: usize) -> Self {
        let mut next = 0u64;
        let mut stream = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((replication as u64) << 32) | next);
            next += 1;
            rng
        };
        let owner = stream();
        let primary_channel = stream();
        let arrivals = (0..primaries).map(|_| stream()).collect();
        let secondaries = (0..secondaries).map(|_| stream()).collect();
        Self {
            owner,
            arrivals,
            primary_channel,
            secondaries,
        }
    }
}

fn simulate_replication(
    setup: &Setup,
    replication: usize,
    mut trace: Option<&mut Vec<SlotRecord>>,
) -> ReplicationStats {
    let mp = setup.primary_users;
    let ms = setup.secondary_users;
    let mut rng = Streams::new(setup.seed, replication, mp, ms);
    let mut queues: Vec<VecDeque<u64>> = vec![VecDeque::new(); mp];
    let mut retransmit = vec![false; mp];
    let mut nack_last = false;
    let mut stats = ReplicationStats {
        arrivals: vec![0; mp],
        departures: vec![0; mp],
        final_backlog: vec![0; mp],
        outage_losses: 0,
        interference_losses: 0,
        protected_outage_losses: 0,
        protected_interference_losses: 0,
        collisions: 0,
        protected_su_transmissions: 0,
        mu_s: 0.0,
        mu_p: 0.0,
        delay: None,
        pi0: 0.0,
    };
    let (mut su_successes, mut first_slots, mut first_successes) = (0u64, 0u64, 0u64);
    let (mut empty_owner_slots, mut delay_sum, mut delay_count) = (0u64, 0u64, 0u64);
    let mut su_access = vec![false; ms];

    for slot in 0..setup.slots {
        let measured = slot >= setup.warmup;
        let owner = match setup.owner_schedule {
            OwnerSchedule::RoundRobin => Some((slot % mp as u64) as usize),
            OwnerSchedule::Random => {
                let u: f64 = rng.owner.random();
                setup.cumulative_shares.iter().position(|&c| u < c)
            }
        };
        let transmits = owner.is_some_and(|o| !queues[o].is_empty());
        if measured && !transmits {
            empty_owner_slots += 1;
        }
        let protected = setup.feedback()
            && match setup.backoff {
                BackoffRule::PerUserArq => transmits && owner.is_some_and(|o| retransmit[o]),
                BackoffRule::NextSlotOnly => nack_last,
            };

        // Secondary sensing and access.
        let mut su_count = 0usize;
        let mut lone_su = None;
        for (k, su_rng) in rng.secondaries.iter_mut().enumerate() {
            let energy: f64 = Exp1.sample(su_rng);
            let u: f64 = su_rng.random();
            let access = if protected {
                false
            } else if setup.scheme == Scheme::Genie {
                !transmits && u < setup.access[0]
            } else {
                let mean = if transmits {
                    setup.busy_mean
                } else {
                    setup.idle_mean
                };
                let bin = (energy * mean / setup.bin_width).floor();
                bin < setup.access.len() as f64 && u < setup.access[bin as usize]
            };
            su_access[k] = access;
            if access {
                su_count += 1;
                lone_su = Some(k);
            }
        }
        let su_outage =
            lone_su.map(|k| rng.secondaries[k].random::<f64>() < setup.secondary_outage);
        let primary_outage =
            transmits && rng.primary_channel.random::<f64>() < setup.primary_outage;
        if protected && su_count > 0 {
            stats.protected_su_transmissions += 1;
        }
        if transmits as usize + su_count > 1 && measured {
            stats.collisions += 1;
        }

        let outcome = if transmits {
            if su_count > 0 {
                Outcome::PrimaryCollision
            } else if primary_outage {
                Outcome::PrimaryOutage
            } else {
                Outcome::PrimarySuccess
            }
        } else {
            match (su_count, su_outage) {
                (0, _) => Outcome::Idle,
                (1, Some(true)) => Outcome::SecondaryOutage,
                (1, _) => Outcome::SecondarySuccess,
                _ => Outcome::SecondaryCollision,
            }
        };
        let feedback = match outcome {
            Outcome::PrimarySuccess => Feedback::Ack,
            Outcome::PrimaryOutage | Outcome::PrimaryCollision => Feedback::Nack,
            _ => Feedback::None,
        };
        if let Some(t) = trace.as_deref_mut() {
            t.push(SlotRecord {
                slot,
                owner,
                queues: queues.iter().map(VecDeque::len).collect(),
                protected,
                su_access: su_access.clone(),
                outcome,
                feedback,
            });
        }

        if measured {
            match outcome {
                Outcome::SecondarySuccess => su_successes += 1,
                Outcome::PrimaryOutage => {
                    stats.outage_losses += 1;
                    if protected {
                        stats.protected_outage_losses += 1;
                    }
                }
                Outcome::PrimaryCollision => {
                    stats.interference_losses += 1;
                    if protected {
                        stats.protected_interference_losses += 1;
                    }
                }
                _ => {}
            }
        }

        for q in 0..mp {
            if queues[q].is_empty() {
                continue;
            }
            let first_attempt = !retransmit[q];
            let delivered = owner == Some(q) && outcome == Outcome::PrimarySuccess;
            if measured && first_attempt {
                first_slots += 1;
                first_successes += delivered as u64;
            }
            if delivered {
                let arrived = queues[q].pop_front().expect("nonempty queue");
                stats.departures[q] += 1;
                retransmit[q] = false;
                if measured {
                    delay_sum += slot - arrived;
                    delay_count += 1;
                }
            } else if setup.feedback() && setup.backoff == BackoffRule::PerUserArq {
                retransmit[q] = true;
            }
        }
        nack_last = feedback == Feedback::Nack;

        for q in 0..mp {
            if rng.arrivals[q].random::<f64>() < setup.arrival_rate {
                queues[q].push_back(slot);
                stats.arrivals[q] += 1;
            }
        }
    }

    let measured = (setup.slots - setup.warmup) as f64;
    stats.final_backlog = queues.iter().map(|q| q.len() as u64).collect();
    stats.mu_s = su_successes as f64 / (ms as f64 * measured);
    stats.mu_p = if first_slots > 0 {
        first_successes as f64 / first_slots as f64
    } else {
        f64::NAN
    };
    stats.delay = (delay_count > 0).then(|| delay_sum as f64 / delay_count as f64);
    stats.pi0 = empty_owner_slots as f64 / measured;
    stats
}

/// Run all replications in parallel and aggregate them in replication order.
pub fn run(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
    sim: &SimConfig,
) -> Result<SimReport> {
    let setup = Setup::new(cfg, sensing, policy, sim)?;
    let reps: Vec<ReplicationStats> = (0..sim.replications)
        .into_par_iter()
        .map(|r| simulate_replication(&setup, r, None))
        .collect();
    let collect = |f: &dyn Fn(&ReplicationStats) -> f64| {
        Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>())
    };
    let delays: Option<Vec<f64>> = reps.iter().map(|r| r.delay).collect();
    Ok(SimReport {
        mu_s_hat: collect(&|r| r.mu_s),
        mu_p_hat: collect(&|r| r.mu_p),
        delay_hat: delays.map(|d| Estimate::from_samples(&d)),
        pi0_hat: collect(&|r| r.pi0),
        collisions: reps.iter().map(|r| r.collisions).sum(),
        seed_used: sim.seed,
        replications: reps,
    })
}

/// Single replication (index 0) with the full per-slot record.
pub fn simulate_trace(
    cfg: &NetworkConfig,
    sensing: &SensingConfig,
    policy: &AccessPolicy,
    sim: &SimConfig,
) -> Result<(Trace, ReplicationStats)> {
    let setup = Setup::new(cfg, sensing, policy, sim)?;
    let mut records = Vec::with_capacity(sim.slots as usize);
    let stats = simulate_replication(&setup, 0, Some(&mut records));
    Ok((
        Trace {
            warmup: sim.warmup,
            records,
        },
        stats,
    ))
}
