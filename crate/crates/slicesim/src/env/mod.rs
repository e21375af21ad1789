//! Deterministic discrete-time slicing environment.
//!
//! Each tick (10 ms): UEs arrive and depart, packets are generated, the
//! channel jitters, scheduled anomalies fire, the current allocation serves
//! the queues through the PRB-level link abstraction, and per-slice QoS is
//! measured. All randomness flows through one seeded stream per instance, so
//! a (seed, config, action sequence) triple reproduces a trajectory exactly.

pub mod link;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::config::{SimConfig, SliceId, SpikeEvent, SpikeMechanism};
use crate::utility::{self, QosAchieved, QosTargets};
use crate::{F, NUM_RESOURCES, NUM_SLICES};

/// Per-slice shares of the three global budgets. The policy mutates these;
/// the environment turns them into absolute allocations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shares {
    pub power: [F; NUM_SLICES],
    pub prb: [F; NUM_SLICES],
    pub compute: [F; NUM_SLICES],
}

impl Shares {
    pub fn resource(&self, r: usize) -> &[F; NUM_SLICES] {
        match r {
            0 => &self.power,
            1 => &self.prb,
            2 => &self.compute,
            _ => panic!("resource index {r} out of range"),
        }
    }

    pub fn resource_mut(&mut self, r: usize) -> &mut [F; NUM_SLICES] {
        match r {
            0 => &mut self.power,
            1 => &mut self.prb,
            2 => &mut self.compute,
            _ => panic!("resource index {r} out of range"),
        }
    }

    pub fn sums(&self) -> [F; NUM_RESOURCES] {
        [
            self.power.iter().sum(),
            self.prb.iter().sum(),
            self.compute.iter().sum(),
        ]
    }
}

impl From<&crate::config::InitialShares> for Shares {
    fn from(s: &crate::config::InitialShares) -> Self {
        Shares {
            power: s.power,
            prb: s.prb,
            compute: s.compute,
        }
    }
}

/// Projects shares onto the feasible set: every share at least the floor and
/// per-resource sums at most 1. Oversubscribed resources are scaled down
/// proportionally (above the floor). Returns the number of clamp events.
pub fn project_shares(shares: &mut Shares, floor: F) -> u32 {
    let mut clamps = 0;
    for r in 0..NUM_RESOURCES {
        let s = shares.resource_mut(r);
        for v in s.iter_mut() {
            if *v < floor {
                *v = floor;
                clamps += 1;
            }
        }
        let sum: F = s.iter().sum();
        if sum > 1.0 + 1e-12 {
            // Scale the above-floor excess so the sum lands exactly on 1.
            let excess: F = s.iter().map(|v| v - floor).sum();
            let budget = 1.0 - floor * NUM_SLICES as F;
            let scale = if excess > 0.0 { budget / excess } else { 0.0 };
            for v in s.iter_mut() {
                *v = floor + (*v - floor) * scale;
            }
            clamps += 1;
        }
    }
    clamps
}

/// Absolute per-UE resource assignments for one slice.
#[derive(Debug, Clone, Default)]
pub struct PerUeAllocation {
    pub power_w: Vec<F>,
    pub prb: Vec<F>,
    pub compute: Vec<F>,
}

/// Full allocation: slice-level shares plus demand-weighted per-UE vectors.
#[derive(Debug, Clone)]
pub struct Allocation {
    pub shares: Shares,
    pub per_ue: [PerUeAllocation; NUM_SLICES],
}

/// One side of a constraint verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub satisfied: bool,
    /// Positive slack means headroom; negative means violation depth.
    pub slack: F,
}

/// Per-constraint booleans and slacks for C1-C5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Power budget: slack as a fraction of the budget.
    pub c1: ConstraintCheck,
    /// PRB budget.
    pub c2: ConstraintCheck,
    /// Compute budget.
    pub c3: ConstraintCheck,
    /// Chance constraint per slice: empirical latency-hit fraction vs the
    /// reliability target, over the sliding window.
    pub c4: [ConstraintCheck; NUM_SLICES],
    /// Throughput floor per slice, slack in Mbps.
    pub c5: [ConstraintCheck; NUM_SLICES],
}

impl FeasibilityReport {
    pub fn budgets_ok(&self) -> bool {
        self.c1.satisfied && self.c2.satisfied && self.c3.satisfied
    }
}

/// Sliding windows of per-tick latency-target hits, one per slice (C4).
#[derive(Debug, Clone)]
pub struct LatencyWindows {
    window: usize,
    hits: [VecDeque<bool>; NUM_SLICES],
}

impl LatencyWindows {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            hits: Default::default(),
        }
    }

    pub fn record(&mut self, slice: usize, hit: bool) {
        let q = &mut self.hits[slice];
        q.push_back(hit);
        if q.len() > self.window {
            q.pop_front();
        }
    }

    /// Fraction of recent ticks meeting the latency target; 1 when empty.
    pub fn hit_fraction(&self, slice: usize) -> F {
        let q = &self.hits[slice];
        if q.is_empty() {
            return 1.0;
        }
        q.iter().filter(|&&h| h).count() as F / q.len() as F
    }
}

/// Evaluates C1-C5 for an allocation and the current QoS measurements.
/// Always reports, never fails.
pub fn check_constraints(
    alloc: &Allocation,
    achieved: &[QosAchieved; NUM_SLICES],
    targets: &[QosTargets; NUM_SLICES],
    windows: &LatencyWindows,
    budgets: &crate::config::Budgets,
) -> FeasibilityReport {
    let totals = [budgets.power_w, budgets.prb, budgets.compute];
    let mut used = [0.0; NUM_RESOURCES];
    for per_ue in &alloc.per_ue {
        used[0] += per_ue.power_w.iter().sum::<F>();
        used[1] += per_ue.prb.iter().sum::<F>();
        used[2] += per_ue.compute.iter().sum::<F>();
    }
    let budget_check = |r: usize| {
        let slack = (totals[r] - used[r]) / totals[r];
        ConstraintCheck {
            satisfied: slack >= -1e-9,
            slack,
        }
    };
    let mut c4 = [ConstraintCheck {
        satisfied: true,
        slack: 0.0,
    }; NUM_SLICES];
    let mut c5 = c4;
    for n in 0..NUM_SLICES {
        let frac = windows.hit_fraction(n);
        c4[n] = ConstraintCheck {
            satisfied: frac >= targets[n].reliability,
            slack: frac - targets[n].reliability,
        };
        let slack = achieved[n].throughput_mbps - targets[n].throughput_mbps;
        c5[n] = ConstraintCheck {
            satisfied: slack >= 0.0,
            slack,
        };
    }
    FeasibilityReport {
        c1: budget_check(0),
        c2: budget_check(1),
        c3: budget_check(2),
        c4,
        c5,
    }
}

/// Per-tick bookkeeping that rides alongside the QoS measurements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfoRecord {
    pub tick: u64,
    pub spike_active: [bool; NUM_SLICES],
    /// C1-C3 slack fractions.
    pub budget_slack: [F; NUM_RESOURCES],
    /// Clamp events reported by the share projection this tick.
    pub clamp_events: u32,
    pub offered_pkts: [F; NUM_SLICES],
    pub served_pkts: [F; NUM_SLICES],
    pub dropped_pkts: [F; NUM_SLICES],
}

/// Per-slice inputs the utility evaluation needs beyond QoS.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SliceUsage {
    /// Resources actually consumed this tick (W, PRBs, compute).
    pub used: [F; NUM_RESOURCES],
    /// The slice's current allocation (share of each global budget).
    pub allocated: [F; NUM_RESOURCES],
    /// Intra-slice fairness over the per-UE demand split.
    pub fairness: F,
    /// Gini per resource (power, PRB, compute) for trace/replay.
    pub gini: [F; NUM_RESOURCES],
}

/// Everything one environment tick produces.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub qos: [QosAchieved; NUM_SLICES],
    pub usage: [SliceUsage; NUM_SLICES],
    pub info: InfoRecord,
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("infeasible allocation rejected: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone)]
struct SliceSim {
    active_ues: u64,
    queue_pkts: F,
    /// Per-UE demand weights per resource; allocation is split
    /// proportionally, so Gini over these equals Gini over the allocation.
    demand: [Vec<F>; NUM_RESOURCES],
    gini_cache: [F; NUM_RESOURCES],
    /// Current log-normal channel jitter (linear multiplier).
    gain_jitter: F,
    ewma_fast: F,
    ewma_slow: F,
}

impl SliceSim {
    fn refresh_gini(&mut self) {
        for r in 0..NUM_RESOURCES {
            self.gini_cache[r] = utility::gini(&self.demand[r]).unwrap_or(0.0);
        }
    }

    fn fairness(&self) -> F {
        self.gini_cache.iter().map(|g| 1.0 - g).sum::<F>() / NUM_RESOURCES as F
    }
}

/// The slicing environment. One instance per rollout worker; instances are
/// cheap to clone for lookahead simulation.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: SimConfig,
    rng: ChaCha8Rng,
    tick: u64,
    shares: Shares,
    slices: [SliceSim; NUM_SLICES],
    spikes: Vec<SpikeEvent>,
    windows: LatencyWindows,
    last_qos: Option<[QosAchieved; NUM_SLICES]>,
    last_info: Option<InfoRecord>,
    /// Lookahead mode: arrivals frozen to expectation, no RNG draws.
    expectation_mode: bool,
}

impl Env {
    pub fn new(cfg: &SimConfig, episode_seed: u64) -> Self {
        let mut env = Self {
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(0),
            tick: 0,
            shares: Shares::from(&cfg.initial_shares),
            slices: std::array::from_fn(|_| SliceSim {
                active_ues: 0,
                queue_pkts: 0.0,
                demand: Default::default(),
                gini_cache: [0.0; NUM_RESOURCES],
                gain_jitter: 1.0,
                ewma_fast: 0.0,
                ewma_slow: 0.0,
            }),
            spikes: Vec::new(),
            windows: LatencyWindows::new(cfg.constraint_window),
            last_qos: None,
            last_info: None,
            expectation_mode: false,
        };
        env.reset(episode_seed);
        env
    }

    /// Reinitializes traffic, queues, shares, and the episode spike schedule.
    pub fn reset(&mut self, episode_seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ episode_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.tick = 0;
        self.shares = Shares::from(&self.cfg.initial_shares);
        self.windows = LatencyWindows::new(self.cfg.constraint_window);
        self.last_qos = None;
        self.last_info = None;
        self.expectation_mode = false;
        self.spikes = self.cfg.spikes.clone();
        if let Some(rs) = self.cfg.random_spikes.clone() {
            self.generate_random_spikes(&rs);
        }
        for n in 0..NUM_SLICES {
            let ues = self.cfg.traffic.initial_ues[n] as u64;
            let mut demand: [Vec<F>; NUM_RESOURCES] = Default::default();
            for r in 0..NUM_RESOURCES {
                demand[r] = (0..ues).map(|_| exp_weight(&mut self.rng)).collect();
            }
            let offered = ues as F * self.cfg.traffic.pkts_per_ue_per_s[n] * self.cfg.tick_seconds;
            self.slices[n] = SliceSim {
                active_ues: ues,
                queue_pkts: 0.0,
                demand,
                gini_cache: [0.0; NUM_RESOURCES],
                gain_jitter: 1.0,
                ewma_fast: offered,
                ewma_slow: offered,
            };
            self.slices[n].refresh_gini();
        }
    }

    fn generate_random_spikes(&mut self, rs: &crate::config::RandomSpikes) {
        let groups = link::sample_arrivals(rs.groups_per_episode, &mut self.rng);
        for _ in 0..groups {
            let trigger = self.rng.gen_range(50..self.cfg.episode_ticks.max(60) - 10);
            let slice = SliceId::from_index(self.rng.gen_range(0..NUM_SLICES));
            let magnitude = self.rng.gen_range(rs.surge_magnitude[0]..=rs.surge_magnitude[1]);
            let burst = self.rng.gen_range(rs.burst_duration[0]..=rs.burst_duration[1]);
            let interference =
                self.rng.gen_range(rs.interference_duration[0]..=rs.interference_duration[1]);
            self.spikes.push(SpikeEvent {
                trigger_tick: trigger,
                target_slice: slice,
                mechanism: SpikeMechanism::BufferSurge,
                magnitude,
                duration_ticks: burst,
            });
            self.spikes.push(SpikeEvent {
                trigger_tick: trigger,
                target_slice: slice,
                mechanism: SpikeMechanism::InterferenceSurge,
                magnitude: 1.0 + (magnitude - 1.0) * 0.75,
                duration_ticks: interference,
            });
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn shares(&self) -> &Shares {
        &self.shares
    }

    pub fn active_ues(&self) -> [u64; NUM_SLICES] {
        std::array::from_fn(|n| self.slices[n].active_ues)
    }

    pub fn queue_occupancy(&self) -> [F; NUM_SLICES] {
        std::array::from_fn(|n| {
            (self.slices[n].queue_pkts / self.cfg.traffic.queue_capacity_pkts[n]).min(1.0)
        })
    }

    pub fn spike_schedule(&self) -> &[SpikeEvent] {
        &self.spikes
    }

    pub fn latency_windows(&self) -> &LatencyWindows {
        &self.windows
    }

    /// Switches the instance to expectation mode (used by lookahead clones):
    /// arrivals and jitter are frozen to their means and no RNG is consumed.
    pub fn freeze_to_expectation(&mut self) {
        self.expectation_mode = true;
    }

    /// Replaces the current shares after validating them against C1-C3 and
    /// the share floor.
    pub fn set_shares(&mut self, shares: Shares) -> Result<(), StepError> {
        for (r, name) in ["C1", "C2", "C3"].iter().enumerate() {
            let sum: F = shares.resource(r).iter().sum();
            if sum > 1.0 + 1e-9 {
                return Err(StepError::Infeasible(format!(
                    "{name} violated: resource {r} share sum {sum:.6} exceeds 1"
                )));
            }
            if shares.resource(r).iter().any(|&s| s < -1e-12) {
                return Err(StepError::Infeasible(format!(
                    "{name} violated: negative share on resource {r}"
                )));
            }
        }
        self.shares = shares;
        Ok(())
    }

    /// Expands the current shares into the demand-weighted per-UE allocation.
    pub fn allocation(&self) -> Allocation {
        let b = &self.cfg.budgets;
        let totals = [b.power_w, b.prb, b.compute];
        let per_ue = std::array::from_fn(|n| {
            let slice = &self.slices[n];
            let mut out = PerUeAllocation::default();
            for r in 0..NUM_RESOURCES {
                let total = self.shares.resource(r)[n] * totals[r];
                let wsum: F = slice.demand[r].iter().sum();
                let vec: Vec<F> = if wsum > 0.0 {
                    slice.demand[r].iter().map(|w| w / wsum * total).collect()
                } else {
                    vec![]
                };
                match r {
                    0 => out.power_w = vec,
                    1 => out.prb = vec,
                    _ => out.compute = vec,
                }
            }
            out
        });
        Allocation {
            shares: self.shares,
            per_ue,
        }
    }

    fn spike_multipliers(&self, tick: u64) -> ([F; NUM_SLICES], [F; NUM_SLICES], [F; NUM_SLICES]) {
        let mut gen_mult = [1.0; NUM_SLICES];
        let mut noise_mult = [1.0; NUM_SLICES];
        let mut gain_mult = [1.0; NUM_SLICES];
        for s in &self.spikes {
            if !s.active_at(tick) {
                continue;
            }
            let n = s.target_slice.index();
            match s.mechanism {
                SpikeMechanism::BufferSurge => gen_mult[n] *= s.magnitude,
                SpikeMechanism::InterferenceSurge => noise_mult[n] *= s.magnitude,
                SpikeMechanism::GainDrop => gain_mult[n] *= s.magnitude,
            }
        }
        (gen_mult, noise_mult, gain_mult)
    }

    /// Advances one tick under the current shares.
    ///
    /// `clamp_events` is whatever the share projection reported for the
    /// actions that produced these shares; it is carried into the info record.
    pub fn step(&mut self, clamp_events: u32) -> StepOutput {
        let cfg = self.cfg.clone();
        let tick = self.tick;
        let (gen_mult, noise_mult, gain_mult) = self.spike_multipliers(tick);

        let budgets = [cfg.budgets.power_w, cfg.budgets.prb, cfg.budgets.compute];
        let mut qos = Vec::with_capacity(NUM_SLICES);
        let mut usage = Vec::with_capacity(NUM_SLICES);
        let mut offered = [0.0; NUM_SLICES];
        let mut served_arr = [0.0; NUM_SLICES];
        let mut dropped = [0.0; NUM_SLICES];
        let mut spike_active = [false; NUM_SLICES];
        for s in &self.spikes {
            if s.active_at(tick) {
                spike_active[s.target_slice.index()] = true;
            }
        }

        for n in 0..NUM_SLICES {
            // Traffic churn first, then channel, then service.
            if !self.expectation_mode {
                let arrivals = link::sample_arrivals(
                    cfg.traffic.ue_arrival_per_s[n] * cfg.tick_seconds,
                    &mut self.rng,
                );
                let p_leave =
                    (cfg.tick_seconds / cfg.traffic.ue_mean_holding_s[n]).clamp(0.0, 1.0);
                let departures = Binomial::new(self.slices[n].active_ues, p_leave)
                    .map(|d| d.sample(&mut self.rng))
                    .unwrap_or(0);
                let slice = &mut self.slices[n];
                let mut changed = arrivals > 0;
                for _ in 0..arrivals {
                    slice.active_ues += 1;
                    for r in 0..NUM_RESOURCES {
                        let w = exp_weight(&mut self.rng);
                        slice.demand[r].push(w);
                    }
                }
                for _ in 0..departures.min(slice.active_ues.saturating_sub(1)) {
                    let idx = self.rng.gen_range(0..slice.demand[0].len());
                    slice.active_ues -= 1;
                    for r in 0..NUM_RESOURCES {
                        slice.demand[r].swap_remove(idx);
                    }
                    changed = true;
                }
                if changed {
                    slice.refresh_gini();
                }
                let jitter_db = Normal::new(0.0, cfg.link.gain_jitter_db)
                    .map(|d| d.sample(&mut self.rng))
                    .unwrap_or(0.0);
                slice.gain_jitter = (10.0f64).powf(jitter_db / 10.0);
            }

            let slice = &mut self.slices[n];
            let gen_rate =
                slice.active_ues as F * cfg.traffic.pkts_per_ue_per_s[n] * cfg.tick_seconds
                    * gen_mult[n];
            let generated = if self.expectation_mode {
                gen_rate
            } else {
                link::sample_arrivals(gen_rate, &mut self.rng) as F
            };
            offered[n] = generated;

            // Link abstraction on slice aggregates.
            let p_n = self.shares.power[n] * budgets[0];
            let b_n = self.shares.prb[n] * budgets[1];
            let c_n = self.shares.compute[n] * budgets[2];
            let gain = cfg.link.channel_gain[n] * slice.gain_jitter * gain_mult[n];
            let noise = cfg.link.noise_per_prb_w * noise_mult[n];
            let snr = if b_n > 0.0 && p_n > 0.0 {
                p_n * gain / (noise * b_n)
            } else {
                0.0
            };
            let throughput_bps =
                link::achieved_throughput_bps(b_n, p_n, gain, noise, cfg.prb_bandwidth_hz);

            let packet_bits = cfg.link.packet_bits[n];
            let serve_capacity = throughput_bps * cfg.tick_seconds / packet_bits;
            let backlog = slice.queue_pkts + generated;
            let served = backlog.min(serve_capacity);
            let mut queue = backlog - served;
            let capacity = cfg.traffic.queue_capacity_pkts[n];
            if queue > capacity {
                dropped[n] = queue - capacity;
                queue = capacity;
            }
            slice.queue_pkts = queue;
            served_arr[n] = served;

            // Head-of-line latency: the queue must drain ahead of a fresh
            // packet, so the transmission term sees (1 + backlog) packets.
            let latency_raw = link::achieved_latency_ms(
                packet_bits * (1.0 + queue),
                throughput_bps,
                c_n,
                cfg.link.service_rate[n],
            );
            let latency_clamp = latency_clamp_ms(&cfg);
            let latency_ms = latency_raw.min(latency_clamp);

            let reliability = link::achieved_reliability(snr, packet_bits);
            let power_per_ue_mw = if slice.active_ues > 0 {
                p_n * 1_000.0 / slice.active_ues as F + cfg.link.circuit_power_mw
            } else {
                cfg.link.circuit_power_mw
            };

            // Demand-driven usage for the efficiency metric.
            let airtime = if serve_capacity > 0.0 {
                (backlog / serve_capacity).min(1.0)
            } else {
                1.0
            };
            let proc_capacity = cfg.link.service_rate[n] * c_n * cfg.tick_seconds;
            let proc_duty = if proc_capacity > 0.0 {
                (served / proc_capacity).min(1.0)
            } else {
                1.0
            };
            let used = [airtime * p_n, airtime * b_n, proc_duty * c_n];

            // Load trend EWMAs feed the predicted-demand feature.
            slice.ewma_fast = 0.3 * generated + 0.7 * slice.ewma_fast;
            slice.ewma_slow = 0.02 * generated + 0.98 * slice.ewma_slow;

            qos.push(QosAchieved {
                latency_ms,
                reliability,
                throughput_mbps: throughput_bps / 1e6,
                power_per_ue_mw,
            });
            usage.push(SliceUsage {
                used,
                allocated: [p_n, b_n, c_n],
                fairness: slice.fairness(),
                gini: slice.gini_cache,
            });
            self.windows
                .record(n, latency_ms <= cfg.qos_targets[n].latency_ms);
        }

        let qos: [QosAchieved; NUM_SLICES] = qos.try_into().unwrap();
        let usage: [SliceUsage; NUM_SLICES] = usage.try_into().unwrap();
        let sums = self.shares.sums();
        let info = InfoRecord {
            tick,
            spike_active,
            budget_slack: std::array::from_fn(|r| 1.0 - sums[r]),
            clamp_events,
            offered_pkts: offered,
            served_pkts: served_arr,
            dropped_pkts: dropped,
        };
        self.tick += 1;
        self.last_qos = Some(qos);
        self.last_info = Some(info.clone());
        StepOutput { qos, usage, info }
    }

    /// Raw (unstandardized) observation features for the current state.
    /// Ordering is fixed by [`crate::policy::features::FEATURE_NAMES`].
    pub fn raw_observation(&self) -> [F; crate::OBS_DIM] {
        let cfg = &self.cfg;
        let mut obs = [0.0; crate::OBS_DIM];
        let tod = (cfg.time_of_day_start_s + self.tick as F * cfg.tick_seconds).rem_euclid(86_400.0)
            / 86_400.0;
        let (tod_sin, tod_cos) = ((tod * std::f64::consts::TAU).sin(), (tod * std::f64::consts::TAU).cos());
        for n in 0..NUM_SLICES {
            let s = &self.slices[n];
            let base = n * crate::SLICE_FEATURES;
            let cap = cfg.traffic.queue_capacity_pkts[n];
            obs[base] = (s.queue_pkts / cap).min(1.0);
            let offered_bps =
                s.ewma_fast / cfg.tick_seconds * cfg.link.packet_bits[n];
            obs[base + 1] = offered_bps / 1e8;
            let (lat_ratio, thr_ratio, rel_margin, snr_db) = match &self.last_qos {
                Some(q) => {
                    let t = &cfg.qos_targets[n];
                    let lat = (q[n].latency_ms / t.latency_ms).min(10.0);
                    let thr = (q[n].throughput_mbps / t.throughput_mbps).min(10.0);
                    let margin = ((q[n].reliability - t.reliability) / (1.0 - t.reliability + 1e-12))
                        .clamp(-20.0, 1.0);
                    // Back out SNR from spectral efficiency per PRB.
                    let b_n = self.shares.prb[n] * cfg.budgets.prb;
                    let se = if b_n > 0.0 {
                        q[n].throughput_mbps * 1e6 / (b_n * cfg.prb_bandwidth_hz)
                    } else {
                        0.0
                    };
                    let snr = (2.0f64).powf(se) - 1.0;
                    (lat, thr, margin, 10.0 * (snr + 1e-9).log10())
                }
                None => (0.0, 1.0, 1.0, 10.0),
            };
            obs[base + 2] = snr_db / 30.0;
            obs[base + 3] = self.shares.power[n] - cfg.share_floor;
            obs[base + 4] = self.shares.prb[n] - cfg.share_floor;
            obs[base + 5] = self.shares.compute[n] - cfg.share_floor;
            obs[base + 6] = ((s.ewma_fast - s.ewma_slow) / (s.ewma_slow + 1e-6)).clamp(-5.0, 5.0);
            obs[base + 7] = lat_ratio;
            obs[base + 8] = thr_ratio;
            obs[base + 9] = rel_margin;
            obs[base + 10] = if lat_ratio > 1.0 { 1.0 } else { 0.0 };
            obs[base + 11] = tod_sin;
        }
        let ctx = NUM_SLICES * crate::SLICE_FEATURES;
        let sums = self.shares.sums();
        obs[ctx] = sums[0];
        obs[ctx + 1] = sums[1];
        obs[ctx + 2] = sums[2];
        obs[ctx + 3] = tod_cos;
        obs
    }
}

/// Latency ceiling before utilities: 10x the largest slice target.
pub fn latency_clamp_ms(cfg: &SimConfig) -> F {
    10.0 * cfg
        .qos_targets
        .iter()
        .map(|t| t.latency_ms)
        .fold(0.0, F::max)
}

fn exp_weight<R: Rng>(rng: &mut R) -> F {
    // Exp(1) demand weight via inverse CDF; bounded away from 0.
    let u: F = rng.gen_range(1e-12..1.0);
    -u.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet_config() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.random_spikes = None;
        cfg
    }

    fn no_traffic_config() -> SimConfig {
        let mut cfg = quiet_config();
        cfg.traffic.pkts_per_ue_per_s = [0.0; NUM_SLICES];
        cfg.traffic.ue_arrival_per_s = [0.0; NUM_SLICES];
        cfg
    }

    #[test]
    fn zero_arrivals_keep_queues_empty() {
        let cfg = no_traffic_config();
        let mut env = Env::new(&cfg, 1);
        for _ in 0..50 {
            env.step(0);
            assert_eq!(env.queue_occupancy(), [0.0; NUM_SLICES]);
        }
    }

    #[test]
    fn buffer_surge_raises_queue_on_trigger_tick() {
        let mut cfg = quiet_config();
        cfg.spikes = vec![SpikeEvent {
            trigger_tick: 5,
            target_slice: SliceId::Urllc,
            mechanism: SpikeMechanism::BufferSurge,
            magnitude: 5.0,
            duration_ticks: 2,
        }];
        let mut env = Env::new(&cfg, 3);
        let mut before = 0.0;
        for t in 0..6 {
            if t == 5 {
                before = env.queue_occupancy()[0];
            }
            env.step(0);
        }
        assert!(
            env.queue_occupancy()[0] > before,
            "queue occupancy should strictly increase on the trigger tick"
        );
    }

    #[test]
    fn fixed_seed_reproduces_trajectory_exactly() {
        let cfg = SimConfig::default();
        let run = || {
            let mut env = Env::new(&cfg, 7);
            let mut log = Vec::new();
            for _ in 0..100 {
                let out = env.step(0);
                log.push((out.qos, out.info.offered_pkts, env.raw_observation()));
            }
            log
        };
        let (a, b) = (run(), run());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(format!("{x:?}"), format!("{y:?}"));
        }
    }

    #[test]
    fn no_degradation_before_spike_trigger() {
        let mut base_cfg = quiet_config();
        let mut spike_cfg = base_cfg.clone();
        spike_cfg.spikes = SimConfig::case_study_spikes(40);
        base_cfg.spikes = Vec::new();
        let mut env_a = Env::new(&base_cfg, 11);
        let mut env_b = Env::new(&spike_cfg, 11);
        for t in 0..40 {
            let a = env_a.step(0);
            let b = env_b.step(0);
            assert_eq!(
                format!("{:?}", a.qos),
                format!("{:?}", b.qos),
                "trajectories diverged at tick {t}, before the trigger"
            );
        }
    }

    #[test]
    fn projection_conserves_budgets_and_floor() {
        let mut shares = Shares {
            power: [0.6, 0.5, 0.3],
            prb: [0.02, 0.5, 0.2],
            compute: [0.3, 0.3, 0.3],
        };
        let clamps = project_shares(&mut shares, 0.05);
        assert!(clamps > 0);
        for r in 0..NUM_RESOURCES {
            let sum: F = shares.resource(r).iter().sum();
            assert!(sum <= 1.0 + 1e-9, "resource {r} sum {sum}");
            for &s in shares.resource(r) {
                assert!(s >= 0.05 - 1e-12);
            }
        }
        // Power was oversubscribed: projection lands exactly on the budget.
        assert_relative_eq!(shares.power.iter().sum::<F>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_shares_rejected_with_constraint_name() {
        let cfg = quiet_config();
        let mut env = Env::new(&cfg, 1);
        let bad = Shares {
            power: [0.5, 0.5, 0.2],
            prb: [0.3, 0.3, 0.3],
            compute: [0.3, 0.3, 0.3],
        };
        let err = env.set_shares(bad).unwrap_err();
        assert!(err.to_string().contains("C1"), "{err}");
    }

    #[test]
    fn constraint_report_examples() {
        let cfg = quiet_config();
        let mut env = Env::new(&cfg, 1);
        // Move to the post-resolution allocation from the reference table:
        // power 42/30/18 sums to 0.9, leaving 10% slack on C1.
        env.set_shares(Shares {
            power: [0.42, 0.30, 0.18],
            prb: [0.55, 0.30, 0.15],
            compute: [0.35, 0.35, 0.20],
        })
        .unwrap();
        let out = env.step(0);
        let report = check_constraints(
            &env.allocation(),
            &out.qos,
            &cfg.qos_targets,
            env.latency_windows(),
            &cfg.budgets,
        );
        assert!(report.c1.satisfied);
        assert_relative_eq!(report.c1.slack, 0.10, epsilon = 1e-9);
        // URLLC latency under 1 ms meets the window criterion here.
        assert!(out.qos[0].latency_ms < 1.0);
        assert!(report.c4[0].satisfied);
    }

    #[test]
    fn all_zero_allocation_satisfies_budgets_violates_c5() {
        let mut cfg = no_traffic_config();
        cfg.share_floor = 0.0;
        let mut env = Env::new(&cfg, 1);
        env.set_shares(Shares {
            power: [0.0; 3],
            prb: [0.0; 3],
            compute: [0.0; 3],
        })
        .unwrap();
        let out = env.step(0);
        let report = check_constraints(
            &env.allocation(),
            &out.qos,
            &cfg.qos_targets,
            env.latency_windows(),
            &cfg.budgets,
        );
        assert!(report.budgets_ok());
        for n in 0..NUM_SLICES {
            assert!(!report.c5[n].satisfied, "C5 should fail for slice {n}");
            assert_eq!(out.qos[n].throughput_mbps, 0.0);
        }
    }

    #[test]
    fn latency_clamped_at_ten_times_largest_target() {
        let mut cfg = no_traffic_config();
        cfg.share_floor = 0.0;
        let mut env = Env::new(&cfg, 1);
        env.set_shares(Shares {
            power: [0.0; 3],
            prb: [0.0; 3],
            compute: [0.0; 3],
        })
        .unwrap();
        let out = env.step(0);
        for n in 0..NUM_SLICES {
            assert_eq!(out.qos[n].latency_ms, 10_000.0);
        }
    }

    #[test]
    fn nominal_allocation_meets_urllc_targets() {
        let cfg = quiet_config();
        let mut env = Env::new(&cfg, 5);
        let mut worst_latency: F = 0.0;
        let mut worst_rel: F = 1.0;
        for _ in 0..200 {
            let out = env.step(0);
            worst_latency = worst_latency.max(out.qos[0].latency_ms);
            worst_rel = worst_rel.min(out.qos[0].reliability);
        }
        assert!(worst_latency < 1.0, "URLLC latency {worst_latency} ms");
        assert!(worst_rel >= 0.99999, "URLLC reliability {worst_rel}");
    }

    #[test]
    fn lookahead_clone_is_deterministic_and_isolated() {
        let cfg = SimConfig::default();
        let mut env = Env::new(&cfg, 9);
        for _ in 0..20 {
            env.step(0);
        }
        let mut c1 = env.clone();
        let mut c2 = env.clone();
        c1.freeze_to_expectation();
        c2.freeze_to_expectation();
        let (a, b) = (c1.step(0), c2.step(0));
        assert_eq!(format!("{:?}", a.qos), format!("{:?}", b.qos));
        // The parent stream is untouched by clone stepping.
        let before = env.clone().step(0);
        let after = env.step(0);
        assert_eq!(format!("{:?}", before.qos), format!("{:?}", after.qos));
    }
}
