//! Run configuration: a single JSON document covering budgets, link
//! parameters, traffic, QoS targets, spike schedule, utility weights,
//! controller cadence, and training hyperparameters.
//!
//! Everything a run consumes flows from this document plus explicit seed
//! lists; no wall-clock entropy enters anywhere except the reported
//! decision-time measurements.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::utility::{QosTargets, UtilityWeights};
use crate::{F, NUM_SLICES};

/// Slice identifiers in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SliceId {
    Urllc,
    Embb,
    Mmtc,
}

impl SliceId {
    pub const ALL: [SliceId; NUM_SLICES] = [SliceId::Urllc, SliceId::Embb, SliceId::Mmtc];

    pub fn index(self) -> usize {
        match self {
            SliceId::Urllc => 0,
            SliceId::Embb => 1,
            SliceId::Mmtc => 2,
        }
    }

    pub fn from_index(i: usize) -> SliceId {
        Self::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            SliceId::Urllc => "URLLC",
            SliceId::Embb => "eMBB",
            SliceId::Mmtc => "mMTC",
        }
    }
}

impl std::fmt::Display for SliceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Global resource budgets (C1-C3 right-hand sides).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Budgets {
    pub power_w: F,
    pub prb: F,
    pub compute: F,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            power_w: 40.0,
            prb: 100.0,
            compute: 1.0,
        }
    }
}

/// Physical-layer constants for the PRB-level link abstraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkParams {
    /// Noise power per PRB in watts.
    pub noise_per_prb_w: F,
    /// Mean channel gain per slice (linear).
    pub channel_gain: [F; NUM_SLICES],
    /// Log-normal per-tick gain jitter, standard deviation in dB.
    pub gain_jitter_db: F,
    /// Packet size per slice in bits.
    pub packet_bits: [F; NUM_SLICES],
    /// Processing service rate per slice, packets/s per unit of compute.
    pub service_rate: [F; NUM_SLICES],
    /// Per-UE circuit power in mW (enters the power-target check).
    pub circuit_power_mw: F,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            noise_per_prb_w: 1e-9,
            channel_gain: [1.2e-7, 1.0e-7, 6.0e-8],
            gain_jitter_db: 1.0,
            packet_bits: [1e4, 1e5, 1e3],
            service_rate: [4e4, 1e3, 50.0],
            circuit_power_mw: 0.1,
        }
    }
}

/// Traffic model: UE birth/death plus per-UE packet generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficParams {
    /// UE arrival rate per slice, UEs per second.
    pub ue_arrival_per_s: [F; NUM_SLICES],
    /// Mean UE holding time per slice in seconds.
    pub ue_mean_holding_s: [F; NUM_SLICES],
    /// Active UEs at reset.
    pub initial_ues: [u32; NUM_SLICES],
    /// Packet generation rate per UE, packets per second.
    pub pkts_per_ue_per_s: [F; NUM_SLICES],
    /// Queue capacity per slice in packets (occupancy denominator).
    pub queue_capacity_pkts: [F; NUM_SLICES],
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            ue_arrival_per_s: [2.0, 0.5, 10.0],
            ue_mean_holding_s: [10.0, 60.0, 600.0],
            initial_ues: [20, 30, 6000],
            pkts_per_ue_per_s: [150.0, 9.0, 0.01],
            queue_capacity_pkts: [500.0, 100.0, 200.0],
        }
    }
}

/// Anomaly mechanisms the environment can inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeMechanism {
    /// Packet-generation burst: rate multiplied by `magnitude` (> 1).
    BufferSurge,
    /// Interference: effective noise multiplied by `magnitude` (> 1).
    InterferenceSurge,
    /// Channel-gain collapse: gain multiplied by `magnitude` (in (0, 1)).
    GainDrop,
}

/// A scheduled anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub trigger_tick: u64,
    pub target_slice: SliceId,
    pub mechanism: SpikeMechanism,
    pub magnitude: F,
    pub duration_ticks: u64,
}

impl SpikeEvent {
    pub fn validate(&self) -> Result<(), String> {
        match self.mechanism {
            SpikeMechanism::BufferSurge | SpikeMechanism::InterferenceSurge => {
                if self.magnitude <= 1.0 {
                    return Err(format!(
                        "surge magnitude must be > 1, got {}",
                        self.magnitude
                    ));
                }
            }
            SpikeMechanism::GainDrop => {
                if !(self.magnitude > 0.0 && self.magnitude < 1.0) {
                    return Err(format!(
                        "gain_drop magnitude must be in (0, 1), got {}",
                        self.magnitude
                    ));
                }
            }
        }
        if self.duration_ticks < 1 {
            return Err("spike duration must be >= 1 tick".into());
        }
        Ok(())
    }

    pub fn active_at(&self, tick: u64) -> bool {
        tick >= self.trigger_tick && tick < self.trigger_tick + self.duration_ticks
    }
}

/// Random spike generation for training episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomSpikes {
    /// Expected number of spike groups per episode.
    pub groups_per_episode: F,
    /// Inclusive magnitude range for surges.
    pub surge_magnitude: [F; 2],
    /// Duration range in ticks for the buffer component.
    pub burst_duration: [u64; 2],
    /// Duration range in ticks for the interference component.
    pub interference_duration: [u64; 2],
}

impl Default for RandomSpikes {
    fn default() -> Self {
        Self {
            groups_per_episode: 3.0,
            surge_magnitude: [2.0, 3.5],
            burst_duration: [1, 3],
            interference_duration: [15, 40],
        }
    }
}

/// Initial per-resource shares per slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialShares {
    pub power: [F; NUM_SLICES],
    pub prb: [F; NUM_SLICES],
    pub compute: [F; NUM_SLICES],
}

impl Default for InitialShares {
    fn default() -> Self {
        Self {
            power: [0.25, 0.45, 0.20],
            prb: [0.30, 0.50, 0.15],
            compute: [0.35, 0.35, 0.20],
        }
    }
}

/// Explainability-utility parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainConfig {
    /// Weights (eta1, eta2, eta3) over (sparsity, consistency, faithfulness).
    pub eta: [F; 3],
    /// Normalized L2 radius for epsilon-similar state pairs.
    pub epsilon: F,
    /// Replay window (states) from which pairs are harvested.
    pub window: usize,
    /// Cap on cached pairs entering the per-tick consistency estimate.
    pub max_pairs: usize,
    /// Relative finite-difference step for the faithfulness gradient.
    pub fd_step_rel: F,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            eta: [0.3, 0.3, 0.4],
            epsilon: 0.1,
            window: 512,
            max_pairs: 64,
            fd_step_rel: 1e-4,
        }
    }
}

/// Three-phase controller cadence and thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Reactive phase period in ticks (10 ms loop).
    pub reactive_every: u64,
    /// Inter-slice optimization period in ticks (50 ms loop).
    pub inter_slice_every: u64,
    /// Predictive phase period in ticks (100 ms loop).
    pub predictive_every: u64,
    /// Standardized predicted-demand threshold that triggers pre-allocation.
    pub predictive_threshold: F,
    /// Pre-allocation share delta (bounded).
    pub predictive_delta: F,
    /// Share moved per accepted inter-slice trade.
    pub trade_delta: F,
    /// Below this confidence the reactive delta cap tightens to +/-5%.
    pub confidence_threshold: F,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            reactive_every: 1,
            inter_slice_every: 5,
            predictive_every: 10,
            predictive_threshold: 1.5,
            predictive_delta: 0.05,
            trade_delta: 0.05,
            confidence_threshold: 0.5,
        }
    }
}

/// PPO training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: F,
    pub gae_lambda: F,
    pub clip_epsilon: F,
    pub learning_rate: F,
    pub epochs: u32,
    pub minibatch_size: usize,
    pub rollout_ticks: usize,
    pub iterations: u32,
    /// Weight of the attention-loss block in the total loss.
    pub alpha_xrl: F,
    /// (beta1, beta2, beta3) over (sparsity, consistency, faithfulness).
    pub beta: [F; 3],
    pub value_coef: F,
    pub entropy_coef: F,
    pub max_grad_norm: F,
    /// Soft reward penalty per projected-share clamp event.
    pub clamp_penalty: F,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch_size: 256,
            rollout_ticks: 2048,
            iterations: 200,
            alpha_xrl: 0.5,
            beta: [0.3, 0.3, 0.4],
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            clamp_penalty: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return Err(format!("gae_lambda must be in (0, 1], got {}", self.gae_lambda));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon <= 0.5) {
            return Err(format!(
                "clip_epsilon must be in (0, 0.5], got {}",
                self.clip_epsilon
            ));
        }
        if self.beta.iter().any(|&b| b < 0.0) || self.alpha_xrl < 0.0 {
            return Err("attention loss weights must be nonnegative".into());
        }
        if self.minibatch_size == 0 || self.rollout_ticks == 0 {
            return Err("minibatch_size and rollout_ticks must be positive".into());
        }
        Ok(())
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Base environment seed; per-episode and per-worker streams derive
    /// from it.
    pub seed: u64,
    /// Base tick length in seconds (the 10 ms reactive loop).
    pub tick_seconds: F,
    pub episode_ticks: u64,
    pub budgets: Budgets,
    pub prb_bandwidth_hz: F,
    /// Minimum share any slice keeps of any resource.
    pub share_floor: F,
    /// Sliding-window length (ticks) for the empirical C4 check.
    pub constraint_window: usize,
    /// Wall-clock seconds since midnight at tick 0 (time-of-day features).
    pub time_of_day_start_s: F,
    pub link: LinkParams,
    pub traffic: TrafficParams,
    pub qos_targets: [QosTargets; NUM_SLICES],
    pub initial_shares: InitialShares,
    pub weights: UtilityWeights,
    pub explain: ExplainConfig,
    pub controller: ControllerConfig,
    pub train: TrainConfig,
    /// Fixed spike schedule (applied every episode).
    pub spikes: Vec<SpikeEvent>,
    /// Randomized training anomalies; `None` disables them.
    pub random_spikes: Option<RandomSpikes>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            tick_seconds: 0.01,
            episode_ticks: 1000,
            budgets: Budgets::default(),
            prb_bandwidth_hz: 360_000.0,
            share_floor: 0.05,
            constraint_window: 100,
            time_of_day_start_s: 51_792.0,
            link: LinkParams::default(),
            traffic: TrafficParams::default(),
            qos_targets: [
                QosTargets {
                    latency_ms: 1.0,
                    reliability: 0.99999,
                    throughput_mbps: 50.0,
                    power_mw: None,
                },
                QosTargets {
                    latency_ms: 30.0,
                    reliability: 0.99,
                    throughput_mbps: 100.0,
                    power_mw: None,
                },
                QosTargets {
                    latency_ms: 1000.0,
                    reliability: 0.99,
                    throughput_mbps: 0.001,
                    power_mw: Some(1.0),
                },
            ],
            initial_shares: InitialShares::default(),
            weights: UtilityWeights::default(),
            explain: ExplainConfig::default(),
            controller: ControllerConfig::default(),
            train: TrainConfig::default(),
            spikes: Vec::new(),
            random_spikes: Some(RandomSpikes::default()),
        }
    }
}

impl SimConfig {
    /// The composite anomaly used by the latency-spike case study: a URLLC
    /// packet burst together with an interference window that depresses
    /// URLLC SNR.
    pub fn case_study_spikes(trigger_tick: u64) -> Vec<SpikeEvent> {
        vec![
            SpikeEvent {
                trigger_tick,
                target_slice: SliceId::Urllc,
                mechanism: SpikeMechanism::BufferSurge,
                magnitude: 3.0,
                duration_ticks: 2,
            },
            SpikeEvent {
                trigger_tick,
                target_slice: SliceId::Urllc,
                mechanism: SpikeMechanism::InterferenceSurge,
                magnitude: 2.5,
                duration_ticks: 30,
            },
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tick_seconds <= 0.0 {
            return Err("tick_seconds must be positive".into());
        }
        if self.episode_ticks == 0 {
            return Err("episode_ticks must be positive".into());
        }
        if self.budgets.power_w <= 0.0 || self.budgets.prb <= 0.0 || self.budgets.compute <= 0.0 {
            return Err("resource budgets must be positive".into());
        }
        if !(self.share_floor >= 0.0 && self.share_floor < 1.0 / NUM_SLICES as F) {
            return Err(format!(
                "share_floor must be in [0, 1/{NUM_SLICES}), got {}",
                self.share_floor
            ));
        }
        if self.link.noise_per_prb_w <= 0.0 || self.link.circuit_power_mw < 0.0 {
            return Err("link noise must be positive".into());
        }
        for n in 0..NUM_SLICES {
            if self.link.channel_gain[n] <= 0.0
                || self.link.packet_bits[n] < 1.0
                || self.link.service_rate[n] <= 0.0
            {
                return Err(format!("link parameters for slice {n} must be positive"));
            }
            self.qos_targets[n]
                .validate()
                .map_err(|e| format!("qos target {}: {e}", SliceId::from_index(n)))?;
            if n < 2 && self.qos_targets[n].power_mw.is_some() {
                return Err("power target is only meaningful for mMTC".into());
            }
        }
        for shares in [
            &self.initial_shares.power,
            &self.initial_shares.prb,
            &self.initial_shares.compute,
        ] {
            let sum: F = shares.iter().sum();
            if sum > 1.0 + 1e-9 {
                return Err(format!("initial shares exceed the budget: sum {sum}"));
            }
            if shares.iter().any(|&s| s < self.share_floor - 1e-12) {
                return Err("initial shares below the share floor".into());
            }
        }
        self.weights.validate()?;
        let eta_sum: F = self.explain.eta.iter().sum();
        if (eta_sum - 1.0).abs() > 1e-9 || self.explain.eta.iter().any(|&e| e < 0.0) {
            return Err("explainability eta weights must be nonnegative and sum to 1".into());
        }
        if self.explain.epsilon < 0.0 {
            return Err("epsilon must be nonnegative".into());
        }
        let c = &self.controller;
        if c.reactive_every == 0 || c.inter_slice_every == 0 || c.predictive_every == 0 {
            return Err("controller periods must be positive".into());
        }
        if c.inter_slice_every % c.reactive_every != 0 || c.predictive_every % c.reactive_every != 0
        {
            return Err("the reactive period must divide the other phase periods".into());
        }
        self.train.validate()?;
        for s in &self.spikes {
            s.validate()?;
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = serde_json::from_str(json)?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    /// Hash of the canonical serialized form, recorded in run manifests.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex_string(&digest)
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}
