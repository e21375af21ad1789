//! Deterministic 6G RAN-slicing simulator with an attention-enhanced
//! multi-agent PPO (AE-MAPPO) controller.
//!
//! The crate is organized around the control loop:
//!
//! - [`env`] — seedable discrete-time slicing environment (arrivals, PRB-level
//!   link abstraction, queues, anomaly injection, constraint checking).
//! - [`utility`] — slice utility mathematics: QoS satisfaction, multi-resource
//!   efficiency, Gini fairness, and the weighted total utility.
//! - [`explain`] — explainability utility `E` (sparsity / consistency /
//!   faithfulness) plus human-readable explanation rendering.
//! - [`policy`] — per-slice actor with six attention heads and a centralized
//!   critic; a single forward pass yields the action distribution, the value,
//!   and the full attention bundle used for both control and explanation.
//! - [`trainer`] — multi-agent PPO with the joint performance+explainability
//!   loss (GAE, clipped surrogate, attention regularizers).
//! - [`controller`] — three-phase allocation loop (reactive 10 ms,
//!   inter-slice 50 ms, predictive 100 ms).
//! - [`scenario`] — latency-spike case study, evaluation, and the plain-MAPPO
//!   ablation comparison.
//! - [`trace`] — CSV/JSONL trace formats and replay verification.
//!
//! The pure math kernels are generic over the scalar type (any
//! [`Real`](crate::num::Real)); the simulator, policy, and trainer pin `f64`
//! because their gradient and replay gates are specified at 64-bit precision.

pub mod config;
pub mod controller;
pub mod env;
pub mod explain;
pub mod nn;
pub mod num;
pub mod policy;
pub mod scenario;
pub mod trace;
pub mod trainer;
pub mod utility;

/// Scalar type used by the simulator, policy, and trainer.
pub type F = f64;

/// Number of slices (URLLC, eMBB, mMTC).
pub const NUM_SLICES: usize = 3;

/// Per-slice feature count in the observation vector.
pub const SLICE_FEATURES: usize = 12;

/// Context feature count (global utilizations + time-of-day cosine).
pub const CONTEXT_FEATURES: usize = 4;

/// Total observation dimension.
pub const OBS_DIM: usize = NUM_SLICES * SLICE_FEATURES + CONTEXT_FEATURES;

/// History window length consumed by temporal attention.
pub const HISTORY_WINDOW: usize = 8;

/// Counterfactual candidates scored per decision (no-op + 4 alternatives).
pub const NUM_CANDIDATES: usize = 5;

/// Number of attention heads in the bundle.
pub const NUM_HEADS: usize = 6;

/// Resources managed per slice (power, PRB, compute).
pub const NUM_RESOURCES: usize = 3;

/// Discrete share deltas available to every slice-resource factor.
pub const ACTION_DELTAS: [F; 5] = [-0.10, -0.05, 0.0, 0.05, 0.10];
