//! Observation feature layout and running standardization.
//!
//! The fixed ordering here is the single source of truth for everything that
//! touches observation vectors: the environment writes them, the policy and
//! explainability metrics read them, and rendered explanations name them.

use serde::{Deserialize, Serialize};

use crate::config::SliceId;
use crate::{F, CONTEXT_FEATURES, NUM_SLICES, OBS_DIM, SLICE_FEATURES};

/// Per-slice feature names, in order.
pub const SLICE_FEATURE_NAMES: [&str; SLICE_FEATURES] = [
    "queue_occupancy",
    "offered_load",
    "mean_snr",
    "power_headroom",
    "prb_headroom",
    "compute_headroom",
    "predicted_demand",
    "latency_ratio",
    "throughput_ratio",
    "reliability_margin",
    "spike_flag",
    "time_of_day_sin",
];

/// Context feature names (after the per-slice blocks).
pub const CONTEXT_FEATURE_NAMES: [&str; CONTEXT_FEATURES] = [
    "global_power_util",
    "global_prb_util",
    "global_compute_util",
    "time_of_day_cos",
];

/// Per-slice feature indices within a slice block.
pub mod idx {
    pub const QUEUE_OCCUPANCY: usize = 0;
    pub const OFFERED_LOAD: usize = 1;
    pub const MEAN_SNR: usize = 2;
    pub const POWER_HEADROOM: usize = 3;
    pub const PRB_HEADROOM: usize = 4;
    pub const COMPUTE_HEADROOM: usize = 5;
    pub const PREDICTED_DEMAND: usize = 6;
    pub const LATENCY_RATIO: usize = 7;
    pub const THROUGHPUT_RATIO: usize = 8;
    pub const RELIABILITY_MARGIN: usize = 9;
    pub const SPIKE_FLAG: usize = 10;
    pub const TIME_OF_DAY_SIN: usize = 11;
}

/// Flat index of a per-slice feature.
pub fn slice_feature(slice: usize, feature: usize) -> usize {
    debug_assert!(slice < NUM_SLICES && feature < SLICE_FEATURES);
    slice * SLICE_FEATURES + feature
}

/// Flat index where the context block starts.
pub const CONTEXT_BASE: usize = NUM_SLICES * SLICE_FEATURES;

/// Human-readable name of a flat observation index.
pub fn feature_name(i: usize) -> String {
    if i < CONTEXT_BASE {
        let slice = SliceId::from_index(i / SLICE_FEATURES);
        format!("{}.{}", slice.name(), SLICE_FEATURE_NAMES[i % SLICE_FEATURES])
    } else {
        CONTEXT_FEATURE_NAMES[i - CONTEXT_BASE].to_string()
    }
}

/// Which slice a flat feature index describes, if any.
pub fn feature_slice(i: usize) -> Option<SliceId> {
    (i < CONTEXT_BASE).then(|| SliceId::from_index(i / SLICE_FEATURES))
}

/// Welford running statistics per feature. Frozen copies ship inside
/// checkpoints so evaluation uses exactly the training-time scaling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    count: u64,
    mean: Vec<F>,
    m2: Vec<F>,
    pub frozen: bool,
}

impl Default for Standardizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Standardizer {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: vec![0.0; OBS_DIM],
            m2: vec![0.0; OBS_DIM],
            frozen: false,
        }
    }

    pub fn update(&mut self, obs: &[F; OBS_DIM]) {
        if self.frozen {
            return;
        }
        self.count += 1;
        let n = self.count as F;
        for i in 0..OBS_DIM {
            let delta = obs[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (obs[i] - self.mean[i]);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn std(&self, i: usize) -> F {
        if self.count < 2 {
            return 1.0;
        }
        (self.m2[i] / self.count as F).sqrt().max(1e-6)
    }

    /// Standardizes one observation, clamped to +/-5 sigma.
    pub fn z(&self, obs: &[F; OBS_DIM]) -> [F; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        if self.count < 10 {
            out.copy_from_slice(obs);
            return out;
        }
        for i in 0..OBS_DIM {
            out[i] = ((obs[i] - self.mean[i]) / self.std(i)).clamp(-5.0, 5.0);
        }
        out
    }

    /// Maps a standardized vector back to raw feature space (inverse of
    /// [`Standardizer::z`] away from the clamp).
    pub fn unz(&self, z: &[F]) -> [F; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        if self.count < 10 {
            out.copy_from_slice(&z[..OBS_DIM]);
            return out;
        }
        for i in 0..OBS_DIM {
            out[i] = z[i] * self.std(i) + self.mean[i];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_cover_all_indices() {
        assert_eq!(feature_name(0), "URLLC.queue_occupancy");
        assert_eq!(feature_name(slice_feature(1, idx::LATENCY_RATIO)), "eMBB.latency_ratio");
        assert_eq!(feature_name(CONTEXT_BASE + 3), "time_of_day_cos");
        for i in 0..OBS_DIM {
            assert!(!feature_name(i).is_empty());
        }
    }

    #[test]
    fn standardizer_round_trips() {
        let mut s = Standardizer::new();
        let mut obs = [0.0; OBS_DIM];
        for k in 0..100 {
            for (i, o) in obs.iter_mut().enumerate() {
                *o = (k as F * 0.37 + i as F).sin() * (i as F + 1.0);
            }
            s.update(&obs);
        }
        let z = s.z(&obs);
        assert!(z.iter().all(|v| v.abs() <= 5.0));
        let back = s.unz(&z);
        for i in 0..OBS_DIM {
            if z[i].abs() < 5.0 {
                assert!((back[i] - obs[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frozen_standardizer_stops_updating() {
        let mut s = Standardizer::new();
        let obs = [1.0; OBS_DIM];
        s.update(&obs);
        s.frozen = true;
        s.update(&obs);
        assert_eq!(s.count(), 1);
    }
}
