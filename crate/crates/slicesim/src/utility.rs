//! Slice utility mathematics.
//!
//! A slice's utility is a convex combination of three components:
//! multiplicative QoS satisfaction (any violated dimension drives it toward
//! zero), multi-resource efficiency (`1 - mean utilization`), and intra-slice
//! fairness (`mean(1 - Gini)` over power/PRB/compute). The total utility is
//! the slice-weighted sum. All functions here are pure and scalar-generic.

use serde::{Deserialize, Serialize};

use crate::num::Real;
use crate::{F, NUM_SLICES};

/// Per-slice QoS targets. `power_mw` is a per-UE transmit-power budget and is
/// absent for URLLC/eMBB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosTargets {
    pub latency_ms: F,
    pub reliability: F,
    pub throughput_mbps: F,
    #[serde(default)]
    pub power_mw: Option<F>,
}

impl QosTargets {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.latency_ms > 0.0) {
            return Err(format!("latency target must be > 0, got {}", self.latency_ms));
        }
        if !(self.reliability > 0.0 && self.reliability <= 1.0) {
            return Err(format!(
                "reliability target must be in (0, 1], got {}",
                self.reliability
            ));
        }
        if !(self.throughput_mbps > 0.0) {
            return Err(format!(
                "throughput target must be > 0, got {}",
                self.throughput_mbps
            ));
        }
        if let Some(p) = self.power_mw {
            if !(p > 0.0) {
                return Err(format!("power target must be > 0 when present, got {p}"));
            }
        }
        Ok(())
    }
}

/// Measured per-slice QoS for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosAchieved {
    pub latency_ms: F,
    pub reliability: F,
    pub throughput_mbps: F,
    /// Mean per-UE power draw (transmit + circuit), in mW.
    pub power_per_ue_mw: F,
}

/// Violation penalty rates, one per QoS dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRates {
    /// Per millisecond of latency excess.
    pub lambda_latency: F,
    /// Per unit of reliability shortfall.
    pub lambda_reliability: F,
    /// Per unit of normalized throughput shortfall.
    pub lambda_throughput: F,
    /// Per milliwatt of power excess.
    pub lambda_power: F,
}

impl Default for PenaltyRates {
    fn default() -> Self {
        Self {
            lambda_latency: 2.0,
            lambda_reliability: 100.0,
            lambda_throughput: 5.0,
            lambda_power: 1.0,
        }
    }
}

/// Weighting scheme for the utility aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityWeights {
    /// Slice weights `w_n`; must sum to 1.
    pub slice_weights: [F; NUM_SLICES],
    /// Per-slice (alpha, beta, gamma) over (QoS, efficiency, fairness); each
    /// triple must sum to 1.
    pub mix: [[F; 3]; NUM_SLICES],
    pub penalties: PenaltyRates,
    /// Weight of the explainability utility in the reward.
    pub w_xrl: F,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            slice_weights: [0.5, 0.3, 0.2],
            mix: [[0.6, 0.2, 0.2]; NUM_SLICES],
            penalties: PenaltyRates::default(),
            w_xrl: 0.1,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<(), String> {
        let sw: F = self.slice_weights.iter().sum();
        if (sw - 1.0).abs() > 1e-9 {
            return Err(format!("slice weights must sum to 1, got {sw}"));
        }
        for (n, m) in self.mix.iter().enumerate() {
            let s: F = m.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(format!("mix weights for slice {n} must sum to 1, got {s}"));
            }
            if m.iter().any(|&x| x < 0.0) {
                return Err(format!("mix weights for slice {n} must be nonnegative"));
            }
        }
        let p = &self.penalties;
        for (name, v) in [
            ("lambda_latency", p.lambda_latency),
            ("lambda_reliability", p.lambda_reliability),
            ("lambda_throughput", p.lambda_throughput),
            ("lambda_power", p.lambda_power),
        ] {
            if v < 0.0 {
                return Err(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.w_xrl < 0.0 {
            return Err(format!("w_xrl must be >= 0, got {}", self.w_xrl));
        }
        Ok(())
    }
}

/// Violations `(v_L, v_R, v_T, v_P)` of one slice against its targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// Latency excess in ms.
    pub latency_ms: F,
    /// Reliability shortfall.
    pub reliability: F,
    /// Throughput shortfall normalized by the target (capped at 1).
    pub throughput: F,
    /// Per-UE power excess in mW (0 when no power target).
    pub power_mw: F,
}

/// Positive-part violation terms for one slice.
pub fn violation_terms(achieved: &QosAchieved, targets: &QosTargets) -> Violations {
    let v_l = (achieved.latency_ms - targets.latency_ms).max(0.0);
    let v_r = (targets.reliability - achieved.reliability).max(0.0);
    let v_t = ((targets.throughput_mbps - achieved.throughput_mbps).max(0.0)
        / targets.throughput_mbps)
        .min(1.0);
    let v_p = match targets.power_mw {
        Some(p_tar) => (achieved.power_per_ue_mw - p_tar).max(0.0),
        None => 0.0,
    };
    Violations {
        latency_ms: v_l,
        reliability: v_r,
        throughput: v_t,
        power_mw: v_p,
    }
}

/// Per-dimension satisfaction `min{1, exp(-lambda * v)}`.
pub fn satisfaction<T: Real>(violation: T, lambda: T) -> T {
    ((-lambda * violation).exp()).min(T::one())
}

/// Multiplicative QoS satisfaction `u_L * u_R * u_T * u_P`.
pub fn qos_utility(v: &Violations, rates: &PenaltyRates) -> QosSatisfaction {
    let u_l = satisfaction(v.latency_ms, rates.lambda_latency);
    let u_r = satisfaction(v.reliability, rates.lambda_reliability);
    let u_t = satisfaction(v.throughput, rates.lambda_throughput);
    let u_p = satisfaction(v.power_mw, rates.lambda_power);
    QosSatisfaction {
        u_latency: u_l,
        u_reliability: u_r,
        u_throughput: u_t,
        u_power: u_p,
        product: u_l * u_r * u_t * u_p,
    }
}

/// The four satisfaction terms and their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosSatisfaction {
    pub u_latency: F,
    pub u_reliability: F,
    pub u_throughput: F,
    pub u_power: F,
    pub product: F,
}

/// Resource efficiency `1 - mean(utilization)` over power, PRB, and compute.
///
/// A zero budget component counts as fully utilized (ratio 1).
pub fn efficiency_utility<T: Real>(used: [T; 3], allocated: [T; 3]) -> T {
    let mut sum = T::zero();
    for (u, a) in used.iter().zip(allocated.iter()) {
        let ratio = if *a <= T::zero() {
            T::one()
        } else {
            (*u / *a).max(T::zero()).min(T::one())
        };
        sum = sum + ratio;
    }
    T::one() - sum / T::from_usize(3).unwrap()
}

/// Gini coefficient of a nonnegative vector.
///
/// Uses the sorted identity `G = sum_i (2i - n - 1) x_(i) / (n^2 mean)`,
/// algebraically equal to the pairwise-difference definition. An all-zero
/// vector is defined as perfectly equal (0). Errors on an empty vector.
pub fn gini<T: Real>(values: &[T]) -> Result<T, GiniError> {
    if values.is_empty() {
        return Err(GiniError::Empty);
    }
    if values.iter().any(|v| *v < T::zero()) {
        return Err(GiniError::Negative);
    }
    let n = values.len();
    if n == 1 {
        return Ok(T::zero());
    }
    let total = values.iter().fold(T::zero(), |s, &v| s + v);
    if total == T::zero() {
        return Ok(T::zero());
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = T::from_usize(n).unwrap();
    let mut weighted = T::zero();
    for (i, &x) in sorted.iter().enumerate() {
        let rank = T::from_usize(2 * (i + 1)).unwrap() - nf - T::one();
        weighted = weighted + rank * x;
    }
    Ok(weighted / (nf * total))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GiniError {
    #[error("gini of an empty vector is undefined")]
    Empty,
    #[error("gini requires nonnegative entries")]
    Negative,
}

/// Intra-slice fairness: mean of `(1 - Gini)` over the three resource vectors.
///
/// Single-UE slices are perfectly fair by definition.
pub fn fairness_utility<T: Real>(power: &[T], prb: &[T], compute: &[T]) -> Result<T, GiniError> {
    let three = T::from_usize(3).unwrap();
    let g_p = gini(power)?;
    let g_b = gini(prb)?;
    let g_c = gini(compute)?;
    Ok(((T::one() - g_p) + (T::one() - g_b) + (T::one() - g_c)) / three)
}

/// Convex combination `alpha*U_qos + beta*U_eff + gamma*U_fair`.
pub fn slice_utility<T: Real>(u_qos: T, u_eff: T, u_fair: T, mix: [T; 3]) -> T {
    mix[0] * u_qos + mix[1] * u_eff + mix[2] * u_fair
}

/// Slice-weighted total utility `sum_n w_n U_n`.
pub fn total_utility<T: Real>(slice_utils: &[T], weights: &[T]) -> T {
    debug_assert_eq!(slice_utils.len(), weights.len());
    slice_utils
        .iter()
        .zip(weights)
        .fold(T::zero(), |s, (&u, &w)| s + u * w)
}

/// Full per-tick utility decomposition for one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceBreakdown {
    pub violations: Violations,
    pub qos: QosSatisfaction,
    pub u_eff: F,
    pub u_fair: F,
    pub u_slice: F,
}

/// Per-tick utility decomposition across slices plus the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub slices: [SliceBreakdown; NUM_SLICES],
    pub total: F,
}

/// Inputs the environment supplies per slice for the utility evaluation.
#[derive(Debug, Clone)]
pub struct SliceUsage {
    /// Resources actually consumed (power W, PRBs, compute).
    pub used: [F; 3],
    /// The slice's current allocation (its share of the global budgets).
    pub allocated: [F; 3],
    /// Per-UE allocation vectors for the fairness metric.
    pub per_ue_power: Vec<F>,
    pub per_ue_prb: Vec<F>,
    pub per_ue_compute: Vec<F>,
}

/// Evaluates the complete utility breakdown for one tick.
pub fn breakdown(
    achieved: &[QosAchieved; NUM_SLICES],
    targets: &[QosTargets; NUM_SLICES],
    usage: &[SliceUsage; NUM_SLICES],
    weights: &UtilityWeights,
) -> UtilityBreakdown {
    let mut slices = Vec::with_capacity(NUM_SLICES);
    for n in 0..NUM_SLICES {
        let v = violation_terms(&achieved[n], &targets[n]);
        let qos = qos_utility(&v, &weights.penalties);
        let u_eff = efficiency_utility(usage[n].used, usage[n].allocated);
        let u_fair = fairness_utility(
            &usage[n].per_ue_power,
            &usage[n].per_ue_prb,
            &usage[n].per_ue_compute,
        )
        .unwrap_or(1.0);
        let u_slice = slice_utility(qos.product, u_eff, u_fair, weights.mix[n]);
        slices.push(SliceBreakdown {
            violations: v,
            qos,
            u_eff,
            u_fair,
            u_slice,
        });
    }
    let slices: [SliceBreakdown; NUM_SLICES] = slices.try_into().unwrap();
    let utils: Vec<F> = slices.iter().map(|s| s.u_slice).collect();
    let total = total_utility(&utils, &weights.slice_weights);
    UtilityBreakdown { slices, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// O(n^2) pairwise-difference Gini, the definitional form.
    fn gini_pairwise(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for &a in x {
            for &b in x {
                acc += (a - b).abs();
            }
        }
        acc / (2.0 * n * n * mean)
    }

    fn urllc_targets() -> QosTargets {
        QosTargets {
            latency_ms: 1.0,
            reliability: 0.99999,
            throughput_mbps: 50.0,
            power_mw: None,
        }
    }

    #[test]
    fn violation_latency_excess() {
        // Pre-resolution URLLC latency 1.15 ms vs the 1 ms target.
        let achieved = QosAchieved {
            latency_ms: 1.15,
            reliability: 0.999999,
            throughput_mbps: 55.0,
            power_per_ue_mw: 0.0,
        };
        let v = violation_terms(&achieved, &urllc_targets());
        assert_relative_eq!(v.latency_ms, 0.15, epsilon = 1e-12);
        assert_eq!(v.reliability, 0.0);
        assert_eq!(v.throughput, 0.0);
        assert_eq!(v.power_mw, 0.0);
    }

    #[test]
    fn violation_all_met_is_zero() {
        let achieved = QosAchieved {
            latency_ms: 0.5,
            reliability: 1.0,
            throughput_mbps: 60.0,
            power_per_ue_mw: 0.5,
        };
        let v = violation_terms(&achieved, &urllc_targets());
        assert_eq!(
            v,
            Violations {
                latency_ms: 0.0,
                reliability: 0.0,
                throughput: 0.0,
                power_mw: 0.0
            }
        );
    }

    #[test]
    fn violation_throughput_capped_at_one() {
        let achieved = QosAchieved {
            latency_ms: 0.5,
            reliability: 1.0,
            throughput_mbps: 0.0,
            power_per_ue_mw: 0.0,
        };
        let v = violation_terms(&achieved, &urllc_targets());
        assert_eq!(v.throughput, 1.0);
    }

    #[test]
    fn qos_utility_matches_scalar_oracle() {
        let v = Violations {
            latency_ms: 0.15,
            reliability: 0.0,
            throughput: 0.0,
            power_mw: 0.0,
        };
        let q = qos_utility(&v, &PenaltyRates::default());
        // lambda_L = 2/ms: u_L = exp(-0.3)
        assert_relative_eq!(q.u_latency, (-0.3f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(q.product, (-0.3f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn qos_utility_all_zero_is_one() {
        let v = Violations {
            latency_ms: 0.0,
            reliability: 0.0,
            throughput: 0.0,
            power_mw: 0.0,
        };
        assert_eq!(qos_utility(&v, &PenaltyRates::default()).product, 1.0);
    }

    #[test]
    fn qos_utility_vanishes_for_huge_violation() {
        let v = Violations {
            latency_ms: 1e6,
            reliability: 0.0,
            throughput: 0.0,
            power_mw: 0.0,
        };
        assert_eq!(qos_utility(&v, &PenaltyRates::default()).product, 0.0);
    }

    #[test]
    fn efficiency_endpoints_and_oracle() {
        assert_eq!(efficiency_utility([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), 1.0);
        assert_eq!(efficiency_utility([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]), 0.0);
        // utilizations (0.3, 0.6, 0.9) -> 1 - 0.6
        assert_relative_eq!(
            efficiency_utility([0.3, 0.6, 0.9], [1.0, 1.0, 1.0]),
            0.4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn efficiency_zero_budget_counts_as_used() {
        assert_relative_eq!(
            efficiency_utility([0.0, 0.0, 0.0], [0.0, 1.0, 1.0]),
            1.0 - 1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gini_equal_vector_is_zero() {
        assert_eq!(gini(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn gini_two_point_extreme() {
        // [1, 0]: pairwise sum = 2, so G = 2 / (2 * 4 * 0.5) = 0.5
        assert_relative_eq!(gini(&[1.0, 0.0]).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gini_matches_pairwise_oracle() {
        let x = [0.82, 0.13, 2.4, 0.0, 1.7, 0.55];
        assert_relative_eq!(gini(&x).unwrap(), gini_pairwise(&x), epsilon = 1e-12);
    }

    #[test]
    fn gini_edge_cases() {
        assert_eq!(gini::<f64>(&[]).unwrap_err(), GiniError::Empty);
        assert_eq!(gini(&[5.0]).unwrap(), 0.0);
        assert_eq!(gini(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini(&[1.0, -1.0]).unwrap_err(), GiniError::Negative);
    }

    #[test]
    fn fairness_composition() {
        // p=[1,0], b=[1,1], c=[1,1] -> (0.5 + 1 + 1)/3
        let f = fairness_utility(&[1.0, 0.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(f, 5.0 / 6.0, epsilon = 1e-12);
        assert_eq!(fairness_utility(&[2.0], &[1.0], &[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn slice_utility_oracle() {
        assert_relative_eq!(
            slice_utility(0.8, 0.5, 0.9, [0.6, 0.2, 0.2]),
            0.76,
            epsilon = 1e-12
        );
        assert_eq!(slice_utility(0.8, 0.5, 0.9, [1.0, 0.0, 0.0]), 0.8);
        assert_eq!(slice_utility(1.0, 1.0, 1.0, [0.3, 0.3, 0.4]), 1.0);
    }

    #[test]
    fn total_utility_is_weighted_sum() {
        assert_relative_eq!(
            total_utility(&[1.0, 0.5, 0.0], &[0.5, 0.3, 0.2]),
            0.65,
            epsilon = 1e-12
        );
    }

    #[test]
    fn default_weights_validate() {
        UtilityWeights::default().validate().unwrap();
    }

    proptest! {
        #[test]
        fn qos_utility_in_unit_interval(
            vl in 0.0f64..100.0, vr in 0.0f64..1.0, vt in 0.0f64..1.0, vp in 0.0f64..50.0
        ) {
            let v = Violations { latency_ms: vl, reliability: vr, throughput: vt, power_mw: vp };
            let q = qos_utility(&v, &PenaltyRates::default());
            prop_assert!(q.product >= 0.0 && q.product <= 1.0);
            // Strictness: product is 1 iff all violations are exactly zero.
            let all_zero = vl == 0.0 && vr == 0.0 && vt == 0.0 && vp == 0.0;
            prop_assert_eq!(q.product == 1.0, all_zero);
        }

        #[test]
        fn qos_utility_monotone_in_each_violation(
            vl in 0.0f64..10.0, step in 0.001f64..5.0
        ) {
            let base = Violations { latency_ms: vl, reliability: 0.0, throughput: 0.0, power_mw: 0.0 };
            let worse = Violations { latency_ms: vl + step, ..base };
            let rates = PenaltyRates::default();
            prop_assert!(qos_utility(&worse, &rates).product <= qos_utility(&base, &rates).product);
        }

        #[test]
        fn gini_scale_and_permutation_invariant(
            mut xs in proptest::collection::vec(0.0f64..100.0, 2..12),
            scale in 0.01f64..10.0
        ) {
            prop_assume!(xs.iter().sum::<f64>() > 0.0);
            let g = gini(&xs).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
            prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-9);
            xs.reverse();
            prop_assert!((gini(&xs).unwrap() - g).abs() < 1e-12);
            prop_assert!((0.0..1.0).contains(&g));
        }

        #[test]
        fn gini_matches_pairwise_on_random(xs in proptest::collection::vec(0.0f64..50.0, 2..10)) {
            prop_assume!(xs.iter().sum::<f64>() > 0.0);
            prop_assert!((gini(&xs).unwrap() - gini_pairwise(&xs)).abs() < 1e-12);
        }

        #[test]
        fn efficiency_strictly_decreasing(u in 0.0f64..0.9, bump in 0.01f64..0.1) {
            let base = efficiency_utility([u, 0.5, 0.5], [1.0, 1.0, 1.0]);
            let worse = efficiency_utility([u + bump, 0.5, 0.5], [1.0, 1.0, 1.0]);
            prop_assert!(worse < base);
        }

        #[test]
        fn slice_utility_in_range(
            q in 0.0f64..=1.0, e in 0.0f64..=1.0, f in 0.0f64..=1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0
        ) {
            prop_assume!(a + b <= 1.0);
            let mix = [a, b, 1.0 - a - b];
            let u = slice_utility(q, e, f, mix);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&u));
        }
    }
}
