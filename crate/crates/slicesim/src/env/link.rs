//! PRB-level link abstraction: the mapping from allocated PRBs, transmit
//! power, and channel gain to achievable throughput, latency, and reliability.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::num::Real;

/// Spectral rate in PRB units: `b * log2(1 + p*g / (N0*b))`.
///
/// Zero PRBs or zero power yield zero rate (the latency relation turns that
/// into the +inf sentinel).
pub fn prb_rate<T: Real>(prb: T, power: T, gain: T, noise_per_prb: T) -> T {
    if prb <= T::zero() || power <= T::zero() {
        return T::zero();
    }
    let snr = power * gain / (noise_per_prb * prb);
    prb * (T::one() + snr).log2()
}

/// Achieved throughput in bit/s given the per-PRB bandwidth in Hz.
pub fn achieved_throughput_bps<T: Real>(
    prb: T,
    power: T,
    gain: T,
    noise_per_prb: T,
    prb_bandwidth_hz: T,
) -> T {
    prb_rate(prb, power, gain, noise_per_prb) * prb_bandwidth_hz
}

/// Transmission plus processing delay in milliseconds.
///
/// `packet_bits / throughput + 1 / (mu * compute)`, with a +inf sentinel when
/// either throughput or compute is zero. Doubling both throughput and the
/// compute-service product halves the result.
pub fn achieved_latency_ms<T: Real>(
    packet_bits: T,
    throughput_bps: T,
    compute: T,
    service_rate: T,
) -> T {
    if throughput_bps <= T::zero() || compute <= T::zero() || service_rate <= T::zero() {
        return T::infinity();
    }
    let seconds = packet_bits / throughput_bps + T::one() / (service_rate * compute);
    seconds * T::from_f64(1e3).unwrap()
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Packet-level reliability `(1 - Q(sqrt(2*SNR)))^L`, evaluated in log space
/// so large packets do not underflow.
pub fn achieved_reliability(snr: f64, packet_bits: f64) -> f64 {
    debug_assert!(snr >= 0.0 && packet_bits >= 1.0);
    let ber = q_function((2.0 * snr).sqrt());
    if ber >= 1.0 {
        return 0.0;
    }
    (packet_bits * (-ber).ln_1p()).exp()
}

/// Poisson arrival draw for one tick. A zero (or negative) rate always
/// yields zero; otherwise the draw is exact and deterministic given the RNG
/// state.
pub fn sample_arrivals<R: Rng>(rate_per_tick: f64, rng: &mut R) -> u64 {
    if rate_per_tick <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(rate_per_tick).expect("positive rate");
    poisson.sample(rng) as u64
}
