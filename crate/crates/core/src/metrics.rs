//! Performance accounting: operation throughput, energy efficiency, the
//! transition-count activity proxy, and effective inference frequency.
//!
//! Power is never simulated. Reports either take a user-supplied average
//! power (for formula cross-checks) or express relative switching activity
//! as raw transition counts, which are explicitly non-physical.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::kernel::{KernelCore, SimTime};

/// Operations per second for an inference rate: `2 * F * C * K * f_infer`
/// (every inference touches 2F literals across C clauses for K classes).
pub fn throughput_ops(f: u64, c: u64, k: u64, f_infer_hz: f64) -> f64 {
    2.0 * f as f64 * c as f64 * k as f64 * f_infer_hz
}

/// Energy efficiency in TOp/J from throughput in GOp/s and average power in
/// watts: `gops / (1000 * p)`.
pub fn energy_efficiency_topj(throughput_gops: f64, p_watts: f64) -> Result<f64, Error> {
    if p_watts <= 0.0 || !p_watts.is_finite() {
        return Err(Error::Config(format!(
            "power must be positive, got {p_watts}"
        )));
    }
    Ok(throughput_gops / (1000.0 * p_watts))
}

/// Effective inference frequency in Hz: completed inferences over the span
/// from first token injection to last completion (picoseconds).
pub fn infer_frequency(
    inferences: u64,
    first_injection: SimTime,
    last_completion: SimTime,
) -> Result<f64, Error> {
    if inferences == 0 {
        return Err(Error::Config("no completed inference".into()));
    }
    if last_completion <= first_injection {
        return Err(Error::Config("zero-duration run".into()));
    }
    let span_ps = last_completion - first_injection;
    Ok(inferences as f64 * 1e12 / span_ps as f64)
}

/// Sum transition counts per registered scope. Deterministic: scopes are
/// ordered by name.
pub fn collect_transitions(core: &KernelCore) -> BTreeMap<String, u64> {
    core.scopes()
        .into_iter()
        .map(|s| {
            let n = core.scope_transitions(&s);
            (s, n)
        })
        .collect()
}

/// Aggregated run metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub num_features: u64,
    pub num_clauses: u64,
    pub num_classes: u64,
    pub inferences: u64,
    pub f_infer_hz: f64,
    pub throughput_ops: f64,
    /// User-supplied average power, when given.
    pub power_watts: Option<f64>,
    pub energy_eff_topj: Option<f64>,
    pub transition_counts: BTreeMap<String, u64>,
    pub agreement_rate: f64,
    pub meta_events: u64,
}

impl MetricsReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dims: (u64, u64, u64),
        inferences: u64,
        first_injection: SimTime,
        last_completion: SimTime,
        transition_counts: BTreeMap<String, u64>,
        agreement_rate: f64,
        meta_events: u64,
        power_watts: Option<f64>,
    ) -> Result<Self, Error> {
        let (f, c, k) = dims;
        let f_infer_hz = infer_frequency(inferences, first_injection, last_completion)?;
        let throughput = throughput_ops(f, c, k, f_infer_hz);
        let energy_eff = match power_watts {
            Some(p) => Some(energy_efficiency_topj(throughput / 1e9, p)?),
            None => None,
        };
        Ok(MetricsReport {
            num_features: f,
            num_clauses: c,
            num_classes: k,
            inferences,
            f_infer_hz,
            throughput_ops: throughput,
            power_watts,
            energy_eff_topj: energy_eff,
            transition_counts,
            agreement_rate,
            meta_events,
        })
    }

    /// Total transitions across every scope.
    pub fn total_transitions(&self) -> u64 {
        self.transition_counts.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throughput_formula() {
        assert_eq!(throughput_ops(16, 12, 3, 1e6), 1.152e9);
        assert_eq!(throughput_ops(1, 1, 1, 1.0), 2.0);
        // Back-solve: 380 GOp/s at these dimensions needs ~329.86 MHz.
        let f_infer: f64 = 380e9 / (2.0 * 16.0 * 12.0 * 3.0);
        assert!((f_infer - 329.861e6).abs() / 329.861e6 < 1e-4);
        assert!((throughput_ops(16, 12, 3, f_infer) - 380e9).abs() < 1.0);
    }

    #[test]
    fn energy_efficiency_formula() {
        // 402 GOp/s at ~122.2 uW lands near 3290 TOp/J.
        let ee = energy_efficiency_topj(402.0, 1.222e-4).unwrap();
        assert!((ee - 3290.0).abs() / 3290.0 < 0.005, "{ee}");
        assert_eq!(energy_efficiency_topj(1000.0, 1.0).unwrap(), 1.0);
        // Back-solve: 230 GOp/s at 304.65 TOp/J implies ~0.755 mW.
        let p: f64 = 230.0 / (1000.0 * 304.65);
        assert!((p - 7.55e-4).abs() / 7.55e-4 < 0.001);
        let ee = energy_efficiency_topj(230.0, p).unwrap();
        assert!((ee - 304.65).abs() < 1e-9);
        assert!(energy_efficiency_topj(1.0, 0.0).is_err());
    }

    #[test]
    fn frequency_from_span() {
        assert_eq!(infer_frequency(4, SimTime(0), SimTime(4000)).unwrap(), 1e9);
        assert_eq!(
            infer_frequency(1, SimTime(500), SimTime(1500)).unwrap(),
            1e9
        );
        assert!(infer_frequency(0, SimTime(0), SimTime(10)).is_err());
        assert!(infer_frequency(1, SimTime(10), SimTime(10)).is_err());
    }

    #[test]
    fn identity_roundtrip() {
        let gops = 419.0;
        let p = 5.58e-4;
        let ee = energy_efficiency_topj(gops, p).unwrap();
        let back = ee * 1000.0 * p;
        assert!((back - gops).abs() <= gops * f64::EPSILON * 4.0);
    }

    #[test]
    fn idle_kernel_has_zero_counts() {
        let mut kernel = crate::kernel::Kernel::new();
        kernel.add_signal("a", "x");
        kernel.add_signal("b", "y");
        let counts = collect_transitions(kernel.core());
        assert_eq!(counts.values().sum::<u64>(), 0);
        assert_eq!(counts.len(), 2);
    }
}
