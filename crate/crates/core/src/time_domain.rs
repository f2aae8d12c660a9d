//! Time-domain classification delay paths.
//!
//! Multiclass models use Hamming-distance delay encoding: each class races
//! with a delay proportional to its distance from the all-votes-agree case,
//! so the earliest arrival is the largest vote sum.
//!
//! Coalesced models use the hybrid path: the signed class sum is split into
//! magnitude rails S (negative contributions) and M (positive contributions),
//! each rail is compressed by a leading-ones detector into a coarse/fine pair
//! driving a differential delay line, a Vernier TDC digitises the rail
//! interval into a delay code, and a digitally-controlled delay element turns
//! the code into the final single-rail race delay. The logarithmic
//! compression is lossy; agreement with the digital oracle is measured, never
//! assumed.

use crate::error::Error;
use crate::inference::ClauseVector;
use crate::kernel::SimTime;
use crate::model::{TmModel, Variant};

/// Coarse/fine pair produced by leading-ones extraction: `k` is the leading
/// one position, `f` the residual normalised to `e` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseFine {
    pub k: u32,
    pub f: u64,
}

/// Magnitude split of one class's firing contributions: `m` sums the
/// positive weights, `s` the absolute negative weights; `m - s` is the exact
/// signed class sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedSplit {
    pub s: u64,
    pub m: u64,
}

/// How the TDC code is decoded onto the delay element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcDecode {
    /// Use the code as-is.
    Linear,
    /// Re-expand the code through the coarse/fine inverse; magnitude-monotone
    /// like the linear option but with logarithmic quantisation.
    Lod,
}

/// Architectural fidelity of the coalesced race path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CotmMode {
    /// Final delay is computed directly from the exact class sum.
    Ideal,
    /// Full LOD -> differential rails -> TDC -> DCDE path.
    Architectural,
}

/// Timing parameters of the time-domain datapath. All delays integer ps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeDomainConfig {
    /// Coarse unit delay.
    pub tau: u64,
    /// Fine resolution bits; fine unit delay is `tau / 2^e`.
    pub e: u32,
    /// Vernier TDC step.
    pub tdc_resolution: u64,
    /// Delay-element step per code unit.
    pub dcde_step: u64,
    /// Delay-element zero-code delay; 0 selects auto-sizing from the model.
    pub dcde_base: u64,
    /// Per-unit delay of the Hamming-distance race.
    pub tau_hamming: u64,
    /// Launch offset of the M rail relative to the S rail.
    pub launch_skew: i64,
    pub decode: DcDecode,
}

impl Default for TimeDomainConfig {
    fn default() -> Self {
        TimeDomainConfig {
            tau: 160,
            e: 4,
            tdc_resolution: 10,
            dcde_step: 10,
            dcde_base: 0,
            tau_hamming: 40,
            launch_skew: 0,
            decode: DcDecode::Linear,
        }
    }
}

impl TimeDomainConfig {
    /// Check the structural invariants (positivity, `tau` divisible by
    /// `2^e` so the fine unit is an integer ps).
    pub fn validate(&self) -> Result<(), Error> {
        if self.tau == 0 {
            return Err(Error::Config("time_domain.tau must be positive".into()));
        }
        if self.e >= 32 {
            return Err(Error::Config("time_domain.e must be below 32".into()));
        }
        if !self.tau.is_multiple_of(1u64 << self.e) {
            return Err(Error::Config(format!(
                "time_domain.tau = {} is not divisible by 2^e = {}",
                self.tau,
                1u64 << self.e
            )));
        }
        if self.tdc_resolution == 0 {
            return Err(Error::Config(
                "time_domain.tdc_resolution must be positive".into(),
            ));
        }
        if self.dcde_step == 0 {
            return Err(Error::Config(
                "time_domain.dcde_step must be positive".into(),
            ));
        }
        if self.tau_hamming == 0 {
            return Err(Error::Config(
                "time_domain.tau_hamming must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Fine unit delay `tau / 2^e`.
    pub fn fine_unit(&self) -> u64 {
        self.tau >> self.e
    }

    /// Largest delay code magnitude any class can produce under `mode` for a
    /// model whose class-sum magnitude is bounded by `max_abs_sum`.
    pub fn max_abs_code(&self, max_abs_sum: u64, mode: CotmMode) -> u64 {
        match mode {
            CotmMode::Ideal => max_abs_sum,
            CotmMode::Architectural => {
                let width = bit_width(max_abs_sum);
                let longest = coarse_fine_delay(lod_extract(max_abs_sum, self.e, width), self);
                let skewed = longest as i128 + self.launch_skew.unsigned_abs() as i128;
                (skewed as u64) / self.tdc_resolution
            }
        }
    }

    /// Resolve `dcde_base`: the configured value, or when 0 the smallest
    /// multiple of `dcde_step` keeping every final delay strictly positive.
    pub fn resolved_base(&self, max_abs_sum: u64, mode: CotmMode) -> Result<u64, Error> {
        let bound = self.max_abs_code(max_abs_sum, mode);
        if self.dcde_base == 0 {
            return Ok((bound + 1) * self.dcde_step);
        }
        if self.dcde_base <= bound * self.dcde_step {
            return Err(Error::Config(format!(
                "time_domain.dcde_base = {} cannot keep delays positive (needs > {})",
                self.dcde_base,
                bound * self.dcde_step
            )));
        }
        Ok(self.dcde_base)
    }
}

/// Bits needed to represent `v` (at least 1).
pub fn bit_width(v: u64) -> u32 {
    (64 - v.leading_zeros()).max(1)
}

/// Leading-ones coarse/fine extraction.
///
/// `k` is the position of the leading one; the residual bits below `k` are
/// normalised to `e` bits (right shift when `k >= e`, left shift otherwise).
/// A zero input yields `(0, 0)`.
pub fn lod_extract(sum_value: u64, e: u32, width: u32) -> CoarseFine {
    assert!(
        width == 64 || sum_value < (1u64 << width),
        "value exceeds bit width"
    );
    if sum_value == 0 {
        return CoarseFine { k: 0, f: 0 };
    }
    let k = 63 - sum_value.leading_zeros();
    let mask = (1u64 << k) - 1;
    let mut f = sum_value & mask;
    if k >= e {
        f >>= k - e;
    } else {
        f <<= e - k;
    }
    CoarseFine { k, f }
}

/// Delay realised by a coarse/fine pair: `k*tau + f*tau/2^e`.
pub fn coarse_fine_delay(cf: CoarseFine, cfg: &TimeDomainConfig) -> u64 {
    cf.k as u64 * cfg.tau + cf.f * cfg.fine_unit()
}

/// Inverse of [`lod_extract`]: `(2^e + f) * 2^(k-e)` (right shift when the
/// exponent is negative). Within a factor `(1 - 2^-e)` of the source value
/// for any nonzero input, which keeps code decoding monotone.
pub fn lod_reconstruct(cf: CoarseFine, e: u32) -> u64 {
    let base = (1u64 << e) + cf.f;
    if cf.k >= e {
        base << (cf.k - e)
    } else {
        base >> (e - cf.k)
    }
}

/// Split one weight row against the shared clause vector into the (S, M)
/// magnitude pair; `m - s` equals the exact signed class sum.
pub fn split_signed(weight_row: &[i64], clause_vector: &ClauseVector) -> SignedSplit {
    let mut split = SignedSplit { s: 0, m: 0 };
    for (&w, &fired) in weight_row.iter().zip(clause_vector.0.iter()) {
        if !fired {
            continue;
        }
        if w > 0 {
            split.m += w as u64;
        } else {
            split.s += w.unsigned_abs();
        }
    }
    split
}

/// Vernier TDC: quantise the interval between the S-rail (fast chain) and
/// M-rail (slow chain) arrivals to a signed code,
/// `sign(delta) * floor(|delta| / resolution)`.
pub fn vernier_tdc(t_fast: SimTime, t_slow: SimTime, resolution: u64) -> i64 {
    assert!(resolution > 0);
    let delta = t_slow.ps() as i128 - t_fast.ps() as i128;
    let mag = (delta.unsigned_abs() as u64 / resolution) as i64;
    if delta < 0 {
        -mag
    } else {
        mag
    }
}

/// Delay-element output for a decoded code: `base - dc * step`, strictly
/// decreasing in the code. Positivity is guaranteed by config validation.
pub fn dcde_delay(dc: i64, base: u64, step: u64) -> u64 {
    let d = base as i128 - dc as i128 * step as i128;
    assert!(
        d > 0,
        "DCDE delay not positive: base {base}, dc {dc}, step {step}"
    );
    d as u64
}

fn decode_dc(dc: i64, cfg: &TimeDomainConfig) -> i64 {
    match cfg.decode {
        DcDecode::Linear => dc,
        DcDecode::Lod => {
            let mag = dc.unsigned_abs();
            let decoded = if mag == 0 {
                0
            } else {
                lod_reconstruct(lod_extract(mag, cfg.e, bit_width(mag)), cfg.e) as i64
            };
            if dc < 0 {
                -decoded
            } else {
                decoded
            }
        }
    }
}

/// Per-class race delays for the Hamming-distance multiclass scheme.
///
/// `score_i` counts firing positive clauses plus silent negative clauses;
/// the race delay is `(C - score_i) * tau_hamming`, so the minimum delay
/// belongs to the maximum vote sum (`score = sum + C/2`).
pub fn hamming_race_delays(
    model: &TmModel,
    per_class: &[ClauseVector],
    cfg: &TimeDomainConfig,
) -> Result<Vec<u64>, Error> {
    if model.variant() != Variant::Multiclass {
        return Err(Error::VariantMismatch(
            "hamming_race_delays requires a multiclass model".into(),
        ));
    }
    let c = model.num_clauses();
    per_class
        .iter()
        .map(|cv| {
            if cv.0.len() != c {
                return Err(Error::Dimension(format!(
                    "clause vector length {} for {} clauses",
                    cv.0.len(),
                    c
                )));
            }
            let score: u64 =
                cv.0.iter()
                    .enumerate()
                    .map(|(j, &fired)| {
                        let positive = model.polarity(j) == 1;
                        u64::from(fired == positive)
                    })
                    .sum();
            Ok((c as u64 - score) * cfg.tau_hamming)
        })
        .collect()
}

/// Full per-class diagnostics of the coalesced race path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CotmClassPath {
    pub class_sum: i64,
    pub split: SignedSplit,
    pub cf_s: CoarseFine,
    pub cf_m: CoarseFine,
    /// Rail delays from the differential delay line.
    pub rail_delay_s: u64,
    pub rail_delay_m: u64,
    /// Raw TDC code and its decoded form.
    pub dc: i64,
    pub dc_decoded: i64,
    /// Single-rail race delay presented to the arbiter.
    pub final_delay: u64,
}

/// Compute the per-class single-rail race delays for a coalesced model.
///
/// Architectural mode walks the full split -> LOD -> differential rails ->
/// TDC -> DCDE path; ideal mode maps the exact class sum straight onto the
/// delay element. Both are monotone decreasing in their (possibly
/// compressed) sum measure, which is what the arbiter needs.
pub fn cotm_race_delays(
    model: &TmModel,
    shared: &ClauseVector,
    cfg: &TimeDomainConfig,
    mode: CotmMode,
) -> Result<Vec<CotmClassPath>, Error> {
    if model.variant() != Variant::Coalesced {
        return Err(Error::VariantMismatch(
            "cotm_race_delays requires a coalesced model".into(),
        ));
    }
    cfg.validate()?;
    let base = cfg.resolved_base(model.max_abs_sum(), mode)?;
    let width = bit_width(model.max_abs_sum());
    (0..model.num_classes())
        .map(|i| {
            let row = model.weight_row(i);
            let split = split_signed(row, shared);
            let class_sum = split.m as i64 - split.s as i64;
            let cf_s = lod_extract(split.s, cfg.e, width);
            let cf_m = lod_extract(split.m, cfg.e, width);
            let rail_delay_s = coarse_fine_delay(cf_s, cfg);
            let rail_delay_m = coarse_fine_delay(cf_m, cfg);
            let (dc, dc_decoded, final_delay) = match mode {
                CotmMode::Ideal => (
                    class_sum,
                    class_sum,
                    dcde_delay(class_sum, base, cfg.dcde_step),
                ),
                CotmMode::Architectural => {
                    // Both rails launch on the same event; skew shifts M.
                    let t_s = SimTime(rail_delay_s);
                    let t_m_ps = (rail_delay_m as i128 + cfg.launch_skew as i128).max(0) as u64;
                    let dc = vernier_tdc(t_s, SimTime(t_m_ps), cfg.tdc_resolution);
                    let decoded = decode_dc(dc, cfg);
                    (dc, decoded, dcde_delay(decoded, base, cfg.dcde_step))
                }
            };
            Ok(CotmClassPath {
                class_sum,
                split,
                cf_s,
                cf_m,
                rail_delay_s,
                rail_delay_m,
                dc,
                dc_decoded,
                final_delay,
            })
        })
        .collect()
}
