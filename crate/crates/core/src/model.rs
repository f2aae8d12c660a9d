//! Trained machine description and dataset handling.
//!
//! A [`TmModel`] is immutable after load: dimensions, per-clause
//! include/exclude masks, and either per-class signed clause weights
//! (coalesced) or clause polarities (multiclass). Training is out of scope;
//! models are authored by hand or produced externally.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Per-clause selector over the 2F literals; `true` means the literal is
/// EXCLUDED from the clause (an excluded literal contributes 1 to the
/// conjunction).
pub type ExcludeMask = Vec<bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Multiclass,
    Coalesced,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Multiclass => "multiclass",
            Variant::Coalesced => "coalesced",
        }
    }
}

/// A booleanized input vector with an optional reference label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub features: Vec<bool>,
    pub label: Option<usize>,
}

impl Sample {
    pub fn new(features: Vec<bool>) -> Self {
        Sample {
            features,
            label: None,
        }
    }
}

/// Interleaved literal vector of length 2F: `literal[2i] = feature[i]`,
/// `literal[2i+1] = !feature[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralVector(pub Vec<bool>);

/// Immutable trained model shared read-only across simulation instances.
///
/// Multiclass: each of the K classes owns `num_clauses` clauses
/// (masks stored class-major, K*C entries) with a shared length-C polarity
/// assignment. Coalesced: one shared pool of C clauses plus a K x C signed
/// weight matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmModel {
    variant: Variant,
    num_features: usize,
    num_clauses: usize,
    num_classes: usize,
    exclude_masks: Vec<ExcludeMask>,
    weights: Vec<Vec<i64>>,
    polarities: Vec<i8>,
}

impl TmModel {
    /// Build a multiclass model from class-major masks (K*C entries).
    /// `polarities` defaults to the even-positive / odd-negative layout.
    pub fn multiclass(
        num_features: usize,
        num_clauses: usize,
        num_classes: usize,
        exclude_masks: Vec<ExcludeMask>,
        polarities: Option<Vec<i8>>,
    ) -> Result<Self, Error> {
        let polarities = polarities.unwrap_or_else(|| default_polarities(num_clauses));
        let m = TmModel {
            variant: Variant::Multiclass,
            num_features,
            num_clauses,
            num_classes,
            exclude_masks,
            weights: Vec::new(),
            polarities,
        };
        m.validate()?;
        Ok(m)
    }

    /// Build a coalesced model from a shared clause pool (C masks) and a
    /// K x C signed weight matrix.
    pub fn coalesced(
        num_features: usize,
        num_clauses: usize,
        num_classes: usize,
        exclude_masks: Vec<ExcludeMask>,
        weights: Vec<Vec<i64>>,
    ) -> Result<Self, Error> {
        let m = TmModel {
            variant: Variant::Coalesced,
            num_features,
            num_clauses,
            num_classes,
            exclude_masks,
            weights,
            polarities: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), Error> {
        if self.num_features == 0 {
            return Err(Error::model("num_features", "must be positive"));
        }
        if self.num_clauses == 0 {
            return Err(Error::model("num_clauses", "must be positive"));
        }
        if self.num_classes == 0 {
            return Err(Error::model("num_classes", "must be positive"));
        }
        let expected_masks = match self.variant {
            Variant::Multiclass => self.num_classes * self.num_clauses,
            Variant::Coalesced => self.num_clauses,
        };
        if self.exclude_masks.len() != expected_masks {
            return Err(Error::model(
                "exclude_masks",
                format!(
                    "expected {} masks, found {}",
                    expected_masks,
                    self.exclude_masks.len()
                ),
            ));
        }
        for (i, mask) in self.exclude_masks.iter().enumerate() {
            if mask.len() != 2 * self.num_features {
                return Err(Error::model(
                    "exclude_masks",
                    format!(
                        "exclude mask length {} at index {} (expected {})",
                        mask.len(),
                        i,
                        2 * self.num_features
                    ),
                ));
            }
        }
        match self.variant {
            Variant::Multiclass => {
                if !self.num_clauses.is_multiple_of(2) {
                    return Err(Error::model(
                        "num_clauses",
                        "multiclass requires an even clause count",
                    ));
                }
                if !self.weights.is_empty() {
                    return Err(Error::model("weights", "not allowed for multiclass"));
                }
                if self.polarities.len() != self.num_clauses {
                    return Err(Error::model(
                        "polarities",
                        format!(
                            "expected {} entries, found {}",
                            self.num_clauses,
                            self.polarities.len()
                        ),
                    ));
                }
                if self.polarities.iter().any(|p| *p != 1 && *p != -1) {
                    return Err(Error::model("polarities", "entries must be +1 or -1"));
                }
                let pos = self.polarities.iter().filter(|p| **p == 1).count();
                if pos != self.num_clauses / 2 {
                    return Err(Error::model(
                        "polarities",
                        format!(
                            "expected {} positive clauses per class, found {}",
                            self.num_clauses / 2,
                            pos
                        ),
                    ));
                }
            }
            Variant::Coalesced => {
                if !self.polarities.is_empty() {
                    return Err(Error::model("polarities", "not allowed for coalesced"));
                }
                if self.weights.len() != self.num_classes {
                    return Err(Error::model(
                        "weights",
                        format!(
                            "expected {} rows, found {}",
                            self.num_classes,
                            self.weights.len()
                        ),
                    ));
                }
                for (i, row) in self.weights.iter().enumerate() {
                    if row.len() != self.num_clauses {
                        return Err(Error::model(
                            "weights",
                            format!(
                                "row {} has {} entries (expected {})",
                                i,
                                row.len(),
                                self.num_clauses
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_clauses(&self) -> usize {
        self.num_clauses
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Clause masks of one class (multiclass).
    pub fn class_masks(&self, class: usize) -> &[ExcludeMask] {
        debug_assert_eq!(self.variant, Variant::Multiclass);
        let c = self.num_clauses;
        &self.exclude_masks[class * c..(class + 1) * c]
    }

    /// The shared clause pool (coalesced).
    pub fn shared_masks(&self) -> &[ExcludeMask] {
        debug_assert_eq!(self.variant, Variant::Coalesced);
        &self.exclude_masks
    }

    /// Signed weight row of one class (coalesced).
    pub fn weight_row(&self, class: usize) -> &[i64] {
        &self.weights[class]
    }

    /// Clause polarity by index within a class (multiclass): +1 or -1.
    pub fn polarity(&self, clause: usize) -> i8 {
        self.polarities[clause]
    }

    /// Largest possible |class sum|: C/2 for multiclass, max row sum of |W|
    /// for coalesced. Drives DCDE base auto-sizing and LOD bit widths.
    pub fn max_abs_sum(&self) -> u64 {
        match self.variant {
            Variant::Multiclass => (self.num_clauses / 2) as u64,
            Variant::Coalesced => self
                .weights
                .iter()
                .map(|row| row.iter().map(|w| w.unsigned_abs()).sum::<u64>())
                .max()
                .unwrap_or(0),
        }
    }

    /// Restrict the model to its first `k` classes (used by parameter sweeps).
    pub fn truncate_classes(&self, k: usize) -> Result<TmModel, Error> {
        if k == 0 || k > self.num_classes {
            return Err(Error::Config(format!(
                "cannot restrict model with {} classes to {}",
                self.num_classes, k
            )));
        }
        match self.variant {
            Variant::Multiclass => TmModel::multiclass(
                self.num_features,
                self.num_clauses,
                k,
                self.exclude_masks[..k * self.num_clauses].to_vec(),
                Some(self.polarities.clone()),
            ),
            Variant::Coalesced => TmModel::coalesced(
                self.num_features,
                self.num_clauses,
                k,
                self.exclude_masks.clone(),
                self.weights[..k].to_vec(),
            ),
        }
    }
}

fn default_polarities(num_clauses: usize) -> Vec<i8> {
    (0..num_clauses)
        .map(|j| if j % 2 == 0 { 1 } else { -1 })
        .collect()
}

/// Interleave a sample into its 2F literal vector (original, negated, ...).
pub fn gen_literals(sample: &Sample) -> LiteralVector {
    let mut lits = Vec::with_capacity(2 * sample.features.len());
    for &f in &sample.features {
        lits.push(f);
        lits.push(!f);
    }
    LiteralVector(lits)
}

/// Thermometer-encode raw values against per-feature ascending thresholds:
/// bit = 1 iff raw value is strictly greater than the threshold.
pub fn booleanize(raw: &[f64], thresholds: &[Vec<f64>]) -> Result<Sample, Error> {
    if raw.len() != thresholds.len() {
        return Err(Error::Dimension(format!(
            "{} raw values but {} threshold lists",
            raw.len(),
            thresholds.len()
        )));
    }
    let mut features = Vec::new();
    for (i, (value, ts)) in raw.iter().zip(thresholds.iter()).enumerate() {
        if ts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Dimension(format!(
                "thresholds for raw feature {} are not strictly ascending",
                i
            )));
        }
        for t in ts {
            features.push(value > t);
        }
    }
    Ok(Sample::new(features))
}

// ---------------------------------------------------------------------------
// Model file format: UTF-8 JSON with binary-string masks.

#[derive(Serialize, Deserialize)]
struct ModelFile {
    variant: String,
    num_features: usize,
    num_clauses: usize,
    num_classes: usize,
    exclude_masks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polarities: Option<Vec<i64>>,
}

/// Parse a model file. Errors name the offending field.
pub fn load_model(bytes: &[u8]) -> Result<TmModel, Error> {
    let file: ModelFile =
        serde_json::from_slice(bytes).map_err(|e| Error::model("(document)", e.to_string()))?;
    let masks: Vec<ExcludeMask> = file
        .exclude_masks
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::model(
                        "exclude_masks",
                        format!("mask {} contains '{}' (expected 0/1)", i, other),
                    )),
                })
                .collect::<Result<Vec<bool>, Error>>()
        })
        .collect::<Result<_, _>>()?;
    match file.variant.as_str() {
        "multiclass" => {
            if file.weights.is_some() {
                return Err(Error::model("weights", "not allowed for multiclass"));
            }
            let polarities = match file.polarities {
                None => None,
                Some(ps) => Some(
                    ps.iter()
                        .map(|p| match p {
                            1 => Ok(1i8),
                            -1 => Ok(-1i8),
                            other => Err(Error::model(
                                "polarities",
                                format!("entry {} (expected +1 or -1)", other),
                            )),
                        })
                        .collect::<Result<Vec<i8>, Error>>()?,
                ),
            };
            TmModel::multiclass(
                file.num_features,
                file.num_clauses,
                file.num_classes,
                masks,
                polarities,
            )
        }
        "coalesced" => {
            if file.polarities.is_some() {
                return Err(Error::model("polarities", "not allowed for coalesced"));
            }
            let weights = file
                .weights
                .ok_or_else(|| Error::model("weights", "required for coalesced"))?;
            TmModel::coalesced(
                file.num_features,
                file.num_clauses,
                file.num_classes,
                masks,
                weights,
            )
        }
        other => Err(Error::model(
            "variant",
            format!("'{}' (expected multiclass or coalesced)", other),
        )),
    }
}

/// Serialize a model; `load_model(save_model(m)) == m`.
pub fn save_model(model: &TmModel) -> Vec<u8> {
    let file = ModelFile {
        variant: model.variant.as_str().to_string(),
        num_features: model.num_features,
        num_clauses: model.num_clauses,
        num_classes: model.num_classes,
        exclude_masks: model
            .exclude_masks
            .iter()
            .map(|m| m.iter().map(|b| if *b { '1' } else { '0' }).collect())
            .collect(),
        weights: match model.variant {
            Variant::Coalesced => Some(model.weights.clone()),
            Variant::Multiclass => None,
        },
        polarities: match model.variant {
            Variant::Multiclass => Some(model.polarities.iter().map(|p| *p as i64).collect()),
            Variant::Coalesced => None,
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("model serialization");
    bytes.push(b'\n');
    bytes
}

/// Parse a dataset: CSV, one sample per row, F binary columns plus an
/// optional trailing label column. No header.
pub fn load_samples(text: &str, num_features: usize) -> Result<Vec<Sample>, Error> {
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let label = match cols.len() {
            n if n == num_features => None,
            n if n == num_features + 1 => Some(cols[num_features].parse::<usize>().map_err(
                |_| Error::Dataset {
                    line: lineno + 1,
                    message: format!("label '{}' is not an index", cols[num_features]),
                },
            )?),
            n => {
                return Err(Error::Dataset {
                    line: lineno + 1,
                    message: format!(
                        "{} columns (expected {} or {})",
                        n,
                        num_features,
                        num_features + 1
                    ),
                })
            }
        };
        let mut features = Vec::with_capacity(num_features);
        for c in &cols[..num_features] {
            match *c {
                "0" => features.push(false),
                "1" => features.push(true),
                other => {
                    return Err(Error::Dataset {
                        line: lineno + 1,
                        message: format!("feature '{}' is not 0/1", other),
                    })
                }
            }
        }
        samples.push(Sample { features, label });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(bits: &str) -> ExcludeMask {
        bits.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn gen_literals_interleaves() {
        let s = Sample::new(vec![true, false]);
        assert_eq!(gen_literals(&s).0, vec![true, false, false, true]);
        let zeros = Sample::new(vec![false; 3]);
        assert_eq!(
            gen_literals(&zeros).0,
            vec![false, true, false, true, false, true]
        );
        let ones = Sample::new(vec![true; 2]);
        assert_eq!(gen_literals(&ones).0, vec![true, false, true, false]);
    }

    #[test]
    fn booleanize_thermometer() {
        let s = booleanize(&[5.1], &[vec![4.5, 5.0, 5.5, 6.5]]).unwrap();
        assert_eq!(s.features, vec![true, true, false, false]);
        // Boundary rule: strict greater-than.
        let s = booleanize(&[5.0], &[vec![5.0]]).unwrap();
        assert_eq!(s.features, vec![false]);
        // Saturation.
        let s = booleanize(&[9.9], &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(s.features, vec![true, true, true]);
    }

    #[test]
    fn booleanize_rejects_count_mismatch() {
        assert!(matches!(
            booleanize(&[1.0, 2.0], &[vec![0.5]]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn minimal_model_parses() {
        // F=1, C=2, K=1, everything excluded.
        let text = br#"{
            "variant": "multiclass",
            "num_features": 1,
            "num_clauses": 2,
            "num_classes": 1,
            "exclude_masks": ["11", "11"]
        }"#;
        let m = load_model(text).unwrap();
        assert_eq!(m.num_features(), 1);
        assert_eq!(m.polarity(0), 1);
        assert_eq!(m.polarity(1), -1);
    }

    #[test]
    fn bad_mask_length_names_field() {
        let text = br#"{
            "variant": "coalesced",
            "num_features": 2,
            "num_clauses": 1,
            "num_classes": 1,
            "exclude_masks": ["011"],
            "weights": [[1]]
        }"#;
        let err = load_model(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exclude_masks"), "{msg}");
        assert!(msg.contains("length"), "{msg}");
    }

    #[test]
    fn odd_clause_count_rejected_for_multiclass() {
        let err = TmModel::multiclass(1, 3, 1, vec![mask("11"); 3], None).unwrap_err();
        assert!(err.to_string().contains("num_clauses"));
    }

    #[test]
    fn sweep_truncation_keeps_prefix_classes() {
        let m = TmModel::coalesced(
            1,
            2,
            3,
            vec![mask("01"), mask("10")],
            vec![vec![1, 2], vec![3, 4], vec![5, 6]],
        )
        .unwrap();
        let t = m.truncate_classes(2).unwrap();
        assert_eq!(t.num_classes(), 2);
        assert_eq!(t.weight_row(1), &[3, 4]);
        assert!(m.truncate_classes(4).is_err());
    }

    #[test]
    fn dataset_rows_with_and_without_label() {
        let samples = load_samples("1,0,1\n0,1,0,2\n", 3).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].label, None);
        assert_eq!(samples[1].label, Some(2));
        assert!(load_samples("1,0\n", 3).is_err());
        assert!(load_samples("1,0,2\n", 3).is_err());
    }

    proptest! {
        #[test]
        fn literal_pairs_xor_to_one(bits in proptest::collection::vec(any::<bool>(), 1..24)) {
            let lits = gen_literals(&Sample::new(bits)).0;
            for pair in lits.chunks(2) {
                prop_assert!(pair[0] ^ pair[1]);
            }
        }

        #[test]
        fn booleanize_is_monotone(
            raw in -10.0f64..10.0,
            bump in 0.0f64..5.0,
            mut ts in proptest::collection::vec(-10.0f64..10.0, 1..6),
        ) {
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ts.dedup();
            let thresholds = vec![ts];
            let lo = booleanize(&[raw], &thresholds).unwrap();
            let hi = booleanize(&[raw + bump], &thresholds).unwrap();
            for (a, b) in lo.features.iter().zip(hi.features.iter()) {
                prop_assert!(!a | b, "raising a raw value cleared a bit");
            }
        }

        #[test]
        fn model_roundtrip(
            f in 1usize..5,
            half_c in 1usize..4,
            k in 1usize..4,
            coalesced in any::<bool>(),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let c = 2 * half_c;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n_masks = if coalesced { c } else { k * c };
            let masks: Vec<ExcludeMask> = (0..n_masks)
                .map(|_| (0..2 * f).map(|_| rng.gen_bool(0.7)).collect())
                .collect();
            let m = if coalesced {
                let weights = (0..k)
                    .map(|_| (0..c).map(|_| rng.gen_range(-7i64..=7)).collect())
                    .collect();
                TmModel::coalesced(f, c, k, masks, weights).unwrap()
            } else {
                TmModel::multiclass(f, c, k, masks, None).unwrap()
            };
            let bytes = save_model(&m);
            let back = load_model(&bytes).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
