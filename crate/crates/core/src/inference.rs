//! Bit-exact digital golden model: clause evaluation and classification.
//!
//! Untimed by construction; every time-domain mode is verified against the
//! predictions produced here.

use crate::error::Error;
use crate::model::{gen_literals, ExcludeMask, LiteralVector, Sample, TmModel, Variant};

/// Clause outputs for one clause set, length C.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseVector(pub Vec<bool>);

/// Per-class signed vote totals, length K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSums(pub Vec<i64>);

/// Evaluate one clause set: bit j is 1 iff every included literal of clause j
/// is 1. A clause with all literals excluded is the empty conjunction: 1.
pub fn eval_clauses(masks: &[ExcludeMask], literals: &LiteralVector) -> ClauseVector {
    let bits = masks
        .iter()
        .map(|mask| {
            mask.iter()
                .zip(literals.0.iter())
                .all(|(&excluded, &lit)| lit || excluded)
        })
        .collect();
    ClauseVector(bits)
}

/// Per-class sums for the multiclass variant: firing positive clauses count
/// +1, firing negative clauses count -1.
pub fn multiclass_sums(model: &TmModel, per_class: &[ClauseVector]) -> Result<ClassSums, Error> {
    if model.variant() != Variant::Multiclass {
        return Err(Error::VariantMismatch(
            "multiclass_sums requires a multiclass model".into(),
        ));
    }
    if per_class.len() != model.num_classes() {
        return Err(Error::Dimension(format!(
            "{} clause vectors for {} classes",
            per_class.len(),
            model.num_classes()
        )));
    }
    let sums = per_class
        .iter()
        .map(|cv| {
            cv.0.iter()
                .enumerate()
                .map(|(j, &fired)| if fired { model.polarity(j) as i64 } else { 0 })
                .sum()
        })
        .collect();
    Ok(ClassSums(sums))
}

/// Per-class sums for the coalesced variant over the single shared clause
/// vector: weight selected when the clause fires, else 0.
pub fn cotm_sums(model: &TmModel, shared: &ClauseVector) -> Result<ClassSums, Error> {
    if model.variant() != Variant::Coalesced {
        return Err(Error::VariantMismatch(
            "cotm_sums requires a coalesced model".into(),
        ));
    }
    if shared.0.len() != model.num_clauses() {
        return Err(Error::Dimension(format!(
            "clause vector length {} for {} clauses",
            shared.0.len(),
            model.num_clauses()
        )));
    }
    let sums = (0..model.num_classes())
        .map(|i| {
            model
                .weight_row(i)
                .iter()
                .zip(shared.0.iter())
                .map(|(&w, &fired)| if fired { w } else { 0 })
                .sum()
        })
        .collect();
    Ok(ClassSums(sums))
}

/// Index of the maximum sum; ties broken by lowest class index.
pub fn argmax_class(sums: &ClassSums) -> usize {
    let mut best = 0;
    for (i, &s) in sums.0.iter().enumerate() {
        if s > sums.0[best] {
            best = i;
        }
    }
    best
}

/// Result of one full untimed inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inference {
    pub predicted: usize,
    pub sums: ClassSums,
    /// Per-class clause vectors (multiclass) or a single shared one (coalesced).
    pub clause_vectors: Vec<ClauseVector>,
}

/// Literal generation, clause evaluation, class sums and argmax composed.
pub fn infer(model: &TmModel, sample: &Sample) -> Result<Inference, Error> {
    if sample.features.len() != model.num_features() {
        return Err(Error::Dimension(format!(
            "sample has {} features, model expects {}",
            sample.features.len(),
            model.num_features()
        )));
    }
    let literals = gen_literals(sample);
    let (clause_vectors, sums) = match model.variant() {
        Variant::Multiclass => {
            let vectors: Vec<ClauseVector> = (0..model.num_classes())
                .map(|i| eval_clauses(model.class_masks(i), &literals))
                .collect();
            let sums = multiclass_sums(model, &vectors)?;
            (vectors, sums)
        }
        Variant::Coalesced => {
            let shared = eval_clauses(model.shared_masks(), &literals);
            let sums = cotm_sums(model, &shared)?;
            (vec![shared], sums)
        }
    };
    Ok(Inference {
        predicted: argmax_class(&sums),
        sums,
        clause_vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TmModel;
    use proptest::prelude::*;

    fn mask(bits: &str) -> ExcludeMask {
        bits.chars().map(|c| c == '1').collect()
    }

    fn lits(bits: &[u8]) -> LiteralVector {
        LiteralVector(bits.iter().map(|&b| b == 1).collect())
    }

    /// Independent brute-force inference used as the oracle for the fixture
    /// tests: recomputes literal values positionally from the feature bits
    /// and walks every included literal without the library helpers.
    pub(crate) fn brute_infer(model: &TmModel, features: &[bool]) -> (usize, Vec<i64>) {
        let literal_value = |idx: usize| -> bool {
            let f = features[idx / 2];
            if idx.is_multiple_of(2) {
                f
            } else {
                !f
            }
        };
        let clause_fires =
            |m: &ExcludeMask| -> bool { (0..m.len()).all(|i| m[i] || literal_value(i)) };
        let k = model.num_classes();
        let mut sums = vec![0i64; k];
        match model.variant() {
            Variant::Multiclass => {
                for (i, sum) in sums.iter_mut().enumerate() {
                    for (j, m) in model.class_masks(i).iter().enumerate() {
                        if clause_fires(m) {
                            *sum += model.polarity(j) as i64;
                        }
                    }
                }
            }
            Variant::Coalesced => {
                let fired: Vec<bool> = model.shared_masks().iter().map(clause_fires).collect();
                for (i, sum) in sums.iter_mut().enumerate() {
                    for (j, &f) in fired.iter().enumerate() {
                        if f {
                            *sum += model.weight_row(i)[j];
                        }
                    }
                }
            }
        }
        let mut best = 0;
        for i in 1..k {
            if sums[i] > sums[best] {
                best = i;
            }
        }
        (best, sums)
    }

    pub(crate) fn multiclass_fixture() -> TmModel {
        // K=2, C=2 per class. Class 0: +f0, -f1. Class 1: +!f0, -!f1.
        TmModel::multiclass(
            2,
            2,
            2,
            vec![mask("0111"), mask("1101"), mask("1011"), mask("1110")],
            None,
        )
        .unwrap()
    }

    pub(crate) fn coalesced_fixture() -> TmModel {
        // Shared clauses: f0, f1, !f0.
        TmModel::coalesced(
            2,
            3,
            3,
            vec![mask("0111"), mask("1101"), mask("1011")],
            vec![vec![2, -1, 3], vec![-1, 2, 1], vec![1, 1, -2]],
        )
        .unwrap()
    }

    #[test]
    fn empty_conjunction_fires() {
        let cv = eval_clauses(&[mask("1111")], &lits(&[0, 1, 0, 1]));
        assert_eq!(cv.0, vec![true]);
    }

    #[test]
    fn single_included_literal_gates_clause() {
        let cv = eval_clauses(&[mask("0111")], &lits(&[0, 1, 0, 1]));
        assert_eq!(cv.0, vec![false]);
    }

    #[test]
    fn includes_literal0_and_literal3() {
        // Feature [1,0] -> literals [1,0,0,1]; clause includes {lit0, lit3}.
        let cv = eval_clauses(&[mask("0110")], &lits(&[1, 0, 0, 1]));
        assert_eq!(cv.0, vec![true]);
    }

    #[test]
    fn multiclass_sum_arithmetic() {
        let m = TmModel::multiclass(1, 4, 1, vec![mask("11"); 4], None).unwrap();
        let case = |bits: [u8; 4]| {
            let cv = ClauseVector(bits.iter().map(|&b| b == 1).collect());
            multiclass_sums(&m, &[cv]).unwrap().0[0]
        };
        // Polarity layout is [+, -, +, -]: positives at 0 and 2.
        assert_eq!(case([1, 0, 1, 0]), 2);
        assert_eq!(case([1, 1, 0, 0]), 0);
        assert_eq!(case([0, 1, 0, 1]), -2);
    }

    #[test]
    fn cotm_sum_arithmetic() {
        let m = coalesced_fixture();
        let cv = ClauseVector(vec![true, true, false]);
        let sums = cotm_sums(&m, &cv).unwrap();
        assert_eq!(sums.0[0], 1); // 2 - 1 + 0
        let zeros = ClauseVector(vec![false, false, false]);
        assert_eq!(cotm_sums(&m, &zeros).unwrap().0, vec![0, 0, 0]);
        let neg =
            TmModel::coalesced(1, 2, 1, vec![mask("11"), mask("11")], vec![vec![-1, -1]]).unwrap();
        let all = ClauseVector(vec![true, true]);
        assert_eq!(cotm_sums(&neg, &all).unwrap().0, vec![-2]);
    }

    #[test]
    fn argmax_tie_breaks_low_index() {
        assert_eq!(argmax_class(&ClassSums(vec![3, 7, 7])), 1);
        assert_eq!(argmax_class(&ClassSums(vec![-5])), 0);
        assert_eq!(argmax_class(&ClassSums(vec![0, -1, 4])), 2);
    }

    #[test]
    fn variant_mismatch_rejected() {
        let mc = multiclass_fixture();
        let co = coalesced_fixture();
        assert!(cotm_sums(&mc, &ClauseVector(vec![false; 2])).is_err());
        assert!(multiclass_sums(&co, &[]).is_err());
    }

    #[test]
    fn multiclass_fixture_matches_brute_force() {
        // Expected predictions computed by `brute_infer` over all 4 inputs.
        let m = multiclass_fixture();
        let expected = [0usize, 0, 1, 0];
        for (i, exp) in expected.iter().enumerate() {
            let features = vec![i & 1 == 1, i & 2 == 2]; // i = f0 + 2*f1
            let (oracle_pred, oracle_sums) = brute_infer(&m, &features);
            let inf = infer(&m, &Sample::new(features)).unwrap();
            assert_eq!(inf.predicted, oracle_pred);
            assert_eq!(inf.sums.0, oracle_sums);
            assert_eq!(inf.predicted, *exp, "input {}", i);
        }
    }

    #[test]
    fn coalesced_fixture_matches_brute_force() {
        let m = coalesced_fixture();
        let expected = [0usize, 0, 1, 2];
        for (i, exp) in expected.iter().enumerate() {
            let features = vec![i & 1 == 1, i & 2 == 2];
            let (oracle_pred, oracle_sums) = brute_infer(&m, &features);
            let inf = infer(&m, &Sample::new(features)).unwrap();
            assert_eq!(inf.predicted, oracle_pred);
            assert_eq!(inf.sums.0, oracle_sums);
            assert_eq!(inf.predicted, *exp, "input {}", i);
        }
    }

    #[test]
    fn all_excluded_model_predicts_class_zero() {
        // Every clause fires for every class; sums cancel to 0; tie -> 0.
        let m = TmModel::multiclass(2, 2, 3, vec![mask("1111"); 6], None).unwrap();
        let inf = infer(&m, &Sample::new(vec![true, false])).unwrap();
        assert_eq!(inf.sums.0, vec![0, 0, 0]);
        assert_eq!(inf.predicted, 0);
    }

    proptest! {
        #[test]
        fn multiclass_sum_bounded_by_half_clauses(
            seed in any::<u64>(),
            f in 1usize..4,
            half_c in 1usize..4,
            k in 1usize..4,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = 2 * half_c;
            let masks = (0..k * c)
                .map(|_| (0..2 * f).map(|_| rng.gen_bool(0.7)).collect())
                .collect();
            let m = TmModel::multiclass(f, c, k, masks, None).unwrap();
            let features: Vec<bool> = (0..f).map(|_| rng.gen_bool(0.5)).collect();
            let inf = infer(&m, &Sample::new(features)).unwrap();
            for s in &inf.sums.0 {
                prop_assert!(s.unsigned_abs() <= (c / 2) as u64);
            }
        }

        #[test]
        fn negating_weight_row_negates_sum(
            seed in any::<u64>(),
            f in 1usize..4,
            c in 1usize..6,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let masks: Vec<ExcludeMask> = (0..c)
                .map(|_| (0..2 * f).map(|_| rng.gen_bool(0.7)).collect())
                .collect();
            let row: Vec<i64> = (0..c).map(|_| rng.gen_range(-7i64..=7)).collect();
            let neg_row: Vec<i64> = row.iter().map(|w| -w).collect();
            let m = TmModel::coalesced(f, c, 2, masks, vec![row, neg_row]).unwrap();
            let features: Vec<bool> = (0..f).map(|_| rng.gen_bool(0.5)).collect();
            let inf = infer(&m, &Sample::new(features)).unwrap();
            prop_assert_eq!(inf.sums.0[0], -inf.sums.0[1]);
        }

        #[test]
        fn argmax_invariant_under_common_shift(
            sums in proptest::collection::vec(-100i64..100, 1..8),
            shift in -1000i64..1000,
        ) {
            let base = argmax_class(&ClassSums(sums.clone()));
            let shifted: Vec<i64> = sums.iter().map(|s| s + shift).collect();
            prop_assert_eq!(base, argmax_class(&ClassSums(shifted)));
        }
    }

    #[test]
    fn exhaustive_small_instances_deterministic() {
        let models = [multiclass_fixture(), coalesced_fixture()];
        for m in &models {
            let f = m.num_features();
            for x in 0..(1u32 << f) {
                let features: Vec<bool> = (0..f).map(|i| (x >> i) & 1 == 1).collect();
                let a = infer(m, &Sample::new(features.clone())).unwrap();
                let b = infer(m, &Sample::new(features)).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}
