//! Plug-in entropy and information gain over equal-width bins, and the
//! comparison of per-cell orientation encodings.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::orientation::{encode_alternative, Encoding, OrientationField};
use crate::ClassLabel;

pub const DEFAULT_BINS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfoGainError {
    #[error("no samples")]
    Empty,
    #[error("{features} feature values but {labels} labels")]
    Length { features: usize, labels: usize },
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("field {index} has {found} cells, expected {expected}")]
    FieldShape {
        index: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyStats {
    /// H(T) in bits.
    pub h_t: f64,
    /// H(T|F) in bits.
    pub h_t_given_f: f64,
    pub gain: f64,
    pub bins: usize,
}

fn entropy_of_counts(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn class_counts(labels: impl Iterator<Item = ClassLabel>) -> [usize; ClassLabel::COUNT] {
    let mut counts = [0; ClassLabel::COUNT];
    labels.for_each(|l| counts[l.index()] += 1);
    counts
}

/// Entropy of the label distribution in bits.
pub fn empirical_entropy(labels: &[ClassLabel]) -> Result<f64, InfoGainError> {
    if labels.is_empty() {
        return Err(InfoGainError::Empty);
    }
    Ok(entropy_of_counts(&class_counts(labels.iter().copied()), labels.len()))
}

/// Equal-width bin indices over the observed range. A constant column falls
/// entirely into bin 0.
fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            if span <= 0.0 || !span.is_finite() {
                return 0;
            }
            // Scaling once keeps a doubled bin count an exact refinement.
            let u = (v - lo) / span;
            ((u * bins as f64).floor() as usize).min(bins - 1)
        })
        .collect()
}

fn check(len: usize, labels: &[ClassLabel], bins: usize) -> Result<(), InfoGainError> {
    if labels.is_empty() {
        return Err(InfoGainError::Empty);
    }
    if len != labels.len() {
        return Err(InfoGainError::Length {
            features: len,
            labels: labels.len(),
        });
    }
    if bins == 0 {
        return Err(InfoGainError::ZeroBins);
    }
    Ok(())
}

/// H(T|F) with F discretized into `bins` equal-width cells.
pub fn conditional_entropy(features: &[f64], labels: &[ClassLabel], bins: usize) -> Result<f64, InfoGainError> {
    joint_conditional_entropy(&[features], labels, bins)
}

/// H(T|F₁,…,F_d) where each column is binned separately and samples are
/// grouped by their tuple of bin indices.
pub fn joint_conditional_entropy(
    columns: &[&[f64]],
    labels: &[ClassLabel],
    bins: usize,
) -> Result<f64, InfoGainError> {
    for col in columns {
        check(col.len(), labels, bins)?;
    }
    if columns.is_empty() {
        check(labels.len(), labels, bins)?;
    }
    let mut keys = vec![0usize; labels.len()];
    for col in columns {
        for (key, b) in keys.iter_mut().zip(bin_indices(col, bins)) {
            *key = *key * bins + b;
        }
    }
    let mut groups: HashMap<usize, [usize; ClassLabel::COUNT]> = HashMap::new();
    for (key, label) in keys.into_iter().zip(labels) {
        groups.entry(key).or_default()[label.index()] += 1;
    }
    let n = labels.len() as f64;
    // Sum in key order so the result does not depend on hash iteration.
    let mut entries: Vec<_> = groups.into_iter().collect();
    entries.sort_unstable_by_key(|e| e.0);
    Ok(entries
        .iter()
        .map(|(_, counts)| {
            let size: usize = counts.iter().sum();
            size as f64 / n * entropy_of_counts(counts, size)
        })
        .sum())
}

fn stats(h_t: f64, h_t_given_f: f64, bins: usize) -> EntropyStats {
    EntropyStats {
        h_t,
        h_t_given_f,
        gain: (h_t - h_t_given_f).max(0.0),
        bins,
    }
}

/// g(T,F) = H(T) − H(T|F) for a scalar feature.
pub fn information_gain(features: &[f64], labels: &[ClassLabel], bins: usize) -> Result<EntropyStats, InfoGainError> {
    joint_information_gain(&[features], labels, bins)
}

/// Gain of a feature tuple discretized jointly.
pub fn joint_information_gain(
    columns: &[&[f64]],
    labels: &[ClassLabel],
    bins: usize,
) -> Result<EntropyStats, InfoGainError> {
    let h_t_given_f = joint_conditional_entropy(columns, labels, bins)?;
    Ok(stats(empirical_entropy(labels)?, h_t_given_f, bins))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeGain {
    pub scheme: Encoding,
    pub mean_gain: f64,
    /// 1 for the highest mean gain.
    pub rank: usize,
}

/// Mean over grid cells of the gain carried by each cell's feature tuple,
/// for every scheme. Results are sorted by rank; ties keep scheme order.
pub fn compare_encodings(
    fields: &[OrientationField],
    labels: &[ClassLabel],
    schemes: &[Encoding],
    bins: usize,
) -> Result<Vec<SchemeGain>, InfoGainError> {
    check(fields.len(), labels, bins)?;
    let cells = fields[0].len();
    if let Some((index, f)) = fields.iter().enumerate().find(|(_, f)| f.len() != cells) {
        return Err(InfoGainError::FieldShape {
            index,
            expected: cells,
            found: f.len(),
        });
    }
    let h_t = empirical_entropy(labels)?;
    let mut out = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let width = scheme.width();
        let encoded: Vec<Vec<f64>> = fields.iter().map(|f| encode_alternative(f, scheme).values).collect();
        let mut total = 0.0;
        let mut columns = vec![vec![0.0; fields.len()]; width];
        for cell in 0..cells {
            for (plane, col) in columns.iter_mut().enumerate() {
                for (dst, enc) in col.iter_mut().zip(&encoded) {
                    *dst = enc[plane * cells + cell];
                }
            }
            let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
            let h = joint_conditional_entropy(&refs, labels, bins)?;
            total += stats(h_t, h, bins).gain;
        }
        out.push(SchemeGain {
            scheme,
            mean_gain: if cells == 0 { 0.0 } else { total / cells as f64 },
            rank: 0,
        });
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| out[b].mean_gain.total_cmp(&out[a].mean_gain));
    let mut ranked: Vec<SchemeGain> = order.into_iter().map(|i| out[i].clone()).collect();
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}

/// TSV with columns `scheme`, `mean_gain`, `rank`.
pub fn gains_to_tsv(gains: &[SchemeGain]) -> String {
    let mut s = String::from("scheme\tmean_gain\trank\n");
    for g in gains {
        let _ = writeln!(s, "{}\t{:.6}\t{}", g.scheme, g.mean_gain, g.rank);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use ClassLabel::*;

    fn labels_from(idx: &[usize]) -> Vec<ClassLabel> {
        idx.iter().map(|&i| ClassLabel::from_index(i).unwrap()).collect()
    }

    /// Direct −Σ p log₂ p over a probability vector.
    fn oracle_entropy(p: &[f64]) -> f64 {
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
    }

    #[test]
    fn entropy_spot_values() {
        assert_eq!(empirical_entropy(&[L; 7]).unwrap(), 0.0);
        assert_abs_diff_eq!(empirical_entropy(&[A, L, R, W]).unwrap(), 2.0, epsilon = 1e-15);
        let skewed = [A, A, A, A, L, L, R, W];
        let expected = oracle_entropy(&[0.5, 0.25, 0.125, 0.125]);
        assert_abs_diff_eq!(expected, 1.75, epsilon = 1e-15);
        assert_abs_diff_eq!(empirical_entropy(&skewed).unwrap(), expected, epsilon = 1e-15);
        assert_eq!(empirical_entropy(&[]), Err(InfoGainError::Empty));
    }

    #[test]
    fn conditional_entropy_trivial_cases() {
        let labels = [A, L, L, R, W, W, W, A];
        let h = empirical_entropy(&labels).unwrap();
        let constant = [0.3; 8];
        assert_abs_diff_eq!(conditional_entropy(&constant, &labels, 8).unwrap(), h, epsilon = 1e-12);
        let ordinal: Vec<f64> = labels.iter().map(|l| l.index() as f64).collect();
        assert_abs_diff_eq!(conditional_entropy(&ordinal, &labels, 4).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(conditional_entropy(&ordinal, &labels, 1).unwrap(), h, epsilon = 1e-12);
        assert!(matches!(conditional_entropy(&ordinal[..3], &labels, 4), Err(InfoGainError::Length { .. })));
        assert_eq!(conditional_entropy(&ordinal, &labels, 0), Err(InfoGainError::ZeroBins));
    }

    #[test]
    fn feature_equal_to_label_carries_all_information() {
        let labels = labels_from(&[0, 1, 2, 3, 3, 2, 1, 0, 0, 0]);
        let f: Vec<f64> = labels.iter().map(|l| l.index() as f64).collect();
        let s = information_gain(&f, &labels, DEFAULT_BINS).unwrap();
        assert_eq!(s.gain, s.h_t);
        assert_eq!(s.bins, 8);
        let s = information_gain(&[1.0; 10], &labels, DEFAULT_BINS).unwrap();
        assert_eq!(s.gain, 0.0);
    }

    #[test]
    fn gain_by_hand() {
        // Bins split {A,A,L} | {L,R,R}: H(T)=1.5, H(T|F)=½·0.918…·2.
        let labels = [A, A, L, L, R, R];
        let f = [0.0, 0.1, 0.2, 0.8, 0.9, 1.0];
        let s = information_gain(&f, &labels, 2).unwrap();
        let h_t = oracle_entropy(&[1.0 / 3.0; 3]);
        let h_cond = oracle_entropy(&[2.0 / 3.0, 1.0 / 3.0]);
        assert_abs_diff_eq!(s.h_t, h_t, epsilon = 1e-12);
        assert_abs_diff_eq!(s.h_t_given_f, h_cond, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gain, h_t - h_cond, epsilon = 1e-12);
    }

    #[test]
    fn one_class_dataset_has_zero_gains() {
        let fields: Vec<_> = (0..5)
            .map(|i| OrientationField::all_valid(2, 2, vec![0.1 * i as f64; 4]).unwrap())
            .collect();
        let gains = compare_encodings(&fields, &[R; 5], &Encoding::ALL, 8).unwrap();
        assert!(gains.iter().all(|g| g.mean_gain == 0.0));
        assert_eq!(gains.iter().map(|g| g.rank).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn tsv_layout() {
        let g = [SchemeGain {
            scheme: Encoding::F6,
            mean_gain: 0.5,
            rank: 1,
        }];
        assert_eq!(gains_to_tsv(&g), "scheme\tmean_gain\trank\nf6\t0.500000\t1\n");
    }

    fn arb_data() -> impl Strategy<Value = (Vec<f64>, Vec<ClassLabel>)> {
        prop::collection::vec((-5.0f64..5.0, 0usize..4), 1..200)
            .prop_map(|v| v.into_iter().map(|(f, l)| (f, ClassLabel::from_index(l).unwrap())).unzip())
    }

    proptest! {
        #[test]
        fn gain_is_bounded((f, labels) in arb_data(), bins in 1usize..32) {
            let s = information_gain(&f, &labels, bins).unwrap();
            prop_assert!(s.h_t >= 0.0 && s.h_t <= 2.0 + 1e-12);
            prop_assert!(s.gain >= 0.0 && s.gain <= s.h_t + 1e-12);
        }

        #[test]
        fn doubling_bins_never_loses_gain((f, labels) in arb_data(), bins in 1usize..32) {
            let coarse = information_gain(&f, &labels, bins).unwrap().gain;
            let fine = information_gain(&f, &labels, 2 * bins).unwrap().gain;
            prop_assert!(fine >= coarse - 1e-12);
        }

        #[test]
        fn joint_tuple_dominates_each_component(
            (f, labels) in arb_data(),
            shift in 0usize..200,
            bins in 1usize..16
        ) {
            let g: Vec<f64> = (0..f.len()).map(|i| f[(i + shift) % f.len()].sin()).collect();
            let joint = joint_information_gain(&[&f, &g], &labels, bins).unwrap().gain;
            prop_assert!(joint >= information_gain(&f, &labels, bins).unwrap().gain - 1e-12);
            prop_assert!(joint >= information_gain(&g, &labels, bins).unwrap().gain - 1e-12);
        }

        #[test]
        fn permutation_invariance((f, labels) in arb_data(), seed in any::<u64>()) {
            let n = f.len();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
            let pf: Vec<f64> = perm.iter().map(|&i| f[i]).collect();
            let pl: Vec<ClassLabel> = perm.iter().map(|&i| labels[i]).collect();
            let a = information_gain(&f, &labels, 8).unwrap();
            let b = information_gain(&pf, &pl, 8).unwrap();
            prop_assert!((a.gain - b.gain).abs() < 1e-12);
            prop_assert!((a.h_t - b.h_t).abs() < 1e-12);
        }
    }
}
