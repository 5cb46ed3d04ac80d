//! Post-classification decisions: a secondary class when the top
//! probability is low, a rescue flag when even the top two classes carry
//! little mass, and confidence-based rejection.

use thiserror::Error;

use crate::ClassLabel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("threshold {0} must lie in [0, 1]")]
    Threshold(f64),
    #[error("reject fraction {0} must lie in [0, 1)")]
    Fraction(f64),
    #[error("ranking must be non-empty and sorted by descending probability")]
    Ranking,
    #[error("{decisions} decisions but {labels} labels")]
    Length { decisions: usize, labels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyDecision {
    /// Classes by descending probability.
    pub ranked: Vec<(ClassLabel, f64)>,
    pub primary: ClassLabel,
    pub secondary: Option<ClassLabel>,
    pub rescued: bool,
    pub rejected: bool,
}

impl FuzzyDecision {
    fn prob(&self, rank: usize) -> f64 {
        self.ranked.get(rank).map_or(0.0, |r| r.1)
    }

    /// First (largest) probability.
    pub fn fp(&self) -> f64 {
        self.prob(0)
    }

    pub fn sp(&self) -> f64 {
        self.prob(1)
    }

    pub fn tp(&self) -> f64 {
        self.prob(2)
    }

    pub fn second_class(&self) -> Option<ClassLabel> {
        self.ranked.get(1).map(|r| r.0)
    }

    pub fn third_class(&self) -> Option<ClassLabel> {
        self.ranked.get(2).map(|r| r.0)
    }

    /// Sets the rescue flag from [`rescue_condition`].
    pub fn flag_rescue(&mut self, sum_threshold: f64) {
        self.rescued = rescue_condition(self, sum_threshold);
    }
}

/// Whether a sample with top probability `fp` is below `threshold`.
///
/// A threshold of 1 counts every sample as below: with two or more classes
/// the top probability is mathematically under 1 even when it rounds to 1.0.
fn below(fp: f64, threshold: f64) -> bool {
    fp < threshold || threshold >= 1.0
}

/// Assigns the top class and, when its probability is below `threshold`,
/// the second class too.
pub fn fuzzy_classify(ranked: &[(ClassLabel, f64)], threshold: f64) -> Result<FuzzyDecision, FuzzyError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(FuzzyError::Threshold(threshold));
    }
    if ranked.is_empty() || ranked.windows(2).any(|w| w[0].1 < w[1].1) {
        return Err(FuzzyError::Ranking);
    }
    let secondary = match ranked.get(1) {
        Some(&(class, _)) if below(ranked[0].1, threshold) => Some(class),
        _ => None,
    };
    Ok(FuzzyDecision {
        ranked: ranked.to_vec(),
        primary: ranked[0].0,
        secondary,
        rescued: false,
        rejected: false,
    })
}

/// True when the top two probabilities sum to less than `sum_threshold`.
pub fn rescue_condition(decision: &FuzzyDecision, sum_threshold: f64) -> bool {
    decision.fp() + decision.sp() < sum_threshold
}

/// Number of samples rejected at `fraction` of `n`: `⌈fraction·n⌉`.
pub fn reject_count(fraction: f64, n: usize) -> usize {
    // Absorb representation error such as 0.1·30 = 3.0000000000000004.
    let raw = fraction * n as f64;
    let nearest = raw.round();
    let count = if (raw - nearest).abs() < 1e-9 { nearest } else { raw.ceil() };
    (count.max(0.0) as usize).min(n)
}

/// Marks the `⌈fraction·N⌉` lowest-confidence decisions as rejected; ties
/// go to the earlier decision.
pub fn reject_lowest(decisions: &mut [FuzzyDecision], fraction: f64) -> Result<usize, FuzzyError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(FuzzyError::Fraction(fraction));
    }
    let count = reject_count(fraction, decisions.len());
    let mut order: Vec<usize> = (0..decisions.len()).collect();
    order.sort_by(|&a, &b| decisions[a].fp().total_cmp(&decisions[b].fp()));
    for &i in &order[..count] {
        decisions[i].rejected = true;
    }
    Ok(count)
}

/// One row of a threshold sweep over non-rejected samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    /// Samples whose top probability is below the threshold.
    pub n_below: usize,
    /// Below-threshold samples whose top class is correct.
    pub first_correct_below: usize,
    /// Below-threshold samples whose second class is correct.
    pub second_correct_below: usize,
    /// Below-threshold samples whose top class is wrong.
    pub first_wrong_below: usize,
    /// Class candidates to examine: one per sample plus one per below-threshold sample.
    pub n_considered: usize,
    pub acc_fuzzy: f64,
}

impl SweepRow {
    pub const TSV_HEADER: &'static str =
        "threshold\tn_below\tfirst_correct_below\tsecond_correct_below\tfirst_wrong_below\tn_considered\tacc_fuzzy";

    pub fn to_tsv(&self) -> String {
        format!(
            "{:.2}\t{}\t{}\t{}\t{}\t{}\t{:.6}",
            self.threshold,
            self.n_below,
            self.first_correct_below,
            self.second_correct_below,
            self.first_wrong_below,
            self.n_considered,
            self.acc_fuzzy
        )
    }
}

/// Fuzzy accuracy at each threshold: a sample counts as correct when its top
/// class is right, or when it is below the threshold and its second class is
/// right. Rejected samples are skipped.
pub fn sweep(
    decisions: &[FuzzyDecision],
    labels: &[ClassLabel],
    thresholds: &[f64],
) -> Result<Vec<SweepRow>, FuzzyError> {
    if decisions.len() != labels.len() {
        return Err(FuzzyError::Length {
            decisions: decisions.len(),
            labels: labels.len(),
        });
    }
    if let Some(&t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(FuzzyError::Threshold(t));
    }
    let kept: Vec<(&FuzzyDecision, ClassLabel)> = decisions
        .iter()
        .zip(labels.iter().copied())
        .filter(|(d, _)| !d.rejected)
        .collect();
    let n = kept.len();
    let rows = thresholds
        .iter()
        .map(|&t| {
            let (mut n_below, mut first_ok, mut second_ok, mut above_ok) = (0, 0, 0, 0);
            for (d, label) in &kept {
                let top_ok = d.primary == *label;
                if below(d.fp(), t) {
                    n_below += 1;
                    first_ok += usize::from(top_ok);
                    second_ok += usize::from(d.second_class() == Some(*label));
                } else {
                    above_ok += usize::from(top_ok);
                }
            }
            let correct = above_ok + first_ok + second_ok;
            SweepRow {
                threshold: t,
                n_below,
                first_correct_below: first_ok,
                second_correct_below: second_ok,
                first_wrong_below: n_below - first_ok,
                n_considered: n + n_below,
                acc_fuzzy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            }
        })
        .collect();
    Ok(rows)
}

/// Among top-1 misclassified samples, counts those with `fp + sp` below
/// `sum_threshold` and the fraction of them whose true class ranks third.
pub fn recall_rate(misclassified: &[(FuzzyDecision, ClassLabel)], sum_threshold: f64) -> (usize, f64) {
    let flagged: Vec<_> = misclassified
        .iter()
        .filter(|(d, _)| rescue_condition(d, sum_threshold))
        .collect();
    if flagged.is_empty() {
        return (0, 0.0);
    }
    let recalled = flagged
        .iter()
        .filter(|(d, truth)| d.third_class() == Some(*truth))
        .count();
    (flagged.len(), recalled as f64 / flagged.len() as f64)
}

/// Top-`k` accuracy over non-rejected decisions.
pub fn top_k_accuracy(decisions: &[FuzzyDecision], labels: &[ClassLabel], k: usize) -> f64 {
    let kept: Vec<_> = decisions
        .iter()
        .zip(labels)
        .filter(|(d, _)| !d.rejected)
        .collect();
    if kept.is_empty() {
        return 0.0;
    }
    let hits = kept
        .iter()
        .filter(|(d, l)| d.ranked.iter().take(k).any(|r| r.0 == **l))
        .count();
    hits as f64 / kept.len() as f64
}
