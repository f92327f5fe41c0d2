//! Region-ordering benchmark: R-ACC, B-ACC, B-ACC-50 and B-ACC-25.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::decoder::{transfer_fg, RankMap, SegmentationMap};
use crate::{Error, Result};

/// Two 4-adjacent regions (`a < b`) and the pixels of either region that
/// touch the other.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionPair {
    pub a: usize,
    pub b: usize,
    pub boundary: Vec<usize>,
}

/// Adjacent region pairs, sorted by `(a, b)`, each with its boundary pixels
/// ascending.
pub fn adjacent_region_pairs(seg: &SegmentationMap) -> Vec<RegionPair> {
    let domain = seg.domain();
    let mut pairs: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for p in 0..domain.len() {
        let (r, c) = domain.coords(p);
        let right = (c + 1 < domain.width()).then(|| p + 1);
        let down = (r + 1 < domain.height()).then(|| p + domain.width());
        for q in [right, down].into_iter().flatten() {
            let (lp, lq) = (seg.label(p), seg.label(q));
            if lp != lq {
                let set = pairs.entry((lp.min(lq), lp.max(lq))).or_default();
                set.insert(p);
                set.insert(q);
            }
        }
    }
    pairs
        .into_iter()
        .map(|((a, b), set)| RegionPair { a, b, boundary: set.into_iter().collect() })
        .collect()
}

/// `correct / total`, undefined when nothing was evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Score {
    pub correct: usize,
    pub total: usize,
}

impl Score {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }

    fn add(&mut self, correct: bool, weight: usize) {
        self.total += weight;
        if correct {
            self.correct += weight;
        }
    }

    pub fn merge(&mut self, other: &Score) {
        self.correct += other.correct;
        self.total += other.total;
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.accuracy() {
            Some(a) => write!(f, "{a:.4} ({}/{})", self.correct, self.total),
            None => write!(f, "undefined (0 evaluated)"),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            accuracy: Option<f64>,
            correct: usize,
            total: usize,
        }
        Repr { accuracy: self.accuracy(), correct: self.correct, total: self.total }.serialize(s)
    }
}

/// Accuracies for one image. R-ACC counts region pairs; the B-ACC variants
/// count boundary pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BenchmarkReport {
    pub r_acc: Score,
    pub b_acc: Score,
    pub b_acc_50: Score,
    pub b_acc_25: Score,
}

impl BenchmarkReport {
    pub fn scores(&self) -> [(&'static str, Score); 4] {
        [
            ("R-ACC", self.r_acc),
            ("B-ACC", self.b_acc),
            ("B-ACC-50", self.b_acc_50),
            ("B-ACC-25", self.b_acc_25),
        ]
    }
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, score) in self.scores() {
            writeln!(f, "{name:<9} {score}")?;
        }
        Ok(())
    }
}

/// Regions in the foreground-most `fraction`, by gt rank descending then id.
fn foreground(gt: &[f64], fraction: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..gt.len()).collect();
    order.sort_by(|&x, &y| gt[y].total_cmp(&gt[x]).then(x.cmp(&y)));
    let count = (fraction * gt.len() as f64).ceil() as usize;
    let mut mask = vec![false; gt.len()];
    order.iter().take(count).for_each(|&r| mask[r] = true);
    mask
}

/// Compares region orderings of `pred` and `gt`, both transferred onto `seg`
/// by region median.
///
/// Pairs whose gt ranks tie are skipped; pairs whose predicted ranks tie
/// count as wrong. A boundary enters B-ACC-50/25 when either of its regions
/// is among the foreground-most 50%/25% of regions.
pub fn evaluate(pred: &RankMap, gt: &RankMap, seg: &SegmentationMap) -> Result<BenchmarkReport> {
    if pred.domain != gt.domain {
        return Err(Error::DomainMismatch(format!("{:?} vs {:?}", pred.domain, gt.domain)));
    }
    let pr = transfer_fg(pred, seg)?;
    let gr = transfer_fg(gt, seg)?;
    let fg50 = foreground(&gr, 0.5);
    let fg25 = foreground(&gr, 0.25);
    let mut report = BenchmarkReport::default();
    for pair in adjacent_region_pairs(seg) {
        let (a, b) = (pair.a, pair.b);
        let truth = gr[a].total_cmp(&gr[b]);
        if truth.is_eq() {
            continue;
        }
        let correct = pr[a].total_cmp(&pr[b]) == truth && pr[a] != pr[b];
        let len = pair.boundary.len();
        report.r_acc.add(correct, 1);
        report.b_acc.add(correct, len);
        if fg50[a] || fg50[b] {
            report.b_acc_50.add(correct, len);
        }
        if fg25[a] || fg25[b] {
            report.b_acc_25.add(correct, len);
        }
    }
    Ok(report)
}

/// Dataset-level summary under both aggregation conventions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateReport {
    pub images: usize,
    /// Counts summed over images, then divided.
    pub pooled: BenchmarkReport,
    /// Mean of per-image accuracies over images where the metric is defined.
    pub per_image_mean: [Option<f64>; 4],
}

pub fn aggregate(reports: &[BenchmarkReport]) -> AggregateReport {
    let mut pooled = BenchmarkReport::default();
    let mut sums = [(0.0, 0usize); 4];
    for r in reports {
        pooled.r_acc.merge(&r.r_acc);
        pooled.b_acc.merge(&r.b_acc);
        pooled.b_acc_50.merge(&r.b_acc_50);
        pooled.b_acc_25.merge(&r.b_acc_25);
        for (slot, (_, score)) in sums.iter_mut().zip(r.scores()) {
            if let Some(a) = score.accuracy() {
                slot.0 += a;
                slot.1 += 1;
            }
        }
    }
    let per_image_mean = sums.map(|(s, n)| (n > 0).then(|| s / n as f64));
    AggregateReport { images: reports.len(), pooled, per_image_mean }
}
