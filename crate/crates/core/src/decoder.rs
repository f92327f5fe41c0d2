//! Decoding eigenvectors into figure/ground rank, boundaries and segments.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use num_complex::Complex64;

use crate::eigensolver::{fix_gauge, EmbeddingResult};
use crate::stencil::GridDomain;
use crate::{Error, Result};

/// Default floor on eigenvalues when weighting eigenvector gradients.
pub const LAMBDA_FLOOR: f64 = 1e-6;

/// Per-pixel figure/ground rank in radians; larger is more figural.
#[derive(Clone, Debug, PartialEq)]
pub struct RankMap {
    pub domain: GridDomain,
    pub theta: Vec<f64>,
}

impl RankMap {
    pub fn new(domain: GridDomain, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "rank map has {} values for {} pixels",
                theta.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, theta })
    }

    /// `max - min` of the ranks.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .theta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        hi - lo
    }
}

/// Soft boundary strength per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMap {
    pub domain: GridDomain,
    pub strength: Vec<f64>,
}

impl BoundaryMap {
    pub fn new(domain: GridDomain, strength: Vec<f64>) -> Result<Self> {
        if strength.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "boundary map has {} values for {} pixels",
                strength.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, strength })
    }

    pub fn max(&self) -> f64 {
        self.strength.iter().cloned().fold(0.0, f64::max)
    }

    /// Copy scaled so the maximum is 1 (unchanged if all zero).
    pub fn normalized(&self) -> Self {
        let max = self.max();
        if max == 0.0 {
            return self.clone();
        }
        Self {
            domain: self.domain,
            strength: self.strength.iter().map(|s| s / max).collect(),
        }
    }
}

/// A partition of the grid into 4-connected regions labelled `0..regions`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentationMap {
    domain: GridDomain,
    labels: Vec<u32>,
    regions: usize,
}

impl SegmentationMap {
    /// Validates that labels are dense in `0..regions` and every region is
    /// 4-connected.
    pub fn new(domain: GridDomain, labels: Vec<u32>, regions: usize) -> Result<Self> {
        if labels.len() != domain.len() {
            return Err(Error::InvalidSegmentation(format!(
                "{} labels for {} pixels",
                labels.len(),
                domain.len()
            )));
        }
        if let Some(p) = labels.iter().position(|&l| l as usize >= regions) {
            return Err(Error::InvalidSegmentation(format!(
                "label {} at pixel {p} exceeds region count {regions}",
                labels[p]
            )));
        }
        let mut seen = vec![false; regions];
        labels.iter().for_each(|&l| seen[l as usize] = true);
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidSegmentation(format!("region {r} is empty")));
        }
        let components = Self::from_partition(domain, &labels)?;
        if components.regions != regions {
            return Err(Error::InvalidSegmentation(format!(
                "{regions} labels but {} connected regions",
                components.regions
            )));
        }
        Ok(Self { domain, labels, regions })
    }

    /// Splits an arbitrary labelling into 4-connected components, numbered in
    /// row-major order of first appearance.
    pub fn from_partition<T: PartialEq>(domain: GridDomain, raw: &[T]) -> Result<Self> {
        if raw.len() != domain.len() {
            return Err(Error::InvalidSegmentation(format!(
                "{} labels for {} pixels",
                raw.len(),
                domain.len()
            )));
        }
        let mut labels = vec![u32::MAX; raw.len()];
        let mut regions = 0u32;
        let mut queue = VecDeque::new();
        for start in 0..raw.len() {
            if labels[start] != u32::MAX {
                continue;
            }
            labels[start] = regions;
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                for q in domain.four_neighbors(p) {
                    if labels[q] == u32::MAX && raw[q] == raw[p] {
                        labels[q] = regions;
                        queue.push_back(q);
                    }
                }
            }
            regions += 1;
        }
        Ok(Self { domain, labels, regions: regions as usize })
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn region_count(&self) -> usize {
        self.regions
    }

    pub fn label(&self, p: usize) -> usize {
        self.labels[p] as usize
    }

    /// Pixel indices of each region, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.regions];
        for (p, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(p);
        }
        out
    }
}

/// Watershed regions plus an ultrametric merge tree over them.
///
/// Nodes `0..base.region_count()` are the base regions; each merge creates a
/// new node. `level[node]` is the merge strength that created it (0 for
/// leaves).
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationHierarchy {
    pub base: SegmentationMap,
    pub parent: Vec<Option<usize>>,
    pub level: Vec<f64>,
}

impl SegmentationHierarchy {
    /// Merge strengths of the internal nodes, in merge order.
    pub fn merge_levels(&self) -> &[f64] {
        &self.level[self.base.region_count()..]
    }
}

/// Figure/ground rank `θ(p) = arg z₀(p)` of the gauge-fixed leading
/// eigenvector.
pub fn fg_order(domain: GridDomain, emb: &EmbeddingResult) -> Result<RankMap> {
    let z0 = emb
        .eigenvectors
        .first()
        .ok_or(Error::TooFewEigenvectors { needed: 1, found: 0 })?;
    let mut z = z0.clone();
    fix_gauge(&mut z);
    RankMap::new(domain, z.iter().map(|v| v.arg()).collect())
}

/// Gradient of one complex field: central differences inside, one-sided at
/// borders.
fn gradient_magnitude(domain: GridDomain, z: &[Complex64]) -> Vec<f64> {
    let (h, w) = (domain.height(), domain.width());
    let diff = |lo: usize, hi: usize, span: f64| (z[hi] - z[lo]) / span;
    (0..domain.len())
        .map(|p| {
            let (r, c) = domain.coords(p);
            let gx = match (c > 0, c + 1 < w) {
                (true, true) => diff(p - 1, p + 1, 2.0),
                (false, true) => diff(p, p + 1, 1.0),
                (true, false) => diff(p - 1, p, 1.0),
                (false, false) => Complex64::new(0.0, 0.0),
            };
            let gy = match (r > 0, r + 1 < h) {
                (true, true) => diff(p - w, p + w, 2.0),
                (false, true) => diff(p, p + w, 1.0),
                (true, false) => diff(p - w, p, 1.0),
                (false, false) => Complex64::new(0.0, 0.0),
            };
            (gx.norm_sqr() + gy.norm_sqr()).sqrt()
        })
        .collect()
}

/// Soft boundaries `Σ_{k≥1} ‖∇z_k‖ / √max(λ_k, floor)`.
pub fn spectral_boundaries(domain: GridDomain, emb: &EmbeddingResult, lambda_floor: f64) -> Result<BoundaryMap> {
    if emb.len() < 2 {
        return Err(Error::TooFewEigenvectors { needed: 2, found: emb.len() });
    }
    let mut strength = vec![0.0; domain.len()];
    for (z, &lambda) in emb.eigenvectors.iter().zip(&emb.eigenvalues).skip(1) {
        if z.len() != domain.len() {
            return Err(Error::DomainMismatch(format!("eigenvector of length {} for {:?}", z.len(), domain)));
        }
        let weight = 1.0 / lambda.max(lambda_floor).sqrt();
        for (s, g) in strength.iter_mut().zip(gradient_magnitude(domain, z)) {
            *s += weight * g;
        }
    }
    BoundaryMap::new(domain, strength)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Regional minima: plateaus with no strictly lower 4-neighbor, labelled in
/// row-major order. Other pixels get `u32::MAX`.
fn regional_minima(domain: GridDomain, v: &[f64]) -> (Vec<u32>, u32) {
    let mut markers = vec![u32::MAX; v.len()];
    let mut visited = vec![false; v.len()];
    let mut count = 0;
    let mut plateau = Vec::new();
    for start in 0..v.len() {
        if visited[start] {
            continue;
        }
        plateau.clear();
        plateau.push(start);
        visited[start] = true;
        let mut minimum = true;
        let mut i = 0;
        while i < plateau.len() {
            let p = plateau[i];
            i += 1;
            for q in domain.four_neighbors(p) {
                if v[q] < v[p] {
                    minimum = false;
                } else if v[q] == v[p] && !visited[q] {
                    visited[q] = true;
                    plateau.push(q);
                }
            }
        }
        if minimum {
            for &p in &plateau {
                markers[p] = count;
            }
            count += 1;
        }
    }
    (markers, count)
}

/// Meyer flooding from regional minima, then agglomerative merging of
/// adjacent basins by ascending mean arc strength.
///
/// An arc is the set of 4-adjacent pixel pairs straddling two basins; each
/// pair contributes the larger of its two boundary strengths.
pub fn watershed_hierarchy(bmap: &BoundaryMap) -> Result<SegmentationHierarchy> {
    let domain = bmap.domain;
    let v = &bmap.strength;
    if let Some(p) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::DomainMismatch(format!("non-finite boundary strength at pixel {p}")));
    }
    let (mut labels, _) = regional_minima(domain, v);

    let mut heap: BinaryHeap<Reverse<(Key, usize)>> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != u32::MAX)
        .map(|(p, _)| Reverse((Key(v[p]), p)))
        .collect();
    while let Some(Reverse((_, p))) = heap.pop() {
        for q in domain.four_neighbors(p) {
            if labels[q] == u32::MAX {
                labels[q] = labels[p];
                heap.push(Reverse((Key(v[q]), q)));
            }
        }
    }
    let base = SegmentationMap::from_partition(domain, &labels)?;
    let k = base.region_count();

    // arcs between adjacent basins: (sum, count)
    let mut arcs: Vec<BTreeMap<usize, (f64, usize)>> = vec![BTreeMap::new(); k];
    for p in 0..domain.len() {
        let (r, c) = domain.coords(p);
        let right = (c + 1 < domain.width()).then(|| p + 1);
        let down = (r + 1 < domain.height()).then(|| p + domain.width());
        for q in [right, down].into_iter().flatten() {
            let (a, b) = (base.label(p), base.label(q));
            if a != b {
                let s = v[p].max(v[q]);
                for (x, y) in [(a, b), (b, a)] {
                    let e = arcs[x].entry(y).or_insert((0.0, 0));
                    e.0 += s;
                    e.1 += 1;
                }
            }
        }
    }

    let mut parent = vec![None; k];
    let mut level = vec![0.0; k];
    let mut active = vec![true; k];
    let mut queue: BinaryHeap<Reverse<(Key, usize, usize)>> = BinaryHeap::new();
    for (a, nbrs) in arcs.iter().enumerate() {
        for (&b, &(sum, count)) in nbrs {
            if a < b {
                queue.push(Reverse((Key(sum / count as f64), a, b)));
            }
        }
    }
    let mut current = 0.0f64;
    while let Some(Reverse((Key(strength), a, b))) = queue.pop() {
        if !active[a] || !active[b] {
            continue;
        }
        current = current.max(strength);
        let c = parent.len();
        parent.push(None);
        level.push(current);
        active.push(true);
        parent[a] = Some(c);
        parent[b] = Some(c);
        active[a] = false;
        active[b] = false;

        let mut merged = std::mem::take(&mut arcs[a]);
        for (x, (sum, count)) in std::mem::take(&mut arcs[b]) {
            let e = merged.entry(x).or_insert((0.0, 0));
            e.0 += sum;
            e.1 += count;
        }
        merged.remove(&a);
        merged.remove(&b);
        for (&x, &(sum, count)) in &merged {
            arcs[x].remove(&a);
            arcs[x].remove(&b);
            arcs[x].insert(c, (sum, count));
            queue.push(Reverse((Key(sum / count as f64), x, c)));
        }
        arcs.push(merged);
    }
    Ok(SegmentationHierarchy { base, parent, level })
}

/// Partition obtained by merging every arc weaker than `level`.
pub fn cut_hierarchy(h: &SegmentationHierarchy, level: f64) -> SegmentationMap {
    let k = h.base.region_count();
    let root_of: Vec<usize> = (0..k)
        .map(|mut node| {
            while let Some(p) = h.parent[node] {
                if h.level[p] < level {
                    node = p;
                } else {
                    break;
                }
            }
            node
        })
        .collect();
    let raw: Vec<usize> = h.base.labels().iter().map(|&l| root_of[l as usize]).collect();
    SegmentationMap::from_partition(h.base.domain(), &raw).expect("domain matches")
}

/// Lower median of a non-empty slice.
pub(crate) fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

/// Per-region median rank (lower middle element for even counts).
pub fn transfer_fg(rank: &RankMap, seg: &SegmentationMap) -> Result<Vec<f64>> {
    if rank.domain != seg.domain() {
        return Err(Error::DomainMismatch(format!("{:?} vs {:?}", rank.domain, seg.domain())));
    }
    Ok(seg
        .members()
        .into_iter()
        .map(|pixels| {
            let mut vals: Vec<f64> = pixels.iter().map(|&p| rank.theta[p]).collect();
            lower_median(&mut vals)
        })
        .collect())
}
