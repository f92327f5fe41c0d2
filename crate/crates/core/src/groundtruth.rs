//! Ground-truth globalization and training targets.
//!
//! Perfect short-range relations (binding inside regions, labelled ownership
//! across region boundaries) are globalized by running the embedding on them,
//! and a segmentation plus rank map is turned into per-offset `b̃`, `f̃` targets.

use num_complex::Complex64;

use crate::affinity::{finish, hermitian_operator, AffinityParams};
use crate::decoder::{fg_order, lower_median, RankMap, SegmentationMap};
use crate::eigensolver::{solve, SolverConfig};
use crate::sparse::{DegreeVector, SparseHermitianMatrix};
use crate::stencil::{neighbor_of, GridDomain, Offset, RelationMap, Stencil};
use crate::{Error, Result};

/// Ownership of one 4-adjacent pixel edge. "First" is the pixel with the
/// smaller index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    #[default]
    Unlabeled,
    FirstOwns,
    SecondOwns,
}

/// Boundary-ownership labels on the 4-adjacent pixel edges of a grid.
///
/// Horizontal edges `(r, c)-(r, c+1)` are stored row-major in an
/// `h × (w-1)` array, vertical edges `(r, c)-(r+1, c)` in an `(h-1) × w`
/// array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnershipLabels {
    domain: GridDomain,
    horizontal: Vec<EdgeLabel>,
    vertical: Vec<EdgeLabel>,
}

impl OwnershipLabels {
    /// All edges unlabeled.
    pub fn new(domain: GridDomain) -> Self {
        let (h, w) = (domain.height(), domain.width());
        Self {
            domain,
            horizontal: vec![EdgeLabel::Unlabeled; h * (w - 1)],
            vertical: vec![EdgeLabel::Unlabeled; (h - 1) * w],
        }
    }

    pub fn from_planes(domain: GridDomain, horizontal: Vec<EdgeLabel>, vertical: Vec<EdgeLabel>) -> Result<Self> {
        let own = Self::new(domain);
        if horizontal.len() != own.horizontal.len() || vertical.len() != own.vertical.len() {
            return Err(Error::DomainMismatch(format!(
                "ownership planes of {} and {} edges for {domain:?}",
                horizontal.len(),
                vertical.len()
            )));
        }
        Ok(Self { domain, horizontal, vertical })
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn horizontal(&self) -> &[EdgeLabel] {
        &self.horizontal
    }

    pub fn vertical(&self) -> &[EdgeLabel] {
        &self.vertical
    }

    /// Storage slot of the edge `p-q`, and whether `p` is the first pixel.
    fn slot(&self, p: usize, q: usize) -> Option<(bool, usize, bool)> {
        let (lo, hi) = (p.min(q), p.max(q));
        let w = self.domain.width();
        let (r, c) = self.domain.coords(lo);
        if hi == lo + 1 && c + 1 < w {
            Some((true, r * (w - 1) + c, p == lo))
        } else if hi == lo + w && hi < self.domain.len() {
            Some((false, lo, p == lo))
        } else {
            None
        }
    }

    /// Owner of the edge between 4-adjacent pixels `p` and `q`, if labelled.
    ///
    /// Panics if the pixels are not 4-adjacent.
    pub fn owner(&self, p: usize, q: usize) -> Option<usize> {
        let (horizontal, i, _) = self.slot(p, q).expect("pixels are 4-adjacent");
        let label = if horizontal { self.horizontal[i] } else { self.vertical[i] };
        match label {
            EdgeLabel::Unlabeled => None,
            EdgeLabel::FirstOwns => Some(p.min(q)),
            EdgeLabel::SecondOwns => Some(p.max(q)),
        }
    }

    /// Labels the edge `p-q` as owned by `owner` (one of the two pixels), or
    /// clears it with `None`.
    pub fn set_owner(&mut self, p: usize, q: usize, owner: Option<usize>) -> Result<()> {
        let Some((horizontal, i, _)) = self.slot(p, q) else {
            return Err(Error::InvalidOwnership { p, q, reason: "pixels are not 4-adjacent" });
        };
        let label = match owner {
            None => EdgeLabel::Unlabeled,
            Some(o) if o == p.min(q) => EdgeLabel::FirstOwns,
            Some(o) if o == p.max(q) => EdgeLabel::SecondOwns,
            Some(_) => return Err(Error::InvalidOwnership { p, q, reason: "owner is not an endpoint" }),
        };
        if horizontal {
            self.horizontal[i] = label;
        } else {
            self.vertical[i] = label;
        }
        Ok(())
    }

    /// Every labelled edge as `(first, second, owner)`.
    pub fn labeled_edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for p in 0..self.domain.len() {
            let (r, c) = self.domain.coords(p);
            let right = (c + 1 < self.domain.width()).then(|| p + 1);
            let down = (r + 1 < self.domain.height()).then(|| p + self.domain.width());
            for q in [right, down].into_iter().flatten() {
                if let Some(o) = self.owner(p, q) {
                    out.push((p, q, o));
                }
            }
        }
        out
    }

    /// Same edges with every owner swapped.
    pub fn flipped(&self) -> Self {
        let flip = |l: &EdgeLabel| match l {
            EdgeLabel::Unlabeled => EdgeLabel::Unlabeled,
            EdgeLabel::FirstOwns => EdgeLabel::SecondOwns,
            EdgeLabel::SecondOwns => EdgeLabel::FirstOwns,
        };
        Self {
            domain: self.domain,
            horizontal: self.horizontal.iter().map(flip).collect(),
            vertical: self.vertical.iter().map(flip).collect(),
        }
    }

    /// Checks that only edges between different regions carry labels.
    pub fn validate(&self, seg: &SegmentationMap) -> Result<()> {
        if seg.domain() != self.domain {
            return Err(Error::DomainMismatch(format!("{:?} vs {:?}", seg.domain(), self.domain)));
        }
        for (p, q, _) in self.labeled_edges() {
            if seg.label(p) == seg.label(q) {
                return Err(Error::InvalidOwnership { p, q, reason: "label inside a region" });
            }
        }
        Ok(())
    }
}

fn four_stencil() -> Stencil {
    Stencil::new(vec![Offset::new(-1, 0), Offset::new(0, -1), Offset::new(0, 1), Offset::new(1, 0)])
        .expect("4-neighborhood is a valid stencil")
}

/// Affinity from perfect 4-neighbor relations: unit binding inside regions,
/// angle `±params.phi` across labelled boundaries (owner in front) and no
/// entry across unlabelled ones. Wedge rescaling follows `params`.
pub fn gt_affinity(
    seg: &SegmentationMap,
    own: &OwnershipLabels,
    params: &AffinityParams,
) -> Result<(SparseHermitianMatrix, DegreeVector)> {
    params.validate()?;
    own.validate(seg)?;
    let phi = params.phi;
    let w = hermitian_operator(seg.domain(), &four_stencil(), |p, _, q| {
        if seg.label(p) == seg.label(q) {
            return Some(Complex64::new(1.0, 0.0));
        }
        // positive angle on W(p, q) means q is figure
        own.owner(p, q).map(|o| Complex64::from_polar(1.0, if o == q { phi } else { -phi }))
    })?;
    Ok(finish(w, params.wedge_rescale))
}

/// Globalized ground-truth rank map: the angle of the leading eigenvector
/// of [`gt_affinity`].
pub fn globalize(
    seg: &SegmentationMap,
    own: &OwnershipLabels,
    params: &AffinityParams,
    cfg: &SolverConfig,
) -> Result<RankMap> {
    let domain = seg.domain();
    if domain.len() == 1 {
        return RankMap::new(domain, vec![0.0]);
    }
    let (w, d) = gt_affinity(seg, own, params)?;
    let emb = solve(&w, &d, cfg)?;
    fg_order(domain, &emb)
}

/// Binary training targets over a stencil.
///
/// `b̃ = 1` exactly for in-grid pairs in different regions. `f̃` is 1 when
/// the neighbor's region ranks higher, 0 when lower, and is valid only where
/// `b̃ = 1` and the two region ranks differ.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetTensors {
    pub domain: GridDomain,
    pub stencil: Stencil,
    /// `[offset][pixel]`; 0 off the grid.
    pub b: Vec<u8>,
    pub f: Vec<u8>,
    pub f_valid: Vec<bool>,
}

impl TargetTensors {
    /// Relation map with masked `f̃` entries set to 0.5.
    pub fn to_relation_map(&self) -> Result<RelationMap> {
        let b = self.b.iter().map(|&v| v as f32).collect();
        let f = self
            .f
            .iter()
            .zip(&self.f_valid)
            .map(|(&v, &ok)| if ok { v as f32 } else { 0.5 })
            .collect();
        RelationMap::new(self.domain, self.stencil.clone(), b, f)
    }

    pub fn boundary_count(&self) -> usize {
        self.b.iter().filter(|&&v| v == 1).count()
    }

    pub fn valid_count(&self) -> usize {
        self.f_valid.iter().filter(|&&v| v).count()
    }
}

/// Per-region median ranks.
fn region_ranks(seg: &SegmentationMap, rank: &RankMap) -> Vec<f64> {
    seg.members()
        .into_iter()
        .map(|pixels| {
            let mut vals: Vec<f64> = pixels.iter().map(|&p| rank.theta[p]).collect();
            lower_median(&mut vals)
        })
        .collect()
}

pub fn make_targets(seg: &SegmentationMap, rank: &RankMap, stencil: &Stencil) -> Result<TargetTensors> {
    let domain = seg.domain();
    if rank.domain != domain {
        return Err(Error::DomainMismatch(format!("{:?} vs {:?}", rank.domain, domain)));
    }
    let ranks = region_ranks(seg, rank);
    let n = domain.len();
    let len = n * stencil.len();
    let mut b = vec![0u8; len];
    let mut f = vec![0u8; len];
    let mut f_valid = vec![false; len];
    for (k, &o) in stencil.offsets().iter().enumerate() {
        for p in 0..n {
            let Some(q) = neighbor_of(domain, p, o) else { continue };
            let (a, c) = (seg.label(p), seg.label(q));
            if a == c {
                continue;
            }
            let i = k * n + p;
            b[i] = 1;
            if ranks[c] != ranks[a] {
                f[i] = u8::from(ranks[c] > ranks[a]);
                f_valid[i] = true;
            }
        }
    }
    Ok(TargetTensors { domain, stencil: stencil.clone(), b, f, f_valid })
}
