//! Pixel grid, multiscale neighbor stencil and relation maps.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rectangular pixel grid. Pixel `p = row * width + col`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDomain {
    height: usize,
    width: usize,
}

impl GridDomain {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDomain { height, width });
        }
        Ok(Self { height, width })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    pub fn coords(&self, p: usize) -> (usize, usize) {
        debug_assert!(p < self.len());
        (p / self.width, p % self.width)
    }

    /// 4-connected neighbors of `p`, in the order up, left, right, down.
    pub fn four_neighbors(&self, p: usize) -> impl Iterator<Item = usize> {
        let (r, c) = self.coords(p);
        let w = self.width;
        let up = (r > 0).then(|| p - w);
        let left = (c > 0).then(|| p - 1);
        let right = (c + 1 < w).then(|| p + 1);
        let down = (r + 1 < self.height).then(|| p + w);
        [up, left, right, down].into_iter().flatten()
    }
}

/// A pixel displacement `(dy, dx)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Offset {
    pub dy: i32,
    pub dx: i32,
}

impl Offset {
    pub const fn new(dy: i32, dx: i32) -> Self {
        Self { dy, dx }
    }

    /// Chebyshev radius.
    pub fn radius(&self) -> u32 {
        self.dy.unsigned_abs().max(self.dx.unsigned_abs())
    }

    pub fn negated(&self) -> Self {
        Self::new(-self.dy, -self.dx)
    }

    fn sort_key(&self) -> (u32, i32, i32) {
        (self.radius(), self.dy, self.dx)
    }
}

/// Ordered set of offsets, closed under negation.
///
/// Offsets are kept sorted by `(radius, dy, dx)` so that serialized relation
/// maps are bit-stable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    offsets: Vec<Offset>,
}

impl Stencil {
    pub fn new(mut offsets: Vec<Offset>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidStencil("no offsets".into()));
        }
        offsets.sort_by_key(Offset::sort_key);
        for pair in offsets.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::InvalidStencil(format!("duplicate offset {:?}", pair[0])));
            }
        }
        for o in &offsets {
            if o.dy == 0 && o.dx == 0 {
                return Err(Error::InvalidStencil("zero offset".into()));
            }
            if offsets.binary_search_by_key(&o.negated().sort_key(), Offset::sort_key).is_err() {
                return Err(Error::InvalidStencil(format!("{o:?} has no negation")));
            }
        }
        Ok(Self { offsets })
    }

    /// The 8-neighborhood ring at each of the given radii.
    pub fn with_radii(radii: &[u32]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(8 * radii.len());
        for &r in radii {
            if r == 0 {
                return Err(Error::InvalidStencil("radius 0".into()));
            }
            let r = r as i32;
            for dy in [-r, 0, r] {
                for dx in [-r, 0, r] {
                    if dy != 0 || dx != 0 {
                        offsets.push(Offset::new(dy, dx));
                    }
                }
            }
        }
        Self::new(offsets)
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn position(&self, offset: Offset) -> Option<usize> {
        self.offsets
            .binary_search_by_key(&offset.sort_key(), Offset::sort_key)
            .ok()
    }

    /// For each offset index, the index of its negation.
    pub fn negation_table(&self) -> Vec<usize> {
        self.offsets
            .iter()
            .map(|o| self.position(o.negated()).expect("stencil is closed under negation"))
            .collect()
    }
}

/// The 24-offset stencil: 8 directions at radii 1, 4 and 16.
pub fn default_stencil() -> Stencil {
    Stencil::with_radii(&[1, 4, 16]).expect("default radii are valid")
}

/// Pixel at `p + offset`, or `None` when it falls outside the grid.
///
/// Panics if `p` is not a pixel of `domain`.
pub fn neighbor_of(domain: GridDomain, p: usize, offset: Offset) -> Option<usize> {
    assert!(p < domain.len(), "pixel {p} outside {domain:?}");
    let (r, c) = domain.coords(p);
    let r = r as i64 + offset.dy as i64;
    let c = c as i64 + offset.dx as i64;
    if r < 0 || c < 0 || r >= domain.height as i64 || c >= domain.width as i64 {
        None
    } else {
        Some(domain.index(r as usize, c as usize))
    }
}

/// Per-pixel, per-offset boundary probability `b` and figural probability `f`.
///
/// Both tensors are laid out `[offset][row][col]`. `f(p, q)` is the
/// probability that `q` is figure with respect to `p`, given a boundary
/// between them. Values at pairs whose neighbor falls off the grid are stored
/// but never read.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationMap {
    domain: GridDomain,
    stencil: Stencil,
    b: Vec<f32>,
    f: Vec<f32>,
}

impl RelationMap {
    pub fn new(domain: GridDomain, stencil: Stencil, b: Vec<f32>, f: Vec<f32>) -> Result<Self> {
        let expected = domain.len() * stencil.len();
        if b.len() != expected || f.len() != expected {
            return Err(Error::InvalidRelationMap(format!(
                "expected {expected} values per tensor, got b={} f={}",
                b.len(),
                f.len()
            )));
        }
        for (name, t) in [("b", &b), ("f", &f)] {
            if let Some(i) = t.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidRelationMap(format!(
                    "{name}[{i}] = {} outside [0, 1]",
                    t[i]
                )));
            }
        }
        Ok(Self { domain, stencil, b, f })
    }

    /// A relation map with constant `b` and `f` everywhere.
    pub fn constant(domain: GridDomain, stencil: Stencil, b: f32, f: f32) -> Result<Self> {
        let len = domain.len() * stencil.len();
        Self::new(domain, stencil, vec![b; len], vec![f; len])
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn b_tensor(&self) -> &[f32] {
        &self.b
    }

    pub fn f_tensor(&self) -> &[f32] {
        &self.f
    }

    pub fn b(&self, k: usize, p: usize) -> f64 {
        self.b[k * self.domain.len() + p] as f64
    }

    pub fn f(&self, k: usize, p: usize) -> f64 {
        self.f[k * self.domain.len() + p] as f64
    }
}

/// Boundary probability `e(p)`: the mean of `b` over the radius-1 ring.
///
/// Only in-grid neighbors enter the mean, so border pixels average over fewer
/// than eight values. A pixel with no in-grid ring neighbor gets 0.
pub fn boundary_prob(rel: &RelationMap) -> Result<Vec<f64>> {
    let stencil = rel.stencil();
    let ring: Vec<usize> = (-1..=1)
        .flat_map(|dy| (-1..=1).map(move |dx| Offset::new(dy, dx)))
        .filter(|o| o.dy != 0 || o.dx != 0)
        .map(|o| {
            stencil.position(o).ok_or_else(|| {
                Error::Config(format!("stencil lacks radius-1 offset ({}, {})", o.dy, o.dx))
            })
        })
        .collect::<Result<_>>()?;
    let domain = rel.domain();
    let offsets = stencil.offsets();
    Ok((0..domain.len())
        .map(|p| {
            let (sum, count) = ring
                .iter()
                .filter(|&&k| neighbor_of(domain, p, offsets[k]).is_some())
                .fold((0.0, 0usize), |(s, c), &k| (s + rel.b(k, p), c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        })
        .collect())
}
