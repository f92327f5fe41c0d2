//! Synthetic layered scenes with known segmentation, depth order and
//! boundary ownership.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoder::{RankMap, SegmentationMap};
use crate::groundtruth::OwnershipLabels;
use crate::io::Image;
use crate::stencil::GridDomain;
use crate::{Error, Result};

/// Attempts per shape before [`random_scene`] gives up on placing it.
const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primitive {
    /// Axis-aligned rectangle covering rows `top..top+height` and columns
    /// `left..left+width`.
    Rect { top: usize, left: usize, height: usize, width: usize },
    /// Pixels whose centers lie within `radius` of `(cy, cx)`.
    Disk { cy: f64, cx: f64, radius: f64 },
}

impl Primitive {
    fn contains(&self, r: usize, c: usize) -> bool {
        match *self {
            Primitive::Rect { top, left, height, width } => {
                (top..top + height).contains(&r) && (left..left + width).contains(&c)
            }
            Primitive::Disk { cy, cx, radius } => {
                let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                dy * dy + dx * dx <= radius * radius
            }
        }
    }

    fn within(&self, domain: GridDomain) -> bool {
        let (h, w) = (domain.height() as f64, domain.width() as f64);
        match *self {
            Primitive::Rect { top, left, height, width } => {
                height > 0 && width > 0 && top + height <= domain.height() && left + width <= domain.width()
            }
            Primitive::Disk { cy, cx, radius } => {
                radius > 0.0 && cy - radius >= -0.5 && cx - radius >= -0.5 && cy + radius <= h - 0.5 && cx + radius <= w - 0.5
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub primitive: Primitive,
    /// Layer depth; larger is nearer the viewer. The background is 0.
    pub depth: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub shapes: Vec<Shape>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn domain(&self) -> Result<GridDomain> {
        GridDomain::new(self.height, self.width)
    }

    pub fn validate(&self) -> Result<GridDomain> {
        let domain = self.domain()?;
        let mut depths = std::collections::BTreeSet::new();
        for (i, s) in self.shapes.iter().enumerate() {
            if s.depth == 0 {
                return Err(Error::InvalidScene(format!("shape {i} uses the background depth 0")));
            }
            if !depths.insert(s.depth) {
                return Err(Error::InvalidScene(format!("depth {} used twice", s.depth)));
            }
            if !s.primitive.within(domain) {
                return Err(Error::InvalidScene(format!("shape {i} leaves the image")));
            }
        }
        Ok(domain)
    }
}

/// Ground truth of a rendered scene.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub segmentation: SegmentationMap,
    /// Layer depth of the visible surface at each pixel.
    pub rank: RankMap,
    pub ownership: OwnershipLabels,
    /// Index into `shapes` of the visible shape per pixel, `None` for
    /// background.
    pub visible: Vec<Option<usize>>,
}

/// Rasterizes the scene front to back: each pixel shows the deepest-numbered
/// (nearest) shape covering it. Regions are connected components of the
/// visible shape, and every region boundary is owned by its nearer side.
pub fn render(spec: &SceneSpec) -> Result<Scene> {
    let domain = spec.validate()?;
    let mut order: Vec<usize> = (0..spec.shapes.len()).collect();
    order.sort_by_key(|&i| spec.shapes[i].depth);
    let mut visible = vec![None; domain.len()];
    for &i in &order {
        let prim = spec.shapes[i].primitive;
        for (p, v) in visible.iter_mut().enumerate() {
            let (r, c) = domain.coords(p);
            if prim.contains(r, c) {
                *v = Some(i);
            }
        }
    }
    let mut seen = vec![false; spec.shapes.len()];
    visible.iter().flatten().for_each(|&i| seen[i] = true);
    if let Some(index) = seen.iter().position(|s| !s) {
        return Err(Error::OccludedShape { index });
    }
    let depth: Vec<f64> = visible
        .iter()
        .map(|v| v.map_or(0.0, |i| spec.shapes[i].depth as f64))
        .collect();
    let segmentation = SegmentationMap::from_partition(domain, &visible)?;
    let mut ownership = OwnershipLabels::new(domain);
    for p in 0..domain.len() {
        for q in domain.four_neighbors(p).filter(|&q| q > p) {
            if visible[p] != visible[q] {
                let owner = if depth[p] > depth[q] { p } else { q };
                ownership.set_owner(p, q, Some(owner))?;
            }
        }
    }
    Ok(Scene { segmentation, rank: RankMap::new(domain, depth)?, ownership, visible })
}

/// A gray rendering: background 0.1, each depth at a distinct level.
pub fn render_image(spec: &SceneSpec, scene: &Scene) -> Image {
    let level = |depth: u32| 0.1 + 0.8 * (depth as f64 * 0.618_033_988_749_895).fract();
    let data = scene
        .visible
        .iter()
        .map(|v| v.map_or(0.1, |i| level(spec.shapes[i].depth)))
        .collect();
    Image::gray(scene.rank.domain, data)
}

fn random_primitive(rng: &mut ChaCha8Rng, domain: GridDomain) -> Primitive {
    let (h, w) = (domain.height(), domain.width());
    let min_dim = h.min(w) as f64;
    let size = |rng: &mut ChaCha8Rng| ((rng.random_range(0.1..=0.6) * min_dim).round() as usize).max(1);
    if rng.random_bool(0.5) {
        let (height, width) = (size(rng), size(rng));
        Primitive::Rect {
            top: rng.random_range(0..=h - height),
            left: rng.random_range(0..=w - width),
            height,
            width,
        }
    } else {
        let diameter = size(rng);
        let radius = diameter as f64 / 2.0;
        // keep the bounding square inside the image
        let cy = rng.random_range(0..=h - diameter) as f64 + radius - 0.5;
        let cx = rng.random_range(0..=w - diameter) as f64 + radius - 0.5;
        Primitive::Disk { cy, cx, radius }
    }
}

/// Random scene with up to `n_shapes` rectangles and disks at depths
/// `1..=n_shapes`, sized 10-60% of the smaller image side.
///
/// Shapes are drawn until none is fully occluded; a shape that cannot be
/// placed after many attempts is dropped, which only happens on tiny grids.
pub fn random_scene(domain: GridDomain, n_shapes: usize, seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SceneSpec { height: domain.height(), width: domain.width(), shapes: Vec::new(), seed };
    for _ in 0..n_shapes {
        let depth = spec.shapes.len() as u32 + 1;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let primitive = random_primitive(&mut rng, domain);
            spec.shapes.push(Shape { primitive, depth });
            if render(&spec).is_ok() {
                break;
            }
            spec.shapes.pop();
        }
    }
    spec
}
