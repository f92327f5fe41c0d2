//! Binary tensor formats and netpbm image import/export.
//!
//! Every format starts with a 4-byte ASCII magic followed by little-endian
//! `u32` header fields:
//!
//! | magic  | header                          | payload                                                   |
//! |--------|---------------------------------|-----------------------------------------------------------|
//! | `AFF1` | h, w, K, K × (i32 dy, i32 dx)   | per offset: `f32` plane `b`, then `f32` plane `f`         |
//! | `EIG1` | h, w, m                         | per vector: `f64` eigenvalue, then h·w × (`f32` re, im)   |
//! | `SEG1` | h, w, region count              | h·w × `u32` label                                         |
//! | `RNK1` | h, w                            | h·w × `f32` rank                                          |
//! | `OWN1` | h, w                            | h·(w-1) horizontal then (h-1)·w vertical edge bytes       |
//!
//! Planes are row-major. OWN1 edge bytes are 0 (unlabeled), 1 (the pixel
//! with the smaller index owns the edge) or 2 (the other pixel owns it).

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::decoder::{RankMap, SegmentationMap};
use crate::eigensolver::EmbeddingResult;
use crate::groundtruth::{EdgeLabel, OwnershipLabels};
use crate::stencil::{GridDomain, Offset, RelationMap, Stencil};
use crate::Result;

/// Parse failure with the byte offset where it was detected.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("truncated file: needed {needed} bytes at byte {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },

    #[error("invalid value at byte {offset}: {reason}")]
    Invalid { offset: usize, reason: String },

    #[error("{extra} trailing bytes after byte {offset}")]
    TrailingBytes { offset: usize, extra: usize },

    #[error("unsupported image format {magic:?}; convert to binary PGM (P5) or PPM (P6), e.g. `convert in.png out.ppm`")]
    UnsupportedImage { magic: String },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated { offset: self.pos, needed: n, available });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let found = self.take(4)?;
        if found != expected {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32, FormatError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32_plane(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| self.invalid("size overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn invalid(&self, reason: impl Into<String>) -> FormatError {
        FormatError::Invalid { offset: self.pos, reason: reason.into() }
    }

    fn domain(&mut self) -> Result<GridDomain, FormatError> {
        let at = self.pos;
        let h = self.u32()? as usize;
        let w = self.u32()? as usize;
        GridDomain::new(h, w).map_err(|_| FormatError::Invalid { offset: at, reason: format!("empty domain {h}x{w}") })
    }

    fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.bytes.len() {
            return Err(FormatError::TrailingBytes { offset: self.pos, extra: self.bytes.len() - self.pos });
        }
        Ok(())
    }
}

fn header(magic: &[u8; 4], domain: GridDomain) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(&(domain.height() as u32).to_le_bytes());
    out.extend_from_slice(&(domain.width() as u32).to_le_bytes());
    out
}

fn extend_f32(out: &mut Vec<u8>, values: impl IntoIterator<Item = f32>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_aff1(rel: &RelationMap) -> Vec<u8> {
    let mut out = header(b"AFF1", rel.domain());
    let offsets = rel.stencil().offsets();
    out.extend_from_slice(&(offsets.len() as u32).to_le_bytes());
    for o in offsets {
        out.extend_from_slice(&o.dy.to_le_bytes());
        out.extend_from_slice(&o.dx.to_le_bytes());
    }
    let n = rel.domain().len();
    for k in 0..offsets.len() {
        extend_f32(&mut out, rel.b_tensor()[k * n..(k + 1) * n].iter().copied());
        extend_f32(&mut out, rel.f_tensor()[k * n..(k + 1) * n].iter().copied());
    }
    out
}

pub fn decode_aff1(bytes: &[u8]) -> Result<RelationMap> {
    let mut cur = Cursor::new(bytes);
    cur.magic(b"AFF1")?;
    let domain = cur.domain()?;
    let table_at = cur.pos;
    let k = cur.u32()? as usize;
    let mut offsets = Vec::with_capacity(k.min(1 << 16));
    for _ in 0..k {
        offsets.push(Offset::new(cur.i32()?, cur.i32()?));
    }
    let stencil = Stencil::new(offsets.clone())
        .map_err(|e| FormatError::Invalid { offset: table_at, reason: e.to_string() })?;
    if stencil.offsets() != offsets.as_slice() {
        return Err(FormatError::Invalid {
            offset: table_at,
            reason: "offset table is not sorted by (radius, dy, dx)".into(),
        }
        .into());
    }
    let n = domain.len();
    let mut b = Vec::with_capacity(n * k);
    let mut f = Vec::with_capacity(n * k);
    for _ in 0..k {
        for target in [&mut b, &mut f] {
            let at = cur.pos;
            let plane = cur.f32_plane(n)?;
            if let Some(i) = plane.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(FormatError::Invalid {
                    offset: at + 4 * i,
                    reason: format!("probability {} outside [0, 1]", plane[i]),
                }
                .into());
            }
            target.extend(plane);
        }
    }
    cur.finish()?;
    RelationMap::new(domain, stencil, b, f)
}

/// Eigenvectors are stored in single precision; residuals are not stored.
pub fn encode_eig1(domain: GridDomain, emb: &EmbeddingResult) -> Vec<u8> {
    let mut out = header(b"EIG1", domain);
    out.extend_from_slice(&(emb.len() as u32).to_le_bytes());
    for (lambda, z) in emb.eigenvalues.iter().zip(&emb.eigenvectors) {
        out.extend_from_slice(&lambda.to_le_bytes());
        extend_f32(&mut out, z.iter().flat_map(|v| [v.re as f32, v.im as f32]));
    }
    out
}

/// Decoded residuals are left empty.
pub fn decode_eig1(bytes: &[u8]) -> Result<(GridDomain, EmbeddingResult)> {
    let mut cur = Cursor::new(bytes);
    cur.magic(b"EIG1")?;
    let domain = cur.domain()?;
    let m = cur.u32()? as usize;
    let mut eigenvalues = Vec::new();
    let mut eigenvectors = Vec::new();
    for _ in 0..m {
        eigenvalues.push(cur.f64()?);
        let raw = cur.f32_plane(2 * domain.len())?;
        eigenvectors.push(raw.chunks_exact(2).map(|c| Complex64::new(c[0] as f64, c[1] as f64)).collect());
    }
    cur.finish()?;
    Ok((domain, EmbeddingResult { eigenvalues, eigenvectors, residuals: Vec::new() }))
}

pub fn encode_seg1(seg: &SegmentationMap) -> Vec<u8> {
    let mut out = header(b"SEG1", seg.domain());
    out.extend_from_slice(&(seg.region_count() as u32).to_le_bytes());
    for &l in seg.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_seg1(bytes: &[u8]) -> Result<SegmentationMap> {
    let mut cur = Cursor::new(bytes);
    cur.magic(b"SEG1")?;
    let domain = cur.domain()?;
    let count_at = cur.pos;
    let regions = cur.u32()? as usize;
    let mut labels = Vec::with_capacity(domain.len());
    for _ in 0..domain.len() {
        let at = cur.pos;
        let l = cur.u32()?;
        if l as usize >= regions {
            return Err(FormatError::Invalid {
                offset: at,
                reason: format!("label {l} not below declared region count {regions}"),
            }
            .into());
        }
        labels.push(l);
    }
    cur.finish()?;
    SegmentationMap::new(domain, labels, regions)
        .map_err(|e| FormatError::Invalid { offset: count_at, reason: e.to_string() }.into())
}

pub fn encode_rnk1(rank: &RankMap) -> Vec<u8> {
    let mut out = header(b"RNK1", rank.domain);
    extend_f32(&mut out, rank.theta.iter().map(|&t| t as f32));
    out
}

pub fn decode_rnk1(bytes: &[u8]) -> Result<RankMap> {
    let mut cur = Cursor::new(bytes);
    cur.magic(b"RNK1")?;
    let domain = cur.domain()?;
    let at = cur.pos;
    let plane = cur.f32_plane(domain.len())?;
    if let Some(i) = plane.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::Invalid { offset: at + 4 * i, reason: "non-finite rank".into() }.into());
    }
    cur.finish()?;
    RankMap::new(domain, plane.into_iter().map(f64::from).collect())
}

pub fn encode_own1(own: &OwnershipLabels) -> Vec<u8> {
    let mut out = header(b"OWN1", own.domain());
    for labels in [own.horizontal(), own.vertical()] {
        out.extend(labels.iter().map(|l| match l {
            EdgeLabel::Unlabeled => 0u8,
            EdgeLabel::FirstOwns => 1,
            EdgeLabel::SecondOwns => 2,
        }));
    }
    out
}

pub fn decode_own1(bytes: &[u8]) -> Result<OwnershipLabels> {
    let mut cur = Cursor::new(bytes);
    cur.magic(b"OWN1")?;
    let domain = cur.domain()?;
    let (h, w) = (domain.height(), domain.width());
    let mut planes = Vec::with_capacity(2);
    for len in [h * (w - 1), (h - 1) * w] {
        let at = cur.pos;
        let raw = cur.take(len)?;
        let plane = raw
            .iter()
            .enumerate()
            .map(|(i, &byte)| match byte {
                0 => Ok(EdgeLabel::Unlabeled),
                1 => Ok(EdgeLabel::FirstOwns),
                2 => Ok(EdgeLabel::SecondOwns),
                other => Err(FormatError::Invalid { offset: at + i, reason: format!("edge label {other}") }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        planes.push(plane);
    }
    cur.finish()?;
    let vertical = planes.pop().unwrap();
    let horizontal = planes.pop().unwrap();
    OwnershipLabels::from_planes(domain, horizontal, vertical)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(path)?)
}

pub fn read_aff1(path: impl AsRef<Path>) -> Result<RelationMap> {
    decode_aff1(&read_file(path.as_ref())?)
}

pub fn write_aff1(path: impl AsRef<Path>, rel: &RelationMap) -> Result<()> {
    Ok(fs::write(path, encode_aff1(rel))?)
}

pub fn read_eig1(path: impl AsRef<Path>) -> Result<(GridDomain, EmbeddingResult)> {
    decode_eig1(&read_file(path.as_ref())?)
}

pub fn write_eig1(path: impl AsRef<Path>, domain: GridDomain, emb: &EmbeddingResult) -> Result<()> {
    Ok(fs::write(path, encode_eig1(domain, emb))?)
}

pub fn read_seg1(path: impl AsRef<Path>) -> Result<SegmentationMap> {
    decode_seg1(&read_file(path.as_ref())?)
}

pub fn write_seg1(path: impl AsRef<Path>, seg: &SegmentationMap) -> Result<()> {
    Ok(fs::write(path, encode_seg1(seg))?)
}

pub fn read_rnk1(path: impl AsRef<Path>) -> Result<RankMap> {
    decode_rnk1(&read_file(path.as_ref())?)
}

pub fn write_rnk1(path: impl AsRef<Path>, rank: &RankMap) -> Result<()> {
    Ok(fs::write(path, encode_rnk1(rank))?)
}

pub fn read_own1(path: impl AsRef<Path>) -> Result<OwnershipLabels> {
    decode_own1(&read_file(path.as_ref())?)
}

pub fn write_own1(path: impl AsRef<Path>, own: &OwnershipLabels) -> Result<()> {
    Ok(fs::write(path, encode_own1(own))?)
}

/// A gray (1 channel) or RGB (3 channel) image with values in `[0, 1]`,
/// row-major and channel-interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub domain: GridDomain,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn gray(domain: GridDomain, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), domain.len());
        Self { domain, channels: 1, data }
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }
}

/// Netpbm header parser: whitespace-separated decimal fields with `#`
/// comments, ending in a single whitespace byte.
fn netpbm_field(bytes: &[u8], pos: &mut usize) -> Result<usize, FormatError> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&c| c != b'\n') {
                    *pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(FormatError::Truncated { offset: *pos, needed: 1, available: 0 }),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(FormatError::Invalid { offset: start, reason: "expected a decimal header field".into() })
}

pub fn decode_netpbm(bytes: &[u8]) -> Result<Image> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let channels = match magic {
        b"P5" => 1,
        b"P6" => 3,
        _ => return Err(FormatError::UnsupportedImage { magic: String::from_utf8_lossy(magic).into_owned() }.into()),
    };
    let mut pos = 2;
    let width = netpbm_field(bytes, &mut pos)?;
    let height = netpbm_field(bytes, &mut pos)?;
    let maxval_at = pos;
    let maxval = netpbm_field(bytes, &mut pos)?;
    if !(1..=65535).contains(&maxval) {
        return Err(FormatError::Invalid { offset: maxval_at, reason: format!("maxval {maxval}") }.into());
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(FormatError::Invalid { offset: pos, reason: "expected whitespace before raster".into() }.into());
    }
    pos += 1;
    let domain = GridDomain::new(height, width)
        .map_err(|_| FormatError::Invalid { offset: 2, reason: format!("empty image {width}x{height}") })?;
    let samples = domain.len() * channels;
    let wide = maxval > 255;
    let mut cur = Cursor { bytes, pos };
    let raw = cur.take(samples * if wide { 2 } else { 1 })?;
    let maxval = maxval as f64;
    let data = if wide {
        raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / maxval).collect()
    } else {
        raw.iter().map(|&v| v as f64 / maxval).collect()
    };
    Ok(Image { domain, channels, data })
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit P5 or P6 depending on the channel count.
pub fn encode_netpbm(image: &Image) -> Vec<u8> {
    let magic = if image.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.domain.width(), image.domain.height()).into_bytes();
    out.extend(image.data.iter().map(|&v| quantize(v)));
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_netpbm(&read_file(path.as_ref())?)
}

pub fn write_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    Ok(fs::write(path, encode_netpbm(image))?)
}

/// Single-channel PFM, little-endian, bottom row first.
pub fn encode_pfm(domain: GridDomain, values: &[f64]) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", domain.width(), domain.height()).into_bytes();
    for r in (0..domain.height()).rev() {
        let row = &values[r * domain.width()..(r + 1) * domain.width()];
        extend_f32(&mut out, row.iter().map(|&v| v as f32));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::default_stencil;
    use crate::Error;
    use proptest::prelude::*;

    fn dom(h: usize, w: usize) -> GridDomain {
        GridDomain::new(h, w).unwrap()
    }

    fn format_err(r: Result<impl std::fmt::Debug>) -> FormatError {
        match r {
            Err(Error::Format(e)) => e,
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn aff1_layout() {
        let d = dom(1, 2);
        let st = Stencil::with_radii(&[1]).unwrap();
        let rel = RelationMap::constant(d, st, 0.25, 0.5).unwrap();
        let bytes = encode_aff1(&rel);
        assert_eq!(&bytes[..4], b"AFF1");
        assert_eq!(bytes.len(), 16 + 8 * 8 + 8 * 2 * 2 * 4);
        // first offset (-1,-1), then first b plane
        assert_eq!(&bytes[16..24], &[255, 255, 255, 255, 255, 255, 255, 255]);
        assert_eq!(&bytes[80..84], &0.25f32.to_le_bytes());
        assert_eq!(&bytes[88..92], &0.5f32.to_le_bytes());
        assert_eq!(decode_aff1(&bytes).unwrap(), rel);
    }

    #[test]
    fn truncation_reports_offset() {
        let d = dom(2, 2);
        let rel = RelationMap::constant(d, default_stencil(), 0.0, 0.5).unwrap();
        let bytes = encode_aff1(&rel);
        let cut = &bytes[..bytes.len() - 3];
        assert_eq!(
            format_err(decode_aff1(cut)),
            FormatError::Truncated { offset: bytes.len() - 16, needed: 16, available: 13 }
        );
        assert!(matches!(format_err(decode_aff1(&bytes[..2])), FormatError::Truncated { offset: 0, .. }));
        let mut wrong = bytes.clone();
        wrong[3] = b'2';
        assert!(matches!(format_err(decode_aff1(&wrong)), FormatError::BadMagic { .. }));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(format_err(decode_aff1(&long)), FormatError::TrailingBytes { .. }));
    }

    #[test]
    fn seg1_label_out_of_range() {
        let mut bytes = b"SEG1".to_vec();
        for v in [1u32, 2, 1, 0, 1] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(
            format_err(decode_seg1(&bytes)),
            FormatError::Invalid { offset: 20, reason: "label 1 not below declared region count 1".into() }
        );
    }

    #[test]
    fn seg1_rejects_disconnected_region() {
        let mut bytes = b"SEG1".to_vec();
        for v in [1u32, 3, 2, 0, 1, 0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(format_err(decode_seg1(&bytes)), FormatError::Invalid { offset: 12, .. }));
    }

    #[test]
    fn netpbm_examples() {
        let img = decode_netpbm(b"P5\n1 1\n255\n\xff").unwrap();
        assert_eq!(img.data, vec![1.0]);
        let img = decode_netpbm(b"P5 # comment\n2 1 65535\n\x80\x00\xff\xff").unwrap();
        assert_eq!(img.data, vec![32768.0 / 65535.0, 1.0]);
        assert!(matches!(
            format_err(decode_netpbm(b"P7\nWIDTH 1\n")),
            FormatError::UnsupportedImage { .. }
        ));
        assert!(matches!(
            format_err(decode_netpbm(b"\x89PNG\r\n")),
            FormatError::UnsupportedImage { .. }
        ));
    }

    #[test]
    fn pfm_header() {
        let bytes = encode_pfm(dom(2, 1), &[1.0, 2.0]);
        assert_eq!(&bytes[..10], b"Pf\n1 2\n-1.");
        assert_eq!(&bytes[bytes.len() - 8..bytes.len() - 4], &2.0f32.to_le_bytes());
    }

    proptest! {
        #[test]
        fn aff1_round_trip(h in 1usize..5, w in 1usize..5, vals in proptest::collection::vec(0.0f32..=1.0, 2 * 24 * 16)) {
            let d = dom(h, w);
            let n = 24 * d.len();
            let rel = RelationMap::new(d, default_stencil(), vals[..n].to_vec(), vals[n..2 * n].to_vec()).unwrap();
            let bytes = encode_aff1(&rel);
            let back = decode_aff1(&bytes).unwrap();
            prop_assert_eq!(encode_aff1(&back), bytes);
            prop_assert_eq!(back, rel);
        }

        #[test]
        fn eig1_round_trip(h in 1usize..5, w in 1usize..5, m in 0usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = dom(h, w);
            let emb = EmbeddingResult {
                eigenvalues: (0..m).map(|_| rng.random::<f64>()).collect(),
                eigenvectors: (0..m)
                    .map(|_| (0..d.len()).map(|_| Complex64::new(rng.random::<f32>() as f64, -(rng.random::<f32>() as f64))).collect())
                    .collect(),
                residuals: Vec::new(),
            };
            let bytes = encode_eig1(d, &emb);
            let (d2, back) = decode_eig1(&bytes).unwrap();
            prop_assert_eq!(d2, d);
            prop_assert_eq!(&back, &emb);
            prop_assert_eq!(encode_eig1(d2, &back), bytes);
        }

        #[test]
        fn seg1_and_rnk1_round_trip(h in 1usize..6, w in 1usize..6, raw in proptest::collection::vec(0u8..3, 25), ranks in proptest::collection::vec(-4.0f32..4.0, 25)) {
            let d = dom(h, w);
            let seg = SegmentationMap::from_partition(d, &raw[..d.len()]).unwrap();
            let bytes = encode_seg1(&seg);
            let back = decode_seg1(&bytes).unwrap();
            prop_assert_eq!(encode_seg1(&back), bytes);
            prop_assert_eq!(back, seg);

            let rank = RankMap::new(d, ranks[..d.len()].iter().map(|&v| v as f64).collect()).unwrap();
            let bytes = encode_rnk1(&rank);
            let back = decode_rnk1(&bytes).unwrap();
            prop_assert_eq!(encode_rnk1(&back), bytes);
            prop_assert_eq!(back, rank);
        }

        #[test]
        fn netpbm_round_trip(h in 1usize..5, w in 1usize..5, rgb in any::<bool>(), vals in proptest::collection::vec(any::<u8>(), 48)) {
            let d = dom(h, w);
            let channels = if rgb { 3 } else { 1 };
            let img = Image { domain: d, channels, data: vals[..d.len() * channels].iter().map(|&v| v as f64 / 255.0).collect() };
            let back = decode_netpbm(&encode_netpbm(&img)).unwrap();
            prop_assert_eq!(back, img);
        }

        #[test]
        fn truncated_files_never_panic(cut in 0usize..200) {
            let d = dom(2, 3);
            let rel = RelationMap::constant(d, Stencil::with_radii(&[1]).unwrap(), 0.5, 0.5).unwrap();
            let bytes = encode_aff1(&rel);
            let cut = cut.min(bytes.len() - 1);
            prop_assert!(decode_aff1(&bytes[..cut]).is_err());
        }
    }
}
