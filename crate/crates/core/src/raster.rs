//! 128×128 single-pixel skeleton images.
//!
//! The bounding box maps onto pixel centers: its left/top edges land on the
//! centers of column/row 0 and its right/bottom edges on 127. Each curve is
//! sampled every quarter pixel of arc length and every sample sets the
//! nearest pixel.

use std::fmt;

use thiserror::Error;

use crate::geometry::{self, CurveSet};
use crate::keyspace::DesignKey;

pub const SIDE: usize = 128;
pub const PIXELS: usize = SIDE * SIDE;
const ROW_BYTES: usize = SIDE / 8;
pub const PACKED_BYTES: usize = SIDE * ROW_BYTES;

/// Samples per pixel of arc length.
const SAMPLES_PER_PIXEL: f64 = 4.0;

/// Threshold applied to sigmoid reconstructions before comparing images.
pub const BINARIZE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("not a binary PGM: {0}")]
    Pgm(String),
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
}

/// Binary 128×128 image, rows packed 16 bytes each with column 0 in the
/// most significant bit. Row 0 is the top.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitImage {
    packed: Vec<u8>,
    /// Key of the design this image was drawn from, if any.
    pub source: Option<String>,
}

impl fmt::Debug for BitImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BitImage")
            .field("popcount", &self.popcount())
            .field("source", &self.source)
            .finish()
    }
}

impl Default for BitImage {
    fn default() -> Self {
        Self::blank()
    }
}

impl BitImage {
    pub fn blank() -> Self {
        BitImage {
            packed: vec![0; PACKED_BYTES],
            source: None,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.packed[row * ROW_BYTES + col / 8] >> (7 - col % 8) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        let byte = &mut self.packed[row * ROW_BYTES + col / 8];
        let mask = 1u8 << (7 - col % 8);
        if on {
            *byte |= mask;
        } else {
            *byte &= !mask;
        }
    }

    pub fn popcount(&self) -> usize {
        self.packed.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Packed storage form: 128 rows × 16 bytes.
    pub fn packed(&self) -> &[u8] {
        &self.packed
    }

    pub fn from_packed(bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.len() != PACKED_BYTES {
            return Err(ImageError::Length {
                expected: PACKED_BYTES,
                got: bytes.len(),
            });
        }
        Ok(BitImage {
            packed: bytes.to_vec(),
            source: None,
        })
    }

    /// Row-major 0/1 values.
    pub fn to_unit_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; PIXELS];
        for (i, x) in v.iter_mut().enumerate() {
            if self.get(i / SIDE, i % SIDE) {
                *x = 1.0;
            }
        }
        v
    }

    /// Binarizes row-major intensities at [`BINARIZE_THRESHOLD`].
    pub fn from_intensities(values: &[f64]) -> Result<Self, ImageError> {
        if values.len() != PIXELS {
            return Err(ImageError::Length {
                expected: PIXELS,
                got: values.len(),
            });
        }
        let mut img = BitImage::blank();
        for (i, &v) in values.iter().enumerate() {
            if v >= BINARIZE_THRESHOLD {
                img.set(i / SIDE, i % SIDE, true);
            }
        }
        Ok(img)
    }

    /// Binary PGM (P5, maxval 255, pixels 0 or 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{SIDE} {SIDE}\n255\n").into_bytes();
        out.reserve(PIXELS);
        for r in 0..SIDE {
            for c in 0..SIDE {
                out.push(if self.get(r, c) { 255 } else { 0 });
            }
        }
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ImageError> {
        let bad = |m: &str| ImageError::Pgm(m.to_string());
        let mut pos = 0;
        let mut token = || -> Result<String, ImageError> {
            loop {
                match bytes.get(pos) {
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(_) => break,
                    None => return Err(bad("truncated header")),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
                pos += 1;
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token()? != "P5" {
            return Err(bad("magic is not P5"));
        }
        let w = token()?;
        let h = token()?;
        let maxval = token()?;
        if w != "128" || h != "128" {
            return Err(bad("image must be 128x128"));
        }
        if maxval != "255" {
            return Err(bad("maxval must be 255"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
        if data.len() != PIXELS {
            return Err(ImageError::Length {
                expected: PIXELS,
                got: data.len(),
            });
        }
        let mut img = BitImage::blank();
        for (i, &v) in data.iter().enumerate() {
            match v {
                0 => {}
                255 => img.set(i / SIDE, i % SIDE, true),
                other => return Err(ImageError::Pgm(format!("pixel value {other} is not 0 or 255"))),
            }
        }
        Ok(img)
    }
}

/// Set when rasterizing produced nothing to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterWarning {
    EmptyCurveSet,
}

#[derive(Debug, Clone)]
pub struct Rasterized {
    pub image: BitImage,
    pub warning: Option<RasterWarning>,
}

pub fn rasterize(curves: &CurveSet) -> Rasterized {
    let mut image = BitImage::blank();
    if curves.is_empty() {
        return Rasterized {
            image,
            warning: Some(RasterWarning::EmptyCurveSet),
        };
    }
    let bb = curves.bbox;
    let scale = (SIDE - 1) as f64 / bb.side;
    let mut stamp = |x: f64, y: f64| {
        let col = ((x - bb.min.x) * scale).round().clamp(0.0, (SIDE - 1) as f64) as usize;
        let row = ((bb.min.y + bb.side - y) * scale)
            .round()
            .clamp(0.0, (SIDE - 1) as f64) as usize;
        image.set(row, col, true);
    };
    let steps = |len: f64| ((len * scale * SAMPLES_PER_PIXEL).ceil() as usize).max(1);
    for s in &curves.segments {
        let n = steps(s.length());
        for k in 0..=n {
            let p = s.at(k as f64 / n as f64);
            stamp(p.x, p.y);
        }
    }
    for a in &curves.arcs {
        let n = steps(a.length());
        for k in 0..=n {
            let p = a.at(k as f64 / n as f64);
            stamp(p.x, p.y);
        }
    }
    Rasterized {
        image,
        warning: None,
    }
}

/// Skeleton image of the 2×2 lattice of `key`, framed so every key is drawn
/// at the same scale.
pub fn render_key(key: &DesignKey) -> BitImage {
    let curves = geometry::image_frame_for_key(key).expect("canonical keys always build");
    let mut img = rasterize(&curves).image;
    img.source = Some(key.to_string());
    img
}

/// Dice similarity coefficient, 1 when both images are blank.
pub fn dsc(a: &BitImage, b: &BitImage) -> f64 {
    let both: usize = a
        .packed
        .iter()
        .zip(&b.packed)
        .map(|(x, y)| (x & y).count_ones() as usize)
        .sum();
    let total = a.popcount() + b.popcount();
    if total == 0 {
        1.0
    } else {
        2.0 * both as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Arc, BBox, Point, Segment};

    fn frame(segments: Vec<Segment>, arcs: Vec<Arc>) -> CurveSet {
        CurveSet {
            segments,
            arcs,
            bbox: BBox {
                min: Point::new(0.0, 0.0),
                side: 20.0,
            },
            pitch: 20.0,
        }
    }

    fn seg(x0: f64, y0: f64, x1: f64, y1: f64) -> Segment {
        Segment {
            p0: Point::new(x0, y0),
            p1: Point::new(x1, y1),
        }
    }

    #[test]
    fn empty_curves_give_blank_image_with_warning() {
        let r = rasterize(&frame(vec![], vec![]));
        assert_eq!(r.image.popcount(), 0);
        assert_eq!(r.warning, Some(RasterWarning::EmptyCurveSet));
    }

    #[test]
    fn horizontal_line_fills_one_row() {
        let r = rasterize(&frame(vec![seg(0.0, 10.0, 20.0, 10.0)], vec![]));
        assert!(r.warning.is_none());
        let img = r.image;
        assert_eq!(img.popcount(), 128);
        let rows: Vec<usize> = (0..SIDE).filter(|&r| img.get(r, 0)).collect();
        assert_eq!(rows.len(), 1);
        assert!((0..SIDE).all(|c| img.get(rows[0], c)));
    }

    /// Independent pixel walk of the sampling rule for a straight line.
    fn walk(x0: f64, y0: f64, x1: f64, y1: f64) -> std::collections::BTreeSet<(i64, i64)> {
        let s = 127.0 / 20.0;
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt() * s;
        let n = (len * 4.0).ceil() as i64;
        (0..=n)
            .map(|k| {
                let t = k as f64 / n as f64;
                let x = (x0 + (x1 - x0) * t) * s;
                let y = (20.0 - (y0 + (y1 - y0) * t)) * s;
                (y.round() as i64, x.round() as i64)
            })
            .collect()
    }

    #[test]
    fn diagonal_is_thin_and_connected() {
        let img = rasterize(&frame(vec![seg(0.0, 0.0, 20.0, 20.0)], vec![])).image;
        let expected = walk(0.0, 0.0, 20.0, 20.0);
        let n = img.popcount();
        assert_eq!(n, expected.len());
        assert!((128..=182).contains(&n), "popcount {n}");
        for &(r, c) in &expected {
            assert!(img.get(r as usize, c as usize));
        }
        // 8-connected from bottom-left to top-right.
        assert!(img.get(127, 0) && img.get(0, 127));
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![(127i64, 0i64)];
        while let Some((r, c)) = stack.pop() {
            if !seen.insert((r, c)) {
                continue;
            }
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if (0..128).contains(&nr) && (0..128).contains(&nc) && img.get(nr as usize, nc as usize) {
                        stack.push((nr, nc));
                    }
                }
            }
        }
        assert!(seen.contains(&(0, 127)));
        assert_eq!(seen.len(), n);
    }

    #[test]
    fn off_axis_line_matches_walk_and_axis_lines_are_thin() {
        let img = rasterize(&frame(vec![seg(1.0, 2.0, 17.0, 9.5)], vec![])).image;
        let expected = walk(1.0, 2.0, 17.0, 9.5);
        assert_eq!(img.popcount(), expected.len());

        let img = rasterize(&frame(vec![seg(3.3, 1.0, 3.3, 19.0)], vec![])).image;
        for r in 0..SIDE {
            let count = (0..SIDE).filter(|&c| img.get(r, c)).count();
            assert!(count <= 1);
        }
    }

    #[test]
    fn dsc_values() {
        let mut a = BitImage::blank();
        let mut b = BitImage::blank();
        for i in 0..100 {
            a.set(i / 128, i % 128, true);
            b.set(i / 128, i % 128, true);
        }
        assert_eq!(dsc(&a, &a), 1.0);
        for i in 100..150 {
            b.set(i / 128, i % 128, true);
        }
        assert!((dsc(&a, &b) - 0.8).abs() < 1e-15);
        assert_eq!(dsc(&a, &b), dsc(&b, &a));
        let mut c = BitImage::blank();
        c.set(127, 127, true);
        assert_eq!(dsc(&a, &c), 0.0);
        assert_eq!(dsc(&BitImage::blank(), &BitImage::blank()), 1.0);
    }

    #[test]
    fn pgm_round_trip() {
        let key = DesignKey::parse("00231121").unwrap();
        let img = render_key(&key);
        assert!(img.popcount() > 0);
        let bytes = img.to_pgm();
        let back = BitImage::from_pgm(&bytes).unwrap();
        assert_eq!(back.packed(), img.packed());
        assert_eq!(back.to_pgm(), bytes);
        assert!(BitImage::from_pgm(b"P2\n128 128\n255\n").is_err());
        let mut bad = bytes.clone();
        let last = bad.len() - 1;
        bad[last] = 7;
        assert!(BitImage::from_pgm(&bad).is_err());
        bad.pop();
        assert!(BitImage::from_pgm(&bad).is_err());
    }

    #[test]
    fn packed_and_intensity_forms() {
        let img = render_key(&DesignKey::parse("21221110").unwrap());
        assert_eq!(BitImage::from_packed(img.packed()).unwrap().packed(), img.packed());
        let v = img.to_unit_vec();
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), img.popcount());
        assert_eq!(BitImage::from_intensities(&v).unwrap().packed(), img.packed());
        assert!(BitImage::from_packed(&[0; 10]).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        for k in ["00220000", "10331011", "11220020", "11331011", "20220000"] {
            let k = DesignKey::parse(k).unwrap();
            assert_eq!(render_key(&k).packed(), render_key(&k).packed());
        }
    }
}
