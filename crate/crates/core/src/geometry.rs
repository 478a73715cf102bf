//! Skeleton geometry of lattice cross-sections.
//!
//! A unit cell is built in a square of side `s` from its design key, then
//! tessellated 2×2 and scaled so the lattice fits a 20 mm square box. Curves
//! are line segments and circular arcs in mm.
//!
//! Edge waves are drawn as two tangent semicircles per segment, bulging to
//! alternating sides, so they reach outside the period square. The bounding
//! box of a built cell is therefore the period square grown symmetrically by
//! whatever the curves overhang (zero for straight-walled designs).

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::keyspace::{DesignKey, EdgeStyle, Interior, VertexStyle};

/// Coordinate tolerance used for deduplication and containment checks (mm).
pub const TOL: f64 = 1e-9;

/// Arc discretization density for intersection tests.
pub const ARC_POINTS_PER_TURN: f64 = 64.0;

/// Side of the square box the 2×2 lattice is scaled into (mm).
pub const BOX_SIDE_MM: f64 = 20.0;
/// Extrusion height of the lattice (mm).
pub const HEIGHT_MM: f64 = 10.0;
pub const TILES: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("design key {0} is not canonical")]
    NonCanonical(String),
    #[error("cell side must be positive, got {0}")]
    BadSide(f64),
    #[error("unsupported tessellation {nx}x{ny}: the box is square, nx must equal ny and be >= 1")]
    UnsupportedTiling { nx: usize, ny: usize },
    #[error("degenerate geometry: relative density {0} >= 1")]
    Degenerate(f64),
    #[error("wall thickness must be positive, got {0}")]
    BadThickness(f64),
    #[error("curve set is empty")]
    Empty,
    #[error("curve file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Fixed ratios of the unit-cell construction, relative to the cell side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProportions {
    /// Corner offset of chamfers and radius of vertex arcs.
    pub corner: f64,
    /// Edge-wave sagitta as a fraction of the segment length.
    pub bulge: f64,
    /// Interior circle radius.
    pub circle: f64,
}

pub const PROPORTIONS: CellProportions = CellProportions {
    corner: 1.0 / 6.0,
    bulge: 0.25,
    circle: 0.25,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    fn close(self, o: Point, tol: f64) -> bool {
        (self.x - o.x).abs() <= tol && (self.y - o.y).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub p0: Point,
    pub p1: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.p0.dist(self.p1)
    }

    pub fn at(&self, t: f64) -> Point {
        self.p0.add(self.p1.sub(self.p0).scale(t))
    }

    fn same_as(&self, o: &Segment, tol: f64) -> bool {
        (self.p0.close(o.p0, tol) && self.p1.close(o.p1, tol))
            || (self.p0.close(o.p1, tol) && self.p1.close(o.p0, tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub center: Point,
    pub radius: f64,
    /// Start angle in radians.
    pub start: f64,
    /// Signed sweep in radians, non-zero, |sweep| <= 2π.
    pub sweep: f64,
}

impl Arc {
    pub fn circle(center: Point, radius: f64) -> Self {
        Arc {
            center,
            radius,
            start: 0.0,
            sweep: TAU,
        }
    }

    pub fn length(&self) -> f64 {
        self.radius * self.sweep.abs()
    }

    /// Point at fraction `t` of the sweep.
    pub fn at(&self, t: f64) -> Point {
        let a = self.start + self.sweep * t;
        Point::new(
            self.center.x + self.radius * a.cos(),
            self.center.y + self.radius * a.sin(),
        )
    }

    pub fn endpoints(&self) -> (Point, Point) {
        (self.at(0.0), self.at(1.0))
    }

    /// Same arc with positive sweep and start angle in [0, 2π).
    fn normalized(&self) -> (Point, f64, f64, f64) {
        let (start, sweep) = if self.sweep < 0.0 {
            (self.start + self.sweep, -self.sweep)
        } else {
            (self.start, self.sweep)
        };
        (self.center, self.radius, start.rem_euclid(TAU), sweep)
    }

    fn same_as(&self, o: &Arc, tol: f64) -> bool {
        let (c0, r0, s0, w0) = self.normalized();
        let (c1, r1, s1, w1) = o.normalized();
        let ds = (s0 - s1).abs();
        let angle_match = ds <= tol || (TAU - ds).abs() <= tol;
        c0.close(c1, tol) && (r0 - r1).abs() <= tol && (w0 - w1).abs() <= tol && angle_match
    }

    /// Axis-aligned extents: endpoints plus any cardinal directions swept.
    fn extents(&self) -> (Point, Point) {
        let (a, b) = self.endpoints();
        let mut lo = Point::new(a.x.min(b.x), a.y.min(b.y));
        let mut hi = Point::new(a.x.max(b.x), a.y.max(b.y));
        let (_, _, start, sweep) = self.normalized();
        for k in 0..4 {
            let card = k as f64 * PI / 2.0;
            if (card - start).rem_euclid(TAU) <= sweep {
                let p = Point::new(
                    self.center.x + self.radius * card.cos(),
                    self.center.y + self.radius * card.sin(),
                );
                lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        (lo, hi)
    }

    /// Builds the arc over chord `a`→`b` whose midpoint bulges by `sagitta`
    /// along the unit normal `normal`.
    fn through_chord(a: Point, b: Point, normal: Point, sagitta: f64) -> Arc {
        let chord = a.dist(b);
        let radius = (chord * chord / 4.0 + sagitta * sagitta) / (2.0 * sagitta);
        let mid = a.add(b).scale(0.5);
        let center = mid.sub(normal.scale(radius - sagitta));
        let apex = mid.add(normal.scale(sagitta));
        let ang = |p: Point| (p.y - center.y).atan2(p.x - center.x);
        let a0 = ang(a);
        let ccw = (ang(b) - a0).rem_euclid(TAU);
        let to_apex = (ang(apex) - a0).rem_euclid(TAU);
        let sweep = if to_apex < ccw { ccw } else { ccw - TAU };
        Arc {
            center,
            radius,
            start: a0,
            sweep,
        }
    }
}

/// Square bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub side: f64,
}

impl BBox {
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.y >= self.min.y - tol
            && p.x <= self.min.x + self.side + tol
            && p.y <= self.min.y + self.side + tol
    }
}

/// Skeleton of a lattice cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub segments: Vec<Segment>,
    pub arcs: Vec<Arc>,
    pub bbox: BBox,
    /// Translation period of the repeating tile (mm).
    pub pitch: f64,
}

impl CurveSet {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.arcs.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum::<f64>()
            + self.arcs.iter().map(Arc::length).sum::<f64>()
    }

    /// Tight extents of all curves.
    pub fn extents(&self) -> Option<(Point, Point)> {
        let mut it = self
            .segments
            .iter()
            .map(|s| {
                (
                    Point::new(s.p0.x.min(s.p1.x), s.p0.y.min(s.p1.y)),
                    Point::new(s.p0.x.max(s.p1.x), s.p0.y.max(s.p1.y)),
                )
            })
            .chain(self.arcs.iter().map(Arc::extents));
        let first = it.next()?;
        Some(it.fold(first, |(lo, hi), (a, b)| {
            (
                Point::new(lo.x.min(a.x), lo.y.min(a.y)),
                Point::new(hi.x.max(b.x), hi.y.max(b.y)),
            )
        }))
    }

    /// True when every curve lies inside the bounding box.
    pub fn within_bbox(&self, tol: f64) -> bool {
        match self.extents() {
            None => true,
            Some((lo, hi)) => self.bbox.contains(lo, tol) && self.bbox.contains(hi, tol),
        }
    }

    fn push_segment(&mut self, p0: Point, p1: Point) {
        self.segments.push(Segment { p0, p1 });
    }

    /// Adds a straight or wavy wall from `a` to `b`. Waves bulge along
    /// `normal` in their first half and against it in the second.
    fn push_wall(&mut self, a: Point, b: Point, style: EdgeStyle, normal: Point) {
        match style {
            EdgeStyle::Straight => self.push_segment(a, b),
            EdgeStyle::TwoArcs => {
                let mid = a.add(b).scale(0.5);
                let sagitta = PROPORTIONS.bulge * a.dist(b);
                self.arcs.push(Arc::through_chord(a, mid, normal, sagitta));
                self.arcs
                    .push(Arc::through_chord(mid, b, normal.scale(-1.0), sagitta));
            }
        }
    }

    fn translated(&self, dx: f64, dy: f64) -> CurveSet {
        let d = Point::new(dx, dy);
        CurveSet {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    p0: s.p0.add(d),
                    p1: s.p1.add(d),
                })
                .collect(),
            arcs: self
                .arcs
                .iter()
                .map(|a| Arc {
                    center: a.center.add(d),
                    ..*a
                })
                .collect(),
            bbox: BBox {
                min: self.bbox.min.add(d),
                side: self.bbox.side,
            },
            pitch: self.pitch,
        }
    }
}

/// One corner of the cell: its position and the unit directions of the two
/// walls leaving it.
struct Corner {
    at: Point,
    a: Point,
    b: Point,
}

fn corners(s: f64) -> [Corner; 4] {
    let (ex, ey) = (Point::new(1.0, 0.0), Point::new(0.0, 1.0));
    [
        Corner { at: Point::new(0.0, 0.0), a: ex, b: ey },
        Corner { at: Point::new(s, 0.0), a: ex.scale(-1.0), b: ey },
        Corner { at: Point::new(s, s), a: ex.scale(-1.0), b: ey.scale(-1.0) },
        Corner { at: Point::new(0.0, s), a: ex, b: ey.scale(-1.0) },
    ]
}

/// Builds the unit-cell skeleton for a canonical key in a cell of side `side`.
pub fn build_unit_cell(key: &DesignKey, side: f64) -> Result<CurveSet, GeometryError> {
    if !key.is_canonical() {
        return Err(GeometryError::NonCanonical(key.to_string()));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(GeometryError::BadSide(side));
    }
    let s = side;
    let c = if key.vertex == VertexStyle::AsIs {
        0.0
    } else {
        PROPORTIONS.corner * s
    };
    let mut cell = CurveSet {
        segments: Vec::new(),
        arcs: Vec::new(),
        bbox: BBox {
            min: Point::new(0.0, 0.0),
            side: s,
        },
        pitch: s,
    };

    // Vertex treatment. `diag_end` is where an X support meets the corner.
    let mut diag_end = [Point::new(0.0, 0.0); 4];
    for (i, k) in corners(s).iter().enumerate() {
        let pa = k.at.add(k.a.scale(c));
        let pb = k.at.add(k.b.scale(c));
        let inward = k.a.add(k.b).scale(std::f64::consts::FRAC_1_SQRT_2);
        diag_end[i] = match key.vertex {
            VertexStyle::AsIs => k.at,
            VertexStyle::StraightEdge => {
                let style = if key.vertex_sub == 0 {
                    EdgeStyle::Straight
                } else {
                    EdgeStyle::TwoArcs
                };
                cell.push_wall(pa, pb, style, inward);
                pa.add(pb).scale(0.5)
            }
            VertexStyle::Arc => {
                let center = if key.vertex_sub == 0 {
                    k.at
                } else {
                    k.at.add(k.a.scale(c)).add(k.b.scale(c))
                };
                let a0 = (pa.y - center.y).atan2(pa.x - center.x);
                let a1 = (pb.y - center.y).atan2(pb.x - center.x);
                let mut sweep = (a1 - a0).rem_euclid(TAU);
                if sweep > PI {
                    sweep -= TAU;
                }
                let arc = Arc {
                    center,
                    radius: c,
                    start: a0,
                    sweep,
                };
                cell.arcs.push(arc);
                arc.at(0.5)
            }
        };
    }

    // Bounding edges between the vertex treatments, split into segments.
    let walls = [
        (Point::new(c, 0.0), Point::new(s - c, 0.0), key.h_segments, key.h_style, Point::new(0.0, 1.0)),
        (Point::new(c, s), Point::new(s - c, s), key.h_segments, key.h_style, Point::new(0.0, 1.0)),
        (Point::new(0.0, c), Point::new(0.0, s - c), key.v_segments, key.v_style, Point::new(1.0, 0.0)),
        (Point::new(s, c), Point::new(s, s - c), key.v_segments, key.v_style, Point::new(1.0, 0.0)),
    ];
    for (from, to, n, style, normal) in walls {
        let n = n as usize;
        for j in 0..n {
            let a = Segment { p0: from, p1: to }.at(j as f64 / n as f64);
            let b = Segment { p0: from, p1: to }.at((j + 1) as f64 / n as f64);
            cell.push_wall(a, b, style, normal);
        }
    }

    match key.interior {
        Interior::None => {}
        Interior::Plus => {
            cell.push_segment(Point::new(s / 2.0, 0.0), Point::new(s / 2.0, s));
            cell.push_segment(Point::new(0.0, s / 2.0), Point::new(s, s / 2.0));
        }
        Interior::X => {
            cell.push_segment(diag_end[0], diag_end[2]);
            cell.push_segment(diag_end[1], diag_end[3]);
        }
    }
    if key.circle {
        cell.arcs
            .push(Arc::circle(Point::new(s / 2.0, s / 2.0), PROPORTIONS.circle * s));
    }

    if let Some((lo, hi)) = cell.extents() {
        let over = [-lo.x, -lo.y, hi.x - s, hi.y - s]
            .into_iter()
            .fold(0.0f64, f64::max);
        if over > 0.0 {
            cell.bbox = BBox {
                min: Point::new(-over, -over),
                side: s + 2.0 * over,
            };
        }
    }
    Ok(cell)
}

/// Repeats `cell` on an `nx`×`ny` grid of its pitch, dropping curves that
/// coincide with one already placed.
pub fn tessellate(cell: &CurveSet, nx: usize, ny: usize) -> Result<CurveSet, GeometryError> {
    if nx != ny || nx == 0 {
        return Err(GeometryError::UnsupportedTiling { nx, ny });
    }
    let mut out = CurveSet {
        segments: Vec::new(),
        arcs: Vec::new(),
        bbox: BBox {
            min: cell.bbox.min,
            side: cell.bbox.side + (nx - 1) as f64 * cell.pitch,
        },
        pitch: nx as f64 * cell.pitch,
    };
    for j in 0..ny {
        for i in 0..nx {
            let copy = cell.translated(i as f64 * cell.pitch, j as f64 * cell.pitch);
            for s in copy.segments {
                if !out.segments.iter().any(|o| o.same_as(&s, TOL)) {
                    out.segments.push(s);
                }
            }
            for a in copy.arcs {
                if !out.arcs.iter().any(|o| o.same_as(&a, TOL)) {
                    out.arcs.push(a);
                }
            }
        }
    }
    Ok(out)
}

/// Scales uniformly about the origin so the bounding box side becomes `target_side`.
pub fn scale_to_box(curves: &CurveSet, target_side: f64) -> Result<CurveSet, GeometryError> {
    if curves.is_empty() {
        return Err(GeometryError::Empty);
    }
    if !(target_side > 0.0) {
        return Err(GeometryError::BadSide(target_side));
    }
    let k = target_side / curves.bbox.side;
    Ok(CurveSet {
        segments: curves
            .segments
            .iter()
            .map(|s| Segment {
                p0: s.p0.scale(k),
                p1: s.p1.scale(k),
            })
            .collect(),
        arcs: curves
            .arcs
            .iter()
            .map(|a| Arc {
                center: a.center.scale(k),
                radius: a.radius * k,
                ..*a
            })
            .collect(),
        bbox: BBox {
            min: curves.bbox.min.scale(k),
            side: target_side,
        },
        pitch: curves.pitch * k,
    })
}

/// The 2×2 lattice for `key`, scaled into the 20 mm box.
pub fn lattice_for_key(key: &DesignKey) -> Result<CurveSet, GeometryError> {
    let cell = build_unit_cell(key, BOX_SIDE_MM / TILES as f64)?;
    let tiled = tessellate(&cell, TILES, TILES)?;
    scale_to_box(&tiled, BOX_SIDE_MM)
}

/// Margin (relative to the cell side) around the 2×2 tile in skeleton images.
/// It covers the largest wave overhang, so every key is imaged at one scale.
pub const IMAGE_MARGIN: f64 = 0.125;

/// The 2×2 lattice for `key` framed for imaging: a fixed margin around the
/// tile instead of the tight box, so part positions agree across keys.
pub fn image_frame_for_key(key: &DesignKey) -> Result<CurveSet, GeometryError> {
    let s = 1.0;
    let cell = build_unit_cell(key, s)?;
    let mut tiled = tessellate(&cell, TILES, TILES)?;
    let m = IMAGE_MARGIN * s;
    tiled.bbox = BBox {
        min: Point::new(-m, -m),
        side: TILES as f64 * s + 2.0 * m,
    };
    debug_assert!(tiled.within_bbox(1e-12));
    Ok(tiled)
}

/// Frames an arbitrary 2×2 cross-section the way [`image_frame_for_key`]
/// frames key lattices: centred on its box, with the same margin relative to
/// the tile period (never cropping a curve).
pub fn image_frame(curves: &CurveSet) -> CurveSet {
    let b = &curves.bbox;
    let center = Point::new(b.min.x + 0.5 * b.side, b.min.y + 0.5 * b.side);
    let side = (curves.pitch * (1.0 + 2.0 * IMAGE_MARGIN / TILES as f64)).max(b.side);
    let mut out = curves.clone();
    out.bbox = BBox {
        min: Point::new(center.x - 0.5 * side, center.y - 0.5 * side),
        side,
    };
    out
}

/// Scalar descriptors of a skeleton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomFeatures {
    pub total_length: f64,
    pub relative_density: f64,
    pub max_free_span: f64,
    pub n_intersections: usize,
}

fn arc_polyline(a: &Arc) -> Vec<Point> {
    let n = ((ARC_POINTS_PER_TURN * a.sweep.abs() / TAU).ceil() as usize).max(1);
    (0..=n).map(|i| a.at(i as f64 / n as f64)).collect()
}

/// Intersection of segments `p`–`q` and `r`–`s` within tolerance `tol`.
/// Collinear overlaps report the overlapping endpoints.
fn segment_hits(p: Point, q: Point, r: Point, s: Point, tol: f64, out: &mut Vec<Point>) {
    let d1 = q.sub(p);
    let d2 = s.sub(r);
    let cross = |a: Point, b: Point| a.x * b.y - a.y * b.x;
    let denom = cross(d1, d2);
    let l1 = d1.norm();
    let l2 = d2.norm();
    let on_seg = |a: Point, b: Point, x: Point| -> bool {
        let ab = b.sub(a);
        let len = ab.norm();
        if len == 0.0 {
            return a.close(x, tol);
        }
        let t = ((x.x - a.x) * ab.x + (x.y - a.y) * ab.y) / (len * len);
        let dist = cross(ab, x.sub(a)).abs() / len;
        dist <= tol && t >= -tol / len && t <= 1.0 + tol / len
    };
    if denom.abs() <= 1e-12 * l1 * l2 {
        for (x, a, b) in [(p, r, s), (q, r, s), (r, p, q), (s, p, q)] {
            if on_seg(a, b, x) {
                out.push(x);
            }
        }
        return;
    }
    let rp = r.sub(p);
    let t = cross(rp, d2) / denom;
    let u = cross(rp, d1) / denom;
    let tt = tol / l1;
    let tu = tol / l2;
    if t >= -tt && t <= 1.0 + tt && u >= -tu && u <= 1.0 + tu {
        out.push(p.add(d1.scale(t.clamp(0.0, 1.0))));
    } else {
        // Endpoint touching within tolerance.
        for (x, a, b) in [(p, r, s), (q, r, s), (r, p, q), (s, p, q)] {
            if on_seg(a, b, x) {
                out.push(x);
            }
        }
    }
}

struct Junction {
    at: Point,
    curves: Vec<usize>,
}

/// Computes length, density, longest straight free span and the number of
/// junction points (where three or more curve ends meet, counting a curve
/// passing through a point as two ends).
pub fn geometry_features(curves: &CurveSet, thickness: f64) -> Result<GeomFeatures, GeometryError> {
    if !(thickness > 0.0) {
        return Err(GeometryError::BadThickness(thickness));
    }
    let total_length = curves.total_length();
    let relative_density = total_length * thickness / (curves.bbox.side * curves.bbox.side);
    if relative_density >= 1.0 {
        return Err(GeometryError::Degenerate(relative_density));
    }

    let tol = 1e-7 * curves.bbox.side.max(1.0);
    let mut polys: Vec<Vec<Point>> = curves.segments.iter().map(|s| vec![s.p0, s.p1]).collect();
    polys.extend(curves.arcs.iter().map(arc_polyline));
    let ends: Vec<(Point, Point)> = polys
        .iter()
        .map(|p| (p[0], *p.last().unwrap()))
        .collect();
    let boxes: Vec<(Point, Point)> = polys
        .iter()
        .map(|p| {
            p.iter().fold(
                (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN)),
                |(lo, hi), q| {
                    (
                        Point::new(lo.x.min(q.x), lo.y.min(q.y)),
                        Point::new(hi.x.max(q.x), hi.y.max(q.y)),
                    )
                },
            )
        })
        .collect();

    let mut junctions: Vec<Junction> = Vec::new();
    let mut hits = Vec::new();
    for i in 0..polys.len() {
        for j in (i + 1)..polys.len() {
            let (a, b) = (boxes[i], boxes[j]);
            if a.0.x > b.1.x + tol || b.0.x > a.1.x + tol || a.0.y > b.1.y + tol || b.0.y > a.1.y + tol {
                continue;
            }
            hits.clear();
            for u in polys[i].windows(2) {
                for v in polys[j].windows(2) {
                    segment_hits(u[0], u[1], v[0], v[1], tol, &mut hits);
                }
            }
            for &h in &hits {
                // Snap to a curve endpoint when close, so discretized arcs agree.
                let h = [ends[i].0, ends[i].1, ends[j].0, ends[j].1]
                    .into_iter()
                    .find(|e| e.close(h, 1e3 * tol))
                    .unwrap_or(h);
                match junctions.iter_mut().find(|x| x.at.close(h, 1e3 * tol)) {
                    Some(x) => {
                        for c in [i, j] {
                            if !x.curves.contains(&c) {
                                x.curves.push(c);
                            }
                        }
                    }
                    None => junctions.push(Junction {
                        at: h,
                        curves: vec![i, j],
                    }),
                }
            }
        }
    }

    let degree = |x: &Junction| -> usize {
        x.curves
            .iter()
            .map(|&c| {
                let (e0, e1) = ends[c];
                let closed = e0.close(e1, 1e3 * tol);
                if !closed && (e0.close(x.at, 1e3 * tol) || e1.close(x.at, 1e3 * tol)) {
                    1
                } else {
                    2
                }
            })
            .sum()
    };
    let n_intersections = junctions.iter().filter(|x| degree(x) >= 3).count();

    let mut max_free_span = 0.0f64;
    for (si, seg) in curves.segments.iter().enumerate() {
        let len = seg.length();
        if len == 0.0 {
            continue;
        }
        let d = seg.p1.sub(seg.p0);
        let mut ts: Vec<f64> = junctions
            .iter()
            .filter(|x| x.curves.contains(&si))
            .map(|x| ((x.at.x - seg.p0.x) * d.x + (x.at.y - seg.p0.y) * d.y) / (len * len))
            .map(|t| t.clamp(0.0, 1.0))
            .collect();
        ts.push(0.0);
        ts.push(1.0);
        ts.sort_by(|a, b| a.total_cmp(b));
        for w in ts.windows(2) {
            max_free_span = max_free_span.max((w[1] - w[0]) * len);
        }
    }

    Ok(GeomFeatures {
        total_length,
        relative_density,
        max_free_span,
        n_intersections,
    })
}

impl fmt::Display for CurveSet {
    /// Line format: `B minx miny side`, `P pitch`, then one `S x0 y0 x1 y1`
    /// or `A cx cy r a0 sweep` per curve.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "B {:?} {:?} {:?}", self.bbox.min.x, self.bbox.min.y, self.bbox.side)?;
        writeln!(f, "P {:?}", self.pitch)?;
        for s in &self.segments {
            writeln!(f, "S {:?} {:?} {:?} {:?}", s.p0.x, s.p0.y, s.p1.x, s.p1.y)?;
        }
        for a in &self.arcs {
            writeln!(
                f,
                "A {:?} {:?} {:?} {:?} {:?}",
                a.center.x, a.center.y, a.radius, a.start, a.sweep
            )?;
        }
        Ok(())
    }
}

impl FromStr for CurveSet {
    type Err = GeometryError;

    /// Parses the line format written by `Display`. Blank lines and `#`
    /// comments are ignored. Without a `B` line the box is the tight square
    /// extent of the curves anchored at their minimum corner.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut out = CurveSet {
            segments: Vec::new(),
            arcs: Vec::new(),
            bbox: BBox {
                min: Point::new(0.0, 0.0),
                side: 0.0,
            },
            pitch: 0.0,
        };
        let mut have_box = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| GeometryError::Parse { line: i + 1, msg };
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap();
            let nums = parts
                .map(|p| p.parse::<f64>().map_err(|e| err(format!("{p:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let want = match tag {
                "B" => 3,
                "P" => 1,
                "S" => 4,
                "A" => 5,
                _ => return Err(err(format!("unknown record {tag:?}"))),
            };
            if nums.len() != want {
                return Err(err(format!("{tag} expects {want} numbers, got {}", nums.len())));
            }
            match tag {
                "B" => {
                    out.bbox = BBox {
                        min: Point::new(nums[0], nums[1]),
                        side: nums[2],
                    };
                    have_box = true;
                }
                "P" => out.pitch = nums[0],
                "S" => out.push_segment(Point::new(nums[0], nums[1]), Point::new(nums[2], nums[3])),
                _ => {
                    if !(nums[2] > 0.0) || nums[4] == 0.0 || nums[4].abs() > TAU + TOL {
                        return Err(err("arc needs radius > 0 and 0 < |sweep| <= 2π".into()));
                    }
                    out.arcs.push(Arc {
                        center: Point::new(nums[0], nums[1]),
                        radius: nums[2],
                        start: nums[3],
                        sweep: nums[4],
                    })
                }
            }
        }
        if !have_box {
            let (lo, hi) = out.extents().ok_or(GeometryError::Empty)?;
            out.bbox = BBox {
                min: lo,
                side: (hi.x - lo.x).max(hi.y - lo.y),
            };
        }
        if out.pitch == 0.0 {
            out.pitch = out.bbox.side;
        }
        Ok(out)
    }
}
