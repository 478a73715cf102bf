//! Cross-sections outside the key system, used by the transfer protocol.
//!
//! Each is a 2×2 tiling of a 10 mm cell scaled into the 20 mm box. The same
//! curves are checked in as text files under `fixtures/`.

use std::collections::BTreeMap;
use std::path::Path;

use lattice_core::geometry::{self, Arc, BBox, CurveSet, Point, Segment, BOX_SIDE_MM, TILES};

use crate::Result;

pub const NAMES: [&str; 3] = ["honeycomb", "triangle", "ring"];

fn cell(segments: &[(f64, f64, f64, f64)], arcs: Vec<Arc>) -> CurveSet {
    CurveSet {
        segments: segments
            .iter()
            .map(|&(x0, y0, x1, y1)| Segment {
                p0: Point::new(x0, y0),
                p1: Point::new(x1, y1),
            })
            .collect(),
        arcs,
        bbox: BBox {
            min: Point::new(0.0, 0.0),
            side: 10.0,
        },
        pitch: 10.0,
    }
}

const SQUARE: [(f64, f64, f64, f64); 4] = [
    (0.0, 0.0, 10.0, 0.0),
    (10.0, 0.0, 10.0, 10.0),
    (10.0, 10.0, 0.0, 10.0),
    (0.0, 10.0, 0.0, 0.0),
];

fn unit_cell(name: &str) -> Option<CurveSet> {
    Some(match name {
        // Elongated hexagons meeting at their side vertices.
        "honeycomb" => cell(
            &[
                (2.5, 0.0, 7.5, 0.0),
                (7.5, 0.0, 10.0, 5.0),
                (10.0, 5.0, 7.5, 10.0),
                (7.5, 10.0, 2.5, 10.0),
                (2.5, 10.0, 0.0, 5.0),
                (0.0, 5.0, 2.5, 0.0),
            ],
            Vec::new(),
        ),
        // Square walls with a single diagonal brace.
        "triangle" => {
            let mut s = SQUARE.to_vec();
            s.push((0.0, 0.0, 10.0, 10.0));
            cell(&s, Vec::new())
        }
        // Square walls around a large free-standing ring.
        "ring" => cell(&SQUARE, vec![Arc::circle(Point::new(5.0, 5.0), 4.0)]),
        _ => return None,
    })
}

/// Builds the named fixture in the 20 mm box.
pub fn build(name: &str) -> Option<CurveSet> {
    let c = unit_cell(name)?;
    let tiled = geometry::tessellate(&c, TILES, TILES).expect("square tiling");
    Some(geometry::scale_to_box(&tiled, BOX_SIDE_MM).expect("non-empty fixture"))
}

pub fn builtin() -> BTreeMap<String, CurveSet> {
    NAMES.iter().map(|n| (n.to_string(), build(n).expect("known fixture"))).collect()
}

/// Loads every `*.curves` file in `dir`, keyed by file stem.
pub fn load_dir(dir: &Path) -> Result<BTreeMap<String, CurveSet>> {
    let mut out = BTreeMap::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.extension().and_then(|s| s.to_str()) != Some("curves") {
            continue;
        }
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = std::fs::read_to_string(&path)?;
        out.insert(name, text.parse::<CurveSet>()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lattice_core::geometry::geometry_features;
    use lattice_core::raster;

    fn fixture_dir() -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
    }

    #[test]
    fn checked_in_files_match_builders() {
        let files = load_dir(&fixture_dir()).unwrap();
        assert_eq!(files, builtin());
    }

    #[test]
    fn fixtures_are_valid_cross_sections() {
        for (name, c) in builtin() {
            assert!(c.within_bbox(1e-9), "{name}");
            assert_eq!(c.bbox.side, BOX_SIDE_MM);
            let f = geometry_features(&c, 0.5).unwrap();
            assert!(f.total_length > 0.0 && f.relative_density < 1.0, "{name}");
            let img = raster::rasterize(&geometry::image_frame(&c));
            assert!(img.warning.is_none() && img.image.popcount() > 100, "{name}");
        }
        assert!(build("nope").is_none());
    }
}
