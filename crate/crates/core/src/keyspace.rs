//! The 8-digit lattice design key.
//!
//! Digit order: vertex style, vertex sub-option, horizontal segment count,
//! vertical segment count, horizontal edge style, vertical edge style,
//! interior support, interior sub-option.
//!
//! Don't-care digits are canonicalized to 0: the vertex sub-option when the
//! vertex is kept as-is, and the interior sub-option when there is no
//! interior support.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("design key must have exactly 8 characters, got {0}")]
    Length(usize),
    #[error("design key character {position} ({found:?}) is not a decimal digit")]
    NotDigit { position: usize, found: char },
    #[error("design key digit {position} has value {value}, allowed values are {allowed}")]
    Domain {
        position: usize,
        value: u8,
        allowed: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertexStyle {
    AsIs = 0,
    StraightEdge = 1,
    Arc = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeStyle {
    Straight = 0,
    TwoArcs = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Interior {
    None = 0,
    Plus = 1,
    X = 2,
}

/// A validated lattice design key.
///
/// `vertex_sub` selects the chamfer drawing style (0 straight, 1 two arcs)
/// for [`VertexStyle::StraightEdge`] and the arc direction (0 in, 1 out) for
/// [`VertexStyle::Arc`]. `circle` is the interior sub-option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DesignKey {
    pub vertex: VertexStyle,
    pub vertex_sub: u8,
    pub h_segments: u8,
    pub v_segments: u8,
    pub h_style: EdgeStyle,
    pub v_style: EdgeStyle,
    pub interior: Interior,
    pub circle: bool,
}

const SEGMENT_RANGE: &str = "{2,3,4}";

impl DesignKey {
    /// Parses an 8-character digit string and canonicalizes don't-care digits.
    pub fn parse(text: &str) -> Result<Self, KeyError> {
        let chars: Vec<char> = text.chars().collect();
        if chars.len() != 8 {
            return Err(KeyError::Length(chars.len()));
        }
        let mut d = [0u8; 8];
        for (i, c) in chars.iter().enumerate() {
            d[i] = c.to_digit(10).ok_or(KeyError::NotDigit {
                position: i + 1,
                found: *c,
            })? as u8;
        }
        let domain = |position: usize, allowed: &'static str| KeyError::Domain {
            position,
            value: d[position - 1],
            allowed,
        };
        let vertex = match d[0] {
            0 => VertexStyle::AsIs,
            1 => VertexStyle::StraightEdge,
            2 => VertexStyle::Arc,
            _ => return Err(domain(1, "{0,1,2}")),
        };
        if d[1] > 1 {
            return Err(domain(2, "{0,1}"));
        }
        if !(2..=4).contains(&d[2]) {
            return Err(domain(3, SEGMENT_RANGE));
        }
        if !(2..=4).contains(&d[3]) {
            return Err(domain(4, SEGMENT_RANGE));
        }
        let edge = |position: usize| match d[position - 1] {
            0 => Ok(EdgeStyle::Straight),
            1 => Ok(EdgeStyle::TwoArcs),
            _ => Err(domain(position, "{0,1}")),
        };
        let h_style = edge(5)?;
        let v_style = edge(6)?;
        let interior = match d[6] {
            0 => Interior::None,
            1 => Interior::Plus,
            2 => Interior::X,
            _ => return Err(domain(7, "{0,1,2}")),
        };
        if d[7] > 1 {
            return Err(domain(8, "{0,1}"));
        }
        Ok(DesignKey {
            vertex,
            vertex_sub: d[1],
            h_segments: d[2],
            v_segments: d[3],
            h_style,
            v_style,
            interior,
            circle: d[7] == 1,
        }
        .canonicalize())
    }

    /// Forces don't-care digits to 0. Idempotent.
    pub fn canonicalize(self) -> Self {
        let mut k = self;
        if k.vertex == VertexStyle::AsIs {
            k.vertex_sub = 0;
        }
        if k.interior == Interior::None {
            k.circle = false;
        }
        k
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonicalize()
    }

    pub fn digits(&self) -> [u8; 8] {
        [
            self.vertex as u8,
            self.vertex_sub,
            self.h_segments,
            self.v_segments,
            self.h_style as u8,
            self.v_style as u8,
            self.interior as u8,
            self.circle as u8,
        ]
    }
}

impl fmt::Display for DesignKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in self.digits() {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for DesignKey {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DesignKey::parse(s)
    }
}

/// Result of enumerating the key space.
#[derive(Debug, Clone)]
pub struct Enumeration {
    /// Every canonical key, in lexicographic digit order.
    pub canonical: Vec<DesignKey>,
    /// Keys left after removing those whose 2×2 skeleton image is
    /// bit-identical to a lexicographically smaller key.
    pub unique: Vec<DesignKey>,
    /// Maps each removed key to the key representing its equivalence class.
    pub aliases: HashMap<DesignKey, DesignKey>,
}

impl Enumeration {
    pub fn canonical_count(&self) -> usize {
        self.canonical.len()
    }

    pub fn unique_count(&self) -> usize {
        self.unique.len()
    }
}

/// Key count quoted for the reference design system; reported next to the
/// achieved deduplicated count.
pub const REFERENCE_UNIQUE_COUNT: usize = 660;

/// All canonical keys in lexicographic order, without geometric deduplication.
pub fn canonical_keys() -> Vec<DesignKey> {
    let mut out = Vec::new();
    for vertex in [VertexStyle::AsIs, VertexStyle::StraightEdge, VertexStyle::Arc] {
        let vsubs: &[u8] = if vertex == VertexStyle::AsIs { &[0] } else { &[0, 1] };
        for &vertex_sub in vsubs {
            for h_segments in 2..=4 {
                for v_segments in 2..=4 {
                    for h_style in [EdgeStyle::Straight, EdgeStyle::TwoArcs] {
                        for v_style in [EdgeStyle::Straight, EdgeStyle::TwoArcs] {
                            for interior in [Interior::None, Interior::Plus, Interior::X] {
                                let circles: &[bool] = if interior == Interior::None {
                                    &[false]
                                } else {
                                    &[false, true]
                                };
                                for &circle in circles {
                                    out.push(DesignKey {
                                        vertex,
                                        vertex_sub,
                                        h_segments,
                                        v_segments,
                                        h_style,
                                        v_style,
                                        interior,
                                        circle,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn compute_enumeration() -> Enumeration {
    let canonical = canonical_keys();
    let mut seen: HashMap<Vec<u8>, DesignKey> = HashMap::new();
    let mut unique = Vec::new();
    let mut aliases = HashMap::new();
    for key in &canonical {
        let image = raster::render_key(key);
        match seen.get(image.packed()) {
            Some(rep) => {
                aliases.insert(*key, *rep);
            }
            None => {
                seen.insert(image.packed().to_vec(), *key);
                unique.push(*key);
            }
        }
    }
    Enumeration {
        canonical,
        unique,
        aliases,
    }
}

/// Enumerates the key space. The result is computed once per process.
pub fn enumerate_keys() -> &'static Enumeration {
    static CACHE: OnceLock<Enumeration> = OnceLock::new();
    CACHE.get_or_init(compute_enumeration)
}

pub const THICKNESS_RANGE_MM: (f64, f64) = (0.25, 0.75);
pub const LOG10_RATE_RANGE: (f64, f64) = (2.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSample {
    pub key: DesignKey,
    pub thickness: f64,
    pub strain_rate: f64,
}

/// Draws a key uniformly from `keys`, a wall thickness uniformly in
/// [0.25, 0.75] mm and a strain rate log-uniformly in [1e2, 1e5] 1/s.
pub fn sample_from<R: Rng + ?Sized>(rng: &mut R, keys: &[DesignKey]) -> DesignSample {
    let key = keys[rng.gen_range(0..keys.len())];
    let thickness = rng.gen_range(THICKNESS_RANGE_MM.0..=THICKNESS_RANGE_MM.1);
    let u = rng.gen_range(LOG10_RATE_RANGE.0..=LOG10_RATE_RANGE.1);
    DesignSample {
        key,
        thickness,
        strain_rate: 10f64.powf(u),
    }
}

/// [`sample_from`] over the deduplicated enumeration.
pub fn sample_design<R: Rng + ?Sized>(rng: &mut R) -> DesignSample {
    sample_from(rng, &enumerate_keys().unique)
}
