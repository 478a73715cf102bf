//! Weight file: a plain-text header followed by raw little-endian `f64`
//! parameter blocks.
//!
//! ```text
//! lattice-weights 1
//! model gru-regressor
//! layer gru 106 300
//! layer dense 300 4 identity
//! scaler input 106
//! mean [0.0, ...]
//! std [1.0, ...]
//! meta key value
//! blocks 14
//! end
//! <f64 LE blobs in parameter block order>
//! ```
//!
//! Floats in the header use Rust's shortest round-trip formatting, so a
//! save → load → save cycle reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::dense::Activation;
use crate::model::{LayerSpec, ModelKind, ModelSpec};
use crate::scaler::ScalerParams;
use crate::{NnError, Params, Result};

pub const MAGIC: &str = "lattice-weights";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub spec: ModelSpec,
    /// Named scalers, kept in insertion order.
    pub scalers: Vec<(String, ScalerParams)>,
    pub meta: BTreeMap<String, String>,
    pub blocks: Vec<Vec<f64>>,
}

fn format_err(msg: impl Into<String>) -> NnError {
    NnError::Format(msg.into())
}

fn write_floats(out: &mut String, label: &str, v: &[f64]) {
    out.push_str(label);
    out.push(' ');
    out.push_str(&format!("{v:?}"));
    out.push('\n');
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format_err("float list must be bracketed"))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format_err(format!("bad float {t:?}: {e}"))))
        .collect()
}

fn check_token(t: &str, what: &str) -> Result<()> {
    if t.is_empty() || t.chars().any(|c| c.is_whitespace()) {
        return Err(format_err(format!("{what} must be a non-empty token without whitespace")));
    }
    Ok(())
}

impl WeightFile {
    pub fn new<P: Params + ?Sized>(spec: ModelSpec, model: &P) -> Self {
        WeightFile {
            spec,
            scalers: Vec::new(),
            meta: BTreeMap::new(),
            blocks: model.param_blocks().iter().map(|b| b.to_vec()).collect(),
        }
    }

    pub fn with_scaler(mut self, name: &str, scaler: ScalerParams) -> Self {
        self.scalers.push((name.to_string(), scaler));
        self
    }

    pub fn scaler(&self, name: &str) -> Option<&ScalerParams> {
        self.scalers.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.spec.validate()?;
        let lengths = self.spec.block_lengths();
        if lengths.len() != self.blocks.len() || lengths.iter().zip(&self.blocks).any(|(&n, b)| n != b.len()) {
            return Err(format_err("parameter blocks do not match the model spec"));
        }
        let mut h = String::new();
        h.push_str(&format!("{MAGIC} {VERSION}\n"));
        match self.spec.kind {
            ModelKind::GruRegressor => h.push_str("model gru-regressor\n"),
            ModelKind::Autoencoder { encoder_layers } => h.push_str(&format!("model autoencoder {encoder_layers}\n")),
        }
        for l in &self.spec.layers {
            match *l {
                LayerSpec::Gru { input, hidden } => h.push_str(&format!("layer gru {input} {hidden}\n")),
                LayerSpec::Dense { input, output, activation } => {
                    h.push_str(&format!("layer dense {input} {output} {}\n", activation.name()))
                }
            }
        }
        for (name, s) in &self.scalers {
            check_token(name, "scaler name")?;
            if s.mean.len() != s.std.len() {
                return Err(format_err(format!("scaler {name} has mismatched moments")));
            }
            h.push_str(&format!("scaler {name} {}\n", s.channels()));
            write_floats(&mut h, "mean", &s.mean);
            write_floats(&mut h, "std", &s.std);
        }
        for (k, v) in &self.meta {
            check_token(k, "meta key")?;
            if v.contains('\n') {
                return Err(format_err("meta values must be single-line"));
            }
            h.push_str(&format!("meta {k} {v}\n"));
        }
        h.push_str(&format!("blocks {}\nend\n", self.blocks.len()));
        let mut out = h.into_bytes();
        for b in &self.blocks {
            for v in b {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut next_line = || -> Result<&str> {
            let rest = &bytes[pos..];
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| format_err("truncated header"))?;
            pos += nl + 1;
            std::str::from_utf8(&rest[..nl]).map_err(|_| format_err("header is not UTF-8"))
        };

        let first = next_line()?;
        let version = first
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| format_err("missing magic"))?;
        if version != VERSION.to_string() {
            return Err(format_err(format!("unsupported version {version}")));
        }
        let kind = match next_line()?.split_whitespace().collect::<Vec<_>>()[..] {
            ["model", "gru-regressor"] => ModelKind::GruRegressor,
            ["model", "autoencoder", n] => ModelKind::Autoencoder {
                encoder_layers: n.parse().map_err(|_| format_err("bad encoder layer count"))?,
            },
            _ => return Err(format_err("bad model line")),
        };
        let num = |t: &str| t.parse::<usize>().map_err(|_| format_err(format!("bad integer {t:?}")));

        let mut layers = Vec::new();
        let mut scalers = Vec::new();
        let mut meta = BTreeMap::new();
        let n_blocks;
        loop {
            let line = next_line()?;
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "layer" => {
                    let t: Vec<&str> = rest.split_whitespace().collect();
                    layers.push(match t[..] {
                        ["gru", i, h] => LayerSpec::Gru { input: num(i)?, hidden: num(h)? },
                        ["dense", i, o, a] => LayerSpec::Dense {
                            input: num(i)?,
                            output: num(o)?,
                            activation: Activation::from_name(a)
                                .ok_or_else(|| format_err(format!("unknown activation {a}")))?,
                        },
                        _ => return Err(format_err(format!("bad layer line {line:?}"))),
                    });
                }
                "scaler" => {
                    let t: Vec<&str> = rest.split_whitespace().collect();
                    let [name, channels] = t[..] else {
                        return Err(format_err("bad scaler line"));
                    };
                    let channels = num(channels)?;
                    let mean = parse_floats(next_line()?.strip_prefix("mean ").ok_or_else(|| format_err("expected mean"))?)?;
                    let std = parse_floats(next_line()?.strip_prefix("std ").ok_or_else(|| format_err("expected std"))?)?;
                    if mean.len() != channels || std.len() != channels {
                        return Err(format_err(format!("scaler {name} channel count mismatch")));
                    }
                    scalers.push((name.to_string(), ScalerParams { mean, std }));
                }
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.insert(k.to_string(), v.to_string());
                }
                "blocks" => {
                    n_blocks = num(rest.trim())?;
                    if next_line()? != "end" {
                        return Err(format_err("expected end of header"));
                    }
                    break;
                }
                _ => return Err(format_err(format!("unexpected header line {line:?}"))),
            }
        }
        let spec = ModelSpec { kind, layers };
        spec.validate()?;
        let lengths = spec.block_lengths();
        if lengths.len() != n_blocks {
            return Err(format_err(format!("{n_blocks} blocks declared, spec needs {}", lengths.len())));
        }
        let total: usize = lengths.iter().sum();
        let body = &bytes[pos..];
        if body.len() != total * 8 {
            return Err(format_err(format!("expected {} payload bytes, found {}", total * 8, body.len())));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let blocks = lengths.iter().map(|&n| values.by_ref().take(n).collect()).collect();
        Ok(WeightFile { spec, scalers, meta, blocks })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
