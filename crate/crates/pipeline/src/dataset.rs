//! Feature dataset files.
//!
//! Binary layout (little-endian): magic `LATDSET1`, format version (u32),
//! feature layout version (u32), point count (u64), steps, feature and output
//! column counts (u32 each), then per point the design id (u16 length +
//! UTF-8), thickness, strain rate and final strain (f64), the feature matrix
//! and the target matrix (row-major f64).

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use lattice_nn::Matrix;

use crate::features::{PointMeta, TrainingPoint, COL_STRAIN, COL_TIME, COL_WAVE, FEATURE_LAYOUT_VERSION, OUTPUT_NAMES};
use crate::{PipelineError, Result};

const MAGIC: &[u8; 8] = b"LATDSET1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub points: Vec<TrainingPoint>,
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_matrix(r: &mut impl Read, rows: usize, cols: usize) -> Result<Matrix> {
    let mut bytes = vec![0u8; rows * cols * 8];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}

impl Dataset {
    pub fn new(points: Vec<TrainingPoint>) -> Self {
        Dataset { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        let (steps, nf, no) = self
            .points
            .first()
            .map_or((0, 0, 0), |p| (p.features.rows, p.features.cols, p.targets.cols));
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&FEATURE_LAYOUT_VERSION.to_le_bytes())?;
        w.write_all(&(self.points.len() as u64).to_le_bytes())?;
        for v in [steps, nf, no] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for p in &self.points {
            if p.features.rows != steps || p.features.cols != nf || p.targets.rows != steps || p.targets.cols != no {
                return Err(PipelineError::Length("points have differing shapes".into()));
            }
            let id = p.meta.design.to_string();
            let len = u16::try_from(id.len()).map_err(|_| PipelineError::Format("design id too long".into()))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for v in [p.meta.thickness, p.meta.strain_rate, p.meta.final_strain] {
                w.write_all(&v.to_le_bytes())?;
            }
            for v in p.features.data.iter().chain(&p.targets.data) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = BufReader::new(input);
        if &read_array::<8>(&mut r)? != MAGIC {
            return Err(PipelineError::Format("not a dataset file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(PipelineError::Format(format!("unsupported dataset version {version}")));
        }
        let layout = read_u32(&mut r)?;
        if layout != FEATURE_LAYOUT_VERSION {
            return Err(PipelineError::LayoutVersion {
                found: layout,
                expected: FEATURE_LAYOUT_VERSION,
            });
        }
        let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let steps = read_u32(&mut r)? as usize;
        let nf = read_u32(&mut r)? as usize;
        let no = read_u32(&mut r)? as usize;
        let mut points = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let len = u16::from_le_bytes(read_array(&mut r)?) as usize;
            let mut id = vec![0u8; len];
            r.read_exact(&mut id)?;
            let id = String::from_utf8(id).map_err(|e| PipelineError::Format(e.to_string()))?;
            let meta = PointMeta {
                design: id.parse().expect("infallible"),
                thickness: read_f64(&mut r)?,
                strain_rate: read_f64(&mut r)?,
                final_strain: read_f64(&mut r)?,
            };
            let features = read_matrix(&mut r, steps, nf)?;
            let targets = read_matrix(&mut r, steps, no)?;
            points.push(TrainingPoint { features, targets, meta });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(PipelineError::Format("trailing bytes after dataset".into()));
        }
        Ok(Dataset { points })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        self.write(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::read(f)
    }

    /// One row per point and step; the latent columns are omitted.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        write!(w, "point,design,thickness_mm,rate_1_per_s,final_strain,step,strain,time_s,wave")?;
        for name in OUTPUT_NAMES {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (i, p) in self.points.iter().enumerate() {
            for t in 0..p.features.rows {
                write!(
                    w,
                    "{i},{},{},{},{},{t},{},{},{}",
                    p.meta.design,
                    p.meta.thickness,
                    p.meta.strain_rate,
                    p.meta.final_strain,
                    p.features.get(t, COL_STRAIN),
                    p.features.get(t, COL_TIME),
                    p.features.get(t, COL_WAVE)
                )?;
                for v in p.targets.row(t) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_features, LATENT_DIM};
    use lattice_core::keyspace::DesignKey;
    use lattice_core::oracle::{simulate, simulate_curves, MaterialConfig};

    fn sample() -> Dataset {
        let mat = MaterialConfig::default();
        let k = DesignKey::parse("00231121").unwrap();
        let a = simulate(&k, 0.3, 1e4, 0.2, &mat).unwrap();
        let curves = lattice_core::geometry::lattice_for_key(&k).unwrap();
        let b = simulate_curves("fixture-a", &curves, 0.6, 200.0, 0.1, &mat).unwrap();
        let latent: Vec<f64> = (0..LATENT_DIM).map(|i| i as f64 / 7.0).collect();
        Dataset::new(vec![
            build_features(&a, &latent, &mat).unwrap(),
            build_features(&b, &latent, &mat).unwrap(),
        ])
    }

    #[test]
    fn binary_round_trip_is_byte_exact() {
        let d = sample();
        let mut bytes = Vec::new();
        d.write(&mut bytes).unwrap();
        let back = Dataset::read(&bytes[..]).unwrap();
        assert_eq!(back, d);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn rejects_other_layouts_and_garbage() {
        let d = sample();
        let mut bytes = Vec::new();
        d.write(&mut bytes).unwrap();
        let mut wrong = bytes.clone();
        wrong[12] = 99;
        assert!(matches!(
            Dataset::read(&wrong[..]),
            Err(PipelineError::LayoutVersion { found: 99, .. })
        ));
        assert!(Dataset::read(&bytes[..bytes.len() - 3]).is_err());
        bytes.push(0);
        assert!(Dataset::read(&bytes[..]).is_err());
        assert!(Dataset::read(&b"garbage!"[..]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_step() {
        let d = sample();
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 50);
        assert!(text.lines().next().unwrap().ends_with("rf,pd,dmd,else"));
    }
}
