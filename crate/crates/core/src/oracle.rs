//! Synthetic crush oracle.
//!
//! A 1D column model of the extruded lattice under constant-rate
//! compression between rigid plates. It is a cheap, deterministic stand-in
//! for explicit shell FE runs and makes no claim of quantitative agreement
//! with them. What it reproduces qualitatively:
//!
//! - Johnson–Cook-form rate hardening, `σ_y = (A + B ε_p^n)(1 + C ln ε̇*)`,
//!   isothermal;
//! - load proportional to wall cross-section `A_eff = L_total · t`;
//! - slenderness softening `g(ε) = 1 / (1 + k_b (span / t) ε)`;
//! - linear damage knock-down between `eps_d` and `eps_f`;
//! - zero bottom-plate force until the elastic wave has crossed the height.
//!
//! Energies are integrated so that `W = PD + DMD + ELSE` holds at every step,
//! with `W = ∫ RF dδ` (trapezoidal on the fine grid). On steps with plastic
//! flow the elastic energy is `RF² H / (2 E A_eff)`, capped by the work not
//! yet dissipated, and the remainder of the work increment is split into
//! plastic and damage dissipation by `(1 - D) : D`. Steps without plastic
//! flow dissipate nothing. The cap is active right after the wave arrives,
//! while the stored energy of the already-loaded column has not yet been
//! paid for by bottom-plate work.

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, CurveSet, GeomFeatures, GeometryError, HEIGHT_MM};
use crate::keyspace::DesignKey;

/// Nodes of the internal strain grid.
pub const FINE_NODES: usize = 99;
/// Output steps (every second fine node).
pub const STEPS: usize = 50;
pub const DEFAULT_FINAL_STRAIN: f64 = 0.20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid material: {0}")]
    Material(String),
    #[error("non-finite value at integration step {step}: {what}")]
    Integration { step: usize, what: &'static str },
    #[error("record batch: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Material and model constants. SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    /// Elastic modulus (Pa).
    pub e: f64,
    /// Density (kg/m³).
    pub rho: f64,
    pub a_jc: f64,
    pub b_jc: f64,
    pub n_jc: f64,
    pub c_jc: f64,
    /// Reference strain rate (1/s).
    pub eps0_dot: f64,
    /// Plastic strain at damage onset.
    pub eps_d: f64,
    /// Plastic strain at full damage.
    pub eps_f: f64,
    /// Load knock-down at full damage.
    pub d_max: f64,
    /// Slenderness softening coefficient.
    pub k_b: f64,
}

impl Default for MaterialConfig {
    /// Ti-6Al-4V-like Johnson–Cook constants plus the oracle's tuning constants.
    fn default() -> Self {
        MaterialConfig {
            e: 113.8e9,
            rho: 4430.0,
            a_jc: 1098e6,
            b_jc: 1092e6,
            n_jc: 0.93,
            c_jc: 0.014,
            eps0_dot: 1.0,
            eps_d: 0.05,
            eps_f: 0.30,
            d_max: 0.8,
            k_b: 0.02,
        }
    }
}

impl MaterialConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        let fail = |m: &str| Err(OracleError::Material(m.to_string()));
        let all = [
            self.e, self.rho, self.a_jc, self.b_jc, self.n_jc, self.c_jc, self.eps0_dot, self.eps_d,
            self.eps_f, self.d_max, self.k_b,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all constants must be finite");
        }
        if !(self.e > 0.0 && self.rho > 0.0 && self.a_jc > 0.0) {
            return fail("E, rho and A must be positive");
        }
        if !(0.0 <= self.eps_d && self.eps_d < self.eps_f) {
            return fail("need 0 <= eps_d < eps_f");
        }
        if !(0.0 <= self.d_max && self.d_max < 1.0) {
            return fail("need 0 <= d_max < 1");
        }
        if !(self.n_jc > 0.0 && self.n_jc <= 1.0) {
            return fail("need 0 < n <= 1");
        }
        if self.c_jc < 0.0 || self.b_jc < 0.0 || self.k_b < 0.0 || self.eps0_dot <= 0.0 {
            return fail("C, B and k_b must be non-negative and the reference rate positive");
        }
        Ok(())
    }

    /// Damage variable for accumulated plastic strain `eps_p`.
    pub fn damage(&self, eps_p: f64) -> f64 {
        ((eps_p - self.eps_d) / (self.eps_f - self.eps_d)).clamp(0.0, 1.0) * self.d_max
    }
}

/// Time for the elastic wave to cross `height_mm`: `H / sqrt(E/ρ)` (s).
pub fn wave_arrival(height_mm: f64, mat: &MaterialConfig) -> f64 {
    height_mm * 1e-3 / (mat.e / mat.rho).sqrt()
}

/// Johnson–Cook-form flow stress without the thermal term (Pa).
pub fn flow_stress(eps_p: f64, rate: f64, mat: &MaterialConfig) -> f64 {
    let hardening = mat.a_jc + mat.b_jc * eps_p.max(0.0).powf(mat.n_jc);
    let rate_term = 1.0 + mat.c_jc * (rate / mat.eps0_dot).max(1.0).ln();
    hardening * rate_term
}

/// Identifies the cross-section a record was computed for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignId {
    Key(DesignKey),
    /// A geometry outside the key system, e.g. a fixture curve file.
    Named(String),
}

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignId::Key(k) => write!(f, "{k}"),
            DesignId::Named(n) => f.write_str(n),
        }
    }
}

impl FromStr for DesignId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match DesignKey::parse(s) {
            Ok(k) => DesignId::Key(k),
            Err(_) => DesignId::Named(s.to_string()),
        })
    }
}

impl From<DesignKey> for DesignId {
    fn from(k: DesignKey) -> Self {
        DesignId::Key(k)
    }
}

/// One oracle run at the 50 output steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub design: DesignId,
    pub thickness: f64,
    pub strain_rate: f64,
    pub height: f64,
    pub final_strain: f64,
    pub time: Vec<f64>,
    pub strain: Vec<f64>,
    /// Bottom-plate reaction force (N).
    pub rf: Vec<f64>,
    /// Plastic dissipation (J).
    pub pd: Vec<f64>,
    /// Damage dissipation (J).
    pub dmd: Vec<f64>,
    /// Elastic strain energy (J).
    pub else_: Vec<f64>,
    /// External work done on the bottom plate (J).
    pub work: Vec<f64>,
}

impl SimRecord {
    /// The four predicted series in output order.
    pub fn outputs(&self) -> [&[f64]; 4] {
        [&self.rf, &self.pd, &self.dmd, &self.else_]
    }
}

/// Full-resolution trace on the internal grid, exposed for checking.
#[derive(Debug, Clone, PartialEq)]
pub struct FineTrace {
    pub strain: Vec<f64>,
    pub time: Vec<f64>,
    pub eps_p: Vec<f64>,
    pub damage: Vec<f64>,
    pub rf: Vec<f64>,
    pub pd: Vec<f64>,
    pub dmd: Vec<f64>,
    pub else_: Vec<f64>,
    pub work: Vec<f64>,
}

/// Plastic strain at which the 1D return map lands on the yield surface:
/// the root of `E (eps - x) = σ_y(x)` on `[lo, eps]`.
fn return_map(eps: f64, lo: f64, rate: f64, mat: &MaterialConfig) -> f64 {
    let f = |x: f64| mat.e * (eps - x) - flow_stress(x, rate, mat);
    let (mut a, mut b) = (lo, eps);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

fn validate_inputs(thickness: f64, strain_rate: f64, final_strain: f64) -> Result<(), OracleError> {
    if !(thickness > 0.0 && thickness.is_finite()) {
        return Err(OracleError::Input(format!("thickness must be positive, got {thickness}")));
    }
    if !(strain_rate > 0.0 && strain_rate.is_finite()) {
        return Err(OracleError::Input(format!("strain rate must be positive, got {strain_rate}")));
    }
    if !(final_strain > 0.0 && final_strain <= DEFAULT_FINAL_STRAIN) {
        return Err(OracleError::Input(format!(
            "final strain must lie in (0, 0.2], got {final_strain}"
        )));
    }
    Ok(())
}

/// Integrates the column model on the fine grid.
pub fn simulate_fine(
    features: &GeomFeatures,
    thickness: f64,
    strain_rate: f64,
    final_strain: f64,
    mat: &MaterialConfig,
) -> Result<FineTrace, OracleError> {
    validate_inputs(thickness, strain_rate, final_strain)?;
    mat.validate()?;
    if features.relative_density >= 1.0 {
        return Err(GeometryError::Degenerate(features.relative_density).into());
    }
    let h_m = HEIGHT_MM * 1e-3;
    let area = features.total_length * thickness * 1e-6;
    let t_e = wave_arrival(HEIGHT_MM, mat);
    let slender = mat.k_b * features.max_free_span / thickness;

    let n = FINE_NODES;
    let mut tr = FineTrace {
        strain: Vec::with_capacity(n),
        time: Vec::with_capacity(n),
        eps_p: Vec::with_capacity(n),
        damage: Vec::with_capacity(n),
        rf: Vec::with_capacity(n),
        pd: Vec::with_capacity(n),
        dmd: Vec::with_capacity(n),
        else_: Vec::with_capacity(n),
        work: Vec::with_capacity(n),
    };
    let mut eps_p = 0.0;
    for i in 0..n {
        let eps = final_strain * (i as f64 / (n - 1) as f64);
        let t = eps / strain_rate;
        let trial = mat.e * (eps - eps_p);
        let sigma = if trial < flow_stress(eps_p, strain_rate, mat) {
            trial
        } else {
            eps_p = return_map(eps, eps_p, strain_rate, mat);
            flow_stress(eps_p, strain_rate, mat)
        };
        let d = mat.damage(eps_p);
        let g = 1.0 / (1.0 + slender * eps);
        let rf = if t <= t_e { 0.0 } else { sigma * area * g * (1.0 - d) };
        if !rf.is_finite() {
            return Err(OracleError::Integration { step: i, what: "reaction force" });
        }

        let (work, pd, dmd, else_) = if i == 0 {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            let d_delta = (eps - tr.strain[i - 1]) * h_m;
            let work = tr.work[i - 1] + 0.5 * (rf + tr.rf[i - 1]) * d_delta;
            let (pd0, dmd0) = (tr.pd[i - 1], tr.dmd[i - 1]);
            let available = work - pd0 - dmd0;
            // Only steps with plastic flow dissipate; otherwise the (softened)
            // column stores everything it is given.
            let stored = if eps_p > tr.eps_p[i - 1] {
                (rf * rf * h_m / (2.0 * mat.e * area)).min(available)
            } else {
                available
            };
            let inelastic = (available - stored).max(0.0);
            let pd = pd0 + (1.0 - d) * inelastic;
            let dmd = dmd0 + d * inelastic;
            (work, pd, dmd, (work - pd - dmd).max(0.0))
        };
        if ![work, pd, dmd, else_].iter().all(|v| v.is_finite()) {
            return Err(OracleError::Integration { step: i, what: "energy" });
        }
        tr.strain.push(eps);
        tr.time.push(t);
        tr.eps_p.push(eps_p);
        tr.damage.push(d);
        tr.rf.push(rf);
        tr.pd.push(pd);
        tr.dmd.push(dmd);
        tr.else_.push(else_);
        tr.work.push(work);
    }
    Ok(tr)
}

/// Runs the oracle for precomputed geometry features.
pub fn simulate_features(
    design: DesignId,
    features: &GeomFeatures,
    thickness: f64,
    strain_rate: f64,
    final_strain: f64,
    mat: &MaterialConfig,
) -> Result<SimRecord, OracleError> {
    let tr = simulate_fine(features, thickness, strain_rate, final_strain, mat)?;
    let pick = |v: &[f64]| -> Vec<f64> { v.iter().step_by(2).copied().collect() };
    debug_assert_eq!(pick(&tr.strain).len(), STEPS);
    Ok(SimRecord {
        design,
        thickness,
        strain_rate,
        height: HEIGHT_MM,
        final_strain,
        time: pick(&tr.time),
        strain: pick(&tr.strain),
        rf: pick(&tr.rf),
        pd: pick(&tr.pd),
        dmd: pick(&tr.dmd),
        else_: pick(&tr.else_),
        work: pick(&tr.work),
    })
}

/// Geometry features of an arbitrary cross-section for a given wall thickness.
pub fn features_for(curves: &CurveSet, thickness: f64) -> Result<GeomFeatures, OracleError> {
    Ok(geometry::geometry_features(curves, thickness)?)
}

/// Runs the oracle for a design key (2×2 lattice in the 20 mm box, 10 mm tall).
pub fn simulate(
    key: &DesignKey,
    thickness: f64,
    strain_rate: f64,
    final_strain: f64,
    mat: &MaterialConfig,
) -> Result<SimRecord, OracleError> {
    validate_inputs(thickness, strain_rate, final_strain)?;
    let curves = geometry::lattice_for_key(key)?;
    let features = features_for(&curves, thickness)?;
    simulate_features(DesignId::Key(*key), &features, thickness, strain_rate, final_strain, mat)
}

/// Runs the oracle for a cross-section outside the key system.
pub fn simulate_curves(
    name: &str,
    curves: &CurveSet,
    thickness: f64,
    strain_rate: f64,
    final_strain: f64,
    mat: &MaterialConfig,
) -> Result<SimRecord, OracleError> {
    validate_inputs(thickness, strain_rate, final_strain)?;
    let features = features_for(curves, thickness)?;
    simulate_features(
        DesignId::Named(name.to_string()),
        &features,
        thickness,
        strain_rate,
        final_strain,
        mat,
    )
}

pub const CSV_HEADER: [&str; 11] = [
    "key",
    "thickness_mm",
    "rate_1_per_s",
    "final_strain",
    "step",
    "time_s",
    "strain",
    "rf_N",
    "pd_J",
    "dmd_J",
    "else_J",
];

/// Writes records as CSV, one row per output step.
pub fn write_csv<W: Write>(records: &[SimRecord], out: W) -> Result<(), OracleError> {
    let mut w = io::BufWriter::new(out);
    writeln!(w, "{}", CSV_HEADER.join(","))?;
    for r in records {
        for i in 0..r.time.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.design,
                r.thickness,
                r.strain_rate,
                r.final_strain,
                i,
                r.time[i],
                r.strain[i],
                r.rf[i],
                r.pd[i],
                r.dmd[i],
                r.else_[i]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

const BATCH_MAGIC: &[u8; 8] = b"LATSIMRB";
pub const BATCH_VERSION: u32 = 1;

/// Writes a binary record batch: magic, version, record count, then per
/// record the design id (u16 length + UTF-8), step count, four scalars and
/// seven series, all little-endian with 64-bit floats.
pub fn write_batch<W: Write>(records: &[SimRecord], out: W) -> Result<(), OracleError> {
    let mut w = io::BufWriter::new(out);
    w.write_all(BATCH_MAGIC)?;
    w.write_all(&BATCH_VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for r in records {
        let id = r.design.to_string();
        let len = u16::try_from(id.len()).map_err(|_| OracleError::Format("design id too long".into()))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        w.write_all(&(r.time.len() as u32).to_le_bytes())?;
        for v in [r.thickness, r.strain_rate, r.height, r.final_strain] {
            w.write_all(&v.to_le_bytes())?;
        }
        for series in [&r.time, &r.strain, &r.rf, &r.pd, &r.dmd, &r.else_, &r.work] {
            if series.len() != r.time.len() {
                return Err(OracleError::Format("series lengths differ".into()));
            }
            for v in series.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], OracleError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, OracleError> {
    Ok(f64::from_le_bytes(read_exact::<8, R>(r)?))
}

pub fn read_batch<R: Read>(input: R) -> Result<Vec<SimRecord>, OracleError> {
    let mut r = io::BufReader::new(input);
    if &read_exact::<8, _>(&mut r)? != BATCH_MAGIC {
        return Err(OracleError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_exact::<4, _>(&mut r)?);
    if version != BATCH_VERSION {
        return Err(OracleError::Format(format!(
            "unsupported batch version {version}, expected {BATCH_VERSION}"
        )));
    }
    let count = u64::from_le_bytes(read_exact::<8, _>(&mut r)?);
    let mut out = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(read_exact::<2, _>(&mut r)?) as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)?;
        let id = String::from_utf8(id).map_err(|e| OracleError::Format(e.to_string()))?;
        let steps = u32::from_le_bytes(read_exact::<4, _>(&mut r)?) as usize;
        let thickness = read_f64(&mut r)?;
        let strain_rate = read_f64(&mut r)?;
        let height = read_f64(&mut r)?;
        let final_strain = read_f64(&mut r)?;
        let mut series = Vec::with_capacity(7);
        for _ in 0..7 {
            series.push((0..steps).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>, _>>()?);
        }
        let mut it = series.into_iter();
        let mut next = || it.next().unwrap();
        out.push(SimRecord {
            design: id.parse().unwrap(),
            thickness,
            strain_rate,
            height,
            final_strain,
            time: next(),
            strain: next(),
            rf: next(),
            pd: next(),
            dmd: next(),
            else_: next(),
            work: next(),
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(OracleError::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(out)
}
