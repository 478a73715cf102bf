//! Shorter crush records cut from a full one by re-gridding to a smaller
//! final strain.

use lattice_core::oracle::SimRecord;
use rand::Rng;

pub const MIN_FINAL_STRAIN: f64 = 0.05;
pub const MAX_FINAL_STRAIN: f64 = 0.20;
pub const DEFAULT_COPIES: usize = 12;
/// Copies per simulation in the transfer protocol.
pub const TRANSFER_COPIES: usize = 50;

/// Linear interpolation of `v` at fractional index `f` of a uniform grid.
fn at_fraction(v: &[f64], f: f64) -> f64 {
    let last = v.len() - 1;
    let j = (f.floor() as usize).min(last);
    let w = f - j as f64;
    if w == 0.0 || j == last {
        v[j]
    } else {
        v[j] + w * (v[j + 1] - v[j])
    }
}

/// Re-grids `record` to `final_strain` on a uniform strain grid with the same
/// number of points. Grid points are located by fractional index into the
/// source grid, so `final_strain` equal to the source's reproduces it exactly.
pub fn truncate_record(record: &SimRecord, final_strain: f64) -> SimRecord {
    let n = record.strain.len();
    assert!(n >= 2, "record needs at least two steps");
    assert!(
        final_strain > 0.0 && final_strain <= record.final_strain,
        "final strain {final_strain} outside (0, {}]",
        record.final_strain
    );
    let ratio = final_strain / record.final_strain;
    let fractions: Vec<f64> = (0..n).map(|i| i as f64 * ratio).collect();
    let resample = |v: &[f64]| -> Vec<f64> { fractions.iter().map(|&f| at_fraction(v, f)).collect() };
    let mut strain = resample(&record.strain);
    strain[n - 1] = final_strain;
    SimRecord {
        design: record.design.clone(),
        thickness: record.thickness,
        strain_rate: record.strain_rate,
        height: record.height,
        final_strain,
        time: resample(&record.time),
        strain,
        rf: resample(&record.rf),
        pd: resample(&record.pd),
        dmd: resample(&record.dmd),
        else_: resample(&record.else_),
        work: resample(&record.work),
    }
}

/// `k` copies of `record`, each cut at a final strain drawn uniformly from
/// [0.05, 0.20].
pub fn augment<R: Rng + ?Sized>(record: &SimRecord, rng: &mut R, k: usize) -> Vec<SimRecord> {
    (0..k)
        .map(|_| {
            let u = rng.gen_range(MIN_FINAL_STRAIN..=MAX_FINAL_STRAIN).min(record.final_strain);
            truncate_record(record, u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use lattice_core::keyspace::DesignKey;
    use lattice_core::oracle::{simulate, MaterialConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn source() -> SimRecord {
        let k = DesignKey::parse("10331121").unwrap();
        simulate(&k, 0.4, 3e3, 0.2, &MaterialConfig::default()).unwrap()
    }

    #[test]
    fn full_strain_is_identity() {
        let r = source();
        assert_eq!(truncate_record(&r, 0.2), r);
    }

    #[test]
    fn short_copy_ends_at_target_and_stays_in_hull() {
        let r = source();
        let c = truncate_record(&r, 0.05);
        assert_eq!(*c.strain.last().unwrap(), 0.05);
        assert_eq!(c.strain.len(), r.strain.len());
        for (i, &s) in c.strain.iter().enumerate() {
            assert!((s - 0.05 * i as f64 / 49.0).abs() < 1e-15);
            let j = r.strain.iter().rposition(|&x| x <= s).unwrap();
            let k = (j + 1).min(r.strain.len() - 1);
            for (src, dst) in [(&r.rf, &c.rf), (&r.pd, &c.pd), (&r.time, &c.time)] {
                let (lo, hi) = (src[j].min(src[k]), src[j].max(src[k]));
                assert!(dst[i] >= lo - 1e-18 && dst[i] <= hi + 1e-18);
            }
        }
    }

    #[test]
    fn augmented_copies_keep_monotone_energies() {
        let r = source();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in augment(&r, &mut rng, 200) {
            assert!(c.final_strain >= 0.05 && c.final_strain <= 0.2);
            assert_eq!(*c.strain.last().unwrap(), c.final_strain);
            assert!(c.pd.windows(2).all(|w| w[1] >= w[0]));
            assert!(c.dmd.windows(2).all(|w| w[1] >= w[0]));
            assert!(c.strain.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
