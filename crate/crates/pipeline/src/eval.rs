//! Relative-MAE evaluation and percentile-ranked comparison dumps.

use std::fmt;
use std::io::Write;

use lattice_nn::Matrix;

use crate::features::{TrainingPoint, COL_STRAIN, N_OUTPUTS, OUTPUT_NAMES};
use crate::train::TrainedGru;
use crate::{PipelineError, Result};

/// Smallest ground-truth range used to normalize force errors (N).
pub const RF_FLOOR: f64 = 0.25;
/// Smallest ground-truth range used to normalize energy errors (J).
pub const ENERGY_FLOOR: f64 = 1e-2;
pub const FLOORS: [f64; N_OUTPUTS] = [RF_FLOOR, ENERGY_FLOOR, ENERGY_FLOOR, ENERGY_FLOOR];
pub const PERCENTILES: [u32; 4] = [25, 50, 75, 100];

/// MAE over the series divided by `max(range of truth, floor)`.
pub fn relative_mae(truth: &[f64], pred: &[f64], floor: f64) -> f64 {
    assert_eq!(truth.len(), pred.len());
    if truth.is_empty() {
        return 0.0;
    }
    let mae = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / truth.len() as f64;
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    mae / (hi - lo).max(floor)
}

fn column(m: &Matrix, c: usize) -> Vec<f64> {
    (0..m.rows).map(|r| m.get(r, c)).collect()
}

/// One comparison case picked at a percentile of the per-point error ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileCase {
    pub output: usize,
    pub percentile: u32,
    pub point: usize,
    pub design: String,
    pub rmae: f64,
    pub strain: Vec<f64>,
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub set: String,
    /// Relative MAE per point and output.
    pub per_point: Vec<[f64; N_OUTPUTS]>,
    pub mean: [f64; N_OUTPUTS],
    pub std: [f64; N_OUTPUTS],
    pub cases: Vec<PercentileCase>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Nearest-rank index for percentile `p` in a sorted list of `n` items.
fn rank_index(p: u32, n: usize) -> usize {
    ((p as f64 / 100.0 * n as f64).ceil() as usize).clamp(1, n) - 1
}

pub fn evaluate_predictions(set: &str, points: &[&TrainingPoint], preds: &[Matrix]) -> Result<EvalReport> {
    if points.len() != preds.len() {
        return Err(PipelineError::Length(format!("{} points, {} predictions", points.len(), preds.len())));
    }
    let mut per_point = Vec::with_capacity(points.len());
    for (p, pred) in points.iter().zip(preds) {
        if pred.rows != p.targets.rows || pred.cols != N_OUTPUTS {
            return Err(PipelineError::Length("prediction shape differs from targets".into()));
        }
        let mut row = [0.0; N_OUTPUTS];
        for (o, r) in row.iter_mut().enumerate() {
            *r = relative_mae(&column(&p.targets, o), &column(pred, o), FLOORS[o]);
        }
        per_point.push(row);
    }
    let mut mean = [0.0; N_OUTPUTS];
    let mut std = [0.0; N_OUTPUTS];
    let mut cases = Vec::new();
    for o in 0..N_OUTPUTS {
        let col: Vec<f64> = per_point.iter().map(|r| r[o]).collect();
        (mean[o], std[o]) = mean_std(&col);
        if col.is_empty() {
            continue;
        }
        let mut order: Vec<usize> = (0..col.len()).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        for p in PERCENTILES {
            let i = order[rank_index(p, order.len())];
            cases.push(PercentileCase {
                output: o,
                percentile: p,
                point: i,
                design: points[i].meta.design.to_string(),
                rmae: col[i],
                strain: column(&points[i].features, COL_STRAIN),
                truth: column(&points[i].targets, o),
                pred: column(&preds[i], o),
            });
        }
    }
    Ok(EvalReport {
        set: set.to_string(),
        per_point,
        mean,
        std,
        cases,
    })
}

pub fn evaluate(model: &TrainedGru, set: &str, points: &[&TrainingPoint]) -> Result<EvalReport> {
    if points.is_empty() {
        return Err(PipelineError::Invalid(format!("evaluation set {set} is empty")));
    }
    let preds = model.predict(points)?;
    evaluate_predictions(set, points, &preds)
}

impl EvalReport {
    pub fn n_points(&self) -> usize {
        self.per_point.len()
    }

    pub const SUMMARY_HEADER: &'static str = "set,points,rf_rmae,pd_rmae,dmd_rmae,else_rmae,rf_std,pd_std,dmd_std,else_std";

    pub fn summary_row(&self) -> String {
        let mut s = format!("{},{}", self.set, self.n_points());
        for v in self.mean.iter().chain(&self.std) {
            s.push_str(&format!(",{v}"));
        }
        s
    }

    /// Long-format dump of the percentile cases:
    /// `output,percentile,point,design,rmae,step,strain,truth,pred`.
    pub fn write_cases_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "set,output,percentile,point,design,rmae,step,strain,truth,pred")?;
        for c in &self.cases {
            for t in 0..c.truth.len() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{t},{},{},{}",
                    self.set, OUTPUT_NAMES[c.output], c.percentile, c.point, c.design, c.rmae, c.strain[t], c.truth[t], c.pred[t]
                )?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} points):", self.set, self.n_points())?;
        for o in 0..N_OUTPUTS {
            write!(f, " {} {:.2}% ± {:.2}%", OUTPUT_NAMES[o], 100.0 * self.mean[o], 100.0 * self.std[o])?;
        }
        Ok(())
    }
}

/// Mean and standard deviation of per-run mean rMAE across repeated trainings.
pub fn aggregate_repeats(reports: &[EvalReport]) -> ([f64; N_OUTPUTS], [f64; N_OUTPUTS]) {
    let mut mean = [0.0; N_OUTPUTS];
    let mut std = [0.0; N_OUTPUTS];
    for o in 0..N_OUTPUTS {
        let v: Vec<f64> = reports.iter().map(|r| r.mean[o]).collect();
        (mean[o], std[o]) = mean_std(&v);
    }
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_features, LATENT_DIM};
    use lattice_core::keyspace::DesignKey;
    use lattice_core::oracle::{simulate, MaterialConfig};

    #[test]
    fn floor_applies_to_small_ranges() {
        let truth = [0.0, 0.1, 0.05];
        let pred = [0.05, 0.15, 0.0];
        assert!((relative_mae(&truth, &pred, RF_FLOOR) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance_without_floor() {
        let truth = [0.0, 10.0, 30.0, 25.0];
        let pred = [1.0, 8.0, 33.0, 24.0];
        let a = relative_mae(&truth, &pred, RF_FLOOR);
        let t2: Vec<f64> = truth.iter().map(|v| v * 7.5).collect();
        let p2: Vec<f64> = pred.iter().map(|v| v * 7.5).collect();
        assert!((a - relative_mae(&t2, &p2, RF_FLOOR)).abs() < 1e-15);
    }

    fn pts() -> Vec<TrainingPoint> {
        let mat = MaterialConfig::default();
        ["00220000", "00231121", "10331121", "21441121", "00330010"]
            .iter()
            .map(|k| {
                let r = simulate(&DesignKey::parse(k).unwrap(), 0.5, 1e3, 0.2, &mat).unwrap();
                build_features(&r, &[0.0; LATENT_DIM], &mat).unwrap()
            })
            .collect()
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let p = pts();
        let refs: Vec<&TrainingPoint> = p.iter().collect();
        let preds: Vec<Matrix> = p.iter().map(|x| x.targets.clone()).collect();
        let r = evaluate_predictions("t", &refs, &preds).unwrap();
        assert!(r.per_point.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(r.mean, [0.0; 4]);
        assert_eq!(r.cases.len(), 16);
    }

    #[test]
    fn percentile_cases_follow_each_output_ranking() {
        let p = pts();
        let refs: Vec<&TrainingPoint> = p.iter().collect();
        let preds: Vec<Matrix> = p
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut m = x.targets.clone();
                for r in 0..m.rows {
                    m.set(r, 0, m.get(r, 0) * (1.0 + 0.01 * i as f64));
                    m.set(r, 1, m.get(r, 1) * (1.0 + 0.01 * (4 - i) as f64));
                }
                m
            })
            .collect();
        let r = evaluate_predictions("t", &refs, &preds).unwrap();
        let worst = |o: usize| r.cases.iter().find(|c| c.output == o && c.percentile == 100).unwrap().point;
        assert_eq!(worst(0), 4);
        assert_eq!(worst(1), 0);
        let mut out = Vec::new();
        r.write_cases_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + 16 * 50);
        assert!(r.to_string().contains("rf"));
        assert_eq!(rank_index(25, 5), 1);
        assert_eq!(rank_index(100, 5), 4);
    }
}
