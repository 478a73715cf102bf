//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! The GRU width defaults to 64 units per layer so the desk-scale runs finish
//! on one CPU core; set `LATTICE_ACCEPT_HIDDEN=300` for the full-width model.

use std::collections::BTreeMap;
use std::time::Instant;

use lattice_core::keyspace::{canonical_keys, enumerate_keys, DesignKey, REFERENCE_UNIQUE_COUNT};
use lattice_core::oracle::{self, DesignId, MaterialConfig, SimRecord};
use lattice_core::raster::{self, BitImage};
use lattice_nn::dense::DenseLayer;
use lattice_nn::gru::GruLayer;
use lattice_nn::loss::LossKind;
use lattice_nn::weights::WeightFile;
use lattice_nn::{Activation, Autoencoder, GruRegressor, Matrix, ModelSpec, Params};
use lattice_pipeline::augment::{augment, truncate_record, TRANSFER_COPIES};
use lattice_pipeline::autoencoder::{design_image, dsc_scores, mean, train_autoencoder, AeConfig, LatentTable};
use lattice_pipeline::dataset::Dataset;
use lattice_pipeline::eval::{evaluate, EvalReport};
use lattice_pipeline::features::{TrainingPoint, OUTPUT_NAMES};
use lattice_pipeline::fixtures;
use lattice_pipeline::generate::{augment_all, build_dataset, run_sims, sample_key_specs, sample_named_specs};
use lattice_pipeline::split::{choose_heldout, split_dataset, SplitSpec, DEFAULT_HELDOUT_KEYS};
use lattice_pipeline::train::{train_gru, EpochStats, GruConfig, TrainedGru};
use lattice_pipeline::transfer::{transfer_train, TransferConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;
const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(out: &mut Vec<Outcome>, id: u32, pass: bool, detail: String, started: Instant) {
    let line = format!(
        "criterion {id}: {} ({:.1}s) {detail}",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    println!("{line}");
    out.push(Outcome { id, pass, detail });
}

fn env_usize(name: &str, default: usize) -> usize {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

// ---------------------------------------------------------------- criterion 1

fn criterion_1() -> (bool, String) {
    let spec = ModelSpec::gru_regressor(106, &[300, 300, 300], 4);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let built = GruRegressor::new(106, &[300, 300, 300], 4, &mut rng).param_count();
    let total = spec.count_params();
    let ok = total == 1_452_004 && built == total && spec.count_params_without_head() == 1_450_800;
    (
        ok,
        format!(
            "GRU stack params {total} (built {built}, without head {}), expected 1452004",
            spec.count_params_without_head()
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

/// Worst relative error between an analytic gradient and central differences
/// of `loss` over every entry of every parameter block.
fn fd_worst<M: Params + Clone>(model: &M, grads: &[Vec<f64>], loss: &dyn Fn(&M) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (bi, block) in grads.iter().enumerate() {
        for (k, &a) in block.iter().enumerate() {
            let mut p = model.clone();
            p.param_blocks_mut()[bi][k] += FD_STEP;
            let mut m = model.clone();
            m.param_blocks_mut()[bi][k] -= FD_STEP;
            let num = (loss(&p) - loss(&m)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(a, num));
        }
    }
    worst
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[derive(Clone)]
struct Wrap<T>(T);

impl Params for Wrap<Matrix> {
    fn param_blocks(&self) -> Vec<&[f64]> {
        vec![&self.0.data]
    }
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.0.data]
    }
}

fn criterion_2() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let instances = 20;
    let mut worst = [0.0f64; 5];
    let acts = [Activation::Identity, Activation::Tanh, Activation::Sigmoid, Activation::Relu];
    for i in 0..instances {
        // Dense layer under a weighted-sum loss, parameters and inputs.
        let (n_in, n_out, batch) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..4));
        let mut layer = DenseLayer::new(n_in, n_out, acts[i % 4], &mut rng);
        for b in layer.b.iter_mut() {
            *b = rng.gen_range(-0.5..0.5);
        }
        let x = Matrix::uniform(batch, n_in, 1.0, &mut rng);
        let c = Matrix::uniform(batch, n_out, 1.0, &mut rng);
        let wsum = |y: &Matrix| y.data.iter().zip(&c.data).map(|(a, b)| a * b).sum::<f64>();
        let (_, cache) = layer.forward(&x).unwrap();
        let (g, dx) = layer.backward(&cache, &c).unwrap();
        let grads: Vec<Vec<f64>> = g.blocks().iter().map(|b| b.to_vec()).collect();
        worst[0] = worst[0].max(fd_worst(&layer, &grads, &|l: &DenseLayer| wsum(&l.predict(&x).unwrap())));
        worst[0] = worst[0].max(fd_worst(&Wrap(x.clone()), &[dx.data], &|w: &Wrap<Matrix>| {
            wsum(&layer.predict(&w.0).unwrap())
        }));

        // GRU layer over a short sequence.
        let (m, n, steps, batch) = (rng.gen_range(1..6), rng.gen_range(1..8), rng.gen_range(1..5), rng.gen_range(1..4));
        let mut gru = GruLayer::new(m, n, &mut rng);
        for b in gru.bx.iter_mut().chain(gru.bh.iter_mut()) {
            *b = rng.gen_range(-0.5..0.5);
        }
        let x = Matrix::uniform(steps * batch, m, 1.0, &mut rng);
        let c = Matrix::uniform(steps * batch, n, 1.0, &mut rng);
        let wsum = |y: &Matrix| y.data.iter().zip(&c.data).map(|(a, b)| a * b).sum::<f64>();
        let (_, cache) = gru.forward(&x, batch).unwrap();
        let (g, dx) = gru.backward(&cache, &c).unwrap();
        let grads: Vec<Vec<f64>> = g.blocks().iter().map(|b| b.to_vec()).collect();
        worst[1] = worst[1].max(fd_worst(&gru, &grads, &|l: &GruLayer| wsum(&l.forward(&x, batch).unwrap().0)));
        worst[1] = worst[1].max(fd_worst(&Wrap(x.clone()), &[dx.data], &|w: &Wrap<Matrix>| {
            wsum(&gru.forward(&w.0, batch).unwrap().0)
        }));

        // Three-layer GRU stack with dense head under MSE.
        let (m, steps, batch) = (rng.gen_range(2..5), rng.gen_range(1..4), rng.gen_range(1..3));
        let hidden = [rng.gen_range(2..5), rng.gen_range(2..5), rng.gen_range(2..5)];
        let model = GruRegressor::new(m, &hidden, 2, &mut rng);
        let x = Matrix::uniform(steps * batch, m, 1.0, &mut rng);
        let y = Matrix::uniform(steps * batch, 2, 1.0, &mut rng);
        let (_, grads) = model.loss_and_grads(&x, &y, batch, LossKind::Mse).unwrap();
        worst[2] = worst[2].max(fd_worst(&model, &grads, &|mm: &GruRegressor| {
            LossKind::Mse.value(&mm.predict(&x, batch).unwrap(), &y).unwrap()
        }));

        // Loss heads with respect to predictions.
        let (r, cc) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let pred = Matrix::uniform(r, cc, 2.0, &mut rng);
        let target = Matrix::uniform(r, cc, 2.0, &mut rng);
        for (slot, kind) in [(3, LossKind::Mse), (4, LossKind::Mae)] {
            let (_, g) = kind.eval(&pred, &target).unwrap();
            worst[slot] = worst[slot].max(fd_worst(&Wrap(pred.clone()), &[g.data], &|w: &Wrap<Matrix>| {
                kind.value(&w.0, &target).unwrap()
            }));
        }
    }
    let ok = worst.iter().all(|&w| w < FD_TOL);
    (
        ok,
        format!(
            "{instances} instances per kernel; worst relative error dense {:.1e}, gru {:.1e}, stack {:.1e}, mse {:.1e}, mae {:.1e} (limit 1e-4)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> (bool, String) {
    let mat = MaterialConfig::default();
    let keys = canonical_keys();
    let t_e = oracle::wave_arrival(lattice_core::geometry::HEIGHT_MM, &mat);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let (mut worst_balance, mut failures) = (0.0f64, Vec::new());
    for i in 0..1000 {
        let key = keys[rng.gen_range(0..keys.len())];
        let t = rng.gen_range(0.25..=0.75);
        let rate = 10f64.powf(rng.gen_range(2.0..=5.0));
        let fs = rng.gen_range(0.01..=0.2);
        let a = oracle::simulate(&key, t, rate, fs, &mat).unwrap();
        let b = oracle::simulate(&key, t, rate, fs, &mat).unwrap();
        let identical = format!("{:?}", a) == format!("{:?}", b)
            && a.outputs().iter().zip(b.outputs()).all(|(x, y)| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        for s in 0..a.time.len() {
            let total = a.pd[s] + a.dmd[s] + a.else_[s];
            worst_balance = worst_balance.max((a.work[s] - total).abs() / a.work[s].abs().max(1e-30));
        }
        let quiet = a.time.iter().zip(&a.rf).all(|(&tt, &f)| tt > t_e || f == 0.0);
        let mono = a.pd.windows(2).all(|w| w[1] >= w[0]) && a.dmd.windows(2).all(|w| w[1] >= w[0]);
        if !(identical && quiet && mono) {
            failures.push(format!("draw {i} ({key}): identical {identical} quiet {quiet} monotone {mono}"));
        }
    }
    let ok = failures.is_empty() && worst_balance <= 1e-9;
    (
        ok,
        format!(
            "1000 draws; worst energy balance error {worst_balance:.1e}; {} invariant failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> (bool, String) {
    let en = enumerate_keys();
    let domains: [&[u8]; 8] = [&[0, 1, 2], &[0, 1], &[2, 3, 4], &[2, 3, 4], &[0, 1], &[0, 1], &[0, 1, 2], &[0, 1]];
    let mut bad = 0usize;
    let mut valid = 0usize;
    let mut buf = [b'0'; 8];
    // Every string over digits 0-5: covers all legal digits and an illegal
    // value at each position.
    for code in 0..6usize.pow(8) {
        let mut c = code;
        for slot in buf.iter_mut().rev() {
            *slot = b'0' + (c % 6) as u8;
            c /= 6;
        }
        let text = std::str::from_utf8(&buf).unwrap();
        let legal = buf.iter().zip(domains).all(|(b, d)| d.contains(&(b - b'0')));
        match DesignKey::parse(text) {
            Ok(k) => {
                valid += 1;
                let shown = k.to_string();
                let back = DesignKey::parse(&shown).unwrap();
                if !legal || back != k || !k.is_canonical() || (shown == text) != is_canonical_text(&buf) {
                    bad += 1;
                }
            }
            Err(_) => bad += usize::from(legal),
        }
    }
    for bad_text in ["", "0023112", "002311210", "0023112a", "99999999", "30220000"] {
        bad += usize::from(DesignKey::parse(bad_text).is_ok());
    }
    let ok = en.canonical_count() == 900 && valid == 1296 && bad == 0;
    (
        ok,
        format!(
            "canonical {} (expected 900); deduplicated {} vs reference {REFERENCE_UNIQUE_COUNT}; {valid} legal strings parsed, {bad} round-trip failures",
            en.canonical_count(),
            en.unique_count()
        ),
    )
}

fn is_canonical_text(d: &[u8; 8]) -> bool {
    let v = |i: usize| d[i] - b'0';
    (v(0) != 0 || v(1) == 0) && (v(6) != 0 || v(7) == 0)
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> (bool, String) {
    let mat = MaterialConfig::default();
    let keys = &enumerate_keys().unique;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let sources: Vec<SimRecord> = sample_key_specs(keys, 20, SEED + 8)
        .iter()
        .map(|s| match &s.design {
            DesignId::Key(k) => oracle::simulate(k, s.thickness, s.strain_rate, 0.2, &mat).unwrap(),
            DesignId::Named(_) => unreachable!(),
        })
        .collect();
    let identity = sources.iter().all(|r| {
        let c = truncate_record(r, 0.2);
        c == *r && c.outputs().iter().zip(r.outputs()).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    });
    let mut failures = 0;
    for i in 0..1000 {
        let src = &sources[i % sources.len()];
        let c = &augment(src, &mut rng, 1)[0];
        let mono = c.pd.windows(2).all(|w| w[1] >= w[0]) && c.dmd.windows(2).all(|w| w[1] >= w[0]);
        let ends = c.strain[0] == 0.0
            && *c.strain.last().unwrap() == c.final_strain
            && (0.05..=0.2).contains(&c.final_strain)
            && c.outputs().iter().zip(src.outputs()).all(|(a, b)| a[0] == b[0])
            && c.time[0] == src.time[0];
        failures += usize::from(!(mono && ends));
    }
    (
        identity && failures == 0,
        format!("u = 0.20 identity over 20 records: {identity}; 1000 random copies, {failures} monotonicity/endpoint failures"),
    )
}

// ---------------------------------------------------------------- criterion 9 (parts)

fn round_trip_weights(wf: &WeightFile) -> bool {
    let a = wf.to_bytes().unwrap();
    let b = WeightFile::from_bytes(&a).unwrap().to_bytes().unwrap();
    a == b
}

fn criterion_9(ae: &Autoencoder, gru: &TrainedGru, data: &Dataset, sims: &[SimRecord]) -> (bool, String) {
    let ae_ok = round_trip_weights(&WeightFile::new(ae.spec(), ae));
    let gru_ok = round_trip_weights(&gru.to_weight_file());

    let mut a = Vec::new();
    data.write(&mut a).unwrap();
    let mut b = Vec::new();
    Dataset::read(&a[..]).unwrap().write(&mut b).unwrap();
    let ds_ok = a == b;
    let ds_bytes = a.len();

    let mut a = Vec::new();
    oracle::write_batch(sims, &mut a).unwrap();
    let back = oracle::read_batch(&a[..]).unwrap();
    let mut b = Vec::new();
    oracle::write_batch(&back, &mut b).unwrap();
    let batch_ok = a == b && back == sims;

    let keys = &enumerate_keys().unique;
    let pgm_ok = keys.iter().all(|k| {
        let img = raster::render_key(k);
        let bytes = img.to_pgm();
        let back = BitImage::from_pgm(&bytes).unwrap();
        back.packed() == img.packed() && back.to_pgm() == bytes
    });
    (
        ae_ok && gru_ok && ds_ok && batch_ok && pgm_ok,
        format!(
            "weights ae {ae_ok} gru {gru_ok}; dataset ({} points, {} bytes) {ds_ok}; oracle batch ({} records) {batch_ok}; PGM x{} {pgm_ok}",
            data.len(),
            ds_bytes,
            sims.len(),
            keys.len()
        ),
    )
}

// ---------------------------------------------------------------- criteria 5-7

fn fmt_means(r: &EvalReport) -> String {
    let v: Vec<String> = OUTPUT_NAMES
        .iter()
        .zip(r.mean)
        .map(|(n, m)| format!("{n} {:.1}%", 100.0 * m))
        .collect();
    format!("{} [{}]", r.set, v.join(", "))
}

fn main() {
    let hidden = env_usize("LATTICE_ACCEPT_HIDDEN", 64);
    let n_sims = env_usize("LATTICE_ACCEPT_SIMS", 1500);
    let gru_epochs = env_usize("LATTICE_ACCEPT_EPOCHS", 30);
    let mut out = Vec::new();
    println!("acceptance run: GRU width {hidden}x3, {n_sims} oracle sims, {gru_epochs} epochs");

    for (id, f) in [
        (1, criterion_1 as fn() -> (bool, String)),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (8, criterion_8),
    ] {
        let t = Instant::now();
        let (pass, detail) = f();
        report(&mut out, id, pass, detail, t);
    }

    let mat = MaterialConfig::default();
    let keys: Vec<DesignKey> = enumerate_keys().unique.clone();
    let heldout = choose_heldout(&keys, DEFAULT_HELDOUT_KEYS, SEED);
    let seen: Vec<DesignKey> = keys.iter().filter(|k| !heldout.contains(k)).copied().collect();

    // Criterion 5: autoencoder.
    let t = Instant::now();
    let seen_shuffled = choose_heldout(&seen, seen.len(), SEED + 5);
    let n_train = (0.8 * seen_shuffled.len() as f64).round() as usize;
    let images = |ks: &[DesignKey]| ks.iter().map(raster::render_key).collect::<Vec<_>>();
    let (ae_train, ae_test, ae_unseen) = (images(&seen_shuffled[..n_train]), images(&seen_shuffled[n_train..]), images(&heldout));
    let ae_cfg = AeConfig {
        seed: SEED,
        ..AeConfig::default()
    };
    let (ae, ae_trace) = train_autoencoder(&ae_train, &ae_cfg).unwrap();
    let named = fixtures::builtin();
    let fixture_images: Vec<BitImage> = named
        .keys()
        .map(|n| design_image(&DesignId::Named(n.clone()), &named).unwrap())
        .collect();
    let d_train = mean(&dsc_scores(&ae, &ae_train).unwrap());
    let d_test = mean(&dsc_scores(&ae, &ae_test).unwrap());
    let d_unseen = mean(&dsc_scores(&ae, &ae_unseen).unwrap());
    let d_fix = mean(&dsc_scores(&ae, &fixture_images).unwrap());
    report(
        &mut out,
        5,
        d_test >= 0.90 && d_unseen < d_train,
        format!(
            "{} train / {} test / {} unseen images, mse {:.4} -> {:.4}; mean DSC train {d_train:.4}, test {d_test:.4} (>= 0.90), unseen {d_unseen:.4} (< train), out-of-system fixtures {d_fix:.4}",
            ae_train.len(),
            ae_test.len(),
            ae_unseen.len(),
            ae_trace[0].train_loss,
            ae_trace.last().unwrap().train_loss
        ),
        t,
    );

    // Criterion 6: GRU surrogate.
    let t = Instant::now();
    let specs = sample_key_specs(&keys, n_sims, SEED + 6);
    let sims = run_sims(&specs, &BTreeMap::new(), &mat).unwrap();
    let augmented = augment_all(&sims, 12, SEED + 6);
    let mut designs: Vec<DesignId> = keys.iter().map(|&k| k.into()).collect();
    designs.extend(named.keys().map(|n| DesignId::Named(n.clone())));
    let latents = LatentTable::build(&ae, &designs, &named).unwrap();
    let data: &'static Dataset = Box::leak(Box::new(build_dataset(&augmented, &latents, &mat).unwrap()));
    let metas: Vec<_> = data.points.iter().map(|p| p.meta.clone()).collect();
    let split = split_dataset(&metas, &SplitSpec::new(heldout.iter().map(|&k| k.into()).collect(), SEED + 6)).unwrap();
    let pick = |idx: &[usize]| idx.iter().map(|&i| &data.points[i]).collect::<Vec<&TrainingPoint>>();
    let (train, val, test1, test2) = (pick(&split.train), pick(&split.val), pick(&split.test1), pick(&split.test2));
    let gru_cfg = GruConfig {
        hidden: vec![hidden; 3],
        epochs: gru_epochs,
        batch_size: 64,
        seed: SEED,
        ..GruConfig::default()
    };
    let (gru, trace) = train_gru(&train, &val, &gru_cfg).unwrap();
    let r_val = evaluate(&gru, "val", &val).unwrap();
    let r_t1 = evaluate(&gru, "test1", &test1).unwrap();
    let r_t2 = evaluate(&gru, "test2", &test2).unwrap();
    let finite = [&r_val, &r_t1, &r_t2].iter().all(|r| r.mean.iter().all(|v| v.is_finite()));
    let worse = (0..4).filter(|&o| r_t2.mean[o] >= r_t1.mean[o]).count();
    let (first, last): (&EpochStats, &EpochStats) = (&trace[0], trace.last().unwrap());
    let converged = last.train_loss <= 0.5 * first.train_loss;
    report(
        &mut out,
        6,
        finite && worse >= 3 && converged,
        format!(
            "{} sims -> {} points (train {}, val {}, test1 {}, test2 {}); {}; {}; {}; Test2 >= Test1 on {worse}/4 outputs; scaled train MAE {:.4} -> {:.4} over {} epochs",
            sims.len(),
            data.len(),
            train.len(),
            val.len(),
            test1.len(),
            test2.len(),
            fmt_means(&r_val),
            fmt_means(&r_t1),
            fmt_means(&r_t2),
            first.train_loss,
            last.train_loss,
            trace.len()
        ),
        t,
    );

    // Criterion 7: transfer to out-of-system geometries.
    let t = Instant::now();
    let names: Vec<String> = named.keys().cloned().collect();
    let new_specs = sample_named_specs(&names, 150, SEED + 7);
    let new_sims = run_sims(&new_specs, &named, &mat).unwrap();
    // 40% of the simulations (20 per geometry) train, the rest are held out.
    let (tr_sims, ho_sims): (Vec<_>, Vec<_>) = new_sims.into_iter().enumerate().partition(|(i, _)| i % 5 < 2);
    let strip = |v: Vec<(usize, SimRecord)>| v.into_iter().map(|(_, r)| r).collect::<Vec<_>>();
    let (tr_sims, ho_sims) = (strip(tr_sims), strip(ho_sims));
    let new_train = build_dataset(&augment_all(&tr_sims, TRANSFER_COPIES, SEED + 71), &latents, &mat).unwrap();
    let new_hold = build_dataset(&augment_all(&ho_sims, TRANSFER_COPIES, SEED + 72), &latents, &mat).unwrap();
    let tcfg = TransferConfig {
        train: GruConfig {
            epochs: 20,
            ..gru_cfg.clone()
        },
        replay: 5000,
    };
    let nt: Vec<&TrainingPoint> = new_train.points.iter().collect();
    let nh: Vec<&TrainingPoint> = new_hold.points.iter().collect();
    let (_, rep) = transfer_train(&gru, &nt, &nh, &train, &test2, &tcfg).unwrap();
    let new_change = rep.new_change();
    let t2_change = rep.test2_change();
    let improved = new_change.iter().all(|&c| c < 0.0);
    let no_forgetting = t2_change.iter().all(|&c| c < 0.2);
    let pct = |v: [f64; 4]| {
        OUTPUT_NAMES
            .iter()
            .zip(v)
            .map(|(n, c)| format!("{n} {:+.1}%", 100.0 * c))
            .collect::<Vec<_>>()
            .join(", ")
    };
    report(
        &mut out,
        7,
        improved && no_forgetting,
        format!(
            "{} new train points + 5000 replay, {} new holdout; new geometry {} -> {}; change [{}] (all < 0); Test2 change [{}] (all < +20%)",
            nt.len(),
            nh.len(),
            fmt_means(&rep.new_before),
            fmt_means(&rep.new_after),
            pct(new_change),
            pct(t2_change)
        ),
        t,
    );

    let t = Instant::now();
    let (pass, detail) = criterion_9(&ae, &gru, data, &sims[..50]);
    report(&mut out, 9, pass, detail, t);

    out.sort_by_key(|o| o.id);
    println!("\nsummary:");
    for o in &out {
        println!("  criterion {}: {}", o.id, if o.pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<_> = out.iter().filter(|o| !o.pass).collect();
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("criterion {} failed: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
