//! Subcommand implementations.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use lattice_core::geometry::CurveSet;
use lattice_core::keyspace::{enumerate_keys, DesignKey, REFERENCE_UNIQUE_COUNT};
use lattice_core::oracle::{self, DesignId};
use lattice_core::raster::{self, BitImage};
use lattice_nn::weights::WeightFile;
use lattice_nn::Autoencoder;
use lattice_pipeline::autoencoder::{dsc_scores, mean, train_autoencoder, LatentTable};
use lattice_pipeline::dataset::Dataset;
use lattice_pipeline::eval::{evaluate, EvalReport};
use lattice_pipeline::features::{build_features, TrainingPoint, FEATURE_LAYOUT_VERSION, OUTPUT_NAMES};
use lattice_pipeline::fixtures;
use lattice_pipeline::generate::{augment_all, build_dataset, run_sims, sample_key_specs, sample_named_specs};
use lattice_pipeline::split::{choose_heldout, split_dataset, Split, SplitSpec};
use lattice_pipeline::train::{self, write_trace_csv, TrainedGru};
use lattice_pipeline::transfer::transfer_train;

use crate::config::RunConfig;
use crate::{AeArgs, EvalArgs, GenerateArgs, GruArgs, PredictArgs, TransferArgs, UsageError};

pub const SPLIT_SETS: [&str; 4] = ["train", "val", "test1", "test2"];

/// Resolved configuration, output directory and the files written so far.
pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    argv: Vec<String>,
    outputs: Vec<PathBuf>,
}

impl Context {
    pub fn new(cfg: RunConfig, out_dir: PathBuf, argv: Vec<String>) -> Self {
        Context {
            cfg,
            out_dir,
            argv,
            outputs: Vec::new(),
        }
    }

    fn prepare(&self) -> Result<()> {
        self.cfg.validate()?;
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Creates `path`, hands a buffered writer to `f` and records the output.
    fn write_with<F>(&mut self, path: PathBuf, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path);
        Ok(())
    }

    fn write_bytes(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        self.write_with(path, |w| Ok(w.write_all(bytes)?))
    }

    /// Writes `manifest-<command>.toml` with the resolved config, the
    /// command line, versions and the list of outputs.
    fn finish(&mut self, command: &str) -> Result<()> {
        let mut run = toml::Table::new();
        run.insert("command".into(), command.into());
        run.insert("argv".into(), self.argv.clone().into());
        run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        run.insert("feature_layout".into(), i64::from(FEATURE_LAYOUT_VERSION).into());
        let outputs: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        run.insert("outputs".into(), outputs.into());
        let text = self.cfg.manifest(run)?;
        let path = self.path(&format!("manifest-{}.toml", command.replace(' ', "-")));
        self.write_bytes(path, text.as_bytes())
    }
}

fn load_weights(path: &Path) -> Result<WeightFile> {
    WeightFile::load(path).with_context(|| format!("loading weights {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn load_ae(path: &Path) -> Result<Autoencoder> {
    let wf = load_weights(path)?;
    Autoencoder::from_blocks(&wf.spec, &wf.blocks).with_context(|| format!("{} is not an autoencoder", path.display()))
}

fn load_gru(path: &Path) -> Result<TrainedGru> {
    let wf = load_weights(path)?;
    TrainedGru::from_weight_file(&wf).with_context(|| format!("{} is not a GRU surrogate", path.display()))
}

/// Held-out, AE-train and AE-test key lists derived from the seed.
pub fn key_partition(cfg: &RunConfig) -> (Vec<DesignKey>, Vec<DesignKey>, Vec<DesignKey>) {
    let keys = &enumerate_keys().unique;
    let heldout = choose_heldout(keys, cfg.data.heldout, cfg.seed);
    let held: HashSet<&DesignKey> = heldout.iter().collect();
    let seen: Vec<DesignKey> = keys.iter().filter(|k| !held.contains(k)).copied().collect();
    let seen = choose_heldout(&seen, seen.len(), cfg.seed.wrapping_add(1));
    let n_train = (cfg.ae.train_frac * seen.len() as f64).round() as usize;
    let (train, test) = seen.split_at(n_train);
    (heldout, train.to_vec(), test.to_vec())
}

pub fn keys_enumerate(ctx: &mut Context) -> Result<()> {
    ctx.prepare()?;
    let en = enumerate_keys();
    let mut stdout = std::io::stdout().lock();
    for k in &en.unique {
        writeln!(stdout, "{k}")?;
    }
    eprintln!(
        "{} canonical keys, {} after image deduplication (reference count {REFERENCE_UNIQUE_COUNT})",
        en.canonical_count(),
        en.unique_count()
    );
    let text: String = en.unique.iter().map(|k| format!("{k}\n")).collect();
    ctx.write_bytes(ctx.path("keys.txt"), text.as_bytes())?;
    ctx.finish("keys enumerate")
}

pub fn keys_render(ctx: &mut Context, key: &DesignKey, output: Option<PathBuf>) -> Result<()> {
    ctx.prepare()?;
    let img = raster::render_key(key);
    let path = output.unwrap_or_else(|| ctx.path(&format!("{key}.pgm")));
    ctx.write_bytes(path.clone(), &img.to_pgm())?;
    println!("{} ({} skeleton pixels)", path.display(), img.popcount());
    ctx.finish("keys render")
}

fn fixture_curves(dir: Option<&Path>) -> Result<BTreeMap<String, CurveSet>> {
    match dir {
        Some(d) => {
            let named = fixtures::load_dir(d).with_context(|| format!("loading fixtures from {}", d.display()))?;
            if named.is_empty() {
                return Err(UsageError(format!("no .curves files in {}", d.display())).into());
            }
            Ok(named)
        }
        None => Ok(fixtures::builtin()),
    }
}

pub fn data_generate(ctx: &mut Context, a: GenerateArgs) -> Result<()> {
    if let Some(n) = a.n {
        ctx.cfg.data.n = n;
    }
    if let Some(k) = a.k {
        if a.fixtures {
            ctx.cfg.data.fixture_k = k;
        } else {
            ctx.cfg.data.k = k;
        }
    }
    ctx.prepare()?;
    let (cfg, seed) = (ctx.cfg.clone(), ctx.cfg.seed);
    let (specs, named, k) = if a.fixtures {
        let named = fixture_curves(a.fixtures_dir.as_deref())?;
        let names: Vec<String> = named.keys().cloned().collect();
        (sample_named_specs(&names, cfg.data.n, seed), named, cfg.data.fixture_k)
    } else {
        (sample_key_specs(&enumerate_keys().unique, cfg.data.n, seed), BTreeMap::new(), cfg.data.k)
    };
    log::info!("running {} oracle simulations", specs.len());
    let sims = run_sims(&specs, &named, &cfg.material)?;
    ctx.write_with(ctx.path("sims.bin"), |w| Ok(oracle::write_batch(&sims, w)?))?;
    ctx.write_with(ctx.path("sims.csv"), |w| Ok(oracle::write_csv(&sims, w)?))?;
    let augmented = augment_all(&sims, k, seed);
    ctx.write_with(ctx.path("augmented.bin"), |w| Ok(oracle::write_batch(&augmented, w)?))?;
    let mut summary = format!("{} simulations, {} augmented records", sims.len(), augmented.len());
    if let Some(ae_path) = &a.ae {
        let ae = load_ae(ae_path)?;
        let designs: Vec<DesignId> = augmented.iter().map(|r| r.design.clone()).collect();
        let latents = LatentTable::build(&ae, &designs, &named)?;
        let ds = build_dataset(&augmented, &latents, &cfg.material)?;
        ctx.write_with(ctx.path("dataset.bin"), |w| Ok(ds.write(w)?))?;
        if a.csv {
            ctx.write_with(ctx.path("dataset.csv"), |w| Ok(ds.write_csv(w)?))?;
        }
        summary.push_str(&format!(", {} training points", ds.len()));
    }
    println!("{summary}");
    ctx.finish("data generate")
}

pub fn train_ae(ctx: &mut Context, a: AeArgs) -> Result<()> {
    let c = &mut ctx.cfg;
    c.ae.epochs = a.epochs.unwrap_or(c.ae.epochs);
    c.ae.batch_size = a.batch_size.unwrap_or(c.ae.batch_size);
    c.ae.lr0 = a.lr.unwrap_or(c.ae.lr0);
    c.data.heldout = a.heldout.unwrap_or(c.data.heldout);
    ctx.prepare()?;
    let (heldout, train_keys, test_keys) = key_partition(&ctx.cfg);
    let images = |ks: &[DesignKey]| ks.iter().map(raster::render_key).collect::<Vec<BitImage>>();
    let (train_imgs, test_imgs, unseen_imgs) = (images(&train_keys), images(&test_keys), images(&heldout));
    let (ae, trace) = train_autoencoder(&train_imgs, &ctx.cfg.ae_config())?;

    let wf = WeightFile::new(ae.spec(), &ae);
    ctx.write_bytes(ctx.path("ae.weights"), &wf.to_bytes()?)?;
    ctx.write_with(ctx.path("ae_trace.csv"), |w| {
        writeln!(w, "epoch,train_mse")?;
        for e in &trace {
            writeln!(w, "{},{}", e.epoch, e.train_loss)?;
        }
        Ok(())
    })?;
    let held_text: String = heldout.iter().map(|k| format!("{k}\n")).collect();
    ctx.write_bytes(ctx.path("heldout.txt"), held_text.as_bytes())?;

    let named = fixtures::builtin();
    let fixture_imgs: Vec<BitImage> = named.values().map(|c| raster::rasterize(&lattice_core::geometry::image_frame(c)).image).collect();
    let groups: Vec<(&str, Vec<String>, Vec<f64>)> = vec![
        ("train", names(&train_keys), dsc_scores(&ae, &train_imgs)?),
        ("test", names(&test_keys), dsc_scores(&ae, &test_imgs)?),
        ("unseen", names(&heldout), dsc_scores(&ae, &unseen_imgs)?),
        ("fixture", named.keys().cloned().collect(), dsc_scores(&ae, &fixture_imgs)?),
    ];
    ctx.write_with(ctx.path("ae_dsc.csv"), |w| {
        writeln!(w, "set,design,dsc")?;
        for (set, ds, scores) in &groups {
            for (d, s) in ds.iter().zip(scores) {
                writeln!(w, "{set},{d},{s}")?;
            }
        }
        Ok(())
    })?;
    for (set, ds, scores) in &groups {
        println!("{set}: {} designs, mean DSC {:.4}", ds.len(), mean(scores));
    }
    ctx.finish("train ae")
}

fn names(keys: &[DesignKey]) -> Vec<String> {
    keys.iter().map(|k| k.to_string()).collect()
}

fn read_heldout(path: &Path) -> Result<Vec<DesignId>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<DesignId>().expect("infallible"))
        .collect())
}

pub fn write_split<W: Write>(split: &Split, mut w: W) -> std::io::Result<()> {
    writeln!(w, "index,set")?;
    let mut rows: Vec<(usize, &str)> = Vec::with_capacity(split.total());
    for (name, idx) in SPLIT_SETS.iter().zip([&split.train, &split.val, &split.test1, &split.test2]) {
        rows.extend(idx.iter().map(|&i| (i, *name)));
    }
    rows.sort_unstable();
    for (i, name) in rows {
        writeln!(w, "{i},{name}")?;
    }
    Ok(())
}

pub fn read_split(path: &Path, n_points: usize) -> Result<Split> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut split = Split::default();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let bad = || anyhow::anyhow!("{}:{}: expected `index,set`", path.display(), line_no + 1);
        let (i, set) = line.split_once(',').ok_or_else(bad)?;
        let i: usize = i.parse().map_err(|_| bad())?;
        if i >= n_points {
            anyhow::bail!("{}: index {i} outside a dataset of {n_points} points", path.display());
        }
        match set {
            "train" => split.train.push(i),
            "val" => split.val.push(i),
            "test1" => split.test1.push(i),
            "test2" => split.test2.push(i),
            _ => return Err(bad()),
        }
    }
    Ok(split)
}

fn pick<'a>(ds: &'a Dataset, idx: &[usize]) -> Vec<&'a TrainingPoint> {
    idx.iter().map(|&i| &ds.points[i]).collect()
}

fn write_reports(ctx: &mut Context, name: &str, reports: &[(String, EvalReport)]) -> Result<()> {
    ctx.write_with(ctx.path(&format!("{name}.csv")), |w| {
        writeln!(w, "label,{}", EvalReport::SUMMARY_HEADER)?;
        for (label, r) in reports {
            writeln!(w, "{label},{}", r.summary_row())?;
        }
        Ok(())
    })
}

pub fn train_gru(ctx: &mut Context, a: GruArgs) -> Result<()> {
    let g = &mut ctx.cfg.gru;
    g.epochs = a.epochs.unwrap_or(g.epochs);
    g.batch_size = a.batch_size.unwrap_or(g.batch_size);
    g.lr0 = a.lr.unwrap_or(g.lr0);
    g.decay = a.decay.unwrap_or(g.decay);
    if let Some(h) = a.hidden {
        g.hidden = h;
    }
    if let Some(l) = a.loss {
        g.loss = l;
    }
    ctx.prepare()?;
    let cfg = ctx.cfg.gru_config()?;
    let ds = load_dataset(&a.data)?;
    let heldout = match &a.heldout {
        Some(p) => read_heldout(p)?,
        None => key_partition(&ctx.cfg).0.into_iter().map(DesignId::Key).collect(),
    };
    let metas: Vec<_> = ds.points.iter().map(|p| p.meta.clone()).collect();
    let split = split_dataset(&metas, &SplitSpec::new(heldout, ctx.cfg.seed))?;
    ctx.write_with(ctx.path("split.csv"), |w| Ok(write_split(&split, w)?))?;
    let (train_pts, val_pts) = (pick(&ds, &split.train), pick(&ds, &split.val));
    println!(
        "{} points: train {}, val {}, test1 {}, test2 {}",
        ds.len(),
        split.train.len(),
        split.val.len(),
        split.test1.len(),
        split.test2.len()
    );
    let (model, trace) = train::train_gru(&train_pts, &val_pts, &cfg)?;
    ctx.write_bytes(ctx.path("gru.weights"), &model.to_weight_file().to_bytes()?)?;
    ctx.write_with(ctx.path("gru_trace.csv"), |w| Ok(write_trace_csv(&trace, w)?))?;
    let mut reports = Vec::new();
    for (name, idx) in [("val", &split.val), ("test1", &split.test1), ("test2", &split.test2)] {
        if !idx.is_empty() {
            let r = evaluate(&model, name, &pick(&ds, idx))?;
            println!("{r}");
            reports.push((name.to_string(), r));
        }
    }
    write_reports(ctx, "gru_eval", &reports)?;
    ctx.finish("train gru")
}

/// Groups augmented points by their source simulation and assigns a
/// `frac` share of the simulations to training.
pub fn split_by_simulation(ds: &Dataset, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let sim_of = |p: &TrainingPoint| (p.meta.design.clone(), p.meta.thickness.to_bits(), p.meta.strain_rate.to_bits());
    let mut sims = Vec::new();
    let mut seen = HashSet::new();
    for p in &ds.points {
        if seen.insert(sim_of(p)) {
            sims.push(sim_of(p));
        }
    }
    let n_train = ((frac * sims.len() as f64).round() as usize).clamp(1, sims.len().max(1));
    let chosen: HashSet<_> = choose_heldout(&sims, n_train, seed).into_iter().collect();
    (0..ds.len()).partition(|&i| chosen.contains(&sim_of(&ds.points[i])))
}

pub fn train_transfer(ctx: &mut Context, a: TransferArgs) -> Result<()> {
    let t = &mut ctx.cfg.transfer;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.replay = a.replay.unwrap_or(t.replay);
    t.new_train_frac = a.new_train_frac.unwrap_or(t.new_train_frac);
    ctx.cfg.gru.batch_size = a.batch_size.unwrap_or(ctx.cfg.gru.batch_size);
    ctx.prepare()?;
    let cfg = ctx.cfg.transfer_config()?;
    let base = load_gru(&a.base)?;
    let ds = load_dataset(&a.data)?;
    let split = read_split(&a.split, ds.len())?;
    let new = load_dataset(&a.new_data)?;
    let (new_train, new_hold) = split_by_simulation(&new, ctx.cfg.transfer.new_train_frac, ctx.cfg.seed);
    if new_hold.is_empty() {
        return Err(UsageError("new-geometry dataset leaves no held-out simulations".into()).into());
    }
    let (model, rep) = transfer_train(
        &base,
        &pick(&new, &new_train),
        &pick(&new, &new_hold),
        &pick(&ds, &split.train),
        &pick(&ds, &split.test2),
        &cfg,
    )?;
    ctx.write_bytes(ctx.path("transfer.weights"), &model.to_weight_file().to_bytes()?)?;
    ctx.write_with(ctx.path("transfer_trace.csv"), |w| Ok(write_trace_csv(&rep.trace, w)?))?;
    let reports = [
        ("before".to_string(), rep.test2_before.clone()),
        ("after".to_string(), rep.test2_after.clone()),
        ("before".to_string(), rep.new_before.clone()),
        ("after".to_string(), rep.new_after.clone()),
    ];
    write_reports(ctx, "transfer_eval", &reports)?;
    let fmt = |v: [f64; 4]| {
        OUTPUT_NAMES
            .iter()
            .zip(v)
            .map(|(n, c)| format!("{n} {:+.1}%", 100.0 * c))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("{} new training points, {} held out", new_train.len(), new_hold.len());
    println!("new geometries: {} -> {}", rep.new_before, rep.new_after);
    println!("relative change on new geometries: {}", fmt(rep.new_change()));
    println!("relative change on test2: {}", fmt(rep.test2_change()));
    ctx.finish("train transfer")
}

pub fn eval(ctx: &mut Context, a: EvalArgs) -> Result<()> {
    ctx.prepare()?;
    let model = load_gru(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let split = a.split.as_deref().map(|p| read_split(p, ds.len())).transpose()?;
    let mut sets = a.sets.clone();
    if sets.is_empty() {
        sets = match split {
            Some(_) => vec!["val".into(), "test1".into(), "test2".into()],
            None => vec!["all".into()],
        };
    }
    let mut reports = Vec::new();
    for set in &sets {
        let idx: Vec<usize> = match (set.as_str(), &split) {
            ("all", _) => (0..ds.len()).collect(),
            (s, Some(sp)) if SPLIT_SETS.contains(&s) => match s {
                "train" => sp.train.clone(),
                "val" => sp.val.clone(),
                "test1" => sp.test1.clone(),
                _ => sp.test2.clone(),
            },
            (s, None) if SPLIT_SETS.contains(&s) => return Err(UsageError(format!("--set {s} needs --split")).into()),
            (s, _) => return Err(UsageError(format!("unknown set {s:?} (train, val, test1, test2, all)")).into()),
        };
        if idx.is_empty() {
            return Err(UsageError(format!("set {set} has no points")).into());
        }
        let r = evaluate(&model, set, &pick(&ds, &idx))?;
        println!("{r}");
        ctx.write_with(ctx.path(&format!("eval_cases_{set}.csv")), |w| Ok(r.write_cases_csv(w)?))?;
        reports.push((set.clone(), r));
    }
    write_reports(ctx, "eval_summary", &reports)?;
    ctx.finish("eval")
}

pub fn predict(ctx: &mut Context, a: PredictArgs) -> Result<()> {
    ctx.prepare()?;
    let mat = ctx.cfg.material;
    if !(a.thickness > 0.0 && a.rate > 0.0 && a.final_strain > 0.0 && a.final_strain <= oracle::DEFAULT_FINAL_STRAIN) {
        return Err(UsageError("need thickness > 0, rate > 0 and 0 < final strain <= 0.2".into()).into());
    }
    let model = load_gru(&a.model)?;
    let ae = load_ae(&a.ae)?;
    let mut named = BTreeMap::new();
    let (design, record) = match (&a.key, &a.curves) {
        (Some(k), _) => (DesignId::Key(*k), oracle::simulate(k, a.thickness, a.rate, a.final_strain, &mat)?),
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let curves: CurveSet = text.parse().with_context(|| format!("parsing {}", p.display()))?;
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("curves").to_string();
            let rec = oracle::simulate_curves(&name, &curves, a.thickness, a.rate, a.final_strain, &mat)?;
            named.insert(name.clone(), curves);
            (DesignId::Named(name), rec)
        }
        (None, None) => return Err(UsageError("give --key or --curves".into()).into()),
    };
    let latents = LatentTable::build(&ae, [&design], &named)?;
    let point = build_features(&record, latents.get(&design)?, &mat)?;
    let pred = model.predict(&[&point])?.remove(0);
    let path = ctx.path(&format!("prediction_{design}.csv"));
    ctx.write_with(path.clone(), |w| {
        writeln!(w, "step,strain,time_s,rf,pd,dmd,else,rf_oracle,pd_oracle,dmd_oracle,else_oracle")?;
        let truth = record.outputs();
        for t in 0..pred.rows {
            write!(w, "{t},{},{}", record.strain[t], record.time[t])?;
            for o in 0..4 {
                write!(w, ",{}", pred.get(t, o))?;
            }
            for series in truth {
                write!(w, ",{}", series[t])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    println!("{}", path.display());
    ctx.finish("predict")
}
