use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use noisycan_core::data::SyntheticSpec;
use noisycan_core::eval::{cell_data, EvalReport, SweepData};
use noisycan_core::network::{ClassifierNet, ParamGroup};
use noisycan_core::objective::{write_loss_log, LossRecord};
use noisycan_core::{
    corrupt_labels, evaluate, export_diagnostics, gradient_check, load_checkpoint, read_csv, save_checkpoint, split,
    train, train_baseline, write_csv, Dataset, GradCheckConfig, ModelParams, NoiseConfig, TrainingConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{EvalArgs, ExportDiagArgs, GenDataArgs, GradcheckArgs, Preset, SweepArgs, TrainArgs};

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const LOSS_FILE: &str = "loss.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DIAGNOSTICS_DIR: &str = "diagnostics";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Can,
    Baseline,
}

/// Everything needed to repeat a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: Model,
    pub data: PathBuf,
    pub test: Option<PathBuf>,
    pub diag_seed: u64,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub synthetic: SyntheticSpec,
    pub noise: NoiseConfig,
    pub test_fraction: f64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub data: SweepData,
    pub p_noise: Vec<f64>,
    pub seeds: u64,
    pub lambdas: Vec<f64>,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub p_noise: f64,
    pub seed: u64,
    pub model: Model,
    pub map: f64,
    pub accuracy: f64,
    pub lambda: f64,
    /// Empty on success, otherwise why the cell produced no metrics.
    pub error: String,
}

fn run_dir(out: &Option<PathBuf>, root: &Path, name: String) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(|| root.join(name));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    Ok(text)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    read_csv(path).with_context(|| format!("reading dataset {}", path.display()))
}

pub fn gen_data(args: &GenDataArgs, root: &Path) -> Result<()> {
    let cfg = GenConfig {
        synthetic: SyntheticSpec {
            classes: args.classes,
            features: args.features,
            per_class: args.per_class,
            spread: args.spread,
            seed: args.seed,
            labels_per_row: args.labels_per_row,
        },
        noise: NoiseConfig {
            p_noise: args.p_noise,
            seed: args.seed.wrapping_add(200),
        },
        test_fraction: args.test_fraction,
        split_seed: args.seed.wrapping_add(100),
    };
    ensure!(
        (0.0..1.0).contains(&cfg.test_fraction),
        "--test-fraction must be in [0, 1), got {}",
        cfg.test_fraction
    );
    let dir = run_dir(&args.out, root, format!("data-seed{}", args.seed))?;
    let ds = cfg.synthetic.generate()?;
    if cfg.test_fraction == 0.0 {
        write_csv(&dir.join("data.csv"), &corrupt_labels(&ds, cfg.noise)?)?;
    } else {
        let (train_set, test_set) = split(&ds, 1.0 - cfg.test_fraction, cfg.split_seed)?;
        write_csv(&dir.join("train.csv"), &corrupt_labels(&train_set, cfg.noise)?)?;
        write_csv(&dir.join("test.csv"), &test_set)?;
    }
    write_json(&dir.join(CONFIG_FILE), &cfg)?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn train_run(args: &TrainArgs, model: Model, root: &Path) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg: RunConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing run config {}", path.display()))?;
            ensure!(cfg.model == model, "{} holds a {:?} run", path.display(), cfg.model);
            cfg
        }
        None => RunConfig {
            model,
            data: args.data.clone().expect("clap requires --data without --config"),
            test: args.test.clone(),
            diag_seed: args.diag_seed,
            training: args.training.resolve(Preset::Reference),
        },
    };
    cfg.training.validate()?;
    let name = match model {
        Model::Can => "train",
        Model::Baseline => "train-baseline",
    };
    let dir = run_dir(&args.out, root, format!("{name}-seed{}", cfg.training.seed))?;
    let config_json = write_json(&dir.join(CONFIG_FILE), &cfg)?;

    let data = load_dataset(&cfg.data)?;
    let test = cfg.test.as_deref().map(load_dataset).transpose()?;
    let (params, log): (ModelParams, Vec<LossRecord>) = match model {
        Model::Can => {
            let out = train(&data, &cfg.training).context("training failed")?;
            (out.params, out.log)
        }
        Model::Baseline => {
            let out = train_baseline(&data, &cfg.training).context("training failed")?;
            let net = cfg.training.arch.network(data.feature_dim(), data.classes());
            let mut params = ModelParams::new(net, cfg.training.seed)?;
            params.classifier = out.classifier;
            (params, out.log)
        }
    };
    save_checkpoint(&params, &dir.join(CHECKPOINT_DIR), cfg.training.seed, &config_json)?;
    write_loss_log(&dir.join(LOSS_FILE), &log)?;

    let mut metrics = Vec::new();
    for (split_name, ds) in [("train", Some(&data)), ("test", test.as_ref())] {
        if let Some(ds) = ds.filter(|d| d.clean_labels.is_some()) {
            metrics.push((split_name, evaluate(&params.classifier, ds)?));
        }
    }
    write_metrics(&dir.join(METRICS_FILE), &metrics, data.classes())?;
    if model == Model::Can {
        export_diagnostics(&params, &data, &dir.join(DIAGNOSTICS_DIR), cfg.diag_seed)?;
    }
    if let Some(last) = log.last() {
        println!("step {} loss {:.4} lr {}", last.step, last.total, last.lr);
    }
    for (split_name, r) in &metrics {
        println!("{split_name}: mAP {:.4} accuracy {:.4}", r.map, r.accuracy);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn write_metrics_to<W: Write>(w: W, metrics: &[(&str, EvalReport)], classes: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec!["split".to_string(), "map".into(), "accuracy".into()];
    header.extend((0..classes).map(|c| format!("ap_c{c}")));
    w.write_record(&header)?;
    for (name, r) in metrics {
        let mut rec = vec![name.to_string(), r.map.to_string(), r.accuracy.to_string()];
        rec.extend(
            r.per_class_ap
                .iter()
                .map(|ap| ap.map_or(String::new(), |v| v.to_string())),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_metrics(path: &Path, metrics: &[(&str, EvalReport)], classes: usize) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    write_metrics_to(file, metrics, classes)
}

fn load_classifier(run: &Path) -> Result<(ModelParams, ClassifierNet)> {
    let (params, _) = load_checkpoint(&run.join(CHECKPOINT_DIR))
        .with_context(|| format!("loading checkpoint from {}", run.display()))?;
    let classifier = params.classifier.clone();
    Ok((params, classifier))
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let (_, classifier) = load_classifier(&args.run)?;
    let ds = load_dataset(&args.data)?;
    let report = evaluate(&classifier, &ds)?;
    let metrics = [("eval", report)];
    match &args.out {
        Some(path) => write_metrics(path, &metrics, ds.classes()),
        None => write_metrics_to(std::io::stdout().lock(), &metrics, ds.classes()),
    }
}

pub fn export_diag(args: &ExportDiagArgs) -> Result<()> {
    let (params, _) = load_classifier(&args.run)?;
    let data_path = match &args.data {
        Some(p) => p.clone(),
        None => {
            let path = args.run.join(CONFIG_FILE);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<RunConfig>(&text)?.data
        }
    };
    let ds = load_dataset(&data_path)?;
    let out = args.out.clone().unwrap_or_else(|| args.run.join(DIAGNOSTICS_DIR));
    let report = export_diagnostics(&params, &ds, &out, args.seed)?;
    let (t, n) = (
        report.trustworthy.iter().flatten().sum::<u64>(),
        report.non_trustworthy.iter().flatten().sum::<u64>(),
    );
    println!("trustworthy rows {t}, non-trustworthy rows {n}");
    println!("wrote {}", out.display());
    Ok(())
}

/// Returns whether every group passed.
pub fn gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let mut cfg = GradCheckConfig::with_seed(args.seed);
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(t) = args.tau {
        cfg.tau = t;
    }
    let report = gradient_check(&cfg, args.tol)?;
    println!(
        "{:<20} {:>7} {:>14} {:>14}",
        "group", "params", "max_rel_err", "max_abs_err"
    );
    for g in &report.groups {
        println!(
            "{:<20} {:>7} {:>14.3e} {:>14.3e}",
            group_label(g.group),
            g.params,
            g.max_rel_error,
            g.max_abs_error
        );
    }
    println!(
        "{} (worst {:.3e}, tolerance {:.1e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.worst(),
        report.tolerance
    );
    Ok(report.passed)
}

fn group_label(g: ParamGroup) -> String {
    format!("{} ({})", g.symbol(), g.name())
}

pub fn sweep_noise(args: &SweepArgs, root: &Path) -> Result<()> {
    ensure!(args.seeds > 0, "--seeds must be at least 1");
    if let Some(p) = args.pnoise.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        bail!("--pnoise values must lie in [0, 1], got {p}");
    }
    let training = args.training.resolve(Preset::Desk);
    training.validate()?;
    let cfg = SweepConfig {
        data: SweepData {
            classes: args.classes,
            features: args.features,
            spread: args.spread,
            train_rows: args.train_rows,
            test_rows: args.test_rows,
        },
        p_noise: args.pnoise.clone(),
        seeds: args.seeds,
        lambdas: args.lambda_grid(&training),
        training,
    };
    let dir = run_dir(&args.out, root, "sweep-noise".to_string())?;
    write_json(&dir.join(CONFIG_FILE), &cfg)?;

    let cells: Vec<(f64, f64, u64)> = cfg
        .lambdas
        .iter()
        .flat_map(|&l| {
            cfg.p_noise
                .iter()
                .flat_map(move |&p| (0..cfg.seeds).map(move |s| (l, p, s)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let rows: Vec<SweepRecord> = pool.install(|| {
        cells
            .par_iter()
            .flat_map_iter(|&(lambda, p, seed)| sweep_cell(&cfg, lambda, p, seed))
            .collect()
    });
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();

    let path = dir.join(SWEEP_FILE);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} rows have no metrics, see the error column",
            rows.len()
        );
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn sweep_cell(cfg: &SweepConfig, lambda: f64, p_noise: f64, seed: u64) -> [SweepRecord; 2] {
    let training = TrainingConfig {
        lambda,
        seed,
        ..cfg.training.clone()
    };
    let row = |model, r: Result<EvalReport, String>| {
        let (map, accuracy, error) = match r {
            Ok(r) => (r.map, r.accuracy, String::new()),
            Err(e) => (f64::NAN, f64::NAN, e),
        };
        SweepRecord {
            p_noise,
            seed,
            model,
            map,
            accuracy,
            lambda,
            error,
        }
    };
    let (train_set, test_set) = match cell_data(&cfg.data, p_noise, seed) {
        Ok(d) => d,
        Err(e) => {
            return [
                row(Model::Can, Err(e.to_string())),
                row(Model::Baseline, Err(e.to_string())),
            ]
        }
    };
    let can = train(&train_set, &training).and_then(|o| evaluate(&o.params.classifier, &test_set));
    let baseline = train_baseline(&train_set, &training).and_then(|o| evaluate(&o.classifier, &test_set));
    [
        row(Model::Can, can.map_err(|e| e.to_string())),
        row(Model::Baseline, baseline.map_err(|e| e.to_string())),
    ]
}
