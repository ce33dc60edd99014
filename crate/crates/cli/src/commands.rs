//! Subcommand implementations. Each writes a JSON report plus a text table
//! into the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use spacesqueeze::data::{
    split_dataset, svol_write, FoldSplit, Label, Manifest, ManifestEntry, PhantomSetSpec, PreparedSet, SplitRole,
};
use spacesqueeze::metrics::{
    bca_ci, binary_auc, delong_per_class, micro_auc_with_ci, micro_ovr_auc, ovr_column, roc_export, select_rows,
    AucResult, RocCurve,
};
use spacesqueeze::ndcore::Tensor;
use spacesqueeze::rng::{self, tag};
use spacesqueeze::train::{
    dataset_hash, evaluate, prepare_fold, run_ablation_grid, run_hash, train_fold, AblationTable, Checkpoint,
    EpochRecord, GridOptions, Halt, GRID,
};
use spacesqueeze::{Error, Result};

use crate::cli::{Command, Common, Inputs};
use crate::config::{Metric, Preset, RunConfig};
use crate::report::{read_json, write_json, write_report, Provenance};

pub const SPLIT_FILE: &str = "folds.json";
pub const TIMING_FILE: &str = "timing.json";

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Phantom {
            common,
            spec,
            preset,
            counts,
        } => {
            let mut cfg = RunConfig::resolve(common.config.as_deref(), &common.overrides())?;
            if let Some(p) = preset {
                cfg.phantom.preset = p;
                cfg.phantom.spec = None;
            }
            if let Some(path) = spec {
                cfg.phantom.spec = Some(read_json(&path).map_err(|e| Error::Config(e.to_string()))?);
            }
            if let Some(c) = counts {
                cfg.phantom.counts = c
                    .try_into()
                    .map_err(|_| Error::Config("--counts takes three values".into()))?;
            }
            cmd_phantom(&cfg, &common.out).map(drop)
        }
        Command::Split { common, inputs, test_n } => {
            let mut cfg = resolve(&common, &inputs)?;
            if test_n.is_some() {
                cfg.split.test_n = test_n;
            }
            cmd_split(&cfg, &common.out).map(drop)
        }
        Command::Train { common, inputs, fold } => cmd_train(&resolve(&common, &inputs)?, &common.out, fold).map(drop),
        Command::Ablate { common, inputs } => cmd_ablate(&resolve(&common, &inputs)?, &common.out).map(drop),
        Command::Eval {
            common,
            inputs,
            checkpoint,
        } => cmd_eval(&resolve(&common, &inputs)?, &common.out, &checkpoint).map(drop),
        Command::Compare { common, inputs, a, b } => {
            cmd_compare(&resolve(&common, &inputs)?, &common.out, &a, &b).map(drop)
        }
        Command::Roc {
            common,
            inputs,
            checkpoints,
        } => cmd_roc(&resolve(&common, &inputs)?, &common.out, &checkpoints).map(drop),
    }
}

/// Loads the config and fills dataset and split locations: flag, then config,
/// then the output directory.
fn resolve(common: &Common, inputs: &Inputs) -> Result<RunConfig> {
    let mut cfg = RunConfig::resolve(common.config.as_deref(), &common.overrides())?;
    if let Some(d) = &inputs.data {
        cfg.paths.data = Some(d.clone());
    }
    if let Some(s) = &inputs.split {
        cfg.paths.split = Some(s.clone());
    }
    cfg.paths.data.get_or_insert_with(|| common.out.clone());
    cfg.paths.split.get_or_insert_with(|| common.out.join(SPLIT_FILE));
    Ok(cfg)
}

fn data_dir(cfg: &RunConfig) -> &Path {
    cfg.paths.data.as_deref().unwrap_or(Path::new("."))
}

fn load_manifest(cfg: &RunConfig) -> Result<Manifest> {
    Manifest::load(data_dir(cfg))
}

fn load_split(cfg: &RunConfig) -> Result<FoldSplit> {
    let path = cfg.paths.split.clone().unwrap_or_else(|| PathBuf::from(SPLIT_FILE));
    let split: FoldSplit = read_json(&path)?;
    split.validate()?;
    Ok(split)
}

fn load_checkpoint(dir: &Path, split: &FoldSplit) -> Result<Checkpoint> {
    let ck = Checkpoint::load(dir)?;
    let expected = dataset_hash(split)?;
    if ck.meta.dataset_hash != expected {
        return Err(Error::Config(format!(
            "checkpoint {} was trained on dataset {}, the split describes {expected}",
            dir.display(),
            ck.meta.dataset_hash
        )));
    }
    Ok(ck)
}

fn per_class_counts<'a>(manifest: &Manifest, ids: impl IntoIterator<Item = &'a String>) -> [usize; 3] {
    let mut c = [0; 3];
    for id in ids {
        if let Some(e) = manifest.entry(id) {
            c[e.label.index()] += 1;
        }
    }
    c
}

fn class_names() -> [&'static str; 3] {
    Label::ALL.map(Label::as_str)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomReport {
    pub preset: String,
    pub counts: [usize; 3],
    pub cases: usize,
    pub manifest: String,
}

pub fn cmd_phantom(cfg: &RunConfig, out: &Path) -> Result<PhantomReport> {
    let set: PhantomSetSpec = cfg.phantom.set_spec();
    let cases = set.generate(cfg.phantom.counts, cfg.seed)?;
    let vol_dir = out.join("volumes");
    fs::create_dir_all(&vol_dir).map_err(|e| Error::io(format!("creating {}", vol_dir.display()), e))?;
    let mut entries = Vec::with_capacity(cases.len());
    for c in &cases {
        let rel = format!("volumes/{}.svol", c.case_id);
        svol_write(&out.join(&rel), c.volume.pixels())?;
        entries.push(ManifestEntry {
            case_id: c.case_id.clone(),
            label: c.label,
            path: rel,
            split: SplitRole::Unassigned,
        });
    }
    let manifest = Manifest {
        dir: out.to_path_buf(),
        entries,
    };
    manifest.save()?;
    let preset = match (&cfg.phantom.spec, cfg.phantom.preset) {
        (Some(_), _) => "custom",
        (None, Preset::Separable) => "separable",
        (None, Preset::Ambiguous) => "ambiguous",
    };
    let report = PhantomReport {
        preset: preset.into(),
        counts: cfg.phantom.counts,
        cases: cases.len(),
        manifest: spacesqueeze::data::MANIFEST_FILE.into(),
    };
    let mut table = format!("{:<8}{:>8}\n", "class", "cases");
    for (name, n) in class_names().iter().zip(report.counts) {
        writeln!(table, "{name:<8}{n:>8}").unwrap();
    }
    writeln!(table, "{:<8}{:>8}   preset {preset}", "total", report.cases).unwrap();
    write_report(out, "phantom", &Provenance::of(cfg)?, &report, &table)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub dataset_hash: String,
    pub split_file: String,
    pub test: [usize; 3],
    /// Validation cases per class for each fold.
    pub folds: Vec<[usize; 3]>,
}

pub fn cmd_split(cfg: &RunConfig, out: &Path) -> Result<SplitReport> {
    let mut manifest = load_manifest(cfg)?;
    let cases = manifest.cases();
    let split = split_dataset(&cases, cfg.split.test_size(cases.len()), cfg.split.folds, cfg.seed)?;
    let split_path = cfg.paths.split.clone().unwrap_or_else(|| out.join(SPLIT_FILE));
    write_json(&split_path, &split)?;
    for e in &mut manifest.entries {
        e.split = if split.holdout.contains(&e.case_id) { SplitRole::Test } else { SplitRole::Train };
    }
    manifest.save()?;

    let folds = (0..split.k)
        .map(|f| Ok(per_class_counts(&manifest, &split.fold_members(f)?.1)))
        .collect::<Result<Vec<_>>>()?;
    let report = SplitReport {
        dataset_hash: dataset_hash(&split)?,
        split_file: split_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        test: per_class_counts(&manifest, &split.holdout),
        folds,
    };
    let [a, b, c] = class_names();
    let mut table = format!("{:<8}{a:>8}{b:>8}{c:>8}\n", "set");
    let mut row = |name: String, n: [usize; 3]| writeln!(table, "{name:<8}{:>8}{:>8}{:>8}", n[0], n[1], n[2]).unwrap();
    row("test".into(), report.test);
    for (f, n) in report.folds.iter().enumerate() {
        row(format!("val-{}", f + 1), *n);
    }
    write_report(out, "split", &Provenance::of(cfg)?, &report, &table)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedFold {
    pub fold: usize,
    pub checkpoint: String,
    pub best_epoch: usize,
    pub val_auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halted: Option<Halt>,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub run_hash: String,
    pub se_enabled: bool,
    pub virtual_enabled: bool,
    pub folds: Vec<TrainedFold>,
}

pub fn cmd_train(cfg: &RunConfig, out: &Path, only: Option<usize>) -> Result<TrainReport> {
    let manifest = load_manifest(cfg)?;
    let split = load_split(cfg)?;
    let folds: Vec<usize> = match only {
        Some(f) if f >= split.k => return Err(Error::Config(format!("fold {f} out of range for {} folds", split.k))),
        Some(f) => vec![f],
        None => (0..split.k).collect(),
    };
    let mut trained = Vec::new();
    for fold in folds {
        let data = prepare_fold(&manifest, &split, fold, cfg.network.input_hw)?;
        let outcome = train_fold(&cfg.train, &cfg.network, &data)?;
        let rel = format!("checkpoints/fold-{}", fold + 1);
        outcome.checkpoint.save(&out.join(&rel))?;
        eprintln!(
            "fold {}: best epoch {} val AUC {:.4}",
            fold + 1,
            outcome.checkpoint.meta.epoch,
            outcome.checkpoint.meta.val_auc
        );
        trained.push(TrainedFold {
            fold,
            checkpoint: rel,
            best_epoch: outcome.checkpoint.meta.epoch,
            val_auc: outcome.checkpoint.meta.val_auc,
            halted: outcome.halted,
            history: outcome.history,
        });
    }
    let report = TrainReport {
        run_hash: run_hash(&cfg.train, &cfg.network)?,
        se_enabled: cfg.train.se_enabled,
        virtual_enabled: cfg.train.virtual_enabled,
        folds: trained,
    };
    let mut table = format!("{:<8}{:>8}{:>10}  checkpoint\n", "fold", "epoch", "val AUC");
    for f in &report.folds {
        let flag = if f.halted.is_some() { " (halted)" } else { "" };
        writeln!(table, "{:<8}{:>8}{:>10.4}  {}{flag}", f.fold + 1, f.best_epoch, f.val_auc, f.checkpoint).unwrap();
    }
    write_report(out, "train", &Provenance::of(cfg)?, &report, &table)?;
    Ok(report)
}

fn cell_name(se: bool, virtual_class: bool) -> &'static str {
    match (se, virtual_class) {
        (false, false) => "baseline",
        (true, false) => "se",
        (false, true) => "virtual",
        (true, true) => "full",
    }
}

pub fn cmd_ablate(cfg: &RunConfig, out: &Path) -> Result<AblationTable> {
    let manifest = load_manifest(cfg)?;
    let split = load_split(cfg)?;
    let opts = GridOptions {
        bootstrap: cfg.eval.bootstrap,
        alpha: cfg.eval.alpha,
    };
    let table = run_ablation_grid(&manifest, &split, &cfg.train, &cfg.network, &opts, |cell, fold, outcome| {
        let (se, virt) = GRID[cell];
        let dir = out.join(format!("checkpoints/{}/fold-{}", cell_name(se, virt), fold + 1));
        eprintln!(
            "{} fold {}: val AUC {:.4}",
            cell_name(se, virt),
            fold + 1,
            outcome.checkpoint.meta.val_auc
        );
        outcome.checkpoint.save(&dir)
    })?;
    write_report(out, "ablate", &Provenance::of(cfg)?, &table, &table.render())?;
    Ok(table)
}

/// Test-set probabilities of a checkpoint, normalized with its own constants.
fn score_holdout(manifest: &Manifest, split: &FoldSplit, ck: &Checkpoint, chunk: usize) -> Result<(Tensor<f64>, Vec<usize>)> {
    let test = PreparedSet::load(manifest, &split.holdout, &ck.meta.norm, ck.meta.network.input_hw)?;
    Ok((evaluate(&ck.meta.network, &ck.params, &test, chunk)?, test.labels))
}

fn class_auc_with_ci(probs: &Tensor<f64>, labels: &[usize], class: usize, cfg: &RunConfig, fold: usize) -> Result<AucResult> {
    let (s, l) = ovr_column(probs, labels, class)?;
    let base = binary_auc(&s, &l)?;
    let stat = |idx: &[usize]| {
        let sub: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let (s, l) = ovr_column(&select_rows(probs, idx), &sub, class).ok()?;
        binary_auc(&s, &l).ok().map(|r| r.auc)
    };
    let mut r = rng::stream(cfg.seed, &[tag::BOOTSTRAP, fold as u64, 1 + class as u64]);
    let (_, ci) = bca_ci(labels.len(), stat, cfg.eval.bootstrap, cfg.eval.alpha, &mut r)?;
    Ok(AucResult {
        ci_low: Some(ci.low.min(base.auc)),
        ci_high: Some(ci.high.max(base.auc)),
        ..base
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fold: usize,
    pub metric: Metric,
    pub auc: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Per-class one-vs-rest AUCs with intervals, present for `--metric perclass`.
    pub per_class: Vec<AucResult>,
    pub n_cases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub cases: usize,
    pub mean_case_seconds: f64,
}

pub fn cmd_eval(cfg: &RunConfig, out: &Path, checkpoint: &Path) -> Result<EvalReport> {
    let manifest = load_manifest(cfg)?;
    let split = load_split(cfg)?;
    let ck = load_checkpoint(checkpoint, &split)?;
    let fold = ck.meta.fold;
    let started = Instant::now();
    let (probs, labels) = score_holdout(&manifest, &split, &ck, cfg.train.chunk)?;
    let elapsed = started.elapsed().as_secs_f64();

    let micro = micro_auc_with_ci(
        &probs,
        &labels,
        cfg.eval.bootstrap,
        cfg.eval.alpha,
        &mut rng::stream(cfg.seed, &[tag::BOOTSTRAP, fold as u64]),
    )?;
    let per_class = match cfg.eval.metric {
        Metric::Micro => vec![],
        Metric::Perclass => (0..probs.shape()[1])
            .map(|c| class_auc_with_ci(&probs, &labels, c, cfg, fold))
            .collect::<Result<_>>()?,
    };
    let report = EvalReport {
        fold,
        metric: cfg.eval.metric,
        auc: micro.auc,
        ci_low: micro.ci_low,
        ci_high: micro.ci_high,
        per_class,
        n_cases: labels.len(),
    };
    let ci = |r: &AucResult| match (r.ci_low, r.ci_high) {
        (Some(lo), Some(hi)) => format!("[{lo:.4}, {hi:.4}]"),
        _ => String::new(),
    };
    let mut table = format!("{:<10}{:>8}  interval\n", "curve", "AUC");
    writeln!(table, "{:<10}{:>8.4}  {}", "micro", micro.auc, ci(&micro)).unwrap();
    for (name, r) in class_names().iter().zip(&report.per_class) {
        writeln!(table, "{name:<10}{:>8.4}  {}", r.auc, ci(r)).unwrap();
    }
    write_report(out, "eval", &Provenance::of(cfg)?, &report, &table)?;
    write_json(
        &out.join(TIMING_FILE),
        &Timing {
            cases: labels.len(),
            mean_case_seconds: elapsed / labels.len().max(1) as f64,
        },
    )?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    pub class: String,
    pub auc_a: f64,
    pub auc_b: f64,
    pub z: f64,
    pub p: f64,
    pub p_bonferroni: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub micro_auc_a: f64,
    pub micro_auc_b: f64,
    pub alpha: f64,
    pub comparisons: usize,
    pub per_class: Vec<ClassComparison>,
}

pub fn cmd_compare(cfg: &RunConfig, out: &Path, a: &Path, b: &Path) -> Result<CompareReport> {
    let manifest = load_manifest(cfg)?;
    let split = load_split(cfg)?;
    let (pa, labels) = score_holdout(&manifest, &split, &load_checkpoint(a, &split)?, cfg.train.chunk)?;
    let (pb, _) = score_holdout(&manifest, &split, &load_checkpoint(b, &split)?, cfg.train.chunk)?;
    let tests = delong_per_class(&pa, &pb, &labels)?;
    let per_class: Vec<ClassComparison> = class_names()
        .iter()
        .zip(&tests)
        .map(|(name, t)| {
            let pc = t.p_corrected.unwrap_or(t.p);
            ClassComparison {
                class: name.to_string(),
                auc_a: t.auc_a,
                auc_b: t.auc_b,
                z: t.z,
                p: t.p,
                p_bonferroni: pc,
                significant: pc < cfg.eval.alpha,
            }
        })
        .collect();
    let report = CompareReport {
        micro_auc_a: micro_ovr_auc(&pa, &labels)?.auc,
        micro_auc_b: micro_ovr_auc(&pb, &labels)?.auc,
        alpha: cfg.eval.alpha,
        comparisons: tests.len(),
        per_class,
    };
    let mut table = format!(
        "{:<8}{:>8}{:>8}{:>9}{:>9}{:>9}\n",
        "class", "AUC A", "AUC B", "z", "p", "p-corr"
    );
    for c in &report.per_class {
        let star = if c.significant { " *" } else { "" };
        writeln!(
            table,
            "{:<8}{:>8.4}{:>8.4}{:>9.3}{:>9.4}{:>9.4}{star}",
            c.class, c.auc_a, c.auc_b, c.z, c.p, c.p_bonferroni
        )
        .unwrap();
    }
    writeln!(table, "{:<8}{:>8.4}{:>8.4}", "micro", report.micro_auc_a, report.micro_auc_b).unwrap();
    write_report(out, "compare", &Provenance::of(cfg)?, &report, &table)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocEntry {
    pub name: String,
    pub auc: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub metric: Metric,
    pub curves: Vec<RocEntry>,
    pub files: Vec<String>,
}

pub fn cmd_roc(cfg: &RunConfig, out: &Path, checkpoints: &[PathBuf]) -> Result<RocReport> {
    let manifest = load_manifest(cfg)?;
    let split = load_split(cfg)?;
    let mut curves = Vec::new();
    for (i, path) in checkpoints.iter().enumerate() {
        let ck = load_checkpoint(path, &split)?;
        let (probs, labels) = score_holdout(&manifest, &split, &ck, cfg.train.chunk)?;
        let model = format!("model{}", i + 1);
        match cfg.eval.metric {
            Metric::Micro => curves.push((model, RocCurve::micro_ovr(&probs, &labels)?)),
            Metric::Perclass => {
                for (c, name) in class_names().iter().enumerate() {
                    let (s, l) = ovr_column(&probs, &labels, c)?;
                    curves.push((format!("{model}-{name}"), RocCurve::from_scores(&s, &l)?));
                }
            }
        }
    }
    let dir = out.join("roc");
    fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let files = roc_export(&curves, &dir)?
        .iter()
        .map(|p| format!("roc/{}", p.file_name().unwrap_or_default().to_string_lossy()))
        .collect();
    let report = RocReport {
        metric: cfg.eval.metric,
        curves: curves
            .iter()
            .map(|(name, c)| RocEntry {
                name: name.clone(),
                auc: c.area(),
                points: c.len(),
            })
            .collect(),
        files,
    };
    let mut table = format!("{:<20}{:>8}{:>8}\n", "curve", "AUC", "points");
    for c in &report.curves {
        writeln!(table, "{:<20}{:>8.4}{:>8}", c.name, c.auc, c.points).unwrap();
    }
    write_report(out, "roc", &Provenance::of(cfg)?, &report, &table)?;
    Ok(report)
}
