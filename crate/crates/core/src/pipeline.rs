//! Phase orchestration shared by the command-line subcommands: record
//! loading, feature extraction, per-fold training and evaluation,
//! cross-validation and the artifacts each phase leaves on disk.
//!
//! Every text artifact starts with the config header line. Content files
//! hold no timestamps; wall times only appear in `timing.txt`.
//!
//! Output layout under the configured `out` directory:
//!
//! ```text
//! split.csv                   patient → fold
//! features.lusf               feature cache (unless `features` is set)
//! fold_<f>/head.lush          trained head
//! fold_<f>/train_log.txt      per-epoch training loss
//! fold_<f>/metrics.txt        held-out metrics
//! fold_<f>/confusion.csv      held-out confusion counts
//! fold_<f>/roc_class<c>.csv   one-vs-rest ROC points
//! fold_<f>/predictions.csv    held-out per-frame probabilities
//! summary.txt                 fold means and pooled confusion
//! cohort.txt                  zone/global agreement over all patients
//! patients/<id>.csv|.json     per-patient zone tables
//! timing.txt                  phase wall times
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::aggregate::{cohort_report, CohortSummary, FrameOutcome, PatientReport, ZonedFrame, build_patient_report};
use crate::backbone::{
    extract_all, AugmentPlan, BackboneHandle, DirImageSource, ExtractJob, FeatureCache, FeatureExtractor,
};
use crate::config::{AugmentMode, RunConfig, Source};
use crate::data::{class_histogram, load_manifest, make_folds, CovidStatus, DataError, FoldPlan, ImageRecord, SeverityScore};
use crate::error::{Error, Result};
use crate::head::{predict, read_head, train_epochs, write_head, HeadError, LabeledFeatures, TrainOutcome};
use crate::metrics::{confusion_block, confusion_counts_csv, evaluate, roc_csv, roc_curve, ConfusionMatrix as Cm};
use crate::synthetic::{gen_synthetic_features, hardware_note, TimingReport, SYNTHETIC_BACKBONE};
use crate::{HeadParams, MetricsSummary, Prediction};

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Drops the leading config header line, if present.
fn strip_header(text: &str) -> &str {
    match text.strip_prefix("# lus ") {
        Some(rest) => rest.split_once('\n').map_or("", |(_, body)| body),
        None => text,
    }
}

pub fn fold_dir(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.out.join(format!("fold_{fold}"))
}

/// Directory for a head trained on every record (no held-out fold).
pub fn full_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("full")
}

/// Records from the manifest or the synthetic generator.
pub fn load_records(cfg: &RunConfig) -> Result<Vec<ImageRecord>> {
    cfg.validate()?;
    match cfg.source {
        Source::Manifest => load_manifest(cfg.manifest.as_ref().expect("validated")),
        Source::Synthetic => Ok(gen_synthetic_features(&cfg.synthetic_spec())?.records),
    }
}

/// Cohort overview written by `ingest`.
pub fn ingest_summary(cfg: &RunConfig, records: &[ImageRecord]) -> String {
    let mut patients: std::collections::BTreeMap<&str, CovidStatus> = Default::default();
    for r in records {
        patients.insert(&r.patient_id, r.covid_status);
    }
    let count = |s: CovidStatus| patients.values().filter(|&&v| v == s).count();
    let mut out = cfg.header();
    let _ = writeln!(out, "records={}", records.len());
    let _ = writeln!(out, "patients={}", patients.len());
    let _ = writeln!(out, "patients_positive={}", count(CovidStatus::Positive));
    let _ = writeln!(out, "patients_healthy={}", count(CovidStatus::Healthy));
    let _ = writeln!(out, "zoned_records={}", records.iter().filter(|r| r.zone.is_some()).count());
    for (score, n) in class_histogram(records) {
        let _ = writeln!(out, "score_{score}={n}");
    }
    out
}

/// The fold plan in `<out>/split.csv` when present, otherwise a fresh one
/// (which is then written there).
pub fn load_or_make_split(cfg: &RunConfig, records: &[ImageRecord]) -> Result<FoldPlan> {
    let path = cfg.out.join("split.csv");
    if path.is_file() {
        let plan = FoldPlan::from_csv(&read_text(&path)?)?;
        if plan.k() != cfg.k {
            return Err(Error::Config(format!(
                "k: {} has {} folds but the config asks for {}",
                path.display(),
                plan.k(),
                cfg.k
            )));
        }
        if let Some(r) = records.iter().find(|r| plan.fold_of(&r.patient_id).is_none()) {
            return Err(DataError::Invalid(format!(
                "patient {:?} is missing from {}",
                r.patient_id,
                path.display()
            ))
            .into());
        }
        return Ok(plan);
    }
    make_split(cfg, records)
}

pub fn make_split(cfg: &RunConfig, records: &[ImageRecord]) -> Result<FoldPlan> {
    let plan = make_folds(records, cfg.k, cfg.seed)?;
    write_text(&cfg.out.join("split.csv"), &(cfg.header() + &plan.to_csv()))?;
    Ok(plan)
}

/// Computes (or reuses) the persistent feature cache: copy 0 of every
/// record plus, in cached augmentation mode, copies `1..=A`. Saved to
/// `cfg.features_path()`.
pub fn extract_features(cfg: &RunConfig, records: &[ImageRecord]) -> Result<FeatureCache> {
    cfg.validate()?;
    let path = cfg.features_path();
    if cfg.source == Source::Synthetic {
        let cache = gen_synthetic_features(&cfg.synthetic_spec())?.cache;
        cache.save(&path)?;
        return Ok(cache);
    }
    let handle = BackboneHandle::load(&cfg.backbone_spec()?)?;
    let mut cache = match FeatureCache::load(&path) {
        Ok(c) if c.compatible_with(handle.spec().backbone_id.name(), &handle.fingerprint(), handle.spec().feature_dim) => c,
        _ => FeatureCache::new(
            handle.spec().backbone_id.name(),
            handle.fingerprint(),
            handle.spec().feature_dim,
        ),
    };
    let mut copies = vec![0u32];
    if cfg.augment_mode == AugmentMode::Cached {
        copies.extend(1..=cfg.augment_copies as u32);
    }
    let plan = augment_plan(cfg, "cached");
    run_extraction(&handle, cfg, records, &copies, &plan, &mut cache)?;
    cache.save(&path)?;
    Ok(cache)
}

fn augment_plan(cfg: &RunConfig, tag: &str) -> AugmentPlan {
    AugmentPlan {
        params: cfg.augment,
        seed: cfg.augment_seed(),
        tag: tag.to_string(),
    }
}

fn run_extraction(
    handle: &BackboneHandle,
    cfg: &RunConfig,
    records: &[ImageRecord],
    copies: &[u32],
    plan: &AugmentPlan,
    cache: &mut FeatureCache,
) -> Result<usize> {
    let jobs: Vec<ExtractJob<'_>> = records
        .iter()
        .flat_map(|record| copies.iter().map(move |&copy| ExtractJob { record, copy }))
        .collect();
    let source = DirImageSource {
        base: cfg.image_base(),
    };
    extract_all(handle, &jobs, &source, Some(plan), cache, cfg.jobs)
}

/// Loads the persistent cache written by [`extract_features`] and, in
/// faithful mode, adds one freshly augmented copy per record and epoch
/// (kept in memory only).
pub fn training_features(cfg: &RunConfig, records: &[ImageRecord]) -> Result<FeatureCache> {
    let cache = FeatureCache::load(cfg.features_path())?;
    if cfg.source == Source::Synthetic || cfg.augment_mode != AugmentMode::Faithful {
        return Ok(cache);
    }
    let handle = BackboneHandle::load(&cfg.backbone_spec()?)?;
    if !cache.compatible_with(handle.spec().backbone_id.name(), &handle.fingerprint(), handle.spec().feature_dim) {
        return Err(DataError::Invalid(format!(
            "feature cache {} was built with a different backbone; rerun extract",
            cfg.features_path().display()
        ))
        .into());
    }
    let mut working = FeatureCache::new(cache.backbone_id(), *cache.fingerprint(), cache.feature_dim());
    for (id, copy, values) in cache.iter() {
        if copy == 0 {
            working.insert(id, 0, values.to_vec())?;
        }
    }
    let copies = cfg.train_copies();
    run_extraction(&handle, cfg, records, &copies, &augment_plan(cfg, "faithful"), &mut working)?;
    Ok(working)
}

fn features_for(cache: &FeatureCache, records: &[&ImageRecord], copy: u32) -> Result<LabeledFeatures> {
    let mut data = LabeledFeatures::new(cache.feature_dim());
    for r in records {
        let row = cache.get(&r.image_id, copy).ok_or_else(|| {
            DataError::Invalid(format!(
                "no features for image {:?} copy {copy}; run extract first",
                r.image_id
            ))
        })?;
        data.push(row, r.label)?;
    }
    Ok(data)
}

/// Training records: everything outside `fold`, or every record when
/// `fold` is `None`.
pub fn train_records<'a>(records: &'a [ImageRecord], plan: &FoldPlan, fold: Option<usize>) -> Vec<&'a ImageRecord> {
    records
        .iter()
        .filter(|r| fold.is_none() || plan.fold_of(&r.patient_id) != fold)
        .collect()
}

pub fn test_records<'a>(records: &'a [ImageRecord], plan: &FoldPlan, fold: usize) -> Vec<&'a ImageRecord> {
    records
        .iter()
        .filter(|r| plan.fold_of(&r.patient_id) == Some(fold))
        .collect()
}

pub fn train_head(
    cfg: &RunConfig,
    cache: &FeatureCache,
    records: &[&ImageRecord],
) -> Result<TrainOutcome<f64>> {
    let views = cfg
        .train_copies()
        .into_iter()
        .map(|copy| features_for(cache, records, copy))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&LabeledFeatures> = views.iter().collect();
    Ok(train_epochs(&refs, &cfg.train_config())?)
}

pub fn write_train_artifacts(cfg: &RunConfig, dir: &Path, outcome: &TrainOutcome<f64>, cache: &FeatureCache) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let head_path = dir.join("head.lush");
    let mut bytes = Vec::new();
    write_head(&mut bytes, &outcome.params, cache.fingerprint()).expect("in-memory write");
    fs::write(&head_path, bytes).map_err(|e| Error::io(&head_path, e))?;
    let mut log = cfg.header();
    log.push_str("epoch,mean_loss\n");
    for (e, l) in outcome.epoch_losses.iter().enumerate() {
        let _ = writeln!(log, "{},{l}", e + 1);
    }
    write_text(&dir.join("train_log.txt"), &log)
}

pub fn load_head(dir: &Path, cache: &FeatureCache) -> Result<HeadParams> {
    let path = dir.join("head.lush");
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let (params, fingerprint) = read_head::<f64>(&mut bytes.as_slice())?;
    if &fingerprint != cache.fingerprint() {
        return Err(HeadError::BadParameterFile {
            reason: format!("{} was trained on features from a different backbone", path.display()),
        }
        .into());
    }
    if params.feature_dim() != cache.feature_dim() {
        return Err(HeadError::DimensionMismatch {
            expected: cache.feature_dim(),
            found: params.feature_dim(),
        }
        .into());
    }
    Ok(params)
}

/// Held-out predictions and metrics of one fold.
#[derive(Debug, Clone)]
pub struct FoldEval {
    pub fold: usize,
    pub records: Vec<ImageRecord>,
    pub predictions: Vec<Prediction>,
    pub summary: MetricsSummary,
}

pub fn predict_records(params: &HeadParams, cache: &FeatureCache, records: &[&ImageRecord]) -> Result<Vec<Prediction>> {
    let data = features_for(cache, records, 0)?;
    let inputs: Vec<(&str, &[f32])> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.image_id.as_str(), data.row(i)))
        .collect();
    Ok(predict(params, &inputs)?)
}

pub fn evaluate_fold(params: &HeadParams, cache: &FeatureCache, records: &[ImageRecord], plan: &FoldPlan, fold: usize) -> Result<FoldEval> {
    let test = test_records(records, plan, fold);
    let predictions = predict_records(params, cache, &test)?;
    fold_eval(fold, test.into_iter().cloned().collect(), predictions)
}

fn fold_eval(fold: usize, records: Vec<ImageRecord>, predictions: Vec<Prediction>) -> Result<FoldEval> {
    let labels: Vec<SeverityScore> = records.iter().map(|r| r.label).collect();
    let summary = evaluate(&predictions, &labels)?;
    Ok(FoldEval {
        fold,
        records,
        predictions,
        summary,
    })
}

pub fn write_eval_artifacts(cfg: &RunConfig, dir: &Path, eval: &FoldEval) -> Result<()> {
    let header = cfg.header();
    write_text(&dir.join("metrics.txt"), &format!("{header}fold={}\n{}", eval.fold, eval.summary.to_kv()))?;
    write_text(&dir.join("confusion.csv"), &(header.clone() + &confusion_counts_csv(&eval.summary.confusion)))?;
    let labels: Vec<SeverityScore> = eval.records.iter().map(|r| r.label).collect();
    for c in 0..4 {
        let scores: Vec<f64> = eval.predictions.iter().map(|p| p.probs[c]).collect();
        let positives: Vec<bool> = labels.iter().map(|l| l.index() == c).collect();
        let body = if positives.iter().any(|&p| p) && positives.iter().any(|&p| !p) {
            roc_csv(&roc_curve(&scores, &positives)?)
        } else {
            "fpr,tpr\n# undefined: class absent or the only class in this fold\n".to_string()
        };
        write_text(&dir.join(format!("roc_class{c}.csv")), &(header.clone() + &body))?;
    }
    let mut preds = header;
    preds.push_str("image_id,patient_id,zone,truth,predicted,p0,p1,p2,p3\n");
    for (r, p) in eval.records.iter().zip(&eval.predictions) {
        let zone = r.zone.map(|z| z.name()).unwrap_or("");
        let _ = writeln!(
            preds,
            "{},{},{zone},{},{},{},{},{},{}",
            r.image_id, r.patient_id, r.label, p.predicted, p.probs[0], p.probs[1], p.probs[2], p.probs[3]
        );
    }
    write_text(&dir.join("predictions.csv"), &preds)
}

/// Rebuilds a fold's evaluation from its `predictions.csv`.
pub fn read_fold_eval(cfg: &RunConfig, records: &[ImageRecord], fold: usize) -> Result<FoldEval> {
    let path = fold_dir(cfg, fold).join("predictions.csv");
    let text = read_text(&path)?;
    let by_id: HashMap<&str, &ImageRecord> = records.iter().map(|r| (r.image_id.as_str(), r)).collect();
    let mut fold_records = Vec::new();
    let mut predictions = Vec::new();
    for (n, line) in strip_header(&text).lines().enumerate().skip(1) {
        let bad = |reason: String| DataError::MalformedRow { line: n + 2, reason };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("{}: expected 9 columns", path.display())).into());
        }
        let record = by_id
            .get(f[0])
            .ok_or_else(|| bad(format!("unknown image {:?}", f[0])))?;
        let mut probs = [0f64; 4];
        for (p, s) in probs.iter_mut().zip(&f[5..]) {
            *p = s.parse().map_err(|_| bad(format!("bad probability {s:?}")))?;
        }
        fold_records.push((*record).clone());
        predictions.push(Prediction::from_probs(f[0], probs));
    }
    fold_eval(fold, fold_records, predictions)
}

/// Mean of the per-fold metrics (undefined entries skipped) plus the
/// pooled confusion matrix.
pub fn summary_text(cfg: &RunConfig, folds: &[FoldEval]) -> String {
    let mean = |get: &dyn Fn(&MetricsSummary) -> Option<f64>| -> String {
        let v: Vec<f64> = folds.iter().filter_map(|f| get(&f.summary)).collect();
        if v.is_empty() {
            "undefined".into()
        } else {
            (v.iter().sum::<f64>() / v.len() as f64).to_string()
        }
    };
    let mut out = cfg.header();
    let _ = writeln!(out, "folds={}", folds.len());
    let _ = writeln!(out, "n_frames={}", folds.iter().map(|f| f.summary.n_frames).sum::<usize>());
    let _ = writeln!(out, "mean_accuracy={}", mean(&|s| Some(s.accuracy)));
    let _ = writeln!(out, "mean_macro_precision={}", mean(&|s| s.macro_precision));
    let _ = writeln!(out, "mean_macro_recall={}", mean(&|s| s.macro_recall));
    let _ = writeln!(out, "mean_macro_auc={}", mean(&|s| s.macro_auc));
    for c in 0..4 {
        let _ = writeln!(out, "mean_auc_{c}={}", mean(&|s| s.auc_per_class[c]));
    }
    for f in folds {
        let _ = writeln!(out, "fold_{}_accuracy={}", f.fold, f.summary.accuracy);
    }
    let pooled = folds
        .iter()
        .map(|f| f.summary.confusion.clone())
        .reduce(|a, b| a.merged(&b))
        .unwrap_or_else(|| Cm::from_counts([[0; 4]; 4]));
    out.push_str("# pooled confusion counts\n");
    out.push_str(&confusion_counts_csv(&pooled));
    out.push_str(&confusion_block(&pooled));
    out
}

pub fn cohort_from_folds(cfg: &RunConfig, folds: &[FoldEval]) -> CohortSummary {
    let frames: Vec<FrameOutcome> = folds
        .iter()
        .flat_map(|f| {
            f.records.iter().zip(&f.predictions).map(|(r, p)| FrameOutcome {
                patient_id: r.patient_id.clone(),
                zone: r.zone,
                truth: r.label,
                predicted: p.predicted,
            })
        })
        .collect();
    cohort_report(&frames, cfg.tie_break)
}

pub fn write_patient_report(cfg: &RunConfig, report: &PatientReport) -> Result<()> {
    let dir = cfg.out.join("patients");
    write_text(&dir.join(format!("{}.csv", report.patient_id)), &(cfg.header() + &report.to_table()))?;
    write_text(&dir.join(format!("{}.json", report.patient_id)), &report.to_json())
}

/// Summary, cohort and per-patient artifacts for a set of folds.
pub fn write_reports(cfg: &RunConfig, folds: &[FoldEval]) -> Result<CohortSummary> {
    write_text(&cfg.out.join("summary.txt"), &summary_text(cfg, folds))?;
    let cohort = cohort_from_folds(cfg, folds);
    write_text(&cfg.out.join("cohort.txt"), &(cfg.header() + &cohort.to_kv()))?;
    for p in &cohort.patients {
        write_patient_report(cfg, p)?;
    }
    Ok(cohort)
}

pub fn backbone_name(cfg: &RunConfig) -> String {
    match cfg.source {
        Source::Synthetic => SYNTHETIC_BACKBONE.into(),
        Source::Manifest => cfg.backbone.name().into(),
    }
}

#[derive(Debug, Clone)]
pub struct CrossvalOutcome {
    pub plan: FoldPlan,
    pub folds: Vec<FoldEval>,
    pub cohort: CohortSummary,
    pub timing: TimingReport,
}

impl CrossvalOutcome {
    pub fn mean_accuracy(&self) -> f64 {
        self.folds.iter().map(|f| f.summary.accuracy).sum::<f64>() / self.folds.len() as f64
    }

    pub fn mean_macro_auc(&self) -> Option<f64> {
        let v: Vec<f64> = self.folds.iter().filter_map(|f| f.summary.macro_auc).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Patient-level k-fold cross-validation: for each fold, train on the
/// others and evaluate on it. Writes every artifact listed in the module
/// docs.
pub fn crossval(cfg: &RunConfig) -> Result<CrossvalOutcome> {
    let start = Instant::now();
    let records = load_records(cfg)?;
    let plan = make_split(cfg, &records)?;

    let t = Instant::now();
    extract_features(cfg, &records)?;
    let cache = training_features(cfg, &records)?;
    let extraction = t.elapsed();

    let mut training = Duration::ZERO;
    let mut evaluation = Duration::ZERO;
    let mut folds = Vec::with_capacity(plan.k());
    for fold in 0..plan.k() {
        let dir = fold_dir(cfg, fold);
        let outcome = train_head(cfg, &cache, &train_records(&records, &plan, Some(fold)))?;
        training += outcome.wall_time;
        write_train_artifacts(cfg, &dir, &outcome, &cache)?;
        let t = Instant::now();
        let eval = evaluate_fold(&outcome.params, &cache, &records, &plan, fold)?;
        evaluation += t.elapsed();
        write_eval_artifacts(cfg, &dir, &eval)?;
        folds.push(eval);
    }
    let cohort = write_reports(cfg, &folds)?;

    let timing = TimingReport {
        backbone_id: backbone_name(cfg),
        extraction,
        training,
        evaluation,
        total: start.elapsed(),
        n_frames: records.len(),
        epochs: cfg.train.epochs,
        hardware_note: hardware_note(),
    };
    write_text(&cfg.out.join("timing.txt"), &(cfg.header() + &timing.to_kv()))?;
    Ok(CrossvalOutcome {
        plan,
        folds,
        cohort,
        timing,
    })
}

/// Scores one patient with the head of the fold that held the patient out.
pub fn score_patient(cfg: &RunConfig, patient_id: &str) -> Result<PatientReport> {
    let records = load_records(cfg)?;
    let plan = load_or_make_split(cfg, &records)?;
    let fold = plan
        .fold_of(patient_id)
        .ok_or_else(|| DataError::Invalid(format!("unknown patient {patient_id:?}")))?;
    let cache = FeatureCache::load(cfg.features_path())?;
    let params = load_head(&fold_dir(cfg, fold), &cache)?;
    let mine: Vec<&ImageRecord> = records.iter().filter(|r| r.patient_id == patient_id).collect();
    let predictions = predict_records(&params, &cache, &mine)?;
    let frames: Vec<ZonedFrame> = mine
        .iter()
        .zip(&predictions)
        .filter_map(|(r, p)| {
            r.zone.map(|zone| ZonedFrame {
                zone,
                truth: r.label,
                predicted: p.predicted,
            })
        })
        .collect();
    let report = build_patient_report(patient_id, &frames, cfg.tie_break);
    write_patient_report(cfg, &report)?;
    Ok(report)
}

/// Times extraction, training on every record and in-sample evaluation.
pub fn bench(cfg: &RunConfig) -> Result<(TimingReport, MetricsSummary)> {
    cfg.train_config().validate()?;
    let start = Instant::now();
    let records = load_records(cfg)?;
    let t = Instant::now();
    extract_features(cfg, &records)?;
    let cache = training_features(cfg, &records)?;
    let extraction = t.elapsed();
    let all: Vec<&ImageRecord> = records.iter().collect();
    let outcome = train_head(cfg, &cache, &all)?;
    let t = Instant::now();
    let predictions = predict_records(&outcome.params, &cache, &all)?;
    let labels: Vec<SeverityScore> = records.iter().map(|r| r.label).collect();
    let summary = evaluate(&predictions, &labels)?;
    let evaluation = t.elapsed();
    let timing = TimingReport {
        backbone_id: backbone_name(cfg),
        extraction,
        training: outcome.wall_time,
        evaluation,
        total: start.elapsed(),
        n_frames: records.len(),
        epochs: cfg.train.epochs,
        hardware_note: hardware_note(),
    };
    write_text(&cfg.out.join("timing.txt"), &(cfg.header() + &timing.to_kv()))?;
    write_text(&cfg.out.join("bench_metrics.txt"), &(cfg.header() + &summary.to_kv()))?;
    Ok((timing, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_cfg(out: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "source = synthetic\nsynthetic.n_per_class = 40\nsynthetic.feature_dim = 8\nsynthetic.separation = 6\nsynthetic.n_patients = 12\nepochs = 5\nlearning_rate = 0.05\nseed = 9",
        )
        .unwrap();
        cfg.out = out.to_path_buf();
        cfg
    }

    #[test]
    fn crossval_writes_artifacts_and_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = crossval(&synthetic_cfg(a.path())).unwrap();
        crossval(&synthetic_cfg(b.path())).unwrap();
        assert!(ra.mean_accuracy() > 0.8, "{}", ra.mean_accuracy());
        for rel in ["split.csv", "summary.txt", "cohort.txt", "fold_0/metrics.txt", "fold_2/predictions.csv", "fold_1/roc_class3.csv", "patients/P000.json"] {
            let x = fs::read(a.path().join(rel)).unwrap();
            let y = fs::read(b.path().join(rel)).unwrap();
            assert_eq!(x, y, "{rel}");
        }
        assert!(a.path().join("fold_1/head.lush").is_file());
        assert!(a.path().join("timing.txt").is_file());
    }

    #[test]
    fn report_rebuilds_identical_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synthetic_cfg(dir.path());
        crossval(&cfg).unwrap();
        let before = fs::read(dir.path().join("summary.txt")).unwrap();
        let records = load_records(&cfg).unwrap();
        let folds: Vec<FoldEval> = (0..3).map(|f| read_fold_eval(&cfg, &records, f).unwrap()).collect();
        write_reports(&cfg, &folds).unwrap();
        assert_eq!(before, fs::read(dir.path().join("summary.txt")).unwrap());
    }

    #[test]
    fn score_patient_matches_crossval_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synthetic_cfg(dir.path());
        let out = crossval(&cfg).unwrap();
        let from_cv = out.cohort.patients.iter().find(|p| p.patient_id == "P003").unwrap().clone();
        assert_eq!(score_patient(&cfg, "P003").unwrap(), from_cv);
        assert!(score_patient(&cfg, "nobody").is_err());
    }

    #[test]
    fn header_stripping() {
        assert_eq!(strip_header("# lus 0.1.0 config=ab seed=1\nx\n"), "x\n");
        assert_eq!(strip_header("x\n"), "x\n");
    }
}
