//! `lus`: command-line runner for lung-ultrasound severity scoring.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 model or
//! parameter file error. Failures print one diagnostic line on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lus_core::aggregate::{parse_count_table, PatientReport};
use lus_core::backbone::FeatureCache;
use lus_core::config::{RunConfig, Source};
use lus_core::data::write_manifest;
use lus_core::pipeline::{self, fold_dir, write_text};
use lus_core::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "lus", version, about = "Lung ultrasound severity scoring with a frozen backbone and a softmax head")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for feature extraction.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Extra `key=value` override; may repeat. Applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate the manifest and write a cohort overview.
    Ingest,
    /// Plan patient-level folds and write split.csv.
    Split,
    /// Extract (or generate) features into the feature cache.
    Extract,
    /// Train the head on every fold except FOLD.
    Train {
        #[arg(long)]
        fold: usize,
    },
    /// Evaluate the FOLD head on its held-out patients.
    Evaluate {
        #[arg(long)]
        fold: usize,
    },
    /// Full k-fold cross-validation with every artifact.
    Crossval,
    /// Per-zone and global scores for one patient.
    ScorePatient {
        #[arg(long)]
        patient: String,
        /// Build the report from a per-zone count table instead of
        /// predictions (`zone,truth0..truth3,pred0..pred3`).
        #[arg(long, value_name = "FILE")]
        count_injection: Option<PathBuf>,
    },
    /// Time extraction, training and evaluation. Uses the synthetic
    /// fixture when no manifest is configured.
    Bench,
    /// Rebuild summary, cohort and patient reports from fold predictions.
    Report,
}

fn load_config(opts: &GlobalOpts) -> lus_core::Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for assignment in &opts.set {
        cfg.apply_override(assignment)?;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.out = out.clone();
    }
    if let Some(jobs) = opts.jobs {
        cfg.jobs = jobs;
    }
    Ok(cfg)
}

fn print_report(report: &PatientReport) {
    print!("{}", report.to_table());
    if !report.missing_zones.is_empty() {
        let names: Vec<&str> = report.missing_zones.iter().map(|z| z.name()).collect();
        println!("missing zones: {}", names.join(" "));
    }
}

fn run(cli: Cli) -> lus_core::Result<()> {
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Ingest => {
            let records = pipeline::load_records(&cfg)?;
            if cfg.source == Source::Synthetic {
                write_text(&cfg.out.join("manifest.csv"), &write_manifest(&records))?;
            }
            let summary = pipeline::ingest_summary(&cfg, &records);
            write_text(&cfg.out.join("ingest.txt"), &summary)?;
            print!("{summary}");
        }
        Command::Split => {
            let records = pipeline::load_records(&cfg)?;
            let plan = pipeline::make_split(&cfg, &records)?;
            for fold in 0..plan.k() {
                println!("fold {fold}: {} patients", plan.patients_in(fold).len());
            }
        }
        Command::Extract => {
            let records = pipeline::load_records(&cfg)?;
            let cache = pipeline::extract_features(&cfg, &records)?;
            println!(
                "{} vectors of dimension {} in {}",
                cache.len(),
                cache.feature_dim(),
                cfg.features_path().display()
            );
        }
        Command::Train { fold } => {
            let records = pipeline::load_records(&cfg)?;
            let plan = pipeline::load_or_make_split(&cfg, &records)?;
            check_fold(fold, plan.k())?;
            let cache = pipeline::training_features(&cfg, &records)?;
            let train = pipeline::train_records(&records, &plan, Some(fold));
            let outcome = pipeline::train_head(&cfg, &cache, &train)?;
            let dir = fold_dir(&cfg, fold);
            pipeline::write_train_artifacts(&cfg, &dir, &outcome, &cache)?;
            println!(
                "fold {fold}: trained on {} frames, final epoch loss {}",
                train.len(),
                outcome.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Evaluate { fold } => {
            let records = pipeline::load_records(&cfg)?;
            let plan = pipeline::load_or_make_split(&cfg, &records)?;
            check_fold(fold, plan.k())?;
            let cache = FeatureCache::load(cfg.features_path())?;
            let dir = fold_dir(&cfg, fold);
            let params = pipeline::load_head(&dir, &cache)?;
            let eval = pipeline::evaluate_fold(&params, &cache, &records, &plan, fold)?;
            pipeline::write_eval_artifacts(&cfg, &dir, &eval)?;
            print!("{}", eval.summary.to_kv());
        }
        Command::Crossval => {
            let outcome = pipeline::crossval(&cfg)?;
            for f in &outcome.folds {
                println!("fold {}: accuracy {}", f.fold, f.summary.accuracy);
            }
            println!("mean accuracy {}", outcome.mean_accuracy());
            if let Some(err) = outcome.cohort.mean_abs_global_error {
                println!("mean absolute global score error {err}");
            }
            println!("artifacts in {}", cfg.out.display());
        }
        Command::ScorePatient {
            patient,
            count_injection,
        } => {
            let report = match count_injection {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    let rows = parse_count_table(&text)?;
                    let report = PatientReport::from_counts(&patient, &rows, cfg.tie_break);
                    pipeline::write_patient_report(&cfg, &report)?;
                    report
                }
                None => pipeline::score_patient(&cfg, &patient)?,
            };
            print_report(&report);
        }
        Command::Bench => {
            if cfg.source == Source::Manifest && cfg.manifest.is_none() {
                cfg.source = Source::Synthetic;
            }
            let (timing, summary) = pipeline::bench(&cfg)?;
            print!("{}", timing.to_kv());
            println!("train_accuracy={}", summary.accuracy);
        }
        Command::Report => {
            let records = pipeline::load_records(&cfg)?;
            let plan = pipeline::load_or_make_split(&cfg, &records)?;
            let folds = (0..plan.k())
                .map(|f| pipeline::read_fold_eval(&cfg, &records, f))
                .collect::<lus_core::Result<Vec<_>>>()?;
            let cohort = pipeline::write_reports(&cfg, &folds)?;
            print!("{}", pipeline::summary_text(&cfg, &folds));
            println!("patients reported: {}", cohort.patients.len());
        }
    }
    Ok(())
}

fn check_fold(fold: usize, k: usize) -> lus_core::Result<()> {
    if fold >= k {
        return Err(Error::Config(format!("fold: {fold} is out of range for k = {k}")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("lus: error: {line}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Model => 4,
            })
        }
    }
}
