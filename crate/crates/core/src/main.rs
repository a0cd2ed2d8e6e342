//! Command-line front end: synthetic data generation, normalization, training,
//! evaluation, dataset statistics, head pose export and report comparison.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data
//! errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::de::DeserializeOwned;

use gazekit::data::{
    compute_stats, load_manifest, read_store, subsample_indices, synth_generate, write_store, IndexEntry,
    NormalizedSet, SynthConfig,
};
use gazekit::estimators::{train, EstimatorKind, EstimatorSpec};
use gazekit::eval::{
    compare_reports, error_vs_illumination, run_cross, run_lopo, run_person_specific, EvalOptions, EvalReport,
    Quota,
};
use gazekit::geometry::{estimate_head_pose, reprojection_cost, FaceModel, LANDMARK_COUNT};
use gazekit::normalize::{mirror_sample, NormalizationParams};

#[derive(Parser, Debug)]
#[command(name = "gazekit", version, about = "Appearance-based gaze estimation toolkit", arg_required_else_help = true)]
struct Cli {
    /// Seed overriding the one in the parameter file
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dataset: manifest.jsonl, truth.jsonl and frames/
    Synth {
        /// Synthesis configuration (JSON)
        #[arg(long)]
        params: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalize every record of a manifest into a sample store
    Normalize {
        #[arg(long)]
        manifest: PathBuf,
        /// Normalization parameters (JSON)
        #[arg(long)]
        params: Option<PathBuf>,
        /// Face model file with six "x y z" lines
        #[arg(long)]
        face_model: Option<PathBuf>,
        /// Output store; the index is written next to it as <stem>.index.jsonl
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an estimator on a store and save the model
    Train {
        #[arg(long)]
        store: PathBuf,
        /// Estimator kind; defaults to the parameter file's, else cnn
        #[arg(long)]
        estimator: Option<EstimatorKind>,
        /// Estimator specification (JSON)
        #[arg(long)]
        params: Option<PathBuf>,
        /// Samples per person and eye; 0 keeps every sample
        #[arg(long, default_value_t = 0)]
        quota: usize,
        /// Disable mirror augmentation
        #[arg(long)]
        no_mirror: bool,
        #[arg(long)]
        model_file: PathBuf,
    },
    /// Run an evaluation protocol and write the report
    Eval {
        #[arg(long, value_enum)]
        protocol: ProtocolArg,
        /// Estimator kind; defaults to the parameter file's, else cnn
        #[arg(long)]
        estimator: Option<EstimatorKind>,
        /// Store to evaluate; the training store for the cross protocol
        #[arg(long)]
        store: PathBuf,
        /// Test store for the cross protocol
        #[arg(long)]
        test_store: Option<PathBuf>,
        /// Estimator specification (JSON)
        #[arg(long)]
        params: Option<PathBuf>,
        /// Samples per person and eye; 0 keeps every sample
        #[arg(long, default_value_t = 1500)]
        quota: usize,
        /// Disable mirror augmentation of training data
        #[arg(long)]
        no_mirror: bool,
        /// Manifest of the evaluated store, needed for --illumination
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Directory for the error-versus-illumination CSV files
        #[arg(long, requires = "manifest")]
        illumination: Option<PathBuf>,
        /// Report file (JSON); per-sample errors go to <stem>.samples.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Illumination and hour histograms of a manifest
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for intensity.csv, difference.csv and hour.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the head pose of every record of a manifest (CSV)
    Pose {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        face_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired Wilcoxon signed-rank test of per-person errors in two reports
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        /// Result file (JSON); printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Lopo,
    Cross,
    PersonSpecific,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] gazekit::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data<E: Into<gazekit::Error>>(e: E) -> CliError {
    CliError::Data(e.into())
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| {
        CliError::Data(
            gazekit::data::DataError::Io {
                path: path.to_path_buf(),
                source,
            }
            .into(),
        )
    }
}

fn read_params<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read parameter file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid parameter file {}: {e}", path.display())))
}

fn face_model(path: Option<&Path>) -> Result<FaceModel, CliError> {
    match path {
        Some(p) => FaceModel::load(p).map_err(|e| CliError::Usage(format!("face model {}: {e}", p.display()))),
        None => Ok(FaceModel::default()),
    }
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn index_path(store: &Path) -> PathBuf {
    store.with_extension("index.jsonl")
}

fn estimator_spec(
    params: Option<&Path>,
    kind: Option<EstimatorKind>,
    seed: Option<u64>,
) -> Result<EstimatorSpec, CliError> {
    let mut spec: EstimatorSpec = read_params(params)?;
    if let Some(k) = kind {
        spec.kind = k;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn quota(n: usize) -> Option<Quota> {
    (n > 0).then(|| Quota::per_eye(n))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { params, out } => {
            let mut cfg: SynthConfig = read_params(params.as_deref())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let records = synth_generate(&cfg, &out).map_err(data)?;
            info!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Normalize {
            manifest,
            params,
            face_model: fm,
            out,
        } => {
            let params: NormalizationParams = read_params(params.as_deref())?;
            params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let model = face_model(fm.as_deref())?;
            let m = load_manifest(&manifest).map_err(data)?;
            for s in &m.skipped {
                warn!("skipped manifest line {}: {}", s.line, s.reason);
            }
            let set: NormalizedSet =
                gazekit::data::normalize_manifest(&m.records, &base_dir(&manifest), &model, &params).map_err(data)?;
            for (i, reason) in &set.dropped {
                warn!("dropped record {i}: {reason}");
            }
            write_store(&out, &set.samples).map_err(data)?;
            set.write_index(&index_path(&out)).map_err(data)?;
            info!(
                "normalized {} of {} records into {} samples ({} dropped)",
                m.records.len() - set.dropped.len(),
                m.records.len(),
                set.samples.len(),
                set.dropped.len()
            );
        }
        Command::Train {
            store,
            estimator,
            params,
            quota: q,
            no_mirror,
            model_file,
        } => {
            let spec = estimator_spec(params.as_deref(), estimator, cli.seed)?;
            let samples = read_store(&store).map_err(data)?;
            let idx: Vec<usize> = match quota(q) {
                Some(q) => subsample_indices(&samples, q.left, q.right, spec.seed),
                None => (0..samples.len()).collect(),
            };
            let mut set = Vec::with_capacity(idx.len() * 2);
            for i in idx {
                set.push(samples[i].clone());
                if !no_mirror {
                    set.push(mirror_sample(&samples[i]));
                }
            }
            info!("training {} on {} samples", spec.kind.name(), set.len());
            let model = train(&spec, &set).map_err(data)?;
            model.save(&model_file).map_err(data)?;
        }
        Command::Eval {
            protocol,
            estimator,
            store,
            test_store,
            params,
            quota: q,
            no_mirror,
            manifest,
            illumination,
            out,
        } => {
            let spec = estimator_spec(params.as_deref(), estimator, cli.seed)?;
            let opts = EvalOptions {
                quota: quota(q),
                mirror: !no_mirror,
                seed: spec.seed,
            };
            let samples = read_store(&store).map_err(data)?;
            let (report, evaluated) = match protocol {
                ProtocolArg::Lopo => (run_lopo(&samples, &spec, &opts).map_err(data)?, store),
                ProtocolArg::PersonSpecific => (run_person_specific(&samples, &spec, &opts).map_err(data)?, store),
                ProtocolArg::Cross => {
                    let test_path = test_store
                        .ok_or_else(|| CliError::Usage("the cross protocol needs --test-store".into()))?;
                    let test = read_store(&test_path).map_err(data)?;
                    (run_cross(&samples, &test, &spec, &opts).map_err(data)?, test_path)
                }
            };
            report.write(&out).map_err(data)?;
            info!(
                "{} {}: grand mean {:.3} deg, std {:.3} deg over {} persons",
                report.protocol,
                report.estimator,
                report.grand_mean_deg,
                report.std_deg,
                report.per_person.len()
            );
            if let (Some(dir), Some(manifest)) = (illumination, manifest) {
                let index: Vec<IndexEntry> = NormalizedSet::read_index(&index_path(&evaluated)).map_err(data)?;
                let m = load_manifest(&manifest).map_err(data)?;
                let breakdown =
                    error_vs_illumination(&report, &index, &m.records, &base_dir(&manifest)).map_err(data)?;
                breakdown.write_csv(&dir).map_err(data)?;
            }
        }
        Command::Stats { manifest, out } => {
            let m = load_manifest(&manifest).map_err(data)?;
            let stats = compute_stats(&m.records, &base_dir(&manifest)).map_err(data)?;
            stats.write_csv(&out).map_err(data)?;
            info!("{} records summarized", stats.records);
        }
        Command::Pose {
            manifest,
            face_model: fm,
            out,
        } => {
            let model = face_model(fm.as_deref())?;
            let m = load_manifest(&manifest).map_err(data)?;
            let mut csv = String::from("record,person_id,rot_x,rot_y,rot_z,tx,ty,tz,reproj_rms_px\n");
            for (i, r) in m.records.iter().enumerate() {
                let lm = r.landmark_points();
                match estimate_head_pose(&model, &lm, &r.intrinsics) {
                    Ok(pose) => {
                        let rv = pose.rotation.axis_angle();
                        let t = pose.translation;
                        let rms = (reprojection_cost(&model, &pose.rotation, &t, &lm, &r.intrinsics)
                            / LANDMARK_COUNT as f64)
                            .sqrt();
                        let _ = writeln!(
                            csv,
                            "{i},{},{},{},{},{},{},{},{rms}",
                            r.person_id, rv.x, rv.y, rv.z, t.x, t.y, t.z
                        );
                    }
                    Err(e) => warn!("record {i}: pose estimation failed: {e}"),
                }
            }
            std::fs::write(&out, csv).map_err(io_error(&out))?;
        }
        Command::Compare { report_a, report_b, out } => {
            let a = EvalReport::read(&report_a).map_err(data)?;
            let b = EvalReport::read(&report_b).map_err(data)?;
            let result = compare_reports(&a, &b).map_err(data)?;
            let json = serde_json::to_string_pretty(&result).map_err(|e| data(gazekit::data::DataError::from(e)))?;
            match out {
                Some(p) => std::fs::write(&p, json + "\n").map_err(io_error(&p))?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() || e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
