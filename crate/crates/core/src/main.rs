use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mpradiomics::config::{PipelineConfig, Preset};
use mpradiomics::phantom::{PhantomSpec, Texture};
use mpradiomics::pipeline::{
    cmd_classify, cmd_compare, cmd_extract, cmd_phantom, cmd_progression, StudyInfo,
};
use mpradiomics::tscm::{feature_map, save_feature_map};
use mpradiomics::volume::{load_mask, load_stack, quantize};
use mpradiomics::{Error, Result};

const EXIT_INPUT: u8 = 2;
const EXIT_COMPUTATION: u8 = 3;

/// Multiparametric radiomics: tissue-signature features, IsoSVM
/// classification and group statistics.
///
/// Exit codes: 0 success, 2 invalid input (arguments, files, configuration),
/// 3 computation failure.
#[derive(Debug, Parser)]
#[command(name = "mpradiomics", version)]
struct Cli {
    /// Pipeline configuration file (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration preset (default: grading).
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path (file or directory, depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Grading,
    Progression,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TextureArg {
    Smooth,
    Heterogeneous,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic phantom stack and ROI into the --out directory.
    Phantom {
        #[arg(long, value_enum, default_value = "smooth")]
        texture: TextureArg,
        /// Class label stored with the phantom (default: the texture name).
        #[arg(long)]
        label: Option<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [32usize, 32, 32])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        channels: usize,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
    /// Extract all features of one study into a feature file (--out).
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Study identifier (default: the manifest's directory name).
        #[arg(long)]
        study_id: Option<String>,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        time_point: Option<i64>,
    },
    /// Leave-one-out IsoSVM over a directory of labeled feature files;
    /// writes a JSON report to --out.
    Classify { cohort_dir: PathBuf },
    /// Per-feature comparison of two groups of feature files; writes CSV to
    /// --out.
    Compare { group_a: PathBuf, group_b: PathBuf },
    /// Time-point delta analysis; writes a JSON report to --out plus
    /// comparison and ROC CSV files next to it.
    Progression {
        timepoint1: PathBuf,
        timepoint2: PathBuf,
        /// CSV with columns study_id,label (default: labels of time point 2).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Voxel-wise feature map over a sliding window; writes <feature>.f32 and
    /// <feature>.json into the --out directory.
    Map {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        feature: String,
        #[arg(long, default_value_t = 2)]
        window: usize,
    },
    /// Write the effective configuration as JSON (to --out, or stdout).
    Config,
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match (&cli.config, cli.preset) {
        (Some(path), _) => PipelineConfig::load(path)?,
        (None, Some(PresetArg::Progression)) => PipelineConfig::preset(Preset::Progression),
        (None, _) => PipelineConfig::preset(Preset::Grading),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_path(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("--out is required for this command".into()))
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Phantom {
            texture,
            label,
            dims,
            channels,
            noise,
        } => {
            let (texture, name) = match texture {
                TextureArg::Smooth => (Texture::Smooth, "smooth"),
                TextureArg::Heterogeneous => (Texture::Heterogeneous, "heterogeneous"),
            };
            let &[nx, ny, nz] = dims.as_slice() else {
                return Err(Error::InvalidParameter(format!(
                    "--dims needs three values, got {}",
                    dims.len()
                )));
            };
            let spec = PhantomSpec {
                label: label.clone().unwrap_or_else(|| name.to_string()),
                dims: [nx, ny, nz],
                channels: *channels,
                texture,
                noise: *noise,
                seed: config.seed,
            };
            let out = cmd_phantom(&spec, out_path(cli)?)?;
            println!("{}", out.manifest.display());
        }
        Command::Extract {
            manifest,
            mask,
            study_id,
            label,
            time_point,
        } => {
            let study_id = match study_id {
                Some(id) => id.clone(),
                None => manifest
                    .canonicalize()
                    .ok()
                    .and_then(|p| {
                        p.parent()
                            .and_then(|d| d.file_name())
                            .map(|s| s.to_string_lossy().into_owned())
                    })
                    .ok_or_else(|| {
                        Error::InvalidParameter("cannot infer --study-id from manifest path".into())
                    })?,
            };
            let study = StudyInfo {
                study_id,
                label: label.clone(),
                time_point: *time_point,
            };
            let row = cmd_extract(&config, manifest, mask, &study, out_path(cli)?)?;
            println!("{}: {} features", row.study_id, row.values.len());
        }
        Command::Classify { cohort_dir } => {
            let report = cmd_classify(&config, cohort_dir, out_path(cli)?)?;
            println!(
                "AUC {:.4}  sensitivity {:.4}  specificity {:.4}  ({} studies)",
                report.auc, report.sensitivity, report.specificity, report.n_studies
            );
        }
        Command::Compare { group_a, group_b } => {
            let cmp = cmd_compare(&config, group_a, group_b, out_path(cli)?)?;
            println!("{} features compared", cmp.rows.len());
        }
        Command::Progression {
            timepoint1,
            timepoint2,
            labels,
        } => {
            let report = cmd_progression(
                &config,
                timepoint1,
                timepoint2,
                labels.as_deref(),
                out_path(cli)?,
            )?;
            println!(
                "{} features; groups {} (n={}) vs {} (n={})",
                report.features.len(),
                report.group_a,
                report.n_a,
                report.group_b,
                report.n_b
            );
        }
        Command::Map {
            manifest,
            mask,
            feature,
            window,
        } => {
            let stack = load_stack(manifest)?;
            let roi = load_mask(mask, stack.dims())?;
            let q = quantize(&stack, &roi, config.g)?;
            let map = feature_map(&q, &roi, feature, *window, config.d)?;
            save_feature_map(&map, out_path(cli)?, feature)?;
        }
        Command::Config => match &cli.out {
            Some(path) => std::fs::write(path, config.to_json() + "\n").map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?,
            None => println!("{}", config.to_json()),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidParameter("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::InvalidParameter(format!("thread pool: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_computation() {
                EXIT_COMPUTATION
            } else {
                EXIT_INPUT
            })
        }
    }
}
