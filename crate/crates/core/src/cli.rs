//! Command-line front end: `simulate`, `ingest`, `featurize`, `evaluate`,
//! `report`. Every command writes a `run_manifest.json` next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::Featurizer;
use crate::ingest::ingest_packet_stream;
use crate::learn::{evaluate_table, featurize_dataset, summary_text, write_report, EvalReport, ForestParams, Scheme};
use crate::model::store::{read_manifest, read_store, write_atomic, write_features_csv, write_store, FeatureRow, SessionManifest};
use crate::model::{AcquisitionConfig, Dataset, PipelineConfig, ProtocolConfig};
use crate::synth::{emit_capture, generate_dataset, oracle_dataset, permute_labels, SynthConfig};
use crate::{Error, Result};

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const FEATURES_CSV: &str = "features.csv";

#[derive(Debug, Parser)]
#[command(name = "silentspeech", version, about = "Surface-EMG silent speech decoding pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment configuration (JSON); missing sections take defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic session store.
    Simulate {
        /// Generate the separable oracle dataset with this offset step (µV).
        #[arg(long, value_name = "UV")]
        oracle_separation: Option<f64>,
        /// Shuffle labels within each batch (chance-level control).
        #[arg(long)]
        permute_labels: bool,
        /// Also write each session as a raw packet capture plus schedule.
        #[arg(long)]
        capture: bool,
    },
    /// Parse a raw packet capture into a session store.
    Ingest {
        #[arg(long, value_name = "PATH")]
        capture: PathBuf,
        /// Session manifest JSON whose schedule indexes into the capture.
        #[arg(long, value_name = "PATH")]
        schedule: PathBuf,
    },
    /// Write the per-utterance feature matrix as CSV.
    Featurize {
        #[arg(long, value_name = "DIR")]
        store: PathBuf,
    },
    /// Run one evaluation scheme and write the report.
    Evaluate {
        #[arg(long, value_name = "DIR")]
        store: PathBuf,
        #[arg(long, default_value = "global")]
        scheme: Scheme,
    },
    /// Print (and save) the summary of an existing report.
    Report {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

/// Every tunable of a run. Sections absent from the JSON take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub acquisition: AcquisitionConfig,
    pub protocol: ProtocolConfig,
    pub pipeline: PipelineConfig,
    pub synth: SynthConfig,
    pub forest: ForestParams,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                Ok(serde_json::from_slice(&bytes)?)
            }
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.synth.seed = s;
            self.forest.seed = s;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub inputs: Vec<String>,
    pub outputs: Vec<Artifact>,
    pub duration_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Parses `args` and runs the command. Returns the run manifest.
pub fn run_from<I, S>(args: I) -> Result<RunManifest>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => Err(crate::model::ConfigError::Invalid(e.to_string()).into()),
    }
}

pub fn run(cli: Cli) -> Result<RunManifest> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| crate::model::ConfigError::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &[u8]) -> Result<PathBuf> {
        let p = self.dir.join(name);
        write_atomic(&p, body)?;
        self.files.push(p.clone());
        Ok(p)
    }

    fn artifacts(&self) -> Result<Vec<Artifact>> {
        self.files
            .iter()
            .map(|p| {
                Ok(Artifact {
                    path: p
                        .strip_prefix(&self.dir)
                        .unwrap_or(p)
                        .to_string_lossy()
                        .replace('\\', "/"),
                    sha256: sha256_file(p)?,
                })
            })
            .collect()
    }
}

fn dispatch(cli: &Cli) -> Result<RunManifest> {
    let started = Instant::now();
    let c = &cli.common;
    let cfg = ExperimentConfig::load(c.config.as_deref())?.with_seed(c.seed);
    let mut out = Outputs::new(&c.out)?;
    let mut inputs: Vec<String> = c.config.iter().map(|p| p.display().to_string()).collect();

    let name = match &cli.command {
        Command::Simulate {
            oracle_separation,
            permute_labels: permute,
            capture,
        } => {
            let mut d = match oracle_separation {
                Some(sep) => oracle_dataset(&cfg.protocol, &cfg.acquisition, *sep, cfg.synth.seed)?,
                None => generate_dataset(&cfg.protocol, &cfg.acquisition, &cfg.synth)?,
            };
            if *permute {
                d = permute_labels(&d, cfg.synth.seed);
            }
            out.files.extend(write_store(&c.out, &d)?);
            if *capture {
                for s in d.session_ids() {
                    let (bytes, manifest) = emit_capture(&d, &s)?;
                    out.write(&format!("capture_{s}.bin"), &bytes)?;
                    out.write(&format!("schedule_{s}.json"), &serde_json::to_vec_pretty(&manifest)?)?;
                }
            }
            print_counts(&d);
            "simulate"
        }
        Command::Ingest { capture, schedule } => {
            inputs.push(capture.display().to_string());
            inputs.push(schedule.display().to_string());
            let manifest = read_manifest(schedule)?;
            let bytes = fs::read(capture).map_err(|e| Error::io(capture, e))?;
            let d = ingest_capture(&bytes, &manifest)?;
            if manifest.schedule.is_empty() {
                eprintln!("warning: schedule is empty; the store will hold no utterances");
            }
            out.files.extend(write_store(&c.out, &d)?);
            print_counts(&d);
            "ingest"
        }
        Command::Featurize { store } => {
            inputs.push(store.display().to_string());
            let d = read_store(store)?;
            let fz = Featurizer::<f64>::new(&cfg.pipeline, d.acquisition.sample_rate)?;
            let table = featurize_dataset(&d, fz.config())?;
            let vectors: Vec<_> = table
                .features
                .into_iter()
                .map(crate::features::FeatureVector::new)
                .collect();
            let rows: Vec<FeatureRow<'_>> = d
                .utterances
                .iter()
                .zip(&vectors)
                .map(|(u, f)| FeatureRow {
                    session_id: &u.session_id,
                    batch_id: u.batch_id,
                    word_code: u.word.code(),
                    features: f,
                })
                .collect();
            let path = c.out.join(FEATURES_CSV);
            write_features_csv(&path, &cfg.pipeline.feature_names(d.acquisition.n_active()), rows)?;
            out.files.push(path);
            println!("featurized {} utterances x {} features", d.len(), cfg.pipeline.feature_dim(d.acquisition.n_active()));
            "featurize"
        }
        Command::Evaluate { store, scheme } => {
            inputs.push(store.display().to_string());
            let d = read_store(store)?;
            let table = featurize_dataset(&d, &cfg.pipeline)?;
            let report = evaluate_table(&table, *scheme, &cfg.forest)?;
            out.files.extend(write_report(&c.out, &report)?);
            let a = &report.aggregate;
            println!("{} overall accuracy = {:.3} ± {:.3}", report.scheme, a.overall_mean, a.overall_std);
            println!("chance = {:.3}", report.chance_level);
            "evaluate"
        }
        Command::Report { input } => {
            inputs.push(input.display().to_string());
            let bytes = fs::read(input).map_err(|e| Error::io(input, e))?;
            let report: EvalReport = serde_json::from_slice(&bytes)?;
            let text = summary_text(&report);
            print!("{text}");
            out.write("summary.txt", text.as_bytes())?;
            "report"
        }
    };

    let manifest = RunManifest {
        command: name.to_string(),
        config: cfg,
        seed: c.seed,
        threads: c.threads,
        inputs,
        outputs: out.artifacts()?,
        duration_s: started.elapsed().as_secs_f64(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&c.out.join(RUN_MANIFEST), &json)?;
    Ok(manifest)
}

/// Parses, converts and segments a session capture against its manifest.
pub fn ingest_capture(bytes: &[u8], manifest: &SessionManifest) -> Result<Dataset> {
    manifest.acquisition.validate()?;
    manifest.protocol.validate()?;
    let (stream, gaps) = ingest_packet_stream(bytes, &manifest.acquisition)?;
    println!(
        "parsed {} frames; {} gaps, {} frames lost",
        stream.len() as u64 - gaps.frames_lost(),
        gaps.gaps.len(),
        gaps.frames_lost()
    );
    for g in &gaps.gaps {
        println!("  gap after seq {}: {} frames lost at sample {}", g.after_seq, g.lost, g.at_sample);
    }
    let utterances = crate::ingest::segment_utterances(
        &stream,
        &manifest.schedule,
        &manifest.protocol,
        &manifest.acquisition.active_channels,
        &manifest.session_id,
    )?;
    Ok(Dataset {
        utterances,
        condition: manifest.condition,
        acquisition: manifest.acquisition.clone(),
        protocol: manifest.protocol.clone(),
    })
}

fn print_counts(d: &Dataset) {
    println!("{} utterances", d.len());
    for s in d.session_ids() {
        let n = d.session(&s).count();
        let batches: std::collections::BTreeSet<u32> = d.session(&s).map(|u| u.batch_id).collect();
        println!("  session {s}: {n} utterances in {} batches", batches.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_sections_default() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"protocol": {"reps_per_batch": 2}}"#).unwrap();
        assert_eq!(cfg.protocol.reps_per_batch, 2);
        assert_eq!(cfg.protocol.batches_per_session, 7);
        assert_eq!(cfg.forest, ForestParams::default());
        let seeded = cfg.with_seed(Some(42));
        assert_eq!((seeded.synth.seed, seeded.forest.seed), (42, 42));
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "silentspeech", "evaluate", "--store", "s", "--scheme", "loso", "--seed", "3", "--threads", "2",
        ])
        .unwrap();
        assert_eq!(cli.common.seed, Some(3));
        assert_eq!(cli.common.threads, Some(2));
        assert!(matches!(cli.command, Command::Evaluate { scheme: Scheme::Loso, .. }));
        assert!(Cli::try_parse_from(["silentspeech", "evaluate", "--store", "s", "--scheme", "kfold"]).is_err());
    }
}
