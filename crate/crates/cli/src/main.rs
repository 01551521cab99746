//! Command-line front end: `transcribe`, `evaluate` and `batch` verbs over
//! the melisma library, with an optional flat key=value config file that CLI
//! flags override.
//!
//! Exit codes: 0 on success, 1 when a track failed to process, 2 for an
//! invalid invocation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use melisma::eval::REPORT_FIELDS;
use melisma::pipeline::{run_batch, transcribe_track, PipelineConfig, TrackSource};

#[derive(Parser)]
#[command(
    name = "melisma",
    version,
    about = "Note-level transcription of ornamented singing from polyphonic recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transcribe one recording to a note list.
    Transcribe {
        /// Input WAV file (44.1 kHz, mono or stereo).
        audio: PathBuf,
        /// Replace the built-in melody extractor with a contour CSV
        /// (`time_s,f0_hz`).
        #[arg(long)]
        contour: Option<PathBuf>,
        /// Output note CSV (`onset_s,duration_s,midi`).
        #[arg(long, default_value = "notes.csv")]
        out: PathBuf,
        /// Also write a Standard MIDI File.
        #[arg(long)]
        midi: Option<PathBuf>,
        /// Write per-stage diagnostics as JSON lines.
        #[arg(long)]
        diag: Option<PathBuf>,
        #[command(flatten)]
        flags: PipelineFlags,
        /// Dump per-frame features as CSV.
        #[arg(long)]
        dump_features: Option<PathBuf>,
        /// Dump the frame-wise vocal prediction as CSV.
        #[arg(long)]
        dump_vocal: Option<PathBuf>,
        /// Dump detected onsets as CSV.
        #[arg(long)]
        dump_onsets: Option<PathBuf>,
    },
    /// Score a transcription against a reference note list.
    Evaluate {
        /// Estimated notes (`onset_s,duration_s,midi`).
        notes: PathBuf,
        /// Reference notes (same schema).
        gt: PathBuf,
        /// Write the scores as a report CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Transcribe and evaluate every row of a manifest
    /// (`audio_path,gt_path[,contour_path]`).
    Batch {
        manifest: PathBuf,
        /// Write per-track scores plus the dataset mean as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write each track's note CSV into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        flags: PipelineFlags,
    },
}

#[derive(Args)]
struct PipelineFlags {
    /// Monophonic setup: skip channel selection and contour filtering and
    /// raise the voicing tolerance.
    #[arg(long)]
    mono: bool,
    /// Process channel 0 without comparing channels.
    #[arg(long = "no-channel-select")]
    no_channel_select: bool,
    /// Keep every melody contour (skip the vocal classifier).
    #[arg(long = "no-contour-filter")]
    no_contour_filter: bool,
    /// Label from local pitch statistics only.
    #[arg(long = "no-global-pitch")]
    no_global_pitch: bool,
    /// Voicing tolerance of the melody extractor, in [-2, 3].
    #[arg(long = "tau-v")]
    tau_v: Option<f64>,
    /// Flat key=value file mirroring these flags; CLI values win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Default)]
struct FileConfig {
    tau_v: Option<f64>,
    mono: Option<bool>,
    no_channel_select: Option<bool>,
    no_contour_filter: Option<bool>,
    no_global_pitch: Option<bool>,
    workers: Option<usize>,
}

fn parse_config_file(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut config = FileConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |what: &str| format!("{}:{}: {what}", path.display(), lineno + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        let parse_bool = |v: &str| match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(err(&format!("invalid boolean {v:?}"))),
        };
        match key {
            "tau_v" => {
                config.tau_v = Some(value.parse().map_err(|_| err("invalid number"))?);
            }
            "mono" => config.mono = Some(parse_bool(value)?),
            "no_channel_select" => config.no_channel_select = Some(parse_bool(value)?),
            "no_contour_filter" => config.no_contour_filter = Some(parse_bool(value)?),
            "no_global_pitch" => config.no_global_pitch = Some(parse_bool(value)?),
            "workers" => {
                config.workers = Some(value.parse().map_err(|_| err("invalid number"))?);
            }
            other => return Err(err(&format!("unknown key {other:?}"))),
        }
    }
    Ok(config)
}

fn build_config(flags: &PipelineFlags, workers: Option<usize>) -> Result<PipelineConfig, String> {
    let file = match &flags.config {
        Some(path) => parse_config_file(path)?,
        None => FileConfig::default(),
    };
    let mut config = PipelineConfig::default();
    config.mono = flags.mono || file.mono.unwrap_or(false);
    config.no_channel_selection = flags.no_channel_select || file.no_channel_select.unwrap_or(false);
    config.no_contour_filter = flags.no_contour_filter || file.no_contour_filter.unwrap_or(false);
    config.no_global_pitch = flags.no_global_pitch || file.no_global_pitch.unwrap_or(false);
    config.tau_v = flags
        .tau_v
        .or(file.tau_v)
        .unwrap_or(if config.mono {
            melisma::pipeline::MONO_TAU_V
        } else {
            melisma::pipeline::DEFAULT_TAU_V
        });
    if let Some(w) = workers.or(file.workers) {
        config.workers = w;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Invocation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Track(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum Failure {
    /// Bad flags or config: exit code 2.
    Invocation(String),
    /// A track could not be processed: exit code 1.
    Track(String),
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Transcribe {
            audio,
            contour,
            out,
            midi,
            diag,
            flags,
            dump_features,
            dump_vocal,
            dump_onsets,
        } => {
            let mut config = build_config(&flags, None).map_err(Failure::Invocation)?;
            config.dump_features = dump_features;
            config.dump_vocal = dump_vocal;
            config.dump_onsets = dump_onsets;
            let source = match contour {
                Some(contour) => TrackSource::AudioWithContour { audio, contour },
                None => TrackSource::Audio(audio),
            };
            let (notes, diagnostics) =
                transcribe_track::<f64>(&source, &config).map_err(|e| Failure::Track(e.to_string()))?;
            melisma::io::write_notes_csv(&out, &notes)
                .map_err(|e| Failure::Track(e.to_string()))?;
            if let Some(path) = midi {
                melisma::io::write_midi(&path, &notes).map_err(|e| Failure::Track(e.to_string()))?;
            }
            if let Some(path) = diag {
                diagnostics
                    .write_jsonl(&path)
                    .map_err(|e| Failure::Track(e.to_string()))?;
            }
            for warning in diagnostics.warnings() {
                eprintln!("warning: {warning}");
            }
            println!("wrote {} notes to {}", notes.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { notes, gt, report } => {
            let est = melisma::io::read_notes_csv(&notes).map_err(|e| Failure::Track(e.to_string()))?;
            let reference =
                melisma::io::read_notes_csv(&gt).map_err(|e| Failure::Track(e.to_string()))?;
            let result = melisma::eval::evaluate_notes(&est, &reference);
            for (field, value) in REPORT_FIELDS.iter().zip(result.values()) {
                println!("{field}: {value:.6}");
            }
            if let Some(path) = report {
                melisma::io::write_report_csv(&path, &[(notes.display().to_string(), result)])
                    .map_err(|e| Failure::Track(e.to_string()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Batch {
            manifest,
            report,
            out_dir,
            workers,
            flags,
        } => {
            let config = build_config(&flags, workers).map_err(Failure::Invocation)?;
            let entries =
                melisma::io::read_manifest(&manifest).map_err(|e| Failure::Invocation(e.to_string()))?;
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Failure::Invocation(format!("{}: {e}", dir.display())))?;
            }
            let outcome = run_batch::<f64>(&entries, &config, out_dir.as_deref())
                .map_err(|e| Failure::Invocation(e.to_string()))?;

            let mut rows = Vec::new();
            for track in &outcome.tracks {
                match &track.outcome {
                    Ok(result) => {
                        println!(
                            "{}: FM_On {:.3} FM_N {:.3} RPA {:.3}",
                            track.id, result.fm_on, result.fm_n, result.rpa
                        );
                        rows.push((track.id.clone(), *result));
                    }
                    Err(e) => eprintln!("{}: FAILED: {e}", track.id),
                }
            }
            if let Some(mean) = outcome.mean_values() {
                let summary: Vec<String> = REPORT_FIELDS
                    .iter()
                    .zip(mean)
                    .map(|(f, v)| format!("{f} {v:.3}"))
                    .collect();
                println!("dataset mean: {}", summary.join(", "));
            }
            if let Some(path) = report {
                melisma::io::write_report_csv(&path, &rows)
                    .map_err(|e| Failure::Track(e.to_string()))?;
            }
            Ok(if outcome.any_failed() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}
