//! End-to-end orchestration: channel selection, melody extraction, contour
//! filtering, segmentation, labelling and post-processing, with switches to
//! disable individual stages and a batch harness with evaluation.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::Serialize;

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::eval::{evaluate_notes, EvalReport};
use crate::io::{self, ManifestEntry};
use crate::labelling::{
    estimate_tuning, global_pitch_classes, label_segments, post_process, remap_to_tuned_cents,
    uniform_pitch_classes, NoteEvent, PostProcessParams,
};
use crate::melody::{extract_predominant, load_contour, PitchContour, CONTOUR_GRID};
use crate::scalar::Scalar;
use crate::segmentation::{segment_all, Detector, SegmentationParams};
use crate::spectral::{
    bark_energies, chroma_track, mean_band_ratio, rms_track, spectral_band_ratio, ChromaParams,
};
use crate::vocal::{classify_frames, filter_contours, fit_models, smooth_prediction};

/// Default voicing tolerance for polyphonic material.
pub const DEFAULT_TAU_V: f64 = 0.2;

/// Voicing tolerance used by the monophonic setup.
pub const MONO_TAU_V: f64 = 3.0;

/// Pipeline switches and stage parameters. Defaults are the published
/// operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Voicing tolerance of the melody extractor.
    pub tau_v: f64,
    /// Monophonic setup: skips channel selection and contour filtering.
    /// [`PipelineConfig::mono_mode`] also raises `tau_v`.
    pub mono: bool,
    /// Skip channel selection, processing channel 0.
    pub no_channel_selection: bool,
    /// Skip the vocal/non-vocal contour filter.
    pub no_contour_filter: bool,
    /// Label from local pitch histograms only (uniform global prior).
    pub no_global_pitch: bool,
    /// Worker threads for batch processing.
    pub workers: usize,
    /// Length of the moving average applied to the vocal prediction.
    pub smoothing_window_s: f64,
    pub salience: crate::melody::SalienceParams,
    pub chroma: ChromaParams,
    pub segmentation: SegmentationParams,
    pub post: PostProcessParams,
    /// Optional debug dumps.
    pub dump_features: Option<PathBuf>,
    pub dump_vocal: Option<PathBuf>,
    pub dump_onsets: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau_v: DEFAULT_TAU_V,
            mono: false,
            no_channel_selection: false,
            no_contour_filter: false,
            no_global_pitch: false,
            workers: 1,
            smoothing_window_s: 1.0,
            salience: Default::default(),
            chroma: Default::default(),
            segmentation: Default::default(),
            post: Default::default(),
            dump_features: None,
            dump_vocal: None,
            dump_onsets: None,
        }
    }
}

impl PipelineConfig {
    /// The monophonic setup: no channel selection, no contour filtering, and
    /// a raised voicing tolerance.
    pub fn mono_mode(mut self) -> Self {
        self.mono = true;
        self.tau_v = MONO_TAU_V;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(-2.0..=3.0).contains(&self.tau_v) {
            return Err(Error::Config(format!(
                "tau_v must lie in [-2, 3], got {}",
                self.tau_v
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// What to transcribe: audio, audio plus an external contour, or a contour
/// alone (spectral stages are then unavailable and skipped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrackSource {
    Audio(PathBuf),
    AudioWithContour { audio: PathBuf, contour: PathBuf },
    ContourOnly(PathBuf),
}

/// One structured record per executed stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageDiag {
    ChannelSelection {
        skipped: bool,
        selected_channel: usize,
        mean_s_db: Vec<f64>,
    },
    Melody {
        source: String,
        voiced_frames: usize,
        num_contours: usize,
    },
    ContourFilter {
        skipped: bool,
        disabled: Option<String>,
        contours_in: usize,
        contours_out: usize,
        frames_in: usize,
        frames_out: usize,
    },
    Tuning {
        deviation_cents: f64,
        a4_hz: f64,
    },
    GlobalPitchClasses {
        uniform: bool,
        distribution: Vec<f64>,
    },
    Segmentation {
        contours: usize,
        onsets_envelope: usize,
        onsets_gauss_deriv: usize,
        onsets_rms_decay: usize,
        onsets_pitch_dip: usize,
        merged_onsets: usize,
        segments: usize,
        dropped_fragments: usize,
    },
    Labelling {
        notes: usize,
    },
    PostProcess {
        notes_in: usize,
        notes_out: usize,
    },
    Warning {
        message: String,
    },
}

/// Stage-by-stage records of one pipeline run, serialisable as JSON lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub stages: Vec<StageDiag>,
}

impl Diagnostics {
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, &self.stages)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().filter_map(|s| match s {
            StageDiag::Warning { message } => Some(message.as_str()),
            _ => None,
        })
    }

    fn find<F: Fn(&StageDiag) -> bool>(&self, pred: F) -> Option<&StageDiag> {
        self.stages.iter().find(|s| pred(s))
    }

    pub fn tuning_cents(&self) -> Option<f64> {
        self.find(|s| matches!(s, StageDiag::Tuning { .. }))
            .map(|s| match s {
                StageDiag::Tuning {
                    deviation_cents, ..
                } => *deviation_cents,
                _ => unreachable!(),
            })
    }

    pub fn selected_channel(&self) -> Option<usize> {
        self.find(|s| matches!(s, StageDiag::ChannelSelection { .. }))
            .map(|s| match s {
                StageDiag::ChannelSelection {
                    selected_channel, ..
                } => *selected_channel,
                _ => unreachable!(),
            })
    }
}

/// Transcribes from file paths per the source description.
pub fn transcribe_track<T: Scalar>(
    source: &TrackSource,
    config: &PipelineConfig,
) -> Result<(Vec<NoteEvent>, Diagnostics)> {
    config.validate()?;
    match source {
        TrackSource::Audio(path) => {
            let clip = AudioClip::<T>::from_wav(path).map_err(|e| e.in_stage("audio-input"))?;
            transcribe_clip(&clip, None, config)
        }
        TrackSource::AudioWithContour { audio, contour } => {
            let clip = AudioClip::<T>::from_wav(audio).map_err(|e| e.in_stage("audio-input"))?;
            let contour = load_contour(contour, CONTOUR_GRID)
                .map_err(|e| e.in_stage("melody"))?;
            transcribe_clip(&clip, Some(contour), config)
        }
        TrackSource::ContourOnly(path) => {
            let contour = load_contour::<T>(path, CONTOUR_GRID)
                .map_err(|e| e.in_stage("melody"))?;
            transcribe_contour(contour, "external", config)
        }
    }
}

/// Transcribes a loaded clip, optionally with an externally supplied melody
/// contour replacing the built-in extractor.
pub fn transcribe_clip<T: Scalar>(
    clip: &AudioClip<T>,
    external_contour: Option<PitchContour<T>>,
    config: &PipelineConfig,
) -> Result<(Vec<NoteEvent>, Diagnostics)> {
    config.validate()?;
    let mut diag = Diagnostics::default();

    // Channel selection.
    let skip_selection = config.mono || config.no_channel_selection || clip.num_channels() < 2;
    let (channel, means) = if skip_selection {
        (0, Vec::new())
    } else {
        let means: Vec<f64> = (0..clip.num_channels())
            .map(|ch| {
                mean_band_ratio(&spectral_band_ratio(clip, ch))
                    .map(Scalar::to_f64_lossy)
                    .unwrap_or(f64::NEG_INFINITY)
            })
            .collect();
        let best = means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (best, means)
    };
    diag.stages.push(StageDiag::ChannelSelection {
        skipped: skip_selection,
        selected_channel: channel,
        mean_s_db: means,
    });

    // Melody.
    let (contour, source) = match external_contour {
        Some(c) => (c, "external"),
        None => (
            extract_predominant(clip, channel, config.tau_v, &config.salience),
            "internal",
        ),
    };
    diag.stages.push(StageDiag::Melody {
        source: source.into(),
        voiced_frames: contour.voiced_frames(),
        num_contours: contour.contours().len(),
    });

    // Contour filtering.
    let skip_filter = config.mono || config.no_contour_filter;
    let contour = if skip_filter {
        diag.stages.push(StageDiag::ContourFilter {
            skipped: true,
            disabled: None,
            contours_in: contour.contours().len(),
            contours_out: contour.contours().len(),
            frames_in: contour.voiced_frames(),
            frames_out: contour.voiced_frames(),
        });
        contour
    } else {
        let bark = bark_energies(clip, channel);
        let frame_rate = contour.grid().frame_rate(clip.sample_rate());
        match fit_models(&bark, &contour) {
            Ok(model) => {
                let raw = classify_frames(&bark, &model);
                let smoothed = smooth_prediction(&raw, config.smoothing_window_s, frame_rate);
                if let Some(path) = &config.dump_vocal {
                    io::write_vocal_debug(path, frame_rate, &raw, &smoothed)?;
                }
                let filtered = filter_contours(&contour, &smoothed);
                diag.stages.push(StageDiag::ContourFilter {
                    skipped: false,
                    disabled: None,
                    contours_in: contour.contours().len(),
                    contours_out: filtered.contours().len(),
                    frames_in: contour.voiced_frames(),
                    frames_out: filtered.voiced_frames(),
                });
                filtered
            }
            Err(reason) => {
                diag.stages.push(StageDiag::ContourFilter {
                    skipped: false,
                    disabled: Some(reason.to_string()),
                    contours_in: contour.contours().len(),
                    contours_out: contour.contours().len(),
                    frames_in: contour.voiced_frames(),
                    frames_out: contour.voiced_frames(),
                });
                diag.stages.push(StageDiag::Warning {
                    message: reason.to_string(),
                });
                contour
            }
        }
    };

    finish_transcription(Some((clip, channel)), contour, config, diag)
}

/// Contour-only transcription: spectral stages are unavailable, so channel
/// selection and contour filtering are skipped, the volume-decay detector
/// does not run, and the global pitch prior is uniform.
pub fn transcribe_contour<T: Scalar>(
    contour: PitchContour<T>,
    source: &str,
    config: &PipelineConfig,
) -> Result<(Vec<NoteEvent>, Diagnostics)> {
    config.validate()?;
    let mut diag = Diagnostics::default();
    diag.stages.push(StageDiag::ChannelSelection {
        skipped: true,
        selected_channel: 0,
        mean_s_db: Vec::new(),
    });
    diag.stages.push(StageDiag::Melody {
        source: source.into(),
        voiced_frames: contour.voiced_frames(),
        num_contours: contour.contours().len(),
    });
    diag.stages.push(StageDiag::ContourFilter {
        skipped: true,
        disabled: None,
        contours_in: contour.contours().len(),
        contours_out: contour.contours().len(),
        frames_in: contour.voiced_frames(),
        frames_out: contour.voiced_frames(),
    });
    finish_transcription(None, contour, config, diag)
}

fn finish_transcription<T: Scalar>(
    audio: Option<(&AudioClip<T>, usize)>,
    contour: PitchContour<T>,
    config: &PipelineConfig,
    mut diag: Diagnostics,
) -> Result<(Vec<NoteEvent>, Diagnostics)> {
    let sample_rate = audio
        .map(|(clip, _)| clip.sample_rate())
        .unwrap_or(crate::audio::REQUIRED_SAMPLE_RATE);
    let frame_rate = contour.grid().frame_rate(sample_rate);

    // Tuning.
    let tuning = estimate_tuning(&contour);
    diag.stages.push(StageDiag::Tuning {
        deviation_cents: tuning.cents.to_f64_lossy(),
        a4_hz: tuning.a4_hz.to_f64_lossy(),
    });

    // Global pitch classes.
    let global = match audio {
        Some((clip, channel)) if !config.no_global_pitch => {
            let chroma = chroma_track(clip, channel, tuning.a4_hz.to_f64_lossy(), &config.chroma);
            global_pitch_classes(&chroma)
        }
        _ => uniform_pitch_classes(),
    };
    let uniform = global == uniform_pitch_classes();
    diag.stages.push(StageDiag::GlobalPitchClasses {
        uniform,
        distribution: global.iter().map(|g| g.to_f64_lossy()).collect(),
    });

    // Segmentation.
    let cents = remap_to_tuned_cents(&contour, &tuning);
    let rms = audio.map(|(clip, channel)| rms_track(clip, channel));
    let segmentation = segment_all(&cents, rms.as_deref(), frame_rate, &config.segmentation);
    let count = |d: Detector| {
        segmentation
            .onsets
            .iter()
            .filter(|o| o.detector == d)
            .count()
    };
    diag.stages.push(StageDiag::Segmentation {
        contours: contour.contours().len(),
        onsets_envelope: count(Detector::Envelope),
        onsets_gauss_deriv: count(Detector::GaussDeriv),
        onsets_rms_decay: count(Detector::RmsDecay),
        onsets_pitch_dip: count(Detector::PitchDip),
        merged_onsets: segmentation.onsets.len(),
        segments: segmentation.segments.len(),
        dropped_fragments: segmentation.dropped,
    });
    if let Some(path) = &config.dump_onsets {
        io::write_onset_debug(path, frame_rate, &segmentation.onsets)?;
    }
    if let (Some(path), Some((clip, channel))) = (&config.dump_features, audio) {
        let band = spectral_band_ratio(clip, channel);
        let bark = bark_energies(clip, channel);
        let chroma = chroma_track(clip, channel, tuning.a4_hz.to_f64_lossy(), &config.chroma);
        io::write_feature_dump(
            path,
            frame_rate,
            &band.s_db,
            crate::spectral::BAND_RATIO_GRID.hop_size / contour.grid().hop_size,
            &bark,
            rms.as_deref().unwrap_or(&[]),
            &chroma,
            config.chroma.grid.hop_size / contour.grid().hop_size,
        )?;
    }

    // Labelling and post-processing.
    let labelled = label_segments(&segmentation.segments, &cents, &global, frame_rate);
    diag.stages.push(StageDiag::Labelling {
        notes: labelled.len(),
    });
    let notes = post_process(labelled.clone(), &config.post);
    diag.stages.push(StageDiag::PostProcess {
        notes_in: labelled.len(),
        notes_out: notes.len(),
    });

    Ok((notes, diag))
}

/// Per-track outcome of a batch run.
#[derive(Debug, Clone)]
pub struct TrackReport {
    pub id: String,
    pub outcome: std::result::Result<EvalReport, String>,
}

/// Results of a batch run: per-track reports in manifest order.
#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub tracks: Vec<TrackReport>,
}

impl BatchOutcome {
    pub fn succeeded(&self) -> impl Iterator<Item = (&str, &EvalReport)> {
        self.tracks
            .iter()
            .filter_map(|t| t.outcome.as_ref().ok().map(|r| (t.id.as_str(), r)))
    }

    pub fn any_failed(&self) -> bool {
        self.tracks.iter().any(|t| t.outcome.is_err())
    }

    /// Unweighted mean over succeeded tracks, in `REPORT_FIELDS` order.
    pub fn mean_values(&self) -> Option<[f64; 11]> {
        let mut sums = [0.0f64; 11];
        let mut count = 0usize;
        for (_, report) in self.succeeded() {
            for (s, v) in sums.iter_mut().zip(report.values()) {
                *s += v;
            }
            count += 1;
        }
        (count > 0).then(|| sums.map(|s| s / count as f64))
    }
}

fn process_entry<T: Scalar>(
    entry: &ManifestEntry,
    config: &PipelineConfig,
    out_dir: Option<&Path>,
) -> std::result::Result<EvalReport, String> {
    let source = match &entry.contour {
        Some(contour) => TrackSource::AudioWithContour {
            audio: entry.audio.clone(),
            contour: contour.clone(),
        },
        None => TrackSource::Audio(entry.audio.clone()),
    };
    let (notes, _diag) = transcribe_track::<T>(&source, config).map_err(|e| e.to_string())?;
    if let Some(dir) = out_dir {
        let stem = entry
            .audio
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "track".into());
        io::write_notes_csv(&dir.join(format!("{stem}.notes.csv")), &notes)
            .map_err(|e| e.to_string())?;
    }
    let gt = io::read_notes_csv(&entry.gt).map_err(|e| e.to_string())?;
    Ok(evaluate_notes(&notes, &gt))
}

/// Transcribes and evaluates every manifest entry. Failing tracks are
/// reported, not fatal. Tracks are processed concurrently when
/// `config.workers > 1`; the output order always follows the manifest.
pub fn run_batch<T: Scalar>(
    entries: &[ManifestEntry],
    config: &PipelineConfig,
    out_dir: Option<&Path>,
) -> Result<BatchOutcome> {
    config.validate()?;
    let n = entries.len();
    let mut outcomes: Vec<Option<TrackReport>> = (0..n).map(|_| None).collect();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, TrackReport)>();

    std::thread::scope(|scope| {
        for _ in 0..config.workers.min(n.max(1)) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let entry = &entries[i];
                let report = TrackReport {
                    id: entry.audio.display().to_string(),
                    outcome: process_entry::<T>(entry, config, out_dir),
                };
                if tx.send((i, report)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, report) in rx {
            outcomes[i] = Some(report);
        }
    });

    Ok(BatchOutcome {
        tracks: outcomes.into_iter().flatten().collect(),
    })
}
