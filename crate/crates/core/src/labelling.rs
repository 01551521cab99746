//! Pitch labelling and note post-processing.
//!
//! Each note segment receives a quantised MIDI pitch by combining a local
//! pitch-histogram mixture with global chroma-derived pitch-class
//! probabilities, after the track's tuning reference has been estimated by
//! circular statistics. Musicological constraints on range and duration then
//! prune the note list.

use crate::melody::{ContourSpan, PitchContour};
use crate::scalar::Scalar;
use crate::segmentation::{cents_from_contour, CentContour};
use crate::spectral::NUM_PITCH_CLASSES;

pub const STANDARD_A4_HZ: f64 = 440.0;
pub const MIDI_A4: i32 = 69;

/// Minimum duration a transcribed note may have, in seconds.
pub const MIN_NOTE_DURATION_S: f64 = 0.05;

/// Standard deviation of the per-bin Gaussians in the local pitch mixture,
/// in semitones (a quarter tone).
const LOCAL_SIGMA_SEMITONES: f64 = 0.5;

/// Global tuning deviation from A4 = 440 Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningEstimate<T> {
    /// Deviation in cents, in `(-50, 50]`.
    pub cents: T,
    /// The tuned reference: `2^(cents/1200) * 440`.
    pub a4_hz: T,
}

impl<T: Scalar> TuningEstimate<T> {
    pub fn from_cents(cents: T) -> Self {
        TuningEstimate {
            cents,
            a4_hz: (cents / T::of(1200.0)).exp2() * T::of(STANDARD_A4_HZ),
        }
    }
}

/// Length of the moving average applied within each contour before tuning
/// deviations are taken, spanning a full period of the slowest expected
/// vibrato (4 Hz).
const TUNING_SMOOTHING_S: f64 = 0.25;

/// Estimates the global tuning deviation from the voiced frames of a
/// contour.
///
/// Each contour is first smoothed with a vibrato-period moving average so
/// that symmetric ornamentation cancels before the semitone wrap (raw
/// +-50-cent vibrato would smear the deviations around the entire 100-cent
/// circle). Every smoothed frame's deviation from the semitone grid then
/// maps to an angle with a 100-cent period, and the circular mean angle maps
/// back to cents in `(-50, 50]`. No voiced frames (or perfectly cancelling
/// deviations) yield 0.
pub fn estimate_tuning<T: Scalar>(contour: &PitchContour<T>) -> TuningEstimate<T> {
    let frame_rate = contour
        .grid()
        .frame_rate(crate::audio::REQUIRED_SAMPLE_RATE);
    let half = (0.5 * TUNING_SMOOTHING_S * frame_rate).round() as usize;

    let mut sum_cos = 0f64;
    let mut sum_sin = 0f64;
    for span in contour.contours() {
        let cents: Vec<f64> = span
            .frames()
            .map(|n| 1200.0 * (contour.f0()[n].to_f64_lossy() / STANDARD_A4_HZ).log2())
            .collect();
        for i in 0..cents.len() {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(cents.len());
            let smoothed = cents[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            let theta = smoothed * std::f64::consts::TAU / 100.0;
            sum_cos += theta.cos();
            sum_sin += theta.sin();
        }
    }
    if sum_cos == 0.0 && sum_sin == 0.0 {
        return TuningEstimate::from_cents(T::zero());
    }
    let mean_angle = sum_sin.atan2(sum_cos);
    let mut cents = mean_angle * 100.0 / std::f64::consts::TAU;
    if cents <= -50.0 {
        cents += 100.0;
    }
    TuningEstimate::from_cents(T::of(cents))
}

/// Re-maps the contour to cents relative to the estimated reference.
pub fn remap_to_tuned_cents<T: Scalar>(
    contour: &PitchContour<T>,
    tuning: &TuningEstimate<T>,
) -> CentContour<T> {
    cents_from_contour(contour, tuning.a4_hz.to_f64_lossy())
}

/// Global pitch-class probabilities: the average chroma vector normalised to
/// sum 1. Degenerates to the uniform distribution when there is no chroma
/// mass at all, so the combined label falls back to local-only evidence.
pub fn global_pitch_classes<T: Scalar>(
    chroma: &[[T; NUM_PITCH_CLASSES]],
) -> [T; NUM_PITCH_CLASSES] {
    let mut mean = [T::zero(); NUM_PITCH_CLASSES];
    for frame in chroma {
        for (m, &c) in mean.iter_mut().zip(frame) {
            *m = *m + c;
        }
    }
    let total: T = mean.iter().cloned().sum();
    if total <= T::zero() {
        return uniform_pitch_classes();
    }
    for m in &mut mean {
        *m = *m / total;
    }
    mean
}

pub fn uniform_pitch_classes<T: Scalar>() -> [T; NUM_PITCH_CLASSES] {
    [T::of(1.0 / NUM_PITCH_CLASSES as f64); NUM_PITCH_CLASSES]
}

/// A probability profile over integer semitone bins; bin 0 is the tuned A4.
#[derive(Debug, Clone)]
pub struct SemitoneDistribution<T> {
    pub first_bin: i32,
    pub values: Vec<T>,
}

impl<T: Scalar> SemitoneDistribution<T> {
    pub fn bins(&self) -> impl Iterator<Item = (i32, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.first_bin + i as i32, v))
    }

    /// Bin with the highest value; ties break toward the lower bin.
    pub fn argmax_bin(&self) -> i32 {
        let mut best = (self.first_bin, T::neg_infinity());
        for (bin, v) in self.bins() {
            if v > best.1 {
                best = (bin, v);
            }
        }
        best.0
    }
}

/// Local pitch probability of one segment: each frame is quantised to its
/// nearest semitone bin, the normalised histogram is smeared with a
/// quarter-tone Gaussian per occupied bin, and the mixture is evaluated on
/// integer bins spanning the histogram plus three semitones on either side.
pub fn local_pitch_probability<T: Scalar>(cents: &[T]) -> SemitoneDistribution<T> {
    debug_assert!(!cents.is_empty());
    let bins: Vec<i32> = cents
        .iter()
        .map(|&c| (c.to_f64_lossy() / 100.0).round() as i32)
        .collect();
    let lo = bins.iter().min().copied().unwrap_or(0) - 3;
    let hi = bins.iter().max().copied().unwrap_or(0) + 3;

    let mut histogram = vec![0f64; (hi - lo + 1) as usize];
    for &b in &bins {
        histogram[(b - lo) as usize] += 1.0;
    }
    let n = bins.len() as f64;
    for h in &mut histogram {
        *h /= n;
    }

    let norm = 1.0 / (LOCAL_SIGMA_SEMITONES * std::f64::consts::TAU.sqrt());
    let two_sigma_sq = 2.0 * LOCAL_SIGMA_SEMITONES * LOCAL_SIGMA_SEMITONES;
    let values = (lo..=hi)
        .map(|k| {
            let mix: f64 = histogram
                .iter()
                .enumerate()
                .filter(|(_, &h)| h > 0.0)
                .map(|(i, &h)| {
                    let centre = lo + i as i32;
                    let d = (k - centre) as f64;
                    h * norm * (-d * d / two_sigma_sq).exp()
                })
                .sum();
            T::of(mix)
        })
        .collect();
    SemitoneDistribution {
        first_bin: lo,
        values,
    }
}

/// Combines local and global pitch probabilities and returns the MIDI label:
/// `69 + argmax` over the bins of the local distribution, each weighted by
/// the global probability of its pitch class (class 0 = A).
pub fn assign_pitch<T: Scalar>(
    local: &SemitoneDistribution<T>,
    global: &[T; NUM_PITCH_CLASSES],
) -> i32 {
    let combined = SemitoneDistribution {
        first_bin: local.first_bin,
        values: local
            .bins()
            .map(|(bin, v)| v * global[bin.rem_euclid(12) as usize])
            .collect(),
    };
    MIDI_A4 + combined.argmax_bin()
}

/// A transcribed note.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteEvent {
    pub onset_s: f64,
    pub duration_s: f64,
    pub midi: i32,
}

/// Post-processing constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostProcessParams {
    /// Allowed range around the track's median note pitch, in semitones.
    /// Notes below are dropped as accompaniment, notes above come down by
    /// octaves.
    pub pitch_range_semitones: f64,
    pub min_note_s: f64,
}

impl Default for PostProcessParams {
    fn default() -> Self {
        PostProcessParams {
            pitch_range_semitones: 8.0,
            min_note_s: MIN_NOTE_DURATION_S,
        }
    }
}

fn median_midi(notes: &[NoteEvent]) -> f64 {
    let mut pitches: Vec<i32> = notes.iter().map(|n| n.midi).collect();
    pitches.sort_unstable();
    let n = pitches.len();
    if n % 2 == 1 {
        pitches[n / 2] as f64
    } else {
        (pitches[n / 2 - 1] + pitches[n / 2]) as f64 / 2.0
    }
}

/// Applies the range and duration constraints: notes more than the range
/// below the median pitch are deleted, notes above it are transposed down by
/// octaves, and notes shorter than the minimum duration are deleted. The
/// constraints are re-applied until the note list is stable, which makes the
/// operation idempotent.
pub fn post_process(mut notes: Vec<NoteEvent>, params: &PostProcessParams) -> Vec<NoteEvent> {
    loop {
        notes.retain(|n| n.duration_s >= params.min_note_s);
        if notes.is_empty() {
            return notes;
        }
        let median = median_midi(&notes);
        let mut changed = false;
        notes.retain(|n| {
            let keep = (n.midi as f64) >= median - params.pitch_range_semitones;
            changed |= !keep;
            keep
        });
        for n in &mut notes {
            while (n.midi as f64) > median + params.pitch_range_semitones {
                n.midi -= 12;
                changed = true;
            }
        }
        if !changed {
            notes.sort_by(|a, b| a.onset_s.partial_cmp(&b.onset_s).unwrap());
            return notes;
        }
    }
}

/// Labels each segment with a MIDI pitch. Does not post-process.
pub fn label_segments<T: Scalar>(
    segments: &[ContourSpan],
    cents: &CentContour<T>,
    global: &[T; NUM_PITCH_CLASSES],
    frame_rate_hz: f64,
) -> Vec<NoteEvent> {
    segments
        .iter()
        .map(|seg| {
            let local = local_pitch_probability(cents.span_cents(seg));
            NoteEvent {
                onset_s: seg.start as f64 / frame_rate_hz,
                duration_s: seg.len() as f64 / frame_rate_hz,
                midi: assign_pitch(&local, global),
            }
        })
        .collect()
}

/// Full note transcription of the segments: labelling plus post-processing.
pub fn transcribe_segments<T: Scalar>(
    segments: &[ContourSpan],
    cents: &CentContour<T>,
    global: &[T; NUM_PITCH_CLASSES],
    frame_rate_hz: f64,
    params: &PostProcessParams,
) -> Vec<NoteEvent> {
    post_process(label_segments(segments, cents, global, frame_rate_hz), params)
}
