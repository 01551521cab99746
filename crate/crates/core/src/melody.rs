//! Predominant-melody extraction.
//!
//! Produces the frame-synchronous vocal pitch contour, either from the
//! built-in salience extractor or from an externally computed contour file.
//! The built-in extractor is a deliberately simple stand-in: per-frame
//! harmonic summation over a 10-cent candidate grid, frame-to-frame linking,
//! and a relative salience threshold over linked groups. Feeding a contour
//! computed by a dedicated melody tracker is the higher-fidelity path.

use std::path::Path;

use crate::audio::{AudioClip, FrameGrid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::Stft;

/// Timing grid of the pitch contour (window 4096, hop 128).
pub const CONTOUR_GRID: FrameGrid = FrameGrid::new(4096, 128, 1);

/// Fundamental-frequency search range of the extractor.
pub const F0_MIN_HZ: f64 = 120.0;
pub const F0_MAX_HZ: f64 = 720.0;

/// Maximal run of consecutive voiced frames, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContourSpan {
    pub start: usize,
    pub end: usize,
}

impl ContourSpan {
    /// Number of frames in the span; never zero.
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    pub fn contains(&self, frame: usize) -> bool {
        frame >= self.start && frame <= self.end
    }
}

/// Frame-synchronous fundamental frequency in Hz, 0 marking non-melody
/// frames, partitioned into voiced contours.
#[derive(Debug, Clone)]
pub struct PitchContour<T> {
    f0: Vec<T>,
    contours: Vec<ContourSpan>,
    grid: FrameGrid,
}

impl<T: Scalar> PitchContour<T> {
    /// Builds the contour list (maximal nonzero runs) from a raw f0 sequence.
    pub fn from_f0(f0: Vec<T>, grid: FrameGrid) -> Self {
        let contours = rebuild_contours(&f0);
        PitchContour { f0, contours, grid }
    }

    pub fn f0(&self) -> &[T] {
        &self.f0
    }

    pub fn contours(&self) -> &[ContourSpan] {
        &self.contours
    }

    pub fn grid(&self) -> FrameGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn is_voiced(&self, frame: usize) -> bool {
        frame < self.f0.len() && self.f0[frame] > T::zero()
    }

    pub fn voiced_frames(&self) -> usize {
        self.contours.iter().map(ContourSpan::len).sum()
    }
}

/// Maximal runs of nonzero frames, in order.
pub fn rebuild_contours<T: Scalar>(f0: &[T]) -> Vec<ContourSpan> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, &f) in f0.iter().enumerate() {
        if f > T::zero() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            spans.push(ContourSpan { start: s, end: i - 1 });
        }
    }
    if let Some(s) = start {
        spans.push(ContourSpan {
            start: s,
            end: f0.len() - 1,
        });
    }
    spans
}

/// Parameters of the built-in salience extractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SalienceParams {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Candidate grid resolution in cents.
    pub cents_per_candidate: f64,
    pub num_harmonics: usize,
    /// Weight of harmonic `i` (1-based) is `harmonic_decay^(i-1)`.
    pub harmonic_decay: f64,
    /// Adjacent frames link into one group when their pitches differ by at
    /// most this many cents.
    pub link_cents: f64,
    /// A frame only counts as a pitch candidate when the magnitude at the
    /// candidate fundamental reaches this fraction of the frame's spectral
    /// peak. Rejects frames whose true fundamental lies outside the search
    /// range.
    pub min_peak_rel: f64,
    /// Continuity window: while a nearby candidate (within this many cents
    /// of the previous frame's pitch) exists, a jump elsewhere is only taken
    /// when its salience beats the nearby best by `jump_salience_ratio`.
    /// Suppresses within-window vibrato smear without blocking real note
    /// changes.
    pub continuity_cents: f64,
    pub jump_salience_ratio: f64,
    /// Analysis grid of the extractor (the contour keeps [`CONTOUR_GRID`]
    /// timing either way).
    pub grid: FrameGrid,
}

impl Default for SalienceParams {
    fn default() -> Self {
        SalienceParams {
            f_min_hz: F0_MIN_HZ,
            f_max_hz: F0_MAX_HZ,
            cents_per_candidate: 10.0,
            num_harmonics: 8,
            harmonic_decay: 0.8,
            link_cents: 80.0,
            min_peak_rel: 0.1,
            continuity_cents: 60.0,
            jump_salience_ratio: 1.3,
            grid: FrameGrid::new(4096, 128, 2),
        }
    }
}

/// Extracts the predominant melody from one channel.
///
/// `tau_v` is the voicing tolerance: linked groups whose mean salience falls
/// below `mean - tau_v * stddev` of the global frame salience distribution
/// are discarded, so larger values retain more of the contour.
pub fn extract_predominant<T: Scalar>(
    clip: &AudioClip<T>,
    channel: usize,
    tau_v: f64,
    params: &SalienceParams,
) -> PitchContour<T> {
    let grid = params.grid;
    let sample_rate = clip.sample_rate();
    let num_frames = grid.num_frames(clip.channel(channel).len());

    // Candidate fundamentals on a logarithmic grid, with per-harmonic bin
    // lookups resolved once.
    let mut candidates: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut c = 0usize;
    loop {
        let f = params.f_min_hz * 2f64.powf(c as f64 * params.cents_per_candidate / 1200.0);
        if f > params.f_max_hz {
            break;
        }
        let nyquist = sample_rate as f64 / 2.0;
        let bins = (1..=params.num_harmonics)
            .map(|h| h as f64 * f)
            .take_while(|&hf| hf < nyquist)
            .map(|hf| grid.bin_of_freq(hf, sample_rate))
            .collect();
        candidates.push((f, bins));
        c += 1;
    }
    let weights: Vec<f64> = (0..params.num_harmonics)
        .map(|i| params.harmonic_decay.powi(i as i32))
        .collect();

    // Per-frame peak picking with a continuity preference: the analysis
    // window smears vibrato over up to a semitone, so the raw argmax can
    // wander inside the smear. Stay near the previous pitch unless a jump
    // is clearly more salient.
    let mut peak_f0 = vec![0f64; num_frames];
    let mut peak_salience = vec![0f64; num_frames];
    let mut prev_f0 = 0f64;
    let mut stft = Stft::new(grid);
    stft.run(clip.channel(channel), |n, mags| {
        let frame_peak = mags
            .iter()
            .map(|m| m.to_f64_lossy())
            .fold(0f64, f64::max);
        if frame_peak <= 0.0 {
            prev_f0 = 0.0;
            return;
        }
        let mut global = (0f64, 0f64); // (salience, f0)
        let mut near = (0f64, 0f64);
        for (f, bins) in &candidates {
            let salience: f64 = bins
                .iter()
                .zip(&weights)
                .map(|(&k, &w)| w * mags[k].to_f64_lossy())
                .sum();
            if salience > global.0 {
                global = (salience, *f);
            }
            if prev_f0 > 0.0
                && (1200.0 * (f / prev_f0).log2()).abs() <= params.continuity_cents
                && salience > near.0
            {
                near = (salience, *f);
            }
        }
        let (salience, f0) = if near.0 > 0.0 && global.0 < params.jump_salience_ratio * near.0 {
            near
        } else {
            global
        };
        if salience <= 0.0 {
            prev_f0 = 0.0;
            return;
        }
        let fundamental = mags[grid.bin_of_freq(f0, sample_rate)].to_f64_lossy();
        if fundamental >= params.min_peak_rel * frame_peak {
            peak_f0[n] = f0;
            peak_salience[n] = salience;
            prev_f0 = f0;
        } else {
            prev_f0 = 0.0;
        }
    });

    // Link voiced frames into groups of continuous pitch.
    let mut groups: Vec<ContourSpan> = Vec::new();
    let mut start = None;
    for n in 0..num_frames {
        if peak_f0[n] <= 0.0 {
            if let Some(s) = start.take() {
                groups.push(ContourSpan { start: s, end: n - 1 });
            }
            continue;
        }
        if let Some(s) = start {
            let jump = 1200.0 * (peak_f0[n] / peak_f0[n - 1]).log2();
            if jump.abs() > params.link_cents {
                groups.push(ContourSpan { start: s, end: n - 1 });
                start = Some(n);
            }
        } else {
            start = Some(n);
        }
    }
    if let Some(s) = start {
        groups.push(ContourSpan {
            start: s,
            end: num_frames - 1,
        });
    }

    // Relative salience filter over the linked groups.
    let voiced: Vec<f64> = peak_salience.iter().cloned().filter(|&s| s > 0.0).collect();
    if !voiced.is_empty() {
        let mean = voiced.iter().sum::<f64>() / voiced.len() as f64;
        let var = voiced.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / voiced.len() as f64;
        let threshold = mean - tau_v * var.sqrt();
        for g in &groups {
            let group_mean: f64 =
                g.frames().map(|n| peak_salience[n]).sum::<f64>() / g.len() as f64;
            if group_mean < threshold {
                for n in g.frames() {
                    peak_f0[n] = 0.0;
                }
            }
        }
    }

    let f0 = peak_f0.into_iter().map(T::of).collect();
    PitchContour::from_f0(f0, CONTOUR_GRID)
}

/// Loads a `time_s,f0_hz` CSV (header optional) and resamples it onto `grid`
/// by nearest-frame assignment. Negative or non-finite values map to
/// unvoiced.
pub fn load_contour<T: Scalar>(path: &Path, grid: FrameGrid) -> Result<PitchContour<T>> {
    let err = |reason: String| Error::ContourFormat {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let time = fields.next().and_then(|v| v.parse::<f64>().ok());
        let f0 = fields.next().and_then(|v| v.parse::<f64>().ok());
        match (time, f0) {
            (Some(t), Some(f)) => rows.push((t, f)),
            _ if lineno == 0 => continue, // header
            _ => return Err(err(format!("line {}: expected time_s,f0_hz", lineno + 1))),
        }
    }
    if rows.is_empty() {
        return Err(err("no contour rows".into()));
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(err("non-monotonic timestamps".into()));
    }

    let frame_dur = grid.hop_size as f64 / crate::audio::REQUIRED_SAMPLE_RATE as f64;
    if rows.len() > 1 {
        let spacing = (rows.last().unwrap().0 - rows[0].0) / (rows.len() - 1) as f64;
        if (spacing - frame_dur).abs() > 0.1 * frame_dur {
            return Err(err(format!(
                "row spacing {spacing:.6} s differs from the frame hop {frame_dur:.6} s by more than 10%"
            )));
        }
    }

    let num_frames = (rows.last().unwrap().0 / frame_dur).round() as usize + 1;
    let mut f0 = vec![T::zero(); num_frames];
    for n in 0..num_frames {
        let t = n as f64 * frame_dur;
        let i = match rows.binary_search_by(|r| r.0.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => {
                // Nearest of the neighbours.
                if i == 0 {
                    0
                } else if i == rows.len() {
                    rows.len() - 1
                } else if t - rows[i - 1].0 <= rows[i].0 - t {
                    i - 1
                } else {
                    i
                }
            }
        };
        let v = rows[i].1;
        if v.is_finite() && v > 0.0 {
            f0[n] = T::of(v);
        }
    }
    Ok(PitchContour::from_f0(f0, grid))
}
