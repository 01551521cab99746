//! Frame-level spectral features: spectral band ratio (channel selection),
//! bark-band energies, RMS, and chroma vectors.
//!
//! Each feature stream has its own frame grid. Band membership of an FFT bin
//! is decided on its centre frequency, strictly inside the band edges.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::audio::{hann, raw_frames, AudioClip, FrameGrid};
use crate::scalar::Scalar;

/// Grid for the spectral band ratio used in channel selection.
pub const BAND_RATIO_GRID: FrameGrid = FrameGrid::new(4096, 1024, 2);

/// Grid for the bark-band energies feeding the vocal classifier.
pub const BARK_GRID: FrameGrid = FrameGrid::new(1024, 128, 1);

/// Grid for the RMS track feeding the volume-decay onset detector.
pub const RMS_GRID: FrameGrid = FrameGrid::new(4096, 128, 1);

/// Band-ratio bands in Hz: summed magnitudes `upper / lower`.
pub const UPPER_BAND_HZ: (f64, f64) = (500.0, 6000.0);
pub const LOWER_BAND_HZ: (f64, f64) = (80.0, 400.0);

pub const NUM_BARK_BANDS: usize = 12;

/// Edges of the lowest 12 bark bands; band `m` spans
/// `(BARK_BAND_EDGES_HZ[m], BARK_BAND_EDGES_HZ[m+1])`.
pub const BARK_BAND_EDGES_HZ: [f64; 13] = [
    0.0, 50.0, 100.0, 150.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0,
];

pub const NUM_PITCH_CLASSES: usize = 12;

/// Chroma extraction parameters. The analysis range and grid are not fixed by
/// the method; these defaults cover the vocal fundamental plus low harmonics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaParams {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub grid: FrameGrid,
}

impl Default for ChromaParams {
    fn default() -> Self {
        ChromaParams {
            fmin_hz: 80.0,
            fmax_hz: 5000.0,
            grid: FrameGrid::new(4096, 1024, 2),
        }
    }
}

/// Streaming STFT: windows, zero-pads and transforms one frame at a time,
/// handing the caller a reused magnitude buffer (bins `0..=fft_len/2`).
pub(crate) struct Stft<T: Scalar> {
    grid: FrameGrid,
    window: Vec<T>,
    fft: Arc<dyn Fft<T>>,
    buf: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    mags: Vec<T>,
}

impl<T: Scalar> Stft<T> {
    pub(crate) fn new(grid: FrameGrid) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(grid.fft_len());
        let scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        Stft {
            grid,
            window: hann(grid.window_size),
            buf: vec![Complex::new(T::zero(), T::zero()); grid.fft_len()],
            mags: vec![T::zero(); grid.fft_len() / 2 + 1],
            fft,
            scratch,
        }
    }

    pub(crate) fn run(&mut self, samples: &[T], mut each: impl FnMut(usize, &[T])) {
        for n in 0..self.grid.num_frames(samples.len()) {
            let start = self.grid.frame_start(n);
            for (i, slot) in self.buf.iter_mut().enumerate() {
                *slot = if i < self.grid.window_size {
                    Complex::new(samples[start + i] * self.window[i], T::zero())
                } else {
                    Complex::new(T::zero(), T::zero())
                };
            }
            self.fft
                .process_with_scratch(&mut self.buf, &mut self.scratch);
            for (m, c) in self.mags.iter_mut().zip(&self.buf) {
                *m = c.norm();
            }
            each(n, &self.mags);
        }
    }
}

/// Spectral band ratio track with per-frame silence flags.
#[derive(Debug, Clone)]
pub struct BandRatioTrack<T> {
    /// `S[n]` in dB; 0 for silent frames.
    pub s_db: Vec<T>,
    /// Frames whose ratio is undefined (all-zero spectrum or an empty band).
    pub silent: Vec<bool>,
}

/// Band ratio of a single magnitude spectrum: the spectrum is normalised by
/// its maximum, magnitudes are summed over the upper and lower bands, and the
/// ratio is mapped to dB. Returns `(s_db, silent)`.
pub fn band_ratio_of_spectrum<T: Scalar>(
    mags: &[T],
    grid: &FrameGrid,
    sample_rate: u32,
) -> (T, bool) {
    let peak = mags.iter().cloned().fold(T::zero(), T::max);
    if peak <= T::zero() {
        return (T::zero(), true);
    }
    let sum_band = |(lo, hi): (f64, f64)| -> T {
        grid.band_bins(lo, hi, sample_rate)
            .map(|k| mags[k] / peak)
            .sum()
    };
    let upper = sum_band(UPPER_BAND_HZ);
    let lower = sum_band(LOWER_BAND_HZ);
    if upper <= T::zero() || lower <= T::zero() {
        return (T::zero(), true);
    }
    (T::of(20.0) * (upper / lower).log10(), false)
}

/// `S[n]` over one channel on the band-ratio grid.
pub fn spectral_band_ratio<T: Scalar>(clip: &AudioClip<T>, channel: usize) -> BandRatioTrack<T> {
    let grid = BAND_RATIO_GRID;
    let samples = clip.channel(channel);
    let mut track = BandRatioTrack {
        s_db: Vec::with_capacity(grid.num_frames(samples.len())),
        silent: Vec::with_capacity(grid.num_frames(samples.len())),
    };
    let mut stft = Stft::new(grid);
    stft.run(samples, |_, mags| {
        let (s, silent) = band_ratio_of_spectrum(mags, &grid, clip.sample_rate());
        track.s_db.push(s);
        track.silent.push(silent);
    });
    track
}

/// Track-mean band ratio over non-silent frames; `None` if every frame is
/// silent.
pub fn mean_band_ratio<T: Scalar>(track: &BandRatioTrack<T>) -> Option<T> {
    let mut sum = T::zero();
    let mut count = 0usize;
    for (s, silent) in track.s_db.iter().zip(&track.silent) {
        if !silent {
            sum = sum + *s;
            count += 1;
        }
    }
    (count > 0).then(|| sum / T::of(count as f64))
}

/// Picks the channel with the higher average band ratio, i.e. the one where
/// the voice is more dominant. Mono clips and ties resolve to channel 0.
pub fn select_channel<T: Scalar>(clip: &AudioClip<T>) -> usize {
    if clip.num_channels() < 2 {
        return 0;
    }
    let mut best = 0usize;
    let mut best_mean = f64::NEG_INFINITY;
    for ch in 0..clip.num_channels() {
        let mean = mean_band_ratio(&spectral_band_ratio(clip, ch))
            .map(Scalar::to_f64_lossy)
            .unwrap_or(f64::NEG_INFINITY);
        if mean > best_mean {
            best_mean = mean;
            best = ch;
        }
    }
    best
}

/// Energies of one magnitude spectrum in the 12 bark bands.
pub fn bark_of_spectrum<T: Scalar>(
    mags: &[T],
    grid: &FrameGrid,
    sample_rate: u32,
) -> [T; NUM_BARK_BANDS] {
    let mut bands = [T::zero(); NUM_BARK_BANDS];
    for (m, band) in bands.iter_mut().enumerate() {
        let lo = BARK_BAND_EDGES_HZ[m];
        let hi = BARK_BAND_EDGES_HZ[m + 1];
        *band = grid
            .band_bins(lo, hi, sample_rate)
            .map(|k| mags[k] * mags[k])
            .sum();
    }
    bands
}

/// Per-frame bark-band energy vectors on the bark grid.
pub fn bark_energies<T: Scalar>(clip: &AudioClip<T>, channel: usize) -> Vec<[T; NUM_BARK_BANDS]> {
    let grid = BARK_GRID;
    let samples = clip.channel(channel);
    let mut out = Vec::with_capacity(grid.num_frames(samples.len()));
    let mut stft = Stft::new(grid);
    stft.run(samples, |_, mags| {
        out.push(bark_of_spectrum(mags, &grid, clip.sample_rate()));
    });
    out
}

/// Root-mean-square per frame over unwindowed frames on the RMS grid.
pub fn rms_track<T: Scalar>(clip: &AudioClip<T>, channel: usize) -> Vec<T> {
    let n = T::of(RMS_GRID.window_size as f64);
    raw_frames(clip.channel(channel), &RMS_GRID)
        .map(|frame| {
            let energy: T = frame.iter().map(|&s| s * s).sum();
            (energy / n).sqrt()
        })
        .collect()
}

/// Chroma vector of one magnitude spectrum: every bin inside the analysis
/// range is quantised to its nearest semitone relative to `tuning_ref_hz` and
/// magnitudes accumulate into 12 pitch classes. Class 0 is the class of A.
pub fn chroma_of_spectrum<T: Scalar>(
    mags: &[T],
    grid: &FrameGrid,
    sample_rate: u32,
    tuning_ref_hz: f64,
    params: &ChromaParams,
) -> [T; NUM_PITCH_CLASSES] {
    let mut chroma = [T::zero(); NUM_PITCH_CLASSES];
    for k in grid.band_bins(params.fmin_hz, params.fmax_hz, sample_rate) {
        let f = grid.bin_freq_hz(k, sample_rate);
        let semitone = (12.0 * (f / tuning_ref_hz).log2()).round() as i64;
        let class = semitone.rem_euclid(12) as usize;
        chroma[class] = chroma[class] + mags[k];
    }
    chroma
}

/// Per-frame chroma vectors. `tuning_ref_hz` is the estimated A4.
pub fn chroma_track<T: Scalar>(
    clip: &AudioClip<T>,
    channel: usize,
    tuning_ref_hz: f64,
    params: &ChromaParams,
) -> Vec<[T; NUM_PITCH_CLASSES]> {
    let samples = clip.channel(channel);
    let mut out = Vec::with_capacity(params.grid.num_frames(samples.len()));
    let mut stft = Stft::new(params.grid);
    stft.run(samples, |_, mags| {
        out.push(chroma_of_spectrum(
            mags,
            &params.grid,
            clip.sample_rate(),
            tuning_ref_hz,
            params,
        ));
    });
    out
}
