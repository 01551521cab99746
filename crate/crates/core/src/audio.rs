//! Audio input and frame iteration.
//!
//! Decodes RIFF/WAV files (16/24-bit PCM or 32-bit float, one or two
//! channels) into normalised sample buffers and defines the frame grids all
//! feature extractors share.

use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The only sample rate the analysis constants are valid for.
pub const REQUIRED_SAMPLE_RATE: u32 = 44_100;

pub const MAX_CHANNELS: usize = 2;

/// Multi-channel audio with samples in `[-1, 1]`.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct AudioClip<T> {
    channels: Vec<Vec<T>>,
    sample_rate: u32,
}

impl<T: Scalar> AudioClip<T> {
    /// Wraps raw channel buffers. All channels must have equal length and
    /// there must be one or two of them.
    pub fn new(channels: Vec<Vec<T>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() || channels.len() > MAX_CHANNELS {
            return Err(Error::InvalidClip(format!(
                "expected 1..={} channels, got {}",
                MAX_CHANNELS,
                channels.len()
            )));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidClip("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidClip("channel lengths differ".into()));
        }
        Ok(AudioClip {
            channels,
            sample_rate,
        })
    }

    /// Loads a WAV file. Integer PCM is normalised by `2^(bits-1)`; the
    /// sample rate must be 44100 Hz (no resampling).
    pub fn from_wav(path: &Path) -> Result<Self> {
        let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
        let spec = reader.spec();
        if spec.sample_rate != REQUIRED_SAMPLE_RATE {
            return Err(Error::UnsupportedSampleRate {
                got: spec.sample_rate,
                expected: REQUIRED_SAMPLE_RATE,
            });
        }
        let num_channels = spec.channels as usize;
        if num_channels == 0 || num_channels > MAX_CHANNELS {
            return Err(Error::UnsupportedAudio {
                path: path.to_path_buf(),
                reason: format!("expected 1..={MAX_CHANNELS} channels, got {num_channels}"),
            });
        }

        let interleaved: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
            (hound::SampleFormat::Int, 16) => {
                let scale = T::of(1.0 / (1u32 << 15) as f64);
                collect_samples::<i16, _>(reader, path, |s| T::of(s as f64) * scale)?
            }
            (hound::SampleFormat::Int, 24) => {
                let scale = T::of(1.0 / (1u32 << 23) as f64);
                collect_samples::<i32, _>(reader, path, |s| T::of(s as f64) * scale)?
            }
            (hound::SampleFormat::Float, 32) => {
                collect_samples::<f32, _>(reader, path, |s| T::of(s as f64))?
            }
            (format, bits) => {
                return Err(Error::UnsupportedAudio {
                    path: path.to_path_buf(),
                    reason: format!("unsupported encoding: {bits}-bit {format:?}"),
                });
            }
        };

        let mut channels = vec![Vec::with_capacity(interleaved.len() / num_channels); num_channels];
        for (i, s) in interleaved.into_iter().enumerate() {
            channels[i % num_channels].push(s);
        }
        // Drop a trailing partial frame, should the file carry one.
        let len = channels.iter().map(Vec::len).min().unwrap_or(0);
        for c in &mut channels {
            c.truncate(len);
        }
        AudioClip::new(channels, spec.sample_rate)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channel(&self, index: usize) -> &[T] {
        &self.channels[index]
    }

    pub fn duration_s(&self) -> f64 {
        self.num_samples() as f64 / self.sample_rate as f64
    }
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

fn collect_samples<S, T>(
    reader: hound::WavReader<std::io::BufReader<std::fs::File>>,
    path: &Path,
    convert: impl Fn(S) -> T,
) -> Result<Vec<T>>
where
    S: hound::Sample,
{
    reader
        .into_samples::<S>()
        .map(|s| s.map(&convert).map_err(|e| wav_error(path, e)))
        .collect()
}

/// Analysis frame layout: window length, hop, and FFT zero-padding factor.
///
/// Frame `n` covers samples `[n*hop, n*hop + window)` and is stamped with the
/// time of its first sample, `n*hop/fs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGrid {
    pub window_size: usize,
    pub hop_size: usize,
    pub zero_pad: usize,
}

impl FrameGrid {
    pub const fn new(window_size: usize, hop_size: usize, zero_pad: usize) -> Self {
        FrameGrid {
            window_size,
            hop_size,
            zero_pad,
        }
    }

    /// FFT length after zero padding.
    pub fn fft_len(&self) -> usize {
        self.window_size * self.zero_pad
    }

    /// Number of whole windows that fit: `floor((n - window)/hop) + 1`, zero
    /// for signals shorter than one window.
    pub fn num_frames(&self, num_samples: usize) -> usize {
        if num_samples < self.window_size {
            0
        } else {
            (num_samples - self.window_size) / self.hop_size + 1
        }
    }

    pub fn frame_start(&self, frame: usize) -> usize {
        frame * self.hop_size
    }

    pub fn frame_time(&self, frame: usize, sample_rate: u32) -> f64 {
        (frame * self.hop_size) as f64 / sample_rate as f64
    }

    /// Frames per second.
    pub fn frame_rate(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.hop_size as f64
    }

    /// Bin index whose centre frequency is closest to `freq_hz`:
    /// `round(f * m * N / fs)`.
    pub fn bin_of_freq(&self, freq_hz: f64, sample_rate: u32) -> usize {
        (freq_hz * self.fft_len() as f64 / sample_rate as f64).round() as usize
    }

    /// Centre frequency of FFT bin `k`.
    pub fn bin_freq_hz(&self, bin: usize, sample_rate: u32) -> f64 {
        bin as f64 * sample_rate as f64 / self.fft_len() as f64
    }

    /// Bins whose centre frequency lies strictly inside `(lo_hz, hi_hz)`.
    pub fn band_bins(&self, lo_hz: f64, hi_hz: f64, sample_rate: u32) -> Range<usize> {
        let hz_per_bin = sample_rate as f64 / self.fft_len() as f64;
        // Smallest k with k*hz_per_bin > lo, largest with k*hz_per_bin < hi.
        let mut first = (lo_hz / hz_per_bin).floor() as usize + 1;
        let last_excl = ((hi_hz / hz_per_bin).ceil() as usize).min(self.fft_len() / 2 + 1);
        if first > last_excl {
            first = last_excl;
        }
        first..last_excl
    }
}

/// Periodic Hann window of length `n`.
pub fn hann<T: Scalar>(n: usize) -> Vec<T> {
    let step = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|i| T::of(0.5 - 0.5 * (step * i as f64).cos()))
        .collect()
}

/// Iterator over Hann-windowed, zero-padded analysis frames.
pub fn windowed_frames<'a, T: Scalar>(
    samples: &'a [T],
    grid: &FrameGrid,
) -> impl Iterator<Item = Vec<T>> + 'a {
    let grid = *grid;
    let window = hann::<T>(grid.window_size);
    let frames = grid.num_frames(samples.len());
    (0..frames).map(move |n| {
        let start = grid.frame_start(n);
        let mut frame = vec![T::zero(); grid.fft_len()];
        for (i, (s, w)) in samples[start..start + grid.window_size]
            .iter()
            .zip(&window)
            .enumerate()
        {
            frame[i] = *s * *w;
        }
        frame
    })
}

/// Iterator over raw (unwindowed) frames, used by the RMS extractor.
pub fn raw_frames<'a, T: Scalar>(
    samples: &'a [T],
    grid: &FrameGrid,
) -> impl Iterator<Item = &'a [T]> + 'a {
    let grid = *grid;
    (0..grid.num_frames(samples.len()))
        .map(move |n| &samples[grid.frame_start(n)..grid.frame_start(n) + grid.window_size])
}
