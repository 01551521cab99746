//! Shared helpers for the integration suites.
//!
//! Each integration test target compiles this module separately and uses a
//! different subset of it.
#![allow(dead_code)]

pub mod oracles;
pub mod synth;

use std::path::Path;

use melisma::AudioClip;

pub const SAMPLE_RATE: u32 = 44_100;
pub const FRAME_RATE: f64 = 44_100.0 / 128.0;

/// Writes a clip as 16-bit PCM WAV.
pub fn write_wav(path: &Path, clip: &AudioClip<f64>) {
    let spec = hound::WavSpec {
        channels: clip.num_channels() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).unwrap();
    for i in 0..clip.num_samples() {
        for ch in 0..clip.num_channels() {
            let s = (clip.channel(ch)[i] * 32767.0).clamp(-32768.0, 32767.0);
            writer.write_sample(s.round() as i16).unwrap();
        }
    }
    writer.finalize().unwrap();
}
