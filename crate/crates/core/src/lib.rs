//! Note-level transcription of ornamented singing from polyphonic
//! recordings.
//!
//! The pipeline extracts the predominant melody from the channel where the
//! voice dominates, removes accompaniment contours with a track-level
//! Gaussian vocal classifier over bark-band energies, splits the remaining
//! contours at onsets found by four independent detectors, and labels each
//! segment with a quantised MIDI pitch from combined local and global pitch
//! statistics. An evaluation module scores transcriptions against reference
//! annotations with the usual voicing/onset/note metrics.
//!
//! All signal-domain math is generic over the [`Scalar`] sample type
//! (`f32` or `f64`); the `*64` aliases below name the double-precision
//! instantiations the command-line tools use.
//!
//! ```no_run
//! use melisma::pipeline::{transcribe_track, PipelineConfig, TrackSource};
//!
//! let source = TrackSource::Audio("performance.wav".into());
//! let (notes, diagnostics) =
//!     transcribe_track::<f64>(&source, &PipelineConfig::default())?;
//! for note in &notes {
//!     println!("{:.3}s +{:.3}s midi {}", note.onset_s, note.duration_s, note.midi);
//! }
//! # Ok::<(), melisma::Error>(())
//! ```

pub mod audio;
pub mod error;
pub mod eval;
pub mod io;
pub mod labelling;
pub mod melody;
pub mod pipeline;
pub mod scalar;
pub mod segmentation;
pub mod spectral;
pub mod vocal;

pub use audio::{AudioClip, FrameGrid};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use labelling::NoteEvent;
pub use melody::{ContourSpan, PitchContour};
pub use pipeline::{Diagnostics, PipelineConfig, TrackSource};
pub use scalar::Scalar;
pub use segmentation::CentContour;

/// Double-precision instantiations used by the CLI.
pub type AudioClip64 = AudioClip<f64>;
pub type PitchContour64 = PitchContour<f64>;
pub type CentContour64 = CentContour<f64>;
