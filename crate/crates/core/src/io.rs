//! File formats: note CSV, batch manifest, evaluation report CSV, optional
//! debug dumps, and Standard MIDI File export.
//!
//! All writers format floats with fixed precision so identical inputs
//! produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, REPORT_FIELDS};
use crate::labelling::NoteEvent;
use crate::scalar::Scalar;
use crate::segmentation::Onset;
use crate::spectral::{NUM_BARK_BANDS, NUM_PITCH_CLASSES};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, reason: String) -> Error {
    Error::CsvFormat {
        path: path.to_path_buf(),
        reason,
    }
}

/// Writes `onset_s,duration_s,midi` with six-decimal seconds.
pub fn write_notes_csv(path: &Path, notes: &[NoteEvent]) -> Result<()> {
    let mut out = String::from("onset_s,duration_s,midi\n");
    for n in notes {
        out.push_str(&format!(
            "{:.6},{:.6},{}\n",
            n.onset_s, n.duration_s, n.midi
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Reads a note CSV (transcription output or ground truth; same schema,
/// header optional).
pub fn read_notes_csv(path: &Path) -> Result<Vec<NoteEvent>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut notes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(csv_err(
                path,
                format!("line {}: expected onset_s,duration_s,midi", lineno + 1),
            ));
        }
        let parsed = (
            fields[0].parse::<f64>(),
            fields[1].parse::<f64>(),
            fields[2].parse::<i32>(),
        );
        match parsed {
            (Ok(onset_s), Ok(duration_s), Ok(midi)) => notes.push(NoteEvent {
                onset_s,
                duration_s,
                midi,
            }),
            _ if lineno == 0 => continue, // header
            _ => {
                return Err(csv_err(
                    path,
                    format!("line {}: expected onset_s,duration_s,midi", lineno + 1),
                ))
            }
        }
    }
    Ok(notes)
}

/// One row of a batch manifest: `audio_path,gt_path[,contour_path]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub audio: PathBuf,
    pub gt: PathBuf,
    pub contour: Option<PathBuf>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.starts_with("audio_path") {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(csv_err(
                path,
                format!("line {}: expected audio_path,gt_path[,contour_path]", lineno + 1),
            ));
        }
        entries.push(ManifestEntry {
            audio: PathBuf::from(fields[0]),
            gt: PathBuf::from(fields[1]),
            contour: fields
                .get(2)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from),
        });
    }
    Ok(entries)
}

/// Writes per-track evaluation rows plus an unweighted dataset-mean row.
pub fn write_report_csv(path: &Path, rows: &[(String, EvalReport)]) -> Result<()> {
    let mut out = String::from("track");
    for f in REPORT_FIELDS {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');

    let mut sums = [0.0f64; 11];
    for (track, report) in rows {
        out.push_str(track);
        for (i, v) in report.values().iter().enumerate() {
            sums[i] += v;
            out.push_str(&format!(",{v:.6}"));
        }
        out.push('\n');
    }
    if !rows.is_empty() {
        out.push_str("dataset_mean");
        for s in sums {
            out.push_str(&format!(",{:.6}", s / rows.len() as f64));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

const TICKS_PER_QUARTER: u16 = 480;
const TEMPO_BPM: u32 = 120;
const VELOCITY: u8 = 80;

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut bytes = vec![(value & 0x7f) as u8];
    value >>= 7;
    while value > 0 {
        bytes.push(0x80 | (value & 0x7f) as u8);
        value >>= 7;
    }
    bytes.reverse();
    out.extend(bytes);
}

/// Writes a single-track (format 0) Standard MIDI File at a fixed tempo of
/// 120 bpm, notes at their absolute times with velocity 80.
pub fn write_midi(path: &Path, notes: &[NoteEvent]) -> Result<()> {
    // 480 ticks per quarter at 120 bpm = 960 ticks per second.
    let ticks_per_s = TICKS_PER_QUARTER as f64 * TEMPO_BPM as f64 / 60.0;
    let mut events: Vec<(u32, bool, u8)> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        let pitch = n.midi.clamp(0, 127) as u8;
        let on = (n.onset_s * ticks_per_s).round() as u32;
        let off = ((n.onset_s + n.duration_s) * ticks_per_s).round() as u32;
        events.push((on, true, pitch));
        events.push((off.max(on + 1), false, pitch));
    }
    // Note-offs precede note-ons at the same tick.
    events.sort_by_key(|&(tick, is_on, pitch)| (tick, is_on, pitch));

    let mut track = Vec::new();
    // Tempo meta event at tick 0.
    let us_per_quarter: u32 = 60_000_000 / TEMPO_BPM;
    track.extend([0x00, 0xff, 0x51, 0x03]);
    track.extend(&us_per_quarter.to_be_bytes()[1..]);

    let mut cursor = 0u32;
    for (tick, is_on, pitch) in events {
        push_vlq(&mut track, tick - cursor);
        cursor = tick;
        track.push(if is_on { 0x90 } else { 0x80 });
        track.push(pitch);
        track.push(if is_on { VELOCITY } else { 0 });
    }
    track.extend([0x00, 0xff, 0x2f, 0x00]); // end of track

    let mut file = Vec::new();
    file.extend(b"MThd");
    file.extend(6u32.to_be_bytes());
    file.extend(0u16.to_be_bytes()); // format 0
    file.extend(1u16.to_be_bytes()); // one track
    file.extend(TICKS_PER_QUARTER.to_be_bytes());
    file.extend(b"MTrk");
    file.extend((track.len() as u32).to_be_bytes());
    file.extend(track);

    std::fs::write(path, file).map_err(io_err(path))
}

/// Per-frame feature dump on the contour grid (hop 128): `time_s`, band
/// ratio, bark energies, RMS and chroma. Streams sampled on coarser grids
/// repeat the value of the nearest frame.
#[allow(clippy::too_many_arguments)]
pub fn write_feature_dump<T: Scalar>(
    path: &Path,
    frame_rate_hz: f64,
    s_db: &[T],
    s_hop_ratio: usize,
    bark: &[[T; NUM_BARK_BANDS]],
    rms: &[T],
    chroma: &[[T; NUM_PITCH_CLASSES]],
    chroma_hop_ratio: usize,
) -> Result<()> {
    let mut out = String::from("time_s,S");
    for b in 1..=NUM_BARK_BANDS {
        out.push_str(&format!(",B{b}"));
    }
    out.push_str(",rms");
    for c in 0..NUM_PITCH_CLASSES {
        out.push_str(&format!(",chroma{c}"));
    }
    out.push('\n');

    let frames = bark.len().min(rms.len());
    for n in 0..frames {
        let s = s_db
            .get((n / s_hop_ratio).min(s_db.len().saturating_sub(1)))
            .copied()
            .unwrap_or_else(T::zero);
        out.push_str(&format!("{:.6},{:.6}", n as f64 / frame_rate_hz, s));
        for b in bark[n] {
            out.push_str(&format!(",{b:.6}"));
        }
        out.push_str(&format!(",{:.6}", rms[n]));
        let chroma_frame = chroma
            .get((n / chroma_hop_ratio).min(chroma.len().saturating_sub(1)))
            .copied()
            .unwrap_or([T::zero(); NUM_PITCH_CLASSES]);
        for c in chroma_frame {
            out.push_str(&format!(",{c:.6}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Per-frame vocal prediction dump: `time_s,v_raw,v_smooth`.
pub fn write_vocal_debug(
    path: &Path,
    frame_rate_hz: f64,
    raw: &[bool],
    smoothed: &[bool],
) -> Result<()> {
    let mut out = String::from("time_s,v_raw,v_smooth\n");
    for (n, (r, s)) in raw.iter().zip(smoothed).enumerate() {
        out.push_str(&format!(
            "{:.6},{},{}\n",
            n as f64 / frame_rate_hz,
            *r as u8,
            *s as u8
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Onset debug dump: `time_s,detector` per detected onset.
pub fn write_onset_debug(path: &Path, frame_rate_hz: f64, onsets: &[Onset]) -> Result<()> {
    let mut out = String::from("time_s,detector\n");
    for o in onsets {
        out.push_str(&format!(
            "{:.6},{}\n",
            o.frame as f64 / frame_rate_hz,
            o.detector.name()
        ));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Writes JSON-lines diagnostics (one serialised object per line).
pub fn write_jsonl<S: serde::Serialize>(path: &Path, lines: &[S]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    for line in lines {
        let json = serde_json::to_string(line).expect("diagnostics serialise");
        writeln!(file, "{json}").map_err(io_err(path))?;
    }
    Ok(())
}
