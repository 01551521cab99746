//! Deterministic audio synthesis for the end-to-end tests: a 30-second
//! stereo "performance" with an ornamented voice panned left and a low-range
//! plucked accompaniment panned right, plus simpler single-voice renderers.

use melisma::labelling::NoteEvent;
use melisma::AudioClip;

use super::SAMPLE_RATE;

const FS: f64 = SAMPLE_RATE as f64;
const TAU: f64 = std::f64::consts::TAU;

pub fn midi_to_hz(midi: i32) -> f64 {
    440.0 * 2f64.powf((midi - 69) as f64 / 12.0)
}

/// A sung note for the synthetic ground truth.
#[derive(Debug, Clone, Copy)]
pub struct VoiceNote {
    pub onset_s: f64,
    pub end_s: f64,
    pub midi: i32,
}

impl VoiceNote {
    pub fn to_event(self) -> NoteEvent {
        NoteEvent {
            onset_s: self.onset_s,
            duration_s: self.end_s - self.onset_s,
            midi: self.midi,
        }
    }
}

pub struct VoiceParams {
    pub amp: f64,
    pub harmonics: usize,
    pub harmonic_decay: f64,
    pub vibrato_hz: f64,
    pub vibrato_cents: f64,
    pub tuning_cents: f64,
    /// Amplitude factor of the articulation notch between equal-pitch notes.
    pub notch_gain: f64,
    pub notch_s: f64,
}

impl Default for VoiceParams {
    fn default() -> Self {
        VoiceParams {
            amp: 0.13,
            harmonics: 10,
            harmonic_decay: 0.78,
            vibrato_hz: 5.0,
            vibrato_cents: 50.0,
            tuning_cents: 20.0,
            notch_gain: 0.03,
            notch_s: 0.130,
        }
    }
}

/// Renders a legato voice line with vibrato, a global tuning offset, and
/// amplitude notches at boundaries between notes of equal pitch. Notes in one
/// phrase must be contiguous; phrases are separated by silence.
pub fn render_voice(notes: &[VoiceNote], total_s: f64, p: &VoiceParams) -> Vec<f64> {
    let n = (total_s * FS).round() as usize;
    let mut out = vec![0.0; n];

    // Articulation notches at repeated-pitch boundaries.
    let mut notches: Vec<f64> = Vec::new();
    for pair in notes.windows(2) {
        if pair[0].midi == pair[1].midi && (pair[0].end_s - pair[1].onset_s).abs() < 1e-9 {
            notches.push(pair[1].onset_s);
        }
    }

    let edge_ramp = 0.015;
    let mut phase = 0.0f64;
    for i in 0..n {
        let t = i as f64 / FS;
        let Some(note) = notes.iter().find(|v| t >= v.onset_s && t < v.end_s) else {
            continue;
        };
        let vibrato = p.vibrato_cents * (TAU * p.vibrato_hz * t).sin();
        let freq = midi_to_hz(note.midi) * 2f64.powf((p.tuning_cents + vibrato) / 1200.0);
        phase += TAU * freq / FS;

        // Ramp at phrase edges (note edges adjacent to silence).
        let mut env = 1.0f64;
        let prev_contiguous = notes
            .iter()
            .any(|v| (v.end_s - note.onset_s).abs() < 1e-9);
        let next_contiguous = notes
            .iter()
            .any(|v| (v.onset_s - note.end_s).abs() < 1e-9);
        if !prev_contiguous {
            env = env.min((t - note.onset_s) / edge_ramp);
        }
        if !next_contiguous {
            env = env.min((note.end_s - t) / edge_ramp);
        }
        env = env.clamp(0.0, 1.0);
        for &notch in &notches {
            let d = (t - notch).abs();
            if d < p.notch_s / 2.0 {
                // Flat-bottomed: full depth over the middle 70%, ramps at
                // the edges.
                let ramp = ((d - 0.35 * p.notch_s) / (0.15 * p.notch_s)).clamp(0.0, 1.0);
                env *= p.notch_gain + (1.0 - p.notch_gain) * ramp;
            }
        }

        let mut s = 0.0;
        for h in 1..=p.harmonics {
            s += p.harmonic_decay.powi(h as i32 - 1) * (h as f64 * phase).sin();
        }
        out[i] = p.amp * env * s;
    }
    out
}

pub struct AccompParams {
    pub loud_amp: f64,
    /// Softer interlude notes (every third one): same timbre as the loud
    /// notes but below the melody extractor's salience cut, so the unvoiced
    /// class learns real accompaniment frames.
    pub medium_amp: f64,
    pub quiet_amp: f64,
    /// Pluck cycle length; each pluck sounds for `note_s - rest_s`.
    pub note_s: f64,
    pub rest_s: f64,
    pub decay_s: f64,
    pub cycle_hz: Vec<f64>,
    pub quiet_cycle_hz: Vec<f64>,
    pub harmonic_decay: f64,
    pub max_harmonic_hz: f64,
    pub wobble_hz: f64,
    pub wobble_depth: f64,
    /// The quiet line rests for this long around each loud section, the way
    /// an accompanist lifts before an entrance; guarantees silence between
    /// the two registers.
    pub mute_margin_s: f64,
    /// Progressive sharpening of the partials during quiet playing: partial
    /// `h` sits at `h * f0 * (1 + detune * (h - 1))`. Keeps the bark-band
    /// footprint of the loud plucks while breaking the harmonic stack, the
    /// way muted strums carry far less pitch salience than open plucks.
    pub quiet_detune: f64,
}

impl Default for AccompParams {
    fn default() -> Self {
        AccompParams {
            loud_amp: 0.192,
            medium_amp: 0.14,
            quiet_amp: 0.13,
            note_s: 0.45,
            rest_s: 0.02,
            decay_s: 1e9,
            // Small low-range lines whose first five partials land in the
            // same bark bands for both playing modes, with every melodic
            // step (and the loud/quiet register gap) wider than the
            // extractor's 80-cent linking window.
            cycle_hz: vec![138.0, 145.5, 138.5, 146.5],
            quiet_cycle_hz: vec![122.0, 123.0, 122.5, 123.5],
            harmonic_decay: 0.72,
            max_harmonic_hz: 720.0,
            wobble_hz: 1.3,
            wobble_depth: 0.45,
            mute_margin_s: 0.18,
            quiet_detune: 0.047,
        }
    }
}

/// Renders the accompaniment: a cycling low-range plucked line with short
/// rests between plucks, played loud (and cleanly harmonic) inside
/// `loud_spans`, quietly and inharmonically (with slow amplitude wobble)
/// elsewhere within `active`.
pub fn render_accomp(
    active: (f64, f64),
    loud_spans: &[(f64, f64)],
    total_s: f64,
    p: &AccompParams,
) -> Vec<f64> {
    let n = (total_s * FS).round() as usize;
    let mut out = vec![0.0; n];
    let sound_s = p.note_s - p.rest_s;
    let mut phases = [0.0f64; 16];
    let mut pluck_is_loud = false;
    let mut current_pluck = usize::MAX;
    for i in 0..n {
        let t = i as f64 / FS;
        if t < active.0 || t >= active.1 {
            continue;
        }
        let pos = t - active.0;
        let note_idx = (pos / p.note_s) as usize;
        let in_note = pos - note_idx as f64 * p.note_s;
        if in_note >= sound_s {
            continue; // rest between plucks
        }
        if note_idx != current_pluck {
            current_pluck = note_idx;
            pluck_is_loud = loud_spans.iter().any(|&(a, b)| t >= a && t < b);
            phases = [0.0; 16];
        }
        // The quiet line rests around each loud entrance (10 ms ramps).
        let mut mute_gain = 1.0f64;
        if !pluck_is_loud {
            for &(a, b) in loud_spans {
                let m = p.mute_margin_s;
                if t >= a - m && t < b + m {
                    let d = if t < a { a - m - t } else { t - b - m };
                    mute_gain = mute_gain.min((d.abs() / 0.010).min(1.0));
                    if t >= a - m + 0.010 && t < b + m - 0.010 {
                        mute_gain = 0.0;
                    }
                }
            }
        }
        if mute_gain <= 0.0 {
            continue;
        }
        let f0 = if pluck_is_loud {
            p.cycle_hz[note_idx % p.cycle_hz.len()]
        } else {
            p.quiet_cycle_hz[note_idx % p.quiet_cycle_hz.len()]
        };
        let detuned = !pluck_is_loud;

        let pluck_env = (in_note / 0.008).min((sound_s - in_note) / 0.015).clamp(0.0, 1.0)
            * (-in_note / p.decay_s).exp();
        let amp = if pluck_is_loud {
            if note_idx % 3 == 0 {
                p.medium_amp
            } else {
                p.loud_amp
            }
        } else {
            p.quiet_amp * (1.0 + p.wobble_depth * (TAU * p.wobble_hz * t).sin())
        };

        let mut s = 0.0;
        for h in 1..=16usize {
            if h as f64 * f0 > p.max_harmonic_hz {
                break;
            }
            let detune = if detuned {
                1.0 + p.quiet_detune * (h as f64 - 1.0)
            } else {
                1.0
            };
            phases[h - 1] += TAU * h as f64 * f0 * detune / FS;
            s += p.harmonic_decay.powi(h as i32 - 1) * phases[h - 1].sin();
        }
        out[i] = mute_gain * amp * pluck_env * s;
    }
    out
}

/// The standard 30-second evaluation fixture.
pub struct Fixture {
    pub clip: AudioClip<f64>,
    pub gt_notes: Vec<NoteEvent>,
    /// Sections where only the accompaniment sounds.
    pub accomp_only_spans: Vec<(f64, f64)>,
    /// Sections where the voice sings.
    pub voice_spans: Vec<(f64, f64)>,
    pub tuning_cents: f64,
}

pub fn voice_melody() -> Vec<VoiceNote> {
    let note = |onset_s: f64, end_s: f64, midi: i32| VoiceNote {
        onset_s,
        end_s,
        midi,
    };
    vec![
        // Phrase 1
        note(2.00, 3.20, 57),
        note(3.20, 4.40, 59),
        note(4.40, 5.60, 61),
        note(5.85, 7.05, 62),
        note(7.05, 8.25, 62), // repeated pitch: articulation notch
        note(8.25, 9.45, 59),
        note(9.70, 10.60, 61),
        note(10.60, 11.60, 57),
        // Phrase 2
        note(14.00, 15.30, 64),
        note(15.30, 16.60, 62),
        note(16.85, 18.15, 61),
        note(18.15, 19.45, 61), // repeated pitch
        note(19.45, 20.90, 59),
        note(20.90, 22.80, 57),
        // Phrase 3
        note(25.40, 26.60, 59),
        note(26.60, 28.60, 57),
    ]
}

/// Builds the mixed stereo fixture: voice panned left, accompaniment panned
/// right with strong bleed into the left channel.
pub fn standard_fixture() -> Fixture {
    let total_s = 30.0;
    let notes = voice_melody();
    // Snapped to the accompaniment's 0.45 s note grid (notes start at
    // 0.10 + k*0.45) so each interlude note is cleanly loud.
    let accomp_loud = vec![(0.54, 1.89), (12.24, 13.59), (23.49, 24.84)];

    let voice = render_voice(&notes, total_s, &VoiceParams::default());
    let accomp = render_accomp(
        (0.10, 29.60),
        &accomp_loud,
        total_s,
        &AccompParams::default(),
    );

    let left: Vec<f64> = voice
        .iter()
        .zip(&accomp)
        .map(|(v, a)| v + 0.8 * a)
        .collect();
    let right: Vec<f64> = voice
        .iter()
        .zip(&accomp)
        .map(|(v, a)| 0.15 * v + a)
        .collect();

    Fixture {
        clip: AudioClip::new(vec![left, right], SAMPLE_RATE).unwrap(),
        gt_notes: notes.iter().map(|n| n.to_event()).collect(),
        accomp_only_spans: accomp_loud,
        voice_spans: vec![(2.00, 11.60), (14.00, 22.80), (25.40, 28.60)],
        tuning_cents: VoiceParams::default().tuning_cents,
    }
}

/// A monophonic ten-note legato melody with vibrato and articulation
/// notches, for the isolated segmentation test. Returns the clip and its
/// ground truth.
pub fn legato_melody() -> (AudioClip<f64>, Vec<NoteEvent>) {
    let note = |onset_s: f64, end_s: f64, midi: i32| VoiceNote {
        onset_s,
        end_s,
        midi,
    };
    let notes = vec![
        note(0.30, 1.00, 60),
        note(1.00, 1.70, 64),
        note(1.70, 2.40, 62),
        note(2.40, 3.10, 62), // repeated pitch
        note(3.10, 3.80, 65),
        note(3.80, 4.50, 62),
        note(4.50, 5.20, 64),
        note(5.20, 5.90, 64), // repeated pitch
        note(5.90, 6.60, 62),
        note(6.60, 7.50, 59),
    ];
    let p = VoiceParams {
        tuning_cents: 0.0,
        ..Default::default()
    };
    let samples = render_voice(&notes, 8.0, &p);
    let clip = AudioClip::new(vec![samples], SAMPLE_RATE).unwrap();
    (clip, notes.iter().map(|n| n.to_event()).collect())
}
