//! Transcription scoring: voicing, onset and note precision/recall/f-measure
//! plus frame-wise raw pitch accuracy, with transposition correction.
//!
//! Onsets and notes are matched one-to-one; the match count is maximised
//! exactly with an augmenting-path bipartite matching, so scores do not
//! depend on list order.

use crate::audio::REQUIRED_SAMPLE_RATE;
use crate::labelling::NoteEvent;

/// Onsets match within this tolerance, in seconds.
pub const ONSET_TOLERANCE_S: f64 = 0.15;

/// Correct notes must have a duration within this fraction of the reference.
pub const DURATION_TOLERANCE: f64 = 0.3;

/// Frame grid the frame-wise metrics are computed on (the estimator's hop).
pub const EVAL_FRAME_S: f64 = 128.0 / REQUIRED_SAMPLE_RATE as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl PrecisionRecall {
    /// Empty denominators score 0; the harmonic mean of two zeros is 0.
    fn from_counts(matched: usize, est: usize, gt: usize) -> Self {
        let precision = if est > 0 { matched as f64 / est as f64 } else { 0.0 };
        let recall = if gt > 0 { matched as f64 / gt as f64 } else { 0.0 };
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrecisionRecall {
            precision,
            recall,
            f_measure,
        }
    }

    const PERFECT: PrecisionRecall = PrecisionRecall {
        precision: 1.0,
        recall: 1.0,
        f_measure: 1.0,
    };
}

/// Frame-wise voicing precision/recall/f-measure. Sequences of different
/// length are compared as if the shorter were padded with unvoiced frames.
/// Two entirely unvoiced tracks count as a perfect match.
pub fn voicing_metrics(est: &[bool], gt: &[bool]) -> PrecisionRecall {
    let est_voiced = est.iter().filter(|&&v| v).count();
    let gt_voiced = gt.iter().filter(|&&v| v).count();
    if est_voiced == 0 && gt_voiced == 0 {
        return PrecisionRecall::PERFECT;
    }
    let both = est
        .iter()
        .zip(gt)
        .filter(|(&e, &g)| e && g)
        .count();
    PrecisionRecall::from_counts(both, est_voiced, gt_voiced)
}

/// Maximum bipartite matching count via Kuhn's augmenting paths.
/// `adjacency[i]` lists the gt indices estimate `i` may pair with.
fn maximum_matching(adjacency: &[Vec<usize>], gt_len: usize) -> usize {
    fn augment(
        i: usize,
        adjacency: &[Vec<usize>],
        owner: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &j in &adjacency[i] {
            if visited[j] {
                continue;
            }
            visited[j] = true;
            if owner[j].is_none()
                || augment(owner[j].unwrap(), adjacency, owner, visited)
            {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }

    let mut owner: Vec<Option<usize>> = vec![None; gt_len];
    let mut matched = 0;
    for i in 0..adjacency.len() {
        let mut visited = vec![false; gt_len];
        if augment(i, adjacency, &mut owner, &mut visited) {
            matched += 1;
        }
    }
    matched
}

/// Onset precision/recall/f-measure under one-to-one matching within
/// `tol_s`.
pub fn onset_metrics(est: &[f64], gt: &[f64], tol_s: f64) -> PrecisionRecall {
    let adjacency: Vec<Vec<usize>> = est
        .iter()
        .map(|&e| {
            gt.iter()
                .enumerate()
                .filter(|(_, &g)| (e - g).abs() <= tol_s)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    PrecisionRecall::from_counts(maximum_matching(&adjacency, gt.len()), est.len(), gt.len())
}

/// A (gt, est) note pair is a correct transcription iff the pitch matches,
/// the onsets lie within the onset tolerance, and the estimated duration is
/// within 30% of the reference duration.
pub fn note_pair_matches(est: &NoteEvent, gt: &NoteEvent, tol_s: f64, dur_tol: f64) -> bool {
    est.midi == gt.midi
        && (est.onset_s - gt.onset_s).abs() <= tol_s
        && (est.duration_s - gt.duration_s).abs() <= dur_tol * gt.duration_s
}

/// Note precision/recall/f-measure under one-to-one matching.
pub fn note_metrics(est: &[NoteEvent], gt: &[NoteEvent]) -> PrecisionRecall {
    let adjacency: Vec<Vec<usize>> = est
        .iter()
        .map(|e| {
            gt.iter()
                .enumerate()
                .filter(|(_, g)| note_pair_matches(e, g, ONSET_TOLERANCE_S, DURATION_TOLERANCE))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    PrecisionRecall::from_counts(maximum_matching(&adjacency, gt.len()), est.len(), gt.len())
}

/// Rasterises notes onto the evaluation frame grid, half-open on
/// `[onset, onset + duration)`. Overlaps resolve to the later note.
pub fn rasterise(notes: &[NoteEvent], num_frames: usize) -> Vec<Option<i32>> {
    let mut frames = vec![None; num_frames];
    let mut sorted: Vec<&NoteEvent> = notes.iter().collect();
    sorted.sort_by(|a, b| a.onset_s.partial_cmp(&b.onset_s).unwrap());
    for n in sorted {
        let first = (n.onset_s / EVAL_FRAME_S).ceil() as usize;
        let last = ((n.onset_s + n.duration_s) / EVAL_FRAME_S).ceil() as usize;
        for f in frames.iter_mut().take(last.min(num_frames)).skip(first) {
            *f = Some(n.midi);
        }
    }
    frames
}

/// Fraction of frames transcribed correctly: unvoiced frames count when both
/// sides are unvoiced, voiced frames when the quantised pitches agree.
pub fn raw_pitch_accuracy(est_frames: &[Option<i32>], gt_frames: &[Option<i32>]) -> f64 {
    let n = est_frames.len().max(gt_frames.len());
    if n == 0 {
        return 1.0;
    }
    let at = |frames: &[Option<i32>], i: usize| frames.get(i).copied().flatten();
    let correct = (0..n)
        .filter(|&i| at(est_frames, i) == at(gt_frames, i))
        .count();
    correct as f64 / n as f64
}

/// Per-track evaluation result. Field names follow the report schema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub pr_v: f64,
    pub rec_v: f64,
    pub fm_v: f64,
    pub pr_on: f64,
    pub rec_on: f64,
    pub fm_on: f64,
    pub pr_n: f64,
    pub rec_n: f64,
    pub fm_n: f64,
    pub rpa: f64,
    /// Semitone shift applied to the estimate before scoring: -1, 0 or +1.
    pub transposition_applied: i32,
}

/// Column names of the report CSV, matching the `EvalReport` fields.
pub const REPORT_FIELDS: [&str; 11] = [
    "Pr_V", "Rec_V", "FM_V", "Pr_On", "Rec_On", "FM_On", "Pr_N", "Rec_N", "FM_N", "RPA",
    "transposition_applied",
];

impl EvalReport {
    pub fn values(&self) -> [f64; 11] {
        [
            self.pr_v,
            self.rec_v,
            self.fm_v,
            self.pr_on,
            self.rec_on,
            self.fm_on,
            self.pr_n,
            self.rec_n,
            self.fm_n,
            self.rpa,
            self.transposition_applied as f64,
        ]
    }
}

fn shift_notes(notes: &[NoteEvent], semitones: i32) -> Vec<NoteEvent> {
    notes
        .iter()
        .map(|n| NoteEvent {
            midi: n.midi + semitones,
            ..*n
        })
        .collect()
}

fn evaluate_fixed(est: &[NoteEvent], gt: &[NoteEvent], transposition: i32) -> EvalReport {
    let num_frames = est
        .iter()
        .chain(gt)
        .map(|n| ((n.onset_s + n.duration_s) / EVAL_FRAME_S).ceil() as usize)
        .max()
        .unwrap_or(0);
    let est_frames = rasterise(est, num_frames);
    let gt_frames = rasterise(gt, num_frames);

    let est_voiced: Vec<bool> = est_frames.iter().map(Option::is_some).collect();
    let gt_voiced: Vec<bool> = gt_frames.iter().map(Option::is_some).collect();
    let voicing = voicing_metrics(&est_voiced, &gt_voiced);

    let est_onsets: Vec<f64> = est.iter().map(|n| n.onset_s).collect();
    let gt_onsets: Vec<f64> = gt.iter().map(|n| n.onset_s).collect();
    let onsets = onset_metrics(&est_onsets, &gt_onsets, ONSET_TOLERANCE_S);

    let notes = note_metrics(est, gt);

    EvalReport {
        pr_v: voicing.precision,
        rec_v: voicing.recall,
        fm_v: voicing.f_measure,
        pr_on: onsets.precision,
        rec_on: onsets.recall,
        fm_on: onsets.f_measure,
        pr_n: notes.precision,
        rec_n: notes.recall,
        fm_n: notes.f_measure,
        rpa: raw_pitch_accuracy(&est_frames, &gt_frames),
        transposition_applied: transposition,
    }
}

/// Evaluates the estimate and its one-semitone transpositions, keeping the
/// variant with the best note f-measure (ties prefer no transposition, then
/// the downward shift).
pub fn evaluate_notes(est: &[NoteEvent], gt: &[NoteEvent]) -> EvalReport {
    let mut best: Option<EvalReport> = None;
    for shift in [0, -1, 1] {
        let report = evaluate_fixed(&shift_notes(est, shift), gt, shift);
        if best.map_or(true, |b| report.fm_n > b.fm_n) {
            best = Some(report);
        }
    }
    best.unwrap()
}
