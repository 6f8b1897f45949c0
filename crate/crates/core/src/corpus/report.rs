//! Evaluation reports: a plain-text summary and one JSON record per test
//! utterance. Both are deterministic functions of the evaluation.

use std::fmt::Write as _;

use serde::Serialize;

use super::pipeline::Evaluation;
use crate::identification::{EvaluationReport, SpeakerScore};

fn pia_line(out: &mut String, name: &str, r: &EvaluationReport) {
    let _ = writeln!(
        out,
        "{name:<10} {:>3}/{:<3} {:>7.2}%",
        r.correct(),
        r.total(),
        r.pia
    );
}

pub fn render_summary(eval: &Evaluation) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "test utterances: {}", eval.combined.total());
    let _ = writeln!(out, "eta: {}", eval.eta);
    let _ = writeln!(out);
    let _ = writeln!(out, "stream     correct     PIA");
    pia_line(&mut out, "spectral", &eval.spectral);
    pia_line(&mut out, "residual", &eval.residual);
    pia_line(&mut out, "combined", &eval.combined);

    let speakers: Vec<&String> = eval.combined.confusion.keys().collect();
    let width = speakers.iter().map(|s| s.len()).max().unwrap_or(0).max(5);
    let _ = writeln!(out);
    let _ = writeln!(out, "combined confusion (rows: true, columns: decided)");
    let _ = write!(out, "{:width$}", "");
    for s in &speakers {
        let _ = write!(out, " {s:>width$}");
    }
    let _ = writeln!(out, " {:>width$}", "other");
    for truth in &speakers {
        let row = &eval.combined.confusion[*truth];
        let _ = write!(out, "{truth:width$}");
        for s in &speakers {
            let _ = write!(out, " {:>width$}", row.get(*s).copied().unwrap_or(0));
        }
        let other: usize = row
            .iter()
            .filter(|(k, _)| !speakers.contains(k))
            .map(|(_, v)| v)
            .sum();
        let _ = writeln!(out, " {other:>width$}");
    }
    out
}

#[derive(Serialize)]
struct StreamScores {
    spectral: f64,
    residual: f64,
    combined: f64,
}

impl From<&SpeakerScore> for StreamScores {
    fn from(s: &SpeakerScore) -> Self {
        Self {
            spectral: s.spectral,
            residual: s.residual,
            combined: s.combined,
        }
    }
}

#[derive(Serialize)]
struct Record<'a> {
    utterance: &'a str,
    truth: &'a str,
    decided: &'a str,
    correct: bool,
    decided_scores: StreamScores,
    truth_scores: Option<StreamScores>,
}

/// One JSON object per line, in test-set order.
pub fn render_records(eval: &Evaluation) -> String {
    let mut out = String::new();
    for (u, d) in eval.utterances.iter().zip(&eval.combined.decisions) {
        let decided = u
            .scores
            .get(&d.decided)
            .expect("decided speaker was scored");
        let rec = Record {
            utterance: &u.utterance,
            truth: &u.speaker,
            decided: &d.decided,
            correct: d.is_correct(),
            decided_scores: decided.into(),
            truth_scores: u.scores.get(&u.speaker).map(Into::into),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::pipeline::ScoredUtterance;
    use crate::identification::{fuse, UtteranceScores};

    fn scored(utt: &str, truth: &str, s: [f64; 2], r: [f64; 2]) -> ScoredUtterance {
        ScoredUtterance {
            speaker: truth.into(),
            utterance: utt.into(),
            scores: UtteranceScores {
                eta: 0.5,
                spectral_frames: 10,
                residual_frames: 10,
                scores: ["a", "b"]
                    .iter()
                    .enumerate()
                    .map(|(i, id)| SpeakerScore {
                        speaker: (*id).into(),
                        spectral: s[i],
                        residual: r[i],
                        combined: fuse(0.5, s[i], r[i]),
                    })
                    .collect(),
            },
        }
    }

    fn eval() -> Evaluation {
        Evaluation::from_scores(
            0.5,
            vec![
                scored("u1", "a", [-1.0, -2.0], [-5.0, -1.0]),
                scored("u2", "b", [-3.0, -1.0], [-1.0, -2.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn summary_table() {
        let text = render_summary(&eval());
        assert!(text.contains("spectral     2/2    100.00%"), "{text}");
        assert!(text.contains("residual     0/2      0.00%"), "{text}");
        assert!(text.contains("combined     1/2     50.00%"), "{text}");
        assert_eq!(text, render_summary(&eval()));
    }

    #[test]
    fn records_are_json_lines() {
        let text = render_records(&eval());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["utterance"], "u1");
        assert_eq!(v["decided"], "b");
        assert_eq!(v["correct"], false);
        assert_eq!(v["decided_scores"]["combined"], -1.5);
        assert_eq!(v["truth_scores"]["combined"], -3.0);
    }
}
