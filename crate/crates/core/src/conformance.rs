//! Protocol conformance check for external scorers.

use std::collections::BTreeMap;
use std::fmt;

use crate::scorer::{RemoteScorer, ScoreResponse, ScorerEndpoint, ScorerError};

/// Ten fixed requests covering plain, unicode, long and quote-laden text.
pub fn fixture() -> Vec<(u64, String)> {
    let long = "The committee reviewed the proposal carefully ".repeat(40) + "and approved it.";
    [
        "The cat chased the dog.".to_string(),
        "Who do you think left?".to_string(),
        "Zoë’s café served crème brûlée, naïvely.".to_string(),
        "Москва — столица России.".to_string(),
        "東京は日本の首都です。".to_string(),
        long,
        "She said \"no\" and left.".to_string(),
        "He wrote 'it's fine' on the \\ board.".to_string(),
        "Tabs\tand\u{0007}control characters.".to_string(),
        "the the the".to_string(),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, t)| (i as u64 + 1, t))
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Unparseable { line: String, reason: String },
    ScoreOutOfRange { id: u64, score: f64 },
    UnknownId(u64),
    DuplicateId(u64),
    MissingId(u64),
    TimedOut,
    ClosedEarly,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unparseable { line, reason } => write!(f, "unparseable response {line:?}: {reason}"),
            Violation::ScoreOutOfRange { id, score } => write!(f, "range: id {id} returned score {score} outside [0, 1]"),
            Violation::UnknownId(id) => write!(f, "unknown id {id} in response"),
            Violation::DuplicateId(id) => write!(f, "id {id} answered more than once"),
            Violation::MissingId(id) => write!(f, "missing id {id}: no response received"),
            Violation::TimedOut => f.write_str("timed out waiting for responses"),
            Violation::ClosedEarly => f.write_str("endpoint closed the stream before answering every request"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConformanceReport {
    pub requests: usize,
    pub responses: usize,
    pub violations: Vec<Violation>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "requests: {}  responses: {}", self.requests, self.responses)?;
        for v in &self.violations {
            writeln!(f, "VIOLATION {v}")?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Judges the lines an endpoint sent back for `requests`.
pub fn judge(requests: &[(u64, String)], lines: &[String], timed_out: bool, closed_early: bool) -> ConformanceReport {
    let mut report = ConformanceReport {
        requests: requests.len(),
        responses: lines.len(),
        violations: Vec::new(),
    };
    let mut answered: BTreeMap<u64, usize> = requests.iter().map(|(id, _)| (*id, 0)).collect();
    for line in lines {
        match ScoreResponse::parse(line) {
            Err(ScorerError::ProtocolViolation(reason)) | Err(ScorerError::InvalidModel(reason)) => {
                report.violations.push(Violation::Unparseable { line: line.clone(), reason })
            }
            Err(e) => report.violations.push(Violation::Unparseable {
                line: line.clone(),
                reason: e.to_string(),
            }),
            Ok(r) => {
                match answered.get_mut(&r.id) {
                    None => report.violations.push(Violation::UnknownId(r.id)),
                    Some(n) => {
                        *n += 1;
                        if *n == 2 {
                            report.violations.push(Violation::DuplicateId(r.id));
                        }
                    }
                }
                if !(0.0..=1.0).contains(&r.score) {
                    report.violations.push(Violation::ScoreOutOfRange { id: r.id, score: r.score });
                }
            }
        }
    }
    for (id, n) in &answered {
        if *n == 0 {
            report.violations.push(Violation::MissingId(*id));
        }
    }
    if timed_out {
        report.violations.push(Violation::TimedOut);
    }
    if closed_early {
        report.violations.push(Violation::ClosedEarly);
    }
    report
}

/// Sends the fixture to `endpoint` and judges the replies. Transport
/// failures (cannot connect, cannot spawn) are returned as errors.
pub fn check_endpoint(endpoint: &ScorerEndpoint) -> Result<ConformanceReport, ScorerError> {
    let requests = fixture();
    let raw = RemoteScorer::exchange_raw(endpoint, &requests)?;
    Ok(judge(&requests, &raw.lines, raw.timed_out, raw.closed_early))
}
