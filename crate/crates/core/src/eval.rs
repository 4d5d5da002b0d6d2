//! Ablation evaluation over a labelled dataset with aligned parses.
//!
//! Three platforms are compared: the rules alone (untyped sentences count as
//! unacceptable), the scorer alone, and the hybrid pipeline. The scorer is
//! also run on every typed sentence so its accuracy can be broken down by
//! detector type.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::LabeledExample;
use crate::pipeline::{BatchItem, Pipeline, PipelineConfig, PipelineError, Route, Verdict};
use crate::scorer::{Scorer, ScorerError};
use crate::types::{ParsedSentence, SentenceType};

const SCORE_CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset and parses are misaligned at position {position}: {reason}")]
    AlignmentError { position: usize, reason: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("scorer: {0}")]
    Scorer(#[from] ScorerError),
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Platform {
    #[serde(rename = "Neural-Symbolic")]
    NeuralSymbolic,
    Neural,
    Symbolic,
}

impl Platform {
    pub fn title(self) -> &'static str {
        match self {
            Platform::NeuralSymbolic => "Neural-Symbolic",
            Platform::Neural => "Neural",
            Platform::Symbolic => "Symbolic",
        }
    }

    fn from_title(s: &str) -> Option<Self> {
        [Platform::NeuralSymbolic, Platform::Neural, Platform::Symbolic]
            .into_iter()
            .find(|p| p.title() == s)
    }
}

/// One row of the ablation table. `None` cells render as a dash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub platform: Platform,
    pub available: bool,
    pub unknown: Option<usize>,
    pub simple: Option<usize>,
    pub compound: Option<usize>,
    pub complex: Option<usize>,
    pub compound_complex: Option<usize>,
    /// Rounded to one decimal.
    pub percent_correct: Option<f64>,
    pub correct: Option<usize>,
    /// Sentences the percentage is computed over.
    pub evaluated: usize,
    /// Matthews correlation of the row's predictions against gold.
    pub mcc: Option<f64>,
}

impl AblationReport {
    fn unavailable(platform: Platform) -> Self {
        AblationReport {
            platform,
            available: false,
            unknown: None,
            simple: None,
            compound: None,
            complex: None,
            compound_complex: None,
            percent_correct: None,
            correct: None,
            evaluated: 0,
            mcc: None,
        }
    }

    pub fn type_count(&self, t: SentenceType) -> Option<usize> {
        match t {
            SentenceType::Unknown => self.unknown,
            SentenceType::Simple => self.simple,
            SentenceType::Compound => self.compound,
            SentenceType::Complex => self.complex,
            SentenceType::CompoundComplex => self.compound_complex,
        }
    }

    fn set_type_count(&mut self, t: SentenceType, v: Option<usize>) {
        let slot = match t {
            SentenceType::Unknown => &mut self.unknown,
            SentenceType::Simple => &mut self.simple,
            SentenceType::Compound => &mut self.compound,
            SentenceType::Complex => &mut self.complex,
            SentenceType::CompoundComplex => &mut self.compound_complex,
        };
        *slot = v;
    }

    /// Sum of the non-dash type cells.
    pub fn type_total(&self) -> usize {
        SentenceType::ALL.iter().filter_map(|t| self.type_count(*t)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTypeEntry {
    #[serde(rename = "type")]
    pub sentence_type: SentenceType,
    pub identified: usize,
    pub correct: usize,
    pub percent_correct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerTypeNeuralReport {
    pub entries: Vec<PerTypeEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutedCorrect {
    pub symbolic_routed_correct: usize,
    pub neural_routed_correct: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset_size: usize,
    /// Neural-Symbolic, Neural and Symbolic, in that order.
    pub rows: Vec<AblationReport>,
    pub neural_full_set_percent: Option<f64>,
    pub neural_unknown_subset_percent: Option<f64>,
    pub nesy_decomposition: Option<RoutedCorrect>,
    pub per_type_neural: Option<PerTypeNeuralReport>,
}

impl EvaluationReport {
    pub fn row(&self, platform: Platform) -> Option<&AblationReport> {
        self.rows.iter().find(|r| r.platform == platform)
    }
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn percent(correct: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| round1(100.0 * correct as f64 / total as f64))
}

/// Matthews correlation coefficient; `None` when undefined.
pub fn matthews(pred: &[bool], gold: &[bool]) -> Option<f64> {
    let (mut tp, mut tn, mut fp, mut fnn) = (0f64, 0f64, 0f64, 0f64);
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fnn += 1.0,
        }
    }
    let denom = ((tp + fp) * (tp + fnn) * (tn + fp) * (tn + fnn)).sqrt();
    (denom > 0.0).then(|| (tp * tn - fp * fnn) / denom)
}

fn check_alignment(dataset: &[LabeledExample], parses: &[ParsedSentence]) -> Result<(), EvalError> {
    if dataset.len() != parses.len() {
        return Err(EvalError::AlignmentError {
            position: dataset.len().min(parses.len()) + 1,
            reason: format!("{} examples but {} parses", dataset.len(), parses.len()),
        });
    }
    for (i, (ex, p)) in dataset.iter().zip(parses).enumerate() {
        if ex.id != p.id() {
            return Err(EvalError::AlignmentError {
                position: i + 1,
                reason: format!("example id {:?} vs parse id {:?}", ex.id, p.id()),
            });
        }
    }
    Ok(())
}

fn run(pipeline: &Pipeline, items: &[BatchItem]) -> Result<Vec<Verdict>, EvalError> {
    pipeline
        .validate_batch(items)
        .results
        .into_iter()
        .map(|r| r.map_err(EvalError::from))
        .collect()
}

fn row_from_verdicts(platform: Platform, verdicts: &[Verdict], gold: &[bool]) -> AblationReport {
    let mut row = AblationReport::unavailable(platform);
    row.available = true;
    for t in SentenceType::ALL {
        row.set_type_count(t, Some(verdicts.iter().filter(|v| v.sentence_type == t).count()));
    }
    let pred: Vec<bool> = verdicts.iter().map(|v| v.acceptable).collect();
    let correct = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    row.correct = Some(correct);
    row.evaluated = gold.len();
    row.percent_correct = percent(correct, gold.len());
    row.mcc = matthews(&pred, gold);
    row
}

/// Runs the three-way ablation. `scorer` is optional; without it only the
/// symbolic row is available.
pub fn evaluate(
    dataset: &[LabeledExample],
    parses: &[ParsedSentence],
    cfg: &PipelineConfig,
    scorer: Option<Arc<dyn Scorer>>,
) -> Result<EvaluationReport, EvalError> {
    check_alignment(dataset, parses)?;
    let items: Vec<BatchItem> = dataset
        .iter()
        .zip(parses)
        .map(|(ex, p)| BatchItem {
            id: ex.id.clone(),
            text: ex.text.clone(),
            parse: Some(p.clone().with_text(ex.text.clone())),
        })
        .collect();
    let gold: Vec<bool> = dataset.iter().map(|e| e.acceptable).collect();

    let symbolic = run(&Pipeline::symbolic(cfg.clone()), &items)?;
    let symbolic_row = row_from_verdicts(Platform::Symbolic, &symbolic, &gold);

    let Some(scorer) = scorer else {
        return Ok(EvaluationReport {
            dataset_size: dataset.len(),
            rows: vec![
                AblationReport::unavailable(Platform::NeuralSymbolic),
                AblationReport::unavailable(Platform::Neural),
                symbolic_row,
            ],
            ..EvaluationReport::default()
        });
    };

    let hybrid = run(&Pipeline::with_scorer(cfg.clone(), scorer.clone()), &items)?;
    let mut hybrid_row = row_from_verdicts(Platform::NeuralSymbolic, &hybrid, &gold);
    let mut decomposition = RoutedCorrect::default();
    for (v, g) in hybrid.iter().zip(&gold) {
        if v.acceptable == *g {
            match v.route {
                Route::Neural => decomposition.neural_routed_correct += 1,
                _ => decomposition.symbolic_routed_correct += 1,
            }
        }
    }
    if hybrid_row.evaluated == 0 {
        hybrid_row.percent_correct = None;
    }

    let texts: Vec<String> = dataset.iter().map(|e| e.text.clone()).collect();
    let mut neural_pred = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(SCORE_CHUNK) {
        let scores = scorer.score_batch(chunk)?;
        if scores.len() != chunk.len() {
            return Err(ScorerError::ProtocolViolation(format!(
                "{} scores for {} sentences",
                scores.len(),
                chunk.len()
            ))
            .into());
        }
        neural_pred.extend(scores.into_iter().map(|s| s.value() >= scorer.threshold()));
    }
    let neural_right: Vec<bool> = neural_pred.iter().zip(&gold).map(|(p, g)| p == g).collect();
    let full_correct = neural_right.iter().filter(|&&r| r).count();

    let subset = |t: SentenceType| -> (usize, usize) {
        symbolic
            .iter()
            .zip(&neural_right)
            .filter(|(v, _)| v.sentence_type == t)
            .fold((0, 0), |(n, c), (_, &r)| (n + 1, c + usize::from(r)))
    };
    let (unknown_n, unknown_correct) = subset(SentenceType::Unknown);

    let mut neural_row = AblationReport::unavailable(Platform::Neural);
    neural_row.available = true;
    neural_row.unknown = Some(unknown_n);
    neural_row.correct = Some(unknown_correct);
    neural_row.evaluated = unknown_n;
    neural_row.percent_correct = percent(unknown_correct, unknown_n);
    let unknown_pred: Vec<bool> = symbolic
        .iter()
        .zip(neural_pred.iter().zip(&gold))
        .filter(|(v, _)| v.sentence_type == SentenceType::Unknown)
        .map(|(_, (p, _))| *p)
        .collect();
    let unknown_gold: Vec<bool> = symbolic
        .iter()
        .zip(&gold)
        .filter(|(v, _)| v.sentence_type == SentenceType::Unknown)
        .map(|(_, g)| *g)
        .collect();
    neural_row.mcc = matthews(&unknown_pred, &unknown_gold);

    let per_type = PerTypeNeuralReport {
        entries: SentenceType::TYPED
            .iter()
            .map(|&t| {
                let (identified, correct) = subset(t);
                PerTypeEntry {
                    sentence_type: t,
                    identified,
                    correct,
                    percent_correct: percent(correct, identified),
                }
            })
            .collect(),
    };

    Ok(EvaluationReport {
        dataset_size: dataset.len(),
        rows: vec![hybrid_row, neural_row, symbolic_row],
        neural_full_set_percent: percent(full_correct, gold.len()),
        neural_unknown_subset_percent: percent(unknown_correct, unknown_n),
        nesy_decomposition: Some(decomposition),
        per_type_neural: Some(per_type),
    })
}

pub const TSV_HEADER: &str = "Platform\tUnknown\tSimple\tCompound\tComplex\tCompound-Complex\t% Correct";

fn cell(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |n| n.to_string())
}

fn percent_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |p| format!("{p:.1}%"))
}

/// Ablation table as TSV, one header line plus one line per row.
pub fn render_tsv(rows: &[AblationReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TSV_HEADER}");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.platform.title(),
            cell(r.unknown),
            cell(r.simple),
            cell(r.compound),
            cell(r.complex),
            cell(r.compound_complex),
            percent_cell(r.percent_correct),
        );
    }
    out
}

/// The columns a TSV table carries.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub platform: Platform,
    pub cells: [Option<usize>; 5],
    pub percent_correct: Option<f64>,
}

impl From<&AblationReport> for TableRow {
    fn from(r: &AblationReport) -> Self {
        TableRow {
            platform: r.platform,
            cells: SentenceType::ALL.map(|t| r.type_count(t)),
            percent_correct: r.percent_correct,
        }
    }
}

pub fn parse_tsv(text: &str) -> Result<Vec<TableRow>, EvalError> {
    let bad = |msg: String| EvalError::MalformedReport(msg);
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TSV_HEADER => {}
        other => return Err(bad(format!("unexpected header {other:?}"))),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                return Err(bad(format!("expected 7 columns in {line:?}")));
            }
            let platform = Platform::from_title(cols[0]).ok_or_else(|| bad(format!("unknown platform {:?}", cols[0])))?;
            let mut cells = [None; 5];
            for (slot, raw) in cells.iter_mut().zip(&cols[1..6]) {
                *slot = match *raw {
                    "-" => None,
                    n => Some(n.parse().map_err(|_| bad(format!("bad count {n:?}")))?),
                };
            }
            let percent_correct = match cols[6] {
                "n/a" => None,
                p => Some(
                    p.strip_suffix('%')
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad(format!("bad percentage {p:?}")))?,
                ),
            };
            Ok(TableRow {
                platform,
                cells,
                percent_correct,
            })
        })
        .collect()
}

/// Per-type scorer accuracy as TSV.
pub fn render_per_type_tsv(report: &PerTypeNeuralReport) -> String {
    let mut out = String::from("Type\tIdentified\tCorrectly Identified (Neural)\n");
    for e in &report.entries {
        let _ = writeln!(out, "{}\t{}\t{}", e.sentence_type.title(), e.identified, percent_cell(e.percent_correct));
    }
    out
}

pub fn render_json(report: &EvaluationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serialization cannot fail")
}

pub fn parse_json(text: &str) -> Result<EvaluationReport, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::MalformedReport(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_row() -> AblationReport {
        AblationReport {
            platform: Platform::Symbolic,
            available: true,
            unknown: Some(76),
            simple: Some(270),
            compound: Some(41),
            complex: Some(116),
            compound_complex: Some(24),
            percent_correct: Some(round1(66.0)),
            correct: Some(348),
            evaluated: 527,
            mcc: Some(0.12),
        }
    }

    #[test]
    fn tsv_matches_table_layout() {
        let neural = AblationReport {
            platform: Platform::Neural,
            unknown: Some(76),
            percent_correct: Some(83.0),
            ..AblationReport::unavailable(Platform::Neural)
        };
        let tsv = render_tsv(&[neural, fixture_row()]);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], "Platform\tUnknown\tSimple\tCompound\tComplex\tCompound-Complex\t% Correct");
        assert_eq!(lines[1], "Neural\t76\t-\t-\t-\t-\t83.0%");
        assert_eq!(lines[2], "Symbolic\t76\t270\t41\t116\t24\t66.0%");
    }

    #[test]
    fn empty_report_renders_headers_only() {
        assert_eq!(render_tsv(&[]), format!("{TSV_HEADER}\n"));
        let empty = EvaluationReport::default();
        assert_eq!(parse_json(&render_json(&empty)).unwrap(), empty);
        assert!(parse_tsv(&render_tsv(&[])).unwrap().is_empty());
    }

    #[test]
    fn json_tsv_json_round_trip() {
        let report = EvaluationReport {
            dataset_size: 527,
            rows: vec![
                AblationReport { platform: Platform::NeuralSymbolic, percent_correct: Some(round1(100.0 * 380.0 / 527.0)), ..fixture_row() },
                AblationReport { platform: Platform::Neural, unknown: Some(76), percent_correct: Some(round1(100.0 * 63.0 / 76.0)), ..AblationReport::unavailable(Platform::Neural) },
                fixture_row(),
            ],
            ..EvaluationReport::default()
        };
        let from_json = parse_json(&render_json(&report)).unwrap();
        assert_eq!(from_json, report);
        let rows = parse_tsv(&render_tsv(&from_json.rows)).unwrap();
        let expected: Vec<TableRow> = report.rows.iter().map(TableRow::from).collect();
        assert_eq!(rows, expected);
    }

    #[test]
    fn matthews_known_values() {
        assert_eq!(matthews(&[true, false], &[true, false]), Some(1.0));
        assert_eq!(matthews(&[false, true], &[true, false]), Some(-1.0));
        assert_eq!(matthews(&[true, true], &[true, false]), None);
    }

    #[test]
    fn misaligned_ids_are_rejected() {
        let ds = vec![LabeledExample { id: "1".into(), text: "A b.".into(), acceptable: true }];
        let p = crate::ingest::read_conllu("# sent_id = 9\n1\tA\t_\t_\t_\t_\t0\troot\t_\t_\n".as_bytes(), &Default::default()).unwrap();
        assert!(matches!(evaluate(&ds, &p, &PipelineConfig::default(), None), Err(EvalError::AlignmentError { .. })));
        assert!(matches!(evaluate(&ds, &[], &PipelineConfig::default(), None), Err(EvalError::AlignmentError { .. })));
    }
}
