//! End-to-end validation: surface check, parse, type detection, and the
//! statistical fallback for sentences the detector cannot type.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::detector::classify_type;
use crate::ingest::{parse_external, IngestError, ParserAdapterConfig};
use crate::scorer::{AcceptabilityScore, RemoteScorer, Scorer, ScorerEndpoint, ScorerError, ScorerModel};
use crate::types::{ConnectorCatalogue, LabelPolicy, ParsedSentence, SentenceType};
use crate::validator::{initial_validate, SurfaceFailure, SurfaceRuleConfig};

/// Scorer requests are sent in chunks of this many sentences.
const NEURAL_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    SymbolicReject,
    SymbolicAccept,
    Neural,
}

impl Route {
    pub const ALL: [Route; 3] = [Route::SymbolicReject, Route::SymbolicAccept, Route::Neural];

    pub fn as_str(self) -> &'static str {
        match self {
            Route::SymbolicReject => "symbolic_reject",
            Route::SymbolicAccept => "symbolic_accept",
            Route::Neural => "neural",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: String,
    pub acceptable: bool,
    pub route: Route,
    pub sentence_type: SentenceType,
    /// Present exactly when `route` is [`Route::Neural`].
    pub confidence: Option<AcceptabilityScore>,
    pub trace: Vec<String>,
    /// Set when the surface check rejected the sentence.
    pub surface_failure: Option<SurfaceFailure>,
}

#[derive(Serialize)]
struct VerdictRecord<'a> {
    id: &'a str,
    acceptable: bool,
    route: Route,
    #[serde(rename = "type")]
    sentence_type: SentenceType,
    confidence: Option<f64>,
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    id: &'a str,
    trace: &'a [String],
}

impl Verdict {
    /// One-line JSON record: `{"id":..,"acceptable":..,"route":..,"type":..,"confidence":..}`.
    pub fn to_record(&self) -> String {
        serde_json::to_string(&VerdictRecord {
            id: &self.id,
            acceptable: self.acceptable,
            route: self.route,
            sentence_type: self.sentence_type,
            confidence: self.confidence.map(AcceptabilityScore::value),
        })
        .expect("verdict serialization cannot fail")
    }

    pub fn trace_record(&self) -> String {
        serde_json::to_string(&TraceRecord {
            id: &self.id,
            trace: &self.trace,
        })
        .expect("trace serialization cannot fail")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum ScorerSelection {
    #[default]
    None,
    Builtin(PathBuf),
    Remote(ScorerEndpoint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub surface: SurfaceRuleConfig,
    pub policy: LabelPolicy,
    pub catalogue: ConnectorCatalogue,
    pub scorer: ScorerSelection,
    pub neural_enabled: bool,
    /// Threshold override for the configured scorer.
    pub threshold: Option<f64>,
    pub parser: Option<ParserAdapterConfig>,
    /// Worker threads for batch validation; 1 runs inline.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            surface: SurfaceRuleConfig::default(),
            policy: LabelPolicy::default(),
            catalogue: ConnectorCatalogue::default(),
            scorer: ScorerSelection::None,
            neural_enabled: false,
            threshold: None,
            parser: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum PipelineErrorKind {
    #[error("empty sentence")]
    EmptyInput,
    #[error("no parse supplied and no external parser configured")]
    NoParser,
    #[error("parser: {0}")]
    Parser(#[from] IngestError),
    #[error("scorer: {0}")]
    Scorer(#[from] ScorerError),
    #[error("configuration: {0}")]
    Config(String),
}

/// An error tied to the sentence it happened on.
#[derive(Debug, Error)]
#[error("sentence {id}: {kind}")]
pub struct PipelineError {
    pub id: String,
    pub kind: PipelineErrorKind,
}

impl PipelineError {
    fn new(id: &str, kind: impl Into<PipelineErrorKind>) -> Self {
        PipelineError {
            id: id.to_string(),
            kind: kind.into(),
        }
    }

    /// Transport failures talking to the parser or scorer process.
    pub fn is_transport(&self) -> bool {
        matches!(
            self.kind,
            PipelineErrorKind::Parser(
                IngestError::ParserTimeout(_)
                    | IngestError::ParserCrash(_)
                    | IngestError::CountMismatch { .. }
                    | IngestError::Io(_)
            ) | PipelineErrorKind::Scorer(
                ScorerError::EndpointTimeout
                    | ScorerError::EndpointCrash(_)
                    | ScorerError::ProtocolViolation(_)
                    | ScorerError::Io(_)
            )
        )
    }
}

/// One sentence submitted for batch validation.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub id: String,
    pub text: String,
    pub parse: Option<ParsedSentence>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoutingStats {
    pub total: usize,
    pub per_type: BTreeMap<SentenceType, usize>,
    pub per_route: BTreeMap<Route, usize>,
    pub surface_failures: BTreeMap<SurfaceFailure, usize>,
    /// Sentences handed to the scorer.
    pub neural_invocations: usize,
    /// Sentences that passed the surface check and came out untyped.
    pub unknown_after_surface: usize,
    pub errors: usize,
}

impl RoutingStats {
    pub fn type_count(&self, t: SentenceType) -> usize {
        self.per_type.get(&t).copied().unwrap_or(0)
    }

    pub fn route_count(&self, r: Route) -> usize {
        self.per_route.get(&r).copied().unwrap_or(0)
    }
}

#[derive(Debug)]
pub struct BatchOutcome {
    /// One entry per input, in input order.
    pub results: Vec<Result<Verdict, PipelineError>>,
    pub stats: RoutingStats,
}

impl BatchOutcome {
    pub fn verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }
}

enum Stage {
    Done(Verdict),
    NeedsParse,
    NeedsScore {
        sentence_type: SentenceType,
        trace: Vec<String>,
    },
}

pub struct Pipeline {
    cfg: PipelineConfig,
    scorer: Option<Arc<dyn Scorer>>,
}

impl Pipeline {
    /// Rules only: untyped sentences are rejected.
    pub fn symbolic(mut cfg: PipelineConfig) -> Self {
        cfg.neural_enabled = false;
        Pipeline { cfg, scorer: None }
    }

    /// Rules plus the given scorer for untyped sentences.
    pub fn with_scorer(mut cfg: PipelineConfig, scorer: Arc<dyn Scorer>) -> Self {
        cfg.neural_enabled = true;
        Pipeline {
            cfg,
            scorer: Some(scorer),
        }
    }

    /// Builds the scorer named in `cfg.scorer`.
    pub fn from_config(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        let config_err = |msg: String| PipelineError::new("-", PipelineErrorKind::Config(msg));
        let scorer: Option<Arc<dyn Scorer>> = match &cfg.scorer {
            ScorerSelection::None => None,
            ScorerSelection::Builtin(path) => {
                let file = File::open(path)
                    .map_err(|e| config_err(format!("cannot open model {}: {e}", path.display())))?;
                let mut model = ScorerModel::load(file).map_err(|e| PipelineError::new("-", e))?;
                if let Some(t) = cfg.threshold {
                    model = model.with_threshold(t).map_err(|e| PipelineError::new("-", e))?;
                }
                Some(Arc::new(model))
            }
            ScorerSelection::Remote(endpoint) => {
                let remote = RemoteScorer::new(endpoint.clone())
                    .with_threshold(cfg.threshold.unwrap_or(0.5));
                Some(Arc::new(remote))
            }
        };
        if cfg.neural_enabled && scorer.is_none() {
            return Err(config_err("neural part enabled but no scorer configured".into()));
        }
        let scorer = if cfg.neural_enabled { scorer } else { None };
        Ok(Pipeline { cfg, scorer })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn scorer(&self) -> Option<&Arc<dyn Scorer>> {
        self.scorer.as_ref()
    }

    pub fn neural_enabled(&self) -> bool {
        self.scorer.is_some()
    }

    fn symbolic_stage(&self, id: &str, text: &str, parse: Option<&ParsedSentence>) -> Result<Stage, PipelineError> {
        let cfg = &self.cfg;
        let mut trace = Vec::new();
        match initial_validate(text, &cfg.surface) {
            Err(_) => return Err(PipelineError::new(id, PipelineErrorKind::EmptyInput)),
            Ok(Some(reason)) => {
                trace.push(format!("VALIDATOR: fail {reason} -> reject"));
                return Ok(Stage::Done(Verdict {
                    id: id.to_string(),
                    acceptable: false,
                    route: Route::SymbolicReject,
                    sentence_type: SentenceType::Unknown,
                    confidence: None,
                    trace,
                    surface_failure: Some(reason),
                }));
            }
            Ok(None) => trace.push("VALIDATOR: pass".to_string()),
        }
        let Some(parse) = parse else {
            return Ok(Stage::NeedsParse);
        };
        let decision = classify_type(parse, &cfg.policy, &cfg.catalogue);
        trace.extend(decision.trace.iter().map(ToString::to_string));
        if decision.sentence_type.is_typed() {
            trace.push(format!(
                "DECISION: detector RULE{} typed the sentence {} -> accept",
                decision.rule, decision.sentence_type
            ));
            return Ok(Stage::Done(Verdict {
                id: id.to_string(),
                acceptable: true,
                route: Route::SymbolicAccept,
                sentence_type: decision.sentence_type,
                confidence: None,
                trace,
                surface_failure: None,
            }));
        }
        if self.scorer.is_none() {
            trace.push("DECISION: detector RULE1 left the type unknown, neural part disabled -> reject".to_string());
            return Ok(Stage::Done(Verdict {
                id: id.to_string(),
                acceptable: false,
                route: Route::SymbolicReject,
                sentence_type: SentenceType::Unknown,
                confidence: None,
                trace,
                surface_failure: None,
            }));
        }
        Ok(Stage::NeedsScore {
            sentence_type: decision.sentence_type,
            trace,
        })
    }

    fn neural_verdict(
        &self,
        id: &str,
        sentence_type: SentenceType,
        mut trace: Vec<String>,
        score: AcceptabilityScore,
    ) -> Verdict {
        let threshold = self.scorer.as_ref().map_or(0.5, |s| s.threshold());
        let acceptable = score.value() >= threshold;
        trace.push(format!(
            "SCORER: score={} threshold={} -> {}",
            score,
            threshold,
            if acceptable { "accept" } else { "reject" }
        ));
        Verdict {
            id: id.to_string(),
            acceptable,
            route: Route::Neural,
            sentence_type,
            confidence: Some(score),
            trace,
            surface_failure: None,
        }
    }

    fn parse_one(&self, id: &str, text: &str) -> Result<ParsedSentence, PipelineError> {
        let parser = self
            .cfg
            .parser
            .as_ref()
            .ok_or_else(|| PipelineError::new(id, PipelineErrorKind::NoParser))?;
        let mut parsed = parse_external(&[text.to_string()], parser, &self.cfg.policy)
            .map_err(|e| PipelineError::new(id, e))?;
        Ok(parsed.remove(0).with_id(id))
    }

    pub fn validate_one(
        &self,
        id: &str,
        text: &str,
        parse: Option<&ParsedSentence>,
    ) -> Result<Verdict, PipelineError> {
        let mut stage = self.symbolic_stage(id, text, parse)?;
        if let Stage::NeedsParse = stage {
            let parsed = self.parse_one(id, text)?;
            stage = self.symbolic_stage(id, text, Some(&parsed))?;
        }
        match stage {
            Stage::Done(v) => Ok(v),
            Stage::NeedsParse => unreachable!("parse was supplied"),
            Stage::NeedsScore {
                sentence_type,
                trace,
            } => {
                let scorer = self.scorer.as_ref().expect("NeedsScore implies a scorer");
                let score = scorer
                    .score_batch(&[text.to_string()])
                    .map_err(|e| PipelineError::new(id, e))?
                    .into_iter()
                    .next()
                    .ok_or_else(|| {
                        PipelineError::new(id, ScorerError::ProtocolViolation("no score returned".into()))
                    })?;
                Ok(self.neural_verdict(id, sentence_type, trace, score))
            }
        }
    }

    fn run_symbolic(&self, items: &[BatchItem], parses: &[Option<&ParsedSentence>]) -> Vec<Result<Stage, PipelineError>> {
        let work = |(item, parse): (&BatchItem, &Option<&ParsedSentence>)| {
            self.symbolic_stage(&item.id, &item.text, *parse)
        };
        if self.cfg.jobs > 1 {
            match rayon::ThreadPoolBuilder::new().num_threads(self.cfg.jobs).build() {
                Ok(pool) => pool.install(|| items.par_iter().zip(parses.par_iter()).map(work).collect()),
                Err(_) => items.iter().zip(parses).map(work).collect(),
            }
        } else {
            items.iter().zip(parses).map(work).collect()
        }
    }

    /// Validates every item. Errors stay attached to their item; the batch
    /// always runs to completion. Results keep input order.
    pub fn validate_batch(&self, items: &[BatchItem]) -> BatchOutcome {
        let supplied: Vec<Option<&ParsedSentence>> = items.iter().map(|i| i.parse.as_ref()).collect();
        let mut stages = self.run_symbolic(items, &supplied);

        // parse whatever passed the surface check without a supplied parse
        let missing: Vec<usize> = stages
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Ok(Stage::NeedsParse)))
            .map(|(i, _)| i)
            .collect();
        if !missing.is_empty() {
            let texts: Vec<String> = missing.iter().map(|&i| items[i].text.clone()).collect();
            let parsed = match &self.cfg.parser {
                None => Err(PipelineErrorKind::NoParser),
                Some(parser) => parse_external(&texts, parser, &self.cfg.policy).map_err(PipelineErrorKind::from),
            };
            match parsed {
                Ok(parsed) => {
                    let reparsed: Vec<ParsedSentence> = parsed
                        .into_iter()
                        .zip(&missing)
                        .map(|(p, &i)| p.with_id(items[i].id.clone()))
                        .collect();
                    for (p, &i) in reparsed.iter().zip(&missing) {
                        stages[i] = self.symbolic_stage(&items[i].id, &items[i].text, Some(p));
                    }
                }
                Err(kind) => {
                    for &i in &missing {
                        stages[i] = Err(PipelineError::new(&items[i].id, kind.clone()));
                    }
                }
            }
        }

        let mut stats = RoutingStats {
            total: items.len(),
            ..RoutingStats::default()
        };
        let mut results: Vec<Option<Result<Verdict, PipelineError>>> = Vec::with_capacity(items.len());
        let mut pending: Vec<(usize, SentenceType, Vec<String>)> = Vec::new();
        for (i, stage) in stages.into_iter().enumerate() {
            match stage {
                Ok(Stage::Done(v)) => results.push(Some(Ok(v))),
                Ok(Stage::NeedsScore {
                    sentence_type,
                    trace,
                }) => {
                    pending.push((i, sentence_type, trace));
                    results.push(None);
                }
                Ok(Stage::NeedsParse) => unreachable!("all parses resolved above"),
                Err(e) => results.push(Some(Err(e))),
            }
        }

        if let Some(scorer) = &self.scorer {
            for chunk in pending.chunks(NEURAL_CHUNK) {
                let texts: Vec<String> = chunk.iter().map(|(i, _, _)| items[*i].text.clone()).collect();
                stats.neural_invocations += texts.len();
                match scorer.score_batch(&texts) {
                    Ok(scores) if scores.len() == chunk.len() => {
                        for ((i, t, trace), score) in chunk.iter().cloned().zip(scores) {
                            results[i] = Some(Ok(self.neural_verdict(&items[i].id, t, trace, score)));
                        }
                    }
                    Ok(scores) => {
                        for (i, _, _) in chunk {
                            let e = ScorerError::ProtocolViolation(format!(
                                "{} scores for {} sentences",
                                scores.len(),
                                chunk.len()
                            ));
                            results[*i] = Some(Err(PipelineError::new(&items[*i].id, e)));
                        }
                    }
                    Err(e) => {
                        for (i, _, _) in chunk {
                            results[*i] = Some(Err(PipelineError::new(&items[*i].id, e.clone())));
                        }
                    }
                }
            }
        }

        let results: Vec<Result<Verdict, PipelineError>> = results
            .into_iter()
            .map(|r| r.expect("every item resolved"))
            .collect();
        for r in &results {
            match r {
                Ok(v) => {
                    *stats.per_type.entry(v.sentence_type).or_default() += 1;
                    *stats.per_route.entry(v.route).or_default() += 1;
                    if let Some(reason) = v.surface_failure {
                        *stats.surface_failures.entry(reason).or_default() += 1;
                    } else if v.sentence_type == SentenceType::Unknown {
                        stats.unknown_after_surface += 1;
                    }
                }
                Err(_) => stats.errors += 1,
            }
        }
        BatchOutcome { results, stats }
    }
}
