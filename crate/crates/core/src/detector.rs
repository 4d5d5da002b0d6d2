//! Sentence type detection.
//!
//! The detector counts subject and object relations in a parse, scans the
//! sentence text for clause connectors and applies a fixed five-rule
//! decision list:
//!
//! 1. no subject or no object: [`SentenceType::Unknown`]
//! 2. compound and complex connectors both present: compound-complex
//! 3. compound connector present: compound
//! 4. complex connector present: complex
//! 5. otherwise: simple
//!
//! It also groups subject/object arcs sharing a head into [`Scene`]s.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::types::{ConnectorCatalogue, LabelPolicy, ParsedSentence, SentenceType, Token};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RelationCounts {
    pub subjects: usize,
    pub objects: usize,
    pub compounds: usize,
}

pub fn count_relations(sentence: &ParsedSentence, policy: &LabelPolicy) -> RelationCounts {
    sentence
        .arcs()
        .iter()
        .fold(RelationCounts::default(), |mut acc, arc| {
            if policy.is_subject(&arc.label) {
                acc.subjects += 1;
            } else if policy.is_object(&arc.label) {
                acc.objects += 1;
            }
            if policy.is_compound(&arc.label) {
                acc.compounds += 1;
            }
            acc
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectorKind {
    Compound,
    Complex,
}

/// A connector occurrence. `offset` counts characters in the case-folded
/// sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConnectorHit {
    pub pattern: String,
    pub offset: usize,
}

impl fmt::Display for ConnectorHit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@{}", self.pattern, self.offset)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConnectorFlags {
    pub compound_hits: Vec<ConnectorHit>,
    pub complex_hits: Vec<ConnectorHit>,
}

impl ConnectorFlags {
    pub fn is_empty(&self) -> bool {
        self.compound_hits.is_empty() && self.complex_hits.is_empty()
    }
}

/// Letter-initial patterns need a word boundary in front of them.
pub(crate) fn requires_boundary(pattern: &[char]) -> bool {
    pattern.first().is_some_and(|c| c.is_alphabetic())
}

pub(crate) fn at_boundary(folded: &[char], offset: usize) -> bool {
    offset == 0 || !folded[offset - 1].is_alphabetic()
}

struct Candidate {
    chars: Vec<char>,
    kind: ConnectorKind,
}

/// Patterns bucketed by their first character. Within a bucket, longer
/// patterns come first so that e.g. "even though " wins over "though ".
struct PatternIndex {
    by_first: HashMap<char, Vec<Candidate>>,
}

impl PatternIndex {
    fn new(catalogue: &ConnectorCatalogue) -> Self {
        let mut by_first: HashMap<char, Vec<Candidate>> = HashMap::new();
        let tagged = catalogue
            .compound()
            .iter()
            .map(|p| (p, ConnectorKind::Compound))
            .chain(catalogue.complex().iter().map(|p| (p, ConnectorKind::Complex)));
        for (pattern, kind) in tagged {
            let chars: Vec<char> = pattern.chars().collect();
            if let Some(&first) = chars.first() {
                by_first.entry(first).or_default().push(Candidate { chars, kind });
            }
        }
        for bucket in by_first.values_mut() {
            // stable: equal lengths keep compound-before-complex catalogue order
            bucket.sort_by_key(|c| std::cmp::Reverse(c.chars.len()));
        }
        PatternIndex { by_first }
    }
}

/// Finds all non-overlapping connector occurrences, scanning left to right.
///
/// Matching runs on a lowercased copy of `text`. At each offset the longest
/// matching pattern is taken and the scan resumes after it.
pub fn match_connectors(text: &str, catalogue: &ConnectorCatalogue) -> ConnectorFlags {
    let index = PatternIndex::new(catalogue);
    let folded: Vec<char> = text.to_lowercase().chars().collect();
    let mut flags = ConnectorFlags::default();
    let mut i = 0;
    while i < folded.len() {
        let hit = index.by_first.get(&folded[i]).and_then(|bucket| {
            bucket.iter().find(|c| {
                folded[i..].starts_with(&c.chars)
                    && (!requires_boundary(&c.chars) || at_boundary(&folded, i))
            })
        });
        match hit {
            Some(c) => {
                let record = ConnectorHit {
                    pattern: c.chars.iter().collect(),
                    offset: i,
                };
                match c.kind {
                    ConnectorKind::Compound => flags.compound_hits.push(record),
                    ConnectorKind::Complex => flags.complex_hits.push(record),
                }
                i += c.chars.len();
            }
            None => i += 1,
        }
    }
    flags
}

/// One consulted rule in a type decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleRecord {
    pub rule: u8,
    pub fired: bool,
    pub details: String,
}

impl fmt::Display for RuleRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RULE{}: {} {}",
            self.rule,
            if self.fired { "fired" } else { "skipped" },
            self.details
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeDecision {
    pub sentence_type: SentenceType,
    pub rule: u8,
    pub counts: RelationCounts,
    pub flags: ConnectorFlags,
    pub trace: Vec<RuleRecord>,
}

impl TypeDecision {
    /// Line-oriented rendering, one `RULE<k>: ...` line per consulted rule.
    pub fn render_trace(&self) -> String {
        let mut out = String::new();
        for record in &self.trace {
            let _ = writeln!(out, "{record}");
        }
        out
    }
}

fn list_hits(hits: &[ConnectorHit]) -> String {
    let parts: Vec<String> = hits.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(", "))
}

/// Applies the decision list to a counted and flagged sentence.
pub fn decide(counts: RelationCounts, flags: ConnectorFlags) -> TypeDecision {
    let mut trace = Vec::with_capacity(5);
    let count_details = format!(
        "subjects={} objects={} compounds={}",
        counts.subjects, counts.objects, counts.compounds
    );
    let compound = !flags.compound_hits.is_empty();
    let complex = !flags.complex_hits.is_empty();
    let flag_details = format!(
        "compound={} complex={}",
        list_hits(&flags.compound_hits),
        list_hits(&flags.complex_hits)
    );

    let outcomes = [
        (counts.subjects == 0 || counts.objects == 0, SentenceType::Unknown, &count_details),
        (compound && complex, SentenceType::CompoundComplex, &flag_details),
        (compound, SentenceType::Compound, &flag_details),
        (complex, SentenceType::Complex, &flag_details),
        (true, SentenceType::Simple, &flag_details),
    ];
    for (rule, (fires, sentence_type, details)) in (1u8..).zip(outcomes) {
        trace.push(RuleRecord {
            rule,
            fired: fires,
            details: details.clone(),
        });
        if fires {
            return TypeDecision {
                sentence_type,
                rule,
                counts,
                flags,
                trace,
            };
        }
    }
    unreachable!("rule 5 always fires")
}

pub fn classify_type(
    sentence: &ParsedSentence,
    policy: &LabelPolicy,
    catalogue: &ConnectorCatalogue,
) -> TypeDecision {
    let counts = count_relations(sentence, policy);
    let flags = match_connectors(sentence.text(), catalogue);
    decide(counts, flags)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ArgumentSlot {
    Subject = 1,
    Object = 2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SceneArgument {
    pub token: Token,
    pub slot: ArgumentSlot,
}

/// A predicate with its subject (slot 1) and object (slot 2) arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Scene {
    pub predicate: Token,
    pub arguments: Vec<SceneArgument>,
}

impl fmt::Display for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate.surface)?;
        for (i, arg) in self.arguments.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}", arg.token.surface, arg.slot as u8)?;
        }
        f.write_str(")")
    }
}

/// Builds one scene per head token that governs at least one subject.
/// Scenes are ordered by predicate position; arguments by slot, then by
/// position.
pub fn extract_scenes(sentence: &ParsedSentence, policy: &LabelPolicy) -> Vec<Scene> {
    let mut by_head: BTreeMap<usize, Vec<(ArgumentSlot, usize)>> = BTreeMap::new();
    for arc in sentence.arcs().iter().filter(|a| a.head != 0) {
        let slot = if policy.is_subject(&arc.label) {
            ArgumentSlot::Subject
        } else if policy.is_object(&arc.label) {
            ArgumentSlot::Object
        } else {
            continue;
        };
        by_head.entry(arc.head).or_default().push((slot, arc.dependent));
    }
    by_head
        .into_iter()
        .filter(|(_, args)| args.iter().any(|(slot, _)| *slot == ArgumentSlot::Subject))
        .filter_map(|(head, mut args)| {
            args.sort();
            let predicate = sentence.token(head)?.clone();
            let arguments = args
                .into_iter()
                .filter_map(|(slot, dep)| {
                    sentence.token(dep).map(|t| SceneArgument {
                        token: t.clone(),
                        slot,
                    })
                })
                .collect();
            Some(Scene {
                predicate,
                arguments,
            })
        })
        .collect()
}
