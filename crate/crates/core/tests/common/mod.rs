#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use grammargate::detector::{ConnectorFlags, ConnectorHit};
use grammargate::ingest::LabeledExample;
use grammargate::scorer::{AcceptabilityScore, Scorer, ScorerError};
use grammargate::types::{DEFAULT_COMPLEX_CONNECTORS, DEFAULT_COMPOUND_CONNECTORS};
use grammargate::{DependencyArc, LabelPolicy, ParsedSentence, SentenceType, Token};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn python_cmd(script: &str, mode: &str) -> Vec<String> {
    vec!["python3".into(), fixture(script).display().to_string(), mode.into()]
}

pub fn python_cmd_line(script: &str, mode: &str) -> String {
    format!("python3 {} {mode}", fixture(script).display())
}

/// Rule procedure written out directly from the rule list.
pub fn oracle_type(subjects: usize, objects: usize, compound: bool, complex: bool) -> SentenceType {
    if subjects == 0 || objects == 0 {
        SentenceType::Unknown
    } else if compound && complex {
        SentenceType::CompoundComplex
    } else if compound {
        SentenceType::Compound
    } else if complex {
        SentenceType::Complex
    } else {
        SentenceType::Simple
    }
}

/// Exhaustive connector scanner: collect every boundary-respecting
/// occurrence of every pattern, then keep a left-to-right, non-overlapping
/// selection preferring the longest pattern at each start.
pub fn brute_force_scan(text: &str, compound: &[&str], complex: &[&str]) -> ConnectorFlags {
    let folded: Vec<char> = text.to_lowercase().chars().collect();
    let mut candidates: Vec<(usize, usize, usize, bool, String)> = Vec::new();
    for (order, (pattern, is_compound)) in compound
        .iter()
        .map(|p| (*p, true))
        .chain(complex.iter().map(|p| (*p, false)))
        .enumerate()
    {
        let p: Vec<char> = pattern.to_lowercase().chars().collect();
        if p.is_empty() || p.len() > folded.len() {
            continue;
        }
        for start in 0..=folded.len() - p.len() {
            if folded[start..start + p.len()] != p[..] {
                continue;
            }
            let needs_boundary = p[0].is_alphabetic();
            if needs_boundary && start > 0 && folded[start - 1].is_alphabetic() {
                continue;
            }
            candidates.push((start, p.len(), order, is_compound, p.iter().collect()));
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
    let mut flags = ConnectorFlags::default();
    let mut cursor = 0;
    for (start, len, _, is_compound, pattern) in candidates {
        if start < cursor {
            continue;
        }
        let hit = ConnectorHit { pattern, offset: start };
        if is_compound {
            flags.compound_hits.push(hit);
        } else {
            flags.complex_hits.push(hit);
        }
        cursor = start + len;
    }
    flags
}

const WORDS: &[&str] = &[
    "The", "cat", "dog", "ran", "home", "quickly", "Show", "show", "sincerely", "Sincerely",
    "whomever", "Whomever", "whoever", "forsooth", "sofa", "yetis", "nor'easter", "butter",
    "Andes", "oration", "ifs", "unlessly", "asleep", "beforehand", "whence", "Wherever",
    "thus", "É", "straße", "İstanbul", "émigré", "ORACLE",
];

const GLUE: &[&str] = &[" ", " ", " ", ", ", "; ", "", "-", "'", " (", ") ", "\t", ",  "];

fn random_case(rng: &mut impl Rng, s: &str) -> String {
    match rng.gen_range(0..4) {
        0 => s.to_uppercase(),
        1 => {
            let mut c = s.chars();
            c.next()
                .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                .unwrap_or_default()
        }
        _ => s.to_string(),
    }
}

/// A sentence mixing catalogue connectors, boundary traps and glue that
/// sometimes fuses a connector onto the preceding word.
pub fn random_sentence(rng: &mut impl Rng) -> String {
    let mut out = String::new();
    let pieces = rng.gen_range(2..16);
    for _ in 0..pieces {
        let piece = match rng.gen_range(0..10) {
            0..=2 => DEFAULT_COMPOUND_CONNECTORS.choose(rng).unwrap().to_string(),
            3..=5 => DEFAULT_COMPLEX_CONNECTORS.choose(rng).unwrap().to_string(),
            _ => WORDS.choose(rng).unwrap().to_string(),
        };
        out.push_str(&random_case(rng, &piece));
        out.push_str(GLUE.choose(rng).unwrap());
    }
    if rng.gen_bool(0.8) {
        out.push('.');
    }
    out
}

/// A parse with a root verb, `subjects` nsubj dependents and `objects` dobj
/// dependents. Tokens are placeholders; only the arcs matter to the detector.
pub fn synthetic_parse(id: &str, text: &str, subjects: usize, objects: usize) -> ParsedSentence {
    let policy = LabelPolicy::default();
    let n = 1 + subjects + objects;
    let tokens: Vec<Token> = (1..=n).map(|i| Token::new(i, format!("w{i}"))).collect();
    let mut arcs = vec![DependencyArc::new(0, 1, "root", &policy).unwrap()];
    for d in 2..2 + subjects {
        arcs.push(DependencyArc::new(1, d, "nsubj", &policy).unwrap());
    }
    for d in 2 + subjects..=n {
        arcs.push(DependencyArc::new(1, d, "dobj", &policy).unwrap());
    }
    ParsedSentence::new(id, text, tokens, arcs).unwrap()
}

/// Clause text carrying the requested connector kinds.
pub fn clause_text(stem: &str, compound: bool, complex: bool) -> String {
    let mut s = stem.to_string();
    if complex {
        s.push_str(" because it rained");
    }
    if compound {
        s.push_str(", and the bird sang");
    }
    s.push('.');
    s
}

/// Deterministic scorer stub that counts how many sentences it scored.
pub struct CountingScorer {
    pub calls: AtomicUsize,
    pub score: fn(&str) -> f64,
}

impl CountingScorer {
    pub fn new(score: fn(&str) -> f64) -> Self {
        CountingScorer {
            calls: AtomicUsize::new(0),
            score,
        }
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Scorer for CountingScorer {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<AcceptabilityScore>, ScorerError> {
        self.calls.fetch_add(texts.len(), Ordering::SeqCst);
        Ok(texts
            .iter()
            .map(|t| AcceptabilityScore::new((self.score)(t)).unwrap())
            .collect())
    }

    fn threshold(&self) -> f64 {
        0.5
    }

    fn describe(&self) -> String {
        "counting stub".into()
    }
}

/// Score from the text alone: high when the text length is even.
pub fn parity_score(text: &str) -> f64 {
    if text.chars().count().is_multiple_of(2) {
        0.8
    } else {
        0.2
    }
}

pub struct FixtureItem {
    pub example: LabeledExample,
    pub parse: ParsedSentence,
    pub expected: SentenceType,
    pub surface_fail: bool,
}

/// 527 sentences with synthetic parses: 76 untyped (10 of them failing the
/// surface check), 270 simple, 41 compound, 116 complex, 24
/// compound-complex. Gold labels follow a fixed pattern per index.
pub fn fixture_527() -> Vec<FixtureItem> {
    let plan: [(SentenceType, usize); 5] = [
        (SentenceType::Unknown, 76),
        (SentenceType::Simple, 270),
        (SentenceType::Compound, 41),
        (SentenceType::Complex, 116),
        (SentenceType::CompoundComplex, 24),
    ];
    let mut items = Vec::new();
    for (t, n) in plan {
        for k in 0..n {
            let id = (items.len() + 1).to_string();
            let gold = (items.len() * 7) % 10 < 6;
            let (text, subjects, objects, surface_fail) = match t {
                SentenceType::Unknown if k < 10 => (format!("the dog {k} slept"), 1, 0, true),
                SentenceType::Unknown => (format!("Dog {k} slept{}.", "!".repeat(k % 3)), 1, 0, false),
                _ => {
                    let compound = matches!(t, SentenceType::Compound | SentenceType::CompoundComplex);
                    let complex = matches!(t, SentenceType::Complex | SentenceType::CompoundComplex);
                    let stem = format!("The cat {k} chased the dog{}", " x".repeat(k % 2));
                    (clause_text(&stem, compound, complex), 1 + k % 2, 1, false)
                }
            };
            items.push(FixtureItem {
                parse: synthetic_parse(&id, &text, subjects, objects),
                example: LabeledExample {
                    id,
                    text,
                    acceptable: gold,
                },
                expected: t,
                surface_fail,
            });
        }
    }
    items
}
