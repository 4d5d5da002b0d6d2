//! Shared domain types: tokens, dependency arcs, parsed sentences, the
//! sentence-type enumeration, connector catalogues and the label policy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("token surface at index {0} is empty")]
    EmptySurface(usize),
    #[error("token indices must run 1..=n without gaps; found {found} at position {position}")]
    NonContiguousTokens { position: usize, found: usize },
    #[error("arc {head}->{dependent}: {reason}")]
    InvalidArc {
        head: usize,
        dependent: usize,
        reason: &'static str,
    },
    #[error("sentence has {0} root arcs; at most one is allowed")]
    MultipleRoots(usize),
    #[error("connector pattern {0:?} is empty")]
    EmptyPattern(String),
    #[error("connector pattern {0:?} appears in both the compound and complex sets")]
    OverlappingPattern(String),
    #[error("label {0:?} is in both the subject and object sets")]
    OverlappingLabel(String),
    #[error("normalization target {0:?} is not a canonical tag")]
    NonCanonicalTarget(String),
    #[error("unknown sentence type {0:?}")]
    UnknownSentenceType(String),
}

/// One word of a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position.
    pub index: usize,
    pub surface: String,
    pub lemma: Option<String>,
    pub pos: Option<String>,
}

impl Token {
    pub fn new(index: usize, surface: impl Into<String>) -> Self {
        Token {
            index,
            surface: surface.into(),
            lemma: None,
            pos: None,
        }
    }
}

/// A head -> dependent relation. Head 0 is the artificial root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DependencyArc {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

impl DependencyArc {
    /// Builds an arc, normalizing `label` through `policy`.
    pub fn new(
        head: usize,
        dependent: usize,
        label: &str,
        policy: &LabelPolicy,
    ) -> Result<Self, CoreError> {
        let invalid = |reason| CoreError::InvalidArc {
            head,
            dependent,
            reason,
        };
        if dependent == 0 {
            return Err(invalid("dependent must be >= 1"));
        }
        if head == dependent {
            return Err(invalid("head equals dependent"));
        }
        let label = normalize_label(label, policy);
        if label.is_empty() {
            return Err(invalid("empty label"));
        }
        Ok(DependencyArc {
            head,
            dependent,
            label,
        })
    }

    pub fn is_root(&self) -> bool {
        self.head == 0
    }
}

/// A sentence with its tokens and dependency arcs.
///
/// Constructed only through [`ParsedSentence::new`], which enforces
/// referential integrity between arcs and tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedSentence {
    id: String,
    text: String,
    tokens: Vec<Token>,
    arcs: Vec<DependencyArc>,
}

impl ParsedSentence {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        tokens: Vec<Token>,
        arcs: Vec<DependencyArc>,
    ) -> Result<Self, CoreError> {
        for (position, token) in tokens.iter().enumerate() {
            if token.index != position + 1 {
                return Err(CoreError::NonContiguousTokens {
                    position: position + 1,
                    found: token.index,
                });
            }
            if token.surface.is_empty() {
                return Err(CoreError::EmptySurface(token.index));
            }
        }
        let n = tokens.len();
        for arc in &arcs {
            let invalid = |reason| CoreError::InvalidArc {
                head: arc.head,
                dependent: arc.dependent,
                reason,
            };
            if arc.dependent == 0 || arc.dependent > n {
                return Err(invalid("dependent is not a token index"));
            }
            if arc.head > n {
                return Err(invalid("head is not a token index"));
            }
            if arc.head == arc.dependent {
                return Err(invalid("head equals dependent"));
            }
            if arc.label.is_empty() || arc.label.chars().any(char::is_uppercase) {
                return Err(invalid("label must be non-empty and lowercase"));
            }
        }
        let roots = arcs.iter().filter(|a| a.is_root()).count();
        if roots > 1 {
            return Err(CoreError::MultipleRoots(roots));
        }
        Ok(ParsedSentence {
            id: id.into(),
            text: text.into(),
            tokens,
            arcs,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn arcs(&self) -> &[DependencyArc] {
        &self.arcs
    }

    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Same sentence under a different identifier.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Same parse with the original sentence string replaced.
    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SentenceType {
    Simple,
    Compound,
    Complex,
    CompoundComplex,
    Unknown,
}

impl SentenceType {
    pub const ALL: [SentenceType; 5] = [
        SentenceType::Unknown,
        SentenceType::Simple,
        SentenceType::Compound,
        SentenceType::Complex,
        SentenceType::CompoundComplex,
    ];

    pub const TYPED: [SentenceType; 4] = [
        SentenceType::Simple,
        SentenceType::Compound,
        SentenceType::Complex,
        SentenceType::CompoundComplex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SentenceType::Simple => "simple",
            SentenceType::Compound => "compound",
            SentenceType::Complex => "complex",
            SentenceType::CompoundComplex => "compound-complex",
            SentenceType::Unknown => "unknown",
        }
    }

    /// Column heading used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            SentenceType::Simple => "Simple",
            SentenceType::Compound => "Compound",
            SentenceType::Complex => "Complex",
            SentenceType::CompoundComplex => "Compound-Complex",
            SentenceType::Unknown => "Unknown",
        }
    }

    pub fn is_typed(self) -> bool {
        self != SentenceType::Unknown
    }
}

impl fmt::Display for SentenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentenceType {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SentenceType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CoreError::UnknownSentenceType(s.to_string()))
    }
}

pub const DEFAULT_COMPOUND_CONNECTORS: [&str; 13] = [
    ", for ",
    ", and ",
    ", nor ",
    ", but ",
    ", or ",
    ", yet ",
    ", so ",
    "; however,",
    "; moreover,",
    "; nevertheless,",
    "; nonetheless,",
    "; therefore,",
    "; but",
];

// "since " is listed once although the original list repeats it.
pub const DEFAULT_COMPLEX_CONNECTORS: [&str; 25] = [
    "because ",
    "since ",
    "so that ",
    "although ",
    "even though ",
    "though ",
    "whereas ",
    "while ",
    "where ",
    "wherever ",
    "how ",
    "however ",
    "if ",
    "whether ",
    "unless ",
    "that ",
    "which ",
    "who ",
    "whom ",
    "after ",
    "as ",
    "before ",
    "when ",
    "whenever ",
    "until ",
];

/// The two literal pattern sets whose matches raise the detector's flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectorCatalogue {
    compound: Vec<String>,
    complex: Vec<String>,
}

impl ConnectorCatalogue {
    /// Builds a catalogue. Patterns are lowercased; duplicates inside one set
    /// are dropped, keeping first-occurrence order.
    pub fn new<S: AsRef<str>>(compound: &[S], complex: &[S]) -> Result<Self, CoreError> {
        fn collect<S: AsRef<str>>(raw: &[S]) -> Result<Vec<String>, CoreError> {
            let mut seen = BTreeSet::new();
            let mut out = Vec::with_capacity(raw.len());
            for p in raw {
                let p = p.as_ref();
                if p.is_empty() {
                    return Err(CoreError::EmptyPattern(p.to_string()));
                }
                let folded = p.to_lowercase();
                if seen.insert(folded.clone()) {
                    out.push(folded);
                }
            }
            Ok(out)
        }
        let compound = collect(compound)?;
        let complex = collect(complex)?;
        if let Some(shared) = compound.iter().find(|p| complex.contains(p)) {
            return Err(CoreError::OverlappingPattern(shared.clone()));
        }
        Ok(ConnectorCatalogue { compound, complex })
    }

    pub fn compound(&self) -> &[String] {
        &self.compound
    }

    pub fn complex(&self) -> &[String] {
        &self.complex
    }
}

impl Default for ConnectorCatalogue {
    fn default() -> Self {
        ConnectorCatalogue::new(&DEFAULT_COMPOUND_CONNECTORS, &DEFAULT_COMPLEX_CONNECTORS)
            .expect("default connector sets are disjoint and non-empty")
    }
}

/// Which relation tags count as subjects, objects and compounds, and how
/// scheme-specific tags map onto canonical ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPolicy {
    subjects: BTreeSet<String>,
    objects: BTreeSet<String>,
    compounds: BTreeSet<String>,
    normalization: BTreeMap<String, String>,
}

impl LabelPolicy {
    pub fn new<I, J, K, M>(
        subjects: I,
        objects: J,
        compounds: K,
        normalization: M,
    ) -> Result<Self, CoreError>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
        J: IntoIterator,
        J::Item: AsRef<str>,
        K: IntoIterator,
        K::Item: AsRef<str>,
        M: IntoIterator<Item = (String, String)>,
    {
        let lower = |it: &str| it.to_lowercase();
        let normalization: BTreeMap<String, String> = normalization
            .into_iter()
            .map(|(k, v)| (lower(&k), lower(&v)))
            .collect();
        for target in normalization.values() {
            if target.is_empty() || target.contains(':') || normalization.contains_key(target) {
                return Err(CoreError::NonCanonicalTarget(target.clone()));
            }
        }
        let subjects: BTreeSet<String> = subjects.into_iter().map(|s| lower(s.as_ref())).collect();
        let objects: BTreeSet<String> = objects.into_iter().map(|s| lower(s.as_ref())).collect();
        let compounds = compounds.into_iter().map(|s| lower(s.as_ref())).collect();
        if let Some(shared) = subjects.intersection(&objects).next() {
            return Err(CoreError::OverlappingLabel(shared.clone()));
        }
        Ok(LabelPolicy {
            subjects,
            objects,
            compounds,
            normalization,
        })
    }

    pub fn is_subject(&self, label: &str) -> bool {
        self.subjects.contains(label)
    }

    pub fn is_object(&self, label: &str) -> bool {
        self.objects.contains(label)
    }

    pub fn is_compound(&self, label: &str) -> bool {
        self.compounds.contains(label)
    }

    pub fn subjects(&self) -> &BTreeSet<String> {
        &self.subjects
    }

    pub fn objects(&self) -> &BTreeSet<String> {
        &self.objects
    }

    pub fn compounds(&self) -> &BTreeSet<String> {
        &self.compounds
    }

    pub fn normalization(&self) -> &BTreeMap<String, String> {
        &self.normalization
    }
}

impl Default for LabelPolicy {
    fn default() -> Self {
        LabelPolicy::new(
            ["nsubj", "nsubjpass", "csubj", "csubjpass"],
            ["dobj", "obj", "iobj", "pobj", "dative", "attr"],
            ["compound"],
            [
                ("nsubj:pass", "nsubjpass"),
                ("csubj:pass", "csubjpass"),
                ("obj", "dobj"),
                ("obl", "pobj"),
            ]
            .map(|(k, v)| (k.to_string(), v.to_string())),
        )
        .expect("default label policy is consistent")
    }
}

/// Maps a scheme-specific relation tag to its canonical lowercase form.
///
/// Exact matches in the normalization map win; otherwise a `:subtype` suffix
/// is stripped and the base tag is looked up again. Anything else passes
/// through lowercased.
pub fn normalize_label(raw: &str, policy: &LabelPolicy) -> String {
    let lowered = raw.trim().to_lowercase();
    if let Some(mapped) = policy.normalization.get(&lowered) {
        return mapped.clone();
    }
    let base = match lowered.split_once(':') {
        Some((base, _)) => base,
        None => lowered.as_str(),
    };
    match policy.normalization.get(base) {
        Some(mapped) => mapped.clone(),
        None => base.to_string(),
    }
}
