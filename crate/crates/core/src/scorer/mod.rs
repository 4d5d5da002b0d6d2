//! Acceptability scoring: the statistical fallback consulted when the
//! detector cannot type a sentence.
//!
//! Two implementations share the [`Scorer`] trait: a built-in logistic
//! regression over hashed n-grams ([`ScorerModel`]) and a client for
//! external scoring services speaking a line-delimited JSON protocol
//! ([`RemoteScorer`]).

mod features;
mod model;
mod remote;

use std::fmt;
use std::io;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub use features::{
    bucket, char_gram_bucket, featurize, fnv1a64, word_gram_bucket, FeatureRecipe, Orders,
    SparseFeatures, MAX_BITS,
};
pub use model::{sigmoid, train, ScorerModel, TrainConfig, MODEL_HEADER};
pub use remote::{
    RawExchange, RemoteScorer, ScoreRequest, ScoreResponse, ScorerEndpoint, Transport,
};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("training data contains a single label class")]
    DegenerateData,
    #[error("scorer endpoint timed out")]
    EndpointTimeout,
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("scorer endpoint crashed: {0}")]
    EndpointCrash(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Clone for ScorerError {
    fn clone(&self) -> Self {
        match self {
            ScorerError::InvalidModel(s) => ScorerError::InvalidModel(s.clone()),
            ScorerError::DegenerateData => ScorerError::DegenerateData,
            ScorerError::EndpointTimeout => ScorerError::EndpointTimeout,
            ScorerError::ProtocolViolation(s) => ScorerError::ProtocolViolation(s.clone()),
            ScorerError::EndpointCrash(s) => ScorerError::EndpointCrash(s.clone()),
            ScorerError::Io(e) => ScorerError::Io(io::Error::new(e.kind(), e.to_string())),
        }
    }
}

/// A value in `[0, 1]`; higher means more confidently acceptable.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AcceptabilityScore(f64);

impl AcceptabilityScore {
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(AcceptabilityScore(value))
    }

    /// Clamps into range; the flag reports whether clamping happened.
    /// Returns `None` for NaN.
    pub fn clamped(value: f64) -> Option<(Self, bool)> {
        if value.is_nan() {
            return None;
        }
        let c = value.clamp(0.0, 1.0);
        Some((AcceptabilityScore(c), c != value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for AcceptabilityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for AcceptabilityScore {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

/// Anything that can score sentences for acceptability.
pub trait Scorer: Send + Sync {
    /// Scores every text, preserving order.
    fn score_batch(&self, texts: &[String]) -> Result<Vec<AcceptabilityScore>, ScorerError>;

    /// Scores at or above this value are accepted.
    fn threshold(&self) -> f64;

    fn describe(&self) -> String;
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<AcceptabilityScore>, ScorerError> {
        (**self).score_batch(texts)
    }

    fn threshold(&self) -> f64 {
        (**self).threshold()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}
