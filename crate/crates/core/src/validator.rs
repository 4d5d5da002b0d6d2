//! Surface-pattern gate applied before any parsing: a sentence must start
//! with a capital letter and end with a terminal separator.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const OPENING_QUOTES: &[char] = &['"', '\'', '`', '\u{201C}', '\u{2018}', '\u{00AB}'];
const CLOSING_QUOTES: &[char] = &['"', '\'', '\u{201D}', '\u{2019}', '\u{00BB}'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceRuleConfig {
    pub terminators: BTreeSet<char>,
    pub allow_leading_quote: bool,
    pub min_tokens: usize,
}

impl Default for SurfaceRuleConfig {
    fn default() -> Self {
        SurfaceRuleConfig {
            terminators: ['.', '!', '?'].into_iter().collect(),
            allow_leading_quote: true,
            min_tokens: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurfaceFailure {
    StartNotCapital,
    NoTerminator,
    TooShort,
}

impl SurfaceFailure {
    pub const ALL: [SurfaceFailure; 3] = [
        SurfaceFailure::StartNotCapital,
        SurfaceFailure::NoTerminator,
        SurfaceFailure::TooShort,
    ];
}

impl fmt::Display for SurfaceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurfaceFailure::StartNotCapital => "StartNotCapital",
            SurfaceFailure::NoTerminator => "NoTerminator",
            SurfaceFailure::TooShort => "TooShort",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("sentence is empty after trimming whitespace")]
pub struct EmptyInput;

/// Returns `Ok(None)` when `text` passes, or the first violated rule.
///
/// Rules are checked in a fixed order: capitalised start, terminator,
/// minimum whitespace-token count.
pub fn initial_validate(
    text: &str,
    cfg: &SurfaceRuleConfig,
) -> Result<Option<SurfaceFailure>, EmptyInput> {
    let text = text.trim();
    if text.is_empty() {
        return Err(EmptyInput);
    }

    let head = if cfg.allow_leading_quote {
        text.trim_start_matches(OPENING_QUOTES)
    } else {
        text
    };
    if !head.chars().next().is_some_and(char::is_uppercase) {
        return Ok(Some(SurfaceFailure::StartNotCapital));
    }

    let tail = text.trim_end_matches(CLOSING_QUOTES);
    if !tail
        .chars()
        .next_back()
        .is_some_and(|c| cfg.terminators.contains(&c))
    {
        return Ok(Some(SurfaceFailure::NoTerminator));
    }

    if text.split_whitespace().count() < cfg.min_tokens {
        return Ok(Some(SurfaceFailure::TooShort));
    }
    Ok(None)
}
