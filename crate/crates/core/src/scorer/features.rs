//! Hashed character and word n-gram features.
//!
//! Every gram is keyed by a namespace prefix (`c:` for character grams,
//! `w:` for word grams) followed by the gram text, hashed with 64-bit FNV-1a
//! and reduced modulo `2^bits`. The hash is fixed so a saved model scores
//! identically on any machine.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::ScorerError;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub const MAX_BITS: u32 = 28;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Inclusive range of n-gram orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orders {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureRecipe {
    pub char_orders: Option<Orders>,
    pub word_orders: Option<Orders>,
    pub lowercase: bool,
}

impl Default for FeatureRecipe {
    fn default() -> Self {
        FeatureRecipe {
            char_orders: Some(Orders { min: 3, max: 5 }),
            word_orders: Some(Orders { min: 1, max: 2 }),
            lowercase: true,
        }
    }
}

impl FeatureRecipe {
    pub fn chars(min: usize, max: usize) -> Self {
        FeatureRecipe {
            char_orders: Some(Orders { min, max }),
            word_orders: None,
            lowercase: true,
        }
    }

    pub fn words(min: usize, max: usize) -> Self {
        FeatureRecipe {
            char_orders: None,
            word_orders: Some(Orders { min, max }),
            lowercase: true,
        }
    }
}

fn fmt_orders(o: Option<Orders>) -> String {
    match o {
        Some(o) => format!("{}-{}", o.min, o.max),
        None => "none".to_string(),
    }
}

/// `char=3-5;word=1-2;lowercase=true`
impl fmt::Display for FeatureRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "char={};word={};lowercase={}",
            fmt_orders(self.char_orders),
            fmt_orders(self.word_orders),
            self.lowercase
        )
    }
}

impl FromStr for FeatureRecipe {
    type Err = ScorerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| ScorerError::InvalidModel(format!("recipe {s:?}: {why}"));
        let orders = |v: &str| -> Result<Option<Orders>, ScorerError> {
            if v == "none" {
                return Ok(None);
            }
            let (a, b) = v.split_once('-').ok_or_else(|| bad("orders must look like 3-5"))?;
            let min: usize = a.parse().map_err(|_| bad("bad order"))?;
            let max: usize = b.parse().map_err(|_| bad("bad order"))?;
            if min == 0 || min > max {
                return Err(bad("orders must satisfy 1 <= min <= max"));
            }
            Ok(Some(Orders { min, max }))
        };
        let mut recipe = FeatureRecipe {
            char_orders: None,
            word_orders: None,
            lowercase: false,
        };
        let mut seen = [false; 3];
        for part in s.split(';') {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match key.trim() {
                "char" => {
                    recipe.char_orders = orders(value.trim())?;
                    seen[0] = true;
                }
                "word" => {
                    recipe.word_orders = orders(value.trim())?;
                    seen[1] = true;
                }
                "lowercase" => {
                    recipe.lowercase = value.trim().parse().map_err(|_| bad("lowercase must be true or false"))?;
                    seen[2] = true;
                }
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        if seen != [true; 3] {
            return Err(bad("char, word and lowercase are all required"));
        }
        Ok(recipe)
    }
}

/// Sparse vector of `(bucket, count)` pairs sorted by bucket.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseFeatures(pub Vec<(u32, f64)>);

impl SparseFeatures {
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn get(&self, bucket: u32) -> f64 {
        self.0
            .binary_search_by_key(&bucket, |&(b, _)| b)
            .map(|i| self.0[i].1)
            .unwrap_or(0.0)
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.iter().map(|(b, v)| weights[b as usize] * v).sum()
    }
}

pub fn bucket(gram_key: &str, bits: u32) -> u32 {
    let mask = (1u64 << bits) - 1;
    (fnv1a64(gram_key.as_bytes()) & mask) as u32
}

/// Bucket of a character gram under the namespacing used by [`featurize`].
pub fn char_gram_bucket(gram: &str, bits: u32) -> u32 {
    bucket(&format!("c:{gram}"), bits)
}

pub fn word_gram_bucket(gram: &str, bits: u32) -> u32 {
    bucket(&format!("w:{gram}"), bits)
}

pub fn featurize(text: &str, recipe: &FeatureRecipe, bits: u32) -> SparseFeatures {
    let text = if recipe.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    let mut key = String::new();

    if let Some(orders) = recipe.char_orders {
        let chars: Vec<char> = text.chars().collect();
        for n in orders.min..=orders.max {
            for window in chars.windows(n) {
                key.clear();
                key.push_str("c:");
                key.extend(window);
                *counts.entry(bucket(&key, bits)).or_default() += 1.0;
            }
        }
    }
    if let Some(orders) = recipe.word_orders {
        let words: Vec<&str> = text.split_whitespace().collect();
        for n in orders.min..=orders.max {
            for window in words.windows(n) {
                key.clear();
                key.push_str("w:");
                key.push_str(&window.join(" "));
                *counts.entry(bucket(&key, bits)).or_default() += 1.0;
            }
        }
    }
    SparseFeatures(counts.into_iter().collect())
}
