//! Built-in logistic regression scorer, its trainer and its file format.
//!
//! Model files are plain text:
//!
//! ```text
//! GRAMMARGATE-SCORER v1
//! recipe<TAB>char=3-5;word=1-2;lowercase=true
//! bits<TAB>20
//! bias<TAB>-0.25
//! threshold<TAB>0.5
//! 17<TAB>0.031
//! ...
//! ```
//!
//! Only non-zero weights are listed, in bucket order. Floats are written in
//! Rust's shortest round-trip form so load/save is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{featurize, FeatureRecipe, SparseFeatures, MAX_BITS};
use super::{AcceptabilityScore, Scorer, ScorerError};
use crate::ingest::LabeledExample;

pub const MODEL_HEADER: &str = "GRAMMARGATE-SCORER v1";

const LEARNING_RATE: f64 = 0.1;
const L2: f64 = 1e-6;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    bits: u32,
    weights: Vec<f64>,
    bias: f64,
    threshold: f64,
    recipe: FeatureRecipe,
}

fn check_bits(bits: u32) -> Result<(), ScorerError> {
    if bits == 0 || bits > MAX_BITS {
        return Err(ScorerError::InvalidModel(format!(
            "bits must be in 1..={MAX_BITS}, got {bits}"
        )));
    }
    Ok(())
}

fn check_threshold(t: f64) -> Result<(), ScorerError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(ScorerError::InvalidModel(format!(
            "threshold must lie strictly between 0 and 1, got {t}"
        )));
    }
    Ok(())
}

impl ScorerModel {
    /// All-zero model with the default threshold of 0.5.
    pub fn zeros(bits: u32, recipe: FeatureRecipe) -> Result<Self, ScorerError> {
        check_bits(bits)?;
        Ok(ScorerModel {
            bits,
            weights: vec![0.0; 1 << bits],
            bias: 0.0,
            threshold: 0.5,
            recipe,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, ScorerError> {
        check_threshold(threshold)?;
        self.threshold = threshold;
        Ok(self)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn recipe(&self) -> &FeatureRecipe {
        &self.recipe
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn set_bias(&mut self, bias: f64) {
        self.bias = bias;
    }

    pub fn set_weight(&mut self, bucket: u32, value: f64) {
        self.weights[bucket as usize] = value;
    }

    pub fn featurize(&self, text: &str) -> SparseFeatures {
        featurize(text, &self.recipe, self.bits)
    }

    pub fn logit(&self, text: &str) -> f64 {
        self.featurize(text).dot(&self.weights) + self.bias
    }

    pub fn score(&self, text: &str) -> AcceptabilityScore {
        AcceptabilityScore::new(sigmoid(self.logit(text)))
            .expect("sigmoid output lies in [0, 1]")
    }

    /// Partial derivatives of the score with respect to each active weight:
    /// `s * (1 - s) * x_j`. Buckets not listed have zero gradient.
    pub fn score_gradient(&self, text: &str) -> SparseFeatures {
        let x = self.featurize(text);
        let s = sigmoid(x.dot(&self.weights) + self.bias);
        let scale = s * (1.0 - s);
        SparseFeatures(x.iter().map(|(b, v)| (b, scale * v)).collect())
    }

    pub fn is_acceptable(&self, score: AcceptabilityScore) -> bool {
        score.value() >= self.threshold
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "recipe\t{}", self.recipe);
        let _ = writeln!(out, "bits\t{}", self.bits);
        let _ = writeln!(out, "bias\t{}", self.bias);
        let _ = writeln!(out, "threshold\t{}", self.threshold);
        for (bucket, w) in self.weights.iter().enumerate() {
            if *w != 0.0 {
                let _ = writeln!(out, "{bucket}\t{w}");
            }
        }
        out
    }

    pub fn load<R: Read>(source: R) -> Result<Self, ScorerError> {
        let bad = |line: usize, why: String| ScorerError::InvalidModel(format!("line {line}: {why}"));
        let lines: Vec<String> = BufReader::new(source)
            .lines()
            .map(|l| l.map(|l| l.trim_end_matches('\r').to_string()))
            .collect::<Result<_, _>>()?;
        let line = |n: usize| -> Result<&str, ScorerError> {
            lines
                .get(n - 1)
                .map(String::as_str)
                .ok_or_else(|| bad(n, "unexpected end of file".into()))
        };
        let header = line(1)?;
        if header != MODEL_HEADER {
            return Err(bad(1, format!("expected header {MODEL_HEADER:?}, found {header:?}")));
        }
        let field = |n: usize, key: &str| -> Result<&str, ScorerError> {
            match line(n)?.split_once('\t') {
                Some((k, v)) if k == key => Ok(v),
                _ => Err(bad(n, format!("expected `{key}<TAB>value`"))),
            }
        };
        let recipe: FeatureRecipe = field(2, "recipe")?.parse()?;
        let bits: u32 = field(3, "bits")?
            .parse()
            .map_err(|_| bad(3, "bits is not an integer".into()))?;
        let bias: f64 = field(4, "bias")?
            .parse()
            .map_err(|_| bad(4, "bias is not a number".into()))?;
        let threshold: f64 = field(5, "threshold")?
            .parse()
            .map_err(|_| bad(5, "threshold is not a number".into()))?;
        let mut model = ScorerModel::zeros(bits, recipe)?.with_threshold(threshold)?;
        model.bias = bias;

        for (i, line) in lines.iter().enumerate().skip(5) {
            let n = i + 1;
            if line.is_empty() {
                continue;
            }
            let (b, w) = line
                .split_once('\t')
                .ok_or_else(|| bad(n, "expected `bucket<TAB>value`".into()))?;
            let b: usize = b.parse().map_err(|_| bad(n, "bucket is not an integer".into()))?;
            let w: f64 = w.parse().map_err(|_| bad(n, "weight is not a number".into()))?;
            if b >= model.weights.len() {
                return Err(bad(n, format!("bucket {b} out of range")));
            }
            if model.weights[b] != 0.0 {
                return Err(bad(n, format!("bucket {b} listed twice")));
            }
            model.weights[b] = w;
        }
        Ok(model)
    }
}

impl Scorer for ScorerModel {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<AcceptabilityScore>, ScorerError> {
        Ok(texts.iter().map(|t| self.score(t)).collect())
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn describe(&self) -> String {
        format!("builtin linear model ({}, bits={})", self.recipe, self.bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub recipe: FeatureRecipe,
    pub bits: u32,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            recipe: FeatureRecipe::default(),
            bits: 20,
            epochs: 10,
            seed: 42,
        }
    }
}

/// Fits logistic regression by seeded, shuffled stochastic gradient descent.
///
/// Epoch `e` (from 0) uses learning rate `0.1 / (1 + e)`. The L2 penalty of
/// 1e-6 is applied to the weights touched by each example; the bias is not
/// regularised.
pub fn train(examples: &[LabeledExample], cfg: &TrainConfig) -> Result<ScorerModel, ScorerError> {
    let positives = examples.iter().filter(|e| e.acceptable).count();
    if positives == 0 || positives == examples.len() {
        return Err(ScorerError::DegenerateData);
    }
    let mut model = ScorerModel::zeros(cfg.bits, cfg.recipe)?;
    let data: Vec<(SparseFeatures, f64)> = examples
        .iter()
        .map(|e| (model.featurize(&e.text), f64::from(u8::from(e.acceptable))))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = LEARNING_RATE / (1.0 + epoch as f64);
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &data[i];
            let p = sigmoid(x.dot(&model.weights) + model.bias);
            let g = p - y;
            for (b, v) in x.iter() {
                let w = &mut model.weights[b as usize];
                *w -= lr * (g * v + L2 * *w);
            }
            model.bias -= lr * g;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::features::{char_gram_bucket, word_gram_bucket};

    fn ex(text: &str, ok: bool) -> LabeledExample {
        LabeledExample {
            id: text.into(),
            text: text.into(),
            acceptable: ok,
        }
    }

    fn separable() -> Vec<LabeledExample> {
        vec![
            ex("The dog barked loudly.", true),
            ex("She reads every book.", true),
            ex("Barked dog the loudly.", false),
            ex("Book every reads she.", false),
        ]
    }

    #[test]
    fn zero_model_scores_one_half() {
        let m = ScorerModel::zeros(8, FeatureRecipe::default()).unwrap();
        assert_eq!(m.score("Anything at all.").value(), 0.5);
        assert!(m.is_acceptable(m.score("x")));
    }

    #[test]
    fn heavy_weight_on_a_gram_saturates() {
        let mut m = ScorerModel::zeros(16, FeatureRecipe::chars(3, 3)).unwrap();
        m.set_weight(char_gram_bucket("the", 16), 10.0);
        let s = m.score("the").value();
        assert!(s > 0.99, "{s}");
        assert!((s - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn trains_to_perfect_accuracy_on_separable_fixtures() {
        let data = separable();
        let m = train(&data, &TrainConfig { bits: 16, ..TrainConfig::default() }).unwrap();
        for e in &data {
            assert_eq!(m.is_acceptable(m.score(&e.text)), e.acceptable, "{}", e.text);
        }
    }

    #[test]
    fn training_is_reproducible() {
        let cfg = TrainConfig { bits: 12, seed: 7, ..TrainConfig::default() };
        let a = train(&separable(), &cfg).unwrap();
        let b = train(&separable(), &cfg).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn single_class_is_degenerate() {
        let all_ok = vec![ex("A.", true), ex("B.", true)];
        assert!(matches!(train(&all_ok, &TrainConfig::default()), Err(ScorerError::DegenerateData)));
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let m = train(&separable(), &TrainConfig { bits: 12, ..TrainConfig::default() })
            .unwrap()
            .with_threshold(0.37)
            .unwrap();
        let loaded = ScorerModel::load(m.to_text().as_bytes()).unwrap();
        assert_eq!(loaded, m);
        for e in separable() {
            assert_eq!(loaded.score(&e.text).value().to_bits(), m.score(&e.text).value().to_bits());
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        assert!(ScorerModel::load("nope\n".as_bytes()).is_err());
        let text = format!("{MODEL_HEADER}\nrecipe\tchar=none;word=1-1;lowercase=true\nbits\t4\nbias\t0\nthreshold\t0.5\n99\t1\n");
        assert!(ScorerModel::load(text.as_bytes()).is_err());
        let text = format!("{MODEL_HEADER}\nrecipe\tchar=none;word=1-1;lowercase=true\nbits\t4\nbias\t0\nthreshold\t1.5\n");
        assert!(ScorerModel::load(text.as_bytes()).is_err());
    }

    #[test]
    fn decision_flips_exactly_at_threshold() {
        let recipe = FeatureRecipe::words(1, 1);
        let mut m = ScorerModel::zeros(10, recipe).unwrap();
        let b = word_gram_bucket("x", 10);
        m.set_weight(b, 1.25);
        let s = m.score("x").value();
        let above = m.clone().with_threshold(s - 1e-12).unwrap();
        let at = m.clone().with_threshold(s).unwrap();
        let below = m.with_threshold(s + 1e-12).unwrap();
        assert!(above.is_acceptable(above.score("x")));
        assert!(at.is_acceptable(at.score("x")));
        assert!(!below.is_acceptable(below.score("x")));
    }
}
