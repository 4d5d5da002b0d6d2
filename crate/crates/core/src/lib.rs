//! Grammatical acceptability engine.
//!
//! A sentence first passes a surface check (capitalised start, terminal
//! punctuation). Its dependency parse is then handed to a rule-based type
//! detector which counts subject and object relations and looks for clause
//! connectors, yielding one of simple, compound, complex or compound-complex.
//! Only when the detector cannot assign a type is a statistical
//! acceptability scorer consulted.
//!
//! ```
//! use grammargate::{ingest, pipeline::{Pipeline, PipelineConfig}};
//!
//! let conllu = "\
//! 1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
//! 2\tcat\tcat\tNOUN\t_\t_\t3\tnsubj\t_\t_
//! 3\tchased\tchase\tVERB\t_\t_\t0\tROOT\t_\t_
//! 4\tthe\tthe\tDET\t_\t_\t5\tdet\t_\t_
//! 5\tdog\tdog\tNOUN\t_\t_\t3\tdobj\t_\t_
//! 6\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_
//! ";
//! let cfg = PipelineConfig::default();
//! let parses = ingest::read_conllu(conllu.as_bytes(), &cfg.policy).unwrap();
//! let pipeline = Pipeline::symbolic(cfg);
//! let verdict = pipeline
//!     .validate_one("1", "The cat chased the dog.", Some(&parses[0]))
//!     .unwrap();
//! assert!(verdict.acceptable);
//! ```

pub mod config;
pub mod conformance;
pub mod detector;
pub mod eval;
pub mod ingest;
pub mod pipeline;
pub mod scorer;
pub mod types;
pub mod validator;

pub use detector::{classify_type, count_relations, extract_scenes, match_connectors};
pub use types::{
    normalize_label, ConnectorCatalogue, DependencyArc, LabelPolicy, ParsedSentence, SentenceType,
    Token,
};
pub use validator::{initial_validate, SurfaceRuleConfig};
