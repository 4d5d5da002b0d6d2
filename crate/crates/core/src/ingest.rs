//! Dataset and parse ingestion: CoLA-style TSV files, CoNLL-U dependency
//! parses, and an adapter that obtains CoNLL-U from an external parser
//! process.

use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CoreError, DependencyArc, LabelPolicy, ParsedSentence, Token};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("dataset contains no valid rows ({skipped} rows skipped)")]
    EmptyDataset { skipped: usize },
    #[error("cannot resolve TSV column roles: {0}")]
    AmbiguousSchema(String),
    #[error("malformed CoNLL-U at line {line}: {reason}")]
    MalformedBlock { line: usize, reason: String },
    #[error("parser timed out after {0:?}")]
    ParserTimeout(Duration),
    #[error("parser exited with {}", match .0 { Some(c) => format!("code {c}"), None => "a signal".to_string() })]
    ParserCrash(Option<i32>),
    #[error("parser returned {got} sentences for {expected} inputs")]
    CountMismatch { expected: usize, got: usize },
    #[error("invalid parser configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Clone for IngestError {
    fn clone(&self) -> Self {
        match self {
            IngestError::EmptyDataset { skipped } => IngestError::EmptyDataset { skipped: *skipped },
            IngestError::AmbiguousSchema(s) => IngestError::AmbiguousSchema(s.clone()),
            IngestError::MalformedBlock { line, reason } => IngestError::MalformedBlock {
                line: *line,
                reason: reason.clone(),
            },
            IngestError::ParserTimeout(d) => IngestError::ParserTimeout(*d),
            IngestError::ParserCrash(c) => IngestError::ParserCrash(*c),
            IngestError::CountMismatch { expected, got } => IngestError::CountMismatch {
                expected: *expected,
                got: *got,
            },
            IngestError::InvalidConfig(s) => IngestError::InvalidConfig(s.clone()),
            IngestError::Io(e) => IngestError::Io(io::Error::new(e.kind(), e.to_string())),
        }
    }
}

/// A sentence with its gold acceptability judgement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub acceptable: bool,
}

impl LabeledExample {
    pub fn label(&self) -> u8 {
        u8::from(self.acceptable)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsvDataset {
    pub examples: Vec<LabeledExample>,
    /// Rows that did not fit the detected layout.
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    TextLabel,
    LabelText,
    /// source, label, original star annotation, sentence
    Glue,
}

fn parse_label(cell: &str) -> Option<bool> {
    match cell.trim() {
        "1" => Some(true),
        "0" => Some(false),
        _ => None,
    }
}

fn detect_layout(rows: &[Vec<&str>]) -> Result<Layout, IngestError> {
    let first = rows
        .first()
        .ok_or(IngestError::EmptyDataset { skipped: 0 })?;
    match first.len() {
        4 => Ok(Layout::Glue),
        2 => {
            let (mut text_label, mut label_text) = (0usize, 0usize);
            for row in rows.iter().filter(|r| r.len() == 2) {
                match (parse_label(row[0]), parse_label(row[1])) {
                    (None, Some(_)) => text_label += 1,
                    (Some(_), None) => label_text += 1,
                    _ => {}
                }
            }
            match text_label.cmp(&label_text) {
                std::cmp::Ordering::Greater => Ok(Layout::TextLabel),
                std::cmp::Ordering::Less => Ok(Layout::LabelText),
                std::cmp::Ordering::Equal => Err(IngestError::AmbiguousSchema(format!(
                    "{text_label} rows read as text,label and {label_text} as label,text"
                ))),
            }
        }
        n => Err(IngestError::AmbiguousSchema(format!(
            "first row has {n} columns; expected 2 or 4"
        ))),
    }
}

/// Reads CoLA-style TSV.
///
/// Two-column files (`text<TAB>label` or `label<TAB>text`) and the
/// four-column GLUE layout are recognised from the first row. A header row is
/// skipped when its label cell is not numeric. Rows that do not fit the
/// layout are counted in [`TsvDataset::skipped`]. Example ids are the 1-based
/// ordinal of each accepted row.
pub fn read_cola_tsv<R: Read>(source: R) -> Result<TsvDataset, IngestError> {
    let mut content = String::new();
    BufReader::new(source).read_to_string(&mut content)?;
    let rows: Vec<Vec<&str>> = content
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split('\t').collect())
        .collect();
    if rows.is_empty() {
        return Err(IngestError::EmptyDataset { skipped: 0 });
    }
    let layout = detect_layout(&rows)?;
    let cells = |row: &[&str]| -> Option<(String, Option<bool>)> {
        let (text, label) = match (layout, row.len()) {
            (Layout::TextLabel, 2) => (row[0], row[1]),
            (Layout::LabelText, 2) => (row[1], row[0]),
            (Layout::Glue, 4) => (row[3], row[1]),
            _ => return None,
        };
        Some((text.trim().to_string(), parse_label(label)))
    };

    let mut examples = Vec::new();
    let mut skipped = 0;
    for (i, row) in rows.iter().enumerate() {
        match cells(row) {
            Some((text, Some(acceptable))) if !text.is_empty() => {
                examples.push(LabeledExample {
                    id: (examples.len() + 1).to_string(),
                    text,
                    acceptable,
                });
            }
            Some((_, None)) if i == 0 => {} // header
            _ => skipped += 1,
        }
    }
    if examples.is_empty() {
        return Err(IngestError::EmptyDataset { skipped });
    }
    Ok(TsvDataset { examples, skipped })
}

fn optional(cell: &str) -> Option<String> {
    (cell != "_" && !cell.is_empty()).then(|| cell.to_string())
}

struct BlockBuilder {
    start_line: usize,
    sent_id: Option<String>,
    text: Option<String>,
    tokens: Vec<Token>,
    arcs: Vec<DependencyArc>,
}

impl BlockBuilder {
    fn new(start_line: usize) -> Self {
        BlockBuilder {
            start_line,
            sent_id: None,
            text: None,
            tokens: Vec::new(),
            arcs: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.sent_id.is_none() && self.text.is_none()
    }

    fn finish(self, ordinal: usize) -> Result<ParsedSentence, IngestError> {
        let text = self.text.unwrap_or_else(|| {
            self.tokens
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        });
        let id = self.sent_id.unwrap_or_else(|| ordinal.to_string());
        ParsedSentence::new(id, text, self.tokens, self.arcs).map_err(|e: CoreError| {
            IngestError::MalformedBlock {
                line: self.start_line,
                reason: e.to_string(),
            }
        })
    }
}

/// Reads CoNLL-U blocks. Multiword ranges (`3-4`) and empty nodes (`5.1`)
/// are skipped; relation labels pass through [`crate::normalize_label`].
/// Sentences without a `# sent_id` get their 1-based block ordinal as id.
pub fn read_conllu<R: Read>(
    source: R,
    policy: &LabelPolicy,
) -> Result<Vec<ParsedSentence>, IngestError> {
    let reader = BufReader::new(source);
    let mut sentences = Vec::new();
    let mut block = BlockBuilder::new(1);
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !block.is_empty() {
                let done = std::mem::replace(&mut block, BlockBuilder::new(line_no + 1));
                sentences.push(done.finish(sentences.len() + 1)?);
            } else {
                block.start_line = line_no + 1;
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => block.sent_id = Some(value.trim().to_string()),
                    "text" => block.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let malformed = |reason: String| IngestError::MalformedBlock {
            line: line_no,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(malformed(format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| malformed(format!("ID {:?} is not an integer", cols[0])))?;
        block.tokens.push(Token {
            index,
            surface: cols[1].to_string(),
            lemma: optional(cols[2]),
            pos: optional(cols[3]),
        });
        if cols[6] == "_" && cols[7] == "_" {
            // unattached token
            continue;
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| malformed(format!("HEAD {:?} is not an integer", cols[6])))?;
        let arc = DependencyArc::new(head, index, cols[7], policy)
            .map_err(|e| malformed(e.to_string()))?;
        block.arcs.push(arc);
    }
    if !block.is_empty() {
        sentences.push(block.finish(sentences.len() + 1)?);
    }
    Ok(sentences)
}

/// Writes sentences back as CoNLL-U. Columns not modelled here are `_`.
pub fn write_conllu(sentences: &[ParsedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "# sent_id = {}", s.id());
        let _ = writeln!(out, "# text = {}", s.text());
        for token in s.tokens() {
            let (head, label) = s
                .arcs()
                .iter()
                .find(|a| a.dependent == token.index)
                .map(|a| (a.head.to_string(), a.label.as_str()))
                .unwrap_or_else(|| ("_".to_string(), "_"));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                token.index,
                token.surface,
                token.lemma.as_deref().unwrap_or("_"),
                token.pos.as_deref().unwrap_or("_"),
                head,
                label,
            );
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParserAdapterConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub timeout: Duration,
    pub batch_size: usize,
}

impl ParserAdapterConfig {
    pub fn new(command: Vec<String>, timeout: Duration, batch_size: usize) -> Result<Self, IngestError> {
        if command.is_empty() {
            return Err(IngestError::InvalidConfig("empty parser command".into()));
        }
        if timeout.is_zero() {
            return Err(IngestError::InvalidConfig("timeout must be positive".into()));
        }
        if batch_size == 0 {
            return Err(IngestError::InvalidConfig("batch size must be at least 1".into()));
        }
        Ok(ParserAdapterConfig {
            command,
            timeout,
            batch_size,
        })
    }

    /// Splits a shell-style command line.
    pub fn from_command_line(line: &str, timeout: Duration, batch_size: usize) -> Result<Self, IngestError> {
        let command = shlex::split(line)
            .ok_or_else(|| IngestError::InvalidConfig(format!("cannot split command {line:?}")))?;
        Self::new(command, timeout, batch_size)
    }
}

/// Parses `texts` with an external process, one process per batch.
///
/// The process receives one sentence per line on stdin and must print one
/// CoNLL-U block per input, in order. Blocks are paired with inputs by
/// position; ids are the 1-based position in `texts` and the sentence text is
/// the input string.
pub fn parse_external(
    texts: &[String],
    cfg: &ParserAdapterConfig,
    policy: &LabelPolicy,
) -> Result<Vec<ParsedSentence>, IngestError> {
    let mut parsed = Vec::with_capacity(texts.len());
    for (batch_no, batch) in texts.chunks(cfg.batch_size).enumerate() {
        let output = run_parser_batch(batch, cfg)?;
        let sentences = read_conllu(output.as_bytes(), policy)?;
        if sentences.len() != batch.len() {
            return Err(IngestError::CountMismatch {
                expected: batch.len(),
                got: sentences.len(),
            });
        }
        let offset = batch_no * cfg.batch_size;
        for (i, (sentence, text)) in sentences.into_iter().zip(batch).enumerate() {
            parsed.push(sentence.with_id((offset + i + 1).to_string()).with_text(text.clone()));
        }
    }
    Ok(parsed)
}

fn run_parser_batch(batch: &[String], cfg: &ParserAdapterConfig) -> Result<String, IngestError> {
    let mut child = Command::new(&cfg.command[0])
        .args(&cfg.command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;

    let mut payload = String::new();
    for text in batch {
        payload.push_str(&text.replace(['\r', '\n'], " "));
        payload.push('\n');
    }
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let writer = thread::spawn(move || {
        // a parser that exits early closes the pipe; the exit status reports it
        let _ = stdin.write_all(payload.as_bytes());
    });

    let mut stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = String::new();
        let res = stdout.read_to_string(&mut buf).map(|_| buf);
        let _ = tx.send(res);
    });

    let output = match rx.recv_timeout(cfg.timeout) {
        Ok(res) => res?,
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(IngestError::ParserTimeout(cfg.timeout));
        }
    };
    let _ = writer.join();
    let status = child.wait()?;
    if !status.success() {
        return Err(IngestError::ParserCrash(status.code()));
    }
    Ok(output)
}
