//! Client for external acceptability scorers.
//!
//! Wire protocol, UTF-8 and newline-delimited:
//!
//! ```text
//! -> {"id":1,"text":"A test."}
//! <- {"id":1,"score":0.93}
//! ```
//!
//! Each request gets exactly one response carrying the same id; responses
//! may arrive in any order. The subprocess transport speaks over the child's
//! stdin/stdout, the TCP transport over one connection.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{AcceptabilityScore, Scorer, ScorerError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    /// Program and arguments.
    Subprocess(Vec<String>),
    /// `host:port`
    Tcp(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScorerEndpoint {
    pub transport: Transport,
    pub timeout: Duration,
}

fn looks_like_host_port(spec: &str) -> bool {
    match spec.rsplit_once(':') {
        Some((host, port)) => {
            !host.is_empty()
                && !spec.contains(char::is_whitespace)
                && !spec.contains('/')
                && port.parse::<u16>().is_ok()
        }
        None => false,
    }
}

impl ScorerEndpoint {
    pub fn new(transport: Transport, timeout: Duration) -> Result<Self, ScorerError> {
        if timeout.is_zero() {
            return Err(ScorerError::InvalidModel("endpoint timeout must be positive".into()));
        }
        if let Transport::Subprocess(cmd) = &transport {
            if cmd.is_empty() {
                return Err(ScorerError::InvalidModel("empty scorer command".into()));
            }
        }
        Ok(ScorerEndpoint { transport, timeout })
    }

    /// `host:port` selects TCP; anything else is split as a command line.
    pub fn parse(spec: &str, timeout: Duration) -> Result<Self, ScorerError> {
        let transport = if looks_like_host_port(spec) {
            Transport::Tcp(spec.to_string())
        } else {
            Transport::Subprocess(shlex::split(spec).ok_or_else(|| {
                ScorerError::InvalidModel(format!("cannot split command {spec:?}"))
            })?)
        };
        ScorerEndpoint::new(transport, timeout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreRequest<'a> {
    pub id: u64,
    pub text: &'a str,
}

impl ScoreRequest<'_> {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScoreResponse {
    pub id: u64,
    pub score: f64,
}

impl ScoreResponse {
    pub fn parse(line: &str) -> Result<Self, ScorerError> {
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| ScorerError::ProtocolViolation(format!("not JSON ({e}): {line:?}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| ScorerError::ProtocolViolation(format!("not an object: {line:?}")))?;
        let id = obj
            .get("id")
            .ok_or_else(|| ScorerError::ProtocolViolation(format!("missing id: {line:?}")))?
            .as_u64()
            .ok_or_else(|| ScorerError::ProtocolViolation(format!("id is not a non-negative integer: {line:?}")))?;
        let score = obj
            .get("score")
            .ok_or_else(|| ScorerError::ProtocolViolation(format!("missing score: {line:?}")))?
            .as_f64()
            .ok_or_else(|| ScorerError::ProtocolViolation(format!("score is not a number: {line:?}")))?;
        Ok(ScoreResponse { id, score })
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    child: Option<Child>,
    tcp: Option<TcpStream>,
}

fn spawn_line_reader<R: Read + Send + 'static>(source: R) -> Receiver<io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(source).lines() {
            let line = line.map(|l| l.trim_end_matches('\r').to_string());
            let failed = line.is_err();
            if tx.send(line).is_err() || failed {
                break;
            }
        }
    });
    rx
}

impl Connection {
    fn open(endpoint: &ScorerEndpoint) -> Result<Self, ScorerError> {
        match &endpoint.transport {
            Transport::Subprocess(cmd) => {
                let mut child = Command::new(&cmd[0])
                    .args(&cmd[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("stdin is piped");
                let stdout = child.stdout.take().expect("stdout is piped");
                Ok(Connection {
                    writer: Box::new(stdin),
                    lines: spawn_line_reader(stdout),
                    child: Some(child),
                    tcp: None,
                })
            }
            Transport::Tcp(addr) => {
                let target = addr
                    .to_socket_addrs()?
                    .next()
                    .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, format!("cannot resolve {addr}")))?;
                let stream = TcpStream::connect_timeout(&target, endpoint.timeout).map_err(|e| {
                    if e.kind() == io::ErrorKind::TimedOut {
                        ScorerError::EndpointTimeout
                    } else {
                        ScorerError::Io(e)
                    }
                })?;
                stream.set_nodelay(true)?;
                let reader = stream.try_clone()?;
                let writer = stream.try_clone()?;
                Ok(Connection {
                    writer: Box::new(writer),
                    lines: spawn_line_reader(reader),
                    child: None,
                    tcp: Some(stream),
                })
            }
        }
    }

    fn send(&mut self, line: &str) -> Result<(), ScorerError> {
        let res = self
            .writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"));
        res.map_err(|e| self.crashed(&e.to_string()))
    }

    fn flush(&mut self) -> Result<(), ScorerError> {
        self.writer.flush().map_err(|e| self.crashed(&e.to_string()))
    }

    fn crashed(&mut self, detail: &str) -> ScorerError {
        let status = self
            .child
            .as_mut()
            .and_then(|c| {
                // give a dying child a moment to be reaped
                for _ in 0..20 {
                    if let Ok(Some(status)) = c.try_wait() {
                        return Some(status);
                    }
                    thread::sleep(Duration::from_millis(10));
                }
                None
            })
            .map(|s| format!(" ({s})"))
            .unwrap_or_default();
        ScorerError::EndpointCrash(format!("{detail}{status}"))
    }

    /// `Ok(None)` on end of stream.
    fn recv(&mut self, deadline: Instant) -> Result<Option<String>, ScorerError> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Ok(line)) => Ok(Some(line)),
            Ok(Err(e)) => Err(ScorerError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(ScorerError::EndpointTimeout),
            Err(RecvTimeoutError::Disconnected) => Ok(None),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(stream) = &self.tcp {
            let _ = stream.shutdown(Shutdown::Both);
        }
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Everything an endpoint sent back for one batch of requests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExchange {
    pub lines: Vec<String>,
    pub timed_out: bool,
    pub closed_early: bool,
}

/// Remote scorer; one connection, opened lazily and shared under a lock.
pub struct RemoteScorer {
    endpoint: ScorerEndpoint,
    threshold: f64,
    connection: Mutex<Option<Connection>>,
    next_id: AtomicU64,
    clamped: AtomicUsize,
}

impl RemoteScorer {
    pub fn new(endpoint: ScorerEndpoint) -> Self {
        RemoteScorer {
            endpoint,
            threshold: 0.5,
            connection: Mutex::new(None),
            next_id: AtomicU64::new(1),
            clamped: AtomicUsize::new(0),
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn endpoint(&self) -> &ScorerEndpoint {
        &self.endpoint
    }

    /// Number of out-of-range scores clamped so far.
    pub fn clamped_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    fn exchange(
        conn: &mut Connection,
        texts: &[String],
        first_id: u64,
        timeout: Duration,
        clamped: &AtomicUsize,
    ) -> Result<Vec<AcceptabilityScore>, ScorerError> {
        for (i, text) in texts.iter().enumerate() {
            conn.send(&ScoreRequest { id: first_id + i as u64, text }.to_line())?;
        }
        conn.flush()?;

        let mut pending: HashMap<u64, usize> =
            (0..texts.len()).map(|i| (first_id + i as u64, i)).collect();
        let mut scores: Vec<Option<AcceptabilityScore>> = vec![None; texts.len()];
        while !pending.is_empty() {
            let deadline = Instant::now() + timeout;
            let line = conn
                .recv(deadline)?
                .ok_or_else(|| conn.crashed(&format!("stream closed with {} responses outstanding", pending.len())))?;
            let response = ScoreResponse::parse(&line)?;
            let slot = pending.remove(&response.id).ok_or_else(|| {
                ScorerError::ProtocolViolation(format!("unexpected or repeated id {}", response.id))
            })?;
            let (score, was_clamped) = AcceptabilityScore::clamped(response.score)
                .ok_or_else(|| ScorerError::ProtocolViolation(format!("score for id {} is NaN", response.id)))?;
            if was_clamped {
                clamped.fetch_add(1, Ordering::Relaxed);
                log::warn!("score {} for id {} clamped to {}", response.score, response.id, score);
            }
            scores[slot] = Some(score);
        }
        Ok(scores.into_iter().map(|s| s.expect("every id answered")).collect())
    }

    /// Opens a fresh connection, sends `requests` verbatim, and collects
    /// response lines until as many lines as requests arrived, the stream
    /// ends, or the timeout passes. Used by conformance checking.
    pub fn exchange_raw(
        endpoint: &ScorerEndpoint,
        requests: &[(u64, String)],
    ) -> Result<RawExchange, ScorerError> {
        let mut conn = Connection::open(endpoint)?;
        for (id, text) in requests {
            conn.send(&ScoreRequest { id: *id, text }.to_line())?;
        }
        conn.flush()?;
        let deadline = Instant::now() + endpoint.timeout;
        let mut raw = RawExchange {
            lines: Vec::new(),
            timed_out: false,
            closed_early: false,
        };
        while raw.lines.len() < requests.len() {
            match conn.recv(deadline) {
                Ok(Some(line)) => raw.lines.push(line),
                Ok(None) => {
                    raw.closed_early = true;
                    break;
                }
                Err(ScorerError::EndpointTimeout) => {
                    raw.timed_out = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        // catch extra lines that arrive right behind the expected ones
        let grace = Instant::now() + Duration::from_millis(100).min(endpoint.timeout);
        while let Ok(Some(line)) = conn.recv(grace) {
            raw.lines.push(line);
        }
        Ok(raw)
    }
}

impl Scorer for RemoteScorer {
    fn score_batch(&self, texts: &[String]) -> Result<Vec<AcceptabilityScore>, ScorerError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let first_id = self.next_id.fetch_add(texts.len() as u64, Ordering::Relaxed);
        let mut guard = self.connection.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Connection::open(&self.endpoint)?);
        }
        let conn = guard.as_mut().expect("connection opened above");
        let result = Self::exchange(conn, texts, first_id, self.endpoint.timeout, &self.clamped);
        if result.is_err() {
            // stale responses from a failed exchange must not leak into the next one
            *guard = None;
        }
        result
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn describe(&self) -> String {
        match &self.endpoint.transport {
            Transport::Subprocess(cmd) => format!("remote scorer (subprocess: {})", cmd.join(" ")),
            Transport::Tcp(addr) => format!("remote scorer (tcp: {addr})"),
        }
    }
}
