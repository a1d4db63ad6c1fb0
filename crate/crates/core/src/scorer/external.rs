//! Line-delimited JSON bridge to external scorers.
//!
//! Each request is one line `{"id", "source", "target_tokens"}`; each
//! response is one line `{"id", "token_logprobs"}` with
//! `len(target_tokens) + 1` values, the last for end-of-sequence. Responses
//! may arrive in any order but every request must be answered exactly once.
//!
//! Two transports carry the same bodies: a long-lived child process talking
//! over stdin/stdout, or an HTTP endpoint that takes a batch of request
//! lines as the POST body and answers with response lines.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{check_positions, ScoreRequest, ScorerBackend, ScorerError, TokenLogProbs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: String,
    pub token_logprobs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transport {
    Process { program: String, args: Vec<String> },
    Http { url: String },
}

impl Transport {
    /// Splits a command line on whitespace.
    pub fn command(cmdline: &str) -> Self {
        let mut parts = cmdline.split_whitespace().map(str::to_string);
        Transport::Process {
            program: parts.next().unwrap_or_default(),
            args: parts.collect(),
        }
    }
}

struct Connection {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<io::Result<String>>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalBackend {
    name: String,
    transport: Transport,
    timeout: Duration,
    unit: String,
    conn: Mutex<Option<Connection>>,
}

impl ExternalBackend {
    pub fn new(name: impl Into<String>, transport: Transport) -> Self {
        ExternalBackend {
            name: name.into(),
            transport,
            timeout: Duration::from_secs(60),
            unit: "token".into(),
            conn: Mutex::new(None),
        }
    }

    /// Per-batch deadline.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Length unit declared by the adapter (tokens, subwords, ...).
    pub fn with_length_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    fn failure(&self, message: impl Into<String>) -> ScorerError {
        ScorerError::BackendFailure {
            backend: self.name.clone(),
            message: message.into(),
        }
    }

    fn spawn(&self, program: &str, args: &[String]) -> Result<Connection, ScorerError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| self.failure(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Connection {
            child,
            stdin,
            lines: rx,
        })
    }

    /// Sends a batch and collects exactly one response per request.
    pub fn score_batch_external(
        &self,
        requests: &[ScoreRequest],
    ) -> Result<Vec<(String, TokenLogProbs)>, ScorerError> {
        let mut index = HashMap::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            if index.insert(r.id.as_str(), i).is_some() {
                return Err(ScorerError::DuplicateRequest(r.id.clone()));
            }
        }
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let mut collector = Collector::new(requests, index);
        match &self.transport {
            Transport::Process { program, args } => {
                let mut guard = self.conn.lock().unwrap_or_else(|e| e.into_inner());
                if guard.is_none() {
                    *guard = Some(self.spawn(program, args)?);
                }
                let result = self.exchange_process(guard.as_mut().unwrap(), requests, &mut collector);
                if result.is_err() {
                    // the stream may hold stale responses; start over next time
                    *guard = None;
                }
                result?;
            }
            Transport::Http { url } => self.exchange_http(url, requests, &mut collector)?,
        }
        collector.finish()
    }

    fn exchange_process(
        &self,
        conn: &mut Connection,
        requests: &[ScoreRequest],
        collector: &mut Collector<'_>,
    ) -> Result<(), ScorerError> {
        let mut stdin = conn
            .stdin
            .take()
            .ok_or_else(|| self.failure("scorer stdin closed"))?;
        let body: Vec<u8> = request_lines(requests);
        let writer = thread::spawn(move || -> io::Result<ChildStdin> {
            stdin.write_all(&body)?;
            stdin.flush()?;
            Ok(stdin)
        });

        let deadline = Instant::now() + self.timeout;
        let mut outcome = Ok(());
        while !collector.complete() {
            let left = deadline.saturating_duration_since(Instant::now());
            match conn.lines.recv_timeout(left) {
                Ok(Ok(line)) => {
                    if let Err(e) = collector.accept_line(&line) {
                        outcome = Err(e);
                        break;
                    }
                }
                Ok(Err(e)) => {
                    outcome = Err(self.failure(format!("read error: {e}")));
                    break;
                }
                Err(RecvTimeoutError::Timeout) => {
                    outcome = Err(ScorerError::Timeout(self.timeout));
                    break;
                }
                Err(RecvTimeoutError::Disconnected) => {
                    outcome = Err(self.failure("scorer closed its output"));
                    break;
                }
            }
        }
        if outcome.is_err() {
            // unblocks a writer stuck on a full pipe
            let _ = conn.child.kill();
        }
        match writer.join() {
            Ok(Ok(stdin)) => conn.stdin = Some(stdin),
            Ok(Err(e)) if outcome.is_ok() => outcome = Err(self.failure(format!("write error: {e}"))),
            _ => {}
        }
        outcome
    }

    fn exchange_http(
        &self,
        url: &str,
        requests: &[ScoreRequest],
        collector: &mut Collector<'_>,
    ) -> Result<(), ScorerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| self.failure(e.to_string()))?;
        let response = client
            .post(url)
            .header("content-type", "application/x-ndjson")
            .body(request_lines(requests))
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ScorerError::Timeout(self.timeout)
                } else {
                    self.failure(e.to_string())
                }
            })?;
        if !response.status().is_success() {
            return Err(self.failure(format!("HTTP {}", response.status())));
        }
        let text = response.text().map_err(|e| self.failure(e.to_string()))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            collector.accept_line(line)?;
        }
        Ok(())
    }
}

fn request_lines(requests: &[ScoreRequest]) -> Vec<u8> {
    let mut body = Vec::new();
    for r in requests {
        serde_json::to_writer(&mut body, r).expect("request serializes");
        body.push(b'\n');
    }
    body
}

/// Matches responses to requests by id.
struct Collector<'a> {
    requests: &'a [ScoreRequest],
    index: HashMap<&'a str, usize>,
    answers: Vec<Option<TokenLogProbs>>,
    answered: usize,
}

impl<'a> Collector<'a> {
    fn new(requests: &'a [ScoreRequest], index: HashMap<&'a str, usize>) -> Self {
        Collector {
            requests,
            index,
            answers: vec![None; requests.len()],
            answered: 0,
        }
    }

    fn complete(&self) -> bool {
        self.answered == self.requests.len()
    }

    fn accept_line(&mut self, line: &str) -> Result<(), ScorerError> {
        let resp: ScoreResponse = serde_json::from_str(line)
            .map_err(|e| ScorerError::ProtocolViolation(format!("unparseable response: {e}")))?;
        let &i = self
            .index
            .get(resp.id.as_str())
            .ok_or_else(|| ScorerError::ProtocolViolation(format!("unknown id {}", resp.id)))?;
        if self.answers[i].is_some() {
            return Err(ScorerError::ProtocolViolation(format!(
                "duplicate id {}",
                resp.id
            )));
        }
        let lp = TokenLogProbs::new(resp.token_logprobs)
            .map_err(|e| ScorerError::ProtocolViolation(format!("{}: {e}", resp.id)))?;
        check_positions(&self.requests[i], &lp)?;
        self.answers[i] = Some(lp);
        self.answered += 1;
        Ok(())
    }

    fn finish(self) -> Result<Vec<(String, TokenLogProbs)>, ScorerError> {
        let missing: Vec<&str> = self
            .requests
            .iter()
            .zip(&self.answers)
            .filter(|(_, a)| a.is_none())
            .map(|(r, _)| r.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(ScorerError::ProtocolViolation(format!(
                "no response for {}",
                missing.join(", ")
            )));
        }
        Ok(self
            .requests
            .iter()
            .zip(self.answers)
            .map(|(r, a)| (r.id.clone(), a.unwrap()))
            .collect())
    }
}

impl ScorerBackend for ExternalBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn length_unit(&self) -> &str {
        &self.unit
    }

    fn token_logprobs(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        let mut out = self.score_batch_external(std::slice::from_ref(request))?;
        Ok(out.pop().expect("one response").1)
    }

    fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<(String, TokenLogProbs)>, ScorerError> {
        self.score_batch_external(requests)
    }
}

/// Answers protocol requests read from `input` using `backend`, one
/// response line per request line. Returns the number of requests served.
pub fn serve_protocol(
    backend: &dyn ScorerBackend,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<usize, ScorerError> {
    let io_err = |source| ScorerError::Io {
        path: "<stdio>".into(),
        source,
    };
    let mut served = 0;
    for line in input.lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let request: ScoreRequest = serde_json::from_str(&line)
            .map_err(|e| ScorerError::ProtocolViolation(format!("unparseable request: {e}")))?;
        let lp = backend.token_logprobs(&request)?;
        let response = ScoreResponse {
            id: request.id,
            token_logprobs: lp.into(),
        };
        serde_json::to_writer(&mut output, &response).map_err(|e| io_err(e.into()))?;
        output.write_all(b"\n").map_err(io_err)?;
        output.flush().map_err(io_err)?;
        served += 1;
    }
    Ok(served)
}
