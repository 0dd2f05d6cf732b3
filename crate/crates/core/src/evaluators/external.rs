//! Evaluation in child processes speaking newline-delimited JSON over
//! stdin/stdout.
//!
//! ```text
//! -> {"cmd":"hello"}                               <- {"ok":true,"objectives":["neg_top1","madds"]}
//! -> {"cmd":"evaluate","id":7,"genomes":[[..]]}    <- {"id":7,"objectives":[[..]]}
//! -> {"cmd":"adapt","distribution":[[..]],"epochs":5} <- {"ok":true}
//! -> {"cmd":"shutdown"}                            (child exits 0)
//! ```
//!
//! A batch is split into chunks, each sent as its own `evaluate` request;
//! responses may arrive in any order and are matched back by id. Each child
//! has a reader thread feeding a channel so that every wait honours the
//! configured timeout.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Evaluator;
use crate::error::{NatError, Result};
use crate::genome::Genome;
use crate::natloop::AdaptationDistribution;
use crate::selection::ObjectiveVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalConfig {
    /// Program and arguments.
    pub command: Vec<String>,
    pub timeout_secs: f64,
    /// Genomes per `evaluate` request.
    pub chunk_size: usize,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self {
            command: Vec::new(),
            timeout_secs: 300.0,
            chunk_size: 25,
        }
    }
}

impl ExternalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() {
            return Err(NatError::config("evaluator.command", "must name a program"));
        }
        if !(self.timeout_secs > 0.0) || !self.timeout_secs.is_finite() {
            return Err(NatError::config("evaluator.timeout_secs", "must be positive"));
        }
        if self.chunk_size == 0 {
            return Err(NatError::config("evaluator.chunk_size", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum Request {
    Hello,
    Evaluate { id: u64, genomes: Vec<Genome> },
    Adapt { distribution: AdaptationDistribution, epochs: usize },
    Shutdown,
}

enum Line {
    Text(String),
    Closed,
    Failed(String),
}

struct Worker {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Line>,
    index: usize,
}

impl Worker {
    fn spawn(command: &[String], index: usize) -> Result<Self> {
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| NatError::Evaluator(format!("cannot start `{}`: {e}", command[0])))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let msg = match line {
                    Ok(l) => Line::Text(l),
                    Err(e) => Line::Failed(e.to_string()),
                };
                let stop = matches!(msg, Line::Failed(_));
                if tx.send(msg).is_err() || stop {
                    return;
                }
            }
            let _ = tx.send(Line::Closed);
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            index,
        })
    }

    fn send(&mut self, request: &Request) -> Result<()> {
        let mut text = serde_json::to_string(request)?;
        text.push('\n');
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| NatError::Evaluator(format!("worker {} stdin closed", self.index)))?;
        stdin
            .write_all(text.as_bytes())
            .and_then(|()| stdin.flush())
            .map_err(|e| NatError::Evaluator(format!("worker {} rejected a request: {e}", self.index)))
    }

    /// Next non-empty line, or an error describing why none arrived.
    fn receive(&mut self, deadline: Instant, waiting_for: &dyn Fn() -> String) -> Result<Value> {
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(Line::Text(t)) => t,
                Ok(Line::Closed) | Err(RecvTimeoutError::Disconnected) => {
                    let status = self
                        .child
                        .wait()
                        .map(|s| s.to_string())
                        .unwrap_or_else(|e| e.to_string());
                    return Err(NatError::Evaluator(format!(
                        "worker {} exited ({status}) while waiting for {}",
                        self.index,
                        waiting_for()
                    )));
                }
                Ok(Line::Failed(e)) => {
                    return Err(NatError::Evaluator(format!("worker {} output unreadable: {e}", self.index)))
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(NatError::Evaluator(format!(
                        "worker {} timed out waiting for {}",
                        self.index,
                        waiting_for()
                    )))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            return serde_json::from_str(&line)
                .map_err(|e| NatError::Evaluator(format!("worker {} sent malformed JSON `{line}`: {e}", self.index)));
        }
    }

    fn acknowledge(&mut self, deadline: Instant, what: &str) -> Result<Value> {
        let v = self.receive(deadline, &|| what.to_string())?;
        match v.get("ok").and_then(Value::as_bool) {
            Some(true) => Ok(v),
            _ => Err(NatError::Evaluator(format!(
                "worker {} refused {what}: {}",
                self.index,
                v.get("error").map_or_else(|| v.to_string(), Value::to_string)
            ))),
        }
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.send(&Request::Shutdown);
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalEvaluator {
    workers: Vec<Worker>,
    names: Vec<String>,
    chunk_size: usize,
    timeout: Duration,
    next_id: u64,
}

fn pending_list(pending: &BTreeSet<u64>) -> String {
    let ids: Vec<String> = pending.iter().map(u64::to_string).collect();
    format!("responses to ids [{}]", ids.join(", "))
}

impl ExternalEvaluator {
    /// Starts `workers.max(1)` children and performs the handshake.
    pub fn spawn(config: &ExternalConfig, workers: usize) -> Result<Self> {
        config.validate()?;
        let timeout = Duration::from_secs_f64(config.timeout_secs);
        let mut pool = Vec::new();
        let mut names: Option<Vec<String>> = None;
        for index in 0..workers.max(1) {
            let mut w = Worker::spawn(&config.command, index)?;
            w.send(&Request::Hello)?;
            let hello = w.acknowledge(Instant::now() + timeout, "hello")?;
            let reported: Vec<String> = hello
                .get("objectives")
                .cloned()
                .map(serde_json::from_value)
                .transpose()?
                .ok_or_else(|| NatError::Evaluator("hello response lacks `objectives`".into()))?;
            match &names {
                Some(n) if *n != reported => {
                    return Err(NatError::Evaluator(format!(
                        "workers disagree on objectives: {n:?} vs {reported:?}"
                    )))
                }
                _ => names = Some(reported),
            }
            pool.push(w);
        }
        Ok(Self {
            workers: pool,
            names: names.unwrap_or_default(),
            chunk_size: config.chunk_size,
            timeout,
            next_id: 0,
        })
    }
}

impl Evaluator for ExternalEvaluator {
    fn objective_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn evaluate(&mut self, genomes: &[Genome]) -> Result<Vec<ObjectiveVector>> {
        let chunks: Vec<&[Genome]> = genomes.chunks(self.chunk_size).collect();
        let n_workers = self.workers.len();
        // id -> (chunk index, worker)
        let mut owner: HashMap<u64, (usize, usize)> = HashMap::new();
        let mut pending: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); n_workers];
        // A worker that stops accepting requests has usually died; its ids
        // stay pending so the receive loop reports the exit and what was lost.
        let mut broken = vec![false; n_workers];
        for (c, chunk) in chunks.iter().enumerate() {
            let id = self.next_id;
            self.next_id += 1;
            let w = c % n_workers;
            owner.insert(id, (c, w));
            pending[w].insert(id);
            if !broken[w] {
                let request = Request::Evaluate {
                    id,
                    genomes: chunk.to_vec(),
                };
                broken[w] = self.workers[w].send(&request).is_err();
            }
        }
        let deadline = Instant::now() + self.timeout;
        let m = self.names.len();
        let mut results: Vec<Option<Vec<ObjectiveVector>>> = vec![None; chunks.len()];
        for w in 0..n_workers {
            while !pending[w].is_empty() {
                let waiting = pending[w].clone();
                let v = self.workers[w].receive(deadline, &|| pending_list(&waiting))?;
                let id = v
                    .get("id")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| NatError::Evaluator(format!("response without id: {v}")))?;
                if !pending[w].remove(&id) {
                    return Err(NatError::Evaluator(format!("unexpected response id {id} from worker {w}")));
                }
                if let Some(err) = v.get("error") {
                    return Err(NatError::Evaluator(format!("worker {w} failed request {id}: {err}")));
                }
                let objectives: Vec<Vec<f64>> = v
                    .get("objectives")
                    .cloned()
                    .map(serde_json::from_value)
                    .transpose()
                    .map_err(|e| NatError::Evaluator(format!("bad objectives for id {id}: {e}")))?
                    .ok_or_else(|| NatError::Evaluator(format!("response {id} lacks `objectives`")))?;
                let (c, _) = owner[&id];
                if objectives.len() != chunks[c].len() || objectives.iter().any(|o| o.len() != m) {
                    return Err(NatError::Evaluator(format!(
                        "response {id} has the wrong shape: expected {} vectors of {m}",
                        chunks[c].len()
                    )));
                }
                results[c] = Some(objectives.into_iter().map(ObjectiveVector).collect());
            }
        }
        Ok(results.into_iter().flat_map(|r| r.expect("every chunk answered")).collect())
    }

    fn adapt(&mut self, distribution: &AdaptationDistribution, epochs: usize) -> Result<()> {
        let request = Request::Adapt {
            distribution: distribution.clone(),
            epochs,
        };
        for w in &mut self.workers {
            w.send(&request)?;
        }
        let deadline = Instant::now() + self.timeout;
        for w in &mut self.workers {
            w.acknowledge(deadline, "adapt acknowledgement")?;
        }
        Ok(())
    }
}

/// Deterministic objectives used by the echo worker and its in-process twin:
/// a bounded accuracy-like first objective followed by weighted code sums.
pub fn echo_objectives(genome: &Genome, m: usize) -> Vec<f64> {
    let v = genome.values();
    let mean = v.iter().map(|&x| f64::from(x)).sum::<f64>() / v.len().max(1) as f64;
    let mut out = vec![-(0.5 + 0.04 * mean)];
    out.extend((1..m).map(|k| {
        v.iter()
            .enumerate()
            .map(|(i, &x)| f64::from(x) * (1.0 + ((i + k) % 3) as f64))
            .sum::<f64>()
    }));
    out
}
