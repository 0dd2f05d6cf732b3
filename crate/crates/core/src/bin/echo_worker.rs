//! Reference worker for the external evaluator protocol.
//!
//! Usage: `nat-echo-worker [--objectives a,b,..] [--mode MODE] [--hold N]
//! [--crash-after N] [--seed S]`
//!
//! Modes:
//! - `fixed` (default): deterministic objectives computed from the genome.
//! - `shuffle`: like `fixed`, but buffers `--hold` evaluate requests and
//!   answers them in reverse order.
//! - `crash`: exits with status 1 on receiving evaluate request number
//!   `--crash-after` (1-based) without answering it.
//! - `hang`: never answers evaluate requests.
//! - `synthetic`: the synthetic supernet seeded with `--seed`; objective
//!   names after the first select the exact cost objectives.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use nat_core::evaluators::external::echo_objectives;
use nat_core::evaluators::{Evaluator, SyntheticConfig, SyntheticSupernet};
use nat_core::natloop::AdaptationDistribution;
use nat_core::search::{AuxObjective, Problem};
use nat_core::{CostModel, Genome, SearchSpaceConfig};
use serde_json::{json, Value};

struct Options {
    objectives: Vec<String>,
    mode: String,
    hold: usize,
    crash_after: usize,
    seed: u64,
}

fn parse() -> Result<Options, String> {
    let mut o = Options {
        objectives: vec!["neg_top1".into(), "madds".into()],
        mode: "fixed".into(),
        hold: 2,
        crash_after: 1,
        seed: 0,
    };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let value = args.next().ok_or(format!("{flag} needs a value"))?;
        let number = |v: &str| v.parse::<u64>().map_err(|e| format!("{flag}: {e}"));
        match flag.as_str() {
            "--objectives" => o.objectives = value.split(',').map(str::to_string).collect(),
            "--mode" => o.mode = value,
            "--hold" => o.hold = number(&value)?.max(1) as usize,
            "--crash-after" => o.crash_after = number(&value)? as usize,
            "--seed" => o.seed = number(&value)?,
            _ => return Err(format!("unknown flag {flag}")),
        }
    }
    Ok(o)
}

fn synthetic(o: &Options) -> Result<SyntheticSupernet, String> {
    let aux = o.objectives[1..]
        .iter()
        .map(|n| match n.as_str() {
            "madds" => Ok(AuxObjective::Madds),
            "params" => Ok(AuxObjective::Params),
            other => Err(format!("unknown objective {other}")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let problem = Problem::new(SearchSpaceConfig::default(), CostModel::default(), aux).map_err(|e| e.to_string())?;
    let config = SyntheticConfig {
        seed: Some(o.seed),
        ..Default::default()
    };
    SyntheticSupernet::new(config, problem, o.seed, 1).map_err(|e| e.to_string())
}

fn send(out: &mut impl Write, v: &Value) -> io::Result<()> {
    writeln!(out, "{v}")?;
    out.flush()
}

fn main() -> ExitCode {
    let o = match parse() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("nat-echo-worker: {e}");
            return ExitCode::from(2);
        }
    };
    let mut supernet = if o.mode == "synthetic" {
        match synthetic(&o) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("nat-echo-worker: {e}");
                return ExitCode::from(2);
            }
        }
    } else {
        None
    };
    let m = o.objectives.len();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut held: Vec<Value> = Vec::new();
    let mut evaluations = 0;

    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let request: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                let _ = send(&mut out, &json!({"ok": false, "error": e.to_string()}));
                continue;
            }
        };
        let reply = match request["cmd"].as_str() {
            Some("hello") => Some(json!({"ok": true, "objectives": o.objectives})),
            Some("evaluate") => {
                evaluations += 1;
                if o.mode == "crash" && evaluations >= o.crash_after {
                    return ExitCode::from(1);
                }
                if o.mode == "hang" {
                    continue;
                }
                let genomes: Vec<Genome> = match serde_json::from_value(request["genomes"].clone()) {
                    Ok(g) => g,
                    Err(e) => {
                        let _ = send(&mut out, &json!({"id": request["id"], "error": e.to_string()}));
                        continue;
                    }
                };
                let objectives: Result<Vec<Vec<f64>>, String> = match supernet.as_mut() {
                    Some(s) => s
                        .evaluate(&genomes)
                        .map(|v| v.into_iter().map(|o| o.0).collect())
                        .map_err(|e| e.to_string()),
                    None => Ok(genomes.iter().map(|g| echo_objectives(g, m)).collect()),
                };
                let response = match objectives {
                    Ok(obj) => json!({"id": request["id"], "objectives": obj}),
                    Err(e) => json!({"id": request["id"], "error": e}),
                };
                if o.mode == "shuffle" {
                    held.push(response);
                    if held.len() >= o.hold {
                        for r in held.drain(..).rev() {
                            let _ = send(&mut out, &r);
                        }
                    }
                    None
                } else {
                    Some(response)
                }
            }
            Some("adapt") => {
                let result = match supernet.as_mut() {
                    Some(s) => serde_json::from_value::<AdaptationDistribution>(request["distribution"].clone())
                        .map_err(|e| e.to_string())
                        .and_then(|d| {
                            s.adapt(&d, request["epochs"].as_u64().unwrap_or(0) as usize)
                                .map_err(|e| e.to_string())
                        }),
                    None => Ok(()),
                };
                Some(match result {
                    Ok(()) => json!({"ok": true}),
                    Err(e) => json!({"ok": false, "error": e}),
                })
            }
            Some("shutdown") => break,
            _ => Some(json!({"ok": false, "error": "unknown command"})),
        };
        if let Some(r) = reply {
            if send(&mut out, &r).is_err() {
                break;
            }
        }
    }
    for r in held.drain(..).rev() {
        let _ = send(&mut out, &r);
    }
    ExitCode::SUCCESS
}
