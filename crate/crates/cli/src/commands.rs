use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nat_core::bench::{dtlz1_study, rosenbrock_study, Summary};
use nat_core::evaluators::benchmarks::DemoMode;
use nat_core::metrics::{hypervolume, trade_off_scores};
use nat_core::natloop::{run_with, write_generations_csv, write_history_csv};
use nat_core::selection::non_dominated_sort;
use nat_core::NatError;
use serde_json::json;

use crate::artifacts::{write_csv, write_json, ArchiveBody, ArchiveFile, Provenance};
use crate::config::RunConfig;
use crate::Failure;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn classify(e: NatError) -> Failure {
    if e.is_runtime() {
        runtime(e)
    } else {
        input(e)
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(input)
}

pub struct SearchArgs {
    pub config: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub parallel_evals: usize,
}

pub fn search(args: &SearchArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))
        .map_err(input)?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("invalid config {}", args.config.display()))
        .map_err(input)?;
    cfg.validate().map_err(input)?;
    let problem = cfg.problem().map_err(input)?;
    let nat = cfg.nat();
    create_dir(&args.out)?;

    let mut evaluator = cfg.evaluator.build(&problem, args.seed, args.parallel_evals).map_err(classify)?;
    let total = nat.iterations;
    let result = run_with(evaluator.as_mut(), &problem, &nat, args.seed, |r| {
        let hv = r.archive_hypervolume.map_or("-".into(), |v| format!("{v:.6e}"));
        let rho = r.predictor_spearman.map_or("-".into(), |s| format!("{:.3}", s.rho));
        eprintln!(
            "iteration {}/{total}: hypervolume {hv}, predictor spearman {rho}, evaluations {}",
            r.iteration, r.evaluations_cumulative
        );
    })
    .map_err(classify)?;

    let resolved = serde_json::to_value(&cfg).map_err(runtime)?;
    let p = Provenance::new(args.seed, &resolved);
    let names = problem.objective_names();
    let out = &args.out;
    write_json(
        out,
        "archive.json",
        &p,
        ArchiveBody {
            objective_names: &names,
            capacity: result.archive.capacity,
            entries: &result.archive.entries,
        },
    )
    .map_err(runtime)?;
    let front: Vec<_> = result.archive.front().into_iter().map(|i| result.archive.entries[i].clone()).collect();
    write_json(
        out,
        "pareto.json",
        &p,
        json!({ "objective_names": names, "entries": front }),
    )
    .map_err(runtime)?;
    write_json(out, "distribution.json", &p, json!({ "probabilities": result.distribution })).map_err(runtime)?;
    write_csv(out, "history.csv", &p, |w| write_history_csv(&result.history, w)).map_err(runtime)?;
    write_csv(out, "generations.csv", &p, |w| write_generations_csv(&result.history, w)).map_err(runtime)?;
    write_json(
        out,
        "manifest.json",
        &p,
        json!({
            "objective_names": names,
            "evaluations": result.evaluations,
            "evaluation_budget": nat.evaluation_budget(),
            "iterations": result.history.len(),
            "reference_point": result.reference_point,
            "initial_hypervolume": result.initial_hypervolume,
            "final_hypervolume": result.history.last().and_then(|h| h.archive_hypervolume),
            "artifacts": ["archive.json", "pareto.json", "distribution.json", "history.csv", "generations.csv"],
        }),
    )
    .map_err(runtime)?;
    println!(
        "{} evaluations, {} archive members, {} on the front; results in {}",
        result.evaluations,
        result.archive.len(),
        front.len(),
        out.display()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchProblem {
    Dtlz1,
    Rosenbrock,
}

pub struct BenchArgs {
    pub problem: BenchProblem,
    pub seed: u64,
    pub out: PathBuf,
    pub objectives: Option<usize>,
    pub runs: usize,
    pub generations: usize,
    pub budget: usize,
}

fn summary_cells(s: &Summary) -> String {
    format!("{},{},{}", s.mean, s.std, s.median)
}

pub fn bench(args: &BenchArgs) -> Result<(), Failure> {
    if args.runs == 0 {
        return Err(input(anyhow!("invalid value for `runs`: must be at least 1")));
    }
    create_dir(&args.out)?;
    match args.problem {
        BenchProblem::Dtlz1 => {
            let ms = args.objectives.map_or_else(|| vec![3, 5, 10, 15], |m| vec![m]);
            let params = json!({"problem": "dtlz1", "objectives": ms, "runs": args.runs, "generations": args.generations});
            let mut rows = Vec::new();
            for &m in &ms {
                eprintln!("dtlz1: m = {m}, {} runs of {} generations", args.runs, args.generations);
                rows.extend(dtlz1_study(m, args.runs, args.generations, args.seed).map_err(classify)?);
            }
            println!("{:>3}  {:<16} {:>5} {:>12} {:>12} {:>12}", "m", "method", "pop", "IGD mean", "IGD std", "IGD median");
            for r in &rows {
                println!(
                    "{:>3}  {:<16} {:>5} {:>12.6} {:>12.6} {:>12.6}",
                    r.objectives,
                    r.method.name(),
                    r.population,
                    r.summary.mean,
                    r.summary.std,
                    r.summary.median
                );
            }
            let p = Provenance::new(args.seed, &params);
            write_json(&args.out, "dtlz1.json", &p, json!({ "rows": rows })).map_err(runtime)?;
            write_csv(&args.out, "dtlz1.csv", &p, |w| {
                use std::io::Write;
                writeln!(w, "objectives,method,population,generations,runs,igd_mean,igd_std,igd_median")?;
                for r in &rows {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        r.objectives,
                        r.method.name(),
                        r.population,
                        r.generations,
                        r.igd.len(),
                        summary_cells(&r.summary)
                    )?;
                }
                Ok(())
            })
            .map_err(runtime)?;
        }
        BenchProblem::Rosenbrock => {
            let params = json!({"problem": "rosenbrock", "runs": args.runs, "budget": args.budget});
            let study = rosenbrock_study(args.runs, args.budget, args.seed).map_err(classify)?;
            let modes = [("online", DemoMode::Online), ("offline", DemoMode::Offline)];
            let stats: Vec<(&str, Summary, Summary)> = modes
                .iter()
                .map(|&(name, mode)| (name, Summary::of(&study.best_f(mode)), Summary::of(&study.distances(mode))))
                .collect();
            println!("{:<8} {:>12} {:>12} {:>12} {:>16}", "mode", "best-f mean", "best-f std", "best-f median", "distance median");
            for (name, f, d) in &stats {
                println!("{:<8} {:>12.6} {:>12.6} {:>12.6} {:>16.6}", name, f.mean, f.std, f.median, d.median);
            }
            let p = Provenance::new(args.seed, &params);
            write_json(&args.out, "rosenbrock.json", &p, json!({ "study": study })).map_err(runtime)?;
            write_csv(&args.out, "rosenbrock.csv", &p, |w| {
                use std::io::Write;
                writeln!(w, "mode,runs,budget,best_f_mean,best_f_std,best_f_median,distance_mean,distance_std,distance_median")?;
                for (name, f, d) in &stats {
                    writeln!(w, "{name},{},{},{},{}", args.runs, args.budget, summary_cells(f), summary_cells(d))?;
                }
                Ok(())
            })
            .map_err(runtime)?;
        }
    }
    Ok(())
}

pub struct AnalyzeArgs {
    pub archive: PathBuf,
    pub ref_point: Option<String>,
    pub out: Option<PathBuf>,
}

fn parse_point(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("invalid value for `ref-point`: {text:?}"))
        .map_err(input)
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.archive)
        .with_context(|| format!("reading {}", args.archive.display()))
        .map_err(input)?;
    let file: ArchiveFile = serde_json::from_str(&text)
        .with_context(|| format!("{} is not an archive", args.archive.display()))
        .map_err(input)?;
    let (names, entries) = file.into_parts();
    if entries.is_empty() {
        return Err(input(anyhow!("{} holds no entries", args.archive.display())));
    }
    let m = entries[0].objectives.len();
    if m == 0 || entries.iter().any(|e| e.objectives.len() != m) {
        return Err(input(anyhow!("archive entries disagree on the number of objectives")));
    }
    let names = names
        .filter(|n| n.len() == m)
        .unwrap_or_else(|| (1..=m).map(|k| format!("f{k}")).collect());
    let points: Vec<&[f64]> = entries.iter().map(|e| &e.objectives[..]).collect();
    let front: Vec<usize> = non_dominated_sort(&points).swap_remove(0);
    let front_points: Vec<&[f64]> = front.iter().map(|&i| points[i]).collect();

    let volume = match &args.ref_point {
        Some(r) => {
            let r = parse_point(r)?;
            if r.len() != m {
                return Err(input(anyhow!("`ref-point` needs {m} values, got {}", r.len())));
            }
            match hypervolume(&front_points, &r) {
                Ok(h) => Some(h),
                Err(e @ NatError::UnsupportedObjectives(_)) => {
                    eprintln!("hypervolume skipped: {e}");
                    None
                }
                Err(e) => return Err(input(e)),
            }
        }
        None => None,
    };
    // Scores need at least m + 1 front members.
    let trade_off = trade_off_scores(&front_points).ok();
    let score = |k: usize| trade_off.as_ref().and_then(|t| t.scores[k]);
    let preferred = trade_off.as_ref().and_then(|t| t.preferred).map(|k| front[k]);

    println!("{} archive members, {} on the non-dominated front", entries.len(), front.len());
    println!("index  {}  trade_off", names.join("  "));
    for (k, &i) in front.iter().enumerate() {
        let objs: Vec<String> = points[i].iter().map(|v| format!("{v}")).collect();
        let s = score(k).map_or("-".into(), |v| format!("{v:.6}"));
        println!("{i:>5}  {}  {s}", objs.join("  "));
    }
    if let Some(h) = &volume {
        println!("hypervolume {} ({} points beyond the reference dropped)", h.volume, h.dropped);
    }
    match preferred {
        Some(i) => println!("preferred solution: index {i}, genome {:?}", entries[i].genome.values()),
        None => println!("no preferred solution stands out"),
    }

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        let params = json!({"archive": args.archive, "ref_point": args.ref_point});
        let p = Provenance::new(0, &params);
        write_csv(dir, "front.csv", &p, |w| {
            use std::io::Write;
            writeln!(w, "index,{},trade_off", names.join(","))?;
            for (k, &i) in front.iter().enumerate() {
                let objs: Vec<String> = points[i].iter().map(|v| v.to_string()).collect();
                writeln!(w, "{i},{},{}", objs.join(","), score(k).map_or(String::new(), |v| v.to_string()))?;
            }
            Ok(())
        })
        .map_err(runtime)?;
        write_json(
            dir,
            "analysis.json",
            &p,
            json!({
                "objective_names": names,
                "front": front,
                "hypervolume": volume.map(|h| h.volume),
                "trade_off": trade_off.as_ref().map(|t| &t.scores),
                "preferred": preferred,
            }),
        )
        .map_err(runtime)?;
    }
    Ok(())
}
