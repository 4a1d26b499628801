//! Batch command-line frontend.
//!
//! Every subcommand reads its input files, runs one pipeline under a fresh
//! [`ResourceMeter`], writes the solution (to `--output` or stdout) and a
//! [`RunReport`] as JSON (to `--report` or stderr). Exit codes: 0 on success,
//! 2 on argument errors, 1 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::boxsimplex::{for_each_averaged_coordinate, solve, BoxSimplexInstance, MatrixRows};
use crate::config::Config;
use crate::error::{read_file, Error, Result};
use crate::flow::SparseFlow;
use crate::matching::{mcm_approx_with, mcm_exact, BipartiteGraph, Matching, Rounding};
use crate::stream::{open_edge_stream, open_row_stream, EdgeKind, ResourceMeter};
use crate::transshipment::{approx_transshipment, shortest_path, SignedFlow, TransshipInstance};
use crate::weighted::{matching_weight, mwm_solve, ot_solve};

/// Machine-readable summary of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub value: f64,
    pub eps: f64,
    pub passes: u64,
    pub peak_words: u64,
    pub work: u64,
    /// `-` when the solution went to stdout.
    pub solution_path: String,
    pub wall_seconds: f64,
}

#[derive(Parser, Debug)]
#[command(name = "semistream", version, about = "Semi-streaming matching, transport and transshipment solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Approximate maximum-cardinality bipartite matching.
    Mcm(RunArgs),
    /// Exact maximum-cardinality bipartite matching.
    McmExact(RunArgs),
    /// Maximum-weight bipartite matching up to additive eps * max weight.
    Mwm(RunArgs),
    /// Optimal transport between two marginals under a dense cost matrix.
    Ot(RunArgs),
    /// Approximate undirected transshipment for a demand file.
    Transship(RunArgs),
    /// Approximate s-t shortest path.
    Sssp(RunArgs),
    /// Box-simplex game given as a row file, with `b` from `--demands`.
    SolveGame(RunArgs),
    /// Re-parses a solution file and checks feasibility.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    demands: Option<PathBuf>,
    /// Two files, comma separated: left and right marginals.
    #[arg(long, value_delimiter = ',')]
    marginals: Option<Vec<PathBuf>>,
    #[arg(long)]
    source: Option<usize>,
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, value_enum)]
    rounding: Option<RoundingArg>,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    /// Subcommand that produced the solution.
    #[arg(long)]
    problem: String,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    demands: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    marginals: Option<Vec<PathBuf>>,
    #[arg(long)]
    source: Option<usize>,
    #[arg(long)]
    target: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RoundingArg {
    Cancel,
    Sample,
}

/// Parses `argv` (including the program name), runs and returns the exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Argument(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    let (name, args) = match cmd {
        Command::Verify(v) => return verify(&v),
        Command::Mcm(a) => ("mcm", a),
        Command::McmExact(a) => ("mcm-exact", a),
        Command::Mwm(a) => ("mwm", a),
        Command::Ot(a) => ("ot", a),
        Command::Transship(a) => ("transship", a),
        Command::Sssp(a) => ("sssp", a),
        Command::SolveGame(a) => ("solve-game", a),
    };
    let cfg = match &args.config {
        Some(p) => Config::parse(&read_file(p)?).map_err(|e| Error::arg(format!("{}: {e}", p.display())))?,
        None => Config::default(),
    };
    let meter = ResourceMeter::new();
    let start = Instant::now();
    let (value, solution) = run(name, &args, &cfg, &meter)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let solution_path = match &args.output {
        Some(p) => {
            fs::write(p, solution)?;
            p.display().to_string()
        }
        None => {
            std::io::stdout().write_all(solution.as_bytes())?;
            "-".to_string()
        }
    };
    let r = meter.reading();
    let report = RunReport {
        problem: name.to_string(),
        value,
        eps: args.eps,
        passes: r.passes,
        peak_words: r.peak_words,
        work: r.work,
        solution_path,
        wall_seconds,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))?;
    match &args.report {
        Some(p) => fs::write(p, json + "\n")?,
        None => eprintln!("{json}"),
    }
    Ok(())
}

fn run(name: &str, a: &RunArgs, cfg: &Config, meter: &ResourceMeter) -> Result<(f64, String)> {
    match name {
        "mcm" => {
            let g = BipartiteGraph::from_stream(open_edge_stream(&a.input, EdgeKind::Bipartite)?)?;
            let rounding = match a.rounding {
                None => Rounding::Average,
                Some(RoundingArg::Cancel) => Rounding::Cancel,
                Some(RoundingArg::Sample) => Rounding::Sample { seed: a.seed },
            };
            let m = mcm_approx_with(&g, a.eps, cfg, rounding, meter)?;
            Ok((m.size() as f64, m.to_text()))
        }
        "mcm-exact" => {
            let g = BipartiteGraph::from_stream(open_edge_stream(&a.input, EdgeKind::Bipartite)?)?;
            let m = mcm_exact(&g, cfg, meter)?;
            Ok((m.size() as f64, m.to_text()))
        }
        "mwm" => {
            let g = BipartiteGraph::from_stream(open_edge_stream(&a.input, EdgeKind::Bipartite)?)?;
            let m = mwm_solve(&g, a.eps, cfg, meter)?;
            Ok((matching_weight(&g, &m), m.to_text()))
        }
        "ot" => {
            let costs = read_matrix(&a.input)?;
            let (ell, r) = read_marginals(a.marginals.as_deref())?;
            let plan = ot_solve(&costs, &ell, &r, a.eps, cfg, meter)?;
            Ok((plan.cost, plan.entries.to_text()))
        }
        "transship" => {
            let inst = read_transship(&a.input, a.demands.as_deref())?;
            let sol = approx_transshipment(&inst, a.eps, a.seed, cfg, meter)?;
            Ok((sol.value, sol.flow.to_text()))
        }
        "sssp" => {
            let (s, t) = endpoints(a.source, a.target)?;
            let inst = read_transship(&a.input, None)?;
            let n = inst.n.max(s + 1).max(t + 1);
            let inst = TransshipInstance::new(n, inst.edges, vec![0.0; n])?;
            let (path, len) = shortest_path(&inst, s, t, a.eps, a.seed, cfg, meter)?;
            let text: String = path.iter().map(|v| format!("{v}\n")).collect();
            Ok((len, text))
        }
        "solve-game" => {
            let inst = read_game(&a.input, a.demands.as_deref())?;
            let mut report = solve(&inst, a.eps, cfg, meter)?;
            let mut text = String::new();
            for_each_averaged_coordinate(&mut report, &inst, meter, |i, _, x| {
                if x > 0.0 {
                    text.push_str(&format!("{i} {x:.17e}\n"));
                }
            })?;
            Ok((report.value, text))
        }
        _ => unreachable!("dispatch covers every subcommand"),
    }
}

/// Row file plus `b` given as `column value` lines (zero when absent).
fn read_game(input: &Path, b_path: Option<&Path>) -> Result<BoxSimplexInstance<MatrixRows>> {
    let rows = open_row_stream(input)?;
    let b_pairs = match b_path {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    let max_col = rows.records().iter().flat_map(|r| r.entries.iter().map(|e| e.0 + 1)).max().unwrap_or(0);
    let n = b_pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0).max(max_col);
    let mut b = vec![0.0; n];
    for (j, x) in b_pairs {
        b[j] += x;
    }
    BoxSimplexInstance::new(MatrixRows::new(rows, n)?, b)
}

fn endpoints(s: Option<usize>, t: Option<usize>) -> Result<(usize, usize)> {
    match (s, t) {
        (Some(s), Some(t)) => Ok((s, t)),
        _ => Err(Error::arg("sssp needs --source and --target")),
    }
}

/// Whitespace-separated floats, one matrix row per nonempty line.
fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_file(path)?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {t:?}") }))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::arg(format!("{}: cost matrix must be nonempty and rectangular", path.display())));
    }
    Ok(rows)
}

/// All whitespace-separated floats of a file, in order.
fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read_file(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        for t in raw.split('#').next().unwrap_or("").split_whitespace() {
            out.push(t.parse().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number {t:?}") })?);
        }
    }
    Ok(out)
}

fn read_marginals(paths: Option<&[PathBuf]>) -> Result<(Vec<f64>, Vec<f64>)> {
    match paths {
        Some([l, r]) => Ok((read_vector(l)?, read_vector(r)?)),
        _ => Err(Error::arg("ot needs --marginals LEFT,RIGHT")),
    }
}

/// `index value` lines.
fn read_pairs(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = read_file(path)?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Parse { line: i + 1, msg: format!("expected `vertex value`, got {line:?}") };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(bad());
        }
        let v: usize = toks[0].parse().map_err(|_| bad())?;
        let x: f64 = toks[1].parse().map_err(|_| bad())?;
        if !x.is_finite() {
            return Err(bad());
        }
        out.push((v, x));
    }
    Ok(out)
}

fn read_transship(input: &Path, demands: Option<&Path>) -> Result<TransshipInstance> {
    let edges = open_edge_stream(input, EdgeKind::Graph)?;
    let pairs = match demands {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    let n = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0).max(edges.graph_order());
    let mut d = vec![0.0; n];
    for (v, x) in pairs {
        d[v] += x;
    }
    TransshipInstance::new(n, edges, d)
}

fn read_matching(path: &Path) -> Result<Matching> {
    let text = read_file(path)?;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let bad = || Error::Parse { line: i + 1, msg: format!("expected `left right`, got {raw:?}") };
        if toks.len() != 2 {
            return Err(bad());
        }
        pairs.push((toks[0].parse().map_err(|_| bad())?, toks[1].parse().map_err(|_| bad())?));
    }
    Ok(Matching { pairs })
}

fn verify(v: &VerifyArgs) -> Result<()> {
    let value = match v.problem.as_str() {
        "mcm" | "mcm-exact" | "mwm" => {
            let g = BipartiteGraph::from_stream(open_edge_stream(&v.input, EdgeKind::Bipartite)?)?;
            let m = read_matching(&v.solution)?;
            m.validate(&g)?;
            if v.problem == "mwm" {
                matching_weight(&g, &m)
            } else {
                m.size() as f64
            }
        }
        "ot" => {
            let costs = read_matrix(&v.input)?;
            let (ell, r) = read_marginals(v.marginals.as_deref())?;
            let plan = SparseFlow::from_text(&read_file(&v.solution)?)?;
            let (ml, mr) = plan.marginals(ell.len(), r.len());
            let err = ml.iter().zip(&ell).chain(mr.iter().zip(&r)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if plan.iter().any(|(i, j, x)| i >= ell.len() || j >= r.len() || x < 0.0) {
                return Err(Error::Infeasible("plan entry outside the cost matrix or negative".into()));
            }
            if err > 1e-9 {
                return Err(Error::Infeasible(format!("marginals off by {err:e}")));
            }
            plan.weight(|i, j| costs[i][j])
        }
        "transship" => {
            let inst = read_transship(&v.input, v.demands.as_deref())?;
            let f = SignedFlow::from_text(&read_file(&v.solution)?)?;
            flow_value(&inst, &f)?
        }
        "sssp" => {
            let (s, t) = endpoints(v.source, v.target)?;
            let inst = read_transship(&v.input, None)?;
            let w = inst.weight_map();
            let path: Vec<usize> = read_vector(&v.solution)?.into_iter().map(|x| x as usize).collect();
            if path.first() != Some(&s) || path.last() != Some(&t) {
                return Err(Error::Infeasible(format!("path does not run from {s} to {t}")));
            }
            let mut len = 0.0;
            for p in path.windows(2) {
                let key = (p[0].min(p[1]), p[0].max(p[1]));
                len += w.get(&key).ok_or_else(|| Error::Infeasible(format!("({}, {}) is not an edge", p[0], p[1])))?;
            }
            len
        }
        "solve-game" => {
            let inst = read_game(&v.input, v.demands.as_deref())?;
            let rows = inst.rows.src.records();
            let mut x = vec![0.0; rows.len()];
            for (i, xi) in read_pairs(&v.solution)? {
                if i >= x.len() || xi < 0.0 {
                    return Err(Error::Infeasible(format!("entry ({i}, {xi}) is not a simplex coordinate")));
                }
                x[i] += xi;
            }
            let mass: f64 = x.iter().sum();
            if (mass - 1.0).abs() > 1e-9 {
                return Err(Error::Infeasible(format!("entries sum to {mass}, not 1")));
            }
            let mut at_x: Vec<f64> = inst.b.iter().map(|b| -b).collect();
            let mut cost = 0.0;
            for (row, xi) in rows.iter().zip(&x) {
                cost += row.cost * xi;
                for &(j, a) in &row.entries {
                    at_x[j] += a * xi;
                }
            }
            cost + at_x.iter().map(|v| v.abs()).sum::<f64>()
        }
        other => return Err(Error::arg(format!("cannot verify problem {other:?}"))),
    };
    println!("ok {value}");
    Ok(())
}

/// Cost of `f` after checking that it uses only edges and meets the demands.
fn flow_value(inst: &TransshipInstance, f: &SignedFlow) -> Result<f64> {
    let w = inst.weight_map();
    for (u, v, _) in f.iter() {
        if !w.contains_key(&(u, v)) {
            return Err(Error::Infeasible(format!("({u}, {v}) is not an edge")));
        }
    }
    let div = f.divergence(inst.n.max(f.iter().map(|e| e.1 + 1).max().unwrap_or(0)));
    let err = div.iter().zip(&inst.d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if err > 1e-8 {
        return Err(Error::Infeasible(format!("demands off by {err:e}")));
    }
    Ok(f.cost(|u, v| w[&(u, v)]))
}
