//! The `kdepi` command line: argument handling and command execution,
//! returning the exit code and output so tests can drive it in-process.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use kde_core::ccs::CcsMode;
use kde_core::oracle::{differential_run, gen_theorems, random_formula, report_jsonl, Suite, SuiteSpec};
use kde_core::semantics::{gen_dense_model, gen_dense_model_mono, is_dense_for, model_check, KripkeModel};
use kde_core::solver::{replay_trace, solve_sat, solve_valid, LoopMode, Mode, SolverConfig, Verdict};
use kde_core::{Error, Formula};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Parser)]
#[command(
    name = "kdepi",
    version,
    about = "Decide formulas of bounded-density multimodal logics"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Kde,
    KdePi,
    KdeMono,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LoopArg {
    Seen,
    Counter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CcsArg {
    Branch,
    Exhaustive,
    /// Experimental: only minimal saturations.
    Minimal,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Highest modality index.
    #[arg(long, global = true, default_value_t = 1)]
    pub pi: usize,
    #[arg(long, global = true, value_enum, default_value = "kde-pi")]
    pub mode: ModeArg,
    #[arg(long = "loop", global = true, value_enum, default_value = "seen")]
    pub loop_mode: LoopArg,
    /// Chain length bound for counter mode.
    #[arg(long, global = true)]
    pub counter_bound: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "branch")]
    pub ccs: CcsArg,
    /// Write the successful search path as JSON.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Write the successful search path as a DOT graph.
    #[arg(long, global = true)]
    pub trace_dot: Option<PathBuf>,
    #[arg(long, global = true)]
    pub budget_steps: Option<u64>,
    #[arg(long, global = true)]
    pub budget_ms: Option<u64>,
    /// Re-check every continuation step while solving.
    #[arg(long, global = true)]
    pub audit: bool,
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide satisfiability.
    Sat(FormulaArg),
    /// Decide validity.
    Valid(FormulaArg),
    /// Evaluate a formula at a world of a model file.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        world: String,
        #[command(flatten)]
        input: FormulaArg,
    },
    /// Generate corpora.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Worlds of a dense model.
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[arg(long, default_value_t = 0.4)]
        edge_p: f64,
        /// Modal depth bound of generated formulas.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver with an oracle on a suite.
    Diff {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random items, replacing the suite's default.
        #[arg(long)]
        count: Option<usize>,
        /// Largest exhaustive formula size in the k-fragment suite.
        #[arg(long, default_value_t = 7)]
        max_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure space counters on a formula family.
    Bench {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 6)]
        max_size: usize,
        /// Leave wall-clock times out of the table.
        #[arg(long)]
        no_time: bool,
    },
    /// Re-validate a trace file.
    Replay { trace_file: PathBuf },
}

#[derive(Debug, Args)]
pub struct FormulaArg {
    /// Formula text.
    pub formula: Option<String>,
    /// Read the formula from a file instead.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    DenseModel,
    Formulas,
    Theorems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    DensityChain,
    NestedDiamond,
}

/// Exit code with captured output streams.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn ok(code: i32, stdout: String) -> Output {
        Output {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    fn error(msg: String) -> Output {
        let stdout = json!({ "result": "error", "error": msg }).to_string() + "\n";
        Output {
            code: 2,
            stdout,
            stderr: format!("kdepi: {msg}\n"),
        }
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => execute(&cli).unwrap_or_else(|e| Output::error(e.to_string())),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            Output {
                code,
                stdout: if code == 0 { e.to_string() } else { String::new() },
                stderr: if code == 0 { String::new() } else { e.to_string() },
            }
        }
    }
}

pub fn config(g: &Global) -> Result<SolverConfig, Error> {
    let mut cfg = match g.mode {
        ModeArg::Kde | ModeArg::KdePi => SolverConfig::kde(g.pi),
        ModeArg::KdeMono => SolverConfig::mono(),
    };
    cfg.loop_mode = match g.loop_mode {
        LoopArg::Seen => LoopMode::SeenSet,
        LoopArg::Counter => LoopMode::Counter,
    };
    cfg.counter_bound = g.counter_bound;
    cfg.ccs_mode = match g.ccs {
        CcsArg::Branch => CcsMode::Branch,
        CcsArg::Exhaustive => CcsMode::Exhaustive,
        CcsArg::Minimal => CcsMode::Minimal,
    };
    cfg.trace = g.trace.is_some() || g.trace_dot.is_some();
    cfg.audit = g.audit;
    cfg.step_budget = g.budget_steps;
    cfg.time_budget_ms = g.budget_ms;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Output, Error> {
    let cfg = config(&cli.global)?;
    let g = &cli.global;
    match &cli.command {
        Command::Sat(input) => decide(g, &cfg, input, false),
        Command::Valid(input) => decide(g, &cfg, input, true),
        Command::Check { model, world, input } => check(g, &cfg, model, world, input),
        Command::Gen {
            kind,
            seed,
            count,
            size,
            edge_p,
            depth,
            out,
        } => {
            let text = generate(&cfg, *kind, *seed, *count, *size, *edge_p, *depth)?;
            emit(out, text)
        }
        Command::Diff {
            suite,
            seed,
            count,
            max_size,
            out,
        } => {
            let mut spec = SuiteSpec::new(*suite, *seed);
            if let Some(c) = count {
                spec.count = *c;
            }
            spec.max_size = *max_size;
            let mut scfg = cfg.clone();
            if scfg.mode == Mode::KdePi {
                scfg.pi = spec.pi();
            }
            let records = differential_run(&spec.corpus(), &scfg);
            let disagreements = records.iter().filter(|r| !r.agrees()).count();
            let mut result = emit(out, report_jsonl(&records))?;
            result.stderr = format!("{} items, {} disagreements\n", records.len(), disagreements);
            result.code = i32::from(disagreements > 0);
            Ok(result)
        }
        Command::Bench {
            family,
            max_size,
            no_time,
        } => bench(g, &cfg, *family, *max_size, *no_time),
        Command::Replay { trace_file } => {
            let text =
                fs::read_to_string(trace_file).map_err(|e| Error::Config(format!("{}: {e}", trace_file.display())))?;
            let trace: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("trace: {e}")))?;
            let report = replay_trace(&trace)?;
            let code = i32::from(!report.ok());
            Ok(Output::ok(
                code,
                render(g.pretty, &serde_json::to_value(&report).expect("report serializes")),
            ))
        }
    }
}

fn read_formula(cfg: &SolverConfig, input: &FormulaArg) -> Result<Formula, Error> {
    let text = match (&input.formula, &input.file) {
        (Some(t), None) => t.clone(),
        (None, Some(path)) => {
            fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        _ => return Err(Error::Config("give a formula or --file, not both".into())),
    };
    cfg.parse(text.trim())
}

fn render(pretty: bool, v: &Value) -> String {
    if pretty {
        serde_json::to_string_pretty(v).expect("json") + "\n"
    } else {
        v.to_string() + "\n"
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: String) -> Result<Output, Error> {
    match out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(Output::ok(0, String::new()))
        }
        None => Ok(Output::ok(0, text)),
    }
}

fn decide(g: &Global, cfg: &SolverConfig, input: &FormulaArg, valid: bool) -> Result<Output, Error> {
    let f = read_formula(cfg, input)?;
    let verdict = if valid {
        solve_valid(&f, cfg)?
    } else {
        solve_sat(&f, cfg)?
    };
    if let Some(trace) = &verdict.trace {
        if let Some(path) = &g.trace {
            write_file(path, &(serde_json::to_string_pretty(trace).expect("json") + "\n"))?;
        }
        if let Some(path) = &g.trace_dot {
            write_file(path, &trace_dot(trace))?;
        }
    }
    let text = if g.pretty {
        pretty_verdict(&verdict)
    } else {
        render(false, &verdict.to_json())
    };
    Ok(Output::ok(verdict.result.exit_code(), text))
}

fn pretty_verdict(v: &Verdict) -> String {
    let mut out = format!("{}\n", v.result.as_str());
    if let Value::Object(stats) = serde_json::to_value(&v.stats).expect("stats serialize") {
        for (k, val) in stats {
            let _ = writeln!(out, "  {k:<20} {val}");
        }
    }
    for l in &v.lassos {
        let _ = writeln!(out, "  lasso: prefix {} period {}", l.prefix, l.period);
    }
    out
}

/// DOT rendering of a trace: one cluster per chain, windows in order, and
/// a back edge where a chain closes into a lasso.
pub fn trace_dot(trace: &Value) -> String {
    let mut out = String::from("digraph trace {\n  node [shape=box, fontname=monospace];\n");
    let empty = Vec::new();
    let chains = trace["chains"].as_array().unwrap_or(&empty);
    for (ci, chain) in chains.iter().enumerate() {
        let _ = writeln!(
            out,
            "  subgraph cluster_{ci} {{\n    label=\"chain {ci}, level {}\";",
            chain["k"]
        );
        let windows = chain["windows"].as_array().unwrap_or(&empty);
        for (wi, w) in windows.iter().enumerate() {
            let rows = w["rows"].as_array().map_or(0, Vec::len);
            let top = w["rows"][0]
                .as_array()
                .map(|r| r.iter().filter_map(Value::as_str).collect::<Vec<_>>().join(", "));
            let label = format!("W{wi} ({rows} rows)\\n{}", top.unwrap_or_default()).replace('"', "'");
            let _ = writeln!(out, "    c{ci}w{wi} [label=\"{label}\"];");
            if wi > 0 {
                let _ = writeln!(out, "    c{ci}w{} -> c{ci}w{wi};", wi - 1);
            }
        }
        if let (Some(prefix), Some(period)) = (chain["lasso"]["prefix"].as_u64(), chain["lasso"]["period"].as_u64()) {
            let last = prefix + period - 1;
            let _ = writeln!(
                out,
                "    c{ci}w{last} -> c{ci}w{prefix} [style=dashed, label=\"loop\"];"
            );
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

fn check(g: &Global, cfg: &SolverConfig, model: &PathBuf, world: &str, input: &FormulaArg) -> Result<Output, Error> {
    let f = read_formula(cfg, input)?;
    let text = fs::read_to_string(model).map_err(|e| Error::Config(format!("{}: {e}", model.display())))?;
    let m = KripkeModel::from_json(&text)?;
    let value = model_check(&m, world, &f)?;
    let report = is_dense_for(&m, cfg.logic());
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|(i, a, b)| json!({ "index": i, "from": a, "to": b }))
        .collect();
    let v = json!({
        "value": value,
        "world": world,
        "dense": report.is_dense(),
        "violations": violations,
    });
    Ok(Output::ok(i32::from(!value), render(g.pretty, &v)))
}

fn generate(
    cfg: &SolverConfig,
    kind: GenKind,
    seed: u64,
    count: usize,
    size: usize,
    edge_p: f64,
    depth: usize,
) -> Result<String, Error> {
    let atoms = ["p", "q"];
    match kind {
        GenKind::DenseModel => {
            if size == 0 {
                return Err(Error::Config("a model needs at least one world".into()));
            }
            let m = match cfg.mode {
                Mode::KdePi => gen_dense_model(seed, cfg.pi, size, &atoms, edge_p),
                Mode::KdeMono => gen_dense_model_mono(seed, size, &atoms, edge_p),
            };
            Ok(serde_json::to_string_pretty(&m.to_json()).expect("json") + "\n")
        }
        GenKind::Formulas => {
            let indices: Vec<usize> = match cfg.mode {
                Mode::KdePi => (0..=cfg.pi).collect(),
                Mode::KdeMono => vec![0],
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = String::new();
            for _ in 0..count {
                let item: u64 = rng.gen();
                let mut item_rng = ChaCha8Rng::seed_from_u64(item);
                let fsize = item_rng.gen_range(2..=16);
                let f = random_formula(&mut item_rng, &atoms, &indices, depth, fsize);
                out += &(json!({ "formula": f.display(cfg.syntax()).to_string(), "seed": item }).to_string() + "\n");
            }
            Ok(out)
        }
        GenKind::Theorems => {
            if cfg.mode == Mode::KdeMono {
                return Err(Error::Config("theorem generation needs indexed modalities".into()));
            }
            let syntax = cfg.syntax();
            let mut out = String::new();
            for t in gen_theorems(seed, count, cfg.pi, depth) {
                let steps: Vec<Value> = t
                    .steps
                    .iter()
                    .map(|s| {
                        let subst: serde_json::Map<String, Value> = s
                            .subst
                            .iter()
                            .map(|(k, v)| (k.clone(), Value::from(v.display(syntax).to_string())))
                            .collect();
                        json!({ "formula": s.formula.display(syntax).to_string(), "rule": s.rule, "subst": subst })
                    })
                    .collect();
                out +=
                    &(json!({ "formula": t.formula.display(syntax).to_string(), "steps": steps }).to_string() + "\n");
            }
            Ok(out)
        }
    }
}

/// Members of a bench family, smallest first.
pub fn family_member(family: Family, n: usize, mode: Mode) -> Formula {
    let (a, b) = match mode {
        Mode::KdePi => (0, 1),
        Mode::KdeMono => (0, 0),
    };
    let atom = |j: usize| Formula::atom(&format!("p{j}"));
    match family {
        // Diamonds alternating between the two lowest indices, each step
        // forcing a density witness below it.
        Family::DensityChain => {
            let mut f = atom(n);
            for j in (0..n).rev() {
                let index = if j % 2 == 0 { a } else { b };
                f = Formula::diamond(index, Formula::and(atom(j), f));
            }
            Formula::and(f, Formula::boxed(a, Formula::boxed(b, atom(n + 1))))
        }
        Family::NestedDiamond => {
            let mut f = atom(0);
            for _ in 0..n {
                f = Formula::diamond(a, f);
            }
            Formula::and(f, Formula::boxed(a, Formula::boxed(b, atom(1))))
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn bench(g: &Global, cfg: &SolverConfig, family: Family, max_size: usize, no_time: bool) -> Result<Output, Error> {
    if max_size == 0 {
        return Err(Error::Config("--max-size must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for n in 1..=max_size {
        let f = family_member(family, n, cfg.mode);
        let mut run_cfg = cfg.clone();
        if run_cfg.mode == Mode::KdePi {
            run_cfg.pi = run_cfg.pi.max(1);
        }
        let start = Instant::now();
        let v = solve_sat(&f, &run_cfg)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let bound = (run_cfg.pi as u64 + 1) * (f.depth() as u64 + 1);
        points.push((f.size() as f64, v.stats.peak_live_ccs as f64));
        let mut row = json!({
            "n": n,
            "size": f.size(),
            "depth": f.depth(),
            "result": v.result.as_str(),
            "peak_live_windows": v.stats.peak_live_windows,
            "window_bound": bound,
            "peak_live_ccs": v.stats.peak_live_ccs,
            "choice_points": v.stats.choice_points,
        });
        if !no_time {
            row["time_ms"] = json!((ms * 1000.0).round() / 1000.0);
        }
        rows.push(row);
    }
    let fit = fit_exponent(&points);
    let pi = cfg.pi.max(1);
    let v = json!({
        "family": match family { Family::DensityChain => "density-chain", Family::NestedDiamond => "nested-diamond" },
        "rows": rows,
        "peak_live_ccs_fit_exponent": fit.map(|e| (e * 1000.0).round() / 1000.0),
        "expected_degree_at_most": 2 * pi + 4,
    });
    if g.pretty {
        let mut out = format!(
            "{:>3} {:>5} {:>5} {:>6} {:>8} {:>6} {:>9} {:>10}\n",
            "n", "size", "depth", "result", "windows", "bound", "ccs", "time_ms"
        );
        for r in &rows {
            let _ = writeln!(
                out,
                "{:>3} {:>5} {:>5} {:>6} {:>8} {:>6} {:>9} {:>10}",
                r["n"].to_string(),
                r["size"].to_string(),
                r["depth"].to_string(),
                r["result"].as_str().unwrap_or(""),
                r["peak_live_windows"].to_string(),
                r["window_bound"].to_string(),
                r["peak_live_ccs"].to_string(),
                r.get("time_ms").map_or("-".to_string(), Value::to_string)
            );
        }
        let _ = writeln!(
            out,
            "fit exponent of peak_live_ccs in size: {}",
            fit.map_or("n/a".into(), |e| format!("{e:.3}"))
        );
        return Ok(Output::ok(0, out));
    }
    Ok(Output::ok(0, render(false, &v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Output {
        run(std::iter::once("kdepi").chain(args.iter().copied()))
    }

    #[test]
    fn exit_codes_follow_results() {
        let out = run_args(&["valid", "--pi", "1", "[0][1]p -> [0]p"]);
        assert_eq!(out.code, 0, "{out:?}");
        assert!(out.stdout.contains("\"valid\""));
        let out = run_args(&["sat", "--pi", "0", "<0>p & [0]~p"]);
        assert_eq!(out.code, 1);
        assert!(out.stdout.contains("\"unsat\""));
        let out = run_args(&["valid", "--pi", "1", "[0]p -> [0][1]p"]);
        assert_eq!(out.code, 1);
        assert!(out.stdout.contains("\"invalid\""));
    }

    #[test]
    fn errors_exit_two() {
        assert_eq!(run_args(&["sat", "--pi", "1", "[2]p"]).code, 2);
        assert_eq!(run_args(&["sat", "p &"]).code, 2);
        assert_eq!(run_args(&["sat", "--loop", "counter", "p"]).code, 2);
        assert_eq!(run_args(&["sat", "--budget-steps", "1", "<0><0>p"]).code, 2);
        assert_eq!(run_args(&["frobnicate"]).code, 2);
    }

    #[test]
    fn mono_mode() {
        let out = run_args(&["valid", "--mode", "kde-mono", "<>p -> <><>p"]);
        assert_eq!(out.code, 0, "{out:?}");
        assert_eq!(run_args(&["valid", "--mode", "kde-mono", "<><>p -> <>p"]).code, 1);
    }

    #[test]
    fn counter_mode_flags() {
        let out = run_args(&[
            "sat",
            "--pi",
            "1",
            "--loop",
            "counter",
            "--counter-bound",
            "4",
            "<0>p & [0][1]q",
        ]);
        assert_eq!(out.code, 0, "{out:?}");
    }

    #[test]
    fn dot_rendering() {
        let trace = json!({ "chains": [{ "k": 0, "windows": [{ "rows": [["p"], ["q"]], "subs": [null] }, { "rows": [["q"], ["q"]], "subs": [null] }], "lasso": { "prefix": 1, "period": 1 } }] });
        let dot = trace_dot(&trace);
        assert!(dot.contains("c0w0 -> c0w1"));
        assert!(dot.contains("c0w1 -> c0w1 [style=dashed"));
    }

    #[test]
    fn families_and_fit() {
        assert_eq!(family_member(Family::NestedDiamond, 3, Mode::KdePi).depth(), 3);
        assert_eq!(family_member(Family::DensityChain, 3, Mode::KdePi).depth(), 3);
        let fit = fit_exponent(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]).unwrap();
        assert!((fit - 2.0).abs() < 1e-9);
        assert_eq!(fit_exponent(&[(1.0, 1.0)]), None);
    }
}
