//! Acceptance criteria. Each test writes one PASS/FAIL line to stderr
//! directly, so the lines show up even under captured test output.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use kde_core::ccs::{enumerate_ccs, is_saturated_consistent, CcsMode};
use kde_core::formula::{csf, sf, Formula, FormulaSet};
use kde_core::generate::Gen;
use kde_core::oracle::{
    brute_force_windows, ccs_property_suite, differential_run, gen_model_truths, gen_theorems, random_formula, Suite,
    SuiteSpec,
};
use kde_core::semantics::{bounded_model_search, check_at, is_dense_for};
use kde_core::solver::{solve_sat, solve_valid, LoopMode, Outcome, SolveStats, SolverConfig};
use kde_core::universe::Universe;
use kde_core::window::Logic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AXIOM_TIME: Duration = Duration::from_secs(5);
const WITNESS_TIME: Duration = Duration::from_secs(10);
const MODEL_TRUTHS: usize = 1000;
const THEOREMS: usize = 500;
const SEED_PAIRS: usize = 10_000;
const MAX_CSF: usize = 12;
const CORPUS_SEED: u64 = 2024;

fn report(criterion: u32, ok: bool, detail: &str) {
    let line = format!(
        "criterion {criterion}: {} ({detail})\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn axiom_formulas() -> Vec<(usize, Formula)> {
    let mut out = Vec::new();
    for pi in 1..=3 {
        let cfg = SolverConfig::kde(pi);
        for i in 0..pi {
            let j = i + 1;
            out.push((pi, cfg.parse(&format!("[{i}][{j}]p -> [{i}]p")).unwrap()));
            out.push((pi, cfg.parse(&format!("<{i}>p -> <{i}><{j}>p")).unwrap()));
        }
    }
    out
}

fn witness_formulas() -> Vec<(SolverConfig, Formula)> {
    let multi = SolverConfig::kde(1);
    let mono = SolverConfig::mono();
    vec![
        (multi.clone(), multi.parse("[0]p -> [0][1]p").unwrap()),
        (multi.clone(), multi.parse("<0><1>p -> <0>p").unwrap()),
        (mono.clone(), mono.parse("<><>p -> <>p").unwrap()),
    ]
}

/// Every formula of suites 1 to 5 with the configuration it is solved under.
fn full_corpus() -> Vec<(SolverConfig, Formula)> {
    let mut out: Vec<(SolverConfig, Formula)> = axiom_formulas()
        .into_iter()
        .map(|(pi, f)| (SolverConfig::kde(pi), Formula::neg(f)))
        .collect();
    out.extend(witness_formulas().into_iter().map(|(c, f)| (c, Formula::neg(f))));
    let k = SuiteSpec::new(Suite::KFragment, CORPUS_SEED);
    out.extend(k.corpus().into_iter().map(|(f, _, _)| (SolverConfig::kde(k.pi()), f)));
    out.extend(model_truths().into_iter().map(|f| (SolverConfig::kde(2), f)));
    out.extend(theorem_negations().into_iter().map(|f| (SolverConfig::kde(2), f)));
    out
}

fn model_truths() -> Vec<Formula> {
    gen_model_truths(CORPUS_SEED, MODEL_TRUTHS, 2, false, 6, 3)
        .into_iter()
        .map(|m| m.formula)
        .collect()
}

fn theorem_negations() -> Vec<Formula> {
    gen_theorems(CORPUS_SEED, THEOREMS, 2, 3)
        .into_iter()
        .map(|t| Formula::neg(t.formula))
        .collect()
}

#[test]
fn criterion_1_axiom_validity() {
    let mut failures = Vec::new();
    let mut slowest = Duration::ZERO;
    let items = axiom_formulas();
    for (pi, f) in &items {
        let cfg = SolverConfig::kde(*pi);
        let start = Instant::now();
        let v = solve_valid(f, &cfg).unwrap();
        let took = start.elapsed();
        slowest = slowest.max(took);
        if v.result != Outcome::Valid || took >= AXIOM_TIME {
            failures.push(format!(
                "pi={pi} {}: {} in {took:?}",
                f.display(cfg.syntax()),
                v.result.as_str()
            ));
        }
    }
    let ok = failures.is_empty();
    report(
        1,
        ok,
        &format!(
            "{} formulas valid, slowest {slowest:?}, limit {AXIOM_TIME:?}",
            items.len() - failures.len()
        ),
    );
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_2_invalidity_witnesses() {
    let mut failures = Vec::new();
    for (cfg, f) in witness_formulas() {
        let start = Instant::now();
        let v = solve_valid(&f, &cfg).unwrap();
        let witness = bounded_model_search(&Formula::neg(f.clone()), cfg.logic(), 3);
        let took = start.elapsed();
        let verified = witness
            .as_ref()
            .is_some_and(|(m, w)| !check_at(m, *w, &f) && is_dense_for(m, cfg.logic()).is_dense());
        if v.result != Outcome::Invalid || !verified || took >= WITNESS_TIME {
            failures.push(format!(
                "{}: {} verified={verified} {took:?}",
                f.display(cfg.syntax()),
                v.result.as_str()
            ));
        }
    }
    let ok = failures.is_empty();
    report(
        2,
        ok,
        &format!(
            "3 formulas, {} failures, countermodels checked for truth and density",
            failures.len()
        ),
    );
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_3_k_fragment_differential() {
    let spec = SuiteSpec::new(Suite::KFragment, CORPUS_SEED);
    let records = differential_run(&spec.corpus(), &SolverConfig::kde(spec.pi()));
    let bad: Vec<_> = records.iter().filter(|r| !r.agrees()).collect();
    let ok = bad.is_empty() && records.len() == 2874 + 2000;
    report(
        3,
        ok,
        &format!("{} formulas, {} disagreements", records.len(), bad.len()),
    );
    assert!(ok, "{:?}", &bad[..bad.len().min(5)]);
}

#[test]
fn criterion_4_completeness_sampling() {
    let truths = model_truths();
    let bad: Vec<String> = truths
        .iter()
        .filter(|f| !solve_sat(f, &SolverConfig::kde(2)).is_ok_and(|v| v.result == Outcome::Sat))
        .map(|f| f.display(SolverConfig::kde(2).syntax()).to_string())
        .collect();
    let ok = bad.is_empty();
    report(
        4,
        ok,
        &format!("{}/{} sampled truths sat", truths.len() - bad.len(), truths.len()),
    );
    assert!(ok, "{bad:?}");
}

#[test]
fn criterion_5_soundness_sampling() {
    let negations = theorem_negations();
    let bad: Vec<String> = negations
        .iter()
        .filter(|f| !solve_sat(f, &SolverConfig::kde(2)).is_ok_and(|v| v.result == Outcome::Unsat))
        .map(|f| f.display(SolverConfig::kde(2).syntax()).to_string())
        .collect();
    let ok = bad.is_empty();
    report(
        5,
        ok,
        &format!(
            "{}/{} theorem negations unsat",
            negations.len() - bad.len(),
            negations.len()
        ),
    );
    assert!(ok, "{bad:?}");
}

#[test]
fn criterion_6_structural_suites() {
    let props = ccs_property_suite(CORPUS_SEED, SEED_PAIRS, MAX_CSF);
    let mut checks = 0;
    let mut failures = 0;
    let mut lassos = 0;
    let mut notes = Vec::new();
    for (mut cfg, f) in full_corpus() {
        cfg.audit = true;
        let v = solve_sat(&f, &cfg).unwrap();
        checks += v.stats.audit_checks;
        failures += v.stats.audit_failures;
        lassos += v.stats.loops_detected;
        notes.extend(v.audit_notes);
    }
    let ok = props.ok() && props.instances == SEED_PAIRS && failures == 0 && checks > 0 && lassos > 0;
    report(
        6,
        ok,
        &format!(
            "CCS properties on {} seed pairs with {} failures; {checks} audited checks over continuations and {lassos} unrolled lassos, {failures} failures",
            props.instances,
            props.failures.len()
        ),
    );
    assert!(
        ok,
        "{:?} {:?}",
        &props.failures[..props.failures.len().min(5)],
        &notes[..notes.len().min(5)]
    );
}

fn powerset_filter(seed: &FormulaSet) -> Vec<FormulaSet> {
    let pool: Vec<_> = csf(seed).iter().cloned().collect();
    let mut out: Vec<FormulaSet> = (0u64..1 << pool.len())
        .map(|m| {
            pool.iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, f)| f.clone())
                .collect::<FormulaSet>()
        })
        .filter(|u| seed.is_subset(u) && is_saturated_consistent(u))
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_7_enumerators_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let mut ccs_seeds = 0;
    let mut ccs_bad = 0;
    while ccs_seeds < 1000 {
        let n = rng.gen_range(1..=3);
        let seed: FormulaSet = (0..n)
            .map(|_| {
                let size = rng.gen_range(1..=9);
                random_formula(&mut rng, &["p", "q", "r"], &[0, 1, 2], 2, size)
            })
            .collect();
        if csf(&seed).len() > MAX_CSF {
            continue;
        }
        ccs_seeds += 1;
        let mut got = enumerate_ccs(&seed, CcsMode::Branch);
        got.sort();
        ccs_bad += usize::from(got != powerset_filter(&seed));
    }
    let mut window_inputs = 0;
    let mut window_bad = 0;
    let mut windows_seen = 0;
    while window_inputs < 150 {
        let pi = rng.gen_range(1..=2);
        let indices: Vec<usize> = (0..=pi).collect();
        let size = rng.gen_range(2..=8);
        let u: FormulaSet = [random_formula(&mut rng, &["p", "q"], &indices, 2, size)]
            .into_iter()
            .collect();
        if !(1..=2).contains(&u.depth()) || csf(&u).len() > 10 || sf(&u).len() > 14 {
            continue;
        }
        window_inputs += 1;
        let lg = Logic::multi(pi);
        let uni = Universe::new(&u);
        let ub = uni.bits(&u).unwrap();
        let gen = Gen::new(&uni, lg, CcsMode::Branch);
        for k in 0..pi {
            let mut seeds = vec![uni.empty()];
            seeds.extend(
                uni.diamonds(&ub)
                    .into_iter()
                    .filter(|(i, _)| *i == k)
                    .map(|(_, id)| uni.singleton(id)),
            );
            for seed in seeds {
                let mut got = gen.windows(&ub, &seed, k);
                got.sort();
                windows_seen += got.len();
                window_bad += usize::from(got != brute_force_windows(&uni, lg, &ub, &seed, k));
            }
        }
    }
    let ok = ccs_bad == 0 && window_bad == 0 && windows_seen > 0;
    report(
        7,
        ok,
        &format!("{ccs_seeds} CCS seeds with {ccs_bad} mismatches; {window_inputs} window inputs ({windows_seen} windows) with {window_bad} mismatches"),
    );
    assert!(ok);
}

#[test]
fn criterion_8_space_behavior() {
    let mut worst: Option<(u64, u64, String)> = None;
    let mut over = 0;
    let mut items = 0;
    let mut disagreements = 0;
    for (cfg, f) in full_corpus() {
        let seen = solve_sat(&f, &cfg).unwrap();
        let mut counter_cfg = cfg.clone();
        counter_cfg.loop_mode = LoopMode::Counter;
        counter_cfg.counter_bound = Some(seen.stats.max_chain_len + 1);
        let v = solve_sat(&f, &counter_cfg).unwrap();
        disagreements += usize::from(v.result != seen.result);
        let pi = if cfg.mode == kde_core::solver::Mode::KdeMono {
            0
        } else {
            cfg.pi
        } as u64;
        let bound = (pi + 1) * (f.depth() as u64 + 1);
        let SolveStats { peak_live_windows, .. } = v.stats;
        items += 1;
        if peak_live_windows > bound {
            over += 1;
        }
        if worst.as_ref().is_none_or(|(p, b, _)| peak_live_windows * b > p * bound) {
            worst = Some((peak_live_windows, bound, f.display(cfg.syntax()).to_string()));
        }
    }

    let out = Command::new(env!("CARGO_BIN_EXE_kdepi"))
        .args([
            "bench",
            "--family",
            "density-chain",
            "--max-size",
            "8",
            "--pi",
            "1",
            "--loop",
            "counter",
            "--counter-bound",
            "6",
            "--no-time",
        ])
        .output()
        .unwrap();
    let bench: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = bench["rows"].as_array().unwrap();
    let bench_ok = out.status.success()
        && rows.len() == 8
        && rows
            .iter()
            .all(|r| r["peak_live_windows"].as_u64().unwrap() <= r["window_bound"].as_u64().unwrap());
    let fit = bench["peak_live_ccs_fit_exponent"].as_f64().unwrap_or(f64::NAN);

    let ok = over == 0 && disagreements == 0 && bench_ok;
    let (wp, wb, _) = worst.clone().unwrap_or_default();
    report(
        8,
        ok,
        &format!(
            "{items} counter-mode runs, {over} over (pi+1)(d+1), tightest {wp}/{wb}; density-chain peak_live_ccs fit exponent {fit:.3} (degree 2pi+4 = 6 expected at most)"
        ),
    );
    assert!(ok, "over={over} disagreements={disagreements} bench={bench}");
}

fn run_bin(args: &[&str]) -> (Vec<u8>, Option<i32>) {
    let out = Command::new(env!("CARGO_BIN_EXE_kdepi")).args(args).output().unwrap();
    (out.stdout, out.status.code())
}

#[test]
fn criterion_9_determinism() {
    let dir = std::env::temp_dir().join(format!("kdepi-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let trace = |n: u32| dir.join(format!("trace{n}.json")).to_string_lossy().into_owned();
    let runs: Vec<Vec<String>> = vec![
        vec![
            "gen",
            "--kind",
            "dense-model",
            "--seed",
            "7",
            "--size",
            "5",
            "--pi",
            "2",
        ],
        vec!["gen", "--kind", "formulas", "--seed", "7", "--count", "50", "--pi", "2"],
        vec!["gen", "--kind", "theorems", "--seed", "7", "--count", "30", "--pi", "2"],
        vec!["diff", "--suite", "theorems", "--seed", "7", "--count", "60"],
        vec!["diff", "--suite", "model-truths", "--seed", "7", "--count", "60"],
        vec![
            "diff",
            "--suite",
            "k-fragment",
            "--seed",
            "7",
            "--count",
            "100",
            "--max-size",
            "5",
        ],
        vec!["sat", "--pi", "2", "--audit", "<0>(p & <1>q) & [0][1][2]~q"],
        vec!["bench", "--family", "nested-diamond", "--max-size", "4", "--no-time"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut mismatches = Vec::new();
    for args in &runs {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        if run_bin(&a) != run_bin(&a) {
            mismatches.push(args.join(" "));
        }
    }
    let f = "<0>(p & <1>q) & [0][1]r";
    let (o1, c1) = run_bin(&["sat", "--pi", "1", "--trace", &trace(1), f]);
    let (o2, c2) = run_bin(&["sat", "--pi", "1", "--trace", &trace(2), f]);
    let same_trace = std::fs::read(trace(1)).unwrap() == std::fs::read(trace(2)).unwrap();
    if o1 != o2 || c1 != c2 || !same_trace {
        mismatches.push("sat with trace".into());
    }
    let (replay, code) = run_bin(&["replay", &trace(1)]);
    let replay_ok = code == Some(0) && String::from_utf8_lossy(&replay).contains("\"failures\":[]");
    let _ = std::fs::remove_dir_all(&dir);
    let ok = mismatches.is_empty() && replay_ok;
    report(
        9,
        ok,
        &format!(
            "{} repeated invocations, {} differ; trace replay ok={replay_ok}",
            runs.len() + 1,
            mismatches.len()
        ),
    );
    assert!(ok, "{mismatches:?}");
}
