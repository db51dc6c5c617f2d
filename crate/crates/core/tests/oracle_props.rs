use kde_core::formula::{parse, Syntax};
use kde_core::oracle::{
    differential_run, formulas_of_size, gen_theorems, k_sat, report_jsonl, Expect, Suite, SuiteSpec,
};
use kde_core::semantics::{bounded_model_search, check_at};
use kde_core::solver::SolverConfig;
use kde_core::window::Logic;

#[test]
fn k_tableau_agrees_with_model_search() {
    let mut sat = 0;
    for size in 1..=7 {
        for f in formulas_of_size(size, &["p"], 0) {
            let found = bounded_model_search(&f, Logic::multi(0), 3);
            if let Some((m, w)) = &found {
                assert!(check_at(m, *w, &f));
            }
            assert_eq!(k_sat(&f), found.is_some(), "{}", f.display(Syntax::Indexed { pi: 0 }));
            sat += usize::from(found.is_some());
        }
    }
    assert!(sat > 1000);
}

#[test]
fn theorem_derivations_replay() {
    let theorems = gen_theorems(9, 300, 2, 3);
    let mut density_steps = 0;
    for t in &theorems {
        t.replay(2).unwrap();
        density_steps += t
            .steps
            .iter()
            .filter(|s| matches!(s.rule, kde_core::oracle::Rule::Density(_)))
            .count();
    }
    assert!(density_steps > 50, "{density_steps}");
    let a = gen_theorems(9, 20, 2, 3);
    let b = gen_theorems(9, 20, 2, 3);
    assert!(a.iter().zip(&b).all(|(x, y)| x.formula == y.formula));
}

#[test]
fn differential_reports_are_ordered_and_stable() {
    let mut spec = SuiteSpec::new(Suite::KFragment, 4);
    spec.count = 50;
    spec.max_size = 4;
    let corpus = spec.corpus();
    let cfg = SolverConfig::kde(spec.pi());
    let a = differential_run(&corpus, &cfg);
    let b = differential_run(&corpus, &cfg);
    assert_eq!(report_jsonl(&a), report_jsonl(&b));
    assert!(a.iter().enumerate().all(|(i, r)| r.index == i && r.agrees()));
    let line = report_jsonl(&a[..1]);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    for key in ["formula", "solver_verdict", "oracle_verdict", "seed"] {
        assert!(v.get(key).is_some());
    }
}

#[test]
fn disagreements_are_reported() {
    let f = parse("p", Syntax::Indexed { pi: 1 }).unwrap();
    let r = differential_run(&[(f, Expect::Unsat, 0)], &SolverConfig::kde(1));
    assert!(!r[0].agrees());
}
