//! Reference procedures for differential testing: a K tableau on its own
//! formula type, a theorem generator with replayable derivations, formula
//! corpora, and the harness comparing them with the solver.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ccs::{enumerate_ccs, enumerate_extensions, is_ccs, is_saturated_consistent_in, CcsMode};
use crate::error::Error;
use crate::formula::{csf, Formula, FormulaSet, Node, Syntax};
use crate::semantics::{check_at, gen_dense_model, gen_dense_model_mono, KripkeModel};
use crate::solver::{solve_sat, Outcome, SolverConfig};
use crate::universe::{Bits, Universe};
use crate::window::{is_continuation, is_window, Logic, Row0, Window, WindowContext};

/// The tableau's own formula type, a single modality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum K {
    Var(String),
    Bot,
    Not(Box<K>),
    And(Box<K>, Box<K>),
    Nec(Box<K>),
}

fn to_k(f: &Formula) -> K {
    match f.node() {
        Node::Atom(p) => K::Var(p.to_string()),
        Node::Bottom => K::Bot,
        Node::Neg(g) => K::Not(Box::new(to_k(g))),
        Node::And(a, b) => K::And(Box::new(to_k(a)), Box::new(to_k(b))),
        Node::Box(_, g) => K::Nec(Box::new(to_k(g))),
    }
}

/// Satisfiability in K, reading every box as the same modality.
pub fn k_sat(f: &Formula) -> bool {
    let mut memo = HashMap::new();
    tableau(BTreeSet::from([to_k(f)]), &mut memo)
}

fn tableau(gamma: BTreeSet<K>, memo: &mut HashMap<BTreeSet<K>, bool>) -> bool {
    if let Some(hit) = memo.get(&gamma) {
        return *hit;
    }
    let result = expand(&gamma, memo);
    memo.insert(gamma, result);
    result
}

fn expand(gamma: &BTreeSet<K>, memo: &mut HashMap<BTreeSet<K>, bool>) -> bool {
    let with = |extra: Vec<K>, drop: &K| {
        let mut g = gamma.clone();
        g.remove(drop);
        g.extend(extra);
        g
    };
    for f in gamma {
        match f {
            K::Bot => return false,
            K::And(a, b) => return tableau(with(vec![(**a).clone(), (**b).clone()], f), memo),
            K::Not(g) => match &**g {
                K::Bot => return tableau(with(vec![], f), memo),
                K::Not(h) => return tableau(with(vec![(**h).clone()], f), memo),
                K::And(a, b) => {
                    let na = K::Not(a.clone());
                    let nb = K::Not(b.clone());
                    return tableau(with(vec![na], f), memo) || tableau(with(vec![nb], f), memo);
                }
                _ => {}
            },
            _ => {}
        }
    }
    // Only literals, boxes and negated boxes remain.
    for f in gamma {
        if gamma.contains(&K::Not(Box::new(f.clone()))) {
            return false;
        }
    }
    let boxed: Vec<K> = gamma
        .iter()
        .filter_map(|f| match f {
            K::Nec(g) => Some((**g).clone()),
            _ => None,
        })
        .collect();
    gamma.iter().all(|f| match f {
        K::Not(g) => match &**g {
            K::Nec(h) => {
                let mut succ: BTreeSet<K> = boxed.iter().cloned().collect();
                succ.insert(K::Not(h.clone()));
                tableau(succ, memo)
            }
            _ => true,
        },
        _ => true,
    })
}

/// Rule names of the Hilbert system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Rule {
    /// Instance of a classical tautology schema.
    Cpl(usize),
    /// `□ᵢ⊤`.
    A1(usize),
    /// `□ᵢp ∧ □ᵢq → □ᵢ(p ∧ q)`.
    A2(usize),
    /// `□ᵢ□ᵢ₊₁p → □ᵢp`.
    Density(usize),
    ModusPonens(usize, usize),
    Necessitation(usize, usize),
}

#[derive(Debug, Clone)]
pub struct Step {
    pub formula: Formula,
    pub rule: Rule,
    /// Substitution applied to the axiom schema's atoms.
    pub subst: BTreeMap<String, Formula>,
}

#[derive(Debug, Clone)]
pub struct Theorem {
    pub formula: Formula,
    pub steps: Vec<Step>,
}

fn atom(p: &str) -> Formula {
    Formula::atom(p)
}

fn imp(a: Formula, b: Formula) -> Formula {
    Formula::implies(a, b)
}

/// Classical tautology schemas over `p`, `q`, `r`.
pub fn cpl_schemas() -> Vec<Formula> {
    let (p, q, r) = (atom("p"), atom("q"), atom("r"));
    vec![
        imp(p.clone(), imp(q.clone(), p.clone())),
        imp(p.clone(), imp(q.clone(), Formula::and(p.clone(), q.clone()))),
        imp(Formula::and(p.clone(), q.clone()), p.clone()),
        imp(Formula::and(p.clone(), q.clone()), q.clone()),
        imp(Formula::neg(Formula::neg(p.clone())), p.clone()),
        imp(p.clone(), p.clone()),
        imp(
            imp(p.clone(), q.clone()),
            imp(imp(q.clone(), r.clone()), imp(p.clone(), r.clone())),
        ),
        Formula::or(p.clone(), Formula::neg(p.clone())),
        imp(
            imp(p.clone(), q.clone()),
            imp(Formula::neg(q.clone()), Formula::neg(p.clone())),
        ),
    ]
}

fn axiom_schema(rule: &Rule) -> Option<Formula> {
    let (p, q) = (atom("p"), atom("q"));
    match *rule {
        Rule::Cpl(i) => cpl_schemas().get(i).cloned(),
        Rule::A1(i) => Some(Formula::boxed(i, Formula::top())),
        Rule::A2(i) => Some(imp(
            Formula::and(Formula::boxed(i, p.clone()), Formula::boxed(i, q.clone())),
            Formula::boxed(i, Formula::and(p, q)),
        )),
        Rule::Density(i) => Some(imp(
            Formula::boxed(i, Formula::boxed(i + 1, p.clone())),
            Formula::boxed(i, p),
        )),
        _ => None,
    }
}

fn substitute(f: &Formula, subst: &BTreeMap<String, Formula>) -> Formula {
    f.substitute(&|name| subst.get(name).cloned())
}

/// Propositional tautology check treating boxed subformulas as atoms.
fn is_tautology(f: &Formula) -> bool {
    fn leaves(f: &Formula, out: &mut BTreeSet<Formula>) {
        match f.node() {
            Node::Neg(g) => leaves(g, out),
            Node::And(a, b) => {
                leaves(a, out);
                leaves(b, out);
            }
            Node::Bottom => {}
            _ => {
                out.insert(f.clone());
            }
        }
    }
    fn eval(f: &Formula, v: &BTreeMap<Formula, bool>) -> bool {
        match f.node() {
            Node::Neg(g) => !eval(g, v),
            Node::And(a, b) => eval(a, v) && eval(b, v),
            Node::Bottom => false,
            _ => v[f],
        }
    }
    let mut ls = BTreeSet::new();
    leaves(f, &mut ls);
    let ls: Vec<Formula> = ls.into_iter().collect();
    (0u64..1 << ls.len()).all(|mask| {
        let v = ls
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), mask >> i & 1 == 1))
            .collect();
        eval(f, &v)
    })
}

impl Theorem {
    /// Checks that every step follows from earlier ones by its rule.
    pub fn replay(&self, pi: usize) -> Result<(), String> {
        for (n, step) in self.steps.iter().enumerate() {
            let earlier = |i: usize| {
                if i < n {
                    Ok(&self.steps[i].formula)
                } else {
                    Err(format!("step {n} cites later step {i}"))
                }
            };
            let ok = match &step.rule {
                Rule::ModusPonens(i, j) => *earlier(*j)? == imp(earlier(*i)?.clone(), step.formula.clone()),
                Rule::Necessitation(i, k) => *k <= pi && step.formula == Formula::boxed(*k, earlier(*i)?.clone()),
                rule => {
                    let schema = axiom_schema(rule).ok_or_else(|| format!("step {n}: unknown schema"))?;
                    let index_ok = match rule {
                        Rule::A1(i) | Rule::A2(i) => *i <= pi,
                        Rule::Density(i) => *i < pi,
                        _ => true,
                    };
                    let taut_ok = !matches!(rule, Rule::Cpl(_)) || is_tautology(&schema);
                    index_ok && taut_ok && substitute(&schema, &step.subst) == step.formula
                }
            };
            if !ok {
                return Err(format!("step {n} ({:?}) does not follow", step.rule));
            }
        }
        match self.steps.last() {
            Some(last) if last.formula == self.formula => Ok(()),
            _ => Err("derivation does not end in the theorem".into()),
        }
    }
}

/// Random formula over `atoms` with boxes of index `0..=pi`, modal depth at
/// most `depth`, and roughly `size` symbols.
pub fn random_formula(rng: &mut impl Rng, atoms: &[&str], indices: &[usize], depth: usize, size: usize) -> Formula {
    if size <= 1 || (depth == 0 && size <= 2) {
        return if rng.gen_bool(0.1) {
            Formula::bottom()
        } else {
            Formula::atom(atoms.choose(rng).expect("atoms"))
        };
    }
    let choice = rng.gen_range(0..10);
    let choice = if size < 3 && (3..=6).contains(&choice) {
        0
    } else {
        choice
    };
    match choice {
        0..=2 => Formula::neg(random_formula(rng, atoms, indices, depth, size - 1)),
        3..=5 => {
            let left = rng.gen_range(1..size - 1);
            Formula::and(
                random_formula(rng, atoms, indices, depth, left),
                random_formula(rng, atoms, indices, depth, size - 1 - left),
            )
        }
        6 => {
            let left = rng.gen_range(1..size - 1);
            Formula::implies(
                random_formula(rng, atoms, indices, depth, left),
                random_formula(rng, atoms, indices, depth, size - 1 - left),
            )
        }
        _ if depth == 0 => Formula::neg(random_formula(rng, atoms, indices, 0, size - 1)),
        7 | 8 => Formula::boxed(
            *indices.choose(rng).expect("indices"),
            random_formula(rng, atoms, indices, depth - 1, size - 1),
        ),
        _ => Formula::diamond(
            *indices.choose(rng).expect("indices"),
            random_formula(rng, atoms, indices, depth - 1, size - 1),
        ),
    }
}

/// Every core formula of exactly `size` symbols over `atoms` with boxes of
/// the single index `index`.
pub fn formulas_of_size(size: usize, atoms: &[&str], index: usize) -> Vec<Formula> {
    let mut table: Vec<Vec<Formula>> = vec![Vec::new()];
    for s in 1..=size {
        let mut out = Vec::new();
        if s == 1 {
            out.extend(atoms.iter().map(|a| Formula::atom(a)));
            out.push(Formula::bottom());
        } else {
            for g in &table[s - 1] {
                out.push(Formula::neg(g.clone()));
                out.push(Formula::boxed(index, g.clone()));
            }
            for l in 1..s - 1 {
                for a in &table[l] {
                    for b in &table[s - 1 - l] {
                        out.push(Formula::and(a.clone(), b.clone()));
                    }
                }
            }
        }
        table.push(out);
    }
    table.swap_remove(size)
}

/// Theorem generator over `pi`.
pub struct TheoremGen {
    rng: ChaCha8Rng,
    pi: usize,
    max_depth: usize,
}

impl TheoremGen {
    pub fn new(seed: u64, pi: usize, max_depth: usize) -> TheoremGen {
        TheoremGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pi,
            max_depth,
        }
    }

    fn small(&mut self, depth: usize) -> Formula {
        let indices: Vec<usize> = (0..=self.pi).collect();
        let size = self.rng.gen_range(1..=4);
        random_formula(&mut self.rng, &["p", "q", "r"], &indices, depth, size)
    }

    fn axiom(&mut self, steps: &mut Vec<Step>, rule: Rule, subst: BTreeMap<String, Formula>) -> usize {
        let formula = substitute(&axiom_schema(&rule).expect("axiom"), &subst);
        steps.push(Step { formula, rule, subst });
        steps.len() - 1
    }

    fn mp(&mut self, steps: &mut Vec<Step>, a: usize, ab: usize) -> usize {
        let Node::Neg(inner) = steps[ab].formula.node() else {
            panic!("not an implication")
        };
        let Node::And(_, nb) = inner.node() else {
            panic!("not an implication")
        };
        let Node::Neg(b) = nb.node() else {
            panic!("not an implication")
        };
        steps.push(Step {
            formula: b.clone(),
            rule: Rule::ModusPonens(a, ab),
            subst: BTreeMap::new(),
        });
        steps.len() - 1
    }

    fn nec(&mut self, steps: &mut Vec<Step>, a: usize, k: usize) -> usize {
        let formula = Formula::boxed(k, steps[a].formula.clone());
        steps.push(Step {
            formula,
            rule: Rule::Necessitation(a, k),
            subst: BTreeMap::new(),
        });
        steps.len() - 1
    }

    fn subst(&mut self, atoms: &[&str], depth: usize) -> BTreeMap<String, Formula> {
        atoms.iter().map(|a| (a.to_string(), self.small(depth))).collect()
    }

    /// Derives one theorem into `steps`, returning its step index.
    fn derive(&mut self, steps: &mut Vec<Step>, budget: usize) -> usize {
        let pi = self.pi;
        let pick = if budget == 0 {
            self.rng.gen_range(0..3)
        } else {
            self.rng.gen_range(0..8)
        };
        match pick {
            0 if pi > 0 => {
                let i = self.rng.gen_range(0..pi);
                let s = self.subst(&["p"], 1);
                self.axiom(steps, Rule::Density(i), s)
            }
            1 => {
                let c = self.rng.gen_range(0..cpl_schemas().len());
                let s = self.subst(&["p", "q", "r"], 1);
                self.axiom(steps, Rule::Cpl(c), s)
            }
            0 | 2 => {
                let i = self.rng.gen_range(0..=pi);
                if self.rng.gen_bool(0.5) {
                    self.axiom(steps, Rule::A1(i), BTreeMap::new())
                } else {
                    let s = self.subst(&["p", "q"], 1);
                    self.axiom(steps, Rule::A2(i), s)
                }
            }
            3 => {
                let a = self.derive(steps, budget - 1);
                let k = self.rng.gen_range(0..=pi);
                self.nec(steps, a, k)
            }
            4 => {
                // A, B ⊢ A ∧ B via p → (q → p ∧ q).
                let a = self.derive(steps, budget - 1);
                let b = self.derive(steps, budget - 1);
                self.conj(steps, a, b)
            }
            5 if pi > 0 => {
                // X ⊢ □ᵢX through □ᵢ□ᵢ₊₁X and density.
                let x = self.derive(steps, budget - 1);
                let i = self.rng.gen_range(0..pi);
                let inner = self.nec(steps, x, i + 1);
                let outer = self.nec(steps, inner, i);
                let subst = BTreeMap::from([("p".to_string(), steps[x].formula.clone())]);
                let ax = self.axiom(steps, Rule::Density(i), subst);
                self.mp(steps, outer, ax)
            }
            6 => {
                // A ⊢ B → A for a random B, which may carry diamonds.
                let a = self.derive(steps, budget - 1);
                let d = self.max_depth.min(2);
                let b = self.small(d);
                let subst = BTreeMap::from([("p".to_string(), steps[a].formula.clone()), ("q".to_string(), b)]);
                let ax = self.axiom(steps, Rule::Cpl(0), subst);
                self.mp(steps, a, ax)
            }
            _ => {
                // □ᵢA, □ᵢB ⊢ □ᵢ(A ∧ B) through A2.
                let a = self.derive(steps, budget - 1);
                let b = self.derive(steps, budget - 1);
                let i = self.rng.gen_range(0..=pi);
                let ba = self.nec(steps, a, i);
                let bb = self.nec(steps, b, i);
                let both = self.conj(steps, ba, bb);
                let subst = BTreeMap::from([
                    ("p".to_string(), steps[a].formula.clone()),
                    ("q".to_string(), steps[b].formula.clone()),
                ]);
                let ax = self.axiom(steps, Rule::A2(i), subst);
                self.mp(steps, both, ax)
            }
        }
    }

    fn conj(&mut self, steps: &mut Vec<Step>, a: usize, b: usize) -> usize {
        let subst = BTreeMap::from([
            ("p".to_string(), steps[a].formula.clone()),
            ("q".to_string(), steps[b].formula.clone()),
        ]);
        let ax = self.axiom(steps, Rule::Cpl(1), subst);
        let half = self.mp(steps, a, ax);
        self.mp(steps, b, half)
    }

    /// Next theorem with modal depth at most `max_depth`. Derivations are
    /// cut down to the steps the theorem depends on.
    pub fn next_theorem(&mut self) -> Theorem {
        loop {
            let mut steps = Vec::new();
            let budget = self.rng.gen_range(0..=2);
            let top = self.derive(&mut steps, budget);
            let formula = steps[top].formula.clone();
            if formula.depth() <= self.max_depth && formula.size() <= 60 {
                steps.truncate(top + 1);
                return Theorem { formula, steps };
            }
        }
    }
}

pub fn gen_theorems(seed: u64, count: usize, pi: usize, max_depth: usize) -> Vec<Theorem> {
    let mut g = TheoremGen::new(seed, pi, max_depth);
    (0..count).map(|_| g.next_theorem()).collect()
}

/// A `(model, world, formula)` triple with the formula true at the world.
#[derive(Debug, Clone)]
pub struct ModelTruth {
    pub model: KripkeModel,
    pub world: usize,
    pub formula: Formula,
    pub seed: u64,
}

/// Samples formulas true at worlds of random dense models.
pub fn gen_model_truths(
    seed: u64,
    count: usize,
    pi: usize,
    mono: bool,
    max_worlds: usize,
    depth: usize,
) -> Vec<ModelTruth> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = if mono { vec![0] } else { (0..=pi).collect() };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mseed: u64 = rng.gen();
        let size = rng.gen_range(1..=max_worlds);
        let edge_p = rng.gen_range(0.2..0.7);
        let model = if mono {
            gen_dense_model_mono(mseed, size, &["p", "q"], edge_p)
        } else {
            gen_dense_model(mseed, pi, size, &["p", "q"], edge_p)
        };
        let world = rng.gen_range(0..size);
        let fsize = rng.gen_range(3..=14);
        let d = rng.gen_range(1..=depth);
        let formula = random_formula(&mut rng, &["p", "q"], &indices, d, fsize);
        let formula = if check_at(&model, world, &formula) {
            formula
        } else {
            Formula::neg(formula)
        };
        if formula.depth() >= 1 {
            out.push(ModelTruth {
                model,
                world,
                formula,
                seed: mseed,
            });
        }
    }
    out
}

/// One line of a differential report.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct DiffRecord {
    pub index: usize,
    pub formula: String,
    pub solver_verdict: String,
    pub oracle_verdict: String,
    pub seed: u64,
}

impl DiffRecord {
    pub fn agrees(&self) -> bool {
        self.solver_verdict == self.oracle_verdict
    }
}

/// What the oracle says about a corpus item.
#[derive(Debug, Clone)]
pub enum Expect {
    /// Decide with the K tableau.
    KOracle,
    Sat,
    Unsat,
}

/// Runs the solver on each item and compares with the oracle's verdict.
pub fn differential_run(corpus: &[(Formula, Expect, u64)], cfg: &SolverConfig) -> Vec<DiffRecord> {
    corpus
        .par_iter()
        .enumerate()
        .map(|(index, (f, expect, seed))| {
            let oracle = match expect {
                Expect::KOracle => {
                    if k_sat(f) {
                        "sat"
                    } else {
                        "unsat"
                    }
                }
                Expect::Sat => "sat",
                Expect::Unsat => "unsat",
            };
            let solver = match solve_sat(f, cfg) {
                Ok(v) => v.result.as_str().to_string(),
                Err(e) => format!("error: {e}"),
            };
            DiffRecord {
                index,
                formula: f.display(cfg.syntax()).to_string(),
                solver_verdict: solver,
                oracle_verdict: oracle.to_string(),
                seed: *seed,
            }
        })
        .collect()
}

/// Serializes a report as JSON lines.
pub fn report_jsonl(records: &[DiffRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Convenience: verdict of the solver as an [`Outcome`].
pub fn solver_outcome(f: &Formula, cfg: &SolverConfig) -> Option<Outcome> {
    solve_sat(f, cfg).ok().map(|v| v.result)
}

/// The differential suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Formulas whose boxes all carry the top index, checked against K.
    KFragment,
    /// Negated generated theorems, expected unsat.
    Theorems,
    /// Formulas sampled true on dense models, expected sat.
    ModelTruths,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Suite, String> {
        match s {
            "k-fragment" => Ok(Suite::KFragment),
            "theorems" => Ok(Suite::Theorems),
            "model-truths" => Ok(Suite::ModelTruths),
            other => Err(format!("unknown suite `{other}`")),
        }
    }
}

/// Corpus sizes and seed for a suite run.
#[derive(Debug, Clone, Copy)]
pub struct SuiteSpec {
    pub suite: Suite,
    pub seed: u64,
    /// Random items; the k-fragment suite adds the exhaustive part on top.
    pub count: usize,
    /// Largest size of the exhaustive k-fragment part.
    pub max_size: usize,
}

impl SuiteSpec {
    pub fn new(suite: Suite, seed: u64) -> SuiteSpec {
        let count = match suite {
            Suite::KFragment => 2000,
            Suite::Theorems => 500,
            Suite::ModelTruths => 1000,
        };
        SuiteSpec {
            suite,
            seed,
            count,
            max_size: 7,
        }
    }

    /// The number of modality indices the suite's formulas use.
    pub fn pi(&self) -> usize {
        match self.suite {
            Suite::KFragment => 1,
            Suite::Theorems | Suite::ModelTruths => 2,
        }
    }

    pub fn corpus(&self) -> Vec<(Formula, Expect, u64)> {
        match self.suite {
            Suite::KFragment => {
                let pi = self.pi();
                let mut out: Vec<(Formula, Expect, u64)> = (1..=self.max_size)
                    .flat_map(|s| formulas_of_size(s, &["p"], pi))
                    .map(|f| (f, Expect::KOracle, 0))
                    .collect();
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                for _ in 0..self.count {
                    let item: u64 = rng.gen();
                    let mut item_rng = ChaCha8Rng::seed_from_u64(item);
                    let size = item_rng.gen_range(2..=16);
                    let depth = item_rng.gen_range(1..=3);
                    let f = random_formula(&mut item_rng, &["p", "q"], &[pi], depth, size);
                    out.push((f, Expect::KOracle, item));
                }
                out
            }
            Suite::Theorems => gen_theorems(self.seed, self.count, self.pi(), 3)
                .into_iter()
                .map(|t| (Formula::neg(t.formula), Expect::Unsat, self.seed))
                .collect(),
            Suite::ModelTruths => gen_model_truths(self.seed, self.count, self.pi(), false, 6, 3)
                .into_iter()
                .map(|m| (m.formula, Expect::Sat, m.seed))
                .collect(),
        }
    }
}

/// Tallies of a check of the CCS properties over seed pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CcsPropertyReport {
    pub instances: usize,
    pub union_closure: usize,
    pub splits: usize,
    /// Splits of saturations of `s2 ∪ v` where `v` is its own only saturation.
    pub unique_splits: usize,
    /// Splits of extensions of an arbitrary saturated `v` by `s2`.
    pub extension_splits: usize,
    pub failures: Vec<String>,
}

impl CcsPropertyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A random pair of small seed sets over `p`, `q` whose joint classical
/// closure has at most `max_csf` members.
pub fn random_seed_pair(rng: &mut impl Rng, max_csf: usize) -> (FormulaSet, FormulaSet) {
    loop {
        let pick = |rng: &mut ChaCha8Rng| -> FormulaSet {
            let n = rng.gen_range(1..=3);
            (0..n)
                .map(|_| {
                    let size = rng.gen_range(1..=8);
                    random_formula(rng, &["p", "q"], &[0, 1], 2, size)
                })
                .collect()
        };
        let mut sub = ChaCha8Rng::seed_from_u64(rng.gen());
        let (s, t) = (pick(&mut sub), pick(&mut sub));
        if csf(&s.union(&t)).len() <= max_csf {
            return (s, t);
        }
    }
}

/// Checks the four CCS properties on `(s, s2)`, adding to `report`.
pub fn check_ccs_properties(s: &FormulaSet, s2: &FormulaSet, report: &mut CcsPropertyReport) {
    let mode = CcsMode::Branch;
    let show = |x: &FormulaSet| {
        x.iter()
            .map(|f| f.display(Syntax::Indexed { pi: 1 }).to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut fail = |msg: String| report.failures.push(msg);
    let mut union_closure = 0;
    let mut splits = 0;
    let mut unique_splits = 0;
    let mut extension_splits = 0;
    let both = s.union(s2);

    // Union closure: u ∈ CCS(s ∪ v), v ∈ CCS(s2) ⇒ u ∈ CCS(s ∪ s2).
    for v in enumerate_ccs(s2, mode) {
        for u in enumerate_ccs(&s.union(&v), mode) {
            union_closure += 1;
            if !is_ccs(&u, &both) {
                fail(format!(
                    "union closure: s={{{}}} s'={{{}}} u={{{}}}",
                    show(s),
                    show(s2),
                    show(&u)
                ));
            }
        }
    }

    // Splitting: u ∈ CCS(s ∪ s2) splits as v ∪ v' with v ∈ CCS(s), v' ∈ CCS(s2).
    let (cs, cs2) = (csf(s), csf(s2));
    for u in enumerate_ccs(&both, mode) {
        splits += 1;
        let v: FormulaSet = u.iter().filter(|f| cs.contains(f)).cloned().collect();
        let v2: FormulaSet = u.iter().filter(|f| cs2.contains(f)).cloned().collect();
        if !(is_ccs(&v, s) && is_ccs(&v2, s2) && v.union(&v2) == u) {
            fail(format!(
                "split: s={{{}}} s'={{{}}} u={{{}}}",
                show(s),
                show(s2),
                show(&u)
            ));
        }
    }

    // Splitting over a saturated v, with d(u ∖ v) ≤ d(s2); v ranges over saturations of s.
    let uni = Universe::new(&both);
    let s2_bits = uni.bits(s2).expect("s' in universe");
    let d2 = s2.depth();
    for v in enumerate_ccs(s, mode) {
        let vb = uni.bits(&v).expect("v in universe");
        let split = |u: &FormulaSet| -> bool {
            let cands = enumerate_ccs(s2, mode);
            let diff = u.difference(&v);
            cands.iter().any(|v2| v.union(v2) == *u) && diff.depth() <= d2
        };
        if enumerate_ccs(&v, mode) == [v.clone()] {
            for u in enumerate_ccs(&s2.union(&v), mode) {
                unique_splits += 1;
                if !split(&u) {
                    fail(format!(
                        "split over v: s'={{{}}} v={{{}}} u={{{}}}",
                        show(s2),
                        show(&v),
                        show(&u)
                    ));
                }
            }
        }
        for ub in enumerate_extensions(&uni, &vb, &s2_bits, mode) {
            extension_splits += 1;
            let u = uni.set(&ub);
            if !split(&u) {
                fail(format!(
                    "split over extension: s'={{{}}} v={{{}}} u={{{}}}",
                    show(s2),
                    show(&v),
                    show(&u)
                ));
            }
        }
    }
    report.instances += 1;
    report.union_closure += union_closure;
    report.splits += splits;
    report.unique_splits += unique_splits;
    report.extension_splits += extension_splits;
}

/// Runs [`check_ccs_properties`] on `count` random seed pairs.
pub fn ccs_property_suite(seed: u64, count: usize, max_csf: usize) -> CcsPropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CcsPropertyReport::default();
    for _ in 0..count {
        let (s, t) = random_seed_pair(&mut rng, max_csf);
        check_ccs_properties(&s, &t, &mut report);
    }
    report
}

/// Every saturated consistent subset of the universe members of depth
/// below `d` (any depth when `d` is `None`).
pub fn saturated_subsets(uni: &Universe, d: Option<usize>) -> Vec<Bits> {
    let pool: Vec<usize> = (0..uni.len()).filter(|&i| d.is_none_or(|d| uni.depth(i) < d)).collect();
    assert!(pool.len() <= 20, "universe too large for brute force");
    (0u64..1 << pool.len())
        .filter_map(|mask| {
            let mut b = uni.empty();
            for (j, &id) in pool.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    b.insert(id);
                }
            }
            is_saturated_consistent_in(uni, &b).then_some(b)
        })
        .collect()
}

/// Windows for `(u, v₀)` at level `k` with `v₀` seeded by `seed`, found by
/// filtering every candidate structure with [`is_window`].
pub fn brute_force_windows(uni: &Universe, lg: Logic, u: &Bits, seed: &Bits, k: usize) -> Vec<(Window, Bits)> {
    let mut memo = HashMap::new();
    let mut out = Vec::new();
    let d = uni.set_depth(u);
    let candidates = brute_structures(uni, lg, u, k, &mut memo);
    for v0 in saturated_subsets(uni, None) {
        let ctx = WindowContext::top(uni, u, k, &v0, seed);
        for w in &candidates {
            let w = with_row0(w, &v0);
            if is_window(uni, lg, &w, &ctx) {
                out.push((w, v0.clone()));
            }
        }
    }
    debug_assert!(d > 0 || out.iter().all(|(w, _)| w.len().is_none_or(|n| n == 0)));
    out.sort();
    out
}

/// `k`-continuations of `w1` under `u`, by filtering every window.
pub fn brute_force_continuations(
    uni: &Universe,
    lg: Logic,
    u: &Bits,
    k: usize,
    w1: &Window,
) -> Result<Vec<Window>, Error> {
    let mut out = Vec::new();
    let n = uni.set_depth(u);
    for (w2, v0) in brute_force_windows(uni, lg, u, &uni.empty(), k) {
        let ctx = WindowContext {
            u: u.clone(),
            k,
            n,
            v0,
            row0: Row0::Seeded(uni.empty()),
        };
        if is_continuation(uni, lg, &w2, w1, &ctx)? {
            out.push(w2);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn with_row0(w: &Window, v0: &Bits) -> Window {
    match w {
        Window::Empty => Window::Empty,
        Window::Node(n) => {
            let mut rows = n.rows.clone();
            rows[0] = v0.clone();
            let mut subs = n.subs.clone();
            if let Some(first) = subs.first_mut() {
                *first = with_row0(first, v0);
            }
            Window::node(rows, subs)
        }
    }
}

// Every structure of the right shape below parent `p` at level `j`, with a
// placeholder row 0 that the caller fixes. Subwindows are themselves
// filtered with `is_window` against their fixed row 0.
fn brute_structures(
    uni: &Universe,
    lg: Logic,
    p: &Bits,
    j: usize,
    memo: &mut HashMap<(Bits, usize), Vec<Window>>,
) -> Vec<Window> {
    if let Some(hit) = memo.get(&(p.clone(), j)) {
        return hit.clone();
    }
    let d = uni.set_depth(p);
    let out = if lg.empty_at(j, d) {
        vec![Window::Empty]
    } else {
        let rows = saturated_subsets(uni, Some(d));
        let mut out = Vec::new();
        let mut tails: Vec<Vec<Bits>> = vec![vec![]];
        for _ in 0..d {
            tails = tails
                .into_iter()
                .flat_map(|t| {
                    rows.iter()
                        .map(move |r| t.iter().cloned().chain(std::iter::once(r.clone())).collect())
                })
                .collect();
        }
        for tail in tails {
            let mut partial: Vec<(Vec<Bits>, Vec<Window>)> = vec![(
                std::iter::once(uni.empty()).chain(tail.iter().cloned()).collect(),
                vec![],
            )];
            // Subwindow i sits under row i + 1 with row 0 equal to row i;
            // row 0 of the structure is chosen later, so subwindow 0 is
            // stored as a bare structure and checked by the caller.
            for i in 0..d {
                let parent = tail[i].clone();
                let subs = brute_structures(uni, lg, &parent, j + 1, memo);
                let mut next = Vec::new();
                for (rows_i, subs_i) in &partial {
                    for s in &subs {
                        let fixed = if i == 0 { s.clone() } else { with_row0(s, &rows_i[i]) };
                        if i > 0 {
                            let ctx = WindowContext {
                                u: parent.clone(),
                                k: j + 1,
                                n: uni.set_depth(&parent),
                                v0: rows_i[i].clone(),
                                row0: Row0::Fixed,
                            };
                            if !is_window(uni, lg, &fixed, &ctx) {
                                continue;
                            }
                        }
                        let mut subs_n = subs_i.clone();
                        subs_n.push(fixed);
                        next.push((rows_i.clone(), subs_n));
                    }
                }
                partial = next;
            }
            out.extend(partial.into_iter().map(|(rows, subs)| Window::node(rows, subs)));
        }
        out
    };
    memo.insert((p.clone(), j), out.clone());
    out
}
