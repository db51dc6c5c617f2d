//! Backtracking decision procedure over windows.
//!
//! `Sat` checks every diamond of a saturated set: top-level diamonds of
//! index `π` through a plain successor set, the others through a window and
//! an unbounded chain of continuations of it. A chain succeeds once it
//! repeats a window (seen-set mode) or reaches a fixed length (counter
//! mode). Subwindows open fresh chains one level deeper.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};

use crate::ccs::CcsMode;
use crate::error::{Error, Result};
use crate::formula::{parse, Formula, FormulaSet, Syntax};
use crate::generate::Gen;
use crate::universe::{Bits, Universe};
use crate::window::{
    bits_from_json, degree_bound_holds, extend_long, is_continuation, is_window, members, window_from_json,
    window_to_json, Logic, Row0, Window, WindowContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    KdePi,
    KdeMono,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoopMode {
    #[default]
    SeenSet,
    Counter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub pi: usize,
    pub mode: Mode,
    pub loop_mode: LoopMode,
    /// Chain length `N` for counter mode.
    pub counter_bound: Option<u64>,
    pub ccs_mode: CcsMode,
    pub trace: bool,
    /// Re-checks every accepted continuation and detected loop.
    pub audit: bool,
    pub step_budget: Option<u64>,
    pub time_budget_ms: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            pi: 1,
            mode: Mode::KdePi,
            loop_mode: LoopMode::SeenSet,
            counter_bound: None,
            ccs_mode: CcsMode::Branch,
            trace: false,
            audit: false,
            step_budget: None,
            time_budget_ms: None,
        }
    }
}

impl SolverConfig {
    pub fn kde(pi: usize) -> SolverConfig {
        SolverConfig {
            pi,
            ..SolverConfig::default()
        }
    }

    pub fn mono() -> SolverConfig {
        SolverConfig {
            pi: 0,
            mode: Mode::KdeMono,
            ..SolverConfig::default()
        }
    }

    pub fn logic(&self) -> Logic {
        match self.mode {
            Mode::KdePi => Logic::multi(self.pi),
            Mode::KdeMono => Logic::mono(),
        }
    }

    pub fn syntax(&self) -> Syntax {
        match self.mode {
            Mode::KdePi => Syntax::Indexed { pi: self.pi },
            Mode::KdeMono => Syntax::Mono,
        }
    }

    pub fn parse(&self, text: &str) -> Result<Formula> {
        parse(text, self.syntax())
    }

    pub fn validate(&self) -> Result<()> {
        if self.loop_mode == LoopMode::Counter && self.counter_bound.is_none() {
            return Err(Error::Config("counter mode needs a counter bound".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub choice_points: u64,
    pub backtracks: u64,
    pub peak_live_windows: u64,
    pub peak_live_ccs: u64,
    pub max_sat_depth: u64,
    pub continuation_steps: u64,
    pub loops_detected: u64,
    pub max_chain_len: u64,
    pub audit_checks: u64,
    pub audit_failures: u64,
    pub shape_mismatches: u64,
    pub steps: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Sat,
    Unsat,
    Valid,
    Invalid,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Sat => "sat",
            Outcome::Unsat => "unsat",
            Outcome::Valid => "valid",
            Outcome::Invalid => "invalid",
        }
    }

    /// Process exit code: 0 for sat/valid, 1 for unsat/invalid.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Sat | Outcome::Valid => 0,
            Outcome::Unsat | Outcome::Invalid => 1,
        }
    }
}

/// A repeating chain: windows `prefix..` recur with this period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lasso {
    pub prefix: usize,
    pub period: usize,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub result: Outcome,
    pub stats: SolveStats,
    pub trace: Option<Value>,
    pub lassos: Vec<Lasso>,
    /// Descriptions of failed audit checks, capped.
    pub audit_notes: Vec<String>,
}

impl Verdict {
    pub fn is_positive(&self) -> bool {
        matches!(self.result, Outcome::Sat | Outcome::Valid)
    }

    /// Machine output: result, stats, and loop certificates.
    pub fn to_json(&self) -> Value {
        json!({
            "result": self.result.as_str(),
            "stats": self.stats,
            "lassos": self.lassos,
        })
    }
}

/// One chain of continuations explored on the successful path.
#[derive(Debug, Clone)]
struct ChainRecord {
    k: usize,
    u: Bits,
    seed: Option<Bits>,
    windows: Vec<Window>,
    lasso: Option<Lasso>,
}

const STACK_BYTES: usize = 1 << 30;

/// Decides satisfiability of `f`.
pub fn solve_sat(f: &Formula, cfg: &SolverConfig) -> Result<Verdict> {
    cfg.validate()?;
    check_indices(f, cfg)?;
    let start = Instant::now();
    let f = f.clone();
    let cfg2 = cfg.clone();
    let mut verdict = std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(STACK_BYTES)
            .spawn_scoped(scope, move || run(&f, &cfg2))
            .expect("spawn solver thread")
            .join()
            .expect("solver thread panicked")
    })?;
    verdict.stats.wall_time = start.elapsed();
    Ok(verdict)
}

/// Decides validity of `f` as unsatisfiability of `¬f`.
pub fn solve_valid(f: &Formula, cfg: &SolverConfig) -> Result<Verdict> {
    let mut v = solve_sat(&Formula::neg(f.clone()), cfg)?;
    v.result = if v.result == Outcome::Sat {
        Outcome::Invalid
    } else {
        Outcome::Valid
    };
    Ok(v)
}

/// Monomodal satisfiability.
pub fn solve_mono(f: &Formula, cfg: &SolverConfig) -> Result<Verdict> {
    if cfg.mode != Mode::KdeMono {
        return Err(Error::Config("monomodal solving needs mode kde-mono".into()));
    }
    solve_sat(f, cfg)
}

/// Satisfiability of a saturated set given as formulas.
pub fn sat_ccs_set(u: &FormulaSet, cfg: &SolverConfig) -> Result<bool> {
    cfg.validate()?;
    for f in u.iter() {
        check_indices(f, cfg)?;
    }
    let u = u.clone();
    let cfg = cfg.clone();
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(STACK_BYTES)
            .spawn_scoped(scope, move || {
                let uni = Universe::new(&u);
                let bits = uni.bits(&u).expect("set lies in its closure");
                if !crate::ccs::is_saturated_consistent_in(&uni, &bits) {
                    return Err(Error::Precondition("set is not saturated and consistent".into()));
                }
                let search = Search::new(&uni, &cfg);
                let ok = search.sat_ccs(&bits);
                search.finish()?;
                Ok(ok)
            })
            .expect("spawn solver thread")
            .join()
            .expect("solver thread panicked")
    })
}

fn check_indices(f: &Formula, cfg: &SolverConfig) -> Result<()> {
    let bound = if cfg.mode == Mode::KdeMono { 0 } else { cfg.pi };
    match f.max_index() {
        Some(index) if index > bound => Err(Error::IndexOutOfRange { index, pi: bound }),
        _ => Ok(()),
    }
}

fn run(f: &Formula, cfg: &SolverConfig) -> Result<Verdict> {
    let uni = Universe::of_formula(f);
    let search = Search::new(&uni, cfg);
    let seed = uni.singleton(uni.id(f).expect("own closure"));
    let mut sat = false;
    for u in search.gen.ccs(&seed).iter() {
        if search.gen.tick().is_break() {
            break;
        }
        search.bump(|s| s.choice_points += 1);
        let mark = search.mark();
        if search.sat_ccs(u) {
            sat = true;
            break;
        }
        search.bump(|s| s.backtracks += 1);
        search.truncate(mark);
    }
    search.finish()?;
    let trace = cfg.trace.then(|| search.trace_json(f));
    let lassos = search.trace.borrow().iter().filter_map(|c| c.lasso).collect();
    let mut stats = search.stats.borrow().clone();
    stats.shape_mismatches = search.gen.shape_mismatches();
    stats.steps = search.gen.steps();
    let audit_notes = search.notes.borrow().clone();
    Ok(Verdict {
        result: if sat { Outcome::Sat } else { Outcome::Unsat },
        stats,
        trace,
        lassos,
        audit_notes,
    })
}

struct Search<'u> {
    cfg: &'u SolverConfig,
    uni: &'u Universe,
    lg: Logic,
    gen: Gen<'u>,
    stats: RefCell<SolveStats>,
    ccs_memo: RefCell<HashMap<Bits, bool>>,
    w_memo: RefCell<HashMap<(usize, Bits, Window), bool>>,
    live_windows: Cell<u64>,
    live_ccs: Cell<u64>,
    depth: Cell<u64>,
    trace: RefCell<Vec<ChainRecord>>,
    notes: RefCell<Vec<String>>,
}

/// Keeps a window counted as live while held by a solver frame.
struct Live<'a, 'u> {
    search: &'a Search<'u>,
    windows: u64,
    ccs: u64,
}

impl Drop for Live<'_, '_> {
    fn drop(&mut self) {
        let s = self.search;
        s.live_windows.set(s.live_windows.get() - self.windows);
        s.live_ccs.set(s.live_ccs.get() - self.ccs);
    }
}

impl<'u> Search<'u> {
    fn new(uni: &'u Universe, cfg: &'u SolverConfig) -> Search<'u> {
        let mut gen = Gen::new(uni, cfg.logic(), cfg.ccs_mode)
            .with_step_limit(cfg.step_budget)
            .with_time_limit(cfg.time_budget_ms);
        if cfg.loop_mode == LoopMode::SeenSet {
            gen = gen.with_cache();
        }
        Search {
            cfg,
            uni,
            lg: cfg.logic(),
            gen,
            stats: RefCell::new(SolveStats::default()),
            ccs_memo: RefCell::new(HashMap::new()),
            w_memo: RefCell::new(HashMap::new()),
            live_windows: Cell::new(0),
            live_ccs: Cell::new(0),
            depth: Cell::new(0),
            trace: RefCell::new(Vec::new()),
            notes: RefCell::new(Vec::new()),
        }
    }

    fn seen(&self) -> bool {
        self.cfg.loop_mode == LoopMode::SeenSet
    }

    fn aborted(&self) -> bool {
        self.gen.failure().is_some()
    }

    fn finish(&self) -> Result<()> {
        match self.gen.failure() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    fn bump(&self, f: impl FnOnce(&mut SolveStats)) {
        f(&mut self.stats.borrow_mut());
    }

    fn hold(&self, windows: u64, ccs: u64) -> Live<'_, 'u> {
        self.live_windows.set(self.live_windows.get() + windows);
        self.live_ccs.set(self.live_ccs.get() + ccs);
        let (w, c) = (self.live_windows.get(), self.live_ccs.get());
        self.bump(|s| {
            s.peak_live_windows = s.peak_live_windows.max(w);
            s.peak_live_ccs = s.peak_live_ccs.max(c);
        });
        Live {
            search: self,
            windows,
            ccs,
        }
    }

    fn hold_window(&self, w: &Window) -> Live<'_, 'u> {
        self.hold(1, w.ccs_count() as u64)
    }

    fn mark(&self) -> usize {
        self.trace.borrow().len()
    }

    fn truncate(&self, mark: usize) {
        if self.cfg.trace {
            self.trace.borrow_mut().truncate(mark);
        }
    }

    fn note(&self, ok: bool, what: impl FnOnce() -> String) {
        self.bump(|s| {
            s.audit_checks += 1;
            if !ok {
                s.audit_failures += 1;
            }
        });
        if !ok {
            let mut notes = self.notes.borrow_mut();
            if notes.len() < 16 {
                notes.push(what());
            }
        }
    }

    /// `Sat(u)` for a saturated consistent `u`.
    fn sat_ccs(&self, u: &Bits) -> bool {
        if self.seen() {
            if let Some(hit) = self.ccs_memo.borrow().get(u) {
                return *hit;
            }
        }
        let depth = self.depth.get() + 1;
        self.depth.set(depth);
        self.bump(|s| s.max_sat_depth = s.max_sat_depth.max(depth));
        let _live = self.hold(0, 1);
        let mut ok = true;
        for (k, neg) in self.uni.diamonds(u) {
            let good = if !self.lg.mono && k == self.lg.pi {
                self.top_diamond(u, neg)
            } else {
                self.window_diamond(u, k, neg)
            };
            if !good || self.aborted() {
                ok = false;
                break;
            }
        }
        self.depth.set(depth - 1);
        if self.seen() && !self.aborted() {
            self.ccs_memo.borrow_mut().insert(u.clone(), ok);
        }
        ok
    }

    /// A diamond of index `π`: some `w ∈ CCS({¬φ} ∪ □π⁻(u))` is satisfiable.
    fn top_diamond(&self, u: &Bits, neg: usize) -> bool {
        let seed = self.uni.box_minus(self.lg.pi, u).union(&self.uni.singleton(neg));
        for w in self.gen.ccs(&seed).iter() {
            if self.gen.tick().is_break() {
                return false;
            }
            self.bump(|s| s.choice_points += 1);
            let mark = self.mark();
            if self.sat_ccs(w) {
                return true;
            }
            self.bump(|s| s.backtracks += 1);
            self.truncate(mark);
        }
        false
    }

    /// A diamond handled by a window: some window for `(u, v₀)` with
    /// `v₀ ∋ ¬φ` starts a successful chain.
    fn window_diamond(&self, u: &Bits, k: usize, neg: usize) -> bool {
        let seed = self.uni.singleton(neg);
        let mut found = false;
        let _ = self.gen.for_each_window(u, &seed, k, &mut |w, _| {
            self.gen.tick()?;
            self.bump(|s| s.choice_points += 1);
            let mark = self.mark();
            let ok = match &w {
                // Monomodal cut-off: row 0 has depth 0 and is consistent.
                Window::Empty => true,
                _ => self.chain(&w, u, k, Row0::Seeded(seed.clone())),
            };
            if ok && !self.aborted() {
                found = true;
                return ControlFlow::Break(());
            }
            self.bump(|s| s.backtracks += 1);
            self.truncate(mark);
            ControlFlow::Continue(())
        });
        found
    }

    /// Opens a fresh chain at `w`.
    fn chain(&self, w: &Window, u: &Bits, k: usize, row0: Row0) -> bool {
        let Some(node) = w.as_node() else {
            return true;
        };
        if node.rows.len() == 1 {
            return true;
        }
        let rec = self.cfg.trace.then(|| {
            let mut t = self.trace.borrow_mut();
            t.push(ChainRecord {
                k,
                u: u.clone(),
                seed: match &row0 {
                    Row0::Seeded(s) => Some(s.clone()),
                    Row0::Fixed => None,
                },
                windows: vec![w.clone()],
                lasso: None,
            });
            t.len() - 1
        });
        match self.cfg.loop_mode {
            LoopMode::SeenSet => {
                let mut hist = Vec::new();
                self.sat_w_seen(w, u, k, &row0, &row0, &mut hist, rec)
            }
            LoopMode::Counter => self.sat_w_counter(w, u, k, &row0, rec),
        }
    }

    /// `sat_ccs(v₀)` and the chain of subwindow 0.
    fn local(&self, w: &Window, k: usize) -> bool {
        let node = w.as_node().expect("node window");
        self.sat_ccs(&node.rows[0]) && self.chain(&node.subs[0], &node.rows[1], k + 1, Row0::Fixed)
    }

    #[allow(clippy::too_many_arguments)]
    fn sat_w_seen(
        &self,
        w: &Window,
        u: &Bits,
        k: usize,
        row0: &Row0,
        root_row0: &Row0,
        hist: &mut Vec<Window>,
        rec: Option<usize>,
    ) -> bool {
        if let Some(j) = hist.iter().position(|h| h == w) {
            let lasso = Lasso {
                prefix: j,
                period: hist.len() - j,
            };
            self.bump(|s| s.loops_detected += 1);
            if let Some(r) = rec {
                self.trace.borrow_mut()[r].lasso = Some(lasso);
            }
            if self.cfg.audit {
                self.audit_unroll(hist, j, u, k, root_row0);
            }
            return true;
        }
        let key = (k, u.clone(), w.clone());
        if let Some(hit) = self.w_memo.borrow().get(&key) {
            return *hit;
        }
        let _live = self.hold_window(w);
        if !self.local(w, k) {
            if !self.aborted() {
                self.w_memo.borrow_mut().insert(key, false);
            }
            return false;
        }
        hist.push(w.clone());
        let len = hist.len() as u64;
        self.bump(|s| s.max_chain_len = s.max_chain_len.max(len));
        let mut found = false;
        let _ = self.gen.for_each_continuation(u, k, w, &mut |w2| {
            self.gen.tick()?;
            self.bump(|s| {
                s.choice_points += 1;
                s.continuation_steps += 1;
            });
            if self.cfg.audit {
                self.audit_step(w, &w2, u, k, row0);
            }
            let mark = self.mark();
            if let Some(r) = rec {
                self.trace.borrow_mut()[r].windows.push(w2.clone());
            }
            if self.sat_w_seen(&w2, u, k, &Row0::Seeded(self.uni.empty()), root_row0, hist, rec) {
                found = true;
                return ControlFlow::Break(());
            }
            self.bump(|s| s.backtracks += 1);
            if let Some(r) = rec {
                self.trace.borrow_mut()[r].windows.pop();
            }
            self.truncate(mark);
            ControlFlow::Continue(())
        });
        hist.pop();
        if !self.aborted() {
            self.w_memo.borrow_mut().insert(key, found);
        }
        found
    }

    /// Counter mode: a path of `N` continuations whose windows before the
    /// last all pass the local check. Only the current window is held;
    /// predecessors are recomputed from the root by their indices.
    fn sat_w_counter(&self, root: &Window, u: &Bits, k: usize, root_row0: &Row0, rec: Option<usize>) -> bool {
        let bound = self.cfg.counter_bound.expect("validated");
        if bound == 0 {
            return true;
        }
        let mut live = self.hold_window(root);
        if !self.local(root, k) {
            return false;
        }
        let mut path: Vec<usize> = Vec::new();
        let mut marks: Vec<usize> = Vec::new();
        let mut current = root.clone();
        let mut next = 0usize;
        loop {
            if self.aborted() {
                return false;
            }
            let Some(cand) = self.gen.nth_continuation(u, k, &current, next) else {
                let Some(last) = path.pop() else {
                    return false;
                };
                self.truncate(marks.pop().expect("paired with path"));
                current = self.replay(root, u, k, &path);
                drop(live);
                live = self.hold_window(&current);
                next = last + 1;
                continue;
            };
            if self.gen.tick().is_break() {
                return false;
            }
            self.bump(|s| {
                s.choice_points += 1;
                s.continuation_steps += 1;
            });
            if self.cfg.audit {
                let row0 = if path.is_empty() {
                    root_row0.clone()
                } else {
                    Row0::Seeded(self.uni.empty())
                };
                self.audit_step(&current, &cand, u, k, &row0);
            }
            if path.len() as u64 + 1 == bound {
                path.push(next);
                let len = path.len() as u64 + 1;
                self.bump(|s| s.max_chain_len = s.max_chain_len.max(len));
                if let Some(r) = rec {
                    let mut w = root.clone();
                    let mut windows = vec![w.clone()];
                    for idx in &path[..path.len() - 1] {
                        w = self.replay(&w, u, k, &[*idx]);
                        windows.push(w.clone());
                    }
                    windows.push(cand);
                    self.trace.borrow_mut()[r].windows = windows;
                }
                return true;
            }
            let mark = self.mark();
            drop(live);
            live = self.hold_window(&cand);
            if self.local(&cand, k) {
                path.push(next);
                marks.push(mark);
                let len = path.len() as u64 + 1;
                self.bump(|s| s.max_chain_len = s.max_chain_len.max(len));
                current = cand;
                next = 0;
            } else {
                self.bump(|s| s.backtracks += 1);
                self.truncate(mark);
                drop(live);
                live = self.hold_window(&current);
                next += 1;
            }
        }
    }

    fn replay(&self, root: &Window, u: &Bits, k: usize, path: &[usize]) -> Window {
        let mut w = root.clone();
        for idx in path {
            w = self
                .gen
                .nth_continuation(u, k, &w, *idx)
                .expect("replayed continuation exists");
        }
        w
    }

    fn audit_step(&self, w1: &Window, w2: &Window, u: &Bits, k: usize, row0: &Row0) {
        let (uni, lg) = (self.uni, self.lg);
        let n = uni.set_depth(u);
        let n2 = w2.as_node().expect("node");
        let ctx = WindowContext {
            u: u.clone(),
            k,
            n,
            v0: n2.rows[0].clone(),
            row0: Row0::Seeded(uni.empty()),
        };
        self.note(is_window(uni, lg, w2, &ctx), || {
            format!("continuation is not a window at level {k}")
        });
        let cont = is_continuation(uni, lg, w2, w1, &ctx);
        self.note(cont == Ok(true), || {
            format!("continuation check failed at level {k}: {cont:?}")
        });
        let merged = extend_long(w1, 0, w2);
        let mctx = WindowContext {
            u: u.clone(),
            k,
            n: n + 1,
            v0: w1.as_node().expect("node").rows[0].clone(),
            row0: row0.clone(),
        };
        self.note(is_window(uni, lg, &merged, &mctx), || {
            format!("merge is not a window at level {k}")
        });
        self.note(degree_bound_holds(uni, w1, w2, n), || {
            format!("degree bound fails at level {k}")
        });
        let shallow = members(w2).iter().all(|v| uni.set_depth(v) < n);
        self.note(shallow, || format!("member too deep at level {k}"));
    }

    /// Follows the loop `hist[j..]` three more times and validates the long
    /// window obtained by merging the whole sequence.
    fn audit_unroll(&self, hist: &[Window], j: usize, u: &Bits, k: usize, root_row0: &Row0) {
        let mut seq: Vec<&Window> = hist.iter().collect();
        for _ in 0..3 {
            seq.extend(hist[j..].iter());
        }
        let mut long = seq[0].clone();
        for (t, next) in seq.iter().enumerate().skip(1) {
            long = extend_long(&long, t - 1, next);
        }
        let n = self.uni.set_depth(u);
        let ctx = WindowContext {
            u: u.clone(),
            k,
            n: n + seq.len() - 1,
            v0: seq[0].as_node().expect("node").rows[0].clone(),
            row0: root_row0.clone(),
        };
        let ok = is_window(self.uni, self.lg, &long, &ctx);
        self.note(ok, || format!("unrolled loop is not a window at level {k}"));
    }

    fn trace_json(&self, f: &Formula) -> Value {
        let syntax = self.cfg.syntax();
        let chains: Vec<Value> = self
            .trace
            .borrow()
            .iter()
            .map(|c| {
                json!({
                    "k": c.k,
                    "u": self.uni.render(&c.u, syntax),
                    "seed": c.seed.as_ref().map(|s| self.uni.render(s, syntax)),
                    "windows": c.windows.iter().map(|w| window_to_json(self.uni, w, syntax)).collect::<Vec<_>>(),
                    "lasso": c.lasso,
                })
            })
            .collect();
        json!({
            "formula": f.display(syntax).to_string(),
            "mode": match self.cfg.mode { Mode::KdePi => "kde-pi", Mode::KdeMono => "kde-mono" },
            "pi": self.cfg.pi,
            "chains": chains,
        })
    }
}

/// Outcome of re-validating a trace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub chains: usize,
    pub windows_checked: usize,
    pub continuations_checked: usize,
    pub lassos_checked: usize,
    pub failures: Vec<String>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-validates every window, continuation, and loop recorded in a trace.
pub fn replay_trace(trace: &Value) -> Result<ReplayReport> {
    let field = |k: &str| trace.get(k).ok_or_else(|| Error::Shape(format!("trace without `{k}`")));
    let mode = field("mode")?.as_str().unwrap_or("kde-pi");
    let pi = field("pi")?.as_u64().unwrap_or(0) as usize;
    let cfg = if mode == "kde-mono" {
        SolverConfig::mono()
    } else {
        SolverConfig::kde(pi)
    };
    let (syntax, lg) = (cfg.syntax(), cfg.logic());
    let f = parse(field("formula")?.as_str().unwrap_or(""), syntax)?;
    let uni = Universe::of_formula(&f);
    let mut report = ReplayReport::default();
    for (ci, chain) in field("chains")?
        .as_array()
        .cloned()
        .unwrap_or_default()
        .iter()
        .enumerate()
    {
        report.chains += 1;
        let k = chain["k"].as_u64().unwrap_or(0) as usize;
        let u = bits_from_json(&uni, &chain["u"], syntax)?;
        let seed = match &chain["seed"] {
            Value::Null => None,
            s => Some(bits_from_json(&uni, s, syntax)?),
        };
        let windows = chain["windows"]
            .as_array()
            .cloned()
            .unwrap_or_default()
            .iter()
            .map(|w| window_from_json(&uni, w, syntax))
            .collect::<Result<Vec<_>>>()?;
        let n = uni.set_depth(&u);
        for (t, w) in windows.iter().enumerate() {
            let Some(node) = w.as_node() else {
                report.failures.push(format!("chain {ci}: empty window"));
                continue;
            };
            let row0 = match (t, &seed) {
                (0, Some(s)) => Row0::Seeded(s.clone()),
                (0, None) => Row0::Fixed,
                _ => Row0::Seeded(uni.empty()),
            };
            let ctx = WindowContext {
                u: u.clone(),
                k,
                n,
                v0: node.rows[0].clone(),
                row0,
            };
            report.windows_checked += 1;
            if !is_window(&uni, lg, w, &ctx) {
                report.failures.push(format!("chain {ci}: window {t} invalid"));
            }
            if t > 0 {
                report.continuations_checked += 1;
                if is_continuation(&uni, lg, w, &windows[t - 1], &ctx) != Ok(true) {
                    report
                        .failures
                        .push(format!("chain {ci}: window {t} does not continue window {}", t - 1));
                }
            }
        }
        if let Some(l) = chain.get("lasso").filter(|l| !l.is_null()) {
            report.lassos_checked += 1;
            let prefix = l["prefix"].as_u64().unwrap_or(0) as usize;
            let period = l["period"].as_u64().unwrap_or(0) as usize;
            let closes = windows.len() == prefix + period + 1 && windows.last() == windows.get(prefix);
            if !closes {
                report.failures.push(format!("chain {ci}: lasso does not close"));
            }
        }
    }
    Ok(report)
}
