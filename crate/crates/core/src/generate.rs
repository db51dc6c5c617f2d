//! Enumeration of windows and continuations.
//!
//! Both streams are produced top-down: the top row from `CCS(□ₖ⁻(u))`, then
//! each lower row together with its subwindow, so that every row is a
//! saturation of exactly the demands placed on it. Results are pushed into a
//! callback which may stop the enumeration early.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::ops::ControlFlow;
use std::rc::Rc;
use std::time::Instant;

use crate::ccs::{enumerate_extensions, CcsMode};
use crate::error::Error;
use crate::universe::{Bits, Universe};
use crate::window::{Logic, Window, WindowNode};

/// Receives a window together with its row 0.
type ExtensionCache = RefCell<HashMap<(Bits, Bits), Rc<[Bits]>>>;

pub type Sink<'s> = dyn FnMut(Window, Bits) -> ControlFlow<()> + 's;

/// Where the inclusion constraints of a node under construction come from.
#[derive(Clone, Copy)]
enum Prev<'a> {
    None,
    /// Row `i` extends `q.rows[i]`, subwindow `i` includes `q.subs[i]`.
    Same(&'a WindowNode),
    /// Row `i` extends `q.rows[i+1]`; the top position is free.
    Shifted(&'a WindowNode),
}

impl<'a> Prev<'a> {
    fn at(self, i: usize) -> Option<(&'a Bits, &'a Window)> {
        match self {
            Prev::None => None,
            Prev::Same(q) => Some((&q.rows[i], &q.subs[i])),
            Prev::Shifted(q) => (i + 1 < q.subs.len()).then(|| (&q.rows[i + 1], &q.subs[i + 1])),
        }
    }
}

/// Window enumerator over a fixed universe.
pub struct Gen<'u> {
    pub uni: &'u Universe,
    pub logic: Logic,
    pub mode: CcsMode,
    cache: Option<ExtensionCache>,
    mismatches: Cell<u64>,
    steps: Cell<u64>,
    step_limit: Option<u64>,
    deadline: Option<(Instant, u64)>,
    failure: RefCell<Option<Error>>,
}

impl<'u> Gen<'u> {
    pub fn new(uni: &'u Universe, logic: Logic, mode: CcsMode) -> Gen<'u> {
        Gen {
            uni,
            logic,
            mode,
            cache: None,
            mismatches: Cell::new(0),
            steps: Cell::new(0),
            step_limit: None,
            deadline: None,
            failure: RefCell::new(None),
        }
    }

    /// Memoizes extension enumerations by `(base, seed)`.
    pub fn with_cache(mut self) -> Self {
        self.cache = Some(RefCell::new(HashMap::new()));
        self
    }

    pub fn with_step_limit(mut self, limit: Option<u64>) -> Self {
        self.step_limit = limit;
        self
    }

    pub fn with_time_limit(mut self, millis: Option<u64>) -> Self {
        self.deadline = millis.map(|ms| (Instant::now(), ms));
        self
    }

    /// Subwindow pairs skipped because their lengths disagreed.
    pub fn shape_mismatches(&self) -> u64 {
        self.mismatches.get()
    }

    pub fn steps(&self) -> u64 {
        self.steps.get()
    }

    /// The budget error that stopped enumeration, if any.
    pub fn failure(&self) -> Option<Error> {
        self.failure.borrow().clone()
    }

    /// Counts one step against the budgets; breaks once one is exhausted.
    pub fn tick(&self) -> ControlFlow<()> {
        if self.failure.borrow().is_some() {
            return ControlFlow::Break(());
        }
        let s = self.steps.get() + 1;
        self.steps.set(s);
        if let Some(limit) = self.step_limit {
            if s > limit {
                *self.failure.borrow_mut() = Some(Error::StepBudget(limit));
                return ControlFlow::Break(());
            }
        }
        if let Some((start, ms)) = self.deadline {
            if s.is_multiple_of(256) && start.elapsed().as_millis() as u64 > ms {
                *self.failure.borrow_mut() = Some(Error::TimeBudget(ms));
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }

    /// Extensions of `base` by saturations of `seed` that are also plain
    /// CCS of `seed`.
    pub fn extensions(&self, base: &Bits, seed: &Bits) -> Rc<[Bits]> {
        if !base.is_subset(&self.uni.csf(seed)) {
            return Rc::from(Vec::new());
        }
        let compute = || Rc::from(enumerate_extensions(self.uni, base, seed, self.mode));
        match &self.cache {
            None => compute(),
            Some(cache) => {
                let key = (base.clone(), seed.clone());
                if let Some(hit) = cache.borrow().get(&key) {
                    return hit.clone();
                }
                let out: Rc<[Bits]> = compute();
                cache.borrow_mut().insert(key, out.clone());
                out
            }
        }
    }

    pub fn ccs(&self, seed: &Bits) -> Rc<[Bits]> {
        self.extensions(&self.uni.empty(), seed)
    }

    /// Every window at level `k` for `u` with length `d(u)`, paired with its
    /// row 0 `v₀ ∈ CCS(seed ∪ demands)`.
    pub fn for_each_window(&self, u: &Bits, seed: &Bits, k: usize, sink: &mut Sink) -> ControlFlow<()> {
        self.gen_window(k, u, seed, None, sink)
    }

    /// Every `k`-continuation of `w1`, a window for `u`.
    pub fn for_each_continuation(
        &self,
        u: &Bits,
        k: usize,
        w1: &Window,
        sink: &mut dyn FnMut(Window) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let Some(q) = w1.as_node() else {
            return ControlFlow::Continue(());
        };
        if q.rows.len() < 2 {
            return ControlFlow::Continue(());
        }
        let empty = self.uni.empty();
        self.node(k, u, &empty, Prev::Shifted(q), q.rows.len() - 1, &mut |w, _| sink(w))
    }

    pub fn windows(&self, u: &Bits, seed: &Bits, k: usize) -> Vec<(Window, Bits)> {
        let mut out = Vec::new();
        let _ = self.for_each_window(u, seed, k, &mut |w, v0| {
            out.push((w, v0));
            ControlFlow::Continue(())
        });
        out
    }

    pub fn continuations(&self, u: &Bits, k: usize, w1: &Window) -> Vec<Window> {
        let mut out = Vec::new();
        let _ = self.for_each_continuation(u, k, w1, &mut |w| {
            out.push(w);
            ControlFlow::Continue(())
        });
        out
    }

    /// The `idx`-th window of [`Gen::for_each_window`], if it exists.
    pub fn nth_window(&self, u: &Bits, seed: &Bits, k: usize, idx: usize) -> Option<(Window, Bits)> {
        let mut seen = 0;
        let mut hit = None;
        let _ = self.for_each_window(u, seed, k, &mut |w, v0| {
            if seen == idx {
                hit = Some((w, v0));
                return ControlFlow::Break(());
            }
            seen += 1;
            ControlFlow::Continue(())
        });
        hit
    }

    /// The `idx`-th continuation of `w1`, if it exists.
    pub fn nth_continuation(&self, u: &Bits, k: usize, w1: &Window, idx: usize) -> Option<Window> {
        let mut seen = 0;
        let mut hit = None;
        let _ = self.for_each_continuation(u, k, w1, &mut |w| {
            if seen == idx {
                hit = Some(w);
                return ControlFlow::Break(());
            }
            seen += 1;
            ControlFlow::Continue(())
        });
        hit
    }

    /// Windows at level `j` under `p` whose row 0 saturates `s` plus the
    /// window's demands. With `prev = (b, q)`, row 0 must extend `b` and the
    /// window must include `q` one position at a time.
    fn gen_window(
        &self,
        j: usize,
        p: &Bits,
        s: &Bits,
        prev: Option<(&Bits, &Window)>,
        sink: &mut Sink,
    ) -> ControlFlow<()> {
        let uni = self.uni;
        let d = uni.set_depth(p);
        let empty = uni.empty();
        let base = prev.map_or(&empty, |(b, _)| b);
        // Leaf windows: `None` is empty, `Some(0)` a node with no steps.
        let leaf = if self.logic.empty_at(j, d) {
            Some(None)
        } else if d == 0 {
            Some(Some(0))
        } else {
            None
        };
        if let Some(shape) = leaf {
            if let Some((_, q)) = prev {
                if q.len() != shape {
                    self.mismatches.set(self.mismatches.get() + 1);
                    return ControlFlow::Continue(());
                }
            }
            let seed = s.union(&uni.box_minus(self.logic.index(j), p));
            for r in self.extensions(base, &seed).iter() {
                self.tick()?;
                let w = match shape {
                    None => Window::Empty,
                    Some(_) => Window::node(vec![r.clone()], Vec::new()),
                };
                sink(w, r.clone())?;
            }
            return ControlFlow::Continue(());
        }
        let prev = match prev {
            None => Prev::None,
            Some((_, Window::Node(q))) if q.rows.len() == d + 1 => Prev::Same(q),
            Some(_) => {
                self.mismatches.set(self.mismatches.get() + 1);
                return ControlFlow::Continue(());
            }
        };
        self.node(j, p, s, prev, d, sink)
    }

    /// Nodes of length `n` at level `j` under `p`.
    fn node(&self, j: usize, p: &Bits, s: &Bits, prev: Prev, n: usize, sink: &mut Sink) -> ControlFlow<()> {
        let bm = self.uni.box_minus(self.logic.index(j), p);
        let mut rows = vec![self.uni.empty(); n + 1];
        let mut subs = vec![Window::Empty; n];
        for top in self.ccs(&bm).iter() {
            self.tick()?;
            rows[n] = top.clone();
            self.fill(j, &bm, s, prev, n - 1, &mut rows, &mut subs, sink)?;
        }
        ControlFlow::Continue(())
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(
        &self,
        j: usize,
        bm: &Bits,
        s: &Bits,
        prev: Prev,
        i: usize,
        rows: &mut Vec<Bits>,
        subs: &mut Vec<Window>,
        sink: &mut Sink,
    ) -> ControlFlow<()> {
        let parent = rows[i + 1].clone();
        let seed = if i == 0 { bm.union(s) } else { bm.clone() };
        self.gen_window(j + 1, &parent, &seed, prev.at(i), &mut |sub, r| {
            rows[i] = r;
            subs[i] = sub;
            if i == 0 {
                sink(Window::node(rows.clone(), subs.clone()), rows[0].clone())
            } else {
                self.fill(j, bm, s, prev, i - 1, rows, subs, sink)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, Syntax};
    use crate::window::{is_continuation, is_window, Row0, WindowContext};

    fn setup(text: &str, pi: usize) -> (Universe, Bits) {
        let f = parse(text, Syntax::Indexed { pi }).unwrap();
        let uni = Universe::of_formula(&f);
        let u = crate::ccs::enumerate_ccs_in(&uni, &uni.singleton(uni.id(&f).unwrap()), CcsMode::Branch)
            .into_iter()
            .next()
            .unwrap();
        (uni, u)
    }

    #[test]
    fn depth_one_windows_have_one_step() {
        let (uni, u) = setup("[0]p & <0>q", 1);
        let g = Gen::new(&uni, Logic::multi(1), CcsMode::Branch);
        let (k, neg) = uni.diamonds(&u)[0];
        let seed = uni.singleton(neg);
        let ws = g.windows(&u, &seed, k);
        assert!(!ws.is_empty());
        for (w, v0) in &ws {
            assert_eq!(w.len(), Some(1));
            let ctx = WindowContext::top(&uni, &u, k, v0, &seed);
            assert!(is_window(&uni, g.logic, w, &ctx));
        }
    }

    #[test]
    fn clashing_boxes_give_no_windows() {
        let (uni, u) = setup("[0]p & [0]~p & <0>q", 1);
        let g = Gen::new(&uni, Logic::multi(1), CcsMode::Branch);
        let (k, neg) = uni.diamonds(&u)[0];
        assert!(g.windows(&u, &uni.singleton(neg), k).is_empty());
    }

    #[test]
    fn continuations_validate() {
        let (uni, u) = setup("[0][1]p & <0><1>q & [0]<1>r", 2);
        let g = Gen::new(&uni, Logic::multi(2), CcsMode::Branch).with_cache();
        let (k, neg) = uni.diamonds(&u)[0];
        let seed = uni.singleton(neg);
        let mut checked = 0;
        for (w, _) in g.windows(&u, &seed, k).into_iter().take(4) {
            for w2 in g.continuations(&u, k, &w) {
                let ctx = WindowContext {
                    u: u.clone(),
                    k,
                    n: uni.set_depth(&u),
                    v0: w2.as_node().unwrap().rows[0].clone(),
                    row0: Row0::Seeded(uni.empty()),
                };
                assert!(is_window(&uni, g.logic, &w2, &ctx));
                assert!(is_continuation(&uni, g.logic, &w2, &w, &ctx).unwrap());
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn step_budget_stops_enumeration() {
        let (uni, u) = setup("[0][1]p & <0><1>q", 2);
        let g = Gen::new(&uni, Logic::multi(2), CcsMode::Branch).with_step_limit(Some(3));
        let (k, neg) = uni.diamonds(&u)[0];
        let _ = g.windows(&u, &uni.singleton(neg), k);
        assert_eq!(g.failure(), Some(Error::StepBudget(3)));
    }
}
