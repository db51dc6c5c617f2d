//! Recursive windows.
//!
//! A window for `(u, v₀)` at level `k` is either empty or a row of saturated
//! sets `v₀..vₙ` (the `R_k`-successors of a `u`-world, each `vᵢ₊₁` reaching
//! `vᵢ` through `R_{k+1}`) together with one subwindow per adjacent pair,
//! one level deeper.
//!
//! Rows are the union of every constraint placed on them. Row `i` of a node
//! is shared with row 0 of subwindow `i`, so its seed is `□ₖ⁻(u)` together
//! with everything the subwindow asks of its own row 0 (see [`demand0`]).
//! Row 0 of a top-level window additionally carries the diamond's seed.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::ccs::{is_ccs_in, is_extension_in, is_saturated_consistent_in};
use crate::error::{Error, Result};
use crate::formula::{parse, FormulaSet, Syntax};
use crate::universe::{Bits, Universe};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Window {
    Empty,
    Node(Arc<WindowNode>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowNode {
    pub rows: Vec<Bits>,
    pub subs: Vec<Window>,
}

impl Window {
    pub fn node(rows: Vec<Bits>, subs: Vec<Window>) -> Window {
        Window::Node(Arc::new(WindowNode { rows, subs }))
    }

    /// Number of top-level steps `n` (rows minus one); `None` when empty.
    pub fn len(&self) -> Option<usize> {
        match self {
            Window::Empty => None,
            Window::Node(n) => Some(n.rows.len() - 1),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Window::Empty)
    }

    pub fn as_node(&self) -> Option<&WindowNode> {
        match self {
            Window::Empty => None,
            Window::Node(n) => Some(n),
        }
    }

    /// Total number of rows stored, counting every subwindow.
    pub fn ccs_count(&self) -> usize {
        match self {
            Window::Empty => 0,
            Window::Node(n) => n.rows.len() + n.subs.iter().map(Window::ccs_count).sum::<usize>(),
        }
    }
}

impl fmt::Debug for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Empty => write!(f, "Empty"),
            Window::Node(n) => f
                .debug_struct("Node")
                .field("rows", &n.rows)
                .field("subs", &n.subs)
                .finish(),
        }
    }
}

/// Which logic the windows are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Logic {
    pub pi: usize,
    pub mono: bool,
}

impl Logic {
    pub fn multi(pi: usize) -> Logic {
        Logic { pi, mono: false }
    }

    pub fn mono() -> Logic {
        Logic { pi: 0, mono: true }
    }

    /// Modality index used at recursion level `j`.
    pub fn index(&self, j: usize) -> usize {
        if self.mono {
            0
        } else {
            j
        }
    }

    /// Whether windows at level `j` under a parent of depth `d` are empty.
    pub fn empty_at(&self, j: usize, d: usize) -> bool {
        if self.mono {
            d <= 1
        } else {
            j >= self.pi
        }
    }
}

/// Where row 0 of a window comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Row0 {
    /// Chosen together with the window as a saturation of this extra seed.
    Seeded(Bits),
    /// Owned by an enclosing window; only the window's demands are checked.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowContext {
    pub u: Bits,
    pub k: usize,
    pub n: usize,
    pub v0: Bits,
    pub row0: Row0,
}

impl WindowContext {
    /// Context of a top-level window of length `d(u)`.
    pub fn top(uni: &Universe, u: &Bits, k: usize, v0: &Bits, seed: &Bits) -> WindowContext {
        WindowContext {
            u: u.clone(),
            k,
            n: uni.set_depth(u),
            v0: v0.clone(),
            row0: Row0::Seeded(seed.clone()),
        }
    }
}

/// What a window for `(p, v₀)` at level `j` requires of `v₀`: `□ⱼ⁻(p)`,
/// plus `□ⱼ₊₁⁻(v₁)` and, recursively, the demands of subwindow 0.
pub fn demand0(uni: &Universe, lg: Logic, w: &Window, j: usize, p: &Bits) -> Bits {
    let mut out = uni.box_minus(lg.index(j), p);
    if let Window::Node(node) = w {
        if node.rows.len() > 1 {
            out.union_with(&demand0(uni, lg, &node.subs[0], j + 1, &node.rows[1]));
        }
    }
    out
}

/// Seed of row `i` of a node at level `j` under parent `p`.
pub fn row_seed(uni: &Universe, lg: Logic, node: &WindowNode, j: usize, p: &Bits, i: usize) -> Bits {
    if i + 1 < node.rows.len() {
        let mut s = uni.box_minus(lg.index(j), p);
        s.union_with(&demand0(uni, lg, &node.subs[i], j + 1, &node.rows[i + 1]));
        s
    } else {
        uni.box_minus(lg.index(j), p)
    }
}

/// Checks that `w` is a window for `(ctx.u, ctx.v0)` at level `ctx.k` with
/// `ctx.n` top-level steps; subwindows have length `d(parent)`.
pub fn is_window(uni: &Universe, lg: Logic, w: &Window, ctx: &WindowContext) -> bool {
    let d = uni.set_depth(&ctx.u);
    if lg.empty_at(ctx.k, d) {
        return matches!(w, Window::Empty) && row0_ok(uni, lg, w, ctx);
    }
    let Window::Node(node) = w else {
        return false;
    };
    let n = ctx.n;
    if node.rows.len() != n + 1 || node.subs.len() != n || node.rows[0] != ctx.v0 {
        return false;
    }
    if !row0_ok(uni, lg, w, ctx) {
        return false;
    }
    for i in 1..=n {
        if !is_ccs_in(uni, &node.rows[i], &row_seed(uni, lg, node, ctx.k, &ctx.u, i)) {
            return false;
        }
    }
    (0..n).all(|i| {
        let parent = &node.rows[i + 1];
        let sub = WindowContext {
            u: parent.clone(),
            k: ctx.k + 1,
            n: uni.set_depth(parent),
            v0: node.rows[i].clone(),
            row0: Row0::Fixed,
        };
        is_window(uni, lg, &node.subs[i], &sub)
    })
}

fn row0_ok(uni: &Universe, lg: Logic, w: &Window, ctx: &WindowContext) -> bool {
    let demand = demand0(uni, lg, w, ctx.k, &ctx.u);
    match &ctx.row0 {
        Row0::Seeded(s) => is_ccs_in(uni, &ctx.v0, &demand.union(s)),
        Row0::Fixed => demand.is_subset(&ctx.v0) && is_saturated_consistent_in(uni, &ctx.v0),
    }
}

/// Set of members: every row, recursively.
pub fn members(w: &Window) -> BTreeSet<Bits> {
    let mut out = BTreeSet::new();
    collect_members(w, &mut out);
    out
}

fn collect_members(w: &Window, out: &mut BTreeSet<Bits>) {
    if let Window::Node(node) = w {
        out.extend(node.rows.iter().cloned());
        for s in &node.subs {
            collect_members(s, out);
        }
    }
}

/// Rows `a..=b` of a node with subwindows `a..b`, borrowed from the window.
#[derive(Debug, Clone, Copy)]
pub struct Slice<'a> {
    pub node: &'a WindowNode,
    pub a: usize,
    pub b: usize,
}

impl<'a> Slice<'a> {
    pub fn rows(&self) -> &'a [Bits] {
        &self.node.rows[self.a..=self.b]
    }

    pub fn subs(&self) -> &'a [Window] {
        &self.node.subs[self.a..self.b]
    }

    pub fn width(&self) -> usize {
        self.b - self.a
    }

    pub fn members(&self) -> BTreeSet<Bits> {
        let mut out: BTreeSet<Bits> = self.rows().iter().cloned().collect();
        for s in self.subs() {
            collect_members(s, &mut out);
        }
        out
    }
}

/// The partial window of `w` spanning rows `a..=b`.
pub fn partial(w: &Window, a: usize, b: usize) -> Result<Slice<'_>> {
    let node = w.as_node().ok_or(Error::SliceRange { a, b, n: 0 })?;
    let n = node.rows.len() - 1;
    if a >= b || b > n {
        return Err(Error::SliceRange { a, b, n });
    }
    Ok(Slice { node, a, b })
}

/// Pointwise `k`-inclusion `s1 ⊑ s2` of two equally wide slices, where `s2`
/// is part of a window under parent `u2`.
///
/// Every position but the top must extend the matching row of `s1` by a
/// saturation of its own seed only (see [`is_extension_in`]), and the
/// subwindows must be included one level deeper. The bound `CSF(v¹ ∪ …)` of
/// plain saturation is tightened to the new formulas: re-deciding classical
/// choices already settled in `v¹` would let formulas of full depth slip
/// into the lower rows and break the merge of continuations.
pub fn pointwise_included(uni: &Universe, lg: Logic, s1: &Slice, s2: &Slice, k: usize, u2: &Bits) -> Result<bool> {
    if s1.width() != s2.width() {
        return Err(Error::Shape(format!("slice widths {} and {}", s1.width(), s2.width())));
    }
    slices_included(uni, lg, s1, s2, k, u2, false)
}

fn slices_included(
    uni: &Universe,
    lg: Logic,
    s1: &Slice,
    s2: &Slice,
    k: usize,
    u2: &Bits,
    row0_fixed: bool,
) -> Result<bool> {
    for idx in 0..s2.width() {
        let (i1, i2) = (s1.a + idx, s2.a + idx);
        let (r1, r2) = (&s1.node.rows[i1], &s2.node.rows[i2]);
        if !(idx == 0 && row0_fixed) {
            let seed = row_seed(uni, lg, s2.node, k, u2, i2);
            if !is_extension_in(uni, r2, r1, &seed) {
                return Ok(false);
            }
        }
        let next2 = &s2.node.rows[i2 + 1];
        if !windows_included(uni, lg, &s1.node.subs[i1], &s2.node.subs[i2], k + 1, next2)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn windows_included(uni: &Universe, lg: Logic, w1: &Window, w2: &Window, k: usize, u2: &Bits) -> Result<bool> {
    match (w1, w2) {
        (Window::Empty, Window::Empty) => Ok(true),
        (Window::Node(n1), Window::Node(n2)) if n1.rows.len() == n2.rows.len() => {
            let width = n1.rows.len() - 1;
            let s1 = Slice {
                node: n1,
                a: 0,
                b: width,
            };
            let s2 = Slice {
                node: n2,
                a: 0,
                b: width,
            };
            slices_included(uni, lg, &s1, &s2, k, u2, true)
        }
        _ => Err(Error::Shape(format!(
            "subwindows of lengths {:?} and {:?} at level {k}",
            w1.len(),
            w2.len()
        ))),
    }
}

/// `w2` is a `k`-continuation of `w1`: the end of `w1` (rows `1..=n`) is
/// pointwise included in the beginning of `w2` (rows `0..n`).
pub fn is_continuation(uni: &Universe, lg: Logic, w2: &Window, w1: &Window, ctx: &WindowContext) -> Result<bool> {
    let d = uni.set_depth(&ctx.u);
    if d == 0 || lg.empty_at(ctx.k, d) {
        return Err(Error::Precondition(format!(
            "continuations need a non-empty window (depth {d}, level {})",
            ctx.k
        )));
    }
    let (n1, n2) = (w1.len(), w2.len());
    if n1 != Some(ctx.n) || n2 != Some(ctx.n) {
        return Err(Error::Shape(format!(
            "window lengths {n1:?} and {n2:?}, expected {}",
            ctx.n
        )));
    }
    let n = ctx.n;
    // With n = 1 the overlap is a lone top position, which is unconstrained.
    let (a, b) = (
        w1.as_node().expect("checked length"),
        w2.as_node().expect("checked length"),
    );
    let s1 = Slice { node: a, a: 1, b: n };
    let s2 = Slice {
        node: b,
        a: 0,
        b: n - 1,
    };
    pointwise_included(uni, lg, &s1, &s2, ctx.k, &ctx.u)
}

/// Extends `w1` by one step with its continuation `w2`: rows
/// `v¹₀, v²₀, …, v²ₙ` and subwindows `W¹₀, W²₀, …, W²ₙ₋₁`.
pub fn merge_continuation(uni: &Universe, lg: Logic, w1: &Window, w2: &Window, ctx: &WindowContext) -> Result<Window> {
    if !is_continuation(uni, lg, w2, w1, ctx)? {
        return Err(Error::NotContinuation);
    }
    Ok(extend_long(w1, 0, w2))
}

/// Appends the window `next` to a long window whose rows `j..` are the rows
/// of the window `next` continues: keeps rows `0..=j` and subwindows
/// `0..=j`, then takes every row and subwindow of `next`.
pub fn extend_long(long: &Window, j: usize, next: &Window) -> Window {
    let (l, w) = (long.as_node().expect("non-empty"), next.as_node().expect("non-empty"));
    let mut rows: Vec<Bits> = l.rows[..=j].to_vec();
    rows.extend(w.rows.iter().cloned());
    let mut subs: Vec<Window> = l.subs[..=j].to_vec();
    subs.extend(w.subs.iter().cloned());
    Window::node(rows, subs)
}

/// The degree bound `d(v²ᵢ₋₁ ∖ v¹ᵢ) ≤ d(u) + i ∸ (n+1)` for `i ∈ [1, n]`.
pub fn degree_bound_holds(uni: &Universe, w1: &Window, w2: &Window, d_u: usize) -> bool {
    let (Some(a), Some(b)) = (w1.as_node(), w2.as_node()) else {
        return true;
    };
    let n = a.rows.len() - 1;
    (1..=n).all(|i| {
        let diff = b.rows[i - 1].difference(&a.rows[i]);
        diff.is_empty() || uni.set_depth(&diff) <= (d_u + i).saturating_sub(n + 1)
    })
}

/// Upper bound on the number of sets in a window whose recursion has
/// `levels` further levels below it, with branching `d`:
/// `s(0) = 1`, `s(m) = d + d·s(m−1)`.
pub fn window_count_bound(d: u64, levels: u32) -> BigUint {
    let d = BigUint::from(d);
    let mut s = BigUint::from(1u32);
    for _ in 0..levels {
        s = &d + &d * &s;
    }
    s
}

/// Monomodal window size bound `2·d^(d+1)`.
pub fn mono_count_bound(d: u32) -> Result<BigUint> {
    if d == 0 {
        return Err(Error::ZeroDepth);
    }
    Ok(BigUint::from(2u32) * BigUint::from(d).pow(d + 1))
}

/// Symbolic form of the repetition horizon `2^P(|u|) + d(u)`, with `P` a
/// polynomial of degree `π + 2`. Never evaluated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChiDescriptor {
    pub size: usize,
    pub poly_degree: usize,
    pub additive: usize,
}

impl ChiDescriptor {
    /// Exponent lower bound `|u|^(π+2)`, the leading term of `P(|u|)`.
    pub fn exponent_leading_term(&self) -> BigUint {
        BigUint::from(self.size).pow(self.poly_degree as u32)
    }
}

impl fmt::Display for ChiDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "2^P({}) + {} with deg P = {}",
            self.size, self.additive, self.poly_degree
        )
    }
}

pub fn chi_descriptor(u: &FormulaSet, pi: usize) -> ChiDescriptor {
    ChiDescriptor {
        size: u.size(),
        poly_degree: pi + 2,
        additive: u.depth(),
    }
}

/// Serializes a window as nested arrays of formula strings:
/// `null` when empty, otherwise `{"rows": [[..], ..], "subs": [..]}`.
pub fn window_to_json(uni: &Universe, w: &Window, syntax: Syntax) -> Value {
    match w {
        Window::Empty => Value::Null,
        Window::Node(n) => json!({
            "rows": n.rows.iter().map(|r| uni.render(r, syntax)).collect::<Vec<_>>(),
            "subs": n.subs.iter().map(|s| window_to_json(uni, s, syntax)).collect::<Vec<_>>(),
        }),
    }
}

pub fn window_from_json(uni: &Universe, v: &Value, syntax: Syntax) -> Result<Window> {
    match v {
        Value::Null => Ok(Window::Empty),
        Value::Object(map) => {
            let rows = map
                .get("rows")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Shape("window without rows".into()))?
                .iter()
                .map(|r| bits_from_json(uni, r, syntax))
                .collect::<Result<Vec<_>>>()?;
            let subs = map
                .get("subs")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Shape("window without subs".into()))?
                .iter()
                .map(|s| window_from_json(uni, s, syntax))
                .collect::<Result<Vec<_>>>()?;
            if rows.is_empty() || subs.len() + 1 != rows.len() {
                return Err(Error::Shape(format!(
                    "{} rows with {} subwindows",
                    rows.len(),
                    subs.len()
                )));
            }
            Ok(Window::node(rows, subs))
        }
        _ => Err(Error::Shape("window must be null or an object".into())),
    }
}

pub fn bits_from_json(uni: &Universe, v: &Value, syntax: Syntax) -> Result<Bits> {
    let items = v
        .as_array()
        .ok_or_else(|| Error::Shape("set must be an array".into()))?;
    let mut out = uni.empty();
    for item in items {
        let text = item
            .as_str()
            .ok_or_else(|| Error::Shape("formula must be a string".into()))?;
        let f = parse(text, syntax)?;
        let id = uni
            .id(&f)
            .ok_or_else(|| Error::Shape(format!("`{text}` is outside the closure")))?;
        out.insert(id);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Formula;

    const PI1: Syntax = Syntax::Indexed { pi: 1 };

    fn p(s: &str) -> Formula {
        parse(s, PI1).unwrap()
    }

    fn bits(uni: &Universe, fs: &[&str]) -> Bits {
        uni.bits(&fs.iter().map(|s| p(s)).collect()).unwrap()
    }

    /// `u = {[0]p, <0>q}` for π = 1, with its diamond seed `{~~q, p}`.
    fn depth_one() -> (Universe, Bits) {
        let f = p("[0]p & <0>q");
        let uni = Universe::of_formula(&f);
        let u = bits(&uni, &["[0]p & <0>q", "[0]p", "<0>q"]);
        (uni, u)
    }

    #[test]
    fn depth_one_window_validates() {
        let (uni, u) = depth_one();
        let lg = Logic::multi(1);
        let v0 = bits(&uni, &["~~q", "q", "p"]);
        let w = Window::node(vec![v0.clone(), bits(&uni, &["p"])], vec![Window::Empty]);
        let ctx = WindowContext::top(&uni, &u, 0, &v0, &bits(&uni, &["~~q"]));
        assert!(is_window(&uni, lg, &w, &ctx));
        let bad = Window::node(vec![v0.clone(), bits(&uni, &["q"])], vec![Window::Empty]);
        assert!(!is_window(&uni, lg, &bad, &ctx), "q is outside CSF({{p}})");
        let bare = bits(&uni, &["~~q", "q"]);
        let deep = WindowContext {
            k: 1,
            v0: bare,
            ..ctx.clone()
        };
        assert!(is_window(&uni, lg, &Window::Empty, &deep));
        assert!(!is_window(&uni, lg, &Window::Empty, &WindowContext { k: 1, ..ctx }));
    }

    #[test]
    fn members_and_partials() {
        let (uni, _) = depth_one();
        let a = bits(&uni, &["p"]);
        let b = bits(&uni, &["q"]);
        assert!(members(&Window::Empty).is_empty());
        let w = Window::node(vec![a.clone(), b.clone()], vec![Window::Empty]);
        assert_eq!(members(&w), [a.clone(), b.clone()].into_iter().collect());
        let c = bits(&uni, &["p", "q"]);
        let nested = Window::node(vec![c.clone(), a.clone(), b.clone()], vec![w.clone(), Window::Empty]);
        assert_eq!(members(&nested).len(), 3);
        let s = partial(&nested, 1, 2).unwrap();
        assert_eq!(s.rows(), &[a.clone(), b.clone()]);
        assert_eq!(s.subs(), &[Window::Empty]);
        assert!(s.members().is_subset(&members(&nested)));
        let whole = partial(&nested, 0, 2).unwrap();
        assert_eq!(whole.members(), members(&nested));
        assert!(matches!(partial(&nested, 2, 2), Err(Error::SliceRange { .. })));
        assert!(matches!(partial(&nested, 0, 3), Err(Error::SliceRange { .. })));
    }

    #[test]
    fn empty_inclusion_and_shapes() {
        let (uni, u) = depth_one();
        let lg = Logic::multi(1);
        assert!(windows_included(&uni, lg, &Window::Empty, &Window::Empty, 1, &u).unwrap());
        let one = Window::node(vec![u.clone()], vec![]);
        assert!(windows_included(&uni, lg, &Window::Empty, &one, 1, &u).is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(window_count_bound(7, 0), BigUint::from(1u32));
        assert_eq!(window_count_bound(2, 1), BigUint::from(4u32));
        assert_eq!(window_count_bound(3, 2), BigUint::from(21u32));
        assert_eq!(mono_count_bound(1).unwrap(), BigUint::from(2u32));
        assert_eq!(mono_count_bound(2).unwrap(), BigUint::from(16u32));
        assert_eq!(mono_count_bound(3).unwrap(), BigUint::from(162u32));
        assert_eq!(mono_count_bound(0), Err(Error::ZeroDepth));
    }

    #[test]
    fn chi_descriptor_shape() {
        let small: FormulaSet = [p("p")].into_iter().collect();
        let big: FormulaSet = [p("p"), p("[0](p & q)")].into_iter().collect();
        let a = chi_descriptor(&small, 2);
        let b = chi_descriptor(&big, 2);
        assert_eq!(a.poly_degree, 4);
        assert_eq!(b.additive, 1);
        assert!(a.exponent_leading_term() <= b.exponent_leading_term());
        assert!(b.to_string().contains("deg P = 4"));
    }

    #[test]
    fn json_round_trip() {
        let (uni, _) = depth_one();
        let w = Window::node(vec![bits(&uni, &["p", "q"]), bits(&uni, &["p"])], vec![Window::Empty]);
        let v = window_to_json(&uni, &w, PI1);
        assert_eq!(window_from_json(&uni, &v, PI1).unwrap(), w);
    }
}
