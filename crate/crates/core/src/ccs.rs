//! Consistent classical saturations (CCS).
//!
//! `CCS(s)` is the set of all `u` with `s ⊆ u ⊆ CSF(s)` that are classically
//! consistent and saturated. Classical inconsistency of `s` shows up as an
//! empty enumeration.

use crate::formula::{csf, Formula, FormulaSet, Node};
use crate::universe::{Bits, Kind, Universe};

/// How CCS enumeration is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CcsMode {
    /// Decision search over `CSF(seed)` with saturation propagation.
    #[default]
    Branch,
    /// Literal powerset filter over `CSF(seed)`.
    Exhaustive,
    /// Only inclusion-minimal saturations (plain tableau branches).
    Minimal,
}

/// `□ᵢ⁻(s)`.
pub fn box_minus(i: usize, s: &FormulaSet) -> FormulaSet {
    s.iter()
        .filter_map(|f| match f.node() {
            Node::Box(j, g) if *j == i => Some(g.clone()),
            _ => None,
        })
        .collect()
}

/// Definition check for `u ∈ CCS(seed)` on plain formula sets.
pub fn is_ccs(u: &FormulaSet, seed: &FormulaSet) -> bool {
    seed.is_subset(u) && u.is_subset(&csf(seed)) && is_saturated_consistent(u)
}

/// Classical saturation and consistency of `u`, with no reference to a seed.
pub fn is_saturated_consistent(u: &FormulaSet) -> bool {
    u.iter().all(|f| match f.node() {
        Node::Bottom => false,
        Node::And(a, b) => u.contains(a) && u.contains(b),
        Node::Neg(g) => {
            !u.contains(g)
                && match g.node() {
                    Node::And(a, b) => u.contains(&Formula::neg(a.clone())) || u.contains(&Formula::neg(b.clone())),
                    Node::Neg(h) => u.contains(h),
                    _ => true,
                }
        }
        _ => true,
    })
}

/// Every CCS of `seed`, in the documented order (see [`enumerate_ccs_in`]).
pub fn enumerate_ccs(seed: &FormulaSet, mode: CcsMode) -> Vec<FormulaSet> {
    let uni = Universe::new(seed);
    let seed_bits = uni.bits(seed).expect("seed lies in its own closure");
    enumerate_ccs_in(&uni, &seed_bits, mode)
        .iter()
        .map(|b| uni.set(b))
        .collect()
}

/// Entry reduction of the solver: a set is satisfiable iff one of its CCS is.
pub fn ccs_satisfiable_reduction(s: &FormulaSet, mode: CcsMode) -> Vec<FormulaSet> {
    enumerate_ccs(s, mode)
}

/// Saturation and consistency of `v` within a universe.
pub fn is_saturated_consistent_in(uni: &Universe, v: &Bits) -> bool {
    v.iter().all(|id| match uni.kind(id) {
        Kind::Bottom => false,
        Kind::And(a, b) => v.contains(a) && v.contains(b),
        Kind::Neg(g) => {
            !v.contains(g)
                && match uni.kind(g) {
                    Kind::And(a, b) => {
                        uni.neg_of(a).is_some_and(|na| v.contains(na)) || uni.neg_of(b).is_some_and(|nb| v.contains(nb))
                    }
                    Kind::Neg(h) => v.contains(h),
                    _ => true,
                }
        }
        _ => true,
    })
}

/// `v ∈ CCS(seed)` within a universe.
pub fn is_ccs_in(uni: &Universe, v: &Bits, seed: &Bits) -> bool {
    seed.is_subset(v) && v.is_subset(&uni.csf(seed)) && is_saturated_consistent_in(uni, v)
}

/// Enumerates `CCS(seed)` within a universe.
///
/// Order: inclusion-minimal saturations first, then by increasing
/// cardinality, ties broken lexicographically on sorted member ids.
pub fn enumerate_ccs_in(uni: &Universe, seed: &Bits, mode: CcsMode) -> Vec<Bits> {
    enumerate_extensions(uni, &uni.empty(), seed, mode)
}

/// `v` extends the saturated set `base` by a saturation of `seed`: it holds
/// `base ∪ seed`, adds nothing outside `base ∪ CSF(seed ∖ base)`, and is
/// saturated and consistent. With an empty base this is `v ∈ CCS(seed)`.
pub fn is_extension_in(uni: &Universe, v: &Bits, base: &Bits, seed: &Bits) -> bool {
    base.is_subset(v)
        && seed.is_subset(v)
        && v.is_subset(&base.union(&uni.csf(&seed.difference(base))))
        && is_saturated_consistent_in(uni, v)
}

/// Every `v` with [`is_extension_in`]`(v, base, seed)`, in the order of
/// [`enumerate_ccs_in`]. `base` must itself be saturated and consistent.
pub fn enumerate_extensions(uni: &Universe, base: &Bits, seed: &Bits, mode: CcsMode) -> Vec<Bits> {
    let mut found = match mode {
        CcsMode::Branch | CcsMode::Minimal => branch_search(uni, base, seed),
        CcsMode::Exhaustive => powerset_filter(uni, base, seed),
    };
    let minimal: Vec<bool> = found
        .iter()
        .map(|a| !found.iter().any(|b| b != a && b.is_subset(a)))
        .collect();
    let mut keyed: Vec<(bool, usize, Vec<usize>, Bits)> = found
        .drain(..)
        .zip(minimal)
        .filter(|(_, m)| mode != CcsMode::Minimal || *m)
        .map(|(b, m)| (!m, b.len(), b.ids(), b))
        .collect();
    keyed.sort_by(|x, y| (x.0, x.1, &x.2).cmp(&(y.0, y.1, &y.2)));
    keyed.into_iter().map(|k| k.3).collect()
}

fn powerset_filter(uni: &Universe, base: &Bits, seed: &Bits) -> Vec<Bits> {
    let start = base.union(seed);
    let free: Vec<usize> = uni.csf(&seed.difference(base)).difference(&start).ids();
    assert!(free.len() < 32, "powerset filter over {} free formulas", free.len());
    (0u64..1 << free.len())
        .filter_map(|mask| {
            let mut v = start.clone();
            for (j, id) in free.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    v.insert(*id);
                }
            }
            is_extension_in(uni, &v, base, seed).then_some(v)
        })
        .collect()
}

/// Decides every candidate from the largest down, so that every formula
/// whose membership constrains a candidate is already decided.
fn branch_search(uni: &Universe, base: &Bits, seed: &Bits) -> Vec<Bits> {
    let candidates = uni.csf(&seed.difference(base)).difference(base);
    let order: Vec<usize> = candidates.ids().into_iter().rev().collect();
    let mut search = Branch {
        uni,
        base,
        seed,
        order: &order,
        chosen: uni.empty(),
        out: Vec::new(),
        disjunctions: disjunctions_by_trigger(uni, base, &candidates),
    };
    search.descend(0);
    search.out
}

/// For every `¬(a∧b)` among the candidates whose alternatives `¬a`, `¬b`
/// are not already settled by the base, the constraint keyed by the
/// alternative decided last (the smaller candidate id).
fn disjunctions_by_trigger(uni: &Universe, base: &Bits, candidates: &Bits) -> Vec<Vec<(usize, usize, usize)>> {
    let mut by = vec![Vec::new(); uni.len()];
    for id in candidates.iter() {
        if let Kind::Neg(g) = uni.kind(id) {
            if let Kind::And(a, b) = uni.kind(g) {
                let na = uni.neg_of(a).expect("closed under CSF");
                let nb = uni.neg_of(b).expect("closed under CSF");
                if !base.contains(na) && !base.contains(nb) {
                    by[na.min(nb)].push((id, na, nb));
                }
            }
        }
    }
    by
}

struct Branch<'a> {
    uni: &'a Universe,
    base: &'a Bits,
    seed: &'a Bits,
    order: &'a [usize],
    chosen: Bits,
    out: Vec<Bits>,
    disjunctions: Vec<Vec<(usize, usize, usize)>>,
}

impl Branch<'_> {
    fn forced_in(&self, c: usize) -> bool {
        if self.seed.contains(c) {
            return true;
        }
        // Parents of `c` have larger ids and are decided already; parents in
        // the base are saturated there.
        self.order.iter().take_while(|&&id| id > c).any(|&id| {
            self.chosen.contains(id)
                && match self.uni.kind(id) {
                    Kind::And(a, b) => a == c || b == c,
                    Kind::Neg(g) => matches!(self.uni.kind(g), Kind::Neg(h) if h == c),
                    _ => false,
                }
        })
    }

    fn forced_out(&self, c: usize) -> bool {
        match self.uni.kind(c) {
            Kind::Bottom => return true,
            Kind::Neg(g) if self.base.contains(g) => return true,
            _ => {}
        }
        self.uni
            .neg_of(c)
            .is_some_and(|n| self.chosen.contains(n) || self.base.contains(n))
    }

    fn disjunctions_hold(&self, c: usize) -> bool {
        self.disjunctions[c].iter().all(|&(parent, na, nb)| {
            !self.chosen.contains(parent) || self.chosen.contains(na) || self.chosen.contains(nb)
        })
    }

    fn descend(&mut self, pos: usize) {
        let Some(&c) = self.order.get(pos) else {
            self.out.push(self.base.union(&self.chosen));
            return;
        };
        let must = self.forced_in(c);
        let cannot = self.forced_out(c);
        if must && cannot {
            return;
        }
        if !cannot {
            self.chosen.insert(c);
            if self.disjunctions_hold(c) {
                self.descend(pos + 1);
            }
            self.chosen.remove(c);
        }
        if !must && self.disjunctions_hold(c) {
            self.descend(pos + 1);
        }
    }
}
