//! Interned subformula universes and bitset-backed formula sets.
//!
//! Every set the solver manipulates is a subset of the subformula closure of
//! its input, so a solve interns that closure once and represents sets as
//! bitsets over the interned ids.

use std::collections::HashMap;
use std::fmt;

use crate::formula::{sf, Formula, FormulaSet, Node};

/// A set of interned formula ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Box<[u64]>);

impl Bits {
    pub fn empty(words: usize) -> Bits {
        Bits(vec![0; words].into_boxed_slice())
    }

    pub fn insert(&mut self, id: usize) -> bool {
        let (w, b) = (id / 64, 1u64 << (id % 64));
        let fresh = self.0[w] & b == 0;
        self.0[w] |= b;
        fresh
    }

    pub fn remove(&mut self, id: usize) {
        self.0[id / 64] &= !(1u64 << (id % 64));
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0[id / 64] & (1u64 << (id % 64)) != 0
    }

    pub fn union_with(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a |= b;
        }
    }

    pub fn union(&self, other: &Bits) -> Bits {
        let mut out = self.clone();
        out.union_with(other);
        out
    }

    pub fn difference(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(other.0.iter()).map(|(a, b)| a & !b).collect())
    }

    pub fn intersection(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(other.0.iter()).map(|(a, b)| a & b).collect())
    }

    pub fn is_subset(&self, other: &Bits) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a & !b == 0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Member ids in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, word)| {
            let mut word = *word;
            std::iter::from_fn(move || {
                if word == 0 {
                    None
                } else {
                    let b = word.trailing_zeros() as usize;
                    word &= word - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    pub fn ids(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Shape of an interned formula, children referenced by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Atom,
    Bottom,
    Neg(usize),
    And(usize, usize),
    Box(usize, usize),
}

/// The interned subformula closure of a seed set.
#[derive(Debug, Clone)]
pub struct Universe {
    forms: Vec<Formula>,
    index: HashMap<Formula, usize>,
    kinds: Vec<Kind>,
    depths: Vec<usize>,
    sizes: Vec<usize>,
    neg_of: Vec<Option<usize>>,
    csf_of: Vec<Bits>,
    words: usize,
}

impl Universe {
    /// Interns `SF(seed)`. Ids increase with formula size, so children always
    /// precede their parents.
    pub fn new(seed: &FormulaSet) -> Universe {
        let mut forms: Vec<Formula> = sf(seed).iter().cloned().collect();
        forms.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
        let index: HashMap<Formula, usize> = forms.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        let kinds: Vec<Kind> = forms
            .iter()
            .map(|f| match f.node() {
                Node::Atom(_) => Kind::Atom,
                Node::Bottom => Kind::Bottom,
                Node::Neg(g) => Kind::Neg(index[g]),
                Node::And(a, b) => Kind::And(index[a], index[b]),
                Node::Box(k, g) => Kind::Box(*k, index[g]),
            })
            .collect();
        let mut neg_of = vec![None; forms.len()];
        for (id, kind) in kinds.iter().enumerate() {
            if let Kind::Neg(g) = kind {
                neg_of[*g] = Some(id);
            }
        }
        let words = forms.len().div_ceil(64).max(1);
        let mut csf_of: Vec<Bits> = Vec::with_capacity(forms.len());
        for (id, kind) in kinds.iter().enumerate() {
            let mut c = Bits::empty(words);
            c.insert(id);
            match *kind {
                Kind::And(a, b) => {
                    c.union_with(&csf_of[a]);
                    c.union_with(&csf_of[b]);
                }
                Kind::Neg(g) => {
                    c.union_with(&csf_of[g]);
                    if let Kind::And(a, b) = kinds[g] {
                        c.union_with(&csf_of[neg_of[a].expect("closed under CSF")]);
                        c.union_with(&csf_of[neg_of[b].expect("closed under CSF")]);
                    }
                }
                _ => {}
            }
            csf_of.push(c);
        }
        Universe {
            depths: forms.iter().map(Formula::depth).collect(),
            sizes: forms.iter().map(Formula::size).collect(),
            forms,
            index,
            kinds,
            neg_of,
            csf_of,
            words,
        }
    }

    pub fn of_formula(f: &Formula) -> Universe {
        Universe::new(&std::iter::once(f.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn empty(&self) -> Bits {
        Bits::empty(self.words)
    }

    pub fn id(&self, f: &Formula) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn formula(&self, id: usize) -> &Formula {
        &self.forms[id]
    }

    pub fn kind(&self, id: usize) -> Kind {
        self.kinds[id]
    }

    pub fn neg_of(&self, id: usize) -> Option<usize> {
        self.neg_of[id]
    }

    pub fn depth(&self, id: usize) -> usize {
        self.depths[id]
    }

    pub fn size(&self, id: usize) -> usize {
        self.sizes[id]
    }

    /// Converts a formula set; `None` if some member lies outside the universe.
    pub fn bits(&self, s: &FormulaSet) -> Option<Bits> {
        let mut out = self.empty();
        for f in s {
            out.insert(self.id(f)?);
        }
        Some(out)
    }

    pub fn singleton(&self, id: usize) -> Bits {
        let mut out = self.empty();
        out.insert(id);
        out
    }

    pub fn set(&self, b: &Bits) -> FormulaSet {
        b.iter().map(|id| self.forms[id].clone()).collect()
    }

    pub fn set_depth(&self, b: &Bits) -> usize {
        b.iter().map(|id| self.depths[id]).max().unwrap_or(0)
    }

    pub fn set_size(&self, b: &Bits) -> usize {
        b.iter().map(|id| self.sizes[id]).sum()
    }

    /// Classical subformula closure of `b`.
    pub fn csf(&self, b: &Bits) -> Bits {
        let mut out = self.empty();
        for id in b.iter() {
            out.union_with(&self.csf_of[id]);
        }
        out
    }

    /// `□ₖ⁻(s)`: children of the index-`k` boxes in `s`.
    pub fn box_minus(&self, k: usize, s: &Bits) -> Bits {
        let mut out = self.empty();
        for id in s.iter() {
            if let Kind::Box(i, c) = self.kinds[id] {
                if i == k {
                    out.insert(c);
                }
            }
        }
        out
    }

    /// Diamonds of `s`: for each `¬□ₖφ ∈ s`, the pair `(k, id of ¬φ)`.
    pub fn diamonds(&self, s: &Bits) -> Vec<(usize, usize)> {
        s.iter()
            .filter_map(|id| match self.kinds[id] {
                Kind::Neg(g) => match self.kinds[g] {
                    Kind::Box(k, phi) => Some((k, self.neg_of[phi].expect("closed under SF"))),
                    _ => None,
                },
                _ => None,
            })
            .collect()
    }

    /// Renders a set as a sorted list of formula strings.
    pub fn render(&self, b: &Bits, syntax: crate::formula::Syntax) -> Vec<String> {
        let mut out: Vec<String> = b.iter().map(|id| self.forms[id].display(syntax).to_string()).collect();
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{csf, parse, Syntax};

    fn p(s: &str) -> Formula {
        parse(s, Syntax::Indexed { pi: 2 }).unwrap()
    }

    #[test]
    fn children_precede_parents() {
        let u = Universe::of_formula(&p("~[0](p & ~[1]q) & [2]r"));
        for id in 0..u.len() {
            match u.kind(id) {
                Kind::Neg(c) | Kind::Box(_, c) => assert!(c < id),
                Kind::And(a, b) => assert!(a < id && b < id),
                _ => {}
            }
        }
    }

    #[test]
    fn csf_matches_tree_closure() {
        let f = p("~(p & ~(q & [0]r)) & ~[1](p & q)");
        let u = Universe::of_formula(&f);
        for id in 0..u.len() {
            let single: FormulaSet = std::iter::once(u.formula(id).clone()).collect();
            assert_eq!(u.set(&u.csf(&u.singleton(id))), csf(&single));
        }
    }

    #[test]
    fn bits_basics() {
        let mut a = Bits::empty(2);
        a.insert(3);
        a.insert(70);
        let mut b = Bits::empty(2);
        b.insert(70);
        assert!(b.is_subset(&a));
        assert!(!a.is_subset(&b));
        assert_eq!(a.ids(), vec![3, 70]);
        assert_eq!(a.difference(&b).ids(), vec![3]);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn diamonds_and_box_minus() {
        let f = p("[0]p & [1]q & ~[0]~r");
        let u = Universe::of_formula(&f);
        let s = u
            .bits(&[p("[0]p"), p("[1]q"), p("~[0]~r")].into_iter().collect())
            .unwrap();
        assert_eq!(u.set(&u.box_minus(0, &s)), [p("p")].into_iter().collect());
        let d = u.diamonds(&s);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].0, 0);
        assert_eq!(u.formula(d[0].1), &p("~~r"));
    }
}
