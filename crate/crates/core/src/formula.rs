//! Object language: formulas over atoms, falsum, negation, conjunction and
//! indexed boxes, with the usual derived connectives desugared on input.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A formula of the core language. Cheap to clone; equality, ordering and
/// hashing are structural.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Formula(Arc<Node>);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Atom(Arc<str>),
    Bottom,
    Neg(Formula),
    And(Formula, Formula),
    Box(usize, Formula),
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula(Arc::new(Node::Atom(name.into())))
    }

    pub fn bottom() -> Formula {
        Formula(Arc::new(Node::Bottom))
    }

    pub fn top() -> Formula {
        Formula::neg(Formula::bottom())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(f: Formula) -> Formula {
        Formula(Arc::new(Node::Neg(f)))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula(Arc::new(Node::And(a, b)))
    }

    pub fn boxed(index: usize, f: Formula) -> Formula {
        Formula(Arc::new(Node::Box(index, f)))
    }

    /// `<i>f`, i.e. `~[i]~f`.
    pub fn diamond(index: usize, f: Formula) -> Formula {
        Formula::neg(Formula::boxed(index, Formula::neg(f)))
    }

    /// `a | b`, i.e. `~(~a & ~b)`.
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::neg(Formula::and(Formula::neg(a), Formula::neg(b)))
    }

    /// `a -> b`, i.e. `~(a & ~b)`.
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::neg(Formula::and(a, Formula::neg(b)))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn is_bottom(&self) -> bool {
        matches!(*self.0, Node::Bottom)
    }

    /// Modal depth.
    pub fn depth(&self) -> usize {
        match self.node() {
            Node::Atom(_) | Node::Bottom => 0,
            Node::Neg(f) => f.depth(),
            Node::And(a, b) => a.depth().max(b.depth()),
            Node::Box(_, f) => 1 + f.depth(),
        }
    }

    /// Number of symbol occurrences.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Atom(_) | Node::Bottom => 1,
            Node::Neg(f) | Node::Box(_, f) => 1 + f.size(),
            Node::And(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Largest modality index occurring in the formula.
    pub fn max_index(&self) -> Option<usize> {
        match self.node() {
            Node::Atom(_) | Node::Bottom => None,
            Node::Neg(f) => f.max_index(),
            Node::And(a, b) => a.max_index().max(b.max_index()),
            Node::Box(i, f) => Some(f.max_index().map_or(*i, |j| j.max(*i))),
        }
    }

    /// Set of modality indices occurring in the formula.
    pub fn indices(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_indices(&mut out);
        out
    }

    fn collect_indices(&self, out: &mut BTreeSet<usize>) {
        match self.node() {
            Node::Atom(_) | Node::Bottom => {}
            Node::Neg(f) => f.collect_indices(out),
            Node::And(a, b) => {
                a.collect_indices(out);
                b.collect_indices(out);
            }
            Node::Box(i, f) => {
                out.insert(*i);
                f.collect_indices(out);
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Arc<str>>) {
        match self.node() {
            Node::Atom(p) => {
                out.insert(p.clone());
            }
            Node::Bottom => {}
            Node::Neg(f) | Node::Box(_, f) => f.collect_atoms(out),
            Node::And(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Applies a substitution of formulas for atoms.
    pub fn substitute(&self, map: &dyn Fn(&str) -> Option<Formula>) -> Formula {
        match self.node() {
            Node::Atom(p) => map(p).unwrap_or_else(|| self.clone()),
            Node::Bottom => self.clone(),
            Node::Neg(f) => Formula::neg(f.substitute(map)),
            Node::And(a, b) => Formula::and(a.substitute(map), b.substitute(map)),
            Node::Box(i, f) => Formula::boxed(*i, f.substitute(map)),
        }
    }

    /// Renders the formula in the given surface syntax.
    pub fn display(&self, syntax: Syntax) -> Display<'_> {
        Display { f: self, syntax }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(Syntax::Indexed { pi: usize::MAX }))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(Syntax::Indexed { pi: usize::MAX }))
    }
}

/// `n ∸ m`, truncated subtraction.
pub fn monus(n: usize, m: usize) -> usize {
    n.saturating_sub(m)
}

/// Surface syntax: indexed boxes `[i]` bounded by `pi`, or the single
/// unindexed box `[]` of the monomodal logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Syntax {
    Indexed { pi: usize },
    Mono,
}

pub struct Display<'a> {
    f: &'a Formula,
    syntax: Syntax,
}

// Binding strength of the printed top-level operator.
const PREC_IMP: u8 = 1;
const PREC_AND: u8 = 3;
const PREC_UNARY: u8 = 4;

impl Display<'_> {
    fn write(&self, f: &Formula, ctx: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mono = self.syntax == Syntax::Mono;
        let modal = |out: &mut fmt::Formatter<'_>, open: &str, close: &str, i: usize| {
            if mono {
                write!(out, "{open}{close}")
            } else {
                write!(out, "{open}{i}{close}")
            }
        };
        match f.node() {
            Node::Atom(p) => write!(out, "{p}"),
            Node::Bottom => write!(out, "bot"),
            Node::Box(i, g) => {
                modal(out, "[", "]", *i)?;
                self.write(g, PREC_UNARY, out)
            }
            Node::And(a, b) => {
                let paren = ctx > PREC_AND;
                if paren {
                    write!(out, "(")?;
                }
                self.write(a, PREC_AND, out)?;
                write!(out, " & ")?;
                self.write(b, PREC_AND + 1, out)?;
                if paren {
                    write!(out, ")")?;
                }
                Ok(())
            }
            Node::Neg(g) => match g.node() {
                Node::Bottom => write!(out, "top"),
                Node::Box(i, h) if matches!(h.node(), Node::Neg(_)) => {
                    let Node::Neg(inner) = h.node() else { unreachable!() };
                    modal(out, "<", ">", *i)?;
                    self.write(inner, PREC_UNARY, out)
                }
                Node::And(a, b) if matches!(b.node(), Node::Neg(_)) => {
                    let Node::Neg(c) = b.node() else { unreachable!() };
                    let paren = ctx > PREC_IMP;
                    if paren {
                        write!(out, "(")?;
                    }
                    // `->` is right-associative: a nested implication on the left needs parens.
                    self.write(a, PREC_IMP + 1, out)?;
                    write!(out, " -> ")?;
                    self.write(c, PREC_IMP, out)?;
                    if paren {
                        write!(out, ")")?;
                    }
                    Ok(())
                }
                _ => {
                    write!(out, "~")?;
                    self.write(g, PREC_UNARY, out)
                }
            },
        }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.f, 0, out)
    }
}

/// A finite set of formulas with cached modal depth and total size.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FormulaSet {
    items: BTreeSet<Formula>,
    depth: usize,
    size: usize,
}

impl FormulaSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, f: Formula) -> bool {
        let (d, s) = (f.depth(), f.size());
        if self.items.insert(f) {
            self.depth = self.depth.max(d);
            self.size += s;
            true
        } else {
            false
        }
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.items.contains(f)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Formula> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `d(s)`: maximal depth of a member, 0 for the empty set.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `|s|`: sum of member sizes.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_subset(&self, other: &FormulaSet) -> bool {
        self.items.is_subset(&other.items)
    }

    pub fn union(&self, other: &FormulaSet) -> FormulaSet {
        let mut out = self.clone();
        out.extend(other.iter().cloned());
        out
    }

    pub fn difference(&self, other: &FormulaSet) -> FormulaSet {
        self.iter().filter(|f| !other.contains(f)).cloned().collect()
    }
}

impl Extend<Formula> for FormulaSet {
    fn extend<I: IntoIterator<Item = Formula>>(&mut self, iter: I) {
        for f in iter {
            self.insert(f);
        }
    }
}

impl FromIterator<Formula> for FormulaSet {
    fn from_iter<I: IntoIterator<Item = Formula>>(iter: I) -> Self {
        let mut out = FormulaSet::new();
        out.extend(iter);
        out
    }
}

impl<'a> IntoIterator for &'a FormulaSet {
    type Item = &'a Formula;
    type IntoIter = std::collections::btree_set::Iter<'a, Formula>;
    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Immediate consequences of `f` under the classical closure rules.
fn classical_children(f: &Formula) -> Vec<Formula> {
    match f.node() {
        Node::And(a, b) => vec![a.clone(), b.clone()],
        Node::Neg(g) => match g.node() {
            Node::And(a, b) => vec![g.clone(), Formula::neg(a.clone()), Formula::neg(b.clone())],
            _ => vec![g.clone()],
        },
        _ => vec![],
    }
}

fn closure(s: &FormulaSet, cross_boxes: bool) -> FormulaSet {
    let mut out = s.clone();
    let mut work: Vec<Formula> = s.iter().cloned().collect();
    while let Some(f) = work.pop() {
        let mut next = classical_children(&f);
        if cross_boxes {
            match f.node() {
                Node::Box(_, g) => next.push(g.clone()),
                Node::Neg(g) => {
                    if let Node::Box(_, h) = g.node() {
                        next.push(Formula::neg(h.clone()));
                    }
                }
                _ => {}
            }
        }
        for g in next {
            if out.insert(g.clone()) {
                work.push(g);
            }
        }
    }
    out
}

/// Classical subformulas: closure under the propositional rules, stopping at boxes.
pub fn csf(s: &FormulaSet) -> FormulaSet {
    closure(s, false)
}

/// Subformulas: the classical closure extended through boxes and negated boxes.
pub fn sf(s: &FormulaSet) -> FormulaSet {
    closure(s, true)
}

/// Parses a formula. Derived connectives are desugared into the core
/// language; in indexed syntax every index must be at most `pi`.
pub fn parse(text: &str, syntax: Syntax) -> Result<Formula> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        syntax,
    };
    let f = p.implication()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    syntax: Syntax,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn implication(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.eat("->") {
            let rhs = self.implication()?;
            Ok(Formula::implies(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.conjunction()?;
        while self.eat("|") {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.eat("&") {
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn modality(&mut self, close: &str) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let index = match self.syntax {
            Syntax::Mono => {
                if !digits.is_empty() {
                    self.pos = start;
                    return Err(self.error("monomodal syntax takes no modality index"));
                }
                0
            }
            Syntax::Indexed { pi } => {
                if digits.is_empty() {
                    return Err(self.error("expected modality index"));
                }
                let index: usize = digits.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: "modality index too large".into(),
                })?;
                if index > pi {
                    return Err(Error::IndexOutOfRange { index, pi });
                }
                index
            }
        };
        if !self.eat(close) {
            return Err(self.error(&format!("expected `{close}`")));
        }
        Ok(index)
    }

    fn unary(&mut self) -> Result<Formula> {
        self.skip_ws();
        if self.eat("~") {
            return Ok(Formula::neg(self.unary()?));
        }
        if self.eat("[") {
            let i = self.modality("]")?;
            return Ok(Formula::boxed(i, self.unary()?));
        }
        if self.eat("<") {
            let i = self.modality(">")?;
            return Ok(Formula::diamond(i, self.unary()?));
        }
        if self.eat("(") {
            let f = self.implication()?;
            if !self.eat(")") {
                return Err(self.error("expected `)`"));
            }
            return Ok(f);
        }
        self.skip_ws();
        let start = self.pos;
        match self.src.get(self.pos) {
            Some(c) if c.is_ascii_lowercase() => {
                self.pos += 1;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                Ok(match word {
                    "bot" => Formula::bottom(),
                    "top" => Formula::top(),
                    _ => Formula::atom(word),
                })
            }
            Some(_) => Err(self.error("expected a formula")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse(s, Syntax::Indexed { pi: 3 }).unwrap()
    }

    fn set(fs: &[&str]) -> FormulaSet {
        fs.iter().map(|s| p(s)).collect()
    }

    #[test]
    fn parse_constants_and_sugar() {
        assert_eq!(p("bot"), Formula::bottom());
        assert_eq!(p("top"), Formula::neg(Formula::bottom()));
        let diamond = Formula::neg(Formula::boxed(0, Formula::neg(Formula::atom("p"))));
        assert_eq!(p("<0>p"), diamond);
        assert_eq!(p("p -> q"), Formula::implies(Formula::atom("p"), Formula::atom("q")));
        assert_eq!(p("p | q"), Formula::or(Formula::atom("p"), Formula::atom("q")));
    }

    #[test]
    fn parse_precedence() {
        // & > | > ->, -> right associative
        assert_eq!(p("p & q | r"), Formula::or(p("(p & q)"), p("r")));
        assert_eq!(p("p -> q -> r"), Formula::implies(p("p"), p("q -> r")));
        assert_eq!(p("~p & q"), Formula::and(p("~p"), p("q")));
        assert_eq!(p("[1]p & q"), Formula::and(p("[1]p"), p("q")));
        assert_eq!(p("p | q -> r & s"), Formula::implies(p("p | q"), p("r & s")));
    }

    #[test]
    fn parse_errors() {
        let err = parse("[2]p", Syntax::Indexed { pi: 1 }).unwrap_err();
        assert_eq!(err, Error::IndexOutOfRange { index: 2, pi: 1 });
        assert!(matches!(
            parse("p &", Syntax::Indexed { pi: 1 }),
            Err(Error::Syntax { pos: 3, .. })
        ));
        assert!(matches!(
            parse("(p", Syntax::Indexed { pi: 1 }),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse("P", Syntax::Indexed { pi: 1 }),
            Err(Error::Syntax { pos: 0, .. })
        ));
        assert!(matches!(
            parse("[]p", Syntax::Indexed { pi: 1 }),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(parse("[0]p", Syntax::Mono), Err(Error::Syntax { .. })));
    }

    #[test]
    fn parse_mono() {
        let f = parse("<>p -> <><>p", Syntax::Mono).unwrap();
        assert_eq!(
            f,
            Formula::implies(
                Formula::diamond(0, p("p")),
                Formula::diamond(0, Formula::diamond(0, p("p")))
            )
        );
        assert_eq!(f.display(Syntax::Mono).to_string(), "<>p -> <><>p");
    }

    #[test]
    fn atom_names() {
        assert_eq!(p("foo_Bar9"), Formula::atom("foo_Bar9"));
        assert_eq!(p("bottom"), Formula::atom("bottom"));
    }

    #[test]
    fn depth_examples() {
        assert_eq!(p("p & ~q").depth(), 0);
        assert_eq!(p("[0][1]p").depth(), 2);
        assert_eq!(p("~[0]~p").depth(), 1);
    }

    #[test]
    fn size_examples() {
        assert_eq!(p("p").size(), 1);
        assert_eq!(p("~p").size(), 2);
        assert_eq!(p("[0](p & q)").size(), 4);
    }

    #[test]
    fn monus_examples() {
        assert_eq!(monus(3, 1), 2);
        assert_eq!(monus(1, 3), 0);
        assert_eq!(monus(0, 0), 0);
    }

    #[test]
    fn csf_examples() {
        assert_eq!(csf(&set(&["p"])), set(&["p"]));
        assert_eq!(
            csf(&set(&["~(p & q)"])),
            set(&["~(p & q)", "p & q", "~p", "p", "~q", "q"])
        );
        assert_eq!(csf(&set(&["[0]p"])), set(&["[0]p"]));
    }

    #[test]
    fn sf_examples() {
        assert_eq!(sf(&set(&["[0]p"])), set(&["[0]p", "p"]));
        let s = sf(&set(&["~[0](p & q)"]));
        for f in ["~(p & q)", "~p", "~q", "p", "q", "p & q"] {
            assert!(s.contains(&p(f)), "{f} missing");
        }
    }

    #[test]
    fn cached_measures_track_inserts() {
        let mut s = FormulaSet::new();
        assert_eq!((s.depth(), s.size()), (0, 0));
        s.insert(p("[0][1]p"));
        s.insert(p("q"));
        s.insert(p("q"));
        assert_eq!((s.depth(), s.size()), (2, 4));
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "p -> q -> r",
            "(p -> q) -> r",
            "<1>(p & ~q) | [0]bot",
            "~~p",
            "top",
            "~(p & q) & r",
        ] {
            let f = p(s);
            assert_eq!(p(&f.to_string()), f, "{s} printed as {f}");
        }
    }
}
