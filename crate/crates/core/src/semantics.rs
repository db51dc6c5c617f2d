//! Kripke models over relations `R₀..R_π`, density, and satisfaction.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{Formula, Node};
use crate::universe::{Bits, Kind, Universe};
use crate::window::{Logic, Window, WindowContext};

/// A finite model. Relations are stored per index as successor sets;
/// indices past the end of `rel` are empty relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KripkeModel {
    worlds: Vec<String>,
    rel: Vec<Vec<BTreeSet<usize>>>,
    val: BTreeMap<String, BTreeSet<usize>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    worlds: Vec<String>,
    relations: BTreeMap<String, Vec<(String, String)>>,
    valuation: BTreeMap<String, Vec<String>>,
}

impl KripkeModel {
    /// A model with `n` worlds named `w0..`, no edges, and an empty valuation.
    pub fn with_worlds(n: usize) -> KripkeModel {
        KripkeModel {
            worlds: (0..n).map(|i| format!("w{i}")).collect(),
            rel: Vec::new(),
            val: BTreeMap::new(),
        }
    }

    pub fn named(names: &[&str]) -> Result<KripkeModel> {
        let worlds: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        if worlds.iter().collect::<BTreeSet<_>>().len() != worlds.len() {
            return Err(Error::Model("duplicate world name".into()));
        }
        Ok(KripkeModel {
            worlds,
            rel: Vec::new(),
            val: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn world(&self, name: &str) -> Result<usize> {
        self.worlds
            .iter()
            .position(|w| w == name)
            .ok_or_else(|| Error::UnknownWorld(name.to_string()))
    }

    /// Highest relation index carrying storage.
    pub fn relation_count(&self) -> usize {
        self.rel.len()
    }

    pub fn add_edge(&mut self, index: usize, from: usize, to: usize) {
        let n = self.worlds.len();
        while self.rel.len() <= index {
            self.rel.push(vec![BTreeSet::new(); n]);
        }
        self.rel[index][from].insert(to);
    }

    pub fn has_edge(&self, index: usize, from: usize, to: usize) -> bool {
        self.rel.get(index).is_some_and(|r| r[from].contains(&to))
    }

    pub fn successors(&self, index: usize, from: usize) -> impl Iterator<Item = usize> + '_ {
        self.rel
            .get(index)
            .into_iter()
            .flat_map(move |r| r[from].iter().copied())
    }

    pub fn set_atom(&mut self, atom: &str, world: usize, value: bool) {
        let set = self.val.entry(atom.to_string()).or_default();
        if value {
            set.insert(world);
        } else {
            set.remove(&world);
        }
    }

    pub fn atom_true(&self, atom: &str, world: usize) -> bool {
        self.val.get(atom).is_some_and(|s| s.contains(&world))
    }

    pub fn from_json(text: &str) -> Result<KripkeModel> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        let names: Vec<&str> = file.worlds.iter().map(String::as_str).collect();
        let mut m = KripkeModel::named(&names)?;
        for (key, edges) in &file.relations {
            let index: usize = key.parse().map_err(|_| Error::Model(format!("relation key `{key}`")))?;
            for (a, b) in edges {
                let (a, b) = (m.world(a)?, m.world(b)?);
                m.add_edge(index, a, b);
            }
        }
        for (atom, ws) in &file.valuation {
            m.val.entry(atom.clone()).or_default();
            for w in ws {
                let w = m.world(w)?;
                m.set_atom(atom, w, true);
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let relations = self
            .rel
            .iter()
            .enumerate()
            .filter(|(_, r)| r.iter().any(|s| !s.is_empty()))
            .map(|(i, r)| {
                let edges = r
                    .iter()
                    .enumerate()
                    .flat_map(|(a, s)| s.iter().map(move |b| (a, *b)))
                    .map(|(a, b)| (self.worlds[a].clone(), self.worlds[b].clone()))
                    .collect();
                (i.to_string(), edges)
            })
            .collect();
        let valuation = self
            .val
            .iter()
            .map(|(a, s)| (a.clone(), s.iter().map(|w| self.worlds[*w].clone()).collect()))
            .collect();
        serde_json::to_value(ModelFile {
            worlds: self.worlds.clone(),
            relations,
            valuation,
        })
        .expect("model serializes")
    }
}

/// Density violations `(i, s, t)`: `s Rᵢ t` with no `u` such that
/// `s Rᵢ u` and `u Rᵢ₊₁ t`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DensityReport {
    pub violations: Vec<(usize, String, String)>,
}

impl DensityReport {
    pub fn is_dense(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn is_dense(m: &KripkeModel, pi: usize) -> DensityReport {
    density_report(m, (0..pi).map(|i| (i, i + 1)))
}

/// Monomodal density of `R₀`: every edge factors through an `R₀∘R₀` path.
pub fn is_dense_mono(m: &KripkeModel) -> DensityReport {
    density_report(m, std::iter::once((0, 0)))
}

pub fn is_dense_for(m: &KripkeModel, lg: Logic) -> DensityReport {
    if lg.mono {
        is_dense_mono(m)
    } else {
        is_dense(m, lg.pi)
    }
}

fn density_report(m: &KripkeModel, pairs: impl Iterator<Item = (usize, usize)>) -> DensityReport {
    let mut violations = Vec::new();
    for (i, j) in pairs {
        for s in 0..m.len() {
            for t in m.successors(i, s) {
                if !m.successors(i, s).any(|u| m.has_edge(j, u, t)) {
                    violations.push((i, m.worlds[s].clone(), m.worlds[t].clone()));
                }
            }
        }
    }
    DensityReport { violations }
}

/// Truth of every universe formula at every world, `table[id][world]`.
pub fn truth_table(m: &KripkeModel, uni: &Universe) -> Vec<Vec<bool>> {
    let mut table: Vec<Vec<bool>> = Vec::with_capacity(uni.len());
    for id in 0..uni.len() {
        let row = (0..m.len())
            .map(|w| match uni.kind(id) {
                Kind::Atom => match uni.formula(id).node() {
                    Node::Atom(name) => m.atom_true(name, w),
                    _ => unreachable!("atom kind"),
                },
                Kind::Bottom => false,
                Kind::Neg(g) => !table[g][w],
                Kind::And(a, b) => table[a][w] && table[b][w],
                Kind::Box(k, c) => m.successors(k, w).all(|s| table[c][s]),
            })
            .collect();
        table.push(row);
    }
    table
}

/// Truth sets of a universe in a model, as bitsets per world.
pub struct Truth<'a> {
    pub model: &'a KripkeModel,
    pub uni: &'a Universe,
    sets: Vec<Bits>,
}

impl<'a> Truth<'a> {
    pub fn new(model: &'a KripkeModel, uni: &'a Universe) -> Truth<'a> {
        let table = truth_table(model, uni);
        let sets = (0..model.len())
            .map(|w| {
                let mut b = uni.empty();
                for (id, row) in table.iter().enumerate() {
                    if row[w] {
                        b.insert(id);
                    }
                }
                b
            })
            .collect();
        Truth { model, uni, sets }
    }

    /// Universe formulas true at `w`.
    pub fn at(&self, w: usize) -> &Bits {
        &self.sets[w]
    }

    pub fn holds(&self, w: usize, s: &Bits) -> bool {
        s.is_subset(&self.sets[w])
    }
}

pub fn model_check(m: &KripkeModel, x: &str, f: &Formula) -> Result<bool> {
    let w = m.world(x)?;
    Ok(check_at(m, w, f))
}

pub fn check_at(m: &KripkeModel, w: usize, f: &Formula) -> bool {
    let uni = Universe::of_formula(f);
    truth_table(m, &uni)[uni.id(f).expect("own closure")][w]
}

/// `M, x ⊨ W`: `x` satisfies `u`, some `Rₖ`-successor `y₀` satisfies `v₀`,
/// and for each `i` some `Rₖ`-successor `yᵢ₊₁` reaching `yᵢ` through `Rₖ₊₁`
/// satisfies `vᵢ₊₁` and the subwindow `Wᵢ`.
pub fn sat_window(truth: &Truth, lg: Logic, x: usize, w: &Window, ctx: &WindowContext) -> bool {
    let mut memo = HashMap::new();
    window_holds(truth, lg, x, w, &ctx.u, ctx.k, &mut memo)
}

type WindowMemo = HashMap<(usize, usize, Window), bool>;

fn window_holds(truth: &Truth, lg: Logic, x: usize, w: &Window, u: &Bits, k: usize, memo: &mut WindowMemo) -> bool {
    let Window::Node(node) = w else {
        return true;
    };
    let key = (x, k, w.clone());
    if let Some(hit) = memo.get(&key) {
        return *hit;
    }
    let m = truth.model;
    let ok = truth.holds(x, u)
        && m.successors(lg.index(k), x)
            .filter(|y0| truth.holds(*y0, &node.rows[0]))
            .collect::<Vec<_>>()
            .into_iter()
            .any(|y0| chain_holds(truth, lg, x, y0, 0, node, k, memo));
    memo.insert(key, ok);
    ok
}

#[allow(clippy::too_many_arguments)]
fn chain_holds(
    truth: &Truth,
    lg: Logic,
    x: usize,
    yi: usize,
    i: usize,
    node: &crate::window::WindowNode,
    k: usize,
    memo: &mut WindowMemo,
) -> bool {
    if i + 1 == node.rows.len() {
        return true;
    }
    let m = truth.model;
    let candidates: Vec<usize> = m
        .successors(lg.index(k), x)
        .filter(|y| m.has_edge(lg.index(k + 1), *y, yi) && truth.holds(*y, &node.rows[i + 1]))
        .collect();
    candidates.into_iter().any(|y| {
        window_holds(truth, lg, y, &node.subs[i], &node.rows[i + 1], k + 1, memo)
            && chain_holds(truth, lg, x, y, i + 1, node, k, memo)
    })
}

/// Builds the window for `(u, v₀)` read off a dense model: `x` satisfies
/// `u`, `x Rₖ y₀`, and `y₀` satisfies `seed`. The worlds `y₁, y₂, …` are
/// density witnesses (`x Rₖ yᵢ₊₁ Rₖ₊₁ yᵢ`), preferring worlds already used.
/// Each row is the part of its world's truth set inside the classical
/// closure of that row's demands, so rows are exactly the saturations the
/// enumerator would choose. Returns the window and its row 0.
#[allow(clippy::too_many_arguments)]
pub fn build_window_from_model(
    truth: &Truth,
    lg: Logic,
    x: usize,
    y0: usize,
    u: &Bits,
    seed: &Bits,
    k: usize,
    n: usize,
) -> Result<(Window, Bits)> {
    let m = truth.model;
    if !m.has_edge(lg.index(k), x, y0) {
        return Err(Error::Precondition(format!("no R{} edge from x to y0", lg.index(k))));
    }
    build(truth, lg, k, u, x, y0, seed, Some(n))
}

#[allow(clippy::too_many_arguments)]
fn build(
    truth: &Truth,
    lg: Logic,
    j: usize,
    p: &Bits,
    x: usize,
    y0: usize,
    s: &Bits,
    n: Option<usize>,
) -> Result<(Window, Bits)> {
    let uni = truth.uni;
    let m = truth.model;
    let d = uni.set_depth(p);
    let bm = uni.box_minus(lg.index(j), p);
    let cut = |demand: &Bits| truth.at(y0).intersection(&uni.csf(demand));
    if lg.empty_at(j, d) {
        return Ok((Window::Empty, cut(&s.union(&bm))));
    }
    let n = n.unwrap_or(d);
    if n == 0 {
        let r = cut(&s.union(&bm));
        return Ok((Window::node(vec![r.clone()], Vec::new()), r));
    }
    let (ri, rj) = (lg.index(j), lg.index(j + 1));
    let mut ys = vec![y0];
    for i in 0..n {
        let prev = ys[i];
        let mut options: Vec<usize> = m.successors(ri, x).filter(|z| m.has_edge(rj, *z, prev)).collect();
        options.sort_by_key(|z| (!ys.contains(z), *z));
        let Some(z) = options.first() else {
            return Err(Error::NotDense {
                index: ri,
                from: m.worlds()[x].clone(),
                to: m.worlds()[prev].clone(),
            });
        };
        ys.push(*z);
    }
    let mut rows = vec![uni.empty(); n + 1];
    let mut subs = vec![Window::Empty; n];
    rows[n] = truth.at(ys[n]).intersection(&uni.csf(&bm));
    for i in (0..n).rev() {
        let seed = if i == 0 { bm.union(s) } else { bm.clone() };
        let (sub, r) = build(truth, lg, j + 1, &rows[i + 1], ys[i + 1], ys[i], &seed, None)?;
        rows[i] = r;
        subs[i] = sub;
    }
    let r0 = rows[0].clone();
    Ok((Window::node(rows, subs), r0))
}

/// Random model with reflexive `R₁..R_π`, which makes every `R₀..R_{π-1}`
/// edge factor through its own target. Atoms hold with probability 1/2,
/// `R₀` edges with probability `edge_p`.
pub fn gen_dense_model(seed: u64, pi: usize, size: usize, atoms: &[&str], edge_p: f64) -> KripkeModel {
    assert!(size >= 1, "models need a world");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = KripkeModel::with_worlds(size);
    for a in atoms {
        m.val.insert(a.to_string(), BTreeSet::new());
        for w in 0..size {
            if rng.gen_bool(0.5) {
                m.set_atom(a, w, true);
            }
        }
    }
    for i in 0..=pi {
        for a in 0..size {
            for b in 0..size {
                if (i > 0 && a == b) || rng.gen_bool(edge_p) {
                    m.add_edge(i, a, b);
                }
            }
        }
    }
    while m.rel.len() <= pi {
        m.rel.push(vec![BTreeSet::new(); size]);
    }
    debug_assert!(is_dense(&m, pi).is_dense());
    m
}

/// Random monomodal model made dense by looping every edge target.
pub fn gen_dense_model_mono(seed: u64, size: usize, atoms: &[&str], edge_p: f64) -> KripkeModel {
    let mut m = gen_dense_model(seed, 0, size, atoms, edge_p);
    let targets: BTreeSet<usize> = (0..size).flat_map(|a| m.successors(0, a).collect::<Vec<_>>()).collect();
    for t in targets {
        m.add_edge(0, t, t);
    }
    m
}

/// Searches models of up to `max_size` worlds for a dense one whose world
/// `w0` satisfies `f`. Only models in which every world is reachable from
/// `w0` are tried, since the generated submodel of a dense model is dense.
/// A `None` answer proves nothing.
pub fn bounded_model_search(f: &Formula, lg: Logic, max_size: usize) -> Option<(KripkeModel, usize)> {
    let uni = Universe::of_formula(f);
    let target = uni.id(f).expect("own closure");
    let atoms: Vec<String> = f.atoms().iter().map(|a| a.to_string()).collect();
    let rels = if lg.mono { 1 } else { lg.pi + 1 };
    for n in 1..=max_size {
        let edge_bits = rels * n * n;
        if edge_bits + atoms.len() * n > 30 {
            break;
        }
        for mask in 0u64..1 << edge_bits {
            let mut m = KripkeModel::with_worlds(n);
            for r in 0..rels {
                m.rel.push(vec![BTreeSet::new(); n]);
                for a in 0..n {
                    for b in 0..n {
                        if mask >> (r * n * n + a * n + b) & 1 == 1 {
                            m.add_edge(r, a, b);
                        }
                    }
                }
            }
            if !all_reachable(&m, rels) || !is_dense_for(&m, lg).is_dense() {
                continue;
            }
            for vmask in 0u64..1 << (atoms.len() * n) {
                for (ai, a) in atoms.iter().enumerate() {
                    for w in 0..n {
                        m.set_atom(a, w, vmask >> (ai * n + w) & 1 == 1);
                    }
                }
                if truth_table(&m, &uni)[target][0] {
                    return Some((m, 0));
                }
            }
        }
    }
    None
}

fn all_reachable(m: &KripkeModel, rels: usize) -> bool {
    let mut seen = vec![false; m.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(w) = stack.pop() {
        for r in 0..rels {
            for s in m.successors(r, w) {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
    }
    seen.into_iter().all(|b| b)
}

/// Disjoint union; world `w` of model `i` becomes `i:w`.
pub fn disjoint_union(models: &[KripkeModel]) -> Result<KripkeModel> {
    if models.is_empty() {
        return Err(Error::EmptyUnion);
    }
    let mut out = KripkeModel {
        worlds: Vec::new(),
        rel: Vec::new(),
        val: BTreeMap::new(),
    };
    let total: usize = models.iter().map(KripkeModel::len).sum();
    let rels = models.iter().map(|m| m.rel.len()).max().unwrap_or(0);
    out.rel = vec![vec![BTreeSet::new(); total]; rels];
    let mut offset = 0;
    for (i, m) in models.iter().enumerate() {
        out.worlds.extend(m.worlds.iter().map(|w| format!("{i}:{w}")));
        for (r, succ) in m.rel.iter().enumerate() {
            for (a, s) in succ.iter().enumerate() {
                out.rel[r][a + offset].extend(s.iter().map(|b| b + offset));
            }
        }
        for (atom, ws) in &m.val {
            out.val
                .entry(atom.clone())
                .or_default()
                .extend(ws.iter().map(|w| w + offset));
        }
        offset += m.len();
    }
    Ok(out)
}
