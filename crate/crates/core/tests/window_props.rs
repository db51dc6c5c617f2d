use kde_core::ccs::CcsMode;
use kde_core::formula::{parse, FormulaSet, Syntax};
use kde_core::generate::Gen;
use kde_core::oracle::random_formula;
use kde_core::universe::{Bits, Universe};
use kde_core::window::{
    degree_bound_holds, is_continuation, is_window, members, merge_continuation, partial, pointwise_included, Logic,
    Row0, Window, WindowContext,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    u: FormulaSet,
    pi: usize,
}

fn instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let pi = rng.gen_range(1..=2);
        let indices: Vec<usize> = (0..=pi).collect();
        let n = rng.gen_range(1..=2);
        let u: FormulaSet = (0..n)
            .map(|_| {
                let size = rng.gen_range(2..=9);
                random_formula(&mut rng, &["p", "q"], &indices, 3, size)
            })
            .collect();
        if u.depth() >= 1 && kde_core::formula::sf(&u).len() <= 24 {
            out.push(Instance { u, pi });
        }
    }
    out
}

// Windows for u itself at level 0 under every diamond seed and the empty one.
fn windows_of(uni: &Universe, gen: &Gen, u: &Bits) -> Vec<(Window, Bits, Bits)> {
    let seeds: Vec<Bits> = [uni.empty()]
        .into_iter()
        .chain(
            uni.diamonds(u)
                .into_iter()
                .filter(|(i, _)| *i == 0)
                .map(|(_, id)| uni.singleton(id)),
        )
        .collect();
    let mut out = Vec::new();
    for s in seeds {
        for (w, v0) in gen.windows(u, &s, 0).into_iter().take(8) {
            out.push((w, v0, s.clone()));
        }
    }
    out
}

#[test]
fn generated_windows_validate_and_stay_shallow() {
    let mut checked = 0;
    for inst in instances(1, 80) {
        let lg = Logic::multi(inst.pi);
        let uni = Universe::new(&inst.u);
        let u = uni.bits(&inst.u).unwrap();
        let gen = Gen::new(&uni, lg, CcsMode::Branch);
        let d = uni.set_depth(&u);
        for (w, v0, seed) in windows_of(&uni, &gen, &u) {
            let ctx = WindowContext::top(&uni, &u, 0, &v0, &seed);
            assert!(is_window(&uni, lg, &w, &ctx));
            let node = w.as_node().unwrap();
            for r in &node.rows[1..] {
                assert!(uni.set_depth(r) < d);
            }
            for s in &node.subs {
                assert!(members(s).iter().all(|v| uni.set_depth(v) < d));
            }
            let all = members(&w);
            let n = w.len().unwrap();
            for a in 0..n {
                for b in a + 1..=n {
                    assert!(partial(&w, a, b).unwrap().members().is_subset(&all));
                }
            }
            assert_eq!(partial(&w, 0, n).unwrap().members(), all);
            // A valid window includes itself.
            let whole = partial(&w, 0, n).unwrap();
            assert!(pointwise_included(&uni, lg, &whole, &whole, 0, &u).unwrap());
            checked += 1;
        }
    }
    assert!(checked > 100, "{checked}");
}

#[test]
fn merged_continuations_are_windows() {
    let mut checked = 0;
    for inst in instances(2, 80) {
        let lg = Logic::multi(inst.pi);
        let uni = Universe::new(&inst.u);
        let u = uni.bits(&inst.u).unwrap();
        let gen = Gen::new(&uni, lg, CcsMode::Branch);
        let n = uni.set_depth(&u);
        for (w1, v0, seed) in windows_of(&uni, &gen, &u).into_iter().take(4) {
            for w2 in gen.continuations(&u, 0, &w1).into_iter().take(6) {
                let v2 = w2.as_node().unwrap().rows[0].clone();
                let ctx = WindowContext {
                    u: u.clone(),
                    k: 0,
                    n,
                    v0: v2,
                    row0: Row0::Seeded(uni.empty()),
                };
                assert!(is_window(&uni, lg, &w2, &ctx));
                assert!(is_continuation(&uni, lg, &w2, &w1, &ctx).unwrap());
                let merged = merge_continuation(&uni, lg, &w1, &w2, &ctx).unwrap();
                let mctx = WindowContext {
                    u: u.clone(),
                    k: 0,
                    n: n + 1,
                    v0: v0.clone(),
                    row0: Row0::Seeded(seed.clone()),
                };
                assert!(is_window(&uni, lg, &merged, &mctx));
                assert!(degree_bound_holds(&uni, &w1, &w2, n));
                checked += 1;
            }
        }
    }
    assert!(checked > 100, "{checked}");
}

#[test]
fn non_continuations_are_rejected() {
    let p = |t: &str| parse(t, Syntax::Indexed { pi: 1 }).unwrap();
    let u: FormulaSet = [p("[0][1]q"), p("<0>~q")].into_iter().collect();
    let lg = Logic::multi(1);
    let uni = Universe::new(&u);
    let ub = uni.bits(&u).unwrap();
    let gen = Gen::new(&uni, lg, CcsMode::Branch);
    let ws = gen.windows(&ub, &uni.empty(), 0);
    assert!(!ws.is_empty());
    let n = uni.set_depth(&ub);
    for (w1, _) in &ws {
        let conts = gen.continuations(&ub, 0, w1);
        for (w2, v2) in &ws {
            let ctx = WindowContext {
                u: ub.clone(),
                k: 0,
                n,
                v0: v2.clone(),
                row0: Row0::Seeded(uni.empty()),
            };
            let is = is_continuation(&uni, lg, w2, w1, &ctx).unwrap();
            assert_eq!(is, conts.contains(w2));
            if !is {
                assert!(merge_continuation(&uni, lg, w1, w2, &ctx).is_err());
            }
        }
    }
}

#[test]
fn preconditions_and_shapes() {
    let p = |t: &str| parse(t, Syntax::Indexed { pi: 1 }).unwrap();
    let u: FormulaSet = [p("[0][1]q")].into_iter().collect();
    let lg = Logic::multi(1);
    let uni = Universe::new(&u);
    let ub = uni.bits(&u).unwrap();
    let gen = Gen::new(&uni, lg, CcsMode::Branch);
    let (w, v0) = gen.windows(&ub, &uni.empty(), 0).remove(0);
    let ctx = WindowContext {
        u: ub.clone(),
        k: 0,
        n: 3,
        v0: v0.clone(),
        row0: Row0::Seeded(uni.empty()),
    };
    assert!(is_continuation(&uni, lg, &w, &w, &ctx).is_err());
    let at_top = WindowContext {
        u: ub.clone(),
        k: 1,
        n: 2,
        v0,
        row0: Row0::Seeded(uni.empty()),
    };
    assert!(is_continuation(&uni, lg, &Window::Empty, &Window::Empty, &at_top).is_err());
    assert!(partial(&w, 1, 1).is_err());
    assert!(partial(&w, 0, 3).is_err());
    assert!(partial(&Window::Empty, 0, 1).is_err());
}
