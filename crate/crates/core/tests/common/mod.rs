//! Shared fixtures and seeded corpus generators for the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use efq_core::structures::{Context, Structure, Vocabulary};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All tuples over `0..n` of the given arity, in lexicographic order.
pub fn all_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |e| {
                    let mut t2 = t.clone();
                    t2.push(e);
                    t2
                })
            })
            .collect();
    }
    out
}

/// A random structure over `vocab`: uniform domain size in `1..=max_domain`,
/// each possible tuple present in each relation with probability `density`.
pub fn random_structure(
    rng: &mut ChaCha8Rng,
    vocab: &Vocabulary,
    max_domain: usize,
    density: f64,
) -> Structure {
    let n = rng.gen_range(1..=max_domain);
    let mut rels: BTreeMap<String, BTreeSet<Vec<usize>>> = BTreeMap::new();
    for (name, arity) in vocab.symbols() {
        let set = all_tuples(n, arity)
            .into_iter()
            .filter(|_| rng.gen_bool(density))
            .collect();
        rels.insert(name.to_string(), set);
    }
    Structure::new(vocab.clone(), n, rels).unwrap()
}

pub fn unary_vocab() -> Vocabulary {
    Vocabulary::new([("B", 1), ("R", 1)]).unwrap()
}

pub fn mixed_vocab() -> Vocabulary {
    Vocabulary::new([("B", 1), ("R", 1), ("E", 2)]).unwrap()
}

pub fn digraph_vocab() -> Vocabulary {
    Vocabulary::new([("E", 2)]).unwrap()
}

/// A structure over [`unary_vocab`] with the given `B` and `R` members.
pub fn two_color_structure(n: usize, b: &[usize], r: &[usize]) -> Structure {
    let rels: BTreeMap<String, BTreeSet<Vec<usize>>> = [
        ("B".to_string(), b.iter().map(|&e| vec![e]).collect()),
        ("R".to_string(), r.iter().map(|&e| vec![e]).collect()),
    ]
    .into_iter()
    .collect();
    Structure::new(unary_vocab(), n, rels).unwrap()
}

/// The running two-color example on four elements: `a` colors {0,1,2} with
/// `B` and nothing with `R`; `b1` additionally marks 3 with `R`; `b2` colors
/// only 0 with `B` and 1 with `R`.  With `exactly=3`, `a` is told apart from
/// `b2` by a size-2 sentence and from `b1` only at size 4.
pub fn two_color_trio() -> (Context, Context, Context) {
    let a = two_color_structure(4, &[0, 1, 2], &[]);
    let b1 = two_color_structure(4, &[0, 1, 2], &[3]);
    let b2 = two_color_structure(4, &[0], &[1]);
    (
        Context::sentence(a),
        Context::sentence(b1),
        Context::sentence(b2),
    )
}

/// Three singleton colors on four elements against a bare point: with
/// `exactly=3` the least separating sentence has size 3, yet the pair game
/// is already won by Player I at budget 2.
pub fn gap_pair() -> (Context, Context) {
    let vocab = Vocabulary::new([("P1", 1), ("P2", 1), ("P3", 1)]).unwrap();
    let rel = |members: &[usize]| -> BTreeSet<Vec<usize>> { members.iter().map(|&e| vec![e]).collect() };
    let m = Structure::new(
        vocab.clone(),
        4,
        [
            ("P1".to_string(), rel(&[0])),
            ("P2".to_string(), rel(&[1])),
            ("P3".to_string(), rel(&[2])),
        ]
        .into_iter()
        .collect(),
    )
    .unwrap();
    let n = Structure::new(vocab, 1, BTreeMap::new()).unwrap();
    (Context::sentence(m), Context::sentence(n))
}

/// A digraph over [`digraph_vocab`] with the given edges.
pub fn digraph(n: usize, edges: &[(usize, usize)]) -> Structure {
    let set: BTreeSet<Vec<usize>> = edges.iter().map(|&(a, b)| vec![a, b]).collect();
    Structure::new(
        digraph_vocab(),
        n,
        [("E".to_string(), set)].into_iter().collect(),
    )
    .unwrap()
}
