//! Small recursively generated graph classes used by the examples, the
//! self-check and the tests.

use crate::composition::{parse_scheme, Scheme};
use crate::structures::{Structure, Vocabulary};

/// Base models and schemes generating a class.
#[derive(Clone, Debug)]
pub struct GeneratedClass {
    pub name: &'static str,
    pub base: Vec<Structure>,
    pub schemes: Vec<Scheme>,
    /// Constant count of the class members (other counts are auxiliary).
    pub k: usize,
}

/// Paths marked at one end: start from an edge with its far end marked and
/// repeatedly attach an edge at the mark, moving the mark outward.
pub fn path_class() -> GeneratedClass {
    let tau = Vocabulary::graphs();
    let start = Structure::path(2).with_constants(vec![1]).unwrap();
    let edge = Structure::path(2).with_constants(vec![0, 1]).unwrap();
    let attach = parse_scheme(
        "scheme k1=1 k2=2 k=1 name=attach\nident 0~0\nresult 0=2.1\ntable E default=union\n",
        &tau,
    )
    .expect("attach scheme");
    GeneratedClass {
        name: "paths",
        base: vec![start, edge],
        schemes: vec![attach],
        k: 1,
    }
}

/// Perfect matchings: disjoint unions of single edges.
pub fn matching_class() -> GeneratedClass {
    let tau = Vocabulary::graphs();
    GeneratedClass {
        name: "matchings",
        base: vec![Structure::path(2)],
        schemes: vec![Scheme::disjoint_union(&tau).with_name("disjoint-union")],
        k: 0,
    }
}

/// The path on `n` vertices marked at its last vertex, as the path class
/// builds it.
pub fn marked_path(n: usize) -> Structure {
    Structure::path(n).with_constants(vec![n - 1]).unwrap()
}

/// `n` disjoint edges.
pub fn matching(n: usize) -> Structure {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (2 * i, 2 * i + 1)).collect();
    Structure::graph(2 * n, &edges).unwrap()
}
