use criterion::{black_box, criterion_group, criterion_main, Criterion};

use mso_core::classes::path_class;
use mso_core::closure::{close, structure_base};
use mso_core::numbersets::{reach, QuadrupleSystem};
use mso_core::{compute_theory, transfer, Scheme, Structure, TheoryStore, Vocabulary};

fn theory(c: &mut Criterion) {
    let tau = Vocabulary::graphs();
    for depth in 0..=1 {
        c.bench_function(&format!("theory/path6/depth{depth}"), |b| {
            b.iter(|| {
                let store = TheoryStore::new(&tau);
                compute_theory(&store, black_box(&Structure::path(6)), depth).unwrap()
            })
        });
    }
}

fn transfer_vs_direct(c: &mut Criterion) {
    let tau = Vocabulary::graphs();
    let s = Scheme::disjoint_union(&tau);
    let store = TheoryStore::new(&tau);
    let t1 = compute_theory(&store, &Structure::path(3), 1).unwrap();
    let t2 = compute_theory(&store, &Structure::path(4), 1).unwrap();
    c.bench_function("transfer/p3+p4/depth1", |b| {
        b.iter(|| transfer(&store, t1, t2, black_box(&s)).unwrap())
    });
}

fn closure(c: &mut Criterion) {
    let class = path_class();
    let tau = Vocabulary::graphs();
    c.bench_function("closure/paths/depth0", |b| {
        b.iter(|| {
            let store = TheoryStore::new(&tau);
            let base = structure_base(&store, &class.base, 0).unwrap();
            close(&store, base, &class.schemes, 0, 64, 1).unwrap()
        })
    });
}

fn number_sets(c: &mut Criterion) {
    let sys = QuadrupleSystem::single(&[0, 1], &[4, 7]);
    c.bench_function("reach/4-7/bound1000", |b| b.iter(|| reach(black_box(&sys), 1000, None)));
}

criterion_group!(benches, theory, transfer_vs_direct, closure, number_sets);
criterion_main!(benches);
