use std::hint::black_box;

use asnets_core::domains;
use asnets_core::heuristics::{h_add, lmcut, Heuristic, HeuristicKind, RelaxedTask};
use asnets_core::ssp::{all_outcomes_determinise, value_iteration, FsspudeConfig};
use asnets_core::teachers::{astar_plan, lrtdp_solve};
use criterion::{criterion_group, criterion_main, Criterion};

fn planning(c: &mut Criterion) {
    c.bench_function("ground/ttw4", |b| {
        let inst = domains::triangle_tireworld(4);
        b.iter(|| black_box(&inst).ground().unwrap())
    });

    let bw = domains::blocksworld(6, 3, false).ground().unwrap();
    let task = RelaxedTask::new(&bw);
    c.bench_function("h_add/bw6", |b| b.iter(|| h_add(&task, black_box(&bw.s0))));
    c.bench_function("lmcut/bw6", |b| b.iter(|| lmcut(&task, black_box(&bw.s0))));
    let h = Heuristic::new(HeuristicKind::Lmcut, &bw);
    c.bench_function("astar_lmcut/bw6", |b| b.iter(|| astar_plan(&bw, &h, black_box(&bw.s0), None).unwrap()));

    let ttw = domains::triangle_tireworld(2).ground().unwrap();
    let det = all_outcomes_determinise(&ttw);
    let th = Heuristic::new(HeuristicKind::Hadd, &det);
    c.bench_function("lrtdp_hadd/ttw2", |b| b.iter(|| lrtdp_solve(&ttw, &th, black_box(&ttw.s0), 500.0, 1e-4, None).unwrap()));
    c.bench_function("value_iteration/ttw2", |b| b.iter(|| value_iteration(black_box(&ttw), &FsspudeConfig::default(), 1e-6, 100_000).unwrap()));
}

criterion_group!(benches, planning);
criterion_main!(benches);
