use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use winosg::asym::{delta_sg, AsymConfig};
use winosg::augment::{augment_quad, AsymContext, AugmentConfig};
use winosg::conllu::parse_conllu_str;
use winosg::metrics::ScoreQuad;
use winosg::sgparse::{parse_scene_graph, SceneGraphParser};
use winosg_bench::{random_graph, random_store, rng, GOLDEN};

fn parsing(c: &mut Criterion) {
    c.bench_function("parse_conllu/golden", |b| b.iter(|| parse_conllu_str(black_box(GOLDEN)).unwrap()));
    let trees = parse_conllu_str(GOLDEN).unwrap();
    c.bench_function("parse_scene_graph/golden", |b| {
        b.iter(|| trees.iter().map(|t| parse_scene_graph(t).len()).sum::<usize>())
    });
    let cached = SceneGraphParser::new();
    c.bench_function("parse_scene_graph/golden cached", |b| {
        b.iter(|| trees.iter().map(|t| cached.parse(t).len()).sum::<usize>())
    });
}

fn scoring(c: &mut Criterion) {
    let mut r = rng(2);
    let store = random_store(&mut r, 200, 300);
    let g0 = random_graph(&mut r, 200, 5);
    let g1 = random_graph(&mut r, 200, 5);
    let cfg = AsymConfig::default();
    c.bench_function("delta_sg/5x5 dim300", |b| {
        b.iter(|| delta_sg(&cfg, &store, black_box(&g0), black_box(&g1)).unwrap())
    });
    let ctx = AsymContext { config: cfg, store: &store };
    let q = ScoreQuad::new(0.3, 0.2, 0.25, 0.31);
    c.bench_function("augment_quad/5x5 dim300", |b| {
        b.iter(|| augment_quad(&q, &g0, &g1, &AugmentConfig::default(), &ctx).unwrap())
    });
}

criterion_group!(benches, parsing, scoring);
criterion_main!(benches);
