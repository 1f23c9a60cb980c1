//! Acceptance run: one PASS/FAIL line per criterion.

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use winosg::ablate::{find_spans, transform, AblationKind, SpanOptions, TransformOptions};
use winosg::assignment::{solve_assignment, CostMatrix, Objective};
use winosg::asym::{delta_sg, pairwise_asymmetry, AsymConfig};
use winosg::augment::{augment_quad, AsymContext, AugmentConfig};
use winosg::conllu::{parse_conllu_str, DepTree};
use winosg::embed::{EmbeddingStore, OovPolicy};
use winosg::metrics::{aggregate, enumerated_baseline, example_metrics, random_baseline, read_examples, ExampleRecord, ScoreQuad};
use winosg::promptkit::{build_flat_prompt, build_turn1_prompt, extract_triple_block, run_multiturn, PromptTemplates, ScriptedModel};
use winosg::sgparse::{parse_scene_graph, EntityMention, Rule, SceneGraph, Triple};

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> String,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "metric engine exactness", limit: Some(Duration::from_secs(1)), run: metric_exactness },
        Criterion { id: 2, name: "random baselines", limit: Some(Duration::from_secs(10)), run: random_baselines },
        Criterion { id: 3, name: "assignment vs brute force", limit: Some(Duration::from_secs(30)), run: hungarian_oracle },
        Criterion { id: 4, name: "asymmetry properties", limit: None, run: asymmetry_properties },
        Criterion { id: 5, name: "empty-graph degradation", limit: None, run: degradation },
        Criterion { id: 6, name: "image indicator invariance", limit: None, run: image_invariance },
        Criterion { id: 7, name: "parser golden corpus", limit: None, run: golden_corpus },
        Criterion { id: 8, name: "ablation properties", limit: None, run: ablation_properties },
        Criterion { id: 9, name: "multi-turn protocol", limit: None, run: multiturn },
        Criterion { id: 10, name: "parse -> score -> eval", limit: None, run: end_to_end },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(detail) => match c.limit {
                Some(limit) if elapsed > limit => (false, format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
                _ => (true, detail),
            },
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, msg)
            }
        };
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {} {:<28} {:>9.2?}  {}",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed,
            detail.lines().next().unwrap_or_default()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn winosg(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_winosg"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "winosg {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

// ---- 1

fn metric_exactness() -> String {
    // quad, then hand-read (text, image, group)
    let rows: [([f64; 4], [bool; 3]); 8] = [
        ([0.9, 0.1, 0.2, 0.8], [true, true, true]),
        ([0.5, 0.5, 0.4, 0.6], [true, false, false]),
        ([0.3, 0.1, 0.6, 0.2], [false, false, false]),
        ([0.6, 0.2, 0.7, 0.9], [false, true, false]),
        ([0.2, 0.8, 0.9, 0.1], [false, false, false]),
        ([1.0, 1.0, 1.0, 1.0], [false, false, false]),
        ([0.8, 0.3, 0.1, 0.4], [true, true, true]),
        ([0.4, 0.35, 0.3, 0.5], [true, true, true]),
    ];
    let mut jsonl = String::new();
    for (i, (q, want)) in rows.iter().enumerate() {
        let got = example_metrics(&ScoreQuad::from(*q));
        assert_eq!([got.text, got.image, got.group], *want, "record {i}");
        jsonl.push_str(&format!(
            "{{\"id\":\"m{i}\",\"caption_0\":\"a{i}\",\"caption_1\":\"b{i}\",\"quads\":{{\"s\":[{},{},{},{}]}}}}\n",
            q[0], q[1], q[2], q[3]
        ));
    }
    let sums = rows.iter().fold([0usize; 3], |mut acc, (_, w)| {
        for k in 0..3 {
            acc[k] += usize::from(w[k]);
        }
        acc
    });
    assert_eq!(sums, [4, 4, 3]);
    let records = read_examples(&jsonl).unwrap();
    let r = aggregate(&records, "s").unwrap();
    assert_eq!((r.text, r.image, r.group), (4.0 / 8.0, 4.0 / 8.0, 3.0 / 8.0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    std::fs::write(&path, &jsonl).unwrap();
    let table = winosg(&["eval", "--examples", path.to_str().unwrap()]);
    assert_eq!(table, "Strategy\tTxt\tImg\tGrp\ns\t0.500\t0.500\t0.375\n");
    "text 4/8, image 4/8, group 3/8".into()
}

// ---- 2

fn random_baselines() -> String {
    let exact = enumerated_baseline();
    assert_eq!(exact.text, 0.25);
    assert_eq!(exact.image, 0.25);
    assert_eq!(exact.group, 1.0 / 6.0);
    let b = random_baseline(1_000_000, 2024).unwrap();
    let mc = &b.monte_carlo;
    for (name, got, want) in [("text", mc.text, 0.25), ("image", mc.image, 0.25), ("group", mc.group, 1.0 / 6.0)] {
        assert!((got - want).abs() <= 0.005, "{name}: {got} vs {want}");
    }
    let (x, y) = (random_baseline(10_000, 7).unwrap(), random_baseline(10_000, 7).unwrap());
    assert_eq!(x.monte_carlo, y.monte_carlo);
    format!(
        "exact 0.250/0.250/{:.4}; 1e6 trials {:.4}/{:.4}/{:.4}",
        exact.group, mc.text, mc.image, mc.group
    )
}

// ---- 3

fn brute_force(m: &CostMatrix, objective: Objective) -> f64 {
    fn go(m: &CostMatrix, row: usize, used: &mut Vec<bool>, pairs: &mut Vec<(usize, usize)>, best: &mut Option<f64>, objective: Objective) {
        let target = m.rows().min(m.cols());
        if pairs.len() == target {
            let mut sorted = pairs.clone();
            sorted.sort_unstable();
            let total = m.total(&sorted);
            let better = match (*best, objective) {
                (None, _) => true,
                (Some(b), Objective::Maximize) => total > b,
                (Some(b), Objective::Minimize) => total < b,
            };
            if better {
                *best = Some(total);
            }
            return;
        }
        if row == m.rows() {
            return;
        }
        // rows beyond what the columns can absorb may sit out
        if m.rows() - row > target - pairs.len() {
            go(m, row + 1, used, pairs, best, objective);
        }
        for c in 0..m.cols() {
            if !used[c] {
                used[c] = true;
                pairs.push((row, c));
                go(m, row + 1, used, pairs, best, objective);
                pairs.pop();
                used[c] = false;
            }
        }
    }
    let mut best = None;
    go(m, 0, &mut vec![false; m.cols()], &mut Vec::new(), &mut best, objective);
    best.unwrap()
}

fn hungarian_oracle() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for i in 0..1000 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=6);
        let entries: Vec<f64> = (0..rows * cols)
            .map(|_| {
                if i % 2 == 0 {
                    rng.random_range(-10.0..10.0)
                } else {
                    // small integers force plenty of ties
                    f64::from(rng.random_range(-3i32..=3))
                }
            })
            .collect();
        let m = CostMatrix::new(rows, cols, entries).unwrap();
        for objective in [Objective::Maximize, Objective::Minimize] {
            let pairs = solve_assignment(&m, objective);
            assert_eq!(pairs.len(), rows.min(cols));
            let rs: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
            let cs: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
            assert_eq!((rs.len(), cs.len()), (pairs.len(), pairs.len()));
            let want = brute_force(&m, objective);
            assert_eq!(m.total(&pairs), want, "matrix {i} {rows}x{cols} {objective}");
            checked += 1;
        }
    }
    format!("{checked} solves equal brute force")
}

// ---- 4, 5, 6

const VOCAB: usize = 24;

fn random_store(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingStore {
    let entries = (0..VOCAB).map(|i| {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        (format!("w{i}"), v)
    });
    EmbeddingStore::from_vectors(dim, OovPolicy::Strict, entries).unwrap()
}

fn random_phrase(rng: &mut ChaCha8Rng) -> String {
    let head = format!("w{}", rng.random_range(0..VOCAB));
    if rng.random_bool(0.3) {
        format!("w{} {head}", rng.random_range(0..VOCAB))
    } else {
        head
    }
}

fn random_triple(rng: &mut ChaCha8Rng, with_object: bool) -> Triple {
    let object = with_object.then(|| EntityMention::from_phrase(&random_phrase(rng)));
    Triple::new(EntityMention::from_phrase(&random_phrase(rng)), "rel", object, Rule::R1)
}

fn random_graph(rng: &mut ChaCha8Rng, max: usize) -> SceneGraph {
    let n = rng.random_range(0..=max);
    SceneGraph {
        caption: "random".into(),
        triples: (0..n)
            .map(|_| {
                let with_object = rng.random_bool(0.85);
                random_triple(rng, with_object)
            })
            .collect(),
    }
}

fn swapped(t: &Triple) -> Triple {
    Triple::new(t.object.clone().unwrap(), t.relation.clone(), Some(t.subject.clone()), t.rule)
}

fn asymmetry_properties() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let store = random_store(&mut rng, 16);
    let unit = AsymConfig::default();
    let mut worst = 0.0f64;
    let mut largest = 0.0f64;
    for _ in 0..10_000 {
        let a = random_triple(&mut rng, true);
        let b = random_triple(&mut rng, true);
        let weighted = AsymConfig {
            alpha: rng.random_range(0.0..2.0),
            gamma: rng.random_range(0.0..2.0),
            ..AsymConfig::default()
        };
        for cfg in [unit, weighted] {
            let ab = pairwise_asymmetry(&cfg, &store, &a, &b).unwrap();
            let swap = pairwise_asymmetry(&cfg, &store, &a, &swapped(&b)).unwrap();
            worst = worst.max((swap + ab).abs());
        }
        largest = largest.max(pairwise_asymmetry(&unit, &store, &a, &b).unwrap().abs());
    }
    assert!(worst <= 1e-9, "antisymmetry error {worst}");
    assert!(largest <= 4.0, "|A| = {largest}");

    let ortho = EmbeddingStore::from_vectors(2, OovPolicy::Strict, [("dog", vec![1.0, 0.0]), ("cat", vec![0.0, 1.0])]).unwrap();
    let t = |s: &str, o: &str| Triple::new(EntityMention::from_phrase(s), "chase", Some(EntityMention::from_phrase(o)), Rule::R1);
    assert_eq!(pairwise_asymmetry(&unit, &ortho, &t("dog", "cat"), &t("dog", "cat")).unwrap(), 2.0);
    assert_eq!(pairwise_asymmetry(&unit, &ortho, &t("dog", "cat"), &t("cat", "dog")).unwrap(), -2.0);
    format!("max antisymmetry error {worst:.1e}, max |A| {largest:.3}, orthogonal A = 2.0")
}

fn degradation() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let store = random_store(&mut rng, 8);
    let empty = SceneGraph::empty("nothing here");
    let ctx = AsymContext { config: AsymConfig::default(), store: &store };
    let cfg = AugmentConfig::default();
    let mut n = 0;
    for _ in 0..1000 {
        let g = random_graph(&mut rng, 5);
        let q = ScoreQuad::new(rng.random(), rng.random(), rng.random(), rng.random());
        assert_eq!(delta_sg(&ctx.config, &store, &g, &empty).unwrap(), 0.0);
        assert_eq!(delta_sg(&ctx.config, &store, &empty, &g).unwrap(), 0.0);
        assert_eq!(augment_quad(&q, &g, &empty, &cfg, &ctx).unwrap(), q);
        assert_eq!(augment_quad(&q, &empty, &g, &cfg, &ctx).unwrap(), q);
        n += 1;
    }
    let objectless = SceneGraph {
        caption: "a dog sleeps".into(),
        triples: vec![random_triple(&mut rng, false)],
    };
    let g = SceneGraph { caption: "x".into(), triples: vec![random_triple(&mut rng, true)] };
    assert_eq!(delta_sg(&ctx.config, &store, &objectless, &g).unwrap(), 0.0);
    format!("{n} random graphs against an empty graph give 0.0 and identity quads")
}

fn image_invariance() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let store = random_store(&mut rng, 12);
    let mut changed_text = 0;
    for _ in 0..10_000 {
        let q = ScoreQuad::new(rng.random(), rng.random(), rng.random(), rng.random());
        let g0 = random_graph(&mut rng, 4);
        let g1 = random_graph(&mut rng, 4);
        let ctx = AsymContext {
            config: AsymConfig {
                alpha: rng.random_range(0.0..2.0),
                gamma: rng.random_range(0.0..2.0),
                objective: if rng.random_bool(0.5) { Objective::Maximize } else { Objective::Minimize },
                ..AsymConfig::default()
            },
            store: &store,
        };
        let cfg = AugmentConfig { lambda: rng.random_range(0.0..1.0) };
        let aug = augment_quad(&q, &g0, &g1, &cfg, &ctx).unwrap();
        let (before, after) = (example_metrics(&q), example_metrics(&aug));
        assert_eq!(before.image, after.image, "{q:?} -> {aug:?}");
        changed_text += usize::from(before.text != after.text);
    }
    format!("10000/10000 image indicators unchanged ({changed_text} text indicators moved)")
}

// ---- 7

fn golden_corpus() -> String {
    let trees = parse_conllu_str(&std::fs::read_to_string(golden_path("golden.conllu")).unwrap()).unwrap();
    let mut want: HashMap<String, BTreeSet<String>> = HashMap::new();
    for line in std::fs::read_to_string(golden_path("golden_expected.tsv")).unwrap().lines() {
        if let Some((id, t)) = line.split_once('\t') {
            want.entry(id.to_string()).or_default().insert(t.to_string());
        }
    }
    assert!(trees.len() >= 15);
    let mut per_rule: HashMap<Rule, usize> = HashMap::new();
    for tree in &trees {
        let g = parse_scene_graph(tree);
        let got: BTreeSet<String> = g.triples.iter().map(|t| format!("{} {t}", t.rule)).collect();
        let id = tree.sent_id().unwrap();
        assert_eq!(got, want[id], "{id}: {}", tree.caption);
        for r in g.triples.iter().map(|t| t.rule).collect::<BTreeSet<_>>() {
            *per_rule.entry(r).or_default() += 1;
        }
    }
    for r in [Rule::R1, Rule::R2, Rule::R3, Rule::R4, Rule::R5] {
        assert!(per_rule.get(&r).copied().unwrap_or(0) >= 3, "{r} covered {:?} times", per_rule.get(&r));
    }
    assert!(want["golden-01"].contains("R1 <dog, chase, cat>"));
    assert!(want["golden-02"].contains("R1 <cat, chase, dog>"));
    format!("{} sentences exact; rule coverage {:?}", trees.len(), {
        let mut v: Vec<_> = per_rule.into_iter().map(|(r, n)| format!("{r}:{n}")).collect();
        v.sort();
        v.join(" ")
    })
}

// ---- 8

fn fixture_trees() -> Vec<DepTree> {
    let mut trees = parse_conllu_str(&std::fs::read_to_string(golden_path("golden.conllu")).unwrap()).unwrap();
    trees.extend(parse_conllu_str(&std::fs::read_to_string(fixture("sidecar.conllu")).unwrap()).unwrap());
    trees
}

fn ablation_properties() -> String {
    let opts = TransformOptions::default();
    let words = |s: &str| {
        let mut w: Vec<String> = s.split_whitespace().map(str::to_lowercase).collect();
        w.sort();
        w
    };
    let (mut swaps, mut total) = (0, 0);
    for tree in fixture_trees() {
        total += 1;
        let c = tree.caption.as_str();
        let spans = find_spans(&tree, SpanOptions::default()).unwrap();
        let s = transform(c, &spans, AblationKind::MaskSubjects, &opts).unwrap();
        let so = transform(&s.text, &s.spans, AblationKind::MaskObjects, &opts).unwrap();
        let both = transform(c, &spans, AblationKind::MaskBoth, &opts).unwrap();
        assert_eq!(both.text, so.text, "{c}");
        let swap = transform(c, &spans, AblationKind::Swap, &opts).unwrap();
        if swap.skipped {
            assert_eq!(swap.text, c);
            continue;
        }
        swaps += 1;
        assert_eq!(transform(&swap.text, &swap.spans, AblationKind::Swap, &opts).unwrap().text, c, "{c}");
        assert_eq!(words(&swap.text), words(c), "{c}");
    }
    let trees = fixture_trees();
    let pick = |id: &str| trees.iter().find(|t| t.sent_id() == Some(id)).unwrap();
    let (first, second) = (pick("golden-01"), pick("golden-02"));
    let spans = find_spans(first, SpanOptions::default()).unwrap();
    let out = transform(&first.caption, &spans, AblationKind::Swap, &opts).unwrap();
    assert_eq!(out.text.to_lowercase(), second.caption.to_lowercase());
    format!("{swaps} of {total} captions swappable; pair caption swaps to {:?}", out.text)
}

// ---- 9

fn multiturn() -> String {
    let tp = PromptTemplates::default();
    let trees = fixture_trees();
    let tree = trees.iter().find(|t| t.sent_id() == Some("golden-09")).unwrap();
    let graph = parse_scene_graph(tree);
    assert_eq!(graph.len(), 3);
    let caption = tree.caption.as_str();

    let turn1 = build_turn1_prompt(caption, &graph, &tp).unwrap();
    let keep_all = ScriptedModel {
        default_logits: Some((0.0, 0.0)),
        ..ScriptedModel::default()
    }
    .with_completion(&turn1, "1, 2, 3");
    let trace = run_multiturn(&keep_all, caption, &graph, &tp).unwrap();
    let flat_block = extract_triple_block(&build_flat_prompt(caption, &graph, &tp)).unwrap();
    let turn2_block = extract_triple_block(trace.scored_prompt()).unwrap();
    assert_eq!(turn2_block, flat_block);
    assert!(!trace.turn1.as_ref().unwrap().fallback_used);
    assert_eq!(trace.score, 0.5);

    let babble = ScriptedModel {
        default_completion: Some("I am not sure what is visible here.".into()),
        default_logits: Some((0.0, 0.0)),
        ..ScriptedModel::default()
    };
    let trace = run_multiturn(&babble, caption, &graph, &tp).unwrap();
    let t1 = trace.turn1.as_ref().unwrap();
    assert!(t1.fallback_used);
    assert_eq!(t1.kept_indices, vec![1, 2, 3]);
    assert_eq!(extract_triple_block(trace.scored_prompt()).unwrap(), flat_block);
    assert_eq!(trace.score, 0.5);
    format!("keep-all block identical ({} lines), fallback keeps all, score {:.3}", flat_block.lines().count(), trace.score)
}

// ---- 10

fn end_to_end() -> String {
    let dir = tempfile::tempdir().unwrap();
    let (ex, conllu, emb) = (fixture("examples.jsonl"), fixture("sidecar.conllu"), fixture("embeddings.tsv"));
    let graphs_path = dir.path().join("graphs.jsonl");
    let scored_path = dir.path().join("scored.jsonl");
    let s = |p: &Path| p.to_str().unwrap().to_string();

    winosg(&["parse", "--conllu", &s(&conllu), "-o", &s(&graphs_path)]);
    let graphs = winosg::sgparse::read_scene_graphs(&std::fs::read_to_string(&graphs_path).unwrap()).unwrap();
    assert_eq!(graphs.len(), 8);
    assert_eq!(graphs[0].triples[0].to_string(), "<dog, chase, cat>");
    assert_eq!(graphs[1].triples[0].to_string(), "<cat, chase, bird>");

    winosg(&[
        "score", "--examples", &s(&ex), "--conllu", &s(&conllu), "--embeddings", &s(&emb),
        "--alpha", "1", "--gamma", "0.5", "-o", &s(&scored_path),
    ]);
    let records: Vec<ExampleRecord> = read_examples(&std::fs::read_to_string(&scored_path).unwrap()).unwrap();

    // r1 by hand with orthogonal dog/cat/bird:
    //   A(g0, g1) = 1*(0 - 0) + 0.5*(0 - 1) = -0.5,  A(g1, g0) = 1*(0 - 1) + 0.5*(0 - 0) = -1
    let (p0, p1) = (0.3 * -0.5, -0.3);
    let want = ScoreQuad::new(0.5 + p0, 0.3 + p0, 0.55 + p1, 0.6 + p1);
    assert_eq!(records[0].quads["base+SG"], want);
    // r2 has swapped roles, so both priors are equal: 0.3 * (-1 - 0.5)
    let p = 0.3 * -1.5;
    assert_eq!(records[1].quads["base+SG"], ScoreQuad::new(0.4 + p, 0.5 + p, 0.45 + p, 0.42 + p));
    // r3 has no triples, r4 has an empty side
    for r in &records[2..] {
        assert_eq!(r.quads["base+SG"], r.quads["base"]);
    }

    let table = winosg(&["eval", "--examples", &s(&scored_path), "--strategy", "base,base+SG"]);
    assert_eq!(
        table,
        "Strategy\tTxt\tImg\tGrp\nbase\t0.250\t0.500\t0.250\nbase+SG\t0.500\t0.500\t0.500\n"
    );
    let (base, sg) = (aggregate(&records, "base").unwrap(), aggregate(&records, "base+SG").unwrap());
    assert_eq!((sg.text - base.text, sg.image - base.image, sg.group - base.group), (0.25, 0.0, 0.25));
    "+SG deltas text +0.250, image +0.000, group +0.250 as computed by hand".into()
}
