use std::process::ExitCode;

use anyhow::{anyhow, Context};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};
use winosg::ablate::{find_spans, transform, AblationKind, SpanOptions, TransformOptions};
use winosg::asym::AsymConfig;
use winosg::augment::{augment_quad, AsymContext, AugmentConfig};
use winosg::embed::load_embeddings_str;
use winosg::metrics::{aggregate, common_strategies, random_baseline, read_examples, render_baseline, render_table, ExampleRecord};
use winosg::promptkit::{build_flat_prompt, build_turn1_prompt, build_turn2_prompt, run_multiturn, MultiTurnTrace, PromptTemplates, ScriptedModel, TurnOneVariant};
use winosg::sgparse::SceneGraphParser;
use winosg::Triple;

use crate::io::{lines_to_string, read, require_files, write_output, Sidecar};
use crate::{AblateArgs, EvalArgs, Failure, ParseArgs, PromptArgs, ScoreArgs, SimulateArgs};

type CmdResult = Result<ExitCode, Failure>;

fn finite(flag: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Failure::usage(format!("--{flag} must be finite, got {v}")))
    }
}

fn load_records(path: &std::path::Path) -> anyhow::Result<Vec<ExampleRecord>> {
    read_examples(&read(path)?).with_context(|| path.display().to_string())
}

pub fn parse(a: ParseArgs) -> CmdResult {
    require_files([("conllu", a.conllu.as_path())])?;
    let sidecar = Sidecar::load(&a.conllu)?;
    let parser = SceneGraphParser::new();
    let lines: Vec<String> = sidecar
        .trees
        .par_iter()
        .map(|t| parser.parse(t).to_json_line())
        .collect();
    write_output(a.out.output.as_deref(), &lines_to_string(&lines))?;
    info!("parsed {} sentences", lines.len());
    Ok(ExitCode::SUCCESS)
}

pub fn score(a: ScoreArgs) -> CmdResult {
    require_files([
        ("examples", a.examples.as_path()),
        ("conllu", a.conllu.as_path()),
        ("embeddings", a.embeddings.as_path()),
    ])?;
    for (flag, v) in [("lambda", a.lambda), ("alpha", a.alpha), ("gamma", a.gamma)] {
        finite(flag, v)?;
    }
    let strategy = a.strategy.clone().unwrap_or_else(|| format!("{}+SG", a.base));
    let text = read(&a.examples)?;
    // checks ids, captions and scores before anything is written
    read_examples(&text).with_context(|| a.examples.display().to_string())?;
    let sidecar = Sidecar::load(&a.conllu)?;
    let store = load_embeddings_str(&read(&a.embeddings)?, a.oov.into())
        .with_context(|| a.embeddings.display().to_string())?;
    let ctx = AsymContext {
        config: AsymConfig {
            alpha: a.alpha,
            gamma: a.gamma,
            objective: a.objective.into(),
            ..AsymConfig::default()
        },
        store: &store,
    };
    let cfg = AugmentConfig { lambda: a.lambda };
    let parser = SceneGraphParser::new();

    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let results: Vec<(String, Option<String>)> = lines
        .par_iter()
        .map(|line| {
            let mut value: Value = serde_json::from_str(line).expect("validated above");
            let record: ExampleRecord = serde_json::from_value(value.clone()).expect("validated above");
            let scored = (|| -> anyhow::Result<Value> {
                let g0 = parser.parse(sidecar.lookup(&record.id, 0, &record.caption_0)?);
                let g1 = parser.parse(sidecar.lookup(&record.id, 1, &record.caption_1)?);
                let q = augment_quad(record.quad(&a.base)?, &g0, &g1, &cfg, &ctx)?;
                Ok(serde_json::to_value(q)?)
            })();
            match scored {
                Ok(q) => {
                    let obj = value.as_object_mut().expect("records are objects");
                    let quads = obj
                        .entry("quads")
                        .or_insert_with(|| Value::Object(Map::new()));
                    if let Some(quads) = quads.as_object_mut() {
                        quads.insert(strategy.clone(), q);
                    }
                    (serde_json::to_string(&value).expect("serializable"), None)
                }
                Err(e) => (line.to_string(), Some(format!("record {:?}: {e:#}", record.id))),
            }
        })
        .collect();

    let out: Vec<String> = results.iter().map(|(l, _)| l.clone()).collect();
    write_output(a.out.output.as_deref(), &lines_to_string(&out))?;
    let failures: Vec<&String> = results.iter().filter_map(|(_, e)| e.as_ref()).collect();
    if failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} of {} records were left without {strategy:?}:", failures.len(), results.len());
    for f in failures {
        eprintln!("  {f}");
    }
    Ok(ExitCode::from(2))
}

pub fn eval(a: EvalArgs) -> CmdResult {
    require_files([("examples", a.examples.as_path())])?;
    let records = load_records(&a.examples)?;
    let available = common_strategies(&records);
    let strategies = if a.strategy.is_empty() {
        available.clone()
    } else {
        a.strategy.clone()
    };
    if let Some(bad) = strategies.iter().find(|s| !available.contains(s)) {
        return Err(Failure::usage(format!(
            "unknown strategy {bad:?}; available: {}",
            if available.is_empty() { "(none)".to_string() } else { available.join(", ") }
        )));
    }
    let reports = strategies
        .iter()
        .map(|s| Ok((s.clone(), aggregate(&records, s)?)))
        .collect::<winosg::Result<Vec<_>>>()?;
    write_output(a.out.output.as_deref(), &render_table(&reports, a.per_tag))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AblationLine<'a> {
    id: &'a str,
    caption_index: usize,
    kind: AblationKind,
    caption: &'a str,
    text: String,
    skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

pub fn ablate(a: AblateArgs) -> CmdResult {
    require_files([("examples", a.examples.as_path()), ("conllu", a.conllu.as_path())])?;
    if a.mask_token.is_empty() {
        return Err(Failure::usage("--mask-token must not be empty"));
    }
    let records = load_records(&a.examples)?;
    let sidecar = Sidecar::load(&a.conllu)?;
    let kinds = if a.kinds.is_empty() { AblationKind::ALL.to_vec() } else { a.kinds.clone() };
    let span_opts = SpanOptions { pobj_objects: !a.no_pobj };
    let opts = TransformOptions {
        mask_token: a.mask_token.clone(),
        normalize_case: a.normalize_case,
    };

    let lines: Vec<String> = records
        .par_iter()
        .flat_map_iter(|r| {
            let mut out = Vec::new();
            for idx in 0..2 {
                let caption = r.caption(idx);
                let spans = sidecar
                    .lookup(&r.id, idx, caption)
                    .and_then(|t| Ok(find_spans(t, span_opts)?));
                for &kind in &kinds {
                    let line = match &spans {
                        Ok(spans) => match transform(caption, spans, kind, &opts) {
                            Ok(t) => AblationLine {
                                id: &r.id,
                                caption_index: idx,
                                kind,
                                caption,
                                skipped: t.skipped,
                                reason: t.skipped.then(|| "no spans to transform".to_string()),
                                text: t.text,
                            },
                            Err(e) => skipped_line(&r.id, idx, kind, caption, e.to_string()),
                        },
                        Err(e) => skipped_line(&r.id, idx, kind, caption, format!("{e:#}")),
                    };
                    out.push(serde_json::to_string(&line).expect("serializable"));
                }
            }
            out
        })
        .collect();
    write_output(a.out.output.as_deref(), &lines_to_string(&lines))?;
    Ok(ExitCode::SUCCESS)
}

fn skipped_line<'a>(id: &'a str, idx: usize, kind: AblationKind, caption: &'a str, reason: String) -> AblationLine<'a> {
    AblationLine {
        id,
        caption_index: idx,
        kind,
        caption,
        text: caption.to_string(),
        skipped: true,
        reason: Some(reason),
    }
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    if a.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let report = random_baseline(a.trials, a.seed)?;
    write_output(a.out.output.as_deref(), &render_baseline(&report))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PromptLine<'a> {
    id: String,
    caption_index: usize,
    caption: &'a str,
    flat: String,
    turn1: Option<String>,
    turn2_all: String,
}

#[derive(Serialize)]
struct TraceLine {
    id: String,
    caption_index: usize,
    score: f64,
    trace: MultiTurnTrace,
}

pub fn prompt(a: PromptArgs) -> CmdResult {
    require_files([("conllu", a.conllu.as_path())])?;
    if let Some(p) = &a.examples {
        require_files([("examples", p.as_path())])?;
    }
    if let Some(p) = &a.mock {
        require_files([("mock", p.as_path())])?;
    }
    let templates = match &a.templates {
        Some(dir) if !dir.is_dir() => {
            return Err(Failure::usage(format!("--templates: no such directory {}", dir.display())))
        }
        Some(dir) => PromptTemplates::load_dir(dir)?,
        None => PromptTemplates::default(),
    };
    let templates = templates.with_turn1_variant(if a.turn1_with_caption {
        TurnOneVariant::WithCaption
    } else {
        TurnOneVariant::TriplesOnly
    });
    let model = match &a.mock {
        Some(p) => Some(ScriptedModel::from_json(&read(p)?).with_context(|| p.display().to_string())?),
        None => None,
    };
    let sidecar = Sidecar::load(&a.conllu)?;

    // (id, caption index, tree)
    let items: Vec<(String, usize, &winosg::DepTree)> = match &a.examples {
        Some(path) => {
            let records = load_records(path)?;
            let mut items = Vec::with_capacity(records.len() * 2);
            for r in &records {
                for idx in 0..2 {
                    items.push((r.id.clone(), idx, sidecar.lookup(&r.id, idx, r.caption(idx))?));
                }
            }
            items
        }
        None => sidecar
            .trees
            .iter()
            .enumerate()
            .map(|(i, t)| (t.sent_id().map_or_else(|| (i + 1).to_string(), str::to_string), 0, t))
            .collect(),
    };

    let parser = SceneGraphParser::new();
    let lines: Vec<anyhow::Result<String>> = items
        .par_iter()
        .map(|(id, idx, tree)| {
            let graph = parser.parse(tree);
            let caption = tree.caption.as_str();
            let json = match &model {
                None => {
                    let all: Vec<&Triple> = graph.triples.iter().collect();
                    serde_json::to_string(&PromptLine {
                        id: id.clone(),
                        caption_index: *idx,
                        caption,
                        flat: build_flat_prompt(caption, &graph, &templates),
                        turn1: build_turn1_prompt(caption, &graph, &templates),
                        turn2_all: build_turn2_prompt(caption, &all, &templates),
                    })?
                }
                Some(m) => {
                    let trace = run_multiturn(m, caption, &graph, &templates)
                        .map_err(|e| anyhow!("{id} caption {idx}: {e}"))?;
                    serde_json::to_string(&TraceLine {
                        id: id.clone(),
                        caption_index: *idx,
                        score: trace.score,
                        trace,
                    })?
                }
            };
            Ok(json)
        })
        .collect();
    let lines = lines.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    write_output(a.out.output.as_deref(), &lines_to_string(&lines))?;
    Ok(ExitCode::SUCCESS)
}
