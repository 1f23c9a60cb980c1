//! Winoground text, image and group scores.
//!
//! Scores follow `s_ij = score(caption i, image j)`. An example passes *text*
//! when each image prefers its own caption (`s00 > s10` and `s11 > s01`),
//! *image* when each caption prefers its own image (`s00 > s01` and
//! `s11 > s10`), and *group* when both hold. Ties fail.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores of both captions against both images, serialized as
/// `[s00, s01, s10, s11]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct ScoreQuad {
    pub s00: f64,
    pub s01: f64,
    pub s10: f64,
    pub s11: f64,
}

impl ScoreQuad {
    pub fn new(s00: f64, s01: f64, s10: f64, s11: f64) -> Self {
        ScoreQuad { s00, s01, s10, s11 }
    }

    pub fn is_finite(&self) -> bool {
        [self.s00, self.s01, self.s10, self.s11].iter().all(|x| x.is_finite())
    }

    /// Applies `f` to every score.
    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        ScoreQuad::new(f(self.s00), f(self.s01), f(self.s10), f(self.s11))
    }
}

impl From<[f64; 4]> for ScoreQuad {
    fn from([s00, s01, s10, s11]: [f64; 4]) -> Self {
        ScoreQuad { s00, s01, s10, s11 }
    }
}

impl From<ScoreQuad> for [f64; 4] {
    fn from(q: ScoreQuad) -> Self {
        [q.s00, q.s01, q.s10, q.s11]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Indicators {
    pub text: bool,
    pub image: bool,
    pub group: bool,
}

pub fn example_metrics(q: &ScoreQuad) -> Indicators {
    let text = q.s00 > q.s10 && q.s11 > q.s01;
    let image = q.s00 > q.s01 && q.s11 > q.s10;
    Indicators {
        text,
        image,
        group: text && image,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub caption_0: String,
    pub caption_1: String,
    #[serde(default)]
    pub tag: String,
    #[serde(default)]
    pub quads: BTreeMap<String, ScoreQuad>,
}

impl ExampleRecord {
    pub fn caption(&self, index: usize) -> &str {
        if index == 0 {
            &self.caption_0
        } else {
            &self.caption_1
        }
    }

    pub fn quad(&self, strategy: &str) -> Result<&ScoreQuad> {
        self.quads.get(strategy).ok_or_else(|| Error::Data {
            id: self.id.clone(),
            message: format!("no scores for strategy {strategy:?}"),
        })
    }
}

/// Checks dataset-level invariants: unique ids, distinct captions, finite scores.
pub fn validate_records(records: &[ExampleRecord]) -> Result<()> {
    let mut ids = HashSet::new();
    for r in records {
        let fail = |message: String| Error::Data {
            id: r.id.clone(),
            message,
        };
        if !ids.insert(r.id.as_str()) {
            return Err(fail("duplicate id".into()));
        }
        if r.caption_0 == r.caption_1 {
            return Err(fail("caption_0 and caption_1 are identical".into()));
        }
        if let Some((name, _)) = r.quads.iter().find(|(_, q)| !q.is_finite()) {
            return Err(fail(format!("non-finite score in strategy {name:?}")));
        }
    }
    Ok(())
}

/// Reads an examples JSON-lines file and validates it.
pub fn read_examples(input: &str) -> Result<Vec<ExampleRecord>> {
    let records = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<ExampleRecord>(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    validate_records(&records)?;
    Ok(records)
}

/// Strategy names present in every record, sorted.
pub fn common_strategies(records: &[ExampleRecord]) -> Vec<String> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    first
        .quads
        .keys()
        .filter(|k| records.iter().all(|r| r.quads.contains_key(*k)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TagReport {
    pub n: usize,
    pub text: f64,
    pub image: f64,
    pub group: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MetricReport {
    pub n: usize,
    pub text: f64,
    pub image: f64,
    pub group: f64,
    pub per_tag: BTreeMap<String, TagReport>,
}

#[derive(Default)]
struct Counts {
    n: usize,
    text: usize,
    image: usize,
    group: usize,
}

impl Counts {
    fn add(&mut self, ind: Indicators) {
        self.n += 1;
        self.text += ind.text as usize;
        self.image += ind.image as usize;
        self.group += ind.group as usize;
    }

    fn fractions(&self) -> TagReport {
        let frac = |k: usize| if self.n == 0 { 0.0 } else { k as f64 / self.n as f64 };
        TagReport {
            n: self.n,
            text: frac(self.text),
            image: frac(self.image),
            group: frac(self.group),
        }
    }
}

fn report_from_indicators<'a>(items: impl IntoIterator<Item = (&'a str, Indicators)>) -> MetricReport {
    let mut overall = Counts::default();
    let mut tags: BTreeMap<String, Counts> = BTreeMap::new();
    for (tag, ind) in items {
        overall.add(ind);
        tags.entry(tag.to_string()).or_default().add(ind);
    }
    let o = overall.fractions();
    MetricReport {
        n: o.n,
        text: o.text,
        image: o.image,
        group: o.group,
        per_tag: tags.into_iter().map(|(k, c)| (k, c.fractions())).collect(),
    }
}

/// Corpus and per-tag fractions for one strategy.
pub fn aggregate(records: &[ExampleRecord], strategy: &str) -> Result<MetricReport> {
    let indicators = records
        .iter()
        .map(|r| Ok((r.tag.as_str(), example_metrics(r.quad(strategy)?))))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from_indicators(indicators))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    /// Exact chance rates from all 24 orderings of four distinct scores.
    pub exact: MetricReport,
    /// Rates over `trials` quads of i.i.d. uniform scores.
    pub monte_carlo: MetricReport,
    pub trials: usize,
    pub seed: u64,
}

/// Enumerates every strict ordering of the four scores.
pub fn enumerated_baseline() -> MetricReport {
    let mut indicators = Vec::with_capacity(24);
    for_each_permutation(&mut [0.0, 1.0, 2.0, 3.0], 0, &mut |p| {
        indicators.push(("", example_metrics(&ScoreQuad::new(p[0], p[1], p[2], p[3]))));
    });
    let mut report = report_from_indicators(indicators);
    report.per_tag.clear();
    report
}

fn for_each_permutation(xs: &mut [f64; 4], k: usize, f: &mut impl FnMut(&[f64; 4])) {
    if k == xs.len() {
        f(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        for_each_permutation(xs, k + 1, f);
        xs.swap(k, i);
    }
}

pub fn random_baseline(trials: usize, seed: u64) -> Result<BaselineReport> {
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Counts::default();
    for _ in 0..trials {
        let q = ScoreQuad::new(rng.random(), rng.random(), rng.random(), rng.random());
        counts.add(example_metrics(&q));
    }
    let mc = counts.fractions();
    Ok(BaselineReport {
        exact: enumerated_baseline(),
        monte_carlo: MetricReport {
            n: mc.n,
            text: mc.text,
            image: mc.image,
            group: mc.group,
            per_tag: BTreeMap::new(),
        },
        trials,
        seed,
    })
}

/// Tab-separated table with one row per strategy, optionally followed by a
/// per-tag section.
pub fn render_table(reports: &[(String, MetricReport)], per_tag: bool) -> String {
    let mut out = String::from("Strategy\tTxt\tImg\tGrp\n");
    for (name, r) in reports {
        let _ = writeln!(out, "{name}\t{:.3}\t{:.3}\t{:.3}", r.text, r.image, r.group);
    }
    if per_tag {
        out.push_str("\nStrategy\tTag\tN\tTxt\tImg\tGrp\n");
        for (name, r) in reports {
            for (tag, t) in &r.per_tag {
                let _ = writeln!(
                    out,
                    "{name}\t{tag}\t{}\t{:.3}\t{:.3}\t{:.3}",
                    t.n, t.text, t.image, t.group
                );
            }
        }
    }
    out
}

pub fn render_baseline(b: &BaselineReport) -> String {
    let mut out = String::from("Source\tTrials\tTxt\tImg\tGrp\n");
    let _ = writeln!(
        out,
        "enumerated\t24\t{:.3}\t{:.3}\t{:.4}",
        b.exact.text, b.exact.image, b.exact.group
    );
    let _ = writeln!(
        out,
        "monte-carlo(seed={})\t{}\t{:.3}\t{:.3}\t{:.4}",
        b.seed, b.trials, b.monte_carlo.text, b.monte_carlo.image, b.monte_carlo.group
    );
    out
}
