//! Caption ablations: mask subjects, objects or both, or swap them.
//!
//! Spans are character ranges read off the dependency tree. A subject span
//! covers an `nsubj`/`nsubjpass` head with its `det`, `amod` and `compound`
//! dependents; object spans do the same for `dobj` heads, and for
//! prepositional objects in clauses that have no direct object.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conllu::{DepTree, Token};
use crate::error::{Error, Result};

const SPAN_RELS: &[&str] = &["det", "amod", "compound"];
pub const DEFAULT_MASK_TOKEN: &str = "something";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Subject,
    Object,
}

/// Character range `[start, end)` in a caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub role: Role,
    /// Head is a proper noun; case normalization leaves it alone.
    pub proper: bool,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SemanticSpans {
    pub subject_spans: Vec<Span>,
    pub object_spans: Vec<Span>,
    /// False when spans overlap, in which case SWAP is skipped.
    pub swap_usable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationKind {
    MaskSubjects,
    MaskObjects,
    MaskBoth,
    Swap,
}

impl AblationKind {
    pub const ALL: [AblationKind; 4] = [
        AblationKind::MaskSubjects,
        AblationKind::MaskObjects,
        AblationKind::MaskBoth,
        AblationKind::Swap,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AblationKind::MaskSubjects => "mask-subjects",
            AblationKind::MaskObjects => "mask-objects",
            AblationKind::MaskBoth => "mask-both",
            AblationKind::Swap => "swap",
        }
    }
}

impl fmt::Display for AblationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown ablation kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanOptions {
    /// Count prepositional objects as objects when the clause has no direct object.
    pub pobj_objects: bool,
}

impl Default for SpanOptions {
    fn default() -> Self {
        SpanOptions { pobj_objects: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformOptions {
    pub mask_token: String,
    /// On SWAP, re-capitalize the sentence-initial span and lowercase a
    /// common-noun span moved away from the start.
    pub normalize_case: bool,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            normalize_case: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformed {
    pub text: String,
    /// Nothing to transform; `text` is the input caption.
    pub skipped: bool,
    /// Input spans moved to their positions in `text`. Span slots keep their
    /// role, so after a SWAP the subject slot holds the former object text.
    pub spans: SemanticSpans,
}

pub fn find_spans(tree: &DepTree, opts: SpanOptions) -> Result<SemanticSpans> {
    let mut subjects = Vec::new();
    let mut objects = Vec::new();
    for t in &tree.tokens {
        if !t.is_nominal() || is_relative_pronoun(t) {
            continue;
        }
        match t.rel() {
            "nsubj" | "nsubjpass" => subjects.push(span_for(tree, t, Role::Subject)?),
            "dobj" => objects.push(span_for(tree, t, Role::Object)?),
            "pobj" if opts.pobj_objects && !clause_has_direct_object(tree, t) => {
                objects.push(span_for(tree, t, Role::Object)?)
            }
            "nmod" | "obl"
                if opts.pobj_objects
                    && tree.deps_of(t.index, &["case"]).next().is_some()
                    && !clause_has_direct_object(tree, t) =>
            {
                objects.push(span_for(tree, t, Role::Object)?)
            }
            _ => {}
        }
    }
    let (subject_spans, subj_ok) = tidy(subjects);
    let (object_spans, obj_ok) = tidy(objects);
    let cross = subject_spans
        .iter()
        .any(|s| object_spans.iter().any(|o| s.overlaps(o)));
    Ok(SemanticSpans {
        subject_spans,
        object_spans,
        swap_usable: subj_ok && obj_ok && !cross,
    })
}

fn is_relative_pronoun(t: &Token) -> bool {
    t.upos == "PRON" && matches!(t.lemma_lc().as_str(), "who" | "whom" | "which" | "that")
}

/// Walks up to the governing verb (or the root) and checks for a `dobj`.
fn clause_has_direct_object(tree: &DepTree, t: &Token) -> bool {
    let mut cur = tree.head_of(t);
    while let Some(h) = cur {
        if h.is_verbal() || h.head == 0 {
            return tree.deps_of(h.index, &["dobj"]).next().is_some();
        }
        cur = tree.head_of(h);
    }
    false
}

fn span_for(tree: &DepTree, head: &Token, role: Role) -> Result<Span> {
    let mut members = vec![head.index];
    members.extend(tree.deps_of(head.index, SPAN_RELS).map(|t| t.index));
    let (mut lo, mut hi) = (head.index, head.index);
    while lo > 1 && members.contains(&(lo - 1)) {
        lo -= 1;
    }
    while members.contains(&(hi + 1)) {
        hi += 1;
    }
    let first = tree.token(lo).expect("index in range");
    let last = tree.token(hi).expect("index in range");
    match (first.char_start, last.char_end) {
        (Some(start), Some(end)) => Ok(Span {
            start,
            end,
            role,
            proper: head.upos == "PROPN",
        }),
        _ => Err(Error::Argument(format!(
            "token offsets unavailable in {:?}; add a `# text = ...` comment to the CoNLL-U block",
            tree.caption
        ))),
    }
}

/// Sorts, removes duplicates and reports whether any overlap remained.
fn tidy(mut spans: Vec<Span>) -> (Vec<Span>, bool) {
    spans.sort_by_key(|s| (s.start, s.end));
    spans.dedup_by_key(|s| (s.start, s.end));
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    let mut clean = true;
    for s in spans {
        if out.last().is_some_and(|p| p.overlaps(&s)) {
            clean = false;
            continue;
        }
        out.push(s);
    }
    (out, clean)
}

struct Edit {
    start: usize,
    end: usize,
    text: String,
}

pub fn transform(caption: &str, spans: &SemanticSpans, kind: AblationKind, opts: &TransformOptions) -> Result<Transformed> {
    let chars: Vec<char> = caption.chars().collect();
    let all = spans.subject_spans.iter().chain(&spans.object_spans);
    if let Some(bad) = all.clone().find(|s| s.end > chars.len() || s.start > s.end) {
        return Err(Error::Argument(format!(
            "span {}..{} outside caption of {} characters",
            bad.start,
            bad.end,
            chars.len()
        )));
    }
    let slice = |s: &Span| chars[s.start..s.end].iter().collect::<String>();
    let mask = |s: &Span| Edit {
        start: s.start,
        end: s.end,
        text: opts.mask_token.clone(),
    };

    let edits: Vec<Edit> = match kind {
        AblationKind::MaskSubjects => spans.subject_spans.iter().map(mask).collect(),
        AblationKind::MaskObjects => spans.object_spans.iter().map(mask).collect(),
        AblationKind::MaskBoth => merge(all.copied().collect())
            .iter()
            .map(mask)
            .collect(),
        AblationKind::Swap => {
            if !spans.swap_usable {
                Vec::new()
            } else {
                let mut edits = Vec::new();
                for (s, o) in spans.subject_spans.iter().zip(&spans.object_spans) {
                    let (s_text, o_text) = (slice(s), slice(o));
                    let (into_s, into_o) = if opts.normalize_case {
                        (recase(&o_text, o, s), recase(&s_text, s, o))
                    } else {
                        (o_text, s_text)
                    };
                    edits.push(Edit { start: s.start, end: s.end, text: into_s });
                    edits.push(Edit { start: o.start, end: o.end, text: into_o });
                }
                edits
            }
        }
    };
    if edits.is_empty() {
        return Ok(Transformed {
            text: caption.to_string(),
            skipped: true,
            spans: spans.clone(),
        });
    }
    Ok(apply_edits(&chars, edits, spans))
}

fn merge(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_by_key(|s| (s.start, s.end));
    let mut out: Vec<Span> = Vec::new();
    for s in spans {
        match out.last_mut() {
            Some(p) if s.start < p.end => p.end = p.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

/// Text moved from `from` into the slot `to`, with sentence-initial casing fixed.
fn recase(text: &str, from: &Span, to: &Span) -> String {
    let mut chars = text.chars();
    let Some(first) = chars.next() else {
        return String::new();
    };
    let first: String = if to.start == 0 {
        first.to_uppercase().collect()
    } else if from.start == 0 && !from.proper {
        first.to_lowercase().collect()
    } else {
        first.to_string()
    };
    first + chars.as_str()
}

fn apply_edits(chars: &[char], mut edits: Vec<Edit>, spans: &SemanticSpans) -> Transformed {
    edits.sort_by_key(|e| e.start);
    // right to left keeps earlier offsets valid
    let mut out: Vec<char> = chars.to_vec();
    for e in edits.iter().rev() {
        out.splice(e.start..e.end, e.text.chars());
    }
    let shift_before = |pos: usize| -> isize {
        edits
            .iter()
            .filter(|e| e.end <= pos)
            .map(|e| e.text.chars().count() as isize - (e.end - e.start) as isize)
            .sum()
    };
    let remap = |s: &Span| -> Span {
        let start = (s.start as isize + shift_before(s.start)) as usize;
        let end = match edits.iter().find(|e| e.start == s.start && e.end == s.end) {
            Some(e) => start + e.text.chars().count(),
            None => (s.end as isize + shift_before(s.end)) as usize,
        };
        Span { start, end, ..*s }
    };
    Transformed {
        text: out.into_iter().collect(),
        skipped: false,
        spans: SemanticSpans {
            subject_spans: spans.subject_spans.iter().map(remap).collect(),
            object_spans: spans.object_spans.iter().map(remap).collect(),
            swap_usable: spans.swap_usable,
        },
    }
}
