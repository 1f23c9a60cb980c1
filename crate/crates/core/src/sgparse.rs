//! Rule-based text scene-graph extraction.
//!
//! Five rule families read subject-relation-object triples off a dependency
//! tree:
//!
//! * `R1` subject-verb-object, including relative clauses, passives and
//!   negation,
//! * `R2` prepositional attachments (`prep`/`pobj`, or UD `case` + `nmod`/`obl`),
//! * `R3` existentials ("there is/are"),
//! * `R4` copular clauses,
//! * `R5` possessives, emitted as `has`.
//!
//! Entities are lemma phrases: `amod` and `compound` dependents of the head
//! noun followed by the head lemma. Negated relations carry a `"not "` prefix.
//! Verbs whose lemma is `be` are left to `R3`/`R4` and never produce `R1`
//! triples.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::conllu::{DepTree, Token};
use crate::error::{Error, Result};

const MODIFIER_RELS: &[&str] = &["amod", "compound"];
const RELATIVE_PRONOUNS: &[&str] = &["who", "whom", "which", "that"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub head_lemma: String,
    pub modifiers: Vec<String>,
    /// Head and modifier token indices, ascending. Empty for entities rebuilt
    /// from serialized graphs.
    pub token_indices: Vec<usize>,
    pub head_token: Option<usize>,
    pub phrase: String,
}

impl EntityMention {
    pub fn new(head_lemma: impl Into<String>, modifiers: Vec<String>) -> Self {
        let head_lemma = head_lemma.into().to_lowercase();
        let mut mods: Vec<String> = Vec::with_capacity(modifiers.len());
        for m in modifiers {
            let m = m.to_lowercase();
            if !m.is_empty() && m != head_lemma {
                mods.push(m);
            }
        }
        let phrase = mods
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(head_lemma.as_str()))
            .collect::<Vec<_>>()
            .join(" ");
        EntityMention {
            head_lemma,
            modifiers: mods,
            token_indices: Vec::new(),
            head_token: None,
            phrase,
        }
    }

    /// Rebuilds an entity from its phrase: the last word is the head.
    pub fn from_phrase(phrase: &str) -> Self {
        let words: Vec<&str> = phrase.split_whitespace().collect();
        match words.split_last() {
            Some((head, mods)) => Self::new(*head, mods.iter().map(|m| m.to_string()).collect()),
            None => Self::new("", Vec::new()),
        }
    }

    fn anchored(mut self, head: usize, mut indices: Vec<usize>) -> Self {
        indices.push(head);
        indices.sort_unstable();
        indices.dedup();
        self.token_indices = indices;
        self.head_token = Some(head);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub subject: EntityMention,
    pub relation: String,
    /// `None` for intransitive and existential triples.
    pub object: Option<EntityMention>,
    pub rule: Rule,
    subject_head: usize,
}

impl Triple {
    pub fn new(subject: EntityMention, relation: impl Into<String>, object: Option<EntityMention>, rule: Rule) -> Self {
        let subject_head = subject.head_token.unwrap_or(0);
        Triple {
            subject,
            relation: relation.into(),
            object,
            rule,
            subject_head,
        }
    }

    /// Index of the subject's head token in the source tree (0 if unknown).
    pub fn subject_token(&self) -> usize {
        self.subject_head
    }

    fn dedup_key(&self) -> (String, String, Option<String>) {
        (
            self.subject.phrase.to_lowercase(),
            self.relation.to_lowercase(),
            self.object.as_ref().map(|o| o.phrase.to_lowercase()),
        )
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.object {
            Some(o) => write!(f, "<{}, {}, {}>", self.subject.phrase, self.relation, o.phrase),
            None => write!(f, "<{}, {}, _>", self.subject.phrase, self.relation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SceneGraph {
    pub caption: String,
    pub triples: Vec<Triple>,
}

impl SceneGraph {
    pub fn empty(caption: impl Into<String>) -> Self {
        SceneGraph {
            caption: caption.into(),
            triples: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn to_record(&self) -> SceneGraphRecord {
        SceneGraphRecord {
            caption: self.caption.clone(),
            triples: self
                .triples
                .iter()
                .map(|t| TripleRecord {
                    subject: t.subject.phrase.clone(),
                    relation: t.relation.clone(),
                    object: t.object.as_ref().map(|o| o.phrase.clone()),
                    rule: t.rule,
                })
                .collect(),
        }
    }

    /// One JSON line in the scene-graph interchange format (no newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("scene graph records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let record: SceneGraphRecord = serde_json::from_str(line)?;
        Ok(record.into_graph())
    }
}

/// Serialized form of a [`SceneGraph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraphRecord {
    pub caption: String,
    pub triples: Vec<TripleRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub subject: String,
    pub relation: String,
    pub object: Option<String>,
    pub rule: Rule,
}

impl SceneGraphRecord {
    pub fn into_graph(self) -> SceneGraph {
        SceneGraph {
            caption: self.caption,
            triples: self
                .triples
                .into_iter()
                .map(|t| {
                    Triple::new(
                        EntityMention::from_phrase(&t.subject),
                        t.relation,
                        t.object.as_deref().map(EntityMention::from_phrase),
                        t.rule,
                    )
                })
                .collect(),
        }
    }
}

/// Builds the entity headed by `head_index`, or `None` when the token is not
/// nominal (the calling rule then skips).
pub fn extract_entity(tree: &DepTree, head_index: usize) -> Option<EntityMention> {
    let head = tree.token(head_index)?;
    if !head.is_nominal() {
        return None;
    }
    entity_from(tree, head)
}

fn entity_from(tree: &DepTree, head: &Token) -> Option<EntityMention> {
    let head_lemma = if head.upos == "PRON" {
        head.form.to_lowercase()
    } else {
        head.lemma_lc()
    };
    if head_lemma.trim().is_empty() {
        return None;
    }
    let mods: Vec<&Token> = tree.deps_of(head.index, MODIFIER_RELS).collect();
    let entity = EntityMention::new(head_lemma, mods.iter().map(|t| t.lemma_lc()).collect());
    Some(entity.anchored(head.index, mods.iter().map(|t| t.index).collect()))
}

/// Adjectival predicate as an entity whose head is the adjective lemma.
fn predicate_entity(tree: &DepTree, pred: &Token) -> Option<EntityMention> {
    if pred.is_nominal() {
        return entity_from(tree, pred);
    }
    if pred.upos == "ADJ" {
        return Some(EntityMention::new(pred.lemma_lc(), Vec::new()).anchored(pred.index, Vec::new()));
    }
    None
}

fn is_negated(tree: &DepTree, index: usize) -> bool {
    tree.tokens.iter().any(|t| {
        t.head == index
            && (t.rel() == "neg" || (t.upos == "PART" && matches!(t.lemma_lc().as_str(), "not" | "n't")))
    })
}

fn with_negation(tree: &DepTree, index: usize, relation: String) -> String {
    if is_negated(tree, index) {
        format!("not {relation}")
    } else {
        relation
    }
}

fn is_relative_pronoun(t: &Token) -> bool {
    matches!(t.upos.as_str(), "PRON" | "DET") && RELATIVE_PRONOUNS.contains(&t.lemma_lc().as_str())
}

/// Resolves a nominal argument; relative pronouns inside a relative clause
/// stand for the noun the clause modifies.
fn argument_entity(tree: &DepTree, verb: &Token, arg: &Token) -> Option<EntityMention> {
    if verb.rel() == "relcl" && is_relative_pronoun(arg) {
        let modified = tree.head_of(verb)?;
        return extract_entity(tree, modified.index);
    }
    extract_entity(tree, arg.index)
}

/// Noun governed by a preposition-like token: `pobj` (ClearNLP) under the
/// preposition, or, for `agent`, the UD layout where the arc lands on the noun.
fn prepositional_object<'a>(tree: &'a DepTree, p: &'a Token) -> Option<&'a Token> {
    if p.is_nominal() {
        return Some(p);
    }
    tree.deps_of(p.index, &["pobj"]).next()
}

/// Agentive and patient roles of a verb, following passives and relative clauses.
struct VerbFrame {
    subject: Option<EntityMention>,
    object: Option<EntityMention>,
}

fn verb_frame(tree: &DepTree, verb: &Token) -> VerbFrame {
    let first = |rels: &'static [&'static str]| tree.deps_of(verb.index, rels).find(|t| t.is_nominal() || is_relative_pronoun(t));
    let active_subject = first(&["nsubj"]).and_then(|s| argument_entity(tree, verb, s));
    let passive_subject = first(&["nsubjpass"]).and_then(|s| argument_entity(tree, verb, s));
    let direct_object = first(&["dobj"]).and_then(|o| argument_entity(tree, verb, o));

    if let Some(patient) = passive_subject {
        let agent = tree
            .deps_of(verb.index, &["agent"])
            .find_map(|a| prepositional_object(tree, a))
            .and_then(|n| extract_entity(tree, n.index));
        return VerbFrame {
            subject: agent,
            object: Some(patient),
        };
    }
    let subject = active_subject.or_else(|| {
        // relative clause without an overt subject pronoun: "the man holding a hat"
        if verb.rel() == "relcl" || verb.rel() == "acl" {
            tree.head_of(verb).and_then(|h| extract_entity(tree, h.index))
        } else {
            None
        }
    });
    VerbFrame {
        subject,
        object: direct_object,
    }
}

/// R1: subject-verb-object triples.
pub fn rule_svo(tree: &DepTree) -> Vec<Triple> {
    let mut out = Vec::new();
    for verb in tree.tokens.iter().filter(|t| t.upos == "VERB") {
        if verb.lemma_lc() == "be" {
            continue;
        }
        let frame = verb_frame(tree, verb);
        let Some(subject) = frame.subject else {
            continue;
        };
        let relation = with_negation(tree, verb.index, verb.lemma_lc());
        out.push(Triple::new(subject, relation, frame.object, Rule::R1));
    }
    out
}

/// Every (attachment head, preposition, prepositional noun) in the tree.
fn prepositional_attachments(tree: &DepTree) -> Vec<(&Token, &Token, &Token)> {
    let mut out = Vec::new();
    for t in &tree.tokens {
        match t.rel() {
            // ClearNLP: head -prep-> p -pobj-> n
            "prep" => {
                if let (Some(h), Some(n)) = (tree.head_of(t), tree.deps_of(t.index, &["pobj"]).next()) {
                    out.push((h, t, n));
                }
            }
            // UD: head -nmod/obl-> n -case-> p
            "nmod" | "obl" => {
                if let (Some(h), Some(p)) = (
                    tree.head_of(t),
                    tree.deps_of(t.index, &["case"]).find(|c| c.upos == "ADP"),
                ) {
                    out.push((h, p, t));
                }
            }
            _ => {}
        }
    }
    out.sort_by_key(|(_, p, _)| p.index);
    out
}

/// UD copular predicate with its preposition: "the cat is on the mat" puts
/// `cop` and `case` both under "mat".
fn prepositional_predicate<'a>(tree: &'a DepTree, t: &Token) -> Option<&'a Token> {
    tree.deps_of(t.index, &["cop"]).next()?;
    tree.deps_of(t.index, &["case"]).find(|c| c.upos == "ADP")
}

/// R2: prepositional relations.
pub fn rule_prepositional(tree: &DepTree) -> Vec<Triple> {
    let mut out = Vec::new();
    for t in tree.tokens.iter().filter(|t| t.is_nominal()) {
        let Some(prep) = prepositional_predicate(tree, t) else {
            continue;
        };
        let subject = tree
            .deps_of(t.index, &["nsubj"])
            .find(|s| s.is_nominal())
            .and_then(|s| extract_entity(tree, s.index));
        if let (Some(subject), Some(object)) = (subject, extract_entity(tree, t.index)) {
            out.push(Triple::new(subject, with_negation(tree, t.index, prep.lemma_lc()), Some(object), Rule::R2));
        }
    }
    out.extend(attachment_triples(tree));
    out
}

fn attachment_triples(tree: &DepTree) -> Vec<Triple> {
    let mut out = Vec::new();
    for (head, prep, noun) in prepositional_attachments(tree) {
        let Some(object) = extract_entity(tree, noun.index) else {
            continue;
        };
        let subject = if head.is_nominal() {
            extract_entity(tree, head.index)
        } else if head.is_verbal() {
            verb_frame(tree, head).subject.or_else(|| copular_subject(tree, head))
        } else {
            None
        };
        if let Some(subject) = subject {
            out.push(Triple::new(subject, prep.lemma_lc(), Some(object), Rule::R2));
        }
    }
    out
}

/// Surface subject of a `be` token used as a main verb ("the cat is on the mat").
fn copular_subject(tree: &DepTree, be: &Token) -> Option<EntityMention> {
    if be.lemma_lc() != "be" {
        return None;
    }
    tree.deps_of(be.index, &["nsubj"])
        .find(|t| t.is_nominal())
        .and_then(|s| extract_entity(tree, s.index))
}

/// R3: existential "there is/are" clauses.
pub fn rule_existential(tree: &DepTree) -> Vec<Triple> {
    let mut out = Vec::new();
    for expl in tree
        .tokens
        .iter()
        .filter(|t| t.rel() == "expl" && t.lemma_lc() == "there")
    {
        let Some(be) = tree.head_of(expl).filter(|b| b.lemma_lc() == "be") else {
            continue;
        };
        let Some(noun) = tree
            .deps_of(be.index, &["attr", "nsubj", "dobj"])
            .find(|t| t.index > be.index && t.is_nominal())
        else {
            continue;
        };
        let Some(entity) = extract_entity(tree, noun.index) else {
            continue;
        };
        let relation = with_negation(tree, be.index, "exist".to_string());
        out.push(Triple::new(entity.clone(), relation, None, Rule::R3));
        for (head, prep, pnoun) in prepositional_attachments(tree) {
            if head.index != be.index && head.index != noun.index {
                continue;
            }
            if let Some(object) = extract_entity(tree, pnoun.index) {
                out.push(Triple::new(entity.clone(), prep.lemma_lc(), Some(object), Rule::R3));
            }
        }
    }
    out
}

/// R4: copular clauses, `<subject, is, predicate>`.
pub fn rule_copular(tree: &DepTree) -> Vec<Triple> {
    let mut out = Vec::new();
    for t in &tree.tokens {
        // UD: predicate carries the copula as a `cop` dependent
        if let Some(_cop) = tree
            .deps_of(t.index, &["cop"])
            .find(|c| c.lemma_lc() == "be")
        {
            if has_expletive(tree, t.index) || prepositional_predicate(tree, t).is_some() {
                continue;
            }
            let subject = tree
                .deps_of(t.index, &["nsubj"])
                .find(|s| s.is_nominal())
                .and_then(|s| extract_entity(tree, s.index));
            if let (Some(subject), Some(object)) = (subject, predicate_entity(tree, t)) {
                let relation = with_negation(tree, t.index, "is".to_string());
                out.push(Triple::new(subject, relation, Some(object), Rule::R4));
            }
            continue;
        }
        // ClearNLP: `be` heads both the subject and an attr/acomp predicate
        if t.lemma_lc() == "be" && t.is_verbal() {
            if has_expletive(tree, t.index) {
                continue;
            }
            let Some(subject) = copular_subject(tree, t) else {
                continue;
            };
            let Some(object) = tree
                .deps_of(t.index, &["attr", "acomp"])
                .find_map(|p| predicate_entity(tree, p))
            else {
                continue;
            };
            let relation = with_negation(tree, t.index, "is".to_string());
            out.push(Triple::new(subject, relation, Some(object), Rule::R4));
        }
    }
    out
}

fn has_expletive(tree: &DepTree, index: usize) -> bool {
    tree.deps_of(index, &["expl"]).next().is_some()
}

/// R5: possessives, `<possessor, has, possessee>`. Pronoun possessors are skipped.
pub fn rule_possessive(tree: &DepTree) -> Vec<Triple> {
    let mut out = Vec::new();
    for possessor in tree.tokens.iter().filter(|t| t.rel() == "poss") {
        if !matches!(possessor.upos.as_str(), "NOUN" | "PROPN") {
            continue;
        }
        let Some(possessee) = tree.head_of(possessor).filter(|h| h.is_nominal()) else {
            continue;
        };
        if let (Some(s), Some(o)) = (
            extract_entity(tree, possessor.index),
            extract_entity(tree, possessee.index),
        ) {
            out.push(Triple::new(s, "has", Some(o), Rule::R5));
        }
    }
    out
}

/// Runs all rules, drops invalid triples, orders by (rule, subject position)
/// and keeps the first copy of each (subject, relation, object) key.
pub fn parse_scene_graph(tree: &DepTree) -> SceneGraph {
    if tree.caption.trim().is_empty() {
        return SceneGraph::empty(tree.caption.clone());
    }
    let mut triples: Vec<Triple> = [
        rule_svo(tree),
        rule_prepositional(tree),
        rule_existential(tree),
        rule_copular(tree),
        rule_possessive(tree),
    ]
    .into_iter()
    .flatten()
    .filter(|t| !t.subject.phrase.trim().is_empty() && !t.relation.trim().is_empty())
    .collect();
    triples.sort_by_key(|t| (t.rule, t.subject_head));
    let mut seen = HashSet::new();
    triples.retain(|t| seen.insert(t.dedup_key()));
    SceneGraph {
        caption: tree.caption.clone(),
        triples,
    }
}

/// Memoizing front end for [`parse_scene_graph`], keyed on the caption string.
///
/// Lookups and inserts may race; both writers store equal graphs.
#[derive(Debug, Default)]
pub struct SceneGraphParser {
    cache: Option<RwLock<HashMap<String, SceneGraph>>>,
}

impl SceneGraphParser {
    pub fn new() -> Self {
        SceneGraphParser {
            cache: Some(RwLock::default()),
        }
    }

    pub fn uncached() -> Self {
        SceneGraphParser { cache: None }
    }

    pub fn parse(&self, tree: &DepTree) -> SceneGraph {
        let Some(cache) = &self.cache else {
            return parse_scene_graph(tree);
        };
        if let Some(hit) = cache.read().unwrap_or_else(|e| e.into_inner()).get(&tree.caption) {
            return hit.clone();
        }
        let graph = parse_scene_graph(tree);
        cache
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(tree.caption.clone(), graph.clone());
        graph
    }

    pub fn cached_len(&self) -> usize {
        self.cache
            .as_ref()
            .map_or(0, |c| c.read().unwrap_or_else(|e| e.into_inner()).len())
    }
}

/// Parses a JSON-lines stream of scene graphs.
pub fn read_scene_graphs(input: &str) -> Result<Vec<SceneGraph>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            SceneGraph::from_json_line(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
