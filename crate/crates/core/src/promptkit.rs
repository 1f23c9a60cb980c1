//! Prompt construction for scene-graph injection and the two-turn
//! filtering protocol, plus a scripted stand-in for a vision-language model.

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::softmax_pair;
use crate::error::{Error, ModelError, Result};
use crate::sgparse::{SceneGraph, Triple};

const SEP: &str = " \u{2014} ";

/// Which Turn-1 template to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurnOneVariant {
    #[default]
    TriplesOnly,
    WithCaption,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub plain: String,
    pub flat: String,
    pub turn1: String,
    pub turn1_caption: String,
    pub turn2: String,
    pub turn1_variant: TurnOneVariant,
}

struct TemplateSpec {
    file: &'static str,
    builtin: &'static str,
    required: &'static [&'static str],
}

const SPECS: [TemplateSpec; 5] = [
    TemplateSpec {
        file: "plain.txt",
        builtin: include_str!("../templates/plain.txt"),
        required: &["question"],
    },
    TemplateSpec {
        file: "flat.txt",
        builtin: include_str!("../templates/flat.txt"),
        required: &["triples", "caption", "question"],
    },
    TemplateSpec {
        file: "turn1.txt",
        builtin: include_str!("../templates/turn1.txt"),
        required: &["triples"],
    },
    TemplateSpec {
        file: "turn1_caption.txt",
        builtin: include_str!("../templates/turn1_caption.txt"),
        required: &["triples", "caption"],
    },
    TemplateSpec {
        file: "turn2.txt",
        builtin: include_str!("../templates/turn2.txt"),
        required: &["triples", "question"],
    },
];

impl Default for PromptTemplates {
    fn default() -> Self {
        let [plain, flat, turn1, turn1_caption, turn2] = SPECS.map(|s| s.builtin.to_string());
        PromptTemplates {
            plain,
            flat,
            turn1,
            turn1_caption,
            turn2,
            turn1_variant: TurnOneVariant::default(),
        }
    }
}

impl PromptTemplates {
    /// Built-in templates, overridden by any of `plain.txt`, `flat.txt`,
    /// `turn1.txt`, `turn1_caption.txt`, `turn2.txt` found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut loaded = Vec::with_capacity(SPECS.len());
        for spec in &SPECS {
            let path = dir.join(spec.file);
            let text = if path.is_file() {
                std::fs::read_to_string(&path)?
            } else {
                spec.builtin.to_string()
            };
            check_placeholders(&path.display().to_string(), &text, spec.required)?;
            loaded.push(text);
        }
        let [plain, flat, turn1, turn1_caption, turn2]: [String; 5] =
            loaded.try_into().expect("one entry per spec");
        Ok(PromptTemplates {
            plain,
            flat,
            turn1,
            turn1_caption,
            turn2,
            turn1_variant: TurnOneVariant::default(),
        })
    }

    pub fn with_turn1_variant(mut self, variant: TurnOneVariant) -> Self {
        self.turn1_variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let texts = [&self.plain, &self.flat, &self.turn1, &self.turn1_caption, &self.turn2];
        for (spec, text) in SPECS.iter().zip(texts) {
            check_placeholders(spec.file, text, spec.required)?;
        }
        Ok(())
    }
}

fn check_placeholders(name: &str, text: &str, required: &[&str]) -> Result<()> {
    for p in required {
        if !text.contains(&format!("{{{p}}}")) {
            return Err(Error::MissingPlaceholder {
                template: name.to_string(),
                placeholder: p.to_string(),
            });
        }
    }
    Ok(())
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{(caption|triples|question)\}").expect("valid regex"))
}

/// Single pass, so placeholder-like text inside a caption is left alone.
fn render(template: &str, caption: &str, triples: &str, question: &str) -> String {
    placeholder_re()
        .replace_all(template, |c: &regex::Captures<'_>| match &c[1] {
            "caption" => caption.to_string(),
            "triples" => triples.to_string(),
            _ => question.to_string(),
        })
        .into_owned()
}

/// `Does this image show <caption>?`
pub fn match_question(caption: &str) -> String {
    let body = caption.trim().trim_end_matches(['.', '!', '?', ' ']);
    format!("Does this image show {body}?")
}

/// Numbered line with subject, relation and object joined by `SEP`; no object part when absent.
pub fn triple_line(k: usize, t: &Triple) -> String {
    match &t.object {
        Some(o) => format!("{k}. {}{SEP}{}{SEP}{}", t.subject.phrase, t.relation, o.phrase),
        None => format!("{k}. {}{SEP}{}", t.subject.phrase, t.relation),
    }
}

/// Numbered triple lines joined by newlines, starting at 1.
pub fn triple_block<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> String {
    triples
        .into_iter()
        .enumerate()
        .map(|(i, t)| triple_line(i + 1, t))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The run of numbered triple lines in a rendered prompt, if any.
pub fn extract_triple_block(prompt: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^\d+\. .+\u{2014}").expect("valid regex"));
    let lines: Vec<&str> = prompt
        .lines()
        .skip_while(|l| !re.is_match(l))
        .take_while(|l| re.is_match(l))
        .collect();
    (!lines.is_empty()).then(|| lines.join("\n"))
}

pub fn build_plain_prompt(caption: &str, templates: &PromptTemplates) -> String {
    render(&templates.plain, caption, "", &match_question(caption))
}

/// Falls back to the plain prompt for an empty graph.
pub fn build_flat_prompt(caption: &str, graph: &SceneGraph, templates: &PromptTemplates) -> String {
    if graph.is_empty() {
        return build_plain_prompt(caption, templates);
    }
    render(&templates.flat, caption, &triple_block(&graph.triples), &match_question(caption))
}

/// `None` for an empty graph: the protocol goes straight to the plain prompt.
pub fn build_turn1_prompt(caption: &str, graph: &SceneGraph, templates: &PromptTemplates) -> Option<String> {
    if graph.is_empty() {
        return None;
    }
    let template = match templates.turn1_variant {
        TurnOneVariant::TriplesOnly => &templates.turn1,
        TurnOneVariant::WithCaption => &templates.turn1_caption,
    };
    Some(render(template, caption, &triple_block(&graph.triples), ""))
}

/// Kept triples are renumbered from 1. With nothing kept this is the plain prompt.
pub fn build_turn2_prompt(caption: &str, kept: &[&Triple], templates: &PromptTemplates) -> String {
    if kept.is_empty() {
        return build_plain_prompt(caption, templates);
    }
    render(
        &templates.turn2,
        caption,
        &triple_block(kept.iter().copied()),
        &match_question(caption),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnOneResult {
    /// 1-based, sorted, unique.
    pub kept_indices: Vec<usize>,
    pub raw_response: String,
    pub fallback_used: bool,
}

/// Reads the indices a model picked. Accepts `1, 3`, `1 3`, `[2]`, or lines
/// that start with an index; out-of-range numbers are dropped. When nothing
/// usable is left every index is kept and `fallback_used` is set.
pub fn parse_turn1_response(response: &str, n_triples: usize) -> TurnOneResult {
    static LIST: OnceLock<Regex> = OnceLock::new();
    static LINE: OnceLock<Regex> = OnceLock::new();
    static NUM: OnceLock<Regex> = OnceLock::new();
    let list = LIST.get_or_init(|| {
        Regex::new(r"^[\[(]?\s*\d+(\s*(,|;|\s)\s*(and\s+)?\d+)*\s*[\])]?\s*\.?$").expect("valid regex")
    });
    let line = LINE.get_or_init(|| Regex::new(r"^\s*[-*]?\s*(\d+)(?:[.):]|\s|$)").expect("valid regex"));
    let num = NUM.get_or_init(|| Regex::new(r"\d+").expect("valid regex"));

    let trimmed = response.trim();
    let candidates: Vec<&str> = if list.is_match(trimmed) {
        num.find_iter(trimmed).map(|m| m.as_str()).collect()
    } else {
        trimmed
            .lines()
            .filter_map(|l| line.captures(l))
            .map(|c| c.get(1).expect("group").as_str())
            .collect()
    };
    let mut kept: Vec<usize> = candidates
        .into_iter()
        .filter_map(|s| s.parse::<usize>().ok())
        .filter(|&i| (1..=n_triples).contains(&i))
        .collect();
    kept.sort_unstable();
    kept.dedup();
    let fallback_used = kept.is_empty();
    if fallback_used {
        kept = (1..=n_triples).collect();
    }
    TurnOneResult {
        kept_indices: kept,
        raw_response: response.to_string(),
        fallback_used,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decoding {
    #[default]
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Speaker,
    pub content: String,
}

/// Turns so far; both protocol turns share one conversation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Conversation {
    pub messages: Vec<Message>,
}

impl Conversation {
    pub fn push(&mut self, role: Speaker, content: impl Into<String>) {
        self.messages.push(Message {
            role,
            content: content.into(),
        });
    }

    pub fn last_user(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Speaker::User)
            .map(|m| m.content.as_str())
    }
}

/// Anything that can continue a conversation and score its last turn.
pub trait VisionLanguageModel {
    fn complete(&self, conversation: &Conversation, decoding: Decoding) -> Result<String, ModelError>;

    /// `(z_yes, z_no)` at the last position.
    fn yes_no_logits(&self, conversation: &Conversation) -> Result<(f64, f64), ModelError>;
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Replays canned answers keyed by the SHA-256 hex of the latest user prompt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedModel {
    #[serde(default)]
    pub completions: HashMap<String, String>,
    /// Values are `[z_yes, z_no]`.
    #[serde(default)]
    pub logits: HashMap<String, (f64, f64)>,
    #[serde(default)]
    pub default_completion: Option<String>,
    #[serde(default)]
    pub default_logits: Option<(f64, f64)>,
}

impl ScriptedModel {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn with_completion(mut self, prompt: &str, completion: impl Into<String>) -> Self {
        self.completions.insert(prompt_hash(prompt), completion.into());
        self
    }

    pub fn with_logits(mut self, prompt: &str, z_yes: f64, z_no: f64) -> Self {
        self.logits.insert(prompt_hash(prompt), (z_yes, z_no));
        self
    }

    fn key(conversation: &Conversation) -> Result<String, ModelError> {
        conversation
            .last_user()
            .map(prompt_hash)
            .ok_or_else(|| ModelError("conversation has no user turn".into()))
    }
}

impl VisionLanguageModel for ScriptedModel {
    fn complete(&self, conversation: &Conversation, _decoding: Decoding) -> Result<String, ModelError> {
        let key = Self::key(conversation)?;
        self.completions
            .get(&key)
            .or(self.default_completion.as_ref())
            .cloned()
            .ok_or_else(|| ModelError(format!("no scripted completion for prompt {key}")))
    }

    fn yes_no_logits(&self, conversation: &Conversation) -> Result<(f64, f64), ModelError> {
        let key = Self::key(conversation)?;
        self.logits
            .get(&key)
            .copied()
            .or(self.default_logits)
            .ok_or_else(|| ModelError(format!("no scripted logits for prompt {key}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTurnTrace {
    pub caption: String,
    /// Empty graph: a single plain-prompt turn was scored.
    pub short_circuit: bool,
    pub turn1: Option<TurnOneResult>,
    pub conversation: Conversation,
    pub z_yes: f64,
    pub z_no: f64,
    pub score: f64,
}

impl MultiTurnTrace {
    /// Final prompt that was scored.
    pub fn scored_prompt(&self) -> &str {
        self.conversation.last_user().unwrap_or_default()
    }
}

/// Turn 1 filters the triples, Turn 2 asks the match question on the kept
/// ones within the same conversation; the score is `P(yes)`.
pub fn run_multiturn<M: VisionLanguageModel + ?Sized>(model: &M, caption: &str, graph: &SceneGraph, templates: &PromptTemplates) -> Result<MultiTurnTrace> {
    let mut conversation = Conversation::default();
    let (turn1, scoring_turn) = match build_turn1_prompt(caption, graph, templates) {
        None => {
            conversation.push(Speaker::User, build_plain_prompt(caption, templates));
            (None, 1)
        }
        Some(prompt) => {
            conversation.push(Speaker::User, prompt);
            let reply = model
                .complete(&conversation, Decoding::Greedy)
                .map_err(|source| Error::Protocol { turn: 1, source })?;
            let result = parse_turn1_response(&reply, graph.len());
            conversation.push(Speaker::Assistant, reply);
            let kept: Vec<&Triple> = result
                .kept_indices
                .iter()
                .map(|&i| &graph.triples[i - 1])
                .collect();
            conversation.push(Speaker::User, build_turn2_prompt(caption, &kept, templates));
            (Some(result), 2)
        }
    };
    let (z_yes, z_no) = model
        .yes_no_logits(&conversation)
        .map_err(|source| Error::Protocol {
            turn: scoring_turn,
            source,
        })?;
    let score = softmax_pair(z_no, z_yes).map_err(|e| Error::Protocol {
        turn: scoring_turn,
        source: ModelError(e.to_string()),
    })?;
    Ok(MultiTurnTrace {
        caption: caption.to_string(),
        short_circuit: turn1.is_none(),
        turn1,
        conversation,
        z_yes,
        z_no,
        score,
    })
}
