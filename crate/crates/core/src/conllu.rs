//! CoNLL-U ingestion and the dependency-tree data model.
//!
//! Only ID, FORM, LEMMA, UPOS, HEAD and DEPREL are interpreted. XPOS, FEATS,
//! DEPS and MISC are carried along untouched so that [`to_conllu`] reproduces
//! them. Multiword-token ranges (`1-2`) and empty nodes (`3.1`) are skipped.
//!
//! Relation labels from both the ClearNLP inventory (`dobj`, `prep`/`pobj`,
//! `poss`) and Universal Dependencies (`obj`, `case`/`nmod`, `nmod:poss`) are
//! accepted. Rule code compares labels through [`canonical_deprel`], which maps
//! UD labels onto their ClearNLP counterparts where a one-to-one mapping exists.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// Governor index, 0 for the root.
    pub head: usize,
    pub deprel: String,
    /// Character offsets of `form` within [`DepTree::caption`], end exclusive.
    pub char_start: Option<usize>,
    pub char_end: Option<usize>,
    pub xpos: String,
    pub feats: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    pub fn is_nominal(&self) -> bool {
        matches!(self.upos.as_str(), "NOUN" | "PROPN" | "PRON")
    }

    pub fn is_verbal(&self) -> bool {
        matches!(self.upos.as_str(), "VERB" | "AUX")
    }

    /// Lowercased lemma.
    pub fn lemma_lc(&self) -> String {
        self.lemma.to_lowercase()
    }

    /// The relation label mapped through the alias table.
    pub fn rel(&self) -> &str {
        canonical_deprel(&self.deprel)
    }

    pub fn has_offsets(&self) -> bool {
        self.char_start.is_some() && self.char_end.is_some()
    }
}

/// A validated dependency parse of one caption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTree {
    pub caption: String,
    pub tokens: Vec<Token>,
    /// Comment lines without the leading `#`, in file order.
    pub comments: Vec<String>,
    /// Whether `caption` came from a `# text` comment.
    pub caption_from_text: bool,
}

impl DepTree {
    /// Builds a tree from tokens and validates it. Offsets are recomputed
    /// against `caption`; pass `None` to join forms with single spaces.
    pub fn new(caption: Option<String>, mut tokens: Vec<Token>) -> Result<Self> {
        let caption_from_text = caption.is_some();
        let caption = caption.unwrap_or_else(|| join_forms(&tokens));
        assign_offsets(&caption, &mut tokens);
        let tree = DepTree {
            caption,
            tokens,
            comments: Vec::new(),
            caption_from_text,
        };
        tree.validate(1)?;
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn root(&self) -> &Token {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .expect("validated tree has a root")
    }

    /// Dependents of `index` in surface order, optionally restricted to one
    /// relation. The filter goes through the alias table, so `obj` and `dobj`
    /// select the same arcs.
    pub fn children(&self, index: usize, deprel: Option<&str>) -> Result<Vec<&Token>> {
        if index == 0 || index > self.tokens.len() {
            return Err(Error::Argument(format!(
                "token index {index} outside 1..={}",
                self.tokens.len()
            )));
        }
        let wanted = deprel.map(canonical_deprel);
        Ok(self
            .tokens
            .iter()
            .filter(|t| t.head == index && wanted.is_none_or(|w| t.rel() == w))
            .collect())
    }

    /// Dependents of `index` whose canonical relation is one of `rels`.
    /// Panics on an out-of-range index; for in-crate traversal only.
    pub(crate) fn deps_of<'a>(&'a self, index: usize, rels: &'a [&str]) -> impl Iterator<Item = &'a Token> + 'a {
        self.tokens
            .iter()
            .filter(move |t| t.head == index && rels.contains(&t.rel()))
    }

    pub(crate) fn head_of(&self, token: &Token) -> Option<&Token> {
        self.token(token.head)
    }

    /// Value of a `# id = ...` or `# sent_id = ...` comment.
    pub fn sent_id(&self) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let (key, value) = c.split_once('=')?;
            matches!(key.trim(), "id" | "sent_id").then(|| value.trim())
        })
    }

    fn validate(&self, sentence: usize) -> Result<()> {
        let fail = |message: String| Error::Validation {
            sentence,
            caption: self.caption.clone(),
            message,
        };
        let n = self.tokens.len();
        if n == 0 {
            return Err(fail("sentence has no tokens".into()));
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(fail(format!(
                    "token ids are not contiguous: expected {}, found {}",
                    i + 1,
                    t.index
                )));
            }
            if t.head == t.index {
                return Err(fail(format!("token {} is its own head", t.index)));
            }
            if t.head > n {
                return Err(fail(format!(
                    "token {} has head {} outside the sentence",
                    t.index, t.head
                )));
            }
            if t.lemma.is_empty() || t.upos.is_empty() || t.upos == "_" {
                return Err(fail(format!("token {} lacks lemma or UPOS", t.index)));
            }
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(fail(format!("expected exactly one root, found {roots}")));
        }
        for t in &self.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(fail(format!("cycle through token {}", t.index)));
                }
                cur = self.tokens[cur - 1].head;
            }
        }
        Ok(())
    }
}

/// Maps a relation label onto the canonical (ClearNLP-style) inventory.
/// Unknown subtyped labels lose their subtype.
pub fn canonical_deprel(label: &str) -> &str {
    match label {
        "obj" => "dobj",
        "nsubj:pass" => "nsubjpass",
        "nmod:poss" => "poss",
        "acl:relcl" => "relcl",
        "aux:pass" => "auxpass",
        "obl:agent" => "agent",
        "compound:prt" => "prt",
        "ROOT" => "root",
        other => other.split_once(':').map_or(other, |(base, _)| base),
    }
}

/// Parses every sentence block in `input`.
pub fn parse_conllu<R: BufRead>(input: R) -> Result<Vec<DepTree>> {
    let mut trees = Vec::new();
    let mut block = Block::default();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(tree) = block.finish(trees.len() + 1)? {
                trees.push(tree);
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            block.comments.push(comment.trim_start().to_string());
            continue;
        }
        if let Some(token) = parse_token_line(line, lineno)? {
            block.tokens.push(token);
        }
    }
    if let Some(tree) = block.finish(trees.len() + 1)? {
        trees.push(tree);
    }
    Ok(trees)
}

pub fn parse_conllu_str(input: &str) -> Result<Vec<DepTree>> {
    parse_conllu(input.as_bytes())
}

/// Writes trees back out in CoNLL-U layout. Comments are reproduced as read.
pub fn to_conllu(trees: &[DepTree]) -> String {
    let mut out = String::new();
    for tree in trees {
        if tree.comments.is_empty() && tree.caption_from_text {
            let _ = writeln!(out, "# text = {}", tree.caption);
        }
        for c in &tree.comments {
            let _ = writeln!(out, "# {c}");
        }
        for t in &tree.tokens {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.index, t.form, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel, t.deps, t.misc
            );
        }
        out.push('\n');
    }
    out
}

#[derive(Default)]
struct Block {
    comments: Vec<String>,
    tokens: Vec<Token>,
}

impl Block {
    fn finish(&mut self, sentence: usize) -> Result<Option<DepTree>> {
        let comments = std::mem::take(&mut self.comments);
        let mut tokens = std::mem::take(&mut self.tokens);
        if tokens.is_empty() {
            return Ok(None);
        }
        let text = comments.iter().find_map(|c| {
            let rest = c.strip_prefix("text")?.trim_start();
            let value = rest.strip_prefix('=')?;
            Some(value.strip_prefix(' ').unwrap_or(value).to_string())
        });
        let caption_from_text = text.is_some();
        let caption = text.unwrap_or_else(|| join_forms(&tokens));
        assign_offsets(&caption, &mut tokens);
        let tree = DepTree {
            caption,
            tokens,
            comments,
            caption_from_text,
        };
        tree.validate(sentence)?;
        Ok(Some(tree))
    }
}

fn parse_token_line(line: &str, lineno: usize) -> Result<Option<Token>> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(Error::Parse {
            line: lineno,
            message: format!("expected 10 tab-separated columns, found {}", cols.len()),
        });
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    let index: usize = id.parse().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("non-integer token id {id:?}"),
    })?;
    let head: usize = cols[6].parse().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("non-integer head {:?}", cols[6]),
    })?;
    if index == 0 {
        return Err(Error::Parse {
            line: lineno,
            message: "token ids start at 1".into(),
        });
    }
    let form = cols[1].to_string();
    let lemma = match cols[2] {
        "_" if form != "_" => form.to_lowercase(),
        l => l.to_string(),
    };
    Ok(Some(Token {
        index,
        form,
        lemma,
        upos: cols[3].to_string(),
        xpos: cols[4].to_string(),
        feats: cols[5].to_string(),
        head,
        deprel: cols[7].to_string(),
        deps: cols[8].to_string(),
        misc: cols[9].to_string(),
        char_start: None,
        char_end: None,
    }))
}

fn join_forms(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.form.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Locates each form in `caption` left to right. Forms that cannot be found
/// keep `None` offsets and do not advance the cursor.
fn assign_offsets(caption: &str, tokens: &mut [Token]) {
    let mut byte_cursor = 0;
    let mut char_cursor = 0;
    for t in tokens.iter_mut() {
        t.char_start = None;
        t.char_end = None;
        if t.form.is_empty() {
            continue;
        }
        if let Some(rel) = caption[byte_cursor..].find(&t.form) {
            let start = char_cursor + caption[byte_cursor..byte_cursor + rel].chars().count();
            let len = t.form.chars().count();
            t.char_start = Some(start);
            t.char_end = Some(start + len);
            byte_cursor += rel + t.form.len();
            char_cursor = start + len;
        }
    }
}
