use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use winosg::conllu::{parse_conllu_str, DepTree};

use crate::Failure;

/// Fails with a usage error unless every path is an existing file.
pub fn require_files<'a>(paths: impl IntoIterator<Item = (&'a str, &'a Path)>) -> Result<(), Failure> {
    for (flag, path) in paths {
        if !path.is_file() {
            return Err(Failure::usage(format!("--{flag}: no such file {}", path.display())));
        }
    }
    Ok(())
}

pub fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes everything or nothing: a temp file next to `path` is renamed over it.
pub fn write_output(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating a temp file in {}", dir.display()))?;
            tmp.write_all(content.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

pub fn lines_to_string(lines: &[String]) -> String {
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    out
}

/// CoNLL-U sentences addressable by `# id = <record>/<0|1>` or by caption text.
pub struct Sidecar {
    pub trees: Vec<DepTree>,
    by_id: HashMap<String, usize>,
    by_caption: HashMap<String, usize>,
}

impl Sidecar {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = read(path)?;
        let trees = parse_conllu_str(&text).with_context(|| path.display().to_string())?;
        let mut by_id = HashMap::new();
        let mut by_caption = HashMap::new();
        for (i, t) in trees.iter().enumerate() {
            if let Some(id) = t.sent_id() {
                by_id.entry(id.to_string()).or_insert(i);
            }
            by_caption.entry(t.caption.clone()).or_insert(i);
        }
        Ok(Sidecar {
            trees,
            by_id,
            by_caption,
        })
    }

    pub fn lookup(&self, record: &str, index: usize, caption: &str) -> anyhow::Result<&DepTree> {
        if let Some(&i) = self.by_id.get(&format!("{record}/{index}")) {
            let tree = &self.trees[i];
            if tree.caption != caption {
                return Err(anyhow!(
                    "sidecar sentence {record}/{index} has text {:?}, record has {caption:?}",
                    tree.caption
                ));
            }
            return Ok(tree);
        }
        self.by_caption
            .get(caption)
            .map(|&i| &self.trees[i])
            .ok_or_else(|| anyhow!("no sidecar parse for caption {index} {caption:?}"))
    }
}
