//! Dictionary entity linking over node names and aliases.
//!
//! Surface forms are normalized (lowercased, punctuation replaced by spaces,
//! whitespace collapsed) and indexed as token sequences. Linking scans the
//! normalized text left to right and takes the longest indexed form at each
//! position, skipping past it.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use crate::graph::KnowledgeGraph;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Maps free text to concept ids.
pub trait EntityRecognizer: Sync {
    fn recognize(&self, text: &str) -> BTreeSet<String>;
}

pub fn normalize(text: &str) -> String {
    tokens(text).join(" ")
}

fn tokens(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct LinkerIndex {
    forms: HashMap<String, BTreeSet<String>>,
    max_tokens: usize,
}

impl LinkerIndex {
    pub fn build<S: Scalar>(graph: &KnowledgeGraph<S>) -> Self {
        let mut index = Self::default();
        for node in graph.nodes() {
            index.insert(&node.name, &node.id);
            for alias in &node.aliases {
                index.insert(alias, &node.id);
            }
        }
        index
    }

    /// Adds a surface form. Forms that normalize to nothing are ignored.
    pub fn insert(&mut self, surface: &str, id: &str) {
        let toks = tokens(surface);
        if toks.is_empty() {
            return;
        }
        self.max_tokens = self.max_tokens.max(toks.len());
        self.forms
            .entry(toks.join(" "))
            .or_default()
            .insert(id.to_string());
    }

    /// Merges a `cui<TAB>alias` file. Every cui must exist in `graph`.
    pub fn merge_alias_file<S: Scalar, R: BufRead>(
        &mut self,
        graph: &KnowledgeGraph<S>,
        reader: R,
    ) -> Result<usize> {
        let mut added = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (cui, alias) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(Some(i + 1), "expected cui<TAB>alias"))?;
            let cui = cui.trim();
            if i == 0 && cui.eq_ignore_ascii_case("cui") {
                continue;
            }
            graph.resolve(cui)?;
            self.insert(alias, cui);
            added += 1;
        }
        Ok(added)
    }

    pub fn lookup(&self, normalized: &str) -> Option<&BTreeSet<String>> {
        self.forms.get(normalized)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn link(&self, text: &str) -> BTreeSet<String> {
        let toks = tokens(text);
        let mut found = BTreeSet::new();
        let mut i = 0;
        while i < toks.len() {
            let longest = (1..=self.max_tokens.min(toks.len() - i))
                .rev()
                .find_map(|n| {
                    self.forms
                        .get(&toks[i..i + n].join(" "))
                        .map(|ids| (n, ids))
                });
            match longest {
                Some((n, ids)) => {
                    found.extend(ids.iter().cloned());
                    i += n;
                }
                None => i += 1,
            }
        }
        found
    }
}

impl EntityRecognizer for LinkerIndex {
    fn recognize(&self, text: &str) -> BTreeSet<String> {
        self.link(text)
    }
}
