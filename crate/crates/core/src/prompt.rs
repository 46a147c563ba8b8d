//! Prompt templates with `{name}` placeholders and multiple-choice option sets.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Labeled answer options in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOptions(Vec<(String, String)>);

impl AnswerOptions {
    /// Requires at least two options with distinct non-empty labels.
    pub fn new<L, T>(options: impl IntoIterator<Item = (L, T)>) -> Result<Self>
    where
        L: Into<String>,
        T: Into<String>,
    {
        let options: Vec<(String, String)> = options
            .into_iter()
            .map(|(l, t)| (l.into().trim().to_string(), t.into().trim().to_string()))
            .collect();
        if options.len() < 2 {
            return Err(Error::validation(
                "at least two answer options are required",
            ));
        }
        let mut seen = BTreeSet::new();
        for (label, _) in &options {
            if label.is_empty() {
                return Err(Error::validation("empty option label"));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::validation(format!("duplicate option label {label}")));
            }
        }
        Ok(Self(options))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(l, t)| (l.as_str(), t.as_str()))
    }

    pub fn labels(&self) -> Vec<&str> {
        self.0.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.iter().any(|(l, _)| l == label)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One `X. text` line per option.
    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|(l, t)| format!("{l}. {t}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(std::fs::read_to_string(path)?))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Fails if any of `names` has no `{name}` placeholder in the template.
    pub fn require(&self, names: &[&str]) -> Result<()> {
        for name in names {
            if !self.text.contains(&format!("{{{name}}}")) {
                return Err(Error::validation(format!(
                    "prompt template lacks placeholder {{{name}}}"
                )));
            }
        }
        Ok(())
    }

    /// Substitutes every `{name}` in a single pass; substituted values are
    /// not re-scanned and unknown placeholders are left as is.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let hit = after.find('}').and_then(|close| {
                let name = &after[..close];
                values
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| (close, *v))
            });
            match hit {
                Some((close, value)) => {
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

pub const DEFAULT_COT_TEMPLATE: &str = "\
You are answering a multiple-choice medical question.
Reason step by step in short segments. Each segment states exactly one fact or state.
Separate consecutive segments with the arrow symbol \"→\". Do not number the steps.
After the last segment add one more \"→\" followed by your confidence as an integer from 0 to 100.
Example: symptom → underlying mechanism → expected finding → 80

Question: {question}
Options:
{options}
";

pub const DEFAULT_ENHANCE_TEMPLATE: &str = "\
You are checking a chain of reasoning against knowledge graph evidence.

Question: {question}
Options:
{options}

Original reasoning chain:
{cot}

Graph evidence paths (highest scoring first):
{paths}

Cross-check each reasoning step against the evidence. Drop steps or paths that contradict each other \
or the question. Then write a concise enhanced reasoning summary that states the causal chain supporting \
the most likely answer.
";

pub const DEFAULT_INFER_TEMPLATE: &str = "\
Answer the multiple-choice medical question using the material below.

Question: {question}
Options:
{options}

Reasoning chain:
{cot}

Graph evidence:
{evidence}

Enhanced summary:
{summary}

Reply with the final line in the form \"Answer: X\" where X is one option label.
";
