//! Chain-of-thought prompting and parsing.
//!
//! The model is asked for short single-state steps separated by `→`, ending
//! in an integer confidence. Parsing accepts both `→` and the ASCII `->`.

use serde::{Deserialize, Serialize};

use crate::prompt::{AnswerOptions, PromptTemplate};
use crate::{Error, Result};

pub const ARROW: &str = "→";
pub const ASCII_ARROW: &str = "->";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainOfThought {
    pub raw: String,
    pub segments: Vec<String>,
    pub confidence: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn build_cot_prompt(
    template: &PromptTemplate,
    question: &str,
    options: &AnswerOptions,
) -> Result<String> {
    let question = question.trim();
    if question.is_empty() {
        return Err(Error::validation("question must be non-empty"));
    }
    if options.len() < 2 {
        return Err(Error::validation(
            "at least two answer options are required",
        ));
    }
    Ok(template.render(&[("question", question), ("options", &options.render())]))
}

pub fn parse_cot(raw: &str) -> Result<ChainOfThought> {
    let normalized = raw.replace(ASCII_ARROW, ARROW);
    let mut segments: Vec<String> = normalized
        .split(ARROW)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();

    let mut warnings = Vec::new();
    let mut confidence = None;
    match segments.last().and_then(|s| parse_confidence(s)) {
        Some(Ok(c)) => {
            confidence = Some(c);
            segments.pop();
        }
        Some(Err(value)) => {
            warnings.push(format!("confidence {value} outside [0,100], ignored"));
            segments.pop();
        }
        None => warnings.push("no trailing confidence".to_string()),
    }

    if segments.is_empty() {
        return Err(Error::parse(None, "chain of thought has no segments"));
    }
    Ok(ChainOfThought {
        raw: raw.to_string(),
        segments,
        confidence,
        warnings,
    })
}

/// `Some(Ok(c))` for an in-range integer, `Some(Err(v))` for an integer out of
/// range, `None` when the text is not an integer.
fn parse_confidence(segment: &str) -> Option<std::result::Result<u8, i64>> {
    let s = segment.trim_end_matches(['.', '%']).trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    match s.parse::<i64>() {
        Ok(v) if v <= 100 => Some(Ok(v as u8)),
        Ok(v) => Some(Err(v)),
        Err(_) => Some(Err(i64::MAX)),
    }
}

impl ChainOfThought {
    /// Consecutive segment pairs `(s_i, s_{i+1})`.
    pub fn segment_pairs(&self) -> Vec<(&str, &str)> {
        self.segments
            .windows(2)
            .map(|w| (w[0].as_str(), w[1].as_str()))
            .collect()
    }

    /// Canonical form: segments joined by ` → `, confidence appended.
    pub fn render(&self) -> String {
        self.render_with(ARROW)
    }

    pub fn render_with(&self, arrow: &str) -> String {
        let mut parts: Vec<String> = self.segments.clone();
        if let Some(c) = self.confidence {
            parts.push(c.to_string());
        }
        parts.join(&format!(" {arrow} "))
    }
}
