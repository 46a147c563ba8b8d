use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::prompt::AnswerOptions;
use crate::{Error, Result};

/// One multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QAItem {
    pub id: String,
    pub question: String,
    pub options: AnswerOptions,
    pub gold: String,
}

impl QAItem {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        options: AnswerOptions,
        gold: impl Into<String>,
    ) -> Result<Self> {
        let item = Self {
            id: id.into(),
            question: question.into(),
            options,
            gold: gold.into(),
        };
        if item.id.trim().is_empty() {
            return Err(Error::validation("item id is empty"));
        }
        if item.question.trim().is_empty() {
            return Err(Error::validation(format!(
                "item {}: question is empty",
                item.id
            )));
        }
        if !item.options.contains(&item.gold) {
            return Err(Error::validation(format!(
                "item {}: answer {} is not one of the options",
                item.id, item.gold
            )));
        }
        Ok(item)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Number(u64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    id: RawId,
    question: String,
    options: BTreeMap<String, String>,
    #[serde(alias = "gold")]
    answer: String,
}

/// Reads line-delimited items. Any bad line is fatal and reported with its
/// 1-based line number; blank lines are skipped.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<QAItem>> {
    let mut items = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawItem =
            serde_json::from_str(&line).map_err(|e| Error::parse(Some(n), e.to_string()))?;
        let id = match raw.id {
            RawId::Text(s) => s,
            RawId::Number(v) => v.to_string(),
        };
        let item = AnswerOptions::new(raw.options)
            .and_then(|opts| QAItem::new(id, raw.question, opts, raw.answer.trim()))
            .map_err(|e| Error::parse(Some(n), e.to_string()))?;
        if !ids.insert(item.id.clone()) {
            return Err(Error::parse(
                Some(n),
                format!("duplicate item id {}", item.id),
            ));
        }
        items.push(item);
    }
    if items.is_empty() {
        return Err(Error::validation("dataset has no items"));
    }
    Ok(items)
}

pub fn load_dataset(path: &Path) -> Result<Vec<QAItem>> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}
