//! Transcript replay.
//!
//! A transcript is line-delimited JSON. Each record names a stage, the
//! per-stage request ordinal it answers, and the response text:
//!
//! ```text
//! {"stage":"cot","ordinal":0,"text":"fever → infection → 80"}
//! {"stage":"infer","ordinal":0,"text":"Answer: B","requires":["CAUSES"],"otherwise":"Answer: A"}
//! ```
//!
//! `requires` lists substrings that must occur in the request's last user
//! message for `text` to be returned; otherwise `otherwise` is returned, or
//! the call fails when no alternative is given.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, LlmRequest, LlmResponse, Stage, Usage};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: Stage,
    pub ordinal: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub otherwise: Option<String>,
}

#[derive(Debug)]
pub struct MockBackend {
    entries: BTreeMap<(Stage, usize), TranscriptEntry>,
    next: Mutex<HashMap<Stage, usize>>,
}

impl MockBackend {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in entries {
            let key = (e.stage, e.ordinal);
            if map.insert(key, e).is_some() {
                return Err(Error::Transcript(format!(
                    "duplicate entry for stage {} ordinal {}",
                    key.0, key.1
                )));
            }
        }
        Ok(Self {
            entries: map,
            next: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line)
                .map_err(|e| Error::parse(Some(i + 1), format!("transcript record: {e}")))?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    /// Requests served so far for `stage`.
    pub fn served(&self, stage: Stage) -> usize {
        self.next.lock().unwrap().get(&stage).copied().unwrap_or(0)
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse> {
        let ordinal = {
            let mut next = self.next.lock().unwrap();
            let slot = next.entry(request.stage).or_insert(0);
            let ordinal = *slot;
            *slot += 1;
            ordinal
        };
        let entry = self.entries.get(&(request.stage, ordinal)).ok_or_else(|| {
            Error::Transcript(format!(
                "no {} response for request ordinal {ordinal}",
                request.stage
            ))
        })?;
        let prompt = request.last_user_content();
        let missing: Vec<&str> = entry
            .requires
            .iter()
            .map(String::as_str)
            .filter(|r| !prompt.contains(r))
            .collect();
        let text = if missing.is_empty() {
            entry.text.clone()
        } else {
            entry.otherwise.clone().ok_or_else(|| {
                Error::Transcript(format!(
                    "{} ordinal {ordinal}: prompt lacks required text {missing:?}",
                    request.stage
                ))
            })?
        };
        Ok(LlmResponse {
            usage: Usage {
                prompt_tokens: prompt.split_whitespace().count() as u64,
                completion_tokens: text.split_whitespace().count() as u64,
            },
            text,
            latency_ms: 0,
        })
    }

    fn is_mock(&self) -> bool {
        true
    }
}
