use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;

/// A privacy policy with its metadata header.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyDocument {
    pub app_name: String,
    pub app_category: String,
    pub body: String,
}

impl PolicyDocument {
    pub fn new(app_name: impl Into<String>, app_category: impl Into<String>, body: impl Into<String>) -> Result<Self, PipelineError> {
        let doc = Self {
            app_name: app_name.into(),
            app_category: app_category.into(),
            body: body.into(),
        };
        if doc.app_name.trim().is_empty() {
            return Err(PipelineError::MalformedDocument {
                source_name: doc.app_name,
                message: "empty app name".into(),
            });
        }
        if doc.body.trim().is_empty() {
            return Err(PipelineError::MalformedDocument {
                source_name: doc.app_name,
                message: "empty body".into(),
            });
        }
        Ok(doc)
    }

    /// Parses the corpus text format:
    ///
    /// ```text
    /// App: Chirper
    /// Category: social
    /// ---
    /// policy body...
    /// ```
    ///
    /// Header keys are case-insensitive; `Category` is optional.
    pub fn parse(source_name: &str, text: &str) -> Result<Self, PipelineError> {
        let malformed = |message: &str| PipelineError::MalformedDocument {
            source_name: source_name.to_string(),
            message: message.to_string(),
        };
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut app = None;
        let mut category = None;
        let mut offset = 0;
        let mut body_start = None;
        for line in text.split_inclusive('\n') {
            offset += line.len();
            let trimmed = line.trim();
            if trimmed == "---" {
                body_start = Some(offset);
                break;
            }
            if trimmed.is_empty() {
                continue;
            }
            let Some((key, value)) = trimmed.split_once(':') else {
                return Err(malformed(&format!("bad header line {trimmed:?}")));
            };
            match key.trim().to_ascii_lowercase().as_str() {
                "app" => app = Some(value.trim().to_string()),
                "category" => category = Some(value.trim().to_string()),
                other => return Err(malformed(&format!("unknown header key {other:?}"))),
            }
        }
        let body_start = body_start.ok_or_else(|| malformed("missing '---' header terminator"))?;
        let app = app.ok_or_else(|| malformed("missing 'App:' header"))?;
        Self::new(app, category.unwrap_or_default(), &text[body_start..]).map_err(|e| match e {
            PipelineError::MalformedDocument { message, .. } => malformed(&message),
            other => other,
        })
    }
}

/// Every `*.txt` file of `dir`, in file-name order.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<PolicyDocument>, PipelineError> {
    let io = |path: &Path, source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let path = entry.map_err(|e| io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .iter()
        .map(|path| {
            let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
            PolicyDocument::parse(&path.display().to_string(), &text)
        })
        .collect()
}
