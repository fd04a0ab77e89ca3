//! Labeled text datasets: label maps, examples, and line-delimited JSON I/O.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense mapping from label id (`0..L`) to a human-readable label name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRecord {
    id: usize,
    name: String,
}

impl LabelMap {
    /// Builds a label map from names indexed by label id.
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::InvalidLabelMap(format!(
                "need at least 2 labels, got {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::InvalidLabelMap("empty label name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidLabelMap(format!(
                    "duplicate label name {name:?}"
                )));
            }
        }
        Ok(Self { names })
    }

    /// Reads `{"id": int, "name": string}` records, one per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut by_id = BTreeMap::new();
        for (lineno, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: LabelRecord =
                serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    reason: e.to_string(),
                })?;
            if by_id.insert(record.id, record.name).is_some() {
                return Err(Error::InvalidLabelMap(format!(
                    "duplicate label id {}",
                    record.id
                )));
            }
        }
        if by_id.keys().enumerate().any(|(pos, &id)| pos != id) {
            return Err(Error::InvalidLabelMap(
                "label ids are not contiguous from 0".into(),
            ));
        }
        Self::new(by_id.into_values())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for (id, name) in self.names.iter().enumerate() {
            let record = LabelRecord {
                id,
                name: name.clone(),
            };
            out.push_str(&serde_json::to_string(&record).expect("label record serializes"));
            out.push('\n');
        }
        write_atomic(path.as_ref(), out.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, label: usize) -> Option<&str> {
        self.names.get(label).map(String::as_str)
    }

    pub fn contains(&self, label: usize) -> bool {
        label < self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    /// Dataset-local index; equals the example's position in its dataset.
    pub id: usize,
    pub text: String,
    /// Secondary field (e.g. a statement's context); rendered before `text`.
    pub text_pair: Option<String>,
    pub label: usize,
}

impl LabeledExample {
    /// Text fed to the encoder: `text`, or `"{text_pair} {separator} {text}"`.
    pub fn render(&self, separator: &str) -> String {
        render_input(&self.text, self.text_pair.as_deref(), separator)
    }
}

/// Joins an optional context field and the main text with a separator token.
pub fn render_input(text: &str, text_pair: Option<&str>, separator: &str) -> String {
    debug_assert!(!separator.is_empty());
    match text_pair {
        Some(pair) if !pair.is_empty() => format!("{pair} {separator} {text}"),
        _ => text.to_string(),
    }
}

/// On-disk record: `{"text": ..., "text_pair": ..., "label": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_pair: Option<String>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    examples: Vec<LabeledExample>,
    label_map: LabelMap,
}

impl LabeledDataset {
    /// Builds a dataset from records, assigning ids `0..n` in order.
    pub fn from_records(
        records: impl IntoIterator<Item = DatasetRecord>,
        label_map: LabelMap,
    ) -> Result<Self> {
        let mut examples = Vec::new();
        for (id, record) in records.into_iter().enumerate() {
            if record.text.is_empty() {
                return Err(Error::EmptyText { index: id });
            }
            if !label_map.contains(record.label) {
                return Err(Error::UnknownLabel {
                    label: record.label,
                });
            }
            examples.push(LabeledExample {
                id,
                text: record.text,
                text_pair: record.text_pair.filter(|p| !p.is_empty()),
                label: record.label,
            });
        }
        Ok(Self {
            examples,
            label_map,
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn get(&self, id: usize) -> Option<&LabeledExample> {
        self.examples.get(id)
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.label_map
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Rendered encoder inputs, in id order.
    pub fn rendered(&self, separator: &str) -> Vec<String> {
        self.examples.iter().map(|e| e.render(separator)).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = DatasetRecord> + '_ {
        self.examples.iter().map(|e| DatasetRecord {
            text: e.text.clone(),
            text_pair: e.text_pair.clone(),
            label: e.label,
        })
    }

    /// New dataset holding the given examples (by id) in the given order, re-indexed.
    pub fn subset(&self, ids: &[usize]) -> Self {
        let examples = ids
            .iter()
            .enumerate()
            .map(|(new_id, &old)| LabeledExample {
                id: new_id,
                ..self.examples[old].clone()
            })
            .collect();
        Self {
            examples,
            label_map: self.label_map.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for record in self.records() {
            out.push_str(&serde_json::to_string(&record).expect("dataset record serializes"));
            out.push('\n');
        }
        write_atomic(path.as_ref(), out.as_bytes())
    }
}

/// Loads a line-delimited JSON dataset. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>, label_map: LabelMap) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    LabeledDataset::from_records(records, label_map)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
