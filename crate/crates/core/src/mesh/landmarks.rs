use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Default labels of the five key landmarks used for pose alignment.
pub const KEY_LANDMARK_LABELS: [&str; 5] = ["eye-left", "eye-right", "nose", "mouth-left", "mouth-right"];

/// Ordered vertex indices with optional names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkIndexSet {
    indices: Vec<usize>,
    labels: Vec<Option<String>>,
}

impl LandmarkIndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let labels = vec![None; indices.len()];
        Self::with_labels(indices, labels)
    }

    pub fn with_labels(indices: Vec<usize>, labels: Vec<Option<String>>) -> Result<Self> {
        if labels.len() != indices.len() {
            return Err(Error::Config(format!(
                "{} labels for {} landmark indices",
                labels.len(),
                indices.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = indices.iter().find(|&&i| !seen.insert(i)) {
            return Err(Error::Config(format!("landmark index {dup} repeated")));
        }
        Ok(Self { indices, labels })
    }

    /// The five-point eyes/nose/mouth-corner set, in [`KEY_LANDMARK_LABELS`] order.
    pub fn key(indices: [usize; 5]) -> Result<Self> {
        Self::with_labels(
            indices.to_vec(),
            KEY_LANDMARK_LABELS.iter().map(|s| Some(s.to_string())).collect(),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate_for(&self, n_vertices: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= n_vertices) {
            Some(bad) => Err(Error::Config(format!(
                "landmark index {bad} out of range for {n_vertices} vertices"
            ))),
            None => Ok(()),
        }
    }

    /// The five key landmarks: the entries carrying the default key labels if
    /// all five are present, otherwise the whole set when it has exactly five.
    pub fn key_subset(&self) -> Result<Self> {
        let by_label: Option<Vec<usize>> = KEY_LANDMARK_LABELS
            .iter()
            .map(|want| {
                self.labels
                    .iter()
                    .position(|l| l.as_deref() == Some(*want))
                    .map(|pos| self.indices[pos])
            })
            .collect();
        match by_label {
            Some(idx) => Self::key([idx[0], idx[1], idx[2], idx[3], idx[4]]),
            None if self.indices.len() == 5 => Ok(self.clone()),
            None => Err(Error::Config(format!(
                "key landmark subset needs exactly 5 entries, set has {}",
                self.indices.len()
            ))),
        }
    }
}

/// Reads a landmark file: one 0-based vertex index per line with an optional
/// trailing label; `#` starts a comment.
pub fn load_landmarks(path: impl AsRef<Path>) -> Result<LandmarkIndexSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_landmarks(&text).map_err(|e| e.with_path(path))
}

pub(crate) fn parse_landmarks(text: &str) -> Result<LandmarkIndexSet> {
    let mut indices = Vec::new();
    let mut labels = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tok = parts.next().unwrap_or_default();
        let idx = tok
            .parse::<usize>()
            .map_err(|_| Error::format(n + 1, format!("invalid landmark index `{tok}`")))?;
        indices.push(idx);
        labels.push(parts.next().map(str::to_string));
    }
    LandmarkIndexSet::with_labels(indices, labels)
}
