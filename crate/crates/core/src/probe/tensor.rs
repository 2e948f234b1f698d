use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::canonical_hash;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub backend: String,
    pub schema_hash: String,
    pub ctx_hash: String,
    /// Unix seconds. Not part of [`ProbabilityTensor::content_hash`].
    pub created: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCell {
    pub context_id: String,
    pub group_id: String,
    /// Raw candidate-word probabilities as returned by the backend.
    pub probs: BTreeMap<String, f64>,
}

/// Candidate-word probabilities for every (context, group) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTensor {
    pub meta: TensorMeta,
    pub cells: Vec<TensorCell>,
}

pub(crate) fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl ProbabilityTensor {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| Error::json("serializing tensor", e))?;
        bytes.push(b'\n');
        write_atomic(path.as_ref(), &bytes)
    }

    /// Digest of the cells only, so re-collecting identical values from a
    /// different backend or at a different time hashes the same.
    pub fn content_hash(&self) -> String {
        canonical_hash(&self.cells)
    }

    pub fn index(&self) -> HashMap<(&str, &str), &TensorCell> {
        self.cells
            .iter()
            .map(|c| ((c.context_id.as_str(), c.group_id.as_str()), c))
            .collect()
    }

    /// Context ids in order of first appearance.
    pub fn context_ids(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        self.cells
            .iter()
            .filter(|c| seen.insert(c.context_id.as_str()))
            .map(|c| c.context_id.clone())
            .collect()
    }

    /// Fails unless every (context, group) pair is present exactly once and
    /// every cell lists every candidate word.
    pub fn check_complete(&self, contexts: &[String], groups: &[String], candidates: &[String]) -> Result<()> {
        let idx = self.index();
        if idx.len() != self.cells.len() {
            return Err(Error::IncompleteTensor("duplicate cells".into()));
        }
        for c in contexts {
            for g in groups {
                let cell = idx
                    .get(&(c.as_str(), g.as_str()))
                    .ok_or_else(|| Error::IncompleteTensor(format!("missing cell (`{c}`, `{g}`)")))?;
                if let Some(w) = candidates.iter().find(|w| !cell.probs.contains_key(*w)) {
                    return Err(Error::IncompleteTensor(format!(
                        "cell (`{c}`, `{g}`) lacks candidate `{w}`"
                    )));
                }
            }
        }
        Ok(())
    }
}
