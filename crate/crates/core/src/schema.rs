//! Demographic groups, attribute categories and exclusion words.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AttributeCategories;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: String,
    /// Surface forms; the first one is used when filling prompts.
    pub words: Vec<String>,
    /// Population weight (e.g. from labor statistics).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSchema {
    pub groups: Vec<Group>,
    pub categories: Vec<Category>,
    /// Words that reveal the attribute outright; sentences containing one
    /// are not usable as contexts.
    #[serde(default)]
    pub exclusions: Vec<String>,
}

/// Which distribution over groups the overall indices use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XDistribution {
    #[default]
    Uniform,
    /// Proportional to each group's `weight`.
    Weighted,
}

impl FromStr for XDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(XDistribution::Uniform),
            "weighted" => Ok(XDistribution::Weighted),
            _ => Err(Error::InvalidSchema(format!("bad x-distribution `{s}`"))),
        }
    }
}

fn is_single_word(w: &str) -> bool {
    !w.is_empty() && w.chars().all(|c| c.is_alphanumeric() || c == '\'' || c == '-')
}

impl WordSchema {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: WordSchema = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchema(msg));
        if self.groups.is_empty() {
            return bad("no groups".into());
        }
        if self.categories.len() < 2 {
            return bad("need at least two attribute categories".into());
        }
        let mut ids = BTreeSet::new();
        let mut group_words = BTreeMap::new();
        for g in &self.groups {
            if !ids.insert(g.id.as_str()) {
                return bad(format!("duplicate group id `{}`", g.id));
            }
            if g.words.is_empty() {
                return bad(format!("group `{}` has no words", g.id));
            }
            if let Some(w) = g.weight {
                if !w.is_finite() || w < 0.0 {
                    return bad(format!("group `{}` has weight {w}", g.id));
                }
            }
            for w in &g.words {
                check_word(w)?;
                if let Some(prev) = group_words.insert(w.as_str(), g.id.as_str()) {
                    return bad(format!("word `{w}` in groups `{prev}` and `{}`", g.id));
                }
            }
        }
        let mut cat_ids = BTreeSet::new();
        for c in &self.categories {
            if !cat_ids.insert(c.id.as_str()) {
                return bad(format!("duplicate category id `{}`", c.id));
            }
            if c.words.is_empty() {
                return bad(format!("category `{}` has no words", c.id));
            }
            for w in &c.words {
                check_word(w)?;
                if group_words.contains_key(w.as_str()) {
                    return bad(format!("word `{w}` is both a group and an attribute word"));
                }
            }
        }
        for w in &self.exclusions {
            check_word(w)?;
        }
        // rejects words shared between categories
        self.attribute_categories()?;
        Ok(())
    }

    pub fn attribute_categories(&self) -> Result<AttributeCategories> {
        AttributeCategories::new(self.categories.iter().map(|c| (c.id.clone(), &c.words)))
    }

    /// Every attribute word, deduplicated, in schema order.
    pub fn candidate_words(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.categories
            .iter()
            .flat_map(|c| &c.words)
            .filter(|w| seen.insert(w.as_str()))
            .cloned()
            .collect()
    }

    pub fn group_ids(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.id.clone()).collect()
    }

    pub fn group(&self, id: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn x_weights(&self, dist: XDistribution) -> Result<BTreeMap<String, f64>> {
        match dist {
            XDistribution::Uniform => {
                let w = 1.0 / self.groups.len() as f64;
                Ok(self.groups.iter().map(|g| (g.id.clone(), w)).collect())
            }
            XDistribution::Weighted => {
                let mut raw = BTreeMap::new();
                for g in &self.groups {
                    let w = g.weight.ok_or_else(|| {
                        Error::InvalidSchema(format!(
                            "weighted x-distribution requested but group `{}` has no weight",
                            g.id
                        ))
                    })?;
                    raw.insert(g.id.clone(), w);
                }
                let total = crate::metrics::accurate_sum(raw.values().copied());
                if total <= 0.0 {
                    return Err(Error::InvalidSchema("group weights sum to zero".into()));
                }
                Ok(raw.into_iter().map(|(g, w)| (g, w / total)).collect())
            }
        }
    }

    /// Lowercase word → group id.
    pub fn group_lookup(&self) -> BTreeMap<&str, &str> {
        self.groups
            .iter()
            .flat_map(|g| g.words.iter().map(move |w| (w.as_str(), g.id.as_str())))
            .collect()
    }
}

fn check_word(w: &str) -> Result<()> {
    if !is_single_word(w) {
        return Err(Error::InvalidSchema(format!("`{w}` is not a single word")));
    }
    if w.chars().any(char::is_uppercase) {
        return Err(Error::InvalidSchema(format!("`{w}` must be lowercase")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> WordSchema {
        serde_json::from_str(
            r#"{
                "groups": [
                    {"id": "doctor", "words": ["doctor"], "weight": 3.0},
                    {"id": "nurse", "words": ["nurse"], "weight": 1.0}
                ],
                "categories": [
                    {"id": "male", "words": ["he", "him"]},
                    {"id": "female", "words": ["she", "her"]}
                ],
                "exclusions": ["beard"]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn valid_schema_passes() {
        let s = schema();
        s.validate().unwrap();
        assert_eq!(s.candidate_words(), ["he", "him", "she", "her"]);
    }

    #[test]
    fn x_weights() {
        let s = schema();
        let u = s.x_weights(XDistribution::Uniform).unwrap();
        assert_eq!(u["doctor"], 0.5);
        let w = s.x_weights(XDistribution::Weighted).unwrap();
        assert_eq!(w["doctor"], 0.75);
        assert_eq!(w["nurse"], 0.25);

        let mut s = schema();
        s.groups[1].weight = None;
        assert!(s.x_weights(XDistribution::Weighted).is_err());
    }

    #[test]
    fn rejects_bad_schemas() {
        let mut s = schema();
        s.categories[1].words.push("he".into());
        assert!(s.validate().is_err());

        let mut s = schema();
        s.groups[0].words = vec!["Doctor".into()];
        assert!(s.validate().is_err());

        let mut s = schema();
        s.categories.truncate(1);
        assert!(s.validate().is_err());

        let mut s = schema();
        s.groups[1].id = "doctor".into();
        assert!(s.validate().is_err());

        let mut s = schema();
        s.groups[0].words = vec!["police officer".into()];
        assert!(s.validate().is_err());
    }
}
