//! Turns a probability tensor into per-group and overall risk indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::canonical_hash;
use crate::metrics::{
    self, CategoryDistribution, CriterionConfig, OverallRisk, RiskDecomposition, StereotypeVector, UnbiasedReference,
};
use crate::miner::ContextSet;
use crate::probe::ProbabilityTensor;
use crate::schema::{WordSchema, XDistribution};

/// Predicted category distribution and stereotype for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereotypeRecord {
    pub context_id: String,
    pub group_id: String,
    pub distribution: CategoryDistribution,
    pub stereotype: StereotypeVector,
}

/// Normalizes every cell over the candidate words and computes its
/// stereotype against the uniform reference. Output is group-major, with
/// contexts in context-set order.
pub fn evaluate_grid(
    tensor: &ProbabilityTensor,
    schema: &WordSchema,
    contexts: &ContextSet,
) -> Result<Vec<StereotypeRecord>> {
    let categories = schema.attribute_categories()?;
    let candidates = schema.candidate_words();
    let group_ids = schema.group_ids();
    let context_ids = contexts.ids();
    tensor.check_complete(&context_ids, &group_ids, &candidates)?;
    let reference = UnbiasedReference::uniform(categories.len())?;
    let index = tensor.index();
    let mut out = Vec::with_capacity(group_ids.len() * context_ids.len());
    for g in &group_ids {
        for c in &context_ids {
            let cell = index[&(c.as_str(), g.as_str())];
            let wrap = |source: Error| Error::Cell {
                context_id: c.clone(),
                group_id: g.clone(),
                source: Box::new(source),
            };
            let dist =
                metrics::normalize_categories(candidates.iter().map(|w| (w.as_str(), cell.probs[w])), &categories)
                    .map_err(wrap)?;
            let stereotype = metrics::stereotype(&dist, &reference).map_err(wrap)?;
            out.push(StereotypeRecord {
                context_id: c.clone(),
                group_id: g.clone(),
                distribution: dist,
                stereotype,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfigEcho {
    #[serde(flatten)]
    pub criterion: CriterionConfig,
    pub x_distribution: XDistribution,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_hash: String,
    pub contexts_hash: String,
    pub tensor_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indices {
    #[serde(rename = "R")]
    pub discrimination: f64,
    #[serde(rename = "R_p")]
    pub prejudice: f64,
    #[serde(rename = "R_v")]
    pub volatility: f64,
}

impl From<RiskDecomposition> for Indices {
    fn from(r: RiskDecomposition) -> Self {
        Self {
            discrimination: r.discrimination,
            prejudice: r.prejudice,
            volatility: r.volatility,
        }
    }
}

impl From<Indices> for RiskDecomposition {
    fn from(i: Indices) -> Self {
        Self {
            discrimination: i.discrimination,
            prejudice: i.prejudice,
            volatility: i.volatility,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// Normalized weight of the group in the overall indices.
    pub weight: f64,
    pub raw: RiskDecomposition,
    pub scaled: RiskDecomposition,
    pub mean_stereotype: StereotypeVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallReport {
    pub raw: Indices,
    pub scaled: Indices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub config: AuditConfigEcho,
    pub provenance: Provenance,
    pub categories: Vec<String>,
    pub num_contexts: usize,
    pub groups: BTreeMap<String, GroupReport>,
    pub overall: OverallReport,
}

impl RiskReport {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Pretty JSON with a trailing newline. Identical inputs give identical
    /// bytes.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::json("report", e))?;
        s.push('\n');
        Ok(s)
    }

    pub fn overall_risk(&self) -> OverallRisk {
        OverallRisk {
            discrimination: self.overall.raw.discrimination,
            prejudice: self.overall.raw.prejudice,
            volatility: self.overall.raw.volatility,
            per_group: self.groups.iter().map(|(g, r)| (g.clone(), r.raw)).collect(),
        }
    }

    /// Raw per-group values of one index.
    pub fn per_group(&self, pick: impl Fn(&RiskDecomposition) -> f64) -> BTreeMap<String, f64> {
        self.groups.iter().map(|(g, r)| (g.clone(), pick(&r.raw))).collect()
    }
}

pub fn audit(
    tensor: &ProbabilityTensor,
    schema: &WordSchema,
    contexts: &ContextSet,
    cfg: &CriterionConfig,
    x_dist: XDistribution,
) -> Result<RiskReport> {
    schema.validate()?;
    let weights = contexts.weights()?;
    let grid = evaluate_grid(tensor, schema, contexts)?;
    let x_weights = schema.x_weights(x_dist)?;
    let mut per_group = BTreeMap::new();
    let mut mean_stereotypes = BTreeMap::new();
    for (gi, g) in schema.groups.iter().enumerate() {
        let rows = &grid[gi * contexts.len()..(gi + 1) * contexts.len()];
        let stereos: Vec<StereotypeVector> = rows.iter().map(|r| r.stereotype.clone()).collect();
        per_group.insert(g.id.clone(), metrics::decompose(&stereos, &weights, cfg.norm_order)?);
        mean_stereotypes.insert(g.id.clone(), metrics::mean_stereotype(&stereos, &weights)?);
    }
    let overall = metrics::overall(&per_group, &x_weights, cfg.group_aggregation)?;
    let scale = cfg.report_scale;
    let groups = per_group
        .iter()
        .map(|(g, r)| {
            (
                g.clone(),
                GroupReport {
                    weight: x_weights[g],
                    raw: *r,
                    scaled: r.scaled(scale),
                    mean_stereotype: mean_stereotypes.remove(g).expect("one per group"),
                },
            )
        })
        .collect();
    let totals = overall.totals();
    Ok(RiskReport {
        config: AuditConfigEcho {
            criterion: *cfg,
            x_distribution: x_dist,
            reference: "uniform".into(),
        },
        provenance: Provenance {
            schema_hash: canonical_hash(schema),
            contexts_hash: canonical_hash(contexts),
            tensor_hash: tensor.content_hash(),
        },
        categories: schema.categories.iter().map(|c| c.id.clone()).collect(),
        num_contexts: contexts.len(),
        groups,
        overall: OverallReport {
            raw: totals.into(),
            scaled: totals.scaled(scale).into(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::{ContextTemplate, SlotOrder};
    use crate::probe::{TensorCell, TensorMeta};

    fn fixture() -> (WordSchema, ContextSet, ProbabilityTensor) {
        let schema: WordSchema = serde_json::from_str(
            r#"{"groups": [{"id": "doctor", "words": ["doctor"], "weight": 3},
                           {"id": "nurse", "words": ["nurse"], "weight": 1}],
                "categories": [{"id": "male", "words": ["he"]}, {"id": "female", "words": ["she"]}]}"#,
        )
        .unwrap();
        let ctx = ContextSet {
            templates: vec![
                ContextTemplate::new("The [X] said that [Y]", 1).unwrap(),
                ContextTemplate::new("The [X] thought [Y]", 1).unwrap(),
            ],
            mode: SlotOrder::XThenY,
        };
        let cell = |c: &str, g: &str, he: f64, she: f64| TensorCell {
            context_id: c.into(),
            group_id: g.into(),
            probs: [("he".to_string(), he), ("she".to_string(), she)].into(),
        };
        let tensor = ProbabilityTensor {
            meta: TensorMeta {
                backend: "test".into(),
                schema_hash: canonical_hash(&schema),
                ctx_hash: canonical_hash(&ctx),
                created: 0,
            },
            cells: vec![
                cell("The [X] said that [Y]", "doctor", 0.6, 0.2),
                cell("The [X] said that [Y]", "nurse", 0.1, 0.3),
                cell("The [X] thought [Y]", "doctor", 0.2, 0.2),
                cell("The [X] thought [Y]", "nurse", 0.3, 0.1),
            ],
        };
        (schema, ctx, tensor)
    }

    #[test]
    fn hand_computed_report() {
        let (schema, ctx, tensor) = fixture();
        let r = audit(
            &tensor,
            &schema,
            &ctx,
            &CriterionConfig::default(),
            XDistribution::Uniform,
        )
        .unwrap();
        // doctor: p(male) = 0.75, 0.5 → s = (0.5, -0.5), (0, 0)
        let d = r.groups["doctor"].raw;
        assert!((d.discrimination - 0.25).abs() < 1e-15);
        assert!((d.prejudice - 0.25).abs() < 1e-15);
        // nurse: p(male) = 0.25, 0.75 → J = 0.5 both; mean stereotype 0
        let n = r.groups["nurse"].raw;
        assert!((n.discrimination - 0.5).abs() < 1e-15);
        assert!(n.prejudice.abs() < 1e-15);
        assert!((r.overall.raw.discrimination - 0.375).abs() < 1e-15);
        assert!((r.overall.scaled.discrimination - 375.0).abs() < 1e-12);

        let w = audit(
            &tensor,
            &schema,
            &ctx,
            &CriterionConfig::default(),
            XDistribution::Weighted,
        )
        .unwrap();
        assert!((w.overall.raw.discrimination - (0.75 * 0.25 + 0.25 * 0.5)).abs() < 1e-15);
        assert_eq!(w.groups["doctor"].weight, 0.75);
    }

    #[test]
    fn missing_cell_is_reported() {
        let (schema, ctx, mut tensor) = fixture();
        tensor.cells.pop();
        assert!(matches!(
            audit(
                &tensor,
                &schema,
                &ctx,
                &CriterionConfig::default(),
                XDistribution::Uniform
            ),
            Err(Error::IncompleteTensor(_))
        ));
    }

    #[test]
    fn zero_mass_cell_carries_coordinates() {
        let (schema, ctx, mut tensor) = fixture();
        tensor.cells[1].probs.values_mut().for_each(|p| *p = 0.0);
        match audit(
            &tensor,
            &schema,
            &ctx,
            &CriterionConfig::default(),
            XDistribution::Uniform,
        ) {
            Err(Error::Cell { group_id, source, .. }) => {
                assert_eq!(group_id, "nurse");
                assert!(matches!(*source, Error::AllZeroMass));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn report_is_stable_and_ignores_tensor_meta() {
        let (schema, ctx, mut tensor) = fixture();
        let cfg = CriterionConfig::default();
        let a = audit(&tensor, &schema, &ctx, &cfg, XDistribution::Uniform)
            .unwrap()
            .to_json()
            .unwrap();
        tensor.meta.backend = "other".into();
        tensor.meta.created = 12345;
        let b = audit(&tensor, &schema, &ctx, &cfg, XDistribution::Uniform)
            .unwrap()
            .to_json()
            .unwrap();
        assert_eq!(a, b);
        let back: RiskReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
    }
}
