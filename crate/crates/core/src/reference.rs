//! Analytic baseline models whose metric values are known in closed form.
//!
//! * Ideally unbiased: uniform prediction in every cell.
//! * Stereotyped: each group always gets a point mass on its assigned
//!   category.
//! * Randomly stereotyped: each (context, group) cell is a point mass on a
//!   category drawn uniformly at random; for two categories this is a fair
//!   coin per cell.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{CategoryDistribution, NormOrder, RiskDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    IdeallyUnbiased,
    Stereotyped,
    RandomlyStereotyped,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [
        BaselineKind::IdeallyUnbiased,
        BaselineKind::Stereotyped,
        BaselineKind::RandomlyStereotyped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::IdeallyUnbiased => "ideally_unbiased",
            BaselineKind::Stereotyped => "stereotyped",
            BaselineKind::RandomlyStereotyped => "randomly_stereotyped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub num_groups: usize,
    pub num_categories: usize,
    pub num_contexts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Group index → category index. Only meaningful for `Stereotyped`;
    /// unlisted groups map to `group % num_categories`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stereotype_assignment: Option<BTreeMap<usize, usize>>,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind, num_groups: usize, num_categories: usize, num_contexts: usize) -> Self {
        Self {
            kind,
            num_groups,
            num_categories,
            num_contexts,
            seed: 0,
            stereotype_assignment: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.num_groups == 0 {
            return bad("num_groups must be positive".into());
        }
        if self.num_categories < 2 {
            return bad("num_categories must be at least 2".into());
        }
        if self.num_contexts == 0 {
            return bad("num_contexts must be positive".into());
        }
        if let Some(map) = &self.stereotype_assignment {
            if self.kind != BaselineKind::Stereotyped {
                return bad("stereotype_assignment only applies to the stereotyped baseline".into());
            }
            for (&g, &y) in map {
                if g >= self.num_groups {
                    return bad(format!("assignment for group {g} out of range"));
                }
                if y >= self.num_categories {
                    return bad(format!("group {g} assigned to category {y} out of range"));
                }
            }
        }
        Ok(())
    }

    fn assigned_category(&self, group: usize) -> usize {
        self.stereotype_assignment
            .as_ref()
            .and_then(|m| m.get(&group).copied())
            .unwrap_or(group % self.num_categories)
    }
}

/// Generated predictions, indexed `[context][group]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTensor {
    cells: Vec<Vec<CategoryDistribution>>,
}

impl BaselineTensor {
    pub fn cell(&self, context: usize, group: usize) -> &CategoryDistribution {
        &self.cells[context][group]
    }

    pub fn num_contexts(&self) -> usize {
        self.cells.len()
    }

    pub fn num_groups(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<CategoryDistribution>] {
        &self.cells
    }
}

/// Deterministic per-cell generator: the cell's stream is selected from
/// its linear index, so results do not depend on evaluation order.
fn cell_rng(seed: u64, context: usize, group: usize, num_groups: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((context * num_groups + group) as u64);
    rng
}

/// Category chosen for one cell of the randomly stereotyped baseline.
pub fn random_cell_category(spec: &BaselineSpec, context: usize, group: usize) -> usize {
    cell_rng(spec.seed, context, group, spec.num_groups).random_range(0..spec.num_categories)
}

pub fn generate(spec: &BaselineSpec) -> Result<BaselineTensor> {
    spec.validate()?;
    let n = spec.num_categories;
    let cells = (0..spec.num_contexts)
        .map(|c| {
            (0..spec.num_groups)
                .map(|g| match spec.kind {
                    BaselineKind::IdeallyUnbiased => CategoryDistribution::uniform(n),
                    BaselineKind::Stereotyped => CategoryDistribution::point_mass(n, spec.assigned_category(g)),
                    BaselineKind::RandomlyStereotyped => {
                        CategoryDistribution::point_mass(n, random_cell_category(spec, c, g))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselineTensor { cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedMetrics {
    #[serde(flatten)]
    pub risk: RiskDecomposition,
    /// True when the values hold only as the number of contexts grows
    /// (finite samples carry an `O(1/sqrt(|C|))` prejudice term).
    pub asymptotic: bool,
}

/// Closed-form overall indices for a baseline under the max-norm criterion,
/// uniform group distribution and uniform reference.
///
/// For the stereotyped model every context gives the same point mass, so
/// the mean stereotype equals each contextual one: prejudice carries all of
/// the risk and volatility is zero.
pub fn expected_metrics(spec: &BaselineSpec, order: NormOrder) -> Result<ExpectedMetrics> {
    spec.validate()?;
    if order != NormOrder::Infinity {
        return Err(Error::UnsupportedSpec(format!(
            "closed forms are derived for the max-norm criterion, not order {order}"
        )));
    }
    // a point mass has stereotype |Y|-1 on its category and -1 elsewhere
    let peak = spec.num_categories as f64 - 1.0;
    Ok(match spec.kind {
        BaselineKind::IdeallyUnbiased => ExpectedMetrics {
            risk: RiskDecomposition::from_parts(0.0, 0.0),
            asymptotic: false,
        },
        BaselineKind::Stereotyped => ExpectedMetrics {
            risk: RiskDecomposition::from_parts(peak, peak),
            asymptotic: false,
        },
        BaselineKind::RandomlyStereotyped => ExpectedMetrics {
            risk: RiskDecomposition::from_parts(peak, 0.0),
            asymptotic: true,
        },
    })
}
