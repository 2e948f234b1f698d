//! Stereotype and discrimination-risk metrics.
//!
//! Everything here is a pure function of its inputs. Raw values stay in
//! unit scale (for the max-norm with a uniform reference a single cell lies
//! in `[0, |Y| - 1]`); multiplication by the report scale happens only when
//! a report is rendered.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::num::NonZeroU32;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a probability vector's sum from 1.
pub const PROB_TOLERANCE: f64 = 1e-9;
/// Allowed deviation for algebraic identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Correctly rounded floating-point sum (Shewchuk's algorithm with the
/// final half-way correction). The result does not depend on the order of
/// the terms.
pub fn accurate_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

fn check_simplex(values: &[f64], strictly_positive: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidDistribution("no categories".into()));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 || (strictly_positive && v <= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {v}, outside the allowed range"
            )));
        }
    }
    let total = accurate_sum(values.iter().copied());
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
    }
    Ok(())
}

/// A model's predicted distribution over the attribute categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CategoryDistribution(Vec<f64>);

impl CategoryDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, false)?;
        Ok(Self(probs))
    }

    pub fn uniform(categories: usize) -> Result<Self> {
        if categories == 0 {
            return Err(Error::InvalidDistribution("no categories".into()));
        }
        Ok(Self(vec![1.0 / categories as f64; categories]))
    }

    pub fn point_mass(categories: usize, index: usize) -> Result<Self> {
        if index >= categories {
            return Err(Error::IndexOutOfRange { index, len: categories });
        }
        let mut probs = vec![0.0; categories];
        probs[index] = 1.0;
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for CategoryDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<CategoryDistribution> for Vec<f64> {
    fn from(d: CategoryDistribution) -> Self {
        d.0
    }
}

/// The distribution an unbiased model would predict. Strictly positive so
/// the stereotype ratio is always defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnbiasedReference(Vec<f64>);

impl UnbiasedReference {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, true)?;
        Ok(Self(probs))
    }

    pub fn uniform(categories: usize) -> Result<Self> {
        if categories == 0 {
            return Err(Error::InvalidDistribution("no categories".into()));
        }
        Ok(Self(vec![1.0 / categories as f64; categories]))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for UnbiasedReference {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<UnbiasedReference> for Vec<f64> {
    fn from(d: UnbiasedReference) -> Self {
        d.0
    }
}

/// Relative deviation of a prediction from the unbiased reference, one
/// entry per category. Positive entries are stereotypes, negative entries
/// anti-stereotypes; every entry is at least -1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StereotypeVector(Vec<f64>);

impl StereotypeVector {
    /// Wraps raw values. Used for context-averaged stereotypes and tests;
    /// [`stereotype`] is the normal way to obtain one.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Order of the norm applied to the positive part of a stereotype vector.
/// Larger orders express stronger aversion to any single stereotype; the
/// max-norm is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NormOrder {
    Finite(NonZeroU32),
    #[default]
    Infinity,
}

impl NormOrder {
    pub fn finite(k: u32) -> Result<Self> {
        NonZeroU32::new(k)
            .map(NormOrder::Finite)
            .ok_or_else(|| Error::InvalidDistribution("norm order must be positive".into()))
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(k) => write!(f, "{k}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "max" => Ok(NormOrder::Infinity),
            other => {
                let k: u32 = other
                    .parse()
                    .map_err(|_| Error::InvalidDistribution(format!("bad norm order `{s}`")))?;
                NormOrder::finite(k)
            }
        }
    }
}

impl TryFrom<String> for NormOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormOrder> for String {
    fn from(k: NormOrder) -> String {
        k.to_string()
    }
}

/// How per-group risks roll up into the overall indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupAggregation {
    /// Expectation over the group distribution.
    #[default]
    Mean,
    /// Worst group (by discrimination risk), for worst-case audits.
    Max,
}

impl FromStr for GroupAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(GroupAggregation::Mean),
            "max" => Ok(GroupAggregation::Max),
            _ => Err(Error::InvalidDistribution(format!("bad group aggregation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionConfig {
    pub norm_order: NormOrder,
    pub group_aggregation: GroupAggregation,
    pub report_scale: f64,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            norm_order: NormOrder::Infinity,
            group_aggregation: GroupAggregation::Mean,
            report_scale: 1000.0,
        }
    }
}

/// Normalized context weights (the distribution of contexts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightedContexts(Vec<f64>);

impl WeightedContexts {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyContextSet);
        }
        check_simplex(&weights, false)?;
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyContextSet);
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Weights proportional to positive counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(Error::EmptyContextSet);
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for WeightedContexts {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WeightedContexts> for Vec<f64> {
    fn from(w: WeightedContexts) -> Self {
        w.0
    }
}

/// Word-to-category lookup used when folding token probabilities into a
/// category distribution.
#[derive(Debug, Clone)]
pub struct AttributeCategories {
    ids: Vec<String>,
    by_word: HashMap<String, usize>,
}

impl AttributeCategories {
    /// Each word must belong to exactly one category.
    pub fn new<I, W, S>(categories: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, W)>,
        W: IntoIterator,
        W::Item: AsRef<str>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut by_word = HashMap::new();
        for (idx, (id, words)) in categories.into_iter().enumerate() {
            ids.push(id.into());
            for w in words {
                let w = w.as_ref().to_string();
                if let Some(prev) = by_word.insert(w.clone(), idx) {
                    if prev != idx {
                        return Err(Error::InvalidSchema(format!(
                            "word `{w}` listed under categories `{}` and `{}`",
                            ids[prev], ids[idx]
                        )));
                    }
                }
            }
        }
        if ids.is_empty() {
            return Err(Error::InvalidSchema("no attribute categories".into()));
        }
        Ok(Self { ids, by_word })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn category_of(&self, word: &str) -> Option<usize> {
        self.by_word.get(word).copied()
    }
}

/// Folds raw candidate-token probabilities into a category distribution:
/// each category's mass is the sum over its words, divided by the total
/// over all listed words.
pub fn normalize_categories<'a, I>(token_probs: I, categories: &AttributeCategories) -> Result<CategoryDistribution>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); categories.len()];
    for (word, p) in token_probs {
        let idx = categories
            .category_of(word)
            .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!("probability {p} for `{word}`")));
        }
        terms[idx].push(p);
    }
    let mass: Vec<f64> = terms.into_iter().map(accurate_sum).collect();
    let total = accurate_sum(mass.iter().copied());
    if total <= 0.0 {
        return Err(Error::AllZeroMass);
    }
    CategoryDistribution::new(mass.into_iter().map(|m| m / total).collect())
}

/// `pred[y] / reference[y] - 1` for every category.
pub fn stereotype(pred: &CategoryDistribution, reference: &UnbiasedReference) -> Result<StereotypeVector> {
    if pred.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: pred.len(),
        });
    }
    Ok(StereotypeVector(
        pred.probs()
            .iter()
            .zip(reference.probs())
            .map(|(p, r)| p / r - 1.0)
            .collect(),
    ))
}

/// Norm of the positive part of `s`. Anti-stereotypes contribute nothing.
pub fn criterion(s: &StereotypeVector, order: NormOrder) -> f64 {
    let peak = s.values().iter().fold(0.0_f64, |m, &v| m.max(v));
    if peak <= 0.0 {
        return 0.0;
    }
    match order {
        NormOrder::Infinity => peak,
        NormOrder::Finite(k) if k.get() == 1 => accurate_sum(s.values().iter().copied().filter(|v| *v > 0.0)),
        NormOrder::Finite(k) => {
            // Scaling by the peak keeps the sum in [1, |Y|] and makes a
            // single positive entry come out exactly.
            let k = k.get();
            let sum = accurate_sum(
                s.values()
                    .iter()
                    .filter(|v| **v > 0.0)
                    .map(|v| (v / peak).powi(k as i32)),
            );
            peak * sum.powf(1.0 / f64::from(k))
        }
    }
}

/// `max(<pred, d_g>, 0)` where `d_g` has 1 at `g` and `-1/(|Y|-1)` elsewhere.
///
/// Equals the positive part of the uniform-reference stereotype at `g`
/// divided by `|Y| - 1`; kept as an independent route for cross-checks.
pub fn direction_criterion(pred: &CategoryDistribution, g: usize) -> Result<f64> {
    let n = pred.len();
    if g >= n {
        return Err(Error::IndexOutOfRange { index: g, len: n });
    }
    if n < 2 {
        return Err(Error::InvalidDistribution(
            "direction vectors need at least two categories".into(),
        ));
    }
    let off = -1.0 / (n as f64 - 1.0);
    let dot: f64 = pred
        .probs()
        .iter()
        .enumerate()
        .map(|(i, p)| if i == g { *p } else { p * off })
        .sum();
    Ok(dot.max(0.0))
}

/// Context-weighted mean of per-context criterion values.
pub fn discrimination_risk(per_context_criteria: &[f64], ctx: &WeightedContexts) -> Result<f64> {
    if per_context_criteria.len() != ctx.len() {
        return Err(Error::DimensionMismatch {
            expected: ctx.len(),
            found: per_context_criteria.len(),
        });
    }
    Ok(accurate_sum(
        per_context_criteria.iter().zip(ctx.weights()).map(|(j, w)| j * w),
    ))
}

/// Context-weighted mean stereotype vector.
pub fn mean_stereotype(
    per_context_stereotypes: &[StereotypeVector],
    ctx: &WeightedContexts,
) -> Result<StereotypeVector> {
    if per_context_stereotypes.len() != ctx.len() {
        return Err(Error::DimensionMismatch {
            expected: ctx.len(),
            found: per_context_stereotypes.len(),
        });
    }
    let dim = per_context_stereotypes[0].len();
    let mut terms = vec![Vec::with_capacity(ctx.len()); dim];
    for (s, w) in per_context_stereotypes.iter().zip(ctx.weights()) {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.len(),
            });
        }
        for (t, v) in terms.iter_mut().zip(s.values()) {
            t.push(w * v);
        }
    }
    Ok(StereotypeVector(terms.into_iter().map(accurate_sum).collect()))
}

/// Criterion of the context-averaged stereotype.
pub fn prejudice_risk(
    per_context_stereotypes: &[StereotypeVector],
    ctx: &WeightedContexts,
    order: NormOrder,
) -> Result<f64> {
    Ok(criterion(&mean_stereotype(per_context_stereotypes, ctx)?, order))
}

/// A group's discrimination risk split into its prejudice and volatility
/// parts. `discrimination == prejudice + volatility` by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskDecomposition {
    #[serde(rename = "r")]
    pub discrimination: f64,
    #[serde(rename = "r_p")]
    pub prejudice: f64,
    #[serde(rename = "r_v")]
    pub volatility: f64,
}

impl RiskDecomposition {
    pub fn from_parts(discrimination: f64, prejudice: f64) -> Self {
        Self {
            discrimination,
            prejudice,
            volatility: discrimination - prejudice,
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            discrimination: self.discrimination * scale,
            prejudice: self.prejudice * scale,
            volatility: self.volatility * scale,
        }
    }
}

pub fn decompose(
    per_context_stereotypes: &[StereotypeVector],
    ctx: &WeightedContexts,
    order: NormOrder,
) -> Result<RiskDecomposition> {
    let criteria: Vec<f64> = per_context_stereotypes.iter().map(|s| criterion(s, order)).collect();
    let discrimination = discrimination_risk(&criteria, ctx)?;
    let prejudice = prejudice_risk(per_context_stereotypes, ctx, order)?;
    Ok(RiskDecomposition::from_parts(discrimination, prejudice))
}

/// Overall indices across groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallRisk {
    #[serde(rename = "R")]
    pub discrimination: f64,
    #[serde(rename = "R_p")]
    pub prejudice: f64,
    #[serde(rename = "R_v")]
    pub volatility: f64,
    pub per_group: BTreeMap<String, RiskDecomposition>,
}

impl OverallRisk {
    pub fn totals(&self) -> RiskDecomposition {
        RiskDecomposition {
            discrimination: self.discrimination,
            prejudice: self.prejudice,
            volatility: self.volatility,
        }
    }
}

/// Rolls per-group decompositions up over the group distribution.
///
/// With [`GroupAggregation::Max`] the overall indices are those of the group
/// with the largest discrimination risk among groups of positive weight
/// (first in id order on ties), so the sum identity still holds.
pub fn overall(
    per_group: &BTreeMap<String, RiskDecomposition>,
    x_weights: &BTreeMap<String, f64>,
    aggregation: GroupAggregation,
) -> Result<OverallRisk> {
    if per_group.len() != x_weights.len() || per_group.keys().any(|g| !x_weights.contains_key(g)) {
        let missing: Vec<_> = per_group
            .keys()
            .filter(|g| !x_weights.contains_key(*g))
            .chain(x_weights.keys().filter(|g| !per_group.contains_key(*g)))
            .cloned()
            .collect();
        return Err(Error::WeightMismatch(format!(
            "groups without a counterpart: {missing:?}"
        )));
    }
    let weights: Vec<f64> = x_weights.values().copied().collect();
    check_simplex(&weights, false).map_err(|e| Error::WeightMismatch(e.to_string()))?;

    let totals = match aggregation {
        GroupAggregation::Mean => {
            let weighted = |pick: fn(&RiskDecomposition) -> f64| {
                accurate_sum(per_group.iter().map(|(g, r)| x_weights[g] * pick(r)))
            };
            RiskDecomposition {
                discrimination: weighted(|r| r.discrimination),
                prejudice: weighted(|r| r.prejudice),
                volatility: weighted(|r| r.volatility),
            }
        }
        GroupAggregation::Max => {
            let mut worst: Option<&RiskDecomposition> = None;
            for (g, r) in per_group {
                if x_weights[g] <= 0.0 {
                    continue;
                }
                if worst.is_none_or(|b| r.discrimination > b.discrimination) {
                    worst = Some(r);
                }
            }
            *worst.expect("positive weights sum to one")
        }
    };
    Ok(OverallRisk {
        discrimination: totals.discrimination,
        prejudice: totals.prejudice,
        volatility: totals.volatility,
        per_group: per_group.clone(),
    })
}

pub fn scale_for_report(v: f64, cfg: &CriterionConfig) -> f64 {
    v * cfg.report_scale
}
