use std::collections::BTreeMap;

use pvf_core::metrics::{self, accurate_sum};
use pvf_core::reference::{expected_metrics, generate};
use pvf_core::{
    BaselineKind, BaselineSpec, GroupAggregation, NormOrder, OverallRisk, StereotypeVector, UnbiasedReference,
    WeightedContexts,
};

/// Runs the metric pipeline directly over a generated baseline with
/// uniform context and group weights.
fn metrics_of(spec: &BaselineSpec) -> OverallRisk {
    let t = generate(spec).unwrap();
    let reference = UnbiasedReference::uniform(spec.num_categories).unwrap();
    let ctx = WeightedContexts::uniform(spec.num_contexts).unwrap();
    let mut per_group = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for g in 0..spec.num_groups {
        let stereos: Vec<StereotypeVector> = (0..spec.num_contexts)
            .map(|c| metrics::stereotype(t.cell(c, g), &reference).unwrap())
            .collect();
        per_group.insert(
            format!("g{g}"),
            metrics::decompose(&stereos, &ctx, NormOrder::Infinity).unwrap(),
        );
        weights.insert(format!("g{g}"), 1.0 / spec.num_groups as f64);
    }
    metrics::overall(&per_group, &weights, GroupAggregation::Mean).unwrap()
}

#[test]
fn exact_baselines_match_closed_form() {
    for kind in [BaselineKind::IdeallyUnbiased, BaselineKind::Stereotyped] {
        for ny in [2, 3, 5] {
            let spec = BaselineSpec::new(kind, 8, ny, 40);
            let want = expected_metrics(&spec, NormOrder::Infinity).unwrap();
            assert!(!want.asymptotic);
            assert_eq!(metrics_of(&spec).totals(), want.risk, "{kind:?} |Y|={ny}");
        }
    }
}

#[test]
fn random_baseline_within_sampling_bound() {
    let spec = BaselineSpec::new(BaselineKind::RandomlyStereotyped, 10, 2, 10_000).with_seed(11);
    let want = expected_metrics(&spec, NormOrder::Infinity).unwrap();
    assert!(want.asymptotic);
    let got = metrics_of(&spec);
    assert_eq!(got.discrimination, want.risk.discrimination);
    let bound = 3.0 / (spec.num_contexts as f64).sqrt();
    assert!(
        (got.prejudice - want.risk.prejudice).abs() <= bound,
        "{}",
        got.prejudice
    );
}

#[test]
fn random_baseline_with_three_categories() {
    let spec = BaselineSpec::new(BaselineKind::RandomlyStereotyped, 6, 3, 500).with_seed(5);
    assert_eq!(metrics_of(&spec).discrimination, 2.0);
}

#[test]
fn generated_cells_are_distributions() {
    for kind in BaselineKind::ALL {
        let t = generate(&BaselineSpec::new(kind, 7, 4, 30).with_seed(2)).unwrap();
        assert_eq!((t.num_contexts(), t.num_groups()), (30, 7));
        for row in t.rows() {
            for cell in row {
                assert!(cell.probs().iter().all(|p| (0.0..=1.0).contains(p)));
                assert!((accurate_sum(cell.probs().iter().copied()) - 1.0).abs() <= 1e-9);
            }
        }
    }
}
