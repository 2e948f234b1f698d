#![allow(dead_code)]

use std::path::PathBuf;

use pvf_core::miner::ContextTemplate;
use pvf_core::{ContextSet, SlotOrder, WordSchema};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// `groups` groups named `g00`, `g01`, ... and `categories` categories with
/// one word each (`w0`, `w1`, ...).
pub fn synthetic_schema(groups: usize, categories: usize) -> WordSchema {
    let groups: Vec<_> = (0..groups)
        .map(|g| serde_json::json!({"id": format!("g{g:02}"), "words": [format!("g{g:02}")]}))
        .collect();
    let cats: Vec<_> = (0..categories)
        .map(|c| serde_json::json!({"id": format!("c{c}"), "words": [format!("w{c}")]}))
        .collect();
    serde_json::from_value(serde_json::json!({"groups": groups, "categories": cats})).unwrap()
}

/// `n` distinct templates with count 1 each.
pub fn synthetic_contexts(n: usize) -> ContextSet {
    ContextSet {
        templates: (0..n)
            .map(|i| ContextTemplate::new(format!("The [X] saw item {i} and [Y]"), 1).unwrap())
            .collect(),
        mode: SlotOrder::XThenY,
    }
}

/// A random point on the simplex; sometimes sparse, sometimes a point mass.
pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    match rng.random_range(0..10) {
        0 => {
            let mut v = vec![0.0; n];
            v[rng.random_range(0..n)] = 1.0;
            v
        }
        1 => vec![1.0 / n as f64; n],
        k => {
            let mut v: Vec<f64> = (0..n)
                .map(|_| {
                    if k == 2 && rng.random_bool(0.4) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            if v.iter().all(|x| *x == 0.0) {
                v[0] = 1.0;
            }
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            // force an exact simplex by assigning the residual to the max entry
            let r = 1.0 - v.iter().sum::<f64>();
            let i = (0..n).max_by(|a, b| v[*a].total_cmp(&v[*b])).unwrap();
            v[i] += r;
            v
        }
    }
}

/// Strictly positive weights summing to one (within rounding).
pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}
