//! Fixtures shared by the criterion benches.

use gbh_core::simulator::{EffectSize, Procedure, SimConfig};
use gbh_core::GroupedPValues;

/// Deterministic p-values spread over (0, 1) with a cluster of small ones.
pub fn spread_pvalues(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| {
            let u = (i as f64 + 0.5) / m as f64;
            if i % 10 == 0 {
                u * 1e-3
            } else {
                u
            }
        })
        .collect()
}

pub fn grouped(m: usize, g: usize) -> GroupedPValues {
    let labels: Vec<usize> = (0..m).map(|i| i % g).collect();
    GroupedPValues::from_labels(spread_pvalues(m), &labels).expect("valid fixture")
}

pub fn desk_config(replications: usize) -> SimConfig {
    SimConfig {
        nonnull_counts: vec![10; 4],
        effect_mu: EffectSize::Common(2.5),
        procedure: Procedure::Gbh1,
        replications,
        ..SimConfig::default()
    }
}
