//! The finite models of the experiments.
//!
//! Experiments 1–4 exist only as plots, so their masses were fitted to the
//! reference minimiser tables (see each config's `note`).

use super::model::DiscreteConfig;
use crate::error::Result;

const CONFIGS: [(&str, &str); 4] = [
    (
        "experiment1",
        include_str!("../../configs/experiment1.toml"),
    ),
    (
        "experiment2",
        include_str!("../../configs/experiment2.toml"),
    ),
    (
        "experiment3",
        include_str!("../../configs/experiment3.toml"),
    ),
    (
        "experiment4",
        include_str!("../../configs/experiment4.toml"),
    ),
];

/// Overheads `a` of the minimiser tables.
pub const TABLE_A_VALUES: [f64; 7] = [0.0, 0.1, 1.0, 2.0, 5.0, 10.0, 20.0];

/// Checked-in config of experiment `1..=4`, or the generated experiment 5.
pub fn experiment(index: usize) -> Result<DiscreteConfig> {
    match index {
        1..=4 => DiscreteConfig::from_toml(CONFIGS[index - 1].1),
        5 => Ok(discretised_normals()),
        _ => Err(crate::error::IsirError::InvalidArgument(format!(
            "experiments are numbered 1 to 5, got {index}"
        ))),
    }
}

pub fn config_text(index: usize) -> Option<&'static str> {
    CONFIGS.get(index.wrapping_sub(1)).map(|c| c.1)
}

/// 61 equally spaced states on `[−3, 3]`; π and q are the normalised
/// `N(0, 1/4)` and `N(0, 1)` densities at those states. `M = 1.9`, `m = 0.2`.
pub fn discretised_normals() -> DiscreteConfig {
    let states: Vec<f64> = (0..61).map(|i| (i as f64 - 30.0) / 10.0).collect();
    let normalise = |v: Vec<f64>| {
        let total: f64 = v.iter().sum();
        v.into_iter().map(|x| x / total).collect::<Vec<_>>()
    };
    let pi = normalise(states.iter().map(|x| (-2.0 * x * x).exp()).collect());
    let q = normalise(states.iter().map(|x| (-0.5 * x * x).exp()).collect());
    DiscreteConfig {
        name: "experiment5".into(),
        note: "discretised N(0,1/4) target and N(0,1) proposal on 61 states in [-3,3]".into(),
        states,
        pi,
        q,
        q_outside: 0.0,
        upper: Some(1.9),
        lower: Some(0.2),
    }
}
