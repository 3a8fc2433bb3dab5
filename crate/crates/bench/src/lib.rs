//! Deterministic fixtures shared by the benchmarks.

use dualloop::decomp::{reconstruct, DecompositionPlan, TParams};
use dualloop::linops::UnitaryMatrix;

/// A plan with every interaction active and parameters spread over (0, π).
pub fn fixture_plan(n: usize) -> DecompositionPlan {
    let layers = (1..n)
        .map(|k| {
            (2..=n - k + 1)
                .map(|m| TParams { m, omega: 0.2 + 0.37 * ((k * n + m) % 7) as f64, phi: 0.9 * (k + m) as f64 % 6.0 })
                .collect()
        })
        .collect();
    let alphas = (0..n).map(|j| 0.7 * j as f64 % 6.0).collect();
    DecompositionPlan::new(n, layers, alphas).expect("fixture plan is well formed")
}

pub fn fixture_unitary(n: usize) -> UnitaryMatrix {
    reconstruct(&fixture_plan(n))
}
