//! Metrics report written by `run`.

use serde::Serialize;
use std::fmt::Write as _;

use dualloop::loopcompiler::RoundTripCounts;
use dualloop::metrics::InseparabilityEntry;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn of(cfg: &RunConfig) -> Self {
        Self { version: env!("CARGO_PKG_VERSION"), seed: cfg.seed, config_hash: cfg.hash() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NullifierValue {
    pub label: String,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub bases: Vec<String>,
    pub samples_per_basis: usize,
    /// Largest |Γ̂ − Γ| element against the simulated covariance.
    pub max_element_error: f64,
    /// Sampling noise may break physicality; it is reported, not enforced.
    pub physical: bool,
    pub min_uncertainty_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub config: RunConfig,
    pub operation: String,
    pub output_state: String,
    pub n_modes: usize,
    pub n_bins: usize,
    pub duration_ns: f64,
    /// Against the lossless output at the same input squeezing.
    pub fidelity: f64,
    pub inseparability: Vec<InseparabilityEntry>,
    pub all_inseparable: Option<bool>,
    pub nullifiers: Vec<NullifierValue>,
    pub round_trips: RoundTripCounts,
    pub estimate: Option<EstimateSummary>,
}

impl RunReport {
    /// Plain-text table in the layout operation / output state / fidelity / combos.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:<42} {:>8}  inseparability", "operation", "output state", "fidelity");
        let first = format!("{:<10} {:<42} {:>8.4}", self.operation, self.output_state, self.fidelity);
        if self.inseparability.is_empty() {
            let _ = writeln!(out, "{first}  -");
        }
        for (i, e) in self.inseparability.iter().enumerate() {
            let lead = if i == 0 { first.clone() } else { " ".repeat(first.len()) };
            let verdict = if e.passes { "pass" } else { "fail" };
            let _ = writeln!(out, "{lead}  {:<24} {:>7.4} < {} {verdict}", e.label, e.value, e.threshold);
        }
        let _ = writeln!(out);
        for n in &self.nullifiers {
            let _ = writeln!(out, "Var({}) = {:.4}", n.label, n.variance);
        }
        if let Some(e) = &self.estimate {
            let _ = writeln!(
                out,
                "estimate: {} bases x {} samples, max element error {:.4}, physical {}",
                e.bases.len(),
                e.samples_per_basis,
                e.max_element_error,
                e.physical
            );
        }
        let _ = writeln!(
            out,
            "version {}  seed {}  config {}",
            self.provenance.version, self.provenance.seed, self.provenance.config_hash
        );
        out
    }
}
