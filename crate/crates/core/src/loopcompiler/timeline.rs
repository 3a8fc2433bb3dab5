use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Default pulse spacing and inner-loop round-trip time.
pub const DEFAULT_TAU_NS: f64 = 66.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Switch1 {
    /// Accepts the outer-loop return (with a 180° phase) and blocks the input line.
    LoopSide,
    /// Accepts the input line and discards any outer-loop return.
    Through,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Switch2 {
    /// Sends the departing pulse into the outer loop.
    Keep,
    /// Sends the departing pulse to the detector.
    Export,
}

/// Whether the final diagonal phases are applied by the VPS or folded into
/// the homodyne angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalPhaseMode {
    Vps,
    MeasurementBasis,
}

/// Settings for one pulse slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBin {
    pub index: usize,
    pub switch1: Switch1,
    pub switch2: Switch2,
    /// Power fraction exchanged between the inner loop and the external path.
    pub vbs_t: f64,
    /// Phase applied to the inner-loop pulse just before it reaches the VBS.
    pub vps_theta: f64,
    /// 1-based output label of the pulse exported at this bin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_mode: Option<usize>,
}

impl TimeBin {
    /// Routing-only slot: nothing exchanged, outer return accepted.
    pub fn idle(index: usize) -> Self {
        Self {
            index,
            switch1: Switch1::LoopSide,
            switch2: Switch2::Keep,
            vbs_t: 0.0,
            vps_theta: 0.0,
            output_mode: None,
        }
    }

    pub fn time_ns(&self, tau_ns: f64) -> f64 {
        self.index as f64 * tau_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    External,
    Inner,
    Outer,
    Exported,
}

/// Dominant-path itinerary of one input pulse: a fractional VBS counts as an
/// exchange iff `vbs_t ≥ 0.5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeTrace {
    /// Location during the interval `[bin, bin + 1)`, one entry per bin.
    pub locations: Vec<Location>,
    pub output_label: usize,
    /// Bin at which the pulse was parked in an empty inner loop by a full exchange.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection_bin: Option<usize>,
}

/// Per-bin control program realizing a plan on the dual loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimeline")]
pub struct ControlTimeline {
    pub n_modes: usize,
    pub tau_ns: f64,
    pub final_phase_mode: FinalPhaseMode,
    pub bins: Vec<TimeBin>,
    /// Per-output homodyne-angle offsets, indexed by output label − 1.
    pub homodyne_offsets: Vec<f64>,
    /// Per input pulse; derived from the settings, never trusted from input.
    pub mode_trace: Vec<ModeTrace>,
}

#[derive(Deserialize)]
struct RawTimeline {
    n_modes: usize,
    #[serde(default = "default_tau")]
    tau_ns: f64,
    final_phase_mode: FinalPhaseMode,
    bins: Vec<TimeBin>,
    #[serde(default)]
    homodyne_offsets: Option<Vec<f64>>,
}

fn default_tau() -> f64 {
    DEFAULT_TAU_NS
}

impl TryFrom<RawTimeline> for ControlTimeline {
    type Error = Error;

    fn try_from(raw: RawTimeline) -> Result<Self> {
        let offsets = raw.homodyne_offsets.unwrap_or_else(|| vec![0.0; raw.n_modes]);
        ControlTimeline::new(raw.n_modes, raw.tau_ns, raw.final_phase_mode, raw.bins, offsets)
    }
}

impl ControlTimeline {
    /// Validates the settings and derives the mode trace.
    pub fn new(
        n_modes: usize,
        tau_ns: f64,
        final_phase_mode: FinalPhaseMode,
        bins: Vec<TimeBin>,
        homodyne_offsets: Vec<f64>,
    ) -> Result<Self> {
        if n_modes < 1 {
            return Err(Error::Dimension("timeline needs at least one mode".into()));
        }
        if !(tau_ns.is_finite() && tau_ns > 0.0) {
            return Err(Error::InvalidParameter(format!("tau_ns must be positive, got {tau_ns}")));
        }
        if homodyne_offsets.len() != n_modes || homodyne_offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::Dimension(format!("expected {n_modes} finite homodyne offsets")));
        }
        for (i, b) in bins.iter().enumerate() {
            if b.index != i {
                return Err(Error::InvalidParameter(format!("bin {i} carries index {}", b.index)));
            }
            if !(0.0..=1.0).contains(&b.vbs_t) {
                return Err(Error::InvalidParameter(format!("bin {i}: vbs_T {} outside [0, 1]", b.vbs_t)));
            }
            if !(0.0..TAU).contains(&b.vps_theta) {
                return Err(Error::InvalidParameter(format!("bin {i}: vps_theta {} outside [0, 2π)", b.vps_theta)));
            }
            match (b.switch2, b.output_mode) {
                (Switch2::Export, Some(l)) if (1..=n_modes).contains(&l) => {}
                (Switch2::Export, _) => {
                    return Err(Error::InvalidParameter(format!(
                        "bin {i}: export needs an output label in 1..={n_modes}"
                    )))
                }
                (Switch2::Keep, Some(_)) => {
                    return Err(Error::InvalidParameter(format!("bin {i}: output label on a keep bin")))
                }
                (Switch2::Keep, None) => {}
            }
        }
        let mode_trace = super::routing::trace_modes(n_modes, &bins)?;
        Ok(Self { n_modes, tau_ns, final_phase_mode, bins, homodyne_offsets, mode_trace })
    }

    /// Every VBS at zero exchange: input pulse j leaves untouched as output j.
    pub fn bypass(n_modes: usize) -> Result<Self> {
        let bins = (0..n_modes)
            .map(|i| TimeBin {
                index: i,
                switch1: Switch1::Through,
                switch2: Switch2::Export,
                vbs_t: 0.0,
                vps_theta: 0.0,
                output_mode: Some(i + 1),
            })
            .collect();
        Self::new(n_modes, DEFAULT_TAU_NS, FinalPhaseMode::Vps, bins, vec![0.0; n_modes])
    }

    pub fn with_tau(mut self, tau_ns: f64) -> Result<Self> {
        if !(tau_ns.is_finite() && tau_ns > 0.0) {
            return Err(Error::InvalidParameter(format!("tau_ns must be positive, got {tau_ns}")));
        }
        self.tau_ns = tau_ns;
        Ok(self)
    }

    /// Outer-loop round-trip time in bins.
    pub fn outer_delay(&self) -> usize {
        outer_delay(self.n_modes)
    }

    /// Fixed-width control table with one row per bin.
    pub fn control_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4}  {:>9}  {:<9}  {:<10}  {:>8}  {:>9}",
            "bin", "time_ns", "switch1", "switch2", "vbs_T", "vps_theta"
        );
        for b in &self.bins {
            let s1 = match b.switch1 {
                Switch1::LoopSide => "loop_side",
                Switch1::Through => "through",
            };
            let s2 = match (b.switch2, b.output_mode) {
                (Switch2::Export, Some(l)) => format!("export({l})"),
                _ => "keep".to_string(),
            };
            let _ = writeln!(
                out,
                "{:>4}  {:>9.1}  {:<9}  {:<10}  {:>8.6}  {:>9.6}",
                b.index,
                b.time_ns(self.tau_ns),
                s1,
                s2,
                b.vbs_t,
                b.vps_theta
            );
        }
        out
    }
}

pub(crate) fn outer_delay(n_modes: usize) -> usize {
    n_modes.saturating_sub(1).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bypass_exports_in_order() {
        let t = ControlTimeline::bypass(3).unwrap();
        assert_eq!(t.bins.len(), 3);
        for (j, tr) in t.mode_trace.iter().enumerate() {
            assert_eq!(tr.output_label, j + 1);
            assert!(!tr.locations.contains(&Location::Inner));
            assert!(!tr.locations.contains(&Location::Outer));
        }
    }

    #[test]
    fn validation_rejects_bad_settings() {
        let mut bins = ControlTimeline::bypass(2).unwrap().bins;
        bins[0].vbs_t = 1.5;
        assert!(ControlTimeline::new(2, 66.0, FinalPhaseMode::Vps, bins.clone(), vec![0.0; 2]).is_err());
        bins[0].vbs_t = 0.0;
        bins[0].vps_theta = TAU;
        assert!(ControlTimeline::new(2, 66.0, FinalPhaseMode::Vps, bins.clone(), vec![0.0; 2]).is_err());
        bins[0].vps_theta = 0.0;
        bins[1].output_mode = None;
        assert!(ControlTimeline::new(2, 66.0, FinalPhaseMode::Vps, bins, vec![0.0; 2]).is_err());
    }

    #[test]
    fn control_table_has_header_and_rows() {
        let t = ControlTimeline::bypass(2).unwrap();
        let table = t.control_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("vbs_T") && lines[0].contains("time_ns"));
        assert!(lines[2].contains("66.0") && lines[2].contains("export(2)"));
    }

    #[test]
    fn json_rederives_trace() {
        let t = ControlTimeline::bypass(3).unwrap();
        let mut value = serde_json::to_value(&t).unwrap();
        value["mode_trace"] = serde_json::Value::Null;
        let back: ControlTimeline = serde_json::from_value(value).unwrap();
        assert_eq!(back, t);
    }
}
