//! Independent recomposition of a timeline into the unitary it implements.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::routing::{run, Medium};
use super::timeline::{ControlTimeline, FinalPhaseMode, Location};
use crate::error::{Error, Result};
use crate::linops::{unitarity_deviation, CMatrix, UnitaryMatrix};

/// Each register holds the row of input-mode coefficients it carries.
struct AmplitudeMedium {
    n: usize,
    rows: Vec<DVector<Complex64>>,
    outputs: Vec<Option<DVector<Complex64>>>,
}

impl Medium for AmplitudeMedium {
    type Reg = usize;

    fn input(&mut self, pulse: usize) -> usize {
        let mut row = DVector::zeros(self.n);
        row[pulse] = Complex64::new(1.0, 0.0);
        self.rows.push(row);
        self.rows.len() - 1
    }

    fn vacuum(&mut self) -> usize {
        self.rows.push(DVector::zeros(self.n));
        self.rows.len() - 1
    }

    fn phase(&mut self, reg: usize, theta: f64) {
        self.rows[reg] *= Complex64::from_polar(1.0, theta);
    }

    fn mix(&mut self, inner: usize, arriving: usize, m: &[[f64; 2]; 2]) {
        let c = |x: f64| Complex64::new(x, 0.0);
        let a = self.rows[inner].clone();
        let b = self.rows[arriving].clone();
        self.rows[inner] = &a * c(m[0][0]) + &b * c(m[0][1]);
        self.rows[arriving] = a * c(m[1][0]) + b * c(m[1][1]);
    }

    fn inner_trip(&mut self, _: usize, _: bool) {}

    fn outer_trip(&mut self, _: usize) {}

    fn export(&mut self, reg: usize, label: usize) {
        self.outputs[label - 1] = Some(self.rows[reg].clone());
    }
}

/// Unitary implemented by `t`, with output rows indexed by label.
///
/// Switch-2's common 180° on every exported pulse is returned as
/// `global_phase` and left out of U. In measurement-basis mode the homodyne
/// offsets are undone on each output row.
pub fn timeline_to_unitary(t: &ControlTimeline) -> Result<(UnitaryMatrix, f64)> {
    let n = t.n_modes;
    let mut medium = AmplitudeMedium { n, rows: Vec::new(), outputs: vec![None; n] };
    run(n, &t.bins, &mut medium)?;

    let mut u = CMatrix::zeros(n, n);
    for (label, row) in medium.outputs.into_iter().enumerate() {
        let row = row.ok_or_else(|| Error::Routing(format!("output label {} is never exported", label + 1)))?;
        let correction = match t.final_phase_mode {
            FinalPhaseMode::MeasurementBasis => Complex64::from_polar(1.0, -t.homodyne_offsets[label]),
            FinalPhaseMode::Vps => Complex64::new(1.0, 0.0),
        };
        for j in 0..n {
            u[(label, j)] = row[j] * correction;
        }
    }
    let deviation = unitarity_deviation(&u)?;
    if deviation > 1e-8 {
        return Err(Error::Numerical(format!("timeline composes to a non-unitary map ({deviation:.3e})")));
    }
    Ok((UnitaryMatrix::from_trusted_unchecked(u), PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeTrips {
    /// Charged inner-loop round trips.
    pub inner_trips: usize,
    pub outer_trips: usize,
    /// Uncharged parking trips into an empty inner loop.
    pub injection_trips: usize,
}

/// Loop round trips per output label, from the dominant-path trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTripCounts {
    pub per_mode: Vec<ModeTrips>,
}

impl RoundTripCounts {
    /// Counts for output label `label` (1-based).
    pub fn mode(&self, label: usize) -> ModeTrips {
        self.per_mode[label - 1]
    }
}

pub fn round_trip_counts(t: &ControlTimeline) -> RoundTripCounts {
    let mut per_mode = vec![ModeTrips::default(); t.n_modes];
    for trace in &t.mode_trace {
        if trace.output_label == 0 {
            continue;
        }
        let mut trips = ModeTrips::default();
        let mut outer_bins = 0;
        for (b, &loc) in trace.locations.iter().enumerate() {
            match loc {
                Location::Inner if trace.injection_bin == Some(b) => trips.injection_trips += 1,
                Location::Inner => trips.inner_trips += 1,
                Location::Outer => outer_bins += 1,
                _ => {}
            }
        }
        // Every outer trip occupies exactly one delay's worth of bins.
        trips.outer_trips = outer_bins / t.outer_delay();
        per_mode[trace.output_label - 1] = trips;
    }
    RoundTripCounts { per_mode }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopcompiler::timeline::{Switch1, Switch2, TimeBin};

    #[test]
    fn bypass_is_identity() {
        let t = ControlTimeline::bypass(4).unwrap();
        let (u, phase) = timeline_to_unitary(&t).unwrap();
        assert!(u.distance(&UnitaryMatrix::identity(4)) < 1e-15);
        assert_eq!(phase, PI);
        assert!(round_trip_counts(&t).per_mode.iter().all(|m| *m == ModeTrips::default()));
    }

    #[test]
    fn stranded_pulse_is_a_routing_error() {
        let mut t = ControlTimeline::bypass(2).unwrap();
        t.bins[1].switch1 = Switch1::LoopSide;
        assert!(matches!(timeline_to_unitary(&t), Err(Error::Routing(_))));

        // Park input 1 and never unload it.
        let bins = vec![
            TimeBin {
                index: 0,
                switch1: Switch1::Through,
                switch2: Switch2::Keep,
                vbs_t: 1.0,
                vps_theta: 0.0,
                output_mode: None,
            },
            TimeBin {
                index: 1,
                switch1: Switch1::Through,
                switch2: Switch2::Export,
                vbs_t: 0.0,
                vps_theta: 0.0,
                output_mode: Some(2),
            },
        ];
        let t = ControlTimeline::new(2, 66.0, FinalPhaseMode::Vps, bins, vec![0.0; 2]).unwrap();
        assert!(matches!(timeline_to_unitary(&t), Err(Error::Routing(_))));
    }
}
