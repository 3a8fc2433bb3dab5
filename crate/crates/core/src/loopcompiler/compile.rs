//! Plan → timeline synthesis.
//!
//! Slot 1 is the pulse resident in the inner loop; slot m ≥ 2 is the pulse
//! that departs the VBS when `T₁ₘ` is realized. Each slot carries a phase
//! frame `f` with physical amplitude = e^{if} × logical amplitude. The VPS
//! angle of every interaction bin is chosen so that the VBS output equals the
//! target block up to per-slot phases, which are then absorbed into the frames.
//!
//! Bin layout for N modes (outer delay N−1):
//! - bin 0 parks input 1 in the inner loop with a full exchange;
//! - layer k, slot m sits at bin 1 + (k−1)(N−1) + (m−2);
//! - inactive slots of a layer use `vbs_T = 0`.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::routing::vbs_matrix;
use super::timeline::{ControlTimeline, FinalPhaseMode, Switch1, Switch2, TimeBin, DEFAULT_TAU_NS};
use crate::decomp::{DecompositionPlan, TParams};
use crate::error::{Error, Result};
use crate::linops::wrap_angle;

/// Amplitudes below this are treated as switched-off couplings.
const EDGE_TOL: f64 = 1e-12;

/// VBS and VPS settings for one interaction plus the outgoing frames.
struct Realization {
    vbs_t: f64,
    vps_theta: f64,
    inner_frame: f64,
    departing_frame: f64,
}

/// Target block of `T₁ₘ⁻¹` on (1, m).
fn inverse_block(p: &TParams) -> [[Complex64; 2]; 2] {
    let (s, c) = p.omega.sin_cos();
    let e = Complex64::from_polar(1.0, -p.phi);
    [[e * s, Complex64::new(c, 0.0)], [-e * c, Complex64::new(s, 0.0)]]
}

fn snapped_transmissivity(p: &TParams) -> f64 {
    let (s, c) = p.omega.sin_cos();
    if c.abs() < EDGE_TOL {
        0.0
    } else if s.abs() < EDGE_TOL {
        1.0
    } else {
        c * c
    }
}

fn ratio_phase(num: Complex64, den: Complex64) -> f64 {
    (num / den).arg()
}

fn realize(p: &TParams, inner_frame: f64, arriving_frame: f64) -> Realization {
    let vbs_t = snapped_transmissivity(p);
    let m = vbs_matrix(vbs_t);
    let b = inverse_block(p);
    let v = Complex64::from_polar(1.0, arriving_frame);
    let (s, c) = p.omega.sin_cos();

    let vps_theta = if vbs_t > 0.0 && vbs_t < 1.0 {
        let u = v * m[0][1] * s * Complex64::from_polar(1.0, -p.phi) / (c * m[0][0]);
        wrap_angle(u.arg() - inner_frame)
    } else {
        0.0
    };
    let u = Complex64::from_polar(1.0, inner_frame + vps_theta);
    let pm = [[u * m[0][0], v * m[0][1]], [u * m[1][0], v * m[1][1]]];
    let pick = |row: usize| {
        let k = if b[row][0].norm() >= b[row][1].norm() { 0 } else { 1 };
        ratio_phase(pm[row][k], b[row][k])
    };
    Realization { vbs_t, vps_theta, inner_frame: pick(0), departing_frame: pick(1) }
}

/// Synthesizes the control program for `plan`.
pub fn compile(plan: &DecompositionPlan, mode: FinalPhaseMode) -> Result<ControlTimeline> {
    let n = plan.dim;
    if n < 2 {
        return Err(Error::Dimension(format!("the dual loop needs N ≥ 2, got {n}")));
    }
    let delay = n - 1;
    let layer_bin = |k: usize, m: usize| 1 + (k - 1) * delay + (m - 2);
    let last_layer_end = layer_bin(n - 1, n);
    let total = match mode {
        FinalPhaseMode::MeasurementBasis => layer_bin(n - 1, 2) + 2,
        FinalPhaseMode::Vps => last_layer_end + 1 + n,
    };
    // The last measurement-basis bin unloads slot 1 instead of idling.
    let layer_limit = match mode {
        FinalPhaseMode::MeasurementBasis => total - 1,
        FinalPhaseMode::Vps => total,
    };
    let mut bins: Vec<TimeBin> = (0..total).map(TimeBin::idle).collect();
    let mut frame = vec![0.0f64; n + 1];
    let mut offsets = vec![0.0; n];

    bins[0].switch1 = Switch1::Through;
    bins[0].vbs_t = 1.0;

    for k in 1..n {
        for m in 2..=n {
            let b = layer_bin(k, m);
            if b >= layer_limit {
                continue;
            }
            let active = m <= n - k + 1;
            let present = active || mode == FinalPhaseMode::Vps;
            let params = if active { plan.layers[k - 1][m - 2] } else { TParams::identity(m) };
            if k == 1 {
                bins[b].switch1 = Switch1::Through;
            } else if present {
                frame[m] += PI;
            }
            let r = realize(&params, frame[1], frame[m]);
            bins[b].vbs_t = r.vbs_t;
            bins[b].vps_theta = r.vps_theta;
            frame[1] = r.inner_frame;
            if present {
                frame[m] = r.departing_frame;
            }
            if mode == FinalPhaseMode::MeasurementBasis && active && k == n - m + 1 {
                bins[b].switch2 = Switch2::Export;
                bins[b].output_mode = Some(m);
                offsets[m - 1] = wrap_angle(frame[m] - plan.alphas[m - 1]);
            }
        }
    }

    match mode {
        FinalPhaseMode::MeasurementBasis => {
            let b = total - 1;
            bins[b].vbs_t = 1.0;
            bins[b].vps_theta = 0.0;
            bins[b].switch2 = Switch2::Export;
            bins[b].output_mode = Some(1);
            offsets[0] = wrap_angle(frame[1] - plan.alphas[0]);
        }
        FinalPhaseMode::Vps => {
            // Export chain: slot j leaves at bin F + j − 1 while slot j + 1 takes its place.
            let first = last_layer_end + 1;
            for j in 1..=n {
                let b = first + j - 1;
                bins[b].vbs_t = 1.0;
                bins[b].vps_theta = wrap_angle(plan.alphas[j - 1] - frame[j]);
                bins[b].switch2 = Switch2::Export;
                bins[b].output_mode = Some(j);
                if j < n {
                    frame[j + 1] += PI;
                }
            }
        }
    }

    ControlTimeline::new(n, DEFAULT_TAU_NS, mode, bins, offsets)
}
