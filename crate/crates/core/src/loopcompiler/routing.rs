//! Pulse-level walk through a timeline, shared by the unitary verifier and the
//! covariance simulator.
//!
//! Geometry: input pulse j reaches the VBS at bin j−1 on the external line. The
//! inner loop returns its pulse after one bin, the outer loop after N−1 bins.
//! At each bin the VPS acts on the inner pulse, then the VBS maps
//! (inner, arriving) to (inner', departing), and Switch-2 sends the departing
//! pulse to the outer loop or to the detector.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::timeline::{outer_delay, Location, ModeTrace, Switch1, Switch2, TimeBin};
use crate::error::{Error, Result};

/// Real VBS matrix acting on (inner, arriving) → (inner', departing).
///
/// With r = √(1−T), t = √T the reflection of the arriving pulse carries the
/// minus sign for T ≥ 0.5; below 0.5 the phase-inverting side flips to the
/// inner-loop reflection.
pub fn vbs_matrix(vbs_t: f64) -> [[f64; 2]; 2] {
    let t = vbs_t.sqrt();
    let r = (1.0 - vbs_t).max(0.0).sqrt();
    if vbs_t >= 0.5 {
        [[r, t], [t, -r]]
    } else {
        [[-r, t], [t, r]]
    }
}

/// Backend that carries pulse content through the loop.
pub(crate) trait Medium {
    type Reg: Copy;

    fn input(&mut self, pulse: usize) -> Self::Reg;
    fn vacuum(&mut self) -> Self::Reg;
    fn phase(&mut self, reg: Self::Reg, theta: f64);
    /// `(inner, arriving) ← m · (inner, arriving)`.
    fn mix(&mut self, inner: Self::Reg, arriving: Self::Reg, m: &[[f64; 2]; 2]);
    /// One inner round trip; `injection` marks parking into an empty loop.
    fn inner_trip(&mut self, reg: Self::Reg, injection: bool);
    fn outer_trip(&mut self, reg: Self::Reg);
    fn export(&mut self, reg: Self::Reg, label: usize);
}

#[derive(Clone, Copy)]
struct Port<R> {
    reg: R,
    /// Carries amplitude from at least one input pulse.
    live: bool,
}

/// Walks `bins` for an `n`-mode program. Any live pulse that is neither
/// exported nor accepted by Switch-1 is a routing error.
pub(crate) fn run<M: Medium>(n: usize, bins: &[TimeBin], medium: &mut M) -> Result<()> {
    let delay = outer_delay(n);
    let mut inner: Option<Port<M::Reg>> = None;
    let mut outer: BTreeMap<usize, Port<M::Reg>> = BTreeMap::new();
    let mut exported = vec![false; n];
    let last = bins.len().checked_sub(1);

    for bin in bins {
        let b = bin.index;
        let external = (b < n).then_some(b);
        let ret = outer.remove(&b);
        let arriving = match bin.switch1 {
            Switch1::Through => {
                if ret.is_some_and(|p| p.live) {
                    return Err(Error::Routing(format!("outer-loop pulse discarded by Switch-1 at bin {b}")));
                }
                external.map(|p| Port { reg: medium.input(p), live: true })
            }
            Switch1::LoopSide => {
                if let Some(p) = external {
                    return Err(Error::Routing(format!("input pulse {} blocked by Switch-1 at bin {b}", p + 1)));
                }
                ret.inspect(|p| medium.phase(p.reg, PI))
            }
        };

        if let Some(i) = inner {
            if bin.vps_theta != 0.0 {
                medium.phase(i.reg, bin.vps_theta);
            }
        }

        let t = bin.vbs_t;
        let injection = inner.is_none() && arriving.is_some() && t >= 1.0;
        let (next_inner, departing) = match (inner, arriving) {
            (None, None) => (None, None),
            (Some(i), Some(a)) => mix(medium, i, a, t),
            (Some(i), None) if t >= 1.0 => (None, Some(i)),
            (Some(i), None) if t <= 0.0 => {
                medium.phase(i.reg, PI);
                (Some(i), None)
            }
            (None, Some(a)) if t >= 1.0 => (Some(a), None),
            (None, Some(a)) if t <= 0.0 => (None, Some(a)),
            (Some(i), None) => {
                let v = Port { reg: medium.vacuum(), live: false };
                mix(medium, i, v, t)
            }
            (None, Some(a)) => {
                let v = Port { reg: medium.vacuum(), live: false };
                mix(medium, v, a, t)
            }
        };

        match (bin.switch2, departing) {
            (Switch2::Export, Some(d)) if d.live => {
                let label =
                    bin.output_mode.ok_or_else(|| Error::Routing(format!("export at bin {b} has no output label")))?;
                if std::mem::replace(&mut exported[label - 1], true) {
                    return Err(Error::Routing(format!("output label {label} exported twice")));
                }
                medium.export(d.reg, label);
            }
            (Switch2::Export, _) => {
                return Err(Error::Routing(format!("export at bin {b} carries no input pulse")));
            }
            (Switch2::Keep, Some(d)) => {
                medium.outer_trip(d.reg);
                outer.insert(b + delay, d);
            }
            (Switch2::Keep, None) => {}
        }

        inner = match next_inner {
            Some(i) if Some(b) != last => {
                medium.inner_trip(i.reg, injection);
                Some(i)
            }
            Some(i) if i.live => {
                return Err(Error::Routing("pulse left in the inner loop after the last bin".into()));
            }
            _ => None,
        };
    }

    if bins.len() < n {
        return Err(Error::Routing(format!("input pulse {} never reaches the VBS", bins.len() + 1)));
    }
    if outer.values().any(|p| p.live) {
        return Err(Error::Routing("pulse left in the outer loop after the last bin".into()));
    }
    if let Some(missing) = exported.iter().position(|e| !e) {
        return Err(Error::Routing(format!("output label {} is never exported", missing + 1)));
    }
    Ok(())
}

type PortPair<R> = (Option<Port<R>>, Option<Port<R>>);

fn mix<M: Medium>(medium: &mut M, i: Port<M::Reg>, a: Port<M::Reg>, t: f64) -> PortPair<M::Reg> {
    medium.mix(i.reg, a.reg, &vbs_matrix(t));
    let live = i.live || a.live;
    (Some(Port { reg: i.reg, live }), Some(Port { reg: a.reg, live }))
}

/// Dominant-path itinerary of every input pulse.
pub(crate) fn trace_modes(n: usize, bins: &[TimeBin]) -> Result<Vec<ModeTrace>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Pos {
        Waiting,
        Inner,
        Outer(usize),
        Done,
    }
    let delay = outer_delay(n);
    let mut pos = vec![Pos::Waiting; n];
    let mut traces: Vec<ModeTrace> = (0..n)
        .map(|_| ModeTrace { locations: Vec::with_capacity(bins.len()), output_label: 0, injection_bin: None })
        .collect();

    for bin in bins {
        let b = bin.index;
        let in_inner = (0..n).find(|&p| pos[p] == Pos::Inner);
        let returning = (0..n).find(|&p| pos[p] == Pos::Outer(b));
        let arriving = match bin.switch1 {
            Switch1::Through => (b < n).then_some(b),
            Switch1::LoopSide => returning,
        };
        let exchange = bin.vbs_t >= 0.5;
        let (next_inner, departing) = if exchange { (arriving, in_inner) } else { (in_inner, arriving) };
        if let (None, Some(p)) = (in_inner, next_inner) {
            if bin.vbs_t >= 1.0 {
                traces[p].injection_bin = Some(b);
            }
        }
        if let Some(p) = next_inner {
            pos[p] = Pos::Inner;
        }
        if let Some(p) = departing {
            pos[p] = match bin.switch2 {
                Switch2::Export => {
                    traces[p].output_label = bin.output_mode.unwrap_or(0);
                    Pos::Done
                }
                Switch2::Keep => Pos::Outer(b + delay),
            };
        }
        // Content dropped by Switch-1 stays unrouted; `run` reports it.
        for p in 0..n {
            traces[p].locations.push(match pos[p] {
                Pos::Waiting => Location::External,
                Pos::Inner => Location::Inner,
                Pos::Outer(_) => Location::Outer,
                Pos::Done => Location::Exported,
            });
        }
        if (0..n).filter(|&p| pos[p] == Pos::Inner).count() > 1 {
            return Err(Error::Routing(format!("two pulses share the inner loop at bin {b}")));
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vbs_matrix_is_orthogonal_and_flips_below_half() {
        for &t in &[0.0, 0.2, 0.5, 0.8, 1.0] {
            let m = vbs_matrix(t);
            let dot = m[0][0] * m[1][0] + m[0][1] * m[1][1];
            let n0 = m[0][0].powi(2) + m[0][1].powi(2);
            assert!(dot.abs() < 1e-15 && (n0 - 1.0).abs() < 1e-15);
            assert!((m[1][0].powi(2) - t).abs() < 1e-15, "departing share of the inner pulse is T");
        }
        assert!(vbs_matrix(0.8)[1][1] < 0.0);
        assert!(vbs_matrix(0.2)[0][0] < 0.0);
        assert_eq!(vbs_matrix(1.0), [[0.0, 1.0], [1.0, -0.0]]);
        assert_eq!(vbs_matrix(0.0), [[-1.0, 0.0], [0.0, 1.0]]);
    }
}
