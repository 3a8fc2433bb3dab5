//! The nine three-mode operations, their plans and their target nullifiers.
//!
//! Plans list the three interactions `T⁽¹⁾₁₂`, `T⁽¹⁾₁₃`, `T⁽²⁾₁₂` as (ω, φ).
//! Switched-off interactions are full exchanges (ω = 0). Entangling
//! parameters come from `scripts/derive_presets.py`, which minimizes the
//! x-quadrature leakage of each target's nullifiers for p-squeezed inputs;
//! the GHZ presets pin their first active exchange fraction to 1/3.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::decomp::{reconstruct, DecompositionPlan, TParams};
use crate::error::{Error, Result};
use crate::linops::UnitaryMatrix;
use crate::loopcompiler::{compile, ControlTimeline, FinalPhaseMode};
use crate::metrics::{QuadratureCombo, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Op1,
    Op2i,
    Op2ii,
    Op2iii,
    Op3i,
    Op3ii,
    Op3iii,
    Op4i,
    Op4ii,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutputState {
    IndividualSqueezed,
    /// EPR pair on two output modes plus a squeezed spectator (1-based).
    Epr {
        pair: (usize, usize),
        spectator: usize,
    },
    Ghz,
    TriangleCluster,
    LinearCluster,
}

impl fmt::Display for OutputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IndividualSqueezed => write!(f, "individual squeezed vacua (1, 2, 3)"),
            Self::Epr { pair: (a, b), spectator } => {
                write!(f, "EPR state ({a}, {b}), squeezed vacuum ({spectator})")
            }
            Self::Ghz => write!(f, "GHZ state (1, 2, 3)"),
            Self::TriangleCluster => write!(f, "triangle cluster state (1, 2, 3)"),
            Self::LinearCluster => write!(f, "linear cluster state (1, 2, 3)"),
        }
    }
}

/// What a preset should produce from three p-squeezed inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDescription {
    pub preset: Preset,
    pub output_state: OutputState,
    pub target: UnitaryMatrix,
    /// Combinations whose variance vanishes with infinite input squeezing.
    pub nullifiers: Vec<QuadratureCombo>,
}

type Interaction = Option<(f64, f64)>;

struct Constants {
    interactions: [Interaction; 3],
    alphas: [f64; 3],
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::Op1,
        Preset::Op2i,
        Preset::Op2ii,
        Preset::Op2iii,
        Preset::Op3i,
        Preset::Op3ii,
        Preset::Op3iii,
        Preset::Op4i,
        Preset::Op4ii,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Op1 => "op1",
            Self::Op2i => "op2i",
            Self::Op2ii => "op2ii",
            Self::Op2iii => "op2iii",
            Self::Op3i => "op3i",
            Self::Op3ii => "op3ii",
            Self::Op3iii => "op3iii",
            Self::Op4i => "op4i",
            Self::Op4ii => "op4ii",
        }
    }

    /// Label in the style "2-i".
    pub fn operation_label(self) -> &'static str {
        match self {
            Self::Op1 => "1",
            Self::Op2i => "2-i",
            Self::Op2ii => "2-ii",
            Self::Op2iii => "2-iii",
            Self::Op3i => "3-i",
            Self::Op3ii => "3-ii",
            Self::Op3iii => "3-iii",
            Self::Op4i => "4-i",
            Self::Op4ii => "4-ii",
        }
    }

    pub fn is_entangling(self) -> bool {
        self != Self::Op1
    }

    pub fn output_state(self) -> OutputState {
        match self {
            Self::Op1 => OutputState::IndividualSqueezed,
            Self::Op2i => OutputState::Epr { pair: (1, 3), spectator: 2 },
            Self::Op2ii => OutputState::Epr { pair: (2, 3), spectator: 1 },
            Self::Op2iii => OutputState::Epr { pair: (1, 2), spectator: 3 },
            Self::Op3i | Self::Op3ii | Self::Op3iii => OutputState::Ghz,
            Self::Op4i => OutputState::TriangleCluster,
            Self::Op4ii => OutputState::LinearCluster,
        }
    }

    // Frozen optimizer output; values near π/2 or π are not exact constants.
    #[allow(clippy::approx_constant)]
    fn constants(self) -> Constants {
        let c = |interactions, alphas| Constants { interactions, alphas };
        match self {
            Self::Op1 => c([None, None, None], [PI, PI, PI]),
            Self::Op2i => c(
                [Some((2.356194490192345, 1.5707963267948966)), None, None],
                [0.35284188448667975, 3.141592653589793, 5.930343422692906],
            ),
            Self::Op2ii => c(
                [None, Some((5.497787143782138, 1.5707963267948966)), None],
                [6.283185307179586, 2.802326438305505, 3.4808588688740816],
            ),
            Self::Op2iii => c(
                [None, None, Some((2.356194490192345, 1.5707963267948966))],
                [4.655252925916963, 4.769525034852417, 3.141592653589793],
            ),
            Self::Op3i => c(
                [Some((0.9553166181245093, 1.5707962996928146)), Some((0.7853981633974484, 3.1415927077939574)), None],
                [4.712389007486772, 1.5707963267948966, 1.5707963267948966],
            ),
            Self::Op3ii => c(
                [None, Some((0.9553166181245093, 4.712388956692969)), Some((5.497787143782138, 3.1415927009732347))],
                [4.71238898038469, 4.71238898038469, 1.5707963504866176],
            ),
            Self::Op3iii => c(
                [Some((0.9553166181245093, 1.5707962458515707)), None, Some((0.7853981633974474, 1.5707964077382224))],
                [3.141592734533119, 3.141592734533119, 6.283185145292935],
            ),
            Self::Op4i => c(
                [
                    Some((0.7704197213179927, 1.9884131518185295)),
                    Some((0.35516731777607724, 0.9629522040441661)),
                    Some((2.068570983415108, 1.5846521414404584)),
                ],
                [0.7626274967215146, 4.008283048985037, 2.4430519961855897],
            ),
            Self::Op4ii => c(
                [
                    Some((6.043338778322699, 0.052065370225595764)),
                    Some((0.9410646892532639, 4.571170880333977)),
                    Some((5.51219651330774, 0.33149659522407404)),
                ],
                [0.04499180322119208, 0.053351871245532756, 4.856389171316922],
            ),
        }
    }

    /// Number of interactions that are not full exchanges.
    pub fn active_interactions(self) -> usize {
        self.constants().interactions.iter().filter(|i| i.is_some()).count()
    }

    pub fn plan(self) -> DecompositionPlan {
        let k = self.constants();
        let t = |m: usize, i: Interaction| {
            let (omega, phi) = i.unwrap_or((0.0, 0.0));
            TParams { m, omega, phi }
        };
        let layers = vec![vec![t(2, k.interactions[0]), t(3, k.interactions[1])], vec![t(2, k.interactions[2])]];
        DecompositionPlan::new(3, layers, k.alphas.to_vec()).expect("preset plans are well formed")
    }

    pub fn target(self) -> UnitaryMatrix {
        reconstruct(&self.plan())
    }

    /// Nullifiers of the ideal output state.
    pub fn nullifiers(self) -> Vec<QuadratureCombo> {
        let combo = |terms: &[(f64, Q)]| QuadratureCombo::from_terms(3, terms).expect("valid combination");
        match self.output_state() {
            OutputState::IndividualSqueezed => (1..=3).map(|m| combo(&[(1.0, Q::P(m))])).collect(),
            OutputState::Epr { pair: (a, b), spectator } => vec![
                combo(&[(1.0, Q::X(a)), (-1.0, Q::X(b))]),
                combo(&[(1.0, Q::P(a)), (1.0, Q::P(b))]),
                combo(&[(1.0, Q::P(spectator))]),
            ],
            OutputState::Ghz => vec![
                combo(&[(1.0, Q::X(1)), (-1.0, Q::X(2))]),
                combo(&[(1.0, Q::X(2)), (-1.0, Q::X(3))]),
                combo(&[(1.0, Q::P(1)), (1.0, Q::P(2)), (1.0, Q::P(3))]),
            ],
            OutputState::TriangleCluster => vec![
                combo(&[(1.0, Q::P(1)), (-1.0, Q::X(2)), (-1.0, Q::X(3))]),
                combo(&[(1.0, Q::P(2)), (-1.0, Q::X(1)), (-1.0, Q::X(3))]),
                combo(&[(1.0, Q::P(3)), (-1.0, Q::X(1)), (-1.0, Q::X(2))]),
            ],
            OutputState::LinearCluster => vec![
                combo(&[(1.0, Q::P(1)), (-1.0, Q::X(3))]),
                combo(&[(1.0, Q::P(2)), (-1.0, Q::X(3))]),
                combo(&[(1.0, Q::P(3)), (-1.0, Q::X(1)), (-1.0, Q::X(2))]),
            ],
        }
    }

    /// Pairs whose variance sum certifies full inseparability below 4.
    pub fn inseparability_pairs(self) -> Vec<(QuadratureCombo, QuadratureCombo)> {
        let n = self.nullifiers();
        match self.output_state() {
            OutputState::IndividualSqueezed => Vec::new(),
            OutputState::Epr { .. } => vec![(n[0].clone(), n[1].clone())],
            OutputState::Ghz => vec![(n[0].clone(), n[2].clone()), (n[1].clone(), n[2].clone())],
            OutputState::TriangleCluster | OutputState::LinearCluster => {
                vec![(n[0].clone(), n[2].clone()), (n[1].clone(), n[2].clone())]
            }
        }
    }

    pub fn describe(self) -> TargetDescription {
        TargetDescription {
            preset: self,
            output_state: self.output_state(),
            target: self.target(),
            nullifiers: self.nullifiers(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Measurement-basis timeline of a preset together with its target.
pub fn preset_timeline(name: &str) -> Result<(ControlTimeline, TargetDescription)> {
    let preset: Preset = name.parse()?;
    let timeline = compile(&preset.plan(), FinalPhaseMode::MeasurementBasis)?;
    Ok((timeline, preset.describe()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{simulate, LossModel};
    use crate::loopcompiler::timeline_to_unitary;
    use crate::metrics::combo_variance;

    #[test]
    fn names_round_trip_and_unknown_is_rejected() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!(matches!(preset_timeline("op5"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn active_interaction_counts() {
        let counts: Vec<usize> = Preset::ALL.iter().map(|p| p.active_interactions()).collect();
        assert_eq!(counts, vec![0, 1, 1, 1, 2, 2, 2, 3, 3]);
    }

    #[test]
    fn ghz_presets_use_one_third_then_one_half() {
        for p in [Preset::Op3i, Preset::Op3ii, Preset::Op3iii] {
            let fractions: Vec<f64> =
                p.plan().interactions().map(|(_, t)| t.exchange_fraction()).filter(|&f| f < 1.0 - 1e-12).collect();
            assert_eq!(fractions.len(), 2);
            assert!((fractions[0] - 1.0 / 3.0).abs() < 1e-12);
            assert!((fractions[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn timelines_realize_their_targets() {
        for p in Preset::ALL {
            let (t, d) = preset_timeline(p.name()).unwrap();
            let (u, _) = timeline_to_unitary(&t).unwrap();
            assert!(u.distance(&d.target) < 1e-9, "{p}");
        }
    }

    #[test]
    fn nullifiers_vanish_with_strong_squeezing() {
        for p in Preset::ALL {
            let (t, d) = preset_timeline(p.name()).unwrap();
            let lm = LossModel::lossless(30.0);
            let g = simulate(&t, &lm.default_inputs(3), &lm).unwrap();
            for c in &d.nullifiers {
                let v = combo_variance(&g, c).unwrap();
                assert!(v < 0.01, "{p} {}: {v}", c.label);
            }
        }
    }
}
