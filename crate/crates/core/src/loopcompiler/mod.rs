//! Dual-loop scheduling: compiles a decomposition plan into per-bin switch,
//! VBS and VPS settings, and recomposes any timeline back into a unitary.
//!
//! `vbs_T` is the power fraction exchanged between the inner loop and the
//! external/outer path. `vbs_T = 0` therefore bypasses the inner loop and
//! skips an interaction; `vbs_T = 1` swaps the inner pulse with the arriving
//! one. A full-swap plan (every ω = 0) is the pure rearrangement schedule;
//! the all-identity plan compiles to skips instead.

mod compile;
pub(crate) mod routing;
mod timeline;
mod verify;

pub use compile::compile;
pub use routing::vbs_matrix;
pub use timeline::{ControlTimeline, FinalPhaseMode, Location, ModeTrace, Switch1, Switch2, TimeBin, DEFAULT_TAU_NS};
pub use verify::{round_trip_counts, timeline_to_unitary, ModeTrips, RoundTripCounts};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{decompose, reconstruct, DecompositionPlan, TParams};
    use crate::linops::UnitaryMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const MODES: [FinalPhaseMode; 2] = [FinalPhaseMode::MeasurementBasis, FinalPhaseMode::Vps];

    fn full_swap_plan(n: usize, alpha: f64) -> DecompositionPlan {
        let layers = (1..n).map(|k| (2..=n - k + 1).map(|m| TParams { m, omega: 0.0, phi: 0.0 }).collect()).collect();
        DecompositionPlan::new(n, layers, vec![alpha; n]).unwrap()
    }

    #[test]
    fn compiled_random_plans_reproduce_target_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..=5 {
            for _ in 0..10 {
                let u = UnitaryMatrix::haar(n, &mut rng);
                let plan = decompose(&u).unwrap();
                for mode in MODES {
                    let t = compile(&plan, mode).unwrap();
                    let (v, phase) = timeline_to_unitary(&t).unwrap();
                    assert!(v.distance(&u) < 1e-9, "n={n} {mode:?}: {}", v.distance(&u));
                    assert_eq!(phase, std::f64::consts::PI);
                }
            }
        }
    }

    #[test]
    fn full_swap_schedule_is_a_signed_permutation_with_one_extra_outer_trip() {
        let t = compile(&full_swap_plan(3, std::f64::consts::PI), FinalPhaseMode::MeasurementBasis).unwrap();
        let (u, _) = timeline_to_unitary(&t).unwrap();
        for i in 0..3 {
            let moduli: Vec<f64> = (0..3).map(|j| u.matrix()[(i, j)].norm()).collect();
            assert_eq!(moduli.iter().filter(|&&m| (m - 1.0).abs() < 1e-12).count(), 1);
            assert_eq!(moduli.iter().filter(|&&m| m < 1e-12).count(), 2);
        }
        let switched: Vec<f64> = t.bins[1..4].iter().map(|b| b.vbs_t).collect();
        assert_eq!(switched, vec![1.0, 1.0, 1.0]);

        let counts = round_trip_counts(&t);
        assert_eq!(counts.mode(1), ModeTrips { inner_trips: 1, outer_trips: 1, injection_trips: 1 });
        assert_eq!(counts.mode(2), ModeTrips { inner_trips: 1, outer_trips: 0, injection_trips: 0 });
        assert_eq!(counts.mode(3), ModeTrips { inner_trips: 1, outer_trips: 0, injection_trips: 0 });
    }

    #[test]
    fn single_balanced_interaction_between_modes_one_and_three() {
        let mut plan = DecompositionPlan::identity(3);
        plan.layers[0][1] = TParams { m: 3, omega: std::f64::consts::FRAC_PI_4, phi: 0.0 };
        for mode in MODES {
            let t = compile(&plan, mode).unwrap();
            let half = t.bins.iter().filter(|b| (b.vbs_t - 0.5).abs() < 1e-12).count();
            let fractional = t.bins.iter().filter(|b| b.vbs_t > 0.0 && b.vbs_t < 1.0).count();
            assert_eq!((half, fractional), (1, 1));
            let (u, _) = timeline_to_unitary(&t).unwrap();
            let m = u.matrix().map(|z| z.norm());
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for (i, j, want) in [(0, 0, h), (0, 2, h), (2, 0, h), (2, 2, h), (1, 1, 1.0), (0, 1, 0.0), (1, 2, 0.0)] {
                assert!((m[(i, j)] - want).abs() < 1e-12);
            }
            assert!(u.distance(&reconstruct(&plan)) < 1e-12);
        }
    }

    #[test]
    fn two_mode_plans_need_one_interaction_bin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = UnitaryMatrix::haar(2, &mut rng);
        let t = compile(&decompose(&u).unwrap(), FinalPhaseMode::MeasurementBasis).unwrap();
        assert_eq!(t.bins.len(), 3, "load, interaction, unload");
        assert!(timeline_to_unitary(&t).unwrap().0.distance_up_to_phase(&u).0 < 1e-9);
    }

    #[test]
    fn vps_mode_sends_every_later_mode_around_the_outer_loop_n_minus_one_times() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=6 {
            // Weak couplings keep each pulse on its own slot under dominant-path tracing.
            let layers = (1..n)
                .map(|k| {
                    (2..=n - k + 1)
                        .map(|m| TParams {
                            m,
                            omega: rand::Rng::random_range(&mut rng, 0.9..1.5),
                            phi: rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU),
                        })
                        .collect()
                })
                .collect();
            let plan = DecompositionPlan::new(n, layers, vec![0.5; n]).unwrap();
            let counts = round_trip_counts(&compile(&plan, FinalPhaseMode::Vps).unwrap());
            assert_eq!(counts.mode(1).outer_trips, 0);
            for label in 2..=n {
                assert_eq!(counts.mode(label).outer_trips, n - 1, "n={n} label={label}");
            }

            // Outer occupancy is conserved whatever the coupling strengths.
            let plan = decompose(&UnitaryMatrix::haar(n, &mut rng)).unwrap();
            let counts = round_trip_counts(&compile(&plan, FinalPhaseMode::Vps).unwrap());
            let total: usize = counts.per_mode.iter().map(|m| m.outer_trips).sum();
            assert_eq!(total, (n - 1) * (n - 1));
        }
    }

    #[test]
    fn inner_loop_never_holds_two_pulses() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in 2..=6 {
            let plan = decompose(&UnitaryMatrix::haar(n, &mut rng)).unwrap();
            for mode in MODES {
                let t = compile(&plan, mode).unwrap();
                for b in 0..t.bins.len() {
                    let inside = t.mode_trace.iter().filter(|tr| tr.locations[b] == Location::Inner).count();
                    assert!(inside <= 1);
                }
                let mut labels: Vec<usize> = t.mode_trace.iter().map(|tr| tr.output_label).collect();
                labels.sort_unstable();
                assert_eq!(labels, (1..=n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn timeline_json_round_trip_preserves_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = UnitaryMatrix::haar(4, &mut rng);
        let t = compile(&decompose(&u).unwrap(), FinalPhaseMode::MeasurementBasis).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        let back: ControlTimeline = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        assert!(timeline_to_unitary(&back).unwrap().0.distance(&u) < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn transmissivities_straddling_half_still_compile_soundly(
            delta in -0.2f64..0.2,
            phi in 0.0f64..std::f64::consts::TAU,
            alpha in 0.0f64..std::f64::consts::TAU,
            which in 0usize..3,
        ) {
            let omega = (0.5f64 + delta).sqrt().acos();
            let mut plan = DecompositionPlan::identity(3);
            let slots = [(0, 0), (0, 1), (1, 0)];
            let (k, i) = slots[which];
            plan.layers[k][i].omega = omega;
            plan.layers[k][i].phi = phi;
            plan.alphas = vec![alpha, 0.3, 5.0];
            let target = reconstruct(&plan);
            for mode in MODES {
                let (u, _) = timeline_to_unitary(&compile(&plan, mode).unwrap()).unwrap();
                prop_assert!(u.distance_up_to_phase(&target).0 < 1e-9);
            }
        }

        #[test]
        fn skipped_interactions_leave_bypassing_rows_alone(seed in any::<u64>()) {
            // Only T₁₂ of layer 1 is active; modes 3 and 4 bypass or swap deterministically.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut plan = DecompositionPlan::identity(4);
            plan.layers[0][0] = TParams { m: 2, omega: rand::Rng::random_range(&mut rng, 0.1..1.4), phi: 0.4 };
            let t = compile(&plan, FinalPhaseMode::Vps).unwrap();
            let (u, _) = timeline_to_unitary(&t).unwrap();
            for row in 2..4 {
                for col in 0..4 {
                    let want = if row == col { 1.0 } else { 0.0 };
                    prop_assert!((u.matrix()[(row, col)].norm() - want).abs() < 1e-12);
                }
            }
        }
    }
}
