//! Decomposition, dual-loop scheduling and Gaussian simulation of
//! time-domain linear-optical operations.

pub mod decomp;
pub mod error;
pub mod gaussian;
pub mod homodyne;
pub mod linops;
pub mod loopcompiler;
pub mod metrics;
pub mod presets;

pub use decomp::{decompose, reconstruct, DecompositionPlan, TParams};
pub use error::{Error, Result};
pub use gaussian::{simulate, CovarianceMatrix, LossModel, Quadrature, SqueezedInput};
pub use homodyne::{
    estimate_covariance, mode_function, sample_basis_set, sample_quadratures, Basis, BasisSet, ModeFunctionParams,
    SampleSet,
};
pub use linops::{symplectic_form, symplectic_from_unitary, SymplecticMatrix, UnitaryMatrix};
pub use loopcompiler::{
    compile, round_trip_counts, timeline_to_unitary, ControlTimeline, FinalPhaseMode, RoundTripCounts, TimeBin,
};
pub use metrics::{combo_variance, gaussian_fidelity, inseparability, InseparabilityReport, QuadratureCombo};
pub use presets::{preset_timeline, Preset, TargetDescription};
