use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use dualloop::loopcompiler::FinalPhaseMode;

use crate::config::ConfigLayer;

#[derive(Debug, Parser)]
#[command(name = "dualloop", version, about = "Compile and simulate linear-optical operations on a dual-loop circuit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a JSON unitary into interaction layers and final phases.
    Decompose {
        #[arg(long)]
        unitary: PathBuf,
        /// Plan output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a unitary, plan or preset into a control timeline.
    Compile {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = PhaseMode::Measurement)]
        final_phase: PhaseMode,
        #[arg(long)]
        tau_ns: Option<f64>,
        /// Timeline JSON output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional control-table output.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Check that a timeline realizes a unitary up to a global phase.
    Verify {
        #[arg(long)]
        timeline: PathBuf,
        #[arg(long)]
        unitary: PathBuf,
    },
    /// Simulate a preset or unitary and write the report bundle.
    Run(RunArgs),
    /// Reconstruct a covariance matrix from homodyne sample CSV.
    Estimate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    #[arg(long)]
    pub unitary: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseMode {
    Vps,
    Measurement,
}

impl From<PhaseMode> for FinalPhaseMode {
    fn from(m: PhaseMode) -> Self {
        match m {
            PhaseMode::Vps => FinalPhaseMode::Vps,
            PhaseMode::Measurement => FinalPhaseMode::MeasurementBasis,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file with flat configuration keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "unitary")]
    pub preset: Option<String>,
    #[arg(long)]
    pub unitary: Option<PathBuf>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub tau_ns: Option<f64>,
    #[arg(long)]
    pub source_loss: Option<f64>,
    #[arg(long)]
    pub inner_loss: Option<f64>,
    #[arg(long)]
    pub outer_loss: Option<f64>,
    #[arg(long)]
    pub squeezing_db: Option<f64>,
    /// Charge a round trip when a pulse is parked in an empty inner loop.
    #[arg(long)]
    pub charge_injection_trip: bool,
    #[arg(long)]
    pub lossless: bool,
    #[arg(long, value_enum)]
    pub final_phase: Option<PhaseMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also sample the five homodyne bases and reconstruct the covariance.
    #[arg(long)]
    pub estimate: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl RunArgs {
    /// Flags as the top configuration layer; unset switches stay unset.
    pub fn layer(&self) -> ConfigLayer {
        let flag = |b: bool| b.then_some(true);
        ConfigLayer {
            n_modes: self.n_modes,
            tau_ns: self.tau_ns,
            source_detection_loss: self.source_loss,
            inner_trip_loss: self.inner_loss,
            outer_trip_loss: self.outer_loss,
            input_squeezing_db: self.squeezing_db,
            charge_injection_trip: flag(self.charge_injection_trip),
            lossless: flag(self.lossless),
            preset: self.preset.clone(),
            unitary: self.unitary.clone(),
            final_phase_mode: self.final_phase.map(Into::into),
            seed: self.seed,
            samples: self.samples,
            estimate: flag(self.estimate),
            out_dir: self.out_dir.clone(),
        }
    }
}
