use std::io::Write as _;
use std::path::{Path, PathBuf};

use dualloop::decomp::{decompose, reconstruct, DecompositionPlan};
use dualloop::gaussian::{ideal_output, simulate, CovarianceMatrix};
use dualloop::homodyne::{
    estimate_covariance, max_element_error, sample_basis_set, samples_from_csv, samples_to_csv, BasisSet,
};
use dualloop::linops::UnitaryMatrix;
use dualloop::loopcompiler::{compile, round_trip_counts, timeline_to_unitary, ControlTimeline, FinalPhaseMode};
use dualloop::metrics::{combo_variance, gaussian_fidelity, inseparability};
use dualloop::presets::Preset;

use crate::args::{Cli, Command, RunArgs, Source};
use crate::config::{RunConfig, OUT_DIR_ENV};
use crate::report::{EstimateSummary, NullifierValue, Provenance, RunReport};
use crate::{read_json, to_json, write_atomic, CliError};

/// Largest element deviation that still counts as the same unitary.
pub const VERIFY_TOL: f64 = 1e-9;

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decompose { unitary, out } => cmd_decompose(&unitary, out.as_deref()),
        Command::Compile { source, final_phase, tau_ns, out, table } => {
            cmd_compile(&source, final_phase.into(), tau_ns, out.as_deref(), table.as_deref())
        }
        Command::Verify { timeline, unitary } => cmd_verify(&timeline, &unitary),
        Command::Run(args) => cmd_run(&args).map(|_| ()),
        Command::Estimate { samples, out_dir } => cmd_estimate(&samples, out_dir),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Validation(format!("stdout: {e}"))),
    }
}

pub fn cmd_decompose(unitary: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let u: UnitaryMatrix = read_json(unitary, "unitary")?;
    let plan = decompose(&u)?;
    let error = reconstruct(&plan).distance(&u);
    emit(out, &to_json(&plan))?;
    eprintln!("reconstruction error: {error:.3e}");
    Ok(())
}

fn plan_from(source: &Source) -> Result<DecompositionPlan, CliError> {
    if let Some(path) = &source.unitary {
        let u: UnitaryMatrix = read_json(path, "unitary")?;
        return Ok(decompose(&u)?);
    }
    if let Some(path) = &source.plan {
        return read_json(path, "plan");
    }
    let name = source.preset.as_deref().ok_or_else(|| CliError::Validation("no source given".into()))?;
    Ok(name.parse::<Preset>()?.plan())
}

pub fn cmd_compile(
    source: &Source,
    mode: FinalPhaseMode,
    tau_ns: Option<f64>,
    out: Option<&Path>,
    table: Option<&Path>,
) -> Result<(), CliError> {
    let mut timeline = compile(&plan_from(source)?, mode)?;
    if let Some(tau) = tau_ns {
        timeline = timeline.with_tau(tau)?;
    }
    if let Some(path) = table {
        write_atomic(path, timeline.control_table().as_bytes())?;
    }
    emit(out, &to_json(&timeline))
}

pub fn cmd_verify(timeline: &Path, unitary: &Path) -> Result<(), CliError> {
    let t: ControlTimeline = read_json(timeline, "timeline")?;
    let u: UnitaryMatrix = read_json(unitary, "unitary")?;
    if t.n_modes != u.dim() {
        return Err(CliError::Validation(format!(
            "timeline has {} modes, unitary is {}x{}",
            t.n_modes,
            u.dim(),
            u.dim()
        )));
    }
    let (realized, _) = timeline_to_unitary(&t)?;
    let deviation = realized.max_deviation_up_to_phase(&u);
    println!("max deviation up to global phase: {deviation:.3e}");
    if deviation < VERIFY_TOL {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(format!("timeline does not realize the unitary (deviation {deviation:.3e})")))
    }
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Runs the full pipeline and writes the report bundle; returns the report.
pub fn cmd_run(args: &RunArgs) -> Result<RunReport, CliError> {
    let cfg = RunConfig::resolve(args.layer(), args.config.as_deref(), env_out_dir())?;
    let report = run_config(&cfg)?;
    println!("{}", report.table().trim_end());
    println!("wrote report bundle to {}", cfg.out_dir.display());
    Ok(report)
}

pub fn run_config(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let (plan, target, preset) = match (&cfg.preset, &cfg.unitary) {
        (Some(name), _) => {
            let p: Preset = name.parse()?;
            if cfg.n_modes.is_some_and(|n| n != 3) {
                return Err(CliError::Validation(format!("preset {p} acts on 3 modes")));
            }
            (p.plan(), p.target(), Some(p))
        }
        (None, Some(path)) => {
            let u: UnitaryMatrix = read_json(path, "unitary")?;
            if cfg.n_modes.is_some_and(|n| n != u.dim()) {
                return Err(CliError::Validation(format!("n_modes does not match the {}-mode unitary", u.dim())));
            }
            (decompose(&u)?, u, None)
        }
        (None, None) => return Err(CliError::Validation("a preset or a unitary file is required".into())),
    };
    let n = target.dim();
    let timeline = compile(&plan, cfg.final_phase_mode)?.with_tau(cfg.tau_ns)?;
    let inputs = cfg.loss.default_inputs(n);
    let g = simulate(&timeline, &inputs, &cfg.loss)?;
    let fidelity = gaussian_fidelity(&g, &ideal_output(&target, &inputs)?)?;

    let (insep, nullifiers) = match preset {
        Some(p) => {
            let entries = inseparability(&g, p)?.entries;
            let nullifiers = p
                .nullifiers()
                .into_iter()
                .map(|c| Ok(NullifierValue { variance: combo_variance(&g, &c)?, label: c.label }))
                .collect::<Result<Vec<_>, CliError>>()?;
            (entries, nullifiers)
        }
        None => (Vec::new(), Vec::new()),
    };

    let dir = &cfg.out_dir;
    let mut estimate = None;
    if cfg.estimate {
        let set = BasisSet::standard(n)?;
        let sets = sample_basis_set(&g, &set, cfg.samples, cfg.seed)?;
        let est = estimate_covariance(&sets)?;
        write_atomic(&dir.join("samples.csv"), samples_to_csv(&sets).as_bytes())?;
        write_covariance(dir, "estimate", &est)?;
        estimate = Some(EstimateSummary {
            bases: set.labels(),
            samples_per_basis: cfg.samples,
            max_element_error: max_element_error(&est, &g)?,
            physical: est.is_physical(),
            min_uncertainty_eigenvalue: est.min_uncertainty_eigenvalue(),
        });
    }

    let report = RunReport {
        provenance: Provenance::of(cfg),
        config: cfg.clone(),
        operation: preset.map_or_else(|| "custom".to_string(), |p| p.operation_label().to_string()),
        output_state: preset.map_or_else(|| format!("{n}-mode output"), |p| p.output_state().to_string()),
        n_modes: n,
        n_bins: timeline.bins.len(),
        duration_ns: timeline.bins.len() as f64 * timeline.tau_ns,
        fidelity,
        all_inseparable: preset.filter(|p| p.is_entangling()).map(|_| insep.iter().all(|e| e.passes)),
        inseparability: insep,
        nullifiers,
        round_trips: round_trip_counts(&timeline),
        estimate,
    };

    write_atomic(&dir.join("timeline.json"), &to_json(&timeline))?;
    write_atomic(&dir.join("control_table.txt"), timeline.control_table().as_bytes())?;
    write_covariance(dir, "covariance", &g)?;
    write_atomic(&dir.join("covariance_elements.tsv"), g.element_table().as_bytes())?;
    write_atomic(&dir.join("report.json"), &to_json(&report))?;
    write_atomic(&dir.join("report.txt"), report.table().as_bytes())?;
    Ok(report)
}

fn write_covariance(dir: &Path, stem: &str, g: &CovarianceMatrix) -> Result<(), CliError> {
    write_atomic(&dir.join(format!("{stem}.csv")), g.to_csv().as_bytes())?;
    write_atomic(&dir.join(format!("{stem}.json")), &to_json(g))
}

pub fn cmd_estimate(samples: &Path, out_dir: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(samples)
        .map_err(|e| CliError::Validation(format!("cannot read samples {}: {e}", samples.display())))?;
    let est = estimate_covariance(&samples_from_csv(&text)?)?;
    let dir = out_dir.or_else(env_out_dir).unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_OUT_DIR));
    write_covariance(&dir, "estimate", &est)?;
    println!(
        "estimated {}-mode covariance written to {} (physical: {})",
        est.n_modes(),
        dir.display(),
        est.is_physical()
    );
    Ok(())
}
