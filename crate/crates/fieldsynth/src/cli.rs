//! Command-line driver: parses a TOML experiment config, dispatches to the
//! library, and persists results under an output directory. Exit codes:
//! 0 success, 2 configuration or validation failure, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use std::path::PathBuf;
use std::process::ExitCode;

use crate::analysis::{run_sweep, stability_on_factorization, SweepKind, SweepSpec};
use crate::config::{parse_value_list, ExperimentConfig};
use crate::error::{Error, Result};
use crate::geometry::{discretize_sphere_boundary, ControlRegion, Vec3};
use crate::io;
use crate::propagator::Propagator;
use crate::solver::{assemble, solve_with_factorization, Experiment, TargetField};
use crate::synthesis::{
    cross_section_grid, evaluate_components_masked, fourier_solve, time_averaged_errors,
    time_snapshots,
};

#[derive(Parser)]
#[command(
    name = "fieldsynth",
    version,
    about = "Active sound control via a spherical multipole source: solve, sweep, synthesize"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one control problem; write solution.json, metrics.csv, field slices.
    Solve(SolveArgs),
    /// Re-solve across a geometry parameter range; write sweep.csv.
    Sweep(SweepArgs),
    /// Multi-frequency synthesis; write per-frequency solutions, errors, snapshots.
    Synthesize(SynthesizeArgs),
    /// Evaluate the solved field's trace on a sphere enclosing the source.
    BoundaryInput(BoundaryInputArgs),
    /// Parse a config and check it for consistency.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output.dir`; default "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Override the noise seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which parameter to sweep: distance, outer-radius, both-radii, rotation.
    #[arg(long)]
    kind: String,
    /// Values: "start:end:steps" (inclusive, pi expressions allowed) or a comma list.
    #[arg(long)]
    values: String,
    /// Comma list of harmonic orders L (default: the config's l_max).
    #[arg(long)]
    orders: Option<String>,
    /// Override the noise seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of time-snapshot frames over one period (0 = errors only).
    #[arg(long, default_value_t = 8)]
    snapshots: usize,
}

#[derive(Args)]
struct BoundaryInputArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Radius of the physical sphere to trace on; must exceed the fictitious
    /// radius a'. Defaults to the config's source.a_phys.
    #[arg(long)]
    radius: Option<f64>,
    /// Also export the normal velocity columns computed from the medium.
    #[arg(long)]
    neumann: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
}

/// Entry point used by the binary. Prints errors to stderr and maps them to
/// the documented exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synthesize(args) => cmd_synthesize(args),
        Command::BoundaryInput(args) => cmd_boundary_input(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn load(common: &CommonArgs, seed: Option<u64>) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = seed {
        cfg.noise.seed = seed;
    }
    cfg.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

/// Field values on a plotting grid; points the propagator rejects (inside
/// the fictitious sphere) become NaN.
fn masked_field(
    prop: &Propagator,
    coeffs: &crate::propagator::DensityCoefficients,
    points: &[Vec3],
) -> Vec<Complex64> {
    points
        .iter()
        .map(|&x| {
            prop.eval_field_at(coeffs, x)
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        })
        .collect()
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let (cfg, out) = load(&args.common, args.seed)?;
    let experiment = cfg.to_experiment()?;
    let sys = assemble(&experiment.source, &experiment.regions, &experiment.propagator)?;
    let fac = sys.factorize()?;
    let solution = solve_with_factorization(&experiment, &sys, &fac)?;

    let u = sys.apply(solution.coeffs.alpha());
    let per_region = crate::analysis::per_region_metrics(&u, &sys);
    let metrics = crate::analysis::aggregate_metrics(&per_region, solution.coeff_norm);

    println!(
        "solve: {} rows x {} columns, L = {}",
        sys.n_rows(),
        sys.n_cols(),
        experiment.propagator.l_max
    );
    println!(
        "alpha_reg = {:e} ({}), residual = {:e}",
        solution.alpha_reg,
        io::morozov_status_name(solution.morozov_status),
        solution.residual
    );
    println!(
        "rel_sup = {:e}, abs_sup = {:e}, coeff_norm = {:e}, db_contrast = {}",
        metrics.rel_sup,
        metrics.abs_sup,
        metrics.coeff_norm,
        metrics
            .db_contrast
            .map(|d| format!("{d:.1} dB"))
            .unwrap_or_else(|| "n/a".into()),
    );

    let noise = cfg.noise_spec()?;
    if noise.epsilon > 0.0 {
        let s = stability_on_factorization(&experiment, &sys, &fac, &noise)?;
        println!("stability = {s:e} (epsilon = {:e})", noise.epsilon);
    }

    let solution_path = out.join("solution.json");
    io::write_solution_json(&solution_path, &solution)?;
    println!("wrote {}", solution_path.display());
    let metrics_path = out.join("metrics.csv");
    io::write_metrics_csv(&metrics_path, &per_region, &metrics, &solution)?;
    println!("wrote {}", metrics_path.display());

    let prop = Propagator::new(experiment.propagator, experiment.source.center)?;
    for (i, region) in experiment.regions.iter().enumerate() {
        if let ControlRegion::Sector(sector) = &region.region {
            let grid = cross_section_grid(sector, 100)?;
            let values = masked_field(&prop, &solution.coeffs, &grid.points);
            let path = out.join(format!("field_slice_{i}.csv"));
            io::write_field_snapshot_csv(&path, &grid.points, &values)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let (cfg, out) = load(&args.common, args.seed)?;
    let experiment = cfg.to_experiment()?;
    let kind = SweepKind::parse(&args.kind)?;
    let values = parse_value_list(&args.values)?;
    let orders = match &args.orders {
        None => vec![cfg.propagator.l_max],
        Some(text) => text
            .split(',')
            .map(|s| {
                s.trim().parse::<u32>().map_err(|_| {
                    Error::Config(format!("order {s:?} is not a nonnegative integer"))
                })
            })
            .collect::<Result<Vec<u32>>>()?,
    };
    let spec = SweepSpec::new(kind, values, orders)?;
    let noise = cfg.noise_spec()?;
    let table = run_sweep(&spec, &experiment, &noise)?;

    let failed = table.rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "sweep {}: {} values x {} orders, {} rows ({} failed)",
        kind.name(),
        spec.values.len(),
        spec.harmonic_orders.len(),
        table.rows.len(),
        failed
    );
    let path = out.join("sweep.csv");
    io::write_sweep_csv(&path, &table)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_synthesize(args: SynthesizeArgs) -> Result<()> {
    let (cfg, out) = load(&args.common, None)?;
    let experiment = cfg.to_experiment()?;
    let spec = cfg.synthesis_spec()?;
    println!(
        "synthesis: {} frequencies, L = {}, {} time samples",
        spec.components.len(),
        spec.l_max,
        spec.n_time
    );

    let solutions = fourier_solve(&spec, &experiment)?;
    let mut solution_files = Vec::with_capacity(solutions.len());
    for (i, sol) in solutions.iter().enumerate() {
        let name = format!("solution_{i:02}.json");
        io::write_solution_json(&out.join(&name), sol)?;
        solution_files.push(name);
    }
    println!("wrote {} per-frequency solutions", solutions.len());

    let errors = time_averaged_errors(&spec, &experiment, &solutions)?;
    println!(
        "time-averaged rel_sup = {:e}, abs_sup = {:e}",
        errors.rel_sup, errors.abs_sup
    );
    let errors_path = out.join("errors.csv");
    io::write_synthesis_errors_csv(&errors_path, &errors)?;
    println!("wrote {}", errors_path.display());

    let mut grid_meta = None;
    let mut snapshot_entries = Vec::new();
    if args.snapshots > 0 {
        let sector = experiment
            .regions
            .iter()
            .find_map(|r| match &r.region {
                ControlRegion::Sector(s) => Some(s.clone()),
                _ => None,
            })
            .ok_or_else(|| {
                Error::InvalidArgument(
                    "snapshot export needs at least one sector region for the grid".into(),
                )
            })?;
        let grid = cross_section_grid(&sector, 100)?;
        let fields = evaluate_components_masked(&spec, &experiment, &solutions, &grid.points)?;
        for snap in time_snapshots(&fields, spec.period, args.snapshots) {
            let name = format!("snapshot_{:03}.csv", snapshot_entries.len());
            io::write_time_snapshot_csv(&out.join(&name), &grid.points, &snap)?;
            snapshot_entries.push((snap.tau, name));
        }
        grid_meta = Some(io::GridMeta::from_cloud(&grid, 100, 100)?);
        println!("wrote {} snapshots", snapshot_entries.len());
    }

    let manifest_path = out.join("manifest.json");
    io::write_synthesis_manifest(
        &manifest_path,
        &spec,
        &solutions,
        &solution_files,
        &errors,
        grid_meta,
        &snapshot_entries,
    )?;
    println!("wrote {}", manifest_path.display());
    Ok(())
}

fn cmd_boundary_input(args: BoundaryInputArgs) -> Result<()> {
    let (cfg, out) = load(&args.common, None)?;
    let experiment = cfg.to_experiment()?;
    let radius = args.radius.unwrap_or(experiment.source.a_phys);
    if !(radius > experiment.source.a_prime) || !radius.is_finite() {
        return Err(Error::Geometry(format!(
            "trace radius {radius} must exceed the fictitious radius {}",
            experiment.source.a_prime
        )));
    }

    let solution = crate::solver::solve_control_problem(&experiment)?;
    let prop = Propagator::new(experiment.propagator, experiment.source.center)?;
    let mut cloud = discretize_sphere_boundary(radius, 200, 100)?;
    // The sphere is centered on the source.
    for p in &mut cloud.points {
        p[0] += experiment.source.center[0];
        p[1] += experiment.source.center[1];
        p[2] += experiment.source.center[2];
    }
    let dirichlet = prop.dirichlet_trace(&solution.coeffs, &cloud)?;
    let neumann = if args.neumann {
        Some(prop.neumann_trace(&solution.coeffs, &experiment.medium, &cloud)?)
    } else {
        None
    };

    println!(
        "boundary trace at radius {radius}: {} points{}",
        cloud.points.len(),
        if args.neumann { " with normal velocity" } else { "" }
    );
    let path = out.join("boundary_trace.csv");
    io::write_boundary_trace_csv(&path, &cloud, &dirichlet, neumann.as_deref())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn describe_target(target: &TargetField) -> String {
    match target {
        TargetField::Zero => "zero".into(),
        TargetField::PlaneWave { direction, k, .. } => {
            format!(
                "plane-wave k = {k} along ({}, {}, {})",
                direction[0], direction[1], direction[2]
            )
        }
        TargetField::Superposition(parts) => format!("superposition of {} waves", parts.len()),
    }
}

fn describe_regions(experiment: &Experiment) {
    for (i, r) in experiment.regions.iter().enumerate() {
        let shape = match &r.region {
            ControlRegion::Sector(s) => {
                let t = s.translation();
                format!(
                    "sector r in [{}, {}] at ({}, {}, {})",
                    s.r_min(),
                    s.r_max(),
                    t[0],
                    t[1],
                    t[2]
                )
            }
            ControlRegion::ExteriorSphere(e) => format!("exterior sphere R = {}", e.radius),
        };
        println!(
            "  region {i}: {shape}; {:?}; target {}",
            r.discretization,
            describe_target(&r.target)
        );
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&args.config)?;
    cfg.validate()?;
    let experiment = cfg.to_experiment()?;
    println!(
        "config ok: {} regions, k = {}, L = {}, a' = {}, morozov_delta = {:e}",
        experiment.regions.len(),
        experiment.propagator.k,
        experiment.propagator.l_max,
        experiment.source.a_prime,
        experiment.morozov_delta
    );
    describe_regions(&experiment);
    if cfg.synthesis.is_some() {
        let spec = cfg.synthesis_spec()?;
        println!(
            "  synthesis: {} frequencies, {} time samples, period = {:e}",
            spec.components.len(),
            spec.n_time,
            spec.period
        );
    }
    Ok(())
}
