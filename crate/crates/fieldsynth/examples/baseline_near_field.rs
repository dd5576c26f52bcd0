//! Prescribe an incoming plane wave on a small shell sector 1 mm above the
//! source while silencing the exterior of the ball of radius 10, then report
//! the error levels and export a cross-section field slice.
//!
//! Point counts are trimmed so the example finishes in a couple of seconds;
//! see configs/baseline.toml for the reference resolution.

use fieldsynth::analysis::{aggregate_metrics, per_region_metrics};
use fieldsynth::config::ExperimentConfig;
use fieldsynth::io;
use fieldsynth::propagator::Propagator;
use fieldsynth::solver::{assemble, solve_on_system};
use fieldsynth::synthesis::cross_section_grid;
use fieldsynth::geometry::ControlRegion;
use num_complex::Complex64;
use std::path::Path;

fn main() -> fieldsynth::Result<()> {
    let mut cfg = ExperimentConfig::baseline();
    cfg.propagator.l_max = 12;
    cfg.regions[0].points = Some(600);
    cfg.regions[1].azimuthal = Some(60);
    cfg.regions[1].polar = Some(30);

    let experiment = cfg.to_experiment()?;
    let sys = assemble(&experiment.source, &experiment.regions, &experiment.propagator)?;
    println!(
        "system: {} rows x {} columns (L = {})",
        sys.n_rows(),
        sys.n_cols(),
        experiment.propagator.l_max
    );

    let solution = solve_on_system(&experiment, &sys)?;
    let u = sys.apply(solution.coeffs.alpha());
    let per_region = per_region_metrics(&u, &sys);
    let metrics = aggregate_metrics(&per_region, solution.coeff_norm);

    println!(
        "alpha_reg = {:e} ({:?}), weighted residual = {:e}",
        solution.alpha_reg, solution.morozov_status, solution.residual
    );
    println!(
        "near sector: rel_sup = {:e}, far sphere: abs_sup = {:e}",
        per_region[0].rel_sup, per_region[1].abs_sup
    );
    match metrics.db_contrast {
        Some(db) => println!("density norm = {:e}, contrast = {db:.1} dB", metrics.coeff_norm),
        None => println!("density norm = {:e}, contrast undefined", metrics.coeff_norm),
    }

    // Field on the equatorial slice through the controlled sector; points
    // inside the fictitious sphere come out NaN.
    let prop = Propagator::new(experiment.propagator, experiment.source.center)?;
    let sector = match &experiment.regions[0].region {
        ControlRegion::Sector(s) => s.clone(),
        _ => unreachable!(),
    };
    let grid = cross_section_grid(&sector, 80)?;
    let values: Vec<Complex64> = grid
        .points
        .iter()
        .map(|&x| {
            prop.eval_field_at(&solution.coeffs, x)
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        })
        .collect();
    let out = Path::new("out/examples/baseline_near_field.csv");
    io::write_field_snapshot_csv(out, &grid.points, &values)?;
    println!("wrote {}", out.display());
    Ok(())
}
