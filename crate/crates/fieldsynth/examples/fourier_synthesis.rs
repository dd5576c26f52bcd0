//! Synthesize a traveling pulse: solve the control problem at several
//! wavenumbers, superpose the solutions with the pulse's Fourier weights,
//! and check how well the time-domain field tracks the prescribed wave over
//! one period. Exports a short series of time snapshots on a cross-section
//! grid.

use fieldsynth::config::ExperimentConfig;
use fieldsynth::geometry::ControlRegion;
use fieldsynth::io;
use fieldsynth::synthesis::{
    cross_section_grid, evaluate_components_masked, fourier_solve, time_averaged_errors,
    time_snapshots, SynthesisComponent, SynthesisSpec,
};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::path::Path;

fn main() -> fieldsynth::Result<()> {
    let mut cfg = ExperimentConfig::synthesis_pulse();
    cfg.propagator.l_max = 10;
    cfg.regions[0].points = Some(400);
    cfg.regions[1].points = Some(400);
    let experiment = cfg.to_experiment()?;

    // A trimmed band: five frequencies out of the reference twenty-one.
    let components = (0..5)
        .map(|i| {
            let l = 10.0 + 5.0 * i as f64;
            SynthesisComponent {
                k: l / 2.0,
                weight: Complex64::new(2.0 / l, 0.0),
            }
        })
        .collect();
    let spec = SynthesisSpec::new(components, 10, 100, 4.0 * PI)?;

    let solutions = fourier_solve(&spec, &experiment)?;
    for (comp, sol) in spec.components.iter().zip(&solutions) {
        println!(
            "k = {:>5.2}: alpha_reg = {:e}, residual = {:e}",
            comp.k, sol.alpha_reg, sol.residual
        );
    }

    let errors = time_averaged_errors(&spec, &experiment, &solutions)?;
    println!(
        "time-averaged over one period: rel_sup = {:e} (pulse sector), abs_sup = {:e} (silent sector)",
        errors.rel_sup, errors.abs_sup
    );
    println!(
        "mean square field: {:e} loud vs {:e} quiet",
        errors.mean_square_loud, errors.mean_square_quiet
    );

    let sector = match &experiment.regions[0].region {
        ControlRegion::Sector(s) => s.clone(),
        _ => unreachable!(),
    };
    let grid = cross_section_grid(&sector, 60)?;
    let fields = evaluate_components_masked(&spec, &experiment, &solutions, &grid.points)?;
    for (i, snap) in time_snapshots(&fields, spec.period, 4).iter().enumerate() {
        let path = format!("out/examples/pulse_snapshot_{i}.csv");
        io::write_time_snapshot_csv(Path::new(&path), &grid.points, snap)?;
        println!("wrote {path} (tau = {:.4})", snap.tau);
    }
    Ok(())
}
