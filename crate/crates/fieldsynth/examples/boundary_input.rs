//! What the physical source must do: evaluate the solved field's Dirichlet
//! trace and normal velocity on the physical sphere enclosing the fictitious
//! source. This pair is the boundary input a transducer array would have to
//! realize.

use fieldsynth::config::ExperimentConfig;
use fieldsynth::geometry::discretize_sphere_boundary;
use fieldsynth::io;
use fieldsynth::propagator::Propagator;
use fieldsynth::solver::solve_control_problem;
use std::path::Path;

fn main() -> fieldsynth::Result<()> {
    let mut cfg = ExperimentConfig::baseline();
    cfg.propagator.l_max = 10;
    cfg.regions[0].points = Some(400);
    cfg.regions[1].azimuthal = Some(40);
    cfg.regions[1].polar = Some(20);
    let experiment = cfg.to_experiment()?;

    let solution = solve_control_problem(&experiment)?;
    let prop = Propagator::new(experiment.propagator, experiment.source.center)?;

    let radius = experiment.source.a_phys;
    let surface = discretize_sphere_boundary(radius, 80, 40)?;
    let dirichlet = prop.dirichlet_trace(&solution.coeffs, &surface)?;
    let neumann = prop.neumann_trace(&solution.coeffs, &experiment.medium, &surface)?;

    let sup_u = dirichlet.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let sup_vn = neumann.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    println!(
        "trace on the sphere of radius {radius}: {} points",
        surface.points.len()
    );
    println!("sup |u| = {sup_u:e}, sup |v_n| = {sup_vn:e}");

    let path = Path::new("out/examples/boundary_trace.csv");
    io::write_boundary_trace_csv(path, &surface, &dirichlet, Some(&neumann))?;
    println!("wrote {}", path.display());
    Ok(())
}
