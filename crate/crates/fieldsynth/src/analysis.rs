//! Error metrics on the control regions, the noise-stability measure, and
//! the geometric sensitivity sweeps (distance, outer radius, both radii,
//! rotation of the secondary region).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::geometry::ControlRegion;
use crate::propagator::PropagatorConfig;
use crate::solver::{
    assemble, solve_with_factorization, Experiment, LinearSystem, Solution,
    TikhonovFactorization,
};

/// Additive noise model for the stability experiments: i.i.d. uniform on
/// [-epsilon, epsilon] per real and imaginary part of every boundary sample,
/// scaled by the largest prescribed field magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise amplitude {epsilon} must be a nonnegative finite number"
            )));
        }
        Ok(NoiseSpec { epsilon, seed })
    }
}

/// Per-region comparison of the generated field against the prescribed one.
/// When the prescription is identically zero the relative columns repeat the
/// absolute values and `relative_defined` is false.
#[derive(Clone, Copy, Debug)]
pub struct RegionMetrics {
    pub abs_l2: f64,
    pub abs_sup: f64,
    pub rel_l2: f64,
    pub rel_sup: f64,
    pub sup_field: f64,
    pub sup_target: f64,
    pub relative_defined: bool,
}

/// Quadrature-weighted norms of field samples `u` against targets `b`.
pub fn region_metrics_from_samples(
    u: &[Complex64],
    b: &[Complex64],
    weights: &[f64],
) -> RegionMetrics {
    assert_eq!(u.len(), b.len());
    assert_eq!(u.len(), weights.len());
    let mut err_sq = 0.0;
    let mut tgt_sq = 0.0;
    let mut abs_sup = 0.0f64;
    let mut sup_field = 0.0f64;
    let mut sup_target = 0.0f64;
    for ((ui, bi), wi) in u.iter().zip(b).zip(weights) {
        err_sq += wi * (ui - bi).norm_sqr();
        tgt_sq += wi * bi.norm_sqr();
        abs_sup = abs_sup.max((ui - bi).norm());
        sup_field = sup_field.max(ui.norm());
        sup_target = sup_target.max(bi.norm());
    }
    let abs_l2 = err_sq.sqrt();
    let relative_defined = tgt_sq > 0.0;
    let (rel_l2, rel_sup) = if relative_defined {
        (abs_l2 / tgt_sq.sqrt(), abs_sup / sup_target)
    } else {
        (abs_l2, abs_sup)
    };
    RegionMetrics {
        abs_l2,
        abs_sup,
        rel_l2,
        rel_sup,
        sup_field,
        sup_target,
        relative_defined,
    }
}

/// Row-level summary used by the sweep tables: relative errors come from the
/// regions with a nonzero prescription, absolute sup from the null regions,
/// and the contrast compares the loudest against the quietest region.
#[derive(Clone, Copy, Debug)]
pub struct Metrics {
    pub rel_l2: f64,
    pub rel_sup: f64,
    pub abs_sup: f64,
    pub coeff_norm: f64,
    pub db_contrast: Option<f64>,
}

/// Contrast in decibels between field magnitudes, 20 log10 convention.
pub fn db_contrast(sup_loud: f64, sup_quiet: f64) -> Option<f64> {
    if sup_loud > 0.0 && sup_quiet > 0.0 && sup_loud.is_finite() && sup_quiet.is_finite() {
        Some(20.0 * (sup_loud / sup_quiet).log10())
    } else {
        None
    }
}

/// Evaluate the solution on every region's boundary cloud of the assembled
/// system and aggregate.
pub fn compute_metrics(solution: &Solution, sys: &LinearSystem) -> Metrics {
    let u = sys.apply(solution.coeffs.alpha());
    let per_region = per_region_metrics(&u, sys);
    aggregate_metrics(&per_region, solution.coeff_norm)
}

/// Per-region metrics from precomputed field samples over all rows.
pub fn per_region_metrics(u: &[Complex64], sys: &LinearSystem) -> Vec<RegionMetrics> {
    sys.region_rows()
        .iter()
        .map(|range| {
            region_metrics_from_samples(
                &u[range.clone()],
                &sys.rhs()[range.clone()],
                &sys.row_weights()[range.clone()],
            )
        })
        .collect()
}

pub fn aggregate_metrics(per_region: &[RegionMetrics], coeff_norm: f64) -> Metrics {
    let mut rel_l2 = f64::NAN;
    let mut rel_sup = f64::NAN;
    let mut abs_sup = f64::NAN;
    let mut sup_loud = 0.0f64;
    let mut sup_quiet = f64::INFINITY;
    let mut any_loud = false;
    let mut any_quiet = false;
    for m in per_region {
        if m.relative_defined {
            rel_l2 = if any_loud { rel_l2.max(m.rel_l2) } else { m.rel_l2 };
            rel_sup = if any_loud { rel_sup.max(m.rel_sup) } else { m.rel_sup };
            sup_loud = sup_loud.max(m.sup_field);
            any_loud = true;
        } else {
            abs_sup = if any_quiet { abs_sup.max(m.abs_sup) } else { m.abs_sup };
            sup_quiet = sup_quiet.min(m.sup_field);
            any_quiet = true;
        }
    }
    let contrast = if any_loud && any_quiet {
        db_contrast(sup_loud, sup_quiet)
    } else {
        None
    };
    Metrics {
        rel_l2,
        rel_sup,
        abs_sup,
        coeff_norm,
        db_contrast: contrast,
    }
}

/// Draw one complex box-noise sample per system row: real and imaginary
/// parts i.i.d. uniform on [-1, 1].
pub fn draw_unit_noise(seed: u64, n_rows: usize) -> Vec<Complex64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n_rows)
        .map(|_| {
            let re = 2.0 * rng.random::<f64>() - 1.0;
            let im = 2.0 * rng.random::<f64>() - 1.0;
            Complex64::new(re, im)
        })
        .collect()
}

/// Relative coefficient-vector change between the noise-free solve and a
/// solve against data perturbed by `epsilon` box noise.
pub fn stability_measure(experiment: &Experiment, noise: &NoiseSpec) -> Result<f64> {
    let sys = assemble(&experiment.source, &experiment.regions, &experiment.propagator)?;
    let fac = sys.factorize()?;
    stability_on_factorization(experiment, &sys, &fac, noise)
}

/// As [`stability_measure`] with the assembly and factorization reused.
pub fn stability_on_factorization(
    experiment: &Experiment,
    sys: &LinearSystem,
    fac: &TikhonovFactorization,
    noise: &NoiseSpec,
) -> Result<f64> {
    let unit = draw_unit_noise(noise.seed, sys.n_rows());
    let scale = noise.epsilon * max_prescribed_magnitude(sys)?;
    let perturbation: Vec<Complex64> = unit.into_iter().map(|z| z * scale).collect();
    stability_with_noise(experiment, sys, fac, &perturbation)
}

/// Largest |b| over rows belonging to regions with a nonzero prescription;
/// this anchors the dimensionless noise amplitude.
fn max_prescribed_magnitude(sys: &LinearSystem) -> Result<f64> {
    let mut sup = 0.0f64;
    for bi in sys.rhs() {
        sup = sup.max(bi.norm());
    }
    if sup == 0.0 {
        return Err(Error::InvalidArgument(
            "stability is undefined for an all-zero prescription".into(),
        ));
    }
    Ok(sup)
}

/// Core of the stability measure with an explicit additive perturbation of
/// the boundary data. Both solves run the same discrepancy selection, each
/// against its own data norm.
pub fn stability_with_noise(
    experiment: &Experiment,
    sys: &LinearSystem,
    fac: &TikhonovFactorization,
    perturbation: &[Complex64],
) -> Result<f64> {
    if perturbation.len() != sys.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "perturbation has {} rows, system has {}",
            perturbation.len(),
            sys.n_rows()
        )));
    }
    let proj = fac.project(&sys.weighted_rhs())?;
    let base = fac.morozov(&proj, experiment.morozov_delta * proj.rhs_norm())?;
    let base_norm: f64 = base.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if base_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "stability is undefined for a zero base solution".into(),
        ));
    }
    let noisy_weighted: Vec<Complex64> = sys
        .rhs()
        .iter()
        .zip(perturbation)
        .zip(sys.row_weights())
        .map(|((bi, ni), wi)| (bi + ni) * wi.sqrt())
        .collect();
    let proj_eps = fac.project(&noisy_weighted)?;
    let eps_sel = fac.morozov(&proj_eps, experiment.morozov_delta * proj_eps.rhs_norm())?;
    let diff: f64 = base
        .coeffs
        .iter()
        .zip(&eps_sel.coeffs)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(diff / base_norm)
}

/// Which geometric parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    /// Outward shift of the primary sector along its central ray.
    Distance,
    /// Increment added to the primary sector's outer radius.
    OuterRadius,
    /// Increment added to both radii of the primary sector.
    BothRadii,
    /// Rotation angle of the secondary sector about the source.
    Rotation,
}

impl SweepKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "distance" => Ok(SweepKind::Distance),
            "outer-radius" | "outer_radius" => Ok(SweepKind::OuterRadius),
            "both-radii" | "both_radii" => Ok(SweepKind::BothRadii),
            "rotation" => Ok(SweepKind::Rotation),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep kind {other:?} (expected distance, outer-radius, both-radii, or rotation)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Distance => "distance",
            SweepKind::OuterRadius => "outer-radius",
            SweepKind::BothRadii => "both-radii",
            SweepKind::Rotation => "rotation",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub values: Vec<f64>,
    pub harmonic_orders: Vec<u32>,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, values: Vec<f64>, harmonic_orders: Vec<u32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one value".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if harmonic_orders.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep needs at least one harmonic order".into(),
            ));
        }
        Ok(SweepSpec {
            kind,
            values,
            harmonic_orders,
        })
    }
}

/// One (parameter value, harmonic order) result. A failed solve leaves the
/// numeric fields empty and records the failure in `status`.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub param_value: f64,
    pub l: u32,
    pub metrics: Option<Metrics>,
    pub stability: Option<f64>,
    pub alpha_reg: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

/// Geometry variant for one sweep value. Distance and radius edits act on
/// the first solid sector (the primary region); rotation turns the last one
/// (the secondary region).
pub fn apply_sweep_value(base: &Experiment, kind: SweepKind, value: f64) -> Result<Experiment> {
    let mut exp = base.clone();
    let sector_indices: Vec<usize> = exp
        .regions
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r.region, ControlRegion::Sector(_)))
        .map(|(i, _)| i)
        .collect();
    let target_index = match kind {
        SweepKind::Rotation => sector_indices.last().copied(),
        _ => sector_indices.first().copied(),
    }
    .ok_or_else(|| Error::InvalidArgument("sweep requires a solid sector region".into()))?;
    let ControlRegion::Sector(sector) = &exp.regions[target_index].region else {
        unreachable!()
    };
    let edited = match kind {
        SweepKind::Distance => sector.shift_radially(value),
        SweepKind::OuterRadius => sector.grow_outer_radius(value)?,
        SweepKind::BothRadii => sector.grow_both_radii(value)?,
        SweepKind::Rotation => sector.rotate_about_origin(value),
    };
    exp.regions[target_index].region = ControlRegion::Sector(edited);
    Ok(exp)
}

/// Run every (value, order) combination, collecting metrics and stability.
/// Rows appear value-major, order-minor; individual failures do not stop
/// the sweep.
pub fn run_sweep(spec: &SweepSpec, base: &Experiment, noise: &NoiseSpec) -> Result<SweepTable> {
    // Surface structural problems before grinding through solves.
    apply_sweep_value(base, spec.kind, spec.values[0])
        .map(|_| ())
        .or_else(|e| match e {
            Error::InvalidArgument(_) => Err(e),
            _ => Ok(()),
        })?;
    let mut rows = Vec::with_capacity(spec.values.len() * spec.harmonic_orders.len());
    for (vi, &value) in spec.values.iter().enumerate() {
        for (oi, &l) in spec.harmonic_orders.iter().enumerate() {
            let row_seed = noise
                .seed
                .wrapping_add((vi * spec.harmonic_orders.len() + oi) as u64);
            let row = match sweep_row(spec, base, noise, value, l, row_seed) {
                Ok((metrics, stability, alpha_reg)) => SweepRow {
                    param_value: value,
                    l,
                    metrics: Some(metrics),
                    stability,
                    alpha_reg: Some(alpha_reg),
                    status: "ok".into(),
                },
                Err(e) => SweepRow {
                    param_value: value,
                    l,
                    metrics: None,
                    stability: None,
                    alpha_reg: None,
                    status: e.to_string(),
                },
            };
            rows.push(row);
        }
    }
    Ok(SweepTable {
        kind: spec.kind,
        rows,
    })
}

fn sweep_row(
    spec: &SweepSpec,
    base: &Experiment,
    noise: &NoiseSpec,
    value: f64,
    l: u32,
    row_seed: u64,
) -> Result<(Metrics, Option<f64>, f64)> {
    let mut exp = apply_sweep_value(base, spec.kind, value)?;
    let p = exp.propagator;
    exp.propagator = PropagatorConfig::new(p.k, p.a_prime, p.eta1, p.eta2, l)?;
    let sys = assemble(&exp.source, &exp.regions, &exp.propagator)?;
    let fac = sys.factorize()?;
    let solution = solve_with_factorization(&exp, &sys, &fac)?;
    let metrics = compute_metrics(&solution, &sys);
    let stability = if noise.epsilon > 0.0 {
        let row_noise = NoiseSpec {
            epsilon: noise.epsilon,
            seed: row_seed,
        };
        Some(stability_on_factorization(&exp, &sys, &fac, &row_noise)?)
    } else {
        None
    };
    Ok((metrics, stability, solution.alpha_reg))
}

/// Spearman rank correlation with average ranks for ties. Returns NaN when
/// either sequence has zero rank variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    cov / (vx * vy).sqrt()
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // 1-based ranks; tied entries share the average of their span.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ExteriorSphereRegion, SectorRegion, SourceSpec};
    use crate::propagator::MediumParams;
    use crate::solver::{
        solve_control_problem, ExperimentRegion, RegionDiscretization, TargetField,
    };
    use std::f64::consts::PI;

    fn mini_experiment() -> Experiment {
        let source = SourceSpec::new(0.01, 0.0105, [0.0; 3]).unwrap();
        let near = SectorRegion::new(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
            [0.0; 3],
        )
        .unwrap();
        let far = ExteriorSphereRegion::new(10.0).unwrap();
        Experiment {
            source,
            propagator: PropagatorConfig::new(10.0, 0.01, 1.0, 1.0, 5).unwrap(),
            medium: MediumParams::default(),
            regions: vec![
                ExperimentRegion {
                    region: ControlRegion::Sector(near),
                    target: TargetField::plane_wave(
                        [1.0, 0.0, 0.0],
                        Complex64::new(1.0, 0.0),
                        10.0,
                    )
                    .unwrap(),
                    discretization: RegionDiscretization::SectorPoints(200),
                },
                ExperimentRegion {
                    region: ControlRegion::ExteriorSphere(far),
                    target: TargetField::Zero,
                    discretization: RegionDiscretization::SphereGrid {
                        azimuthal: 16,
                        polar: 8,
                    },
                },
            ],
            morozov_delta: 1e-3,
        }
    }

    fn mini_dual_sector() -> Experiment {
        let mut exp = mini_experiment();
        let secondary = SectorRegion::new(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[7.0 * PI / 4.0, 2.0 * PI], [0.0, PI / 4.0]],
            [0.09, 0.0, 0.0],
        )
        .unwrap();
        exp.regions[1] = ExperimentRegion {
            region: ControlRegion::Sector(secondary),
            target: TargetField::Zero,
            discretization: RegionDiscretization::SectorPoints(200),
        };
        exp.regions[0].target =
            TargetField::plane_wave([-1.0, 0.0, 0.0], Complex64::new(1.0, 0.0), 10.0).unwrap();
        exp
    }

    #[test]
    fn exact_match_gives_zero_errors() {
        let u = vec![
            Complex64::new(1.0, 2.0),
            Complex64::new(-0.3, 0.1),
            Complex64::new(0.0, -1.5),
        ];
        let w = vec![0.4, 0.1, 0.5];
        let m = region_metrics_from_samples(&u, &u, &w);
        assert_eq!(m.rel_l2, 0.0);
        assert_eq!(m.rel_sup, 0.0);
        assert_eq!(m.abs_sup, 0.0);
        assert!(m.relative_defined);

        // Zero target: relative columns fall back to absolute with a flag.
        let zeros = vec![Complex64::new(0.0, 0.0); 3];
        let mz = region_metrics_from_samples(&u, &zeros, &w);
        assert!(!mz.relative_defined);
        assert_eq!(mz.rel_sup, mz.abs_sup);
        assert_eq!(mz.rel_l2, mz.abs_l2);
        assert!(mz.abs_sup > 0.0);
    }

    #[test]
    fn weighted_l2_hand_example() {
        let u = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        let b = vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)];
        let w = vec![2.0, 3.0];
        let m = region_metrics_from_samples(&u, &b, &w);
        // err^2 = 2*1 + 3*1 = 5; target^2 = 3*1 = 3.
        assert!((m.abs_l2 - 5.0f64.sqrt()).abs() < 1e-15);
        assert!((m.rel_l2 - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(m.abs_sup, 1.0);
        assert_eq!(m.sup_target, 1.0);
        assert!((m.sup_field - 2.0).abs() < 1e-15);
    }

    #[test]
    fn contrast_invariant_under_global_field_scaling() {
        let exp = mini_experiment();
        let sys = assemble(&exp.source, &exp.regions, &exp.propagator).unwrap();
        let solution = solve_control_problem(&exp).unwrap();
        let m0 = compute_metrics(&solution, &sys);
        let c0 = m0.db_contrast.expect("loud and quiet regions present");

        let mut scaled = solution.clone();
        let s = Complex64::new(0.0, 3.0);
        let alpha: Vec<Complex64> = solution.coeffs.alpha().iter().map(|c| c * s).collect();
        scaled.coeffs =
            crate::propagator::DensityCoefficients::new(exp.propagator.l_max, alpha).unwrap();
        let m1 = compute_metrics(&scaled, &sys);
        let c1 = m1.db_contrast.unwrap();
        assert!((c0 - c1).abs() < 1e-9, "{c0} vs {c1}");

        assert_eq!(db_contrast(1.0, 0.0), None);
        assert_eq!(db_contrast(0.0, 1.0), None);
        let d = db_contrast(100.0, 1.0).unwrap();
        assert!((d - 40.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_mini_metrics_sane() {
        let exp = mini_experiment();
        let sys = assemble(&exp.source, &exp.regions, &exp.propagator).unwrap();
        let fac = sys.factorize().unwrap();
        let solution = solve_with_factorization(&exp, &sys, &fac).unwrap();
        let m = compute_metrics(&solution, &sys);
        assert!(m.rel_l2.is_finite() && m.rel_l2 >= 0.0);
        assert!(m.rel_sup.is_finite() && m.rel_sup >= 0.0);
        assert!(m.abs_sup.is_finite() && m.abs_sup >= 0.0);
        assert!(m.coeff_norm > 0.0);
        // The quiet exterior sits far below the controlled region.
        assert!(m.db_contrast.unwrap() > 20.0);
    }

    #[test]
    fn stability_zero_noise_is_exactly_zero() {
        let exp = mini_experiment();
        let s = stability_measure(&exp, &NoiseSpec::new(0.0, 7).unwrap()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn stability_depends_on_seed_and_is_finite() {
        let exp = mini_experiment();
        let s1 = stability_measure(&exp, &NoiseSpec::new(1e-3, 1).unwrap()).unwrap();
        let s2 = stability_measure(&exp, &NoiseSpec::new(1e-3, 2).unwrap()).unwrap();
        assert!(s1.is_finite() && s2.is_finite());
        assert!(s1 > 0.0 && s2 > 0.0);
        assert_ne!(s1, s2);
        // Replaying a seed reproduces the measure bit for bit.
        let s1b = stability_measure(&exp, &NoiseSpec::new(1e-3, 1).unwrap()).unwrap();
        assert_eq!(s1.to_bits(), s1b.to_bits());
    }

    #[test]
    fn stability_rejects_all_zero_targets() {
        let mut exp = mini_experiment();
        exp.regions[0].target = TargetField::Zero;
        assert!(stability_measure(&exp, &NoiseSpec::new(1e-3, 1).unwrap()).is_err());
    }

    #[test]
    fn stability_invariant_under_global_phase() {
        let exp = mini_experiment();
        let sys = assemble(&exp.source, &exp.regions, &exp.propagator).unwrap();
        let fac = sys.factorize().unwrap();
        let noise: Vec<Complex64> = draw_unit_noise(3, sys.n_rows())
            .into_iter()
            .map(|z| z * 1e-3)
            .collect();
        let s0 = stability_with_noise(&exp, &sys, &fac, &noise).unwrap();

        // Rotate the prescription and the noise realization by one global
        // phase; the measure is built from norms and must not move.
        let phase = Complex64::new(0.0, 0.7).exp();
        let mut rotated = exp.clone();
        rotated.regions[0].target =
            TargetField::plane_wave([1.0, 0.0, 0.0], phase, 10.0).unwrap();
        let sys_r = assemble(&rotated.source, &rotated.regions, &rotated.propagator).unwrap();
        let fac_r = sys_r.factorize().unwrap();
        let noise_r: Vec<Complex64> = noise.iter().map(|z| z * phase).collect();
        let s1 = stability_with_noise(&rotated, &sys_r, &fac_r, &noise_r).unwrap();
        assert!((s0 - s1).abs() <= 1e-10 * s0.max(1e-30), "{s0} vs {s1}");
    }

    #[test]
    fn sweep_single_value_cardinality() {
        let exp = mini_experiment();
        let spec = SweepSpec::new(SweepKind::Distance, vec![0.01], vec![3, 4, 5]).unwrap();
        let table = run_sweep(&spec, &exp, &NoiseSpec::new(0.0, 1).unwrap()).unwrap();
        assert_eq!(table.rows.len(), 3);
        for (row, l) in table.rows.iter().zip([3u32, 4, 5]) {
            assert_eq!(row.l, l);
            assert_eq!(row.param_value, 0.01);
            assert_eq!(row.status, "ok");
            assert!(row.metrics.is_some());
            assert!(row.alpha_reg.is_some());
            assert!(row.stability.is_none());
        }
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let exp = mini_experiment();
        // Shrinking both radii by 11 mm pushes the inner radius negative.
        let spec =
            SweepSpec::new(SweepKind::BothRadii, vec![-0.011, 0.0, 0.002], vec![4]).unwrap();
        let table = run_sweep(&spec, &exp, &NoiseSpec::new(1e-3, 5).unwrap()).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_ne!(table.rows[0].status, "ok");
        assert!(table.rows[0].metrics.is_none());
        for row in &table.rows[1..] {
            assert_eq!(row.status, "ok");
            assert!(row.metrics.is_some());
            assert!(row.stability.is_some());
        }
    }

    #[test]
    fn sweep_rotation_edits_last_sector() {
        let exp = mini_dual_sector();
        let spec = SweepSpec::new(SweepKind::Rotation, vec![0.0, PI / 2.0, PI], vec![4]).unwrap();
        let table = run_sweep(&spec, &exp, &NoiseSpec::new(0.0, 1).unwrap()).unwrap();
        assert_eq!(table.rows.len(), 3);
        for row in &table.rows {
            assert_eq!(row.status, "ok", "angle {}: {}", row.param_value, row.status);
        }
        // The edit really moves the secondary region.
        let turned = apply_sweep_value(&exp, SweepKind::Rotation, PI).unwrap();
        let ControlRegion::Sector(s2) = &turned.regions[1].region else {
            panic!("secondary region is a sector")
        };
        assert!((s2.translation()[0] + 0.09).abs() < 1e-15);
        let ControlRegion::Sector(s1) = &turned.regions[0].region else {
            panic!("primary region is a sector")
        };
        assert_eq!(s1.translation(), [0.0; 3]);
    }

    #[test]
    fn sweep_spec_validation() {
        assert!(SweepSpec::new(SweepKind::Distance, vec![], vec![4]).is_err());
        assert!(SweepSpec::new(SweepKind::Distance, vec![0.2, 0.1], vec![4]).is_err());
        assert!(SweepSpec::new(SweepKind::Distance, vec![0.1, 0.1], vec![4]).is_err());
        assert!(SweepSpec::new(SweepKind::Distance, vec![0.1], vec![]).is_err());
        assert!(SweepKind::parse("rotation").is_ok());
        assert!(SweepKind::parse("outer-radius").is_ok());
        assert!(SweepKind::parse("bogus").is_err());

        // A sweep over a geometry with no solid sector cannot start.
        let mut exp = mini_experiment();
        exp.regions.remove(0);
        let spec = SweepSpec::new(SweepKind::Distance, vec![0.01], vec![4]).unwrap();
        assert!(run_sweep(&spec, &exp, &NoiseSpec::new(0.0, 1).unwrap()).is_err());
    }

    #[test]
    fn spearman_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = [0.1, 0.5, 2.0, 30.0, 31.0];
        let down = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &up) - 1.0).abs() < 1e-14);
        assert!((spearman(&xs, &down) + 1.0).abs() < 1e-14);
        // Ties: ranks of [1, 1, 2, 3] are [1.5, 1.5, 3, 4];
        // correlation against [1, 2, 3, 4] is 4.5 / sqrt(5 * 4.5).
        let tied = [1.0, 1.0, 2.0, 3.0];
        let xs4 = [1.0, 2.0, 3.0, 4.0];
        let want = 4.5 / (5.0f64 * 4.5).sqrt();
        assert!((spearman(&xs4, &tied) - want).abs() < 1e-14);
    }
}
