//! Multi-frequency synthesis: solve the control problem per wavenumber,
//! superpose the solutions with prescribed Fourier weights, evolve in time,
//! and measure time-averaged errors against the prescribed pulse.
//!
//! Time is parameterized by tau = c t, so a component with wavenumber k
//! contributes exp(-i k tau). The default band k = 5, 5.5, ..., 15 has
//! spacing 1/2 and hence common period tau_P = 4 pi.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{discretize_sector_boundary, discretize_sphere_boundary, PointCloud, SectorRegion, Vec3};
use crate::propagator::{Propagator, PropagatorConfig};
use crate::solver::{
    solve_control_problem, Experiment, RegionDiscretization, Solution, TargetField,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisComponent {
    pub k: f64,
    pub weight: Complex64,
}

/// Frequency band and sampling for one synthesis run. Wavenumber positivity
/// is deliberately left to the per-frequency solves so a corrupted component
/// is reported as a numerical failure naming the frequency.
#[derive(Clone, Debug)]
pub struct SynthesisSpec {
    pub components: Vec<SynthesisComponent>,
    pub l_max: u32,
    pub n_time: usize,
    /// Common period of the band in tau = c t units.
    pub period: f64,
}

impl SynthesisSpec {
    pub fn new(
        components: Vec<SynthesisComponent>,
        l_max: u32,
        n_time: usize,
        period: f64,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument(
                "synthesis needs at least one frequency component".into(),
            ));
        }
        for (i, c) in components.iter().enumerate() {
            if !c.weight.re.is_finite() || !c.weight.im.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "component {i} has non-finite weight"
                )));
            }
            if !c.k.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "component {i} has non-finite wavenumber"
                )));
            }
        }
        for i in 0..components.len() {
            for j in (i + 1)..components.len() {
                if (components[i].k - components[j].k).abs() < 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "components {i} and {j} share wavenumber {}",
                        components[i].k
                    )));
                }
            }
        }
        if n_time == 0 {
            return Err(Error::InvalidArgument(
                "time sampling needs at least one sample".into(),
            ));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "period {period} must be positive and finite"
            )));
        }
        Ok(SynthesisSpec {
            components,
            l_max,
            n_time,
            period,
        })
    }

    /// The half-integer band k = l/2 for l in 10..=30 with weights 2/l,
    /// common period 4 pi.
    pub fn default_band(l_max: u32, n_time: usize) -> SynthesisSpec {
        let components = (10..=30)
            .map(|l| SynthesisComponent {
                k: l as f64 / 2.0,
                weight: Complex64::new(2.0 / l as f64, 0.0),
            })
            .collect();
        SynthesisSpec {
            components,
            l_max,
            n_time,
            period: 4.0 * std::f64::consts::PI,
        }
    }
}

/// Retarget a single-frequency prescription to a new wavenumber.
fn retarget(target: &TargetField, k: f64) -> Result<TargetField> {
    match target {
        TargetField::Zero => Ok(TargetField::Zero),
        TargetField::PlaneWave {
            direction,
            amplitude,
            ..
        } => TargetField::plane_wave(*direction, *amplitude, k),
        TargetField::Superposition(_) => Err(Error::InvalidArgument(
            "synthesis template regions must prescribe a single plane wave or zero".into(),
        )),
    }
}

/// Solve the control problem once per frequency component. The base
/// experiment supplies geometry, discretization, layer weights, and the
/// plane-wave template whose wavenumber is swapped per component.
pub fn fourier_solve(spec: &SynthesisSpec, base: &Experiment) -> Result<Vec<Solution>> {
    let mut out = Vec::with_capacity(spec.components.len());
    for comp in &spec.components {
        let solved = (|| -> Result<Solution> {
            let p = base.propagator;
            let mut exp = base.clone();
            exp.propagator = PropagatorConfig::new(comp.k, p.a_prime, p.eta1, p.eta2, spec.l_max)?;
            for region in &mut exp.regions {
                region.target = retarget(&region.target, comp.k)?;
            }
            solve_control_problem(&exp)
        })();
        match solved {
            Ok(s) => out.push(s),
            Err(e) => {
                return Err(Error::Numerical(format!(
                    "synthesis solve failed at wavenumber k = {}: {e}",
                    comp.k
                )))
            }
        }
    }
    Ok(out)
}

/// Complex single-frequency fields of every component on one fixed grid;
/// all time evolution is diagonal over this data.
pub struct ComponentFields {
    pub wavenumbers: Vec<f64>,
    pub weights: Vec<Complex64>,
    /// fields[c][p] = component c evaluated at point p.
    pub fields: Vec<Vec<Complex64>>,
    pub n_points: usize,
}

impl ComponentFields {
    /// Real field at every grid point at time tau: Re sum_c w_c f_c e^{-i k_c tau}.
    pub fn at_time(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0f64; self.n_points];
        for ((k, w), field) in self
            .wavenumbers
            .iter()
            .zip(&self.weights)
            .zip(&self.fields)
        {
            let rot = w * Complex64::new(0.0, -k * tau).exp();
            for (o, f) in out.iter_mut().zip(field) {
                *o += (rot * f).re;
            }
        }
        out
    }
}

/// Evaluate the generated per-frequency fields on a grid. Points the
/// propagator cannot evaluate (inside the fictitious sphere) are an error
/// unless `mask_invalid`, which marks them NaN for plotting grids.
fn generated_components(
    spec: &SynthesisSpec,
    base: &Experiment,
    solutions: &[Solution],
    points: &[Vec3],
    mask_invalid: bool,
) -> Result<ComponentFields> {
    if solutions.len() != spec.components.len() {
        return Err(Error::InvalidArgument(format!(
            "{} solutions for {} components",
            solutions.len(),
            spec.components.len()
        )));
    }
    let mut fields = Vec::with_capacity(spec.components.len());
    for (comp, sol) in spec.components.iter().zip(solutions) {
        let p = base.propagator;
        let cfg = PropagatorConfig::new(comp.k, p.a_prime, p.eta1, p.eta2, spec.l_max)?;
        let prop = Propagator::new(cfg, base.source.center)?;
        let mut values = Vec::with_capacity(points.len());
        for &x in points {
            match prop.eval_field_at(&sol.coeffs, x) {
                Ok(v) => values.push(v),
                Err(_) if mask_invalid => values.push(Complex64::new(f64::NAN, f64::NAN)),
                Err(e) => return Err(e),
            }
        }
        fields.push(values);
    }
    Ok(ComponentFields {
        wavenumbers: spec.components.iter().map(|c| c.k).collect(),
        weights: spec.components.iter().map(|c| c.weight).collect(),
        fields,
        n_points: points.len(),
    })
}

/// Strict evaluation for control-region grids.
pub fn evaluate_components(
    spec: &SynthesisSpec,
    base: &Experiment,
    solutions: &[Solution],
    points: &[Vec3],
) -> Result<ComponentFields> {
    generated_components(spec, base, solutions, points, false)
}

/// Masked evaluation for plotting grids that may cut through the source.
pub fn evaluate_components_masked(
    spec: &SynthesisSpec,
    base: &Experiment,
    solutions: &[Solution],
    points: &[Vec3],
) -> Result<ComponentFields> {
    generated_components(spec, base, solutions, points, true)
}

/// Per-frequency values of a plane-wave template retargeted across the band.
pub fn target_components(
    spec: &SynthesisSpec,
    template: &TargetField,
    points: &[Vec3],
) -> Result<ComponentFields> {
    let mut fields = Vec::with_capacity(spec.components.len());
    for comp in &spec.components {
        let t = retarget(template, comp.k)?;
        fields.push(points.iter().map(|&x| t.value_at(x)).collect());
    }
    Ok(ComponentFields {
        wavenumbers: spec.components.iter().map(|c| c.k).collect(),
        weights: spec.components.iter().map(|c| c.weight).collect(),
        fields,
        n_points: points.len(),
    })
}

/// Generated time-domain field on a grid at one instant.
pub fn time_field(
    spec: &SynthesisSpec,
    base: &Experiment,
    solutions: &[Solution],
    points: &[Vec3],
    tau: f64,
) -> Result<Vec<f64>> {
    Ok(evaluate_components(spec, base, solutions, points)?.at_time(tau))
}

/// Pointwise time averages of the synthesis error over one period.
pub struct TimeAveragedErrors {
    /// Points and time-averaged relative error on the prescribed regions.
    pub rel_points: Vec<Vec3>,
    pub rel_field: Vec<f64>,
    pub rel_sup: f64,
    /// Points and time-averaged absolute error on the null regions.
    pub abs_points: Vec<Vec3>,
    pub abs_field: Vec<f64>,
    pub abs_sup: f64,
    /// Time- and region-averaged |field|^2, for the energy contrast check.
    pub mean_square_loud: f64,
    pub mean_square_quiet: f64,
}

/// Average |generated - prescribed| over `n_time` uniform samples of one
/// period on every region boundary: relative errors where a pulse is
/// prescribed, absolute errors on the null regions.
pub fn time_averaged_errors(
    spec: &SynthesisSpec,
    base: &Experiment,
    solutions: &[Solution],
) -> Result<TimeAveragedErrors> {
    let mut rel_points = Vec::new();
    let mut rel_field = Vec::new();
    let mut abs_points = Vec::new();
    let mut abs_field = Vec::new();
    let mut loud_energy = 0.0;
    let mut loud_weight = 0.0;
    let mut quiet_energy = 0.0;
    let mut quiet_weight = 0.0;

    for region in &base.regions {
        let cloud = match (&region.region, region.discretization) {
            (crate::geometry::ControlRegion::Sector(s), RegionDiscretization::SectorPoints(n)) => {
                discretize_sector_boundary(s, n)?
            }
            (
                crate::geometry::ControlRegion::ExteriorSphere(e),
                RegionDiscretization::SphereGrid { azimuthal, polar },
            ) => discretize_sphere_boundary(e.radius, azimuthal, polar)?,
            _ => {
                return Err(Error::InvalidArgument(
                    "discretization kind does not match region kind".into(),
                ))
            }
        };
        let generated = evaluate_components(spec, base, solutions, &cloud.points)?;
        let loud = !region.target.is_zero();
        let targets = if loud {
            Some(target_components(spec, &region.target, &cloud.points)?)
        } else {
            None
        };
        let n_pts = cloud.points.len();
        let mut err_sum = vec![0.0f64; n_pts];
        let mut tgt_sum = vec![0.0f64; n_pts];
        let mut field_sq = vec![0.0f64; n_pts];
        for j in 0..spec.n_time {
            let tau = spec.period * j as f64 / spec.n_time as f64;
            let gen_t = generated.at_time(tau);
            match &targets {
                Some(t) => {
                    let tgt_t = t.at_time(tau);
                    for i in 0..n_pts {
                        err_sum[i] += (gen_t[i] - tgt_t[i]).abs();
                        tgt_sum[i] += tgt_t[i].abs();
                        field_sq[i] += gen_t[i] * gen_t[i];
                    }
                }
                None => {
                    for i in 0..n_pts {
                        err_sum[i] += gen_t[i].abs();
                        field_sq[i] += gen_t[i] * gen_t[i];
                    }
                }
            }
        }
        let nt = spec.n_time as f64;
        if loud {
            for i in 0..n_pts {
                let rel = if tgt_sum[i] > 0.0 {
                    err_sum[i] / tgt_sum[i]
                } else {
                    err_sum[i] / nt
                };
                rel_field.push(rel);
                rel_points.push(cloud.points[i]);
                loud_energy += cloud.weights[i] * field_sq[i] / nt;
            }
            loud_weight += cloud.total_weight();
        } else {
            for i in 0..n_pts {
                abs_field.push(err_sum[i] / nt);
                abs_points.push(cloud.points[i]);
                quiet_energy += cloud.weights[i] * field_sq[i] / nt;
            }
            quiet_weight += cloud.total_weight();
        }
    }

    let rel_sup = rel_field.iter().copied().fold(0.0f64, f64::max);
    let abs_sup = abs_field.iter().copied().fold(0.0f64, f64::max);
    Ok(TimeAveragedErrors {
        rel_points,
        rel_field,
        rel_sup,
        abs_points,
        abs_field,
        abs_sup,
        mean_square_loud: if loud_weight > 0.0 {
            loud_energy / loud_weight
        } else {
            0.0
        },
        mean_square_quiet: if quiet_weight > 0.0 {
            quiet_energy / quiet_weight
        } else {
            0.0
        },
    })
}

/// Cartesian grid over the equatorial slice through a sector's center:
/// n x n points spanning a square that covers the solid sector with a 10%
/// margin. Weights are unit placeholders; the grid is for field plots, not
/// quadrature.
pub fn cross_section_grid(region: &SectorRegion, n: usize) -> Result<PointCloud> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-section grid needs at least 2 points per side, got {n}"
        )));
    }
    let t = region.translation();
    let half = 1.1 * region.r_max();
    let mut points = Vec::with_capacity(n * n);
    for iy in 0..n {
        let y = t[1] - half + 2.0 * half * iy as f64 / (n - 1) as f64;
        for ix in 0..n {
            let x = t[0] - half + 2.0 * half * ix as f64 / (n - 1) as f64;
            points.push([x, y, t[2]]);
        }
    }
    Ok(PointCloud {
        points,
        normals: None,
        weights: vec![1.0; n * n],
    })
}

/// One exported frame: the field at a fixed time on a shared grid.
#[derive(Clone, Debug)]
pub struct TimeSnapshot {
    pub tau: f64,
    pub values: Vec<f64>,
}

/// Uniformly spaced frames over one period.
pub fn time_snapshots(fields: &ComponentFields, period: f64, n_snapshots: usize) -> Vec<TimeSnapshot> {
    (0..n_snapshots)
        .map(|i| {
            let tau = period * i as f64 / n_snapshots as f64;
            TimeSnapshot {
                tau,
                values: fields.at_time(tau),
            }
        })
        .collect()
}
