//! Weighted least-squares control problem: assemble the field-evaluation
//! system over all region boundaries, regularize with Tikhonov, and pick the
//! regularization weight by the Morozov discrepancy rule.
//!
//! The solve path goes through one thin SVD of the weighted matrix; every
//! alpha afterwards costs only a diagonal refilter, which is what makes the
//! discrepancy bisection and the noisy re-solves of the stability analysis
//! cheap.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    discretize_sector_boundary, discretize_sphere_boundary, dot, norm, validate_disjoint,
    ControlRegion, PointCloud, SourceSpec, Vec3,
};
use crate::propagator::{DensityCoefficients, MediumParams, Propagator, PropagatorConfig};

/// Prescribed field on one control region.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetField {
    Zero,
    PlaneWave {
        direction: Vec3,
        amplitude: Complex64,
        k: f64,
    },
    /// Sum of plane waves with pairwise distinct wavenumbers.
    Superposition(Vec<PlaneWaveComponent>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWaveComponent {
    pub direction: Vec3,
    pub amplitude: Complex64,
    pub k: f64,
}

impl TargetField {
    pub fn plane_wave(direction: Vec3, amplitude: Complex64, k: f64) -> Result<Self> {
        let n = norm(direction);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument(
                "plane-wave direction must be a nonzero vector".into(),
            ));
        }
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "plane-wave direction must be unit length, |d| = {n}"
            )));
        }
        if !(k > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "plane-wave wavenumber {k} must be positive"
            )));
        }
        Ok(TargetField::PlaneWave {
            direction,
            amplitude,
            k,
        })
    }

    pub fn superposition(components: Vec<PlaneWaveComponent>) -> Result<Self> {
        for c in &components {
            TargetField::plane_wave(c.direction, c.amplitude, c.k)?;
        }
        for i in 0..components.len() {
            for j in (i + 1)..components.len() {
                if (components[i].k - components[j].k).abs() < 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "superposition components {i} and {j} share wavenumber {}",
                        components[i].k
                    )));
                }
            }
        }
        Ok(TargetField::Superposition(components))
    }

    pub fn value_at(&self, x: Vec3) -> Complex64 {
        match self {
            TargetField::Zero => Complex64::new(0.0, 0.0),
            TargetField::PlaneWave {
                direction,
                amplitude,
                k,
            } => amplitude * Complex64::new(0.0, k * dot(*direction, x)).exp(),
            TargetField::Superposition(parts) => parts
                .iter()
                .map(|c| c.amplitude * Complex64::new(0.0, c.k * dot(c.direction, x)).exp())
                .sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TargetField::Zero)
    }
}

/// How a region's boundary is turned into quadrature points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionDiscretization {
    /// Total point budget spread over the sector faces.
    SectorPoints(usize),
    /// Equiangular grid for a sphere boundary.
    SphereGrid { azimuthal: usize, polar: usize },
}

#[derive(Clone, Debug)]
pub struct ExperimentRegion {
    pub region: ControlRegion,
    pub target: TargetField,
    pub discretization: RegionDiscretization,
}

/// Complete single-frequency experiment description.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub source: SourceSpec,
    pub propagator: PropagatorConfig,
    pub medium: MediumParams,
    pub regions: Vec<ExperimentRegion>,
    /// Morozov discrepancy target, relative to the weighted norm of the
    /// assembled target vector.
    pub morozov_delta: f64,
}

/// Assembled weighted system: row block per region, one column per harmonic.
pub struct LinearSystem {
    a: Mat<Complex64>,
    b: Vec<Complex64>,
    row_weights: Vec<f64>,
    region_rows: Vec<std::ops::Range<usize>>,
    clouds: Vec<PointCloud>,
    a_prime: f64,
}

impl LinearSystem {
    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn n_cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn region_rows(&self) -> &[std::ops::Range<usize>] {
        &self.region_rows
    }

    pub fn cloud(&self, region: usize) -> &PointCloud {
        &self.clouds[region]
    }

    pub fn rhs(&self) -> &[Complex64] {
        &self.b
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn a_prime(&self) -> f64 {
        self.a_prime
    }

    /// Build a system directly from dense entries, bypassing geometry. The
    /// rows form a single region with no attached point cloud.
    pub fn from_dense(
        rows: Vec<Vec<Complex64>>,
        b: Vec<Complex64>,
        row_weights: Vec<f64>,
        a_prime: f64,
    ) -> Result<Self> {
        let m = rows.len();
        if m == 0 || rows[0].is_empty() {
            return Err(Error::InvalidArgument("system must be nonempty".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("ragged system rows".into()));
        }
        if b.len() != m || row_weights.len() != m {
            return Err(Error::InvalidArgument(format!(
                "target length {} and weight length {} must both equal the row count {m}",
                b.len(),
                row_weights.len()
            )));
        }
        if row_weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidArgument(
                "row weights must be positive and finite".into(),
            ));
        }
        if !a_prime.is_finite() || a_prime <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "penalty radius {a_prime} must be positive"
            )));
        }
        let cloud = PointCloud {
            points: vec![[0.0; 3]; m],
            normals: None,
            weights: row_weights.clone(),
        };
        Ok(LinearSystem {
            a: Mat::from_fn(m, n, |i, j| rows[i][j]),
            b,
            row_weights,
            region_rows: vec![0..m],
            clouds: vec![cloud],
            a_prime,
        })
    }

    /// Field values A x on all rows.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        assert_eq!(x.len(), n);
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            let xj = x[j];
            for i in 0..m {
                out[i] += self.a[(i, j)] * xj;
            }
        }
        out
    }

    /// Weighted residual norm ||A x - b||_W.
    pub fn weighted_residual(&self, x: &[Complex64]) -> f64 {
        let u = self.apply(x);
        u.iter()
            .zip(&self.b)
            .zip(&self.row_weights)
            .map(|((ui, bi), wi)| wi * (ui - bi).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Weighted norm of the target vector.
    pub fn rhs_norm(&self) -> f64 {
        self.b
            .iter()
            .zip(&self.row_weights)
            .map(|(bi, wi)| wi * bi.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// sqrt(w) .* b, the right-hand side seen by the factorization.
    pub fn weighted_rhs(&self) -> Vec<Complex64> {
        self.b
            .iter()
            .zip(&self.row_weights)
            .map(|(bi, wi)| bi * wi.sqrt())
            .collect()
    }

    /// Thin SVD of sqrt(W) A.
    pub fn factorize(&self) -> Result<TikhonovFactorization> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        let weighted = Mat::from_fn(m, n, |i, j| self.a[(i, j)] * self.row_weights[i].sqrt());
        let svd = weighted
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
        let rank = m.min(n);
        let mut sigma = Vec::with_capacity(rank);
        for k in 0..rank {
            sigma.push(svd.S()[k].re);
        }
        let u = Mat::from_fn(m, rank, |i, j| svd.U()[(i, j)]);
        let v = Mat::from_fn(n, rank, |i, j| svd.V()[(i, j)]);
        Ok(TikhonovFactorization {
            sigma,
            u,
            v,
            m,
            n,
            a_prime: self.a_prime,
        })
    }
}

/// SVD of the weighted system matrix plus the penalty scaling. All Tikhonov
/// quantities for any alpha come from diagonal filters over this data.
pub struct TikhonovFactorization {
    sigma: Vec<f64>,
    u: Mat<Complex64>,
    v: Mat<Complex64>,
    m: usize,
    n: usize,
    a_prime: f64,
}

/// A right-hand side projected onto the factorization's left singular basis.
pub struct RhsProjection {
    beta: Vec<Complex64>,
    b_norm_sq: f64,
}

impl RhsProjection {
    pub fn rhs_norm(&self) -> f64 {
        self.b_norm_sq.sqrt()
    }
}

/// Morozov outcome: where the discrepancy target landed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorozovStatus {
    /// Residual inside [delta, 1.05 delta].
    WithinBand,
    /// Even the smallest alpha leaves residual above the band; returned the
    /// lower bracket (smallest-residual endpoint).
    AtLowerBracket,
    /// Even the largest alpha keeps residual below the band (target looser
    /// than the data); returned the upper bracket.
    AtUpperBracket,
}

#[derive(Clone, Debug)]
pub struct MorozovResult {
    pub alpha_reg: f64,
    pub coeffs: Vec<Complex64>,
    pub residual: f64,
    pub status: MorozovStatus,
}

impl TikhonovFactorization {
    /// Effective penalty: the functional charges alpha_reg times the squared
    /// density norm a'^2 |x|^2.
    fn alpha_bar(&self, alpha_reg: f64) -> f64 {
        alpha_reg * self.a_prime * self.a_prime
    }

    pub fn condition(&self) -> f64 {
        let max = self.sigma.first().copied().unwrap_or(0.0);
        let min = self.sigma.last().copied().unwrap_or(0.0);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Project a weighted right-hand side (sqrt(w) .* b) onto U.
    pub fn project(&self, b_weighted: &[Complex64]) -> Result<RhsProjection> {
        if b_weighted.len() != self.m {
            return Err(Error::InvalidArgument(format!(
                "right-hand side has {} rows, system has {}",
                b_weighted.len(),
                self.m
            )));
        }
        let rank = self.sigma.len();
        let mut beta = vec![Complex64::new(0.0, 0.0); rank];
        for k in 0..rank {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..self.m {
                acc += self.u[(i, k)].conj() * b_weighted[i];
            }
            beta[k] = acc;
        }
        let b_norm_sq = b_weighted.iter().map(|c| c.norm_sqr()).sum();
        Ok(RhsProjection { beta, b_norm_sq })
    }

    fn check_rank_for_zero_alpha(&self) -> Result<()> {
        if self.m < self.n {
            return Err(Error::Numerical(format!(
                "unregularized solve needs an overdetermined system, got {}x{}",
                self.m, self.n
            )));
        }
        let max = self.sigma.first().copied().unwrap_or(0.0);
        let min = self.sigma.last().copied().unwrap_or(0.0);
        let floor = max * self.m.max(self.n) as f64 * f64::EPSILON;
        if !(min > floor) {
            return Err(Error::Numerical(format!(
                "system is rank deficient at alpha = 0 (sigma_min = {min:e}, threshold {floor:e})"
            )));
        }
        Ok(())
    }

    /// Tikhonov minimizer for the given regularization weight.
    pub fn solve(&self, proj: &RhsProjection, alpha_reg: f64) -> Result<Vec<Complex64>> {
        if !(alpha_reg >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization weight {alpha_reg} must be nonnegative"
            )));
        }
        if alpha_reg == 0.0 {
            self.check_rank_for_zero_alpha()?;
        }
        let ab = self.alpha_bar(alpha_reg);
        let rank = self.sigma.len();
        let mut filtered = vec![Complex64::new(0.0, 0.0); rank];
        for k in 0..rank {
            let s = self.sigma[k];
            filtered[k] = proj.beta[k] * (s / (s * s + ab));
        }
        let mut x = vec![Complex64::new(0.0, 0.0); self.n];
        for k in 0..rank {
            let fk = filtered[k];
            for j in 0..self.n {
                x[j] += self.v[(j, k)] * fk;
            }
        }
        Ok(x)
    }

    /// Weighted residual norm at `alpha_reg` without forming the solution.
    pub fn residual(&self, proj: &RhsProjection, alpha_reg: f64) -> f64 {
        let ab = self.alpha_bar(alpha_reg);
        let mut in_span = 0.0;
        let mut captured = 0.0;
        for (s, b) in self.sigma.iter().zip(&proj.beta) {
            let filter = ab / (s * s + ab);
            let bsq = b.norm_sqr();
            in_span += filter * filter * bsq;
            captured += bsq;
        }
        // The component of b outside the range of A is irreducible.
        let outside = (proj.b_norm_sq - captured).max(0.0);
        (in_span + outside).sqrt()
    }

    /// Euclidean norm of the coefficient vector at `alpha_reg`.
    pub fn coeff_vector_norm(&self, proj: &RhsProjection, alpha_reg: f64) -> f64 {
        let ab = self.alpha_bar(alpha_reg);
        self.sigma
            .iter()
            .zip(&proj.beta)
            .map(|(s, b)| {
                let f = s / (s * s + ab);
                f * f * b.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Morozov discrepancy selection: bisect log10(alpha) in [-16, 4] until
    /// the weighted residual lands in [delta, 1.05 delta]. The residual is
    /// provably nondecreasing in alpha; a detected violation means the
    /// factorization went bad and is reported as a numerical error.
    pub fn morozov(&self, proj: &RhsProjection, delta: f64) -> Result<MorozovResult> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "discrepancy target {delta} must be nonnegative and finite"
            )));
        }
        const LOG_LO: f64 = -16.0;
        const LOG_HI: f64 = 4.0;
        if proj.b_norm_sq == 0.0 {
            // Zero data: zero solution at maximal regularization.
            return Ok(MorozovResult {
                alpha_reg: 10f64.powf(LOG_HI),
                coeffs: self.solve(proj, 10f64.powf(LOG_HI))?,
                residual: 0.0,
                status: MorozovStatus::WithinBand,
            });
        }
        let band = delta..=(1.05 * delta);
        let mut guard = MonotonicityGuard::new();
        let mut eval = |log_alpha: f64| -> Result<f64> {
            let r = self.residual(proj, 10f64.powf(log_alpha));
            guard.record(log_alpha, r)?;
            Ok(r)
        };
        let r_lo = eval(LOG_LO)?;
        if r_lo > *band.end() {
            let alpha = 10f64.powf(LOG_LO);
            return Ok(MorozovResult {
                alpha_reg: alpha,
                coeffs: self.solve(proj, alpha)?,
                residual: r_lo,
                status: MorozovStatus::AtLowerBracket,
            });
        }
        let r_hi = eval(LOG_HI)?;
        if r_hi < *band.start() {
            let alpha = 10f64.powf(LOG_HI);
            return Ok(MorozovResult {
                alpha_reg: alpha,
                coeffs: self.solve(proj, alpha)?,
                residual: r_hi,
                status: MorozovStatus::AtUpperBracket,
            });
        }
        let (mut lo, mut hi) = (LOG_LO, LOG_HI);
        // Invariant: residual(lo) <= 1.05 delta, residual(hi) >= delta.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = eval(mid)?;
            if band.contains(&r) {
                let alpha = 10f64.powf(mid);
                return Ok(MorozovResult {
                    alpha_reg: alpha,
                    coeffs: self.solve(proj, alpha)?,
                    residual: r,
                    status: MorozovStatus::WithinBand,
                });
            }
            if r < delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::Numerical(
            "discrepancy bisection failed to land in the target band".into(),
        ))
    }
}

/// Residual samples must be nondecreasing in alpha; tiny fp slack allowed.
struct MonotonicityGuard {
    samples: Vec<(f64, f64)>,
}

impl MonotonicityGuard {
    fn new() -> Self {
        MonotonicityGuard {
            samples: Vec::new(),
        }
    }

    fn record(&mut self, log_alpha: f64, residual: f64) -> Result<()> {
        for &(la, r) in &self.samples {
            let violates = if la < log_alpha {
                r > residual * (1.0 + 1e-9) + 1e-300
            } else {
                residual > r * (1.0 + 1e-9) + 1e-300
            };
            if violates {
                return Err(Error::Numerical(format!(
                    "residual is not monotone in the regularization weight \
                     (r(1e{la:.2}) = {r:e}, r(1e{log_alpha:.2}) = {residual:e})"
                )));
            }
        }
        self.samples.push((log_alpha, residual));
        Ok(())
    }
}

/// Discretize every region and evaluate the field operator on all boundary
/// points. Row weights fold the quadrature weight with the region weight:
/// 1 for bounded regions, 1/(4 pi R^2) for the exterior-ball complement.
pub fn assemble(
    source: &SourceSpec,
    regions: &[ExperimentRegion],
    cfg: &PropagatorConfig,
) -> Result<LinearSystem> {
    if regions.is_empty() {
        return Err(Error::InvalidArgument("no control regions configured".into()));
    }
    let geo: Vec<ControlRegion> = regions.iter().map(|r| r.region.clone()).collect();
    validate_disjoint(source, &geo)?;

    let mut clouds = Vec::with_capacity(regions.len());
    let mut mus = Vec::with_capacity(regions.len());
    for spec in regions {
        let (cloud, mu) = match (&spec.region, spec.discretization) {
            (ControlRegion::Sector(s), RegionDiscretization::SectorPoints(n)) => {
                (discretize_sector_boundary(s, n)?, 1.0)
            }
            (
                ControlRegion::ExteriorSphere(e),
                RegionDiscretization::SphereGrid { azimuthal, polar },
            ) => (
                discretize_sphere_boundary(e.radius, azimuthal, polar)?,
                1.0 / (4.0 * std::f64::consts::PI * e.radius * e.radius),
            ),
            _ => {
                return Err(Error::InvalidArgument(
                    "discretization kind does not match region kind".into(),
                ))
            }
        };
        if cloud.is_empty() {
            return Err(Error::Geometry("region discretized to zero points".into()));
        }
        clouds.push(cloud);
        mus.push(mu);
    }

    let total_rows: usize = clouds.iter().map(|c| c.len()).sum();
    let n_cols = crate::specfun::HarmonicIndex::count(cfg.l_max);
    let propagator = Propagator::new(*cfg, source.center)?;
    let mut a = Mat::zeros(total_rows, n_cols);
    let mut b = vec![Complex64::new(0.0, 0.0); total_rows];
    let mut row_weights = vec![0.0f64; total_rows];
    let mut region_rows = Vec::with_capacity(regions.len());
    let mut row = 0usize;
    for ((spec, cloud), mu) in regions.iter().zip(&clouds).zip(&mus) {
        let start = row;
        for (p, w) in cloud.points.iter().zip(&cloud.weights) {
            let entries = propagator.basis_row(*p)?;
            for (j, e) in entries.into_iter().enumerate() {
                a[(row, j)] = e;
            }
            b[row] = spec.target.value_at(*p);
            row_weights[row] = w * mu;
            row += 1;
        }
        region_rows.push(start..row);
    }

    Ok(LinearSystem {
        a,
        b,
        row_weights,
        region_rows,
        clouds,
        a_prime: cfg.a_prime,
    })
}

/// One-shot Tikhonov solve at a fixed regularization weight.
pub fn tikhonov_solve(sys: &LinearSystem, alpha_reg: f64) -> Result<Vec<Complex64>> {
    let fac = sys.factorize()?;
    let proj = fac.project(&sys.weighted_rhs())?;
    fac.solve(&proj, alpha_reg)
}

/// Morozov-selected solve against an absolute discrepancy target.
pub fn morozov_select(sys: &LinearSystem, delta: f64) -> Result<MorozovResult> {
    let fac = sys.factorize()?;
    let proj = fac.project(&sys.weighted_rhs())?;
    fac.morozov(&proj, delta)
}

/// Solution record: density coefficients plus the diagnostics the sweeps and
/// reports consume.
#[derive(Clone, Debug)]
pub struct Solution {
    pub coeffs: DensityCoefficients,
    pub alpha_reg: f64,
    pub residual_by_region: Vec<f64>,
    pub coeff_norm: f64,
    pub condition_estimate: f64,
    pub morozov_status: MorozovStatus,
    pub delta_abs: f64,
    pub residual: f64,
}

/// Assemble, factorize, select alpha by discrepancy, and package diagnostics.
pub fn solve_control_problem(experiment: &Experiment) -> Result<Solution> {
    let sys = assemble(&experiment.source, &experiment.regions, &experiment.propagator)?;
    solve_on_system(experiment, &sys)
}

/// Same as [`solve_control_problem`] on a pre-assembled system.
pub fn solve_on_system(experiment: &Experiment, sys: &LinearSystem) -> Result<Solution> {
    let fac = sys.factorize()?;
    solve_with_factorization(experiment, sys, &fac)
}

/// Innermost solve step, reusing an existing factorization of `sys`.
pub fn solve_with_factorization(
    experiment: &Experiment,
    sys: &LinearSystem,
    fac: &TikhonovFactorization,
) -> Result<Solution> {
    if !(experiment.morozov_delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "relative discrepancy target {} must be positive",
            experiment.morozov_delta
        )));
    }
    let proj = fac.project(&sys.weighted_rhs())?;
    let delta = experiment.morozov_delta * proj.rhs_norm();
    let selected = fac.morozov(&proj, delta)?;

    let u = sys.apply(&selected.coeffs);
    let mut residual_by_region = Vec::with_capacity(sys.region_rows().len());
    for range in sys.region_rows() {
        let r2: f64 = range
            .clone()
            .map(|i| sys.row_weights[i] * (u[i] - sys.b[i]).norm_sqr())
            .sum();
        residual_by_region.push(r2.sqrt());
    }
    let coeffs = DensityCoefficients::new(experiment.propagator.l_max, selected.coeffs)?;
    let coeff_norm = sys.a_prime * coeffs.coeff_norm();
    Ok(Solution {
        coeffs,
        alpha_reg: selected.alpha_reg,
        residual_by_region,
        coeff_norm,
        condition_estimate: fac.condition(),
        morozov_status: selected.status,
        delta_abs: delta,
        residual: selected.residual,
    })
}
