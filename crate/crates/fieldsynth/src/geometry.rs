//! Source and control-region geometry: spherical sectors, exterior-ball
//! complements, their rigid edits, and boundary discretizations with
//! surface-measure quadrature weights.
//!
//! Angles follow the elevation convention of [`crate::specfun`]: `theta` is
//! measured from the equator, azimuth arcs live on `[0, 2*pi]`.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Fictitious source sphere (radius `a_prime`) inside the physical source
/// ball (radius `a_phys`), both centered at `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSpec {
    pub a_prime: f64,
    pub a_phys: f64,
    pub center: Vec3,
}

impl SourceSpec {
    pub fn new(a_prime: f64, a_phys: f64, center: Vec3) -> Result<Self> {
        if !(a_prime > 0.0 && a_phys > a_prime) {
            return Err(Error::Geometry(format!(
                "need 0 < a_prime < a_phys, got a_prime={a_prime}, a_phys={a_phys}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Geometry("source center must be finite".into()));
        }
        Ok(SourceSpec {
            a_prime,
            a_phys,
            center,
        })
    }
}

/// Azimuth arc, stored with `start` in `[0, 2*pi)`; `end` may exceed `2*pi`
/// when the arc wraps through zero. `end - start` is the arc length.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Arc {
    start: f64,
    end: f64,
}

impl Arc {
    fn len(self) -> f64 {
        self.end - self.start
    }

    fn is_full_circle(self) -> bool {
        self.len() >= TWO_PI - 1e-12
    }

    fn contains(self, phi: f64) -> bool {
        let rel = (phi - self.start).rem_euclid(TWO_PI);
        rel <= self.len() + 1e-12 || rel >= TWO_PI - 1e-12
    }

    fn midpoint(self) -> f64 {
        (self.start + 0.5 * self.len()).rem_euclid(TWO_PI)
    }
}

/// Merge raw `[start, end]` azimuth intervals into disjoint arcs, joining
/// pairs that touch at an endpoint or across the 2*pi seam, so that wall
/// faces appear only at genuine angular boundaries.
fn canonicalize_arcs(raw: &[[f64; 2]]) -> Result<Vec<Arc>> {
    if raw.is_empty() {
        return Err(Error::Geometry("at least one azimuth interval required".into()));
    }
    let mut ivs: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
    for &[a, b] in raw {
        if !(a.is_finite() && b.is_finite()) || !(b > a) {
            return Err(Error::Geometry(format!(
                "azimuth interval [{a}, {b}] must be finite with start < end"
            )));
        }
        if a < -1e-12 || b > TWO_PI + 1e-12 || b - a > TWO_PI + 1e-12 {
            return Err(Error::Geometry(format!(
                "azimuth interval [{a}, {b}] must lie within [0, 2*pi]"
            )));
        }
        ivs.push((a.max(0.0), b.min(TWO_PI)));
    }
    ivs.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in ivs.windows(2) {
        if w[1].0 < w[0].1 - 1e-12 {
            return Err(Error::Geometry(format!(
                "azimuth intervals [{}, {}] and [{}, {}] overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    // Merge touching neighbors.
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
    for (a, b) in ivs {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1e-12 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    // Join across the seam: last interval ending at 2*pi continues into the
    // first one starting at 0.
    let total: f64 = merged.iter().map(|(a, b)| b - a).sum();
    if merged.len() >= 2 {
        let first = merged[0];
        let last = *merged.last().unwrap();
        if first.0 <= 1e-12 && last.1 >= TWO_PI - 1e-12 && total < TWO_PI - 1e-12 {
            merged.pop();
            merged.remove(0);
            merged.push((last.0, last.1 + (first.1 - first.0)));
        }
    }
    Ok(merged
        .into_iter()
        .map(|(a, b)| Arc {
            start: a.rem_euclid(TWO_PI),
            end: a.rem_euclid(TWO_PI) + (b - a).min(TWO_PI),
        })
        .collect())
}

/// Solid spherical sector shell: radial range x elevation range x azimuth
/// arcs, rigidly translated by `translation`.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorRegion {
    r_range: [f64; 2],
    theta_range: [f64; 2],
    arcs: Vec<Arc>,
    translation: Vec3,
}

impl SectorRegion {
    pub fn new(
        r_range: [f64; 2],
        theta_range: [f64; 2],
        phi_intervals: &[[f64; 2]],
        translation: Vec3,
    ) -> Result<Self> {
        if !(r_range[0] > 0.0 && r_range[1] > r_range[0]) {
            return Err(Error::Geometry(format!(
                "need 0 < r_min < r_max, got [{}, {}]",
                r_range[0], r_range[1]
            )));
        }
        if !(theta_range[0] >= -HALF_PI - 1e-12
            && theta_range[1] <= HALF_PI + 1e-12
            && theta_range[1] > theta_range[0])
        {
            return Err(Error::Geometry(format!(
                "elevation range [{}, {}] must be increasing within [-pi/2, pi/2]",
                theta_range[0], theta_range[1]
            )));
        }
        if translation.iter().any(|c| !c.is_finite()) {
            return Err(Error::Geometry("translation must be finite".into()));
        }
        let arcs = canonicalize_arcs(phi_intervals)?;
        Ok(SectorRegion {
            r_range,
            theta_range: [theta_range[0].max(-HALF_PI), theta_range[1].min(HALF_PI)],
            arcs,
            translation,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_range[0]
    }

    pub fn r_max(&self) -> f64 {
        self.r_range[1]
    }

    pub fn theta_range(&self) -> [f64; 2] {
        self.theta_range
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    /// Azimuth arcs as `[start, end]` pairs; `end` may exceed 2*pi for an arc
    /// wrapping through zero.
    pub fn phi_intervals(&self) -> Vec<[f64; 2]> {
        self.arcs.iter().map(|a| [a.start, a.end]).collect()
    }

    /// Unit vector from the origin through the sector's angular center
    /// (mid-elevation, midpoint of the first azimuth arc), ignoring the
    /// translation. Radial shifts move the region along this ray.
    pub fn central_ray(&self) -> Vec3 {
        let theta = 0.5 * (self.theta_range[0] + self.theta_range[1]);
        let phi = self.arcs[0].midpoint();
        [
            theta.cos() * phi.cos(),
            theta.cos() * phi.sin(),
            theta.sin(),
        ]
    }

    /// Rigid counterclockwise rotation about the origin's z-axis: both the
    /// placement and the azimuth arcs turn, so the rotated set is congruent
    /// to the original.
    pub fn rotate_about_origin(&self, angle: f64) -> SectorRegion {
        let (s, c) = angle.sin_cos();
        let t = self.translation;
        let mut out = self.clone();
        out.translation = [c * t[0] - s * t[1], s * t[0] + c * t[1], t[2]];
        for a in &mut out.arcs {
            let len = a.end - a.start;
            a.start = (a.start + angle).rem_euclid(TWO_PI);
            a.end = a.start + len;
        }
        out.arcs.sort_by(|x, y| x.start.total_cmp(&y.start));
        out
    }

    /// Translate the region by `delta` along its central ray; positive delta
    /// moves it away from the origin.
    pub fn shift_radially(&self, delta: f64) -> SectorRegion {
        let d = self.central_ray();
        let mut out = self.clone();
        out.translation = add(self.translation, scale(d, delta));
        out
    }

    pub fn grow_outer_radius(&self, delta: f64) -> Result<SectorRegion> {
        let mut out = self.clone();
        out.r_range[1] += delta;
        if !(out.r_range[1] > out.r_range[0]) {
            return Err(Error::Geometry(format!(
                "outer radius {} not greater than inner {}",
                out.r_range[1], out.r_range[0]
            )));
        }
        Ok(out)
    }

    pub fn grow_both_radii(&self, delta: f64) -> Result<SectorRegion> {
        let mut out = self.clone();
        out.r_range[0] += delta;
        out.r_range[1] += delta;
        if !(out.r_range[0] > 0.0) {
            return Err(Error::Geometry(format!(
                "inner radius {} must stay positive",
                out.r_range[0]
            )));
        }
        Ok(out)
    }

    /// Analytic membership test (closed region).
    pub fn contains(&self, x: Vec3) -> bool {
        let y = sub(x, self.translation);
        let r = norm(y);
        if r < self.r_range[0] - 1e-12 || r > self.r_range[1] + 1e-12 {
            return false;
        }
        let theta = (y[2] / r).clamp(-1.0, 1.0).asin();
        if theta < self.theta_range[0] - 1e-12 || theta > self.theta_range[1] + 1e-12 {
            return false;
        }
        let phi = y[1].atan2(y[0]).rem_euclid(TWO_PI);
        self.arcs.iter().any(|a| a.contains(phi))
    }

    /// Largest distance from the origin to any point of the region.
    pub fn max_extent_from_origin(&self) -> f64 {
        norm(self.translation) + self.r_range[1]
    }
}

/// Complement of the open ball B_R(0): everything at radius >= R.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExteriorSphereRegion {
    pub radius: f64,
}

impl ExteriorSphereRegion {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Geometry(format!("exterior radius {radius} must be positive")));
        }
        Ok(ExteriorSphereRegion { radius })
    }

    pub fn contains(&self, x: Vec3) -> bool {
        norm(x) >= self.radius - 1e-12
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControlRegion {
    Sector(SectorRegion),
    ExteriorSphere(ExteriorSphereRegion),
}

impl ControlRegion {
    pub fn contains(&self, x: Vec3) -> bool {
        match self {
            ControlRegion::Sector(s) => s.contains(x),
            ControlRegion::ExteriorSphere(e) => e.contains(x),
        }
    }
}

/// Boundary sample points with outward unit normals and quadrature weights.
/// Weights carry surface measure: summing `w_i |f_i|^2` over a cloud is the
/// discrete L2 norm on that boundary.
#[derive(Clone, Debug)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub weights: Vec<f64>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Split `total` into one count per entry of `shares`, proportional to the
/// shares, each at least 1, summing to `total` exactly (largest remainder).
fn apportion(shares: &[f64], total: usize) -> Result<Vec<usize>> {
    let n = shares.len();
    if total < n {
        return Err(Error::InvalidArgument(format!(
            "cannot place {total} points on {n} faces (need at least one each)"
        )));
    }
    let sum: f64 = shares.iter().sum();
    let mut counts = vec![1usize; n];
    let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut assigned = n;
    let spare = (total - n) as f64;
    for (i, &s) in shares.iter().enumerate() {
        let quota = spare * s / sum;
        let base = quota.floor() as usize;
        counts[i] += base;
        assigned += base;
        fracs.push((quota - base as f64, i));
    }
    fracs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in fracs.iter().take(total - assigned) {
        counts[i] += 1;
    }
    Ok(counts)
}

fn midpoints(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..n).map(|i| a + (i as f64 + 0.5) * h).collect()
}

/// One flat boundary patch of a sector, with enough structure to lay a grid.
struct Face {
    area: f64,
    // Extents give the grid its aspect ratio.
    extent_row: f64,
    extent_col: f64,
    kind: FaceKind,
}

enum FaceKind {
    /// Spherical cap patch at fixed radius; `sign` +1 outer, -1 inner.
    Cap { r: f64, arc: Arc, sign: f64 },
    /// Conical strip at fixed elevation; `sign` +1 at theta_max, -1 at theta_min.
    Strip { theta: f64, arc: Arc, sign: f64 },
    /// Planar wall at fixed azimuth; `sign` +1 at arc end, -1 at arc start.
    Wall { phi: f64, sign: f64 },
}

fn unit_dir(theta: f64, phi: f64) -> Vec3 {
    [theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin()]
}

fn enumerate_faces(region: &SectorRegion) -> Vec<Face> {
    let [r0, r1] = region.r_range;
    let [t0, t1] = region.theta_range;
    let half_r2 = 0.5 * (r1 * r1 - r0 * r0);
    let r_mid = 0.5 * (r0 + r1);
    let mut faces = Vec::new();
    for &arc in &region.arcs {
        let alen = arc.len();
        let cap_band = t1.sin() - t0.sin();
        for (r, sign) in [(r0, -1.0), (r1, 1.0)] {
            faces.push(Face {
                area: r * r * cap_band * alen,
                extent_row: r * (t1 - t0),
                extent_col: r * 0.5 * (t0.cos() + t1.cos()) * alen,
                kind: FaceKind::Cap { r, arc, sign },
            });
        }
        for (theta, sign) in [(t0, -1.0), (t1, 1.0)] {
            // Degenerate at the poles: the strip collapses to a point set.
            if theta.cos() * r_mid * alen < 1e-14 {
                continue;
            }
            faces.push(Face {
                area: theta.cos() * alen * half_r2,
                extent_row: r1 - r0,
                extent_col: r_mid * theta.cos() * alen,
                kind: FaceKind::Strip { theta, arc, sign },
            });
        }
        if !arc.is_full_circle() {
            for (phi, sign) in [(arc.start, -1.0), (arc.end.rem_euclid(TWO_PI), 1.0)] {
                faces.push(Face {
                    area: (t1 - t0) * half_r2,
                    extent_row: r1 - r0,
                    extent_col: r_mid * (t1 - t0),
                    kind: FaceKind::Wall { phi, sign },
                });
            }
        }
    }
    faces.retain(|f| f.area > 1e-16);
    faces
}

/// Sample the boundary of a sector region into `n_points` weighted points.
///
/// Points go to the faces proportionally to face area and are laid out as
/// near-uniform midpoint grids; every point on a face carries the same
/// weight, face area / face count, so weights sum to the exact boundary area.
pub fn discretize_sector_boundary(region: &SectorRegion, n_points: usize) -> Result<PointCloud> {
    if n_points < 100 {
        return Err(Error::InvalidArgument(format!(
            "sector boundary needs at least 100 points, got {n_points}"
        )));
    }
    let faces = enumerate_faces(region);
    if faces.is_empty() {
        return Err(Error::Geometry("sector region has zero-measure boundary".into()));
    }
    let areas: Vec<f64> = faces.iter().map(|f| f.area).collect();
    let counts = apportion(&areas, n_points)?;

    let [r0, r1] = region.r_range;
    let [t0, t1] = region.theta_range;
    let mut points = Vec::with_capacity(n_points);
    let mut normals = Vec::with_capacity(n_points);
    let mut weights = Vec::with_capacity(n_points);
    for (face, &count) in faces.iter().zip(&counts) {
        let weight = face.area / count as f64;
        let n_rows = ((count as f64 * face.extent_row / face.extent_col).sqrt().round()
            as usize)
            .clamp(1, count);
        let mut emit = |r: f64, theta: f64, phi: f64, normal: Vec3| {
            points.push(add(region.translation, scale(unit_dir(theta, phi), r)));
            normals.push(normal);
            weights.push(weight);
        };
        match face.kind {
            FaceKind::Cap { r, arc, sign } => {
                // Rows in elevation, weighted by band area sin(top)-sin(bot).
                let edges = |j: usize| t0 + (t1 - t0) * j as f64 / n_rows as f64;
                let shares: Vec<f64> =
                    (0..n_rows).map(|j| edges(j + 1).sin() - edges(j).sin()).collect();
                let row_counts = apportion(&shares, count)?;
                for (j, &c) in row_counts.iter().enumerate() {
                    let theta = 0.5 * (edges(j) + edges(j + 1));
                    for phi in midpoints(arc.start, arc.end, c) {
                        emit(r, theta, phi, scale(unit_dir(theta, phi), sign));
                    }
                }
            }
            FaceKind::Strip { theta, arc, sign } => {
                // Rows in radius, weighted by r dr band measure.
                let edges = |j: usize| r0 + (r1 - r0) * j as f64 / n_rows as f64;
                let shares: Vec<f64> = (0..n_rows)
                    .map(|j| edges(j + 1).powi(2) - edges(j).powi(2))
                    .collect();
                let row_counts = apportion(&shares, count)?;
                // Elevation unit vector (direction of increasing theta).
                for (j, &c) in row_counts.iter().enumerate() {
                    let r = 0.5 * (edges(j) + edges(j + 1));
                    for phi in midpoints(arc.start, arc.end, c) {
                        let n = [
                            -theta.sin() * phi.cos(),
                            -theta.sin() * phi.sin(),
                            theta.cos(),
                        ];
                        emit(r, theta, phi, scale(n, sign));
                    }
                }
            }
            FaceKind::Wall { phi, sign } => {
                let edges = |j: usize| r0 + (r1 - r0) * j as f64 / n_rows as f64;
                let shares: Vec<f64> = (0..n_rows)
                    .map(|j| edges(j + 1).powi(2) - edges(j).powi(2))
                    .collect();
                let row_counts = apportion(&shares, count)?;
                let n = scale([-phi.sin(), phi.cos(), 0.0], sign);
                for (j, &c) in row_counts.iter().enumerate() {
                    let r = 0.5 * (edges(j) + edges(j + 1));
                    for theta in midpoints(t0, t1, c) {
                        emit(r, theta, phi, n);
                    }
                }
            }
        }
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
        weights,
    })
}

/// Equiangular grid on the origin-centered sphere of radius `r`: `n_polar`
/// elevation bands (points at band midpoints) by `n_azimuthal` meridians.
/// Each weight is the exact area of its grid cell, so the weights sum to
/// `4 pi r^2` at machine precision even on coarse grids.
pub fn discretize_sphere_boundary(r: f64, n_azimuthal: usize, n_polar: usize) -> Result<PointCloud> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("sphere radius {r} must be positive")));
    }
    if n_azimuthal < 4 || n_polar < 4 {
        return Err(Error::InvalidArgument(format!(
            "sphere grid needs counts >= 4, got {n_azimuthal} x {n_polar}"
        )));
    }
    let d_theta = std::f64::consts::PI / n_polar as f64;
    let d_phi = TWO_PI / n_azimuthal as f64;
    let mut points = Vec::with_capacity(n_azimuthal * n_polar);
    let mut normals = Vec::with_capacity(n_azimuthal * n_polar);
    let mut weights = Vec::with_capacity(n_azimuthal * n_polar);
    for j in 0..n_polar {
        let lo = -HALF_PI + j as f64 * d_theta;
        let theta = lo + 0.5 * d_theta;
        // Exact band area; equals r^2 cos(theta) d_theta d_phi up to the
        // sinc(d_theta/2) midpoint factor.
        let w = r * r * d_phi * ((lo + d_theta).sin() - lo.sin());
        for i in 0..n_azimuthal {
            let phi = i as f64 * d_phi;
            let dir = unit_dir(theta, phi);
            points.push(scale(dir, r));
            normals.push(dir);
            weights.push(w);
        }
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
        weights,
    })
}

/// Check that the configured regions can coexist: control regions must not
/// touch the physical source ball or each other, bounded regions must stay
/// inside an exterior region's ball, and at most one exterior region may
/// appear.
pub fn validate_disjoint(source: &SourceSpec, regions: &[ControlRegion]) -> Result<()> {
    let exteriors: Vec<&ExteriorSphereRegion> = regions
        .iter()
        .filter_map(|r| match r {
            ControlRegion::ExteriorSphere(e) => Some(e),
            _ => None,
        })
        .collect();
    if exteriors.len() > 1 {
        return Err(Error::Geometry(
            "at most one exterior control region is supported".into(),
        ));
    }
    let outer_radius = exteriors.first().map(|e| e.radius);
    if let Some(rr) = outer_radius {
        if rr <= source.a_phys + norm(source.center) {
            return Err(Error::Geometry(format!(
                "exterior region radius {rr} does not clear the physical source"
            )));
        }
    }

    // Sample clouds once per sector; resolution is plenty for the mm-scale
    // gaps in the supported experiment family.
    let mut clouds: Vec<(usize, Vec<Vec3>)> = Vec::new();
    for (i, reg) in regions.iter().enumerate() {
        if let ControlRegion::Sector(s) = reg {
            let cloud = discretize_sector_boundary(s, 600)?;
            clouds.push((i, cloud.points));
        }
    }

    for (i, pts) in &clouds {
        let ControlRegion::Sector(sector) = &regions[*i] else {
            unreachable!()
        };
        for &p in pts {
            let from_source = norm(sub(p, source.center));
            if from_source <= source.a_phys {
                return Err(Error::Geometry(format!(
                    "control region {i} intersects the physical source ball (sample at distance {from_source} <= {})",
                    source.a_phys
                )));
            }
            if let Some(rr) = outer_radius {
                if norm(p) >= rr {
                    return Err(Error::Geometry(format!(
                        "bounded control region {i} reaches outside the exterior region's ball of radius {rr}"
                    )));
                }
            }
        }
        // A sector could swallow the source ball without its boundary
        // entering it; membership of the ball's center and axis extremes
        // catches that.
        let c = source.center;
        let probes = [
            c,
            add(c, [source.a_phys, 0.0, 0.0]),
            add(c, [-source.a_phys, 0.0, 0.0]),
            add(c, [0.0, source.a_phys, 0.0]),
            add(c, [0.0, -source.a_phys, 0.0]),
            add(c, [0.0, 0.0, source.a_phys]),
            add(c, [0.0, 0.0, -source.a_phys]),
        ];
        if probes.iter().any(|&p| sector.contains(p)) {
            return Err(Error::Geometry(format!(
                "control region {i} overlaps the physical source ball"
            )));
        }
    }

    // Pairwise sector disjointness: no sample of one inside the other.
    for a in 0..clouds.len() {
        for b in 0..clouds.len() {
            if a == b {
                continue;
            }
            let (ia, pts) = &clouds[a];
            let (ib, _) = &clouds[b];
            if pts.iter().any(|&p| regions[*ib].contains(p)) {
                return Err(Error::Geometry(format!(
                    "control regions {ia} and {ib} overlap"
                )));
            }
        }
    }

    // Sectors vs the exterior region were already bounded by |p| < R above.
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn baseline_near_region() -> SectorRegion {
        SectorRegion::new(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
            [0.0; 3],
        )
        .unwrap()
    }

    // ---- independent Monte-Carlo area oracle -----------------------------

    /// Surface area by parametric sampling with the analytic Jacobians of
    /// each face family; shares no code with the discretizer.
    fn mc_boundary_area(region: &SectorRegion, samples_per_face: usize, seed: u64) -> f64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let [r0, r1] = [region.r_min(), region.r_max()];
        let [t0, t1] = region.theta_range();
        let arcs = region.phi_intervals();
        let mut total = 0.0;
        let mut mc = |measure: f64, jac: &mut dyn FnMut(&mut ChaCha12Rng) -> f64| {
            let mut acc = 0.0;
            for _ in 0..samples_per_face {
                acc += jac(&mut rng);
            }
            total += measure * acc / samples_per_face as f64;
        };
        for &[a, b] in &arcs {
            let alen = b - a;
            for r in [r0, r1] {
                // dS = r^2 cos(theta) dtheta dphi
                mc(alen * (t1 - t0), &mut |rng| {
                    let theta = t0 + (t1 - t0) * rng.random::<f64>();
                    r * r * theta.cos()
                });
            }
            for theta in [t0, t1] {
                if theta.cos() < 1e-14 {
                    continue;
                }
                // dS = r cos(theta) dr dphi
                mc(alen * (r1 - r0), &mut |rng| {
                    let r = r0 + (r1 - r0) * rng.random::<f64>();
                    r * theta.cos()
                });
            }
            if alen < 2.0 * PI - 1e-12 {
                // dS = r dr dtheta, two walls
                mc(2.0 * (t1 - t0) * (r1 - r0), &mut |rng| {
                    r0 + (r1 - r0) * rng.random::<f64>()
                });
            }
        }
        total
    }

    #[test]
    fn sector_area_matches_monte_carlo_oracle() {
        let region = baseline_near_region();
        let cloud = discretize_sector_boundary(&region, 2400).unwrap();
        let mc = mc_boundary_area(&region, 200_000, 42);
        let got = cloud.total_weight();
        assert!(
            (got - mc).abs() / mc < 0.01,
            "quadrature {got} vs Monte-Carlo {mc}"
        );
        // Translated and multi-arc variants.
        let shifted = SectorRegion::new(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[0.0, PI / 4.0], [PI, 1.25 * PI]],
            [0.09, 0.0, 0.0],
        )
        .unwrap();
        let cloud = discretize_sector_boundary(&shifted, 1777).unwrap();
        let mc = mc_boundary_area(&shifted, 200_000, 7);
        assert!((cloud.total_weight() - mc).abs() / mc < 0.01);
    }

    #[test]
    fn sector_weights_sum_to_exact_area() {
        let region = baseline_near_region();
        let cloud = discretize_sector_boundary(&region, 2400).unwrap();
        // Analytic area assembled from closed forms, not from the faces code:
        // caps r^2 (sin t1 - sin t0) |arc|, strips cos t |arc| (r1^2-r0^2)/2,
        // two walls (t1 - t0)(r1^2 - r0^2)/2.
        let (r0, r1) = (0.011f64, 0.015f64);
        let (t0, t1) = (-PI / 4.0, PI / 4.0);
        let alen = PI / 2.0;
        let caps = (r0 * r0 + r1 * r1) * (t1.sin() - t0.sin()) * alen;
        let strips = 2.0 * (PI / 4.0f64).cos() * alen * 0.5 * (r1 * r1 - r0 * r0);
        let walls = 2.0 * (t1 - t0) * 0.5 * (r1 * r1 - r0 * r0);
        let analytic = caps + strips + walls;
        assert_relative_eq!(cloud.total_weight(), analytic, max_relative = 1e-12);
        assert_eq!(cloud.len(), 2400);
        assert!(cloud.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn sector_points_stay_in_radial_shell() {
        let region = baseline_near_region();
        let cloud = discretize_sector_boundary(&region, 2400).unwrap();
        for &p in &cloud.points {
            let r = norm(p);
            assert!(r >= 0.011 - 1e-12 && r <= 0.015 + 1e-12, "r = {r}");
        }
    }

    #[test]
    fn sector_points_lie_on_analytic_boundary() {
        let region = baseline_near_region();
        let cloud = discretize_sector_boundary(&region, 501).unwrap();
        let (t0, t1) = (-PI / 4.0, PI / 4.0);
        for &p in &cloud.points {
            let r = norm(p);
            let theta = (p[2] / r).asin();
            let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            // On at least one of the six faces, to within fp roundoff.
            let on_cap = (r - 0.011).abs() < 1e-12 || (r - 0.015).abs() < 1e-12;
            let on_strip = (theta - t0).abs() < 1e-12 || (theta - t1).abs() < 1e-12;
            let on_wall =
                (phi - 3.0 * PI / 4.0).abs() < 1e-12 || (phi - 5.0 * PI / 4.0).abs() < 1e-12;
            assert!(on_cap || on_strip || on_wall);
            // And inside the closed region in every coordinate.
            assert!(theta >= t0 - 1e-12 && theta <= t1 + 1e-12);
            assert!(phi >= 3.0 * PI / 4.0 - 1e-12 && phi <= 5.0 * PI / 4.0 + 1e-12);
        }
    }

    #[test]
    fn sector_face_counts_follow_area() {
        let region = baseline_near_region();
        let n = 2400;
        let cloud = discretize_sector_boundary(&region, n).unwrap();
        // Group by weight value: same face => same weight. Each face's count
        // must match its area share within the rounding of apportionment.
        let mut by_weight: std::collections::BTreeMap<u64, (f64, usize)> =
            std::collections::BTreeMap::new();
        for &w in &cloud.weights {
            let e = by_weight.entry(w.to_bits()).or_insert((w, 0));
            e.1 += 1;
        }
        let total_area = cloud.total_weight();
        for &(w, count) in by_weight.values() {
            let face_area = w * count as f64;
            let expected = n as f64 * face_area / total_area;
            assert!(
                (count as f64 - expected).abs() <= by_weight.len() as f64,
                "face with {count} points, expected about {expected}"
            );
        }
    }

    #[test]
    fn sector_normals_unit_and_outward() {
        let region = baseline_near_region();
        let cloud = discretize_sector_boundary(&region, 600).unwrap();
        let normals = cloud.normals.as_ref().unwrap();
        for (&p, &nrm) in cloud.points.iter().zip(normals) {
            assert!((norm(nrm) - 1.0).abs() < 1e-12);
            // Nudging along the outward normal must exit the closed region.
            let outside = add(p, scale(nrm, 1e-6));
            assert!(!region.contains(outside), "normal points inward at {p:?}");
        }
    }

    #[test]
    fn full_sphere_request_inner_face_area() {
        let region =
            SectorRegion::new([0.5, 1.0], [-PI / 2.0, PI / 2.0], &[[0.0, 2.0 * PI]], [0.0; 3])
                .unwrap();
        let cloud = discretize_sector_boundary(&region, 1000).unwrap();
        // Polar strips and walls degenerate away; only the two caps remain.
        let inner: f64 = cloud
            .points
            .iter()
            .zip(&cloud.weights)
            .filter(|(p, _)| (norm(**p) - 0.5).abs() < 1e-9)
            .map(|(_, w)| w)
            .sum();
        let want = 4.0 * PI * 0.5 * 0.5;
        assert_relative_eq!(inner, want, max_relative = 1e-6);
        assert_relative_eq!(
            cloud.total_weight(),
            4.0 * PI * (0.25 + 1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn wrapped_azimuth_intervals_merge() {
        let region = SectorRegion::new(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[7.0 * PI / 4.0, 2.0 * PI], [0.0, PI / 4.0]],
            [0.0; 3],
        )
        .unwrap();
        assert_eq!(region.phi_intervals().len(), 1);
        let iv = region.phi_intervals()[0];
        assert_relative_eq!(iv[1] - iv[0], PI / 2.0, epsilon = 1e-12);
        // Membership wraps through zero.
        assert!(region.contains([0.013, 0.0, 0.0]));
        assert!(!region.contains([-0.013, 0.0, 0.0]));
        // Total area certifies two walls, not four: a spurious pair at the
        // seam would add (t1-t0)(r1^2-r0^2).
        let cloud = discretize_sector_boundary(&region, 600).unwrap();
        let (r0, r1) = (0.011f64, 0.015f64);
        let (t0, t1) = (-PI / 4.0, PI / 4.0);
        let alen = PI / 2.0;
        let analytic = (r0 * r0 + r1 * r1) * (t1.sin() - t0.sin()) * alen
            + 2.0 * (PI / 4.0f64).cos() * alen * 0.5 * (r1 * r1 - r0 * r0)
            + 2.0 * (t1 - t0) * 0.5 * (r1 * r1 - r0 * r0);
        assert_relative_eq!(cloud.total_weight(), analytic, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_and_undersized_requests_rejected() {
        assert!(SectorRegion::new([0.011, 0.011], [-0.1, 0.1], &[[0.0, 1.0]], [0.0; 3]).is_err());
        assert!(SectorRegion::new([0.011, 0.015], [0.2, 0.2], &[[0.0, 1.0]], [0.0; 3]).is_err());
        assert!(SectorRegion::new([0.011, 0.015], [-0.1, 0.1], &[], [0.0; 3]).is_err());
        assert!(
            SectorRegion::new([0.011, 0.015], [-0.1, 0.1], &[[1.0, 0.5]], [0.0; 3]).is_err()
        );
        assert!(
            SectorRegion::new([0.011, 0.015], [-0.1, 0.1], &[[0.0, 1.0], [0.5, 2.0]], [0.0; 3])
                .is_err()
        );
        let region = baseline_near_region();
        assert!(discretize_sector_boundary(&region, 99).is_err());
    }

    // ---- sphere grid ------------------------------------------------------

    #[test]
    fn sphere_grid_paper_scale() {
        let cloud = discretize_sphere_boundary(10.0, 200, 100).unwrap();
        assert_eq!(cloud.len(), 20_000);
        for &p in &cloud.points {
            assert!((norm(p) - 10.0).abs() < 1e-12);
        }
        assert_relative_eq!(cloud.total_weight(), 400.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn sphere_grid_coarse_area() {
        let cloud = discretize_sphere_boundary(1.0, 8, 4).unwrap();
        assert_eq!(cloud.len(), 32);
        assert!((cloud.total_weight() - 4.0 * PI).abs() / (4.0 * PI) < 1e-2);
        assert!(cloud.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn sphere_grid_reflection_symmetry() {
        let cloud = discretize_sphere_boundary(2.0, 12, 9).unwrap();
        let mut zs: Vec<f64> = cloud.points.iter().map(|p| p[2]).collect();
        zs.sort_by(f64::total_cmp);
        for i in 0..zs.len() {
            assert_relative_eq!(zs[i], -zs[zs.len() - 1 - i], epsilon = 1e-12);
        }
        assert!(discretize_sphere_boundary(1.0, 3, 100).is_err());
    }

    // ---- transforms --------------------------------------------------------

    fn region_close(a: &SectorRegion, b: &SectorRegion, tol: f64) -> bool {
        let ta = a.translation();
        let tb = b.translation();
        a.r_min() == b.r_min()
            && a.r_max() == b.r_max()
            && norm(sub(ta, tb)) <= tol
            && a.theta_range() == b.theta_range()
    }

    #[test]
    fn rotation_examples() {
        let region = SectorRegion::new(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[0.0, PI / 2.0]],
            [0.09, 0.0, 0.0],
        )
        .unwrap();
        let same = region.rotate_about_origin(0.0);
        assert!(region_close(&region, &same, 0.0));
        assert_eq!(same.phi_intervals(), region.phi_intervals());

        let half = region.rotate_about_origin(PI);
        let t = half.translation();
        assert!((t[0] + 0.09).abs() < 1e-15 && t[1].abs() < 1e-15 && t[2].abs() < 1e-15);
        // Arcs turn with the body: [0, pi/2] lands on [pi, 3pi/2].
        let arcs = half.phi_intervals();
        assert_eq!(arcs.len(), 1);
        assert!((arcs[0][0] - PI).abs() < 1e-15 && (arcs[0][1] - 1.5 * PI).abs() < 1e-14);

        let twice = region.rotate_about_origin(PI / 2.0).rotate_about_origin(PI / 2.0);
        assert!(region_close(&half, &twice, 1e-15));
        for (a, b) in twice.phi_intervals().iter().zip(half.phi_intervals()) {
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }

        // Congruence: rotated boundary samples lie in the rotated region.
        let angle = 2.4;
        let rotated = region.rotate_about_origin(angle);
        let (s, c) = angle.sin_cos();
        for p in discretize_sector_boundary(&region, 300).unwrap().points {
            let q = [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
            assert!(rotated.contains(q));
        }
        // A wrapped-arc region stays well formed under rotation.
        let wrapped = SectorRegion::new(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[7.0 * PI / 4.0, 2.0 * PI], [0.0, PI / 4.0]],
            [0.09, 0.0, 0.0],
        )
        .unwrap();
        let swung = wrapped.rotate_about_origin(PI / 3.0);
        for p in discretize_sector_boundary(&wrapped, 300).unwrap().points {
            let (s3, c3) = (PI / 3.0).sin_cos();
            let q = [c3 * p[0] - s3 * p[1], s3 * p[0] + c3 * p[1], p[2]];
            assert!(swung.contains(q));
        }
    }

    #[test]
    fn radial_shift_examples() {
        let region = baseline_near_region();
        // Central ray of the baseline sector points along -x.
        let ray = region.central_ray();
        assert!((ray[0] + 1.0).abs() < 1e-12 && ray[1].abs() < 1e-12 && ray[2].abs() < 1e-12);

        let out = region.shift_radially(0.01);
        let t = out.translation();
        assert!((t[0] + 0.01).abs() < 1e-15 && t[1].abs() < 1e-15 && t[2].abs() < 1e-15);
        // Moved away from the origin: nearest boundary sample is farther.
        // (Off-axis corners gain less than the full shift; the axis point
        // gains exactly 0.01.)
        let min_r = |reg: &SectorRegion| {
            discretize_sector_boundary(reg, 600)
                .unwrap()
                .points
                .iter()
                .map(|&p| norm(p))
                .fold(f64::INFINITY, f64::min)
        };
        assert!(min_r(&out) > min_r(&region) + 0.004);

        let back = out.shift_radially(-0.01);
        assert!(region_close(&region, &back, 1e-15));
    }

    #[test]
    fn radius_growth_examples() {
        let region = baseline_near_region();
        let grown = region.grow_outer_radius(0.015).unwrap();
        assert_eq!(grown.r_min(), 0.011);
        assert_relative_eq!(grown.r_max(), 0.030, epsilon = 1e-15);

        let same = region.grow_both_radii(0.0).unwrap();
        assert!(region_close(&region, &same, 0.0));

        let moved = region.grow_both_radii(0.005).unwrap();
        assert_relative_eq!(moved.r_min(), 0.016, epsilon = 1e-15);
        assert_relative_eq!(moved.r_max(), 0.020, epsilon = 1e-15);

        assert!(region.grow_outer_radius(-0.004).is_err());
        assert!(region.grow_both_radii(-0.012).is_err());
    }

    // ---- disjointness validator --------------------------------------------

    fn baseline_setup() -> (SourceSpec, Vec<ControlRegion>) {
        let source = SourceSpec::new(0.01, 0.0105, [0.0; 3]).unwrap();
        let regions = vec![
            ControlRegion::Sector(baseline_near_region()),
            ControlRegion::ExteriorSphere(ExteriorSphereRegion::new(10.0).unwrap()),
        ];
        (source, regions)
    }

    #[test]
    fn validator_accepts_baseline() {
        let (source, regions) = baseline_setup();
        validate_disjoint(&source, &regions).unwrap();
    }

    #[test]
    fn validator_rejects_overlaps() {
        let source = SourceSpec::new(0.01, 0.0105, [0.0; 3]).unwrap();
        // Sector dipping inside the physical source ball.
        let bad = SectorRegion::new(
            [0.009, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
            [0.0; 3],
        )
        .unwrap();
        assert!(validate_disjoint(&source, &[ControlRegion::Sector(bad)]).is_err());

        // Two overlapping sectors.
        let a = baseline_near_region();
        let b = baseline_near_region();
        assert!(validate_disjoint(
            &source,
            &[ControlRegion::Sector(a.clone()), ControlRegion::Sector(b)]
        )
        .is_err());

        // Sector reaching outside the exterior region's ball.
        let far = SectorRegion::new(
            [9.0, 11.0],
            [-0.3, 0.3],
            &[[0.0, 0.5]],
            [0.0; 3],
        )
        .unwrap();
        assert!(validate_disjoint(
            &source,
            &[
                ControlRegion::Sector(far),
                ControlRegion::ExteriorSphere(ExteriorSphereRegion::new(10.0).unwrap())
            ]
        )
        .is_err());

        // Two exterior regions.
        assert!(validate_disjoint(
            &source,
            &[
                ControlRegion::ExteriorSphere(ExteriorSphereRegion::new(10.0).unwrap()),
                ControlRegion::ExteriorSphere(ExteriorSphereRegion::new(12.0).unwrap())
            ]
        )
        .is_err());

        // Sector swallowing the source ball without boundary contact.
        let swallow = SectorRegion::new(
            [0.02, 0.5],
            [-PI / 2.0, PI / 2.0],
            &[[0.0, 2.0 * PI]],
            [0.1, 0.0, 0.0],
        )
        .unwrap();
        assert!(swallow.contains([0.0; 3]));
        assert!(validate_disjoint(&source, &[ControlRegion::Sector(swallow)]).is_err());
    }

    #[test]
    fn source_spec_invariants() {
        assert!(SourceSpec::new(0.0105, 0.01, [0.0; 3]).is_err());
        assert!(SourceSpec::new(0.0, 0.01, [0.0; 3]).is_err());
        assert!(SourceSpec::new(0.01, 0.0105, [0.0; 3]).is_ok());
        assert!(ExteriorSphereRegion::new(-1.0).is_err());
    }
}
