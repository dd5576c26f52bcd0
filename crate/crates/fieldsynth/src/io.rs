//! Deterministic result persistence. Every CSV starts with one versioned
//! header line; floats print in scientific notation; nothing written here
//! depends on wall-clock time or hash ordering, so identical inputs produce
//! byte-identical files.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::{Metrics, RegionMetrics, SweepTable};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::propagator::DensityCoefficients;
use crate::solver::{MorozovStatus, Solution};
use crate::synthesis::{SynthesisSpec, TimeAveragedErrors, TimeSnapshot};

pub const VERSION_HEADER: &str = concat!("# fieldsynth ", env!("CARGO_PKG_VERSION"));

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Quote a CSV cell if it holds a delimiter, quote, or newline.
fn quote_csv(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn morozov_status_name(status: MorozovStatus) -> &'static str {
    match status {
        MorozovStatus::WithinBand => "within-band",
        MorozovStatus::AtLowerBracket => "at-lower-bracket",
        MorozovStatus::AtUpperBracket => "at-upper-bracket",
    }
}

/// Solution coefficients plus solver diagnostics.
#[derive(Serialize, Deserialize)]
struct SolutionJson {
    l_max: u32,
    re: Vec<f64>,
    im: Vec<f64>,
    alpha_reg: f64,
    residual: f64,
    residual_by_region: Vec<f64>,
    coeff_norm: f64,
    condition_estimate: f64,
    morozov_status: String,
}

pub fn write_solution_json(path: &Path, solution: &Solution) -> Result<()> {
    let doc = SolutionJson {
        l_max: solution.coeffs.l_max(),
        re: solution.coeffs.alpha().iter().map(|c| c.re).collect(),
        im: solution.coeffs.alpha().iter().map(|c| c.im).collect(),
        alpha_reg: solution.alpha_reg,
        residual: solution.residual,
        residual_by_region: solution.residual_by_region.clone(),
        coeff_norm: solution.coeff_norm,
        condition_estimate: solution.condition_estimate,
        morozov_status: morozov_status_name(solution.morozov_status).to_string(),
    };
    let mut w = open_out(path)?;
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(w, "{text}")?;
    Ok(())
}

/// Read back the coefficient vector of a solution file.
pub fn read_solution_coefficients(path: &Path) -> Result<DensityCoefficients> {
    let text = std::fs::read_to_string(path)?;
    let doc: SolutionJson = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("solution file {}: {e}", path.display())))?;
    if doc.re.len() != doc.im.len() {
        return Err(Error::Config(format!(
            "solution file {}: re/im length mismatch",
            path.display()
        )));
    }
    let coeffs = doc
        .re
        .iter()
        .zip(&doc.im)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    DensityCoefficients::new(doc.l_max, coeffs)
}

/// Per-region error table with an aggregate `all` row carrying the solver
/// diagnostics.
pub fn write_metrics_csv(
    path: &Path,
    per_region: &[RegionMetrics],
    metrics: &Metrics,
    solution: &Solution,
) -> Result<()> {
    let mut w = open_out(path)?;
    writeln!(w, "{VERSION_HEADER}")?;
    writeln!(
        w,
        "region,rel_l2,rel_sup,abs_l2,abs_sup,sup_field,sup_target,relative_defined,\
         coeff_norm,db_contrast,alpha_reg,residual,condition_estimate,status"
    )?;
    for (i, r) in per_region.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},,,,,,",
            fmt(r.rel_l2),
            fmt(r.rel_sup),
            fmt(r.abs_l2),
            fmt(r.abs_sup),
            fmt(r.sup_field),
            fmt(r.sup_target),
            r.relative_defined,
        )?;
    }
    writeln!(
        w,
        "all,{},{},,{},,,,{},{},{},{},{},{}",
        fmt(metrics.rel_l2),
        fmt(metrics.rel_sup),
        fmt(metrics.abs_sup),
        fmt(metrics.coeff_norm),
        fmt_opt(metrics.db_contrast),
        fmt(solution.alpha_reg),
        fmt(solution.residual),
        fmt(solution.condition_estimate),
        morozov_status_name(solution.morozov_status),
    )?;
    Ok(())
}

/// Complex field sampled on a point set: x,y,z,re_u,im_u,abs_u.
pub fn write_field_snapshot_csv(
    path: &Path,
    points: &[Vec3],
    values: &[Complex64],
) -> Result<()> {
    if points.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    let mut w = open_out(path)?;
    writeln!(w, "{VERSION_HEADER}")?;
    writeln!(w, "x,y,z,re_u,im_u,abs_u")?;
    for (p, v) in points.iter().zip(values) {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(v.re),
            fmt(v.im),
            fmt(v.norm()),
        )?;
    }
    Ok(())
}

/// Parameter-sweep table, one row per (value, order) pair.
pub fn write_sweep_csv(path: &Path, table: &SweepTable) -> Result<()> {
    let mut w = open_out(path)?;
    writeln!(w, "{VERSION_HEADER}")?;
    writeln!(
        w,
        "param_value,L,rel_l2,rel_sup,abs_sup,coeff_norm,db_contrast,stability,alpha_reg,status"
    )?;
    for row in &table.rows {
        let (rel_l2, rel_sup, abs_sup, coeff_norm, db) = match &row.metrics {
            Some(m) => (
                fmt(m.rel_l2),
                fmt(m.rel_sup),
                fmt(m.abs_sup),
                fmt(m.coeff_norm),
                fmt_opt(m.db_contrast),
            ),
            None => Default::default(),
        };
        writeln!(
            w,
            "{},{},{rel_l2},{rel_sup},{abs_sup},{coeff_norm},{db},{},{},{}",
            fmt(row.param_value),
            row.l,
            fmt_opt(row.stability),
            fmt_opt(row.alpha_reg),
            quote_csv(&row.status),
        )?;
    }
    Ok(())
}

/// Boundary trace on the physical source sphere: Dirichlet data, plus
/// normal-velocity columns when the Neumann trace is supplied.
pub fn write_boundary_trace_csv(
    path: &Path,
    cloud: &PointCloud,
    dirichlet: &[Complex64],
    neumann: Option<&[Complex64]>,
) -> Result<()> {
    if cloud.points.len() != dirichlet.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} trace values",
            cloud.points.len(),
            dirichlet.len()
        )));
    }
    if let Some(v) = neumann {
        if v.len() != dirichlet.len() {
            return Err(Error::InvalidArgument(format!(
                "{} Dirichlet values but {} Neumann values",
                dirichlet.len(),
                v.len()
            )));
        }
    }
    let mut w = open_out(path)?;
    writeln!(w, "{VERSION_HEADER}")?;
    match neumann {
        None => writeln!(w, "x,y,z,re_u,im_u")?,
        Some(_) => writeln!(w, "x,y,z,re_u,im_u,re_vn,im_vn")?,
    }
    for (i, (p, u)) in cloud.points.iter().zip(dirichlet).enumerate() {
        match neumann {
            None => writeln!(
                w,
                "{},{},{},{},{}",
                fmt(p[0]),
                fmt(p[1]),
                fmt(p[2]),
                fmt(u.re),
                fmt(u.im)
            )?,
            Some(v) => writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt(p[0]),
                fmt(p[1]),
                fmt(p[2]),
                fmt(u.re),
                fmt(u.im),
                fmt(v[i].re),
                fmt(v[i].im)
            )?,
        }
    }
    Ok(())
}

/// One time frame of the synthesized real field on the shared grid.
pub fn write_time_snapshot_csv(
    path: &Path,
    points: &[Vec3],
    snapshot: &TimeSnapshot,
) -> Result<()> {
    if points.len() != snapshot.values.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} snapshot values",
            points.len(),
            snapshot.values.len()
        )));
    }
    let mut w = open_out(path)?;
    writeln!(w, "{VERSION_HEADER}")?;
    writeln!(w, "# tau = {}", fmt(snapshot.tau))?;
    writeln!(w, "x,y,z,u")?;
    for (p, v) in points.iter().zip(&snapshot.values) {
        writeln!(w, "{},{},{},{}", fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(*v))?;
    }
    Ok(())
}

/// Pointwise time-averaged synthesis errors: relative on the prescribed
/// regions, absolute on the null regions.
pub fn write_synthesis_errors_csv(path: &Path, errors: &TimeAveragedErrors) -> Result<()> {
    let mut w = open_out(path)?;
    writeln!(w, "{VERSION_HEADER}")?;
    writeln!(w, "kind,x,y,z,value")?;
    for (p, v) in errors.rel_points.iter().zip(&errors.rel_field) {
        writeln!(
            w,
            "relative,{},{},{},{}",
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(*v)
        )?;
    }
    for (p, v) in errors.abs_points.iter().zip(&errors.abs_field) {
        writeln!(
            w,
            "absolute,{},{},{},{}",
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(*v)
        )?;
    }
    Ok(())
}

/// Snapshot grid description recorded in the synthesis manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridMeta {
    pub nx: usize,
    pub ny: usize,
    pub z: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridMeta {
    pub fn from_cloud(cloud: &PointCloud, nx: usize, ny: usize) -> Result<GridMeta> {
        if cloud.points.len() != nx * ny || cloud.points.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "grid of {} points is not {nx} x {ny}",
                cloud.points.len()
            )));
        }
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &cloud.points {
            x_min = x_min.min(p[0]);
            x_max = x_max.max(p[0]);
            y_min = y_min.min(p[1]);
            y_max = y_max.max(p[1]);
        }
        Ok(GridMeta {
            nx,
            ny,
            z: cloud.points[0][2],
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestComponent {
    k: f64,
    weight_re: f64,
    weight_im: f64,
    solution_file: String,
    alpha_reg: f64,
    residual: f64,
}

#[derive(Serialize, Deserialize)]
struct SnapshotEntry {
    tau: f64,
    file: String,
}

/// Index of a synthesis run: band, per-frequency solution files, error
/// sups, and the snapshot series with its grid.
#[derive(Serialize, Deserialize)]
struct SynthesisManifest {
    period: f64,
    n_time: usize,
    l_max: u32,
    rel_sup: f64,
    abs_sup: f64,
    mean_square_loud: f64,
    mean_square_quiet: f64,
    components: Vec<ManifestComponent>,
    grid: Option<GridMeta>,
    snapshots: Vec<SnapshotEntry>,
}

#[allow(clippy::too_many_arguments)]
pub fn write_synthesis_manifest(
    path: &Path,
    spec: &SynthesisSpec,
    solutions: &[Solution],
    solution_files: &[String],
    errors: &TimeAveragedErrors,
    grid: Option<GridMeta>,
    snapshots: &[(f64, String)],
) -> Result<()> {
    if solutions.len() != spec.components.len() || solution_files.len() != solutions.len() {
        return Err(Error::InvalidArgument(
            "manifest needs one solution and one file per component".into(),
        ));
    }
    let components = spec
        .components
        .iter()
        .zip(solutions)
        .zip(solution_files)
        .map(|((c, s), f)| ManifestComponent {
            k: c.k,
            weight_re: c.weight.re,
            weight_im: c.weight.im,
            solution_file: f.clone(),
            alpha_reg: s.alpha_reg,
            residual: s.residual,
        })
        .collect();
    let doc = SynthesisManifest {
        period: spec.period,
        n_time: spec.n_time,
        l_max: spec.l_max,
        rel_sup: errors.rel_sup,
        abs_sup: errors.abs_sup,
        mean_square_loud: errors.mean_square_loud,
        mean_square_quiet: errors.mean_square_quiet,
        components,
        grid,
        snapshots: snapshots
            .iter()
            .map(|(tau, file)| SnapshotEntry {
                tau: *tau,
                file: file.clone(),
            })
            .collect(),
    };
    let mut w = open_out(path)?;
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(w, "{text}")?;
    Ok(())
}
