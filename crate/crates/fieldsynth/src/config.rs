//! Experiment configuration: a flat TOML schema with sections for the
//! source, propagator, medium, solver, noise, output, and one `[[region]]`
//! table per control region. Angles accept either numbers (radians) or pi
//! expressions like `"3*pi/4"`. Every section is optional and defaults to
//! the reference experiment values (a' = 0.01, k = 10, L = 30, air).

use num_complex::Complex64;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use crate::analysis::NoiseSpec;
use crate::error::{Error, Result};
use crate::geometry::{ControlRegion, ExteriorSphereRegion, SectorRegion, SourceSpec, Vec3};
use crate::propagator::{MediumParams, PropagatorConfig};
use crate::solver::{Experiment, ExperimentRegion, RegionDiscretization, TargetField};
use crate::synthesis::{SynthesisComponent, SynthesisSpec};

/// Angle in radians; deserializes from a number or a pi-expression string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angle(pub f64);

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct AngleVisitor;
        impl<'de> Visitor<'de> for AngleVisitor {
            type Value = Angle;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a pi expression such as \"3*pi/4\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Angle, E> {
                Ok(Angle(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Angle, E> {
                parse_pi_expr(v).map(Angle).map_err(E::custom)
            }
        }
        d.deserialize_any(AngleVisitor)
    }
}

/// Parse `"0"`, `"pi"`, `"-pi/4"`, `"3*pi/4"`, `"1.5pi"`, or a plain float.
pub fn parse_pi_expr(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse angle expression {s:?}"));
    let t = s.trim();
    if t.is_empty() {
        return Err(bad());
    }
    if let Ok(v) = t.parse::<f64>() {
        if !v.is_finite() {
            return Err(bad());
        }
        return Ok(v);
    }
    let (sign, rest) = match t.strip_prefix('-') {
        Some(r) => (-1.0, r.trim_start()),
        None => (1.0, t.strip_prefix('+').unwrap_or(t).trim_start()),
    };
    let pi_at = rest.find("pi").ok_or_else(bad)?;
    let pre = rest[..pi_at].trim();
    let pre = pre.strip_suffix('*').unwrap_or(pre).trim();
    let post = rest[pi_at + 2..].trim();
    let coeff = if pre.is_empty() {
        1.0
    } else {
        pre.parse::<f64>().map_err(|_| bad())?
    };
    let div = if post.is_empty() {
        1.0
    } else {
        let d = post
            .strip_prefix('/')
            .ok_or_else(bad)?
            .trim()
            .parse::<f64>()
            .map_err(|_| bad())?;
        if d == 0.0 {
            return Err(bad());
        }
        d
    };
    let v = sign * coeff * PI / div;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Expand a `--values` argument: either `start:end:steps` (steps + 1
/// inclusive samples) or a comma list. Every entry takes pi expressions.
pub fn parse_value_list(s: &str) -> Result<Vec<f64>> {
    let t = s.trim();
    let parts: Vec<&str> = t.split(':').collect();
    if parts.len() == 3 {
        let start = parse_pi_expr(parts[0])?;
        let end = parse_pi_expr(parts[1])?;
        let steps: usize = parts[1 + 1]
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("step count {:?} is not an integer", parts[2])))?;
        if steps == 0 {
            return Err(Error::Config("value range needs at least 1 step".into()));
        }
        return Ok((0..=steps)
            .map(|i| start + (end - start) * i as f64 / steps as f64)
            .collect());
    }
    if parts.len() != 1 {
        return Err(Error::Config(format!(
            "value range {t:?} must be start:end:steps"
        )));
    }
    t.split(',').map(parse_pi_expr).collect()
}

fn default_a_prime() -> f64 {
    0.01
}
fn default_a_phys() -> f64 {
    0.0105
}
fn default_center() -> [f64; 3] {
    [0.0; 3]
}
fn default_k() -> f64 {
    10.0
}
fn default_eta() -> f64 {
    1.0
}
fn default_l_max() -> u32 {
    30
}
fn default_density() -> f64 {
    1.204
}
fn default_sound_speed() -> f64 {
    343.0
}
fn default_morozov_delta() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    7
}
fn default_n_time() -> usize {
    200
}
fn default_sector_points() -> usize {
    2400
}
fn default_azimuthal() -> usize {
    200
}
fn default_polar() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default = "default_a_prime")]
    pub a_prime: f64,
    #[serde(default = "default_a_phys")]
    pub a_phys: f64,
    #[serde(default = "default_center")]
    pub center: [f64; 3],
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            a_prime: default_a_prime(),
            a_phys: default_a_phys(),
            center: default_center(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_eta")]
    pub eta1: f64,
    #[serde(default = "default_eta")]
    pub eta2: f64,
    #[serde(default = "default_l_max")]
    pub l_max: u32,
}

impl Default for PropagatorSection {
    fn default() -> Self {
        PropagatorSection {
            k: default_k(),
            eta1: default_eta(),
            eta2: default_eta(),
            l_max: default_l_max(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
}

impl Default for MediumSection {
    fn default() -> Self {
        MediumSection {
            density: default_density(),
            sound_speed: default_sound_speed(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Morozov discrepancy target relative to the weighted data norm.
    #[serde(default = "default_morozov_delta")]
    pub morozov_delta: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            morozov_delta: default_morozov_delta(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            epsilon: 0.0,
            seed: default_seed(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// One control region: a spherical-sector shell boundary or the boundary of
/// an exterior ball, with its prescribed target field and point budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(rename = "type")]
    pub kind: String,
    // Sector fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_min: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_max: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_intervals: Option<Vec<[Angle; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    // Exterior-sphere fields.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuthal: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<usize>,
    // Target field.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_k: Option<f64>,
}

impl RegionConfig {
    pub fn sector(
        r: [f64; 2],
        theta: [f64; 2],
        phi_intervals: &[[f64; 2]],
        translation: Vec3,
        points: usize,
    ) -> Self {
        RegionConfig {
            kind: "sector".into(),
            r_min: Some(r[0]),
            r_max: Some(r[1]),
            theta_min: Some(Angle(theta[0])),
            theta_max: Some(Angle(theta[1])),
            phi_intervals: Some(
                phi_intervals
                    .iter()
                    .map(|iv| [Angle(iv[0]), Angle(iv[1])])
                    .collect(),
            ),
            translation: Some(translation),
            points: Some(points),
            radius: None,
            azimuthal: None,
            polar: None,
            target: "zero".into(),
            direction: None,
            amplitude: None,
            target_k: None,
        }
    }

    pub fn exterior_sphere(radius: f64, azimuthal: usize, polar: usize) -> Self {
        RegionConfig {
            kind: "exterior-sphere".into(),
            r_min: None,
            r_max: None,
            theta_min: None,
            theta_max: None,
            phi_intervals: None,
            translation: None,
            points: None,
            radius: Some(radius),
            azimuthal: Some(azimuthal),
            polar: Some(polar),
            target: "zero".into(),
            direction: None,
            amplitude: None,
            target_k: None,
        }
    }

    pub fn with_plane_wave(mut self, direction: Vec3) -> Self {
        self.target = "plane-wave".into();
        self.direction = Some(direction);
        self
    }

    fn resolve(&self, index: usize, default_k: f64) -> Result<ExperimentRegion> {
        let missing = |field: &str| {
            Error::Config(format!("region {index}: {} requires {field}", self.kind))
        };
        let (region, discretization) = match self.kind.as_str() {
            "sector" => {
                let r_min = self.r_min.ok_or_else(|| missing("r_min"))?;
                let r_max = self.r_max.ok_or_else(|| missing("r_max"))?;
                let theta_min = self.theta_min.ok_or_else(|| missing("theta_min"))?;
                let theta_max = self.theta_max.ok_or_else(|| missing("theta_max"))?;
                let phi = self.phi_intervals.as_ref().ok_or_else(|| missing("phi_intervals"))?;
                if self.radius.is_some() || self.azimuthal.is_some() || self.polar.is_some() {
                    return Err(Error::Config(format!(
                        "region {index}: sector takes no R/azimuthal/polar"
                    )));
                }
                let intervals: Vec<[f64; 2]> =
                    phi.iter().map(|iv| [iv[0].0, iv[1].0]).collect();
                let sector = SectorRegion::new(
                    [r_min, r_max],
                    [theta_min.0, theta_max.0],
                    &intervals,
                    self.translation.unwrap_or([0.0; 3]),
                )?;
                (
                    ControlRegion::Sector(sector),
                    RegionDiscretization::SectorPoints(
                        self.points.unwrap_or_else(default_sector_points),
                    ),
                )
            }
            "exterior-sphere" => {
                let radius = self.radius.ok_or_else(|| missing("R"))?;
                if self.r_min.is_some()
                    || self.r_max.is_some()
                    || self.theta_min.is_some()
                    || self.theta_max.is_some()
                    || self.phi_intervals.is_some()
                    || self.translation.is_some()
                    || self.points.is_some()
                {
                    return Err(Error::Config(format!(
                        "region {index}: exterior-sphere takes only R/azimuthal/polar"
                    )));
                }
                (
                    ControlRegion::ExteriorSphere(ExteriorSphereRegion::new(radius)?),
                    RegionDiscretization::SphereGrid {
                        azimuthal: self.azimuthal.unwrap_or_else(default_azimuthal),
                        polar: self.polar.unwrap_or_else(default_polar),
                    },
                )
            }
            other => {
                return Err(Error::Config(format!(
                    "region {index}: unknown region type {other:?}"
                )))
            }
        };

        let target = match self.target.as_str() {
            "zero" => {
                if self.direction.is_some() || self.amplitude.is_some() || self.target_k.is_some()
                {
                    return Err(Error::Config(format!(
                        "region {index}: zero target takes no direction/amplitude/target_k"
                    )));
                }
                TargetField::Zero
            }
            "plane-wave" => {
                let direction = self
                    .direction
                    .ok_or_else(|| missing("direction"))?;
                let [re, im] = self.amplitude.unwrap_or([1.0, 0.0]);
                TargetField::plane_wave(
                    direction,
                    Complex64::new(re, im),
                    self.target_k.unwrap_or(default_k),
                )?
            }
            other => {
                return Err(Error::Config(format!(
                    "region {index}: unknown target {other:?} (use \"zero\" or \"plane-wave\")"
                )))
            }
        };

        Ok(ExperimentRegion {
            region,
            target,
            discretization,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub k: f64,
    pub weight: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    #[serde(default = "default_n_time")]
    pub n_time: usize,
    /// Common period in tau = c t units; defaults to the half-integer band's 4 pi.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<Angle>,
    /// Explicit frequency components; omitted means the reference band
    /// k = 5, 5.5, ..., 15 with weights 2/l.
    #[serde(rename = "component", default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentConfig>>,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        SynthesisSection {
            n_time: default_n_time(),
            period: None,
            components: None,
        }
    }
}

/// Full experiment description as read from a TOML file.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub propagator: PropagatorSection,
    #[serde(default)]
    pub medium: MediumSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(rename = "region", default)]
    pub regions: Vec<RegionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisSection>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse failed: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config serialization failed: {e}")))
    }

    /// Build the solver-facing experiment. Region geometry, targets, and
    /// propagator parameters are validated here; disjointness from the
    /// physical source ball is validated when the system is assembled.
    pub fn to_experiment(&self) -> Result<Experiment> {
        if self.regions.is_empty() {
            return Err(Error::Config("config declares no regions".into()));
        }
        let source = SourceSpec::new(
            self.source.a_prime,
            self.source.a_phys,
            self.source.center,
        )?;
        let propagator = PropagatorConfig::new(
            self.propagator.k,
            self.source.a_prime,
            self.propagator.eta1,
            self.propagator.eta2,
            self.propagator.l_max,
        )?;
        let medium = MediumParams::new(self.medium.density, self.medium.sound_speed)?;
        let regions = self
            .regions
            .iter()
            .enumerate()
            .map(|(i, r)| r.resolve(i, self.propagator.k))
            .collect::<Result<Vec<_>>>()?;
        if !(self.solver.morozov_delta > 0.0) || !self.solver.morozov_delta.is_finite() {
            return Err(Error::Config(format!(
                "morozov_delta {} must be positive and finite",
                self.solver.morozov_delta
            )));
        }
        Ok(Experiment {
            source,
            propagator,
            medium,
            regions,
            morozov_delta: self.solver.morozov_delta,
        })
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.noise.epsilon, self.noise.seed)
    }

    /// Synthesis band for this config: the explicit component list if one is
    /// given, otherwise the reference half-integer band.
    pub fn synthesis_spec(&self) -> Result<SynthesisSpec> {
        let section = self.synthesis.clone().unwrap_or_default();
        let l_max = self.propagator.l_max;
        match &section.components {
            None => {
                let mut spec = SynthesisSpec::default_band(l_max, section.n_time);
                if let Some(p) = section.period {
                    spec.period = p.0;
                }
                if spec.n_time == 0 {
                    return Err(Error::Config("time sampling needs at least one sample".into()));
                }
                Ok(spec)
            }
            Some(list) => {
                let components = list
                    .iter()
                    .map(|c| SynthesisComponent {
                        k: c.k,
                        weight: Complex64::new(c.weight[0], c.weight[1]),
                    })
                    .collect();
                SynthesisSpec::new(
                    components,
                    l_max,
                    section.n_time,
                    section.period.map_or(4.0 * PI, |p| p.0),
                )
            }
        }
    }

    /// Parse and cross-check everything that can fail before a solve.
    pub fn validate(&self) -> Result<()> {
        let experiment = self.to_experiment()?;
        let regions: Vec<ControlRegion> =
            experiment.regions.iter().map(|r| r.region.clone()).collect();
        crate::geometry::validate_disjoint(&experiment.source, &regions)?;
        self.noise_spec()?;
        self.synthesis_spec()?;
        Ok(())
    }

    /// Near-field control above the source with far-field suppression on
    /// the ball of radius 10: one sector region with an incoming plane wave
    /// and the exterior sphere held at zero.
    pub fn baseline() -> Self {
        ExperimentConfig {
            regions: vec![
                RegionConfig::sector(
                    [0.011, 0.015],
                    [-PI / 4.0, PI / 4.0],
                    &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
                    [0.0; 3],
                    2400,
                )
                .with_plane_wave([1.0, 0.0, 0.0]),
                RegionConfig::exterior_sphere(10.0, 200, 100),
            ],
            ..Default::default()
        }
    }

    /// Two-sector arrangement: plane wave on the near sector, silence on a
    /// second sector 0.09 m away. The second sector is the one a rotation
    /// sweep moves.
    pub fn two_sector() -> Self {
        ExperimentConfig {
            noise: NoiseSection {
                epsilon: 1e-3,
                seed: default_seed(),
            },
            regions: vec![
                RegionConfig::sector(
                    [0.011, 0.015],
                    [-PI / 4.0, PI / 4.0],
                    &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
                    [0.0; 3],
                    2400,
                )
                .with_plane_wave([-1.0, 0.0, 0.0]),
                RegionConfig::sector(
                    [0.011, 0.015],
                    [-PI / 4.0, PI / 4.0],
                    &[[7.0 * PI / 4.0, 2.0 * PI], [0.0, PI / 4.0]],
                    [0.09, 0.0, 0.0],
                    2400,
                ),
            ],
            ..Default::default()
        }
    }

    /// Quiet zone shadowing a far target: silence on a near wedge while a
    /// plane wave is prescribed on a matching wedge twice as far out.
    pub fn obstacle() -> Self {
        ExperimentConfig {
            regions: vec![
                RegionConfig::sector(
                    [0.011, 0.015],
                    [-PI / 8.0, PI / 8.0],
                    &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
                    [-0.03, 0.0, 0.0],
                    2400,
                ),
                RegionConfig::sector(
                    [0.011, 0.015],
                    [-PI / 8.0, PI / 8.0],
                    &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
                    [-0.1, 0.0, 0.0],
                    9600,
                )
                .with_plane_wave([-1.0, 0.0, 0.0]),
            ],
            ..Default::default()
        }
    }

    /// Broadband pulse on the near sector of the two-sector arrangement,
    /// silence on the far sector, using the reference frequency band.
    pub fn synthesis_pulse() -> Self {
        let mut cfg = Self::two_sector();
        cfg.noise = NoiseSection::default();
        cfg.regions[0] = RegionConfig::sector(
            [0.011, 0.015],
            [-PI / 4.0, PI / 4.0],
            &[[3.0 * PI / 4.0, 5.0 * PI / 4.0]],
            [0.0; 3],
            2400,
        )
        .with_plane_wave([1.0, 0.0, 0.0]);
        cfg.synthesis = Some(SynthesisSection::default());
        cfg
    }
}
