//! Seeded synthetic datasets with ground-truth parameters.
//!
//! Every generator draws its parameters uniformly, maps them to the clean
//! manifold point and adds isotropic Gaussian noise with standard deviation
//! `noise_sd` to each coordinate. Points are generated one after another
//! from a ChaCha8 stream seeded with `seed`, so a (config, seed) pair always
//! yields bit-identical output.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub name: String,
    pub points: PointCloud,
    /// Ground-truth parameters, one row per point.
    pub truth: PointCloud,
    pub clean_points: PointCloud,
    pub seed: u64,
}

struct Builder {
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    points: Vec<f64>,
    clean: Vec<f64>,
    truth: Vec<f64>,
}

impl Builder {
    fn new(seed: u64, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::input(format!("noise_sd must be finite and >= 0, got {noise_sd}")));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: Normal::new(0.0, noise_sd).expect("valid sd"),
            points: Vec::new(),
            clean: Vec::new(),
            truth: Vec::new(),
        })
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }

    fn push(&mut self, clean: &[f64], truth: &[f64]) {
        for &c in clean {
            self.clean.push(c);
            self.points.push(c + self.noise.sample(&mut self.rng));
        }
        self.truth.extend_from_slice(truth);
    }

    fn finish(self, name: &str, dim: usize, tdim: usize, seed: u64) -> Result<LabeledDataset> {
        Ok(LabeledDataset {
            name: name.to_string(),
            points: PointCloud::new(dim, self.points)?,
            truth: PointCloud::new(tdim, self.truth)?,
            clean_points: PointCloud::new(dim, self.clean)?,
            seed,
        })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::input("dataset size must be positive"));
    }
    Ok(())
}

/// Planar spiral `(r cos t, r sin t)` with `r = r_max t / theta_max`.
/// Truth: `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpiralConfig {
    pub n: usize,
    pub r_max: f64,
    pub theta_max: f64,
    pub noise_sd: f64,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        Self {
            n: 500,
            r_max: 2.0,
            theta_max: 2.0 * PI,
            noise_sd: 0.1,
        }
    }
}

pub fn make_spiral(cfg: &SpiralConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    for _ in 0..cfg.n {
        let t = b.uniform(0.0, cfg.theta_max);
        let r = cfg.r_max * t / cfg.theta_max;
        b.push(&[r * t.cos(), r * t.sin()], &[t]);
    }
    b.finish("spiral", 2, 1, seed)
}

/// Length of the spiral between parameters `0` and `t`.
pub fn spiral_arc_length(r_max: f64, theta_max: f64, t: f64) -> f64 {
    // r = a t, ds = a sqrt(1 + t^2) dt.
    let a = r_max / theta_max;
    a * 0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// Swiss roll `(t cos t, h, t sin t)`. Truth: `(arc length from t_min, h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwissRollConfig {
    pub n: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub height: f64,
    pub noise_sd: f64,
}

impl Default for SwissRollConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            t_min: 1.5 * PI,
            t_max: 4.5 * PI,
            height: 21.0,
            noise_sd: 0.1,
        }
    }
}

/// `int_0^t sqrt(1 + s^2) ds`.
pub fn swiss_roll_arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

pub fn make_swiss_roll(cfg: &SwissRollConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    let s0 = swiss_roll_arc_length(cfg.t_min);
    for _ in 0..cfg.n {
        let t = b.uniform(cfg.t_min, cfg.t_max);
        let h = b.uniform(0.0, cfg.height);
        b.push(&[t * t.cos(), h, t * t.sin()], &[swiss_roll_arc_length(t) - s0, h]);
    }
    b.finish("swiss_roll", 3, 2, seed)
}

/// Helix `(cos t, sin t, pitch t)`. Truth: `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HelixConfig {
    pub n: usize,
    pub t_max: f64,
    pub pitch: f64,
    pub noise_sd: f64,
}

impl Default for HelixConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            t_max: 4.0 * PI,
            pitch: 0.3,
            noise_sd: 0.05,
        }
    }
}

pub fn make_helix(cfg: &HelixConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    for _ in 0..cfg.n {
        let t = b.uniform(0.0, cfg.t_max);
        b.push(&[t.cos(), t.sin(), cfg.pitch * t], &[t]);
    }
    b.finish("helix", 3, 1, seed)
}

/// Half cylinder `(cos phi, sin phi, h)`, `phi` in `[0, pi]`. Truth: `(phi, h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HalfCylinderConfig {
    pub n: usize,
    pub height: f64,
    pub noise_sd: f64,
}

impl Default for HalfCylinderConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            height: 2.0,
            noise_sd: 0.05,
        }
    }
}

pub fn make_half_cylinder(cfg: &HalfCylinderConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    for _ in 0..cfg.n {
        let phi = b.uniform(0.0, PI);
        let h = b.uniform(0.0, cfg.height);
        b.push(&[phi.cos(), phi.sin(), h], &[phi, h]);
    }
    b.finish("half_cylinder", 3, 2, seed)
}

/// Uniform points on the unit sphere (normalised Gaussian draws); the
/// hemisphere variant reflects them into `z >= 0`. Truth: polar angle from
/// `+z` and azimuth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereConfig {
    pub n: usize,
    pub noise_sd: f64,
    pub hemisphere: bool,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            noise_sd: 0.05,
            hemisphere: false,
        }
    }
}

pub fn make_sphere(cfg: &SphereConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    for _ in 0..cfg.n {
        let mut v = [0.0f64; 3];
        let mut norm = 0.0;
        while norm < 1e-12 {
            for c in &mut v {
                *c = StandardNormal.sample(&mut b.rng);
            }
            norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        }
        for c in &mut v {
            *c /= norm;
        }
        if cfg.hemisphere {
            v[2] = v[2].abs();
        }
        let theta = v[2].clamp(-1.0, 1.0).acos();
        let phi = v[1].atan2(v[0]);
        b.push(&v, &[theta, phi]);
    }
    let name = if cfg.hemisphere { "hemisphere" } else { "sphere" };
    b.finish(name, 3, 2, seed)
}

pub fn make_hemisphere(n: usize, noise_sd: f64, seed: u64) -> Result<LabeledDataset> {
    make_sphere(
        &SphereConfig {
            n,
            noise_sd,
            hemisphere: true,
        },
        seed,
    )
}

/// Uniform strip `[-half_length, half_length] x [-half_width, half_width]`
/// bent by `y -> y - bend x^2`. Truth: the strip coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrescentConfig {
    pub n: usize,
    pub half_length: f64,
    pub half_width: f64,
    pub bend: f64,
    pub noise_sd: f64,
}

impl Default for CrescentConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            half_length: 2.0,
            half_width: 0.25,
            bend: 0.5,
            noise_sd: 0.0,
        }
    }
}

pub fn make_crescent(cfg: &CrescentConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    for _ in 0..cfg.n {
        let u = b.uniform(-cfg.half_length, cfg.half_length);
        let v = b.uniform(-cfg.half_width, cfg.half_width);
        b.push(&[u, v - cfg.bend * u * u], &[u, v]);
    }
    b.finish("crescent", 2, 2, seed)
}

/// Segment from the origin along the first axis of `R^dim`. Truth: position
/// along the segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineConfig {
    pub n: usize,
    pub dim: usize,
    pub length: f64,
    pub noise_sd: f64,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self {
            n: 500,
            dim: 2,
            length: 4.0,
            noise_sd: 0.05,
        }
    }
}

pub fn make_line(cfg: &LineConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    if cfg.dim < 2 {
        return Err(Error::input("line dataset needs dim >= 2"));
    }
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    let mut p = vec![0.0; cfg.dim];
    for _ in 0..cfg.n {
        let s = b.uniform(0.0, cfg.length);
        p[0] = s;
        b.push(&p, &[s]);
    }
    b.finish("line", cfg.dim, 1, seed)
}

/// Rectangle `[0, length] x [0, width]` in the `z = 0` plane of `R^3`.
/// Truth: `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaneConfig {
    pub n: usize,
    pub length: f64,
    pub width: f64,
    pub noise_sd: f64,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        Self {
            n: 800,
            length: 6.0,
            width: 2.0,
            noise_sd: 0.05,
        }
    }
}

pub fn make_plane(cfg: &PlaneConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    let mut b = Builder::new(seed, cfg.noise_sd)?;
    for _ in 0..cfg.n {
        let x = b.uniform(0.0, cfg.length);
        let y = b.uniform(0.0, cfg.width);
        b.push(&[x, y, 0.0], &[x, y]);
    }
    b.finish("plane", 3, 2, seed)
}

/// Axis-aligned Gaussian blob with per-axis standard deviations `scales`.
/// Truth: the clean point itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobConfig {
    pub n: usize,
    pub scales: Vec<f64>,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            n: 500,
            scales: vec![2.0, 0.5],
        }
    }
}

pub fn make_blob(cfg: &BlobConfig, seed: u64) -> Result<LabeledDataset> {
    check_n(cfg.n)?;
    if cfg.scales.is_empty() || cfg.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::input("blob scales must be positive"));
    }
    let mut b = Builder::new(seed, 0.0)?;
    let dim = cfg.scales.len();
    let mut p = vec![0.0; dim];
    for _ in 0..cfg.n {
        for (c, s) in p.iter_mut().zip(&cfg.scales) {
            let z: f64 = StandardNormal.sample(&mut b.rng);
            *c = s * z;
        }
        let q = p.clone();
        b.push(&q, &q);
    }
    b.finish("blob", dim, dim, seed)
}

/// A generator addressable by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DatasetSpec {
    Spiral(SpiralConfig),
    SwissRoll(SwissRollConfig),
    Helix(HelixConfig),
    HalfCylinder(HalfCylinderConfig),
    Sphere(SphereConfig),
    Hemisphere(SphereConfig),
    Crescent(CrescentConfig),
    Line(LineConfig),
    Plane(PlaneConfig),
    Blob(BlobConfig),
}

impl DatasetSpec {
    pub const NAMES: [&'static str; 10] = [
        "spiral",
        "swiss_roll",
        "helix",
        "half_cylinder",
        "sphere",
        "hemisphere",
        "crescent",
        "line",
        "plane",
        "blob",
    ];

    /// Default configuration for a dataset name (`-` and `_` both accepted).
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name.replace('-', "_").as_str() {
            "spiral" => Self::Spiral(Default::default()),
            "swiss_roll" => Self::SwissRoll(Default::default()),
            "helix" => Self::Helix(Default::default()),
            "half_cylinder" => Self::HalfCylinder(Default::default()),
            "sphere" => Self::Sphere(Default::default()),
            "hemisphere" => Self::Hemisphere(SphereConfig {
                hemisphere: true,
                noise_sd: 0.3,
                ..Default::default()
            }),
            "crescent" => Self::Crescent(Default::default()),
            "line" => Self::Line(Default::default()),
            "plane" => Self::Plane(Default::default()),
            "blob" => Self::Blob(Default::default()),
            other => {
                return Err(Error::input(format!(
                    "unknown dataset '{other}'; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn set_n(&mut self, n: usize) {
        match self {
            Self::Spiral(c) => c.n = n,
            Self::SwissRoll(c) => c.n = n,
            Self::Helix(c) => c.n = n,
            Self::HalfCylinder(c) => c.n = n,
            Self::Sphere(c) | Self::Hemisphere(c) => c.n = n,
            Self::Crescent(c) => c.n = n,
            Self::Line(c) => c.n = n,
            Self::Plane(c) => c.n = n,
            Self::Blob(c) => c.n = n,
        }
    }

    /// Sets the noise level; the blob has none and ignores it.
    pub fn set_noise(&mut self, sd: f64) {
        match self {
            Self::Spiral(c) => c.noise_sd = sd,
            Self::SwissRoll(c) => c.noise_sd = sd,
            Self::Helix(c) => c.noise_sd = sd,
            Self::HalfCylinder(c) => c.noise_sd = sd,
            Self::Sphere(c) | Self::Hemisphere(c) => c.noise_sd = sd,
            Self::Crescent(c) => c.noise_sd = sd,
            Self::Line(c) => c.noise_sd = sd,
            Self::Plane(c) => c.noise_sd = sd,
            Self::Blob(_) => {}
        }
    }

    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        match self {
            Self::Spiral(c) => make_spiral(c, seed),
            Self::SwissRoll(c) => make_swiss_roll(c, seed),
            Self::Helix(c) => make_helix(c, seed),
            Self::HalfCylinder(c) => make_half_cylinder(c, seed),
            Self::Sphere(c) => make_sphere(
                &SphereConfig {
                    hemisphere: false,
                    ..c.clone()
                },
                seed,
            ),
            Self::Hemisphere(c) => make_sphere(
                &SphereConfig {
                    hemisphere: true,
                    ..c.clone()
                },
                seed,
            ),
            Self::Crescent(c) => make_crescent(c, seed),
            Self::Line(c) => make_line(c, seed),
            Self::Plane(c) => make_plane(c, seed),
            Self::Blob(c) => make_blob(c, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_endpoints() {
        let cfg = SpiralConfig::default();
        let a = cfg.r_max * (cfg.theta_max) / cfg.theta_max;
        assert!((a - 2.0).abs() < 1e-15);
        let d = make_spiral(&SpiralConfig { noise_sd: 0.0, ..cfg }, 3).unwrap();
        for i in 0..d.points.len() {
            let t = d.truth.point(i)[0];
            let p = d.points.point(i);
            let r = 2.0 * t / (2.0 * PI);
            assert!((p[0] - r * t.cos()).abs() < 1e-12 && (p[1] - r * t.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn regeneration_is_identical() {
        for name in DatasetSpec::NAMES {
            let spec = DatasetSpec::by_name(name).unwrap();
            let a = spec.generate(11).unwrap();
            let b = spec.generate(11).unwrap();
            assert_eq!(a.points.as_slice(), b.points.as_slice(), "{name}");
            assert_eq!(a.truth.as_slice(), b.truth.as_slice(), "{name}");
            let c = spec.generate(12).unwrap();
            assert_ne!(a.points.as_slice(), c.points.as_slice(), "{name}");
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(DatasetSpec::by_name("torus"), Err(Error::Input(_))));
    }

    #[test]
    fn spec_serde_roundtrip() {
        let spec = DatasetSpec::by_name("swiss-roll").unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"name\":\"swiss_roll\""));
        let back: DatasetSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
