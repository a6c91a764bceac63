use std::path::{Path, PathBuf};

use ffpat_core::phantom::PhantomKind;
use ffpat_core::recon::{CommandRunner, GdParams};
use ffpat_core::Grid;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: usize,
    #[serde(default = "one")]
    pub n_y: usize,
    pub n_z: usize,
    pub dx: f64,
    /// Nominal sound speed used by the reconstruction operators.
    pub c: f64,
    pub n_t: usize,
    /// Defaults to `dx / c`, or `dx / c_max` when the sound speed is jittered.
    #[serde(default)]
    pub dt: Option<f64>,
}

fn default_objects() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    pub kind: PhantomKind,
    /// Number of phantom volumes.
    pub count: usize,
    pub seed: u64,
    /// Disks or vessel segments per volume.
    #[serde(default = "default_objects")]
    pub objects: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub n_beams: usize,
    pub factor: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub snr: Option<f64>,
    pub seed: u64,
}

fn c_min() -> f64 {
    1560.0
}

fn c_max() -> f64 {
    1600.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoundSpeedConfig {
    #[serde(default = "c_min")]
    pub c_min: f64,
    #[serde(default = "c_max")]
    pub c_max: f64,
    pub seed: u64,
}

fn default_method() -> String {
    "bp".into()
}

fn default_theta() -> f64 {
    45.0
}

fn default_oversample() -> usize {
    ffpat_core::kspace::DEFAULT_OVERSAMPLE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_theta")]
    pub theta_max_deg: f64,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            theta_max_deg: default_theta(),
            oversample: default_oversample(),
            params: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub grid: GridConfig,
    pub phantom: PhantomConfig,
    pub mask: MaskConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub sound_speed: Option<SoundSpeedConfig>,
    #[serde(default)]
    pub recon: ReconConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Replaces every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.phantom.seed = seed;
        self.mask.seed = seed;
        if let Some(n) = &mut self.noise {
            n.seed = seed;
        }
        if let Some(s) = &mut self.sound_speed {
            s.seed = seed;
        }
    }

    fn check(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if let Some(s) = &self.sound_speed {
            if !(s.c_min > 0.0 && s.c_min <= s.c_max && s.c_max.is_finite()) {
                return usage(format!(
                    "sound_speed range [{}, {}] is invalid",
                    s.c_min, s.c_max
                ));
            }
        }
        if let Some(n) = &self.noise {
            if let Some(snr) = n.snr {
                if snr.is_nan() || snr <= 0.0 {
                    return usage(format!("noise.snr must be > 0, got {snr}"));
                }
            }
        }
        if self.mask.n_beams == 0 || self.mask.factor == 0 {
            return usage("mask.n_beams and mask.factor must be >= 1".into());
        }
        if !(self.recon.theta_max_deg > 0.0 && self.recon.theta_max_deg <= 90.0) {
            return usage(format!(
                "recon.theta_max_deg must be in (0, 90], got {}",
                self.recon.theta_max_deg
            ));
        }
        self.grid().map(drop)
    }

    /// Time step shared by every sample: stable for the fastest sound speed.
    pub fn dt(&self) -> f64 {
        let g = &self.grid;
        g.dt.unwrap_or_else(|| {
            let c = self.sound_speed.as_ref().map_or(g.c, |s| s.c_max.max(g.c));
            g.dx / c
        })
    }

    /// Grid at the nominal sound speed.
    pub fn grid(&self) -> Result<Grid, CliError> {
        let g = &self.grid;
        Grid::new(g.n_x, g.n_y, g.n_z, g.dx, g.c, g.n_t, self.dt())
            .map_err(|e| CliError::Usage(format!("invalid grid: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bp,
    Tv,
    Gd,
    Learned,
}

impl std::str::FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "bp" => Ok(Method::Bp),
            "tv" => Ok(Method::Tv),
            "gd" => Ok(Method::Gd),
            "learned" => Ok(Method::Learned),
            other => Err(CliError::Usage(format!(
                "unknown reconstruction method '{other}' (expected bp, tv, gd or learned)"
            ))),
        }
    }
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bp => "bp",
            Method::Tv => "tv",
            Method::Gd => "gd",
            Method::Learned => "learned",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpParams {}

fn yes() -> bool {
    true
}

fn default_alpha() -> f64 {
    0.01
}

fn twenty() -> usize {
    20
}

/// TV settings. With `relative_alpha` the regularisation weights are
/// multiples of `max(A^T g)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "yes")]
    pub relative_alpha: bool,
    #[serde(default = "twenty")]
    pub n_outer: usize,
    #[serde(default = "twenty")]
    pub n_inner: usize,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "yes")]
    pub nonneg: bool,
    #[serde(default = "yes")]
    pub accelerate: bool,
    /// Alphas to try against the ground truth; the best PSNR is kept.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
}

impl Default for TvConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateKind {
    Identity,
    GradientStep,
    External,
}

fn five() -> usize {
    ffpat_core::recon::DEFAULT_ITERATES
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnedConfig {
    pub update: UpdateKind,
    #[serde(default = "five")]
    pub iterations: usize,
    /// Gradient-step size; defaults to half the inverse Lipschitz estimate.
    #[serde(default)]
    pub tau: Option<f64>,
    /// One weights artifact per iterate for external updates.
    #[serde(default)]
    pub weights: Vec<PathBuf>,
    #[serde(default)]
    pub runner: Option<CommandRunner>,
}

fn parse_params<T: serde::de::DeserializeOwned + Default>(
    v: &serde_json::Value,
) -> Result<T, CliError> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(v.clone())
        .map_err(|e| CliError::Usage(format!("invalid recon.params: {e}")))
}

#[derive(Debug, Clone)]
pub enum MethodParams {
    Bp,
    Tv(TvConfig),
    Gd(GdParams),
    Learned(LearnedConfig),
}

impl MethodParams {
    pub fn parse(method: Method, v: &serde_json::Value) -> Result<Self, CliError> {
        Ok(match method {
            Method::Bp => {
                parse_params::<BpParams>(v)?;
                MethodParams::Bp
            }
            Method::Tv => MethodParams::Tv(parse_params(v)?),
            Method::Gd => MethodParams::Gd(parse_params(v)?),
            Method::Learned => {
                if v.is_null() {
                    return Err(CliError::Usage(
                        "learned reconstruction needs recon.params.update".into(),
                    ));
                }
                let c: LearnedConfig = serde_json::from_value(v.clone())
                    .map_err(|e| CliError::Usage(format!("invalid recon.params: {e}")))?;
                if c.update == UpdateKind::External {
                    if c.runner.is_none() {
                        return Err(CliError::Usage(
                            "external updates need recon.params.runner".into(),
                        ));
                    }
                    if c.weights.is_empty() {
                        return Err(CliError::Usage(
                            "external updates need one weights path per iterate".into(),
                        ));
                    }
                } else if c.iterations == 0 {
                    return Err(CliError::Usage("learned iterations must be >= 1".into()));
                }
                MethodParams::Learned(c)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "grid": {"n_x": 32, "n_z": 32, "dx": 1e-4, "c": 1580, "n_t": 48},
        "phantom": {"kind": "disks", "count": 2, "seed": 1},
        "mask": {"n_beams": 8, "factor": 4, "seed": 2},
        "noise": {"snr": 20, "seed": 3},
        "sound_speed": {"seed": 4}
    }"#;

    fn parse(s: &str) -> Result<PipelineConfig, CliError> {
        let cfg: PipelineConfig =
            serde_json::from_str(s).map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.grid.n_y, 1);
        let s = cfg.sound_speed.as_ref().unwrap();
        assert_eq!((s.c_min, s.c_max), (1560.0, 1600.0));
        assert_eq!(cfg.dt(), 1e-4 / 1600.0);
        assert_eq!(cfg.recon.method, "bp");
        assert_eq!(cfg.grid().unwrap().c, 1580.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = BASE.replace("\"seed\": 2}", "\"seed\": 2, \"extra\": 1}");
        assert!(parse(&bad).is_err());
        let missing_seed = BASE.replace(", \"seed\": 1", "");
        assert!(parse(&missing_seed).is_err());
    }

    #[test]
    fn seed_override_reaches_every_block() {
        let mut cfg = parse(BASE).unwrap();
        cfg.override_seed(99);
        assert_eq!(cfg.phantom.seed, 99);
        assert_eq!(cfg.mask.seed, 99);
        assert_eq!(cfg.noise.unwrap().seed, 99);
        assert_eq!(cfg.sound_speed.unwrap().seed, 99);
    }

    #[test]
    fn method_params_are_strict() {
        assert!("svd".parse::<Method>().is_err());
        let tv = MethodParams::parse(Method::Tv, &serde_json::json!({"alpha": 0.1})).unwrap();
        assert!(matches!(tv, MethodParams::Tv(TvConfig { n_outer: 20, .. })));
        assert!(MethodParams::parse(Method::Tv, &serde_json::json!({"alfa": 0.1})).is_err());
        assert!(MethodParams::parse(Method::Learned, &serde_json::Value::Null).is_err());
        assert!(
            MethodParams::parse(Method::Learned, &serde_json::json!({"update": "external"}))
                .is_err()
        );
        let l = MethodParams::parse(Method::Learned, &serde_json::json!({"update": "identity"}))
            .unwrap();
        assert!(matches!(
            l,
            MethodParams::Learned(LearnedConfig { iterations: 5, .. })
        ));
    }
}
