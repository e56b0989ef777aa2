//! Experiment configuration: one strict TOML file describes the problem,
//! the model, the training protocol, the reference solver, and the output
//! location. Unknown keys are rejected; every field has a default matching
//! the benchmark protocol, so a run is reproducible from config + seed alone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::model::{ModelMode, ModelSpec};
use crate::pde::{BcKind, IcKind, PdeKind, PdeSpec};
use crate::reference::{Scheme, SolverConfig};
use crate::training::{CurriculumSettings, InverseSettings, RarSettings, TrainSettings};

pub const CACHE_DIR_ENV: &str = "ASPEN_CACHE_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub pde: PdeBlock,
    pub model: ModelBlock,
    pub training: TrainingBlock,
    pub inverse: Option<InverseBlock>,
    pub reference: ReferenceBlock,
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeBlock {
    /// One of: cgle, allen_cahn, burgers, kdv, nls.
    pub kind: String,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub epsilon: f64,
    pub nu: f64,
    pub x_domain: [f64; 2],
    pub t_domain: [f64; 2],
    /// One of: tanh_front, tanh_front_scaled, plane_wave, quad_cos,
    /// neg_sin_pi, sech, kdv_soliton, zero.
    pub ic: String,
    /// Scale parameter for the parameterized initial conditions.
    pub ic_param: f64,
    /// One of: dirichlet_from_ic, dirichlet, periodic.
    pub bc: String,
    pub bc_left: [f64; 2],
    pub bc_right: [f64; 2],
}

impl Default for PdeBlock {
    fn default() -> Self {
        PdeBlock {
            kind: "cgle".into(),
            b: 0.5,
            c: -1.3,
            d: 0.001,
            epsilon: 0.01,
            nu: 0.01 / std::f64::consts::PI,
            x_domain: [-10.0, 7.5],
            t_domain: [0.0, 10.0],
            ic: "tanh_front".into(),
            ic_param: 1.0,
            bc: "dirichlet_from_ic".into(),
            bc_left: [0.0, 0.0],
            bc_right: [0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub mode: ModelMode,
    pub m: usize,
    pub sigma: f64,
    pub hidden_layers: usize,
    pub width: usize,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock { mode: ModelMode::Aspen, m: 128, sigma: 10.0, hidden_layers: 8, width: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingBlock {
    pub epochs: usize,
    pub lr0: f64,
    pub lr1: f64,
    pub w_res: f64,
    pub w_icbc: f64,
    pub n_res: usize,
    pub n_ic: usize,
    pub n_bc: usize,
    pub resample_interval: usize,
    pub rar: RarBlock,
    pub curriculum: CurriculumBlock,
    pub seed: u64,
    pub grad_shards: usize,
    pub log_stride: usize,
    pub checkpoint_stride: usize,
}

impl Default for TrainingBlock {
    fn default() -> Self {
        TrainingBlock {
            epochs: 20_000,
            lr0: 1e-3,
            lr1: 1e-4,
            w_res: 1.0,
            w_icbc: 100.0,
            n_res: 20_000,
            n_ic: 1000,
            n_bc: 1000,
            resample_interval: 1000,
            rar: RarBlock::default(),
            curriculum: CurriculumBlock::default(),
            seed: 42,
            grad_shards: 32,
            log_stride: 100,
            checkpoint_stride: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RarBlock {
    pub enabled: bool,
    pub interval: usize,
    pub pool: usize,
    pub add: usize,
    pub cap: usize,
}

impl Default for RarBlock {
    fn default() -> Self {
        RarBlock { enabled: true, interval: 2000, pool: 100_000, add: 1000, cap: 5000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumBlock {
    pub enabled: bool,
    pub s0: f64,
    pub ramp_frac: f64,
}

impl Default for CurriculumBlock {
    fn default() -> Self {
        CurriculumBlock { enabled: true, s0: 0.25, ramp_frac: 0.4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseBlock {
    pub n_obs: usize,
    pub noise: f64,
    pub b0: f64,
    pub c0: f64,
    pub w_data: f64,
}

impl Default for InverseBlock {
    fn default() -> Self {
        InverseBlock { n_obs: 200, noise: 0.05, b0: 0.1, c0: -0.5, w_data: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceBlock {
    pub nx: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub n_snapshots: usize,
}

impl Default for ReferenceBlock {
    fn default() -> Self {
        ReferenceBlock { nx: 1024, dt: 1e-4, scheme: Scheme::CrankNicolsonFd, n_snapshots: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: "out".into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(field: &'static str, message: impl Into<String>) -> ConfigError {
            ConfigError::Invalid { field, message: message.into() }
        }
        if self.pde.x_domain[1] <= self.pde.x_domain[0] {
            return Err(bad("pde.x_domain", "must be a nonempty interval"));
        }
        if self.pde.t_domain[1] <= self.pde.t_domain[0] {
            return Err(bad("pde.t_domain", "must be a nonempty interval"));
        }
        if self.model.mode != ModelMode::Baseline && self.model.m < 1 {
            return Err(bad("model.m", "need at least one Fourier feature"));
        }
        if self.model.sigma < 0.0 || !self.model.sigma.is_finite() {
            return Err(bad("model.sigma", "must be finite and nonnegative"));
        }
        if self.model.width < 1 {
            return Err(bad("model.width", "must be at least 1"));
        }
        if self.training.n_res < 1 || self.training.n_ic < 1 || self.training.n_bc < 1 {
            return Err(bad("training.n_res", "point counts must be at least 1"));
        }
        if self.training.w_res < 0.0 || !self.training.w_res.is_finite() {
            return Err(bad("training.w_res", "weights must be finite and nonnegative"));
        }
        if self.training.w_icbc < 0.0 || !self.training.w_icbc.is_finite() {
            return Err(bad("training.w_icbc", "weights must be finite and nonnegative"));
        }
        if !(self.training.lr0 > 0.0 && self.training.lr1 > 0.0) {
            return Err(bad("training.lr0", "learning rates must be positive"));
        }
        if self.training.grad_shards < 1 {
            return Err(bad("training.grad_shards", "must be at least 1"));
        }
        if self.training.curriculum.enabled {
            if !(0.0 < self.training.curriculum.s0 && self.training.curriculum.s0 <= 1.0) {
                return Err(bad("training.curriculum.s0", "must lie in (0, 1]"));
            }
            if self.pde.ic != "tanh_front" {
                return Err(bad("training.curriculum.enabled", "curriculum smoothing requires ic = \"tanh_front\""));
            }
        }
        if let Some(inv) = &self.inverse {
            if inv.n_obs < 1 {
                return Err(bad("inverse.n_obs", "need at least one observation"));
            }
            if self.pde.kind != "cgle" {
                return Err(bad("inverse.n_obs", "inverse mode is defined for kind = \"cgle\""));
            }
        }
        if !(self.reference.dt > 0.0) {
            return Err(bad("reference.dt", "must be positive"));
        }
        if self.reference.dt > 0.1 {
            return Err(bad("reference.dt", "too large for the explicit reaction term (max 0.1)"));
        }
        if self.reference.nx < 4 {
            return Err(bad("reference.nx", "must be at least 4"));
        }
        if self.reference.n_snapshots < 2 {
            return Err(bad("reference.n_snapshots", "need at least 2 snapshots"));
        }
        // Kind/ic/bc names and corner consistency resolve through PdeSpec.
        let spec = self.pde_spec()?;
        spec.validate().map_err(|e| bad("pde.bc", e.to_string()))?;
        Ok(())
    }

    pub fn pde_spec(&self) -> Result<PdeSpec, ConfigError> {
        let kind = match self.pde.kind.as_str() {
            "cgle" => PdeKind::Cgle { b: self.pde.b, c: self.pde.c },
            "allen_cahn" => PdeKind::AllenCahn { d: self.pde.d, epsilon: self.pde.epsilon },
            "burgers" => PdeKind::Burgers { nu: self.pde.nu },
            "kdv" => PdeKind::KdV,
            "nls" => PdeKind::Nls,
            other => {
                return Err(ConfigError::Invalid {
                    field: "pde.kind",
                    message: format!("unknown kind {other:?}"),
                })
            }
        };
        let ic = match self.pde.ic.as_str() {
            "tanh_front" => IcKind::TanhFront,
            "tanh_front_scaled" => IcKind::TanhFrontScaled { s: self.pde.ic_param },
            "plane_wave" => IcKind::PlaneWave { k: self.pde.ic_param },
            "quad_cos" => IcKind::QuadCos,
            "neg_sin_pi" => IcKind::NegSinPi,
            "sech" => IcKind::Sech { amp: self.pde.ic_param },
            "kdv_soliton" => IcKind::KdvSoliton { k: self.pde.ic_param },
            "zero" => IcKind::Zero,
            other => {
                return Err(ConfigError::Invalid {
                    field: "pde.ic",
                    message: format!("unknown initial condition {other:?}"),
                })
            }
        };
        let bc = match self.pde.bc.as_str() {
            "periodic" => BcKind::Periodic,
            "dirichlet" => BcKind::Dirichlet {
                left: Complex64::new(self.pde.bc_left[0], self.pde.bc_left[1]),
                right: Complex64::new(self.pde.bc_right[0], self.pde.bc_right[1]),
            },
            "dirichlet_from_ic" => BcKind::Dirichlet {
                left: ic.value(self.pde.x_domain[0], 1.0),
                right: ic.value(self.pde.x_domain[1], 1.0),
            },
            other => {
                return Err(ConfigError::Invalid {
                    field: "pde.bc",
                    message: format!("unknown boundary kind {other:?}"),
                })
            }
        };
        Ok(PdeSpec {
            kind,
            x_domain: (self.pde.x_domain[0], self.pde.x_domain[1]),
            t_domain: (self.pde.t_domain[0], self.pde.t_domain[1]),
            ic,
            bc,
        })
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            mode: self.model.mode,
            m: self.model.m,
            sigma: self.model.sigma,
            hidden_layers: self.model.hidden_layers,
            width: self.model.width,
        }
    }

    pub fn train_settings(&self) -> TrainSettings {
        let t = &self.training;
        TrainSettings {
            epochs: t.epochs,
            lr0: t.lr0,
            lr1: t.lr1,
            w_res: t.w_res,
            w_icbc: t.w_icbc,
            n_res: t.n_res,
            n_ic: t.n_ic,
            n_bc: t.n_bc,
            resample_interval: t.resample_interval,
            rar: RarSettings {
                enabled: t.rar.enabled,
                interval: t.rar.interval,
                pool: t.rar.pool,
                add: t.rar.add,
                cap: t.rar.cap,
            },
            curriculum: CurriculumSettings {
                enabled: t.curriculum.enabled,
                s0: t.curriculum.s0,
                ramp_frac: t.curriculum.ramp_frac,
            },
            seed: t.seed,
            grad_shards: t.grad_shards,
            log_stride: t.log_stride,
            checkpoint_stride: t.checkpoint_stride,
        }
    }

    pub fn inverse_settings(&self) -> Option<InverseSettings> {
        self.inverse.as_ref().map(|inv| InverseSettings {
            n_obs: inv.n_obs,
            noise: inv.noise,
            b0: inv.b0,
            c0: inv.c0,
            w_data: inv.w_data,
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::new(self.reference.nx, self.reference.dt, self.reference.scheme, self.reference.n_snapshots)
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }

    /// Field cache location: the env override when set, else `<out>/cache`.
    pub fn cache_dir(&self) -> PathBuf {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir().join("cache"),
        }
    }

    /// Stable short hash of the full resolved configuration.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_roundtrip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn default_protocol_values() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.model.m, 128);
        assert_eq!(cfg.model.sigma, 10.0);
        assert_eq!((cfg.model.hidden_layers, cfg.model.width), (8, 40));
        assert_eq!(cfg.training.n_res, 20_000);
        assert_eq!((cfg.training.n_ic, cfg.training.n_bc), (1000, 1000));
        assert_eq!((cfg.training.w_res, cfg.training.w_icbc), (1.0, 100.0));
        assert_eq!((cfg.training.lr0, cfg.training.lr1), (1e-3, 1e-4));
        assert_eq!((cfg.reference.nx, cfg.reference.dt), (1024, 1e-4));
        assert_eq!(cfg.reference.n_snapshots, 200);
        assert_eq!(cfg.pde.x_domain, [-10.0, 7.5]);
        assert_eq!(cfg.pde.t_domain, [0.0, 10.0]);
        assert_eq!((cfg.pde.b, cfg.pde.c), (0.5, -1.3));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[model]\nm = 64\nnot_a_field = 1\n";
        let err = ExperimentConfig::from_toml(text);
        assert!(matches!(err, Err(ConfigError::Parse(_))), "{err:?}");
    }

    #[test]
    fn invalid_dt_names_the_field() {
        let text = "[reference]\ndt = -0.5\n";
        match ExperimentConfig::from_toml(text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "reference.dt"),
            other => panic!("expected invalid-field error, got {other:?}"),
        }
    }

    #[test]
    fn pde_spec_mapping() {
        let mut cfg = ExperimentConfig::default();
        let spec = cfg.pde_spec().unwrap();
        assert!(matches!(spec.kind, PdeKind::Cgle { b, c } if b == 0.5 && c == -1.3));
        assert!(matches!(spec.bc, BcKind::Dirichlet { .. }));

        cfg.pde.kind = "burgers".into();
        cfg.pde.ic = "neg_sin_pi".into();
        cfg.pde.x_domain = [-1.0, 1.0];
        cfg.pde.t_domain = [0.0, 1.0];
        cfg.training.curriculum.enabled = false;
        cfg.validate().unwrap();
        let spec = cfg.pde_spec().unwrap();
        assert!(matches!(spec.kind, PdeKind::Burgers { .. }));
    }

    #[test]
    fn curriculum_needs_tanh_ic() {
        let mut cfg = ExperimentConfig::default();
        cfg.pde.ic = "zero".into();
        cfg.pde.bc = "periodic".into();
        let err = cfg.validate();
        assert!(matches!(err, Err(ConfigError::Invalid { field: "training.curriculum.enabled", .. })));
    }
}
