//! Classical high-fidelity solvers producing the ground-truth field: a
//! split-step Fourier stepper for periodic runs and a semi-implicit
//! Crank-Nicolson finite-difference stepper for Dirichlet runs, kept as
//! independent cross-checks of each other.

mod crank_nicolson;
mod field;
mod split_step;

pub use field::{Field, FieldIoError};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::pde::{BcKind, PdeKind, PdeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SplitStepFourier,
    CrankNicolsonFd,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SplitStepFourier => "split_step_fourier",
            Scheme::CrankNicolsonFd => "crank_nicolson_fd",
        }
    }
}

/// Which parts of the CGLE reaction term A − (1+ic)|A|²A the stepper keeps.
/// The reduced variants exist for validation probes with known decay rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionTerm {
    Full,
    /// Keep only the linear growth +A.
    GrowthOnly,
    /// Drop the reaction entirely (pure diffusion probe).
    None,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nx: usize,
    /// Requested integration step. Each snapshot interval is integrated with
    /// the largest uniform substep not exceeding this.
    pub dt: f64,
    pub scheme: Scheme,
    /// Stored time slices, uniformly spaced and including both endpoints.
    pub n_snapshots: usize,
    pub reaction: ReactionTerm,
}

impl SolverConfig {
    pub fn new(nx: usize, dt: f64, scheme: Scheme, n_snapshots: usize) -> Self {
        SolverConfig { nx, dt, scheme, n_snapshots, reaction: ReactionTerm::Full }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.nx < 4 {
            return Err(SolverError::BadConfig("nx must be at least 4"));
        }
        if !(self.dt > 0.0) {
            return Err(SolverError::BadConfig("dt must be positive"));
        }
        // The reaction term is integrated explicitly; its Lipschitz scale on
        // the CGLE attractor is O(1), so cap the step well below it. The
        // diffusion term is implicit (CN) or exact (spectral) and imposes no
        // step restriction.
        if self.dt > 0.1 {
            return Err(SolverError::BadConfig("dt too large for the explicit reaction term (max 0.1)"));
        }
        if self.n_snapshots < 2 {
            return Err(SolverError::BadConfig("need at least 2 snapshots"));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    BadConfig(&'static str),
    #[error("solver supports only the Ginzburg-Landau equation, got {0}")]
    UnsupportedPde(&'static str),
    #[error("Crank-Nicolson stepper requires Dirichlet boundaries")]
    NeedsDirichlet,
    #[error("field magnitude exceeded 1e6 at integration step {step}")]
    BlowUp { step: u64 },
    #[error("tridiagonal system became singular (pivot {pivot:.3e})")]
    SingularSystem { pivot: f64 },
    #[error(transparent)]
    Io(#[from] FieldIoError),
}

/// Uniform snapshot schedule: `n_snapshots` slices spanning [t0, t1]
/// inclusive, each interval integrated with `substeps` uniform steps of
/// size `h ≤ requested dt`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StepPlan {
    pub interval: f64,
    pub substeps: u64,
    pub h: f64,
}

pub(crate) fn plan_steps(t_domain: (f64, f64), dt: f64, n_snapshots: usize) -> StepPlan {
    let interval = (t_domain.1 - t_domain.0) / (n_snapshots as f64 - 1.0);
    let substeps = (interval / dt).ceil().max(1.0) as u64;
    StepPlan { interval, substeps, h: interval / substeps as f64 }
}

/// Runs the configured scheme on the problem.
pub fn solve(pde: &PdeSpec, cfg: &SolverConfig) -> Result<Field, SolverError> {
    cfg.validate()?;
    let (b, c) = match pde.kind {
        PdeKind::Cgle { b, c } => (b, c),
        other => return Err(SolverError::UnsupportedPde(other.name())),
    };
    match cfg.scheme {
        Scheme::SplitStepFourier => split_step::solve(pde, cfg, b, c),
        Scheme::CrankNicolsonFd => {
            let (left, right) = match pde.bc {
                BcKind::Dirichlet { left, right } => (left, right),
                BcKind::Periodic => return Err(SolverError::NeedsDirichlet),
            };
            crank_nicolson::solve(pde, cfg, b, c, left, right)
        }
    }
}

/// Stable identity of a solver run, used as the cache key.
pub fn solve_hash(pde: &PdeSpec, cfg: &SolverConfig) -> String {
    let mut h = Sha256::new();
    let bc = match pde.bc {
        BcKind::Dirichlet { left, right } => {
            format!("dirichlet {:x} {:x} {:x} {:x}", left.re.to_bits(), left.im.to_bits(), right.re.to_bits(), right.im.to_bits())
        }
        BcKind::Periodic => "periodic".to_string(),
    };
    let key = format!(
        "{:?}|{:?}|{:?}|{:?}|{}|{}|{}|{:x}|{}|{:?}",
        pde.kind, pde.ic, pde.x_domain, pde.t_domain, bc,
        cfg.scheme.name(), cfg.nx, cfg.dt.to_bits(), cfg.n_snapshots, cfg.reaction,
    );
    h.update(key.as_bytes());
    let digest = h.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(cache_dir: &Path, pde: &PdeSpec, cfg: &SolverConfig) -> PathBuf {
    cache_dir.join(format!("field_{}.bin", solve_hash(pde, cfg)))
}

/// Solves through the on-disk cache; returns the field and whether it was a
/// cache hit. The key hashes the full problem + solver configuration, so a
/// stale file can never be reused for a different run.
pub fn cached_solve(
    pde: &PdeSpec,
    cfg: &SolverConfig,
    cache_dir: &Path,
) -> Result<(Field, bool), SolverError> {
    let path = cache_path(cache_dir, pde, cfg);
    if path.exists() {
        match Field::load(&path) {
            Ok(f) => return Ok((f, true)),
            Err(_) => { /* unreadable cache entry: recompute and overwrite */ }
        }
    }
    let field = solve(pde, cfg)?;
    std::fs::create_dir_all(cache_dir).map_err(FieldIoError::from)?;
    field.save(&path)?;
    Ok((field, false))
}

/// The benchmark ground truth: Crank-Nicolson on the CGLE front problem at
/// Nx = 1024, dt = 1e-4, 200 stored slices. The Dirichlet data makes the FD
/// scheme the appropriate truth; the spectral stepper cross-checks it on an
/// enlarged periodic domain (see the validation suite).
pub fn ground_truth(cache_dir: &Path) -> Result<Field, SolverError> {
    let pde = PdeSpec::cgle_front();
    let cfg = SolverConfig::new(1024, 1e-4, Scheme::CrankNicolsonFd, 200);
    cached_solve(&pde, &cfg, cache_dir).map(|(f, _)| f)
}

pub(crate) fn reaction_value(a: Complex64, c: f64, term: ReactionTerm) -> Complex64 {
    match term {
        ReactionTerm::Full => a - Complex64::new(1.0, c) * a.norm_sqr() * a,
        ReactionTerm::GrowthOnly => a,
        ReactionTerm::None => Complex64::new(0.0, 0.0),
    }
}
