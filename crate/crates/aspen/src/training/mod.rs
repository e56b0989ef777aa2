//! The full training loop: collocation sampling with periodic resampling,
//! loss assembly, Adam with the two-stage learning-rate schedule,
//! residual-based refinement, curriculum scheduling, and the inverse mode
//! where the governing parameters join the trainable set.

mod adam;
mod loss;
mod rar;
mod sampler;

pub use adam::{lr_at, AdamState};
pub use loss::{loss_and_grad, loss_only, EpochOutput, LossBreakdown, LossWeights, Observation};
pub use rar::rar_refine;
pub use sampler::{lhs_sample, lhs_sample_1d, BoundaryPoint, CollocPoint, CollocationSet, PointTag, Side};

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{JetScratch, ModelParams, ModelSpec};
use crate::pde::{IcKind, PdeKind, PdeSpec};
use crate::reference::Field;
use crate::rng::SeedStreams;

#[derive(Clone, Copy, Debug)]
pub struct RarSettings {
    pub enabled: bool,
    /// Epoch interval between refinement rounds (0 = never).
    pub interval: usize,
    /// Candidate pool size per round.
    pub pool: usize,
    /// Points appended per round.
    pub add: usize,
    /// Total appended points never exceed this.
    pub cap: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct CurriculumSettings {
    pub enabled: bool,
    /// Initial smoothing scale for the tanh front.
    pub s0: f64,
    /// Fraction of training over which the scale ramps linearly to 1.
    pub ramp_frac: f64,
}

#[derive(Clone, Debug)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr0: f64,
    pub lr1: f64,
    pub w_res: f64,
    pub w_icbc: f64,
    pub n_res: usize,
    pub n_ic: usize,
    pub n_bc: usize,
    /// Epoch interval for redrawing the LHS point sets (0 = never).
    pub resample_interval: usize,
    pub rar: RarSettings,
    pub curriculum: CurriculumSettings,
    pub seed: u64,
    /// Fixed shard count for the deterministic gradient reduction.
    pub grad_shards: usize,
    pub log_stride: usize,
    /// Checkpoint every this many epochs (0 = final only).
    pub checkpoint_stride: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct InverseSettings {
    pub n_obs: usize,
    /// Noise std as a fraction of the field's rms magnitude.
    pub noise: f64,
    pub b0: f64,
    pub c0: f64,
    pub w_data: f64,
}

#[derive(Clone, Debug)]
pub struct LogRow {
    pub epoch: usize,
    pub l_total: f64,
    pub l_res: f64,
    pub l_ic: f64,
    pub l_bc: f64,
    pub lr: f64,
    pub seconds: f64,
    pub b: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainOutcome {
    Completed,
    /// Expected for the raw-coordinate reference configuration on stiff
    /// problems; recorded, not a crash.
    Diverged { epoch: usize, reason: String },
}

#[derive(Debug)]
pub struct TrainResult {
    pub params: ModelParams,
    pub outcome: TrainOutcome,
    pub log: Vec<LogRow>,
    /// Frequency matrix at initialization (empty in baseline mode).
    pub k_init: Vec<f64>,
    /// Observations used by the inverse mode (empty otherwise).
    pub observations: Vec<Observation>,
    /// All refinement-added points, in insertion order.
    pub rar_added: Vec<(f64, f64)>,
    /// Laplace std estimates for (b, c) in inverse mode.
    pub laplace_ci: Option<(f64, f64)>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Pde(#[from] crate::pde::PdeSpecError),
    #[error("curriculum smoothing requires the tanh front initial condition")]
    CurriculumNeedsTanhIc,
    #[error("inverse mode is defined for the Ginzburg-Landau equation only")]
    InverseNeedsCgle,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// File outputs of a run: streamed log rows and checkpoints. All fields are
/// optional so library callers can train silently.
#[derive(Default)]
pub struct TrainSink {
    log: Option<std::io::BufWriter<std::fs::File>>,
    checkpoint_dir: Option<PathBuf>,
    config_hash: String,
    header_written: bool,
}

impl TrainSink {
    pub fn silent() -> Self {
        Self::default()
    }

    pub fn with_log(mut self, path: &std::path::Path) -> std::io::Result<Self> {
        self.log = Some(std::io::BufWriter::new(std::fs::File::create(path)?));
        Ok(self)
    }

    pub fn with_checkpoints(mut self, dir: PathBuf, config_hash: &str) -> Self {
        self.checkpoint_dir = Some(dir);
        self.config_hash = config_hash.to_string();
        self
    }

    fn log_row(&mut self, row: &LogRow, inverse: bool) -> std::io::Result<()> {
        if let Some(w) = self.log.as_mut() {
            if !self.header_written {
                if inverse {
                    writeln!(w, "epoch,l_total,l_res,l_ic,l_bc,lr,seconds,b,c")?;
                } else {
                    writeln!(w, "epoch,l_total,l_res,l_ic,l_bc,lr,seconds")?;
                }
                self.header_written = true;
            }
            write!(
                w,
                "{},{},{},{},{},{},{}",
                row.epoch, row.l_total, row.l_res, row.l_ic, row.l_bc, row.lr, row.seconds
            )?;
            if inverse {
                write!(w, ",{},{}", row.b.unwrap_or(f64::NAN), row.c.unwrap_or(f64::NAN))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    fn checkpoint(&mut self, name: &str, params: &ModelParams) -> std::io::Result<()> {
        if let Some(dir) = &self.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            params.save(&dir.join(name), &self.config_hash)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        if let Some(w) = self.log.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

/// Curriculum smoothing scale at an epoch: linear ramp from `s0` to 1 over
/// the first `ramp_frac` of training, then exactly 1.
pub fn curriculum_scale(settings: &CurriculumSettings, epoch: usize, total: usize) -> f64 {
    if !settings.enabled || total == 0 || settings.ramp_frac <= 0.0 {
        return 1.0;
    }
    let ramp = (settings.ramp_frac * total as f64).max(1.0);
    let frac = (epoch as f64 / ramp).min(1.0);
    settings.s0 + (1.0 - settings.s0) * frac
}

/// Trains the forward problem, or the inverse problem when observations are
/// requested. Dispatches on the jet order the equation needs.
pub fn train(
    pde: &PdeSpec,
    model_spec: &ModelSpec,
    settings: &TrainSettings,
    inverse: Option<(&InverseSettings, &Field)>,
    sink: &mut TrainSink,
) -> Result<TrainResult, TrainError> {
    pde.validate()?;
    if settings.curriculum.enabled && pde.ic != IcKind::TanhFront {
        return Err(TrainError::CurriculumNeedsTanhIc);
    }
    if inverse.is_some() && !matches!(pde.kind, PdeKind::Cgle { .. }) {
        return Err(TrainError::InverseNeedsCgle);
    }
    match pde.kind.required_jet_order() {
        3 => train_impl::<5>(pde, model_spec, settings, inverse, sink),
        _ => train_impl::<4>(pde, model_spec, settings, inverse, sink),
    }
}

fn train_impl<const N: usize>(
    pde: &PdeSpec,
    model_spec: &ModelSpec,
    settings: &TrainSettings,
    inverse: Option<(&InverseSettings, &Field)>,
    sink: &mut TrainSink,
) -> Result<TrainResult, TrainError> {
    let streams = SeedStreams::new(settings.seed);
    let normalization = crate::model::Normalization::for_domain(pde.x_domain, pde.t_domain);
    let mut params = ModelParams::init(
        model_spec,
        normalization,
        inverse.map(|(inv, _)| (inv.b0, inv.c0)),
        &mut streams.stream("init"),
    );
    let k_init = params.k_matrix().to_vec();

    let observations = match inverse {
        Some((inv, field)) => {
            generate_observations(field, inv.n_obs, inv.noise, &mut streams.stream("noise"))
        }
        None => Vec::new(),
    };
    let weights = LossWeights {
        w_res: settings.w_res,
        w_icbc: settings.w_icbc,
        w_data: inverse.map(|(inv, _)| inv.w_data).unwrap_or(0.0),
    };

    let mut lhs_rng = streams.stream("lhs");
    let mut rar_rng = streams.stream("rar");
    let mut points = CollocationSet::sample(
        settings.n_res,
        settings.n_ic,
        settings.n_bc,
        pde.x_domain,
        pde.t_domain,
        &mut lhs_rng,
    );

    let trainable = params.trainable_range();
    let mut adam = AdamState::new(trainable.len());
    let mut grads = vec![0.0; params.len()];
    let mut log = Vec::new();
    let mut rar_added = Vec::new();
    let mut outcome = TrainOutcome::Completed;
    let started = Instant::now();
    let is_inverse = inverse.is_some();

    for epoch in 0..settings.epochs {
        if settings.resample_interval > 0 && epoch > 0 && epoch % settings.resample_interval == 0 {
            points.resample(
                settings.n_res,
                settings.n_ic,
                settings.n_bc,
                pde.x_domain,
                pde.t_domain,
                &mut lhs_rng,
            );
        }
        let rar = &settings.rar;
        if rar.enabled
            && rar.interval > 0
            && epoch > 0
            && epoch % rar.interval == 0
            && rar_added.len() < rar.cap
        {
            let add = rar.add.min(rar.cap - rar_added.len());
            let fresh = rar_refine::<N, _>(&params, pde, rar.pool, add, &mut rar_rng);
            rar_added.extend_from_slice(&fresh);
            points.residual.extend(
                fresh.into_iter().map(|(x, t)| CollocPoint { x, t, tag: PointTag::Rar }),
            );
        }

        let s = curriculum_scale(&settings.curriculum, epoch, settings.epochs);
        let out = loss_and_grad::<N>(
            &params,
            pde,
            &points,
            &observations,
            &weights,
            s,
            settings.grad_shards,
            &mut grads,
        );
        if let Some(reason) = out.nonfinite {
            outcome = TrainOutcome::Diverged { epoch, reason };
            break;
        }
        if grads[trainable.clone()].iter().any(|g| !g.is_finite()) {
            outcome = TrainOutcome::Diverged { epoch, reason: "non-finite gradient".to_string() };
            break;
        }

        let lr = lr_at(epoch, settings.epochs, settings.lr0, settings.lr1);
        let should_log = epoch % settings.log_stride.max(1) == 0 || epoch + 1 == settings.epochs;
        if should_log {
            let (b, c) = params.pde_params().map(|(b, c)| (Some(b), Some(c))).unwrap_or((None, None));
            let row = LogRow {
                epoch,
                l_total: out.loss.l_total,
                l_res: out.loss.l_res,
                l_ic: out.loss.l_ic,
                l_bc: out.loss.l_bc,
                lr,
                seconds: started.elapsed().as_secs_f64(),
                b,
                c,
            };
            sink.log_row(&row, is_inverse)?;
            log.push(row);
        }

        adam.step(&mut params.values[trainable.clone()], &grads[trainable.clone()], lr);

        if settings.checkpoint_stride > 0 && epoch > 0 && epoch % settings.checkpoint_stride == 0 {
            sink.checkpoint(&format!("ckpt_{epoch:07}.txt"), &params)?;
        }
    }

    sink.checkpoint("model.ckpt", &params)?;
    sink.flush()?;

    let laplace_ci = if is_inverse && matches!(outcome, TrainOutcome::Completed) {
        Some(laplace_std::<N>(&params, &points, weights.w_res))
    } else {
        None
    };

    Ok(TrainResult { params, outcome, log, k_init, observations, rar_added, laplace_ci })
}

/// Observations are exact grid samples of the reference field plus complex
/// Gaussian noise with std = `noise_level` × rms|A|.
fn generate_observations<R: Rng>(
    field: &Field,
    n: usize,
    noise_level: f64,
    rng: &mut R,
) -> Vec<Observation> {
    let rms = (field.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / field.values.len() as f64).sqrt();
    let sigma = noise_level * rms;
    (0..n)
        .map(|_| {
            let ix = rng.gen_range(0..field.nx);
            let it = rng.gen_range(0..field.nt);
            let clean = field.values[it * field.nx + ix];
            let nre: f64 = StandardNormal.sample(rng);
            let nim: f64 = StandardNormal.sample(rng);
            Observation {
                x: field.x_at(ix),
                t: field.t_at(it),
                value: clean + num_complex::Complex64::new(sigma * nre, sigma * nim),
            }
        })
        .collect()
}

/// Laplace std for (b, c): inverse square root of the Gauss-Newton diagonal
/// of the residual loss. The residual depends on b through ±v_xx/∓u_xx and
/// on c through the cubic term, so the per-point Jacobian is closed-form.
fn laplace_std<const N: usize>(
    params: &ModelParams,
    points: &CollocationSet,
    w_res: f64,
) -> (f64, f64) {
    let mut scratch: JetScratch<N> = JetScratch::default();
    let mut hbb = 0.0;
    let mut hcc = 0.0;
    for p in &points.residual {
        let (u, v) = params.forward_jets(&mut scratch, p.x, p.t);
        let mag = u.val() * u.val() + v.val() * v.val();
        let dfre_db = v.dxx();
        let dfim_db = -u.dxx();
        let dfre_dc = -mag * v.val();
        let dfim_dc = mag * u.val();
        hbb += dfre_db * dfre_db + dfim_db * dfim_db;
        hcc += dfre_dc * dfre_dc + dfim_dc * dfim_dc;
    }
    let n = points.residual.len().max(1) as f64;
    let scale = 2.0 * w_res / n;
    ((scale * hbb).max(1e-300).sqrt().recip(), (scale * hcc).max(1e-300).sqrt().recip())
}
