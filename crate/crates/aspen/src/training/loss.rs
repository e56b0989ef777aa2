//! Composite loss assembly with gradients.
//!
//! The loss is a weighted sum of mean-squared terms over the collocation
//! sets (residual, initial, boundary, and optionally observation data).
//! Each point contributes an independent scalar, so the computation streams
//! one small tape per point and sums gradients; points are split into a
//! fixed number of shards processed in parallel, and shard partials are
//! reduced in shard-index order so results are bit-reproducible regardless
//! of thread scheduling.

use num_complex::Complex64;
use rayon::prelude::*;

use super::sampler::{BoundaryPoint, CollocationSet, Side};
use crate::autodiff::{NodeId, Tape};
use crate::model::ModelParams;
use crate::pde::{BcKind, PdeSpec};

/// Weighted loss components; `total = w_res·res + w_icbc·(ic + bc) (+ w_data·data)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossBreakdown {
    pub l_res: f64,
    pub l_ic: f64,
    pub l_bc: f64,
    pub l_data: f64,
    pub l_total: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LossWeights {
    pub w_res: f64,
    pub w_icbc: f64,
    pub w_data: f64,
}

/// An observed field sample for the inverse problem.
#[derive(Clone, Copy, Debug)]
pub struct Observation {
    pub x: f64,
    pub t: f64,
    pub value: Complex64,
}

enum WorkItem {
    Residual { x: f64, t: f64 },
    Target { x: f64, t: f64, value: Complex64, group: Group },
    PeriodicPair { t: f64 },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Group {
    Ic,
    Bc,
    Data,
}

struct ShardOut {
    grads: Vec<f64>,
    sum_res: f64,
    sum_ic: f64,
    sum_bc: f64,
    sum_data: f64,
    nonfinite: Option<String>,
}

pub struct EpochOutput {
    pub loss: LossBreakdown,
    /// Description of the first non-finite value, if the pass diverged.
    pub nonfinite: Option<String>,
}

/// Computes the loss and accumulates dL/dθ into `grads` (zeroed here).
#[allow(clippy::too_many_arguments)]
pub fn loss_and_grad<const N: usize>(
    params: &ModelParams,
    pde: &PdeSpec,
    points: &CollocationSet,
    observations: &[Observation],
    weights: &LossWeights,
    curriculum_s: f64,
    shards: usize,
    grads: &mut [f64],
) -> EpochOutput {
    grads.iter_mut().for_each(|g| *g = 0.0);

    let work = build_work_items(pde, points, observations, curriculum_s);
    let n_res = points.residual.len().max(1) as f64;
    let n_ic = points.ic_x.len().max(1) as f64;
    let n_bc = points.boundary.len().max(1) as f64;
    let n_data = observations.len().max(1) as f64;

    let seed_res = weights.w_res / n_res;
    let seed_ic = weights.w_icbc / n_ic;
    let seed_bc = weights.w_icbc / n_bc;
    let seed_data = weights.w_data / n_data;

    let shards = shards.max(1).min(work.len().max(1));
    let chunk = work.len().div_ceil(shards);
    let outs: Vec<ShardOut> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let lo = s * chunk;
            let hi = ((s + 1) * chunk).min(work.len());
            run_shard::<N>(params, pde, &work[lo..hi], seed_res, seed_ic, seed_bc, seed_data, grads.len())
        })
        .collect();

    let mut loss = LossBreakdown::default();
    let mut nonfinite = None;
    for out in outs {
        for (g, s) in grads.iter_mut().zip(out.grads.iter()) {
            *g += s;
        }
        loss.l_res += out.sum_res;
        loss.l_ic += out.sum_ic;
        loss.l_bc += out.sum_bc;
        loss.l_data += out.sum_data;
        if nonfinite.is_none() {
            nonfinite = out.nonfinite;
        }
    }
    loss.l_res /= n_res;
    loss.l_ic /= n_ic;
    loss.l_bc /= n_bc;
    loss.l_data /= n_data;
    loss.l_total = weights.w_res * loss.l_res
        + weights.w_icbc * (loss.l_ic + loss.l_bc)
        + weights.w_data * loss.l_data;
    if nonfinite.is_none() && !loss.l_total.is_finite() {
        nonfinite = Some("non-finite total loss".to_string());
    }
    EpochOutput { loss, nonfinite }
}

/// Loss without gradients (evaluation paths); same shard structure.
pub fn loss_only<const N: usize>(
    params: &ModelParams,
    pde: &PdeSpec,
    points: &CollocationSet,
    observations: &[Observation],
    weights: &LossWeights,
    curriculum_s: f64,
    shards: usize,
) -> LossBreakdown {
    let mut grads = vec![0.0; params.len()];
    loss_and_grad::<N>(params, pde, points, observations, weights, curriculum_s, shards, &mut grads).loss
}

fn build_work_items(
    pde: &PdeSpec,
    points: &CollocationSet,
    observations: &[Observation],
    curriculum_s: f64,
) -> Vec<WorkItem> {
    let mut work = Vec::with_capacity(points.residual.len() + points.ic_x.len() + points.boundary.len() + observations.len());
    let t0 = pde.t_domain.0;
    for p in &points.residual {
        work.push(WorkItem::Residual { x: p.x, t: p.t });
    }
    for &x in &points.ic_x {
        work.push(WorkItem::Target { x, t: t0, value: pde.ic.value(x, curriculum_s), group: Group::Ic });
    }
    for bp in &points.boundary {
        work.push(boundary_item(pde, bp));
    }
    for obs in observations {
        work.push(WorkItem::Target { x: obs.x, t: obs.t, value: obs.value, group: Group::Data });
    }
    work
}

fn boundary_item(pde: &PdeSpec, bp: &BoundaryPoint) -> WorkItem {
    match pde.bc {
        BcKind::Dirichlet { left, right } => {
            let (x, value) = match bp.side {
                Side::Left => (pde.x_domain.0, left),
                Side::Right => (pde.x_domain.1, right),
            };
            WorkItem::Target { x, t: bp.t, value, group: Group::Bc }
        }
        BcKind::Periodic => WorkItem::PeriodicPair { t: bp.t },
    }
}

#[allow(clippy::too_many_arguments)]
fn run_shard<const N: usize>(
    params: &ModelParams,
    pde: &PdeSpec,
    work: &[WorkItem],
    seed_res: f64,
    seed_ic: f64,
    seed_bc: f64,
    seed_data: f64,
    n_params: usize,
) -> ShardOut {
    let mut out = ShardOut {
        grads: vec![0.0; n_params],
        sum_res: 0.0,
        sum_ic: 0.0,
        sum_bc: 0.0,
        sum_data: 0.0,
        nonfinite: None,
    };
    let mut tape: Tape<N> = Tape::new();
    let is_complex = pde.kind.is_complex();

    for item in work {
        tape.reset();
        let (loss_node, seed): (NodeId, f64) = match *item {
            WorkItem::Residual { x, t } => {
                let (u, v) = params.forward_on_tape(&mut tape, x, t);
                let bc_nodes = params
                    .pde_param_offset()
                    .map(|off| {
                        let b = tape.param(&params.values, off as u32);
                        let c = tape.param(&params.values, off as u32 + 1);
                        (b, c)
                    });
                let res = crate::pde::residual_on_tape(&mut tape, &pde.kind, u, v, bc_nodes);
                let f2 = res.magnitude_squared(&mut tape);
                out.sum_res += tape.value(f2);
                (f2, seed_res)
            }
            WorkItem::Target { x, t, value, group } => {
                let (u, v) = params.forward_on_tape(&mut tape, x, t);
                let tr = tape.constant(value.re);
                let du = tape.sub(u, tr);
                let mut sq = tape.square(du);
                if is_complex || value.im != 0.0 {
                    let ti = tape.constant(value.im);
                    let dv = tape.sub(v, ti);
                    let sv = tape.square(dv);
                    sq = tape.add(sq, sv);
                }
                let val = tape.value(sq);
                let seed = match group {
                    Group::Ic => {
                        out.sum_ic += val;
                        seed_ic
                    }
                    Group::Bc => {
                        out.sum_bc += val;
                        seed_bc
                    }
                    Group::Data => {
                        out.sum_data += val;
                        seed_data
                    }
                };
                (sq, seed)
            }
            WorkItem::PeriodicPair { t } => {
                let (ul, vl) = params.forward_on_tape(&mut tape, pde.x_domain.0, t);
                let (ur, vr) = params.forward_on_tape(&mut tape, pde.x_domain.1, t);
                let du = tape.sub(ul, ur);
                let mut sq = tape.square(du);
                if is_complex {
                    let dv = tape.sub(vl, vr);
                    let sv = tape.square(dv);
                    sq = tape.add(sq, sv);
                }
                out.sum_bc += tape.value(sq);
                (sq, seed_bc)
            }
        };

        if let Some(nf) = tape.nonfinite() {
            if out.nonfinite.is_none() {
                out.nonfinite = Some(format!("non-finite value in {} node during forward pass", nf.kind));
            }
            continue;
        }
        tape.backward(loss_node, seed, &params.values, &mut out.grads)
            .expect("fresh tape per point");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelMode, ModelSpec, Normalization};
    use crate::rng::SeedStreams;

    fn tiny_model(mode: ModelMode, pde: &PdeSpec, seed: u64) -> ModelParams {
        let spec = ModelSpec { mode, m: 4, sigma: 1.0, hidden_layers: 2, width: 6 };
        ModelParams::init(
            &spec,
            Normalization::for_domain(pde.x_domain, pde.t_domain),
            None,
            &mut SeedStreams::new(seed).stream("init"),
        )
    }

    #[test]
    fn zero_network_loss_structure() {
        // A zero network is an exact CGLE solution, so the residual loss
        // vanishes while the IC loss equals the mean squared front.
        let pde = PdeSpec::cgle_front();
        let mut params = tiny_model(ModelMode::Aspen, &pde, 3);
        for v in params.values[2 * 4..].iter_mut() {
            *v = 0.0;
        }
        let mut rng = SeedStreams::new(1).stream("lhs");
        let pts = CollocationSet::sample(64, 200, 16, pde.x_domain, pde.t_domain, &mut rng);
        let weights = LossWeights { w_res: 1.0, w_icbc: 100.0, w_data: 0.0 };
        let bd = loss_only::<4>(&params, &pde, &pts, &[], &weights, 1.0, 4);
        assert!(bd.l_res.abs() < 1e-28);
        let expect_ic: f64 =
            pts.ic_x.iter().map(|&x| (-x).tanh().powi(2)).sum::<f64>() / pts.ic_x.len() as f64;
        assert!((bd.l_ic - expect_ic).abs() < 1e-12);
        assert!(bd.l_ic > 0.5);
        // Total composes exactly with the configured weights.
        assert!((bd.l_total - (bd.l_res + 100.0 * (bd.l_ic + bd.l_bc))).abs() < 1e-12);
    }

    #[test]
    fn shard_count_does_not_change_results() {
        let pde = PdeSpec::cgle_front();
        let params = tiny_model(ModelMode::Aspen, &pde, 5);
        let mut rng = SeedStreams::new(2).stream("lhs");
        let pts = CollocationSet::sample(33, 7, 5, pde.x_domain, pde.t_domain, &mut rng);
        let weights = LossWeights { w_res: 1.0, w_icbc: 100.0, w_data: 0.0 };
        let mut g1 = vec![0.0; params.len()];
        let mut g2 = vec![0.0; params.len()];
        let r1 = loss_and_grad::<4>(&params, &pde, &pts, &[], &weights, 1.0, 1, &mut g1);
        let r2 = loss_and_grad::<4>(&params, &pde, &pts, &[], &weights, 1.0, 7, &mut g2);
        // Shard totals differ only by summation grouping; the per-shard sums
        // are identical sequences, so components match to rounding and the
        // same shard count is bit-identical (checked in the training tests).
        assert!((r1.loss.l_total - r2.loss.l_total).abs() < 1e-9 * r1.loss.l_total.abs().max(1.0));
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn data_term_decouples_when_weight_is_zero() {
        // With w_data = 0 the appended (b, c) trainables receive no gradient
        // from observations.
        let pde = PdeSpec::cgle_front();
        let spec = ModelSpec { mode: ModelMode::Aspen, m: 4, sigma: 1.0, hidden_layers: 2, width: 6 };
        let params = ModelParams::init(
            &spec,
            Normalization::for_domain(pde.x_domain, pde.t_domain),
            Some((0.1, -0.5)),
            &mut SeedStreams::new(4).stream("init"),
        );
        let mut rng = SeedStreams::new(5).stream("lhs");
        let mut pts = CollocationSet::sample(8, 4, 4, pde.x_domain, pde.t_domain, &mut rng);
        pts.residual.clear(); // only data terms remain active for (b, c)
        let obs = vec![Observation { x: 1.0, t: 2.0, value: Complex64::new(0.3, -0.1) }];
        let weights = LossWeights { w_res: 1.0, w_icbc: 100.0, w_data: 0.0 };
        let mut grads = vec![0.0; params.len()];
        loss_and_grad::<4>(&params, &pde, &pts, &obs, &weights, 1.0, 2, &mut grads);
        let off = params.pde_param_offset().unwrap();
        assert_eq!(grads[off], 0.0);
        assert_eq!(grads[off + 1], 0.0);
    }
}
