//! Residual-based adaptive refinement: periodically draw a fresh candidate
//! pool, score it by |f|², and append the worst offenders to the residual
//! collocation set.

use rand::Rng;
use rayon::prelude::*;

use super::sampler::lhs_sample;
use crate::model::{JetScratch, ModelParams};
use crate::pde::{residual_values, PdeSpec};

/// Scores `pool` fresh LHS candidates and returns the `add` points with the
/// largest squared residual magnitude. Ties break on candidate index so the
/// selection is deterministic.
pub fn rar_refine<const N: usize, R: Rng>(
    params: &ModelParams,
    pde: &PdeSpec,
    pool: usize,
    add: usize,
    rng: &mut R,
) -> Vec<(f64, f64)> {
    if add == 0 || pool == 0 {
        return Vec::new();
    }
    let candidates = lhs_sample(pool, pde.x_domain, pde.t_domain, rng);
    let kind = effective_kind(params, pde);

    let chunk = candidates.len().div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
    let mut scored: Vec<(f64, usize)> = candidates
        .par_chunks(chunk)
        .enumerate()
        .flat_map_iter(|(ci, pts)| {
            let mut scratch: JetScratch<N> = JetScratch::default();
            let base = ci * chunk;
            pts.iter()
                .enumerate()
                .map(|(i, &(x, t))| {
                    let (u, v) = params.forward_jets(&mut scratch, x, t);
                    let (fr, fi) = residual_values(&kind, &u, &v);
                    (fr * fr + fi * fi, base + i)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(add);
    scored.into_iter().map(|(_, i)| candidates[i]).collect()
}

/// In inverse mode the governing parameters live in the parameter vector;
/// scoring must use the current estimates, not the configured constants.
pub(super) fn effective_kind(params: &ModelParams, pde: &PdeSpec) -> crate::pde::PdeKind {
    match (pde.kind, params.pde_params()) {
        (crate::pde::PdeKind::Cgle { .. }, Some((b, c))) => crate::pde::PdeKind::Cgle { b, c },
        (kind, _) => kind,
    }
}
