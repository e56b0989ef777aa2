//! Collocation point sampling: Latin hypercube draws over the space-time
//! rectangle plus stratified 1-D draws for the initial and boundary sets.

use rand::seq::SliceRandom;
use rand::Rng;

/// Provenance of a residual collocation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointTag {
    Lhs,
    Rar,
}

#[derive(Clone, Copy, Debug)]
pub struct CollocPoint {
    pub x: f64,
    pub t: f64,
    pub tag: PointTag,
}

/// Which spatial edge a boundary point sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub t: f64,
    pub side: Side,
}

/// Latin hypercube sample over a rectangle: one point per stratum in each
/// dimension, so every axis-aligned 1/n slab holds exactly one sample.
pub fn lhs_sample<R: Rng>(n: usize, x: (f64, f64), t: (f64, f64), rng: &mut R) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let xs = lhs_sample_1d(n, x, rng);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let ts = lhs_sample_1d(n, t, rng);
    (0..n).map(|i| (xs[i], ts[order[i]])).collect()
}

/// Stratified 1-D sample: one uniform draw per stratum, in stratum order.
pub fn lhs_sample_1d<R: Rng>(n: usize, range: (f64, f64), rng: &mut R) -> Vec<f64> {
    assert!(n >= 1);
    let span = range.1 - range.0;
    (0..n)
        .map(|i| range.0 + span * ((i as f64 + rng.gen_range(0.0..1.0)) / n as f64))
        .collect()
}

/// The full training point set with per-point provenance.
#[derive(Clone, Debug)]
pub struct CollocationSet {
    pub residual: Vec<CollocPoint>,
    pub ic_x: Vec<f64>,
    pub boundary: Vec<BoundaryPoint>,
}

impl CollocationSet {
    pub fn sample<R: Rng>(
        n_res: usize,
        n_ic: usize,
        n_bc: usize,
        x: (f64, f64),
        t: (f64, f64),
        rng: &mut R,
    ) -> Self {
        let mut set = CollocationSet { residual: Vec::new(), ic_x: Vec::new(), boundary: Vec::new() };
        set.resample(n_res, n_ic, n_bc, x, t, rng);
        set
    }

    /// Redraws every LHS-tagged point; refinement-added residual points stay.
    pub fn resample<R: Rng>(
        &mut self,
        n_res: usize,
        n_ic: usize,
        n_bc: usize,
        x: (f64, f64),
        t: (f64, f64),
        rng: &mut R,
    ) {
        self.residual.retain(|p| p.tag == PointTag::Rar);
        let fresh = lhs_sample(n_res, x, t, rng);
        self.residual.splice(
            0..0,
            fresh.into_iter().map(|(px, pt)| CollocPoint { x: px, t: pt, tag: PointTag::Lhs }),
        );

        self.ic_x = lhs_sample_1d(n_ic, x, rng);

        let n_left = n_bc / 2;
        let t_left = lhs_sample_1d(n_left.max(1), t, rng);
        let t_right = lhs_sample_1d((n_bc - n_left).max(1), t, rng);
        self.boundary.clear();
        self.boundary.extend(t_left.into_iter().take(n_left).map(|tv| BoundaryPoint { t: tv, side: Side::Left }));
        self.boundary.extend(t_right.into_iter().take(n_bc - n_left).map(|tv| BoundaryPoint { t: tv, side: Side::Right }));
    }

    pub fn rar_count(&self) -> usize {
        self.residual.iter().filter(|p| p.tag == PointTag::Rar).count()
    }
}
