//! Reverse-mode differentiation over jet-valued nodes.
//!
//! The tape records operations during the forward pass (recording *is* the
//! forward pass) and replays them in reverse to accumulate parameter
//! gradients of a scalar loss. Every node carries a full coordinate jet, so
//! losses built from jet slots (u_t, u_xx, ...) differentiate correctly with
//! respect to all parameters.

use super::jet::{tanh_deriv4, tanh_derivs, Jet};

/// Index of a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub u32);

/// Derivative slot selected by an extract operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Dx,
    Dxx,
    Dxxx,
    Dt,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    /// Jet fixed at record time: coordinates, constants, injected jets.
    Leaf,
    /// Trainable scalar; gradient lands at `idx` in the gradient buffer.
    Param { idx: u32 },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, k: f64 },
    Tanh { a: NodeId },
    /// `cos` caches cos of the argument for the reverse sweep.
    Sin { a: NodeId, cos: f64 },
    Cos { a: NodeId, sin: f64 },
    Square { a: NodeId },
    /// Fused affine map: `Σ_i params[w + i] · node(inputs + i) (+ params[bias])`.
    /// Inputs are a contiguous node range; `bias == u32::MAX` means none.
    Linear { inputs: u32, n: u32, w: u32, bias: u32 },
    /// Reads one derivative slot of `a` as a new scalar value. The result
    /// carries no derivative slots of its own (they are structurally zero).
    Extract { a: NodeId, slot: Slot },
}

const NO_BIAS: u32 = u32::MAX;

/// Where a non-finite value first appeared during recording.
#[derive(Clone, Copy, Debug)]
pub struct NonFinite {
    pub node: NodeId,
    pub kind: &'static str,
}

#[derive(Debug, thiserror::Error)]
pub enum TapeError {
    #[error("backward already ran on this tape; reset before reusing it")]
    BackwardConsumed,
    #[error("non-finite value produced at node {} ({kind})", node.0)]
    NonFinite { node: NodeId, kind: &'static str },
}

/// Append-only operation tape with one jet per node and a one-jet-per-node
/// adjoint buffer for the reverse sweep.
pub struct Tape<const N: usize> {
    ops: Vec<Op>,
    jets: Vec<Jet<N>>,
    adjoints: Vec<Jet<N>>,
    backward_done: bool,
    nonfinite: Option<NonFinite>,
}

impl<const N: usize> Default for Tape<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const N: usize> Tape<N> {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            jets: Vec::new(),
            adjoints: Vec::new(),
            backward_done: false,
            nonfinite: None,
        }
    }

    /// Drops all nodes but keeps buffer capacity; the tape is rebuilt per batch.
    pub fn reset(&mut self) {
        self.ops.clear();
        self.jets.clear();
        self.adjoints.clear();
        self.backward_done = false;
        self.nonfinite = None;
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    #[inline]
    pub fn jet(&self, id: NodeId) -> Jet<N> {
        self.jets[id.0 as usize]
    }

    #[inline]
    pub fn value(&self, id: NodeId) -> f64 {
        self.jets[id.0 as usize].val()
    }

    /// First non-finite value recorded since the last reset, if any.
    pub fn nonfinite(&self) -> Option<NonFinite> {
        self.nonfinite
    }

    #[inline]
    fn push(&mut self, op: Op, jet: Jet<N>) -> NodeId {
        let id = NodeId(self.ops.len() as u32);
        if self.nonfinite.is_none() && !jet.all_finite() {
            self.nonfinite = Some(NonFinite {
                node: id,
                kind: op_kind(&op),
            });
        }
        self.ops.push(op);
        self.jets.push(jet);
        id
    }

    /// Injects an arbitrary jet as a leaf (coordinate seeds, analytic jets).
    pub fn leaf(&mut self, jet: Jet<N>) -> NodeId {
        self.push(Op::Leaf, jet)
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Op::Leaf, Jet::constant(v))
    }

    /// Seed node for the x coordinate: jet `(x, 1, 0, .., 0)`.
    pub fn coord_x(&mut self, x: f64) -> NodeId {
        self.push(Op::Leaf, Jet::seed_x(x))
    }

    /// Seed node for the t coordinate: jet `(t, 0, .., 0, 1)`.
    pub fn coord_t(&mut self, t: f64) -> NodeId {
        self.push(Op::Leaf, Jet::seed_t(t))
    }

    /// Trainable scalar read from the parameter vector.
    pub fn param(&mut self, params: &[f64], idx: u32) -> NodeId {
        self.push(Op::Param { idx }, Jet::constant(params[idx as usize]))
    }

    #[inline]
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let jet = self.jet(a).add(self.jet(b));
        self.push(Op::Add { a, b }, jet)
    }

    #[inline]
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let jet = self.jet(a).sub(self.jet(b));
        self.push(Op::Sub { a, b }, jet)
    }

    #[inline]
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let jet = self.jet(a).mul(self.jet(b));
        self.push(Op::Mul { a, b }, jet)
    }

    #[inline]
    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let jet = self.jet(a).scale(k);
        self.push(Op::Scale { a, k }, jet)
    }

    #[inline]
    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let jet = self.jet(a).tanh();
        self.push(Op::Tanh { a }, jet)
    }

    #[inline]
    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let (s, c) = x.sin_cos();
        let jet = self.jet(a).compose(s, [c, -s, -c]);
        self.push(Op::Sin { a, cos: c }, jet)
    }

    #[inline]
    pub fn cos(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let (s, c) = x.sin_cos();
        let jet = self.jet(a).compose(c, [-s, -c, s]);
        self.push(Op::Cos { a, sin: s }, jet)
    }

    #[inline]
    pub fn square(&mut self, a: NodeId) -> NodeId {
        let jet = self.jet(a).square();
        self.push(Op::Square { a }, jet)
    }

    /// Fused affine combination of a contiguous node range:
    /// `out = Σ_i params[weights + i] · node(inputs + i) (+ params[bias])`.
    ///
    /// Parameter jets have no coordinate dependence, so each term scales
    /// every slot of the input jet uniformly.
    pub fn linear(
        &mut self,
        params: &[f64],
        inputs: NodeId,
        n: usize,
        weights: usize,
        bias: Option<usize>,
    ) -> NodeId {
        let mut acc = [0.0; N];
        if let Some(b) = bias {
            acc[0] = params[b];
        }
        let w = &params[weights..weights + n];
        let start = inputs.0 as usize;
        for (wi, jet) in w.iter().zip(self.jets[start..start + n].iter()) {
            for (a, j) in acc.iter_mut().zip(jet.0.iter()) {
                *a += wi * j;
            }
        }
        self.push(
            Op::Linear {
                inputs: inputs.0,
                n: n as u32,
                w: weights as u32,
                bias: bias.map(|b| b as u32).unwrap_or(NO_BIAS),
            },
            Jet(acc),
        )
    }

    /// Reads a derivative slot of `a` into a fresh scalar node. Only the value
    /// slot of the result is meaningful; its own derivative slots are zero by
    /// construction, and the reverse sweep routes the value adjoint back into
    /// the selected slot of `a`.
    pub fn extract(&mut self, a: NodeId, slot: Slot) -> NodeId {
        let src = self.jet(a);
        let v = match slot {
            Slot::Dx => src.dx(),
            Slot::Dxx => src.dxx(),
            Slot::Dxxx => {
                debug_assert!(N >= 5, "third-order slot requires an order-3 jet");
                src.dxxx()
            }
            Slot::Dt => src.dt(),
        };
        self.push(Op::Extract { a, slot }, Jet::constant(v))
    }

    /// Reverse sweep from `loss`, seeding its value adjoint with `seed`.
    /// Parameter gradients accumulate into `grads` (not zeroed here: one
    /// buffer typically collects contributions from many tapes). Visits
    /// nodes in strict reverse insertion order, which is a valid reverse
    /// topological order because operands always precede their results.
    pub fn backward(
        &mut self,
        loss: NodeId,
        seed: f64,
        params: &[f64],
        grads: &mut [f64],
    ) -> Result<(), TapeError> {
        if self.backward_done {
            return Err(TapeError::BackwardConsumed);
        }
        self.backward_done = true;

        self.adjoints.clear();
        self.adjoints.resize(self.ops.len(), Jet::ZERO);
        {
            let mut s = Jet::ZERO;
            s.0[0] = seed;
            self.adjoints[loss.0 as usize] = s;
        }

        for i in (0..self.ops.len()).rev() {
            let w = self.adjoints[i];
            // Skip untouched nodes; adjoints are exactly zero until reached.
            if w.0.iter().all(|&x| x == 0.0) {
                continue;
            }
            match self.ops[i] {
                Op::Leaf => {}
                Op::Param { idx } => {
                    grads[idx as usize] += w.0[0];
                }
                Op::Add { a, b } => {
                    add_assign(&mut self.adjoints[a.0 as usize], &w);
                    add_assign(&mut self.adjoints[b.0 as usize], &w);
                }
                Op::Sub { a, b } => {
                    add_assign(&mut self.adjoints[a.0 as usize], &w);
                    sub_assign(&mut self.adjoints[b.0 as usize], &w);
                }
                Op::Mul { a, b } => {
                    let ja = self.jets[a.0 as usize];
                    let jb = self.jets[b.0 as usize];
                    let into_a = mul_adjoint(&jb, &w);
                    let into_b = mul_adjoint(&ja, &w);
                    add_assign(&mut self.adjoints[a.0 as usize], &into_a);
                    add_assign(&mut self.adjoints[b.0 as usize], &into_b);
                }
                Op::Scale { a, k } => {
                    let scaled = w.scale(k);
                    add_assign(&mut self.adjoints[a.0 as usize], &scaled);
                }
                Op::Tanh { a } => {
                    let u = self.jets[i].val();
                    let [g1, g2, g3] = tanh_derivs(u);
                    let contrib = unary_adjoint(&self.jets[a.0 as usize], &w, [g1, g2, g3, tanh_deriv4(u)]);
                    add_assign(&mut self.adjoints[a.0 as usize], &contrib);
                }
                Op::Sin { a, cos } => {
                    let s = self.jets[i].val();
                    let contrib = unary_adjoint(&self.jets[a.0 as usize], &w, [cos, -s, -cos, s]);
                    add_assign(&mut self.adjoints[a.0 as usize], &contrib);
                }
                Op::Cos { a, sin } => {
                    let c = self.jets[i].val();
                    let contrib = unary_adjoint(&self.jets[a.0 as usize], &w, [-sin, -c, sin, c]);
                    add_assign(&mut self.adjoints[a.0 as usize], &contrib);
                }
                Op::Square { a } => {
                    let ja = self.jets[a.0 as usize];
                    let contrib = mul_adjoint(&ja, &w).scale(2.0);
                    add_assign(&mut self.adjoints[a.0 as usize], &contrib);
                }
                Op::Linear { inputs, n, w: w0, bias } => {
                    if bias != NO_BIAS {
                        grads[bias as usize] += w.0[0];
                    }
                    let start = inputs as usize;
                    let (jets, adj) = (&self.jets, &mut self.adjoints);
                    for k in 0..n as usize {
                        let jin = jets[start + k];
                        let wk = params[w0 as usize + k];
                        let mut g = 0.0;
                        let dst = &mut adj[start + k];
                        for s in 0..N {
                            g += w.0[s] * jin.0[s];
                            dst.0[s] += wk * w.0[s];
                        }
                        grads[w0 as usize + k] += g;
                    }
                }
                Op::Extract { a, slot } => {
                    // Only the value adjoint is real; the result's own slots
                    // are constants and their adjoints must not propagate.
                    let dst = &mut self.adjoints[a.0 as usize];
                    match slot {
                        Slot::Dx => dst.0[1] += w.0[0],
                        Slot::Dxx => dst.0[2] += w.0[0],
                        Slot::Dxxx => dst.0[3] += w.0[0],
                        Slot::Dt => dst.0[N - 1] += w.0[0],
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn add_assign<const N: usize>(dst: &mut Jet<N>, src: &Jet<N>) {
    for (d, s) in dst.0.iter_mut().zip(src.0.iter()) {
        *d += s;
    }
}

#[inline]
fn sub_assign<const N: usize>(dst: &mut Jet<N>, src: &Jet<N>) {
    for (d, s) in dst.0.iter_mut().zip(src.0.iter()) {
        *d -= s;
    }
}

/// Adjoint into one factor of a jet product given the other factor `b`:
/// the transpose of the Leibniz rule's dependence on that factor.
#[inline]
fn mul_adjoint<const N: usize>(b: &Jet<N>, w: &Jet<N>) -> Jet<N> {
    let bv = &b.0;
    let wv = &w.0;
    let mut r = [0.0; N];
    r[0] = bv[0] * wv[0] + bv[1] * wv[1] + bv[2] * wv[2] + bv[N - 1] * wv[N - 1];
    r[1] = bv[0] * wv[1] + 2.0 * bv[1] * wv[2];
    r[2] = bv[0] * wv[2];
    if N >= 5 {
        r[0] += bv[3] * wv[3];
        r[1] += 3.0 * bv[2] * wv[3];
        r[2] += 3.0 * bv[1] * wv[3];
        r[3] = bv[0] * wv[3];
    }
    r[N - 1] += bv[0] * wv[N - 1];
    Jet(r)
}

/// Adjoint into the input of a unary composition with scalar derivatives
/// `g = [g', g'', g''', g'''']` at the input value; `a` is the input jet.
#[inline]
fn unary_adjoint<const N: usize>(a: &Jet<N>, w: &Jet<N>, g: [f64; 4]) -> Jet<N> {
    let av = &a.0;
    let wv = &w.0;
    let [g1, g2, g3, g4] = g;
    let mut r = [0.0; N];
    r[0] = g1 * wv[0]
        + g2 * av[1] * wv[1]
        + (g3 * av[1] * av[1] + g2 * av[2]) * wv[2]
        + g2 * av[N - 1] * wv[N - 1];
    r[1] = g1 * wv[1] + 2.0 * g2 * av[1] * wv[2];
    r[2] = g1 * wv[2];
    if N >= 5 {
        r[0] += (g4 * av[1] * av[1] * av[1] + 3.0 * g3 * av[1] * av[2] + g2 * av[3]) * wv[3];
        r[1] += (3.0 * g3 * av[1] * av[1] + 3.0 * g2 * av[2]) * wv[3];
        r[2] += 3.0 * g2 * av[1] * wv[3];
        r[3] = g1 * wv[3];
    }
    r[N - 1] += g1 * wv[N - 1];
    Jet(r)
}

fn op_kind(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Param { .. } => "param",
        Op::Add { .. } => "add",
        Op::Sub { .. } => "sub",
        Op::Mul { .. } => "mul",
        Op::Scale { .. } => "scale",
        Op::Tanh { .. } => "tanh",
        Op::Sin { .. } => "sin",
        Op::Cos { .. } => "cos",
        Op::Square { .. } => "square",
        Op::Linear { .. } => "linear",
        Op::Extract { .. } => "extract",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_of_param_gradient() {
        // L = p² at p = 3 → dL/dp = 6.
        let params = [3.0];
        let mut grads = [0.0];
        let mut tape: Tape<4> = Tape::new();
        let p = tape.param(&params, 0);
        let loss = tape.square(p);
        tape.backward(loss, 1.0, &params, &mut grads).unwrap();
        assert!((grads[0] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn backward_twice_rejected() {
        let params = [1.0];
        let mut grads = [0.0];
        let mut tape: Tape<4> = Tape::new();
        let p = tape.param(&params, 0);
        let loss = tape.square(p);
        tape.backward(loss, 1.0, &params, &mut grads).unwrap();
        let err = tape.backward(loss, 1.0, &params, &mut grads);
        assert!(matches!(err, Err(TapeError::BackwardConsumed)));
        // After a reset the tape is usable again.
        tape.reset();
        let p = tape.param(&params, 0);
        let loss = tape.square(p);
        tape.backward(loss, 1.0, &params, &mut grads).unwrap();
    }

    #[test]
    fn backward_is_linear_in_the_loss() {
        // grad(a·L1 + b·L2) = a·grad(L1) + b·grad(L2), exactly.
        let params = [0.43, -1.7];
        let (a, b) = (0.6, -2.5);

        let build = |tape: &mut Tape<5>, params: &[f64]| -> (NodeId, NodeId) {
            let p0 = tape.param(params, 0);
            let p1 = tape.param(params, 1);
            let x = tape.coord_x(0.3);
            let px = tape.mul(p0, x);
            let s = tape.tanh(px);
            let l1 = tape.square(s);
            let q = tape.mul(p1, s);
            let l2 = tape.square(q);
            (l1, l2)
        };

        let mut g1 = [0.0; 2];
        let mut tape: Tape<5> = Tape::new();
        let (l1, _) = build(&mut tape, &params);
        tape.backward(l1, a, &params, &mut g1).unwrap();

        let mut g2 = [0.0; 2];
        tape.reset();
        let (_, l2) = build(&mut tape, &params);
        tape.backward(l2, b, &params, &mut g2).unwrap();

        let mut g12 = [0.0; 2];
        tape.reset();
        let (l1, l2) = build(&mut tape, &params);
        let sa = tape.scale(l1, a);
        let sb = tape.scale(l2, b);
        let combined = tape.add(sa, sb);
        tape.backward(combined, 1.0, &params, &mut g12).unwrap();

        for i in 0..2 {
            assert!((g12[i] - (g1[i] + g2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn nonfinite_values_are_flagged() {
        let mut tape: Tape<4> = Tape::new();
        let big = tape.constant(1e308);
        let sq = tape.mul(big, big);
        assert!(tape.nonfinite().is_some());
        assert_eq!(tape.nonfinite().unwrap().node, sq);
    }

    #[test]
    fn linear_matches_explicit_ops() {
        let params = [0.7, -0.3, 0.11, 2.0, -1.0];
        let mut tape: Tape<5> = Tape::new();
        let x = tape.coord_x(0.4);
        let t = tape.coord_t(0.9);
        let xs = tape.sin(x);
        let ts = tape.tanh(t);
        let fused = tape.linear(&params, xs, 2, 0, Some(2));
        // Same thing with unfused ops.
        let p0 = tape.param(&params, 0);
        let p1 = tape.param(&params, 1);
        let b = tape.param(&params, 2);
        let m0 = tape.mul(p0, xs);
        let m1 = tape.mul(p1, ts);
        let s = tape.add(m0, m1);
        let manual = tape.add(s, b);
        let (jf, jm) = (tape.jet(fused), tape.jet(manual));
        for s in 0..5 {
            assert!((jf.0[s] - jm.0[s]).abs() < 1e-14, "slot {s}");
        }
    }

    #[test]
    fn linear_gradients_match_unfused_gradients() {
        let params = [0.7, -0.3, 0.11];
        let run = |fused: bool| -> Vec<f64> {
            let mut grads = vec![0.0; 3];
            let mut tape: Tape<4> = Tape::new();
            let x = tape.coord_x(0.4);
            let t = tape.coord_t(0.9);
            let xs = tape.sin(x);
            let ts = tape.tanh(t);
            let out = if fused {
                tape.linear(&params, xs, 2, 0, Some(2))
            } else {
                let p0 = tape.param(&params, 0);
                let p1 = tape.param(&params, 1);
                let b = tape.param(&params, 2);
                let m0 = tape.mul(p0, xs);
                let m1 = tape.mul(p1, ts);
                let s = tape.add(m0, m1);
                tape.add(s, b)
            };
            // Pull on both the value and a derivative slot so the fused rule
            // is exercised across slots, not just on values.
            let dx = tape.extract(out, Slot::Dx);
            let v = tape.square(out);
            let d = tape.square(dx);
            let loss = tape.add(v, d);
            tape.backward(loss, 1.0, &params, &mut grads).unwrap();
            grads
        };
        let gf = run(true);
        let gu = run(false);
        for i in 0..3 {
            assert!((gf[i] - gu[i]).abs() < 1e-13, "param {i}: {} vs {}", gf[i], gu[i]);
        }
    }
}
