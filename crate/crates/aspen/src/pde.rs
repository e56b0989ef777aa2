//! Residual definitions over jets: the complex Ginzburg-Landau equation in
//! real/imaginary decomposition, plus Allen-Cahn, viscous Burgers, KdV and
//! the cubic Schrödinger equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet, NodeId, Slot, Tape};

/// Which equation a residual evaluates, with its fixed parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    /// ∂A/∂t = A + (1+ib)∂²A/∂x² − (1+ic)|A|²A for complex A.
    Cgle { b: f64, c: f64 },
    /// ∂u/∂t = D ∂²u/∂x² − (u³−u)/ε².
    AllenCahn { d: f64, epsilon: f64 },
    /// ∂u/∂t + u ∂u/∂x = ν ∂²u/∂x².
    Burgers { nu: f64 },
    /// ∂u/∂t + u ∂u/∂x + ∂³u/∂x³ = 0.
    KdV,
    /// i∂ψ/∂t + ∂²ψ/∂x² + |ψ|²ψ = 0 for complex ψ.
    Nls,
}

impl PdeKind {
    /// Highest x-derivative order the residual needs from the jets.
    pub fn required_jet_order(&self) -> usize {
        match self {
            PdeKind::KdV => 3,
            _ => 2,
        }
    }

    /// Whether the solution field has an imaginary component.
    pub fn is_complex(&self) -> bool {
        matches!(self, PdeKind::Cgle { .. } | PdeKind::Nls)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PdeKind::Cgle { .. } => "cgle",
            PdeKind::AllenCahn { .. } => "allen_cahn",
            PdeKind::Burgers { .. } => "burgers",
            PdeKind::KdV => "kdv",
            PdeKind::Nls => "nls",
        }
    }
}

/// Named initial conditions; the configuration file selects one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcKind {
    /// tanh(−x) + 0i; the curriculum smoothing scale applies here.
    TanhFront,
    /// tanh(−s·x) with a fixed steepness (no curriculum interaction).
    TanhFrontScaled { s: f64 },
    /// Complex plane wave e^{ikx}.
    PlaneWave { k: f64 },
    /// x²·cos(πx).
    QuadCos,
    /// −sin(πx).
    NegSinPi,
    /// amp·sech(x).
    Sech { amp: f64 },
    /// 12k²·sech²(kx).
    KdvSoliton { k: f64 },
    Zero,
}

impl IcKind {
    /// Initial value at `x`; `smoothing` is the curriculum scale in (0, 1]
    /// and only affects the tanh front.
    pub fn value(&self, x: f64, smoothing: f64) -> Complex64 {
        match *self {
            IcKind::TanhFront => Complex64::new((-smoothing * x).tanh(), 0.0),
            IcKind::TanhFrontScaled { s } => Complex64::new((-s * x).tanh(), 0.0),
            IcKind::PlaneWave { k } => Complex64::from_polar(1.0, k * x),
            IcKind::QuadCos => Complex64::new(x * x * (std::f64::consts::PI * x).cos(), 0.0),
            IcKind::NegSinPi => Complex64::new(-(std::f64::consts::PI * x).sin(), 0.0),
            IcKind::Sech { amp } => Complex64::new(amp / x.cosh(), 0.0),
            IcKind::KdvSoliton { k } => {
                let s = 1.0 / (k * x).cosh();
                Complex64::new(12.0 * k * k * s * s, 0.0)
            }
            IcKind::Zero => Complex64::new(0.0, 0.0),
        }
    }
}

/// Boundary specification on the two spatial edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BcKind {
    Dirichlet { left: Complex64, right: Complex64 },
    Periodic,
}

/// A fully specified problem: equation, domain, initial and boundary data.
#[derive(Clone, Copy, Debug)]
pub struct PdeSpec {
    pub kind: PdeKind,
    pub x_domain: (f64, f64),
    pub t_domain: (f64, f64),
    pub ic: IcKind,
    pub bc: BcKind,
}

#[derive(Debug, thiserror::Error)]
pub enum PdeSpecError {
    #[error("empty domain: {0}")]
    EmptyDomain(&'static str),
    #[error("Dirichlet value at {side} boundary disagrees with the initial condition there (|Δ| = {mismatch:.3e})")]
    CornerMismatch { side: &'static str, mismatch: f64 },
}

impl PdeSpec {
    /// The stiff front benchmark: CGLE with b = 0.5, c = −1.3 on
    /// x ∈ [−10, 7.5], t ∈ [0, 10], tanh front initial condition, Dirichlet
    /// edges pinned to the initial values.
    pub fn cgle_front() -> Self {
        let x_domain = (-10.0, 7.5);
        PdeSpec {
            kind: PdeKind::Cgle { b: 0.5, c: -1.3 },
            x_domain,
            t_domain: (0.0, 10.0),
            ic: IcKind::TanhFront,
            bc: BcKind::Dirichlet {
                left: Complex64::new((-x_domain.0).tanh(), 0.0),
                right: Complex64::new((-x_domain.1).tanh(), 0.0),
            },
        }
    }

    pub fn validate(&self) -> Result<(), PdeSpecError> {
        if self.x_domain.1 <= self.x_domain.0 {
            return Err(PdeSpecError::EmptyDomain("x"));
        }
        if self.t_domain.1 <= self.t_domain.0 {
            return Err(PdeSpecError::EmptyDomain("t"));
        }
        if let BcKind::Dirichlet { left, right } = self.bc {
            let dl = (self.ic.value(self.x_domain.0, 1.0) - left).norm();
            if dl > 1e-9 {
                return Err(PdeSpecError::CornerMismatch { side: "left", mismatch: dl });
            }
            let dr = (self.ic.value(self.x_domain.1, 1.0) - right).norm();
            if dr > 1e-9 {
                return Err(PdeSpecError::CornerMismatch { side: "right", mismatch: dr });
            }
        }
        Ok(())
    }
}

/// Residual nodes on a tape. `|f|² = f_real² + f_imag²` is what enters the
/// residual loss; `f_imag` is absent for real-valued equations.
#[derive(Clone, Copy, Debug)]
pub struct ResidualNodes {
    pub f_real: NodeId,
    pub f_imag: Option<NodeId>,
}

impl ResidualNodes {
    /// Appends |f|² to the tape.
    pub fn magnitude_squared<const N: usize>(&self, tape: &mut Tape<N>) -> NodeId {
        let re2 = tape.square(self.f_real);
        match self.f_imag {
            Some(im) => {
                let im2 = tape.square(im);
                tape.add(re2, im2)
            }
            None => re2,
        }
    }
}

/// CGLE residual in real/imaginary decomposition:
///   f_real = u_t − u − (u_xx − b·v_xx) + (u²+v²)(u − c·v)
///   f_imag = v_t − v − (v_xx + b·u_xx) + (u²+v²)(v + c·u)
/// `b` and `c` are tape nodes so they can be constants (forward problem) or
/// trainable parameters (inverse problem) with the same code path.
pub fn cgle_residual<const N: usize>(
    tape: &mut Tape<N>,
    u: NodeId,
    v: NodeId,
    b: NodeId,
    c: NodeId,
) -> ResidualNodes {
    let ut = tape.extract(u, Slot::Dt);
    let vt = tape.extract(v, Slot::Dt);
    let uxx = tape.extract(u, Slot::Dxx);
    let vxx = tape.extract(v, Slot::Dxx);
    let u2 = tape.square(u);
    let v2 = tape.square(v);
    let mag = tape.add(u2, v2);

    let bvxx = tape.mul(b, vxx);
    let lap_re = tape.sub(uxx, bvxx);
    let cv = tape.mul(c, v);
    let ucv = tape.sub(u, cv);
    let nl_re = tape.mul(mag, ucv);
    let r1 = tape.sub(ut, u);
    let r2 = tape.sub(r1, lap_re);
    let f_real = tape.add(r2, nl_re);

    let buxx = tape.mul(b, uxx);
    let lap_im = tape.add(vxx, buxx);
    let cu = tape.mul(c, u);
    let vcu = tape.add(v, cu);
    let nl_im = tape.mul(mag, vcu);
    let s1 = tape.sub(vt, v);
    let s2 = tape.sub(s1, lap_im);
    let f_imag = tape.add(s2, nl_im);

    ResidualNodes { f_real, f_imag: Some(f_imag) }
}

/// f = u_t − D·u_xx + (u³ − u)/ε².
pub fn allen_cahn_residual<const N: usize>(
    tape: &mut Tape<N>,
    u: NodeId,
    d: f64,
    epsilon: f64,
) -> ResidualNodes {
    let ut = tape.extract(u, Slot::Dt);
    let uxx = tape.extract(u, Slot::Dxx);
    let u2 = tape.square(u);
    let u3 = tape.mul(u2, u);
    let cubic = tape.sub(u3, u);
    let reaction = tape.scale(cubic, 1.0 / (epsilon * epsilon));
    let diff = tape.scale(uxx, d);
    let r = tape.sub(ut, diff);
    let f_real = tape.add(r, reaction);
    ResidualNodes { f_real, f_imag: None }
}

/// f = u_t + u·u_x − ν·u_xx.
pub fn burgers_residual<const N: usize>(tape: &mut Tape<N>, u: NodeId, nu: f64) -> ResidualNodes {
    let ut = tape.extract(u, Slot::Dt);
    let ux = tape.extract(u, Slot::Dx);
    let uxx = tape.extract(u, Slot::Dxx);
    let adv = tape.mul(u, ux);
    let diff = tape.scale(uxx, nu);
    let r = tape.add(ut, adv);
    let f_real = tape.sub(r, diff);
    ResidualNodes { f_real, f_imag: None }
}

/// f = u_t + u·u_x + u_xxx; requires third-order jets.
pub fn kdv_residual<const N: usize>(tape: &mut Tape<N>, u: NodeId) -> ResidualNodes {
    debug_assert!(N >= 5, "KdV needs order-3 jets");
    let ut = tape.extract(u, Slot::Dt);
    let ux = tape.extract(u, Slot::Dx);
    let uxxx = tape.extract(u, Slot::Dxxx);
    let adv = tape.mul(u, ux);
    let r = tape.add(ut, adv);
    let f_real = tape.add(r, uxxx);
    ResidualNodes { f_real, f_imag: None }
}

/// With ψ = u + iv: f_real = −v_t + u_xx + (u²+v²)u, f_imag = u_t + v_xx + (u²+v²)v.
pub fn nls_residual<const N: usize>(tape: &mut Tape<N>, u: NodeId, v: NodeId) -> ResidualNodes {
    let ut = tape.extract(u, Slot::Dt);
    let vt = tape.extract(v, Slot::Dt);
    let uxx = tape.extract(u, Slot::Dxx);
    let vxx = tape.extract(v, Slot::Dxx);
    let u2 = tape.square(u);
    let v2 = tape.square(v);
    let mag = tape.add(u2, v2);

    let nlu = tape.mul(mag, u);
    let r = tape.sub(uxx, vt);
    let f_real = tape.add(r, nlu);

    let nlv = tape.mul(mag, v);
    let s = tape.add(ut, vxx);
    let f_imag = tape.add(s, nlv);
    ResidualNodes { f_real, f_imag: Some(f_imag) }
}

/// Records the residual for `kind`, creating constant nodes for the equation
/// parameters unless trainable (b, c) nodes are supplied (inverse mode, CGLE
/// only).
pub fn residual_on_tape<const N: usize>(
    tape: &mut Tape<N>,
    kind: &PdeKind,
    u: NodeId,
    v: NodeId,
    trainable_bc: Option<(NodeId, NodeId)>,
) -> ResidualNodes {
    match *kind {
        PdeKind::Cgle { b, c } => {
            let (bn, cn) = match trainable_bc {
                Some(nodes) => nodes,
                None => {
                    let bn = tape.constant(b);
                    let cn = tape.constant(c);
                    (bn, cn)
                }
            };
            cgle_residual(tape, u, v, bn, cn)
        }
        PdeKind::AllenCahn { d, epsilon } => allen_cahn_residual(tape, u, d, epsilon),
        PdeKind::Burgers { nu } => burgers_residual(tape, u, nu),
        PdeKind::KdV => kdv_residual(tape, u),
        PdeKind::Nls => nls_residual(tape, u, v),
    }
}

/// Residual straight from output jets, no tape; same formulas as the tape
/// path. Used for evaluation grids and refinement pools.
pub fn residual_values<const N: usize>(kind: &PdeKind, u: &Jet<N>, v: &Jet<N>) -> (f64, f64) {
    match *kind {
        PdeKind::Cgle { b, c } => {
            let mag = u.val() * u.val() + v.val() * v.val();
            let f_re = u.dt() - u.val() - (u.dxx() - b * v.dxx()) + mag * (u.val() - c * v.val());
            let f_im = v.dt() - v.val() - (v.dxx() + b * u.dxx()) + mag * (v.val() + c * u.val());
            (f_re, f_im)
        }
        PdeKind::AllenCahn { d, epsilon } => {
            let f = u.dt() - d * u.dxx() + (u.val().powi(3) - u.val()) / (epsilon * epsilon);
            (f, 0.0)
        }
        PdeKind::Burgers { nu } => (u.dt() + u.val() * u.dx() - nu * u.dxx(), 0.0),
        PdeKind::KdV => (u.dt() + u.val() * u.dx() + u.dxxx(), 0.0),
        PdeKind::Nls => {
            let mag = u.val() * u.val() + v.val() * v.val();
            let f_re = -v.dt() + u.dxx() + mag * u.val();
            let f_im = u.dt() + v.dxx() + mag * v.val();
            (f_re, f_im)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Jet2, Jet3};

    fn eval_cgle_on_tape(u: Jet2, v: Jet2, b: f64, c: f64) -> (f64, f64) {
        let mut tape: Tape<4> = Tape::new();
        let un = tape.leaf(u);
        let vn = tape.leaf(v);
        let bn = tape.constant(b);
        let cn = tape.constant(c);
        let r = cgle_residual(&mut tape, un, vn, bn, cn);
        (tape.value(r.f_real), tape.value(r.f_imag.unwrap()))
    }

    #[test]
    fn zero_field_is_a_cgle_solution() {
        let (fr, fi) = eval_cgle_on_tape(Jet2::ZERO, Jet2::ZERO, 0.5, -1.3);
        assert_eq!((fr, fi), (0.0, 0.0));
    }

    #[test]
    fn uniform_unit_field() {
        // u ≡ 1, v ≡ 0, no derivatives: with c = 0 the field is stationary;
        // otherwise the residual picks up the phase-rotation term i·c.
        let one = Jet2::constant(1.0);
        let (fr, fi) = eval_cgle_on_tape(one, Jet2::ZERO, 0.0, 0.0);
        assert!((fr.abs()).max(fi.abs()) < 1e-15);
        let (fr, fi) = eval_cgle_on_tape(one, Jet2::ZERO, 0.0, -1.3);
        assert!(fr.abs() < 1e-15);
        assert!((fi - (-1.3)).abs() < 1e-15, "f_imag = c for the unit plateau");
    }

    #[test]
    fn tanh_front_kills_the_real_gl_residual() {
        // u = tanh(x/√2) solves u + u_xx − u³ = 0, so at b = c = 0 the static
        // front has zero residual. Built through the tape ops so the jet
        // chain rule is exercised end to end.
        let mut tape: Tape<4> = Tape::new();
        let mut worst = 0.0_f64;
        for i in 0..=1000 {
            let x = -8.0 + 16.0 * (i as f64) / 1000.0;
            tape.reset();
            let xn = tape.coord_x(x);
            let scaled = tape.scale(xn, 1.0 / 2.0_f64.sqrt());
            let u = tape.tanh(scaled);
            let v = tape.constant(0.0);
            let b = tape.constant(0.0);
            let c = tape.constant(0.0);
            let r = cgle_residual(&mut tape, u, v, b, c);
            worst = worst
                .max(tape.value(r.f_real).abs())
                .max(tape.value(r.f_imag.unwrap()).abs());
        }
        assert!(worst < 1e-8, "max residual {worst}");
    }

    #[test]
    fn decomposition_matches_complex_arithmetic() {
        use num_complex::Complex64;
        use rand::Rng;
        let mut rng = crate::rng::SeedStreams::new(42).stream("pde-test");
        for _ in 0..1000 {
            let mut draw = || rng.gen_range(-2.0..2.0);
            let (b, c) = (draw(), draw());
            let u = Jet::<4>([draw(), draw(), draw(), draw()]);
            let v = Jet::<4>([draw(), draw(), draw(), draw()]);
            let (fr, fi) = residual_values(&PdeKind::Cgle { b, c }, &u, &v);

            let a = Complex64::new(u.val(), v.val());
            let at = Complex64::new(u.dt(), v.dt());
            let axx = Complex64::new(u.dxx(), v.dxx());
            let f = at
                - (a + Complex64::new(1.0, b) * axx
                    - Complex64::new(1.0, c) * a.norm_sqr() * a);
            assert!((fr - f.re).abs() < 1e-12);
            assert!((fi - f.im).abs() < 1e-12);

            // Tape route agrees with the jet route.
            let (tr, ti) = eval_cgle_on_tape(u, v, b, c);
            assert!((tr - fr).abs() < 1e-12 && (ti - fi).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_term_scales_cubically() {
        // On a derivative-free probe, f_real(λu) + λu is exactly λ³ times
        // f_real(u) + u: the cubic term is the only nonlinearity.
        let (a, b, c) = (0.7, -0.4, -1.3);
        for lambda in [0.5, 2.0, 3.0] {
            let u = Jet2::constant(a);
            let v = Jet2::constant(b);
            let (f1, _) = residual_values(&PdeKind::Cgle { b: 0.5, c }, &u, &v);
            let (fl, _) = residual_values(
                &PdeKind::Cgle { b: 0.5, c },
                &u.scale(lambda),
                &v.scale(lambda),
            );
            let cubic1 = f1 + a;
            let cubicl = fl + lambda * a;
            assert!((cubicl - lambda.powi(3) * cubic1).abs() < 1e-12);
        }
    }

    #[test]
    fn allen_cahn_equilibria_and_midpoint() {
        let mut tape: Tape<4> = Tape::new();
        for (val, expect) in [(1.0, 0.0), (0.0, 0.0), (0.5, (0.125 - 0.5) / 1e-4)] {
            tape.reset();
            let u = tape.constant(val);
            let r = allen_cahn_residual(&mut tape, u, 0.001, 0.01);
            assert!((tape.value(r.f_real) - expect).abs() < 1e-9);
            assert!(r.f_imag.is_none());
        }
    }

    #[test]
    fn burgers_probes() {
        let mut tape: Tape<4> = Tape::new();
        let nu = 0.01 / std::f64::consts::PI;
        let u = tape.constant(0.83);
        let r = burgers_residual(&mut tape, u, nu);
        assert_eq!(tape.value(r.f_real), 0.0);

        for x in [-1.0, -0.3, 0.9] {
            tape.reset();
            // u = x with u_t = 0: the time-independent linear probe, seeded
            // directly so the time slot stays empty.
            let u = tape.leaf(Jet2::seed_x(x));
            let r = burgers_residual(&mut tape, u, nu);
            assert!((tape.value(r.f_real) - x).abs() < 1e-15);
        }

        // Random jet triple against the independent scalar formula.
        use rand::Rng;
        let mut rng = crate::rng::SeedStreams::new(9).stream("pde-test");
        for _ in 0..100 {
            let j = Jet::<4>([rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            tape.reset();
            let u = tape.leaf(j);
            let r = burgers_residual(&mut tape, u, nu);
            let expect = j.dt() + j.val() * j.dx() - nu * j.dxx();
            assert!((tape.value(r.f_real) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn kdv_probes() {
        let mut tape: Tape<5> = Tape::new();
        let u = tape.constant(2.2);
        let r = kdv_residual(&mut tape, u);
        assert_eq!(tape.value(r.f_real), 0.0);

        for x in [-0.7, 0.2, 1.4] {
            tape.reset();
            let u = tape.leaf(Jet3::seed_x(x));
            let r = kdv_residual(&mut tape, u);
            assert!((tape.value(r.f_real) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn kdv_soliton_is_annihilated() {
        // u(x,t) = 12k²·sech²(k(x − 4k²t)), built on the tape as
        // 12k²(1 − tanh²), sweeping a 1001-point grid.
        let k = 0.8;
        let mut tape: Tape<5> = Tape::new();
        let mut worst = 0.0_f64;
        for i in 0..=1000 {
            let x = -10.0 + 20.0 * (i as f64) / 1000.0;
            let t = 0.37;
            tape.reset();
            let xn = tape.coord_x(x);
            let tn = tape.coord_t(t);
            let xs = tape.scale(xn, k);
            let ts = tape.scale(tn, 4.0 * k * k * k);
            let arg = tape.sub(xs, ts);
            let th = tape.tanh(arg);
            let th2 = tape.square(th);
            let one = tape.constant(1.0);
            let sech2 = tape.sub(one, th2);
            let u = tape.scale(sech2, 12.0 * k * k);
            let r = kdv_residual(&mut tape, u);
            worst = worst.max(tape.value(r.f_real).abs());
        }
        assert!(worst < 1e-8, "max residual {worst}");
    }

    #[test]
    fn nls_probes_and_soliton() {
        let mut tape: Tape<4> = Tape::new();
        let z = tape.constant(0.0);
        let r = nls_residual(&mut tape, z, z);
        assert_eq!(tape.value(r.f_real), 0.0);
        assert_eq!(tape.value(r.f_imag.unwrap()), 0.0);

        tape.reset();
        let one = tape.constant(1.0);
        let zero = tape.constant(0.0);
        let r = nls_residual(&mut tape, one, zero);
        assert!((tape.value(r.f_real) - 1.0).abs() < 1e-15);
        assert!(tape.value(r.f_imag.unwrap()).abs() < 1e-15);

        // Bright soliton of i·ψ_t + ψ_xx + |ψ|²ψ = 0: ψ = √2·sech(x)·e^{it}.
        // (The amplitude √2 comes from matching the sech'' = sech − 2sech³
        // identity against the cubic coefficient.) Jets are assembled
        // analytically and injected as leaves.
        let amp = 2.0_f64.sqrt();
        let mut worst = 0.0_f64;
        for i in 0..=1000 {
            let x = -8.0 + 16.0 * (i as f64) / 1000.0;
            let t: f64 = 0.61;
            let s = 1.0 / x.cosh();
            let th = x.tanh();
            let s1 = -s * th; // sech'
            let s2 = s - 2.0 * s * s * s; // sech''
            let (sin_t, cos_t) = t.sin_cos();
            // ψ = amp·s(x)·(cos t + i sin t)
            let u = Jet::<4>([amp * s * cos_t, amp * s1 * cos_t, amp * s2 * cos_t, -amp * s * sin_t]);
            let v = Jet::<4>([amp * s * sin_t, amp * s1 * sin_t, amp * s2 * sin_t, amp * s * cos_t]);
            tape.reset();
            let un = tape.leaf(u);
            let vn = tape.leaf(v);
            let r = nls_residual(&mut tape, un, vn);
            worst = worst
                .max(tape.value(r.f_real).abs())
                .max(tape.value(r.f_imag.unwrap()).abs());
        }
        assert!(worst < 1e-8, "max residual {worst}");
    }

    #[test]
    fn corner_validation() {
        let mut spec = PdeSpec::cgle_front();
        assert!(spec.validate().is_ok());
        spec.bc = BcKind::Dirichlet {
            left: Complex64::new(0.5, 0.0),
            right: Complex64::new(0.0, 0.0),
        };
        assert!(matches!(spec.validate(), Err(PdeSpecError::CornerMismatch { side: "left", .. })));
    }
}
