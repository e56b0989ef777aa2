//! Coordinate jets: a scalar value bundled with its partial derivatives with
//! respect to the input coordinates, propagated through every operation.
//!
//! Slot layout is `[val, d/dx, d²/dx², (d³/dx³,) d/dt]`: `N = 4` carries
//! x-derivatives to second order, `N = 5` to third order for equations with
//! third-order spatial terms. The t-derivative always sits in the last slot.
//! Mixed x/t partials are not tracked; residuals never need them.

/// A truncated derivative jet with `N` slots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize>(pub [f64; N]);

/// Jet carrying x-derivatives up to second order.
pub type Jet2 = Jet<4>;
/// Jet carrying x-derivatives up to third order.
pub type Jet3 = Jet<5>;

impl<const N: usize> Jet<N> {
    pub const ZERO: Self = Jet([0.0; N]);

    /// A value with no coordinate dependence.
    #[inline]
    pub fn constant(v: f64) -> Self {
        let mut s = [0.0; N];
        s[0] = v;
        Jet(s)
    }

    /// Seed jet of the x coordinate: `(x, 1, 0, .., 0)`.
    #[inline]
    pub fn seed_x(v: f64) -> Self {
        Self::seed_x_scaled(v, 1.0)
    }

    /// Seed jet of the t coordinate: `(t, 0, .., 0, 1)`.
    #[inline]
    pub fn seed_t(v: f64) -> Self {
        Self::seed_t_scaled(v, 1.0)
    }

    /// Seed for an affine image `a·x + b` of the x coordinate; `scale` is the
    /// chain-rule factor `a` so downstream slots stay derivatives in x itself.
    #[inline]
    pub fn seed_x_scaled(v: f64, scale: f64) -> Self {
        let mut s = [0.0; N];
        s[0] = v;
        s[1] = scale;
        Jet(s)
    }

    /// Seed for an affine image of the t coordinate (see [`Self::seed_x_scaled`]).
    #[inline]
    pub fn seed_t_scaled(v: f64, scale: f64) -> Self {
        let mut s = [0.0; N];
        s[0] = v;
        s[N - 1] = scale;
        Jet(s)
    }

    #[inline]
    pub fn val(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.0[1]
    }

    #[inline]
    pub fn dxx(&self) -> f64 {
        self.0[2]
    }

    /// Third x-derivative; zero when the jet does not carry that order.
    #[inline]
    pub fn dxxx(&self) -> f64 {
        if N >= 5 {
            self.0[3]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.0[N - 1]
    }

    #[inline]
    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        let mut r = self.0;
        for (ri, oi) in r.iter_mut().zip(o.0.iter()) {
            *ri += oi;
        }
        Jet(r)
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        let mut r = self.0;
        for (ri, oi) in r.iter_mut().zip(o.0.iter()) {
            *ri -= oi;
        }
        Jet(r)
    }

    #[inline]
    pub fn scale(self, k: f64) -> Self {
        let mut r = self.0;
        for ri in r.iter_mut() {
            *ri *= k;
        }
        Jet(r)
    }

    /// Leibniz product rule on all tracked slots.
    #[inline]
    pub fn mul(self, o: Self) -> Self {
        let a = &self.0;
        let b = &o.0;
        let mut r = [0.0; N];
        r[0] = a[0] * b[0];
        r[1] = a[1] * b[0] + a[0] * b[1];
        r[2] = a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2];
        if N >= 5 {
            r[3] = a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3];
        }
        r[N - 1] = a[N - 1] * b[0] + a[0] * b[N - 1];
        Jet(r)
    }

    #[inline]
    pub fn square(self) -> Self {
        self.mul(self)
    }

    /// Faà di Bruno composition with a scalar function given its value and
    /// first three derivatives at `self.val()`.
    #[inline]
    pub fn compose(self, v0: f64, g: [f64; 3]) -> Self {
        let a = &self.0;
        let mut r = [0.0; N];
        r[0] = v0;
        r[1] = g[0] * a[1];
        r[2] = g[1] * a[1] * a[1] + g[0] * a[2];
        if N >= 5 {
            r[3] = g[2] * a[1] * a[1] * a[1] + 3.0 * g[1] * a[1] * a[2] + g[0] * a[3];
        }
        r[N - 1] = g[0] * a[N - 1];
        Jet(r)
    }

    #[inline]
    pub fn tanh(self) -> Self {
        let u = self.0[0].tanh();
        self.compose(u, tanh_derivs(u))
    }

    #[inline]
    pub fn sin(self) -> Self {
        let (s, c) = self.0[0].sin_cos();
        self.compose(s, [c, -s, -c])
    }

    #[inline]
    pub fn cos(self) -> Self {
        let (s, c) = self.0[0].sin_cos();
        self.compose(c, [-s, -c, s])
    }
}

/// First three derivatives of tanh expressed through its value `u`.
#[inline]
pub fn tanh_derivs(u: f64) -> [f64; 3] {
    let g1 = 1.0 - u * u;
    [g1, -2.0 * u * g1, g1 * (6.0 * u * u - 2.0)]
}

/// Fourth derivative of tanh through its value `u` (needed by the reverse
/// sweep when third-order jets are active).
#[inline]
pub fn tanh_deriv4(u: f64) -> f64 {
    (1.0 - u * u) * (16.0 * u - 24.0 * u * u * u)
}
