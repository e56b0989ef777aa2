//! The network: an adaptive spectral input layer (trainable Fourier
//! frequencies) feeding a tanh MLP that emits the real and imaginary parts
//! of the predicted field. Also provides the two reference configurations:
//! a raw-coordinate MLP and a frozen-frequency variant.

use std::f64::consts::TAU;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Jet, NodeId, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelMode {
    /// Trainable spectral layer + MLP backbone.
    Aspen,
    /// Spectral layer present but frozen at initialization.
    FixedFourier,
    /// Raw (normalized) coordinates straight into the MLP.
    Baseline,
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelMode::Aspen => "aspen",
            ModelMode::FixedFourier => "fixed_fourier",
            ModelMode::Baseline => "baseline",
        };
        f.write_str(s)
    }
}

/// Shape of a model before parameters are drawn.
#[derive(Clone, Copy, Debug)]
pub struct ModelSpec {
    pub mode: ModelMode,
    /// Number of Fourier features (each contributes a cos and a sin output).
    pub m: usize,
    /// Std-dev of the Gaussian initialization of the frequency matrix.
    pub sigma: f64,
    pub hidden_layers: usize,
    pub width: usize,
}

/// Frequency-matrix metadata; the entries live in the flat parameter vector.
#[derive(Clone, Copy, Debug)]
pub struct SpectralLayer {
    pub m: usize,
    pub trainable: bool,
}

/// Affine map taking physical coordinates into [-1, 1]² before the network.
/// The chain-rule factors fold into the coordinate jet seeds so that all jet
/// slots remain derivatives in the physical coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub x_center: f64,
    pub x_half: f64,
    pub t_center: f64,
    pub t_half: f64,
}

impl Normalization {
    pub fn for_domain(x: (f64, f64), t: (f64, f64)) -> Self {
        Normalization {
            x_center: 0.5 * (x.0 + x.1),
            x_half: 0.5 * (x.1 - x.0),
            t_center: 0.5 * (t.0 + t.1),
            t_half: 0.5 * (t.1 - t.0),
        }
    }

    /// Identity map (useful when the domain already is [-1, 1]²).
    pub fn identity() -> Self {
        Normalization {
            x_center: 0.0,
            x_half: 1.0,
            t_center: 0.0,
            t_half: 1.0,
        }
    }

    #[inline]
    pub fn x_seed<const N: usize>(&self, x: f64) -> Jet<N> {
        Jet::seed_x_scaled((x - self.x_center) / self.x_half, 1.0 / self.x_half)
    }

    #[inline]
    pub fn t_seed<const N: usize>(&self, t: f64) -> Jet<N> {
        Jet::seed_t_scaled((t - self.t_center) / self.t_half, 1.0 / self.t_half)
    }
}

/// One linear layer's slice of the flat parameter vector.
#[derive(Clone, Copy, Debug)]
struct LayerSlice {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

/// The full trainable set: frequency matrix plus MLP weights and biases,
/// optionally extended with the governing-equation parameters in inverse
/// mode. Values live in one flat vector so optimizers and gradient buffers
/// stay aligned by construction.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub mode: ModelMode,
    pub spectral: SpectralLayer,
    pub sigma: f64,
    pub hidden_layers: usize,
    pub width: usize,
    pub normalization: Normalization,
    pub values: Vec<f64>,
    layers: Vec<LayerSlice>,
    /// Offset of the two appended PDE parameters (inverse mode).
    pde_off: Option<usize>,
    trainable_start: usize,
}

impl ModelParams {
    /// Draws fresh parameters: frequencies i.i.d. N(0, σ²), weights
    /// Glorot-uniform, biases zero. `inverse_init` appends initial guesses
    /// for the governing parameters as trainables.
    pub fn init<R: Rng>(
        spec: &ModelSpec,
        normalization: Normalization,
        inverse_init: Option<(f64, f64)>,
        rng: &mut R,
    ) -> Self {
        assert!(spec.width >= 1 && (spec.mode == ModelMode::Baseline || spec.m >= 1));
        let input_dim = match spec.mode {
            ModelMode::Baseline => 2,
            _ => 2 * spec.m,
        };

        let mut values = Vec::new();
        let k_len = if spec.mode == ModelMode::Baseline { 0 } else { 2 * spec.m };
        if k_len > 0 {
            let normal = Normal::new(0.0, spec.sigma).expect("sigma must be finite and >= 0");
            values.extend((0..k_len).map(|_| normal.sample(rng)));
        }

        let mut layers = Vec::new();
        let mut dims = Vec::with_capacity(spec.hidden_layers + 2);
        dims.push(input_dim);
        dims.extend(std::iter::repeat(spec.width).take(spec.hidden_layers));
        dims.push(2);
        for win in dims.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let w = values.len();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let glorot = Uniform::new_inclusive(-bound, bound);
            values.extend((0..fan_in * fan_out).map(|_| glorot.sample(rng)));
            let b = values.len();
            values.extend(std::iter::repeat(0.0).take(fan_out));
            layers.push(LayerSlice { w, b, fan_in, fan_out });
        }

        let pde_off = inverse_init.map(|(b0, c0)| {
            let off = values.len();
            values.push(b0);
            values.push(c0);
            off
        });

        let trainable = spec.mode != ModelMode::FixedFourier;
        ModelParams {
            mode: spec.mode,
            spectral: SpectralLayer { m: if k_len > 0 { spec.m } else { 0 }, trainable },
            sigma: spec.sigma,
            hidden_layers: spec.hidden_layers,
            width: spec.width,
            normalization,
            values,
            layers,
            pde_off,
            trainable_start: if trainable { 0 } else { k_len },
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat frequency matrix, row-major (k_x, k_t) per feature.
    pub fn k_matrix(&self) -> &[f64] {
        &self.values[..2 * self.spectral.m]
    }

    /// Range of the parameter vector the optimizer is allowed to update.
    /// Frozen-frequency mode excludes the frequency block.
    pub fn trainable_range(&self) -> std::ops::Range<usize> {
        self.trainable_start..self.values.len()
    }

    /// Offset of the appended (b, c) pair in inverse mode.
    pub fn pde_param_offset(&self) -> Option<usize> {
        self.pde_off
    }

    pub fn pde_params(&self) -> Option<(f64, f64)> {
        self.pde_off.map(|o| (self.values[o], self.values[o + 1]))
    }

    /// Closed-form trainable count for a given shape; the flat vector length
    /// must always match this.
    pub fn expected_count(mode: ModelMode, m: usize, hidden_layers: usize, width: usize) -> usize {
        let input_dim = match mode {
            ModelMode::Baseline => 2,
            _ => 2 * m,
        };
        let k = if mode == ModelMode::Baseline { 0 } else { 2 * m };
        let first = if hidden_layers > 0 { input_dim * width + width } else { 0 };
        let hidden = hidden_layers.saturating_sub(1) * (width * width + width);
        let last_in = if hidden_layers > 0 { width } else { input_dim };
        k + first + hidden + (last_in * 2 + 2)
    }

    /// Records the full forward pass on the tape and returns the two output
    /// nodes (real and imaginary component jets).
    pub fn forward_on_tape<const N: usize>(
        &self,
        tape: &mut Tape<N>,
        x: f64,
        t: f64,
    ) -> (NodeId, NodeId) {
        let params = &self.values;
        let xn = tape.leaf(self.normalization.x_seed(x));
        let _tn = tape.leaf(self.normalization.t_seed(t));

        // Feature block: a contiguous node range feeding the first layer.
        let (feat_start, feat_n) = if self.mode == ModelMode::Baseline {
            (xn, 2)
        } else {
            let m = self.spectral.m;
            let mut phases = Vec::with_capacity(m);
            for j in 0..m {
                let dot = tape.linear(params, xn, 2, 2 * j, None);
                phases.push(tape.scale(dot, TAU));
            }
            let cos0 = tape.cos(phases[0]);
            for &p in &phases[1..] {
                tape.cos(p);
            }
            for &p in &phases {
                tape.sin(p);
            }
            (cos0, 2 * m)
        };

        let mut cur = feat_start;
        let mut cur_n = feat_n;
        for (li, layer) in self.layers.iter().enumerate() {
            debug_assert_eq!(layer.fan_in, cur_n);
            let is_output = li + 1 == self.layers.len();
            let mut first_lin = None;
            for i in 0..layer.fan_out {
                let id = tape.linear(params, cur, cur_n, layer.w + i * layer.fan_in, Some(layer.b + i));
                first_lin.get_or_insert(id);
            }
            let lin0 = first_lin.unwrap();
            if is_output {
                return (lin0, NodeId(lin0.0 + 1));
            }
            let mut first_act = None;
            for i in 0..layer.fan_out {
                let id = tape.tanh(NodeId(lin0.0 + i as u32));
                first_act.get_or_insert(id);
            }
            cur = first_act.unwrap();
            cur_n = layer.fan_out;
        }
        unreachable!("model always has an output layer");
    }

    /// Tape-free forward pass producing the output jets directly. Used where
    /// only values/derivatives are needed (evaluation grids, refinement
    /// pools) and no parameter gradients.
    pub fn forward_jets<const N: usize>(
        &self,
        scratch: &mut JetScratch<N>,
        x: f64,
        t: f64,
    ) -> (Jet<N>, Jet<N>) {
        let params = &self.values;
        let xj: Jet<N> = self.normalization.x_seed(x);
        let tj: Jet<N> = self.normalization.t_seed(t);

        let (a, b) = (&mut scratch.a, &mut scratch.b);
        a.clear();
        if self.mode == ModelMode::Baseline {
            a.push(xj);
            a.push(tj);
        } else {
            spectral_features(self.k_matrix(), xj, tj, a);
        }

        for (li, layer) in self.layers.iter().enumerate() {
            let is_output = li + 1 == self.layers.len();
            b.clear();
            for i in 0..layer.fan_out {
                let w = &params[layer.w + i * layer.fan_in..layer.w + (i + 1) * layer.fan_in];
                let mut acc = Jet::constant(params[layer.b + i]);
                for (wk, jin) in w.iter().zip(a.iter()) {
                    for (s, j) in acc.0.iter_mut().zip(jin.0.iter()) {
                        *s += wk * j;
                    }
                }
                b.push(if is_output { acc } else { acc.tanh() });
            }
            std::mem::swap(a, b);
        }
        (a[0], a[1])
    }

    /// Plain scalar forward pass (no jets, no tape). Deliberately a separate
    /// code path so it can serve as an independent value oracle.
    pub fn eval_value(&self, x: f64, t: f64) -> (f64, f64) {
        let params = &self.values;
        let xv = (x - self.normalization.x_center) / self.normalization.x_half;
        let tv = (t - self.normalization.t_center) / self.normalization.t_half;

        let mut a: Vec<f64>;
        if self.mode == ModelMode::Baseline {
            a = vec![xv, tv];
        } else {
            let m = self.spectral.m;
            a = Vec::with_capacity(2 * m);
            for j in 0..m {
                let phase = TAU * (params[2 * j] * xv + params[2 * j + 1] * tv);
                a.push(phase.cos());
            }
            for j in 0..m {
                let phase = TAU * (params[2 * j] * xv + params[2 * j + 1] * tv);
                a.push(phase.sin());
            }
        }

        for (li, layer) in self.layers.iter().enumerate() {
            let is_output = li + 1 == self.layers.len();
            let mut next = Vec::with_capacity(layer.fan_out);
            for i in 0..layer.fan_out {
                let w = &params[layer.w + i * layer.fan_in..layer.w + (i + 1) * layer.fan_in];
                let mut acc = params[layer.b + i];
                for (wk, ak) in w.iter().zip(a.iter()) {
                    acc += wk * ak;
                }
                next.push(if is_output { acc } else { acc.tanh() });
            }
            a = next;
        }
        (a[0], a[1])
    }

    /// Writes the checkpoint: a small text header plus bit-exact parameter
    /// values (hex-encoded f64 bits), stable within a major version.
    pub fn save(&self, path: &Path, config_hash: &str) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "aspen-checkpoint v1")?;
        writeln!(f, "config_hash {}", if config_hash.is_empty() { "-" } else { config_hash })?;
        writeln!(f, "mode {}", self.mode)?;
        writeln!(f, "m {}", self.spectral.m)?;
        writeln!(f, "sigma {}", self.sigma)?;
        writeln!(f, "hidden_layers {}", self.hidden_layers)?;
        writeln!(f, "width {}", self.width)?;
        writeln!(f, "spectral_trainable {}", self.spectral.trainable)?;
        writeln!(
            f,
            "normalization {} {} {} {}",
            self.normalization.x_center,
            self.normalization.x_half,
            self.normalization.t_center,
            self.normalization.t_half
        )?;
        writeln!(f, "pde_params {}", if self.pde_off.is_some() { 2 } else { 0 })?;
        writeln!(f, "values {}", self.values.len())?;
        for v in &self.values {
            writeln!(f, "{:016x}", v.to_bits())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let mut next = || -> Result<String, CheckpointError> {
            lines
                .next()
                .ok_or(CheckpointError::Truncated)?
                .map_err(CheckpointError::Io)
        };
        let header = next()?;
        if header != "aspen-checkpoint v1" {
            return Err(CheckpointError::BadHeader(header));
        }
        let mut fields = std::collections::HashMap::new();
        let n_values;
        loop {
            let line = next()?;
            let (key, rest) = line.split_once(' ').ok_or(CheckpointError::Malformed)?;
            if key == "values" {
                n_values = rest.parse::<usize>().map_err(|_| CheckpointError::Malformed)?;
                break;
            }
            fields.insert(key.to_string(), rest.to_string());
        }
        let get = |k: &str| fields.get(k).cloned().ok_or(CheckpointError::Malformed);
        let mode = match get("mode")?.as_str() {
            "aspen" => ModelMode::Aspen,
            "fixed_fourier" => ModelMode::FixedFourier,
            "baseline" => ModelMode::Baseline,
            _ => return Err(CheckpointError::Malformed),
        };
        let m: usize = get("m")?.parse().map_err(|_| CheckpointError::Malformed)?;
        let sigma: f64 = get("sigma")?.parse().map_err(|_| CheckpointError::Malformed)?;
        let hidden_layers: usize = get("hidden_layers")?.parse().map_err(|_| CheckpointError::Malformed)?;
        let width: usize = get("width")?.parse().map_err(|_| CheckpointError::Malformed)?;
        let trainable: bool = get("spectral_trainable")?.parse().map_err(|_| CheckpointError::Malformed)?;
        let norm_parts: Vec<f64> = get("normalization")?
            .split(' ')
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CheckpointError::Malformed)?;
        if norm_parts.len() != 4 {
            return Err(CheckpointError::Malformed);
        }
        let n_pde: usize = get("pde_params")?.parse().map_err(|_| CheckpointError::Malformed)?;

        let n = n_values;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next()?;
            let bits = u64::from_str_radix(line.trim(), 16).map_err(|_| CheckpointError::Malformed)?;
            values.push(f64::from_bits(bits));
        }

        let spec = ModelSpec { mode, m, sigma, hidden_layers, width };
        let normalization = Normalization {
            x_center: norm_parts[0],
            x_half: norm_parts[1],
            t_center: norm_parts[2],
            t_half: norm_parts[3],
        };
        // Rebuild the layout, then overwrite with the stored values.
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let mut params = ModelParams::init(
            &spec,
            normalization,
            if n_pde == 2 { Some((0.0, 0.0)) } else { None },
            &mut rng,
        );
        params.spectral.trainable = trainable;
        params.trainable_start = if trainable { 0 } else { 2 * params.spectral.m };
        if params.values.len() != values.len() {
            return Err(CheckpointError::ShapeMismatch {
                expected: params.values.len(),
                got: values.len(),
            });
        }
        params.values = values;
        Ok(params)
    }
}

/// Reusable activation buffers for the tape-free forward pass.
pub struct JetScratch<const N: usize> {
    a: Vec<Jet<N>>,
    b: Vec<Jet<N>>,
}

impl<const N: usize> Default for JetScratch<N> {
    fn default() -> Self {
        JetScratch { a: Vec::new(), b: Vec::new() }
    }
}

/// Spectral feature map y = [cos(2π K v), sin(2π K v)] over jets; `k` is the
/// flat row-major frequency matrix. Appends 2m feature jets (cos block then
/// sin block) to `out`.
pub fn spectral_features<const N: usize>(k: &[f64], xj: Jet<N>, tj: Jet<N>, out: &mut Vec<Jet<N>>) {
    let m = k.len() / 2;
    out.reserve(2 * m);
    for j in 0..m {
        let phase = xj.scale(k[2 * j]).add(tj.scale(k[2 * j + 1])).scale(TAU);
        out.push(phase.cos());
    }
    for j in 0..m {
        let phase = xj.scale(k[2 * j]).add(tj.scale(k[2 * j + 1])).scale(TAU);
        out.push(phase.sin());
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file: {0:?}")]
    BadHeader(String),
    #[error("checkpoint ends early")]
    Truncated,
    #[error("malformed checkpoint field")]
    Malformed,
    #[error("checkpoint has {got} values, shape expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
}
