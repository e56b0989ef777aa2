//! Quantitative figures of merit: relative L2 error, residual statistics
//! and spatial profiles, domain-wall tracking, Ginzburg-Landau free energy,
//! solution power spectra and learned-frequency histograms, plus the report
//! files they are emitted into.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::model::{JetScratch, ModelParams};
use crate::pde::{residual_values, PdeKind};
use crate::reference::Field;

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("prediction and truth grids differ in size ({pred} vs {truth})")]
    GridMismatch { pred: usize, truth: usize },
    #[error("relative error is undefined against an identically zero truth")]
    ZeroTruth,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// ‖A − Â‖₂ / ‖A‖₂ over matching sample vectors, using complex magnitudes.
pub fn relative_l2(pred: &[Complex64], truth: &[Complex64]) -> Result<f64, DiagnosticsError> {
    if pred.len() != truth.len() {
        return Err(DiagnosticsError::GridMismatch { pred: pred.len(), truth: truth.len() });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, t) in pred.iter().zip(truth.iter()) {
        num += (p - t).norm_sqr();
        den += t.norm_sqr();
    }
    if den == 0.0 {
        return Err(DiagnosticsError::ZeroTruth);
    }
    Ok((num / den).sqrt())
}

/// Evaluates the network at every node of the field's grid (the standard
/// evaluation grid: the reference resolution, disjoint by construction from
/// the stochastic training points).
pub fn predict_on_grid(params: &ModelParams, grid: &Field) -> Vec<Complex64> {
    (0..grid.nt)
        .into_par_iter()
        .flat_map_iter(|it| {
            let t = grid.t_at(it);
            (0..grid.nx).map(move |ix| {
                let (u, v) = params.eval_value(grid.x_at(ix), t);
                Complex64::new(u, v)
            })
        })
        .collect()
}

/// |f| at every node of an `nx_eval` × `nt_eval` uniform grid over the domain.
pub fn residual_magnitudes<const N: usize>(
    params: &ModelParams,
    kind: &PdeKind,
    x_domain: (f64, f64),
    t_domain: (f64, f64),
    nx_eval: usize,
    nt_eval: usize,
) -> Vec<f64> {
    let kind = effective_kind(params, kind);
    (0..nt_eval)
        .into_par_iter()
        .map_init(
            || JetScratch::<N>::default(),
            |scratch, it| {
                let t = t_domain.0 + (t_domain.1 - t_domain.0) * it as f64 / (nt_eval as f64 - 1.0);
                (0..nx_eval)
                    .map(|ix| {
                        let x = x_domain.0 + (x_domain.1 - x_domain.0) * ix as f64 / (nx_eval as f64 - 1.0);
                        let (u, v) = params.forward_jets(scratch, x, t);
                        let (fr, fi) = residual_values(&kind, &u, &v);
                        (fr * fr + fi * fi).sqrt()
                    })
                    .collect::<Vec<_>>()
            },
        )
        .flatten()
        .collect()
}

fn effective_kind(params: &ModelParams, kind: &PdeKind) -> PdeKind {
    match (kind, params.pde_params()) {
        (PdeKind::Cgle { .. }, Some((b, c))) => PdeKind::Cgle { b, c },
        (k, _) => *k,
    }
}

/// Per-x maximum of |f| over the time samples: the spatial residual profile.
pub fn residual_profile<const N: usize>(
    params: &ModelParams,
    kind: &PdeKind,
    x_domain: (f64, f64),
    t_domain: (f64, f64),
    nx_eval: usize,
    nt_eval: usize,
) -> Vec<(f64, f64)> {
    let mags = residual_magnitudes::<N>(params, kind, x_domain, t_domain, nx_eval, nt_eval);
    (0..nx_eval)
        .map(|ix| {
            let x = x_domain.0 + (x_domain.1 - x_domain.0) * ix as f64 / (nx_eval as f64 - 1.0);
            let worst = (0..nt_eval).map(|it| mags[it * nx_eval + ix]).fold(0.0, f64::max);
            (x, worst)
        })
        .collect()
}

/// Zero crossing of Re A nearest x = 0, linearly interpolated between the
/// bracketing grid points; `None` when the row never changes sign.
pub fn wall_position(row: &[Complex64], x0: f64, dx: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..row.len() - 1 {
        let (a, b) = (row[i].re, row[i + 1].re);
        if a == 0.0 {
            consider(&mut best, x0 + dx * i as f64);
        } else if a * b < 0.0 {
            let frac = a / (a - b);
            consider(&mut best, x0 + dx * (i as f64 + frac));
        }
    }
    if row.last().map(|v| v.re == 0.0).unwrap_or(false) {
        consider(&mut best, x0 + dx * (row.len() - 1) as f64);
    }
    best
}

fn consider(best: &mut Option<f64>, candidate: f64) {
    if best.map(|b| candidate.abs() < b.abs()).unwrap_or(true) {
        *best = Some(candidate);
    }
}

/// Wall trajectory over all snapshots of a field.
pub fn wall_trajectory(field: &Field) -> Vec<(f64, Option<f64>)> {
    (0..field.nt)
        .map(|it| (field.t_at(it), wall_position(field.slice_t(it), field.x_domain.0, field.dx())))
        .collect()
}

/// Ginzburg-Landau free energy of one spatial row,
///   F = ∫ |∂x A|² + ½(|A|² − 1)² dx,
/// with central-difference gradients (one-sided at the walls) and
/// trapezoidal quadrature. The equation is not a gradient flow of F for
/// b, c ≠ 0; this is a monitored observable.
pub fn free_energy(row: &[Complex64], dx: f64) -> f64 {
    let n = row.len();
    assert!(n >= 2);
    let mut total = 0.0;
    for i in 0..n {
        let grad = if i == 0 {
            (row[1] - row[0]) / dx
        } else if i == n - 1 {
            (row[n - 1] - row[n - 2]) / dx
        } else {
            (row[i + 1] - row[i - 1]) / (2.0 * dx)
        };
        let pot = row[i].norm_sqr() - 1.0;
        let density = grad.norm_sqr() + 0.5 * pot * pot;
        let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        total += weight * density * dx;
    }
    total
}

pub fn energy_trajectory(field: &Field) -> Vec<(f64, f64)> {
    (0..field.nt)
        .map(|it| (field.t_at(it), free_energy(field.slice_t(it), field.dx())))
        .collect()
}

/// One-sided power spectrum of Re A on a uniform row: (frequency in cycles
/// per x-unit, power). Interior bins are doubled so the one-sided sum equals
/// the full-spectrum sum: Σ power = Nx · Σ (Re A)².
pub fn power_spectrum(row: &[Complex64], dx: f64) -> Vec<(f64, f64)> {
    let n = row.len();
    let mut buf: Vec<Complex64> = row.iter().map(|v| Complex64::new(v.re, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    (0..=half)
        .map(|k| {
            let freq = k as f64 / (n as f64 * dx);
            let mut p = buf[k].norm_sqr();
            if k != 0 && !(n % 2 == 0 && k == half) {
                p *= 2.0;
            }
            (freq, p)
        })
        .collect()
}

/// RMS deviation of log10 power between two spectra, restricted to bins
/// strictly above `skip_bins`. Powers are floored to keep the logs finite.
pub fn log_power_rms_deviation(a: &[(f64, f64)], b: &[(f64, f64)], skip_bins: usize) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in skip_bins + 1..a.len() {
        let la = a[k].1.max(1e-30).log10();
        let lb = b[k].1.max(1e-30).log10();
        sum += (la - lb) * (la - lb);
        count += 1;
    }
    (sum / count.max(1) as f64).sqrt()
}

/// Histogram of frequency-row norms |K_j| before and after training over a
/// shared binning.
#[derive(Clone, Debug, Serialize)]
pub struct KHistogram {
    pub bin_edges: Vec<f64>,
    pub count_init: Vec<usize>,
    pub count_trained: Vec<usize>,
}

pub fn k_row_norms(k: &[f64]) -> Vec<f64> {
    k.chunks_exact(2).map(|row| (row[0] * row[0] + row[1] * row[1]).sqrt()).collect()
}

pub fn k_histogram(k_init: &[f64], k_trained: &[f64], bins: usize) -> KHistogram {
    assert_eq!(k_init.len(), k_trained.len());
    let init = k_row_norms(k_init);
    let trained = k_row_norms(k_trained);
    let max = init
        .iter()
        .chain(trained.iter())
        .fold(0.0_f64, |a, &b| a.max(b))
        .max(1e-12)
        * (1.0 + 1e-9);
    let edges: Vec<f64> = (0..=bins).map(|i| max * i as f64 / bins as f64).collect();
    let mut count_init = vec![0usize; bins];
    let mut count_trained = vec![0usize; bins];
    for v in &init {
        count_init[((v / max * bins as f64) as usize).min(bins - 1)] += 1;
    }
    for v in &trained {
        count_trained[((v / max * bins as f64) as usize).min(bins - 1)] += 1;
    }
    KHistogram { bin_edges: edges, count_init, count_trained }
}

/// How a training run ended, as recorded in the report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
}

/// Everything the evaluation stage emits for one trained model.
#[derive(Debug, Serialize)]
pub struct DiagnosticsReport {
    pub status: RunStatus,
    pub rel_l2: Option<f64>,
    pub residual_median: f64,
    pub residual_mean: f64,
    pub residual_max: f64,
    pub wall_final_pred: Option<f64>,
    pub wall_final_truth: Option<f64>,
    #[serde(skip)]
    pub wall_pred: Vec<(f64, Option<f64>)>,
    #[serde(skip)]
    pub wall_truth: Vec<(f64, Option<f64>)>,
    #[serde(skip)]
    pub energy_pred: Vec<(f64, f64)>,
    #[serde(skip)]
    pub energy_truth: Vec<(f64, f64)>,
    #[serde(skip)]
    pub psd: Vec<(f64, f64, f64)>,
    #[serde(skip)]
    pub profile: Vec<(f64, f64)>,
    #[serde(skip)]
    pub k_hist: Option<KHistogram>,
}

/// Builds the full report for a trained model against the reference field.
/// Residual statistics run on the full evaluation grid; series diagnostics
/// reuse the field's snapshot grid.
pub fn build_report<const N: usize>(
    params: &ModelParams,
    kind: &PdeKind,
    truth: &Field,
    diverged: bool,
    k_init: Option<&[f64]>,
) -> DiagnosticsReport {
    let pred_values = predict_on_grid(params, truth);
    let rel_l2 = relative_l2(&pred_values, &truth.values).ok();

    let mut mags = residual_magnitudes::<N>(
        params,
        kind,
        truth.x_domain,
        truth.t_domain,
        truth.nx,
        truth.nt,
    );
    let residual_mean = mags.iter().sum::<f64>() / mags.len() as f64;
    let residual_max = mags.iter().fold(0.0_f64, |a, &b| a.max(b));
    mags.sort_by(f64::total_cmp);
    let residual_median = mags[mags.len() / 2];

    let pred_field = Field { values: pred_values, ..truth.clone() };
    let wall_pred = wall_trajectory(&pred_field);
    let wall_truth = wall_trajectory(truth);
    let energy_pred = energy_trajectory(&pred_field);
    let energy_truth = energy_trajectory(truth);

    let last = truth.nt - 1;
    let psd_pred = power_spectrum(pred_field.slice_t(last), truth.dx());
    let psd_truth = power_spectrum(truth.slice_t(last), truth.dx());
    let psd = psd_pred
        .iter()
        .zip(psd_truth.iter())
        .map(|(&(f, pp), &(_, pt))| (f, pp, pt))
        .collect();

    let profile = residual_profile::<N>(params, kind, truth.x_domain, truth.t_domain, truth.nx, 64);

    DiagnosticsReport {
        status: if diverged { RunStatus::Diverged } else { RunStatus::Completed },
        rel_l2,
        residual_median,
        residual_mean,
        residual_max,
        wall_final_pred: wall_pred.last().and_then(|w| w.1),
        wall_final_truth: wall_truth.last().and_then(|w| w.1),
        wall_pred,
        wall_truth,
        energy_pred,
        energy_truth,
        psd,
        profile,
        k_hist: k_init.map(|ki| k_histogram(ki, params.k_matrix(), 32)),
    }
}

impl DiagnosticsReport {
    /// Writes `summary.json` plus one CSV per series into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<(), DiagnosticsError> {
        std::fs::create_dir_all(dir)?;
        let summary = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(dir.join("summary.json"), summary)?;

        let mut wall = std::io::BufWriter::new(std::fs::File::create(dir.join("wall.csv"))?);
        writeln!(wall, "t,x_wall_pred,x_wall_truth")?;
        for ((t, wp), (_, wt)) in self.wall_pred.iter().zip(self.wall_truth.iter()) {
            writeln!(wall, "{},{},{}", t, fmt_opt(*wp), fmt_opt(*wt))?;
        }

        let mut energy = std::io::BufWriter::new(std::fs::File::create(dir.join("energy.csv"))?);
        writeln!(energy, "t,f_pred,f_truth")?;
        for ((t, ep), (_, et)) in self.energy_pred.iter().zip(self.energy_truth.iter()) {
            writeln!(energy, "{},{},{}", t, ep, et)?;
        }

        let mut psd = std::io::BufWriter::new(std::fs::File::create(dir.join("psd.csv"))?);
        writeln!(psd, "freq,power_pred,power_truth")?;
        for (f, pp, pt) in &self.psd {
            writeln!(psd, "{},{},{}", f, pp, pt)?;
        }

        let mut prof = std::io::BufWriter::new(std::fs::File::create(dir.join("residual_profile.csv"))?);
        writeln!(prof, "x,max_abs_f")?;
        for (x, v) in &self.profile {
            writeln!(prof, "{},{}", x, v)?;
        }

        if let Some(h) = &self.k_hist {
            let mut kh = std::io::BufWriter::new(std::fs::File::create(dir.join("k_histogram.csv"))?);
            writeln!(kh, "bin_lo,bin_hi,count_init,count_trained")?;
            for i in 0..h.count_init.len() {
                writeln!(kh, "{},{},{},{}", h.bin_edges[i], h.bin_edges[i + 1], h.count_init[i], h.count_trained[i])?;
            }
        }
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::Scheme;
    use std::f64::consts::PI;

    fn make_field(nx: usize, nt: usize, f: impl Fn(f64, f64) -> Complex64) -> Field {
        let x_domain = (-10.0, 7.5);
        let t_domain = (0.0, 10.0);
        let mut values = Vec::with_capacity(nx * nt);
        for it in 0..nt {
            let t = t_domain.0 + (t_domain.1 - t_domain.0) * it as f64 / (nt as f64 - 1.0);
            for ix in 0..nx {
                let x = x_domain.0 + (x_domain.1 - x_domain.0) * ix as f64 / (nx as f64 - 1.0);
                values.push(f(x, t));
            }
        }
        Field {
            nx,
            nt,
            x_domain,
            t_domain,
            periodic: false,
            scheme: Scheme::CrankNicolsonFd,
            dt: 1e-3,
            pde_params: (0.5, -1.3),
            values,
        }
    }

    #[test]
    fn relative_l2_basics() {
        let truth = make_field(64, 8, |x, _| Complex64::new((-x).tanh(), 0.1));
        assert_eq!(relative_l2(&truth.values, &truth.values).unwrap(), 0.0);
        let double: Vec<Complex64> = truth.values.iter().map(|v| 2.0 * v).collect();
        assert!((relative_l2(&double, &truth.values).unwrap() - 1.0).abs() < 1e-14);
        // Scale covariance: pred = λ·truth gives exactly |λ − 1|.
        for lambda in [0.3, 1.7] {
            let scaled: Vec<Complex64> = truth.values.iter().map(|v| lambda * v).collect();
            let e = relative_l2(&scaled, &truth.values).unwrap();
            assert!((e - (lambda - 1.0_f64).abs()).abs() < 1e-12);
        }
        let zeros = vec![Complex64::new(0.0, 0.0); truth.values.len()];
        assert!(matches!(relative_l2(&truth.values, &zeros), Err(DiagnosticsError::ZeroTruth)));
        // Perturbing 1% of points by ε changes the error by the hand value.
        let mut pert = truth.values.clone();
        let step = pert.len() / (pert.len() / 100);
        let mut touched = 0.0;
        for i in (0..pert.len()).step_by(step) {
            pert[i] += Complex64::new(1e-3, 0.0);
            touched += 1e-6;
        }
        let den: f64 = truth.values.iter().map(|v| v.norm_sqr()).sum();
        let expect = (touched / den).sqrt();
        assert!((relative_l2(&pert, &truth.values).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn wall_position_probes() {
        let n = 101;
        let dx = 17.5 / (n as f64 - 1.0);
        let row: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((-(-10.0 + dx * i as f64)).tanh(), 0.0))
            .collect();
        let w = wall_position(&row, -10.0, dx).unwrap();
        assert!(w.abs() < 1e-12, "tanh front crosses at the origin, got {w}");

        // Shifting the row by one grid cell moves the crossing by exactly dx.
        let mut shifted = row.clone();
        shifted.rotate_right(1);
        shifted[0] = shifted[1];
        let w2 = wall_position(&shifted, -10.0, dx).unwrap();
        assert!((w2 - (w + dx)).abs() < 1e-9, "{w2} vs {}", w + dx);

        // No crossing: reported as absent.
        let flat: Vec<Complex64> = (0..n).map(|_| Complex64::new(0.5, 0.0)).collect();
        assert!(wall_position(&flat, -10.0, dx).is_none());
    }

    #[test]
    fn wall_interpolation_accuracy_on_smooth_rows() {
        // Against a 10×-refined evaluation of the same smooth front, the
        // linear interpolation must localize the crossing to within dx/2.
        let n = 81;
        let dx = 17.5 / (n as f64 - 1.0);
        for shift in [0.13, -0.41, 0.77] {
            let row: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new((shift - (-10.0 + dx * i as f64)).tanh(), 0.0))
                .collect();
            let w = wall_position(&row, -10.0, dx).unwrap();
            assert!((w - shift).abs() < dx / 2.0, "{w} vs {shift}");
        }
    }

    #[test]
    fn free_energy_reference_values() {
        let n = 201;
        let dx = 10.0 / (n as f64 - 1.0);
        // |A| ≡ 1: gradient and potential both vanish.
        let ones: Vec<Complex64> = (0..n).map(|_| Complex64::new(1.0, 0.0)).collect();
        assert!(free_energy(&ones, dx).abs() < 1e-14);
        // A ≡ 0 on a length-L row: only the ½ potential term survives → L/2.
        let zeros: Vec<Complex64> = (0..n).map(|_| Complex64::new(0.0, 0.0)).collect();
        let l = dx * (n as f64 - 1.0);
        assert!((free_energy(&zeros, dx) - l / 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_spectrum_pure_tone_and_parseval() {
        let n = 256;
        let span = 17.5;
        let dx = span / n as f64;
        let row: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((2.0 * PI * 3.0 * (i as f64) / n as f64).cos(), 0.7))
            .collect();
        let psd = power_spectrum(&row, dx);
        let peak = psd.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0;
        assert_eq!(peak, 3);
        assert!((psd[3].0 - 3.0 / span).abs() < 1e-12);

        let total: f64 = psd.iter().map(|p| p.1).sum();
        let sum_sq: f64 = row.iter().map(|v| v.re * v.re).sum();
        assert!((total - n as f64 * sum_sq).abs() < 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        use rand::Rng;
        let mut rng = crate::rng::SeedStreams::new(8).stream("diag");
        let n = 4096;
        let row: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
        let psd = power_spectrum(&row, 1.0);
        // Band-averaged powers should agree within a modest factor.
        let band = |lo: usize, hi: usize| -> f64 {
            psd[lo..hi].iter().map(|p| p.1).sum::<f64>() / (hi - lo) as f64
        };
        let low = band(1, n / 8);
        let high = band(3 * n / 8, n / 2);
        assert!(low / high < 1.3 && high / low < 1.3, "bands {low} vs {high}");
    }

    #[test]
    fn k_histogram_probes() {
        use rand::Rng;
        // σ = 0: all mass in the lowest bin.
        let zeros = vec![0.0; 64];
        let h = k_histogram(&zeros, &zeros, 8);
        assert_eq!(h.count_init[0], 32);
        assert_eq!(h.count_init[1..].iter().sum::<usize>(), 0);

        // Gaussian rows: |K_j| is Rayleigh(σ); one-sample KS at the 1% level.
        let sigma = 10.0;
        let mut rng = crate::rng::SeedStreams::new(12).stream("diag");
        let k: Vec<f64> = (0..2048).map(|_| {
            // Box-Muller, independent of the library's normal sampler.
            let u: f64 = rng.gen_range(0.0..1.0);
            let v: f64 = rng.gen_range(0.0..1.0);
            sigma * (-2.0 * u.max(1e-300).ln()).sqrt() * (2.0 * PI * v).cos()
        }).collect();
        let norms = k_row_norms(&k);
        let r = crate::stats::ks_one_sample(&norms, |x| {
            1.0 - (-x * x / (2.0 * sigma * sigma)).exp()
        });
        assert!(r.p_value > 0.01, "Rayleigh fit p = {}", r.p_value);
    }
}
