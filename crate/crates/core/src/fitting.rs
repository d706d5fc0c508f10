//! Interval-distribution models and least-squares fits to binned counts.
//!
//! * `Exponential`:  `c·e^{−λδt}`
//! * `DampedSine`:   `c·e^{−λδt}[sin(ωδt + φ) + 1]`
//! * `GaussianPeak`: `c·e^{−a(δt − t₁)²}`
//! * `TwoState`:     renewal density of a two-phase process with latency `δt₀`,
//!   `C·γ₁γ₂/(γ₁−γ₂)·[e^{−γ₂τ} − e^{−γ₁τ}]·H(τ)` with `τ = δt − 2δt₀`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::jumps::IntervalHistogram;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::rng::seeded_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Exponential,
    DampedSine,
    GaussianPeak,
    TwoState,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Exponential,
        ModelKind::DampedSine,
        ModelKind::GaussianPeak,
        ModelKind::TwoState,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Exponential => "exponential",
            ModelKind::DampedSine => "damped_sine",
            ModelKind::GaussianPeak => "gaussian_peak",
            ModelKind::TwoState => "two_state",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Exponential => &["c", "lambda"],
            ModelKind::DampedSine => &["c", "lambda", "omega", "phi"],
            ModelKind::GaussianPeak => &["c", "a", "t1"],
            ModelKind::TwoState => &["C", "gamma1", "gamma2", "dt0"],
        }
    }

    pub fn dim(self) -> usize {
        self.param_names().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitModel {
    Exponential { c: f64, lambda: f64 },
    DampedSine { c: f64, lambda: f64, omega: f64, phi: f64 },
    GaussianPeak { c: f64, a: f64, t1: f64 },
    TwoState { c: f64, gamma1: f64, gamma2: f64, dt0: f64 },
}

/// `γ·e^{−γ(t−δt₀)}·H(t−δt₀)`: density of leaving one phase after dwelling `t`.
pub fn two_state_component(t: f64, gamma_i: f64, dt0: f64) -> f64 {
    if t < dt0 {
        0.0
    } else {
        gamma_i * (-gamma_i * (t - dt0)).exp()
    }
}

impl FitModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FitModel::Exponential { .. } => ModelKind::Exponential,
            FitModel::DampedSine { .. } => ModelKind::DampedSine,
            FitModel::GaussianPeak { .. } => ModelKind::GaussianPeak,
            FitModel::TwoState { .. } => ModelKind::TwoState,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            FitModel::Exponential { c, lambda } => vec![c, lambda],
            FitModel::DampedSine { c, lambda, omega, phi } => vec![c, lambda, omega, phi],
            FitModel::GaussianPeak { c, a, t1 } => vec![c, a, t1],
            FitModel::TwoState { c, gamma1, gamma2, dt0 } => vec![c, gamma1, gamma2, dt0],
        }
    }

    pub fn from_params(kind: ModelKind, p: &[f64]) -> Self {
        match kind {
            ModelKind::Exponential => FitModel::Exponential { c: p[0], lambda: p[1] },
            ModelKind::DampedSine => FitModel::DampedSine { c: p[0], lambda: p[1], omega: p[2], phi: p[3] },
            ModelKind::GaussianPeak => FitModel::GaussianPeak { c: p[0], a: p[1], t1: p[2] },
            ModelKind::TwoState => FitModel::TwoState { c: p[0], gamma1: p[1], gamma2: p[2], dt0: p[3] },
        }
    }

    pub fn eval(&self, dt: f64) -> f64 {
        match *self {
            FitModel::Exponential { c, lambda } => c * (-lambda * dt).exp(),
            FitModel::DampedSine { c, lambda, omega, phi } => c * (-lambda * dt).exp() * ((omega * dt + phi).sin() + 1.0),
            FitModel::GaussianPeak { c, a, t1 } => c * (-a * (dt - t1).powi(2)).exp(),
            FitModel::TwoState { c, gamma1, gamma2, dt0 } => {
                let tau = dt - 2.0 * dt0;
                if tau <= 0.0 {
                    return 0.0;
                }
                if (gamma1 - gamma2).abs() < 1e-9 * gamma1.abs().max(gamma2.abs()) {
                    let g = 0.5 * (gamma1 + gamma2);
                    return c * g * g * tau * (-g * tau).exp();
                }
                // e^{−γ₂τ} − e^{−γ₁τ} = e^{−γ₂τ}(1 − e^{−(γ₁−γ₂)τ})
                let bracket = -(-gamma2 * tau).exp() * (-(gamma1 - gamma2) * tau).exp_m1();
                c * gamma1 * gamma2 / (gamma1 - gamma2) * bracket
            }
        }
    }

    /// Orders the two-state rates so that `gamma1 ≥ gamma2` (the density is symmetric in them).
    pub fn canonical(self) -> Self {
        match self {
            FitModel::TwoState { c, gamma1, gamma2, dt0 } if gamma2 > gamma1 => FitModel::TwoState {
                c,
                gamma1: gamma2,
                gamma2: gamma1,
                dt0,
            },
            other => other,
        }
    }
}

/// Histogram data as `(bin center, count)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedData {
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
}

impl From<&IntervalHistogram> for BinnedData {
    fn from(h: &IntervalHistogram) -> Self {
        Self {
            centers: (0..h.counts.len()).map(|k| h.bin_center(k)).collect(),
            counts: h.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

impl BinnedData {
    pub fn bin_width(&self) -> f64 {
        if self.centers.len() >= 2 {
            self.centers[1] - self.centers[0]
        } else {
            2.0 * self.centers.first().copied().unwrap_or(0.5)
        }
    }

    fn nonzero(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Residuals divided by `max(count, 1)`.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub starts: usize,
    pub weighting: Weighting,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            weighting: Weighting::Unweighted,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub residual_ss: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.model.params()
    }
}

pub fn residual_ss(model: &FitModel, data: &BinnedData, weighting: Weighting) -> f64 {
    data.centers
        .iter()
        .zip(&data.counts)
        .map(|(&x, &y)| {
            let r = y - model.eval(x);
            match weighting {
                Weighting::Unweighted => r * r,
                Weighting::Poisson => r * r / y.max(1.0),
            }
        })
        .sum()
}

/// Maps unconstrained optimizer coordinates onto valid parameters:
/// scales and rates via `exp`, the latency via `|·|`, phase and peak location free.
fn decode(kind: ModelKind, z: &[f64]) -> FitModel {
    let p: Vec<f64> = match kind {
        ModelKind::Exponential => vec![z[0].exp(), z[1].exp()],
        ModelKind::DampedSine => vec![z[0].exp(), z[1].exp(), z[2].exp(), z[3]],
        ModelKind::GaussianPeak => vec![z[0].exp(), z[1].exp(), z[2]],
        ModelKind::TwoState => vec![z[0].exp(), z[1].exp(), z[2].exp(), z[3].abs()],
    };
    FitModel::from_params(kind, &p)
}

fn encode(model: &FitModel) -> Vec<f64> {
    let p = model.params();
    match model.kind() {
        ModelKind::Exponential => vec![p[0].ln(), p[1].ln()],
        ModelKind::DampedSine => vec![p[0].ln(), p[1].ln(), p[2].ln(), p[3]],
        ModelKind::GaussianPeak => vec![p[0].ln(), p[1].ln(), p[2]],
        ModelKind::TwoState => vec![p[0].ln(), p[1].ln(), p[2].ln(), p[3]],
    }
}

/// Log-linear least-squares slope of the nonzero counts beyond `from`.
fn tail_decay_rate(data: &BinnedData, from: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = data
        .centers
        .iter()
        .zip(&data.counts)
        .filter(|(&x, &y)| x >= from && y > 0.0)
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope < 0.0 && slope.is_finite()).then_some(-slope)
}

/// Local maxima of the counts (strictly above the left neighbour, not below the right).
fn peak_centers(data: &BinnedData) -> Vec<f64> {
    let y = &data.counts;
    (1..y.len().saturating_sub(1))
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1] && y[k] > 0.0)
        .map(|k| data.centers[k])
        .collect()
}

struct Moments {
    max_count: f64,
    argmax: f64,
    mean: f64,
    total: f64,
    first_nonzero: f64,
    width: f64,
}

fn moments(data: &BinnedData) -> Moments {
    let total: f64 = data.counts.iter().sum();
    let (mut max_count, mut argmax) = (0.0, data.centers[0]);
    for (&x, &y) in data.centers.iter().zip(&data.counts) {
        if y > max_count {
            max_count = y;
            argmax = x;
        }
    }
    let mean = data.centers.iter().zip(&data.counts).map(|(x, y)| x * y).sum::<f64>() / total;
    let var = data.centers.iter().zip(&data.counts).map(|(x, y)| (x - mean).powi(2) * y).sum::<f64>() / total;
    let first_nonzero = data
        .centers
        .iter()
        .zip(&data.counts)
        .find(|(_, &y)| y > 0.0)
        .map(|(&x, _)| x)
        .unwrap_or(0.0);
    Moments {
        max_count,
        argmax,
        mean,
        total,
        first_nonzero,
        width: var.sqrt().max(data.bin_width()),
    }
}

/// Deterministic heuristic starting points, most plausible first.
fn heuristic_starts(kind: ModelKind, data: &BinnedData) -> Vec<FitModel> {
    let m = moments(data);
    let bw = data.bin_width();
    let decay = tail_decay_rate(data, m.argmax).unwrap_or(1.0 / m.mean.max(bw));
    let mut out = Vec::new();
    match kind {
        ModelKind::Exponential => {
            let lambda0 = tail_decay_rate(data, 0.0).unwrap_or(1.0 / m.mean.max(bw));
            for f in [1.0, 0.5, 2.0] {
                let lambda = lambda0 * f;
                let c = m.max_count * (lambda * m.argmax).exp();
                out.push(FitModel::Exponential { c, lambda });
            }
        }
        ModelKind::GaussianPeak => {
            for f in [1.0, 0.25, 4.0] {
                let a = f / (2.0 * m.width * m.width);
                out.push(FitModel::GaussianPeak { c: m.max_count, a, t1: m.argmax });
            }
        }
        ModelKind::DampedSine => {
            let peaks = peak_centers(data);
            let mut periods: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
            if let Some(&p) = peaks.first() {
                periods.push(p);
            }
            periods.push(m.mean);
            periods.sort_by(f64::total_cmp);
            periods.dedup_by(|a, b| (*a - *b).abs() < bw);
            let envelope = 0.5 * m.max_count;
            for period in periods.into_iter().filter(|p| *p > 2.0 * bw).take(4) {
                let omega = 2.0 * PI / period;
                for phi in [0.0, 0.5 * PI, PI, 1.5 * PI] {
                    let c = envelope * (decay * m.argmax).exp();
                    out.push(FitModel::DampedSine { c, lambda: decay, omega, phi });
                }
            }
            if out.is_empty() {
                out.push(FitModel::DampedSine { c: m.max_count, lambda: decay, omega: 2.0 * PI / m.mean, phi: 0.5 * PI });
            }
        }
        ModelKind::TwoState => {
            let scale = m.total * bw;
            let edge = (m.first_nonzero - 0.5 * bw).max(0.0);
            for latency in [0.5 * edge, 0.25 * edge, 0.0] {
                let slow = decay.min(1.0 / bw);
                let rest = m.mean - 2.0 * latency - 1.0 / slow;
                let fast = if rest > 0.0 { 1.0 / rest } else { 4.0 * slow };
                for (g1, g2) in [(fast.max(slow * 1.5), slow), (4.0 * slow, slow), (2.0 * slow, 0.5 * slow)] {
                    out.push(FitModel::TwoState { c: scale, gamma1: g1, gamma2: g2, dt0: latency });
                }
            }
        }
    }
    out
}

/// Least-squares fit of `kind` to binned counts with `opts.starts` simplex starts.
///
/// Starts are the heuristic guesses followed by seeded random perturbations of
/// them, so the start list for `k` starts is a prefix of that for `k + 1`.
pub fn fit(kind: ModelKind, data: &BinnedData, opts: &FitOptions) -> Result<FitResult> {
    let needed = kind.dim() + 1;
    let got = data.nonzero();
    if got < needed {
        return Err(Error::InsufficientData { needed, got });
    }
    let base = heuristic_starts(kind, data);
    let mut rng = seeded_stream(opts.seed, 0x0066_6974);
    let starts = opts.starts.max(1);
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(starts);
    for i in 0..starts {
        if i < base.len() {
            candidates.push(encode(&base[i]));
        } else {
            let mut z = encode(&base[i % base.len()]);
            for v in z.iter_mut() {
                *v += rng.random_range(-1.0..1.0);
            }
            candidates.push(z);
        }
    }

    let objective = |z: &[f64]| residual_ss(&decode(kind, z), data, opts.weighting);
    let nm = NelderMeadOptions::default();
    let mut best: Option<FitResult> = None;
    for z0 in candidates {
        let m = nelder_mead(objective, &z0, &nm);
        let better = best.as_ref().is_none_or(|b| m.value < b.residual_ss);
        if better {
            best = Some(FitResult {
                model: decode(kind, &m.x).canonical(),
                residual_ss: m.value,
                converged: m.converged,
                iterations: m.iterations,
            });
        }
    }
    let best = best.expect("at least one start");
    if !best.residual_ss.is_finite() {
        return Err(Error::InsufficientData { needed, got });
    }
    Ok(best)
}

pub fn fit_histogram(kind: ModelKind, h: &IntervalHistogram, opts: &FitOptions) -> Result<FitResult> {
    fit(kind, &BinnedData::from(h), opts)
}
