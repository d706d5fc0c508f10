//! Stochastic detuning inputs: interpolated white noise for the three-level
//! model and the Ornstein-Uhlenbeck process for the two-level model.

use crate::error::{Error, Result};
use crate::rng::{standard_normal, Stream};

/// Spacing between white-noise samples in the default sampling mode, in 1/γ.
pub const DEFAULT_SAMPLE_SPACING: f64 = 10.0;

/// How the number of white-noise samples is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// One sample every [`DEFAULT_SAMPLE_SPACING`] of simulated time.
    #[default]
    PerUnitTime,
    /// `γT/10` samples in total, spread uniformly over the whole duration.
    LiteralTotal,
}

impl NoiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::PerUnitTime => "per_unit_time",
            NoiseMode::LiteralTotal => "literal_total",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per_unit_time" => Some(NoiseMode::PerUnitTime),
            "literal_total" => Some(NoiseMode::LiteralTotal),
            _ => None,
        }
    }

    /// Sample spacing for a signal covering `duration` with modulation period `period`.
    pub fn spacing(self, duration: f64, period: f64) -> f64 {
        match self {
            NoiseMode::PerUnitTime => DEFAULT_SAMPLE_SPACING,
            NoiseMode::LiteralTotal => {
                let points = (period / 10.0).round().max(2.0);
                duration / (points - 1.0)
            }
        }
    }
}

/// A uniformly sampled signal evaluated by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSignal {
    start: f64,
    spacing: f64,
    values: Vec<f64>,
}

impl NoiseSignal {
    /// A constant zero signal over `[0, duration]`.
    pub fn zero(duration: f64) -> Self {
        Self {
            start: 0.0,
            spacing: duration.max(f64::MIN_POSITIVE),
            values: vec![0.0, 0.0],
        }
    }

    pub fn uniform(start: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidSeries(format!("sample spacing {spacing} must be positive")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidSeries("need at least two samples".into()));
        }
        Ok(Self { start, spacing, values })
    }

    /// Rebuilds a signal from explicit sample times, which must be uniformly spaced.
    pub fn from_samples(times: &[f64], values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSeries("times and values differ in length".into()));
        }
        if times.len() < 2 {
            return Err(Error::InvalidSeries("need at least two samples".into()));
        }
        let spacing = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        for (i, &t) in times.iter().enumerate() {
            let expected = times[0] + i as f64 * spacing;
            if (t - expected).abs() > 1e-9 * spacing.max(1.0) {
                return Err(Error::InvalidSeries(format!("sample {i} at t = {t} is not on a uniform grid")));
            }
        }
        Self::uniform(times[0], spacing, values)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.spacing * (self.values.len() - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| self.start + i as f64 * self.spacing)
            .collect()
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let eps = 1e-9 * self.spacing;
        self.start <= t0 + eps && self.end() >= t1 - eps
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let eps = 1e-9 * self.spacing;
        if t < self.start - eps || t > self.end() + eps || t.is_nan() {
            return Err(Error::OutOfSpan {
                time: t,
                start: self.start,
                end: self.end(),
            });
        }
        Ok(self.eval_clamped(t))
    }

    /// Interpolated value, with `t` clamped into the span.
    #[inline]
    pub(crate) fn eval_clamped(&self, t: f64) -> f64 {
        let x = ((t - self.start) / self.spacing).max(0.0);
        let last = self.values.len() - 1;
        let i = (x.floor() as usize).min(last - 1);
        let frac = (x - i as f64).min(1.0);
        if frac == 0.0 {
            return self.values[i];
        }
        if frac == 1.0 {
            return self.values[i + 1];
        }
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// Gaussian white-noise samples at `spacing` over `[0, duration]`, i.i.d. Normal(0, sigma²).
pub fn generate_white_noise(duration: f64, spacing: f64, sigma: f64, rng: &mut Stream) -> NoiseSignal {
    assert!(duration > 0.0 && spacing > 0.0 && sigma >= 0.0);
    let count = (duration / spacing - 1e-9).ceil().max(1.0) as usize + 1;
    let values = (0..count).map(|_| sigma * standard_normal(rng)).collect();
    NoiseSignal {
        start: 0.0,
        spacing,
        values,
    }
}

/// Parameters of `dΔ = −κΔ dt + γ√D dB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub kappa: f64,
    pub d: f64,
    pub gamma: f64,
}

impl OuParams {
    pub fn stationary_variance(&self) -> f64 {
        self.gamma * self.gamma * self.d / (2.0 * self.kappa)
    }

    /// Standard deviation of the exact one-step innovation over `dt`.
    pub fn step_std(&self, dt: f64) -> f64 {
        let factor = if self.kappa * dt < 1e-12 {
            // κ→0 limit of (1 − e^{−2κdt}) / 2κ
            dt * (1.0 - self.kappa * dt)
        } else {
            -(-2.0 * self.kappa * dt).exp_m1() / (2.0 * self.kappa)
        };
        self.gamma * (self.d * factor).sqrt()
    }
}

/// Exact OU transition over `dt` driven by the standard normal draw `xi`.
#[inline]
pub fn ou_step(x: f64, dt: f64, p: &OuParams, xi: f64) -> f64 {
    x * (-p.kappa * dt).exp() + p.step_std(dt) * xi
}

/// Euler-Maruyama OU step, kept for cross-checks against [`ou_step`].
#[inline]
pub fn ou_step_euler(x: f64, dt: f64, p: &OuParams, xi: f64) -> f64 {
    x - p.kappa * x * dt + p.gamma * (p.d * dt).sqrt() * xi
}

/// Stateful OU generator stepping on a fixed grid.
#[derive(Debug, Clone)]
pub struct OuProcess {
    params: OuParams,
    decay: f64,
    std: f64,
    value: f64,
}

impl OuProcess {
    pub fn new(params: OuParams, dt: f64, x0: f64) -> Self {
        Self {
            params,
            decay: (-params.kappa * dt).exp(),
            std: params.step_std(dt),
            value: x0,
        }
    }

    pub fn params(&self) -> &OuParams {
        &self.params
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn advance(&mut self, rng: &mut Stream) -> f64 {
        self.value = self.value * self.decay + self.std * standard_normal(rng);
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_stream;
    use proptest::prelude::*;

    #[test]
    fn zero_sigma_is_zero_signal() {
        let s = generate_white_noise(1000.0, 10.0, 0.0, &mut seeded_stream(1, 0));
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_sample_count_and_std() {
        let s = generate_white_noise(10_000.0, 10.0, 0.2, &mut seeded_stream(7, 3));
        assert_eq!(s.values().len(), 1001);
        assert!((s.end() - 10_000.0).abs() < 1e-9);
        let n = s.values().len() as f64;
        let mean = s.values().iter().sum::<f64>() / n;
        let var = s.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        // chi-square with 1000 dof: P(std ∉ [0.18, 0.22]) ≈ 1e-5
        assert!((0.18..=0.22).contains(&std), "std = {std}");
    }

    #[test]
    fn same_seed_same_signal() {
        let a = generate_white_noise(500.0, 10.0, 0.2, &mut seeded_stream(9, 2));
        let b = generate_white_noise(500.0, 10.0, 0.2, &mut seeded_stream(9, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn eval_outside_span_errors() {
        let s = generate_white_noise(100.0, 10.0, 1.0, &mut seeded_stream(0, 0));
        assert!(matches!(s.eval(-1.0), Err(Error::OutOfSpan { .. })));
        assert!(matches!(s.eval(100.5), Err(Error::OutOfSpan { .. })));
        assert!(s.eval(100.0).is_ok());
    }

    #[test]
    fn literal_mode_spacing() {
        // δf = 0.01γ: T = 100, so 10 points across 10^4.
        let sp = NoiseMode::LiteralTotal.spacing(10_000.0, 100.0);
        assert!((sp - 10_000.0 / 9.0).abs() < 1e-9);
        assert_eq!(NoiseMode::PerUnitTime.spacing(10_000.0, 100.0), 10.0);
    }

    #[test]
    fn from_samples_rejects_nonuniform() {
        assert!(NoiseSignal::from_samples(&[0.0, 1.0, 3.0], vec![0.0; 3]).is_err());
        assert!(NoiseSignal::from_samples(&[0.0, 1.0, 2.0], vec![0.0; 3]).is_ok());
    }

    #[test]
    fn ou_zero_noise_decays_exponentially() {
        let p = OuParams { kappa: 0.3, d: 0.0, gamma: 1.0 };
        let mut x = 2.0;
        for _ in 0..100 {
            x = ou_step(x, 0.01, &p, 1.7);
        }
        assert!((x - 2.0 * (-0.3f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn ou_kappa_zero_is_wiener_step() {
        let p = OuParams { kappa: 0.0, d: 2.0, gamma: 1.5 };
        let x = ou_step(0.4, 0.01, &p, 0.8);
        assert!((x - (0.4 + 1.5 * (2.0f64 * 0.01).sqrt() * 0.8)).abs() < 1e-15);
    }

    #[test]
    fn ou_two_half_steps_match_one_step_in_distribution() {
        let p = OuParams { kappa: 0.1, d: 1.0, gamma: 1.0 };
        let dt = 0.7;
        let a = (-p.kappa * dt / 2.0).exp();
        let s_half = p.step_std(dt / 2.0);
        // x -> a(a x + s ξ1) + s ξ2: mean a² x, variance s²(a² + 1)
        assert!((a * a - (-p.kappa * dt).exp()).abs() < 1e-15);
        let composed_var = s_half * s_half * (a * a + 1.0);
        assert!((composed_var - p.step_std(dt).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn ou_euler_agrees_to_first_order() {
        let p = OuParams { kappa: 0.1, d: 1.0, gamma: 1.0 };
        let dt = 1e-4;
        let exact = ou_step(1.0, dt, &p, 0.5);
        let euler = ou_step_euler(1.0, dt, &p, 0.5);
        assert!((exact - euler).abs() < 10.0 * dt * dt.sqrt());
    }

    proptest! {
        #[test]
        fn interpolation_hits_samples_and_midpoints(vals in proptest::collection::vec(-5.0f64..5.0, 2..40), spacing in 0.1f64..20.0) {
            let s = NoiseSignal::uniform(0.0, spacing, vals.clone()).unwrap();
            for (i, v) in vals.iter().enumerate() {
                prop_assert!((s.eval(i as f64 * spacing).unwrap() - v).abs() < 1e-12);
            }
            for i in 0..vals.len() - 1 {
                let mid = s.eval((i as f64 + 0.5) * spacing).unwrap();
                prop_assert!((mid - 0.5 * (vals[i] + vals[i + 1])).abs() < 1e-12);
            }
        }
    }
}
