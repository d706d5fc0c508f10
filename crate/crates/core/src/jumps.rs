//! Turning trajectories into collective-jump statistics: smoothing,
//! resampling, hysteresis threshold detection, interval histograms,
//! peak contrast and the optimum-detuning scan.

use crate::error::{Error, Result};

/// Sampled signal with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSeries(format!("times not strictly increasing at sample {}", i + 1)));
        }
        Ok(Self { times, values })
    }

    /// For callers that already guarantee the invariants.
    pub(crate) fn new_unchecked(times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Median sample spacing.
    pub fn typical_spacing(&self) -> Option<f64> {
        let mut d: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }
}

/// Causal single-pole low-pass with time constant `tau` (`tau = 0` is the identity).
///
/// Uses the exact response to a sample-and-hold input, so a step reaches
/// `1 − e⁻¹` of its height exactly `tau` after the edge.
pub fn low_pass(series: &TimeSeries, tau: f64) -> TimeSeries {
    assert!(tau >= 0.0, "filter time constant must be non-negative");
    if tau == 0.0 || series.is_empty() {
        return series.clone();
    }
    let mut out = Vec::with_capacity(series.len());
    let mut y = series.values[0];
    out.push(y);
    for i in 1..series.len() {
        let dt = series.times[i] - series.times[i - 1];
        let k = -(-dt / tau).exp_m1();
        y += k * (series.values[i] - y);
        out.push(y);
    }
    TimeSeries::new_unchecked(series.times.clone(), out)
}

/// Linear interpolation onto a uniform grid `t₀, t₀ + dt_out, …` within the original span.
pub fn resample_linear(series: &TimeSeries, dt_out: f64) -> Result<TimeSeries> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    assert!(dt_out > 0.0, "resampling step must be positive");
    let t0 = series.times[0];
    let t1 = series.times[series.len() - 1];
    let count = ((t1 - t0) / dt_out * (1.0 + 1e-12)).floor() as usize + 1;
    let mut times = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let t = (t0 + k as f64 * dt_out).min(t1);
        while j + 2 < series.len() && series.times[j + 1] < t {
            j += 1;
        }
        let v = if series.len() == 1 {
            series.values[0]
        } else {
            let (ta, tb) = (series.times[j], series.times[j + 1]);
            let (va, vb) = (series.values[j], series.values[j + 1]);
            let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            if frac == 0.0 {
                va
            } else if frac == 1.0 {
                vb
            } else {
                va + frac * (vb - va)
            }
        };
        if times.last().is_some_and(|&last| t <= last) {
            break;
        }
        times.push(t);
        values.push(v);
    }
    Ok(TimeSeries::new_unchecked(times, values))
}

/// Threshold settings for jump detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpConfig {
    /// Threshold separating the low and high phases.
    pub mu: f64,
    /// Half-width of the transition band `(μ − α, μ + α)`.
    pub alpha: f64,
    pub filter_tau: f64,
}

impl JumpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::out_of_range("alpha", "must be > 0"));
        }
        if !(self.filter_tau >= 0.0) {
            return Err(Error::out_of_range("filter_tau", "must be >= 0"));
        }
        Ok(())
    }
}

/// Two-cluster split of the values minimizing within-cluster variance.
/// Returns the two cluster means `(low, high)`.
pub fn two_cluster_modes(values: &[f64]) -> Option<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut prefix_sq = Vec::with_capacity(n + 1);
    let (mut s, mut s2) = (0.0, 0.0);
    prefix.push(0.0);
    prefix_sq.push(0.0);
    for &x in &v {
        s += x;
        s2 += x * x;
        prefix.push(s);
        prefix_sq.push(s2);
    }
    let sse = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let sum = prefix[b] - prefix[a];
        (prefix_sq[b] - prefix_sq[a]) - sum * sum / m
    };
    let mut best = (f64::INFINITY, 1);
    for k in 1..n {
        if v[k] == v[k - 1] {
            continue;
        }
        let cost = sse(0, k) + sse(k, n);
        if cost < best.0 {
            best = (cost, k);
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    let k = best.1;
    let low = prefix[k] / k as f64;
    let high = (prefix[n] - prefix[k]) / (n - k) as f64;
    Some((low, high))
}

/// Default `(μ, α)`: midpoint of the two value modes and a tenth of their separation.
pub fn default_threshold(values: &[f64]) -> Option<(f64, f64)> {
    let (low, high) = two_cluster_modes(values)?;
    let sep = high - low;
    (sep > 0.0).then_some((0.5 * (low + high), 0.1 * sep))
}

/// Default filter constant: `1/(2π·20δf)` with a known modulation, else ten samples.
pub fn default_filter_tau(delta_f: Option<f64>, sample_spacing: f64) -> f64 {
    match delta_f {
        Some(f) if f > 0.0 => 1.0 / (20.0 * f * 2.0 * std::f64::consts::PI),
        _ => 10.0 * sample_spacing,
    }
}

/// Detected transition times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpEvents {
    pub up_times: Vec<f64>,
    pub down_times: Vec<f64>,
}

impl JumpEvents {
    /// All events in time order, `true` for upward.
    pub fn merged(&self) -> Vec<(f64, bool)> {
        let mut all: Vec<(f64, bool)> = self
            .up_times
            .iter()
            .map(|&t| (t, true))
            .chain(self.down_times.iter().map(|&t| (t, false)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Unknown,
    Low,
    High,
}

/// Hysteresis detection on an (already smoothed) series.
///
/// The phase is LOW below `μ − α` and HIGH above `μ + α`; values inside the
/// band keep the previous phase. A LOW→HIGH change is an upward event, timed
/// at the last interpolated upward crossing of `μ` during the transit.
/// Downward events are symmetric.
pub fn detect_jumps(series: &TimeSeries, cfg: &JumpConfig) -> JumpEvents {
    let (lo, hi) = (cfg.mu - cfg.alpha, cfg.mu + cfg.alpha);
    let t = &series.times;
    let v = &series.values;
    let mut events = JumpEvents::default();
    let mut phase = Phase::Unknown;
    // last sample index still inside the old phase
    let mut anchor = 0usize;
    for i in 0..series.len() {
        let x = v[i];
        let now = if x < lo {
            Phase::Low
        } else if x > hi {
            Phase::High
        } else {
            continue;
        };
        match (phase, now) {
            (Phase::Low, Phase::High) => events.up_times.push(crossing(t, v, anchor, i, cfg.mu, true)),
            (Phase::High, Phase::Low) => events.down_times.push(crossing(t, v, anchor, i, cfg.mu, false)),
            _ => {}
        }
        phase = now;
        anchor = i;
    }
    events
}

/// Last crossing of `mu` in the requested direction within samples `[from, to]`.
fn crossing(t: &[f64], v: &[f64], from: usize, to: usize, mu: f64, upward: bool) -> f64 {
    for k in (from..to).rev() {
        let (a, b) = (v[k], v[k + 1]);
        let crosses = if upward { a < mu && b >= mu } else { a > mu && b <= mu };
        if crosses {
            let frac = (mu - a) / (b - a);
            return t[k] + frac * (t[k + 1] - t[k]);
        }
    }
    t[to]
}

/// Differences of consecutive upward-jump times.
pub fn upward_intervals(events: &JumpEvents) -> Vec<f64> {
    events.up_times.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Differences of consecutive downward-jump times.
pub fn downward_intervals(events: &JumpEvents) -> Vec<f64> {
    events.down_times.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Counts of intervals in bins `[k·w, (k+1)·w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub total_events: u64,
}

impl IntervalHistogram {
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len()).map(|k| k as f64 * self.bin_width).collect()
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width
    }

    pub fn span(&self) -> f64 {
        self.counts.len() as f64 * self.bin_width
    }

    /// Sum of counts in bins whose centers fall in `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> u64 {
        (0..self.counts.len())
            .filter(|&k| (lo..=hi).contains(&self.bin_center(k)))
            .map(|k| self.counts[k])
            .sum()
    }

    /// Bin-wise sum of two histograms with the same width.
    pub fn merge(&self, other: &IntervalHistogram) -> IntervalHistogram {
        assert_eq!(self.bin_width, other.bin_width);
        let len = self.counts.len().max(other.counts.len());
        let counts = (0..len)
            .map(|k| self.counts.get(k).copied().unwrap_or(0) + other.counts.get(k).copied().unwrap_or(0))
            .collect();
        IntervalHistogram {
            bin_width: self.bin_width,
            counts,
            total_events: self.total_events + other.total_events,
        }
    }
}

/// Pools interval sets into one histogram. Bins start at 0 and extend to
/// cover both the largest interval and `min_span`.
pub fn build_histogram<S: AsRef<[f64]>>(pools: &[S], bin_width: f64, min_span: f64) -> IntervalHistogram {
    assert!(bin_width > 0.0, "bin width must be positive");
    let bin_of = |x: f64| (x / bin_width).floor().max(0.0) as usize;
    let max = pools
        .iter()
        .flat_map(|p| p.as_ref().iter().copied())
        .fold(0.0f64, f64::max);
    let mut len = bin_of(max) + 1;
    len = len.max((min_span / bin_width - 1e-9).ceil().max(0.0) as usize);
    let mut counts = vec![0u64; len];
    let mut total = 0;
    for x in pools.iter().flat_map(|p| p.as_ref().iter().copied()) {
        counts[bin_of(x)] += 1;
        total += 1;
    }
    IntervalHistogram {
        bin_width,
        counts,
        total_events: total,
    }
}

/// Peak heights and the resulting contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast {
    pub value: f64,
    pub first_peak_bin: usize,
    pub second_peak_bin: usize,
    pub h1: u64,
    pub h2: u64,
    pub h_min: u64,
}

/// `C = (h₂ − h_min)/h₂` for the peaks near `T` and `2T`.
///
/// The first peak is the largest bin with center in `[0.5T, 1.5T]`, the second
/// the largest in `[1.5T, 2.5T]` (earliest bin on ties); `h_min` is the lowest
/// bin strictly between them, capped at `h₂`.
pub fn contrast(h: &IntervalHistogram, period: f64) -> Result<Contrast> {
    if h.span() + 1e-9 * period < 2.5 * period {
        return Err(Error::HistogramTooShort { needed: 2.5 * period });
    }
    let argmax = |lo: f64, hi: f64| {
        let mut best: Option<(usize, u64)> = None;
        for k in 0..h.counts.len() {
            let c = h.bin_center(k);
            if c < lo || c > hi {
                continue;
            }
            if best.is_none_or(|(_, v)| h.counts[k] > v) {
                best = Some((k, h.counts[k]));
            }
        }
        best
    };
    let (p1, h1) = argmax(0.5 * period, 1.5 * period).ok_or(Error::HistogramTooShort { needed: 1.5 * period })?;
    let (p2, h2) = argmax(1.5 * period, 2.5 * period).ok_or(Error::HistogramTooShort { needed: 2.5 * period })?;
    if h2 == 0 {
        return Err(Error::NoSecondPeak);
    }
    let h_min = h.counts[p1 + 1..p2].iter().copied().min().unwrap_or(h2).min(h2);
    Ok(Contrast {
        value: (h2 - h_min) as f64 / h2 as f64,
        first_peak_bin: p1,
        second_peak_bin: p2,
        h1,
        h2,
        h_min,
    })
}

/// Window for the optimum-detuning criterion, in units of `T`.
pub const OPTIMUM_WINDOW: (f64, f64) = (1.85, 2.15);

/// Number of intervals within `[1.85T, 2.15T]`.
pub fn window_count(intervals: &[f64], period: f64) -> u64 {
    let (lo, hi) = (OPTIMUM_WINDOW.0 * period, OPTIMUM_WINDOW.1 * period);
    intervals.iter().filter(|&&x| x >= lo && x <= hi).count() as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetuningScan {
    pub best_delta: f64,
    /// `(Δ, window count)` for every grid point, in grid order.
    pub counts: Vec<(f64, u64)>,
}

/// Runs `runner` (pooled upward intervals for a detuning) over the grid and
/// picks the detuning with the most intervals in the `2T` window; ties go
/// to the smaller `|Δ|`.
pub fn optimum_detuning_scan<F>(mut runner: F, delta_grid: &[f64], period: f64) -> Result<DetuningScan>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if delta_grid.is_empty() {
        return Err(Error::Config("detuning grid is empty".into()));
    }
    let mut counts = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        counts.push((delta, window_count(&runner(delta)?, period)));
    }
    let best = counts
        .iter()
        .copied()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.abs().total_cmp(&a.0.abs())))
        .expect("non-empty grid");
    if best.1 == 0 {
        return Err(Error::AllZeroCounts);
    }
    Ok(DetuningScan {
        best_delta: best.0,
        counts,
    })
}

/// Jump extraction for one trajectory: filter, then detect.
pub fn analyze_series(series: &TimeSeries, cfg: &JumpConfig) -> JumpEvents {
    detect_jumps(&low_pass(series, cfg.filter_tau), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(times: Vec<f64>, values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(times, values).unwrap()
    }

    fn uniform(dt: f64, values: Vec<f64>) -> TimeSeries {
        let times = (0..values.len()).map(|i| i as f64 * dt).collect();
        series(times, values)
    }

    fn square_wave(period: f64, dt: f64, cycles: usize) -> TimeSeries {
        let n = (period * cycles as f64 / dt) as usize;
        uniform(
            dt,
            (0..n)
                .map(|i| if ((i as f64 * dt) / period).fract() < 0.5 { 0.0 } else { 1.0 })
                .collect(),
        )
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_tau_is_identity_and_dc_passes() {
        let s = uniform(0.1, vec![0.3, 1.2, -0.4, 2.0]);
        assert_eq!(low_pass(&s, 0.0), s);
        let flat = uniform(0.1, vec![0.7; 50]);
        for v in low_pass(&flat, 3.0).values() {
            assert!((v - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn step_response_reaches_one_minus_inv_e_at_tau() {
        let tau = 2.0;
        let dt = tau / 50.0;
        let edge = 100;
        let s = uniform(dt, (0..400).map(|i| if i >= edge { 1.0 } else { 0.0 }).collect());
        let y = low_pass(&s, tau);
        let at_tau = y.values()[edge + 50];
        assert!((at_tau - (1.0 - (-1.0f64).exp())).abs() < 0.02 * (1.0 - (-1.0f64).exp()), "{at_tau}");
    }

    #[test]
    fn resample_examples() {
        let s = uniform(0.5, vec![0.0, 1.0, 4.0, 9.0]);
        assert_eq!(resample_linear(&s, 0.5).unwrap(), s);
        let two = series(vec![0.0, 1.0], vec![0.0, 1.0]);
        let r = resample_linear(&two, 0.5).unwrap();
        assert_eq!(r.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(r.values()[1], 0.5);
        let empty = TimeSeries::new(vec![], vec![]).unwrap();
        assert!(matches!(resample_linear(&empty, 1.0), Err(Error::EmptySeries)));
    }

    #[test]
    fn square_wave_intervals() {
        let s = square_wave(10.0, 0.05, 8);
        let ev = detect_jumps(&s, &JumpConfig { mu: 0.5, alpha: 0.1, filter_tau: 0.0 });
        assert_eq!(ev.up_times.len(), 8);
        for d in upward_intervals(&ev) {
            assert!((d - 10.0).abs() <= 0.05 + 1e-9, "{d}");
        }
    }

    #[test]
    fn ramp_stalling_in_band_has_no_events() {
        let s = uniform(1.0, (0..100).map(|i| (i as f64 / 100.0).min(0.55)).collect());
        let ev = detect_jumps(&s, &JumpConfig { mu: 0.5, alpha: 0.1, filter_tau: 0.0 });
        assert!(ev.up_times.is_empty() && ev.down_times.is_empty());
    }

    #[test]
    fn interval_examples() {
        let ev = JumpEvents { up_times: vec![1.0, 4.0, 9.0], down_times: vec![] };
        assert_eq!(upward_intervals(&ev), vec![3.0, 5.0]);
        let one = JumpEvents { up_times: vec![2.0], down_times: vec![] };
        assert!(upward_intervals(&one).is_empty());
    }

    #[test]
    fn histogram_examples() {
        let h = build_histogram(&[vec![1.0, 1.1, 2.9]], 1.0, 0.0);
        assert_eq!(h.counts, vec![0, 2, 1]);
        assert_eq!(h.total_events, 3);
        let e = build_histogram::<Vec<f64>>(&[], 1.0, 5.0);
        assert!(e.counts.iter().all(|&c| c == 0) && e.total_events == 0);
        assert_eq!(e.counts.len(), 5);
    }

    #[test]
    fn pooling_twice_doubles_counts() {
        let d = vec![3.0, 5.0, 5.5, 12.0];
        let once = build_histogram(std::slice::from_ref(&d), 1.0, 0.0);
        let twice = build_histogram(&[d.clone(), d], 1.0, 0.0);
        for (a, b) in once.counts.iter().zip(&twice.counts) {
            assert_eq!(2 * a, *b);
        }
        assert_eq!(once.merge(&once), twice);
    }

    fn hist_from(counts: Vec<u64>, bw: f64) -> IntervalHistogram {
        let total = counts.iter().sum();
        IntervalHistogram { bin_width: bw, counts, total_events: total }
    }

    #[test]
    fn contrast_examples() {
        let t = 100.0;
        let bw = t / 20.0;
        // spikes at T and 2T (bins 20 and 40), nothing between
        let mut c = vec![0u64; 60];
        c[20] = 50;
        c[40] = 30;
        assert_eq!(contrast(&hist_from(c.clone(), bw), t).unwrap().value, 1.0);
        assert_eq!(contrast(&hist_from(vec![7; 60], bw), t).unwrap().value, 0.0);
        let mut v = vec![50u64; 60];
        v[20] = 200;
        v[40] = 100;
        assert!((contrast(&hist_from(v, bw), t).unwrap().value - 0.5).abs() < 1e-15);
        let mut none = vec![0u64; 60];
        none[20] = 10;
        assert!(matches!(contrast(&hist_from(none, bw), t), Err(Error::NoSecondPeak)));
        assert!(matches!(contrast(&hist_from(vec![1; 30], bw), t), Err(Error::HistogramTooShort { .. })));
    }

    #[test]
    fn default_threshold_splits_two_levels() {
        let mut v = vec![0.01; 500];
        v.extend(vec![0.3; 300]);
        let (mu, alpha) = default_threshold(&v).unwrap();
        assert!((mu - 0.155).abs() < 1e-12);
        assert!((alpha - 0.029).abs() < 1e-12);
        assert!(default_threshold(&[1.0; 10]).is_none());
    }

    #[test]
    fn scan_picks_synthetic_optimum() {
        let t = 100.0;
        let grid = [-4.3, -4.2, -4.15, -4.1, -4.0];
        let scan = optimum_detuning_scan(
            |d| Ok(if d == -4.15 { vec![2.0 * t; 5] } else { vec![0.5 * t, 3.0 * t] }),
            &grid,
            t,
        )
        .unwrap();
        assert_eq!(scan.best_delta, -4.15);
        assert_eq!(scan.counts[2], (-4.15, 5));
        assert!(matches!(optimum_detuning_scan(|_| Ok(vec![]), &grid, t), Err(Error::AllZeroCounts)));
        let tie = optimum_detuning_scan(|_| Ok(vec![2.0 * t]), &[-3.0, 2.0, -1.0], t).unwrap();
        assert_eq!(tie.best_delta, -1.0);
    }

    proptest! {
        #[test]
        fn events_alternate(values in proptest::collection::vec(0.0f64..1.0, 2..400), alpha in 0.01f64..0.3) {
            let s = uniform(1.0, values);
            let ev = detect_jumps(&s, &JumpConfig { mu: 0.5, alpha, filter_tau: 0.0 });
            let merged = ev.merged();
            for w in merged.windows(2) {
                prop_assert!(w[0].1 != w[1].1);
                prop_assert!(w[1].0 > w[0].0);
            }
            prop_assert!(upward_intervals(&ev).iter().all(|&d| d > 0.0));
        }

        #[test]
        fn histogram_conserves(d in proptest::collection::vec(0.0f64..500.0, 0..200), bw in 0.5f64..20.0) {
            let h = build_histogram(std::slice::from_ref(&d), bw, 0.0);
            prop_assert_eq!(h.counts.iter().sum::<u64>(), d.len() as u64);
            prop_assert_eq!(h.total_events, d.len() as u64);
        }

        #[test]
        fn resample_stays_in_range(values in proptest::collection::vec(-10.0f64..10.0, 2..50), dt in 0.05f64..3.0) {
            let s = uniform(1.0, values.clone());
            let r = resample_linear(&s, dt).unwrap();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r.values().iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn contrast_is_bounded(counts in proptest::collection::vec(0u64..100, 60..80)) {
            let h = hist_from(counts, 5.0);
            if let Ok(c) = contrast(&h, 100.0) {
                prop_assert!((0.0..=1.0).contains(&c.value));
            }
        }
    }
}
