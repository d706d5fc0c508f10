//! Two-level mean-field model: coherent `(n, q)` dynamics, the adiabatic
//! single-variable reduction, its effective potential and fixed points, and
//! stochastic runs with an Ornstein-Uhlenbeck detuning and periodic modulation.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{NoiseSignal, OuParams, OuProcess};
use crate::ode::rk4_step;
use crate::rng::seeded_stream;
use crate::trajectory::Trajectory;

/// Parameters of the two-level model, in units of the decay rate γ.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelParams {
    pub delta: f64,
    /// Modulation amplitude `A`.
    pub a: f64,
    pub delta_f: f64,
    pub omega: f64,
    pub v: f64,
    pub gamma: f64,
    pub gamma_d: f64,
    pub kappa: f64,
    /// OU noise strength; the noise term is `γ√D dB`.
    pub d: f64,
    pub dt: f64,
    pub t_total: f64,
}

impl Default for TwoLevelParams {
    /// The bistable point with the telegraph-noise settings.
    fn default() -> Self {
        Self {
            delta: 18.5,
            a: 0.0,
            delta_f: 0.01,
            omega: 2.0,
            v: 100.0,
            gamma: 1.0,
            gamma_d: 10.0,
            kappa: 0.1,
            d: 1.0,
            dt: 1e-3,
            t_total: 10_000.0,
        }
    }
}

impl TwoLevelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::out_of_range("gamma", "must be > 0"));
        }
        for (key, v) in [("gamma_D", self.gamma_d), ("kappa", self.kappa), ("D", self.d), ("delta_f", self.delta_f)] {
            if !(v >= 0.0) {
                return Err(Error::out_of_range(key, format!("must be >= 0, got {v}")));
            }
        }
        for (key, v) in [("dt", self.dt), ("t_total", self.t_total)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::out_of_range(key, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `Γ = (γ + γ_D)/2`.
    pub fn big_gamma(&self) -> f64 {
        0.5 * (self.gamma + self.gamma_d)
    }

    pub fn period(&self) -> f64 {
        1.0 / self.delta_f
    }

    pub fn ou(&self) -> OuParams {
        OuParams {
            kappa: self.kappa,
            d: self.d,
            gamma: self.gamma,
        }
    }
}

/// Mean-field Rydberg density and `|r⟩⟨g|` coherence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    pub n: f64,
    pub q: Complex64,
}

impl Add for TwoLevelState {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self {
            n: self.n + rhs.n,
            q: self.q + rhs.q,
        }
    }
}

impl Mul<f64> for TwoLevelState {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Self {
            n: self.n * rhs,
            q: self.q * rhs,
        }
    }
}

/// `Δ − A cos(2πδf t)`.
#[inline]
pub fn modulated_detuning(t: f64, p: &TwoLevelParams) -> f64 {
    if p.a == 0.0 {
        return p.delta;
    }
    p.delta - p.a * (2.0 * PI * p.delta_f * t).cos()
}

/// Coherent mean-field equations for `(n, q)` with extra detuning `delta_s`.
#[inline]
pub fn full_rhs(t: f64, s: &TwoLevelState, p: &TwoLevelParams, delta_s: f64) -> TwoLevelState {
    let i = Complex64::i();
    let detuning = modulated_detuning(t, p) + delta_s - s.n * p.v;
    let dn = p.omega * s.q.im - p.gamma * s.n;
    let dq = -i * detuning * s.q - i * p.omega * s.n - p.big_gamma() * s.q + i * (0.5 * p.omega);
    TwoLevelState { n: dn, q: dq }
}

/// Coherence on its nullcline, `q*(n)`, for instantaneous detuning `delta_inst`.
pub fn adiabatic_coherence(n: f64, delta_inst: f64, p: &TwoLevelParams) -> Complex64 {
    let i = Complex64::i();
    (i * (0.5 * p.omega) - i * (p.omega * n)) / (i * (delta_inst - n * p.v) + p.big_gamma())
}

/// Density dynamics after eliminating the coherence.
#[inline]
pub fn adiabatic_rhs(n: f64, delta_inst: f64, p: &TwoLevelParams) -> f64 {
    let g = p.big_gamma();
    let u = delta_inst - n * p.v;
    -p.omega * p.omega * g * (n - 0.5) / (g * g + u * u) - p.gamma * n
}

/// `∂ₙ adiabatic_rhs`, analytic.
pub fn adiabatic_rhs_derivative(n: f64, delta_inst: f64, p: &TwoLevelParams) -> f64 {
    let g = p.big_gamma();
    let u = delta_inst - n * p.v;
    let den = g * g + u * u;
    -p.omega * p.omega * g * (den + 2.0 * u * p.v * (n - 0.5)) / (den * den) - p.gamma
}

/// Effective potential `E(n)` with `ṅ = −∂ₙE`.
pub fn potential(n: f64, delta_inst: f64, p: &TwoLevelParams) -> Result<f64> {
    if p.v == 0.0 {
        return Err(Error::DegenerateInteraction);
    }
    let g = p.big_gamma();
    let v = p.v;
    let u = delta_inst - n * v;
    let w2 = p.omega * p.omega;
    Ok(0.5 * p.gamma * n * n - (w2 / v) * (delta_inst / v - 0.5) * (u / g).atan()
        + (w2 * g / (2.0 * v * v)) * (u * u / (g * g)).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// Derivative too close to zero to classify (on a spinodal).
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub n: f64,
    pub stability: Stability,
}

/// Roots of the adiabatic dynamics on `[0, 1]`, ascending in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSet {
    pub roots: Vec<FixedPoint>,
}

impl FixedPointSet {
    pub fn stable(&self) -> impl Iterator<Item = f64> + '_ {
        self.roots
            .iter()
            .filter(|r| r.stability == Stability::Stable)
            .map(|r| r.n)
    }

    pub fn stable_count(&self) -> usize {
        self.stable().count()
    }

    pub fn has_marginal(&self) -> bool {
        self.roots.iter().any(|r| r.stability == Stability::Marginal)
    }

    pub fn lowest_stable(&self) -> Option<f64> {
        self.stable().next()
    }

    pub fn highest_stable(&self) -> Option<f64> {
        self.stable().last()
    }
}

const SCAN_POINTS: usize = 2001;
const ROOT_TOLERANCE: f64 = 1e-10;
const MARGINAL_SLOPE: f64 = 1e-8;

/// Bisection on a sign-changing bracket until `|f| < ROOT_TOLERANCE` or the
/// bracket collapses to adjacent floats.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return if f(lo).abs() <= f(hi).abs() { lo } else { hi };
        }
        let fm = f(mid);
        if fm == 0.0 || (fm.abs() < ROOT_TOLERANCE && hi - lo < 1e-12) {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}

/// All fixed points of the adiabatic dynamics on `[0, 1]` at detuning `delta_inst`.
pub fn fixed_points(p: &TwoLevelParams, delta_inst: f64) -> FixedPointSet {
    let f = |n: f64| adiabatic_rhs(n, delta_inst, p);
    let step = 1.0 / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| i as f64 * step).collect();
    let values: Vec<f64> = grid.iter().map(|&n| f(n)).collect();
    let mut roots = Vec::new();
    for i in 0..SCAN_POINTS {
        if values[i] == 0.0 {
            roots.push(grid[i]);
        } else if i + 1 < SCAN_POINTS && values[i + 1] != 0.0 && (values[i] < 0.0) != (values[i + 1] < 0.0) {
            roots.push(bisect(f, grid[i], grid[i + 1]));
        }
    }
    let roots = roots
        .into_iter()
        .map(|n| {
            let slope = adiabatic_rhs_derivative(n, delta_inst, p);
            let stability = if slope.abs() < MARGINAL_SLOPE {
                Stability::Marginal
            } else if slope < 0.0 {
                Stability::Stable
            } else {
                Stability::Unstable
            };
            FixedPoint { n, stability }
        })
        .collect();
    FixedPointSet { roots }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub delta: f64,
    pub omega: f64,
    pub stable_count: usize,
    /// A root could not be classified; the cell lies on a spinodal.
    pub boundary: bool,
}

/// Stable-root counts over a `(Δ, Ω)` grid, Δ-major order.
pub fn phase_diagram(delta_range: &[f64], omega_range: &[f64], p: &TwoLevelParams) -> Result<Vec<PhaseCell>> {
    if delta_range.is_empty() || omega_range.is_empty() {
        return Err(Error::Config("phase diagram grids must be non-empty".into()));
    }
    let cells = delta_range
        .par_iter()
        .flat_map_iter(|&delta| {
            omega_range.iter().map(move |&omega| {
                let q = TwoLevelParams { delta, omega, ..p.clone() };
                let fp = fixed_points(&q, delta);
                PhaseCell {
                    delta,
                    omega,
                    stable_count: fp.stable_count(),
                    boundary: fp.has_marginal(),
                }
            })
        })
        .collect();
    Ok(cells)
}

/// Deterministic integration of the coherent `(n, q)` equations at `δ_S = 0`.
pub fn integrate_full(p: &TwoLevelParams, s0: TwoLevelState, duration: f64) -> Result<TwoLevelState> {
    p.validate()?;
    let steps = (duration / p.dt).round() as u64;
    let mut rhs = |t: f64, s: TwoLevelState| full_rhs(t, &s, p, 0.0);
    let mut s = s0;
    for i in 0..steps {
        s = rk4_step(&mut rhs, i as f64 * p.dt, s, p.dt);
        if !(s.n.is_finite() && s.q.re.is_finite() && s.q.im.is_finite()) {
            return Err(Error::NonFiniteState { time: (i + 1) as f64 * p.dt });
        }
    }
    Ok(s)
}

/// Output sampling for stochastic runs: `min(T/200, 1/2γ)`, never below `dt`.
pub fn default_dt_out(p: &TwoLevelParams) -> f64 {
    let mut dt_out: f64 = 0.5;
    if p.delta_f > 0.0 {
        dt_out = dt_out.min(p.period() / 200.0);
    }
    dt_out.max(p.dt)
}

/// Initial density for stochastic runs: the lowest stable root at `t = 0`.
pub fn initial_density(p: &TwoLevelParams) -> f64 {
    let fp = fixed_points(p, modulated_detuning(0.0, p));
    fp.lowest_stable()
        .or_else(|| fp.roots.first().map(|r| r.n))
        .unwrap_or(0.0)
}

/// Source of the OU detuning `Δ_S` for a stochastic run.
#[derive(Debug, Clone, Copy)]
pub enum DetuningNoise<'a> {
    /// Exact OU steps drawn from stream `(base_seed, index)`.
    Ou { base_seed: u64, index: u64 },
    /// A previously dumped (or external) trace, linearly interpolated.
    Replay(&'a NoiseSignal),
}

/// One stochastic realization of the adiabatic dynamics with OU detuning noise.
///
/// The OU value is advanced exactly on the `dt` grid and held fixed within
/// each RK4 step; the periodic modulation is evaluated at the stage times.
pub fn integrate_stochastic_two_level(p: &TwoLevelParams, base_seed: u64, index: u64, dt_out: f64) -> Result<Trajectory> {
    let mut traj = integrate_with_noise(p, DetuningNoise::Ou { base_seed, index }, dt_out)?;
    traj.seed = base_seed;
    traj.index = index;
    Ok(traj)
}

pub fn integrate_with_noise(p: &TwoLevelParams, noise: DetuningNoise<'_>, dt_out: f64) -> Result<Trajectory> {
    p.validate()?;
    let steps = (p.t_total / p.dt).round() as u64;
    let stride = ((dt_out / p.dt).round() as u64).max(1);
    let mut source: Box<dyn FnMut(u64) -> f64 + '_> = match noise {
        DetuningNoise::Ou { base_seed, index } => {
            let mut rng = seeded_stream(base_seed, index);
            let mut ou = OuProcess::new(p.ou(), p.dt, 0.0);
            Box::new(move |i| if i == 0 { ou.value() } else { ou.advance(&mut rng) })
        }
        DetuningNoise::Replay(signal) => {
            if !signal.covers(0.0, p.t_total) {
                return Err(Error::OutOfSpan {
                    time: p.t_total,
                    start: signal.start(),
                    end: signal.end(),
                });
            }
            Box::new(move |i| signal.eval_clamped(i as f64 * p.dt))
        }
    };

    let mut n = initial_density(p);
    let cap = (steps / stride + 1) as usize;
    let mut times = Vec::with_capacity(cap);
    let mut values = Vec::with_capacity(cap);
    times.push(0.0);
    values.push(n);

    for i in 0..steps {
        let t = i as f64 * p.dt;
        let delta_s = source(i);
        let mut rhs = |t: f64, n: f64| adiabatic_rhs(n, modulated_detuning(t, p) + delta_s, p);
        n = rk4_step(&mut rhs, t, n, p.dt);
        if (i + 1) % stride == 0 {
            if !n.is_finite() {
                return Err(Error::NonFiniteState { time: t + p.dt });
            }
            times.push((i + 1) as f64 * p.dt);
            values.push(n);
        }
    }
    if !n.is_finite() {
        return Err(Error::NonFiniteState { time: p.t_total });
    }
    Ok(Trajectory {
        times,
        values,
        seed: 0,
        index: 0,
    })
}

/// The `Δ_S` path seen by trajectory `index`, sampled every `dt_out`.
pub fn ou_path(p: &TwoLevelParams, base_seed: u64, index: u64, dt_out: f64) -> (Vec<f64>, Vec<f64>) {
    let steps = (p.t_total / p.dt).round() as u64;
    let stride = ((dt_out / p.dt).round() as u64).max(1);
    let mut rng = seeded_stream(base_seed, index);
    let mut ou = OuProcess::new(p.ou(), p.dt, 0.0);
    let mut times = vec![0.0];
    let mut values = vec![0.0];
    // step i of the integrator holds the value after i draws; the path is
    // extended to a whole number of output samples so that it covers t_total
    let last = steps.div_ceil(stride) * stride;
    for i in 1..=last {
        let v = ou.advance(&mut rng);
        if i % stride == 0 {
            times.push(i as f64 * p.dt);
            values.push(v);
        }
    }
    (times, values)
}

/// `n_traj` independent stochastic realizations, deterministic in `(p, base_seed)`.
pub fn run_ensemble(p: &TwoLevelParams, n_traj: usize, base_seed: u64, dt_out: f64) -> Result<Vec<Trajectory>> {
    if n_traj == 0 {
        return Err(Error::out_of_range("n_traj", "must be >= 1"));
    }
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            integrate_stochastic_two_level(p, base_seed, i, dt_out)
                .map_err(|e| Error::Trajectory { index: i as usize, source: Box::new(e) })
        })
        .collect()
}
