//! Mean-field Lindblad dynamics of the three-level ladder `|g⟩, |r⟩, |s⟩`
//! with a dual-tone microwave coupling `|r⟩ ↔ |s⟩`.
//!
//! Interactions enter as population-dependent shifts of the two Rydberg
//! detunings, and detuning noise shifts the bare detuning of both levels.
//! Both Rydberg levels decay to the ground state.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{generate_white_noise, NoiseMode, NoiseSignal};
use crate::ode::rk4_step;
use crate::rng::seeded_stream;
use crate::trajectory::Trajectory;

const G: usize = 0;
const R: usize = 1;
const S: usize = 2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// 3×3 density matrix in the basis `(g, r, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3(pub [[Complex64; 3]; 3]);

impl DensityMatrix3 {
    pub fn zero() -> Self {
        Self([[ZERO; 3]; 3])
    }

    /// Projector onto basis state `k` (0 = g, 1 = r, 2 = s).
    pub fn basis(k: usize) -> Self {
        let mut m = Self::zero();
        m.0[k][k] = Complex64::new(1.0, 0.0);
        m
    }

    pub fn ground() -> Self {
        Self::basis(G)
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.0[j][k]
    }

    pub fn rho_rr(&self) -> f64 {
        self.0[R][R].re
    }

    pub fn rho_ss(&self) -> f64 {
        self.0[S][S].re
    }

    /// Rydberg population `ρ_rr + ρ_ss`.
    pub fn rydberg_population(&self) -> f64 {
        self.0[R][R].re + self.0[S][S].re
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Largest `|ρ_jk − conj(ρ_kj)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..3 {
            for k in j..3 {
                worst = worst.max((self.0[j][k] - self.0[k][j].conj()).norm());
            }
        }
        worst
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Eigenvalues of the Hermitian part, ascending, from the roots of the
    /// characteristic cubic (trigonometric form).
    pub fn eigenvalues(&self) -> [f64; 3] {
        let a = |j: usize, k: usize| 0.5 * (self.0[j][k] + self.0[k][j].conj());
        let (a00, a11, a22) = (a(0, 0).re, a(1, 1).re, a(2, 2).re);
        let (a01, a02, a12) = (a(0, 1), a(0, 2), a(1, 2));
        let off = a01.norm_sqr() + a02.norm_sqr() + a12.norm_sqr();
        let q = (a00 + a11 + a22) / 3.0;
        let (b00, b11, b22) = (a00 - q, a11 - q, a22 - q);
        let p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off;
        if p2 <= 1e-300 {
            return [q; 3];
        }
        let p = (p2 / 6.0).sqrt();
        // det(B) for the Hermitian B = A − qI
        let det = b00 * b11 * b22 + 2.0 * (a01 * a12 * a02.conj()).re
            - b00 * a12.norm_sqr()
            - b11 * a02.norm_sqr()
            - b22 * a01.norm_sqr();
        let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        let mid = 3.0 * q - hi - lo;
        [lo, mid, hi]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `self · other`.
    #[inline]
    pub fn matmul(&self, other: &Self) -> Self {
        let mut out = [[ZERO; 3]; 3];
        for (j, row) in out.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = self.0[j][0] * other.0[0][k]
                    + self.0[j][1] * other.0[1][k]
                    + self.0[j][2] * other.0[2][k];
            }
        }
        Self(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = [[ZERO; 3]; 3];
        for (j, row) in out.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = self.0[k][j].conj();
            }
        }
        Self(out)
    }
}

impl Add for DensityMatrix3 {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        for j in 0..3 {
            for k in 0..3 {
                self.0[j][k] += rhs.0[j][k];
            }
        }
        self
    }
}

impl Sub for DensityMatrix3 {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        for j in 0..3 {
            for k in 0..3 {
                self.0[j][k] -= rhs.0[j][k];
            }
        }
        self
    }
}

impl Mul<f64> for DensityMatrix3 {
    type Output = Self;
    #[inline]
    fn mul(mut self, rhs: f64) -> Self {
        for j in 0..3 {
            for k in 0..3 {
                self.0[j][k] *= rhs;
            }
        }
        self
    }
}

/// Parameters of the three-level model, all in units of the decay rate γ.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLevelParams {
    pub gamma_r: f64,
    pub gamma_s: f64,
    /// Probe Rabi frequency `|g⟩ ↔ |r⟩`.
    pub omega: f64,
    pub delta: f64,
    /// Mean-field shifts `(V1, V2, V3, V4)`.
    pub v: [f64; 4],
    pub omega_mw1: f64,
    pub omega_mw2: f64,
    pub delta_f: f64,
    pub noise_sigma: f64,
    pub dt: f64,
    pub t_total: f64,
}

impl Default for ThreeLevelParams {
    /// The strongest-drive point of the dual-tone study.
    fn default() -> Self {
        Self {
            gamma_r: 1.0,
            gamma_s: 1.0,
            omega: 1.0,
            delta: -4.15,
            v: [-10.0, -5.0, -30.0, -15.0],
            omega_mw1: 3.0,
            omega_mw2: 0.949,
            delta_f: 0.01,
            noise_sigma: 0.2,
            dt: 1e-3,
            t_total: 10_000.0,
        }
    }
}

impl ThreeLevelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_r", self.gamma_r),
            ("gamma_s", self.gamma_s),
            ("dt", self.dt),
            ("t_total", self.t_total),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::out_of_range(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.delta_f >= 0.0) {
            return Err(Error::out_of_range("delta_f", "must be >= 0"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::out_of_range("noise_sigma", "must be >= 0"));
        }
        Ok(())
    }

    /// Modulation period `1/δf` (infinite for a single tone).
    pub fn period(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Relative strength of the second tone in dB, `20·log10(Ω_MW2/Ω_MW1)`.
    pub fn beta_db(&self) -> Option<f64> {
        (self.omega_mw1 > 0.0 && self.omega_mw2 > 0.0)
            .then(|| 20.0 * (self.omega_mw2 / self.omega_mw1).log10())
    }

    /// Second-tone amplitude giving `beta_db` relative to the first tone.
    pub fn omega_mw2_for_beta(omega_mw1: f64, beta_db: f64) -> f64 {
        omega_mw1 * 10f64.powf(beta_db / 20.0)
    }
}

/// `Ω_MW1 + Ω_MW2·exp(−i2πδf t)`.
#[inline]
pub fn dual_tone_rabi(t: f64, p: &ThreeLevelParams) -> Complex64 {
    let (sin, cos) = (2.0 * PI * p.delta_f * t).sin_cos();
    Complex64::new(p.omega_mw1 + p.omega_mw2 * cos, -p.omega_mw2 * sin)
}

/// Interaction-shifted detunings of `|r⟩` and `|s⟩` with the noise `w` added to Δ.
#[inline]
pub fn effective_detunings(rho: &DensityMatrix3, p: &ThreeLevelParams, w: f64) -> (f64, f64) {
    let (rr, ss) = (rho.rho_rr(), rho.rho_ss());
    let base = p.delta + w;
    (base - p.v[0] * rr - p.v[1] * ss, base - p.v[2] * rr - p.v[3] * ss)
}

/// Rotating-frame Hamiltonian for the current state (through the mean-field shifts).
pub fn hamiltonian(t: f64, rho: &DensityMatrix3, p: &ThreeLevelParams, w: f64) -> DensityMatrix3 {
    let (d1, d2) = effective_detunings(rho, p, w);
    let omega_s = dual_tone_rabi(t, p);
    let half_probe = Complex64::new(0.5 * p.omega, 0.0);
    DensityMatrix3([
        [ZERO, half_probe, ZERO],
        [half_probe.conj(), Complex64::new(-d1, 0.0), 0.5 * omega_s],
        [ZERO, 0.5 * omega_s.conj(), Complex64::new(-d2, 0.0)],
    ])
}

/// Right-hand side `−i[H, ρ] + Σ D[L_i]ρ` of the mean-field master equation.
///
/// The commutator is formed as `−i(Hρ − (Hρ)†)`, so a Hermitian input yields
/// an exactly Hermitian output in floating point.
#[inline]
pub fn master_rhs(t: f64, rho: &DensityMatrix3, p: &ThreeLevelParams, w: f64) -> DensityMatrix3 {
    let h = hamiltonian(t, rho, p, w);
    let m = h.matmul(rho);
    let decay = [0.0, p.gamma_r, p.gamma_s];
    let mut out = [[ZERO; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            let comm = m.0[j][k] - m.0[k][j].conj();
            // −i·comm
            let unitary = Complex64::new(comm.im, -comm.re);
            out[j][k] = unitary - 0.5 * (decay[j] + decay[k]) * rho.0[j][k];
        }
    }
    out[G][G] += Complex64::new(p.gamma_r * rho.0[R][R].re + p.gamma_s * rho.0[S][S].re, 0.0);
    DensityMatrix3(out)
}

/// Integration health recorded while a trajectory is produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    /// Number of recorded samples whose lowest eigenvalue fell below −1e−6.
    pub positivity_violations: usize,
    pub final_state: DensityMatrix3,
    pub steps: u64,
}

/// Soft positivity threshold for the monitor.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// Integrates one realization with fixed-step RK4, recording `n_R` every `dt_out`.
pub fn integrate_three_level(
    p: &ThreeLevelParams,
    noise: &NoiseSignal,
    rho0: DensityMatrix3,
    dt_out: f64,
) -> Result<(Trajectory, Diagnostics)> {
    p.validate()?;
    if !(dt_out >= p.dt * (1.0 - 1e-9)) {
        return Err(Error::out_of_range("dt_out", format!("must be >= dt = {}", p.dt)));
    }
    if !noise.covers(0.0, p.t_total) {
        return Err(Error::OutOfSpan {
            time: p.t_total,
            start: noise.start(),
            end: noise.end(),
        });
    }
    let steps = (p.t_total / p.dt).round() as u64;
    let stride = ((dt_out / p.dt).round() as u64).max(1);
    let dt = p.dt;

    let mut diag = Diagnostics {
        max_trace_drift: 0.0,
        max_hermiticity_error: 0.0,
        min_eigenvalue: f64::INFINITY,
        positivity_violations: 0,
        final_state: rho0,
        steps,
    };
    let capacity = (steps / stride + 1) as usize;
    let mut times = Vec::with_capacity(capacity);
    let mut values = Vec::with_capacity(capacity);

    let mut record = |t: f64, rho: &DensityMatrix3, diag: &mut Diagnostics| {
        times.push(t);
        values.push(rho.rydberg_population());
        diag.max_trace_drift = diag.max_trace_drift.max((rho.trace() - 1.0).norm());
        diag.max_hermiticity_error = diag.max_hermiticity_error.max(rho.hermiticity_error());
        let lam = rho.min_eigenvalue();
        diag.min_eigenvalue = diag.min_eigenvalue.min(lam);
        if lam < -POSITIVITY_TOLERANCE {
            diag.positivity_violations += 1;
        }
    };

    let mut rhs = |t: f64, rho: DensityMatrix3| master_rhs(t, &rho, p, noise.eval_clamped(t));
    let mut rho = rho0;
    record(0.0, &rho, &mut diag);
    for i in 0..steps {
        let t = i as f64 * dt;
        rho = rk4_step(&mut rhs, t, rho, dt);
        diag.max_trace_drift = diag.max_trace_drift.max((rho.trace() - 1.0).norm());
        diag.max_hermiticity_error = diag.max_hermiticity_error.max(rho.hermiticity_error());
        if (i + 1) % stride == 0 || i + 1 == steps {
            if !rho.is_finite() {
                return Err(Error::NonFiniteState { time: t + dt });
            }
            if (i + 1) % stride == 0 {
                record((i + 1) as f64 * dt, &rho, &mut diag);
            }
        }
    }
    diag.max_trace_drift = diag.max_trace_drift.max((rho.trace() - 1.0).norm());
    diag.max_hermiticity_error = diag.max_hermiticity_error.max(rho.hermiticity_error());
    diag.final_state = rho;
    Ok((
        Trajectory {
            times,
            values,
            seed: 0,
            index: 0,
        },
        diag,
    ))
}

/// Ensemble settings shared by all trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub dt_out: f64,
    pub noise_mode: NoiseMode,
    pub rho0: DensityMatrix3,
}

impl EnsembleOptions {
    pub fn for_params(p: &ThreeLevelParams) -> Self {
        Self {
            dt_out: default_dt_out(p),
            noise_mode: NoiseMode::default(),
            rho0: DensityMatrix3::ground(),
        }
    }
}

/// `T/200`, or `1/γ` without modulation; never below `dt`.
pub fn default_dt_out(p: &ThreeLevelParams) -> f64 {
    let dt_out = if p.delta_f > 0.0 { p.period() / 200.0 } else { 1.0 };
    dt_out.max(p.dt)
}

/// The noise realization used by trajectory `index`.
pub fn trajectory_noise(p: &ThreeLevelParams, mode: NoiseMode, base_seed: u64, index: u64) -> NoiseSignal {
    if p.noise_sigma == 0.0 {
        return NoiseSignal::zero(p.t_total);
    }
    let period = if p.delta_f > 0.0 { p.period() } else { p.t_total };
    let spacing = mode.spacing(p.t_total, period);
    generate_white_noise(p.t_total, spacing, p.noise_sigma, &mut seeded_stream(base_seed, index))
}

/// Runs `n_traj` independent realizations. Results depend only on
/// `(p, opts, base_seed)` and the trajectory index, whatever the thread count.
pub fn run_ensemble(
    p: &ThreeLevelParams,
    n_traj: usize,
    base_seed: u64,
    opts: &EnsembleOptions,
) -> Result<Vec<Trajectory>> {
    if n_traj == 0 {
        return Err(Error::out_of_range("n_traj", "must be >= 1"));
    }
    p.validate()?;
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let noise = trajectory_noise(p, opts.noise_mode, base_seed, i);
            let (mut traj, _) = integrate_three_level(p, &noise, opts.rho0, opts.dt_out)
                .map_err(|e| Error::Trajectory { index: i as usize, source: Box::new(e) })?;
            traj.seed = base_seed;
            traj.index = i;
            Ok(traj)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quiet() -> ThreeLevelParams {
        ThreeLevelParams {
            omega: 0.0,
            omega_mw1: 0.0,
            omega_mw2: 0.0,
            noise_sigma: 0.0,
            ..ThreeLevelParams::default()
        }
    }

    /// Random density matrix `A A† / Tr(A A†)`.
    fn random_rho(entries: &[f64]) -> DensityMatrix3 {
        let mut a = DensityMatrix3::zero();
        for j in 0..3 {
            for k in 0..3 {
                let idx = 2 * (3 * j + k);
                a.0[j][k] = c(entries[idx], entries[idx + 1]);
            }
        }
        let m = a.matmul(&a.adjoint());
        let tr = m.trace().re;
        m * (1.0 / tr)
    }

    #[test]
    fn dual_tone_values() {
        let p = ThreeLevelParams {
            omega_mw1: 3.0,
            omega_mw2: 0.3,
            ..ThreeLevelParams::default()
        };
        assert!((dual_tone_rabi(0.0, &p) - c(3.3, 0.0)).norm() < 1e-15);
        let half = 0.5 / p.delta_f;
        assert!((dual_tone_rabi(half, &p) - c(2.7, 0.0)).norm() < 1e-12);
        let single = ThreeLevelParams { omega_mw2: 0.0, ..p };
        for t in [0.0, 13.7, 250.0] {
            assert_eq!(dual_tone_rabi(t, &single), c(3.0, 0.0));
        }
    }

    #[test]
    fn beta_matches_db_definition() {
        let p = ThreeLevelParams::default();
        assert!((p.beta_db().unwrap() - 20.0 * (0.949f64 / 3.0).log10()).abs() < 1e-12);
        let w = ThreeLevelParams::omega_mw2_for_beta(3.0, -20.0);
        assert!((w - 0.3).abs() < 1e-12);
    }

    #[test]
    fn effective_detuning_examples() {
        let p = ThreeLevelParams::default();
        let (d1, d2) = effective_detunings(&DensityMatrix3::ground(), &p, 0.0);
        assert_eq!((d1, d2), (p.delta, p.delta));

        let mut rho = DensityMatrix3::zero();
        rho.0[0][0] = c(0.7, 0.0);
        rho.0[1][1] = c(0.1, 0.0);
        rho.0[2][2] = c(0.2, 0.0);
        let (d1, _) = effective_detunings(&rho, &p, 0.0);
        assert!((d1 - -2.15).abs() < 1e-12);

        let free = ThreeLevelParams { v: [0.0; 4], ..p };
        let (d1, d2) = effective_detunings(&rho, &free, 0.3);
        assert!((d1 - (free.delta + 0.3)).abs() < 1e-15);
        assert_eq!(d1, d2);
    }

    #[test]
    fn ground_state_is_dark_without_drive() {
        let d = master_rhs(3.0, &DensityMatrix3::ground(), &quiet(), 0.0);
        assert_eq!(d.norm(), 0.0);
    }

    #[test]
    fn pure_decay_rhs() {
        let p = ThreeLevelParams { gamma_r: 0.7, ..quiet() };
        let d = master_rhs(0.0, &DensityMatrix3::basis(R), &p, 0.0);
        let mut expected = DensityMatrix3::zero();
        expected.0[G][G] = c(0.7, 0.0);
        expected.0[R][R] = c(-0.7, 0.0);
        assert!((d - expected).norm() < 1e-15);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let p = ThreeLevelParams::default();
        for t in [0.0, 17.0, 49.9, 1234.5] {
            let h = hamiltonian(t, &DensityMatrix3::basis(S), &p, 0.13);
            assert!(h.hermiticity_error() < 1e-15);
        }
    }

    #[test]
    fn eigenvalues_of_diagonal_and_pure_states() {
        let mut rho = DensityMatrix3::zero();
        rho.0[0][0] = c(0.5, 0.0);
        rho.0[1][1] = c(0.2, 0.0);
        rho.0[2][2] = c(0.3, 0.0);
        let ev = rho.eigenvalues();
        for (a, b) in ev.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        // |ψ⟩ = (1, i, 1)/√3
        let psi = [c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)];
        let mut pure = DensityMatrix3::zero();
        for j in 0..3 {
            for k in 0..3 {
                pure.0[j][k] = psi[j] * psi[k].conj() / 3.0;
            }
        }
        let ev = pure.eigenvalues();
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12 && (ev[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_decay_trajectory() {
        let p = ThreeLevelParams { t_total: 5.0, ..quiet() };
        let noise = NoiseSignal::zero(p.t_total);
        let (traj, diag) = integrate_three_level(&p, &noise, DensityMatrix3::basis(R), 0.1).unwrap();
        for (t, n) in traj.times.iter().zip(&traj.values) {
            assert!((n - (-t).exp()).abs() < 1e-6, "t={t} n={n}");
        }
        assert!(diag.max_trace_drift < 1e-12);
        assert_eq!(traj.times.len(), 51);
    }

    #[test]
    fn blowup_is_reported() {
        let p = ThreeLevelParams {
            dt: 1.0,
            t_total: 200.0,
            noise_sigma: 0.0,
            ..ThreeLevelParams::default()
        };
        let noise = NoiseSignal::zero(p.t_total);
        let err = integrate_three_level(&p, &noise, DensityMatrix3::ground(), 1.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }), "{err}");
    }

    #[test]
    fn uncovered_noise_is_rejected() {
        let p = ThreeLevelParams { t_total: 100.0, ..quiet() };
        let noise = NoiseSignal::zero(50.0);
        assert!(integrate_three_level(&p, &noise, DensityMatrix3::ground(), 1.0).is_err());
    }

    #[test]
    fn ensemble_is_prefix_stable_and_deterministic() {
        let p = ThreeLevelParams { t_total: 200.0, ..ThreeLevelParams::default() };
        let opts = EnsembleOptions::for_params(&p);
        let two = run_ensemble(&p, 2, 11, &opts).unwrap();
        let one = run_ensemble(&p, 1, 11, &opts).unwrap();
        assert_eq!(one[0], two[0]);
        assert_ne!(two[0].values, two[1].values);
        assert_eq!(run_ensemble(&p, 2, 11, &opts).unwrap(), two);
        assert!(run_ensemble(&p, 0, 11, &opts).is_err());
    }

    proptest! {
        #[test]
        fn rhs_is_traceless_and_hermitian(
            entries in proptest::collection::vec(-1.0f64..1.0, 18),
            t in 0.0f64..1000.0,
            w in -1.0f64..1.0,
            omega in 0.0f64..3.0,
            mw2 in 0.0f64..2.0,
        ) {
            let rho = random_rho(&entries);
            let p = ThreeLevelParams { omega, omega_mw2: mw2, ..ThreeLevelParams::default() };
            let d = master_rhs(t, &rho, &p, w);
            prop_assert!(d.trace().norm() < 1e-12);
            prop_assert!(d.hermiticity_error() < 1e-12);
        }

        #[test]
        fn random_states_are_positive(entries in proptest::collection::vec(-1.0f64..1.0, 18)) {
            let rho = random_rho(&entries);
            let ev = rho.eigenvalues();
            prop_assert!(ev[0] > -1e-9);
            prop_assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
