//! Orchestration behind the command-line subcommands. Every command writes
//! its files into an output directory and finishes deterministically: the same
//! configuration and seed give byte-identical files at any thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ModelConfig, RunConfig, SweepMode};
use crate::error::{Error, Result};
use crate::fitting::{fit_histogram, FitOptions, FitResult};
use crate::io::{self, format_kv, write_atomic};
use crate::jumps::{
    build_histogram, contrast, default_filter_tau, default_threshold, detect_jumps, downward_intervals, low_pass,
    optimum_detuning_scan, resample_linear, upward_intervals, window_count, Contrast, IntervalHistogram, JumpConfig,
    TimeSeries,
};
use crate::noise::NoiseSignal;
use crate::rng::GENERATOR_ID;
use crate::three_level::{self, DensityMatrix3, EnsembleOptions};
use crate::trajectory::Trajectory;
use crate::two_level::{self, DetuningNoise};
use crate::VERSION;

/// Runs `f` on a dedicated pool of `threads` workers (default: rayon's global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn replay_noise(cfg: &RunConfig) -> Result<Option<NoiseSignal>> {
    cfg.noise_file
        .as_ref()
        .map(|path| io::parse_noise_csv(&fs::read_to_string(path)?))
        .transpose()
}

/// Output spacing for the configured model.
pub fn dt_out(cfg: &RunConfig) -> f64 {
    cfg.analysis.dt_out.unwrap_or_else(|| match &cfg.model {
        ModelConfig::ThreeLevel(p) => three_level::default_dt_out(p),
        ModelConfig::TwoLevel(p) => two_level::default_dt_out(p),
    })
}

/// Transient dropped before statistics: `5T` for the three-level model,
/// `20/κ` for the two-level model.
pub fn discard(cfg: &RunConfig) -> f64 {
    cfg.analysis.discard.unwrap_or_else(|| match &cfg.model {
        ModelConfig::ThreeLevel(p) => {
            if p.delta_f > 0.0 {
                5.0 * p.period()
            } else {
                0.0
            }
        }
        ModelConfig::TwoLevel(p) => {
            if p.kappa > 0.0 {
                20.0 / p.kappa
            } else {
                0.0
            }
        }
    })
}

/// Simulates the configured ensemble in memory.
pub fn simulate_trajectories(cfg: &RunConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let replay = replay_noise(cfg)?;
    let dt_out = dt_out(cfg);
    match &cfg.model {
        ModelConfig::ThreeLevel(p) => match &replay {
            None => {
                let opts = EnsembleOptions {
                    dt_out,
                    noise_mode: cfg.noise_mode,
                    rho0: DensityMatrix3::ground(),
                };
                three_level::run_ensemble(p, cfg.n_traj, cfg.base_seed, &opts)
            }
            Some(noise) => {
                let (mut traj, _) = three_level::integrate_three_level(p, noise, DensityMatrix3::ground(), dt_out)?;
                traj.seed = cfg.base_seed;
                Ok(vec![traj])
            }
        },
        ModelConfig::TwoLevel(p) => match &replay {
            None => two_level::run_ensemble(p, cfg.n_traj, cfg.base_seed, dt_out),
            Some(noise) => {
                let mut traj = two_level::integrate_with_noise(p, DetuningNoise::Replay(noise), dt_out)?;
                traj.seed = cfg.base_seed;
                Ok(vec![traj])
            }
        },
    }
}

fn manifest_text(cfg: &RunConfig, command: &str, outputs: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# qjump run manifest");
    let _ = writeln!(s, "# command = {command}");
    let _ = writeln!(s, "# version = {VERSION}");
    let _ = writeln!(s, "# generator = {GENERATOR_ID}");
    for o in outputs {
        let _ = writeln!(s, "# output = {o}");
    }
    s.push_str(&cfg.to_text());
    s
}

fn write_manifest(out_dir: &Path, cfg: &RunConfig, command: &str, outputs: &[String]) -> Result<PathBuf> {
    let path = out_dir.join("manifest.txt");
    write_atomic(&path, &manifest_text(cfg, command, outputs))?;
    Ok(path)
}

pub fn trajectory_file_name(index: u64) -> String {
    format!("traj_{index:04}.csv")
}

/// Runs the ensemble and writes one CSV per trajectory, then the manifest.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let trajs = simulate_trajectories(cfg)?;
    fs::create_dir_all(out_dir)?;
    let header = cfg.header_pairs();
    let mut names = Vec::with_capacity(trajs.len());
    let mut paths = Vec::with_capacity(trajs.len() + 1);
    for t in &trajs {
        let mut h = header.clone();
        h.push(("trajectory".into(), t.index.to_string()));
        let name = trajectory_file_name(t.index);
        let path = out_dir.join(&name);
        write_atomic(&path, &io::trajectory_csv(t, cfg.model.observable(), &h))?;
        names.push(name);
        paths.push(path);
    }
    paths.push(write_manifest(out_dir, cfg, "simulate", &names)?);
    Ok(paths)
}

/// Everything reported by an analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    pub trajectories: usize,
    pub up_events: usize,
    pub down_events: usize,
    pub intervals: usize,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub filter_tau: f64,
    pub bin_width: f64,
    pub period: Option<f64>,
    pub contrast: Option<Contrast>,
    pub window_count: Option<u64>,
}

impl AnalysisSummary {
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let mut pairs: Vec<(String, String)> = vec![
            ("trajectories".into(), self.trajectories.to_string()),
            ("up_events".into(), self.up_events.to_string()),
            ("down_events".into(), self.down_events.to_string()),
            ("intervals".into(), self.intervals.to_string()),
            ("mu".into(), opt(self.mu)),
            ("alpha".into(), opt(self.alpha)),
            ("filter_tau".into(), self.filter_tau.to_string()),
            ("bin_width".into(), self.bin_width.to_string()),
            ("T".into(), opt(self.period)),
            ("C".into(), opt(self.contrast.map(|c| c.value))),
        ];
        if let Some(c) = self.contrast {
            pairs.push(("h1".into(), c.h1.to_string()));
            pairs.push(("h2".into(), c.h2.to_string()));
            pairs.push(("h_min".into(), c.h_min.to_string()));
        }
        pairs.push((
            "window_count".into(),
            self.window_count.map_or_else(|| "none".into(), |c| c.to_string()),
        ));
        format_kv(&pairs)
    }
}

/// Pooled jump statistics over a set of series.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub histogram: IntervalHistogram,
    pub intervals: Vec<Vec<f64>>,
    pub summary: AnalysisSummary,
}

/// Filter, threshold and histogram a set of series using the analysis settings of `cfg`.
pub fn analyze_series_set(cfg: &RunConfig, series: &[TimeSeries]) -> Result<Analysis> {
    if series.is_empty() {
        return Err(Error::Config("no trajectories to analyze".into()));
    }
    let a = &cfg.analysis;
    let period = cfg.period();
    let cut = discard(cfg);
    let bin_width = match (a.bin_width, period) {
        (Some(w), _) => w,
        (None, Some(t)) => t / 20.0,
        (None, None) => return Err(Error::Config("`bin_width` is required without a modulation period".into())),
    };

    let mut prepared = Vec::with_capacity(series.len());
    let mut filter_tau = 0.0;
    for s in series {
        let first = s.times().partition_point(|&t| t < cut);
        let kept = TimeSeries::new(s.times()[first..].to_vec(), s.values()[first..].to_vec())?;
        let spacing = kept.typical_spacing().unwrap_or(1.0);
        filter_tau = a
            .filter_tau
            .unwrap_or_else(|| default_filter_tau(period.map(|t| 1.0 / t), spacing));
        let mut smooth = low_pass(&kept, filter_tau);
        if let Some(dt) = a.resample_dt {
            if !smooth.is_empty() {
                smooth = resample_linear(&smooth, dt)?;
            }
        }
        prepared.push(smooth);
    }

    let threshold = match (a.mu, a.alpha) {
        (Some(mu), Some(alpha)) => Some((mu, alpha)),
        _ => {
            let pooled: Vec<f64> = prepared.iter().flat_map(|s| s.values().iter().copied()).collect();
            default_threshold(&pooled).map(|(mu, alpha)| (a.mu.unwrap_or(mu), a.alpha.unwrap_or(alpha)))
        }
    };

    let (mut ups, mut downs) = (0, 0);
    let mut intervals = Vec::with_capacity(prepared.len());
    if let Some((mu, alpha)) = threshold {
        let jc = JumpConfig { mu, alpha, filter_tau };
        jc.validate()?;
        for s in &prepared {
            let ev = detect_jumps(s, &jc);
            ups += ev.up_times.len();
            downs += ev.down_times.len();
            intervals.push(if a.downward { downward_intervals(&ev) } else { upward_intervals(&ev) });
        }
    }
    let min_span = period.map_or(0.0, |t| 3.0 * t);
    let histogram = build_histogram(&intervals, bin_width, min_span);
    let contrast = period.and_then(|t| contrast(&histogram, t).ok());
    let window = period.map(|t| intervals.iter().map(|iv| window_count(iv, t)).sum());
    let summary = AnalysisSummary {
        trajectories: series.len(),
        up_events: ups,
        down_events: downs,
        intervals: histogram.total_events as usize,
        mu: threshold.map(|t| t.0),
        alpha: threshold.map(|t| t.1),
        filter_tau,
        bin_width,
        period,
        contrast,
        window_count: window,
    };
    Ok(Analysis {
        histogram,
        intervals,
        summary,
    })
}

pub fn analyze_trajectories(cfg: &RunConfig, trajs: &[Trajectory]) -> Result<Analysis> {
    let series: Vec<TimeSeries> = trajs.iter().map(Trajectory::to_series).collect();
    analyze_series_set(cfg, &series)
}

fn write_analysis(out_dir: &Path, prefix: &str, cfg: &RunConfig, analysis: &Analysis) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let hist_path = out_dir.join(format!("{prefix}histogram.csv"));
    write_atomic(&hist_path, &io::histogram_csv(&analysis.histogram, &cfg.header_pairs()))?;
    let summary_path = out_dir.join(format!("{prefix}summary.txt"));
    write_atomic(&summary_path, &analysis.summary.to_text())?;
    Ok(vec![hist_path, summary_path])
}

/// Reads trajectory (or measured) CSV files, writes `histogram.csv` and
/// `summary.txt`. Fails with `NoJumpsDetected` after writing a zero summary
/// when no interval was found.
pub fn cmd_analyze(cfg: &RunConfig, files: &[PathBuf], out_dir: &Path) -> Result<Analysis> {
    if files.is_empty() {
        return Err(Error::Config("no input files".into()));
    }
    let series = files
        .iter()
        .map(|f| io::parse_series_csv(&fs::read_to_string(f)?))
        .collect::<Result<Vec<_>>>()?;
    let analysis = analyze_series_set(cfg, &series)?;
    write_analysis(out_dir, "", cfg, &analysis)?;
    if analysis.summary.intervals == 0 {
        return Err(Error::NoJumpsDetected);
    }
    Ok(analysis)
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub contrast: Option<f64>,
    pub window_count: Option<u64>,
    pub intervals: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Best detuning in optimum mode.
    pub best_delta: Option<f64>,
}

fn point_config(cfg: &RunConfig, params: &[(String, Vec<f64>)], i: usize) -> RunConfig {
    let mut c = cfg.clone();
    c.sweep = None;
    for (name, grid) in params {
        c.model.set(name, grid[i]);
    }
    c
}

fn sweep_table(names: &[String], rows: &[SweepRow]) -> String {
    let mut s = String::from("param,value,C,window_count,intervals,status\n");
    let param = names.join("+");
    for r in rows {
        let value = r.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("+");
        let c = r.contrast.map_or_else(|| "none".into(), |c| c.to_string());
        let w = r.window_count.map_or_else(|| "none".into(), |c| c.to_string());
        let _ = writeln!(s, "{param},{value},{c},{w},{},{}", r.intervals, r.status);
    }
    s
}

/// Simulates and analyzes every sweep point. Failures are recorded per point
/// and the sweep continues.
pub fn run_sweep(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<SweepOutcome> {
    cfg.validate()?;
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("no `sweep.<param>` grid configured".into()))?;
    let names: Vec<String> = spec.params.iter().map(|p| p.0.clone()).collect();
    let mut rows: Vec<SweepRow> = Vec::with_capacity(spec.len());

    let run_point = |i: usize, rows: &mut Vec<SweepRow>| -> Vec<f64> {
        let pc = point_config(cfg, &spec.params, i);
        let values: Vec<f64> = spec.params.iter().map(|p| p.1[i]).collect();
        let result = simulate_trajectories(&pc).and_then(|t| analyze_trajectories(&pc, &t));
        match result {
            Ok(a) => {
                if let Some(dir) = out_dir {
                    if let Err(e) = write_analysis(dir, &format!("point_{i:03}_"), &pc, &a) {
                        rows.push(failed_row(values, &e));
                        return Vec::new();
                    }
                }
                rows.push(SweepRow {
                    values,
                    contrast: a.summary.contrast.map(|c| c.value),
                    window_count: a.summary.window_count,
                    intervals: a.summary.intervals,
                    status: "ok".into(),
                });
                a.intervals.concat()
            }
            Err(e) => {
                rows.push(failed_row(values, &e));
                Vec::new()
            }
        }
    };

    let mut best_delta = None;
    match spec.mode {
        SweepMode::Contrast => {
            for i in 0..spec.len() {
                run_point(i, &mut rows);
            }
        }
        SweepMode::Optimum => {
            let period = cfg
                .period()
                .ok_or_else(|| Error::Config("optimum mode needs a modulation period".into()))?;
            let grid = spec.params[0].1.clone();
            let mut i = 0;
            let scan = optimum_detuning_scan(
                |_delta| {
                    let iv = run_point(i, &mut rows);
                    i += 1;
                    Ok(iv)
                },
                &grid,
                period,
            );
            match scan {
                Ok(s) => best_delta = Some(s.best_delta),
                Err(Error::AllZeroCounts) => {}
                Err(e) => return Err(e),
            }
        }
    }

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("sweep.csv"), &sweep_table(&names, &rows))?;
        let mut extra = String::new();
        if let Some(b) = best_delta {
            let _ = writeln!(extra, "best_Delta = {b}");
        }
        write_atomic(&dir.join("sweep_summary.txt"), &extra)?;
        write_manifest(dir, cfg, "sweep", &["sweep.csv".into(), "sweep_summary.txt".into()])?;
    }
    Ok(SweepOutcome { rows, best_delta })
}

fn failed_row(values: Vec<f64>, e: &Error) -> SweepRow {
    SweepRow {
        values,
        contrast: None,
        window_count: None,
        intervals: 0,
        status: format!("error: {}", e.to_string().replace(',', ";")),
    }
}

pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<SweepOutcome> {
    run_sweep(cfg, Some(out_dir))
}

/// Writes `phase_diagram.csv` for the two-level model.
pub fn cmd_phase_diagram(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ModelConfig::TwoLevel(p) = &cfg.model else {
        return Err(Error::Config("phase-diagram requires model = two_level".into()));
    };
    let deltas = cfg.phase_delta.clone().unwrap_or_else(|| vec![p.delta]);
    let omegas = cfg.phase_omega.clone().unwrap_or_else(|| vec![p.omega]);
    let cells = two_level::phase_diagram(&deltas, &omegas, p)?;
    fs::create_dir_all(out_dir)?;
    let header = cfg.header_pairs();
    let path = out_dir.join("phase_diagram.csv");
    write_atomic(&path, &io::phase_diagram_csv(&cells, &header))?;

    // potential landscape at the configured (Δ, Ω) for plotting
    let mut out = vec![path];
    if p.v != 0.0 {
        let points: Vec<(f64, f64)> = (0..=1000)
            .map(|i| {
                let n = i as f64 / 1000.0;
                (n, two_level::potential(n, p.delta, p).expect("V != 0"))
            })
            .collect();
        let pot = out_dir.join("potential.csv");
        write_atomic(&pot, &io::potential_csv(&points, &header))?;
        out.push(pot);
    }
    Ok(out)
}

/// Fits the configured models to a histogram file and writes `fit.txt`.
pub fn cmd_fit(cfg: &RunConfig, histogram: &Path, out_dir: &Path) -> Result<Vec<FitResult>> {
    let h = io::parse_histogram_csv(&fs::read_to_string(histogram)?)?;
    let opts = FitOptions {
        starts: cfg.fit.starts,
        weighting: cfg.fit.weighting,
        seed: cfg.base_seed,
    };
    let results = cfg
        .fit
        .models
        .iter()
        .map(|&k| fit_histogram(k, &h, &opts))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("fit.txt"), &fit_text(&results))?;
    Ok(results)
}

pub fn fit_text(results: &[FitResult]) -> String {
    let mut s = String::new();
    for r in results {
        let kind = r.kind();
        let mut pairs: Vec<(String, String)> = vec![("model".into(), kind.name().into())];
        for (name, v) in kind.param_names().iter().zip(r.theta()) {
            pairs.push(((*name).into(), v.to_string()));
        }
        pairs.push(("residual".into(), r.residual_ss.to_string()));
        pairs.push(("converged".into(), r.converged.to_string()));
        pairs.push(("iterations".into(), r.iterations.to_string()));
        s.push_str(&format_kv(&pairs));
        s.push('\n');
    }
    s
}

/// Writes the detuning noise that trajectory `index` sees, as `t,value`.
pub fn cmd_noise_dump(cfg: &RunConfig, index: u64, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let (times, values) = match &cfg.model {
        ModelConfig::ThreeLevel(p) => {
            let s = three_level::trajectory_noise(p, cfg.noise_mode, cfg.base_seed, index);
            (s.sample_times(), s.values().to_vec())
        }
        ModelConfig::TwoLevel(p) => two_level::ou_path(p, cfg.base_seed, index, dt_out(cfg)),
    };
    fs::create_dir_all(out_dir)?;
    let mut header = cfg.header_pairs();
    header.push(("trajectory".into(), index.to_string()));
    let path = out_dir.join(format!("noise_{index:04}.csv"));
    write_atomic(&path, &io::noise_csv(&times, &values, &header))?;
    Ok(path)
}
