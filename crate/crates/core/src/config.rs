//! Run configuration: a flat `key = value` document.
//!
//! Model keys mirror the parameter names (`Delta`, `Omega`, `V1`, `gamma_D`,
//! ...), all in units of γ. Optional analysis keys accept `auto`. A resolved
//! configuration re-emitted by [`RunConfig::to_text`] parses back to the same
//! value.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitting::{ModelKind, Weighting};
use crate::io::parse_kv;
use crate::noise::NoiseMode;
use crate::three_level::ThreeLevelParams;
use crate::two_level::TwoLevelParams;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    ThreeLevel(ThreeLevelParams),
    TwoLevel(TwoLevelParams),
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::ThreeLevel(_) => "three_level",
            ModelConfig::TwoLevel(_) => "two_level",
        }
    }

    pub fn delta_f(&self) -> f64 {
        match self {
            ModelConfig::ThreeLevel(p) => p.delta_f,
            ModelConfig::TwoLevel(p) => p.delta_f,
        }
    }

    /// Whether the drive is actually modulated at `delta_f`.
    pub fn is_modulated(&self) -> bool {
        match self {
            ModelConfig::ThreeLevel(p) => p.delta_f > 0.0 && p.omega_mw2 != 0.0,
            ModelConfig::TwoLevel(p) => p.delta_f > 0.0 && p.a != 0.0,
        }
    }

    /// Name of the recorded observable column.
    pub fn observable(&self) -> &'static str {
        match self {
            ModelConfig::ThreeLevel(_) => "n_R",
            ModelConfig::TwoLevel(_) => "n",
        }
    }

    /// Sets one model parameter by key; returns false for keys the model lacks.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match self {
            ModelConfig::ThreeLevel(p) => {
                let slot = match key {
                    "gamma_r" => &mut p.gamma_r,
                    "gamma_s" => &mut p.gamma_s,
                    "Omega" => &mut p.omega,
                    "Delta" => &mut p.delta,
                    "V1" => &mut p.v[0],
                    "V2" => &mut p.v[1],
                    "V3" => &mut p.v[2],
                    "V4" => &mut p.v[3],
                    "Omega_MW1" => &mut p.omega_mw1,
                    "Omega_MW2" => &mut p.omega_mw2,
                    "delta_f" => &mut p.delta_f,
                    "noise_sigma" => &mut p.noise_sigma,
                    "dt" => &mut p.dt,
                    "t_total" => &mut p.t_total,
                    "beta_dB" => {
                        p.omega_mw2 = ThreeLevelParams::omega_mw2_for_beta(p.omega_mw1, value);
                        return true;
                    }
                    _ => return false,
                };
                *slot = value;
                true
            }
            ModelConfig::TwoLevel(p) => {
                let slot = match key {
                    "Delta" => &mut p.delta,
                    "A" => &mut p.a,
                    "delta_f" => &mut p.delta_f,
                    "Omega" => &mut p.omega,
                    "V" => &mut p.v,
                    "gamma" => &mut p.gamma,
                    "gamma_D" => &mut p.gamma_d,
                    "kappa" => &mut p.kappa,
                    "D" => &mut p.d,
                    "dt" => &mut p.dt,
                    "t_total" => &mut p.t_total,
                    _ => return false,
                };
                *slot = value;
                true
            }
        }
    }

    fn entries(&self) -> Vec<(&'static str, f64)> {
        match self {
            ModelConfig::ThreeLevel(p) => vec![
                ("gamma_r", p.gamma_r),
                ("gamma_s", p.gamma_s),
                ("Omega", p.omega),
                ("Delta", p.delta),
                ("V1", p.v[0]),
                ("V2", p.v[1]),
                ("V3", p.v[2]),
                ("V4", p.v[3]),
                ("Omega_MW1", p.omega_mw1),
                ("Omega_MW2", p.omega_mw2),
                ("delta_f", p.delta_f),
                ("noise_sigma", p.noise_sigma),
                ("dt", p.dt),
                ("t_total", p.t_total),
            ],
            ModelConfig::TwoLevel(p) => vec![
                ("Delta", p.delta),
                ("A", p.a),
                ("delta_f", p.delta_f),
                ("Omega", p.omega),
                ("V", p.v),
                ("gamma", p.gamma),
                ("gamma_D", p.gamma_d),
                ("kappa", p.kappa),
                ("D", p.d),
                ("dt", p.dt),
                ("t_total", p.t_total),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::ThreeLevel(p) => p.validate(),
            ModelConfig::TwoLevel(p) => p.validate(),
        }
    }
}

/// Jump-analysis settings; `None` means "derive automatically".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisConfig {
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub filter_tau: Option<f64>,
    pub bin_width: Option<f64>,
    /// Modulation period `T`; defaults to `1/δf`.
    pub period: Option<f64>,
    /// Transient dropped from the start of each trajectory.
    pub discard: Option<f64>,
    /// Trajectory output spacing.
    pub dt_out: Option<f64>,
    /// Resampling step applied after filtering (no resampling when unset).
    pub resample_dt: Option<f64>,
    pub downward: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Contrast,
    Optimum,
}

/// Zipped parameter grids: point `i` sets every parameter to its `i`-th value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: Vec<(String, Vec<f64>)>,
    pub mode: SweepMode,
}

impl SweepSpec {
    pub fn len(&self) -> usize {
        self.params.first().map_or(0, |p| p.1.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub models: Vec<ModelKind>,
    pub starts: usize,
    pub weighting: Weighting,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelKind::TwoState, ModelKind::Exponential],
            starts: 16,
            weighting: Weighting::Unweighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub noise_mode: NoiseMode,
    /// Replay file for the detuning noise instead of generating it.
    pub noise_file: Option<String>,
    pub analysis: AnalysisConfig,
    pub n_traj: usize,
    pub base_seed: u64,
    pub sweep: Option<SweepSpec>,
    pub phase_delta: Option<Vec<f64>>,
    pub phase_omega: Option<Vec<f64>>,
    pub fit: FitConfig,
}

pub const DEFAULT_N_TRAJ: usize = 32;

impl RunConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            noise_mode: NoiseMode::default(),
            noise_file: None,
            analysis: AnalysisConfig::default(),
            n_traj: DEFAULT_N_TRAJ,
            base_seed: 0,
            sweep: None,
            phase_delta: None,
            phase_omega: None,
            fit: FitConfig::default(),
        }
    }

    /// Modulation period used by the analysis.
    pub fn period(&self) -> Option<f64> {
        self.analysis
            .period
            .or_else(|| self.model.is_modulated().then(|| 1.0 / self.model.delta_f()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_traj == 0 {
            return Err(Error::out_of_range("n_traj", "must be >= 1"));
        }
        let a = &self.analysis;
        if let Some(alpha) = a.alpha {
            if !(alpha > 0.0) {
                return Err(Error::out_of_range("alpha", "must be > 0"));
            }
        }
        for (key, v) in [("bin_width", a.bin_width), ("T", a.period), ("dt_out", a.dt_out), ("resample_dt", a.resample_dt)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::out_of_range(key, "must be > 0"));
                }
            }
        }
        for (key, v) in [("filter_tau", a.filter_tau), ("discard", a.discard)] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(Error::out_of_range(key, "must be >= 0"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
            if s.params.iter().any(|p| p.1.len() != s.len()) {
                return Err(Error::Config("zipped sweep grids differ in length".into()));
            }
            for (name, _) in &s.params {
                if !self.model.clone().set(name, 0.0) {
                    return Err(Error::UnknownKey(format!("sweep.{name}")));
                }
            }
            if s.mode == SweepMode::Optimum && (s.params.len() != 1 || s.params[0].0 != "Delta") {
                return Err(Error::Config("optimum mode sweeps exactly `Delta`".into()));
            }
        }
        for (key, g) in [("phase_delta", &self.phase_delta), ("phase_omega", &self.phase_omega)] {
            if g.as_ref().is_some_and(|g| g.is_empty()) {
                return Err(Error::Config(format!("`{key}` grid is empty")));
            }
        }
        if self.fit.starts == 0 {
            return Err(Error::out_of_range("fit_starts", "must be >= 1"));
        }
        Ok(())
    }

    /// The fully resolved configuration as `key = value` text.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<(String, String)> = vec![("model".into(), self.model.name().into())];
        for (k, v) in self.model.entries() {
            lines.push((k.into(), fmt_f64(v)));
        }
        if let ModelConfig::ThreeLevel(_) = self.model {
            lines.push(("noise_mode".into(), self.noise_mode.as_str().into()));
        }
        if let Some(f) = &self.noise_file {
            lines.push(("noise_file".into(), f.clone()));
        }
        let a = &self.analysis;
        for (k, v) in [
            ("mu", a.mu),
            ("alpha", a.alpha),
            ("filter_tau", a.filter_tau),
            ("bin_width", a.bin_width),
            ("T", a.period),
            ("discard", a.discard),
            ("dt_out", a.dt_out),
            ("resample_dt", a.resample_dt),
        ] {
            lines.push((k.into(), v.map_or_else(|| "auto".into(), fmt_f64)));
        }
        lines.push(("direction".into(), if a.downward { "down" } else { "up" }.into()));
        lines.push(("n_traj".into(), self.n_traj.to_string()));
        lines.push(("base_seed".into(), self.base_seed.to_string()));
        if let Some(s) = &self.sweep {
            lines.push((
                "sweep_mode".into(),
                match s.mode {
                    SweepMode::Contrast => "contrast",
                    SweepMode::Optimum => "optimum",
                }
                .into(),
            ));
            for (name, values) in &s.params {
                lines.push((format!("sweep.{name}"), fmt_list(values)));
            }
        }
        if let Some(g) = &self.phase_delta {
            lines.push(("phase_delta".into(), fmt_list(g)));
        }
        if let Some(g) = &self.phase_omega {
            lines.push(("phase_omega".into(), fmt_list(g)));
        }
        lines.push((
            "fit_models".into(),
            self.fit.models.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        ));
        lines.push(("fit_starts".into(), self.fit.starts.to_string()));
        lines.push((
            "fit_weighting".into(),
            match self.fit.weighting {
                Weighting::Unweighted => "unweighted",
                Weighting::Poisson => "poisson",
            }
            .into(),
        ));
        crate::io::format_kv(&lines)
    }

    /// `(key, value)` pairs for embedding in output headers.
    pub fn header_pairs(&self) -> Vec<(String, String)> {
        parse_kv(&self.to_text()).expect("resolved config is well formed")
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("`{key}`: `{value}` is not a number"),
    })
}

fn parse_opt(key: &str, value: &str, line: usize) -> Result<Option<f64>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_f64(key, value, line).map(Some)
    }
}

/// Grid syntax: `a,b,c` or an inclusive range `start:stop:step`.
pub fn parse_grid(key: &str, value: &str, line: usize) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("`{key}`: range must be start:stop:step"),
            });
        }
        let (start, stop, step) = (
            parse_f64(key, parts[0], line)?,
            parse_f64(key, parts[1], line)?,
            parse_f64(key, parts[2], line)?,
        );
        if !(step > 0.0) || stop < start {
            return Err(Error::out_of_range(key, "range needs step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    value
        .split(',')
        .map(|s| parse_f64(key, s.trim(), line))
        .collect()
}

/// Parses a configuration document, applying defaults for missing keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    // keep line numbers for error messages
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    let mut seen = BTreeMap::new();
    for (line, k, _) in &entries {
        if let Some(first) = seen.insert(k.clone(), *line) {
            return Err(Error::Parse {
                line: *line,
                message: format!("duplicate key `{k}` (first on line {first})"),
            });
        }
    }

    let model_name = entries
        .iter()
        .find(|e| e.1 == "model")
        .map(|e| e.2.as_str())
        .ok_or_else(|| Error::Config("missing `model` (three_level | two_level)".into()))?;
    let model = match model_name {
        "three_level" => ModelConfig::ThreeLevel(ThreeLevelParams::default()),
        "two_level" => ModelConfig::TwoLevel(TwoLevelParams::default()),
        other => {
            return Err(Error::Config(format!("unknown model `{other}`")));
        }
    };
    let mut cfg = RunConfig::new(model);
    let mut sweep_params: Vec<(String, Vec<f64>)> = Vec::new();
    let mut sweep_mode = SweepMode::Contrast;
    let mut gamma_hz: Option<f64> = None;
    let mut delta_f_hz: Option<f64> = None;
    let mut beta_db: Option<f64> = None;

    for (line, key, value) in &entries {
        let (line, key, value) = (*line, key.as_str(), value.as_str());
        match key {
            "model" => {}
            "noise_mode" => {
                cfg.noise_mode = NoiseMode::parse(value).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("noise_mode must be per_unit_time or literal_total, got `{value}`"),
                })?;
            }
            "noise_file" => cfg.noise_file = (value != "none").then(|| value.to_string()),
            "mu" => cfg.analysis.mu = parse_opt(key, value, line)?,
            "alpha" => cfg.analysis.alpha = parse_opt(key, value, line)?,
            "filter_tau" => cfg.analysis.filter_tau = parse_opt(key, value, line)?,
            "bin_width" => cfg.analysis.bin_width = parse_opt(key, value, line)?,
            "T" => cfg.analysis.period = parse_opt(key, value, line)?,
            "discard" => cfg.analysis.discard = parse_opt(key, value, line)?,
            "dt_out" => cfg.analysis.dt_out = parse_opt(key, value, line)?,
            "resample_dt" => cfg.analysis.resample_dt = parse_opt(key, value, line)?,
            "direction" => {
                cfg.analysis.downward = match value {
                    "up" => false,
                    "down" => true,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("direction must be up or down, got `{value}`"),
                        })
                    }
                }
            }
            "n_traj" => {
                cfg.n_traj = value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("n_traj: `{value}` is not a non-negative integer"),
                })?
            }
            "base_seed" => {
                cfg.base_seed = value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("base_seed: `{value}` is not a non-negative integer"),
                })?
            }
            "sweep_mode" => {
                sweep_mode = match value {
                    "contrast" => SweepMode::Contrast,
                    "optimum" => SweepMode::Optimum,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("sweep_mode must be contrast or optimum, got `{value}`"),
                        })
                    }
                }
            }
            "phase_delta" => cfg.phase_delta = Some(parse_grid(key, value, line)?),
            "phase_omega" => cfg.phase_omega = Some(parse_grid(key, value, line)?),
            "fit_models" => {
                cfg.fit.models = value
                    .split(',')
                    .map(|s| {
                        ModelKind::parse(s.trim()).ok_or_else(|| Error::Parse {
                            line,
                            message: format!("unknown fit model `{}`", s.trim()),
                        })
                    })
                    .collect::<Result<_>>()?
            }
            "fit_starts" => {
                cfg.fit.starts = value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("fit_starts: `{value}` is not an integer"),
                })?
            }
            "fit_weighting" => {
                cfg.fit.weighting = match value {
                    "unweighted" => Weighting::Unweighted,
                    "poisson" => Weighting::Poisson,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("fit_weighting must be unweighted or poisson, got `{value}`"),
                        })
                    }
                }
            }
            "gamma_hz" => gamma_hz = Some(parse_f64(key, value, line)?),
            "delta_f_hz" => delta_f_hz = Some(parse_f64(key, value, line)?),
            "beta_dB" if matches!(cfg.model, ModelConfig::ThreeLevel(_)) => beta_db = Some(parse_f64(key, value, line)?),
            k if k.starts_with("sweep.") => {
                sweep_params.push((k["sweep.".len()..].to_string(), parse_grid(key, value, line)?));
            }
            k => {
                let v = parse_f64(k, value, line)?;
                if !cfg.model.set(k, v) {
                    return Err(Error::UnknownKey(k.to_string()));
                }
            }
        }
    }

    if let Some(hz) = delta_f_hz {
        let scale = gamma_hz.ok_or_else(|| Error::Config("`delta_f_hz` needs the γ scale `gamma_hz`".into()))?;
        if !(scale > 0.0) {
            return Err(Error::out_of_range("gamma_hz", "must be > 0"));
        }
        cfg.model.set("delta_f", hz / scale);
    }
    if let Some(b) = beta_db {
        cfg.model.set("beta_dB", b);
    }
    if !sweep_params.is_empty() {
        cfg.sweep = Some(SweepSpec {
            params: sweep_params,
            mode: sweep_mode,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_two_level_takes_telegraph_defaults() {
        let cfg = parse_config("model = two_level\nDelta = 18.5\nOmega = 2\nV = 100\ngamma_D = 10\n").unwrap();
        let ModelConfig::TwoLevel(p) = &cfg.model else { panic!() };
        assert_eq!((p.kappa, p.d), (0.1, 1.0));
        assert_eq!(cfg.n_traj, 32);
    }

    #[test]
    fn negative_dt_is_out_of_range() {
        let err = parse_config("model = two_level\ndt = -1\n").unwrap_err();
        assert!(matches!(err, Error::OutOfRange { ref key, .. } if key == "dt"), "{err}");
    }

    #[test]
    fn unknown_and_foreign_keys_rejected() {
        assert!(matches!(parse_config("model = two_level\nbogus = 1\n"), Err(Error::UnknownKey(_))));
        assert!(matches!(parse_config("model = two_level\nV1 = 1\n"), Err(Error::UnknownKey(_))));
        assert!(matches!(parse_config("model = three_level\ngamma_D = 1\n"), Err(Error::UnknownKey(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("model = two_level\n\nDelta = abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_config("model = two_level\nDelta = 1\nDelta = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "model = three_level\nOmega_MW2 = 0.533\nDelta = -3.95\nmu = 0.2\nsweep.Omega_MW2 = 0.949,0.533\nsweep.Delta = -4.15,-3.95\nphase_delta = 1:2:0.5\n";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.to_text(), cfg.to_text());
        let two = parse_config("model = two_level\nA = 3\n").unwrap();
        assert_eq!(parse_config(&two.to_text()).unwrap(), two);
    }

    #[test]
    fn zero_trajectories_rejected() {
        assert!(matches!(parse_config("model = two_level\nn_traj = 0\n"), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn empty_sweep_rejected() {
        assert!(matches!(parse_config("model = two_level\nsweep.Delta = \n"), Err(Error::Config(_))));
    }

    #[test]
    fn unit_conversion_and_beta() {
        let cfg = parse_config("model = three_level\ngamma_hz = 30000\ndelta_f_hz = 300\nbeta_dB = -20\n").unwrap();
        let ModelConfig::ThreeLevel(p) = &cfg.model else { panic!() };
        assert!((p.delta_f - 0.01).abs() < 1e-15);
        assert!((p.omega_mw2 - 0.3).abs() < 1e-12);
        assert!(parse_config("model = three_level\ndelta_f_hz = 300\n").is_err());
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("g", "1:2:0.5", 1).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("g", "3, 1", 1).unwrap(), vec![3.0, 1.0]);
        assert!(parse_grid("g", "1:2", 1).is_err());
    }
}
