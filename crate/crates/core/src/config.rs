//! Run configuration: `key = value` files, command-line overrides, and the
//! resolved echo written next to every output.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::classify::{ClassifyOptions, DEFAULT_FTLE_WINDOW};
use crate::error::{DickeError, Result};
use crate::integrator::{InitialCondition, IntegrationConfig, Observable};
use crate::io::fmt_f64;
use crate::lyapunov::{DEFAULT_DELTA0, DEFAULT_TAU, LE_ZERO_BAND};
use crate::model::{ModelParams, RawParams};
use crate::signal::DEFAULT_PROMINENCE_DB;

/// File name of the configuration echo.
pub const ECHO_FILE: &str = "run_config.txt";

/// `(line, key, value)` triples of a `key = value` file. Blank lines and
/// lines starting with `#` are skipped; `-` in keys reads as `_`.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| DickeError::Parse { line, msg: format!("expected key = value, got {s:?}") })?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(DickeError::Parse { line, msg: format!("bad key {:?}", k.trim()) });
        }
        if !seen.insert(key.clone()) {
            return Err(DickeError::Parse { line, msg: format!("duplicate key {key}") });
        }
        out.push((line, key, v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    FixedPoints,
    Lyapunov,
    Psd,
    Bifurcation,
    Phase,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FixedPoints => "fixed-points",
            Command::Lyapunov => "lyapunov",
            Command::Psd => "psd",
            Command::Bifurcation => "bifurcation",
            Command::Phase => "phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub omega0: f64,
    pub omega_q: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma_down: f64,
    pub gamma_phi: f64,
    pub n_qubits: u32,

    pub t_total: f64,
    pub t_transient: f64,
    pub dt_sample: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub seed: u64,
    pub ic_scale: f64,

    pub delta0: f64,
    pub tau: f64,
    pub ftle_window: f64,
    pub le_threshold: f64,
    pub prominence_db: f64,
    /// `None`: a fixed fraction of the observable's range.
    pub cluster_tol: Option<f64>,
    pub amp_observable: Observable,
    pub psd_observable: Observable,

    /// Sweep bounds; `None` until resolved against a command's defaults.
    pub g_from: Option<f64>,
    pub g_to: Option<f64>,
    pub g_steps: usize,
    pub g_step: f64,
    pub wq_from: f64,
    pub wq_to: f64,
    pub wq_step: f64,
    pub continuation: bool,

    pub out: PathBuf,
    /// Worker threads for sweeps; 0 uses every core.
    pub jobs: usize,
    pub resume: bool,
    /// `simulate` only: also estimate the Lyapunov exponent.
    pub with_le: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let raw = RawParams::default();
        let ic = IntegrationConfig::default();
        RunConfig {
            omega0: raw.omega0,
            omega_q: raw.omega_q,
            g: raw.g,
            kappa: raw.kappa,
            gamma_down: raw.gamma_down,
            gamma_phi: raw.gamma_phi,
            n_qubits: raw.n_qubits,
            t_total: ic.t_total,
            t_transient: ic.t_transient,
            dt_sample: ic.dt_sample,
            rel_tol: ic.rel_tol,
            abs_tol: ic.abs_tol,
            max_step: ic.max_step,
            seed: ic.seed,
            ic_scale: ic.ic_scale,
            delta0: DEFAULT_DELTA0,
            tau: DEFAULT_TAU,
            ftle_window: DEFAULT_FTLE_WINDOW,
            le_threshold: LE_ZERO_BAND,
            prominence_db: DEFAULT_PROMINENCE_DB,
            cluster_tol: None,
            amp_observable: Observable::Sz,
            psd_observable: Observable::N,
            g_from: None,
            g_to: None,
            g_steps: 120,
            g_step: 0.0025,
            wq_from: 0.05,
            wq_to: 0.30,
            wq_step: 0.005,
            continuation: false,
            out: PathBuf::from("."),
            jobs: 0,
            resume: false,
            with_le: false,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> DickeError {
    DickeError::Config(format!("{key} = {value:?}: {why}"))
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|e| bad(key, v, e))
}

fn int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, v, e))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn observable(key: &str, v: &str) -> Result<Observable> {
    Observable::parse(v).ok_or_else(|| bad(key, v, "expected one of x, y, n, sx, sy, sz"))
}

impl RunConfig {
    /// Set one field by key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        match k {
            "omega0" => self.omega0 = num(k, v)?,
            "omega_q" => self.omega_q = num(k, v)?,
            "g" => self.g = num(k, v)?,
            "kappa" => self.kappa = num(k, v)?,
            "gamma_down" => self.gamma_down = num(k, v)?,
            "gamma_phi" => self.gamma_phi = num(k, v)?,
            "n_qubits" => self.n_qubits = int(k, v)?,
            "t_total" => self.t_total = num(k, v)?,
            "t_transient" => self.t_transient = num(k, v)?,
            "dt_sample" => self.dt_sample = num(k, v)?,
            "rel_tol" => self.rel_tol = num(k, v)?,
            "abs_tol" => self.abs_tol = num(k, v)?,
            "max_step" => self.max_step = num(k, v)?,
            "seed" => self.seed = int(k, v)?,
            "ic_scale" => self.ic_scale = num(k, v)?,
            "delta0" => self.delta0 = num(k, v)?,
            "tau" => self.tau = num(k, v)?,
            "ftle_window" => self.ftle_window = num(k, v)?,
            "le_threshold" => self.le_threshold = num(k, v)?,
            "prominence_db" => self.prominence_db = num(k, v)?,
            "cluster_tol" => self.cluster_tol = if v == "auto" { None } else { Some(num(k, v)?) },
            "amp_observable" => self.amp_observable = observable(k, v)?,
            "psd_observable" => self.psd_observable = observable(k, v)?,
            "g_from" => self.g_from = Some(num(k, v)?),
            "g_to" => self.g_to = Some(num(k, v)?),
            "g_steps" | "steps" => self.g_steps = int(k, v)?,
            "g_step" => self.g_step = num(k, v)?,
            "wq_from" => self.wq_from = num(k, v)?,
            "wq_to" => self.wq_to = num(k, v)?,
            "wq_step" => self.wq_step = num(k, v)?,
            "continuation" => self.continuation = boolean(k, v)?,
            "out" => self.out = PathBuf::from(v),
            "jobs" => self.jobs = int(k, v)?,
            "resume" => self.resume = boolean(k, v)?,
            "with_le" => self.with_le = boolean(k, v)?,
            _ => return Err(DickeError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply every entry of a `key = value` text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, k, v) in parse_kv(text)? {
            self.set(&k, &v).map_err(|e| DickeError::Parse { line, msg: e.to_string() })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Fill command-specific defaults.
    pub fn resolved(mut self, cmd: Command) -> RunConfig {
        let (lo, hi) = match cmd {
            Command::Phase => (0.20, 0.45),
            _ => (0.37, 0.40),
        };
        self.g_from.get_or_insert(lo);
        self.g_to.get_or_insert(hi);
        self
    }

    pub fn raw_params(&self) -> RawParams {
        RawParams {
            omega0: self.omega0,
            omega_q: self.omega_q,
            g: self.g,
            kappa: self.kappa,
            gamma_down: self.gamma_down,
            gamma_phi: self.gamma_phi,
            n_qubits: self.n_qubits,
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        self.raw_params().derive()
    }

    pub fn integration(&self) -> Result<IntegrationConfig> {
        let c = IntegrationConfig {
            t_total: self.t_total,
            t_transient: self.t_transient,
            dt_sample: self.dt_sample,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            seed: self.seed,
            ic: InitialCondition::NpPerturbed,
            ic_scale: self.ic_scale,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            le_threshold: self.le_threshold,
            ftle_window: self.ftle_window,
            delta0: self.delta0,
            tau: self.tau,
            cluster_tol: self.cluster_tol,
            amplitude_observable: self.amp_observable,
            psd_observable: self.psd_observable,
            prominence_db: self.prominence_db,
            ..ClassifyOptions::default()
        }
    }

    /// Check everything a command will need.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        self.model()?;
        self.integration()?;
        for (k, v) in [("delta0", self.delta0), ("tau", self.tau), ("ftle_window", self.ftle_window)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(k, &fmt_f64(v), "must be > 0"));
            }
        }
        if let Some(t) = self.cluster_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(bad("cluster_tol", &fmt_f64(t), "must be > 0"));
            }
        }
        match cmd {
            Command::Bifurcation => {
                if self.g_steps == 0 {
                    return Err(bad("g_steps", "0", "must be >= 1"));
                }
            }
            Command::Phase => {
                for (k, v) in [("g_step", self.g_step), ("wq_step", self.wq_step)] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(bad(k, &fmt_f64(v), "must be > 0"));
                    }
                }
                if self.wq_to < self.wq_from {
                    return Err(DickeError::Config("wq_to < wq_from".into()));
                }
                if self.g_to.zip(self.g_from).is_some_and(|(hi, lo)| hi < lo) {
                    return Err(DickeError::Config("g_to < g_from".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Every field, one `key = value` per line, readable by [`RunConfig::from_text`].
    pub fn to_text(&self, cmd: Option<Command>) -> String {
        let mut s = String::new();
        if let Some(c) = cmd {
            let _ = writeln!(s, "# command: {}", c.name());
        }
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("omega0", fmt_f64(self.omega0));
        kv("omega_q", fmt_f64(self.omega_q));
        kv("g", fmt_f64(self.g));
        kv("kappa", fmt_f64(self.kappa));
        kv("gamma_down", fmt_f64(self.gamma_down));
        kv("gamma_phi", fmt_f64(self.gamma_phi));
        kv("n_qubits", self.n_qubits.to_string());
        kv("t_total", fmt_f64(self.t_total));
        kv("t_transient", fmt_f64(self.t_transient));
        kv("dt_sample", fmt_f64(self.dt_sample));
        kv("rel_tol", fmt_f64(self.rel_tol));
        kv("abs_tol", fmt_f64(self.abs_tol));
        kv("max_step", fmt_f64(self.max_step));
        kv("seed", self.seed.to_string());
        kv("ic_scale", fmt_f64(self.ic_scale));
        kv("delta0", fmt_f64(self.delta0));
        kv("tau", fmt_f64(self.tau));
        kv("ftle_window", fmt_f64(self.ftle_window));
        kv("le_threshold", fmt_f64(self.le_threshold));
        kv("prominence_db", fmt_f64(self.prominence_db));
        kv("cluster_tol", self.cluster_tol.map_or_else(|| "auto".to_string(), fmt_f64));
        kv("amp_observable", self.amp_observable.name().to_string());
        kv("psd_observable", self.psd_observable.name().to_string());
        if let Some(v) = self.g_from {
            kv("g_from", fmt_f64(v));
        }
        if let Some(v) = self.g_to {
            kv("g_to", fmt_f64(v));
        }
        kv("g_steps", self.g_steps.to_string());
        kv("g_step", fmt_f64(self.g_step));
        kv("wq_from", fmt_f64(self.wq_from));
        kv("wq_to", fmt_f64(self.wq_to));
        kv("wq_step", fmt_f64(self.wq_step));
        kv("continuation", self.continuation.to_string());
        kv("out", self.out.display().to_string());
        kv("jobs", self.jobs.to_string());
        kv("resume", self.resume.to_string());
        kv("with_le", self.with_le.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parsing() {
        let kv = parse_kv("# comment\n\n omega-q = 0.15 \ng=0.3\nout = a=b\n").unwrap();
        assert_eq!(kv[0], (2 + 1, "omega_q".to_string(), "0.15".to_string()));
        assert_eq!(kv[2].2, "a=b");
        assert!(matches!(parse_kv("g 0.3").unwrap_err(), DickeError::Parse { line: 1, .. }));
        assert!(matches!(parse_kv("g=1\ng=2").unwrap_err(), DickeError::Parse { line: 2, .. }));
        assert!(parse_kv(" = 3").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default().resolved(Command::Phase);
        c.cluster_tol = Some(1e-4);
        c.omega_q = 1.0 / 3.0;
        c.out = PathBuf::from("/tmp/x y");
        let back = RunConfig::from_text(&c.to_text(Some(Command::Phase))).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_has_line() {
        let e = RunConfig::from_text("g = 0.3\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, DickeError::Parse { line: 2, .. }), "{e}");
        assert!(RunConfig::from_text("g = abc").is_err());
    }

    #[test]
    fn command_defaults() {
        let b = RunConfig::default().resolved(Command::Bifurcation);
        assert_eq!((b.g_from, b.g_to), (Some(0.37), Some(0.40)));
        let p = RunConfig::default().resolved(Command::Phase);
        assert_eq!((p.g_from, p.g_to), (Some(0.20), Some(0.45)));
        let mut q = RunConfig::default();
        q.g_from = Some(0.3);
        assert_eq!(q.resolved(Command::Phase).g_from, Some(0.3));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate(Command::Simulate).is_ok());
        c.kappa = -1.0;
        assert!(c.validate(Command::Simulate).is_err());
        let mut c = RunConfig::default().resolved(Command::Phase);
        c.wq_step = 0.0;
        assert!(c.validate(Command::Phase).is_err());
    }
}
