//! `dicke`: simulations, fixed points, Lyapunov exponents, spectra and sweeps
//! of the dissipative two-photon Dicke model, written as CSV.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use dicke_core::classify::{bifurcation_sweep, linear_grid, phase_diagram, stepped_grid, Cell};
use dicke_core::config::{parse_kv, Command, RunConfig, ECHO_FILE};
use dicke_core::io::{self, CsvOut, PhaseRow};
use dicke_core::lyapunov::{benettin_le, finite_time_les, raw_growth_curve};
use dicke_core::model::{g_t1, g_u};
use dicke_core::signal::{detect_peaks, fit_comb, psd};
use dicke_core::stability::{find_g_t2, fixed_points};
use dicke_core::{integrate, DickeError, Observable};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "dicke", version, about = "Semiclassical dynamics of the dissipative two-photon Dicke model")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one trajectory and write it as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also estimate the largest Lyapunov exponent.
        #[arg(long)]
        with_le: bool,
    },
    /// Fixed points, their stability, and the coupling thresholds.
    FixedPoints {
        #[command(flatten)]
        common: Common,
    },
    /// Largest Lyapunov exponent with its perturbation trace.
    Lyapunov {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        le: LeArgs,
        /// Also write the unrenormalized growth curve.
        #[arg(long)]
        raw: bool,
    },
    /// Power spectrum, spectral peaks and comb fit.
    Psd {
        #[command(flatten)]
        common: Common,
        /// Observable to transform (n or sz, or any state coordinate).
        #[arg(long)]
        observable: Option<String>,
        #[arg(long)]
        prominence_db: Option<f64>,
    },
    /// Oscillation amplitudes along a coupling sweep.
    Bifurcation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        le: LeArgs,
        #[arg(long)]
        g_from: Option<f64>,
        #[arg(long)]
        g_to: Option<f64>,
        /// Number of intervals between --g-from and --g-to.
        #[arg(long)]
        steps: Option<usize>,
        /// Start each coupling from the previous final state.
        #[arg(long)]
        continuation: bool,
        /// Observable whose maxima are collected.
        #[arg(long)]
        observable: Option<String>,
        #[arg(long)]
        cluster_tol: Option<f64>,
    },
    /// Regime labels on an (omega_q, g) grid.
    Phase {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        le: LeArgs,
        #[arg(long)]
        wq_from: Option<f64>,
        #[arg(long)]
        wq_to: Option<f64>,
        #[arg(long)]
        wq_step: Option<f64>,
        #[arg(long)]
        g_from: Option<f64>,
        #[arg(long)]
        g_to: Option<f64>,
        #[arg(long)]
        g_step: Option<f64>,
        /// Keep complete rows of an existing phase.csv and continue after them.
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long)]
    omega_q: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    gamma_down: Option<f64>,
    #[arg(long)]
    gamma_phi: Option<f64>,
    #[arg(long)]
    n_qubits: Option<u32>,
    #[arg(long)]
    t_total: Option<f64>,
    #[arg(long)]
    t_transient: Option<f64>,
    #[arg(long)]
    dt_sample: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    ic_scale: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// key = value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LeArgs {
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    ftle_window: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        self.load_inner(None)
    }

    /// Like `load`, but the coupling must come from --g or the config file.
    fn load_with_g(&self, sub: &str) -> Result<RunConfig, Failure> {
        self.load_inner(Some(sub))
    }

    fn load_inner(&self, require_g: Option<&str>) -> Result<RunConfig, Failure> {
        let mut c = RunConfig::default();
        let mut g_in_file = false;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            c.apply_text(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            g_in_file = parse_kv(&text)?.iter().any(|(_, k, _)| k == "g");
        }
        if let Some(sub) = require_g {
            if self.g.is_none() && !g_in_file {
                let mut cmd = Cli::command();
                cmd.build();
                let sub = cmd.find_subcommand_mut(sub).expect("known subcommand");
                sub.error(ErrorKind::MissingRequiredArgument, "the coupling --g is required (flag or config key g)").exit();
            }
        }
        set(&mut c.omega0, self.omega0);
        set(&mut c.omega_q, self.omega_q);
        set(&mut c.g, self.g);
        set(&mut c.kappa, self.kappa);
        set(&mut c.gamma_down, self.gamma_down);
        set(&mut c.gamma_phi, self.gamma_phi);
        set(&mut c.n_qubits, self.n_qubits);
        set(&mut c.t_total, self.t_total);
        set(&mut c.t_transient, self.t_transient);
        set(&mut c.dt_sample, self.dt_sample);
        set(&mut c.rel_tol, self.rel_tol);
        set(&mut c.abs_tol, self.abs_tol);
        set(&mut c.ic_scale, self.ic_scale);
        set(&mut c.out, self.out.clone());
        set(&mut c.seed, self.seed);
        set(&mut c.jobs, self.jobs);
        Ok(c)
    }
}

impl LeArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.delta0, self.delta0);
        set(&mut c.tau, self.tau);
        set(&mut c.ftle_window, self.ftle_window);
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Run(String),
}

impl From<DickeError> for Failure {
    fn from(e: DickeError) -> Self {
        match e {
            DickeError::Io(_) => Failure::Io(e.to_string()),
            DickeError::Config(_) | DickeError::Param(_) | DickeError::Parse { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn observable(s: &str) -> Result<Observable, Failure> {
    Observable::parse(s).ok_or_else(|| Failure::Usage(format!("unknown observable {s:?}")))
}

fn prepare(c: &RunConfig, cmd: Command) -> Result<(), Failure> {
    c.validate(cmd)?;
    fs::create_dir_all(&c.out).map_err(|e| Failure::Io(format!("{}: {e}", c.out.display())))?;
    let echo = c.out.join(ECHO_FILE);
    fs::write(&echo, c.to_text(Some(cmd))).map_err(|e| Failure::Io(format!("{}: {e}", echo.display())))?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Simulate { common, with_le } => {
            let mut c = common.load_with_g("simulate")?;
            c.with_le |= with_le;
            let c = c.resolved(Command::Simulate);
            prepare(&c, Command::Simulate)?;
            simulate(&c)
        }
        Cmd::FixedPoints { common } => {
            let c = common.load()?.resolved(Command::FixedPoints);
            prepare(&c, Command::FixedPoints)?;
            cmd_fixed_points(&c)
        }
        Cmd::Lyapunov { common, le, raw } => {
            let mut c = common.load_with_g("lyapunov")?;
            le.apply(&mut c);
            let c = c.resolved(Command::Lyapunov);
            prepare(&c, Command::Lyapunov)?;
            lyapunov(&c, raw)
        }
        Cmd::Psd { common, observable: obs, prominence_db } => {
            let mut c = common.load_with_g("psd")?;
            if let Some(o) = obs {
                c.psd_observable = observable(&o)?;
            }
            set(&mut c.prominence_db, prominence_db);
            let c = c.resolved(Command::Psd);
            prepare(&c, Command::Psd)?;
            spectrum(&c)
        }
        Cmd::Bifurcation { common, le, g_from, g_to, steps, continuation, observable: obs, cluster_tol } => {
            let mut c = common.load()?;
            le.apply(&mut c);
            c.g_from = g_from.or(c.g_from);
            c.g_to = g_to.or(c.g_to);
            set(&mut c.g_steps, steps);
            c.continuation |= continuation;
            if let Some(o) = obs {
                c.amp_observable = observable(&o)?;
            }
            c.cluster_tol = cluster_tol.or(c.cluster_tol);
            let c = c.resolved(Command::Bifurcation);
            prepare(&c, Command::Bifurcation)?;
            bifurcation(&c)
        }
        Cmd::Phase { common, le, wq_from, wq_to, wq_step, g_from, g_to, g_step, resume } => {
            let mut c = common.load()?;
            le.apply(&mut c);
            set(&mut c.wq_from, wq_from);
            set(&mut c.wq_to, wq_to);
            set(&mut c.wq_step, wq_step);
            c.g_from = g_from.or(c.g_from);
            c.g_to = g_to.or(c.g_to);
            set(&mut c.g_step, g_step);
            c.resume |= resume;
            let c = c.resolved(Command::Phase);
            prepare(&c, Command::Phase)?;
            phase(&c)
        }
    }
}

fn simulate(c: &RunConfig) -> Result<(), Failure> {
    let p = c.model()?;
    let ic = c.integration()?;
    let s0 = ic.initial_state(&p);
    let tr = integrate(&s0, &p, &ic)?;
    io::write_trajectory(create(&c.out, "trajectory.csv")?, &tr)?.flush()?;
    let mut line = format!("samples={} diverged={}", tr.len(), tr.diverged.is_some());
    if let Some(t) = tr.diverged {
        line += &format!(" diverged_at={t}");
    }
    if let Some(s) = tr.last() {
        line += &format!(" final=({},{},{},{},{},{})", s.x, s.y, s.n, s.sx, s.sy, s.sz);
    }
    if c.with_le && tr.diverged.is_none() {
        let le = benettin_le(&s0, &p, &ic, c.delta0, c.tau)?;
        line += &format!(" le={}", le.le_estimate);
    }
    println!("{line}");
    Ok(())
}

fn cmd_fixed_points(c: &RunConfig) -> Result<(), Failure> {
    let p = c.model()?;
    let (fps, notes) = fixed_points(&p)?;
    io::write_fixed_points(create(&c.out, "fixed_points.csv")?, &fps)?.flush()?;
    for n in &notes {
        eprintln!("note: {n}");
    }
    let gu = g_u(&p);
    let mut line = format!("g_u={gu:.6}");
    match g_t1(&p) {
        Ok(gt1) => {
            line = format!("g_t1={gt1:.6} {line}");
            match find_g_t2(&p, gt1, gu) {
                Ok(h) => line += &format!(" g_t2={:.6}", h.g),
                Err(why) => line += &format!(" g_t2=absent ({why})"),
            }
        }
        Err(e) => line = format!("g_t1=undefined ({e}) {line}"),
    }
    println!("{line}");
    Ok(())
}

fn lyapunov(c: &RunConfig, raw: bool) -> Result<(), Failure> {
    let p = c.model()?;
    let ic = c.integration()?;
    let s0 = ic.initial_state(&p);
    let mut trace = benettin_le(&s0, &p, &ic, c.delta0, c.tau)?;
    let window = match finite_time_les(&trace, c.ftle_window) {
        Ok(w) => {
            trace.finite_time_les = w;
            Some(c.ftle_window)
        }
        Err(e) => {
            eprintln!("note: {e}");
            None
        }
    };
    io::write_trace(create(&c.out, "trace.csv")?, &io::trace_rows(&trace, window))?.flush()?;
    if raw {
        let curve = raw_growth_curve(&s0, &p, &ic, c.delta0)?;
        io::write_trace(create(&c.out, "raw_growth.csv")?, &io::trace_rows(&curve, None))?.flush()?;
        println!("raw_slope={} saturated_at={:?}", curve.slope(), curve.saturated_at);
    }
    println!("le={} intervals={} diverged={}", trace.le_estimate, trace.increments.len(), trace.diverged.is_some());
    Ok(())
}

fn spectrum(c: &RunConfig) -> Result<(), Failure> {
    let p = c.model()?;
    let ic = c.integration()?;
    let tr = integrate(&ic.initial_state(&p), &p, &ic)?;
    if let Some(t) = tr.diverged {
        return Err(Failure::Run(format!("trajectory diverged at t={t}")));
    }
    let sp = detect_peaks(psd(&tr, c.psd_observable)?, c.prominence_db);
    let rows: Vec<(f64, f64)> = sp.freqs.iter().copied().zip(sp.psd.iter().copied()).collect();
    io::write_pairs(create(&c.out, "spectrum.csv")?, io::SPECTRUM_HEADER, &rows)?.flush()?;
    let peaks: Vec<(f64, f64)> = sp.peaks.iter().map(|k| (k.freq, k.power)).collect();
    io::write_pairs(create(&c.out, "peaks.csv")?, io::PEAKS_HEADER, &peaks)?.flush()?;
    let fit = fit_comb(&sp);
    println!("peaks={} noise_floor={} comb={:?} residual_bins={}", peaks.len(), sp.noise_floor, fit.kind, fit.residual);
    Ok(())
}

fn bifurcation(c: &RunConfig) -> Result<(), Failure> {
    let p = c.model()?;
    let ic = c.integration()?;
    let grid = linear_grid(c.g_from.expect("resolved"), c.g_to.expect("resolved"), c.g_steps);
    let mut amps = CsvOut::new(create(&c.out, "bifurcation.csv")?, &io::AMPLITUDE_HEADER)?;
    let mut labels = CsvOut::new(create(&c.out, "bifurcation_labels.csv")?, &io::PHASE_HEADER)?;
    let n = grid.len();
    let mut failure: Option<DickeError> = None;
    bifurcation_sweep(&p, &grid, &ic, &c.classify_options(), c.continuation, |cell, values| {
        if failure.is_some() {
            return;
        }
        let res = values
            .iter()
            .try_for_each(|&a| amps.row(&[io::fmt_f64(cell.g), io::fmt_f64(a)]))
            .and_then(|_| labels.row(&io::phase_row(&PhaseRow::from(cell))));
        if let Err(e) = res {
            failure = Some(e);
        }
        eprintln!("[{}/{n}] g={} {} clusters={}", cell.index + 1, cell.g, cell.label.kind, cell.label.n_amp_clusters);
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(())
}

fn phase(c: &RunConfig) -> Result<(), Failure> {
    let p = c.model()?;
    let ic = c.integration()?;
    let wq = stepped_grid(c.wq_from, c.wq_to, c.wq_step);
    let g = stepped_grid(c.g_from.expect("resolved"), c.g_to.expect("resolved"), c.g_step);
    let path = c.out.join("phase.csv");

    let mut start_row = 0;
    let mut out = if c.resume && path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        // a line cut off mid-write is dropped with its row
        let complete = &text[..text.rfind('\n').map_or(0, |k| k + 1)];
        let rows = io::read_phase(complete.as_bytes())?;
        start_row = rows.len() / g.len();
        let keep = &rows[..start_row * g.len()];
        for (k, r) in keep.iter().enumerate() {
            let (i, j) = (k / g.len(), k % g.len());
            if wq.get(i).is_none_or(|&w| w.to_bits() != r.omega_q.to_bits()) || g[j].to_bits() != r.g.to_bits() {
                return Err(Failure::Usage(format!("{} was written for a different grid", path.display())));
            }
        }
        io::write_phase(File::create(&path)?, keep)?;
        eprintln!("resuming after {start_row} complete rows");
        CsvOut::append(BufWriter::new(OpenOptions::new().append(true).open(&path)?))
    } else {
        CsvOut::new(create(&c.out, "phase.csv")?, &io::PHASE_HEADER)?
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.jobs)
        .build()
        .map_err(|e| Failure::Run(format!("thread pool: {e}")))?;
    let n_rows = wq.len();
    let mut failure: Option<DickeError> = None;
    pool.install(|| {
        phase_diagram(&p, &wq, &g, &ic, &c.classify_options(), start_row, |i, row: &[Cell]| {
            if failure.is_some() {
                return;
            }
            if let Err(e) = row.iter().try_for_each(|cell| out.row(&io::phase_row(&PhaseRow::from(cell)))) {
                failure = Some(e);
            }
            eprintln!("[row {}/{n_rows}] omega_q={}", i + 1, wq[i]);
        })
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(m)) => {
            eprintln!("I/O error: {m}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
