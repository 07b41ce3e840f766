//! Regime labels from Lyapunov, amplitude and spectral evidence, plus the
//! bifurcation and phase-diagram sweeps built on them.

use std::fmt;

use rayon::prelude::*;

use crate::error::{DickeError, Result};
use crate::integrator::{grid_len, integrate, IntegrationConfig, Observable, Trajectory};
use crate::lyapunov::{benettin_le, finite_time_les, two_cluster_split, DEFAULT_DELTA0, DEFAULT_TAU, LE_ZERO_BAND};
use crate::model::{ModelParams, State};
use crate::signal::{amplitudes_of, detect_peaks, distinct_amplitudes, fit_comb, psd_of, CombKind, DEFAULT_PROMINENCE_DB};
use crate::stability::{complete_sp, leading_eigenvalue, FixedPoint, FixedPointKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    Np,
    Sp,
    Periodic,
    QuasiPeriodic,
    IntermittentChaos,
    Chaos,
    Diverged,
    Undetermined,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 8] = [
        RegimeKind::Np,
        RegimeKind::Sp,
        RegimeKind::Periodic,
        RegimeKind::QuasiPeriodic,
        RegimeKind::IntermittentChaos,
        RegimeKind::Chaos,
        RegimeKind::Diverged,
        RegimeKind::Undetermined,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            RegimeKind::Np => "NP",
            RegimeKind::Sp => "SP",
            RegimeKind::Periodic => "Periodic",
            RegimeKind::QuasiPeriodic => "QuasiPeriodic",
            RegimeKind::IntermittentChaos => "IntermittentChaos",
            RegimeKind::Chaos => "Chaos",
            RegimeKind::Diverged => "Diverged",
            RegimeKind::Undetermined => "Undetermined",
        }
    }

    pub fn parse(s: &str) -> Option<RegimeKind> {
        RegimeKind::ALL.into_iter().find(|k| k.label() == s)
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLabel {
    pub kind: RegimeKind,
    /// Largest Lyapunov exponent; for fixed points, the leading real
    /// eigenvalue of the Jacobian there.
    pub le: f64,
    /// Amplitude clusters over the full (doubled) record.
    pub n_amp_clusters: usize,
    /// Whether the cluster count survived doubling the record.
    pub clusters_stable: Option<bool>,
    pub comb: CombKind,
    /// Rule firings, in order.
    pub evidence: Vec<String>,
}

impl RegimeLabel {
    fn new(kind: RegimeKind, le: f64, evidence: Vec<String>) -> RegimeLabel {
        RegimeLabel { kind, le, n_amp_clusters: 0, clusters_stable: None, comb: CombKind::None, evidence }
    }
}

/// Thresholds for [`classify_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub le_threshold: f64,
    /// Largest per-coordinate variance over the last tenth of the record for
    /// the trajectory to count as settled on a fixed point.
    pub convergence_variance: f64,
    pub ftle_window: f64,
    pub delta0: f64,
    pub tau: f64,
    pub cluster_tol: Option<f64>,
    pub amplitude_observable: Observable,
    pub psd_observable: Observable,
    pub prominence_db: f64,
}

pub const DEFAULT_FTLE_WINDOW: f64 = 1000.0;
pub const DEFAULT_CONVERGENCE_VARIANCE: f64 = 1e-12;
/// Relative resolution for raw distinct-amplitude counts.
pub const DISTINCT_REL: f64 = 1e-6;
/// Raw distinct-amplitude growth under record doubling that marks a
/// non-repeating amplitude sequence.
pub const DISTINCT_GROWTH: f64 = 1.5;

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            le_threshold: LE_ZERO_BAND,
            convergence_variance: DEFAULT_CONVERGENCE_VARIANCE,
            ftle_window: DEFAULT_FTLE_WINDOW,
            delta0: DEFAULT_DELTA0,
            tau: DEFAULT_TAU,
            cluster_tol: None,
            amplitude_observable: Observable::Sz,
            psd_observable: Observable::N,
            prominence_db: DEFAULT_PROMINENCE_DB,
        }
    }
}

/// Largest per-coordinate variance over the last tenth of `states`.
pub fn tail_variance(states: &[State]) -> f64 {
    let k = (states.len() / 10).max(2).min(states.len());
    let tail = &states[states.len() - k..];
    (0..State::DIM)
        .map(|i| {
            let m = tail.iter().map(|s| s[i]).sum::<f64>() / k as f64;
            tail.iter().map(|s| (s[i] - m).powi(2)).sum::<f64>() / k as f64
        })
        .fold(0.0, f64::max)
}

/// Nearest tracked fixed point to `s`.
pub fn nearest_fixed_point(s: &State, p: &ModelParams) -> (FixedPoint, f64) {
    let mut all = vec![FixedPoint::np(p)];
    all.extend(complete_sp(p).0);
    all.into_iter()
        .map(|fp| {
            let d = (fp.state - *s).norm2();
            (fp, d)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("NP is always present")
}

/// Label the attractor reached from the configured initial condition.
pub fn classify_point(p: &ModelParams, c: &IntegrationConfig, o: &ClassifyOptions) -> Result<RegimeLabel> {
    classify_from(&c.initial_state(p), p, c, o)
}

/// As [`classify_point`], starting from `s0`.
pub fn classify_from(s0: &State, p: &ModelParams, c: &IntegrationConfig, o: &ClassifyOptions) -> Result<RegimeLabel> {
    Ok(classify_detailed(s0, p, c, o)?.0)
}

/// Label plus the standard-length trajectory it was derived from.
pub fn classify_detailed(s0: &State, p: &ModelParams, c: &IntegrationConfig, o: &ClassifyOptions) -> Result<(RegimeLabel, Trajectory)> {
    c.validate()?;
    let record = c.record_length();
    let doubled = IntegrationConfig { t_total: c.t_transient + 2.0 * record, ..c.clone() };
    let long = integrate(s0, p, &doubled)?;
    let n1 = grid_len(record, c.dt_sample).min(long.len());
    let short = Trajectory {
        config: c.clone(),
        times: long.times[..n1].to_vec(),
        states: long.states[..n1].to_vec(),
        diverged: long.diverged.filter(|&t| t <= c.t_total),
        ..long.clone()
    };
    let mut ev = Vec::new();

    if let Some(t) = long.diverged {
        ev.push(format!("diverged at t={t:.6e}"));
        return Ok((RegimeLabel::new(RegimeKind::Diverged, f64::NAN, ev), short));
    }

    // (1) fixed point
    let var = tail_variance(&short.states);
    if var < o.convergence_variance {
        let last = *short.last().expect("non-empty record");
        let (fp, dist) = nearest_fixed_point(&last, p);
        let le = crate::model::jacobian(&fp.state, p)
            .ok()
            .and_then(|j| leading_eigenvalue(&j).ok())
            .map_or(f64::NAN, |(re, _)| re);
        ev.push(format!("tail variance {var:.3e} < {:.1e}; nearest {} at distance {dist:.3e}", o.convergence_variance, fp.kind));
        let kind = match fp.kind {
            FixedPointKind::Np => RegimeKind::Np,
            FixedPointKind::SpPlus | FixedPointKind::SpMinus => RegimeKind::Sp,
            FixedPointKind::Other => RegimeKind::Undetermined,
        };
        let kind = if dist > 1e-4 {
            ev.push("settled away from every tracked fixed point".into());
            RegimeKind::Undetermined
        } else {
            kind
        };
        return Ok((RegimeLabel::new(kind, le, ev), short));
    }

    let trace = benettin_le(s0, p, c, o.delta0, o.tau)?;
    if let Some(t) = trace.diverged {
        ev.push(format!("twin diverged at t={t:.6e}"));
        return Ok((RegimeLabel::new(RegimeKind::Diverged, f64::NAN, ev), short));
    }
    let le = trace.le_estimate;
    ev.push(format!("LE {le:.4e}"));

    // (2) positive exponent
    if le > o.le_threshold {
        let kind = match finite_time_les(&trace, o.ftle_window) {
            Ok(w) => {
                let values: Vec<f64> = w.iter().map(|v| v.1).collect();
                match two_cluster_split(&values) {
                    Some(b) => {
                        ev.push(format!(
                            "FTLE split {:.3e}/{:.3e} spread {:.3e} minority {:.2}",
                            b.low_center, b.high_center, b.spread, b.minority_weight
                        ));
                        if b.fires { RegimeKind::IntermittentChaos } else { RegimeKind::Chaos }
                    }
                    None => RegimeKind::Chaos,
                }
            }
            Err(e) => {
                ev.push(format!("no FTLE windows: {e}"));
                RegimeKind::Chaos
            }
        };
        let mut label = RegimeLabel::new(kind, le, ev);
        label.n_amp_clusters = clusters(&long, o, long.len())?.unwrap_or(0);
        return Ok((label, short));
    }

    let mut label = RegimeLabel::new(RegimeKind::Undetermined, le, ev);
    if le < -o.le_threshold {
        label.evidence.push("contracting but not settled".into());
        return Ok((label, short));
    }

    // (3) zero exponent
    let c1 = clusters(&long, o, n1)?;
    let c2 = clusters(&long, o, long.len())?;
    label.n_amp_clusters = c2.unwrap_or(0);
    let comb = match psd_of(&long.series(o.psd_observable)[..n1], c.dt_sample, o.psd_observable) {
        Ok(sp) => fit_comb(&detect_peaks(sp, o.prominence_db)).kind,
        Err(e) => {
            label.evidence.push(format!("no spectrum: {e}"));
            CombKind::None
        }
    };
    label.comb = comb;
    let amps = long.series(o.amplitude_observable);
    let (d1, d2) = (distinct_amplitudes(&amps[..n1], DISTINCT_REL), distinct_amplitudes(&amps, DISTINCT_REL));
    label.evidence.push(format!("comb {comb:?}; clusters {c1:?} -> {c2:?}; distinct {d1} -> {d2}"));
    let (Some(c1), Some(c2)) = (c1, c2) else {
        label.evidence.push("non-oscillatory".into());
        return Ok((label, short));
    };
    label.clusters_stable = Some(c1 == c2);
    // a filling band of amplitudes merges clusters, so raw counts also count
    let grows = c2 > c1 || d2 as f64 >= DISTINCT_GROWTH * d1 as f64;
    label.kind = match comb {
        CombKind::SingleComb { .. } if c1 == c2 => RegimeKind::Periodic,
        CombKind::TwoFrequency { .. } => RegimeKind::QuasiPeriodic,
        _ if grows => RegimeKind::QuasiPeriodic,
        _ => RegimeKind::Undetermined,
    };
    Ok((label, short))
}

fn clusters(tr: &Trajectory, o: &ClassifyOptions, upto: usize) -> Result<Option<usize>> {
    let xs = tr.series(o.amplitude_observable);
    let a = amplitudes_of(&xs[..upto], o.amplitude_observable, o.cluster_tol)?;
    Ok((!a.non_oscillatory).then(|| a.n_clusters()))
}

/// SplitMix64 finalizer; spreads `(seed, index)` into a per-cell seed.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub omega_q: f64,
    pub g: f64,
    /// Row-major index in the sweep.
    pub index: usize,
    pub seed: u64,
    pub label: RegimeLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub wq_grid: Vec<f64>,
    pub g_grid: Vec<f64>,
    /// Row-major: `cells[i * g_grid.len() + j]` is `(wq_grid[i], g_grid[j])`.
    pub cells: Vec<Cell>,
    pub seed: u64,
    pub continuation: bool,
}

impl SweepResult {
    pub fn row(&self, i: usize) -> &[Cell] {
        let w = self.g_grid.len();
        &self.cells[i * w..(i + 1) * w]
    }

    pub fn seed_policy(&self) -> &'static str {
        if self.continuation {
            "first cell seeded by cell_seed(seed, 0); later cells start from the previous final state"
        } else {
            "cell k seeded by cell_seed(seed, k), row-major"
        }
    }
}

/// Grid from `from` to `to` inclusive in `steps` intervals.
pub fn linear_grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![from];
    }
    (0..=steps).map(|k| from + (to - from) * k as f64 / steps as f64).collect()
}

/// Inclusive grid by step, robust to rounding at the end point.
pub fn stepped_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    linear_grid(from, from + n as f64 * step, n)
}

pub fn default_wq_grid() -> Vec<f64> {
    stepped_grid(0.05, 0.30, 0.005)
}

pub fn default_g_grid() -> Vec<f64> {
    stepped_grid(0.20, 0.45, 0.0025)
}

/// Bifurcation table: amplitudes per coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Bifurcation {
    pub sweep: SweepResult,
    /// `(g, amplitude)` rows in sweep order.
    pub amplitudes: Vec<(f64, f64)>,
    pub cluster_counts: Vec<usize>,
}

fn failed_label(e: &DickeError) -> RegimeLabel {
    RegimeLabel::new(RegimeKind::Undetermined, f64::NAN, vec![format!("failed: {e}")])
}

fn sweep_cell(s0: &State, p: &ModelParams, c: &IntegrationConfig, o: &ClassifyOptions) -> (RegimeLabel, Vec<f64>, Option<State>) {
    match classify_detailed(s0, p, c, o) {
        Ok((label, tr)) => {
            let amps = if label.kind == RegimeKind::Diverged {
                Vec::new()
            } else {
                amplitudes_of(&tr.series(o.amplitude_observable), o.amplitude_observable, o.cluster_tol)
                    .map(|a| a.values)
                    .unwrap_or_default()
            };
            let last = tr.last().copied().filter(|s| s.is_finite() && label.kind != RegimeKind::Diverged);
            (label, amps, last)
        }
        Err(e) => (failed_label(&e), Vec::new(), None),
    }
}

/// Sweep `g` at fixed other parameters, calling `on_cell` as each cell
/// completes (in grid order).
pub fn bifurcation_sweep(
    p_base: &ModelParams,
    g_grid: &[f64],
    c: &IntegrationConfig,
    o: &ClassifyOptions,
    continuation: bool,
    mut on_cell: impl FnMut(&Cell, &[f64]),
) -> Result<Bifurcation> {
    if !monotone(g_grid) {
        return Err(DickeError::Config("g grid must be strictly monotone".into()));
    }
    c.validate()?;
    let mut out = Bifurcation {
        sweep: SweepResult {
            wq_grid: vec![p_base.omega_q],
            g_grid: g_grid.to_vec(),
            cells: Vec::with_capacity(g_grid.len()),
            seed: c.seed,
            continuation,
        },
        amplitudes: Vec::new(),
        cluster_counts: Vec::new(),
    };
    let mut carry: Option<State> = None;
    for (k, &g) in g_grid.iter().enumerate() {
        let p = p_base.with_g(g)?;
        let seed = cell_seed(c.seed, if continuation { 0 } else { k });
        let ck = IntegrationConfig { seed, ..c.clone() };
        let s0 = match (continuation, carry) {
            (true, Some(s)) => s,
            _ => ck.initial_state(&p),
        };
        let (label, amps, last) = sweep_cell(&s0, &p, &ck, o);
        carry = last;
        let cell = Cell { omega_q: p_base.omega_q, g, index: k, seed, label };
        on_cell(&cell, &amps);
        out.cluster_counts.push(cell.label.n_amp_clusters);
        out.amplitudes.extend(amps.iter().map(|&a| (g, a)));
        out.sweep.cells.push(cell);
    }
    Ok(out)
}

fn monotone(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0]) || xs.windows(2).all(|w| w[1] < w[0])
}

/// Classify every `(omega_q, g)` cell. Rows run in order; cells within a row
/// run on the current rayon pool and are gathered by index. `on_row` sees
/// each finished row. Rows before `start_row` are skipped (for resuming).
pub fn phase_diagram(
    p_base: &ModelParams,
    wq_grid: &[f64],
    g_grid: &[f64],
    c: &IntegrationConfig,
    o: &ClassifyOptions,
    start_row: usize,
    mut on_row: impl FnMut(usize, &[Cell]),
) -> Result<SweepResult> {
    if wq_grid.is_empty() || g_grid.is_empty() {
        return Err(DickeError::Config("phase diagram grids must be non-empty".into()));
    }
    c.validate()?;
    let mut out = SweepResult {
        wq_grid: wq_grid.to_vec(),
        g_grid: g_grid.to_vec(),
        cells: Vec::with_capacity(wq_grid.len() * g_grid.len()),
        seed: c.seed,
        continuation: false,
    };
    for (i, &wq) in wq_grid.iter().enumerate().skip(start_row) {
        let row_p = p_base.with_omega_q(wq)?;
        let row: Vec<Cell> = g_grid
            .par_iter()
            .enumerate()
            .map(|(j, &g)| {
                let index = i * g_grid.len() + j;
                let seed = cell_seed(c.seed, index);
                let label = match row_p.with_g(g) {
                    Ok(p) => {
                        let ck = IntegrationConfig { seed, ..c.clone() };
                        classify_point(&p, &ck, o).unwrap_or_else(|e| failed_label(&e))
                    }
                    Err(e) => failed_label(&e),
                };
                Cell { omega_q: wq, g, index, seed, label }
            })
            .collect();
        on_row(i, &row);
        out.cells.extend(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> IntegrationConfig {
        IntegrationConfig { t_total: 3000.0, t_transient: 1000.0, ..IntegrationConfig::default() }
    }

    #[test]
    fn below_threshold_is_np() {
        let p = ModelParams::defaults(0.1, 0.2);
        let l = classify_point(&p, &IntegrationConfig::default(), &ClassifyOptions::default()).unwrap();
        assert_eq!(l.kind, RegimeKind::Np, "{:?}", l.evidence);
        assert!(l.le < 0.0);
    }

    #[test]
    fn labels_round_trip() {
        for k in RegimeKind::ALL {
            assert_eq!(RegimeKind::parse(k.label()), Some(k));
        }
        assert_eq!(RegimeKind::parse("np"), None);
    }

    #[test]
    fn default_grids() {
        let w = default_wq_grid();
        assert_eq!(w.len(), 51);
        assert!((w[50] - 0.30).abs() < 1e-12);
        let g = default_g_grid();
        assert_eq!(g.len(), 101);
        assert!((g[100] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn cell_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| cell_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(cell_seed(7, 3), cell_seed(7, 3));
    }

    #[test]
    fn empty_bifurcation_grid() {
        let p = ModelParams::defaults(0.1, 0.3);
        let b = bifurcation_sweep(&p, &[], &short(), &ClassifyOptions::default(), false, |_, _| {}).unwrap();
        assert!(b.sweep.cells.is_empty() && b.amplitudes.is_empty());
    }

    #[test]
    fn phase_diagram_is_deterministic() {
        let p = ModelParams::defaults(0.1, 0.3);
        let o = ClassifyOptions::default();
        let run = || phase_diagram(&p, &[0.1, 0.2], &[0.2, 0.22], &short(), &o, 0, |_, _| {}).unwrap();
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.cells.len(), 4);
        assert!(a.cells.iter().all(|c| c.label.kind == RegimeKind::Np));
        assert!(phase_diagram(&p, &[], &[0.2], &short(), &o, 0, |_, _| {}).is_err());
    }
}
