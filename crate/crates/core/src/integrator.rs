//! Adaptive Dormand-Prince 5(4) integration with uniform-grid sampling.
//!
//! Step endpoints are forced onto the sampling grid, so every stored sample is
//! an actual integrator state rather than an interpolant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DickeError, Result};
use crate::model::{flow, ModelParams, State};

/// Coordinates beyond this magnitude count as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// How the initial condition of a run is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// NP plus a seeded uniform perturbation of size `ic_scale`.
    NpPerturbed,
    Explicit(State),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub t_total: f64,
    pub t_transient: f64,
    pub dt_sample: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub seed: u64,
    pub ic: InitialCondition,
    pub ic_scale: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            t_total: 5e4,
            t_transient: 2e4,
            dt_sample: 0.5,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 1.0,
            seed: 1,
            ic: InitialCondition::NpPerturbed,
            ic_scale: 1e-3,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DickeError::Config(m.to_string()));
        if !(self.t_total.is_finite() && self.t_transient.is_finite()) {
            return bad("times must be finite");
        }
        if !(0.0 <= self.t_transient && self.t_transient < self.t_total) {
            return bad("need 0 <= t_transient < t_total");
        }
        if !(self.dt_sample > 0.0 && self.dt_sample.is_finite()) {
            return bad("dt_sample must be > 0");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be > 0");
        }
        if !(self.ic_scale >= 0.0 && self.ic_scale.is_finite()) {
            return bad("ic_scale must be >= 0");
        }
        Ok(())
    }

    /// Length of the sampled (post-transient) record.
    pub fn record_length(&self) -> f64 {
        self.t_total - self.t_transient
    }

    pub fn initial_state(&self, p: &ModelParams) -> State {
        match self.ic {
            InitialCondition::NpPerturbed => default_ic(p, self.seed, self.ic_scale),
            InitialCondition::Explicit(s) => s,
        }
    }
}

/// NP point plus independent uniform perturbations in `[-scale, scale]`.
pub fn default_ic(_p: &ModelParams, seed: u64, scale: f64) -> State {
    if scale == 0.0 {
        return State::NP;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let np = State::NP.to_array();
    State::from_array(std::array::from_fn(|i| np[i] + rng.random_range(-scale..=scale)))
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Reason an integration stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    /// State left the finite / bounded region at time `t`.
    Diverged { t: f64 },
    /// Step size collapsed below roundoff at time `t`.
    StepUnderflow { t: f64 },
}

impl StepFailure {
    pub fn time(&self) -> f64 {
        match *self {
            StepFailure::Diverged { t } | StepFailure::StepUnderflow { t } => t,
        }
    }
}

/// Embedded 5(4) Runge-Kutta stepper on a fixed-size state with PI step control.
#[derive(Debug, Clone)]
pub struct Dopri5<const D: usize> {
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    h: f64,
    err_prev: f64,
    /// Derivative at the current point (first-same-as-last).
    k1: Option<[f64; D]>,
    pub accepted: u64,
    pub rejected: u64,
}

impl<const D: usize> Dopri5<D> {
    pub fn new(rel_tol: f64, abs_tol: f64, max_step: f64) -> Self {
        Dopri5 {
            rel_tol,
            abs_tol,
            max_step,
            h: 0.0,
            err_prev: 1e-4,
            k1: None,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Forget the cached derivative, e.g. after the state was edited externally.
    pub fn reset_fsal(&mut self) {
        self.k1 = None;
    }

    fn initial_step<F: Fn(&[f64; D]) -> [f64; D]>(&self, f: &F, y: &[f64; D], k1: &[f64; D]) -> f64 {
        // Hairer's starting-step heuristic.
        let sc = |i: usize| self.abs_tol + self.rel_tol * y[i].abs();
        let d0 = rms(D, |i| y[i] / sc(i));
        let d1 = rms(D, |i| k1[i] / sc(i));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.max_step);
        let y1: [f64; D] = std::array::from_fn(|i| y[i] + h0 * k1[i]);
        let k2 = f(&y1);
        let d2 = rms(D, |i| (k2[i] - k1[i]) / sc(i)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.max_step)
    }

    /// Integrate from `*t` to exactly `t_end`, updating `y` in place.
    pub fn advance<F>(&mut self, f: &F, t: &mut f64, y: &mut [f64; D], t_end: f64) -> std::result::Result<(), StepFailure>
    where
        F: Fn(&[f64; D]) -> [f64; D],
    {
        const SAFE: f64 = 0.9;
        const FAC_MIN: f64 = 0.2;
        const FAC_MAX: f64 = 10.0;
        const BETA: f64 = 0.04;
        const EXPO: f64 = 0.2 - BETA * 0.75;

        let mut k1 = match self.k1 {
            Some(k) => k,
            None => f(y),
        };
        if self.h <= 0.0 {
            self.h = self.initial_step(f, y, &k1);
        }
        while *t < t_end {
            let remaining = t_end - *t;
            let clamped = self.h >= remaining;
            let h = if clamped { remaining } else { self.h };
            if h <= 1e-14 * t.abs().max(1.0) {
                if clamped {
                    // sub-roundoff remainder: snap to the target
                    *t = t_end;
                    break;
                }
                return Err(StepFailure::StepUnderflow { t: *t });
            }

            let stage = |coef: &[(f64, &[f64; D])]| -> [f64; D] {
                std::array::from_fn(|i| y[i] + h * coef.iter().map(|(a, k)| a * k[i]).sum::<f64>())
            };
            let k2 = f(&stage(&[(A21, &k1)]));
            let k3 = f(&stage(&[(A31, &k1), (A32, &k2)]));
            let k4 = f(&stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(&stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(&stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = stage(&[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(&y_new);

            let err = rms(D, |i| {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                e / (self.abs_tol + self.rel_tol * y[i].abs().max(y_new[i].abs()))
            });

            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                if h > 1e-10 {
                    self.h = h * FAC_MIN;
                    self.rejected += 1;
                    continue;
                }
                return Err(StepFailure::Diverged { t: *t });
            }

            if err <= 1.0 {
                let fac = (err.max(1e-10).powf(EXPO) / self.err_prev.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let h_next = (h / fac).min(self.max_step);
                self.err_prev = err.max(1e-4);
                *t = if clamped { t_end } else { *t + h };
                *y = y_new;
                k1 = k7;
                self.accepted += 1;
                // a clamped step says nothing about the natural step size
                self.h = if clamped { h_next.max(self.h) } else { h_next };
                if y.iter().any(|v| v.abs() > DIVERGENCE_BOUND) {
                    self.k1 = Some(k1);
                    return Err(StepFailure::Diverged { t: *t });
                }
            } else {
                let fac = (err.powf(EXPO) / SAFE).min(1.0 / FAC_MIN);
                self.h = h / fac;
                self.rejected += 1;
            }
        }
        self.k1 = Some(k1);
        Ok(())
    }
}

#[inline]
fn rms(d: usize, f: impl Fn(usize) -> f64) -> f64 {
    ((0..d).map(|i| f(i).powi(2)).sum::<f64>() / d as f64).sqrt()
}

/// Uniformly sampled post-transient time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    pub config: IntegrationConfig,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// State at the end of the discarded transient.
    pub transient_state: State,
    /// Time of divergence, if the run blew up.
    pub diverged: Option<f64>,
    /// Set when a resample had to interpolate between stored samples.
    pub interpolated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.config.dt_sample
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }

    /// One coordinate of the state as a plain series.
    pub fn series(&self, obs: Observable) -> Vec<f64> {
        self.states.iter().map(|s| obs.read(s)).collect()
    }
}

/// Scalar readout of the state used by the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    X,
    Y,
    /// Rescaled photon number.
    N,
    Sx,
    Sy,
    Sz,
}

impl Observable {
    pub fn read(self, s: &State) -> f64 {
        match self {
            Observable::X => s.x,
            Observable::Y => s.y,
            Observable::N => s.n,
            Observable::Sx => s.sx,
            Observable::Sy => s.sy,
            Observable::Sz => s.sz,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::X => "x",
            Observable::Y => "y",
            Observable::N => "n",
            Observable::Sx => "sx",
            Observable::Sy => "sy",
            Observable::Sz => "sz",
        }
    }

    pub fn parse(s: &str) -> Option<Observable> {
        Some(match s {
            "x" => Observable::X,
            "y" => Observable::Y,
            "n" => Observable::N,
            "sx" => Observable::Sx,
            "sy" => Observable::Sy,
            "sz" => Observable::Sz,
            _ => return None,
        })
    }
}

/// Index of the `k`-th sample time; computed, not accumulated.
#[inline]
pub(crate) fn grid_time(t0: f64, dt: f64, k: usize) -> f64 {
    t0 + dt * k as f64
}

pub(crate) fn grid_len(span: f64, dt: f64) -> usize {
    (span / dt + 1e-9).floor() as usize + 1
}

/// Integrate the mean-field flow and sample it after the transient.
pub fn integrate(s0: &State, p: &ModelParams, c: &IntegrationConfig) -> Result<Trajectory> {
    c.validate()?;
    if !s0.is_finite() {
        return Err(DickeError::Numeric(format!("non-finite initial state {s0}")));
    }
    let f = |y: &[f64; 6]| flow(y, p);
    let mut stepper = Dopri5::<6>::new(c.rel_tol, c.abs_tol, c.max_step);
    let mut t = 0.0;
    let mut y = s0.to_array();

    let n_samples = grid_len(c.record_length(), c.dt_sample);
    let mut tr = Trajectory {
        params: *p,
        config: *c,
        times: Vec::with_capacity(n_samples),
        states: Vec::with_capacity(n_samples),
        transient_state: *s0,
        diverged: None,
        interpolated: false,
    };

    if let Err(e) = stepper.advance(&f, &mut t, &mut y, c.t_transient) {
        tr.diverged = Some(e.time());
        tr.transient_state = State::from_array(y);
        return Ok(tr);
    }
    tr.transient_state = State::from_array(y);
    for k in 0..n_samples {
        let tk = grid_time(c.t_transient, c.dt_sample, k);
        if let Err(e) = stepper.advance(&f, &mut t, &mut y, tk) {
            tr.diverged = Some(e.time());
            break;
        }
        tr.times.push(tk);
        tr.states.push(State::from_array(y));
    }
    Ok(tr)
}

/// Decimate a trajectory onto a coarser uniform grid.
pub fn resample(tr: &Trajectory, new_dt: f64) -> Result<Trajectory> {
    let dt = tr.config.dt_sample;
    if !(new_dt.is_finite() && new_dt >= dt * (1.0 - 1e-12)) {
        return Err(DickeError::Config(format!("new_dt {new_dt} must be >= dt_sample {dt}")));
    }
    let ratio = new_dt / dt;
    let stride = ratio.round();
    let mut out = tr.clone();
    out.config.dt_sample = new_dt;
    if (ratio - stride).abs() < 1e-9 {
        let stride = stride as usize;
        out.times = tr.times.iter().step_by(stride).copied().collect();
        out.states = tr.states.iter().step_by(stride).copied().collect();
        return Ok(out);
    }
    out.interpolated = true;
    out.times.clear();
    out.states.clear();
    let Some(&t0) = tr.times.first() else { return Ok(out) };
    let span = tr.times.last().unwrap() - t0;
    for k in 0..grid_len(span, new_dt) {
        let tk = grid_time(t0, new_dt, k);
        let pos = (tk - t0) / dt;
        let i = (pos.floor() as usize).min(tr.len() - 1);
        let frac = pos - i as f64;
        let s = if i + 1 < tr.len() {
            tr.states[i] + frac * (tr.states[i + 1] - tr.states[i])
        } else {
            tr.states[i]
        };
        out.times.push(tk);
        out.states.push(s);
    }
    Ok(out)
}
