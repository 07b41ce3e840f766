//! Largest Lyapunov exponent by twin-trajectory renormalization, raw
//! perturbation-growth curves, and finite-time exponents.
//!
//! The exponent itself uses the Euclidean distance over all six coordinates.
//! The reported `log_eps` curve follows the cavity-intensity coordinate `n`
//! only, reconstructed as if the perturbation had never been rescaled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DickeError, Result};
use crate::integrator::{grid_len, grid_time, Dopri5, IntegrationConfig};
use crate::model::{flow, ModelParams, State};

pub const DEFAULT_DELTA0: f64 = 1e-8;
pub const DEFAULT_TAU: f64 = 1.0;

/// Exponents above this count as chaotic; `|le| <= LE_ZERO_BAND` is regular.
pub const LE_ZERO_BAND: f64 = 1e-3;

/// Growth of a twin-trajectory separation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationTrace {
    /// Sample times (post-transient).
    pub times: Vec<f64>,
    /// `ln |dn|` of the cavity-intensity separation, unrenormalized.
    pub log_eps: Vec<f64>,
    /// `ln` of the full-state separation, unrenormalized.
    pub log_dist: Vec<f64>,
    /// Per-interval `ln(d / delta0)`; empty for raw growth curves.
    pub increments: Vec<f64>,
    /// Times at which the perturbation was rescaled.
    pub renorm_times: Vec<f64>,
    pub le_estimate: f64,
    /// `(window_center, value)`.
    pub finite_time_les: Vec<(f64, f64)>,
    pub tau: f64,
    pub delta0: f64,
    /// Set if either twin diverged; the trace stops there.
    pub diverged: Option<f64>,
    /// Raw curves only: time the separation saturated.
    pub saturated_at: Option<f64>,
}

impl PerturbationTrace {
    /// Least-squares slope of the full-state log separation against time.
    pub fn slope(&self) -> f64 {
        least_squares_slope(&self.times, &self.log_dist)
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a + if self.increments.is_empty() { 0.0 } else { self.tau },
            _ => 0.0,
        }
    }
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| y.is_finite()).map(|(x, y)| (*x, *y)).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn twin_flow(p: &ModelParams) -> impl Fn(&[f64; 12]) -> [f64; 12] + '_ {
    move |y: &[f64; 12]| {
        let a = flow(&[y[0], y[1], y[2], y[3], y[4], y[5]], p);
        let b = flow(&[y[6], y[7], y[8], y[9], y[10], y[11]], p);
        [a[0], a[1], a[2], a[3], a[4], a[5], b[0], b[1], b[2], b[3], b[4], b[5]]
    }
}

fn separation(y: &[f64; 12]) -> ([f64; 6], f64) {
    let d: [f64; 6] = std::array::from_fn(|i| y[i + 6] - y[i]);
    (d, d.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Seeded unit direction for the initial perturbation.
fn perturbation_direction(seed: u64) -> [f64; 6] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_1E55);
    loop {
        let v: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.map(|x| x / norm);
        }
    }
}

fn twin_start(s0: &State, delta0: f64, seed: u64) -> [f64; 12] {
    let r = s0.to_array();
    let dir = perturbation_direction(seed);
    std::array::from_fn(|i| if i < 6 { r[i] } else { r[i - 6] + delta0 * dir[i - 6] })
}

fn check_inputs(s0: &State, c: &IntegrationConfig, delta0: f64) -> Result<()> {
    c.validate()?;
    if !s0.is_finite() {
        return Err(DickeError::Numeric(format!("non-finite initial state {s0}")));
    }
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(DickeError::Config(format!("delta0 must be > 0, got {delta0}")));
    }
    Ok(())
}

/// Largest Lyapunov exponent by periodic renormalization of a twin.
///
/// Both twins start at `s0` and `s0 + delta0 u`. Every `tau` the separation
/// `d` is measured and the twin is pulled back to distance `delta0` along the
/// current separation. Increments `ln(d/delta0)` are averaged over the
/// intervals that lie after `c.t_transient`.
pub fn benettin_le(s0: &State, p: &ModelParams, c: &IntegrationConfig, delta0: f64, tau: f64) -> Result<PerturbationTrace> {
    check_inputs(s0, c, delta0)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(DickeError::Config(format!("tau must be > 0, got {tau}")));
    }
    let f = twin_flow(p);
    let mut stepper = Dopri5::<12>::new(c.rel_tol, c.abs_tol, c.max_step.min(tau));
    let mut y = twin_start(s0, delta0, c.seed);
    let mut t = 0.0;

    let mut tr = PerturbationTrace {
        times: Vec::new(),
        log_eps: Vec::new(),
        log_dist: Vec::new(),
        increments: Vec::new(),
        renorm_times: Vec::new(),
        le_estimate: f64::NAN,
        finite_time_les: Vec::new(),
        tau,
        delta0,
        diverged: None,
        saturated_at: None,
    };

    let n_steps = ((c.t_total / tau) + 1e-9).floor() as usize;
    // running log of the virtual, never-rescaled separation
    let mut log_scale = delta0.ln();
    for k in 1..=n_steps {
        let tk = k as f64 * tau;
        if let Err(e) = stepper.advance(&f, &mut t, &mut y, tk) {
            tr.diverged = Some(e.time());
            break;
        }
        let (d, dist) = separation(&y);
        if !(dist > 0.0 && dist.is_finite()) {
            tr.diverged = Some(tk);
            break;
        }
        let inc = (dist / delta0).ln();
        if tk - tau >= c.t_transient - 1e-9 {
            tr.times.push(tk);
            tr.increments.push(inc);
            tr.log_dist.push(log_scale + inc);
            tr.log_eps.push(log_scale + inc + (d[2].abs() / dist).ln());
            tr.renorm_times.push(tk);
            log_scale += inc;
        }
        let shrink = delta0 / dist;
        for i in 0..6 {
            y[i + 6] = y[i] + shrink * d[i];
        }
        stepper.reset_fsal();
    }
    if !tr.increments.is_empty() {
        tr.le_estimate = tr.increments.iter().sum::<f64>() / (tr.increments.len() as f64 * tau);
    }
    Ok(tr)
}

/// Separation growth without renormalization.
///
/// The reference is first carried through the transient and the attractor's
/// bounding-box diagonal measured over the record. A twin is then started on
/// the attractor and both are followed until the separation exceeds a tenth
/// of that diameter or the record ends.
pub fn raw_growth_curve(s0: &State, p: &ModelParams, c: &IntegrationConfig, delta0: f64) -> Result<PerturbationTrace> {
    check_inputs(s0, c, delta0)?;
    let single = |y: &[f64; 6]| flow(y, p);
    let mut st = Dopri5::<6>::new(c.rel_tol, c.abs_tol, c.max_step);
    let mut t = 0.0;
    let mut y = s0.to_array();
    let mut out = PerturbationTrace {
        times: Vec::new(),
        log_eps: Vec::new(),
        log_dist: Vec::new(),
        increments: Vec::new(),
        renorm_times: Vec::new(),
        le_estimate: f64::NAN,
        finite_time_les: Vec::new(),
        tau: c.dt_sample,
        delta0,
        diverged: None,
        saturated_at: None,
    };
    if let Err(e) = st.advance(&single, &mut t, &mut y, c.t_transient) {
        out.diverged = Some(e.time());
        return Ok(out);
    }
    let on_attractor = y;

    let n = grid_len(c.record_length(), c.dt_sample);
    let (mut lo, mut hi) = (y, y);
    for k in 1..n {
        if let Err(e) = st.advance(&single, &mut t, &mut y, grid_time(c.t_transient, c.dt_sample, k)) {
            out.diverged = Some(e.time());
            return Ok(out);
        }
        for i in 0..6 {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
    }
    let diameter = (0..6).map(|i| (hi[i] - lo[i]).powi(2)).sum::<f64>().sqrt();
    let saturation = 0.1 * diameter.max(delta0 * 10.0);

    let f = twin_flow(p);
    let mut tw = Dopri5::<12>::new(c.rel_tol, c.abs_tol, c.max_step);
    let mut y = twin_start(&State::from_array(on_attractor), delta0, c.seed);
    let mut t = c.t_transient;
    for k in 1..n {
        let tk = grid_time(c.t_transient, c.dt_sample, k);
        if let Err(e) = tw.advance(&f, &mut t, &mut y, tk) {
            out.diverged = Some(e.time());
            break;
        }
        let (d, dist) = separation(&y);
        out.times.push(tk);
        out.log_dist.push(dist.ln());
        out.log_eps.push(d[2].abs().ln());
        if dist > saturation {
            out.saturated_at = Some(tk);
            break;
        }
    }
    out.le_estimate = out.slope();
    Ok(out)
}

/// Mean expansion rate over consecutive non-overlapping windows of length
/// `window` of a renormalized trace.
pub fn finite_time_les(trace: &PerturbationTrace, window: f64) -> Result<Vec<(f64, f64)>> {
    if trace.increments.is_empty() {
        return Err(DickeError::Config("finite-time exponents need a renormalized trace".into()));
    }
    if !(window >= 10.0 * trace.tau * (1.0 - 1e-12)) {
        return Err(DickeError::Config(format!("window {window} must be >= 10 tau = {}", 10.0 * trace.tau)));
    }
    if window > trace.duration() + 1e-9 {
        return Err(DickeError::Config(format!("window {window} longer than trace {}", trace.duration())));
    }
    let per = (window / trace.tau).round() as usize;
    Ok(trace
        .increments
        .chunks_exact(per)
        .zip(trace.times.chunks_exact(per))
        .map(|(inc, ts)| {
            let start = ts[0] - trace.tau;
            let center = start + 0.5 * per as f64 * trace.tau;
            (center, inc.iter().sum::<f64>() / (per as f64 * trace.tau))
        })
        .collect())
}

/// Outcome of the two-cluster split of finite-time exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bimodality {
    pub low_center: f64,
    pub high_center: f64,
    /// Pooled within-cluster standard deviation.
    pub spread: f64,
    /// Weight of the smaller cluster.
    pub minority_weight: f64,
    pub fires: bool,
}

/// Minimum center separation in units of the within-cluster spread.
pub const BIMODAL_SEPARATION: f64 = 4.0;
/// Minimum weight of the smaller cluster.
pub const BIMODAL_MIN_WEIGHT: f64 = 0.1;

/// Optimal 1-D two-means split (contiguous in sorted order).
pub fn two_cluster_split(values: &[f64]) -> Option<Bimodality> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 4 {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + v[i];
        prefix_sq[i + 1] = prefix_sq[i] + v[i] * v[i];
    }
    let ss = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        (prefix_sq[b] - prefix_sq[a] - s * s / m).max(0.0)
    };
    let split = (1..n).min_by(|&i, &j| (ss(0, i) + ss(i, n)).partial_cmp(&(ss(0, j) + ss(j, n))).unwrap())?;
    let low_center = prefix[split] / split as f64;
    let high_center = (prefix[n] - prefix[split]) / (n - split) as f64;
    let spread = ((ss(0, split) + ss(split, n)) / n as f64).sqrt();
    let minority_weight = split.min(n - split) as f64 / n as f64;
    let fires = high_center - low_center > BIMODAL_SEPARATION * spread && minority_weight > BIMODAL_MIN_WEIGHT;
    Some(Bimodality { low_center, high_center, spread, minority_weight, fires })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::default_ic;
    use crate::model::ModelParams;

    fn cfg(t_total: f64, t_transient: f64) -> IntegrationConfig {
        IntegrationConfig { t_total, t_transient, ..IntegrationConfig::default() }
    }

    #[test]
    fn stable_np_contracts() {
        let p = ModelParams::defaults(0.1, 0.2);
        let tr = benettin_le(&default_ic(&p, 1, 1e-3), &p, &cfg(600.0, 300.0), DEFAULT_DELTA0, DEFAULT_TAU).unwrap();
        assert!(tr.le_estimate < -LE_ZERO_BAND, "{}", tr.le_estimate);
        assert_eq!(tr.increments.len(), 300);
    }

    #[test]
    fn constant_slope_windows_equal_global() {
        let tau = 1.0;
        let rate = 0.05;
        let n = 400;
        let tr = PerturbationTrace {
            times: (1..=n).map(|k| k as f64).collect(),
            log_eps: vec![0.0; n],
            log_dist: vec![0.0; n],
            increments: vec![rate * tau; n],
            renorm_times: vec![],
            le_estimate: rate,
            finite_time_les: vec![],
            tau,
            delta0: 1e-8,
            diverged: None,
            saturated_at: None,
        };
        let w = finite_time_les(&tr, 50.0).unwrap();
        assert_eq!(w.len(), 8);
        for (i, (c, v)) in w.iter().enumerate() {
            assert!((v - rate).abs() < 1e-15);
            assert_eq!(*c, 25.0 + 50.0 * i as f64);
        }
        assert!(finite_time_les(&tr, 5.0).is_err());
        assert!(finite_time_les(&tr, 1000.0).is_err());
    }

    #[test]
    fn bimodal_split() {
        let mut v: Vec<f64> = (0..80).map(|i| 1e-4 * (i % 7) as f64).collect();
        v.extend((0..20).map(|i| 0.05 + 1e-4 * (i % 5) as f64));
        let b = two_cluster_split(&v).unwrap();
        assert!(b.fires);
        assert!((b.minority_weight - 0.2).abs() < 1e-12);

        let uni: Vec<f64> = (0..100).map(|i| i as f64 * 1e-3).collect();
        assert!(!two_cluster_split(&uni).unwrap().fires);
    }

    #[test]
    fn slope_of_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.25 * x).collect();
        assert!((least_squares_slope(&xs, &ys) + 0.25).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::defaults(0.1, 0.2);
        let c = cfg(100.0, 10.0);
        assert!(benettin_le(&State::NP, &p, &c, 0.0, 1.0).is_err());
        assert!(benettin_le(&State::NP, &p, &c, 1e-8, 0.0).is_err());
    }
}
