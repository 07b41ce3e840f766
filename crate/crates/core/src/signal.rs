//! Time-series diagnostics: oscillation amplitudes, power spectra, spectral
//! peaks and comb fits.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{DickeError, Result};
use crate::integrator::{Observable, Trajectory};

/// Local-maximum heights of an observable grouped by single linkage.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSet {
    pub observable: Observable,
    /// Sorted ascending.
    pub values: Vec<f64>,
    /// `(center, count)` per cluster, ascending by center.
    pub clusters: Vec<(f64, usize)>,
    pub cluster_tol: f64,
    /// Fewer than two maxima were found.
    pub non_oscillatory: bool,
}

impl AmplitudeSet {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }
}

/// Relative cluster tolerance used when none is given: a fraction of the
/// observable's range over the record.
pub const DEFAULT_CLUSTER_FRACTION: f64 = 1e-3;

/// Minimum record length for amplitude extraction.
pub const MIN_AMPLITUDE_SAMPLES: usize = 100;

/// Minimum record length for a spectrum.
pub const MIN_PSD_SAMPLES: usize = 1 << 12;

/// Heights of strict local maxima, refined by a parabola through the three
/// samples around each maximum.
pub fn local_maxima(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..xs.len().saturating_sub(1) {
        let (a, b, c) = (xs[i - 1], xs[i], xs[i + 1]);
        if b > a && b >= c {
            let denom = a - 2.0 * b + c;
            let peak = if denom < 0.0 { b - 0.125 * (c - a).powi(2) / denom } else { b };
            out.push(peak);
        }
    }
    out
}

/// Single-linkage clustering of 1-D values: sorted neighbours closer than
/// `tol` share a cluster.
pub fn cluster_values(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 0..sorted.len() {
        let last = i + 1 == sorted.len();
        if last || sorted[i + 1] - sorted[i] > tol {
            let members = &sorted[start..=i];
            let center = members.iter().sum::<f64>() / members.len() as f64;
            clusters.push((center, members.len()));
            start = i + 1;
        }
    }
    clusters
}

/// Amplitudes of a raw series; `cluster_tol = None` uses
/// [`DEFAULT_CLUSTER_FRACTION`] of the series range.
pub fn amplitudes_of(xs: &[f64], observable: Observable, cluster_tol: Option<f64>) -> Result<AmplitudeSet> {
    if xs.len() < MIN_AMPLITUDE_SAMPLES {
        return Err(DickeError::Signal(format!(
            "need at least {MIN_AMPLITUDE_SAMPLES} samples, got {}",
            xs.len()
        )));
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let tol = cluster_tol.unwrap_or(DEFAULT_CLUSTER_FRACTION * (hi - lo));
    let mut values = local_maxima(xs);
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let non_oscillatory = values.len() < 2;
    let clusters = if non_oscillatory { Vec::new() } else { cluster_values(&values, tol) };
    Ok(AmplitudeSet { observable, values, clusters, cluster_tol: tol, non_oscillatory })
}

pub fn extract_amplitudes(tr: &Trajectory, observable: Observable, cluster_tol: Option<f64>) -> Result<AmplitudeSet> {
    amplitudes_of(&tr.series(observable), observable, cluster_tol)
}

/// Number of maxima that differ by more than `rel` of the range; a tolerance
/// far below the clustering one, used to watch raw amplitude counts grow.
pub fn distinct_amplitudes(xs: &[f64], rel: f64) -> usize {
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    cluster_values(&local_maxima(xs), rel * (hi - lo)).len()
}

/// A detected spectral line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq: f64,
    pub power: f64,
    /// Height above the noise floor in dB.
    pub prominence_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub observable: Observable,
    /// `freqs[k] = k / (M dt)`.
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    /// Sorted by power, strongest first.
    pub peaks: Vec<Peak>,
    pub noise_floor: f64,
    /// Mean square of the mean-removed, windowed series.
    pub windowed_power: f64,
}

impl Spectrum {
    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 { self.freqs[1] - self.freqs[0] } else { 0.0 }
    }

    /// Fraction of the total power lying within `half_width` bins of a peak.
    pub fn peak_power_fraction(&self, half_width: usize) -> f64 {
        let total: f64 = self.psd.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let df = self.df();
        let mut in_peak = vec![false; self.psd.len()];
        for p in &self.peaks {
            let k = (p.freq / df).round() as usize;
            for j in k.saturating_sub(half_width)..=(k + half_width).min(self.psd.len() - 1) {
                in_peak[j] = true;
            }
        }
        self.psd.iter().zip(&in_peak).filter(|(_, &m)| m).map(|(p, _)| p).sum::<f64>() / total
    }
}

/// Periodic Hann window of length `m`.
pub fn hann(m: usize) -> Vec<f64> {
    (0..m).map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / m as f64).cos())).collect()
}

/// One-sided power spectrum of a uniformly sampled series.
///
/// The mean is removed and a Hann window applied; powers are normalized so
/// that they sum to the mean square of the windowed series.
pub fn psd_of(xs: &[f64], dt: f64, observable: Observable) -> Result<Spectrum> {
    let m = xs.len();
    if m < MIN_PSD_SAMPLES {
        return Err(DickeError::Signal(format!("need at least {MIN_PSD_SAMPLES} samples, got {m}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DickeError::Signal(format!("invalid sampling interval {dt}")));
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    let w = hann(m);
    let mut buf: Vec<Complex<f64>> = xs.iter().zip(&w).map(|(x, w)| Complex::new((x - mean) * w, 0.0)).collect();
    let windowed_power = buf.iter().map(|c| c.re * c.re).sum::<f64>() / m as f64;
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let norm = 1.0 / (m as f64 * m as f64);
    let half = m / 2;
    let psd: Vec<f64> = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() * norm;
            if k == 0 || (m % 2 == 0 && k == half) { p } else { 2.0 * p }
        })
        .collect();
    let freqs = (0..=half).map(|k| k as f64 / (m as f64 * dt)).collect();
    Ok(Spectrum { observable, freqs, psd, peaks: Vec::new(), noise_floor: 0.0, windowed_power })
}

/// Spectrum of a trajectory observable; the trajectory grid must be uniform.
pub fn psd(tr: &Trajectory, observable: Observable) -> Result<Spectrum> {
    let dt = tr.dt();
    for w in tr.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(DickeError::Signal("trajectory grid is not uniform".into()));
        }
    }
    psd_of(&tr.series(observable), dt, observable)
}

/// Default peak prominence over the median floor.
pub const DEFAULT_PROMINENCE_DB: f64 = 20.0;

/// Half-width of the Hann main lobe in bins; a peak must dominate this neighbourhood.
const PEAK_NEIGHBOURHOOD: usize = 2;

/// Floor clamp relative to the strongest bin; below this the median is
/// floating-point residue rather than signal.
const ROUNDOFF_FLOOR: f64 = 1e-16;

/// Find spectral lines standing `prominence_db` above the median power.
pub fn detect_peaks(mut sp: Spectrum, prominence_db: f64) -> Spectrum {
    let mut sorted = sp.psd.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let median = if sorted.is_empty() { 0.0 } else { sorted[sorted.len() / 2] };
    let top = sorted.last().copied().unwrap_or(0.0);
    let floor = median.max(top * ROUNDOFF_FLOOR);
    sp.noise_floor = floor;
    let threshold = floor * 10f64.powf(prominence_db / 10.0);
    let df = sp.df();
    let n = sp.psd.len();
    let mut peaks = Vec::new();
    // bins inside the DC main lobe only hold the residue of the removed mean
    for k in PEAK_NEIGHBOURHOOD + 1..n.saturating_sub(1) {
        let p = sp.psd[k];
        if p <= threshold || p <= 0.0 {
            continue;
        }
        let lo = k - PEAK_NEIGHBOURHOOD;
        let hi = (k + PEAK_NEIGHBOURHOOD).min(n - 1);
        let dominant = (lo..=hi).all(|j| j == k || (j < k && sp.psd[j] < p) || (j > k && sp.psd[j] <= p));
        if !dominant {
            continue;
        }
        // parabolic refinement on log power
        let (a, b, c) = (sp.psd[k - 1].max(1e-300).ln(), p.ln(), sp.psd[k + 1].max(1e-300).ln());
        let denom = a - 2.0 * b + c;
        let delta = if denom < 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let power = (b - 0.25 * (a - c) * delta).exp();
        let prominence_db = if floor > 0.0 { 10.0 * (power / floor).log10() } else { f64::INFINITY };
        peaks.push(Peak { freq: (k as f64 + delta) * df, power, prominence_db });
    }
    peaks.sort_by(|a, b| b.power.partial_cmp(&a.power).unwrap_or(Ordering::Equal));
    sp.peaks = peaks;
    sp
}

/// Outcome of fitting the peak set to a frequency lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombKind {
    /// All significant lines are harmonics of `f1`.
    SingleComb { f1: f64 },
    /// Lines sit on `m f1 + n f2` with `|n| <= 3` and `f2/f1` irrational.
    TwoFrequency { f1: f64, f2: f64 },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombFit {
    pub kind: CombKind,
    /// RMS misfit of the significant lines in bins.
    pub residual: f64,
    /// Number of lines the fit was run on.
    pub n_lines: usize,
}

impl CombKind {
    pub fn label(&self) -> &'static str {
        match self {
            CombKind::SingleComb { .. } => "single",
            CombKind::TwoFrequency { .. } => "two-frequency",
            CombKind::None => "none",
        }
    }
}

/// Line-position tolerance for the comb fits, in bins.
pub const COMB_TOL_BINS: f64 = 2.0;
const MAX_SIDEBAND_ORDER: i64 = 3;
const MAX_RATIONAL_DENOM: i64 = 8;
const RATIONAL_TOL: f64 = 1e-3;
const MIN_HARMONIC_OCCUPANCY: f64 = 0.25;

/// Lines whose dB prominence is at least half of the strongest line's.
pub fn significant_peaks(sp: &Spectrum) -> Vec<Peak> {
    let Some(top) = sp.peaks.iter().map(|p| p.prominence_db).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))) else {
        return Vec::new();
    };
    let mut out: Vec<Peak> = sp.peaks.iter().filter(|p| p.prominence_db >= 0.5 * top).copied().collect();
    out.sort_by(|a, b| a.freq.partial_cmp(&b.freq).unwrap_or(Ordering::Equal));
    out
}

/// Least-squares fundamental for lines assigned to harmonics of `f`, or
/// `None` if some line misses its harmonic by more than `tol`.
fn fit_harmonics(freqs: &[f64], f: f64, tol: f64) -> Option<(f64, f64)> {
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in freqs {
        let m = (x / f).round();
        if m < 1.0 {
            return None;
        }
        num += m * x;
        den += m * m;
    }
    let f_ref = num / den;
    let mut ss = 0.0;
    for &x in freqs {
        let m = (x / f_ref).round().max(1.0);
        let r = x - m * f_ref;
        if r.abs() > tol {
            return None;
        }
        ss += r * r;
    }
    // a comb that leaves most harmonic slots empty is a coincidence
    let mut orders: Vec<i64> = freqs.iter().map(|&x| (x / f_ref).round() as i64).collect();
    orders.sort_unstable();
    orders.dedup();
    let highest = *orders.last()? as f64;
    if (orders.len() as f64) < MIN_HARMONIC_OCCUPANCY * highest {
        return None;
    }
    Some((f_ref, (ss / freqs.len() as f64).sqrt()))
}

/// Largest fundamental, with `anchor` among its first few harmonics, whose
/// harmonics cover every line.
fn best_single_comb(freqs: &[f64], anchor: f64, tol: f64, min_f: f64) -> Option<(f64, f64)> {
    (1..=MAX_RATIONAL_DENOM)
        .map(|q| anchor / q as f64)
        .filter(|&f| f >= min_f)
        .find_map(|f| fit_harmonics(freqs, f, tol).filter(|fit| fit.0 >= min_f))
}

/// Smallest `p/q` (q <= 8) within the rational tolerance of `ratio`.
pub fn near_rational(ratio: f64) -> Option<(i64, i64)> {
    (1..=MAX_RATIONAL_DENOM).find_map(|q| {
        let p = (ratio * q as f64).round() as i64;
        ((ratio - p as f64 / q as f64).abs() < RATIONAL_TOL).then_some((p, q))
    })
}

/// Lattice fit `m f1 + n f2`; returns refined `(f1, f2, rms)`.
fn fit_lattice(freqs: &[f64], f1: f64, f2: f64, tol: f64) -> Option<(f64, f64, f64)> {
    let assign = |f1: f64, f2: f64| -> Option<Vec<(f64, f64, f64)>> {
        freqs
            .iter()
            .map(|&x| {
                let mut best: Option<(f64, f64, f64)> = None;
                for n in -MAX_SIDEBAND_ORDER..=MAX_SIDEBAND_ORDER {
                    let m = ((x - n as f64 * f2) / f1).round();
                    if m < 0.0 || (m == 0.0 && n <= 0) {
                        continue;
                    }
                    let r = x - m * f1 - n as f64 * f2;
                    if best.is_none_or(|b| r.abs() < (x - b.0 * f1 - b.1 * f2).abs()) {
                        best = Some((m, n as f64, x));
                    }
                }
                best.filter(|b| (b.2 - b.0 * f1 - b.1 * f2).abs() <= tol)
            })
            .collect()
    };
    let first = assign(f1, f2)?;
    // refine (f1, f2) by 2x2 least squares
    let (mut smm, mut smn, mut snn, mut smx, mut snx) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(m, n, x) in &first {
        smm += m * m;
        smn += m * n;
        snn += n * n;
        smx += m * x;
        snx += n * x;
    }
    let det = smm * snn - smn * smn;
    let (g1, g2) = if det.abs() > 1e-12 * smm.max(1.0) * snn.max(1.0) {
        ((smx * snn - snx * smn) / det, (snx * smm - smx * smn) / det)
    } else {
        (f1, f2)
    };
    let second = assign(g1, g2)?;
    let rms = (second.iter().map(|&(m, n, x)| (x - m * g1 - n * g2).powi(2)).sum::<f64>() / second.len() as f64).sqrt();
    Some((g1, g2, rms))
}

/// Classify the line set of a spectrum as a single comb, a two-frequency
/// lattice, or neither.
pub fn fit_comb(sp: &Spectrum) -> CombFit {
    let lines = significant_peaks(sp);
    let n_lines = lines.len();
    let df = sp.df();
    if n_lines < 2 || df <= 0.0 {
        return CombFit { kind: CombKind::None, residual: f64::NAN, n_lines };
    }
    let tol = COMB_TOL_BINS * df;
    let freqs: Vec<f64> = lines.iter().map(|p| p.freq).collect();
    // a fundamental must clear the line tolerance comfortably
    let min_f = 3.0 * tol;

    let strongest = |ls: &[Peak]| ls.iter().max_by(|a, b| a.power.partial_cmp(&b.power).unwrap_or(Ordering::Equal)).map(|p| p.freq);
    let anchor = strongest(&lines).unwrap_or(freqs[0]);
    if let Some((f1, rms)) = best_single_comb(&freqs, anchor, tol, min_f) {
        return CombFit { kind: CombKind::SingleComb { f1 }, residual: rms / df, n_lines };
    }

    // Main comb from the strongest lines, sidebands from what is left over.
    let mut by_power = lines.clone();
    by_power.sort_by(|a, b| b.power.partial_cmp(&a.power).unwrap_or(Ordering::Equal));
    let mut best: Option<(f64, f64, f64)> = None;
    for take in (2..=by_power.len().min(8)).rev() {
        let strong: Vec<f64> = by_power[..take].iter().map(|p| p.freq).collect();
        let Some((f1, _)) = best_single_comb(&strong, anchor, tol, min_f) else { continue };
        let mut offsets: Vec<f64> = freqs
            .iter()
            .map(|&x| x - (x / f1).round() * f1)
            .filter(|d| d.abs() > tol)
            .map(f64::abs)
            .collect();
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let mut f2_candidates: Vec<f64> = Vec::new();
        for &d in &offsets {
            for k in 1..=MAX_SIDEBAND_ORDER {
                f2_candidates.push(d / k as f64);
            }
        }
        for f2 in f2_candidates.into_iter().filter(|&f2| f2 > tol && f2 < 0.5 * f1) {
            if let Some(fit) = fit_lattice(&freqs, f1, f2, tol) {
                if best.is_none_or(|b| fit.2 < b.2) {
                    best = Some(fit);
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    match best {
        Some((f1, f2, rms)) => {
            let kind = match near_rational(f2 / f1) {
                Some((_, q)) => CombKind::SingleComb { f1: f1 / q as f64 },
                None => CombKind::TwoFrequency { f1, f2 },
            };
            CombFit { kind, residual: rms / df, n_lines }
        }
        None => CombFit { kind: CombKind::None, residual: f64::NAN, n_lines },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(m: usize, dt: f64, parts: &[(f64, f64)]) -> Vec<f64> {
        (0..m)
            .map(|k| parts.iter().map(|(a, f)| a * (2.0 * PI * f * k as f64 * dt).sin()).sum())
            .collect()
    }

    #[test]
    fn sinusoid_has_one_amplitude_cluster() {
        let xs = tone(5000, 0.1, &[(1.0, 0.37)]);
        let a = amplitudes_of(&xs, Observable::Sz, None).unwrap();
        assert_eq!(a.n_clusters(), 1);
        assert!(!a.non_oscillatory);
        assert!((a.clusters[0].0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn flat_series_is_non_oscillatory() {
        let a = amplitudes_of(&vec![-1.0; 500], Observable::Sz, None).unwrap();
        assert!(a.non_oscillatory);
        assert_eq!(a.n_clusters(), 0);
        assert!(amplitudes_of(&[0.0; 10], Observable::Sz, None).is_err());
    }

    #[test]
    fn clustering_single_linkage() {
        let c = cluster_values(&[0.0, 0.05, 0.1, 1.0, 1.04], 0.06);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].1, 3);
        assert_eq!(c[1].1, 2);
    }

    #[test]
    fn parabolic_refinement_recovers_peak() {
        // samples of 1 - (t - 0.3)^2 around the vertex
        let xs = [1.0 - 1.3f64.powi(2), 1.0 - 0.3f64.powi(2), 1.0 - 0.7f64.powi(2)];
        let m = local_maxima(&xs);
        assert_eq!(m.len(), 1);
        assert!((m[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_tone_peak_location() {
        let dt = 0.5;
        let m = 8192;
        let f = 0.0371;
        let sp = detect_peaks(psd_of(&tone(m, dt, &[(1.0, f)]), dt, Observable::N).unwrap(), 20.0);
        let df = sp.df();
        assert!((df - 1.0 / (m as f64 * dt)).abs() < 1e-15);
        assert_eq!(sp.freqs[0], 0.0);
        assert!((sp.peaks[0].freq - f).abs() < df);
    }

    #[test]
    fn two_tones_give_two_peaks() {
        let dt = 0.5;
        let m = 8192;
        let df = 1.0 / (m as f64 * dt);
        let sp = detect_peaks(psd_of(&tone(m, dt, &[(1.0, 300.0 * df), (0.5, 1100.0 * df)]), dt, Observable::N).unwrap(), 20.0);
        assert_eq!(sp.peaks.len(), 2, "{:?}", sp.peaks);
        assert!(sp.peaks[0].power > sp.peaks[1].power);
    }

    #[test]
    fn white_noise_has_no_peaks() {
        // Periodogram bins are ~exponential: P(bin > 100 x median) = 2^-100 each.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..16384).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sp = detect_peaks(psd_of(&xs, 1.0, Observable::N).unwrap(), 20.0);
        assert!(sp.peaks.is_empty(), "{:?}", &sp.peaks[..sp.peaks.len().min(5)]);
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [4096usize, 5001, 6000] {
            let xs: Vec<f64> = (0..m).map(|k| (k as f64 * 0.01).sin() + rng.random_range(-0.3..0.3)).collect();
            let sp = psd_of(&xs, 0.5, Observable::N).unwrap();
            let total: f64 = sp.psd.iter().sum();
            assert!(((total - sp.windowed_power) / sp.windowed_power).abs() < 1e-10, "m={m}");
        }
    }

    #[test]
    fn psd_rejects_short_records() {
        assert!(psd_of(&[0.0; 100], 0.5, Observable::N).is_err());
    }

    #[test]
    fn harmonic_series_fits_single_comb() {
        let dt = 0.5;
        let m = 1 << 15;
        let f0 = 0.0123;
        let xs = tone(m, dt, &[(1.0, f0), (0.3, 2.0 * f0), (0.1, 3.0 * f0)]);
        let sp = detect_peaks(psd_of(&xs, dt, Observable::N).unwrap(), 20.0);
        match fit_comb(&sp).kind {
            CombKind::SingleComb { f1 } => assert!((f1 - f0).abs() < 2.0 * sp.df()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn modulated_tone_fits_two_frequency() {
        let dt = 0.5;
        let m = 1 << 16;
        let (f1, f2) = (0.0053, 0.0053 * (5f64.sqrt() - 1.0) / 25.0);
        let xs: Vec<f64> = (0..m)
            .map(|k| {
                let t = k as f64 * dt;
                (1.0 + 0.4 * (2.0 * PI * f2 * t).cos()) * (2.0 * PI * f1 * t).sin()
                    + 0.3 * (2.0 * PI * 2.0 * f1 * t).sin()
            })
            .collect();
        let sp = detect_peaks(psd_of(&xs, dt, Observable::N).unwrap(), 20.0);
        let fit = fit_comb(&sp);
        match fit.kind {
            CombKind::TwoFrequency { f1: a, f2: b } => {
                assert!((a - f1).abs() < 2.0 * sp.df(), "{a}");
                assert!((b - f2).abs() < 2.0 * sp.df(), "{b}");
            }
            other => panic!("{other:?} from {:?}", significant_peaks(&sp)),
        }
    }

    #[test]
    fn rational_guard() {
        assert_eq!(near_rational(0.5), Some((1, 2)));
        assert_eq!(near_rational(0.3335), Some((1, 3)));
        // sideband / main ratio of the quasi-periodic regime
        assert_eq!(near_rational(2.6e-4 / 5.3e-3), None);
    }

    #[test]
    fn too_few_lines_is_none() {
        let sp = Spectrum {
            observable: Observable::N,
            freqs: vec![0.0, 0.1, 0.2],
            psd: vec![0.0, 1.0, 0.0],
            peaks: vec![Peak { freq: 0.1, power: 1.0, prominence_db: 30.0 }],
            noise_floor: 0.0,
            windowed_power: 1.0,
        };
        assert_eq!(fit_comb(&sp).kind, CombKind::None);
    }
}
