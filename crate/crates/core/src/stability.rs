//! Fixed points, their linear stability, and the coupling thresholds at which
//! stability is lost.

use std::fmt;

use nalgebra::{Complex, Matrix6, Vector6};

use crate::error::{DickeError, Result};
use crate::model::{flow, jacobian_unchecked, sp_branch, ModelParams, SpAbsence, State};

/// `|max_real_eig|` below this is reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-10;
/// Eigenvalue and Routh-Hurwitz verdicts are only compared outside this band.
pub const CROSS_CHECK_BAND: f64 = 1e-8;
/// Largest residual accepted for a fixed point.
pub const FIXED_POINT_RESIDUAL: f64 = 1e-9;

const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Np,
    /// Upper `sz` root of the superradiant branch.
    SpPlus,
    /// Lower `sz` root.
    SpMinus,
    Other,
}

impl FixedPointKind {
    pub fn label(&self) -> &'static str {
        match self {
            FixedPointKind::Np => "NP",
            FixedPointKind::SpPlus => "SP_plus",
            FixedPointKind::SpMinus => "SP_minus",
            FixedPointKind::Other => "Other",
        }
    }

    pub fn parse(s: &str) -> Option<FixedPointKind> {
        match s {
            "NP" => Some(FixedPointKind::Np),
            "SP_plus" => Some(FixedPointKind::SpPlus),
            "SP_minus" => Some(FixedPointKind::SpMinus),
            "Other" => Some(FixedPointKind::Other),
            _ => None,
        }
    }
}

impl fmt::Display for FixedPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub state: State,
    pub kind: FixedPointKind,
    /// `||rhs||_inf` at `state`.
    pub residual: f64,
    /// NaN until classified.
    pub max_real_eig: f64,
    pub stable: bool,
    pub marginal: bool,
}

impl FixedPoint {
    pub fn new(state: State, kind: FixedPointKind, p: &ModelParams) -> FixedPoint {
        FixedPoint { state, kind, residual: residual(&state, p), max_real_eig: f64::NAN, stable: false, marginal: false }
    }

    pub fn np(p: &ModelParams) -> FixedPoint {
        FixedPoint::new(State::NP, FixedPointKind::Np, p)
    }
}

pub fn residual(s: &State, p: &ModelParams) -> f64 {
    flow(&s.to_array(), p).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Superradiant fixed points completed to all six coordinates.
///
/// Each real `sz` root yields a pair of states related by the parity map.
/// Roots whose seed is not real, or where Newton fails, are dropped; the
/// returned diagnostics say why.
pub fn complete_sp(p: &ModelParams) -> (Vec<FixedPoint>, Vec<String>) {
    let mut out = Vec::new();
    let mut notes = Vec::new();
    let branch = match sp_branch(p) {
        Ok(b) => b,
        Err(why) => {
            notes.push(why.to_string());
            return (out, notes);
        }
    };
    let nq = p.n_qubits as f64;
    let g = p.big_g();
    let gp = p.gamma_prime();
    let wq = p.omega_q;
    for (kind, root) in [(FixedPointKind::SpPlus, branch.plus), (FixedPointKind::SpMinus, branch.minus)] {
        let n = root.photons / nq;
        let x2 = n * p.omega0 * (wq * wq + 4.0 * gp * gp) / (-2.0 * g * g * root.sz * wq);
        if !(x2 > 0.0 && x2.is_finite()) {
            notes.push(format!("{kind}: no real completion (x^2 = {x2:.3e})"));
            continue;
        }
        let x = x2.sqrt();
        let sx = 2.0 * g * root.sz * x * wq / (wq * wq + 4.0 * gp * gp);
        let seed = State::new(x, -(p.kappa / p.omega0) * x, n, sx, -(2.0 * gp / wq) * sx, root.sz);
        match newton(seed, p) {
            Ok(s) => {
                out.push(FixedPoint::new(s, kind, p));
                out.push(FixedPoint::new(crate::model::parity_map(&s), kind, p));
            }
            Err(e) => notes.push(format!("{kind}: {e}")),
        }
    }
    (out, notes)
}

/// Damped Newton iteration on the full vector field.
pub fn newton(seed: State, p: &ModelParams) -> Result<State> {
    let mut s = seed;
    let mut r = residual(&s, p);
    for _ in 0..NEWTON_MAX_ITER {
        if r < NEWTON_TOL {
            return Ok(s);
        }
        let f = Vector6::from(flow(&s.to_array(), p));
        let j = jacobian_unchecked(&s, p);
        let step = j.lu().solve(&(-f)).ok_or_else(|| DickeError::Numeric(format!("singular Jacobian at {s}")))?;
        let mut lambda = 1.0;
        loop {
            let trial = State::from_array(std::array::from_fn(|i| s[i] + lambda * step[i]));
            let rt = residual(&trial, p);
            if rt < r || lambda < 1e-6 {
                s = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if r < FIXED_POINT_RESIDUAL {
        Ok(s)
    } else {
        Err(DickeError::Numeric(format!("Newton did not converge (residual {r:.3e})")))
    }
}

/// Eigenvalues of a real 6x6 matrix after diagonal balancing.
pub fn eigenvalues(m: &Matrix6<f64>) -> Result<Vec<Complex<f64>>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(DickeError::Eigen(format!("non-finite matrix {m}")));
    }
    let b = balance(m);
    let ev = b.clone().try_schur(f64::EPSILON, 10_000).map(|s| s.complex_eigenvalues());
    match ev {
        Some(ev) if ev.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => Ok(ev.iter().copied().collect()),
        _ => Err(DickeError::Eigen(format!("Schur iteration failed on {m}"))),
    }
}

/// Parlett-Reinsch balancing by powers of two.
fn balance(m: &Matrix6<f64>) -> Matrix6<f64> {
    let mut a = *m;
    let radix = 2.0f64;
    loop {
        let mut done = true;
        for i in 0..6 {
            let c: f64 = (0..6).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let r: f64 = (0..6).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut c, mut r2) = (c, r);
            while c < r2 / radix {
                c *= radix;
                r2 /= radix;
                f *= radix;
            }
            while c >= r2 * radix {
                c /= radix;
                r2 *= radix;
                f /= radix;
            }
            if (c + r2) < 0.95 * s {
                done = false;
                for j in 0..6 {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            return a;
        }
    }
}

/// Characteristic polynomial coefficients `[1, a1, ..., a6]` of
/// `det(lambda I - A)` by the Faddeev-LeVerrier recursion.
pub fn char_poly(a: &Matrix6<f64>) -> [f64; 7] {
    let mut c = [0.0; 7];
    c[0] = 1.0;
    let mut m = Matrix6::<f64>::zeros();
    for k in 1..=6 {
        m = a * m + Matrix6::identity() * c[k - 1];
        c[k] = -(a * m).trace() / k as f64;
    }
    c
}

/// Leading principal minors of the Hurwitz matrix of `a0 x^6 + ... + a6`.
pub fn hurwitz_minors(c: &[f64; 7]) -> [f64; 6] {
    let coef = |k: i64| if (0..=6).contains(&k) { c[k as usize] } else { 0.0 };
    let mut h = Matrix6::<f64>::zeros();
    for i in 0..6 {
        for j in 0..6 {
            h[(i, j)] = coef(2 * j as i64 - i as i64 + 1);
        }
    }
    std::array::from_fn(|k| {
        let n = k + 1;
        let sub = nalgebra::DMatrix::from_fn(n, n, |i, j| h[(i, j)]);
        sub.determinant()
    })
}

/// Routh-Hurwitz verdict: all roots in the open left half plane.
pub fn routh_hurwitz_stable(a: &Matrix6<f64>) -> bool {
    let c = char_poly(a);
    c.iter().skip(1).all(|&v| v > 0.0) && hurwitz_minors(&c).iter().all(|&d| d > 0.0)
}

/// Fill in `max_real_eig`, `stable` and `marginal` for `fp`.
///
/// The eigenvalue verdict is cross-checked against Routh-Hurwitz; a
/// disagreement outside [`CROSS_CHECK_BAND`] is an error.
pub fn classify_fixed_point(mut fp: FixedPoint, p: &ModelParams) -> Result<FixedPoint> {
    fp.residual = residual(&fp.state, p);
    let j = crate::model::jacobian(&fp.state, p)?;
    let (max_re, _) = leading_eigenvalue(&j)?;
    fp.max_real_eig = max_re;
    fp.marginal = max_re.abs() < MARGINAL_BAND;
    fp.stable = max_re < -MARGINAL_BAND;
    if max_re.abs() > CROSS_CHECK_BAND {
        let rh = routh_hurwitz_stable(&j);
        if rh != fp.stable {
            return Err(DickeError::StabilityMismatch(format!(
                "{} at {}: eigenvalues say max re {max_re:.6e}, Routh-Hurwitz says stable={rh}; minors {:?}",
                fp.kind,
                fp.state,
                hurwitz_minors(&char_poly(&j))
            )));
        }
    }
    Ok(fp)
}

/// Eigenvalue with the largest real part.
pub fn leading_eigenvalue(j: &Matrix6<f64>) -> Result<(f64, Complex<f64>)> {
    let ev = eigenvalues(j)?;
    let lead = ev.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re)).expect("six eigenvalues");
    Ok((lead.re, lead))
}

/// All fixed points we track at `p`, classified.
pub fn fixed_points(p: &ModelParams) -> Result<(Vec<FixedPoint>, Vec<String>)> {
    let (sp, notes) = complete_sp(p);
    let mut all = vec![classify_fixed_point(FixedPoint::np(p), p)?];
    for fp in sp {
        all.push(classify_fixed_point(fp, p)?);
    }
    Ok((all, notes))
}

fn np_max_real(p: &ModelParams, g: f64) -> Result<f64> {
    let q = p.with_g(g)?;
    Ok(leading_eigenvalue(&jacobian_unchecked(&State::NP, &q))?.0)
}

/// Coupling at which the normal phase loses stability, found by bisection
/// on the sign of its leading real eigenvalue in `[g_lo, g_hi]`.
pub fn np_instability_onset(p: &ModelParams, g_lo: f64, g_hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (g_lo, g_hi);
    if np_max_real(p, lo)? >= 0.0 || np_max_real(p, hi)? <= 0.0 {
        return Err(DickeError::Domain(format!("NP stability does not change sign on [{g_lo}, {g_hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if np_max_real(p, mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Loss of stability of the superradiant branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfCrossing {
    pub g: f64,
    /// Leading eigenvalue at `g`.
    pub eigenvalue: Complex<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GT2Absence {
    Sp(SpAbsence),
    /// No real completion of the branch at some `g`.
    NoRoot(f64),
    StableThroughout,
    UnstableThroughout,
}

impl fmt::Display for GT2Absence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GT2Absence::Sp(why) => write!(f, "SP branch absent: {why}"),
            GT2Absence::NoRoot(g) => write!(f, "no SP root at g={g}"),
            GT2Absence::StableThroughout => write!(f, "SP stable across the bracket"),
            GT2Absence::UnstableThroughout => write!(f, "SP unstable across the bracket"),
        }
    }
}

pub const G_T2_TOL: f64 = 1e-5;
const G_T2_SCAN: usize = 200;

fn sp_max_real(p: &ModelParams, g: f64) -> std::result::Result<(f64, Complex<f64>), GT2Absence> {
    let q = p.with_g(g).map_err(|_| GT2Absence::NoRoot(g))?;
    if let Err(why) = sp_branch(&q) {
        return Err(GT2Absence::Sp(why));
    }
    let (roots, _) = complete_sp(&q);
    let root = roots.iter().find(|r| r.kind == FixedPointKind::SpPlus).ok_or(GT2Absence::NoRoot(g))?;
    leading_eigenvalue(&jacobian_unchecked(&root.state, &q)).map_err(|_| GT2Absence::NoRoot(g))
}

/// First coupling in `(g_lo, g_hi]` where the upper superradiant root loses
/// stability. The bracket is scanned coarsely, then bisected to
/// [`G_T2_TOL`] or finer.
pub fn find_g_t2(p: &ModelParams, g_lo: f64, g_hi: f64) -> std::result::Result<HopfCrossing, GT2Absence> {
    // at g_t1 itself the branch is degenerate with NP
    let start = g_lo + 1e-7 * g_lo.max(1e-3);
    let mut prev = start;
    let mut prev_stable = sp_max_real(p, start)?.0 < 0.0;
    let mut ever_stable = prev_stable;
    for k in 1..=G_T2_SCAN {
        let g = start + (g_hi - start) * k as f64 / G_T2_SCAN as f64;
        let stable = sp_max_real(p, g)?.0 < 0.0;
        if prev_stable && !stable {
            let (mut lo, mut hi) = (prev, g);
            while hi - lo > 1e-3 * G_T2_TOL {
                let mid = 0.5 * (lo + hi);
                if sp_max_real(p, mid)?.0 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (_, eig) = sp_max_real(p, hi)?;
            return Ok(HopfCrossing { g: 0.5 * (lo + hi), eigenvalue: eig });
        }
        ever_stable |= stable;
        prev = g;
        prev_stable = stable;
    }
    Err(if ever_stable { GT2Absence::StableThroughout } else { GT2Absence::UnstableThroughout })
}
