//! Mean-field equations of motion for the dissipative two-photon Dicke model.
//!
//! The canonical state uses cavity variables rescaled by the qubit number,
//! `x = <X>/N`, `y = <Y>/N`, `n = <a^dag a>/N`, where `X = a^2 + a^dag^2` and
//! `Y = i(a^2 - a^dag^2)`, together with the rescaled collective spin
//! `s = <2J>/N`. With `G = g sqrt(N)` the flow reads
//!
//! ```text
//! dx  = -2k x - 2w0 y
//! dy  = -2k y + 2w0 x + 4G sx (2n + 1/N)
//! dn  = -2k n + 2G sx y
//! dsx = -wq sy - 2G' sx
//! dsy =  wq sx - 2G sz x - 2G' sy
//! dsz =  2G x sy - 2Gd (sz + 1)
//! ```
//!
//! with `G' = 2 Gphi + Gd/2`. The unscaled form is kept in [`rhs_raw`] for
//! cross-checking.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::Matrix6;

use crate::error::{DickeError, Result};

/// Physical constants of the model plus the quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub omega0: f64,
    pub omega_q: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma_down: f64,
    pub gamma_phi: f64,
    pub n_qubits: u32,
    gamma_prime: f64,
    beta: Option<f64>,
    big_g: f64,
}

/// Raw parameter set, before the derived rates are filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    pub omega0: f64,
    pub omega_q: f64,
    pub g: f64,
    pub kappa: f64,
    pub gamma_down: f64,
    pub gamma_phi: f64,
    pub n_qubits: u32,
}

impl Default for RawParams {
    /// omega0 = kappa = 1, Gd = Gphi = 0.01, N = 10, wq = 0.1, g = 0.3.
    fn default() -> Self {
        RawParams {
            omega0: 1.0,
            omega_q: 0.1,
            g: 0.3,
            kappa: 1.0,
            gamma_down: 0.01,
            gamma_phi: 0.01,
            n_qubits: 10,
        }
    }
}

impl RawParams {
    pub fn with_omega_q(mut self, omega_q: f64) -> Self {
        self.omega_q = omega_q;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_n_qubits(mut self, n: u32) -> Self {
        self.n_qubits = n;
        self
    }

    pub fn derive(self) -> Result<ModelParams> {
        derive_params(self)
    }
}

/// Validates a raw parameter set and fills in `G'`, `beta` and `G`.
pub fn derive_params(raw: RawParams) -> Result<ModelParams> {
    let checks = [
        ("omega_q", raw.omega_q),
        ("g", raw.g),
        ("kappa", raw.kappa),
        ("gamma_down", raw.gamma_down),
        ("gamma_phi", raw.gamma_phi),
    ];
    for (name, v) in checks {
        if !v.is_finite() || v < 0.0 {
            return Err(DickeError::Param(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if !raw.omega0.is_finite() || raw.omega0 <= 0.0 {
        return Err(DickeError::Param(format!("omega0 must be > 0, got {}", raw.omega0)));
    }
    if raw.n_qubits == 0 {
        return Err(DickeError::Param("n_qubits must be >= 1".into()));
    }
    let gamma_prime = 2.0 * raw.gamma_phi + raw.gamma_down / 2.0;
    let beta = (raw.gamma_down > 0.0 && raw.omega_q > 0.0).then(|| {
        raw.omega0 * gamma_prime / (raw.n_qubits as f64 * raw.omega_q * raw.gamma_down)
    });
    Ok(ModelParams {
        omega0: raw.omega0,
        omega_q: raw.omega_q,
        g: raw.g,
        kappa: raw.kappa,
        gamma_down: raw.gamma_down,
        gamma_phi: raw.gamma_phi,
        n_qubits: raw.n_qubits,
        gamma_prime,
        beta,
        big_g: raw.g * (raw.n_qubits as f64).sqrt(),
    })
}

impl ModelParams {
    /// The defaults used throughout the published figures, at the given point.
    pub fn defaults(omega_q: f64, g: f64) -> ModelParams {
        RawParams::default()
            .with_omega_q(omega_q)
            .with_g(g)
            .derive()
            .expect("default parameters are valid")
    }

    pub fn raw(&self) -> RawParams {
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

    /// `G' = 2 Gphi + Gd / 2`.
    pub fn gamma_prime(&self) -> f64 {
        self.gamma_prime
    }

    /// `beta = w0 G' / (N wq Gd)`; `None` when `Gd = 0` or `wq = 0`.
    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Collective coupling `g sqrt(N)`.
    pub fn big_g(&self) -> f64 {
        self.big_g
    }

    /// Same physical constants at a different coupling.
    pub fn with_g(&self, g: f64) -> Result<ModelParams> {
        self.raw().with_g(g).derive()
    }

    pub fn with_omega_q(&self, omega_q: f64) -> Result<ModelParams> {
        self.raw().with_omega_q(omega_q).derive()
    }
}

/// Rescaled mean-field state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub n: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl State {
    pub const DIM: usize = 6;

    /// Normal-phase fixed point: spins down, empty cavity.
    pub const NP: State = State { x: 0.0, y: 0.0, n: 0.0, sx: 0.0, sy: 0.0, sz: -1.0 };

    pub fn new(x: f64, y: f64, n: f64, sx: f64, sy: f64, sz: f64) -> State {
        State { x, y, n, sx, sy, sz }
    }

    pub fn from_array(a: [f64; 6]) -> State {
        State { x: a[0], y: a[1], n: a[2], sx: a[3], sy: a[4], sz: a[5] }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.n, self.sx, self.sy, self.sz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn norm_inf(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Index<usize> for State {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.n,
            3 => &self.sx,
            4 => &self.sy,
            5 => &self.sz,
            _ => panic!("state index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for State {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.n,
            3 => &mut self.sx,
            4 => &mut self.sy,
            5 => &mut self.sz,
            _ => panic!("state index {i} out of range"),
        }
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        let (a, b) = (self.to_array(), o.to_array());
        State::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        let (a, b) = (self.to_array(), o.to_array());
        State::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, s: State) -> State {
        State::from_array(s.to_array().map(|v| self * v))
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(x={:.6e}, y={:.6e}, n={:.6e}, sx={:.6e}, sy={:.6e}, sz={:.6e})",
            self.x, self.y, self.n, self.sx, self.sy, self.sz
        )
    }
}

/// Vector field on plain arrays; the hot path used by the integrator.
#[inline]
pub fn flow(s: &[f64; 6], p: &ModelParams) -> [f64; 6] {
    let [x, y, n, sx, sy, sz] = *s;
    let k2 = 2.0 * p.kappa;
    let w2 = 2.0 * p.omega0;
    let gg = p.big_g;
    let gp2 = 2.0 * p.gamma_prime;
    let inv_n = 1.0 / p.n_qubits as f64;
    [
        -k2 * x - w2 * y,
        -k2 * y + w2 * x + 4.0 * gg * sx * (2.0 * n + inv_n),
        -k2 * n + 2.0 * gg * sx * y,
        -p.omega_q * sy - gp2 * sx,
        p.omega_q * sx - 2.0 * gg * sz * x - gp2 * sy,
        2.0 * gg * x * sy - 2.0 * p.gamma_down * (sz + 1.0),
    ]
}

/// Time derivative of the rescaled state.
pub fn rhs(s: &State, p: &ModelParams) -> Result<State> {
    if !s.is_finite() {
        return Err(DickeError::Numeric(format!("non-finite state {s}")));
    }
    Ok(State::from_array(flow(&s.to_array(), p)))
}

/// The unscaled equations, with state `(<X>, <Y>, <a^dag a>, sx, sy, sz)`.
pub fn rhs_raw(s: &[f64; 6], p: &ModelParams) -> [f64; 6] {
    let [xx, yy, nn, sx, sy, sz] = *s;
    let sqn = (p.n_qubits as f64).sqrt();
    let g = p.g;
    let gp = p.gamma_prime;
    [
        -2.0 * p.kappa * xx - 2.0 * p.omega0 * yy,
        -2.0 * p.kappa * yy + 2.0 * p.omega0 * xx + 4.0 * g * sqn * sx * (2.0 * nn + 1.0),
        -2.0 * p.kappa * nn + 2.0 * g * sqn * sx * yy,
        -p.omega_q * sy - 2.0 * gp * sx,
        p.omega_q * sx - 2.0 * g / sqn * sz * xx - 2.0 * gp * sy,
        2.0 * g / sqn * xx * sy - 2.0 * p.gamma_down * (sz + 1.0),
    ]
}

/// Analytic Jacobian; entry `(i, j)` is `d rhs_i / d state_j`.
pub fn jacobian(s: &State, p: &ModelParams) -> Result<Matrix6<f64>> {
    if !s.is_finite() {
        return Err(DickeError::Numeric(format!("non-finite state {s}")));
    }
    Ok(jacobian_unchecked(s, p))
}

pub(crate) fn jacobian_unchecked(s: &State, p: &ModelParams) -> Matrix6<f64> {
    let k2 = 2.0 * p.kappa;
    let w2 = 2.0 * p.omega0;
    let gg = p.big_g;
    let gp2 = 2.0 * p.gamma_prime;
    let inv_n = 1.0 / p.n_qubits as f64;
    let wq = p.omega_q;
    #[rustfmt::skip]
    let j = Matrix6::new(
        -k2,            -w2,         0.0,            0.0,                           0.0,          0.0,
        w2,             -k2,         8.0 * gg * s.sx, 4.0 * gg * (2.0 * s.n + inv_n), 0.0,          0.0,
        0.0,            2.0 * gg * s.sx, -k2,        2.0 * gg * s.y,                0.0,          0.0,
        0.0,            0.0,         0.0,            -gp2,                          -wq,          0.0,
        -2.0 * gg * s.sz, 0.0,       0.0,            wq,                            -gp2,         -2.0 * gg * s.x,
        2.0 * gg * s.sy, 0.0,        0.0,            0.0,                           2.0 * gg * s.x, -2.0 * p.gamma_down,
    );
    j
}

/// Mean-field image of the parity symmetry `a -> i a`, `sigma_{x,y} -> -sigma_{x,y}`.
pub fn parity_map(s: &State) -> State {
    State { x: -s.x, y: -s.y, n: s.n, sx: -s.sx, sy: -s.sy, sz: s.sz }
}

/// NP stability threshold `sqrt((k^2 + w0^2)(wq^2 + 4G'^2) / (4 w0 wq))`.
pub fn g_t1(p: &ModelParams) -> Result<f64> {
    if p.omega_q <= 0.0 {
        return Err(DickeError::Domain("g_t1 requires omega_q > 0".into()));
    }
    let gp = p.gamma_prime;
    Ok(((p.kappa.powi(2) + p.omega0.powi(2)) * (p.omega_q.powi(2) + 4.0 * gp * gp)
        / (4.0 * p.omega0 * p.omega_q))
        .sqrt())
}

/// Localization threshold of the model without qubit decay; reference only.
pub fn g_u(p: &ModelParams) -> f64 {
    (p.kappa.powi(2) + p.omega0.powi(2)).sqrt() / 2.0
}

/// Closed-form critical couplings. `g_t2` is filled in by the stability module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoints {
    pub g_t1: f64,
    pub g_u: f64,
    pub g_t2: Option<f64>,
}

impl CriticalPoints {
    pub fn analytic(p: &ModelParams) -> Result<CriticalPoints> {
        Ok(CriticalPoints { g_t1: g_t1(p)?, g_u: g_u(p), g_t2: None })
    }
}

/// One root of the superradiant quadratic for `sz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpRoot {
    pub sz: f64,
    /// Absolute photon number `<a^dag a>`; divide by N for the rescaled `n`.
    pub photons: f64,
    /// Passes `sz in [-1, 0]` and `photons >= 0`.
    pub physical: bool,
}

/// Both roots of the SP quadratic; `plus` is the printed branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpBranch {
    pub plus: SpRoot,
    pub minus: SpRoot,
}

/// Why the SP branch does not exist at a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub enum SpAbsence {
    NoQubitDecay,
    ZeroQubitFrequency,
    ZeroCoupling,
    NegativeDiscriminant(f64),
}

impl fmt::Display for SpAbsence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpAbsence::NoQubitDecay => write!(f, "SP requires gamma_down > 0"),
            SpAbsence::ZeroQubitFrequency => write!(f, "SP requires omega_q > 0"),
            SpAbsence::ZeroCoupling => write!(f, "SP requires g > 0"),
            SpAbsence::NegativeDiscriminant(d) => write!(f, "negative discriminant {d:.3e}"),
        }
    }
}

/// Superradiant stationary `sz` and photon number.
pub fn sp_branch(p: &ModelParams) -> std::result::Result<SpBranch, SpAbsence> {
    if p.gamma_down <= 0.0 {
        return Err(SpAbsence::NoQubitDecay);
    }
    if p.omega_q <= 0.0 {
        return Err(SpAbsence::ZeroQubitFrequency);
    }
    if p.g <= 0.0 {
        return Err(SpAbsence::ZeroCoupling);
    }
    let beta = p.beta.expect("beta defined for gamma_down, omega_q > 0");
    let gt1 = g_t1(p).expect("omega_q > 0");
    let half = (1.0 + beta) / 2.0;
    let disc = half * half - beta * gt1 * gt1 / (p.g * p.g);
    if disc < 0.0 {
        return Err(SpAbsence::NegativeDiscriminant(disc));
    }
    let root = |sz: f64| {
        let photons = (sz + 1.0) / (2.0 * beta);
        SpRoot { sz, photons, physical: (-1.0..=0.0).contains(&sz) && photons >= 0.0 }
    };
    Ok(SpBranch { plus: root(-half + disc.sqrt()), minus: root(-half - disc.sqrt()) })
}
