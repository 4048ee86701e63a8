//! Morse-oscillator basis, coherent states and closed-system dynamics.
//!
//! Everything is expressed in the dimensionless form
//!
//!   H = P² + (s+1/2)² [exp(-2X) - 2 exp(-X)],
//!
//! where the shape parameter s fixes the number of bound states ([s]+1) and
//! the bound spectrum E_n = -(s-n)². Time is measured in units of t0, the
//! period of small oscillations, so the Schrödinger equation reads
//! d/dt|φ⟩ = -i 2π/(2s+1) H |φ⟩.
//!
//! The basis combines the [s]+1 bound states with a quasi-continuum of
//! positive-energy states obtained from a Fourier-grid discretization of H:
//! the grid Hamiltonian is diagonalized and the lowest `n_basis` eigenpairs
//! are kept. Bound eigenvectors agree with the analytic wave functions; the
//! positive-energy ones are box states orthogonal to them, which is all the
//! wave-packet dynamics below needs as long as the dissociated fraction of
//! the initial state stays negligible.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use num_bigint::BigInt;
use num_complex::Complex64 as C64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::types::StateVector;

/// Shape parameter and label of a Morse oscillator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MorseParams {
    /// Dimensionless shape parameter, s > 1.
    pub s: f64,
    /// Molecule name, informational only.
    pub label: String,
}

impl MorseParams {
    pub fn new(s: f64, label: impl Into<String>) -> Result<Self> {
        if !(s > 1.0) {
            return Err(Error::InvalidArgument(format!("shape parameter s = {s} must exceed 1")));
        }
        Ok(Self { s, label: label.into() })
    }

    /// The NO molecule of the standard parameter set, s = 54.54.
    pub fn no_molecule() -> Self {
        Self { s: 54.54, label: "NO".into() }
    }

    /// Number of bound states, [s]+1.
    pub fn n_bound(&self) -> usize {
        self.s.floor() as usize + 1
    }

    /// Analytic bound energy E_n = -(s-n)².
    pub fn bound_energy(&self, n: usize) -> f64 {
        let d = self.s - n as f64;
        -d * d
    }

    /// Potential V(x) = (s+1/2)²(e^{-2x} - 2e^{-x}).
    pub fn potential(&self, x: f64) -> f64 {
        let a = self.s + 0.5;
        let e = (-x).exp();
        a * a * (e * e - 2.0 * e)
    }

    /// Factor 2π/(2s+1) converting energies to phase rates per t0.
    pub fn phase_factor(&self) -> f64 {
        2.0 * PI / (2.0 * self.s + 1.0)
    }
}

/// Uniform spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

/// Default basis size: all bound states plus enough quasi-continuum to
/// span wave packets up to E ≈ +770, which covers the whole label window
/// x0 ∈ [0,2], |p0| ≤ 20 at sub-1e-4 accuracy.
pub const DEFAULT_N_BASIS: usize = 300;

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if !(x_max > x_min) || points < 16 {
            return Err(Error::InvalidArgument("grid needs x_max > x_min and at least 16 points".into()));
        }
        Ok(Self { x_min, x_max, points })
    }

    /// Default production grid. Wide enough that even the last bound state
    /// of the NO molecule (binding energy 0.29, decay length ≈ 2) fits with
    /// its exponential tail suppressed below 1e-9 at the box edge.
    pub fn default_for_morse() -> Self {
        Self { x_min: -1.5, x_max: 30.5, points: 2048 }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Array1<f64> {
        Array1::from_iter((0..self.points).map(|i| self.x(i)))
    }
}

/// Grid-sampled eigenbasis of the Morse Hamiltonian.
///
/// `eigenvectors` holds one state per column, sampled on the grid and
/// normalized with respect to the grid quadrature: Σ_i φ_n(x_i)φ_m(x_i) dx
/// = δ_nm. The first `n_bound` states have negative energies.
#[derive(Debug, Clone)]
pub struct MorseBasis {
    pub params: MorseParams,
    pub grid: GridSpec,
    /// (grid points) × (n_basis), column = state.
    pub eigenvectors: Array2<f64>,
    pub energies: Array1<f64>,
    pub n_bound: usize,
    id: String,
}

impl MorseBasis {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n_basis(&self) -> usize {
        self.energies.len()
    }

    fn make_id(params: &MorseParams, grid: &GridSpec, n_basis: usize) -> String {
        format!(
            "morse:{}:s={}:x=[{},{}]:M={}:N={}",
            params.label, params.s, grid.x_min, grid.x_max, grid.points, n_basis
        )
    }
}

/// Natural log of Γ(x) for x > 0 (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma defined here for positive arguments only");
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π/sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, &g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Generalized Laguerre polynomial L_n^α(y) in mantissa/log-scale form to
/// avoid overflow: returns (mantissa, ln_scale) with L = mantissa·e^{ln_scale}.
fn laguerre_scaled(n: usize, alpha: f64, y: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut lm1 = 1.0f64; // L_0
    let mut l = 1.0 + alpha - y; // L_1
    let mut scale = 0.0f64;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0 + alpha - y) * l - (kf - 1.0 + alpha) * lm1) / kf;
        lm1 = l;
        l = next;
        let mag = l.abs().max(lm1.abs());
        if mag > 1e250 {
            l /= 1e250;
            lm1 /= 1e250;
            scale += 250.0 * std::f64::consts::LN_10;
        }
    }
    (l, scale)
}

/// Analytic bound wave function ψ_n(x), normalized so ∫|ψ_n|²dx = 1.
///
/// ψ_n(y) = √[n!(2s-2n)/Γ(2s-n+1)] y^{s-n} e^{-y/2} L_n^{2s-2n}(y),
/// y = (2s+1)e^{-x}.
pub fn bound_wavefunction(n: usize, params: &MorseParams, x: f64) -> Result<f64> {
    let s = params.s;
    if n >= params.n_bound() {
        return Err(Error::InvalidArgument(format!(
            "bound index n = {n} out of range (only {} bound states)",
            params.n_bound()
        )));
    }
    let nf = n as f64;
    let y = (2.0 * s + 1.0) * (-x).exp();
    let alpha = 2.0 * s - 2.0 * nf;
    let ln_pref = 0.5 * (ln_gamma(nf + 1.0) + alpha.ln() - ln_gamma(2.0 * s - nf + 1.0));
    let (lag, lag_scale) = laguerre_scaled(n, alpha, y);
    let ln_mag = ln_pref + (s - nf) * y.ln() - 0.5 * y + lag_scale;
    Ok(lag * ln_mag.exp())
}

/// Builds the dense Fourier-grid Hamiltonian and returns its lowest
/// `n_basis` eigenpairs as a [`MorseBasis`].
pub fn build_basis(params: &MorseParams, grid: &GridSpec, n_basis: usize) -> Result<MorseBasis> {
    let m = grid.points;
    let expected_bound = params.n_bound();
    if n_basis < expected_bound {
        return Err(Error::InvalidArgument(format!(
            "n_basis = {n_basis} below bound-state count {expected_bound}"
        )));
    }
    if n_basis > m {
        return Err(Error::InvalidArgument(format!("n_basis = {n_basis} exceeds grid size {m}")));
    }
    // Edge-leak precondition on the analytic ground state.
    for edge in [grid.x_min, grid.x_max] {
        let amp = bound_wavefunction(0, params, edge)?.abs();
        if amp >= 1e-12 {
            return Err(Error::GridTooSmall(format!(
                "ground-state amplitude {amp:.3e} at grid edge x = {edge}"
            )));
        }
    }

    // Kinetic matrix of P² on the periodic grid: T = F† diag(k²) F, a real
    // symmetric Toeplitz matrix whose first row is the inverse DFT of k².
    let dx = grid.dx();
    let length = grid.x_max - grid.x_min;
    let mut ksq: Vec<C64> = vec![C64::new(0.0, 0.0); m];
    for (i, k) in ksq.iter_mut().enumerate() {
        let idx = if i <= m / 2 { i as f64 } else { i as f64 - m as f64 };
        let kval = 2.0 * PI * idx / length;
        *k = C64::new(kval * kval, 0.0);
    }
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(m);
    ifft.process(&mut ksq);
    let t_row: Vec<f64> = ksq.iter().map(|c| c.re / m as f64).collect();

    let mut h = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            h[[i, j]] = t_row[(m + i - j) % m];
        }
        h[[i, i]] += params.potential(grid.x(i));
    }

    let (vals, vecs) = h.eigh(UPLO::Lower)?;
    let energies = vals.slice(s![..n_basis]).to_owned();
    let mut eigenvectors = vecs.slice(s![.., ..n_basis]).to_owned();
    // Quadrature normalization and a deterministic sign convention.
    let inv_sqrt_dx = 1.0 / dx.sqrt();
    for mut col in eigenvectors.columns_mut() {
        let mut imax = 0;
        let mut vmax = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > vmax {
                vmax = v.abs();
                imax = i;
            }
        }
        let sign = if col[imax] < 0.0 { -1.0 } else { 1.0 };
        col.mapv_inplace(|v| v * sign * inv_sqrt_dx);
    }

    let n_bound = energies.iter().filter(|&&e| e < 0.0).count();
    if n_bound != expected_bound {
        return Err(Error::GridTooSmall(format!(
            "found {n_bound} negative-energy states, expected {expected_bound}; grid too coarse or too narrow"
        )));
    }

    let id = MorseBasis::make_id(params, grid, n_basis);
    Ok(MorseBasis { params: params.clone(), grid: *grid, eigenvectors, energies, n_bound, id })
}

/// Digamma function ψ₀(x) for x > 0 (asymptotic series after shifting).
pub fn digamma(mut x: f64) -> f64 {
    assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + x.ln() - 0.5 * inv - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0))
}

/// Phase-space label (x0, p0) of a Morse coherent state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhasePoint {
    pub x0: f64,
    pub p0: f64,
}

impl PhasePoint {
    pub fn new(x0: f64, p0: f64) -> Self {
        Self { x0, p0 }
    }

    /// Constant offset between ln Re[(1+β)/(1-β)] and the exact ⟨X⟩ of |β⟩.
    ///
    /// |⟨y|β⟩|² is a Gamma density of shape 2s in y, so
    /// ⟨X⟩ = ln(2s+1) - ψ₀(2s) + ln Re w exactly; the first two terms
    /// (≈ 3/(4s)) are dropped in the leading-order label convention. They
    /// are kept here so that ⟨X⟩ recovers x0 to quadrature accuracy.
    pub fn label_offset(s: f64) -> f64 {
        (2.0 * s + 1.0).ln() - digamma(2.0 * s)
    }

    /// The coherent-state parameter β with ⟨X⟩ = x0 and ⟨P⟩ = p0:
    /// w = (1+β)/(1-β) has Re w = e^{x0 - δ(s)} and Im w = (p0/s)·Re w.
    pub fn beta(&self, s: f64) -> C64 {
        let wr = (self.x0 - Self::label_offset(s)).exp();
        let w = C64::new(wr, self.p0 / s * wr);
        (w - 1.0) / (w + 1.0)
    }

    /// Inverse of [`PhasePoint::beta`].
    pub fn from_beta(beta: C64, s: f64) -> Result<Self> {
        if beta.norm() >= 1.0 {
            return Err(Error::InvalidArgument(format!("|β| = {} must be < 1", beta.norm())));
        }
        let w = (1.0 + beta) / (1.0 - beta);
        Ok(Self { x0: w.re.ln() + Self::label_offset(s), p0: s * w.im / w.re })
    }
}

/// Coherent wave function ⟨x|β⟩ evaluated through logs so Γ(2s) and y^s
/// do not overflow at s ≈ 54.5.
pub fn coherent_wavefunction(beta: C64, params: &MorseParams, x: f64) -> C64 {
    let s = params.s;
    let y = (2.0 * s + 1.0) * (-x).exp();
    let one_minus_beta = C64::new(1.0, 0.0) - beta;
    let ln_val = C64::new(s * (1.0 - beta.norm_sqr()).ln() - 0.5 * ln_gamma(2.0 * s), 0.0)
        - 2.0 * s * one_minus_beta.ln()
        + C64::new(s * y.ln(), 0.0)
        - 0.5 * y * ((1.0 + beta) / one_minus_beta);
    ln_val.exp()
}

/// Result of projecting a coherent state onto a [`MorseBasis`].
#[derive(Debug, Clone)]
pub struct CoherentProjection {
    pub state: StateVector,
    /// Weight Σ_{n ≥ n_bound} |c_n|² on the quasi-continuum.
    pub dissociation_weight: f64,
    /// True when the dissociation weight exceeds the master-equation
    /// usability threshold of 0.01.
    pub dissociation_flagged: bool,
}

/// Coherent state |x0,p0⟩ expanded in the basis by grid quadrature of the
/// analytic wave function, then renormalized.
pub fn coherent_state(point: PhasePoint, basis: &MorseBasis) -> Result<StateVector> {
    Ok(coherent_state_detailed(point, basis)?.state)
}

pub fn coherent_state_detailed(point: PhasePoint, basis: &MorseBasis) -> Result<CoherentProjection> {
    let beta = point.beta(basis.params.s);
    if beta.norm() >= 1.0 {
        return Err(Error::InvalidArgument(format!("|β| = {} must be < 1", beta.norm())));
    }
    let psi: Array1<C64> =
        Array1::from_iter((0..basis.grid.points).map(|i| coherent_wavefunction(beta, &basis.params, basis.grid.x(i))));
    let dx = basis.grid.dx();
    let n_basis = basis.n_basis();
    let mut coeffs = Array1::<C64>::zeros(n_basis);
    for n in 0..n_basis {
        let col = basis.eigenvectors.column(n);
        let mut acc = C64::new(0.0, 0.0);
        for (phi, amp) in col.iter().zip(psi.iter()) {
            acc += phi * amp;
        }
        coeffs[n] = acc * dx;
    }
    let state = StateVector::new(basis.id(), coeffs)?;
    let dissociation_weight: f64 =
        state.coeffs.iter().skip(basis.n_bound).map(|c| c.norm_sqr()).sum();
    Ok(CoherentProjection {
        state,
        dissociation_weight,
        dissociation_flagged: dissociation_weight >= 0.01,
    })
}

// ------------------------------------------------------------------
// Closed-form bound coefficients (independent of the quadrature path).
// ------------------------------------------------------------------

fn big_ln_abs(x: &BigInt) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 900 {
        x.abs().to_f64().unwrap().ln()
    } else {
        let shift = bits - 64;
        let top = (x.abs() >> shift).to_f64().unwrap();
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }
}

fn rat_ln_abs(r: &BigRational) -> f64 {
    big_ln_abs(r.numer()) - big_ln_abs(r.denom())
}

fn rat_sign(r: &BigRational) -> f64 {
    if r.is_zero() {
        0.0
    } else if r.numer().sign() == num_bigint::Sign::Minus {
        -1.0
    } else {
        1.0
    }
}

/// Terminating hypergeometric sum ₂F₁(-n, 2s-n; 2s-2n+1; z) evaluated in
/// exact rational arithmetic (the alternating sum cancels catastrophically
/// in floating point for large n). Returns (ln |F|, arg F).
fn hyp2f1_terminating(n: usize, s: f64, z: C64) -> (f64, f64) {
    let s_r = BigRational::from_float(s).expect("finite s");
    let z_re = BigRational::from_float(z.re).expect("finite z");
    let z_im = BigRational::from_float(z.im).expect("finite z");
    let two = BigRational::from_integer(2.into());
    let b0 = &two * &s_r - BigRational::from_integer((n as i64).into());
    let c0 = &two * &s_r - &two * BigRational::from_integer((n as i64).into()) + BigRational::one();

    let mut term_re = BigRational::one();
    let mut term_im = BigRational::zero();
    let mut sum_re = term_re.clone();
    let mut sum_im = term_im.clone();
    for k in 0..n {
        let kf = BigRational::from_integer((k as i64).into());
        let a_fac = BigRational::from_integer((-(n as i64) + k as i64).into());
        let b_fac = &b0 + &kf;
        let c_fac = &c0 + &kf;
        let k1 = BigRational::from_integer((k as i64 + 1).into());
        let ratio = a_fac * b_fac / (c_fac * k1);
        // term ← term · ratio · z  (complex multiply)
        let tr = &term_re * &ratio;
        let ti = &term_im * &ratio;
        term_re = &tr * &z_re - &ti * &z_im;
        term_im = &tr * &z_im + &ti * &z_re;
        sum_re += &term_re;
        sum_im += &term_im;
    }

    let ln_re = rat_ln_abs(&sum_re);
    let ln_im = rat_ln_abs(&sum_im);
    let scale = ln_re.max(ln_im);
    if scale == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, 0.0);
    }
    let re = rat_sign(&sum_re) * (ln_re - scale).exp();
    let im = rat_sign(&sum_im) * (ln_im - scale).exp();
    (scale + C64::new(re, im).norm().ln(), im.atan2(re))
}

/// Bound coefficient c_n of the coherent state |β⟩ from the closed-form
/// expression (prefactors via log-gamma, the terminating ₂F₁ exactly).
pub fn coherent_coefficient_closed_form(n: usize, params: &MorseParams, beta: C64) -> Result<C64> {
    let s = params.s;
    if n >= params.n_bound() {
        return Err(Error::InvalidArgument(format!("closed form only covers bound n, got {n}")));
    }
    let nf = n as f64;
    let ln_pref = 0.5
        * ((2.0 * s - 2.0 * nf).ln() + ln_gamma(2.0 * s - nf + 1.0)
            - ln_gamma(nf + 1.0)
            - ln_gamma(2.0 * s))
        + ln_gamma(2.0 * s - nf)
        - ln_gamma(2.0 * s - 2.0 * nf + 1.0);
    let one_minus_beta = C64::new(1.0, 0.0) - beta;
    let (ln_f, arg_f) = hyp2f1_terminating(n, s, one_minus_beta);
    let ln_mag = ln_pref + s * (1.0 - beta.norm_sqr()).ln() - nf * one_minus_beta.norm().ln() + ln_f;
    let phase = -nf * one_minus_beta.arg() + arg_f;
    Ok(C64::from_polar(ln_mag.exp(), phase))
}

// ------------------------------------------------------------------
// Observables and closed-system evolution.
// ------------------------------------------------------------------

/// Position matrix X_mn = ∫ φ_m x φ_n dx by grid quadrature.
pub fn position_matrix(basis: &MorseBasis) -> Array2<f64> {
    let n = basis.n_basis();
    let m = basis.grid.points;
    let dx = basis.grid.dx();
    // weighted = diag(x)·eigenvectors, X = eigenvectorsᵀ·weighted·dx
    let mut weighted = basis.eigenvectors.clone();
    for (i, mut row) in weighted.rows_mut().into_iter().enumerate() {
        let x = basis.grid.x(i);
        row.mapv_inplace(|v| v * x);
    }
    let mut xmat = basis.eigenvectors.t().dot(&weighted);
    xmat.mapv_inplace(|v| v * dx);
    // enforce exact symmetry (quadrature is symmetric up to rounding)
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (xmat[[i, j]] + xmat[[j, i]]);
            xmat[[i, j]] = avg;
            xmat[[j, i]] = avg;
        }
    }
    let _ = m;
    xmat
}

/// Momentum matrix P_mn = ∫ φ_m (-i d/dx) φ_n dx with the derivative taken
/// spectrally on the periodic grid. Purely imaginary and antisymmetric in
/// the real eigenbasis; returned as the Hermitian complex matrix.
pub fn momentum_matrix(basis: &MorseBasis) -> Array2<C64> {
    let m = basis.grid.points;
    let n = basis.n_basis();
    let dx = basis.grid.dx();
    let length = basis.grid.x_max - basis.grid.x_min;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);

    // derivatives of all basis columns
    let mut deriv = Array2::<f64>::zeros((m, n));
    let mut buf: Vec<C64> = Vec::with_capacity(m);
    for j in 0..n {
        buf.clear();
        buf.extend(basis.eigenvectors.column(j).iter().map(|&v| C64::new(v, 0.0)));
        fft.process(&mut buf);
        for (i, c) in buf.iter_mut().enumerate() {
            let idx = if i <= m / 2 { i as f64 } else { i as f64 - m as f64 };
            let k = 2.0 * PI * idx / length;
            *c *= C64::new(0.0, k);
        }
        ifft.process(&mut buf);
        for i in 0..m {
            deriv[[i, j]] = buf[i].re / m as f64;
        }
    }
    let overlap = basis.eigenvectors.t().dot(&deriv); // real, antisymmetric
    let mut p = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            // antisymmetrize to kill rounding, multiply by -i
            let anti = 0.5 * (overlap[[i, j]] - overlap[[j, i]]) * dx;
            p[[i, j]] = C64::new(0.0, -anti);
        }
    }
    p
}

/// Position/momentum matrices bundled for repeated expectation values.
#[derive(Debug, Clone)]
pub struct Observables {
    pub x: Array2<f64>,
    pub p: Array2<C64>,
}

impl Observables {
    pub fn build(basis: &MorseBasis) -> Self {
        Self { x: position_matrix(basis), p: momentum_matrix(basis) }
    }
}

/// Free evolution over t (units of t0): c_n ← c_n e^{-i 2π E_n t/(2s+1)}.
pub fn evolve_free(state: &StateVector, basis: &MorseBasis, t: f64) -> Result<StateVector> {
    state.check_basis(basis.id())?;
    let f = basis.params.phase_factor();
    let coeffs = Array1::from_iter(
        state
            .coeffs
            .iter()
            .zip(basis.energies.iter())
            .map(|(c, &e)| c * C64::from_polar(1.0, -f * e * t)),
    );
    Ok(StateVector { basis_id: state.basis_id.clone(), coeffs })
}

/// (⟨X⟩, ⟨P⟩) of a state, building the observable matrices on the fly.
pub fn expectation_xp(state: &StateVector, basis: &MorseBasis) -> Result<(f64, f64)> {
    let obs = Observables::build(basis);
    expectation_xp_with(state, basis, &obs)
}

pub fn expectation_xp_with(state: &StateVector, basis: &MorseBasis, obs: &Observables) -> Result<(f64, f64)> {
    state.check_basis(basis.id())?;
    let c = &state.coeffs;
    let n = c.len();
    let mut ex = 0.0;
    let mut ep = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let w = c[i].conj() * c[j];
            ex += (w * obs.x[[i, j]]).re;
            ep += w * obs.p[[i, j]];
        }
    }
    Ok((ex, ep.re))
}

/// Survival probability |⟨φ(0)|φ(t)⟩|² of a freely evolving state, from the
/// populations and Bohr phases alone.
pub fn survival_probability(state: &StateVector, basis: &MorseBasis, t: f64) -> Result<f64> {
    state.check_basis(basis.id())?;
    let f = basis.params.phase_factor();
    let a: C64 = state
        .coeffs
        .iter()
        .zip(basis.energies.iter())
        .map(|(c, &e)| c.norm_sqr() * C64::from_polar(1.0, -f * e * t))
        .sum();
    Ok(a.norm_sqr())
}

/// Scans the survival probability on `[window.0, window.1]` with step `dt`
/// and returns (t, value) of the maximum.
pub fn find_revival(state: &StateVector, basis: &MorseBasis, window: (f64, f64), dt: f64) -> Result<(f64, f64)> {
    let mut best = (window.0, 0.0);
    let mut t = window.0;
    while t <= window.1 {
        let p = survival_probability(state, basis, t)?;
        if p > best.1 {
            best = (t, p);
        }
        t += dt;
    }
    Ok(best)
}

/// Weighted Bohr-frequency content of ⟨X⟩(t): entries (ν, weight) with
/// ν = (E_k - E_n)/(2s+1) in units of ω0 and weight |c_n c_k* X_kn|,
/// aggregated over ordered pairs (k > n doubled, diagonal at ν = 0).
pub fn bohr_spectrum(state: &StateVector, basis: &MorseBasis, xmat: &Array2<f64>) -> Result<Vec<(f64, f64)>> {
    state.check_basis(basis.id())?;
    let c = &state.coeffs;
    let n = c.len();
    let denom = 2.0 * basis.params.s + 1.0;
    let mut zero_weight = 0.0;
    let mut entries: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        zero_weight += c[i].norm_sqr() * xmat[[i, i]].abs();
        for k in (i + 1)..n {
            let w = 2.0 * (c[i].conj() * c[k]).norm() * xmat[[k, i]].abs();
            if w > 1e-14 {
                let freq = (basis.energies[k] - basis.energies[i]).abs() / denom;
                entries.push((freq, w));
            }
        }
    }
    if zero_weight > 1e-14 {
        entries.push((0.0, zero_weight));
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(entries)
}

/// Largest-weight entry of the spectrum inside the band [lo, hi].
pub fn band_peak(spectrum: &[(f64, f64)], lo: f64, hi: f64) -> Option<(f64, f64)> {
    spectrum
        .iter()
        .filter(|(f, _)| *f >= lo && *f <= hi)
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
}

/// Total weight of the spectrum inside the band [lo, hi].
pub fn band_weight(spectrum: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    spectrum.iter().filter(|(f, _)| *f >= lo && *f <= hi).map(|(_, w)| w).sum()
}

/// Windowed amplitude of the frequency ν (units of ω0 = 2π/t0) in the
/// series f(t): Goertzel-style projection with a Hann window centered at
/// `t_center` with half-width `half_width`.
fn windowed_amplitude(times: &[f64], series: &[f64], nu: f64, t_center: f64, half_width: f64) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut wsum = 0.0;
    for (&t, &f) in times.iter().zip(series.iter()) {
        let u = (t - t_center) / half_width;
        if u.abs() >= 1.0 {
            continue;
        }
        let w = 0.5 * (1.0 + (PI * u).cos());
        acc += w * f * C64::from_polar(1.0, -2.0 * PI * nu * t);
        wsum += w;
    }
    if wsum == 0.0 {
        0.0
    } else {
        acc.norm() / wsum
    }
}

/// Detects the quarter-revival epoch as the time where the ⟨X⟩ oscillation
/// at the doubled frequency 2ν1 dominates most strongly over the
/// fundamental ν1 (two wave packets chase each other on the orbit, halving
/// the apparent period).
pub fn quarter_revival_epoch(
    times: &[f64],
    x_series: &[f64],
    nu1: f64,
    search: (f64, f64),
    window_half_width: f64,
) -> f64 {
    let mut best_t = search.0;
    let mut best_r = f64::NEG_INFINITY;
    let step = 0.125;
    let mut tc = search.0;
    while tc <= search.1 {
        let a1 = windowed_amplitude(times, x_series, nu1, tc, window_half_width);
        let a2 = windowed_amplitude(times, x_series, 2.0 * nu1, tc, window_half_width);
        let r = a2 / (a1 + a2 + 1e-12);
        if r > best_r {
            best_r = r;
            best_t = tc;
        }
        tc += step;
    }
    best_t
}

// ------------------------------------------------------------------
// Serialization: JSON header + CSV eigenvector matrix.
// ------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct BasisHeader {
    params: MorseParams,
    grid: GridSpec,
    n_basis: usize,
    n_bound: usize,
    energies: Vec<f64>,
}

/// Writes `basis.json` and `eigenvectors.csv` (one grid point per row,
/// one state per column) into `dir`.
pub fn save_basis(basis: &MorseBasis, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let header = BasisHeader {
        params: basis.params.clone(),
        grid: basis.grid,
        n_basis: basis.n_basis(),
        n_bound: basis.n_bound,
        energies: basis.energies.to_vec(),
    };
    let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join("basis.json"), json)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("eigenvectors.csv"))?);
    for i in 0..basis.grid.points {
        let row: Vec<String> =
            (0..basis.n_basis()).map(|j| format!("{:.17e}", basis.eigenvectors[[i, j]])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn load_basis(dir: &std::path::Path) -> Result<MorseBasis> {
    let header: BasisHeader = serde_json::from_str(&std::fs::read_to_string(dir.join("basis.json"))?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let text = std::fs::read_to_string(dir.join("eigenvectors.csv"))?;
    let mut eigenvectors = Array2::<f64>::zeros((header.grid.points, header.n_basis));
    for (i, line) in text.lines().enumerate() {
        for (j, field) in line.split(',').enumerate() {
            eigenvectors[[i, j]] = field
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad float in eigenvectors.csv: {e}")))?;
        }
    }
    let id = MorseBasis::make_id(&header.params, &header.grid, header.n_basis);
    Ok(MorseBasis {
        params: header.params,
        grid: header.grid,
        eigenvectors,
        energies: Array1::from(header.energies),
        n_bound: header.n_bound,
        id,
    })
}
