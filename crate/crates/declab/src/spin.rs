//! Collective two-level-atom states and observables on the symmetric
//! (j = N/2) Dicke ladder: atomic coherent states, two- and four-component
//! cat states, entanglement-rate formulas and classical reference mixtures.
//!
//! Conventions: |j,m⟩ with m ascending from -j to +j; the coherent state
//!
//!   |τ⟩ = Σ_m C(2j, j+m)^{1/2} τ^{j+m} / (1+|τ|²)^j |j,m⟩,
//!
//! τ = tan(β/2) e^{-iφ}, so τ = 0 is the lowest rung |j,-j⟩.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorOpts, Trajectory};
use crate::lindblad::{dicke_basis_id, DickeGenerator};
use crate::morse::ln_gamma;
use crate::types::{DensityOperator, StateVector};

/// Symmetric collective-spin basis of N = 2j two-level atoms.
#[derive(Debug, Clone)]
pub struct SpinBasis {
    pub j: f64,
    id: String,
}

impl SpinBasis {
    pub fn new(j: f64) -> Result<Self> {
        let twoj = (2.0 * j).round();
        if (2.0 * j - twoj).abs() > 1e-12 || twoj < 1.0 {
            return Err(Error::InvalidArgument(format!("2j = {} must be a positive integer", 2.0 * j)));
        }
        Ok(Self { j, id: dicke_basis_id(j) })
    }

    /// N atoms ↔ j = N/2.
    pub fn for_atoms(n_atoms: usize) -> Result<Self> {
        Self::new(n_atoms as f64 / 2.0)
    }

    pub fn dim(&self) -> usize {
        (2.0 * self.j).round() as usize + 1
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// m value of ladder index i.
    pub fn m(&self, i: usize) -> f64 {
        -self.j + i as f64
    }

    /// Raising coefficient: J₊|i⟩ = a_i |i+1⟩.
    pub fn raise_coeff(&self, i: usize) -> f64 {
        let m = self.m(i);
        (self.j * (self.j + 1.0) - m * (m + 1.0)).sqrt()
    }
}

/// Bloch-sphere label τ = tan(β/2)·e^{-iφ}.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoherentLabel {
    pub tau_re: f64,
    pub tau_im: f64,
}

impl CoherentLabel {
    pub fn new(tau: C64) -> Self {
        Self { tau_re: tau.re, tau_im: tau.im }
    }

    pub fn from_angles(beta: f64, phi: f64) -> Self {
        let tau = C64::from_polar((beta / 2.0).tan(), -phi);
        Self::new(tau)
    }

    pub fn tau(&self) -> C64 {
        C64::new(self.tau_re, self.tau_im)
    }

    /// (β, φ) with β ∈ [0, π), φ ∈ (-π, π].
    pub fn angles(&self) -> (f64, f64) {
        let tau = self.tau();
        (2.0 * tau.norm().atan(), -tau.arg())
    }
}

/// Atomic coherent state; binomial amplitudes accumulated in log space so
/// that j = 250 does not overflow.
pub fn coherent_state(label: CoherentLabel, basis: &SpinBasis) -> Result<StateVector> {
    let j = basis.j;
    let dim = basis.dim();
    let tau = label.tau();
    if !tau.is_finite() {
        return Err(Error::InvalidArgument("τ must be finite".into()));
    }
    let ln_norm = j * (1.0 + tau.norm_sqr()).ln();
    let (ln_tau, arg_tau) =
        if tau == C64::new(0.0, 0.0) { (f64::NEG_INFINITY, 0.0) } else { (tau.norm().ln(), tau.arg()) };
    let mut coeffs = Array1::<C64>::zeros(dim);
    for i in 0..dim {
        let k = i as f64; // k = j + m
        let ln_binom =
            0.5 * (ln_gamma(2.0 * j + 1.0) - ln_gamma(k + 1.0) - ln_gamma(2.0 * j - k + 1.0));
        let ln_mag = if i == 0 { -ln_norm } else { ln_binom + k * ln_tau - ln_norm };
        if ln_mag > -745.0 {
            coeffs[i] = C64::from_polar(ln_mag.exp(), k * arg_tau);
        }
    }
    StateVector::new(basis.id(), coeffs)
}

/// Closed-form overlap ⟨τ1|τ2⟩ = (1+τ1*τ2)^{2j} / [(1+|τ1|²)(1+|τ2|²)]^j.
pub fn coherent_overlap(label1: CoherentLabel, label2: CoherentLabel, j: f64) -> C64 {
    let t1 = label1.tau();
    let t2 = label2.tau();
    let inner = C64::new(1.0, 0.0) + t1.conj() * t2;
    if inner.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let ln_mag =
        2.0 * j * inner.norm().ln() - j * ((1.0 + t1.norm_sqr()).ln() + (1.0 + t2.norm_sqr()).ln());
    C64::from_polar(ln_mag.exp(), 2.0 * j * inner.arg())
}

/// Two-component cat |Ψ12⟩ = (|τ1⟩+|τ2⟩)/√(2(1+Re⟨τ1|τ2⟩)).
pub fn cat2(label1: CoherentLabel, label2: CoherentLabel, basis: &SpinBasis) -> Result<StateVector> {
    let s1 = coherent_state(label1, basis)?;
    let s2 = coherent_state(label2, basis)?;
    let denom = 2.0 * (1.0 + coherent_overlap(label1, label2, basis.j).re);
    if denom <= 1e-12 {
        return Err(Error::DegenerateNormalization(denom));
    }
    let coeffs = (&s1.coeffs + &s2.coeffs) / C64::new(denom.sqrt(), 0.0);
    Ok(StateVector { basis_id: basis.id().to_string(), coeffs })
}

/// Four-component cat |Ψ1234⟩ = Σ|τ_i⟩ / √(2(2+Re Σ_{i>k}⟨τ_i|τ_k⟩)).
pub fn cat4(labels: &[CoherentLabel; 4], basis: &SpinBasis) -> Result<StateVector> {
    let states: Vec<StateVector> =
        labels.iter().map(|&l| coherent_state(l, basis)).collect::<Result<_>>()?;
    let mut cross = 0.0;
    for i in 0..4 {
        for k in 0..i {
            cross += coherent_overlap(labels[i], labels[k], basis.j).re;
        }
    }
    let denom = 2.0 * (2.0 + cross);
    if denom <= 1e-12 {
        return Err(Error::DegenerateNormalization(denom));
    }
    let mut coeffs = Array1::<C64>::zeros(basis.dim());
    for s in &states {
        coeffs += &s.coeffs;
    }
    coeffs.mapv_inplace(|c| c / denom.sqrt());
    Ok(StateVector { basis_id: basis.id().to_string(), coeffs })
}

/// Labels of the four coherent states at the vertices of the regular
/// tetrahedron oriented with one edge parallel to the z axis and the
/// opposite edge parallel to the y axis. The first pair is the z edge,
/// the slowly decohering symmetric pair (τ2 = 1/τ1*).
pub fn tetrahedron_labels() -> [CoherentLabel; 4] {
    let beta1 = (2.0f64 / 3.0).sqrt().acos(); // vertex at z = √(2/3)
    let phi34 = (2.0f64 / 3.0).sqrt().atan2(-(1.0f64 / 3.0).sqrt()); // (x,y) = (-1/√3, √(2/3))
    [
        CoherentLabel::from_angles(beta1, 0.0),
        CoherentLabel::from_angles(std::f64::consts::PI - beta1, 0.0),
        CoherentLabel::from_angles(std::f64::consts::FRAC_PI_2, phi34),
        CoherentLabel::from_angles(std::f64::consts::FRAC_PI_2, -phi34),
    ]
}

/// Bloch-sphere direction (θ, φ) of a vertex label, with θ measured so the
/// state |τ=0⟩ = |j,-j⟩ sits at θ = π (where its Wigner lobe is).
pub fn label_direction(label: CoherentLabel) -> (f64, f64) {
    let (beta, phi) = label.angles();
    (std::f64::consts::PI - beta, phi)
}

/// ⟨J₊⟩ and the ladder correlators of a pure state, matrix-free.
struct LadderMoments {
    jp: C64,
    jpjm: f64,
    jmjp: f64,
}

fn ladder_moments(state: &StateVector, basis: &SpinBasis) -> Result<LadderMoments> {
    state.check_basis(basis.id())?;
    let c = &state.coeffs;
    let dim = basis.dim();
    let mut jp = C64::new(0.0, 0.0);
    let mut jpjm = 0.0;
    let mut jmjp = 0.0;
    for i in 0..dim {
        if i + 1 < dim {
            let a = basis.raise_coeff(i);
            jp += c[i + 1].conj() * a * c[i];
            jmjp += a * a * c[i].norm_sqr();
        }
        if i > 0 {
            let a = basis.raise_coeff(i - 1);
            jpjm += a * a * c[i].norm_sqr();
        }
    }
    Ok(LadderMoments { jp, jpjm, jmjp })
}

/// Entanglement rate A = 𝒞(J₊,J₋) = ⟨J₊J₋⟩ - ⟨J₊⟩⟨J₋⟩ of a pure state.
/// Nonnegative by Cauchy–Schwarz; asserted numerically.
pub fn entanglement_rate(state: &StateVector, basis: &SpinBasis) -> Result<f64> {
    let m = ladder_moments(state, basis)?;
    let a = m.jpjm - m.jp.norm_sqr();
    if a < -1e-10 {
        return Err(Error::ValidationFailure {
            t: 0.0,
            what: "entanglement rate turned negative".into(),
            magnitude: a,
        });
    }
    Ok(a.max(0.0))
}

/// Initial linear-entropy growth rate of a pure state under the collective
/// damping master equation:
///
///   dS_lin/dt|₀ = 2γ [ n̄ 𝒞(J₋,J₊) + (n̄+1) 𝒞(J₊,J₋) ].
///
/// The prefactor follows from d Tr ρ²/dt = 2 Tr(ρ ρ̇) and is cross-checked
/// against finite differences of the integrated master equation.
pub fn slin_rate_t0(state: &StateVector, gamma: f64, n_bar: f64, basis: &SpinBasis) -> Result<f64> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("slin_rate_t0 needs a normalized pure state".into()));
    }
    let m = ladder_moments(state, basis)?;
    let c_pm = m.jpjm - m.jp.norm_sqr();
    let c_mp = m.jmjp - m.jp.norm_sqr();
    Ok(2.0 * gamma * (n_bar * c_mp + (n_bar + 1.0) * c_pm))
}

/// Classical reference ρ_cl = ½(|τ1⟩⟨τ1| + |τ2⟩⟨τ2|).
pub fn classical_mixture(
    label1: CoherentLabel,
    label2: CoherentLabel,
    basis: &SpinBasis,
) -> Result<DensityOperator> {
    let s1 = coherent_state(label1, basis)?;
    let s2 = coherent_state(label2, basis)?;
    DensityOperator::mixture(&[&s1, &s2], &[0.5, 0.5])
}

/// Hilbert–Schmidt distance D(ρ,σ) = Tr[(ρ-σ)²].
pub use crate::types::hs_distance as distance;

/// Trajectory of the classical mixture evolved under the same Dicke master
/// equation as the actual state (the time-dependent classical reference).
pub fn evolved_classical_reference(
    label1: CoherentLabel,
    label2: CoherentLabel,
    gen: &DickeGenerator,
    t_grid: &[f64],
    opts: &IntegratorOpts,
) -> Result<Trajectory> {
    let basis = SpinBasis::new(gen.j)?;
    let rho_cl = classical_mixture(label1, label2, &basis)?;
    integrate(gen, &rho_cl, t_grid, opts)
}
