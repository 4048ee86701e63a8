//! Master-equation generators.
//!
//! Three families are implemented behind the common [`MasterRhs`] trait:
//!
//! - [`AnharmonicGenerator`]: a multilevel system with nondegenerate
//!   spectrum coupled to a thermal oscillator bath through a Hermitian
//!   operator X,
//!
//!     dρ/dt = -i c [H,ρ] - 𝒳†𝒳ₑρ - 𝒳𝒳ₐ†ρ - ρ𝒳ₑ†𝒳 - ρ𝒳ₐ𝒳†
//!             + 𝒳ₐ†ρ𝒳 + 𝒳ₑρ𝒳† + 𝒳†ρ𝒳ₐ + 𝒳ρ𝒳ₑ†,
//!
//!   where 𝒳 is the strictly upper (lowering) part of X in the energy
//!   eigenbasis and 𝒳ₑ, 𝒳ₐ carry per-transition weights λω³(n̄(ω)+1) and
//!   λω³n̄(ω). For an equidistant spectrum with ladder X this collapses to
//!   the finite-temperature amplitude-damping equation. The secular
//!   reduction (populations obey the Pauli equation, each coherence decays
//!   at Γ_ij = ½(Σ_k γ_ki + Σ_k γ_kj)) is available both as a generator
//!   and as an exact closed-form propagator.
//! - [`DickeGenerator`]: collective damping of N = 2j two-level atoms,
//!   dρ/dt = -γ/2 (n̄+1)(J₊J₋ρ + ρJ₊J₋ - 2J₋ρJ₊) - γ/2 n̄ (J₋J₊ρ + ρJ₋J₊ - 2J₊ρJ₋),
//!   applied through O(d²) banded index arithmetic so N = 500 stays cheap.
//! - [`LindbladOps`]: explicit channel form for the harmonic presets
//!   (amplitude damping, phase relaxation).

use ndarray::linalg::general_mat_mul;
use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::integrate::MasterRhs;

/// Bath spectral exponent g²(ω)D(ω) ∝ ω³ (free electromagnetic field).
pub const SPECTRAL_EXPONENT: i32 = 3;

/// Thermal bath: temperature in units of ħω01/k and overall coupling λ.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct BathSpec {
    pub temperature: f64,
    pub lambda: f64,
}

impl BathSpec {
    pub fn new(temperature: f64, lambda: f64) -> Result<Self> {
        if temperature < 0.0 {
            return Err(Error::InvalidArgument(format!("temperature {temperature} < 0")));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be positive")));
        }
        Ok(Self { temperature, lambda })
    }
}

/// Mean occupation n̄ = 1/(e^{ω/kT} - 1); zero at T = 0.
pub fn thermal_occupation(omega: f64, kt: f64) -> f64 {
    if kt <= 0.0 || omega / kt > 700.0 {
        0.0
    } else {
        1.0 / (omega / kt).exp_m1()
    }
}

/// Coupling λ that realizes a requested ω01/γ01 ratio at T = 0, where
/// γ01 = 2λ|X01|²ω01³ is the 1→0 emission rate.
pub fn calibrate_lambda(
    target_omega_over_gamma: f64,
    energies: &Array1<f64>,
    xmat: &Array2<f64>,
    phase_factor: f64,
) -> Result<f64> {
    if energies.len() < 2 {
        return Err(Error::InvalidArgument("need at least two levels to calibrate".into()));
    }
    let omega01 = phase_factor * (energies[1] - energies[0]);
    let x01 = xmat[[0, 1]];
    if omega01 <= 0.0 || x01 == 0.0 {
        return Err(Error::InvalidArgument("calibration needs ω01 > 0 and X01 ≠ 0".into()));
    }
    Ok(1.0 / (2.0 * target_omega_over_gamma * x01 * x01 * omega01 * omega01))
}

/// Generator of the anharmonic thermal master equation.
#[derive(Debug, Clone)]
pub struct AnharmonicGenerator {
    basis_id: String,
    /// Level phase rates ω_n = phase_factor · E_n.
    pub omega: Array1<f64>,
    /// Full Hermitian coupling matrix X.
    pub x: Array2<f64>,
    /// Emission-weighted matrix, strictly upper triangular (n > m).
    pub x_e: Array2<f64>,
    /// Absorption-weighted matrix, strictly lower triangular (m > n).
    pub x_a: Array2<f64>,
    /// γ_ik: probability per unit time of the k → i transition.
    pub gamma: Array2<f64>,
    /// Coherence decay rates Γ_ij = ½(Σ_k γ_ki + Σ_k γ_kj).
    pub gamma_c: Array2<f64>,
    /// Precomputed 𝒳†𝒳ₑ + 𝒳𝒳ₐ† (complex storage for BLAS products).
    loss: Array2<C64>,
    x_upper_c: Array2<C64>,
    x_lower_c: Array2<C64>,
    x_e_c: Array2<C64>,
    x_a_c: Array2<C64>,
    pub include_hamiltonian: bool,
    pub bath: BathSpec,
}

/// Builds the generator from ascending energies, a Hermitian (real
/// symmetric) coupling matrix and a bath. `phase_factor` converts energies
/// to phase rates (2π/(2s+1) for the Morse convention); it multiplies both
/// the commutator and the Bohr frequencies entering the rate weights.
pub fn build_anharmonic_generator(
    energies: &Array1<f64>,
    xmat: &Array2<f64>,
    bath: &BathSpec,
    phase_factor: f64,
    basis_id: impl Into<String>,
) -> Result<AnharmonicGenerator> {
    let n = energies.len();
    if xmat.nrows() != n || xmat.ncols() != n {
        return Err(Error::ShapeMismatch(format!("X is {}x{}, expected {n}x{n}", xmat.nrows(), xmat.ncols())));
    }
    if energies.windows(2).into_iter().any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("energies must be strictly ascending".into()));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((xmat[[i, j]] - xmat[[j, i]]).abs());
        }
    }
    if asym > 1e-10 {
        return Err(Error::InvalidArgument(format!("X not Hermitian: asymmetry {asym:.3e}")));
    }
    if bath.temperature < 0.0 {
        return Err(Error::InvalidArgument("negative temperature".into()));
    }

    let omega: Array1<f64> = energies.mapv(|e| phase_factor * e);
    let omega01 = omega[1] - omega[0];
    let kt = bath.temperature * omega01;

    let mut x_e = Array2::<f64>::zeros((n, n));
    let mut x_a = Array2::<f64>::zeros((n, n));
    let mut gamma = Array2::<f64>::zeros((n, n));
    for m in 0..n {
        for k in (m + 1)..n {
            // m < k: transition frequency and weights
            let w = omega[k] - omega[m];
            let nb = thermal_occupation(w, kt);
            let w3 = w.powi(SPECTRAL_EXPONENT);
            x_e[[m, k]] = bath.lambda * xmat[[m, k]] * w3 * (nb + 1.0);
            x_a[[k, m]] = bath.lambda * xmat[[k, m]] * w3 * nb;
            gamma[[m, k]] = 2.0 * bath.lambda * xmat[[m, k]] * xmat[[m, k]] * w3 * (nb + 1.0);
            gamma[[k, m]] = 2.0 * bath.lambda * xmat[[k, m]] * xmat[[k, m]] * w3 * nb;
        }
    }
    let outflow: Vec<f64> = (0..n).map(|i| (0..n).map(|k| gamma[[k, i]]).sum()).collect();
    let mut gamma_c = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            gamma_c[[i, j]] = 0.5 * (outflow[i] + outflow[j]);
        }
    }

    let cplx = |m: &Array2<f64>| m.mapv(|v| C64::new(v, 0.0));
    let mut x_upper = Array2::<f64>::zeros((n, n));
    let mut x_lower = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i < j {
                x_upper[[i, j]] = xmat[[i, j]];
            } else if i > j {
                x_lower[[i, j]] = xmat[[i, j]];
            }
        }
    }
    let x_upper_c = cplx(&x_upper);
    let x_lower_c = cplx(&x_lower);
    let x_e_c = cplx(&x_e);
    let x_a_c = cplx(&x_a);
    let mut loss = Array2::<C64>::zeros((n, n));
    general_mat_mul(C64::new(1.0, 0.0), &x_lower_c, &x_e_c, C64::new(0.0, 0.0), &mut loss);
    general_mat_mul(C64::new(1.0, 0.0), &x_upper_c, &x_a_c, C64::new(1.0, 0.0), &mut loss);

    Ok(AnharmonicGenerator {
        basis_id: basis_id.into(),
        omega,
        x: xmat.clone(),
        x_e,
        x_a,
        gamma,
        gamma_c,
        loss,
        x_upper_c,
        x_lower_c,
        x_e_c,
        x_a_c,
        include_hamiltonian: true,
        bath: *bath,
    })
}

impl AnharmonicGenerator {
    /// Interaction-picture variant: drops the -ic[H,ρ] term. Used when
    /// comparing against interaction-picture reference equations.
    pub fn without_hamiltonian(mut self) -> Self {
        self.include_hamiltonian = false;
        self
    }

    /// Achieved ω01/γ01 ratio at the generator's actual temperature-free
    /// emission rate.
    pub fn omega01_over_gamma01_t0(&self) -> f64 {
        let omega01 = self.omega[1] - self.omega[0];
        let gamma01_t0 = 2.0 * self.bath.lambda * self.x[[0, 1]] * self.x[[0, 1]] * omega01.powi(3);
        omega01 / gamma01_t0
    }

    /// Full right-hand side of the master equation.
    pub fn rhs_full(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros(rho.raw_dim());
        self.rhs_into(0.0, rho, &mut out);
        out
    }

    /// Secular right-hand side: Pauli populations plus independently
    /// decaying coherences (with free phases when the Hamiltonian term is
    /// enabled).
    pub fn rhs_secular(&self, rho: &Array2<C64>) -> Array2<C64> {
        let n = self.omega.len();
        let mut out = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut v = -self.gamma_c[[i, j]] * rho[[i, j]];
                if self.include_hamiltonian {
                    v += C64::new(0.0, -(self.omega[i] - self.omega[j])) * rho[[i, j]];
                }
                out[[i, j]] = v;
            }
            for k in 0..n {
                if k != i {
                    out[[i, i]] += self.gamma[[i, k]] * rho[[k, k]];
                }
            }
        }
        out
    }

    pub fn n_levels(&self) -> usize {
        self.omega.len()
    }
}

impl MasterRhs for AnharmonicGenerator {
    fn dim(&self) -> usize {
        self.omega.len()
    }

    fn basis_id(&self) -> &str {
        &self.basis_id
    }

    fn rhs_into(&self, _t: f64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        self.dissipator_into(rho, out);
        if self.include_hamiltonian {
            let n = self.dim();
            for i in 0..n {
                for j in 0..n {
                    out[[i, j]] += C64::new(0.0, -(self.omega[i] - self.omega[j])) * rho[[i, j]];
                }
            }
        }
    }
}

impl AnharmonicGenerator {
    /// Dissipative part alone: G + G† with G = -loss·ρ + 𝒳ₐ†ρ𝒳 + 𝒳ₑρ𝒳†.
    fn dissipator_into(&self, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let n = self.dim();
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut g = Array2::<C64>::zeros((n, n));
        general_mat_mul(-one, &self.loss, rho, zero, &mut g);
        let mut tmp = Array2::<C64>::zeros((n, n));
        general_mat_mul(one, &self.x_a_c, rho, zero, &mut tmp);
        general_mat_mul(one, &tmp, &self.x_upper_c, one, &mut g);
        general_mat_mul(one, &self.x_e_c, rho, zero, &mut tmp);
        general_mat_mul(one, &tmp, &self.x_lower_c, one, &mut g);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] = g[[i, j]] + g[[j, i]].conj();
            }
        }
    }

    /// Maps an interaction-picture state back to the Schrödinger picture:
    /// ρ(t) = e^{-iH't} ρ̃(t) e^{iH't}.
    pub fn interaction_to_schrodinger(&self, rho_tilde: &Array2<C64>, t: f64) -> Array2<C64> {
        let n = self.dim();
        let mut out = rho_tilde.clone();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] *= C64::from_polar(1.0, -(self.omega[i] - self.omega[j]) * t);
            }
        }
        out
    }
}

/// The same master equation propagated in the interaction picture,
/// dρ̃/dt = e^{iH't} 𝒟[e^{-iH't} ρ̃ e^{iH't}] e^{-iH't}: the fast unitary
/// phases are handled analytically, so the integrator's step size is set
/// by the (slow) dissipator alone. This is an exact reformulation, not an
/// approximation; convert snapshots back with
/// [`AnharmonicGenerator::interaction_to_schrodinger`].
pub struct InteractionPicture<'a>(pub &'a AnharmonicGenerator);

impl MasterRhs for InteractionPicture<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn basis_id(&self) -> &str {
        self.0.basis_id()
    }

    fn rhs_into(&self, t: f64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let gen = self.0;
        if !gen.include_hamiltonian {
            gen.dissipator_into(rho, out);
            return;
        }
        let n = gen.dim();
        let phases: Vec<C64> =
            gen.omega.iter().map(|&w| C64::from_polar(1.0, w * t)).collect();
        let mut rho_s = rho.clone();
        for i in 0..n {
            for j in 0..n {
                rho_s[[i, j]] *= phases[i].conj() * phases[j];
            }
        }
        gen.dissipator_into(&rho_s, out);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] *= phases[i] * phases[j].conj();
            }
        }
    }
}

/// The secular equation viewed as a generator for the adaptive integrator.
pub struct SecularView<'a>(pub &'a AnharmonicGenerator);

impl MasterRhs for SecularView<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn basis_id(&self) -> &str {
        self.0.basis_id()
    }
    fn rhs_into(&self, _t: f64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        out.assign(&self.0.rhs_secular(rho));
    }
}

/// Pauli population derivative dP_n/dt = Σ_k (γ_nk P_k - γ_kn P_n).
pub fn pauli_rhs(gamma: &Array2<f64>, populations: &Array1<f64>) -> Result<Array1<f64>> {
    let n = populations.len();
    if gamma.nrows() != n || gamma.ncols() != n {
        return Err(Error::ShapeMismatch("gamma vs populations".into()));
    }
    if populations.iter().any(|&p| p < -1e-12) {
        return Err(Error::InvalidArgument("negative population".into()));
    }
    let mut out = Array1::<f64>::zeros(n);
    for i in 0..n {
        for k in 0..n {
            out[i] += gamma[[i, k]] * populations[k] - gamma[[k, i]] * populations[i];
        }
    }
    Ok(out)
}

/// Stationary distribution of the Pauli equation (unique null vector of the
/// rate matrix, normalized to unit sum).
pub fn pauli_steady_state(gamma: &Array2<f64>) -> Result<Array1<f64>> {
    use ndarray_linalg::Solve;
    let n = gamma.nrows();
    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for k in 0..n {
            m[[i, k]] += gamma[[i, k]];
            m[[k, i]] -= 0.0; // keep shape explicit
        }
    }
    for i in 0..n {
        let outflow: f64 = (0..n).map(|k| gamma[[k, i]]).sum();
        m[[i, i]] -= outflow;
    }
    // replace the last balance row by the normalization Σ P = 1
    for k in 0..n {
        m[[n - 1, k]] = 1.0;
    }
    let mut b = Array1::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let p = m.solve_into(b)?;
    Ok(p)
}

/// Exact propagator of the secular equation. Populations evolve through a
/// detailed-balance-symmetrized eigendecomposition of the rate matrix,
/// coherences decay elementwise; valid at T > 0.
#[derive(Debug, Clone)]
pub struct SecularPropagator {
    basis_id: String,
    omega: Array1<f64>,
    gamma_c: Array2<f64>,
    include_hamiltonian: bool,
    sqrt_pi: Array1<f64>,
    eigvecs: Array2<f64>,
    eigvals: Array1<f64>,
}

impl SecularPropagator {
    pub fn new(gen: &AnharmonicGenerator) -> Result<Self> {
        let n = gen.n_levels();
        let omega01 = gen.omega[1] - gen.omega[0];
        let kt = gen.bath.temperature * omega01;
        if kt <= 0.0 {
            return Err(Error::InvalidArgument(
                "closed-form secular propagator needs T > 0 (use the integrator at T = 0)".into(),
            ));
        }
        // Boltzmann weights relative to the ground level.
        let sqrt_pi: Array1<f64> =
            Array1::from_iter(gen.omega.iter().map(|&w| (-(w - gen.omega[0]) / (2.0 * kt)).exp()));
        // Symmetrized rate matrix S_ik = γ_ik √(π_k/π_i) - δ_ik Σ_l γ_li.
        let mut s = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    s[[i, k]] = gen.gamma[[i, k]] * sqrt_pi[k] / sqrt_pi[i];
                }
            }
            s[[i, i]] = -(0..n).map(|l| gen.gamma[[l, i]]).sum::<f64>();
        }
        // enforce symmetry against rounding
        for i in 0..n {
            for k in (i + 1)..n {
                let avg = 0.5 * (s[[i, k]] + s[[k, i]]);
                s[[i, k]] = avg;
                s[[k, i]] = avg;
            }
        }
        let (eigvals, eigvecs) = s.eigh(UPLO::Lower)?;
        Ok(Self {
            basis_id: gen.basis_id().to_string(),
            omega: gen.omega.clone(),
            gamma_c: gen.gamma_c.clone(),
            include_hamiltonian: gen.include_hamiltonian,
            sqrt_pi,
            eigvecs,
            eigvals,
        })
    }

    pub fn basis_id(&self) -> &str {
        &self.basis_id
    }

    /// ρ(t) from ρ(0) in closed form.
    pub fn propagate(&self, rho0: &Array2<C64>, t: f64) -> Array2<C64> {
        let n = self.omega.len();
        let p0: Array1<f64> = Array1::from_iter(rho0.diag().iter().map(|c| c.re));
        // q = D^{-1/2} p0; spectral propagation; p = D^{1/2} U e^{Λt} Uᵀ q
        let q: Array1<f64> = Array1::from_iter(p0.iter().zip(self.sqrt_pi.iter()).map(|(&p, &d)| p / d));
        let modal = self.eigvecs.t().dot(&q);
        let propagated: Array1<f64> = Array1::from_iter(
            modal.iter().zip(self.eigvals.iter()).map(|(&m, &l)| m * (l * t).min(0.0).exp()),
        );
        let p_raw = self.eigvecs.dot(&propagated);
        let mut out = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            out[[i, i]] = C64::new(p_raw[i] * self.sqrt_pi[i], 0.0);
            for j in 0..n {
                if i != j {
                    let mut v = rho0[[i, j]] * (-self.gamma_c[[i, j]] * t).exp();
                    if self.include_hamiltonian {
                        v *= C64::from_polar(1.0, -(self.omega[i] - self.omega[j]) * t);
                    }
                    out[[i, j]] = v;
                }
            }
        }
        out
    }
}

// ------------------------------------------------------------------
// Dicke generator.
// ------------------------------------------------------------------

/// Standard angular-momentum matrices (J₊, J₋, J_z) on the |j,m⟩ basis with
/// m ascending from -j to +j.
pub fn j_operators(j: f64) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let twoj = (2.0 * j).round();
    if (2.0 * j - twoj).abs() > 1e-12 || twoj < 0.0 {
        return Err(Error::InvalidArgument(format!("2j = {} must be a nonnegative integer", 2.0 * j)));
    }
    let dim = twoj as usize + 1;
    let mut jp = Array2::<f64>::zeros((dim, dim));
    let mut jz = Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        let m = -j + i as f64;
        jz[[i, i]] = m;
        if i + 1 < dim {
            jp[[i + 1, i]] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    let jm = jp.t().to_owned();
    Ok((jp, jm, jz))
}

/// Collective-damping generator for N = 2j two-level atoms in a thermal
/// photon bath; time unit 1/γ-free (rates carry γ explicitly).
#[derive(Debug, Clone)]
pub struct DickeGenerator {
    pub j: f64,
    pub gamma: f64,
    pub n_bar: f64,
    basis_id: String,
    /// Raising coefficients a_i with J₊|i⟩ = a_i|i+1⟩.
    a: Array1<f64>,
    /// Diagonal of J₊J₋ and of J₋J₊.
    dminus: Array1<f64>,
    dplus: Array1<f64>,
    pub jp: Array2<f64>,
    pub jm: Array2<f64>,
    pub jz: Array2<f64>,
}

pub fn dicke_basis_id(j: f64) -> String {
    format!("dicke:j={j}")
}

impl DickeGenerator {
    pub fn new(j: f64, gamma: f64, n_bar: f64) -> Result<Self> {
        if !(gamma > 0.0) || n_bar < 0.0 {
            return Err(Error::InvalidArgument("need γ > 0 and n̄ ≥ 0".into()));
        }
        let (jp, jm, jz) = j_operators(j)?;
        let dim = jp.nrows();
        let mut a = Array1::<f64>::zeros(dim.saturating_sub(1));
        for i in 0..dim - 1 {
            a[i] = jp[[i + 1, i]];
        }
        let mut dminus = Array1::<f64>::zeros(dim);
        let mut dplus = Array1::<f64>::zeros(dim);
        for i in 0..dim {
            if i > 0 {
                dminus[i] = a[i - 1] * a[i - 1];
            }
            if i + 1 < dim {
                dplus[i] = a[i] * a[i];
            }
        }
        Ok(Self { j, gamma, n_bar, basis_id: dicke_basis_id(j), a, dminus, dplus, jp, jm, jz })
    }

    /// Thermal stationary populations: detailed balance gives the geometric
    /// ladder P_{i+1}/P_i = n̄/(n̄+1).
    pub fn stationary_populations(&self) -> Array1<f64> {
        let dim = self.dminus.len();
        let mut p = Array1::<f64>::zeros(dim);
        if self.n_bar == 0.0 {
            p[0] = 1.0;
            return p;
        }
        let q = self.n_bar / (self.n_bar + 1.0);
        let mut w = 1.0;
        let mut total = 0.0;
        for i in 0..dim {
            p[i] = w;
            total += w;
            w *= q;
        }
        p.mapv_inplace(|v| v / total);
        p
    }

    /// Equilibrium ⟨J_z⟩ of the stationary distribution.
    pub fn stationary_jz(&self) -> f64 {
        let p = self.stationary_populations();
        p.iter().enumerate().map(|(i, &w)| w * (-self.j + i as f64)).sum()
    }
}

impl MasterRhs for DickeGenerator {
    fn dim(&self) -> usize {
        self.dminus.len()
    }

    fn basis_id(&self) -> &str {
        &self.basis_id
    }

    fn rhs_into(&self, _t: f64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let n = self.dim();
        let em = 0.5 * self.gamma * (self.n_bar + 1.0);
        let ab = 0.5 * self.gamma * self.n_bar;
        for i in 0..n {
            for k in 0..n {
                let mut v = -em * (self.dminus[i] + self.dminus[k]) * rho[[i, k]]
                    - ab * (self.dplus[i] + self.dplus[k]) * rho[[i, k]];
                if i + 1 < n && k + 1 < n {
                    v += 2.0 * em * self.a[i] * self.a[k] * rho[[i + 1, k + 1]];
                }
                if i > 0 && k > 0 {
                    v += 2.0 * ab * self.a[i - 1] * self.a[k - 1] * rho[[i - 1, k - 1]];
                }
                out[[i, k]] = v;
            }
        }
    }
}

/// Explicit-channel Lindblad generator: dρ/dt = -i[H,ρ] + Σ r (LρL† - ½{L†L,ρ}).
#[derive(Debug, Clone)]
pub struct LindbladOps {
    basis_id: String,
    dim: usize,
    pub hamiltonian: Option<Array2<C64>>,
    channels: Vec<(f64, Array2<C64>)>,
    /// Cached ½ Σ r L†L.
    anticomm: Array2<C64>,
}

impl LindbladOps {
    pub fn new(
        basis_id: impl Into<String>,
        dim: usize,
        hamiltonian: Option<Array2<C64>>,
        channels: Vec<(f64, Array2<C64>)>,
    ) -> Result<Self> {
        if channels.iter().any(|(r, l)| *r < 0.0 || l.nrows() != dim || l.ncols() != dim) {
            return Err(Error::InvalidArgument("channel shape/rate invalid".into()));
        }
        if let Some(h) = &hamiltonian {
            if h.nrows() != dim || h.ncols() != dim {
                return Err(Error::ShapeMismatch("hamiltonian dim".into()));
            }
        }
        let mut anticomm = Array2::<C64>::zeros((dim, dim));
        for (r, l) in &channels {
            let ldag = l.t().mapv(|c| c.conj());
            let ldl = ldag.dot(l);
            anticomm.zip_mut_with(&ldl, |acc, &v| *acc += 0.5 * r * v);
        }
        Ok(Self { basis_id: basis_id.into(), dim, hamiltonian, channels, anticomm })
    }

    /// Truncated-Fock annihilation matrix a|n⟩ = √n|n-1⟩.
    pub fn annihilation(dim: usize) -> Array2<C64> {
        let mut a = Array2::<C64>::zeros((dim, dim));
        for n in 1..dim {
            a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    /// Amplitude damping at temperature: channels √(γ(n̄+1)) a and √(γn̄) a†.
    pub fn amplitude_damping(dim: usize, gamma: f64, n_bar: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("need dim ≥ 2".into()));
        }
        let a = Self::annihilation(dim);
        let adag = a.t().mapv(|c| c.conj());
        Self::new(
            format!("fock:{dim}"),
            dim,
            None,
            vec![(gamma * (n_bar + 1.0), a), (gamma * n_bar, adag)],
        )
    }

    /// Phase relaxation: single channel a†a at rate γ.
    pub fn phase_relaxation(dim: usize, gamma: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("need dim ≥ 2".into()));
        }
        let a = Self::annihilation(dim);
        let adag = a.t().mapv(|c| c.conj());
        let num = adag.dot(&a);
        Self::new(format!("fock:{dim}"), dim, None, vec![(gamma, num)])
    }

    pub fn with_hamiltonian(mut self, h: Array2<C64>) -> Self {
        self.hamiltonian = Some(h);
        self
    }
}

impl MasterRhs for LindbladOps {
    fn dim(&self) -> usize {
        self.dim
    }

    fn basis_id(&self) -> &str {
        &self.basis_id
    }

    fn rhs_into(&self, _t: f64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        // -½{Σ r L†L, ρ}
        general_mat_mul(-one, &self.anticomm, rho, zero, out);
        general_mat_mul(-one, rho, &self.anticomm, one, out);
        let mut tmp = Array2::<C64>::zeros((self.dim, self.dim));
        for (r, l) in &self.channels {
            let ldag = l.t().mapv(|c| c.conj());
            general_mat_mul(C64::new(*r, 0.0), l, rho, zero, &mut tmp);
            general_mat_mul(one, &tmp, &ldag, one, out);
        }
        if let Some(h) = &self.hamiltonian {
            general_mat_mul(C64::new(0.0, -1.0), h, rho, one, out);
            general_mat_mul(C64::new(0.0, 1.0), rho, h, one, out);
        }
    }
}
