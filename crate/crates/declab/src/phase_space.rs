//! Planar W(x,p) and spherical W(θ,φ) Wigner functions.
//!
//! Planar: W(x,p) = (1/2π) ∫ ψ*(x+u/2) ψ(x-u/2) e^{iup} du for pure states,
//! and the same transform applied to the position-representation kernel
//! ρ(x-u/2, x+u/2) for mixed states. The u-integral is discretized on the
//! wave-function grid (u = 2kΔ), which makes every value real by
//! construction.
//!
//! Spherical: W(θ,φ) = Tr[ρ Δ(θ,φ)] with the multipole kernel
//! Δ = c Σ_{KQ} T†_KQ Y_KQ(θ,φ). The multipole operators follow
//! ⟨j,m'|T_KQ|j,m⟩ = √((2K+1)/(2j+1)) C(j m; K Q | j m'), which makes them
//! orthonormal under the trace inner product; the kernel is rescaled by
//! c = √((2j+1)/4π) so that ∫∫ W sinθ dθ dφ = 1 exactly. Coupling
//! coefficients are generated by angular-momentum ladder recursions (solve
//! the highest coupled state, then lower), with no factorial cancellations.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::morse::MorseBasis;
use crate::types::{DensityOperator, StateVector};

// ------------------------------------------------------------------
// Grid containers.
// ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Geometry {
    Planar { x_min: f64, x_max: f64, p_min: f64, p_max: f64, nx: usize, np: usize },
    Spherical { n_theta: usize, n_phi: usize },
}

/// Sampled quasiprobability values with separable quadrature weights:
/// node (i,j) has coordinates (axis1[i], axis2[j]) and weight w1[i]·w2[j].
/// For planar grids the weights are cell areas; for spherical grids the θ
/// weights are Gauss–Legendre weights in cosθ (absorbing the sinθ measure)
/// and the φ weights are uniform.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub geometry: Geometry,
    pub values: Array2<f64>,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl WignerGrid {
    /// Σ values·weights in a fixed (row-major) summation order.
    pub fn total(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.axis1.len() {
            for j in 0..self.axis2.len() {
                acc += self.values[[i, j]] * self.w1[i] * self.w2[j];
            }
        }
        acc
    }

    /// Marginal over axis2 (∫W dp for planar grids).
    pub fn marginal_axis1(&self) -> Vec<f64> {
        (0..self.axis1.len())
            .map(|i| (0..self.axis2.len()).map(|j| self.values[[i, j]] * self.w2[j]).sum())
            .collect()
    }

    /// Marginal over axis1.
    pub fn marginal_axis2(&self) -> Vec<f64> {
        (0..self.axis2.len())
            .map(|j| (0..self.axis1.len()).map(|i| self.values[[i, j]] * self.w1[i]).sum())
            .collect()
    }
}

/// Planar grid request; nodes snap onto the wave-function grid in x.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PlanarSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl PlanarSpec {
    /// Default window for Morse runs; encloses the cat structures.
    pub fn default_morse() -> Self {
        Self { x_min: -1.5, x_max: 2.5, p_min: -40.0, p_max: 40.0, nx: 256, np: 256 }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SphericalSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl SphericalSpec {
    /// Resolution making every quadrature in this module exact for spin j:
    /// Gauss–Legendre in θ handles products of two degree-2j expansions and
    /// the uniform φ rule resolves all azimuthal orders up to 4j.
    pub fn exact_for(j: f64) -> Self {
        let twoj = (2.0 * j).round() as usize;
        Self { n_theta: 2 * twoj.max(8) + 2, n_phi: 4 * twoj.max(8) + 4 }
    }
}

// ------------------------------------------------------------------
// Planar Wigner transform.
// ------------------------------------------------------------------

fn planar_axes(
    basis: &MorseBasis,
    spec: &PlanarSpec,
) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>, f64, f64)> {
    if spec.nx < 2 || spec.np < 2 || spec.x_max <= spec.x_min || spec.p_max <= spec.p_min {
        return Err(Error::InvalidArgument("degenerate planar spec".into()));
    }
    let g = &basis.grid;
    let dx_w = (spec.x_max - spec.x_min) / spec.nx as f64;
    if dx_w < g.dx() * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "requested x resolution {dx_w:.3e} finer than the wave-function grid {:.3e}",
            g.dx()
        )));
    }
    let mut idx = Vec::with_capacity(spec.nx);
    let mut xs = Vec::with_capacity(spec.nx);
    for i in 0..spec.nx {
        let x = spec.x_min + (i as f64 + 0.5) * dx_w;
        let k = ((x - g.x_min) / g.dx()).round();
        if k < 0.0 || k as usize >= g.points {
            return Err(Error::InvalidArgument(format!(
                "wigner x node {x} outside the wave-function grid"
            )));
        }
        idx.push(k as usize);
        xs.push(g.x(k as usize));
    }
    let dp = (spec.p_max - spec.p_min) / spec.np as f64;
    let ps: Vec<f64> = (0..spec.np).map(|j| spec.p_min + (j as f64 + 0.5) * dp).collect();
    Ok((idx, xs, ps, dx_w, dp))
}

fn wigner_from_correlator<F>(basis: &MorseBasis, spec: &PlanarSpec, corr: F) -> Result<WignerGrid>
where
    F: Fn(usize, usize) -> C64, // (center index, offset k) -> ρ(x-kΔ, x+kΔ)
{
    let (idx, xs, ps, dx_w, dp) = planar_axes(basis, spec)?;
    let delta = basis.grid.dx();
    let m = basis.grid.points;
    let mut values = Array2::<f64>::zeros((spec.nx, spec.np));
    let kcap = idx.iter().map(|&gi| gi.min(m - 1 - gi)).max().unwrap_or(0) + 1;
    // phase table e^{2ikΔp}
    let mut phases = Array2::<C64>::zeros((ps.len(), kcap));
    for (jp, &p) in ps.iter().enumerate() {
        for k in 0..kcap {
            phases[[jp, k]] = C64::from_polar(1.0, 2.0 * k as f64 * delta * p);
        }
    }
    for (i, &gi) in idx.iter().enumerate() {
        let kmax = gi.min(m - 1 - gi);
        let f: Vec<C64> = (0..=kmax).map(|k| corr(gi, k)).collect();
        for (jp, _) in ps.iter().enumerate() {
            let mut acc = 0.5 * f[0].re; // k = 0 counted once
            for (k, fk) in f.iter().enumerate().skip(1) {
                acc += (fk * phases[[jp, k]]).re;
            }
            values[[i, jp]] = 2.0 * acc * delta / PI;
        }
    }
    // Voronoi weights of the snapped (possibly slightly nonuniform) nodes
    let mut w1 = vec![dx_w; spec.nx];
    if spec.nx > 1 {
        for i in 0..spec.nx {
            let lo = if i == 0 { xs[0] - 0.5 * (xs[1] - xs[0]) } else { 0.5 * (xs[i - 1] + xs[i]) };
            let hi = if i == spec.nx - 1 {
                xs[i] + 0.5 * (xs[i] - xs[i - 1])
            } else {
                0.5 * (xs[i] + xs[i + 1])
            };
            w1[i] = hi - lo;
        }
    }
    Ok(WignerGrid {
        geometry: Geometry::Planar {
            x_min: spec.x_min,
            x_max: spec.x_max,
            p_min: spec.p_min,
            p_max: spec.p_max,
            nx: spec.nx,
            np: spec.np,
        },
        values,
        axis1: xs,
        axis2: ps,
        w1,
        w2: vec![dp; spec.np],
    })
}

/// Wave function of a basis state vector sampled on the grid.
pub fn wavefunction_on_grid(state: &StateVector, basis: &MorseBasis) -> Result<Array1<C64>> {
    state.check_basis(basis.id())?;
    let m = basis.grid.points;
    let mut psi = Array1::<C64>::zeros(m);
    for (n, c) in state.coeffs.iter().enumerate() {
        if c.norm_sqr() < 1e-32 {
            continue;
        }
        for i in 0..m {
            psi[i] += c * basis.eigenvectors[[i, n]];
        }
    }
    Ok(psi)
}

/// Planar Wigner function of a pure state given by its grid wave function.
pub fn wigner_planar_pure(
    psi: &Array1<C64>,
    basis: &MorseBasis,
    spec: &PlanarSpec,
) -> Result<WignerGrid> {
    if psi.len() != basis.grid.points {
        return Err(Error::ShapeMismatch("wave function vs grid".into()));
    }
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * basis.grid.dx();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("wave function norm² = {norm}, expected 1")));
    }
    wigner_from_correlator(basis, spec, |gi, k| psi[gi - k] * psi[gi + k].conj())
}

/// Planar Wigner function of a density operator expressed in the basis.
pub fn wigner_planar_mixed(
    rho: &DensityOperator,
    basis: &MorseBasis,
    spec: &PlanarSpec,
) -> Result<WignerGrid> {
    rho.check_basis(basis.id())?;
    let n = rho.dim();
    if n > basis.n_basis() {
        return Err(Error::ShapeMismatch("density operator larger than basis".into()));
    }
    // position representation ρ(x_i, x_j) = Σ_nm C[i,n] ρ[n,m] C[j,m]
    let m = basis.grid.points;
    let c_cplx: Array2<C64> = basis.eigenvectors.slice(s![.., ..n]).mapv(|v| C64::new(v, 0.0));
    let mut tmp = Array2::<C64>::zeros((m, n));
    ndarray::linalg::general_mat_mul(
        C64::new(1.0, 0.0),
        &c_cplx,
        &rho.matrix,
        C64::new(0.0, 0.0),
        &mut tmp,
    );
    let ct = c_cplx.t().to_owned();
    let mut rho_pos = Array2::<C64>::zeros((m, m));
    ndarray::linalg::general_mat_mul(C64::new(1.0, 0.0), &tmp, &ct, C64::new(0.0, 0.0), &mut rho_pos);
    wigner_from_correlator(basis, spec, |gi, k| rho_pos[[gi - k, gi + k]])
}

// ------------------------------------------------------------------
// Angular-momentum coupling and multipole operators.
// ------------------------------------------------------------------

fn raise_coeff(lam: f64, mu: f64) -> f64 {
    (lam * (lam + 1.0) - mu * (mu + 1.0)).max(0.0).sqrt()
}

/// Clebsch–Gordan coefficients C(j m; K Q | j m') for fixed (j, K), built by
/// solving J₊|top⟩ = 0 in the m1+m2 = j subspace and lowering. Returned as
/// `table[i3][i2]` with i3 = m'+j, i2 = Q+K and m = m'-Q.
pub fn cg_table(j: f64, k_rank: usize) -> Result<Array2<f64>> {
    let twoj = (2.0 * j).round();
    if (2.0 * j - twoj).abs() > 1e-12 || twoj < 0.0 {
        return Err(Error::InvalidArgument("2j must be a nonnegative integer".into()));
    }
    let dim_j = twoj as usize + 1;
    let kf = k_rank as f64;
    if k_rank > twoj as usize {
        return Err(Error::InvalidArgument(format!("multipole rank {k_rank} exceeds 2j")));
    }
    let dim_k = 2 * k_rank + 1;
    // top coupled state |(jK) j, j⟩ over pairs (m1 = j-q, m2 = q), q = 0..K
    let mut a = vec![0.0f64; k_rank + 1];
    a[0] = 1.0;
    for q in 1..=k_rank {
        let qf = q as f64;
        a[q] = -a[q - 1] * raise_coeff(kf, qf - 1.0) / raise_coeff(j, j - qf);
    }
    let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut a {
        *v /= norm;
    }

    let mut table = Array2::<f64>::zeros((dim_j, dim_k));
    // current coupled state as amplitudes over (i1 = m1+j, i2 = m2+K)
    let mut cur = Array2::<f64>::zeros((dim_j, dim_k));
    for (q, &amp) in a.iter().enumerate() {
        cur[[dim_j - 1 - q, q + k_rank]] = amp;
    }
    let mut m3 = j;
    loop {
        let i3 = (m3 + j).round() as usize;
        for i2 in 0..dim_k {
            let m2 = i2 as f64 - kf;
            let m1 = m3 - m2;
            if m1 >= -j - 1e-9 && m1 <= j + 1e-9 {
                let i1 = (m1 + j).round() as usize;
                table[[i3, i2]] = cur[[i1, i2]];
            }
        }
        if i3 == 0 {
            break;
        }
        // lower: |j, m3-1⟩ = J₋|j, m3⟩ / √(j(j+1) - m3(m3-1))
        let denom = raise_coeff(j, m3 - 1.0);
        let mut next = Array2::<f64>::zeros((dim_j, dim_k));
        for i1 in 0..dim_j {
            for i2 in 0..dim_k {
                let amp = cur[[i1, i2]];
                if amp == 0.0 {
                    continue;
                }
                let m1 = i1 as f64 - j;
                let m2 = i2 as f64 - kf;
                if i1 > 0 {
                    next[[i1 - 1, i2]] += amp * raise_coeff(j, m1 - 1.0);
                }
                if i2 > 0 {
                    next[[i1, i2 - 1]] += amp * raise_coeff(kf, m2 - 1.0);
                }
            }
        }
        next.mapv_inplace(|v| v / denom);
        cur = next;
        m3 -= 1.0;
    }
    Ok(table)
}

/// Complete set of multipole operators for one spin j.
///
/// T_KQ is stored as its diagonal band: for Q ≥ 0, band[i] = ⟨i+Q|T_KQ|i⟩.
/// Each Q-family (K = Q..2j) is re-orthonormalized with modified
/// Gram–Schmidt, which removes the ~1e-11 drift that 2j ladder-lowering
/// steps accumulate at large j while leaving the coupling-coefficient
/// convention untouched. Negative Q comes from the exact relation
/// T_{K,-Q} = (-1)^Q T_KQᵀ.
#[derive(Debug, Clone)]
pub struct MultipoleSet {
    pub j: f64,
    twoj: usize,
    /// bands[q][k-q] for q ≥ 0, vector length 2j+1-q.
    bands: Vec<Vec<Array1<f64>>>,
}

impl MultipoleSet {
    pub fn new(j: f64) -> Result<Self> {
        let twoj = (2.0 * j).round() as usize;
        let dim = twoj + 1;
        let tables: Vec<Array2<f64>> =
            (0..=twoj).map(|k| cg_table(j, k)).collect::<Result<_>>()?;
        let mut bands = Vec::with_capacity(twoj + 1);
        for q in 0..=twoj {
            let mut family: Vec<Array1<f64>> = Vec::with_capacity(twoj + 1 - q);
            for k_rank in q..=twoj {
                let factor = ((2.0 * k_rank as f64 + 1.0) / dim as f64).sqrt();
                let table = &tables[k_rank];
                let mut band = Array1::<f64>::zeros(dim - q);
                for i in 0..dim - q {
                    band[i] = factor * table[[i + q, q + k_rank]];
                }
                // modified Gram–Schmidt against lower ranks of the same Q
                for prev in &family {
                    let dot: f64 = prev.iter().zip(band.iter()).map(|(a, b)| a * b).sum();
                    band.zip_mut_with(prev, |b, &p| *b -= dot * p);
                }
                let norm: f64 = band.iter().map(|v| v * v).sum::<f64>().sqrt();
                band.mapv_inplace(|v| v / norm);
                family.push(band);
            }
            bands.push(family);
        }
        Ok(Self { j, twoj, bands })
    }

    pub fn band(&self, k_rank: usize, q: usize) -> &Array1<f64> {
        &self.bands[q][k_rank - q]
    }

    /// Dense T_KQ matrix.
    pub fn operator(&self, k_rank: usize, q: i64) -> Result<Array2<f64>> {
        if k_rank > self.twoj || q.unsigned_abs() as usize > k_rank {
            return Err(Error::InvalidArgument(format!(
                "multipole (K={k_rank}, Q={q}) out of range for 2j = {}",
                self.twoj
            )));
        }
        let dim = self.twoj + 1;
        let mut t = Array2::<f64>::zeros((dim, dim));
        let qa = q.unsigned_abs() as usize;
        let band = self.band(k_rank, qa);
        let sign = if q >= 0 || q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        for i in 0..dim - qa {
            if q >= 0 {
                t[[i + qa, i]] = band[i];
            } else {
                t[[i, i + qa]] = sign * band[i];
            }
        }
        Ok(t)
    }

    /// Tr(T†_KQ ρ) through the band.
    pub fn project(&self, k_rank: usize, q: i64, rho: &Array2<C64>) -> C64 {
        let qa = q.unsigned_abs() as usize;
        let band = self.band(k_rank, qa);
        let sign = if q >= 0 || q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let mut acc = C64::new(0.0, 0.0);
        for (i, &b) in band.iter().enumerate() {
            if q >= 0 {
                acc += b * rho[[i + qa, i]];
            } else {
                acc += sign * b * rho[[i, i + qa]];
            }
        }
        acc
    }
}

/// Spherical multipole operator T_KQ on the |j,m⟩ basis (m ascending),
/// ⟨j,m+Q|T_KQ|j,m⟩ = √((2K+1)/(2j+1)) C(j m; K Q | j m+Q). Entries are
/// real in this convention.
pub fn multipole_operator(k_rank: usize, q: i64, j: f64) -> Result<Array2<f64>> {
    let twoj = (2.0 * j).round() as usize;
    if k_rank > twoj {
        return Err(Error::InvalidArgument(format!("multipole rank {k_rank} exceeds 2j")));
    }
    MultipoleSet::new(j)?.operator(k_rank, q)
}

// ------------------------------------------------------------------
// Spherical harmonics (fully normalized, Condon–Shortley phase).
// ------------------------------------------------------------------

/// P̄_K^Q(cosθ) for all K ≤ k_max at fixed Q ≥ 0, with Y_KQ = P̄ e^{iQφ}.
fn normalized_legendre_column(k_max: usize, q: usize, cos_t: f64, sin_t: f64) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    // P̄_q^q by the stable product form
    let mut pqq = (1.0 / (4.0 * PI)).sqrt();
    for m in 1..=q {
        let mf = m as f64;
        pqq *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t;
    }
    if q <= k_max {
        out[q] = pqq;
    }
    if q + 1 <= k_max {
        out[q + 1] = (2.0 * q as f64 + 3.0).sqrt() * cos_t * pqq;
    }
    for k in (q + 2)..=k_max {
        let kf = k as f64;
        let qf = q as f64;
        let a = ((4.0 * kf * kf - 1.0) / (kf * kf - qf * qf)).sqrt();
        let b =
            (((kf - 1.0) * (kf - 1.0) - qf * qf) / (4.0 * (kf - 1.0) * (kf - 1.0) - 1.0)).sqrt();
        out[k] = a * (cos_t * out[k - 1] - b * out[k - 2]);
    }
    out
}

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton iteration).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// ------------------------------------------------------------------
// Spherical Wigner function.
// ------------------------------------------------------------------

/// Multipole expansion of a spin-j state: ρ_KQ = Tr(T†_KQ ρ). Evaluating
/// W(θ,φ) = √((2j+1)/4π) Σ ρ_KQ Y_KQ is exact at any point, so arcs and
/// grids sample the same object.
#[derive(Debug, Clone)]
pub struct SphericalWigner {
    pub j: f64,
    twoj: usize,
    /// coeffs[K][Q+K] = ρ_KQ.
    coeffs: Vec<Vec<C64>>,
}

impl SphericalWigner {
    pub fn new(rho: &DensityOperator, j: f64) -> Result<Self> {
        let twoj = (2.0 * j).round() as usize;
        let dim = twoj + 1;
        if rho.dim() != dim {
            return Err(Error::ShapeMismatch(format!("ρ dim {} vs 2j+1 = {dim}", rho.dim())));
        }
        let set = MultipoleSet::new(j)?;
        let mut coeffs = Vec::with_capacity(twoj + 1);
        for k_rank in 0..=twoj {
            let mut per_q = Vec::with_capacity(2 * k_rank + 1);
            for q in -(k_rank as i64)..=(k_rank as i64) {
                per_q.push(set.project(k_rank, q, &rho.matrix));
            }
            coeffs.push(per_q);
        }
        Ok(Self { j, twoj, coeffs })
    }

    /// Purity Tr ρ² = Σ |ρ_KQ|² from the multipole coefficients.
    pub fn purity(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    /// Reconstruct ρ = Σ_KQ ρ_KQ T_KQ (the expansion is invertible).
    pub fn reconstruct(&self, basis_id: &str) -> Result<DensityOperator> {
        let dim = self.twoj + 1;
        let set = MultipoleSet::new(self.j)?;
        let mut m = Array2::<C64>::zeros((dim, dim));
        for (k_rank, per_q) in self.coeffs.iter().enumerate() {
            for (qi, &c) in per_q.iter().enumerate() {
                let q = qi as i64 - k_rank as i64;
                let t = set.operator(k_rank, q)?;
                for i in 0..dim {
                    let i3 = i as i64 + q;
                    if i3 >= 0 && (i3 as usize) < dim {
                        m[[i3 as usize, i]] += c * t[[i3 as usize, i]];
                    }
                }
            }
        }
        Ok(DensityOperator { basis_id: basis_id.to_string(), matrix: m })
    }

    /// W(θ, φ).
    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        let scale = ((self.twoj as f64 + 1.0) / (4.0 * PI)).sqrt();
        let cos_t = theta.cos();
        let sin_t = theta.sin();
        let mut acc = 0.0;
        for q in 0..=self.twoj {
            let col = normalized_legendre_column(self.twoj, q, cos_t, sin_t);
            let mut gq = C64::new(0.0, 0.0);
            for k_rank in q..=self.twoj {
                let cq = self.coeffs[k_rank][q + k_rank];
                gq += cq * col[k_rank];
            }
            if q == 0 {
                acc += gq.re; // Y_K0 real; ρ_K0 real for Hermitian ρ
            } else {
                // Q and -Q pair up to twice the real part
                acc += 2.0 * (gq * C64::from_polar(1.0, q as f64 * phi)).re;
            }
        }
        scale * acc
    }

    /// Sample onto a (θ, φ) grid with exact quadrature weights.
    pub fn to_grid(&self, spec: &SphericalSpec) -> WignerGrid {
        let (gl_nodes, gl_weights) = gauss_legendre(spec.n_theta);
        // cosθ descending → θ ascending
        let thetas: Vec<f64> = gl_nodes.iter().rev().map(|&t| t.acos()).collect();
        let w1: Vec<f64> = gl_weights.iter().rev().cloned().collect();
        let dphi = 2.0 * PI / spec.n_phi as f64;
        let phis: Vec<f64> = (0..spec.n_phi).map(|k| k as f64 * dphi).collect();
        let mut values = Array2::<f64>::zeros((spec.n_theta, spec.n_phi));
        let scale = ((self.twoj as f64 + 1.0) / (4.0 * PI)).sqrt();
        for (it, &theta) in thetas.iter().enumerate() {
            let cos_t = theta.cos();
            let sin_t = theta.sin();
            // g_Q(θ) = Σ_K ρ_KQ P̄_K^Q(cosθ)
            let mut g = vec![C64::new(0.0, 0.0); self.twoj + 1];
            for (q, gq) in g.iter_mut().enumerate() {
                let col = normalized_legendre_column(self.twoj, q, cos_t, sin_t);
                for k_rank in q..=self.twoj {
                    *gq += self.coeffs[k_rank][q + k_rank] * col[k_rank];
                }
            }
            for (ip, &phi) in phis.iter().enumerate() {
                let mut acc = g[0].re;
                for (q, gq) in g.iter().enumerate().skip(1) {
                    acc += 2.0 * (gq * C64::from_polar(1.0, q as f64 * phi)).re;
                }
                values[[it, ip]] = scale * acc;
            }
        }
        WignerGrid {
            geometry: Geometry::Spherical { n_theta: spec.n_theta, n_phi: spec.n_phi },
            values,
            axis1: thetas,
            axis2: phis,
            w1,
            w2: vec![dphi; spec.n_phi],
        }
    }
}

/// Spherical Wigner function of a spin-j density operator on a (θ,φ) grid.
pub fn wigner_spherical(rho: &DensityOperator, j: f64, spec: &SphericalSpec) -> Result<WignerGrid> {
    Ok(SphericalWigner::new(rho, j)?.to_grid(spec))
}

// ------------------------------------------------------------------
// Nonclassicality and feature extraction.
// ------------------------------------------------------------------

/// M_nc = 1 - (I₊-I₋)/(I₊+I₋) from the positive and negative integrals of
/// the (normalized) Wigner function.
pub fn nonclassicality(grid: &WignerGrid) -> Result<f64> {
    let total = grid.total();
    if (total - 1.0).abs() > 0.02 {
        return Err(Error::InvalidArgument(format!("grid integrates to {total}, expected ≈ 1")));
    }
    let mut pos = 0.0;
    let mut neg = 0.0;
    for i in 0..grid.axis1.len() {
        for j in 0..grid.axis2.len() {
            let v = grid.values[[i, j]] * grid.w1[i] * grid.w2[j];
            if v >= 0.0 {
                pos += v;
            } else {
                neg += -v;
            }
        }
    }
    Ok(2.0 * neg / (pos + neg))
}

/// A local maximum of the Wigner function.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Hill {
    /// x (planar) or θ (spherical).
    pub a1: f64,
    /// p (planar) or φ (spherical).
    pub a2: f64,
    pub height: f64,
}

/// Local maxima above `threshold` × (global maximum), sorted by height
/// descending. Spherical grids wrap in φ; near-degenerate maxima closer
/// than ~2.5 cells (plateaus, symmetry ties, polar rings) merge into one
/// hill.
pub fn find_hills(grid: &WignerGrid, threshold: f64) -> Vec<Hill> {
    let (n1, n2) = (grid.axis1.len(), grid.axis2.len());
    let spherical = matches!(grid.geometry, Geometry::Spherical { .. });
    let global_max = grid.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cut = threshold * global_max;
    let mut candidates: Vec<Hill> = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let v = grid.values[[i, j]];
            if v < cut {
                continue;
            }
            let mut is_max = true;
            'neigh: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= n1 as i64 {
                        continue;
                    }
                    let jj = if spherical {
                        (j as i64 + dj).rem_euclid(n2 as i64)
                    } else {
                        let jj = j as i64 + dj;
                        if jj < 0 || jj >= n2 as i64 {
                            continue;
                        }
                        jj
                    };
                    if grid.values[[ii as usize, jj as usize]] > v {
                        is_max = false;
                        break 'neigh;
                    }
                }
            }
            if is_max {
                candidates.push(Hill { a1: grid.axis1[i], a2: grid.axis2[j], height: v });
            }
        }
    }
    candidates.sort_by(|a, b| b.height.partial_cmp(&a.height).unwrap());
    // merge clusters of equal-height plateau nodes
    let mut hills: Vec<Hill> = Vec::new();
    for c in candidates {
        let close = hills.iter().any(|h| {
            if spherical {
                let u = unit_vector(c.a1, c.a2);
                let v = unit_vector(h.a1, h.a2);
                let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                let cell = PI / n1 as f64;
                dot.clamp(-1.0, 1.0).acos() < 2.5 * cell
            } else {
                let cell1 = ((grid.axis1[n1 - 1] - grid.axis1[0]) / (n1 - 1) as f64).abs().max(1e-300);
                let cell2 = ((grid.axis2[n2 - 1] - grid.axis2[0]) / (n2 - 1) as f64).abs().max(1e-300);
                let d1 = (c.a1 - h.a1).abs() / cell1;
                let d2 = (c.a2 - h.a2).abs() / cell2;
                d1.hypot(d2) < 2.5
            }
        });
        if !close {
            hills.push(c);
        }
    }
    hills
}

/// Wigner-packet hills: local maxima (as in [`find_hills`]) that are not
/// interference-fringe crests. A cat's fringe maxima can exceed the packet
/// hills, but they sit inside sign-alternating oscillations, so any maximum
/// with a deeply negative neighborhood (below -`fringe_ratio`·height within
/// `radius_cells`) is discarded.
pub fn find_packet_hills(grid: &WignerGrid, threshold: f64, radius_cells: usize, fringe_ratio: f64) -> Vec<Hill> {
    let (n1, n2) = (grid.axis1.len(), grid.axis2.len());
    find_hills(grid, threshold)
        .into_iter()
        .filter(|h| {
            let i = grid.axis1.iter().position(|&a| a == h.a1).unwrap_or(0);
            let j = grid.axis2.iter().position(|&a| a == h.a2).unwrap_or(0);
            let r = radius_cells as i64;
            let mut local_min = f64::INFINITY;
            for di in -r..=r {
                for dj in -r..=r {
                    let ii = i as i64 + di;
                    let jj = j as i64 + dj;
                    if ii >= 0 && (ii as usize) < n1 && jj >= 0 && (jj as usize) < n2 {
                        local_min = local_min.min(grid.values[[ii as usize, jj as usize]]);
                    }
                }
            }
            local_min > -fringe_ratio * h.height
        })
        .collect()
}

/// Peak-to-peak fringe amplitude of W along the central part of the great
/// circle between two unit vectors (the interference signal of a cat pair).
pub fn fringe_contrast_along_arc(
    w: &SphericalWigner,
    v1: [f64; 3],
    v2: [f64; 3],
    samples: usize,
) -> f64 {
    let dot: f64 = v1.iter().zip(v2.iter()).map(|(a, b)| a * b).sum();
    let angle = dot.clamp(-1.0, 1.0).acos();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for s in 0..samples {
        // central 60% of the arc
        let t = 0.2 + 0.6 * s as f64 / (samples - 1) as f64;
        let (s1, s2) = (((1.0 - t) * angle).sin(), (t * angle).sin());
        let denom = angle.sin();
        let p: Vec<f64> = (0..3).map(|c| (s1 * v1[c] + s2 * v2[c]) / denom).collect();
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
        let phi = p[1].atan2(p[0]);
        let val = w.eval(theta, phi);
        min = min.min(val);
        max = max.max(val);
    }
    max - min
}

/// Unit vector of the Bloch direction (θ, φ).
pub fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morse::{self, PhasePoint};
    use crate::spin::{self, CoherentLabel, SpinBasis};
    use crate::test_support::{no_basis, TestRng};

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        for deg in 0..=23usize {
            let num: f64 = x.iter().zip(w.iter()).map(|(&xi, &wi)| wi * xi.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((num - exact).abs() < 1e-13, "degree {deg}: {num} vs {exact}");
        }
    }

    #[test]
    fn legendre_columns_match_low_order_harmonics() {
        let theta = 0.9f64;
        let col0 = normalized_legendre_column(2, 0, theta.cos(), theta.sin());
        assert!((col0[0] - (1.0 / (4.0 * PI)).sqrt()).abs() < 1e-14);
        assert!((col0[1] - (3.0 / (4.0 * PI)).sqrt() * theta.cos()).abs() < 1e-14);
        assert!(
            (col0[2] - (5.0 / (16.0 * PI)).sqrt() * (3.0 * theta.cos().powi(2) - 1.0)).abs()
                < 1e-14
        );
        let col1 = normalized_legendre_column(1, 1, theta.cos(), theta.sin());
        assert!((col1[1] - (-(3.0 / (8.0 * PI)).sqrt() * theta.sin())).abs() < 1e-14);
    }

    #[test]
    fn multipole_t00_and_t10_are_known() {
        let j = 1.0;
        let t00 = multipole_operator(0, 0, j).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { 1.0 / 3f64.sqrt() } else { 0.0 };
                assert!((t00[[i, k]] - expect).abs() < 1e-14);
            }
        }
        let t10 = multipole_operator(1, 0, j).unwrap();
        let expect = [-1.0, 0.0, 1.0].map(|m: f64| m / 2f64.sqrt());
        for i in 0..3 {
            for k in 0..3 {
                let want = if i == k { expect[i] } else { 0.0 };
                assert!((t10[[i, k]] - want).abs() < 1e-12, "T10[{i},{k}] = {}", t10[[i, k]]);
            }
        }
    }

    #[test]
    fn multipoles_are_orthonormal_and_hermitian_patterned() {
        for &j in &[1.5f64, 2.0, 12.5] {
            let dim = (2.0 * j).round() as usize + 1;
            let mut ops = Vec::new();
            for k_rank in 0..dim {
                for q in -(k_rank as i64)..=(k_rank as i64) {
                    ops.push((k_rank, q, multipole_operator(k_rank, q, j).unwrap()));
                }
            }
            for (a, (ka, qa, ta)) in ops.iter().enumerate() {
                for (b, (kb, qb, tb)) in ops.iter().enumerate() {
                    // Tr(T_a† T_b); T real so T† = Tᵀ
                    let mut tr = 0.0;
                    for i in 0..dim {
                        for k in 0..dim {
                            tr += ta[[k, i]] * tb[[k, i]];
                        }
                    }
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!(
                        (tr - expect).abs() < 1e-12,
                        "j={j}: Tr(T{ka}{qa}† T{kb}{qb}) = {tr}"
                    );
                }
            }
            // T_KQ† = (-1)^Q T_{K,-Q}
            for (ka, qa, ta) in &ops {
                let tm = multipole_operator(*ka, -qa, j).unwrap();
                let sgn = if qa % 2 == 0 { 1.0 } else { -1.0 };
                for i in 0..dim {
                    for k in 0..dim {
                        assert!(
                            (ta[[k, i]] - sgn * tm[[i, k]]).abs() < 1e-12,
                            "j={j} K={ka} Q={qa}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn multipoles_satisfy_spherical_tensor_commutators() {
        // [Jz, T_KQ] = Q T_KQ and [J±, T_KQ] = √(K(K+1)-Q(Q±1)) T_{K,Q±1}:
        // an independent characterization of the coupling coefficients.
        let j = 2.0;
        let (jp, jm, jz) = crate::lindblad::j_operators(j).unwrap();
        for k_rank in 0..=4usize {
            for q in -(k_rank as i64)..=(k_rank as i64) {
                let t = multipole_operator(k_rank, q, j).unwrap();
                let comm_z = jz.dot(&t) - t.dot(&jz);
                let mut max = 0.0f64;
                for (a, b) in comm_z.iter().zip(t.iter()) {
                    max = max.max((a - q as f64 * b).abs());
                }
                assert!(max < 1e-12, "[Jz,T] K={k_rank} Q={q}: {max}");
                if q < k_rank as i64 {
                    let t_up = multipole_operator(k_rank, q + 1, j).unwrap();
                    let c = raise_coeff(k_rank as f64, q as f64);
                    let comm = jp.dot(&t) - t.dot(&jp);
                    let mut max = 0.0f64;
                    for (a, b) in comm.iter().zip(t_up.iter()) {
                        max = max.max((a - c * b).abs());
                    }
                    assert!(max < 1e-12, "[J+,T] K={k_rank} Q={q}: {max}");
                }
                if q > -(k_rank as i64) {
                    let t_dn = multipole_operator(k_rank, q - 1, j).unwrap();
                    let c = raise_coeff(k_rank as f64, -(q as f64));
                    let comm = jm.dot(&t) - t.dot(&jm);
                    let mut max = 0.0f64;
                    for (a, b) in comm.iter().zip(t_dn.iter()) {
                        max = max.max((a - c * b).abs());
                    }
                    assert!(max < 1e-12, "[J-,T] K={k_rank} Q={q}: {max}");
                }
            }
        }
    }

    #[test]
    fn cg_rejects_out_of_range_rank() {
        assert!(multipole_operator(4, 0, 1.0).is_err());
        assert!(multipole_operator(2, 3, 1.0).is_err());
    }

    #[test]
    fn maximally_mixed_state_has_flat_wigner() {
        let j = 3.0;
        let dim = 7;
        let rho = DensityOperator::new(
            "dicke:j=3",
            Array2::from_diag(&Array1::from_elem(dim, C64::new(1.0 / dim as f64, 0.0))),
        )
        .unwrap();
        let grid = wigner_spherical(&rho, j, &SphericalSpec::exact_for(j)).unwrap();
        for v in grid.values.iter() {
            assert!((v - 1.0 / (4.0 * PI)).abs() < 1e-12);
        }
        assert!((grid.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spherical_normalization_and_purity_identities() {
        let j = 12.5;
        let basis = SpinBasis::new(j).unwrap();
        let l1 = CoherentLabel::from_angles(0.9, 0.4);
        let l2 = CoherentLabel::from_angles(2.0, -1.1);
        let rho = spin::classical_mixture(l1, l2, &basis).unwrap();
        let w = SphericalWigner::new(&rho, j).unwrap();
        let grid = w.to_grid(&SphericalSpec::exact_for(j));
        assert!((grid.total() - 1.0).abs() < 1e-6, "normalization {}", grid.total());
        // purity from multipole coefficients
        assert!((w.purity() - rho.purity()).abs() < 1e-10);
        // purity from the sampled grid: (4π/(2j+1)) Σ W² w
        let mut wsq = 0.0;
        for i in 0..grid.axis1.len() {
            for jj in 0..grid.axis2.len() {
                wsq += grid.values[[i, jj]] * grid.values[[i, jj]] * grid.w1[i] * grid.w2[jj];
            }
        }
        let purity_grid = 4.0 * PI / (2.0 * j + 1.0) * wsq;
        assert!((purity_grid - rho.purity()).abs() < 1e-10, "grid purity {purity_grid}");
    }

    #[test]
    fn spherical_roundtrip_recovers_rho() {
        let j = 6.0;
        let basis = SpinBasis::new(j).unwrap();
        let cat = spin::cat2(
            CoherentLabel::from_angles(0.8, 0.0),
            CoherentLabel::from_angles(2.4, 1.3),
            &basis,
        )
        .unwrap()
        .projector();
        let w = SphericalWigner::new(&cat, j).unwrap();
        let back = w.reconstruct(basis.id()).unwrap();
        let mut max = 0.0f64;
        for (a, b) in back.matrix.iter().zip(cat.matrix.iter()) {
            max = max.max((a - b).norm());
        }
        assert!(max < 1e-8, "roundtrip defect {max}");
    }

    #[test]
    fn wigner_is_linear_in_rho() {
        let j = 4.0;
        let basis = SpinBasis::new(j).unwrap();
        let r1 = spin::coherent_state(CoherentLabel::from_angles(0.7, 0.2), &basis)
            .unwrap()
            .projector();
        let r2 = spin::coherent_state(CoherentLabel::from_angles(2.1, -0.9), &basis)
            .unwrap()
            .projector();
        let alpha = 0.3;
        let mixed = DensityOperator {
            basis_id: r1.basis_id.clone(),
            matrix: &r1.matrix * C64::new(alpha, 0.0) + &r2.matrix * C64::new(1.0 - alpha, 0.0),
        };
        let spec = SphericalSpec { n_theta: 20, n_phi: 24 };
        let w1 = wigner_spherical(&r1, j, &spec).unwrap();
        let w2 = wigner_spherical(&r2, j, &spec).unwrap();
        let wm = wigner_spherical(&mixed, j, &spec).unwrap();
        for i in 0..spec.n_theta {
            for k in 0..spec.n_phi {
                let lin = alpha * w1.values[[i, k]] + (1.0 - alpha) * w2.values[[i, k]];
                assert!((wm.values[[i, k]] - lin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_about_z_shifts_phi() {
        let j = 5.0;
        let basis = SpinBasis::new(j).unwrap();
        let cat = spin::cat2(
            CoherentLabel::from_angles(1.1, 0.3),
            CoherentLabel::from_angles(1.9, -0.8),
            &basis,
        )
        .unwrap()
        .projector();
        let spec = SphericalSpec { n_theta: 16, n_phi: 24 };
        let grid = wigner_spherical(&cat, j, &spec).unwrap();
        // rotate by exactly one φ step
        let delta = 2.0 * PI / spec.n_phi as f64;
        let dim = basis.dim();
        let mut rotated = Array2::<C64>::zeros((dim, dim));
        for a in 0..dim {
            for b in 0..dim {
                let phase = C64::from_polar(1.0, -delta * (basis.m(a) - basis.m(b)));
                rotated[[a, b]] = phase * cat.matrix[[a, b]];
            }
        }
        let grid_rot = wigner_spherical(
            &DensityOperator { basis_id: cat.basis_id.clone(), matrix: rotated },
            j,
            &spec,
        )
        .unwrap();
        for i in 0..spec.n_theta {
            for k in 0..spec.n_phi {
                let shifted = grid.values[[i, (k + spec.n_phi - 1) % spec.n_phi]];
                assert!(
                    (grid_rot.values[[i, k]] - shifted).abs() < 1e-8,
                    "rotation covariance at ({i},{k})"
                );
            }
        }
    }

    #[test]
    fn coherent_state_lobe_sits_at_its_bloch_direction() {
        let j = 10.0;
        let basis = SpinBasis::new(j).unwrap();
        // τ = 0 → |j,-j⟩: single positive lobe at θ = π
        let ground = spin::coherent_state(CoherentLabel::new(C64::new(0.0, 0.0)), &basis)
            .unwrap()
            .projector();
        let w = SphericalWigner::new(&ground, j).unwrap();
        assert!(w.eval(PI, 0.0) > 0.0);
        assert!(w.eval(PI, 0.0) > 10.0 * w.eval(0.0, 0.0).abs());
        let grid = w.to_grid(&SphericalSpec::exact_for(j));
        let hills = find_hills(&grid, 0.5);
        assert_eq!(hills.len(), 1, "hills: {hills:?}");
        assert!(hills[0].a1 > PI - 0.25, "lobe at θ = {}", hills[0].a1);
        // a generic label: lobe at (π-β, φ)
        let (beta, phi) = (1.0f64, 0.7f64);
        let st = spin::coherent_state(CoherentLabel::from_angles(beta, phi), &basis)
            .unwrap()
            .projector();
        let w2 = SphericalWigner::new(&st, j).unwrap();
        let grid2 = w2.to_grid(&SphericalSpec::exact_for(j));
        let hills2 = find_hills(&grid2, 0.5);
        assert_eq!(hills2.len(), 1);
        let (th, ph) = spin::label_direction(CoherentLabel::from_angles(beta, phi));
        assert!((hills2[0].a1 - th).abs() < 0.15, "θ {} vs {th}", hills2[0].a1);
        let dphi = (hills2[0].a2 - ph + PI).rem_euclid(2.0 * PI) - PI;
        assert!(dphi.abs() < 0.15, "φ {} vs {ph}", hills2[0].a2);
    }

    #[test]
    fn cat4_wigner_shows_four_lobes_with_fringes_on_all_edges() {
        let n_atoms = 50;
        let basis = SpinBasis::for_atoms(n_atoms).unwrap();
        let labels = spin::tetrahedron_labels();
        let cat = spin::cat4(&labels, &basis).unwrap().projector();
        let w = SphericalWigner::new(&cat, basis.j).unwrap();
        let grid = w.to_grid(&SphericalSpec::exact_for(basis.j));
        assert!((grid.total() - 1.0).abs() < 1e-6);
        let hills = find_hills(&grid, 0.45);
        // four lobes within 2° of the tetrahedron vertices
        let dirs: Vec<(f64, f64)> = labels.iter().map(|&l| spin::label_direction(l)).collect();
        for (th, ph) in &dirs {
            let v = unit_vector(*th, *ph);
            let found = hills.iter().any(|h| {
                let u = unit_vector(h.a1, h.a2);
                let dot: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                dot.clamp(-1.0, 1.0).acos() < 2.0f64.to_radians()
            });
            assert!(found, "no lobe near vertex ({th:.3},{ph:.3}); hills: {hills:?}");
        }
        // fringes along all six edges initially: every edge contrast is a
        // sizable fraction of the strongest one
        let vs: Vec<[f64; 3]> = dirs.iter().map(|&(t, p)| unit_vector(t, p)).collect();
        let mut contrasts = Vec::new();
        for (a, b) in [(0, 1), (2, 3), (0, 2), (0, 3), (1, 2), (1, 3)] {
            contrasts.push(fringe_contrast_along_arc(&w, vs[a], vs[b], 160));
        }
        let max_c = contrasts.iter().cloned().fold(0.0f64, f64::max);
        for (e, c) in contrasts.iter().enumerate() {
            assert!(*c > 0.2 * max_c, "edge {e} contrast {c} vs max {max_c}");
        }
    }

    // --- planar ---

    #[test]
    fn planar_wigner_of_ground_state_is_positive_gaussianlike() {
        let basis = no_basis();
        let mut c = Array1::<C64>::zeros(basis.n_basis());
        c[0] = C64::new(1.0, 0.0);
        let st = StateVector::new(basis.id(), c).unwrap();
        let psi = wavefunction_on_grid(&st, basis).unwrap();
        let spec =
            PlanarSpec { x_min: -0.6, x_max: 0.7, p_min: -25.0, p_max: 25.0, nx: 64, np: 128 };
        let w = wigner_planar_pure(&psi, basis, &spec).unwrap();
        assert!((w.total() - 1.0).abs() < 2e-3, "normalization {}", w.total());
        let min = w.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-4, "ground-state Wigner min {min}");
        let hills = find_hills(&w, 0.3);
        assert_eq!(hills.len(), 1);
        let m = nonclassicality(&w).unwrap();
        assert!(m < 0.01, "M_nc = {m}");
    }

    #[test]
    fn planar_wigner_coherent_state_hill_location() {
        let basis = no_basis();
        let st = morse::coherent_state(PhasePoint::new(0.5, 0.0), basis).unwrap();
        let psi = wavefunction_on_grid(&st, basis).unwrap();
        let w = wigner_planar_pure(&psi, basis, &PlanarSpec::default_morse()).unwrap();
        assert!((w.total() - 1.0).abs() < 2e-3);
        let hills = find_hills(&w, 0.3);
        assert_eq!(hills.len(), 1, "hills: {hills:?}");
        assert!((hills[0].a1 - 0.5).abs() < 0.05, "x = {}", hills[0].a1);
        assert!(hills[0].a2.abs() < 1.0, "p = {}", hills[0].a2);
    }

    #[test]
    fn planar_marginals_match_position_and_momentum_densities() {
        let basis = no_basis();
        let st = morse::coherent_state(PhasePoint::new(0.5, 0.0), basis).unwrap();
        let psi = wavefunction_on_grid(&st, basis).unwrap();
        let spec =
            PlanarSpec { x_min: -0.8, x_max: 1.7, p_min: -40.0, p_max: 40.0, nx: 160, np: 256 };
        let w = wigner_planar_pure(&psi, basis, &spec).unwrap();
        // ∫W dp = |ψ(x)|²
        let mx = w.marginal_axis1();
        for (i, &x) in w.axis1.iter().enumerate() {
            let gi = ((x - basis.grid.x_min) / basis.grid.dx()).round() as usize;
            let dens = psi[gi].norm_sqr();
            assert!((mx[i] - dens).abs() < 1e-4, "x = {x}: {} vs {dens}", mx[i]);
        }
        // ∫W dx = |ψ̂(p)|² (direct Fourier transform as the oracle)
        let mp = w.marginal_axis2();
        let dx = basis.grid.dx();
        for (jp, &p) in w.axis2.iter().enumerate().step_by(16) {
            let mut amp = C64::new(0.0, 0.0);
            for i in 0..basis.grid.points {
                amp += psi[i] * C64::from_polar(1.0, -p * basis.grid.x(i));
            }
            let dens = (amp * dx).norm_sqr() / (2.0 * PI);
            assert!((mp[jp] - dens).abs() < 1e-4, "p = {p}: {} vs {dens}", mp[jp]);
        }
    }

    #[test]
    fn planar_mixed_reduces_to_pure_on_projectors() {
        let basis = no_basis();
        let mut rng = TestRng::new(41);
        // random state over the lowest 12 levels
        let mut c = Array1::<C64>::zeros(basis.n_basis());
        for i in 0..12 {
            c[i] = rng.complex();
        }
        let st = StateVector::new(basis.id(), c).unwrap();
        let psi = wavefunction_on_grid(&st, basis).unwrap();
        let spec =
            PlanarSpec { x_min: -0.9, x_max: 2.1, p_min: -30.0, p_max: 30.0, nx: 96, np: 96 };
        let wp = wigner_planar_pure(&psi, basis, &spec).unwrap();
        let wm = wigner_planar_mixed(&st.projector(), basis, &spec).unwrap();
        for (a, b) in wp.values.iter().zip(wm.values.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn equal_mixture_of_separated_coherent_states_is_fringe_free() {
        let basis = no_basis();
        let s1 = morse::coherent_state(PhasePoint::new(0.3, 12.0), basis).unwrap();
        let s2 = morse::coherent_state(PhasePoint::new(0.3, -12.0), basis).unwrap();
        let mix = DensityOperator::mixture(&[&s1, &s2], &[0.5, 0.5]).unwrap();
        let spec =
            PlanarSpec { x_min: -0.9, x_max: 2.1, p_min: -40.0, p_max: 40.0, nx: 128, np: 192 };
        let wm = wigner_planar_mixed(&mix, basis, &spec).unwrap();
        let hills = find_hills(&wm, 0.5);
        assert_eq!(hills.len(), 2, "hills {hills:?}");
        // fringe region between the two hills: |W| must stay below 5% of the
        // hill height (no interference in a classical mixture)...
        let hill_height = hills[0].height;
        // interference fringes oscillate in sign; a classical mixture only
        // has smooth nonnegative tail overlap between the hills, so the
        // fringe contrast is the depth of the negative dips there
        let mut fringe_max = 0.0f64;
        for (i, &x) in wm.axis1.iter().enumerate() {
            for (j, &p) in wm.axis2.iter().enumerate() {
                if (x - 0.3).abs() < 0.15 && p.abs() < 6.0 {
                    fringe_max = fringe_max.max(-wm.values[[i, j]]);
                }
            }
        }
        assert!(fringe_max < 0.05 * hill_height, "fringe {fringe_max} vs hill {hill_height}");
        // ... while the coherent superposition of the same pair interferes
        // strongly there
        let cat_coeffs = &s1.coeffs + &s2.coeffs;
        let cat = StateVector::new(basis.id(), cat_coeffs).unwrap();
        let wcat =
            wigner_planar_pure(&wavefunction_on_grid(&cat, basis).unwrap(), basis, &spec).unwrap();
        let mut cat_fringe = 0.0f64;
        for (i, &x) in wcat.axis1.iter().enumerate() {
            for (j, &p) in wcat.axis2.iter().enumerate() {
                if (x - 0.3).abs() < 0.15 && p.abs() < 6.0 {
                    cat_fringe = cat_fringe.max(-wcat.values[[i, j]]);
                }
            }
        }
        assert!(cat_fringe > 0.5 * hill_height, "cat fringe {cat_fringe}");
    }

    #[test]
    fn nonclassicality_rejects_unnormalized_grids() {
        let basis = no_basis();
        let mut c = Array1::<C64>::zeros(basis.n_basis());
        c[0] = C64::new(1.0, 0.0);
        let st = StateVector::new(basis.id(), c).unwrap();
        let psi = wavefunction_on_grid(&st, basis).unwrap();
        // a window that misses most of the state
        let spec = PlanarSpec { x_min: 1.0, x_max: 2.0, p_min: -5.0, p_max: 5.0, nx: 32, np: 32 };
        let w = wigner_planar_pure(&psi, basis, &spec).unwrap();
        assert!(nonclassicality(&w).is_err());
    }
}
