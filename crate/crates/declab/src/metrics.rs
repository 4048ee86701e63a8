//! Entropy/purity diagnostics, decoherence-time knee detection, Schmidt
//! decomposition, the generic short-time entanglement rate, and the toy
//! dephasing demonstrator.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, SVDInto, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::types::{DensityOperator, StateVector};

/// Tr ρ² of a raw matrix (Frobenius norm², valid for Hermitian ρ).
pub fn purity_of(rho: &Array2<C64>) -> f64 {
    rho.iter().map(|c| c.norm_sqr()).sum()
}

/// Von Neumann entropy -Tr ρ ln ρ from the eigenvalues, with eigenvalues in
/// [-floor_tol, 0) clamped to zero (0·ln 0 = 0) and an error beyond that.
pub fn entropy_of(rho: &Array2<C64>, floor_tol: f64) -> Result<f64> {
    let (vals, _) = rho.eigh(UPLO::Lower)?;
    let mut s = 0.0;
    for &v in vals.iter() {
        if v < -floor_tol {
            return Err(Error::ValidationFailure {
                t: f64::NAN,
                what: "entropy of non-positive-semidefinite state".into(),
                magnitude: v,
            });
        }
        if v > 0.0 {
            s -= v * v.ln();
        }
    }
    Ok(s)
}

/// Scalar diagnostics along a trajectory.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiagnosticSeries {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    pub linear_entropy: Vec<f64>,
    pub purity: Vec<f64>,
    pub participation: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Computes the diagnostic series of a trajectory whose Hamiltonian is
/// diagonal in the stored basis with the given level energies.
pub fn diagnostics(traj: &Trajectory, level_energies: &Array1<f64>) -> Result<DiagnosticSeries> {
    diagnostics_with_floor(traj, level_energies, 1e-7)
}

/// As [`diagnostics`] with an explicit eigenvalue floor for the entropy
/// (full Redfield-class equations transiently dip slightly negative).
pub fn diagnostics_with_floor(
    traj: &Trajectory,
    level_energies: &Array1<f64>,
    floor: f64,
) -> Result<DiagnosticSeries> {
    let n = traj.states.first().map(|s| s.nrows()).unwrap_or(0);
    if level_energies.len() != n {
        return Err(Error::ShapeMismatch(format!("{} energies for dim {n}", level_energies.len())));
    }
    let mut out = DiagnosticSeries {
        times: traj.times.clone(),
        entropy: Vec::with_capacity(traj.len()),
        linear_entropy: Vec::with_capacity(traj.len()),
        purity: Vec::with_capacity(traj.len()),
        participation: Vec::with_capacity(traj.len()),
        energy: Vec::with_capacity(traj.len()),
    };
    for rho in &traj.states {
        let p = purity_of(rho);
        out.purity.push(p);
        out.linear_entropy.push(1.0 - p);
        out.participation.push(1.0 / p);
        out.entropy.push(entropy_of(rho, floor)?);
        out.energy.push(
            rho.diag().iter().zip(level_energies.iter()).map(|(r, &e)| r.re * e).sum::<f64>(),
        );
    }
    Ok(out)
}

/// Which diagnostic the knee detector consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum KneeField {
    Entropy,
    LinearEntropy,
}

/// Result of the two-segment piecewise-linear fit.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KneeReport {
    /// Breakpoint = decoherence time.
    pub t_d: f64,
    pub early_slope: f64,
    pub late_slope: f64,
    /// Sum of squared residuals of the best fit.
    pub residual: f64,
    pub method: String,
}

/// Continuous two-segment piecewise-linear least-squares fit of series(t);
/// the breakpoint minimizing the total squared residual is the decoherence
/// time. Errors with [`Error::NoKnee`] when the slope magnitudes are not
/// separated by at least a factor 3.
pub fn detect_knee_raw(times: &[f64], series: &[f64]) -> Result<KneeReport> {
    let n = times.len();
    if n < 6 || series.len() != n {
        return Err(Error::InvalidArgument("knee detection needs ≥ 6 samples".into()));
    }
    let mut best: Option<(f64, [f64; 3], f64)> = None; // (ssr, params, b)
    for k in 2..n - 2 {
        let b = times[k];
        // basis functions g0 = 1, g1 = min(t,b), g2 = max(t-b, 0)
        let mut ata = [[0.0f64; 3]; 3];
        let mut aty = [0.0f64; 3];
        for (&t, &y) in times.iter().zip(series.iter()) {
            let g = [1.0, t.min(b), (t - b).max(0.0)];
            for r in 0..3 {
                for c in 0..3 {
                    ata[r][c] += g[r] * g[c];
                }
                aty[r] += g[r] * y;
            }
        }
        let theta = match solve3(ata, aty) {
            Some(t) => t,
            None => continue,
        };
        let mut ssr = 0.0;
        for (&t, &y) in times.iter().zip(series.iter()) {
            let fit = theta[0] + theta[1] * t.min(b) + theta[2] * (t - b).max(0.0);
            ssr += (y - fit) * (y - fit);
        }
        if best.as_ref().map_or(true, |(s, _, _)| ssr < *s) {
            best = Some((ssr, theta, b));
        }
    }
    let (ssr, theta, b) = best.ok_or(Error::InvalidArgument("knee fit failed".into()))?;
    // model a + s1·min(t,b) + s2·max(t-b,0): slope s1 before b, s2 after
    let early = theta[1];
    let late = theta[2];
    let ratio = early.abs() / late.abs().max(1e-300);
    if ratio < 3.0 {
        return Err(Error::NoKnee { ratio });
    }
    Ok(KneeReport {
        t_d: b,
        early_slope: early,
        late_slope: late,
        residual: ssr,
        method: "two-segment-piecewise-linear".into(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let mut piv = col;
        for r in col + 1..3 {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut acc = b[col];
        for c in col + 1..3 {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Knee detection on a diagnostic series field.
pub fn detect_knee(series: &DiagnosticSeries, field: KneeField) -> Result<KneeReport> {
    let data = match field {
        KneeField::Entropy => &series.entropy,
        KneeField::LinearEntropy => &series.linear_entropy,
    };
    let mut report = detect_knee_raw(&series.times, data)?;
    report.method = format!("{}:{:?}", report.method, field);
    Ok(report)
}

/// Resamples a (possibly nonuniformly sampled) series onto a uniform grid
/// over [times[0], window_end] by linear interpolation, then runs the
/// two-segment fit. The normative fit lives on a linear time scale, so
/// log-sampled trajectories must come through here.
pub fn detect_knee_resampled(
    times: &[f64],
    series: &[f64],
    window_end: f64,
    n_samples: usize,
) -> Result<KneeReport> {
    if times.len() < 4 {
        return Err(Error::InvalidArgument("too few samples".into()));
    }
    let t0 = times[0];
    let hi = window_end.min(times[times.len() - 1]);
    let n = n_samples.max(16);
    let mut tu = Vec::with_capacity(n);
    let mut su = Vec::with_capacity(n);
    let mut k = 0usize;
    for i in 0..n {
        let t = t0 + (hi - t0) * i as f64 / (n - 1) as f64;
        while k + 1 < times.len() && times[k + 1] < t {
            k += 1;
        }
        let (ta, tb) = (times[k], times[(k + 1).min(times.len() - 1)]);
        let (sa, sb) = (series[k], series[(k + 1).min(series.len() - 1)]);
        let f = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
        tu.push(t);
        su.push(sa + f * (sb - sa));
    }
    detect_knee_raw(&tu, &su)
}

/// Iteratively narrows the fit window to [t0, 10·t_d] until the breakpoint
/// is resolved (it must not sit in the first few percent of the window).
/// Returns the report of the final window.
pub fn detect_knee_auto(times: &[f64], series: &[f64]) -> Result<KneeReport> {
    let mut hi = times.len();
    for _ in 0..6 {
        let report = detect_knee_raw(&times[..hi], &series[..hi])?;
        let window = times[hi - 1] - times[0];
        if report.t_d >= 0.05 * window {
            return Ok(report);
        }
        let new_hi = times.partition_point(|&t| t <= 10.0 * report.t_d).max(8).min(times.len());
        if new_hi >= hi {
            return Ok(report);
        }
        hi = new_hi;
    }
    detect_knee_raw(&times[..hi], &series[..hi])
}

/// Completion time of the fast stage: the earliest time at which the
/// series has risen to within `fraction` of the extrapolated late segment
/// (deficit relative to the full fast amplitude). For an exponential rise
/// with the two-segment breakpoint at ≈2.2τ this lands at ln(1/fraction)·τ,
/// e.g. 3.5τ at fraction 0.03 — the point where the fast regime is over.
pub fn knee_completion_time(
    times: &[f64],
    series: &[f64],
    knee: &KneeReport,
    fraction: f64,
) -> f64 {
    // late line through the breakpoint value
    let idx_b = times.partition_point(|&t| t < knee.t_d).min(times.len() - 1);
    let level_b = series[idx_b];
    let late = |t: f64| level_b + knee.late_slope * (t - knee.t_d);
    let amplitude = (late(times[0]) - series[0]).abs().max(1e-300);
    for (k, &t) in times.iter().enumerate() {
        if t >= knee.t_d && (late(t) - series[k]) <= fraction * amplitude {
            return t;
        }
    }
    times[times.len() - 1]
}

/// Dissipation time from an exponential fit E(t) - E_eq ∝ e^{-t/t_diss}
/// restricted to the window (post-knee samples only).
pub fn dissipation_time(
    times: &[f64],
    energy: &[f64],
    e_eq: f64,
    window: (f64, f64),
) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in times.iter().zip(energy.iter()) {
        if t >= window.0 && t <= window.1 {
            let d = (e - e_eq).abs();
            if d > 1e-14 {
                xs.push(t);
                ys.push(d.ln());
            }
        }
    }
    if xs.len() < 4 {
        return Err(Error::InvalidArgument("too few samples for dissipation fit".into()));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if slope >= 0.0 {
        return Err(Error::InvalidArgument(format!("energy not decaying: slope {slope:.3e}")));
    }
    Ok(-1.0 / slope)
}

/// Schmidt decomposition of a bipartite pure state.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Coefficients p_k, descending, Σ p_k = 1.
    pub p: Vec<f64>,
    /// System Schmidt vectors, one per column.
    pub basis_a: Array2<C64>,
    /// Environment Schmidt vectors, one per column.
    pub basis_b: Array2<C64>,
}

impl SchmidtDecomposition {
    /// Participation ratio K = 1/Σ p_k².
    pub fn participation(&self) -> f64 {
        1.0 / self.p.iter().map(|p| p * p).sum::<f64>()
    }
}

/// Schmidt decomposition |Ψ⟩ = Σ √p_k |a_k⟩|b_k⟩ of a vector of length
/// dims.0 · dims.1 (index = i·dims.1 + j).
pub fn schmidt(state: &Array1<C64>, dims: (usize, usize)) -> Result<SchmidtDecomposition> {
    let (da, db) = dims;
    if state.len() != da * db {
        return Err(Error::ShapeMismatch(format!("state len {} vs {da}x{db}", state.len())));
    }
    let norm: f64 = state.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("state norm² = {norm}, expected 1")));
    }
    let mut m = Array2::<C64>::zeros((da, db));
    for i in 0..da {
        for j in 0..db {
            m[[i, j]] = state[i * db + j];
        }
    }
    let (u, sv, vt) = m.svd_into(true, true)?;
    let u = u.expect("svd u");
    let vt = vt.expect("svd vt");
    let k = da.min(db);
    let p: Vec<f64> = sv.iter().take(k).map(|&s| s * s).collect();
    let basis_a = u.slice(s![.., ..k]).to_owned();
    // M = U Σ Vᴴ, so the environment Schmidt vectors are the rows of Vᴴ:
    // Ψ[i·db+j] = Σ_k σ_k U[i,k] Vᴴ[k,j]
    let mut basis_b = Array2::<C64>::zeros((db, k));
    for kk in 0..k {
        for j in 0..db {
            basis_b[[j, kk]] = vt[[kk, j]];
        }
    }
    Ok(SchmidtDecomposition { p, basis_a, basis_b })
}

/// Short-time entanglement rate A = Σ_{k≠0,l≠0} |⟨a_k b_l|V|a_0 b_0⟩|²
/// for the product initial state formed by column 0 of each basis.
pub fn entanglement_rate_generic(
    v: &Array2<C64>,
    basis_a: &Array2<C64>,
    basis_b: &Array2<C64>,
) -> Result<f64> {
    let da = basis_a.nrows();
    let db = basis_b.nrows();
    if v.nrows() != da * db || v.ncols() != da * db {
        return Err(Error::ShapeMismatch("V vs product space".into()));
    }
    for (name, b) in [("system", basis_a), ("environment", basis_b)] {
        if b.nrows() != b.ncols() {
            return Err(Error::InvalidArgument(format!("{name} basis not square")));
        }
        for i in 0..b.ncols() {
            for k in 0..b.ncols() {
                let dot: C64 = (0..b.nrows()).map(|r| b[[r, i]].conj() * b[[r, k]]).sum();
                let expect = if i == k { 1.0 } else { 0.0 };
                if (dot - expect).norm() > 1e-10 {
                    return Err(Error::InvalidArgument(format!("{name} basis not orthonormal")));
                }
            }
        }
    }
    // w = V |a_0 b_0⟩
    let mut w = Array1::<C64>::zeros(da * db);
    for row in 0..da * db {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..da {
            for j in 0..db {
                acc += v[[row, i * db + j]] * basis_a[[i, 0]] * basis_b[[j, 0]];
            }
        }
        w[row] = acc;
    }
    let mut a = 0.0;
    for k in 1..da {
        for l in 1..db {
            let mut amp = C64::new(0.0, 0.0);
            for i in 0..da {
                for j in 0..db {
                    amp += (basis_a[[i, k]] * basis_b[[j, l]]).conj() * w[i * db + j];
                }
            }
            a += amp.norm_sqr();
        }
    }
    Ok(a)
}

/// Toy dephasing: diagonal populations frozen, coherence (n,m) multiplied
/// by the environment-overlap schedule f(n,m,t). The schedule must satisfy
/// f_nn = 1, |f_nm| ≤ 1 and f_nm = f_mn* at every requested time.
pub fn toy_dephasing<F>(
    coeffs: &Array1<C64>,
    basis_id: &str,
    schedule: F,
    times: &[f64],
) -> Result<Vec<DensityOperator>>
where
    F: Fn(usize, usize, f64) -> C64,
{
    let n = coeffs.len();
    let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("toy dephasing needs normalized coefficients".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut rho = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let f = schedule(i, j, t);
                if i == j && (f - C64::new(1.0, 0.0)).norm() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("schedule f_{{{i}{i}}}({t}) ≠ 1")));
                }
                if f.norm() > 1.0 + 1e-12 {
                    return Err(Error::InvalidArgument(format!("|f_{{{i}{j}}}({t})| > 1")));
                }
                let fj = schedule(j, i, t);
                if (f - fj.conj()).norm() > 1e-12 {
                    return Err(Error::InvalidArgument("schedule not Hermitian-symmetric".into()));
                }
                rho[[i, j]] = coeffs[i] * coeffs[j].conj() * f;
            }
        }
        out.push(DensityOperator { basis_id: basis_id.to_string(), matrix: rho });
    }
    Ok(out)
}

/// Pointer-basis decoherence endpoint Σ|c_k|²|k⟩⟨k| of an initial pure
/// state expanded in the pointer basis.
pub fn pointer_mixture(state: &StateVector) -> DensityOperator {
    let n = state.dim();
    let mut rho = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        rho[[i, i]] = C64::new(state.coeffs[i].norm_sqr(), 0.0);
    }
    DensityOperator { basis_id: state.basis_id.clone(), matrix: rho }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::TestRng;

    #[test]
    fn entropy_and_participation_limits() {
        // pure state: S = 0, K = 1
        let mut pure = Array2::<C64>::zeros((4, 4));
        pure[[1, 1]] = C64::new(1.0, 0.0);
        assert!(entropy_of(&pure, 1e-9).unwrap().abs() < 1e-14);
        assert!((1.0 / purity_of(&pure) - 1.0).abs() < 1e-14);
        // maximally mixed d=5: S = ln 5, K = 5
        let d = 5;
        let mixed = Array2::<C64>::from_diag(&Array1::from_elem(d, C64::new(1.0 / d as f64, 0.0)));
        assert!((entropy_of(&mixed, 1e-9).unwrap() - (d as f64).ln()).abs() < 1e-12);
        assert!((1.0 / purity_of(&mixed) - d as f64).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_strong_negativity() {
        let mut bad = Array2::<C64>::zeros((2, 2));
        bad[[0, 0]] = C64::new(1.1, 0.0);
        bad[[1, 1]] = C64::new(-0.1, 0.0);
        assert!(entropy_of(&bad, 1e-7).is_err());
    }

    #[test]
    fn knee_of_synthetic_exponential_plus_drift() {
        let tau1 = 1.0;
        let eps = 0.004;
        let times: Vec<f64> = (0..=1200).map(|k| k as f64 * 0.025).collect(); // [0, 30]
        let series: Vec<f64> =
            times.iter().map(|&t| 1.0 - (-t / tau1).exp() + eps * t).collect();
        let report = detect_knee_raw(&times, &series).unwrap();
        // The continuous two-segment LSQ breakpoint settles at ≈ 2τ1 for
        // this curve (exponential 86% complete); the ~3τ1 "transition done"
        // reading overestimates it. Accept the knee anywhere in [1.8, 3.75]τ1.
        assert!(
            report.t_d > 1.8 * tau1 && report.t_d < 3.75 * tau1,
            "t_d = {} vs τ1 = {tau1}",
            report.t_d,
        );
        assert!(report.early_slope > report.late_slope);
        // segment 2 still contains a bit of the rising tail just past the
        // breakpoint, tilting its slope slightly above ε
        assert!((report.late_slope - eps).abs() < 0.3 * eps);
    }

    #[test]
    fn knee_detection_is_scale_invariant() {
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.05).collect();
        let series: Vec<f64> = times.iter().map(|&t| 1.0 - (-t / 0.7).exp() + 0.01 * t).collect();
        let r1 = detect_knee_raw(&times, &series).unwrap();
        let times2: Vec<f64> = times.iter().map(|&t| 13.0 * t).collect();
        let series2: Vec<f64> = series.iter().map(|&s| 0.37 * s).collect();
        let r2 = detect_knee_raw(&times2, &series2).unwrap();
        assert!((r2.t_d / r1.t_d - 13.0).abs() < 1e-9);
        assert!((r2.early_slope / r1.early_slope - 0.37 / 13.0).abs() < 1e-9);
    }

    #[test]
    fn no_knee_is_reported_for_straight_lines() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let series: Vec<f64> = times.iter().map(|&t| 0.3 * t + 0.1).collect();
        match detect_knee_raw(&times, &series) {
            Err(Error::NoKnee { .. }) => {}
            other => panic!("expected NoKnee, got {other:?}"),
        }
    }

    #[test]
    fn dissipation_time_recovers_exponential() {
        let tdiss = 7.3;
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let energy: Vec<f64> = times.iter().map(|&t| -5.0 + 2.0 * (-t / tdiss).exp()).collect();
        let fit = dissipation_time(&times, &energy, -5.0, (2.0, 20.0)).unwrap();
        assert!((fit - tdiss).abs() < 1e-9 * tdiss);
    }

    #[test]
    fn schmidt_of_product_and_bell_states() {
        // product state
        let mut v = Array1::<C64>::zeros(6);
        v[0] = C64::new(1.0, 0.0); // |0⟩⊗|0⟩ in 2x3
        let d = schmidt(&v, (2, 3)).unwrap();
        assert!((d.p[0] - 1.0).abs() < 1e-14);
        assert!((d.participation() - 1.0).abs() < 1e-12);
        // Bell state
        let mut bell = Array1::<C64>::zeros(4);
        bell[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        bell[3] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let d = schmidt(&bell, (2, 2)).unwrap();
        assert!((d.p[0] - 0.5).abs() < 1e-14);
        assert!((d.p[1] - 0.5).abs() < 1e-14);
        assert!((d.participation() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn schmidt_reconstructs_random_states_and_matches_reduced_spectra() {
        let (da, db) = (4, 5);
        let mut rng = TestRng::new(17);
        let v = rng.state(da * db);
        let d = schmidt(&v, (da, db)).unwrap();
        assert!((d.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.p.windows(2).all(|w| w[0] >= w[1] - 1e-15));
        // reconstruction
        let mut rebuilt = Array1::<C64>::zeros(da * db);
        for k in 0..d.p.len() {
            let c = C64::new(d.p[k].sqrt(), 0.0);
            for i in 0..da {
                for j in 0..db {
                    rebuilt[i * db + j] += c * d.basis_a[[i, k]] * d.basis_b[[j, k]];
                }
            }
        }
        // global phase per Schmidt vector is free; compare projectors instead
        let mut dot = C64::new(0.0, 0.0);
        for i in 0..da * db {
            dot += rebuilt[i].conj() * v[i];
        }
        assert!((dot.norm() - 1.0).abs() < 1e-10, "reconstruction overlap {}", dot.norm());
        // p equals the eigenvalues of both reduced operators
        let mut rho_a = Array2::<C64>::zeros((da, da));
        for i in 0..da {
            for i2 in 0..da {
                for j in 0..db {
                    rho_a[[i, i2]] += v[i * db + j] * v[i2 * db + j].conj();
                }
            }
        }
        let (mut eva, _) = rho_a.eigh(UPLO::Lower).unwrap();
        eva.as_slice_mut().unwrap().reverse();
        for (k, &p) in d.p.iter().enumerate() {
            assert!((p - eva[k]).abs() < 1e-12);
        }
        let mut rho_b = Array2::<C64>::zeros((db, db));
        for j in 0..db {
            for j2 in 0..db {
                for i in 0..da {
                    rho_b[[j, j2]] += v[i * db + j] * v[i * db + j2].conj();
                }
            }
        }
        let (mut evb, _) = rho_b.eigh(UPLO::Lower).unwrap();
        evb.as_slice_mut().unwrap().reverse();
        for (k, &p) in d.p.iter().enumerate() {
            assert!((p - evb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_rate_vanishes_for_product_diagonal_interaction() {
        let (da, db) = (3, 3);
        let mut rng = TestRng::new(8);
        let mut v = Array2::<C64>::zeros((da * db, da * db));
        for i in 0..da * db {
            v[[i, i]] = C64::new(rng.uniform(), 0.0);
        }
        let eye_a = Array2::<C64>::eye(da);
        let eye_b = Array2::<C64>::eye(db);
        let a = entanglement_rate_generic(&v, &eye_a, &eye_b).unwrap();
        assert!(a.abs() < 1e-24);
    }

    #[test]
    fn generic_rate_is_basis_completion_independent() {
        // A must not depend on how the k≠0, l≠0 complements are chosen:
        // compare the canonical completion against a rotated one and against
        // the projector formula ‖(1-P_a)⊗(1-P_b) V ψ0‖².
        let (da, db) = (3, 4);
        let mut rng = TestRng::new(13);
        let mut v = Array2::<C64>::zeros((da * db, da * db));
        for i in 0..da * db {
            for j in 0..da * db {
                v[[i, j]] = rng.complex();
            }
        }
        // hermitize
        let vd = v.t().mapv(|c| c.conj());
        let v = (&v + &vd) * C64::new(0.5, 0.0);
        let basis_a = Array2::<C64>::eye(da);
        let basis_b = Array2::<C64>::eye(db);
        let a1 = entanglement_rate_generic(&v, &basis_a, &basis_b).unwrap();
        // rotate the complement of column 0 in the a-basis
        let mut rot = Array2::<C64>::eye(da);
        let (c, s) = (0.6f64, 0.8f64);
        rot[[1, 1]] = C64::new(c, 0.0);
        rot[[1, 2]] = C64::new(s, 0.0);
        rot[[2, 1]] = C64::new(-s, 0.0);
        rot[[2, 2]] = C64::new(c, 0.0);
        let a2 = entanglement_rate_generic(&v, &rot, &basis_b).unwrap();
        assert!((a1 - a2).abs() < 1e-10, "{a1} vs {a2}");
        // projector formula
        let mut w = Array1::<C64>::zeros(da * db);
        for row in 0..da * db {
            w[row] = v[[row, 0]];
        }
        let mut proj = 0.0;
        for i in 1..da {
            for j in 1..db {
                proj += w[i * db + j].norm_sqr();
            }
        }
        assert!((a1 - proj).abs() < 1e-12);
    }

    #[test]
    fn toy_dephasing_freezes_diagonal_and_kills_coherence() {
        let mut rng = TestRng::new(4);
        let c = rng.state(5);
        let gamma = 2.0;
        let schedule =
            |i: usize, j: usize, t: f64| if i == j { C64::new(1.0, 0.0) } else { C64::new((-gamma * t).exp(), 0.0) };
        let times = [0.0, 0.3, 5.0];
        let trajs = toy_dephasing(&c, "toy", schedule, &times).unwrap();
        // t=0 equals the pure projector
        for i in 0..5 {
            for j in 0..5 {
                assert!((trajs[0].matrix[[i, j]] - c[i] * c[j].conj()).norm() < 1e-14);
            }
        }
        for rho in &trajs {
            for i in 0..5 {
                assert!((rho.matrix[[i, i]].re - c[i].norm_sqr()).abs() < 1e-14);
            }
        }
        // long-time limit: pointer mixture Σ|c_k|²|k⟩⟨k|
        let target = pointer_mixture(
            &StateVector { basis_id: "toy".into(), coeffs: c.clone() },
        );
        let d = crate::types::hs_distance(&trajs[2], &target).unwrap();
        assert!(d < 1e-8, "distance to pointer mixture {d}");
        // constant schedule keeps ρ constant
        let const_traj =
            toy_dephasing(&c, "toy", |_, _, _| C64::new(1.0, 0.0), &times).unwrap();
        for rho in &const_traj {
            let diff: f64 = rho
                .matrix
                .iter()
                .zip(trajs[0].matrix.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-14);
        }
    }

    #[test]
    fn toy_dephasing_rejects_invalid_schedules() {
        let mut rng = TestRng::new(6);
        let c = rng.state(3);
        // |f| > 1
        let r = toy_dephasing(&c, "toy", |i, j, _| if i == j { C64::new(1.0, 0.0) } else { C64::new(1.5, 0.0) }, &[1.0]);
        assert!(r.is_err());
        // f_nn ≠ 1
        let r2 = toy_dephasing(&c, "toy", |_, _, _| C64::new(0.5, 0.0), &[1.0]);
        assert!(r2.is_err());
        // non-Hermitian
        let r3 = toy_dephasing(
            &c,
            "toy",
            |i, j, _| {
                if i == j {
                    C64::new(1.0, 0.0)
                } else if i < j {
                    C64::new(0.0, 0.5)
                } else {
                    C64::new(0.0, 0.5)
                }
            },
            &[1.0],
        );
        assert!(r3.is_err());
    }
}
