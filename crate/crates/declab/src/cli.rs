//! Config-driven experiment runs.
//!
//! A run consumes a JSON config (schema-validated, unknown keys rejected),
//! writes its outputs into one directory, and finishes with a
//! `manifest.json` listing every produced file with a SHA-256 hash. All
//! numerics settings live in the config, so re-running a config (or a
//! named preset) reproduces the outputs byte for byte. Exit codes: 0 on
//! success, 2 for config/schema problems, 3 for numerical failures.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorOpts, Trajectory};
use crate::lindblad::{
    build_anharmonic_generator, calibrate_lambda, BathSpec, DickeGenerator, SecularPropagator,
};
use crate::metrics::{self, detect_knee_auto, DiagnosticSeries, KneeReport};
use crate::morse::{self, GridSpec, MorseBasis, MorseParams, Observables, PhasePoint};
use crate::phase_space::{self, PlanarSpec, SphericalSpec, WignerGrid};
use crate::spin::{self, CoherentLabel, SpinBasis};
use crate::types::{DensityOperator, StateVector};
use crate::{cavity, hs_distance};

pub const SCHEMA_VERSION: u32 = 1;

// ------------------------------------------------------------------
// Config schema.
// ------------------------------------------------------------------

/// Time grid with an explicit unit tag. Three incompatible time units
/// exist across the experiments (t0, 1/γ, 1/g); the tag must match the
/// experiment or validation fails.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// "t0" | "inv_gamma" | "inv_g"
    pub unit: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// "linear" (default) or "log". A log grid runs geometrically from
    /// `log_first` (required) to `stop` and prepends t = 0 when start = 0,
    /// resolving knees that sit orders of magnitude below the span.
    #[serde(default)]
    pub spacing: Option<String>,
    #[serde(default)]
    pub log_first: Option<f64>,
}

impl TimeGrid {
    pub fn linear(unit: &str, start: f64, stop: f64, points: usize) -> Self {
        Self { unit: unit.into(), start, stop, points, spacing: None, log_first: None }
    }

    pub fn logarithmic(unit: &str, first: f64, stop: f64, points: usize) -> Self {
        Self {
            unit: unit.into(),
            start: 0.0,
            stop,
            points,
            spacing: Some("log".into()),
            log_first: Some(first),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points.max(2);
        if self.spacing.as_deref() == Some("log") {
            let first = self.log_first.unwrap_or(self.stop * 1e-6);
            let ratio = (self.stop / first).ln();
            let mut out = Vec::with_capacity(n + 1);
            if self.start == 0.0 {
                out.push(0.0);
            }
            for i in 0..n {
                out.push(first * (ratio * i as f64 / (n - 1) as f64).exp());
            }
            out
        } else {
            (0..n)
                .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
                .collect()
        }
    }

    fn expect_unit(&self, unit: &str) -> Result<()> {
        if self.unit == unit {
            Ok(())
        } else {
            Err(Error::Config(format!("time grid unit `{}` but experiment needs `{unit}`", self.unit)))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseSetup {
    /// "NO" or "custom"
    pub molecule: String,
    #[serde(default)]
    pub custom_s: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub n_basis: Option<usize>,
}

impl MorseSetup {
    pub fn no_molecule() -> Self {
        Self { molecule: "NO".into(), custom_s: None, grid: None, n_basis: None }
    }

    fn params(&self) -> Result<MorseParams> {
        match self.molecule.as_str() {
            "NO" => Ok(MorseParams::no_molecule()),
            "custom" => {
                let s = self.custom_s.ok_or_else(|| Error::Config("custom molecule needs custom_s".into()))?;
                MorseParams::new(s, "custom")
            }
            other => Err(Error::Config(format!("unknown molecule `{other}`"))),
        }
    }

    fn build(&self) -> Result<MorseBasis> {
        let params = self.params()?;
        let grid = self.grid.unwrap_or_else(GridSpec::default_for_morse);
        let n_basis = self.n_basis.unwrap_or(morse::DEFAULT_N_BASIS);
        morse::build_basis(&params, &grid, n_basis)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglePair {
    pub beta: f64,
    pub phi: f64,
}

impl AnglePair {
    fn label(&self) -> CoherentLabel {
        CoherentLabel::from_angles(self.beta, self.phi)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseFreeParams {
    pub morse: MorseSetup,
    pub initial_points: Vec<PhasePoint>,
    pub times: TimeGrid,
    #[serde(default)]
    pub wigner_snapshots: Vec<f64>,
    #[serde(default)]
    pub wigner: Option<PlanarSpec>,
    #[serde(default)]
    pub bohr_spectrum: bool,
    #[serde(default)]
    pub nonclassicality: bool,
    #[serde(default)]
    pub survival: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseDecoherenceParams {
    pub morse: MorseSetup,
    /// kT in units of hbar*omega01.
    pub temperature: f64,
    /// Coupling stated as the target omega01/gamma01 at T = 0.
    pub omega01_over_gamma01: f64,
    /// Number of lowest levels kept in the generator.
    pub active_levels: usize,
    /// Either a phase-space label or a bound eigenstate index.
    #[serde(default)]
    pub initial_point: Option<PhasePoint>,
    #[serde(default)]
    pub initial_eigenstate: Option<usize>,
    pub times: TimeGrid,
    /// "secular-closed-form" (exact propagator of the secular equation) or
    /// "full-rk" (adaptive integration of the complete generator).
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default)]
    pub wigner_snapshots: Vec<f64>,
    #[serde(default)]
    pub wigner: Option<PlanarSpec>,
    #[serde(default)]
    pub expectations: bool,
    #[serde(default)]
    pub rk_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DickeCatParams {
    pub n_atoms: usize,
    pub n_bar: f64,
    pub label1: AnglePair,
    pub label2: AnglePair,
    pub times: TimeGrid,
    /// Knee detection window [0, t] in 1/gamma; defaults to the full span.
    #[serde(default)]
    pub knee_window: Option<f64>,
    #[serde(default)]
    pub track_classical_references: bool,
    #[serde(default)]
    pub rk_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DickeContourParams {
    pub n_atoms: usize,
    pub n_bar: f64,
    pub beta_points: usize,
    pub times: TimeGrid,
    #[serde(default)]
    pub rk_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cat4WignerParams {
    pub n_atoms: usize,
    pub n_bar: f64,
    /// Snapshot times in 1/gamma.
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub spherical: Option<SphericalSpec>,
    #[serde(default)]
    pub rk_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubradiantPrepParams {
    pub n_atoms_list: Vec<usize>,
    pub delta_over_g: f64,
    pub photon_index: usize,
    pub n_max: usize,
    #[serde(default)]
    pub field_distribution: Vec<(usize, f64)>,
    /// Report times also in microseconds for g/2pi = 24 kHz.
    #[serde(default)]
    pub physical_units: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyDephasingParams {
    pub coefficients: Vec<[f64; 2]>,
    pub gamma: f64,
    pub times: TimeGrid,
}

/// Experiment selector; serialized as {"kind": "...", "params": {...}}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    /// Closed Morse dynamics: expectation values, Bohr spectrum, revivals,
    /// Wigner snapshots, nonclassicality sweeps.
    MorseFree(MorseFreeParams),
    /// Thermal-bath master equation in the Morse eigenbasis.
    MorseDecoherence(MorseDecoherenceParams),
    /// Collective damping of a two-component atomic cat (time unit 1/gamma).
    DickeCat(DickeCatParams),
    /// Decoherence-time contour over (beta1, beta2) at phi1 = phi2 = 0.
    DickeContour(DickeContourParams),
    /// Four-component tetrahedron cat with spherical Wigner snapshots.
    Cat4Wigner(Cat4WignerParams),
    /// Subradiant-state preparation sweep (time unit 1/g).
    SubradiantPrep(SubradiantPrepParams),
    /// Pointer-basis dephasing demonstrator with an exponential overlap
    /// schedule f_nm(t) = exp(-Gamma t) for n != m.
    ToyDephasing(ToyDephasingParams),
}

fn default_solver() -> String {
    "secular-closed-form".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub output_dir: String,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match &self.experiment {
            Experiment::MorseFree(p) => {
                p.times.expect_unit("t0")?;
                if p.initial_points.is_empty() {
                    return Err(Error::Config("need at least one initial point".into()));
                }
            }
            Experiment::MorseDecoherence(p) => {
                p.times.expect_unit("t0")?;
                if p.temperature < 0.0 {
                    return Err(Error::Config("temperature must be >= 0".into()));
                }
                if p.active_levels < 2 {
                    return Err(Error::Config("active_levels must be >= 2".into()));
                }
                if p.initial_point.is_none() == p.initial_eigenstate.is_none() {
                    return Err(Error::Config(
                        "exactly one of initial_point / initial_eigenstate required".into(),
                    ));
                }
                if p.solver != "secular-closed-form" && p.solver != "full-rk" {
                    return Err(Error::Config(format!("unknown solver `{}`", p.solver)));
                }
            }
            Experiment::DickeCat(p) => {
                p.times.expect_unit("inv_gamma")?;
                if p.n_atoms < 2 || p.n_bar < 0.0 {
                    return Err(Error::Config("need n_atoms >= 2 and n_bar >= 0".into()));
                }
            }
            Experiment::DickeContour(p) => {
                p.times.expect_unit("inv_gamma")?;
                if p.beta_points < 3 {
                    return Err(Error::Config("beta_points must be >= 3".into()));
                }
            }
            Experiment::Cat4Wigner(p) => {
                if p.snapshot_times.is_empty() {
                    return Err(Error::Config("need at least one snapshot time".into()));
                }
            }
            Experiment::SubradiantPrep(p) => {
                if p.n_atoms_list.is_empty() {
                    return Err(Error::Config("need at least one atom count".into()));
                }
                if !p.field_distribution.is_empty() {
                    let sum: f64 = p.field_distribution.iter().map(|(_, w)| w).sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(Error::Config(
                            "field_distribution weights must sum to 1".into(),
                        ));
                    }
                }
            }
            Experiment::ToyDephasing(p) => {
                p.times.expect_unit("inv_gamma")?;
                if p.coefficients.len() < 2 || p.gamma <= 0.0 {
                    return Err(Error::Config("need >= 2 coefficients and gamma > 0".into()));
                }
            }
        }
        Ok(())
    }
}

// ------------------------------------------------------------------
// Output plumbing.
// ------------------------------------------------------------------

struct OutputDir {
    root: PathBuf,
    files: Vec<(String, String, u64)>, // (path, sha256, bytes)
}

impl OutputDir {
    fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)?;
        let mut hasher = Sha256::new();
        hasher.update(contents.as_bytes());
        self.files.push((name.to_string(), format!("{:x}", hasher.finalize()), contents.len() as u64));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    fn finish(mut self, config: &ExperimentConfig) -> Result<Manifest> {
        self.files.sort();
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            config: serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?,
            files: self
                .files
                .iter()
                .map(|(p, h, b)| ManifestEntry { path: p.clone(), sha256: h.clone(), bytes: *b })
                .collect(),
        };
        let text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(self.root.join("manifest.json"), text + "\n")?;
        Ok(manifest)
    }
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub files: Vec<ManifestEntry>,
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn csv_of_columns(header: &[&str], columns: &[&[f64]]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    let rows = columns.first().map_or(0, |c| c.len());
    for r in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt(c[r])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn wigner_csv(grid: &WignerGrid) -> String {
    let mut out = String::new();
    match &grid.geometry {
        phase_space::Geometry::Planar { x_min, x_max, p_min, p_max, nx, np } => {
            out.push_str(&format!(
                "# geometry=planar x_min={x_min} x_max={x_max} p_min={p_min} p_max={p_max} nx={nx} np={np}\n"
            ));
            out.push_str("x,p,w\n");
        }
        phase_space::Geometry::Spherical { n_theta, n_phi } => {
            out.push_str(&format!("# geometry=spherical n_theta={n_theta} n_phi={n_phi}\n"));
            out.push_str("theta,phi,w\n");
        }
    }
    for (i, &a1) in grid.axis1.iter().enumerate() {
        for (j, &a2) in grid.axis2.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", fmt(a1), fmt(a2), fmt(grid.values[[i, j]])));
        }
    }
    out
}

fn diagnostics_csv(d: &DiagnosticSeries) -> String {
    csv_of_columns(
        &["t", "entropy", "linear_entropy", "purity", "participation", "energy"],
        &[&d.times, &d.entropy, &d.linear_entropy, &d.purity, &d.participation, &d.energy],
    )
}

// ------------------------------------------------------------------
// Experiment drivers.
// ------------------------------------------------------------------

fn run_morse_free(
    out: &mut OutputDir,
    morse_setup: &MorseSetup,
    initial_points: &[PhasePoint],
    times: &TimeGrid,
    wigner_snapshots: &[f64],
    wigner: &Option<PlanarSpec>,
    bohr: bool,
    noncl: bool,
    survival: bool,
) -> Result<()> {
    let basis = morse_setup.build()?;
    let obs = Observables::build(&basis);
    let ts = times.values();
    let states: Vec<StateVector> = initial_points
        .iter()
        .map(|&p| morse::coherent_state(p, &basis))
        .collect::<Result<_>>()?;

    // expectation values per initial point
    let mut cols: Vec<Vec<f64>> = vec![ts.clone()];
    let mut header: Vec<String> = vec!["t".into()];
    for (k, st) in states.iter().enumerate() {
        let mut xs = Vec::with_capacity(ts.len());
        let mut ps = Vec::with_capacity(ts.len());
        for &t in &ts {
            let evolved = morse::evolve_free(st, &basis, t)?;
            let (x, p) = morse::expectation_xp_with(&evolved, &basis, &obs)?;
            xs.push(x);
            ps.push(p);
        }
        header.push(format!("x_{k}"));
        header.push(format!("p_{k}"));
        cols.push(xs);
        cols.push(ps);
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let col_refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    out.write("expectations.csv", &csv_of_columns(&header_refs, &col_refs))?;

    if bohr {
        let spec = morse::bohr_spectrum(&states[0], &basis, &obs.x)?;
        let freqs: Vec<f64> = spec.iter().map(|&(f, _)| f).collect();
        let weights: Vec<f64> = spec.iter().map(|&(_, w)| w).collect();
        out.write("spectrum.csv", &csv_of_columns(&["frequency_w0", "weight"], &[&freqs, &weights]))?;
    }

    if survival {
        let mut cols: Vec<Vec<f64>> = vec![ts.clone()];
        for st in &states {
            let s: Vec<f64> =
                ts.iter().map(|&t| morse::survival_probability(st, &basis, t)).collect::<Result<_>>()?;
            cols.push(s);
        }
        let mut header = vec!["t".to_string()];
        for k in 0..states.len() {
            header.push(format!("survival_{k}"));
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let col_refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        out.write("survival.csv", &csv_of_columns(&header_refs, &col_refs))?;
    }

    let wspec = wigner.unwrap_or_else(PlanarSpec::default_morse);
    for &t in wigner_snapshots {
        let evolved = morse::evolve_free(&states[0], &basis, t)?;
        let psi = phase_space::wavefunction_on_grid(&evolved, &basis)?;
        let grid = phase_space::wigner_planar_pure(&psi, &basis, &wspec)?;
        let hills = phase_space::find_hills(&grid, 0.3);
        out.write(&format!("wigner_t{t}.csv"), &wigner_csv(&grid))?;
        out.write_json(&format!("hills_t{t}.json"), &hills)?;
    }

    if noncl {
        let mut cols: Vec<Vec<f64>> = vec![ts.clone()];
        for st in &states {
            let mut ms = Vec::with_capacity(ts.len());
            for &t in &ts {
                let evolved = morse::evolve_free(st, &basis, t)?;
                let psi = phase_space::wavefunction_on_grid(&evolved, &basis)?;
                let grid = phase_space::wigner_planar_pure(&psi, &basis, &wspec)?;
                ms.push(phase_space::nonclassicality(&grid)?);
            }
            cols.push(ms);
        }
        let mut header = vec!["t".to_string()];
        for k in 0..states.len() {
            header.push(format!("m_nc_{k}"));
        }
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let col_refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        out.write("nonclassicality.csv", &csv_of_columns(&header_refs, &col_refs))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MorseDecoherenceReport {
    lambda: f64,
    omega01_over_gamma01: f64,
    temperature: f64,
    active_levels: usize,
    solver: String,
    knee: Option<KneeReport>,
    energy_initial: f64,
    energy_at_knee: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn run_morse_decoherence(
    out: &mut OutputDir,
    morse_setup: &MorseSetup,
    temperature: f64,
    ratio: f64,
    active_levels: usize,
    initial_point: &Option<PhasePoint>,
    initial_eigenstate: &Option<usize>,
    times: &TimeGrid,
    solver: &str,
    wigner_snapshots: &[f64],
    wigner: &Option<PlanarSpec>,
    expectations: bool,
    rk_tolerance: Option<f64>,
) -> Result<()> {
    let basis = morse_setup.build()?;
    if active_levels > basis.n_basis() {
        return Err(Error::Config("active_levels exceeds basis size".into()));
    }
    let energies = basis.energies.slice(s![..active_levels]).to_owned();
    let xfull = morse::position_matrix(&basis);
    let xmat = xfull.slice(s![..active_levels, ..active_levels]).to_owned();
    let pf = basis.params.phase_factor();
    let lambda = calibrate_lambda(ratio, &energies, &xmat, pf)?;
    let bath = BathSpec::new(temperature, lambda)?;
    let gen_id = format!("{}:active{}", basis.id(), active_levels);
    let gen = build_anharmonic_generator(&energies, &xmat, &bath, pf, gen_id.clone())?;

    // initial density operator
    let coeffs: Array1<C64> = if let Some(point) = initial_point {
        let st = morse::coherent_state(*point, &basis)?;
        let c = st.coeffs.slice(s![..active_levels]).to_owned();
        let norm: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        if norm < 0.999 {
            return Err(Error::Config(format!(
                "initial state keeps only {norm:.4} of its weight in {active_levels} levels"
            )));
        }
        c / C64::new(norm.sqrt(), 0.0)
    } else {
        let n = initial_eigenstate.unwrap();
        if n >= active_levels {
            return Err(Error::Config("initial eigenstate outside active levels".into()));
        }
        let mut c = Array1::<C64>::zeros(active_levels);
        c[n] = C64::new(1.0, 0.0);
        c
    };
    let mut rho0m = Array2::<C64>::zeros((active_levels, active_levels));
    for i in 0..active_levels {
        for j in 0..active_levels {
            rho0m[[i, j]] = coeffs[i] * coeffs[j].conj();
        }
    }
    let rho0 = DensityOperator::new(gen_id.clone(), rho0m)?;

    let ts = times.values();
    let traj = match solver {
        "secular-closed-form" => {
            let prop = SecularPropagator::new(&gen)?;
            Trajectory {
                basis_id: gen_id.clone(),
                times: ts.clone(),
                states: ts.iter().map(|&t| prop.propagate(&rho0.matrix, t)).collect(),
            }
        }
        "full-rk" => {
            // propagate in the interaction picture (fast unitary phases are
            // exact) and rotate the snapshots back. The complete equation is
            // Redfield-class rather than GKSL, so transient eigenvalues of
            // order -γ/ω appear physically; widen the positivity floor
            // accordingly (it still catches generator-level bugs).
            let mut opts = IntegratorOpts::with_tol(rk_tolerance.unwrap_or(1e-8));
            opts.validation.eigenvalue_floor = -1e-3;
            let mut traj =
                integrate(&crate::lindblad::InteractionPicture(&gen), &rho0, &ts, &opts)?;
            for (k, t) in traj.times.iter().enumerate() {
                let back = gen.interaction_to_schrodinger(&traj.states[k], *t);
                traj.states[k] = back;
            }
            traj
        }
        other => return Err(Error::Config(format!("unknown solver `{other}`"))),
    };

    let entropy_floor = if solver == "full-rk" { 1e-3 } else { 1e-7 };
    let diag = metrics::diagnostics_with_floor(&traj, &energies, entropy_floor)?;
    out.write("diagnostics.csv", &diagnostics_csv(&diag))?;
    let knee = detect_knee_auto(&diag.times, &diag.entropy).ok();
    let energy_at_knee = knee.as_ref().map(|k| {
        let idx = diag.times.partition_point(|&t| t < k.t_d).min(diag.times.len() - 1);
        diag.energy[idx]
    });

    if expectations {
        let obs = Observables::build(&basis);
        let xa = obs.x.slice(s![..active_levels, ..active_levels]).to_owned();
        let pa = obs.p.slice(s![..active_levels, ..active_levels]).to_owned();
        let mut xs = Vec::with_capacity(ts.len());
        let mut ps = Vec::with_capacity(ts.len());
        for st in &traj.states {
            let mut ex = 0.0;
            let mut ep = C64::new(0.0, 0.0);
            for i in 0..active_levels {
                for jj in 0..active_levels {
                    ex += (st[[i, jj]] * xa[[jj, i]]).re;
                    ep += st[[i, jj]] * pa[[jj, i]];
                }
            }
            xs.push(ex);
            ps.push(ep.re);
        }
        out.write("expectations.csv", &csv_of_columns(&["t", "x", "p"], &[&ts, &xs, &ps]))?;
    }

    let wspec = wigner.unwrap_or_else(PlanarSpec::default_morse);
    for &t in wigner_snapshots {
        let rho_t = match solver {
            "secular-closed-form" => SecularPropagator::new(&gen)?.propagate(&rho0.matrix, t),
            _ => {
                let mut opts = IntegratorOpts::with_tol(rk_tolerance.unwrap_or(1e-8));
                opts.validation.eigenvalue_floor = -1e-3;
                let tilde = if t > 0.0 {
                    integrate(&crate::lindblad::InteractionPicture(&gen), &rho0, &[t], &opts)?
                        .states
                        .pop()
                        .unwrap()
                } else {
                    rho0.matrix.clone()
                };
                gen.interaction_to_schrodinger(&tilde, t)
            }
        };
        let rho_full = DensityOperator { basis_id: basis.id().to_string(), matrix: rho_t };
        let grid = phase_space::wigner_planar_mixed(&rho_full, &basis, &wspec)?;
        let hills = phase_space::find_hills(&grid, 0.3);
        out.write(&format!("wigner_t{t}.csv"), &wigner_csv(&grid))?;
        out.write_json(&format!("hills_t{t}.json"), &hills)?;
    }

    out.write_json(
        "report.json",
        &MorseDecoherenceReport {
            lambda,
            omega01_over_gamma01: ratio,
            temperature,
            active_levels,
            solver: solver.to_string(),
            knee,
            energy_initial: diag.energy[0],
            energy_at_knee,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct DickeCatReport {
    n_atoms: usize,
    n_bar: f64,
    /// Time of closest approach to the classical mixture.
    t_d_operational: Option<f64>,
    knee: Option<KneeReport>,
    t_diss: Option<f64>,
    t_diss_over_t_d: Option<f64>,
    min_distance_static: f64,
    t_at_min_distance_static: f64,
    distance_evolved_at_t_d: Option<f64>,
}

fn run_dicke_cat(
    out: &mut OutputDir,
    n_atoms: usize,
    n_bar: f64,
    label1: AnglePair,
    label2: AnglePair,
    times: &TimeGrid,
    knee_window: Option<f64>,
    track_references: bool,
    rk_tolerance: Option<f64>,
) -> Result<()> {
    let basis = SpinBasis::for_atoms(n_atoms)?;
    let gen = DickeGenerator::new(basis.j, 1.0, n_bar)?;
    let cat = spin::cat2(label1.label(), label2.label(), &basis)?;
    let rho0 = cat.projector();
    let ts = times.values();
    let eigen_every = if basis.dim() <= 128 { 1 } else { 16 };
    let opts = IntegratorOpts {
        eigen_check_every: eigen_every,
        ..IntegratorOpts::with_tol(rk_tolerance.unwrap_or(1e-8))
    };
    let traj = integrate(&gen, &rho0, &ts, &opts)?;
    let jz_diag = Array1::from_iter((0..basis.dim()).map(|i| basis.m(i)));
    let diag = metrics::diagnostics(&traj, &jz_diag)?;
    out.write("diagnostics.csv", &diagnostics_csv(&diag))?;

    // knee on the requested early window, resampled to a linear time grid
    let window_end = knee_window.unwrap_or(ts[ts.len() - 1]);
    let knee =
        metrics::detect_knee_resampled(&diag.times, &diag.linear_entropy, window_end, 400).ok();

    // distances to the static and evolved classical references
    let rho_cl = spin::classical_mixture(label1.label(), label2.label(), &basis)?;
    let mut d_static = Vec::with_capacity(ts.len());
    for st in &traj.states {
        d_static.push(hs_distance(&traj.state(0), &rho_cl).map(|_| ()).ok().map_or(0.0, |_| 0.0));
        let _ = st;
    }
    d_static.clear();
    for k in 0..traj.len() {
        d_static.push(hs_distance(&traj.state(k), &rho_cl)?);
    }
    let mut cols: Vec<&[f64]> = vec![&ts, &d_static];
    let mut header = vec!["t", "d_static"];
    let mut d_evolved = Vec::new();
    if track_references {
        let ref_traj = spin::evolved_classical_reference(label1.label(), label2.label(), &gen, &ts, &opts)?;
        for k in 0..traj.len() {
            d_evolved.push(hs_distance(&traj.state(k), &ref_traj.state(k))?);
        }
        cols.push(&d_evolved);
        header.push("d_evolved");
    }
    out.write("distances.csv", &csv_of_columns(&header, &cols))?;

    let (min_d, t_min) = d_static
        .iter()
        .zip(ts.iter())
        .fold((f64::INFINITY, 0.0), |acc, (&d, &t)| if d < acc.0 { (d, t) } else { acc });
    // The time of closest approach to the classical mixture is the
    // operational decoherence time ("D reaches its minimal value at the
    // decoherence time"); the dissipation fit runs in the decade after it.
    let t_d_operational = if min_d.is_finite() && t_min > 0.0 { Some(t_min) } else { None };
    let t_diss = t_d_operational.or(knee.as_ref().map(|k| k.t_d)).and_then(|td| {
        metrics::dissipation_time(
            &diag.times,
            &diag.energy,
            gen.stationary_jz(),
            (td, (20.0 * td).min(ts[ts.len() - 1])),
        )
        .ok()
    });
    let distance_evolved_at_t_d = knee.as_ref().and_then(|k| {
        if d_evolved.is_empty() {
            None
        } else {
            let idx = ts.partition_point(|&t| t < k.t_d).min(ts.len() - 1);
            Some(d_evolved[idx])
        }
    });
    out.write_json(
        "report.json",
        &DickeCatReport {
            n_atoms,
            n_bar,
            t_diss_over_t_d: match (t_d_operational, t_diss) {
                (Some(td), Some(tds)) => Some(tds / td),
                _ => None,
            },
            t_d_operational,
            knee,
            t_diss,
            min_distance_static: min_d,
            t_at_min_distance_static: t_min,
            distance_evolved_at_t_d,
        },
    )?;
    Ok(())
}

fn run_dicke_contour(
    out: &mut OutputDir,
    n_atoms: usize,
    n_bar: f64,
    beta_points: usize,
    times: &TimeGrid,
    rk_tolerance: Option<f64>,
) -> Result<()> {
    use rayon::prelude::*;
    let basis = SpinBasis::for_atoms(n_atoms)?;
    let gen = DickeGenerator::new(basis.j, 1.0, n_bar)?;
    let ts = times.values();
    let betas: Vec<f64> = (0..beta_points)
        .map(|i| 0.15 + (std::f64::consts::PI - 0.3) * i as f64 / (beta_points - 1) as f64)
        .collect();
    let opts = IntegratorOpts {
        eigen_check_every: 8,
        ..IntegratorOpts::with_tol(rk_tolerance.unwrap_or(1e-7))
    };
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for i in 0..beta_points {
        for k in 0..beta_points {
            cells.push((i, k));
        }
    }
    let rows: Vec<(f64, f64, f64)> = cells
        .par_iter()
        .map(|&(i, k)| {
            let b1 = betas[i];
            let b2 = betas[k];
            let t_d = (|| -> Result<f64> {
                let cat = spin::cat2(
                    CoherentLabel::from_angles(b1, 0.0),
                    CoherentLabel::from_angles(b2, 0.0),
                    &basis,
                )?;
                let traj = integrate(&gen, &cat.projector(), &ts, &opts)?;
                let jz = Array1::from_iter((0..basis.dim()).map(|m| basis.m(m)));
                let diag = metrics::diagnostics(&traj, &jz)?;
                Ok(detect_knee_auto(&diag.times, &diag.linear_entropy)?.t_d)
            })()
            .unwrap_or(f64::NAN);
            (b1, b2, t_d)
        })
        .collect();
    let mut text = String::from("beta1,beta2,t_d\n");
    for (b1, b2, td) in rows {
        text.push_str(&format!("{},{},{}\n", fmt(b1), fmt(b2), fmt(td)));
    }
    out.write("dectimes.csv", &text)?;
    Ok(())
}

#[derive(Serialize)]
struct Cat4Report {
    n_atoms: usize,
    n_bar: f64,
    /// per snapshot: time, then the six edge contrasts in the order
    /// z-edge(1-2), y-edge(3-4), then the four mixed edges.
    edge_contrasts: Vec<(f64, Vec<f64>)>,
    lobe_counts: Vec<(f64, usize)>,
}

fn run_cat4(
    out: &mut OutputDir,
    n_atoms: usize,
    n_bar: f64,
    snapshot_times: &[f64],
    spherical: &Option<SphericalSpec>,
    rk_tolerance: Option<f64>,
) -> Result<()> {
    let basis = SpinBasis::for_atoms(n_atoms)?;
    let gen = DickeGenerator::new(basis.j, 1.0, n_bar)?;
    let labels = spin::tetrahedron_labels();
    let cat = spin::cat4(&labels, &basis)?;
    let spec = spherical.unwrap_or_else(|| SphericalSpec::exact_for(basis.j));
    let mut ts: Vec<f64> = snapshot_times.to_vec();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let opts = IntegratorOpts::with_tol(rk_tolerance.unwrap_or(1e-9));
    let traj = integrate(&gen, &cat.projector(), &ts, &opts)?;
    let dirs: Vec<[f64; 3]> = labels
        .iter()
        .map(|&l| {
            let (t, p) = spin::label_direction(l);
            phase_space::unit_vector(t, p)
        })
        .collect();
    let edges = [(0usize, 1usize), (2, 3), (0, 2), (0, 3), (1, 2), (1, 3)];
    let mut edge_contrasts = Vec::new();
    let mut lobe_counts = Vec::new();
    for (k, &t) in ts.iter().enumerate() {
        let rho = traj.state(k);
        let w = phase_space::SphericalWigner::new(&rho, basis.j)?;
        let grid = w.to_grid(&spec);
        out.write(&format!("wigner_t{t}.csv"), &wigner_csv(&grid))?;
        let contrasts: Vec<f64> = edges
            .iter()
            .map(|&(a, b)| phase_space::fringe_contrast_along_arc(&w, dirs[a], dirs[b], 200))
            .collect();
        let hills = phase_space::find_hills(&grid, 0.45);
        edge_contrasts.push((t, contrasts));
        lobe_counts.push((t, hills.len()));
    }
    out.write_json("report.json", &Cat4Report { n_atoms, n_bar, edge_contrasts, lobe_counts })?;
    Ok(())
}

#[derive(Serialize)]
struct SubradiantRow {
    n_atoms: usize,
    t_m_pert: f64,
    t_m_exact: f64,
    min_distance: f64,
    fidelity_post_kick: f64,
    leaked_norm: f64,
    t_m_exact_us: Option<f64>,
}

fn run_subradiant(
    out: &mut OutputDir,
    n_atoms_list: &[usize],
    delta_over_g: f64,
    photon_index: usize,
    n_max: usize,
    field_distribution: &[(usize, f64)],
    physical_units: bool,
) -> Result<()> {
    let mut rows = Vec::new();
    for &n in n_atoms_list {
        let sys = cavity::build_system(n, delta_over_g, n_max)?;
        let st0 = cavity::initial_state(&sys, photon_index)?;
        let pert = cavity::perturbative_prediction(n, delta_over_g)?;
        let q = photon_index + 1;
        let r = cavity::find_tm_exact(&sys, &st0, q, (0.0, 2.0 * pert.t_m))?;
        let at_tm = cavity::evolve_exact(&sys, &st0, r.t_refined);
        let kicked = cavity::phase_kick(&sys, &at_tm, r.phi);
        let fidelity = kicked.amp_subradiant(q).norm_sqr();
        // g/2π = 24 kHz ⇒ 1/g = 1/(2π·24e3) s ≈ 6.63 µs
        let t_us = physical_units.then(|| r.t_m / (2.0 * std::f64::consts::PI * 24.0e3) * 1e6);
        rows.push(SubradiantRow {
            n_atoms: n,
            t_m_pert: pert.t_m,
            t_m_exact: r.t_m,
            min_distance: r.min_distance,
            fidelity_post_kick: fidelity,
            leaked_norm: kicked.leaked_norm,
            t_m_exact_us: t_us,
        });
    }
    let mut text = String::from(
        "n_atoms,t_m_pert,t_m_exact,min_distance,fidelity_post_kick,leaked_norm\n",
    );
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_atoms,
            fmt(r.t_m_pert),
            fmt(r.t_m_exact),
            fmt(r.min_distance),
            fmt(r.fidelity_post_kick),
            fmt(r.leaked_norm)
        ));
    }
    out.write("sweep.csv", &text)?;
    out.write_json("report.json", &rows)?;

    if !field_distribution.is_empty() {
        let n = n_atoms_list[n_atoms_list.len() / 2];
        let sys = cavity::build_system(n, delta_over_g, n_max)?;
        let rep = cavity::field_independence_test(&sys, field_distribution)?;
        out.write_json("field_independence.json", &rep)?;
    }
    Ok(())
}

fn run_toy_dephasing(
    out: &mut OutputDir,
    coefficients: &[[f64; 2]],
    gamma: f64,
    times: &TimeGrid,
) -> Result<()> {
    let mut c = Array1::<C64>::zeros(coefficients.len());
    for (i, &[re, im]) in coefficients.iter().enumerate() {
        c[i] = C64::new(re, im);
    }
    let norm: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    c.mapv_inplace(|v| v / norm);
    let schedule = move |i: usize, j: usize, t: f64| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new((-gamma * t).exp(), 0.0)
        }
    };
    let ts = times.values();
    let trajs = metrics::toy_dephasing(&c, "toy", schedule, &ts)?;
    let target = metrics::pointer_mixture(&StateVector { basis_id: "toy".into(), coeffs: c.clone() });
    let mut coh = Vec::with_capacity(ts.len());
    let mut dist = Vec::with_capacity(ts.len());
    for rho in &trajs {
        let mut off = 0.0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                if i != j {
                    off += rho.matrix[[i, j]].norm_sqr();
                }
            }
        }
        coh.push(off.sqrt());
        dist.push(hs_distance(rho, &target)?);
    }
    out.write(
        "dephasing.csv",
        &csv_of_columns(&["t", "offdiag_norm", "distance_to_pointer_mixture"], &[&ts, &coh, &dist]),
    )?;
    Ok(())
}

/// Runs a validated config; returns the manifest.
pub fn run_config(config: &ExperimentConfig, output_root: Option<&Path>) -> Result<Manifest> {
    config.validate()?;
    let dir = match output_root {
        Some(root) => root.join(&config.output_dir),
        None => PathBuf::from(&config.output_dir),
    };
    let mut out = OutputDir::create(&dir)?;
    match &config.experiment {
        Experiment::MorseFree(p) => run_morse_free(
            &mut out,
            &p.morse,
            &p.initial_points,
            &p.times,
            &p.wigner_snapshots,
            &p.wigner,
            p.bohr_spectrum,
            p.nonclassicality,
            p.survival,
        )?,
        Experiment::MorseDecoherence(p) => run_morse_decoherence(
            &mut out,
            &p.morse,
            p.temperature,
            p.omega01_over_gamma01,
            p.active_levels,
            &p.initial_point,
            &p.initial_eigenstate,
            &p.times,
            &p.solver,
            &p.wigner_snapshots,
            &p.wigner,
            p.expectations,
            p.rk_tolerance,
        )?,
        Experiment::DickeCat(p) => run_dicke_cat(
            &mut out,
            p.n_atoms,
            p.n_bar,
            p.label1,
            p.label2,
            &p.times,
            p.knee_window,
            p.track_classical_references,
            p.rk_tolerance,
        )?,
        Experiment::DickeContour(p) => {
            run_dicke_contour(&mut out, p.n_atoms, p.n_bar, p.beta_points, &p.times, p.rk_tolerance)?
        }
        Experiment::Cat4Wigner(p) => {
            run_cat4(&mut out, p.n_atoms, p.n_bar, &p.snapshot_times, &p.spherical, p.rk_tolerance)?
        }
        Experiment::SubradiantPrep(p) => run_subradiant(
            &mut out,
            &p.n_atoms_list,
            p.delta_over_g,
            p.photon_index,
            p.n_max,
            &p.field_distribution,
            p.physical_units,
        )?,
        Experiment::ToyDephasing(p) => {
            run_toy_dephasing(&mut out, &p.coefficients, p.gamma, &p.times)?
        }
    }
    out.finish(config)
}

// ------------------------------------------------------------------
// Preset catalog.
// ------------------------------------------------------------------

pub struct Preset {
    pub name: &'static str,
    pub figure: &'static str,
    pub description: &'static str,
    pub budget: &'static str,
    pub config: fn() -> ExperimentConfig,
}

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "fig-xexp",
            figure: "position-expectation collapse and revival",
            description: "⟨X⟩(t) for x0 ∈ {1.0, 0.5, 0.06} under closed Morse evolution",
            budget: "≤ 5 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-xexp".into(),
                experiment: Experiment::MorseFree(MorseFreeParams {
                    morse: MorseSetup::no_molecule(),
                    initial_points: vec![
                        PhasePoint::new(1.0, 0.0),
                        PhasePoint::new(0.5, 0.0),
                        PhasePoint::new(0.06, 0.0),
                    ],
                    times: TimeGrid::linear("t0", 0.0, 70.0, 1401),
                    wigner_snapshots: vec![],
                    wigner: None,
                    bohr_spectrum: true,
                    nonclassicality: false,
                    survival: true,
                }),
            },
        },
        Preset {
            name: "fig-wigs",
            figure: "Wigner view of cat formation at t/t0 = 0 and 30",
            description: "planar Wigner snapshots of the (0.5, 0) wave packet",
            budget: "≤ 2 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-wigs".into(),
                experiment: Experiment::MorseFree(MorseFreeParams {
                    morse: MorseSetup::no_molecule(),
                    initial_points: vec![PhasePoint::new(0.5, 0.0)],
                    times: TimeGrid::linear("t0", 0.0, 30.0, 2),
                    wigner_snapshots: vec![0.0, 30.0],
                    wigner: None,
                    bohr_spectrum: false,
                    nonclassicality: false,
                    survival: false,
                }),
            },
        },
        Preset {
            name: "fig-noncl",
            figure: "nonclassicality during cat formation",
            description: "M_nc(t) for x0 ∈ {1.0, 0.5, 0.06}",
            budget: "≤ 10 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-noncl".into(),
                experiment: Experiment::MorseFree(MorseFreeParams {
                    morse: MorseSetup::no_molecule(),
                    initial_points: vec![
                        PhasePoint::new(1.0, 0.0),
                        PhasePoint::new(0.5, 0.0),
                        PhasePoint::new(0.06, 0.0),
                    ],
                    times: TimeGrid::linear("t0", 0.0, 40.0, 81),
                    wigner_snapshots: vec![],
                    wigner: None,
                    bohr_spectrum: false,
                    nonclassicality: true,
                    survival: false,
                }),
            },
        },
        Preset {
            name: "fig-portrait",
            figure: "phase portrait with damped revivals",
            description: "⟨X⟩,⟨P⟩ of (0.5, 0) at λ1, T = 5 ħω01/k",
            budget: "≤ 2 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-portrait".into(),
                experiment: Experiment::MorseDecoherence(MorseDecoherenceParams {
                    morse: MorseSetup::no_molecule(),
                    temperature: 5.0,
                    omega01_over_gamma01: 1e5,
                    active_levels: 60,
                    initial_point: Some(PhasePoint::new(0.5, 0.0)),
                    initial_eigenstate: None,
                    times: TimeGrid::linear("t0", 0.0, 120.0, 2401),
                    solver: default_solver(),
                    wigner_snapshots: vec![],
                    wigner: None,
                    expectations: true,
                    rk_tolerance: None,
                }),
            },
        },
        Preset {
            name: "fig-dtdef",
            figure: "decoherence-time definition from entropy/purity",
            description: "S(t), Tr ρ² of (2.0, 0) at λ1, T = 10 ħω01/k",
            budget: "≤ 2 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-dtdef".into(),
                experiment: Experiment::MorseDecoherence(MorseDecoherenceParams {
                    morse: MorseSetup::no_molecule(),
                    temperature: 10.0,
                    omega01_over_gamma01: 1e5,
                    active_levels: 70,
                    initial_point: Some(PhasePoint::new(2.0, 0.0)),
                    initial_eigenstate: None,
                    times: TimeGrid::linear("t0", 0.0, 100.0, 2001),
                    solver: default_solver(),
                    wigner_snapshots: vec![],
                    wigner: None,
                    expectations: false,
                    rk_tolerance: None,
                }),
            },
        },
        Preset {
            name: "fig-wig1",
            figure: "Wigner snapshots of decohering (0.5, 0) cat at λ2, T = 0.3",
            description: "mixed-state Wigner at t/t0 ∈ {0, 27.5, 137.5}",
            budget: "≤ 5 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-wig1".into(),
                experiment: Experiment::MorseDecoherence(MorseDecoherenceParams {
                    morse: MorseSetup::no_molecule(),
                    temperature: 0.3,
                    omega01_over_gamma01: 4e3,
                    active_levels: 60,
                    initial_point: Some(PhasePoint::new(0.5, 0.0)),
                    initial_eigenstate: None,
                    times: TimeGrid::linear("t0", 0.0, 140.0, 1401),
                    solver: default_solver(),
                    wigner_snapshots: vec![0.0, 27.5, 137.5],
                    wigner: None,
                    expectations: false,
                    rk_tolerance: None,
                }),
            },
        },
        Preset {
            name: "fig-wig2",
            figure: "Wigner route of the fifth eigenstate to the phase-averaged mixture",
            description: "eigenstate n = 5 at λ1, T = 10; snapshots t/t0 ∈ {0, 27.5, 330, 1000}",
            budget: "≤ 5 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-wig2".into(),
                experiment: Experiment::MorseDecoherence(MorseDecoherenceParams {
                    morse: MorseSetup::no_molecule(),
                    temperature: 10.0,
                    omega01_over_gamma01: 1e5,
                    active_levels: 70,
                    initial_point: None,
                    initial_eigenstate: Some(5),
                    times: TimeGrid::linear("t0", 0.0, 1000.0, 2001),
                    solver: default_solver(),
                    wigner_snapshots: vec![0.0, 27.5, 330.0, 1000.0],
                    wigner: None,
                    expectations: false,
                    rk_tolerance: None,
                }),
            },
        },
        Preset {
            name: "fig-dectime-law",
            figure: "exponential decoherence-time law t_d(x0)",
            description: "t_d for x0 ∈ {0.5, 1.0, 1.5, 2.0} at λ1, T = 10",
            budget: "≤ 2 h",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-dectime-law".into(),
                experiment: Experiment::MorseDecoherence(MorseDecoherenceParams {
                    morse: MorseSetup::no_molecule(),
                    temperature: 10.0,
                    omega01_over_gamma01: 1e5,
                    active_levels: 70,
                    initial_point: Some(PhasePoint::new(0.5, 0.0)),
                    initial_eigenstate: None,
                    times: TimeGrid::linear("t0", 0.0, 160.0, 3201),
                    solver: default_solver(),
                    wigner_snapshots: vec![],
                    wigner: None,
                    expectations: false,
                    rk_tolerance: None,
                }),
            },
        },
        Preset {
            name: "fig-scales",
            figure: "two regimes of the N = 500 cat evolution",
            description: "S_lin and energy of the (τ1 = tan π/4, τ2 = 0) cat, N = 500, n̄ = 1",
            budget: "≤ 30 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-scales".into(),
                experiment: Experiment::DickeCat(DickeCatParams {
                    n_atoms: 500,
                    n_bar: 1.0,
                    label1: AnglePair { beta: std::f64::consts::FRAC_PI_2, phi: 0.0 },
                    label2: AnglePair { beta: 0.0, phi: 0.0 },
                    times: TimeGrid::logarithmic("inv_gamma", 2e-6, 0.02, 401),
                    knee_window: Some(5e-4),
                    track_classical_references: false,
                    rk_tolerance: Some(1e-8),
                }),
            },
        },
        Preset {
            name: "fig-fastdec",
            figure: "distance to the classical mixture of a rapid cat",
            description: "D(ρ(t), ρ_cl) for the N = 500, n̄ = 1 cat",
            budget: "≤ 30 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-fastdec".into(),
                experiment: Experiment::DickeCat(DickeCatParams {
                    n_atoms: 500,
                    n_bar: 1.0,
                    label1: AnglePair { beta: std::f64::consts::FRAC_PI_2, phi: 0.0 },
                    label2: AnglePair { beta: 0.0, phi: 0.0 },
                    times: TimeGrid::logarithmic("inv_gamma", 1e-6, 3e-4, 301),
                    knee_window: Some(3e-4),
                    track_classical_references: true,
                    rk_tolerance: Some(1e-8),
                }),
            },
        },
        Preset {
            name: "fig-dectimes",
            figure: "decoherence-time contour over (β1, β2)",
            description: "t_d map at N = 50, n̄ = 3, φ1 = φ2 = 0",
            budget: "≤ 20 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-dectimes".into(),
                experiment: Experiment::DickeContour(DickeContourParams {
                    n_atoms: 50,
                    n_bar: 3.0,
                    beta_points: 11,
                    times: TimeGrid::linear("inv_gamma", 0.0, 0.4, 801),
                    rk_tolerance: Some(1e-7),
                }),
            },
        },
        Preset {
            name: "fig-wigfig",
            figure: "spherical Wigner view of the four-component cat",
            description: "tetrahedron cat, N = 50: snapshots t ∈ {0, 0.015, 0.04}/γ",
            budget: "≤ 10 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-wigfig".into(),
                experiment: Experiment::Cat4Wigner(Cat4WignerParams {
                    n_atoms: 50,
                    n_bar: 3.0,
                    snapshot_times: vec![0.0, 0.015, 0.04],
                    spherical: None,
                    rk_tolerance: Some(1e-9),
                }),
            },
        },
        Preset {
            name: "fig-tmodfig",
            figure: "exact vs perturbative kick times",
            description: "subradiant preparation sweep N = 2..20 at Δ/g = 30",
            budget: "≤ 5 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/fig-tmodfig".into(),
                experiment: Experiment::SubradiantPrep(SubradiantPrepParams {
                    n_atoms_list: (2..=20).collect(),
                    delta_over_g: 30.0,
                    photon_index: 0,
                    n_max: 4,
                    field_distribution: vec![(0, 0.4), (1, 0.35), (2, 0.25)],
                    physical_units: true,
                }),
            },
        },
        Preset {
            name: "toy-dephasing",
            figure: "pointer-basis dephasing demonstrator",
            description: "coherence decay to the pointer mixture under f_nm = e^{-Γt}",
            budget: "≤ 1 min",
            config: || ExperimentConfig {
                schema_version: SCHEMA_VERSION,
                output_dir: "out/toy-dephasing".into(),
                experiment: Experiment::ToyDephasing(ToyDephasingParams {
                    coefficients: vec![[0.6, 0.0], [0.0, 0.5], [0.4, 0.2], [0.3, -0.3]],
                    gamma: 2.0,
                    times: TimeGrid::linear("inv_gamma", 0.0, 4.0, 101),
                }),
            },
        },
    ]
}

pub fn find_preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

// ------------------------------------------------------------------
// CLI entry.
// ------------------------------------------------------------------

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "declab", about = "Open-quantum-system numerical laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a named preset.
    Run {
        /// Path to a JSON experiment config.
        config: Option<PathBuf>,
        /// Run a named preset instead of a config file.
        #[arg(long)]
        preset: Option<String>,
        /// Root directory prefixed to the config's output_dir
        /// (overrides DECLAB_OUTPUT_ROOT).
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Validate a config file without running it.
    Validate { config: PathBuf },
    /// List the figure-reproduction presets.
    ListPresets,
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_str(&text)
}

pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        match cli.command {
            Command::Run { config, preset, output_root } => {
                let cfg = match (&config, &preset) {
                    (Some(path), None) => load_config(path)?,
                    (None, Some(name)) => {
                        let p = find_preset(name).ok_or_else(|| {
                            Error::Config(format!("unknown preset `{name}`; see list-presets"))
                        })?;
                        (p.config)()
                    }
                    _ => {
                        return Err(Error::Config(
                            "provide exactly one of CONFIG path or --preset NAME".into(),
                        ))
                    }
                };
                let root_env = std::env::var("DECLAB_OUTPUT_ROOT").ok().map(PathBuf::from);
                let root = output_root.or(root_env);
                let manifest = run_config(&cfg, root.as_deref())?;
                println!("wrote {} files into {}", manifest.files.len(), cfg.output_dir);
                Ok(())
            }
            Command::Validate { config } => {
                load_config(&config)?;
                println!("config ok");
                Ok(())
            }
            Command::ListPresets => {
                let mut stdout = std::io::stdout().lock();
                for p in presets() {
                    let _ = writeln!(
                        stdout,
                        "{:<16} [{}] {} ({})",
                        p.name, p.budget, p.description, p.figure
                    );
                }
                Ok(())
            }
        }
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
