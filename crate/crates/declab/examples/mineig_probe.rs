use declab::lindblad::*;
use declab::integrate::{integrate, IntegratorOpts};
use declab::morse::{self, PhasePoint};
use declab::types::DensityOperator;
use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use ndarray_linalg::{Eigh, UPLO};

fn main() {
    let params = morse::MorseParams::no_molecule();
    let basis = morse::build_basis(&params, &morse::GridSpec::default_for_morse(), 300).unwrap();
    let nl = 70;
    let energies = basis.energies.slice(s![..nl]).to_owned();
    let xfull = morse::position_matrix(&basis);
    let xmat = xfull.slice(s![..nl, ..nl]).to_owned();
    let pf = params.phase_factor();
    let lambda = calibrate_lambda(1e5, &energies, &xmat, pf).unwrap();
    let bath = BathSpec::new(10.0, lambda).unwrap();
    let gen = build_anharmonic_generator(&energies, &xmat, &bath, pf, "probe").unwrap();
    let st = morse::coherent_state(PhasePoint::new(2.0, 0.0), &basis).unwrap();
    let c = st.coeffs.slice(s![..nl]).to_owned();
    let norm: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    let mut rho0m = Array2::<C64>::zeros((nl, nl));
    for i in 0..nl { for j in 0..nl { rho0m[[i,j]] = c[i]*c[j].conj()/norm; } }
    let rho0 = DensityOperator::new("probe", rho0m).unwrap();
    let ts: Vec<f64> = (1..=30).map(|k| k as f64 * 2.0).collect();
    let mut opts = IntegratorOpts::with_tol(1e-8);
    opts.validation.eigenvalue_floor = -1.0; // disabled for the probe
    opts.eigen_check_every = 0;
    let traj = integrate(&InteractionPicture(&gen), &rho0, &ts, &opts).unwrap();
    for (k, &t) in ts.iter().enumerate() {
        let rho = gen.interaction_to_schrodinger(&traj.states[k], t);
        let (vals, _) = rho.eigh(UPLO::Lower).unwrap();
        let purity: f64 = rho.iter().map(|c| c.norm_sqr()).sum();
        println!("t={t:6.1}  min_eig={:+.3e}  S_lin={:.4}", vals[0], 1.0 - purity);
    }
}
