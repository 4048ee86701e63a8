use declab::morse;
use declab::phase_space::*;
use declab::types::StateVector;
use ndarray::prelude::*;
use num_complex::Complex64 as C64;

fn main() {
    let params = morse::MorseParams::no_molecule();
    let basis = morse::build_basis(&params, &morse::GridSpec::default_for_morse(), 300).unwrap();
    let mut c = Array1::<C64>::zeros(basis.n_basis());
    c[0] = C64::new(1.0, 0.0);
    let st = StateVector::new(basis.id(), c).unwrap();
    let psi = wavefunction_on_grid(&st, &basis).unwrap();
    let spec = PlanarSpec { x_min: -0.6, x_max: 0.7, p_min: -25.0, p_max: 25.0, nx: 128, np: 128 };
    let w = wigner_planar_pure(&psi, &basis, &spec).unwrap();
    println!("total = {}", w.total());
    for h in find_hills(&w, 0.3) {
        println!("hill at x={:.4} p={:.3} h={:.5}", h.a1, h.a2, h.height);
    }
    // slice along p at x ~ 0.01
    let i = w.axis1.iter().position(|&x| (x - 0.013).abs() < 0.01).unwrap();
    for jp in (0..128).step_by(8) {
        println!("p={:+.2}: W={:+.5e}", w.axis2[jp], w.values[[i, jp]]);
    }
}
