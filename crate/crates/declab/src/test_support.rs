//! Shared fixtures for unit tests. Building the NO basis diagonalizes a
//! 2048×2048 matrix, so it is done once per test binary.

use once_cell::sync::Lazy;

use crate::morse::{build_basis, GridSpec, MorseBasis, MorseParams};

static NO_BASIS: Lazy<MorseBasis> = Lazy::new(|| {
    let params = MorseParams::no_molecule();
    build_basis(&params, &GridSpec::default_for_morse(), crate::morse::DEFAULT_N_BASIS)
        .expect("NO basis")
});

static SMALL_BASIS: Lazy<MorseBasis> = Lazy::new(|| {
    let params = MorseParams::new(1.5, "toy").unwrap();
    build_basis(&params, &GridSpec::new(-3.0, 40.0, 1024).unwrap(), 12).expect("small basis")
});

pub fn no_basis() -> &'static MorseBasis {
    &NO_BASIS
}

pub fn small_basis() -> &'static MorseBasis {
    &SMALL_BASIS
}

/// Deterministic xorshift generator for test matrices.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [-1, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn complex(&mut self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.uniform(), self.uniform())
    }

    /// Random density operator: normalized A A† for random A.
    pub fn density(&mut self, dim: usize) -> ndarray::Array2<num_complex::Complex64> {
        use num_complex::Complex64 as C64;
        let a = ndarray::Array2::from_shape_fn((dim, dim), |_| self.complex());
        let mut rho = ndarray::Array2::<C64>::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..dim {
                    acc += a[[i, k]] * a[[j, k]].conj();
                }
                rho[[i, j]] = acc;
            }
        }
        let tr: C64 = rho.diag().iter().sum();
        rho.mapv_inplace(|c| c / tr.re);
        rho
    }

    /// Random normalized state vector.
    pub fn state(&mut self, dim: usize) -> ndarray::Array1<num_complex::Complex64> {
        let mut v = ndarray::Array1::from_shape_fn(dim, |_| self.complex());
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|c| c / norm);
        v
    }
}
