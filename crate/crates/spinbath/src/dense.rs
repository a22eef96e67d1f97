//! Dense-matrix form of the Hamiltonian for small systems, plus an exact
//! step propagator via full diagonalization.
//!
//! This is the reference path ("oracle") the fast Trotter engine is validated
//! against; it scales as 4ⁿ in memory and is capped accordingly. Basis
//! convention everywhere: site index k of the system is bit k, bit value 1
//! means spin-up, and operators use spin-½ matrices (S_z eigenvalues ±½).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{LabHamiltonian, RotorPhase};
use crate::linalg;

/// Largest spin count for which a dense 2ⁿ×2ⁿ matrix is built (128 MiB).
pub const DENSE_SPIN_CAP: usize = 12;

#[inline]
fn sz(index: usize, bit: usize) -> f64 {
    if index >> bit & 1 == 1 { 0.5 } else { -0.5 }
}

/// Real-symmetric matrix of the term list at one rotor phase, column-major
/// over the full 2ⁿ product basis.
pub fn dense_matrix(h: &LabHamiltonian, n: usize, ph: &RotorPhase) -> Result<Vec<f64>> {
    if n > DENSE_SPIN_CAP {
        return Err(Error::ResourceCap(format!(
            "dense matrix requested for {n} spins; cap is {DENSE_SPIN_CAP}"
        )));
    }
    let dim = 1usize << n;
    let mut m = vec![0.0f64; dim * dim];

    let zs: Vec<(usize, f64)> = h.z_terms.iter().map(|z| (z.site, z.shift(ph))).collect();
    let likes: Vec<(usize, usize, f64)> = h
        .like_pairs
        .iter()
        .map(|p| (p.site_i, p.site_j, p.coupling(ph)))
        .collect();
    let unlikes: Vec<(usize, usize, f64)> = h
        .unlike_pairs
        .iter()
        .map(|p| (p.site_i, p.site_j, p.coupling(ph)))
        .collect();

    for s in 0..dim {
        let mut diag = 0.0;
        for &(site, w) in &zs {
            diag += w * sz(s, site);
        }
        for &(i, j, a) in &likes {
            diag += -2.0 * a * sz(s, i) * sz(s, j);
        }
        for &(i, j, a) in &unlikes {
            diag += -2.0 * a * sz(s, i) * sz(s, j);
        }
        m[s * dim + s] = diag;

        // Flip-flop part of like pairs: ⟨…↑↓…|S⁺S⁻|…↓↑…⟩/2 = A/2.
        for &(i, j, a) in &likes {
            let (bi, bj) = (s >> i & 1, s >> j & 1);
            if bi != bj {
                let r = s ^ (1 << i) ^ (1 << j);
                if r > s {
                    m[s * dim + r] += 0.5 * a;
                    m[r * dim + s] += 0.5 * a;
                }
            }
        }
    }
    Ok(m)
}

/// Exact evolution over one step: ψ ← V·e^{−iΛ·dt}·Vᵀ·ψ from a full
/// eigen-decomposition of the (real-symmetric) Hamiltonian matrix.
pub struct ExactPropagator {
    dim: usize,
    eigenvalues: Vec<f64>,
    /// Column-major orthonormal eigenvectors.
    vectors: Vec<f64>,
}

impl ExactPropagator {
    pub fn new(mut matrix: Vec<f64>, dim: usize) -> Result<Self> {
        let eigenvalues = linalg::sym_eigen(&mut matrix, dim)?;
        Ok(ExactPropagator { dim, eigenvalues, vectors: matrix })
    }

    pub fn step(&self, psi: &mut [Complex64], dt: f64) {
        assert_eq!(psi.len(), self.dim);
        let d = self.dim;
        // y = Vᵀ ψ
        let mut y = vec![Complex64::ZERO; d];
        for (k, yk) in y.iter_mut().enumerate() {
            let col = &self.vectors[k * d..(k + 1) * d];
            let mut acc = Complex64::ZERO;
            for (v, p) in col.iter().zip(psi.iter()) {
                acc += p * v;
            }
            *yk = acc;
        }
        // phases
        for (yk, &e) in y.iter_mut().zip(&self.eigenvalues) {
            let (s, c) = (-e * dt).sin_cos();
            *yk *= Complex64::new(c, s);
        }
        // ψ = V y
        for p in psi.iter_mut() {
            *p = Complex64::ZERO;
        }
        for (k, yk) in y.iter().enumerate() {
            let col = &self.vectors[k * d..(k + 1) * d];
            for (p, v) in psi.iter_mut().zip(col.iter()) {
                *p += yk * v;
            }
        }
    }
}
