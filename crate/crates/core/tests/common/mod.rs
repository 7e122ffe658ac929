//! Random generators and brute-force oracles shared by integration tests.
//! Oracles here deliberately avoid the library's own linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uda_core::linalg::{CMatrix, DensityMatrix, HermitianOperator};
use uda_core::pauli::{symplectic_rank, PauliString};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(d: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> HermitianOperator {
    let a = random_matrix(1 << n, rng);
    HermitianOperator::new(n, (&a + a.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

pub fn random_traceless(n: usize, rng: &mut impl Rng) -> HermitianOperator {
    let h = random_hermitian(n, rng);
    let d = (1usize << n) as f64;
    h.axpy(-h.trace() / d, &HermitianOperator::identity(n)).unwrap()
}

/// `G G^† / Tr` with `G` of `rank` columns.
pub fn random_density(n: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    let d = 1 << n;
    let g = CMatrix::from_fn(d, rank, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    DensityMatrix::new(HermitianOperator::new(n, m * C64::new(1.0 / tr, 0.0)).unwrap()).unwrap()
}

/// `cos a I - i sin a (n . sigma)` for a random axis and angle.
pub fn random_qubit_unitary(rng: &mut impl Rng, max_angle: f64) -> CMatrix {
    let a = rng.random_range(-max_angle..max_angle);
    let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-12);
    let (x, y, z) = (v[0] / norm, v[1] / norm, v[2] / norm);
    let (c, s) = (a.cos(), a.sin());
    let i = C64::new(0.0, 1.0);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0) - i * s * z,
            -i * s * C64::new(x, -y),
            -i * s * C64::new(x, y),
            C64::new(c, 0.0) + i * s * z,
        ],
    )
}

pub fn kron_all(ms: &[CMatrix]) -> CMatrix {
    ms.iter().skip(1).fold(ms[0].clone(), |acc, m| acc.kronecker(m))
}

/// `U_0 ⊗ ... ⊗ U_{n-1}` applied by conjugation.
pub fn rotate_locally(rho: &DensityMatrix, rng: &mut impl Rng, max_angle: f64) -> DensityMatrix {
    let n = rho.n_qubits();
    let us: Vec<CMatrix> = (0..n).map(|_| random_qubit_unitary(rng, max_angle)).collect();
    let u = kron_all(&us);
    let m = &u * rho.op().matrix() * u.adjoint();
    DensityMatrix::new(HermitianOperator::new(n, m).unwrap()).unwrap()
}

/// Greedy random commuting independent Paulis with random signs.
pub fn random_stabilizer_group(n: usize, rng: &mut impl Rng) -> Vec<PauliString> {
    let mut gens: Vec<PauliString> = vec![];
    while gens.len() < n {
        let idx = rng.random_range(1..1usize << (2 * n));
        let sign = if rng.random_bool(0.5) { 1 } else { -1 };
        let p = PauliString::from_index(n, idx).with_sign(sign);
        if gens.iter().all(|g| g.commutes_with(&p)) {
            let mut trial = gens.clone();
            trial.push(p);
            if symplectic_rank(&trial) == trial.len() {
                gens = trial;
            }
        }
    }
    gens
}

/// Reduced operator on `keep` by explicit index summation.
pub fn partial_trace_oracle(m: &CMatrix, n: usize, keep: &[usize]) -> CMatrix {
    let k = keep.len();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let mut out = CMatrix::zeros(1 << k, 1 << k);
    for a in 0..1usize << n {
        for b in 0..1usize << n {
            if traced.iter().any(|&q| bit(a, q) != bit(b, q)) {
                continue;
            }
            let ra = keep.iter().fold(0, |acc, &q| (acc << 1) | bit(a, q));
            let rb = keep.iter().fold(0, |acc, &q| (acc << 1) | bit(b, q));
            out[(ra, rb)] += m[(a, b)];
        }
    }
    out
}

/// `sum_{i<j} P^-_{ij} + (sum_i Z_i - (n - 2k))^2 / 4`, element by element.
pub fn dicke_hamiltonian_oracle(n: usize, k: usize) -> CMatrix {
    let d = 1usize << n;
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let mut h = CMatrix::zeros(d, d);
    for a in 0..d {
        let zsum: f64 = (0..n).map(|q| if bit(a, q) == 0 { 1.0 } else { -1.0 }).sum();
        let shift = zsum - (n as f64 - 2.0 * k as f64);
        h[(a, a)] += C64::new(shift * shift / 4.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if bit(a, i) != bit(a, j) {
                    // singlet projector on {|01>, |10>}: 1/2 diagonal, -1/2 swap
                    let swapped = a ^ (1 << (n - 1 - i)) ^ (1 << (n - 1 - j));
                    h[(a, a)] += C64::new(0.5, 0.0);
                    h[(a, swapped)] += C64::new(-0.5, 0.0);
                }
            }
        }
    }
    h
}

/// `|0...0><0...0| + |1...1><1...1|` over two.
pub fn ghz_classical_mixture(n: usize) -> DensityMatrix {
    let d = 1usize << n;
    let mut diag = vec![0.0; d];
    diag[0] = 0.5;
    diag[d - 1] = 0.5;
    DensityMatrix::new(HermitianOperator::diagonal(n, &diag).unwrap()).unwrap()
}

/// Product state `|b_0 ... b_{n-1}>`.
pub fn basis_state(bits: &[u8]) -> DensityMatrix {
    let n = bits.len();
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    let mut v = DVector::zeros(1 << n);
    v[idx] = C64::new(1.0, 0.0);
    DensityMatrix::pure(n, &v).unwrap()
}

/// Eigenvalues via the real symmetric embedding `[[Re, -Im], [Im, Re]]`,
/// each appearing twice.
pub fn eigenvalues_oracle(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let emb = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = m[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut v: Vec<f64> = emb.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

/// Number of Pauli strings whose support is not inside any subset.
pub fn invisible_count(n: usize, masks: &[u64]) -> usize {
    (1..1usize << (2 * n))
        .filter(|&idx| {
            let mut support = 0u64;
            for q in 0..n {
                if (idx >> (2 * (n - 1 - q))) & 3 != 0 {
                    support |= 1 << (n - 1 - q);
                }
            }
            !masks.iter().any(|&m| support & !m == 0)
        })
        .count()
}
