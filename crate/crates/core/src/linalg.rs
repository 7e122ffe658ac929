//! Dense Hermitian linear algebra on multi-qubit Hilbert spaces.
//!
//! Qubits are indexed from 0 in the Rust API; qubit 0 is the most significant
//! bit of a computational-basis index, so `|x_0 x_1 ... x_{n-1}>` sits at
//! index `sum_q x_q 2^(n-1-q)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Entrywise asymmetry above which input matrices are rejected instead of symmetrized.
pub const HERMITICITY_REJECT: f64 = 1e-8;
/// Largest register handled by the dense representation.
pub const MAX_QUBITS: usize = 8;
/// Trace and positivity slack for validated density matrices.
pub const STATE_TOL: f64 = 1e-10;

/// A dense Hermitian operator on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianOperator {
    n_qubits: usize,
    mat: CMatrix,
}

/// Eigendecomposition with eigenvalues sorted ascending; column `i` of
/// `vectors` belongs to `values[i]`.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianOperator {
    /// Builds an operator from a dense matrix, symmetrizing `(X + X^†)/2`.
    /// Matrices whose asymmetry exceeds [`HERMITICITY_REJECT`] are rejected.
    pub fn new(n_qubits: usize, mat: CMatrix) -> Result<Self> {
        check_qubits(n_qubits)?;
        let d = 1usize << n_qubits;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: mat.nrows().max(mat.ncols()),
            });
        }
        let asym = max_asymmetry(&mat);
        if !asym.is_finite() || asym > HERMITICITY_REJECT {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        Ok(Self::from_matrix_unchecked(n_qubits, mat))
    }

    /// Symmetrizes without the asymmetry check. Used on results of internal
    /// arithmetic where roundoff is the only source of asymmetry.
    pub(crate) fn from_matrix_unchecked(n_qubits: usize, mat: CMatrix) -> Self {
        let adj = mat.adjoint();
        Self {
            n_qubits,
            mat: (mat + adj).scale(0.5),
        }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self {
            n_qubits,
            mat: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self {
            n_qubits,
            mat: CMatrix::identity(d, d),
        }
    }

    /// Real diagonal operator.
    pub fn diagonal(n_qubits: usize, diag: &[f64]) -> Result<Self> {
        let d = 1 << n_qubits;
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: diag.len(),
            });
        }
        let mut mat = CMatrix::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            mat[(i, i)] = C64::new(v, 0.0);
        }
        Ok(Self { n_qubits, mat })
    }

    /// `|v><v|` for an arbitrary (not necessarily normalized) vector.
    pub fn outer(n_qubits: usize, v: &DVector<C64>) -> Result<Self> {
        let d = 1 << n_qubits;
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        Ok(Self::from_matrix_unchecked(n_qubits, v * v.adjoint()))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn eigh(&self) -> Eigh {
        eigh(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.mat, false).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `sum_i |lambda_i|`.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|v| v.abs()).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute eigenvalue.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `Re Tr(A B)`, the Hilbert-Schmidt inner product for Hermitian pairs.
    pub fn hs_inner(&self, other: &Self) -> f64 {
        hs_inner(&self.mat, &other.mat)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            mat: self.mat.map(|z| z * s),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            n_qubits: self.n_qubits,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            n_qubits: self.n_qubits,
            mat: &self.mat - &other.mat,
        })
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            n_qubits: self.n_qubits,
            mat: &self.mat + other.mat.map(|z| z * s),
        })
    }

    /// `self ⊗ other`, with `self` on the leading qubits.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Conjugation `U X U^†` by an arbitrary square matrix of matching size.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.nrows(),
            });
        }
        Ok(Self::from_matrix_unchecked(
            self.n_qubits,
            u * &self.mat * u.adjoint(),
        ))
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.mat
            .iter()
            .zip(other.mat.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(())
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidInput(format!(
            "qubit count {n} outside supported range 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

pub(crate) fn max_asymmetry(mat: &CMatrix) -> f64 {
    let d = mat.nrows();
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hs_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    // Tr(AB) = sum_ij A_ij B_ji
    let d = a.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Ascending eigendecomposition of a Hermitian matrix.
pub fn eigh(mat: &CMatrix) -> Eigh {
    let (values, vectors) = hermitian_eigen(mat, true);
    Eigh { values, vectors }
}

/// LAPACK `zheevd` on the lower triangle. Returns ascending eigenvalues and,
/// when requested, the eigenvectors as columns.
fn hermitian_eigen(mat: &CMatrix, vectors: bool) -> (Vec<f64>, CMatrix) {
    let n = mat.nrows();
    if n == 0 {
        return (vec![], CMatrix::zeros(0, 0));
    }
    let mut a: Vec<C64> = mat.as_slice().to_vec();
    let mut w = vec![0.0; n];
    let jobz = if vectors { b'V' } else { b'N' };
    let ni = n as i32;
    let mut info = 0;
    let (mut wq, mut rq, mut iq) = ([C64::new(0.0, 0.0)], [0.0], [0]);
    unsafe {
        lapack::zheevd(jobz, b'L', ni, &mut a, ni, &mut w, &mut wq, -1, &mut rq, -1, &mut iq, -1, &mut info);
    }
    assert_eq!(info, 0, "zheevd workspace query failed");
    let lwork = wq[0].re as i32;
    let lrwork = rq[0] as i32;
    let liwork = iq[0];
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0; lrwork.max(1) as usize];
    let mut iwork = vec![0; liwork.max(1) as usize];
    unsafe {
        lapack::zheevd(
            jobz, b'L', ni, &mut a, ni, &mut w, &mut work, lwork, &mut rwork, lrwork, &mut iwork, liwork, &mut info,
        );
    }
    assert_eq!(info, 0, "zheevd failed to converge (info {info})");
    let v = if vectors {
        CMatrix::from_vec(n, n, a)
    } else {
        CMatrix::zeros(0, 0)
    };
    (w, v)
}

// ---------------------------------------------------------------------------
// JSON form: {"n": int, "re": [[...]], "im": [[...]]}, row-major.

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for HermitianOperator {
    type Error = Error;

    fn try_from(js: MatrixJson) -> Result<Self> {
        check_qubits(js.n)?;
        let d = 1usize << js.n;
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !rows_ok(&js.re) {
            return Err(Error::InvalidInput(format!(
                "field `re` must be a {d}x{d} array for n = {}",
                js.n
            )));
        }
        if !rows_ok(&js.im) {
            return Err(Error::InvalidInput(format!(
                "field `im` must be a {d}x{d} array for n = {}",
                js.n
            )));
        }
        let mat = CMatrix::from_fn(d, d, |i, j| C64::new(js.re[i][j], js.im[i][j]));
        HermitianOperator::new(js.n, mat)
    }
}

impl From<HermitianOperator> for MatrixJson {
    fn from(op: HermitianOperator) -> Self {
        let d = op.dim();
        let re = (0..d)
            .map(|i| (0..d).map(|j| op.mat[(i, j)].re).collect())
            .collect();
        let im = (0..d)
            .map(|i| (0..d).map(|j| op.mat[(i, j)].im).collect())
            .collect();
        MatrixJson {
            n: op.n_qubits,
            re,
            im,
        }
    }
}

// ---------------------------------------------------------------------------
// Density matrices and projectors

/// A unit-trace positive semidefinite operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HermitianOperator", into = "HermitianOperator")]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::with_tolerance(op, STATE_TOL)
    }

    /// Validates trace and positivity against `tol` instead of the default.
    pub fn with_tolerance(op: HermitianOperator, tol: f64) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = op.min_eigenvalue();
        if min < -tol {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(Self { op })
    }

    /// Normalized `|v><v|`.
    pub fn pure(n_qubits: usize, v: &DVector<C64>) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let op = HermitianOperator::outer(n_qubits, &v.unscale(norm))?;
        Ok(Self { op })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = (1usize << n_qubits) as f64;
        Self {
            op: HermitianOperator::identity(n_qubits).scale(1.0 / d),
        }
    }

    /// Clips negative eigenvalues and renormalizes. Meant for solver output
    /// that is PSD only up to the solver's accuracy.
    pub fn from_approximate(op: &HermitianOperator) -> Result<Self> {
        let eig = op.eigh();
        let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidState("no positive spectrum to normalize".into()));
        }
        let d = op.dim();
        let mut mat = CMatrix::zeros(d, d);
        for (k, &lam) in clipped.iter().enumerate() {
            if lam > 0.0 {
                let v = eig.vectors.column(k);
                mat += (v * v.adjoint()).scale(lam / total);
            }
        }
        Ok(Self {
            op: HermitianOperator::from_matrix_unchecked(op.n_qubits(), mat),
        })
    }

    /// Convex mixture `(1 - p) self + p other`.
    pub fn mix(&self, other: &Self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("mixing weight {p} outside [0,1]")));
        }
        let op = self.op.scale(1.0 - p).axpy(p, &other.op)?;
        Ok(Self { op })
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn n_qubits(&self) -> usize {
        self.op.n_qubits()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Number of eigenvalues above `tol * lambda_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let vals = self.op.eigenvalues();
        let top = vals.last().copied().unwrap_or(0.0);
        vals.iter().filter(|&&v| v >= tol * top).count()
    }

    /// `Tr(self other)`; the fidelity when either state is pure.
    pub fn overlap(&self, other: &Self) -> f64 {
        self.op.hs_inner(&other.op)
    }
}

impl TryFrom<HermitianOperator> for DensityMatrix {
    type Error = Error;
    fn try_from(op: HermitianOperator) -> Result<Self> {
        DensityMatrix::new(op)
    }
}

impl From<DensityMatrix> for HermitianOperator {
    fn from(rho: DensityMatrix) -> Self {
        rho.op
    }
}

#[derive(Clone, Debug)]
pub struct Projector {
    op: HermitianOperator,
    rank: usize,
}

impl Projector {
    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `||P^2 - P||_HS`.
    pub fn idempotency_residual(&self) -> f64 {
        let p = self.op.matrix();
        (p * p - p).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Orthonormal bases of `supp rho` and `ker rho`.
#[derive(Clone, Debug)]
pub struct SupportSplit {
    /// `d x r`, eigenvectors of the retained eigenvalues.
    pub support: CMatrix,
    pub support_values: Vec<f64>,
    /// `d x (d - r)`.
    pub kernel: CMatrix,
    /// Absolute cut: eigenvalues below this count as zero.
    pub threshold: f64,
}

impl SupportSplit {
    pub fn rank(&self) -> usize {
        self.support.ncols()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }
}

/// Splits the spectrum of `rho` at `tol * lambda_max`.
pub fn support_split(rho: &DensityMatrix, tol: f64) -> Result<SupportSplit> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!("rank tolerance must be positive, got {tol}")));
    }
    let eig = rho.op().eigh();
    let d = eig.values.len();
    let top = eig.values[d - 1];
    let threshold = tol * top;
    let n_kernel = eig.values.iter().filter(|&&v| v < threshold).count();
    // ascending order: kernel vectors come first
    let kernel = eig.vectors.columns(0, n_kernel).into_owned();
    let support = eig.vectors.columns(n_kernel, d - n_kernel).into_owned();
    Ok(SupportSplit {
        support,
        support_values: eig.values[n_kernel..].to_vec(),
        kernel,
        threshold,
    })
}

/// Projector onto the span of eigenvectors of `rho` with eigenvalue below
/// `tol * lambda_max`. Full-rank states give the zero projector.
pub fn kernel_projector(rho: &DensityMatrix, tol: f64) -> Result<Projector> {
    let split = support_split(rho, tol)?;
    let v = &split.kernel;
    let op = HermitianOperator::from_matrix_unchecked(rho.n_qubits(), v * v.adjoint());
    Ok(Projector {
        op,
        rank: split.kernel_dim(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub ground_energy: f64,
    pub gap: f64,
    pub ground_degeneracy: usize,
}

/// Ground energy, gap to the next distinct level, and ground degeneracy.
/// Levels closer than `1e-9 * ||H||_inf` are treated as equal; an operator
/// with a single level reports gap 0.
pub fn spectral_gap(h: &HermitianOperator) -> SpectralGap {
    let vals = h.eigenvalues();
    let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let e0 = vals[0];
    let degeneracy = vals.iter().take_while(|&&v| v - e0 <= tol).count();
    let gap = vals.get(degeneracy).map_or(0.0, |v| v - e0);
    SpectralGap {
        ground_energy: e0,
        gap,
        ground_degeneracy: degeneracy,
    }
}

// ---------------------------------------------------------------------------
// Real vectorization over the Hilbert-Schmidt orthonormal Hermitian basis:
// diagonal units E_ii, then (E_jk + E_kj)/sqrt2 for j < k, then
// i(E_jk - E_kj)/sqrt2 for j < k, pairs in lexicographic order.

/// Coordinates of a Hermitian operator in the orthonormal basis above.
#[derive(Clone, Debug, PartialEq)]
pub struct RealVector {
    pub coords: DVector<f64>,
}

impl RealVector {
    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    /// Inverse of [`vectorize`].
    pub fn to_operator(&self, n_qubits: usize) -> Result<HermitianOperator> {
        let d = 1usize << n_qubits;
        if self.coords.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: self.coords.len(),
            });
        }
        Ok(HermitianOperator {
            n_qubits,
            mat: unvectorize_matrix(self.coords.as_slice(), d),
        })
    }
}

pub fn vectorize(x: &HermitianOperator) -> RealVector {
    RealVector {
        coords: DVector::from_vec(vectorize_matrix(&x.mat)),
    }
}

/// Index of the first antisymmetric coordinate for an `m x m` matrix.
fn antisym_offset(m: usize) -> usize {
    m + m * (m - 1) / 2
}

/// Position of the pair `(j, k)`, `j < k`, in lexicographic order.
pub(crate) fn pair_index(m: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < m);
    j * (2 * m - j - 1) / 2 + (k - j - 1)
}

/// Vectorizes any square Hermitian matrix (dimension need not be a power of 2).
pub fn vectorize_matrix(mat: &CMatrix) -> Vec<f64> {
    let m = mat.nrows();
    let mut out = vec![0.0; m * m];
    let off = antisym_offset(m);
    for i in 0..m {
        out[i] = mat[(i, i)].re;
    }
    let mut p = 0;
    for j in 0..m {
        for k in (j + 1)..m {
            let z = mat[(j, k)];
            out[m + p] = std::f64::consts::SQRT_2 * z.re;
            out[off + p] = std::f64::consts::SQRT_2 * z.im;
            p += 1;
        }
    }
    out
}

pub fn unvectorize_matrix(coords: &[f64], m: usize) -> CMatrix {
    let off = antisym_offset(m);
    let mut mat = CMatrix::zeros(m, m);
    for i in 0..m {
        mat[(i, i)] = C64::new(coords[i], 0.0);
    }
    let mut p = 0;
    for j in 0..m {
        for k in (j + 1)..m {
            let z = C64::new(coords[m + p], coords[off + p]) * FRAC_1_SQRT_2;
            mat[(j, k)] = z;
            mat[(k, j)] = z.conj();
            p += 1;
        }
    }
    mat
}

/// Basis element `idx` of the `m x m` vectorization basis.
pub fn basis_element(m: usize, idx: usize) -> CMatrix {
    let mut coords = vec![0.0; m * m];
    coords[idx] = 1.0;
    unvectorize_matrix(&coords, m)
}

// ---------------------------------------------------------------------------
// Partial trace and local embeddings

/// Spreads the bits of `bits` (MSB first) onto the given qubit positions.
fn scatter(bits: usize, qubits: &[usize], n: usize) -> usize {
    let len = qubits.len();
    qubits
        .iter()
        .enumerate()
        .filter(|(pos, _)| (bits >> (len - 1 - pos)) & 1 == 1)
        .fold(0, |acc, (_, &q)| acc | (1 << (n - 1 - q)))
}

fn validate_keep(n: usize, keep: &[usize]) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::InvalidSubsystem("empty subsystem".into()));
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() {
        return Err(Error::InvalidSubsystem(format!("repeated qubit in {keep:?}")));
    }
    if let Some(&q) = sorted.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidSubsystem(format!(
            "qubit index {q} out of range for {n} qubits"
        )));
    }
    Ok(sorted)
}

/// Partial trace of an arbitrary `2^n x 2^n` matrix onto the qubits in `keep`
/// (0-based). The result is ordered by ascending qubit index.
pub fn partial_trace_matrix(mat: &CMatrix, n: usize, keep: &[usize]) -> Result<CMatrix> {
    let keep = validate_keep(n, keep)?;
    let d = 1usize << n;
    if mat.nrows() != d || mat.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: mat.nrows(),
        });
    }
    let k = keep.len();
    let traced: Vec<usize> = (0..n).filter(|q| keep.binary_search(q).is_err()).collect();
    let keep_idx: Vec<usize> = (0..1usize << k).map(|a| scatter(a, &keep, n)).collect();
    let rest_idx: Vec<usize> = (0..1usize << (n - k)).map(|r| scatter(r, &traced, n)).collect();
    let dk = 1usize << k;
    let mut out = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for &r in &rest_idx {
                acc += mat[(keep_idx[a] | r, keep_idx[b] | r)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// `Tr_{complement of keep}(X)` for qubit indices `keep` (0-based).
pub fn partial_trace(x: &HermitianOperator, keep: &[usize]) -> Result<HermitianOperator> {
    let out = partial_trace_matrix(&x.mat, x.n_qubits, keep)?;
    Ok(HermitianOperator {
        n_qubits: keep.len(),
        mat: out,
    })
}

/// Embeds an operator acting on `support` (ascending, 0-based) into `n` qubits
/// as `local ⊗ I`.
pub fn embed_local(local: &CMatrix, support: &[usize], n: usize) -> Result<CMatrix> {
    let support = validate_keep(n, support)?;
    let k = support.len();
    let dk = 1usize << k;
    if local.nrows() != dk || local.ncols() != dk {
        return Err(Error::DimensionMismatch {
            expected: dk,
            found: local.nrows(),
        });
    }
    let d = 1usize << n;
    let mask: usize = support.iter().fold(0, |acc, &q| acc | (1 << (n - 1 - q)));
    let local_of = |i: usize| -> usize {
        support
            .iter()
            .enumerate()
            .fold(0, |acc, (pos, &q)| acc | (((i >> (n - 1 - q)) & 1) << (k - 1 - pos)))
    };
    let spread: Vec<usize> = (0..dk).map(|b| scatter(b, &support, n)).collect();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        let a = local_of(i);
        let rest = i & !mask;
        for (b, &s) in spread.iter().enumerate() {
            out[(i, rest | s)] = local[(a, b)];
        }
    }
    Ok(out)
}

/// Moves qubit `q` to position `perm[q]`.
pub fn permute_qubits(x: &HermitianOperator, perm: &[usize]) -> Result<HermitianOperator> {
    let n = x.n_qubits;
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidInput(format!("not a qubit permutation: {perm:?}")));
    }
    let d = x.dim();
    let map: Vec<usize> = (0..d)
        .map(|i| {
            (0..n)
                .filter(|&q| (i >> (n - 1 - q)) & 1 == 1)
                .fold(0, |acc, q| acc | 1 << (n - 1 - perm[q]))
        })
        .collect();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(map[i], map[j])] = x.mat[(i, j)];
        }
    }
    Ok(HermitianOperator { n_qubits: n, mat: out })
}

// ---------------------------------------------------------------------------
// Real nullspace

#[derive(Clone, Debug)]
pub struct NullSpace {
    /// `ncols x k`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Absolute cut below which singular values count as zero.
    pub threshold: f64,
}

impl NullSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Smallest singular value counted as nonzero, relative to the largest.
    pub fn smallest_retained_ratio(&self) -> Option<f64> {
        let top = *self.singular_values.first()?;
        (self.rank > 0 && top > 0.0).then(|| self.singular_values[self.rank - 1] / top)
    }

    /// Largest singular value counted as zero, relative to the largest.
    pub fn largest_dropped_ratio(&self) -> Option<f64> {
        let top = *self.singular_values.first()?;
        (top > 0.0)
            .then(|| self.singular_values.get(self.rank).map(|s| s / top))
            .flatten()
    }
}

/// Right nullspace of `a`, with singular values below `rel_tol * sigma_max`
/// treated as zero.
pub fn real_nullspace(a: &DMatrix<f64>, rel_tol: f64) -> NullSpace {
    let cols = a.ncols();
    if cols == 0 {
        return NullSpace {
            basis: DMatrix::zeros(0, 0),
            singular_values: vec![],
            rank: 0,
            threshold: 0.0,
        };
    }
    let (svals, v_t) = full_right_svd(a);
    let mut order: Vec<usize> = (0..cols).collect();
    let sv = |i: usize| svals.get(i).copied().unwrap_or(0.0);
    order.sort_by(|&x, &y| sv(y).total_cmp(&sv(x)));
    let singular_values: Vec<f64> = order.iter().map(|&i| sv(i)).collect();
    let top = singular_values.first().copied().unwrap_or(0.0);
    let threshold = rel_tol * top;
    let rank = if top == 0.0 {
        0
    } else {
        singular_values.iter().filter(|&&s| s > threshold).count()
    };
    let null_rows: Vec<usize> = order[rank..].to_vec();
    let basis = DMatrix::from_fn(cols, null_rows.len(), |r, c| v_t[(null_rows[c], r)]);
    NullSpace {
        basis,
        singular_values,
        rank,
        threshold,
    }
}

/// LAPACK `dgesvd` with all right singular vectors; returns the
/// `min(rows, cols)` singular values and the full `cols x cols` `V^T`.
fn full_right_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut buf: Vec<f64> = a.as_slice().to_vec();
    let mut s = vec![0.0; k];
    let mut vt = vec![0.0; n * n];
    let mut u = [0.0];
    let (mi, ni) = (m as i32, n as i32);
    let lda = mi.max(1);
    let mut info = 0;
    let mut q = [0.0];
    unsafe {
        lapack::dgesvd(b'N', b'A', mi, ni, &mut buf, lda, &mut s, &mut u, 1, &mut vt, ni, &mut q, -1, &mut info);
    }
    assert_eq!(info, 0, "dgesvd workspace query failed");
    let lwork = q[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    if m > 0 {
        unsafe {
            lapack::dgesvd(b'N', b'A', mi, ni, &mut buf, lda, &mut s, &mut u, 1, &mut vt, ni, &mut work, lwork, &mut info);
        }
        assert_eq!(info, 0, "dgesvd failed to converge (info {info})");
    } else {
        for i in 0..n {
            vt[i * n + i] = 1.0;
        }
    }
    (s, DMatrix::from_vec(n, n, vt))
}
