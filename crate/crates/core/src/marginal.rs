//! Marginal maps over a collection of qubit subsets and the subspace of
//! traceless operators they cannot see.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{
    pair_index, partial_trace, real_nullspace, unvectorize_matrix, vectorize_matrix,
    CMatrix, HermitianOperator, C64, MAX_QUBITS,
};
use crate::pauli::PauliString;
use crate::sdp::{ConicProgram, HermitianAffine, SolverOptions};

/// The supports `S_k` of the known marginals.
///
/// Indices are 0-based in the Rust API and 1-based in JSON. Each subset is
/// stored sorted; the order of subsets is kept as given.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CollectionJson", into = "CollectionJson")]
pub struct SubsystemCollection {
    n_qubits: usize,
    subsets: Vec<Vec<usize>>,
    allow_full: bool,
}

#[derive(Serialize, Deserialize)]
struct CollectionJson {
    n: usize,
    subsets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_full: bool,
}

impl TryFrom<CollectionJson> for SubsystemCollection {
    type Error = Error;

    fn try_from(j: CollectionJson) -> Result<Self> {
        Self::from_one_based(j.n, &j.subsets, j.allow_full)
    }
}

impl From<SubsystemCollection> for CollectionJson {
    fn from(s: SubsystemCollection) -> Self {
        CollectionJson {
            n: s.n_qubits,
            subsets: s.to_one_based(),
            allow_full: s.allow_full,
        }
    }
}

impl SubsystemCollection {
    /// Builds a collection from 0-based subsets. The full set `[n]` is rejected.
    pub fn new(n_qubits: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        Self::build(n_qubits, subsets, false)
    }

    /// Like [`Self::new`], optionally admitting the full set.
    pub fn with_full(n_qubits: usize, subsets: Vec<Vec<usize>>, allow_full: bool) -> Result<Self> {
        Self::build(n_qubits, subsets, allow_full)
    }

    pub fn from_one_based(n_qubits: usize, subsets: &[Vec<usize>], allow_full: bool) -> Result<Self> {
        let mut zero = Vec::with_capacity(subsets.len());
        for s in subsets {
            let mut out = Vec::with_capacity(s.len());
            for &q in s {
                if q == 0 || q > n_qubits {
                    return Err(Error::InvalidSubsystem(format!(
                        "qubit index {q} out of range 1..={n_qubits}"
                    )));
                }
                out.push(q - 1);
            }
            zero.push(out);
        }
        Self::build(n_qubits, zero, allow_full)
    }

    fn build(n_qubits: usize, subsets: Vec<Vec<usize>>, allow_full: bool) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::InvalidSubsystem(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        if subsets.is_empty() {
            return Err(Error::InvalidSubsystem("no subsets given".into()));
        }
        let mut sorted_sets = Vec::with_capacity(subsets.len());
        for s in subsets {
            if s.is_empty() {
                return Err(Error::InvalidSubsystem("empty subset".into()));
            }
            let mut t = s.clone();
            t.sort_unstable();
            t.dedup();
            if t.len() != s.len() {
                return Err(Error::InvalidSubsystem(format!(
                    "repeated qubit in subset {:?}",
                    one_based(&s)
                )));
            }
            if let Some(&q) = t.iter().find(|&&q| q >= n_qubits) {
                return Err(Error::InvalidSubsystem(format!(
                    "qubit index {} out of range 1..={n_qubits}",
                    q + 1
                )));
            }
            if t.len() == n_qubits && !allow_full {
                return Err(Error::InvalidSubsystem(
                    "subset equals the full system; set allow_full to admit it".into(),
                ));
            }
            if sorted_sets.contains(&t) {
                return Err(Error::InvalidSubsystem(format!(
                    "duplicate subset {:?}",
                    one_based(&t)
                )));
            }
            sorted_sets.push(t);
        }
        let out = Self {
            n_qubits,
            subsets: sorted_sets,
            allow_full,
        };
        for (a, b) in out.redundant_pairs() {
            log::warn!(
                "subset {:?} is contained in {:?}; its marginal is redundant",
                one_based(&out.subsets[a]),
                one_based(&out.subsets[b])
            );
        }
        Ok(out)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn allows_full(&self) -> bool {
        self.allow_full
    }

    pub fn max_subset_size(&self) -> usize {
        self.subsets.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_one_based(&self) -> Vec<Vec<usize>> {
        self.subsets.iter().map(|s| one_based(s)).collect()
    }

    /// `(a, b)` with subset `a` contained in subset `b`, `a != b`.
    pub fn redundant_pairs(&self) -> Vec<(usize, usize)> {
        let masks = self.masks();
        let mut out = vec![];
        for (a, &ma) in masks.iter().enumerate() {
            for (b, &mb) in masks.iter().enumerate() {
                if a != b && ma & !mb == 0 {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Each subset as a mask over basis-index bits (qubit `q` is bit `n-1-q`).
    pub fn masks(&self) -> Vec<u64> {
        self.subsets
            .iter()
            .map(|s| s.iter().fold(0u64, |m, &q| m | 1 << (self.n_qubits - 1 - q)))
            .collect()
    }

    /// Whether an operator supported on `mask` shows up in some marginal.
    pub fn sees(&self, mask: u64) -> bool {
        self.masks().iter().any(|&m| mask & !m == 0)
    }

    /// Relabels qubit `q` as `perm[q]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_qubits)?;
        let subsets = self
            .subsets
            .iter()
            .map(|s| s.iter().map(|&q| perm[q]).collect())
            .collect();
        Self::build(self.n_qubits, subsets, self.allow_full)
    }

    /// The same subsets in a different order.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.len())?;
        let subsets = order.iter().map(|&i| self.subsets[i].clone()).collect();
        Self::build(self.n_qubits, subsets, self.allow_full)
    }
}

fn one_based(s: &[usize]) -> Vec<usize> {
    s.iter().map(|q| q + 1).collect()
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidInput(format!(
            "permutation of length {} for {n} items",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidInput(format!("not a permutation: {perm:?}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// `(X_{S_1}, ..., X_{S_M})`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginalVector {
    pub parts: Vec<HermitianOperator>,
}

impl MarginalVector {
    pub fn trace_norm_sum(&self) -> f64 {
        self.parts.iter().map(HermitianOperator::trace_norm).sum()
    }
}

fn check_dims(x: &HermitianOperator, s: &SubsystemCollection) -> Result<()> {
    if x.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: s.n_qubits(),
            found: x.n_qubits(),
        });
    }
    Ok(())
}

pub fn marginal_map(x: &HermitianOperator, s: &SubsystemCollection) -> Result<MarginalVector> {
    check_dims(x, s)?;
    let parts = s
        .subsets()
        .iter()
        .map(|k| partial_trace(x, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginalVector { parts })
}

/// `sum_k ||X_{S_k}||_1`.
pub fn marginal_norm(x: &HermitianOperator, s: &SubsystemCollection) -> Result<f64> {
    Ok(marginal_map(x, s)?.trace_norm_sum())
}

/// Real matrix of the vectorized marginal map, optionally preceded by the
/// trace functional as row 0. Columns follow the vectorization basis of the
/// full space; row blocks follow the subsets in order.
pub fn marginal_map_matrix(s: &SubsystemCollection, with_trace: bool) -> DMatrix<f64> {
    let n = s.n_qubits();
    let d = 1usize << n;
    let off = d + d * (d - 1) / 2;
    let head = usize::from(with_trace);
    let block_sizes: Vec<usize> = s.subsets().iter().map(|k| 1usize << (2 * k.len())).collect();
    let rows = head + block_sizes.iter().sum::<usize>();
    let mut a = DMatrix::zeros(rows, d * d);
    if with_trace {
        for i in 0..d {
            a[(0, i)] = 1.0;
        }
    }
    let mut row0 = head;
    for (keep, &bs) in s.subsets().iter().zip(&block_sizes) {
        let ms = 1usize << keep.len();
        let off_s = ms + ms * (ms - 1) / 2;
        let mask: usize = keep.iter().fold(0, |m, &q| m | 1 << (n - 1 - q));
        let local: Vec<usize> = (0..d)
            .map(|i| {
                keep.iter()
                    .enumerate()
                    .fold(0, |acc, (pos, &q)| acc | (((i >> (n - 1 - q)) & 1) << (keep.len() - 1 - pos)))
            })
            .collect();
        for i in 0..d {
            a[(row0 + local[i], i)] += 1.0;
        }
        let mut p = 0;
        for j in 0..d {
            for k in (j + 1)..d {
                if j & !mask == k & !mask {
                    let (la, lb) = (local[j], local[k]);
                    let (lo, hi) = (la.min(lb), la.max(lb));
                    let q = pair_index(ms, lo, hi);
                    a[(row0 + ms + q, d + p)] += 1.0;
                    a[(row0 + off_s + q, off + p)] += if la < lb { 1.0 } else { -1.0 };
                }
                p += 1;
            }
        }
        row0 += bs;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Construction {
    PauliCombinatorial,
    SvdNullspace,
}

#[derive(Clone, Debug)]
pub enum KernelElements {
    /// Normalized Pauli strings `P / sqrt(d)`, kept symbolic.
    Pauli(Vec<PauliString>),
    Dense(Vec<HermitianOperator>),
}

/// HS-orthonormal basis of the invisible subspace `W_S`.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    collection: SubsystemCollection,
    construction: Construction,
    elements: KernelElements,
}

/// Dense export form of a [`KernelBasis`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelBasisExport {
    pub construction: Construction,
    pub subsystems: SubsystemCollection,
    pub elements: Vec<HermitianOperator>,
}

impl KernelBasis {
    pub fn n_qubits(&self) -> usize {
        self.collection.n_qubits()
    }

    pub fn collection(&self) -> &SubsystemCollection {
        &self.collection
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn raw(&self) -> &KernelElements {
        &self.elements
    }

    pub fn len(&self) -> usize {
        match &self.elements {
            KernelElements::Pauli(p) => p.len(),
            KernelElements::Dense(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn norm(&self) -> f64 {
        ((1usize << self.n_qubits()) as f64).sqrt().recip()
    }

    pub fn element(&self, i: usize) -> HermitianOperator {
        match &self.elements {
            KernelElements::Pauli(p) => HermitianOperator::from_matrix_unchecked(
                self.n_qubits(),
                p[i].matrix().map(|z| z * self.norm()),
            ),
            KernelElements::Dense(v) => v[i].clone(),
        }
    }

    pub fn export(&self) -> KernelBasisExport {
        KernelBasisExport {
            construction: self.construction,
            subsystems: self.collection.clone(),
            elements: (0..self.len()).map(|i| self.element(i)).collect(),
        }
    }

    /// Keeps only the listed elements.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let elements = match &self.elements {
            KernelElements::Pauli(p) => KernelElements::Pauli(idx.iter().map(|&i| p[i].clone()).collect()),
            KernelElements::Dense(v) => KernelElements::Dense(idx.iter().map(|&i| v[i].clone()).collect()),
        };
        Self {
            collection: self.collection.clone(),
            construction: self.construction,
            elements,
        }
    }

    /// `sum_i c_i K_i`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<HermitianOperator> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        let d = 1usize << self.n_qubits();
        let mut m = CMatrix::zeros(d, d);
        match &self.elements {
            KernelElements::Pauli(p) => {
                let s = self.norm();
                for (pi, &c) in p.iter().zip(coeffs) {
                    if c != 0.0 {
                        for (r, col, v) in pi.entries() {
                            m[(r, col)] += v * (c * s);
                        }
                    }
                }
            }
            KernelElements::Dense(v) => {
                for (k, &c) in v.iter().zip(coeffs) {
                    if c != 0.0 {
                        m += k.matrix().map(|z| z * c);
                    }
                }
            }
        }
        Ok(HermitianOperator::from_matrix_unchecked(self.n_qubits(), m))
    }

    /// `Tr(K_i M)` for Hermitian `M`.
    pub fn expectation(&self, i: usize, m: &CMatrix) -> f64 {
        match &self.elements {
            KernelElements::Pauli(p) => p[i].expectation(m) * self.norm(),
            KernelElements::Dense(v) => crate::linalg::hs_inner(v[i].matrix(), m),
        }
    }

    /// `V^† K_i V` for an isometry `V` (columns span the compression space).
    pub fn compress(&self, i: usize, v: &CMatrix) -> CMatrix {
        match &self.elements {
            KernelElements::Pauli(p) => {
                let kv = p[i].apply_left(v);
                v.adjoint() * kv * C64::new(self.norm(), 0.0)
            }
            KernelElements::Dense(els) => v.adjoint() * els[i].matrix() * v,
        }
    }

    /// Nonzero vectorization coordinates of `K_i`.
    pub fn sparse_coords(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.elements {
            KernelElements::Pauli(p) => {
                let d = 1usize << self.n_qubits();
                let off = d + d * (d - 1) / 2;
                let s = self.norm();
                let mut out = vec![];
                for (r, c, v) in p[i].entries() {
                    let v = v * s;
                    if r == c {
                        out.push((r, v.re));
                    } else if r < c {
                        let q = pair_index(d, r, c);
                        if v.re != 0.0 {
                            out.push((d + q, SQRT_2 * v.re));
                        }
                        if v.im != 0.0 {
                            out.push((off + q, SQRT_2 * v.im));
                        }
                    }
                }
                out.sort_unstable_by_key(|e| e.0);
                out
            }
            KernelElements::Dense(els) => vectorize_matrix(els[i].matrix())
                .into_iter()
                .enumerate()
                .filter(|(_, x)| *x != 0.0)
                .collect(),
        }
    }
}

/// Normalized Pauli strings whose support lies in no subset.
pub fn kernel_basis_pauli(s: &SubsystemCollection) -> KernelBasis {
    let n = s.n_qubits();
    let masks = s.masks();
    let paulis = (1..1usize << (2 * n))
        .map(|idx| PauliString::from_index(n, idx))
        .filter(|p| {
            let m = p.support_mask();
            !masks.iter().any(|&sk| m & !sk == 0)
        })
        .collect();
    KernelBasis {
        collection: s.clone(),
        construction: Construction::PauliCombinatorial,
        elements: KernelElements::Pauli(paulis),
    }
}

/// Nullspace of the stacked trace and marginal maps, by SVD.
pub fn kernel_basis_svd(s: &SubsystemCollection, tol: f64) -> KernelBasis {
    let n = s.n_qubits();
    let d = 1usize << n;
    let a = marginal_map_matrix(s, true);
    let ns = real_nullspace(&a, tol);
    let elements = (0..ns.dim())
        .map(|j| {
            let col: Vec<f64> = ns.basis.column(j).iter().copied().collect();
            HermitianOperator::from_matrix_unchecked(n, unvectorize_matrix(&col, d))
        })
        .collect();
    KernelBasis {
        collection: s.clone(),
        construction: Construction::SvdNullspace,
        elements: KernelElements::Dense(elements),
    }
}

/// `min_c ||X - sum_i c_i K_i||_1`, by the nuclear-norm SDP
/// `min Tr(U + V)` s.t. `X - sum c K = U - V`, `U, V >= 0`.
pub fn dist_to_kernel(x: &HermitianOperator, k: &KernelBasis) -> Result<f64> {
    if x.n_qubits() != k.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: k.n_qubits(),
            found: x.n_qubits(),
        });
    }
    let tr = x.trace();
    if tr.abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "operator must be traceless (trace {tr:.3e})"
        )));
    }
    if k.is_empty() {
        return Ok(x.trace_norm());
    }
    let d = x.dim();
    let nk = k.len();
    // Variables: c (nk), then U in vectorization coordinates (d^2).
    // V = U - X + sum c K is eliminated.
    let mut prog = ConicProgram::new(nk + d * d);
    for i in 0..d {
        prog.minimize(nk + i, 2.0);
    }
    let mut u_block = HermitianAffine::new(d);
    for j in 0..d * d {
        u_block.terms.push((nk + j, vec![(j, 1.0)]));
    }
    prog.add_hermitian_psd(&u_block);
    let mut v_block = HermitianAffine::new(d);
    v_block.constant = vectorize_matrix(x.matrix()).into_iter().map(|v| -v).collect();
    v_block.terms = u_block.terms.clone();
    for i in 0..nk {
        v_block.terms.push((i, k.sparse_coords(i)));
    }
    prog.add_hermitian_psd(&v_block);
    let sol = prog.solve(&SolverOptions::default())?.require_optimal("dist_to_kernel")?;
    Ok((sol.objective - tr).max(0.0))
}

/// HS-based upper estimate `sqrt(d) / sigma_min^+` for the constant bounding
/// `dist(X, W_S)` by the marginal norm.
///
/// In the Pauli basis the vectorized marginal map has orthogonal images, so
/// `sigma(P)^2 = sum_{k : supp P ⊆ S_k} 2^(n - |S_k|)`.
pub fn c1_hs_estimate(s: &SubsystemCollection) -> f64 {
    let n = s.n_qubits();
    let masks = s.masks();
    let sizes: Vec<usize> = s.subsets().iter().map(Vec::len).collect();
    let mut best = f64::INFINITY;
    for idx in 1..1usize << (2 * n) {
        let m = PauliString::from_index(n, idx).support_mask();
        let sq: f64 = masks
            .iter()
            .zip(&sizes)
            .filter(|(&sk, _)| m & !sk == 0)
            .map(|(_, &len)| (1u64 << (n - len)) as f64)
            .sum();
        if sq > 0.0 {
            best = best.min(sq);
        }
    }
    ((1usize << n) as f64).sqrt() / best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DensityMatrix;
    use nalgebra::DVector;

    fn pairs(n: usize) -> SubsystemCollection {
        let mut v = vec![];
        for i in 0..n {
            for j in (i + 1)..n {
                v.push(vec![i, j]);
            }
        }
        SubsystemCollection::new(n, v).unwrap()
    }

    fn ghz(n: usize) -> DensityMatrix {
        let d = 1 << n;
        let mut v = DVector::zeros(d);
        v[0] = C64::new(1.0, 0.0);
        v[d - 1] = C64::new(1.0, 0.0);
        DensityMatrix::pure(n, &(v / C64::new(2f64.sqrt(), 0.0))).unwrap()
    }

    #[test]
    fn collection_validation() {
        assert!(SubsystemCollection::new(3, vec![vec![0, 3]]).is_err());
        assert!(SubsystemCollection::new(3, vec![vec![]]).is_err());
        assert!(SubsystemCollection::new(3, vec![vec![0, 0]]).is_err());
        assert!(SubsystemCollection::new(3, vec![vec![0, 1], vec![1, 0]]).is_err());
        assert!(SubsystemCollection::new(2, vec![vec![0, 1]]).is_err());
        assert!(SubsystemCollection::with_full(2, vec![vec![0, 1]], true).is_ok());
        let s = SubsystemCollection::new(3, vec![vec![2, 0], vec![0]]).unwrap();
        assert_eq!(s.subsets(), &[vec![0, 2], vec![0]]);
        assert_eq!(s.redundant_pairs(), vec![(1, 0)]);
    }

    #[test]
    fn json_is_one_based() {
        let s: SubsystemCollection =
            serde_json::from_str(r#"{"n": 3, "subsets": [[1,2],[2,3]]}"#).unwrap();
        assert_eq!(s.subsets(), &[vec![0, 1], vec![1, 2]]);
        let back = serde_json::to_value(&s).unwrap();
        assert_eq!(back, serde_json::json!({"n": 3, "subsets": [[1,2],[2,3]]}));
        assert!(serde_json::from_str::<SubsystemCollection>(r#"{"n": 3, "subsets": [[0]]}"#).is_err());
    }

    #[test]
    fn ghz_pair_marginals() {
        let rho = ghz(3);
        let mv = marginal_map(rho.op(), &pairs(3)).unwrap();
        let expect = HermitianOperator::diagonal(2, &[0.5, 0.0, 0.0, 0.5]).unwrap();
        for part in &mv.parts {
            assert!(part.max_abs_diff(&expect) < 1e-12);
        }
        assert!((marginal_norm(rho.op(), &pairs(3)).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spot_kernel_dimensions() {
        let full = SubsystemCollection::with_full(2, vec![vec![0, 1]], true).unwrap();
        assert_eq!(kernel_basis_pauli(&full).len(), 0);
        let singles = SubsystemCollection::new(2, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(kernel_basis_pauli(&singles).len(), 9);
        assert_eq!(kernel_basis_pauli(&pairs(3)).len(), 27);
        let chain = SubsystemCollection::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        // supports must contain qubits 0 and 2: 3 * 4 * 3
        assert_eq!(kernel_basis_pauli(&chain).len(), 36);
        assert_eq!(kernel_basis_svd(&chain, 1e-9).len(), 36);
        let one = SubsystemCollection::with_full(1, vec![vec![0]], true).unwrap();
        assert_eq!(kernel_basis_svd(&one, 1e-9).len(), 0);
    }

    #[test]
    fn kernel_elements_are_invisible_and_orthonormal() {
        let s = SubsystemCollection::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        for kb in [kernel_basis_pauli(&s), kernel_basis_svd(&s, 1e-9)] {
            let els: Vec<_> = (0..kb.len()).map(|i| kb.element(i)).collect();
            for (i, a) in els.iter().enumerate() {
                assert!(a.trace().abs() < 1e-10);
                assert!(marginal_norm(a, &s).unwrap() < 1e-9);
                for (j, b) in els.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((a.hs_inner(b) - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sparse_coords_match_dense_vectorization() {
        let kb = kernel_basis_pauli(&pairs(3));
        for i in [0, 5, 26] {
            let dense = vectorize_matrix(kb.element(i).matrix());
            let mut from_sparse = vec![0.0; dense.len()];
            for (j, v) in kb.sparse_coords(i) {
                from_sparse[j] = v;
            }
            for (a, b) in dense.iter().zip(&from_sparse) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn marginal_matrix_matches_partial_trace() {
        let s = SubsystemCollection::new(3, vec![vec![0, 2], vec![1]]).unwrap();
        let a = marginal_map_matrix(&s, false);
        let x = HermitianOperator::new(
            3,
            CMatrix::from_fn(8, 8, |r, c| {
                C64::new((r * 3 + c) as f64 * 0.1, (r as f64 - c as f64) * 0.05)
            }) + CMatrix::from_fn(8, 8, |r, c| {
                C64::new((c * 3 + r) as f64 * 0.1, (c as f64 - r as f64) * 0.05)
            }),
        )
        .unwrap();
        let phi = DVector::from_vec(vectorize_matrix(x.matrix()));
        let got = &a * phi;
        let mut expect = vec![];
        for part in marginal_map(&x, &s).unwrap().parts {
            expect.extend(vectorize_matrix(part.matrix()));
        }
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn c1_full_marginal_is_two() {
        let full = SubsystemCollection::with_full(2, vec![vec![0, 1]], true).unwrap();
        assert!((c1_hs_estimate(&full) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dist_to_kernel_basic() {
        let kb = kernel_basis_pauli(&pairs(3));
        let x = kb.combine(&(0..kb.len()).map(|i| (i as f64 * 0.37).sin()).collect::<Vec<_>>()).unwrap();
        assert!(dist_to_kernel(&x, &kb).unwrap() < 1e-7);
        let empty = kb.subset(&[]);
        let y = HermitianOperator::diagonal(3, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((dist_to_kernel(&y, &empty).unwrap() - 2.0).abs() < 1e-12);
    }
}
