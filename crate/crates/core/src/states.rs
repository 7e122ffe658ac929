//! Target state families, their marginal collections, and parent Hamiltonians.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    embed_local, partial_trace, spectral_gap, CMatrix, DensityMatrix, HermitianOperator, SpectralGap,
    C64, MAX_QUBITS,
};
use crate::marginal::SubsystemCollection;
use crate::pauli::{symplectic_rank, Letter, PauliString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Cluster,
    Ring,
}

/// Declarative description of a target state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateSpec {
    Dense { matrix: HermitianOperator },
    Stabilizer { generators: Vec<PauliString> },
    Graph { topology: Topology, n: usize },
    Dicke { n: usize, k: usize },
}

impl StateSpec {
    pub fn n_qubits(&self) -> usize {
        match self {
            StateSpec::Dense { matrix } => matrix.n_qubits(),
            StateSpec::Stabilizer { generators } => generators.first().map_or(0, |g| g.n_qubits()),
            StateSpec::Graph { n, .. } | StateSpec::Dicke { n, .. } => *n,
        }
    }

    pub fn label(&self) -> String {
        match self {
            StateSpec::Dense { matrix } => format!("dense({})", matrix.n_qubits()),
            StateSpec::Stabilizer { generators } => format!(
                "stabilizer[{}]",
                generators.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")
            ),
            StateSpec::Graph { topology, n } => format!("{topology:?}({n})").to_lowercase(),
            StateSpec::Dicke { n, k } => format!("dicke({n},{k})"),
        }
    }

    /// Stabilizer generators, for the stabilizer and graph kinds.
    pub fn stabilizer_generators(&self) -> Result<Option<Vec<PauliString>>> {
        Ok(match self {
            StateSpec::Stabilizer { generators } => Some(generators.clone()),
            StateSpec::Graph { topology, n } => Some(graph_generators(*n, *topology)?),
            _ => None,
        })
    }

    pub fn is_stabilizer(&self) -> bool {
        matches!(self, StateSpec::Stabilizer { .. } | StateSpec::Graph { .. })
    }

    pub fn materialize(&self) -> Result<DensityMatrix> {
        match self {
            StateSpec::Dense { matrix } => DensityMatrix::new(matrix.clone()),
            StateSpec::Dicke { n, k } => build_dicke_state(*n, *k),
            _ => build_stabilizer_state(&self.stabilizer_generators()?.expect("stabilizer kind")),
        }
    }

    /// The parent Hamiltonian of the stabilizer, graph, and Dicke kinds.
    pub fn parent_hamiltonian(&self) -> Result<Option<ParentHamiltonian>> {
        match self {
            StateSpec::Dense { .. } => Ok(None),
            StateSpec::Dicke { n, k } => dicke_parent_hamiltonian(*n, *k).map(Some),
            _ => stabilizer_parent_hamiltonian(&self.stabilizer_generators()?.expect("stabilizer kind"))
                .map(Some),
        }
    }
}

/// Checks commutation, independence, and count; returns `n`.
pub fn validate_stabilizer(gens: &[PauliString]) -> Result<usize> {
    let n = gens
        .first()
        .ok_or_else(|| Error::InvalidStabilizer("no generators".into()))?
        .n_qubits();
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidStabilizer(format!("qubit count {n} outside 1..={MAX_QUBITS}")));
    }
    if let Some(g) = gens.iter().find(|g| g.n_qubits() != n) {
        return Err(Error::InvalidStabilizer(format!("generator {g} does not act on {n} qubits")));
    }
    if gens.len() != n {
        return Err(Error::InvalidStabilizer(format!(
            "{} generators for {n} qubits",
            gens.len()
        )));
    }
    for (i, a) in gens.iter().enumerate() {
        for b in &gens[i + 1..] {
            if !a.commutes_with(b) {
                return Err(Error::InvalidStabilizer(format!("{a} and {b} anticommute")));
            }
        }
    }
    if symplectic_rank(gens) != n {
        return Err(Error::InvalidStabilizer("generators are not independent".into()));
    }
    Ok(n)
}

/// `prod_i (I + g_i) / 2`.
pub fn build_stabilizer_state(gens: &[PauliString]) -> Result<DensityMatrix> {
    let n = validate_stabilizer(gens)?;
    let d = 1usize << n;
    let half = C64::new(0.5, 0.0);
    let mut m = CMatrix::identity(d, d);
    for g in gens {
        m = (&m + g.apply_left(&m)) * half;
    }
    let op = HermitianOperator::new(n, m)?;
    if (op.trace() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidStabilizer("-I lies in the generated group".into()));
    }
    DensityMatrix::new(op)
}

/// Generators of the cluster or ring graph state on `n >= 3` qubits.
pub fn graph_generators(n: usize, topology: Topology) -> Result<Vec<PauliString>> {
    if !(3..=MAX_QUBITS).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "graph states need 3 <= n <= {MAX_QUBITS}, got {n}"
        )));
    }
    (0..n)
        .map(|i| {
            let mut sites = vec![(i, Letter::X)];
            match topology {
                Topology::Cluster => {
                    if i > 0 {
                        sites.push((i - 1, Letter::Z));
                    }
                    if i + 1 < n {
                        sites.push((i + 1, Letter::Z));
                    }
                }
                Topology::Ring => {
                    sites.push(((i + n - 1) % n, Letter::Z));
                    sites.push(((i + 1) % n, Letter::Z));
                }
            }
            PauliString::from_sites(n, &sites)
        })
        .collect()
}

/// The graph state and the marginal set given by its generator supports:
/// chain windows plus the two end pairs for the cluster, cyclic windows for
/// the ring.
pub fn graph_state_spec(n: usize, topology: Topology) -> Result<(StateSpec, SubsystemCollection)> {
    let gens = graph_generators(n, topology)?;
    let mut subsets: Vec<Vec<usize>> = vec![];
    for g in &gens {
        let s = g.support();
        if !subsets.contains(&s) {
            subsets.push(s);
        }
    }
    let s = SubsystemCollection::with_full(n, subsets, n == 3)?;
    Ok((StateSpec::Graph { topology, n }, s))
}

/// All pairs `{i, j}`, lexicographic.
pub fn two_local_collection(n: usize) -> Result<SubsystemCollection> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 qubits, got {n}")));
    }
    let mut v = vec![];
    for i in 0..n {
        for j in (i + 1)..n {
            v.push(vec![i, j]);
        }
    }
    SubsystemCollection::with_full(n, v, n == 2)
}

pub fn check_dicke(n: usize, k: usize) -> Result<()> {
    if !(2..=MAX_QUBITS).contains(&n) || k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "Dicke state needs 2 <= n <= {MAX_QUBITS} and 1 <= k <= n-1, got ({n},{k})"
        )));
    }
    Ok(())
}

pub fn dicke_vector(n: usize, k: usize) -> Result<DVector<C64>> {
    check_dicke(n, k)?;
    let d = 1usize << n;
    let count = (0..d).filter(|i| i.count_ones() as usize == k).count();
    let amp = C64::new((count as f64).sqrt().recip(), 0.0);
    Ok(DVector::from_fn(d, |i, _| {
        if i.count_ones() as usize == k {
            amp
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

pub fn build_dicke_state(n: usize, k: usize) -> Result<DensityMatrix> {
    DensityMatrix::pure(n, &dicke_vector(n, k)?)
}

/// A Hamiltonian term acting on `support` (0-based, ascending).
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub support: Vec<usize>,
    pub local: HermitianOperator,
    /// Half the spectral width of `local`: its operator norm after the
    /// optimal identity shift.
    pub omega: f64,
}

#[derive(Clone, Debug)]
pub struct ParentHamiltonian {
    pub h: HermitianOperator,
    pub local_terms: Vec<LocalTerm>,
    pub spectrum: SpectralGap,
    pub omega_max: f64,
    /// `2 sqrt(omega_max / gap)`.
    pub coefficient: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParentSummary {
    pub ground_energy: f64,
    pub gap: f64,
    pub ground_degeneracy: usize,
    pub omega_max: f64,
    pub coefficient: f64,
    pub n_terms: usize,
}

impl ParentHamiltonian {
    fn from_terms(n: usize, terms: Vec<(Vec<usize>, HermitianOperator)>) -> Result<Self> {
        let d = 1usize << n;
        let mut h = CMatrix::zeros(d, d);
        let mut local_terms = Vec::with_capacity(terms.len());
        for (support, local) in terms {
            h += embed_local(local.matrix(), &support, n)?;
            let ev = local.eigenvalues();
            let omega = (ev[ev.len() - 1] - ev[0]) / 2.0;
            local_terms.push(LocalTerm { support, local, omega });
        }
        let h = HermitianOperator::new(n, h)?;
        let spectrum = spectral_gap(&h);
        let omega_max = local_terms.iter().map(|t| t.omega).fold(0.0, f64::max);
        let coefficient = if spectrum.gap > 0.0 {
            2.0 * (omega_max / spectrum.gap).sqrt()
        } else {
            f64::INFINITY
        };
        Ok(Self {
            h,
            local_terms,
            spectrum,
            omega_max,
            coefficient,
        })
    }

    pub fn summary(&self) -> ParentSummary {
        ParentSummary {
            ground_energy: self.spectrum.ground_energy,
            gap: self.spectrum.gap,
            ground_degeneracy: self.spectrum.ground_degeneracy,
            omega_max: self.omega_max,
            coefficient: self.coefficient,
            n_terms: self.local_terms.len(),
        }
    }

    /// Whether every term is supported inside some subset of `s`.
    pub fn covered_by(&self, s: &SubsystemCollection) -> bool {
        self.local_terms
            .iter()
            .all(|t| s.subsets().iter().any(|sk| t.support.iter().all(|q| sk.contains(q))))
    }

    /// `<rho, H> - E_0`; zero exactly when `rho` lies in the ground space.
    pub fn excess_energy(&self, rho: &DensityMatrix) -> f64 {
        self.h.hs_inner(rho.op()) - self.spectrum.ground_energy
    }

    /// Sum over terms (with multiplicity) of `||Tr_{rest}(delta)||_1`.
    pub fn term_marginal_norm(&self, delta: &HermitianOperator) -> Result<f64> {
        self.local_terms
            .iter()
            .map(|t| Ok(partial_trace(delta, &t.support)?.trace_norm()))
            .sum()
    }
}

/// `H = sum_i (I - g_i)/2`.
pub fn stabilizer_parent_hamiltonian(gens: &[PauliString]) -> Result<ParentHamiltonian> {
    let n = validate_stabilizer(gens)?;
    let terms = gens
        .iter()
        .map(|g| {
            let support = g.support();
            let p = g.local_matrix();
            let dk = p.nrows();
            let local = (CMatrix::identity(dk, dk) - p) * C64::new(0.5, 0.0);
            Ok((support.clone(), HermitianOperator::new(support.len(), local)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ParentHamiltonian::from_terms(n, terms)
}

/// Two-qubit term of the Dicke parent Hamiltonian:
/// `Π⁻ + ZZ/2 - a (Z⊗I + I⊗Z) + c I`, with `a = (n-2k)/(2(n-1))` and the
/// constant `(n + (n-2k)^2)/4` shared equally among the pairs.
pub fn dicke_pair_term(n: usize, k: usize) -> Result<HermitianOperator> {
    check_dicke(n, k)?;
    let c = n as f64 - 2.0 * k as f64;
    let a = c / (2.0 * (n as f64 - 1.0));
    let pairs = (n * (n - 1) / 2) as f64;
    let shift = (n as f64 + c * c) / 4.0 / pairs;
    let r = |x: f64| C64::new(x, 0.0);
    // basis |00>, |01>, |10>, |11>; Π⁻ = (I - SWAP)/2
    let mut m = CMatrix::zeros(4, 4);
    let zz = [1.0, -1.0, -1.0, 1.0];
    let z_sum = [2.0, 0.0, 0.0, -2.0];
    for i in 0..4 {
        m[(i, i)] = r(0.5 * zz[i] - a * z_sum[i] + shift);
    }
    m[(1, 1)] += r(0.5);
    m[(2, 2)] += r(0.5);
    m[(1, 2)] = r(-0.5);
    m[(2, 1)] = r(-0.5);
    HermitianOperator::new(2, m)
}

pub fn dicke_parent_hamiltonian(n: usize, k: usize) -> Result<ParentHamiltonian> {
    let term = dicke_pair_term(n, k)?;
    let mut terms = vec![];
    for i in 0..n {
        for j in (i + 1)..n {
            terms.push((vec![i, j], term.clone()));
        }
    }
    ParentHamiltonian::from_terms(n, terms)
}

/// `1/2 + |n - 2k| / (2(n-1))`.
pub fn dicke_omega(n: usize, k: usize) -> Result<f64> {
    check_dicke(n, k)?;
    Ok(0.5 + (n as f64 - 2.0 * k as f64).abs() / (2.0 * (n as f64 - 1.0)))
}

/// `sqrt(2 + 2|n - 2k| / (n-1))`, i.e. `2 sqrt(omega)` at unit gap.
pub fn dicke_coefficient(n: usize, k: usize) -> Result<f64> {
    Ok(2.0 * dicke_omega(n, k)?.sqrt())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SqrtBound {
    pub bound: f64,
    pub actual: f64,
    pub marginal_norm: f64,
    pub holds: bool,
}

/// Compares `||sigma - rho||_1` with `2 sqrt(omega_max / gap) * sqrt(eps)`,
/// where `eps` is the marginal norm of `sigma - rho` over the term supports.
pub fn square_root_bound(
    ph: &ParentHamiltonian,
    sigma: &DensityMatrix,
    rho: &DensityMatrix,
) -> Result<SqrtBound> {
    let delta = sigma.op().sub(rho.op())?;
    let eps = ph.term_marginal_norm(&delta)?;
    let bound = ph.coefficient * eps.sqrt();
    let actual = delta.trace_norm();
    Ok(SqrtBound {
        bound,
        actual,
        marginal_norm: eps,
        holds: actual <= bound,
    })
}
