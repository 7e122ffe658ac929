//! Uniqueness check and linear-robustness certification.
//!
//! A pure target `rho` that is uniquely determined by its marginals on `S`
//! is linearly robust iff no nonzero direction in the tangent cone
//! `{X : Tr X = 0, P0 X P0 >= 0}` is invisible to the marginals. Two searches
//! decide this: `P_L` looks for invisible `X` with `P0 X P0 = 0` (a linear
//! problem), `P_S` for invisible `X` with `P0 X P0 >= 0` and unit trace on
//! the kernel block (a semidefinite problem).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{
    partial_trace_matrix, real_nullspace, support_split, vectorize_matrix, CMatrix, DensityMatrix,
    HermitianOperator, SupportSplit, C64,
};
use crate::marginal::{kernel_basis_pauli, kernel_basis_svd, marginal_norm, Construction, KernelBasis, SubsystemCollection};
use crate::sdp::{Affine, ConicProgram, HermitianAffine, SolverOptions};
use crate::states::StateSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Robust,
    NotRobust,
    NotUda,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Robust => 0,
            Verdict::NotRobust => 10,
            Verdict::NotUda => 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "UDA_CHECK")]
    UdaCheck,
    #[serde(rename = "P_L")]
    PL,
    #[serde(rename = "P_S")]
    PS,
    #[serde(rename = "STABILIZER_SHORTCUT")]
    StabilizerShortcut,
}

/// How `certify_linear` establishes uniqueness before searching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UdaMode {
    /// Parent-Hamiltonian certificate when one is available and covered by
    /// the marginals, the semidefinite program otherwise.
    Auto,
    Sdp,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlRoute {
    Auto,
    /// Nullspace of the marginal map on `{Tr X = 0, P0 X P0 = 0}`.
    Tangent,
    /// Nullspace of `c -> P0 (sum c_i K_i) P0` over the kernel basis.
    Kernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub rank_tol: f64,
    pub solver_tol: f64,
    pub coeff_bound: f64,
    pub uda: UdaMode,
    pub pl_route: PlRoute,
    /// Skip `P_S` for stabilizer targets.
    pub stabilizer_shortcut: bool,
    pub kernel: Construction,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-9,
            solver_tol: 1e-7,
            coeff_bound: 1e3,
            uda: UdaMode::Auto,
            pl_route: PlRoute::Auto,
            stabilizer_shortcut: true,
            kernel: Construction::PauliCombinatorial,
        }
    }
}

impl CertifyOptions {
    fn solver(&self) -> SolverOptions {
        SolverOptions {
            accuracy: (self.solver_tol * 1e-2).min(1e-9),
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UdaMethod {
    Sdp,
    ParentHamiltonian,
    Trivial,
    Skipped,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UdaOutcome {
    pub method: UdaMethod,
    pub is_uda: bool,
    /// `max Tr(rho (rho - sigma))` over compatible `sigma`, as certified by
    /// the repaired dual (an upper bound, clamped at zero).
    pub optimum: f64,
    /// The solver's primal objective, a lower estimate of the optimum.
    pub primal_value: Option<f64>,
    pub status: String,
    #[serde(skip)]
    pub witness: Option<DensityMatrix>,
    pub marginal_discrepancy: Option<f64>,
    /// The target is not pure; a zero optimum then does not prove uniqueness.
    pub mixed_target: bool,
}

/// Decides uniqueness by `max Tr(rho (rho - sigma))` over states `sigma`
/// sharing the marginals of `rho`, parametrized as `sigma = rho + sum c K`.
pub fn check_uda(rho: &DensityMatrix, s: &SubsystemCollection, opts: &CertifyOptions) -> Result<UdaOutcome> {
    if rho.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: s.n_qubits(),
            found: rho.n_qubits(),
        });
    }
    let mixed = rho.rank(opts.rank_tol) > 1;
    if mixed {
        log::warn!("target is mixed; a zero optimum does not certify uniqueness");
    }
    let k = kernel_basis_pauli(s);
    if k.is_empty() {
        return Ok(UdaOutcome {
            method: UdaMethod::Trivial,
            is_uda: true,
            optimum: 0.0,
            primal_value: None,
            status: "empty_kernel".into(),
            witness: None,
            marginal_discrepancy: None,
            mixed_target: mixed,
        });
    }
    let nk = k.len();
    let mut prog = ConicProgram::new(nk);
    let coeffs: Vec<f64> = (0..nk).into_par_iter().map(|i| k.expectation(i, rho.op().matrix())).collect();
    for (i, &c) in coeffs.iter().enumerate() {
        prog.minimize(i, c);
    }
    let mut block = HermitianAffine::new(rho.dim());
    block.constant = vectorize_matrix(rho.op().matrix());
    block.terms = (0..nk).into_par_iter().map(|i| (i, k.sparse_coords(i))).collect();
    let psd = prog.add_hermitian_psd(&block);
    let sol = prog.solve(&opts.solver())?.require_optimal("check_uda")?;
    let primal = -sol.objective;
    let optimum = dual_certificate(&sol.hermitian_dual(psd), rho, &k, &coeffs)?.max(0.0);
    let is_uda = optimum <= opts.solver_tol;
    let (witness, disc) = if is_uda {
        (None, None)
    } else {
        let sigma = rho.op().add(&k.combine(&sol.x)?)?;
        let w = DensityMatrix::from_approximate(&sigma)?;
        let disc = marginal_norm(&w.op().sub(rho.op())?, s)?;
        (Some(w), Some(disc))
    };
    Ok(UdaOutcome {
        method: UdaMethod::Sdp,
        is_uda,
        optimum,
        primal_value: Some(primal),
        status: sol.status.label(),
        witness,
        marginal_discrepancy: disc,
        mixed_target: mixed,
    })
}

/// Rigorous upper bound on `max Tr(rho (rho - sigma))` from an approximate
/// dual matrix `z`.
///
/// After projecting so that `Tr(K_i Z) = Tr(K_i rho)` for every invisible
/// direction, any compatible `sigma` has `Tr(Z (rho - sigma)) =
/// Tr(rho (rho - sigma))`, and `Tr(Z sigma) >= lambda_min(Z)`.
fn dual_certificate(z: &CMatrix, rho: &DensityMatrix, k: &KernelBasis, targets: &[f64]) -> Result<f64> {
    let n = rho.n_qubits();
    let z = HermitianOperator::from_matrix_unchecked(n, (z + z.adjoint()) * C64::new(0.5, 0.0));
    let residual: Vec<f64> = (0..k.len())
        .into_par_iter()
        .map(|i| k.expectation(i, z.matrix()) - targets[i])
        .collect();
    let repaired = z.sub(&k.combine(&residual)?)?;
    Ok(repaired.hs_inner(rho.op()) - repaired.min_eigenvalue())
}

/// Uniqueness from a gapped parent Hamiltonian whose terms are all visible:
/// a compatible `sigma` has the same energy as `rho`, hence lies in the
/// one-dimensional ground space.
pub fn parent_hamiltonian_uda(
    spec: &StateSpec,
    rho: &DensityMatrix,
    s: &SubsystemCollection,
) -> Result<Option<UdaOutcome>> {
    let Some(ph) = spec.parent_hamiltonian()? else {
        return Ok(None);
    };
    let excess = ph.excess_energy(rho);
    if !ph.covered_by(s) || ph.spectrum.ground_degeneracy != 1 || ph.spectrum.gap <= 0.0 || excess.abs() > 1e-9 {
        return Ok(None);
    }
    Ok(Some(UdaOutcome {
        method: UdaMethod::ParentHamiltonian,
        is_uda: true,
        optimum: excess.abs(),
        primal_value: None,
        status: format!("unique ground state, gap {:.6}", ph.spectrum.gap),
        witness: None,
        marginal_discrepancy: None,
        mixed_target: false,
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlOutcome {
    #[serde(skip)]
    pub witness: Option<HermitianOperator>,
    pub route: PlRoute,
    pub rows: usize,
    pub cols: usize,
    pub nullity: usize,
    pub smallest_retained_ratio: Option<f64>,
    pub largest_dropped_ratio: Option<f64>,
}

fn resolve_route(route: PlRoute, split: &SupportSplit, k: &KernelBasis) -> PlRoute {
    match route {
        PlRoute::Auto => {
            let (r, m) = (split.rank(), split.kernel_dim());
            let tangent = tangent_dim(r, m) * marginal_rows(k.collection());
            let kernel = m * m * k.len();
            if tangent <= kernel {
                PlRoute::Tangent
            } else {
                PlRoute::Kernel
            }
        }
        other => other,
    }
}

fn tangent_dim(r: usize, m: usize) -> usize {
    r * r - 1 + 2 * r * m
}

fn marginal_rows(s: &SubsystemCollection) -> usize {
    s.subsets().iter().map(|k| 1usize << (2 * k.len())).sum()
}

/// Element `j` of an HS-orthonormal basis of `{Tr X = 0, P0 X P0 = 0}`:
/// traceless Hermitian on the support, then support/kernel couplings.
fn tangent_element(split: &SupportSplit, j: usize) -> CMatrix {
    let u = &split.support;
    let v = &split.kernel;
    let (r, m) = (split.rank(), split.kernel_dim());
    let inner = r * r - 1;
    if j < inner {
        let a = traceless_basis(r, j);
        u * a * u.adjoint()
    } else {
        let idx = j - inner;
        let (pair, imag) = (idx / 2, idx % 2 == 1);
        let (a, b) = (pair / m, pair % m);
        let ua = u.column(a);
        let vb = v.column(b);
        let cross = ua * vb.adjoint();
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        if imag {
            (&cross - cross.adjoint()) * C64::new(0.0, FRAC_1_SQRT_2)
        } else {
            (&cross + cross.adjoint()) * s
        }
    }
}

/// Orthonormal traceless Hermitian `r x r` basis: off-diagonal pairs, then
/// the generalized Gell-Mann diagonals.
fn traceless_basis(r: usize, j: usize) -> CMatrix {
    let n_pairs = r * (r - 1) / 2;
    let mut out = CMatrix::zeros(r, r);
    if j < 2 * n_pairs {
        let (p, imag) = (j / 2, j % 2 == 1);
        let mut q = 0;
        for a in 0..r {
            for b in (a + 1)..r {
                if q == p {
                    let z = if imag {
                        C64::new(0.0, FRAC_1_SQRT_2)
                    } else {
                        C64::new(FRAC_1_SQRT_2, 0.0)
                    };
                    out[(a, b)] = z;
                    out[(b, a)] = z.conj();
                }
                q += 1;
            }
        }
    } else {
        let l = j - 2 * n_pairs + 1;
        let norm = ((l * (l + 1)) as f64).sqrt().recip();
        for a in 0..l {
            out[(a, a)] = C64::new(norm, 0.0);
        }
        out[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
    }
    out
}

fn stacked_marginals(x: &CMatrix, s: &SubsystemCollection) -> Vec<f64> {
    let mut col = Vec::with_capacity(marginal_rows(s));
    for keep in s.subsets() {
        let part = partial_trace_matrix(x, s.n_qubits(), keep).expect("validated subsets");
        col.extend(vectorize_matrix(&part));
    }
    col
}

/// Searches for a nonzero invisible `X` with `P0 X P0 = 0`.
///
/// The tangent route uses only the collection of `k` and assumes `k` spans
/// the whole invisible subspace; the kernel route searches `span(k)`.
pub fn program_pl(rho: &DensityMatrix, k: &KernelBasis, opts: &CertifyOptions) -> Result<PlOutcome> {
    let split = support_split(rho, opts.rank_tol)?;
    program_pl_split(rho, &split, k, opts)
}

fn program_pl_split(
    rho: &DensityMatrix,
    split: &SupportSplit,
    k: &KernelBasis,
    opts: &CertifyOptions,
) -> Result<PlOutcome> {
    let route = resolve_route(opts.pl_route, split, k);
    let empty = PlOutcome {
        witness: None,
        route,
        rows: 0,
        cols: 0,
        nullity: 0,
        smallest_retained_ratio: None,
        largest_dropped_ratio: None,
    };
    if k.is_empty() {
        return Ok(empty);
    }
    let n = rho.n_qubits();
    let (r, m) = (split.rank(), split.kernel_dim());
    if m == 0 {
        // P0 = 0: every invisible direction qualifies
        return Ok(PlOutcome {
            witness: Some(k.element(0)),
            nullity: k.len(),
            ..empty
        });
    }
    let (a, rows, cols) = match route {
        PlRoute::Tangent => {
            let cols = tangent_dim(r, m);
            let rows = marginal_rows(k.collection());
            let columns: Vec<Vec<f64>> = (0..cols)
                .into_par_iter()
                .map(|j| stacked_marginals(&tangent_element(split, j), k.collection()))
                .collect();
            (DMatrix::from_fn(rows, cols, |i, j| columns[j][i]), rows, cols)
        }
        _ => {
            let rows = m * m;
            let cols = k.len();
            let columns: Vec<Vec<f64>> = (0..cols)
                .into_par_iter()
                .map(|i| vectorize_matrix(&k.compress(i, &split.kernel)))
                .collect();
            (DMatrix::from_fn(rows, cols, |i, j| columns[j][i]), rows, cols)
        }
    };
    let ns = real_nullspace(&a, opts.rank_tol);
    let witness = if ns.dim() > 0 {
        let coeffs: Vec<f64> = ns.basis.column(0).iter().copied().collect();
        let x = match route {
            PlRoute::Tangent => {
                let d = rho.dim();
                let mut x = CMatrix::zeros(d, d);
                for (j, &c) in coeffs.iter().enumerate() {
                    if c != 0.0 {
                        x += tangent_element(split, j) * C64::new(c, 0.0);
                    }
                }
                HermitianOperator::new(n, x)?
            }
            _ => k.combine(&coeffs)?,
        };
        Some(x)
    } else {
        None
    };
    Ok(PlOutcome {
        witness,
        route,
        rows,
        cols,
        nullity: ns.dim(),
        smallest_retained_ratio: ns.smallest_retained_ratio(),
        largest_dropped_ratio: ns.largest_dropped_ratio(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsOutcome {
    #[serde(skip)]
    pub witness: Option<HermitianOperator>,
    pub status: String,
    /// Largest achievable `lambda_min(P0 X P0)` at unit kernel-block trace.
    pub optimum: Option<f64>,
    pub coeff_norm: Option<f64>,
    pub coeff_bound: f64,
    pub reran: bool,
}

/// Searches for invisible `X` with `P0 X P0 >= 0` and `Tr(P0 X P0) = 1` by
/// maximizing `t` subject to `Y(c) >= t I`, `Tr Y(c) = 1`, `||c|| <= R`.
pub fn program_ps(rho: &DensityMatrix, k: &KernelBasis, opts: &CertifyOptions) -> Result<PsOutcome> {
    let split = support_split(rho, opts.rank_tol)?;
    program_ps_split(&split, k, opts)
}

fn program_ps_split(split: &SupportSplit, k: &KernelBasis, opts: &CertifyOptions) -> Result<PsOutcome> {
    let m = split.kernel_dim();
    let none = |status: &str| PsOutcome {
        witness: None,
        status: status.into(),
        optimum: None,
        coeff_norm: None,
        coeff_bound: opts.coeff_bound,
        reran: false,
    };
    if k.is_empty() {
        return Ok(none("empty_kernel"));
    }
    if m == 0 {
        return Ok(none("full_rank"));
    }
    let ys: Vec<CMatrix> = (0..k.len()).into_par_iter().map(|i| k.compress(i, &split.kernel)).collect();
    let taus: Vec<f64> = ys.iter().map(|y| y.trace().re).collect();
    let tau_norm = taus.iter().map(|t| t * t).sum::<f64>().sqrt();
    if tau_norm < 1e-12 {
        return Ok(none("normalization_unreachable"));
    }
    let coords: Vec<Vec<(usize, f64)>> = ys
        .par_iter()
        .map(|y| {
            vectorize_matrix(y)
                .into_iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 1e-15)
                .collect()
        })
        .collect();

    let solve = |bound: f64| -> Result<(crate::sdp::ConicSolution, f64)> {
        let nk = ys.len();
        let t = nk;
        let mut prog = ConicProgram::new(nk + 1);
        prog.minimize(t, -1.0);
        prog.add_zero(&[Affine {
            terms: taus.iter().copied().enumerate().collect(),
            constant: -1.0,
        }]);
        let mut soc = vec![Affine::constant(bound)];
        soc.extend((0..nk).map(|i| Affine::var(i, 1.0)));
        prog.add_soc(&soc);
        let mut block = HermitianAffine::new(m);
        block.terms = coords.iter().cloned().enumerate().collect();
        block.add_identity_term(t, -1.0);
        prog.add_hermitian_psd(&block);
        let sol = prog.solve(&opts.solver())?;
        let norm = sol.x[..nk].iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok((sol, norm))
    };

    let mut bound = opts.coeff_bound;
    let (mut sol, mut norm) = solve(bound)?;
    let mut reran = false;
    if sol.status.is_optimal() && norm > 0.9 * bound {
        log::warn!("P_S coefficients near the bound ({norm:.3e} of {bound:.3e}); rerunning at 10R");
        bound *= 10.0;
        (sol, norm) = solve(bound)?;
        reran = true;
    }
    if matches!(sol.status, crate::sdp::SolveStatus::PrimalInfeasible) {
        return Ok(PsOutcome {
            reran,
            coeff_bound: bound,
            ..none("primal_infeasible")
        });
    }
    let sol = sol.require_optimal("P_S")?;
    let nk = ys.len();
    let t_star = sol.x[nk];
    let witness = if t_star >= -opts.solver_tol {
        Some(k.combine(&sol.x[..nk])?)
    } else {
        None
    };
    Ok(PsOutcome {
        witness,
        status: sol.status.label(),
        optimum: Some(t_star),
        coeff_norm: Some(norm),
        coeff_bound: bound,
        reran,
    })
}

/// `(log2((r^2 - 1) + 2 r (d - r)) - log2 M) / 2`; `-inf` when `r = d = 1`.
pub fn marginal_size_bound(r: usize, d: usize, m: usize) -> Result<f64> {
    if r == 0 || r > d || m == 0 {
        return Err(Error::InvalidInput(format!(
            "marginal size bound needs 1 <= r <= d and M >= 1, got r={r}, d={d}, M={m}"
        )));
    }
    let count = (r * r - 1 + 2 * r * (d - r)) as f64;
    if count == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((count.log2() - (m as f64).log2()) / 2.0)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank: f64,
    pub solver: f64,
    pub coeff_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: String,
    pub optimum: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WitnessChecks {
    pub trace: f64,
    pub hs_norm: f64,
    pub marginal_norm: f64,
    /// Smallest eigenvalue of the kernel block `V^† X V`.
    pub kernel_block_min_eigenvalue: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SizeCheck {
    pub max_subset_size: usize,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub state: String,
    pub n_qubits: usize,
    pub subsystems: Vec<Vec<usize>>,
    pub rank: usize,
    pub kernel_rank: usize,
    pub uda: Option<UdaOutcome>,
    pub p_l: Option<PlOutcome>,
    pub p_s: Option<PsOutcome>,
    pub witness_checks: Option<WitnessChecks>,
    pub marginal_size: SizeCheck,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificationVerdict {
    pub verdict: Verdict,
    pub stage: Stage,
    pub witness: Option<HermitianOperator>,
    pub kernel_dim: usize,
    pub tolerances: Tolerances,
    pub solver: SolverReport,
    pub diagnostics: Diagnostics,
}

impl CertificationVerdict {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }
}

pub fn witness_checks(
    x: &HermitianOperator,
    s: &SubsystemCollection,
    split: &SupportSplit,
) -> Result<WitnessChecks> {
    let block = split.kernel.adjoint() * x.matrix() * &split.kernel;
    let min_eig = (split.kernel_dim() > 0).then(|| {
        crate::linalg::eigh(&block).values[0]
    });
    Ok(WitnessChecks {
        trace: x.trace(),
        hs_norm: x.hs_norm(),
        marginal_norm: marginal_norm(x, s)?,
        kernel_block_min_eigenvalue: min_eig,
    })
}

/// Uniqueness check, then `P_L`, then `P_S` (skipped for stabilizer targets
/// when the shortcut is enabled).
pub fn certify_linear(
    spec: &StateSpec,
    s: &SubsystemCollection,
    opts: &CertifyOptions,
) -> Result<CertificationVerdict> {
    let rho = spec.materialize()?;
    certify_state(&rho, spec, s, opts)
}

/// As [`certify_linear`] with the state already materialized.
pub fn certify_state(
    rho: &DensityMatrix,
    spec: &StateSpec,
    s: &SubsystemCollection,
    opts: &CertifyOptions,
) -> Result<CertificationVerdict> {
    if rho.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: s.n_qubits(),
            found: rho.n_qubits(),
        });
    }
    let mut warnings = vec![];
    let split = support_split(rho, opts.rank_tol)?;
    let d = rho.dim();
    let r = split.rank();
    let size_bound = marginal_size_bound(r, d, s.len())?;
    let tolerances = Tolerances {
        rank: opts.rank_tol,
        solver: opts.solver_tol,
        coeff_bound: opts.coeff_bound,
    };
    let mut diag = Diagnostics {
        state: spec.label(),
        n_qubits: rho.n_qubits(),
        subsystems: s.to_one_based(),
        rank: r,
        kernel_rank: split.kernel_dim(),
        uda: None,
        p_l: None,
        p_s: None,
        witness_checks: None,
        marginal_size: SizeCheck {
            max_subset_size: s.max_subset_size(),
            bound: size_bound,
            satisfied: s.max_subset_size() as f64 >= size_bound,
        },
        warnings: vec![],
    };
    if r > 1 {
        warnings.push(format!("target has rank {r}; uniqueness theory assumes a pure state"));
    }

    let uda = match opts.uda {
        UdaMode::Skip => None,
        UdaMode::Sdp => Some(check_uda(rho, s, opts)?),
        UdaMode::Auto => match parent_hamiltonian_uda(spec, rho, s)? {
            Some(u) => Some(u),
            None => Some(check_uda(rho, s, opts)?),
        },
    };
    if let Some(u) = &uda {
        if u.mixed_target {
            warnings.push("uniqueness check ran on a mixed target".into());
        }
        if !u.is_uda {
            let witness = u.witness.clone().map(DensityMatrix::into_op);
            let solver = SolverReport {
                status: u.status.clone(),
                optimum: Some(u.optimum),
            };
            diag.uda = uda.clone();
            diag.warnings = warnings;
            return Ok(CertificationVerdict {
                verdict: Verdict::NotUda,
                stage: Stage::UdaCheck,
                witness,
                kernel_dim: kernel_for(s, opts).len(),
                tolerances,
                solver,
                diagnostics: diag,
            });
        }
    }
    diag.uda = uda;

    let k = kernel_for(s, opts);
    let kernel_dim = k.len();
    let pl = program_pl_split(rho, &split, &k, opts)?;
    let pl_solver = SolverReport {
        status: format!("nullity {}", pl.nullity),
        optimum: pl.largest_dropped_ratio.or(pl.smallest_retained_ratio),
    };
    if let Some(x) = pl.witness.clone() {
        diag.witness_checks = Some(witness_checks(&x, s, &split)?);
        diag.p_l = Some(pl);
        diag.warnings = warnings;
        return Ok(CertificationVerdict {
            verdict: Verdict::NotRobust,
            stage: Stage::PL,
            witness: Some(x),
            kernel_dim,
            tolerances,
            solver: pl_solver,
            diagnostics: diag,
        });
    }
    diag.p_l = Some(pl);

    if spec.is_stabilizer() && opts.stabilizer_shortcut {
        diag.warnings = warnings;
        return Ok(CertificationVerdict {
            verdict: Verdict::Robust,
            stage: Stage::StabilizerShortcut,
            witness: None,
            kernel_dim,
            tolerances,
            solver: pl_solver,
            diagnostics: diag,
        });
    }

    let ps = program_ps_split(&split, &k, opts)?;
    if ps.reran {
        warnings.push(format!("P_S coefficient bound raised to {:.1e}", ps.coeff_bound));
    }
    let solver = SolverReport {
        status: ps.status.clone(),
        optimum: ps.optimum,
    };
    let witness = ps.witness.clone();
    if let Some(x) = &witness {
        diag.witness_checks = Some(witness_checks(x, s, &split)?);
    }
    diag.p_s = Some(ps);
    diag.warnings = warnings;
    Ok(CertificationVerdict {
        verdict: if witness.is_some() {
            Verdict::NotRobust
        } else {
            Verdict::Robust
        },
        stage: Stage::PS,
        witness,
        kernel_dim,
        tolerances,
        solver,
        diagnostics: diag,
    })
}

fn kernel_for(s: &SubsystemCollection, opts: &CertifyOptions) -> KernelBasis {
    match opts.kernel {
        Construction::PauliCombinatorial => kernel_basis_pauli(s),
        Construction::SvdNullspace => kernel_basis_svd(s, opts.rank_tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_bound_values() {
        // one qubit, pure: tangent directions r^2 - 1 + 2r(d - r) = 2
        assert!((marginal_size_bound(1, 2, 1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(marginal_size_bound(1, 1, 1).unwrap(), f64::NEG_INFINITY);
        let ring7 = marginal_size_bound(1, 128, 7).unwrap();
        assert!((ring7 - (254f64.log2() - 7f64.log2()) / 2.0).abs() < 1e-14);
        assert!(ring7 <= 3.0);
        // pure states: within 1/2 above the looser (n - log2 M)/2
        for n in 1..=8 {
            for m in [1, 3, 7, 21] {
                let v = marginal_size_bound(1, 1 << n, m).unwrap();
                let loose = (n as f64 - (m as f64).log2()) / 2.0;
                assert!(v >= loose && v <= loose + 0.5 + 1e-12);
            }
        }
        assert!(marginal_size_bound(0, 2, 1).is_err());
        assert!(marginal_size_bound(3, 2, 1).is_err());
    }

    #[test]
    fn traceless_basis_is_orthonormal() {
        for r in 1..5 {
            let els: Vec<CMatrix> = (0..r * r - 1).map(|j| traceless_basis(r, j)).collect();
            for (i, a) in els.iter().enumerate() {
                assert!(a.trace().norm() < 1e-14);
                for (j, b) in els.iter().enumerate() {
                    let ip = crate::linalg::hs_inner(a, b);
                    assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
        }
    }
}
