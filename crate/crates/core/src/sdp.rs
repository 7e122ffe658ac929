//! Conic program assembly on top of the Clarabel interior-point solver.
//!
//! Programs are stated as: minimize `q·x` subject to affine expressions
//! lying in zero, second-order, or Hermitian PSD cones. Hermitian blocks are
//! passed to the solver through the real embedding
//! `[[Re U, -Im U], [Im U, Re U]]`, which is PSD exactly when `U` is.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Once;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use nalgebra::DMatrix;
use std::f64::consts::FRAC_1_SQRT_2;

extern "C" {
    fn openblas_set_num_threads(num_threads: std::os::raw::c_int);
}

static BLAS_INIT: Once = Once::new();

fn single_threaded_blas() {
    // Solver blocks are small; BLAS threading only adds nondeterminism and
    // oversubscription when callers fan out over runs.
    BLAS_INIT.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// A sparse affine expression `sum_j a_j x_j + c`.
#[derive(Clone, Debug, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![],
            constant: c,
        }
    }

    pub fn var(j: usize, a: f64) -> Self {
        Self {
            terms: vec![(j, a)],
            constant: 0.0,
        }
    }
}

/// An `m x m` Hermitian matrix affine in the variables, given in the real
/// vectorization coordinates of [`crate::linalg::vectorize_matrix`].
#[derive(Clone, Debug)]
pub struct HermitianAffine {
    pub m: usize,
    pub constant: Vec<f64>,
    /// `(variable, sparse coordinates)` pairs.
    pub terms: Vec<(usize, Vec<(usize, f64)>)>,
}

impl HermitianAffine {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            constant: vec![0.0; m * m],
            terms: vec![],
        }
    }

    /// Adds `x_var * I`.
    pub fn add_identity_term(&mut self, var: usize, scale: f64) {
        self.terms
            .push((var, (0..self.m).map(|i| (i, scale)).collect()));
    }

    pub fn add_dense_term(&mut self, var: usize, coords: &[f64]) {
        let sparse = coords
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        self.terms.push((var, sparse));
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Absolute and relative gap / feasibility tolerance handed to Clarabel.
    pub accuracy: f64,
    pub max_iter: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            accuracy: 1e-9,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    AlmostSolved,
    PrimalInfeasible,
    DualInfeasible,
    Failed(String),
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, SolveStatus::Solved | SolveStatus::AlmostSolved)
    }

    pub fn label(&self) -> String {
        match self {
            SolveStatus::Solved => "solved".into(),
            SolveStatus::AlmostSolved => "almost_solved".into(),
            SolveStatus::PrimalInfeasible => "primal_infeasible".into(),
            SolveStatus::DualInfeasible => "dual_infeasible".into(),
            SolveStatus::Failed(s) => format!("failed:{s}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Dual variables, one per constraint row.
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

impl ConicSolution {
    /// Errors unless the solver reached (near-)optimality.
    pub fn require_optimal(self, context: &str) -> Result<Self> {
        if self.status.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                context: context.to_string(),
                status: self.status.label(),
            })
        }
    }
}

/// Location of a Hermitian PSD block among the constraint rows.
#[derive(Clone, Copy, Debug)]
pub struct PsdBlock {
    pub offset: usize,
    pub m: usize,
}

impl ConicSolution {
    /// The Hermitian dual matrix `Z` of a PSD block, normalized so that
    /// `Tr(K Z)` equals the pairing of the block's coefficient `K` with the
    /// dual. For embedded dual `W = [[W11, W12], [W21, W22]]` this is
    /// `(W11 + W22) + i (W21 - W12)`.
    pub fn hermitian_dual(&self, block: PsdBlock) -> CMatrix {
        let m = block.m;
        let big = 2 * m;
        let mut w = DMatrix::<f64>::zeros(big, big);
        for col in 0..big {
            for row in 0..=col {
                let v = self.z[block.offset + tri_index(row, col)];
                if row == col {
                    w[(row, col)] = v;
                } else {
                    w[(row, col)] = v * FRAC_1_SQRT_2;
                    w[(col, row)] = v * FRAC_1_SQRT_2;
                }
            }
        }
        CMatrix::from_fn(m, m, |j, k| {
            C64::new(
                w[(j, k)] + w[(m + j, m + k)],
                w[(m + j, k)] - w[(j, m + k)],
            )
        })
    }
}

/// Row-major accumulation of `s = b - A x`, `s` in a product cone.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    n_vars: usize,
    q: Vec<f64>,
    rows: Vec<BTreeMap<usize, f64>>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl ConicProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            q: vec![0.0; n_vars],
            rows: vec![],
            b: vec![],
            cones: vec![],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds `coef * x_var` to the minimized objective.
    pub fn minimize(&mut self, var: usize, coef: f64) {
        self.q[var] += coef;
    }

    fn push_row(&mut self, expr: &Affine) {
        let mut row = BTreeMap::new();
        for &(j, a) in &expr.terms {
            assert!(j < self.n_vars, "variable {j} out of range");
            *row.entry(j).or_insert(0.0) -= a;
        }
        self.rows.push(row);
        self.b.push(expr.constant);
    }

    /// Each expression must vanish.
    pub fn add_zero(&mut self, exprs: &[Affine]) {
        if exprs.is_empty() {
            return;
        }
        for e in exprs {
            self.push_row(e);
        }
        self.cones.push(SupportedConeT::ZeroConeT(exprs.len()));
    }

    /// `exprs[0] >= ||exprs[1..]||_2`.
    pub fn add_soc(&mut self, exprs: &[Affine]) {
        assert!(exprs.len() >= 2, "second-order cone needs at least two rows");
        for e in exprs {
            self.push_row(e);
        }
        self.cones.push(SupportedConeT::SecondOrderConeT(exprs.len()));
    }

    pub fn add_nonneg(&mut self, exprs: &[Affine]) {
        if exprs.is_empty() {
            return;
        }
        for e in exprs {
            self.push_row(e);
        }
        self.cones.push(SupportedConeT::NonnegativeConeT(exprs.len()));
    }

    /// The Hermitian matrix expression must be positive semidefinite.
    pub fn add_hermitian_psd(&mut self, block: &HermitianAffine) -> PsdBlock {
        let m = block.m;
        let offset = self.rows.len();
        let big = 2 * m;
        let n_tri = big * (big + 1) / 2;
        let map = embedding_map(m);
        let mut exprs: Vec<Affine> = (0..n_tri).map(|_| Affine::default()).collect();
        for (coord, &c) in block.constant.iter().enumerate() {
            if c != 0.0 {
                for &(t, s) in &map[coord] {
                    exprs[t].constant += s * c;
                }
            }
        }
        for (var, coords) in &block.terms {
            for &(coord, v) in coords {
                for &(t, s) in &map[coord] {
                    exprs[t].terms.push((*var, s * v));
                }
            }
        }
        for e in &exprs {
            self.push_row(e);
        }
        self.cones.push(SupportedConeT::PSDTriangleConeT(big));
        PsdBlock { offset, m }
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<ConicSolution> {
        single_threaded_blas();
        let m = self.rows.len();
        let n = self.n_vars;
        let (mut ii, mut jj, mut vv) = (vec![], vec![], vec![]);
        for (r, row) in self.rows.iter().enumerate() {
            for (&c, &v) in row {
                if v != 0.0 {
                    ii.push(r);
                    jj.push(c);
                    vv.push(v);
                }
            }
        }
        let a = CscMatrix::new_from_triplets(m, n, ii, jj, vv);
        let p = CscMatrix::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(opts.max_iter)
            .tol_gap_abs(opts.accuracy)
            .tol_gap_rel(opts.accuracy)
            .tol_feas(opts.accuracy)
            .build()
            .map_err(|e| Error::Solver {
                context: "settings".into(),
                status: format!("{e:?}"),
            })?;
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &self.b, &self.cones, settings)
            .map_err(|e| Error::Solver {
                context: "setup".into(),
                status: format!("{e:?}"),
            })?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Solved,
            SolverStatus::AlmostSolved => SolveStatus::AlmostSolved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::PrimalInfeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::DualInfeasible
            }
            other => SolveStatus::Failed(format!("{other:?}")),
        };
        Ok(ConicSolution {
            status,
            x: sol.x.clone(),
            z: sol.z.clone(),
            objective: sol.obj_val,
            iterations: sol.iterations,
        })
    }
}

/// Column-major upper-triangle position of `(row, col)`, `row <= col`.
fn tri_index(row: usize, col: usize) -> usize {
    debug_assert!(row <= col);
    col * (col + 1) / 2 + row
}

/// For each vectorization coordinate of an `m x m` Hermitian matrix, the
/// scaled-triangle entries of the `2m x 2m` real embedding it feeds, with
/// their coefficients. Off-diagonal triangle entries carry a sqrt(2) factor,
/// which cancels the 1/sqrt(2) of the pair coordinates.
fn embedding_map(m: usize) -> Vec<Vec<(usize, f64)>> {
    let mut map = vec![Vec::new(); m * m];
    for (i, slot) in map.iter_mut().enumerate().take(m) {
        *slot = vec![(tri_index(i, i), 1.0), (tri_index(m + i, m + i), 1.0)];
    }
    let off = m + m * (m - 1) / 2;
    let mut p = 0;
    for j in 0..m {
        for k in (j + 1)..m {
            // Re U_jk sits at (j,k) and (m+j, m+k)
            map[m + p] = vec![(tri_index(j, k), 1.0), (tri_index(m + j, m + k), 1.0)];
            // Im U_jk sits at (k, m+j) with +, and at (j, m+k) with -
            map[off + p] = vec![(tri_index(k, m + j), 1.0), (tri_index(j, m + k), -1.0)];
            p += 1;
        }
    }
    map
}
