//! Deviation families around a target state and log-log scaling fits of
//! their marginal and global distances.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, support_split, CMatrix, DensityMatrix, HermitianOperator, C64};
use crate::marginal::{marginal_norm, SubsystemCollection};
use crate::states::{check_dicke, dicke_vector};

/// `10^-1, 10^-1.5, ..., 10^-3`.
pub fn default_t_grid() -> Vec<f64> {
    (0..5).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect()
}

pub const MARGINAL_WINDOW: (f64, f64) = (1.9, 2.1);
pub const GLOBAL_WINDOW: (f64, f64) = (0.95, 1.05);

/// Points whose norms fall below this are treated as numerical zeros.
pub const NORM_FLOOR: f64 = 1e-13;

/// States `sigma(t) = rho + t X + O(t^2)` built from a tangent direction `X`.
///
/// In the basis (support of `rho`, then kernel) with blocks `X11, X10, X00`,
/// `A(t) = rho11 + t X11` and the kernel corner is completed by its Schur
/// complement: `[[A, t X10], [t X01, t X00 + t^2 X01 A^-1 X10]]`, then
/// normalized. Negative eigenvalues of `X00` (solver noise) are clipped.
pub fn tangential_state(rho: &DensityMatrix, x: &HermitianOperator, t: f64, rank_tol: f64) -> Result<DensityMatrix> {
    if x.n_qubits() != rho.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_qubits(),
            found: x.n_qubits(),
        });
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidInput(format!("t must be a finite nonnegative number, got {t}")));
    }
    let scale = x.hs_norm().max(1.0);
    if x.trace().abs() > 1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "direction must be traceless (trace {:.3e})",
            x.trace()
        )));
    }
    if t == 0.0 {
        return Ok(rho.clone());
    }
    let split = support_split(rho, rank_tol)?;
    let (u, v) = (&split.support, &split.kernel);
    let (r, m) = (split.rank(), split.kernel_dim());
    let xm = x.matrix();
    let x11 = u.adjoint() * xm * u;
    let x10 = u.adjoint() * xm * v;
    let x00 = clip_negative(&(v.adjoint() * xm * v), scale)?;

    let mut a = x11 * C64::new(t, 0.0);
    for i in 0..r {
        a[(i, i)] += C64::new(split.support_values[i], 0.0);
    }
    let ea = eigh(&a);
    let top = ea.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if ea.values[0] <= 1e-14 * top.max(f64::MIN_POSITIVE) {
        return Err(Error::TTooLarge { t });
    }
    let inv_vals = DVector::from_iterator(r, ea.values.iter().map(|v| C64::new(1.0 / v, 0.0)));
    let a_inv = &ea.vectors * CMatrix::from_diagonal(&inv_vals) * ea.vectors.adjoint();

    let tc = C64::new(t, 0.0);
    let corner = x00 * tc + x10.adjoint() * &a_inv * &x10 * C64::new(t * t, 0.0);
    let d = rho.dim();
    let mut block = CMatrix::zeros(d, d);
    block.view_mut((0, 0), (r, r)).copy_from(&a);
    block.view_mut((0, r), (r, m)).copy_from(&(&x10 * tc));
    block.view_mut((r, 0), (m, r)).copy_from(&(x10.adjoint() * tc));
    block.view_mut((r, r), (m, m)).copy_from(&corner);

    let mut w = CMatrix::zeros(d, d);
    w.view_mut((0, 0), (d, r)).copy_from(u);
    w.view_mut((0, r), (d, m)).copy_from(v);
    let full = &w * block * w.adjoint();
    let op = HermitianOperator::new(rho.n_qubits(), full)?;
    let tr = op.trace();
    DensityMatrix::new(op.scale(1.0 / tr))
}

fn clip_negative(block: &CMatrix, scale: f64) -> Result<CMatrix> {
    let m = block.nrows();
    if m == 0 {
        return Ok(block.clone());
    }
    let e = eigh(block);
    if e.values[0] < -1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "direction leaves the tangent cone: kernel block has eigenvalue {:.3e}",
            e.values[0]
        )));
    }
    let vals = DVector::from_iterator(m, e.values.iter().map(|v| C64::new(v.max(0.0), 0.0)));
    Ok(&e.vectors * CMatrix::from_diagonal(&vals) * e.vectors.adjoint())
}

/// A weight `l` with `|l - k| >= 3`: `k + 3` when it fits, else `k - 3`.
pub fn counterexample_weight(n: usize, k: usize) -> Option<usize> {
    if k + 3 <= n {
        Some(k + 3)
    } else if k >= 3 {
        Some(k - 3)
    } else {
        None
    }
}

/// Lexicographically first `n`-bit string of weight `l`, `0...01...1`.
pub fn first_weight_string(l: usize) -> usize {
    (1usize << l) - 1
}

/// `sqrt(1 - t^2) |D(n,k)> + t |x>` with `x` the first weight-`l` string.
/// Pair marginals pick up no cross terms because the weights differ by at
/// least three.
pub fn dicke_counterexample(n: usize, k: usize, l: usize, t: f64) -> Result<DensityMatrix> {
    check_dicke(n, k)?;
    if counterexample_weight(n, k).is_none() {
        return Err(Error::NoCounterexample { n, k });
    }
    if l > n || l.abs_diff(k) < 3 {
        return Err(Error::InvalidInput(format!(
            "weight {l} must satisfy 0 <= l <= {n} and |l - {k}| >= 3"
        )));
    }
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("t must lie in [0, 1), got {t}")));
    }
    let mut psi = dicke_vector(n, k)? * C64::new((1.0 - t * t).sqrt(), 0.0);
    psi[first_weight_string(l)] += C64::new(t, 0.0);
    DensityMatrix::pure(n, &psi)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidInput(format!("need at least two aligned points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub t_values: Vec<f64>,
    pub marginal_norms: Vec<f64>,
    pub global_norms: Vec<f64>,
    pub slope_marginal: f64,
    pub slope_global: f64,
    pub r_squared_marginal: f64,
    pub r_squared_global: f64,
    /// `t` values whose norms were numerically zero and left out of the fits.
    pub dropped: Vec<f64>,
    pub basis: String,
}

impl ScalingReport {
    pub fn within_windows(&self) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(self.slope_marginal, MARGINAL_WINDOW) && inside(self.slope_global, GLOBAL_WINDOW)
    }

    /// Raw points as CSV; fit parameters in trailing comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,marginal_norm,global_norm\n");
        for ((t, m), g) in self.t_values.iter().zip(&self.marginal_norms).zip(&self.global_norms) {
            out.push_str(&format!("{t:e},{m:e},{g:e}\n"));
        }
        out.push_str(&format!(
            "# slope_marginal={} r2={}\n# slope_global={} r2={}\n",
            self.slope_marginal, self.r_squared_marginal, self.slope_global, self.r_squared_global
        ));
        out
    }
}

pub fn validate_t_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(Error::InvalidInput(format!("t grid needs at least 4 points, got {}", grid.len())));
    }
    if grid.iter().any(|&t| !t.is_finite() || t <= 0.0) {
        return Err(Error::InvalidInput("t grid values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("t grid must be strictly decreasing".into()));
    }
    if grid[0] / grid[grid.len() - 1] < 100.0 * (1.0 - 1e-9) {
        return Err(Error::InvalidInput("t grid must span at least two decades".into()));
    }
    Ok(())
}

/// Evaluates `family(t)` on the grid and fits log-log slopes of the
/// marginal norm and trace distance of `family(t) - rho`.
pub fn scaling_probe<F>(family: F, rho: &DensityMatrix, s: &SubsystemCollection, t_grid: &[f64]) -> Result<ScalingReport>
where
    F: Fn(f64) -> Result<DensityMatrix> + Sync,
{
    validate_t_grid(t_grid)?;
    let points = t_grid
        .par_iter()
        .map(|&t| {
            let sigma = family(t)?;
            let delta = sigma.op().sub(rho.op())?;
            Ok((t, marginal_norm(&delta, s)?, delta.trace_norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut kept = vec![];
    let mut dropped = vec![];
    for p in points {
        if p.1 < NORM_FLOOR || p.2 < NORM_FLOOR {
            log::warn!("dropping t = {:e}: norm below {NORM_FLOOR:e}", p.0);
            dropped.push(p.0);
        } else {
            kept.push(p);
        }
    }
    let lt: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let lm: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let lg: Vec<f64> = kept.iter().map(|p| p.2.ln()).collect();
    let fm = fit_line(&lt, &lm)?;
    let fg = fit_line(&lt, &lg)?;
    Ok(ScalingReport {
        t_values: kept.iter().map(|p| p.0).collect(),
        marginal_norms: kept.iter().map(|p| p.1).collect(),
        global_norms: kept.iter().map(|p| p.2).collect(),
        slope_marginal: fm.slope,
        slope_global: fg.slope,
        r_squared_marginal: fm.r_squared,
        r_squared_global: fg.r_squared,
        dropped,
        basis: "eigenbasis of rho: support first, then kernel".into(),
    })
}
