//! Two-local fidelity witness for genuine multipartite entanglement of
//! Dicke targets.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{partial_trace, permute_qubits, DensityMatrix, HermitianOperator};
use crate::states::{build_dicke_state, check_dicke, dicke_omega};

/// Maximal overlap of `D(n,k)` with biseparable states.
pub fn beta_dicke(n: usize, k: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("witness needs n >= 3, got {n}")));
    }
    check_dicke(n, k)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok(if 2 * k < n {
        (nf - kf) / nf
    } else if 2 * k == n {
        nf / (2.0 * (nf - 1.0))
    } else {
        kf / nf
    })
}

/// Largest total pair-marginal trace distance that still certifies GME:
/// `(1 - beta) / omega`.
pub fn gme_threshold(n: usize, k: usize) -> Result<f64> {
    beta_dicke(n, k)?;
    // 1 - beta as a single quotient, so rational thresholds round once
    let (nf, kf) = (n as f64, k as f64);
    let gap = if 2 * k < n {
        kf / nf
    } else if 2 * k == n {
        (nf - 2.0) / (2.0 * (nf - 1.0))
    } else {
        (nf - kf) / nf
    };
    Ok(gap / dicke_omega(n, k)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub n: usize,
    pub k: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairEntry {
    /// 1-based qubit labels.
    pub pair: [usize; 2],
    pub matrix: HermitianOperator,
}

/// On-disk form of measured two-qubit marginals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GmeInput {
    pub n: usize,
    #[serde(default)]
    pub target: Option<Target>,
    pub marginals: Vec<PairEntry>,
}

/// Two-qubit states keyed by 0-based pairs `(i, j)`, `i < j`.
#[derive(Clone, Debug)]
pub struct MeasuredMarginals {
    pub n: usize,
    pub entries: BTreeMap<(usize, usize), DensityMatrix>,
}

/// Trace and positivity slack accepted on measured data.
pub const DATA_TOL: f64 = 1e-8;

impl MeasuredMarginals {
    pub fn from_input(input: &GmeInput) -> Result<Self> {
        let n = input.n;
        if n < 2 {
            return Err(Error::InvalidInput(format!("n must be at least 2, got {n}")));
        }
        let mut entries = BTreeMap::new();
        for (idx, e) in input.marginals.iter().enumerate() {
            let [a, b] = e.pair;
            if a == 0 || b == 0 || a > n || b > n || a == b {
                return Err(Error::InvalidInput(format!(
                    "marginals[{idx}].pair: invalid pair [{a},{b}] for n = {n}"
                )));
            }
            if e.matrix.n_qubits() != 2 {
                return Err(Error::InvalidInput(format!(
                    "marginals[{idx}].matrix: expected a 2-qubit matrix"
                )));
            }
            // store with the smaller label first
            let op = if a < b {
                e.matrix.clone()
            } else {
                permute_qubits(&e.matrix, &[1, 0])?
            };
            let rho = DensityMatrix::with_tolerance(op, DATA_TOL).map_err(|err| {
                Error::InvalidInput(format!("marginals[{idx}].matrix: {err}"))
            })?;
            let key = (a.min(b) - 1, a.max(b) - 1);
            if entries.insert(key, rho).is_some() {
                return Err(Error::InvalidInput(format!(
                    "marginals[{idx}].pair: duplicate pair [{},{}]",
                    key.0 + 1,
                    key.1 + 1
                )));
            }
        }
        Ok(Self { n, entries })
    }

    /// All pair marginals of a global state.
    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        let n = rho.n_qubits();
        let mut entries = BTreeMap::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let op = partial_trace(rho.op(), &[i, j])?;
                entries.insert((i, j), DensityMatrix::with_tolerance(op, DATA_TOL)?);
            }
        }
        Ok(Self { n, entries })
    }

    pub fn to_input(&self, target: Option<Target>) -> GmeInput {
        GmeInput {
            n: self.n,
            target,
            marginals: self
                .entries
                .iter()
                .map(|(&(i, j), rho)| PairEntry {
                    pair: [i + 1, j + 1],
                    matrix: rho.op().clone(),
                })
                .collect(),
        }
    }

    /// Absent pairs, 1-based.
    pub fn missing_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = vec![];
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.entries.contains_key(&(i, j)) {
                    out.push((i + 1, j + 1));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairDistance {
    pub pair: [usize; 2],
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GmeReport {
    pub target: Target,
    pub beta: f64,
    pub omega: f64,
    pub threshold: f64,
    pub measured_discrepancy: f64,
    /// `threshold - measured_discrepancy`; positive when certified.
    pub margin: f64,
    pub fidelity_lower_bound: f64,
    pub certified: bool,
    pub pairs: Vec<PairDistance>,
}

/// Sums pair trace distances to the Dicke marginals and compares with the
/// threshold; ties do not certify.
pub fn evaluate_gme(data: &MeasuredMarginals, n: usize, k: usize) -> Result<GmeReport> {
    if data.n != n {
        return Err(Error::InvalidInput(format!(
            "data describe {} qubits, target has {n}",
            data.n
        )));
    }
    let beta = beta_dicke(n, k)?;
    let omega = dicke_omega(n, k)?;
    let threshold = (1.0 - beta) / omega;
    let missing = data.missing_pairs();
    if !missing.is_empty() {
        return Err(Error::MissingPairs(missing));
    }
    // every pair marginal of a Dicke state is the same
    let exact = partial_trace(build_dicke_state(n, k)?.op(), &[0, 1])?;
    let mut pairs = vec![];
    let mut total = 0.0;
    for (&(i, j), sigma) in &data.entries {
        let dist = sigma.op().sub(&exact)?.trace_norm();
        total += dist;
        pairs.push(PairDistance {
            pair: [i + 1, j + 1],
            distance: dist,
        });
    }
    Ok(GmeReport {
        target: Target { n, k },
        beta,
        omega,
        threshold,
        measured_discrepancy: total,
        margin: threshold - total,
        fidelity_lower_bound: (1.0 - omega * total).clamp(0.0, 1.0),
        certified: total < threshold,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_branches() {
        assert!((beta_dicke(4, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((beta_dicke(3, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((beta_dicke(6, 3).unwrap() - 0.6).abs() < 1e-15);
        assert!((beta_dicke(5, 4).unwrap() - 0.8).abs() < 1e-15);
        assert!(beta_dicke(2, 1).is_err());
        assert!(beta_dicke(4, 4).is_err());
    }

    #[test]
    fn thresholds() {
        assert!((gme_threshold(4, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((gme_threshold(3, 1).unwrap() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn exact_marginals_certify() {
        let rho = build_dicke_state(4, 2).unwrap();
        let data = MeasuredMarginals::from_state(&rho).unwrap();
        let rep = evaluate_gme(&data, 4, 2).unwrap();
        assert!(rep.certified && rep.measured_discrepancy < 1e-9);
        assert!((rep.fidelity_lower_bound - 1.0).abs() < 1e-9);
    }

    #[test]
    fn missing_pairs_are_listed() {
        let rho = build_dicke_state(3, 1).unwrap();
        let mut data = MeasuredMarginals::from_state(&rho).unwrap();
        data.entries.remove(&(0, 2));
        match evaluate_gme(&data, 3, 1) {
            Err(Error::MissingPairs(p)) => assert_eq!(p, vec![(1, 3)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reversed_pairs_are_reordered() {
        let rho = build_dicke_state(3, 1).unwrap();
        let data = MeasuredMarginals::from_state(&rho).unwrap();
        let mut input = data.to_input(None);
        let e = &mut input.marginals[0];
        e.pair = [e.pair[1], e.pair[0]];
        e.matrix = permute_qubits(&e.matrix, &[1, 0]).unwrap();
        let back = MeasuredMarginals::from_input(&input).unwrap();
        assert!(back.entries[&(0, 1)].op().max_abs_diff(data.entries[&(0, 1)].op()) < 1e-15);
    }
}
