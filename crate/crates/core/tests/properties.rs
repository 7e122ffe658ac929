mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use uda_core::certify::{certify_linear, CertifyOptions, UdaMode};
use uda_core::gme::{evaluate_gme, MeasuredMarginals};
use uda_core::linalg::{kernel_projector, partial_trace, permute_qubits, DensityMatrix, HermitianOperator};
use uda_core::marginal::{kernel_basis_pauli, kernel_basis_svd, marginal_norm, SubsystemCollection};
use uda_core::probes::tangential_state;
use uda_core::states::{build_dicke_state, dicke_parent_hamiltonian, square_root_bound, two_local_collection, StateSpec};
use uda_core::Error;

fn random_collection(n: usize, rng: &mut impl Rng) -> SubsystemCollection {
    let available = (1usize << n) - 2;
    let m = rng.random_range(1..=4usize.min(available));
    let mut subsets: Vec<Vec<usize>> = vec![];
    while subsets.len() < m {
        let s: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !s.is_empty() && s.len() < n && !subsets.contains(&s) {
            subsets.push(s);
        }
    }
    SubsystemCollection::new(n, subsets).unwrap()
}

fn random_perm(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn single_qubit_pure(rng: &mut impl Rng) -> HermitianOperator {
    random_density(1, 1, rng).into_op()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_ordering(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let x = random_hermitian(n, &mut r);
        let (hs, tr) = (x.hs_norm(), x.trace_norm());
        let d = (1usize << n) as f64;
        prop_assert!(x.operator_norm() <= hs + 1e-12);
        prop_assert!(hs <= tr + 1e-12);
        prop_assert!(tr <= d.sqrt() * hs + 1e-12);
    }

    #[test]
    fn partial_trace_is_linear_and_trace_preserving(seed in any::<u64>(), n in 2usize..=4, a in -2.0f64..2.0) {
        let mut r = rng(seed);
        let x = random_hermitian(n, &mut r);
        let y = random_hermitian(n, &mut r);
        let keep: Vec<usize> = (0..n).filter(|_| r.random_bool(0.5)).collect();
        prop_assume!(!keep.is_empty());
        let lhs = partial_trace(&x.axpy(a, &y).unwrap(), &keep).unwrap();
        let rhs = partial_trace(&x, &keep).unwrap().axpy(a, &partial_trace(&y, &keep).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        prop_assert!((partial_trace(&x, &keep).unwrap().trace() - x.trace()).abs() < 1e-12);
    }

    #[test]
    fn marginal_norm_is_a_seminorm(seed in any::<u64>(), n in 2usize..=4, a in -3.0f64..3.0) {
        let mut r = rng(seed);
        let s = random_collection(n, &mut r);
        let x = random_hermitian(n, &mut r);
        let y = random_hermitian(n, &mut r);
        let nx = marginal_norm(&x, &s).unwrap();
        let ny = marginal_norm(&y, &s).unwrap();
        let nsum = marginal_norm(&x.add(&y).unwrap(), &s).unwrap();
        prop_assert!(nsum <= nx + ny + 1e-10);
        let nscaled = marginal_norm(&x.scale(a), &s).unwrap();
        prop_assert!((nscaled - a.abs() * nx).abs() < 1e-10 * (1.0 + nx));
        prop_assert!(nx >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_elements_are_invisible(seed in any::<u64>(), n in 2usize..=4) {
        let mut r = rng(seed);
        let s = random_collection(n, &mut r);
        for k in [kernel_basis_pauli(&s), kernel_basis_svd(&s, 1e-9)] {
            prop_assume!(!k.is_empty());
            for _ in 0..3 {
                let el = k.element(r.random_range(0..k.len()));
                prop_assert!(el.trace().abs() < 1e-10);
                prop_assert!(marginal_norm(&el, &s).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn pauli_and_svd_kernels_agree(seed in any::<u64>(), n in 2usize..=5) {
        let mut r = rng(seed);
        let s = random_collection(n, &mut r);
        prop_assert_eq!(kernel_basis_pauli(&s).len(), kernel_basis_svd(&s, 1e-9).len());
    }

    #[test]
    fn square_root_bound_holds(seed in any::<u64>(), nk in prop::sample::select(vec![(3usize, 1usize), (4, 1), (4, 2), (5, 2)]), p in 0.0f64..1.0, rank in 1usize..=4) {
        let mut r = rng(seed);
        let (n, k) = nk;
        let rho = build_dicke_state(n, k).unwrap();
        let ph = dicke_parent_hamiltonian(n, k).unwrap();
        let noise = random_density(n, rank, &mut r);
        let sigma = rho.mix(&noise, p * p).unwrap();
        let b = square_root_bound(&ph, &sigma, &rho).unwrap();
        prop_assert!(b.actual <= b.bound + 1e-10, "{:?}", b);
    }

    #[test]
    fn product_states_are_never_certified(seed in any::<u64>(), nk in prop::sample::select(vec![(3usize, 1usize), (4, 2), (4, 1), (5, 2)])) {
        let mut r = rng(seed);
        let (n, k) = nk;
        let prod = (1..n).fold(single_qubit_pure(&mut r), |acc, _| acc.kron(&single_qubit_pure(&mut r)));
        let prod = DensityMatrix::from_approximate(&prod).unwrap();
        let rep = evaluate_gme(&MeasuredMarginals::from_state(&prod).unwrap(), n, k).unwrap();
        prop_assert!(!rep.certified, "margin {}", rep.margin);
    }

    #[test]
    fn tangential_state_is_a_state(seed in any::<u64>(), n in 2usize..=3, rank in 1usize..=3, logt in -3.0f64..-1.0) {
        let mut r = rng(seed);
        let rho = random_density(n, rank, &mut r);
        let p0 = kernel_projector(&rho, 1e-9).unwrap();
        let x = random_hermitian(n, &mut r);
        // drop the kernel block, then remove the trace on the support
        let x = x.sub(&x.conjugate_by(p0.op().matrix()).unwrap()).unwrap();
        let support = HermitianOperator::identity(n).sub(p0.op()).unwrap();
        let x = x.axpy(-x.trace() / support.trace(), &support).unwrap();
        let t = 10f64.powf(logt);
        match tangential_state(&rho, &x, t, 1e-9) {
            Ok(sigma) => {
                prop_assert!(sigma.op().min_eigenvalue() >= -1e-12);
                prop_assert!((sigma.op().trace() - 1.0).abs() < 1e-12);
            }
            Err(Error::TTooLarge { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn verdict_is_invariant_under_relabeling(seed in any::<u64>(), which in 0usize..4) {
        let mut r = rng(seed);
        let spec = match which {
            0 => StateSpec::Dicke { n: 3, k: 1 },
            1 => StateSpec::Dicke { n: 4, k: 2 },
            2 => StateSpec::Stabilizer { generators: vec!["XXX".parse().unwrap(), "ZZI".parse().unwrap(), "IZZ".parse().unwrap()] },
            _ => StateSpec::Dicke { n: 4, k: 1 },
        };
        let rho = spec.materialize().unwrap();
        let n = rho.n_qubits();
        let s = two_local_collection(n).unwrap();
        let opts = CertifyOptions { uda: UdaMode::Sdp, ..CertifyOptions::default() };
        let base = certify_linear(&StateSpec::Dense { matrix: rho.op().clone() }, &s, &opts).unwrap();

        let perm = random_perm(n, &mut r);
        let order = random_perm(s.len(), &mut r);
        let moved = StateSpec::Dense { matrix: permute_qubits(rho.op(), &perm).unwrap() };
        let s2 = s.relabeled(&perm).unwrap().reordered(&order).unwrap();
        let other = certify_linear(&moved, &s2, &opts).unwrap();
        prop_assert_eq!(base.verdict, other.verdict);
        prop_assert_eq!(base.stage, other.stage);
    }

    #[test]
    fn stabilizer_shortcut_matches_full_pipeline(seed in any::<u64>(), n in 3usize..=4) {
        let mut r = rng(seed);
        let spec = StateSpec::Stabilizer { generators: random_stabilizer_group(n, &mut r) };
        let s = two_local_collection(n).unwrap();
        let fast = certify_linear(&spec, &s, &CertifyOptions::default()).unwrap();
        let slow = certify_linear(&spec, &s, &CertifyOptions { stabilizer_shortcut: false, ..CertifyOptions::default() }).unwrap();
        prop_assert_eq!(fast.verdict, slow.verdict);
    }
}

#[test]
fn dicke_verdicts_are_symmetric_under_complement() {
    let opts = CertifyOptions::default();
    for n in 3..=5 {
        for k in 1..n {
            let s = two_local_collection(n).unwrap();
            let a = certify_linear(&StateSpec::Dicke { n, k }, &s, &opts).unwrap();
            let b = certify_linear(&StateSpec::Dicke { n, k: n - k }, &s, &opts).unwrap();
            assert_eq!(a.verdict, b.verdict, "D({n},{k})");
            assert_eq!(a.kernel_dim, b.kernel_dim);
        }
    }
}
