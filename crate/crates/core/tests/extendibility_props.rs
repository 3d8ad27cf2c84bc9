use proptest::prelude::*;
use sqnm::extendibility::*;
use sqnm::linalg;
use sqnm::parties::Parties;
use sqnm::qstate::*;
use sqnm::squash::sandwich_bounds;

fn product(seed: u64) -> DensityMatrix {
    let a = random_density(&SystemLayout::single("A", 2).unwrap(), 2, RngSeed(seed)).unwrap();
    let c = random_density(&SystemLayout::single("C", 2).unwrap(), 2, RngSeed(seed ^ 3)).unwrap();
    tensor_product(&a, &c).unwrap()
}

fn marginal_error(w: &DensityMatrix, rho: &DensityMatrix, slot: &str) -> f64 {
    let m = reduce_to(w, &["A", slot]).unwrap();
    linalg::max_abs(&(m.matrix() - rho.matrix()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn witness_satisfies_constraints_and_marginalizes(seed in any::<u64>(), p in 0.0f64..0.3) {
        // isotropic-like mixture of a product and a Bell state, well inside the 3-extendible region
        let bell = sqnm::states::bell(0).unwrap().state;
        let rho = DensityMatrix::mixture(&[(p, &bell), (1.0 - p, &product(seed))]).unwrap();
        let rep = symmetric_extension_feasibility(&rho, "C", 3, &FeasibilityConfig::default()).unwrap();
        prop_assume!(rep.feasible);
        let w = rep.witness.unwrap();
        prop_assert!(w.eigenvalues().iter().all(|&l| l >= -1e-7));
        for slot in ["C1", "C2", "C3"] {
            prop_assert!(marginal_error(&w, &rho, slot) < 1e-7);
        }
        // dropping a copy leaves a 2-extension
        let w2 = partial_trace(&w, &["C3"]).unwrap();
        for slot in ["C1", "C2"] {
            prop_assert!(marginal_error(&w2, &rho, slot) < 1e-7);
        }
        let cap = extendibility_cap(2, 3).unwrap();
        prop_assert!(sandwich_bounds(&rho, &Parties::bipartite()).unwrap().lower <= cap + 1e-9);
    }
}

#[test]
fn products_are_extendible_up_to_four() {
    for s in 0..4 {
        for k in 2..=4 {
            let rep = theorem1_check(&product(s), k, &FeasibilityConfig::default(), None).unwrap();
            assert!(rep.feasibility.feasible && rep.feasibility.residual <= 1e-7);
            assert!(rep.holds);
        }
    }
}

#[test]
fn memory_cap_is_enforced() {
    let l = SystemLayout::new([("A", 3), ("C", 3)]).unwrap();
    let rho = DensityMatrix::maximally_mixed(l);
    let err = symmetric_extension_feasibility(&rho, "C", 6, &FeasibilityConfig::default()).unwrap_err();
    assert!(matches!(err, sqnm::Error::MemoryCap(_)));
}
