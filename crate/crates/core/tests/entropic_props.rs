use proptest::prelude::*;
use sqnm::entropic::*;
use sqnm::qstate::*;

fn abc(db: usize) -> SystemLayout {
    SystemLayout::new([("A", 2), ("B", db), ("C", 2)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn strong_subadditivity(seed in any::<u64>(), db in 2usize..=3, rank in 1usize..=12) {
        let rho = random_density(&abc(db), rank.min(4 * db), RngSeed(seed)).unwrap();
        prop_assert!(qcmi(&rho, &["A"], &["C"], &["B"]).unwrap() >= -1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn qcmi_is_symmetric(seed in any::<u64>()) {
        let rho = random_density(&abc(3), 12, RngSeed(seed)).unwrap();
        let ac = qcmi_raw(&rho, &["A"], &["C"], &["B"]).unwrap();
        let ca = qcmi_raw(&rho, &["C"], &["A"], &["B"]).unwrap();
        prop_assert!((ac - ca).abs() < 1e-9);
    }

    #[test]
    fn chain_rule(seed in any::<u64>()) {
        let l = SystemLayout::new([("A", 2), ("A2", 2), ("B", 2), ("C", 2)]).unwrap();
        let rho = random_density(&l, 16, RngSeed(seed)).unwrap();
        let lhs = qcmi_raw(&rho, &["A", "A2"], &["C"], &["B"]).unwrap();
        let rhs = qcmi_raw(&rho, &["A2"], &["C"], &["B"]).unwrap()
            + qcmi_raw(&rho, &["A"], &["C"], &["B", "A2"]).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn data_processing_on_a(seed in any::<u64>(), env in 1usize..=4, d_out in 1usize..=3) {
        prop_assume!(d_out * env >= 2);
        let rho = random_density(&abc(2), 8, RngSeed(seed)).unwrap();
        let v = random_isometry(2, d_out * env, RngSeed(seed.wrapping_add(1))).unwrap();
        let ch = QuantumChannel::new(
            SystemLayout::single("A", 2).unwrap(),
            SystemLayout::single("A", d_out).unwrap(),
            v,
            env,
        )
        .unwrap();
        let out = apply_channel(&rho, &ch, &["A"]).unwrap();
        let before = qcmi(&rho, &["A"], &["C"], &["B"]).unwrap();
        let after = qcmi(&out, &["A"], &["C"], &["B"]).unwrap();
        prop_assert!(after <= before + 1e-9);
    }

    #[test]
    fn pure_qcmi_equals_mutual_information(seed in any::<u64>()) {
        let psi = random_pure(&abc(2), RngSeed(seed)).to_density();
        let q = qcmi(&psi, &["A"], &["C"], &["B"]).unwrap();
        let mi = mutual_information(&psi, &["A"], &["C"]).unwrap();
        prop_assert!((q - mi).abs() < 1e-9);
    }

    #[test]
    fn purification_duality(seed in any::<u64>()) {
        // pure ABCER: I(A;C|BE) = S(A|BE) + S(A|R)
        let l = SystemLayout::new([("A", 2), ("B", 2), ("C", 2), ("E", 2), ("R", 2)]).unwrap();
        let psi = random_pure(&l, RngSeed(seed)).to_density();
        let lhs = qcmi_raw(&psi, &["A"], &["C"], &["B", "E"]).unwrap() / 2.0;
        let rhs = (conditional_entropy(&psi, &["A"], &["B", "E"]).unwrap()
            + conditional_entropy(&psi, &["A"], &["R"]).unwrap())
            / 2.0;
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }
}

#[test]
fn continuity_bound_is_monotone_in_eps() {
    let mut prev = 0.0;
    for i in 1..=20 {
        let f = continuity_bound(i as f64 * 0.005, 2, 2).unwrap();
        assert!(f > prev);
        prev = f;
    }
}
