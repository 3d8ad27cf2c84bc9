use proptest::prelude::*;
use sqnm::linalg;
use sqnm::qstate::*;

fn layout(dims: &[usize]) -> SystemLayout {
    let names = ["A", "B", "C", "D"];
    SystemLayout::new(dims.iter().enumerate().map(|(i, &d)| (names[i], d))).unwrap()
}

fn random_channel(d_in: usize, d_out: usize, env: usize, seed: u64) -> QuantumChannel {
    let v = random_isometry(d_in, d_out * env, RngSeed(seed)).unwrap();
    QuantumChannel::new(SystemLayout::single("X", d_in).unwrap(), SystemLayout::single("Y", d_out).unwrap(), v, env)
        .unwrap()
}

fn assert_valid(rho: &DensityMatrix) {
    let m = rho.matrix();
    assert!(linalg::hermiticity_deviation(m) < 1e-9);
    assert!((linalg::trace(m).re - 1.0).abs() < 1e-9);
    assert!(rho.eigenvalues().iter().all(|&l| l >= -1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_states_are_valid(seed in any::<u64>(), rank in 1usize..=8) {
        let rho = random_density(&layout(&[2, 2, 2]), rank, RngSeed(seed)).unwrap();
        assert_valid(&rho);
        prop_assert!(rho.rank() <= rank);
    }

    #[test]
    fn partial_trace_commutes_with_permutation(seed in any::<u64>()) {
        let rho = random_density(&layout(&[2, 3, 2, 2]), 24, RngSeed(seed)).unwrap();
        let a = partial_trace(&permute_systems(&rho, &["D", "B", "A", "C"]).unwrap(), &["B"]).unwrap();
        let b = permute_systems(&partial_trace(&rho, &["B"]).unwrap(), &["D", "A", "C"]).unwrap();
        prop_assert_eq!(a.layout(), b.layout());
        prop_assert!(linalg::max_abs(&(a.matrix() - b.matrix())) < 1e-12);
    }

    #[test]
    fn purification_marginal_round_trip(seed in any::<u64>(), rank in 1usize..=6) {
        let rho = random_density(&layout(&[2, 3]), rank, RngSeed(seed)).unwrap();
        let psi = purify(&rho, "R").unwrap();
        let back = partial_trace(&psi.to_density(), &["R"]).unwrap();
        prop_assert!(linalg::max_abs(&(back.matrix() - rho.matrix())) < 1e-9);
    }

    #[test]
    fn fuchs_van_de_graaf(s1 in any::<u64>(), s2 in any::<u64>(), r1 in 1usize..=4, r2 in 1usize..=4) {
        let l = layout(&[2, 2]);
        let rho = random_density(&l, r1, RngSeed(s1)).unwrap();
        let sigma = random_density(&l, r2, RngSeed(s2)).unwrap();
        let f = fidelity(&rho, &sigma).unwrap();
        let t = trace_distance(&rho, &sigma).unwrap();
        prop_assert!(1.0 - f.sqrt() <= t + 1e-9);
        prop_assert!(t <= (1.0 - f).sqrt() + 1e-9);
    }

    #[test]
    fn channels_map_states_to_states(seed in any::<u64>(), env in 1usize..=4) {
        let rho = random_density(&layout(&[2, 2, 2]), 8, RngSeed(seed)).unwrap();
        let ch = random_channel(2, 3, env, seed ^ 0x5a5a)
            .with_layouts(SystemLayout::single("B", 2).unwrap(), SystemLayout::single("B2", 3).unwrap())
            .unwrap();
        prop_assert!(ch.is_cptp(1e-9));
        let out = apply_channel(&rho, &ch, &["B"]).unwrap();
        assert_valid(&out);
        prop_assert_eq!(out.layout().names(), vec!["A", "B2", "C"]);
    }
}
