use scforge_core::equivalence::check_random;
use scforge_core::fuzz::{random_network_source, FuzzLimits};
use scforge_core::parser::check_source;
use scforge_core::transform::{check_determinism, check_maps, transform_all};

#[test]
fn random_networks_are_equivalent_after_transformation() {
    let limits = FuzzLimits::default();
    for seed in 0..200 {
        let src = random_network_source(seed, &limits);
        let (net, _) = check_source(&src).unwrap();
        let (ta, map) = transform_all(&net).unwrap();
        let r = check_random(&net, &ta, &map, 10, 30, seed).unwrap();
        assert!(r.is_equivalent(), "seed {seed}: {:#?}\n{src}", r.first_divergence);
    }
}

#[test]
fn random_networks_satisfy_structural_checks() {
    let limits = FuzzLimits::default();
    for seed in 0..200 {
        let src = random_network_source(seed, &limits);
        let (net, _) = check_source(&src).unwrap();
        let (ta, map) = transform_all(&net).unwrap();
        assert_eq!(check_maps(&net, &ta, &map), Vec::<String>::new(), "seed {seed}");
        let d = check_determinism(&ta, &map).unwrap();
        assert!(d.violations.is_empty(), "seed {seed}: {:?}\n{src}", d.violations);
    }
}
