use lindscat_core::capture::{absorbing_patch, classify_model, escape_probability, modified_omega_minus};
use lindscat_core::limits::Schedule;
use lindscat_core::linalg::{frobenius, op_norm};
use lindscat_core::random;
use lindscat_core::scattering::OpenSystem;
use proptest::prelude::*;
use std::sync::OnceLock;

struct Fixture {
    pi: lindscat_core::CMat,
    omega: lindscat_core::CMat,
    d: usize,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let p = absorbing_patch(8, 1.0, 0.5, 3.0, 1, 6, 20.0).unwrap();
        let cls = classify_model(&p.model, &p.model.couplings, 1e-8, 5.0).unwrap();
        let sys = OpenSystem::new(p.model.h0.clone(), p.model.h_v(), p.model.couplings.clone()).unwrap();
        let om = modified_omega_minus(&sys, &cls.pi, &Schedule::linear(5.0, 5, 1e-6)).unwrap();
        Fixture { pi: cls.pi, omega: om.value, d: p.model.dim() }
    })
}

#[test]
fn pi_is_an_orthogonal_projection() {
    let f = fixture();
    assert!(op_norm(&(&f.pi * &f.pi - &f.pi)) <= 1e-10);
    assert!(frobenius(&(&f.pi - f.pi.adjoint())) <= 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn escape_probability_is_a_probability(seed in any::<u64>(), rank in 1usize..=4) {
        let f = fixture();
        let mut rng = random::rng(seed);
        let rho = random::density_matrix(f.d, rank, &mut rng);
        let e = escape_probability(&f.omega, &rho);
        prop_assert!(e.raw >= -1e-8 && e.raw <= 1.0 + 1e-8);
        prop_assert!((e.value + e.capture - 1.0).abs() <= 1e-15);
    }
}
