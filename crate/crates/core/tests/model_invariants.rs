use lindscat_core::linalg::{hermiticity_defect, min_eig_hermitian};
use lindscat_core::model::{
    coupling_position, discrete_laplacian, momentum_operator, position_multiplier, rollnik_norm, Boundary, LatticeModel, ScalarField,
};
use proptest::prelude::*;

fn boundary(periodic: bool) -> Boundary {
    if periodic {
        Boundary::Periodic
    } else {
        Boundary::Dirichlet
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_is_psd(n in 3usize..=64, h in 0.1f64..2.0, periodic in any::<bool>()) {
        let l = discrete_laplacian(n, h, boundary(periodic)).unwrap();
        prop_assert!(min_eig_hermitian(&l) >= -1e-12 * (1.0 + 4.0 / (h * h)));
        prop_assert!(hermiticity_defect(&l) <= 1e-12);
    }

    #[test]
    fn builders_have_model_dimension(n in 3usize..=16, two_s in 0usize..=2, width in 0.5f64..4.0) {
        let h_int = lindscat_core::linalg::zeros(two_s + 1);
        let m = LatticeModel::new(n, 1.0, Boundary::Dirichlet, h_int).unwrap();
        let g = ScalarField::from_fn(&m, |x| (-x * x / (width * width)).exp());
        for op in [m.h0.clone(), position_multiplier(&g, &m), coupling_position(&g, &m), momentum_operator(&m).unwrap()] {
            prop_assert_eq!(op.nrows(), n * (two_s + 1));
            prop_assert!(hermiticity_defect(&op) <= 1e-12);
        }
    }

    #[test]
    fn rollnik_norm_is_reflection_invariant(vals in proptest::collection::vec(-3.0f64..3.0, 3..24), h in 0.2f64..2.0) {
        let m = LatticeModel::scalar(vals.len(), h, Boundary::Dirichlet).unwrap();
        let forward = ScalarField { values: vals.iter().map(|&v| num_complex::Complex64::new(v, 0.0)).collect() };
        let reflected = ScalarField { values: forward.values.iter().rev().copied().collect() };
        let (a, b) = (rollnik_norm(&forward, &m), rollnik_norm(&reflected, &m));
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        prop_assert!(a.is_finite());
    }
}
