use num_complex::Complex64;
use slocc_core::classifier::OrbitType;
use slocc_core::enumerate::enumerate_classes;
use slocc_core::linalg::ONE;
use slocc_core::normalform::{crosscheck, normal_form, normal_form_with, NormalFormOptions, Verdict};
use slocc_core::pencil::{compute_kcf, moebius_equivalent, pencil_from_state, representative_state};
use slocc_core::tensor::StateTensor;

fn semistable_example() -> StateTensor {
    let e = |i, j, k| ([i, j, k], ONE);
    StateTensor::from_entries(4, 4, &[e(0, 0, 1), e(0, 2, 2), e(0, 3, 3), e(1, 0, 0), e(1, 1, 1)]).unwrap()
}

#[test]
fn semistable_example_plateaus() {
    let report = normal_form(&semistable_example(), 1e-9, 1e-8, 5000).unwrap();
    assert_eq!(report.verdict, Verdict::SemistableLikely);
    assert!(report.final_ratio() > 0.5);
}

#[test]
fn all_small_tables_agree_with_the_classifier() {
    for (m, n) in [(2, 2), (2, 3), (2, 4), (3, 3), (3, 4), (3, 5), (4, 4)] {
        for (row, class) in enumerate_classes(m, n).unwrap().iter().enumerate() {
            let psi = representative_state(&class.instantiate_default().unwrap()).unwrap();
            let check = crosscheck(&psi).unwrap();
            assert!(check.agrees, "2x{m}x{n} row {}: {:?} vs {:?}", row + 1, check.symbolic, check.verdict);
        }
    }
}

#[test]
fn traces_are_monotone_and_determinants_stay_one() {
    for class in enumerate_classes(3, 3).unwrap().iter().chain(enumerate_classes(4, 4).unwrap().iter()) {
        let psi = representative_state(&class.instantiate_default().unwrap()).unwrap();
        let report = normal_form_with(&psi, &NormalFormOptions { max_iter: 800, ..Default::default() }).unwrap();
        for pair in report.norm_trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
        }
        for det in report.accumulated.determinants() {
            assert!((det - Complex64::new(1.0, 0.0)).norm() < 1e-6);
        }
    }
}

#[test]
fn polystable_runs_stay_in_their_orbit() {
    for (m, n) in [(3, 3), (4, 4), (5, 5)] {
        for class in enumerate_classes(m, n).unwrap() {
            if !class.orbit_type.is_polystable() {
                continue;
            }
            let ks = class.instantiate_default().unwrap();
            let report = normal_form(&representative_state(&ks).unwrap(), 1e-9, 1e-8, 5000).unwrap();
            assert!(report.final_state.is_critical(1e-9));
            let reached = compute_kcf(&pencil_from_state(&report.final_state), 1e-8).unwrap();
            assert!(moebius_equivalent(&reached, &ks, 1e-6), "{ks:?} -> {reached:?}");
            assert_ne!(class.orbit_type, OrbitType::NullCone);
        }
    }
}
