use slocc_core::classifier::{polystable_limit, OrbitType};
use slocc_core::dsl::parse_pencil_spec;
use slocc_core::enumerate::enumerate_classes;
use slocc_core::pencil::{moebius_equivalent, representative_state};
use slocc_core::witness::{evaluate_family, limit_structure, norm_ratio, witness_for, witness_offdiag, Target};

fn non_polystable_shapes() -> Vec<(usize, usize)> {
    let mut shapes = Vec::new();
    for m in 2..=5 {
        for n in m..=6 {
            shapes.push((m, n));
        }
    }
    shapes
}

#[test]
fn null_cone_families_reach_zero_monotonically() {
    let mut checked = 0;
    for (m, n) in non_polystable_shapes() {
        for class in enumerate_classes(m, n).unwrap() {
            if class.orbit_type != OrbitType::NullCone {
                continue;
            }
            let ks = class.structure.instantiate_default().unwrap();
            let fam = witness_for(&ks).unwrap();
            assert_eq!(fam.target, Target::ZeroVector);
            assert!(fam.determinant_drift() < 1e-8);
            let psi = representative_state(&ks).unwrap();
            let mut last = f64::INFINITY;
            for step in 0..=80 {
                let r = norm_ratio(&fam, 0.5 * step as f64, &psi).unwrap();
                assert!(r <= last * (1.0 + 1e-12), "{m}x{n} {ks:?} not monotone at step {step}");
                last = r;
            }
            assert!(last < 1e-6, "{m}x{n} {ks:?}: ratio {last}");
            checked += 1;
        }
    }
    assert!(checked >= 60, "only {checked} null-cone classes");
}

#[test]
fn semistable_families_reach_the_polystable_limit() {
    let mut checked = 0;
    for (m, n) in non_polystable_shapes() {
        for class in enumerate_classes(m, n).unwrap() {
            if class.orbit_type != OrbitType::StrictlySemistable {
                continue;
            }
            let ks = class.structure.instantiate_default().unwrap();
            let fam = witness_for(&ks).unwrap();
            let expected = polystable_limit(&ks).unwrap();
            let Target::CriticalClass(declared) = &fam.target else { panic!("wrong target") };
            assert!(moebius_equivalent(declared, &expected, 1e-8));
            let psi = representative_state(&ks).unwrap();
            let reached = limit_structure(&fam, 40.0, &psi, 1e-6).unwrap();
            assert!(moebius_equivalent(&reached, &expected, 1e-6), "{ks:?} reached {reached:?}");
            checked += 1;
        }
    }
    assert!(checked >= 5);
}

#[test]
fn determinant_is_one_along_the_path() {
    let ks = parse_pencil_spec("M2(0)+M1(1)+M1(2)").unwrap();
    let fam = witness_for(&ks).unwrap();
    for alpha in [0.0, 0.3, 1.7, 5.0] {
        let dets = fam.operators_at(alpha).determinants();
        let product = dets[0] * dets[1] * dets[2];
        assert!((product - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }
}

#[test]
fn w_state_goes_to_zero_and_its_reduct_is_diagonal() {
    let ks = parse_pencil_spec("M2(0)").unwrap();
    let psi = representative_state(&ks).unwrap();
    let fam = witness_for(&ks).unwrap();
    assert!(norm_ratio(&fam, 40.0, &psi).unwrap() < 1e-6);
    let off = witness_offdiag(&ks).unwrap();
    let limit = evaluate_family(&off, 40.0, &psi).unwrap();
    assert!(limit.get(0, 0, 1).norm() < 1e-12);
    let reduct = limit_structure(&off, 40.0, &psi, 1e-6).unwrap();
    assert!(reduct.approx_eq(&parse_pencil_spec("M1(0)+M1(0)").unwrap(), 1e-10));
}

#[test]
fn semistable_example_limits_to_its_split_partner() {
    let sss = parse_pencil_spec("M2(0)+M1(inf)+M1(inf)").unwrap();
    let sps = parse_pencil_spec("M1(0)+M1(0)+M1(inf)+M1(inf)").unwrap();
    let fam = witness_for(&sss).unwrap();
    let psi = representative_state(&sss).unwrap();
    let reached = limit_structure(&fam, 40.0, &psi, 1e-6).unwrap();
    assert!(moebius_equivalent(&reached, &sps, 1e-6));
}
