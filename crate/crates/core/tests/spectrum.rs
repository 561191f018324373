use std::sync::{Arc, OnceLock};

use hmhf_core::profile::{find_profile, ProfileConfig, ProfileSolution};
use hmhf_core::radial::{GridSpec, Parity, RadialFunction, RadialGrid};
use hmhf_core::spectrum::*;
use proptest::prelude::*;

fn grid(n: usize) -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(GridSpec::new(30.0, n, 3.0)).unwrap())
}

fn profile() -> &'static ProfileSolution {
    static P: OnceLock<ProfileSolution> = OnceLock::new();
    P.get_or_init(|| find_profile(&ProfileConfig::default(), grid(400)).unwrap())
}

fn shrinker_pairs(n: usize) -> (OperatorAssembly, Vec<EigenPair>) {
    let a = assemble_operator(Some(profile()), grid(n)).unwrap();
    let e = eigenpairs(&a, 6).unwrap();
    (a, e)
}

#[test]
fn free_operator_has_harmonic_oscillator_spectrum() {
    let a = assemble_operator(None, grid(400)).unwrap();
    let e = eigenpairs(&a, 6).unwrap();
    for (k, p) in e.iter().enumerate() {
        assert!(
            (p.lambda + 0.5 + k as f64).abs() < 1e-8,
            "k={k}: {}",
            p.lambda
        );
        assert!(p.residual < 1e-8);
    }
}

#[test]
fn shrinker_spectrum_has_single_unstable_mode_and_gap() {
    let (a, e) = shrinker_pairs(400);
    assert!((e[0].lambda - 1.0).abs() < 1e-6, "{}", e[0].lambda);
    assert!(e[1..].iter().all(|p| p.lambda < 0.0));
    let c0 = spectral_gap(&e).unwrap();
    assert!((c0 - 0.51762192).abs() < 1e-6, "c0 = {c0}");
    assert!((e[2].lambda + 1.63036677).abs() < 1e-6);
    assert!(a.symmetry_defect() < 1e-10);
    for p in &e {
        assert!(p.residual < 1e-8);
    }
    for i in 0..4 {
        for j in 0..4 {
            let g = a.inner(e[i].phi.values(), e[j].phi.values());
            assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
}

#[test]
fn eigenvalues_are_stable_under_refinement() {
    let (_, coarse) = shrinker_pairs(300);
    let (_, fine) = shrinker_pairs(600);
    for (c, f) in coarse.iter().zip(&fine) {
        assert!((c.lambda - f.lambda).abs() <= 1e-3);
    }
}

#[test]
fn eigenvalues_do_not_depend_on_the_domain_size() {
    let (_, reference) = shrinker_pairs(400);
    for y_max in [15.0, 20.0] {
        let g = Arc::new(RadialGrid::new(GridSpec::new(y_max, 400, 3.0)).unwrap());
        let e = eigenpairs(&assemble_operator(Some(profile()), g).unwrap(), 4).unwrap();
        for (a, b) in e.iter().zip(&reference) {
            assert!(
                (a.lambda - b.lambda).abs() < 1e-6,
                "Y_max={y_max}: {} vs {}",
                a.lambda,
                b.lambda
            );
        }
    }
}

#[test]
fn translation_mode_is_the_top_eigenfunction() {
    let (a, e) = shrinker_pairs(400);
    let t = verify_translation_mode(&a, profile(), Some(&e[0]));
    assert!(t.residual <= 1e-5, "{}", t.residual);
    assert!(t.alignment.unwrap() > 1.0 - 1e-8);
    assert!(e[0].phi.values()[0] > 0.0);
}

#[test]
fn translation_residual_grows_linearly_with_profile_error() {
    let p = profile();
    let g = p.grid().clone();
    let bump = |eps: f64| {
        let f = RadialFunction::from_fn(g.clone(), Parity::Odd, |y| y * (-y * y).exp());
        let fp = RadialFunction::from_fn(g.clone(), Parity::Even, |y| {
            (1.0 - 2.0 * y * y) * (-y * y).exp()
        });
        let q = ProfileSolution::from_samples(
            p.b + eps,
            p.f_infinity,
            p.f.axpy(eps, &f).unwrap(),
            p.f_prime.axpy(eps, &fp).unwrap(),
        )
        .unwrap();
        let a = assemble_operator(Some(&q), g.clone()).unwrap();
        verify_translation_mode(&a, &q, None).residual
    };
    let (r1, r2) = (bump(1e-3), bump(2e-3));
    assert!(r1 > 1e-5);
    assert!((r2 / r1 - 2.0).abs() < 0.1, "ratio {}", r2 / r1);
}

#[test]
fn too_many_eigenpairs_are_rejected() {
    let a = assemble_operator(None, grid(64)).unwrap();
    assert!(eigenpairs(&a, 17).is_err());
}

#[test]
fn report_serializes_expected_fields() {
    let (a, e) = shrinker_pairs(300);
    let t = verify_translation_mode(&a, profile(), Some(&e[0]));
    let r = serde_json::to_value(SpectrumReport::new(&a, &e, Some(&t))).unwrap();
    for k in [
        "resolution",
        "Y_max",
        "eigenvalues",
        "residuals",
        "gap_c0",
        "translation_mode_residual",
    ] {
        assert!(r.get(k).is_some(), "{k}");
    }
}

#[test]
fn kernel_preserves_constants_and_short_times() {
    let g = grid(300);
    let one = RadialFunction::from_fn(g.clone(), Parity::Even, |_| 1.0);
    let k = free_kernel_apply(&one, 0.7).unwrap();
    assert!(k.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    let f = RadialFunction::from_fn(g, Parity::Even, |y| y.cos());
    assert_eq!(free_kernel_apply(&f, 1e-10).unwrap().values(), f.values());
}

fn gaussian_image(a: f64, s: f64, y: f64) -> f64 {
    let alpha = 4.0 * (1.0 - (-s).exp());
    (1.0 + a * alpha).powf(-2.5) * (-a * (-s).exp() * y * y / (1.0 + a * alpha)).exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kernel_maps_gaussians_to_gaussians(a in 0.1f64..2.0, s in 0.01f64..6.0) {
        let g = grid(300);
        let f = RadialFunction::from_fn(g.clone(), Parity::Even, |y| (-a * y * y).exp());
        let k = free_kernel_apply(&f, s).unwrap();
        for (y, v) in g.nodes().iter().zip(k.values()) {
            prop_assert!((v - gaussian_image(a, s, *y)).abs() < 1e-8);
        }
    }

    #[test]
    fn kernel_is_a_semigroup(s1 in 0.05f64..1.0, s2 in 0.05f64..1.0) {
        let g = grid(300);
        let f = RadialFunction::from_fn(g.clone(), Parity::Even, |y| (1.0 + y * y) * (-0.5 * y * y).exp());
        let two = free_kernel_apply(&free_kernel_apply(&f, s1).unwrap(), s2).unwrap();
        let one = free_kernel_apply(&f, s1 + s2).unwrap();
        let d = two.axpy(-1.0, &one).unwrap().max_abs();
        prop_assert!(d < 1e-7, "{}", d);
    }
}
