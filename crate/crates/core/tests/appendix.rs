use polymerlab::appendix::*;
use polymerlab::{RngKey, TailLaw};

#[test]
fn simplex_integrals_with_integer_exponents() {
    // volume of the ordered simplex and its first moments, by hand
    let cases = [
        (vec![1.0, 1.0], 3.0, 3.0),
        (vec![1.0, 1.0, 1.0], 2.0, 2.0),
        (vec![2.0, 1.0, 1.0], 2.0, 8.0 / 6.0),
        (vec![1.0, 1.0, 1.0, 1.0], 1.5, 1.5f64.powi(3) / 6.0),
        (vec![2.0, 2.0], 1.0, 1.0 / 6.0),
    ];
    for (zetas, t, exact) in cases {
        let r = dirichlet_identity(&DirichletSpec::new(zetas.clone(), t).unwrap());
        assert!((r.numeric / exact - 1.0).abs() < 1e-10, "{zetas:?}: {} vs {exact}", r.numeric);
        assert!((r.formula / exact - 1.0).abs() < 1e-12);
    }
}

#[test]
fn singular_exponents_agree_between_methods() {
    let spec = DirichletSpec::new(vec![0.4, 0.7, 0.55], 1.3).unwrap();
    let quad = dirichlet_identity(&spec);
    let mc = dirichlet_identity_mc(&spec, 400_000, RngKey::new(3));
    assert!(quad.rel_error < 1e-6);
    assert!((mc.numeric - quad.numeric).abs() < 4.0 * mc.se, "{} ± {} vs {}", mc.numeric, mc.se, quad.numeric);
    assert!(DirichletSpec::new(vec![1.0], 1.0).is_err());
    assert!(DirichletSpec::new(vec![1.0, -0.5], 1.0).is_err());
}

#[test]
fn battery_is_reproducible_and_writes_one_row_per_check() {
    let law = TailLaw::centered_pareto(1.5).unwrap();
    let a = comparison_battery(&law, &[2, 3], 2, 20_000, RngKey::new(8)).unwrap();
    let b = comparison_battery(&law, &[2, 3], 2, 20_000, RngKey::new(8)).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.pass && r.constant >= 1.0));
    let mut buf = Vec::new();
    write_comparison_csv(&mut buf, &a).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), a.len() + 1);
}
