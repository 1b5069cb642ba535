mod common;

use common::*;
use polymerlab::lattice::*;
use polymerlab::tail::cutoff_spec;
use polymerlab::{RngKey, ScalingPlan, TailLaw, TruncationSpec};
use proptest::prelude::*;
use rand::Rng;

fn centered() -> TailLaw {
    TailLaw::centered_pareto(1.5).unwrap()
}

#[test]
fn dp_matches_explicit_enumeration() {
    let law = centered();
    for (seed, (n, d)) in [(6, 1), (9, 1), (12, 1), (4, 2), (6, 2)].into_iter().enumerate() {
        let env = EnvSlab::sample(law, n, d, RngKey::new(seed as u64)).unwrap();
        let v = 2.0;
        let spec = TruncationSpec::new(&law, 0.4, 3.0, v).unwrap();
        let dis = Disorder::new(0.3, v, spec).unwrap();
        let w = |k: usize, x: &[i64]| 1.0 + 0.3 * cut(env.eta(k, x), 0.4, 3.0, spec.kappa_n_a, v);

        let z = partition_dp(&env, &dis, &PathFunctional::ConstantOne).unwrap().value;
        let oracle = enumerate_paths(n, d, w, |_| 1.0);
        assert!(relative_error(z, oracle) < 1e-12, "N={n} d={d}: {z} vs {oracle}");

        let radius = 0.5;
        let z = partition_dp(&env, &dis, &PathFunctional::support_cutoff(radius)).unwrap().value;
        let oracle = enumerate_paths(n, d, w, |p| (radius + 1.0 - rescaled_sup(p, n, d)).clamp(0.0, 1.0));
        assert!(relative_error(z, oracle) < 1e-12, "cutoff N={n} d={d}: {z} vs {oracle}");
    }
}

#[test]
fn product_cylinder_matches_enumeration() {
    let law = centered();
    let (n, d) = (10, 1);
    let env = EnvSlab::sample(law, n, d, RngKey::new(77)).unwrap();
    let dis = Disorder::plain(0.4).unwrap();
    // times 0.3 and 0.7 sit on steps 3 and 7
    let f = PathFunctional::product(
        vec![0.3, 0.7],
        vec![
            Marginal::Gaussian { center: vec![0.2], width: 0.5 },
            Marginal::Indicator { lo: vec![-0.5], hi: vec![1.0] },
        ],
    );
    let s = (n as f64).sqrt();
    let oracle = enumerate_paths(n, d, |k, x| 1.0 + 0.4 * env.eta(k, x), |p| {
        let y3 = p[3][0] as f64 / s;
        let y7 = p[7][0] as f64 / s;
        (-(y3 - 0.2f64).powi(2) / (2.0 * 0.25)).exp() * ((-0.5..1.0).contains(&y7) as u8 as f64)
    });
    let z = partition_dp(&env, &dis, &f).unwrap().value;
    assert!(relative_error(z, oracle) < 1e-12, "{z} vs {oracle}");
}

#[test]
fn chaos_expansion_matches_subset_sum() {
    let law = centered();
    let mut checked = 0;
    for seed in 0..200u64 {
        let (n, d) = if seed % 2 == 0 { (10, 1) } else { (5, 2) };
        let env = EnvSlab::sample(law, n, d, RngKey::new(1000 + seed)).unwrap();
        let dis = Disorder::new(0.35, 3.0, TruncationSpec::new(&law, 0.5, 4.0, 3.0).unwrap()).unwrap();
        let sites = band_sites(&env, &dis);
        if sites.len() > 12 {
            continue;
        }
        let triples: Vec<_> = sites.iter().map(|s| (s.n, s.x.clone(), s.eta)).collect();
        let oracle = lattice_subset_sum(&triples, 0.35);
        let chain = chaos_expansion(&env, &dis, &PathFunctional::ConstantOne).unwrap();
        assert!(relative_error(chain, oracle) < 1e-12, "seed {seed}: {chain} vs {oracle}");
        checked += 1;
    }
    assert!(checked >= 50);
}

/// Sub-threshold values of the centered Pareto law, drawn by inverting
/// `P(X ≤ x | X < c) = (1 - (x_m/x)^α) / (1 - (x_m/c)^α)`.
fn draw_below(law: &TailLaw, cap: f64, u: f64) -> f64 {
    let (a, xm) = (law.alpha(), law.x_m());
    let q = 1.0 - (xm / cap).powf(a);
    xm * (1.0 - u * q).powf(-1.0 / a) - 1.0
}

#[test]
fn resampling_below_threshold_reproduces_cutoff_partition() {
    let law = centered();
    let (n, d) = (8, 1);
    let v = 4.0;
    let a = 0.5;
    let beta = 0.4;
    let env = EnvSlab::sample(law, n, d, RngKey::new(31)).unwrap().materialize().unwrap();
    let spec = TruncationSpec::new(&law, a, f64::INFINITY, v).unwrap();
    let dis = Disorder::new(beta, v, spec).unwrap();
    let plain = Disorder::plain(beta).unwrap();
    for f in [PathFunctional::ConstantOne, PathFunctional::support_cutoff(0.3)] {
        let target = partition_dp(&env, &dis, &f).unwrap().value;
        let mut rng = RngKey::new(5).stream();
        let draws: Vec<f64> = (0..10_000)
            .map(|_| {
                let fresh = env
                    .map(|_, _, eta| if 1.0 + eta >= a * v { eta } else { draw_below(&law, a * v, rng.random::<f64>()) })
                    .unwrap();
                partition_dp(&fresh, &plain, &f).unwrap().value
            })
            .collect();
        let (m, se) = mean_se(&draws);
        assert!((m - target).abs() < 4.0 * se, "{}: {m} ± {se} vs {target}", f.label());
    }
}

#[test]
fn point_to_point_sums_to_point_to_line() {
    let law = centered();
    let n = 9;
    let env = EnvSlab::sample(law, n, 1, RngKey::new(4)).unwrap();
    let dis = Disorder::plain(0.5).unwrap();
    let z = partition_dp(&env, &dis, &PathFunctional::ConstantOne).unwrap().value;
    let total: f64 = (-(n as i64)..=n as i64)
        .step_by(2)
        .map(|x| point_to_point_partition(&env, &dis, (0, &[0]), (n, &[x]), 1.0).unwrap().value)
        .sum();
    assert!(relative_error(total, z) < 1e-12);
    let zero = EnvSlab::from_fn(law, n, 1, n, |_, _| 0.0).unwrap();
    let p = point_to_point_partition(&zero, &dis, (2, &[0]), (7, &[1]), 1.0).unwrap().value;
    assert!(relative_error(p, srw_1d(5, 1)) < 1e-14);
}

#[test]
fn slab_round_trips_through_binary_container() {
    let env = EnvSlab::sample(centered(), 7, 2, RngKey::new(12)).unwrap();
    let mut buf = Vec::new();
    env.write_to(&mut buf).unwrap();
    let back = EnvSlab::read_from(buf.as_slice()).unwrap();
    let mut same = true;
    env.for_each_site(|n, x| same &= env.eta(n, x) == back.eta(n, x));
    assert!(same);
    buf.truncate(buf.len() - 3);
    assert!(EnvSlab::read_from(buf.as_slice()).is_err());
}

#[test]
fn gibbs_paths_follow_the_polymer_measure() {
    // the first step under the polymer measure has law ∝ p(x)·Z_from(1, x)
    let law = centered();
    let n = 6;
    let env = EnvSlab::sample(law, n, 1, RngKey::new(9)).unwrap();
    let dis = Disorder::plain(0.6).unwrap();
    let z = partition_dp(&env, &dis, &PathFunctional::ConstantOne).unwrap().value;
    let up = enumerate_paths(n, 1, |k, x| 1.0 + 0.6 * env.eta(k, x), |p| (p[1][0] == 1) as u8 as f64) / z;
    let hits: Vec<f64> = (0..20_000u64)
        .map(|i| {
            let path = sample_polymer_path(&env, &dis, RngKey::new(3).derive(i)).unwrap();
            (path.at(1)[0] == 1) as u8 as f64
        })
        .collect();
    let (m, se) = mean_se(&hits);
    assert!((m - up).abs() < 4.0 * se, "{m} ± {se} vs {up}");
}

fn slab_strategy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 1usize..=10, 1usize..=2).prop_map(|(s, n, d)| (s, if d == 2 { n.min(6) } else { n }, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn upper_cutoff_only_lowers_nonnegative_functionals(
        (seed, n, d) in slab_strategy(),
        a in 0.05f64..0.9,
        b in 1.05f64..5.0,
        beta in 0.05f64..0.95,
        radius in 0.0f64..2.0,
    ) {
        let law = centered();
        let v = 3.0;
        let env = EnvSlab::sample(law, n, d, RngKey::new(seed)).unwrap();
        let lower = cutoff_spec(&law, v, a, f64::INFINITY).unwrap();
        let band = TruncationSpec::with_kappa(a, b, lower.kappa_n_a).unwrap();
        for f in [PathFunctional::ConstantOne, PathFunctional::support_cutoff(radius)] {
            let za = partition_dp(&env, &Disorder::new(beta, v, lower).unwrap(), &f).unwrap().value;
            let zab = partition_dp(&env, &Disorder::new(beta, v, band).unwrap(), &f).unwrap().value;
            prop_assert!(zab <= za * (1.0 + 1e-12), "{zab} > {za}");
        }
    }

    #[test]
    fn partition_is_linear_in_the_functional(
        (seed, n, d) in slab_strategy(),
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
        t in 0.1f64..1.0,
        radius in 0.0f64..2.0,
    ) {
        let law = centered();
        let env = EnvSlab::sample(law, n, d, RngKey::new(seed)).unwrap();
        let dis = Disorder::plain(0.5).unwrap();
        let f1 = PathFunctional::product(vec![t], vec![Marginal::Gaussian { center: vec![0.1; d], width: 0.7 }]);
        let f2 = PathFunctional::support_cutoff(radius);
        let combo = PathFunctional::Linear { terms: vec![(c1, f1.clone()), (c2, f2.clone())] };
        let z = |f: &PathFunctional| partition_dp(&env, &dis, f).unwrap().value;
        let lhs = z(&combo);
        let rhs = c1 * z(&f1) + c2 * z(&f2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (c1.abs() * z(&f1) + c2.abs() * z(&f2) + 1e-300));
    }

    #[test]
    fn partition_is_positive((seed, n, d) in slab_strategy(), beta in 0.01f64..0.99, a in 0.0f64..1.0) {
        let law = centered();
        let plan_v = 2.5;
        let env = EnvSlab::sample(law, n, d, RngKey::new(seed)).unwrap();
        let dis = Disorder::new(beta, plan_v, cutoff_spec(&law, plan_v, a, f64::INFINITY).unwrap()).unwrap();
        let z = partition_dp(&env, &dis, &PathFunctional::ConstantOne).unwrap().value;
        prop_assert!(z > 0.0);
    }

    #[test]
    fn below_alpha_one_cutoff_is_monotone(seed in any::<u64>(), a1 in 0.0f64..1.0, a2 in 0.0f64..1.0) {
        let law = TailLaw::pareto(0.7).unwrap();
        let plan = ScalingPlan::new(law, 32, 1, 1.0).unwrap();
        let env = EnvSlab::sample(law, 32, 1, RngKey::new(seed)).unwrap();
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let z = |a: f64| {
            let dis = Disorder::new(plan.beta_n, plan.v_n, cutoff_spec(&law, plan.v_n, a, f64::INFINITY).unwrap()).unwrap();
            partition_dp(&env, &dis, &PathFunctional::ConstantOne).unwrap().value
        };
        prop_assert!(z(hi) <= z(lo) * (1.0 + 1e-12));
    }

    #[test]
    fn dp_agrees_with_bruteforce_on_random_slabs((seed, n, d) in slab_strategy(), beta in 0.05f64..0.95) {
        let env = EnvSlab::sample(centered(), n, d, RngKey::new(seed)).unwrap();
        let dis = Disorder::plain(beta).unwrap();
        let f = PathFunctional::support_cutoff(0.7);
        let a = partition_dp(&env, &dis, &f).unwrap().value;
        let b = partition_bruteforce(&env, &dis, &f).unwrap().value;
        prop_assert!(relative_error(a, b) < 1e-12);
    }
}
