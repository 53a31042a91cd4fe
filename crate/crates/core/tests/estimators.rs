use approx::assert_relative_eq;
use lais_core::diagnostics::RunEnsemble;
use lais_core::estimators::*;
use lais_core::ldt::{solve_ldt, LdtOptions};
use lais_core::numerics::{RngStream, SpdMatrix};
use lais_core::problems::{quadratic_oracle_pf, EventMap, QuadraticMap, DEFAULT_ORACLE_NODES};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Gaussian density ratio `φ(θ) / q(θ)` evaluated with nalgebra.
fn density_ratio(theta: &[f64], p: &GaussianProposal<f64>) -> f64 {
    let n = theta.len();
    let cov = DMatrix::from_fn(n, n, |i, j| p.cov().get(i, j));
    let inv = cov.clone().try_inverse().unwrap();
    let d = DVector::from_iterator(n, theta.iter().zip(p.mean()).map(|(t, m)| t - m));
    let t = DVector::from_column_slice(theta);
    let log_prior = -0.5 * t.dot(&t);
    let log_q = -0.5 * (d.transpose() * &inv * &d)[(0, 0)] - 0.5 * cov.determinant().ln();
    (log_prior - log_q).exp()
}

fn random_proposal(rng: &mut RngStream, dim: usize) -> GaussianProposal<f64> {
    let mean: Vec<f64> = (0..dim).map(|_| 2.0 * rng.std_normal::<f64>()).collect();
    let l: Vec<f64> = (0..dim * dim)
        .map(|_| 0.5 * rng.std_normal::<f64>())
        .collect();
    let cov = SpdMatrix::from_fn(dim, |i, j| {
        let s: f64 = (0..dim).map(|k| l[i * dim + k] * l[j * dim + k]).sum();
        s + if i == j { 0.3 } else { 0.0 }
    });
    GaussianProposal::new(mean, cov).unwrap()
}

fn draw_level(rng: &mut RngStream, p: &GaussianProposal<f64>, n: usize) -> Vec<(Vec<f64>, bool)> {
    (0..n).map(|k| (p.sample(rng), k % 3 != 1)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prior_weight_is_one(theta in prop::collection::vec(-8.0f64..8.0, 1..6)) {
        let p = GaussianProposal::standard(vec![0.0; theta.len()]).unwrap();
        prop_assert_eq!(gaussian_is_weight(&theta, &p).unwrap(), 1.0);
    }

    #[test]
    fn weight_matches_density_ratio(seed in any::<u64>(), dim in 1usize..4) {
        let mut rng = RngStream::new(seed, 0);
        let p = random_proposal(&mut rng, dim);
        let theta: Vec<f64> = (0..dim).map(|_| rng.std_normal::<f64>()).collect();
        let w = p.weight(&theta);
        prop_assert!(w > 0.0 && w.is_finite());
        prop_assert!((w / density_ratio(&theta, &p) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn mixture_incremental_matches_direct(
        seed in any::<u64>(),
        dim in 1usize..4,
        levels in 1usize..6,
        per_level in 1usize..5,
    ) {
        let mut rng = RngStream::new(seed, 0);
        let mut h = MisHistory::new(per_level).unwrap();
        for _ in 0..levels {
            let p = random_proposal(&mut rng, dim);
            let s = draw_level(&mut rng, &p, per_level);
            h.push_level(p, s, WeightScheme::DeterministicMixture).unwrap();
        }
        prop_assert_eq!(h.total(), levels * per_level);
        for r in h.records() {
            // w = φ / ((1/J) Σ_j q_j) = J / Σ_j (1 / w_j)
            let inv: f64 = h.proposals().iter().map(|p| 1.0 / density_ratio(&r.theta_r, p)).sum();
            let direct = levels as f64 / inv;
            prop_assert!((r.weight() / direct - 1.0).abs() < 1e-12,
                "incremental {} vs direct {}", r.weight(), direct);
            // the production direct formula agrees more tightly
            let lw = dmmis_log_weight(&r.theta_r, h.proposals());
            prop_assert!((r.log_weight - lw).abs() <= 1e-12 * lw.abs().max(1.0));
        }
    }

    #[test]
    fn single_level_schemes_agree(seed in any::<u64>(), dim in 1usize..4) {
        let mut rng = RngStream::new(seed, 0);
        let p = random_proposal(&mut rng, dim);
        let s = draw_level(&mut rng, &p, 7);
        let mut a = MisHistory::new(7).unwrap();
        let mut b = MisHistory::new(7).unwrap();
        a.push_level(p.clone(), s.clone(), WeightScheme::Standard).unwrap();
        b.push_level(p, s, WeightScheme::DeterministicMixture).unwrap();
        for (x, y) in a.records().iter().zip(b.records()) {
            prop_assert_eq!(x.log_weight, y.log_weight);
        }
        prop_assert_eq!(a.estimate().p_hat, b.estimate().p_hat);
    }
}

#[test]
fn single_level_is_plain_importance_sampling() {
    let mut rng = RngStream::new(3, 0);
    let p = random_proposal(&mut rng, 3);
    let s = draw_level(&mut rng, &p, 1000);
    let plain: f64 = s
        .iter()
        .map(|(t, d)| if *d { p.log_weight(t).exp() } else { 0.0 })
        .sum::<f64>()
        / 1000.0;
    for scheme in [WeightScheme::Standard, WeightScheme::DeterministicMixture] {
        let mut h = MisHistory::new(1000).unwrap();
        h.push_level(p.clone(), s.clone(), scheme).unwrap();
        assert_eq!(mis_estimate(&h).unwrap().p_hat, plain);
        for (r, (t, _)) in h.records().iter().zip(&s) {
            assert_eq!(r.weight(), smis_weight(r, &p));
            assert_eq!(r.weight(), gaussian_is_weight(t, &p).unwrap());
        }
    }
}

#[test]
fn repeated_proposal_keeps_single_level_weights() {
    let mut rng = RngStream::new(4, 0);
    let p = random_proposal(&mut rng, 2);
    let s1 = draw_level(&mut rng, &p, 5);
    let s2 = draw_level(&mut rng, &p, 5);
    let mut h = MisHistory::new(5).unwrap();
    h.push_level(p.clone(), s1, WeightScheme::DeterministicMixture)
        .unwrap();
    h.push_level(p.clone(), s2, WeightScheme::DeterministicMixture)
        .unwrap();
    for r in h.records() {
        assert_relative_eq!(r.weight(), p.weight(&r.theta_r), max_relative = 1e-14);
    }
}

#[test]
fn standard_weights_are_not_revised() {
    let mut rng = RngStream::new(5, 0);
    let p1 = random_proposal(&mut rng, 2);
    let p2 = random_proposal(&mut rng, 2);
    let mut h = MisHistory::new(4).unwrap();
    h.push_level(
        p1.clone(),
        draw_level(&mut rng, &p1, 4),
        WeightScheme::Standard,
    )
    .unwrap();
    let before: Vec<f64> = h.records().iter().map(|r| r.log_weight).collect();
    h.push_level(
        p2.clone(),
        draw_level(&mut rng, &p2, 4),
        WeightScheme::Standard,
    )
    .unwrap();
    let after: Vec<f64> = h.records()[..4].iter().map(|r| r.log_weight).collect();
    assert_eq!(before, after);
    let levels: Vec<usize> = h.records().iter().map(|r| r.level).collect();
    assert_eq!(levels, [1, 1, 1, 1, 2, 2, 2, 2]);
}

#[test]
fn prior_levels_coincide_with_monte_carlo() {
    let map = QuadraticMap::new(4, 5.0).unwrap();
    let z = 2.0;
    let mut rng = RngStream::new(8, 0);
    let prior = GaussianProposal::standard(vec![0.0; 4]).unwrap();
    let mut h = MisHistory::new(500).unwrap();
    let mut hits = 0;
    for _ in 0..3 {
        let level: Vec<(Vec<f64>, bool)> = (0..500)
            .map(|_| {
                let t = prior.sample(&mut rng);
                let d = map.fails(&t, z).unwrap();
                hits += d as usize;
                (t, d)
            })
            .collect();
        h.push_level(prior.clone(), level, WeightScheme::DeterministicMixture)
            .unwrap();
    }
    assert_eq!(h.estimate().p_hat, hits as f64 / 1500.0);
}

#[test]
fn ce_recovers_gaussian_parameters() {
    let m = vec![1.5, -0.5, 3.0];
    let s = SpdMatrix::from_rows(&[
        vec![2.0, 0.3, -0.4],
        vec![0.3, 0.5, 0.1],
        vec![-0.4, 0.1, 1.2],
    ])
    .unwrap();
    let source = GaussianProposal::new(m.clone(), s.clone()).unwrap();
    let mut rng = RngStream::new(21, 0);
    let records: Vec<SampleRecord<f64>> = (0..100_000)
        .map(|_| SampleRecord {
            theta_r: source.sample(&mut rng),
            indicator: true,
            log_weight: 0.0,
            level: 1,
        })
        .collect();
    let fit = ce_update(&records).unwrap();
    for i in 0..3 {
        assert!((fit.mean()[i] - m[i]).abs() < 0.02, "mean {i}");
        for j in 0..3 {
            assert!(
                (fit.cov().get(i, j) - s.get(i, j)).abs() < 0.05,
                "cov {i},{j}"
            );
        }
    }
}

#[test]
fn ce_skips_non_failing_records() {
    let rec = |t: f64, d: bool, lw: f64| SampleRecord {
        theta_r: vec![t],
        indicator: d,
        log_weight: lw,
        level: 1,
    };
    // weights 1 and 3 on the failures: mean 2.5, variance (1·2.25 + 3·0.25)/4
    let rs = [
        rec(1.0, true, 0.0),
        rec(3.0, true, 3f64.ln()),
        rec(100.0, false, 5.0),
    ];
    let p = ce_update(&rs).unwrap();
    assert_relative_eq!(p.mean()[0], 2.5, max_relative = 1e-14);
    assert_relative_eq!(p.cov().get(0, 0), 0.75, max_relative = 1e-14);
}

#[test]
fn ce_survives_extreme_log_weights() {
    let rec = |t: f64, lw: f64| SampleRecord {
        theta_r: vec![t, -t],
        indicator: true,
        log_weight: lw,
        level: 1,
    };
    let p = ce_update(&[rec(1.0, -900.0), rec(2.0, -900.0), rec(5.0, -2000.0)]).unwrap();
    assert_relative_eq!(p.mean()[0], 1.5, max_relative = 1e-14);
}

#[test]
fn monte_carlo_matches_oracle() {
    let z = 2.0;
    let p_ref = quadratic_oracle_pf(z, 5.0, DEFAULT_ORACLE_NODES).unwrap();
    let map = QuadraticMap::new(334, 5.0).unwrap();
    let est = mc_estimate(&map, z, 1_000_000, &mut RngStream::new(2024, 0)).unwrap();
    let se = est.cv_hat.unwrap() * est.p_hat;
    assert!(
        (est.p_hat - p_ref).abs() <= 3.0 * se,
        "{} vs {p_ref} (se {se})",
        est.p_hat
    );
    assert_eq!(map.counters().evaluations(), 1_000_000);
}

#[test]
fn monte_carlo_ten_million_low_dimension() {
    // the oracle carries no dimension, so n = 2 exercises the same quantity
    let z = 2.0;
    let p_ref = quadratic_oracle_pf(z, 5.0, DEFAULT_ORACLE_NODES).unwrap();
    let map = QuadraticMap::new(2, 5.0).unwrap();
    let est = mc_estimate(&map, z, 10_000_000, &mut RngStream::new(77, 0)).unwrap();
    let se = est.cv_hat.unwrap() * est.p_hat;
    assert!(
        (est.p_hat - p_ref).abs() <= 3.0 * se,
        "{} vs {p_ref} (se {se})",
        est.p_hat
    );
}

#[test]
fn lsis_matches_oracle() {
    let z = 4.0;
    let p_ref = quadratic_oracle_pf(z, 5.0, DEFAULT_ORACLE_NODES).unwrap();
    let map = QuadraticMap::new(334, 5.0).unwrap();
    let ldt = solve_ldt(&map, z, &LdtOptions::default()).unwrap();
    let est = lsis_estimate(
        &map,
        z,
        &ldt.theta_star,
        100_000,
        &mut RngStream::new(11, 0),
    )
    .unwrap();
    let se = est.cv_hat.unwrap() * est.p_hat;
    assert!(
        (est.p_hat - p_ref).abs() <= 3.0 * se,
        "{} vs {p_ref} (se {se})",
        est.p_hat
    );
}

/// Mean of `runs` pooled estimates from two fixed proposals around the
/// optimizer of the two-dimensional quadratic problem.
fn fixed_two_proposal_ensemble(
    z: f64,
    scheme: WeightScheme,
    runs: u64,
    per_level: usize,
) -> RunEnsemble<f64> {
    let map = QuadraticMap::new(2, 5.0).unwrap();
    let star = map.analytic_optimizer(z);
    let p1 = GaussianProposal::standard(star.clone()).unwrap();
    let p2 = GaussianProposal::new(
        vec![star[0] + 0.3, star[1] - 0.4],
        SpdMatrix::from_rows(&[vec![1.3, 0.2], vec![0.2, 0.7]]).unwrap(),
    )
    .unwrap();
    let estimates = (0..runs)
        .map(|seed| {
            let mut rng = RngStream::new(seed, 0);
            let mut h = MisHistory::new(per_level).unwrap();
            for p in [&p1, &p2] {
                let level = (0..per_level)
                    .map(|_| {
                        let t = p.sample(&mut rng);
                        let d = map.fails(&t, z).unwrap();
                        (t, d)
                    })
                    .collect();
                h.push_level(p.clone(), level, scheme).unwrap();
            }
            h.estimate().p_hat
        })
        .collect();
    RunEnsemble::new(estimates, 2 * per_level as u64, format!("{scheme:?}"))
}

#[test]
fn standard_mis_is_unbiased() {
    let z = 4.0;
    let p_ref = quadratic_oracle_pf(z, 5.0, DEFAULT_ORACLE_NODES).unwrap();
    let ens = fixed_two_proposal_ensemble(z, WeightScheme::Standard, 500, 500);
    let se = ens.sample_std() / (ens.len() as f64).sqrt();
    assert!(
        (ens.mean() - p_ref).abs() <= 4.0 * se,
        "{} vs {p_ref} (se {se})",
        ens.mean()
    );
}

#[test]
fn fixed_mixture_is_unbiased() {
    let z = 2.0;
    let p_ref = quadratic_oracle_pf(z, 5.0, DEFAULT_ORACLE_NODES).unwrap();
    let ens = fixed_two_proposal_ensemble(z, WeightScheme::DeterministicMixture, 200, 500);
    let se = ens.sample_std() / (ens.len() as f64).sqrt();
    assert!(
        (ens.mean() - p_ref).abs() <= 3.0 * se,
        "{} vs {p_ref} (se {se})",
        ens.mean()
    );
}

struct AlwaysFails(lais_core::problems::CallCounters);

impl EventMap<f64> for AlwaysFails {
    fn dim(&self) -> usize {
        4
    }
    fn counters(&self) -> &lais_core::problems::CallCounters {
        &self.0
    }
    fn compute_value(&self, _: &[f64]) -> lais_core::Result<f64> {
        Ok(1.0)
    }
    fn compute_gradient(&self, _: &[f64]) -> lais_core::Result<Vec<f64>> {
        Ok(vec![0.0; 4])
    }
}

#[test]
fn monte_carlo_on_certain_failure_is_one() {
    let map = AlwaysFails(Default::default());
    for seed in 0..5 {
        let e = mc_estimate(&map, 0.0, 200, &mut RngStream::new(seed, 0)).unwrap();
        assert_eq!(e.p_hat, 1.0);
    }
    assert_eq!(map.counters().evaluations(), 1000);
}
