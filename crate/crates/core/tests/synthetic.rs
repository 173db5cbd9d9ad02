use coalhc_core::coalescent::sample_prior;
use coalhc_core::kernels::{build_covariance, Theta};
use coalhc_core::metrics::tree_distance_matrix;
use coalhc_core::seeding::rng_for;
use coalhc_core::synthetic::*;

#[test]
fn two_leaf_difference_variance_is_twice_the_mean_time() {
    let spec = SyntheticSpec {
        n: 2,
        d: 1,
        theta: Theta::Diagonal { variances: vec![1.0] },
        coords: None,
        seed: 3,
        replicates: 20_000,
    };
    let k = spec.replicates;
    let mut sq = 0.0;
    for i in 0..k {
        let r = generate_replicate(&spec, i).unwrap();
        sq += (r.data.row(0)[0] - r.data.row(1)[0]).powi(2);
    }
    // E[(x1 - x2)^2] = 2 E[t] = 2; the statistic has variance 20
    let mean = sq / k as f64;
    assert!((mean - 2.0).abs() < 4.0 * (20.0 / k as f64).sqrt(), "{mean}");
}

#[test]
fn leaf_covariance_is_root_time_times_kernel() {
    let mut rng = rng_for(5, &[]);
    let tree = sample_prior(6, &mut rng).unwrap();
    let d = 4;
    let cov = build_covariance(&Theta::SquaredExponential { ell: 1.5, sigma2: 0.1 }, None, d).unwrap();
    let reps = 10_000;
    let mut acc = vec![0.0; d * d];
    for _ in 0..reps {
        let data = diffuse(&tree, &cov, &mut rng);
        let row = data.row(2);
        for i in 0..d {
            for j in 0..d {
                acc[i * d + j] += row[i] * row[j];
            }
        }
    }
    let root = tree.merges.last().unwrap().time;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let want = root * cov.entry(i, j);
            num += (acc[i * d + j] / reps as f64 - want).powi(2);
            den += want * want;
        }
    }
    assert!((num / den).sqrt() < 0.1);
}

#[test]
fn leaf_cross_covariance_follows_common_ancestry() {
    let mut rng = rng_for(8, &[]);
    let tree = sample_prior(3, &mut rng).unwrap();
    let cov = build_covariance(&Theta::Diagonal { variances: vec![1.0] }, None, 1).unwrap();
    let dist = tree_distance_matrix(&tree);
    let root = tree.merges[1].time;
    let reps = 40_000;
    let mut acc = [0.0; 9];
    for _ in 0..reps {
        let data = diffuse(&tree, &cov, &mut rng);
        let x = data.values();
        for i in 0..3 {
            for j in 0..3 {
                acc[i * 3 + j] += x[i] * x[j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let want = root - dist[i * 3 + j];
            let got = acc[i * 3 + j] / reps as f64;
            // sd of a product of two N(0, root) draws is at most root·√2
            assert!((got - want).abs() < 5.0 * root * (2.0 / reps as f64).sqrt(), "{i},{j}: {got} vs {want}");
        }
    }
}

#[test]
fn replicates_are_reproducible_and_distinct() {
    let spec = SyntheticSpec::preset(Preset::D1, 4, 3);
    let a: Vec<_> = (0..3).map(|i| generate_replicate(&spec, i).unwrap()).collect();
    let b: Vec<_> = (0..3).rev().map(|i| generate_replicate(&spec, i).unwrap()).collect();
    for i in 0..3 {
        assert_eq!(a[i].data, b[2 - i].data);
        assert_eq!(a[i].tree, b[2 - i].tree);
        assert_eq!((a[i].data.n(), a[i].data.d()), (32, 32));
    }
    assert_ne!(a[0].data, a[1].data);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = SyntheticSpec::preset(Preset::D1, 1, 1);
    spec.n = 1;
    assert!(generate(&spec).is_err());
}

#[test]
fn labelled_mixture_is_balanced() {
    let cov = build_covariance(&default_theta(8), None, 8).unwrap();
    let (data, labels) = labelled_mixture(100, 10, 3.0, &cov, 2).unwrap();
    assert_eq!((data.n(), data.d()), (100, 8));
    for c in 0..10 {
        assert_eq!(labels.iter().filter(|&&l| l == c).count(), 10);
    }
    assert!(labelled_mixture(5, 6, 1.0, &cov, 2).is_err());
}
