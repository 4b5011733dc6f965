use hdbo::acquisition::{boltzmann_select, ei};
use hdbo::diagnostics::otsd::{brute_force, otsd};
use hdbo::rng::Rng as ChaRng;
use hdbo::sampling::{raasp_batch, sobol, Origin, PERTURBATION_SD};
use hdbo::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Squared L2-star discrepancy (Warnock).
fn l2_star(points: &Matrix) -> f64 {
    let n = points.rows() as f64;
    let d = points.cols() as i32;
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..points.rows() {
        let xi = points.row(i);
        a += xi.iter().map(|x| 1.0 - x * x).product::<f64>();
        for j in 0..points.rows() {
            b += xi.iter().zip(points.row(j)).map(|(x, y)| 1.0 - x.max(*y)).product::<f64>();
        }
    }
    3f64.powi(-d) - 2f64.powi(1 - d) / n * a + b / (n * n)
}

#[test]
fn raasp_subset_perturbs_about_twenty_coordinates() {
    let d = 200;
    let base = Matrix::from_rows(&[vec![0.5; d]], d);
    let b = raasp_batch(&base, 2000, d, 9).unwrap();
    let counts: Vec<usize> = b
        .points
        .iter_rows()
        .zip(&b.origin)
        .filter(|(_, o)| **o == Origin::LocalSubset)
        .map(|(r, _)| r.iter().filter(|v| **v != 0.5).count())
        .collect();
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    // binomial(200, 0.1) has sd ≈ 4.2, so the mean of 2000 has sd ≈ 0.095
    assert!((mean - 20.0).abs() < 0.5, "mean perturbed {mean}");
    assert!(counts.iter().all(|c| *c >= 1));
    assert_eq!(b.count(Origin::LocalAllDims), 2000);
}

#[test]
fn raasp_steps_have_the_perturbation_scale() {
    let d = 50;
    let base = Matrix::from_rows(&[vec![0.5; d]], d);
    let b = raasp_batch(&base, 500, d, 3).unwrap();
    let steps: Vec<f64> =
        b.points.iter_rows().take(500).flat_map(|r| r.iter().map(|v| v - 0.5).collect::<Vec<_>>()).collect();
    let sd = (steps.iter().map(|s| s * s).sum::<f64>() / steps.len() as f64).sqrt();
    assert!((sd / PERTURBATION_SD - 1.0).abs() < 0.03, "sd {sd}");
}

#[test]
fn sobol_beats_uniform_discrepancy() {
    let (m, d) = (256, 4);
    let s = sobol(m, d, 1);
    let mut rng = ChaRng::seed_from_u64(1);
    let mut worse = 0;
    for _ in 0..10 {
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        if l2_star(&Matrix::from_rows(&rows, d)) <= l2_star(&s) {
            worse += 1;
        }
    }
    assert_eq!(worse, 0);
}

#[test]
fn boltzmann_first_pick_follows_softmax() {
    let values = [0.0, 1.0, 2.0, 3.0];
    let eta = 1.0;
    let mean = 1.5;
    let sd = (1.25f64).sqrt();
    let w: Vec<f64> = values.iter().map(|v| (eta * (v - mean) / sd).exp()).collect();
    let total: f64 = w.iter().sum();
    let trials = 20_000;
    let mut counts = [0usize; 4];
    let mut rng = ChaRng::seed_from_u64(5);
    for _ in 0..trials {
        counts[boltzmann_select(&values, 1, eta, &mut rng).unwrap()[0]] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&w)
        .map(|(c, wi)| {
            let e = trials as f64 * wi / total;
            (*c as f64 - e).powi(2) / e
        })
        .sum();
    // 3 degrees of freedom, 99.9% quantile 16.27
    assert!(chi2 < 16.27, "chi2 {chi2}, counts {counts:?}");
}

proptest! {
    #[test]
    fn sobol_points_in_unit_cube(m in 1usize..64, d in 1usize..20, seed in any::<u64>()) {
        let s = sobol(m, d, seed);
        prop_assert!(s.iter_rows().all(|r| r.iter().all(|v| (0.0..1.0).contains(v))));
        prop_assert_eq!(s, sobol(m, d, seed));
    }

    #[test]
    fn raasp_stays_in_cube_near_boundary(d in 1usize..40, edge in prop::bool::ANY, seed in any::<u64>()) {
        let v = if edge { 1.0 } else { 0.0 };
        let base = Matrix::from_rows(&[vec![v; d]], d);
        let b = raasp_batch(&base, 16, d, seed).unwrap();
        prop_assert!(b.points.iter_rows().all(|r| r.iter().all(|x| (0.0..=1.0).contains(x))));
        prop_assert_eq!(b.len(), 32);
    }

    #[test]
    fn ei_monotone_in_mean_and_stddev(mean in -5.0..5.0f64, sd in 1e-3..5.0f64, best in -5.0..5.0f64, dm in 0.0..2.0f64, ds in 0.0..2.0f64) {
        let base = ei(mean, sd, best);
        prop_assert!(base >= 0.0);
        prop_assert!(ei(mean + dm, sd, best) >= base - 1e-12);
        prop_assert!(ei(mean, sd + ds, best) >= base - 1e-12);
    }

    #[test]
    fn otsd_final_value_ignores_order(pts in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 3), 2..8), rot in 0usize..8) {
        let mut shuffled = pts.clone();
        shuffled.rotate_left(rot % pts.len());
        let a = *otsd::<f64, _>(&pts).values.last().unwrap();
        let b = *otsd::<f64, _>(&shuffled).values.last().unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((a - brute_force::<f64, _>(&pts)).abs() < 1e-12);
    }
}
