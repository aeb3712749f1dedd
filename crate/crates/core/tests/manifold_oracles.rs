mod common;

use common::*;
use egoctx::manifold::{isomap_fit, pca_fit, som_fit, tcq, FeatureMatrix, SomConfig, SomGrid};
use proptest::prelude::*;

#[test]
fn pca_components_match_jacobi() {
    let x = gaussian_matrix(3, 80, 6);
    let model = pca_fit(&x, 4).unwrap();
    let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| r.to_vec()).collect();
    let (mean, cov) = covariance(&rows);
    let (values, vectors) = jacobi_eigen(&cov, 6);
    for (a, b) in model.mean.iter().zip(&mean) {
        assert!((a - b).abs() < 1e-10);
    }
    for k in 0..4 {
        assert!((model.eigenvalues[k] - values[k]).abs() < 1e-8 * values[0]);
        let dot: f64 = (0..6).map(|j| model.component(k)[j] * vectors[j * 6 + k]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "component {k} misaligned: {dot}");
    }
}

#[test]
fn pca_round_trip_is_exact_with_all_components() {
    let x = gaussian_matrix(4, 30, 5);
    let model = pca_fit(&x, 5).unwrap();
    for r in x.iter_rows() {
        let back = model.inverse_transform(&model.transform(r).unwrap()).unwrap();
        for (a, b) in back.iter().zip(r) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn isomap_on_plane_is_close_to_truth_after_alignment() {
    let (x, coords) = plane_in_space(11, 150, 8);
    let model = isomap_fit(&x, 10, 2).unwrap();
    let emb: Vec<[f64; 2]> = (0..150)
        .map(|i| [model.embedding_row(i)[0], model.embedding_row(i)[1]])
        .collect();
    let aligned = procrustes_2d(&emb, &coords);
    let rms = (aligned
        .iter()
        .zip(&coords)
        .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
        .sum::<f64>()
        / 150.0)
        .sqrt();
    // graph geodesics overshoot by a few percent; the side length is 10
    assert!(rms < 0.6, "aligned RMS {rms}");
    assert!(model.residual_variance < 0.02);
}

#[test]
fn isomap_geodesics_are_a_metric() {
    let (x, _) = swiss_roll(5, 200);
    let model = isomap_fit(&x, 8, 2).unwrap();
    let n = model.n_train;
    for i in (0..n).step_by(7) {
        assert_eq!(model.geodesic(i, i), 0.0);
        for j in (0..n).step_by(11) {
            assert_eq!(model.geodesic(i, j), model.geodesic(j, i));
            let direct: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(model.geodesic(i, j) >= direct - 1e-9);
            for k in (0..n).step_by(37) {
                assert!(model.geodesic(i, j) <= model.geodesic(i, k) + model.geodesic(k, j) + 1e-9);
            }
        }
    }
}

#[test]
fn isomap_transform_of_training_point_lands_near_its_embedding() {
    let (x, _) = swiss_roll(8, 300);
    let model = isomap_fit(&x, 10, 2).unwrap();
    let spread = (0..300).map(|i| model.embedding_row(i)[0].abs()).fold(0.0, f64::max);
    for i in (0..300).step_by(29) {
        let y = model.transform(x.row(i)).unwrap();
        let e = model.embedding_row(i);
        let err = ((y[0] - e[0]).powi(2) + (y[1] - e[1]).powi(2)).sqrt();
        assert!(err < 0.05 * spread, "row {i}: {err}");
    }
}

fn brute_bmu(grid: &SomGrid, x: &[f64]) -> usize {
    (0..grid.neurons())
        .map(|n| {
            (
                n,
                grid.weights(n)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>(),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .unwrap()
        .0
}

#[test]
fn som_bmu_and_tcq_match_brute_force() {
    let x = three_gaussians(9, 40);
    let grid = som_fit(&x, 4, 3, &SomConfig::with_seed(9)).unwrap();
    let mut hits = 0;
    for r in x.iter_rows() {
        assert_eq!(grid.bmu(r).unwrap(), brute_bmu(&grid, r));
        let mut d: Vec<(usize, f64)> = (0..grid.neurons())
            .map(|n| {
                (
                    n,
                    grid.weights(n)
                        .iter()
                        .zip(r)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>(),
                )
            })
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let ((ax, ay), (bx, by)) = (grid.coords(d[0].0), grid.coords(d[1].0));
        if ax.abs_diff(bx) + ay.abs_diff(by) == 1 {
            hits += 1;
        }
    }
    let report = tcq(&grid, &x).unwrap();
    assert_eq!(report.hits, hits);
    assert_eq!(report.q, x.rows());
}

#[test]
fn som_seed_controls_result() {
    let x = three_gaussians(2, 30);
    let a = som_fit(&x, 3, 3, &SomConfig::with_seed(1)).unwrap();
    let b = som_fit(&x, 3, 3, &SomConfig::with_seed(1)).unwrap();
    let c = som_fit(&x, 3, 3, &SomConfig::with_seed(2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.codebook, c.codebook);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pca_projection_preserves_total_variance(seed in 0u64..1000, n in 12usize..40, d in 2usize..6) {
        let x = gaussian_matrix(seed, n, d);
        let model = pca_fit(&x, d).unwrap();
        let y = model.transform_matrix(&x).unwrap();
        let total_y: f64 = y.iter().flatten().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
        let total_eig: f64 = model.eigenvalues.iter().sum();
        prop_assert!((total_y - total_eig).abs() <= 1e-8 * total_eig.max(1.0));
    }

    #[test]
    fn tcq_lies_in_unit_interval(seed in 0u64..500, w in 1usize..5, h in 2usize..5) {
        let x = smooth_sequence(seed, 60);
        let grid = som_fit(&x, w, h, &SomConfig { epochs: 3, ..SomConfig::with_seed(seed) }).unwrap();
        let r = tcq(&grid, &x).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.tcq));
        prop_assert!(r.hits <= r.q);
    }

    #[test]
    fn quantization_error_is_mean_bmu_distance(seed in 0u64..500) {
        let x = three_gaussians(seed, 10);
        let grid = som_fit(&x, 3, 2, &SomConfig { epochs: 4, ..SomConfig::with_seed(seed) }).unwrap();
        let want: f64 = x
            .iter_rows()
            .map(|r| grid.weights(brute_bmu(&grid, r)).iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .sum::<f64>()
            / x.rows() as f64;
        prop_assert!((grid.quantization_error(&x).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn feature_matrix_rejects_ragged_rows() {
    assert!(FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
}
