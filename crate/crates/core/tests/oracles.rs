//! Library results checked against brute-force reference computations.

mod common;

use harmshift::adjust::{apply_adjustment, fit_adjustment, AdjustmentModel};
use harmshift::eval::{
    class_balanced_error, fit_projection, knn_predict, loo_predictions, make_splits, select_k_star,
    TrainMatrix,
};
use harmshift::features::{Class, Condition, RowMeta};
use harmshift::harmonic::{extract_harmonic_rows, HarmonicConfig};
use harmshift::signal::{
    blackman_window, one_sided_spectrum, window_energy_correction, Fourier, Signal,
};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn spectrum_matches_naive_dft_and_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut fourier = Fourier::new();
    for n in [8usize, 9, 30, 64, 97, 250] {
        let x = random_vec(&mut rng, n);
        let fast = one_sided_spectrum(&x, 1000.0).unwrap();
        let slow = naive_dft_magnitudes(&x);
        assert_eq!(fast.bins.len(), n / 2);
        for (a, b) in fast.bins.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b), "n={n}: {a} vs {b}");
        }
        let energy: f64 = fourier.dft(&x).iter().map(|c| c.norm_sqr()).sum();
        let time: f64 = x.iter().map(|v| v * v).sum();
        assert!((energy / n as f64 - time).abs() <= 1e-9 * time);
        assert!((naive_dft_energy(&x) / n as f64 - time).abs() <= 1e-9 * time);
    }
}

#[test]
fn blackman_sums_match_closed_form() {
    let n = 64;
    let w = blackman_window(n).unwrap();
    let oracle: f64 = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            0.42 - 0.5 * (2.0 * std::f64::consts::PI * t).cos()
                + 0.08 * (4.0 * std::f64::consts::PI * t).cos()
        })
        .sum();
    assert!((w.iter().sum::<f64>() - oracle).abs() < 1e-12);

    let w = blackman_window(1024).unwrap();
    let sum_sq: f64 = w.iter().map(|v| v * v).sum();
    assert!((sum_sq / 1024.0 - 0.3046).abs() < 1e-3);
    let c = window_energy_correction(&w).unwrap();
    assert!((c - (1024.0 / sum_sq).sqrt()).abs() < 1e-12);
    assert!((c - 1.812).abs() < 1e-3);
}

#[test]
fn harmonic_rows_match_hand_built_pipeline() {
    let fs = 800.0;
    let fo = 50.0;
    let cfg = HarmonicConfig {
        fs,
        fo_max: 50.0,
        use_hilbert: false,
        max_harmonics: 2,
        ..HarmonicConfig::default()
    };
    let n = 64; // 800 * 4 / 50
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_vec(&mut rng, 3 * n + 10);
    let rows = extract_harmonic_rows(&Signal::new(x.clone(), fs).unwrap(), fo, &cfg).unwrap();
    assert_eq!(rows.dim(), (3, n / 2));

    let w = blackman_window(n).unwrap();
    let c = (n as f64 / w.iter().map(|v| v * v).sum::<f64>()).sqrt();
    for seg in 0..3 {
        let mut s: Vec<f64> = x[seg * n..(seg + 1) * n]
            .iter()
            .zip(&w)
            .map(|(a, b)| a * b)
            .collect();
        let mean = s.iter().sum::<f64>() / n as f64;
        s.iter_mut().for_each(|v| *v -= mean);
        let expect: Vec<f64> = naive_dft_magnitudes(&s)
            .iter()
            .map(|m| m * c / (n as f64 / 2.0))
            .collect();
        for (k, e) in expect.iter().enumerate() {
            assert!((rows[[seg, k]] - e).abs() < 1e-9, "segment {seg} bin {k}");
        }
    }
}

fn random_fit_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Array2<f64>) {
    let conds = fifteen_conditions();
    let fo: Vec<f64> = conds.iter().map(Condition::fo_hz).collect();
    let to: Vec<f64> = conds.iter().map(|c| c.load_nm).collect();
    let h = Array2::from_shape_fn((conds.len(), 5), |_| rng.random_range(-80.0..0.0));
    (fo, to, h)
}

#[test]
fn least_squares_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (fo, to, h) = random_fit_case(&mut rng);
        let model = fit_adjustment(&h, &fo, &to).unwrap();
        for j in 0..h.ncols() {
            let oracle = normal_equations_fit(&fo, &to, &h.column(j).to_vec());
            let got = model.coeffs().row(j);
            assert_eq!(got[0], 0.0);
            for p in 1..6 {
                let rel = (got[p] - oracle[p]).abs() / oracle[p].abs().max(1e-12);
                assert!(
                    rel < 1e-8,
                    "feature {j} monomial {p}: {} vs {}",
                    got[p],
                    oracle[p]
                );
            }
        }
    }
}

#[test]
fn adjusted_training_rows_are_residual_plus_intercept() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (fo, to, h) = random_fit_case(&mut rng);
    let model = fit_adjustment(&h, &fo, &to).unwrap();
    let adjusted = apply_adjustment(&h, &fo, &to, &model).unwrap();
    for j in 0..h.ncols() {
        let y = h.column(j).to_vec();
        let beta = normal_equations_fit(&fo, &to, &y);
        for i in 0..y.len() {
            let residual = y[i] - poly(&beta, fo[i], to[i]);
            assert!((adjusted[[i, j]] - (residual + beta[0])).abs() < 1e-9);
        }
    }
}

#[test]
fn refitting_exact_residuals_gives_a_null_model() {
    let conds = fifteen_conditions();
    let m = polynomial_matrix(
        &conds,
        &[-20.0, -45.0],
        &[
            [0.3, -0.2, 0.004, 0.01, -0.003],
            [-0.1, 0.5, 0.0, -0.02, 0.01],
        ],
    );
    let first = AdjustmentModel::fit(&m).unwrap();
    let adjusted = harmshift::adjust::adjust_matrix(&m, &first).unwrap();
    let second = AdjustmentModel::fit(&adjusted).unwrap();
    let norm = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm(second.coeffs()) <= 1e-6 * norm(first.coeffs()));
}

#[test]
fn healthy_residual_variance_shrinks() {
    let conds = fifteen_conditions();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sigma = 0.5;
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    for rep in 0..20 {
        for &c in &conds {
            let (a, b) = (c.fo_hz(), c.load_nm);
            rows.push(-30.0 + 0.4 * a + 0.8 * b + 0.002 * a * a + rng.sample(normal));
            meta.push(RowMeta {
                bearing_id: "H".into(),
                class: Class::Healthy,
                condition: c,
                run: rep,
                segment: 0,
            });
        }
    }
    let n = rows.len();
    let m = harmshift::features::FeatureMatrix::new(
        Array2::from_shape_vec((n, 1), rows).unwrap(),
        meta,
        vec!["f".into()],
    )
    .unwrap();
    let model = AdjustmentModel::fit(&m).unwrap();
    let adj = harmshift::adjust::adjust_matrix(&m, &model).unwrap();
    let var = |v: ndarray::ArrayView1<f64>| {
        let mean = v.mean().unwrap();
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
    };
    let before = var(m.values().column(0));
    let after = var(adj.values().column(0));
    assert!(after <= before);
    assert!(after <= 1.1 * sigma * sigma, "{after}");
}

/// Integer coordinates in a small box so that distance ties are common.
fn tie_heavy_instance(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> (Array2<f64>, Vec<usize>) {
    let pts = Array2::from_shape_fn((n, 2), |_| rng.random_range(0..4) as f64);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    labels[0] = 0;
    labels[1] = 1;
    (pts, labels)
}

#[test]
fn knn_loo_and_k_star_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..300 {
        let n = rng.random_range(3..=12);
        let classes = rng.random_range(2..=3);
        let (pts, labels) = tie_heavy_instance(&mut rng, n, classes);
        let rows = to_rows(&pts);
        for k in 1..=n {
            let q = [rng.random_range(0..4) as f64, rng.random_range(0..4) as f64];
            let got = knn_predict(pts.view(), &labels, Array1::from(q.to_vec()).view(), k).unwrap();
            assert_eq!(got, brute_knn(&rows, &labels, &q, k, None));
        }
        let loo = loo_predictions(pts.view(), &labels, n - 1).unwrap();
        for k in 1..n {
            for i in 0..n {
                assert_eq!(
                    loo[k - 1][i],
                    brute_knn(&rows, &labels, &rows[i], k, Some(i))
                );
            }
        }
        let k_max = rng.random_range(1..=n + 2);
        let sel = select_k_star(pts.view(), &labels, k_max).unwrap();
        let (k_star, errors) = brute_k_star(&rows, &labels, k_max);
        assert_eq!(sel.k_star, k_star);
        for (e, (num, den)) in sel.errors.iter().zip(&errors) {
            assert!((e - *num as f64 / *den as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn balanced_error_weights_classes_equally() {
    // 1 of 4 healthy wrong, 1 of 2 faulty wrong -> (0.25 + 0.5) / 2
    let truth = [0, 0, 0, 0, 1, 1];
    let pred = [0, 1, 0, 0, 1, 0];
    assert_eq!(class_balanced_error(&pred, &truth), 0.375);
}

#[test]
fn pca_reconstructs_rank_two_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = Array2::from_shape_fn((40, 2), |_| rng.random_range(-3.0..3.0));
    let v = Array2::from_shape_fn((2, 9), |_| rng.random_range(-1.0..1.0));
    let x = u.dot(&v) + 5.0;
    let p = fit_projection(&TrainMatrix::tag(x.clone()), 2).unwrap();
    let z = (&x - &p.feature_means) / &p.feature_stds;
    let recon = p.project(x.view()).unwrap().dot(&p.components);
    let err = (&z - &recon).iter().map(|e| e * e).sum::<f64>().sqrt();
    let scale = z.iter().map(|e| e * e).sum::<f64>().sqrt();
    assert!(err <= 1e-8 * scale);
    let gram = p.components.dot(&p.components.t());
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((gram[[i, j]] - want).abs() < 1e-10);
        }
    }
}

#[test]
fn pca_four_by_three_by_hand() {
    // Columns 0 and 1 standardise to the same z, column 2 to w = (1,-1,-1,1);
    // z . w = 0, so the axes are (1,1,0)/sqrt2 (eigenvalue 8) and (0,0,1) (4).
    let x = array![
        [1.0, 12.0, 5.0],
        [2.0, 14.0, 3.0],
        [3.0, 16.0, 3.0],
        [4.0, 18.0, 5.0]
    ];
    let p = fit_projection(&TrainMatrix::tag(x.clone()), 2).unwrap();
    assert_eq!(p.feature_means, array![2.5, 15.0, 4.0]);
    let sd = 1.25f64.sqrt();
    assert!((p.feature_stds[0] - sd).abs() < 1e-12);
    assert!((p.feature_stds[1] - 2.0 * sd).abs() < 1e-12);
    assert!((p.feature_stds[2] - 1.0).abs() < 1e-12);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let want = array![[r, r, 0.0], [0.0, 0.0, 1.0]];
    assert!((&p.components - &want).iter().all(|d| d.abs() < 1e-10));
    assert!((p.explained_variance[0] - 8.0 / 3.0).abs() < 1e-10);
    assert!((p.explained_variance[1] - 4.0 / 3.0).abs() < 1e-10);
    let proj = p.project(x.view()).unwrap();
    let z0 = -1.5 / sd;
    assert!((proj[[0, 0]] - 2.0 * z0 * r).abs() < 1e-10);
    assert!((proj[[0, 1]] - 1.0).abs() < 1e-10);
    let mean = p.project(array![[2.5, 15.0, 4.0]].view()).unwrap();
    assert!(mean.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn pca_isotropic_and_constant_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let mut x = Array2::from_shape_fn((600, 3), |_| rng.sample(normal));
    let p = fit_projection(&TrainMatrix::tag(x.clone()), 2).unwrap();
    let ev = &p.explained_variance;
    assert!(ev[0] >= ev[1] && ev[1] >= 0.8 * ev[0], "{ev}");

    x.column_mut(2).fill(7.0);
    let p = fit_projection(&TrainMatrix::tag(x.clone()), 2).unwrap();
    let mut moved = x.clone();
    moved.column_mut(2).fill(1e6);
    assert_eq!(
        p.project(x.view()).unwrap(),
        p.project(moved.view()).unwrap()
    );

    // Affine in the input rows.
    let a = x.row(0).to_owned();
    let b = x.row(1).to_owned();
    let mix = &a * 0.3 + &b * 0.7;
    let rows = ndarray::stack(ndarray::Axis(0), &[a.view(), b.view(), mix.view()]).unwrap();
    let pr = p.project(rows.view()).unwrap();
    for j in 0..2 {
        assert!((pr[[2, j]] - (0.3 * pr[[0, j]] + 0.7 * pr[[1, j]])).abs() < 1e-12);
    }
}

#[test]
fn splits_are_hygienic() {
    let bearings = ["AM-01", "AM-02", "AM-03", "F3-01", "F5-01", "F7-01"];
    let held = [
        Condition::new(2000.0, 5.0),
        Condition::new(3000.0, 5.0),
        Condition::new(4000.0, 5.0),
    ];
    let mut meta = Vec::new();
    for b in bearings {
        for c in fifteen_conditions() {
            meta.push(RowMeta {
                bearing_id: b.into(),
                class: if b.starts_with('A') {
                    Class::Healthy
                } else {
                    Class::Faulty
                },
                condition: c,
                run: 0,
                segment: 0,
            });
        }
    }
    let plans = make_splits(&meta, &held).unwrap();
    assert_eq!(plans.len(), 18);
    for p in &plans {
        assert!(p
            .train_rows
            .iter()
            .all(|&i| meta[i].bearing_id != p.test_bearing));
        assert!(p
            .train_rows
            .iter()
            .all(|&i| !held.contains(&meta[i].condition)));
        assert!(p.test_rows.iter().all(
            |&i| meta[i].bearing_id == p.test_bearing && meta[i].condition == p.test_condition
        ));
    }
    let one: Vec<RowMeta> = meta
        .iter()
        .filter(|m| m.bearing_id == "AM-01")
        .cloned()
        .collect();
    assert!(make_splits(&one, &held).is_err());
}
