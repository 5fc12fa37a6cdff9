use harmshift::adjust::AdjustmentModel;
use harmshift::features::{Class, Condition, FeatureMatrix, RowMeta};
use harmshift::harmonic::{recording_features, HarmonicConfig};
use harmshift::io::read_manifest;
use harmshift::synth::{
    default_bearings, generate_dataset, generate_recording, BearingSpec, ConditionGrid, Physics,
    BALL_ORDER, DEFAULT_SEVERITY, OUTER_RACE_ORDER,
};
use ndarray::{Array2, Axis};

fn mean_rows(rows: &Array2<f64>) -> Vec<f64> {
    rows.mean_axis(Axis(0)).unwrap().to_vec()
}

#[test]
fn defects_raise_their_envelope_lines() {
    let grid = ConditionGrid::fifteen_cells();
    let physics = Physics::default();
    let cfg = HarmonicConfig::default();
    let faulty = &default_bearings(DEFAULT_SEVERITY)[3]; // outer race + ball
    let twin = BearingSpec::healthy("twin", faulty.resonance_hz);
    for cond in [
        Condition::new(2000.0, 0.0),
        Condition::new(3000.0, 10.0),
        Condition::new(5000.0, 0.0),
    ] {
        let fo = cond.fo_hz();
        let f = recording_features(
            &generate_recording(faulty, &cond, &grid, &physics, 77).unwrap(),
            fo,
            &cfg,
        )
        .unwrap();
        let h = recording_features(
            &generate_recording(&twin, &cond, &grid, &physics, 77).unwrap(),
            fo,
            &cfg,
        )
        .unwrap();
        let (f, h) = (mean_rows(&f), mean_rows(&h));
        for order in [OUTER_RACE_ORDER, BALL_ORDER] {
            // Column j holds harmonic (j + 1) / d.
            let cols: Vec<usize> = (1..=3)
                .map(|k| (k as f64 * order * cfg.d as f64).round() as usize - 1)
                .collect();
            let gain = cols.iter().map(|&j| f[j] - h[j]).sum::<f64>() / cols.len() as f64;
            assert!(gain > 6.0, "{cond}, order {order}: {gain:.2} dB");
        }
    }
}

#[test]
fn healthy_trend_direction_is_recovered() {
    let grid = ConditionGrid::fifteen_cells();
    let physics = Physics::default();
    let cfg = HarmonicConfig {
        use_hilbert: false,
        ..HarmonicConfig::default()
    };
    let spec = &default_bearings(1.0)[0];
    let mut blocks = Vec::new();
    for (i, cond) in grid.cells.iter().enumerate() {
        let rows = recording_features(
            &generate_recording(spec, cond, &grid, &physics, i as u64).unwrap(),
            cond.fo_hz(),
            &cfg,
        )
        .unwrap();
        let meta = (0..rows.nrows())
            .map(|s| RowMeta {
                bearing_id: spec.id.clone(),
                class: Class::Healthy,
                condition: *cond,
                run: 0,
                segment: s as u32,
            })
            .collect();
        blocks.push(FeatureMatrix::new(rows, meta, cfg.column_labels()).unwrap());
    }
    let h = FeatureMatrix::concat(blocks).unwrap();
    let model = AdjustmentModel::fit(&h).unwrap();
    let (fo, to): (Vec<f64>, Vec<f64>) = (h.fo(), h.to());
    let fo_mean = fo.iter().sum::<f64>() / fo.len() as f64;
    let to_mean = to.iter().sum::<f64>() / to.len() as f64;
    // Shaft harmonics 1..=3 sit in columns 4k - 1.
    for k in 1..=3 {
        let a = model.coeffs().row(4 * k - 1);
        let d_fo = a[1] + 2.0 * a[3] * fo_mean + a[4] * to_mean;
        let d_to = a[2] + a[4] * fo_mean + 2.0 * a[5] * to_mean;
        assert!(d_fo > 0.0, "harmonic {k}: d/dfo = {d_fo}");
        assert!(d_to > 0.0, "harmonic {k}: d/dto = {d_to}");
    }
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn default_dataset_shape_and_determinism() {
    let grid = ConditionGrid {
        duration_s: 0.1,
        ..ConditionGrid::fifteen_cells()
    };
    let specs = default_bearings(1.0);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&specs, &grid, &Physics::default(), 1, 5, a.path()).unwrap();
    generate_dataset(&specs, &grid, &Physics::default(), 1, 5, b.path()).unwrap();
    let entries = read_manifest(&manifest).unwrap();
    assert_eq!(entries.len(), 90);
    assert_eq!(entries.iter().filter(|e| e.held_out).count(), 18);
    assert!(entries
        .iter()
        .filter(|e| e.held_out)
        .all(|e| grid.held_out.contains(&e.condition())));
    assert_eq!(
        entries.iter().filter(|e| e.class == Class::Faulty).count(),
        45
    );
    assert!(dir_bytes(a.path()) == dir_bytes(b.path()));
}
