use nearfield_core::array::ArrayGeometry;
use nearfield_core::channel::{simulate_dwell, SubcarrierGrid, SubcarrierSet};
use nearfield_core::features::{fft4d_features, normalize, select_subcarriers, to_real, FftPadding, SensingSelection};
use nearfield_core::scene::{build_target, GeometryParams, ScenarioConfig, TargetClass};
use nearfield_core::solver::{SolverConfig, SolverMode};

fn setup() -> (nearfield_core::scene::TargetModel, ScenarioConfig, ArrayGeometry, SubcarrierSet) {
    let grid = SubcarrierGrid::default();
    let model = build_target(TargetClass::Motorcycle, &GeometryParams::default(), 0.25).unwrap();
    let cfg = ScenarioConfig::new(12.0, 35.0, 9.0, 10.0, 3, 0.01);
    let array = ArrayGeometry::cross(3, 3, grid.carrier_hz).unwrap();
    let set = SubcarrierSet { grid, indices: vec![0, 21, 42, 63] };
    (model, cfg, array, set)
}

#[test]
fn iterative_dwell_matches_dense_dwell_with_spinning_wheels() {
    let (model, cfg, array, set) = setup();
    let dense = SolverConfig { mode: SolverMode::DenseDirect, ..SolverConfig::default() };
    let iter = SolverConfig { tolerance: 1e-9, ..SolverConfig::default() };
    let (a, meta) = simulate_dwell(&model, &cfg, &array, &set, &dense, None).unwrap();
    let (b, _) = simulate_dwell(&model, &cfg, &array, &set, &iter, None).unwrap();
    assert_eq!(a.dims(), [3, 3, 4, 3]);
    assert_eq!(meta.cells.len(), 12);
    let num: f64 = a.data.iter().zip(b.data.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.data.iter().map(|x| x.norm_sqr()).sum();
    assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());

    // Wheels turn, so consecutive frames differ beyond the bulk phase.
    assert!(a.matrix(0, 0) != a.matrix(0, 1));
}

#[test]
fn features_shapes_follow_the_selection() {
    let (model, cfg, array, set) = setup();
    let dense = SolverConfig::dense();
    let (t, _) = simulate_dwell(&model, &cfg, &array, &set, &dense, None).unwrap();
    let sel = SensingSelection::new(vec![1, 3]).unwrap();
    let reduced = select_subcarriers(&t, &sel).unwrap();
    assert_eq!(reduced.dims(), [3, 3, 2, 3]);
    assert_eq!(reduced.frequencies_hz, vec![t.frequencies_hz[1], t.frequencies_hz[3]]);

    let u = normalize(&to_real(&reduced));
    assert_eq!(u.data.shape(), &[2, 3, 3, 3, 2]);
    assert!(!u.degenerate);

    let map = fft4d_features(&reduced.data, FftPadding(2)).unwrap();
    assert_eq!(map.dim(), (6, 4));
    assert!(map.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn dwell_is_reproducible_and_noise_is_keyed_by_cell() {
    let (model, cfg, array, set) = setup();
    let dense = SolverConfig::dense();
    let noise = Some(nearfield_core::channel::ChannelNoise { sigma: 1e3, seed: 5 });
    let (a, _) = simulate_dwell(&model, &cfg, &array, &set, &dense, noise).unwrap();
    let (b, _) = simulate_dwell(&model, &cfg, &array, &set, &dense, noise).unwrap();
    assert_eq!(a.data, b.data);

    // Simulating a subset reproduces the same cells, noise included.
    let subset = SubcarrierSet { grid: set.grid, indices: vec![21, 63] };
    let (c, _) = simulate_dwell(&model, &cfg, &array, &subset, &dense, noise).unwrap();
    assert_eq!(c.matrix(0, 2), a.matrix(1, 2));
    assert_eq!(c.matrix(1, 0), a.matrix(3, 0));
}
