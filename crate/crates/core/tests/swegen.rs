use std::f64::consts::PI;

use mitonet::numkit::Matrix;
use mitonet::swegen::*;
use mitonet::Error;

fn closed_basin_with_bump() -> (Channel1D, SweState) {
    let ch = Channel1D::linear_slope(40, 20_000.0, 8.0, 3.0).unwrap();
    let x = ch.unit_coordinates();
    let zeta = x.iter().map(|&s| 0.4 * (-((s - 0.3) / 0.1).powi(2)).exp()).collect();
    let s = SweState::new(&ch, zeta, vec![0.0; ch.nodes()]).unwrap();
    (ch, s)
}

#[test]
fn closed_basin_conserves_mass() {
    let (ch, mut s) = closed_basin_with_bump();
    let m0 = s.mass(&ch);
    for k in 0..1000 {
        s = swe_step(&s, &ch, &BoundaryValues::CLOSED, 0.01, 30.0, k).unwrap();
    }
    let drift = (s.mass(&ch) - m0).abs() / m0;
    assert!(drift < 1e-8, "relative mass drift {drift:e}");
}

#[test]
fn unforced_friction_dissipates_mechanical_energy() {
    let (ch, mut s) = closed_basin_with_bump();
    let energy = |s: &SweState| s.kinetic_energy(&ch) + s.potential_energy(&ch);
    let mut prev = energy(&s);
    let e0 = prev;
    for k in 0..1000 {
        s = swe_step(&s, &ch, &BoundaryValues::CLOSED, 0.02, 30.0, k).unwrap();
        let e = energy(&s);
        assert!(e <= prev * (1.0 + 1e-12), "energy rose at step {k}: {prev} -> {e}");
        prev = e;
    }
    assert!(prev < 0.5 * e0);
}

#[test]
fn rest_state_with_closed_ends_is_exact() {
    let ch = Channel1D::toy_riverine();
    let s0 = SweState::rest(&ch);
    let mut s = s0.clone();
    for k in 0..500 {
        s = swe_step(&s, &ch, &BoundaryValues::CLOSED, 0.05, 60.0, k).unwrap();
    }
    assert_eq!(s, s0);
}

#[test]
fn tidal_elevation_matches_superposition() {
    let specs = [
        (0.5, periods::M2, 0.1),
        (0.2, periods::S2, 1.3),
        (0.1, periods::N2, 2.0),
        (0.15, periods::O1, 0.4),
        (0.12, periods::K1, 5.0),
    ];
    let forcing = TidalForcing::new(
        specs
            .iter()
            .map(|&(a, p, ph)| Constituent::from_period_hours(a, p, ph))
            .collect(),
        2.0,
    )
    .unwrap();
    for k in 0..=(30 * 48) {
        let t = k as f64 * 1800.0;
        let ramp = (t / (2.0 * 86400.0)).min(1.0);
        let mut sum = 0.0;
        for &(a, p, ph) in &specs {
            sum += a * (2.0 * PI / (p * 3600.0) * t - ph).cos();
        }
        let diff = (tidal_elevation(&forcing, t) - ramp * sum).abs();
        assert!(diff < 1e-12, "t = {t}: diff {diff}");
    }
}

fn short_tidal(days: f64) -> SimConfig {
    SimConfig {
        duration_hours: days * 24.0,
        ..SimConfig::toy()
    }
}

#[test]
fn toy_tidal_run_has_expected_column_count() {
    let ch = Channel1D::toy_tidal();
    let set = simulate(&ch, &Scenario::Tidal(TidalForcing::toy()), 0.01, &SimConfig::toy(), 0)
        .unwrap();
    assert_eq!(set.n_s(), 64);
    assert_eq!(set.n_t(), 1201);
    assert_eq!(set.variable_names(), vec!["H", "U"]);
    assert_eq!(set.bc_series[0].len(), 1201);
}

#[test]
fn friction_extremes_diverge_after_ramp() {
    let ch = Channel1D::toy_tidal();
    let sc = Scenario::Tidal(TidalForcing::toy());
    let cfg = short_tidal(3.0);
    let a = simulate(&ch, &sc, 0.003, &cfg, 0).unwrap();
    let b = simulate(&ch, &sc, 0.05, &cfg, 0).unwrap();
    let ha = a.variable("H").unwrap();
    let hb = b.variable("H").unwrap();
    let j = a.n_t() - 1;
    let max_diff = (0..a.n_s())
        .map(|i| (ha.get(i, j) - hb.get(i, j)).abs())
        .fold(0.0, f64::max);
    assert!(max_diff > 1e-3, "max |dzeta| = {max_diff}");
}

#[test]
fn larger_friction_gives_smaller_peak_velocity() {
    let ch = Channel1D::toy_tidal();
    let sc = Scenario::Tidal(TidalForcing::toy());
    let cfg = short_tidal(4.0);
    let peaks: Vec<f64> = [0.003, 0.01, 0.05]
        .iter()
        .map(|&r| {
            let set = simulate(&ch, &sc, r, &cfg, 0).unwrap();
            let u = set.variable("U").unwrap();
            let start = set.index_at_hours(48.0);
            (start..set.n_t())
                .flat_map(|j| (0..set.n_s()).map(move |i| u.get(i, j).abs()))
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(peaks[0] > peaks[1] && peaks[1] > peaks[2], "{peaks:?}");
}

#[test]
fn simulation_is_deterministic() {
    let ch = Channel1D::toy_tidal();
    let sc = Scenario::Tidal(TidalForcing::toy());
    let cfg = SimConfig {
        ic_perturbation: 0.1,
        ..short_tidal(1.0)
    };
    let a = simulate(&ch, &sc, 0.01, &cfg, 9).unwrap();
    let b = simulate(&ch, &sc, 0.01, &cfg, 9).unwrap();
    assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    let c = simulate(&ch, &sc, 0.01, &cfg, 10).unwrap();
    assert_ne!(a, c);
}

#[test]
fn riverine_run_carries_two_boundary_series() {
    let ch = Channel1D::toy_riverine();
    let sc = Scenario::Riverine(RiverForcing::toy(3.0));
    let set = simulate(&ch, &sc, 0.02, &short_tidal(3.0), 0).unwrap();
    assert_eq!(set.bc_series.len(), 2);
    assert!(set.bc_series[0].iter().all(|&q| q >= 0.0));
    let u = set.variable("U").unwrap();
    assert!((0..set.n_s()).all(|i| u.get(i, set.n_t() - 1) > 0.0));
}

fn small_set() -> SnapshotSet {
    let ch = Channel1D::toy_tidal();
    simulate(&ch, &Scenario::Tidal(TidalForcing::toy()), 0.02, &short_tidal(0.5), 0).unwrap()
}

#[test]
fn snapshot_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.swsnap");
    let set = small_set();
    save_snapshots(&set, &path).unwrap();
    let back = load_snapshots(&path).unwrap();
    assert_eq!(set, back);
    assert_eq!(set.to_bytes().unwrap(), back.to_bytes().unwrap());
}

#[test]
fn truncated_snapshot_is_format_error() {
    let bytes = small_set().to_bytes().unwrap();
    for cut in [0, 5, 20, bytes.len() / 2, bytes.len() - 1] {
        let err = SnapshotSet::from_bytes(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "cut {cut}: {err:?}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(SnapshotSet::from_bytes(&extra), Err(Error::Format(_))));
}

#[test]
fn mismatched_variable_shapes_are_rejected() {
    let mut set = small_set();
    set.variables[1].1 = Matrix::zeros(set.n_s() - 1, set.n_t());
    assert!(set.to_bytes().is_err());

    // A hand-built file whose header N_s disagrees with the data length.
    let good = small_set().to_bytes().unwrap();
    let mut bad = good.clone();
    let n_s = u32::from_le_bytes(bad[7..11].try_into().unwrap());
    bad[7..11].copy_from_slice(&(n_s + 1).to_le_bytes());
    assert!(matches!(SnapshotSet::from_bytes(&bad), Err(Error::Format(_))));
}

#[test]
fn bad_magic_is_format_error() {
    let mut bytes = small_set().to_bytes().unwrap();
    bytes[0] = b'X';
    assert!(matches!(SnapshotSet::from_bytes(&bytes), Err(Error::Format(_))));
}

#[test]
fn missing_file_is_io_error() {
    let err = load_snapshots("/nonexistent/dir/x.swsnap").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}
