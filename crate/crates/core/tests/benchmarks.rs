mod common;

use common::props;
use mathonet::benchmarks::*;
use proptest::prelude::*;

#[test]
fn rk4_is_fourth_order() {
    for order in props::rk4_orders() {
        assert!((order - 4.0).abs() < 0.15, "observed order {order}");
    }
}

#[test]
fn lotka_volterra_conserves_its_first_integral() {
    assert_eq!(SystemSpec::lotka_volterra().trajectory().unwrap().len(), 300);
    let drift = props::lv_drift();
    assert!(drift < 1e-5, "relative drift {drift}");
}

#[test]
fn lorenz_stays_on_the_attractor() {
    let ds = generate_dataset(&SystemSpec::lorenz(), 0.0, 0).unwrap();
    assert_eq!(ds.len(), 1000);
    assert_eq!(ds.x[0], vec![-8.0, 7.0, 27.0]);
    for (x, y) in ds.x.iter().zip(&ds.y) {
        assert!(x.iter().all(|v| v.abs() < 60.0), "left the attractor at {x:?}");
        assert_eq!(y.as_slice(), lorenz_rhs(x).as_slice());
    }
}

#[test]
fn target_noise_has_the_requested_spread() {
    let clean = generate_dataset(&SystemSpec::lorenz(), 0.0, 0).unwrap();
    let noisy = generate_dataset(&SystemSpec::lorenz(), 0.1, 42).unwrap();
    assert_eq!(clean.x, noisy.x, "noise must only touch the targets");
    let diffs: Vec<f64> = clean
        .y
        .iter()
        .zip(&noisy.y)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(a, b)| b - a).collect::<Vec<_>>())
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 4.0 * 0.1 / n.sqrt(), "mean {mean}");
    assert!((sd - 0.1).abs() < 0.005, "sd {sd}");

    let again = generate_dataset(&SystemSpec::lorenz(), 0.1, 42).unwrap();
    assert_eq!(noisy, again);
    let other = generate_dataset(&SystemSpec::lorenz(), 0.1, 43).unwrap();
    assert_ne!(noisy.y, other.y);
}

#[test]
fn negative_noise_is_rejected() {
    assert!(generate_dataset(&SystemSpec::lorenz(), -1.0, 0).is_err());
}

#[test]
fn fisher_rows_are_interior_windows() {
    let spec = SystemSpec::fisher_kpp();
    let grid = spec.grid.clone().unwrap();
    let dx = grid.dx();
    assert!((dx - 0.04).abs() < 1e-15);
    let ds = generate_dataset(&spec, 0.0, 0).unwrap();
    assert_eq!(ds.len(), grid.snapshots * (grid.points - 2));
    assert_eq!(ds.n_inputs(), 3);
    for (x, y) in ds.x.iter().zip(&ds.y) {
        let want = FISHER_D * (x[0] - 2.0 * x[1] + x[2]) / (dx * dx) + FISHER_R * x[1] * (1.0 - x[1]);
        assert!((y[0] - want).abs() <= 1e-9 * want.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(common::cases(256))]

    #[test]
    fn fisher_rhs_of_a_constant_field_is_pure_reaction(p in 0.0..1.5f64, n in 3usize..30) {
        let field = vec![p; n];
        let rhs = fisher_rhs(&field, 0.1).unwrap();
        for v in rhs {
            prop_assert!((v - FISHER_R * p * (1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_step_is_exact_for_linear_growth(a in -2.0..2.0f64, dt in 1e-3..0.1f64) {
        let next = rk4_step(|s: &[f64]| vec![a * s[0]], &[1.0], dt).unwrap();
        let z = a * dt;
        let taylor = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        prop_assert!((next[0] - taylor).abs() < 1e-14);
    }
}
