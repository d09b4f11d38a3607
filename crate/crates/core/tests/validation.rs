mod common;

use common::props;
use mathonet::benchmarks::{lorenz_rhs, SystemSpec};
use mathonet::par::Exec;
use mathonet::validation::{mc_uncertainty, simulate_discovered, simulate_rhs, trajectory_rmse};
use mathonet::{MathONet, Model, UnaryKind};

fn linear(w: f64) -> MathONet {
    props::linear_net(w)
}

/// One identity neuron per term: `Σ c·x_i·x_j` or `c·x_i`.
fn polynomial(terms: &[(f64, usize, Option<usize>)]) -> MathONet {
    let mut net = MathONet::zeros(3, &[terms.len()], &[UnaryKind::Identity]);
    for (k, &(c, i, j)) in terms.iter().enumerate() {
        let n = &mut net.layers[0].neurons[k];
        match j {
            Some(j) => n.polys[i].w[j] = c,
            None => n.polys[i].w[3] = c,
        }
        n.oper.w = vec![1.0];
        net.output_polys[k].w[3] = 1.0;
    }
    net
}

fn lorenz_nets() -> Vec<MathONet> {
    vec![
        polynomial(&[(-10.0, 0, None), (10.0, 1, None)]),
        polynomial(&[(28.0, 0, None), (-1.0, 0, Some(2)), (-1.0, 1, None)]),
        polynomial(&[(1.0, 0, Some(1)), (-8.0 / 3.0, 2, None)]),
    ]
}

#[test]
fn mc_variance_of_a_linear_model_matches_x2_zeta() {
    let err = props::mc_linear_variance_error();
    assert!(err < 0.1, "relative variance error {err}");
}

#[test]
fn mc_band_does_not_depend_on_job_count() {
    let net = linear(1.5);
    let zeta = vec![0.02; net.params().len()];
    let xs: Vec<Vec<f64>> = (0..30).map(|k| vec![k as f64 * 0.1]).collect();
    let a = mc_uncertainty(&net, &zeta, &xs, 500, 3, &Exec::sequential()).unwrap();
    let b = mc_uncertainty(&net, &zeta, &xs, 500, 3, &Exec::new(4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_posterior_variance_gives_a_zero_band() {
    let net = linear(1.5);
    let zeta = vec![0.0; net.params().len()];
    let band = mc_uncertainty(&net, &zeta, &[vec![2.0]], 50, 0, &Exec::sequential()).unwrap();
    assert_eq!(band.variance, vec![0.0]);
    assert_eq!(band.mean, vec![3.0]);
    assert!(mc_uncertainty(&net, &zeta, &[vec![2.0]], 0, 0, &Exec::sequential()).is_err());
}

#[test]
fn exact_nets_resimulate_the_true_system() {
    let spec = SystemSpec::lorenz();
    let nets = lorenz_nets();
    let sim = simulate_discovered(&nets, &spec.x0, 0.01, 500).unwrap();
    let truth = simulate_rhs(|s: &[f64]| lorenz_rhs(s).to_vec(), &spec.x0, 0.01, 500);
    assert!(!sim.diverged());
    assert_eq!(sim.states.len(), 501);
    let err = trajectory_rmse(&sim.states, &truth.states, 200).unwrap();
    assert!(err < 1e-9, "rmse {err}");
    // The same trajectory as the data generator's.
    let data = spec.trajectory().unwrap();
    assert!(trajectory_rmse(&sim.states, &data, 200).unwrap() < 1e-9);
}

#[test]
fn perturbed_rho_drifts_away() {
    let spec = SystemSpec::lorenz();
    let mut nets = lorenz_nets();
    nets[1] = polynomial(&[(28.5, 0, None), (-1.0, 0, Some(2)), (-1.0, 1, None)]);
    let sim = simulate_discovered(&nets, &spec.x0, 0.01, 999).unwrap();
    let data = spec.trajectory().unwrap();
    let short = trajectory_rmse(&sim.states, &data, 50).unwrap();
    let long = trajectory_rmse(&sim.states, &data, 1000).unwrap();
    assert!(short < long);
    assert!(long > 1.0);
}

#[test]
fn blow_up_truncates_the_trajectory() {
    let tr = simulate_rhs(|s: &[f64]| vec![s[0] * s[0]], &[1.0], 0.1, 1000);
    assert!(tr.diverged());
    assert!(tr.states.len() < 1000);
    assert!(tr.states.iter().all(|s| s[0].is_finite()));
}

#[test]
fn rmse_rejects_bad_horizons() {
    let a = vec![vec![0.0]; 5];
    assert!(trajectory_rmse(&a, &a, 0).is_err());
    assert!(trajectory_rmse(&a, &a, 6).is_err());
    assert_eq!(trajectory_rmse(&a, &a, 5).unwrap(), 0.0);
}

#[test]
fn wrong_model_count_is_rejected() {
    let nets = lorenz_nets();
    assert!(simulate_discovered(&nets[..2], &[1.0, 2.0, 3.0], 0.01, 10).is_err());
    assert!(simulate_discovered(&nets, &[1.0, 2.0, 3.0], 0.0, 10).is_err());
}
