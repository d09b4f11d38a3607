//! Re-simulation of discovered right-hand sides, trajectory error, and
//! Monte-Carlo predictive bands under the diagonal posterior.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::benchmarks::rk4_step;
use crate::error::{check_len, Error, Result};
use crate::model::Model;
use crate::par::Exec;

/// Simulation stops once the state norm exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    /// Step at which the state blew up; `states` stops just before it.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.len()).map(move |k| k as f64 * self.dt)
    }
}

/// RK4 with an arbitrary right-hand side, truncated on blow-up.
pub fn simulate_rhs(rhs: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], dt: f64, steps: usize) -> Trajectory {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut diverged_at = None;
    for step in 1..=steps {
        let next = match rk4_step(&rhs, states.last().unwrap(), dt) {
            Ok(s) if s.iter().map(|v| v * v).sum::<f64>().sqrt() <= DIVERGENCE_NORM => s,
            _ => {
                diverged_at = Some(step);
                break;
            }
        };
        states.push(next);
    }
    Trajectory {
        dt,
        states,
        diverged_at,
    }
}

/// Integrates the system whose `j`-th derivative is `models[j]`.
pub fn simulate_discovered<M: Model>(models: &[M], x0: &[f64], dt: f64, steps: usize) -> Result<Trajectory> {
    check_len("one model per state dimension", x0.len(), models.len())?;
    for m in models {
        check_len("model input dimension", x0.len(), m.n_inputs())?;
    }
    if !(dt > 0.0) {
        return Err(Error::Config("dt must be positive".into()));
    }
    let rhs = |s: &[f64]| {
        let mut trace = M::Trace::default();
        models.iter().map(|m| m.eval(s, &mut trace)).collect()
    };
    Ok(simulate_rhs(rhs, x0, dt, steps))
}

/// `sqrt(mean_k ‖a_k − b_k‖²)` over the first `horizon` states.
pub fn trajectory_rmse(a: &[Vec<f64>], b: &[Vec<f64>], horizon: usize) -> Result<f64> {
    if horizon == 0 || horizon > a.len() || horizon > b.len() {
        return Err(Error::Data(format!(
            "horizon {horizon} exceeds trajectory lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut sum = 0.0;
    for (sa, sb) in a.iter().zip(b).take(horizon) {
        check_len("trajectory state", sa.len(), sb.len())?;
        sum += sa.iter().zip(sb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok((sum / horizon as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBand {
    pub mean: Vec<f64>,
    /// `(1/T) Σ_t (ŷ_t − ȳ)²`.
    pub variance: Vec<f64>,
    pub samples: usize,
}

/// Running mean and sum of squared deviations, mergeable in a fixed order.
#[derive(Clone, Debug)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; k],
            m2: vec![0.0; k],
        }
    }

    fn push(&mut self, y: &[f64]) {
        self.n += 1.0;
        for i in 0..y.len() {
            let d = y[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (y[i] - self.mean[i]);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.n / n;
            self.m2[i] += other.m2[i] + d * d * self.n * other.n / n;
        }
        self.n = n;
    }
}

/// Samples every active parameter from `N(w_i, ζ_i)` `t` times, each draw on
/// its own ChaCha substream of `seed`, and reports the mean and variance of
/// the predictions at every row of `xs`.
pub fn mc_uncertainty<M: Model>(model: &M, zeta: &[f64], xs: &[Vec<f64>], t: usize, seed: u64, exec: &Exec) -> Result<UncertaintyBand> {
    if t == 0 {
        return Err(Error::Config("sample count T must be at least 1".into()));
    }
    let w = model.params();
    check_len("posterior variance vector", w.len(), zeta.len())?;
    let active = model.active();
    let k = xs.len();
    let parts = exec.install(|| {
        exec.map_chunks(t, |range| {
            let mut acc = Moments::new(k);
            let mut probe = model.clone();
            let mut trace = M::Trace::default();
            let mut preds = vec![0.0; k];
            for s in range {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64);
                let sampled: Vec<f64> = w
                    .iter()
                    .zip(zeta)
                    .zip(&active)
                    .map(|((&wi, &zi), &on)| {
                        if !on || !(zi > 0.0) {
                            return wi;
                        }
                        Normal::new(wi, zi.sqrt()).map_or(wi, |n| n.sample(&mut rng))
                    })
                    .collect();
                probe.set_params(&sampled);
                for (p, x) in preds.iter_mut().zip(xs) {
                    *p = probe.eval(x, &mut trace);
                }
                acc.push(&preds);
            }
            acc
        })
    });
    let mut total = Moments::new(k);
    for p in &parts {
        total.merge(p);
    }
    Ok(UncertaintyBand {
        variance: total.m2.iter().map(|m| (m / total.n).max(0.0)).collect(),
        mean: total.mean,
        samples: t,
    })
}
