//! Ground-truth systems, a classical RK4 integrator and dataset generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};

pub const LORENZ_SIGMA: f64 = 10.0;
pub const LORENZ_BETA: f64 = 8.0 / 3.0;
pub const LORENZ_RHO: f64 = 28.0;

pub const LV_ALPHA: f64 = 1.3;
pub const LV_BETA: f64 = 0.9;
pub const LV_DELTA: f64 = 0.8;
pub const LV_GAMMA: f64 = 1.8;

pub const FISHER_D: f64 = 6.25;
pub const FISHER_R: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Lorenz,
    LotkaVolterra,
    FisherKpp,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Lorenz => "lorenz",
            SystemKind::LotkaVolterra => "lotka_volterra",
            SystemKind::FisherKpp => "fisher_kpp",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "lorenz" => Ok(SystemKind::Lorenz),
            "lotka_volterra" | "lv" => Ok(SystemKind::LotkaVolterra),
            "fisher_kpp" | "fisher" => Ok(SystemKind::FisherKpp),
            other => Err(Error::Config(format!("unknown system `{other}`"))),
        }
    }
}

pub fn lorenz_rhs(s: &[f64]) -> [f64; 3] {
    let (x, y, z) = (s[0], s[1], s[2]);
    [
        LORENZ_SIGMA * (y - x),
        x * (LORENZ_RHO - z) - y,
        x * y - LORENZ_BETA * z,
    ]
}

pub fn lv_rhs(s: &[f64]) -> [f64; 2] {
    let (x, y) = (s[0], s[1]);
    [LV_ALPHA * x - LV_BETA * x * y, LV_DELTA * x * y - LV_GAMMA * y]
}

/// `d·(p_{i−1} − 2p_i + p_{i+1})/Δx² + r·p_i(1 − p_i)` on the whole grid,
/// with zero-flux ends via ghost reflection (`p_{−1} = p_1`).
pub fn fisher_rhs_with(p: &[f64], dx: f64, d: f64, r: f64) -> Result<Vec<f64>> {
    let n = p.len();
    if n < 3 {
        return Err(Error::Structure(format!("grid needs at least 3 points, got {n}")));
    }
    let inv = 1.0 / (dx * dx);
    Ok((0..n)
        .map(|i| {
            let left = if i == 0 { p[1] } else { p[i - 1] };
            let right = if i + 1 == n { p[n - 2] } else { p[i + 1] };
            d * (left - 2.0 * p[i] + right) * inv + r * p[i] * (1.0 - p[i])
        })
        .collect())
}

pub fn fisher_rhs(p: &[f64], dx: f64) -> Result<Vec<f64>> {
    fisher_rhs_with(p, dx, FISHER_D, FISHER_R)
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(rhs: impl Fn(&[f64]) -> Vec<f64>, state: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = state.len();
    let axpy = |a: &[f64], k: &[f64], h: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + h * k).collect() };
    let k1 = rhs(state);
    check_len("rk4 right-hand side", n, k1.len())?;
    let k2 = rhs(&axpy(state, &k1, dt / 2.0));
    let k3 = rhs(&axpy(state, &k2, dt / 2.0));
    let k4 = rhs(&axpy(state, &k3, dt));
    let next: Vec<f64> = (0..n)
        .map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::Integration { step: 0 })
    }
}

/// `steps` RK4 steps from `x0`; returns `steps + 1` states including `x0`.
pub fn integrate(rhs: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], dt: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.to_vec());
    for step in 0..steps {
        let next = rk4_step(&rhs, out.last().unwrap(), dt).map_err(|e| match e {
            Error::Integration { .. } => Error::Integration { step: step + 1 },
            e => e,
        })?;
        out.push(next);
    }
    Ok(out)
}

/// Spatial grid for the reaction–diffusion benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub length: f64,
    pub snapshots: usize,
    pub snapshot_dt: f64,
    pub initial_condition: String,
}

impl Grid {
    pub fn dx(&self) -> f64 {
        self.length / (self.points - 1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub system: SystemKind,
    pub params: BTreeMap<String, f64>,
    pub x0: Vec<f64>,
    /// Integrator step.
    pub dt: f64,
    /// Number of recorded samples (ODEs) .
    pub samples: usize,
    /// Integrator steps between recorded samples.
    pub sample_every: usize,
    pub grid: Option<Grid>,
}

impl SystemSpec {
    /// `t ∈ [0, 10)` sampled at every `dt = 0.01` step from (−8, 7, 27).
    pub fn lorenz() -> Self {
        Self {
            system: SystemKind::Lorenz,
            params: BTreeMap::from([
                ("sigma".into(), LORENZ_SIGMA),
                ("beta".into(), LORENZ_BETA),
                ("rho".into(), LORENZ_RHO),
            ]),
            x0: vec![-8.0, 7.0, 27.0],
            dt: 0.01,
            samples: 1000,
            sample_every: 1,
            grid: None,
        }
    }

    /// 300 samples every 0.1 time units (10 RK4 steps of 0.01).
    pub fn lotka_volterra() -> Self {
        Self {
            system: SystemKind::LotkaVolterra,
            params: BTreeMap::from([
                ("alpha".into(), LV_ALPHA),
                ("beta".into(), LV_BETA),
                ("delta".into(), LV_DELTA),
                ("gamma".into(), LV_GAMMA),
            ]),
            x0: vec![0.442, 4.628],
            dt: 0.01,
            samples: 300,
            sample_every: 10,
            grid: None,
        }
    }

    /// 26 points on [0, 1], Gaussian bump, 11 snapshots.
    pub fn fisher_kpp() -> Self {
        let grid = Grid {
            points: 26,
            length: 1.0,
            snapshots: 11,
            snapshot_dt: 0.5,
            initial_condition: "exp(-100*(x-0.5)^2)".into(),
        };
        let dx = grid.dx();
        let x0 = (0..grid.points)
            .map(|i| {
                let x = i as f64 * dx;
                (-100.0 * (x - 0.5) * (x - 0.5)).exp()
            })
            .collect();
        Self {
            system: SystemKind::FisherKpp,
            params: BTreeMap::from([("d".into(), FISHER_D), ("r".into(), FISHER_R)]),
            x0,
            dt: 1e-4,
            samples: 11,
            sample_every: 5000,
            grid: Some(grid),
        }
    }

    pub fn for_system(kind: SystemKind) -> Self {
        match kind {
            SystemKind::Lorenz => Self::lorenz(),
            SystemKind::LotkaVolterra => Self::lotka_volterra(),
            SystemKind::FisherKpp => Self::fisher_kpp(),
        }
    }

    fn param(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("{} spec is missing parameter `{key}`", self.system)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.samples == 0 || self.sample_every == 0 {
            return Err(Error::Config("dt, samples and sample_every must be positive".into()));
        }
        let want = match self.system {
            SystemKind::Lorenz => 3,
            SystemKind::LotkaVolterra => 2,
            SystemKind::FisherKpp => {
                let grid = self
                    .grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("fisher_kpp needs a grid".into()))?;
                if grid.points < 3 {
                    return Err(Error::Config("grid needs at least 3 points".into()));
                }
                grid.points
            }
        };
        if self.x0.len() != want {
            return Err(Error::Config(format!(
                "{} initial state has {} entries, expected {want}",
                self.system,
                self.x0.len()
            )));
        }
        Ok(())
    }

    /// Right-hand side of the full state (the whole grid for fisher_kpp).
    pub fn rhs(&self) -> Result<Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>> {
        self.validate()?;
        Ok(match self.system {
            SystemKind::Lorenz => {
                let (s, b, r) = (self.param("sigma")?, self.param("beta")?, self.param("rho")?);
                Box::new(move |v: &[f64]| vec![s * (v[1] - v[0]), v[0] * (r - v[2]) - v[1], v[0] * v[1] - b * v[2]])
            }
            SystemKind::LotkaVolterra => {
                let (a, b, d, g) = (
                    self.param("alpha")?,
                    self.param("beta")?,
                    self.param("delta")?,
                    self.param("gamma")?,
                );
                Box::new(move |v: &[f64]| vec![a * v[0] - b * v[0] * v[1], d * v[0] * v[1] - g * v[1]])
            }
            SystemKind::FisherKpp => {
                let (d, r) = (self.param("d")?, self.param("r")?);
                let dx = self.grid.as_ref().unwrap().dx();
                Box::new(move |p: &[f64]| fisher_rhs_with(p, dx, d, r).expect("validated grid"))
            }
        })
    }

    /// Recorded states: `samples` states spaced `sample_every` steps apart.
    pub fn trajectory(&self) -> Result<Vec<Vec<f64>>> {
        let rhs = self.rhs()?;
        let mut out = Vec::with_capacity(self.samples);
        let mut state = self.x0.clone();
        let mut step = 0;
        out.push(state.clone());
        while out.len() < self.samples {
            for _ in 0..self.sample_every {
                step += 1;
                state = rk4_step(&rhs, &state, self.dt).map_err(|_| Error::Integration { step })?;
            }
            out.push(state.clone());
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub dt: f64,
    pub seed: u64,
    pub noise_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

/// Inputs `x` (one row per sample) and derivative targets `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub meta: Option<DatasetMeta>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        let ds = Self { x, y, meta: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn n_outputs(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::Data(format!(
                "{} input rows but {} target rows",
                self.x.len(),
                self.y.len()
            )));
        }
        let (n, m) = (self.n_inputs(), self.n_outputs());
        for (k, (x, y)) in self.x.iter().zip(&self.y).enumerate() {
            if x.len() != n || y.len() != m {
                return Err(Error::Data(format!("row {k} has a ragged shape")));
            }
            if !x.iter().chain(y).all(|v| v.is_finite()) {
                return Err(Error::Data(format!("row {k} contains a non-finite value")));
            }
        }
        Ok(())
    }

    /// Column `j` of the targets.
    pub fn target(&self, j: usize) -> Vec<f64> {
        self.y.iter().map(|row| row[j]).collect()
    }
}

/// Integrates `spec`, evaluates the exact right-hand side on the visited
/// states and adds i.i.d. `N(0, noise_sigma²)` to the targets only.
///
/// For fisher_kpp each row is the 3-point window `(p_{i−1}, p_i, p_{i+1})`
/// around an interior grid point and the target is `∂p_i/∂t`.
pub fn generate_dataset(spec: &SystemSpec, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::Config(format!("noise sigma must be finite and ≥ 0, got {noise_sigma}")));
    }
    let rhs = spec.rhs()?;
    let states = spec.trajectory()?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    match spec.system {
        SystemKind::FisherKpp => {
            for p in &states {
                let dp = rhs(p);
                for i in 1..p.len() - 1 {
                    x.push(vec![p[i - 1], p[i], p[i + 1]]);
                    y.push(vec![dp[i]]);
                }
            }
        }
        _ => {
            for s in &states {
                y.push(rhs(s));
                x.push(s.clone());
            }
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        for row in &mut y {
            for v in row.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    let ds = Dataset {
        x,
        y,
        meta: Some(DatasetMeta {
            system: spec.system.name().into(),
            params: spec.params.clone(),
            dt: spec.dt,
            seed,
            noise_sigma,
            grid: spec.grid.clone(),
        }),
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_examples() {
        assert_eq!(lorenz_rhs(&[0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
        let v = lorenz_rhs(&[1.0, 1.0, 1.0]);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 26.0);
        assert!((v[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
        assert_eq!(lorenz_rhs(&[1.0, 2.0, 3.0]), [10.0, 23.0, -6.0]);
    }

    #[test]
    fn lv_examples() {
        assert_eq!(lv_rhs(&[0.0, 0.0]), [0.0, 0.0]);
        let eq = lv_rhs(&[LV_GAMMA / LV_DELTA, LV_ALPHA / LV_BETA]);
        assert!(eq[0].abs() < 1e-14 && eq[1].abs() < 1e-14);
        let v = lv_rhs(&[1.0, 1.0]);
        assert!((v[0] - 0.4).abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fisher_examples() {
        let dx = 0.04;
        assert!(fisher_rhs(&[0.0; 26], dx).unwrap().iter().all(|&v| v == 0.0));
        assert!(fisher_rhs(&[1.0; 26], dx).unwrap().iter().all(|&v| v == 0.0));
        let p: Vec<f64> = (0..26).map(|i| (i as f64 * dx).powi(2)).collect();
        let out = fisher_rhs_with(&p, dx, FISHER_D, 0.0).unwrap();
        for v in &out[1..25] {
            assert!((v - 2.0 * FISHER_D).abs() < 1e-9);
        }
        assert!(fisher_rhs(&[0.0, 1.0], dx).is_err());
    }

    #[test]
    fn rk4_examples() {
        let y = rk4_step(|s| s.to_vec(), &[1.0], 0.1).unwrap();
        assert!((y[0] - 0.1f64.exp()).abs() < 1e-6);
        assert!((y[0] - 1.10517083).abs() < 1e-8);
        assert_eq!(rk4_step(|_| vec![0.0], &[3.5], 0.1).unwrap(), vec![3.5]);
        assert!(rk4_step(|_| vec![f64::NAN], &[0.0], 0.1).is_err());
    }

    #[test]
    fn dataset_shapes() {
        let lv = generate_dataset(&SystemSpec::lotka_volterra(), 0.0, 1).unwrap();
        assert_eq!((lv.len(), lv.n_inputs(), lv.n_outputs()), (300, 2, 2));
        let f = generate_dataset(&SystemSpec::fisher_kpp(), 0.0, 1).unwrap();
        assert_eq!((f.len(), f.n_inputs(), f.n_outputs()), (264, 3, 1));
        let l = generate_dataset(&SystemSpec::lorenz(), 0.0, 1).unwrap();
        for (x, y) in l.x.iter().zip(&l.y) {
            assert_eq!(y.as_slice(), lorenz_rhs(x).as_slice());
        }
    }
}
