//! Euler–Maruyama paths of X_t = x − ∫b_m(r, X_r)dr + √2 W_t and path functionals.

pub mod functionals;

pub use functionals::{
    drift_integral_pde, duality_check, expected_drift_integral, krylov_functional, krylov_rhs,
    ks_statistic, marginal_distance, mean_stderr, modulus_of_continuity, occupation_near_origin, DualityReport,
    FunctionalReport, PdeCrossCheck,
};

use crate::error::{LabError, Result};
use crate::fields::DriftField;
use crate::io::{write_ensemble, EnsembleHeader};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub h_t: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Micro-steps per step near the steep region.
    pub substep: u32,
    /// Store every k-th step.
    pub record_every: usize,
    /// Debug mode: W ≡ 0.
    pub zero_noise: bool,
    pub field_id: String,
    pub m: Option<u32>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            h_t: 0.0025,
            horizon: 0.5,
            n_paths: 10_000,
            seed: 20_240_601,
            substep: 8,
            record_every: 1,
            zero_noise: false,
            field_id: String::new(),
            m: None,
        }
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.h_t).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(LabError::ConfigInvalid(s));
        if !(self.h_t > 0.0) || !(self.horizon > 0.0) {
            return bad(format!("h_t and horizon must be > 0, got {} and {}", self.h_t, self.horizon));
        }
        let steps = self.steps();
        if steps == 0 || (steps as f64 * self.h_t - self.horizon).abs() > 1e-9 * self.horizon {
            return bad(format!("horizon {} is not a multiple of h_t {}", self.horizon, self.h_t));
        }
        if self.n_paths == 0 || self.substep == 0 || self.record_every == 0 {
            return bad("n_paths, substep and record_every must be >= 1".into());
        }
        if steps % self.record_every != 0 {
            return bad(format!("record_every {} does not divide {steps} steps", self.record_every));
        }
        Ok(())
    }

    /// Drift increment per resolved step at most half a diffusion increment √(2h_t).
    pub fn check_drift(&self, sup_b: f64) -> Result<()> {
        let inc = sup_b * self.h_t / self.substep as f64;
        let bound = 0.5 * (2.0 * self.h_t).sqrt();
        if inc > bound {
            return Err(LabError::ConfigInvalid(format!(
                "drift increment {inc:.3e} per resolved step exceeds {bound:.3e}; lower h_t or raise substep"
            )));
        }
        Ok(())
    }
}

/// N stored trajectories, path-major: record k of path p at `data[(p·R + k)·d ..]`.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub x0: Vec<f64>,
    pub cfg: SimConfig,
    pub dim: usize,
    /// Times of the stored records.
    pub times: Vec<f64>,
    pub data: Vec<f64>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.cfg.n_paths
    }

    pub fn n_records(&self) -> usize {
        self.times.len()
    }

    /// Spacing of the stored records.
    pub fn record_dt(&self) -> f64 {
        self.cfg.h_t * self.cfg.record_every as f64
    }

    pub fn position(&self, path: usize, record: usize) -> &[f64] {
        let r = self.n_records();
        let i = (path * r + record) * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let len = self.n_records() * self.dim;
        &self.data[path * len..(path + 1) * len]
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        let dt = self.record_dt();
        let k = (t / dt).round();
        if k < 0.0 || (k * dt - t).abs() > 1e-9 * dt.max(t.abs()) || k as usize >= self.n_records() {
            return Err(LabError::TimeUnavailable { t });
        }
        Ok(k as usize)
    }

    pub fn write_to(&self, w: &mut impl std::io::Write) -> Result<()> {
        let h = EnsembleHeader {
            n_paths: self.n_paths(),
            steps: self.n_records() - 1,
            dim: self.dim,
            h_t: self.record_dt(),
            seed: self.cfg.seed,
        };
        write_ensemble(w, &h, &self.data)
    }
}

/// Simulates N paths from x with per-path ChaCha streams (seed, path index).
///
/// Steps starting within 4√(2h_t) of the steep region are split into `substep` micro-steps.
pub fn simulate_euler(b: &DriftField, x: &[f64], cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    let d = b.dim();
    if x.len() != d {
        return Err(LabError::ConfigInvalid(format!("start point has {} coordinates, field has {d}", x.len())));
    }
    let sup = b
        .sup_bound()
        .ok_or_else(|| LabError::ConfigInvalid(format!("field `{}` is unbounded; simulate a mollified field", b.id())))?;
    cfg.check_drift(sup)?;
    let steps = cfg.steps();
    let h = cfg.h_t;
    let nrec = steps / cfg.record_every + 1;
    let steep = b.steep_region();
    let near = 4.0 * (2.0 * h).sqrt();
    let sub = cfg.substep as usize;
    let hs = h / sub as f64;
    let (sq, sq_s) = ((2.0 * h).sqrt(), (2.0 * hs).sqrt());
    let mut data = vec![0.0; cfg.n_paths * nrec * d];
    data.par_chunks_mut(nrec * d).enumerate().for_each(|(p, out)| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(p as u64);
        let mut pos = [0.0f64; 8];
        let mut drift = [0.0f64; 8];
        let (xs, bs) = (&mut pos[..d], &mut drift[..d]);
        xs.copy_from_slice(x);
        out[..d].copy_from_slice(xs);
        let normal = |rng: &mut ChaCha8Rng| -> f64 {
            if cfg.zero_noise {
                0.0
            } else {
                rng.sample(StandardNormal)
            }
        };
        for k in 0..steps {
            let t = k as f64 * h;
            if sub > 1 && (steep.spatial_distance(xs) < near || steep.time_distance(t) < near) {
                for j in 0..sub {
                    b.eval_into(t + j as f64 * hs, xs, bs);
                    for c in 0..d {
                        xs[c] += -bs[c] * hs + sq_s * normal(&mut rng);
                    }
                }
            } else {
                b.eval_into(t, xs, bs);
                for c in 0..d {
                    xs[c] += -bs[c] * h + sq * normal(&mut rng);
                }
            }
            if (k + 1) % cfg.record_every == 0 {
                let r = (k + 1) / cfg.record_every;
                out[r * d..(r + 1) * d].copy_from_slice(xs);
            }
        }
    });
    let dt = h * cfg.record_every as f64;
    Ok(PathEnsemble {
        x0: x.to_vec(),
        cfg: SimConfig {
            field_id: if cfg.field_id.is_empty() {
                b.id().to_string()
            } else {
                cfg.field_id.clone()
            },
            ..cfg.clone()
        },
        dim: d,
        times: (0..nrec).map(|k| k as f64 * dt).collect(),
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_constant_drift, make_hardy_drift, make_zero_drift, Modulation};

    fn cfg(n: usize) -> SimConfig {
        SimConfig {
            n_paths: n,
            h_t: 0.01,
            horizon: 1.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn brownian_second_moment() {
        let e = simulate_euler(&make_zero_drift(3).unwrap(), &[0.0; 3], &cfg(4000)).unwrap();
        let last = e.n_records() - 1;
        let v: Vec<f64> = (0..e.n_paths())
            .map(|p| e.position(p, last).iter().map(|a| a * a).sum())
            .collect();
        let (m, se) = functionals::mean_stderr(&v);
        assert!((m - 6.0).abs() <= 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn brownian_increments() {
        let e = simulate_euler(&make_zero_drift(3).unwrap(), &[0.0; 3], &cfg(500)).unwrap();
        let mut inc = Vec::new();
        for p in 0..e.n_paths() {
            for k in 0..e.n_records() - 1 {
                inc.push(e.position(p, k + 1)[1] - e.position(p, k)[1]);
            }
        }
        let n = inc.len() as f64;
        let mean = inc.iter().sum::<f64>() / n;
        let var = inc.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
        // stderr of the variance for Gaussian data: var·√(2/(n−1))
        assert!((var - 0.02).abs() <= 4.0 * 0.02 * (2.0 / (n - 1.0)).sqrt(), "{var}");
        assert!(mean.abs() <= 4.0 * (0.02 / n).sqrt());
    }

    #[test]
    fn constant_drift_mean() {
        let c = [0.5, -1.0, 0.25];
        let e = simulate_euler(&make_constant_drift(&c).unwrap(), &[1.0, 1.0, 1.0], &cfg(4000)).unwrap();
        let last = e.n_records() - 1;
        for k in 0..3 {
            let v: Vec<f64> = (0..e.n_paths()).map(|p| e.position(p, last)[k]).collect();
            let (m, se) = functionals::mean_stderr(&v);
            assert!((m - (1.0 - c[k])).abs() <= 3.0 * se, "coord {k}: {m}");
        }
    }

    #[test]
    fn zero_noise_follows_the_drift_exactly() {
        let c = make_constant_drift(&[0.5, 0.0, 0.0]).unwrap();
        let cf = SimConfig {
            zero_noise: true,
            ..cfg(3)
        };
        let e = simulate_euler(&c, &[0.0; 3], &cf).unwrap();
        let mut x = 0.0;
        for k in 1..e.n_records() {
            x += -0.5 * 0.01;
            assert_eq!(e.position(2, k)[0], x);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let c = make_constant_drift(&[0.1, 0.2, 0.3]).unwrap();
        let a = simulate_euler(&c, &[0.0; 3], &cfg(300)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_euler(&c, &[0.0; 3], &cfg(300)).unwrap());
        assert_eq!(a.data, b.data);
        let other = simulate_euler(&c, &[0.0; 3], &SimConfig { seed: 1, ..cfg(300) }).unwrap();
        assert_ne!(a.data, other.data);
    }

    #[test]
    fn config_errors() {
        let z = make_zero_drift(3).unwrap();
        let bad = SimConfig {
            horizon: 1.005,
            h_t: 0.01,
            ..SimConfig::default()
        };
        assert!(matches!(simulate_euler(&z, &[0.0; 3], &bad), Err(LabError::ConfigInvalid(_))));
        let hardy = make_hardy_drift(3, 0.04, 1.0, Modulation::Constant(1.0)).unwrap();
        assert!(matches!(simulate_euler(&hardy, &[0.0; 3], &cfg(10)), Err(LabError::ConfigInvalid(_))));
        let fast = make_constant_drift(&[50.0, 0.0, 0.0]).unwrap();
        assert!(simulate_euler(&fast, &[0.0; 3], &SimConfig { substep: 1, ..cfg(10) }).is_err());
    }

    #[test]
    fn export_round_trip() {
        let e = simulate_euler(&make_zero_drift(3).unwrap(), &[0.0; 3], &cfg(4)).unwrap();
        let mut buf = Vec::new();
        e.write_to(&mut buf).unwrap();
        let (h, data) = crate::io::read_ensemble(&mut buf.as_slice()).unwrap();
        assert_eq!((h.n_paths, h.steps, h.dim, h.seed), (4, 100, 3, e.cfg.seed));
        assert_eq!(data, e.data);
    }
}
