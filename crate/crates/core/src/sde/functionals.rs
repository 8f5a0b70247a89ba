//! Path functionals: Krylov ratio, drift integral, modulus of continuity, marginal KS distance,
//! occupation near the origin, and the Monte Carlo / backward-PDE duality check.

use super::{simulate_euler, PathEnsemble, SimConfig};
use crate::error::{LabError, Result};
use crate::fields::{DriftField, FormBoundCertificate, TestFunction};
use crate::pde::{solve_backward_terminal, zero_drift_calibration, SourceTerm, SpaceTimeGrid};
use crate::special::admissible_q_interval;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One row of the functional CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub functional: String,
    pub field_id: String,
    pub m: Option<u32>,
    pub h_t: f64,
    #[serde(rename = "N")]
    pub n_paths: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub stderr: f64,
}

impl FunctionalReport {
    fn new(name: &str, ens: &PathEnsemble, lhs: f64, rhs: f64, stderr: f64) -> Self {
        Self {
            functional: name.to_string(),
            field_id: ens.cfg.field_id.clone(),
            m: ens.cfg.m,
            h_t: ens.cfg.h_t,
            n_paths: ens.n_paths(),
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
            stderr,
        }
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs != 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Sample mean and standard error, summed in path order.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-path left-point quadrature of g(t, X_t) over records with t ∈ [s, r).
fn path_integrals(ens: &PathEnsemble, window: (f64, f64), g: &(dyn Fn(f64, &[f64]) -> f64 + Sync)) -> Vec<f64> {
    let dt = ens.record_dt();
    let eps = 1e-9 * dt;
    let ks: Vec<usize> = (0..ens.n_records() - 1)
        .filter(|&k| ens.times[k] >= window.0 - eps && ens.times[k] < window.1 - eps)
        .collect();
    (0..ens.n_paths())
        .into_par_iter()
        .map(|p| ks.iter().map(|&k| g(ens.times[k], ens.position(p, k)) * dt).sum())
        .collect()
}

fn norm_jittered(f: &DriftField, t: f64, x: &[f64], cell: f64) -> f64 {
    let mut s = [0.0f64; 8];
    f.norm_sq_jittered(t, x, cell, cell, &mut s[..f.dim()]).sqrt()
}

/// (∫₀^T∫ 𝖿²|h|^q dx dt)^{1/q} by midpoint lattice quadrature over the support of h.
pub fn krylov_rhs(f: &DriftField, h: &TestFunction, q: f64, horizon: f64, cells: usize, t_cells: usize) -> f64 {
    let d = f.dim();
    let (ta, tb) = h.time_support();
    let (ta, tb) = (ta.max(0.0), tb.min(horizon));
    if tb <= ta {
        return 0.0;
    }
    let hx = 2.0 * h.radius / cells as f64;
    let ht = (tb - ta) / t_cells as f64;
    let total = cells.pow(d as u32);
    let node = |lin: usize, x: &mut [f64]| {
        let mut r = lin;
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = h.center_x[k] - h.radius + ((r % cells) as f64 + 0.5) * hx;
            r /= cells;
        }
    };
    let times: Vec<f64> = (0..t_cells).map(|k| ta + (k as f64 + 0.5) * ht).collect();
    let chunk = 4096;
    let parts: Vec<f64> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut x = vec![0.0; d];
            let mut acc = 0.0;
            for lin in c * chunk..((c + 1) * chunk).min(total) {
                node(lin, &mut x);
                let eta = h.spatial(&x);
                if eta == 0.0 {
                    continue;
                }
                if f.is_separable() {
                    let mut xx = x.clone();
                    let mut t0 = 0.0;
                    f.singular_locus().jitter(&mut t0, &mut xx, hx, ht);
                    let mut s = vec![0.0; d];
                    f.map().spatial_into(&xx, &mut s);
                    let s2: f64 = s.iter().map(|a| a * a).sum();
                    let tsum: f64 = times
                        .iter()
                        .map(|&t| f.map().time_factor(t).powi(2) * (h.temporal(t) * eta).abs().powf(q))
                        .sum();
                    acc += s2 * tsum;
                } else {
                    for &t in &times {
                        let n = norm_jittered(f, t, &x, hx);
                        acc += n * n * (h.temporal(t) * eta).abs().powf(q);
                    }
                }
            }
            acc
        })
        .collect();
    (parts.iter().sum::<f64>() * hx.powi(d as i32) * ht).powf(1.0 / q)
}

/// E∫₀^T|𝖿h|(r, X_r)dr against ‖𝖿|h|^{q/2}‖^{2/q}.
pub fn krylov_functional(
    ens: &PathEnsemble,
    f: &DriftField,
    h: &TestFunction,
    q: f64,
    cert: &FormBoundCertificate,
) -> Result<FunctionalReport> {
    let (lo, hi) = admissible_q_interval(ens.dim, cert.delta);
    if !(q > lo && q < hi) {
        return Err(LabError::QOutOfRange { q, lo, hi });
    }
    let horizon = ens.cfg.horizon;
    let cell = 1e-6 * h.radius;
    let vals = path_integrals(ens, (0.0, horizon), &|t, x| {
        let hv = h.value(t, x);
        if hv == 0.0 {
            0.0
        } else {
            norm_jittered(f, t, x, cell) * hv.abs()
        }
    });
    let (lhs, se) = mean_stderr(&vals);
    let rhs = krylov_rhs(f, h, q, horizon, 64, 32);
    Ok(FunctionalReport::new("krylov", ens, lhs, rhs, se))
}

/// E∫_s^r |b_k(t, X_t)|dt against F(r − s) = (r − s) + sup of ∫g over windows of that length.
pub fn expected_drift_integral(
    ens: &PathEnsemble,
    b_k: &DriftField,
    cert: &FormBoundCertificate,
    window: (f64, f64),
) -> Result<FunctionalReport> {
    let (s, r) = window;
    if !(s >= 0.0 && r > s && r <= ens.cfg.horizon + 1e-12) {
        return Err(LabError::InvalidParameter(format!("window [{s}, {r}] outside [0, {}]", ens.cfg.horizon)));
    }
    let cell = 1e-6;
    let vals = path_integrals(ens, window, &|t, x| norm_jittered(b_k, t, x, cell));
    let (lhs, se) = mean_stderr(&vals);
    let rhs = (r - s) + cert.g.window_sup(r - s, ens.cfg.horizon);
    Ok(FunctionalReport::new("drift_integral", ens, lhs, rhs, se))
}

/// Backward solve of (∂t + Δ − b_m·∇)v = −|b_k| on [s, r] with v(r) = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeCrossCheck {
    pub value_at_x: f64,
    pub sup: f64,
    /// Zero-drift calibration error of the grid.
    pub calibration: f64,
    /// (2·calibration + 10⁻³)·sup
    pub budget: f64,
}

pub fn drift_integral_pde(
    b_m: &DriftField,
    b_k: &DriftField,
    window: (f64, f64),
    x: &[f64],
    grid: &SpaceTimeGrid,
) -> Result<PdeCrossCheck> {
    let g = grid.clone().with_interval(window.0, window.1).with_save_every(0);
    let src = SourceTerm::new(b_k.clone(), None);
    let sol = solve_backward_terminal(b_m, &|_: &[f64]| 0.0, Some(&src), &g)?;
    let last = sol.levels.len() - 1;
    let value_at_x = sol
        .value_at(last, x)
        .ok_or_else(|| LabError::InvalidParameter(format!("{x:?} outside the grid")))?;
    let sup = sol.sup(last);
    let calibration = zero_drift_calibration(&g)?;
    Ok(PdeCrossCheck {
        value_at_x,
        sup,
        calibration,
        budget: (2.0 * calibration + 1e-3) * sup,
    })
}

/// E[sup_{t, a ≤ h}|X_{t+a} − X_t|^β] against F̃(h)^β/(1−β), F̃(h) = h^{1/2} + F(h).
///
/// The ratio column is C̃^β.
pub fn modulus_of_continuity(ens: &PathEnsemble, beta: f64, h: f64, cert: &FormBoundCertificate) -> Result<FunctionalReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(LabError::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    let dt = ens.record_dt();
    let lag = (h / dt).round() as usize;
    if lag == 0 || ((lag as f64) * dt - h).abs() > 1e-9 * h {
        return Err(LabError::InvalidParameter(format!("h={h} is not a multiple of the record spacing {dt}")));
    }
    let nrec = ens.n_records();
    let d = ens.dim;
    let vals: Vec<f64> = (0..ens.n_paths())
        .into_par_iter()
        .map(|p| {
            let path = ens.path(p);
            let mut best = 0.0f64;
            for k in 0..nrec {
                let a = &path[k * d..(k + 1) * d];
                for j in k + 1..(k + lag + 1).min(nrec) {
                    let b = &path[j * d..(j + 1) * d];
                    let r2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                    best = best.max(r2);
                }
            }
            best.sqrt().powf(beta)
        })
        .collect();
    let (lhs, se) = mean_stderr(&vals);
    let f = h + cert.g.window_sup(h, ens.cfg.horizon);
    let rhs = (h.sqrt() + f).powf(beta) / (1.0 - beta);
    Ok(FunctionalReport::new("modulus", ens, lhs, rhs, se))
}

/// Two-sample Kolmogorov–Smirnov statistic, maximised over coordinates.
pub fn marginal_distance(e1: &PathEnsemble, e2: &PathEnsemble, t: f64) -> Result<f64> {
    let (k1, k2) = (e1.time_index(t)?, e2.time_index(t)?);
    if e1.dim != e2.dim {
        return Err(LabError::DimensionMismatch {
            left: e1.dim,
            right: e2.dim,
        });
    }
    let mut worst = 0.0f64;
    for c in 0..e1.dim {
        let mut a: Vec<f64> = (0..e1.n_paths()).map(|p| e1.position(p, k1)[c]).collect();
        let mut b: Vec<f64> = (0..e2.n_paths()).map(|p| e2.position(p, k2)[c]).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        worst = worst.max(ks_statistic(&a, &b));
    }
    Ok(worst)
}

/// sup |F_a − F_b| for samples sorted ascending; ties handled by stepping past equal values.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Mean fraction of the window spent within `radius` of the origin.
pub fn occupation_near_origin(ens: &PathEnsemble, radius: f64, window: (f64, f64)) -> Result<f64> {
    if !(radius > 0.0) || !(window.1 > window.0) {
        return Err(LabError::InvalidParameter(format!("radius {radius}, window {window:?}")));
    }
    let r2 = radius * radius;
    let vals = path_integrals(ens, window, &|_, x| {
        if x.iter().map(|a| a * a).sum::<f64>() < r2 {
            1.0
        } else {
            0.0
        }
    });
    Ok(vals.iter().sum::<f64>() / vals.len() as f64 / (window.1 - window.0))
}

/// Monte Carlo E f(X_T) against the backward solve w(0, x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub report: FunctionalReport,
    pub gap: f64,
    /// (2·calibration + 10⁻³)·sup|f|
    pub budget: f64,
    pub pass: bool,
}

pub fn duality_check(
    x: &[f64],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    b_m: &DriftField,
    grid: &SpaceTimeGrid,
    cfg: &SimConfig,
) -> Result<DualityReport> {
    let horizon = grid.t_end - grid.t_start;
    if (cfg.horizon - horizon).abs() > 1e-12 {
        return Err(LabError::ConfigInvalid(format!(
            "simulation horizon {} differs from the grid interval {horizon}",
            cfg.horizon
        )));
    }
    let ens = simulate_euler(b_m, x, cfg)?;
    let last = ens.n_records() - 1;
    let vals: Vec<f64> = (0..ens.n_paths()).map(|p| f(ens.position(p, last))).collect();
    let (mc, se) = mean_stderr(&vals);
    let sol = solve_backward_terminal(b_m, f, None, &grid.clone().with_save_every(0))?;
    let w = sol
        .value_at(sol.levels.len() - 1, x)
        .ok_or_else(|| LabError::InvalidParameter(format!("{x:?} outside the grid")))?;
    let sup_f = sol.sup(0);
    let cal = zero_drift_calibration(grid)?;
    let budget = (2.0 * cal + 1e-3) * sup_f;
    let gap = (mc - w).abs();
    Ok(DualityReport {
        report: FunctionalReport::new("duality", &ens, mc, w, se),
        gap,
        budget,
        pass: gap <= 3.0 * se + budget,
    })
}
