//! Monitors on grid solutions: weighted energy terms, L^p quasi-contraction, smoothing
//! exponent, and Feller-limit gaps.

use super::{centered_gradient, solve_forward_cauchy, Direction, GridSolution, SourceTerm, SpaceTimeGrid, Weight};
use crate::error::{LabError, Result};
use crate::fields::{DriftField, FormBoundCertificate};
use crate::special::{admissible_q_interval, lp_interval_lower};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One row of the energy CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub field_id: String,
    pub m: Option<u32>,
    pub q: f64,
    pub kappa: f64,
    pub theta: f64,
    /// ‖v‖^q in L^∞L^q_ρ
    pub lhs_v: f64,
    /// ‖∇v‖^q in L^∞L^q_ρ
    pub lhs_grad: f64,
    /// ‖∇|∇v|^{q/2}‖² in L²L²_ρ
    pub lhs_grad_power: f64,
    /// ‖𝖿|h|^{q/2}‖² in L²L²_ρ
    pub rhs_source: f64,
    /// ‖∇f‖^q in L^q_ρ
    pub rhs_grad_f: f64,
    /// ‖f‖^q in L^q_ρ
    pub rhs_f: f64,
    pub ratio: f64,
    pub half_width: f64,
    pub cells: usize,
    pub steps: usize,
    pub h_x: f64,
    pub h_t: f64,
}

fn weight_table(grid: &SpaceTimeGrid, w: &Weight) -> Vec<f64> {
    super::sample_scalar(&grid.lattice(), &|x: &[f64]| w.value(x))
}

/// Σ_i f(i) in fixed chunks so the sum does not depend on the worker count.
fn lattice_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    const CHUNK: usize = 8192;
    let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum::<f64>())
        .collect();
    parts.iter().sum()
}

fn norm_of(g: &[f64], i: usize, d: usize) -> f64 {
    g[i * d..(i + 1) * d].iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Every term of the weighted energy inequality for a forward solve.
///
/// The |∇v| field is floored at 10⁻³⁰ before the fractional power.
pub fn energy_report(
    sol: &GridSolution,
    q: f64,
    weight: &Weight,
    source: Option<&SourceTerm>,
    cert: &FormBoundCertificate,
) -> Result<EnergyReport> {
    let grid = &sol.grid;
    let d = grid.dim;
    let (lo, hi) = admissible_q_interval(d, cert.delta);
    if !(q > lo && q < hi) {
        return Err(LabError::QOutOfRange { q, lo, hi });
    }
    if sol.direction != Direction::Forward {
        return Err(LabError::InvalidParameter("energy terms need a forward solve".into()));
    }
    weight.check(grid)?;
    let rho = weight_table(grid, weight);
    let lat = grid.lattice();
    let vol = lat.cell_volume();
    let n = lat.len();
    let (hx, ht) = (grid.h_x(), grid.h_t());

    let mut per_level = Vec::with_capacity(sol.levels.len());
    for (k, v) in sol.levels.iter().enumerate() {
        let g = centered_gradient(v, d, grid.cells, hx);
        let a = lattice_sum(n, |i| v[i].abs().powf(q) * rho[i]) * vol;
        let b = lattice_sum(n, |i| norm_of(&g, i, d).powf(q) * rho[i]) * vol;
        let p: Vec<f64> = (0..n).into_par_iter().map(|i| norm_of(&g, i, d).max(1e-30).powf(0.5 * q)).collect();
        let gp = centered_gradient(&p, d, grid.cells, hx);
        let c = lattice_sum(n, |i| {
            // ghosts of |∇v|^{q/2} are the floor, not zero: drop the outermost layer
            let mut r = i;
            for _ in 0..d {
                let ik = r % grid.cells;
                if ik == 0 || ik + 1 == grid.cells {
                    return 0.0;
                }
                r /= grid.cells;
            }
            let s = norm_of(&gp, i, d);
            s * s * rho[i]
        }) * vol;
        per_level.push((sol.times[k], a, b, c));
    }
    let lhs_v = per_level.iter().fold(0.0f64, |m, r| m.max(r.1));
    let lhs_grad = per_level.iter().fold(0.0f64, |m, r| m.max(r.2));
    let lhs_grad_power: f64 = per_level
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0).abs() * (w[0].3 + w[1].3))
        .sum();

    let rhs_source = match source {
        None => 0.0,
        Some(src) => {
            let mut x = vec![0.0; d];
            let mut total = 0.0;
            let mut support = Vec::new();
            for i in 0..n {
                lat.coords(i, &mut x);
                if src.h.as_ref().is_none_or(|h| h.spatial(&x) != 0.0) {
                    support.push(i);
                }
            }
            for k in 0..grid.steps {
                let t = grid.t_start + (k as f64 + 0.5) * ht;
                let s = lattice_sum(support.len(), |j| {
                    let i = support[j];
                    let mut x = vec![0.0; d];
                    lat.coords(i, &mut x);
                    let (f, h) = src.parts(t, &x, hx);
                    f * f * h.abs().powf(q) * rho[i]
                });
                total += s * vol * ht;
            }
            total
        }
    };
    let f0 = sol.initial();
    let gf = centered_gradient(f0, d, grid.cells, hx);
    let rhs_grad_f = lattice_sum(n, |i| norm_of(&gf, i, d).powf(q) * rho[i]) * vol;
    let rhs_f = lattice_sum(n, |i| f0[i].abs().powf(q) * rho[i]) * vol;
    let lhs = lhs_v + lhs_grad + lhs_grad_power;
    let rhs = rhs_source + rhs_grad_f + rhs_f;
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(EnergyReport {
        field_id: sol.field_id.clone(),
        m: None,
        q,
        kappa: weight.kappa,
        theta: weight.theta,
        lhs_v,
        lhs_grad,
        lhs_grad_power,
        rhs_source,
        rhs_grad_f,
        rhs_f,
        ratio,
        half_width: grid.half_width,
        cells: grid.cells,
        steps: grid.steps,
        h_x: hx,
        h_t: ht,
    })
}

/// Result of the L^p quasi-contraction check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpCheck {
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn lp_norm(v: &[f64], p: f64, vol: f64) -> f64 {
    (lattice_sum(v.len(), |i| v[i].abs().powf(p)) * vol).powf(1.0 / p)
}

/// max_t ‖v(t)‖_p·e^{−(G(t)−G(s))/(p√δ)} against ‖f‖_p with 5% slack.
pub fn lp_contraction_check(sol: &GridSolution, p: f64, cert: &FormBoundCertificate) -> Result<LpCheck> {
    let lo = lp_interval_lower(cert.delta);
    if !(p > lo) {
        return Err(LabError::POutOfRange { p, lo });
    }
    if sol.has_source {
        return Err(LabError::InvalidParameter("the contraction check needs a homogeneous solve".into()));
    }
    let vol = sol.lattice().cell_volume();
    let s = sol.times[0];
    let g0 = cert.g.antiderivative(s);
    let lhs = sol
        .levels
        .iter()
        .zip(&sol.times)
        .map(|(v, &t)| {
            let big_g = (cert.g.antiderivative(t) - g0).abs();
            let damp = if big_g == 0.0 {
                1.0
            } else if cert.delta == 0.0 {
                0.0
            } else {
                (-big_g / (p * cert.delta.sqrt())).exp()
            };
            lp_norm(v, p, vol) * damp
        })
        .fold(0.0f64, f64::max);
    let rhs = lp_norm(sol.initial(), p, vol);
    Ok(LpCheck {
        p,
        lhs,
        rhs,
        pass: lhs <= rhs * 1.05,
    })
}

/// (t − s, ‖v(t)‖_q / ‖v(s)‖_p) for the last level of a forward solve.
pub fn smoothing_ratio(sol: &GridSolution, p: f64, q: f64) -> (f64, f64) {
    let vol = sol.lattice().cell_volume();
    let dt = sol.last_time() - sol.times[0];
    (dt, lp_norm(sol.last(), q, vol) / lp_norm(sol.initial(), p, vol))
}

/// Log-log slope of ‖u(t)‖_q/‖f‖_p against t − s over several runs.
pub fn smoothing_exponent_fit(runs: &[GridSolution], p: f64, q: f64) -> Result<f64> {
    if runs.len() < 4 {
        return Err(LabError::InsufficientSamples {
            got: runs.len(),
            need: 4,
        });
    }
    if p > q {
        return Err(LabError::InvalidParameter(format!("need p <= q, got p={p}, q={q}")));
    }
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| {
            let (t, ratio) = smoothing_ratio(r, p, q);
            (t.ln(), ratio.ln())
        })
        .collect();
    Ok(ols_slope(&pts))
}

pub fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Final-time sup gaps between consecutive levels of a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FellerReport {
    pub field_ids: Vec<String>,
    pub gaps: Vec<f64>,
    pub sup_f: f64,
    /// Largest per-step increase of sup|U f| over all solves.
    pub max_sup_increase: f64,
    pub max_principle: bool,
}

pub fn feller_convergence(
    schedule: &[DriftField],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    grid: &SpaceTimeGrid,
) -> Result<FellerReport> {
    if schedule.len() < 3 {
        return Err(LabError::InvalidParameter(format!(
            "need at least 3 schedule levels, got {}",
            schedule.len()
        )));
    }
    let grid = grid.clone().with_save_every(0);
    let mut prev: Option<Vec<f64>> = None;
    let mut gaps = Vec::new();
    let mut sup_f = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for b in schedule {
        let sol = solve_forward_cauchy(b, f, None, &grid)?;
        sup_f = sol.sup(0);
        for w in sol.sup_history.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
        let last = sol.last().to_vec();
        if let Some(p) = prev {
            let gap = p.iter().zip(&last).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            gaps.push(gap);
        }
        prev = Some(last);
    }
    Ok(FellerReport {
        field_ids: schedule.iter().map(|b| b.id().to_string()).collect(),
        gaps,
        sup_f,
        max_sup_increase: worst,
        max_principle: worst <= 1e-10,
    })
}

#[cfg(test)]
mod tests {
    use super::super::gaussian;
    use super::*;
    use crate::fields::{make_constant_drift, make_zero_drift, FormBoundCertificate};

    fn small() -> SpaceTimeGrid {
        SpaceTimeGrid {
            cells: 48,
            steps: 50,
            save_every: 10,
            ..SpaceTimeGrid::default()
        }
    }

    #[test]
    fn zero_solution_has_zero_energy() {
        let z = make_zero_drift(3).unwrap();
        let sol = solve_forward_cauchy(&z, &|_: &[f64]| 0.0, None, &small()).unwrap();
        let cert = FormBoundCertificate::trivial();
        let r = energy_report(&sol, 4.0, &Weight::default(), None, &cert).unwrap();
        assert_eq!((r.lhs_v, r.lhs_grad, r.lhs_grad_power), (0.0, 0.0, 0.0));
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn q_interval_is_enforced() {
        let z = make_zero_drift(3).unwrap();
        let sol = solve_forward_cauchy(&z, &|_: &[f64]| 0.0, None, &small()).unwrap();
        let mut cert = FormBoundCertificate::trivial();
        cert.delta = 0.01;
        let e = energy_report(&sol, 11.0, &Weight::default(), None, &cert).unwrap_err();
        assert!(matches!(e, LabError::QOutOfRange { hi, .. } if (hi - 10.0).abs() < 1e-12));
        assert!(energy_report(&sol, 3.0, &Weight::default(), None, &cert).is_err());
        assert!(energy_report(&sol, 9.5, &Weight::default(), None, &cert).is_ok());
    }

    #[test]
    fn heat_energy_is_finite() {
        let z = make_zero_drift(3).unwrap();
        let sol = solve_forward_cauchy(&z, &gaussian(vec![0.0; 3], 0.5), None, &small()).unwrap();
        let r = energy_report(&sol, 4.0, &Weight::default(), None, &FormBoundCertificate::trivial()).unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        assert!(r.lhs_v <= r.rhs_f * (1.0 + 1e-12));
    }

    #[test]
    fn heat_contracts_in_lp() {
        let z = make_zero_drift(3).unwrap();
        let sol = solve_forward_cauchy(&z, &gaussian(vec![0.0; 3], 0.3), None, &small()).unwrap();
        let c = lp_contraction_check(&sol, 4.0, &FormBoundCertificate::trivial()).unwrap();
        assert!(c.pass && c.lhs <= c.rhs * (1.0 + 1e-12));
        let zero = solve_forward_cauchy(&z, &|_: &[f64]| 0.0, None, &small()).unwrap();
        let c0 = lp_contraction_check(&zero, 4.0, &FormBoundCertificate::trivial()).unwrap();
        assert_eq!(c0.lhs, 0.0);
        assert!(c0.pass);
        let mut cert = FormBoundCertificate::trivial();
        cert.delta = 0.04;
        assert!(matches!(
            lp_contraction_check(&sol, 1.05, &cert),
            Err(LabError::POutOfRange { .. })
        ));
    }

    #[test]
    fn heat_smoothing_slope() {
        let z = make_zero_drift(3).unwrap();
        let grid = SpaceTimeGrid {
            half_width: 3.0,
            cells: 64,
            steps: 100,
            ..SpaceTimeGrid::default()
        };
        let runs: Vec<GridSolution> = [0.04, 0.08, 0.16, 0.32]
            .iter()
            .map(|&t| {
                let g = grid.clone().with_interval(0.0, t);
                solve_forward_cauchy(&z, &gaussian(vec![0.0; 3], t), None, &g).unwrap()
            })
            .collect();
        let slope = smoothing_exponent_fit(&runs, 2.0, 4.0).unwrap();
        assert!((slope + 0.375).abs() <= 0.15 * 0.375, "{slope}");
        let flat = smoothing_exponent_fit(&runs, 2.0, 2.0).unwrap();
        assert!(flat.abs() < 0.02, "{flat}");
        assert!(matches!(
            smoothing_exponent_fit(&runs[..3], 2.0, 4.0),
            Err(LabError::InsufficientSamples { got: 3, need: 4 })
        ));
    }

    #[test]
    fn identical_schedule_has_zero_gaps() {
        let c = make_constant_drift(&[0.2, 0.0, 0.0]).unwrap();
        let f = gaussian(vec![0.0; 3], 0.3);
        let r = feller_convergence(&[c.clone(), c.clone(), c], &f, &small()).unwrap();
        assert_eq!(r.gaps, vec![0.0, 0.0]);
        assert!(r.max_principle);
        let z = make_zero_drift(3).unwrap();
        assert!(feller_convergence(&[z.clone(), z], &f, &small()).is_err());
    }
}
