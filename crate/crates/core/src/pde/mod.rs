//! Finite-difference solver for (∂t − Δ + b·∇)v = |𝖿|h on a truncated box.
//!
//! Cell-centred lattice, homogeneous Dirichlet ghosts. Each step applies explicit first-order
//! upwind advection and the source, then backward-Euler diffusion split by axis (one
//! tridiagonal solve per line). The backward terminal problem (∂t + Δ − b·∇)w = −|𝖿|h is the
//! same scheme run in reversed time.

pub mod analysis;

pub use analysis::{
    energy_report, feller_convergence, lp_contraction_check, smoothing_exponent_fit,
    smoothing_ratio, EnergyReport, FellerReport, LpCheck,
};

use crate::error::{LabError, Result};
use crate::fields::{DriftField, TestFunction};
use crate::mollify::Lattice;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

/// ρ(x) = (1 + κ|x|²)^{−θ}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weight {
    pub kappa: f64,
    pub theta: f64,
}

impl Default for Weight {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            theta: 4.0,
        }
    }
}

impl Weight {
    pub fn new(kappa: f64, theta: f64, d: usize) -> Result<Self> {
        if !(kappa > 0.0) || !(theta > 0.5 * d as f64) {
            return Err(LabError::InvalidParameter(format!(
                "weight needs kappa > 0 and theta > d/2, got kappa={kappa}, theta={theta}"
            )));
        }
        Ok(Self { kappa, theta })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (1.0 + self.kappa * r2).powf(-self.theta)
    }

    /// Writes ∇ρ(x) into `out` and returns ρ(x).
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let base = 1.0 + self.kappa * r2;
        let rho = base.powf(-self.theta);
        let c = -2.0 * self.theta * self.kappa * rho / base;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = c * xi;
        }
        rho
    }

    /// Fraction of ∫ρ lying outside the ball of the given radius.
    pub fn tail_fraction(&self, d: usize, radius: f64) -> f64 {
        let a = 0.5 * d as f64;
        let b = self.theta - a;
        let u = self.kappa * radius * radius / (1.0 + self.kappa * radius * radius);
        1.0 - beta_reg(a, b, u)
    }

    /// ρ at distance `half_width` relative to ρ(0).
    pub fn boundary_ratio(&self, half_width: f64) -> f64 {
        (1.0 + self.kappa * half_width * half_width).powf(-self.theta)
    }

    /// Tail ≤ 1% beyond the box and boundary ratio ≤ 10⁻³.
    pub fn check(&self, grid: &SpaceTimeGrid) -> Result<()> {
        let tail = self.tail_fraction(grid.dim, grid.half_width);
        let ratio = self.boundary_ratio(grid.half_width);
        if tail > 0.01 || ratio > 1e-3 {
            return Err(LabError::InvalidParameter(format!(
                "weight too wide for the box: tail {tail:.3e}, boundary ratio {ratio:.3e}"
            )));
        }
        Ok(())
    }
}

/// Box [−L, L]^d with `cells` cells per axis and `steps` time steps over [t_start, t_end].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceTimeGrid {
    pub dim: usize,
    pub half_width: f64,
    pub cells: usize,
    pub steps: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Keep every k-th level; 0 keeps only the first and last.
    pub save_every: usize,
}

impl Default for SpaceTimeGrid {
    fn default() -> Self {
        Self {
            dim: 3,
            half_width: 4.0,
            cells: 96,
            steps: 200,
            t_start: 0.0,
            t_end: 0.5,
            save_every: 0,
        }
    }
}

impl SpaceTimeGrid {
    pub fn h_x(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn h_t(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::centered(self.dim, self.half_width, self.cells)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 || self.dim > 8 {
            return Err(LabError::InvalidParameter(format!("grid dimension {} not in [3, 8]", self.dim)));
        }
        if self.cells < 4 || self.steps == 0 || !(self.half_width > 0.0) || !(self.t_end > self.t_start) {
            return Err(LabError::InvalidParameter(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }

    pub fn with_interval(mut self, t_start: f64, t_end: f64) -> Self {
        self.t_start = t_start;
        self.t_end = t_end;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_save_every(mut self, k: usize) -> Self {
        self.save_every = k;
        self
    }
}

/// Right-hand side |𝖿(t,x)|·h(t,x); `h = None` means h ≡ 1.
#[derive(Clone, Debug)]
pub struct SourceTerm {
    pub f: DriftField,
    pub h: Option<TestFunction>,
}

impl SourceTerm {
    pub fn new(f: DriftField, h: Option<TestFunction>) -> Self {
        Self { f, h }
    }

    /// |𝖿|·h with singular samples jittered by `cell`.
    pub fn value(&self, t: f64, x: &[f64], cell: f64) -> f64 {
        let h = self.h.as_ref().map_or(1.0, |h| h.value(t, x));
        if h == 0.0 {
            return 0.0;
        }
        let mut s = [0.0f64; 8];
        let d = self.f.dim();
        self.f.norm_sq_jittered(t, x, cell, cell, &mut s[..d]).sqrt() * h
    }

    /// |𝖿| and h separately, for the energy terms.
    pub fn parts(&self, t: f64, x: &[f64], cell: f64) -> (f64, f64) {
        let h = self.h.as_ref().map_or(1.0, |h| h.value(t, x));
        let mut s = [0.0f64; 8];
        let d = self.f.dim();
        (self.f.norm_sq_jittered(t, x, cell, cell, &mut s[..d]).sqrt(), h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Saved time levels of a solve plus per-step monitors.
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub grid: SpaceTimeGrid,
    pub direction: Direction,
    pub field_id: String,
    pub has_source: bool,
    /// Times of the saved levels, in marching order.
    pub times: Vec<f64>,
    pub levels: Vec<Vec<f64>>,
    /// sup|v| after every step, starting with the initial level.
    pub sup_history: Vec<f64>,
    /// Largest boundary-layer value relative to the sup over all steps.
    pub boundary_leak: f64,
    pub max_cfl: f64,
}

impl GridSolution {
    pub fn lattice(&self) -> Lattice {
        self.grid.lattice()
    }

    pub fn initial(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn last(&self) -> &[f64] {
        self.levels.last().expect("at least one level")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("at least one level")
    }

    pub fn level_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.grid.h_t().max(1e-300);
        self.times.iter().position(|s| (s - t).abs() <= tol)
    }

    /// Multilinear interpolation of a saved level.
    pub fn value_at(&self, level: usize, x: &[f64]) -> Option<f64> {
        let mut out = [0.0];
        self.lattice()
            .interpolate(&self.levels[level], 1, x, &mut out)
            .then_some(out[0])
    }

    pub fn sup(&self, level: usize) -> f64 {
        self.levels[level].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Centered-difference gradient of a saved level (zero ghosts), node-major.
    pub fn gradient(&self, level: usize) -> Vec<f64> {
        centered_gradient(&self.levels[level], self.grid.dim, self.grid.cells, self.grid.h_x())
    }
}

pub(crate) fn centered_gradient(v: &[f64], d: usize, n: usize, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; v.len() * d];
    let inv = 0.5 / h;
    g.par_chunks_mut(n * d).enumerate().for_each(|(line, out)| {
        let idx = line_indices(line, d, n);
        let base = line * n;
        for i0 in 0..n {
            let id = base + i0;
            let mut stride = 1;
            for k in 0..d {
                let ik = if k == 0 { i0 } else { idx[k] };
                let lo = if ik > 0 { v[id - stride] } else { 0.0 };
                let hi = if ik + 1 < n { v[id + stride] } else { 0.0 };
                out[i0 * d + k] = (hi - lo) * inv;
                stride *= n;
            }
        }
    });
    g
}

/// Multi-index (i_1, …, i_{d−1}) of a line along axis 0; entry 0 is unused.
fn line_indices(line: usize, d: usize, n: usize) -> [usize; 8] {
    let mut idx = [0usize; 8];
    let mut r = line;
    for slot in idx.iter_mut().take(d).skip(1) {
        *slot = r % n;
        r /= n;
    }
    idx
}

/// Samples a scalar function on the lattice nodes.
pub fn sample_scalar(lat: &Lattice, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Vec<f64> {
    let mut out = vec![0.0; lat.len()];
    out.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
        let mut x = vec![0.0; lat.dim];
        for (j, o) in chunk.iter_mut().enumerate() {
            lat.coords(c * 4096 + j, &mut x);
            *o = f(&x);
        }
    });
    out
}

fn sample_vector(lat: &Lattice, field: &DriftField, t: Option<f64>, out: &mut [f64]) -> f64 {
    let d = lat.dim;
    let parts: Vec<f64> = out
        .par_chunks_mut(d * 4096)
        .enumerate()
        .map(|(c, chunk)| {
            let mut x = vec![0.0; d];
            let mut m = 0.0f64;
            for (j, o) in chunk.chunks_mut(d).enumerate() {
                lat.coords(c * 4096 + j, &mut x);
                match t {
                    Some(t) => field.eval_into(t, &x, o),
                    None => field.map().spatial_into(&x, o),
                }
                let n2: f64 = o.iter().map(|v| v * v).sum();
                m = m.max(n2);
            }
            m
        })
        .collect();
    parts.into_iter().fold(0.0, f64::max).sqrt()
}

/// Precomputed Thomas factors for (1 + 2λ)u_i − λ(u_{i−1} + u_{i+1}) = r_i with zero ghosts.
struct Tridiagonal {
    lambda: f64,
    cp: Vec<f64>,
    den: Vec<f64>,
}

impl Tridiagonal {
    fn new(n: usize, lambda: f64) -> Self {
        let b = 1.0 + 2.0 * lambda;
        let mut cp = vec![0.0; n];
        let mut den = vec![0.0; n];
        den[0] = 1.0 / b;
        cp[0] = -lambda * den[0];
        for i in 1..n {
            den[i] = 1.0 / (b + lambda * cp[i - 1]);
            cp[i] = -lambda * den[i];
        }
        Self { lambda, cp, den }
    }

    /// Solves along `axis` in place for every line.
    fn solve_axis(&self, v: &mut [f64], d: usize, n: usize, axis: usize) {
        let s = n.pow(axis as u32);
        let block = s * n;
        let lam = self.lambda;
        if s == 1 {
            v.par_chunks_mut(n).for_each(|line| {
                line[0] *= self.den[0];
                for i in 1..n {
                    line[i] = (line[i] + lam * line[i - 1]) * self.den[i];
                }
                for i in (0..n - 1).rev() {
                    line[i] -= self.cp[i] * line[i + 1];
                }
            });
            return;
        }
        let _ = d;
        let work = |blk: &mut [f64]| {
            blk[..s].iter_mut().for_each(|x| *x *= self.den[0]);
            for i in 1..n {
                let (a, b) = blk.split_at_mut(i * s);
                let prev = &a[(i - 1) * s..];
                let den = self.den[i];
                for (c, p) in b[..s].iter_mut().zip(prev) {
                    *c = (*c + lam * p) * den;
                }
            }
            for i in (0..n - 1).rev() {
                let (a, b) = blk.split_at_mut((i + 1) * s);
                let cp = self.cp[i];
                for (c, nx) in a[i * s..].iter_mut().zip(&b[..s]) {
                    *c -= cp * nx;
                }
            }
        };
        if v.len() > block {
            v.par_chunks_mut(block).for_each(work);
        } else {
            // one block: split the plane columns across workers
            let cols = 1024.min(s);
            let mut planes: Vec<&mut [f64]> = v.chunks_mut(s).collect();
            let mut col_groups: Vec<Vec<&mut [f64]>> = Vec::new();
            let ngroups = s.div_ceil(cols);
            for _ in 0..ngroups {
                col_groups.push(Vec::with_capacity(n));
            }
            for p in planes.iter_mut() {
                let p: &mut [f64] = std::mem::take(p);
                for (g, c) in p.chunks_mut(cols).enumerate() {
                    col_groups[g].push(c);
                }
            }
            col_groups.into_par_iter().for_each(|mut g| {
                let m = g[0].len();
                g[0].iter_mut().for_each(|x| *x *= self.den[0]);
                for i in 1..n {
                    let (a, b) = g.split_at_mut(i);
                    let den = self.den[i];
                    for (c, p) in b[0][..m].iter_mut().zip(a[i - 1].iter()) {
                        *c = (*c + lam * p) * den;
                    }
                }
                for i in (0..n - 1).rev() {
                    let (a, b) = g.split_at_mut(i + 1);
                    let cp = self.cp[i];
                    for (c, nx) in a[i].iter_mut().zip(b[0].iter()) {
                        *c -= cp * nx;
                    }
                }
            });
        }
    }
}

/// v − h_t·b·∇_upwind v into `out`.
#[allow(clippy::too_many_arguments)]
fn advect(v: &[f64], drift: &[f64], scale: f64, d: usize, n: usize, ht: f64, hx: f64, out: &mut [f64]) {
    let c = ht / hx;
    out.par_chunks_mut(n).enumerate().for_each(|(line, o)| {
        let idx = line_indices(line, d, n);
        let base = line * n;
        for i0 in 0..n {
            let id = base + i0;
            let vi = v[id];
            let mut adv = 0.0;
            let mut stride = 1;
            for k in 0..d {
                let bk = drift[id * d + k] * scale;
                if bk != 0.0 {
                    let ik = if k == 0 { i0 } else { idx[k] };
                    let diff = if bk > 0.0 {
                        vi - if ik > 0 { v[id - stride] } else { 0.0 }
                    } else {
                        (if ik + 1 < n { v[id + stride] } else { 0.0 }) - vi
                    };
                    adv += bk * diff;
                }
                stride *= n;
            }
            o[i0] = vi - c * adv;
        }
    });
}

/// (sup|v|, sup over the outermost node layer of |v|).
fn sup_and_boundary(v: &[f64], d: usize, n: usize) -> (f64, f64) {
    let parts: Vec<(f64, f64)> = v
        .par_chunks(n)
        .enumerate()
        .map(|(line, l)| {
            let idx = line_indices(line, d, n);
            let on_face = (1..d).any(|k| idx[k] == 0 || idx[k] == n - 1);
            let sup = l.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let bnd = if on_face {
                sup
            } else {
                l[0].abs().max(l[n - 1].abs())
            };
            (sup, bnd)
        })
        .collect();
    parts
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, t)| (a.max(s), b.max(t)))
}

struct SourceTable {
    /// (node, spatial weight) for nodes where h ≠ 0
    support: Vec<(usize, f64)>,
    /// |𝖿| spatial profile at the support nodes when 𝖿 is separable
    separable: Option<Vec<f64>>,
}

impl SourceTable {
    fn new(src: &SourceTerm, lat: &Lattice) -> Self {
        let d = lat.dim;
        let mut x = vec![0.0; d];
        let mut support = Vec::new();
        for i in 0..lat.len() {
            lat.coords(i, &mut x);
            let w = src.h.as_ref().map_or(1.0, |h| h.spatial(&x));
            if w != 0.0 {
                support.push((i, w));
            }
        }
        let separable = src.f.is_separable().then(|| {
            support
                .par_iter()
                .map(|&(i, w)| {
                    let mut x = vec![0.0; d];
                    let mut o = vec![0.0; d];
                    lat.coords(i, &mut x);
                    let mut t = 0.0;
                    src.f.singular_locus().jitter(&mut t, &mut x, lat.h, lat.h);
                    src.f.map().spatial_into(&x, &mut o);
                    w * o.iter().map(|a| a * a).sum::<f64>().sqrt()
                })
                .collect()
        });
        Self { support, separable }
    }

    fn add(&self, src: &SourceTerm, lat: &Lattice, t: f64, scale: f64, out: &mut [f64]) {
        let psi = src.h.as_ref().map_or(1.0, |h| h.temporal(t));
        if psi == 0.0 {
            return;
        }
        match &self.separable {
            Some(prof) => {
                let tf = src.f.map().time_factor(t).abs() * psi * scale;
                for (&(i, _), p) in self.support.iter().zip(prof) {
                    out[i] += tf * p;
                }
            }
            None => {
                let d = lat.dim;
                let vals: Vec<f64> = self
                    .support
                    .par_iter()
                    .map(|&(i, w)| {
                        let mut x = vec![0.0; d];
                        let mut s = vec![0.0; d];
                        lat.coords(i, &mut x);
                        w * src.f.norm_sq_jittered(t, &x, lat.h, lat.h, &mut s).sqrt()
                    })
                    .collect();
                for (&(i, _), v) in self.support.iter().zip(vals) {
                    out[i] += scale * psi * v;
                }
            }
        }
    }
}

fn march(
    b: &DriftField,
    init: Vec<f64>,
    source: Option<&SourceTerm>,
    grid: &SpaceTimeGrid,
    dir: Direction,
) -> Result<GridSolution> {
    grid.validate()?;
    if b.dim() != grid.dim {
        return Err(LabError::DimensionMismatch {
            left: b.dim(),
            right: grid.dim,
        });
    }
    if !b.is_bounded() {
        return Err(LabError::RejectedSingularField(b.id().to_string()));
    }
    if let Some(s) = source {
        if s.f.dim() != grid.dim {
            return Err(LabError::DimensionMismatch {
                left: s.f.dim(),
                right: grid.dim,
            });
        }
    }
    let lat = grid.lattice();
    let (d, n) = (grid.dim, grid.cells);
    let (hx, ht) = (grid.h_x(), grid.h_t());
    let time = |k: usize| match dir {
        Direction::Forward => grid.t_start + k as f64 * ht,
        Direction::Backward => grid.t_end - k as f64 * ht,
    };
    let cfl_of = |bmax: f64| bmax * ht / hx;

    let mut drift = vec![0.0; lat.len() * d];
    let separable = b.is_separable();
    let mut spatial_max = 0.0;
    let mut max_cfl = 0.0f64;
    if separable {
        spatial_max = sample_vector(&lat, b, None, &mut drift);
        for k in 0..grid.steps {
            let bmax = b.map().time_factor(time(k)).abs() * spatial_max;
            max_cfl = max_cfl.max(cfl_of(bmax));
            if cfl_of(bmax) > 0.5 {
                return Err(LabError::StabilityViolation {
                    cfl: cfl_of(bmax),
                    b_max: bmax,
                    h_t: ht,
                    h_x: hx,
                });
            }
        }
    }
    let src_table = source.map(|s| SourceTable::new(s, &lat));
    let tri = Tridiagonal::new(n, ht / (hx * hx));
    let save_every = if grid.save_every == 0 { grid.steps } else { grid.save_every };

    let mut v = init;
    let mut next = vec![0.0; v.len()];
    let (sup0, bnd0) = sup_and_boundary(&v, d, n);
    let mut sup_history = vec![sup0];
    let mut leak = if sup0 > 0.0 { bnd0 / sup0 } else { 0.0 };
    let mut times = vec![time(0)];
    let mut levels = vec![v.clone()];
    for k in 0..grid.steps {
        let t = time(k);
        let scale = if separable {
            b.map().time_factor(t)
        } else {
            let bmax = sample_vector(&lat, b, Some(t), &mut drift);
            max_cfl = max_cfl.max(cfl_of(bmax));
            if cfl_of(bmax) > 0.5 {
                return Err(LabError::StabilityViolation {
                    cfl: cfl_of(bmax),
                    b_max: bmax,
                    h_t: ht,
                    h_x: hx,
                });
            }
            1.0
        };
        advect(&v, &drift, scale, d, n, ht, hx, &mut next);
        if let (Some(s), Some(tab)) = (source, &src_table) {
            tab.add(s, &lat, t, ht, &mut next);
        }
        for axis in 0..d {
            tri.solve_axis(&mut next, d, n, axis);
        }
        std::mem::swap(&mut v, &mut next);
        let (sup, bnd) = sup_and_boundary(&v, d, n);
        sup_history.push(sup);
        if sup > 0.0 {
            leak = leak.max(bnd / sup);
        }
        if (k + 1) % save_every == 0 || k + 1 == grid.steps {
            times.push(time(k + 1));
            levels.push(v.clone());
        }
    }
    let _ = spatial_max;
    Ok(GridSolution {
        grid: grid.clone(),
        direction: dir,
        field_id: b.id().to_string(),
        has_source: source.is_some(),
        times,
        levels,
        sup_history,
        boundary_leak: leak,
        max_cfl,
    })
}

/// Forward Cauchy problem on [t_start, t_end] from v(t_start) = f.
pub fn solve_forward_cauchy(
    b: &DriftField,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    source: Option<&SourceTerm>,
    grid: &SpaceTimeGrid,
) -> Result<GridSolution> {
    grid.validate()?;
    let init = sample_scalar(&grid.lattice(), f);
    march(b, init, source, grid, Direction::Forward)
}

/// Backward terminal problem from w(t_end) = f down to t_start.
pub fn solve_backward_terminal(
    b: &DriftField,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    source: Option<&SourceTerm>,
    grid: &SpaceTimeGrid,
) -> Result<GridSolution> {
    grid.validate()?;
    let init = sample_scalar(&grid.lattice(), f);
    march(b, init, source, grid, Direction::Backward)
}

/// exp(−|x − c|²/(2σ²)).
pub fn gaussian(center: Vec<f64>, sigma2: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| {
        let r2: f64 = x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum();
        (-0.5 * r2 / sigma2).exp()
    }
}

/// Exact solution of the forward problem with constant drift c from the Gaussian above.
pub fn gaussian_exact(center: &[f64], sigma2: f64, c: &[f64], t: f64, x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let s2 = sigma2 + 2.0 * t;
    let r2: f64 = x
        .iter()
        .zip(center)
        .zip(c)
        .map(|((xi, ci), bi)| {
            let y = xi - ci - bi * t;
            y * y
        })
        .sum();
    (sigma2 / s2).powf(0.5 * d) * (-0.5 * r2 / s2).exp()
}

/// Comparison of a solve against the closed-form advected heat kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub sigma2: f64,
    pub t: f64,
    /// max |v − exact| / max |exact| at the final level
    pub max_rel_error: f64,
    pub boundary_leak: f64,
}

/// Constant-drift Gaussian oracle (zero drift when `c` is all zeros).
pub fn gaussian_oracle(grid: &SpaceTimeGrid, sigma2: f64, c: &[f64]) -> Result<OracleReport> {
    let center = vec![0.0; grid.dim];
    let b = if c.iter().all(|v| *v == 0.0) {
        crate::fields::make_zero_drift(grid.dim)?
    } else {
        crate::fields::make_constant_drift(c)?
    };
    let f = gaussian(center.clone(), sigma2);
    let sol = solve_forward_cauchy(&b, &f, None, grid)?;
    let t = sol.last_time() - grid.t_start;
    let lat = grid.lattice();
    let exact = sample_scalar(&lat, &|x: &[f64]| gaussian_exact(&center, sigma2, c, t, x));
    let peak = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = sol
        .last()
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(OracleReport {
        sigma2,
        t,
        max_rel_error: err / peak,
        boundary_leak: sol.boundary_leak,
    })
}

/// Relative sup error of the zero-drift oracle on this grid; the grid error budget.
pub fn zero_drift_calibration(grid: &SpaceTimeGrid) -> Result<f64> {
    Ok(gaussian_oracle(grid, CALIBRATION_SIGMA2, &vec![0.0; grid.dim])?.max_rel_error)
}

/// Initial variance used by the zero-drift calibration.
pub const CALIBRATION_SIGMA2: f64 = 0.25;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_constant_drift, make_hardy_drift, make_zero_drift, Modulation};

    fn small() -> SpaceTimeGrid {
        SpaceTimeGrid {
            cells: 48,
            steps: 100,
            ..SpaceTimeGrid::default()
        }
    }

    #[test]
    fn weight_bound_and_tail() {
        let w = Weight::default();
        let mut g = [0.0; 3];
        for x in [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, -2.0, 1.0], [4.0, 4.0, 4.0]] {
            let rho = w.gradient(&x, &mut g);
            let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            assert!(n <= w.theta * w.kappa.sqrt() * rho * (1.0 + 1e-12));
        }
        // tail of (1+r²)^{-4} in d=3: closed form via r = tan u
        let tail = w.tail_fraction(3, 4.0);
        let oracle = {
            let f = |u: f64| u.sin().powi(2) * u.cos().powi(4);
            let (a, b) = (4f64.atan(), std::f64::consts::FRAC_PI_2);
            let n = 2000;
            let h = (b - a) / n as f64;
            let part: f64 = (0..n).map(|i| f(a + (i as f64 + 0.5) * h) * h).sum();
            part / (std::f64::consts::PI / 32.0)
        };
        assert!((tail - oracle).abs() < 1e-6, "{tail} vs {oracle}");
        w.check(&SpaceTimeGrid::default()).unwrap();
        assert!(Weight::new(1.0, 1.5, 3).is_err());
        assert!(Weight { kappa: 1.0, theta: 2.0 }.check(&SpaceTimeGrid::default()).is_err());
    }

    #[test]
    fn thomas_solves_the_system() {
        let n = 7;
        let lam = 0.8;
        let tri = Tridiagonal::new(n, lam);
        let rhs: Vec<f64> = (0..n * n * n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for axis in 0..3 {
            let mut u = rhs.clone();
            tri.solve_axis(&mut u, 3, n, axis);
            let s = n.pow(axis as u32);
            for (i, r) in rhs.iter().enumerate() {
                let ik = (i / s) % n;
                let lo = if ik > 0 { u[i - s] } else { 0.0 };
                let hi = if ik + 1 < n { u[i + s] } else { 0.0 };
                let lhs = (1.0 + 2.0 * lam) * u[i] - lam * (lo + hi);
                assert!((lhs - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_oracle_default_grid() {
        let r = gaussian_oracle(&SpaceTimeGrid::default(), 0.25, &[0.0; 3]).unwrap();
        assert!(r.max_rel_error <= 0.02, "{r:?}");
        assert!(r.boundary_leak < 1e-3);
    }

    #[test]
    fn constant_drift_translates() {
        let r = gaussian_oracle(&small(), 0.5, &[0.3, 0.0, -0.2]).unwrap();
        assert!(r.max_rel_error <= 0.02, "{r:?}");
        // the centre moves to x₀ + c·t: compare against the other direction
        let grid = small();
        let b = make_constant_drift(&[0.3, 0.0, 0.0]).unwrap();
        let sol = solve_forward_cauchy(&b, &gaussian(vec![0.0; 3], 0.5), None, &grid).unwrap();
        let plus = sol.value_at(sol.levels.len() - 1, &[0.15, 0.0, 0.0]).unwrap();
        let minus = sol.value_at(sol.levels.len() - 1, &[-0.15, 0.0, 0.0]).unwrap();
        assert!(plus > minus);
    }

    #[test]
    fn zero_data_stays_zero() {
        let sol = solve_forward_cauchy(&make_zero_drift(3).unwrap(), &|_: &[f64]| 0.0, None, &small()).unwrap();
        assert!(sol.last().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_singular_and_unstable() {
        let hardy = make_hardy_drift(3, 0.04, 1.0, Modulation::Constant(1.0)).unwrap();
        let f = gaussian(vec![0.0; 3], 0.25);
        assert!(matches!(
            solve_forward_cauchy(&hardy, &f, None, &small()),
            Err(LabError::RejectedSingularField(_))
        ));
        let fast = make_constant_drift(&[100.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            solve_forward_cauchy(&fast, &f, None, &small()),
            Err(LabError::StabilityViolation { .. })
        ));
    }

    #[test]
    fn backward_heat_variance() {
        let grid = small();
        let sol = solve_backward_terminal(&make_zero_drift(3).unwrap(), &gaussian(vec![0.0; 3], 0.5), None, &grid)
            .unwrap();
        assert_eq!(sol.last_time(), 0.0);
        let v0 = sol.value_at(sol.levels.len() - 1, &[1.0 / 24.0; 3]).unwrap();
        let exact = gaussian_exact(&[0.0; 3], 0.5, &[0.0; 3], 0.5, &[1.0 / 24.0; 3]);
        assert!((v0 / exact - 1.0).abs() < 0.02, "{v0} {exact}");
    }

    #[test]
    fn backward_drift_sign_follows_generator() {
        // w(0,x) = E f(X_T), X_T = x − cT + √2 W_T: the profile shifts to x₀ + cT
        let grid = small();
        let b = make_constant_drift(&[0.4, 0.0, 0.0]).unwrap();
        let sol = solve_backward_terminal(&b, &gaussian(vec![0.0; 3], 0.5), None, &grid).unwrap();
        let l = sol.levels.len() - 1;
        let at = |x: f64| sol.value_at(l, &[x, 1.0 / 24.0, 1.0 / 24.0]).unwrap();
        assert!(at(0.2) > at(-0.2));
    }

    #[test]
    fn max_principle_without_source() {
        let b = make_constant_drift(&[0.5, -0.5, 0.25]).unwrap();
        let sol = solve_forward_cauchy(&b, &gaussian(vec![0.3, 0.0, 0.0], 0.1), None, &small()).unwrap();
        for w in sol.sup_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn zero_drift_source_matches_heat() {
        // source |b_k| with b_k = 0 leaves the backward heat evolution of f
        let grid = small();
        let z = make_zero_drift(3).unwrap();
        let f = gaussian(vec![0.0; 3], 0.5);
        let src = SourceTerm::new(z.clone(), None);
        let a = solve_backward_terminal(&z, &f, Some(&src), &grid).unwrap();
        let b = solve_backward_terminal(&z, &f, None, &grid).unwrap();
        assert_eq!(a.last(), b.last());
    }

    #[test]
    fn unit_source_grows_linearly() {
        let grid = small();
        let z = make_zero_drift(3).unwrap();
        let one = make_constant_drift(&[1.0, 0.0, 0.0]).unwrap();
        let src = SourceTerm::new(one, None);
        let sol = solve_backward_terminal(&z, &|_: &[f64]| 0.0, Some(&src), &grid).unwrap();
        // away from the boundary w(0, 0) ≈ T
        let v = sol.value_at(sol.levels.len() - 1, &[1.0 / 24.0; 3]).unwrap();
        assert!((v - 0.5).abs() < 1e-3, "{v}");
    }
}
