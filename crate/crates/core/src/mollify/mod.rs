//! The approximating sequence b_m = c_m e^{ε_m Δ_{(t,x)}}(1_m b).
//!
//! Time-independent inputs are smoothed in space on a lattice and in time by the exact
//! Gaussian envelope of the window [0, m]; evaluation adds the interpolated smoothing
//! correction to the exact truncated field, so b_m agrees with the lattice convolution at
//! every node. Time-dependent inputs are smoothed on a coarser space-time lattice.

pub mod lattice;

pub use lattice::Lattice;

use crate::error::{LabError, Result};
use crate::fields::{DriftField, FieldMap, FormBoundCertificate, SingularLocus};
use crate::special::{normal_cdf, sobolev_constant};
use lattice::{convolve_axis, gauss_legendre8, gaussian_cell_weights};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Target drift tolerance γ_m as a function of the level m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GammaRule {
    /// γ_m = γ₀/m
    Harmonic { gamma0: f64 },
    /// γ_m = γ₀/m²
    Quadratic { gamma0: f64 },
}

impl Default for GammaRule {
    fn default() -> Self {
        GammaRule::Harmonic { gamma0: 0.5 }
    }
}

impl GammaRule {
    pub fn gamma(&self, m: u32) -> f64 {
        let m = m as f64;
        match *self {
            GammaRule::Harmonic { gamma0 } => gamma0 / m,
            GammaRule::Quadratic { gamma0 } => gamma0 / (m * m),
        }
    }
}

/// One level of the mollifier schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSchedule {
    pub m: u32,
    pub eps_m: f64,
    pub gamma_m: f64,
    pub c_m: f64,
    #[serde(rename = "C_S")]
    pub c_s: f64,
    pub r: f64,
    /// Lattice L^r distance actually achieved by eps_m.
    pub lattice_distance: f64,
}

/// c_m = δ/δ_m with δ_m = (√δ + √(C_S γ_m²))²; a field with δ = 0 keeps c_m = 1.
pub fn scaling_factor(delta: f64, c_s: f64, gamma: f64) -> f64 {
    if delta == 0.0 {
        return 1.0;
    }
    let delta_m = (delta.sqrt() + (c_s * gamma * gamma).sqrt()).powi(2);
    delta / delta_m
}

/// Lattice and search parameters for the smoothing step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifyConfig {
    /// Half-width of the spatial region of interest.
    pub half_width: f64,
    /// Cells per axis for time-independent inputs.
    pub cells: usize,
    /// Cells per axis for time-dependent inputs.
    pub dynamic_cells: usize,
    /// Time slices over [0, t_roi] for time-dependent inputs.
    pub t_cells: usize,
    /// Time horizon of the region of interest.
    pub t_roi: f64,
    pub eps_floor: f64,
    pub eps_max: f64,
    /// Exponent of the distance criterion; None means r = d.
    pub r: Option<f64>,
    pub bisection_steps: usize,
}

impl Default for MollifyConfig {
    fn default() -> Self {
        Self {
            half_width: 4.5,
            cells: 108,
            dynamic_cells: 54,
            t_cells: 16,
            t_roi: 1.0,
            eps_floor: 1e-8,
            eps_max: 1e-2,
            r: None,
            bisection_steps: 14,
        }
    }
}

fn window_probe(w: (f64, f64)) -> f64 {
    match (w.0.is_finite(), w.1.is_finite()) {
        (true, true) => 0.5 * (w.0 + w.1),
        (true, false) => w.0 + 1.0,
        (false, true) => w.1 - 1.0,
        _ => 0.0,
    }
}

#[derive(Debug)]
struct TruncatedMap {
    base: Arc<dyn FieldMap>,
    m: f64,
}

impl FieldMap for TruncatedMap {
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if !(0.0..=self.m).contains(&t) || r2 > self.m * self.m {
            out.fill(0.0);
            return;
        }
        self.base.eval_into(t, x, out);
        let n2: f64 = out.iter().map(|v| v * v).sum();
        if !(n2 <= self.m * self.m) {
            out.fill(0.0);
        }
    }
    fn time_independent(&self) -> bool {
        self.base.time_independent()
    }
    fn time_window(&self) -> (f64, f64) {
        let w = self.base.time_window();
        (w.0.max(0.0), w.1.min(self.m))
    }
    fn spatial_into(&self, x: &[f64], out: &mut [f64]) {
        self.eval_into(window_probe(self.time_window()), x, out)
    }
}

/// 1_m b: zero where |b| > m, |x| > m or t ∉ [0, m]; sup-bound m, certificate unchanged.
pub fn truncate(field: &DriftField, m: u32) -> DriftField {
    assert!(m >= 1, "truncation level must be >= 1");
    let map = TruncatedMap {
        base: field.map().clone(),
        m: m as f64,
    };
    let mut f = DriftField::new(
        format!("{}|m{}", field.id(), m),
        field.dim(),
        Arc::new(map),
        SingularLocus::None,
    )
    .expect("dimension already validated")
    .with_steep_region(field.steep_region().clone())
    .with_sup_bound(m as f64);
    f = match field.certificate() {
        Some(c) => f.with_certificate(c.clone()),
        None => f.without_certificate(),
    };
    f
}

/// e^{εΔ} in time of the indicator of [a, b], i.e. the Gaussian envelope with variance 2ε.
fn envelope(t: f64, window: (f64, f64), sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if t >= window.0 && t <= window.1 { 1.0 } else { 0.0 };
    }
    let lo = if window.0.is_finite() {
        normal_cdf((t - window.0) / sigma)
    } else {
        1.0
    };
    let hi = if window.1.is_finite() {
        normal_cdf((t - window.1) / sigma)
    } else {
        0.0
    };
    (lo - hi).max(0.0)
}

#[derive(Debug)]
struct StaticSmoothed {
    base: Arc<dyn FieldMap>,
    lattice: Lattice,
    corr: Vec<f64>,
    scale: f64,
    sigma: f64,
    window: (f64, f64),
}

impl FieldMap for StaticSmoothed {
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.spatial_into(x, out);
        let s = self.time_factor(t);
        out.iter_mut().for_each(|v| *v *= s);
    }
    fn separable(&self) -> bool {
        true
    }
    fn time_factor(&self, t: f64) -> f64 {
        self.scale * envelope(t, self.window, self.sigma)
    }
    fn spatial_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.spatial_into(x, out);
        let mut c = [0.0f64; 8];
        let d = out.len();
        if d <= 8 && self.lattice.interpolate(&self.corr, d, x, &mut c[..d]) {
            for (o, ci) in out.iter_mut().zip(&c[..d]) {
                *o += ci;
            }
        }
    }
}

#[derive(Debug)]
struct DynamicSmoothed {
    base: Arc<dyn FieldMap>,
    lattice: Lattice,
    /// time of slice 0 and spacing
    t0: f64,
    dt: f64,
    slices: usize,
    data: Vec<f64>,
    scale: f64,
}

impl FieldMap for DynamicSmoothed {
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let d = out.len();
        let s = (t - self.t0) / self.dt;
        let per = self.lattice.len() * d;
        if s >= 0.0 && s <= (self.slices - 1) as f64 && d <= 8 {
            let k = (s.floor() as usize).min(self.slices.saturating_sub(2));
            let fr = s - k as f64;
            let (mut a, mut b) = ([0.0f64; 8], [0.0f64; 8]);
            let ok_a = self
                .lattice
                .interpolate(&self.data[k * per..(k + 1) * per], d, x, &mut a[..d]);
            let k1 = (k + 1).min(self.slices - 1);
            let ok_b = self
                .lattice
                .interpolate(&self.data[k1 * per..(k1 + 1) * per], d, x, &mut b[..d]);
            if ok_a && ok_b {
                for i in 0..d {
                    out[i] = self.scale * ((1.0 - fr) * a[i] + fr * b[i]);
                }
                return;
            }
        }
        self.base.eval_into(t, x, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }
}

/// Per-node contributions summed in fixed-size chunks so the result is independent of threading.
fn chunked_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    const CHUNK: usize = 4096;
    let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    parts.iter().sum()
}

fn sample_static(base: &dyn FieldMap, lat: &Lattice) -> Vec<f64> {
    let d = lat.dim;
    let mut data = vec![0.0; lat.len() * d];
    data.par_chunks_mut(d * 1024).enumerate().for_each(|(c, chunk)| {
        let mut x = vec![0.0; d];
        for (j, out) in chunk.chunks_mut(d).enumerate() {
            lat.coords(c * 1024 + j, &mut x);
            base.spatial_into(&x, out);
        }
    });
    data
}

/// Prepared sampling of a time-independent truncated field.
struct StaticSmoother {
    roi: Lattice,
    ext: Lattice,
    pad: usize,
    f_ext: Vec<f64>,
    window: (f64, f64),
    t_roi: f64,
    r: f64,
}

impl StaticSmoother {
    fn new(base: &dyn FieldMap, cfg: &MollifyConfig, d: usize, eps_cap: f64) -> Self {
        let roi = Lattice::centered(d, cfg.half_width, cfg.cells);
        let sigma = (2.0 * eps_cap).sqrt();
        let pad = (6.0 * sigma / roi.h).ceil() as usize;
        let ext = roi.padded(pad);
        let f_ext = sample_static(base, &ext);
        let w = base.time_window();
        Self {
            roi,
            ext,
            pad,
            f_ext,
            window: (w.0.max(0.0), w.1),
            t_roi: cfg.t_roi,
            r: cfg.r.unwrap_or(d as f64),
        }
    }

    fn roi_to_ext(&self, lin: usize) -> usize {
        let (n, ne) = (self.roi.cells, self.ext.cells);
        let (mut lin, mut out, mut stride) = (lin, 0, 1);
        for _ in 0..self.roi.dim {
            out += (lin % n + self.pad) * stride;
            lin /= n;
            stride *= ne;
        }
        out
    }

    fn smoothed(&self, eps: f64) -> Vec<f64> {
        let d = self.roi.dim;
        let w = gaussian_cell_weights(self.ext.h, (2.0 * eps).sqrt());
        let shape = vec![self.ext.cells; d];
        let mut s = convolve_axis(&self.f_ext, &shape, d, 0, &w);
        for axis in 1..d {
            s = convolve_axis(&s, &shape, d, axis, &w);
        }
        s
    }

    /// Time nodes over [0, t_roi] with panels broken at the window edges.
    fn time_rule(&self, sigma: f64) -> Vec<(f64, f64, bool)> {
        let t = self.t_roi;
        let mut br = vec![0.0, t];
        for e in [self.window.0, self.window.1] {
            if e.is_finite() {
                for b in [e - 12.0 * sigma, e, e + 12.0 * sigma] {
                    if b > 0.0 && b < t {
                        br.push(b);
                    }
                }
            }
        }
        br.sort_by(|a, b| a.partial_cmp(b).unwrap());
        br.dedup();
        let mut out = Vec::new();
        for p in br.windows(2) {
            if p[1] <= p[0] {
                continue;
            }
            for (tk, wk) in gauss_legendre8(p[0], p[1]) {
                let inside = tk >= self.window.0 && tk <= self.window.1;
                out.push((tk, wk, inside));
            }
        }
        out
    }

    /// Correction S f − f on the ROI and the space-time lattice L^r distance.
    fn evaluate(&self, eps: f64) -> (Vec<f64>, f64) {
        let d = self.roi.dim;
        let s = self.smoothed(eps);
        let sigma = (2.0 * eps).sqrt();
        let rule: Vec<(f64, f64, f64)> = self
            .time_rule(sigma)
            .into_iter()
            .map(|(t, w, inside)| (envelope(t, self.window, sigma), w, if inside { 1.0 } else { 0.0 }))
            .collect();
        let n = self.roi.len();
        let mut corr = vec![0.0; n * d];
        corr.par_chunks_mut(d).enumerate().for_each(|(i, c)| {
            let e = self.roi_to_ext(i);
            for k in 0..d {
                c[k] = s[e * d + k] - self.f_ext[e * d + k];
            }
        });
        let half_r = 0.5 * self.r;
        let acc = chunked_sum(n, |i| {
            let e = self.roi_to_ext(i);
            let u = &s[e * d..(e + 1) * d];
            let v = &self.f_ext[e * d..(e + 1) * d];
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for k in 0..d {
                a += u[k] * u[k];
                b += u[k] * v[k];
                c += v[k] * v[k];
            }
            if a == 0.0 && c == 0.0 {
                return 0.0;
            }
            rule.iter()
                .map(|&(env, w, ind)| {
                    let q = (env * env * a - 2.0 * env * ind * b + ind * c).max(0.0);
                    w * q.powf(half_r)
                })
                .sum()
        });
        let dist = (acc * self.roi.cell_volume()).powf(1.0 / self.r);
        (corr, dist)
    }
}

/// Prepared space-time sampling of a time-dependent truncated field.
struct DynamicSmoother {
    roi: Lattice,
    ext: Lattice,
    pad: usize,
    tpad: usize,
    dt: f64,
    t_cells: usize,
    f_ext: Vec<f64>,
    r: f64,
}

impl DynamicSmoother {
    fn new(base: &dyn FieldMap, cfg: &MollifyConfig, d: usize, eps_cap: f64) -> Self {
        let roi = Lattice::centered(d, cfg.half_width, cfg.dynamic_cells);
        let sigma = (2.0 * eps_cap).sqrt();
        let pad = (6.0 * sigma / roi.h).ceil() as usize;
        let ext = roi.padded(pad);
        let dt = cfg.t_roi / cfg.t_cells as f64;
        let tpad = (6.0 * sigma / dt).ceil() as usize;
        let slices = cfg.t_cells + 2 * tpad;
        let per = ext.len() * d;
        let mut f_ext = vec![0.0; slices * per];
        f_ext.par_chunks_mut(per).enumerate().for_each(|(k, slab)| {
            let t = (k as f64 - tpad as f64 + 0.5) * dt;
            if t < 0.0 {
                return;
            }
            let mut x = vec![0.0; d];
            for (j, out) in slab.chunks_mut(d).enumerate() {
                ext.coords(j, &mut x);
                base.eval_into(t, &x, out);
            }
        });
        Self {
            roi,
            ext,
            pad,
            tpad,
            dt,
            t_cells: cfg.t_cells,
            f_ext,
            r: cfg.r.unwrap_or(d as f64),
        }
    }

    fn ext_index(&self, k: usize, lin: usize) -> usize {
        let (n, ne) = (self.roi.cells, self.ext.cells);
        let (mut lin, mut out, mut stride) = (lin, 0, 1);
        for _ in 0..self.roi.dim {
            out += (lin % n + self.pad) * stride;
            lin /= n;
            stride *= ne;
        }
        (k + self.tpad) * self.ext.len() + out
    }

    /// Smoothed values on the ROI slices and the lattice L^r distance.
    fn evaluate(&self, eps: f64) -> (Vec<f64>, f64) {
        let d = self.roi.dim;
        let sigma = (2.0 * eps).sqrt();
        let wx = gaussian_cell_weights(self.ext.h, sigma);
        let wt = gaussian_cell_weights(self.dt, sigma);
        let mut shape = vec![self.ext.cells; d];
        shape.push(self.t_cells + 2 * self.tpad);
        let mut s = convolve_axis(&self.f_ext, &shape, d, d, &wt);
        for axis in 0..d {
            s = convolve_axis(&s, &shape, d, axis, &wx);
        }
        let n = self.roi.len();
        let mut out = vec![0.0; self.t_cells * n * d];
        out.par_chunks_mut(d).enumerate().for_each(|(idx, o)| {
            let (k, i) = (idx / n, idx % n);
            let e = self.ext_index(k, i);
            o.copy_from_slice(&s[e * d..(e + 1) * d]);
        });
        let acc = chunked_sum(self.t_cells * n, |idx| {
            let (k, i) = (idx / n, idx % n);
            let e = self.ext_index(k, i);
            let q: f64 = (0..d)
                .map(|c| (s[e * d + c] - self.f_ext[e * d + c]).powi(2))
                .sum();
            q.powf(0.5 * self.r)
        });
        let dist = (acc * self.roi.cell_volume() * self.dt).powf(1.0 / self.r);
        (out, dist)
    }
}

enum Smoother {
    Static(StaticSmoother),
    Dynamic(DynamicSmoother),
}

impl Smoother {
    fn new(base: &dyn FieldMap, cfg: &MollifyConfig, d: usize, eps_cap: f64) -> Self {
        if base.time_independent() {
            Smoother::Static(StaticSmoother::new(base, cfg, d, eps_cap))
        } else {
            Smoother::Dynamic(DynamicSmoother::new(base, cfg, d, eps_cap))
        }
    }

    fn distance(&self, eps: f64) -> f64 {
        match self {
            Smoother::Static(s) => s.evaluate(eps).1,
            Smoother::Dynamic(s) => s.evaluate(eps).1,
        }
    }

    fn build(&self, base: Arc<dyn FieldMap>, eps: f64, scale: f64) -> (Arc<dyn FieldMap>, f64) {
        match self {
            Smoother::Static(s) => {
                let (corr, _) = s.evaluate(eps);
                let max_corr = corr
                    .chunks(s.roi.dim)
                    .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                let map = StaticSmoothed {
                    base,
                    lattice: s.roi.clone(),
                    corr,
                    scale,
                    sigma: (2.0 * eps).sqrt(),
                    window: s.window,
                };
                (Arc::new(map), max_corr)
            }
            Smoother::Dynamic(s) => {
                let (data, _) = s.evaluate(eps);
                let map = DynamicSmoothed {
                    base,
                    lattice: s.roi.clone(),
                    t0: 0.5 * s.dt,
                    dt: s.dt,
                    slices: s.t_cells,
                    data,
                    scale,
                };
                (Arc::new(map), 0.0)
            }
        }
    }
}

/// Componentwise Gaussian smoothing in (t, x) with variance 2ε, the field extended by 0 for t < 0.
pub fn heat_smooth(field: &DriftField, eps: f64, cfg: &MollifyConfig) -> Result<DriftField> {
    let sup = field
        .sup_bound()
        .ok_or_else(|| LabError::UnboundedInput(field.id().to_string()))?;
    if !(eps > 0.0) {
        return Err(LabError::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    let base = field.map().clone();
    let smoother = Smoother::new(base.as_ref(), cfg, field.dim(), eps);
    let (map, max_corr) = smoother.build(base, eps, 1.0);
    let mut out = DriftField::new(
        format!("{}~heat", field.id()),
        field.dim(),
        map,
        SingularLocus::None,
    )?
    .with_steep_region(field.steep_region().clone())
    .with_sup_bound(sup + max_corr);
    if let Some(c) = field.certificate() {
        out = out.with_certificate(c.clone());
    }
    Ok(out)
}

/// Largest ε in [floor, cap] with distance(ε) ≤ γ, by bisection in log ε.
fn search_eps(smoother: &Smoother, gamma: f64, m: u32, cfg: &MollifyConfig, cap: f64) -> Result<(f64, f64)> {
    let floor = cfg.eps_floor;
    let d_floor = smoother.distance(floor);
    if d_floor > gamma {
        return Err(LabError::ScheduleFailure {
            m,
            reason: format!(
                "lattice distance {d_floor:.3e} at the width floor {floor:e} exceeds gamma_m = {gamma:.3e}"
            ),
        });
    }
    let d_cap = smoother.distance(cap);
    if d_cap <= gamma {
        return Ok((cap, d_cap));
    }
    let (mut lo, mut hi) = (floor.ln(), cap.ln());
    let mut best = (floor, d_floor);
    for _ in 0..cfg.bisection_steps {
        let mid = 0.5 * (lo + hi);
        let dm = smoother.distance(mid.exp());
        if dm <= gamma {
            lo = mid;
            best = (mid.exp(), dm);
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

fn build_level(
    field: &DriftField,
    cert: &FormBoundCertificate,
    m: u32,
    rule: &GammaRule,
    cfg: &MollifyConfig,
    eps_cap: f64,
) -> Result<(DriftField, MollifierSchedule)> {
    if m == 0 {
        return Err(LabError::InvalidParameter("m must be >= 1".into()));
    }
    let d = field.dim();
    let truncated = truncate(field, m);
    let base = truncated.map().clone();
    let gamma = rule.gamma(m);
    let c_s = sobolev_constant(d);
    let c_m = scaling_factor(cert.delta, c_s, gamma);
    let smoother = Smoother::new(base.as_ref(), cfg, d, eps_cap);
    let (eps, dist) = search_eps(&smoother, gamma, m, cfg, eps_cap)?;
    let (map, max_corr) = smoother.build(base, eps, c_m);
    let schedule = MollifierSchedule {
        m,
        eps_m: eps,
        gamma_m: gamma,
        c_m,
        c_s,
        r: cfg.r.unwrap_or(d as f64),
        lattice_distance: dist,
    };
    let out = DriftField::new(format!("{}@m{}", field.id(), m), d, map, SingularLocus::None)?
        .with_steep_region(field.steep_region().clone())
        .with_certificate(cert.clone())
        .with_sup_bound(c_m * (m as f64 + max_corr));
    Ok((out, schedule))
}

/// b_m = c_m · heat_smooth(truncate(b, m), ε_m) with ε_m from the lattice L^r criterion.
pub fn build_approximation(
    field: &DriftField,
    cert: &FormBoundCertificate,
    m: u32,
    rule: &GammaRule,
    cfg: &MollifyConfig,
) -> Result<(DriftField, MollifierSchedule)> {
    build_level(field, cert, m, rule, cfg, cfg.eps_max)
}

/// Levels for increasing m, each ε_m capped below the previous one so the widths strictly decrease.
pub fn build_sequence(
    field: &DriftField,
    cert: &FormBoundCertificate,
    ms: &[u32],
    rule: &GammaRule,
    cfg: &MollifyConfig,
) -> Result<Vec<(DriftField, MollifierSchedule)>> {
    let mut out: Vec<(DriftField, MollifierSchedule)> = Vec::with_capacity(ms.len());
    let mut cap = cfg.eps_max;
    for (i, &m) in ms.iter().enumerate() {
        if i > 0 && m <= ms[i - 1] {
            return Err(LabError::InvalidParameter("levels must increase".into()));
        }
        let level = build_level(field, cert, m, rule, cfg, cap)?;
        cap = 0.99 * level.1.eps_m;
        out.push(level);
    }
    Ok(out)
}

/// Space-time box [lo, hi] × [t0, t1].
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl Region {
    pub fn cube(d: usize, half_width: f64, t0: f64, t1: f64) -> Self {
        Self {
            lo: vec![-half_width; d],
            hi: vec![half_width; d],
            t0,
            t1,
        }
    }
}

/// Lattice L² norm of b1 − b2 over the region with spacings (h_x, h_t); singular samples jittered.
pub fn l2loc_distance(b1: &DriftField, b2: &DriftField, region: &Region, h_x: f64, h_t: f64) -> Result<f64> {
    if b1.dim() != b2.dim() {
        return Err(LabError::DimensionMismatch {
            left: b1.dim(),
            right: b2.dim(),
        });
    }
    let d = b1.dim();
    let n: Vec<usize> = region
        .lo
        .iter()
        .zip(&region.hi)
        .map(|(a, b)| ((b - a) / h_x).round().max(1.0) as usize)
        .collect();
    let hs: Vec<f64> = (0..d).map(|k| (region.hi[k] - region.lo[k]) / n[k] as f64).collect();
    let nt = ((region.t1 - region.t0) / h_t).round().max(1.0) as usize;
    let ht = (region.t1 - region.t0) / nt as f64;
    let times: Vec<f64> = (0..nt).map(|k| region.t0 + (k as f64 + 0.5) * ht).collect();
    let vol: f64 = hs.iter().product::<f64>() * ht;
    let total: usize = n.iter().product();
    let both_sep = b1.is_separable() && b2.is_separable();
    // Σ_k f1(t_k)², Σ f1 f2, Σ f2²
    let (s11, s12, s22) = if both_sep {
        times.iter().fold((0.0, 0.0, 0.0), |acc, &t| {
            let (f1, f2) = (b1.map().time_factor(t), b2.map().time_factor(t));
            (acc.0 + f1 * f1, acc.1 + f1 * f2, acc.2 + f2 * f2)
        })
    } else {
        (0.0, 0.0, 0.0)
    };
    let node = |lin: usize, x: &mut [f64]| {
        let mut r = lin;
        for k in 0..d {
            x[k] = region.lo[k] + ((r % n[k]) as f64 + 0.5) * hs[k];
            r /= n[k];
        }
    };
    let acc = chunked_sum(total, |lin| {
        let mut x = vec![0.0; d];
        node(lin, &mut x);
        let (mut v1, mut v2) = (vec![0.0; d], vec![0.0; d]);
        if both_sep {
            let (mut x1, mut x2) = (x.clone(), x.clone());
            let mut t = 0.0;
            b1.singular_locus().jitter(&mut t, &mut x1, hs[0], ht);
            b2.singular_locus().jitter(&mut t, &mut x2, hs[0], ht);
            b1.map().spatial_into(&x1, &mut v1);
            b2.map().spatial_into(&x2, &mut v2);
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for k in 0..d {
                a += v1[k] * v1[k];
                b += v1[k] * v2[k];
                c += v2[k] * v2[k];
            }
            (s11 * a - 2.0 * s12 * b + s22 * c).max(0.0)
        } else {
            times
                .iter()
                .map(|&t| {
                    let (mut t1, mut x1) = (t, x.clone());
                    b1.singular_locus().jitter(&mut t1, &mut x1, hs[0], ht);
                    b1.eval_into(t1, &x1, &mut v1);
                    let (mut t2, mut x2) = (t, x.clone());
                    b2.singular_locus().jitter(&mut t2, &mut x2, hs[0], ht);
                    b2.eval_into(t2, &x2, &mut v2);
                    v1.iter().zip(&v2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                })
                .sum()
        }
    });
    Ok((acc * vol).sqrt())
}

/// Samples a field at time t on the nodes of a lattice (node-major, d components per node).
pub fn sample_on_lattice(field: &DriftField, lattice: &Lattice, t: f64) -> Vec<f64> {
    let d = field.dim();
    let mut data = vec![0.0; lattice.len() * d];
    data.par_chunks_mut(d * 1024).enumerate().for_each(|(c, chunk)| {
        let mut x = vec![0.0; d];
        for (j, out) in chunk.chunks_mut(d).enumerate() {
            lattice.coords(c * 1024 + j, &mut x);
            let mut tt = t;
            field.singular_locus().jitter(&mut tt, &mut x, lattice.h, 1e-9);
            field.eval_into(tt, &x, out);
        }
    });
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        estimate_form_bound, make_constant_drift, make_hardy_drift, make_zero_drift, Modulation,
        OriginConcentratingFamily,
    };

    fn small_cfg() -> MollifyConfig {
        MollifyConfig {
            half_width: 2.0,
            cells: 40,
            dynamic_cells: 20,
            t_cells: 8,
            ..MollifyConfig::default()
        }
    }

    fn hardy04() -> DriftField {
        make_hardy_drift(3, 0.04, 1.0, Modulation::Constant(1.0)).unwrap()
    }

    #[test]
    fn truncation_examples() {
        let z = truncate(&make_zero_drift(3).unwrap(), 4);
        assert_eq!(z.eval(0.5, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        let t = truncate(&hardy04(), 4);
        // |b| = 0.1/|x| ≤ 4 iff |x| ≥ 0.025
        assert_eq!(t.eval(0.5, &[0.02, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert!((t.eval(0.5, &[0.03, 0.0, 0.0]).unwrap()[0] - 0.1 / 0.03).abs() < 1e-12);
        assert_eq!(t.eval(0.5, &[5.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(t.eval(4.5, &[1.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(t.eval(0.5, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(t.sup_bound(), Some(4.0));
        assert_eq!(t.certificate(), hardy04().certificate());
    }

    #[test]
    fn truncation_does_not_raise_the_estimate() {
        let b = hardy04();
        let fam = OriginConcentratingFamily::new(3, 9);
        let raw = estimate_form_bound(&b, &fam, 6).unwrap();
        let tr = estimate_form_bound(&truncate(&b, 8), &fam, 6).unwrap();
        assert!(tr <= raw * 1.005, "{tr} vs {raw}");
    }

    #[test]
    fn heat_smooth_requires_bound() {
        assert!(matches!(
            heat_smooth(&hardy04(), 0.01, &small_cfg()),
            Err(LabError::UnboundedInput(_))
        ));
    }

    #[test]
    fn heat_smooth_zero_and_constant() {
        let z = heat_smooth(&make_zero_drift(3).unwrap(), 0.01, &small_cfg()).unwrap();
        assert_eq!(z.eval(1.0, &[0.1, 0.2, 0.3]).unwrap(), vec![0.0; 3]);
        let c = make_constant_drift(&[0.3, 0.0, -0.2]).unwrap();
        let s = heat_smooth(&c, 0.01, &small_cfg()).unwrap();
        let v = s.eval(1.0, &[0.025, 0.025, 0.025]).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-3 && (v[2] + 0.2).abs() < 1e-3, "{v:?}");
    }

    #[test]
    fn heat_smooth_error_shrinks_with_eps() {
        // Lipschitz field: truncated Hardy is bounded but steep; use its smooth far part
        let b = truncate(&make_constant_drift(&[1.0, 0.0, 0.0]).unwrap(), 1);
        let region = Region::cube(3, 0.9, 0.2, 0.6);
        let cfg = small_cfg();
        let errs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&e| {
                let s = heat_smooth(&b, e, &cfg).unwrap();
                l2loc_distance(&s, &b, &region, 0.1, 0.05).unwrap()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn scaling_factor_limits() {
        let cs = sobolev_constant(3);
        assert!(scaling_factor(0.04, cs, 0.1) < scaling_factor(0.04, cs, 0.01));
        assert!((scaling_factor(0.04, cs, 1e-9) - 1.0).abs() < 1e-6);
        assert_eq!(scaling_factor(0.0, cs, 0.1), 1.0);
        let g = 0.0625;
        let expect = 0.04 / (0.04f64.sqrt() + (cs * g * g).sqrt()).powi(2);
        assert_eq!(scaling_factor(0.04, cs, g).to_bits(), expect.to_bits());
    }

    #[test]
    fn schedule_record_round_trip() {
        let s = MollifierSchedule {
            m: 8,
            eps_m: 1e-3,
            gamma_m: 0.0625,
            c_m: 0.8,
            c_s: sobolev_constant(3),
            r: 3.0,
            lattice_distance: 0.05,
        };
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"C_S\""));
        let back: MollifierSchedule = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn zero_field_approximation() {
        let z = make_zero_drift(3).unwrap();
        let cert = z.certificate().unwrap().clone();
        let (bm, s) = build_approximation(&z, &cert, 4, &GammaRule::default(), &small_cfg()).unwrap();
        assert_eq!(bm.eval(0.5, &[0.1, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(s.c_m, 1.0);
    }

    #[test]
    fn hardy_sequence_is_monotone_and_bounded() {
        let b = hardy04();
        let cert = b.certificate().unwrap().clone();
        let cfg = small_cfg();
        let seq = build_sequence(&b, &cert, &[4, 8, 16], &GammaRule::default(), &cfg).unwrap();
        let lat = Lattice::centered(3, cfg.half_width, cfg.cells);
        for w in seq.windows(2) {
            assert!(w[1].1.eps_m < w[0].1.eps_m);
            assert!(w[1].1.gamma_m < w[0].1.gamma_m);
            assert!(w[1].1.c_m > w[0].1.c_m);
        }
        for (bm, s) in &seq {
            assert!(s.lattice_distance <= s.gamma_m);
            assert_eq!(bm.certificate(), Some(&cert));
            let data = sample_on_lattice(bm, &lat, 0.5);
            let sup = data
                .chunks(3)
                .map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            assert!(sup <= s.m as f64, "sup {sup} > m {}", s.m);
        }
        let region = Region::cube(3, 2.0, 0.0, 1.0);
        let d: Vec<f64> = seq
            .iter()
            .map(|(bm, _)| l2loc_distance(&b, bm, &region, 0.125, 0.125).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn time_dependent_input_uses_space_time_lattice() {
        let b = make_hardy_drift(
            3,
            0.04,
            1.0,
            Modulation::Cosine {
                amplitude: 1.0,
                omega: 2.0,
            },
        )
        .unwrap();
        let cert = b.certificate().unwrap().clone();
        let (bm, s) = build_approximation(&b, &cert, 4, &GammaRule::default(), &small_cfg()).unwrap();
        assert!(s.lattice_distance <= s.gamma_m);
        let v = bm.eval(0.5, &[1.0, 0.0, 0.0]).unwrap();
        let raw = b.eval(0.5, &[1.0, 0.0, 0.0]).unwrap();
        assert!((v[0] / (s.c_m * raw[0]) - 1.0).abs() < 0.1, "{v:?} vs {raw:?}");
    }
}
