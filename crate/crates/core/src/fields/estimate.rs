//! Rayleigh-quotient estimator of the form-bound, Morrey seminorm, and the weak-L^d bound.

use super::certificate::{FormBoundCertificate, GFunction, Provenance};
use super::quadrature::{graded_midpoint, graded_time_nodes, GradedRule};
use super::testfn::{RandomBumpFamily, TestFamily, TestFunction};
use super::{dist, DriftField, SingularLocus};
use crate::error::{LabError, Result};
use crate::special::unit_ball_volume;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// δ₁ = (‖b‖_{d,w} Ω_d^{−1/d} · 2/(d−2))² with the standard unit-ball volume.
pub fn strichartz_delta(weak_ld_norm: f64, d: usize) -> f64 {
    strichartz_delta_with_volume(weak_ld_norm, d, unit_ball_volume(d))
}

/// Same bound with an explicit ball-volume constant Ω_d.
pub fn strichartz_delta_with_volume(weak_ld_norm: f64, d: usize, omega: f64) -> f64 {
    assert!(d >= 3 && weak_ld_norm >= 0.0);
    let s = weak_ld_norm * omega.powf(-1.0 / d as f64) * 2.0 / (d as f64 - 2.0);
    s * s
}

const SEPARABLE_TIME_NODES: usize = 48;
const GENERAL_TIME_NODES: usize = 8;
const LEVEL_TOLERANCE: f64 = 0.005;

fn jitter_spatial(locus: &SingularLocus, x: &mut [f64], cell: f64) {
    if locus.spatial_distance(x) == 0.0 {
        x[0] += 0.5 * cell;
    }
}

struct Energies {
    /// ∫|b(t_k)|²η² per time node
    a: Vec<f64>,
    /// ∫η²
    b: f64,
    /// ∫|∇η|²
    c: f64,
}

fn spatial_energies(field: &DriftField, phi: &TestFunction, times: &[f64], rule: &GradedRule) -> Energies {
    let d = field.dim();
    let lo: Vec<f64> = phi.center_x.iter().map(|c| c - phi.radius).collect();
    let hi: Vec<f64> = phi.center_x.iter().map(|c| c + phi.radius).collect();
    let steep = field.steep_region();
    let core = phi.steepness > 0.0;
    let split = |c: &[f64], h: f64, depth: u32| {
        let mut pd = steep.point_distance(c);
        if core {
            pd = pd.min(dist(c, &phi.center_x));
        }
        rule.split(pd, steep.surface_distance(c), h, depth)
    };
    let skip = |c: &[f64], h: f64| dist(c, &phi.center_x) - h >= phi.radius;
    let separable = field.is_separable();
    let mut en = Energies {
        a: vec![0.0; times.len()],
        b: 0.0,
        c: 0.0,
    };
    let mut a0 = 0.0;
    let mut grad = vec![0.0; d];
    let mut bv = vec![0.0; d];
    let mut xs = vec![0.0; d];
    graded_midpoint(&lo, &hi, rule.base_cells, &split, &skip, &mut |x, w, side| {
        let eta = phi.spatial_grad(x, &mut grad);
        if eta == 0.0 {
            return;
        }
        let e2 = eta * eta;
        en.b += w * e2;
        en.c += w * grad.iter().map(|g| g * g).sum::<f64>();
        if separable {
            xs.copy_from_slice(x);
            jitter_spatial(field.singular_locus(), &mut xs, side);
            field.map().spatial_into(&xs, &mut bv);
            a0 += w * e2 * bv.iter().map(|v| v * v).sum::<f64>();
        } else {
            for (k, &t) in times.iter().enumerate() {
                en.a[k] += w * e2 * field.norm_sq_jittered(t, x, side, 1e-9, &mut bv);
            }
        }
    });
    if separable {
        let m = field.map();
        for (k, &t) in times.iter().enumerate() {
            let f = m.time_factor(t);
            en.a[k] = f * f * a0;
        }
    }
    en
}

fn quotient_at_level(field: &DriftField, phi: &TestFunction, g: &GFunction, level: usize) -> Result<f64> {
    let (t_lo, t_hi) = phi.time_support();
    let t_lo = t_lo.max(0.0);
    let mut sing = field.singular_locus().singular_times();
    sing.extend(g.singular_times());
    let n_t = if field.is_separable() {
        SEPARABLE_TIME_NODES
    } else {
        GENERAL_TIME_NODES
    };
    let nodes = graded_time_nodes(t_lo, t_hi, n_t, &sing);
    let times: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let rule = GradedRule::level(level, field.dim());
    let en = spatial_energies(field, phi, &times, &rule);
    let (mut num, mut psi_mass) = (0.0, 0.0);
    for (k, &(t, w)) in nodes.iter().enumerate() {
        let p = phi.temporal(t);
        let p2 = w * p * p;
        num += p2 * (en.a[k] - g.value(t) * en.b);
        psi_mass += p2;
    }
    let grad_energy = psi_mass * en.c;
    let value_energy = psi_mass * en.b;
    if !(grad_energy >= 1e-12 * value_energy) || grad_energy == 0.0 {
        return Err(LabError::DegenerateTest {
            gradient_energy: grad_energy,
            value_energy,
        });
    }
    Ok(num / grad_energy)
}

/// (∫∫|bφ|² − ∫g‖φ(t)‖²) / ∫∫|∇φ|², refined until consecutive levels agree to 0.5%.
pub fn rayleigh_quotient(field: &DriftField, phi: &TestFunction, g: &GFunction) -> Result<f64> {
    if phi.dim() != field.dim() {
        return Err(LabError::DimensionMismatch {
            left: field.dim(),
            right: phi.dim(),
        });
    }
    let mut prev = quotient_at_level(field, phi, g, 0)?;
    for level in 1..GradedRule::LEVELS {
        let q = quotient_at_level(field, phi, g, level)?;
        if (q - prev).abs() <= LEVEL_TOLERANCE * prev.abs().max(1e-300) {
            return Ok(q);
        }
        prev = q;
    }
    Ok(prev)
}

/// Outcome of a form-bound search.
#[derive(Clone, Debug, PartialEq)]
pub struct FormBoundEstimate {
    pub estimate: f64,
    pub best_index: Option<usize>,
    /// Quotient per candidate; None for degenerate candidates.
    pub quotients: Vec<Option<f64>>,
    pub degenerate: usize,
}

/// Maximum Rayleigh quotient over `budget` candidates, with g taken from `g`.
pub fn estimate_form_bound_detailed(
    field: &DriftField,
    family: &dyn TestFamily,
    budget: usize,
    g: &GFunction,
) -> Result<FormBoundEstimate> {
    if budget == 0 {
        return Err(LabError::InvalidParameter("budget must be >= 1".into()));
    }
    let results: Vec<Result<f64>> = (0..budget)
        .into_par_iter()
        .map(|i| rayleigh_quotient(field, &family.candidate(i), g))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    let mut quotients = Vec::with_capacity(budget);
    let mut degenerate = 0;
    let mut last_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(q) => {
                if best.is_none_or(|(_, b)| q > b) {
                    best = Some((i, q));
                }
                quotients.push(Some(q));
            }
            Err(e @ LabError::DegenerateTest { .. }) => {
                degenerate += 1;
                quotients.push(None);
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((i, q)) => Ok(FormBoundEstimate {
            estimate: q,
            best_index: Some(i),
            quotients,
            degenerate,
        }),
        None => Err(last_err.expect("budget >= 1")),
    }
}

/// Numerical lower bound on the best δ: max Rayleigh quotient with g from the attached certificate.
pub fn estimate_form_bound(field: &DriftField, family: &dyn TestFamily, budget: usize) -> Result<f64> {
    let g = field
        .certificate()
        .map(|c| c.g.clone())
        .unwrap_or(GFunction::Zero);
    Ok(estimate_form_bound_detailed(field, family, budget, &g)?.estimate)
}

/// Bumps centred on a sphere, for fields singular on a shell.
#[derive(Clone, Debug)]
struct ShellFamily {
    dim: usize,
    radius: f64,
    seed: u64,
}

impl TestFamily for ShellFamily {
    fn dim(&self) -> usize {
        self.dim
    }
    fn candidate(&self, index: usize) -> TestFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let mut c: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = super::norm(&c).max(1e-12);
        let off = rng.random_range(-0.1..0.1);
        c.iter_mut().for_each(|v| *v *= (self.radius + off) / n);
        let r = [0.25, 0.5, 0.75, 1.0][index % 4];
        TestFunction::new(1.0, c, r, 0.5)
    }
}

/// Numeric-estimate certificate (margin × estimate, g ≡ 0) for fields without a closed form.
pub fn certify_numerically(field: &DriftField, margin: f64) -> Result<FormBoundCertificate> {
    let g = GFunction::Zero;
    let mut best = 0.0f64;
    if let SingularLocus::Sphere { radius, .. } = field.singular_locus() {
        let fam = ShellFamily {
            dim: field.dim(),
            radius: *radius,
            seed: 1,
        };
        best = best.max(estimate_form_bound_detailed(field, &fam, 8, &g)?.estimate);
    }
    let fam = RandomBumpFamily::new(field.dim(), 2);
    best = best.max(estimate_form_bound_detailed(field, &fam, 8, &g)?.estimate);
    Ok(FormBoundCertificate::new(
        margin * best.max(0.0),
        g,
        Provenance::NumericEstimate,
    ))
}

/// Deterministic generator of cubes (centre, side) for the Morrey seminorm.
pub trait CubeSampler: Sync {
    fn cube(&self, index: usize) -> (Vec<f64>, f64);
}

/// Cubes centred at a point with side l₀·2^{−i}.
#[derive(Clone, Debug)]
pub struct NestedCubes {
    pub center: Vec<f64>,
    pub side: f64,
}

impl CubeSampler for NestedCubes {
    fn cube(&self, index: usize) -> (Vec<f64>, f64) {
        (self.center.clone(), self.side * 0.5f64.powi(index as i32))
    }
}

/// Seeded random cubes inside [−L, L]^d with log-uniform sides.
#[derive(Clone, Debug)]
pub struct RandomCubes {
    pub dim: usize,
    pub seed: u64,
    pub half_width: f64,
    pub side_range: (f64, f64),
}

impl CubeSampler for RandomCubes {
    fn cube(&self, index: usize) -> (Vec<f64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let c = (0..self.dim)
            .map(|_| rng.random_range(-self.half_width..self.half_width))
            .collect();
        let (lo, hi) = self.side_range;
        let l = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
        (c, l)
    }
}

/// max over cubes of l(Q)² (⨍_Q |b(t,·)|^{2s})^{1/s}, evaluated at time `t`.
pub fn morrey_seminorm(
    field: &DriftField,
    s: f64,
    sampler: &dyn CubeSampler,
    n_cubes: usize,
    t: f64,
) -> Result<f64> {
    if !(s > 1.0) || n_cubes == 0 {
        return Err(LabError::InvalidParameter(format!(
            "Morrey seminorm needs s > 1 and n_cubes >= 1, got s={s}, n={n_cubes}"
        )));
    }
    let d = field.dim();
    let rule = GradedRule::level(GradedRule::LEVELS - 1, d);
    let steep = field.steep_region();
    let values: Vec<f64> = (0..n_cubes)
        .into_par_iter()
        .map(|i| {
            let (c, l) = sampler.cube(i);
            let lo: Vec<f64> = c.iter().map(|v| v - 0.5 * l).collect();
            let hi: Vec<f64> = c.iter().map(|v| v + 0.5 * l).collect();
            let mut acc = 0.0;
            let mut bv = vec![0.0; d];
            graded_midpoint(
                &lo,
                &hi,
                rule.base_cells,
                &|x, h, depth| rule.split(steep.point_distance(x), steep.surface_distance(x), h, depth),
                &|_, _| false,
                &mut |x, w, side| {
                    acc += w * field.norm_sq_jittered(t, x, side, 1e-9, &mut bv).powf(s);
                },
            );
            let avg = acc / l.powi(d as i32);
            l * l * avg.powf(1.0 / s)
        })
        .collect();
    Ok(values.into_iter().fold(0.0, f64::max))
}
