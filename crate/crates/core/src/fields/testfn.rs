//! Compactly supported test functions φ(t,x) = ψ((t−t_c)/τ) · η(|x−x_c|/R).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Space-time bump with an optional steep core.
///
/// Spatial profile η(ρ) = (a² + ρ²)^{−σ/2} · exp(1 − 1/(1−ρ²)) for ρ < 1, zero otherwise.
/// With σ = 0 this is the plain bump. Temporal profile ψ(s) = exp(1 − 1/(1−s²)).
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub center_t: f64,
    pub center_x: Vec<f64>,
    pub radius: f64,
    pub tau: f64,
    /// Core exponent σ ≥ 0.
    pub steepness: f64,
    /// Core width a > 0 in units of the radius.
    pub inner: f64,
}

fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

impl TestFunction {
    pub fn new(center_t: f64, center_x: Vec<f64>, radius: f64, tau: f64) -> Self {
        assert!(radius > 0.0 && tau > 0.0, "test function radii must be positive");
        Self {
            center_t,
            center_x,
            radius,
            tau,
            steepness: 0.0,
            inner: 1.0,
        }
    }

    pub fn with_profile(mut self, steepness: f64, inner: f64) -> Self {
        assert!(steepness >= 0.0 && inner > 0.0);
        self.steepness = steepness;
        self.inner = inner;
        self
    }

    pub fn dim(&self) -> usize {
        self.center_x.len()
    }

    pub fn time_support(&self) -> (f64, f64) {
        (self.center_t - self.tau, self.center_t + self.tau)
    }

    pub fn temporal(&self, t: f64) -> f64 {
        let s = (t - self.center_t) / self.tau;
        bump(s * s)
    }

    fn rho2(&self, x: &[f64]) -> f64 {
        let r2 = self.radius * self.radius;
        x.iter()
            .zip(&self.center_x)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            / r2
    }

    fn core(&self, rho2: f64) -> f64 {
        if self.steepness == 0.0 {
            1.0
        } else {
            (self.inner * self.inner + rho2).powf(-0.5 * self.steepness)
        }
    }

    pub fn spatial(&self, x: &[f64]) -> f64 {
        let p2 = self.rho2(x);
        if p2 >= 1.0 {
            return 0.0;
        }
        self.core(p2) * bump(p2)
    }

    /// Writes ∇η(x) into `out` and returns η(x).
    pub fn spatial_grad(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let p2 = self.rho2(x);
        if p2 >= 1.0 {
            out.fill(0.0);
            return 0.0;
        }
        let b = bump(p2);
        let a2 = self.inner * self.inner;
        let (core, dcore) = if self.steepness == 0.0 {
            (1.0, 0.0)
        } else {
            let base = a2 + p2;
            let c = base.powf(-0.5 * self.steepness);
            (c, -self.steepness * c / base)
        };
        let one_minus = 1.0 - p2;
        // (dη/dρ)/ρ
        let radial = dcore * b - core * b * 2.0 / (one_minus * one_minus);
        let inv_r2 = 1.0 / (self.radius * self.radius);
        for ((o, xi), ci) in out.iter_mut().zip(x).zip(&self.center_x) {
            *o = radial * (xi - ci) * inv_r2;
        }
        core * b
    }

    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.temporal(t) * self.spatial(x)
    }

    /// Spatial gradient ∇_x φ(t,x); returns φ(t,x).
    pub fn grad_x(&self, t: f64, x: &[f64], out: &mut [f64]) -> f64 {
        let psi = self.temporal(t);
        let v = self.spatial_grad(x, out);
        for o in out.iter_mut() {
            *o *= psi;
        }
        psi * v
    }
}

/// Deterministic generator of test functions indexed by candidate number.
pub trait TestFamily: Sync {
    fn dim(&self) -> usize;
    fn candidate(&self, index: usize) -> TestFunction;
}

const STEEPNESS: [f64; 5] = [0.49, 0.45, 0.4, 0.3, 0.0];
const INNER: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Bumps centred at (nearly) a point, with steep cores and shrinking radii.
///
/// Candidates cycle through σ × a, halving the radius every full cycle; centres receive a
/// seeded offset much smaller than the core width so the core stays on the point.
#[derive(Clone, Debug)]
pub struct OriginConcentratingFamily {
    pub dim: usize,
    pub seed: u64,
    pub center: Vec<f64>,
    pub base_radius: f64,
    pub center_t: f64,
    pub tau: f64,
}

impl OriginConcentratingFamily {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            seed,
            center: vec![0.0; dim],
            base_radius: 1.0,
            center_t: 1.0,
            tau: 0.5,
        }
    }
}

impl TestFamily for OriginConcentratingFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn candidate(&self, index: usize) -> TestFunction {
        let cycle = STEEPNESS.len() * INNER.len();
        let k = index % cycle;
        let sigma = STEEPNESS[k / INNER.len()];
        let a = INNER[k % INNER.len()];
        let radius = self.base_radius * 0.5f64.powi(((index / cycle) % 6) as i32);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let off = 0.05 * a * radius;
        let center: Vec<f64> = self
            .center
            .iter()
            .map(|c| c + off * rng.random_range(-1.0..1.0))
            .collect();
        let tau = self.tau * rng.random_range(0.8..1.0);
        TestFunction::new(self.center_t, center, radius, tau).with_profile(sigma, a)
    }
}

/// Plain bumps with seeded random centres and log-uniform radii.
#[derive(Clone, Debug)]
pub struct RandomBumpFamily {
    pub dim: usize,
    pub seed: u64,
    pub half_width: f64,
    pub radius_range: (f64, f64),
    pub time_range: (f64, f64),
    pub tau: f64,
}

impl RandomBumpFamily {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            seed,
            half_width: 2.0,
            radius_range: (0.05, 1.0),
            time_range: (0.5, 1.5),
            tau: 0.5,
        }
    }
}

impl TestFamily for RandomBumpFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn candidate(&self, index: usize) -> TestFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let center: Vec<f64> = (0..self.dim)
            .map(|_| rng.random_range(-self.half_width..self.half_width))
            .collect();
        let (lo, hi) = self.radius_range;
        let radius = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
        let ct = rng.random_range(self.time_range.0..self.time_range.1);
        TestFunction::new(ct, center, radius, self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_is_respected() {
        let phi = TestFunction::new(1.0, vec![0.5, 0.0, 0.0], 0.3, 0.2).with_profile(0.4, 0.01);
        let mut g = [1.0; 3];
        assert_eq!(phi.value(1.0, &[0.81, 0.0, 0.0]), 0.0);
        assert_eq!(phi.grad_x(1.0, &[0.81, 0.0, 0.0], &mut g), 0.0);
        assert_eq!(g, [0.0; 3]);
        assert_eq!(phi.value(1.25, &[0.5, 0.0, 0.0]), 0.0);
        assert!(phi.value(1.0, &[0.5, 0.1, 0.0]) > 0.0);
    }

    #[test]
    fn plain_bump_peak_is_one() {
        let phi = TestFunction::new(0.0, vec![0.0; 4], 1.0, 1.0);
        assert!((phi.value(0.0, &[0.0; 4]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for probe in 0..1000 {
            let d = 3 + probe % 3;
            let sigma = [0.0, 0.3, 0.49][probe % 3];
            let a = [1e-3, 1e-2, 0.5][(probe / 3) % 3];
            let radius = rng.random_range(0.1..2.0);
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let phi = TestFunction::new(0.0, c.clone(), radius, 1.0).with_profile(sigma, a);
            // interior probe with ρ in [max(0.05, 5a), 0.9]
            let rho = rng.random_range((0.05f64).max(5.0 * a).min(0.5)..0.9);
            let mut dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = super::super::norm(&dir);
            dir.iter_mut().for_each(|v| *v /= n);
            let x: Vec<f64> = c.iter().zip(&dir).map(|(ci, u)| ci + rho * radius * u).collect();
            let mut g = vec![0.0; d];
            phi.spatial_grad(&x, &mut g);
            let h = 1e-5 * radius * rho;
            let mut fd = vec![0.0; d];
            for i in 0..d {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += h;
                xm[i] -= h;
                fd[i] = (phi.spatial(&xp) - phi.spatial(&xm)) / (2.0 * h);
            }
            let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let rel = err / super::super::norm(&g);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-6, "worst relative gradient error {worst:e}");
    }

    #[test]
    fn families_are_deterministic() {
        let f = OriginConcentratingFamily::new(3, 7);
        assert_eq!(f.candidate(5), f.candidate(5));
        assert_ne!(f.candidate(5), f.candidate(6));
        let r = RandomBumpFamily::new(3, 7);
        assert_eq!(r.candidate(3), r.candidate(3));
        let c = f.candidate(0);
        assert!(super::super::norm(&c.center_x) <= 0.05 * 1e-3 * 3f64.sqrt());
        assert_eq!(c.steepness, 0.49);
    }
}
