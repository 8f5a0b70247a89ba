//! Closed-form constants shared by the field catalog and the mollifier.

use statrs::function::erf::erf;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Volume of the unit ball in R^d, π^{d/2} / Γ(d/2 + 1).
pub fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) / gamma(h + 1.0)
}

/// The product reading π^{d/2} · Γ(d/2 + 1) of the ball-volume constant.
///
/// Kept only so reports can show how far the two readings diverge.
pub fn unit_ball_volume_product_reading(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    PI.powf(h) * gamma(h + 1.0)
}

/// Surface area of the unit sphere S^{d-1}.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Sharp Sobolev constant C_S in ‖u‖²_{2d/(d−2)} ≤ C_S ‖∇u‖²_2.
///
/// C_S = 1 / S_d with S_d = π d (d−2) (Γ(d/2)/Γ(d))^{2/d}.
pub fn sobolev_constant(d: usize) -> f64 {
    assert!(d >= 3, "Sobolev embedding constant needs d >= 3");
    let df = d as f64;
    let s_d = PI * df * (df - 2.0) * (gamma(df / 2.0) / gamma(df)).powf(2.0 / df);
    1.0 / s_d
}

/// Hardy constant ((d−2)/2)² in ∫|∇φ|² ≥ ((d−2)/2)² ∫|x|⁻²φ².
pub fn hardy_constant(d: usize) -> f64 {
    let c = (d as f64 - 2.0) / 2.0;
    c * c
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Mass of N(0, variance) on the interval [a, b].
pub fn gaussian_interval_mass(a: f64, b: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return if a <= 0.0 && 0.0 < b { 1.0 } else { 0.0 };
    }
    let s = variance.sqrt();
    // erf differences lose precision far in the tails; use the upper tail on the right side
    if a > 0.0 {
        normal_cdf(-a / s) - normal_cdf(-b / s)
    } else {
        normal_cdf(b / s) - normal_cdf(a / s)
    }
}

/// Admissible q-interval ]d, δ^{-1/2}[ for the weighted gradient estimates.
pub fn admissible_q_interval(d: usize, delta: f64) -> (f64, f64) {
    let hi = if delta > 0.0 {
        delta.powf(-0.5)
    } else {
        f64::INFINITY
    };
    (d as f64, hi)
}

/// Lower end 2/(2−√δ) of the L^p quasi-contraction interval.
pub fn lp_interval_lower(delta: f64) -> f64 {
    2.0 / (2.0 - delta.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-12);
        // recursion V_d = 2π/d · V_{d-2}
        for d in 3..9 {
            let rec = 2.0 * PI / d as f64 * unit_ball_volume(d - 2);
            assert!((unit_ball_volume(d) - rec).abs() < 1e-12);
        }
        let printed = unit_ball_volume_product_reading(3);
        assert!((printed - PI.powf(1.5) * 0.75 * PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn sobolev_d3() {
        // S_3 = 3 (π/2)^{4/3}
        let s3 = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
        assert!((sobolev_constant(3) - 1.0 / s3).abs() < 1e-12);
    }

    #[test]
    fn sobolev_constant_matches_talenti_extremal() {
        // u = (1+r²)^{-(d-2)/2} attains the sharp constant; radial quadrature.
        for d in [3usize, 4, 5] {
            let df = d as f64;
            let a = (df - 2.0) / 2.0;
            let n = 400_000;
            let rmax = 4000.0f64;
            let (mut grad, mut lp) = (0.0, 0.0);
            let p = 2.0 * df / (df - 2.0);
            // substitution r = tan(θ)-free: plain midpoint in s = ln(1+r)
            let smax = (1.0 + rmax).ln();
            let ds = smax / n as f64;
            for i in 0..n {
                let s = (i as f64 + 0.5) * ds;
                let r = s.exp() - 1.0;
                let jac = s.exp();
                let u = (1.0 + r * r).powf(-a);
                let du = -a * 2.0 * r * (1.0 + r * r).powf(-a - 1.0);
                grad += du * du * r.powf(df - 1.0) * jac * ds;
                lp += u.abs().powf(p) * r.powf(df - 1.0) * jac * ds;
            }
            let area = unit_sphere_area(d);
            let ratio = (area * grad) / (area * lp).powf(2.0 / p);
            let rel = (ratio * sobolev_constant(d) - 1.0).abs();
            assert!(rel < 2e-3, "d={d} ratio={ratio} rel={rel}");
        }
    }

    #[test]
    fn q_interval_example() {
        let (lo, hi) = admissible_q_interval(3, 0.01);
        assert_eq!(lo, 3.0);
        assert!((hi - 10.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mass() {
        assert!((gaussian_interval_mass(-1.0, 1.0, 1.0) - 0.682_689_492).abs() < 1e-8);
        assert!((gaussian_interval_mass(0.0, 1e9, 2.0) - 0.5).abs() < 1e-12);
    }
}
