//! Form-bound certificates (δ, g): ∫‖bφ‖² ≤ δ∫‖∇φ‖² + ∫g‖φ‖².

use serde::{Deserialize, Serialize};

/// Where a certificate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Hardy,
    StrichartzWeakLd,
    HolderSobolevLd,
    YoungLps,
    MorreyHeuristic,
    NumericEstimate,
    SumRule,
}

/// Time profile g(t) ≥ 0 with its antiderivative G(t) = ∫₀ᵗ g.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "g_kind", content = "g_params", rename_all = "kebab-case")]
pub enum GFunction {
    Zero,
    Constant { value: f64 },
    /// coef · |t − t0|^{−exponent}, exponent in [0, 1).
    Power { coef: f64, t0: f64, exponent: f64 },
    /// coef · |t − t0|^{−1} (ln(e + |t − t0|^{−1}))^{−1−gamma}.
    LogSingular { coef: f64, t0: f64, gamma: f64 },
    /// Σ weight_i · g_i.
    Combination { terms: Vec<(f64, GFunction)> },
}

impl GFunction {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            GFunction::Zero => 0.0,
            GFunction::Constant { value } => *value,
            GFunction::Power { coef, t0, exponent } => {
                let u = (t - t0).abs();
                if *exponent == 0.0 {
                    *coef
                } else if u == 0.0 {
                    f64::INFINITY
                } else {
                    coef * u.powf(-exponent)
                }
            }
            GFunction::LogSingular { coef, t0, gamma } => {
                let u = (t - t0).abs();
                if u == 0.0 {
                    return f64::INFINITY;
                }
                coef / u * (std::f64::consts::E + 1.0 / u).ln().powf(-1.0 - gamma)
            }
            GFunction::Combination { terms } => terms.iter().map(|(w, g)| w * g.value(t)).sum(),
        }
    }

    /// G(t) = ∫₀ᵗ g(τ) dτ.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match self {
            GFunction::Zero => 0.0,
            GFunction::Constant { value } => value * t,
            GFunction::Power { coef, t0, exponent } => {
                let j = |x: f64| x.signum() * x.abs().powf(1.0 - exponent) / (1.0 - exponent);
                coef * (j(t - t0) - j(-t0))
            }
            GFunction::LogSingular { coef, t0, gamma } => {
                let j = |x: f64| x.signum() * log_singular_half(x.abs(), *gamma);
                coef * (j(t - t0) - j(-t0))
            }
            GFunction::Combination { terms } => {
                terms.iter().map(|(w, g)| w * g.antiderivative(t)).sum()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            GFunction::Zero => true,
            GFunction::Constant { value } => *value == 0.0,
            GFunction::Power { coef, .. } | GFunction::LogSingular { coef, .. } => *coef == 0.0,
            GFunction::Combination { terms } => terms.iter().all(|(w, g)| *w == 0.0 || g.is_zero()),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            GFunction::Zero | GFunction::Constant { .. } => true,
            GFunction::Power { exponent, coef, .. } => *exponent == 0.0 || *coef == 0.0,
            GFunction::LogSingular { coef, .. } => *coef == 0.0,
            GFunction::Combination { terms } => terms.iter().all(|(_, g)| g.is_constant()),
        }
    }

    /// Time points where g is singular.
    pub fn singular_times(&self) -> Vec<f64> {
        match self {
            GFunction::Power { t0, exponent, coef } if *exponent > 0.0 && *coef != 0.0 => vec![*t0],
            GFunction::LogSingular { t0, coef, .. } if *coef != 0.0 => vec![*t0],
            GFunction::Combination { terms } => {
                terms.iter().flat_map(|(_, g)| g.singular_times()).collect()
            }
            _ => Vec::new(),
        }
    }

    /// sup_{s ∈ [0, T−h]} ∫_s^{s+h} g.
    pub fn window_sup(&self, h: f64, horizon: f64) -> f64 {
        if self.is_zero() || h <= 0.0 {
            return 0.0;
        }
        if self.is_constant() {
            return self.value(0.0) * h;
        }
        let span = (horizon - h).max(0.0);
        let mass = |s: f64| self.antiderivative(s + h) - self.antiderivative(s);
        // coarse scan plus the windows that start or end at singular times
        let n = 2000;
        let mut best = 0.0f64;
        let mut best_s = 0.0;
        for i in 0..=n {
            let s = span * i as f64 / n as f64;
            let m = mass(s);
            if m > best {
                best = m;
                best_s = s;
            }
        }
        for t0 in self.singular_times() {
            for s in [t0 - h, t0 - 0.5 * h, t0] {
                let s = s.clamp(0.0, span);
                let m = mass(s);
                if m > best {
                    best = m;
                    best_s = s;
                }
            }
        }
        // golden-section polish around the best scan point
        let step = span / n as f64;
        let (mut a, mut b) = ((best_s - step).max(0.0), (best_s + step).min(span));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            if b - a < 1e-12 {
                break;
            }
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if mass(c) > mass(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best.max(mass(0.5 * (a + b)))
    }

    /// F(h) = h + sup_s ∫_s^{s+h} g, the window modulus of the drift-integral bound.
    pub fn window_modulus(&self, h: f64, horizon: f64) -> f64 {
        h + self.window_sup(h, horizon)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GFunction::Zero => "zero",
            GFunction::Constant { .. } => "constant",
            GFunction::Power { .. } => "power",
            GFunction::LogSingular { .. } => "log-singular",
            GFunction::Combination { .. } => "combination",
        }
    }

    pub fn scaled(&self, w: f64) -> GFunction {
        if w == 1.0 {
            return self.clone();
        }
        GFunction::Combination {
            terms: vec![(w, self.clone())],
        }
    }
}

/// I(a) = ∫₀^a u^{-1} (ln(e + 1/u))^{-1-γ} du, computed after u = e^{-y}.
///
/// No closed form; composite Simpson on y ∈ [−ln a, 40] plus the asymptotic tail
/// ∫_40^∞ y^{-1-γ} dy, whose relative error is O(e^{-39}).
fn log_singular_half(a: f64, gamma: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let y0 = -a.ln();
    let y_cut = 40.0f64.max(y0);
    let f = |y: f64| {
        // ln(e + e^y) computed without overflow
        let l = if y > 1.0 {
            y + (1.0 + (1.0 - y).exp()).ln()
        } else {
            (std::f64::consts::E + y.exp()).ln()
        };
        l.powf(-1.0 - gamma)
    };
    let mut body = 0.0;
    if y_cut > y0 {
        let n = 4096usize;
        let hstep = (y_cut - y0) / n as f64;
        let mut s = f(y0) + f(y_cut);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(y0 + i as f64 * hstep);
        }
        body = s * hstep / 3.0;
    }
    let tail = y_cut.powf(-gamma) / gamma;
    body + tail
}

/// Certificate asserting |b(t,·)|² ≤ δ(−Δ) + g(t) in the sense of quadratic forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormBoundCertificate {
    pub delta: f64,
    #[serde(flatten)]
    pub g: GFunction,
    pub provenance: Provenance,
}

/// Split weight used when one summand has δ = 0.
pub const SUM_RULE_FALLBACK_ETA: f64 = 1e-3;

impl FormBoundCertificate {
    pub fn new(delta: f64, g: GFunction, provenance: Provenance) -> Self {
        assert!(delta >= 0.0, "form-bound must be nonnegative");
        Self {
            delta,
            g,
            provenance,
        }
    }

    /// The certificate of the zero field.
    pub fn trivial() -> Self {
        Self::new(0.0, GFunction::Zero, Provenance::HolderSobolevLd)
    }

    pub fn is_trivial(&self) -> bool {
        self.delta == 0.0 && self.g.is_zero()
    }

    /// Certificate of b1 + b2 via ‖(b1+b2)φ‖ ≤ ‖b1φ‖ + ‖b2φ‖ and a Cauchy–Schwarz split.
    pub fn sum_rule(a: &Self, b: &Self) -> Self {
        if a.is_trivial() {
            return b.clone();
        }
        if b.is_trivial() {
            return a.clone();
        }
        let (s1, s2) = (a.delta.sqrt(), b.delta.sqrt());
        if s1 > 0.0 && s2 > 0.0 {
            let w1 = 1.0 + s2 / s1;
            let w2 = 1.0 + s1 / s2;
            let delta = (s1 + s2) * (s1 + s2);
            return Self::new(delta, combine(w1, &a.g, w2, &b.g), Provenance::SumRule);
        }
        // one δ vanishes: η-split (1+η, 1+1/η), the larger weight on the δ = 0 summand
        let eta = SUM_RULE_FALLBACK_ETA;
        let (w1, w2) = if s1 > 0.0 || (s1 == 0.0 && s2 == 0.0 && a.g.is_zero()) {
            (1.0 + eta, 1.0 + 1.0 / eta)
        } else {
            (1.0 + 1.0 / eta, 1.0 + eta)
        };
        let delta = w1 * a.delta + w2 * b.delta;
        Self::new(delta, combine(w1, &a.g, w2, &b.g), Provenance::SumRule)
    }

    /// e^{G(t)/(p√δ)}, the L^p quasi-contraction growth factor.
    pub fn lp_growth(&self, p: f64, t: f64) -> f64 {
        let big_g = self.g.antiderivative(t);
        if big_g == 0.0 {
            return 1.0;
        }
        if self.delta == 0.0 {
            return f64::INFINITY;
        }
        (big_g / (p * self.delta.sqrt())).exp()
    }
}

fn combine(w1: f64, g1: &GFunction, w2: f64, g2: &GFunction) -> GFunction {
    let mut terms = Vec::new();
    if !g1.is_zero() {
        terms.push((w1, g1.clone()));
    }
    if !g2.is_zero() {
        terms.push((w2, g2.clone()));
    }
    if terms.is_empty() {
        GFunction::Zero
    } else {
        GFunction::Combination { terms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_antiderivative_matches_quadrature() {
        let g = GFunction::Power {
            coef: 2.0,
            t0: 0.3,
            exponent: 0.4,
        };
        // split at the singularity; substitute u = s^{1/(1-α)} to remove it
        let alpha: f64 = 0.4;
        let k = 1.0 / (1.0 - alpha);
        let piece = |len: f64| {
            // midpoint rule: never touches v = 0
            let n = 20000;
            let top = len.powf(1.0 / k);
            let h = top / n as f64;
            (0..n)
                .map(|i| {
                    let v = (i as f64 + 0.5) * h;
                    let u = v.powf(k);
                    2.0 * u.powf(-alpha) * k * v.powf(k - 1.0) * h
                })
                .sum::<f64>()
        };
        let expect = piece(0.3) + piece(0.7);
        assert!((g.antiderivative(1.0) - expect).abs() < 1e-6, "{}", g.antiderivative(1.0));
        assert_eq!(g.antiderivative(0.0), 0.0);
    }

    #[test]
    fn log_singular_antiderivative_matches_direct_quadrature() {
        let g = GFunction::LogSingular {
            coef: 1.0,
            t0: 0.5,
            gamma: 0.5,
        };
        // direct quadrature in log-scale of u = |t - t0| on both sides of t0
        let n = 200_000;
        let (a, b) = (1e-300f64.ln(), 0.5f64.ln());
        let h = (b - a) / n as f64;
        let mut direct = 0.0;
        for side in [-1.0, 1.0] {
            for i in 0..n {
                let u: f64 = (a + (i as f64 + 0.5) * h).exp();
                // g(t0 ± u) · u, written in u so that tiny offsets do not round onto t0
                let _ = side;
                direct += (std::f64::consts::E + 1.0 / u).ln().powf(-1.5) * h;
            }
        }
        // tail below 1e-300 is ∫ y^{-1-γ} for y > 690: 690^{-0.5}/0.5
        let tail = 2.0 * 690.7755f64.powf(-0.5) / 0.5;
        let got = g.antiderivative(1.0);
        let u = 0.01;
        let formula = (std::f64::consts::E + 1.0 / u).ln().powf(-1.5) / u;
        assert!((g.value(0.5 + u) - formula).abs() < 1e-9 * formula);
        assert_eq!(g.value(0.5 - u), g.value(0.5 + u));
        assert!(((direct + tail) - got).abs() / got < 2e-3, "{direct} {tail} {got}");
        // G nondecreasing, G(0)=0
        let mut prev = 0.0;
        assert_eq!(g.antiderivative(0.0), 0.0);
        for i in 1..50 {
            let v = g.antiderivative(i as f64 * 0.02);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn window_modulus_constant_and_zero() {
        let g = GFunction::Zero;
        assert_eq!(g.window_modulus(0.25, 1.0), 0.25);
        let c = GFunction::Constant { value: 2.0 };
        assert!((c.window_modulus(0.5, 1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn window_sup_finds_singular_window() {
        let g = GFunction::Power {
            coef: 1.0,
            t0: 0.6,
            exponent: 0.5,
        };
        // window of length 0.2 centred at t0 maximises the mass: 2·2·sqrt(0.1)
        let best = g.window_sup(0.2, 1.0);
        assert!((best - 4.0 * 0.1f64.sqrt()).abs() < 1e-6, "{best}");
    }

    #[test]
    fn sum_rule_examples() {
        let h = |d| FormBoundCertificate::new(d, GFunction::Zero, Provenance::Hardy);
        let s = FormBoundCertificate::sum_rule(&h(0.01), &h(0.01));
        assert!((s.delta - 0.04).abs() < 1e-15);
        assert_eq!(s.provenance, Provenance::SumRule);
        let t = FormBoundCertificate::trivial();
        assert_eq!(FormBoundCertificate::sum_rule(&h(0.01), &t), h(0.01));
        // weights of the g-split are symmetric under 1↔2
        let a = FormBoundCertificate::new(0.04, GFunction::Constant { value: 1.0 }, Provenance::Hardy);
        let b = FormBoundCertificate::new(0.01, GFunction::Constant { value: 3.0 }, Provenance::Hardy);
        let ab = FormBoundCertificate::sum_rule(&a, &b);
        let ba = FormBoundCertificate::sum_rule(&b, &a);
        assert!((ab.g.value(0.3) - ba.g.value(0.3)).abs() < 1e-12);
        // (1 + 0.1/0.2)·1 + (1 + 0.2/0.1)·3 = 1.5 + 9
        assert!((ab.g.value(0.0) - 10.5).abs() < 1e-12);
    }

    #[test]
    fn sum_rule_fallback_with_zero_delta() {
        let a = FormBoundCertificate::new(0.04, GFunction::Zero, Provenance::Hardy);
        let b = FormBoundCertificate::new(0.0, GFunction::Constant { value: 1.0 }, Provenance::HolderSobolevLd);
        let s = FormBoundCertificate::sum_rule(&a, &b);
        assert!((s.delta - 0.04 * 1.001).abs() < 1e-15);
        assert!((s.g.value(0.0) - 1001.0).abs() < 1e-9);
    }

    #[test]
    fn certificate_record_round_trip() {
        let c = FormBoundCertificate::new(
            0.04,
            GFunction::Power {
                coef: 1.0,
                t0: 0.5,
                exponent: 0.25,
            },
            Provenance::YoungLps,
        );
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"g_kind\":\"power\""), "{s}");
        assert!(s.contains("\"provenance\":\"young-lps\""), "{s}");
        let back: FormBoundCertificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
