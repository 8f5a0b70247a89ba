//! Closed-form drift fields with analytic certificates.

use super::certificate::{FormBoundCertificate, GFunction, Provenance};
use super::{norm, DriftField, FieldMap, SingularLocus};
use crate::error::{LabError, Result};
use crate::special::{sobolev_constant, unit_ball_volume};
use std::f64::consts::PI;
use std::sync::Arc;

/// Time modulation κ(t) with |κ| ≤ 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Modulation {
    Constant(f64),
    /// amplitude · cos(omega · t)
    Cosine { amplitude: f64, omega: f64 },
}

impl Modulation {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Modulation::Constant(k) => k,
            Modulation::Cosine { amplitude, omega } => amplitude * (omega * t).cos(),
        }
    }

    fn check(&self) -> Result<()> {
        // probe on a fine time grid; the modulations here attain their max on it
        for i in 0..=1000 {
            let t = i as f64 * 0.01;
            if self.value(t).abs() > 1.0 + 1e-12 {
                return Err(LabError::InvalidParameter(format!(
                    "|kappa({t})| = {} exceeds 1",
                    self.value(t).abs()
                )));
            }
        }
        Ok(())
    }

    fn is_constant(&self) -> bool {
        matches!(self, Modulation::Constant(_))
    }
}

#[derive(Debug)]
struct ZeroMap;

impl FieldMap for ZeroMap {
    fn eval_into(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn separable(&self) -> bool {
        true
    }
    fn time_independent(&self) -> bool {
        true
    }
}

pub fn make_zero_drift(d: usize) -> Result<DriftField> {
    Ok(DriftField::new("zero", d, Arc::new(ZeroMap), SingularLocus::None)?
        .with_certificate(FormBoundCertificate::trivial())
        .with_sup_bound(0.0))
}

#[derive(Debug)]
struct ConstantMap(Vec<f64>);

impl FieldMap for ConstantMap {
    fn eval_into(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
    fn separable(&self) -> bool {
        true
    }
    fn time_independent(&self) -> bool {
        true
    }
}

/// b ≡ c; bounded, so δ = 0 with g ≡ |c|².
pub fn make_constant_drift(c: &[f64]) -> Result<DriftField> {
    let m = norm(c);
    Ok(
        DriftField::new("constant", c.len(), Arc::new(ConstantMap(c.to_vec())), SingularLocus::None)?
            .with_certificate(FormBoundCertificate::new(
                0.0,
                GFunction::Constant { value: m * m },
                Provenance::HolderSobolevLd,
            ))
            .with_sup_bound(m),
    )
}

#[derive(Debug)]
struct HardyMap {
    coef: f64,
    kappa: Modulation,
}

impl FieldMap for HardyMap {
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let s = self.coef * self.kappa.value(t) / r2;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
    }
    fn separable(&self) -> bool {
        true
    }
    fn time_independent(&self) -> bool {
        self.kappa.is_constant()
    }
    fn time_factor(&self, t: f64) -> f64 {
        self.kappa.value(t)
    }
    fn spatial_into(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let s = self.coef / r2;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
    }
}

/// b(t,x) = sign · √δ · ((d−2)/2) · κ(t) · |x|⁻² x.
///
/// sign = +1 attracts toward the origin under the −b dt convention of the stochastic equation.
pub fn make_hardy_drift(d: usize, delta: f64, sign: f64, kappa: Modulation) -> Result<DriftField> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(LabError::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(LabError::InvalidParameter(format!("sign must be ±1, got {sign}")));
    }
    kappa.check()?;
    let coef = sign * delta.sqrt() * (d as f64 - 2.0) / 2.0;
    let id = if kappa.is_constant() { "hardy" } else { "hardy-time" };
    Ok(
        DriftField::new(id, d, Arc::new(HardyMap { coef, kappa }), SingularLocus::origin(d))?
            .with_certificate(FormBoundCertificate::new(delta, GFunction::Zero, Provenance::Hardy)),
    )
}

#[derive(Debug)]
struct HardyTimeMap {
    coef_sq: f64,
    sign: f64,
    kappa: Modulation,
    g: GFunction,
}

impl FieldMap for HardyTimeMap {
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let k = self.kappa.value(t);
        let mag = (self.coef_sq * k * k / r2 + self.g.value(t)).sqrt();
        let s = self.sign * mag / r2.sqrt();
        for (o, xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
    }
}

/// Radial field with |b|² = δ((d−2)/2)² κ(t)² |x|⁻² + C |t−t0|⁻¹ (ln(e+|t−t0|⁻¹))^{−1−γ}.
///
/// Certified by Hardy's inequality with g equal to the time-singular term.
pub fn make_hardy_time_drift(
    d: usize,
    delta: f64,
    sign: f64,
    kappa: Modulation,
    c: f64,
    t0: f64,
    gamma: f64,
) -> Result<DriftField> {
    if !(delta > 0.0) {
        return Err(LabError::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    if c < 0.0 || !(gamma > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "need C >= 0 and gamma > 0, got C={c}, gamma={gamma}"
        )));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(LabError::InvalidParameter(format!("sign must be ±1, got {sign}")));
    }
    kappa.check()?;
    let g = GFunction::LogSingular { coef: c, t0, gamma };
    let coef = delta.sqrt() * (d as f64 - 2.0) / 2.0;
    let map = HardyTimeMap {
        coef_sq: coef * coef,
        sign,
        kappa,
        g: g.clone(),
    };
    let locus = if c > 0.0 {
        SingularLocus::union(SingularLocus::origin(d), SingularLocus::TimeSlice(t0))
    } else {
        SingularLocus::origin(d)
    };
    Ok(DriftField::new("hardy-time", d, Arc::new(map), locus)?
        .with_certificate(FormBoundCertificate::new(delta, g, Provenance::Hardy)))
}

#[derive(Debug)]
struct ShellLogMap {
    c: f64,
    a: f64,
    power: f64,
}

impl ShellLogMap {
    fn magnitude(&self, r: f64) -> f64 {
        self.magnitude_at_offset((r - 1.0).abs())
    }

    /// |b| as a function of the distance u = ||x| − 1| to the shell.
    fn magnitude_at_offset(&self, u: f64) -> f64 {
        if u >= self.a || u == 0.0 {
            return 0.0;
        }
        (self.c / (u * (-u.ln()).powf(self.power))).sqrt()
    }
}

impl FieldMap for ShellLogMap {
    fn eval_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        let m = self.magnitude(r);
        if m == 0.0 {
            out.fill(0.0);
            return;
        }
        for (o, xi) in out.iter_mut().zip(x) {
            *o = m * xi / r;
        }
    }
    fn separable(&self) -> bool {
        true
    }
    fn time_independent(&self) -> bool {
        true
    }
}

/// Radial field with |b|² = C · 1_{1−a<|x|<1+a} · ||x|−1|⁻¹ (−ln||x|−1|)^{−c}.
///
/// Locally L² but not L^{2+ε}. The certificate is a numerical estimate with g ≡ 0,
/// inflated by 10%; see [`certify_numerically`](super::estimate::certify_numerically).
pub fn make_shell_log_drift(d: usize, c_coef: f64, a: f64, c: f64) -> Result<DriftField> {
    if !(c_coef > 0.0) || !(a > 0.0 && a < 1.0) || !(c > 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "shell-log needs C > 0, 0 < a < 1, c > 1; got C={c_coef}, a={a}, c={c}"
        )));
    }
    let locus = SingularLocus::Sphere {
        center: vec![0.0; d],
        radius: 1.0,
    };
    let field = DriftField::new(
        "shell-log",
        d,
        Arc::new(ShellLogMap {
            c: c_coef,
            a,
            power: c,
        }),
        locus,
    )?;
    let cert = super::estimate::certify_numerically(&field, 1.10)?;
    Ok(field.with_certificate(cert))
}

#[derive(Debug)]
struct LpsMap {
    amp: f64,
    alpha: f64,
    t0: f64,
    width: f64,
    dir: Vec<f64>,
}

impl LpsMap {
    fn factor(&self, t: f64) -> f64 {
        self.amp * (t - self.t0).abs().powf(-self.alpha)
    }
    fn profile(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-r2 / (2.0 * self.width * self.width)).exp()
    }
}

impl FieldMap for LpsMap {
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let s = self.factor(t) * self.profile(x);
        for (o, e) in out.iter_mut().zip(&self.dir) {
            *o = s * e;
        }
    }
    fn separable(&self) -> bool {
        true
    }
    fn time_factor(&self, t: f64) -> f64 {
        self.factor(t)
    }
    fn spatial_into(&self, x: &[f64], out: &mut [f64]) {
        let s = self.profile(x);
        for (o, e) in out.iter_mut().zip(&self.dir) {
            *o = s * e;
        }
    }
}

/// Parameters of the mixed-norm example b(t,x) = A|t−t0|^{−α} e^{−|x|²/(2s²)} e₁.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpsParams {
    pub amplitude: f64,
    pub alpha: f64,
    pub t0: f64,
    pub width: f64,
    /// Young split weight ε in (1+ε)|b₁|² + (1+1/ε)|b₂|².
    pub split: f64,
}

impl Default for LpsParams {
    fn default() -> Self {
        Self {
            amplitude: 0.2,
            alpha: 0.2,
            t0: 0.5,
            width: 0.5,
            split: 1.0,
        }
    }
}

/// Critical mixed-norm field in L^4_t L^{2d}_x (d/(2d) + 2/4 = 1).
///
/// Certificate via Young's inequality: |b| ≤ (d/q)(|b|^q/⟨|b|^q⟩)^{1/d} + (2/p)‖b(t)‖_q^{p/2}
/// gives δ = (1+ε) C_S (d/q)² and g(t) = (1+1/ε)(2/p)² ‖b(t)‖_q^p.
pub fn make_lps_drift(d: usize, params: LpsParams) -> Result<DriftField> {
    let LpsParams {
        amplitude,
        alpha,
        t0,
        width,
        split,
    } = params;
    let (q, p) = (2.0 * d as f64, 4.0);
    if !(amplitude > 0.0) || !(width > 0.0) || !(split > 0.0) {
        return Err(LabError::InvalidParameter("lps needs A, s, ε > 0".into()));
    }
    if !(0.0..1.0 / p).contains(&alpha) {
        return Err(LabError::InvalidParameter(format!(
            "lps time exponent must lie in [0, 1/p) = [0, 0.25), got {alpha}"
        )));
    }
    let df = d as f64;
    let mut dir = vec![0.0; d];
    dir[0] = 1.0;
    // ‖e^{-|x|²/(2s²)}‖_q = (2π s²/q)^{d/(2q)}
    let profile_q = (2.0 * PI * width * width / q).powf(df / (2.0 * q));
    let delta = (1.0 + split) * sobolev_constant(d) * (df / q).powi(2);
    let g = GFunction::Power {
        coef: (1.0 + 1.0 / split) * (2.0 / p).powi(2) * (amplitude * profile_q).powf(p),
        t0,
        exponent: alpha * p,
    };
    let map = LpsMap {
        amp: amplitude,
        alpha,
        t0,
        width,
        dir,
    };
    let locus = if alpha > 0.0 {
        SingularLocus::TimeSlice(t0)
    } else {
        SingularLocus::None
    };
    Ok(DriftField::new("lps", d, Arc::new(map), locus)?
        .with_certificate(FormBoundCertificate::new(delta, g, Provenance::YoungLps)))
}

#[derive(Debug)]
struct WeakLdMap {
    amp: f64,
    dir: Vec<f64>,
}

impl FieldMap for WeakLdMap {
    fn eval_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let s = self.amp / norm(x);
        for (o, e) in out.iter_mut().zip(&self.dir) {
            *o = s * e;
        }
    }
    fn separable(&self) -> bool {
        true
    }
    fn time_independent(&self) -> bool {
        true
    }
}

/// Weak-L^d field b(x) = A|x|⁻¹ e₁, whose weak norm is A·Ω_d^{1/d}.
pub fn make_weak_ld_drift(d: usize, amplitude: f64) -> Result<DriftField> {
    if !(amplitude > 0.0) {
        return Err(LabError::InvalidParameter("weak-ld amplitude must be > 0".into()));
    }
    let mut dir = vec![0.0; d];
    dir[0] = 1.0;
    let weak_norm = weak_ld_norm_of_inverse_radius(d, amplitude);
    let delta = super::estimate::strichartz_delta(weak_norm, d);
    Ok(DriftField::new(
        "weak-ld",
        d,
        Arc::new(WeakLdMap {
            amp: amplitude,
            dir,
        }),
        SingularLocus::origin(d),
    )?
    .with_certificate(FormBoundCertificate::new(
        delta,
        GFunction::Zero,
        Provenance::StrichartzWeakLd,
    )))
}

/// ‖A|x|⁻¹‖_{d,w} = sup_s s |{A/|x| > s}|^{1/d} = A Ω_d^{1/d}.
pub fn weak_ld_norm_of_inverse_radius(d: usize, amplitude: f64) -> f64 {
    amplitude * unit_ball_volume(d).powf(1.0 / d as f64)
}

#[derive(Debug)]
struct SumMap {
    a: Arc<dyn FieldMap>,
    b: Arc<dyn FieldMap>,
}

impl FieldMap for SumMap {
    fn time_independent(&self) -> bool {
        self.a.time_independent()
            && self.b.time_independent()
            && self.a.time_window() == self.b.time_window()
    }
    fn time_window(&self) -> (f64, f64) {
        self.a.time_window()
    }
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut tmp = [0.0f64; 16];
        let d = out.len();
        self.a.eval_into(t, x, out);
        if d <= 16 {
            self.b.eval_into(t, x, &mut tmp[..d]);
            for (o, v) in out.iter_mut().zip(&tmp[..d]) {
                *o += v;
            }
        } else {
            let mut v = vec![0.0; d];
            self.b.eval_into(t, x, &mut v);
            for (o, v) in out.iter_mut().zip(&v) {
                *o += v;
            }
        }
    }
}

/// Pointwise sum with the sum-rule certificate √δ = √δ₁ + √δ₂.
pub fn sum_fields(b1: &DriftField, b2: &DriftField) -> Result<DriftField> {
    if b1.dim() != b2.dim() {
        return Err(LabError::DimensionMismatch {
            left: b1.dim(),
            right: b2.dim(),
        });
    }
    let cert = match (b1.certificate(), b2.certificate()) {
        (Some(c1), Some(c2)) => Some(FormBoundCertificate::sum_rule(c1, c2)),
        _ => None,
    };
    let zero1 = b1.certificate().is_some_and(|c| c.is_trivial());
    let zero2 = b2.certificate().is_some_and(|c| c.is_trivial());
    if zero2 {
        return Ok(b1.clone());
    }
    if zero1 {
        return Ok(b2.clone());
    }
    let locus = SingularLocus::union(b1.singular_locus().clone(), b2.singular_locus().clone());
    let mut f = DriftField::new(
        format!("sum:{}+{}", b1.id(), b2.id()),
        b1.dim(),
        Arc::new(SumMap {
            a: b1.map().clone(),
            b: b2.map().clone(),
        }),
        locus,
    )?;
    if let Some(c) = cert {
        f = f.with_certificate(c);
    }
    if let (Some(m1), Some(m2)) = (b1.sup_bound(), b2.sup_bound()) {
        f = f.with_sup_bound(m1 + m2);
    }
    Ok(f)
}
