//! Drift fields, form-bound certificates, and the numerical form-bound estimator.

pub mod catalog;
pub mod certificate;
pub mod estimate;
pub mod quadrature;
pub mod testfn;

use crate::error::{LabError, Result};
use std::fmt;
use std::sync::Arc;

pub use catalog::{
    make_constant_drift, make_hardy_drift, make_hardy_time_drift, make_lps_drift,
    make_shell_log_drift, make_weak_ld_drift, make_zero_drift, sum_fields, Modulation,
};
pub use certificate::{FormBoundCertificate, GFunction, Provenance};
pub use estimate::{
    estimate_form_bound, estimate_form_bound_detailed, morrey_seminorm, rayleigh_quotient,
    strichartz_delta, strichartz_delta_with_volume, FormBoundEstimate,
};
pub use testfn::{OriginConcentratingFamily, RandomBumpFamily, TestFamily, TestFunction};

/// Evaluation map of a vector field on [0, ∞) × R^d.
///
/// Implementations are pure; they may be called concurrently.
pub trait FieldMap: Send + Sync + fmt::Debug {
    /// Writes b(t, x) into `out`. Behaviour on the singular locus is unspecified.
    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// True when b(t, x) = time_factor(t) · spatial(x).
    fn separable(&self) -> bool {
        false
    }

    fn time_factor(&self, _t: f64) -> f64 {
        1.0
    }

    /// Spatial profile of a separable field.
    fn spatial_into(&self, x: &[f64], out: &mut [f64]) {
        self.eval_into(0.0, x, out)
    }

    /// True when b(t, x) = 1_window(t) · s(x) with `window` from [`FieldMap::time_window`].
    fn time_independent(&self) -> bool {
        false
    }

    fn time_window(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Where a field is undefined (or, for mollified fields, where it is steepest).
#[derive(Clone, Debug, PartialEq)]
pub enum SingularLocus {
    None,
    Points(Vec<Vec<f64>>),
    Sphere { center: Vec<f64>, radius: f64 },
    /// Singular in time at t0 for every x.
    TimeSlice(f64),
    Union(Vec<SingularLocus>),
}

impl SingularLocus {
    pub fn origin(d: usize) -> Self {
        SingularLocus::Points(vec![vec![0.0; d]])
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SingularLocus::None => true,
            SingularLocus::Points(p) => p.is_empty(),
            SingularLocus::Union(v) => v.iter().all(|l| l.is_empty()),
            _ => false,
        }
    }

    /// Euclidean distance from x to the spatial part of the locus (∞ if none).
    pub fn spatial_distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularLocus::None | SingularLocus::TimeSlice(_) => f64::INFINITY,
            SingularLocus::Points(pts) => pts
                .iter()
                .map(|p| dist(p, x))
                .fold(f64::INFINITY, f64::min),
            SingularLocus::Sphere { center, radius } => (dist(center, x) - radius).abs(),
            SingularLocus::Union(v) => v
                .iter()
                .map(|l| l.spatial_distance(x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Distance from t to the temporal part of the locus (∞ if none).
    pub fn time_distance(&self, t: f64) -> f64 {
        match self {
            SingularLocus::TimeSlice(t0) => (t - t0).abs(),
            SingularLocus::Union(v) => v
                .iter()
                .map(|l| l.time_distance(t))
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }

    /// Distance to the point components only.
    pub fn point_distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularLocus::Points(_) => self.spatial_distance(x),
            SingularLocus::Union(v) => v
                .iter()
                .map(|l| l.point_distance(x))
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }

    /// Distance to the hypersurface components only.
    pub fn surface_distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularLocus::Sphere { .. } => self.spatial_distance(x),
            SingularLocus::Union(v) => v
                .iter()
                .map(|l| l.surface_distance(x))
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }

    pub fn singular_times(&self) -> Vec<f64> {
        match self {
            SingularLocus::TimeSlice(t0) => vec![*t0],
            SingularLocus::Union(v) => v.iter().flat_map(|l| l.singular_times()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        self.spatial_distance(x) == 0.0 || self.time_distance(t) == 0.0
    }

    /// Deterministic half-cell jitter: moves an exact singular sample off the locus.
    ///
    /// Returns true when the sample was moved.
    pub fn jitter(&self, t: &mut f64, x: &mut [f64], cell_x: f64, cell_t: f64) -> bool {
        let mut moved = false;
        if self.spatial_distance(x) == 0.0 {
            x[0] += 0.5 * cell_x;
            moved = true;
        }
        if self.time_distance(*t) == 0.0 {
            *t += 0.5 * cell_t;
            moved = true;
        }
        moved
    }

    pub fn union(a: SingularLocus, b: SingularLocus) -> SingularLocus {
        match (a.is_empty(), b.is_empty()) {
            (true, _) => b,
            (_, true) => a,
            _ => SingularLocus::Union(vec![a, b]),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// An evaluatable vector field with its metadata.
#[derive(Clone)]
pub struct DriftField {
    id: String,
    dim: usize,
    map: Arc<dyn FieldMap>,
    locus: SingularLocus,
    steep: SingularLocus,
    certificate: Option<FormBoundCertificate>,
    sup_bound: Option<f64>,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("locus", &self.locus)
            .field("certificate", &self.certificate)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl DriftField {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        map: Arc<dyn FieldMap>,
        locus: SingularLocus,
    ) -> Result<Self> {
        if dim < 3 {
            return Err(LabError::InvalidParameter(format!(
                "dimension must be >= 3, got {dim}"
            )));
        }
        Ok(Self {
            id: id.into(),
            dim,
            map,
            steep: locus.clone(),
            locus,
            certificate: None,
            sup_bound: None,
        })
    }

    pub fn with_certificate(mut self, cert: FormBoundCertificate) -> Self {
        self.certificate = Some(cert);
        self
    }

    pub fn without_certificate(mut self) -> Self {
        self.certificate = None;
        self
    }

    /// Declares |b| ≤ bound everywhere; marks the field bounded and smooth enough for the solvers.
    pub fn with_sup_bound(mut self, bound: f64) -> Self {
        self.sup_bound = Some(bound);
        self
    }

    pub fn with_steep_region(mut self, steep: SingularLocus) -> Self {
        self.steep = steep;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn map(&self) -> &Arc<dyn FieldMap> {
        &self.map
    }

    pub fn singular_locus(&self) -> &SingularLocus {
        &self.locus
    }

    /// Region where the field (or the field it was built from) is steep; drives substepping.
    pub fn steep_region(&self) -> &SingularLocus {
        &self.steep
    }

    pub fn certificate(&self) -> Option<&FormBoundCertificate> {
        self.certificate.as_ref()
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_bound.is_some()
    }

    pub fn is_separable(&self) -> bool {
        self.map.separable()
    }

    /// Checked evaluation.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(LabError::DimensionMismatch {
                left: self.dim,
                right: x.len(),
            });
        }
        if self.locus.contains(t, x) {
            return Err(LabError::SingularSample {
                t,
                x: x.to_vec(),
            });
        }
        let mut out = vec![0.0; self.dim];
        self.map.eval_into(t, x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation for hot loops; callers jitter singular samples themselves.
    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.map.eval_into(t, x, out)
    }

    /// |b(t,x)|², with half-cell jitter applied to exact singular samples.
    pub fn norm_sq_jittered(&self, t: f64, x: &[f64], cell_x: f64, cell_t: f64, scratch: &mut [f64]) -> f64 {
        let (mut tt, mut xx) = (t, [0.0f64; 8]);
        let xs = &mut xx[..self.dim.min(8)];
        if self.dim <= 8 {
            xs.copy_from_slice(x);
            self.locus.jitter(&mut tt, xs, cell_x, cell_t);
            self.map.eval_into(tt, xs, scratch);
        } else {
            let mut xv = x.to_vec();
            self.locus.jitter(&mut tt, &mut xv, cell_x, cell_t);
            self.map.eval_into(tt, &xv, scratch);
        }
        scratch.iter().map(|v| v * v).sum()
    }
}

/// Evaluates the field checked against its singular locus.
pub fn eval_drift(field: &DriftField, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    field.eval(t, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locus_distances() {
        let l = SingularLocus::Sphere {
            center: vec![0.0; 3],
            radius: 1.0,
        };
        assert!((l.spatial_distance(&[2.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!(l.contains(0.3, &[0.0, 1.0, 0.0]));
        let u = SingularLocus::union(SingularLocus::origin(3), SingularLocus::TimeSlice(0.5));
        assert!(u.contains(0.5, &[3.0, 3.0, 3.0]));
        assert!(u.contains(0.1, &[0.0, 0.0, 0.0]));
        assert!(!u.contains(0.1, &[0.0, 0.0, 1e-100]));
    }

    #[test]
    fn jitter_moves_off_locus() {
        let l = SingularLocus::origin(3);
        let mut t = 0.0;
        let mut x = [0.0, 0.0, 0.0];
        assert!(l.jitter(&mut t, &mut x, 0.1, 0.1));
        assert_eq!(x, [0.05, 0.0, 0.0]);
        assert!(!l.contains(t, &x));
    }
}
