//! Graded tensor midpoint quadrature with dyadic refinement toward a point set.

/// Parameters of one refinement level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradedRule {
    /// Cells per axis of the base grid.
    pub base_cells: usize,
    /// A cell is split while its distance to the refinement set is below grading × half-diagonal.
    pub grading: f64,
    /// Depth cap near isolated points.
    pub point_depth: u32,
    /// Depth cap near hypersurfaces.
    pub surface_depth: u32,
}

impl GradedRule {
    pub const LEVELS: usize = 4;

    /// Level `k` of the default ladder, capped so the base grid stays below ~2^18 cells.
    pub fn level(k: usize, d: usize) -> Self {
        const BASE: [usize; 4] = [12, 16, 24, 32];
        const GRADING: [f64; 4] = [1.0, 2.0, 3.0, 4.5];
        let cap = (2f64.powi(18)).powf(1.0 / d as f64).floor() as usize;
        let k = k.min(BASE.len() - 1);
        Self {
            base_cells: BASE[k].min(cap.max(4)),
            grading: GRADING[k],
            point_depth: 14,
            surface_depth: 2,
        }
    }

    /// Split test for a cell at distances `point_dist` / `surface_dist` from the refinement sets.
    pub fn split(&self, point_dist: f64, surface_dist: f64, half_diag: f64, depth: u32) -> bool {
        let reach = self.grading * half_diag;
        (depth < self.point_depth && point_dist < reach)
            || (depth < self.surface_depth && surface_dist < reach)
    }
}

/// Visits the leaves of a graded cell tree on the box [lo, hi] with `base_cells` per axis.
///
/// `split(center, half_diag, depth)` decides refinement, `skip(center, half_diag)` prunes
/// cells that cannot contribute, and `visit(center, volume, side)` receives every leaf.
pub fn graded_midpoint(
    lo: &[f64],
    hi: &[f64],
    base_cells: usize,
    split: &dyn Fn(&[f64], f64, u32) -> bool,
    skip: &dyn Fn(&[f64], f64) -> bool,
    visit: &mut dyn FnMut(&[f64], f64, f64),
) {
    let d = lo.len();
    let n = base_cells.max(1);
    let sides: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / n as f64).collect();
    let total = n.pow(d as u32);
    let mut idx = vec![0usize; d];
    let mut center = vec![0.0; d];
    // stack of (center, sides, depth)
    let mut stack: Vec<(Vec<f64>, Vec<f64>, u32)> = Vec::new();
    for lin in 0..total {
        let mut r = lin;
        for k in 0..d {
            idx[k] = r % n;
            r /= n;
            center[k] = lo[k] + (idx[k] as f64 + 0.5) * sides[k];
        }
        stack.push((center.clone(), sides.clone(), 0));
        while let Some((c, s, depth)) = stack.pop() {
            let half_diag = 0.5 * s.iter().map(|v| v * v).sum::<f64>().sqrt();
            if skip(&c, half_diag) {
                continue;
            }
            if split(&c, half_diag, depth) {
                let hs: Vec<f64> = s.iter().map(|v| 0.5 * v).collect();
                for child in 0..(1usize << d) {
                    let cc: Vec<f64> = (0..d)
                        .map(|k| {
                            let sign = if child >> k & 1 == 1 { 0.5 } else { -0.5 };
                            c[k] + sign * hs[k]
                        })
                        .collect();
                    stack.push((cc, hs.clone(), depth + 1));
                }
                continue;
            }
            let vol: f64 = s.iter().product();
            visit(&c, vol, s[0]);
        }
    }
}

/// Midpoint nodes and weights on [a, b] with geometric grading toward interior points `singular`.
pub fn graded_time_nodes(a: f64, b: f64, n: usize, singular: &[f64]) -> Vec<(f64, f64)> {
    let mut breaks = vec![a, b];
    for &s in singular {
        if s > a && s < b {
            breaks.push(s);
        }
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out = Vec::new();
    let per = (n / (breaks.len() - 1)).max(2);
    for w in breaks.windows(2) {
        let (l, r) = (w[0], w[1]);
        let left_sing = singular.contains(&l);
        let right_sing = singular.contains(&r);
        if !left_sing && !right_sing {
            let h = (r - l) / per as f64;
            out.extend((0..per).map(|i| (l + (i as f64 + 0.5) * h, h)));
            continue;
        }
        // geometric cells shrinking toward the singular end(s)
        let split = |l: f64, r: f64, toward_left: bool, out: &mut Vec<(f64, f64)>| {
            let len = r - l;
            // edges 0 < len/2^{per-1} < ... < len/2 < len
            let mut e = vec![0.0];
            e.extend((1..=per).map(|k| len * 0.5f64.powi((per - k) as i32)));
            for k in 0..per {
                let (u0, u1) = (e[k], e[k + 1]);
                if u1 <= u0 {
                    continue;
                }
                let mid = 0.5 * (u0 + u1);
                let t = if toward_left { l + mid } else { r - mid };
                out.push((t, u1 - u0));
            }
        };
        if left_sing && right_sing {
            let m = 0.5 * (l + r);
            split(l, m, true, &mut out);
            split(m, r, false, &mut out);
        } else {
            split(l, r, left_sing, &mut out);
        }
    }
    out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_function() {
        let mut s = 0.0;
        graded_midpoint(
            &[0.0, 0.0, 0.0],
            &[1.0, 1.0, 1.0],
            40,
            &|_, _, _| false,
            &|_, _| false,
            &mut |x, w, _| s += w * x[0] * x[0] * x[1],
        );
        assert!((s - 1.0 / 6.0).abs() < 1e-4);
    }

    #[test]
    fn integrates_inverse_square_singularity() {
        // ∫_{|x|<1} |x|^{-2} dx = 4π in d = 3
        let mut best = 0.0;
        for k in 0..GradedRule::LEVELS {
            let rule = GradedRule::level(k, 3);
            let mut s = 0.0;
            graded_midpoint(
                &[-1.0; 3],
                &[1.0; 3],
                rule.base_cells,
                &|c, h, depth| rule.split(super::super::norm(c), f64::INFINITY, h, depth),
                &|c, h| super::super::norm(c) - h >= 1.0,
                &mut |x, w, _| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    if r2 < 1.0 {
                        s += w / r2;
                    }
                },
            );
            best = s;
        }
        let exact = 4.0 * std::f64::consts::PI;
        assert!((best / exact - 1.0).abs() < 0.02, "{best} vs {exact}");
    }

    #[test]
    fn time_nodes_cover_interval() {
        let nodes = graded_time_nodes(0.0, 2.0, 32, &[0.5]);
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        assert!((total - 2.0).abs() < 1e-12);
        assert!(nodes.iter().all(|n| n.0 != 0.5));
        // ∫_0^2 |t-0.5|^{-1/2} dt = 2(√0.5 + √1.5)
        let s: f64 = nodes.iter().map(|(t, w)| w * (t - 0.5f64).abs().powf(-0.5)).sum();
        let exact = 2.0 * (0.5f64.sqrt() + 1.5f64.sqrt());
        assert!((s / exact - 1.0).abs() < 0.05, "{s} vs {exact}");
    }
}
