//! Uniform cell-centred lattices, separable Gaussian convolution, multilinear interpolation.

use crate::special::normal_cdf;
use rayon::prelude::*;

/// Cube [lo, lo + cells·h]^d sampled at cell centres lo + (i + ½)h.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub dim: usize,
    pub cells: usize,
    pub lo: f64,
    pub h: f64,
}

impl Lattice {
    /// Centred cube of half-width `half_width` with `cells` cells per axis.
    pub fn centered(dim: usize, half_width: f64, cells: usize) -> Self {
        assert!(cells >= 2 && half_width > 0.0);
        Self {
            dim,
            cells,
            lo: -half_width,
            h: 2.0 * half_width / cells as f64,
        }
    }

    /// The same spacing padded by `pad` cells on every side.
    pub fn padded(&self, pad: usize) -> Self {
        Self {
            dim: self.dim,
            cells: self.cells + 2 * pad,
            lo: self.lo - pad as f64 * self.h,
            h: self.h,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    pub fn half_width(&self) -> f64 {
        -self.lo
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Coordinates of linear node index `lin` (axis 0 fastest).
    pub fn coords(&self, mut lin: usize, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.node(lin % self.cells);
            lin /= self.cells;
        }
    }

    /// Multilinear interpolation of a `ncomp`-vector field stored node-major.
    ///
    /// Returns false (and leaves `out` untouched) outside the hull of the nodes.
    pub fn interpolate(&self, data: &[f64], ncomp: usize, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim;
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        debug_assert!(d <= 8);
        for k in 0..d {
            let s = (x[k] - self.lo) / self.h - 0.5;
            if !(s >= 0.0) || s > (self.cells - 1) as f64 {
                return false;
            }
            let i = (s.floor() as usize).min(self.cells - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        out[..ncomp].fill(0.0);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut lin = 0usize;
            let mut stride = 1usize;
            for k in 0..d {
                let up = corner >> k & 1;
                w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                lin += (base[k] + up) * stride;
                stride *= self.cells;
            }
            if w == 0.0 {
                continue;
            }
            let v = &data[lin * ncomp..(lin + 1) * ncomp];
            for (o, vi) in out.iter_mut().zip(v) {
                *o += w * vi;
            }
        }
        true
    }
}

/// Cell-mass weights of N(0, σ²) on a grid of spacing h, truncated at 6σ.
///
/// w_j = Φ((j+½)h/σ) − Φ((j−½)h/σ) for |j| ≤ ⌈6σ/h⌉; index 0 of the result is j = −r.
pub fn gaussian_cell_weights(h: f64, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (6.0 * sigma / h).ceil() as i64;
    (-r..=r)
        .map(|j| {
            let a = (j as f64 - 0.5) * h / sigma;
            let b = (j as f64 + 0.5) * h / sigma;
            // use the tail on the side away from zero to keep precision
            if a >= 0.0 {
                normal_cdf(-a) - normal_cdf(-b)
            } else {
                normal_cdf(b) - normal_cdf(a)
            }
        })
        .collect()
}

/// Convolution along one axis of a node-major array with the given shape, zero outside.
pub fn convolve_axis(data: &[f64], shape: &[usize], ncomp: usize, axis: usize, w: &[f64]) -> Vec<f64> {
    if w.len() == 1 {
        return data.iter().map(|v| v * w[0]).collect();
    }
    let r = (w.len() / 2) as i64;
    let n = shape[axis] as i64;
    let stride: usize = shape[..axis].iter().product::<usize>() * ncomp;
    let block = stride * shape[axis];
    let mut out = vec![0.0; data.len()];
    // each outer block (product of axes above `axis`) is independent
    out.par_chunks_mut(block)
        .zip(data.par_chunks(block))
        .for_each(|(ob, ib)| {
            for i in 0..n {
                let o = &mut ob[i as usize * stride..(i as usize + 1) * stride];
                let lo = (i - r).max(0);
                let hi = (i + r).min(n - 1);
                for j in lo..=hi {
                    let wj = w[(j - i + r) as usize];
                    let src = &ib[j as usize * stride..(j as usize + 1) * stride];
                    for (a, b) in o.iter_mut().zip(src) {
                        *a += wj * b;
                    }
                }
            }
        });
    out
}

/// 8-point Gauss–Legendre rule on [a, b].
pub fn gauss_legendre8(a: f64, b: f64) -> [(f64, f64); 8] {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let (c, s) = (0.5 * (a + b), 0.5 * (b - a));
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (c - s * X[k], s * W[k]);
        out[2 * k + 1] = (c + s * X[k], s * W[k]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for (h, s) in [(0.1, 0.3), (0.1, 0.01), (0.05, 1.0)] {
            let w = gaussian_cell_weights(h, s);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            // symmetric
            for j in 0..w.len() {
                assert!((w[j] - w[w.len() - 1 - j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn interpolation_is_exact_for_affine_data() {
        let l = Lattice::centered(3, 1.0, 10);
        let mut data = vec![0.0; l.len() * 2];
        let mut x = [0.0; 3];
        for i in 0..l.len() {
            l.coords(i, &mut x);
            data[2 * i] = 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2];
            data[2 * i + 1] = x[2];
        }
        let mut out = [0.0; 2];
        assert!(l.interpolate(&data, 2, &[0.13, -0.41, 0.77], &mut out));
        assert!((out[0] - (1.0 + 0.26 + 0.41 + 0.385)).abs() < 1e-12);
        assert!((out[1] - 0.77).abs() < 1e-12);
        assert!(!l.interpolate(&data, 2, &[0.99, 0.0, 0.0], &mut out));
    }

    #[test]
    fn convolution_preserves_interior_constants() {
        let shape = [20usize, 20];
        let data = vec![2.0; 400];
        let w = gaussian_cell_weights(0.1, 0.15);
        let a = convolve_axis(&data, &shape, 1, 0, &w);
        let b = convolve_axis(&a, &shape, 1, 1, &w);
        assert!((b[10 * 20 + 10] - 2.0).abs() < 1e-8);
        assert!(b[0] < 2.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let s: f64 = gauss_legendre8(0.0, 2.0).iter().map(|(x, w)| w * x.powi(15)).sum();
        assert!((s - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }
}
