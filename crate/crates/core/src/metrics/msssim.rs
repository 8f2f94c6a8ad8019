//! Multi-scale structural similarity on intensity grids in `[0, 1]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeedRng;
use crate::tensor::ImageTensor;

/// Reference per-scale exponents, finest scale first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const C1: f64 = K1 * K1;
const C2: f64 = K2 * K2;

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0f64; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// A row-major plane.
#[derive(Clone)]
struct Plane {
    rows: usize,
    cols: usize,
    px: Vec<f64>,
}

impl Plane {
    fn from_f32(rows: usize, cols: usize, px: &[f32]) -> Self {
        Plane { rows, cols, px: px.iter().map(|&v| v as f64).collect() }
    }

    fn map2(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        let px = self.px.iter().zip(&other.px).map(|(&a, &b)| f(a, b)).collect();
        Plane { rows: self.rows, cols: self.cols, px }
    }

    /// Separable Gaussian filter, valid region only.
    fn filter(&self, w: &[f64; WINDOW]) -> Plane {
        let oc = self.cols - WINDOW + 1;
        let or = self.rows - WINDOW + 1;
        let mut horiz = vec![0f64; self.rows * oc];
        for r in 0..self.rows {
            let row = &self.px[r * self.cols..(r + 1) * self.cols];
            for c in 0..oc {
                horiz[r * oc + c] = w.iter().zip(&row[c..c + WINDOW]).map(|(a, b)| a * b).sum();
            }
        }
        let mut px = vec![0f64; or * oc];
        for r in 0..or {
            for c in 0..oc {
                px[r * oc + c] = (0..WINDOW).map(|k| w[k] * horiz[(r + k) * oc + c]).sum();
            }
        }
        Plane { rows: or, cols: oc, px }
    }

    /// 2x2 average pooling; a trailing odd row or column is dropped.
    fn downsample(&self) -> Plane {
        let (rows, cols) = (self.rows / 2, self.cols / 2);
        let mut px = vec![0f64; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let at = |dr: usize, dc: usize| self.px[(2 * r + dr) * self.cols + 2 * c + dc];
                px[r * cols + c] = 0.25 * (at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1));
            }
        }
        Plane { rows, cols, px }
    }
}

/// Mean SSIM and mean contrast-structure term at one scale.
fn ssim_terms(x: &Plane, y: &Plane, w: &[f64; WINDOW]) -> (f64, f64) {
    let mx = x.filter(w);
    let my = y.filter(w);
    let sxx = x.map2(x, |a, b| a * b).filter(w);
    let syy = y.map2(y, |a, b| a * b).filter(w);
    let sxy = x.map2(y, |a, b| a * b).filter(w);
    let n = mx.px.len();
    let (mut ssim, mut cs) = (0f64, 0f64);
    for i in 0..n {
        let (ux, uy) = (mx.px[i], my.px[i]);
        let vx = sxx.px[i] - ux * ux;
        let vy = syy.px[i] - uy * uy;
        let cxy = sxy.px[i] - ux * uy;
        let c = (2.0 * cxy + C2) / (vx + vy + C2);
        let l = (2.0 * ux * uy + C1) / (ux * ux + uy * uy + C1);
        cs += c;
        ssim += l * c;
    }
    (ssim / n as f64, cs / n as f64)
}

/// Number of dyadic scales a `rows x cols` plane supports, capped at `wanted`.
pub fn usable_scales(rows: usize, cols: usize, wanted: usize) -> usize {
    let (mut r, mut c, mut m) = (rows, cols, 0);
    while m < wanted && r >= WINDOW && c >= WINDOW {
        m += 1;
        r /= 2;
        c /= 2;
    }
    m
}

fn ms_ssim_plane(x: Plane, y: Plane, scales: usize, w: &[f64; WINDOW]) -> f64 {
    let weights = &MS_SSIM_WEIGHTS[..scales];
    let total: f64 = weights.iter().sum();
    let (mut x, mut y) = (x, y);
    let mut acc = 1f64;
    for (j, &wj) in weights.iter().enumerate() {
        let (ssim, cs) = ssim_terms(&x, &y, w);
        let term = if j + 1 == scales { ssim } else { cs };
        acc *= term.max(0.0).powf(wj / total);
        if j + 1 < scales {
            x = x.downsample();
            y = y.downsample();
        }
    }
    // Exact 1 for identical inputs regardless of rounding in powf.
    acc.min(1.0)
}

/// MS-SSIM of two same-shape tensors.
///
/// 3D tensors are compared slice by slice along the first axis and the
/// per-slice scores averaged. When a plane is too small for `scales` levels
/// the count is reduced and the remaining exponents renormalized to sum to 1.
/// Negative contrast terms are clamped to zero, so the result lies in `[0, 1]`.
pub fn ms_ssim(a: &ImageTensor, b: &ImageTensor, scales: usize) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dims(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    if scales == 0 || scales > MS_SSIM_WEIGHTS.len() {
        return Err(Error::invalid(format!("scales must be in 1..=5, got {scales}")));
    }
    let (rows, cols) = a.plane_dims();
    let m = usable_scales(rows, cols, scales);
    if m == 0 {
        return Err(Error::invalid(format!(
            "plane {rows}x{cols} is smaller than the {WINDOW}-pixel window"
        )));
    }
    if m < scales {
        log::warn!("ms-ssim: {rows}x{cols} plane supports {m} of {scales} scales");
    }
    let w = gaussian_window();
    let depth = a.depth();
    let mut sum = 0f64;
    for k in 0..depth {
        let x = Plane::from_f32(rows, cols, a.slice(k).expect("slice in range"));
        let y = Plane::from_f32(rows, cols, b.slice(k).expect("slice in range"));
        sum += ms_ssim_plane(x, y, m, &w);
    }
    Ok(sum / depth as f64)
}

/// Seeded partner for sample `i` of `n`: uniform over the other `n - 1`.
pub fn diversity_partner(seed: u64, i: usize, n: usize) -> usize {
    let j = SeedRng::derived(seed, &[i as u64]).below(n - 1);
    if j >= i {
        j + 1
    } else {
        j
    }
}

/// Mean MS-SSIM between each sample and a seeded random distinct partner.
/// Lower values mean a more diverse set.
pub fn diversity_msssim(images: &[ImageTensor], seed: u64, scales: usize) -> Result<f64> {
    let n = images.len();
    if n < 2 {
        return Err(Error::invalid("diversity needs at least 2 samples"));
    }
    let scores = (0..n)
        .into_par_iter()
        .map(|i| ms_ssim(&images[i], &images[diversity_partner(seed, i, n)], scales))
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{blob_image, flip};
    use proptest::prelude::*;

    fn blob(dims: &[usize], seed: u64) -> ImageTensor {
        blob_image(dims, seed).unwrap()
    }

    #[test]
    fn window_is_normalized_and_symmetric() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..WINDOW {
            assert_eq!(w[i], w[WINDOW - 1 - i]);
        }
    }

    #[test]
    fn scale_reduction() {
        assert_eq!(usable_scales(176, 176, 5), 5);
        assert_eq!(usable_scales(32, 32, 5), 2);
        assert_eq!(usable_scales(10, 40, 5), 0);
        assert_eq!(usable_scales(64, 64, 3), 3);
    }

    #[test]
    fn identical_is_one() {
        for dims in [vec![32, 32], vec![64, 48], vec![16, 24, 24]] {
            let a = blob(&dims, 3);
            assert!((ms_ssim(&a, &a, 5).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn inverted_is_low() {
        let a = blob(&[64, 64], 11);
        let inv = ImageTensor::new(vec![64, 64], a.values().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ms_ssim(&a, &inv, 5).unwrap() < 0.5);
    }

    #[test]
    fn errors() {
        let a = blob(&[32, 32], 1);
        let b = blob(&[32, 40], 1);
        assert!(ms_ssim(&a, &b, 5).is_err());
        assert!(ms_ssim(&a, &a, 0).is_err());
        assert!(ms_ssim(&a, &a, 6).is_err());
        let tiny = ImageTensor::zeros(vec![8, 8]).unwrap();
        assert!(ms_ssim(&tiny, &tiny, 1).is_err());
        assert!(diversity_msssim(&[a], 0, 5).is_err());
    }

    /// Single-scale SSIM computed directly from the window definition.
    fn ssim_oracle(x: &[f64], y: &[f64], n: usize) -> f64 {
        let s = 1.5f64;
        let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * s * s)).exp()).collect();
        let z: f64 = g.iter().sum::<f64>().powi(2);
        let m = n - 10;
        let mut total = 0.0;
        for r in 0..m {
            for c in 0..m {
                let (mut ux, mut uy, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wt = g[i] * g[j] / z;
                        let (a, b) = (x[(r + i) * n + c + j], y[(r + i) * n + c + j]);
                        ux += wt * a;
                        uy += wt * b;
                        xx += wt * a * a;
                        yy += wt * b * b;
                        xy += wt * a * b;
                    }
                }
                let l = (2.0 * ux * uy + 1e-4) / (ux * ux + uy * uy + 1e-4);
                let c2 = 9e-4;
                let cs = (2.0 * (xy - ux * uy) + c2) / (xx - ux * ux + yy - uy * uy + c2);
                total += l * cs;
            }
        }
        total / (m * m) as f64
    }

    #[test]
    fn single_scale_matches_direct_window() {
        let a = blob(&[20, 20], 5);
        let b = blob(&[20, 20], 6);
        let xa: Vec<f64> = a.values().iter().map(|&v| v as f64).collect();
        let xb: Vec<f64> = b.values().iter().map(|&v| v as f64).collect();
        let expect = ssim_oracle(&xa, &xb, 20).max(0.0);
        assert!((ms_ssim(&a, &b, 1).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn rotated_self_beats_independent() {
        for seed in 0..5 {
            let a = blob(&[32, 32], seed);
            let r = crate::corpus::rotate(&a, 5.0);
            let other = blob(&[32, 32], seed + 1000);
            assert!(ms_ssim(&a, &r, 5).unwrap() > ms_ssim(&a, &other, 5).unwrap());
        }
    }

    #[test]
    fn partner_never_self() {
        for i in 0..1000 {
            let n = 2 + i % 7;
            let k = i % n;
            let j = diversity_partner(i as u64, k, n);
            assert!(j != k && j < n);
        }
    }

    #[test]
    fn diversity_of_identical_set_is_one() {
        let a = blob(&[32, 32], 2);
        let set = vec![a.clone(), a.clone(), a];
        assert!((diversity_msssim(&set, 4, 5).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn diversity_matches_scripted_partners() {
        let set: Vec<_> = (0..6).map(|s| blob(&[32, 32], s)).collect();
        let seed = 17;
        let mut expect = 0.0;
        for i in 0..6 {
            let mut rng = SeedRng::derived(seed, &[i as u64]);
            let others: Vec<usize> = (0..6).filter(|&j| j != i).collect();
            let j = others[rng.below(5)];
            expect += ms_ssim(&set[i], &set[j], 5).unwrap();
        }
        let got = diversity_msssim(&set, seed, 5).unwrap();
        assert!((got - expect / 6.0).abs() < 1e-12);
        assert_eq!(got, diversity_msssim(&set, seed, 5).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
            let a = blob(&[40, 40], s1);
            let b = blob(&[40, 40], s2);
            let d = ms_ssim(&a, &b, 5).unwrap() - ms_ssim(&b, &a, 5).unwrap();
            prop_assert!(d.abs() < 1e-6);
        }

        #[test]
        fn invariant_to_shared_flip(s1 in 0u64..1000, s2 in 0u64..1000, axis in 0usize..2) {
            let a = blob(&[32, 32], s1);
            let b = blob(&[32, 32], s2);
            let base = ms_ssim(&a, &b, 5).unwrap();
            let fa = flip(&a, axis);
            let fb = flip(&b, axis);
            prop_assert!((ms_ssim(&fa, &fb, 5).unwrap() - base).abs() < 1e-6);
        }
    }
}
