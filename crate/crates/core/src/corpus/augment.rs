//! Seeded flips, small in-plane rotations and intensity jitter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedRng;
use crate::tensor::ImageTensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationSpec {
    /// Flip probability per axis, in `dims` order. A single entry applies to every axis.
    pub flip_prob: Vec<f64>,
    /// Rotation angle range in degrees; each orthogonal plane draws its own angle.
    pub rotation_deg: (f64, f64),
    /// Multiplicative contrast range.
    pub contrast: (f64, f64),
    /// Additive brightness range on the `[0, 1]` scale.
    pub brightness: (f64, f64),
    /// Root seed for corpus-level augmentation streams.
    pub seed: u64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            flip_prob: vec![0.5],
            rotation_deg: (-5.0, 5.0),
            contrast: (0.9, 1.1),
            brightness: (-0.05, 0.05),
            seed: 0,
        }
    }
}

impl AugmentationSpec {
    /// No flips, no rotation, unit contrast, zero brightness.
    pub fn identity() -> Self {
        AugmentationSpec {
            flip_prob: vec![0.0],
            rotation_deg: (0.0, 0.0),
            contrast: (1.0, 1.0),
            brightness: (0.0, 0.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.flip_prob.is_empty() || self.flip_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("flip probabilities must lie in [0, 1]"));
        }
        for (name, (lo, hi)) in [
            ("rotation", self.rotation_deg),
            ("contrast", self.contrast),
            ("brightness", self.brightness),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("{name} range ({lo}, {hi}) is not ordered")));
            }
        }
        if self.contrast.0 < 0.0 {
            return Err(Error::invalid("contrast must be non-negative"));
        }
        Ok(())
    }

    fn flip_prob_for(&self, axis: usize) -> f64 {
        if self.flip_prob.len() == 1 {
            self.flip_prob[0]
        } else {
            self.flip_prob.get(axis).copied().unwrap_or(0.0)
        }
    }
}

/// Shape as `[depth, rows, cols]`; 2D images have depth 1.
fn shape3(dims: &[usize]) -> [usize; 3] {
    if dims.len() == 3 {
        [dims[0], dims[1], dims[2]]
    } else {
        [1, dims[0], dims[1]]
    }
}

/// Reverse the image along `axis` (an index into `dims`).
pub fn flip(img: &ImageTensor, axis: usize) -> ImageTensor {
    let offset = 3 - img.ndim();
    let s = shape3(img.dims());
    let ax = axis + offset;
    let src = img.values();
    let mut out = vec![0f32; src.len()];
    for z in 0..s[0] {
        for r in 0..s[1] {
            for c in 0..s[2] {
                let mut idx = [z, r, c];
                idx[ax] = s[ax] - 1 - idx[ax];
                out[(z * s[1] + r) * s[2] + c] = src[(idx[0] * s[1] + idx[1]) * s[2] + idx[2]];
            }
        }
    }
    ImageTensor::new(img.dims().to_vec(), out).expect("flip preserves shape and range")
}

/// Rotate by `degrees` in the plane spanned by 3D axes `(u, v)` about the
/// volume centre. Bilinear interpolation; samples outside the frame read as 0.
fn rotate_plane(values: &[f32], s: [usize; 3], u: usize, v: usize, degrees: f64) -> Vec<f32> {
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cu = (s[u] as f64 - 1.0) / 2.0;
    let cv = (s[v] as f64 - 1.0) / 2.0;
    let at = |idx: [usize; 3]| values[(idx[0] * s[1] + idx[1]) * s[2] + idx[2]] as f64;
    let mut out = vec![0f32; values.len()];
    for z in 0..s[0] {
        for r in 0..s[1] {
            for c in 0..s[2] {
                let dst = [z, r, c];
                let du = dst[u] as f64 - cu;
                let dv = dst[v] as f64 - cv;
                // inverse map: rotate destination offset by -theta
                let su = cu + cos * du + sin * dv;
                let sv = cv - sin * du + cos * dv;
                let (u0, v0) = (su.floor(), sv.floor());
                let (fu, fv) = (su - u0, sv - v0);
                let mut acc = 0.0;
                for (du_i, wu) in [(0.0, 1.0 - fu), (1.0, fu)] {
                    for (dv_i, wv) in [(0.0, 1.0 - fv), (1.0, fv)] {
                        let (pu, pv) = (u0 + du_i, v0 + dv_i);
                        if wu * wv == 0.0
                            || pu < 0.0
                            || pv < 0.0
                            || pu >= s[u] as f64
                            || pv >= s[v] as f64
                        {
                            continue;
                        }
                        let mut idx = dst;
                        idx[u] = pu as usize;
                        idx[v] = pv as usize;
                        acc += wu * wv * at(idx);
                    }
                }
                out[(z * s[1] + r) * s[2] + c] = acc as f32;
            }
        }
    }
    out
}

/// In-plane rotation of a 2D image (or of every slice of a volume) by `degrees`.
pub fn rotate(img: &ImageTensor, degrees: f64) -> ImageTensor {
    let s = shape3(img.dims());
    let out = rotate_plane(img.values(), s, 1, 2, degrees);
    ImageTensor::new(img.dims().to_vec(), clamp01(out)).expect("rotation preserves shape")
}

fn clamp01(mut v: Vec<f32>) -> Vec<f32> {
    v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    v
}

/// Apply seeded flips, rotation and `clamp(contrast * x + brightness, 0, 1)`.
///
/// 3D volumes are rotated successively in the row-col, depth-col and
/// depth-row planes, each with its own angle.
pub fn augment(img: &ImageTensor, spec: &AugmentationSpec, seed: u64) -> Result<ImageTensor> {
    spec.validate()?;
    let mut rng = SeedRng::new(seed);
    let mut cur = img.clone();
    for axis in 0..img.ndim() {
        if rng.bernoulli(spec.flip_prob_for(axis)) {
            cur = flip(&cur, axis);
        }
    }
    let s = shape3(img.dims());
    let planes: &[(usize, usize)] = if img.ndim() == 3 {
        &[(1, 2), (0, 2), (0, 1)]
    } else {
        &[(1, 2)]
    };
    let mut values = cur.into_values();
    for &(u, v) in planes {
        let angle = rng.uniform_in(spec.rotation_deg.0, spec.rotation_deg.1);
        if angle != 0.0 {
            values = rotate_plane(&values, s, u, v, angle);
        }
    }
    let contrast = rng.uniform_in(spec.contrast.0, spec.contrast.1);
    let brightness = rng.uniform_in(spec.brightness.0, spec.brightness.1);
    for x in values.iter_mut() {
        *x = (contrast * *x as f64 + brightness).clamp(0.0, 1.0) as f32;
    }
    ImageTensor::new(img.dims().to_vec(), values)
}
