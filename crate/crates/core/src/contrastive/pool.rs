use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Mean-pool an image over a regular partition into `grid` cells and flatten
/// row-major. Cell `k` along an axis of extent `n` split `g` ways covers
/// `[k*n/g, (k+1)*n/g)`.
pub fn pool_features(img: &ImageTensor, grid: &[usize]) -> Result<Vec<f32>> {
    let dims = img.dims();
    if grid.len() != dims.len() {
        return Err(Error::dims(format!(
            "grid {grid:?} does not match image rank {}",
            dims.len()
        )));
    }
    if grid.iter().zip(dims).any(|(&g, &d)| g == 0 || g > d) {
        return Err(Error::invalid(format!("grid {grid:?} larger than image {dims:?}")));
    }
    let bounds = |n: usize, g: usize, k: usize| (k * n / g, (k + 1) * n / g);
    let vals = img.values();
    let mut out = Vec::with_capacity(grid.iter().product());
    match dims.len() {
        2 => {
            let (rows, cols) = (dims[0], dims[1]);
            for gr in 0..grid[0] {
                let (r0, r1) = bounds(rows, grid[0], gr);
                for gc in 0..grid[1] {
                    let (c0, c1) = bounds(cols, grid[1], gc);
                    let mut s = 0f64;
                    for r in r0..r1 {
                        s += vals[r * cols + c0..r * cols + c1].iter().map(|&v| v as f64).sum::<f64>();
                    }
                    out.push((s / ((r1 - r0) * (c1 - c0)) as f64) as f32);
                }
            }
        }
        _ => {
            let (depth, rows, cols) = (dims[0], dims[1], dims[2]);
            for gz in 0..grid[0] {
                let (z0, z1) = bounds(depth, grid[0], gz);
                for gr in 0..grid[1] {
                    let (r0, r1) = bounds(rows, grid[1], gr);
                    for gc in 0..grid[2] {
                        let (c0, c1) = bounds(cols, grid[2], gc);
                        let mut s = 0f64;
                        for z in z0..z1 {
                            for r in r0..r1 {
                                let base = (z * rows + r) * cols;
                                s += vals[base + c0..base + c1].iter().map(|&v| v as f64).sum::<f64>();
                            }
                        }
                        let n = (z1 - z0) * (r1 - r0) * (c1 - c0);
                        out.push((s / n as f64) as f32);
                    }
                }
            }
        }
    }
    Ok(out)
}
