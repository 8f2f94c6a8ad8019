//! Pairwise Pearson correlation between vector sets and exact nearest-neighbour
//! extraction.
//!
//! Rows are standardized once (centered, scaled to unit norm) in `f64`; each
//! correlation is then a single dot product. Work is split into row tiles of
//! `block` rows and distributed over the rayon pool. Every entry is computed
//! independently, so results do not depend on block size or worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vectors::VectorSet;

/// Default tile edge for blocked kernels.
pub const DEFAULT_BLOCK: usize = 64;

/// Correlation used for zero-variance vectors.
pub const DEGENERATE_CORR: f32 = 0.0;

fn centered_norm(v: &[f32]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let ss: f64 = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum();
    let scale: f64 = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>();
    // relative test so near-constant rows with rounding noise count as constant
    let norm = if ss <= 1e-24 * scale.max(f64::MIN_POSITIVE) || ss == 0.0 {
        0.0
    } else {
        ss.sqrt()
    };
    (mean, norm)
}

/// Pearson correlation of two equal-length vectors.
///
/// Returns 0 (and logs a warning) when either vector has zero variance.
pub fn pearson(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::dims(format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("pearson needs at least 2 components"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite component"));
    }
    let (ma, na) = centered_norm(a);
    let (mb, nb) = centered_norm(b);
    if na == 0.0 || nb == 0.0 {
        log::warn!("pearson: zero-variance vector, correlation set to 0");
        return Ok(DEGENERATE_CORR);
    }
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - ma) * (y as f64 - mb))
        .sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0) as f32)
}

/// Rows centered and scaled to unit norm; degenerate rows are all zeros.
struct Standardized {
    dim: usize,
    rows: Vec<f64>,
}

impl Standardized {
    fn new(set: &VectorSet) -> Self {
        let dim = set.dim();
        let mut rows = Vec::with_capacity(set.len() * dim);
        let mut degenerate = 0;
        for r in set.rows() {
            let (mean, norm) = centered_norm(r);
            if norm == 0.0 {
                degenerate += 1;
                rows.extend(std::iter::repeat_n(0.0, dim));
            } else {
                rows.extend(r.iter().map(|&x| (x as f64 - mean) / norm));
            }
        }
        if degenerate > 0 {
            log::warn!(
                "{degenerate} zero-variance {} vector(s); their correlations are set to 0",
                set.role()
            );
        }
        Standardized { dim, rows }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn len(&self) -> usize {
        self.rows.len() / self.dim
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn to_corr(d: f64) -> f64 {
    d.clamp(-1.0, 1.0)
}

fn check_compatible(a: &VectorSet, b: &VectorSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dims(format!(
            "{} vectors have length {}, {} vectors have length {}",
            a.role(),
            a.dim(),
            b.role(),
            b.dim()
        )));
    }
    Ok(())
}

/// Dense `N_a x N_b` correlation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl CorrelationMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn transpose(&self) -> CorrelationMatrix {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                values[j * self.rows + i] = self.get(i, j);
            }
        }
        CorrelationMatrix {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }
}

/// All pairwise correlations between rows of `a` and rows of `b`.
pub fn pairwise_corr(a: &VectorSet, b: &VectorSet, block: usize) -> Result<CorrelationMatrix> {
    check_compatible(a, b)?;
    if block == 0 {
        return Err(Error::invalid("block size must be positive"));
    }
    let za = Standardized::new(a);
    let zb = Standardized::new(b);
    let cols = zb.len();
    let mut values = vec![0f32; za.len() * cols];
    values
        .par_chunks_mut(block * cols)
        .enumerate()
        .for_each(|(bi, out)| {
            let i0 = bi * block;
            let n_rows = out.len() / cols;
            for j0 in (0..cols).step_by(block) {
                let j1 = (j0 + block).min(cols);
                for di in 0..n_rows {
                    let ra = za.row(i0 + di);
                    let dst = &mut out[di * cols..(di + 1) * cols];
                    for j in j0..j1 {
                        dst[j] = to_corr(dot(ra, zb.row(j))) as f32;
                    }
                }
            }
        });
    Ok(CorrelationMatrix {
        rows: za.len(),
        cols,
        values,
    })
}

/// Best match in a candidate pool for every query vector.
#[derive(Clone, Debug, PartialEq)]
pub struct NearestNeighborTable {
    pub query_ids: Vec<String>,
    pub match_ids: Vec<String>,
    /// Row index of the match within the candidate set.
    pub match_index: Vec<usize>,
    pub rho: Vec<f32>,
}

impl NearestNeighborTable {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// For each row of `queries`, the row of `pool` with the highest correlation.
/// Ties go to the lowest pool index. The full matrix is never materialized.
pub fn nearest(queries: &VectorSet, pool: &VectorSet) -> Result<NearestNeighborTable> {
    nearest_blocked(queries, pool, DEFAULT_BLOCK)
}

pub fn nearest_blocked(
    queries: &VectorSet,
    pool: &VectorSet,
    block: usize,
) -> Result<NearestNeighborTable> {
    check_compatible(queries, pool)?;
    if pool.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    if block == 0 {
        return Err(Error::invalid("block size must be positive"));
    }
    let zq = Standardized::new(queries);
    let zp = if std::ptr::eq(queries, pool) {
        None
    } else {
        Some(Standardized::new(pool))
    };
    let zp = zp.as_ref().unwrap_or(&zq);
    let n_pool = zp.len();

    let best: Vec<(usize, f64)> = (0..zq.len())
        .collect::<Vec<_>>()
        .par_chunks(block)
        .flat_map_iter(|qs| {
            let mut best = vec![(0usize, f64::NEG_INFINITY); qs.len()];
            for j0 in (0..n_pool).step_by(block) {
                let j1 = (j0 + block).min(n_pool);
                for (slot, &q) in best.iter_mut().zip(qs) {
                    let rq = zq.row(q);
                    for j in j0..j1 {
                        let c = to_corr(dot(rq, zp.row(j)));
                        if c > slot.1 {
                            *slot = (j, c);
                        }
                    }
                }
            }
            best
        })
        .collect();

    Ok(NearestNeighborTable {
        query_ids: queries.ids().to_vec(),
        match_ids: best.iter().map(|&(j, _)| pool.ids()[j].clone()).collect(),
        match_index: best.iter().map(|&(j, _)| j).collect(),
        rho: best.iter().map(|&(_, c)| c as f32).collect(),
    })
}
