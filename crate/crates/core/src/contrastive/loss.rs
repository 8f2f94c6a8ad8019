//! Cosine similarity and the NT-Xent contrastive loss.

use crate::error::{Error, Result};

/// Cosine similarity `a.b / (|a| |b|)`.
pub fn cosine_sim(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::dims(format!("lengths {} and {}", a.len(), b.len())));
    }
    let (mut ab, mut aa, mut bb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero-norm vector"));
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0) as f32)
}

/// Index of the other view of the pair that `i` belongs to, for batches laid
/// out as `[y1, y1', y2, y2', ...]`.
#[inline]
pub fn partner(i: usize) -> usize {
    i ^ 1
}

fn check_batch(n: usize, tau_temp: f64) -> Result<()> {
    if n % 2 != 0 {
        return Err(Error::invalid(format!("batch of {n} embeddings is not paired")));
    }
    if n < 4 {
        return Err(Error::invalid("NT-Xent needs at least two pairs (K >= 2)"));
    }
    if !(tau_temp > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    Ok(())
}

fn unit_rows(emb: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let dim = emb[0].len();
    let mut units = Vec::with_capacity(emb.len());
    let mut norms = Vec::with_capacity(emb.len());
    for e in emb {
        if e.len() != dim {
            return Err(Error::dims("embeddings differ in length"));
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::numerical("zero-norm or non-finite embedding in batch"));
        }
        norms.push(n);
        units.push(e.iter().map(|x| x / n).collect());
    }
    Ok((units, norms))
}

fn similarities(units: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = units.len();
    let mut s = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let v: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    s
}

/// Per-anchor losses and softmax rows (diagonal entry zero).
fn anchor_terms(s: &[Vec<f64>], tau_temp: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = s.len();
    let mut losses = Vec::with_capacity(m);
    let mut probs = Vec::with_capacity(m);
    for i in 0..m {
        let max = (0..m)
            .filter(|&j| j != i)
            .map(|j| s[i][j] / tau_temp)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut row = vec![0.0; m];
        let mut z = 0.0;
        for j in (0..m).filter(|&j| j != i) {
            row[j] = (s[i][j] / tau_temp - max).exp();
            z += row[j];
        }
        row.iter_mut().for_each(|p| *p /= z);
        losses.push(-(s[i][partner(i)] / tau_temp - max) + z.ln());
        probs.push(row);
    }
    (losses, probs)
}

/// Mean NT-Xent loss over all `2K` anchors. Each anchor's positive is its
/// paired view and its denominator runs over the other `2K - 1` embeddings.
pub fn nt_xent(emb: &[Vec<f32>], tau_temp: f64) -> Result<f64> {
    let emb: Vec<Vec<f64>> = emb
        .iter()
        .map(|e| e.iter().map(|&x| x as f64).collect())
        .collect();
    nt_xent_f64(&emb, tau_temp)
}

pub fn nt_xent_f64(emb: &[Vec<f64>], tau_temp: f64) -> Result<f64> {
    check_batch(emb.len(), tau_temp)?;
    let (units, _) = unit_rows(emb)?;
    let (losses, _) = anchor_terms(&similarities(&units), tau_temp);
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Loss and its gradient with respect to every embedding.
pub fn nt_xent_grad(emb: &[Vec<f64>], tau_temp: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    check_batch(emb.len(), tau_temp)?;
    let m = emb.len();
    let (units, norms) = unit_rows(emb)?;
    let s = similarities(&units);
    let (losses, probs) = anchor_terms(&s, tau_temp);
    let loss = losses.iter().sum::<f64>() / m as f64;

    // d loss / d s_ij from anchor i: (p_ij - [j == partner(i)]) / (m * tau)
    let scale = 1.0 / (m as f64 * tau_temp);
    let mut coeff = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            let target = if j == partner(i) { 1.0 } else { 0.0 };
            let g = (probs[i][j] - target) * scale;
            coeff[i][j] += g;
            coeff[j][i] += g;
        }
    }
    let dim = emb[0].len();
    let grads = (0..m)
        .map(|i| {
            let mut gu = vec![0.0; dim];
            for j in (0..m).filter(|&j| j != i) {
                for (g, u) in gu.iter_mut().zip(&units[j]) {
                    *g += coeff[i][j] * u;
                }
            }
            let radial: f64 = gu.iter().zip(&units[i]).map(|(g, u)| g * u).sum();
            gu.iter()
                .zip(&units[i])
                .map(|(g, u)| (g - u * radial) / norms[i])
                .collect()
        })
        .collect();
    Ok((loss, grads))
}
