//! Feed-forward encoder, its `f64` training shadow, and the model file format.
//!
//! Model file layout:
//!
//! ```text
//! "MENC"  u32 version=1  u32 header_len  header JSON (UTF-8)
//! per layer: out*in f32-LE weights (row-major, out rows), out f32-LE biases
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util::{read_exact_array, read_u32};
use crate::rng::SeedRng;
use crate::vectors::{Role, VectorSet};

const MAGIC: &[u8; 4] = b"MENC";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn slope_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

/// Affine layers with a smooth nonlinearity between them and identity output.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderModel {
    pub layer_dims: Vec<usize>,
    /// Per layer, `out x in` row-major.
    pub weights: Vec<Vec<f32>>,
    pub biases: Vec<Vec<f32>>,
    pub activation: Activation,
    pub tau_temp: f64,
    pub seed: u64,
    /// Pooling grid that produced the input features; empty when unknown.
    pub pool_grid: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    layer_dims: Vec<usize>,
    tau_temp: f64,
    seed: u64,
    activation: Activation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pool_grid: Vec<usize>,
}

impl EncoderModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_dims: &[usize], tau_temp: f64, seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::invalid(format!("bad layer dims {layer_dims:?}")));
        }
        if !(tau_temp > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        let mut rng = SeedRng::derived(seed, &[0x1417]);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.uniform_in(-limit, limit) as f32)
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(EncoderModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation: Activation::Tanh,
            tau_temp,
            seed,
            pool_grid: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.layer_dims.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::format("layer count mismatch"));
        }
        for (l, w) in self.layer_dims.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] || self.biases[l].len() != w[1] {
                return Err(Error::format(format!("layer {l} parameter shape mismatch")));
            }
        }
        if self
            .weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::format("non-finite parameter"));
        }
        Ok(())
    }

    pub(crate) fn to_shadow(&self) -> Network {
        Network {
            dims: self.layer_dims.clone(),
            activation: self.activation,
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().map(|&v| v as f64).collect())
                .collect(),
            biases: self
                .biases
                .iter()
                .map(|b| b.iter().map(|&v| v as f64).collect())
                .collect(),
        }
    }

    pub(crate) fn from_shadow(net: &Network, tau_temp: f64, seed: u64) -> Self {
        EncoderModel {
            layer_dims: net.dims.clone(),
            weights: net
                .weights
                .iter()
                .map(|w| w.iter().map(|&v| v as f32).collect())
                .collect(),
            biases: net
                .biases
                .iter()
                .map(|b| b.iter().map(|&v| v as f32).collect())
                .collect(),
            activation: net.activation,
            tau_temp,
            seed,
            pool_grid: Vec::new(),
        }
    }
}

/// Map one feature vector to its embedding.
pub fn encoder_forward(model: &EncoderModel, x: &[f32]) -> Result<Vec<f32>> {
    if x.len() != model.input_dim() {
        return Err(Error::dims(format!(
            "encoder expects {} inputs, got {}",
            model.input_dim(),
            x.len()
        )));
    }
    let mut h: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let last = model.weights.len() - 1;
    for (l, (w, b)) in model.weights.iter().zip(&model.biases).enumerate() {
        let n_in = model.layer_dims[l];
        let next: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(o, &bias)| {
                let z = bias as f64
                    + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(&h)
                        .map(|(&wv, &hv)| wv as f64 * hv)
                        .sum::<f64>();
                if l == last {
                    z
                } else {
                    model.activation.apply(z)
                }
            })
            .collect();
        h = next;
    }
    Ok(h.into_iter().map(|v| v as f32).collect())
}

/// Embed every row of a feature set, keeping ids and role.
pub fn embed_set(model: &EncoderModel, features: &VectorSet) -> Result<VectorSet> {
    use rayon::prelude::*;
    let rows = (0..features.len())
        .into_par_iter()
        .map(|i| encoder_forward(model, features.row(i)))
        .collect::<Result<Vec<_>>>()?;
    VectorSet::from_rows(features.role(), features.ids().to_vec(), &rows)
}

/// Embed with an explicit role tag.
pub fn embed_as(model: &EncoderModel, features: &VectorSet, role: Role) -> Result<VectorSet> {
    Ok(embed_set(model, features)?.with_role(role))
}

/// `f64` copy of the encoder used for optimization and gradient checks.
#[derive(Clone, Debug)]
pub(crate) struct Network {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Layer outputs retained for backpropagation; `acts[0]` is the input.
pub(crate) struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

impl Network {
    pub fn forward(&self, x: &[f64]) -> Trace {
        let mut acts = vec![x.to_vec()];
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let h = &acts[l];
            let w = &self.weights[l];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = self.biases[l][o]
                        + w[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(h)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    if l == last {
                        z
                    } else {
                        self.activation.apply(z)
                    }
                })
                .collect();
            acts.push(out);
        }
        Trace { acts }
    }

    /// Accumulate parameter gradients for one sample given `d loss / d output`.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grads: &mut Gradients) {
        let mut delta = d_out.to_vec();
        for l in (0..self.weights.len()).rev() {
            let n_in = self.dims[l];
            let h_in = &trace.acts[l];
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                let row = &mut grads.weights[l][o * n_in..(o + 1) * n_in];
                for (g, &h) in row.iter_mut().zip(h_in) {
                    *g += d * h;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                for (p, &wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wv;
                }
            }
            for (p, &h) in prev.iter_mut().zip(h_in) {
                *p *= self.activation.slope_from_output(h);
            }
            delta = prev;
        }
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    /// Flattened in the same order as [`Network::params_mut`].
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
            .copied()
            .collect()
    }
}

pub fn write_model(model: &EncoderModel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn encode_model(model: &EncoderModel, w: &mut impl Write) -> Result<()> {
    model.validate()?;
    let header = serde_json::to_vec(&Header {
        layer_dims: model.layer_dims.clone(),
        tau_temp: model.tau_temp,
        seed: model.seed,
        activation: model.activation,
        pool_grid: model.pool_grid.clone(),
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for (wl, bl) in model.weights.iter().zip(&model.biases) {
        for v in wl.iter().chain(bl) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<EncoderModel> {
    decode_model(&mut BufReader::new(File::open(path)?))
}

pub fn decode_model(r: &mut impl Read) -> Result<EncoderModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("truncated header"))?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format("truncated header"))?;
    let header: Header = serde_json::from_slice(&buf)?;
    if header.layer_dims.len() < 2 {
        return Err(Error::format("model needs at least one layer"));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in header.layer_dims.windows(2) {
        weights.push(read_exact_array(r, w[0] * w[1]).map_err(|_| Error::format("truncated weights"))?);
        biases.push(read_exact_array(r, w[1]).map_err(|_| Error::format("truncated weights"))?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("trailing bytes after weights"));
    }
    let model = EncoderModel {
        layer_dims: header.layer_dims,
        weights,
        biases,
        activation: header.activation,
        tau_temp: header.tau_temp,
        seed: header.seed,
        pool_grid: header.pool_grid,
    };
    model.validate()?;
    Ok(model)
}
