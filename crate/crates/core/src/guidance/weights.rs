//! SGN parameters and the UNGW binary weight format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "UNGW"            4 bytes magic
//! version           u32 (= 1)
//! L, D, γ           u32 each
//! tensors           f32 arrays, row-major, in the order below
//! crc32             u32 over every preceding byte
//! ```
//!
//! Tensor order, with shapes (`W x` convention, matrices are `[out][in]`):
//!
//! ```text
//! penalty_bound C              [1]
//! node_in_w [D,2]   node_in_b [D]
//! edge_in_w [D,1]   edge_in_b [D]
//! for each layer 1..=L:
//!   w_a w_n w_s w_r w_f w_t w_o   [D,D] each
//!   pad                           [D]
//!   node_bn mean var scale shift  [D] each
//!   edge_bn mean var scale shift  [D] each
//! dec1_w [D,D] dec1_b [D]
//! dec2_w [D,D] dec2_b [D]
//! w_beta [D]
//! w_pi   [D]
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use thiserror::Error;

pub const UNGW_MAGIC: &[u8; 4] = b"UNGW";
pub const UNGW_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("not a UNGW file (bad magic)")]
    BadMagic,
    #[error("unsupported UNGW version {0}")]
    VersionMismatch(u32),
    #[error("weight file truncated")]
    TruncatedFile,
    #[error("weight file checksum mismatch")]
    ChecksumMismatch,
    #[error("{0} unexpected trailing bytes after checksum")]
    TrailingBytes(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub mean: Array1<f32>,
    pub var: Array1<f32>,
    pub scale: Array1<f32>,
    pub shift: Array1<f32>,
}

impl BatchNorm {
    pub const EPS: f32 = 1e-5;

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            var: Array1::from_elem(dim, 1.0 - Self::EPS),
            scale: Array1::ones(dim),
            shift: Array1::zeros(dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnLayer {
    pub w_a: Array2<f32>,
    pub w_n: Array2<f32>,
    pub w_s: Array2<f32>,
    pub w_r: Array2<f32>,
    pub w_f: Array2<f32>,
    pub w_t: Array2<f32>,
    pub w_o: Array2<f32>,
    pub pad: Array1<f32>,
    pub node_bn: BatchNorm,
    pub edge_bn: BatchNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnWeights {
    pub dim: usize,
    pub gamma: usize,
    pub penalty_bound: f32,
    pub node_in_w: Array2<f32>,
    pub node_in_b: Array1<f32>,
    pub edge_in_w: Array2<f32>,
    pub edge_in_b: Array1<f32>,
    pub layers: Vec<SgnLayer>,
    pub dec1_w: Array2<f32>,
    pub dec1_b: Array1<f32>,
    pub dec2_w: Array2<f32>,
    pub dec2_b: Array1<f32>,
    pub w_beta: Array1<f32>,
    pub w_pi: Array1<f32>,
}

impl SgnWeights {
    pub const DEFAULT_PENALTY_BOUND: f32 = 10.0;

    /// All-zero parameters with identity batch norms.
    pub fn zeros(layers: usize, dim: usize, gamma: usize) -> Self {
        let m = || Array2::zeros((dim, dim));
        let v = || Array1::zeros(dim);
        Self {
            dim,
            gamma,
            penalty_bound: Self::DEFAULT_PENALTY_BOUND,
            node_in_w: Array2::zeros((dim, 2)),
            node_in_b: v(),
            edge_in_w: Array2::zeros((dim, 1)),
            edge_in_b: v(),
            layers: (0..layers)
                .map(|_| SgnLayer {
                    w_a: m(),
                    w_n: m(),
                    w_s: m(),
                    w_r: m(),
                    w_f: m(),
                    w_t: m(),
                    w_o: m(),
                    pad: v(),
                    node_bn: BatchNorm::identity(dim),
                    edge_bn: BatchNorm::identity(dim),
                })
                .collect(),
            dec1_w: m(),
            dec1_b: v(),
            dec2_w: m(),
            dec2_b: v(),
            w_beta: v(),
            w_pi: v(),
        }
    }

    /// Uniform `±1/sqrt(fan_in)` initialisation with randomised batch-norm
    /// statistics; useful for exercising the forward pass.
    pub fn random<R: Rng + ?Sized>(layers: usize, dim: usize, gamma: usize, rng: &mut R) -> Self {
        let mut w = Self::zeros(layers, dim, gamma);
        let d = dim as f32;
        fill(w.node_in_w.as_slice_mut().unwrap(), 1.0 / 2f32.sqrt(), rng);
        fill(w.node_in_b.as_slice_mut().unwrap(), 0.5, rng);
        fill(w.edge_in_w.as_slice_mut().unwrap(), 1.0, rng);
        fill(w.edge_in_b.as_slice_mut().unwrap(), 0.5, rng);
        let bound = 1.0 / d.sqrt();
        for layer in &mut w.layers {
            for mat in [
                &mut layer.w_a,
                &mut layer.w_n,
                &mut layer.w_s,
                &mut layer.w_r,
                &mut layer.w_f,
                &mut layer.w_t,
                &mut layer.w_o,
            ] {
                fill(mat.as_slice_mut().unwrap(), bound, rng);
            }
            fill(layer.pad.as_slice_mut().unwrap(), 1.0, rng);
            for bn in [&mut layer.node_bn, &mut layer.edge_bn] {
                fill(bn.mean.as_slice_mut().unwrap(), 0.5, rng);
                bn.var.mapv_inplace(|_| rng.gen_range(0.5..2.0));
                bn.scale.mapv_inplace(|_| rng.gen_range(0.5..1.5));
                fill(bn.shift.as_slice_mut().unwrap(), 0.2, rng);
            }
        }
        for t in [&mut w.dec1_w, &mut w.dec2_w] {
            fill(t.as_slice_mut().unwrap(), bound, rng);
        }
        for t in [&mut w.dec1_b, &mut w.dec2_b, &mut w.w_beta, &mut w.w_pi] {
            fill(t.as_slice_mut().unwrap(), bound, rng);
        }
        w
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    fn tensors(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = vec![
            std::slice::from_ref(&self.penalty_bound),
            self.node_in_w.as_slice().expect("standard layout"),
            self.node_in_b.as_slice().expect("standard layout"),
            self.edge_in_w.as_slice().expect("standard layout"),
            self.edge_in_b.as_slice().expect("standard layout"),
        ];
        for l in &self.layers {
            for m in [&l.w_a, &l.w_n, &l.w_s, &l.w_r, &l.w_f, &l.w_t, &l.w_o] {
                out.push(m.as_slice().expect("standard layout"));
            }
            out.push(l.pad.as_slice().expect("standard layout"));
            for bn in [&l.node_bn, &l.edge_bn] {
                for v in [&bn.mean, &bn.var, &bn.scale, &bn.shift] {
                    out.push(v.as_slice().expect("standard layout"));
                }
            }
        }
        out.push(self.dec1_w.as_slice().expect("standard layout"));
        out.push(self.dec1_b.as_slice().expect("standard layout"));
        out.push(self.dec2_w.as_slice().expect("standard layout"));
        out.push(self.dec2_b.as_slice().expect("standard layout"));
        out.push(self.w_beta.as_slice().expect("standard layout"));
        out.push(self.w_pi.as_slice().expect("standard layout"));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = vec![
            std::slice::from_mut(&mut self.penalty_bound),
            self.node_in_w.as_slice_mut().expect("standard layout"),
            self.node_in_b.as_slice_mut().expect("standard layout"),
            self.edge_in_w.as_slice_mut().expect("standard layout"),
            self.edge_in_b.as_slice_mut().expect("standard layout"),
        ];
        for l in &mut self.layers {
            for m in [
                &mut l.w_a, &mut l.w_n, &mut l.w_s, &mut l.w_r, &mut l.w_f, &mut l.w_t, &mut l.w_o,
            ] {
                out.push(m.as_slice_mut().expect("standard layout"));
            }
            out.push(l.pad.as_slice_mut().expect("standard layout"));
            for bn in [&mut l.node_bn, &mut l.edge_bn] {
                for v in [&mut bn.mean, &mut bn.var, &mut bn.scale, &mut bn.shift] {
                    out.push(v.as_slice_mut().expect("standard layout"));
                }
            }
        }
        out.push(self.dec1_w.as_slice_mut().expect("standard layout"));
        out.push(self.dec1_b.as_slice_mut().expect("standard layout"));
        out.push(self.dec2_w.as_slice_mut().expect("standard layout"));
        out.push(self.dec2_b.as_slice_mut().expect("standard layout"));
        out.push(self.w_beta.as_slice_mut().expect("standard layout"));
        out.push(self.w_pi.as_slice_mut().expect("standard layout"));
        out
    }

    /// Check every tensor against `D` and that all values are finite.
    pub fn validate(&self) -> Result<(), WeightsError> {
        let d = self.dim;
        let bad = |what: &str| Err(WeightsError::DimensionMismatch(what.to_string()));
        if self.node_in_w.dim() != (d, 2) || self.node_in_b.len() != d {
            return bad("node input projection");
        }
        if self.edge_in_w.dim() != (d, 1) || self.edge_in_b.len() != d {
            return bad("edge input projection");
        }
        for (idx, l) in self.layers.iter().enumerate() {
            let mats = [&l.w_a, &l.w_n, &l.w_s, &l.w_r, &l.w_f, &l.w_t, &l.w_o];
            let vecs = [
                &l.pad,
                &l.node_bn.mean,
                &l.node_bn.var,
                &l.node_bn.scale,
                &l.node_bn.shift,
                &l.edge_bn.mean,
                &l.edge_bn.var,
                &l.edge_bn.scale,
                &l.edge_bn.shift,
            ];
            if mats.iter().any(|m| m.dim() != (d, d)) || vecs.iter().any(|v| v.len() != d) {
                return bad(&format!("layer {}", idx + 1));
            }
        }
        if self.dec1_w.dim() != (d, d)
            || self.dec2_w.dim() != (d, d)
            || self.dec1_b.len() != d
            || self.dec2_b.len() != d
        {
            return bad("decoder");
        }
        if self.w_beta.len() != d || self.w_pi.len() != d {
            return bad("output heads");
        }
        if self.tensors().iter().any(|t| t.iter().any(|x| !x.is_finite())) {
            return bad("non-finite parameter");
        }
        if self.penalty_bound < 0.0 {
            return bad("negative penalty bound");
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(UNGW_MAGIC);
        for v in [UNGW_VERSION, self.num_layers() as u32, self.dim as u32, self.gamma as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for t in self.tensors() {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightsError> {
        if bytes.len() < 4 {
            return Err(WeightsError::TruncatedFile);
        }
        if &bytes[..4] != UNGW_MAGIC {
            return Err(WeightsError::BadMagic);
        }
        let mut cursor = Cursor { bytes, pos: 4 };
        let version = cursor.u32()?;
        if version != UNGW_VERSION {
            return Err(WeightsError::VersionMismatch(version));
        }
        let layers = cursor.u32()? as usize;
        let dim = cursor.u32()? as usize;
        let gamma = cursor.u32()? as usize;
        // Reject absurd headers before allocating.
        let floats = 1 + 5 * dim + layers * (7 * dim * dim + 9 * dim) + 2 * dim * dim + 4 * dim;
        if bytes.len() < cursor.pos + floats * 4 + 4 {
            return Err(WeightsError::TruncatedFile);
        }
        let mut w = Self::zeros(layers, dim, gamma);
        for t in w.tensors_mut() {
            for x in t.iter_mut() {
                *x = cursor.f32()?;
            }
        }
        let body_end = cursor.pos;
        let crc = cursor.u32()?;
        if crc != crc32fast::hash(&bytes[..body_end]) {
            return Err(WeightsError::ChecksumMismatch);
        }
        if cursor.pos != bytes.len() {
            return Err(WeightsError::TrailingBytes(bytes.len() - cursor.pos));
        }
        w.validate()?;
        Ok(w)
    }
}

pub fn save_weights(w: &SgnWeights, path: &Path) -> Result<(), WeightsError> {
    std::fs::write(path, w.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<SgnWeights, WeightsError> {
    SgnWeights::from_bytes(&std::fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take4(&mut self) -> Result<[u8; 4], WeightsError> {
        let chunk = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or(WeightsError::TruncatedFile)?;
        self.pos += 4;
        Ok(chunk.try_into().expect("four bytes"))
    }

    fn u32(&mut self) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take4()?))
    }

    fn f32(&mut self) -> Result<f32, WeightsError> {
        Ok(f32::from_le_bytes(self.take4()?))
    }
}

fn fill<R: Rng + ?Sized>(xs: &mut [f32], bound: f32, rng: &mut R) {
    for x in xs {
        *x = rng.gen_range(-bound..=bound);
    }
}
