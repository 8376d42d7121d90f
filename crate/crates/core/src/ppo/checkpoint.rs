//! Binary checkpoint format.
//!
//! ```text
//! magic     8 bytes   "CORRPPO\0"
//! version   u32 LE
//! meta_len  u64 LE
//! meta      meta_len bytes of UTF-8 JSON (CheckpointMeta)
//! n         u32 LE    tensor count
//! n times:  rows u32 LE, cols u32 LE, rows*cols f64 LE (row-major)
//! ```
//!
//! Tensors appear in this order: actor layers (weights, then bias as a
//! 1 x n row), critic layers likewise, observation means, observation M2.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Dense, Mlp};
use super::policy::{PolicyParams, N_INT_CHOICES};
use super::PpoConfig;
use crate::env::{EnvConfig, NormStats, Welford, WelfordVec};
use crate::error::{Error, Result};
use crate::network::NetworkConfig;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CORRPPO\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub obs_len: usize,
    pub n_midblocks: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub ppo: PpoConfig,
    pub seed: u64,
    pub updates: u64,
    pub sim_steps: u64,
    pub obs_count: u64,
    pub ret_stats: Welford,
    pub env: Option<EnvConfig>,
    pub network: Option<NetworkConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: PolicyParams,
    pub norm: NormStats,
}

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn put_tensor(out: &mut Vec<u8>, rows: usize, cols: usize, data: &[f64]) {
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta).map_err(|e| ck(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        let layers: Vec<&Dense> = self.params.actor.layers.iter().chain(&self.params.critic.layers).collect();
        out.extend_from_slice(&((2 * layers.len() + 2) as u32).to_le_bytes());
        for l in layers {
            put_tensor(&mut out, l.w.nrows(), l.w.ncols(), l.w.as_slice().expect("standard layout"));
            put_tensor(&mut out, 1, l.b.len(), l.b.as_slice().expect("standard layout"));
        }
        let d = self.norm.obs.dim();
        put_tensor(&mut out, 1, d, &self.norm.obs.mean);
        put_tensor(&mut out, 1, d, &self.norm.obs.m2);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(ck("bad magic; not a checkpoint file"));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(ck(format!("unsupported checkpoint version {version}")));
        }
        let meta_len = read_u64(&mut r)? as usize;
        if meta_len > r.len() {
            return Err(ck("truncated metadata"));
        }
        let meta: CheckpointMeta = serde_json::from_slice(&r[..meta_len]).map_err(|e| ck(format!("metadata: {e}")))?;
        r = &r[meta_len..];
        let n = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            let len = rows.checked_mul(cols).ok_or_else(|| ck("tensor size overflow"))?;
            if len.checked_mul(8).is_none_or(|b| b > r.len()) {
                return Err(ck("truncated tensor data"));
            }
            let data: Vec<f64> = r[..len * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            r = &r[len * 8..];
            tensors.push((rows, cols, data));
        }
        if !r.is_empty() {
            return Err(ck("trailing bytes after tensors"));
        }

        let mut sizes = vec![meta.obs_len];
        sizes.extend_from_slice(&meta.hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(N_INT_CHOICES + meta.n_midblocks);
        sizes.push(1);
        let n_layers = actor_sizes.len() - 1 + sizes.len() - 1;
        if tensors.len() != 2 * n_layers + 2 {
            return Err(ck(format!("expected {} tensors, found {}", 2 * n_layers + 2, tensors.len())));
        }
        let mut it = tensors.into_iter();
        let mut build = |s: &[usize]| -> Result<Mlp> {
            let mut layers = Vec::new();
            for w in s.windows(2) {
                let (wr, wc, wd) = it.next().expect("count checked");
                let (br, bc, bd) = it.next().expect("count checked");
                if (wr, wc) != (w[0], w[1]) || (br, bc) != (1, w[1]) {
                    return Err(ck(format!("layer shape {wr}x{wc} does not match {}x{}", w[0], w[1])));
                }
                layers.push(Dense {
                    w: Array2::from_shape_vec((wr, wc), wd).expect("length checked"),
                    b: Array1::from(bd),
                });
            }
            Ok(Mlp {
                layers,
                activation: meta.activation,
            })
        };
        let actor = build(&actor_sizes)?;
        let critic = build(&sizes)?;
        let (mr, mc, mean) = it.next().expect("count checked");
        let (sr, sc, m2) = it.next().expect("count checked");
        if (mr, mc) != (1, meta.obs_len) || (sr, sc) != (1, meta.obs_len) {
            return Err(ck("normalization statistics have the wrong length"));
        }
        let params = PolicyParams { actor, critic };
        if !params.is_finite() {
            return Err(ck("non-finite weights"));
        }
        Ok(Checkpoint {
            norm: NormStats {
                obs: WelfordVec {
                    count: meta.obs_count,
                    mean,
                    m2,
                },
                ret: meta.ret_stats,
            },
            params,
            meta,
        })
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| ck("unexpected end of file"))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut f = std::fs::File::open(path).map_err(|e| ck(format!("{}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| ck(format!("{}: {e}", path.display())))?;
    Checkpoint::from_bytes(&bytes)
}
