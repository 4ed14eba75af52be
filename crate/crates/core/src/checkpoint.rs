//! Binary checkpoint format.
//!
//! Layout (little-endian):
//!
//! ```text
//! "MDCK" | u32 version
//! u64 len | specs      u32 count, then per layer u32 in, u32 out, u8 activation
//! u64 len | weights    f64 per weight, layer by layer, row-major
//! u64 len | biases     f64 per bias, layer by layer
//! u64 len | velocities weight velocities for every layer, then bias velocities
//! u64 len | config     UTF-8 `key = value` lines, including `step`
//! u32 CRC-32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Activation, Layer, LayerSpec, Network, ParamGrads, SgdState};
use crate::numerics::Matrix;
use crate::trainer::{parse_kv_lines, TrainConfig};

pub const MAGIC: &[u8; 4] = b"MDCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub velocity: SgdState,
    pub config: TrainConfig,
    /// Optimizer steps taken so far.
    pub step: u64,
}

fn put_section(out: &mut Vec<u8>, payload: &[u8]) {
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let layers = self.network.layers();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());

        let mut specs = Vec::new();
        specs.extend_from_slice(&(layers.len() as u32).to_le_bytes());
        for l in layers {
            specs.extend_from_slice(&(l.spec.in_dim as u32).to_le_bytes());
            specs.extend_from_slice(&(l.spec.out_dim as u32).to_le_bytes());
            specs.push(match l.spec.activation {
                Activation::Relu => 0,
                Activation::Identity => 1,
            });
        }
        put_section(&mut out, &specs);

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in layers {
            put_f64s(&mut weights, l.weights.as_slice());
            put_f64s(&mut biases, &l.bias);
        }
        put_section(&mut out, &weights);
        put_section(&mut out, &biases);

        let mut vel = Vec::new();
        for w in &self.velocity.weights {
            put_f64s(&mut vel, w.as_slice());
        }
        for b in &self.velocity.biases {
            put_f64s(&mut vel, b);
        }
        put_section(&mut out, &vel);

        let mut cfg = self.config.to_kv_text();
        cfg.push_str(&format!("step = {}\n", self.step));
        put_section(&mut out, cfg.as_bytes());

        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |msg: &str| Error::CorruptCheckpoint(msg.to_string());
        if bytes.len() < 12 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        let version = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }

        let mut reader = Reader { buf: &body[8..] };
        let mut specs_r = Reader {
            buf: reader.section()?,
        };
        let count = specs_r.u32()? as usize;
        let mut specs = Vec::with_capacity(count);
        for _ in 0..count {
            let in_dim = specs_r.u32()? as usize;
            let out_dim = specs_r.u32()? as usize;
            let activation = match specs_r.u8()? {
                0 => Activation::Relu,
                1 => Activation::Identity,
                _ => return Err(corrupt("unknown activation code")),
            };
            specs.push(LayerSpec::new(in_dim, out_dim, activation));
        }
        specs_r.finish()?;

        let mut weights_r = Reader {
            buf: reader.section()?,
        };
        let mut biases_r = Reader {
            buf: reader.section()?,
        };
        let mut vel_r = Reader {
            buf: reader.section()?,
        };
        let config_bytes = reader.section()?;
        reader.finish()?;

        let mut layers = Vec::with_capacity(count);
        for spec in &specs {
            let w = weights_r.f64s(spec.in_dim * spec.out_dim)?;
            let b = biases_r.f64s(spec.out_dim)?;
            layers.push(Layer {
                spec: *spec,
                weights: Matrix::new(spec.in_dim, spec.out_dim, w)?,
                bias: b,
            });
        }
        weights_r.finish()?;
        biases_r.finish()?;
        let network = Network::from_layers(layers).map_err(|e| corrupt(&e.to_string()))?;

        let mut velocity = ParamGrads::zeros(&network);
        for (w, spec) in velocity.weights.iter_mut().zip(&specs) {
            *w = Matrix::new(
                spec.in_dim,
                spec.out_dim,
                vel_r.f64s(spec.in_dim * spec.out_dim)?,
            )?;
        }
        for (b, spec) in velocity.biases.iter_mut().zip(&specs) {
            *b = vel_r.f64s(spec.out_dim)?;
        }
        vel_r.finish()?;

        let text = std::str::from_utf8(config_bytes).map_err(|_| corrupt("config is not UTF-8"))?;
        let mut config = TrainConfig::default();
        let mut step = None;
        for (k, v) in parse_kv_lines(text)? {
            if k == "step" {
                step = Some(v.parse().map_err(|_| corrupt("bad step count"))?);
            } else {
                config.set(&k, &v)?;
            }
        }
        let step = step.ok_or_else(|| corrupt("missing step count"))?;
        Ok(Self {
            network,
            velocity,
            config,
            step,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match fs::read(path) {
            Ok(bytes) => Self::from_bytes(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::FileNotFound(path.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

pub fn save_checkpoint(
    net: &Network,
    velocity: &SgdState,
    config: &TrainConfig,
    step: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    Checkpoint {
        network: net.clone(),
        velocity: velocity.clone(),
        config: config.clone(),
        step,
    }
    .save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::CorruptCheckpoint("unexpected end of data".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn section(&mut self) -> Result<&'a [u8]> {
        let len = usize::try_from(self.u64()?)
            .map_err(|_| Error::CorruptCheckpoint("section too large".into()))?;
        self.take(len)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::CorruptCheckpoint("section too large".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::CorruptCheckpoint("trailing bytes in section".into()))
        }
    }
}
