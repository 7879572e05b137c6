//! Transformer hyperparameters, parameter tensors, weight-file IO and the
//! toy weight generator.
//!
//! Weight file layout (version 1): magic `PLSW`, `u16` version, then the
//! integer hyperparameters as little-endian `u32` in the order `layers,
//! d_model, heads, vocab, max_seq`, then the tensors row-major as 32-bit
//! little-endian floats in this order: embedding `[vocab, d]`; per layer
//! `ln1_gamma [d]`, `ln1_beta [d]`, `w_q [d,d]`, `w_k [d,d]`, `w_v [d,d]`,
//! `w_o [d,d]`, `ln2_gamma [d]`, `ln2_beta [d]`, `w1 [d,4d]`, `b1 [4d]`,
//! `w2 [4d,d]`, `b2 [d]`; output head `[d, vocab]`. Temperature and GELU
//! mode are runtime settings, not file contents.

use crate::error::{Error, Result};
use crate::ring::{encode_slice, FixedPointConfig, RingValue};
use crate::sharing::{share_tensor, SharedTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

pub const WEIGHT_MAGIC: &[u8; 4] = b"PLSW";
pub const WEIGHT_VERSION: u16 = 1;

/// Which activation the feed-forward block uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeluMode {
    /// The piecewise linear surrogate; the only MPC-computable mode.
    #[default]
    PaperPiecewise,
    /// Exact `x * Phi(x)`, available in the plaintext engines for measuring
    /// the surrogate's end-to-end effect.
    ExactReference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub vocab: usize,
    pub max_seq: usize,
    /// SoftMax temperature.
    pub temperature: f64,
    pub gelu_mode: GeluMode,
}

impl ModelConfig {
    pub fn new(layers: usize, d_model: usize, heads: usize, vocab: usize, max_seq: usize) -> Result<Self> {
        let cfg = ModelConfig {
            layers,
            d_model,
            heads,
            vocab,
            max_seq,
            temperature: 1.0,
            gelu_mode: GeluMode::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Validation(format!(
                "hidden size {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.vocab == 0 || self.max_seq == 0 {
            return Err(Error::Validation("vocab and max_seq must be >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Validation(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Feed-forward inner width, fixed at the conventional `4 d`.
    pub fn d_ff(&self) -> usize {
        4 * self.d_model
    }
}

/// One layer's parameters, plaintext.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_gamma: Vec<f64>,
    pub ln1_beta: Vec<f64>,
    pub w_q: Vec<f64>,
    pub w_k: Vec<f64>,
    pub w_v: Vec<f64>,
    pub w_o: Vec<f64>,
    pub ln2_gamma: Vec<f64>,
    pub ln2_beta: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Full parameter set, plaintext, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub cfg: ModelConfig,
    pub embedding: Vec<f64>,
    pub layers: Vec<LayerWeights>,
    pub head: Vec<f64>,
}

impl ModelWeights {
    /// Small random model with layer-norm gains at 1, suitable for protocol
    /// and scaling experiments. Magnitudes are chosen so activations stay
    /// inside the approximation domains.
    pub fn toy(cfg: ModelConfig, seed: u64) -> Result<ModelWeights> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.d_model;
        let mut mat = |rows: usize, cols: usize, amp: f64| -> Vec<f64> {
            (0..rows * cols).map(|_| rng.gen_range(-amp..amp)).collect()
        };
        let embedding = mat(cfg.vocab, d, 1.0);
        let proj_amp = 1.0 / (d as f64).sqrt();
        let ff_amp = 1.0 / (cfg.d_ff() as f64).sqrt();
        let layers = (0..cfg.layers)
            .map(|_| LayerWeights {
                ln1_gamma: vec![1.0; d],
                ln1_beta: vec![0.0; d],
                w_q: mat(d, d, proj_amp),
                w_k: mat(d, d, proj_amp),
                w_v: mat(d, d, proj_amp),
                w_o: mat(d, d, proj_amp),
                ln2_gamma: vec![1.0; d],
                ln2_beta: vec![0.0; d],
                w1: mat(d, cfg.d_ff(), proj_amp),
                b1: mat(cfg.d_ff(), 1, 0.1),
                w2: mat(cfg.d_ff(), d, ff_amp),
                b2: mat(d, 1, 0.1),
            })
            .collect();
        let head = mat(d, cfg.vocab, proj_amp);
        Ok(ModelWeights {
            cfg,
            embedding,
            layers,
            head,
        })
    }

    /// Embedding rows for a token sequence, row-major `[tokens.len(), d]`.
    pub fn embed(&self, tokens: &[usize]) -> Result<Vec<f64>> {
        let d = self.cfg.d_model;
        let mut out = Vec::with_capacity(tokens.len() * d);
        for &t in tokens {
            if t >= self.cfg.vocab {
                return Err(Error::Validation(format!(
                    "token id {t} outside vocabulary of {}",
                    self.cfg.vocab
                )));
            }
            out.extend_from_slice(&self.embedding[t * d..(t + 1) * d]);
        }
        Ok(out)
    }

    fn tensor_list(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.embedding];
        for l in &self.layers {
            out.extend([
                &l.ln1_gamma[..],
                &l.ln1_beta,
                &l.w_q,
                &l.w_k,
                &l.w_v,
                &l.w_o,
                &l.ln2_gamma,
                &l.ln2_beta,
                &l.w1,
                &l.b1,
                &l.w2,
                &l.b2,
            ]);
        }
        out.push(&self.head);
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(WEIGHT_MAGIC);
        buf.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        for v in [
            self.cfg.layers,
            self.cfg.d_model,
            self.cfg.heads,
            self.cfg.vocab,
            self.cfg.max_seq,
        ] {
            buf.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for t in self.tensor_list() {
            for &v in t {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::Format(e.to_string()))?;
        file.write_all(&buf).map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelWeights> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelWeights> {
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
            if *at + n > bytes.len() {
                return Err(Error::Format("weight file truncated".into()));
            }
            let s = &bytes[*at..*at + n];
            *at += n;
            Ok(s)
        };
        if take(&mut at, 4)? != WEIGHT_MAGIC {
            return Err(Error::Format("bad magic, expected PLSW".into()));
        }
        let version = u16::from_le_bytes(take(&mut at, 2)?.try_into().unwrap());
        if version != WEIGHT_VERSION {
            return Err(Error::Format(format!("unsupported weight version {version}")));
        }
        let int = |at: &mut usize| -> Result<usize> {
            Ok(u32::from_le_bytes(take(at, 4)?.try_into().unwrap()) as usize)
        };
        let layers = int(&mut at)?;
        let d = int(&mut at)?;
        let heads = int(&mut at)?;
        let vocab = int(&mut at)?;
        let max_seq = int(&mut at)?;
        let cfg = ModelConfig::new(layers, d, heads, vocab, max_seq)?;
        let floats = |at: &mut usize, n: usize| -> Result<Vec<f64>> {
            let raw = take(at, 4 * n)?;
            Ok(raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect())
        };
        let embedding = floats(&mut at, vocab * d)?;
        let mut layer_weights = Vec::with_capacity(layers);
        for _ in 0..layers {
            layer_weights.push(LayerWeights {
                ln1_gamma: floats(&mut at, d)?,
                ln1_beta: floats(&mut at, d)?,
                w_q: floats(&mut at, d * d)?,
                w_k: floats(&mut at, d * d)?,
                w_v: floats(&mut at, d * d)?,
                w_o: floats(&mut at, d * d)?,
                ln2_gamma: floats(&mut at, d)?,
                ln2_beta: floats(&mut at, d)?,
                w1: floats(&mut at, d * cfg.d_ff())?,
                b1: floats(&mut at, cfg.d_ff())?,
                w2: floats(&mut at, cfg.d_ff() * d)?,
                b2: floats(&mut at, d)?,
            });
        }
        let head = floats(&mut at, d * vocab)?;
        if at != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after tensors",
                bytes.len() - at
            )));
        }
        Ok(ModelWeights {
            cfg,
            embedding,
            layers: layer_weights,
            head,
        })
    }
}

/// Plaintext fixed-point tensor known to every party.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicTensor {
    pub shape: Vec<usize>,
    pub scale: u32,
    pub data: Vec<RingValue>,
}

impl PublicTensor {
    pub fn encode(values: &[f64], shape: Vec<usize>, fx: FixedPointConfig) -> Result<PublicTensor> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} wants {n} values, got {}",
                values.len()
            )));
        }
        Ok(PublicTensor {
            shape,
            scale: fx.fractional_bits,
            data: encode_slice(values, fx)?,
        })
    }
}

/// A model tensor as the protocol sees it: known to all parties, or itself
/// secret-shared (model-privacy mode, at extra rounds).
#[derive(Debug, Clone)]
pub enum WeightRepr {
    Public(PublicTensor),
    Shared(SharedTensor),
}

impl WeightRepr {
    pub fn shape(&self) -> &[usize] {
        match self {
            WeightRepr::Public(t) => &t.shape,
            WeightRepr::Shared(t) => &t.shape,
        }
    }
}

/// One layer, encoded for the protocol.
#[derive(Debug, Clone)]
pub struct EncodedLayer {
    pub ln1_gamma: WeightRepr,
    pub ln1_beta: WeightRepr,
    pub w_q: WeightRepr,
    pub w_k: WeightRepr,
    pub w_v: WeightRepr,
    pub w_o: WeightRepr,
    pub ln2_gamma: WeightRepr,
    pub ln2_beta: WeightRepr,
    pub w1: WeightRepr,
    pub b1: WeightRepr,
    pub w2: WeightRepr,
    pub b2: WeightRepr,
}

/// The whole model, encoded for the protocol. One instance per party; in
/// shared-weights mode each party holds its own share view.
#[derive(Debug, Clone)]
pub struct EncodedModel {
    pub cfg: ModelConfig,
    pub fx: FixedPointConfig,
    pub embedding: WeightRepr,
    pub layers: Vec<EncodedLayer>,
    pub head: WeightRepr,
}

fn pub_repr(values: &[f64], shape: Vec<usize>, fx: FixedPointConfig) -> Result<WeightRepr> {
    Ok(WeightRepr::Public(PublicTensor::encode(values, shape, fx)?))
}

impl EncodedModel {
    /// Public-weights encoding (the default): every party gets identical
    /// plaintext fixed-point tensors.
    pub fn public(w: &ModelWeights, fx: FixedPointConfig) -> Result<EncodedModel> {
        let cfg = w.cfg;
        let (d, ff, v) = (cfg.d_model, cfg.d_ff(), cfg.vocab);
        let layers = w
            .layers
            .iter()
            .map(|l| {
                Ok(EncodedLayer {
                    ln1_gamma: pub_repr(&l.ln1_gamma, vec![d], fx)?,
                    ln1_beta: pub_repr(&l.ln1_beta, vec![d], fx)?,
                    w_q: pub_repr(&l.w_q, vec![d, d], fx)?,
                    w_k: pub_repr(&l.w_k, vec![d, d], fx)?,
                    w_v: pub_repr(&l.w_v, vec![d, d], fx)?,
                    w_o: pub_repr(&l.w_o, vec![d, d], fx)?,
                    ln2_gamma: pub_repr(&l.ln2_gamma, vec![d], fx)?,
                    ln2_beta: pub_repr(&l.ln2_beta, vec![d], fx)?,
                    w1: pub_repr(&l.w1, vec![d, ff], fx)?,
                    b1: pub_repr(&l.b1, vec![ff], fx)?,
                    w2: pub_repr(&l.w2, vec![ff, d], fx)?,
                    b2: pub_repr(&l.b2, vec![d], fx)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedModel {
            cfg,
            fx,
            embedding: pub_repr(&w.embedding, vec![v, d], fx)?,
            layers,
            head: pub_repr(&w.head, vec![d, v], fx)?,
        })
    }

    /// Model-privacy encoding: every tensor is secret-shared by a dealer;
    /// returns one view per party.
    pub fn shared<R: Rng>(w: &ModelWeights, fx: FixedPointConfig, rng: &mut R) -> Result<[EncodedModel; 3]> {
        let cfg = w.cfg;
        let (d, ff, v) = (cfg.d_model, cfg.d_ff(), cfg.vocab);
        let mut deal = |values: &[f64], shape: Vec<usize>| -> Result<[WeightRepr; 3]> {
            let enc = encode_slice(values, fx)?;
            Ok(share_tensor(&enc, shape, fx.fractional_bits, rng).map(WeightRepr::Shared))
        };
        let embedding = deal(&w.embedding, vec![v, d])?;
        let head = deal(&w.head, vec![d, v])?;
        let mut layer_views: [Vec<EncodedLayer>; 3] = Default::default();
        for l in &w.layers {
            let parts = [
                deal(&l.ln1_gamma, vec![d])?,
                deal(&l.ln1_beta, vec![d])?,
                deal(&l.w_q, vec![d, d])?,
                deal(&l.w_k, vec![d, d])?,
                deal(&l.w_v, vec![d, d])?,
                deal(&l.w_o, vec![d, d])?,
                deal(&l.ln2_gamma, vec![d])?,
                deal(&l.ln2_beta, vec![d])?,
                deal(&l.w1, vec![d, ff])?,
                deal(&l.b1, vec![ff])?,
                deal(&l.w2, vec![ff, d])?,
                deal(&l.b2, vec![d])?,
            ];
            let mut parts: Vec<std::array::IntoIter<WeightRepr, 3>> =
                parts.into_iter().map(|p| p.into_iter()).collect();
            for view in layer_views.iter_mut() {
                let mut it = parts.iter_mut().map(|it| it.next().unwrap());
                view.push(EncodedLayer {
                    ln1_gamma: it.next().unwrap(),
                    ln1_beta: it.next().unwrap(),
                    w_q: it.next().unwrap(),
                    w_k: it.next().unwrap(),
                    w_v: it.next().unwrap(),
                    w_o: it.next().unwrap(),
                    ln2_gamma: it.next().unwrap(),
                    ln2_beta: it.next().unwrap(),
                    w1: it.next().unwrap(),
                    b1: it.next().unwrap(),
                    w2: it.next().unwrap(),
                    b2: it.next().unwrap(),
                });
            }
        }
        let [e0, e1, e2] = embedding;
        let [h0, h1, h2] = head;
        let [l0, l1, l2] = layer_views;
        Ok([
            EncodedModel { cfg, fx, embedding: e0, layers: l0, head: h0 },
            EncodedModel { cfg, fx, embedding: e1, layers: l1, head: h1 },
            EncodedModel { cfg, fx, embedding: e2, layers: l2, head: h2 },
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_cfg() -> ModelConfig {
        ModelConfig::new(2, 8, 2, 16, 8).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(1, 7, 2, 16, 8).is_err());
        assert!(ModelConfig::new(1, 8, 2, 0, 8).is_err());
        let mut cfg = toy_cfg();
        cfg.temperature = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let w = ModelWeights::toy(toy_cfg(), 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.plsw");
        w.save(&path).unwrap();
        let loaded = ModelWeights::load(&path).unwrap();
        assert_eq!(loaded.cfg, w.cfg);
        // f32 storage: round trip within single-precision resolution
        for (a, b) in w.embedding.iter().zip(&loaded.embedding) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(loaded.layers.len(), w.layers.len());
    }

    #[test]
    fn header_checks() {
        let w = ModelWeights::toy(toy_cfg(), 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.plsw");
        w.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"PLSW");
        bytes[0] = b'X';
        assert!(matches!(ModelWeights::from_bytes(&bytes), Err(Error::Format(_))));
        let truncated = &std::fs::read(&path).unwrap()[..40];
        assert!(matches!(ModelWeights::from_bytes(truncated), Err(Error::Format(_))));
    }

    #[test]
    fn toy_is_deterministic() {
        let a = ModelWeights::toy(toy_cfg(), 5).unwrap();
        let b = ModelWeights::toy(toy_cfg(), 5).unwrap();
        assert_eq!(a, b);
        let c = ModelWeights::toy(toy_cfg(), 6).unwrap();
        assert_ne!(a, c);
    }
}
