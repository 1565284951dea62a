//! Inference for BERT-style encoders stored as `safetensors` checkpoints.
//!
//! Only the encoder is evaluated: word + position + segment embeddings,
//! then the stack of post-norm transformer layers. Weights use the
//! Hugging Face naming scheme, with or without the `bert.` prefix.

use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use safetensors::{Dtype, SafeTensors};
use serde::Deserialize;

use super::{EmbeddingProvider, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::tokenizer::TokenSequence;

/// The subset of a Hugging Face `config.json` the encoder needs.
#[derive(Debug, Clone, Deserialize)]
pub struct BertConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_act")]
    pub hidden_act: String,
}

fn default_type_vocab() -> usize {
    2
}

fn default_eps() -> f64 {
    1e-12
}

fn default_act() -> String {
    "gelu".into()
}

#[derive(Debug, Clone, Copy)]
enum Activation {
    Gelu,
    GeluTanh,
    Relu,
}

struct Linear {
    /// `[out, in]`, as stored.
    weight: Array2<f32>,
    bias: Array1<f32>,
}

impl Linear {
    fn forward(&self, x: ArrayView2<f32>) -> Array2<f32> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

struct LayerNorm {
    gamma: Array1<f32>,
    beta: Array1<f32>,
    eps: f32,
}

impl LayerNorm {
    fn forward(&self, mut x: Array2<f32>) -> Array2<f32> {
        let width = x.ncols() as f32;
        for mut row in x.rows_mut() {
            let mean = row.sum() / width;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / width;
            let inv = 1.0 / (var + self.eps).sqrt();
            row.iter_mut()
                .zip(self.gamma.iter().zip(self.beta.iter()))
                .for_each(|(v, (g, b))| *v = (*v - mean) * inv * g + b);
        }
        x
    }
}

struct EncoderLayer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
}

/// A loaded encoder. Immutable after [`BertProvider::load`].
pub struct BertProvider {
    config: BertConfig,
    activation: Activation,
    word_embeddings: Array2<f32>,
    position_embeddings: Array2<f32>,
    token_type_embeddings: Array2<f32>,
    embed_norm: LayerNorm,
    layers: Vec<EncoderLayer>,
    /// Index into the hidden-state list `[embeddings, layer 1, …, layer L]`.
    output_layer: usize,
    id: String,
}

impl std::fmt::Debug for BertProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BertProvider")
            .field("config", &self.config)
            .field("output_layer", &self.output_layer)
            .finish_non_exhaustive()
    }
}

fn load_err(msg: impl std::fmt::Display) -> Error {
    Error::ProviderLoad(msg.to_string())
}

fn resolve_paths(model_path: &Path) -> (PathBuf, PathBuf) {
    if model_path.is_dir() {
        (
            model_path.join("config.json"),
            model_path.join("model.safetensors"),
        )
    } else {
        let dir = model_path.parent().unwrap_or_else(|| Path::new("."));
        (dir.join("config.json"), model_path.to_path_buf())
    }
}

struct Weights<'a> {
    tensors: SafeTensors<'a>,
    prefix: &'static str,
}

impl Weights<'_> {
    fn raw(&self, name: &str) -> Result<(Vec<usize>, Vec<f32>)> {
        let full = format!("{}{}", self.prefix, name);
        let view = self
            .tensors
            .tensor(&full)
            .map_err(|e| load_err(format!("tensor {full}: {e}")))?;
        if view.dtype() != Dtype::F32 {
            return Err(load_err(format!(
                "tensor {full} has dtype {:?}, only F32 is supported",
                view.dtype()
            )));
        }
        let data = view
            .data()
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok((view.shape().to_vec(), data))
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Array2<f32>> {
        let (shape, data) = self.raw(name)?;
        if shape != [rows, cols] {
            return Err(load_err(format!(
                "tensor {name} has shape {shape:?}, expected [{rows}, {cols}]"
            )));
        }
        Array2::from_shape_vec((rows, cols), data).map_err(load_err)
    }

    fn vector(&self, name: &str, len: usize) -> Result<Array1<f32>> {
        let (shape, data) = self.raw(name)?;
        if shape != [len] {
            return Err(load_err(format!(
                "tensor {name} has shape {shape:?}, expected [{len}]"
            )));
        }
        Ok(Array1::from(data))
    }

    fn linear(&self, name: &str, input: usize, output: usize) -> Result<Linear> {
        Ok(Linear {
            weight: self.matrix(&format!("{name}.weight"), output, input)?,
            bias: self.vector(&format!("{name}.bias"), output)?,
        })
    }

    fn layer_norm(&self, name: &str, width: usize, eps: f32) -> Result<LayerNorm> {
        // Older checkpoints name the affine parameters gamma/beta.
        let pick = |new: &str, old: &str| {
            let key = format!("{name}.{new}");
            if self.has(&key) {
                self.vector(&key, width)
            } else {
                self.vector(&format!("{name}.{old}"), width)
            }
        };
        Ok(LayerNorm {
            gamma: pick("weight", "gamma")?,
            beta: pick("bias", "beta")?,
            eps,
        })
    }

    fn has(&self, name: &str) -> bool {
        self.tensors
            .tensor(&format!("{}{}", self.prefix, name))
            .is_ok()
    }
}

impl BertProvider {
    /// Loads `config.json` and `model.safetensors`. `layer` selects which
    /// hidden state becomes the token embedding (negative counts from the end).
    pub fn load(model_path: impl AsRef<Path>, layer: i64) -> Result<Self> {
        let (config_path, weights_path) = resolve_paths(model_path.as_ref());
        let config_text = std::fs::read_to_string(&config_path)
            .map_err(|e| load_err(format!("{}: {e}", config_path.display())))?;
        let config: BertConfig = serde_json::from_str(&config_text)
            .map_err(|e| load_err(format!("{}: {e}", config_path.display())))?;
        let bytes = std::fs::read(&weights_path)
            .map_err(|e| load_err(format!("{}: {e}", weights_path.display())))?;
        let tensors = SafeTensors::deserialize(&bytes)
            .map_err(|e| load_err(format!("{}: {e}", weights_path.display())))?;

        let activation = match config.hidden_act.as_str() {
            "gelu" => Activation::Gelu,
            "gelu_new" | "gelu_pytorch_tanh" => Activation::GeluTanh,
            "relu" => Activation::Relu,
            other => return Err(load_err(format!("unsupported activation {other:?}"))),
        };
        let hidden = config.hidden_size;
        let heads = config.num_attention_heads;
        if hidden == 0 || heads == 0 || !hidden.is_multiple_of(heads) {
            return Err(load_err(format!(
                "hidden size {hidden} is not divisible into {heads} heads"
            )));
        }

        let total_states = config.num_hidden_layers as i64 + 1;
        let resolved = if layer < 0 { total_states + layer } else { layer };
        if !(0..total_states).contains(&resolved) {
            return Err(load_err(format!(
                "layer {layer} out of range for {} hidden states",
                total_states
            )));
        }

        let prefix = if tensors
            .names()
            .iter()
            .any(|n| n.starts_with("bert.embeddings."))
        {
            "bert."
        } else {
            ""
        };
        let w = Weights { tensors, prefix };
        let eps = config.layer_norm_eps as f32;

        let word_embeddings =
            w.matrix("embeddings.word_embeddings.weight", config.vocab_size, hidden)?;
        let position_embeddings = w.matrix(
            "embeddings.position_embeddings.weight",
            config.max_position_embeddings,
            hidden,
        )?;
        let token_type_embeddings = w.matrix(
            "embeddings.token_type_embeddings.weight",
            config.type_vocab_size,
            hidden,
        )?;
        let embed_norm = w.layer_norm("embeddings.LayerNorm", hidden, eps)?;

        let inter = config.intermediate_size;
        let layers = (0..config.num_hidden_layers)
            .map(|i| {
                let p = format!("encoder.layer.{i}");
                Ok(EncoderLayer {
                    query: w.linear(&format!("{p}.attention.self.query"), hidden, hidden)?,
                    key: w.linear(&format!("{p}.attention.self.key"), hidden, hidden)?,
                    value: w.linear(&format!("{p}.attention.self.value"), hidden, hidden)?,
                    attn_out: w.linear(&format!("{p}.attention.output.dense"), hidden, hidden)?,
                    attn_norm: w.layer_norm(&format!("{p}.attention.output.LayerNorm"), hidden, eps)?,
                    intermediate: w.linear(&format!("{p}.intermediate.dense"), hidden, inter)?,
                    output: w.linear(&format!("{p}.output.dense"), inter, hidden)?,
                    out_norm: w.layer_norm(&format!("{p}.output.LayerNorm"), hidden, eps)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let id = format!(
            "model-file:{}:layer={}",
            model_path.as_ref().display(),
            resolved
        );
        Ok(BertProvider {
            config,
            activation,
            word_embeddings,
            position_embeddings,
            token_type_embeddings,
            embed_norm,
            layers,
            output_layer: resolved as usize,
            id,
        })
    }

    pub fn config(&self) -> &BertConfig {
        &self.config
    }

    /// Runs the encoder over token ids and returns every hidden state,
    /// starting with the embedding output.
    pub fn hidden_states(&self, ids: &[u32]) -> Result<Vec<Array2<f32>>> {
        let n = ids.len();
        if n > self.config.max_position_embeddings {
            return Err(Error::ProviderRuntime(format!(
                "{n} tokens exceed the model's {} positions",
                self.config.max_position_embeddings
            )));
        }
        let hidden = self.config.hidden_size;
        let mut x = Array2::<f32>::zeros((n, hidden));
        for (pos, (&id, mut row)) in ids.iter().zip(x.rows_mut()).enumerate() {
            let id = id as usize;
            if id >= self.config.vocab_size {
                return Err(Error::ProviderRuntime(format!(
                    "token id {id} outside model vocabulary of {}",
                    self.config.vocab_size
                )));
            }
            row.assign(&self.word_embeddings.row(id));
            row += &self.position_embeddings.row(pos);
            row += &self.token_type_embeddings.row(0);
        }
        let mut states = Vec::with_capacity(self.layers.len() + 1);
        let mut x = self.embed_norm.forward(x);
        states.push(x.clone());
        for layer in &self.layers {
            x = self.encoder_layer(layer, x);
            states.push(x.clone());
        }
        Ok(states)
    }

    fn encoder_layer(&self, layer: &EncoderLayer, x: Array2<f32>) -> Array2<f32> {
        let heads = self.config.num_attention_heads;
        let head_dim = self.config.hidden_size / heads;
        let scale = 1.0 / (head_dim as f32).sqrt();

        let q = layer.query.forward(x.view());
        let k = layer.key.forward(x.view());
        let v = layer.value.forward(x.view());
        let mut context = Array2::<f32>::zeros(x.raw_dim());
        for h in 0..heads {
            let cols = s![.., h * head_dim..(h + 1) * head_dim];
            let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut scores);
            context.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        }
        let attended = layer.attn_out.forward(context.view()) + &x;
        let attended = layer.attn_norm.forward(attended);

        let mut inner = layer.intermediate.forward(attended.view());
        inner.mapv_inplace(|u| activate(self.activation, u));
        let out = layer.output.forward(inner.view()) + &attended;
        layer.out_norm.forward(out)
    }
}

fn softmax_rows(m: &mut Array2<f32>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let max = row.fold(f32::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn activate(kind: Activation, u: f32) -> f32 {
    match kind {
        Activation::Gelu => 0.5 * u * (1.0 + libm::erff(u / std::f32::consts::SQRT_2)),
        Activation::GeluTanh => {
            let c = (2.0 / std::f32::consts::PI).sqrt();
            0.5 * u * (1.0 + (c * (u + 0.044715 * u * u * u)).tanh())
        }
        Activation::Relu => u.max(0.0),
    }
}

impl EmbeddingProvider for BertProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.config.hidden_size
    }

    fn embed(&self, seq: TokenSequence) -> Result<EmbeddingSequence> {
        let ids: Vec<u32> = seq.tokens.iter().map(|t| t.id).collect();
        let mut states = self.hidden_states(&ids)?;
        let chosen = states.swap_remove(self.output_layer);
        EmbeddingSequence::new(seq, chosen.mapv(f64::from), self.id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_model_is_load_error() {
        let err = BertProvider::load("/nonexistent/model-dir", -1).unwrap_err();
        assert!(matches!(err, Error::ProviderLoad(_)));
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(activate(Activation::Gelu, 0.0), 0.0);
        assert!((activate(Activation::Gelu, 1.0) - 0.841_344_7).abs() < 1e-6);
        assert!((activate(Activation::Gelu, -1.0) + 0.158_655_3).abs() < 1e-6);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut m = ndarray::array![[1.0f32, 2.0, 3.0], [1000.0, 1000.0, -1000.0]];
        softmax_rows(&mut m);
        for row in m.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
        assert!((m[[1, 0]] - 0.5).abs() < 1e-6);
    }
}
