//! Fixed-size encoders for token sequences (substructures and whole
//! utterances) and the dense output network applied to `h + u`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::init::glorot;
use crate::math::{Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::tagger::GruCell;

pub const CNN_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Nn,
    Rnn,
    #[default]
    Cnn,
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nn" => Ok(Self::Nn),
            "rnn" => Ok(Self::Rnn),
            "cnn" => Ok(Self::Cnn),
            other => Err(Error::Config(format!("unknown encoder kind `{other}`"))),
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nn => "nn",
            Self::Rnn => "rnn",
            Self::Cnn => "cnn",
        })
    }
}

/// Affine map `x·W + b` applied row-wise.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: store.add(format!("{prefix}.weight"), glorot(rng, fan_in, fan_out)),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(1, fan_out)),
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }
}

/// Mean of the embedding rows followed by a linear layer.
pub fn encode_nn(g: &mut Graph, store: &ParamStore, linear: &Linear, rows: NodeId) -> Result<NodeId> {
    let mean = g.mean_rows(rows);
    linear.forward(g, store, mean)
}

/// Final state of a GRU run from zero over the embedding rows.
pub fn encode_rnn(g: &mut Graph, store: &ParamStore, cell: &GruCell, rows: NodeId) -> Result<NodeId> {
    let t = g.shape(rows)[0];
    let states = cell.run(g, store, rows, None)?;
    g.slice_rows(states, t - 1, 1)
}

/// Window-3 convolution over zero-padded embeddings, tanh, then max-pool
/// over positions. `conv` maps a concatenated window (`3e`) to `d`.
pub fn encode_cnn(g: &mut Graph, store: &ParamStore, conv: &Linear, rows: NodeId) -> Result<NodeId> {
    let [t, e] = g.shape(rows);
    let pad = g.constant(Tensor::zeros(1, e));
    let padded = g.concat_rows(&[pad, rows, pad])?;
    let mut windows = Vec::with_capacity(CNN_WINDOW);
    for k in 0..CNN_WINDOW {
        windows.push(g.slice_rows(padded, k, t)?);
    }
    let windows = g.concat_cols(&windows)?;
    let act = conv.forward(g, store, windows)?;
    let act = g.tanh(act);
    Ok(g.max_over_rows(act))
}

#[derive(Clone, Debug)]
pub enum EncoderParams {
    Nn(Linear),
    Rnn(GruCell),
    Cnn(Linear),
}

/// Sequence encoder shared by the substructures and the full utterance.
#[derive(Clone, Debug)]
pub struct SentenceEncoder {
    pub params: EncoderParams,
}

impl SentenceEncoder {
    pub fn new<R: Rng + ?Sized>(
        kind: EncoderKind,
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let params = match kind {
            EncoderKind::Nn => EncoderParams::Nn(Linear::new(store, prefix, input, dim, rng)),
            EncoderKind::Rnn => EncoderParams::Rnn(GruCell::new(store, prefix, input, dim, rng)),
            EncoderKind::Cnn => EncoderParams::Cnn(Linear::new(store, prefix, CNN_WINDOW * input, dim, rng)),
        };
        Self { params }
    }

    pub fn kind(&self) -> EncoderKind {
        match self.params {
            EncoderParams::Nn(_) => EncoderKind::Nn,
            EncoderParams::Rnn(_) => EncoderKind::Rnn,
            EncoderParams::Cnn(_) => EncoderKind::Cnn,
        }
    }

    /// Encodes stacked embedding rows (`T × e`) into a `1 × d` vector.
    pub fn encode(&self, g: &mut Graph, store: &ParamStore, rows: NodeId) -> Result<NodeId> {
        match &self.params {
            EncoderParams::Nn(l) => encode_nn(g, store, l, rows),
            EncoderParams::Rnn(c) => encode_rnn(g, store, c, rows),
            EncoderParams::Cnn(l) => encode_cnn(g, store, l, rows),
        }
    }

    /// Looks the tokens up in `embedding` and encodes them.
    pub fn encode_tokens(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        embedding: ParamId,
        tokens: &[usize],
    ) -> Result<NodeId> {
        if tokens.is_empty() {
            return Err(Error::Data("cannot encode an empty token sequence".into()));
        }
        let emb = g.param(store, embedding);
        let idx: Vec<Option<usize>> = tokens.iter().map(|&t| Some(t)).collect();
        let rows = g.gather_rows(emb, &idx)?;
        self.encode(g, store, rows)
    }
}

/// Dense output network `tanh(x·W + b)` on a `d`-vector.
#[derive(Clone, Debug)]
pub struct OutputNet(pub Linear);

impl OutputNet {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, dim: usize, rng: &mut R) -> Self {
        Self(Linear::new(store, prefix, dim, dim, rng))
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let y = self.0.forward(g, store, x)?;
        Ok(g.tanh(y))
    }
}
