//! End-to-end training: Adam, dropout, unknown-word replacement, per-epoch
//! dev evaluation and best-epoch selection.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::knowledge::{Example, DEFAULT_MAX_SUBSTRUCTURES};
use crate::math::{Gradients, ParamId, ParamStore, Tensor};
use crate::model::{Dropout, Instance, Ksan, ModelConfig};

/// Independent random streams derived from the one experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedStream {
    Split = 1,
    Init = 2,
    Shuffle = 3,
    Dropout = 4,
    Unk = 5,
}

pub fn stream_rng(seed: u64, stream: SeedStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping; `None` never stops early.
    pub patience: Option<usize>,
    pub dropout: f64,
    /// Probability of replacing a training-set singleton by the unknown word.
    pub unk_replacement: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub max_substructures: usize,
    /// Held-out share of the training data when no dev set is given.
    pub dev_fraction: f64,
    pub freeze_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            model: ModelConfig::default(),
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            max_epochs: 300,
            patience: Some(25),
            dropout: 0.25,
            unk_replacement: 0.5,
            clip_norm: None,
            seed: 0,
            max_substructures: DEFAULT_MAX_SUBSTRUCTURES,
            dev_fraction: crate::data::DEFAULT_DEV_FRACTION,
            freeze_embeddings: false,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be a non-negative number");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("adam epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.unk_replacement) {
            return bad("unknown-word replacement must lie in [0, 1]");
        }
        if self.clip_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return bad("clip norm must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be positive");
        }
        if self.max_substructures == 0 {
            return bad("max substructures must be positive");
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return bad("dev fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Adam moments for every parameter of a store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. Parameters in `frozen` and parameters
/// without a gradient are left untouched; a non-finite gradient aborts the
/// update before anything changes.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    config: &AdamConfig,
    frozen: &[ParamId],
) -> Result<()> {
    for (id, g) in grads.iter() {
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient {
                param: store.name(id).to_string(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        if frozen.contains(&id) {
            continue;
        }
        let Some(g) = grads.get(id) else { continue };
        let (m, v) = (&mut state.m[id.index()], &mut state.v[id.index()]);
        let p = store.get_mut(id);
        for (((p, m), v), &g) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean summed token cross-entropy per utterance.
    pub train_loss: f64,
    /// `None` when there is no dev data.
    pub dev_f1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: Ksan,
    pub log: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Builds the vocabulary and a freshly initialised model, then trains it.
pub fn train(train_set: &[Example], dev: &[Example], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training corpus is empty".into()));
    }
    let utterances: Vec<_> = train_set.iter().map(|e| e.utterance.clone()).collect();
    let vocab = Vocabulary::build(&utterances);
    let model = Ksan::new(
        config.model.clone(),
        vocab,
        &mut stream_rng(config.seed, SeedStream::Init),
    )?;
    fit(model, train_set, dev, config)
}

/// Trains an existing model in place of [`train`], e.g. after loading
/// pre-trained embeddings into it.
pub fn fit(mut model: Ksan, train_set: &[Example], dev: &[Example], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training corpus is empty".into()));
    }
    let instances: Vec<Instance> = train_set.iter().map(|e| model.instance(e)).collect::<Result<_>>()?;
    let frozen: Vec<ParamId> = if config.freeze_embeddings {
        vec![model.embedding()]
    } else {
        Vec::new()
    };
    let adam = config.adam();
    let mut state = AdamState::new(model.params());
    let mut shuffle_rng = stream_rng(config.seed, SeedStream::Shuffle);
    let mut dropout_rng = stream_rng(config.seed, SeedStream::Dropout);
    let mut unk_rng = stream_rng(config.seed, SeedStream::Unk);

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..instances.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for &i in &order {
            let inst = with_unknowns(&instances[i], model.vocab(), config.unk_replacement, &mut unk_rng);
            let mut dropout = Dropout {
                rate: config.dropout,
                rng: &mut dropout_rng,
            };
            let (loss, mut grads) = model.loss_and_gradients(&inst, Some(&mut dropout))?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    utterance: train_set[i].utterance.id.clone(),
                    loss,
                });
            }
            if let Some(c) = config.clip_norm {
                let norm = grads.global_norm();
                if norm > c {
                    grads.scale(c / norm);
                }
            }
            adam_step(model.params_mut(), &grads, &mut state, &adam, &frozen)?;
            total += loss;
        }
        let train_loss = total / instances.len() as f64;
        let dev_f1 = if dev.is_empty() {
            None
        } else {
            Some(model.evaluate(dev)?.f1)
        };
        info!(
            "epoch {epoch}: train loss {train_loss:.4}{}",
            dev_f1.map(|f| format!(", dev F1 {f:.2}")).unwrap_or_default()
        );
        log.push(EpochRecord {
            epoch,
            train_loss,
            dev_f1,
        });

        match dev_f1 {
            Some(f1) if best.as_ref().is_none_or(|b| f1 > b.0) => {
                best = Some((f1, epoch, model.params().clone()));
                since_best = 0;
            }
            Some(_) => {
                since_best += 1;
                if config.patience.is_some_and(|p| since_best >= p) {
                    debug!("no dev improvement for {since_best} epochs, stopping");
                    break;
                }
            }
            None => {}
        }
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            *model.params_mut() = params;
            epoch
        }
        None => log.len(),
    };
    Ok(TrainOutput { model, log, best_epoch })
}

/// Replaces each singleton word by the unknown word with probability `p`.
fn with_unknowns<R: Rng>(inst: &Instance, vocab: &Vocabulary, p: f64, rng: &mut R) -> Instance {
    let mut out = inst.clone();
    if p > 0.0 {
        for w in &mut out.words {
            if vocab.count(*w) == 1 && rng.gen::<f64>() < p {
                *w = Vocabulary::UNK_ID;
            }
        }
    }
    out
}
