#![allow(dead_code)]

use ksan::data::synthetic::{generate, SyntheticConfig, SyntheticCorpus};
use ksan::data::{Utterance, Vocabulary};
use ksan::encoders::EncoderKind;
use ksan::knowledge::{attach_parses, Example, DEFAULT_MAX_SUBSTRUCTURES};
use ksan::math::{Graph, NodeId, ParamId, ParamStore, Tensor};
use ksan::model::{Architecture, Instance, Ksan, ModelConfig};
use ksan::tagger::CellKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ENCODERS: [EncoderKind; 3] = [EncoderKind::Nn, EncoderKind::Rnn, EncoderKind::Cnn];
pub const CELLS: [CellKind; 2] = [CellKind::Elman, CellKind::Gru];
pub const ARCHITECTURES: [Architecture; 3] = [Architecture::Chain, Architecture::Knowledge, Architecture::Joint];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub enum Parses {
    Dependency,
    Amr,
}

/// A generated corpus with its parses attached.
pub fn synthetic(config: SyntheticConfig, seed: u64, parses: Parses) -> (SyntheticCorpus, Vec<Example>) {
    let corpus = generate(&config, seed).unwrap();
    let p = match parses {
        Parses::Dependency => &corpus.dependency,
        Parses::Amr => &corpus.amr,
    };
    let examples = attach_parses(&corpus.utterances, Some(p), DEFAULT_MAX_SUBSTRUCTURES).unwrap();
    (corpus, examples)
}

pub fn sized(utterances: usize) -> SyntheticConfig {
    SyntheticConfig {
        utterances,
        ..Default::default()
    }
}

/// Relative error between two gradients, measured on whole tensors:
/// `|a - n| / max(|a|, |n|)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

const STEP: f64 = 1e-5;

/// Worst relative error over every parameter of `store` between the
/// engine's gradients and central differences of `loss`.
pub fn check_store(
    store: &mut ParamStore,
    loss: impl Fn(&ParamStore) -> f64,
    analytic: impl Fn(&ParamStore) -> Vec<(ParamId, Tensor)>,
) -> (f64, String) {
    let grads = analytic(store);
    let mut worst = (0.0f64, String::new());
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let n = store.get(id).len();
        let a = grads
            .iter()
            .find(|(g, _)| *g == id)
            .map(|(_, t)| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        let mut numeric = vec![0.0; n];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let orig = store.get(id).data()[k];
            store.get_mut(id).data_mut()[k] = orig + STEP;
            let up = loss(store);
            store.get_mut(id).data_mut()[k] = orig - STEP;
            let down = loss(store);
            store.get_mut(id).data_mut()[k] = orig;
            *slot = (up - down) / (2.0 * STEP);
        }
        let err = relative_error(&a, &numeric);
        if err > worst.0 || worst.1.is_empty() {
            worst = (err, store.name(id).to_string());
        }
    }
    worst
}

/// Checks one graph operation: every input is a parameter and the scalar
/// loss is `sum(op(inputs) ⊙ R)` for a fixed random `R`.
pub fn check_op(seed: u64, inputs: Vec<Tensor>, build: impl Fn(&mut Graph, &[NodeId]) -> NodeId) -> f64 {
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = inputs
        .into_iter()
        .enumerate()
        .map(|(i, t)| store.add(format!("in{i}"), t))
        .collect();
    let shape = {
        let mut g = Graph::new();
        let nodes: Vec<NodeId> = ids.iter().map(|&id| g.param(&store, id)).collect();
        let out = build(&mut g, &nodes);
        g.shape(out)
    };
    let weights = random_tensor(&mut rng(seed), shape[0], shape[1], -1.0, 1.0);
    let forward = |store: &ParamStore| {
        let mut g = Graph::new();
        let nodes: Vec<NodeId> = ids.iter().map(|&id| g.param(store, id)).collect();
        let out = build(&mut g, &nodes);
        let w = g.constant(weights.clone());
        let prod = g.mul(out, w).unwrap();
        let loss = g.sum(prod);
        (g, loss)
    };
    check_store(
        &mut store,
        |s| {
            let (g, loss) = forward(s);
            g.value(loss).item()
        },
        |s| {
            let (g, loss) = forward(s);
            g.backward(loss)
                .unwrap()
                .iter()
                .map(|(id, t)| (id, t.clone()))
                .collect()
        },
    )
    .0
}

/// The small K-SAN used for full-loss gradient checks: a 3-token utterance
/// with two substructures, hidden size 4.
pub fn tiny_model(architecture: Architecture, encoder: EncoderKind, cell: CellKind, seed: u64) -> (Ksan, Instance) {
    let u = Utterance::new(
        "g",
        vec!["flights".into(), "to".into(), "boston".into()],
        vec!["O".into(), "O".into(), "B-toloc".into()],
    )
    .unwrap();
    let config = ModelConfig {
        architecture,
        encoder,
        cell,
        embedding_dim: 3,
        hidden_dim: 4,
        alpha: 0.4,
    };
    let vocab = Vocabulary::build(std::slice::from_ref(&u));
    let model = Ksan::new(config, vocab, &mut rng(seed)).unwrap();
    let inst = Instance {
        words: u.tokens.iter().map(|w| model.vocab().word_id(w)).collect(),
        tags: u.tags.iter().map(|t| model.vocab().tag_id(t).unwrap()).collect(),
        substructures: vec![vec![0, 1], vec![0, 2]],
    };
    (model, inst)
}

pub fn check_model(model: &mut Ksan, inst: &Instance) -> (f64, String) {
    let probe = model.clone();
    check_store(
        model.params_mut(),
        |s| {
            let mut m = probe.clone();
            *m.params_mut() = s.clone();
            m.loss(inst).unwrap()
        },
        |s| {
            let mut m = probe.clone();
            *m.params_mut() = s.clone();
            let (_, grads) = m.loss_and_gradients::<ChaCha8Rng>(inst, None).unwrap();
            grads.iter().map(|(id, t)| (id, t.clone())).collect()
        },
    )
}
