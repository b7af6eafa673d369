//! Recurrent slot taggers: chain, knowledge-guided and the joint blend.
//!
//! Row-vector convention throughout: a hidden state is `1 × h`, an input
//! projection is `x · W` with `W: e × h`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::init::glorot;
use crate::math::{Graph, NodeId, ParamId, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Elman,
    #[default]
    Gru,
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "elman" | "rnn" => Ok(Self::Elman),
            "gru" => Ok(Self::Gru),
            other => Err(Error::Config(format!("unknown cell kind `{other}`"))),
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Elman => "elman",
            Self::Gru => "gru",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ElmanCell {
    pub w: ParamId,
    pub u: ParamId,
}

#[derive(Clone, Debug)]
pub struct GruCell {
    pub wr: ParamId,
    pub ur: ParamId,
    pub wz: ParamId,
    pub uz: ParamId,
    pub wh: ParamId,
    pub uh: ParamId,
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let mut mat = |name: &str, rows| store.add(format!("{prefix}.{name}"), glorot(rng, rows, hidden));
        Self {
            wr: mat("wr", input),
            ur: mat("ur", hidden),
            wz: mat("wz", input),
            uz: mat("uz", hidden),
            wh: mat("wh", input),
            uh: mat("uh", hidden),
        }
    }

    /// Runs the cell from a zero state and returns every hidden state, stacked.
    pub fn run(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        inputs: NodeId,
        knowledge: Option<&[NodeId; 3]>,
    ) -> Result<NodeId> {
        let hidden = store.get(self.ur).rows();
        let mut h = g.constant(Tensor::zeros(1, hidden));
        let mut states = Vec::with_capacity(g.shape(inputs)[0]);
        for t in 0..g.shape(inputs)[0] {
            let x = g.slice_rows(inputs, t, 1)?;
            h = gru_step(g, store, self, x, h, knowledge)?;
            states.push(h);
        }
        g.concat_rows(&states)
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Elman(ElmanCell),
    Gru(GruCell),
}

impl Cell {
    pub fn new<R: Rng + ?Sized>(
        kind: CellKind,
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        match kind {
            CellKind::Elman => Self::Elman(ElmanCell {
                w: store.add(format!("{prefix}.w"), glorot(rng, input, hidden)),
                u: store.add(format!("{prefix}.u"), glorot(rng, hidden, hidden)),
            }),
            CellKind::Gru => Self::Gru(GruCell::new(store, prefix, input, hidden, rng)),
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            Self::Elman(_) => CellKind::Elman,
            Self::Gru(_) => CellKind::Gru,
        }
    }

    pub fn hidden_dim(&self, store: &ParamStore) -> usize {
        match self {
            Self::Elman(c) => store.get(c.u).rows(),
            Self::Gru(c) => store.get(c.ur).rows(),
        }
    }
}

/// One step of the Elman recurrence, `tanh(o·M + x·W + h·U)`.
///
/// `knowledge` is the already projected `o·M`; it is added first so that a
/// zero term leaves the remaining sum bit-for-bit unchanged.
pub fn elman_step(
    g: &mut Graph,
    store: &ParamStore,
    cell: &ElmanCell,
    x: NodeId,
    h_prev: NodeId,
    knowledge: Option<NodeId>,
) -> Result<NodeId> {
    let w = g.param(store, cell.w);
    let u = g.param(store, cell.u);
    let xw = g.matmul(x, w)?;
    let hu = g.matmul(h_prev, u)?;
    let input = match knowledge {
        Some(k) => g.add(k, xw)?,
        None => xw,
    };
    let pre = g.add(input, hu)?;
    Ok(g.tanh(pre))
}

/// One GRU step. `knowledge` holds the projected terms for the reset gate,
/// the update gate and the candidate, in that order.
pub fn gru_step(
    g: &mut Graph,
    store: &ParamStore,
    cell: &GruCell,
    x: NodeId,
    h_prev: NodeId,
    knowledge: Option<&[NodeId; 3]>,
) -> Result<NodeId> {
    let pre = |g: &mut Graph, w: ParamId, u: ParamId, h: NodeId, k: Option<NodeId>| -> Result<NodeId> {
        let w = g.param(store, w);
        let u = g.param(store, u);
        let xw = g.matmul(x, w)?;
        let hu = g.matmul(h, u)?;
        let input = match k {
            Some(k) => g.add(k, xw)?,
            None => xw,
        };
        g.add(input, hu)
    };
    let k = |i: usize| knowledge.map(|k| k[i]);

    let r = pre(g, cell.wr, cell.ur, h_prev, k(0))?;
    let r = g.sigmoid(r);
    let z = pre(g, cell.wz, cell.uz, h_prev, k(1))?;
    let z = g.sigmoid(z);
    let reset = g.mul(h_prev, r)?;
    let cand = pre(g, cell.wh, cell.uh, reset, k(2))?;
    let cand = g.tanh(cand);

    let ones = g.constant(Tensor::filled(1, g.shape(z)[1], 1.0));
    let keep = g.sub(ones, z)?;
    let fresh = g.mul(keep, cand)?;
    let carried = g.mul(z, h_prev)?;
    g.add(fresh, carried)
}

/// Projections of the knowledge vector into each pre-activation of a cell:
/// one matrix for Elman, three (reset, update, candidate) for GRU.
#[derive(Clone, Debug)]
pub struct KnowledgeProjection {
    pub m: Vec<ParamId>,
}

impl KnowledgeProjection {
    pub fn new<R: Rng + ?Sized>(
        kind: CellKind,
        store: &mut ParamStore,
        prefix: &str,
        knowledge_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let names: &[&str] = match kind {
            CellKind::Elman => &["m"],
            CellKind::Gru => &["mr", "mz", "mh"],
        };
        Self {
            m: names
                .iter()
                .map(|n| store.add(format!("{prefix}.{n}"), glorot(rng, knowledge_dim, hidden)))
                .collect(),
        }
    }
}

/// A recurrent tower, optionally reading a knowledge vector at every step.
#[derive(Clone, Debug)]
pub struct Tower {
    pub cell: Cell,
    pub knowledge: Option<KnowledgeProjection>,
}

impl Tower {
    /// Hidden states for every row of `inputs` (`T × e`), stacked as `T × h`.
    pub fn run(&self, g: &mut Graph, store: &ParamStore, inputs: NodeId, o: Option<NodeId>) -> Result<NodeId> {
        let terms = match (&self.knowledge, o) {
            (Some(proj), Some(o)) => {
                let mut terms = Vec::with_capacity(proj.m.len());
                for &m in &proj.m {
                    let m = g.param(store, m);
                    terms.push(g.matmul(o, m)?);
                }
                Some(terms)
            }
            (None, Some(_)) => return Err(Error::Config("knowledge vector given to a chain tower".into())),
            (_, None) => None,
        };
        match &self.cell {
            Cell::Elman(cell) => {
                let hidden = store.get(cell.u).rows();
                let mut h = g.constant(Tensor::zeros(1, hidden));
                let mut states = Vec::with_capacity(g.shape(inputs)[0]);
                for t in 0..g.shape(inputs)[0] {
                    let x = g.slice_rows(inputs, t, 1)?;
                    h = elman_step(g, store, cell, x, h, terms.as_ref().map(|k| k[0]))?;
                    states.push(h);
                }
                g.concat_rows(&states)
            }
            Cell::Gru(cell) => {
                let terms = terms.map(|k| [k[0], k[1], k[2]]);
                cell.run(g, store, inputs, terms.as_ref())
            }
        }
    }
}

/// Softmax output layer `softmax(h·V + c)`.
#[derive(Clone, Debug)]
pub struct OutputLayer {
    pub v: ParamId,
    pub c: ParamId,
}

impl OutputLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, hidden: usize, tags: usize, rng: &mut R) -> Self {
        Self {
            v: store.add(format!("{prefix}.v"), glorot(rng, hidden, tags)),
            c: store.add(format!("{prefix}.c"), Tensor::zeros(1, tags)),
        }
    }

    /// Per-token tag distributions (`T × K`) from stacked hidden states.
    pub fn distributions(&self, g: &mut Graph, store: &ParamStore, hidden: NodeId) -> Result<NodeId> {
        let v = g.param(store, self.v);
        let c = g.param(store, self.c);
        let logits = g.matmul(hidden, v)?;
        let logits = g.add_row(logits, c)?;
        Ok(g.softmax(logits))
    }
}

pub fn tag_chain(
    g: &mut Graph,
    store: &ParamStore,
    tower: &Tower,
    output: &OutputLayer,
    inputs: NodeId,
) -> Result<NodeId> {
    let h = tower.run(g, store, inputs, None)?;
    output.distributions(g, store, h)
}

pub fn tag_knowledge(
    g: &mut Graph,
    store: &ParamStore,
    tower: &Tower,
    output: &OutputLayer,
    inputs: NodeId,
    o: NodeId,
) -> Result<NodeId> {
    if tower.knowledge.is_none() {
        return Err(Error::Config("knowledge tagging needs a knowledge projection".into()));
    }
    let h = tower.run(g, store, inputs, Some(o))?;
    output.distributions(g, store, h)
}

/// Stacked hidden states of the joint tagger before the output layer:
/// `alpha · chain + (1 - alpha) · knowledge`.
pub fn joint_hidden(
    g: &mut Graph,
    store: &ParamStore,
    chain: &Tower,
    knowledge: &Tower,
    inputs: NodeId,
    o: NodeId,
    alpha: f64,
) -> Result<NodeId> {
    check_alpha(alpha)?;
    let h1 = chain.run(g, store, inputs, None)?;
    let h2 = knowledge.run(g, store, inputs, Some(o))?;
    let h1 = g.scale(h1, alpha);
    let h2 = g.scale(h2, 1.0 - alpha);
    g.add(h1, h2)
}

#[allow(clippy::too_many_arguments)]
pub fn tag_joint(
    g: &mut Graph,
    store: &ParamStore,
    chain: &Tower,
    knowledge: &Tower,
    output: &OutputLayer,
    inputs: NodeId,
    o: NodeId,
    alpha: f64,
) -> Result<NodeId> {
    let h = joint_hidden(g, store, chain, knowledge, inputs, o, alpha)?;
    output.distributions(g, store, h)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn vecmat(x: &[f64], m: &Tensor) -> Vec<f64> {
        (0..m.cols())
            .map(|j| x.iter().enumerate().map(|(i, xi)| xi * m.get(i, j)).sum())
            .collect()
    }

    #[test]
    fn elman_zero_weights_and_memoryless() {
        let mut store = ParamStore::new();
        let cell = ElmanCell {
            w: store.add("w", Tensor::zeros(2, 2)),
            u: store.add("u", Tensor::zeros(2, 2)),
        };
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![0.3, -0.7]));
        let h = g.constant(Tensor::row(vec![0.9, 0.1]));
        let out = elman_step(&mut g, &store, &cell, x, h, None).unwrap();
        assert_eq!(g.value(out).data(), &[0.0, 0.0]);

        // hand case: x·W = [0.3*0.5 - 0.7*0.1, 0.3*-0.2 - 0.7*0.4] = [0.08, -0.34]
        // h·U = [0.9*0.2 + 0.1*0.3, 0.9*0.0 + 0.1*-0.5] = [0.21, -0.05]
        *store.get_mut(cell.w) = mat(&[&[0.5, -0.2], &[0.1, 0.4]]);
        *store.get_mut(cell.u) = mat(&[&[0.2, 0.0], &[0.3, -0.5]]);
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![0.3, -0.7]));
        let h = g.constant(Tensor::row(vec![0.9, 0.1]));
        let out = elman_step(&mut g, &store, &cell, x, h, None).unwrap();
        let want = [(0.08f64 + 0.21).tanh(), (-0.34f64 - 0.05).tanh()];
        for (a, b) in g.value(out).data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }

        // U = 0: the previous state is ignored
        *store.get_mut(cell.u) = Tensor::zeros(2, 2);
        let run = |h0: Vec<f64>| {
            let mut g = Graph::new();
            let x = g.constant(Tensor::row(vec![0.3, -0.7]));
            let h = g.constant(Tensor::row(h0));
            let out = elman_step(&mut g, &store, &cell, x, h, None).unwrap();
            g.value(out).clone()
        };
        assert_eq!(run(vec![1.0, 2.0]), run(vec![-3.0, 0.5]));
    }

    fn zero_gru(store: &mut ParamStore, e: usize, h: usize) -> GruCell {
        let mut z = |n: &str, r| store.add(n.to_string(), Tensor::zeros(r, h));
        GruCell {
            wr: z("wr", e),
            ur: z("ur", h),
            wz: z("wz", e),
            uz: z("uz", h),
            wh: z("wh", e),
            uh: z("uh", h),
        }
    }

    #[test]
    fn gru_zero_weights_halve_state() {
        let mut store = ParamStore::new();
        let cell = zero_gru(&mut store, 2, 3);
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![1.0, -2.0]));
        let h = g.constant(Tensor::row(vec![0.4, -0.8, 0.2]));
        let out = gru_step(&mut g, &store, &cell, x, h, None).unwrap();
        assert_eq!(g.value(out).data(), &[0.2, -0.4, 0.1]);
    }

    #[test]
    fn gru_saturated_update_gate_copies_state() {
        let mut store = ParamStore::new();
        let cell = zero_gru(&mut store, 1, 2);
        *store.get_mut(cell.wz) = Tensor::row(vec![1e3, 1e3]);
        *store.get_mut(cell.wh) = Tensor::row(vec![5.0, -5.0]);
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(vec![1.0]));
        let h = g.constant(Tensor::row(vec![0.25, -0.6]));
        let out = gru_step(&mut g, &store, &cell, x, h, None).unwrap();
        assert_eq!(g.value(out).data(), &[0.25, -0.6]);
    }

    /// Plain-loop GRU step over slices, written independently of the graph.
    fn gru_oracle(store: &ParamStore, c: &GruCell, x: &[f64], h: &[f64], k: Option<[&[f64]; 3]>) -> Vec<f64> {
        let add = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(p, q)| p + q).collect::<Vec<_>>();
        let gate = |w, u, hh: &[f64], kk: Option<&[f64]>| {
            let mut s = vecmat(x, store.get(w));
            if let Some(kk) = kk {
                s = add(kk.to_vec(), s);
            }
            add(s, vecmat(hh, store.get(u)))
        };
        let r: Vec<f64> = gate(c.wr, c.ur, h, k.map(|k| k[0])).into_iter().map(sigmoid).collect();
        let z: Vec<f64> = gate(c.wz, c.uz, h, k.map(|k| k[1])).into_iter().map(sigmoid).collect();
        let hr: Vec<f64> = h.iter().zip(&r).map(|(a, b)| a * b).collect();
        let cand: Vec<f64> = gate(c.wh, c.uh, &hr, k.map(|k| k[2]))
            .into_iter()
            .map(f64::tanh)
            .collect();
        (0..h.len()).map(|i| (1.0 - z[i]) * cand[i] + z[i] * h[i]).collect()
    }

    #[test]
    fn gru_matches_loop_oracle_and_stays_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", 2, 3, &mut rng);
        let x = [0.7, -1.1];
        let h = [0.3, -0.2, 0.9];
        let mut g = Graph::new();
        let xn = g.constant(Tensor::row(x.to_vec()));
        let hn = g.constant(Tensor::row(h.to_vec()));
        let out = gru_step(&mut g, &store, &cell, xn, hn, None).unwrap();
        let want = gru_oracle(&store, &cell, &x, &h, None);
        for (a, b) in g.value(out).data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }

        // the candidate is reconstructible from the output: h = c + z (h_prev - c)
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut g = Graph::new();
            let xn = g.constant(Tensor::row(x.clone()));
            let hn = g.constant(Tensor::row(h.clone()));
            let out = gru_step(&mut g, &store, &cell, xn, hn, None).unwrap();
            // candidate bounded by tanh, so h_t lies within [min(c, h), max(c, h)] ⊂ [-1, 1]
            let hr: Vec<f64> = {
                let r: Vec<f64> = vecmat(&x, store.get(cell.wr))
                    .iter()
                    .zip(vecmat(&h, store.get(cell.ur)))
                    .map(|(a, b)| sigmoid(a + b))
                    .collect();
                h.iter().zip(&r).map(|(a, b)| a * b).collect()
            };
            let cand: Vec<f64> = vecmat(&x, store.get(cell.wh))
                .iter()
                .zip(vecmat(&hr, store.get(cell.uh)))
                .map(|(a, b)| (a + b).tanh())
                .collect();
            for i in 0..3 {
                let v = g.value(out).data()[i];
                let (lo, hi) = (cand[i].min(h[i]), cand[i].max(h[i]));
                assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
            }
        }
    }

    #[test]
    fn gru_knowledge_terms_enter_every_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", 2, 3, &mut rng);
        let k = [[0.5, -0.1, 0.2], [-0.3, 0.4, 0.0], [0.1, 0.1, -0.6]];
        let x = [0.2, 0.4];
        let h = [0.0, 0.5, -0.5];
        let mut g = Graph::new();
        let xn = g.constant(Tensor::row(x.to_vec()));
        let hn = g.constant(Tensor::row(h.to_vec()));
        let kn = [0, 1, 2].map(|i| g.constant(Tensor::row(k[i].to_vec())));
        let out = gru_step(&mut g, &store, &cell, xn, hn, Some(&kn)).unwrap();
        let want = gru_oracle(&store, &cell, &x, &h, Some([&k[0], &k[1], &k[2]]));
        for (a, b) in g.value(out).data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn setup(kind: CellKind) -> (ParamStore, Tower, Tower, OutputLayer) {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut store = ParamStore::new();
        let chain = Tower {
            cell: Cell::new(kind, &mut store, "c", 3, 4, &mut rng),
            knowledge: None,
        };
        let know = Tower {
            cell: Cell::new(kind, &mut store, "k", 3, 4, &mut rng),
            knowledge: Some(KnowledgeProjection::new(kind, &mut store, "k", 4, 4, &mut rng)),
        };
        let out = OutputLayer::new(&mut store, "o", 4, 5, &mut rng);
        (store, chain, know, out)
    }

    fn inputs(rows: &[[f64; 3]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn distributions_normalised_and_causal() {
        for kind in [CellKind::Elman, CellKind::Gru] {
            let (store, chain, _, out) = setup(kind);
            let run = |x: Tensor| {
                let mut g = Graph::new();
                let x = g.constant(x);
                let y = tag_chain(&mut g, &store, &chain, &out, x).unwrap();
                g.value(y).clone()
            };
            let a = run(inputs(&[[0.1, 0.2, 0.3], [0.5, -0.5, 0.0], [1.0, 1.0, -1.0]]));
            let b = run(inputs(&[[0.1, 0.2, 0.3], [0.5, -0.5, 0.0], [-2.0, 0.0, 3.0]]));
            for t in 0..3 {
                assert!((a.row_slice(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert_eq!(&a.data()[..10], &b.data()[..10]);
            assert_ne!(a.row_slice(2), b.row_slice(2));
            let single = run(inputs(&[[0.1, 0.2, 0.3]]));
            assert_eq!(single.row_slice(0), a.row_slice(0));
        }
    }

    #[test]
    fn zero_knowledge_matches_chain_with_shared_cell() {
        for kind in [CellKind::Elman, CellKind::Gru] {
            let (store, chain, know, out) = setup(kind);
            let shared = Tower {
                cell: chain.cell.clone(),
                knowledge: know.knowledge.clone(),
            };
            let x = inputs(&[[0.1, 0.2, 0.3], [0.5, -0.5, 0.0]]);
            let mut g = Graph::new();
            let xn = g.constant(x.clone());
            let base = tag_chain(&mut g, &store, &chain, &out, xn).unwrap();
            let o = g.constant(Tensor::zeros(1, 4));
            let k = tag_knowledge(&mut g, &store, &shared, &out, xn, o).unwrap();
            assert_eq!(g.value(base), g.value(k));
            let o = g.constant(Tensor::row(vec![0.3, -0.3, 0.9, 0.1]));
            let k = tag_knowledge(&mut g, &store, &shared, &out, xn, o).unwrap();
            assert_ne!(g.value(base), g.value(k));
        }
    }

    #[test]
    fn joint_alpha_limits() {
        let (store, chain, know, out) = setup(CellKind::Gru);
        let mut g = Graph::new();
        let x = g.constant(inputs(&[[0.1, 0.2, 0.3], [0.5, -0.5, 0.0]]));
        let o = g.constant(Tensor::row(vec![0.3, -0.3, 0.9, 0.1]));
        let c = tag_chain(&mut g, &store, &chain, &out, x).unwrap();
        let k = tag_knowledge(&mut g, &store, &know, &out, x, o).unwrap();
        let j1 = tag_joint(&mut g, &store, &chain, &know, &out, x, o, 1.0).unwrap();
        let j0 = tag_joint(&mut g, &store, &chain, &know, &out, x, o, 0.0).unwrap();
        assert_eq!(g.value(j1), g.value(c));
        assert_eq!(g.value(j0), g.value(k));
        assert!(tag_joint(&mut g, &store, &chain, &know, &out, x, o, 1.5).is_err());
    }

    #[test]
    fn chain_tower_rejects_knowledge() {
        let (store, chain, _, _) = setup(CellKind::Elman);
        let mut g = Graph::new();
        let x = g.constant(inputs(&[[0.1, 0.2, 0.3]]));
        let o = g.constant(Tensor::zeros(1, 4));
        assert!(chain.run(&mut g, &store, x, Some(o)).is_err());
        assert_eq!("GRU".parse::<CellKind>().unwrap(), CellKind::Gru);
        assert!("lstm".parse::<CellKind>().is_err());
    }
}
