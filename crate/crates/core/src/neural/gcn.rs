//! Weighted graph convolutional network for scene-graph-to-layout.
//!
//! Node and relation embeddings feed `L` rounds of message passing. Each
//! round evaluates one shared MLP per edge whose 3D-wide output splits into
//! subject / relation / object messages; a node's update is the weighted
//! average of incident subject and object messages, normalized by the sum
//! of incident edge weights. Edge representations are refreshed from the
//! updated endpoints. A sigmoid box head maps final node states to
//! normalized bounding boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKey, Layout, WeightedSceneGraph};
use crate::neural::mlp::{Activation, Mat, Mlp, MlpTrace};
use crate::seed;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcnDims {
    /// Embedding width D for objects and relations.
    pub embed_dim: usize,
    /// Number of message-passing rounds L.
    pub n_layers: usize,
    /// Hidden width of the shared per-layer edge MLP.
    pub mlp_hidden: usize,
    /// Hidden width of the box head.
    pub box_hidden: usize,
}

impl Default for GcnDims {
    fn default() -> Self {
        GcnDims { embed_dim: 128, n_layers: 5, mlp_hidden: 512, box_hidden: 512 }
    }
}

/// Layout-predictor parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub dims: GcnDims,
    /// |C| x D object-category embeddings.
    pub object_embeddings: Mat,
    /// |R| x D relation embeddings; completed edges use them identically.
    pub relation_embeddings: Mat,
    /// One shared 3-layer MLP per round, 3D -> hidden -> hidden -> 3D,
    /// output split as (subject, relation, object) messages.
    pub layer_mlps: Vec<Mlp>,
    /// D -> 4 with sigmoid output: boxes always land in (0, 1)^4.
    pub box_head: Mlp,
}

/// Gradients with respect to every [`GcnModel`] tensor, same shapes.
pub type GcnGrads = GcnModel;

impl GcnModel {
    pub fn new(n_categories: usize, n_relations: usize, dims: GcnDims, seed_val: u64) -> Self {
        let mut rng = seed::rng(seed_val);
        let d = dims.embed_dim;
        let layer_mlps = (0..dims.n_layers)
            .map(|_| {
                Mlp::new(
                    &[3 * d, dims.mlp_hidden, dims.mlp_hidden, 3 * d],
                    Activation::Identity,
                    &mut rng,
                )
            })
            .collect();
        GcnModel {
            dims,
            object_embeddings: Mat::glorot(n_categories, d, &mut rng),
            relation_embeddings: Mat::glorot(n_relations, d, &mut rng),
            layer_mlps,
            box_head: Mlp::new(&[d, dims.box_hidden, 4], Activation::Sigmoid, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        GcnModel {
            dims: self.dims,
            object_embeddings: Mat::zeros(
                self.object_embeddings.rows,
                self.object_embeddings.cols,
            ),
            relation_embeddings: Mat::zeros(
                self.relation_embeddings.rows,
                self.relation_embeddings.cols,
            ),
            layer_mlps: self.layer_mlps.iter().map(Mlp::zeros_like).collect(),
            box_head: self.box_head.zeros_like(),
        }
    }

    /// All parameter tensors in a fixed order (paired with
    /// [`GcnModel::tensors_mut`] for optimizer updates).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.object_embeddings.data, &self.relation_embeddings.data];
        for mlp in &self.layer_mlps {
            for layer in &mlp.layers {
                out.push(&layer.weight.data);
                out.push(&layer.bias);
            }
        }
        for layer in &self.box_head.layers {
            out.push(&layer.weight.data);
            out.push(&layer.bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            &mut self.object_embeddings.data,
            &mut self.relation_embeddings.data,
        ];
        for mlp in &mut self.layer_mlps {
            for layer in &mut mlp.layers {
                out.push(&mut layer.weight.data);
                out.push(&mut layer.bias);
            }
        }
        for layer in &mut self.box_head.layers {
            out.push(&mut layer.weight.data);
            out.push(&mut layer.bias);
        }
        out
    }

    /// Sum `other`'s tensors into `self` (gradient reduction).
    pub fn add_assign(&mut self, other: &GcnModel) {
        let mut mine = self.tensors_mut();
        let theirs = other.tensors();
        for (a, b) in mine.iter_mut().zip(theirs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= s;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims.embed_dim;
        self.object_embeddings.validate()?;
        self.relation_embeddings.validate()?;
        if self.object_embeddings.cols != d || self.relation_embeddings.cols != d {
            return Err(Error::Shape("embedding width does not match embed_dim".into()));
        }
        if self.layer_mlps.len() != self.dims.n_layers {
            return Err(Error::Shape(format!(
                "{} layer MLPs for {} layers",
                self.layer_mlps.len(),
                self.dims.n_layers
            )));
        }
        for mlp in &self.layer_mlps {
            if mlp.in_dim() != 3 * d || mlp.out_dim() != 3 * d {
                return Err(Error::Shape("layer MLP must map 3D -> 3D".into()));
            }
            for layer in &mlp.layers {
                layer.weight.validate()?;
            }
        }
        if self.box_head.in_dim() != d || self.box_head.out_dim() != 4 {
            return Err(Error::Shape("box head must map D -> 4".into()));
        }
        if self.box_head.output_activation != Activation::Sigmoid {
            return Err(Error::Shape("box head must have a sigmoid output".into()));
        }
        Ok(())
    }

    fn check_compatible(&self, g: &WeightedSceneGraph) -> Result<()> {
        for (i, o) in g.objects().iter().enumerate() {
            if o.category >= self.object_embeddings.rows {
                return Err(Error::Shape(format!(
                    "object {i} category {} has no embedding (|C| = {})",
                    o.category, self.object_embeddings.rows
                )));
            }
        }
        for (e, _) in g.edges() {
            if e.relation >= self.relation_embeddings.rows {
                return Err(Error::Shape(format!(
                    "relation {} has no embedding (|R| = {})",
                    e.relation, self.relation_embeddings.rows
                )));
            }
        }
        Ok(())
    }
}

/// Forward intermediates: enough to replay reverse-mode gradients for every
/// model tensor and every edge weight.
#[derive(Debug, Clone)]
pub struct GcnTape {
    /// Edges with weights, in graph order; gradients align with this list.
    pub edges: Vec<(EdgeKey, f64)>,
    /// Node states per level, `[0..=L][node][D]`.
    node_states: Vec<Vec<Vec<f64>>>,
    /// Message-MLP traces per layer and edge (subject/object slices used).
    msg_traces: Vec<Vec<MlpTrace>>,
    /// Edge-update MLP traces per layer and edge (relation slice used).
    edge_traces: Vec<Vec<MlpTrace>>,
    /// Normalizer c per layer and node (0.0 marks an isolated node).
    norms: Vec<Vec<f64>>,
    /// Box-head traces per node.
    box_traces: Vec<MlpTrace>,
    /// Categories per node (for embedding gradients).
    categories: Vec<usize>,
}

impl GcnTape {
    pub fn n_nodes(&self) -> usize {
        self.categories.len()
    }
}

fn concat3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len() + c.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.extend_from_slice(c);
    out
}

/// Run the weighted GCN on one graph, producing the layout and the tape.
pub fn gcn_forward(g: &WeightedSceneGraph, model: &GcnModel) -> Result<(Layout, GcnTape)> {
    model.validate()?;
    model.check_compatible(g)?;
    let d = model.dims.embed_dim;
    let n = g.n_nodes();
    let edges: Vec<(EdgeKey, f64)> = g.edges().map(|(e, w)| (*e, w)).collect();

    let mut node_states: Vec<Vec<Vec<f64>>> = Vec::with_capacity(model.dims.n_layers + 1);
    node_states.push(
        g.objects()
            .iter()
            .map(|o| model.object_embeddings.row(o.category).to_vec())
            .collect(),
    );
    let mut edge_state: Vec<Vec<f64>> = edges
        .iter()
        .map(|(e, _)| model.relation_embeddings.row(e.relation).to_vec())
        .collect();
    let mut msg_traces = Vec::with_capacity(model.dims.n_layers);
    let mut edge_traces = Vec::with_capacity(model.dims.n_layers);
    let mut norms = Vec::with_capacity(model.dims.n_layers);

    for mlp in &model.layer_mlps {
        let v = node_states.last().expect("init state");
        let u = &edge_state;

        let traces: Vec<MlpTrace> = edges
            .iter()
            .enumerate()
            .map(|(idx, (e, _))| mlp.forward(&concat3(&v[e.subject], &u[idx], &v[e.object])))
            .collect();

        let mut sums = vec![vec![0.0; d]; n];
        let mut c = vec![0.0; n];
        for (idx, (e, w)) in edges.iter().enumerate() {
            let out = traces[idx].output();
            for k in 0..d {
                sums[e.subject][k] += w * out[k];
                sums[e.object][k] += w * out[2 * d + k];
            }
            c[e.subject] += w;
            c[e.object] += w;
        }
        let v_next: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                if c[i] > 0.0 {
                    sums[i].iter().map(|s| s / c[i]).collect()
                } else {
                    v[i].clone() // isolated node: identity update
                }
            })
            .collect();

        let etraces: Vec<MlpTrace> = edges
            .iter()
            .enumerate()
            .map(|(idx, (e, _))| {
                mlp.forward(&concat3(&v_next[e.subject], &u[idx], &v_next[e.object]))
            })
            .collect();
        let u_next: Vec<Vec<f64>> = etraces.iter().map(|t| t.output()[d..2 * d].to_vec()).collect();

        msg_traces.push(traces);
        edge_traces.push(etraces);
        norms.push(c);
        node_states.push(v_next);
        edge_state = u_next;
    }

    let final_nodes = node_states.last().expect("final state");
    let box_traces: Vec<MlpTrace> =
        final_nodes.iter().map(|v| model.box_head.forward(v)).collect();
    let boxes: Vec<[f64; 4]> = box_traces
        .iter()
        .map(|t| {
            let o = t.output();
            [o[0], o[1], o[2], o[3]]
        })
        .collect();
    let layout = Layout::new(boxes)?;
    let tape = GcnTape {
        edges,
        node_states,
        msg_traces,
        edge_traces,
        norms,
        box_traces,
        categories: g.objects().iter().map(|o| o.category).collect(),
    };
    Ok((layout, tape))
}

/// Exact reverse-mode gradients of a scalar loss, given its gradient on the
/// predicted boxes. Returns model-tensor gradients and the gradient with
/// respect to each edge weight (aligned with `tape.edges`).
pub fn gcn_backward(
    model: &GcnModel,
    tape: &GcnTape,
    d_boxes: &[[f64; 4]],
) -> Result<(GcnGrads, Vec<f64>)> {
    let d = model.dims.embed_dim;
    let n = tape.n_nodes();
    let m = tape.edges.len();
    if d_boxes.len() != n {
        return Err(Error::Consistency(format!(
            "upstream gradient covers {} boxes, tape has {n} nodes",
            d_boxes.len()
        )));
    }
    if tape.msg_traces.len() != model.dims.n_layers || tape.box_traces.len() != n {
        return Err(Error::Consistency(
            "tape does not match the model it is replayed against".into(),
        ));
    }

    let mut grads = model.zeros_like();
    let mut d_weights = vec![0.0; m];

    // box head
    let mut d_v: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    for i in 0..n {
        let din = model.box_head.backward(&tape.box_traces[i], &d_boxes[i], &mut grads.box_head);
        for (a, b) in d_v[i].iter_mut().zip(din) {
            *a += b;
        }
    }

    // u^L feeds nothing, so its gradient level starts empty
    let mut d_u: Vec<Vec<f64>> = vec![vec![0.0; d]; m];
    let mut d_u_live = false;

    for t in (0..model.dims.n_layers).rev() {
        let mlp = &model.layer_mlps[t];
        let v_next = &tape.node_states[t + 1];
        let c = &tape.norms[t];
        let mut d_v_prev: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
        let mut d_u_prev: Vec<Vec<f64>> = vec![vec![0.0; d]; m];

        // edge update consumed (v^{t+1}, u^t, v^{t+1}); run it first so the
        // aggregation step below sees the complete gradient on v^{t+1}
        if d_u_live {
            for (idx, (e, _)) in tape.edges.iter().enumerate() {
                let mut out_grad = vec![0.0; 3 * d];
                out_grad[d..2 * d].copy_from_slice(&d_u[idx]);
                let din =
                    mlp.backward(&tape.edge_traces[t][idx], &out_grad, &mut grads.layer_mlps[t]);
                for k in 0..d {
                    d_v[e.subject][k] += din[k];
                    d_u_prev[idx][k] += din[d + k];
                    d_v[e.object][k] += din[2 * d + k];
                }
            }
        }

        // weighted-average aggregation
        for (idx, (e, w)) in tape.edges.iter().enumerate() {
            let out = tape.msg_traces[t][idx].output();
            let (i, j) = (e.subject, e.object);
            let mut out_grad = vec![0.0; 3 * d];
            let mut dw = 0.0;
            if c[i] > 0.0 {
                for k in 0..d {
                    dw += d_v[i][k] * (out[k] - v_next[i][k]) / c[i];
                    out_grad[k] = d_v[i][k] * w / c[i];
                }
            }
            if c[j] > 0.0 {
                for k in 0..d {
                    dw += d_v[j][k] * (out[2 * d + k] - v_next[j][k]) / c[j];
                    out_grad[2 * d + k] = d_v[j][k] * w / c[j];
                }
            }
            d_weights[idx] += dw;
            let din = mlp.backward(&tape.msg_traces[t][idx], &out_grad, &mut grads.layer_mlps[t]);
            for k in 0..d {
                d_v_prev[i][k] += din[k];
                d_u_prev[idx][k] += din[d + k];
                d_v_prev[j][k] += din[2 * d + k];
            }
        }

        // isolated nodes pass through unchanged
        for i in 0..n {
            if c[i] == 0.0 {
                for k in 0..d {
                    d_v_prev[i][k] += d_v[i][k];
                }
            }
        }

        d_v = d_v_prev;
        d_u = d_u_prev;
        d_u_live = true;
    }

    // embeddings
    for (i, &cat) in tape.categories.iter().enumerate() {
        let row = grads.object_embeddings.row_mut(cat);
        for (a, b) in row.iter_mut().zip(&d_v[i]) {
            *a += b;
        }
    }
    for (idx, (e, _)) in tape.edges.iter().enumerate() {
        let row = grads.relation_embeddings.row_mut(e.relation);
        for (a, b) in row.iter_mut().zip(&d_u[idx]) {
            *a += b;
        }
    }

    Ok((grads, d_weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SceneObject;
    use crate::seed;
    use crate::vocab::RelationVocab;
    use rand::Rng;

    fn dims() -> GcnDims {
        GcnDims { embed_dim: 4, n_layers: 2, mlp_hidden: 6, box_hidden: 5 }
    }

    fn vocab() -> RelationVocab {
        RelationVocab::new(vec!["r0", "r1"], vec!["c0", "c1"]).unwrap()
    }

    fn weighted(
        objs: &[usize],
        edges: &[(usize, usize, usize, f64)],
    ) -> WeightedSceneGraph {
        let v = vocab();
        WeightedSceneGraph::new(
            objs.iter().map(|&c| SceneObject::new(c)).collect(),
            edges.iter().map(|&(i, r, j, w)| (EdgeKey::new(i, r, j), w)),
            (objs.len(), v.n_relations()),
        )
        .unwrap()
    }

    #[test]
    fn no_edges_boxes_depend_only_on_category() {
        let model = GcnModel::new(2, 2, dims(), 42);
        let g = weighted(&[0, 1, 0], &[]);
        let (layout, _) = gcn_forward(&g, &model).unwrap();
        assert_eq!(layout.boxes()[0], layout.boxes()[2]);
        assert_ne!(layout.boxes()[0], layout.boxes()[1]);
    }

    #[test]
    fn zeroed_network_emits_sigmoid_of_bias() {
        let mut model = GcnModel::new(2, 2, dims(), 42);
        for mlp in model.layer_mlps.iter_mut().chain([&mut model.box_head]) {
            for l in &mut mlp.layers {
                l.weight.data.iter_mut().for_each(|w| *w = 0.0);
                l.bias.iter_mut().for_each(|b| *b = 0.0);
            }
        }
        let g = weighted(&[0, 1], &[(0, 0, 1, 0.6)]);
        let (layout, _) = gcn_forward(&g, &model).unwrap();
        for b in layout.boxes() {
            assert_eq!(*b, [0.5, 0.5, 0.5, 0.5]);
        }
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let model = GcnModel::new(2, 2, dims(), 7);
        let g = weighted(&[0, 1, 1], &[(0, 0, 1, 0.8), (2, 1, 0, 0.3)]);
        let (a, _) = gcn_forward(&g, &model).unwrap();
        let (b, _) = gcn_forward(&g, &model).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_equivariance() {
        let model = GcnModel::new(2, 2, dims(), 11);
        let g = weighted(&[0, 1, 0, 1], &[(0, 0, 1, 0.9), (1, 1, 2, 0.4), (3, 0, 2, 0.7)]);
        // permutation pi: old -> new
        let pi = [2usize, 0, 3, 1];
        let objs_p: Vec<usize> = {
            let mut v = vec![0; 4];
            for (old, &new) in pi.iter().enumerate() {
                v[new] = g.objects()[old].category;
            }
            v
        };
        let edges_p: Vec<(usize, usize, usize, f64)> = g
            .edges()
            .map(|(e, w)| (pi[e.subject], e.relation, pi[e.object], w))
            .collect();
        let gp = weighted(&objs_p, &edges_p);
        let (a, _) = gcn_forward(&g, &model).unwrap();
        let (b, _) = gcn_forward(&gp, &model).unwrap();
        for old in 0..4 {
            for k in 0..4 {
                assert!(
                    (a.boxes()[old][k] - b.boxes()[pi[old]][k]).abs() < 1e-9,
                    "node {old} coord {k}"
                );
            }
        }
    }

    #[test]
    fn boxes_always_inside_unit_interval() {
        let mut rng = seed::rng(13);
        let model = GcnModel::new(2, 2, dims(), 5);
        for _ in 0..20 {
            let n = rng.random_range(1..6);
            let objs: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < 0.3 {
                        edges.push((i, rng.random_range(0..2), j, rng.random_range(0.05..1.0)));
                    }
                }
            }
            let g = weighted(&objs, &edges);
            let (layout, _) = gcn_forward(&g, &model).unwrap();
            for b in layout.boxes() {
                for &c in b {
                    assert!(c > 0.0 && c < 1.0);
                }
            }
        }
    }

    #[test]
    fn constant_messages_have_zero_weight_gradient() {
        // zero weights + nonzero biases: F_s output constant, and with a
        // single incident edge v_next equals the message, so dv/dw = 0
        let mut model = GcnModel::new(2, 2, dims(), 42);
        for mlp in &mut model.layer_mlps {
            for l in &mut mlp.layers {
                l.weight.data.iter_mut().for_each(|w| *w = 0.0);
            }
            for (i, b) in mlp.layers[0].bias.iter_mut().enumerate() {
                *b = 0.1 + i as f64 * 0.01;
            }
        }
        let g = weighted(&[0, 1], &[(0, 0, 1, 0.6)]);
        let (_, tape) = gcn_forward(&g, &model).unwrap();
        let (_, dw) = gcn_backward(&model, &tape, &[[1.0; 4], [1.0; 4]]).unwrap();
        assert!(dw.iter().all(|&x| x == 0.0), "dw = {dw:?}");
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let model = GcnModel::new(2, 2, dims(), 3);
        let g = weighted(&[0, 1], &[(0, 0, 1, 0.5)]);
        let (_, tape) = gcn_forward(&g, &model).unwrap();
        let (grads, dw) = gcn_backward(&model, &tape, &[[0.0; 4], [0.0; 4]]).unwrap();
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&x| x == 0.0)));
        assert!(dw.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mismatched_tape_is_consistency_error() {
        let model = GcnModel::new(2, 2, dims(), 3);
        let g = weighted(&[0, 1], &[(0, 0, 1, 0.5)]);
        let (_, tape) = gcn_forward(&g, &model).unwrap();
        assert!(matches!(
            gcn_backward(&model, &tape, &[[0.0; 4]]),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seed::rng(31);
        let model = GcnModel::new(2, 2, dims(), 19);
        let objs: Vec<usize> = vec![0, 1, 0, 1, 0];
        let mut edges = Vec::new();
        for i in 0..5usize {
            for j in 0..5usize {
                if i != j && rng.random::<f64>() < 0.35 {
                    edges.push((i, rng.random_range(0..2usize), j, rng.random_range(0.1..0.9)));
                }
            }
        }
        assert!(!edges.is_empty());
        let g = weighted(&objs, &edges);
        let coeffs: Vec<[f64; 4]> = (0..5)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let objective = |m: &GcnModel, graph: &WeightedSceneGraph| -> f64 {
            let (layout, _) = gcn_forward(graph, m).unwrap();
            layout
                .boxes()
                .iter()
                .zip(&coeffs)
                .map(|(b, c)| b.iter().zip(c).map(|(x, y)| x * y).sum::<f64>())
                .sum()
        };

        let (_, tape) = gcn_forward(&g, &model).unwrap();
        let (grads, dw) = gcn_backward(&model, &tape, &coeffs).unwrap();

        let h = 1e-6;
        let rel_ok = |fd: f64, got: f64| (fd - got).abs() <= 1e-4 * fd.abs().max(got.abs()).max(1e-6);

        // every model tensor, every coordinate
        let flat_grads: Vec<f64> = grads.tensors().iter().flat_map(|t| t.iter().copied()).collect();
        let n_params = flat_grads.len();
        for p in 0..n_params {
            let mut plus = model.clone();
            let mut idx = p;
            for t in plus.tensors_mut() {
                if idx < t.len() {
                    t[idx] += h;
                    break;
                }
                idx -= t.len();
            }
            let mut minus = model.clone();
            let mut idx = p;
            for t in minus.tensors_mut() {
                if idx < t.len() {
                    t[idx] -= h;
                    break;
                }
                idx -= t.len();
            }
            let fd = (objective(&plus, &g) - objective(&minus, &g)) / (2.0 * h);
            assert!(rel_ok(fd, flat_grads[p]), "param {p}: fd {fd} vs {}", flat_grads[p]);
        }

        // edge weights
        for (idx, (key, w)) in tape.edges.iter().enumerate() {
            let perturbed = |delta: f64| -> WeightedSceneGraph {
                WeightedSceneGraph::new(
                    g.objects().to_vec(),
                    g.edges().map(|(e, ew)| (*e, if e == key { w + delta } else { ew })),
                    (g.n_nodes(), g.n_relations()),
                )
                .unwrap()
            };
            let fd = (objective(&model, &perturbed(h)) - objective(&model, &perturbed(-h)))
                / (2.0 * h);
            assert!(rel_ok(fd, dw[idx]), "weight {idx}: fd {fd} vs {}", dw[idx]);
        }
    }
}
