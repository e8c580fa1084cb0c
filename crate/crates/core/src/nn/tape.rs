//! Reverse-mode autodiff over a flat operation tape.
//!
//! `forward` composes nodes; `backward` walks the tape once in reverse and
//! accumulates exact gradients into the parameter store. Calling `backward`
//! again without zeroing doubles the stored gradients (plain accumulation).

use super::tensor::{gemm, gemm_at, gemm_bt, Tensor};

pub type ParamId = usize;
pub type NodeId = usize;

/// Named trainable parameters with persistent gradient buffers.
#[derive(Clone, Debug)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name {name}"
        );
        self.names.push(name.to_string());
        self.tensors.push(tensor.with_grad());
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|s| s.as_str()).zip(self.tensors.iter())
    }

    /// FNV-1a over every parameter payload, in id order. Order and values
    /// pin the full parameter state.
    pub fn params_hash(&self) -> u64 {
        let mut h = crate::io::Fnv::new();
        for t in &self.tensors {
            for v in &t.data {
                h.write_u32(v.to_bits());
            }
        }
        h.finish()
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

enum Op {
    /// Constant input; no gradient flows.
    Input,
    Param(ParamId),
    /// [m,k] x [k,n].
    MatMul(NodeId, NodeId),
    /// [m,n] + row [1,n] broadcast over rows.
    AddRow(NodeId, NodeId),
    /// [1,n] replicated to [m,n].
    BroadcastRow(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f32),
    AddConst(NodeId),
    Elu(NodeId),
    Exp(NodeId),
    /// [m,n] -> [m,1], summing each row left to right.
    SumRows(NodeId),
    /// [m,n] -> [1,1], mean over all elements.
    Mean(NodeId),
    /// Clamp with zero gradient outside the bounds.
    Clamp(NodeId, f32, f32),
    /// Elementwise minimum; gradient follows the winning side (ties: first).
    MinElem(NodeId, NodeId),
}

struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f32>,
}

/// One forward graph. Build nodes, read values, call `backward` on a scalar.
pub struct Tape {
    nodes: Vec<Node>,
    did_forward: bool,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            did_forward: false,
        }
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f32>) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
        });
        self.did_forward = true;
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &[f32] {
        &self.nodes[id].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        (self.nodes[id].rows, self.nodes[id].cols)
    }

    pub fn input(&mut self, rows: usize, cols: usize, data: Vec<f32>) -> NodeId {
        self.push(Op::Input, rows, cols, data)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let t = store.get(id);
        let (rows, cols) = match t.shape.len() {
            1 => (1, t.shape[0]),
            2 => (t.shape[0], t.shape[1]),
            r => panic!("tape params must be rank 1 or 2, got rank {r}"),
        };
        self.push(Op::Param(id), rows, cols, t.data.clone())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, ka) = self.shape(a);
        let (kb, n) = self.shape(b);
        assert_eq!(ka, kb, "matmul inner dims {ka} vs {kb}");
        let mut out = vec![0.0; m * n];
        gemm(m, ka, n, &self.nodes[a].value, &self.nodes[b].value, &mut out);
        self.push(Op::MatMul(a, b), m, n, out)
    }

    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> NodeId {
        let (m, n) = self.shape(x);
        let (rr, rn) = self.shape(row);
        assert_eq!(rr, 1, "bias must be a row vector");
        assert_eq!(rn, n, "bias width mismatch");
        let mut out = self.nodes[x].value.clone();
        let b = &self.nodes[row].value;
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += b[j];
            }
        }
        self.push(Op::AddRow(x, row), m, n, out)
    }

    pub fn broadcast_row(&mut self, row: NodeId, rows: usize) -> NodeId {
        let (rr, n) = self.shape(row);
        assert_eq!(rr, 1, "broadcast source must be a row vector");
        let src = self.nodes[row].value.clone();
        let mut out = vec![0.0; rows * n];
        for i in 0..rows {
            out[i * n..(i + 1) * n].copy_from_slice(&src);
        }
        self.push(Op::BroadcastRow(row), rows, n, out)
    }

    fn binary_same_shape(&mut self, a: NodeId, b: NodeId, f: impl Fn(f32, f32) -> f32, op: Op) -> NodeId {
        let (m, n) = self.shape(a);
        assert_eq!(self.shape(b), (m, n), "shape mismatch");
        let out: Vec<f32> = self.nodes[a]
            .value
            .iter()
            .zip(self.nodes[b].value.iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(op, m, n, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn min_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, |x, y| if x <= y { x } else { y }, Op::MinElem(a, b))
    }

    pub fn scale(&mut self, x: NodeId, c: f32) -> NodeId {
        let (m, n) = self.shape(x);
        let out: Vec<f32> = self.nodes[x].value.iter().map(|&v| v * c).collect();
        self.push(Op::Scale(x, c), m, n, out)
    }

    pub fn add_const(&mut self, x: NodeId, c: f32) -> NodeId {
        let (m, n) = self.shape(x);
        let out: Vec<f32> = self.nodes[x].value.iter().map(|&v| v + c).collect();
        self.push(Op::AddConst(x), m, n, out)
    }

    pub fn elu(&mut self, x: NodeId) -> NodeId {
        let (m, n) = self.shape(x);
        let out: Vec<f32> = self.nodes[x].value.iter().map(|&v| elu(v)).collect();
        self.push(Op::Elu(x), m, n, out)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let (m, n) = self.shape(x);
        let out: Vec<f32> = self.nodes[x].value.iter().map(|&v| v.exp()).collect();
        self.push(Op::Exp(x), m, n, out)
    }

    pub fn clamp(&mut self, x: NodeId, lo: f32, hi: f32) -> NodeId {
        let (m, n) = self.shape(x);
        let out: Vec<f32> = self.nodes[x].value.iter().map(|&v| v.clamp(lo, hi)).collect();
        self.push(Op::Clamp(x, lo, hi), m, n, out)
    }

    pub fn sum_rows(&mut self, x: NodeId) -> NodeId {
        let (m, n) = self.shape(x);
        let v = &self.nodes[x].value;
        let mut out = vec![0.0; m];
        for i in 0..m {
            let mut acc = 0.0f32;
            for j in 0..n {
                acc += v[i * n + j];
            }
            out[i] = acc;
        }
        self.push(Op::SumRows(x), m, 1, out)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let (m, n) = self.shape(x);
        let v = &self.nodes[x].value;
        let mut acc = 0.0f32;
        for &e in v {
            acc += e;
        }
        let out = vec![acc / (m * n) as f32];
        self.push(Op::Mean(x), 1, 1, out)
    }

    /// Dense layer: x [m,in] times w [in,out] plus bias [1,out].
    pub fn linear(&mut self, store: &ParamStore, x: NodeId, w: ParamId, b: ParamId) -> NodeId {
        let wn = self.param(store, w);
        let bn = self.param(store, b);
        let mm = self.matmul(x, wn);
        self.add_row(mm, bn)
    }

    /// Reverse pass from a scalar node; accumulates parameter gradients into
    /// the store. Panics if the node is not 1x1 or the tape is empty.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) {
        assert!(self.did_forward, "backward called before any forward nodes");
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar loss");

        let mut grads: Vec<Vec<f32>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.rows * n.cols])
            .collect();
        grads[loss][0] = 1.0;

        for id in (0..=loss).rev() {
            let node = &self.nodes[id];
            let g = std::mem::take(&mut grads[id]);
            if g.iter().all(|&v| v == 0.0) {
                grads[id] = g;
                continue;
            }
            match node.op {
                Op::Input => {}
                Op::Param(pid) => {
                    let t = store.get_mut(pid);
                    let buf = t.grad.as_mut().expect("params carry grads");
                    for (o, &v) in buf.iter_mut().zip(g.iter()) {
                        *o += v;
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, n) = (node.rows, node.cols);
                    let k = self.nodes[a].cols;
                    // da += g x b^T ; db += a^T x g
                    let (ga, gb) = two_muts(&mut grads, a, b);
                    gemm_bt(m, n, k, &g, &self.nodes[b].value, ga);
                    gemm_at(m, k, n, &self.nodes[a].value, &g, gb);
                }
                Op::AddRow(x, row) => {
                    let (m, n) = (node.rows, node.cols);
                    let (gx, gr) = two_muts(&mut grads, x, row);
                    for (o, &v) in gx.iter_mut().zip(g.iter()) {
                        *o += v;
                    }
                    for i in 0..m {
                        for j in 0..n {
                            gr[j] += g[i * n + j];
                        }
                    }
                }
                Op::BroadcastRow(row) => {
                    let (m, n) = (node.rows, node.cols);
                    let gr = &mut grads[row];
                    for i in 0..m {
                        for j in 0..n {
                            gr[j] += g[i * n + j];
                        }
                    }
                }
                Op::Add(a, b) => {
                    if a == b {
                        let ga = &mut grads[a];
                        for (o, &v) in ga.iter_mut().zip(g.iter()) {
                            *o += 2.0 * v;
                        }
                    } else {
                        let (ga, gb) = two_muts(&mut grads, a, b);
                        for (o, &v) in ga.iter_mut().zip(g.iter()) {
                            *o += v;
                        }
                        for (o, &v) in gb.iter_mut().zip(g.iter()) {
                            *o += v;
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if a == b {
                        // x - x: gradients cancel.
                    } else {
                        let (ga, gb) = two_muts(&mut grads, a, b);
                        for (o, &v) in ga.iter_mut().zip(g.iter()) {
                            *o += v;
                        }
                        for (o, &v) in gb.iter_mut().zip(g.iter()) {
                            *o -= v;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    if a == b {
                        let va = &self.nodes[a].value;
                        let ga = &mut grads[a];
                        for i in 0..g.len() {
                            ga[i] += 2.0 * g[i] * va[i];
                        }
                    } else {
                        let (ga, gb) = two_muts(&mut grads, a, b);
                        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
                        for i in 0..g.len() {
                            ga[i] += g[i] * vb[i];
                            gb[i] += g[i] * va[i];
                        }
                    }
                }
                Op::MinElem(a, b) => {
                    if a == b {
                        let ga = &mut grads[a];
                        for (o, &v) in ga.iter_mut().zip(g.iter()) {
                            *o += v;
                        }
                    } else {
                        let (ga, gb) = two_muts(&mut grads, a, b);
                        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
                        for i in 0..g.len() {
                            if va[i] <= vb[i] {
                                ga[i] += g[i];
                            } else {
                                gb[i] += g[i];
                            }
                        }
                    }
                }
                Op::Scale(x, c) => {
                    let gx = &mut grads[x];
                    for (o, &v) in gx.iter_mut().zip(g.iter()) {
                        *o += v * c;
                    }
                }
                Op::AddConst(x) => {
                    let gx = &mut grads[x];
                    for (o, &v) in gx.iter_mut().zip(g.iter()) {
                        *o += v;
                    }
                }
                Op::Elu(x) => {
                    let gx = &mut grads[x];
                    for i in 0..g.len() {
                        gx[i] += g[i] * elu_grad_from_output(node.value[i]);
                    }
                }
                Op::Exp(x) => {
                    let gx = &mut grads[x];
                    for i in 0..g.len() {
                        gx[i] += g[i] * node.value[i];
                    }
                }
                Op::Clamp(x, lo, hi) => {
                    let gx = &mut grads[x];
                    let vx = &self.nodes[x].value;
                    for i in 0..g.len() {
                        if vx[i] > lo && vx[i] < hi {
                            gx[i] += g[i];
                        }
                    }
                }
                Op::SumRows(x) => {
                    let n = self.nodes[x].cols;
                    let gx = &mut grads[x];
                    for i in 0..node.rows {
                        for j in 0..n {
                            gx[i * n + j] += g[i];
                        }
                    }
                }
                Op::Mean(x) => {
                    let count = self.nodes[x].value.len() as f32;
                    let gx = &mut grads[x];
                    let gv = g[0] / count;
                    for o in gx.iter_mut() {
                        *o += gv;
                    }
                }
            }
            grads[id] = g;
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
pub fn elu(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

/// ELU derivative recovered from the activation output.
#[inline]
pub fn elu_grad_from_output(y: f32) -> f32 {
    if y > 0.0 {
        1.0
    } else {
        y + 1.0
    }
}

fn two_muts(v: &mut [Vec<f32>], a: usize, b: usize) -> (&mut Vec<f32>, &mut Vec<f32>) {
    assert_ne!(a, b, "node used twice in one binary op needs distinct slots");
    if a < b {
        let (l, r) = v.split_at_mut(b);
        (&mut l[a], &mut r[0])
    } else {
        let (l, r) = v.split_at_mut(a);
        (&mut r[0], &mut l[b])
    }
}
