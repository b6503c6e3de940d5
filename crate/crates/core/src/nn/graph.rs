//! Reverse-mode autodiff over a flat computation tape.
//!
//! Each forward op appends a node holding its value, parent ids, and a
//! backward closure mapping the upstream gradient to per-parent gradients.
//! [`Graph::backward`] walks the tape in reverse, accumulating gradients in
//! a fixed order, so results are bit-deterministic.
//!
//! Shapes are validated with assertions: a shape mismatch is a programming
//! error, not a runtime condition.

use super::mask::AttentionMask;
use super::tensor::Tensor;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

type BackwardFn = Box<dyn Fn(&Tensor, &[&Tensor], &Tensor) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
}

/// Gradients keyed by [`Var`], produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, parents: Vec<usize>, backward: Option<BackwardFn>) -> Var {
        self.nodes.push(Node {
            value,
            parents,
            backward,
        });
        Var(self.nodes.len() - 1)
    }

    /// Insert a leaf tensor.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Vec::new(), None)
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "add shape mismatch");
        let mut out = ta.clone();
        out.add_assign(tb);
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(|g, _, _| vec![g.clone(), g.clone()])),
        )
    }

    /// Multiply by a compile-time constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g, _, _| vec![g.map(|x| x * c)])),
        )
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "mul shape mismatch");
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_vec(ta.shape(), data);
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(|g, parents, _| {
                let (a, b) = (parents[0], parents[1]);
                let da = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(b.data()).map(|(g, y)| g * y).collect(),
                );
                let db = Tensor::from_vec(
                    g.shape(),
                    g.data().iter().zip(a.data()).map(|(g, x)| g * x).collect(),
                );
                vec![da, db]
            })),
        )
    }

    /// Elementwise logistic sigmoid.
    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(
            out,
            vec![a.0],
            Some(Box::new(|g, _, own| {
                vec![Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(own.data())
                        .map(|(g, s)| g * s * (1.0 - s))
                        .collect(),
                )]
            })),
        )
    }

    /// 2-d matrix product `a @ b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(|g, parents, _| {
                vec![g.matmul_nt(parents[1]), parents[0].matmul_tn(g)]
            })),
        )
    }

    /// 2-d matrix product `a @ b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul_nt(self.value(b));
        self.push(
            out,
            vec![a.0, b.0],
            Some(Box::new(|g, parents, _| {
                vec![g.matmul(parents[1]), g.matmul_tn(parents[0])]
            })),
        )
    }

    /// Affine map `x @ w + bias`, bias broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, bias: Option<Var>) -> Var {
        let mut out = self.value(x).matmul(self.value(w));
        let mut parents = vec![x.0, w.0];
        if let Some(b) = bias {
            let tb = self.value(b);
            let (_, m) = out.dims2();
            assert_eq!(tb.shape(), [m], "bias shape mismatch");
            let (n, _) = out.dims2();
            for i in 0..n {
                for j in 0..m {
                    let v = out.get2(i, j) + tb.data()[j];
                    out.set2(i, j, v);
                }
            }
            parents.push(b.0);
        }
        let has_bias = bias.is_some();
        self.push(
            out,
            parents,
            Some(Box::new(move |g, parents, _| {
                let mut grads = vec![g.matmul_nt(parents[1]), parents[0].matmul_tn(g)];
                if has_bias {
                    let (n, m) = g.dims2();
                    let mut db = Tensor::zeros(&[m]);
                    for i in 0..n {
                        for j in 0..m {
                            db.data_mut()[j] += g.get2(i, j);
                        }
                    }
                    grads.push(db);
                }
                grads
            })),
        )
    }

    /// Gather rows of `table` at `indices`; the gradient scatters back.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Var {
        let t = self.value(table);
        let (v, d) = t.dims2();
        for &i in indices {
            assert!(i < v, "embedding index {i} out of range ({v} rows)");
        }
        let mut out = Tensor::zeros(&[indices.len(), d]);
        for (r, &i) in indices.iter().enumerate() {
            out.data_mut()[r * d..(r + 1) * d].copy_from_slice(t.row(i));
        }
        let idx: Vec<usize> = indices.to_vec();
        self.push(
            out,
            vec![table.0],
            Some(Box::new(move |g, parents, _| {
                let (v, d) = parents[0].dims2();
                let mut dt = Tensor::zeros(&[v, d]);
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..d {
                        dt.data_mut()[i * d + c] += g.get2(r, c);
                    }
                }
                vec![dt]
            })),
        )
    }

    /// 1-d convolution over `[T, c_in]` with kernel `[k, c_in, c_out]` and
    /// bias `[c_out]`. Causal pads `k-1` zeros on the left; otherwise the
    /// kernel width must be odd and padding is symmetric.
    pub fn conv1d(&mut self, x: Var, w: Var, bias: Var, causal: bool) -> Var {
        let (t_len, c_in) = self.value(x).dims2();
        let wshape = self.value(w).shape().to_vec();
        assert_eq!(wshape.len(), 3, "conv kernel must be [k, c_in, c_out]");
        let (k, wc_in, c_out) = (wshape[0], wshape[1], wshape[2]);
        assert_eq!(c_in, wc_in, "conv channel mismatch: input {c_in}, kernel {wc_in}");
        assert_eq!(self.value(bias).shape(), [c_out], "conv bias shape");
        if !causal {
            assert!(k % 2 == 1, "encoder conv kernel width must be odd");
        }
        let pad_left = if causal { k - 1 } else { (k - 1) / 2 };

        let xv = self.value(x).clone();
        let wv = self.value(w).clone();
        let bv = self.value(bias).clone();
        let mut out = Tensor::zeros(&[t_len, c_out]);
        for t in 0..t_len {
            let orow = &mut out.data_mut()[t * c_out..(t + 1) * c_out];
            orow.copy_from_slice(bv.data());
            for j in 0..k {
                let s = t + j;
                if s < pad_left || s - pad_left >= t_len {
                    continue;
                }
                let s = s - pad_left;
                let xrow = &xv.data()[s * c_in..(s + 1) * c_in];
                for (ci, &xval) in xrow.iter().enumerate() {
                    if xval == 0.0 {
                        continue;
                    }
                    let wrow = &wv.data()[(j * c_in + ci) * c_out..(j * c_in + ci + 1) * c_out];
                    for (o, &wk) in orow.iter_mut().zip(wrow) {
                        *o += xval * wk;
                    }
                }
            }
        }
        self.push(
            out,
            vec![x.0, w.0, bias.0],
            Some(Box::new(move |g, parents, _| {
                let x = parents[0];
                let w = parents[1];
                let (t_len, c_in) = x.dims2();
                let c_out = w.shape()[2];
                let k = w.shape()[0];
                let mut dx = Tensor::zeros(&[t_len, c_in]);
                let mut dw = Tensor::zeros(w.shape());
                let mut db = Tensor::zeros(&[c_out]);
                for t in 0..t_len {
                    let grow = &g.data()[t * c_out..(t + 1) * c_out];
                    for (co, &gv) in grow.iter().enumerate() {
                        db.data_mut()[co] += gv;
                    }
                    for j in 0..k {
                        let s = t + j;
                        if s < pad_left || s - pad_left >= t_len {
                            continue;
                        }
                        let s = s - pad_left;
                        for ci in 0..c_in {
                            let wbase = (j * c_in + ci) * c_out;
                            let mut acc = 0.0;
                            for (co, &gv) in grow.iter().enumerate() {
                                acc += gv * w.data()[wbase + co];
                                dw.data_mut()[wbase + co] += gv * x.data()[s * c_in + ci];
                            }
                            dx.data_mut()[s * c_in + ci] += acc;
                        }
                    }
                }
                vec![dx, dw, db]
            })),
        )
    }

    /// Gated linear unit: split `[n, 2c]` into `(a, b)` and return
    /// `a * sigmoid(b)`.
    pub fn glu(&mut self, x: Var) -> Var {
        let (n, two_c) = self.value(x).dims2();
        assert!(two_c % 2 == 0, "glu input channels must be even");
        let c = two_c / 2;
        let xv = self.value(x);
        let mut out = Tensor::zeros(&[n, c]);
        for i in 0..n {
            for j in 0..c {
                let a = xv.get2(i, j);
                let b = xv.get2(i, c + j);
                out.set2(i, j, a * sigmoid(b));
            }
        }
        self.push(
            out,
            vec![x.0],
            Some(Box::new(move |g, parents, _| {
                let x = parents[0];
                let (n, two_c) = x.dims2();
                let c = two_c / 2;
                let mut dx = Tensor::zeros(&[n, two_c]);
                for i in 0..n {
                    for j in 0..c {
                        let a = x.get2(i, j);
                        let s = sigmoid(x.get2(i, c + j));
                        let gv = g.get2(i, j);
                        dx.set2(i, j, gv * s);
                        dx.set2(i, c + j, gv * a * s * (1.0 - s));
                    }
                }
                vec![dx]
            })),
        )
    }

    /// Append one zero-valued column (the null-slot score).
    pub fn append_zero_col(&mut self, a: Var) -> Var {
        let (n, m) = self.value(a).dims2();
        let av = self.value(a);
        let mut out = Tensor::zeros(&[n, m + 1]);
        for i in 0..n {
            for j in 0..m {
                out.set2(i, j, av.get2(i, j));
            }
        }
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g, _, _| {
                let (n, m1) = g.dims2();
                let m = m1 - 1;
                let mut da = Tensor::zeros(&[n, m]);
                for i in 0..n {
                    for j in 0..m {
                        da.set2(i, j, g.get2(i, j));
                    }
                }
                vec![da]
            })),
        )
    }

    /// Set disallowed positions to negative infinity; gradient is zero
    /// there. The tensor must have the mask's `rows x (keys + 1)` shape.
    pub fn mask_fill(&mut self, a: Var, mask: &AttentionMask) -> Var {
        let (n, m) = self.value(a).dims2();
        assert_eq!(
            (n, m),
            (mask.rows(), mask.keys() + 1),
            "mask shape mismatch"
        );
        let allow: Vec<bool> = mask.flags().to_vec();
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(&allow)
            .map(|(&x, &ok)| if ok { x } else { f64::NEG_INFINITY })
            .collect();
        let out = Tensor::from_vec(&[n, m], data);
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g, _, _| {
                vec![Tensor::from_vec(
                    g.shape(),
                    g.data()
                        .iter()
                        .zip(&allow)
                        .map(|(&g, &ok)| if ok { g } else { 0.0 })
                        .collect(),
                )]
            })),
        )
    }

    /// Row-wise softmax, stable under -inf entries (their weight is exactly
    /// zero). Every row must contain at least one finite entry.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (n, m) = self.value(a).dims2();
        let av = self.value(a);
        let mut out = Tensor::zeros(&[n, m]);
        for i in 0..n {
            let row = av.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(max.is_finite(), "softmax row {i} has no allowed entries");
            let mut sum = 0.0;
            for j in 0..m {
                let e = if row[j] == f64::NEG_INFINITY {
                    0.0
                } else {
                    (row[j] - max).exp()
                };
                out.set2(i, j, e);
                sum += e;
            }
            for j in 0..m {
                let v = out.get2(i, j) / sum;
                out.set2(i, j, v);
            }
        }
        self.push(
            out,
            vec![a.0],
            Some(Box::new(|g, _, own| {
                let (n, m) = g.dims2();
                let mut da = Tensor::zeros(&[n, m]);
                for i in 0..n {
                    let dot: f64 = (0..m).map(|j| g.get2(i, j) * own.get2(i, j)).sum();
                    for j in 0..m {
                        da.set2(i, j, own.get2(i, j) * (g.get2(i, j) - dot));
                    }
                }
                vec![da]
            })),
        )
    }

    /// Columns `[start, end)` of a 2-d tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let (n, m) = self.value(a).dims2();
        assert!(start <= end && end <= m, "slice range out of bounds");
        let av = self.value(a);
        let width = end - start;
        let mut out = Tensor::zeros(&[n, width]);
        for i in 0..n {
            for j in 0..width {
                out.set2(i, j, av.get2(i, start + j));
            }
        }
        self.push(
            out,
            vec![a.0],
            Some(Box::new(move |g, parents, _| {
                let (n, m) = parents[0].dims2();
                let mut da = Tensor::zeros(&[n, m]);
                for i in 0..n {
                    for j in 0..(end - start) {
                        da.set2(i, start + j, g.get2(i, j));
                    }
                }
                vec![da]
            })),
        )
    }

    /// Concatenate 2-d tensors along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let n = self.value(parts[0]).dims2().0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (rows, cols) = self.value(p).dims2();
                assert_eq!(rows, n, "concat row mismatch");
                cols
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = Tensor::zeros(&[n, total]);
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let pv = self.value(p);
            for i in 0..n {
                for j in 0..w {
                    out.set2(i, offset + j, pv.get2(i, j));
                }
            }
            offset += w;
        }
        let widths_cl = widths.clone();
        self.push(
            out,
            parts.iter().map(|v| v.0).collect(),
            Some(Box::new(move |g, _, _| {
                let n = g.dims2().0;
                let mut grads = Vec::with_capacity(widths_cl.len());
                let mut offset = 0;
                for &w in &widths_cl {
                    let mut dp = Tensor::zeros(&[n, w]);
                    for i in 0..n {
                        for j in 0..w {
                            dp.set2(i, j, g.get2(i, offset + j));
                        }
                    }
                    grads.push(dp);
                    offset += w;
                }
                grads
            })),
        )
    }

    /// Mean per-token negative log likelihood in nats: softmax over each
    /// logit row, `-log p(target)` averaged over rows.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let (n, v) = self.value(logits).dims2();
        assert_eq!(n, targets.len(), "one target per logit row");
        for &t in targets {
            assert!(t < v, "target {t} out of range ({v} classes)");
        }
        let lv = self.value(logits);
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = lv.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let out = Tensor::scalar(total / n as f64);
        let targets_cl: Vec<usize> = targets.to_vec();
        self.push(
            out,
            vec![logits.0],
            Some(Box::new(move |g, parents, _| {
                let logits = parents[0];
                let (n, v) = logits.dims2();
                let scale = g.item() / n as f64;
                let mut dl = Tensor::zeros(&[n, v]);
                for (i, &t) in targets_cl.iter().enumerate() {
                    let row = logits.row(i);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
                    for j in 0..v {
                        let p = (row[j] - max).exp() / sum;
                        let indicator = if j == t { 1.0 } else { 0.0 };
                        dl.set2(i, j, scale * (p - indicator));
                    }
                }
                vec![dl]
            })),
        )
    }

    /// Mean binary cross-entropy from logits, numerically stable.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.numel(), targets.len(), "one target per logit");
        let n = targets.len();
        let mut total = 0.0;
        for (&z, &y) in lv.data().iter().zip(targets) {
            total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        }
        let out = Tensor::scalar(total / n as f64);
        let targets_cl: Vec<f64> = targets.to_vec();
        self.push(
            out,
            vec![logits.0],
            Some(Box::new(move |g, parents, _| {
                let z = parents[0];
                let scale = g.item() / targets_cl.len() as f64;
                let data = z
                    .data()
                    .iter()
                    .zip(&targets_cl)
                    .map(|(&z, &y)| scale * (sigmoid(z) - y))
                    .collect();
                vec![Tensor::from_vec(z.shape(), data)]
            })),
        )
    }

    /// Mean of `-ln(sum of weights[row, cols])` over the given groups; used
    /// to supervise attention mass onto sets of allowed positions. Weights
    /// must be positive at the selected positions.
    pub fn neg_log_mass(&mut self, weights: Var, groups: &[(usize, Vec<usize>)]) -> Var {
        assert!(!groups.is_empty(), "neg_log_mass needs at least one group");
        let wv = self.value(weights);
        let mut total = 0.0;
        for (row, cols) in groups {
            let mass: f64 = cols.iter().map(|&c| wv.get2(*row, c)).sum();
            total += -(mass.max(1e-300)).ln();
        }
        let out = Tensor::scalar(total / groups.len() as f64);
        let groups_cl: Vec<(usize, Vec<usize>)> = groups.to_vec();
        self.push(
            out,
            vec![weights.0],
            Some(Box::new(move |g, parents, _| {
                let w = parents[0];
                let (n, m) = w.dims2();
                let scale = g.item() / groups_cl.len() as f64;
                let mut dw = Tensor::zeros(&[n, m]);
                for (row, cols) in &groups_cl {
                    let mass: f64 = cols.iter().map(|&c| w.get2(*row, c)).sum();
                    let mass = mass.max(1e-300);
                    for &c in cols {
                        let v = dw.get2(*row, c) - scale / mass;
                        dw.set2(*row, c, v);
                    }
                }
                vec![dw]
            })),
        )
    }

    /// Reverse pass from a scalar loss. Gradients accumulate in reverse
    /// insertion order; leaves keep their totals for retrieval.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(
            self.nodes[loss.0].value.numel(),
            1,
            "backward needs a scalar loss"
        );
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_vec(
            self.nodes[loss.0].value.shape(),
            vec![1.0],
        ));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].clone() else { continue };
            let node = &self.nodes[id];
            let Some(backward) = &node.backward else {
                continue;
            };
            let parent_vals: Vec<&Tensor> =
                node.parents.iter().map(|&p| &self.nodes[p].value).collect();
            let parent_grads = backward(&g, &parent_vals, &node.value);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (&p, pg) in node.parents.iter().zip(parent_grads) {
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&pg),
                    slot => *slot = Some(pg),
                }
            }
        }
        Gradients { grads }
    }
}

/// Convolution + GLU block: the kernel produces `2c` channels, the gated
/// half squashes the other, and the input is added back when channel counts
/// match.
pub fn conv1d_glu(g: &mut Graph, x: Var, w: Var, bias: Var, causal: bool) -> Var {
    let (_, c_in) = g.value(x).dims2();
    let c_out = g.value(w).shape()[2];
    assert!(c_out.is_multiple_of(2), "conv1d_glu kernel must produce 2c channels");
    let conv = g.conv1d(x, w, bias, causal);
    let gated = g.glu(conv);
    if c_out / 2 == c_in {
        g.add(gated, x)
    } else {
        gated
    }
}

/// Scaled dot-product attention with a null slot: scores `q k^T / sqrt(d)`
/// gain a zero-score null column, disallowed positions drop to -inf, and the
/// weights row-normalize. The null slot contributes a zero value vector.
/// Returns the output and the full weight matrix (null column included).
pub fn attention(
    g: &mut Graph,
    queries: Var,
    keys: Var,
    values: Var,
    mask: &AttentionMask,
) -> (Var, Var) {
    let (_, d) = g.value(queries).dims2();
    let (keys_len, _) = g.value(keys).dims2();
    assert_eq!(mask.keys(), keys_len, "mask key count mismatch");
    let scores = g.matmul_nt(queries, keys);
    let scaled = g.scale(scores, 1.0 / (d as f64).sqrt());
    let with_null = g.append_zero_col(scaled);
    let masked = g.mask_fill(with_null, mask);
    let weights = g.softmax_rows(masked);
    let real = g.slice_cols(weights, 0, keys_len);
    let out = g.matmul(real, values);
    (out, weights)
}
