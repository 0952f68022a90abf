//! Tape-based reverse-mode differentiation over the handful of primitives
//! the adaptation losses are built from.
//!
//! A [`Graph`] is built eagerly: every op computes its value immediately and
//! records its parents. [`Graph::backward`] walks the tape in reverse and only
//! visits nodes that depend on a trainable leaf.

use crate::error::{invalid, shape_err, Error, Result};

use super::{ParamSet, Tensor};

/// Probability floor used inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    NormalizeRows(Var),
    SoftmaxRows(Var),
    CrossEntropy { target: Tensor, probs: Var },
    Entropy(Var),
    Mean(Var),
    HalfSumSquares(Var),
    Opaque { name: String, inputs: Vec<Var> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    param: Option<String>,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(String, usize)>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradients of every trainable leaf, in registration order. Leaves the
    /// loss does not depend on get an all-zero gradient.
    pub fn params(&self) -> ParamSet {
        let mut out = ParamSet::new();
        for (name, idx) in &self.params {
            let g = self.grads[*idx]
                .clone()
                .unwrap_or_else(|| Tensor::zeros(&self.shapes[*idx]));
            out.insert(name.clone(), g).expect("parameter names are unique");
        }
        out
    }
}

fn gelu(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Smooth GELU (tanh form) applied elementwise outside a graph.
pub fn gelu_tensor(t: &Tensor) -> Tensor {
    t.map(gelu)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Trainable leaf. Its gradient is reported under `name`.
    pub fn param(&mut self, name: impl Into<String>, value: Tensor) -> Var {
        let v = self.push(value, Op::Leaf, true);
        self.nodes[v.0].param = Some(name.into());
        v
    }

    /// Leaf that is treated as a constant (gradient blocked).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `x + b` with `b` broadcast over the rows of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(b);
        if bv.len() != xv.cols() {
            return shape_err(
                "add_bias",
                format!("bias of {} values for {} columns", bv.len(), xv.cols()),
            );
        }
        let mut out = xv.clone();
        for i in 0..out.rows() {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, Op::AddBias(x, b), rg))
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = gelu_tensor(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::Gelu(a), rg)
    }

    pub fn normalize_rows(&mut self, a: Var) -> Result<Var> {
        let value = super::normalize_rows(self.value(a))?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::NormalizeRows(a), rg))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = super::softmax_rows(self.value(a));
        let rg = self.rg(a);
        self.push(value, Op::SoftmaxRows(a), rg)
    }

    /// Row-wise softmax of `a / temperature`.
    pub fn softmax_with_temperature(&mut self, a: Var, temperature: f64) -> Result<Var> {
        if !(temperature > 0.0) {
            return invalid(format!("temperature must be positive, got {temperature}"));
        }
        let scaled = self.scale(a, 1.0 / temperature);
        Ok(self.softmax_rows(scaled))
    }

    /// Cosine similarity of every row of `h` with every column of the
    /// unit-norm matrix `q` (`D x M`).
    pub fn cosine_scores(&mut self, h: Var, q: Var) -> Result<Var> {
        let hn = self.normalize_rows(h)?;
        self.matmul(hn, q)
    }

    /// Mean over rows of `H(target_i, probs_i) = -Σ target·log probs`.
    /// `target` is a constant.
    pub fn cross_entropy(&mut self, target: Tensor, probs: Var) -> Result<Var> {
        let p = self.value(probs);
        if !target.same_shape(p) {
            return shape_err(
                "cross_entropy",
                format!("target {:?} vs probabilities {:?}", target.shape(), p.shape()),
            );
        }
        let n = p.rows() as f64;
        let loss = -target
            .data()
            .iter()
            .zip(p.data())
            .map(|(&t, &q)| t * q.max(PROB_FLOOR).ln())
            .sum::<f64>()
            / n;
        let rg = self.rg(probs);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { target, probs }, rg))
    }

    /// Mean over rows of the Shannon entropy of each row.
    pub fn entropy(&mut self, probs: Var) -> Var {
        let p = self.value(probs);
        let n = p.rows() as f64;
        let loss = -p
            .data()
            .iter()
            .map(|&q| q * q.max(PROB_FLOOR).ln())
            .sum::<f64>()
            / n;
        let rg = self.rg(probs);
        self.push(Tensor::scalar(loss), Op::Entropy(probs), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.sum() / v.len() as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    /// `½ Σ a²` over all elements.
    pub fn half_sum_squares(&mut self, a: Var) -> Var {
        let v = 0.5 * self.value(a).data().iter().map(|x| x * x).sum::<f64>();
        let rg = self.rg(a);
        self.push(Tensor::scalar(v), Op::HalfSumSquares(a), rg)
    }

    /// Record a value computed outside the supported primitive set. It can be
    /// used freely in forward computations, but backpropagating through it
    /// into a trainable leaf is an error.
    pub fn opaque(&mut self, name: impl Into<String>, inputs: &[Var], value: Tensor) -> Var {
        let rg = inputs.iter().any(|&v| self.rg(v));
        self.push(
            value,
            Op::Opaque {
                name: name.into(),
                inputs: inputs.to_vec(),
            },
            rg,
        )
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return shape_err("backward", format!("loss must be scalar, got {:?}", lv.shape()));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        if self.rg(loss) {
            grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));
        }

        for idx in (0..n).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, nd)| nd.param.clone().map(|name| (name, i)))
            .collect();
        let shapes = self.nodes.iter().map(|nd| nd.value.shape().to_vec()).collect();
        Ok(Gradients {
            grads,
            params,
            shapes,
        })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let acc = |v: Var, d: Tensor, grads: &mut [Option<Tensor>]| {
            if !self.rg(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, x) in existing.data_mut().iter_mut().zip(d.data()) {
                        *e += x;
                    }
                }
                slot @ None => *slot = Some(d),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.matmul_t(self.value(*b))?, grads);
                }
                if self.rg(*b) {
                    acc(*b, self.value(*a).t_matmul(g)?, grads);
                }
            }
            Op::AddBias(x, b) => {
                acc(*x, g.clone(), grads);
                if self.rg(*b) {
                    let sums = g.col_sums();
                    let shape = self.value(*b).shape().to_vec();
                    acc(*b, Tensor::new(shape, sums)?, grads);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone(), grads);
                acc(*b, g.clone(), grads);
            }
            Op::Scale(a, c) => acc(*a, g.scale(*c), grads),
            Op::Gelu(a) => {
                let d = self.value(*a).zip_map(g, |x, gy| gelu_grad(x) * gy)?;
                acc(*a, d, grads);
            }
            Op::NormalizeRows(a) => {
                let x = self.value(*a);
                let y = &node.value;
                let mut d = g.clone();
                for i in 0..x.rows() {
                    let norm = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                    let yr = y.row(i);
                    let dot: f64 = yr.iter().zip(g.row(i)).map(|(a, b)| a * b).sum();
                    for (dv, &yv) in d.row_mut(i).iter_mut().zip(yr) {
                        *dv = (*dv - yv * dot) / norm;
                    }
                }
                acc(*a, d, grads);
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut d = g.clone();
                for i in 0..y.rows() {
                    let yr = y.row(i);
                    let dot: f64 = yr.iter().zip(g.row(i)).map(|(a, b)| a * b).sum();
                    for (dv, &yv) in d.row_mut(i).iter_mut().zip(yr) {
                        *dv = yv * (*dv - dot);
                    }
                }
                acc(*a, d, grads);
            }
            Op::CrossEntropy { target, probs } => {
                let p = self.value(*probs);
                let scale = g.item() / p.rows() as f64;
                let d = target.zip_map(p, |t, q| {
                    if q > PROB_FLOOR {
                        -scale * t / q
                    } else {
                        0.0
                    }
                })?;
                acc(*probs, d, grads);
            }
            Op::Entropy(probs) => {
                let p = self.value(*probs);
                let scale = g.item() / p.rows() as f64;
                let d = p.map(|q| {
                    if q > PROB_FLOOR {
                        -scale * (q.ln() + 1.0)
                    } else {
                        -scale * PROB_FLOOR.ln()
                    }
                });
                acc(*probs, d, grads);
            }
            Op::Mean(a) => {
                let x = self.value(*a);
                let d = Tensor::filled(x.shape(), g.item() / x.len() as f64);
                acc(*a, d, grads);
            }
            Op::HalfSumSquares(a) => {
                let gy = g.item();
                acc(*a, self.value(*a).scale(gy), grads);
            }
            Op::Opaque { name, inputs } => {
                if inputs.iter().any(|&v| self.rg(v)) {
                    return Err(Error::Unsupported(name.clone()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_loss_has_zero_gradients() {
        let mut g = Graph::new();
        let w = g.param("w", Tensor::matrix(2, 2, vec![1., 2., 3., 4.]));
        let c = g.constant(Tensor::scalar(0.0));
        let loss = g.mean(c);
        let grads = g.backward(loss).unwrap();
        assert!(grads.wrt(w).is_none());
        let ps = grads.params();
        assert_eq!(ps.get("w").unwrap().data(), &[0.0; 4]);
    }

    #[test]
    fn half_squared_norm_of_wx() {
        // Row convention y = xW: d/dW ½‖y‖² = xᵀy.
        let x = Tensor::matrix(1, 2, vec![0.5, -1.5]);
        let wv = Tensor::matrix(2, 2, vec![1.0, 2.0, -0.5, 0.25]);
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let w = g.param("w", wv.clone());
        let y = g.matmul(xv, w).unwrap();
        let loss = g.half_sum_squares(y);
        let grads = g.backward(loss).unwrap();
        // y = (0.5*1 + -1.5*-0.5, 0.5*2 + -1.5*0.25) = (1.25, 0.625)
        let expect = [0.5 * 1.25, 0.5 * 0.625, -1.5 * 1.25, -1.5 * 0.625];
        for (a, b) in grads.wrt(w).unwrap().data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn opaque_blocks_gradient() {
        let mut g = Graph::new();
        let w = g.param("w", Tensor::matrix(1, 2, vec![1., 2.]));
        let o = g.opaque("argmax", &[w], Tensor::scalar(1.0));
        let loss = g.mean(o);
        assert!(matches!(g.backward(loss), Err(Error::Unsupported(_))));

        let c = g.constant(Tensor::scalar(3.0));
        let o2 = g.opaque("argmax", &[c], Tensor::scalar(1.0));
        let loss2 = g.mean(o2);
        assert!(g.backward(loss2).is_ok());
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let w = g.param("w", Tensor::matrix(1, 2, vec![1., 2.]));
        assert!(g.backward(w).is_err());
    }

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        for &x in &[-3.0, -0.7, 0.0, 0.3, 2.5] {
            let h = 1e-6;
            let num = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((num - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
