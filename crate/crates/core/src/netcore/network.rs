use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{invalid, shape_err, Result};

use super::autograd::{gelu_tensor, Graph, Var};
use super::{ParamSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Gelu,
    /// Plain affine block. Only used for hand-checkable test networks.
    Identity,
}

/// Architecture of a block-structured MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    /// Output width `D_j` of each block, `j = 1..=L`.
    pub widths: Vec<usize>,
    pub classes: usize,
    pub activation: Activation,
    /// 1-based indices of blocks whose parameters adapt at test time.
    pub shallow: BTreeSet<usize>,
    /// Whether the classifier head also adapts at test time.
    pub train_head: bool,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, widths: Vec<usize>, classes: usize) -> Self {
        Self {
            input_dim,
            widths,
            classes,
            activation: Activation::Gelu,
            shallow: BTreeSet::from([1]),
            train_head: false,
        }
    }
}

/// Output of a forward pass: every block output plus the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub features: Vec<Tensor>,
    pub logits: Tensor,
}

/// Graph handles produced by [`Network::forward_graph`].
#[derive(Debug, Clone)]
pub struct GraphForward {
    pub features: Vec<Var>,
    pub logits: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
}

pub fn weight_name(block: usize) -> String {
    format!("block{block}.weight")
}

pub fn bias_name(block: usize) -> String {
    format!("block{block}.bias")
}

pub const HEAD_WEIGHT: &str = "head.weight";
pub const HEAD_BIAS: &str = "head.bias";

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        if spec.input_dim == 0 || spec.classes == 0 || spec.widths.is_empty() {
            return invalid("network needs a positive input dimension, class count and at least one block");
        }
        if spec.widths.iter().any(|&w| w == 0) {
            return invalid("block widths must be positive");
        }
        if let Some(&j) = spec.shallow.iter().find(|&&j| j == 0 || j > spec.widths.len()) {
            return invalid(format!(
                "shallow block {j} outside 1..={}",
                spec.widths.len()
            ));
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn depth(&self) -> usize {
        self.spec.widths.len()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    /// Width of block `j` (1-based).
    pub fn width(&self, j: usize) -> usize {
        self.spec.widths[j - 1]
    }

    fn fan_in(&self, j: usize) -> usize {
        if j == 1 {
            self.spec.input_dim
        } else {
            self.spec.widths[j - 2]
        }
    }

    /// Whether a parameter adapts at test time.
    pub fn is_trainable(&self, name: &str) -> bool {
        if name.starts_with("head.") {
            return self.spec.train_head;
        }
        self.spec
            .shallow
            .iter()
            .any(|&j| name == weight_name(j) || name == bias_name(j))
    }

    /// Fan-in scaled uniform initialisation, `U(-1/√fan_in, 1/√fan_in)`.
    pub fn init_params(&self, rng: &mut impl Rng) -> ParamSet {
        let mut ps = ParamSet::new();
        let mut uniform = |fan_in: usize, shape: &[usize]| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
            Tensor::new(shape.to_vec(), data).expect("shape and data agree")
        };
        for j in 1..=self.depth() {
            let (fi, fo) = (self.fan_in(j), self.width(j));
            ps.insert(weight_name(j), uniform(fi, &[fi, fo])).unwrap();
            ps.insert(bias_name(j), uniform(fi, &[fo])).unwrap();
        }
        let last = *self.spec.widths.last().unwrap();
        let c = self.spec.classes;
        ps.insert(HEAD_WEIGHT, uniform(last, &[last, c])).unwrap();
        ps.insert(HEAD_BIAS, uniform(last, &[c])).unwrap();
        ps
    }

    /// Check that `params` has exactly this architecture's layout.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        let mut expected = Vec::new();
        for j in 1..=self.depth() {
            expected.push((weight_name(j), vec![self.fan_in(j), self.width(j)]));
            expected.push((bias_name(j), vec![self.width(j)]));
        }
        let last = *self.spec.widths.last().unwrap();
        expected.push((HEAD_WEIGHT.to_string(), vec![last, self.spec.classes]));
        expected.push((HEAD_BIAS.to_string(), vec![self.spec.classes]));
        if params.layout() != expected {
            return shape_err(
                "check_params",
                format!("parameter layout {:?} does not match architecture {:?}", params.layout(), expected),
            );
        }
        Ok(())
    }

    fn check_batch(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.spec.input_dim {
            return shape_err(
                "forward",
                format!("batch shape {:?}, expected [N, {}]", x.shape(), self.spec.input_dim),
            );
        }
        Ok(())
    }

    fn activate(&self, t: Tensor) -> Tensor {
        match self.spec.activation {
            Activation::Gelu => gelu_tensor(&t),
            Activation::Identity => t,
        }
    }

    /// Plain forward pass. Bitwise identical to the values recorded by
    /// [`Network::forward_graph`].
    pub fn forward(&self, params: &ParamSet, x: &Tensor) -> Result<Forward> {
        self.check_batch(x)?;
        let mut features = Vec::with_capacity(self.depth());
        let mut h = x.clone();
        for j in 1..=self.depth() {
            let z = affine(&h, param(params, &weight_name(j))?, param(params, &bias_name(j))?)?;
            h = self.activate(z);
            features.push(h.clone());
        }
        let logits = affine(&h, param(params, HEAD_WEIGHT)?, param(params, HEAD_BIAS)?)?;
        Ok(Forward { features, logits })
    }

    pub fn logits(&self, params: &ParamSet, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(params, x)?.logits)
    }

    /// Forward pass recorded on a graph. Parameters for which `trainable`
    /// returns true become differentiable leaves; the rest are constants.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        x: Var,
        trainable: impl Fn(&str) -> bool,
    ) -> Result<GraphForward> {
        self.check_batch(g.value(x))?;
        let leaf = |g: &mut Graph, name: &str| -> Result<Var> {
            let t = param(params, name)?.clone();
            Ok(if trainable(name) {
                g.param(name, t)
            } else {
                g.constant(t)
            })
        };
        let mut features = Vec::with_capacity(self.depth());
        let mut h = x;
        for j in 1..=self.depth() {
            let w = leaf(g, &weight_name(j))?;
            let b = leaf(g, &bias_name(j))?;
            let z = g.affine(h, w, b)?;
            h = match self.spec.activation {
                Activation::Gelu => g.gelu(z),
                Activation::Identity => z,
            };
            features.push(h);
        }
        let w = leaf(g, HEAD_WEIGHT)?;
        let b = leaf(g, HEAD_BIAS)?;
        let logits = g.affine(h, w, b)?;
        Ok(GraphForward { features, logits })
    }
}

fn param<'a>(params: &'a ParamSet, name: &str) -> Result<&'a Tensor> {
    params
        .get(name)
        .ok_or_else(|| crate::Error::InvalidArgument(format!("missing parameter {name}")))
}

fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut z = x.matmul(w)?;
    if b.len() != z.cols() {
        return shape_err("affine", format!("bias of {} values for {} columns", b.len(), z.cols()));
    }
    for i in 0..z.rows() {
        for (o, &bb) in z.row_mut(i).iter_mut().zip(b.data()) {
            *o += bb;
        }
    }
    Ok(z)
}
