//! ReLU network families: feedforward, graph-convolutional, and tensor
//! networks, plus single multiplicative-interaction layers.
//!
//! Every family applies ReLU after each hidden layer and an affine readout
//! with no activation at the end. Activation bits use the strict convention
//! `active(z) = (z > 0)`, so a preactivation of exactly zero is inactive.

use crate::error::{Error, Result};
use crate::linalg::{self, all_finite, Matrix, Tensor};

pub fn relu(z: f64) -> f64 {
    if z > 0.0 { z } else { 0.0 }
}

pub fn active(z: f64) -> bool {
    z > 0.0
}

/// Activation bits of one hidden layer, stored row-major over `shape`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatternLayer {
    shape: Vec<usize>,
    bits: Vec<bool>,
}

impl PatternLayer {
    pub fn new(shape: Vec<usize>, bits: Vec<bool>) -> Result<Self> {
        let total: usize = shape.iter().product();
        if shape.is_empty() || total != bits.len() {
            return Err(Error::shape(
                "PatternLayer::new",
                format!("{total} bits for shape {shape:?}"),
                format!("{}", bits.len()),
            ));
        }
        Ok(Self { shape, bits })
    }

    pub fn vector(bits: Vec<bool>) -> Self {
        let shape = vec![bits.len()];
        Self { shape, bits }
    }

    /// Bits of the preactivation values laid out row-major over `shape`.
    pub fn from_values(shape: Vec<usize>, values: &[f64]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), values.len());
        Self {
            shape,
            bits: values.iter().map(|&z| active(z)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bits in flattened order (first index fastest), matching
    /// [`Tensor::vec`] and [`Matrix::vec`].
    pub fn vec_bits(&self) -> Vec<bool> {
        let strides = linalg::first_fastest_strides(&self.shape);
        let mut out = vec![false; self.bits.len()];
        linalg::each_index(&self.shape, |lin, idx| {
            let pos: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            out[pos] = self.bits[lin];
        });
        out
    }

    /// Same bits reshaped to a flat vector layer in flattened order.
    pub fn vectorized(&self) -> PatternLayer {
        PatternLayer::vector(self.vec_bits())
    }
}

/// Joint activation pattern: one [`PatternLayer`] per hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    layers: Vec<PatternLayer>,
}

impl ActivationPattern {
    pub fn new(layers: Vec<PatternLayer>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[PatternLayer] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &PatternLayer {
        &self.layers[l]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn total_bits(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn vectorized(&self) -> ActivationPattern {
        ActivationPattern::new(self.layers.iter().map(|l| l.vectorized()).collect())
    }
}

/// One affine stage of a feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weight: Matrix,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(
                "DenseLayer::new",
                format!("bias of length {}", weight.rows()),
                format!("{}", bias.len()),
            ));
        }
        if !all_finite(&bias) {
            return Err(Error::NonFinite {
                path: "dense layer bias".into(),
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn affine(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::add_vec(&self.weight.matvec(x)?, &self.bias))
    }
}

/// Fully connected ReLU network: one or more hidden layers followed by an
/// affine readout. `layers` holds the hidden layers and then the readout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNetwork {
    layers: Vec<DenseLayer>,
}

impl FeedforwardNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidArgument {
                context: "FeedforwardNetwork::new".into(),
                message: "need at least one hidden layer and a readout".into(),
            });
        }
        for i in 1..layers.len() {
            if layers[i].in_dim() != layers[i - 1].out_dim() {
                return Err(Error::shape(
                    "FeedforwardNetwork::new",
                    format!("layer {i} taking {} inputs", layers[i - 1].out_dim()),
                    format!("{} inputs", layers[i].in_dim()),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn hidden_layers(&self) -> &[DenseLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn readout(&self) -> &DenseLayer {
        self.layers.last().unwrap()
    }

    pub fn num_hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden_layers().iter().map(|l| l.out_dim()).collect()
    }

    pub fn total_hidden_neurons(&self) -> usize {
        self.hidden_layers().iter().map(|l| l.out_dim()).sum()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ActivationPattern)> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        let mut pattern = Vec::with_capacity(self.num_hidden_layers());
        for layer in self.hidden_layers() {
            let z = layer.affine(&h)?;
            pattern.push(PatternLayer::from_values(vec![z.len()], &z));
            h = z.into_iter().map(relu).collect();
        }
        let out = self.readout().affine(&h)?;
        Ok((out, ActivationPattern::new(pattern)))
    }

    pub fn pattern_of(&self, x: &[f64]) -> Result<ActivationPattern> {
        Ok(self.forward(x)?.1)
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(
                "network input",
                format!("length {}", self.input_dim()),
                format!("{}", x.len()),
            ));
        }
        if !all_finite(x) {
            return Err(Error::NonFinite {
                path: "network input".into(),
            });
        }
        Ok(())
    }

    /// Check that a pattern has one vector layer of the right width per
    /// hidden layer.
    pub fn check_pattern(&self, p: &ActivationPattern) -> Result<()> {
        check_pattern_shapes(
            p,
            &self
                .hidden_layers()
                .iter()
                .map(|l| vec![l.out_dim()])
                .collect::<Vec<_>>(),
        )
    }
}

fn check_pattern_shapes(p: &ActivationPattern, expected: &[Vec<usize>]) -> Result<()> {
    if p.num_layers() != expected.len() {
        return Err(Error::shape(
            "activation pattern",
            format!("{} layers", expected.len()),
            format!("{}", p.num_layers()),
        ));
    }
    for (l, want) in expected.iter().enumerate() {
        if p.layer(l).shape() != want.as_slice() {
            return Err(Error::shape(
                format!("activation pattern layer {l}"),
                format!("{want:?}"),
                format!("{:?}", p.layer(l).shape()),
            ));
        }
    }
    Ok(())
}

/// One graph-convolution stage: `Z = operator * X * weight + bias` on a
/// node-feature matrix X. The operator is a fixed square matrix over nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    operator: Matrix,
    weight: Matrix,
    bias: Matrix,
}

impl GcnLayer {
    pub fn new(operator: Matrix, weight: Matrix, bias: Matrix) -> Result<Self> {
        if operator.rows() != operator.cols() {
            return Err(Error::shape(
                "GcnLayer::new",
                "square operator".to_string(),
                format!("{}x{}", operator.rows(), operator.cols()),
            ));
        }
        if bias.rows() != operator.rows() || bias.cols() != weight.cols() {
            return Err(Error::shape(
                "GcnLayer::new",
                format!("{}x{} bias", operator.rows(), weight.cols()),
                format!("{}x{}", bias.rows(), bias.cols()),
            ));
        }
        Ok(Self {
            operator,
            weight,
            bias,
        })
    }

    pub fn operator(&self) -> &Matrix {
        &self.operator
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &Matrix {
        &self.bias
    }

    pub fn affine(&self, x: &Matrix) -> Result<Matrix> {
        self.operator.matmul(x)?.matmul(&self.weight)?.add(&self.bias)
    }

    /// The same affine map on flattened node-feature matrices:
    /// `vec(A X W + b) = kron(W^T, A) vec(X) + vec(b)`.
    pub fn to_dense(&self) -> Result<DenseLayer> {
        DenseLayer::new(self.weight.transpose().kron(&self.operator), self.bias.vec())
    }
}

/// Graph-convolutional ReLU network over a fixed node set; the last layer
/// is an affine readout.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnNetwork {
    layers: Vec<GcnLayer>,
}

impl GcnNetwork {
    pub fn new(layers: Vec<GcnLayer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidArgument {
                context: "GcnNetwork::new".into(),
                message: "need at least one hidden layer and a readout".into(),
            });
        }
        let k = layers[0].operator.rows();
        for (i, layer) in layers.iter().enumerate() {
            if layer.operator.rows() != k {
                return Err(Error::shape(
                    "GcnNetwork::new",
                    format!("operator over {k} nodes"),
                    format!("{} nodes in layer {i}", layer.operator.rows()),
                ));
            }
            if i > 0 && layer.weight.rows() != layers[i - 1].weight.cols() {
                return Err(Error::shape(
                    "GcnNetwork::new",
                    format!("layer {i} taking {} features", layers[i - 1].weight.cols()),
                    format!("{} features", layer.weight.rows()),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn node_count(&self) -> usize {
        self.layers[0].operator.rows()
    }

    pub fn input_features(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn output_features(&self) -> usize {
        self.layers.last().unwrap().weight.cols()
    }

    pub fn layers(&self) -> &[GcnLayer] {
        &self.layers
    }

    pub fn hidden_layers(&self) -> &[GcnLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn readout(&self) -> &GcnLayer {
        self.layers.last().unwrap()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ActivationPattern)> {
        if x.rows() != self.node_count() || x.cols() != self.input_features() {
            return Err(Error::shape(
                "gcn input",
                format!("{}x{}", self.node_count(), self.input_features()),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        let mut h = x.clone();
        let mut pattern = Vec::with_capacity(self.layers.len() - 1);
        for layer in self.hidden_layers() {
            let z = layer.affine(&h)?;
            pattern.push(PatternLayer::from_values(
                vec![z.rows(), z.cols()],
                z.data(),
            ));
            h = z.map(relu);
        }
        let out = self.readout().affine(&h)?;
        Ok((out, ActivationPattern::new(pattern)))
    }

    pub fn pattern_of(&self, x: &Matrix) -> Result<ActivationPattern> {
        Ok(self.forward(x)?.1)
    }

    pub fn check_pattern(&self, p: &ActivationPattern) -> Result<()> {
        check_pattern_shapes(
            p,
            &self
                .hidden_layers()
                .iter()
                .map(|l| vec![l.operator.rows(), l.weight.cols()])
                .collect::<Vec<_>>(),
        )
    }

    /// Equivalent feedforward network on flattened node-feature matrices.
    /// Patterns correspond through [`ActivationPattern::vectorized`].
    pub fn to_feedforward(&self) -> Result<FeedforwardNetwork> {
        FeedforwardNetwork::new(
            self.layers
                .iter()
                .map(GcnLayer::to_dense)
                .collect::<Result<_>>()?,
        )
    }
}

/// One tensor-network stage: a Tucker product against `mode_mats` plus a
/// bias tensor. `mode_mats[m]` contracts mode m on its first index.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorLayer {
    mode_mats: Vec<Matrix>,
    bias: Tensor,
}

impl TensorLayer {
    pub fn new(mode_mats: Vec<Matrix>, bias: Tensor) -> Result<Self> {
        if mode_mats.is_empty() {
            return Err(Error::InvalidArgument {
                context: "TensorLayer::new".into(),
                message: "no mode matrices".into(),
            });
        }
        let out_shape: Vec<usize> = mode_mats.iter().map(|m| m.cols()).collect();
        if bias.shape() != out_shape.as_slice() {
            return Err(Error::shape(
                "TensorLayer::new",
                format!("bias of shape {out_shape:?}"),
                format!("{:?}", bias.shape()),
            ));
        }
        Ok(Self { mode_mats, bias })
    }

    pub fn mode_mats(&self) -> &[Matrix] {
        &self.mode_mats
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn in_shape(&self) -> Vec<usize> {
        self.mode_mats.iter().map(|m| m.rows()).collect()
    }

    pub fn out_shape(&self) -> Vec<usize> {
        self.mode_mats.iter().map(|m| m.cols()).collect()
    }

    pub fn affine(&self, x: &Tensor) -> Result<Tensor> {
        x.tucker_contract(&self.mode_mats)?.add(&self.bias)
    }

    /// The same affine map on flattened tensors.
    pub fn to_dense(&self) -> Result<DenseLayer> {
        DenseLayer::new(linalg::tucker_vec_operator(&self.mode_mats)?, self.bias.vec())
    }
}

/// Tensor ReLU network: hidden Tucker layers and an affine Tucker readout,
/// all of the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorNetwork {
    layers: Vec<TensorLayer>,
}

impl TensorNetwork {
    pub fn new(layers: Vec<TensorLayer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidArgument {
                context: "TensorNetwork::new".into(),
                message: "need at least one hidden layer and a readout".into(),
            });
        }
        let order = layers[0].mode_mats.len();
        for (i, layer) in layers.iter().enumerate() {
            if layer.mode_mats.len() != order {
                return Err(Error::shape(
                    "TensorNetwork::new",
                    format!("order {order}"),
                    format!("order {} in layer {i}", layer.mode_mats.len()),
                ));
            }
            if i > 0 && layer.in_shape() != layers[i - 1].out_shape() {
                return Err(Error::shape(
                    "TensorNetwork::new",
                    format!("layer {i} taking shape {:?}", layers[i - 1].out_shape()),
                    format!("{:?}", layer.in_shape()),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn order(&self) -> usize {
        self.layers[0].mode_mats.len()
    }

    pub fn input_shape(&self) -> Vec<usize> {
        self.layers[0].in_shape()
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.layers.last().unwrap().out_shape()
    }

    pub fn layers(&self) -> &[TensorLayer] {
        &self.layers
    }

    pub fn hidden_layers(&self) -> &[TensorLayer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn readout(&self) -> &TensorLayer {
        self.layers.last().unwrap()
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ActivationPattern)> {
        if x.shape() != self.input_shape().as_slice() {
            return Err(Error::shape(
                "tensor network input",
                format!("{:?}", self.input_shape()),
                format!("{:?}", x.shape()),
            ));
        }
        let mut h = x.clone();
        let mut pattern = Vec::with_capacity(self.layers.len() - 1);
        for layer in self.hidden_layers() {
            let z = layer.affine(&h)?;
            pattern.push(PatternLayer::from_values(z.shape().to_vec(), z.data()));
            h = z.map(relu);
        }
        let out = self.readout().affine(&h)?;
        Ok((out, ActivationPattern::new(pattern)))
    }

    pub fn pattern_of(&self, x: &Tensor) -> Result<ActivationPattern> {
        Ok(self.forward(x)?.1)
    }

    pub fn check_pattern(&self, p: &ActivationPattern) -> Result<()> {
        check_pattern_shapes(
            p,
            &self
                .hidden_layers()
                .iter()
                .map(TensorLayer::out_shape)
                .collect::<Vec<_>>(),
        )
    }

    /// Equivalent feedforward network on flattened tensors. Patterns
    /// correspond through [`ActivationPattern::vectorized`].
    pub fn to_feedforward(&self) -> Result<FeedforwardNetwork> {
        FeedforwardNetwork::new(
            self.layers
                .iter()
                .map(TensorLayer::to_dense)
                .collect::<Result<_>>()?,
        )
    }
}

/// Single multiplicative-interaction layer
/// `relu(W x1 + b) .* relu(V x2 + c)` over two input branches.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeLayer {
    w: Matrix,
    b: Vec<f64>,
    v: Matrix,
    c: Vec<f64>,
}

impl MultiplicativeLayer {
    pub fn new(w: Matrix, b: Vec<f64>, v: Matrix, c: Vec<f64>) -> Result<Self> {
        if w.rows() != v.rows() || b.len() != w.rows() || c.len() != w.rows() {
            return Err(Error::shape(
                "MultiplicativeLayer::new",
                format!("both branches producing {} outputs", w.rows()),
                format!("v: {}, b: {}, c: {}", v.rows(), b.len(), c.len()),
            ));
        }
        if !all_finite(&b) || !all_finite(&c) {
            return Err(Error::NonFinite {
                path: "multiplicative layer bias".into(),
            });
        }
        Ok(Self { w, b, v, c })
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    /// Value together with the activation bits of each branch.
    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<(Vec<f64>, Vec<bool>, Vec<bool>)> {
        if !all_finite(x1) || !all_finite(x2) {
            return Err(Error::NonFinite {
                path: "multiplicative layer input".into(),
            });
        }
        let z1 = linalg::add_vec(&self.w.matvec(x1)?, &self.b);
        let z2 = linalg::add_vec(&self.v.matvec(x2)?, &self.c);
        let p1: Vec<bool> = z1.iter().map(|&z| active(z)).collect();
        let p2: Vec<bool> = z2.iter().map(|&z| active(z)).collect();
        let value = linalg::hadamard_vec(
            &z1.into_iter().map(relu).collect::<Vec<_>>(),
            &z2.into_iter().map(relu).collect::<Vec<_>>(),
        );
        Ok((value, p1, p2))
    }
}

/// Any of the supported network families, as loaded from a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Feedforward(FeedforwardNetwork),
    Gcn(GcnNetwork),
    Tensor(TensorNetwork),
}

impl Network {
    pub fn family(&self) -> &'static str {
        match self {
            Network::Feedforward(_) => "feedforward",
            Network::Gcn(_) => "gcn",
            Network::Tensor(_) => "tensor",
        }
    }

    /// Shape of a single input: `[n]`, `[nodes, features]`, or the tensor
    /// input shape.
    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            Network::Feedforward(n) => vec![n.input_dim()],
            Network::Gcn(n) => vec![n.node_count(), n.input_features()],
            Network::Tensor(n) => n.input_shape(),
        }
    }

    pub fn output_shape(&self) -> Vec<usize> {
        match self {
            Network::Feedforward(n) => vec![n.output_dim()],
            Network::Gcn(n) => vec![n.node_count(), n.output_features()],
            Network::Tensor(n) => n.output_shape(),
        }
    }

    /// Feedforward network acting on flattened inputs; the identity view
    /// for a network that is already feedforward.
    pub fn vectorized(&self) -> Result<FeedforwardNetwork> {
        match self {
            Network::Feedforward(n) => Ok(n.clone()),
            Network::Gcn(n) => n.to_feedforward(),
            Network::Tensor(n) => n.to_feedforward(),
        }
    }
}
