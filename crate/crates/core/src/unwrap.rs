//! Closed-form local linear models of ReLU networks.
//!
//! Fixing an activation pattern P turns every ReLU into multiplication by a
//! 0/1 diagonal mask, so the network collapses to a single affine map
//! `x -> w x + b` that agrees with the network exactly wherever the network
//! realizes P. The maps here are built by folding the masked layers
//! symbolically, never by evaluating the network.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::networks::{
    ActivationPattern, FeedforwardNetwork, GcnNetwork, MultiplicativeLayer, TensorNetwork,
};

/// Affine map `x -> weight x + bias` valid on the activation region of
/// `pattern`. For graph and tensor networks it acts on flattened inputs and
/// produces flattened outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinearModel {
    weight: Matrix,
    bias: Vec<f64>,
    pattern: ActivationPattern,
}

impl LocalLinearModel {
    pub(crate) fn new(weight: Matrix, bias: Vec<f64>, pattern: ActivationPattern) -> Self {
        debug_assert_eq!(weight.rows(), bias.len());
        Self {
            weight,
            bias,
            pattern,
        }
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn pattern(&self) -> &ActivationPattern {
        &self.pattern
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(linalg::add_vec(&self.weight.matvec(x)?, &self.bias))
    }
}

/// Running affine map `h = a x + c` for the partial network below the layer
/// being folded. Shared by the unwrappers, the region builder, and the tree
/// walker so they stay arithmetically identical.
#[derive(Debug, Clone)]
pub(crate) struct AffineAccumulator {
    a: Matrix,
    c: Vec<f64>,
}

impl AffineAccumulator {
    pub fn identity(input_dim: usize) -> Self {
        Self {
            a: Matrix::identity(input_dim),
            c: vec![0.0; input_dim],
        }
    }

    /// Preactivation map of the next stage: `(weight a, weight c + bias)`.
    pub fn stage(&self, weight: &Matrix, bias: &[f64]) -> Result<(Matrix, Vec<f64>)> {
        let pre_a = weight.matmul(&self.a)?;
        let pre_c = linalg::add_vec(&weight.matvec(&self.c)?, bias);
        Ok((pre_a, pre_c))
    }

    /// Adopt a stage's preactivation map with inactive rows zeroed.
    pub fn advance(&mut self, pre: (Matrix, Vec<f64>), keep: &[bool]) -> Result<()> {
        self.a = pre.0.mask_rows(keep)?;
        self.c = linalg::mask_vec(&pre.1, keep);
        Ok(())
    }
}

fn fold_dense_stages(
    stages: &[(&Matrix, &[f64])],
    pattern: &ActivationPattern,
    mask_layers: &[Vec<bool>],
    input_dim: usize,
) -> Result<LocalLinearModel> {
    debug_assert_eq!(stages.len(), mask_layers.len() + 1);
    let mut acc = AffineAccumulator::identity(input_dim);
    for ((weight, bias), keep) in stages.iter().zip(mask_layers) {
        let pre = acc.stage(weight, bias)?;
        acc.advance(pre, keep)?;
    }
    let (weight, bias) = stages.last().unwrap();
    let (w, b) = acc.stage(weight, bias)?;
    Ok(LocalLinearModel::new(w, b, pattern.clone()))
}

/// Local linear model of a feedforward network under pattern `p`.
pub fn unwrap_feedforward(
    net: &FeedforwardNetwork,
    p: &ActivationPattern,
) -> Result<LocalLinearModel> {
    net.check_pattern(p)?;
    let stages: Vec<(&Matrix, &[f64])> =
        net.layers().iter().map(|l| (l.weight(), l.bias())).collect();
    let masks: Vec<Vec<bool>> = p.layers().iter().map(|l| l.bits().to_vec()).collect();
    fold_dense_stages(&stages, p, &masks, net.input_dim())
}

/// Local linear model of a graph-convolutional network under pattern `p`,
/// acting on flattened node-feature matrices.
pub fn unwrap_gcn(net: &GcnNetwork, p: &ActivationPattern) -> Result<LocalLinearModel> {
    net.check_pattern(p)?;
    let dense: Vec<_> = net
        .layers()
        .iter()
        .map(|l| l.to_dense())
        .collect::<Result<Vec<_>>>()?;
    let stages: Vec<(&Matrix, &[f64])> =
        dense.iter().map(|l| (l.weight(), l.bias())).collect();
    let masks: Vec<Vec<bool>> = p.layers().iter().map(|l| l.vec_bits()).collect();
    fold_dense_stages(&stages, p, &masks, net.node_count() * net.input_features())
}

/// Local linear model of a tensor network under pattern `p`, acting on
/// flattened tensors.
pub fn unwrap_tensor(net: &TensorNetwork, p: &ActivationPattern) -> Result<LocalLinearModel> {
    net.check_pattern(p)?;
    let dense: Vec<_> = net
        .layers()
        .iter()
        .map(|l| l.to_dense())
        .collect::<Result<Vec<_>>>()?;
    let stages: Vec<(&Matrix, &[f64])> =
        dense.iter().map(|l| (l.weight(), l.bias())).collect();
    let masks: Vec<Vec<bool>> = p.layers().iter().map(|l| l.vec_bits()).collect();
    let input_dim: usize = net.input_shape().iter().product();
    fold_dense_stages(&stages, p, &masks, input_dim)
}

/// The four Hadamard terms of a masked multiplicative layer. Each branch's
/// bias is masked by that branch's own pattern, so rows with an inactive
/// bit contribute nothing to any term.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearExpansion {
    /// Masked left linear part times masked right linear part.
    pub linear_linear: Vec<f64>,
    /// Masked left bias times masked right linear part.
    pub bias_linear: Vec<f64>,
    /// Masked left linear part times masked right bias.
    pub linear_bias: Vec<f64>,
    /// Masked left bias times masked right bias.
    pub bias_bias: Vec<f64>,
}

impl BilinearExpansion {
    pub fn total(&self) -> Vec<f64> {
        self.linear_linear
            .iter()
            .zip(&self.bias_linear)
            .zip(&self.linear_bias)
            .zip(&self.bias_bias)
            .map(|(((a, b), c), d)| a + b + c + d)
            .collect()
    }
}

/// Expand `relu(W x1 + b) .* relu(V x2 + c)` under branch patterns
/// `(p1, p2)` into its four bilinear terms.
pub fn decompose_multiplicative(
    layer: &MultiplicativeLayer,
    p1: &[bool],
    p2: &[bool],
    x1: &[f64],
    x2: &[f64],
) -> Result<BilinearExpansion> {
    if p1.len() != layer.out_dim() || p2.len() != layer.out_dim() {
        return Err(Error::shape(
            "decompose_multiplicative",
            format!("{} pattern bits per branch", layer.out_dim()),
            format!("{} and {}", p1.len(), p2.len()),
        ));
    }
    let left_linear = linalg::mask_vec(&layer.w().matvec(x1)?, p1);
    let left_bias = linalg::mask_vec(layer.b(), p1);
    let right_linear = linalg::mask_vec(&layer.v().matvec(x2)?, p2);
    let right_bias = linalg::mask_vec(layer.c(), p2);
    Ok(BilinearExpansion {
        linear_linear: linalg::hadamard_vec(&left_linear, &right_linear),
        bias_linear: linalg::hadamard_vec(&left_bias, &right_linear),
        linear_bias: linalg::hadamard_vec(&left_linear, &right_bias),
        bias_bias: linalg::hadamard_vec(&left_bias, &right_bias),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Tensor;
    use crate::networks::{DenseLayer, GcnLayer, TensorLayer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            let scale = 1.0_f64.max(x.abs()).max(y.abs());
            assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
        }
    }

    fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    fn rand_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> FeedforwardNetwork {
        let layers = dims
            .windows(2)
            .map(|w| {
                let weight = rand_matrix(rng, w[1], w[0]);
                let bias = (0..w[1]).map(|_| rng.gen_range(-0.5..0.5)).collect();
                DenseLayer::new(weight, bias).unwrap()
            })
            .collect();
        FeedforwardNetwork::new(layers).unwrap()
    }

    #[test]
    fn single_layer_by_hand() {
        let net = FeedforwardNetwork::new(vec![
            DenseLayer::new(Matrix::identity(2), vec![1.0, -1.0]).unwrap(),
            DenseLayer::new(Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![0.5]).unwrap(),
        ])
        .unwrap();
        let x = [0.2, 0.3];
        let (out, p) = net.forward(&x).unwrap();
        let m = unwrap_feedforward(&net, &p).unwrap();
        // Pattern (1, 0) kills the second row: w = (1, 0), b = 1 + 0.5.
        assert_eq!(m.weight(), &Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap());
        assert_eq!(m.bias(), &[1.5]);
        assert_eq!(m.eval(&x).unwrap(), out);
    }

    #[test]
    fn all_active_pattern_gives_plain_weight_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let net = rand_net(&mut rng, &[3, 4, 2]);
        let ones = ActivationPattern::new(vec![crate::networks::PatternLayer::vector(vec![
            true, true, true, true,
        ])]);
        let m = unwrap_feedforward(&net, &ones).unwrap();
        let w01 = net.layers()[1].weight().matmul(net.layers()[0].weight()).unwrap();
        assert_eq!(m.weight(), &w01);
    }

    #[test]
    fn feedforward_model_matches_forward_on_its_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for dims in [vec![3, 4, 4, 2], vec![2, 5, 1], vec![4, 3, 3, 3, 2]] {
            let net = rand_net(&mut rng, &dims);
            for _ in 0..200 {
                let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let (out, p) = net.forward(&x).unwrap();
                let m = unwrap_feedforward(&net, &p).unwrap();
                assert_close(&m.eval(&x).unwrap(), &out, 1e-9);
                assert_eq!(m.pattern(), &p);
            }
        }
    }

    #[test]
    fn rejects_pattern_of_wrong_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let net = rand_net(&mut rng, &[3, 4, 2]);
        let bad = ActivationPattern::new(vec![crate::networks::PatternLayer::vector(vec![
            true, false,
        ])]);
        assert!(matches!(
            unwrap_feedforward(&net, &bad),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    fn rand_gcn(rng: &mut ChaCha8Rng, k: usize, dims: &[usize]) -> GcnNetwork {
        let operator = rand_matrix(rng, k, k);
        let layers = dims
            .windows(2)
            .map(|w| {
                GcnLayer::new(
                    operator.clone(),
                    rand_matrix(rng, w[0], w[1]),
                    rand_matrix(rng, k, w[1]),
                )
                .unwrap()
            })
            .collect();
        GcnNetwork::new(layers).unwrap()
    }

    #[test]
    fn gcn_model_matches_forward_and_vectorized_unwrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let net = rand_gcn(&mut rng, 3, &[2, 4, 2]);
        let flat = net.to_feedforward().unwrap();
        for _ in 0..100 {
            let x = rand_matrix(&mut rng, 3, 2);
            let (out, p) = net.forward(&x).unwrap();
            let m = unwrap_gcn(&net, &p).unwrap();
            assert_close(&m.eval(&x.vec()).unwrap(), &out.vec(), 1e-9);
            // Same fold in flattened coordinates, so bit-identical.
            let flat_m = unwrap_feedforward(&flat, &p.vectorized()).unwrap();
            assert_eq!(m.weight(), flat_m.weight());
            assert_eq!(m.bias(), flat_m.bias());
        }
    }

    fn rand_tensor_net(rng: &mut ChaCha8Rng, shapes: &[Vec<usize>]) -> TensorNetwork {
        let layers = shapes
            .windows(2)
            .map(|w| {
                let mats: Vec<Matrix> = w[0]
                    .iter()
                    .zip(&w[1])
                    .map(|(&r, &c)| rand_matrix(rng, r, c))
                    .collect();
                let total: usize = w[1].iter().product();
                let bias = Tensor::new(
                    w[1].clone(),
                    (0..total).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                )
                .unwrap();
                TensorLayer::new(mats, bias).unwrap()
            })
            .collect();
        TensorNetwork::new(layers).unwrap()
    }

    #[test]
    fn tensor_model_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let net = rand_tensor_net(
            &mut rng,
            &[vec![2, 3, 2], vec![3, 2, 2], vec![1, 2, 2]],
        );
        for _ in 0..100 {
            let data: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = Tensor::new(vec![2, 3, 2], data).unwrap();
            let (out, p) = net.forward(&x).unwrap();
            let m = unwrap_tensor(&net, &p).unwrap();
            assert_close(&m.eval(&x.vec()).unwrap(), &out.vec(), 1e-9);
        }
    }

    #[test]
    fn order_one_tensor_net_reduces_to_feedforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let dims = [3usize, 4, 2];
        let mats: Vec<Matrix> = dims.windows(2).map(|w| rand_matrix(&mut rng, w[0], w[1])).collect();
        let biases: Vec<Vec<f64>> = dims[1..]
            .iter()
            .map(|&d| (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let tnet = TensorNetwork::new(
            mats.iter()
                .zip(&biases)
                .map(|(m, b)| {
                    TensorLayer::new(
                        vec![m.clone()],
                        Tensor::new(vec![m.cols()], b.clone()).unwrap(),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        // An order-1 layer contracts on the first index, i.e. applies the
        // transposed matrix.
        let fnet = FeedforwardNetwork::new(
            mats.iter()
                .zip(&biases)
                .map(|(m, b)| DenseLayer::new(m.transpose(), b.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (out, p) = tnet.forward(&Tensor::new(vec![3], x.clone()).unwrap()).unwrap();
            let tm = unwrap_tensor(&tnet, &p).unwrap();
            let fm = unwrap_feedforward(&fnet, &p.vectorized()).unwrap();
            assert_eq!(tm.weight(), fm.weight());
            assert_eq!(tm.bias(), fm.bias());
            assert_eq!(out.data(), fnet.forward(&x).unwrap().0.as_slice());
        }
    }

    #[test]
    fn bilinear_expansion_identity_example() {
        let layer = MultiplicativeLayer::new(
            Matrix::identity(2),
            vec![0.0, 0.0],
            Matrix::identity(2),
            vec![0.0, 0.0],
        )
        .unwrap();
        let (value, p1, p2) = layer.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(value, vec![3.0, 8.0]);
        let e = decompose_multiplicative(&layer, &p1, &p2, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(e.total(), vec![3.0, 8.0]);
        assert_eq!(e.linear_linear, vec![3.0, 8.0]);
        assert_eq!(e.bias_linear, vec![0.0, 0.0]);
    }

    #[test]
    fn bilinear_expansion_matches_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..500 {
            let (m, n1, n2) = (
                rng.gen_range(1..5),
                rng.gen_range(1..5),
                rng.gen_range(1..5),
            );
            let layer = MultiplicativeLayer::new(
                rand_matrix(&mut rng, m, n1),
                (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rand_matrix(&mut rng, m, n2),
                (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let x1: Vec<f64> = (0..n1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x2: Vec<f64> = (0..n2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (value, p1, p2) = layer.eval(&x1, &x2).unwrap();
            let e = decompose_multiplicative(&layer, &p1, &p2, &x1, &x2).unwrap();
            assert_close(&e.total(), &value, 1e-12);
        }
    }

    #[test]
    fn inactive_rows_kill_bias_products() {
        // Large biases on rows the pattern switches off must not leak into
        // any term.
        let layer = MultiplicativeLayer::new(
            Matrix::identity(2),
            vec![100.0, -0.5],
            Matrix::identity(2),
            vec![50.0, 1.0],
        )
        .unwrap();
        let x1 = [-200.0, 1.0];
        let x2 = [1.0, 2.0];
        let (value, p1, p2) = layer.eval(&x1, &x2).unwrap();
        assert_eq!(p1, vec![false, true]);
        let e = decompose_multiplicative(&layer, &p1, &p2, &x1, &x2).unwrap();
        assert_eq!(e.total()[0], 0.0);
        assert_eq!(e.bias_linear[0], 0.0);
        assert_eq!(e.bias_bias[0], 0.0);
        assert_eq!(e.total(), value);
    }
}
