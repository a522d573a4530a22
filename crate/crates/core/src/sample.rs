//! Seeded generators for random networks and inputs.
//!
//! Everything here is deterministic given the seed; the verify suite and
//! the test fixtures rely on that. Weights are uniform in [-1, 1] and
//! biases in [-0.5, 0.5], which keeps preactivations spread across both
//! signs so random inputs exercise many activation patterns.

use crate::linalg::{Matrix, Tensor};
use crate::networks::{
    DenseLayer, FeedforwardNetwork, GcnLayer, GcnNetwork, MultiplicativeLayer, TensorLayer,
    TensorNetwork,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The stream cipher RNG used everywhere randomness is seeded.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut impl Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = random_vector(rng, rows * cols, -scale, scale);
    Matrix::new(rows, cols, data).expect("generated entries are finite")
}

fn random_dense_layer(rng: &mut impl Rng, out_dim: usize, in_dim: usize) -> DenseLayer {
    let weight = random_matrix(rng, out_dim, in_dim, 1.0);
    let bias = random_vector(rng, out_dim, -0.5, 0.5);
    DenseLayer::new(weight, bias).expect("generated shapes are consistent")
}

/// Random dense ReLU network with the given layer dimensions
/// (input, hidden..., output).
pub fn random_feedforward(rng: &mut impl Rng, dims: &[usize]) -> FeedforwardNetwork {
    assert!(dims.len() >= 2, "need at least input and output dims");
    let layers = dims
        .windows(2)
        .map(|w| random_dense_layer(rng, w[1], w[0]))
        .collect();
    FeedforwardNetwork::new(layers).expect("generated shapes are consistent")
}

/// Random layer dimensions: `depth` hidden layers with widths drawn from
/// `widths`, between fixed input and output sizes.
pub fn random_dims(
    rng: &mut impl Rng,
    input_dim: usize,
    depth: usize,
    widths: std::ops::Range<usize>,
    output_dim: usize,
) -> Vec<usize> {
    let mut dims = vec![input_dim];
    for _ in 0..depth {
        dims.push(rng.gen_range(widths.clone()));
    }
    dims.push(output_dim);
    dims
}

/// Random graph-convolutional network over `k` nodes with the given
/// per-layer feature widths (input, hidden..., output). Every layer draws
/// a fresh dense operator.
pub fn random_gcn(rng: &mut impl Rng, k: usize, feature_dims: &[usize]) -> GcnNetwork {
    assert!(feature_dims.len() >= 2, "need at least input and output widths");
    let layers = feature_dims
        .windows(2)
        .map(|w| {
            let operator = random_matrix(rng, k, k, 1.0);
            let weight = random_matrix(rng, w[0], w[1], 1.0);
            let bias = random_matrix(rng, k, w[1], 0.5);
            GcnLayer::new(operator, weight, bias).expect("generated shapes are consistent")
        })
        .collect();
    GcnNetwork::new(layers).expect("generated shapes are consistent")
}

fn random_tensor_layer(rng: &mut impl Rng, in_shape: &[usize], out_shape: &[usize]) -> TensorLayer {
    let mode_mats = in_shape
        .iter()
        .zip(out_shape)
        .map(|(&i, &o)| random_matrix(rng, i, o, 1.0))
        .collect();
    let bias_data = random_vector(rng, out_shape.iter().product(), -0.5, 0.5);
    let bias = Tensor::from_vec(out_shape.to_vec(), &bias_data).expect("consistent length");
    TensorLayer::new(mode_mats, bias).expect("generated shapes are consistent")
}

/// Random tensor network passing through the given sequence of mode
/// shapes (input, hidden..., output); all shapes must share one order.
pub fn random_tensor_network(rng: &mut impl Rng, shapes: &[Vec<usize>]) -> TensorNetwork {
    assert!(shapes.len() >= 3, "need input, at least one hidden, and output shapes");
    let layers = shapes
        .windows(2)
        .map(|w| random_tensor_layer(rng, &w[0], &w[1]))
        .collect();
    TensorNetwork::new(layers).expect("generated shapes are consistent")
}

pub fn random_multiplicative(
    rng: &mut impl Rng,
    out_dim: usize,
    left_dim: usize,
    right_dim: usize,
) -> MultiplicativeLayer {
    let w = random_matrix(rng, out_dim, left_dim, 1.0);
    let b = random_vector(rng, out_dim, -0.5, 0.5);
    let v = random_matrix(rng, out_dim, right_dim, 1.0);
    let c = random_vector(rng, out_dim, -0.5, 0.5);
    MultiplicativeLayer::new(w, b, v, c).expect("generated shapes are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let net_a = random_feedforward(&mut rng_from_seed(5), &[3, 4, 4, 2]);
        let net_b = random_feedforward(&mut rng_from_seed(5), &[3, 4, 4, 2]);
        assert_eq!(net_a, net_b);
        let x = random_vector(&mut rng_from_seed(6), 3, -2.0, 2.0);
        assert_eq!(
            net_a.forward(&x).unwrap().0,
            net_b.forward(&x).unwrap().0
        );
    }

    #[test]
    fn generated_networks_have_requested_shapes() {
        let mut rng = rng_from_seed(7);
        let net = random_feedforward(&mut rng, &[2, 5, 3]);
        assert_eq!(net.input_dim(), 2);
        assert_eq!(net.output_dim(), 3);

        let gcn = random_gcn(&mut rng, 3, &[2, 4, 1]);
        let x = random_matrix(&mut rng, 3, 2, 1.0);
        let (out, _) = gcn.forward(&x).unwrap();
        assert_eq!((out.rows(), out.cols()), (3, 1));

        let tn = random_tensor_network(&mut rng, &[vec![2, 2], vec![3, 2], vec![1, 2]]);
        let x = Tensor::from_vec(vec![2, 2], &random_vector(&mut rng, 4, -1.0, 1.0)).unwrap();
        let (out, _) = tn.forward(&x).unwrap();
        assert_eq!(out.shape(), &[1, 2]);
    }

    #[test]
    fn random_dims_respect_bounds() {
        let mut rng = rng_from_seed(8);
        for _ in 0..20 {
            let dims = random_dims(&mut rng, 3, 4, 2..9, 2);
            assert_eq!(dims.len(), 6);
            assert_eq!(dims[0], 3);
            assert_eq!(dims[5], 2);
            assert!(dims[1..5].iter().all(|&w| (2..9).contains(&w)));
        }
    }
}
