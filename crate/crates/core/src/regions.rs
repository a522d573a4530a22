//! Activation regions as intersections of open half-spaces.
//!
//! Under a fixed pattern the preactivation of each hidden neuron is an
//! affine function of the network input, so "neuron i of layer j is
//! active" is a half-space condition on the input, with the inactive case
//! giving the closed complement. A region is the intersection of one such
//! condition per hidden neuron, taken layer by layer along the pattern.

use crate::error::{Error, Result};
use crate::linalg;
use crate::networks::{ActivationPattern, FeedforwardNetwork, PatternLayer};
use crate::unwrap::AffineAccumulator;
use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

/// Open half-space `{x : normal . x + offset > 0}`. A zero normal makes
/// the condition constant: satisfied iff `offset > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    normal: Vec<f64>,
    offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.normal.iter().all(|&v| v == 0.0)
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        linalg::dot(&self.normal, x) + self.offset > 0.0
    }

    /// Signed distance proxy: the affine value `normal . x + offset`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        linalg::dot(&self.normal, x) + self.offset
    }
}

/// Activation region of one pattern: half-spaces in layer-major,
/// neuron-index order, one per hidden neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDescription {
    halfspaces: Vec<HalfSpace>,
    pattern: ActivationPattern,
}

impl RegionDescription {
    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    pub fn pattern(&self) -> &ActivationPattern {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.halfspaces[0].dim()
    }

    /// True iff every half-space condition holds strictly at `x`.
    pub fn membership(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.satisfied(x))
    }
}

/// Half-space description of the region on which `net` realizes `p`.
///
/// The condition for neuron i of hidden layer j is built from the affine
/// preactivation map valid under the first j layers of `p`; the inactive
/// polarity flips the sign of both normal and offset. Inactive conditions
/// are reported as open half-spaces as well, so membership of boundary
/// points (preactivation exactly zero) differs from the closed convention
/// only on a measure-zero set.
pub fn region_halfspaces(
    net: &FeedforwardNetwork,
    p: &ActivationPattern,
) -> Result<RegionDescription> {
    net.check_pattern(p)?;
    let mut halfspaces = Vec::with_capacity(net.total_hidden_neurons());
    let mut acc = AffineAccumulator::identity(net.input_dim());
    for (l, layer) in net.hidden_layers().iter().enumerate() {
        let (pre_a, pre_c) = acc.stage(layer.weight(), layer.bias())?;
        for (i, &bit) in p.layer(l).bits().iter().enumerate() {
            let sign = if bit { 1.0 } else { -1.0 };
            let normal = pre_a.row(i).iter().map(|v| sign * v).collect();
            halfspaces.push(HalfSpace::new(normal, sign * pre_c[i]));
        }
        acc.advance((pre_a, pre_c), p.layer(l).bits())?;
    }
    Ok(RegionDescription {
        halfspaces,
        pattern: p.clone(),
    })
}

/// Axis-aligned box, used as the domain for feasibility questions.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::shape(
                "BoundingBox::new",
                "matching nonempty bounds".to_string(),
                format!("{} and {}", lo.len(), hi.len()),
            ));
        }
        if !linalg::all_finite(&lo) || !linalg::all_finite(&hi) {
            return Err(Error::NonFinite {
                path: "bounding box".into(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument {
                context: "BoundingBox::new".into(),
                message: "lower bound exceeds upper bound".into(),
            });
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| a <= v && v <= b)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a == b { a } else { rng.gen_range(a..b) })
            .collect()
    }
}

/// Search for a point of the box satisfying every half-space with margin at
/// least `epsilon`, by maximizing the worst margin with an LP. Returns the
/// maximizer when its margin reaches `epsilon`, `None` otherwise. Regions
/// thinner than `epsilon` are therefore reported as empty.
pub fn feasible_point(
    halfspaces: &[HalfSpace],
    domain: &BoundingBox,
    epsilon: f64,
) -> Result<Option<Vec<f64>>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument {
            context: "feasible_point".into(),
            message: format!("epsilon must be positive and finite, got {epsilon}"),
        });
    }
    if let Some(h) = halfspaces.iter().find(|h| h.dim() != domain.dim()) {
        return Err(Error::shape(
            "feasible_point",
            format!("half-spaces of dimension {}", domain.dim()),
            format!("{}", h.dim()),
        ));
    }
    if halfspaces.is_empty() {
        return Ok(Some(domain.center()));
    }
    // Maximize t subject to normal.x + offset >= t for every half-space and
    // x inside the box; t is capped to keep the program bounded.
    let cap = 1.0_f64.max(epsilon);
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..domain.dim())
        .map(|d| problem.add_var(0.0, (domain.lo[d], domain.hi[d])))
        .collect();
    let t = problem.add_var(1.0, (f64::NEG_INFINITY, cap));
    for h in halfspaces {
        let mut expr = LinearExpr::empty();
        for (var, coeff) in xs.iter().zip(h.normal()) {
            expr.add(*var, *coeff);
        }
        expr.add(t, -1.0);
        problem.add_constraint(expr, ComparisonOp::Ge, -h.offset());
    }
    match problem.solve() {
        Ok(solution) => {
            if solution[t] >= epsilon {
                Ok(Some(xs.iter().map(|v| solution[*v]).collect()))
            } else {
                Ok(None)
            }
        }
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::internal(format!("margin LP failed: {e}"))),
    }
}

/// How [`enumerate_regions`] searches for nonempty regions.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Evaluate the pattern at seeded uniform samples and keep first
    /// occurrences. Finds only regions that intersect the sample set.
    Sample { count: usize, seed: u64 },
    /// Try every candidate pattern, keeping those with an `epsilon`-deep
    /// feasible point. Refused when the network has more than `cap` hidden
    /// neurons.
    Exhaustive { cap: u32, epsilon: f64 },
}

impl Strategy {
    pub fn exhaustive() -> Self {
        Strategy::Exhaustive {
            cap: 20,
            epsilon: 1e-7,
        }
    }
}

/// One discovered region: its pattern and a point realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionWitness {
    pub pattern: ActivationPattern,
    pub witness: Vec<f64>,
}

/// Regions discovered inside a box, in deterministic first-found order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionCensus {
    pub regions: Vec<RegionWitness>,
}

impl RegionCensus {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn patterns(&self) -> HashSet<&ActivationPattern> {
        self.regions.iter().map(|r| &r.pattern).collect()
    }

    pub fn contains(&self, p: &ActivationPattern) -> bool {
        self.regions.iter().any(|r| &r.pattern == p)
    }
}

/// Enumerate activation regions of `net` that meet `domain`.
///
/// Every reported witness is re-validated: the network's own pattern at the
/// witness must equal the reported pattern, so the census never contains a
/// region the network does not realize.
pub fn enumerate_regions(
    net: &FeedforwardNetwork,
    domain: &BoundingBox,
    strategy: &Strategy,
) -> Result<RegionCensus> {
    if domain.dim() != net.input_dim() {
        return Err(Error::shape(
            "enumerate_regions",
            format!("domain of dimension {}", net.input_dim()),
            format!("{}", domain.dim()),
        ));
    }
    let mut census = RegionCensus::default();
    let mut seen: HashSet<ActivationPattern> = HashSet::new();
    match *strategy {
        Strategy::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let x = domain.sample(&mut rng);
                let p = net.pattern_of(&x)?;
                if seen.insert(p.clone()) {
                    census.regions.push(RegionWitness {
                        pattern: p,
                        witness: x,
                    });
                }
            }
        }
        Strategy::Exhaustive { cap, epsilon } => {
            let n = net.total_hidden_neurons();
            if n > cap as usize {
                return Err(Error::CapExceeded {
                    what: "exhaustive region enumeration over hidden neurons".into(),
                    needed: n as u128,
                    cap: cap as u128,
                });
            }
            let sizes = net.hidden_sizes();
            for code in 0u64..(1u64 << n) {
                let p = pattern_from_code(&sizes, code);
                let region = region_halfspaces(net, &p)?;
                let Some(witness) = feasible_point(region.halfspaces(), domain, epsilon)?
                else {
                    continue;
                };
                // LP numerics could in principle park the witness on the
                // wrong side of a tight constraint; only trust it when the
                // network itself confirms the pattern.
                if net.pattern_of(&witness)? != p {
                    continue;
                }
                if seen.insert(p.clone()) {
                    census.regions.push(RegionWitness {
                        pattern: p,
                        witness,
                    });
                }
            }
        }
    }
    Ok(census)
}

/// Pattern whose layer-major bit k is bit k of `code`.
fn pattern_from_code(hidden_sizes: &[usize], code: u64) -> ActivationPattern {
    let mut layers = Vec::with_capacity(hidden_sizes.len());
    let mut k = 0;
    for &size in hidden_sizes {
        let bits = (0..size).map(|i| (code >> (k + i)) & 1 == 1).collect();
        layers.push(PatternLayer::vector(bits));
        k += size;
    }
    ActivationPattern::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::DenseLayer;
    use crate::unwrap::unwrap_feedforward;
    use crate::linalg::Matrix;

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

    fn scalar_net(w: f64, b: f64) -> FeedforwardNetwork {
        FeedforwardNetwork::new(vec![
            DenseLayer::new(Matrix::from_rows(&[vec![w]]).unwrap(), vec![b]).unwrap(),
            DenseLayer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn single_neuron_region_by_hand() {
        let net = scalar_net(1.0, -0.5);
        let p = net.pattern_of(&[1.0]).unwrap();
        let r = region_halfspaces(&net, &p).unwrap();
        // Active neuron: {x - 0.5 > 0}.
        assert_eq!(r.halfspaces().len(), 1);
        assert_eq!(r.halfspaces()[0].normal(), &[1.0]);
        assert_eq!(r.halfspaces()[0].offset(), -0.5);
        assert!(r.membership(&[0.6]));
        assert!(!r.membership(&[0.4]));

        let q = net.pattern_of(&[0.0]).unwrap();
        let r = region_halfspaces(&net, &q).unwrap();
        // Inactive polarity flips both normal and offset.
        assert_eq!(r.halfspaces()[0].normal(), &[-1.0]);
        assert_eq!(r.halfspaces()[0].offset(), 0.5);
        assert!(r.membership(&[0.4]));
    }

    #[test]
    fn membership_agrees_with_pattern_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let net = rand_net(&mut rng, &[3, 5, 4, 2]);
        let mut checked = 0;
        for _ in 0..300 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = net.pattern_of(&x).unwrap();
            let region = region_halfspaces(&net, &p).unwrap();
            assert_eq!(region.halfspaces().len(), net.total_hidden_neurons());
            // Random points are generic; membership must hold at x itself.
            assert!(region.membership(&x));
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let same = net.pattern_of(&y).unwrap() == p;
            assert_eq!(region.membership(&y), same);
            checked += 1;
        }
        assert_eq!(checked, 300);
    }

    #[test]
    fn linear_model_exact_at_region_interior_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = rand_net(&mut rng, &[2, 4, 3, 1]);
        let domain = BoundingBox::uniform(2, -2.0, 2.0).unwrap();
        let census =
            enumerate_regions(&net, &domain, &Strategy::Sample { count: 200, seed: 7 }).unwrap();
        for rw in &census.regions {
            let m = unwrap_feedforward(&net, &rw.pattern).unwrap();
            let out = net.forward(&rw.witness).unwrap().0;
            let got = m.eval(&rw.witness).unwrap();
            for (a, b) in got.iter().zip(&out) {
                assert!((a - b).abs() <= 1e-9 * 1.0_f64.max(a.abs()).max(b.abs()));
            }
        }
    }

    #[test]
    fn dead_neuron_yields_degenerate_halfspace() {
        // First neuron inactive at x=0 zeroes the next layer's dependence
        // on the input, leaving a constant (degenerate) condition.
        let net = FeedforwardNetwork::new(vec![
            DenseLayer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![-1.0]).unwrap(),
            DenseLayer::new(Matrix::from_rows(&[vec![2.0]]).unwrap(), vec![3.0]).unwrap(),
            DenseLayer::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![0.0]).unwrap(),
        ])
        .unwrap();
        let p = net.pattern_of(&[0.0]).unwrap();
        let r = region_halfspaces(&net, &p).unwrap();
        assert!(!r.halfspaces()[0].is_degenerate());
        assert!(r.halfspaces()[1].is_degenerate());
        assert_eq!(r.halfspaces()[1].offset(), 3.0);
        assert!(r.membership(&[0.5]));
        assert!(!r.membership(&[2.0]));
        // The degenerate condition passes through the LP unchanged.
        let domain = BoundingBox::uniform(1, -2.0, 2.0).unwrap();
        let w = feasible_point(r.halfspaces(), &domain, 1e-7).unwrap().unwrap();
        assert_eq!(net.pattern_of(&w).unwrap(), p);
    }

    #[test]
    fn exhaustive_enumeration_of_two_breakpoints() {
        // Hidden neurons fire at x > 0 and x > 1; the joint pattern
        // (inactive, active) is unrealizable.
        let net = FeedforwardNetwork::new(vec![
            DenseLayer::new(
                Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap(),
                vec![0.0, -1.0],
            )
            .unwrap(),
            DenseLayer::new(Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![0.0]).unwrap(),
        ])
        .unwrap();
        let domain = BoundingBox::uniform(1, -2.0, 2.0).unwrap();
        let census = enumerate_regions(&net, &domain, &Strategy::exhaustive()).unwrap();
        assert_eq!(census.len(), 3);
        for rw in &census.regions {
            assert_eq!(net.pattern_of(&rw.witness).unwrap(), rw.pattern);
            assert!(domain.contains(&rw.witness));
        }
        let infeasible = ActivationPattern::new(vec![PatternLayer::vector(vec![false, true])]);
        assert!(!census.contains(&infeasible));
    }

    #[test]
    fn sampled_regions_are_a_subset_of_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let net = rand_net(&mut rng, &[2, 3, 2, 1]);
        let domain = BoundingBox::uniform(2, -2.0, 2.0).unwrap();
        let exhaustive = enumerate_regions(&net, &domain, &Strategy::exhaustive()).unwrap();
        let sampled =
            enumerate_regions(&net, &domain, &Strategy::Sample { count: 500, seed: 3 }).unwrap();
        let all = exhaustive.patterns();
        for rw in &sampled.regions {
            assert!(all.contains(&rw.pattern));
        }
        assert!(exhaustive.len() >= sampled.len());
    }

    #[test]
    fn enumeration_refuses_oversized_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let net = rand_net(&mut rng, &[2, 8, 8, 8, 1]);
        let domain = BoundingBox::uniform(2, -1.0, 1.0).unwrap();
        let err = enumerate_regions(&net, &domain, &Strategy::exhaustive()).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { needed: 24, cap: 20, .. }));
    }

    #[test]
    fn bounding_box_validation() {
        assert!(BoundingBox::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(BoundingBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoundingBox::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(BoundingBox::uniform(0, 0.0, 1.0).is_err());
    }

    #[test]
    fn feasible_point_respects_epsilon() {
        // {x > 1} inside [-2, 2] admits a deep point; {x > 2} does not.
        let domain = BoundingBox::uniform(1, -2.0, 2.0).unwrap();
        let deep = feasible_point(&[HalfSpace::new(vec![1.0], -1.0)], &domain, 1e-7)
            .unwrap()
            .unwrap();
        assert!(deep[0] > 1.0 && deep[0] <= 2.0);
        let empty = feasible_point(&[HalfSpace::new(vec![1.0], -2.0)], &domain, 1e-7).unwrap();
        assert!(empty.is_none());
        assert!(feasible_point(&[], &domain, 0.0).is_err());
    }
}
