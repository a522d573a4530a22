//! Exact Shapley attributions for ReLU networks under baseline masking.
//!
//! The value of a coalition S is the network output at the point keeping
//! the coordinates in S from the input and taking the rest from the
//! baseline. The brute-force path evaluates that value with forward passes
//! only. The global path instead looks up each masked point's local linear
//! model by pattern and evaluates the affine map, memoizing models per
//! pattern; since the models are exact on their regions, the two paths
//! agree. The local path is the single-region shortcut: when every masked
//! point stays in the input's region, the attribution collapses to
//! `weight[j][i] * (x_i - baseline_i)`.
//!
//! Coalition evaluations are independent of one another; the memo table is
//! the only shared state.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::networks::{ActivationPattern, FeedforwardNetwork};
use crate::unwrap::{unwrap_feedforward, LocalLinearModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::rc::Rc;

/// Default ceiling on feature count for exact coalition enumeration.
pub const EXACT_FEATURE_CAP: usize = 20;

/// Seed for the sampled same-region check used when a network has too many
/// features to test every coalition.
const LOCAL_CHECK_SEED: u64 = 0x0b5e55ed;

/// Subset of feature indices kept (unmasked) when forming a coalition
/// point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionMask {
    included: Vec<bool>,
}

impl CoalitionMask {
    pub fn empty(n: usize) -> Self {
        Self {
            included: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            included: vec![true; n],
        }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut included = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(Error::InvalidArgument {
                    context: "CoalitionMask::from_indices".into(),
                    message: format!("feature index {i} out of range for {n} features"),
                });
            }
            included[i] = true;
        }
        Ok(Self { included })
    }

    pub(crate) fn from_bits(included: Vec<bool>) -> Self {
        Self { included }
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.included[i]
    }

    pub fn cardinality(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.included.len()).filter(|&i| self.included[i]).collect()
    }
}

/// Point keeping coordinates in `s` from `x` and the rest from `baseline`.
pub fn masked_input(x: &[f64], baseline: &[f64], s: &CoalitionMask) -> Vec<f64> {
    assert_eq!(x.len(), baseline.len());
    assert_eq!(x.len(), s.len());
    x.iter()
        .zip(baseline)
        .zip(&s.included)
        .map(|((&a, &b), &keep)| if keep { a } else { b })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributionMode {
    BruteForce,
    Local,
    Global,
    GlobalSampled { permutations: usize, seed: u64 },
}

impl AttributionMode {
    pub fn label(&self) -> &'static str {
        match self {
            AttributionMode::BruteForce => "bruteforce",
            AttributionMode::Local => "local",
            AttributionMode::Global | AttributionMode::GlobalSampled { .. } => "global",
        }
    }
}

/// How the local-mode same-region precondition was established.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreconditionCheck {
    /// Every coalition point was tested.
    Exhaustive,
    /// Only this many coalition points were tested; the result is flagged
    /// approximate.
    Sampled { coalitions: usize },
}

/// Work counters for the global mode's memoized evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShapStats {
    /// Distinct coalition points evaluated.
    pub masked_points: usize,
    /// Marginal contributions accumulated.
    pub coalitions: usize,
    /// Local models actually computed (memo misses).
    pub unwrap_calls: usize,
    /// Memo lookups answered without computing a model.
    pub pattern_cache_hits: usize,
    /// Distinct activation patterns among the coalition points.
    pub distinct_patterns: usize,
}

/// Per-feature, per-output Shapley values with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    values: Matrix,
    input: Vec<f64>,
    baseline: Vec<f64>,
    mode: AttributionMode,
    stats: Option<ShapStats>,
    precondition_check: Option<PreconditionCheck>,
}

impl Attribution {
    /// Feature-by-output matrix; entry (i, j) attributes output j to
    /// feature i.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn value(&self, feature: usize, output: usize) -> f64 {
        self.values.get(feature, output)
    }

    pub fn num_features(&self) -> usize {
        self.values.rows()
    }

    pub fn num_outputs(&self) -> usize {
        self.values.cols()
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn mode(&self) -> &AttributionMode {
        &self.mode
    }

    pub fn stats(&self) -> Option<&ShapStats> {
        self.stats.as_ref()
    }

    pub fn precondition_check(&self) -> Option<&PreconditionCheck> {
        self.precondition_check.as_ref()
    }

    /// Column sums: should equal f(x) - f(baseline) per output for the
    /// brute-force and global modes (efficiency axiom).
    pub fn sum_per_output(&self) -> Vec<f64> {
        (0..self.values.cols())
            .map(|j| (0..self.values.rows()).map(|i| self.values.get(i, j)).sum())
            .collect()
    }
}

fn validate_pair(net: &FeedforwardNetwork, x: &[f64], baseline: &[f64]) -> Result<usize> {
    net.check_input(x)?;
    net.check_input(baseline)?;
    Ok(net.input_dim())
}

fn check_exact_cap(n: usize, cap: usize, what: &str) -> Result<()> {
    if n > cap {
        return Err(Error::CapExceeded {
            what: what.into(),
            needed: n as u128,
            cap: cap as u128,
        });
    }
    if n > 63 {
        return Err(Error::InvalidArgument {
            context: "coalition enumeration".into(),
            message: format!("exact enumeration supports at most 63 features, got {n}"),
        });
    }
    Ok(())
}

/// Shapley kernel by coalition size: `w[s] = s! (n-s-1)! / n!`, computed
/// as `1 / (n * C(n-1, s))`.
fn shapley_weights(n: usize) -> Vec<f64> {
    let mut weights = Vec::with_capacity(n);
    let mut binom = 1.0;
    for s in 0..n {
        weights.push(1.0 / (n as f64 * binom));
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    weights
}

fn keep_bits(n: usize, mask: u64) -> Vec<bool> {
    (0..n).map(|d| mask >> d & 1 == 1).collect()
}

/// Shapley sum over all coalitions given a value-by-mask table.
fn exact_shapley_from_values(n: usize, m: usize, v: &[Vec<f64>]) -> Vec<f64> {
    let weights = shapley_weights(n);
    let mut phi = vec![0.0; n * m];
    for i in 0..n {
        let bit = 1u64 << i;
        for mask in 0..(1u64 << n) {
            if mask & bit != 0 {
                continue;
            }
            let w = weights[mask.count_ones() as usize];
            let with = &v[(mask | bit) as usize];
            let without = &v[mask as usize];
            for j in 0..m {
                phi[i * m + j] += w * (with[j] - without[j]);
            }
        }
    }
    phi
}

/// Reference oracle: exact Shapley values computed purely from forward
/// passes, refusing beyond [`EXACT_FEATURE_CAP`] features.
pub fn shap_bruteforce(
    net: &FeedforwardNetwork,
    x: &[f64],
    baseline: &[f64],
) -> Result<Attribution> {
    shap_bruteforce_with_cap(net, x, baseline, EXACT_FEATURE_CAP)
}

pub fn shap_bruteforce_with_cap(
    net: &FeedforwardNetwork,
    x: &[f64],
    baseline: &[f64],
    cap: usize,
) -> Result<Attribution> {
    let n = validate_pair(net, x, baseline)?;
    check_exact_cap(n, cap, "brute-force attribution over coalitions")?;
    let m = net.output_dim();
    let mut v = Vec::with_capacity(1usize << n);
    for mask in 0..(1u64 << n) {
        let keep = CoalitionMask::from_bits(keep_bits(n, mask));
        let point = masked_input(x, baseline, &keep);
        v.push(net.forward(&point)?.0);
    }
    let phi = exact_shapley_from_values(n, m, &v);
    Ok(Attribution {
        values: Matrix::new(n, m, phi)?,
        input: x.to_vec(),
        baseline: baseline.to_vec(),
        mode: AttributionMode::BruteForce,
        stats: None,
        precondition_check: None,
    })
}

/// Pattern-keyed store of local linear models.
struct ModelMemo<'a> {
    net: &'a FeedforwardNetwork,
    map: HashMap<ActivationPattern, Rc<LocalLinearModel>>,
    unwrap_calls: usize,
    hits: usize,
}

impl<'a> ModelMemo<'a> {
    fn new(net: &'a FeedforwardNetwork) -> Self {
        Self {
            net,
            map: HashMap::new(),
            unwrap_calls: 0,
            hits: 0,
        }
    }

    fn model(&mut self, p: &ActivationPattern) -> Result<Rc<LocalLinearModel>> {
        if let Some(m) = self.map.get(p) {
            self.hits += 1;
            return Ok(m.clone());
        }
        self.unwrap_calls += 1;
        let m = Rc::new(unwrap_feedforward(self.net, p)?);
        self.map.insert(p.clone(), m.clone());
        Ok(m)
    }

    /// Value of a coalition point through its local model.
    fn value_at(&mut self, point: &[f64]) -> Result<Vec<f64>> {
        let pattern = self.net.pattern_of(point)?;
        let model = self.model(&pattern)?;
        model.eval(point)
    }
}

/// Exact Shapley values where every coalition value comes from the masked
/// point's local linear model instead of a forward pass, with models
/// memoized per activation pattern. Refuses beyond [`EXACT_FEATURE_CAP`]
/// features; use [`shap_global_sampled`] past the cap.
pub fn shap_global(net: &FeedforwardNetwork, x: &[f64], baseline: &[f64]) -> Result<Attribution> {
    shap_global_with_cap(net, x, baseline, EXACT_FEATURE_CAP)
}

pub fn shap_global_with_cap(
    net: &FeedforwardNetwork,
    x: &[f64],
    baseline: &[f64],
    cap: usize,
) -> Result<Attribution> {
    let n = validate_pair(net, x, baseline)?;
    check_exact_cap(n, cap, "exact attribution over coalitions (pass a sample size to go beyond)")?;
    let m = net.output_dim();
    let mut memo = ModelMemo::new(net);
    let mut v = Vec::with_capacity(1usize << n);
    for mask in 0..(1u64 << n) {
        let keep = CoalitionMask::from_bits(keep_bits(n, mask));
        let point = masked_input(x, baseline, &keep);
        v.push(memo.value_at(&point)?);
    }
    let phi = exact_shapley_from_values(n, m, &v);
    let stats = ShapStats {
        masked_points: 1 << n,
        coalitions: n * (1 << (n - 1)),
        unwrap_calls: memo.unwrap_calls,
        pattern_cache_hits: memo.hits,
        distinct_patterns: memo.map.len(),
    };
    Ok(Attribution {
        values: Matrix::new(n, m, phi)?,
        input: x.to_vec(),
        baseline: baseline.to_vec(),
        mode: AttributionMode::Global,
        stats: Some(stats),
        precondition_check: None,
    })
}

/// Monte Carlo estimate of the global values: averages marginal
/// contributions along seeded random feature orderings. Coalition values
/// still come from memoized local models, and identical seeds give
/// identical output.
pub fn shap_global_sampled(
    net: &FeedforwardNetwork,
    x: &[f64],
    baseline: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    let n = validate_pair(net, x, baseline)?;
    if permutations == 0 {
        return Err(Error::InvalidArgument {
            context: "shap_global_sampled".into(),
            message: "need at least one permutation".into(),
        });
    }
    let m = net.output_dim();
    let mut memo = ModelMemo::new(net);
    let mut point_values: HashMap<Vec<bool>, Vec<f64>> = HashMap::new();
    let mut coalitions = 0usize;
    let mut phi = vec![0.0; n * m];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut keep = vec![false; n];
        let mut prev = cached_value(&mut memo, &mut point_values, x, baseline, &keep)?;
        for &i in &order {
            keep[i] = true;
            let cur = cached_value(&mut memo, &mut point_values, x, baseline, &keep)?;
            for j in 0..m {
                phi[i * m + j] += cur[j] - prev[j];
            }
            coalitions += 1;
            prev = cur;
        }
    }
    let scale = 1.0 / permutations as f64;
    for v in &mut phi {
        *v *= scale;
    }
    let stats = ShapStats {
        masked_points: point_values.len(),
        coalitions,
        unwrap_calls: memo.unwrap_calls,
        pattern_cache_hits: memo.hits,
        distinct_patterns: memo.map.len(),
    };
    Ok(Attribution {
        values: Matrix::new(n, m, phi)?,
        input: x.to_vec(),
        baseline: baseline.to_vec(),
        mode: AttributionMode::GlobalSampled { permutations, seed },
        stats: Some(stats),
        precondition_check: None,
    })
}

fn cached_value(
    memo: &mut ModelMemo,
    point_values: &mut HashMap<Vec<bool>, Vec<f64>>,
    x: &[f64],
    baseline: &[f64],
    keep: &[bool],
) -> Result<Vec<f64>> {
    if let Some(v) = point_values.get(keep) {
        return Ok(v.clone());
    }
    let point = masked_input(x, baseline, &CoalitionMask::from_bits(keep.to_vec()));
    let v = memo.value_at(&point)?;
    point_values.insert(keep.to_vec(), v.clone());
    Ok(v)
}

/// Single-region Shapley values: `values[i][j] = weight[j][i] * (x_i -
/// baseline_i)` from the local model at x's pattern.
///
/// Valid only when every coalition point lies in x's region. The check is
/// exhaustive up to [`EXACT_FEATURE_CAP`] features; beyond that it covers
/// the empty, full, single-kept, and single-dropped coalitions plus 512
/// seeded pseudo-random ones, and the result is flagged approximate.
pub fn shap_local(net: &FeedforwardNetwork, x: &[f64], baseline: &[f64]) -> Result<Attribution> {
    let n = validate_pair(net, x, baseline)?;
    let p = net.pattern_of(x)?;
    let check = check_same_region(net, x, baseline, &p, n)?;
    let model = unwrap_feedforward(net, &p)?;
    let m = net.output_dim();
    let mut phi = vec![0.0; n * m];
    for i in 0..n {
        let delta = x[i] - baseline[i];
        for j in 0..m {
            phi[i * m + j] = model.weight().get(j, i) * delta;
        }
    }
    Ok(Attribution {
        values: Matrix::new(n, m, phi)?,
        input: x.to_vec(),
        baseline: baseline.to_vec(),
        mode: AttributionMode::Local,
        stats: None,
        precondition_check: Some(check),
    })
}

fn check_same_region(
    net: &FeedforwardNetwork,
    x: &[f64],
    baseline: &[f64],
    p: &ActivationPattern,
    n: usize,
) -> Result<PreconditionCheck> {
    let test = |keep: Vec<bool>| -> Result<()> {
        let mask = CoalitionMask::from_bits(keep);
        let point = masked_input(x, baseline, &mask);
        if &net.pattern_of(&point)? != p {
            return Err(Error::LocalShapPrecondition {
                message: format!(
                    "masking to coalition {:?} moves the point into a different activation \
                     region, so the single-region shortcut is not exact here",
                    mask.indices()
                ),
            });
        }
        Ok(())
    };
    if n <= EXACT_FEATURE_CAP.min(63) {
        for mask in 0..(1u64 << n) {
            test(keep_bits(n, mask))?;
        }
        return Ok(PreconditionCheck::Exhaustive);
    }
    let mut count = 0;
    for keep in [vec![false; n], vec![true; n]] {
        test(keep)?;
        count += 1;
    }
    for i in 0..n {
        let mut only = vec![false; n];
        only[i] = true;
        test(only)?;
        let mut all_but = vec![true; n];
        all_but[i] = false;
        test(all_but)?;
        count += 2;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(LOCAL_CHECK_SEED);
    for _ in 0..512 {
        test((0..n).map(|_| rng.gen_bool(0.5)).collect())?;
        count += 1;
    }
    Ok(PreconditionCheck::Sampled { coalitions: count })
}
