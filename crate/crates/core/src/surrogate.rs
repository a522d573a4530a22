//! Exact surrogates: a multivariate regression tree and a propositional
//! theory, both replicating the network rather than approximating it.
//!
//! The tree splits on one hidden neuron at a time in fixed layer-major
//! order. Each split tests the neuron's preactivation as an affine
//! condition on the network input, valid under the branch taken so far, so
//! a root-to-leaf path fixes an activation pattern and the leaf holds that
//! pattern's local linear model.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::networks::{ActivationPattern, FeedforwardNetwork, PatternLayer};
use crate::regions::{feasible_point, BoundingBox, HalfSpace};
use crate::unwrap::{unwrap_feedforward, AffineAccumulator, LocalLinearModel};
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum MrtNode {
    Internal {
        layer: usize,
        neuron: usize,
        /// Activation condition of this neuron in input coordinates,
        /// given the branches taken above.
        condition: HalfSpace,
        active: Box<MrtNode>,
        inactive: Box<MrtNode>,
    },
    Leaf {
        model: LocalLinearModel,
        /// Set by [`Mrt::flag_infeasible_leaves`]; `None` until then.
        feasible: Option<bool>,
    },
}

/// Materialized regression tree equivalent to a feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrt {
    root: MrtNode,
    input_dim: usize,
    output_dim: usize,
}

/// Build the full tree; with N hidden neurons it has 2^N leaves, so the
/// call is refused when that exceeds `max_leaves`.
pub fn build_mrt(net: &FeedforwardNetwork, max_leaves: u64) -> Result<Mrt> {
    let n = net.total_hidden_neurons();
    let needed = 1u128.checked_shl(n as u32).unwrap_or(u128::MAX);
    if needed > max_leaves as u128 {
        return Err(Error::CapExceeded {
            what: "materialized tree leaves".into(),
            needed,
            cap: max_leaves as u128,
        });
    }
    let acc = AffineAccumulator::identity(net.input_dim());
    let mut bits: Vec<Vec<bool>> = Vec::with_capacity(net.num_hidden_layers());
    let root = split_layer(net, 0, acc, &mut bits)?;
    Ok(Mrt {
        root,
        input_dim: net.input_dim(),
        output_dim: net.output_dim(),
    })
}

fn split_layer(
    net: &FeedforwardNetwork,
    layer: usize,
    acc: AffineAccumulator,
    bits: &mut Vec<Vec<bool>>,
) -> Result<MrtNode> {
    if layer == net.num_hidden_layers() {
        let pattern = ActivationPattern::new(
            bits.iter().map(|b| PatternLayer::vector(b.clone())).collect(),
        );
        // The leaf model comes from the standalone unwrapper, so it is
        // bit-identical to what a caller would compute for this pattern.
        let model = unwrap_feedforward(net, &pattern)?;
        return Ok(MrtNode::Leaf {
            model,
            feasible: None,
        });
    }
    let stage = &net.hidden_layers()[layer];
    let pre = acc.stage(stage.weight(), stage.bias())?;
    bits.push(Vec::with_capacity(stage.out_dim()));
    let node = split_neuron(net, layer, 0, &acc, &pre, bits);
    bits.pop();
    node
}

fn split_neuron(
    net: &FeedforwardNetwork,
    layer: usize,
    neuron: usize,
    acc: &AffineAccumulator,
    pre: &(Matrix, Vec<f64>),
    bits: &mut Vec<Vec<bool>>,
) -> Result<MrtNode> {
    if neuron == net.hidden_layers()[layer].out_dim() {
        let mut next = acc.clone();
        next.advance(pre.clone(), bits.last().unwrap())?;
        return split_layer(net, layer + 1, next, bits);
    }
    let condition = HalfSpace::new(pre.0.row(neuron).to_vec(), pre.1[neuron]);
    bits.last_mut().unwrap().push(true);
    let active = split_neuron(net, layer, neuron + 1, acc, pre, bits)?;
    bits.last_mut().unwrap().pop();
    bits.last_mut().unwrap().push(false);
    let inactive = split_neuron(net, layer, neuron + 1, acc, pre, bits)?;
    bits.last_mut().unwrap().pop();
    Ok(MrtNode::Internal {
        layer,
        neuron,
        condition,
        active: Box::new(active),
        inactive: Box::new(inactive),
    })
}

impl Mrt {
    pub fn root(&self) -> &MrtNode {
        &self.root
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Walk conditions down to a leaf and evaluate its model. A condition
    /// holding with equality (preactivation exactly zero) takes the
    /// inactive branch, matching the strict activation convention.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::shape(
                "Mrt::eval",
                format!("input of length {}", self.input_dim),
                format!("{}", x.len()),
            ));
        }
        let mut node = &self.root;
        loop {
            match node {
                MrtNode::Internal {
                    condition,
                    active,
                    inactive,
                    ..
                } => {
                    node = if condition.satisfied(x) { active } else { inactive };
                }
                MrtNode::Leaf { model, .. } => return model.eval(x),
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        fn count(node: &MrtNode) -> usize {
            match node {
                MrtNode::Leaf { .. } => 1,
                MrtNode::Internal { active, inactive, .. } => count(active) + count(inactive),
            }
        }
        count(&self.root)
    }

    pub fn num_internal(&self) -> usize {
        self.num_leaves() - 1
    }

    /// Length of the longest root-to-leaf path in internal nodes; equal to
    /// the total hidden neuron count by construction.
    pub fn depth(&self) -> usize {
        fn depth(node: &MrtNode) -> usize {
            match node {
                MrtNode::Leaf { .. } => 0,
                MrtNode::Internal { active, inactive, .. } => {
                    1 + depth(active).max(depth(inactive))
                }
            }
        }
        depth(&self.root)
    }

    pub fn for_each_leaf(&self, mut f: impl FnMut(&LocalLinearModel, Option<bool>)) {
        fn walk(node: &MrtNode, f: &mut impl FnMut(&LocalLinearModel, Option<bool>)) {
            match node {
                MrtNode::Leaf { model, feasible } => f(model, *feasible),
                MrtNode::Internal { active, inactive, .. } => {
                    walk(active, f);
                    walk(inactive, f);
                }
            }
        }
        walk(&self.root, &mut f);
    }

    /// Mark each leaf with whether its path conditions admit an
    /// `epsilon`-deep point of `domain`; returns (feasible, infeasible)
    /// counts. Path conditions are exactly the region half-spaces of the
    /// leaf's pattern.
    pub fn flag_infeasible_leaves(
        &mut self,
        domain: &BoundingBox,
        epsilon: f64,
    ) -> Result<(usize, usize)> {
        fn walk(
            node: &mut MrtNode,
            path: &mut Vec<HalfSpace>,
            domain: &BoundingBox,
            epsilon: f64,
            counts: &mut (usize, usize),
        ) -> Result<()> {
            match node {
                MrtNode::Leaf { feasible, .. } => {
                    let ok = feasible_point(path, domain, epsilon)?.is_some();
                    *feasible = Some(ok);
                    if ok {
                        counts.0 += 1;
                    } else {
                        counts.1 += 1;
                    }
                    Ok(())
                }
                MrtNode::Internal {
                    condition,
                    active,
                    inactive,
                    ..
                } => {
                    path.push(condition.clone());
                    walk(active, path, domain, epsilon, counts)?;
                    path.pop();
                    let flipped: Vec<f64> = condition.normal().iter().map(|v| -v).collect();
                    path.push(HalfSpace::new(flipped, -condition.offset()));
                    walk(inactive, path, domain, epsilon, counts)?;
                    path.pop();
                    Ok(())
                }
            }
        }
        if domain.dim() != self.input_dim {
            return Err(Error::shape(
                "Mrt::flag_infeasible_leaves",
                format!("domain of dimension {}", self.input_dim),
                format!("{}", domain.dim()),
            ));
        }
        let mut counts = (0, 0);
        let mut path = Vec::new();
        walk(&mut self.root, &mut path, domain, epsilon, &mut counts)?;
        Ok(counts)
    }
}

/// Tree evaluator that never materializes nodes: it derives each split
/// condition on the way down. Output is bit-identical to the materialized
/// tree's.
pub struct LazyMrt<'a> {
    net: &'a FeedforwardNetwork,
}

impl<'a> LazyMrt<'a> {
    pub fn new(net: &'a FeedforwardNetwork) -> Self {
        Self { net }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_full(x)?.0)
    }

    /// Evaluate and also report which leaf (pattern) the walk reached.
    pub fn eval_full(&self, x: &[f64]) -> Result<(Vec<f64>, ActivationPattern)> {
        self.net.check_input(x)?;
        let mut acc = AffineAccumulator::identity(self.net.input_dim());
        let mut layers = Vec::with_capacity(self.net.num_hidden_layers());
        for stage in self.net.hidden_layers() {
            let pre = acc.stage(stage.weight(), stage.bias())?;
            let bits: Vec<bool> = (0..stage.out_dim())
                .map(|i| linalg::dot(pre.0.row(i), x) + pre.1[i] > 0.0)
                .collect();
            acc.advance(pre, &bits)?;
            layers.push(PatternLayer::vector(bits));
        }
        let readout = self.net.readout();
        let (w, b) = acc.stage(readout.weight(), readout.bias())?;
        let out = linalg::add_vec(&w.matvec(x)?, &b);
        Ok((out, ActivationPattern::new(layers)))
    }
}

/// One propositional atom: "neuron `neuron` of layer `layer` is active",
/// under the pattern prefix `prefix` for the layers below. The half-space
/// is the atom's truth condition in input coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryAtom {
    pub name: String,
    pub layer: usize,
    pub neuron: usize,
    pub prefix: Vec<Vec<bool>>,
    pub halfspace: HalfSpace,
}

/// Conjunction of literals describing one region; `literals` holds
/// (atom index, polarity).
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryTerm {
    pub region: String,
    pub literals: Vec<(usize, bool)>,
}

/// Propositional theory over activation atoms: each term is true exactly
/// on one region (up to region boundaries, where negated open conditions
/// and closed complements differ).
#[derive(Debug, Clone, PartialEq)]
pub struct Theory {
    pub atoms: Vec<TheoryAtom>,
    pub terms: Vec<TheoryTerm>,
}

fn atom_name(layer: usize, neuron: usize, prefix: &[Vec<bool>]) -> String {
    let mut name = format!("h{layer}_{neuron}");
    if !prefix.is_empty() {
        name.push('@');
        let encoded: Vec<String> = prefix
            .iter()
            .map(|bits| bits.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect();
        name.push_str(&encoded.join("."));
    }
    name
}

/// Export the given regions as a propositional theory. Atoms are shared
/// between terms whenever layer, neuron, and pattern prefix coincide.
pub fn export_theory(
    net: &FeedforwardNetwork,
    patterns: &[ActivationPattern],
) -> Result<Theory> {
    if patterns.is_empty() {
        return Err(Error::InvalidArgument {
            context: "export_theory".into(),
            message: "no patterns given".into(),
        });
    }
    let mut atoms: Vec<TheoryAtom> = Vec::new();
    let mut index: HashMap<(usize, usize, Vec<Vec<bool>>), usize> = HashMap::new();
    let mut terms = Vec::with_capacity(patterns.len());
    for (r, p) in patterns.iter().enumerate() {
        net.check_pattern(p)?;
        let mut literals = Vec::with_capacity(net.total_hidden_neurons());
        let mut acc = AffineAccumulator::identity(net.input_dim());
        let mut prefix: Vec<Vec<bool>> = Vec::new();
        for (l, stage) in net.hidden_layers().iter().enumerate() {
            let pre = acc.stage(stage.weight(), stage.bias())?;
            for i in 0..stage.out_dim() {
                let key = (l, i, prefix.clone());
                let atom_idx = match index.get(&key) {
                    Some(&idx) => idx,
                    None => {
                        let idx = atoms.len();
                        atoms.push(TheoryAtom {
                            name: atom_name(l, i, &prefix),
                            layer: l,
                            neuron: i,
                            prefix: prefix.clone(),
                            halfspace: HalfSpace::new(pre.0.row(i).to_vec(), pre.1[i]),
                        });
                        index.insert(key, idx);
                        idx
                    }
                };
                literals.push((atom_idx, p.layer(l).bits()[i]));
            }
            let bits = p.layer(l).bits().to_vec();
            acc.advance(pre, &bits)?;
            prefix.push(bits);
        }
        terms.push(TheoryTerm {
            region: format!("r{r}"),
            literals,
        });
    }
    Ok(Theory { atoms, terms })
}

impl Theory {
    /// Truth of one term at `x`: every positive literal's half-space holds
    /// strictly and every negated one fails.
    pub fn term_satisfied(&self, term: &TheoryTerm, x: &[f64]) -> bool {
        term.literals
            .iter()
            .all(|&(idx, pos)| self.atoms[idx].halfspace.satisfied(x) == pos)
    }

    /// Line-oriented text form: one `atom` line per atom (name, layer,
    /// neuron, normal coefficients, offset) and one `term` line per term
    /// (region id, literal names, `!` marking negation). Numbers print in
    /// shortest round-trip form, so parsing back is lossless.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for a in &self.atoms {
            write!(s, "atom {} {} {}", a.name, a.layer, a.neuron).unwrap();
            for v in a.halfspace.normal() {
                write!(s, " {v}").unwrap();
            }
            writeln!(s, " {}", a.halfspace.offset()).unwrap();
        }
        for t in &self.terms {
            write!(s, "term {}", t.region).unwrap();
            for &(idx, pos) in &t.literals {
                write!(s, " {}{}", if pos { "" } else { "!" }, self.atoms[idx].name).unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Theory> {
        fn parse_err(line_no: usize, message: impl Into<String>) -> Error {
            Error::Parse {
                message: format!("theory line {}: {}", line_no + 1, message.into()),
            }
        }
        let mut atoms = Vec::new();
        let mut by_name: HashMap<String, usize> = HashMap::new();
        let mut terms = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.first() {
                None => continue,
                Some(&"atom") => {
                    if tokens.len() < 6 {
                        return Err(parse_err(line_no, "atom needs name, layer, neuron, at least one normal coefficient, and an offset"));
                    }
                    let name = tokens[1].to_string();
                    let layer: usize = tokens[2]
                        .parse()
                        .map_err(|_| parse_err(line_no, "bad layer index"))?;
                    let neuron: usize = tokens[3]
                        .parse()
                        .map_err(|_| parse_err(line_no, "bad neuron index"))?;
                    let nums: Vec<f64> = tokens[4..]
                        .iter()
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err(line_no, "bad coefficient"))?;
                    let (normal, offset) = nums.split_at(nums.len() - 1);
                    let prefix = match name.split_once('@') {
                        None => Vec::new(),
                        Some((_, enc)) => enc
                            .split('.')
                            .map(|bits| bits.chars().map(|c| c == '1').collect())
                            .collect(),
                    };
                    if by_name.insert(name.clone(), atoms.len()).is_some() {
                        return Err(parse_err(line_no, format!("duplicate atom {name}")));
                    }
                    atoms.push(TheoryAtom {
                        name,
                        layer,
                        neuron,
                        prefix,
                        halfspace: HalfSpace::new(normal.to_vec(), offset[0]),
                    });
                }
                Some(&"term") => {
                    if tokens.len() < 2 {
                        return Err(parse_err(line_no, "term needs a region id"));
                    }
                    let literals = tokens[2..]
                        .iter()
                        .map(|lit| {
                            let (pos, name) = match lit.strip_prefix('!') {
                                Some(rest) => (false, rest),
                                None => (true, *lit),
                            };
                            by_name
                                .get(name)
                                .map(|&idx| (idx, pos))
                                .ok_or_else(|| parse_err(line_no, format!("unknown atom {name}")))
                        })
                        .collect::<Result<_>>()?;
                    terms.push(TheoryTerm {
                        region: tokens[1].to_string(),
                        literals,
                    });
                }
                Some(other) => {
                    return Err(parse_err(line_no, format!("unknown record {other}")));
                }
            }
        }
        Ok(Theory { atoms, terms })
    }
}
