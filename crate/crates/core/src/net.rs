//! Directed binary belief networks whose energy is the negative log of a product of
//! per-unit Bernoulli conditionals `f(M_i)`.
//!
//! Units are stored in a fixed topological order: every edge points from a lower index
//! (parent) to a higher index (child). Indices are 0-based in the API and 1-based in the
//! text format.

use crate::activation::ActivationKind;
use crate::error::{Error, Result};

/// A weighted edge `parent -> child` with `parent < child`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub child: usize,
    pub parent: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(child: usize, parent: usize, weight: f64) -> Self {
        Edge {
            child,
            parent,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNetwork {
    activation: ActivationKind,
    biases: Vec<f64>,
    /// Sorted by `(child, parent)`.
    edges: Vec<Edge>,
    /// `parent_start[i]..parent_start[i + 1]` indexes the incoming edges of unit `i`.
    parent_start: Vec<usize>,
    /// Outgoing edge indices per unit, ascending by child.
    child_edges: Vec<Vec<usize>>,
    /// Dense row-major `n x n` copy of the weights (zero off the edge set).
    dense: Vec<f64>,
    visible: Vec<usize>,
    is_visible: Vec<bool>,
}

impl BeliefNetwork {
    /// Builds and validates a network. `visible` may be given in any order.
    pub fn new(
        activation: ActivationKind,
        biases: Vec<f64>,
        mut edges: Vec<Edge>,
        mut visible: Vec<usize>,
    ) -> Result<Self> {
        let n = biases.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        for e in &edges {
            for idx in [e.child, e.parent] {
                if idx >= n {
                    return Err(Error::BadIndex {
                        index: idx + 1,
                        n_units: n,
                    });
                }
            }
            if e.parent >= e.child {
                return Err(Error::Acyclicity {
                    child: e.child + 1,
                    parent: e.parent + 1,
                });
            }
        }
        edges.sort_by_key(|e| (e.child, e.parent));
        for pair in edges.windows(2) {
            if pair[0].child == pair[1].child && pair[0].parent == pair[1].parent {
                return Err(Error::Duplicate {
                    what: "edge",
                    index: format!("({}, {})", pair[0].child + 1, pair[0].parent + 1),
                });
            }
        }
        visible.sort_unstable();
        for pair in visible.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::Duplicate {
                    what: "visible entry",
                    index: (pair[0] + 1).to_string(),
                });
            }
        }
        if let Some(&bad) = visible.iter().find(|&&v| v >= n) {
            return Err(Error::BadIndex {
                index: bad + 1,
                n_units: n,
            });
        }

        let mut parent_start = vec![0; n + 1];
        for e in &edges {
            parent_start[e.child + 1] += 1;
        }
        for i in 0..n {
            parent_start[i + 1] += parent_start[i];
        }
        let mut child_edges = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            child_edges[e.parent].push(k);
        }
        let mut is_visible = vec![false; n];
        for &v in &visible {
            is_visible[v] = true;
        }
        let mut net = BeliefNetwork {
            activation,
            biases,
            edges,
            parent_start,
            child_edges,
            dense: vec![0.0; n * n],
            visible,
            is_visible,
        };
        net.rebuild_dense();
        net.validate()?;
        Ok(net)
    }

    /// Checks every parameter invariant. Structural invariants (edge direction, index range)
    /// are enforced by construction.
    pub fn validate(&self) -> Result<()> {
        for (i, &h) in self.biases.iter().enumerate() {
            if !h.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("bias of unit {}", i + 1),
                });
            }
            if self.activation == ActivationKind::NoisyOr && h < 0.0 {
                return Err(Error::NegativeBias { unit: i + 1, bias: h });
            }
        }
        for e in &self.edges {
            if !e.weight.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("weight ({}, {})", e.child + 1, e.parent + 1),
                });
            }
            if self.activation == ActivationKind::NoisyOr && e.weight < 0.0 {
                return Err(Error::NegativeWeight {
                    child: e.child + 1,
                    parent: e.parent + 1,
                    weight: e.weight,
                });
            }
        }
        Ok(())
    }

    fn rebuild_dense(&mut self) {
        let n = self.n_units();
        self.dense.iter_mut().for_each(|w| *w = 0.0);
        for e in &self.edges {
            self.dense[e.child * n + e.parent] = e.weight;
        }
    }

    pub fn n_units(&self) -> usize {
        self.biases.len()
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn bias(&self, i: usize) -> f64 {
        self.biases[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// `w_ij`, zero when there is no edge `j -> i`.
    #[inline]
    pub fn weight(&self, child: usize, parent: usize) -> f64 {
        self.dense[child * self.n_units() + parent]
    }

    /// Incoming edges of unit `i`, ascending by parent.
    #[inline]
    pub fn parents(&self, i: usize) -> &[Edge] {
        &self.edges[self.parent_start[i]..self.parent_start[i + 1]]
    }

    /// Position of edge `parent -> child` within [`edges`](Self::edges).
    pub fn edge_index(&self, child: usize, parent: usize) -> Option<usize> {
        let range = self.parent_edge_range(child);
        self.edges[range.clone()]
            .binary_search_by_key(&parent, |e| e.parent)
            .ok()
            .map(|k| range.start + k)
    }

    /// Index range of the incoming edges of `i` within [`edges`](Self::edges).
    pub fn parent_edge_range(&self, i: usize) -> std::ops::Range<usize> {
        self.parent_start[i]..self.parent_start[i + 1]
    }

    /// Outgoing edges of unit `j` as `(edge index, edge)`.
    pub fn children(&self, j: usize) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.child_edges[j].iter().map(move |&k| (k, &self.edges[k]))
    }

    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn is_visible(&self, i: usize) -> bool {
        self.is_visible[i]
    }

    pub fn hidden(&self) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| !self.is_visible[i]).collect()
    }

    pub fn set_weight(&mut self, edge: usize, weight: f64) {
        let e = &mut self.edges[edge];
        e.weight = weight;
        let n = self.biases.len();
        self.dense[e.child * n + e.parent] = weight;
    }

    pub fn set_bias(&mut self, unit: usize, bias: f64) {
        self.biases[unit] = bias;
    }

    /// Same topology and visible set with every weight and bias replaced.
    pub fn with_parameters(&self, weights: &[f64], biases: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Dimension {
                what: "weights",
                got: weights.len(),
                expected: self.edges.len(),
            });
        }
        if biases.len() != self.n_units() {
            return Err(Error::Dimension {
                what: "biases",
                got: biases.len(),
                expected: self.n_units(),
            });
        }
        let mut out = self.clone();
        for (k, &w) in weights.iter().enumerate() {
            out.set_weight(k, w);
        }
        out.biases.copy_from_slice(biases);
        out.validate()?;
        Ok(out)
    }

    /// `sum_{j<i} w_ij x_j + h_i` for any per-unit values `x` (binary states or means).
    #[inline]
    pub fn field(&self, x: &[f64], i: usize) -> f64 {
        self.parents(i)
            .iter()
            .fold(self.biases[i], |acc, e| acc + e.weight * x[e.parent])
    }
}

/// A full binary assignment to all units.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State(Vec<u8>);

impl State {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some((i, &b)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(Error::Parse(format!("state entry {} is {b}, expected 0 or 1", i + 1)));
        }
        Ok(State(bits))
    }

    /// The state whose unit `i` is bit `i` of `code`.
    pub fn from_code(code: u64, n: usize) -> Self {
        State((0..n).map(|i| ((code >> i) & 1) as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }
}

/// Per-unit means. Pinned entries hold an observed value in {0, 1}; solvers never move them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector {
    u: Vec<f64>,
    pinned: Vec<bool>,
}

impl MeanVector {
    pub fn new(u: Vec<f64>, pinned: Vec<bool>) -> Result<Self> {
        if u.len() != pinned.len() {
            return Err(Error::Dimension {
                what: "pinned flags",
                got: pinned.len(),
                expected: u.len(),
            });
        }
        for (i, (&x, &p)) in u.iter().zip(&pinned).enumerate() {
            if p {
                if x != 0.0 && x != 1.0 {
                    return Err(Error::InvalidMean {
                        index: i + 1,
                        value: x,
                        reason: "pinned entries must be 0 or 1",
                    });
                }
            } else if !(x > 0.0 && x < 1.0) {
                return Err(Error::InvalidMean {
                    index: i + 1,
                    value: x,
                    reason: "free entries must lie strictly inside (0, 1)",
                });
            }
        }
        Ok(MeanVector { u, pinned })
    }

    /// All units free.
    pub fn free(u: Vec<f64>) -> Result<Self> {
        let n = u.len();
        Self::new(u, vec![false; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.u[i]
    }

    /// Indices of the free (unpinned) entries.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.u.len()).filter(|&i| !self.pinned[i]).collect()
    }

    /// Overwrites a free entry. Panics on a pinned one.
    pub(crate) fn set(&mut self, i: usize, value: f64) {
        assert!(!self.pinned[i], "attempt to modify pinned unit {i}");
        self.u[i] = value;
    }

    /// Copy with free entries replaced; pinned entries of `values` are ignored.
    pub fn with_free_values(&self, values: &[f64]) -> Result<Self> {
        let u = self
            .u
            .iter()
            .zip(values)
            .zip(&self.pinned)
            .map(|((&old, &new), &p)| if p { old } else { new })
            .collect();
        Self::new(u, self.pinned.clone())
    }
}

/// `M_i` for a binary state.
pub fn local_field(net: &BeliefNetwork, state: &State, i: usize) -> f64 {
    net.parents(i)
        .iter()
        .fold(net.bias(i), |acc, e| acc + e.weight * f64::from(state.bits()[e.parent]))
}

/// `M̄_i = sum_j w_ij u_j + h_i`.
pub fn mean_field_input(net: &BeliefNetwork, u: &MeanVector, i: usize) -> f64 {
    net.field(u.values(), i)
}

/// `-sum_i [s_i ln f(M_i) + (1 - s_i) ln(1 - f(M_i))]`, i.e. `-ln P(state)`.
pub fn energy(net: &BeliefNetwork, state: &State) -> f64 {
    energy_of_values(net, &state.as_f64())
}

/// [`energy`] for a state given as 0.0/1.0 values, the form used by the enumerators.
pub(crate) fn energy_of_values(net: &BeliefNetwork, s: &[f64]) -> f64 {
    let kind = net.activation();
    let mut e = 0.0;
    for i in 0..net.n_units() {
        let (ln_f, ln_1mf) = kind.log_probs(net.field(s, i));
        e -= if s[i] != 0.0 { ln_f } else { ln_1mf };
    }
    e
}

/// Order-`order` Taylor expansion in `beta` of the energy with parent fields
/// `beta * X_i + M̄_i`, where `X_i = sum_j w_ij (s_j - u_j)`. At `beta = 1` with exact
/// (infinite) order this would be the true energy.
pub fn taylor_energy(
    net: &BeliefNetwork,
    u: &MeanVector,
    state: &State,
    beta: f64,
    order: usize,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!("beta {beta} outside [0, 1]")));
    }
    if order == 0 || order > 2 {
        return Err(Error::Config(format!("Taylor order {order} not in {{1, 2}}")));
    }
    check_len(net, u.len(), "mean vector")?;
    check_len(net, state.len(), "state")?;
    Ok(taylor_energy_values(net, u.values(), &state.as_f64(), beta, order))
}

pub(crate) fn taylor_energy_values(
    net: &BeliefNetwork,
    u: &[f64],
    s: &[f64],
    beta: f64,
    order: usize,
) -> f64 {
    use crate::activation::LogScoreDerivs;
    let kind = net.activation();
    let mut e = 0.0;
    for i in 0..net.n_units() {
        let mbar = net.field(u, i);
        let d = LogScoreDerivs::at(kind, mbar);
        let x: f64 = net
            .parents(i)
            .iter()
            .map(|p| p.weight * (s[p.parent] - u[p.parent]))
            .sum();
        let on = s[i] != 0.0;
        let pick = |a: f64, b: f64| if on { a } else { b };
        let mut term = pick(d.ln_f, d.ln_1mf);
        if order >= 1 {
            term += beta * x * pick(d.a1, d.b1);
        }
        if order >= 2 {
            term += 0.5 * beta * beta * x * x * pick(d.a2, d.b2);
        }
        e -= term;
    }
    e
}

pub(crate) fn check_len(net: &BeliefNetwork, got: usize, what: &'static str) -> Result<()> {
    if got != net.n_units() {
        return Err(Error::Dimension {
            what,
            got,
            expected: net.n_units(),
        });
    }
    Ok(())
}
