use crate::error::{Error, Result};
use crate::net::{BeliefNetwork, MeanVector};

/// A network together with observed values for a set of pinned units.
///
/// [`ClampContext::clamped`] pins exactly the network's visible units;
/// [`ClampContext::unclamped`] pins nothing, so sums run over all `2^N` states.
#[derive(Debug, Clone)]
pub struct ClampContext<'a> {
    net: &'a BeliefNetwork,
    pinned: Vec<Option<u8>>,
}

impl<'a> ClampContext<'a> {
    /// `values[k]` is the observation for `net.visible()[k]`.
    pub fn clamped(net: &'a BeliefNetwork, values: &[u8]) -> Result<Self> {
        if values.len() != net.visible().len() {
            return Err(Error::Dimension {
                what: "visible assignment",
                got: values.len(),
                expected: net.visible().len(),
            });
        }
        let mut pinned = vec![None; net.n_units()];
        for (&unit, &v) in net.visible().iter().zip(values) {
            if v > 1 {
                return Err(Error::Parse(format!(
                    "observation for unit {} is {v}, expected 0 or 1",
                    unit + 1
                )));
            }
            pinned[unit] = Some(v);
        }
        Ok(ClampContext { net, pinned })
    }

    pub fn unclamped(net: &'a BeliefNetwork) -> Self {
        ClampContext {
            net,
            pinned: vec![None; net.n_units()],
        }
    }

    /// Visible units all observed as zero.
    pub fn zeros(net: &'a BeliefNetwork) -> Self {
        Self::clamped(net, &vec![0; net.visible().len()]).expect("sizes agree by construction")
    }

    pub fn net(&self) -> &'a BeliefNetwork {
        self.net
    }

    pub fn pinned_value(&self, i: usize) -> Option<u8> {
        self.pinned[i]
    }

    pub fn free_units(&self) -> Vec<usize> {
        (0..self.pinned.len())
            .filter(|&i| self.pinned[i].is_none())
            .collect()
    }

    pub fn n_free(&self) -> usize {
        self.pinned.iter().filter(|p| p.is_none()).count()
    }

    /// Observed values in visible order (empty when unclamped).
    pub fn assignment(&self) -> Vec<u8> {
        self.net
            .visible()
            .iter()
            .filter_map(|&v| self.pinned[v])
            .collect()
    }

    /// A mean vector with the pinned units set to their observations and every free unit at `fill`.
    pub fn mean_vector(&self, fill: f64) -> Result<MeanVector> {
        let u = self
            .pinned
            .iter()
            .map(|p| p.map_or(fill, f64::from))
            .collect();
        MeanVector::new(u, self.pinned.iter().map(Option::is_some).collect())
    }

    /// A mean vector using `free_values[k]` for the k-th free unit.
    pub fn mean_vector_from(&self, free_values: &[f64]) -> Result<MeanVector> {
        let free = self.free_units();
        if free_values.len() != free.len() {
            return Err(Error::Dimension {
                what: "free means",
                got: free_values.len(),
                expected: free.len(),
            });
        }
        let mut u: Vec<f64> = self.pinned.iter().map(|p| p.map_or(0.5, f64::from)).collect();
        for (&i, &x) in free.iter().zip(free_values) {
            u[i] = x;
        }
        MeanVector::new(u, self.pinned.iter().map(Option::is_some).collect())
    }

    /// Whether `u` pins exactly this context's units to their observations.
    pub fn matches(&self, u: &MeanVector) -> bool {
        u.len() == self.pinned.len()
            && self.pinned.iter().enumerate().all(|(i, p)| match p {
                Some(v) => u.is_pinned(i) && u.get(i) == f64::from(*v),
                None => !u.is_pinned(i),
            })
    }
}
