//! Activation functions of the network class and the log-probability terms built on them.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Probabilities are floored into `[PROB_FLOOR, 1 - PROB_FLOOR]` before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Per-unit conditional activation `P(S_i = 1 | parents) = f(M_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    /// `f(x) = 1 / (1 + e^-x)` on the whole real line.
    Sigmoid,
    /// `f(x) = 1 - e^-x` on `x >= 0`.
    NoisyOr,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::NoisyOr => "noisy_or",
        }
    }

    /// Whether `x` lies in the domain of `f`.
    pub fn in_domain(self, x: f64) -> bool {
        match self {
            ActivationKind::Sigmoid => x.is_finite(),
            ActivationKind::NoisyOr => x.is_finite() && x >= 0.0,
        }
    }

    /// `f(x)`, unfloored.
    pub fn f(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::NoisyOr => -(-x).exp_m1(),
        }
    }

    /// `1 - f(x)` computed without cancellation.
    pub fn complement(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(-x),
            ActivationKind::NoisyOr => (-x).exp(),
        }
    }

    /// First derivative `f'(x)`.
    pub fn d1(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(x) * sigmoid(-x),
            ActivationKind::NoisyOr => (-x).exp(),
        }
    }

    /// Second derivative `f''(x)`.
    pub fn d2(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => {
                let (s, c) = (sigmoid(x), sigmoid(-x));
                s * c * (c - s)
            }
            ActivationKind::NoisyOr => -(-x).exp(),
        }
    }

    /// Third derivative `f'''(x)`. Needed only by gradients of the second-order objectives.
    pub fn d3(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => {
                let (s, c) = (sigmoid(x), sigmoid(-x));
                s * c * (1.0 - 6.0 * s * c)
            }
            ActivationKind::NoisyOr => (-x).exp(),
        }
    }

    /// `(f, 1 - f)` after flooring, plus whether the floor was hit.
    pub fn floored_probs(self, x: f64) -> (f64, f64, bool) {
        let x = self.clamp_to_domain(x);
        let (p, q) = (self.f(x), self.complement(x));
        if p < PROB_FLOOR {
            (PROB_FLOOR, 1.0 - PROB_FLOOR, true)
        } else if q < PROB_FLOOR {
            (1.0 - PROB_FLOOR, PROB_FLOOR, true)
        } else {
            (p, q, false)
        }
    }

    /// `(ln f(x), ln(1 - f(x)))` with flooring applied.
    ///
    /// Away from the floor the logs are evaluated in closed form, so for noisy-or
    /// `ln(1 - f(x)) == -x` holds exactly.
    pub fn log_probs(self, x: f64) -> (f64, f64) {
        let x = self.clamp_to_domain(x);
        let (p, q) = (self.f(x), self.complement(x));
        if p < PROB_FLOOR {
            return (PROB_FLOOR.ln(), (-PROB_FLOOR).ln_1p());
        }
        if q < PROB_FLOOR {
            return ((-PROB_FLOOR).ln_1p(), PROB_FLOOR.ln());
        }
        match self {
            ActivationKind::Sigmoid => (-softplus(-x), -softplus(x)),
            ActivationKind::NoisyOr => (p.ln(), -x),
        }
    }

    fn clamp_to_domain(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => x,
            ActivationKind::NoisyOr => x.max(0.0),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "noisy_or" | "noisy-or" | "noisyor" => Ok(ActivationKind::NoisyOr),
            other => Err(crate::Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivatives of the two log-scores of a unit at a mean field `x`:
/// `ln f` and `ln(1 - f)`, orders one to three.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScoreDerivs {
    pub ln_f: f64,
    pub ln_1mf: f64,
    /// `d/dx ln f`
    pub a1: f64,
    /// `d/dx ln(1 - f)`
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub a3: f64,
    pub b3: f64,
    /// True when `f(x)` hit the probability floor; the derivatives are then unreliable.
    pub floored: bool,
}

impl LogScoreDerivs {
    pub fn at(kind: ActivationKind, x: f64) -> Self {
        let (ln_f, ln_1mf) = kind.log_probs(x);
        let (p, q, floored) = kind.floored_probs(x);
        let xd = kind.clamp_to_domain(x);
        let (d1, d2, d3) = (kind.d1(xd), kind.d2(xd), kind.d3(xd));
        let (r1, r2, r3) = (d1 / p, d2 / p, d3 / p);
        // 1 - f has derivatives -f', -f'', -f'''.
        let (t1, t2, t3) = (-d1 / q, -d2 / q, -d3 / q);
        LogScoreDerivs {
            ln_f,
            ln_1mf,
            a1: r1,
            b1: t1,
            a2: r2 - r1 * r1,
            b2: t2 - t1 * t1,
            a3: r3 - 3.0 * r1 * r2 + 2.0 * r1 * r1 * r1,
            b3: t3 - 3.0 * t1 * t2 + 2.0 * t1 * t1 * t1,
            floored,
        }
    }

    /// `u ln f + (1 - u) ln(1 - f)`
    pub fn score(&self, u: f64) -> f64 {
        mix(u, self.ln_f, self.ln_1mf)
    }

    /// `g_k(u, x)`: the same mixture applied to the k-th derivatives.
    pub fn g(&self, k: usize, u: f64) -> f64 {
        match k {
            0 => self.score(u),
            1 => mix(u, self.a1, self.b1),
            2 => mix(u, self.a2, self.b2),
            3 => mix(u, self.a3, self.b3),
            _ => panic!("log-score derivatives are available up to order 3"),
        }
    }
}

/// `u a + (1 - u) b`, written so that a pinned `u` in {0, 1} selects one side exactly.
#[inline]
pub(crate) fn mix(u: f64, a: f64, b: f64) -> f64 {
    if u == 0.0 {
        b
    } else if u == 1.0 {
        a
    } else {
        u * a + (1.0 - u) * b
    }
}
