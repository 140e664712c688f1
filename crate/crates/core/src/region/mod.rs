//! Inner and outer bounds on the coordination rate region.

mod frontier;
mod inner;
mod outer;

pub use frontier::{frontier, write_frontier_csv, Axis, Frontier, FrontierConfig, FrontierPoint, GridAxis};
pub use inner::{
    inner_check, inner_membership, inner_rhs, InnerConfig, InnerCoupling, InnerRhs, InnerSolver, MARGINAL_TOL,
};
pub use outer::{outer_membership, outer_slack, OuterConfig, OuterCoupling, OuterMeasures, OuterSolver, MARKOV_TOL};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A witness must satisfy every inequality with at least this slack.
pub const SLACK_TOL: f64 = 1e-6;
/// Below this best slack the outer search reports `OutsideHeuristic`.
pub const OUTSIDE_MARGIN: f64 = 1e-3;

/// Link rates in bits per symbol. Any component may be `+inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTuple {
    pub rf1: f64,
    pub rb1: f64,
    pub rf2: f64,
    pub rb2: f64,
}

impl RateTuple {
    pub fn new(rf1: f64, rb1: f64, rf2: f64, rb2: f64) -> Result<Self> {
        for (name, v) in [("rf1", rf1), ("rb1", rb1), ("rf2", rf2), ("rb2", rb2)] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("rate {name} = {v} must be nonnegative")));
            }
        }
        Ok(Self { rf1, rb1, rf2, rb2 })
    }

    pub const fn infinite() -> Self {
        Self {
            rf1: f64::INFINITY,
            rb1: f64::INFINITY,
            rf2: f64::INFINITY,
            rb2: f64::INFINITY,
        }
    }

    pub fn total(&self) -> f64 {
        self.rf1 + self.rb1 + self.rf2 + self.rb2
    }

    /// `rb1 + rf1`, the total rate seen by node 1.
    pub fn node1(&self) -> f64 {
        self.rb1 + self.rf1
    }

    pub fn node2(&self) -> f64 {
        self.rb2 + self.rf2
    }

    pub fn forward(&self) -> f64 {
        self.rf1 + self.rf2
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &RateTuple) -> bool {
        self.rf1 >= other.rf1 && self.rb1 >= other.rb1 && self.rf2 >= other.rf2 && self.rb2 >= other.rb2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Inside,
    /// The search found no feasible coupling and the best slack is clearly
    /// negative. Not a proof.
    OutsideHeuristic,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Inside => "inside",
            Verdict::OutsideHeuristic => "outside-heuristic",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RegionDecision<C> {
    pub verdict: Verdict,
    /// Present when the verdict is `Inside`.
    pub witness: Option<C>,
    /// Best minimum slack over all inequalities found by the search.
    pub best_slack: f64,
    pub restarts_used: usize,
}

/// `a - b` where an infinite rate side wins over anything.
pub(crate) fn slack(rate: f64, bound: f64) -> f64 {
    if rate == f64::INFINITY {
        f64::INFINITY
    } else {
        rate - bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_tuple_validation_and_sums() {
        assert!(RateTuple::new(-0.1, 0.0, 0.0, 0.0).is_err());
        assert!(RateTuple::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        let r = RateTuple::new(1.0, f64::INFINITY, 0.5, 0.25).unwrap();
        assert_eq!(r.node1(), f64::INFINITY);
        assert_eq!(r.node2(), 0.75);
        assert_eq!(r.forward(), 1.5);
        assert!(RateTuple::infinite().dominates(&r));
        assert!(!r.dominates(&RateTuple::infinite()));
        assert_eq!(slack(f64::INFINITY, 3.0), f64::INFINITY);
        assert_eq!(slack(1.0, 3.0), -2.0);
    }
}
