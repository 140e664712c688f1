//! Two-dimensional scans of both bounds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{InnerConfig, InnerCoupling, InnerSolver, OuterConfig, OuterSolver, RateTuple, RegionDecision, Verdict};
use crate::error::{Error, Result};
use crate::pmf::JointPmf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Rf1,
    Rb1,
    Rf2,
    Rb2,
}

impl Axis {
    fn set(self, r: &mut RateTuple, v: f64) {
        match self {
            Axis::Rf1 => r.rf1 = v,
            Axis::Rb1 => r.rb1 = v,
            Axis::Rf2 => r.rf2 = v,
            Axis::Rb2 => r.rb2 = v,
        }
    }
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub axis: Axis,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridAxis {
    fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        (0..self.points)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierConfig {
    /// The two components held fixed; may be infinite.
    pub fixed: [(Axis, f64); 2],
    pub axes: [GridAxis; 2],
    pub inner: InnerConfig,
    pub outer: OuterConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub rates: RateTuple,
    pub inner_verdict: Verdict,
    pub inner_best_slack: f64,
    pub outer_verdict: Verdict,
    pub outer_best_slack: f64,
    /// Index into [`Frontier::witnesses`] for inner-inside points.
    pub witness_id: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Frontier {
    pub points: Vec<FrontierPoint>,
    pub witnesses: Vec<InnerCoupling>,
}

fn validate(cfg: &FrontierConfig) -> Result<()> {
    let mut seen = Vec::new();
    for (a, v) in cfg.fixed {
        if v.is_nan() || v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "fixed rate {a:?} = {v} must be nonnegative"
            )));
        }
        seen.push(a);
    }
    for g in &cfg.axes {
        if !(g.lo.is_finite() && g.hi.is_finite()) || g.lo < 0.0 || g.hi < g.lo || g.points == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid axis {:?} needs finite bounds 0 <= lo <= hi and at least one point",
                g.axis
            )));
        }
        seen.push(g.axis);
    }
    for (i, a) in seen.iter().enumerate() {
        if seen[..i].contains(a) {
            return Err(Error::InvalidArgument(format!("rate component {a:?} given twice")));
        }
    }
    Ok(())
}

/// Decide every grid point for both bounds. Points are processed in
/// row-major order (first axis outermost); afterwards every point is
/// rechecked against the final witness pools, so a point that is inside is
/// never reported differently from a dominating point.
pub fn frontier(q: &JointPmf, cfg: &FrontierConfig) -> Result<Frontier> {
    validate(cfg)?;
    let mut inner = InnerSolver::new(q, cfg.inner.clone())?;
    let mut outer = OuterSolver::new(q, cfg.outer.clone())?;
    let mut base = RateTuple::new(0.0, 0.0, 0.0, 0.0)?;
    for (a, v) in cfg.fixed {
        a.set(&mut base, v);
    }
    let mut rates = Vec::new();
    for x in cfg.axes[0].values() {
        for y in cfg.axes[1].values() {
            let mut r = base;
            cfg.axes[0].axis.set(&mut r, x);
            cfg.axes[1].axis.set(&mut r, y);
            rates.push(r);
        }
    }
    let mut decisions: Vec<(RegionDecision<InnerCoupling>, f64, Verdict)> = Vec::with_capacity(rates.len());
    for r in &rates {
        let d_in = inner.decide(r);
        let d_out = outer.decide(r);
        decisions.push((d_in, d_out.best_slack, d_out.verdict));
    }
    let mut witnesses: Vec<InnerCoupling> = Vec::new();
    let mut points = Vec::with_capacity(rates.len());
    for (r, (mut d_in, mut out_slack, mut out_verdict)) in rates.into_iter().zip(decisions) {
        if d_in.verdict != Verdict::Inside {
            let again = inner.check_pool(&r);
            if again.verdict == Verdict::Inside {
                d_in = again;
            }
        }
        let again = outer.check_pool(&r);
        if again.best_slack > out_slack {
            out_slack = again.best_slack;
            out_verdict = again.verdict;
        }
        let witness_id = d_in.witness.map(|w| match witnesses.iter().position(|x| *x == w) {
            Some(i) => i,
            None => {
                witnesses.push(w);
                witnesses.len() - 1
            }
        });
        points.push(FrontierPoint {
            rates: r,
            inner_verdict: d_in.verdict,
            inner_best_slack: d_in.best_slack,
            outer_verdict: out_verdict,
            outer_best_slack: out_slack,
            witness_id,
        });
    }
    Ok(Frontier { points, witnesses })
}

/// CSV with header `rf1,rb1,rf2,rb2,inner_verdict,inner_best_slack,
/// outer_verdict,outer_best_slack,witness_id`. Infinite values are written
/// as `inf`; a missing witness id as an empty field.
pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], mut out: W) -> Result<()> {
    writeln!(
        out,
        "rf1,rb1,rf2,rb2,inner_verdict,inner_best_slack,outer_verdict,outer_best_slack,witness_id"
    )?;
    for p in points {
        let r = p.rates;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.rf1,
            r.rb1,
            r.rf2,
            r.rb2,
            p.inner_verdict,
            p.inner_best_slack,
            p.outer_verdict,
            p.outer_best_slack,
            p.witness_id.map(|i| i.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}
