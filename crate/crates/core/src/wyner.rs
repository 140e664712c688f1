//! Wyner's common information `min I(Y1,Y2; W)` subject to `Y1 - W - Y2`.
//!
//! The search runs pairwise coordinate descent on the rows of
//! `p(w | y1, y2)` from a set of random Dirichlet starts plus a few
//! structured ones, minimizing `I(Y;W) + λ I(Y1;Y2|W)` and raising `λ`
//! until the Markov slack is below tolerance. The returned value is the best
//! feasible objective found; it is an upper bound on the true minimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_search::{continuation, ChannelState, Continuation, DescentConfig, Linear, Measures, Source};
use crate::error::{Error, Result};
use crate::info;
use crate::pmf::{Alphabet, ConditionalPmf, JointPmf};
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WynerConfig {
    /// Alphabet size of `W`; `None` means `|Y1|·|Y2|`.
    pub w_cap: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub patience: usize,
    pub tol: f64,
    /// Initial Markov penalty weight.
    pub penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    /// Accepted Markov slack of the witness.
    pub markov_tol: f64,
    /// Slack the penalty continuation keeps pushing towards once
    /// `markov_tol` is met, while the weight cap allows.
    pub polish_tol: f64,
    pub fail_tol: f64,
    pub seed: u64,
}

impl Default for WynerConfig {
    fn default() -> Self {
        Self {
            w_cap: None,
            restarts: 64,
            max_iters: 5000,
            patience: 50,
            tol: 1e-9,
            penalty: 100.0,
            penalty_growth: 10.0,
            max_penalty: 1e7,
            markov_tol: 1e-6,
            polish_tol: 1e-9,
            fail_tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WynerSolution {
    /// `I(Y1,Y2; W)` of the witness, recomputed from the composed joint.
    pub value: f64,
    /// `p(w | y1, y2)`; rows for zero-mass `y` are uniform.
    pub witness: ConditionalPmf,
    /// Number of `W` symbols with positive mass.
    pub w_cardinality: usize,
    pub markov_slack: f64,
    /// `(restart, value)` per restart; infeasible restarts report `inf`.
    pub trace: Vec<(usize, f64)>,
}

struct Outcome {
    value: f64,
    markov: f64,
    rows: Vec<f64>,
}

fn run_one(src: &Source, st: ChannelState, cfg: &WynerConfig) -> Outcome {
    let sched = Continuation {
        penalty: cfg.penalty,
        growth: cfg.penalty_growth,
        max_penalty: cfg.max_penalty,
        target: cfg.polish_tol,
        merge_tol: cfg.tol,
        descent: DescentConfig {
            max_iters: cfg.max_iters,
            patience: cfg.patience,
            tol: cfg.tol,
            ..Default::default()
        },
    };
    let st = continuation(src, st, &sched, |lambda| {
        Linear(Measures {
            i_yw: 1.0,
            markov: lambda,
            ..Default::default()
        })
    });
    let m = st.measures(src);
    Outcome {
        value: m.i_yw,
        markov: m.markov,
        rows: st.rows,
    }
}

/// Deterministic channels that are always feasible: `W = (Y1,Y2)`,
/// `W = Y1`, `W = Y2`.
pub(crate) fn structured_starts(src: &Source, k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut push = |f: &dyn Fn(usize, usize) -> usize, range: usize| {
        if range <= k {
            let mut rows = vec![0.0; src.rows() * k];
            for a in 0..src.n1 {
                for b in 0..src.n2 {
                    rows[(a * src.n2 + b) * k + f(a, b)] = 1.0;
                }
            }
            out.push(rows);
        }
    };
    push(&|a, b| a * src.n2 + b, src.rows());
    push(&|a, _| a, src.n1);
    push(&|_, b| b, src.n2);
    out
}

/// Smooth a deterministic start so that descent can move every entry.
pub(crate) fn smoothed(rows: &[f64], k: usize, delta: f64) -> Vec<f64> {
    rows.iter().map(|&p| (1.0 - delta) * p + delta / k as f64).collect()
}

pub fn wyner_common_information(q: &JointPmf, cfg: &WynerConfig) -> Result<WynerSolution> {
    if q.alphabets().len() != 2 {
        return Err(Error::InvalidArgument(
            "Wyner solver expects a pmf over exactly two variables".into(),
        ));
    }
    let (n1, n2) = (q.alphabets()[0].size(), q.alphabets()[1].size());
    let k = cfg.w_cap.unwrap_or(n1 * n2);
    if k == 0 {
        return Err(Error::InvalidArgument("w_cap must be at least 1".into()));
    }
    if cfg.markov_tol > cfg.fail_tol {
        return Err(Error::InvalidArgument("markov_tol must not exceed fail_tol".into()));
    }
    let src = Source::new(q.table(), n1, n2);

    let structured = structured_starts(&src, k);
    let mut starts: Vec<Vec<f64>> = structured.clone();
    starts.extend(structured.iter().map(|r| smoothed(r, k, 1e-3)));
    let n_fixed = starts.len();
    let total = n_fixed + cfg.restarts;

    let outcomes: Vec<Outcome> = (0..total)
        .into_par_iter()
        .map(|i| {
            let st = if i < n_fixed {
                ChannelState::from_rows(&src, k, starts[i].clone())
            } else {
                let mut rng = seeding::stream(&[cfg.seed, 0x5779, i as u64]);
                ChannelState::random(&src, k, &mut rng)
            };
            run_one(&src, st, cfg)
        })
        .collect();

    let trace: Vec<(usize, f64)> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            (
                i,
                if o.markov <= cfg.fail_tol {
                    o.value
                } else {
                    f64::INFINITY
                },
            )
        })
        .collect();
    let pick = |tol: f64| {
        outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| o.markov <= tol)
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    };
    let best = pick(cfg.markov_tol)
        .or_else(|| pick(cfg.fail_tol))
        .ok_or_else(|| Error::OptimizerFailed("no restart reached the Markov tolerance".into()))?;
    let rows = &outcomes[best].rows;

    let given = q.alphabets().to_vec();
    let w = Alphabet::new(q.fresh_name("W"), k)?;
    let witness = ConditionalPmf::new(
        given,
        vec![w.clone()],
        (0..n1 * n2).map(|y| Some(rows[y * k..(y + 1) * k].to_vec())).collect(),
    )?;
    let joint = q.compose(&witness)?;
    let names = q.names();
    let value = info::mi(&joint, &names, &[w.name()], &[])?;
    let markov = info::mi(&joint, &names[..1], &names[1..], &[w.name()])?;
    let w_cardinality = joint
        .marginal(&[w.name()])?
        .table()
        .iter()
        .filter(|&&p| p > 0.0)
        .count();
    Ok(WynerSolution {
        value,
        witness,
        w_cardinality,
        markov_slack: markov,
        trace,
    })
}
