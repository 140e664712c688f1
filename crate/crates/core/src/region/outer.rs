//! Outer bound.
//!
//! Every quantity in the outer bound depends on `p(u | y1, y2)` and
//! `p(v | y1, y2)` separately, so the search works with a pool of single
//! auxiliary channels `p(t | y)` satisfying `Y1 - T - Y2`; each pool member
//! can play the role of `U` (scored by `I(Y;T)`, `I(T;Y1)`) or of `V`
//! (scored by `I(Y;T)`, `I(T;Y2)`). The pool is seeded with structured
//! channels and with solutions of scalarized problems
//! `min α I(Y;T) + (1-α) I(T;Y_k)` tracing both trade-off curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{slack, RateTuple, RegionDecision, Verdict, OUTSIDE_MARGIN, SLACK_TOL};
use crate::channel_search::{
    continuation, ChannelState, Continuation, DescentConfig, Linear, Measures, SlackPair, Source,
};
use crate::error::{Error, Result};
use crate::info;
use crate::pmf::{Alphabet, ConditionalPmf, JointPmf};
use crate::seeding;
use crate::wyner::{smoothed, structured_starts};

/// Largest Markov slack `I(Y1;Y2|U)` accepted for an outer witness.
pub const MARKOV_TOL: f64 = 1e-4;

/// `p(u, v | y1, y2)` together with the source it is composed with.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterCoupling {
    q: JointPmf,
    channel: ConditionalPmf,
}

/// Information quantities of an outer coupling, in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterMeasures {
    pub i_y_u: f64,
    pub i_y_v: f64,
    pub i_u_y1: f64,
    pub i_v_y2: f64,
    /// `I(Y1; Y2 | U)`.
    pub markov_u: f64,
    /// `I(Y1; Y2 | V)`.
    pub markov_v: f64,
}

impl OuterCoupling {
    /// `channel` maps `(Y1, Y2)` to `(U, V)`. Both auxiliary alphabets are
    /// capped at `|Y1|·|Y2| + 1`.
    pub fn new(q: &JointPmf, channel: ConditionalPmf) -> Result<Self> {
        let cap = outer_cap(q)?;
        if channel.given().len() != 2
            || channel
                .given()
                .iter()
                .zip(q.alphabets())
                .any(|(a, b)| a.name() != b.name() || a.size() != b.size())
        {
            return Err(Error::AlphabetMismatch(
                "outer channel must be conditioned on the source variables".into(),
            ));
        }
        if channel.target().len() != 2 {
            return Err(Error::InvalidArgument("outer channel must have targets (U, V)".into()));
        }
        if let Some(a) = channel.target().iter().find(|a| a.size() > cap) {
            return Err(Error::InvalidArgument(format!(
                "|{}| = {} exceeds the cap {cap}",
                a.name(),
                a.size()
            )));
        }
        q.compose(&channel)?;
        Ok(Self { q: q.clone(), channel })
    }

    /// The product channel `p(u|y) p(v|y)`.
    pub fn from_parts(q: &JointPmf, u_given_y: &ConditionalPmf, v_given_y: &ConditionalPmf) -> Result<Self> {
        let (ku, kv) = (u_given_y.row_len(), v_given_y.row_len());
        let rows = (0..q.len())
            .map(|y| match (u_given_y.row(y), v_given_y.row(y)) {
                (Some(a), Some(b)) => Some(a.iter().flat_map(|x| b.iter().map(move |z| x * z)).collect()),
                _ => None,
            })
            .collect();
        let u = Alphabet::new(q.fresh_name("U"), ku)?;
        let v = Alphabet::new(q.fresh_name("V"), kv)?;
        Self::new(q, ConditionalPmf::new(q.alphabets().to_vec(), vec![u, v], rows)?)
    }

    pub fn channel(&self) -> &ConditionalPmf {
        &self.channel
    }

    /// Joint pmf over `(Y1, Y2, U, V)`.
    pub fn joint(&self) -> JointPmf {
        self.q.compose(&self.channel).expect("validated at construction")
    }

    pub fn measures(&self) -> OuterMeasures {
        let p = self.joint();
        let names = p.names();
        let (y1, y2, u, v) = (names[0], names[1], names[2], names[3]);
        let mi = |a: &[&str], b: &[&str], g: &[&str]| info::mi(&p, a, b, g).expect("own variables");
        OuterMeasures {
            i_y_u: mi(&[y1, y2], &[u], &[]),
            i_y_v: mi(&[y1, y2], &[v], &[]),
            i_u_y1: mi(&[u], &[y1], &[]),
            i_v_y2: mi(&[v], &[y2], &[]),
            markov_u: mi(&[y1], &[y2], &[u]),
            markov_v: mi(&[y1], &[y2], &[v]),
        }
    }
}

fn outer_cap(q: &JointPmf) -> Result<usize> {
    match q.sizes()[..] {
        [n1, n2] => Ok(n1 * n2 + 1),
        _ => Err(Error::InvalidArgument(
            "target must be a pmf over exactly two variables".into(),
        )),
    }
}

fn outer_slack_of(m: &OuterMeasures, r: &RateTuple) -> f64 {
    slack(r.node1(), m.i_y_v)
        .min(slack(r.node2(), m.i_y_u))
        .min(slack(r.forward(), m.i_u_y1.max(m.i_v_y2)))
}

/// Minimum slack of the three outer-bound inequalities. Markov conditions
/// are not checked here.
pub fn outer_slack(c: &OuterCoupling, r: &RateTuple) -> f64 {
    outer_slack_of(&c.measures(), r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterConfig {
    /// Alphabet size of each auxiliary; `None` means `|Y1|·|Y2| + 1`.
    pub aux_cap: Option<usize>,
    /// Weights `α` of the scalarized trade-off problems.
    pub alphas: Vec<f64>,
    pub restarts_per_alpha: usize,
    /// Local refinements per query when the pool alone is not enough.
    pub refine_starts: usize,
    pub temperature: f64,
    pub max_iters: usize,
    pub patience: usize,
    pub tol: f64,
    pub penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub markov_target: f64,
    pub seed: u64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            aux_cap: None,
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            restarts_per_alpha: 2,
            refine_starts: 3,
            temperature: 2e-3,
            max_iters: 5000,
            patience: 50,
            tol: 1e-9,
            penalty: 100.0,
            penalty_growth: 10.0,
            max_penalty: 1e7,
            markov_target: 1e-9,
            seed: 0,
        }
    }
}

impl OuterConfig {
    fn schedule(&self) -> Continuation {
        Continuation {
            penalty: self.penalty,
            growth: self.penalty_growth,
            max_penalty: self.max_penalty,
            target: self.markov_target,
            merge_tol: self.tol,
            descent: DescentConfig {
                max_iters: self.max_iters,
                patience: self.patience,
                tol: self.tol,
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Debug)]
struct Aux {
    rows: Vec<f64>,
    m: Measures,
}

impl Aux {
    fn as_u(&self, r: &RateTuple) -> f64 {
        slack(r.node2(), self.m.i_yw).min(slack(r.forward(), self.m.i_wy1))
    }

    fn as_v(&self, r: &RateTuple) -> f64 {
        slack(r.node1(), self.m.i_yw).min(slack(r.forward(), self.m.i_wy2))
    }
}

/// Membership search for the outer bound, with a reusable pool of
/// auxiliary channels.
#[derive(Clone, Debug)]
pub struct OuterSolver {
    q: JointPmf,
    src: Source,
    k: usize,
    cfg: OuterConfig,
    pool: Vec<Aux>,
}

fn best_by(pool: &[Aux], f: impl Fn(&Aux) -> f64) -> Option<(usize, f64)> {
    pool.iter()
        .enumerate()
        .map(|(i, a)| (i, f(a)))
        .fold(None, |acc, (i, v)| match acc {
            Some((_, b)) if b >= v => acc,
            _ => Some((i, v)),
        })
}

impl OuterSolver {
    pub fn new(q: &JointPmf, cfg: OuterConfig) -> Result<Self> {
        let cap = outer_cap(q)?;
        let k = cfg.aux_cap.unwrap_or(cap);
        if k == 0 || k > cap {
            return Err(Error::InvalidArgument(format!("auxiliary cap must lie in [1, {cap}]")));
        }
        let (n1, n2) = (q.sizes()[0], q.sizes()[1]);
        let src = Source::new(q.table(), n1, n2);
        let mut s = Self {
            q: q.clone(),
            src,
            k,
            cfg,
            pool: Vec::new(),
        };

        let structured = structured_starts(&s.src, k);
        for rows in &structured {
            s.admit(ChannelState::from_rows(&s.src, k, rows.clone()));
        }
        let sched = s.cfg.schedule();
        let mut jobs = Vec::new();
        for (ai, &alpha) in s.cfg.alphas.iter().enumerate() {
            for side in 0..2 {
                for i in 0..s.cfg.restarts_per_alpha + structured.len() {
                    jobs.push((ai, alpha, side, i));
                }
            }
        }
        let found: Vec<ChannelState> = jobs
            .into_par_iter()
            .map(|(ai, alpha, side, i)| {
                let st = if i < structured.len() {
                    ChannelState::from_rows(&s.src, k, smoothed(&structured[i], k, 1e-3))
                } else {
                    let mut rng = seeding::stream(&[s.cfg.seed, 0x0u64, ai as u64, side as u64, i as u64]);
                    ChannelState::random(&s.src, k, &mut rng)
                };
                continuation(&s.src, st, &sched, |lambda| {
                    let mut w = Measures {
                        i_yw: alpha,
                        markov: lambda,
                        ..Default::default()
                    };
                    if side == 0 {
                        w.i_wy1 = 1.0 - alpha;
                    } else {
                        w.i_wy2 = 1.0 - alpha;
                    }
                    Linear(w)
                })
            })
            .collect();
        for st in found {
            s.admit(st);
        }
        if s.pool.is_empty() {
            return Err(Error::OptimizerFailed(
                "no auxiliary channel met the Markov tolerance".into(),
            ));
        }
        Ok(s)
    }

    pub fn config(&self) -> &OuterConfig {
        &self.cfg
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// `(I(Y;T), I(T;Y1), I(T;Y2))` of every pool member.
    pub fn pool_measures(&self) -> Vec<(f64, f64, f64)> {
        self.pool.iter().map(|a| (a.m.i_yw, a.m.i_wy1, a.m.i_wy2)).collect()
    }

    /// Pool member `i` as a channel `p(t | y1, y2)`.
    pub fn pool_channel(&self, i: usize) -> Result<ConditionalPmf> {
        self.channel(&self.pool[i], "U")
    }

    fn admit(&mut self, st: ChannelState) -> bool {
        let m = st.measures(&self.src);
        if m.markov <= MARKOV_TOL {
            self.pool.push(Aux { rows: st.rows, m });
            true
        } else {
            false
        }
    }

    fn channel(&self, a: &Aux, name: &str) -> Result<ConditionalPmf> {
        let t = Alphabet::new(self.q.fresh_name(name), self.k)?;
        let rows = a.rows.chunks(self.k).map(|r| Some(r.to_vec())).collect();
        ConditionalPmf::new(self.q.alphabets().to_vec(), vec![t], rows)
    }

    fn witness(&self, u: &Aux, v: &Aux) -> Result<OuterCoupling> {
        OuterCoupling::from_parts(&self.q, &self.channel(u, "U")?, &self.channel(v, "V")?)
    }

    /// Local search maximizing one side's slack from the best pool members.
    fn refine(&self, r: &RateTuple, as_u: bool) -> Vec<ChannelState> {
        let score = |a: &Aux| if as_u { a.as_u(r) } else { a.as_v(r) };
        let mut order: Vec<usize> = (0..self.pool.len()).collect();
        order.sort_by(|&i, &j| score(&self.pool[j]).total_cmp(&score(&self.pool[i])).then(i.cmp(&j)));
        order.truncate(self.cfg.refine_starts);
        let budget_yw = if as_u { r.node2() } else { r.node1() };
        let sched = self.cfg.schedule();
        order
            .into_par_iter()
            .map(|i| {
                let st = ChannelState::from_rows(&self.src, self.k, smoothed(&self.pool[i].rows, self.k, 1e-4));
                continuation(&self.src, st, &sched, |lambda| SlackPair {
                    budget_yw,
                    budget_wy: r.forward(),
                    use_y1: as_u,
                    tau: self.cfg.temperature,
                    penalty: lambda,
                })
            })
            .collect()
    }

    fn conclude(&self, r: &RateTuple, restarts_used: usize) -> Result<RegionDecision<OuterCoupling>> {
        let (iu, su) = best_by(&self.pool, |a| a.as_u(r)).expect("pool is never empty");
        let (iv, sv) = best_by(&self.pool, |a| a.as_v(r)).expect("pool is never empty");
        let best_slack = su.min(sv);
        let verdict = if best_slack >= -SLACK_TOL {
            Verdict::Inside
        } else if best_slack < -OUTSIDE_MARGIN {
            Verdict::OutsideHeuristic
        } else {
            Verdict::Inconclusive
        };
        let witness = match verdict {
            Verdict::Inside => Some(self.witness(&self.pool[iu], &self.pool[iv])?),
            _ => None,
        };
        Ok(RegionDecision {
            verdict,
            witness,
            best_slack,
            restarts_used,
        })
    }

    /// Decide `r` from the pool only.
    pub fn check_pool(&self, r: &RateTuple) -> RegionDecision<OuterCoupling> {
        self.conclude(r, 0).expect("pool channels are valid")
    }

    /// Maximize the outer slack for `r`; refined channels join the pool.
    pub fn decide(&mut self, r: &RateTuple) -> RegionDecision<OuterCoupling> {
        let first = self.check_pool(r);
        if first.verdict == Verdict::Inside {
            return first;
        }
        let mut used = 0;
        for as_u in [true, false] {
            let side =
                best_by(&self.pool, |a| if as_u { a.as_u(r) } else { a.as_v(r) }).map_or(f64::NEG_INFINITY, |b| b.1);
            if side >= -SLACK_TOL {
                continue;
            }
            let found = self.refine(r, as_u);
            used += found.len();
            for st in found {
                self.admit(st);
            }
        }
        self.conclude(r, used).expect("pool channels are valid")
    }
}

/// One-shot membership query; see [`OuterSolver`].
pub fn outer_membership(q: &JointPmf, r: &RateTuple, cfg: &OuterConfig) -> Result<RegionDecision<OuterCoupling>> {
    Ok(OuterSolver::new(q, cfg.clone())?.decide(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources;

    fn quick() -> OuterConfig {
        OuterConfig {
            alphas: vec![0.0, 0.5, 1.0],
            restarts_per_alpha: 1,
            ..Default::default()
        }
    }

    fn copy_channel(q: &JointPmf, name: &str) -> ConditionalPmf {
        let t = Alphabet::new(name, q.sizes()[0]).unwrap();
        ConditionalPmf::deterministic(q.alphabets().to_vec(), vec![t], |y| vec![y[0]]).unwrap()
    }

    #[test]
    fn slack_examples() {
        let q = sources::identical_uniform(2).unwrap();
        let c = OuterCoupling::from_parts(&q, &copy_channel(&q, "U"), &copy_channel(&q, "V")).unwrap();
        assert_eq!(outer_slack(&c, &RateTuple::infinite()), f64::INFINITY);
        let inf = f64::INFINITY;
        let r = RateTuple::new(0.5, 0.0, inf, inf).unwrap();
        assert!((outer_slack(&c, &r) + 0.5).abs() < 1e-12);
        let m = c.measures();
        assert!(m.markov_u < 1e-12 && m.markov_v < 1e-12);

        let ind = sources::independent_bits();
        let one = Alphabet::new("U", 1).unwrap();
        let constant = ConditionalPmf::deterministic(ind.alphabets().to_vec(), vec![one], |_| vec![0]).unwrap();
        let c = OuterCoupling::from_parts(&ind, &constant, &constant).unwrap();
        assert!(outer_slack(&c, &RateTuple::new(0.0, 0.0, 0.0, 0.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn caps_are_enforced() {
        let q = sources::independent_bits();
        let big = Alphabet::new("U", 6).unwrap();
        let ch = ConditionalPmf::deterministic(q.alphabets().to_vec(), vec![big], |_| vec![0]).unwrap();
        assert!(OuterCoupling::from_parts(&q, &ch, &ch).is_err());
        assert!(OuterSolver::new(
            &q,
            OuterConfig {
                aux_cap: Some(6),
                ..quick()
            }
        )
        .is_err());
    }

    #[test]
    fn membership_examples() {
        let copy = sources::identical_uniform(2).unwrap();
        let mut s = OuterSolver::new(&copy, quick()).unwrap();
        assert_eq!(s.decide(&RateTuple::infinite()).verdict, Verdict::Inside);
        let inf = f64::INFINITY;
        let d = s.decide(&RateTuple::new(0.4, inf, 0.4, inf).unwrap());
        assert_eq!(d.verdict, Verdict::OutsideHeuristic);
        assert!(d.best_slack < -0.15);
        let d = s.decide(&RateTuple::new(0.5, inf, 0.5, inf).unwrap());
        assert_eq!(d.verdict, Verdict::Inside);
        let w = d.witness.unwrap();
        let m = w.measures();
        assert!(m.markov_u <= MARKOV_TOL && m.markov_v <= MARKOV_TOL);
        assert!(outer_slack(&w, &RateTuple::new(0.5, inf, 0.5, inf).unwrap()) >= -SLACK_TOL);

        let q = sources::dsbs(0.1).unwrap();
        let i12 = 1.0 - info::binary_entropy(0.1);
        let d = outer_membership(&q, &RateTuple::new(inf, 0.3, i12 - 0.1 - 0.2, 0.2).unwrap(), &quick()).unwrap();
        assert_eq!(d.verdict, Verdict::OutsideHeuristic);
    }

    #[test]
    fn pool_traces_the_wyner_point() {
        let q = sources::dsbs(0.1).unwrap();
        let s = OuterSolver::new(&q, quick()).unwrap();
        let best = s.pool_measures().iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
        assert!((best - 0.8727606).abs() < 1e-3, "{best}");
    }
}
