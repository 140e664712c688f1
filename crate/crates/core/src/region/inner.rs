//! Inner bound. A coupling is parameterized as
//! `p(u,v,w) p(y1|v,w) p(y2|u,w)`, so the chain `Y2 - UW - VW - Y1` holds by
//! construction and only the target marginal has to be matched.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{slack, RateTuple, RegionDecision, Verdict, SLACK_TOL};
use crate::channel_search::{dirichlet, softmin};
use crate::error::{Error, Result};
use crate::info::{self, entropy_of};
use crate::pmf::{total_variation, Alphabet, ConditionalPmf, JointPmf};
use crate::seeding;
use crate::wyner::{wyner_common_information, WynerConfig, WynerSolution};

/// Largest `(Y1,Y2)`-marginal TV to the target accepted for a witness.
pub const MARGINAL_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct InnerCoupling {
    p_uvw: JointPmf,
    chan_y1: ConditionalPmf,
    chan_y2: ConditionalPmf,
}

fn check_given(c: &ConditionalPmf, expected: [&Alphabet; 2], what: &str) -> Result<()> {
    let ok = c.given().len() == 2
        && c.given()
            .iter()
            .zip(expected)
            .all(|(a, b)| a.name() == b.name() && a.size() == b.size());
    if !ok {
        return Err(Error::AlphabetMismatch(format!(
            "{what} must be conditioned on ({}, {})",
            expected[0].name(),
            expected[1].name()
        )));
    }
    if c.target().len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{what} must have a single target variable"
        )));
    }
    Ok(())
}

impl InnerCoupling {
    /// `p_uvw` is a pmf over `(U, V, W)` (in that order, any names);
    /// `chan_y1 = p(y1 | v, w)` and `chan_y2 = p(y2 | u, w)`.
    pub fn new(p_uvw: JointPmf, chan_y1: ConditionalPmf, chan_y2: ConditionalPmf) -> Result<Self> {
        let a = p_uvw.alphabets();
        if a.len() != 3 {
            return Err(Error::InvalidArgument("p_uvw must be a pmf over (U, V, W)".into()));
        }
        check_given(&chan_y1, [&a[1], &a[2]], "p(y1|v,w)")?;
        check_given(&chan_y2, [&a[0], &a[2]], "p(y2|u,w)")?;
        let (y1, y2) = (chan_y1.target()[0].name(), chan_y2.target()[0].name());
        if y1 == y2 || p_uvw.position(y1).is_ok() || p_uvw.position(y2).is_ok() {
            return Err(Error::DuplicateVariable(format!("{y1}/{y2}")));
        }
        let m_vw = p_uvw.marginal(&[a[1].name(), a[2].name()])?;
        let m_uw = p_uvw.marginal(&[a[0].name(), a[2].name()])?;
        for (m, c) in [(&m_vw, &chan_y1), (&m_uw, &chan_y2)] {
            if let Some(row) = (0..m.len()).find(|&r| m.table()[r] > 0.0 && !c.is_defined(r)) {
                return Err(Error::UndefinedConditional { row });
            }
        }
        Ok(Self {
            p_uvw,
            chan_y1,
            chan_y2,
        })
    }

    /// `W` constant, `V = Y1`, and `U` drawn from `p(u | y1, y2)`. The
    /// target marginal is reproduced exactly iff `Y1 - U - Y2`.
    pub fn with_v_as_y1(q: &JointPmf, u_given_y: &ConditionalPmf) -> Result<Self> {
        let (n1, n2) = pair_sizes(q)?;
        if u_given_y.num_rows() != n1 * n2 || u_given_y.target().len() != 1 {
            return Err(Error::AlphabetMismatch(
                "p(u|y1,y2) must be conditioned on the source pair".into(),
            ));
        }
        let nu = u_given_y.row_len();
        let dims = Dims {
            nu,
            nv: n1,
            nw: 1,
            n1,
            n2,
        };
        let mut m = Model::zeros(dims);
        let mut pu = vec![0.0; nu];
        let mut puy2 = vec![0.0; nu * n2];
        for y1 in 0..n1 {
            for y2 in 0..n2 {
                let qy = q.table()[y1 * n2 + y2];
                if qy == 0.0 {
                    continue;
                }
                let row = u_given_y
                    .row(y1 * n2 + y2)
                    .ok_or(Error::UndefinedConditional { row: y1 * n2 + y2 })?;
                for u in 0..nu {
                    m.p[dims.uvw(u, y1, 0)] += qy * row[u];
                    pu[u] += qy * row[u];
                    puy2[u * n2 + y2] += qy * row[u];
                }
            }
        }
        for v in 0..n1 {
            let row: Vec<f64> = (0..n1).map(|y1| if y1 == v { 1.0 } else { 0.0 }).collect();
            m.set_a(dims.vw(v, 0), &row);
        }
        for u in (0..nu).filter(|&u| pu[u] > 0.0) {
            let row: Vec<f64> = (0..n2).map(|y2| puy2[u * n2 + y2] / pu[u]).collect();
            m.set_b(dims.uw(u, 0), &row);
        }
        m.to_coupling(&default_names(q), q)
    }

    /// `U`, `V` constant and `W` drawn from a Wyner witness `p(w|y1,y2)`,
    /// keeping only the `W` symbols of positive mass.
    pub fn from_wyner(q: &JointPmf, sol: &WynerSolution) -> Result<Self> {
        let (n1, n2) = pair_sizes(q)?;
        let d = Dims {
            nu: 1,
            nv: 1,
            nw: sol.w_cardinality.max(1),
            n1,
            n2,
        };
        match witness_model(q, &sol.witness, d)? {
            Some(m) => m.to_coupling(&default_names(q), q),
            None => Err(Error::InvalidArgument("witness has more symbols than reported".into())),
        }
    }

    /// Read `p(u,v,w)`, `p(y1|v,w)` and `p(y2|u,w)` off a pmf over
    /// `(U, V, W, Y1, Y2)` (variables in that order). Any other dependence
    /// in `p` is dropped.
    pub fn from_joint(p: &JointPmf) -> Result<Self> {
        let names = p.names();
        let [u, v, w, y1, y2] = names[..] else {
            return Err(Error::InvalidArgument(
                "coupling pmf must be over (U, V, W, Y1, Y2)".into(),
            ));
        };
        let p_uvw = p.marginal_ordered(&[u, v, w])?;
        let c1 = p.marginal_ordered(&[v, w, y1])?.condition(&[v, w])?;
        let c2 = p.marginal_ordered(&[u, w, y2])?.condition(&[u, w])?;
        Self::new(p_uvw, c1, c2)
    }

    /// Dirichlet(1)-random `p(u,v,w)` and channel rows over alphabets of
    /// sizes `(|U|, |V|, |W|)` and `(|Y1|, |Y2|)`. Named `U, V, W, Y1, Y2`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, caps: (usize, usize, usize), ys: (usize, usize)) -> Result<Self> {
        let (nu, nv, nw) = caps;
        let a = |name: &str, k| Alphabet::new(name, k);
        let (u, v, w, y1, y2) = (a("U", nu)?, a("V", nv)?, a("W", nw)?, a("Y1", ys.0)?, a("Y2", ys.1)?);
        let p = JointPmf::new(vec![u.clone(), v.clone(), w.clone()], dirichlet(rng, nu * nv * nw))?;
        let c1 = ConditionalPmf::new(
            vec![v, w.clone()],
            vec![y1],
            (0..nv * nw).map(|_| Some(dirichlet(rng, ys.0))).collect(),
        )?;
        let c2 = ConditionalPmf::new(
            vec![u, w],
            vec![y2],
            (0..nu * nw).map(|_| Some(dirichlet(rng, ys.1))).collect(),
        )?;
        Self::new(p, c1, c2)
    }

    pub fn p_uvw(&self) -> &JointPmf {
        &self.p_uvw
    }

    pub fn chan_y1(&self) -> &ConditionalPmf {
        &self.chan_y1
    }

    pub fn chan_y2(&self) -> &ConditionalPmf {
        &self.chan_y2
    }

    /// `(|U|, |V|, |W|)`.
    pub fn caps(&self) -> (usize, usize, usize) {
        let s = self.p_uvw.sizes();
        (s[0], s[1], s[2])
    }

    /// Variable names `(U, V, W, Y1, Y2)` of [`Self::joint`].
    pub fn names(&self) -> [&str; 5] {
        let a = self.p_uvw.alphabets();
        [
            a[0].name(),
            a[1].name(),
            a[2].name(),
            self.chan_y1.target()[0].name(),
            self.chan_y2.target()[0].name(),
        ]
    }

    /// The induced pmf over `(U, V, W, Y1, Y2)`.
    pub fn joint(&self) -> JointPmf {
        let mut alphabets = self.p_uvw.alphabets().to_vec();
        alphabets.push(self.chan_y1.target()[0].clone());
        alphabets.push(self.chan_y2.target()[0].clone());
        let (_, nv, nw) = self.caps();
        let (n1, n2) = (self.chan_y1.row_len(), self.chan_y2.row_len());
        let mut table = Vec::with_capacity(self.p_uvw.len() * n1 * n2);
        for (t, &p) in self.p_uvw.table().iter().enumerate() {
            let (u, v, w) = (t / (nv * nw), (t / nw) % nv, t % nw);
            let a = self.chan_y1.row(v * nw + w);
            let b = self.chan_y2.row(u * nw + w);
            for y1 in 0..n1 {
                for y2 in 0..n2 {
                    table.push(match (a, b) {
                        (Some(a), Some(b)) => p * a[y1] * b[y2],
                        _ => 0.0,
                    });
                }
            }
        }
        JointPmf::new(alphabets, table).expect("product of valid factors")
    }

    /// The induced `(Y1, Y2)` marginal.
    pub fn target_marginal(&self) -> JointPmf {
        let n = self.names();
        self.joint().marginal_ordered(&[n[3], n[4]]).expect("own variables")
    }

    pub fn target_tv(&self, q: &JointPmf) -> Result<f64> {
        total_variation(&self.target_marginal(), q)
    }

    /// `I(Y2; V,Y1 | U,W)` and `I(Y1; Y2,U | V,W)`; zero up to rounding.
    pub fn long_chain_slacks(&self) -> (f64, f64) {
        let [u, v, w, y1, y2] = self.names();
        info::long_chain_slacks(&self.joint(), y2, u, w, v, y1).expect("own variables")
    }
}

/// Right-hand sides of the four inner-bound inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerRhs {
    /// Bound on `rf1 + rb1 + rf2 + rb2`: `I(Y;UVW) + I(U;V|W) + I(W;Y)`.
    pub total: f64,
    /// Bound on `rb1 + rf1`: `I(Y;VW)`.
    pub node1: f64,
    /// Bound on `rb2 + rf2`: `I(Y;UW)`.
    pub node2: f64,
    /// Bound on `rf1 + rf2`: `I(U;V|W) + I(W;Y)`.
    pub forward: f64,
}

impl InnerRhs {
    /// Slacks in the order `(total, node1, node2, forward)`.
    pub fn slacks(&self, r: &RateTuple) -> [f64; 4] {
        [
            slack(r.total(), self.total),
            slack(r.node1(), self.node1),
            slack(r.node2(), self.node2),
            slack(r.forward(), self.forward),
        ]
    }

    pub fn min_slack(&self, r: &RateTuple) -> f64 {
        self.slacks(r).into_iter().fold(f64::INFINITY, f64::min)
    }
}

pub fn inner_rhs(c: &InnerCoupling) -> InnerRhs {
    let p = c.joint();
    let [u, v, w, y1, y2] = c.names();
    let mi = |a: &[&str], b: &[&str], g: &[&str]| info::mi(&p, a, b, g).expect("own variables");
    let y = [y1, y2];
    let i_uv_w = mi(&[u], &[v], &[w]);
    let i_w_y = mi(&[w], &y, &[]);
    InnerRhs {
        total: mi(&y, &[v, u, w], &[]) + i_uv_w + i_w_y,
        node1: mi(&y, &[v, w], &[]),
        node2: mi(&y, &[u, w], &[]),
        forward: i_uv_w + i_w_y,
    }
}

/// Slacks `(total, node1, node2, forward)` of `r` against the coupling.
pub fn inner_check(c: &InnerCoupling, r: &RateTuple) -> [f64; 4] {
    inner_rhs(c).slacks(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    /// `(|U|, |V|, |W|)`.
    pub caps: (usize, usize, usize),
    /// Random starts per query, on top of the smoothed pool members.
    pub restarts: usize,
    pub max_iters: usize,
    /// Softmin temperatures, annealed in order.
    pub temperatures: Vec<f64>,
    /// Quadratic weight of the augmented-Lagrangian marginal penalty.
    pub penalty: f64,
    pub multiplier_every: usize,
    pub em_iters: usize,
    /// Solve Wyner's problem once and add its witness to the pool.
    pub wyner_seed: Option<WynerConfig>,
    pub seed: u64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            caps: (4, 4, 4),
            restarts: 8,
            max_iters: 1500,
            temperatures: vec![0.05, 0.01, 0.002],
            penalty: 100.0,
            multiplier_every: 100,
            em_iters: 300,
            wyner_seed: Some(WynerConfig {
                restarts: 8,
                ..Default::default()
            }),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Dims {
    nu: usize,
    nv: usize,
    nw: usize,
    n1: usize,
    n2: usize,
}

impl Dims {
    fn ny(&self) -> usize {
        self.n1 * self.n2
    }
    fn uvw(&self, u: usize, v: usize, w: usize) -> usize {
        (u * self.nv + v) * self.nw + w
    }
    fn vw(&self, v: usize, w: usize) -> usize {
        v * self.nw + w
    }
    fn uw(&self, u: usize, w: usize) -> usize {
        u * self.nw + w
    }
}

/// Flat parameter arrays: `p[(u,v,w)]`, `a[(v,w), y1]`, `b[(u,w), y2]`.
#[derive(Clone, Debug)]
struct Model {
    d: Dims,
    p: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn pair_sizes(q: &JointPmf) -> Result<(usize, usize)> {
    match q.sizes()[..] {
        [n1, n2] => Ok((n1, n2)),
        _ => Err(Error::InvalidArgument(
            "target must be a pmf over exactly two variables".into(),
        )),
    }
}

fn default_names(q: &JointPmf) -> [String; 3] {
    [q.fresh_name("U"), q.fresh_name("V"), q.fresh_name("W")]
}

fn normalize(v: &mut [f64]) {
    let z: f64 = v.iter().sum();
    if z > 0.0 {
        v.iter_mut().for_each(|x| *x /= z);
    } else {
        let k = v.len() as f64;
        v.iter_mut().for_each(|x| *x = 1.0 / k);
    }
}

impl Model {
    fn zeros(d: Dims) -> Self {
        let mut m = Self {
            d,
            p: vec![0.0; d.nu * d.nv * d.nw],
            a: vec![0.0; d.nv * d.nw * d.n1],
            b: vec![0.0; d.nu * d.nw * d.n2],
        };
        // zero-mass rows default to uniform
        m.a.iter_mut().for_each(|x| *x = 1.0 / d.n1 as f64);
        m.b.iter_mut().for_each(|x| *x = 1.0 / d.n2 as f64);
        m
    }

    fn set_a(&mut self, vw: usize, row: &[f64]) {
        let n1 = self.d.n1;
        self.a[vw * n1..(vw + 1) * n1].copy_from_slice(row);
    }

    fn set_b(&mut self, uw: usize, row: &[f64]) {
        let n2 = self.d.n2;
        self.b[uw * n2..(uw + 1) * n2].copy_from_slice(row);
    }

    fn random<R: Rng + ?Sized>(d: Dims, rng: &mut R) -> Self {
        let mut m = Self::zeros(d);
        m.p = dirichlet(rng, m.p.len());
        for r in 0..d.nv * d.nw {
            let row = dirichlet(rng, d.n1);
            m.set_a(r, &row);
        }
        for r in 0..d.nu * d.nw {
            let row = dirichlet(rng, d.n2);
            m.set_b(r, &row);
        }
        m
    }

    fn from_coupling(c: &InnerCoupling) -> Self {
        let (nu, nv, nw) = c.caps();
        let d = Dims {
            nu,
            nv,
            nw,
            n1: c.chan_y1.row_len(),
            n2: c.chan_y2.row_len(),
        };
        let mut m = Self::zeros(d);
        m.p.copy_from_slice(c.p_uvw.table());
        for r in 0..nv * nw {
            if let Some(row) = c.chan_y1.row(r) {
                m.set_a(r, row);
            }
        }
        for r in 0..nu * nw {
            if let Some(row) = c.chan_y2.row(r) {
                m.set_b(r, row);
            }
        }
        m
    }

    /// Mix every simplex with the uniform distribution.
    fn smoothed(&self, delta: f64) -> Self {
        let mix =
            |v: &[f64], k: usize| -> Vec<f64> { v.iter().map(|&x| (1.0 - delta) * x + delta / k as f64).collect() };
        Self {
            d: self.d,
            p: mix(&self.p, self.p.len()),
            a: mix(&self.a, self.d.n1),
            b: mix(&self.b, self.d.n2),
        }
    }

    fn to_coupling(&self, names: &[String; 3], q: &JointPmf) -> Result<InnerCoupling> {
        let d = self.d;
        let (ua, va, wa) = (
            Alphabet::new(&names[0], d.nu)?,
            Alphabet::new(&names[1], d.nv)?,
            Alphabet::new(&names[2], d.nw)?,
        );
        let mut p = self.p.clone();
        normalize(&mut p);
        let p_uvw = JointPmf::new(vec![ua.clone(), va.clone(), wa.clone()], p)?;
        let rows = |t: &[f64], n: usize| -> Vec<Option<Vec<f64>>> {
            t.chunks(n)
                .map(|r| {
                    let mut r = r.to_vec();
                    normalize(&mut r);
                    Some(r)
                })
                .collect()
        };
        let y = q.alphabets();
        let chan_y1 = ConditionalPmf::new(vec![va, wa.clone()], vec![y[0].clone()], rows(&self.a, d.n1))?;
        let chan_y2 = ConditionalPmf::new(vec![ua, wa], vec![y[1].clone()], rows(&self.b, d.n2))?;
        InnerCoupling::new(p_uvw, chan_y1, chan_y2)
    }

    fn joint(&self) -> Vec<f64> {
        let d = self.d;
        let mut x = Vec::with_capacity(self.p.len() * d.ny());
        for u in 0..d.nu {
            for v in 0..d.nv {
                for w in 0..d.nw {
                    let p = self.p[d.uvw(u, v, w)];
                    let a = &self.a[d.vw(v, w) * d.n1..][..d.n1];
                    let b = &self.b[d.uw(u, w) * d.n2..][..d.n2];
                    for &ay in a {
                        for &by in b {
                            x.push(p * ay * by);
                        }
                    }
                }
            }
        }
        x
    }

    fn y_marginal(&self, x: &[f64]) -> Vec<f64> {
        let ny = self.d.ny();
        let mut my = vec![0.0; ny];
        for (i, &v) in x.iter().enumerate() {
            my[i % ny] += v;
        }
        my
    }

    /// Fit `p(u,v,w)` to the target marginal by EM with the channels fixed.
    fn em_polish(&mut self, q: &[f64], iters: usize) {
        let ny = self.d.ny();
        for _ in 0..iters {
            let x = self.joint();
            let my = self.y_marginal(&x);
            if crate::pmf::tv_slices(&my, q) < 1e-12 {
                break;
            }
            for t in 0..self.p.len() {
                let mut s = 0.0;
                for y in 0..ny {
                    if my[y] > 0.0 {
                        s += x[t * ny + y] * q[y] / my[y];
                    }
                }
                self.p[t] = s;
            }
            normalize(&mut self.p);
        }
    }
}

/// Entropy terms, in the order `Y, UVWY, UW, VW, UVW, WY, VWY, UWY`.
const N_TERMS: usize = 8;

/// Coefficients of each right-hand side on the entropy terms.
const RHS: [[f64; N_TERMS]; 4] = [
    [2.0, -1.0, 1.0, 1.0, 0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
    [1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0],
    [1.0, 0.0, 1.0, 1.0, -1.0, -1.0, 0.0, 0.0],
];

struct Objective<'a> {
    q: &'a [f64],
    sums: [f64; 4],
    tau: f64,
    rho: f64,
    lambda: Vec<f64>,
}

struct Eval {
    value: f64,
    gp: Vec<f64>,
    ga: Vec<f64>,
    gb: Vec<f64>,
}

fn lg(x: f64) -> f64 {
    x.max(1e-300).log2()
}

impl Objective<'_> {
    fn eval(&self, m: &Model) -> Eval {
        let d = m.d;
        let ny = d.ny();
        let x = m.joint();
        let my = m.y_marginal(&x);
        let mut m_uw = vec![0.0; d.nu * d.nw];
        let mut m_vw = vec![0.0; d.nv * d.nw];
        let mut m_wy = vec![0.0; d.nw * ny];
        let mut m_vwy = vec![0.0; d.nv * d.nw * ny];
        let mut m_uwy = vec![0.0; d.nu * d.nw * ny];
        for u in 0..d.nu {
            for v in 0..d.nv {
                for w in 0..d.nw {
                    let t = d.uvw(u, v, w);
                    m_uw[d.uw(u, w)] += m.p[t];
                    m_vw[d.vw(v, w)] += m.p[t];
                    for y in 0..ny {
                        let xv = x[t * ny + y];
                        m_wy[w * ny + y] += xv;
                        m_vwy[d.vw(v, w) * ny + y] += xv;
                        m_uwy[d.uw(u, w) * ny + y] += xv;
                    }
                }
            }
        }
        let h = [
            entropy_of(&my),
            entropy_of(&x),
            entropy_of(&m_uw),
            entropy_of(&m_vw),
            entropy_of(&m.p),
            entropy_of(&m_wy),
            entropy_of(&m_vwy),
            entropy_of(&m_uwy),
        ];
        let mut slacks = [0.0; 4];
        for k in 0..4 {
            let rhs: f64 = RHS[k].iter().zip(&h).map(|(c, h)| c * h).sum();
            slacks[k] = slack(self.sums[k], rhs);
        }
        let (sm, wts) = softmin(&slacks, self.tau);
        let mut value = if sm.is_finite() { -sm } else { 0.0 };
        let dev: Vec<f64> = my.iter().zip(self.q).map(|(a, b)| a - b).collect();
        for y in 0..ny {
            value += self.lambda[y] * dev[y] + 0.5 * self.rho * dev[y] * dev[y];
        }
        let mut kappa = [0.0; N_TERMS];
        for k in 0..4 {
            for (t, c) in RHS[k].iter().enumerate() {
                kappa[t] += wts[k] * c;
            }
        }

        // d value / d x(u,v,w,y)
        let mut gx = vec![0.0; x.len()];
        let lmy: Vec<f64> = my.iter().map(|&v| lg(v)).collect();
        for u in 0..d.nu {
            for v in 0..d.nv {
                for w in 0..d.nw {
                    let t = d.uvw(u, v, w);
                    let base =
                        -(kappa[2] * lg(m_uw[d.uw(u, w)]) + kappa[3] * lg(m_vw[d.vw(v, w)]) + kappa[4] * lg(m.p[t]));
                    for y in 0..ny {
                        let i = t * ny + y;
                        gx[i] = base
                            - kappa[0] * lmy[y]
                            - kappa[1] * lg(x[i])
                            - kappa[5] * lg(m_wy[w * ny + y])
                            - kappa[6] * lg(m_vwy[d.vw(v, w) * ny + y])
                            - kappa[7] * lg(m_uwy[d.uw(u, w) * ny + y])
                            + self.lambda[y]
                            + self.rho * dev[y];
                    }
                }
            }
        }
        let mut gp = vec![0.0; m.p.len()];
        let mut ga = vec![0.0; m.a.len()];
        let mut gb = vec![0.0; m.b.len()];
        for u in 0..d.nu {
            for v in 0..d.nv {
                for w in 0..d.nw {
                    let t = d.uvw(u, v, w);
                    let p = m.p[t];
                    let (ra, rb) = (d.vw(v, w) * d.n1, d.uw(u, w) * d.n2);
                    for y1 in 0..d.n1 {
                        for y2 in 0..d.n2 {
                            let g = gx[t * ny + y1 * d.n2 + y2];
                            let (a, b) = (m.a[ra + y1], m.b[rb + y2]);
                            gp[t] += g * a * b;
                            ga[ra + y1] += g * p * b;
                            gb[rb + y2] += g * p * a;
                        }
                    }
                }
            }
        }
        // per-row scaling: the conditional expectation of the cell gradient
        for r in 0..d.nv * d.nw {
            let s = if m_vw[r] > 0.0 { 1.0 / m_vw[r] } else { 0.0 };
            ga[r * d.n1..(r + 1) * d.n1].iter_mut().for_each(|g| *g *= s);
        }
        for r in 0..d.nu * d.nw {
            let s = if m_uw[r] > 0.0 { 1.0 / m_uw[r] } else { 0.0 };
            gb[r * d.n2..(r + 1) * d.n2].iter_mut().for_each(|g| *g *= s);
        }
        Eval { value, gp, ga, gb }
    }
}

/// Exponentiated-gradient step on every simplex.
fn eg_step(m: &Model, e: &Eval, eta: f64) -> Model {
    fn block(v: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
        let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
        let mut out: Vec<f64> = v
            .iter()
            .zip(g)
            .map(|(x, g)| x * (-eta * (g - lo)).max(-700.0).exp())
            .collect();
        normalize(&mut out);
        out
    }
    let d = m.d;
    let mut a = Vec::with_capacity(m.a.len());
    for (v, g) in m.a.chunks(d.n1).zip(e.ga.chunks(d.n1)) {
        a.extend(block(v, g, eta));
    }
    let mut b = Vec::with_capacity(m.b.len());
    for (v, g) in m.b.chunks(d.n2).zip(e.gb.chunks(d.n2)) {
        b.extend(block(v, g, eta));
    }
    Model {
        d,
        p: block(&m.p, &e.gp, eta),
        a,
        b,
    }
}

fn optimize(mut m: Model, q: &[f64], sums: [f64; 4], cfg: &InnerConfig) -> Model {
    let mut obj = Objective {
        q,
        sums,
        tau: 0.05,
        rho: cfg.penalty,
        lambda: vec![0.0; q.len()],
    };
    let per_stage = cfg.max_iters / cfg.temperatures.len().max(1);
    for &tau in &cfg.temperatures {
        obj.tau = tau;
        let mut eta = 0.5;
        let mut e = obj.eval(&m);
        let mut history = vec![e.value];
        for it in 1..=per_stage {
            let mut moved = false;
            for _ in 0..40 {
                let cand = eg_step(&m, &e, eta);
                let ce = obj.eval(&cand);
                if ce.value <= e.value {
                    m = cand;
                    e = ce;
                    eta *= 1.5;
                    moved = true;
                    break;
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
            if it % cfg.multiplier_every == 0 {
                let my = m.y_marginal(&m.joint());
                for (l, (a, b)) in obj.lambda.iter_mut().zip(my.iter().zip(q)) {
                    *l += obj.rho * (a - b);
                }
                e = obj.eval(&m);
                history.clear();
            }
            history.push(e.value);
            if history.len() > 50 && history[history.len() - 51] - e.value < 1e-11 {
                break;
            }
        }
    }
    m
}

#[derive(Clone, Debug)]
struct Candidate {
    coupling: InnerCoupling,
    rhs: InnerRhs,
    tv: f64,
}

impl Candidate {
    fn new(coupling: InnerCoupling, q: &JointPmf) -> Result<Self> {
        let rhs = inner_rhs(&coupling);
        let tv = coupling.target_tv(q)?;
        Ok(Self { coupling, rhs, tv })
    }

    fn feasible(&self) -> bool {
        self.tv <= MARGINAL_TOL
    }

    fn inside(&self, r: &RateTuple) -> bool {
        self.feasible() && self.rhs.min_slack(r) >= -SLACK_TOL
    }

    fn score(&self, r: &RateTuple) -> f64 {
        self.rhs.min_slack(r) - 100.0 * self.tv
    }
}

/// Membership search for the inner bound.
///
/// The solver keeps every witness it has found (plus a few structured
/// couplings) and checks them before searching, so after `r` has been
/// declared inside every `r' >= r` is declared inside as well.
#[derive(Clone, Debug)]
pub struct InnerSolver {
    q: JointPmf,
    cfg: InnerConfig,
    names: [String; 3],
    pool: Vec<Candidate>,
}

impl InnerSolver {
    pub fn new(q: &JointPmf, cfg: InnerConfig) -> Result<Self> {
        let (n1, n2) = pair_sizes(q)?;
        let (nu, nv, nw) = cfg.caps;
        if nu == 0 || nv == 0 || nw == 0 {
            return Err(Error::InvalidArgument("inner caps must be positive".into()));
        }
        if cfg.temperatures.is_empty() || cfg.temperatures.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidArgument("temperatures must be positive".into()));
        }
        let mut s = Self {
            q: q.clone(),
            names: default_names(q),
            cfg,
            pool: Vec::new(),
        };
        let d = Dims { nu, nv, nw, n1, n2 };
        let mut seeds = structured_seeds(q.table(), d);
        if let Some(wcfg) = &s.cfg.wyner_seed {
            if let Some(m) = wyner_seed(q, d, wcfg)? {
                seeds.push(m);
            }
        }
        for m in seeds {
            let c = m.to_coupling(&s.names, q)?;
            s.pool.push(Candidate::new(c, q)?);
        }
        Ok(s)
    }

    pub fn config(&self) -> &InnerConfig {
        &self.cfg
    }

    /// Number of couplings kept for reuse.
    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// Add an externally constructed coupling to the pool.
    pub fn add_witness(&mut self, c: InnerCoupling) -> Result<()> {
        let cand = Candidate::new(c, &self.q)?;
        self.pool.push(cand);
        Ok(())
    }

    /// Check `r` against the pool only.
    pub fn check_pool(&self, r: &RateTuple) -> RegionDecision<InnerCoupling> {
        self.conclude(r, self.pool.iter(), 0)
    }

    fn conclude<'a>(
        &self,
        r: &RateTuple,
        cands: impl Iterator<Item = &'a Candidate>,
        restarts_used: usize,
    ) -> RegionDecision<InnerCoupling> {
        let mut best: Option<&Candidate> = None;
        for c in cands.filter(|c| c.feasible()) {
            if best.is_none_or(|b| c.rhs.min_slack(r) > b.rhs.min_slack(r)) {
                best = Some(c);
            }
        }
        let best_slack = best.map_or(f64::NEG_INFINITY, |c| c.rhs.min_slack(r));
        let inside = best.is_some_and(|c| c.inside(r));
        RegionDecision {
            verdict: if inside { Verdict::Inside } else { Verdict::Inconclusive },
            witness: if inside { best.map(|c| c.coupling.clone()) } else { None },
            best_slack,
            restarts_used,
        }
    }

    /// Search for a witness for `r`. Never returns `OutsideHeuristic`: the
    /// inner bound is existential.
    pub fn decide(&mut self, r: &RateTuple) -> RegionDecision<InnerCoupling> {
        let pooled = self.check_pool(r);
        if pooled.verdict == Verdict::Inside {
            return pooled;
        }
        let found = self.search(r);
        let used = found.len();
        self.pool.extend(found.iter().filter(|c| c.inside(r)).cloned());
        self.conclude(r, self.pool.iter().chain(found.iter()), used)
    }

    /// Run the restarts for `r` without touching the pool.
    fn search(&self, r: &RateTuple) -> Vec<Candidate> {
        let q = self.q.table();
        let sums = [r.total(), r.node1(), r.node2(), r.forward()];
        let (n1, n2) = (self.q.sizes()[0], self.q.sizes()[1]);
        let (nu, nv, nw) = self.cfg.caps;
        let d = Dims { nu, nv, nw, n1, n2 };
        let mut starts: Vec<Model> = self
            .pool
            .iter()
            .map(|c| Model::from_coupling(&c.coupling))
            .filter(|m| m.d == d)
            .map(|m| m.smoothed(1e-3))
            .collect();
        let rate_key: Vec<u64> = [r.rf1, r.rb1, r.rf2, r.rb2].iter().map(|x| x.to_bits()).collect();
        for i in 0..self.cfg.restarts {
            let mut parts = vec![self.cfg.seed, 0x1a, i as u64];
            parts.extend(&rate_key);
            starts.push(Model::random(d, &mut seeding::stream(&parts)));
        }
        starts
            .into_par_iter()
            .filter_map(|m0| {
                let mut m = optimize(m0, q, sums, &self.cfg);
                let raw = Candidate::new(m.to_coupling(&self.names, &self.q).ok()?, &self.q).ok()?;
                m.em_polish(q, self.cfg.em_iters);
                let polished = Candidate::new(m.to_coupling(&self.names, &self.q).ok()?, &self.q).ok()?;
                Some(if polished.score(r) >= raw.score(r) {
                    polished
                } else {
                    raw
                })
            })
            .collect()
    }
}

/// Couplings that reproduce `q` exactly whenever they fit the caps:
/// `W = (Y1,Y2)`; `U = Y2, V = Y1`; `W = Y1, U = Y2`; `W = Y2, V = Y1`;
/// and everything constant (exact only for independent sources).
fn structured_seeds(q: &[f64], d: Dims) -> Vec<Model> {
    let (n1, n2) = (d.n1, d.n2);
    let delta = |n: usize, i: usize| -> Vec<f64> { (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect() };
    let mut out = Vec::new();
    if d.nw >= n1 * n2 {
        let mut m = Model::zeros(d);
        for y in 0..n1 * n2 {
            m.p[d.uvw(0, 0, y)] = q[y];
            m.set_a(d.vw(0, y), &delta(n1, y / n2));
            m.set_b(d.uw(0, y), &delta(n2, y % n2));
        }
        out.push(m);
    }
    if d.nu >= n2 && d.nv >= n1 {
        let mut m = Model::zeros(d);
        for y1 in 0..n1 {
            for y2 in 0..n2 {
                m.p[d.uvw(y2, y1, 0)] = q[y1 * n2 + y2];
            }
            m.set_a(d.vw(y1, 0), &delta(n1, y1));
        }
        for y2 in 0..n2 {
            m.set_b(d.uw(y2, 0), &delta(n2, y2));
        }
        out.push(m);
    }
    if d.nw >= n1 && d.nu >= n2 {
        let mut m = Model::zeros(d);
        for y1 in 0..n1 {
            for y2 in 0..n2 {
                m.p[d.uvw(y2, 0, y1)] = q[y1 * n2 + y2];
                m.set_b(d.uw(y2, y1), &delta(n2, y2));
            }
            m.set_a(d.vw(0, y1), &delta(n1, y1));
        }
        out.push(m);
    }
    if d.nw >= n2 && d.nv >= n1 {
        let mut m = Model::zeros(d);
        for y1 in 0..n1 {
            for y2 in 0..n2 {
                m.p[d.uvw(0, y1, y2)] = q[y1 * n2 + y2];
                m.set_a(d.vw(y1, y2), &delta(n1, y1));
            }
        }
        for y2 in 0..n2 {
            m.set_b(d.uw(0, y2), &delta(n2, y2));
        }
        out.push(m);
    }
    let mut m = Model::zeros(d);
    m.p[0] = 1.0;
    let mut q1 = vec![0.0; n1];
    let mut q2 = vec![0.0; n2];
    for y1 in 0..n1 {
        for y2 in 0..n2 {
            q1[y1] += q[y1 * n2 + y2];
            q2[y2] += q[y1 * n2 + y2];
        }
    }
    m.set_a(0, &q1);
    m.set_b(0, &q2);
    out.push(m);
    out
}

/// `U, V` constant and `W` the Wyner witness restricted to its support,
/// if that support fits `|W|`.
fn wyner_seed(q: &JointPmf, d: Dims, cfg: &WynerConfig) -> Result<Option<Model>> {
    let sol = match wyner_common_information(q, cfg) {
        Ok(s) => s,
        Err(Error::OptimizerFailed(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    witness_model(q, &sol.witness, d)
}

fn witness_model(q: &JointPmf, witness: &ConditionalPmf, d: Dims) -> Result<Option<Model>> {
    let joint = q.compose(witness)?;
    let table = joint.table();
    let k = witness.row_len();
    let ny = d.ny();
    let mut pw = vec![0.0; k];
    for y in 0..ny {
        for w in 0..k {
            pw[w] += table[y * k + w];
        }
    }
    let used: Vec<usize> = (0..k).filter(|&w| pw[w] > 0.0).collect();
    if used.len() > d.nw {
        return Ok(None);
    }
    let mut m = Model::zeros(d);
    for (slot, &w) in used.iter().enumerate() {
        m.p[d.uvw(0, 0, slot)] = pw[w];
        let mut a = vec![0.0; d.n1];
        let mut b = vec![0.0; d.n2];
        for y1 in 0..d.n1 {
            for y2 in 0..d.n2 {
                let x = table[(y1 * d.n2 + y2) * k + w] / pw[w];
                a[y1] += x;
                b[y2] += x;
            }
        }
        m.set_a(d.vw(0, slot), &a);
        m.set_b(d.uw(0, slot), &b);
    }
    Ok(Some(m))
}

/// One-shot membership query; see [`InnerSolver`].
pub fn inner_membership(q: &JointPmf, r: &RateTuple, cfg: &InnerConfig) -> Result<RegionDecision<InnerCoupling>> {
    Ok(InnerSolver::new(q, cfg.clone())?.decide(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources;

    fn quick() -> InnerConfig {
        InnerConfig {
            restarts: 2,
            max_iters: 600,
            wyner_seed: None,
            ..Default::default()
        }
    }

    fn bit(n: &str) -> Alphabet {
        Alphabet::new(n, 2).unwrap()
    }

    fn one(n: &str) -> Alphabet {
        Alphabet::new(n, 1).unwrap()
    }

    /// `W = Y1 = Y2`, `U`, `V` constant.
    fn copy_coupling() -> InnerCoupling {
        let p = JointPmf::uniform(vec![one("U"), one("V"), bit("W")]).unwrap();
        let c1 = ConditionalPmf::deterministic(vec![one("V"), bit("W")], vec![bit("Y1")], |g| vec![g[1]]).unwrap();
        let c2 = ConditionalPmf::deterministic(vec![one("U"), bit("W")], vec![bit("Y2")], |g| vec![g[1]]).unwrap();
        InnerCoupling::new(p, c1, c2).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let p = JointPmf::uniform(vec![one("U"), one("V"), one("W")]).unwrap();
        let c1 = ConditionalPmf::new(vec![one("V"), one("W")], vec![bit("Y1")], vec![Some(vec![0.5, 0.5])]).unwrap();
        let c2 = ConditionalPmf::new(vec![one("U"), one("W")], vec![bit("Y2")], vec![Some(vec![0.5, 0.5])]).unwrap();
        let constant = InnerCoupling::new(p, c1, c2).unwrap();
        let rhs = inner_rhs(&constant);
        for v in [rhs.total, rhs.node1, rhs.node2, rhs.forward] {
            assert!(v.abs() < 1e-12);
        }
        let zero = RateTuple::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(inner_check(&constant, &zero).iter().all(|s| s.abs() < 1e-12));
        assert!(inner_check(&constant, &RateTuple::infinite())
            .iter()
            .all(|s| *s == f64::INFINITY));

        let rhs = inner_rhs(&copy_coupling());
        let expect = [2.0, 1.0, 1.0, 1.0];
        for (v, e) in [rhs.total, rhs.node1, rhs.node2, rhs.forward].iter().zip(expect) {
            assert!((v - e).abs() < 1e-12, "{rhs:?}");
        }
        let s = inner_check(&copy_coupling(), &RateTuple::new(1.0, 0.0, 1.0, 0.0).unwrap());
        for (v, e) in s.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((v - e).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn dsbs_forward_bound_is_mutual_information() {
        let q = sources::dsbs(0.1).unwrap();
        let p = JointPmf::from_fn(vec![bit("U"), bit("V"), one("W")], |i| q.prob(&[i[1], i[0]])).unwrap();
        let c1 = ConditionalPmf::deterministic(vec![bit("V"), one("W")], vec![bit("Y1")], |g| vec![g[0]]).unwrap();
        let c2 = ConditionalPmf::deterministic(vec![bit("U"), one("W")], vec![bit("Y2")], |g| vec![g[0]]).unwrap();
        let c = InnerCoupling::new(p, c1, c2).unwrap();
        let expected = 1.0 - info::binary_entropy(0.1);
        assert!((inner_rhs(&c).forward - expected).abs() < 1e-12);
        assert!(c.target_tv(&q).unwrap() < 1e-15);
        let (s1, s2) = c.long_chain_slacks();
        assert!(s1 < 1e-12 && s2 < 1e-12);
    }

    #[test]
    fn structured_seeds_reproduce_the_target() {
        let q = sources::dsbs(0.2).unwrap();
        let s = InnerSolver::new(&q, quick()).unwrap();
        for c in &s.pool[..4] {
            assert!(c.tv < 1e-15);
            let (a, b) = c.coupling.long_chain_slacks();
            assert!(a < 1e-12 && b < 1e-12);
        }
    }

    #[test]
    fn membership_examples() {
        let indep = sources::independent_bits();
        let zero = RateTuple::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let d = inner_membership(&indep, &zero, &quick()).unwrap();
        assert_eq!(d.verdict, Verdict::Inside);

        let copy = sources::identical_uniform(2).unwrap();
        let inf = f64::INFINITY;
        let d = inner_membership(&copy, &RateTuple::new(0.5, inf, 0.5, inf).unwrap(), &quick()).unwrap();
        assert_eq!(d.verdict, Verdict::Inside);
        let w = d.witness.unwrap();
        assert!(inner_check(&w, &RateTuple::new(0.5, inf, 0.5, inf).unwrap())
            .iter()
            .all(|&s| s >= -1e-6));

        let d = inner_membership(&copy, &RateTuple::new(0.4, inf, 0.4, inf).unwrap(), &quick()).unwrap();
        assert_eq!(d.verdict, Verdict::Inconclusive);
        assert!(d.best_slack < 0.0);
        assert!(d.restarts_used > 0);
    }

    #[test]
    fn optimizer_finds_a_wyner_like_witness() {
        // no structured seed gets both node rates below 1; the Wyner
        // common information of DSBS(0.1) is about 0.873
        let q = sources::dsbs(0.1).unwrap();
        let r = RateTuple::new(0.95, 0.0, 0.95, 0.0).unwrap();
        let mut s = InnerSolver::new(&q, quick()).unwrap();
        assert_eq!(s.check_pool(&r).verdict, Verdict::Inconclusive);
        let d = s.decide(&r);
        assert_eq!(d.verdict, Verdict::Inside, "{}", d.best_slack);
        let w = d.witness.unwrap();
        assert!(w.target_tv(&q).unwrap() <= MARGINAL_TOL);
        assert!(inner_check(&w, &r).iter().all(|&x| x >= -SLACK_TOL));
        // the witness is reused for larger rates without a search
        let bigger = RateTuple::new(1.0, 0.1, 0.95, 0.0).unwrap();
        assert_eq!(s.check_pool(&bigger).verdict, Verdict::Inside);
    }

    #[test]
    fn cuff_style_witness_from_u_channel() {
        let q = sources::dsbs(0.1).unwrap();
        let u = ConditionalPmf::deterministic(q.alphabets().to_vec(), vec![bit("U")], |y| vec![y[1]]).unwrap();
        let c = InnerCoupling::with_v_as_y1(&q, &u).unwrap();
        assert!(c.target_tv(&q).unwrap() < 1e-12);
        let rhs = inner_rhs(&c);
        assert!((rhs.forward - (1.0 - info::binary_entropy(0.1))).abs() < 1e-12);
        assert!((rhs.node2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn couplings_from_a_joint_and_from_wyner() {
        let c = copy_coupling();
        assert_eq!(InnerCoupling::from_joint(&c.joint()).unwrap(), c);
        assert!(InnerCoupling::from_joint(&sources::dsbs(0.1).unwrap()).is_err());

        let q = sources::identical_uniform(2).unwrap();
        let sol = wyner_common_information(
            &q,
            &WynerConfig {
                restarts: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let w = InnerCoupling::from_wyner(&q, &sol).unwrap();
        assert_eq!(w.caps(), (1, 1, sol.w_cardinality));
        assert!(w.target_tv(&q).unwrap() < 1e-9);
        let rhs = inner_rhs(&w);
        assert!((rhs.forward - 1.0).abs() < 1e-6, "{rhs:?}");
    }
}
