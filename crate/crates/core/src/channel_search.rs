//! Local search over a test channel `p(w | y1, y2)` for a fixed source
//! `q(y1, y2)`.
//!
//! Every objective used by the Wyner solver and the outer-bound search is a
//! function of four information quantities of the joint `q(y) p(w|y)`:
//! `I(Y;W)`, `I(W;Y1)`, `I(W;Y2)` and the Markov slack `I(Y1;Y2|W)`. These
//! in turn depend only on `H(W)`, `H(Y1,W)`, `H(Y2,W)` and `H(W|Y)`, which a
//! mass transfer between two entries of one row changes in O(1). The search
//! is a pairwise coordinate descent: per row, move mass from the entry with
//! the largest partial derivative to the one with the smallest, with a
//! bracketing line search that always tries the full transfer so entries can
//! reach exact zeros.

use rand::Rng;
use rand_distr::Exp1;

use crate::info::{entropy_of, xlogx};

/// Floor used inside logarithms when ranking coordinates.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Measures {
    pub i_yw: f64,
    pub i_wy1: f64,
    pub i_wy2: f64,
    pub markov: f64,
}

/// An objective to minimize, expressed through [`Measures`].
pub(crate) trait Objective: Sync {
    fn value(&self, m: &Measures) -> f64;
    /// Partial derivatives with respect to the four measures.
    fn weights(&self, m: &Measures) -> Measures;
}

/// `Σ c_k · measure_k`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear(pub Measures);

impl Objective for Linear {
    fn value(&self, m: &Measures) -> f64 {
        let c = &self.0;
        c.i_yw * m.i_yw + c.i_wy1 * m.i_wy1 + c.i_wy2 * m.i_wy2 + c.markov * m.markov
    }
    fn weights(&self, _: &Measures) -> Measures {
        self.0
    }
}

/// `-softmin_τ(a - I(Y;W), b - I(W;Y_k)) + λ·markov`, i.e. maximize the
/// smaller of two rate slacks. `use_y1` selects `I(W;Y1)` versus `I(W;Y2)`.
/// Infinite budgets drop their slack.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SlackPair {
    pub budget_yw: f64,
    pub budget_wy: f64,
    pub use_y1: bool,
    pub tau: f64,
    pub penalty: f64,
}

impl SlackPair {
    fn slacks(&self, m: &Measures) -> (f64, f64) {
        let i = if self.use_y1 { m.i_wy1 } else { m.i_wy2 };
        (self.budget_yw - m.i_yw, self.budget_wy - i)
    }
}

/// Smooth minimum of finite values and its weights. Infinite entries get
/// weight zero.
pub(crate) fn softmin(values: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return (f64::INFINITY, vec![0.0; values.len()]);
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = values
        .iter()
        .map(|&v| if v.is_finite() { (-(v - lo) / tau).exp() } else { 0.0 })
        .collect();
    let z: f64 = w.iter().sum();
    for x in &mut w {
        *x /= z;
    }
    (lo - tau * z.ln(), w)
}

impl Objective for SlackPair {
    fn value(&self, m: &Measures) -> f64 {
        let (a, b) = self.slacks(m);
        let (s, _) = softmin(&[a, b], self.tau);
        let s = if s.is_finite() { s } else { 0.0 };
        -s + self.penalty * m.markov
    }
    fn weights(&self, m: &Measures) -> Measures {
        let (a, b) = self.slacks(m);
        let (_, w) = softmin(&[a, b], self.tau);
        Measures {
            i_yw: w[0],
            i_wy1: if self.use_y1 { w[1] } else { 0.0 },
            i_wy2: if self.use_y1 { 0.0 } else { w[1] },
            markov: self.penalty,
        }
    }
}

/// A draw from the flat Dirichlet distribution on `k` symbols.
pub(crate) fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let draw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let z: f64 = draw.iter().sum();
    draw.iter().map(|x| x / z).collect()
}

/// Fixed source data.
#[derive(Clone, Debug)]
pub(crate) struct Source {
    pub q: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    pub h_y: f64,
    pub h_y1: f64,
    pub h_y2: f64,
}

impl Source {
    pub fn new(q: &[f64], n1: usize, n2: usize) -> Self {
        assert_eq!(q.len(), n1 * n2);
        let mut m1 = vec![0.0; n1];
        let mut m2 = vec![0.0; n2];
        for a in 0..n1 {
            for b in 0..n2 {
                m1[a] += q[a * n2 + b];
                m2[b] += q[a * n2 + b];
            }
        }
        Self {
            q: q.to_vec(),
            n1,
            n2,
            h_y: entropy_of(q),
            h_y1: entropy_of(&m1),
            h_y2: entropy_of(&m2),
        }
    }

    pub fn rows(&self) -> usize {
        self.n1 * self.n2
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Entropies {
    hw: f64,
    h1w: f64,
    h2w: f64,
    hcond: f64,
}

/// Current channel plus the marginals needed for O(1) updates.
#[derive(Clone, Debug)]
pub(crate) struct ChannelState {
    pub k: usize,
    pub rows: Vec<f64>,
    pw: Vec<f64>,
    p1w: Vec<f64>,
    p2w: Vec<f64>,
    ent: Entropies,
}

impl ChannelState {
    pub fn from_rows(src: &Source, k: usize, rows: Vec<f64>) -> Self {
        assert_eq!(rows.len(), src.rows() * k);
        let mut s = Self {
            k,
            rows,
            pw: vec![0.0; k],
            p1w: vec![0.0; src.n1 * k],
            p2w: vec![0.0; src.n2 * k],
            ent: Entropies::default(),
        };
        s.recompute(src);
        s
    }

    /// Rows drawn i.i.d. from the flat Dirichlet distribution.
    pub fn random<R: Rng + ?Sized>(src: &Source, k: usize, rng: &mut R) -> Self {
        let mut rows = Vec::with_capacity(src.rows() * k);
        for _ in 0..src.rows() {
            rows.extend(dirichlet(rng, k));
        }
        Self::from_rows(src, k, rows)
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.rows[y * self.k..(y + 1) * self.k]
    }

    pub fn recompute(&mut self, src: &Source) {
        let k = self.k;
        self.pw.iter_mut().for_each(|x| *x = 0.0);
        self.p1w.iter_mut().for_each(|x| *x = 0.0);
        self.p2w.iter_mut().for_each(|x| *x = 0.0);
        let mut hcond = 0.0;
        for a in 0..src.n1 {
            for b in 0..src.n2 {
                let y = a * src.n2 + b;
                let qy = src.q[y];
                let row = &self.rows[y * k..(y + 1) * k];
                for (w, &p) in row.iter().enumerate() {
                    let m = qy * p;
                    self.pw[w] += m;
                    self.p1w[a * k + w] += m;
                    self.p2w[b * k + w] += m;
                }
                if qy > 0.0 {
                    hcond += qy * entropy_of(row);
                }
            }
        }
        self.ent = Entropies {
            hw: entropy_of(&self.pw),
            h1w: entropy_of(&self.p1w),
            h2w: entropy_of(&self.p2w),
            hcond,
        };
    }

    fn measures_of(src: &Source, e: &Entropies) -> Measures {
        Measures {
            i_yw: (e.hw - e.hcond).max(0.0),
            i_wy1: (e.hw + src.h_y1 - e.h1w).max(0.0),
            i_wy2: (e.hw + src.h_y2 - e.h2w).max(0.0),
            markov: (e.h1w + e.h2w - src.h_y - e.hcond - e.hw).max(0.0),
        }
    }

    pub fn measures(&self, src: &Source) -> Measures {
        Self::measures_of(src, &self.ent)
    }

    /// Entropies after moving `s` of row `y`'s mass from `i` to `j`.
    fn shifted(&self, src: &Source, y: usize, i: usize, j: usize, s: f64) -> Entropies {
        let k = self.k;
        let a = y / src.n2;
        let b = y % src.n2;
        let qy = src.q[y];
        let qs = qy * s;
        let pair = |v: &[f64], off: usize| -> f64 {
            let (xi, xj) = (v[off + i], v[off + j]);
            xlogx((xi - qs).max(0.0)) + xlogx(xj + qs) - xlogx(xi) - xlogx(xj)
        };
        let (ri, rj) = (self.rows[y * k + i], self.rows[y * k + j]);
        let drow = xlogx((ri - s).max(0.0)) + xlogx(rj + s) - xlogx(ri) - xlogx(rj);
        Entropies {
            hw: self.ent.hw + pair(&self.pw, 0),
            h1w: self.ent.h1w + pair(&self.p1w, a * k),
            h2w: self.ent.h2w + pair(&self.p2w, b * k),
            hcond: self.ent.hcond + qy * drow,
        }
    }

    fn apply(&mut self, src: &Source, y: usize, i: usize, j: usize, s: f64) {
        let k = self.k;
        let full = s >= self.rows[y * k + i];
        let ent = self.shifted(src, y, i, j, s);
        let a = y / src.n2;
        let b = y % src.n2;
        let qs = src.q[y] * s;
        if full {
            let s = self.rows[y * k + i];
            self.rows[y * k + i] = 0.0;
            self.rows[y * k + j] += s;
        } else {
            self.rows[y * k + i] -= s;
            self.rows[y * k + j] += s;
        }
        for (v, off) in [(&mut self.pw, 0), (&mut self.p1w, a * k), (&mut self.p2w, b * k)] {
            v[off + i] = (v[off + i] - qs).max(0.0);
            v[off + j] += qs;
        }
        self.ent = ent;
    }

    /// Partial derivatives (up to a per-row constant and the factor `q(y)`)
    /// of the objective with respect to the entries of row `y`.
    fn row_gradient(&self, src: &Source, y: usize, c: &Measures, out: &mut [f64]) {
        // chain rule from measures to the four entropies
        let c_hw = c.i_yw + c.i_wy1 + c.i_wy2 - c.markov;
        let c_h1w = -c.i_wy1 + c.markov;
        let c_h2w = -c.i_wy2 + c.markov;
        let c_hcond = -c.i_yw - c.markov;
        let k = self.k;
        let a = y / src.n2;
        let b = y % src.n2;
        let lg = |x: f64| x.max(LOG_FLOOR).log2();
        for w in 0..k {
            out[w] = -(c_hw * lg(self.pw[w])
                + c_h1w * lg(self.p1w[a * k + w])
                + c_h2w * lg(self.p2w[b * k + w])
                + c_hcond * lg(self.rows[y * k + w]));
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct DescentConfig {
    pub max_iters: usize,
    pub patience: usize,
    pub tol: f64,
    pub moves_per_row: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            patience: 50,
            tol: 1e-9,
            moves_per_row: 3,
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Minimize `obj` by pairwise coordinate descent. Returns the final
/// objective value and the number of passes.
pub(crate) fn descend(
    src: &Source,
    state: &mut ChannelState,
    obj: &dyn Objective,
    cfg: &DescentConfig,
) -> (f64, usize) {
    let k = state.k;
    if k < 2 {
        return (obj.value(&state.measures(src)), 0);
    }
    let mut grad = vec![0.0; k];
    let mut history: Vec<f64> = Vec::new();
    let mut current = obj.value(&state.measures(src));
    let mut passes = 0;
    for _ in 0..cfg.max_iters {
        passes += 1;
        for y in 0..src.rows() {
            if src.q[y] <= 0.0 {
                continue;
            }
            for _ in 0..cfg.moves_per_row {
                let m = state.measures(src);
                let c = obj.weights(&m);
                state.row_gradient(src, y, &c, &mut grad);
                let row = state.row(y);
                let mut from = None;
                let mut to = None;
                for w in 0..k {
                    if row[w] > 0.0 && from.is_none_or(|f: usize| grad[w] > grad[f]) {
                        from = Some(w);
                    }
                }
                let Some(i) = from else { break };
                for w in 0..k {
                    if w != i && to.is_none_or(|t: usize| grad[w] < grad[t]) {
                        to = Some(w);
                    }
                }
                let Some(j) = to else { break };
                if grad[i] - grad[j] <= 0.0 {
                    break;
                }
                let cap = row[i];
                let eval = |s: f64| obj.value(&ChannelState::measures_of(src, &state.shifted(src, y, i, j, s)));
                let (s, v) = line_search(eval, cap, current);
                if v < current - 1e-15 && s > 0.0 {
                    state.apply(src, y, i, j, s);
                    current = v;
                } else {
                    break;
                }
            }
        }
        // keep the incremental entropies from drifting
        state.recompute(src);
        current = obj.value(&state.measures(src));
        history.push(current);
        if history.len() > cfg.patience {
            let past = history[history.len() - 1 - cfg.patience];
            if past - current < cfg.tol {
                break;
            }
        }
    }
    (current, passes)
}

/// Penalty continuation for the Markov term.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Continuation {
    pub penalty: f64,
    pub growth: f64,
    pub max_penalty: f64,
    /// Stop raising the penalty once the Markov slack is this small.
    pub target: f64,
    pub merge_tol: f64,
    pub descent: DescentConfig,
}

/// Minimize `make(λ)` for growing `λ` until the Markov slack reaches the
/// target or `λ` its cap. Each stage alternates descent and symbol merges.
pub(crate) fn continuation<O: Objective>(
    src: &Source,
    mut st: ChannelState,
    sched: &Continuation,
    make: impl Fn(f64) -> O,
) -> ChannelState {
    let mut lambda = sched.penalty;
    loop {
        let obj = make(lambda);
        // merges empty a symbol each time; cap the rounds in case descent
        // keeps refilling it
        for _ in 0..=st.k {
            descend(src, &mut st, &obj, &sched.descent);
            if !merge_step(src, &mut st, &obj, sched.merge_tol) {
                break;
            }
        }
        if st.measures(src).markov <= sched.target || lambda >= sched.max_penalty {
            return st;
        }
        lambda = (lambda * sched.growth).min(sched.max_penalty);
    }
}

/// Try merging each pair of `W` symbols (all of `j`'s mass moves to `i`)
/// and apply the best merge if it lowers the objective by at least
/// `min_gain`. Coordinate moves act on one row at a time and cannot make
/// such a coordinated change.
pub(crate) fn merge_step(src: &Source, state: &mut ChannelState, obj: &dyn Objective, min_gain: f64) -> bool {
    let k = state.k;
    let current = obj.value(&state.measures(src));
    let mut best: Option<(f64, ChannelState)> = None;
    for i in 0..k {
        for j in (i + 1)..k {
            if state.pw[i] <= 0.0 || state.pw[j] <= 0.0 {
                continue;
            }
            let mut rows = state.rows.clone();
            for y in 0..src.rows() {
                rows[y * k + i] += rows[y * k + j];
                rows[y * k + j] = 0.0;
            }
            let cand = ChannelState::from_rows(src, k, rows);
            let v = obj.value(&cand.measures(src));
            if v < current - min_gain && best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, cand));
            }
        }
    }
    match best {
        Some((_, cand)) => {
            *state = cand;
            true
        }
        None => false,
    }
}

/// Minimize `f` on `[0, cap]`: coarse grid, then golden section around the
/// best grid point. `f(0)` is known to be `at_zero`.
fn line_search(f: impl Fn(f64) -> f64, cap: f64, at_zero: f64) -> (f64, f64) {
    const GRID: usize = 8;
    let mut best = (0.0, at_zero);
    let mut best_m = 0;
    for m in 1..=GRID {
        let s = cap * m as f64 / GRID as f64;
        let v = f(s);
        if v < best.1 {
            best = (s, v);
            best_m = m;
        }
    }
    let lo_m = best_m.saturating_sub(1);
    let hi_m = (best_m + 1).min(GRID);
    let (mut lo, mut hi) = (cap * lo_m as f64 / GRID as f64, cap * hi_m as f64 / GRID as f64);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..40 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-14 * cap.max(1e-300) {
            break;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{Alphabet, ConditionalPmf, JointPmf};
    use crate::{info, seeding, sources};

    fn joint_of(q: &JointPmf, st: &ChannelState) -> JointPmf {
        let rows = (0..q.len()).map(|y| Some(st.row(y).to_vec())).collect();
        let ch = ConditionalPmf::new(q.alphabets().to_vec(), vec![Alphabet::new("W", st.k).unwrap()], rows).unwrap();
        q.compose(&ch).unwrap()
    }

    #[test]
    fn measures_match_generic_information_routines() {
        let q = sources::dsbs(0.2).unwrap();
        let src = Source::new(q.table(), 2, 2);
        let mut rng = seeding::stream(&[5]);
        for _ in 0..20 {
            let st = ChannelState::random(&src, 3, &mut rng);
            let m = st.measures(&src);
            let p = joint_of(&q, &st);
            assert!((m.i_yw - info::mi(&p, &["Y1", "Y2"], &["W"], &[]).unwrap()).abs() < 1e-12);
            assert!((m.i_wy1 - info::mi(&p, &["W"], &["Y1"], &[]).unwrap()).abs() < 1e-12);
            assert!((m.i_wy2 - info::mi(&p, &["W"], &["Y2"], &[]).unwrap()).abs() < 1e-12);
            assert!((m.markov - info::mi(&p, &["Y1"], &["Y2"], &["W"]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn incremental_update_tracks_recompute() {
        let q = sources::triple_abc();
        let src = Source::new(q.table(), 4, 4);
        let mut rng = seeding::stream(&[6]);
        let mut st = ChannelState::random(&src, 5, &mut rng);
        for step in 0..200 {
            let y = [0, 1, 4, 5, 10, 11, 14, 15][step % 8];
            let (i, j) = (step % 5, (step * 3 + 1) % 5);
            if i == j {
                continue;
            }
            let s = st.row(y)[i] * if step % 7 == 0 { 1.0 } else { 0.37 };
            st.apply(&src, y, i, j, s);
        }
        let inc = st.measures(&src);
        st.recompute(&src);
        let full = st.measures(&src);
        assert!((inc.i_yw - full.i_yw).abs() < 1e-10);
        assert!((inc.markov - full.markov).abs() < 1e-10);
        assert!((st.rows.iter().sum::<f64>() - 16.0).abs() < 1e-10);
    }

    #[test]
    fn descent_lowers_the_objective() {
        let q = sources::identical_uniform(2).unwrap();
        let src = Source::new(q.table(), 2, 2);
        let mut rng = seeding::stream(&[7]);
        let mut st = ChannelState::random(&src, 4, &mut rng);
        let obj = Linear(Measures {
            i_yw: 1.0,
            markov: 100.0,
            ..Default::default()
        });
        let before = obj.value(&st.measures(&src));
        let (after, _) = descend(&src, &mut st, &obj, &DescentConfig::default());
        assert!(after < before);
        let m = st.measures(&src);
        assert!(m.markov < 1e-6, "{m:?}");
        assert!((m.i_yw - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmin_bounds() {
        let (s, w) = softmin(&[0.3, 0.5, f64::INFINITY], 0.01);
        assert!(s <= 0.3 && s > 0.3 - 0.01 * 2f64.ln());
        assert_eq!(w[2], 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(softmin(&[f64::INFINITY], 0.1).0, f64::INFINITY);
    }
}
