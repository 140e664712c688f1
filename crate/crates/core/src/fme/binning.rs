//! Rate constraints of the binning construction for a fixed coupling and
//! the inner-bound system they should project onto.

use super::{eliminate_all, remove_redundant, LinearSystem, Row};
use crate::error::Result;
use crate::info;
use crate::region::{InnerCoupling, InnerRhs};

/// Auxiliary binning rates `rt0, rt1, rt2` followed by the link rates.
pub const BINNING_VARIABLES: [&str; 7] = ["rt0", "rt1", "rt2", "rf1", "rb1", "rf2", "rb2"];
pub const RATE_VARIABLES: [&str; 4] = ["rf1", "rb1", "rf2", "rb2"];

/// Joint entropies of the coupling used by the binning constraints; `Y`
/// is the pair `(Y1, Y2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinningEntropies {
    pub h_w: f64,
    pub h_wv: f64,
    pub h_wu: f64,
    pub h_wvu: f64,
    pub h_w_given_y: f64,
    pub h_wv_given_y: f64,
    pub h_wu_given_y: f64,
    pub h_wvu_given_y: f64,
}

impl BinningEntropies {
    pub fn of(c: &InnerCoupling) -> Self {
        let p = c.joint();
        let [u, v, w, y1, y2] = c.names();
        let h = |vars: &[&str]| info::entropy(&p, vars).expect("own variables");
        let hc = |vars: &[&str]| info::conditional_entropy(&p, vars, &[y1, y2]).expect("own variables");
        Self {
            h_w: h(&[w]),
            h_wv: h(&[w, v]),
            h_wu: h(&[w, u]),
            h_wvu: h(&[w, v, u]),
            h_w_given_y: hc(&[w]),
            h_wv_given_y: hc(&[w, v]),
            h_wu_given_y: hc(&[w, u]),
            h_wvu_given_y: hc(&[w, v, u]),
        }
    }
}

fn coeffs(vars: &[&str], terms: &[&str]) -> Vec<f64> {
    vars.iter().map(|v| if terms.contains(v) { 1.0 } else { 0.0 }).collect()
}

/// The three groups of binning constraints over [`BINNING_VARIABLES`],
/// plus nonnegativity of every rate:
///
/// * approximate independence of the shared and backward indices (strict
///   upper bounds by `H(W)`, `H(WV)`, `H(WU)`, `H(WVU)`);
/// * Slepian–Wolf decodability at both nodes (lower bounds by `H(V|W)`,
///   `H(WV)`, `H(U|W)`, `H(WU)`);
/// * independence of the shared indices from the outputs (strict upper
///   bounds by the entropies conditioned on `Y`).
pub fn binning_constraints(c: &InnerCoupling) -> LinearSystem {
    let e = BinningEntropies::of(c);
    let vars = &BINNING_VARIABLES;
    let lt = |t: &[&str], k: f64| Row::lt(coeffs(vars, t), k);
    let ge = |t: &[&str], k: f64| Row::ge(coeffs(vars, t), k);
    let rows = vec![
        lt(&["rt0"], e.h_w),
        lt(&["rt0", "rt1", "rb1"], e.h_wv),
        lt(&["rt0", "rt2", "rb2"], e.h_wu),
        lt(&["rt0", "rt1", "rt2", "rb1", "rb2"], e.h_wvu),
        ge(&["rt1", "rb1", "rf1"], e.h_wv - e.h_w),
        ge(&["rt0", "rt1", "rb1", "rf1"], e.h_wv),
        ge(&["rt2", "rb2", "rf2"], e.h_wu - e.h_w),
        ge(&["rt0", "rt2", "rb2", "rf2"], e.h_wu),
        lt(&["rt0"], e.h_w_given_y),
        lt(&["rt0", "rt1"], e.h_wv_given_y),
        lt(&["rt0", "rt2"], e.h_wu_given_y),
        lt(&["rt0", "rt1", "rt2"], e.h_wvu_given_y),
    ];
    LinearSystem::new(vars.iter().map(|v| v.to_string()).collect(), rows)
        .expect("well-formed")
        .with_nonnegativity()
}

/// The four inner-bound inequalities over [`RATE_VARIABLES`] plus
/// nonnegativity.
pub fn inner_system(rhs: &InnerRhs) -> LinearSystem {
    let vars = &RATE_VARIABLES;
    let ge = |t: &[&str], k: f64| Row::ge(coeffs(vars, t), k);
    let rows = vec![
        ge(&["rf1", "rb1", "rf2", "rb2"], rhs.total),
        ge(&["rf1", "rb1"], rhs.node1),
        ge(&["rf2", "rb2"], rhs.node2),
        ge(&["rf1", "rf2"], rhs.forward),
    ];
    LinearSystem::new(vars.iter().map(|v| v.to_string()).collect(), rows)
        .expect("well-formed")
        .with_nonnegativity()
}

/// `{x : x >= y componentwise for some y in s}`. Computed by writing
/// `y = x - t` with fresh slack variables `t >= 0` and eliminating them.
pub fn upward_closure(s: &LinearSystem) -> Result<LinearSystem> {
    let d = s.dim();
    let mut names: Vec<String> = s.variables().to_vec();
    let slack_names: Vec<String> = s
        .variables()
        .iter()
        .map(|v| {
            let mut n = format!("{v}_up");
            while names.contains(&n) {
                n.push('_');
            }
            names.push(n.clone());
            n
        })
        .collect();
    let mut rows: Vec<Row> = s
        .rows()
        .iter()
        .map(|r| Row {
            coeffs: r.coeffs.iter().copied().chain(r.coeffs.iter().map(|c| -c)).collect(),
            ..r.clone()
        })
        .collect();
    for i in 0..d {
        let mut c = vec![0.0; 2 * d];
        c[d + i] = -1.0;
        rows.push(Row::le(c, 0.0));
    }
    let lifted = LinearSystem::new(names, rows)?;
    let order: Vec<&str> = slack_names.iter().map(String::as_str).collect();
    eliminate_all(&lifted, &order)
}

/// Project the binning constraints of `c` onto the link rates, eliminating
/// the auxiliary rates in `order`, then take the upward closure and drop
/// redundant rows.
pub fn binning_projection(c: &InnerCoupling, order: &[&str]) -> Result<LinearSystem> {
    let projected = eliminate_all(&binning_constraints(c), order)?;
    let rates: Vec<String> = RATE_VARIABLES.iter().map(|v| v.to_string()).collect();
    remove_redundant(&upward_closure(&projected)?.reordered(&rates)?)
}
