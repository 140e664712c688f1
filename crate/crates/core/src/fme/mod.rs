//! Affine inequality systems over named rate variables: Fourier–Motzkin
//! elimination, redundancy removal and equivalence testing.
//!
//! Membership is evaluated on closures throughout (strict rows are tested
//! as non-strict with tolerance [`CLOSURE_TOL`]); strictness is still
//! tracked through elimination and printed.

mod binning;
mod equivalence;
mod experiment;
mod vertex;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binning::{
    binning_constraints, binning_projection, inner_system, upward_closure, BinningEntropies, BINNING_VARIABLES,
    RATE_VARIABLES,
};
pub use equivalence::{systems_equivalent, EquivalenceReport, Method};
pub use experiment::{verify_random_projections, CouplingCheck, OrderCheck, ELIMINATION_ORDERS};
pub use vertex::{enumerate_vertices, prune, remove_redundant, Pruned, BOX, MAX_DIM};

/// Coefficients below this magnitude are set to zero after each operation.
pub const SNAP: f64 = 1e-9;
/// Slack allowed when testing membership in the closure of a system.
pub const CLOSURE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
}

impl Relation {
    fn join(self, other: Relation) -> Relation {
        if self == Relation::Lt || other == Relation::Lt {
            Relation::Lt
        } else {
            Relation::Le
        }
    }
}

/// `coeffs · x  rel  rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            rel: Relation::Le,
            rhs,
        }
    }

    pub fn lt(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            rel: Relation::Lt,
            rhs,
        }
    }

    /// `coeffs · x >= rhs`, stored negated.
    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::le(coeffs.iter().map(|c| -c).collect(), -rhs)
    }

    pub fn gt(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::lt(coeffs.iter().map(|c| -c).collect(), -rhs)
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `rhs - lhs`; nonnegative on the closed half-space.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.rhs - self.lhs(x)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn snapped(mut self) -> Self {
        for c in &mut self.coeffs {
            if c.abs() < SNAP {
                *c = 0.0;
            }
        }
        if self.rhs.abs() < SNAP {
            self.rhs = 0.0;
        }
        self
    }

    fn normalized(mut self) -> Self {
        let m = self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if m > 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c /= m);
            self.rhs /= m;
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    variables: Vec<String>,
    rows: Vec<Row>,
}

impl LinearSystem {
    pub fn new(variables: Vec<String>, rows: Vec<Row>) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].contains(v) {
                return Err(Error::DuplicateVariable(v.clone()));
            }
        }
        for r in &rows {
            if r.coeffs.len() != variables.len() {
                return Err(Error::ShapeMismatch {
                    expected: variables.len(),
                    got: r.coeffs.len(),
                });
            }
            if !r.rhs.is_finite() || r.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(
                    "coefficients and constants must be finite".into(),
                ));
            }
        }
        Ok(Self { variables, rows })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn position(&self, var: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| Error::UnknownVariable(var.to_string()))
    }

    /// Append `-x_i <= 0` for every variable.
    pub fn with_nonnegativity(mut self) -> Self {
        let d = self.dim();
        for i in 0..d {
            let mut c = vec![0.0; d];
            c[i] = -1.0;
            self.rows.push(Row::le(c, 0.0));
        }
        self
    }

    /// Membership of the closure, with tolerance `tol` on every row.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| r.slack(x) >= -tol)
    }

    /// Exact membership honoring strict rows.
    pub fn contains_strict(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|r| match r.rel {
            Relation::Le => r.slack(x) >= 0.0,
            Relation::Lt => r.slack(x) > 0.0,
        })
    }

    /// Same system with columns reordered to `order`.
    pub fn reordered(&self, order: &[String]) -> Result<Self> {
        if order.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                got: order.len(),
            });
        }
        let pos: Vec<usize> = order.iter().map(|v| self.position(v)).collect::<Result<_>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| Row {
                coeffs: pos.iter().map(|&p| r.coeffs[p]).collect(),
                ..r.clone()
            })
            .collect();
        LinearSystem::new(order.to_vec(), rows)
    }

    /// Snap tiny coefficients, scale each row to unit max-coefficient, drop
    /// rows `0 <= k` with `k >= 0` and keep only the tightest of parallel
    /// duplicates. Rows `0 <= k` with `k < 0` are kept as infeasibility
    /// markers.
    pub fn tidy(&self) -> Self {
        let mut out: Vec<Row> = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let r = r.clone().snapped().normalized();
            if r.is_zero() && r.rhs >= -CLOSURE_TOL {
                continue;
            }
            let dup = out
                .iter_mut()
                .find(|o| o.coeffs.iter().zip(&r.coeffs).all(|(a, b)| (a - b).abs() <= SNAP));
            match dup {
                Some(o) => {
                    if r.rhs < o.rhs - 1e-12 {
                        *o = r;
                    } else if (r.rhs - o.rhs).abs() <= 1e-12 {
                        o.rel = o.rel.join(r.rel);
                    }
                }
                None => out.push(r),
            }
        }
        Self {
            variables: self.variables.clone(),
            rows: out,
        }
    }

    /// For fixed values of every other variable (`point` omits `var`),
    /// the interval of `var` values that satisfy the closure, or `None` if
    /// a row not involving `var` already fails.
    pub fn extension_interval(&self, var: &str, point: &[f64]) -> Result<Option<(f64, f64)>> {
        let k = self.position(var)?;
        if point.len() + 1 != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim() - 1,
                got: point.len(),
            });
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for r in &self.rows {
            let rest: f64 = r
                .coeffs
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(i, c)| c * point[if i < k { i } else { i - 1 }])
                .sum();
            let c = r.coeffs[k];
            let room = r.rhs - rest;
            if c > 0.0 {
                hi = hi.min(room / c);
            } else if c < 0.0 {
                lo = lo.max(room / c);
            } else if room < -CLOSURE_TOL {
                return Ok(None);
            }
        }
        Ok(Some((lo, hi)))
    }
}

/// Project out `var`: rows without it are carried over, every pair of a
/// row with positive and one with negative coefficient is combined, and a
/// derived row is strict iff either parent is. The result is tidied.
pub fn fme_eliminate(s: &LinearSystem, var: &str) -> Result<LinearSystem> {
    let k = s.position(var)?;
    let drop_k = |c: &[f64]| -> Vec<f64> { c.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &v)| v).collect() };
    let (mut pos, mut neg, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for r in &s.rows {
        let c = r.coeffs[k];
        if c > SNAP {
            pos.push(r);
        } else if c < -SNAP {
            neg.push(r);
        } else {
            rows.push(Row {
                coeffs: drop_k(&r.coeffs),
                ..r.clone()
            });
        }
    }
    for p in &pos {
        for n in &neg {
            let (a, b) = (1.0 / p.coeffs[k], -1.0 / n.coeffs[k]);
            let coeffs: Vec<f64> = p.coeffs.iter().zip(&n.coeffs).map(|(x, y)| a * x + b * y).collect();
            rows.push(Row {
                coeffs: drop_k(&coeffs),
                rel: p.rel.join(n.rel),
                rhs: a * p.rhs + b * n.rhs,
            });
        }
    }
    let mut variables = s.variables.clone();
    variables.remove(k);
    Ok(LinearSystem { variables, rows }.tidy())
}

/// Eliminate several variables in the given order, dropping rows implied
/// by a single other row after each step.
pub fn eliminate_all(s: &LinearSystem, order: &[&str]) -> Result<LinearSystem> {
    order.iter().try_fold(drop_dominated(&s.tidy()), |acc, v| {
        Ok(drop_dominated(&fme_eliminate(&acc, v)?))
    })
}

/// Remove rows `c·x <= b` implied by one other row `c'·x <= b'` together
/// with the single-variable bound rows: for some `λ >= 0`, the residual
/// `c - λc'` can be bounded through the variable bounds and the resulting
/// constant does not exceed `b`. Single-variable rows are never removed.
/// Cheap and sound, but not complete; see [`remove_redundant`].
pub fn drop_dominated(s: &LinearSystem) -> LinearSystem {
    let d = s.dim();
    let (mut lo, mut hi) = (vec![f64::NEG_INFINITY; d], vec![f64::INFINITY; d]);
    let single = |r: &Row| {
        let mut nz = r.coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0);
        match (nz.next(), nz.next()) {
            (Some((i, &c)), None) => Some((i, c)),
            _ => None,
        }
    };
    for r in &s.rows {
        if let Some((i, c)) = single(r) {
            if c > 0.0 {
                hi[i] = hi[i].min(r.rhs / c);
            } else {
                lo[i] = lo[i].max(r.rhs / c);
            }
        }
    }
    let implied_by = |r: &Row, o: &Row| -> bool {
        let ratios = r
            .coeffs
            .iter()
            .zip(&o.coeffs)
            .filter(|(_, b)| **b != 0.0)
            .map(|(a, b)| a / b);
        ratios.filter(|l| *l >= 0.0).any(|l| {
            let mut bound = l * o.rhs;
            for i in 0..d {
                let res = r.coeffs[i] - l * o.coeffs[i];
                if res.abs() <= SNAP {
                    continue;
                }
                let b = if res > 0.0 { hi[i] } else { lo[i] };
                if !b.is_finite() {
                    return false;
                }
                bound += res * b;
            }
            bound <= r.rhs + CLOSURE_TOL
        })
    };
    let mut keep = vec![true; s.rows.len()];
    for i in 0..s.rows.len() {
        if single(&s.rows[i]).is_some() {
            continue;
        }
        if (0..s.rows.len()).any(|j| j != i && keep[j] && implied_by(&s.rows[i], &s.rows[j])) {
            keep[i] = false;
        }
    }
    let rows = s
        .rows
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(r, _)| r.clone())
        .collect();
    LinearSystem {
        variables: s.variables.clone(),
        rows,
    }
}

impl fmt::Display for LinearSystem {
    /// `variables: a, b` followed by one `c1*v1 + c2*v2 <= k` line per row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variables: {}", self.variables.join(", "))?;
        for r in &self.rows {
            let mut first = true;
            for (c, v) in r.coeffs.iter().zip(&self.variables) {
                if *c == 0.0 {
                    continue;
                }
                if first {
                    write!(f, "{c}*{v}")?;
                    first = false;
                } else if *c < 0.0 {
                    write!(f, " - {}*{v}", -c)?;
                } else {
                    write!(f, " + {c}*{v}")?;
                }
            }
            if first {
                f.write_str("0")?;
            }
            let rel = match r.rel {
                Relation::Le => "<=",
                Relation::Lt => "<",
            };
            writeln!(f, " {rel} {}", r.rhs)?;
        }
        Ok(())
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_row(text: &str, vars: &[String], line: usize) -> Result<Row> {
    let (at, op) = ["<=", ">=", "<", ">"]
        .iter()
        .find_map(|op| text.find(op).map(|i| (i, *op)))
        .ok_or_else(|| parse_err(line, "missing relation"))?;
    let rhs: f64 = text[at + op.len()..]
        .trim()
        .parse()
        .map_err(|_| parse_err(line, "bad constant"))?;
    let mut coeffs = vec![0.0; vars.len()];
    let mut sign = 1.0;
    let mut expect_term = true;
    for tok in text[..at].split_whitespace() {
        if tok == "+" || tok == "-" {
            if expect_term && tok == "+" {
                return Err(parse_err(line, "unexpected `+`"));
            }
            sign = if tok == "-" { -sign } else { sign };
            expect_term = true;
            continue;
        }
        if !expect_term {
            return Err(parse_err(line, format!("missing operator before `{tok}`")));
        }
        let (c, v) = match tok.split_once('*') {
            Some((c, v)) => (
                c.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("bad coefficient `{c}`")))?,
                v,
            ),
            None if tok == "0" => (0.0, ""),
            None => (1.0, tok),
        };
        if !v.is_empty() {
            let i = vars
                .iter()
                .position(|x| x == v)
                .ok_or_else(|| parse_err(line, format!("unknown variable `{v}`")))?;
            coeffs[i] += sign * c;
        }
        sign = 1.0;
        expect_term = false;
    }
    if expect_term {
        return Err(parse_err(line, "empty left-hand side"));
    }
    Ok(match op {
        "<=" => Row::le(coeffs, rhs),
        "<" => Row::lt(coeffs, rhs),
        ">=" => Row::ge(coeffs, rhs),
        _ => Row::gt(coeffs, rhs),
    })
}

impl std::str::FromStr for LinearSystem {
    type Err = Error;

    /// Inverse of `Display`; `>=` and `>` rows are negated, `#` starts a
    /// comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut vars: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match &vars {
                None => {
                    let list = line
                        .strip_prefix("variables:")
                        .ok_or_else(|| parse_err(i + 1, "expected `variables:` header"))?;
                    vars = Some(
                        list.split(',')
                            .map(|v| v.trim().to_string())
                            .filter(|v| !v.is_empty())
                            .collect(),
                    );
                }
                Some(v) => rows.push(parse_row(line, v, i + 1)?),
            }
        }
        let vars = vars.ok_or_else(|| parse_err(0, "missing `variables:` header"))?;
        LinearSystem::new(vars, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(text: &str) -> LinearSystem {
        text.parse().unwrap()
    }

    #[test]
    fn textbook_elimination() {
        let s = sys("variables: x, y\nx <= 1\n-1*x <= 0\ny - x <= 0\n");
        let p = fme_eliminate(&s, "x").unwrap();
        assert_eq!(p.variables(), ["y"]);
        assert_eq!(p.rows(), &[Row::le(vec![1.0], 1.0)]);
    }

    #[test]
    fn absent_variable_leaves_rows_alone() {
        let s = sys("variables: x, y\ny <= 2\n-1*y <= 0\n");
        let p = fme_eliminate(&s, "x").unwrap();
        assert_eq!(p, sys("variables: y\ny <= 2\n-1*y <= 0\n"));
        assert!(matches!(fme_eliminate(&s, "z"), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn strictness_propagates() {
        let s = sys("variables: x, y\nx < 1\ny - x <= 0\n");
        let p = fme_eliminate(&s, "x").unwrap();
        assert_eq!(p.rows()[0].rel, Relation::Lt);
        let s = sys("variables: x, y\nx <= 1\ny - x <= 0\n");
        assert_eq!(fme_eliminate(&s, "x").unwrap().rows()[0].rel, Relation::Le);
    }

    #[test]
    fn text_round_trip() {
        let s = sys("variables: a, b, c\n# comment\n2*a - 0.5*b + c < 3\na >= 1\n0 <= 4\n");
        assert_eq!(s.rows()[1], Row::le(vec![-1.0, 0.0, 0.0], -1.0));
        let again: LinearSystem = s.to_string().parse().unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [
            ("x <= 1", 1),
            ("variables: x\nx + <= 1", 2),
            ("variables: x\ny <= 1", 2),
            ("variables: x\nx 1", 2),
            ("variables: x\n\nx x <= 1", 3),
        ] {
            match text.parse::<LinearSystem>() {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn tidy_merges_parallel_rows() {
        let s = sys("variables: x, y\n2*x + 2*y <= 4\nx + y < 2\nx <= 5\nx <= 3\n0 <= 1\n");
        let t = s.tidy();
        assert_eq!(t.rows().len(), 2);
        assert_eq!(t.rows()[0], Row::lt(vec![1.0, 1.0], 2.0));
        assert_eq!(t.rows()[1], Row::le(vec![1.0, 0.0], 3.0));
        let bad = sys("variables: x\n0 <= -1\n").tidy();
        assert_eq!(bad.rows().len(), 1);
        assert!(!bad.contains(&[0.0], CLOSURE_TOL));
    }

    #[test]
    fn extension_interval_matches_projection() {
        let s = sys("variables: x, y\nx <= 1\n-1*x <= 0\ny - x <= 0\n");
        assert_eq!(s.extension_interval("x", &[0.5]).unwrap(), Some((0.5, 1.0)));
        let (lo, hi) = s.extension_interval("x", &[1.5]).unwrap().unwrap();
        assert!(lo > hi);
    }

    #[test]
    fn dominated_rows_are_dropped() {
        let s = sys("variables: x, y\n-1*x <= 0\n-1*y <= 0\n-1*x - 1*y <= -1\n-2*x - 1*y <= -0.5\nx + y <= 3\n");
        let t = drop_dominated(&s);
        assert_eq!(t.rows().len(), 4);
        assert!(!t.rows().contains(&Row::le(vec![-2.0, -1.0], -0.5)));
        let single = sys("variables: x\n-1*x <= 0\n-1*x <= -1\n");
        assert_eq!(drop_dominated(&single).rows().len(), 2);
    }

    #[test]
    fn rejects_malformed_systems() {
        assert!(LinearSystem::new(vec!["x".into(), "x".into()], vec![]).is_err());
        assert!(LinearSystem::new(vec!["x".into()], vec![Row::le(vec![1.0, 2.0], 0.0)]).is_err());
        assert!(LinearSystem::new(vec!["x".into()], vec![Row::le(vec![1.0], f64::INFINITY)]).is_err());
    }
}
