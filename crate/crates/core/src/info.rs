//! Entropies and mutual informations of named variable sets, in bits.

use crate::error::{Error, Result};
use crate::pmf::JointPmf;

/// `-x log2 x` with `0 log 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector.
pub fn entropy_of(table: &[f64]) -> f64 {
    table.iter().map(|&p| xlogx(p)).sum()
}

/// Binary entropy function.
pub fn binary_entropy(p: f64) -> f64 {
    xlogx(p) + xlogx(1.0 - p)
}

/// `H(vars)` of the marginal on `vars`. The empty set has entropy zero.
pub fn entropy(p: &JointPmf, vars: &[&str]) -> Result<f64> {
    if vars.is_empty() {
        return Ok(0.0);
    }
    Ok(entropy_of(p.marginal(vars)?.table()))
}

/// `H(target | given)`.
pub fn conditional_entropy(p: &JointPmf, target: &[&str], given: &[&str]) -> Result<f64> {
    let joint: Vec<&str> = target.iter().chain(given).copied().collect();
    Ok(entropy(p, &joint)? - entropy(p, given)?)
}

/// `I(left ; right | given)` with pairwise-disjoint variable sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfoQuery<'a> {
    pub left: Vec<&'a str>,
    pub right: Vec<&'a str>,
    pub given: Vec<&'a str>,
}

impl<'a> InfoQuery<'a> {
    pub fn new(left: &[&'a str], right: &[&'a str], given: &[&'a str]) -> Self {
        Self {
            left: left.to_vec(),
            right: right.to_vec(),
            given: given.to_vec(),
        }
    }

    pub fn unconditional(left: &[&'a str], right: &[&'a str]) -> Self {
        Self::new(left, right, &[])
    }

    fn validate(&self, p: &JointPmf) -> Result<()> {
        let all: Vec<&str> = self
            .left
            .iter()
            .chain(&self.right)
            .chain(&self.given)
            .copied()
            .collect();
        for (i, v) in all.iter().enumerate() {
            p.position(v)?;
            if all[..i].contains(v) {
                return Err(Error::InvalidArgument(format!(
                    "variable `{v}` appears in more than one set of the query"
                )));
            }
        }
        Ok(())
    }
}

/// `H(L|G) - H(L|R,G)`, clamped at zero.
pub fn mutual_information(p: &JointPmf, q: &InfoQuery) -> Result<f64> {
    q.validate(p)?;
    if q.left.is_empty() || q.right.is_empty() {
        return Ok(0.0);
    }
    let lg = entropy(p, &cat(&[&q.left, &q.given]))?;
    let rg = entropy(p, &cat(&[&q.right, &q.given]))?;
    let lrg = entropy(p, &cat(&[&q.left, &q.right, &q.given]))?;
    let g = entropy(p, &q.given)?;
    Ok((lg + rg - lrg - g).max(0.0))
}

fn cat<'a>(parts: &[&[&'a str]]) -> Vec<&'a str> {
    parts.iter().flat_map(|s| s.iter().copied()).collect()
}

/// Shorthand for `I(a; b | given)`.
pub fn mi(p: &JointPmf, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
    mutual_information(p, &InfoQuery::new(a, b, given))
}

/// Slack of the Markov chain `a - b - c`, i.e. `I(a; c | b)`. Zero iff the
/// chain holds.
pub fn markov_slack(p: &JointPmf, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
    mi(p, a, c, b)
}

/// The two slacks certifying `Y2 - UW - VW - Y1`:
/// `I(Y2; V,Y1 | U,W)` and `I(Y1; Y2,U | V,W)`.
pub fn long_chain_slacks(p: &JointPmf, y2: &str, u: &str, w: &str, v: &str, y1: &str) -> Result<(f64, f64)> {
    Ok((mi(p, &[y2], &[v, y1], &[u, w])?, mi(p, &[y1], &[y2, u], &[v, w])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{Alphabet, ConditionalPmf};
    use crate::sources;

    fn bit(n: &str) -> Alphabet {
        Alphabet::new(n, 2).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let fair = JointPmf::uniform(vec![bit("X")]).unwrap();
        assert_eq!(entropy(&fair, &["X"]).unwrap(), 1.0);
        let point = JointPmf::point_mass(vec![bit("X")], &[1]).unwrap();
        assert_eq!(entropy(&point, &["X"]).unwrap(), 0.0);
        let skew = JointPmf::new(vec![bit("X")], vec![0.25, 0.75]).unwrap();
        // 0.25*2 + 0.75*log2(4/3)
        let expected = 0.5 + 0.75 * (4.0f64 / 3.0).log2();
        assert!((entropy(&skew, &["X"]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.811278).abs() < 1e-6);
        assert!(matches!(entropy(&skew, &["Q"]), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn mutual_information_examples() {
        let indep = sources::independent_bits();
        assert!(mi(&indep, &["Y1"], &["Y2"], &[]).unwrap().abs() < 1e-15);
        let copy = sources::identical_uniform(2).unwrap();
        assert!((mi(&copy, &["Y1"], &["Y2"], &[]).unwrap() - 1.0).abs() < 1e-15);
        let d = sources::dsbs(0.1).unwrap();
        let expected = 1.0 - binary_entropy(0.1);
        assert!((mi(&d, &["Y1"], &["Y2"], &[]).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.531004).abs() < 1e-6);
        assert!(mi(&d, &["Y1"], &["Y1"], &[]).is_err());
        assert!(mi(&d, &["Y1"], &["Y9"], &[]).is_err());
    }

    #[test]
    fn markov_slack_examples() {
        let a = JointPmf::new(vec![bit("A")], vec![0.3, 0.7]).unwrap();
        let b = JointPmf::new(vec![bit("B")], vec![0.6, 0.4]).unwrap();
        let c = JointPmf::new(vec![bit("C")], vec![0.2, 0.8]).unwrap();
        let abc = a.product(&b).unwrap().product(&c).unwrap();
        assert!(markov_slack(&abc, &["A"], &["B"], &["C"]).unwrap().abs() < 1e-15);

        // A = C fair bit, B independent
        let ac = JointPmf::new(vec![bit("A"), bit("C")], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let acb = ac.product(&b).unwrap();
        assert!((markov_slack(&acb, &["A"], &["B"], &["C"]).unwrap() - 1.0).abs() < 1e-14);

        // a -> b -> c built from explicit channels
        let ab = ConditionalPmf::new(
            vec![bit("A")],
            vec![bit("B")],
            vec![Some(vec![0.9, 0.1]), Some(vec![0.3, 0.7])],
        )
        .unwrap();
        let bc = ConditionalPmf::new(
            vec![bit("B")],
            vec![bit("C")],
            vec![Some(vec![0.2, 0.8]), Some(vec![0.6, 0.4])],
        )
        .unwrap();
        let chain = a.compose(&ab).unwrap().compose(&bc).unwrap();
        assert!(markov_slack(&chain, &["A"], &["B"], &["C"]).unwrap() <= 1e-12);
    }
}
