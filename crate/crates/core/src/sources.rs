//! Named target distributions `q(y1, y2)` used throughout the tests and the CLI.

use crate::error::{Error, Result};
use crate::pmf::{Alphabet, JointPmf};

fn pair(n1: usize, n2: usize) -> Vec<Alphabet> {
    vec![
        Alphabet::new("Y1", n1).expect("valid"),
        Alphabet::new("Y2", n2).expect("valid"),
    ]
}

/// Two independent fair bits.
pub fn independent_bits() -> JointPmf {
    JointPmf::uniform(pair(2, 2)).expect("valid")
}

/// Independent `Y1 ~ a`, `Y2 ~ b`.
pub fn independent(a: &[f64], b: &[f64]) -> Result<JointPmf> {
    JointPmf::from_fn(pair(a.len(), b.len()), |i| a[i[0]] * b[i[1]])
}

/// `Y1 = Y2` uniform over `k` symbols.
pub fn identical_uniform(k: usize) -> Result<JointPmf> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    JointPmf::from_fn(pair(k, k), |i| if i[0] == i[1] { 1.0 / k as f64 } else { 0.0 })
}

/// Doubly symmetric binary source with crossover `p`.
pub fn dsbs(p: f64) -> Result<JointPmf> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::InvalidArgument(format!("dsbs crossover {p} outside [0, 0.5]")));
    }
    JointPmf::new(pair(2, 2), vec![(1.0 - p) / 2.0, p / 2.0, p / 2.0, (1.0 - p) / 2.0])
}

/// `Y1 = (A, B)`, `Y2 = (A, C)` with `A, B, C` i.i.d. fair bits; symbol
/// index `2a + b` (resp. `2a + c`).
pub fn triple_abc() -> JointPmf {
    JointPmf::from_fn(pair(4, 4), |i| if i[0] / 2 == i[1] / 2 { 1.0 / 8.0 } else { 0.0 }).expect("valid")
}

/// Parse a builtin name: `independent`, `identical-uniform-k`, `dsbs-p`,
/// `triple-abc`.
pub fn builtin(name: &str) -> Result<JointPmf> {
    if name == "independent" {
        return Ok(independent_bits());
    }
    if name == "triple-abc" {
        return Ok(triple_abc());
    }
    if let Some(k) = name.strip_prefix("identical-uniform-") {
        let k: usize = k
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad k in builtin `{name}`")))?;
        return identical_uniform(k);
    }
    if let Some(p) = name.strip_prefix("dsbs-") {
        let p: f64 = p
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad p in builtin `{name}`")))?;
        return dsbs(p);
    }
    Err(Error::InvalidArgument(format!("unknown builtin source `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_expand() {
        assert_eq!(builtin("dsbs-0.1").unwrap(), dsbs(0.1).unwrap());
        assert_eq!(builtin("identical-uniform-3").unwrap().len(), 9);
        let t = builtin("triple-abc").unwrap();
        assert_eq!(t.support().count(), 8);
        assert!((t.prob(&[3, 2]) - 0.125).abs() < 1e-15);
        assert_eq!(t.prob(&[1, 2]), 0.0);
        assert!(builtin("dsbs-0.7").is_err());
        assert!(builtin("nope").is_err());
    }
}
