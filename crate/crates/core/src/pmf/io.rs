//! Plain-text pmf files.
//!
//! ```text
//! # optional comments
//! vars Y1:2 Y2:2
//! 0,0,4.5000000000000001e-1
//! 0,1,5.0000000000000003e-2
//! ...
//! ```
//!
//! The header names each variable with its alphabet size (optionally
//! followed by `:label|label|...`). Rows are `index..., probability` in
//! canonical order. Probabilities carry 17 significant digits so a written
//! file reads back bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use super::{advance, Alphabet, JointPmf};
use crate::error::{Error, Result};

pub fn write_pmf(p: &JointPmf) -> String {
    let mut out = String::from("vars");
    for a in p.alphabets() {
        let _ = write!(out, " {}:{}", a.name(), a.size());
        if let Some(labels) = a.labels() {
            let _ = write!(out, ":{}", labels.join("|"));
        }
    }
    out.push('\n');
    let sizes = p.sizes();
    let mut idx = vec![0; sizes.len()];
    for &v in p.table() {
        for i in &idx {
            let _ = write!(out, "{i},");
        }
        let _ = writeln!(out, "{v:.16e}");
        advance(&mut idx, &sizes);
    }
    out
}

pub fn read_pmf(text: &str) -> Result<JointPmf> {
    let mut alphabets: Option<Vec<Alphabet>> = None;
    let mut table: Vec<f64> = Vec::new();
    let mut seen: Vec<bool> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        match &alphabets {
            None => {
                let rest = line
                    .strip_prefix("vars")
                    .ok_or_else(|| parse_err("expected `vars` header".into()))?;
                let mut list = Vec::new();
                for tok in rest.split_whitespace() {
                    let mut parts = tok.splitn(3, ':');
                    let name = parts.next().unwrap_or_default();
                    let size: usize = parts
                        .next()
                        .ok_or_else(|| parse_err(format!("`{tok}` lacks a size")))?
                        .parse()
                        .map_err(|e| parse_err(format!("bad size in `{tok}`: {e}")))?;
                    let mut a = Alphabet::new(name, size).map_err(|e| parse_err(e.to_string()))?;
                    if let Some(labels) = parts.next() {
                        a = a
                            .with_labels(labels.split('|').map(str::to_string).collect())
                            .map_err(|e| parse_err(e.to_string()))?;
                    }
                    list.push(a);
                }
                let len = super::product_size(&list).ok_or_else(|| parse_err("alphabet product overflows".into()))?;
                table = vec![0.0; len];
                seen = vec![false; len];
                alphabets = Some(list);
            }
            Some(list) => {
                let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                if fields.len() != list.len() + 1 {
                    return Err(parse_err(format!(
                        "expected {} indices and a probability, got {} fields",
                        list.len(),
                        fields.len()
                    )));
                }
                let mut flat = 0usize;
                for (a, f) in list.iter().zip(&fields) {
                    let i: usize = f.parse().map_err(|e| parse_err(format!("bad index `{f}`: {e}")))?;
                    if i >= a.size() {
                        return Err(parse_err(format!("index {i} out of range for `{}`", a.name())));
                    }
                    flat = flat * a.size() + i;
                }
                let v: f64 = fields[list.len()]
                    .parse()
                    .map_err(|e| parse_err(format!("bad probability: {e}")))?;
                if seen[flat] {
                    return Err(parse_err("duplicate row".into()));
                }
                seen[flat] = true;
                table[flat] = v;
            }
        }
    }
    let alphabets = alphabets.ok_or(Error::Parse {
        line: 0,
        msg: "missing `vars` header".into(),
    })?;
    let validated = JointPmf::new(alphabets, table.clone())?;
    // A file written by `write_pmf` already sums to one up to rounding; keep
    // its values verbatim so the round trip is bit-exact.
    if (table.iter().sum::<f64>() - 1.0).abs() <= 1e-12 && table.iter().all(|v| *v >= 0.0) {
        return Ok(JointPmf::from_parts(validated.alphabets().to_vec(), table));
    }
    Ok(validated)
}

impl JointPmf {
    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, write_pmf(self))?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<JointPmf> {
        read_pmf(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_header_and_rows() {
        let text = "# dsbs\nvars Y1:2:a|b Y2:2\n0,0,0.45\n0,1,0.05\n1,0,0.05\n1,1,0.45\n";
        let p = read_pmf(text).unwrap();
        assert_eq!(p.names(), vec!["Y1", "Y2"]);
        assert_eq!(p.alphabets()[0].labels().unwrap(), &["a".to_string(), "b".to_string()]);
        assert!((p.prob(&[1, 1]) - 0.45).abs() < 1e-15);
        assert!(write_pmf(&p).starts_with("vars Y1:2:a|b Y2:2\n0,0,"));
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(matches!(
            read_pmf("vars X:2\n0,0.5\n0,0.5\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            read_pmf("vars X:2\n2,1.0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(read_pmf("0,1.0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            read_pmf("vars X:2\n0,0.7\n1,0.2\n"),
            Err(Error::NotNormalized { .. })
        ));
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(raw in prop::collection::vec(0.0f64..1.0, 6)) {
            let s: f64 = raw.iter().sum::<f64>() + 1e-3;
            let table: Vec<f64> = raw.iter().map(|v| (v + 1e-3 / 6.0) / s).collect();
            let p = JointPmf::new(
                vec![Alphabet::new("A", 3).unwrap(), Alphabet::new("B", 2).unwrap()],
                table,
            ).unwrap();
            let back = read_pmf(&write_pmf(&p)).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
