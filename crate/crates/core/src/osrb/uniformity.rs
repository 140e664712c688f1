use super::{BinningCode, SequenceSpace, Symbols, SEQUENCE_CAP};
use crate::error::{Error, Result};
use crate::pmf::{tv_slices, JointPmf};

/// Exact total variation between the law of `(Y^n, B_1, ..., B_T)` and
/// `p(y^n) ∏ Unif(B_t)`, where `B_t` is the bin of the `t`-th source
/// sequence `X_t^n` under `binnings[t]`. Sources are groups of variables of
/// `p` and may overlap; `side` may be empty.
pub fn osrb_uniformity(
    p: &JointPmf,
    sources: &[&[&str]],
    side: &[&str],
    binnings: &[BinningCode],
    n: usize,
) -> Result<f64> {
    if sources.len() != binnings.len() {
        return Err(Error::ShapeMismatch {
            expected: sources.len(),
            got: binnings.len(),
        });
    }
    let mut groups: Vec<&[&str]> = sources.to_vec();
    groups.push(side);
    let sym = Symbols::new(p, &groups)?;
    for (t, b) in binnings.iter().enumerate() {
        let want = SequenceSpace {
            symbols: sym.group_sizes[t],
            n,
        };
        if b.domain != want {
            return Err(Error::InvalidArgument(format!(
                "binning {t} is over {:?}, source needs {want:?}",
                b.domain
            )));
        }
    }
    sym.sequence_count(n, SEQUENCE_CAP)?;
    let ny = SequenceSpace {
        symbols: sym.group_sizes[sources.len()],
        n,
    }
    .checked_size(SEQUENCE_CAP)?;
    let nb = binnings
        .iter()
        .try_fold(1usize, |acc, b| acc.checked_mul(b.num_bins))
        .unwrap_or(usize::MAX);
    let cells = ny
        .checked_mul(nb)
        .filter(|&c| c <= SEQUENCE_CAP)
        .ok_or(Error::StateSpaceTooLarge {
            size: ny as u128 * nb as u128,
            cap: SEQUENCE_CAP as u128,
        })?;

    let mut joint = vec![0.0; cells];
    let mut py = vec![0.0; ny];
    sym.for_each_sequence(n, &mut |prob, idx| {
        let b = binnings
            .iter()
            .zip(idx)
            .fold(0usize, |acc, (code, &seq)| acc * code.num_bins + code.bin(seq) as usize);
        let y = idx[sources.len()];
        joint[y * nb + b] += prob;
        py[y] += prob;
    });
    let u = 1.0 / nb as f64;
    let ideal: Vec<f64> = (0..cells).map(|c| py[c / nb] * u).collect();
    Ok(tv_slices(&joint, &ideal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osrb::make_binning;
    use crate::pmf::Alphabet;
    use crate::sources;

    fn fair_bit() -> JointPmf {
        JointPmf::uniform(vec![Alphabet::new("X", 2).unwrap()]).unwrap()
    }

    fn fixed(assignment: Vec<u32>, num_bins: usize) -> BinningCode {
        BinningCode {
            domain: SequenceSpace { symbols: 2, n: 1 },
            num_bins,
            assignment,
            seed: 0,
        }
    }

    #[test]
    fn splitting_binning_is_uniform() {
        let tv = osrb_uniformity(&fair_bit(), &[&["X"]], &[], &[fixed(vec![0, 1], 2)], 1).unwrap();
        assert_eq!(tv, 0.0);
    }

    #[test]
    fn merged_binning_is_half_off() {
        let tv = osrb_uniformity(&fair_bit(), &[&["X"]], &[], &[fixed(vec![0, 0], 2)], 1).unwrap();
        assert!((tv - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_bins_are_always_uniform() {
        let q = sources::dsbs(0.3).unwrap();
        let d = SequenceSpace { symbols: 2, n: 3 };
        let b = vec![make_binning(d, 1, 1).unwrap()];
        let tv = osrb_uniformity(&q, &[&["Y1"]], &["Y2"], &b, 3).unwrap();
        assert!(tv.abs() < 1e-15);
    }

    #[test]
    fn bins_of_a_copy_reveal_side_information() {
        // X = Y: with one bin per sequence the bin determines y, far from
        // independent of it.
        let q = sources::identical_uniform(2).unwrap();
        let d = SequenceSpace { symbols: 2, n: 2 };
        let inj = BinningCode {
            domain: d,
            num_bins: 4,
            assignment: vec![0, 1, 2, 3],
            seed: 0,
        };
        let tv = osrb_uniformity(&q, &[&["Y1"]], &["Y2"], &[inj], 2).unwrap();
        assert!((tv - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_domains() {
        let d = SequenceSpace { symbols: 4, n: 2 };
        let b = vec![make_binning(d, 2, 0).unwrap()];
        assert!(osrb_uniformity(&fair_bit(), &[&["X"]], &[], &b, 2).is_err());
        assert!(osrb_uniformity(&fair_bit(), &[&["X"]], &[], &[], 2).is_err());
    }
}
