use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{make_binning, BinningCode, SequenceSpace, Symbols, SEQUENCE_CAP};
use crate::error::{Error, Result};
use crate::pmf::JointPmf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decoded {
    Tuple(usize),
    /// No candidate carries the given bin indices.
    NoCandidate,
}

/// Maximum-likelihood decoding within a bin intersection. `labels[t][c]`
/// is the bin of candidate `c` under the `t`-th binning; the candidate of
/// largest `prior` whose bins equal `indices` wins, the lowest index on
/// ties.
pub fn sw_decode(prior: &[f64], labels: &[&[u32]], indices: &[u32]) -> Decoded {
    let mut best: Option<(usize, f64)> = None;
    for (c, &p) in prior.iter().enumerate() {
        if labels.iter().zip(indices).all(|(l, &i)| l[c] == i) && best.is_none_or(|(_, bp)| p > bp) {
            best = Some((c, p));
        }
    }
    best.map_or(Decoded::NoCandidate, |(c, _)| Decoded::Tuple(c))
}

/// Exact probability that the decoder recovers `X^n` from its bins under
/// every binning in `binnings` (all over the `X`-sequence space) and side
/// information `side^n`, for i.i.d. `(X, side) ~ p`.
pub fn sw_success_prob(p: &JointPmf, x: &[&str], side: &[&str], binnings: &[BinningCode], n: usize) -> Result<f64> {
    // Variables outside `x` and `side` are summed out first.
    let mut kept: Vec<&str> = x.to_vec();
    kept.extend(side.iter().filter(|v| !x.contains(v)));
    let sym = Symbols::new(&p.marginal(&kept)?, &[x, side])?;
    let want = SequenceSpace {
        symbols: sym.group_sizes[0],
        n,
    };
    if let Some(b) = binnings.iter().find(|b| b.domain != want) {
        return Err(Error::InvalidArgument(format!(
            "binning over {:?}, decoded space is {want:?}",
            b.domain
        )));
    }
    sym.sequence_count(n, SEQUENCE_CAP)?;
    // The decoder picks the most likely sequence of each (side, bins) cell,
    // so the success mass of a cell is its largest probability.
    let mut best: HashMap<(usize, Vec<u32>), f64> = HashMap::new();
    sym.for_each_sequence(n, &mut |prob, idx| {
        let bins: Vec<u32> = binnings.iter().map(|b| b.bin(idx[0])).collect();
        let e = best.entry((idx[1], bins)).or_insert(0.0);
        *e = e.max(prob);
    });
    let mut cells: Vec<(&(usize, Vec<u32>), &f64)> = best.iter().collect();
    cells.sort_by(|a, b| a.0.cmp(b.0));
    Ok(cells.into_iter().map(|(_, p)| p).sum())
}

/// [`sw_success_prob`] with a single fresh binning of `num_bins` bins per
/// seed.
pub fn sw_success_over_seeds(
    p: &JointPmf,
    x: &[&str],
    side: &[&str],
    n: usize,
    num_bins: usize,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    let symbols = x
        .iter()
        .map(|v| p.alphabet(v).map(|a| a.size()))
        .product::<Result<usize>>()?;
    seeds
        .iter()
        .map(|&s| {
            let b = make_binning(SequenceSpace { symbols, n }, num_bins, s)?;
            sw_success_prob(p, x, side, &[b], n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osrb::{bins_from_rate, digits, median};
    use crate::sources;

    #[test]
    fn injective_binning_recovers_everything() {
        let labels: Vec<u32> = (0..8).collect();
        let prior = vec![0.125; 8];
        for c in 0..8 {
            assert_eq!(sw_decode(&prior, &[&labels], &[c as u32]), Decoded::Tuple(c));
        }
        let q = sources::dsbs(0.1).unwrap();
        let b = BinningCode {
            domain: SequenceSpace { symbols: 2, n: 3 },
            num_bins: 8,
            assignment: labels,
            seed: 0,
        };
        assert!((sw_success_prob(&q, &["Y1"], &[], &[b], 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_bin_returns_the_prior_mode() {
        let labels = vec![0u32; 5];
        let prior = [0.1, 0.3, 0.3, 0.2, 0.1];
        assert_eq!(sw_decode(&prior, &[&labels], &[0]), Decoded::Tuple(1));
        assert_eq!(sw_decode(&prior, &[&labels], &[1]), Decoded::NoCandidate);
        for k in 2..5 {
            let q = sources::identical_uniform(k).unwrap();
            let b = make_binning(SequenceSpace { symbols: k, n: 1 }, 1, 0).unwrap();
            let s = sw_success_prob(&q, &["Y1"], &[], &[b], 1).unwrap();
            assert!((s - 1.0 / k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn copy_side_information_needs_almost_no_rate() {
        let q = sources::identical_uniform(2).unwrap();
        let (bins, _) = bins_from_rate(6, 0.2).unwrap();
        let seeds: Vec<u64> = (0..20).collect();
        for s in sw_success_over_seeds(&q, &["Y1"], &["Y2"], 6, bins, &seeds).unwrap() {
            assert!(s >= 0.99, "{s}");
        }
    }

    #[test]
    fn grouped_success_matches_per_sequence_decoding() {
        let q = sources::dsbs(0.2).unwrap();
        let n = 3;
        let b = make_binning(SequenceSpace { symbols: 2, n }, 3, 5).unwrap();
        let mut brute = 0.0;
        for y in 0..8 {
            let yd = digits(y, 2, n);
            let prior: Vec<f64> = (0..8)
                .map(|x| {
                    digits(x, 2, n)
                        .iter()
                        .zip(&yd)
                        .map(|(&a, &c)| q.table()[a * 2 + c])
                        .product()
                })
                .collect();
            for x in 0..8 {
                if sw_decode(&prior, &[&b.assignment], &[b.bin(x)]) == Decoded::Tuple(x) {
                    brute += prior[x];
                }
            }
        }
        let fast = sw_success_prob(&q, &["Y1"], &["Y2"], &[b], n).unwrap();
        assert!((brute - fast).abs() < 1e-14, "{brute} {fast}");
    }

    #[test]
    fn dsbs_decoding_improves_with_block_length() {
        let q = sources::dsbs(0.1).unwrap();
        let seeds: Vec<u64> = (0..20).collect();
        let med = |n| {
            let (bins, _) = bins_from_rate(n, 0.7).unwrap();
            median(&sw_success_over_seeds(&q, &["Y1"], &["Y2"], n, bins, &seeds).unwrap())
        };
        let (m4, m8) = (med(4), med(8));
        assert!(m8 > m4, "{m4} {m8}");
    }
}
