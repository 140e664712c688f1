//! Exact finite-`n` simulation of random binning: uniformity of bin
//! indices, Slepian–Wolf decoding, and the two-node relay protocol with
//! shared randomness and its derandomization.
//!
//! Sequences over a symbol alphabet of size `k` are indexed in base `k`
//! with the first symbol most significant, so index order is lexicographic
//! order. Bin indices are 0-based.

mod protocol;
mod sw;
mod sweep;
mod uniformity;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::JointPmf;
use crate::seeding;

pub use protocol::{run_protocol, InducedLaw, ProtocolCaps, ProtocolConfig, TildeRates, BINNING_NAMES};
pub use sw::{sw_decode, sw_success_over_seeds, sw_success_prob, Decoded};
pub use sweep::{sweep, write_sweep_csv, SweepCell, SweepRecord, SWEEP_COLUMNS};
pub use uniformity::osrb_uniformity;

/// Default cap on enumerated sequence tuples.
pub const SEQUENCE_CAP: usize = 1 << 22;

/// Sequences of length `n` over `symbols` letters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpace {
    pub symbols: usize,
    pub n: usize,
}

impl SequenceSpace {
    pub fn size(&self) -> Option<usize> {
        u32::try_from(self.n).ok().and_then(|n| self.symbols.checked_pow(n))
    }

    pub(crate) fn checked_size(&self, cap: usize) -> Result<usize> {
        match self.size() {
            Some(s) if s <= cap => Ok(s),
            Some(s) => Err(Error::StateSpaceTooLarge {
                size: s as u128,
                cap: cap as u128,
            }),
            None => Err(Error::StateSpaceTooLarge {
                size: u128::MAX,
                cap: cap as u128,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningCode {
    pub domain: SequenceSpace,
    pub num_bins: usize,
    /// Bin of every sequence, in index order.
    pub assignment: Vec<u32>,
    pub seed: u64,
}

impl BinningCode {
    pub fn bin(&self, seq: usize) -> u32 {
        self.assignment[seq]
    }
}

/// Assign every sequence of `domain` a bin drawn uniformly from
/// `0..num_bins`, independently, from the stream seeded by `seed`.
pub fn make_binning(domain: SequenceSpace, num_bins: usize, seed: u64) -> Result<BinningCode> {
    make_binning_capped(domain, num_bins, seed, SEQUENCE_CAP)
}

pub fn make_binning_capped(domain: SequenceSpace, num_bins: usize, seed: u64, cap: usize) -> Result<BinningCode> {
    if num_bins == 0 || num_bins > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "number of bins {num_bins} out of range"
        )));
    }
    let size = domain.checked_size(cap)?;
    let mut rng = seeding::stream(&[seed]);
    let assignment = (0..size).map(|_| rng.random_range(0..num_bins as u32)).collect();
    Ok(BinningCode {
        domain,
        num_bins,
        assignment,
        seed,
    })
}

/// `max(1, round(2^{nR}))` bins and the effective rate `log2(bins) / n`.
pub fn bins_from_rate(n: usize, rate: f64) -> Result<(usize, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("block length must be positive".into()));
    }
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rate {rate} must be finite and nonnegative"
        )));
    }
    let raw = (n as f64 * rate).exp2().round();
    if raw > u32::MAX as f64 {
        return Err(Error::StateSpaceTooLarge {
            size: raw as u128,
            cap: u32::MAX as u128,
        });
    }
    let bins = (raw as usize).max(1);
    Ok((bins, (bins as f64).log2() / n as f64))
}

/// Positive-mass symbols of a pmf with their index inside each variable
/// group (mixed radix, first variable most significant).
pub(crate) struct Symbols {
    pub prob: Vec<f64>,
    /// `index[s][g]`: symbol `s` projected on group `g`.
    pub index: Vec<Vec<usize>>,
    pub group_sizes: Vec<usize>,
}

impl Symbols {
    pub fn new(p: &JointPmf, groups: &[&[&str]]) -> Result<Self> {
        let pos: Vec<Vec<usize>> = groups.iter().map(|g| p.positions(g)).collect::<Result<_>>()?;
        let sizes = p.sizes();
        let group_sizes = pos.iter().map(|g| g.iter().map(|&i| sizes[i]).product()).collect();
        let (mut prob, mut index) = (Vec::new(), Vec::new());
        for (flat, mass) in p.support() {
            let idx = p.unravel(flat);
            prob.push(mass);
            index.push(
                pos.iter()
                    .map(|g| g.iter().fold(0, |acc, &i| acc * sizes[i] + idx[i]))
                    .collect(),
            );
        }
        Ok(Self {
            prob,
            index,
            group_sizes,
        })
    }

    pub fn sequence_count(&self, n: usize, cap: usize) -> Result<usize> {
        SequenceSpace {
            symbols: self.prob.len(),
            n,
        }
        .checked_size(cap)
    }

    /// Visit every positive-mass sequence of length `n` with its
    /// probability and its sequence index in every group.
    pub fn for_each_sequence(&self, n: usize, f: &mut dyn FnMut(f64, &[usize])) {
        let mut idx = vec![0usize; self.group_sizes.len()];
        self.walk(n, 1.0, &mut idx, f);
    }

    fn walk(&self, left: usize, prob: f64, idx: &mut Vec<usize>, f: &mut dyn FnMut(f64, &[usize])) {
        if left == 0 {
            f(prob, idx);
            return;
        }
        let saved = idx.clone();
        for (s, &ps) in self.prob.iter().enumerate() {
            for (g, v) in idx.iter_mut().enumerate() {
                *v = saved[g] * self.group_sizes[g] + self.index[s][g];
            }
            self.walk(left - 1, prob * ps, idx, f);
        }
        idx.copy_from_slice(&saved);
    }
}

/// Digits of `seq` in base `k`, most significant first.
pub(crate) fn digits(mut seq: usize, k: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for d in out.iter_mut().rev() {
        *d = seq % k;
        seq /= k;
    }
    out
}

/// Median of a nonempty list (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources;

    #[test]
    fn bins_from_rate_examples() {
        assert_eq!(bins_from_rate(4, 0.5).unwrap(), (4, 0.5));
        let (b, r) = bins_from_rate(3, 0.5).unwrap();
        assert_eq!(b, 3);
        assert!((r - 3f64.log2() / 3.0).abs() < 1e-15);
        for n in 1..6 {
            assert_eq!(bins_from_rate(n, 0.0).unwrap().0, 1);
        }
        assert!(bins_from_rate(0, 0.5).is_err());
        assert!(bins_from_rate(2, f64::INFINITY).is_err());
    }

    #[test]
    fn one_bin_and_determinism() {
        let d = SequenceSpace { symbols: 3, n: 4 };
        assert!(make_binning(d, 1, 9).unwrap().assignment.iter().all(|&b| b == 0));
        assert_eq!(make_binning(d, 5, 2).unwrap(), make_binning(d, 5, 2).unwrap());
        assert_ne!(make_binning(d, 5, 2).unwrap(), make_binning(d, 5, 3).unwrap());
        assert!(make_binning(d, 0, 1).is_err());
        assert!(matches!(
            make_binning_capped(SequenceSpace { symbols: 2, n: 10 }, 2, 0, 1000),
            Err(Error::StateSpaceTooLarge { size: 1024, cap: 1000 })
        ));
    }

    #[test]
    fn collisions_follow_the_birthday_model() {
        // Colliding pairs of a uniform map are pairwise independent events
        // with probability 1/m, so the count over seeds has an exact
        // binomial-like mean and variance.
        let d = SequenceSpace { symbols: 2, n: 6 };
        let m = 64usize;
        let seeds = 100;
        let mut total = 0usize;
        for s in 0..seeds {
            let b = make_binning(d, m, s).unwrap();
            let mut counts = vec![0usize; m];
            b.assignment.iter().for_each(|&x| counts[x as usize] += 1);
            total += counts.iter().map(|c| c * c.saturating_sub(1) / 2).sum::<usize>();
        }
        let pairs = (64 * 63 / 2) as f64;
        let p = 1.0 / m as f64;
        let mean = seeds as f64 * pairs * p;
        let sd = (seeds as f64 * pairs * p * (1.0 - p)).sqrt();
        assert!((total as f64 - mean).abs() <= 3.0 * sd, "{total} vs {mean} ± {sd}");
    }

    #[test]
    fn sequence_walk_matches_iid_extension() {
        let q = sources::dsbs(0.2).unwrap();
        let sym = Symbols::new(&q, &[&["Y1", "Y2"], &["Y1"]]).unwrap();
        let mut seen = vec![0.0; 64];
        let mut marg = [0.0; 8];
        sym.for_each_sequence(3, &mut |p, idx| {
            seen[idx[0]] += p;
            marg[idx[1]] += p;
        });
        for (i, &p) in seen.iter().enumerate() {
            let d = digits(i, 4, 3);
            let want: f64 = d.iter().map(|&s| q.table()[s]).product();
            assert!((p - want).abs() < 1e-15);
        }
        assert!(marg.iter().all(|&m| (m - 0.125).abs() < 1e-15));
    }

    #[test]
    fn median_of_lists() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
