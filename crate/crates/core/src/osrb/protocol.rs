//! Exact law of the relay protocol.
//!
//! Shared indices `g0` (bin of `w^n`), `g1` (of `(w^n,v^n)`) and `g2` (of
//! `(w^n,u^n)`) are uniform, as are the backward messages `b1`, `b2`. The
//! relay draws `(w^n,v^n,u^n)` from the i.i.d. law conditioned on all five
//! bins, sends `f1(w^n,v^n)` and `f2(w^n,u^n)`; node 1 decodes `(w^n,v^n)`
//! from `(g0,g1,b1,f1)` and emits `y1^n ~ p(y1|w,v)`, node 2 likewise with
//! `(w^n,u^n)` and `p(y2|w,u)`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bins_from_rate, digits, make_binning_capped, BinningCode, SequenceSpace, Symbols};
use crate::error::{Error, Result};
use crate::pmf::{tv_slices, ConditionalPmf, JointPmf};
use crate::region::{InnerCoupling, RateTuple};
use crate::seeding;

/// Auxiliary binning rates of the shared indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TildeRates {
    pub rt0: f64,
    pub rt1: f64,
    pub rt2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolCaps {
    /// Cap on `|W×V×U|^n` and on every binning domain.
    pub sequences: usize,
    /// Cap on `|Y1×Y2|^n`.
    pub outputs: usize,
    /// Cap on the number of entries of the joint law with the shared indices.
    pub joint: usize,
}

impl Default for ProtocolCaps {
    fn default() -> Self {
        Self {
            sequences: 1 << 22,
            outputs: 1 << 20,
            joint: 1 << 24,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    /// Target over `(Y1, Y2)`.
    pub q: JointPmf,
    pub coupling: InnerCoupling,
    pub n: usize,
    pub rates: RateTuple,
    pub tilde: TildeRates,
    pub seed: u64,
    pub caps: ProtocolCaps,
}

/// Binning names in the order used by [`InducedLaw::bins`] and friends.
pub const BINNING_NAMES: [&str; 7] = ["g0", "g1", "b1", "f1", "g2", "b2", "f2"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducedLaw {
    pub n: usize,
    /// Bin counts in [`BINNING_NAMES`] order.
    pub bins: [usize; 7],
    pub effective_rates: [f64; 7],
    pub binning_seeds: [u64; 7],
    /// Number of output sequences `|Y1|^n`, `|Y2|^n`.
    pub outputs: (usize, usize),
    /// `P(g0, g1, g2, y1^n, y2^n)` with `g = (g0*G1 + g1)*G2 + g2` outermost
    /// and `y1^n * |Y2|^n + y2^n` innermost.
    pub joint_with_g: Vec<f64>,
    /// The `(y1^n, y2^n)` marginal accumulated with the shared indices summed
    /// out before the output channels are applied.
    pub marginal: Vec<f64>,
    /// Largest difference between `marginal` and the sum of
    /// `joint_with_g` over `g`.
    pub marginal_discrepancy: f64,
    pub mass: f64,
    pub tv_marginal: f64,
    pub tv_with_uniform_g: f64,
    pub best_g: [usize; 3],
    pub tv_best_g: f64,
    /// Probability that node 1 (resp. 2) decodes the relay's sequences.
    pub sw1_success: f64,
    pub sw2_success: f64,
    /// Mass of index combinations with no sequence in their bins; those
    /// nodes emit outputs for the lexicographically first supported
    /// sequence.
    pub nocandidate_mass: f64,
}

impl InducedLaw {
    pub fn num_g(&self) -> usize {
        self.bins[0] * self.bins[1] * self.bins[4]
    }
}

fn cap_check(size: Option<usize>, cap: usize) -> Result<usize> {
    match size {
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

fn pow(k: usize, n: usize) -> Option<usize> {
    k.checked_pow(u32::try_from(n).ok()?)
}

/// Per-symbol output rows, indexed by the pair symbol `w*|X| + x`, of a
/// channel conditioned on `(X, W)`.
fn channel_rows(chan: &ConditionalPmf, nx: usize, nw: usize, support: &[bool]) -> Result<Vec<Vec<f64>>> {
    (0..nw * nx)
        .map(|s| {
            let (w, x) = (s / nx, s % nx);
            let row = x * nw + w;
            match chan.row(row) {
                Some(r) => Ok(r.to_vec()),
                None if !support[s] => Ok(vec![0.0; chan.row_len()]),
                None => Err(Error::UndefinedConditional { row }),
            }
        })
        .collect()
}

/// Law of `y^n` given an input sequence: the Kronecker product of rows.
fn sequence_channel(rows: &[Vec<f64>], seq: usize, k: usize, n: usize) -> Vec<f64> {
    digits(seq, k, n).into_iter().fold(vec![1.0], |acc, s| {
        acc.iter().flat_map(|a| rows[s].iter().map(move |r| a * r)).collect()
    })
}

/// Maximum-likelihood decoder over pair sequences, keyed by all bin
/// indices a node sees. Ties go to the lowest sequence index.
fn decoder(
    p_pair: &JointPmf,
    names: [&str; 2],
    codes: [&BinningCode; 4],
    n: usize,
) -> Result<HashMap<[u32; 4], usize>> {
    let sym = Symbols::new(p_pair, &[&names[..1], &names[..]])?;
    let mut best: HashMap<[u32; 4], (usize, f64)> = HashMap::new();
    sym.for_each_sequence(n, &mut |prob, idx| {
        let (w, pair) = (idx[0], idx[1]);
        let key = [
            codes[0].bin(w),
            codes[1].bin(pair),
            codes[2].bin(pair),
            codes[3].bin(pair),
        ];
        let e = best.entry(key).or_insert((pair, prob));
        if prob > e.1 || (prob == e.1 && pair < e.0) {
            *e = (pair, prob);
        }
    });
    Ok(best.into_iter().map(|(k, (s, _))| (k, s)).collect())
}

/// Apply both output channels to a law over decoded pairs.
fn output_law(
    m: &BTreeMap<(usize, usize), f64>,
    k1: &HashMap<usize, Vec<f64>>,
    k2: &HashMap<usize, Vec<f64>>,
    ny: (usize, usize),
) -> Vec<f64> {
    let mut out = vec![0.0; ny.0 * ny.1];
    let mut it = m.iter().peekable();
    while let Some((&(d1, _), _)) = it.peek() {
        let mut t = vec![0.0; ny.1];
        while let Some((&(e1, d2), &w)) = it.peek() {
            if e1 != d1 {
                break;
            }
            for (ti, ki) in t.iter_mut().zip(&k2[&d2]) {
                *ti += w * ki;
            }
            it.next();
        }
        for (y1, &a) in k1[&d1].iter().enumerate() {
            if a != 0.0 {
                for (o, &b) in out[y1 * ny.1..(y1 + 1) * ny.1].iter_mut().zip(&t) {
                    *o += a * b;
                }
            }
        }
    }
    out
}

/// Compute the exact induced law of one protocol instance (all binnings
/// fixed from `cfg.seed`).
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<InducedLaw> {
    let n = cfg.n;
    if n == 0 {
        return Err(Error::InvalidArgument("block length must be positive".into()));
    }
    let c = &cfg.coupling;
    let (nu, nv, nw) = c.caps();
    let [un, vn, wn, _, _] = c.names();
    let (n1, n2) = (c.chan_y1().row_len(), c.chan_y2().row_len());
    if cfg.q.sizes() != [n1, n2] {
        return Err(Error::AlphabetMismatch(
            "target and coupling outputs differ in size".into(),
        ));
    }
    let caps = cfg.caps;
    cap_check(pow(nu * nv * nw, n), caps.sequences)?;
    let ny = (
        cap_check(pow(n1, n), caps.outputs)?,
        cap_check(pow(n2, n), caps.outputs)?,
    );
    let ny_all = cap_check(ny.0.checked_mul(ny.1), caps.outputs)?;

    let r = cfg.rates;
    let t = cfg.tilde;
    let rates = [t.rt0, t.rt1, r.rb1, r.rf1, t.rt2, r.rb2, r.rf2];
    let domains = [nw, nw * nv, nw * nv, nw * nv, nw * nu, nw * nu, nw * nu];
    let mut bins = [0usize; 7];
    let mut effective_rates = [0.0; 7];
    let mut binning_seeds = [0u64; 7];
    let mut codes = Vec::with_capacity(7);
    for k in 0..7 {
        let (b, e) = bins_from_rate(n, rates[k])?;
        bins[k] = b;
        effective_rates[k] = e;
        binning_seeds[k] = seeding::derive_seed(&[cfg.seed, 0x05b, k as u64]);
        codes.push(make_binning_capped(
            SequenceSpace { symbols: domains[k], n },
            b,
            binning_seeds[k],
            caps.sequences,
        )?);
    }
    let [g0c, g1c, b1c, f1c, g2c, b2c, f2c] = [0, 1, 2, 3, 4, 5, 6].map(|k| &codes[k]);
    let num_g = cap_check(
        bins[0].checked_mul(bins[1]).and_then(|x| x.checked_mul(bins[4])),
        caps.joint,
    )?;
    cap_check(num_g.checked_mul(ny_all), caps.joint)?;
    let cells = cap_check(
        num_g.checked_mul(bins[2]).and_then(|x| x.checked_mul(bins[5])),
        caps.joint,
    )?;

    let p = c.p_uvw();
    let sym = Symbols::new(p, &[&[wn], &[wn, vn], &[wn, un]])?;
    let cell_of = |idx: &[usize]| -> (usize, usize) {
        let (w, wv, wu) = (idx[0], idx[1], idx[2]);
        let g = ((g0c.bin(w) as usize * bins[1]) + g1c.bin(wv) as usize) * bins[4] + g2c.bin(wu) as usize;
        (g, (g * bins[2] + b1c.bin(wv) as usize) * bins[5] + b2c.bin(wu) as usize)
    };

    // Protocol A: probability of every (g, b1, b2) cell.
    let mut p_cell = vec![0.0; cells];
    sym.for_each_sequence(n, &mut |prob, idx| p_cell[cell_of(idx).1] += prob);

    let p_wv = p.marginal(&[wn, vn])?;
    let p_wu = p.marginal(&[wn, un])?;
    let dec1 = decoder(&p_wv, [wn, vn], [g0c, g1c, b1c, f1c], n)?;
    let dec2 = decoder(&p_wu, [wn, un], [g0c, g2c, b2c, f2c], n)?;

    // Lexicographically first supported pair sequence for empty cells.
    let first_support = |m: &JointPmf, x: &str, nx: usize| -> Result<usize> {
        let pos = m.positions(&[wn, x])?;
        let s0 = m
            .support()
            .map(|(f, _)| {
                let i = m.unravel(f);
                i[pos[0]] * nx + i[pos[1]]
            })
            .min()
            .ok_or_else(|| Error::InvalidArgument("coupling has no mass".into()))?;
        Ok((0..n).fold(0, |acc, _| acc * (nw * nx) + s0))
    };
    let fb1 = first_support(&p_wv, vn, nv)?;
    let fb2 = first_support(&p_wu, un, nu)?;

    // Protocol B: uniform cells, relay draws from the cell's conditional.
    let u_cell = 1.0 / cells as f64;
    let mut per_g: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); num_g];
    let mut all: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let (mut sw1, mut sw2) = (0.0, 0.0);
    sym.for_each_sequence(n, &mut |prob, idx| {
        let (g, cell) = cell_of(idx);
        let weight = u_cell * prob / p_cell[cell];
        let (w, wv, wu) = (idx[0], idx[1], idx[2]);
        let d1 = dec1[&[g0c.bin(w), g1c.bin(wv), b1c.bin(wv), f1c.bin(wv)]];
        let d2 = dec2[&[g0c.bin(w), g2c.bin(wu), b2c.bin(wu), f2c.bin(wu)]];
        *per_g[g].entry((d1, d2)).or_insert(0.0) += weight;
        *all.entry((d1, d2)).or_insert(0.0) += weight;
        if d1 == wv {
            sw1 += weight;
        }
        if d2 == wu {
            sw2 += weight;
        }
    });
    let mut nocandidate_mass = 0.0;
    for (cell, _) in p_cell.iter().enumerate().filter(|(_, &m)| m == 0.0) {
        let g = cell / (bins[2] * bins[5]);
        *per_g[g].entry((fb1, fb2)).or_insert(0.0) += u_cell;
        *all.entry((fb1, fb2)).or_insert(0.0) += u_cell;
        nocandidate_mass += u_cell;
    }

    let mut supp_v = vec![false; nw * nv];
    let mut supp_u = vec![false; nw * nu];
    for (f, _) in p.support() {
        let i = p.unravel(f);
        supp_v[i[2] * nv + i[1]] = true;
        supp_u[i[2] * nu + i[0]] = true;
    }
    let rows1 = channel_rows(c.chan_y1(), nv, nw, &supp_v)?;
    let rows2 = channel_rows(c.chan_y2(), nu, nw, &supp_u)?;
    let mut k1: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut k2: HashMap<usize, Vec<f64>> = HashMap::new();
    for &(d1, d2) in all.keys() {
        k1.entry(d1).or_insert_with(|| sequence_channel(&rows1, d1, nw * nv, n));
        k2.entry(d2).or_insert_with(|| sequence_channel(&rows2, d2, nw * nu, n));
    }

    let blocks: Vec<Vec<f64>> = per_g.par_iter().map(|m| output_law(m, &k1, &k2, ny)).collect();
    let marginal = output_law(&all, &k1, &k2, ny);
    let mut summed = vec![0.0; ny_all];
    for b in &blocks {
        summed.iter_mut().zip(b).for_each(|(s, x)| *s += x);
    }
    let marginal_discrepancy = summed
        .iter()
        .zip(&marginal)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let joint_with_g: Vec<f64> = blocks.concat();
    let mass = joint_with_g.iter().sum();

    let qn = target_law(&cfg.q, n)?;
    let tv_marginal = tv_slices(&summed, &qn);
    let ug = 1.0 / num_g as f64;
    let ideal: Vec<f64> = (0..num_g).flat_map(|_| qn.iter().map(|x| x * ug)).collect();
    let tv_with_uniform_g = tv_slices(&joint_with_g, &ideal);
    let (mut best, mut tv_best_g) = (0usize, f64::INFINITY);
    for (g, b) in blocks.iter().enumerate() {
        let pg: f64 = b.iter().sum();
        if pg > 0.0 {
            let cond: Vec<f64> = b.iter().map(|x| x / pg).collect();
            let tv = tv_slices(&cond, &qn);
            if tv < tv_best_g {
                (best, tv_best_g) = (g, tv);
            }
        }
    }
    let best_g = [best / (bins[1] * bins[4]), best / bins[4] % bins[1], best % bins[4]];

    Ok(InducedLaw {
        n,
        bins,
        effective_rates,
        binning_seeds,
        outputs: ny,
        joint_with_g,
        marginal,
        marginal_discrepancy,
        mass,
        tv_marginal,
        tv_with_uniform_g,
        best_g,
        tv_best_g,
        sw1_success: sw1,
        sw2_success: sw2,
        nocandidate_mass,
    })
}

/// `q^n` indexed by `y1^n * |Y2|^n + y2^n`.
pub(crate) fn target_law(q: &JointPmf, n: usize) -> Result<Vec<f64>> {
    let names = q.names();
    let sym = Symbols::new(q, &[&names[..1], &names[1..]])?;
    let n2 = sym.group_sizes[1];
    let ny2 = pow(n2, n).ok_or(Error::StateSpaceTooLarge {
        size: u128::MAX,
        cap: usize::MAX as u128,
    })?;
    let ny1 = pow(sym.group_sizes[0], n).ok_or(Error::StateSpaceTooLarge {
        size: u128::MAX,
        cap: usize::MAX as u128,
    })?;
    let mut out = vec![0.0; ny1 * ny2];
    sym.for_each_sequence(n, &mut |p, idx| out[idx[0] * ny2 + idx[1]] += p);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::Alphabet;
    use crate::sources;

    /// `W = Y1 = Y2` uniform bit, `U`, `V` constant.
    pub(crate) fn copy_coupling() -> InnerCoupling {
        let a = |s: &str, k| Alphabet::new(s, k).unwrap();
        let p = JointPmf::from_fn(vec![a("U", 1), a("V", 1), a("W", 2)], |_| 0.5).unwrap();
        let c1 = ConditionalPmf::from_fn(vec![a("V", 1), a("W", 2)], vec![a("Y1", 2)], |g, t| {
            (g[1] == t[0]) as u8 as f64
        })
        .unwrap();
        let c2 = ConditionalPmf::from_fn(vec![a("U", 1), a("W", 2)], vec![a("Y2", 2)], |g, t| {
            (g[1] == t[0]) as u8 as f64
        })
        .unwrap();
        InnerCoupling::new(p, c1, c2).unwrap()
    }

    fn constant_coupling(q: &JointPmf) -> InnerCoupling {
        let a = |s: &str, k| Alphabet::new(s, k).unwrap();
        let m1 = q.marginal(&["Y1"]).unwrap();
        let m2 = q.marginal(&["Y2"]).unwrap();
        let p = JointPmf::from_fn(vec![a("U", 1), a("V", 1), a("W", 1)], |_| 1.0).unwrap();
        let c1 = ConditionalPmf::new(
            vec![a("V", 1), a("W", 1)],
            vec![a("Y1", 2)],
            vec![Some(m1.table().to_vec())],
        )
        .unwrap();
        let c2 = ConditionalPmf::new(
            vec![a("U", 1), a("W", 1)],
            vec![a("Y2", 2)],
            vec![Some(m2.table().to_vec())],
        )
        .unwrap();
        InnerCoupling::new(p, c1, c2).unwrap()
    }

    fn cfg(q: JointPmf, c: InnerCoupling, n: usize, rates: [f64; 4], tilde: [f64; 3], seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            q,
            coupling: c,
            n,
            rates: RateTuple::new(rates[0], rates[1], rates[2], rates[3]).unwrap(),
            tilde: TildeRates {
                rt0: tilde[0],
                rt1: tilde[1],
                rt2: tilde[2],
            },
            seed,
            caps: ProtocolCaps::default(),
        }
    }

    fn check_invariants(law: &InducedLaw) {
        assert!((law.mass - 1.0).abs() < 1e-9, "mass {}", law.mass);
        assert!(law.marginal_discrepancy < 1e-12, "{}", law.marginal_discrepancy);
        assert!(law.tv_best_g <= 2.0 * law.tv_with_uniform_g + 1e-9);
        assert!(law.joint_with_g.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn constant_auxiliaries_reproduce_an_independent_target() {
        let q = sources::independent(&[0.3, 0.7], &[0.6, 0.4]).unwrap();
        for (n, rates) in [(1, [0.0; 4]), (3, [0.5, 1.0, 0.2, 0.0])] {
            let law = run_protocol(&cfg(q.clone(), constant_coupling(&q), n, rates, [0.4, 0.0, 0.7], 11)).unwrap();
            check_invariants(&law);
            assert!(law.tv_marginal < 1e-15, "{}", law.tv_marginal);
            assert!(law.tv_best_g < 1e-15);
        }
    }

    #[test]
    fn silent_relay_leaves_outputs_independent() {
        let q = sources::identical_uniform(2).unwrap();
        let law = run_protocol(&cfg(q, copy_coupling(), 2, [0.0; 4], [0.0; 3], 0)).unwrap();
        check_invariants(&law);
        // Both nodes decode the prior mode 00 and copy it, so each output is
        // the constant 00: TV to the diagonal law is 1 - 1/4.
        assert!((law.tv_marginal - 0.75).abs() < 1e-12, "{}", law.tv_marginal);
    }

    #[test]
    fn injective_forward_bins_give_exact_coordination() {
        let q = sources::identical_uniform(2).unwrap();
        let mut c = cfg(q, copy_coupling(), 2, [2.0, 0.0, 2.0, 0.0], [0.0; 3], 0);
        // Search a seed whose forward binnings are injective on the four
        // sequences; then both nodes recover w^n exactly.
        let seed = (0..200)
            .find(|&s| {
                c.seed = s;
                let law = run_protocol(&c).unwrap();
                law.sw1_success == 1.0 && law.sw2_success == 1.0
            })
            .expect("some seed is injective");
        c.seed = seed;
        let law = run_protocol(&c).unwrap();
        check_invariants(&law);
        assert!(law.tv_marginal < 1e-12);
    }

    /// Independent route for the copy fixture with no shared indices: the
    /// relay sees a uniform `w^n`, each node keeps the lowest sequence in
    /// its forward bin and copies it.
    fn copy_fixture_oracle(law: &InducedLaw, n: usize) -> f64 {
        let space = SequenceSpace { symbols: 2, n };
        let f1 = crate::osrb::make_binning(space, law.bins[3], law.binning_seeds[3]).unwrap();
        let f2 = crate::osrb::make_binning(space, law.bins[6], law.binning_seeds[6]).unwrap();
        let k = 1usize << n;
        let first = |f: &BinningCode, w: usize| (0..k).find(|&x| f.bin(x) == f.bin(w)).unwrap();
        let mut joint = vec![0.0; k * k];
        for w in 0..k {
            joint[first(&f1, w) * k + first(&f2, w)] += 1.0 / k as f64;
        }
        (0..k * k)
            .map(|i| (joint[i] - if i % (k + 1) == 0 { 1.0 / k as f64 } else { 0.0 }).abs())
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn copy_fixture_matches_direct_decoding() {
        let q = sources::identical_uniform(2).unwrap();
        let mut c = cfg(q, copy_coupling(), 2, [1.0, 0.0, 1.0, 0.0], [0.0; 3], 0);
        let mut values = Vec::new();
        for n in [2, 3] {
            c.n = n;
            for seed in 0..20 {
                c.seed = seed;
                let law = run_protocol(&c).unwrap();
                check_invariants(&law);
                assert_eq!(law.num_g(), 1);
                assert!((law.tv_best_g - copy_fixture_oracle(&law, n)).abs() < 1e-12);
                if n == 2 {
                    values.push(law.tv_best_g);
                }
            }
        }
        // Four bins over four sequences are rarely injective, so most seeds
        // leave a collision at n = 2.
        assert_eq!(values[0], 0.5);
        assert_eq!(values[1], 0.75);
    }

    #[test]
    fn revealing_shared_index_breaks_independence() {
        // W = Y1 = Y2 leaves H(W|Y1,Y2) = 0, so any rate on g0 leaks y^n.
        let q = sources::identical_uniform(2).unwrap();
        let c = cfg(q, copy_coupling(), 4, [1.2, 0.0, 1.2, 0.0], [0.25, 0.0, 0.0], 0);
        let tvs: Vec<f64> = crate::osrb::sweep(&c, &[4], &(0..20).collect::<Vec<_>>(), 1)
            .into_iter()
            .map(|cell| cell.outcome.unwrap().tv_with_uniform_g)
            .collect();
        let m = crate::osrb::median(&tvs);
        assert!(m >= 0.1, "{m}");
        assert!((m - 0.625).abs() < 1e-12, "{m}");
    }

    #[test]
    fn deterministic_per_seed() {
        let q = sources::identical_uniform(2).unwrap();
        let c = cfg(q, copy_coupling(), 3, [1.0, 0.3, 1.0, 0.3], [0.3, 0.0, 0.0], 5);
        assert_eq!(run_protocol(&c).unwrap(), run_protocol(&c).unwrap());
    }

    #[test]
    fn target_law_is_the_product() {
        let q = sources::dsbs(0.1).unwrap();
        let qn = target_law(&q, 2).unwrap();
        // y1 = 01, y2 = 00: q(0,0) q(1,0)
        assert!((qn[4] - 0.45 * 0.05).abs() < 1e-15);
        assert!((qn.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn caps_are_enforced() {
        let q = sources::identical_uniform(2).unwrap();
        let mut c = cfg(q, copy_coupling(), 4, [1.0; 4], [0.0; 3], 0);
        c.caps.outputs = 100;
        assert!(matches!(run_protocol(&c), Err(Error::StateSpaceTooLarge { .. })));
        c.caps = ProtocolCaps {
            sequences: 8,
            ..Default::default()
        };
        assert!(matches!(run_protocol(&c), Err(Error::StateSpaceTooLarge { .. })));
        c.caps = ProtocolCaps::default();
        c.rates.rf1 = f64::INFINITY;
        assert!(run_protocol(&c).is_err());
    }
}
