//! Naive re-enumeration of the relay protocol's output law, compared with
//! `run_protocol` on small random couplings.

use coordinet::osrb::{
    make_binning, run_protocol, BinningCode, InducedLaw, ProtocolCaps, ProtocolConfig, SequenceSpace, TildeRates,
};
use coordinet::region::{InnerCoupling, RateTuple};
use coordinet::seeding::stream;
use coordinet::{Alphabet, ConditionalPmf, JointPmf};
use rand::Rng;

fn digits(mut x: usize, k: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for i in (0..n).rev() {
        d[i] = x % k;
        x /= k;
    }
    d
}

fn undigits(d: impl Iterator<Item = usize>, k: usize) -> usize {
    d.fold(0, |acc, x| acc * k + x)
}

/// Joint law over `(g, y1^n, y2^n)`, laid out like `InducedLaw::joint_with_g`.
fn oracle(c: &InnerCoupling, n: usize, law: &InducedLaw) -> Vec<f64> {
    let (nu, nv, nw) = c.caps();
    let (n1, n2) = (c.chan_y1().row_len(), c.chan_y2().row_len());
    let domains = [nw, nw * nv, nw * nv, nw * nv, nw * nu, nw * nu, nw * nu];
    let codes: Vec<BinningCode> = (0..7)
        .map(|k| {
            make_binning(
                SequenceSpace { symbols: domains[k], n },
                law.bins[k],
                law.binning_seeds[k],
            )
            .unwrap()
        })
        .collect();
    let bin = |k: usize, seq: usize| codes[k].bin(seq) as usize;
    let p_uvw = c.p_uvw();
    let p_wv = |w: usize, v: usize| (0..nu).map(|u| p_uvw.prob(&[u, v, w])).sum::<f64>();
    let p_wu = |w: usize, u: usize| (0..nv).map(|v| p_uvw.prob(&[u, v, w])).sum::<f64>();

    // every (u, v, w)^n tuple with its three pair-sequence indices
    let total = (nu * nv * nw).pow(n as u32);
    let mut seqs = Vec::new();
    for t in 0..total {
        let syms = digits(t, nu * nv * nw, n);
        let (u, v, w): (Vec<usize>, Vec<usize>, Vec<usize>) = (
            syms.iter().map(|s| s / (nv * nw)).collect(),
            syms.iter().map(|s| s / nw % nv).collect(),
            syms.iter().map(|s| s % nw).collect(),
        );
        let p: f64 = (0..n).map(|i| p_uvw.prob(&[u[i], v[i], w[i]])).product();
        if p == 0.0 {
            continue;
        }
        let ws = undigits(w.iter().copied(), nw);
        let wv = undigits((0..n).map(|i| w[i] * nv + v[i]), nw * nv);
        let wu = undigits((0..n).map(|i| w[i] * nu + u[i]), nw * nu);
        seqs.push((p, ws, wv, wu));
    }

    let w_of = |pair: usize, k: usize| -> usize { undigits(digits(pair, nw * k, n).into_iter().map(|s| s / k), nw) };
    // maximum-likelihood decoding over pair sequences; ties go to the lowest index
    let decode = |prior: &dyn Fn(usize, usize) -> f64, k: usize, idx: [usize; 4], which: [usize; 4]| -> usize {
        let (mut best, mut best_p) = (usize::MAX, 0.0);
        for s in 0..(nw * k).pow(n as u32) {
            let ws = w_of(s, k);
            if bin(which[0], ws) != idx[0] || (1..4).any(|j| bin(which[j], s) != idx[j]) {
                continue;
            }
            let pr: f64 = digits(s, nw * k, n).iter().map(|&x| prior(x / k, x % k)).product();
            if pr > best_p {
                (best, best_p) = (s, pr);
            }
        }
        best
    };

    let out1 = |pair: usize| -> Vec<f64> {
        let d = digits(pair, nw * nv, n);
        (0..n1.pow(n as u32))
            .map(|y| {
                let ys = digits(y, n1, n);
                (0..n)
                    .map(|i| c.chan_y1().prob(&[d[i] % nv, d[i] / nv], &[ys[i]]).unwrap())
                    .product()
            })
            .collect()
    };
    let out2 = |pair: usize| -> Vec<f64> {
        let d = digits(pair, nw * nu, n);
        (0..n2.pow(n as u32))
            .map(|y| {
                let ys = digits(y, n2, n);
                (0..n)
                    .map(|i| c.chan_y2().prob(&[d[i] % nu, d[i] / nu], &[ys[i]]).unwrap())
                    .product()
            })
            .collect()
    };

    let [g0, g1, b1, _, g2, b2, _] = law.bins;
    let num_g = g0 * g1 * g2;
    let cells = num_g * b1 * b2;
    let (ny1, ny2) = (n1.pow(n as u32), n2.pow(n as u32));
    let mut joint = vec![0.0; num_g * ny1 * ny2];

    let first = |k: usize, pw: &dyn Fn(usize, usize) -> f64| -> usize {
        let s0 = (0..nw * k).find(|&s| pw(s / k, s % k) > 0.0).unwrap();
        undigits(std::iter::repeat_n(s0, n), nw * k)
    };
    let fb1 = first(nv, &p_wv);
    let fb2 = first(nu, &p_wu);

    for a0 in 0..g0 {
        for a1 in 0..g1 {
            for a2 in 0..g2 {
                let g = (a0 * g1 + a1) * g2 + a2;
                for c1 in 0..b1 {
                    for c2 in 0..b2 {
                        let members: Vec<&(f64, usize, usize, usize)> = seqs
                            .iter()
                            .filter(|s| bin(0, s.1) == a0 && bin(1, s.2) == a1 && bin(4, s.3) == a2)
                            .filter(|s| bin(2, s.2) == c1 && bin(5, s.3) == c2)
                            .collect();
                        let p_cell: f64 = members.iter().map(|s| s.0).sum();
                        let mut emit = |d1: usize, d2: usize, weight: f64| {
                            let (o1, o2) = (out1(d1), out2(d2));
                            for y1 in 0..ny1 {
                                for y2 in 0..ny2 {
                                    joint[(g * ny1 + y1) * ny2 + y2] += weight * o1[y1] * o2[y2];
                                }
                            }
                        };
                        if members.is_empty() {
                            emit(fb1, fb2, 1.0 / cells as f64);
                            continue;
                        }
                        for &&(p, _, wv, wu) in &members {
                            let d1 = decode(&p_wv, nv, [a0, a1, c1, bin(3, wv)], [0, 1, 2, 3]);
                            let d2 = decode(&p_wu, nu, [a0, a2, c2, bin(6, wu)], [0, 4, 5, 6]);
                            emit(d1, d2, p / p_cell / cells as f64);
                        }
                    }
                }
            }
        }
    }
    joint
}

fn check(c: InnerCoupling, n: usize, rates: RateTuple, tilde: TildeRates, seed: u64) -> InducedLaw {
    let cfg = ProtocolConfig {
        q: c.target_marginal(),
        coupling: c.clone(),
        n,
        rates,
        tilde,
        seed,
        caps: ProtocolCaps::default(),
    };
    let law = run_protocol(&cfg).unwrap();
    let want = oracle(&c, n, &law);
    assert_eq!(law.joint_with_g.len(), want.len());
    let err = law
        .joint_with_g
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-12, "max difference {err} for {rates:?} {tilde:?} seed {seed}");
    law
}

#[test]
fn random_couplings_match_the_naive_enumeration() {
    for case in 0..12u64 {
        let mut rng = stream(&[0x0a1e, case]);
        let caps = (
            rng.random_range(1..=2),
            rng.random_range(1..=2),
            rng.random_range(1..=2),
        );
        let c = InnerCoupling::random(&mut rng, caps, (2, 2)).unwrap();
        let mut r = || (rng.random_range(0..=12) as f64) / 10.0;
        let rates = RateTuple::new(r(), r(), r(), r()).unwrap();
        let tilde = TildeRates {
            rt0: r() / 3.0,
            rt1: r() / 3.0,
            rt2: r() / 3.0,
        };
        check(c, 2, rates, tilde, case);
    }
}

#[test]
fn sparse_coupling_with_empty_cells_matches() {
    // W = Y1 = Y2 with a dead V symbol: many cells hold no sequence
    let a = |s: &str, k| Alphabet::new(s, k).unwrap();
    let p = JointPmf::from_fn(
        vec![a("U", 1), a("V", 2), a("W", 2)],
        |i| if i[1] == 1 { 0.5 } else { 0.0 },
    )
    .unwrap();
    let copy = |g: &[usize], t: &[usize]| (g[1] == t[0]) as u8 as f64;
    let c1 = ConditionalPmf::from_fn(vec![a("V", 2), a("W", 2)], vec![a("Y1", 2)], copy).unwrap();
    let c2 = ConditionalPmf::from_fn(vec![a("U", 1), a("W", 2)], vec![a("Y2", 2)], copy).unwrap();
    let c = InnerCoupling::new(p, c1, c2).unwrap();
    let mut empty = 0.0;
    for seed in 0..4 {
        let rates = RateTuple::new(0.5, 1.0, 0.5, 0.5).unwrap();
        empty += check(
            c.clone(),
            2,
            rates,
            TildeRates {
                rt0: 0.5,
                rt1: 0.0,
                rt2: 0.0,
            },
            seed,
        )
        .nocandidate_mass;
    }
    assert!(empty > 0.0);
}
