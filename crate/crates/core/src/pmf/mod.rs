//! Exact finite joint and conditional probability mass functions.
//!
//! A [`JointPmf`] is a dense table over the product of named finite
//! alphabets. Indices are row-major in construction order: the first
//! variable is the most significant digit, so iterating the flat table walks
//! index tuples in lexicographic order. Every multi-variable operation names
//! variables by string; positions are never passed across module borders.

mod io;

pub use io::{read_pmf, write_pmf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries below this are rejected as negative mass; entries in
/// `[-NEGATIVE_TOL, 0)` are clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Largest accepted deviation of the table sum from one before rescaling.
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// Default cap on the number of table entries produced by [`JointPmf::iid_extend`].
pub const DEFAULT_TABLE_CAP: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    name: String,
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, size: usize) -> Result<Self> {
        let name = name.into();
        if size == 0 {
            return Err(Error::InvalidArgument(format!(
                "alphabet `{name}` must have at least one symbol"
            )));
        }
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',' || c == ':') {
            return Err(Error::InvalidArgument(format!(
                "alphabet name `{name}` must be non-empty without whitespace, `,` or `:`"
            )));
        }
        Ok(Self {
            name,
            size,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.size {
            return Err(Error::InvalidArgument(format!(
                "alphabet `{}` has {} symbols but {} labels",
                self.name,
                self.size,
                labels.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Same alphabet under a different name; labels are kept.
    pub fn renamed(&self, name: impl Into<String>) -> Result<Self> {
        let mut a = Alphabet::new(name, self.size)?;
        a.labels = self.labels.clone();
        Ok(a)
    }

    fn same_shape(&self, other: &Alphabet) -> bool {
        self.name == other.name && self.size == other.size
    }
}

/// Product of alphabet sizes, or `None` on overflow.
pub fn product_size(alphabets: &[Alphabet]) -> Option<usize> {
    alphabets.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.size))
}

fn check_unique(alphabets: &[Alphabet]) -> Result<()> {
    for (i, a) in alphabets.iter().enumerate() {
        if alphabets[..i].iter().any(|b| b.name == a.name) {
            return Err(Error::DuplicateVariable(a.name.clone()));
        }
    }
    Ok(())
}

/// Row-major strides for a list of alphabets.
pub(crate) fn strides(alphabets: &[Alphabet]) -> Vec<usize> {
    let mut s = vec![1; alphabets.len()];
    for i in (0..alphabets.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * alphabets[i + 1].size;
    }
    s
}

/// Advance a mixed-radix counter; returns false after the last tuple.
pub(crate) fn advance(idx: &mut [usize], sizes: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < sizes[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    alphabets: Vec<Alphabet>,
    table: Vec<f64>,
}

/// Validate and normalize a table. See [`JointPmf::new`].
pub fn make_joint(alphabets: Vec<Alphabet>, table: Vec<f64>) -> Result<JointPmf> {
    JointPmf::new(alphabets, table)
}

impl JointPmf {
    /// Validated construction. Entries in `[-1e-12, 0)` are clamped to zero
    /// and the table is rescaled to sum exactly to one when its sum is within
    /// `1e-6` of one.
    pub fn new(alphabets: Vec<Alphabet>, mut table: Vec<f64>) -> Result<Self> {
        check_unique(&alphabets)?;
        let expected = product_size(&alphabets).ok_or(Error::StateSpaceTooLarge {
            size: u128::MAX,
            cap: usize::MAX as u128,
        })?;
        if table.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: table.len(),
            });
        }
        for (index, v) in table.iter_mut().enumerate() {
            if !v.is_finite() || *v < -NEGATIVE_TOL {
                return Err(Error::NegativeMass { index, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        for v in &mut table {
            *v /= sum;
        }
        Ok(Self { alphabets, table })
    }

    /// Construction from an already-normalized table produced internally.
    pub(crate) fn from_parts(alphabets: Vec<Alphabet>, table: Vec<f64>) -> Self {
        debug_assert_eq!(product_size(&alphabets), Some(table.len()));
        Self { alphabets, table }
    }

    /// Build a table by evaluating `f` on every index tuple, then validate.
    pub fn from_fn(alphabets: Vec<Alphabet>, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let sizes: Vec<usize> = alphabets.iter().map(|a| a.size).collect();
        let len = product_size(&alphabets).ok_or(Error::StateSpaceTooLarge {
            size: u128::MAX,
            cap: usize::MAX as u128,
        })?;
        let mut table = Vec::with_capacity(len);
        let mut idx = vec![0; sizes.len()];
        loop {
            table.push(f(&idx));
            if !advance(&mut idx, &sizes) {
                break;
            }
        }
        Self::new(alphabets, table)
    }

    pub fn uniform(alphabets: Vec<Alphabet>) -> Result<Self> {
        let len = product_size(&alphabets).unwrap_or(0).max(1);
        Self::new(alphabets, vec![1.0 / len as f64; len])
    }

    pub fn point_mass(alphabets: Vec<Alphabet>, at: &[usize]) -> Result<Self> {
        let at = at.to_vec();
        Self::from_fn(alphabets, move |idx| if idx == at.as_slice() { 1.0 } else { 0.0 })
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.alphabets.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.alphabets.iter().map(|a| a.size).collect()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.alphabets
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let p = self.position(n)?;
            if out.contains(&p) {
                return Err(Error::DuplicateVariable(n.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    pub fn alphabet(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.alphabets[self.position(name)?])
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let st = strides(&self.alphabets);
        idx.iter().zip(st).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.alphabets.len()];
        for (i, a) in self.alphabets.iter().enumerate().rev() {
            idx[i] = flat % a.size;
            flat /= a.size;
        }
        idx
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        self.table[self.flat_index(idx)]
    }

    /// For every flat index, the flat index of its projection onto `positions`
    /// (in the given order).
    pub(crate) fn projection_map(&self, positions: &[usize]) -> Vec<usize> {
        let sizes = self.sizes();
        let mut sub_strides = vec![1usize; positions.len()];
        for i in (0..positions.len().saturating_sub(1)).rev() {
            sub_strides[i] = sub_strides[i + 1] * sizes[positions[i + 1]];
        }
        let mut weight = vec![0usize; sizes.len()];
        for (k, &p) in positions.iter().enumerate() {
            weight[p] = sub_strides[k];
        }
        let mut out = Vec::with_capacity(self.table.len());
        let mut idx = vec![0; sizes.len()];
        let mut cur = 0usize;
        loop {
            out.push(cur);
            // odometer with incremental projected index
            let mut i = sizes.len();
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                idx[i] += 1;
                cur += weight[i];
                if idx[i] < sizes[i] {
                    break;
                }
                cur -= weight[i] * sizes[i];
                idx[i] = 0;
            }
        }
    }

    /// Sum out every variable not in `keep`. Kept variables stay in their
    /// original order.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointPmf> {
        let mut pos = self.positions(keep)?;
        pos.sort_unstable();
        self.marginal_positions(&pos)
    }

    /// Marginal with the kept variables in the order given.
    pub fn marginal_ordered(&self, keep: &[&str]) -> Result<JointPmf> {
        let pos = self.positions(keep)?;
        self.marginal_positions(&pos)
    }

    pub(crate) fn marginal_positions(&self, pos: &[usize]) -> Result<JointPmf> {
        if pos.len() == self.alphabets.len() && pos.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let alphabets: Vec<Alphabet> = pos.iter().map(|&p| self.alphabets[p].clone()).collect();
        let len = product_size(&alphabets).unwrap_or(1);
        let mut table = vec![0.0; len];
        let map = self.projection_map(pos);
        for (v, &m) in self.table.iter().zip(&map) {
            table[m] += *v;
        }
        Ok(JointPmf::from_parts(alphabets, table))
    }

    /// Conditional law of the remaining variables given `given`.
    ///
    /// Rows whose conditioning event has zero mass are flagged undefined.
    pub fn condition(&self, given: &[&str]) -> Result<ConditionalPmf> {
        let gpos = self.positions(given)?;
        let tpos: Vec<usize> = (0..self.alphabets.len()).filter(|p| !gpos.contains(p)).collect();
        let given_a: Vec<Alphabet> = gpos.iter().map(|&p| self.alphabets[p].clone()).collect();
        let target_a: Vec<Alphabet> = tpos.iter().map(|&p| self.alphabets[p].clone()).collect();
        let ng = product_size(&given_a).unwrap_or(1);
        let nt = product_size(&target_a).unwrap_or(1);
        let gmap = self.projection_map(&gpos);
        let tmap = self.projection_map(&tpos);
        let mut table = vec![0.0; ng * nt];
        let mut mass = vec![0.0; ng];
        for (i, v) in self.table.iter().enumerate() {
            table[gmap[i] * nt + tmap[i]] += *v;
            mass[gmap[i]] += *v;
        }
        let mut defined = vec![false; ng];
        for g in 0..ng {
            if mass[g] > 0.0 {
                defined[g] = true;
                for t in 0..nt {
                    table[g * nt + t] /= mass[g];
                }
            }
        }
        Ok(ConditionalPmf {
            given: given_a,
            target: target_a,
            table,
            defined,
        })
    }

    /// Law of `n` i.i.d. copies. Variable `X` at time `t` (1-based) is named
    /// `X_t`; variables are ordered time-major.
    pub fn iid_extend(&self, n: usize) -> Result<JointPmf> {
        self.iid_extend_capped(n, DEFAULT_TABLE_CAP)
    }

    pub fn iid_extend_capped(&self, n: usize, cap: usize) -> Result<JointPmf> {
        if n == 0 {
            return Err(Error::InvalidArgument("block length must be at least 1".into()));
        }
        let size = (self.table.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::StateSpaceTooLarge { size, cap: cap as u128 });
        }
        let mut alphabets = Vec::with_capacity(n * self.alphabets.len());
        for t in 1..=n {
            for a in &self.alphabets {
                alphabets.push(a.renamed(format!("{}_{}", a.name, t))?);
            }
        }
        let mut table = vec![1.0];
        for _ in 0..n {
            let mut next = Vec::with_capacity(table.len() * self.table.len());
            for &a in &table {
                for &b in &self.table {
                    next.push(a * b);
                }
            }
            table = next;
        }
        Ok(JointPmf::from_parts(alphabets, table))
    }

    /// Independent product; variable names must be disjoint.
    pub fn product(&self, other: &JointPmf) -> Result<JointPmf> {
        let mut alphabets = self.alphabets.clone();
        alphabets.extend(other.alphabets.iter().cloned());
        check_unique(&alphabets)?;
        let mut table = Vec::with_capacity(self.table.len() * other.table.len());
        for &a in &self.table {
            for &b in &other.table {
                table.push(a * b);
            }
        }
        Ok(JointPmf::from_parts(alphabets, table))
    }

    /// `p(x) · W(y | x_given)`: append the channel's target variables.
    pub fn compose(&self, channel: &ConditionalPmf) -> Result<JointPmf> {
        let mut gpos = Vec::with_capacity(channel.given.len());
        for a in &channel.given {
            let p = self.position(&a.name)?;
            if self.alphabets[p].size != a.size {
                return Err(Error::AlphabetMismatch(format!(
                    "`{}` has size {} in the pmf but {} in the channel",
                    a.name, self.alphabets[p].size, a.size
                )));
            }
            gpos.push(p);
        }
        let mut alphabets = self.alphabets.clone();
        alphabets.extend(channel.target.iter().cloned());
        check_unique(&alphabets)?;
        let nt = channel.row_len();
        let gmap = self.projection_map(&gpos);
        let mut table = Vec::with_capacity(self.table.len() * nt);
        for (i, &v) in self.table.iter().enumerate() {
            match channel.row(gmap[i]) {
                Some(row) => table.extend(row.iter().map(|w| v * w)),
                None if v == 0.0 => table.extend(std::iter::repeat_n(0.0, nt)),
                None => return Err(Error::UndefinedConditional { row: gmap[i] }),
            }
        }
        Ok(JointPmf::from_parts(alphabets, table))
    }

    /// Rename variables in order.
    pub fn with_names(&self, names: &[&str]) -> Result<JointPmf> {
        if names.len() != self.alphabets.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} names, got {}",
                self.alphabets.len(),
                names.len()
            )));
        }
        let alphabets = self
            .alphabets
            .iter()
            .zip(names)
            .map(|(a, n)| a.renamed(*n))
            .collect::<Result<Vec<_>>>()?;
        check_unique(&alphabets)?;
        Ok(JointPmf::from_parts(alphabets, self.table.clone()))
    }

    /// `base`, with underscores appended until it names no variable of `self`.
    pub(crate) fn fresh_name(&self, base: &str) -> String {
        let mut name = base.to_string();
        while self.position(&name).is_ok() {
            name.push('_');
        }
        name
    }

    /// Flat indices with positive mass, in canonical order.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.table.iter().copied().enumerate().filter(|(_, p)| *p > 0.0)
    }

    /// Inverse-CDF draw over the canonical index order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.table.iter().enumerate() {
            if p > 0.0 {
                cum += p;
                last_positive = i;
                if cum > u {
                    return i;
                }
            }
        }
        last_positive
    }
}

/// Half the L1 distance between two pmfs on identical alphabets.
pub fn total_variation(p: &JointPmf, q: &JointPmf) -> Result<f64> {
    if p.alphabets.len() != q.alphabets.len() || !p.alphabets.iter().zip(&q.alphabets).all(|(a, b)| a.same_shape(b)) {
        return Err(Error::AlphabetMismatch(format!("{:?} vs {:?}", p.names(), q.names())));
    }
    Ok(tv_slices(&p.table, &q.table))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// A family of pmfs over `target`, one row per index tuple of `given`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPmf {
    given: Vec<Alphabet>,
    target: Vec<Alphabet>,
    table: Vec<f64>,
    defined: Vec<bool>,
}

/// Tolerance on conditional row sums.
pub const ROW_TOL: f64 = 1e-9;

impl ConditionalPmf {
    /// Rows are given in canonical order of `given`; `None` marks an
    /// undefined row.
    pub fn new(given: Vec<Alphabet>, target: Vec<Alphabet>, rows: Vec<Option<Vec<f64>>>) -> Result<Self> {
        let mut all = given.clone();
        all.extend(target.iter().cloned());
        check_unique(&all)?;
        let ng = product_size(&given).unwrap_or(1);
        let nt = product_size(&target).unwrap_or(1);
        if rows.len() != ng {
            return Err(Error::ShapeMismatch {
                expected: ng,
                got: rows.len(),
            });
        }
        let mut table = vec![0.0; ng * nt];
        let mut defined = vec![false; ng];
        for (g, row) in rows.into_iter().enumerate() {
            let Some(row) = row else { continue };
            if row.len() != nt {
                return Err(Error::ShapeMismatch {
                    expected: nt,
                    got: row.len(),
                });
            }
            let mut sum = 0.0;
            for (t, v) in row.iter().enumerate() {
                if !v.is_finite() || *v < -NEGATIVE_TOL {
                    return Err(Error::NegativeMass {
                        index: g * nt + t,
                        value: *v,
                    });
                }
                sum += v.max(0.0);
            }
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::NotNormalized { sum });
            }
            for (t, v) in row.iter().enumerate() {
                table[g * nt + t] = v.max(0.0) / sum;
            }
            defined[g] = true;
        }
        Ok(Self {
            given,
            target,
            table,
            defined,
        })
    }

    /// Evaluate `f(given_idx, target_idx)` on every pair; each row must sum to one.
    pub fn from_fn(given: Vec<Alphabet>, target: Vec<Alphabet>, f: impl Fn(&[usize], &[usize]) -> f64) -> Result<Self> {
        let gs: Vec<usize> = given.iter().map(|a| a.size).collect();
        let ts: Vec<usize> = target.iter().map(|a| a.size).collect();
        let mut rows = Vec::new();
        let mut gi = vec![0; gs.len()];
        loop {
            let mut row = Vec::new();
            let mut ti = vec![0; ts.len()];
            loop {
                row.push(f(&gi, &ti));
                if !advance(&mut ti, &ts) {
                    break;
                }
            }
            rows.push(Some(row));
            if !advance(&mut gi, &gs) {
                break;
            }
        }
        Self::new(given, target, rows)
    }

    /// A deterministic channel: `map` returns the target index tuple.
    pub fn deterministic(
        given: Vec<Alphabet>,
        target: Vec<Alphabet>,
        map: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<Self> {
        Self::from_fn(given, target, |g, t| if map(g) == t { 1.0 } else { 0.0 })
    }

    pub fn given(&self) -> &[Alphabet] {
        &self.given
    }

    pub fn target(&self) -> &[Alphabet] {
        &self.target
    }

    pub fn num_rows(&self) -> usize {
        self.defined.len()
    }

    pub fn row_len(&self) -> usize {
        self.table.len() / self.defined.len().max(1)
    }

    pub fn is_defined(&self, row: usize) -> bool {
        self.defined[row]
    }

    pub fn row(&self, row: usize) -> Option<&[f64]> {
        let nt = self.row_len();
        self.defined[row].then(|| &self.table[row * nt..(row + 1) * nt])
    }

    /// Flat row index of a given-tuple.
    pub fn row_index(&self, given_idx: &[usize]) -> usize {
        let st = strides(&self.given);
        given_idx.iter().zip(st).map(|(i, s)| i * s).sum()
    }

    pub fn prob(&self, given_idx: &[usize], target_idx: &[usize]) -> Option<f64> {
        let st = strides(&self.target);
        let t: usize = target_idx.iter().zip(st).map(|(i, s)| i * s).sum();
        self.row(self.row_index(given_idx)).map(|r| r[t])
    }

    /// Row `row` as a standalone pmf over the target alphabets.
    pub fn row_pmf(&self, row: usize) -> Option<JointPmf> {
        self.row(row)
            .map(|r| JointPmf::from_parts(self.target.clone(), r.to_vec()))
    }
}
