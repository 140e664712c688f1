use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::vertex::{enumerate_vertices, solve};
use super::{LinearSystem, Row, CLOSURE_TOL};
use crate::error::{Error, Result};
use crate::seeding;

const BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Uniform samples in the box plus points on single facets and on
    /// pairwise facet intersections.
    Sampling,
    /// Every vertex of each system (within the box) is tested against the
    /// other. Exact up to tolerance for the boxed closures.
    Vertex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub agree: bool,
    pub samples_tested: usize,
    /// A point in exactly one of the two closures.
    pub counterexample: Option<Vec<f64>>,
    pub method: Method,
}

/// Compare the closures of `a` and `b` inside the box `bounds` (given in
/// `a`'s variable order). With `n_samples == 0` the vertex method is used.
pub fn systems_equivalent(
    a: &LinearSystem,
    b: &LinearSystem,
    bounds: &[(f64, f64)],
    n_samples: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let mut sa: Vec<&String> = a.variables().iter().collect();
    let mut sb: Vec<&String> = b.variables().iter().collect();
    sa.sort();
    sb.sort();
    if sa != sb {
        return Err(Error::InvalidArgument("systems are over different variables".into()));
    }
    let b = b.reordered(a.variables())?;
    if bounds.len() != a.dim() {
        return Err(Error::ShapeMismatch {
            expected: a.dim(),
            got: bounds.len(),
        });
    }
    if bounds
        .iter()
        .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi)
    {
        return Err(Error::InvalidArgument("box bounds must be finite with lo <= hi".into()));
    }
    let differs = |x: &[f64]| a.contains(x, CLOSURE_TOL) != b.contains(x, CLOSURE_TOL);

    if n_samples == 0 {
        let mut points = enumerate_vertices(a, bounds)?;
        points.extend(enumerate_vertices(&b, bounds)?);
        let counterexample = points.iter().find(|x| differs(x)).cloned();
        return Ok(EquivalenceReport {
            agree: counterexample.is_none(),
            samples_tested: points.len(),
            counterexample,
            method: Method::Vertex,
        });
    }

    let batches = n_samples.div_ceil(BATCH);
    let sampled: Vec<Option<Vec<f64>>> = (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeding::stream(&[seed, 0xe9, k as u64]);
            let n = BATCH.min(n_samples - k * BATCH);
            (0..n)
                .map(|_| {
                    bounds
                        .iter()
                        .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                        .collect()
                })
                .find(|x: &Vec<f64>| differs(x))
        })
        .collect();
    let mut counterexample = sampled.into_iter().flatten().next();
    let facets = facet_points(a.rows().iter().chain(b.rows()).collect(), bounds);
    if counterexample.is_none() {
        counterexample = facets.iter().find(|x| differs(x)).cloned();
    }
    Ok(EquivalenceReport {
        agree: counterexample.is_none(),
        samples_tested: n_samples + facets.len(),
        counterexample,
        method: Method::Sampling,
    })
}

/// Points closest to the box center on each facet hyperplane and on each
/// pairwise intersection, restricted to the box.
fn facet_points(rows: Vec<&Row>, bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let c: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    let rows: Vec<&Row> = rows
        .into_iter()
        .filter(|r| r.coeffs.iter().any(|&v| v != 0.0))
        .collect();
    let inside = |x: &[f64]| x.iter().zip(bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
    let mut out = Vec::new();
    for (i, ri) in rows.iter().enumerate() {
        for rj in rows[i..].iter() {
            let pair: Vec<&Row> = if std::ptr::eq(*ri, *rj) { vec![ri] } else { vec![ri, rj] };
            let k = pair.len();
            let gram: Vec<f64> = pair
                .iter()
                .flat_map(|p| pair.iter().map(|q| dot(&p.coeffs, &q.coeffs)))
                .collect();
            let rhs: Vec<f64> = pair.iter().map(|p| p.rhs - dot(&p.coeffs, &c)).collect();
            let Some(lambda) = solve(gram, rhs) else { continue };
            let x: Vec<f64> = (0..c.len())
                .map(|d| c[d] + (0..k).map(|t| lambda[t] * pair[t].coeffs[d]).sum::<f64>())
                .collect();
            if inside(&x) {
                out.push(x);
            }
        }
    }
    out
}
