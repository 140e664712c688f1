//! Exhaustive vertex enumeration for small systems.

use super::{drop_dominated, LinearSystem, Row, CLOSURE_TOL};
use crate::error::{Error, Result};

/// Largest dimension handled by vertex enumeration.
pub const MAX_DIM: usize = 7;
/// Half-width of the box used to bound redundancy subproblems.
pub const BOX: f64 = 1e6;

/// Gaussian elimination with partial pivoting on a `d x d` row-major matrix.
pub(crate) fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let d = b.len();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i * d + col].abs().total_cmp(&a[j * d + col].abs()))?;
        if a[piv * d + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..d {
                a.swap(piv * d + k, col * d + k);
            }
            b.swap(piv, col);
        }
        for r in col + 1..d {
            let f = a[r * d + col] / a[col * d + col];
            if f != 0.0 {
                for k in col..d {
                    a[r * d + k] -= f * a[col * d + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|k| a[r * d + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * d + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn box_rows(d: usize, bounds: &[(f64, f64)]) -> Vec<Row> {
    let mut out = Vec::with_capacity(2 * d);
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        let mut c = vec![0.0; d];
        c[i] = 1.0;
        out.push(Row::le(c.clone(), hi));
        c[i] = -1.0;
        out.push(Row::le(c, -lo));
    }
    out
}

/// Call `visit` with every point where `d` linearly independent hyperplanes
/// of `planes` meet.
fn for_each_intersection(planes: &[Row], d: usize, mut visit: impl FnMut(&[f64])) {
    if d == 0 {
        visit(&[]);
        return;
    }
    if planes.len() < d {
        return;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let a: Vec<f64> = idx.iter().flat_map(|&i| planes[i].coeffs.iter().copied()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].rhs).collect();
        if let Some(x) = solve(a, b) {
            visit(&x);
        }
        if !next_combination(&mut idx, planes.len()) {
            break;
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "vertex enumeration supports at most {MAX_DIM} variables, got {d}"
        )));
    }
    Ok(())
}

fn in_box(x: &[f64], bounds: &[(f64, f64)]) -> bool {
    x.iter()
        .zip(bounds)
        .all(|(v, (lo, hi))| *v >= lo - CLOSURE_TOL && *v <= hi + CLOSURE_TOL)
}

/// Vertices of the closure of `s` intersected with the box `bounds`,
/// deduplicated within `CLOSURE_TOL`.
pub fn enumerate_vertices(s: &LinearSystem, bounds: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    let d = s.dim();
    check_dim(d)?;
    if bounds.len() != d {
        return Err(Error::ShapeMismatch {
            expected: d,
            got: bounds.len(),
        });
    }
    let mut planes = s.rows().to_vec();
    planes.extend(box_rows(d, bounds));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for_each_intersection(&planes, d, |x| {
        if in_box(x, bounds)
            && s.contains(x, CLOSURE_TOL)
            && !out
                .iter()
                .any(|v| v.iter().zip(x).all(|(a, b)| (a - b).abs() <= CLOSURE_TOL))
        {
            out.push(x.to_vec());
        }
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pruned {
    pub system: LinearSystem,
    /// Rows (indices into the tidied and pre-filtered input) whose hyperplane never meets
    /// the search box, so their redundancy could not be decided; they are
    /// kept.
    pub unbounded: Vec<usize>,
}

/// Drop every row whose half-space already contains the region cut out by
/// the other rows. A row is kept when some intersection of `d` other
/// hyperplanes (including the faces of a `±BOX` box) violates it and no
/// other row; rows implied by a single other row are removed up front
/// ([`drop_dominated`]); the reduced system is then checked against the dropped rows
/// at its own vertices, re-adding rows until nothing is lost. Works on
/// closures and at most [`MAX_DIM`] variables.
pub fn prune(s: &LinearSystem) -> Result<Pruned> {
    let t = drop_dominated(&s.tidy());
    let d = t.dim();
    check_dim(d)?;
    let bounds = vec![(-BOX, BOX); d];
    let m = t.rows().len();
    let mut planes = t.rows().to_vec();
    planes.extend(box_rows(d, &bounds));
    let mut keep = vec![false; m];
    for_each_intersection(&planes, d, |x| {
        if !in_box(x, &bounds) {
            return;
        }
        let mut violated = t
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.slack(x) < -CLOSURE_TOL)
            .map(|(i, _)| i);
        if let (Some(i), None) = (violated.next(), violated.next()) {
            keep[i] = true;
        }
    });
    let mut unbounded = Vec::new();
    for (i, r) in t.rows().iter().enumerate() {
        let reach: f64 = r.coeffs.iter().map(|c| c.abs()).sum::<f64>() * BOX;
        if !keep[i] && r.rhs.abs() > reach {
            keep[i] = true;
            unbounded.push(i);
        }
    }
    loop {
        let reduced = subset(&t, &keep);
        let verts = enumerate_vertices(&reduced, &bounds)?;
        let worst = (0..m)
            .filter(|&i| !keep[i])
            .map(|i| {
                (
                    i,
                    verts.iter().map(|v| t.rows()[i].slack(v)).fold(f64::INFINITY, f64::min),
                )
            })
            .filter(|&(_, s)| s < -CLOSURE_TOL)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            Some((i, _)) => keep[i] = true,
            None => {
                return Ok(Pruned {
                    system: reduced,
                    unbounded,
                })
            }
        }
    }
}

fn subset(t: &LinearSystem, keep: &[bool]) -> LinearSystem {
    let rows = t
        .rows()
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    LinearSystem::new(t.variables().to_vec(), rows).expect("rows of a valid system")
}

/// [`prune`] without the diagnostics.
pub fn remove_redundant(s: &LinearSystem) -> Result<LinearSystem> {
    prune(s).map(|p| p.system)
}
