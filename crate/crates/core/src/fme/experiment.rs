use serde::{Deserialize, Serialize};

use super::{binning_projection, inner_system, remove_redundant, systems_equivalent, EquivalenceReport};
use crate::error::Result;
use crate::region::{inner_rhs, InnerCoupling};
use crate::seeding;

/// All orders in which the three auxiliary rates can be eliminated.
pub const ELIMINATION_ORDERS: [[&str; 3]; 6] = [
    ["rt0", "rt1", "rt2"],
    ["rt0", "rt2", "rt1"],
    ["rt1", "rt0", "rt2"],
    ["rt1", "rt2", "rt0"],
    ["rt2", "rt0", "rt1"],
    ["rt2", "rt1", "rt0"],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    pub order: Vec<String>,
    pub projected_rows: usize,
    pub report: EquivalenceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingCheck {
    pub index: usize,
    pub direct_rows: usize,
    /// Upper end of the sampling box on every rate.
    pub box_hi: f64,
    pub orders: Vec<OrderCheck>,
}

impl CouplingCheck {
    pub fn agree(&self) -> bool {
        self.orders.iter().all(|o| o.report.agree)
    }
}

/// Draw `count` random couplings over binary alphabets and compare, for
/// every elimination order, the projected binning system with the direct
/// inner-bound system on `n_samples` points of `[0, 1.25·total + 0.1]^4`.
pub fn verify_random_projections(count: usize, seed: u64, n_samples: usize) -> Result<Vec<CouplingCheck>> {
    (0..count)
        .map(|index| {
            let mut rng = seeding::stream(&[seed, 0xf3e, index as u64]);
            let c = InnerCoupling::random(&mut rng, (2, 2, 2), (2, 2))?;
            let rhs = inner_rhs(&c);
            let direct = remove_redundant(&inner_system(&rhs))?;
            let box_hi = rhs.total * 1.25 + 0.1;
            let orders = ELIMINATION_ORDERS
                .iter()
                .enumerate()
                .map(|(k, order)| {
                    let proj = binning_projection(&c, order)?;
                    let s = seeding::derive_seed(&[seed, index as u64, k as u64]);
                    let report = systems_equivalent(&proj, &direct, &[(0.0, box_hi); 4], n_samples, s)?;
                    Ok(OrderCheck {
                        order: order.iter().map(|v| v.to_string()).collect(),
                        projected_rows: proj.rows().len(),
                        report,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(CouplingCheck {
                index,
                direct_rows: direct.rows().len(),
                box_hi,
                orders,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_few_couplings_agree() {
        let checks = verify_random_projections(3, 1, 200).unwrap();
        assert_eq!(checks.len(), 3);
        for c in &checks {
            assert!(c.agree(), "{c:?}");
            assert_eq!(c.orders.len(), 6);
        }
        assert_eq!(checks, verify_random_projections(3, 1, 200).unwrap());
    }
}
