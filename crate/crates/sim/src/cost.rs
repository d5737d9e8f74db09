//! Virtual compute time for group operations.

use dcnet_core::node::OpCounts;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub scalar_mul_ns: u64,
    pub point_add_ns: u64,
    /// Threads sharing the work of one participant.
    pub threads: u32,
}

impl Default for CostModel {
    /// secp256k1 timings of a desktop-class CPU, four threads per participant.
    fn default() -> Self {
        CostModel {
            scalar_mul_ns: 669_800,
            point_add_ns: 10_900,
            threads: 4,
        }
    }
}

impl CostModel {
    /// No compute time at all.
    pub const FREE: CostModel = CostModel {
        scalar_mul_ns: 0,
        point_add_ns: 0,
        threads: 1,
    };

    /// Two scalar multiplications and one addition.
    pub fn commitment_ns(&self) -> u64 {
        2 * self.scalar_mul_ns + self.point_add_ns
    }

    pub fn charge(&self, ops: &OpCounts) -> u64 {
        let commitments =
            ops.commitments_generated + ops.commitments_precomputed + ops.commitments_verified;
        let serial = commitments as u128 * self.commitment_ns() as u128
            + ops.point_additions as u128 * self.point_add_ns as u128;
        (serial / u128::from(self.threads.max(1))) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commitment_cost() {
        assert_eq!(CostModel::default().commitment_ns(), 1_350_500);
    }

    #[test]
    fn charge_splits_over_threads() {
        let ops = OpCounts {
            commitments_generated: 3,
            commitments_verified: 1,
            point_additions: 4,
            ..Default::default()
        };
        let c = CostModel {
            threads: 1,
            ..Default::default()
        };
        assert_eq!(c.charge(&ops), 4 * 1_350_500 + 4 * 10_900);
        assert_eq!(
            CostModel::default().charge(&ops),
            (4 * 1_350_500 + 4 * 10_900) / 4
        );
        assert_eq!(CostModel::FREE.charge(&ops), 0);
    }
}
