use crate::crypto::{Commitment, Pedersen, Scalar};

fn well_formed(values: &[Scalar], blindings: &[Scalar], blocks: usize) -> bool {
    values.len() == blocks && blindings.len() == blocks
}

use super::{ArithmeticMode, DcError, RoundTranscript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckLevel {
    /// A received slice opens the sender's commitment to it.
    Pairwise,
    /// A peer's broadcast aggregate opens the sum of the commitments addressed to it.
    Aggregate,
    /// The combined result opens the sum of every commitment.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Skipped,
    Passed,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    pub level: CheckLevel,
    /// Offending peer, `None` for the global check.
    pub peer: Option<usize>,
    pub block: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyScope {
    pub pairwise: bool,
    pub aggregates: bool,
    pub global: bool,
}

impl VerifyScope {
    pub const ALL: VerifyScope = VerifyScope {
        pairwise: true,
        aggregates: true,
        global: true,
    };
    pub const SHARES: VerifyScope = VerifyScope {
        pairwise: true,
        aggregates: false,
        global: false,
    };
    pub const BROADCAST: VerifyScope = VerifyScope {
        pairwise: false,
        aggregates: true,
        global: true,
    };
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub pairwise: CheckStatus,
    pub aggregate: CheckStatus,
    pub global: CheckStatus,
    pub faults: Vec<Fault>,
    /// Commitments recomputed from openings.
    pub commitments_evaluated: u64,
    /// Group additions spent summing received commitments.
    pub point_additions: u64,
}

impl VerificationReport {
    fn skipped() -> Self {
        VerificationReport {
            pairwise: CheckStatus::Skipped,
            aggregate: CheckStatus::Skipped,
            global: CheckStatus::Skipped,
            faults: Vec::new(),
            commitments_evaluated: 0,
            point_additions: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.faults.is_empty()
    }

    pub fn faulty_peers(&self, level: CheckLevel) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .faults
            .iter()
            .filter(|f| f.level == level)
            .filter_map(|f| f.peer)
            .collect();
        v.dedup();
        v
    }

    fn record(&mut self, level: CheckLevel, faults: Vec<Fault>) {
        let status = if faults.is_empty() {
            CheckStatus::Passed
        } else {
            CheckStatus::Failed
        };
        match level {
            CheckLevel::Pairwise => self.pairwise = status,
            CheckLevel::Aggregate => self.aggregate = status,
            CheckLevel::Global => self.global = status,
        }
        self.faults.extend(faults);
    }
}

/// Runs every check on a complete transcript.
pub fn verify_round(
    t: &RoundTranscript,
    pedersen: &Pedersen,
) -> Result<VerificationReport, DcError> {
    verify_round_scoped(t, pedersen, VerifyScope::ALL)
}

/// Pairwise check of every received slice against its sender's commitment.
pub fn check_shares(
    t: &RoundTranscript,
    pedersen: &Pedersen,
) -> Result<VerificationReport, DcError> {
    verify_round_scoped(t, pedersen, VerifyScope::SHARES)
}

pub fn check_aggregates(
    t: &RoundTranscript,
    pedersen: &Pedersen,
) -> Result<VerificationReport, DcError> {
    verify_round_scoped(
        t,
        pedersen,
        VerifyScope {
            pairwise: false,
            aggregates: true,
            global: false,
        },
    )
}

pub fn check_global(
    t: &RoundTranscript,
    pedersen: &Pedersen,
) -> Result<VerificationReport, DcError> {
    verify_round_scoped(
        t,
        pedersen,
        VerifyScope {
            pairwise: false,
            aggregates: false,
            global: true,
        },
    )
}

/// Runs the selected checks. XOR transcripts carry no commitments and report
/// every level as skipped. The data a selected level needs must be present.
pub fn verify_round_scoped(
    t: &RoundTranscript,
    pedersen: &Pedersen,
    scope: VerifyScope,
) -> Result<VerificationReport, DcError> {
    let mut report = VerificationReport::skipped();
    if t.mode() == ArithmeticMode::Xor {
        return Ok(report);
    }
    let k = t.k;
    let me = t.self_index;
    let blocks = t.blocks();

    if scope.pairwise {
        let gaps: Vec<usize> = (0..k)
            .filter(|j| *j != me && (!t.received.contains_key(j) || !t.commitments.contains_key(j)))
            .collect();
        if !gaps.is_empty() {
            return Err(DcError::IncompleteRound { missing: gaps });
        }
        let mut faults = Vec::new();
        for (j, row) in &t.received {
            let values = row.slice.blocks().ok_or(DcError::ModeMismatch)?;
            let c = &t.commitments[j];
            if !well_formed(values, &row.blindings, blocks) || c.k() != k || c.blocks() != blocks {
                faults.push(Fault {
                    level: CheckLevel::Pairwise,
                    peer: Some(*j),
                    block: 0,
                });
                continue;
            }
            for (b, (v, r)) in values.iter().zip(&row.blindings).enumerate() {
                report.commitments_evaluated += 1;
                if !pedersen.verify(c.get(me, b), v, r) {
                    faults.push(Fault {
                        level: CheckLevel::Pairwise,
                        peer: Some(*j),
                        block: b,
                    });
                }
            }
        }
        report.record(CheckLevel::Pairwise, faults);
    }

    if !(scope.aggregates || scope.global) {
        return Ok(report);
    }
    let gaps: Vec<usize> = (0..k)
        .filter(|j| !t.aggregates.contains_key(j) || !t.commitments.contains_key(j))
        .collect();
    if !gaps.is_empty() {
        return Err(DcError::IncompleteRound { missing: gaps });
    }
    let malformed: Vec<usize> = (0..k)
        .filter(|i| t.commitments[i].k() != k || t.commitments[i].blocks() != blocks)
        .collect();
    if !malformed.is_empty() {
        // Sums are undefined; blame the senders of misshapen matrices.
        let faults = malformed
            .iter()
            .map(|i| Fault {
                level: CheckLevel::Aggregate,
                peer: Some(*i),
                block: 0,
            })
            .collect();
        report.record(CheckLevel::Aggregate, faults);
        return Ok(report);
    }

    // Sum of every participant's commitments addressed to peer j, per block.
    let column =
        |j: usize, b: usize| -> Commitment { (0..k).map(|i| *t.commitments[&i].get(j, b)).sum() };

    let mut columns: Vec<Vec<Commitment>> = Vec::with_capacity(k);
    for j in 0..k {
        columns.push((0..blocks).map(|b| column(j, b)).collect());
    }
    report.point_additions += (k * (k - 1) * blocks) as u64;

    if scope.aggregates {
        let mut faults = Vec::new();
        for j in (0..k).filter(|j| *j != me) {
            let agg = &t.aggregates[&j];
            let values = agg.values.blocks().ok_or(DcError::ModeMismatch)?;
            if !well_formed(values, &agg.blindings, blocks) {
                faults.push(Fault {
                    level: CheckLevel::Aggregate,
                    peer: Some(j),
                    block: 0,
                });
                continue;
            }
            for b in 0..blocks {
                report.commitments_evaluated += 1;
                if !pedersen.verify(&columns[j][b], &values[b], &agg.blindings[b]) {
                    faults.push(Fault {
                        level: CheckLevel::Aggregate,
                        peer: Some(j),
                        block: b,
                    });
                }
            }
        }
        report.record(CheckLevel::Aggregate, faults);
    }

    if scope.global {
        let combined;
        let result = match &t.result {
            Some(r) => r,
            None => {
                combined = super::combine_broadcasts(k, &t.aggregates)?;
                &combined
            }
        };
        let values = result.values.blocks().ok_or(DcError::ModeMismatch)?;
        if !well_formed(values, &result.blindings, blocks) {
            return Err(DcError::ShapeMismatch(blocks, values.len()));
        }
        let mut faults = Vec::new();
        for b in 0..blocks {
            let total: Commitment = columns.iter().map(|c| c[b]).sum();
            report.point_additions += (k - 1) as u64;
            report.commitments_evaluated += 1;
            if !pedersen.verify(&total, &values[b], &result.blindings[b]) {
                faults.push(Fault {
                    level: CheckLevel::Global,
                    peer: None,
                    block: b,
                });
            }
        }
        report.record(CheckLevel::Global, faults);
    }
    Ok(report)
}
