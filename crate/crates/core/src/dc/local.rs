use std::sync::Arc;

use crate::crypto::Pedersen;

use super::{
    aggregate_received, combine_broadcasts, commit_slices, CommitmentMatrix, DcError,
    RoundTranscript, SliceMatrix,
};

/// Runs one DC round for all participants inside one process: participant `i`
/// contributes `matrices[i]`. Commitments are computed when a context is given
/// (secured rounds), or taken from `commitments` when supplied, which lets a
/// test hand in a tampered grid. Returns every participant's transcript.
pub fn run_local_round(
    round_id: u32,
    matrices: Vec<SliceMatrix>,
    pedersen: Option<&Pedersen>,
) -> Result<Vec<RoundTranscript>, DcError> {
    let commitments = match pedersen {
        Some(p) => Some(
            matrices
                .iter()
                .map(|m| commit_slices(m, p))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    run_local_round_with(round_id, matrices, commitments)
}

pub fn run_local_round_with(
    round_id: u32,
    matrices: Vec<SliceMatrix>,
    commitments: Option<Vec<CommitmentMatrix>>,
) -> Result<Vec<RoundTranscript>, DcError> {
    let k = matrices.len();
    if k < 2 {
        return Err(DcError::TooFewParticipants);
    }
    let commitments: Option<Vec<Arc<CommitmentMatrix>>> =
        commitments.map(|v| v.into_iter().map(Arc::new).collect());
    let mut transcripts: Vec<RoundTranscript> = matrices
        .iter()
        .enumerate()
        .map(|(i, m)| RoundTranscript::new(round_id, i, m.clone()))
        .collect();
    for (j, t) in transcripts.iter_mut().enumerate() {
        for (i, m) in matrices.iter().enumerate() {
            if i != j {
                t.received.insert(i, m.row(j));
            }
            if let Some(c) = &commitments {
                t.commitments.insert(i, c[i].clone());
            }
        }
    }
    let aggregates = transcripts
        .iter()
        .map(|t| aggregate_received(k, &t.rows_for_aggregate()))
        .collect::<Result<Vec<_>, _>>()?;
    for t in transcripts.iter_mut() {
        t.aggregates = aggregates.iter().cloned().enumerate().collect();
        t.result = Some(combine_broadcasts(k, &t.aggregates)?);
    }
    Ok(transcripts)
}
