//! Per-transfer group formation: weighted sampling without replacement,
//! probability proportional to the reputation module's selection weights,
//! deterministic for a given seed.

use super::facilitator::{Facilitator, FacilitatorId, GroupError, GroupParams};
use crate::chain::{Amount, LedgerId};
use crate::reputation::{selection_weight, GlobalTrustVector};
use crate::rng::SplitMix64;
use std::collections::BTreeMap;

/// Select exactly `params.n()` distinct facilitators serving both ledgers.
/// Candidates weigh in proportion to trust over fee bid; when no remaining
/// candidate has positive weight the draw falls back to uniform so groups
/// can still form before any evidence exists.
pub fn form_group(
    candidates: &[Facilitator],
    trust: &GlobalTrustVector,
    params: GroupParams,
    source: &LedgerId,
    dest: &LedgerId,
    seed: u64,
) -> Result<Vec<FacilitatorId>, GroupError> {
    let mut eligible: Vec<&Facilitator> =
        candidates.iter().filter(|f| f.serves(source, dest)).collect();
    eligible.sort_by(|a, b| a.id.cmp(&b.id));
    eligible.dedup_by(|a, b| a.id == b.id);
    if eligible.len() < params.n() {
        return Err(GroupError::InsufficientCandidates {
            needed: params.n(),
            available: eligible.len(),
        });
    }
    let bids: BTreeMap<FacilitatorId, Amount> =
        eligible.iter().map(|f| (f.id.clone(), f.fee_bid)).collect();
    let weights = selection_weight(trust, &bids).map_err(|e| match e {
        crate::reputation::ReputationError::ZeroBid(id) => GroupError::InvalidBid(id),
        _ => GroupError::InsufficientCandidates { needed: params.n(), available: 0 },
    })?;
    let mut pool: Vec<(FacilitatorId, f64)> = weights;
    let mut rng = SplitMix64::new(seed);
    let mut selected = Vec::with_capacity(params.n());
    for _ in 0..params.n() {
        let total: f64 = pool.iter().map(|(_, w)| *w).sum();
        let index = if total > 0.0 {
            let target = rng.unit_f64() * total;
            let mut cumulative = 0.0;
            let mut chosen = None;
            let mut last_positive = None;
            for (i, (_, w)) in pool.iter().enumerate() {
                if *w > 0.0 {
                    last_positive = Some(i);
                }
                cumulative += w;
                if cumulative > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Float accumulation can undershoot on the last step; the draw
            // then lands on the last positive-weight candidate.
            chosen.or(last_positive).expect("total > 0 implies a positive weight")
        } else {
            rng.below(pool.len() as u64) as usize
        };
        selected.push(pool.remove(index).0);
    }
    selected.sort();
    Ok(selected)
}
