//! Facilitator reputation: pairwise local trust extracted from outcome
//! records, global trust as the fixed point of a damped power iteration
//! anchored on pre-trusted peers, and fee-aware selection weights.
//!
//! The update rule is `t ← (1 − a)·Cᵀ·t + a·p` where `C` is the row-stochastic
//! local trust matrix, `p` the pre-trust distribution and `a` the damping
//! weight. Damping bounds the trust a colluding clique can accumulate:
//! a fraction `a` of every iterate is pinned to the pre-trusted anchor set.

use crate::interchain::FacilitatorId;
use crate::meta::{MetaLedger, OutcomeRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

pub const DEFAULT_DAMPING: f64 = 0.15;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_NEWCOMER_PRIOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReputationError {
    #[error("pretrusted set must be non-empty")]
    EmptyPretrusted,
    #[error("damping must lie in [0, 1], got {0}")]
    BadDamping(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("max_iters must be positive")]
    BadMaxIters,
    #[error("newcomer prior must lie in [0, 1), got {0}")]
    BadNewcomerPrior(f64),
    #[error("facilitator set must be non-empty")]
    NoFacilitators,
    #[error("fee bid for {0} must be positive")]
    ZeroBid(FacilitatorId),
    #[error("{0} is already present in the trust vector")]
    DuplicateFacilitator(FacilitatorId),
    #[error("trust vector must have non-negative entries with a positive sum")]
    DegenerateVector,
}

/// Parameters of the trust computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationParams {
    pub damping: f64,
    pub pretrusted: BTreeSet<FacilitatorId>,
    pub newcomer_prior: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl ReputationParams {
    pub fn new(pretrusted: BTreeSet<FacilitatorId>) -> Result<Self, ReputationError> {
        let params = Self {
            damping: DEFAULT_DAMPING,
            pretrusted,
            newcomer_prior: DEFAULT_NEWCOMER_PRIOR,
            tolerance: DEFAULT_TOLERANCE,
            max_iters: DEFAULT_MAX_ITERS,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ReputationError> {
        if self.pretrusted.is_empty() {
            return Err(ReputationError::EmptyPretrusted);
        }
        if !(0.0..=1.0).contains(&self.damping) || self.damping.is_nan() {
            return Err(ReputationError::BadDamping(self.damping));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(ReputationError::BadTolerance(self.tolerance));
        }
        if self.max_iters == 0 {
            return Err(ReputationError::BadMaxIters);
        }
        if !(0.0..1.0).contains(&self.newcomer_prior) {
            return Err(ReputationError::BadNewcomerPrior(self.newcomer_prior));
        }
        Ok(())
    }

    /// The pre-trust distribution over `ids`: uniform over the pre-trusted
    /// members present, or uniform over everyone when none of them is.
    pub fn pretrust_vector(&self, ids: &[FacilitatorId]) -> Vec<f64> {
        let hits: Vec<usize> = ids
            .iter()
            .enumerate()
            .filter(|(_, id)| self.pretrusted.contains(*id))
            .map(|(i, _)| i)
            .collect();
        let mut p = vec![0.0; ids.len()];
        if hits.is_empty() {
            let w = 1.0 / ids.len() as f64;
            p.iter_mut().for_each(|x| *x = w);
        } else {
            let w = 1.0 / hits.len() as f64;
            for i in hits {
                p[i] = w;
            }
        }
        p
    }
}

/// Row-stochastic pairwise trust. Row i holds i's normalized opinion of
/// every peer; rows with no positive evidence fall back to the pre-trust
/// distribution, and the diagonal is zeroed before normalization so nobody
/// scores themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTrustMatrix {
    ids: Vec<FacilitatorId>,
    rows: Vec<Vec<f64>>,
}

impl LocalTrustMatrix {
    /// Normalize raw evidence scores into the stochastic matrix. Exposed so
    /// callers (and tests) can feed scores from any evidence source.
    pub fn from_raw_scores(
        mut ids: Vec<FacilitatorId>,
        scores: &BTreeMap<(FacilitatorId, FacilitatorId), i64>,
        params: &ReputationParams,
    ) -> Result<Self, ReputationError> {
        if ids.is_empty() {
            return Err(ReputationError::NoFacilitators);
        }
        ids.sort();
        ids.dedup();
        let n = ids.len();
        let p = params.pretrust_vector(&ids);
        let index: BTreeMap<&FacilitatorId, usize> =
            ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let mut rows = vec![vec![0.0; n]; n];
        for ((from, to), score) in scores {
            let (Some(&i), Some(&j)) = (index.get(from), index.get(to)) else {
                continue;
            };
            if i == j {
                continue; // no self-trust, whatever the evidence claims
            }
            rows[i][j] = (*score).max(0) as f64;
        }
        for row in rows.iter_mut() {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|x| *x /= sum);
            } else {
                row.copy_from_slice(&p);
            }
        }
        Ok(Self { ids, rows })
    }

    pub fn ids(&self) -> &[FacilitatorId] {
        &self.ids
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Raw evidence scores between co-members of recorded transfers: +1 when the
/// observed peer attested consistently with the final outcome, −1 when it
/// attested against it or stayed absent.
pub fn raw_scores<'a>(
    records: impl IntoIterator<Item = &'a OutcomeRecord>,
    ids: &BTreeSet<FacilitatorId>,
) -> BTreeMap<(FacilitatorId, FacilitatorId), i64> {
    let mut scores = BTreeMap::new();
    for record in records {
        let members: Vec<_> = record
            .verdicts
            .iter()
            .filter(|(id, _)| ids.contains(id))
            .collect();
        for (observer, _) in &members {
            for (observed, attestation) in &members {
                if observer == observed {
                    continue;
                }
                let delta = if attestation.consistent_with(record.outcome) { 1 } else { -1 };
                *scores.entry(((*observer).clone(), (*observed).clone())).or_insert(0) += delta;
            }
        }
    }
    scores
}

/// Extract the local trust matrix from the meta-ledger's records.
pub fn local_trust(
    meta: &MetaLedger,
    facilitators: &[FacilitatorId],
    params: &ReputationParams,
) -> Result<LocalTrustMatrix, ReputationError> {
    let id_set: BTreeSet<FacilitatorId> = facilitators.iter().cloned().collect();
    let scores = raw_scores(meta.records(), &id_set);
    LocalTrustMatrix::from_raw_scores(facilitators.to_vec(), &scores, params)
}

/// Network-wide trust. Entries are non-negative and sum to 1 (within the
/// computation's tolerance); `converged` is false when `max_iters` ran out,
/// in which case the last iterate is still returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalTrustVector {
    ids: Vec<FacilitatorId>,
    scores: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl GlobalTrustVector {
    /// Build a vector directly from scores (normalizing them to sum 1).
    pub fn new(ids: Vec<FacilitatorId>, scores: Vec<f64>) -> Result<Self, ReputationError> {
        if ids.len() != scores.len() || ids.is_empty() {
            return Err(ReputationError::DegenerateVector);
        }
        let mut pairs: Vec<(FacilitatorId, f64)> = ids.into_iter().zip(scores).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let sum: f64 = pairs.iter().map(|(_, s)| *s).sum();
        if pairs.iter().any(|(_, s)| *s < 0.0 || s.is_nan()) || sum.is_nan() || sum <= 0.0 {
            return Err(ReputationError::DegenerateVector);
        }
        let (ids, mut scores): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        scores.iter_mut().for_each(|s| *s /= sum);
        Ok(Self { ids, scores, converged: true, iterations: 0 })
    }

    /// Uniform trust over `ids`; the natural starting point of a scenario.
    pub fn uniform(mut ids: Vec<FacilitatorId>) -> Result<Self, ReputationError> {
        ids.sort();
        ids.dedup();
        let n = ids.len();
        if n == 0 {
            return Err(ReputationError::DegenerateVector);
        }
        let scores = vec![1.0 / n as f64; n];
        Ok(Self { ids, scores, converged: true, iterations: 0 })
    }

    pub fn ids(&self) -> &[FacilitatorId] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score_of(&self, id: &FacilitatorId) -> f64 {
        self.ids
            .binary_search(id)
            .map(|i| self.scores[i])
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FacilitatorId, f64)> {
        self.ids.iter().zip(self.scores.iter().copied())
    }
}

/// Damped power iteration from the pre-trust vector until the max-norm step
/// falls below tolerance or `max_iters` is exhausted.
pub fn global_trust(
    matrix: &LocalTrustMatrix,
    params: &ReputationParams,
) -> Result<GlobalTrustVector, ReputationError> {
    params.validate()?;
    let ids = matrix.ids.clone();
    let n = ids.len();
    let p = params.pretrust_vector(&ids);
    let a = params.damping;
    if a == 1.0 {
        // The update rule pins the iterate to p; no arithmetic needed.
        return Ok(GlobalTrustVector { ids, scores: p, converged: true, iterations: 0 });
    }
    let mut t = p.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iters {
        iterations += 1;
        let mut next = vec![0.0; n];
        for (i, row) in matrix.rows.iter().enumerate() {
            let ti = t[i];
            if ti == 0.0 {
                continue;
            }
            for (j, c) in row.iter().enumerate() {
                next[j] += c * ti;
            }
        }
        let mut delta: f64 = 0.0;
        for j in 0..n {
            next[j] = (1.0 - a) * next[j] + a * p[j];
            delta = delta.max((next[j] - t[j]).abs());
        }
        t = next;
        if delta < params.tolerance {
            converged = true;
            break;
        }
    }
    let sum: f64 = t.iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(ReputationError::DegenerateVector);
    }
    t.iter_mut().for_each(|x| *x /= sum);
    Ok(GlobalTrustVector { ids, scores: t, converged, iterations })
}

/// Selection weight per facilitator: trust divided by fee bid, renormalized
/// over the given bidders. Lower bids attract more selection, higher trust
/// likewise; zero-trust facilitators weigh nothing while any positive weight
/// exists. An all-zero outcome falls back to uniform so a group can still
/// form before any evidence accrues.
pub fn selection_weight(
    trust: &GlobalTrustVector,
    fee_bids: &BTreeMap<FacilitatorId, crate::chain::Amount>,
) -> Result<Vec<(FacilitatorId, f64)>, ReputationError> {
    if fee_bids.is_empty() {
        return Err(ReputationError::NoFacilitators);
    }
    let mut weights = Vec::with_capacity(fee_bids.len());
    for (id, bid) in fee_bids {
        if bid.is_zero() {
            return Err(ReputationError::ZeroBid(id.clone()));
        }
        weights.push((id.clone(), trust.score_of(id) / bid.value() as f64));
    }
    let total: f64 = weights.iter().map(|(_, w)| *w).sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|(_, w)| *w /= total);
    } else {
        let uniform = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|(_, w)| *w = uniform);
    }
    Ok(weights)
}

/// Insert a newcomer strictly below every incumbent with positive trust:
/// its score is `newcomer_prior` times the smallest positive entry, and the
/// vector is renormalized.
pub fn admit_newcomer(
    trust: &GlobalTrustVector,
    new_id: FacilitatorId,
    params: &ReputationParams,
) -> Result<GlobalTrustVector, ReputationError> {
    params.validate()?;
    if trust.ids.binary_search(&new_id).is_ok() {
        return Err(ReputationError::DuplicateFacilitator(new_id));
    }
    let min_positive = trust
        .scores
        .iter()
        .copied()
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_positive.is_finite() {
        return Err(ReputationError::DegenerateVector);
    }
    let newcomer_score = params.newcomer_prior * min_positive;
    let mut ids = trust.ids.clone();
    let mut scores = trust.scores.clone();
    let pos = ids.binary_search(&new_id).unwrap_err();
    ids.insert(pos, new_id);
    scores.insert(pos, newcomer_score);
    let sum: f64 = scores.iter().sum();
    scores.iter_mut().for_each(|s| *s /= sum);
    Ok(GlobalTrustVector { ids, scores, converged: trust.converged, iterations: trust.iterations })
}
