//! Facilitators: participants holding accounts on two or more ledgers who
//! execute cross-chain transfers in exchange for fees.

use crate::chain::{AccountId, Amount, InvalidIdentifier, LedgerId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Opaque facilitator identity. Ordering (lexicographic on the name) breaks
/// every tie in the protocol: fee remainders, verdict listings, walk order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FacilitatorId(String);

impl FacilitatorId {
    pub fn new(name: impl Into<String>) -> Result<Self, InvalidIdentifier> {
        // Same identifier charset as accounts; the name embeds in IRIs.
        let probe = AccountId::new(LedgerId::new("x").expect("static id"), name.into())?;
        Ok(Self(probe.name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FacilitatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A facilitator's standing data: one account per ledger it serves and its
/// fee bid per transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facilitator {
    pub id: FacilitatorId,
    pub accounts: BTreeMap<LedgerId, AccountId>,
    pub fee_bid: Amount,
}

impl Facilitator {
    pub fn account_on(&self, ledger: &LedgerId) -> Option<&AccountId> {
        self.accounts.get(ledger)
    }

    /// Eligible for a transfer iff it holds accounts on both legs.
    pub fn serves(&self, a: &LedgerId, b: &LedgerId) -> bool {
        self.accounts.contains_key(a) && self.accounts.contains_key(b)
    }
}

/// Lookup table from id to facilitator record.
pub type Directory = BTreeMap<FacilitatorId, Facilitator>;

pub fn directory_from(facilitators: impl IntoIterator<Item = Facilitator>) -> Directory {
    facilitators.into_iter().map(|f| (f.id.clone(), f)).collect()
}

/// Group sizing: n members tolerating f Byzantine ones.
///
/// The hard bound is n ≥ 3f + 1. The attestation quorum is fixed at 2f + 1,
/// the smallest threshold that guarantees at least f + 1 honest attesters
/// behind any release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupParams {
    n: usize,
    f: usize,
    quorum: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("group bound violated: n = {n} but 3f + 1 = {}", 3 * f + 1)]
    BoundViolation { n: usize, f: usize },
    #[error("need {needed} eligible candidates, only {available} serve both ledgers")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("candidate {0} bids a zero fee")]
    InvalidBid(FacilitatorId),
}

impl GroupParams {
    #[allow(clippy::int_plus_one)] // keep the bound in its canonical n >= 3f + 1 form
    pub fn new(n: usize, f: usize) -> Result<Self, GroupError> {
        if n == 0 || n < 3 * f + 1 {
            return Err(GroupError::BoundViolation { n, f });
        }
        Ok(Self { n, f, quorum: 2 * f + 1 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn quorum(&self) -> usize {
        self.quorum
    }
}

/// A formed group: the selected members (kept sorted by id) plus the
/// parameters they were formed under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub members: Vec<FacilitatorId>,
    pub params: GroupParams,
}

impl Group {
    pub fn new(mut members: Vec<FacilitatorId>, params: GroupParams) -> Self {
        members.sort();
        members.dedup();
        Self { members, params }
    }

    pub fn contains(&self, id: &FacilitatorId) -> bool {
        self.members.binary_search(id).is_ok()
    }
}

/// Split `total` into `parts` integer shares, equal up to one unit, with the
/// extra units going to the lowest indices (callers pass members in id
/// order, so remainders favour the lowest ids).
pub fn split_amount(total: Amount, parts: usize) -> Vec<Amount> {
    assert!(parts > 0, "cannot split among zero members");
    let parts_u64 = parts as u64;
    let base = total.value() / parts_u64;
    let remainder = (total.value() % parts_u64) as usize;
    (0..parts)
        .map(|i| Amount(base + u64::from(i < remainder)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_is_enforced() {
        assert!(GroupParams::new(4, 1).is_ok());
        assert!(GroupParams::new(7, 2).is_ok());
        assert!(matches!(GroupParams::new(3, 1), Err(GroupError::BoundViolation { .. })));
        assert!(matches!(GroupParams::new(0, 0), Err(GroupError::BoundViolation { .. })));
        assert_eq!(GroupParams::new(4, 1).unwrap().quorum(), 3);
        assert_eq!(GroupParams::new(7, 2).unwrap().quorum(), 5);
    }

    #[test]
    fn split_favours_lowest_indices() {
        let shares = split_amount(Amount(10), 4);
        assert_eq!(shares, vec![Amount(3), Amount(3), Amount(2), Amount(2)]);
        let total: u64 = shares.iter().map(|a| a.value()).sum();
        assert_eq!(total, 10);

        assert_eq!(split_amount(Amount(0), 3), vec![Amount(0); 3]);
        assert_eq!(split_amount(Amount(7), 1), vec![Amount(7)]);
    }
}
