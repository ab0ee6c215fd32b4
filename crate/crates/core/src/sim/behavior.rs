//! Fault behaviors injected per facilitator.

use crate::interchain::{FacilitatorId, TransferRequest, Verdict};
use crate::meta::Attestation;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How a facilitator acts when asked to attest.
///
/// - `Honest`: attests its honest verdict.
/// - `Crash`: never answers.
/// - `FalseAttest`: attests the opposite of its honest verdict.
/// - `Abscond`: attests yes, then blocks the destination pool payment.
/// - `Collude(ring)`: attests in favour of transfers tied to its ring and
///   against everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    Honest,
    Crash,
    FalseAttest,
    Abscond,
    Collude(u32),
}

impl Behavior {
    pub fn is_honest(self) -> bool {
        self == Behavior::Honest
    }
}

/// Collusion context for one verdict: which ring the voter belongs to, the
/// ring of every group member, and whether the payer's account belongs to a
/// ring-mate of the voter.
#[derive(Debug, Clone, Default)]
pub struct RingInfo {
    pub voter_ring: Option<u32>,
    pub group_rings: Vec<Option<u32>>,
    pub payer_ring: Option<u32>,
}

impl RingInfo {
    /// Rings of the transfer's group members, derived from the behavior map.
    pub fn for_voter(
        voter: &FacilitatorId,
        group: &[FacilitatorId],
        behaviors: &BTreeMap<FacilitatorId, Behavior>,
        payer_ring: Option<u32>,
    ) -> Self {
        let ring_of = |id: &FacilitatorId| match behaviors.get(id) {
            Some(Behavior::Collude(ring)) => Some(*ring),
            _ => None,
        };
        Self {
            voter_ring: ring_of(voter),
            group_rings: group.iter().map(ring_of).collect(),
            payer_ring,
        }
    }
}

/// Map a behavior onto the verdict actually delivered; `Absent` means no
/// verdict ever arrives.
pub fn behavior_verdict(
    behavior: Behavior,
    honest_verdict: Verdict,
    _transfer: &TransferRequest,
    ring: &RingInfo,
) -> Attestation {
    let as_attestation = |v: Verdict| match v {
        Verdict::Yes => Attestation::Yes,
        Verdict::No => Attestation::No,
    };
    match behavior {
        Behavior::Honest => as_attestation(honest_verdict),
        Behavior::Crash => Attestation::Absent,
        Behavior::FalseAttest => match honest_verdict {
            Verdict::Yes => Attestation::No,
            Verdict::No => Attestation::Yes,
        },
        Behavior::Abscond => Attestation::Yes,
        Behavior::Collude(_) => {
            let ring_id = ring.voter_ring;
            let payer_is_mate = ring_id.is_some() && ring.payer_ring == ring_id;
            let mates = ring.group_rings.iter().filter(|r| **r == ring_id && r.is_some()).count();
            let majority = 2 * mates > ring.group_rings.len();
            if payer_is_mate || majority {
                Attestation::Yes
            } else {
                Attestation::No
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{AccountId, Amount, LedgerId};
    use crate::interchain::TransferId;

    fn request() -> TransferRequest {
        let l1 = LedgerId::new("L1").unwrap();
        let l2 = LedgerId::new("L2").unwrap();
        TransferRequest {
            id: TransferId::new("t0").unwrap(),
            payer: AccountId::new(l1, "alice").unwrap(),
            payee: AccountId::new(l2, "bob").unwrap(),
            amount_src: Amount(10),
            amount_dst: Amount(10),
            fee_total: Amount(2),
            expiry: 100,
        }
    }

    #[test]
    fn honest_and_simple_faults() {
        let r = request();
        let ring = RingInfo::default();
        assert_eq!(behavior_verdict(Behavior::Honest, Verdict::Yes, &r, &ring), Attestation::Yes);
        assert_eq!(behavior_verdict(Behavior::Honest, Verdict::No, &r, &ring), Attestation::No);
        assert_eq!(behavior_verdict(Behavior::FalseAttest, Verdict::Yes, &r, &ring), Attestation::No);
        assert_eq!(behavior_verdict(Behavior::FalseAttest, Verdict::No, &r, &ring), Attestation::Yes);
        assert_eq!(behavior_verdict(Behavior::Crash, Verdict::Yes, &r, &ring), Attestation::Absent);
        assert_eq!(behavior_verdict(Behavior::Abscond, Verdict::No, &r, &ring), Attestation::Yes);
    }

    #[test]
    fn colluder_favours_its_ring() {
        let r = request();
        // Against strangers.
        let ring = RingInfo {
            voter_ring: Some(1),
            group_rings: vec![Some(1), None, None, None],
            payer_ring: None,
        };
        assert_eq!(behavior_verdict(Behavior::Collude(1), Verdict::Yes, &r, &ring), Attestation::No);

        // In favour when the payer is a ring-mate.
        let ring = RingInfo { payer_ring: Some(1), ..ring };
        assert_eq!(behavior_verdict(Behavior::Collude(1), Verdict::No, &r, &ring), Attestation::Yes);

        // In favour when ring-mates hold the group majority.
        let ring = RingInfo {
            voter_ring: Some(1),
            group_rings: vec![Some(1), Some(1), Some(1), None],
            payer_ring: None,
        };
        assert_eq!(behavior_verdict(Behavior::Collude(1), Verdict::No, &r, &ring), Attestation::Yes);
    }
}
