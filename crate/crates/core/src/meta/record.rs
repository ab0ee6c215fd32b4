//! The meta-ledger: a hash-chained sequence of outcome records preserving
//! what happened in every cross-chain transfer and how each facilitator
//! behaved. Records are append-only evidence; reputation is derived from
//! them, never stored beside them.

use crate::chain::{AccountId, Amount, LedgerId, Tick, Violation};
use crate::hashing::{Digest, Encoder};
use crate::interchain::{FacilitatorId, Phase, TransferId, TransferState, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Final fate of a transfer: both legs executed, or the source leg refunded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Released,
    Forfeited,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Released => "Released",
            Outcome::Forfeited => "Forfeited",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Outcome::Released => 0,
            Outcome::Forfeited => 1,
        }
    }
}

/// What one group member attested, or that it never answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attestation {
    Yes,
    No,
    Absent,
}

impl Attestation {
    pub fn as_str(self) -> &'static str {
        match self {
            Attestation::Yes => "yes",
            Attestation::No => "no",
            Attestation::Absent => "absent",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Attestation::Yes => 0,
            Attestation::No => 1,
            Attestation::Absent => 2,
        }
    }

    /// A verdict is consistent when it matches the recorded final outcome.
    /// Absence is never consistent.
    pub fn consistent_with(self, outcome: Outcome) -> bool {
        matches!(
            (self, outcome),
            (Attestation::Yes, Outcome::Released) | (Attestation::No, Outcome::Forfeited)
        )
    }
}

/// One transfer's immutable outcome entry: who moved what between which
/// ledgers, how it ended, every member's verdict, and the fee split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub transfer_id: TransferId,
    pub source_ledger: LedgerId,
    pub dest_ledger: LedgerId,
    pub payer: AccountId,
    pub payee: AccountId,
    pub amount_src: Amount,
    pub amount_dst: Amount,
    pub fee_total: Amount,
    pub outcome: Outcome,
    pub verdicts: Vec<(FacilitatorId, Attestation)>,
    pub fee_shares: Vec<(FacilitatorId, Amount)>,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecordError {
    #[error("duplicate transfer id {0}")]
    DuplicateTransfer(TransferId),
    #[error("verdicts must be non-empty and sorted with one entry per group member")]
    MalformedVerdicts,
    #[error("forfeited records must carry no fee shares")]
    SharesOnForfeit,
    #[error("fee shares must sum to fee_total ({expected}), got {got}")]
    ShareSum { expected: Amount, got: Amount },
    #[error("fee share for {0} who is not a group member")]
    ShareFromOutsider(FacilitatorId),
    #[error("transfer is not terminal (phase {0:?})")]
    NotTerminal(Phase),
    #[error("meta block timestamp {got} is not greater than tip timestamp {tip}")]
    NonMonotonicTimestamp { got: Tick, tip: Tick },
}

impl OutcomeRecord {
    /// Build the record for a terminal transfer: verdict list covers exactly
    /// the group members in id order, absentees marked explicitly.
    pub fn from_transfer(state: &TransferState, tick: Tick) -> Result<OutcomeRecord, RecordError> {
        let outcome = match state.phase {
            Phase::Released => Outcome::Released,
            Phase::Forfeited => Outcome::Forfeited,
            other => return Err(RecordError::NotTerminal(other)),
        };
        let verdicts = state
            .group
            .members
            .iter()
            .map(|id| {
                let att = match state.attestations.get(id) {
                    Some(Verdict::Yes) => Attestation::Yes,
                    Some(Verdict::No) => Attestation::No,
                    None => Attestation::Absent,
                };
                (id.clone(), att)
            })
            .collect();
        Ok(OutcomeRecord {
            transfer_id: state.request.id.clone(),
            source_ledger: state.request.payer.ledger.clone(),
            dest_ledger: state.request.payee.ledger.clone(),
            payer: state.request.payer.clone(),
            payee: state.request.payee.clone(),
            amount_src: state.request.amount_src,
            amount_dst: state.request.amount_dst,
            fee_total: state.request.fee_total,
            outcome,
            verdicts,
            fee_shares: state.fee_shares.clone(),
            tick,
        })
    }

    pub fn well_formed(&self) -> Result<(), RecordError> {
        if self.verdicts.is_empty()
            || self.verdicts.windows(2).any(|w| w[0].0 >= w[1].0)
        {
            return Err(RecordError::MalformedVerdicts);
        }
        match self.outcome {
            Outcome::Forfeited => {
                if !self.fee_shares.is_empty() {
                    return Err(RecordError::SharesOnForfeit);
                }
            }
            Outcome::Released => {
                let mut sum = Amount::ZERO;
                for (id, amount) in &self.fee_shares {
                    if !self.verdicts.iter().any(|(v, _)| v == id) {
                        return Err(RecordError::ShareFromOutsider(id.clone()));
                    }
                    sum = sum.checked_add(*amount).ok_or(RecordError::ShareSum {
                        expected: self.fee_total,
                        got: Amount(u64::MAX),
                    })?;
                }
                if sum != self.fee_total {
                    return Err(RecordError::ShareSum { expected: self.fee_total, got: sum });
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.str(self.transfer_id.as_str());
        e.str(self.source_ledger.as_str());
        e.str(self.dest_ledger.as_str());
        e.str(self.payer.ledger.as_str()).str(&self.payer.name);
        e.str(self.payee.ledger.as_str()).str(&self.payee.name);
        e.u64(self.amount_src.value());
        e.u64(self.amount_dst.value());
        e.u64(self.fee_total.value());
        e.u8(self.outcome.tag());
        e.u32(self.verdicts.len() as u32);
        for (id, att) in &self.verdicts {
            e.str(id.as_str()).u8(att.tag());
        }
        e.u32(self.fee_shares.len() as u32);
        for (id, amount) in &self.fee_shares {
            e.str(id.as_str()).u64(amount.value());
        }
        e.u64(self.tick);
    }
}

/// Hash-chained block of outcome records; the same digest scheme as ledger
/// blocks with records in place of transactions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaBlock {
    pub height: u64,
    pub prev_hash: Digest,
    pub timestamp: Tick,
    pub records: Vec<OutcomeRecord>,
    pub hash: Digest,
}

impl MetaBlock {
    pub fn compute_hash(
        height: u64,
        prev_hash: &Digest,
        timestamp: Tick,
        records: &[OutcomeRecord],
    ) -> Digest {
        let mut e = Encoder::new();
        e.u64(height).digest(prev_hash).u64(timestamp);
        e.u32(records.len() as u32);
        for r in records {
            r.encode(&mut e);
        }
        e.finish_hash()
    }
}

/// One row of a facilitator's public history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub transfer_id: TransferId,
    pub attested: Attestation,
    pub outcome: Outcome,
    pub tick: Tick,
}

/// The meta-ledger itself. Starts as an empty genesis block at height 0;
/// records buffer in a pending set until `seal_block` commits them, after
/// which they are immutable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaLedger {
    pub chain: Vec<MetaBlock>,
    pending: Vec<OutcomeRecord>,
    seen: BTreeSet<TransferId>,
}

impl Default for MetaLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl MetaLedger {
    pub fn new() -> Self {
        let hash = MetaBlock::compute_hash(0, &Digest::ZERO, 0, &[]);
        MetaLedger {
            chain: vec![MetaBlock { height: 0, prev_hash: Digest::ZERO, timestamp: 0, records: Vec::new(), hash }],
            pending: Vec::new(),
            seen: BTreeSet::new(),
        }
    }

    fn tip(&self) -> &MetaBlock {
        self.chain.last().expect("meta chain always has genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn tip_timestamp(&self) -> Tick {
        self.tip().timestamp
    }

    /// Append a well-formed record to the pending set. The next seal commits
    /// it; duplicates of any known transfer id are refused.
    pub fn record_outcome(&mut self, record: OutcomeRecord) -> Result<(), RecordError> {
        record.well_formed()?;
        if self.seen.contains(&record.transfer_id) {
            return Err(RecordError::DuplicateTransfer(record.transfer_id));
        }
        self.seen.insert(record.transfer_id.clone());
        self.pending.push(record);
        Ok(())
    }

    pub fn seal_block(&mut self, timestamp: Tick) -> Result<&MetaBlock, RecordError> {
        let tip_ts = self.tip_timestamp();
        if timestamp <= tip_ts {
            return Err(RecordError::NonMonotonicTimestamp { got: timestamp, tip: tip_ts });
        }
        let records = std::mem::take(&mut self.pending);
        let height = self.height() + 1;
        let prev_hash = self.tip().hash;
        let hash = MetaBlock::compute_hash(height, &prev_hash, timestamp, &records);
        self.chain.push(MetaBlock { height, prev_hash, timestamp, records, hash });
        Ok(self.tip())
    }

    /// Sealed records in chain order.
    pub fn sealed_records(&self) -> impl Iterator<Item = &OutcomeRecord> {
        self.chain.iter().flat_map(|b| b.records.iter())
    }

    /// Sealed records followed by records still awaiting a seal. Reputation
    /// reads this view so evidence counts as soon as it is recorded.
    pub fn records(&self) -> impl Iterator<Item = &OutcomeRecord> {
        self.sealed_records().chain(self.pending.iter())
    }

    pub fn pending(&self) -> &[OutcomeRecord] {
        &self.pending
    }

    pub fn get(&self, transfer_id: &TransferId) -> Option<&OutcomeRecord> {
        self.records().find(|r| &r.transfer_id == transfer_id)
    }

    /// Every verdict by one facilitator, in meta-chain order. Unknown
    /// facilitators simply have no history.
    pub fn facilitator_history(&self, facilitator: &FacilitatorId) -> Vec<HistoryEntry> {
        self.records()
            .filter_map(|r| {
                r.verdicts.iter().find(|(id, _)| id == facilitator).map(|(_, att)| HistoryEntry {
                    transfer_id: r.transfer_id.clone(),
                    attested: *att,
                    outcome: r.outcome,
                    tick: r.tick,
                })
            })
            .collect()
    }

    /// Verify the meta chain: structure, hash linkage, record well-formedness
    /// and transfer-id uniqueness. Any prefix of a valid chain is valid.
    pub fn verify(&self) -> Result<(), Violation> {
        let violation = |height: u64, reason: String| Violation { height, reason };
        let Some(genesis) = self.chain.first() else {
            return Err(violation(0, "empty meta chain".into()));
        };
        if genesis.height != 0 || genesis.prev_hash != Digest::ZERO {
            return Err(violation(0, "meta genesis must be height 0 with zero prev_hash".into()));
        }
        let mut ids = BTreeSet::new();
        let mut prev: Option<&MetaBlock> = None;
        for (position, block) in self.chain.iter().enumerate() {
            // Violations report the chain position, which still points at the
            // offending block when the stored height itself was tampered.
            let h = position as u64;
            if let Some(prev) = prev {
                if block.height != prev.height + 1 {
                    return Err(violation(h, format!("height must be {}", prev.height + 1)));
                }
                if block.prev_hash != prev.hash {
                    return Err(violation(h, "prev_hash does not match predecessor".into()));
                }
                if block.timestamp <= prev.timestamp {
                    return Err(violation(h, "timestamp not greater than predecessor".into()));
                }
            }
            let expect =
                MetaBlock::compute_hash(block.height, &block.prev_hash, block.timestamp, &block.records);
            if expect != block.hash {
                return Err(violation(h, "meta block hash does not match contents".into()));
            }
            for record in &block.records {
                if let Err(e) = record.well_formed() {
                    return Err(violation(h, format!("malformed record: {e}")));
                }
                if !ids.insert(record.transfer_id.clone()) {
                    return Err(violation(h, format!("duplicate transfer id {}", record.transfer_id)));
                }
            }
            prev = Some(block);
        }
        Ok(())
    }
}
