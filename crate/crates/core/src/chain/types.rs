//! Domain types for a single ledger: accounts, amounts, transactions, blocks.

use crate::hashing::{Digest, Encoder};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Simulation time. Integer ticks, never wall clock.
pub type Tick = u64;

/// Characters an identifier may not contain: anything that would need
/// escaping in the triple export or that is ambiguous inside minted IRIs
/// (`/` and `#` would make two different identifier pairs collide on the
/// same IRI path). Identifiers are printable ASCII without these.
fn is_valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| (0x21..=0x7e).contains(&b) && !b"<>\"/#%:".contains(&b))
}

/// Identifier of one ledger (one consensus network).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LedgerId(String);

impl LedgerId {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidIdentifier> {
        let id = id.into();
        if is_valid_identifier(&id) {
            Ok(Self(id))
        } else {
            Err(InvalidIdentifier(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LedgerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid identifier {0:?}: must be non-empty printable ASCII without whitespace, <>\", /, #, %, :")]
pub struct InvalidIdentifier(pub String);

/// An account, unique per (ledger, name).
///
/// Names `__mint__`, `__fees__` and `__pool__` are reserved: the synthetic
/// coinbase payer, the per-ledger fee sink, and the facilitators' shared
/// liquidity pool.
///
/// Serializes as `ledger/name` (identifiers cannot contain `/`), which also
/// lets accounts key JSON maps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId {
    pub ledger: LedgerId,
    pub name: String,
}

impl Serialize for AccountId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{}/{}", self.ledger, self.name))
    }
}

impl<'de> Deserialize<'de> for AccountId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let (ledger, name) = s
            .split_once('/')
            .ok_or_else(|| serde::de::Error::custom("account id must be 'ledger/name'"))?;
        let ledger = LedgerId::new(ledger).map_err(serde::de::Error::custom)?;
        AccountId::new(ledger, name).map_err(serde::de::Error::custom)
    }
}

pub const MINT_NAME: &str = "__mint__";
pub const FEE_SINK_NAME: &str = "__fees__";
pub const POOL_NAME: &str = "__pool__";

impl AccountId {
    pub fn new(ledger: LedgerId, name: impl Into<String>) -> Result<Self, InvalidIdentifier> {
        let name = name.into();
        if is_valid_identifier(&name) {
            Ok(Self { ledger, name })
        } else {
            Err(InvalidIdentifier(name))
        }
    }

    /// The synthetic payer of coinbase transactions. Never holds a balance.
    pub fn mint(ledger: LedgerId) -> Self {
        Self { ledger, name: MINT_NAME.into() }
    }

    /// Where ordinary transaction fees accumulate.
    pub fn fee_sink(ledger: LedgerId) -> Self {
        Self { ledger, name: FEE_SINK_NAME.into() }
    }

    /// The facilitators' shared liquidity pool on this ledger.
    pub fn pool(ledger: LedgerId) -> Self {
        Self { ledger, name: POOL_NAME.into() }
    }

    pub fn is_mint(&self) -> bool {
        self.name == MINT_NAME
    }

    fn encode(&self, e: &mut Encoder) {
        e.str(self.ledger.as_str()).str(&self.name);
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.ledger, self.name)
    }
}

/// A non-negative count of smallest asset units. All balance arithmetic is
/// checked integer arithmetic; no floating point anywhere near money.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Amount(pub u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, other: Amount) -> Option<Amount> {
        self.0.checked_add(other.0).map(Amount)
    }

    pub fn checked_sub(self, other: Amount) -> Option<Amount> {
        self.0.checked_sub(other.0).map(Amount)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Handle of an escrow entry. Unique within a ledger; the interchain layer
/// uses the transfer id, which is unique across the whole run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EscrowId(pub String);

impl fmt::Display for EscrowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// What a transaction does to ledger state.
///
/// `Transfer` and `EscrowLock` are payer-initiated and consume the payer's
/// sequence number. `EscrowRelease` and `EscrowRefund` are emitted by the
/// protocol against an existing escrow entry, whose bookkeeping is their
/// replay guard; they carry seq 0 and do not advance the payer's sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxKind {
    Transfer,
    EscrowLock { escrow: EscrowId, expiry: Tick },
    EscrowRelease { escrow: EscrowId },
    EscrowRefund { escrow: EscrowId },
    Coinbase,
}

impl TxKind {
    pub fn tag(&self) -> u8 {
        match self {
            TxKind::Transfer => 0,
            TxKind::EscrowLock { .. } => 1,
            TxKind::EscrowRelease { .. } => 2,
            TxKind::EscrowRefund { .. } => 3,
            TxKind::Coinbase => 4,
        }
    }

    fn encode(&self, e: &mut Encoder) {
        e.u8(self.tag());
        match self {
            TxKind::Transfer | TxKind::Coinbase => {}
            TxKind::EscrowLock { escrow, expiry } => {
                e.str(&escrow.0).u64(*expiry);
            }
            TxKind::EscrowRelease { escrow } | TxKind::EscrowRefund { escrow } => {
                e.str(&escrow.0);
            }
        }
    }
}

/// The atomic unit of every ledger: payer pays amount to payee, plus a fee
/// to the ledger's fee sink. Never spans ledgers; a cross-chain transfer is
/// two single-ledger legs coordinated by the interchain protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub payer: AccountId,
    pub amount: Amount,
    pub payee: AccountId,
    pub fee: Amount,
    pub seq: u64,
    pub kind: TxKind,
}

impl Transaction {
    pub fn encode(&self, e: &mut Encoder) {
        self.payer.encode(e);
        e.u64(self.amount.0);
        self.payee.encode(e);
        e.u64(self.fee.0);
        e.u64(self.seq);
        self.kind.encode(e);
    }
}

/// One sealed block: `hash = SHA-256(height ‖ prev_hash ‖ timestamp ‖ txs)`
/// over the canonical encoding (see `docs/FORMATS.md`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub timestamp: Tick,
    pub txs: Vec<Transaction>,
    pub hash: Digest,
}

impl Block {
    pub fn compute_hash(height: u64, prev_hash: &Digest, timestamp: Tick, txs: &[Transaction]) -> Digest {
        let mut e = Encoder::new();
        e.u64(height).digest(prev_hash).u64(timestamp);
        e.u32(txs.len() as u32);
        for tx in txs {
            tx.encode(&mut e);
        }
        e.finish_hash()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lid(s: &str) -> LedgerId {
        LedgerId::new(s).unwrap()
    }

    #[test]
    fn identifier_rules() {
        assert!(AccountId::new(lid("L1"), "alice").is_ok());
        assert!(AccountId::new(lid("L1"), "a-b.c_d+e@f").is_ok());
        assert!(AccountId::new(lid("L1"), "").is_err());
        assert!(AccountId::new(lid("L1"), "has space").is_err());
        assert!(AccountId::new(lid("L1"), "a<b").is_err());
        assert!(AccountId::new(lid("L1"), "a\"b").is_err());
        assert!(AccountId::new(lid("L1"), "a/b").is_err());
        assert!(LedgerId::new("L#1").is_err());
    }

    #[test]
    fn amount_arithmetic_never_wraps() {
        assert_eq!(Amount(3).checked_sub(Amount(5)), None);
        assert_eq!(Amount(u64::MAX).checked_add(Amount(1)), None);
        assert_eq!(Amount(3).checked_add(Amount(5)), Some(Amount(8)));
    }

    #[test]
    fn block_hash_changes_with_any_field() {
        let a = AccountId::new(lid("L1"), "alice").unwrap();
        let b = AccountId::new(lid("L1"), "bob").unwrap();
        let tx = Transaction {
            payer: a,
            amount: Amount(5),
            payee: b,
            fee: Amount(1),
            seq: 0,
            kind: TxKind::Transfer,
        };
        let h1 = Block::compute_hash(1, &Digest::ZERO, 10, std::slice::from_ref(&tx));
        let mut tx2 = tx.clone();
        tx2.amount = Amount(6);
        let h2 = Block::compute_hash(1, &Digest::ZERO, 10, &[tx2]);
        assert_ne!(h1, h2);
        let h3 = Block::compute_hash(1, &Digest::ZERO, 11, &[tx]);
        assert_ne!(h1, h3);
    }
}
