//! The single-ledger state machine: genesis, pending-set admission, block
//! sealing and full-chain verification by replay.

use super::types::{AccountId, Amount, Block, EscrowId, LedgerId, Tick, Transaction, TxKind};
use crate::hashing::Digest;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Funds locked pending a cross-chain outcome. `amount` is what remains;
/// partial releases decrement it and the entry disappears at zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowEntry {
    pub owner: AccountId,
    pub amount: Amount,
    pub expiry: Tick,
}

/// Why a transaction was rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TxError {
    #[error("insufficient funds: {payer} has {available}, needs {required}")]
    InsufficientFunds { payer: AccountId, available: Amount, required: Amount },
    #[error("bad sequence for {payer}: got {got}, expected {expected}")]
    BadSequence { payer: AccountId, got: u64, expected: u64 },
    #[error("transaction references account {account} on a foreign ledger (this ledger is {ledger})")]
    CrossLedger { account: AccountId, ledger: LedgerId },
    #[error("unknown payer {0}")]
    UnknownPayer(AccountId),
    #[error("coinbase transactions are only valid in the genesis block")]
    CoinbaseOutsideGenesis,
    #[error("escrow {0} already exists")]
    DuplicateEscrow(EscrowId),
    #[error("escrow {0} not found")]
    UnknownEscrow(EscrowId),
    #[error("escrow {escrow} operation from {payer} does not match owner {owner}")]
    NotEscrowOwner { escrow: EscrowId, payer: AccountId, owner: AccountId },
    #[error("escrow {escrow} holds {available}, operation needs {requested}")]
    EscrowUnderflow { escrow: EscrowId, available: Amount, requested: Amount },
    #[error("escrow refund must return the full remaining amount ({remaining}), got {got}")]
    PartialRefund { remaining: Amount, got: Amount },
    #[error("{kind} transactions must carry zero fee and seq 0")]
    ProtocolTxShape { kind: &'static str },
    #[error("amount overflow")]
    Overflow,
    #[error("synthetic mint account cannot be used by {0:?} transactions")]
    MintMisuse(u8),
}

/// Errors from ledger construction and sealing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("genesis allocations must be non-empty")]
    EmptyAllocations,
    #[error("duplicate account {0} in genesis allocations")]
    DuplicateAllocation(AccountId),
    #[error("account {0} does not belong to ledger {1}")]
    ForeignAccount(AccountId, LedgerId),
    #[error("allocation to reserved mint account {0}")]
    AllocationToMint(AccountId),
    #[error("block timestamp {got} is not greater than tip timestamp {tip}")]
    NonMonotonicTimestamp { got: Tick, tip: Tick },
    #[error("genesis supply overflow")]
    SupplyOverflow,
    #[error(transparent)]
    Tx(#[from] TxError),
}

/// First point at which a chain fails verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub height: u64,
    pub reason: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "height {}: {}", self.height, self.reason)
    }
}

/// Balances, per-payer sequence numbers and open escrows. Shared by the
/// sealed state, the pending-set projection, and verification replay so all
/// three apply exactly the same rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    pub balances: BTreeMap<AccountId, Amount>,
    pub next_seq: BTreeMap<AccountId, u64>,
    pub escrows: BTreeMap<EscrowId, EscrowEntry>,
}

impl LedgerState {
    pub fn balance(&self, account: &AccountId) -> Amount {
        self.balances.get(account).copied().unwrap_or(Amount::ZERO)
    }

    pub fn next_seq(&self, account: &AccountId) -> u64 {
        self.next_seq.get(account).copied().unwrap_or(0)
    }

    fn credit(&mut self, account: &AccountId, amount: Amount) -> Result<(), TxError> {
        let entry = self.balances.entry(account.clone()).or_insert(Amount::ZERO);
        *entry = entry.checked_add(amount).ok_or(TxError::Overflow)?;
        Ok(())
    }

    /// Validate and apply one transaction. `genesis` permits coinbases.
    pub fn apply(&mut self, ledger: &LedgerId, tx: &Transaction, genesis: bool) -> Result<(), TxError> {
        for account in [&tx.payer, &tx.payee] {
            if &account.ledger != ledger {
                return Err(TxError::CrossLedger { account: account.clone(), ledger: ledger.clone() });
            }
        }
        match &tx.kind {
            TxKind::Coinbase => {
                if !genesis {
                    return Err(TxError::CoinbaseOutsideGenesis);
                }
                self.credit(&tx.payee, tx.amount)?;
            }
            TxKind::Transfer | TxKind::EscrowLock { .. } => {
                if tx.payer.is_mint() {
                    return Err(TxError::MintMisuse(tx.kind.tag()));
                }
                if !self.balances.contains_key(&tx.payer) {
                    return Err(TxError::UnknownPayer(tx.payer.clone()));
                }
                let expected = self.next_seq(&tx.payer);
                if tx.seq != expected {
                    return Err(TxError::BadSequence { payer: tx.payer.clone(), got: tx.seq, expected });
                }
                let required = tx.amount.checked_add(tx.fee).ok_or(TxError::Overflow)?;
                let available = self.balance(&tx.payer);
                if available < required {
                    return Err(TxError::InsufficientFunds { payer: tx.payer.clone(), available, required });
                }
                if let TxKind::EscrowLock { escrow, expiry } = &tx.kind {
                    if self.escrows.contains_key(escrow) {
                        return Err(TxError::DuplicateEscrow(escrow.clone()));
                    }
                    self.escrows.insert(
                        escrow.clone(),
                        EscrowEntry { owner: tx.payer.clone(), amount: tx.amount, expiry: *expiry },
                    );
                } else {
                    self.credit(&tx.payee, tx.amount)?;
                }
                if !tx.fee.is_zero() {
                    self.credit(&AccountId::fee_sink(ledger.clone()), tx.fee)?;
                }
                // Debit after credits so an overflow error leaves state untouched
                // only via earlier returns; subtraction itself cannot fail here.
                let bal = self.balances.get_mut(&tx.payer).expect("payer checked above");
                *bal = bal.checked_sub(required).expect("balance checked above");
                self.next_seq.insert(tx.payer.clone(), expected + 1);
            }
            TxKind::EscrowRelease { escrow } => {
                if !tx.fee.is_zero() || tx.seq != 0 {
                    return Err(TxError::ProtocolTxShape { kind: "escrow-release" });
                }
                let entry = self.escrows.get(escrow).ok_or_else(|| TxError::UnknownEscrow(escrow.clone()))?;
                if entry.owner != tx.payer {
                    return Err(TxError::NotEscrowOwner {
                        escrow: escrow.clone(),
                        payer: tx.payer.clone(),
                        owner: entry.owner.clone(),
                    });
                }
                if entry.amount < tx.amount {
                    return Err(TxError::EscrowUnderflow {
                        escrow: escrow.clone(),
                        available: entry.amount,
                        requested: tx.amount,
                    });
                }
                self.credit(&tx.payee, tx.amount)?;
                let entry = self.escrows.get_mut(escrow).expect("checked above");
                entry.amount = entry.amount.checked_sub(tx.amount).expect("checked above");
                if entry.amount.is_zero() {
                    self.escrows.remove(escrow);
                }
            }
            TxKind::EscrowRefund { escrow } => {
                if !tx.fee.is_zero() || tx.seq != 0 {
                    return Err(TxError::ProtocolTxShape { kind: "escrow-refund" });
                }
                let entry = self.escrows.get(escrow).ok_or_else(|| TxError::UnknownEscrow(escrow.clone()))?;
                if entry.owner != tx.payer || entry.owner != tx.payee {
                    return Err(TxError::NotEscrowOwner {
                        escrow: escrow.clone(),
                        payer: tx.payer.clone(),
                        owner: entry.owner.clone(),
                    });
                }
                if entry.amount != tx.amount {
                    return Err(TxError::PartialRefund { remaining: entry.amount, got: tx.amount });
                }
                self.credit(&tx.payee, tx.amount)?;
                self.escrows.remove(escrow);
            }
        }
        Ok(())
    }

    fn total(&self) -> Option<Amount> {
        let mut sum = Amount::ZERO;
        for amount in self.balances.values() {
            sum = sum.checked_add(*amount)?;
        }
        for entry in self.escrows.values() {
            sum = sum.checked_add(entry.amount)?;
        }
        Some(sum)
    }
}

/// An append-only hash-chained ledger with an explicit pending set.
///
/// Admission validates against a projection of sealed state plus the pending
/// set, so a transaction accepted into the pending set can never fail at
/// seal time and two transactions with the same (payer, seq) can never both
/// be sealed. All mutating calls must be externally serialized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub id: LedgerId,
    pub chain: Vec<Block>,
    state: LedgerState,
    projected: LedgerState,
    pending: Vec<Transaction>,
    supply: Amount,
}

impl Ledger {
    /// Mint the fixed total supply: a one-block chain holding one coinbase
    /// per allocation. Supply never changes afterwards.
    pub fn genesis(
        id: LedgerId,
        allocations: &[(AccountId, Amount)],
    ) -> Result<Ledger, LedgerError> {
        if allocations.is_empty() {
            return Err(LedgerError::EmptyAllocations);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut supply = Amount::ZERO;
        for (account, amount) in allocations {
            if account.ledger != id {
                return Err(LedgerError::ForeignAccount(account.clone(), id));
            }
            if account.is_mint() {
                return Err(LedgerError::AllocationToMint(account.clone()));
            }
            if !seen.insert(account.clone()) {
                return Err(LedgerError::DuplicateAllocation(account.clone()));
            }
            supply = supply.checked_add(*amount).ok_or(LedgerError::SupplyOverflow)?;
        }
        let mint = AccountId::mint(id.clone());
        let txs: Vec<Transaction> = allocations
            .iter()
            .enumerate()
            .map(|(i, (account, amount))| Transaction {
                payer: mint.clone(),
                amount: *amount,
                payee: account.clone(),
                fee: Amount::ZERO,
                seq: i as u64,
                kind: TxKind::Coinbase,
            })
            .collect();
        let mut state = LedgerState::default();
        for tx in &txs {
            state.apply(&id, tx, true)?;
        }
        let hash = Block::compute_hash(0, &Digest::ZERO, 0, &txs);
        let block = Block { height: 0, prev_hash: Digest::ZERO, timestamp: 0, txs, hash };
        Ok(Ledger {
            id,
            chain: vec![block],
            projected: state.clone(),
            state,
            pending: Vec::new(),
            supply,
        })
    }

    fn tip(&self) -> &Block {
        self.chain.last().expect("chain always has genesis")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn tip_timestamp(&self) -> Tick {
        self.tip().timestamp
    }

    pub fn supply(&self) -> Amount {
        self.supply
    }

    /// Current sealed balance. Unknown accounts hold zero.
    pub fn balance_of(&self, account: &AccountId) -> Amount {
        self.state.balance(account)
    }

    /// Sealed state view (balances, sequences, escrows).
    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    /// Sealed state plus the effect of everything already pending. This is
    /// what admission validates against and what callers should consult when
    /// building follow-up transactions before the next seal.
    pub fn projected(&self) -> &LedgerState {
        &self.projected
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    /// Admit a transaction to the pending set, or reject it with a reason.
    /// Sealed state is untouched until `seal_block`.
    pub fn submit(&mut self, tx: Transaction) -> Result<(), TxError> {
        let mut trial = self.projected.clone();
        trial.apply(&self.id, &tx, false)?;
        self.projected = trial;
        self.pending.push(tx);
        Ok(())
    }

    /// Seal the pending set into a new block at `timestamp`. Pending
    /// transactions apply in admission order, then every escrow whose expiry
    /// is at or before `timestamp` is refunded in the same block. Empty
    /// blocks are allowed; they just advance time.
    pub fn seal_block(&mut self, timestamp: Tick) -> Result<&Block, LedgerError> {
        let tip_ts = self.tip_timestamp();
        if timestamp <= tip_ts {
            return Err(LedgerError::NonMonotonicTimestamp { got: timestamp, tip: tip_ts });
        }
        let mut txs = std::mem::take(&mut self.pending);
        for tx in &txs {
            self.state
                .apply(&self.id, tx, false)
                .expect("pending transactions were validated at admission");
        }
        // Expired escrows refund in deterministic id order.
        let expired: Vec<EscrowId> = self
            .state
            .escrows
            .iter()
            .filter(|(_, entry)| entry.expiry <= timestamp)
            .map(|(id, _)| id.clone())
            .collect();
        for escrow in expired {
            let entry = self.state.escrows[&escrow].clone();
            let refund = Transaction {
                payer: entry.owner.clone(),
                amount: entry.amount,
                payee: entry.owner,
                fee: Amount::ZERO,
                seq: 0,
                kind: TxKind::EscrowRefund { escrow },
            };
            self.state
                .apply(&self.id, &refund, false)
                .expect("refund of an existing escrow always applies");
            txs.push(refund);
        }
        let height = self.height() + 1;
        let prev_hash = self.tip().hash;
        let hash = Block::compute_hash(height, &prev_hash, timestamp, &txs);
        self.chain.push(Block { height, prev_hash, timestamp, txs, hash });
        self.projected = self.state.clone();
        Ok(self.tip())
    }

    /// Check every block invariant and replay the whole chain from genesis,
    /// returning the first violating height or Ok. Violations are the return
    /// value, not errors.
    pub fn verify(&self) -> Result<(), Violation> {
        let violation = |height: u64, reason: String| Violation { height, reason };
        let Some(genesis) = self.chain.first() else {
            return Err(violation(0, "empty chain".into()));
        };
        if genesis.height != 0 {
            return Err(violation(0, "genesis height must be 0".into()));
        }
        if genesis.prev_hash != Digest::ZERO {
            return Err(violation(0, "genesis prev_hash must be all zero".into()));
        }
        let mut replay = LedgerState::default();
        let mut supply = Amount::ZERO;
        let mut prev: Option<&Block> = None;
        for (position, block) in self.chain.iter().enumerate() {
            // Report violations at the chain position so a tampered height
            // field still points at the offending block.
            let h = position as u64;
            if let Some(prev) = prev {
                if block.height != prev.height + 1 {
                    return Err(violation(h, format!("height must be {}", prev.height + 1)));
                }
                if block.prev_hash != prev.hash {
                    return Err(violation(h, "prev_hash does not match predecessor".into()));
                }
                if block.timestamp <= prev.timestamp {
                    return Err(violation(
                        h,
                        format!(
                            "timestamp {} not greater than predecessor {}",
                            block.timestamp, prev.timestamp
                        ),
                    ));
                }
            }
            let expect =
                Block::compute_hash(block.height, &block.prev_hash, block.timestamp, &block.txs);
            if expect != block.hash {
                return Err(violation(h, "block hash does not match contents".into()));
            }
            for tx in &block.txs {
                if h == 0 {
                    if tx.kind != TxKind::Coinbase {
                        return Err(violation(0, "genesis may contain only coinbases".into()));
                    }
                    supply = supply
                        .checked_add(tx.amount)
                        .ok_or_else(|| violation(0, "genesis supply overflow".into()))?;
                }
                if let Err(e) = replay.apply(&self.id, tx, h == 0) {
                    return Err(violation(h, format!("invalid transaction on replay: {e}")));
                }
            }
            prev = Some(block);
        }
        let tip = self.height();
        if replay != self.state {
            return Err(violation(tip, "replayed state diverges from ledger state".into()));
        }
        if supply != self.supply {
            return Err(violation(tip, "genesis supply does not match recorded supply".into()));
        }
        match replay.total() {
            Some(total) if total == supply => Ok(()),
            _ => Err(violation(tip, "conservation failure: balances + escrows != supply".into())),
        }
    }

    /// Exact conservation check over sealed state:
    /// Σ balances + Σ escrowed = genesis supply.
    pub fn conserves_supply(&self) -> bool {
        self.state.total() == Some(self.supply)
    }
}
