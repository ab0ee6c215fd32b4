//! The cross-chain transfer phase machine: escrow the source leg, collect
//! attestations, then atomically release both legs or forfeit back to the
//! payer. In every terminal state the payee has been paid and the payer
//! debited, or the payer is whole and the payee untouched — never a mix.

use super::facilitator::{split_amount, Directory, FacilitatorId, Group};
use crate::chain::{
    AccountId, Amount, EscrowId, InvalidIdentifier, Ledger, LedgerId, Tick, Transaction, TxError,
    TxKind,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Run-unique transfer identity; also names the source-chain escrow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransferId(String);

impl TransferId {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidIdentifier> {
        let id = id.into();
        // Same charset as account names; ids embed in IRIs and escrow keys.
        let probe = AccountId::new(LedgerId::new("x").expect("static id"), id)?;
        Ok(Self(probe.name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn escrow_id(&self) -> EscrowId {
        EscrowId(self.0.clone())
    }
}

impl fmt::Display for TransferId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A requested cross-chain payment: the payer gives `amount_src` plus
/// `fee_total` on the source ledger, the payee receives `amount_dst` on the
/// destination ledger. The exchange rate is whatever the request says.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRequest {
    pub id: TransferId,
    pub payer: AccountId,
    pub payee: AccountId,
    pub amount_src: Amount,
    pub amount_dst: Amount,
    pub fee_total: Amount,
    pub expiry: Tick,
}

/// Protocol phase. Released and Forfeited are terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Proposed,
    Escrowed,
    Attested,
    Released,
    Forfeited,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Released | Phase::Forfeited)
    }

    /// The allowed transition relation: forward along
    /// Proposed → Escrowed → Attested → Released, or to Forfeited from any
    /// non-terminal phase.
    pub fn can_transition(self, to: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, to),
            (Proposed, Escrowed) | (Escrowed, Attested) | (Attested, Released)
        ) || (!self.is_terminal() && to == Forfeited)
    }
}

/// One member's answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransferError {
    #[error("payer and payee must be on different ledgers")]
    SameLedger,
    #[error("amount_dst must be positive")]
    ZeroDestAmount,
    #[error("expiry {expiry} is not in the future (now {now})")]
    ExpiryNotFuture { expiry: Tick, now: Tick },
    #[error("group has {got} members, params require {expected}")]
    MalformedGroup { got: usize, expected: usize },
    #[error("operation {op} invalid in phase {phase:?}")]
    WrongPhase { op: &'static str, phase: Phase },
    #[error("verdict from {0}, who is not a group member")]
    NonMember(FacilitatorId),
    #[error("transfer still awaiting quorum before expiry")]
    AwaitingQuorum,
    #[error("ledger {got} passed where {expected} was required")]
    LedgerMismatch { expected: LedgerId, got: LedgerId },
    #[error("facilitator {0} holds no account on ledger {1}")]
    MissingAccount(FacilitatorId, LedgerId),
    #[error("escrow amount overflow")]
    Overflow,
    #[error(transparent)]
    Ledger(#[from] TxError),
}

/// A transfer in flight. Mutated by a single coordinator; the terminal
/// phases carry everything the outcome record needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferState {
    pub request: TransferRequest,
    pub group: Group,
    pub phase: Phase,
    pub attestations: BTreeMap<FacilitatorId, Verdict>,
    pub escrow_id: Option<EscrowId>,
    /// Set when an absconding member blocks the destination pool payment
    /// after attesting yes; settlement then forfeits instead of releasing.
    pub dest_refused: bool,
    /// Fee split actually paid out, populated on release.
    pub fee_shares: Vec<(FacilitatorId, Amount)>,
}

/// Create the transfer in Proposed, validating the request against `now`.
pub fn initiate(
    request: TransferRequest,
    group: Group,
    now: Tick,
) -> Result<TransferState, TransferError> {
    if request.payer.ledger == request.payee.ledger {
        return Err(TransferError::SameLedger);
    }
    if request.amount_dst.is_zero() {
        return Err(TransferError::ZeroDestAmount);
    }
    if request.expiry <= now {
        return Err(TransferError::ExpiryNotFuture { expiry: request.expiry, now });
    }
    if group.members.len() != group.params.n() {
        return Err(TransferError::MalformedGroup {
            got: group.members.len(),
            expected: group.params.n(),
        });
    }
    Ok(TransferState {
        request,
        group,
        phase: Phase::Proposed,
        attestations: BTreeMap::new(),
        escrow_id: None,
        dest_refused: false,
        fee_shares: Vec::new(),
    })
}

/// Lock `amount_src + fee_total` into a source-chain escrow expiring with the
/// transfer. Insufficient funds forfeit immediately (nothing was locked);
/// any other ledger rejection propagates.
pub fn escrow_lock(state: &mut TransferState, source: &mut Ledger) -> Result<(), TransferError> {
    if state.phase != Phase::Proposed {
        return Err(TransferError::WrongPhase { op: "escrow_lock", phase: state.phase });
    }
    if source.id != state.request.payer.ledger {
        return Err(TransferError::LedgerMismatch {
            expected: state.request.payer.ledger.clone(),
            got: source.id.clone(),
        });
    }
    let total = state
        .request
        .amount_src
        .checked_add(state.request.fee_total)
        .ok_or(TransferError::Overflow)?;
    if total.is_zero() {
        // Nothing to lock on the source leg; the transfer is a pure
        // destination-pool payout and carries no escrow.
        state.phase = Phase::Escrowed;
        return Ok(());
    }
    let escrow = state.request.id.escrow_id();
    let tx = Transaction {
        payer: state.request.payer.clone(),
        amount: total,
        payee: state.request.payer.clone(),
        fee: Amount::ZERO,
        seq: source.projected().next_seq(&state.request.payer),
        kind: TxKind::EscrowLock { escrow: escrow.clone(), expiry: state.request.expiry },
    };
    match source.submit(tx) {
        Ok(()) => {
            state.escrow_id = Some(escrow);
            state.phase = Phase::Escrowed;
            Ok(())
        }
        Err(TxError::InsufficientFunds { .. }) => {
            state.phase = Phase::Forfeited;
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

/// Ingest verdicts; the first verdict per member wins and outsiders are
/// refused. Reaching the quorum moves to Attested; once enough refusals make
/// the quorum unreachable the transfer is Forfeited (the escrow refunds at
/// expiry); otherwise the phase is unchanged, awaiting more verdicts.
pub fn collect_attestations(
    state: &mut TransferState,
    verdicts: &[(FacilitatorId, Verdict)],
) -> Result<(), TransferError> {
    if state.phase != Phase::Escrowed {
        return Err(TransferError::WrongPhase { op: "collect_attestations", phase: state.phase });
    }
    for (id, verdict) in verdicts {
        if !state.group.contains(id) {
            return Err(TransferError::NonMember(id.clone()));
        }
        state.attestations.entry(id.clone()).or_insert(*verdict);
    }
    let yes = state.attestations.values().filter(|v| **v == Verdict::Yes).count();
    let no = state.attestations.values().filter(|v| **v == Verdict::No).count();
    let n = state.group.params.n();
    let quorum = state.group.params.quorum();
    if yes >= quorum {
        state.phase = Phase::Attested;
    } else if no > n - quorum {
        state.phase = Phase::Forfeited;
    }
    Ok(())
}

/// Refund whatever remains escrowed for this transfer. The entry may already
/// be gone when a seal past expiry auto-refunded it; nothing is owed then.
fn refund_escrow(state: &TransferState, source: &mut Ledger) -> Result<(), TransferError> {
    let Some(escrow) = &state.escrow_id else {
        return Ok(());
    };
    let Some(entry) = source.projected().escrows.get(escrow) else {
        return Ok(());
    };
    let tx = Transaction {
        payer: entry.owner.clone(),
        amount: entry.amount,
        payee: entry.owner.clone(),
        fee: Amount::ZERO,
        seq: 0,
        kind: TxKind::EscrowRefund { escrow: escrow.clone() },
    };
    source.submit(tx)?;
    Ok(())
}

/// Settle an escrowed transfer.
///
/// Attested before expiry with a willing, funded destination pool: the
/// escrow releases `amount_src` to the source-ledger pool and the fee split
/// to the members, and the destination pool pays `amount_dst` to the payee —
/// Released. Expiry reached without that, or the destination pool refused or
/// underfunded: the escrow refunds to the payer — Forfeited. Funds never end
/// up half-moved.
pub fn settle(
    state: &mut TransferState,
    source: &mut Ledger,
    dest: &mut Ledger,
    directory: &Directory,
    now: Tick,
) -> Result<(), TransferError> {
    if !matches!(state.phase, Phase::Escrowed | Phase::Attested) {
        return Err(TransferError::WrongPhase { op: "settle", phase: state.phase });
    }
    if source.id != state.request.payer.ledger {
        return Err(TransferError::LedgerMismatch {
            expected: state.request.payer.ledger.clone(),
            got: source.id.clone(),
        });
    }
    if dest.id != state.request.payee.ledger {
        return Err(TransferError::LedgerMismatch {
            expected: state.request.payee.ledger.clone(),
            got: dest.id.clone(),
        });
    }
    if state.phase == Phase::Attested && now < state.request.expiry {
        let dest_pool = AccountId::pool(dest.id.clone());
        let funded = dest.projected().balance(&dest_pool) >= state.request.amount_dst;
        if funded && !state.dest_refused {
            return release(state, source, dest, directory, dest_pool);
        }
        // Pool refused or underfunded: funds integrity wins, refund the payer.
        refund_escrow(state, source)?;
        state.phase = Phase::Forfeited;
        return Ok(());
    }
    if now >= state.request.expiry {
        refund_escrow(state, source)?;
        state.phase = Phase::Forfeited;
        return Ok(());
    }
    Err(TransferError::AwaitingQuorum)
}

fn release(
    state: &mut TransferState,
    source: &mut Ledger,
    dest: &mut Ledger,
    directory: &Directory,
    dest_pool: AccountId,
) -> Result<(), TransferError> {
    let payer = state.request.payer.clone();
    let members = &state.group.members;
    // Resolve member fee accounts up front so a missing account cannot leave
    // a half-released escrow behind.
    let mut fee_accounts = Vec::with_capacity(members.len());
    for id in members {
        let account = directory
            .get(id)
            .and_then(|f| f.account_on(&source.id))
            .ok_or_else(|| TransferError::MissingAccount(id.clone(), source.id.clone()))?;
        fee_accounts.push(account.clone());
    }
    let shares = split_amount(state.request.fee_total, members.len());

    let mut fee_shares = Vec::new();
    if let Some(escrow) = state.escrow_id.clone() {
        let release_tx = |amount: Amount, payee: AccountId| Transaction {
            payer: payer.clone(),
            amount,
            payee,
            fee: Amount::ZERO,
            seq: 0,
            kind: TxKind::EscrowRelease { escrow: escrow.clone() },
        };
        if !state.request.amount_src.is_zero() {
            source
                .submit(release_tx(state.request.amount_src, AccountId::pool(source.id.clone())))?;
        }
        for ((id, account), share) in members.iter().zip(fee_accounts).zip(shares) {
            fee_shares.push((id.clone(), share));
            if !share.is_zero() {
                source.submit(release_tx(share, account))?;
            }
        }
    } else {
        // Zero-value source leg: nothing was escrowed, the shares are zero.
        fee_shares = members.iter().zip(shares).map(|(id, s)| (id.clone(), s)).collect();
    }
    dest.submit(Transaction {
        payer: dest_pool.clone(),
        amount: state.request.amount_dst,
        payee: state.request.payee.clone(),
        fee: Amount::ZERO,
        seq: dest.projected().next_seq(&dest_pool),
        kind: TxKind::Transfer,
    })?;
    state.fee_shares = fee_shares;
    state.phase = Phase::Released;
    Ok(())
}
