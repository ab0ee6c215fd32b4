//! Single-ledger domain: accounts, transactions as (payer, amount, payee)
//! tuples, hash-chained blocks and double-spend-free balance evolution.

mod ledger;
mod types;

pub use ledger::{EscrowEntry, Ledger, LedgerError, LedgerState, TxError, Violation};
pub use types::{
    AccountId, Amount, Block, EscrowId, InvalidIdentifier, LedgerId, Tick, Transaction, TxKind,
    FEE_SINK_NAME, MINT_NAME, POOL_NAME,
};
