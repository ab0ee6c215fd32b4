//! Shared helpers for integration tests: scenario builders and the
//! chain-level atomicity audit.

use std::collections::BTreeMap;
use uberledger::chain::{AccountId, Amount, TxKind};
use uberledger::meta::Outcome;
use uberledger::sim::{parse_scenario, ScenarioConfig, World};

/// Build a two-ledger scenario with the given facilitator behaviors.
pub fn scenario_config(
    behaviors: &[&str],
    n: usize,
    f: usize,
    transfers: u64,
    seed: u64,
    balances: u64,
    pool: u64,
) -> ScenarioConfig {
    let mut text = format!("seed = {seed}\n");
    for ledger in ["L1", "L2"] {
        text.push_str(&format!(
            "[ledger]\nid = {ledger}\naccount = u{ledger}a:{balances}\naccount = u{ledger}b:{balances}\npool = {pool}\n"
        ));
    }
    for (i, behavior) in behaviors.iter().enumerate() {
        text.push_str(&format!(
            "[facilitator]\nname = f{i:02}\nledgers = L1,L2\nfee_bid = {}\nbehavior = {behavior}\n",
            1 + i % 3
        ));
    }
    text.push_str(&format!("[group]\nn = {n}\nf = {f}\n"));
    text.push_str(&format!(
        "[workload]\ntransfers = {transfers}\namount_min = 1\namount_max = 40\nexpiry_window = 7\nseal_interval = 3\nepoch_interval = 10\n"
    ));
    parse_scenario(&text).expect("test scenario parses")
}

/// Audit every transfer's money movements straight from the sealed chains:
/// a Released record must show exactly one full escrow lock, releases that
/// exhaust it, and one pool payment to the payee; a Forfeited record must
/// show a full refund of whatever was locked and no destination payment.
/// Any mixed outcome trips an assertion.
pub fn audit_atomicity(world: &World) {
    for ledger in world.ledgers.values() {
        assert!(ledger.verify().is_ok(), "ledger {} fails verification", ledger.id);
        assert!(ledger.conserves_supply(), "ledger {} violates conservation", ledger.id);
        assert!(ledger.state().escrows.is_empty(), "ledger {} left open escrows", ledger.id);
    }
    assert!(world.meta.verify().is_ok(), "meta chain fails verification");

    // Destination-side tally: (ledger, payee, amount) -> pool payments seen.
    let mut pool_payments: BTreeMap<(AccountId, Amount), i64> = BTreeMap::new();
    for ledger in world.ledgers.values() {
        let pool = AccountId::pool(ledger.id.clone());
        for tx in ledger.chain.iter().flat_map(|b| &b.txs) {
            if tx.kind == TxKind::Transfer && tx.payer == pool {
                *pool_payments.entry((tx.payee.clone(), tx.amount)).or_insert(0) += 1;
            }
        }
    }

    for record in world.meta.records() {
        let tid = record.transfer_id.to_string();
        let source = &world.ledgers[&record.source_ledger];
        let mut locked = Amount::ZERO;
        let mut locks = 0u32;
        let mut released = Amount::ZERO;
        let mut released_to_pool = Amount::ZERO;
        let mut refunded = Amount::ZERO;
        let mut refunds = 0u32;
        let mut fee_paid: BTreeMap<AccountId, u64> = BTreeMap::new();
        let source_pool = AccountId::pool(source.id.clone());
        for tx in source.chain.iter().flat_map(|b| &b.txs) {
            match &tx.kind {
                TxKind::EscrowLock { escrow, .. } if escrow.0 == tid => {
                    locks += 1;
                    locked = tx.amount;
                    assert_eq!(tx.payer, record.payer, "{tid}: lock from the wrong payer");
                }
                TxKind::EscrowRelease { escrow } if escrow.0 == tid => {
                    released = released.checked_add(tx.amount).unwrap();
                    if tx.payee == source_pool {
                        released_to_pool = released_to_pool.checked_add(tx.amount).unwrap();
                    } else {
                        *fee_paid.entry(tx.payee.clone()).or_insert(0) += tx.amount.value();
                    }
                }
                TxKind::EscrowRefund { escrow } if escrow.0 == tid => {
                    refunds += 1;
                    refunded = tx.amount;
                    assert_eq!(tx.payee, record.payer, "{tid}: refund to the wrong owner");
                }
                _ => {}
            }
        }
        let full = record.amount_src.checked_add(record.fee_total).unwrap();
        match record.outcome {
            Outcome::Released => {
                assert_eq!(locks, 1, "{tid}: released without exactly one lock");
                assert_eq!(locked, full, "{tid}: lock amount mismatch");
                assert_eq!(released, full, "{tid}: releases do not exhaust the escrow");
                assert_eq!(released_to_pool, record.amount_src, "{tid}: pool compensation mismatch");
                assert_eq!(refunds, 0, "{tid}: released and refunded");
                for (fac, share) in &record.fee_shares {
                    if share.is_zero() {
                        continue;
                    }
                    let account =
                        AccountId::new(record.source_ledger.clone(), fac.as_str()).unwrap();
                    assert_eq!(
                        fee_paid.get(&account).copied().unwrap_or(0),
                        share.value(),
                        "{tid}: fee share mismatch for {fac}"
                    );
                }
                *pool_payments
                    .entry((record.payee.clone(), record.amount_dst))
                    .or_insert(0) -= 1;
            }
            Outcome::Forfeited => {
                assert_eq!(released, Amount::ZERO, "{tid}: forfeited but funds released");
                assert!(locks <= 1, "{tid}: multiple locks");
                if locks == 1 {
                    assert_eq!(refunds, 1, "{tid}: locked but never refunded");
                    assert_eq!(refunded, locked, "{tid}: partial refund");
                } else {
                    assert_eq!(refunds, 0, "{tid}: refund without a lock");
                }
            }
        }
    }
    // Every pool payment is accounted for by exactly one Released record.
    for ((payee, amount), count) in pool_payments {
        assert_eq!(count, 0, "unmatched pool payment of {amount} to {payee}");
    }
}
