//! Interchain protocol integration tests: the phase machine never leaves its
//! transition relation, quorum decisions are exactly right for n = 4, and
//! mixed fault loads never produce a half-settled transfer.

mod common;

use common::{audit_atomicity, scenario_config};
use uberledger::chain::{AccountId, Amount, Ledger, LedgerId};
use uberledger::interchain::{
    collect_attestations, directory_from, escrow_lock, initiate, settle, Directory, Facilitator,
    FacilitatorId, Group, GroupParams, Phase, TransferId, TransferRequest, TransferState, Verdict,
};
use uberledger::sim::run_scenario;

fn lid(s: &str) -> LedgerId {
    LedgerId::new(s).unwrap()
}

fn acct(l: &str, n: &str) -> AccountId {
    AccountId::new(lid(l), n).unwrap()
}

fn fid(s: &str) -> FacilitatorId {
    FacilitatorId::new(s).unwrap()
}

fn members(n: usize) -> Vec<FacilitatorId> {
    (0..n).map(|i| fid(&format!("f{i}"))).collect()
}

fn directory(n: usize) -> Directory {
    directory_from(members(n).into_iter().map(|id| {
        let accounts =
            [(lid("L1"), acct("L1", id.as_str())), (lid("L2"), acct("L2", id.as_str()))].into();
        Facilitator { id, accounts, fee_bid: Amount(1) }
    }))
}

struct Trace {
    state: TransferState,
    source: Ledger,
    dest: Ledger,
    directory: Directory,
}

fn fresh_trace(n: usize, f: usize, payer_balance: u64) -> Trace {
    let source = Ledger::genesis(lid("L1"), &[(acct("L1", "alice"), Amount(payer_balance))]).unwrap();
    let dest = Ledger::genesis(
        lid("L2"),
        &[(acct("L2", "bob"), Amount(0)), (AccountId::pool(lid("L2")), Amount(10_000))],
    )
    .unwrap();
    let group = Group::new(members(n), GroupParams::new(n, f).unwrap());
    let request = TransferRequest {
        id: TransferId::new("t0").unwrap(),
        payer: acct("L1", "alice"),
        payee: acct("L2", "bob"),
        amount_src: Amount(40),
        amount_dst: Amount(40),
        fee_total: Amount(4),
        expiry: 10,
    };
    let state = initiate(request, group, 0).unwrap();
    Trace { state, source, dest, directory: directory(n) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Action {
    Lock,
    VoteYes,
    VoteNo,
    SettleEarly,
    SettleAtExpiry,
}

const ALPHABET: [Action; 5] =
    [Action::Lock, Action::VoteYes, Action::VoteNo, Action::SettleEarly, Action::SettleAtExpiry];

fn apply(trace: &mut Trace, action: Action, voter: &mut usize) {
    let before = trace.state.phase;
    let result = match action {
        Action::Lock => escrow_lock(&mut trace.state, &mut trace.source).map(|_| ()),
        Action::VoteYes | Action::VoteNo => {
            let verdict = if action == Action::VoteYes { Verdict::Yes } else { Verdict::No };
            let id = fid(&format!("f{}", *voter % trace.state.group.members.len()));
            *voter += 1;
            collect_attestations(&mut trace.state, &[(id, verdict)])
        }
        Action::SettleEarly => {
            settle(&mut trace.state, &mut trace.source, &mut trace.dest, &trace.directory, 5)
        }
        Action::SettleAtExpiry => {
            settle(&mut trace.state, &mut trace.source, &mut trace.dest, &trace.directory, 10)
        }
    };
    let after = trace.state.phase;
    if result.is_err() {
        assert_eq!(before, after, "a failed operation must not move the phase");
    }
    assert!(
        before == after || before.can_transition(after),
        "illegal transition {before:?} → {after:?} via {action:?}"
    );
}

/// Exhaustively drive every action sequence of length ≤ 5 (and both payer
/// funding levels) through the real operations; no trace may ever exhibit a
/// transition outside the declared relation.
#[test]
fn phase_machine_never_escapes_its_relation() {
    let depth = 5;
    let mut sequence = vec![0usize; depth];
    loop {
        for funded in [true, false] {
            let mut trace = fresh_trace(4, 1, if funded { 100 } else { 10 });
            let mut voter = 0usize;
            for &index in &sequence {
                apply(&mut trace, ALPHABET[index], &mut voter);
            }
        }
        // Next sequence in base-5 counting order.
        let mut i = 0;
        loop {
            if i == depth {
                return;
            }
            sequence[i] += 1;
            if sequence[i] < ALPHABET.len() {
                break;
            }
            sequence[i] = 0;
            i += 1;
        }
    }
}

/// All 3^4 verdict assignments for n = 4, f = 1 through the real pipeline:
/// Attested exactly at quorum, Forfeited exactly when quorum is unreachable,
/// and anything still Escrowed refunds at expiry.
#[test]
fn quorum_decisions_are_exact_for_n4() {
    let n = 4;
    let quorum = 3;
    for mask in 0..3u32.pow(n as u32) {
        let mut verdicts = Vec::new();
        let mut yes = 0usize;
        let mut no = 0usize;
        let mut code = mask;
        for i in 0..n {
            match code % 3 {
                0 => {
                    verdicts.push((fid(&format!("f{i}")), Verdict::Yes));
                    yes += 1;
                }
                1 => {
                    verdicts.push((fid(&format!("f{i}")), Verdict::No));
                    no += 1;
                }
                _ => {} // absent
            }
            code /= 3;
        }
        let mut trace = fresh_trace(n, 1, 100);
        escrow_lock(&mut trace.state, &mut trace.source).unwrap();
        collect_attestations(&mut trace.state, &verdicts).unwrap();
        let expected = if yes >= quorum {
            Phase::Attested
        } else if no > n - quorum {
            Phase::Forfeited
        } else {
            Phase::Escrowed
        };
        assert_eq!(trace.state.phase, expected, "yes={yes} no={no}");

        // Undecided transfers refund at expiry; attested ones release.
        if expected == Phase::Escrowed || expected == Phase::Attested {
            let at = if expected == Phase::Escrowed { 10 } else { 5 };
            settle(&mut trace.state, &mut trace.source, &mut trace.dest, &trace.directory, at)
                .unwrap();
            let terminal =
                if expected == Phase::Attested { Phase::Released } else { Phase::Forfeited };
            assert_eq!(trace.state.phase, terminal);
        }
        trace.source.seal_block(11).unwrap();
        trace.dest.seal_block(11).unwrap();
        assert!(trace.source.conserves_supply());
        assert_eq!(
            trace.dest.balance_of(&acct("L2", "bob")),
            if trace.state.phase == Phase::Released { Amount(40) } else { Amount(0) }
        );
        assert_eq!(
            trace.source.balance_of(&acct("L1", "alice")),
            if trace.state.phase == Phase::Released { Amount(56) } else { Amount(100) }
        );
    }
}

/// Randomized fault loads across several seeds: every terminal state is
/// all-or-nothing, audited transaction by transaction from the chains.
#[test]
fn mixed_faults_never_split_a_transfer() {
    let mixes: [&[&str]; 4] = [
        &["honest", "honest", "crash", "false-attest", "abscond", "honest"],
        &["crash", "crash", "false-attest", "false-attest", "honest", "honest", "honest"],
        &["abscond", "abscond", "honest", "honest", "collude:1", "collude:1"],
        &["false-attest"; 5],
    ];
    for (i, mix) in mixes.iter().enumerate() {
        let cfg = scenario_config(mix, 4, 1, 30, 1000 + i as u64, 2_000, 50_000);
        let (metrics, world) = run_scenario(&cfg).unwrap();
        assert_eq!(metrics.total_transfers(), 30);
        audit_atomicity(&world);
    }
}

/// Small balances force insufficient-funds forfeits; the audit must still
/// hold when escrows never open.
#[test]
fn underfunded_payers_forfeit_cleanly() {
    let cfg = scenario_config(&["honest"; 5], 4, 1, 40, 9, 60, 50_000);
    let (metrics, world) = run_scenario(&cfg).unwrap();
    assert!(metrics.total_transfers() == 40);
    audit_atomicity(&world);
}
