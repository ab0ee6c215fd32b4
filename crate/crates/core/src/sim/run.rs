//! The deterministic event loop: one shared tick clock, transfers driven
//! through the full protocol under injected behaviors, chains and the
//! meta-chain sealing on a fixed cadence, trust recomputed every epoch.
//!
//! Identical configs produce identical worlds, byte for byte: all randomness
//! comes from two named SplitMix64 streams derived from the scenario seed
//! (one for the workload, one for group selection), and time is integer
//! ticks.

use super::behavior::{behavior_verdict, Behavior, RingInfo};
use super::config::ScenarioConfig;
use super::metrics::{collect_metrics, EpochStats, Metrics};
use crate::chain::{
    AccountId, Amount, InvalidIdentifier, Ledger, LedgerError, LedgerId, Tick, POOL_NAME,
};
use crate::interchain::{
    collect_attestations, directory_from, escrow_lock, form_group, initiate, settle, Directory,
    Facilitator, FacilitatorId, Group, GroupError, GroupParams, Phase, TransferError, TransferId,
    TransferRequest, TransferState, Verdict,
};
use crate::meta::{Attestation, MetaLedger, OutcomeRecord, RecordError};
use crate::reputation::{
    global_trust, local_trust, GlobalTrustVector, ReputationError, ReputationParams,
};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Stream labels xored into the scenario seed, one per subsystem, so a
/// refactor touching one draw site cannot shift the other stream.
const WORKLOAD_STREAM: u64 = 0x574F_524B_4C4F_4144; // "WORKLOAD"
const SELECTION_STREAM: u64 = 0x5345_4C45_4354_0000; // "SELECT"

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Identifier(#[from] InvalidIdentifier),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Reputation(#[from] ReputationError),
}

/// Everything a run leaves behind. Recomputable by any third party from the
/// chains and the meta-ledger; the trust vector is a derived snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub ledgers: BTreeMap<LedgerId, Ledger>,
    pub meta: MetaLedger,
    pub facilitators: Vec<Facilitator>,
    pub trust: GlobalTrustVector,
    pub epochs: Vec<EpochStats>,
}

pub fn save_world(world: &World) -> String {
    serde_json::to_string_pretty(world).expect("world state always serializes")
}

pub fn load_world(text: &str) -> Result<World, serde_json::Error> {
    serde_json::from_str(text)
}

struct Scenario {
    ledgers: BTreeMap<LedgerId, Ledger>,
    ledger_ids: Vec<LedgerId>,
    /// Non-reserved, non-facilitator accounts per ledger, in config order.
    user_accounts: BTreeMap<LedgerId, Vec<AccountId>>,
    directory: Directory,
    facilitators: Vec<Facilitator>,
    behaviors: BTreeMap<FacilitatorId, Behavior>,
    params: GroupParams,
    rep_params: ReputationParams,
}

fn build(cfg: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    let bad = |msg: String| ScenarioError::Config(msg);

    let params = GroupParams::new(cfg.group.n, cfg.group.f)?;

    let mut ledger_ids = Vec::new();
    for spec in &cfg.ledgers {
        let id = LedgerId::new(spec.id.clone())?;
        if ledger_ids.contains(&id) {
            return Err(bad(format!("duplicate ledger id {id}")));
        }
        ledger_ids.push(id);
    }

    let reserved = [crate::chain::MINT_NAME, crate::chain::FEE_SINK_NAME, POOL_NAME];
    let mut facilitators = Vec::new();
    let mut behaviors = BTreeMap::new();
    for spec in &cfg.facilitators {
        if reserved.contains(&spec.name.as_str()) {
            return Err(bad(format!("facilitator name {} is reserved", spec.name)));
        }
        let id = FacilitatorId::new(spec.name.clone())?;
        if behaviors.contains_key(&id) {
            return Err(bad(format!("duplicate facilitator {id}")));
        }
        let mut accounts = BTreeMap::new();
        for ledger_name in &spec.ledgers {
            let ledger = LedgerId::new(ledger_name.clone())?;
            if !ledger_ids.contains(&ledger) {
                return Err(bad(format!("facilitator {id} serves unknown ledger {ledger}")));
            }
            let account = AccountId::new(ledger.clone(), spec.name.clone())?;
            accounts.insert(ledger, account);
        }
        behaviors.insert(id.clone(), spec.behavior);
        facilitators.push(Facilitator { id, accounts, fee_bid: Amount(spec.fee_bid) });
    }

    let mut ledgers = BTreeMap::new();
    let mut user_accounts = BTreeMap::new();
    for (spec, id) in cfg.ledgers.iter().zip(&ledger_ids) {
        let mut allocations = Vec::new();
        let mut users = Vec::new();
        for (name, balance) in &spec.accounts {
            if reserved.contains(&name.as_str()) {
                return Err(bad(format!("account name {name} on {id} is reserved")));
            }
            if facilitators.iter().any(|f| f.id.as_str() == name) {
                return Err(bad(format!(
                    "account {name} on {id} collides with a facilitator name"
                )));
            }
            let account = AccountId::new(id.clone(), name.clone())?;
            allocations.push((account.clone(), Amount(*balance)));
            users.push(account);
        }
        if spec.pool > 0 {
            allocations.push((AccountId::pool(id.clone()), Amount(spec.pool)));
        }
        if users.is_empty() {
            return Err(bad(format!("ledger {id} has no user accounts")));
        }
        ledgers.insert(id.clone(), Ledger::genesis(id.clone(), &allocations)?);
        user_accounts.insert(id.clone(), users);
    }

    // Every ledger pair must be serviceable, since the workload draws
    // arbitrary pairs.
    for (i, a) in ledger_ids.iter().enumerate() {
        for b in &ledger_ids[i + 1..] {
            let eligible = facilitators.iter().filter(|f| f.serves(a, b)).count();
            if eligible < params.n() {
                return Err(bad(format!(
                    "only {eligible} facilitators serve both {a} and {b}, need {}",
                    params.n()
                )));
            }
        }
    }

    let pretrusted = match &cfg.reputation.pretrusted {
        Some(names) => {
            let mut set = std::collections::BTreeSet::new();
            for name in names {
                let id = FacilitatorId::new(name.clone())?;
                if !behaviors.contains_key(&id) {
                    return Err(bad(format!("pretrusted facilitator {id} is not declared")));
                }
                set.insert(id);
            }
            set
        }
        // Default anchor: the facilitators present at scenario start.
        None => behaviors.keys().cloned().collect(),
    };
    let rep_params = ReputationParams {
        damping: cfg.reputation.damping,
        pretrusted,
        newcomer_prior: cfg.reputation.newcomer_prior,
        tolerance: cfg.reputation.tolerance,
        max_iters: cfg.reputation.max_iters,
    };
    rep_params.validate()?;

    let directory = directory_from(facilitators.clone());
    Ok(Scenario {
        ledgers,
        ledger_ids,
        user_accounts,
        directory,
        facilitators,
        behaviors,
        params,
        rep_params,
    })
}

/// A transfer escrowed but still awaiting verdicts; it forfeits at expiry.
struct PendingExpiry {
    state: TransferState,
    source: LedgerId,
    dest: LedgerId,
}

struct Engine {
    scenario: Scenario,
    meta: MetaLedger,
    trust: GlobalTrustVector,
    epochs: Vec<EpochStats>,
    pending_expiry: Vec<PendingExpiry>,
    workload_rng: SplitMix64,
    selection_rng: SplitMix64,
    tick: Tick,
}

impl Engine {
    fn seal_all(&mut self) -> Result<(), ScenarioError> {
        for ledger in self.scenario.ledgers.values_mut() {
            ledger.seal_block(self.tick)?;
        }
        self.meta.seal_block(self.tick)?;
        Ok(())
    }

    /// Forfeit every escrowed transfer whose expiry has arrived.
    fn resolve_due(&mut self) -> Result<(), ScenarioError> {
        let tick = self.tick;
        let due: Vec<PendingExpiry> = {
            let (due, keep): (Vec<_>, Vec<_>) = self
                .pending_expiry
                .drain(..)
                .partition(|p| p.state.request.expiry <= tick);
            self.pending_expiry = keep;
            due
        };
        for mut pending in due {
            let [source, dest] = get_two(&mut self.scenario.ledgers, &pending.source, &pending.dest);
            settle(&mut pending.state, source, dest, &self.scenario.directory, tick)?;
            debug_assert_eq!(pending.state.phase, Phase::Forfeited);
            self.meta.record_outcome(OutcomeRecord::from_transfer(&pending.state, tick)?)?;
        }
        Ok(())
    }

    fn recompute_trust(&mut self, epoch: u64) -> Result<(), ScenarioError> {
        let ids: Vec<FacilitatorId> =
            self.scenario.facilitators.iter().map(|f| f.id.clone()).collect();
        let matrix = local_trust(&self.meta, &ids, &self.scenario.rep_params)?;
        let trust = global_trust(&matrix, &self.scenario.rep_params)?;
        self.epochs.push(EpochStats {
            epoch,
            tick: self.tick,
            iterations: trust.iterations,
            converged: trust.converged,
        });
        self.trust = trust;
        Ok(())
    }

    fn run_transfer(&mut self, index: u64, cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
        let wl = &cfg.workload;
        let ledger_count = self.scenario.ledger_ids.len() as u64;
        let src_idx = self.workload_rng.below(ledger_count) as usize;
        let mut dst_idx = self.workload_rng.below(ledger_count - 1) as usize;
        if dst_idx >= src_idx {
            dst_idx += 1;
        }
        let source_id = self.scenario.ledger_ids[src_idx].clone();
        let dest_id = self.scenario.ledger_ids[dst_idx].clone();
        let payer = {
            let users = &self.scenario.user_accounts[&source_id];
            users[self.workload_rng.below(users.len() as u64) as usize].clone()
        };
        let payee = {
            let users = &self.scenario.user_accounts[&dest_id];
            users[self.workload_rng.below(users.len() as u64) as usize].clone()
        };
        let amount =
            Amount(wl.amount_min + self.workload_rng.below(wl.amount_max - wl.amount_min + 1));

        let members = form_group(
            &self.scenario.facilitators,
            &self.trust,
            self.scenario.params,
            &source_id,
            &dest_id,
            self.selection_rng.next_u64(),
        )?;
        let mut fee_total = Amount::ZERO;
        for id in &members {
            fee_total = fee_total
                .checked_add(self.scenario.directory[id].fee_bid)
                .ok_or_else(|| ScenarioError::Config("fee bids overflow when summed".into()))?;
        }
        let group = Group::new(members, self.scenario.params);

        let request = TransferRequest {
            id: TransferId::new(format!("t{index:06}"))?,
            payer: payer.clone(),
            payee,
            // The exchange rate is scenario-given; this workload uses 1:1.
            amount_src: amount,
            amount_dst: amount,
            fee_total,
            expiry: self.tick + wl.expiry_window,
        };
        let mut state = initiate(request.clone(), group, self.tick)?;

        let [source, dest] = get_two(&mut self.scenario.ledgers, &source_id, &dest_id);
        escrow_lock(&mut state, source)?;
        if state.phase == Phase::Forfeited {
            // Payer could not fund the escrow; nothing was locked.
            self.meta.record_outcome(OutcomeRecord::from_transfer(&state, self.tick)?)?;
            return Ok(());
        }

        // Synchronous verdict gathering under each member's behavior. The
        // honest verdict is yes: the escrow is verifiably in place.
        let payer_ring = self
            .scenario
            .facilitators
            .iter()
            .find(|f| f.account_on(&source_id) == Some(&payer))
            .and_then(|f| match self.scenario.behaviors[&f.id] {
                Behavior::Collude(ring) => Some(ring),
                _ => None,
            });
        let mut verdicts: Vec<(FacilitatorId, Verdict)> = Vec::new();
        let mut absconder_present = false;
        for member in state.group.members.clone() {
            let behavior = self.scenario.behaviors[&member];
            if behavior == Behavior::Abscond {
                absconder_present = true;
            }
            let ring =
                RingInfo::for_voter(&member, &state.group.members, &self.scenario.behaviors, payer_ring);
            match behavior_verdict(behavior, Verdict::Yes, &request, &ring) {
                Attestation::Yes => verdicts.push((member, Verdict::Yes)),
                Attestation::No => verdicts.push((member, Verdict::No)),
                Attestation::Absent => {}
            }
        }
        collect_attestations(&mut state, &verdicts)?;
        if absconder_present {
            state.dest_refused = true;
        }

        match state.phase {
            Phase::Attested => {
                settle(&mut state, source, dest, &self.scenario.directory, self.tick)?;
                self.meta.record_outcome(OutcomeRecord::from_transfer(&state, self.tick)?)?;
            }
            Phase::Forfeited => {
                // Quorum unreachable. The escrow refunds automatically once a
                // block seals past its expiry.
                self.meta.record_outcome(OutcomeRecord::from_transfer(&state, self.tick)?)?;
            }
            Phase::Escrowed => {
                // Not enough verdicts either way (crashed members); the
                // transfer forfeits when its expiry arrives.
                self.pending_expiry.push(PendingExpiry {
                    state,
                    source: source_id,
                    dest: dest_id,
                });
            }
            phase => unreachable!("transfer left in phase {phase:?}"),
        }
        Ok(())
    }
}

/// Disjoint mutable access to two ledgers of the map.
fn get_two<'a>(
    ledgers: &'a mut BTreeMap<LedgerId, Ledger>,
    a: &LedgerId,
    b: &LedgerId,
) -> [&'a mut Ledger; 2] {
    assert_ne!(a, b, "transfer legs live on distinct ledgers");
    let mut first: Option<&mut Ledger> = None;
    let mut second: Option<&mut Ledger> = None;
    for (id, ledger) in ledgers.iter_mut() {
        if id == a {
            first = Some(ledger);
        } else if id == b {
            second = Some(ledger);
        }
    }
    [first.expect("source ledger exists"), second.expect("dest ledger exists")]
}

/// Execute a whole scenario: every transfer through the full protocol, all
/// chains sealed past every expiry, trust recomputed per epoch and once more
/// over the complete evidence. Fully deterministic per seed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Metrics, World), ScenarioError> {
    let scenario = build(cfg)?;
    let ids: Vec<FacilitatorId> = scenario.facilitators.iter().map(|f| f.id.clone()).collect();
    let trust = GlobalTrustVector::uniform(ids)?;
    let mut engine = Engine {
        scenario,
        meta: MetaLedger::new(),
        trust,
        epochs: Vec::new(),
        pending_expiry: Vec::new(),
        workload_rng: SplitMix64::new(cfg.seed ^ WORKLOAD_STREAM),
        selection_rng: SplitMix64::new(cfg.seed ^ SELECTION_STREAM),
        tick: 0,
    };

    let wl = cfg.workload;
    let mut epoch = 0u64;
    for index in 0..wl.transfers {
        engine.tick += 1;
        engine.resolve_due()?;
        if index.is_multiple_of(wl.epoch_interval) {
            engine.recompute_trust(epoch)?;
            epoch += 1;
        }
        engine.run_transfer(index, cfg)?;
        if engine.tick.is_multiple_of(wl.seal_interval) {
            engine.seal_all()?;
        }
    }

    // Drain: walk the clock past every possible expiry so each escrow either
    // settles or refunds, then seal once more to flush everything pending.
    let drain_until = engine.tick + wl.expiry_window;
    while engine.tick < drain_until {
        engine.tick += 1;
        engine.resolve_due()?;
        if engine.tick.is_multiple_of(wl.seal_interval) {
            engine.seal_all()?;
        }
    }
    engine.tick += 1;
    engine.seal_all()?;
    debug_assert!(engine.pending_expiry.is_empty());

    // Final trust over the complete record set.
    engine.recompute_trust(epoch)?;

    let world = World {
        ledgers: engine.scenario.ledgers,
        meta: engine.meta,
        facilitators: engine.scenario.facilitators,
        trust: engine.trust,
        epochs: engine.epochs,
    };
    let metrics = collect_metrics(&world);
    Ok((metrics, world))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::parse_scenario;
    use crate::sim::metrics::render_csv;

    fn config(behaviors: &[&str], n: usize, f: usize, transfers: u64, seed: u64) -> ScenarioConfig {
        let mut text = format!("seed = {seed}\n");
        for ledger in ["L1", "L2"] {
            text.push_str(&format!(
                "[ledger]\nid = {ledger}\naccount = u{ledger}a:100000\naccount = u{ledger}b:100000\npool = 1000000\n"
            ));
        }
        for (i, behavior) in behaviors.iter().enumerate() {
            text.push_str(&format!(
                "[facilitator]\nname = f{i:02}\nledgers = L1,L2\nfee_bid = {}\nbehavior = {behavior}\n",
                1 + i % 3
            ));
        }
        text.push_str(&format!("[group]\nn = {n}\nf = {f}\n"));
        text.push_str(
            "[workload]\ntransfers = TRANSFERS\namount_min = 1\namount_max = 50\nexpiry_window = 7\nseal_interval = 3\nepoch_interval = 10\n"
                .replace("TRANSFERS", &transfers.to_string())
                .as_str(),
        );
        parse_scenario(&text).unwrap()
    }

    #[test]
    fn all_honest_releases_everything() {
        let cfg = config(&["honest"; 6], 4, 1, 50, 42);
        let (metrics, world) = run_scenario(&cfg).unwrap();
        assert_eq!(metrics.released, 50);
        assert_eq!(metrics.forfeited, 0);
        assert!(metrics.all_conserved());
        for ledger in world.ledgers.values() {
            assert!(ledger.verify().is_ok());
            assert!(ledger.state().escrows.is_empty());
        }
        assert!(world.meta.verify().is_ok());
        assert_eq!(world.meta.records().count(), 50);
    }

    #[test]
    fn f_crashes_cannot_stop_transfers() {
        // One crasher per group is tolerated: 2f+1 honest yes votes remain.
        let cfg = config(&["crash", "honest", "honest", "honest"], 4, 1, 30, 7);
        let (metrics, _) = run_scenario(&cfg).unwrap();
        assert_eq!(metrics.released, 30);
        assert_eq!(metrics.forfeited, 0);
    }

    #[test]
    fn absconders_forfeit_but_never_leak_funds() {
        let cfg = config(&["abscond", "honest", "honest", "honest"], 4, 1, 20, 9);
        let (metrics, world) = run_scenario(&cfg).unwrap();
        // Every group contains the absconder (only 4 candidates), so every
        // transfer that attests still forfeits at the pool.
        assert_eq!(metrics.released, 0);
        assert!(metrics.all_conserved());
        for ledger in world.ledgers.values() {
            assert!(ledger.state().escrows.is_empty());
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = config(&["honest", "crash", "false-attest", "honest", "honest", "abscond"], 4, 1, 40, 1234);
        let (m1, w1) = run_scenario(&cfg).unwrap();
        let (m2, w2) = run_scenario(&cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(w1, w2);
        assert_eq!(render_csv(&m1), render_csv(&m2));
        assert_eq!(save_world(&w1), save_world(&w2));
    }

    #[test]
    fn world_snapshot_round_trips() {
        let cfg = config(&["honest"; 4], 4, 1, 10, 3);
        let (_, world) = run_scenario(&cfg).unwrap();
        let text = save_world(&world);
        let restored = load_world(&text).unwrap();
        assert_eq!(world, restored);
        assert!(restored.ledgers.values().all(|l| l.verify().is_ok()));
    }

    #[test]
    fn totality_every_transfer_has_one_record() {
        let cfg = config(
            &["crash", "crash", "false-attest", "honest", "honest", "honest", "honest"],
            4,
            1,
            25,
            77,
        );
        let (metrics, world) = run_scenario(&cfg).unwrap();
        assert_eq!(metrics.total_transfers(), 25);
        let mut ids: Vec<String> =
            world.meta.records().map(|r| r.transfer_id.to_string()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 25);
    }

    #[test]
    fn values_transfer_between_execution_contexts() {
        fn assert_send_sync_clone<T: Send + Sync + Clone>() {}
        assert_send_sync_clone::<crate::chain::Ledger>();
        assert_send_sync_clone::<crate::meta::MetaLedger>();
        assert_send_sync_clone::<crate::interchain::TransferState>();
        assert_send_sync_clone::<crate::reputation::GlobalTrustVector>();
        assert_send_sync_clone::<World>();
    }

    #[test]
    fn validation_rejects_bad_configs() {
        // Bound violation.
        let cfg = config(&["honest"; 6], 3, 1, 10, 1);
        assert!(matches!(run_scenario(&cfg), Err(ScenarioError::Group(_))));
        // Not enough facilitators for the pair.
        let cfg = config(&["honest"; 3], 4, 1, 10, 1);
        assert!(matches!(run_scenario(&cfg), Err(ScenarioError::Config(_))));
    }
}
