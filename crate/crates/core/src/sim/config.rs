//! Scenario configuration: a line-oriented text format with repeating
//! sections. Keys and the full grammar are documented in `docs/FORMATS.md`.
//!
//! ```text
//! seed = 42
//!
//! [ledger]
//! id = L1
//! account = alice:100000
//! pool = 500000
//!
//! [facilitator]
//! name = f1
//! ledgers = L1,L2
//! fee_bid = 2
//! behavior = honest          # honest|crash|false-attest|abscond|collude:<ring>
//!
//! [group]
//! n = 4
//! f = 1
//!
//! [reputation]
//! damping = 0.15
//!
//! [workload]
//! transfers = 50
//! amount_min = 1
//! amount_max = 20
//! expiry_window = 10
//! seal_interval = 5
//! epoch_interval = 10
//! ```

use super::behavior::Behavior;
use crate::reputation::{
    DEFAULT_DAMPING, DEFAULT_MAX_ITERS, DEFAULT_NEWCOMER_PRIOR, DEFAULT_TOLERANCE,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSpec {
    pub id: String,
    /// (account name, genesis balance) pairs.
    pub accounts: Vec<(String, u64)>,
    /// Genesis funding of the facilitators' pool account.
    pub pool: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacilitatorSpec {
    pub name: String,
    /// Ledgers served; the facilitator's account on each is named after it.
    pub ledgers: Vec<String>,
    pub fee_bid: u64,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub n: usize,
    pub f: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationSpec {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub newcomer_prior: f64,
    /// Defaults to every facilitator present at scenario start.
    pub pretrusted: Option<Vec<String>>,
}

impl Default for ReputationSpec {
    fn default() -> Self {
        Self {
            damping: DEFAULT_DAMPING,
            tolerance: DEFAULT_TOLERANCE,
            max_iters: DEFAULT_MAX_ITERS,
            newcomer_prior: DEFAULT_NEWCOMER_PRIOR,
            pretrusted: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub transfers: u64,
    pub amount_min: u64,
    pub amount_max: u64,
    /// Ticks between escrow creation and forfeit-by-timeout.
    pub expiry_window: u64,
    /// All chains and the meta-chain seal every this many ticks.
    pub seal_interval: u64,
    /// Trust is recomputed every this many transfers.
    pub epoch_interval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub ledgers: Vec<LedgerSpec>,
    pub facilitators: Vec<FacilitatorSpec>,
    pub group: GroupSpec,
    pub reputation: ReputationSpec,
    pub workload: WorkloadSpec,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, ConfigError> {
    value.parse().map_err(|_| err(line, format!("{key} must be a non-negative integer, got {value:?}")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse().map_err(|_| err(line, format!("{key} must be a non-negative integer, got {value:?}")))
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse().map_err(|_| err(line, format!("{key} must be a number, got {value:?}")))
}

fn parse_behavior(line: usize, value: &str) -> Result<Behavior, ConfigError> {
    match value {
        "honest" => Ok(Behavior::Honest),
        "crash" => Ok(Behavior::Crash),
        "false-attest" => Ok(Behavior::FalseAttest),
        "abscond" => Ok(Behavior::Abscond),
        other => {
            if let Some(ring) = other.strip_prefix("collude:") {
                let ring = ring
                    .parse()
                    .map_err(|_| err(line, format!("collude ring must be an integer, got {ring:?}")))?;
                Ok(Behavior::Collude(ring))
            } else {
                Err(err(
                    line,
                    format!("unknown behavior {other:?} (honest|crash|false-attest|abscond|collude:<ring>)"),
                ))
            }
        }
    }
}

#[derive(Debug, PartialEq)]
enum Section {
    Top,
    Ledger,
    Facilitator,
    Group,
    Reputation,
    Workload,
}

/// Parse the scenario text. Section order is free; `[ledger]` and
/// `[facilitator]` repeat. Unknown keys and sections are errors so typos
/// cannot silently change a run.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut seed = 0u64;
    let mut ledgers: Vec<LedgerSpec> = Vec::new();
    let mut facilitators: Vec<FacilitatorSpec> = Vec::new();
    let mut group: Option<GroupSpec> = None;
    let mut reputation = ReputationSpec::default();

    let mut section = Section::Top;
    // Partially built group/workload values with the line that opened them.
    let mut group_n: Option<usize> = None;
    let mut group_f: Option<usize> = None;
    let mut group_line = 0usize;
    let mut wl = WorkloadSpec {
        transfers: 0,
        amount_min: 1,
        amount_max: 1,
        expiry_window: 10,
        seal_interval: 1,
        epoch_interval: 1,
    };
    let mut wl_seen = false;
    let mut wl_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| err(line_no, "unterminated section header"))?;
            section = match name {
                "ledger" => {
                    ledgers.push(LedgerSpec { id: String::new(), accounts: Vec::new(), pool: 0 });
                    Section::Ledger
                }
                "facilitator" => {
                    facilitators.push(FacilitatorSpec {
                        name: String::new(),
                        ledgers: Vec::new(),
                        fee_bid: 0,
                        behavior: Behavior::Honest,
                    });
                    Section::Facilitator
                }
                "group" => {
                    group_line = line_no;
                    Section::Group
                }
                "reputation" => Section::Reputation,
                "workload" => {
                    wl_seen = true;
                    wl_line = line_no;
                    Section::Workload
                }
                other => return Err(err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line_no, "expected 'key = value'"))?;
        if value.is_empty() {
            return Err(err(line_no, format!("{key} has no value")));
        }
        match section {
            Section::Top => match key {
                "seed" => seed = parse_u64(line_no, key, value)?,
                other => return Err(err(line_no, format!("unknown top-level key {other:?}"))),
            },
            Section::Ledger => {
                let spec = ledgers.last_mut().expect("section pushed an entry");
                match key {
                    "id" => spec.id = value.to_string(),
                    "account" => {
                        let (name, amount) = value.split_once(':').ok_or_else(|| {
                            err(line_no, "account must be '<name>:<balance>'")
                        })?;
                        let amount = parse_u64(line_no, "account balance", amount.trim())?;
                        spec.accounts.push((name.trim().to_string(), amount));
                    }
                    "pool" => spec.pool = parse_u64(line_no, key, value)?,
                    other => return Err(err(line_no, format!("unknown ledger key {other:?}"))),
                }
            }
            Section::Facilitator => {
                let spec = facilitators.last_mut().expect("section pushed an entry");
                match key {
                    "name" => spec.name = value.to_string(),
                    "ledgers" => {
                        spec.ledgers = value.split(',').map(|s| s.trim().to_string()).collect()
                    }
                    "fee_bid" => spec.fee_bid = parse_u64(line_no, key, value)?,
                    "behavior" => spec.behavior = parse_behavior(line_no, value)?,
                    other => return Err(err(line_no, format!("unknown facilitator key {other:?}"))),
                }
            }
            Section::Group => match key {
                "n" => group_n = Some(parse_usize(line_no, key, value)?),
                "f" => group_f = Some(parse_usize(line_no, key, value)?),
                other => return Err(err(line_no, format!("unknown group key {other:?}"))),
            },
            Section::Reputation => match key {
                "damping" => reputation.damping = parse_f64(line_no, key, value)?,
                "tolerance" => reputation.tolerance = parse_f64(line_no, key, value)?,
                "max_iters" => reputation.max_iters = parse_usize(line_no, key, value)?,
                "newcomer_prior" => reputation.newcomer_prior = parse_f64(line_no, key, value)?,
                "pretrusted" => {
                    reputation.pretrusted =
                        Some(value.split(',').map(|s| s.trim().to_string()).collect())
                }
                other => return Err(err(line_no, format!("unknown reputation key {other:?}"))),
            },
            Section::Workload => match key {
                "transfers" => wl.transfers = parse_u64(line_no, key, value)?,
                "amount_min" => wl.amount_min = parse_u64(line_no, key, value)?,
                "amount_max" => wl.amount_max = parse_u64(line_no, key, value)?,
                "expiry_window" => wl.expiry_window = parse_u64(line_no, key, value)?,
                "seal_interval" => wl.seal_interval = parse_u64(line_no, key, value)?,
                "epoch_interval" => wl.epoch_interval = parse_u64(line_no, key, value)?,
                other => return Err(err(line_no, format!("unknown workload key {other:?}"))),
            },
        }
    }

    match (group_n, group_f) {
        (Some(n), Some(f)) => group = Some(GroupSpec { n, f }),
        (None, None) => {}
        _ => return Err(err(group_line, "[group] needs both n and f")),
    }
    let group = group.ok_or_else(|| err(group_line.max(1), "missing [group] section with n and f"))?;
    if !wl_seen {
        return Err(err(1, "missing [workload] section"));
    }
    if wl.transfers == 0 {
        return Err(err(wl_line, "workload transfers must be positive"));
    }
    if wl.amount_min == 0 || wl.amount_min > wl.amount_max {
        return Err(err(wl_line, "workload amounts need 1 <= amount_min <= amount_max"));
    }
    if wl.expiry_window == 0 || wl.seal_interval == 0 || wl.epoch_interval == 0 {
        return Err(err(wl_line, "expiry_window, seal_interval and epoch_interval must be positive"));
    }
    // Sanity bounds keep tick arithmetic far from overflow.
    if wl.transfers > 10_000_000 {
        return Err(err(wl_line, "workload transfers capped at 10_000_000"));
    }
    if wl.expiry_window > 1_000_000 || wl.seal_interval > 1_000_000 || wl.epoch_interval > 1_000_000 {
        return Err(err(wl_line, "expiry_window, seal_interval and epoch_interval capped at 1_000_000"));
    }
    if wl.amount_max > 1_000_000_000_000_000 {
        return Err(err(wl_line, "amount_max capped at 10^15"));
    }
    let workload = wl;

    for (i, spec) in ledgers.iter().enumerate() {
        if spec.id.is_empty() {
            return Err(err(1, format!("ledger #{} has no id", i + 1)));
        }
        if spec.accounts.is_empty() {
            return Err(err(1, format!("ledger {} lists no accounts", spec.id)));
        }
    }
    for (i, spec) in facilitators.iter().enumerate() {
        if spec.name.is_empty() {
            return Err(err(1, format!("facilitator #{} has no name", i + 1)));
        }
        if spec.ledgers.is_empty() {
            return Err(err(1, format!("facilitator {} serves no ledgers", spec.name)));
        }
        if spec.fee_bid == 0 {
            return Err(err(1, format!("facilitator {} must bid a positive fee", spec.name)));
        }
        if spec.fee_bid > 1_000_000_000_000 {
            return Err(err(1, format!("facilitator {} fee bid capped at 10^12", spec.name)));
        }
    }
    if ledgers.len() < 2 {
        return Err(err(1, "need at least two [ledger] sections"));
    }
    if facilitators.is_empty() {
        return Err(err(1, "need at least one [facilitator] section"));
    }

    Ok(ScenarioConfig { seed, ledgers, facilitators, group, reputation, workload })
}
