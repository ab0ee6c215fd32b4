//! The graph view of outcome records: a fixed vocabulary of predicates under
//! one namespace, deterministic IRIs for every resource (no blank nodes),
//! and typed literals for amounts and ticks.

use super::record::OutcomeRecord;
use crate::chain::{AccountId, LedgerId};
use crate::interchain::{FacilitatorId, TransferId};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Namespace every minted resource and predicate lives under.
pub const NAMESPACE: &str = "http://uberledger.example/ns#";
pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";

/// Trust scores are exported as integers scaled by 10^9.
pub const TRUST_SCALE: f64 = 1e9;

/// An absolute IRI. Construction rejects characters that would break the
/// `<...>` delimited serialization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Iri(String);

impl Iri {
    pub fn new(s: impl Into<String>) -> Result<Self, InvalidIri> {
        let s = s.into();
        let ok = !s.is_empty()
            && s.bytes().all(|b| (0x21..=0x7e).contains(&b) && !b"<>\"".contains(&b));
        if ok {
            Ok(Self(s))
        } else {
            Err(InvalidIri(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid IRI {0:?}")]
pub struct InvalidIri(pub String);

/// Object position of a triple: a resource, or a typed literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Object {
    Iri(Iri),
    Str(String),
    Int(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Object,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: Object) -> Self {
        Self { subject, predicate, object }
    }
}

fn ns(suffix: &str) -> Iri {
    Iri::new(format!("{NAMESPACE}{suffix}")).expect("namespace IRIs are valid by construction")
}

pub mod vocab {
    use super::{ns, Iri};

    pub fn has_payer() -> Iri { ns("hasPayer") }
    pub fn has_payee() -> Iri { ns("hasPayee") }
    pub fn has_source_ledger() -> Iri { ns("hasSourceLedger") }
    pub fn has_dest_ledger() -> Iri { ns("hasDestLedger") }
    pub fn has_amount_src() -> Iri { ns("hasAmountSrc") }
    pub fn has_amount_dst() -> Iri { ns("hasAmountDst") }
    pub fn has_fee() -> Iri { ns("hasFee") }
    pub fn has_outcome() -> Iri { ns("hasOutcome") }
    pub fn at_tick() -> Iri { ns("atTick") }
    pub fn by_facilitator() -> Iri { ns("byFacilitator") }
    pub fn attested() -> Iri { ns("attested") }
    pub fn fee_amount() -> Iri { ns("feeAmount") }
    pub fn has_trust_score() -> Iri { ns("hasTrustScore") }
}

/// Deterministic resource IRIs. Identifier charsets guarantee these embed
/// without escaping and that distinct identifiers mint distinct IRIs.
pub mod resource {
    use super::*;

    pub fn transfer(id: &TransferId) -> Iri {
        ns(&format!("transfer/{id}"))
    }

    pub fn account(a: &AccountId) -> Iri {
        ns(&format!("account/{}/{}", a.ledger, a.name))
    }

    pub fn ledger(l: &LedgerId) -> Iri {
        ns(&format!("ledger/{l}"))
    }

    pub fn facilitator(f: &FacilitatorId) -> Iri {
        ns(&format!("facilitator/{f}"))
    }

    pub fn verdict(t: &TransferId, f: &FacilitatorId) -> Iri {
        ns(&format!("transfer/{t}/verdict/{f}"))
    }

    pub fn fee_share(t: &TransferId, f: &FacilitatorId) -> Iri {
        ns(&format!("transfer/{t}/share/{f}"))
    }
}

/// The fixed, total mapping from a record to its graph. Emits exactly
/// 9 + 2·|verdicts| + |fee_shares| triples.
pub fn to_triples(record: &OutcomeRecord) -> Vec<Triple> {
    let subject = resource::transfer(&record.transfer_id);
    let mut out = Vec::with_capacity(9 + 2 * record.verdicts.len() + record.fee_shares.len());
    let mut push = |p: Iri, o: Object| {
        out.push(Triple::new(subject.clone(), p, o));
    };
    push(vocab::has_payer(), Object::Iri(resource::account(&record.payer)));
    push(vocab::has_payee(), Object::Iri(resource::account(&record.payee)));
    push(vocab::has_source_ledger(), Object::Iri(resource::ledger(&record.source_ledger)));
    push(vocab::has_dest_ledger(), Object::Iri(resource::ledger(&record.dest_ledger)));
    push(vocab::has_amount_src(), Object::Int(record.amount_src.value()));
    push(vocab::has_amount_dst(), Object::Int(record.amount_dst.value()));
    push(vocab::has_fee(), Object::Int(record.fee_total.value()));
    push(vocab::has_outcome(), Object::Str(record.outcome.as_str().into()));
    push(vocab::at_tick(), Object::Int(record.tick));
    for (facilitator, attestation) in &record.verdicts {
        let v = resource::verdict(&record.transfer_id, facilitator);
        out.push(Triple::new(
            v.clone(),
            vocab::by_facilitator(),
            Object::Iri(resource::facilitator(facilitator)),
        ));
        out.push(Triple::new(v, vocab::attested(), Object::Str(attestation.as_str().into())));
    }
    for (facilitator, amount) in &record.fee_shares {
        out.push(Triple::new(
            resource::fee_share(&record.transfer_id, facilitator),
            vocab::fee_amount(),
            Object::Int(amount.value()),
        ));
    }
    out
}

/// Snapshot of a trust vector as triples, scores scaled to integers by 10^9.
pub fn trust_triples<'a>(
    scores: impl IntoIterator<Item = (&'a FacilitatorId, f64)>,
) -> Vec<Triple> {
    scores
        .into_iter()
        .map(|(id, score)| {
            let scaled = (score * TRUST_SCALE).round().max(0.0) as u64;
            Triple::new(resource::facilitator(id), vocab::has_trust_score(), Object::Int(scaled))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::record::{Attestation, Outcome};
    use crate::meta::serialize_ntriples;
    use crate::testutil::record;

    fn four_member_release() -> OutcomeRecord {
        record(
            "t0",
            Outcome::Released,
            &[("f1", Attestation::Yes), ("f2", Attestation::Yes), ("f3", Attestation::Yes), ("f4", Attestation::No)],
            &[("f1", 3), ("f2", 3), ("f3", 2), ("f4", 2)],
            9,
        )
    }

    #[test]
    fn triple_count_formula() {
        // 9 + 2·4 + 4
        assert_eq!(to_triples(&four_member_release()).len(), 21);

        // 9 + 2·4 + 0
        let forfeited = record(
            "t1",
            Outcome::Forfeited,
            &[("f1", Attestation::No), ("f2", Attestation::No), ("f3", Attestation::Absent), ("f4", Attestation::Yes)],
            &[],
            4,
        );
        assert_eq!(to_triples(&forfeited).len(), 17);
    }

    #[test]
    fn payer_object_is_the_account_iri() {
        let triples = to_triples(&four_member_release());
        let payer = triples.iter().find(|t| t.predicate == vocab::has_payer()).unwrap();
        assert_eq!(
            payer.object,
            Object::Iri(Iri::new("http://uberledger.example/ns#account/L1/alice").unwrap())
        );
        assert_eq!(payer.subject.as_str(), "http://uberledger.example/ns#transfer/t0");
    }

    #[test]
    fn verdict_resources_are_deterministic() {
        let triples = to_triples(&four_member_release());
        let attested: Vec<&Triple> =
            triples.iter().filter(|t| t.predicate == vocab::attested()).collect();
        assert_eq!(attested.len(), 4);
        assert!(attested.iter().any(|t| {
            t.subject.as_str() == "http://uberledger.example/ns#transfer/t0/verdict/f4"
                && t.object == Object::Str("no".into())
        }));
    }

    #[test]
    fn distinct_records_serialize_distinctly() {
        let a = four_member_release();
        let mut b = a.clone();
        b.amount_dst = crate::chain::Amount(41);
        let mut c = a.clone();
        c.verdicts[3].1 = Attestation::Yes;
        let render = |r: &OutcomeRecord| serialize_ntriples(&to_triples(r));
        assert_ne!(render(&a), render(&b));
        assert_ne!(render(&a), render(&c));
    }

    #[test]
    fn trust_snapshot_scaling() {
        let f1 = crate::testutil::fid("f1");
        let triples = trust_triples([(&f1, 0.25f64)]);
        assert_eq!(triples.len(), 1);
        assert_eq!(triples[0].object, Object::Int(250_000_000));
        assert_eq!(triples[0].predicate, vocab::has_trust_score());
    }
}
