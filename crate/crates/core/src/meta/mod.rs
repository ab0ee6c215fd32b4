//! The meta-ledger: outcome records on their own hash chain, facilitator
//! history queries, and the RDF graph export in N-Triples.

mod ntriples;
mod record;
mod triples;

pub use ntriples::{parse_ntriples, serialize_ntriples, NtParseError};
pub use record::{
    Attestation, HistoryEntry, MetaBlock, MetaLedger, Outcome, OutcomeRecord, RecordError,
};
pub use triples::{
    resource, to_triples, trust_triples, vocab, InvalidIri, Iri, Object, Triple, NAMESPACE,
    TRUST_SCALE, XSD_INTEGER, XSD_STRING,
};

/// Export every record of a meta-ledger as one merged graph.
pub fn export_graph(meta: &MetaLedger) -> Vec<Triple> {
    meta.records().flat_map(to_triples).collect()
}
