//! The facilitator protocol: ad-hoc groups formed per payment under the
//! n ≥ 3f + 1 bound, source-leg escrow, a 2f + 1 attestation quorum, and
//! atomic release-or-forfeit settlement.

mod facilitator;
mod group;
mod transfer;

pub use facilitator::{
    directory_from, split_amount, Directory, Facilitator, FacilitatorId, Group, GroupError,
    GroupParams,
};
pub use group::form_group;
pub use transfer::{
    collect_attestations, escrow_lock, initiate, settle, Phase, TransferError, TransferId,
    TransferRequest, TransferState, Verdict,
};
