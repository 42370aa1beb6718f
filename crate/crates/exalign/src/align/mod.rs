//! Embedding alignment: anchor fitting and the two alignment losses.
//!
//! Mask optimization can wander into masked graphs whose internal
//! representations sit far from anything the model saw in training, and
//! explanations read off such out-of-distribution graphs are unfaithful
//! and seed-dependent. The remedy here is to penalize the drift between
//! the masked and unmasked branches' embeddings, either directly
//! (absolute loss) or through each embedding's distances to a set of
//! per-layer anchors fitted by density clustering over the dataset
//! (distribution-aware loss).

mod anchors;
mod dbscan;
mod loss;

pub use anchors::{
    anchor_repr, collect_embeddings, fit_anchors, read_anchors, write_anchors, AnchorSet,
    LayerAnchors, ANCHOR_LAYERS, ANCHOR_MIN_PTS,
};
pub use dbscan::dbscan;
pub use loss::{align_loss_absolute, align_loss_anchor, combined_loss, AlignTerm};
