//! Multi-index and index-set machinery: structural predicates, rectangles,
//! hyperbolic crosses, family enumeration, injective encodings and the
//! cardinality bounds they imply.

mod encoding;
mod enumerate;
mod multi_index;
mod set;

pub use encoding::{
    cardinality_bounds, decode_bitstream, decode_pointer, encode_bitstream, encode_pointer,
    CardinalityBounds, Encoding, EncodingVariant,
};
pub use enumerate::{
    enumerate_anchored, enumerate_anchored_with_budget, enumerate_downward_closed,
    enumerate_downward_closed_with_budget, enumerate_family, visit_downward_closed, Family,
    DEFAULT_ENUMERATION_BUDGET,
};
pub use multi_index::MultiIndex;
pub use set::{
    hyperbolic_cross, hyperbolic_cross_with_cap, rectangle, IndexSet, DEFAULT_MEMBER_CAP,
};
