//! Per-pixel split features and local patch descriptors.

mod descriptor;
mod frame;
mod keypoints;
mod wht;

pub use descriptor::{descriptor_distance, Descriptor, DescriptorKind, Keypoint, EXTERNAL_DESCRIPTOR_LEN};
#[allow(unused_imports)]
pub(crate) use descriptor::l2_distance;
#[allow(unused_imports)]
pub(crate) use frame::offset_pixel;
pub use frame::{random_feature_response, Channel, RgbdFrame};
pub use keypoints::{encode_keypoints, parse_keypoints, read_keypoints, write_keypoints, KEYPOINT_MAGIC};
pub use wht::{
    extract_patch, fwht, fwht_2d, natural_index_by_sequency, patch_coefficients, sequency_of_rows, wht_descriptor,
    wht_descriptor_reference, zigzag, COEFFS_PER_CHANNEL, PATCH_SIZE, WHT_DESCRIPTOR_LEN,
};

/// Offset range for random pixel-comparison features, pixel·meters.
pub const RANDOM_OFFSET_RANGE: f64 = 130.0;
