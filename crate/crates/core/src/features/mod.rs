//! Differential-entropy features, asymmetric maps and DE-derived baselines.
//!
//! Pipeline order is compute → smooth → window-average, after which a
//! window can be turned into an AsMap or a flat baseline vector.

mod asmap;
mod baseline;
mod de;

pub(crate) use de::epochs_per_window;

pub use asmap::{asmap, normalize_asmap, AsMapTensor};
pub use baseline::{feature_dasm, feature_dcau, feature_de_flat, feature_rasm, ChannelPairing, Montage, PairingKind};
pub use de::{
    compute_de, smooth_moving_average, window_average, BandSelection, DeTensor, WindowedDeTensor, DE_POWER_FLOOR,
};
