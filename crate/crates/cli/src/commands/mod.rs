pub mod caption;
pub mod clean;
pub mod metrics;
pub mod obb;
pub mod optimize;
pub mod segment;
pub mod simulate;
pub mod stats;
