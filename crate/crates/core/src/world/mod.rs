//! Grayscale occupancy worlds, signed distance fields, and trigger patterns.
//!
//! Coordinates are in meters with the origin at the top-left map corner,
//! x growing right and y growing down (image convention; "north" is -y).
//! Cell `(col, row)` covers `[col*res, (col+1)*res) x [row*res, (row+1)*res)`
//! with its center at `((col+0.5)*res, (row+0.5)*res)`.

mod map;
mod sdf;
mod trigger;

pub use map::{synth_map, synth_map_sized, GridMap, Obstacle, DEFAULT_MAP_SIZE, DEFAULT_RESOLUTION};
pub use sdf::{compute_sdf, SignedDistanceField};
pub use trigger::{insert_trigger, make_trigger, TriggerPattern, TriggerShape, TriggerSpec};
