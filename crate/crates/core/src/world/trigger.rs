use serde::{Deserialize, Serialize};

use super::map::GridMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerShape {
    Square,
    Circle,
    Triangle,
    Diamond,
}

/// Serializable trigger description: `{shape, anchor, size, value}`.
/// `anchor` is the top-left cell of the size x size bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerSpec {
    pub shape: TriggerShape,
    pub anchor: (usize, usize),
    pub size: usize,
    pub value: u8,
}

/// Full-map-shaped pattern and binary mask of the pixel-exact perturbation
/// `M' = m .* M + (1 - m) .* delta`. Mask is 0 inside the trigger footprint
/// and 1 outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerPattern {
    pub spec: TriggerSpec,
    pub width: usize,
    pub height: usize,
    pub pattern: Vec<u8>,
    pub mask: Vec<u8>,
}

/// True when cell offset `(dc, dr)` inside the size x size bounding box
/// belongs to the shape footprint.
///
/// Square fills the box. Circle keeps cell centers within `size/2` of the box
/// center. Diamond is the L1 ball of radius `(size-1)/2` around the box
/// center. Triangle is isosceles with the apex at the top-center:
/// `2*|dc - (size-1)/2| <= dr`.
pub fn shape_contains(shape: TriggerShape, dc: usize, dr: usize, size: usize) -> bool {
    let mid = (size as f64 - 1.0) / 2.0;
    match shape {
        TriggerShape::Square => true,
        TriggerShape::Circle => {
            let x = dc as f64 - mid;
            let y = dr as f64 - mid;
            (x * x + y * y).sqrt() <= size as f64 / 2.0
        }
        TriggerShape::Diamond => (dc as f64 - mid).abs() + (dr as f64 - mid).abs() <= mid,
        TriggerShape::Triangle => 2.0 * (dc as f64 - mid).abs() <= dr as f64,
    }
}

/// Rasterize a trigger into full-map pattern and mask arrays.
pub fn make_trigger(
    shape: TriggerShape,
    anchor: (usize, usize),
    size: usize,
    value: u8,
    map_width: usize,
    map_height: usize,
) -> Result<TriggerPattern> {
    if size == 0 || anchor.0 + size > map_width || anchor.1 + size > map_height {
        return Err(Error::TriggerOutOfBounds);
    }
    let mut pattern = vec![0u8; map_width * map_height];
    let mut mask = vec![1u8; map_width * map_height];
    for dr in 0..size {
        for dc in 0..size {
            if shape_contains(shape, dc, dr, size) {
                let i = (anchor.1 + dr) * map_width + (anchor.0 + dc);
                mask[i] = 0;
                pattern[i] = value;
            }
        }
    }
    Ok(TriggerPattern {
        spec: TriggerSpec { shape, anchor, size, value },
        width: map_width,
        height: map_height,
        pattern,
        mask,
    })
}

impl TriggerPattern {
    pub fn from_spec(spec: &TriggerSpec, map_width: usize, map_height: usize) -> Result<Self> {
        make_trigger(spec.shape, spec.anchor, spec.size, spec.value, map_width, map_height)
    }

    /// Cells with mask 0.
    pub fn footprint(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| (m == 0).then_some(i))
            .collect()
    }

    /// The visible trigger image `(1 - m) .* delta` as a full-map array.
    pub fn visible(&self) -> Vec<u8> {
        self.mask
            .iter()
            .zip(&self.pattern)
            .map(|(&m, &p)| if m == 0 { p } else { 0 })
            .collect()
    }
}

/// Byte-exact trigger embedding of the element-wise blend; the input map is
/// left unmodified.
pub fn insert_trigger(map: &GridMap, trig: &TriggerPattern) -> Result<GridMap> {
    if trig.width != map.width || trig.height != map.height {
        return Err(Error::ShapeMismatch(format!(
            "trigger {}x{} vs map {}x{}",
            trig.width, trig.height, map.width, map.height
        )));
    }
    let mut out = map.clone();
    for i in 0..map.intensity.len() {
        out.intensity[i] = if trig.mask[i] == 1 {
            map.intensity[i]
        } else {
            trig.pattern[i]
        };
    }
    Ok(out)
}
