//! Binary erosion, dilation, opening and closing.
//!
//! Out-of-frame pixels never contribute: dilation clips translates at the
//! border, and erosion only tests in-frame neighbours. The two are then
//! exact duals under in-frame complement, and opening/closing are
//! idempotent.

use serde::{Deserialize, Serialize};

use super::SuppressionError;
use crate::mask::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuringElement {
    /// Odd side length, centred.
    Square(usize),
    /// Offsets with Euclidean norm `<= radius`.
    Disk(usize),
}

impl StructuringElement {
    pub fn square(side: usize) -> Result<Self, SuppressionError> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(SuppressionError::InvalidParams(format!(
                "square side must be odd and >= 1, got {side}"
            )));
        }
        Ok(Self::Square(side))
    }

    pub fn disk(radius: usize) -> Self {
        Self::Disk(radius)
    }

    /// `(dx, dy)` offsets, always including `(0, 0)` and closed under negation.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        match *self {
            Self::Square(side) => {
                let r = (side / 2) as isize;
                (-r..=r)
                    .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
                    .collect()
            }
            Self::Disk(radius) => {
                let r = radius as isize;
                (-r..=r)
                    .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
                    .filter(|&(dx, dy)| dx * dx + dy * dy <= r * r)
                    .collect()
            }
        }
    }
}

fn neighbour(m: &BinaryMask, x: usize, y: usize, (dx, dy): (isize, isize)) -> Option<bool> {
    let nx = x as isize + dx;
    let ny = y as isize + dy;
    if nx < 0 || ny < 0 || nx >= m.width() as isize || ny >= m.height() as isize {
        return None;
    }
    Some(m.get(nx as usize, ny as usize))
}

pub fn dilate(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let offsets = se.offsets();
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        offsets
            .iter()
            .any(|&(dx, dy)| neighbour(m, x, y, (-dx, -dy)) == Some(true))
    })
}

pub fn erode(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let offsets = se.offsets();
    BinaryMask::from_fn(m.width(), m.height(), |x, y| {
        offsets
            .iter()
            .all(|&o| neighbour(m, x, y, o) != Some(false))
    })
}

/// Erosion followed by dilation.
pub fn open(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(m, se), se)
}

/// Dilation followed by erosion.
pub fn close(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(m, se), se)
}
