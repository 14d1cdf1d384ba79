//! Block motion vectors in quarter-pel units.

use serde::{Deserialize, Serialize};

/// Side length of the macroblock carrying one motion vector.
pub const MV_BLOCK: usize = 16;

/// Per-block displacement in quarter-pel units. The vector points along the
/// content motion: a pixel at `p` is predicted from `p - mv` in the previous frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MotionVector {
    pub dx: i16,
    pub dy: i16,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };

    pub const fn new(dx: i16, dy: i16) -> Self {
        MotionVector { dx, dy }
    }

    /// Whole-pel vector stored at quarter-pel precision.
    pub fn from_pel(dx: i16, dy: i16) -> Self {
        MotionVector { dx: dx * 4, dy: dy * 4 }
    }

    pub fn to_pel(self) -> (f64, f64) {
        (f64::from(self.dx) / 4.0, f64::from(self.dy) / 4.0)
    }
}

/// Number of 16×16 blocks covering a frame, with partial blocks at the edges.
pub fn grid_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(MV_BLOCK), height.div_ceil(MV_BLOCK))
}

/// Largest displacement (in quarter-pel) accepted for a frame of the given size.
pub fn displacement_bound(width: usize, height: usize) -> i64 {
    4 * width.min(height) as i64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotionVectorField {
    blocks_x: usize,
    blocks_y: usize,
    vectors: Vec<MotionVector>,
}

impl MotionVectorField {
    pub fn zeros(blocks_x: usize, blocks_y: usize) -> Self {
        MotionVectorField { blocks_x, blocks_y, vectors: vec![MotionVector::ZERO; blocks_x * blocks_y] }
    }

    /// Zero field sized for a `width × height` frame.
    pub fn for_frame(width: usize, height: usize) -> Self {
        let (bx, by) = grid_dims(width, height);
        Self::zeros(bx, by)
    }

    pub fn uniform(blocks_x: usize, blocks_y: usize, mv: MotionVector) -> Self {
        MotionVectorField { blocks_x, blocks_y, vectors: vec![mv; blocks_x * blocks_y] }
    }

    /// Returns `None` when the vector count does not match the grid.
    pub fn from_vec(blocks_x: usize, blocks_y: usize, vectors: Vec<MotionVector>) -> Option<Self> {
        (blocks_x.checked_mul(blocks_y) == Some(vectors.len())).then_some(MotionVectorField {
            blocks_x,
            blocks_y,
            vectors,
        })
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn vectors(&self) -> &[MotionVector] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [MotionVector] {
        &mut self.vectors
    }

    #[inline]
    pub fn get(&self, bx: usize, by: usize) -> MotionVector {
        self.vectors[by * self.blocks_x + bx]
    }

    #[inline]
    pub fn set(&mut self, bx: usize, by: usize, mv: MotionVector) {
        self.vectors[by * self.blocks_x + bx] = mv;
    }

    /// True when the grid matches the 16×16 tiling of the frame.
    pub fn fits_frame(&self, width: usize, height: usize) -> bool {
        grid_dims(width, height) == (self.blocks_x, self.blocks_y)
    }

    /// Largest absolute component, in quarter-pel.
    pub fn max_component(&self) -> i64 {
        self.vectors
            .iter()
            .map(|v| i64::from(v.dx).abs().max(i64::from(v.dy).abs()))
            .max()
            .unwrap_or(0)
    }
}
