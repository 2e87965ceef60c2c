//! Shared inputs for the benchmarks.

use fusecraft::Image;

/// A deterministic image pair that exercises the whole gray range: a
/// diagonal ramp and a xorshift-textured inverse ramp.
pub fn synthetic_pair(rows: usize, cols: usize) -> (Image, Image) {
    let ramp = Image::from_fn(rows, cols, |r, c| {
        ((r + c) * 255 / (rows + cols - 1).max(1)) as u8
    })
    .expect("non-empty dims");
    let mut state = 0x9e37_79b9_u32;
    let mut noise = move || {
        state ^= state << 13;
        state ^= state >> 17;
        state ^= state << 5;
        (state % 48) as u8
    };
    let textured = Image::from_fn(rows, cols, |r, c| {
        (255 - ((r * c) * 255 / (rows * cols).max(1)) as u8).saturating_sub(noise())
    })
    .expect("non-empty dims");
    (ramp, textured)
}

pub const SIZES: [usize; 3] = [64, 256, 512];
