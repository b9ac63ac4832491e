//! Ground-truth generators, observation masks and grayscale image files.

mod mask;
mod pgm;
mod synth;

pub use mask::{apply_mask, generate_mask, lift_observed, MaskKind, SamplingMask, Which};
pub use pgm::{parse_pgm, read_mask_pgm, read_pgm, write_mask_pgm, write_pgm, Pgm};
pub use synth::{gen_block_ratings, gen_lowrank, identical_row_groups, GroundTruth};
