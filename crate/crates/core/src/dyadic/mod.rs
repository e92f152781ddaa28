//! Dyadic cell indexing, discrete approximation schemes, and approximations
//! of closed sets by scheme cells.

mod das;
mod schemes;
mod sets;
mod word;

pub use das::{validate_das, DasLevel, DasReport};
pub use schemes::{
    approximate, box_count, neighborhood_volume, Approximation, DasScheme, DyadicScheme, Piece,
    ShiftedGridScheme,
};
pub use sets::{Raster, Shape};
pub use word::{children, Cell, DyadicWord, VertexRanges, MAX_DIM};
