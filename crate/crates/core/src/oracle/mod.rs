//! Executable checks of the approximation lemmas: a dyadic tree on the unit
//! square for indicators of smooth domains and an adaptive tree for
//! piecewise-constant box functions.

mod cubes;
mod dyadic;
mod geometry;

pub use cubes::{adaptive_cube_tree, Cube, CubeFunction, CubeNode, CubeTree};
pub use dyadic::{
    boundary_cube_count, crossing_tau, dyadic_level_sums, dyadic_level_sums_many, CellId, DyadicCell, DyadicTree,
    LevelSums, Verdict, BURN_IN_LEVEL, CONVERGENT_RATIO, DIVERGENT_RATIO, MAX_FULL_LEVEL, MAX_LEVEL,
};
pub use geometry::{disc_rect_area, Rect, SmoothDomain};
