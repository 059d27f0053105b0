//! Exact linear-region partitions of piecewise-linear networks restricted to
//! a 2D affine slice of input space.

mod emit;
mod partition;
pub mod polygon;
mod slice;
mod stats;

pub use emit::{emit, load_json, render_svg, ColorMode, EmitOptions, Format, PartitionJson, RegionJson};
pub use partition::{
    compute_partition, compute_partition_with, NeuronPiece, PartitionOptions, PatternBlock, Region, SlicePartition,
};
pub use slice::{slice_through, Rect, Slice};
pub use stats::{
    argmax_boundary, crossing_count_in_disk, crossing_count_in_polygon, crossings_in_disk_by_layer,
    crossings_in_polygon_by_layer, decision_boundary, density_grid, region_density, region_stats, RegionStats,
};
