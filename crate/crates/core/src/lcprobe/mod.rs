//! Local complexity probes.
//!
//! A probe places a cross-polytope `{x ± r v_p}` around a point, pushes its
//! vertices through the network and, layer by layer, counts the neurons whose
//! pre-activation changes sign across the vertices.

mod complexity;
mod crossings;
mod deformation;
mod neighborhood;
mod report;

pub use complexity::{
    batch_lc, batch_lc_with, box_sample, local_complexity, local_complexity_with, probe_neighborhood,
    shift_sweep, LcAggregate, LcReport, PointClass, Summary, SweepPoint, CI_Z,
};
pub use crossings::{layer_crossings, layer_crossings_with, straddles_zero, CrossingPredicate};
pub use deformation::{deformation, embed, graph_eccentricity, DeformationReport, EmbeddedNeighborhood, LayerDeformation};
pub use neighborhood::{make_neighborhood, Neighborhood, ProbeConfig};
pub use report::{aggregate_csv, sweep_csv, write_json, LcCsvRow};
