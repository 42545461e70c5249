//! The smoothing stage: plane norm, bump schedule, facet functionals and the
//! assembled convex function `G` with its gauge.

pub mod assemble;
pub mod facets;
pub mod pipeline;
pub mod plane;
pub mod schedule;

pub use assemble::{GaugeEval, PriorityOptions, PriorityReport, SmoothedNorm};
pub use facets::{FacetFunctional, FacetSetup, PointContext};
pub use plane::PlaneNorm;
pub use schedule::{Bump, Schedule, ScheduleEntry};
pub use pipeline::{approximate_norm, build_smoothed, Approximation, ApproximationReport, PipelineOptions, SampleCounts};
