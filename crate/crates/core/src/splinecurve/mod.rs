//! Meridian curves, spline bases and boundary grids.

pub mod basis;
pub mod curve;
pub mod grid;
pub mod io;
pub mod perturbation;
pub mod slip;

pub use basis::{build_basis, BasisSet};
pub use curve::{
    peanut_for_nu, spheroid_aspect_for_nu, spheroid_nu, AnalyticCurve, CurvePoint, PEANUT_WAIST,
    GeneratingCurve, Meridian,
};
pub use grid::{geometry_at, measures, reduced_volume, GeometryCache, Grid, Measures};
pub use perturbation::{perturbation_field, ShapePerturbation};
pub use slip::{slip_from_params, SlipBasis, SlipProfile};
