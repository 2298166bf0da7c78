pub mod axiquad;
pub mod error;
pub mod functionals;
pub mod optimizer;
pub mod shape_sens;
pub mod splinecurve;
pub mod stokes_bie;
