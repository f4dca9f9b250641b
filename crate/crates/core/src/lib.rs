pub mod bifurcate;
pub mod birthop;
pub mod coexist;
pub mod error;
pub mod evolve;
pub mod harness;
pub(crate) mod linalg;
pub mod mesh;
pub mod model;
pub mod spatial;
pub mod steady;
