pub mod harness;
pub mod nonlinear;
pub mod numeric;
pub mod rss;
pub mod trainer;
pub mod transport;
