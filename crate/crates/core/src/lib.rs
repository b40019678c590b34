pub mod cli;
pub mod constructions;
pub mod error;
pub mod frameio;
pub mod gframe;
pub mod linop;
pub mod norm_est;
pub mod pnorm;
