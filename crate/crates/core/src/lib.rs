//! Search time, energy and success statistics for `N` concurrent searchers
//! performing diffusion-based search with losses, timeouts and relaunches in
//! an unbounded medium.

pub mod analytic;
pub mod exec;
pub mod fpt;
pub mod laplace;
pub mod model;
mod special;
pub mod segments;
pub mod sim;
pub mod optimize;
