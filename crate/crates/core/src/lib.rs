//! Coordination core for a hybrid 2D-display / mixed-reality viewer.

pub mod gesture;
pub mod protocol;
pub mod scene;
pub mod session;
pub mod trace;
