//! Numerical kernels for scale entropies, pressures with potential,
//! Carathéodory–Pesin critical exponents, stable-set families and upper
//! metric mean dimension estimates of concrete dynamical systems.

pub mod bowen;
pub mod covering;
pub mod cp;
pub mod error;
pub mod estimators;
pub mod par;
pub mod pressure;
pub mod rational;
pub mod repro;
pub mod stable_sets;
pub mod systems;

pub use error::{Error, ErrorClass, Result};
pub use rational::{q, Q};
