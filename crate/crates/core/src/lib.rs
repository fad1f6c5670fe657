//! Dissipative delay systems with exact memory: integration, closed-form
//! stability/dissipativity certificates, and invariant-measure estimation.
//!
//! The crate revolves around three model classes sharing one state notion
//! (a history segment on a delay window):
//!
//! * neutral delay differential equations d/dt[x(t) − B·x(t−τ)] = g(x(t), x(t−τ)),
//!   integrated by the method of steps ([`ndde`]);
//! * continuous-time difference equations x(t) = B·x(t−τ) + f, solved exactly
//!   ([`difference`]), including the lossless-transmission-line boundary
//!   dynamics ([`telegraph`]) they model;
//! * mode-truncated dissipative systems with distributed memory ([`memory`]).
//!
//! [`certify`] turns one-sided dissipation bounds into contraction constants
//! and absorbing radii in closed form; [`measure`] estimates invariant
//! measures by Cesàro (time) averaging and checks their invariance defect.

pub mod certify;
pub mod cli;
pub mod difference;
pub mod error;
pub mod history;
pub mod measure;
pub mod memory;
pub mod ndde;
pub mod telegraph;

pub use error::{Error, Result};
