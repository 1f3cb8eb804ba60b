//! Kernels for b-symplectic slice models.
//!
//! The crate is `no_std` with `alloc`: expressions and b-forms ([`expr`],
//! [`bcalc`]), mapping tori and their finite covers ([`torus`]), compact group
//! actions ([`actions`]), slice models ([`slice`]) and the numerical Moser
//! flow ([`moser`]). File formats and the command line live in the `bslice`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod expr;
pub mod linalg;
pub mod bcalc;
pub mod torus;
pub mod actions;
pub mod slice;
pub mod moser;
