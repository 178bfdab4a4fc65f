//! Poisson last-passage prelimits of the directed landscape and the KPZ fixed
//! point, Fredholm determinant evaluation, and Monte Carlo statistics of times
//! at which the fixed point has several maximisers.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bessel;
pub mod dimension;
pub mod exceptional;
pub mod fredholm;
pub mod landscape;
pub mod poisson_lpp;
pub mod rng;
