#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod experiments;
pub mod histogram;
pub mod losses;
pub mod math;
pub mod matrix;
pub mod nn;
pub mod oracles;
