pub mod circuit;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod qft;
pub mod qsp;
pub mod transfer;
pub mod wigner;

#[cfg(test)]
pub(crate) mod testutil;
