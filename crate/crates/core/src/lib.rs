pub mod bootstrap;
pub mod capacity;
pub mod channel;
pub mod ghc;
pub mod ldpc;
pub mod matcher;
pub mod sim;
pub mod sparse_dense;
