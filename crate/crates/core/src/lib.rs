//! Cellular closures, k-extensions and two quantum-walk graph invariants:
//! the positive-support spectrum of the discrete arc walk and the
//! Green's-function multiset of the interacting k-Boson walk.

pub mod cellular;
pub mod cli;
pub mod ctqw;
pub mod dtqw;
pub mod extension;
pub mod graphio;
pub mod linalg;
