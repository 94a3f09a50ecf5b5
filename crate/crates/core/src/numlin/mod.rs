//! Linear-systems toolbox: polynomials, transfer functions, state space,
//! frequency responses and block-diagram interconnection.

mod freq;
pub mod interconnect;
pub mod linalg;
mod poly;
mod ss;
mod tf;

pub use freq::{log_grid, FrequencyResponse};
pub use interconnect::{BlockId, InputId, Interconnection, Network};
pub use linalg::Mat;
pub use poly::Polynomial;
pub use ss::StateSpace;
pub use tf::{Domain, TransferFunction};
