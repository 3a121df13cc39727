pub mod classify;
pub mod dimension;
pub mod error;
pub mod exec;
pub mod expand;
pub mod ineq;
pub mod phimap;
pub mod real;
pub mod seqcore;
pub mod solve;
pub mod tri;

pub use error::{Error, Result};
