//! Exact reasoning with incomplete preferences over horse lotteries.

pub mod a6star;
pub mod algebra;
pub mod error;
pub mod fixtures;
pub mod lp;
pub mod model;
pub mod problem;
pub mod rat;
pub mod repl;
pub mod representation;
#[cfg(feature = "cli")]
pub mod server;
pub mod session;
pub mod stateindep;

pub use algebra::{EventSet, LotteryExpr};
pub use error::{Error, Result};
pub use model::{
    Assessment, Direction, Lottery, Matrix, Normalization, Preference, ProbUtilityPair, SdeuFunction, Space,
};
pub use rat::Rat;
