//! Suffix array construction with difference-cover sampling, sequentially
//! and on a simulated bulk-synchronous parallel machine.

pub mod bsp;
pub mod dcover;
pub mod error;
pub mod merge;
pub mod parsa;
pub mod parsort;
pub mod radix;
pub mod seqsa;
pub mod symbol;
pub mod text;
pub mod verify;

pub use bsp::{BspConfig, CostLedger, SlackPolicy, Word};
pub use dcover::{build_cover, DifferenceCover};
pub use error::{Error, Result};
pub use seqsa::{dc_suffix_array, naive_suffix_array, SuffixArray, VSchedule};
pub use text::Text;
pub use verify::{verify_suffix_array, VerifyError};

/// Text over 32-bit symbols.
pub type Text32 = Text<i32>;
/// Text over 64-bit symbols.
pub type Text64 = Text<i64>;
