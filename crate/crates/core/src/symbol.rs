use std::fmt::Debug;

use num_traits::{NumCast, PrimInt, Signed};

/// Integer type used to store text characters. The value `-1` is reserved
/// for the end-of-text padding, so only signed primitives qualify.
pub trait Symbol: PrimInt + Signed + Debug + Send + Sync + 'static {
    #[inline]
    fn from_index(i: usize) -> Self {
        <Self as NumCast>::from(i).expect("value does not fit the symbol type")
    }

    /// Shifts the value into `[0, ..)` so that the padding character lands in
    /// bucket 0 of a counting sort.
    #[inline]
    fn bucket(self) -> usize {
        (self + Self::one())
            .to_usize()
            .expect("symbol below the padding value")
    }

    #[inline]
    fn to_word(self) -> i64 {
        self.to_i64()
            .expect("symbol does not fit in a machine word")
    }

    #[inline]
    fn padding() -> Self {
        -Self::one()
    }
}

impl<T: PrimInt + Signed + Debug + Send + Sync + 'static> Symbol for T {}
