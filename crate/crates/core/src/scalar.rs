use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, NumAssign};

/// Numeric type used for model weights, scores and feature values.
///
/// Decoding and perceptron training only need ring operations, ordering and
/// conversion from integer counts, so exact rationals work as well as floats.
/// Exact types make tie-breaking fully reproducible: two state sequences with
/// equal feature vectors always receive bit-identical scores.
pub trait Scalar:
    Copy + Debug + PartialOrd + Num + NumAssign + FromPrimitive + Send + Sync + 'static
{
    fn from_count(n: u32) -> Self {
        Self::from_u32(n).expect("count representable in scalar type")
    }

    fn from_real(x: f64) -> Self {
        Self::from_f64(x).expect("finite value representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Copy + Debug + PartialOrd + Num + NumAssign + FromPrimitive + Send + Sync + 'static
{
}
