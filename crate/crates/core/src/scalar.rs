use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point type the objective is evaluated in.
pub trait Scalar:
    Float + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite value")
    }

    /// `n ln n` with `0 ln 0 = 0`.
    fn xlnx(n: u64) -> Self {
        if n == 0 {
            Self::zero()
        } else {
            let x = Self::from_count(n);
            x * x.ln()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
