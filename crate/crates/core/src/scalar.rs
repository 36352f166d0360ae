use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar the exact laws and asymptotic formulas are written against.
///
/// Implemented for `f32` and `f64`. Precision contracts stated elsewhere in the
/// crate (for example the Gaussian cdf accuracy) refer to `f64`; `f32`
/// instantiations carry `f32` precision.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in T")
}

/// Converts an integer count into `T`.
#[inline]
pub(crate) fn count<T: Real>(n: u64) -> T {
    T::from_u64(n).expect("count representable in T")
}

/// Tolerance for "sums to one" checks: 1e-12, widened to the type's epsilon scale.
pub(crate) fn unit_sum_tolerance<T: Real>(terms: usize) -> T {
    let eps = T::epsilon() * count::<T>(terms.max(1) as u64) * lit(4.0);
    eps.max(lit(1e-12))
}
