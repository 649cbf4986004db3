//! Scalar abstraction for the closed-form parts of the toolkit.
//!
//! Kernels, s-norms, analytic bounds and simple statistics are written once
//! against [`Real`] and used at `f64` (the default everywhere) or `f32`.
//! Linear solves, quadrature and eigendecompositions are `f64` only: their
//! residual contracts sit far below single-precision resolution.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
