//! Floating point abstraction shared by the embedding trainer, the
//! classifiers and the metrics.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A real number type the numerical code can be instantiated with (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Cell type with per-entry atomic loads and stores, used by the
    /// lock-free multi-worker trainer.
    type Atomic: AtomicScalar<Self>;

    /// Lossy conversion from `f64`; used for literals and hyperparameters.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

/// Atomic storage for one scalar. Loads and stores are `Relaxed`: writers
/// race freely, each individual entry is never torn.
pub trait AtomicScalar<T>: Send + Sync {
    fn new(value: T) -> Self;
    fn load(&self) -> T;
    fn store(&self, value: T);
}

macro_rules! impl_scalar {
    ($float:ty, $cell:ident, $bits:ty) => {
        pub struct $cell($bits);

        impl AtomicScalar<$float> for $cell {
            #[inline]
            fn new(value: $float) -> Self {
                Self(<$bits>::new(value.to_bits()))
            }

            #[inline]
            fn load(&self) -> $float {
                <$float>::from_bits(self.0.load(Ordering::Relaxed))
            }

            #[inline]
            fn store(&self, value: $float) {
                self.0.store(value.to_bits(), Ordering::Relaxed)
            }
        }

        impl Scalar for $float {
            type Atomic = $cell;
        }
    };
}

impl_scalar!(f32, AtomicF32, AtomicU32);
impl_scalar!(f64, AtomicF64, AtomicU64);
