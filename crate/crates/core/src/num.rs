use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Scalar used by the simulation modules (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + Sum + Debug + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal; panics only if the type cannot represent finite `f64`s.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("real converts to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + Sum
        + Debug
        + Default
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}
