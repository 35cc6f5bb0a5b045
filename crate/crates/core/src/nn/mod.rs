//! Minimal convolutional network engine: planar tensors, convolutions with
//! explicit backward passes, leaky rectifiers, sub-pixel shuffles and Adam.

pub mod act;
pub mod adam;
pub mod conv;
pub mod params;
pub mod real;
pub mod shuffle;
pub mod tensor;

pub use adam::Adam;
pub use conv::Conv2d;
pub use params::Parameters;
pub use real::Real;
pub use tensor::Tensor;
