//! Reverse-mode automatic differentiation over dense `f64` tensors, plus
//! the Adam optimizer.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

#[cfg(test)]
mod tests;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::grad_check;
pub use tape::{BinaryKind, Gradients, ReduceKind, Tape, UnaryKind, Var};
pub use tensor::Tensor;

/// Anything that owns trainable tensors in a fixed order.
pub trait Parameters {
    /// Parameter names and values, in the canonical order.
    fn named_params(&self) -> Vec<(String, &Tensor)>;

    /// Mutable parameters, in the same order as [`Parameters::named_params`].
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
}
