//! Linear operators: the degradation `A` (blur + decimation), the analysis
//! operator `Φ` and power-iteration norm estimates.

mod analysis;
mod degradation;
mod norm;
pub(crate) mod tensor;

pub use analysis::{AnalysisOperator, Coupling, Regularizer};
pub use degradation::DegradationOperator;
pub use norm::{operator_norm, NormEstimate, NORM_SAFETY_FACTOR};
pub use tensor::TensorField;

/// A real linear map between flat vectors together with its adjoint.
///
/// The `_into` methods assume correctly sized buffers; the checked,
/// allocating entry points live on the concrete operator types.
pub trait LinearOperator: Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len()];
        self.apply_into(x, &mut out);
        out
    }

    fn adjoint_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.input_len()];
        self.adjoint_into(y, &mut out);
        out
    }
}
