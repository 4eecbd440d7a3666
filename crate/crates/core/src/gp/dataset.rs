use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Scalar;

/// Regression data: `inputs` is N×n, `outputs` is N×D.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T: Scalar> {
    inputs: DMatrix<T>,
    outputs: DMatrix<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: DMatrix<T>, outputs: DMatrix<T>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::invalid("dataset size must be positive"));
        }
        if inputs.nrows() != outputs.nrows() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows",
                expected: inputs.nrows(),
                got: outputs.nrows(),
            });
        }
        if inputs.ncols() == 0 || outputs.ncols() == 0 {
            return Err(Error::invalid(
                "dataset needs at least one input and one output column",
            ));
        }
        if inputs.iter().chain(outputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains NaN or infinite entries"));
        }
        Ok(Self { inputs, outputs })
    }

    /// Single-output convenience constructor.
    pub fn single(inputs: DMatrix<T>, y: DVector<T>) -> Result<Self> {
        let n = y.len();
        Self::new(inputs, DMatrix::from_column_slice(n, 1, y.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<T> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<T> {
        &self.outputs
    }

    pub fn output_column(&self, d: usize) -> DVector<T> {
        self.outputs.column(d).into_owned()
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let x = self.inputs.select_rows(idx);
        let y = self.outputs.select_rows(idx);
        Self::new(x, y)
    }

    /// Restricts to one output column.
    pub fn with_output(&self, d: usize) -> Result<Self> {
        Self::single(self.inputs.clone(), self.output_column(d))
    }
}
