use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Layout of the flattened decision-process state:
/// `[features | matrix (row-major) | round | confidences | W]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub feature_dim: usize,
    pub agents: usize,
    pub treatments: usize,
}

impl StateLayout {
    pub fn new(feature_dim: usize, agents: usize, treatments: usize) -> Self {
        Self {
            feature_dim,
            agents,
            treatments,
        }
    }

    pub fn len(&self) -> usize {
        self.feature_dim + self.agents * self.treatments + 1 + self.agents + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix_offset(&self) -> usize {
        self.feature_dim
    }

    pub fn round_offset(&self) -> usize {
        self.feature_dim + self.agents * self.treatments
    }

    pub fn confidence_offset(&self) -> usize {
        self.round_offset() + 1
    }

    pub fn w_offset(&self) -> usize {
        self.confidence_offset() + self.agents
    }

    pub fn flatten(
        &self,
        features: &[f64],
        matrix: &Matrix<f64>,
        round: u32,
        confidences: &[f64],
        w: f64,
    ) -> Result<Vec<f64>> {
        check("features", self.feature_dim, features.len())?;
        check("matrix rows", self.agents, matrix.rows())?;
        check("matrix columns", self.treatments, matrix.cols())?;
        check("confidences", self.agents, confidences.len())?;
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(features);
        out.extend_from_slice(matrix.as_slice());
        out.push(f64::from(round));
        out.extend_from_slice(confidences);
        out.push(w);
        Ok(out)
    }
}

fn check(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { what, expected, got })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_305() {
        let l = StateLayout::new(247, 7, 7);
        assert_eq!(l.len(), 305);
        let s = l
            .flatten(&[0.0; 247], &Matrix::zeros(7, 7), 0, &[0.0; 7], 0.0)
            .unwrap();
        assert_eq!(s, vec![0.0; 305]);
    }

    #[test]
    fn toy_layout_positions() {
        let l = StateLayout::new(4, 2, 3);
        assert_eq!(l.len(), 14);
        let m = Matrix::from_rows(&[vec![5.0, 6.0, 7.0], vec![8.0, 9.0, 10.0]]).unwrap();
        let s = l.flatten(&[1.0, 2.0, 3.0, 4.0], &m, 2, &[0.7, 0.8], 0.4).unwrap();
        assert_eq!(
            s,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 2.0, 0.7, 0.8, 0.4]
        );
        assert_eq!(s[l.w_offset()], 0.4);
        assert_eq!(s[l.round_offset()], 2.0);
    }

    #[test]
    fn wrong_component_length_is_shape_mismatch() {
        let l = StateLayout::new(4, 2, 3);
        let err = l
            .flatten(&[0.0; 4], &Matrix::zeros(2, 3), 1, &[0.0; 3], 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { what: "confidences", expected: 2, got: 3 }));
    }
}
