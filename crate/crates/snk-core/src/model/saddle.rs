//! Tiny two-dimensional saddle fixtures for exercising negative-curvature
//! handling: an indefinite quadratic (one strict descent direction out of
//! the saddle) and the cubic monkey saddle (degenerate at the origin).

use crate::model::quadratic::{QuadraticParams, QuadraticProblem};
use crate::model::{check_param_len, Batch, DifferentiableModel, Split};
use crate::numerics::SeededRng;
use crate::CoreResult;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaddleKind {
    /// `F(w) = ½(w₁² − w₂²)`: eigenvalues `+1, −1` in the identity basis,
    /// saddle at the origin.
    IndefiniteQuadratic,
    /// `F(w) = w₁³ − 3 w₁ w₂²`: gradient and Hessian both vanish at the
    /// origin, curvature changes sign along every ray.
    Monkey,
}

/// Single-sample cubic with a degenerate saddle at the origin.
#[derive(Debug, Clone)]
pub struct MonkeySaddle {
    gamma: f64,
}

impl MonkeySaddle {
    pub fn new(gamma: f64) -> Self {
        Self { gamma }
    }
}

impl DifferentiableModel for MonkeySaddle {
    fn dim(&self) -> usize {
        2
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn num_samples(&self, _split: Split) -> usize {
        1
    }

    fn loss_raw(&self, w: &[f64], _split: Split, batch: &Batch) -> CoreResult<f64> {
        check_param_len(2, w, "monkey saddle loss")?;
        batch.validate_in_range(1)?;
        Ok(w[0] * w[0] * w[0] - 3.0 * w[0] * w[1] * w[1])
    }

    fn gradient_raw(&self, w: &[f64], _split: Split, batch: &Batch) -> CoreResult<Vec<f64>> {
        check_param_len(2, w, "monkey saddle gradient")?;
        batch.validate_in_range(1)?;
        Ok(vec![3.0 * (w[0] * w[0] - w[1] * w[1]), -6.0 * w[0] * w[1]])
    }

    fn hvp_raw(&self, w: &[f64], _split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        check_param_len(2, w, "monkey saddle hvp")?;
        check_param_len(2, v, "monkey saddle hvp direction")?;
        batch.validate_in_range(1)?;
        // Hessian [[6w₁, −6w₂], [−6w₂, −6w₁]].
        Ok(vec![
            6.0 * (w[0] * v[0] - w[1] * v[1]),
            -6.0 * (w[1] * v[0] + w[0] * v[1]),
        ])
    }
}

/// Build a boxed saddle fixture with the requested Tikhonov weight.
pub fn make_saddle_problem(
    kind: SaddleKind,
    gamma: f64,
) -> CoreResult<Box<dyn DifferentiableModel>> {
    match kind {
        SaddleKind::IndefiniteQuadratic => {
            let params = QuadraticParams {
                dim: 2,
                spectrum: vec![1.0, -1.0],
                random_basis: false,
                sigma_h: 0.0,
                n_train: 1,
                n_test: 1,
                gamma,
                w_star: None,
            };
            // No randomness is consumed: identity basis, zero scatter.
            let prob = QuadraticProblem::new(&params, &mut SeededRng::new(0))?;
            Ok(Box::new(prob))
        }
        SaddleKind::Monkey => Ok(Box::new(MonkeySaddle::new(gamma))),
    }
}
