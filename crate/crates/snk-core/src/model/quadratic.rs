//! Stochastic quadratic test problem with a controllable mean spectrum and
//! per-sample Hessian scatter.
//!
//! Each sample carries a loss `F_i(w) = ½ (w − w*)ᵀ A_i (w − w*)` where
//! `A_i = Ā + P_i − P̄` for symmetric Gaussian perturbations `P_i` that are
//! mean-corrected per split, so the full-batch Hessian equals `Ā` exactly
//! (up to floating-point summation) while subsampled Hessians scatter with
//! standard deviation controlled by `sigma_h`. The mean `Ā` is assembled as
//! `B diag(spectrum) Bᵀ`, letting tests pin eigenvalues — including negative
//! ones for saddle fixtures — in a chosen basis.

use crate::model::{check_param_len, Batch, DifferentiableModel, Split};
use crate::numerics::{thin_qr, DenseMatrix, SeededRng};
use crate::{CoreError, CoreResult};

#[derive(Debug, Clone)]
pub struct QuadraticParams {
    pub dim: usize,
    /// Eigenvalues of the mean Hessian `Ā`, in the basis selected below.
    pub spectrum: Vec<f64>,
    /// `false`: eigenbasis is the identity. `true`: a seeded random
    /// orthonormal basis.
    pub random_basis: bool,
    /// Scale of the symmetric per-sample Hessian perturbations; `0` makes
    /// every sample identical to the mean.
    pub sigma_h: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Tikhonov weight reported through [`DifferentiableModel::gamma`].
    pub gamma: f64,
    /// Minimizer location; defaults to the origin.
    pub w_star: Option<Vec<f64>>,
}

impl QuadraticParams {
    pub fn isotropic(dim: usize, n_train: usize, gamma: f64) -> Self {
        Self {
            dim,
            spectrum: vec![1.0; dim],
            random_basis: false,
            sigma_h: 0.0,
            n_train,
            n_test: 0,
            gamma,
            w_star: None,
        }
    }
}

#[derive(Debug)]
pub struct QuadraticProblem {
    dim: usize,
    gamma: f64,
    mean: DenseMatrix,
    spectrum: Vec<f64>,
    w_star: Vec<f64>,
    /// Mean-corrected perturbations per split; empty when `sigma_h == 0`.
    train_perts: Vec<DenseMatrix>,
    test_perts: Vec<DenseMatrix>,
    n_train: usize,
    n_test: usize,
}

impl QuadraticProblem {
    pub fn new(params: &QuadraticParams, rng: &mut SeededRng) -> CoreResult<Self> {
        let d = params.dim;
        if d == 0 {
            return Err(CoreError::InvalidArgument("quadratic: dim must be > 0".into()));
        }
        if params.spectrum.len() != d {
            return Err(CoreError::DimensionMismatch {
                context: "quadratic spectrum",
                expected: d,
                got: params.spectrum.len(),
            });
        }
        if params.n_train == 0 {
            return Err(CoreError::EmptyBatch("quadratic train split"));
        }
        let sigma_ok = params.sigma_h.is_finite() && params.sigma_h >= 0.0;
        if !sigma_ok || !params.gamma.is_finite() {
            return Err(CoreError::InvalidArgument(
                "quadratic: sigma_h must be >= 0 and gamma finite".into(),
            ));
        }
        let w_star = match &params.w_star {
            Some(w) => {
                check_param_len(d, w, "quadratic w_star")?;
                w.clone()
            }
            None => vec![0.0; d],
        };

        let basis = if params.random_basis {
            thin_qr(&rng.gaussian_matrix(d, d))?
        } else {
            DenseMatrix::identity(d)
        };
        // Ā = B diag(spectrum) Bᵀ, symmetrized to kill roundoff asymmetry.
        let mut scaled = basis.clone();
        for i in 0..d {
            for j in 0..d {
                let v = scaled.get(i, j) * params.spectrum[j];
                scaled.set(i, j, v);
            }
        }
        let mut mean = scaled.matmul(&basis.transpose())?;
        mean.symmetrize();

        let draw_perts = |n: usize, rng: &mut SeededRng| -> Vec<DenseMatrix> {
            if params.sigma_h == 0.0 || n == 0 {
                return Vec::new();
            }
            let mut perts: Vec<DenseMatrix> = (0..n)
                .map(|_| {
                    // σ_H · (G + Gᵀ)/2 for Gaussian G.
                    let mut p = rng.gaussian_matrix(d, d);
                    p.symmetrize();
                    p.scale(params.sigma_h);
                    p
                })
                .collect();
            // Mean-correct so the split average of A_i is exactly Ā.
            let mut mean_p = DenseMatrix::zeros(d, d);
            for p in &perts {
                mean_p.add_scaled(1.0, p).expect("square");
            }
            mean_p.scale(1.0 / n as f64);
            for p in perts.iter_mut() {
                p.add_scaled(-1.0, &mean_p).expect("square");
            }
            perts
        };
        let train_perts = draw_perts(params.n_train, rng);
        let test_perts = draw_perts(params.n_test, rng);

        Ok(Self {
            dim: d,
            gamma: params.gamma,
            mean,
            spectrum: params.spectrum.clone(),
            w_star,
            train_perts,
            test_perts,
            n_train: params.n_train,
            n_test: params.n_test,
        })
    }

    pub fn mean_hessian(&self) -> &DenseMatrix {
        &self.mean
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Dense Hessian `A_i` of one sample (no Tikhonov term).
    pub fn sample_hessian(&self, split: Split, i: usize) -> CoreResult<DenseMatrix> {
        let (perts, n) = match split {
            Split::Train => (&self.train_perts, self.n_train),
            Split::Test => (&self.test_perts, self.n_test),
        };
        if i >= n {
            return Err(CoreError::BatchIndexOutOfRange { index: i, len: n });
        }
        Ok(match perts.get(i) {
            Some(p) => {
                let mut a = self.mean.clone();
                a.add_scaled(1.0, p).expect("square");
                a
            }
            None => self.mean.clone(),
        })
    }

    fn perts(&self, split: Split) -> &[DenseMatrix] {
        match split {
            Split::Train => &self.train_perts,
            Split::Test => &self.test_perts,
        }
    }

    /// Mean of `A_i v` over the batch, reusing `Ā v` across samples.
    fn batch_apply(&self, split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        batch.validate_in_range(self.num_samples(split))?;
        let mut out = self.mean.matvec(v)?;
        let perts = self.perts(split);
        if !perts.is_empty() {
            let inv = 1.0 / batch.len() as f64;
            let mut acc = vec![0.0; self.dim];
            for &i in batch.indices() {
                let pv = perts[i].matvec(v)?;
                crate::numerics::axpy(inv, &pv, &mut acc);
            }
            crate::numerics::axpy(1.0, &acc, &mut out);
        }
        Ok(out)
    }
}

impl DifferentiableModel for QuadraticProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn num_samples(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Test => self.n_test,
        }
    }

    fn loss_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<f64> {
        check_param_len(self.dim, w, "quadratic loss")?;
        let e = crate::numerics::sub(w, &self.w_star)?;
        let ae = self.batch_apply(split, batch, &e)?;
        Ok(0.5 * crate::numerics::dot(&e, &ae)?)
    }

    fn gradient_raw(&self, w: &[f64], split: Split, batch: &Batch) -> CoreResult<Vec<f64>> {
        check_param_len(self.dim, w, "quadratic gradient")?;
        let e = crate::numerics::sub(w, &self.w_star)?;
        self.batch_apply(split, batch, &e)
    }

    fn hvp_raw(&self, w: &[f64], split: Split, batch: &Batch, v: &[f64]) -> CoreResult<Vec<f64>> {
        check_param_len(self.dim, w, "quadratic hvp")?;
        check_param_len(self.dim, v, "quadratic hvp direction")?;
        self.batch_apply(split, batch, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{directional_fd_loss, fd_hvp};
    use crate::numerics::{dot, norm2, sub, sym_eig};

    fn fixture(sigma_h: f64, random_basis: bool) -> QuadraticProblem {
        let params = QuadraticParams {
            dim: 5,
            spectrum: vec![4.0, 2.0, 1.0, 0.5, -0.25],
            random_basis,
            sigma_h,
            n_train: 12,
            n_test: 6,
            gamma: 0.3,
            w_star: Some(vec![0.1, -0.2, 0.3, 0.0, 0.5]),
        };
        QuadraticProblem::new(&params, &mut SeededRng::new(77)).unwrap()
    }

    #[test]
    fn mean_hessian_matches_requested_spectrum() {
        let prob = fixture(0.4, true);
        let (lam, _) = sym_eig(prob.mean_hessian()).unwrap();
        let mut want = prob.spectrum().to_vec();
        want.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        for (l, w) in lam.iter().zip(&want) {
            assert!((l - w).abs() < 1e-10, "eig {l} vs requested {w}");
        }
    }

    #[test]
    fn full_batch_hessian_is_exactly_the_mean() {
        let prob = fixture(0.8, false);
        let full = Batch::full(12).unwrap();
        let v = vec![1.0, -1.0, 0.5, 2.0, 0.0];
        let hv = prob
            .hvp_raw(&[0.0; 5], Split::Train, &full, &v)
            .unwrap();
        let want = prob.mean_hessian().matvec(&v).unwrap();
        let diff = norm2(&sub(&hv, &want).unwrap());
        assert!(diff < 1e-12, "mean correction broken: diff {diff}");
    }

    #[test]
    fn subsampled_hessian_scatters_but_averages_out() {
        let prob = fixture(0.8, false);
        let one = Batch::new(vec![3]).unwrap();
        let v = vec![1.0; 5];
        let hv = prob.hvp_raw(&[0.0; 5], Split::Train, &one, &v).unwrap();
        let mean_v = prob.mean_hessian().matvec(&v).unwrap();
        assert!(norm2(&sub(&hv, &mean_v).unwrap()) > 1e-3);
        // Per-sample dense Hessians agree with the operator route.
        let a3 = prob.sample_hessian(Split::Train, 3).unwrap();
        let dense_v = a3.matvec(&v).unwrap();
        assert!(norm2(&sub(&hv, &dense_v).unwrap()) < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prob = fixture(0.5, true);
        let w = vec![0.3, -0.1, 0.2, 0.7, -0.4];
        let batch = Batch::new(vec![0, 2, 5, 9]).unwrap();
        let g = prob.gradient(&w, Split::Train, &batch).unwrap();
        let dir = vec![0.2, 0.1, -0.3, 0.5, 0.4];
        let fd = directional_fd_loss(&prob, &w, Split::Train, &batch, &dir, 1e-5).unwrap();
        let an = dot(&g, &dir).unwrap();
        assert!((fd - an).abs() < 1e-7, "fd {fd} vs analytic {an}");
    }

    #[test]
    fn hvp_matches_finite_differences() {
        let prob = fixture(0.5, true);
        let w = vec![0.3, -0.1, 0.2, 0.7, -0.4];
        let batch = Batch::new(vec![1, 4, 8]).unwrap();
        let v = vec![-0.6, 0.2, 0.9, -0.1, 0.3];
        let hv = prob.hvp(&w, Split::Train, &batch, &v).unwrap();
        let fd = fd_hvp(&prob, &w, Split::Train, &batch, &v, 1e-5).unwrap();
        let diff = norm2(&sub(&hv, &fd).unwrap());
        assert!(diff < 1e-6, "hvp fd mismatch {diff}");
    }

    #[test]
    fn gradient_vanishes_at_the_minimizer() {
        let prob = fixture(0.9, true);
        let full = Batch::full(12).unwrap();
        let g = prob
            .gradient_raw(prob.w_star(), Split::Train, &full)
            .unwrap();
        assert!(norm2(&g) < 1e-14);
    }

    #[test]
    fn sigma_zero_stores_no_perturbations() {
        let prob = fixture(0.0, false);
        let one = Batch::new(vec![7]).unwrap();
        let v = vec![1.0; 5];
        let hv = prob.hvp_raw(&[0.0; 5], Split::Train, &one, &v).unwrap();
        let want = prob.mean_hessian().matvec(&v).unwrap();
        assert!(norm2(&sub(&hv, &want).unwrap()) == 0.0);
    }
}
