use nalgebra::{DMatrix, DVector};

use super::GramSystem;
use crate::error::{Error, Result};
use crate::support::SupportSet;

/// Ridge sufficient statistics `M = I + Σ a aᵀ`, `b = Σ y a` on a support set.
///
/// Vectors passed to [`RidgeState::update`] are already restricted to the
/// support, so `M` is `|support| × |support|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeState {
    support: SupportSet,
    m: DMatrix<f64>,
    b: DVector<f64>,
}

impl RidgeState {
    /// Identity `M`, zero `b`.
    pub fn new(support: SupportSet) -> Self {
        let n = support.len();
        RidgeState {
            support,
            m: DMatrix::identity(n, n),
            b: DVector::zeros(n),
        }
    }

    /// Rebuilds the state from full-dimensional Gram statistics restricted to
    /// `support`: `M = I + G[S, S]`, `b = (Xᵀy)[S]`.
    pub fn from_gram(support: SupportSet, sys: &GramSystem) -> Result<Self> {
        support.check_bounds(sys.dim())?;
        let idx = support.indices();
        let n = idx.len();
        let m = DMatrix::from_fn(n, n, |r, c| {
            sys.gram(idx[r], idx[c]) + if r == c { 1.0 } else { 0.0 }
        });
        let b = DVector::from_iterator(n, idx.iter().map(|&j| sys.xty()[j]));
        Ok(RidgeState { support, m, b })
    }

    /// `M += a aᵀ`, `b += reward · a`.
    pub fn update(&mut self, a: &[f64], reward: f64) -> Result<()> {
        if a.len() != self.support.len() {
            return Err(Error::DimensionMismatch {
                expected: self.support.len(),
                actual: a.len(),
            });
        }
        let n = a.len();
        for c in 0..n {
            if a[c] == 0.0 {
                continue;
            }
            for r in 0..n {
                self.m[(r, c)] += a[r] * a[c];
            }
            self.b[c] += reward * a[c];
        }
        Ok(())
    }

    /// Solves `M θ = b` by Cholesky.
    pub fn estimate(&self) -> Vec<f64> {
        if self.support.is_empty() {
            return Vec::new();
        }
        let chol = self
            .m
            .clone()
            .cholesky()
            .expect("ridge matrix is I plus a Gram matrix and must be positive definite");
        chol.solve(&self.b).as_slice().to_vec()
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.support.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_update() {
        let mut s = RidgeState::new(SupportSet::full(2));
        s.update(&[1.0, 0.0], 2.0).unwrap();
        assert_eq!(s.m(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert_eq!(s.b().as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn zero_context_is_noop() {
        let mut s = RidgeState::new(SupportSet::full(2));
        let before = s.clone();
        s.update(&[0.0, 0.0], 5.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = RidgeState::new(SupportSet::full(3));
        assert!(matches!(
            s.update(&[1.0], 1.0),
            Err(Error::DimensionMismatch {
                expected: 3,
                actual: 1
            })
        ));
    }

    #[test]
    fn fresh_estimate_is_zero() {
        let s = RidgeState::new(SupportSet::full(4));
        assert_eq!(s.estimate(), vec![0.0; 4]);
        assert!(RidgeState::new(SupportSet::empty()).estimate().is_empty());
    }

    #[test]
    fn one_unit_update_estimate() {
        // M = diag(2, 1), b = (1, 0) → θ = (1/2, 0).
        let mut s = RidgeState::new(SupportSet::full(3));
        s.update(&[1.0, 0.0, 0.0], 1.0).unwrap();
        let theta = s.estimate();
        assert!((theta[0] - 0.5).abs() < 1e-15);
        assert_eq!(&theta[1..], &[0.0, 0.0]);
    }

    #[test]
    fn from_gram_matches_restricted_updates() {
        let rows = [
            vec![1.0, 2.0, 0.0, -1.0],
            vec![0.5, 0.0, 3.0, 1.0],
            vec![-2.0, 1.0, 1.0, 0.0],
        ];
        let ys = [1.0, -0.5, 2.0];
        let mut sys = GramSystem::new(4);
        for (r, &y) in rows.iter().zip(&ys) {
            sys.push(r, y).unwrap();
        }
        let support = SupportSet::from_indices([0, 2, 3]);
        let rebuilt = RidgeState::from_gram(support.clone(), &sys).unwrap();
        let mut inc = RidgeState::new(support.clone());
        for (r, &y) in rows.iter().zip(&ys) {
            inc.update(&support.restrict(r), y).unwrap();
        }
        assert!((rebuilt.m() - inc.m()).amax() < 1e-12);
        assert!((rebuilt.b() - inc.b()).amax() < 1e-12);
        assert!(RidgeState::from_gram(SupportSet::singleton(4), &sys).is_err());
    }

    proptest! {
        #[test]
        fn estimate_residual_is_tiny(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 0..30),
            ys in proptest::collection::vec(-3.0f64..3.0, 30),
        ) {
            let mut s = RidgeState::new(SupportSet::full(4));
            for (r, &y) in rows.iter().zip(&ys) {
                s.update(r, y).unwrap();
            }
            let theta = DVector::from_vec(s.estimate());
            let resid = s.m() * &theta - s.b();
            prop_assert!(resid.norm() <= 1e-10);
            // M stays symmetric.
            prop_assert!((s.m() - s.m().transpose()).amax() == 0.0);
        }
    }
}
