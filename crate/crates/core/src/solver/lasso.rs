use crate::error::{Error, Result};
use crate::support::SupportSet;

/// Row-major `rows × cols` matrix of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidInput(
                "design matrix needs at least one column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite design entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(DesignMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        DesignMatrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Lasso hyper-parameters for the objective `(1/t)‖y − Xθ‖² + λ‖θ‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub lambda: f64,
    /// Cap on full coordinate sweeps.
    pub max_iters: usize,
    /// Convergence tolerance on the largest absolute coordinate change in a sweep.
    pub tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda: 0.0,
            max_iters: 100_000,
            tol: 1e-7,
        }
    }
}

impl LassoConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        LassoConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidInput(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sufficient statistics of a least-squares problem: `XᵀX`, `Xᵀy`, `yᵀy`
/// and the sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    dim: usize,
    samples: usize,
    gram: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
}

impl GramSystem {
    pub fn new(dim: usize) -> Self {
        GramSystem {
            dim,
            samples: 0,
            gram: vec![0.0; dim * dim],
            xty: vec![0.0; dim],
            yty: 0.0,
        }
    }

    pub fn from_design(x: &DesignMatrix, y: &[f64]) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                actual: y.len(),
            });
        }
        let mut sys = GramSystem::new(x.cols());
        for (i, &yi) in y.iter().enumerate() {
            sys.push(x.row(i), yi)?;
        }
        Ok(sys)
    }

    /// Adds one observation. Rank-1 update of the Gram matrix.
    pub fn push(&mut self, row: &[f64], y: f64) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        if !y.is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        let d = self.dim;
        for (i, &ri) in row.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let g = &mut self.gram[i * d..(i + 1) * d];
            for (gij, &rj) in g.iter_mut().zip(row) {
                *gij += ri * rj;
            }
            self.xty[i] += ri * y;
        }
        self.yty += y * y;
        self.samples += 1;
        Ok(())
    }

    /// The same statistics for the sub-problem on the columns in `support`.
    pub fn restrict(&self, support: &SupportSet) -> GramSystem {
        let idx = support.indices();
        let m = idx.len();
        let mut gram = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                gram.push(self.gram[i * self.dim + j]);
            }
        }
        GramSystem {
            dim: m,
            samples: self.samples,
            gram,
            xty: support.restrict(&self.xty),
            yty: self.yty,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.dim + j]
    }

    pub fn gram_row(&self, i: usize) -> &[f64] {
        &self.gram[i * self.dim..(i + 1) * self.dim]
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    /// Lasso objective `(1/t)‖y − Xθ‖² + λ‖θ‖₁` evaluated from the statistics.
    pub fn objective(&self, coef: &[f64], lambda: f64) -> f64 {
        let l1: f64 = coef.iter().map(|c| c.abs()).sum();
        if self.samples == 0 {
            return lambda * l1;
        }
        let mut quad = 0.0;
        for (i, &ci) in coef.iter().enumerate() {
            if ci != 0.0 {
                let row = self.gram_row(i);
                quad += ci * row.iter().zip(coef).map(|(g, c)| g * c).sum::<f64>();
            }
        }
        let cross: f64 = self.xty.iter().zip(coef).map(|(a, b)| a * b).sum();
        let rss = (self.yty - 2.0 * cross + quad).max(0.0);
        rss / self.samples as f64 + lambda * l1
    }
}

/// `sign(z) · max(|z| − gamma, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest λ for which the zero vector is optimal: `max_j (2/t)|X_jᵀy|`.
pub fn lambda_max(sys: &GramSystem) -> f64 {
    if sys.samples == 0 {
        return 0.0;
    }
    let scale = 2.0 / sys.samples as f64;
    sys.xty.iter().fold(0.0, |m, c| m.max(scale * c.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub sweeps: usize,
    /// False when `max_iters` sweeps ran without meeting `tol`; `coef` is then
    /// the last iterate.
    pub converged: bool,
}

/// Cyclic coordinate descent state over a [`GramSystem`].
///
/// Keeps `q = XᵀXθ` in sync with `θ` so each coordinate step costs `O(1)`
/// when the coordinate does not move and `O(d)` when it does.
pub struct CoordinateDescent<'a> {
    sys: &'a GramSystem,
    lambda: f64,
    coef: Vec<f64>,
    q: Vec<f64>,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(sys: &'a GramSystem, lambda: f64, warm_start: Option<&[f64]>) -> Result<Self> {
        let coef = match warm_start {
            Some(w) if w.len() != sys.dim => {
                return Err(Error::DimensionMismatch {
                    expected: sys.dim,
                    actual: w.len(),
                })
            }
            Some(w) => w.to_vec(),
            None => vec![0.0; sys.dim],
        };
        let mut cd = CoordinateDescent {
            sys,
            lambda,
            coef,
            q: vec![0.0; sys.dim],
        };
        cd.refresh();
        Ok(cd)
    }

    fn refresh(&mut self) {
        let sys = self.sys;
        for (i, qi) in self.q.iter_mut().enumerate() {
            *qi = sys.gram_row(i).iter().zip(&self.coef).map(|(g, c)| g * c).sum();
        }
    }

    /// One pass over all coordinates; returns the largest absolute change.
    pub fn sweep(&mut self) -> f64 {
        let sys = self.sys;
        if sys.samples == 0 {
            let max = self.coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            self.coef.iter_mut().for_each(|c| *c = 0.0);
            self.q.iter_mut().for_each(|q| *q = 0.0);
            return max;
        }
        // Minimising over θ_j with the others fixed, after multiplying the
        // objective by t/2: ½G_jjθ_j² − (c_j − Σ_{k≠j} G_jkθ_k)θ_j + (λt/2)|θ_j|.
        let penalty = 0.5 * self.lambda * sys.samples as f64;
        let mut max_change = 0.0f64;
        for j in 0..sys.dim {
            let gjj = sys.gram(j, j);
            let old = self.coef[j];
            let new = if gjj > 0.0 {
                let partial = sys.xty[j] - (self.q[j] - gjj * old);
                soft_threshold(partial, penalty) / gjj
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                self.coef[j] = new;
                for (qk, g) in self.q.iter_mut().zip(sys.gram_row(j)) {
                    *qk += delta * g;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    pub fn objective(&self) -> f64 {
        self.sys.objective(&self.coef, self.lambda)
    }

    pub fn coef(&self) -> &[f64] {
        &self.coef
    }

    pub fn into_coef(self) -> Vec<f64> {
        self.coef
    }
}

/// Solves the Lasso on a dense design matrix from a zero start.
pub fn lasso_fit(x: &DesignMatrix, y: &[f64], cfg: &LassoConfig) -> Result<LassoFit> {
    if x.rows() == 0 {
        return Err(Error::InvalidInput("lasso needs at least one observation".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite response".into()));
    }
    let sys = GramSystem::from_design(x, y)?;
    lasso_fit_gram(&sys, cfg, None)
}

/// Solves the Lasso from sufficient statistics, optionally warm-started.
pub fn lasso_fit_gram(sys: &GramSystem, cfg: &LassoConfig, warm_start: Option<&[f64]>) -> Result<LassoFit> {
    cfg.validate()?;
    let mut cd = CoordinateDescent::new(sys, cfg.lambda, warm_start)?;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.max_iters {
        sweeps += 1;
        if cd.sweep() <= cfg.tol {
            // Drop accumulated rounding in q before accepting.
            cd.refresh();
            sweeps += 1;
            if cd.sweep() <= cfg.tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::debug!(
            "lasso did not converge in {} sweeps (lambda = {})",
            cfg.max_iters,
            cfg.lambda
        );
    }
    Ok(LassoFit {
        coef: cd.into_coef(),
        sweeps,
        converged,
    })
}
