//! Logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::AnalysisError;

pub const LOGLIK_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;
/// Coefficient magnitude treated as divergence (perfect separation).
const DIVERGENCE: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Wald statistic.
    pub z: f64,
    /// Two-sided Wald p-value.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// Intercept first, then predictors in input order.
    pub coefficients: Vec<Coefficient>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub mcfadden_r2: f64,
    /// 2k - 2 lnL, with the intercept counted in k.
    pub aic: f64,
    pub converged: bool,
    pub separation: bool,
    pub iterations: usize,
    pub n: usize,
}

impl LogisticFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// exp(beta): multiplicative change in odds per unit of the predictor.
    pub fn odds_ratio(&self, name: &str) -> Option<f64> {
        self.coefficient(name).map(|c| c.estimate.exp())
    }

    /// Linear predictor for one row of predictor values.
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.coefficients[0].estimate
            + self.coefficients[1..].iter().zip(x).map(|(c, v)| c.estimate * v).sum::<f64>()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(eta: &DVector<f64>, y: &[bool]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| if yi { -softplus(-e) } else { -softplus(e) })
        .sum()
}

/// Log-likelihood of the intercept-only model.
pub fn null_log_likelihood(y: &[bool]) -> f64 {
    let n = y.len() as f64;
    let k = y.iter().filter(|&&v| v).count() as f64;
    let p = k / n;
    let term = |c: f64, q: f64| if c > 0.0 { c * q.ln() } else { 0.0 };
    term(k, p) + term(n - k, 1.0 - p)
}

/// Fits `y ~ 1 + x` by maximum likelihood. `x[i]` holds row i's predictors,
/// named by `names`.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool], names: &[&str]) -> Result<LogisticFit, AnalysisError> {
    let n = y.len();
    let p = names.len() + 1;
    if x.len() != n || x.iter().any(|r| r.len() != names.len()) {
        return Err(AnalysisError::DimensionMismatch);
    }
    if n <= p {
        return Err(AnalysisError::TooFewRows { needed: p + 1, got: n });
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(AnalysisError::DegenerateOutcomes);
    }
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });

    // rank check on column-scaled design
    let scaled = DMatrix::from_fn(n, p, |i, j| {
        let norm = design.column(j).norm();
        if norm > 0.0 {
            design[(i, j)] / norm
        } else {
            0.0
        }
    });
    let sv = scaled.singular_values();
    let (max_sv, min_sv) = (sv.max(), sv.min());
    if max_sv == 0.0 || min_sv / max_sv < 1e-10 {
        return Err(AnalysisError::RankDeficient);
    }

    let yv = DVector::from_iterator(n, y.iter().map(|&v| if v { 1.0 } else { 0.0 }));
    let mut beta = DVector::zeros(p);
    let mut eta = &design * &beta;
    let mut ll = log_likelihood(&eta, y);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let mu = eta.map(sigmoid);
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        let xtw = DMatrix::from_fn(p, n, |j, i| design[(i, j)] * w[i]);
        let info = &xtw * &design;
        let score = design.transpose() * (&yv - &mu);
        let Some(chol) = info.clone().cholesky() else {
            break;
        };
        let step = chol.solve(&score);
        // step halving keeps the likelihood non-decreasing
        let mut t = 1.0;
        let (mut next_beta, mut next_eta, mut next_ll);
        loop {
            next_beta = &beta + &step * t;
            next_eta = &design * &next_beta;
            next_ll = log_likelihood(&next_eta, y);
            if next_ll >= ll - 1e-12 || t < 1e-6 {
                break;
            }
            t /= 2.0;
        }
        let delta = (next_ll - ll).abs();
        beta = next_beta;
        eta = next_eta;
        ll = next_ll;
        if beta.amax() > DIVERGENCE {
            break;
        }
        if delta < LOGLIK_TOL {
            converged = true;
            break;
        }
    }
    let separation = beta.amax() > DIVERGENCE;
    let converged = converged && !separation;

    let mu = eta.map(sigmoid);
    let w = mu.map(|m| (m * (1.0 - m)).max(1e-300));
    let xtw = DMatrix::from_fn(p, n, |j, i| design[(i, j)] * w[i]);
    let cov = (&xtw * &design).try_inverse();

    let mut all_names = vec!["intercept"];
    all_names.extend_from_slice(names);
    let coefficients = all_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = cov.as_ref().map(|c| c[(j, j)].max(0.0).sqrt()).unwrap_or(f64::NAN);
            let z = beta[j] / se;
            Coefficient {
                name: name.to_string(),
                estimate: beta[j],
                std_error: se,
                z,
                p_value: erfc(z.abs() / std::f64::consts::SQRT_2),
            }
        })
        .collect();
    let ll0 = null_log_likelihood(y);
    Ok(LogisticFit {
        coefficients,
        log_likelihood: ll,
        null_log_likelihood: ll0,
        mcfadden_r2: 1.0 - ll / ll0,
        aic: 2.0 * p as f64 - 2.0 * ll,
        converged,
        separation,
        iterations,
        n,
    })
}
