//! `t → ∞` limits of linear functionals of `x' = G x`.
//!
//! Two routes are evaluated and must agree:
//!
//! 1. spectral projection of the initial vector onto `ker G` along `range G`,
//!    built from the right and left singular vectors with vanishing singular
//!    values;
//! 2. a long-horizon integration to `T` and `2T`, accepted only when the
//!    functional has stopped moving.
//!
//! If the zero eigenvalue is defective the projection does not exist and only
//! the second route is used; the report says so.

use nalgebra::{Complex, DMatrix, Dyn, Schur, SVD};
use serde::{Deserialize, Serialize};

use crate::error::AsymptoteError;
use crate::generator::RateGenerator;
use crate::ode::{dopri5, Tolerances};
use crate::space::PopulationState;
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoteSettings {
    /// Singular values below `null_threshold · ‖G‖₂` count as zero.
    pub null_threshold: f64,
    /// Allowed absolute gap between the two routes.
    pub agreement_tol: f64,
    /// Required `|F(2T) − F(T)|` for the long-horizon route.
    pub convergence_tol: f64,
    /// Lower bound on `T` (ns).
    pub min_horizon: f64,
    /// `T ≥ horizon_factor / |λ|` for the slowest decaying mode.
    pub horizon_factor: f64,
    /// `T` is doubled until the certificate holds or this bound is passed.
    pub max_horizon: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for AsymptoteSettings {
    fn default() -> Self {
        AsymptoteSettings {
            null_threshold: 1e-12,
            agreement_tol: 1e-8,
            convergence_tol: 1e-9,
            min_horizon: 1000.0,
            horizon_factor: 20.0,
            max_horizon: 1e6,
            rel_tol: 1e-11,
            abs_tol: 1e-15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    /// The limit. Equal to `null_space` when that route exists, else `long_horizon`.
    pub value: f64,
    pub null_space: Option<f64>,
    pub long_horizon: f64,
    /// Final horizon `T` (ns); the certificate compares `F(T)` and `F(2T)`.
    pub horizon_ns: f64,
    pub certificate: f64,
    pub null_dim: usize,
    pub defective: bool,
    /// Smallest `|λ|` among nonzero eigenvalues.
    pub slowest_rate: Option<f64>,
    pub max_real_eigenvalue: f64,
}

impl AsymptoteReport {
    pub fn disagreement(&self) -> Option<f64> {
        self.null_space.map(|v| (v - self.long_horizon).abs())
    }
}

struct Spectrum {
    max_real: f64,
    slowest_rate: Option<f64>,
}

const MAX_SWEEPS: usize = 10_000;

/// Eigenvalues of `G`. When the transition graph has no cycles, `G` is
/// triangular up to a permutation and the spectrum is its diagonal.
fn eigenvalues(matrix: &SparseMatrix, g: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, AsymptoteError> {
    if is_acyclic(matrix) {
        return Ok((0..g.nrows()).map(|i| Complex::new(g[(i, i)], 0.0)).collect());
    }
    Schur::try_new(g.clone(), f64::EPSILON, MAX_SWEEPS)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
        .ok_or(AsymptoteError::Decomposition("Schur"))
}

fn is_acyclic(matrix: &SparseMatrix) -> bool {
    let n = matrix.dim();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, v) in matrix.iter() {
        if r != c && v != 0.0 {
            out[c].push(r);
            indegree[r] += 1;
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = ready.pop() {
        seen += 1;
        for &r in &out[i] {
            indegree[r] -= 1;
            if indegree[r] == 0 {
                ready.push(r);
            }
        }
    }
    seen == n
}

fn try_svd(g: &DMatrix<f64>, vectors: bool) -> Result<SVD<f64, Dyn, Dyn>, AsymptoteError> {
    g.clone()
        .try_svd(vectors, vectors, f64::EPSILON, MAX_SWEEPS)
        .ok_or(AsymptoteError::Decomposition("SVD"))
}

fn spectrum(eigs: &[Complex<f64>], norm: f64) -> Spectrum {
    let zero_tol = 1e-8 * norm.max(f64::MIN_POSITIVE);
    let max_real = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let slowest_rate = eigs
        .iter()
        .map(|l| l.norm())
        .filter(|&m| m > zero_tol)
        .min_by(f64::total_cmp);
    Spectrum { max_real, slowest_rate }
}

/// Spectral projector onto `ker G` applied to `init`, or `None` when the
/// zero eigenvalue is defective.
fn null_space_projection(
    g: &DMatrix<f64>,
    init: &[f64],
    threshold: f64,
) -> Result<(usize, Option<Vec<f64>>), AsymptoteError> {
    let n = g.nrows();
    let svd = try_svd(g, true)?;
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let null: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| i)
        .collect();
    let k = null.len();
    if k == 0 {
        return Ok((0, Some(vec![0.0; n])));
    }
    let right = DMatrix::from_fn(n, k, |r, c| v_t[(null[c], r)]);
    let left = DMatrix::from_fn(n, k, |r, c| u[(r, null[c])]);
    let coupling = left.transpose() * &right;
    let sv = try_svd(&coupling, false)?.singular_values;
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smallest < 1e-8 {
        return Ok((k, None));
    }
    let Some(inv) = coupling.try_inverse() else {
        return Ok((k, None));
    };
    let x = nalgebra::DVector::from_column_slice(init);
    let projected = &right * (inv * (left.transpose() * x));
    Ok((k, Some(projected.iter().copied().collect())))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn asymptote(
    gen: &RateGenerator,
    init: &PopulationState,
    functional: &[f64],
) -> Result<AsymptoteReport, AsymptoteError> {
    asymptote_linear(
        gen.matrix(),
        &init.to_vector(),
        functional,
        &AsymptoteSettings::default(),
    )
}

/// `lim_{t→∞} w · e^{Gt} x₀`, cross-checked by both routes.
pub fn asymptote_linear(
    matrix: &SparseMatrix,
    init: &[f64],
    functional: &[f64],
    settings: &AsymptoteSettings,
) -> Result<AsymptoteReport, AsymptoteError> {
    let n = matrix.dim();
    for len in [init.len(), functional.len()] {
        if len != n {
            return Err(AsymptoteError::DimensionMismatch { expected: n, got: len });
        }
    }
    let g = matrix.to_dense();
    let norm = try_svd(&g, false)?.singular_values.max();
    let spectral = spectrum(&eigenvalues(matrix, &g)?, norm);
    if spectral.max_real > 1e-8 * norm {
        return Err(AsymptoteError::Unstable(spectral.max_real));
    }

    let (null_dim, projected) = null_space_projection(&g, init, settings.null_threshold * norm)?;
    let null_space = projected.as_deref().map(|p| dot(functional, p));

    let mut horizon = match spectral.slowest_rate {
        Some(rate) => settings.min_horizon.max(settings.horizon_factor / rate),
        None => settings.min_horizon,
    };
    let tol = Tolerances {
        rel: settings.rel_tol,
        abs: settings.abs_tol,
        max_step: f64::INFINITY,
    };
    let (f_2t, certificate) = loop {
        let sol = dopri5(
            |_, x, dx| matrix.mul_vec_into(x, dx),
            0.0,
            init,
            &[horizon, 2.0 * horizon],
            &tol,
            None,
        )?;
        let f_t = dot(functional, &sol.samples[0]);
        let f_2t = dot(functional, &sol.samples[1]);
        let certificate = (f_2t - f_t).abs();
        if certificate < settings.convergence_tol {
            break (f_2t, certificate);
        }
        if horizon >= settings.max_horizon {
            return Err(AsymptoteError::NotConverged {
                horizon,
                delta: certificate,
            });
        }
        horizon *= 2.0;
    };

    if let Some(ns) = null_space {
        if (ns - f_2t).abs() > settings.agreement_tol {
            return Err(AsymptoteError::MethodsDisagree {
                null_space: ns,
                long_horizon: f_2t,
            });
        }
    }

    Ok(AsymptoteReport {
        value: null_space.unwrap_or(f_2t),
        null_space,
        long_horizon: f_2t,
        horizon_ns: horizon,
        certificate,
        null_dim,
        defective: projected.is_none(),
        slowest_rate: spectral.slowest_rate,
        max_real_eigenvalue: spectral.max_real,
    })
}
