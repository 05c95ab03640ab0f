//! Adaptive Dormand–Prince 5(4) integration with dense output.
//!
//! The stepper is the classic DOPRI5 pair with FSAL, a PI step-size
//! controller, and the fourth-order continuous extension used to place
//! samples on an arbitrary output grid without shortening steps.

use serde::{Deserialize, Serialize};

use crate::error::IntegrationError;
use crate::generator::RateGenerator;
use crate::space::PopulationState;
use crate::sparse::SparseMatrix;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const MAX_STEPS: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// End of the integration window (ns).
    pub t_end: f64,
    /// Number of uniformly spaced output points on `[0, t_end]`.
    pub samples: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the internal step (ns).
    pub max_step: f64,
}

impl IntegratorConfig {
    pub fn new(t_end: f64, samples: usize) -> Self {
        IntegratorConfig {
            t_end,
            samples,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        let bad = |msg: String| Err(IntegrationError::InvalidConfig(msg));
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.samples < 2 {
            return bad(format!("samples must be at least 2, got {}", self.samples));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad(format!(
                "tolerances must be positive, got rel {} abs {}",
                self.rel_tol, self.abs_tol
            ));
        }
        if self.max_step.is_nan() || self.max_step <= 0.0 {
            return bad(format!("max_step must be positive, got {}", self.max_step));
        }
        Ok(())
    }

    /// The uniform output grid `t_k = t_end * k / (samples - 1)`.
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.samples - 1) as f64;
        (0..self.samples)
            .map(|k| {
                if k + 1 == self.samples {
                    self.t_end
                } else {
                    self.t_end * k as f64 / last
                }
            })
            .collect()
    }
}

/// Populations sampled on the output grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PopulationState>,
}

/// Continuous extension of one accepted step.
#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    rcont: [Vec<f64>; 5],
}

impl Segment {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }
}

/// Piecewise interpolant of a solution over a window of accepted steps.
#[derive(Clone, Debug, Default)]
pub struct DenseOutput {
    segments: Vec<Segment>,
}

impl DenseOutput {
    /// Covered interval, if any step was recorded.
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.segments.first()?;
        let last = self.segments.last()?;
        Some((first.t0, last.t0 + last.h))
    }

    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        let seg = self.segment_at(t)?;
        let mut out = vec![0.0; seg.rcont[0].len()];
        seg.eval_into(t, &mut out);
        Some(out)
    }

    /// `w · y(t)`.
    pub fn eval_functional(&self, t: f64, weights: &[f64]) -> Option<f64> {
        self.eval(t).map(|y| y.iter().zip(weights).map(|(a, b)| a * b).sum())
    }

    fn segment_at(&self, t: f64) -> Option<&Segment> {
        let (lo, hi) = self.span()?;
        if t < lo || t > hi {
            return None;
        }
        let k = self.segments.partition_point(|s| s.t0 + s.h < t);
        self.segments.get(k.min(self.segments.len() - 1))
    }
}

/// Step controls shared by all entry points.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
}

impl From<&IntegratorConfig> for Tolerances {
    fn from(cfg: &IntegratorConfig) -> Self {
        Tolerances {
            rel: cfg.rel_tol,
            abs: cfg.abs_tol,
            max_step: cfg.max_step,
        }
    }
}

/// Output of one [`dopri5`] run.
#[derive(Clone, Debug)]
pub struct Solution {
    /// One state per requested output time.
    pub samples: Vec<Vec<f64>>,
    /// Interpolant over the requested dense window (empty when none was asked for).
    pub dense: DenseOutput,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

fn rms_norm(v: &[f64], scale: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(scale).map(|(x, s)| (x / s).powi(2)).sum();
    (s / v.len().max(1) as f64).sqrt()
}

/// A single DOPRI5 step from `(t, y)` with derivative `k1`; the stages are kept for dense output.
struct Stages {
    k: [Vec<f64>; 7],
    y_new: Vec<f64>,
    err: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_new: vec![0.0; n],
            err: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Fills stages 2..7, the fifth-order solution, and the embedded error estimate.
    /// `k[0]` must already hold `f(t, y)`.
    fn step<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &[f64], h: f64) {
        let n = y.len();
        let Stages { k, y_new, err, tmp } = self;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k[0][i];
        }
        rhs(t + C2 * h, tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        rhs(t + C3 * h, tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        rhs(t + C4 * h, tmp, &mut k[3]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        rhs(t + C5 * h, tmp, &mut k[4]);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        rhs(t + h, tmp, &mut k[5]);
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        rhs(t + h, y_new, &mut k[6]);
        for i in 0..n {
            err[i] = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        }
    }

    fn segment(&self, t: f64, y: &[f64], h: f64) -> Segment {
        let n = y.len();
        let k = &self.k;
        let mut r2 = vec![0.0; n];
        let mut r3 = vec![0.0; n];
        let mut r4 = vec![0.0; n];
        let mut r5 = vec![0.0; n];
        for i in 0..n {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            r2[i] = ydiff;
            r3[i] = bspl;
            r4[i] = ydiff - h * k[6][i] - bspl;
            r5[i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
        Segment {
            t0: t,
            h,
            rcont: [y.to_vec(), r2, r3, r4, r5],
        }
    }
}

fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    tol: &Tolerances,
    span: f64,
) -> f64 {
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|y| tol.abs + tol.rel * y.abs()).collect();
    let dnf = rms_norm(f0, &scale);
    let dny = rms_norm(y0, &scale);
    let hmax = tol.max_step.min(span);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h = h.min(hmax);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h, &y1, &mut f1);
    let diff: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let der2 = rms_norm(&diff, &scale) / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 5.0)
    };
    (100.0 * h).min(h1).min(hmax)
}

/// Integrates `y' = rhs(t, y)` from `t0` to the last entry of `out_times`.
///
/// `out_times` must be non-decreasing and start at or after `t0`. When
/// `dense_window` is given, every accepted step overlapping it is kept for
/// later interpolation.
pub fn dopri5<F: FnMut(f64, &[f64], &mut [f64])>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    out_times: &[f64],
    tol: &Tolerances,
    dense_window: Option<(f64, f64)>,
) -> Result<Solution, IntegrationError> {
    let n = y0.len();
    let t_end = *out_times.last().unwrap_or(&t0);
    let mut samples = Vec::with_capacity(out_times.len());
    let mut next = 0;
    while next < out_times.len() && out_times[next] <= t0 {
        samples.push(y0.to_vec());
        next += 1;
    }
    let mut dense = DenseOutput::default();
    let mut solution = Solution {
        samples: Vec::new(),
        dense: DenseOutput::default(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if next == out_times.len() {
        solution.samples = samples;
        return Ok(solution);
    }

    let mut stages = Stages::new(n);
    let mut t = t0;
    let mut y = y0.to_vec();
    rhs(t, &y, &mut stages.k[0]);
    let mut h = initial_step(&mut rhs, t0, &y, &stages.k[0].clone(), tol, t_end - t0);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut scratch = vec![0.0; n];

    loop {
        if solution.accepted_steps + solution.rejected_steps >= MAX_STEPS {
            return Err(IntegrationError::TooManySteps(MAX_STEPS));
        }
        h = h.min(tol.max_step);
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(IntegrationError::StepSizeUnderflow { t, h });
        }

        stages.step(&mut rhs, t, &y, h);
        let scale: Vec<f64> = (0..n)
            .map(|i| tol.abs + tol.rel * y[i].abs().max(stages.y_new[i].abs()))
            .collect();
        let err = rms_norm(&stages.err, &scale);
        if !err.is_finite() {
            return Err(IntegrationError::NonFinite { t });
        }

        let fac11 = err.powf(0.2 - BETA * 0.75);
        let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut h_new = h / fac;

        if err <= 1.0 {
            fac_old = err.max(1e-4);
            solution.accepted_steps += 1;
            if stages.y_new.iter().any(|v| !v.is_finite()) {
                return Err(IntegrationError::NonFinite { t: t + h });
            }
            let t_new = if last { t_end } else { t + h };
            let wants_dense = dense_window.is_some_and(|(lo, hi)| t_new >= lo && t <= hi);
            let has_samples = out_times[next] <= t_new;
            if wants_dense || has_samples {
                let seg = stages.segment(t, &y, h);
                while next < out_times.len() && out_times[next] <= t_new {
                    if out_times[next] == t_new {
                        samples.push(stages.y_new.clone());
                    } else {
                        seg.eval_into(out_times[next], &mut scratch);
                        samples.push(scratch.clone());
                    }
                    next += 1;
                }
                if wants_dense {
                    dense.segments.push(seg);
                }
            }
            let (k_first, k_rest) = stages.k.split_at_mut(1);
            k_first[0].copy_from_slice(&k_rest[5]);
            std::mem::swap(&mut y, &mut stages.y_new);
            t = t_new;
            if next == out_times.len() {
                break;
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
        } else {
            h_new = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
            last_rejected = true;
            solution.rejected_steps += 1;
        }
        h = h_new;
    }

    solution.samples = samples;
    solution.dense = dense;
    Ok(solution)
}

/// Solves `x' = G x` on the configured uniform grid.
pub fn integrate_linear(
    matrix: &SparseMatrix,
    init: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), IntegrationError> {
    cfg.validate()?;
    if init.len() != matrix.dim() {
        return Err(IntegrationError::DimensionMismatch {
            expected: matrix.dim(),
            got: init.len(),
        });
    }
    let grid = cfg.grid();
    let sol = dopri5(
        |_, x, dx| matrix.mul_vec_into(x, dx),
        0.0,
        init,
        &grid,
        &cfg.into(),
        None,
    )?;
    Ok((grid, sol.samples))
}

/// Re-integrates `x' = G x` from zero and keeps the interpolant over `window`.
pub fn dense_linear(
    matrix: &SparseMatrix,
    init: &[f64],
    window: (f64, f64),
    tol: &Tolerances,
) -> Result<DenseOutput, IntegrationError> {
    if init.len() != matrix.dim() {
        return Err(IntegrationError::DimensionMismatch {
            expected: matrix.dim(),
            got: init.len(),
        });
    }
    let sol = dopri5(
        |_, x, dx| matrix.mul_vec_into(x, dx),
        0.0,
        init,
        &[window.1],
        tol,
        Some(window),
    )?;
    Ok(sol.dense)
}

pub fn integrate(
    gen: &RateGenerator,
    init: &PopulationState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationError> {
    if init.t != 0.0 {
        return Err(IntegrationError::InvalidConfig(format!(
            "initial state must be at t = 0, got {}",
            init.t
        )));
    }
    let (times, samples) = integrate_linear(gen.matrix(), &init.to_vector(), cfg)?;
    let states = times
        .iter()
        .zip(samples)
        .map(|(&t, x)| PopulationState::from_vector(init.sigma, t, &x))
        .collect();
    Ok(Trajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol(rel: f64, abs: f64) -> Tolerances {
        Tolerances {
            rel,
            abs,
            max_step: f64::INFINITY,
        }
    }

    #[test]
    fn grid_is_uniform_and_closed() {
        let g = IntegratorConfig::new(100.0, 2001).grid();
        assert_eq!(g.len(), 2001);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2000], 100.0);
        assert_eq!(g[1000], 50.0);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 10).validate().is_err());
        assert!(IntegratorConfig::new(1.0, 1).validate().is_err());
        assert!(IntegratorConfig::new(1.0, 10)
            .with_tolerances(0.0, 1e-12)
            .validate()
            .is_err());
        assert!(IntegratorConfig::new(1.0, 10).validate().is_ok());
    }

    #[test]
    fn zero_generator_is_constant() {
        let m = SparseMatrix::zeros(3);
        let init = [0.2, -1.0, 3.5];
        let (_, xs) = integrate_linear(&m, &init, &IntegratorConfig::new(50.0, 11)).unwrap();
        for x in xs {
            assert_eq!(x, init);
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let sol = dopri5(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            &[0.5, 1.0, 2.0, 5.0],
            &tol(1e-10, 1e-14),
            None,
        )
        .unwrap();
        for (t, y) in [0.5f64, 1.0, 2.0, 5.0].iter().zip(&sol.samples) {
            assert!((y[0] - (-t).exp()).abs() < 1e-9 * (-t).exp() + 1e-13, "t = {t}");
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
        let sol = dopri5(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &times,
            &tol(1e-10, 1e-12),
            Some((0.0, 10.0)),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&sol.samples) {
            assert!((y[0] - t.cos()).abs() < 1e-8);
        }
        for k in 0..100 {
            let t = 0.1 * k as f64 + 0.037;
            let y = sol.dense.eval(t).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-8, "t = {t}");
            assert!((y[1] + t.sin()).abs() < 1e-8, "t = {t}");
        }
        assert!(sol.dense.eval(10.5).is_none());
    }

    /// Global error of fixed steps on `y' = -y` should fall by ~2^5 per halving.
    #[test]
    fn observed_order_at_least_four() {
        let mut stages = Stages::new(1);
        let mut run = |steps: usize| {
            let h = 2.0 / steps as f64;
            let mut y = vec![1.0];
            let mut rhs = |_: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0];
            for s in 0..steps {
                rhs(0.0, &y, &mut stages.k[0]);
                stages.step(&mut rhs, s as f64 * h, &y, h);
                y.copy_from_slice(&stages.y_new);
            }
            (y[0] - (-2.0f64).exp()).abs()
        };
        let errs: Vec<f64> = [8, 16, 32, 64].iter().map(|&s| run(s)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 4.0, "observed order {order} from {errs:?}");
        }
    }

    #[test]
    fn adaptive_error_shrinks_with_tolerance() {
        let exact = (-3.0f64).exp();
        let errs: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10]
            .iter()
            .map(|&rtol| {
                let sol = dopri5(|_, y, dy| dy[0] = -y[0], 0.0, &[1.0], &[3.0], &tol(rtol, 1e-16), None).unwrap();
                (sol.samples[0][0] - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
        assert!(errs[3] < 1e-10);
    }

    #[test]
    fn blow_up_is_reported() {
        let res = dopri5(
            |_, y, dy| dy[0] = y[0] * y[0],
            0.0,
            &[1.0],
            &[2.0],
            &tol(1e-8, 1e-10),
            None,
        );
        assert!(matches!(
            res,
            Err(IntegrationError::StepSizeUnderflow { .. }) | Err(IntegrationError::NonFinite { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = SparseMatrix::zeros(3);
        assert!(matches!(
            integrate_linear(&m, &[1.0], &IntegratorConfig::new(1.0, 3)),
            Err(IntegrationError::DimensionMismatch { .. })
        ));
    }
}
