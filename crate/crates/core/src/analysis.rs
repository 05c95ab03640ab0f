//! Fluorescence traces, zero crossings, asymptotes and physicality verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptote::{asymptote_linear, AsymptoteReport, AsymptoteSettings};
use crate::error::{AnalysisError, GeneratorError};
use crate::generator::{build_generator, RateGenerator, SpinManifoldParams, Term, TermFlags, Variant};
use crate::ode::{dense_linear, integrate_linear, IntegratorConfig, Tolerances};
use crate::space::{build_state_space, initial_state, Manifold, PerManifold};
use crate::sparse::SparseMatrix;

pub const DEFAULT_NEGATIVITY_TOL: f64 = 1e-9;
pub const DEFAULT_ASYMPTOTE_TOL: f64 = 1e-6;
/// Crossing refinement stops once `|F| < CROSSING_TOL · scale`.
pub const CROSSING_TOL: f64 = 1e-12;

/// `x' = G x` with initial value and an output functional.
#[derive(Clone, Copy, Debug)]
pub struct LinearSystem<'a> {
    pub matrix: &'a SparseMatrix,
    pub init: &'a [f64],
    pub functional: &'a [f64],
}

/// Both manifolds of one model, stacked into a block-diagonal system.
#[derive(Clone, Debug)]
pub struct ModelSystem {
    pub flags: TermFlags,
    pub params: PerManifold<SpinManifoldParams>,
    pub generators: PerManifold<RateGenerator>,
    pub matrix: SparseMatrix,
    pub init: Vec<f64>,
    /// Weights of `p₀·F₀ + (1 − p₀)·F₁` on the stacked vector.
    pub functional: Vec<f64>,
    /// The two weighted contributions separately.
    pub sigma_functionals: PerManifold<Vec<f64>>,
}

impl ModelSystem {
    pub fn new(
        n_emitters: u32,
        params: &PerManifold<SpinManifoldParams>,
        flags: TermFlags,
    ) -> Result<Self, AnalysisError> {
        if params.sigma0.gamma != params.sigma1.gamma {
            return Err(GeneratorError::ManifoldMismatch("gamma").into());
        }
        let p0 = params.sigma0.weight;
        if !(0.0..=1.0).contains(&p0) {
            return Err(GeneratorError::InvalidWeight(p0).into());
        }
        let space = build_state_space(n_emitters)?;
        let generators = params.try_map(|_, p| build_generator(&space, p, flags))?;
        let dim = space.dim();
        let matrix = SparseMatrix::block_diagonal(&[generators.sigma0.matrix(), generators.sigma1.matrix()]);
        let mut init = initial_state(&space, Manifold::Zero).to_vector();
        init.extend(initial_state(&space, Manifold::PlusMinusOne).to_vector());

        let weights = PerManifold::new(p0, 1.0 - p0);
        let sigma_functionals = generators.map(|sigma, g| {
            let mut w = vec![0.0; 2 * dim];
            let offset = if sigma == Manifold::Zero { 0 } else { dim };
            for (k, x) in g.fluorescence_weights().into_iter().enumerate() {
                w[offset + k] = weights.get(sigma) * x;
            }
            w
        });
        let functional = sigma_functionals
            .sigma0
            .iter()
            .zip(&sigma_functionals.sigma1)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ModelSystem {
            flags,
            params: *params,
            generators,
            matrix,
            init,
            functional,
            sigma_functionals,
        })
    }

    pub fn system(&self) -> LinearSystem<'_> {
        LinearSystem {
            matrix: &self.matrix,
            init: &self.init,
            functional: &self.functional,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub scale: f64,
    /// Set when the trace has no positive maximum and was left unscaled.
    pub warning: bool,
}

pub fn normalize(raw: &[f64]) -> Normalized {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 && max.is_finite() {
        Normalized {
            values: raw.iter().map(|v| v / max).collect(),
            scale: max,
            warning: false,
        }
    } else {
        Normalized {
            values: raw.to_vec(),
            scale: 1.0,
            warning: true,
        }
    }
}

fn check_grid(times: &[f64], f: &[f64]) -> Result<(), AnalysisError> {
    if f.len() != times.len() {
        return Err(AnalysisError::LengthMismatch {
            expected: times.len(),
            got: f.len(),
        });
    }
    if let Some(k) = times
        .windows(2)
        .position(|w| w[1].is_nan() || w[0].is_nan() || w[1] <= w[0])
    {
        return Err(AnalysisError::NonMonotoneGrid(k + 1));
    }
    Ok(())
}

/// Times at which the sampled trace `f` changes sign, refined by bisection on
/// a fresh dense-output solve of `system`.
pub fn find_zero_crossings(
    times: &[f64],
    f: &[f64],
    system: LinearSystem<'_>,
    tol: &Tolerances,
) -> Result<Vec<f64>, AnalysisError> {
    check_grid(times, f)?;
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut exact = Vec::new();
    let mut brackets = Vec::new();
    for k in 0..f.len().saturating_sub(1) {
        let (a, b) = (f[k], f[k + 1]);
        if a * b < 0.0 {
            brackets.push(k);
        } else if b == 0.0 && k + 2 < f.len() && a * f[k + 2] < 0.0 {
            exact.push(times[k + 1]);
        }
    }
    if brackets.is_empty() {
        return Ok(exact);
    }
    let window = (times[brackets[0]], times[*brackets.last().unwrap() + 1]);
    let dense = dense_linear(system.matrix, system.init, window, tol)?;
    let eval = |t: f64| {
        dense
            .eval_functional(t, system.functional)
            .expect("bracket lies inside the dense window")
    };

    let mut roots = exact;
    for k in brackets {
        let (mut lo, mut hi) = (times[k], times[k + 1]);
        let rising = f[k] < 0.0;
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let fm = eval(mid);
            if fm.abs() < CROSSING_TOL * scale || hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                break;
            }
            if (fm < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(mid);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    Ok(roots)
}

/// Height and time of the tallest interior local maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub time_ns: f64,
    pub height: f64,
}

pub fn superradiant_burst(times: &[f64], f: &[f64]) -> Option<Burst> {
    (1..f.len().saturating_sub(1))
        .filter(|&k| f[k - 1] < f[k] && f[k] >= f[k + 1])
        .max_by(|&a, &b| f[a].total_cmp(&f[b]))
        .map(|k| Burst {
            time_ns: times[k],
            height: f[k],
        })
}

fn describe_slot(gen: &RateGenerator, slot: usize) -> String {
    gen.space()
        .indices()
        .get(slot)
        .map(|d| d.to_string())
        .unwrap_or_else(|| "n_nc".to_string())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub model: TermFlags,
    pub n_emitters: u32,
    pub times: Vec<f64>,
    /// Total fluorescence divided by its own maximum.
    pub f_total: Vec<f64>,
    /// Total fluorescence in ns⁻¹.
    pub f_total_raw: Vec<f64>,
    /// `p_σ·F_σ` for each manifold, on the same normalization as `f_total`.
    pub f_per_sigma: PerManifold<Vec<f64>>,
    pub scale: f64,
    pub normalization_warning: bool,
    /// Asymptote of the normalized trace.
    pub asymptote: f64,
    pub asymptote_report: AsymptoteReport,
    pub crossings: Vec<f64>,
    pub burst: Option<Burst>,
    pub most_negative_off_diagonal: PerManifold<Option<(String, String, f64)>>,
    pub params_echo: PerManifold<SpinManifoldParams>,
}

impl SimulationResult {
    pub fn min_normalized(&self) -> f64 {
        self.f_total.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn simulate(
    n_emitters: u32,
    params: &PerManifold<SpinManifoldParams>,
    flags: TermFlags,
    cfg: &IntegratorConfig,
) -> Result<SimulationResult, AnalysisError> {
    let model = ModelSystem::new(n_emitters, params, flags)?;
    let (times, xs) = integrate_linear(&model.matrix, &model.init, cfg)?;
    let dot = |w: &[f64], x: &[f64]| -> f64 { w.iter().zip(x).map(|(a, b)| a * b).sum() };
    let raw: Vec<f64> = xs.iter().map(|x| dot(&model.functional, x)).collect();
    let norm = normalize(&raw);
    let f_per_sigma = model
        .sigma_functionals
        .map(|_, w| xs.iter().map(|x| dot(w, x) / norm.scale).collect());

    let scaled: Vec<f64> = model.functional.iter().map(|w| w / norm.scale).collect();
    let asymptote_report = asymptote_linear(&model.matrix, &model.init, &scaled, &AsymptoteSettings::default())?;
    let crossings = find_zero_crossings(&times, &raw, model.system(), &cfg.into())?;
    let burst = superradiant_burst(&times, &norm.values);
    let most_negative_off_diagonal = model.generators.map(|_, g| {
        g.matrix()
            .most_negative_off_diagonal()
            .map(|(r, c, v)| (describe_slot(g, r), describe_slot(g, c), v))
    });

    Ok(SimulationResult {
        model: flags,
        n_emitters,
        times,
        f_total: norm.values,
        f_total_raw: raw,
        f_per_sigma,
        scale: norm.scale,
        normalization_warning: norm.warning,
        asymptote: asymptote_report.value,
        asymptote_report,
        crossings,
        burst,
        most_negative_off_diagonal,
        params_echo: *params,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub negative_counts: bool,
    pub nonzero_asymptote: bool,
    pub min_normalized: f64,
    pub asymptote: f64,
    pub negativity_tol: f64,
    pub asymptote_tol: f64,
}

impl Verdict {
    pub fn is_physical(&self) -> bool {
        !self.negative_counts && !self.nonzero_asymptote
    }
}

/// Tolerances are relative to the trace maximum, i.e. absolute on the normalized trace.
pub fn physicality_verdict(result: &SimulationResult, asymptote_tol: f64, negativity_tol: f64) -> Verdict {
    let min_normalized = result.min_normalized();
    Verdict {
        negative_counts: min_normalized < -negativity_tol,
        nonzero_asymptote: result.asymptote.abs() > asymptote_tol,
        min_normalized,
        asymptote: result.asymptote,
        negativity_tol,
        asymptote_tol,
    }
}

pub fn default_verdict(result: &SimulationResult) -> Verdict {
    physicality_verdict(result, DEFAULT_ASYMPTOTE_TOL, DEFAULT_NEGATIVITY_TOL)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub model_a: SimulationResult,
    pub model_b: SimulationResult,
    pub verdict_a: Verdict,
    pub verdict_b: Verdict,
}

pub fn compare_models(
    n_emitters: u32,
    params: &PerManifold<SpinManifoldParams>,
    cfg: &IntegratorConfig,
) -> Result<ComparisonReport, AnalysisError> {
    compare_against_b(n_emitters, params, TermFlags::MODEL_A, cfg)
}

/// Runs `flags` and Model B side by side; `flags` fills the `model_a` slot.
pub fn compare_against_b(
    n_emitters: u32,
    params: &PerManifold<SpinManifoldParams>,
    flags: TermFlags,
    cfg: &IntegratorConfig,
) -> Result<ComparisonReport, AnalysisError> {
    let (a, b) = rayon::join(
        || simulate(n_emitters, params, flags, cfg),
        || simulate(n_emitters, params, TermFlags::MODEL_B, cfg),
    );
    let (model_a, model_b) = (a?, b?);
    Ok(ComparisonReport {
        verdict_a: default_verdict(&model_a),
        verdict_b: default_verdict(&model_b),
        model_a,
        model_b,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// The term switched to its Model B variant; `None` for the two baselines.
    pub term: Option<Term>,
    pub flags: TermFlags,
    pub verdict: Option<Verdict>,
    pub crossings: usize,
    pub error: Option<String>,
}

impl AblationRow {
    pub fn removes_negative_counts(&self) -> Option<bool> {
        self.verdict.map(|v| !v.negative_counts)
    }

    pub fn removes_nonzero_asymptote(&self) -> Option<bool> {
        self.verdict.map(|v| !v.nonzero_asymptote)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub n_emitters: u32,
    pub model_a: AblationRow,
    pub model_b: AblationRow,
    pub single_fixes: Vec<AblationRow>,
}

/// Model A with each term in turn replaced by its Model B variant.
pub fn ablate(
    n_emitters: u32,
    params: &PerManifold<SpinManifoldParams>,
    cfg: &IntegratorConfig,
) -> Result<AblationReport, AnalysisError> {
    // surface configuration errors before fanning out
    ModelSystem::new(n_emitters, params, TermFlags::MODEL_A)?;
    cfg.validate()?;

    let mut runs: Vec<(Option<Term>, TermFlags)> = vec![(None, TermFlags::MODEL_A), (None, TermFlags::MODEL_B)];
    runs.extend(
        Term::ALL
            .iter()
            .map(|&t| (Some(t), TermFlags::MODEL_A.with(t, Variant::ModelB))),
    );
    let mut rows: Vec<AblationRow> = runs
        .par_iter()
        .map(|&(term, flags)| match simulate(n_emitters, params, flags, cfg) {
            Ok(r) => AblationRow {
                term,
                flags,
                verdict: Some(default_verdict(&r)),
                crossings: r.crossings.len(),
                error: None,
            },
            Err(e) => AblationRow {
                term,
                flags,
                verdict: None,
                crossings: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let single_fixes = rows.split_off(2);
    let model_b = rows.pop().expect("baseline B");
    let model_a = rows.pop().expect("baseline A");
    Ok(AblationReport {
        n_emitters,
        model_a,
        model_b,
        single_fixes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn normalize_examples() {
        let n = normalize(&[2.0, 4.0, 1.0]);
        assert_eq!(n.values, vec![0.5, 1.0, 0.25]);
        assert_eq!(n.scale, 4.0);
        assert!(!n.warning);

        let z = normalize(&[0.0, 0.0]);
        assert_eq!(z.values, vec![0.0, 0.0]);
        assert_eq!(z.scale, 1.0);
        assert!(z.warning);

        let neg = normalize(&[-1.0, -3.0]);
        assert_eq!(neg.values, vec![-1.0, -3.0]);
        assert!(neg.warning);
    }

    #[test]
    fn normalize_is_idempotent_on_positive_traces() {
        let once = normalize(&[0.3, 1.7, 0.9, 0.01]);
        let twice = normalize(&once.values);
        assert_eq!(once.values, twice.values);
        assert_eq!(twice.scale, 1.0);
    }

    fn oscillator(omega: f64) -> (SparseMatrix, Vec<f64>, Vec<f64>) {
        let g = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, omega, -omega, 0.0]);
        (SparseMatrix::from_dense(&g), vec![0.0, 1.0], vec![1.0, 0.0])
    }

    #[test]
    fn crossings_of_a_sine() {
        let omega = 1.3;
        let (m, init, w) = oscillator(omega);
        let times: Vec<f64> = (0..=300).map(|k| 0.05 * k as f64 + 0.01).collect();
        let f: Vec<f64> = times.iter().map(|t| (omega * t).sin()).collect();
        let tol = Tolerances {
            rel: 1e-12,
            abs: 1e-14,
            max_step: f64::INFINITY,
        };
        let system = LinearSystem {
            matrix: &m,
            init: &init,
            functional: &w,
        };
        let roots = find_zero_crossings(&times, &f, system, &tol).unwrap();
        let expected: Vec<f64> = (1..=6).map(|k| k as f64 * std::f64::consts::PI / omega).collect();
        assert!(*times.last().unwrap() < 7.0 * std::f64::consts::PI / omega);
        assert_eq!(roots.len(), expected.len());
        for (r, e) in roots.iter().zip(&expected) {
            assert!((r - e).abs() < 1e-9, "root {r} vs {e}");
        }
    }

    #[test]
    fn crossings_reject_bad_grid() {
        let (m, init, w) = oscillator(1.0);
        let system = LinearSystem {
            matrix: &m,
            init: &init,
            functional: &w,
        };
        let tol = Tolerances {
            rel: 1e-9,
            abs: 1e-12,
            max_step: f64::INFINITY,
        };
        assert!(matches!(
            find_zero_crossings(&[0.0, 1.0, 1.0], &[1.0, -1.0, 1.0], system, &tol),
            Err(AnalysisError::NonMonotoneGrid(2))
        ));
        assert!(find_zero_crossings(&[0.0, 1.0], &[1.0], system, &tol).is_err());
    }

    #[test]
    fn burst_detection() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(superradiant_burst(&t, &[1.0, 0.5, 0.2, 0.1, 0.0]), None);
        assert_eq!(
            superradiant_burst(&t, &[0.5, 0.7, 1.0, 0.4, 0.1]),
            Some(Burst {
                time_ns: 2.0,
                height: 1.0
            })
        );
    }

    #[test]
    fn n2_comparison_shapes() {
        let cfg = IntegratorConfig::new(100.0, 400);
        let report = compare_models(2, &presets::N2.params(), &cfg).unwrap();
        assert!(report.model_a.f_total.iter().all(|v| v.is_finite()));
        assert!(report.verdict_a.nonzero_asymptote);
        assert!(report.model_a.asymptote > 0.0);
        assert!(report.verdict_b.is_physical(), "{:?}", report.verdict_b);
        assert!(report.model_b.crossings.is_empty());
    }

    #[test]
    fn without_dephasing_or_isc_models_coincide() {
        let base = presets::N7.params();
        let params = base.map(|_, p| SpinManifoldParams {
            gamma_d: 0.0,
            gamma_isc: 0.0,
            ..*p
        });
        let cfg = IntegratorConfig::new(50.0, 200);
        let a = ModelSystem::new(7, &params, TermFlags::MODEL_A).unwrap();
        let b = ModelSystem::new(7, &params, TermFlags::MODEL_B).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let (_, xa) = integrate_linear(&a.matrix, &a.init, &cfg).unwrap();
        let (_, xb) = integrate_linear(&b.matrix, &b.init, &cfg).unwrap();
        assert_eq!(xa, xb);
    }

    #[test]
    fn model_system_rejects_mismatched_gamma() {
        let mut p = presets::N2.params();
        p.sigma1.gamma *= 2.0;
        assert!(ModelSystem::new(2, &p, TermFlags::MODEL_B).is_err());
    }
}
