//! Brute-force Dicke states over the full `2^n` product basis.
//!
//! Every state handled here is a sum of product states with integer
//! coefficients times a common `√scale`, so overlaps and expectation values
//! come out as exact rationals. Nothing in this module touches the rate
//! generator; the comparison lives in [`verify`].

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::OracleError;
use crate::generator::emission_loss_coefficient;
use crate::space::{DickeIndex, HalfInt};

/// Largest emitter count the oracle enumerates.
pub const MAX_ORACLE_N: u32 = 14;

pub type Exact = Ratio<i128>;

/// A product state: bit `k` of `excited_mask` set means emitter `k` is in `|e>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymmetricBasisState {
    pub n: u32,
    pub excited_mask: u32,
}

impl SymmetricBasisState {
    pub fn excitations(self) -> u32 {
        self.excited_mask.count_ones()
    }

    pub fn is_excited(self, site: u32) -> bool {
        self.excited_mask & (1 << site) != 0
    }
}

/// `√scale · Σ coeff |mask>`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactState {
    pub n: u32,
    pub scale: Exact,
    pub amplitudes: BTreeMap<SymmetricBasisState, i128>,
}

impl ExactState {
    pub fn norm_squared(&self) -> Exact {
        let s: i128 = self.amplitudes.values().map(|c| c * c).sum();
        self.scale * s
    }

    /// `<self|other>²` together with the sign of `<self|other>`.
    pub fn overlap_squared(&self, other: &ExactState) -> (Exact, i32) {
        let sum: i128 = self
            .amplitudes
            .iter()
            .filter_map(|(b, c)| other.amplitudes.get(b).map(|d| c * d))
            .sum();
        (self.scale * other.scale * sum * sum, sum.signum() as i32)
    }

    /// `<self|other>` as a float.
    pub fn overlap(&self, other: &ExactState) -> f64 {
        let (sq, sign) = self.overlap_squared(other);
        f64::from(sign) * ratio_to_f64(sq).sqrt()
    }

    /// `<self| 2 s^z_site |self>`, exact.
    pub fn phase_flip_expectation(&self, site: u32) -> Exact {
        let s: i128 = self
            .amplitudes
            .iter()
            .map(|(b, c)| if b.is_excited(site) { c * c } else { -c * c })
            .sum();
        self.scale * s
    }

    /// `2 s^z_site |self>`: flips the sign of every ground-state component at `site`.
    pub fn apply_phase_flip(&self, site: u32) -> ExactState {
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(&b, &c)| (b, if b.is_excited(site) { c } else { -c }))
            .collect();
        ExactState {
            n: self.n,
            scale: self.scale,
            amplitudes,
        }
    }

    /// `Σ_k |g><e|_k |self>`.
    pub fn apply_lowering(&self) -> ExactState {
        let mut amplitudes: BTreeMap<SymmetricBasisState, i128> = BTreeMap::new();
        for (&b, &c) in &self.amplitudes {
            for site in 0..self.n {
                if b.is_excited(site) {
                    let lowered = SymmetricBasisState {
                        n: self.n,
                        excited_mask: b.excited_mask & !(1 << site),
                    };
                    *amplitudes.entry(lowered).or_insert(0) += c;
                }
            }
        }
        amplitudes.retain(|_, c| *c != 0);
        ExactState {
            n: self.n,
            scale: self.scale,
            amplitudes,
        }
    }
}

pub fn ratio_to_f64(r: Exact) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `C(n, k)` by the multiplicative formula.
pub fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

fn excitations_for(n: u32, m: HalfInt) -> Result<u32, OracleError> {
    let twice_k = n as i32 + m.twice();
    if m.twice().abs() > n as i32 || twice_k % 2 != 0 {
        return Err(OracleError::InvalidProjection { n, m });
    }
    Ok((twice_k / 2) as u32)
}

fn check_n(n: u32) -> Result<(), OracleError> {
    if n == 0 || n > MAX_ORACLE_N {
        return Err(OracleError::SizeLimit { n, max: MAX_ORACLE_N });
    }
    Ok(())
}

fn check_site(n: u32, site: u32) -> Result<(), OracleError> {
    if site >= n {
        return Err(OracleError::InvalidSite { n, site });
    }
    Ok(())
}

/// Uniform superposition of all `k`-excitation masks over the sites `others`,
/// with `fixed` bits OR-ed in.
fn symmetric_superposition(n: u32, others: &[u32], k: u32, fixed: u32) -> ExactState {
    let mut amplitudes = BTreeMap::new();
    let width = others.len() as u32;
    for sub in 0u32..(1 << width) {
        if sub.count_ones() != k {
            continue;
        }
        let mut mask = fixed;
        for (bit, &site) in others.iter().enumerate() {
            if sub & (1 << bit) != 0 {
                mask |= 1 << site;
            }
        }
        amplitudes.insert(SymmetricBasisState { n, excited_mask: mask }, 1);
    }
    ExactState {
        n,
        scale: Exact::new(1, binomial(width, k) as i128),
        amplitudes,
    }
}

/// `|J = n/2, M = m>` as the normalized sum over all `C(n, n/2 + m)` masks.
pub fn dicke_state(n: u32, m: HalfInt) -> Result<ExactState, OracleError> {
    check_n(n)?;
    let k = excitations_for(n, m)?;
    let sites: Vec<u32> = (0..n).collect();
    Ok(symmetric_superposition(n, &sites, k, 0))
}

pub fn phase_flip_amplitude_exact(n: u32, m: HalfInt, site: u32) -> Result<Exact, OracleError> {
    check_site(n, site)?;
    Ok(dicke_state(n, m)?.phase_flip_expectation(site))
}

/// `<J,M| 2 s^z_site |J,M>` by enumeration.
pub fn phase_flip_amplitude(n: u32, m: HalfInt, site: u32) -> Result<f64, OracleError> {
    phase_flip_amplitude_exact(n, m, site).map(ratio_to_f64)
}

/// Overlaps of `2 s^z_site |J,M>` with the two decoupled branches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecouplingBranches {
    /// `|<e_site, J-1/2, M-1/2 | 2 s^z | J,M>|²`
    pub excited: Exact,
    /// `|<g_site, J-1/2, M+1/2 | 2 s^z | J,M>|²`
    pub ground: Exact,
    /// Sign of the excited-branch amplitude (0 when the branch is empty).
    pub excited_sign: i32,
    /// Sign of the ground-branch amplitude (0 when the branch is empty).
    pub ground_sign: i32,
}

pub fn decoupling_branches(n: u32, m: HalfInt, site: u32) -> Result<DecouplingBranches, OracleError> {
    if n < 2 {
        return Err(OracleError::SizeLimit { n, max: MAX_ORACLE_N });
    }
    check_site(n, site)?;
    let k = excitations_for(n, m)?;
    let flipped = dicke_state(n, m)?.apply_phase_flip(site);
    let others: Vec<u32> = (0..n).filter(|&s| s != site).collect();

    let (excited, excited_sign) = if k >= 1 {
        symmetric_superposition(n, &others, k - 1, 1 << site).overlap_squared(&flipped)
    } else {
        (Exact::from_integer(0), 0)
    };
    let (ground, ground_sign) = if k < n {
        symmetric_superposition(n, &others, k, 0).overlap_squared(&flipped)
    } else {
        (Exact::from_integer(0), 0)
    };
    Ok(DecouplingBranches {
        excited,
        ground,
        excited_sign,
        ground_sign,
    })
}

/// Squared branch weights `(w_excited, w_ground)`.
pub fn decoupling_weights(n: u32, m: HalfInt, site: u32) -> Result<(f64, f64), OracleError> {
    let b = decoupling_branches(n, m, site)?;
    Ok((ratio_to_f64(b.excited), ratio_to_f64(b.ground)))
}

pub fn lowering_coefficient_exact(n: u32, m: HalfInt) -> Result<Exact, OracleError> {
    if m.twice() <= -(n as i32) {
        return Err(OracleError::InvalidProjection { n, m });
    }
    let upper = dicke_state(n, m)?;
    let lower = dicke_state(n, m - HalfInt::ONE)?;
    Ok(lower.overlap_squared(&upper.apply_lowering()).0)
}

/// `|<J,M-1| J⁻ |J,M>|²` by enumeration.
pub fn lowering_coefficient(n: u32, m: HalfInt) -> Result<f64, OracleError> {
    lowering_coefficient_exact(n, m).map(ratio_to_f64)
}

/// Largest deviation found for one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub cases: usize,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub max_n: u32,
    pub checks: Vec<IdentityCheck>,
}

impl OracleSummary {
    pub fn worst(&self) -> f64 {
        self.checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max)
    }
}

/// Checks the three Dicke identities for every `n ≤ max_n`, every `M` and every site.
///
/// * `<2 s^z_j> = M/J`
/// * decoupling weights `((J+M)/2J, (J-M)/2J)`, summing to one, with opposite signs
/// * `|<J,M-1|J⁻|J,M>|²` equals the generator's emission coefficient
pub fn verify(max_n: u32) -> Result<OracleSummary, OracleError> {
    check_n(max_n)?;
    let mut phase = IdentityCheck {
        identity: "<2 s^z_j> = M/J".into(),
        cases: 0,
        max_deviation: 0.0,
    };
    let mut branches = IdentityCheck {
        identity: "decoupling weights = ((J+M)/2J, (J-M)/2J)".into(),
        cases: 0,
        max_deviation: 0.0,
    };
    let mut lowering = IdentityCheck {
        identity: "|<J,M-1|J-|J,M>|^2 = emission coefficient".into(),
        cases: 0,
        max_deviation: 0.0,
    };

    for n in 1..=max_n {
        let j = HalfInt::from_twice(n as i32);
        let jf = j.to_f64();
        for twice_m in (-(n as i32)..=n as i32).step_by(2) {
            let m = HalfInt::from_twice(twice_m);
            let mf = m.to_f64();
            for site in 0..n {
                let amp = phase_flip_amplitude(n, m, site)?;
                phase.max_deviation = phase.max_deviation.max((amp - mf / jf).abs());
                phase.cases += 1;

                if n >= 2 {
                    let b = decoupling_branches(n, m, site)?;
                    let (we, wg) = (ratio_to_f64(b.excited), ratio_to_f64(b.ground));
                    let dev = (we - (jf + mf) / (2.0 * jf))
                        .abs()
                        .max((wg - (jf - mf) / (2.0 * jf)).abs())
                        .max((we + wg - 1.0).abs());
                    // the two branches enter with a relative minus sign
                    let sign_ok = b.excited_sign == 0 || b.ground_sign == 0 || b.excited_sign == -b.ground_sign;
                    branches.max_deviation = branches.max_deviation.max(if sign_ok { dev } else { f64::INFINITY });
                    branches.cases += 1;
                }
            }
            if twice_m > -(n as i32) {
                let exact = lowering_coefficient_exact(n, m)?;
                let index = DickeIndex::new(j, m).expect("enumerated index is valid");
                let expected = emission_loss_coefficient(index);
                let expected = Exact::new(i128::from(*expected.numer()), i128::from(*expected.denom()));
                let dev = (ratio_to_f64(exact) - ratio_to_f64(expected)).abs();
                lowering.max_deviation = lowering.max_deviation.max(dev);
                lowering.cases += 1;
            }
        }
    }
    Ok(OracleSummary {
        max_n,
        checks: vec![phase, branches, lowering],
    })
}
