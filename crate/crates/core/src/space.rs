//! Collective (J, M) ladder indexing and initial populations.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::SpaceError;

/// Largest emitter count accepted by [`build_state_space`] unless a cap is given.
pub const DEFAULT_MAX_EMITTERS: u32 = 64;

/// A value `k/2` for integer `k`, stored as `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(value: i32) -> Self {
        HalfInt(2 * value)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn to_ratio(self) -> Ratio<i64> {
        Ratio::new(i64::from(self.0), 2)
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// A collective state label `|J, M>` with `J >= 1/2`, `|M| <= J` and `J - M` integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DickeIndex {
    j: HalfInt,
    m: HalfInt,
}

impl DickeIndex {
    pub fn new(j: HalfInt, m: HalfInt) -> Result<Self, SpaceError> {
        let valid = j.twice() >= 1 && m.twice().abs() <= j.twice() && (j.twice() - m.twice()).rem_euclid(2) == 0;
        if valid {
            Ok(DickeIndex { j, m })
        } else {
            Err(SpaceError::InvalidIndex { j, m })
        }
    }

    pub fn j(self) -> HalfInt {
        self.j
    }

    pub fn m(self) -> HalfInt {
        self.m
    }

    /// `(J + 1/2, M + 1/2)`, the source of dephasing and ISC transfer into `self`.
    pub fn dephasing_source(self) -> DickeIndex {
        DickeIndex {
            j: self.j + HalfInt::HALF,
            m: self.m + HalfInt::HALF,
        }
    }

    /// `(J, M + 1)`, the source of emission into `self`; `None` at the top of the ladder.
    pub fn emission_source(self) -> Option<DickeIndex> {
        (self.m < self.j).then(|| DickeIndex {
            j: self.j,
            m: self.m + HalfInt::ONE,
        })
    }
}

impl fmt::Display for DickeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.j, self.m)
    }
}

/// Spin-projection manifold of an NV domain. `±1` are treated as one manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    #[serde(rename = "sigma0")]
    Zero,
    #[serde(rename = "sigma1")]
    PlusMinusOne,
}

impl Manifold {
    pub const ALL: [Manifold; 2] = [Manifold::Zero, Manifold::PlusMinusOne];
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Zero => f.write_str("sigma=0"),
            Manifold::PlusMinusOne => f.write_str("sigma=±1"),
        }
    }
}

/// A value held once per manifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerManifold<T> {
    pub sigma0: T,
    pub sigma1: T,
}

impl<T> PerManifold<T> {
    pub fn new(sigma0: T, sigma1: T) -> Self {
        PerManifold { sigma0, sigma1 }
    }

    pub fn get(&self, sigma: Manifold) -> &T {
        match sigma {
            Manifold::Zero => &self.sigma0,
            Manifold::PlusMinusOne => &self.sigma1,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Manifold, &T) -> U) -> PerManifold<U> {
        PerManifold {
            sigma0: f(Manifold::Zero, &self.sigma0),
            sigma1: f(Manifold::PlusMinusOne, &self.sigma1),
        }
    }

    pub fn try_map<U, E>(&self, mut f: impl FnMut(Manifold, &T) -> Result<U, E>) -> Result<PerManifold<U>, E> {
        Ok(PerManifold {
            sigma0: f(Manifold::Zero, &self.sigma0)?,
            sigma1: f(Manifold::PlusMinusOne, &self.sigma1)?,
        })
    }
}

/// Every `(J, M)` with `1/2 <= J <= N/2`, ordered by descending `J` then descending `M`.
///
/// `J = 0` levels are not tracked; flux that would reach them leaves the space.
#[derive(Clone, Debug)]
pub struct StateSpace {
    n_emitters: u32,
    indices: Vec<DickeIndex>,
    index_of: HashMap<DickeIndex, usize>,
}

impl StateSpace {
    pub fn n_emitters(&self) -> u32 {
        self.n_emitters
    }

    /// Number of population slots, `N(N+3)/2`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Length of the full state vector: every slot plus the trailing `n_nc` entry.
    pub fn dim(&self) -> usize {
        self.indices.len() + 1
    }

    /// Position of `n_nc` in the full state vector.
    pub fn n_nc_slot(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[DickeIndex] {
        &self.indices
    }

    pub fn slot(&self, index: DickeIndex) -> Option<usize> {
        self.index_of.get(&index).copied()
    }

    /// `N/2`, the top cooperation number.
    pub fn max_j(&self) -> HalfInt {
        HalfInt::from_twice(self.n_emitters as i32)
    }
}

pub fn build_state_space(n_emitters: u32) -> Result<StateSpace, SpaceError> {
    build_state_space_capped(n_emitters, DEFAULT_MAX_EMITTERS)
}

pub fn build_state_space_capped(n_emitters: u32, cap: u32) -> Result<StateSpace, SpaceError> {
    if n_emitters == 0 || n_emitters > cap {
        return Err(SpaceError::SizeLimit { n: n_emitters, cap });
    }
    let n = n_emitters as i32;
    let mut indices = Vec::with_capacity((n * (n + 3) / 2) as usize);
    for twice_j in (1..=n).rev() {
        for twice_m in (-twice_j..=twice_j).rev().step_by(2) {
            indices.push(DickeIndex {
                j: HalfInt::from_twice(twice_j),
                m: HalfInt::from_twice(twice_m),
            });
        }
    }
    let index_of = indices.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    Ok(StateSpace {
        n_emitters,
        indices,
        index_of,
    })
}

/// Populations `P_{J,M}` and the independent-emitter count `n_nc` at time `t` (ns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub sigma: Manifold,
    pub p: Vec<f64>,
    pub n_nc: f64,
    pub t: f64,
}

impl PopulationState {
    /// Flattens into the generator's vector layout: populations, then `n_nc`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.p.len() + 1);
        v.extend_from_slice(&self.p);
        v.push(self.n_nc);
        v
    }

    pub fn from_vector(sigma: Manifold, t: f64, v: &[f64]) -> Self {
        let (n_nc, p) = v.split_last().expect("state vector holds at least n_nc");
        PopulationState {
            sigma,
            p: p.to_vec(),
            n_nc: *n_nc,
            t,
        }
    }

    pub fn dim(&self) -> usize {
        self.p.len() + 1
    }
}

/// Exact occupation probabilities of the even top-ladder mixture: `1/(N+1)` on each `(N/2, M)`.
pub fn initial_populations_exact(space: &StateSpace) -> Vec<Ratio<i64>> {
    let top = space.max_j();
    let share = Ratio::new(1, i64::from(space.n_emitters()) + 1);
    space
        .indices()
        .iter()
        .map(|d| if d.j() == top { share } else { Ratio::from_integer(0) })
        .collect()
}

pub fn initial_state(space: &StateSpace, sigma: Manifold) -> PopulationState {
    let p = initial_populations_exact(space)
        .into_iter()
        .map(|r| *r.numer() as f64 / *r.denom() as f64)
        .collect();
    PopulationState {
        sigma,
        p,
        n_nc: 0.0,
        t: 0.0,
    }
}
