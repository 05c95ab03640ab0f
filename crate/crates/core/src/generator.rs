//! Rate generators for the collective-emission master equation.
//!
//! The population vector of one spin manifold evolves as `dx/dt = G x` with
//! `x = (P_{J,M}..., n_nc)`. Three processes populate `G`:
//!
//! * collective emission down each `J` ladder, `(J, M+1) -> (J, M)`;
//! * dephasing, which removes one emitter from the collective state,
//!   `(J+1/2, M+1/2) -> (J, M)`, and feeds the independent-emitter pool `n_nc`;
//! * intersystem crossing along the same `(J+1/2, M+1/2) -> (J, M)` channel.
//!
//! The published equations (Model A) and the corrected ones (Model B) differ in
//! nine coefficient factors, labelled `A` through `I`. [`TermFlags`] selects the
//! variant of each factor independently so single fixes can be studied in
//! isolation; [`TermFlags::MODEL_A`] and [`TermFlags::MODEL_B`] are the two
//! pure models.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::GeneratorError;
use crate::space::{DickeIndex, HalfInt, PerManifold, PopulationState, StateSpace};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Converts a rate quoted in units of 2π MHz to ns⁻¹.
pub fn rate_from_2pi_mhz(value: f64) -> f64 {
    TAU * value * 1e-3
}

/// Rates (ns⁻¹) for one spin manifold and its weight `p_σ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinManifoldParams {
    pub gamma: f64,
    pub gamma_d: f64,
    pub gamma_isc: f64,
    pub weight: f64,
}

impl SpinManifoldParams {
    pub fn new(gamma: f64, gamma_d: f64, gamma_isc: f64, weight: f64) -> Result<Self, GeneratorError> {
        let p = SpinManifoldParams {
            gamma,
            gamma_d,
            gamma_isc,
            weight,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(GeneratorError::InvalidParameter {
                name: "gamma",
                value: self.gamma,
            });
        }
        for (name, value) in [("gamma_d", self.gamma_d), ("gamma_isc", self.gamma_isc)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(GeneratorError::InvalidParameter { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(GeneratorError::InvalidWeight(self.weight));
        }
        Ok(())
    }
}

/// One of the nine factors that differ between Model A and Model B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl Term {
    pub const ALL: [Term; 9] = [
        Term::A,
        Term::B,
        Term::C,
        Term::D,
        Term::E,
        Term::F,
        Term::G,
        Term::H,
        Term::I,
    ];

    fn bit(self) -> u16 {
        1 << (self as u16)
    }

    /// Short description of where the factor sits.
    pub fn role(self) -> &'static str {
        match self {
            Term::A => "dephasing bracket prefactor",
            Term::B => "dephasing loss multiplicity",
            Term::C => "dephasing loss probability",
            Term::D => "sign of dephasing transfer",
            Term::E => "dephasing transfer probability",
            Term::F => "ISC gain coefficient",
            Term::G => "ISC loss coefficient",
            Term::H => "n_nc feed probability",
            Term::I => "fluorescence coefficient",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    ModelA,
    ModelB,
}

/// Per-term choice between the Model A and Model B factor.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermFlags(u16);

impl TermFlags {
    pub const MODEL_A: TermFlags = TermFlags(0);
    pub const MODEL_B: TermFlags = TermFlags(0x1ff);

    pub fn variant(self, term: Term) -> Variant {
        if self.0 & term.bit() != 0 {
            Variant::ModelB
        } else {
            Variant::ModelA
        }
    }

    pub fn with(self, term: Term, variant: Variant) -> TermFlags {
        match variant {
            Variant::ModelA => TermFlags(self.0 & !term.bit()),
            Variant::ModelB => TermFlags(self.0 | term.bit()),
        }
    }

    pub fn is_pure(self) -> bool {
        self == Self::MODEL_A || self == Self::MODEL_B
    }

    /// Nine characters, `a` or `b`, in term order A..I.
    pub fn code(self) -> String {
        Term::ALL
            .iter()
            .map(|&t| match self.variant(t) {
                Variant::ModelA => 'a',
                Variant::ModelB => 'b',
            })
            .collect()
    }

    pub fn label(self) -> String {
        match self {
            Self::MODEL_A => "Model A".to_string(),
            Self::MODEL_B => "Model B".to_string(),
            other => format!("custom:{}", other.code()),
        }
    }
}

impl fmt::Debug for TermFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TermFlags({})", self.code())
    }
}

impl fmt::Display for TermFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TermFlags {
    type Err = String;

    /// Accepts `a`, `b`, or a nine-character `a`/`b` code.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => return Ok(Self::MODEL_A),
            "b" => return Ok(Self::MODEL_B),
            _ => {}
        }
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != Term::ALL.len() {
            return Err(format!("expected 9 term flags (a/b), got {s:?}"));
        }
        let mut flags = Self::MODEL_A;
        for (&term, c) in Term::ALL.iter().zip(chars) {
            let variant = match c.to_ascii_lowercase() {
                'a' => Variant::ModelA,
                'b' => Variant::ModelB,
                other => return Err(format!("invalid term flag {other:?} in {s:?}")),
            };
            flags = flags.with(term, variant);
        }
        Ok(flags)
    }
}

impl Serialize for TermFlags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for TermFlags {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

type Q = Ratio<i64>;

fn q(x: HalfInt) -> Q {
    x.to_ratio()
}

fn q_int(x: i64) -> Q {
    Q::from_integer(x)
}

fn to_f64(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `|M/J|²` for a valid index.
fn dephasing_probability(d: DickeIndex) -> Q {
    let ratio = Q::new(i64::from(d.m().twice()), i64::from(d.j().twice()));
    ratio * ratio
}

/// Exact value of a term's factor at the target index `(J, M)`.
///
/// Terms D and E multiply the transfer from `(J+1/2, M+1/2)`; E is evaluated
/// at that source, the rest at the target.
pub fn term_factor(term: Term, variant: Variant, at: DickeIndex) -> Q {
    let j = q(at.j());
    let m = q(at.m());
    let one = q_int(1);
    let is_b = variant == Variant::ModelB;
    match term {
        Term::A => {
            if is_b {
                one
            } else {
                q_int(2) * j
            }
        }
        Term::B => {
            if is_b {
                q_int(2) * j
            } else {
                one
            }
        }
        Term::C | Term::H => {
            let p = dephasing_probability(at);
            if is_b {
                p
            } else {
                one - p
            }
        }
        Term::D => {
            if is_b {
                q_int(-2)
            } else {
                q_int(2)
            }
        }
        Term::E => {
            let p = dephasing_probability(at.dephasing_source());
            if is_b {
                p
            } else {
                one - p
            }
        }
        Term::F => {
            let base = j + m + one;
            if is_b {
                base * (j - m + one)
            } else {
                base
            }
        }
        Term::G => {
            let base = j + m;
            if is_b {
                base * (j - m + one)
            } else {
                base
            }
        }
        Term::I => {
            if is_b {
                m * (m - one)
            } else {
                m * (m + one)
            }
        }
    }
}

/// `J(J+1) - M(M+1)`: emission rate coefficient from `(J, M+1)` into `(J, M)`.
pub fn emission_gain_coefficient(at: DickeIndex) -> Q {
    let (j, m) = (q(at.j()), q(at.m()));
    j * (j + 1) - m * (m + 1)
}

/// `J(J+1) - M(M-1)`: total emission rate coefficient out of `(J, M)`.
pub fn emission_loss_coefficient(at: DickeIndex) -> Q {
    let (j, m) = (q(at.j()), q(at.m()));
    j * (j + 1) - m * (m - 1)
}

/// Fluorescence weight of a population slot, without the `γ` prefactor.
pub fn fluorescence_coefficient(at: DickeIndex, flags: TermFlags) -> Q {
    let j = q(at.j());
    j * (j + 1) - term_factor(Term::I, flags.variant(Term::I), at)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GeneratorOptions {
    /// Reject flag sets that mix Model A and Model B variants.
    pub strict: bool,
}

#[derive(Clone, Debug)]
pub struct RateGenerator {
    space: StateSpace,
    matrix: SparseMatrix,
    flags: TermFlags,
    params: SpinManifoldParams,
}

impl RateGenerator {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn flags(&self) -> TermFlags {
        self.flags
    }

    pub fn params(&self) -> &SpinManifoldParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Linear weights `w` with `F = w · x` for this manifold.
    pub fn fluorescence_weights(&self) -> Vec<f64> {
        fluorescence_weights(&self.space, &self.params, self.flags)
    }
}

pub fn build_generator(
    space: &StateSpace,
    params: &SpinManifoldParams,
    flags: TermFlags,
) -> Result<RateGenerator, GeneratorError> {
    build_generator_with(space, params, flags, GeneratorOptions::default())
}

pub fn build_generator_with(
    space: &StateSpace,
    params: &SpinManifoldParams,
    flags: TermFlags,
    options: GeneratorOptions,
) -> Result<RateGenerator, GeneratorError> {
    params.validate()?;
    if options.strict && !flags.is_pure() {
        return Err(GeneratorError::MixedFlags(flags.code()));
    }
    let v = |t: Term| flags.variant(t);
    let n_nc = space.n_nc_slot();
    let mut b = TripletBuilder::new(space.dim());

    for (row, &at) in space.indices().iter().enumerate() {
        // collective emission
        b.add(row, row, -params.gamma * to_f64(emission_loss_coefficient(at)));
        if let Some(src) = at.emission_source() {
            let col = space.slot(src).expect("emission source lies on the same ladder");
            b.add(row, col, params.gamma * to_f64(emission_gain_coefficient(at)));
        }

        // dephasing loss
        let prefactor = term_factor(Term::A, v(Term::A), at);
        let loss = prefactor * term_factor(Term::B, v(Term::B), at) * term_factor(Term::C, v(Term::C), at);
        b.add(row, row, -params.gamma_d * to_f64(loss));

        // dephasing and ISC transfer from (J+1/2, M+1/2); absent on the top ladder
        if let Some(col) = space.slot(at.dephasing_source()) {
            let j_up = q(at.j()) + Q::new(1, 2);
            let transfer =
                prefactor * term_factor(Term::D, v(Term::D), at) * j_up * term_factor(Term::E, v(Term::E), at);
            b.add(row, col, -params.gamma_d * to_f64(transfer));
            b.add(
                row,
                col,
                params.gamma_isc * to_f64(term_factor(Term::F, v(Term::F), at)),
            );
        }
        b.add(
            row,
            row,
            -params.gamma_isc * to_f64(term_factor(Term::G, v(Term::G), at)),
        );

        // independent-emitter pool
        let feed = term_factor(Term::H, v(Term::H), at) * q_int(2) * q(at.j());
        b.add(n_nc, row, params.gamma_d * to_f64(feed));
    }
    b.add(n_nc, n_nc, -(params.gamma + params.gamma_isc));

    Ok(RateGenerator {
        space: space.clone(),
        matrix: b.build(),
        flags,
        params: *params,
    })
}

pub fn fluorescence_weights(space: &StateSpace, params: &SpinManifoldParams, flags: TermFlags) -> Vec<f64> {
    let mut w: Vec<f64> = space
        .indices()
        .iter()
        .map(|&at| params.gamma * to_f64(fluorescence_coefficient(at, flags)))
        .collect();
    w.push(params.gamma);
    w
}

/// Photon emission rate (ns⁻¹) of one manifold.
pub fn fluorescence(
    space: &StateSpace,
    state: &PopulationState,
    params: &SpinManifoldParams,
    flags: TermFlags,
) -> Result<f64, GeneratorError> {
    if state.dim() != space.dim() {
        return Err(GeneratorError::DimensionMismatch {
            expected: space.dim(),
            got: state.dim(),
        });
    }
    let w = fluorescence_weights(space, params, flags);
    let collective: f64 = state.p.iter().zip(&w).map(|(p, w)| p * w).sum();
    Ok(collective + params.gamma * state.n_nc)
}

/// `p₀·F₀ + (1 − p₀)·F₁`, with `p₀` taken from the σ = 0 parameters.
pub fn total_fluorescence(
    space: &StateSpace,
    states: PerManifold<&PopulationState>,
    params: PerManifold<&SpinManifoldParams>,
    flags: TermFlags,
) -> Result<f64, GeneratorError> {
    if params.sigma0.gamma != params.sigma1.gamma {
        return Err(GeneratorError::ManifoldMismatch("gamma"));
    }
    let p0 = params.sigma0.weight;
    if !(0.0..=1.0).contains(&p0) {
        return Err(GeneratorError::InvalidWeight(p0));
    }
    let f0 = fluorescence(space, states.sigma0, params.sigma0, flags)?;
    let f1 = fluorescence(space, states.sigma1, params.sigma1, flags)?;
    Ok(p0 * f0 + (1.0 - p0) * f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_state_space, initial_state, Manifold};

    fn idx(tj: i32, tm: i32) -> DickeIndex {
        DickeIndex::new(HalfInt::from_twice(tj), HalfInt::from_twice(tm)).unwrap()
    }

    fn params(gamma: f64, gamma_d: f64, gamma_isc: f64) -> SpinManifoldParams {
        SpinManifoldParams::new(gamma, gamma_d, gamma_isc, 1.0).unwrap()
    }

    #[test]
    fn unit_conversion_is_exact_for_unit_rate() {
        assert_eq!(rate_from_2pi_mhz(1000.0 / TAU), 1.0);
    }

    #[test]
    fn n1_model_b_top_diagonal() {
        let space = build_state_space(1).unwrap();
        let (g, gd, gi) = (0.3, 0.7, 0.11);
        let gen = build_generator(&space, &params(g, gd, gi), TermFlags::MODEL_B).unwrap();
        let top = space.slot(idx(1, 1)).unwrap();
        assert_eq!(gen.matrix().get(top, top), -(g * 1.0) + -(gd * 1.0) + -(gi * 1.0));
    }

    #[test]
    fn emission_loss_at_seven_halves_one_half() {
        let at = idx(7, 1);
        assert_eq!(emission_loss_coefficient(at), Q::from_integer(16));
        let (j, m) = (Q::new(7, 2), Q::new(1, 2));
        assert_eq!(emission_loss_coefficient(at), (j + m) * (j - m + 1));
    }

    #[test]
    fn model_b_off_diagonals_nonnegative() {
        for n in 1..=12 {
            let space = build_state_space(n).unwrap();
            let gen = build_generator(&space, &params(0.03, 1.6, 0.06), TermFlags::MODEL_B).unwrap();
            assert_eq!(gen.matrix().most_negative_off_diagonal(), None, "N = {n}");
        }
    }

    #[test]
    fn model_a_has_negative_transfer() {
        let space = build_state_space(7).unwrap();
        let gen = build_generator(&space, &params(0.03, 1.6, 0.06), TermFlags::MODEL_A).unwrap();
        let (_, _, v) = gen.matrix().most_negative_off_diagonal().unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn emission_never_couples_across_ladders() {
        let space = build_state_space(6).unwrap();
        let gen = build_generator(&space, &params(1.0, 0.0, 0.0), TermFlags::MODEL_A).unwrap();
        for (r, c, _) in gen.matrix().iter() {
            if r < space.len() && c < space.len() {
                assert_eq!(space.indices()[r].j(), space.indices()[c].j());
            }
        }
    }

    #[test]
    fn transfer_couples_only_from_upper_neighbour() {
        let space = build_state_space(6).unwrap();
        let mut p = params(1.0, 1.0, 1.0);
        p.gamma = 1e-300; // keep emission entries negligible but valid
        let gen = build_generator(&space, &p, TermFlags::MODEL_B).unwrap();
        for (r, c, v) in gen.matrix().iter() {
            if r == c || r >= space.len() || c >= space.len() || v.abs() < 1e-200 {
                continue;
            }
            assert_eq!(space.indices()[c], space.indices()[r].dephasing_source());
        }
    }

    #[test]
    fn strict_mode_rejects_mixed_flags() {
        let space = build_state_space(2).unwrap();
        let mixed = TermFlags::MODEL_A.with(Term::D, Variant::ModelB);
        let strict = GeneratorOptions { strict: true };
        assert!(build_generator(&space, &params(1.0, 1.0, 1.0), mixed).is_ok());
        assert!(matches!(
            build_generator_with(&space, &params(1.0, 1.0, 1.0), mixed, strict),
            Err(GeneratorError::MixedFlags(_))
        ));
        assert!(build_generator_with(&space, &params(1.0, 1.0, 1.0), TermFlags::MODEL_B, strict).is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SpinManifoldParams::new(0.0, 1.0, 1.0, 0.5).is_err());
        assert!(SpinManifoldParams::new(1.0, -1.0, 1.0, 0.5).is_err());
        assert!(SpinManifoldParams::new(1.0, 1.0, f64::NAN, 0.5).is_err());
        assert!(SpinManifoldParams::new(1.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn flag_codes_parse() {
        assert_eq!("a".parse::<TermFlags>().unwrap(), TermFlags::MODEL_A);
        assert_eq!("bbbbbbbbb".parse::<TermFlags>().unwrap(), TermFlags::MODEL_B);
        let f: TermFlags = "abaaaaaab".parse().unwrap();
        assert_eq!(f.variant(Term::B), Variant::ModelB);
        assert_eq!(f.variant(Term::I), Variant::ModelB);
        assert_eq!(f.variant(Term::C), Variant::ModelA);
        assert_eq!(f.label(), "custom:abaaaaaab");
        assert!("abc".parse::<TermFlags>().is_err());
        assert!("abaaaaaax".parse::<TermFlags>().is_err());
    }

    #[test]
    fn fluorescence_vanishes_on_ladder_bottom() {
        let space = build_state_space(4).unwrap();
        let p = params(0.5, 0.0, 0.0);
        for &at in space.indices().iter().filter(|d| d.m() == -d.j()) {
            let mut state = initial_state(&space, Manifold::Zero);
            state.p.iter_mut().for_each(|x| *x = 0.0);
            state.p[space.slot(at).unwrap()] = 1.0;
            assert_eq!(fluorescence(&space, &state, &p, TermFlags::MODEL_B).unwrap(), 0.0);
        }
    }

    #[test]
    fn n1_initial_fluorescence_is_half_gamma() {
        let space = build_state_space(1).unwrap();
        let init = initial_state(&space, Manifold::Zero);
        let g = 0.37;
        let f = fluorescence(&space, &init, &params(g, 2.0, 1.0), TermFlags::MODEL_B).unwrap();
        assert_eq!(f, g / 2.0);
    }

    #[test]
    fn model_b_fluorescence_coefficients_nonnegative() {
        let space = build_state_space(20).unwrap();
        for &at in space.indices() {
            assert!(fluorescence_coefficient(at, TermFlags::MODEL_B) >= Q::from_integer(0));
        }
    }

    #[test]
    fn total_fluorescence_convex_combination() {
        let space = build_state_space(3).unwrap();
        let init = initial_state(&space, Manifold::Zero);
        let mut dark = init.clone();
        dark.p.iter_mut().for_each(|x| *x = 0.0);
        let mut p0 = params(1.0, 0.1, 0.1);
        p0.weight = 0.51;
        let p1 = params(1.0, 2.0, 0.3);
        let f0 = fluorescence(&space, &init, &p0, TermFlags::MODEL_B).unwrap();
        let total = total_fluorescence(
            &space,
            PerManifold::new(&init, &dark),
            PerManifold::new(&p0, &p1),
            TermFlags::MODEL_B,
        )
        .unwrap();
        assert_eq!(total, 0.51 * f0);

        p0.weight = 1.0;
        let total = total_fluorescence(
            &space,
            PerManifold::new(&init, &init),
            PerManifold::new(&p0, &p1),
            TermFlags::MODEL_B,
        )
        .unwrap();
        assert_eq!(total, f0);

        p0.weight = 1.2;
        assert!(total_fluorescence(
            &space,
            PerManifold::new(&init, &init),
            PerManifold::new(&p0, &p1),
            TermFlags::MODEL_B
        )
        .is_err());
    }

    #[test]
    fn equal_manifolds_total_matches_either() {
        let space = build_state_space(5).unwrap();
        let init = initial_state(&space, Manifold::Zero);
        let p = params(0.2, 0.4, 0.1);
        let f = fluorescence(&space, &init, &p, TermFlags::MODEL_A).unwrap();
        for w in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let mut p0 = p;
            p0.weight = w;
            let total = total_fluorescence(
                &space,
                PerManifold::new(&init, &init),
                PerManifold::new(&p0, &p),
                TermFlags::MODEL_A,
            )
            .unwrap();
            assert!((total - f).abs() <= 1e-15 * f.abs());
        }
    }
}
