//! Published NV-ensemble parameter sets for 2, 7 and 10 emitters.

use serde::{Deserialize, Serialize};

use crate::error::GeneratorError;
use crate::generator::{rate_from_2pi_mhz, SpinManifoldParams};
use crate::space::PerManifold;

/// Rates in units of 2π MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub n_emitters: u32,
    pub p_sigma0: f64,
    pub gamma: f64,
    pub gamma_d: PerManifold<f64>,
    pub gamma_isc: PerManifold<f64>,
}

const GAMMA_ISC: PerManifold<f64> = PerManifold {
    sigma0: 1.8,
    sigma1: 9.4,
};

pub const N2: Preset = Preset {
    name: "n2",
    n_emitters: 2,
    p_sigma0: 0.56,
    gamma: 2.5,
    gamma_d: PerManifold {
        sigma0: 27.0,
        sigma1: 270.0,
    },
    gamma_isc: GAMMA_ISC,
};

pub const N7: Preset = Preset {
    name: "n7",
    n_emitters: 7,
    p_sigma0: 0.51,
    gamma: 4.8,
    gamma_d: PerManifold {
        sigma0: 20.0,
        sigma1: 260.0,
    },
    gamma_isc: GAMMA_ISC,
};

pub const N10: Preset = Preset {
    name: "n10",
    n_emitters: 10,
    p_sigma0: 0.50,
    gamma: 3.3,
    gamma_d: PerManifold {
        sigma0: 39.0,
        sigma1: 420.0,
    },
    gamma_isc: GAMMA_ISC,
};

pub const ALL: [Preset; 3] = [N2, N7, N10];

pub fn by_name(name: &str) -> Option<Preset> {
    ALL.into_iter().find(|p| p.name == name)
}

/// Builds per-manifold rates (ns⁻¹) from values in 2π MHz.
pub fn manifold_params(
    p_sigma0: f64,
    gamma: f64,
    gamma_d: PerManifold<f64>,
    gamma_isc: PerManifold<f64>,
) -> Result<PerManifold<SpinManifoldParams>, GeneratorError> {
    if !(0.0..=1.0).contains(&p_sigma0) {
        return Err(GeneratorError::InvalidWeight(p_sigma0));
    }
    let weights = PerManifold::new(p_sigma0, 1.0 - p_sigma0);
    weights.try_map(|sigma, &w| {
        SpinManifoldParams::new(
            rate_from_2pi_mhz(gamma),
            rate_from_2pi_mhz(*gamma_d.get(sigma)),
            rate_from_2pi_mhz(*gamma_isc.get(sigma)),
            w,
        )
    })
}

impl Preset {
    pub fn params(&self) -> PerManifold<SpinManifoldParams> {
        manifold_params(self.p_sigma0, self.gamma, self.gamma_d, self.gamma_isc).expect("built-in presets are valid")
    }
}
