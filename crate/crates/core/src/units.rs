//! Physical constants in the simulator's unit system.
//!
//! Energies are in eV, times in fs and lengths in nm. Peak interaction
//! energies are quoted in meV at the API boundary and converted here.

/// Reduced Planck constant in eV·fs.
pub const HBAR: f64 = 0.658_211_956_9;

/// Planck constant times the speed of light in eV·nm.
pub const HC: f64 = 1_239.841_984;

/// meV to eV.
pub const MEV: f64 = 1e-3;

/// Vacuum wavelength (nm) of a photon with energy `e` (eV).
pub fn wavelength_nm(e: f64) -> f64 {
    HC / e
}

/// Angular frequency (1/fs) of an energy in eV.
#[inline]
pub fn angular(e: f64) -> f64 {
    e / HBAR
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carrier_wavelength() {
        assert!((wavelength_nm(1.505) - 823.8).abs() < 0.1);
    }

    #[test]
    fn lifetimes_from_rates() {
        // 4.13 meV corresponds to a ~160 fs relaxation time
        let tau = HBAR / 4.13e-3;
        assert!((tau - 160.0).abs() < 1.0);
    }
}
