//! SI constants and the internal unit system.
//!
//! Internally lengths are in μm, times in ms, and ħ = 1, so frequencies are
//! in rad/ms and energies in units of ħ·rad/ms. Inverse temperatures are in
//! (ħ·rad/ms)⁻¹. Conversion happens only at the configuration boundary.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const KB: f64 = 1.380_649e-23;

const SECONDS_PER_MS: f64 = 1e-3;
const METRES_PER_UM: f64 = 1e-6;

/// Angular frequency rad/s → rad/ms.
pub fn per_second_to_internal(omega: f64) -> f64 {
    omega * SECONDS_PER_MS
}

/// Energy J → ħ·rad/ms.
pub fn joule_to_internal(energy: f64) -> f64 {
    energy / (HBAR / SECONDS_PER_MS)
}

/// Energy ħ·rad/ms → J.
pub fn internal_to_joule(energy: f64) -> f64 {
    energy * HBAR / SECONDS_PER_MS
}

/// Inverse temperature in internal units for a temperature in nK.
pub fn beta_from_nanokelvin(t_nk: f64) -> f64 {
    1.0 / joule_to_internal(KB * t_nk * 1e-9)
}

/// Temperature in nK for an internal inverse temperature.
pub fn nanokelvin_from_beta(beta: f64) -> f64 {
    internal_to_joule(1.0 / beta) / KB * 1e9
}

/// Velocity m/s → μm/ms.
pub fn velocity_to_internal(v: f64) -> f64 {
    v * SECONDS_PER_MS / METRES_PER_UM
}

/// Length m → μm.
pub fn metres_to_um(x: f64) -> f64 {
    x / METRES_PER_UM
}

/// Diffusion-like constant m²/s → μm²/ms.
pub fn area_rate_to_internal(d: f64) -> f64 {
    d * SECONDS_PER_MS / (METRES_PER_UM * METRES_PER_UM)
}

/// Nats → bits.
pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_round_trip() {
        let b = beta_from_nanokelvin(49.0);
        assert!((nanokelvin_from_beta(b) - 49.0).abs() < 1e-12);
        // ħ/(k_B·49 nK) ≈ 0.156 ms
        assert!((b - 0.1559).abs() < 1e-3);
    }
}
