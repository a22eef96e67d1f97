//! Physical constants and fixed experimental parameters.
//!
//! All couplings and shift coefficients in this crate are angular frequencies
//! (rad/s); conversions from Hz happen at the input boundary.

/// Proton gyromagnetic ratio, rad s⁻¹ T⁻¹.
pub const GAMMA_H: f64 = 2.675e8;

/// ¹³C gyromagnetic ratio, fixed at γ_H/4.
pub const GAMMA_C: f64 = 0.25 * GAMMA_H;

/// ¹⁵N gyromagnetic ratio magnitude, fixed at γ_H/10.
pub const GAMMA_N: f64 = 0.10 * GAMMA_H;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// μ₀/4π, T²·m³/J — the SI dipolar prefactor.
pub const MU0_OVER_4PI: f64 = 1e-7;

/// Default proton Larmor frequency, Hz. Sets B₀ = 2π·ν_H/γ_H ≈ 9.4 T.
pub const DEFAULT_PROTON_LARMOR_HZ: f64 = 400.0e6;

/// Default rotor (sample spinning) frequency, Hz.
pub const DEFAULT_ROTOR_FREQUENCY_HZ: f64 = 10.0e3;

/// Default integration time step, s.
pub const DEFAULT_DT_S: f64 = 2.0e-6;

/// Magic angle between the rotor axis and the static field: arccos(1/√3).
#[must_use]
pub fn magic_angle() -> f64 {
    (1.0 / 3.0_f64.sqrt()).acos()
}

/// Dipolar coupling magnitude prefactor (μ₀/4π)·γ_i·γ_j·ħ/r³ in rad/s for a
/// distance given in Ångström.
#[must_use]
pub fn dipolar_prefactor(gamma_i: f64, gamma_j: f64, r_angstrom: f64) -> f64 {
    let r_m = r_angstrom * 1e-10;
    MU0_OVER_4PI * gamma_i * gamma_j * HBAR / (r_m * r_m * r_m)
}
