//! Physical-unit conversions at the reporting boundary.

use serde::{Deserialize, Serialize};

/// CODATA 2018 exact SI values.
pub mod constants {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
    pub const BOLTZMANN: f64 = 1.380_649e-23;
}

/// Angular cavity frequency that fixes the dimensionless unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScale {
    pub omega_cav_rad_s: f64,
}

impl PhysicalScale {
    pub fn from_ghz(f_ghz: f64) -> Self {
        Self { omega_cav_rad_s: 2.0 * std::f64::consts::PI * f_ghz * 1e9 }
    }

    pub fn cavity_ghz(&self) -> f64 {
        self.omega_cav_rad_s / (2.0 * std::f64::consts::PI * 1e9)
    }

    /// k_B T / (ħ ω_cav).
    pub fn theta_from_millikelvin(&self, t_mk: f64) -> f64 {
        constants::BOLTZMANN * t_mk * 1e-3 / (constants::HBAR * self.omega_cav_rad_s)
    }

    pub fn millikelvin_from_theta(&self, theta: f64) -> f64 {
        theta * constants::HBAR * self.omega_cav_rad_s / constants::BOLTZMANN * 1e3
    }

    /// Rate given as Γ/2π in MHz, in units of ω_cav.
    pub fn rate_from_mhz(&self, f_mhz: f64) -> f64 {
        2.0 * std::f64::consts::PI * f_mhz * 1e6 / self.omega_cav_rad_s
    }

    pub fn nanoseconds(&self, t: f64) -> f64 {
        t / self.omega_cav_rad_s * 1e9
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_millikelvin() {
        let s = PhysicalScale::from_ghz(8.13);
        let th = s.theta_from_millikelvin(100.0);
        // k_B·0.1 K / (h·8.13 GHz)
        let direct = constants::BOLTZMANN * 0.1 / (constants::PLANCK * 8.13e9);
        assert!((th - direct).abs() < 1e-14);
        assert!((th - 0.25629).abs() < 1e-5);
        assert!((s.millikelvin_from_theta(th) - 100.0).abs() < 1e-9);
        assert!((s.nanoseconds(2856.0) - 55.9).abs() < 0.1);
    }
}
