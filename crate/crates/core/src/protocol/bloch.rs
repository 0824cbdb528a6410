//! Input states on the Bloch sphere.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::qops::C64;

/// Pure qubit state with polar angle `theta` ∈ [0, π] and azimuth
/// `phi` ∈ [0, 2π): |χ⟩ = cos(θ/2)|↑⟩ + sin(θ/2) e^{iφ}|↓⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub theta: f64,
    pub phi: f64,
}

impl BlochState {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) || !phi.is_finite() {
            return Err(QstError::InvalidParameter(format!("Bloch angles out of range: theta = {theta}, phi = {phi}")));
        }
        Ok(Self { theta, phi: phi.rem_euclid(std::f64::consts::TAU) })
    }

    pub fn up() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    pub fn down() -> Self {
        Self { theta: std::f64::consts::PI, phi: 0.0 }
    }

    /// Amplitudes (c_↑, c_↓).
    pub fn amplitudes(&self) -> [C64; 2] {
        let h = 0.5 * self.theta;
        [C64::new(h.cos(), 0.0), C64::from_polar(h.sin(), self.phi)]
    }

    pub fn ket(&self) -> Array1<C64> {
        Array1::from(self.amplitudes().to_vec())
    }

    /// (⟨σx⟩, ⟨σy⟩, ⟨σz⟩).
    pub fn bloch_vector(&self) -> [f64; 3] {
        let s = self.theta.sin();
        [s * self.phi.cos(), s * self.phi.sin(), self.theta.cos()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingScheme {
    /// Golden-angle spiral with cos θ_i = 1 − (2i + 1)/n.
    #[default]
    Fibonacci,
    /// cos θ ~ U[−1, 1], φ ~ U[0, 2π) from ChaCha8 seeded with `seed`,
    /// stream = sample index.
    SeededUniform,
}

pub fn bloch_samples(n: usize, scheme: SamplingScheme, seed: u64) -> Result<Vec<BlochState>> {
    if n == 0 {
        return Err(QstError::InvalidParameter("at least one Bloch sample is required".into()));
    }
    let tau = std::f64::consts::TAU;
    Ok(match scheme {
        SamplingScheme::Fibonacci => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                    BlochState { theta: z.clamp(-1.0, 1.0).acos(), phi: (golden * i as f64).rem_euclid(tau) }
                })
                .collect()
        }
        SamplingScheme::SeededUniform => (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi: f64 = rng.random_range(0.0..tau);
                BlochState { theta: z.acos(), phi }
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_is_deterministic_and_balanced() {
        let a = bloch_samples(4000, SamplingScheme::Fibonacci, 0).unwrap();
        let b = bloch_samples(4000, SamplingScheme::Fibonacci, 99).unwrap();
        assert_eq!(a, b);
        let mean: f64 = a.iter().map(|s| s.theta.cos()).sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-3);
        let one = bloch_samples(1, SamplingScheme::Fibonacci, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert!(bloch_samples(0, SamplingScheme::Fibonacci, 0).is_err());
    }

    #[test]
    fn seeded_uniform_reproducible() {
        let a = bloch_samples(50, SamplingScheme::SeededUniform, 7).unwrap();
        let b = bloch_samples(50, SamplingScheme::SeededUniform, 7).unwrap();
        let c = bloch_samples(50, SamplingScheme::SeededUniform, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for s in &a {
            assert!((0.0..=std::f64::consts::PI).contains(&s.theta));
            assert!((0.0..std::f64::consts::TAU).contains(&s.phi));
        }
    }

    #[test]
    fn ket_matches_bloch_vector() {
        let s = BlochState::new(1.1, 2.3).unwrap();
        let [a, b] = s.amplitudes();
        let v = s.bloch_vector();
        assert!(((a.conj() * b).re * 2.0 - v[0]).abs() < 1e-14);
        assert!(((a.conj() * b).im * 2.0 - v[1]).abs() < 1e-14);
        assert!((a.norm_sqr() - b.norm_sqr() - v[2]).abs() < 1e-14);
    }
}
