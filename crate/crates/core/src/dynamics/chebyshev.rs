//! Chebyshev expansion of e^{L t} for a time-independent Lindbladian.
//!
//! With W ≥ the imaginary extent of the spectrum of L and R = W t,
//! e^{Lt} v = J_0(R) h_0 + 2 Σ_{k≥1} J_k(R) h_k, where h_0 = v,
//! h_1 = L v / W and h_{k+1} = (2/W) L h_k + h_{k−1}. The coefficients are
//! real and every h_k stays Hermitian when v is.

use std::cell::RefCell;
use std::collections::HashMap;

use ndarray::Array2;

use super::lindblad::Lindbladian;
use crate::qops::C64;

/// Largest R = W·Δt taken in one expansion.
const MAX_ARGUMENT: f64 = 40.0;

/// J_0(x) … J_kmax(x) by Miller's backward recurrence, normalized with
/// J_0 + 2 Σ J_{2k} = 1.
pub fn bessel_j_sequence(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = kmax.max(ax.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut jp = 0.0; // J_{k+1}
    let mut j = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / ax * j - jp;
        jp = j;
        j = jm;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
        // j now holds J_{k−1}
        if k - 1 <= kmax {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

pub struct ChebyshevPropagator<'a> {
    l: &'a Lindbladian,
    width: f64,
    tol: f64,
    coeffs: RefCell<HashMap<u64, (usize, Vec<f64>)>>,
}

impl<'a> ChebyshevPropagator<'a> {
    pub fn new(l: &'a Lindbladian, tol: f64) -> Self {
        let width = 1.01 * l.spectral_range() + 2.0 * l.dissipation() + 1e-12;
        Self { l, width, tol: tol.max(1e-16), coeffs: RefCell::new(HashMap::new()) }
    }

    /// Number of substeps and the truncated coefficient list for a step dt.
    fn plan(&self, dt: f64) -> (usize, Vec<f64>) {
        let key = dt.to_bits();
        if let Some(v) = self.coeffs.borrow().get(&key) {
            return v.clone();
        }
        let sub = ((self.width * dt) / MAX_ARGUMENT).ceil().max(1.0) as usize;
        let r = self.width * dt / sub as f64;
        let kmax = (r + 12.0 * r.cbrt() + 30.0).ceil() as usize;
        let j = bessel_j_sequence(r, kmax);
        let mut last = kmax;
        while last > 1 && (last as f64) > r && j[last].abs() < 0.01 * self.tol {
            last -= 1;
        }
        let coeffs: Vec<f64> = j[..=last].iter().enumerate().map(|(k, v)| if k == 0 { *v } else { 2.0 * v }).collect();
        let v = (sub, coeffs);
        self.coeffs.borrow_mut().insert(key, v.clone());
        v
    }

    /// e^{L dt} v for Hermitian v.
    pub fn propagate(&self, v: &Array2<C64>, dt: f64) -> Array2<C64> {
        if dt == 0.0 {
            return v.clone();
        }
        let (sub, coeffs) = self.plan(dt);
        let n = v.nrows();
        let mut scratch = Array2::zeros((n, n));
        let mut cur = v.clone();
        for _ in 0..sub {
            let mut h_prev = cur.clone();
            let mut acc = cur.mapv(|c| c * coeffs[0]);
            if coeffs.len() == 1 {
                cur = acc;
                continue;
            }
            let mut h = Array2::zeros((n, n));
            self.l.apply(&h_prev, &mut h, &mut scratch);
            h.mapv_inplace(|c| c / self.width);
            acc.scaled_add(C64::new(coeffs[1], 0.0), &h);
            let mut next = Array2::zeros((n, n));
            for c in coeffs.iter().skip(2) {
                self.l.apply(&h, &mut next, &mut scratch);
                let s = 2.0 / self.width;
                ndarray::Zip::from(&mut next).and(&h_prev).for_each(|x, p| *x = *x * s + p);
                acc.scaled_add(C64::new(*c, 0.0), &next);
                std::mem::swap(&mut h_prev, &mut h);
                std::mem::swap(&mut h, &mut next);
            }
            cur = acc;
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        let j = bessel_j_sequence(10.0, 6);
        assert!((j[5] + 0.234_061_528_186_793_6).abs() < 1e-13);
        let j = bessel_j_sequence(50.0, 0);
        assert!((j[0] - 0.055_812_327_669_251_82).abs() < 1e-13);
        let j = bessel_j_sequence(-1.0, 1);
        assert!((j[1] + 0.440_050_585_744_933_5).abs() < 1e-14);
    }
}
