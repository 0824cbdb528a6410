//! Dormand–Prince 5(4) adaptive integration of matrix-valued ODEs.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::qops::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-11 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 50_000_000;

/// Integrate dy/dt = f(t, y) from `t0`, reporting y at every entry of
/// `times` (ascending, ≥ t0). Steps are clipped to land on output times.
pub fn integrate_dp5<F, O>(
    mut f: F,
    t0: f64,
    y0: Array2<C64>,
    times: &[f64],
    tol: Tolerances,
    mut on_output: O,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &Array2<C64>, &mut Array2<C64>),
    O: FnMut(usize, f64, &Array2<C64>) -> Result<()>,
{
    if times.iter().any(|&t| t < t0) {
        return Err(QstError::InvalidParameter("output time precedes the initial time".into()));
    }
    let shape = y0.raw_dim();
    let mut y = y0;
    let mut t = t0;
    let mut k: Vec<Array2<C64>> = (0..7).map(|_| Array2::zeros(shape.clone())).collect();
    let mut stage = Array2::<C64>::zeros(shape.clone());
    let mut y_new = Array2::<C64>::zeros(shape.clone());
    let mut stats = IntegrationStats::default();

    f(t, &y, &mut k[0]);
    stats.evaluations += 1;

    let span = times.last().map(|&e| e - t0).unwrap_or(0.0);
    let mut h = initial_step(&y, &k[0], tol, span);
    let mut steps = 0usize;

    for (idx, &t_out) in times.iter().enumerate() {
        while t < t_out {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(QstError::Accuracy(format!("step budget exhausted at t = {t}")));
            }
            let mut last = false;
            let mut hs = h;
            if t + hs >= t_out {
                hs = t_out - t;
                last = true;
            }
            if hs <= 1e-14 * t.abs().max(1.0) {
                return Err(QstError::StepUnderflow { t, h: hs });
            }
            for s in 1..7 {
                stage.assign(&y);
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        stage.scaled_add(C64::new(hs * a, 0.0), &k[j]);
                    }
                }
                f(t + C[s] * hs, &stage, &mut k[s]);
            }
            stats.evaluations += 6;
            // stage 6 input equals the fifth-order solution (FSAL)
            y_new.assign(&stage);

            let mut err: f64 = 0.0;
            Zip::indexed(&y_new).for_each(|ij, yn| {
                let mut e = C64::new(0.0, 0.0);
                for s in 0..7 {
                    if E[s] != 0.0 {
                        e += k[s][ij] * E[s];
                    }
                }
                let sc = tol.atol + tol.rtol * yn.norm().max(y[ij].norm());
                err = err.max((e * hs).norm() / sc);
            });

            if err <= 1.0 {
                t = if last { t_out } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = hs * fac;
                }
            } else {
                stats.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        on_output(idx, t_out, &y)?;
    }
    Ok(stats)
}

fn initial_step(y: &Array2<C64>, f0: &Array2<C64>, tol: Tolerances, span: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    Zip::from(y).and(f0).for_each(|a, b| {
        let sc = tol.atol + tol.rtol * a.norm();
        d0 = d0.max(a.norm() / sc);
        d1 = d1.max(b.norm() / sc);
    });
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    if span > 0.0 {
        h.min(span)
    } else {
        h
    }
}
