//! Adaptive Dormand-Prince 5(4) integration.

use std::ops::ControlFlow;

use nalgebra::DVector;

use crate::error::{Result, SsmError};

#[derive(Clone, Debug)]
pub struct Dp45Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `0` picks one from the interval length.
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dp45Options {
    fn default() -> Self {
        Dp45Options { rtol: 1e-10, atol: 1e-12, h0: 0.0, h_max: f64::INFINITY, max_steps: 1_000_000 }
    }
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
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1`, calling `observe` after every
/// accepted step; `observe` may stop the integration early.
pub fn dp45_observe<F, O>(
    mut f: F,
    t0: f64,
    y0: &DVector<f64>,
    t1: f64,
    opts: &Dp45Options,
    mut observe: O,
) -> Result<(f64, DVector<f64>)>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
    O: FnMut(f64, &DVector<f64>) -> ControlFlow<()>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((t0, y0.clone()));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = if opts.h0 > 0.0 { opts.h0 } else { span.abs() * 1e-3 }.min(opts.h_max);
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    let mut k0 = f(t, &y);
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(SsmError::Integration(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
        }
        steps += 1;
        let last = (t + dir * h - t1) * dir >= 0.0;
        let hs = if last { (t1 - t) * dir } else { h };
        let hd = hs * dir;
        k.clear();
        k.push(k0.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (kk, a) in k.iter().zip(&A[s]) {
                if *a != 0.0 {
                    ys.axpy(hd * a, kk, 1.0);
                }
            }
            k.push(f(t + C[s] * hd, &ys));
        }
        let mut y_new = y.clone();
        for (kk, a) in k.iter().take(6).zip(&A[6]) {
            if *a != 0.0 {
                y_new.axpy(hd * a, kk, 1.0);
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..y.len() {
            let mut e = 0.0;
            for (s, es) in E.iter().enumerate() {
                e += es * k[s][i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((hd * e / sc).abs());
        }
        if !err.is_finite() {
            h = hs * 0.1;
            if h < 1e-14 * span.abs() {
                return Err(SsmError::Integration(format!("non-finite state at t = {t}")));
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hd };
            y = y_new;
            k0 = k[6].clone();
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (hs * fac).min(opts.h_max);
            if observe(t, &y).is_break() {
                return Ok((t, y));
            }
        } else {
            h = hs * (0.9 * err.powf(-0.2)).max(0.1);
            if h < 1e-14 * span.abs().max(t.abs()) {
                return Err(SsmError::Integration(format!("step size underflow at t = {t}")));
            }
        }
    }
    Ok((t, y))
}

pub fn dp45<F>(f: F, t0: f64, y0: &DVector<f64>, t1: f64, opts: &Dp45Options) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    dp45_observe(f, t0, y0, t1, opts, |_, _| ControlFlow::Continue(())).map(|(_, y)| y)
}
