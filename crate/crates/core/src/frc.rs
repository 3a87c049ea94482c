//! Forced response curves in physical coordinates.

use std::f64::consts::PI;
use std::fmt::Write as _;

use log::warn;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::continuation::{polish_equilibrium, Bifurcation, Branch, EquilibriumPoint, NewtonOptions, Stability};
use crate::error::Result;
use crate::linalg::to_complex;
use crate::pipeline::Reduction;
use crate::poly::C64;
use crate::reduced::{ReducedVectorField, SlowState};
use crate::spectral::Rational;
use crate::ssm::auto::AutonomousSsm;
use crate::ssm::nonauto::{check_non_master, compute_nonauto_flagged, NonAutoCorrection};

pub const DEFAULT_SAMPLES: usize = 128;

/// Uniform samples of `z(t)` over one period.
#[derive(Clone, Debug)]
pub struct OrbitSamples {
    pub period: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Largest `|Im z| / |z|` seen before taking real parts.
    pub imaginary_ratio: f64,
}

/// Response period `2 pi / (r_d Omega)`.
pub fn response_period(r_d: Rational, omega: f64) -> f64 {
    2.0 * PI * *r_d.denom() as f64 / (*r_d.numer() as f64 * omega)
}

/// `z(t) = W(p(t)) + 2 eps Re(x0 e^{i Omega t})` at `samples` uniform times.
pub fn reconstruct_orbit(
    ssm: &AutonomousSsm,
    nonauto: &NonAutoCorrection,
    rvf: &ReducedVectorField,
    state: &SlowState,
    period: f64,
    samples: usize,
) -> OrbitSamples {
    let mut times = Vec::with_capacity(samples);
    let mut states = Vec::with_capacity(samples);
    let mut ratio: f64 = 0.0;
    for k in 0..samples {
        let t = period * k as f64 / samples as f64;
        let p = rvf.to_normal_coordinates(state, t);
        let w = ssm.eval_w(&p);
        let e = C64::from_polar(rvf.epsilon, rvf.omega * t);
        let z: DVector<C64> = w + nonauto.x0.map(|x| x * e) + nonauto.x0.map(|x| (x * e).conj());
        let re = z.map(|c| c.re);
        let im = z.map(|c| c.im).amax();
        ratio = ratio.max(im / re.amax().max(f64::MIN_POSITIVE));
        times.push(t);
        states.push(re);
    }
    OrbitSamples { period, times, states, imaginary_ratio: ratio }
}

/// `max_k |z_dof(t_k)|`.
pub fn amplitude_inf(series: &[DVector<f64>], dof: usize) -> f64 {
    series.iter().map(|z| z[dof].abs()).fold(0.0, f64::max)
}

/// Worst relative residuals of a reconstructed orbit over one period.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OrbitResidual {
    /// `B z' - A z - F(z) - eps F^ext(Omega t)`.
    pub total: f64,
    /// `B DW R - A W - F(W)` on the autonomous part alone.
    pub autonomous: f64,
}

/// Substitutes the reconstructed orbit into `B z' = A z + F(z) + eps F^ext`.
/// Residuals are relative to `|A z|` at each sample.
pub fn orbit_residual(
    red: &Reduction,
    nonauto: &NonAutoCorrection,
    rvf: &ReducedVectorField,
    state: &SlowState,
    samples: usize,
) -> OrbitResidual {
    let ssm = &red.ssm;
    let sys = &red.sys;
    let a = to_complex(&sys.a);
    let fa = sys.fext_at(rvf.omega);
    let r_d = red.master.period_divisor().unwrap_or(Rational::from_integer(1));
    let period = response_period(r_d, rvf.omega);
    let io = C64::new(0.0, rvf.omega);
    let mut out = OrbitResidual { total: 0.0, autonomous: 0.0 };
    for k in 0..samples {
        let t = period * k as f64 / samples as f64;
        let p = rvf.to_normal_coordinates(state, t);
        // p_c(t) = q_c e^{+-i r Omega t} with q fixed.
        let pdot: Vec<C64> = p
            .iter()
            .enumerate()
            .map(|(c, z)| {
                let w = rvf.r[c / 2] * rvf.omega;
                z * C64::new(0.0, if c % 2 == 0 { w } else { -w })
            })
            .collect();
        let e = C64::from_polar(rvf.epsilon, rvf.omega * t);
        let w = ssm.eval_w(&p).map(|c| c.re);
        let z = &w + nonauto.x0.map(|x| 2.0 * (x * e).re);
        let zdot = (ssm.eval_dw(&p) * DVector::from_vec(pdot)).map(|c| c.re)
            + nonauto.x0.map(|x| 2.0 * (io * x * e).re);
        let forcing = 2.0 * rvf.epsilon * (rvf.omega * t).cos();
        let res = &sys.b * &zdot - &sys.a * &z - DVector::from_vec(sys.f_real.eval(z.as_slice())) - &fa * forcing;
        let scale = (&sys.a * &z).norm().max(f64::MIN_POSITIVE);
        out.total = out.total.max(res.norm() / scale);
        let auto = ssm.invariance_residual(sys, &p);
        let ascale = (&a * ssm.eval_w(&p)).norm().max(f64::MIN_POSITIVE);
        out.autonomous = out.autonomous.max(auto.norm() / ascale);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FrcPoint {
    pub omega: f64,
    pub epsilon: f64,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub stability: Stability,
    pub bifurcation: Bifurcation,
    pub amplitudes: Vec<f64>,
    /// `min |Re mu|` over slow-Jacobian eigenvalues divided by the smallest
    /// master decay rate `min |Re lambda_i|`; zero at bifurcations.
    pub hyperbolicity: f64,
    /// Set when the non-autonomous solve failed at this point.
    pub error: Option<String>,
    #[serde(skip)]
    pub orbit: Option<OrbitSamples>,
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    /// Zero-based DOF indices to report.
    pub dofs: Vec<usize>,
    pub samples: usize,
    pub skip_x0: bool,
    pub keep_orbits: bool,
}

impl SweepOptions {
    pub fn new(dofs: &[usize]) -> Self {
        SweepOptions { dofs: dofs.to_vec(), samples: DEFAULT_SAMPLES, skip_x0: false, keep_orbits: false }
    }
}

/// Modes forced in the slow dynamics: exactly those with `r_i = 1`.
pub fn forced_modes(rvf: &ReducedVectorField) -> Vec<bool> {
    let one = Rational::from_integer(1);
    rvf.r_exact.iter().map(|r| *r == one).collect()
}

/// Non-autonomous correction consistent with the forcing gate of `rvf`.
pub fn nonauto_for(red: &Reduction, rvf: &ReducedVectorField, skip_x0: bool) -> Result<NonAutoCorrection> {
    check_non_master(&red.master, rvf.omega, red.master.tolerance)?;
    compute_nonauto_flagged(&red.sys, &red.master, rvf.omega, &forced_modes(rvf), skip_x0)
}

pub fn hyperbolicity(rvf: &ReducedVectorField, eq: &EquilibriumPoint) -> f64 {
    let decay = rvf.lambdas.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    eq.eigenvalues.iter().map(|m| m.re.abs()).fold(f64::INFINITY, f64::min) / decay
}

/// FRC point of one equilibrium.
pub fn frc_point(
    red: &Reduction,
    rvf: &ReducedVectorField,
    eq: &EquilibriumPoint,
    opts: &SweepOptions,
) -> FrcPoint {
    let rv = ReducedVectorField { omega: eq.omega, epsilon: eq.epsilon, ..rvf.clone() };
    let mut point = FrcPoint {
        omega: eq.omega,
        epsilon: eq.epsilon,
        rho: eq.state.rho(),
        theta: eq.state.theta(),
        stability: eq.stability,
        bifurcation: eq.bifurcation,
        amplitudes: vec![f64::NAN; opts.dofs.len()],
        hyperbolicity: hyperbolicity(rvf, eq),
        error: None,
        orbit: None,
    };
    match nonauto_for(red, &rv, opts.skip_x0) {
        Ok(na) => {
            let r_d = red.master.period_divisor().unwrap_or(Rational::from_integer(1));
            let period = response_period(r_d, eq.omega);
            let orbit = reconstruct_orbit(&red.ssm, &na, &rv, &eq.state, period, opts.samples);
            point.amplitudes = opts.dofs.iter().map(|&d| amplitude_inf(&orbit.states, d)).collect();
            if opts.keep_orbits {
                point.orbit = Some(orbit);
            }
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    point
}

/// Maps every branch point to physical amplitudes, in parallel.
pub fn sweep_frc(red: &Reduction, rvf: &ReducedVectorField, branch: &Branch, opts: &SweepOptions) -> Vec<FrcPoint> {
    branch.points.par_iter().map(|eq| frc_point(red, rvf, eq, opts)).collect()
}

/// Branch points at the requested `omegas`: every crossing of the branch is
/// interpolated linearly in modal coordinates and re-solved at fixed Omega.
/// Crossings whose Newton solve fails are dropped. Output follows arclength.
pub fn resample_branch(rvf: &ReducedVectorField, branch: &Branch, omegas: &[f64]) -> Vec<EquilibriumPoint> {
    let repr = branch.representation;
    let mut jobs = Vec::new();
    for (k, pair) in branch.points.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        for &om in omegas {
            let (lo, hi) = (a.omega.min(b.omega), a.omega.max(b.omega));
            // Half-open so a target on a shared endpoint is taken once.
            let inside = lo <= om && om < hi || (om == hi && k + 2 == branch.points.len());
            if inside && hi > lo {
                jobs.push((k, (om - a.omega) / (b.omega - a.omega), om));
            }
        }
    }
    jobs.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    jobs.par_iter()
        .filter_map(|&(k, s, om)| {
            let qa = branch.points[k].state.modal();
            let qb = branch.points[k + 1].state.modal();
            let q: Vec<C64> = qa.iter().zip(&qb).map(|(x, y)| x + (y - x) * s).collect();
            let guess = SlowState::from_modal(repr, &q);
            let field = rvf.with_omega(om);
            match polish_equilibrium(&field, repr, &guess, &NewtonOptions::default()) {
                Ok(mut eq) => {
                    eq.epsilon = branch.points[k].epsilon;
                    Some(eq)
                }
                Err(e) => {
                    warn!(target: "frc", "resampling at omega = {om}: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Symmetric Hausdorff distance between two FRC polylines in the plane
/// `(omega / omega-extent, amplitude / peak)`, with both scales taken from
/// `reference`; maximised over the reported DOFs.
pub fn frc_distance(curve: &[FrcPoint], reference: &[FrcPoint]) -> f64 {
    let ok = |pts: &[FrcPoint]| -> Vec<FrcPoint> {
        pts.iter().filter(|p| p.error.is_none() && p.amplitudes.iter().all(|a| a.is_finite())).cloned().collect()
    };
    let (a, b) = (ok(curve), ok(reference));
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let (lo, hi) = b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.omega), h.max(p.omega)));
    let wx = (hi - lo).max(f64::MIN_POSITIVE);
    let dofs = b[0].amplitudes.len();
    let mut worst: f64 = 0.0;
    for d in 0..dofs {
        let wy = b.iter().map(|p| p.amplitudes[d]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let pa: Vec<(f64, f64)> = a.iter().map(|p| (p.omega / wx, p.amplitudes[d] / wy)).collect();
        let pb: Vec<(f64, f64)> = b.iter().map(|p| (p.omega / wx, p.amplitudes[d] / wy)).collect();
        worst = worst.max(directed_hausdorff(&pa, &pb)).max(directed_hausdorff(&pb, &pa));
    }
    worst
}

fn directed_hausdorff(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    from.par_iter()
        .map(|&p| {
            if to.len() == 1 {
                return ((p.0 - to[0].0).powi(2) + (p.1 - to[0].1).powi(2)).sqrt();
            }
            to.windows(2).map(|s| segment_distance(p, s[0], s[1])).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p.0 - a.0 - s * dx).powi(2) + (p.1 - a.1 - s * dy).powi(2)).sqrt()
}

fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with one header row; `comments` become leading `#` lines.
pub fn frc_csv(points: &[FrcPoint], m: usize, dof_labels: &[String], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let mut cols = vec!["omega".to_string(), "epsilon".to_string()];
    cols.extend((1..=m).map(|i| format!("rho_{i}")));
    cols.extend((1..=m).map(|i| format!("theta_{i}")));
    cols.push("stable".into());
    cols.push("bifurcation".into());
    cols.extend(dof_labels.iter().map(|l| format!("amp_{l}")));
    let _ = writeln!(out, "{}", cols.join(","));
    for p in points {
        let mut row = vec![g17(p.omega), g17(p.epsilon)];
        row.extend(p.rho.iter().map(|&x| g17(x)));
        row.extend(p.theta.iter().map(|&x| g17(x)));
        row.push(if p.stability.is_stable() { "1".into() } else { "0".into() });
        row.push(p.bifurcation.label().into());
        row.extend(p.amplitudes.iter().map(|&x| g17(x)));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Default DOF labels `x1, x2, ...` for zero-based indices.
pub fn dof_labels(dofs: &[usize]) -> Vec<String> {
    dofs.iter().map(|d| format!("x{}", d + 1)).collect()
}

/// Plot data: for every DOF, blocks of `(omega, amplitude)` rows separated
/// by two blank lines, one block per run of constant stability.
pub fn plot_data(points: &[FrcPoint], dof_labels: &[String], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for (k, label) in dof_labels.iter().enumerate() {
        let mut start = 0;
        while start < points.len() {
            let stable = points[start].stability.is_stable();
            let mut end = start + 1;
            while end < points.len() && points[end].stability.is_stable() == stable {
                end += 1;
            }
            let _ = writeln!(out, "# amp_{label} {}", if stable { "stable" } else { "unstable" });
            // Segments share their endpoints so the curve stays connected.
            for p in &points[start..(end + 1).min(points.len())] {
                let _ = writeln!(out, "{} {}", g17(p.omega), g17(p.amplitudes[k]));
            }
            out.push_str("\n\n");
            start = end;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_grid_maximum() {
        let n = 128;
        let series: Vec<DVector<f64>> = (0..n)
            .map(|k| DVector::from_element(1, 2.5 * (2.0 * PI * k as f64 / n as f64 + 0.3).cos()))
            .collect();
        let a = amplitude_inf(&series, 0);
        assert!((a - 2.5).abs() <= 1e-3 * 2.5);
    }

    #[test]
    fn zero_series_has_zero_amplitude() {
        let series = vec![DVector::zeros(3); 16];
        assert_eq!(amplitude_inf(&series, 2), 0.0);
    }

    #[test]
    fn period_uses_divisor() {
        let t = response_period(Rational::new(1, 3), 2.0);
        assert!((t - 3.0 * PI).abs() < 1e-15);
    }

    fn curve(points: &[(f64, f64)]) -> Vec<FrcPoint> {
        points
            .iter()
            .map(|&(omega, a)| FrcPoint {
                omega,
                epsilon: 0.0,
                rho: vec![],
                theta: vec![],
                stability: Stability::Stable,
                bifurcation: Bifurcation::None,
                amplitudes: vec![a],
                hyperbolicity: 1.0,
                error: None,
                orbit: None,
            })
            .collect()
    }

    #[test]
    fn frc_distance_of_shifted_curve() {
        let a = curve(&[(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]);
        let b = curve(&[(0.0, 0.0), (0.5, 1.0), (1.0, 2.1), (2.0, 0.0)]);
        assert_eq!(frc_distance(&a, &a), 0.0);
        let d = frc_distance(&b, &a);
        // Peak moved by 0.1 in amplitude against a peak of 2.
        assert!(d > 0.02 && d <= 0.05 + 1e-12, "{d}");
    }

    #[test]
    fn csv_header_contract() {
        let p = FrcPoint {
            omega: 1.0,
            epsilon: 0.005,
            rho: vec![0.1, 0.2, 0.3],
            theta: vec![0.0, 1.0, 2.0],
            stability: Stability::Stable,
            bifurcation: Bifurcation::None,
            amplitudes: vec![1.0, 2.0, 3.0],
            hyperbolicity: 1.0,
            error: None,
            orbit: None,
        };
        let csv = frc_csv(&[p], 3, &dof_labels(&[0, 1, 2]), &["test".into()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# test"));
        assert_eq!(
            lines.next(),
            Some("omega,epsilon,rho_1,rho_2,rho_3,theta_1,theta_2,theta_3,stable,bifurcation,amp_x1,amp_x2,amp_x3")
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("1.0000000000000000e0,5.0000000000000001e-3"));
    }
}
