//! Schrödinger evolution under piecewise-linear drive schedules.
//!
//! Fixed-step RK4 on `ψ' = -i H(t) ψ` with a per-step unitarity check: if the
//! norm drifts by more than 1e-6 before renormalization the step size is too
//! coarse and evolution aborts with a step-size error instead of silently
//! producing garbage.

use num_complex::Complex64;

use crate::{Error, Result};

use super::operator::Hamiltonian;
use super::rydberg::RydbergOperator;
use super::state::StateVector;

/// Allowed pre-renormalization norm drift per step.
const NORM_DRIFT_TOL: f64 = 1e-6;

/// A piecewise-linear schedule of drive parameters: breakpoints
/// `(t, Ω(t), Δ(t))` with strictly increasing times starting at 0. Values
/// between breakpoints interpolate linearly; outside the range they clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    points: Vec<(f64, f64, f64)>,
}

impl Schedule {
    pub fn new(points: Vec<(f64, f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("empty schedule".into()));
        }
        if points[0].0 != 0.0 {
            return Err(Error::Config(format!(
                "schedule must start at t = 0, got t = {}",
                points[0].0
            )));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config(format!(
                    "schedule times must strictly increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(t, o, d) in &points {
            if !(t.is_finite() && o.is_finite() && d.is_finite()) {
                return Err(Error::Config("non-finite schedule entry".into()));
            }
        }
        Ok(Schedule { points })
    }

    /// Constant drive for a fixed duration.
    pub fn constant(omega: f64, delta: f64, total: f64) -> Result<Self> {
        Schedule::new(vec![(0.0, omega, delta), (total, omega, delta)])
    }

    /// The standard preparation ramp: Ω rises from 0 to `omega_f` over the
    /// first 15% of the window at large negative detuning (−3 Ω_f), then Δ
    /// sweeps linearly to `delta_f` while Ω holds.
    pub fn adiabatic(omega_f: f64, delta_f: f64, total: f64) -> Result<Self> {
        let delta_i = -3.0 * omega_f;
        let ramp = 0.15 * total;
        Schedule::new(vec![
            (0.0, 0.0, delta_i),
            (ramp, omega_f, delta_i),
            (total, omega_f, delta_f),
        ])
    }

    pub fn total_time(&self) -> f64 {
        self.points.last().unwrap().0
    }

    /// Same shape compressed/stretched to a new total duration.
    pub fn scaled_to(&self, new_total: f64) -> Result<Self> {
        let t_old = self.total_time();
        if t_old <= 0.0 || new_total <= 0.0 {
            return Err(Error::Config("cannot rescale a zero-length schedule".into()));
        }
        let k = new_total / t_old;
        Schedule::new(
            self.points
                .iter()
                .map(|&(t, o, d)| (t * k, o, d))
                .collect(),
        )
    }

    /// Drive parameters `(Ω, Δ)` at time `t` (clamped to the schedule range).
    pub fn at(&self, t: f64) -> (f64, f64) {
        let pts = &self.points;
        if t <= pts[0].0 {
            return (pts[0].1, pts[0].2);
        }
        if t >= pts[pts.len() - 1].0 {
            let p = pts[pts.len() - 1];
            return (p.1, p.2);
        }
        let k = pts.partition_point(|p| p.0 <= t);
        let (t0, o0, d0) = pts[k - 1];
        let (t1, o1, d1) = pts[k];
        let f = (t - t0) / (t1 - t0);
        (o0 + f * (o1 - o0), d0 + f * (d1 - d0))
    }

    /// Largest |Ω| and |Δ| reached anywhere on the schedule (attained at
    /// breakpoints since segments are linear).
    pub fn max_rates(&self) -> (f64, f64) {
        let mut om = 0.0f64;
        let mut dm = 0.0f64;
        for &(_, o, d) in &self.points {
            om = om.max(o.abs());
            dm = dm.max(d.abs());
        }
        (om, dm)
    }
}

/// A conservative stable step for RK4 under this operator and schedule:
/// `safety / λ_bound` with `λ_bound` an upper bound on the spectral radius
/// over the whole schedule and safety 0.15 (the unitarity check allows
/// `λ·dt ≲ 0.23`).
pub fn suggested_dt(op: &RydbergOperator, schedule: &Schedule) -> f64 {
    let (omax, dmax) = schedule.max_rates();
    // Bound the diagonal with Δ at both extremes and add the drive row sum.
    let b1 = op.spectral_bound(omax, dmax);
    let b2 = op.spectral_bound(omax, -dmax);
    0.15 / b1.max(b2).max(1e-12)
}

/// Evolve to the end of the schedule.
pub fn evolve(
    op: &RydbergOperator,
    schedule: &Schedule,
    psi0: &StateVector,
    dt: f64,
) -> Result<StateVector> {
    let mut snaps = evolve_with_snapshots(op, schedule, psi0, dt, &[schedule.total_time()])?;
    Ok(snaps.pop().unwrap())
}

/// Evolve under the schedule, capturing the state at each requested time.
///
/// `times` must be non-decreasing and lie in `[0, total_time]`. The integrator
/// takes fixed steps of `dt`, shrinking only the final step before each
/// snapshot so requested times are hit exactly.
pub fn evolve_with_snapshots(
    op: &RydbergOperator,
    schedule: &Schedule,
    psi0: &StateVector,
    dt: f64,
    times: &[f64],
) -> Result<Vec<StateVector>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("bad time step dt = {dt}")));
    }
    let total = schedule.total_time();
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Config("snapshot times must be non-decreasing".into()));
        }
    }
    if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
        if first < 0.0 || last > total + 1e-12 {
            return Err(Error::Config(format!(
                "snapshot times must lie in [0, {total}]"
            )));
        }
    }
    if psi0.dim() != op.dim() {
        return Err(Error::Incompatible(format!(
            "state dimension {} vs operator dimension {}",
            psi0.dim(),
            op.dim()
        )));
    }

    let dim = op.dim();
    let mut psi = psi0.clone();
    let mut t = 0.0f64;
    let mut out = Vec::with_capacity(times.len());

    // Scratch buffers reused across steps.
    let mut k1 = vec![Complex64::default(); dim];
    let mut k2 = vec![Complex64::default(); dim];
    let mut k3 = vec![Complex64::default(); dim];
    let mut k4 = vec![Complex64::default(); dim];
    let mut tmp = vec![Complex64::default(); dim];

    for &target in times {
        while t < target - 1e-15 {
            let h = dt.min(target - t);
            rk4_step(op, schedule, psi.amplitudes_mut(), t, h, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp);
            t += h;
            let norm = psi.norm();
            let drift = (norm - 1.0).abs();
            if !norm.is_finite() || drift > NORM_DRIFT_TOL {
                return Err(Error::StepSize { drift, t });
            }
            psi.renormalize();
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// One RK4 step of `ψ' = -i H(t) ψ` in place.
#[allow(clippy::too_many_arguments)]
fn rk4_step(
    op: &RydbergOperator,
    schedule: &Schedule,
    psi: &mut [Complex64],
    t: f64,
    h: f64,
    k1: &mut [Complex64],
    k2: &mut [Complex64],
    k3: &mut [Complex64],
    k4: &mut [Complex64],
    tmp: &mut [Complex64],
) {
    let dim = psi.len();
    let deriv = |time: f64, x: &[Complex64], out: &mut [Complex64]| {
        let (omega, delta) = schedule.at(time);
        op.apply_with(omega, delta, x, out);
        for v in out.iter_mut() {
            *v *= Complex64::new(0.0, -1.0);
        }
    };

    deriv(t, psi, k1);
    for i in 0..dim {
        tmp[i] = psi[i] + k1[i] * (h / 2.0);
    }
    deriv(t + h / 2.0, tmp, k2);
    for i in 0..dim {
        tmp[i] = psi[i] + k2[i] * (h / 2.0);
    }
    deriv(t + h / 2.0, tmp, k3);
    for i in 0..dim {
        tmp[i] = psi[i] + k3[i] * h;
    }
    deriv(t + h, tmp, k4);
    for i in 0..dim {
        psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{build_rydberg, RydbergParams};

    fn single_atom(omega: f64, delta: f64) -> RydbergOperator {
        build_rydberg(&RydbergParams {
            n_rows: 1,
            n_cols: 1,
            spacing: 10.0,
            omega,
            delta,
            time: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn schedule_interpolates_and_clamps() {
        let s = Schedule::new(vec![(0.0, 0.0, -10.0), (1.0, 4.0, -10.0), (3.0, 4.0, 6.0)]).unwrap();
        assert_eq!(s.at(0.5), (2.0, -10.0));
        assert_eq!(s.at(2.0), (4.0, -2.0));
        assert_eq!(s.at(-1.0), (0.0, -10.0));
        assert_eq!(s.at(99.0), (4.0, 6.0));
        assert_eq!(s.total_time(), 3.0);
        let scaled = s.scaled_to(6.0).unwrap();
        assert_eq!(scaled.at(4.0), (4.0, -2.0));
    }

    #[test]
    fn schedule_validates() {
        assert!(Schedule::new(vec![]).is_err());
        assert!(Schedule::new(vec![(0.5, 1.0, 1.0)]).is_err());
        assert!(Schedule::new(vec![(0.0, 1.0, 1.0), (0.0, 2.0, 2.0)]).is_err());
    }

    #[test]
    fn rabi_oscillation_matches_analytic_formula() {
        // Resonant drive on one atom: P_excited(t) = sin^2(Ω t / 2).
        let omega = std::f64::consts::TAU * 4.0;
        let op = single_atom(omega, 0.0);
        let sched = Schedule::constant(omega, 0.0, 0.5).unwrap();
        let psi0 = StateVector::zero_state(1).unwrap();
        let times = [0.05, 0.125, 0.25, 0.375, 0.5];
        let snaps = evolve_with_snapshots(&op, &sched, &psi0, 1e-4, &times).unwrap();
        for (t, s) in times.iter().zip(&snaps) {
            let p1 = s.probabilities()[1];
            let want = (omega * t / 2.0).sin().powi(2);
            assert!(
                (p1 - want).abs() < 1e-8,
                "t = {t}: got {p1}, want {want}"
            );
        }
    }

    #[test]
    fn constant_drive_matches_matrix_exponential() {
        let omega = std::f64::consts::TAU * 4.0;
        let p = RydbergParams {
            n_rows: 1,
            n_cols: 3,
            spacing: 7.0,
            omega,
            delta: 0.6 * omega,
            time: 0.0,
        };
        let op = build_rydberg(&p).unwrap();
        let sched = Schedule::constant(omega, 0.6 * omega, 0.3).unwrap();
        let psi0 = StateVector::zero_state(3).unwrap();
        let dt = suggested_dt(&op, &sched);
        let got = evolve(&op, &sched, &psi0, dt).unwrap();
        let want = crate::testutil::matexp_evolve(&op.dense(), &psi0, 0.3);
        assert!(
            got.overlap(&want) > 1.0 - 1e-9,
            "overlap {}",
            got.overlap(&want)
        );
    }

    #[test]
    fn oversized_step_raises_step_size_error() {
        let omega = std::f64::consts::TAU * 4.0;
        // Strong blockade → large diagonal scale; dt = 1e-2 is far too coarse.
        let p = RydbergParams::from_dimensionless(1, 5, 2.5, 2.0, omega, 0.0).unwrap();
        let op = build_rydberg(&p).unwrap();
        let sched = Schedule::adiabatic(omega, 2.0 * omega, 1.0).unwrap();
        let psi0 = StateVector::zero_state(5).unwrap();
        let err = evolve(&op, &sched, &psi0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }), "got {err:?}");
    }

    #[test]
    fn snapshot_times_validated() {
        let omega = 1.0;
        let op = single_atom(omega, 0.0);
        let sched = Schedule::constant(omega, 0.0, 1.0).unwrap();
        let psi0 = StateVector::zero_state(1).unwrap();
        assert!(evolve_with_snapshots(&op, &sched, &psi0, 1e-3, &[0.5, 0.2]).is_err());
        assert!(evolve_with_snapshots(&op, &sched, &psi0, 1e-3, &[1.5]).is_err());
        assert!(evolve_with_snapshots(&op, &sched, &psi0, -1.0, &[0.5]).is_err());
    }
}
