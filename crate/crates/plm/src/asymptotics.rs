//! Limiting reconstruction error of the exponential model via an ODE
//! boundary-value problem solved by shooting on the initial value `delta`.
//!
//! State `(U, V, W)` starts at `(1/2, delta, delta)`. For `delta` below the
//! true value `U` reaches 1 while `V < 1` and then blows up; above it `V`
//! reaches 1 first. Bisection on that ordering pins `delta` down.

use thiserror::Error;

/// Fitted once over `eps` in {1, 0.5, 0.25} and frozen.
pub const DELTA_BOUND_CONSTANT: f64 = 1.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("step size underflow at x = {0}")]
    StepUnderflow(f64),
    #[error("classification is not monotone across the bracket ({lo:?} at the low end, {hi:?} at the high end)")]
    NonMonotone { lo: Terminal, hi: Terminal },
    #[error("trajectory reached x_cap = {0} without a classification")]
    Unclassified(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub x: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

/// Trajectory sample with the two running integrals carried alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdePoint {
    pub state: OdeState,
    /// `4 ∫ (1-UV)(1-(1-U)W) V W dx` so far.
    pub error_integral: f64,
    /// `∫ (1-U) dx` so far.
    pub deficit_integral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// `min(U, V) > 1 - 1e-6`.
    Converges,
    /// `U` reached 1 with `V < 1`: `delta` too small.
    USaturates,
    /// `V` reached 1 with `U < 1`: `delta` too large.
    VSaturates,
    /// `U` fell below the floor: treated as the too-small side.
    Undershoots,
    ExceedsCap,
}

impl Terminal {
    fn too_small(self) -> bool {
        matches!(self, Terminal::USaturates | Terminal::Undershoots)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to `400 / lambda`.
    pub x_cap: Option<f64>,
    /// Relative bracket width at which bisection stops.
    pub bracket_tol: f64,
    pub undershoot_floor: f64,
    /// Largest accepted step, keeping the sampled grid fine.
    pub max_step: f64,
}

impl Default for OdeControls {
    fn default() -> Self {
        OdeControls { rel_tol: 1e-10, abs_tol: 1e-12, x_cap: None, bracket_tol: 1e-12, undershoot_floor: 0.05, max_step: 0.003 }
    }
}

impl OdeControls {
    /// Controls with every tolerance divided by two.
    pub fn halved(&self) -> Self {
        OdeControls {
            rel_tol: self.rel_tol / 2.0,
            abs_tol: self.abs_tol / 2.0,
            bracket_tol: self.bracket_tol / 2.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub lambda: f64,
    pub delta: f64,
    /// Accepted steps strictly inside the admissible region.
    pub points: Vec<OdePoint>,
    /// First accepted state at which integration stopped.
    pub terminal_point: OdePoint,
    pub terminal: Terminal,
}

impl Trajectory {
    /// First sampled `x` with `U < 1/2`; `None` stands for infinity.
    pub fn first_half_crossing(&self) -> Option<f64> {
        self.points
            .iter()
            .chain(std::iter::once(&self.terminal_point))
            .find(|p| p.state.u < 0.5)
            .map(|p| p.state.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub delta: f64,
    pub trajectory: Trajectory,
    pub error: f64,
    pub x_max: f64,
    /// Upper bound on the integral beyond `x_max`.
    pub remainder_bound: f64,
    pub terminal_u_gap: f64,
    pub terminal_v_gap: f64,
}

/// `(dU, dV, dW)`.
pub fn ode_rhs(state: &OdeState, lambda: f64) -> (f64, f64, f64) {
    let (u, v, w) = (state.u, state.v, state.w);
    let du = -lambda * u * (1.0 - u) + (1.0 - u * v) * (1.0 - (1.0 - u) * w);
    let dv = lambda * v * (1.0 - u);
    let dw = -lambda * w * u;
    (du, dv, dw)
}

const DIM: usize = 5;

fn rhs5(y: &[f64; DIM], lambda: f64) -> [f64; DIM] {
    let s = OdeState { x: 0.0, u: y[0], v: y[1], w: y[2] };
    let (du, dv, dw) = ode_rhs(&s, lambda);
    let (u, v, w) = (y[0], y[1], y[2]);
    let e = 4.0 * (1.0 - u * v) * (1.0 - (1.0 - u) * w) * v * w;
    [du, dv, dw, e, 1.0 - u]
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn classify(y: &[f64; DIM], floor: f64) -> Option<Terminal> {
    let (u, v) = (y[0], y[1]);
    if u.min(v) > 1.0 - 1e-6 {
        Some(Terminal::Converges)
    } else if u >= 1.0 {
        Some(Terminal::USaturates)
    } else if v >= 1.0 {
        Some(Terminal::VSaturates)
    } else if u < floor {
        Some(Terminal::Undershoots)
    } else {
        None
    }
}

fn point(x: f64, y: &[f64; DIM]) -> OdePoint {
    OdePoint {
        state: OdeState { x, u: y[0], v: y[1], w: y[2] },
        error_integral: y[3],
        deficit_integral: y[4],
    }
}

/// Integrates from `(1/2, delta, delta)` until a terminal classification.
pub fn integrate(lambda: f64, delta: f64, ctl: &OdeControls) -> Result<Trajectory, OdeError> {
    if !(lambda > 0.0 && lambda <= 4.0) {
        return Err(OdeError::InvalidParameter(format!("lambda = {lambda} outside (0, 4]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(OdeError::InvalidParameter(format!("delta = {delta} outside (0, 1)")));
    }
    let x_cap = ctl.x_cap.unwrap_or(400.0 / lambda);
    let mut y = [0.5, delta, delta, 0.0, 0.0];
    let mut x = 0.0;
    let mut h: f64 = 1e-3;
    let mut points = vec![point(x, &y)];
    let mut k = [[0.0; DIM]; 7];
    k[0] = rhs5(&y, lambda);
    loop {
        if x >= x_cap {
            return Ok(Trajectory {
                lambda,
                delta,
                points,
                terminal_point: point(x, &y),
                terminal: Terminal::ExceedsCap,
            });
        }
        h = h.min(x_cap - x).min(ctl.max_step);
        if h < 1e-14 * (1.0 + x) {
            return Err(OdeError::StepUnderflow(x));
        }
        for s in 1..7 {
            let mut ys = y;
            for (d, yd) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (r, kr) in k.iter().take(s).enumerate() {
                    acc += A[s][r] * kr[d];
                }
                *yd += h * acc;
            }
            k[s] = rhs5(&ys, lambda);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for d in 0..DIM {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += B5[s] * k[s][d];
                s4 += B4[s] * k[s][d];
            }
            y5[d] = y[d] + h * s5;
            let scale = ctl.abs_tol + ctl.rel_tol * y[d].abs().max(y5[d].abs());
            err = err.max((h * (s5 - s4)).abs() / scale);
        }
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        if err <= 1.0 {
            x += h;
            y = y5;
            k[0] = k[6];
            if let Some(t) = classify(&y, ctl.undershoot_floor) {
                return Ok(Trajectory { lambda, delta, points, terminal_point: point(x, &y), terminal: t });
            }
            points.push(point(x, &y));
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
}

/// Shooting parameter by bisection in `log delta`.
pub fn shoot_delta(lambda: f64, ctl: &OdeControls) -> Result<f64, OdeError> {
    shoot(lambda, ctl).map(|t| t.delta)
}

fn shoot(lambda: f64, ctl: &OdeControls) -> Result<Trajectory, OdeError> {
    if !(lambda > 0.0 && lambda < 4.0) {
        return Err(OdeError::InvalidParameter(format!("lambda = {lambda} outside (0, 4)")));
    }
    let mut lo = 1e-300f64.ln();
    let mut hi = (1.0f64 - 1e-6).ln();
    let t_lo = integrate(lambda, lo.exp(), ctl)?;
    let t_hi = integrate(lambda, hi.exp(), ctl)?;
    if !t_lo.terminal.too_small() || t_hi.terminal.too_small() || t_hi.terminal == Terminal::ExceedsCap {
        return Err(OdeError::NonMonotone { lo: t_lo.terminal, hi: t_hi.terminal });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let t = integrate(lambda, mid.exp(), ctl)?;
        let stalled = mid <= lo || mid >= hi;
        match t.terminal {
            Terminal::Converges => return Ok(t),
            Terminal::ExceedsCap => return Err(OdeError::Unclassified(ctl.x_cap.unwrap_or(400.0 / lambda))),
            s if s.too_small() => lo = mid,
            _ => hi = mid,
        }
        if hi - lo < ctl.bracket_tol || stalled {
            return Ok(t);
        }
    }
}

/// Limiting reconstruction error at `lambda` with its convergence report.
pub fn solve(lambda: f64, ctl: &OdeControls) -> Result<OdeSolution, OdeError> {
    let t = shoot(lambda, ctl)?;
    let end = t.terminal_point;
    let x_max = end.state.x;
    Ok(OdeSolution {
        delta: t.delta,
        error: end.error_integral.clamp(0.0, 2.0),
        x_max,
        // V, W <= 1 and W <= exp(-lambda x) past x_max
        remainder_bound: 4.0 * (-lambda * x_max).exp() / lambda,
        terminal_u_gap: (1.0 - end.state.u).abs(),
        terminal_v_gap: (1.0 - end.state.v).abs(),
        trajectory: t,
    })
}

pub fn asymptotic_error(lambda: f64, ctl: &OdeControls) -> Result<f64, OdeError> {
    solve(lambda, ctl).map(|s| s.error)
}

/// Upper bound `(c'/sqrt(eps)) exp(-pi/sqrt(eps))` on `delta` at `lambda = 4 - eps`.
pub fn delta_bound(eps: f64, c_prime: f64) -> f64 {
    c_prime / eps.sqrt() * (-std::f64::consts::PI / eps.sqrt()).exp()
}

/// Smallest `c'` for which the bound holds on every `eps` of the grid.
pub fn fit_delta_constant(eps_grid: &[f64], ctl: &OdeControls) -> Result<f64, OdeError> {
    let mut c: f64 = 0.0;
    for &eps in eps_grid {
        let d = shoot_delta(4.0 - eps, ctl)?;
        c = c.max(d / delta_bound(eps, 1.0));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_examples() {
        let lambda = 3.0;
        let delta = 0.2;
        let (du, _, _) = ode_rhs(&OdeState { x: 0.0, u: 0.5, v: delta, w: delta }, lambda);
        assert!((du - (-lambda / 4.0 + (1.0 - delta / 2.0).powi(2))).abs() < 1e-15);
        let (_, dv, _) = ode_rhs(&OdeState { x: 0.0, u: 0.3, v: 0.0, w: 0.4 }, lambda);
        assert_eq!(dv, 0.0);
        let (du, _, dw) = ode_rhs(&OdeState { x: 0.0, u: 1.0, v: 0.6, w: 0.4 }, lambda);
        assert!((du - 0.4).abs() < 1e-15);
        assert!((dw + lambda * 0.4).abs() < 1e-15);
    }

    #[test]
    fn bracket_ends_classify_oppositely() {
        let ctl = OdeControls::default();
        assert!(integrate(2.0, 1e-300, &ctl).unwrap().terminal.too_small());
        assert_eq!(integrate(2.0, 0.999, &ctl).unwrap().terminal, Terminal::VSaturates);
    }

    #[test]
    fn solution_at_two() {
        let sol = solve(2.0, &OdeControls::default()).unwrap();
        assert!(sol.delta > 0.0 && sol.delta < 1.0);
        assert!((sol.error - 0.21017).abs() < 1e-4, "{}", sol.error);
        for p in &sol.trajectory.points {
            let s = p.state;
            assert!(s.u > 0.0 && s.u < 1.0 && s.v > 0.0 && s.v < 1.0 && s.w > 0.0 && s.w < 1.0);
            assert!(s.u * s.v < 1.0 && (1.0 - s.u) * s.w < 1.0);
            assert!((s.w - s.v * (-2.0 * s.x).exp()).abs() < 1e-10);
        }
    }

    fn trapezoid_v(sol: &OdeSolution) -> f64 {
        let pts = &sol.trajectory.points;
        let lambda = sol.trajectory.lambda;
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for k in 1..pts.len() {
            let (a, b) = (pts[k - 1].state, pts[k].state);
            acc += 0.5 * (b.x - a.x) * ((1.0 - a.u) + (1.0 - b.u));
            let v = sol.delta * (lambda * acc).exp();
            worst = worst.max(((v - b.v) / b.v).abs());
        }
        worst
    }

    #[test]
    fn grid_properties() {
        let ctl = OdeControls::default();
        let lambdas = [1.0, 2.0, 3.0, 3.5, 3.9];
        let sols: Vec<OdeSolution> = lambdas.iter().map(|&l| solve(l, &ctl).unwrap()).collect();
        for sol in &sols {
            let lambda = sol.trajectory.lambda;
            assert!(trapezoid_v(sol) < 1e-6, "lambda {lambda}");
            let eps = 4.0 - lambda;
            let bound = 2.0 * (eps / (8.0 * sol.delta)).ln();
            if let Some(x0) = sol.trajectory.first_half_crossing() {
                assert!(lambda * x0 >= bound, "lambda {lambda}");
            }
            for p in &sol.trajectory.points {
                let s = p.state;
                assert!(s.u > 0.0 && s.u < 1.0 && s.v > 0.0 && s.v < 1.0 && s.w > 0.0 && s.w < 1.0);
                assert!((s.w - s.v * (-lambda * s.x).exp()).abs() < 1e-9);
            }
        }
        let e: Vec<f64> = sols.iter().map(|s| s.error).collect();
        assert!(e[4] < e[3] && e[3] < e[2]);
        let halved: Vec<f64> = lambdas[..4].iter().map(|&l| shoot_delta(l, &ctl.halved()).unwrap()).collect();
        for k in 1..4 {
            assert!(sols[k].delta < sols[k - 1].delta);
            assert!(halved[k] < halved[k - 1]);
        }
    }

    #[test]
    fn halving_tolerances_at_two() {
        let ctl = OdeControls::default();
        let a = asymptotic_error(2.0, &ctl).unwrap();
        let b = asymptotic_error(2.0, &ctl.halved()).unwrap();
        assert!(((a - b) / a).abs() < 1e-6);
    }

    #[test]
    fn near_threshold_scaling() {
        let ctl = OdeControls::default();
        let eps = [1.0f64, 0.5, 0.25];
        let xs: Vec<f64> = eps.iter().map(|e| 1.0 / e.sqrt()).collect();
        let ys: Vec<f64> = eps.iter().map(|&e| asymptotic_error(4.0 - e, &ctl).unwrap().ln()).collect();
        let mx = xs.iter().sum::<f64>() / 3.0;
        let my = ys.iter().sum::<f64>() / 3.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let target = -2.0 * std::f64::consts::PI;
        assert!((sxy / sxx - target).abs() < 0.25 * target.abs());
        let c = fit_delta_constant(&eps, &ctl).unwrap();
        assert!(c <= DELTA_BOUND_CONSTANT);
        for &e in &eps {
            assert!(shoot_delta(4.0 - e, &ctl).unwrap() <= delta_bound(e, DELTA_BOUND_CONSTANT));
        }
    }

    #[test]
    fn invalid_inputs() {
        let ctl = OdeControls::default();
        assert!(integrate(5.0, 0.1, &ctl).is_err());
        assert!(integrate(2.0, 0.0, &ctl).is_err());
        assert!(shoot_delta(4.0, &ctl).is_err());
    }
}
