//! Predictor–corrector tracking of one homotopy path.
//!
//! `H(x, t) = γ t G(x) + (1 − t) F(x)` is followed from `t = 1` (start
//! system `G`) toward `t = 0` (target `F`). The predictor integrates the
//! Davidenko equation `H_x ẋ = −H_t` with classical Runge–Kutta; the
//! corrector runs at most three Newton steps at the new `t`. Steps halve on
//! corrector failure and double after five consecutive successes. A first
//! Newton update that is large relative to `x` counts as a failure, and no
//! step more than halves `t`, which keeps paths from jumping. Below
//! `t_end` a path ends once a step barely moves it; one still drifting at
//! `t_min` is divergent.

use crate::polycore::{Complex, CompiledSystem, EvalScratch};

use super::linalg::lu_solve;
use super::start::StartSystem;

#[derive(Clone, Copy, Debug)]
pub struct TrackParams {
    /// Below this `t` tracking stops as soon as `|dx|/|x|` over `|dt|/t`
    /// for one step falls under `endgame_tol`.
    pub t_end: f64,
    pub endgame_tol: f64,
    /// Hard floor for `t`.
    pub t_min: f64,
    /// Value of that ratio above which a path that cannot continue is taken
    /// to be heading to infinity.
    pub escape_move: f64,
    /// `‖x‖_∞` above which a path is declared divergent.
    pub divergence_norm: f64,
    /// A path that cannot continue beyond this norm is taken to be heading
    /// to infinity rather than failing.
    pub escape_norm: f64,
    pub initial_step: f64,
    pub max_step: f64,
    /// Smallest step, relative to `t`.
    pub min_step: f64,
    pub max_steps: usize,
    /// Relative Newton update size accepted by the corrector.
    pub corrector_tol: f64,
    /// Largest relative first Newton update; a bigger one means the
    /// prediction landed near another path.
    pub max_correction: f64,
    /// A step never shrinks `t` by more than this fraction.
    pub max_t_fraction: f64,
    pub corrector_iters: usize,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            t_end: 1e-6,
            endgame_tol: 1e-8,
            t_min: 1e-30,
            escape_move: 1e-2,
            divergence_norm: 1e8,
            escape_norm: 1e3,
            initial_step: 0.02,
            max_step: 0.1,
            min_step: 1e-10,
            max_steps: 20_000,
            corrector_tol: 1e-9,
            max_correction: 1e-2,
            max_t_fraction: 0.5,
            corrector_iters: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathEnd {
    /// Reached `t_end` at this point.
    Reached(Vec<Complex>),
    Diverged,
    Failed(&'static str),
}

pub struct Homotopy<'a> {
    pub target: &'a CompiledSystem,
    pub start: &'a dyn StartSystem,
    pub gamma: Complex,
}

/// Per-worker buffers.
pub struct Workspace {
    n: usize,
    scratch: EvalScratch,
    f: Vec<Complex>,
    jf: Vec<Complex>,
    g: Vec<Complex>,
    jg: Vec<Complex>,
    hx: Vec<Complex>,
    rhs: Vec<Complex>,
    k: [Vec<Complex>; 4],
    xt: Vec<Complex>,
    x: Vec<Complex>,
}

impl Workspace {
    pub fn new(target: &CompiledSystem) -> Self {
        let n = target.nvars();
        let v = || vec![Complex::default(); n];
        Self {
            n,
            scratch: target.scratch(),
            f: v(),
            jf: vec![Complex::default(); n * n],
            g: v(),
            jg: vec![Complex::default(); n * n],
            hx: vec![Complex::default(); n * n],
            rhs: v(),
            k: [v(), v(), v(), v()],
            xt: v(),
            x: v(),
        }
    }
}

fn max_norm(x: &[Complex]) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

impl Homotopy<'_> {
    /// Fills `ws.hx` with `H_x` and returns through `ws.f`/`ws.g` the target
    /// and start values at `(x, t)`.
    fn eval(&self, x: &[Complex], t: f64, ws: &mut Workspace) {
        self.target
            .evaluate_with_jacobian(x, &mut ws.f, &mut ws.jf, &mut ws.scratch);
        self.start.evaluate_with_jacobian(x, &mut ws.g, &mut ws.jg);
        let gt = self.gamma * t;
        let s = 1.0 - t;
        for ((h, jg), jf) in ws.hx.iter_mut().zip(&ws.jg).zip(&ws.jf) {
            *h = gt * jg + jf * s;
        }
    }

    /// `ẋ = −H_x^{-1} H_t` into `ws.k[slot]`.
    fn velocity(&self, x: &[Complex], t: f64, ws: &mut Workspace, slot: usize) -> bool {
        self.eval(x, t, ws);
        for i in 0..ws.n {
            ws.rhs[i] = ws.f[i] - self.gamma * ws.g[i];
        }
        let ok = lu_solve(&mut ws.hx, &mut ws.rhs, ws.n);
        ws.k[slot].copy_from_slice(&ws.rhs);
        ok
    }

    fn predict(&self, t: f64, dt: f64, ws: &mut Workspace) -> bool {
        let n = ws.n;
        let x = ws.x.clone();
        if !self.velocity(&x, t, ws, 0) {
            return false;
        }
        for (slot, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..n {
                ws.xt[i] = x[i] + ws.k[slot - 1][i] * (dt * frac);
            }
            let xt = ws.xt.clone();
            if !self.velocity(&xt, t + dt * frac, ws, slot) {
                return false;
            }
        }
        for i in 0..n {
            ws.xt[i] = x[i]
                + (ws.k[0][i] + ws.k[1][i] * 2.0 + ws.k[2][i] * 2.0 + ws.k[3][i]) * (dt / 6.0);
        }
        true
    }

    /// Newton on `H(·, t)` starting from `ws.xt`; result left in `ws.xt`.
    fn correct(&self, t: f64, params: &TrackParams, ws: &mut Workspace) -> bool {
        let n = ws.n;
        let mut prev = f64::INFINITY;
        for k in 0..params.corrector_iters {
            let xt = ws.xt.clone();
            self.eval(&xt, t, ws);
            let gt = self.gamma * t;
            for i in 0..n {
                ws.rhs[i] = -(gt * ws.g[i] + ws.f[i] * (1.0 - t));
            }
            if !lu_solve(&mut ws.hx, &mut ws.rhs, n) {
                return false;
            }
            let step = max_norm(&ws.rhs);
            for i in 0..n {
                ws.xt[i] += ws.rhs[i];
            }
            let scale = 1.0 + max_norm(&ws.xt);
            if !step.is_finite() || step > 0.5 * prev || (k == 0 && step > params.max_correction * scale) {
                return false;
            }
            if step <= params.corrector_tol * scale {
                return true;
            }
            prev = step;
        }
        false
    }

    pub fn track(&self, x0: &[Complex], params: &TrackParams, ws: &mut Workspace) -> PathEnd {
        ws.x.copy_from_slice(x0);
        let mut t = 1.0;
        let mut h = params.initial_step;
        let mut streak = 0;
        let mut last_move = f64::INFINITY;
        for _ in 0..params.max_steps {
            let h_now = h.min(params.max_t_fraction * t);
            let t_next = t - h_now;
            let ok = self.predict(t, t_next - t, ws) && self.correct(t_next, params, ws);
            if ok {
                let scale = 1.0 + max_norm(&ws.xt);
                // relative change in x per relative change in t
                last_move = ws
                    .x
                    .iter()
                    .zip(&ws.xt)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
                    / scale
                    * (t / h_now);
                ws.x.copy_from_slice(&ws.xt);
                t = t_next;
                if scale > params.divergence_norm {
                    return PathEnd::Diverged;
                }
                if t <= params.t_end {
                    if last_move <= params.endgame_tol {
                        return PathEnd::Reached(ws.x.clone());
                    }
                    if scale > params.escape_norm && last_move > params.escape_move {
                        return PathEnd::Diverged;
                    }
                }
                if t <= params.t_min {
                    return self.give_up(params, ws, t, last_move);
                }
                streak += 1;
                if streak >= 5 {
                    h = (2.0 * h).min(params.max_step);
                    streak = 0;
                }
            } else {
                streak = 0;
                h = 0.5 * h_now;
                if h < params.min_step * t {
                    return self.give_up(params, ws, t, last_move);
                }
            }
        }
        PathEnd::Failed("step limit")
    }

    /// Classifies a path that can no longer be continued: far out or still
    /// drifting means divergent, otherwise a point at the end of tracking
    /// is handed on for polishing.
    fn give_up(&self, params: &TrackParams, ws: &Workspace, t: f64, last_move: f64) -> PathEnd {
        if max_norm(&ws.x) > params.escape_norm || last_move > params.escape_move {
            PathEnd::Diverged
        } else if t <= params.t_end {
            PathEnd::Reached(ws.x.clone())
        } else {
            PathEnd::Failed("step size underflow")
        }
    }
}
