//! Homotopy (LARS-with-removals) solver for the circulant LASSO
//!
//! ```text
//! minimize ½‖C h − y‖₂² + τ‖h‖₁
//! ```
//!
//! where `C` is the circulant matrix whose column `j` is the generator
//! shifted down by `j`. The solution is piecewise linear in `τ`; starting
//! from `τ₀ = ‖Cᵀy‖_∞` (where the solution is zero) the path is followed
//! downward one breakpoint at a time. At each breakpoint a single column
//! either enters the active set (its correlation reaches `±τ`) or leaves it
//! (its coefficient crosses zero).
//!
//! Ties between simultaneous events go to the smallest column index.

use crate::error::{Error, Result};
use crate::numerics::{cholesky_solve, fft_real, ifft_real, norm2, norm_inf, Complex64, Matrix};

/// Implicit `m × m` circulant matrix built from one generator column.
#[derive(Debug, Clone)]
pub struct CirculantOperator {
    generator: Vec<f64>,
    spectrum: Vec<Complex64>,
    autocorr: Vec<f64>,
    norm: f64,
}

impl CirculantOperator {
    pub fn new(generator: Vec<f64>) -> Result<Self> {
        let spectrum = fft_real(&generator)?;
        let power: Vec<Complex64> = spectrum
            .iter()
            .map(|z| Complex64::new(z.norm_sqr(), 0.0))
            .collect();
        let norm = norm2(&generator);
        let autocorr = ifft_real(&power, norm * norm)?;
        Ok(Self {
            generator,
            spectrum,
            autocorr,
            norm,
        })
    }

    pub fn m(&self) -> usize {
        self.generator.len()
    }

    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        crate::numerics::circshift(&self.generator, j as isize)
    }

    /// `⟨column i, column j⟩`.
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        let m = self.m();
        self.autocorr[(i + m - j) % m]
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `C h` via the FFT.
    pub fn apply(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_len(h)?;
        let fh = fft_real(h)?;
        let prod: Vec<Complex64> = self.spectrum.iter().zip(&fh).map(|(a, b)| a * b).collect();
        ifft_real(&prod, self.norm * norm2(h))
    }

    /// `C h` for `h` given by its support and values.
    pub fn apply_sparse(&self, support: &[usize], values: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; m];
        for (&d, &v) in support.iter().zip(values) {
            for (j, o) in out.iter_mut().enumerate() {
                *o += v * self.generator[(j + m - d) % m];
            }
        }
        out
    }

    /// `Cᵀ r` (correlations of `r` with every column) via the FFT.
    pub fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.check_len(r)?;
        let fr = fft_real(r)?;
        let prod: Vec<Complex64> = self
            .spectrum
            .iter()
            .zip(&fr)
            .map(|(a, b)| a.conj() * b)
            .collect();
        ifft_real(&prod, self.norm * norm2(r))
    }

    fn active_gram(&self, active: &[usize]) -> Matrix {
        let k = active.len();
        let mut g = Matrix::zeros(k, k);
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                g[(a, b)] = self.gram(i, j);
            }
        }
        g
    }
}

/// What happened at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEvent {
    Add(usize),
    Remove(usize),
    /// The stopping level of `τ` was reached before any further event.
    Stop,
}

impl PathEvent {
    pub fn label(&self) -> &'static str {
        match self {
            PathEvent::Add(_) => "add",
            PathEvent::Remove(_) => "remove",
            PathEvent::Stop => "stop",
        }
    }

    pub fn column(&self) -> Option<usize> {
        match *self {
            PathEvent::Add(i) | PathEvent::Remove(i) => Some(i),
            PathEvent::Stop => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    pub index: usize,
    pub tau: f64,
    pub event: PathEvent,
    pub support_size: usize,
}

/// A point on the homotopy path.
#[derive(Debug, Clone)]
pub struct HomotopyState {
    /// Active columns, in order of entry.
    pub active: Vec<usize>,
    /// Sign of the correlation of each active column.
    pub signs: Vec<f64>,
    /// Coefficient of each active column.
    pub coefs: Vec<f64>,
    pub tau: f64,
    /// `Cᵀ(y − C h)` at this point.
    pub correlations: Vec<f64>,
    breakpoints: usize,
    last_added: Option<usize>,
    last_removed: Option<usize>,
}

/// The linear piece of the path leaving a state.
#[derive(Debug, Clone)]
struct Segment {
    direction: Vec<f64>,
    delta: f64,
    event: PathEvent,
}

impl HomotopyState {
    /// The zero solution at `τ₀ = ‖Cᵀy‖_∞`.
    pub fn start(op: &CirculantOperator, y: &[f64]) -> Result<Self> {
        let correlations = op.adjoint(y)?;
        Ok(Self {
            active: Vec::new(),
            signs: Vec::new(),
            coefs: Vec::new(),
            tau: norm_inf(&correlations),
            correlations,
            breakpoints: 0,
            last_added: None,
            last_removed: None,
        })
    }

    /// Number of breakpoints passed so far.
    pub fn breakpoints(&self) -> usize {
        self.breakpoints
    }

    /// Solution as a dense vector of length `m`.
    pub fn dense(&self, m: usize) -> Vec<f64> {
        let mut h = vec![0.0; m];
        for (&i, &c) in self.active.iter().zip(&self.coefs) {
            h[i] = c;
        }
        h
    }

    /// Support and values, sorted by column and without exact zeros.
    pub fn sparse(&self) -> (Vec<usize>, Vec<f64>) {
        let mut pairs: Vec<(usize, f64)> = self
            .active
            .iter()
            .copied()
            .zip(self.coefs.iter().copied())
            .filter(|(_, c)| *c != 0.0)
            .collect();
        pairs.sort_by_key(|p| p.0);
        pairs.into_iter().unzip()
    }

    fn next_segment(&self, op: &CirculantOperator, tau_stop: f64) -> Result<Segment> {
        let stop = Segment {
            direction: vec![0.0; self.active.len()],
            delta: (self.tau - tau_stop).max(0.0),
            event: PathEvent::Stop,
        };
        if self.tau <= tau_stop {
            return Ok(stop);
        }
        if self.active.is_empty() {
            // first event: the column of largest |correlation|, lowest index on ties
            let mut best = 0;
            for (i, c) in self.correlations.iter().enumerate() {
                if c.abs() > self.correlations[best].abs() {
                    best = i;
                }
            }
            return Ok(Segment {
                direction: Vec::new(),
                delta: 0.0,
                event: PathEvent::Add(best),
            });
        }

        let g = op.active_gram(&self.active);
        let direction = cholesky_solve(&g, &self.signs).ok_or(Error::DegeneratePath {
            breakpoint: self.breakpoints,
        })?;
        let v = op.apply_sparse(&self.active, &direction);
        let a = op.adjoint(&v)?;

        let tie = 1e-13 * self.tau;
        let reentry = 1e-10 * self.tau;
        let mut best = (stop.delta, usize::MAX, PathEvent::Stop);
        let mut consider = |delta: f64, col: usize, event: PathEvent| {
            if delta < best.0 - tie || (delta <= best.0 + tie && col < best.1 && delta < stop.delta)
            {
                best = (delta, col, event);
            }
        };

        let mut is_active = vec![false; op.m()];
        for &i in &self.active {
            is_active[i] = true;
        }
        for i in 0..op.m() {
            if is_active[i] {
                continue;
            }
            // a column just removed sits on the boundary; only a later
            // crossing counts
            let floor = if Some(i) == self.last_removed {
                reentry
            } else {
                0.0
            };
            let c = self.correlations[i];
            // c − δ·a = +(τ − δ)  or  c − δ·a = −(τ − δ)
            for (num, den) in [(self.tau - c, 1.0 - a[i]), (self.tau + c, 1.0 + a[i])] {
                if den > 0.0 {
                    let delta = num.max(0.0) / den;
                    if delta > floor || (floor == 0.0 && delta == 0.0) {
                        consider(delta, i, PathEvent::Add(i));
                    }
                }
            }
        }
        for (p, &i) in self.active.iter().enumerate() {
            if direction[p] == 0.0 {
                continue;
            }
            let floor = if Some(i) == self.last_added {
                reentry
            } else {
                0.0
            };
            let delta = -self.coefs[p] / direction[p];
            if delta > floor {
                consider(delta, i, PathEvent::Remove(i));
            }
        }

        Ok(Segment {
            direction,
            delta: best.0,
            event: best.2,
        })
    }

    /// Moves `delta` along the segment without applying its event.
    fn slide(&self, op: &CirculantOperator, y: &[f64], seg: &Segment, delta: f64) -> Result<Self> {
        let tau = self.tau - delta;
        let coefs = if self.active.is_empty() {
            Vec::new()
        } else {
            // Re-solve the active normal equations at the new τ instead of
            // accumulating `coefs + δ·d`.
            let cy = op.adjoint(y)?;
            let rhs: Vec<f64> = self
                .active
                .iter()
                .zip(&self.signs)
                .map(|(&i, &s)| cy[i] - tau * s)
                .collect();
            match cholesky_solve(&op.active_gram(&self.active), &rhs) {
                Some(c) => c,
                None => self
                    .coefs
                    .iter()
                    .zip(&seg.direction)
                    .map(|(c, d)| c + delta * d)
                    .collect(),
            }
        };
        let mut next = Self {
            active: self.active.clone(),
            signs: self.signs.clone(),
            coefs,
            tau,
            correlations: Vec::new(),
            breakpoints: self.breakpoints,
            last_added: self.last_added,
            last_removed: self.last_removed,
        };
        next.refresh_correlations(op, y)?;
        Ok(next)
    }

    fn refresh_correlations(&mut self, op: &CirculantOperator, y: &[f64]) -> Result<()> {
        let fit = op.apply_sparse(&self.active, &self.coefs);
        let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        self.correlations = op.adjoint(&r)?;
        Ok(())
    }

    fn apply_segment(
        &self,
        op: &CirculantOperator,
        y: &[f64],
        seg: &Segment,
    ) -> Result<(Self, Breakpoint)> {
        let mut next = self.slide(op, y, seg, seg.delta)?;
        next.breakpoints += 1;
        next.last_added = None;
        next.last_removed = None;
        match seg.event {
            PathEvent::Add(i) => {
                let s = if next.correlations[i] >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                next.active.push(i);
                next.signs.push(s);
                next.coefs.push(0.0);
                next.last_added = Some(i);
            }
            PathEvent::Remove(i) => {
                let p = next
                    .active
                    .iter()
                    .position(|&a| a == i)
                    .expect("removed column is active");
                next.active.remove(p);
                next.signs.remove(p);
                next.coefs.remove(p);
                next.last_removed = Some(i);
                next.refresh_correlations(op, y)?;
            }
            PathEvent::Stop => {}
        }
        let bp = Breakpoint {
            index: next.breakpoints,
            tau: next.tau,
            event: seg.event,
            support_size: next.active.len(),
        };
        Ok((next, bp))
    }

    /// Advances to the next breakpoint, or to `tau_stop` if no event
    /// happens before it.
    pub fn path_step(
        &self,
        op: &CirculantOperator,
        y: &[f64],
        tau_stop: f64,
    ) -> Result<(Self, Breakpoint)> {
        let seg = self.next_segment(op, tau_stop)?;
        self.apply_segment(op, y, &seg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotopyStatus {
    ReachedCardinality,
    ReachedTau,
    PathExhausted,
}

#[derive(Debug, Clone)]
pub struct HomotopyResult {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub tau_final: f64,
    pub path_length: usize,
    pub status: HomotopyStatus,
    pub trace: Vec<Breakpoint>,
}

impl HomotopyResult {
    pub fn cardinality(&self) -> usize {
        self.support.len()
    }

    pub fn dense(&self, m: usize) -> Vec<f64> {
        let mut h = vec![0.0; m];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            h[i] = v;
        }
        h
    }
}

/// Default lower bound on `τ`: `1e-12 · ‖Cᵀy‖_∞`.
pub fn default_tau_floor(op: &CirculantOperator, y: &[f64]) -> Result<f64> {
    Ok(1e-12 * norm_inf(&op.adjoint(y)?))
}

fn validate(op: &CirculantOperator, y: &[f64], tau_stop: f64) -> Result<()> {
    op.check_len(y)?;
    if !(tau_stop >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau floor must be >= 0, got {tau_stop}"
        )));
    }
    Ok(())
}

fn max_breakpoints(m: usize) -> usize {
    50 * m + 100
}

fn finish(state: &HomotopyState, status: HomotopyStatus, trace: Vec<Breakpoint>) -> HomotopyResult {
    let (support, values) = state.sparse();
    HomotopyResult {
        support,
        values,
        tau_final: state.tau,
        path_length: state.breakpoints,
        status,
        trace,
    }
}

/// Follows the path until the active set first holds `k_target` columns,
/// then to the low-`τ` end of that linear piece (the next breakpoint, or
/// `tau_floor`), returning the solution there with `k_target` nonzeros.
///
/// If that piece ends because a coefficient reaches zero, the returned
/// point is the middle of the piece instead, so all `k_target`
/// coefficients stay nonzero.
pub fn solve_to_cardinality(
    op: &CirculantOperator,
    y: &[f64],
    k_target: usize,
    tau_floor: f64,
) -> Result<HomotopyResult> {
    validate(op, y, tau_floor)?;
    if k_target == 0 || k_target > op.m() {
        return Err(Error::InvalidArgument(format!(
            "target cardinality must be in 1..={}, got {k_target}",
            op.m()
        )));
    }
    run(op, y, Some(k_target), tau_floor)
}

/// Follows the path down to `tau`, returning the LASSO solution there.
pub fn solve_to_tau(op: &CirculantOperator, y: &[f64], tau: f64) -> Result<HomotopyResult> {
    validate(op, y, tau)?;
    run(op, y, None, tau)
}

fn run(
    op: &CirculantOperator,
    y: &[f64],
    k_target: Option<usize>,
    tau_stop: f64,
) -> Result<HomotopyResult> {
    let mut state = HomotopyState::start(op, y)?;
    let mut trace = Vec::new();
    if state.tau <= tau_stop {
        return Ok(finish(&state, HomotopyStatus::ReachedTau, trace));
    }
    loop {
        if state.breakpoints >= max_breakpoints(op.m()) {
            return Ok(finish(&state, HomotopyStatus::PathExhausted, trace));
        }
        let seg = state.next_segment(op, tau_stop)?;
        if Some(state.active.len()) == k_target && seg.delta > 0.0 {
            let end = match seg.event {
                PathEvent::Remove(_) => state.slide(op, y, &seg, 0.5 * seg.delta)?,
                _ => state.slide(op, y, &seg, seg.delta)?,
            };
            return Ok(finish(&end, HomotopyStatus::ReachedCardinality, trace));
        }
        let (next, bp) = state.apply_segment(op, y, &seg)?;
        trace.push(bp);
        state = next;
        if seg.event == PathEvent::Stop {
            return Ok(finish(&state, HomotopyStatus::ReachedTau, trace));
        }
    }
}

/// Worst violations of the LASSO optimality conditions at `(h, τ)`.
#[derive(Debug, Clone, Copy)]
pub struct KktReport {
    /// `max |c_i − τ·sign(h_i)|` over the support of `h`.
    pub active_violation: f64,
    /// `max |c_i|` off the support of `h`.
    pub inactive_max: f64,
}

impl KktReport {
    /// Active correlations equal `τ·sign` to `1e-8·max(1, τ)`; inactive
    /// ones stay within `τ(1 + 1e-8)`.
    pub fn holds(&self, tau: f64) -> bool {
        self.active_violation <= 1e-8 * tau.max(1.0) && self.inactive_max <= tau * (1.0 + 1e-8)
    }
}

pub fn kkt_report(op: &CirculantOperator, y: &[f64], h: &[f64], tau: f64) -> Result<KktReport> {
    let fit = op.apply(h)?;
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let c = op.adjoint(&r)?;
    let mut report = KktReport {
        active_violation: 0.0,
        inactive_max: 0.0,
    };
    for (ci, hi) in c.iter().zip(h) {
        if *hi != 0.0 {
            let v = (ci - tau * hi.signum()).abs();
            report.active_violation = report.active_violation.max(v);
        } else {
            report.inactive_max = report.inactive_max.max(ci.abs());
        }
    }
    Ok(report)
}
