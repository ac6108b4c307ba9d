//! Alternating minimization for joint signal/channel recovery.
//!
//! Minimizes `½‖h ⊗ Ax − y‖₂² + τ‖h‖₁` by alternating
//!
//! 1. a channel step: with `x` fixed, `y = C h` with `C` the circulant
//!    matrix of `Ax`; solved by the homotopy path, stopped once the estimate
//!    holds `k_j = ⌈j/r⌉` taps;
//! 2. a signal step: with `h` fixed, `y = H x` with `H = h ⊗ A`; ordinary
//!    least squares;
//!
//! after which `x` is rescaled to unit norm and `h` absorbs the scale.
//! The loop starts from a single-tap channel at the strongest path.

use crate::channel::Channel;
use crate::codec::CodingMatrix;
use crate::error::{Error, Result};
use crate::homotopy::{default_tau_floor, solve_to_cardinality, CirculantOperator, HomotopyResult};
use crate::numerics::{circshift, dot, lstsq, norm2, qr, rel_error, Matrix, QrFactors};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// The delay of the strongest path is given.
    KnownStrongestPath(usize),
    /// Scan all delays with the least-squares matched filter.
    Search,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmConfig {
    /// Iterations spent at each channel cardinality.
    pub r: usize,
    pub k_max: usize,
    pub max_iters: usize,
    /// Relative residual `‖ĥ ⊗ Ax̂ − y‖ / ‖y‖` declaring convergence.
    pub residual_tol: f64,
    pub init_mode: InitMode,
    /// Refit channel taps by least squares on the homotopy support.
    pub refit: bool,
}

impl AmConfig {
    /// `r = 3`, `k_max = ⌊m/4⌋`, `max_iters = r·k_max`, `residual_tol = 1e-6`.
    pub fn defaults(m: usize) -> Self {
        let r = 3;
        let k_max = (m / 4).max(1);
        Self {
            r,
            k_max,
            max_iters: r * k_max,
            residual_tol: 1e-6,
            init_mode: InitMode::Search,
            refit: true,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.r == 0 {
            return Err(Error::InvalidArgument("r must be >= 1".into()));
        }
        if self.k_max == 0 || self.k_max > m {
            return Err(Error::InvalidArgument(format!("k_max must be in 1..={m}")));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidArgument("residual_tol must be > 0".into()));
        }
        if let InitMode::KnownStrongestPath(d) = self.init_mode {
            if d >= m {
                return Err(Error::InvalidArgument(format!(
                    "strongest path {d} outside [0, {m})"
                )));
            }
        }
        Ok(())
    }

    /// `⌈j / r⌉`.
    pub fn cardinality_at(&self, j: usize) -> usize {
        j.div_ceil(self.r)
    }
}

/// One completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub k_target: usize,
    pub tau: f64,
    /// `‖h_j ⊗ A x_j − y‖₂` after normalization.
    pub residual: f64,
    pub support: Vec<usize>,
    /// `‖H_j x_{j−1} − y‖₂`.
    pub ls_residual_before: f64,
    /// `‖H_j x_j − y‖₂` before normalization.
    pub ls_residual_after: f64,
    pub x_norm: f64,
    pub refit: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AmTrace {
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryStatus {
    Converged,
    IterationCap,
    CardinalityCap,
    Degenerate,
}

impl RecoveryStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RecoveryStatus::Converged => "converged",
            RecoveryStatus::IterationCap => "iteration-cap",
            RecoveryStatus::CardinalityCap => "cardinality-cap",
            RecoveryStatus::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Unit-norm signal estimate (all zeros only for degenerate input).
    pub x_hat: Vec<f64>,
    pub h_hat: Channel,
    pub status: RecoveryStatus,
    pub trace: AmTrace,
    pub init_delay: usize,
}

impl RecoveryResult {
    pub fn iterations(&self) -> usize {
        self.trace.records.len()
    }
}

#[derive(Debug, Clone)]
pub struct Initialization {
    pub delay: usize,
    /// Unit-norm least-squares fit at `delay` (zero when `y` is zero).
    pub x0: Vec<f64>,
    pub h0: Channel,
    /// `min_x ‖S^delay A x − y‖₂²`.
    pub residual_sq: f64,
}

fn check_y(a: &CodingMatrix, y: &[f64]) -> Result<()> {
    if y.len() != a.m() {
        return Err(Error::DimensionMismatch {
            expected: a.m(),
            got: y.len(),
        });
    }
    Ok(())
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = norm2(&v);
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

fn init_at(factors: &QrFactors, y: &[f64], delay: usize) -> Result<Initialization> {
    let m = y.len();
    // ‖S^d A x − y‖ = ‖A x − S^{−d} y‖ since shifts are orthogonal
    let shifted = circshift(y, -(delay as isize));
    let x = factors.solve(&shifted)?;
    Ok(Initialization {
        delay,
        x0: normalized(x),
        h0: Channel::delta(m, delay)?,
        residual_sq: factors.residual_sq(&shifted)?,
    })
}

/// Matched-filter initialization: the delay whose shifted copy of `A`
/// best explains `y` in least squares. Ties go to the smallest delay.
pub fn strongest_path_init(a: &CodingMatrix, y: &[f64]) -> Result<Initialization> {
    check_y(a, y)?;
    let factors = qr(a.matrix())?;
    strongest_path_with(&factors, y)
}

fn strongest_path_with(factors: &QrFactors, y: &[f64]) -> Result<Initialization> {
    let m = y.len();
    let mut best = (0, f64::INFINITY);
    for d in 0..m {
        let res = factors.residual_sq(&circshift(y, -(d as isize)))?;
        if res < best.1 {
            best = (d, res);
        }
    }
    init_at(factors, y, best.0)
}

/// `H = h ⊗ A`, column by column.
pub fn convolved_matrix(a: &CodingMatrix, h: &Channel) -> Result<Matrix> {
    if h.m() != a.m() {
        return Err(Error::DimensionMismatch {
            expected: a.m(),
            got: h.m(),
        });
    }
    let cols: Vec<Vec<f64>> = (0..a.n())
        .map(|j| h.convolve(&a.matrix().column(j)))
        .collect::<Result<_>>()?;
    Matrix::from_columns(&cols)
}

/// Least-squares signal estimate for a known channel.
pub fn signal_update(a: &CodingMatrix, h: &Channel, y: &[f64]) -> Result<Vec<f64>> {
    check_y(a, y)?;
    lstsq(&convolved_matrix(a, h)?, y)
}

/// Homotopy channel estimate with `k_target` taps for a known signal.
pub fn channel_update(
    a: &CodingMatrix,
    x: &[f64],
    y: &[f64],
    k_target: usize,
) -> Result<HomotopyResult> {
    check_y(a, y)?;
    if norm2(x) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let op = CirculantOperator::new(a.encode(x)?)?;
    let floor = default_tau_floor(&op, y)?;
    solve_to_cardinality(&op, y, k_target, floor)
}

/// Least-squares taps on a fixed support: `argmin ‖C_S v − y‖`.
pub fn refit_taps(generator: &[f64], support: &[usize], y: &[f64]) -> Result<Vec<f64>> {
    let cols: Vec<Vec<f64>> = support
        .iter()
        .map(|&d| circshift(generator, d as isize))
        .collect();
    lstsq(&Matrix::from_columns(&cols)?, y)
}

/// Best scalar `α` with `α·x̂ ≈ x`, and `‖α·x̂ − x‖/‖x‖`.
pub fn align_scale(x_hat: &[f64], x_true: &[f64]) -> Result<(f64, f64)> {
    if x_hat.len() != x_true.len() {
        return Err(Error::DimensionMismatch {
            expected: x_true.len(),
            got: x_hat.len(),
        });
    }
    let nh = dot(x_hat, x_hat);
    if nh == 0.0 {
        return Err(Error::ZeroVector);
    }
    let alpha = dot(x_hat, x_true) / nh;
    let aligned: Vec<f64> = x_hat.iter().map(|v| alpha * v).collect();
    Ok((alpha, rel_error(&aligned, x_true)))
}

/// Relative errors of a recovered pair after resolving the scale:
/// `x ≈ α·x̂` and `h ≈ ĥ/α`.
pub fn pair_errors(
    x_hat: &[f64],
    h_hat: &[f64],
    x_true: &[f64],
    h_true: &[f64],
) -> Result<(f64, f64)> {
    let (alpha, ex) = align_scale(x_hat, x_true)?;
    let eh = if alpha == 0.0 {
        f64::INFINITY
    } else {
        let scaled: Vec<f64> = h_hat.iter().map(|v| v / alpha).collect();
        rel_error(&scaled, h_true)
    };
    Ok((ex, eh))
}

/// Runs alternating minimization from `y`.
///
/// Algorithmic failures are reported through [`RecoveryStatus`]; only
/// malformed arguments produce an error.
pub fn recover(a: &CodingMatrix, y: &[f64], cfg: &AmConfig) -> Result<RecoveryResult> {
    check_y(a, y)?;
    cfg.validate(a.m())?;
    let m = a.m();
    let degenerate =
        |x_hat: Vec<f64>, h_hat: Channel, trace: AmTrace, delay: usize| RecoveryResult {
            x_hat,
            h_hat,
            status: RecoveryStatus::Degenerate,
            trace,
            init_delay: delay,
        };

    let y_norm = norm2(y);
    if y_norm == 0.0 {
        return Ok(degenerate(
            vec![0.0; a.n()],
            Channel::delta(m, 0)?,
            AmTrace::default(),
            0,
        ));
    }
    let factors = match qr(a.matrix()) {
        Ok(f) => f,
        Err(Error::RankDeficient { .. }) => {
            return Ok(degenerate(
                vec![0.0; a.n()],
                Channel::delta(m, 0)?,
                AmTrace::default(),
                0,
            ))
        }
        Err(e) => return Err(e),
    };
    let init = match cfg.init_mode {
        InitMode::KnownStrongestPath(d) => init_at(&factors, y, d)?,
        InitMode::Search => strongest_path_with(&factors, y)?,
    };

    let mut x = init.x0.clone();
    let mut h = init.h0.clone();
    let mut trace = AmTrace::default();
    let finish = |x: Vec<f64>, h: Channel, trace: AmTrace, status| RecoveryResult {
        x_hat: x,
        h_hat: h,
        status,
        trace,
        init_delay: init.delay,
    };
    if norm2(&x) == 0.0 {
        return Ok(degenerate(x, h, trace, init.delay));
    }

    let mut j = 0;
    loop {
        j += 1;
        let k_j = cfg.cardinality_at(j);
        if k_j > cfg.k_max {
            return Ok(finish(x, h, trace, RecoveryStatus::CardinalityCap));
        }
        if j > cfg.max_iters {
            return Ok(finish(x, h, trace, RecoveryStatus::IterationCap));
        }

        // channel step
        let codeword = a.encode(&x)?;
        let op = CirculantOperator::new(codeword.clone())?;
        let floor = default_tau_floor(&op, y)?;
        let path = match solve_to_cardinality(&op, y, k_j.min(m), floor) {
            Ok(p) => p,
            Err(Error::DegeneratePath { .. }) => return Ok(degenerate(x, h, trace, init.delay)),
            Err(e) => return Err(e),
        };
        if path.support.is_empty() {
            return Ok(degenerate(x, h, trace, init.delay));
        }
        let taps = if cfg.refit {
            refit_taps(&codeword, &path.support, y).unwrap_or_else(|_| path.values.clone())
        } else {
            path.values.clone()
        };
        let h_j = match Channel::from_dense(&scatter(m, &path.support, &taps)) {
            Ok(c) => c,
            Err(_) => return Ok(degenerate(x, h, trace, init.delay)),
        };

        // signal step
        let hm = convolved_matrix(a, &h_j)?;
        let x_new = match lstsq(&hm, y) {
            Ok(v) => v,
            Err(Error::RankDeficient { .. }) => return Ok(degenerate(x, h_j, trace, init.delay)),
            Err(e) => return Err(e),
        };
        let ls_before = norm2(&crate::numerics::sub(&hm.matvec(&x)?, y));
        let ls_after = norm2(&crate::numerics::sub(&hm.matvec(&x_new)?, y));
        let scale = norm2(&x_new);
        if scale == 0.0 {
            return Ok(degenerate(x, h_j, trace, init.delay));
        }
        x = x_new.iter().map(|v| v / scale).collect();
        h = h_j.scaled(scale)?;

        let fit = h.convolve(&a.encode(&x)?)?;
        let residual = norm2(&crate::numerics::sub(&fit, y));
        trace.records.push(IterationRecord {
            iter: j,
            k_target: k_j,
            tau: path.tau_final,
            residual,
            support: h.support().to_vec(),
            ls_residual_before: ls_before,
            ls_residual_after: ls_after,
            x_norm: norm2(&x),
            refit: cfg.refit,
        });
        if residual <= cfg.residual_tol * y_norm {
            return Ok(finish(x, h, trace, RecoveryStatus::Converged));
        }
    }
}

fn scatter(m: usize, support: &[usize], values: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; m];
    for (&i, &x) in support.iter().zip(values) {
        v[i] = x;
    }
    v
}
