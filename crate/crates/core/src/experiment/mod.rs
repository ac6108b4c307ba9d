//! Monte-Carlo harness: seeded instances, single trials, phase diagrams
//! over `(n, k)` and the two known-side baselines.

pub mod io;

use std::time::Instant;

use rayon::prelude::*;

use crate::am::{self, pair_errors, AmConfig, InitMode};
use crate::block_l1::{solve_block_l1, BlockConfig, BlockOperator};
use crate::channel::{apply_channel, Channel};
use crate::codec::CodingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{norm2, rel_error};
use crate::rng::{mix, normal_vec, seeded};

/// Sub-stream tags for one trial seed.
const STREAM_MATRIX: u64 = 1;
const STREAM_SIGNAL: u64 = 2;
const STREAM_CHANNEL: u64 = 3;
const STREAM_NOISE: u64 = 4;

/// A synthetic problem: `y = h ⊗ Ax + ν`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: CodingMatrix,
    pub x: Vec<f64>,
    pub h: Channel,
    pub y: Vec<f64>,
    pub noise_sigma: f64,
}

impl Instance {
    /// `x ~ N(0, I)`, `A ~ N(0, 1/m)`, `k` taps `~ N(0,1)` at uniform delays,
    /// each drawn from its own stream derived from `seed`.
    pub fn generate(m: usize, n: usize, k: usize, seed: u64, noise_sigma: f64) -> Result<Self> {
        let a = CodingMatrix::generate(m, n, mix(&[seed, STREAM_MATRIX]))?;
        let x = normal_vec(&mut seeded(mix(&[seed, STREAM_SIGNAL])), n);
        let h = Channel::generate(m, k, mix(&[seed, STREAM_CHANNEL]))?;
        let y = apply_channel(&a.encode(&x)?, &h, noise_sigma, mix(&[seed, STREAM_NOISE]))?.y;
        Ok(Self {
            a,
            x,
            h,
            y,
            noise_sigma,
        })
    }

    /// Delay of the largest-magnitude tap (lowest delay on ties).
    pub fn strongest_delay(&self) -> usize {
        let mut best = 0;
        for (p, t) in self.h.taps().iter().enumerate() {
            if t.abs() > self.h.taps()[best].abs() {
                best = p;
            }
        }
        self.h.support()[best]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Am,
    BlockL1,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Am => "am",
            Method::BlockL1 => "block-l1",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "am" => Ok(Method::Am),
            "block-l1" | "block" => Ok(Method::BlockL1),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

/// Solver settings shared by every trial of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    /// AM settings; `None` means [`AmConfig::defaults`] for the trial's `m`.
    /// The init mode is always replaced by the known strongest path unless
    /// `search_init` is set.
    pub am: Option<AmConfig>,
    pub search_init: bool,
    pub block: BlockConfig,
    pub success_tol: f64,
    pub noise_sigma: f64,
    /// Count successes even on noisy data.
    pub success_with_noise: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            am: None,
            search_init: false,
            block: BlockConfig::default(),
            success_tol: 1e-4,
            noise_sigma: 0.0,
            success_with_noise: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub method: Method,
    pub success: bool,
    pub rel_err_x: f64,
    pub rel_err_h: f64,
    pub iterations: usize,
    pub status: String,
}

/// A trial together with the solver output it came from.
#[derive(Debug, Clone)]
pub enum TrialOutput {
    Am(am::RecoveryResult),
    Block(crate::block_l1::BlockSolution),
}

pub fn run_trial(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    method: Method,
    cfg: &TrialConfig,
) -> Result<TrialRecord> {
    Ok(run_trial_detailed(m, n, k, seed, method, cfg)?.0)
}

/// Like [`run_trial`], also returning the instance and raw solver output.
pub fn run_trial_detailed(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    method: Method,
    cfg: &TrialConfig,
) -> Result<(TrialRecord, Instance, TrialOutput)> {
    let inst = Instance::generate(m, n, k, seed, cfg.noise_sigma)?;
    let (x_hat, h_hat, iterations, status, output) = match method {
        Method::Am => {
            let mut am_cfg = cfg.am.clone().unwrap_or_else(|| AmConfig::defaults(m));
            am_cfg.k_max = am_cfg.k_max.min(m);
            if !cfg.search_init {
                am_cfg.init_mode = InitMode::KnownStrongestPath(inst.strongest_delay());
            }
            let res = am::recover(&inst.a, &inst.y, &am_cfg)?;
            (
                res.x_hat.clone(),
                res.h_hat.dense(),
                res.iterations(),
                res.status.label().to_string(),
                TrialOutput::Am(res),
            )
        }
        Method::BlockL1 => {
            let sol = solve_block_l1(&BlockOperator::new(&inst.a), &inst.y, &cfg.block)?;
            (
                sol.x_hat.clone(),
                sol.h_hat.clone(),
                sol.iterations,
                sol.status.label().to_string(),
                TrialOutput::Block(sol),
            )
        }
    };
    let (rel_err_x, rel_err_h) = if norm2(&x_hat) == 0.0 {
        (1.0, 1.0)
    } else {
        pair_errors(&x_hat, &h_hat, &inst.x, &inst.h.dense())?
    };
    let counts = cfg.noise_sigma == 0.0 || cfg.success_with_noise;
    let success = counts && rel_err_x <= cfg.success_tol && rel_err_h <= cfg.success_tol;
    let record = TrialRecord {
        m,
        n,
        k,
        seed,
        method,
        success,
        rel_err_x,
        rel_err_h,
        iterations,
        status,
    };
    Ok((record, inst, output))
}

/// The grid of a phase-diagram run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGridSpec {
    pub m: usize,
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
}

impl PhaseGridSpec {
    /// `m = 128`, `n ∈ {4,8,16,32,64}`, `k ∈ {1,2,4,8,16}`, 5 trials.
    pub fn desk() -> Self {
        Self {
            m: 128,
            n_values: vec![4, 8, 16, 32, 64],
            k_values: vec![1, 2, 4, 8, 16],
            trials: 5,
            base_seed: 0,
        }
    }

    /// 8×8 grid at `m = 256` or 10×10 at `m = 512`, 10 trials per cell.
    pub fn full_scale(m: usize) -> Self {
        let (n_values, k_values) = if m >= 512 {
            (
                (1..=10).map(|i| 16 * i).collect(),
                (1..=10).map(|i| 2 * i).collect(),
            )
        } else {
            (
                (1..=8).map(|i| 8 * i).collect(),
                (1..=8).map(|i| 2 * i).collect(),
            )
        };
        Self {
            m,
            n_values,
            k_values,
            trials: 10,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[usize]| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.n_values) || !increasing(&self.k_values) {
            return Err(Error::InvalidArgument(
                "n and k grids must be nonempty and strictly increasing".into(),
            ));
        }
        if self.n_values.iter().any(|&n| n == 0 || n >= self.m) {
            return Err(Error::InvalidArgument(format!(
                "every n must be in 1..{}",
                self.m
            )));
        }
        if self.k_values.iter().any(|&k| k == 0 || k > self.m) {
            return Err(Error::InvalidArgument(format!(
                "every k must be in 1..={}",
                self.m
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// Seed of trial `t` in cell `(n, k)`, independent of execution order.
    pub fn trial_seed(&self, n: usize, k: usize, t: usize) -> u64 {
        mix(&[self.base_seed, n as u64, k as u64, t as u64])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub mean_iterations: f64,
    pub mean_wall_secs: f64,
}

/// Success rates over the grid, stored with `k` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub spec: PhaseGridSpec,
    pub method: Method,
    pub cells: Vec<CellStats>,
    pub records: Vec<TrialRecord>,
}

impl PhaseDiagram {
    pub fn cell(&self, n: usize, k: usize) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.n == n && c.k == k)
    }

    pub fn rate(&self, n: usize, k: usize) -> Option<f64> {
        self.cell(n, k).map(|c| c.rate)
    }

    /// Cells at or above `level` with a 4-neighbour below it.
    pub fn contour_cells(&self, level: f64) -> Vec<&CellStats> {
        let (nn, nk) = (self.spec.n_values.len(), self.spec.k_values.len());
        let at = |ni: usize, ki: usize| self.cells[ki * nn + ni].rate;
        let mut out = Vec::new();
        for ki in 0..nk {
            for ni in 0..nn {
                if at(ni, ki) < level {
                    continue;
                }
                let mut neighbours = Vec::new();
                if ni > 0 {
                    neighbours.push((ni - 1, ki));
                }
                if ni + 1 < nn {
                    neighbours.push((ni + 1, ki));
                }
                if ki > 0 {
                    neighbours.push((ni, ki - 1));
                }
                if ki + 1 < nk {
                    neighbours.push((ni, ki + 1));
                }
                if neighbours.iter().any(|&(a, b)| at(a, b) < level) {
                    out.push(&self.cells[ki * nn + ni]);
                }
            }
        }
        out
    }
}

/// Runs every trial of the grid (in parallel) and aggregates per cell.
pub fn run_phase_diagram(
    spec: &PhaseGridSpec,
    method: Method,
    cfg: &TrialConfig,
) -> Result<PhaseDiagram> {
    run_phase_diagram_inspect(spec, method, cfg, |_, _, _| {})
}

/// [`run_phase_diagram`] with a callback that sees every trial's instance
/// and solver output (called from worker threads, in no fixed order).
pub fn run_phase_diagram_inspect<F>(
    spec: &PhaseGridSpec,
    method: Method,
    cfg: &TrialConfig,
    inspect: F,
) -> Result<PhaseDiagram>
where
    F: Fn(&TrialRecord, &Instance, &TrialOutput) + Sync,
{
    spec.validate()?;
    let jobs: Vec<(usize, usize, usize)> = spec
        .k_values
        .iter()
        .flat_map(|&k| {
            spec.n_values
                .iter()
                .flat_map(move |&n| (0..spec.trials).map(move |t| (n, k, t)))
        })
        .collect();
    let results: Vec<(TrialRecord, f64)> = jobs
        .par_iter()
        .map(|&(n, k, t)| {
            let start = Instant::now();
            let (rec, inst, out) =
                run_trial_detailed(spec.m, n, k, spec.trial_seed(n, k, t), method, cfg)?;
            let secs = start.elapsed().as_secs_f64();
            inspect(&rec, &inst, &out);
            Ok((rec, secs))
        })
        .collect::<Result<_>>()?;

    let cells = results
        .chunks(spec.trials)
        .map(|chunk| {
            let successes = chunk.iter().filter(|(r, _)| r.success).count();
            let trials = chunk.len();
            CellStats {
                n: chunk[0].0.n,
                k: chunk[0].0.k,
                trials,
                successes,
                rate: successes as f64 / trials as f64,
                mean_iterations: chunk.iter().map(|(r, _)| r.iterations as f64).sum::<f64>()
                    / trials as f64,
                mean_wall_secs: chunk.iter().map(|(_, s)| s).sum::<f64>() / trials as f64,
            }
        })
        .collect();
    Ok(PhaseDiagram {
        spec: spec.clone(),
        method,
        cells,
        records: results.into_iter().map(|(r, _)| r).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownChannelOutcome {
    /// `None` when `H = h ⊗ A` fails the rank check.
    pub rel_err: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownSignalOutcome {
    pub rel_err: Option<f64>,
    pub support_exact: bool,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub known_channel: KnownChannelOutcome,
    pub known_signal: KnownSignalOutcome,
}

/// The two one-sided problems: least squares for `x` given the true `h`,
/// and homotopy (plus refit) for `h` given the true `x`.
pub fn baselines(m: usize, n: usize, k: usize, seed: u64) -> Result<BaselineReport> {
    let inst = Instance::generate(m, n, k, seed, 0.0)?;
    Ok(BaselineReport {
        m,
        n,
        k,
        seed,
        known_channel: known_channel_baseline(&inst)?,
        known_signal: known_signal_baseline(&inst)?.0,
    })
}

pub fn known_channel_baseline(inst: &Instance) -> Result<KnownChannelOutcome> {
    match am::signal_update(&inst.a, &inst.h, &inst.y) {
        Ok(x) => Ok(KnownChannelOutcome {
            rel_err: Some(rel_error(&x, &inst.x)),
            status: "ok".into(),
        }),
        Err(Error::RankDeficient { .. }) => Ok(KnownChannelOutcome {
            rel_err: None,
            status: "rank-deficient".into(),
        }),
        Err(e) => Err(e),
    }
}

/// Also returns the homotopy result so callers can dump its path.
pub fn known_signal_baseline(
    inst: &Instance,
) -> Result<(KnownSignalOutcome, Option<crate::homotopy::HomotopyResult>)> {
    let path = match am::channel_update(&inst.a, &inst.x, &inst.y, inst.h.k()) {
        Ok(p) => p,
        Err(Error::DegeneratePath { .. }) => {
            return Ok((
                KnownSignalOutcome {
                    rel_err: None,
                    support_exact: false,
                    status: "degenerate".into(),
                },
                None,
            ))
        }
        Err(e) => return Err(e),
    };
    if path.support.is_empty() {
        let outcome = KnownSignalOutcome {
            rel_err: Some(1.0),
            support_exact: false,
            status: "empty".into(),
        };
        return Ok((outcome, Some(path)));
    }
    let codeword = inst.a.encode(&inst.x)?;
    let taps =
        am::refit_taps(&codeword, &path.support, &inst.y).unwrap_or_else(|_| path.values.clone());
    let mut est = vec![0.0; inst.h.m()];
    for (&i, &v) in path.support.iter().zip(&taps) {
        est[i] = v;
    }
    let outcome = KnownSignalOutcome {
        rel_err: Some(rel_error(&est, &inst.h.dense())),
        support_exact: path.support == inst.h.support(),
        status: format!("{:?}", path.status).to_lowercase(),
    };
    Ok((outcome, Some(path)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_is_deterministic() {
        let a = Instance::generate(32, 4, 2, 9, 0.0).unwrap();
        let b = Instance::generate(32, 4, 2, 9, 0.0).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.h, b.h);
    }

    #[test]
    fn easiest_trial_succeeds_and_repeats() {
        let cfg = TrialConfig::default();
        let r1 = run_trial(64, 4, 1, 123, Method::Am, &cfg).unwrap();
        let r2 = run_trial(64, 4, 1, 123, Method::Am, &cfg).unwrap();
        assert!(r1.success, "{r1:?}");
        assert_eq!(r1, r2);
    }

    #[test]
    fn infeasible_trial_degrades_gracefully() {
        let r = run_trial(64, 60, 32, 5, Method::Am, &TrialConfig::default()).unwrap();
        assert!(!r.success);
    }

    #[test]
    fn single_cell_diagram() {
        let spec = PhaseGridSpec {
            m: 64,
            n_values: vec![4],
            k_values: vec![1],
            trials: 1,
            base_seed: 3,
        };
        let d = run_phase_diagram(&spec, Method::Am, &TrialConfig::default()).unwrap();
        assert_eq!(d.cells.len(), 1);
        assert_eq!(d.cells[0].rate, 1.0);
    }

    #[test]
    fn grid_validation() {
        let mut s = PhaseGridSpec::desk();
        assert!(s.validate().is_ok());
        s.n_values = vec![4, 128];
        assert!(s.validate().is_err());
        let mut s = PhaseGridSpec::desk();
        s.k_values = vec![2, 1];
        assert!(s.validate().is_err());
        let mut s = PhaseGridSpec::desk();
        s.trials = 0;
        assert!(s.validate().is_err());
        assert!(PhaseGridSpec::full_scale(256).validate().is_ok());
        assert!(PhaseGridSpec::full_scale(512).validate().is_ok());
        assert_eq!(
            PhaseGridSpec::full_scale(256).n_values.len()
                * PhaseGridSpec::full_scale(256).k_values.len(),
            64
        );
    }

    #[test]
    fn baseline_easy_regime() {
        let r = baselines(64, 4, 1, 7).unwrap();
        assert!(r.known_channel.rel_err.unwrap() < 1e-10);
        assert!(r.known_signal.support_exact);
        assert!(r.known_signal.rel_err.unwrap() < 1e-10);
    }

    #[test]
    fn contour_marks_boundary() {
        let spec = PhaseGridSpec {
            m: 16,
            n_values: vec![1, 2],
            k_values: vec![1, 2],
            trials: 1,
            base_seed: 0,
        };
        let mk = |n, k, rate| CellStats {
            n,
            k,
            trials: 1,
            successes: rate as usize,
            rate,
            mean_iterations: 1.0,
            mean_wall_secs: 0.0,
        };
        let d = PhaseDiagram {
            spec,
            method: Method::Am,
            cells: vec![mk(1, 1, 1.0), mk(2, 1, 1.0), mk(1, 2, 1.0), mk(2, 2, 0.0)],
            records: vec![],
        };
        let c: Vec<(usize, usize)> = d.contour_cells(0.95).iter().map(|c| (c.n, c.k)).collect();
        assert_eq!(c, vec![(2, 1), (1, 2)]);
    }
}
