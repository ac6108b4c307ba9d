//! `chanprot` command-line driver.
//!
//! Settings resolve as command-line flag, then `--config` file entry, then
//! built-in default. Exit status is nonzero only for argument and I/O
//! errors; a failed recovery is reported as data.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use chanprot::am::{self, pair_errors, AmConfig, InitMode};
use chanprot::block_l1::{solve_block_l1, BlockConfig, BlockOperator};
use chanprot::experiment::io;
use chanprot::experiment::{
    known_channel_baseline, known_signal_baseline, run_phase_diagram, Instance, Method,
    PhaseGridSpec, TrialConfig,
};
use chanprot::rng::{mix, normal_vec, seeded};
use chanprot::{Channel, CodingMatrix};

#[derive(Parser)]
#[command(
    name = "chanprot",
    version,
    about = "Random coding over sparse multipath channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a coding matrix and encode a message.
    Encode(EncodeArgs),
    /// Generate a full instance: A, x, a sparse channel and the received y.
    Simulate(CommonArgs),
    /// Alternating-minimization recovery.
    RecoverAm(RecoverAmArgs),
    /// Lifted block-l1 recovery (small m only).
    RecoverBlock(RecoverBlockArgs),
    /// Known-channel and known-signal baselines on one instance.
    Baseline(BaselineArgs),
    /// Success-rate grid over (n, k).
    PhaseDiagram(PhaseArgs),
    /// Re-render a diagram CSV as a PGM image.
    Render(RenderArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Codeword length.
    #[arg(long)]
    m: Option<usize>,
    /// Message length.
    #[arg(long)]
    n: Option<usize>,
    /// Number of channel taps.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value file; keys match the long flag names.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Message as an SCP1 vector (random N(0,1) when omitted).
    #[arg(long)]
    x: Option<PathBuf>,
}

/// Where the data to recover comes from.
#[derive(Args)]
struct InputArgs {
    /// Coding matrix (SCP1). With --y, recover from files instead of a
    /// simulated instance.
    #[arg(long, requires = "y")]
    a: Option<PathBuf>,
    /// Received vector (SCP1).
    #[arg(long, requires = "a")]
    y: Option<PathBuf>,
    /// True message (SCP1) for error reporting on file input.
    #[arg(long)]
    x_true: Option<PathBuf>,
    /// True channel (CSV) for error reporting on file input.
    #[arg(long)]
    h_true: Option<PathBuf>,
}

#[derive(Args)]
struct RecoverAmArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    input: InputArgs,
    /// Iterations per channel cardinality.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative residual for convergence.
    #[arg(long)]
    tol: Option<f64>,
    /// Delay of the strongest path, if known.
    #[arg(long)]
    init_delay: Option<usize>,
    /// Scan all delays even when the true channel is available.
    #[arg(long)]
    search_init: bool,
    /// Skip the least-squares tap refit.
    #[arg(long)]
    no_refit: bool,
}

#[derive(Args)]
struct RecoverBlockArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// Largest accepted m.
    #[arg(long)]
    max_m: Option<usize>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write the known-signal homotopy path as CSV.
    #[arg(long)]
    path_trace: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `am` or `block-l1`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated, increasing.
    #[arg(long)]
    n_values: Option<String>,
    /// Comma-separated, increasing.
    #[arg(long)]
    k_values: Option<String>,
    #[arg(long)]
    success_tol: Option<f64>,
    /// Scan all delays instead of using the true strongest path.
    #[arg(long)]
    search_init: bool,
    /// Allow m > 128 (the large 256 and 512 grids).
    #[arg(long)]
    full_scale: bool,
    /// Block-l1 size cap.
    #[arg(long)]
    max_m: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    /// Diagram CSV written by `phase-diagram`.
    #[arg(long)]
    input: PathBuf,
    /// PGM path (default: next to the input).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag, then config entry, then default.
struct Settings {
    config: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let raw = match path {
            Some(p) => {
                io::read_config(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        let config = raw
            .into_iter()
            .map(|(k, v)| (k.replace('-', "_"), v))
            .collect();
        Ok(Self { config })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key} = {v:?}: {e}")),
            None => Ok(None),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }
}

/// The common problem parameters after resolution.
struct Problem {
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    noise_sigma: f64,
}

fn problem(s: &Settings, c: &CommonArgs) -> Result<Problem> {
    Ok(Problem {
        m: s.or(c.m, "m", 64)?,
        n: s.or(c.n, "n", 4)?,
        k: s.or(c.k, "k", 2)?,
        seed: s.or(c.seed, "seed", 0)?,
        noise_sigma: s.or(c.noise_sigma, "noise_sigma", 0.0)?,
    })
}

fn out_dir(s: &Settings, c: &CommonArgs, default: &str) -> Result<PathBuf> {
    let dir = s.or(c.out.clone(), "out", PathBuf::from(default))?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn parse_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .with_context(|| format!("bad list entry {t:?}"))
        })
        .collect()
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode(a) => encode(a),
        Command::Simulate(c) => simulate(c),
        Command::RecoverAm(a) => recover_am(a),
        Command::RecoverBlock(a) => recover_block(a),
        Command::Baseline(a) => baseline(a),
        Command::PhaseDiagram(a) => phase_diagram(a),
        Command::Render(a) => render(a),
    }
}

fn encode(args: EncodeArgs) -> Result<()> {
    let s = Settings::load(args.common.config.as_deref())?;
    let p = problem(&s, &args.common)?;
    let dir = out_dir(&s, &args.common, "encode-out")?;
    let a = CodingMatrix::generate(p.m, p.n, p.seed)?;
    let x = match &args.x {
        Some(path) => io::read_vector(path)?,
        None => normal_vec(&mut seeded(mix(&[p.seed, 2])), p.n),
    };
    let codeword = a.encode(&x)?;
    io::write_matrix(&dir.join("A.scp1"), a.matrix())?;
    io::write_vector(&dir.join("x.scp1"), &x)?;
    io::write_vector(&dir.join("codeword.scp1"), &codeword)?;
    println!(
        "encoded n={} into m={} (seed {}) -> {}",
        p.n,
        p.m,
        p.seed,
        dir.display()
    );
    Ok(())
}

fn write_instance(dir: &Path, inst: &Instance) -> Result<()> {
    io::write_matrix(&dir.join("A.scp1"), inst.a.matrix())?;
    io::write_vector(&dir.join("x.scp1"), &inst.x)?;
    io::write_channel(&dir.join("h.csv"), &inst.h)?;
    io::write_vector(&dir.join("y.scp1"), &inst.y)?;
    Ok(())
}

fn simulate(c: CommonArgs) -> Result<()> {
    let s = Settings::load(c.config.as_deref())?;
    let p = problem(&s, &c)?;
    let dir = out_dir(&s, &c, "simulate-out")?;
    let inst = Instance::generate(p.m, p.n, p.k, p.seed, p.noise_sigma)?;
    write_instance(&dir, &inst)?;
    println!(
        "instance m={} n={} k={} seed={} noise_sigma={} -> {}",
        p.m,
        p.n,
        p.k,
        p.seed,
        p.noise_sigma,
        dir.display()
    );
    Ok(())
}

/// Data to recover from, plus ground truth when it is known.
struct Loaded {
    a: CodingMatrix,
    y: Vec<f64>,
    x_true: Option<Vec<f64>>,
    h_true: Option<Channel>,
}

fn load_input(s: &Settings, c: &CommonArgs, input: &InputArgs) -> Result<Loaded> {
    let a_path = s.get(input.a.clone(), "a")?;
    let y_path = s.get(input.y.clone(), "y")?;
    match (a_path, y_path) {
        (Some(a), Some(y)) => Ok(Loaded {
            a: CodingMatrix::from_matrix(io::read_matrix(&a)?)?,
            y: io::read_vector(&y)?,
            x_true: s
                .get(input.x_true.clone(), "x_true")?
                .map(|p| io::read_vector(&p))
                .transpose()?,
            h_true: s
                .get(input.h_true.clone(), "h_true")?
                .map(|p| io::read_channel(&p))
                .transpose()?,
        }),
        (None, None) => {
            let p = problem(s, c)?;
            let inst = Instance::generate(p.m, p.n, p.k, p.seed, p.noise_sigma)?;
            Ok(Loaded {
                a: inst.a,
                y: inst.y,
                x_true: Some(inst.x),
                h_true: Some(inst.h),
            })
        }
        _ => bail!("--a and --y must be given together"),
    }
}

fn report_errors(x_hat: &[f64], h_hat: &[f64], data: &Loaded) -> Result<Option<(f64, f64)>> {
    match (&data.x_true, &data.h_true) {
        (Some(x), Some(h)) => {
            if x.len() != x_hat.len() || h.m() != h_hat.len() {
                bail!("ground truth dimensions do not match the problem");
            }
            Ok(Some(
                pair_errors(x_hat, h_hat, x, &h.dense()).unwrap_or((1.0, 1.0)),
            ))
        }
        _ => Ok(None),
    }
}

fn strongest(h: &Channel) -> usize {
    let mut best = 0;
    for (p, t) in h.taps().iter().enumerate() {
        if t.abs() > h.taps()[best].abs() {
            best = p;
        }
    }
    h.support()[best]
}

fn recover_am(args: RecoverAmArgs) -> Result<()> {
    let s = Settings::load(args.common.config.as_deref())?;
    let data = load_input(&s, &args.common, &args.input)?;
    let dir = out_dir(&s, &args.common, "recover-am-out")?;
    let m = data.a.m();
    let mut cfg = AmConfig::defaults(m);
    cfg.r = s.or(args.r, "r", cfg.r)?;
    cfg.k_max = s.or(args.k_max, "k_max", cfg.k_max)?;
    cfg.max_iters = s.or(args.max_iters, "max_iters", cfg.r * cfg.k_max)?;
    cfg.residual_tol = s.or(args.tol, "tol", cfg.residual_tol)?;
    cfg.refit = !s.flag(args.no_refit, "no_refit")?;
    cfg.init_mode = match s.get(args.init_delay, "init_delay")? {
        Some(d) => InitMode::KnownStrongestPath(d),
        None if s.flag(args.search_init, "search_init")? => InitMode::Search,
        None => match &data.h_true {
            Some(h) => InitMode::KnownStrongestPath(strongest(h)),
            None => InitMode::Search,
        },
    };

    let res = am::recover(&data.a, &data.y, &cfg)?;
    io::write_vector(&dir.join("x_hat.scp1"), &res.x_hat)?;
    io::write_channel(&dir.join("h_hat.csv"), &res.h_hat)?;
    io::write_text(&dir.join("trace.csv"), &io::trace_csv(&res.trace))?;
    let errors = report_errors(&res.x_hat, &res.h_hat.dense(), &data)?;
    print!(
        "status={} iterations={} init_delay={} taps={}",
        res.status.label(),
        res.iterations(),
        res.init_delay,
        res.h_hat.k()
    );
    if let Some((ex, eh)) = errors {
        print!(" rel_err_x={ex:.3e} rel_err_h={eh:.3e}");
    }
    println!(" -> {}", dir.display());
    Ok(())
}

fn recover_block(args: RecoverBlockArgs) -> Result<()> {
    let s = Settings::load(args.common.config.as_deref())?;
    let data = load_input(&s, &args.common, &args.input)?;
    let dir = out_dir(&s, &args.common, "recover-block-out")?;
    let d = BlockConfig::default();
    let cfg = BlockConfig {
        rho: s.or(args.rho, "rho", d.rho)?,
        tol: s.or(args.tol, "tol", d.tol)?,
        max_iters: s.or(args.max_iters, "max_iters", d.max_iters)?,
        max_m: s.or(args.max_m, "max_m", d.max_m)?,
    };
    let sol = solve_block_l1(&BlockOperator::new(&data.a), &data.y, &cfg)?;
    io::write_vector(&dir.join("x_hat.scp1"), &sol.x_hat)?;
    io::write_vector(&dir.join("h_hat.scp1"), &sol.h_hat)?;
    io::write_matrix(&dir.join("u_hat.scp1"), &sol.u_hat)?;
    let errors = report_errors(&sol.x_hat, &sol.h_hat, &data)?;
    io::write_text(
        &dir.join("summary.csv"),
        &io::block_summary_csv(&sol, errors),
    )?;
    print!(
        "status={} iterations={} objective={:.6e} gap={:.3e} spectral_ratio={:.3e}",
        sol.status.label(),
        sol.iterations,
        sol.objective,
        sol.feasibility_gap,
        sol.spectral_ratio
    );
    if let Some((ex, eh)) = errors {
        print!(" rel_err_x={ex:.3e} rel_err_h={eh:.3e}");
    }
    println!(" -> {}", dir.display());
    Ok(())
}

fn fmt_err(e: Option<f64>) -> String {
    e.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn baseline(args: BaselineArgs) -> Result<()> {
    let s = Settings::load(args.common.config.as_deref())?;
    let p = problem(&s, &args.common)?;
    let inst = Instance::generate(p.m, p.n, p.k, p.seed, p.noise_sigma)?;
    let kc = known_channel_baseline(&inst)?;
    let (ks, path) = known_signal_baseline(&inst)?;
    let csv = format!(
        "m,n,k,seed,known_channel_rel_err,known_channel_status,known_signal_rel_err,known_signal_support_exact,known_signal_status\n{},{},{},{},{},{},{},{},{}\n",
        p.m,
        p.n,
        p.k,
        p.seed,
        fmt_err(kc.rel_err),
        kc.status,
        fmt_err(ks.rel_err),
        u8::from(ks.support_exact),
        ks.status
    );
    if let Some(out) = s.get(args.common.out.clone(), "out")? {
        io::write_text(&out, &csv)?;
    }
    if let Some(trace) = s.get(args.path_trace.clone(), "path_trace")? {
        let bps = path.map(|r| r.trace).unwrap_or_default();
        io::write_text(&trace, &io::path_trace_csv(&bps))?;
    }
    print!("{csv}");
    Ok(())
}

fn phase_diagram(args: PhaseArgs) -> Result<()> {
    let s = Settings::load(args.common.config.as_deref())?;
    let full_scale = s.flag(args.full_scale, "full_scale")?;
    let m = s.or(args.common.m, "m", 128)?;
    if m > 128 && !full_scale {
        bail!("m = {m} exceeds the desk-scale limit of 128; pass --full-scale to run it");
    }
    let mut spec = if full_scale && matches!(m, 256 | 512) {
        PhaseGridSpec::full_scale(m)
    } else {
        PhaseGridSpec {
            m,
            ..PhaseGridSpec::desk()
        }
    };
    if let Some(list) = s.get(args.n_values.clone(), "n_values")? {
        spec.n_values = parse_list(&list)?;
    }
    if let Some(list) = s.get(args.k_values.clone(), "k_values")? {
        spec.k_values = parse_list(&list)?;
    }
    spec.trials = s.or(args.trials, "trials", spec.trials)?;
    spec.base_seed = s.or(args.common.seed, "seed", spec.base_seed)?;
    let method: Method = s
        .or(args.method.clone(), "method", "am".to_string())?
        .parse()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let defaults = TrialConfig::default();
    let cfg = TrialConfig {
        search_init: s.flag(args.search_init, "search_init")?,
        success_tol: s.or(args.success_tol, "success_tol", defaults.success_tol)?,
        noise_sigma: s.or(args.common.noise_sigma, "noise_sigma", 0.0)?,
        block: BlockConfig {
            max_m: s.or(args.max_m, "max_m", defaults.block.max_m)?,
            ..defaults.block.clone()
        },
        ..defaults
    };
    if method == Method::BlockL1 && spec.m > cfg.block.max_m {
        bail!(
            "block-l1 is limited to m <= {} (got {}); pass --max-m to raise it",
            cfg.block.max_m,
            spec.m
        );
    }
    let dir = out_dir(&s, &args.common, "phase-diagram")?;
    let diagram = run_phase_diagram(&spec, method, &cfg)?;
    io::write_diagram_bundle(&diagram, &dir)?;
    for &k in &spec.k_values {
        let row: Vec<String> = spec
            .n_values
            .iter()
            .map(|&n| format!("{:.2}", diagram.rate(n, k).unwrap_or(0.0)))
            .collect();
        println!("k={k:<4} {}", row.join(" "));
    }
    println!(
        "{} m={} n={:?} trials={} -> {}",
        method.label(),
        spec.m,
        spec.n_values,
        spec.trials,
        dir.display()
    );
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let diagram = io::parse_diagram_csv(&text, Method::Am)?;
    let out = args.out.unwrap_or_else(|| args.input.with_extension("pgm"));
    io::render_pgm(&diagram, &out)?;
    println!("{} -> {}", args.input.display(), out.display());
    Ok(())
}
