//! File formats.
//!
//! - SCP1 arrays: ASCII magic `SCP1`, little-endian `u32` rank, `rank`
//!   little-endian `u32` dimensions, then the entries as little-endian
//!   `f64` (matrices row-major).
//! - CSV tables with one header row.
//! - Binary PGM (`P5`, 8-bit) for phase diagrams: one pixel per cell,
//!   `k` increasing downward, `n` increasing rightward, value
//!   `⌊255·rate + 0.5⌋`.
//! - Flat `key = value` configuration files (`#` starts a comment).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{CellStats, Method, PhaseDiagram, PhaseGridSpec, TrialRecord};
use crate::am::AmTrace;
use crate::block_l1::BlockSolution;
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::homotopy::Breakpoint;
use crate::numerics::Matrix;

pub const SCP1_MAGIC: &[u8; 4] = b"SCP1";

pub fn encode_scp1(dims: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    let count: usize = dims.iter().product();
    if count != data.len() {
        return Err(Error::DimensionMismatch {
            expected: count,
            got: data.len(),
        });
    }
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 8 * data.len());
    out.extend_from_slice(SCP1_MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d)
            .map_err(|_| Error::InvalidArgument(format!("dimension {d} too large")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_scp1(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let bad = |reason: &str| Error::Format {
        what: "SCP1 array",
        reason: reason.to_string(),
    };
    if bytes.len() < 8 || &bytes[..4] != SCP1_MAGIC {
        return Err(bad("missing SCP1 magic"));
    }
    let word = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| bad("truncated header"))
    };
    let rank = word(4)? as usize;
    let mut dims = Vec::with_capacity(rank);
    for r in 0..rank {
        dims.push(word(8 + 4 * r)? as usize);
    }
    let start = 8 + 4 * rank;
    let count: usize = dims.iter().product();
    let payload = &bytes[start.min(bytes.len())..];
    if payload.len() != 8 * count {
        return Err(bad(&format!(
            "payload holds {} bytes, dims need {}",
            payload.len(),
            8 * count
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((dims, data))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_bytes(path, &encode_scp1(&[v.len()], v)?)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_bytes(path, &encode_scp1(&[m.rows(), m.cols()], m.as_slice())?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let (dims, data) = decode_scp1(&read_bytes(path)?)?;
    if dims.len() != 1 {
        return Err(Error::Format {
            what: "SCP1 vector",
            reason: format!("{}: expected rank 1, got {}", path.display(), dims.len()),
        });
    }
    Ok(data)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let (dims, data) = decode_scp1(&read_bytes(path)?)?;
    if dims.len() != 2 {
        return Err(Error::Format {
            what: "SCP1 matrix",
            reason: format!("{}: expected rank 2, got {}", path.display(), dims.len()),
        });
    }
    Matrix::from_row_major(dims[0], dims[1], data)
}

/// `m,k,index,tap`, one row per tap.
pub fn channel_csv(h: &Channel) -> String {
    let mut s = String::from("m,k,index,tap\n");
    for (&i, &t) in h.support().iter().zip(h.taps()) {
        let _ = writeln!(s, "{},{},{},{}", h.m(), h.k(), i, t);
    }
    s
}

pub fn parse_channel_csv(text: &str) -> Result<Channel> {
    let bad = |reason: String| Error::Format {
        what: "channel CSV",
        reason,
    };
    let mut m = None;
    let mut support = Vec::new();
    let mut taps = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad(format!("line {}: expected 4 fields", ln + 1)));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| bad(format!("line {}: {e}", ln + 1)))
        };
        let row_m = parse_usize(f[0])?;
        if *m.get_or_insert(row_m) != row_m {
            return Err(bad(format!("line {}: inconsistent m", ln + 1)));
        }
        support.push(parse_usize(f[2])?);
        taps.push(
            f[3].parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", ln + 1)))?,
        );
    }
    let m = m.ok_or_else(|| bad("no taps".into()))?;
    Channel::new(m, support, taps)
}

pub fn write_channel(path: &Path, h: &Channel) -> Result<()> {
    write_bytes(path, channel_csv(h).as_bytes())
}

pub fn read_channel(path: &Path) -> Result<Channel> {
    parse_channel_csv(&read_text(path)?)
}

fn join_indices(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// `iter,k_j,tau_j,residual,support` with the support `;`-separated.
pub fn trace_csv(trace: &AmTrace) -> String {
    let mut s = String::from("iter,k_j,tau_j,residual,support\n");
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iter,
            r.k_target,
            r.tau,
            r.residual,
            join_indices(&r.support)
        );
    }
    s
}

/// `breakpoint,tau,event,index,support_size`.
pub fn path_trace_csv(trace: &[Breakpoint]) -> String {
    let mut s = String::from("breakpoint,tau,event,index,support_size\n");
    for b in trace {
        let idx = b.event.column().map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            b.index,
            b.tau,
            b.event.label(),
            idx,
            b.support_size
        );
    }
    s
}

/// One summary row for a block-ℓ1 solve; errors are empty when unknown.
pub fn block_summary_csv(sol: &BlockSolution, rel_err: Option<(f64, f64)>) -> String {
    let (ex, eh) = rel_err
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .unwrap_or_default();
    format!(
        "objective,feasibility_gap,spectral_ratio,rel_err_x,rel_err_h,status,iterations\n{},{},{},{},{},{},{}\n",
        sol.objective,
        sol.feasibility_gap,
        sol.spectral_ratio,
        ex,
        eh,
        sol.status.label(),
        sol.iterations
    )
}

pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut s = String::from("m,n,k,seed,method,success,rel_err_x,rel_err_h,iterations,status\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.m,
            r.n,
            r.k,
            r.seed,
            r.method.label(),
            u8::from(r.success),
            r.rel_err_x,
            r.rel_err_h,
            r.iterations,
            r.status
        );
    }
    s
}

/// `m,n,k,trials,successes,rate,mean_iterations`. Wall time is kept out so
/// that identical runs produce identical bytes.
pub fn diagram_csv(d: &PhaseDiagram) -> String {
    let mut s = String::from("m,n,k,trials,successes,rate,mean_iterations\n");
    for c in &d.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            d.spec.m, c.n, c.k, c.trials, c.successes, c.rate, c.mean_iterations
        );
    }
    s
}

pub fn timing_csv(d: &PhaseDiagram) -> String {
    let mut s = String::from("n,k,mean_wall_secs\n");
    for c in &d.cells {
        let _ = writeln!(s, "{},{},{}", c.n, c.k, c.mean_wall_secs);
    }
    s
}

/// Rebuilds a diagram from [`diagram_csv`] output (without trial records
/// or timings).
pub fn parse_diagram_csv(text: &str, method: Method) -> Result<PhaseDiagram> {
    let bad = |reason: String| Error::Format {
        what: "diagram CSV",
        reason,
    };
    let mut m = 0;
    let mut cells = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("line {}: expected 7 fields", ln + 1)));
        }
        let u = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| bad(format!("line {}: {e}", ln + 1)))
        };
        let r = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", ln + 1)))
        };
        m = u(f[0])?;
        cells.push(CellStats {
            n: u(f[1])?,
            k: u(f[2])?,
            trials: u(f[3])?,
            successes: u(f[4])?,
            rate: r(f[5])?,
            mean_iterations: r(f[6])?,
            mean_wall_secs: 0.0,
        });
    }
    let mut n_values: Vec<usize> = cells.iter().map(|c| c.n).collect();
    n_values.sort_unstable();
    n_values.dedup();
    let mut k_values: Vec<usize> = cells.iter().map(|c| c.k).collect();
    k_values.sort_unstable();
    k_values.dedup();
    if cells.len() != n_values.len() * k_values.len() || cells.is_empty() {
        return Err(bad("grid is incomplete".into()));
    }
    cells.sort_by_key(|c| (c.k, c.n));
    let trials = cells[0].trials;
    Ok(PhaseDiagram {
        spec: PhaseGridSpec {
            m,
            n_values,
            k_values,
            trials,
            base_seed: 0,
        },
        method,
        cells,
        records: Vec::new(),
    })
}

/// `⌊255·rate + 0.5⌋`, i.e. round half up.
pub fn rate_to_pixel(rate: f64) -> u8 {
    (255.0 * rate.clamp(0.0, 1.0) + 0.5).floor() as u8
}

pub fn encode_pgm(d: &PhaseDiagram) -> Result<Vec<u8>> {
    let (w, h) = (d.spec.n_values.len(), d.spec.k_values.len());
    if d.cells.len() != w * h {
        return Err(Error::InvalidArgument(
            "phase diagram grid is incomplete".into(),
        ));
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(d.cells.iter().map(|c| rate_to_pixel(c.rate)));
    Ok(out)
}

/// Parses a binary 8-bit PGM into `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |reason: &str| Error::Format {
        what: "PGM",
        reason: reason.to_string(),
    };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    pos += 1; // single whitespace byte before the raster
    if fields[0] != "P5" {
        return Err(bad("not a P5 file"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() != w * h {
        return Err(bad("raster size does not match header"));
    }
    Ok((w, h, raster.to_vec()))
}

/// Path of the contour sidecar: `diagram.pgm` → `diagram.contour.csv`.
pub fn contour_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("contour.csv")
}

/// `n,k,rate` for the cells on the 95% boundary.
pub fn contour_csv(d: &PhaseDiagram) -> String {
    let mut s = String::from("n,k,rate\n");
    for c in d.contour_cells(0.95) {
        let _ = writeln!(s, "{},{},{}", c.n, c.k, c.rate);
    }
    s
}

/// Writes the PGM image and its contour sidecar.
pub fn render_pgm(d: &PhaseDiagram, path: &Path) -> Result<()> {
    write_bytes(path, &encode_pgm(d)?)?;
    write_bytes(&contour_path(path), contour_csv(d).as_bytes())
}

/// Writes `diagram.csv`, `diagram.pgm` (+ contour), `trials.csv` and
/// `timing.csv` into `dir`.
pub fn write_diagram_bundle(d: &PhaseDiagram, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_bytes(&dir.join("diagram.csv"), diagram_csv(d).as_bytes())?;
    write_bytes(&dir.join("trials.csv"), trials_csv(&d.records).as_bytes())?;
    write_bytes(&dir.join("timing.csv"), timing_csv(d).as_bytes())?;
    render_pgm(d, &dir.join("diagram.pgm"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            what: "config",
            reason: format!("line {}: expected key = value", ln + 1),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diagram(rates: &[f64], w: usize) -> PhaseDiagram {
        let h = rates.len() / w;
        let cells = rates
            .iter()
            .enumerate()
            .map(|(i, &rate)| CellStats {
                n: i % w + 1,
                k: i / w + 1,
                trials: 4,
                successes: (rate * 4.0) as usize,
                rate,
                mean_iterations: 2.0,
                mean_wall_secs: 0.1,
            })
            .collect();
        PhaseDiagram {
            spec: PhaseGridSpec {
                m: 64,
                n_values: (1..=w).collect(),
                k_values: (1..=h).collect(),
                trials: 4,
                base_seed: 0,
            },
            method: Method::Am,
            cells,
            records: vec![],
        }
    }

    #[test]
    fn pixel_rounding() {
        assert_eq!(rate_to_pixel(1.0), 255);
        assert_eq!(rate_to_pixel(0.0), 0);
        assert_eq!(rate_to_pixel(0.5), 128);
    }

    #[test]
    fn pgm_all_white_and_black() {
        let (_, _, px) = decode_pgm(&encode_pgm(&diagram(&[1.0; 6], 3)).unwrap()).unwrap();
        assert!(px.iter().all(|&p| p == 255));
        let (w, h, px) = decode_pgm(&encode_pgm(&diagram(&[0.0; 6], 3)).unwrap()).unwrap();
        assert_eq!((w, h), (3, 2));
        assert!(px.iter().all(|&p| p == 0));
    }

    #[test]
    fn pgm_layout_rows_are_k() {
        let d = diagram(&[0.0, 0.25, 0.5, 0.75, 1.0, 1.0], 3);
        let bytes = encode_pgm(&d).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        let (_, _, px) = decode_pgm(&bytes).unwrap();
        assert_eq!(px, vec![0, 64, 128, 191, 255, 255]);
    }

    #[test]
    fn scp1_header_layout() {
        let bytes = encode_scp1(&[2, 1], &[1.5, -2.0]).unwrap();
        assert_eq!(&bytes[..4], b"SCP1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert!(decode_scp1(b"SCP2\0\0\0\0").is_err());
        assert!(decode_scp1(&bytes[..23]).is_err());
        assert!(encode_scp1(&[3], &[1.0]).is_err());
    }

    #[test]
    fn channel_csv_round_trip() {
        let h = Channel::new(8, vec![1, 5], vec![0.25, -1.5]).unwrap();
        assert_eq!(parse_channel_csv(&channel_csv(&h)).unwrap(), h);
        assert!(parse_channel_csv("m,k,index,tap\n").is_err());
    }

    #[test]
    fn diagram_csv_round_trip() {
        let d = diagram(&[0.0, 0.25, 0.5, 1.0], 2);
        let back = parse_diagram_csv(&diagram_csv(&d), Method::Am).unwrap();
        assert_eq!(back.spec.n_values, d.spec.n_values);
        for (a, b) in back.cells.iter().zip(&d.cells) {
            assert_eq!((a.n, a.k, a.rate), (b.n, b.k, b.rate));
        }
        assert!(parse_diagram_csv("h\n64,1,1,1,1,1,1\n64,2,2,1,1,1,1\n", Method::Am).is_err());
    }

    #[test]
    fn config_parsing() {
        let c = parse_config("# comment\nm = 64\n\nseed=3 # trailing\n").unwrap();
        assert_eq!(c.get("m").unwrap(), "64");
        assert_eq!(c.get("seed").unwrap(), "3");
        assert!(parse_config("novalue\n").is_err());
    }

    proptest! {
        #[test]
        fn scp1_round_trips(data in proptest::collection::vec(-1e300f64..1e300, 1..40)) {
            let bytes = encode_scp1(&[data.len()], &data).unwrap();
            let (dims, back) = decode_scp1(&bytes).unwrap();
            prop_assert_eq!(dims, vec![data.len()]);
            prop_assert_eq!(back, data);
        }

        #[test]
        fn pgm_recovers_quantized_rates(succ in proptest::collection::vec(0usize..=7, 6)) {
            let rates: Vec<f64> = succ.iter().map(|&s| s as f64 / 7.0).collect();
            let (_, _, px) = decode_pgm(&encode_pgm(&diagram(&rates, 3)).unwrap()).unwrap();
            let want: Vec<u8> = rates.iter().map(|&r| rate_to_pixel(r)).collect();
            prop_assert_eq!(&px, &want);
            // 8-bit quantization is fine enough to recover s/7 exactly
            for (p, s) in px.iter().zip(&succ) {
                prop_assert_eq!((*p as f64 / 255.0 * 7.0).round() as usize, *s);
            }
        }
    }
}
