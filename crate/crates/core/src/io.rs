//! Artifact files. Every file carries the scenario hash: CSV files as a
//! leading `# scenario_hash: <hex>` comment, JSON files as a field and
//! snapshots as the short hash in their header.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_decay_rate, SweepRow};
use crate::diagnostics::{dissipation_check, equivalence_range, DiagnosticsConfig, LyapunovConfig};
use crate::error::{Error, Result};
use crate::model::PhysicalParams;
use crate::solver::{GridSpec, RunStatus, SimState, Trajectory};
use crate::spectral::Complex64;

pub const CSV_COLUMNS: [&str; 15] = [
    "t",
    "E",
    "L",
    "I1",
    "I2",
    "I3",
    "I4",
    "B1",
    "B2",
    "normsq_u_t",
    "normsq_phi_t",
    "normsq_z1",
    "normsq_z",
    "hnorm_sq",
    "w_residual",
];

pub const SNAPSHOT_HEADER_LEN: usize = 64;

const HASH_PREFIX: &str = "# scenario_hash: ";

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

pub fn trajectory_csv(traj: &Trajectory, hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HASH_PREFIX}{hash}");
    let _ = writeln!(out, "{}", CSV_COLUMNS.join(","));
    for s in &traj.samples {
        let c = &s.components;
        let b = if s.lyapunov.is_some() { (c.b1, c.b2) } else { (f64::NAN, f64::NAN) };
        let row = [
            s.t,
            s.energy.total,
            s.lyapunov.unwrap_or(f64::NAN),
            c.i1,
            c.i2,
            c.i3,
            c.i4,
            b.0,
            b.1,
            s.normsq_u_t,
            s.normsq_phi_t,
            s.normsq_z1,
            s.normsq_z,
            s.hnorm_sq,
            c.w_residual,
        ];
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a numeric CSV written by this module, checking its hash.
pub fn read_csv(path: &Path, expected_hash: &str) -> Result<CsvTable> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, expected_hash)
}

pub fn parse_csv(text: &str, expected_hash: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let found = lines
        .next()
        .and_then(|l| l.strip_prefix(HASH_PREFIX))
        .ok_or_else(|| Error::Scenario("CSV lacks a scenario hash line".into()))?
        .trim();
    if found != expected_hash {
        return Err(Error::HashMismatch {
            expected: expected_hash.to_string(),
            found: found.to_string(),
        });
    }
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Scenario("CSV lacks a header row".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Scenario(format!("bad CSV cell {c:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(CsvTable { header, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "Efinal")]
    pub e_final: f64,
    pub gamma_fit: Option<f64>,
    pub r2: Option<f64>,
    #[serde(rename = "CE")]
    pub c_e: f64,
    pub worst_dissipation_margin: Option<f64>,
    pub gamma1_emp: Option<f64>,
    pub gamma2_emp: Option<f64>,
    pub w_boundary_residual_max: f64,
    pub scenario_hash: String,
    pub complete: bool,
    pub status: String,
    pub warnings: Vec<String>,
}

pub fn summarize(
    traj: &Trajectory,
    p: &PhysicalParams,
    cfg: &DiagnosticsConfig,
    lcfg: Option<&LyapunovConfig>,
    hash: &str,
) -> RunSummary {
    let s = &traj.samples;
    let e0 = s.first().map_or(0.0, |x| x.energy.total);
    let series: Vec<(f64, f64)> = s.iter().map(|x| (x.t, x.energy.total)).collect();
    let mut warnings = traj.meta.warnings.clone();
    let fit = match fit_decay_rate(&series, None) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("decay fit unavailable: {e}"));
            None
        }
    };
    let diss = dissipation_check(traj, p, cfg).ok();
    let eq = lcfg.and_then(|l| equivalence_range(traj, l));
    let status = match traj.meta.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::BlowUp { t } => format!("blow_up at t = {t}"),
        RunStatus::Interrupted { t } => format!("interrupted at t = {t}"),
    };
    RunSummary {
        e0,
        e_final: s.last().map_or(0.0, |x| x.energy.total),
        gamma_fit: fit.map(|f| f.gamma),
        r2: fit.map(|f| f.r2),
        c_e: p.c_e(),
        worst_dissipation_margin: diss.map(|d| d.worst_margin),
        gamma1_emp: eq.map(|r| r.0),
        gamma2_emp: eq.map(|r| r.1),
        w_boundary_residual_max: s.iter().map(|x| x.components.w_residual).fold(0.0, f64::max),
        scenario_hash: hash.to_string(),
        complete: traj.is_complete(),
        status,
        warnings,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &(text + "\n"))
}

/// Reads a JSON artifact and checks its `scenario_hash` field.
pub fn read_json_checked(path: &Path, expected_hash: &str) -> Result<serde_json::Value> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let found = v.get("scenario_hash").and_then(|h| h.as_str()).unwrap_or("");
    if found != expected_hash {
        return Err(Error::HashMismatch {
            expected: expected_hash.to_string(),
            found: found.to_string(),
        });
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotHeader {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    t: f64,
    s: String,
}

/// 64-byte space-padded JSON header, then the flat state `[u|v|φ|ψ|z]` as
/// little-endian f64 (z row-major, N×M).
pub fn write_snapshot<W: Write>(mut w: W, state: &SimState, short_hash: &str) -> Result<()> {
    let header = serde_json::to_string(&SnapshotHeader {
        n: state.n(),
        m: state.m(),
        t: state.t,
        s: short_hash.to_string(),
    })?;
    if header.len() > SNAPSHOT_HEADER_LEN {
        return Err(Error::Scenario(format!("snapshot header too long: {header}")));
    }
    let mut buf = header.into_bytes();
    buf.resize(SNAPSHOT_HEADER_LEN, b' ');
    w.write_all(&buf)?;
    for x in state.as_slice() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_snapshot_file(path: &Path, state: &SimState, short_hash: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let f = BufWriter::new(fs::File::create(path)?);
    write_snapshot(f, state, short_hash)
}

pub fn read_snapshot<R: Read>(mut r: R, expected_short_hash: &str) -> Result<SimState> {
    let mut head = [0u8; SNAPSHOT_HEADER_LEN];
    r.read_exact(&mut head)?;
    let text = std::str::from_utf8(&head).map_err(|e| Error::Scenario(format!("snapshot header: {e}")))?;
    let h: SnapshotHeader = serde_json::from_str(text.trim_end())?;
    if h.s != expected_short_hash {
        return Err(Error::HashMismatch {
            expected: expected_short_hash.to_string(),
            found: h.s,
        });
    }
    let g = GridSpec::new(h.n, h.m)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * g.state_len() {
        return Err(Error::Scenario(format!(
            "snapshot body has {} bytes, expected {}",
            bytes.len(),
            8 * g.state_len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    SimState::from_parts(&g, h.t, data)
}

pub fn eigenvalues_csv(eigs: &[Complex64], hash: &str) -> String {
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let mut out = format!("{HASH_PREFIX}{hash}\nre,im\n");
    for z in sorted {
        let _ = writeln!(out, "{},{}", num(z.re), num(z.im));
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow], axis: &str, hash: &str) -> String {
    let mut out = format!("{HASH_PREFIX}{hash}\n{axis},gamma_fit,r2,abscissa,CE,equal_speed,degenerate,skipped,violations\n");
    let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), num);
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            num(r.value),
            opt(r.gamma_fit),
            opt(r.r2),
            opt(r.abscissa),
            num(r.c_e),
            r.equal_speed,
            r.degenerate,
            r.skipped,
            r.violations.join(";")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let g = GridSpec::new(5, 3).unwrap();
        let data: Vec<f64> = (0..g.state_len()).map(|k| k as f64 * 0.25 - 1.0).collect();
        let s = SimState::from_parts(&g, 1.5, data).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &s, "deadbeef").unwrap();
        assert_eq!(buf.len(), 64 + 8 * g.state_len());
        assert_eq!(&buf[..1], b"{");
        let back = read_snapshot(buf.as_slice(), "deadbeef").unwrap();
        assert_eq!(back, s);
        assert!(matches!(
            read_snapshot(buf.as_slice(), "00000000"),
            Err(Error::HashMismatch { .. })
        ));
    }

    #[test]
    fn csv_hash_checked() {
        let text = "# scenario_hash: abc\nt,E\n0e0,1e0\n1e0,5e-1\n";
        let t = parse_csv(text, "abc").unwrap();
        assert_eq!(t.rows, vec![vec![0.0, 1.0], vec![1.0, 0.5]]);
        assert!(matches!(parse_csv(text, "abd"), Err(Error::HashMismatch { .. })));
    }
}
