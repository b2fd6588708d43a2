//! Plain-text CSV formats.
//!
//! Users and files are written 1-based (`U1..UN`, `F1..FM`); node 0 is the
//! base station. Reals use Rust's shortest round-trip formatting, so a
//! written delay table reads back bit-exactly.

use std::io::{BufRead, Write};

use crate::dynamic::CycleRecord;
use crate::greedy::PlanTrace;
use crate::model::{CachingState, DelayMatrix, SourceTable, Topology};
use crate::{Error, Result};

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidInput(format!("i/o: {e}"))
}

/// Provenance stored in the delay-table header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DelayTableHeader {
    pub n_users: usize,
    pub seed: u64,
    pub n_samples: usize,
}

const DELAY_HEADER: &str = "n_users,seed,n_samples";

pub fn write_delay_table<W: Write>(mut w: W, t: &DelayMatrix, header: DelayTableHeader) -> Result<()> {
    writeln!(w, "{DELAY_HEADER}").map_err(io_err)?;
    writeln!(w, "{},{},{}", header.n_users, header.seed, header.n_samples).map_err(io_err)?;
    for row in t.as_array().rows() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err)?;
    }
    Ok(())
}

fn data_lines<R: BufRead>(r: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(io_err)?;
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            out.push(trimmed.to_string());
        }
    }
    Ok(out)
}

fn parse_row<T: std::str::FromStr>(line: &str, lineno: usize) -> Result<Vec<T>> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("line {lineno}: cannot parse `{f}`")))
        })
        .collect()
}

pub fn read_delay_table<R: BufRead>(r: R) -> Result<(DelayMatrix, DelayTableHeader)> {
    let lines = data_lines(r)?;
    if lines.len() < 2 || lines[0] != DELAY_HEADER {
        return Err(Error::InvalidInput(format!(
            "delay table must start with `{DELAY_HEADER}` and a value line"
        )));
    }
    let meta: Vec<u64> = parse_row(&lines[1], 2)?;
    let [n, seed, n_samples] = meta[..] else {
        return Err(Error::InvalidInput("delay table header needs three values".into()));
    };
    let header = DelayTableHeader {
        n_users: n as usize,
        seed,
        n_samples: n_samples as usize,
    };
    let rows = lines[2..]
        .iter()
        .enumerate()
        .map(|(k, l)| parse_row::<f64>(l, k + 3))
        .collect::<Result<Vec<_>>>()?;
    if rows.len() != header.n_users || rows.iter().any(|r| r.len() != header.n_users) {
        return Err(Error::DimensionMismatch(format!(
            "delay table header declares {} users",
            header.n_users
        )));
    }
    Ok((DelayMatrix::from_rows(&rows)?, header))
}

/// One row of 0/1 flags per user.
pub fn write_caching_state<W: Write>(mut w: W, phi: &CachingState) -> Result<()> {
    for row in phi.as_array().rows() {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_caching_state<R: BufRead>(r: R, capacity: usize) -> Result<CachingState> {
    let rows = data_lines(r)?
        .iter()
        .enumerate()
        .map(|(k, l)| parse_row::<u8>(l, k + 1))
        .collect::<Result<Vec<_>>>()?;
    CachingState::from_rows(&rows, capacity)
}

/// Best source of every request, as node ids.
pub fn write_source_table<W: Write>(mut w: W, tables: &SourceTable) -> Result<()> {
    for row in tables.s.rows() {
        let line: Vec<String> = row.iter().map(|s| s.0.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_trace<W: Write>(mut w: W, trace: &PlanTrace) -> Result<()> {
    writeln!(w, "iteration,user,file,gain,eta").map_err(io_err)?;
    writeln!(w, "0,0,0,0,{}", trace.eta_initial).map_err(io_err)?;
    for s in &trace.steps {
        writeln!(w, "{},{},{},{},{}", s.iteration, s.user + 1, s.file + 1, s.gain, s.eta)
            .map_err(io_err)?;
    }
    Ok(())
}

pub fn write_cycle_records<W: Write>(mut w: W, records: &[CycleRecord]) -> Result<()> {
    writeln!(w, "kappa,user,replacements,eta").map_err(io_err)?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.kappa, r.user + 1, r.replacements, r.eta).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_topology<W: Write>(mut w: W, topo: &Topology) -> Result<()> {
    writeln!(w, "node,x,y,dist_bs").map_err(io_err)?;
    writeln!(w, "0,{},{},0", topo.bs_position[0], topo.bs_position[1]).map_err(io_err)?;
    for (k, p) in topo.user_positions.iter().enumerate() {
        writeln!(w, "{},{},{},{}", k + 1, p[0], p[1], topo.dist_user_bs[k]).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_scores<W: Write>(mut w: W, scores: &[(u128, f64)]) -> Result<()> {
    writeln!(w, "combination,eta").map_err(io_err)?;
    for (idx, eta) in scores {
        writeln!(w, "{idx},{eta}").map_err(io_err)?;
    }
    Ok(())
}
