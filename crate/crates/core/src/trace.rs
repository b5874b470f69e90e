//! MCMC trace records and their CSV serialization.

use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "iter,K_n,Kbar_n,sigma0,kappa,tau,alpha,log_joint,s_min";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub k_n: u64,
    pub kbar_n: u64,
    pub sigma0: f64,
    pub kappa: f64,
    pub tau: f64,
    pub alpha: f64,
    pub log_joint: f64,
    pub s_min: f64,
}

fn fmt(x: f64) -> String {
    // 17 significant digits: round-trips every f64 exactly
    format!("{x:.16e}")
}

pub fn write_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.k_n,
            r.kbar_n,
            fmt(r.sigma0),
            fmt(r.kappa),
            fmt(r.tau),
            fmt(r.alpha),
            fmt(r.log_joint),
            fmt(r.s_min)
        )?;
    }
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == TRACE_HEADER => {}
        other => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                reason: format!("bad trace header: {other:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let lineno = lineno + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                reason: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let perr = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            reason,
        };
        let int = |s: &str| s.parse::<u64>().map_err(|e| perr(format!("{s:?}: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("{s:?}: {e}")));
        out.push(TraceRecord {
            iter: int(fields[0])?,
            k_n: int(fields[1])?,
            kbar_n: int(fields[2])?,
            sigma0: real(fields[3])?,
            kappa: real(fields[4])?,
            tau: real(fields[5])?,
            alpha: real(fields[6])?,
            log_joint: real(fields[7])?,
            s_min: real(fields[8])?,
        });
    }
    Ok(out)
}
