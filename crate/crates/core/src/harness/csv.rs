//! Trace CSV: one header row, then one row per outer iteration. Floats are
//! written in `{:e}` form, which round-trips exactly.

use std::io::{self, BufRead, Write};

use crate::algorithm::TraceRow;
use crate::error::{Error, Result};

pub const HEADER: &str = "k,grad_steps,exact_solves,comm_rounds,gap,delta_k,zeta1,zeta2,zeta3,zeta4,lmi_violation";

pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.k,
            r.grad_steps,
            r.exact_solves,
            r.comm_rounds,
            r.gap,
            r.delta_k,
            r.zeta[0],
            r.zeta[1],
            r.zeta[2],
            r.zeta[3],
            r.lmi_violation
        )?;
    }
    w.flush()
}

pub fn trace_to_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, rows).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

/// Parses a trace CSV back into rows. Tracking errors are not part of the
/// file and come back as zero.
pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRow>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty trace csv".into()))??;
    if header.trim_end() != HEADER {
        return Err(Error::Config(format!("unexpected trace header '{header}'")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(Error::Config(format!("row {}: expected 11 fields, got {}", lineno + 2, f.len())));
        }
        let int = |j: usize| {
            f[j].parse::<usize>().map_err(|_| Error::Config(format!("row {}: bad integer '{}'", lineno + 2, f[j])))
        };
        let real =
            |j: usize| f[j].parse::<f64>().map_err(|_| Error::Config(format!("row {}: bad number '{}'", lineno + 2, f[j])));
        rows.push(TraceRow {
            k: int(0)?,
            grad_steps: int(1)?,
            exact_solves: int(2)?,
            comm_rounds: int(3)?,
            gap: real(4)?,
            delta_k: real(5)?,
            zeta: [real(6)?, real(7)?, real(8)?, real(9)?],
            lmi_violation: real(10)?,
            tracking_error: 0.0,
            lambda_bar_error: 0.0,
        });
    }
    Ok(rows)
}
