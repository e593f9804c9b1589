use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::SimTrace;

/// Writes `t,x_1..x_n,u_1..u_m,p_1..p_n` rows in `{:.16e}` format.
pub fn write_trace_csv_to<W: Write>(trace: &SimTrace, mut out: W) -> std::io::Result<()> {
    let n = trace.x.first().map_or(0, Vec::len);
    let m = trace.u.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.extend((1..=n).map(|i| format!("p_{i}")));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..trace.times.len() {
        write!(out, "{:.16e}", trace.times[i])?;
        for v in trace.x[i].iter().chain(&trace.u[i]).chain(&trace.p[i]) {
            write!(out, ",{v:.16e}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_trace_csv(trace: &SimTrace, path: &Path) -> std::io::Result<()> {
    write_trace_csv_to(trace, BufWriter::new(File::create(path)?))
}
