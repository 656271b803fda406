//! Per-round trace CSV: `round,mode,x_a,x_b,rss_ma,rss_mb,injected`.
//!
//! RSS values are written in dBm with four decimals, erasures as `-inf`,
//! and `injected` as `0` or `1`. Rounds must run 0, 1, 2, ... in order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::session::MeasurementTrace;

pub const TRACE_COLUMNS: [&str; 7] = ["round", "mode", "x_a", "x_b", "rss_ma", "rss_mb", "injected"];

fn fmt_rss(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.4}")
    }
}

pub fn write_trace<W: Write>(trace: &MeasurementTrace, out: W) -> Result<()> {
    trace.check()?;
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Contract(format!("trace write failed: {e}"));
    w.write_record(TRACE_COLUMNS).map_err(wrap)?;
    for i in 0..trace.len() {
        w.write_record([
            i.to_string(),
            trace.modes[i].to_string(),
            fmt_rss(trace.x_a[i]),
            fmt_rss(trace.x_b[i]),
            fmt_rss(trace.rss_ma[i]),
            fmt_rss(trace.rss_mb[i]),
            (trace.injected[i] as u8).to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Contract(format!("trace write failed: {e}")))?;
    Ok(())
}

pub fn save_trace(trace: &MeasurementTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(trace, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Contract(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

/// Parses a trace. `source` only labels error messages.
pub fn read_trace<R: Read>(input: R, source: &Path) -> Result<MeasurementTrace> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let mut columns = [0usize; 7];
    for (slot, name) in columns.iter_mut().zip(TRACE_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))?;
    }
    if header.len() != TRACE_COLUMNS.len() {
        return Err(parse_err(
            1,
            format!("expected {} columns, header has {}", TRACE_COLUMNS.len(), header.len()),
        ));
    }

    let mut trace = MeasurementTrace::default();
    for (row, record) in rdr.records().enumerate() {
        // line 1 is the header
        let line = row + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        let cell = |c: usize| record.get(columns[c]).unwrap_or("");
        let round: usize = cell(0)
            .parse()
            .map_err(|_| parse_err(line, format!("round `{}` is not a non-negative integer", cell(0))))?;
        if round != row {
            return Err(parse_err(line, format!("expected round {row}, found {round}")));
        }
        let mode: u32 = cell(1)
            .parse()
            .map_err(|_| parse_err(line, format!("mode `{}` is not a non-negative integer", cell(1))))?;
        let mut rss = [0.0; 4];
        for (k, slot) in rss.iter_mut().enumerate() {
            let name = TRACE_COLUMNS[k + 2];
            let v: f64 = cell(k + 2)
                .parse()
                .map_err(|_| parse_err(line, format!("{name} `{}` is not numeric", cell(k + 2))))?;
            // -inf marks an erasure; anything else non-finite is corrupt
            if v.is_nan() || v == f64::INFINITY {
                return Err(parse_err(line, format!("{name} `{}` is not finite", cell(k + 2))));
            }
            *slot = v;
        }
        let injected = match cell(6) {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line, format!("injected `{other}` must be 0 or 1"))),
        };
        trace.modes.push(mode);
        trace.x_a.push(rss[0]);
        trace.x_b.push(rss[1]);
        trace.rss_ma.push(rss[2]);
        trace.rss_mb.push(rss[3]);
        trace.injected.push(injected);
    }
    Ok(trace)
}

pub fn ingest_trace(path: &Path) -> Result<MeasurementTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(std::io::BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn parse(text: &str) -> Result<MeasurementTrace> {
        read_trace(text.as_bytes(), &PathBuf::from("t.csv"))
    }

    const TOY: &str = "round,mode,x_a,x_b,rss_ma,rss_mb,injected
0,3,-60.1,-60.2,-70.0,-71.0,0
1,7,-55.0,-55.5,-66.0,-64.0,1
2,1,-58.0,-57.9,-72.5,-70.1,0
3,0,-62.4,-62.0,-69.0,-69.9,0
4,9,-50.0,-50.1,-61.0,-62.0,0
";

    #[test]
    fn toy_trace() {
        let t = parse(TOY).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.modes[1], 7);
        assert!(t.injected[1] && !t.injected[0]);
        assert_eq!(t.rss_mb[2], -70.1);
    }

    #[test]
    fn missing_column_is_named() {
        let text = TOY.replace("rss_mb", "rss_xx");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("rss_mb"), "{err}");
    }

    #[test]
    fn bad_cell_reports_row() {
        let text = TOY.replace("-58.0", "abc");
        let err = parse(&text).unwrap_err();
        match err {
            Error::Parse { line, ref msg, .. } => {
                assert_eq!(line, 4);
                assert!(msg.contains("x_a"), "{msg}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_nan_and_gaps() {
        assert!(parse(&TOY.replace("-60.1", "NaN")).is_err());
        assert!(parse(&TOY.replace("\n2,1", "\n5,1")).is_err());
        assert!(parse(&TOY.replace(",1\n", ",2\n")).is_err());
    }

    #[test]
    fn erasure_round_trips() {
        let mut t = parse(TOY).unwrap();
        t.x_a[0] = f64::NEG_INFINITY;
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
