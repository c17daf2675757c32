//! Arc export and import.
//!
//! Columns are `t, j` followed by one column per state component. A jump
//! shows up as two rows at the same `t`: `(t, j, x_pre)` then
//! `(t, j + 1, x_post)`. Numbers carry 17 significant digits, enough to
//! read every double back unchanged.

use std::io::{Read, Write};

use hyseek_core::hybrid::FlowPiece;
use hyseek_core::HybridArc;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_arc<W: Write>(out: W, labels: &[String], arc: &HybridArc) -> csv::Result<()> {
    assert_eq!(labels.len(), arc.dim());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "j"].into_iter().chain(labels.iter().map(String::as_str)))?;
    let mut row = Vec::with_capacity(arc.dim() + 2);
    for (t, j, x) in arc.samples() {
        row.clear();
        row.push(fmt(t));
        row.push(j.to_string());
        row.extend(x.iter().map(|&v| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Bad { row: usize, msg: String },
    #[error(transparent)]
    Arc(#[from] hyseek_core::HybridError),
}

/// Reads an arc written by [`write_arc`]; returns the state labels too.
pub fn read_arc<R: Read>(input: R) -> Result<(Vec<String>, HybridArc), ReadError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "t" || &header[1] != "j" {
        return Err(ReadError::Bad {
            row: 0,
            msg: "header must start with t, j and name at least one state".into(),
        });
    }
    let labels: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let n = labels.len();
    let mut pieces: Vec<FlowPiece> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |msg: String| ReadError::Bad { row: k + 1, msg };
        let t: f64 = rec[0].parse().map_err(|_| bad(format!("bad time `{}`", &rec[0])))?;
        let j: usize = rec[1].parse().map_err(|_| bad(format!("bad jump index `{}`", &rec[1])))?;
        if pieces.last().is_none_or(|p| p.j != j) {
            pieces.push(FlowPiece {
                j,
                times: Vec::new(),
                states: Vec::new(),
            });
        }
        let p = pieces.last_mut().unwrap();
        p.times.push(t);
        for field in rec.iter().skip(2) {
            p.states
                .push(field.parse().map_err(|_| bad(format!("bad value `{field}`")))?);
        }
        if p.states.len() != p.times.len() * n {
            return Err(bad("wrong number of fields".into()));
        }
    }
    Ok((labels, HybridArc::from_pieces(n, pieces)?))
}
