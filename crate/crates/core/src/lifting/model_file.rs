//! Line-oriented text format for [`KoopmanModel`].
//!
//! ```text
//! p=10
//! n_modes=8
//! svd_cutoff=1.0000000000000000e-10
//! K:
//! <p rows of p values>
//! eigvals:
//! <p rows of "re im">
//! V:
//! <p rows of p "re im" pairs>
//! E:
//! <one row of p values>
//! selected:
//! <one row of ascending mode indices>
//! ```
//!
//! Numbers are written with 17 significant digits so a reload is exact.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;

use super::{KoopmanModel, C64, P};
use crate::error::{Error, Result};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_model<W: Write>(model: &KoopmanModel, mut w: W) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "p={P}");
    let _ = writeln!(s, "n_modes={}", model.n_modes);
    let _ = writeln!(s, "svd_cutoff={}", num(model.svd_cutoff));
    s.push_str("K:\n");
    for row in model.k_matrix.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s.push_str("eigvals:\n");
    for l in &model.eigenvalues {
        let _ = writeln!(s, "{} {}", num(l.re), num(l.im));
    }
    s.push_str("V:\n");
    for row in model.right_eigvecs.row_iter() {
        let line: Vec<String> = row
            .iter()
            .map(|z| format!("{} {}", num(z.re), num(z.im)))
            .collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s.push_str("E:\n");
    let line: Vec<String> = model.energies.iter().map(|&v| num(v)).collect();
    s.push_str(&line.join(" "));
    s.push('\n');
    s.push_str("selected:\n");
    let line: Vec<String> = model
        .dominant_indices
        .iter()
        .map(|j| j.to_string())
        .collect();
    s.push_str(&line.join(" "));
    s.push('\n');
    w.write_all(s.as_bytes())?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line: usize,
}

impl<R: Read> Lines<R> {
    fn next(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                Some(l) => {
                    let l = l?;
                    let t = l.trim();
                    if !t.is_empty() {
                        return Ok(t.to_string());
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::ModelFormat {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn header(&mut self, key: &str) -> Result<String> {
        let l = self.next()?;
        match l.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(v.trim().to_string()),
            _ => Err(self.err(format!("expected `{key}=`, found `{l}`"))),
        }
    }

    fn label(&mut self, label: &str) -> Result<()> {
        let l = self.next()?;
        if l == label {
            Ok(())
        } else {
            Err(self.err(format!("expected `{label}`, found `{l}`")))
        }
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let l = self.next()?;
        let vals = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| self.err(e.to_string()))?;
        if vals.len() != count {
            return Err(self.err(format!("expected {count} numbers, found {}", vals.len())));
        }
        Ok(vals)
    }
}

pub fn read_model<R: Read>(r: R) -> Result<KoopmanModel> {
    let mut lines = Lines {
        inner: BufReader::new(r).lines(),
        line: 0,
    };
    let p: usize = lines.header("p")?.parse().map_err(|_| lines.err("bad p"))?;
    if p != P {
        return Err(lines.err(format!("unsupported observable count {p}, expected {P}")));
    }
    let n_modes: usize = lines
        .header("n_modes")?
        .parse()
        .map_err(|_| lines.err("bad n_modes"))?;
    let svd_cutoff: f64 = lines
        .header("svd_cutoff")?
        .parse()
        .map_err(|_| lines.err("bad svd_cutoff"))?;

    lines.label("K:")?;
    let mut k = DMatrix::<f64>::zeros(P, P);
    for i in 0..P {
        for (j, v) in lines.floats(P)?.into_iter().enumerate() {
            k[(i, j)] = v;
        }
    }
    lines.label("eigvals:")?;
    let mut eigenvalues = Vec::with_capacity(P);
    for _ in 0..P {
        let v = lines.floats(2)?;
        eigenvalues.push(C64::new(v[0], v[1]));
    }
    lines.label("V:")?;
    let mut vecs = DMatrix::<C64>::zeros(P, P);
    for i in 0..P {
        let v = lines.floats(2 * P)?;
        for j in 0..P {
            vecs[(i, j)] = C64::new(v[2 * j], v[2 * j + 1]);
        }
    }
    lines.label("E:")?;
    let energies = lines.floats(P)?;
    lines.label("selected:")?;
    let sel_line = lines.next()?;
    let selected = sel_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| lines.err(e.to_string()))?;
    KoopmanModel::with_selection(
        k,
        eigenvalues,
        vecs,
        energies,
        n_modes,
        selected,
        svd_cutoff,
    )
}
