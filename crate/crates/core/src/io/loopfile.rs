//! Loop coefficient files: one line per exponent,
//! `n a11re a11im a12re a12im a21re a21im a22re a22im`. Blank lines and `#` comments are ignored.

use crate::factorization::{iwasawa, FactorizationError, IwasawaConfig, IwasawaResult};
use crate::laurent::{LaurentMatrix, Mat2, C64};
use std::collections::BTreeMap;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopFileError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("file contains no coefficients")]
    Empty,
    #[error(transparent)]
    Factorization(#[from] FactorizationError),
}

pub fn parse_loop(text: &str) -> Result<LaurentMatrix, LoopFileError> {
    let mut coeffs: BTreeMap<i32, (usize, Mat2)> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| LoopFileError::Line { line, message };
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", fields.len())));
        }
        let n: i32 = fields[0].parse().map_err(|_| err(format!("invalid exponent {:?}", fields[0])))?;
        let mut v = [0.0f64; 8];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| err(format!("invalid number {f:?}")))?;
            if !slot.is_finite() {
                return Err(err(format!("non-finite number {f:?}")));
            }
        }
        let m = Mat2::new(C64::new(v[0], v[1]), C64::new(v[2], v[3]), C64::new(v[4], v[5]), C64::new(v[6], v[7]));
        if let Some((first, _)) = coeffs.insert(n, (line, m)) {
            return Err(err(format!("exponent {n} already given on line {first}")));
        }
    }
    let (&lo, _) = coeffs.iter().next().ok_or(LoopFileError::Empty)?;
    let (&hi, _) = coeffs.iter().next_back().ok_or(LoopFileError::Empty)?;
    let dense = (lo..=hi).map(|n| coeffs.get(&n).map_or(Mat2::zeros(), |c| c.1)).collect();
    Ok(LaurentMatrix::new(lo, dense).expect("non-empty coefficient list"))
}

/// Writes every stored coefficient, in increasing exponent order, using the
/// shortest representation that parses back to the same value.
pub fn write_loop(l: &LaurentMatrix) -> String {
    let mut out = String::new();
    for (k, m) in l.coeffs().iter().enumerate() {
        let n = l.lo() + k as i32;
        write!(out, "{n}").unwrap();
        for z in [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]] {
            write!(out, " {:?} {:?}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a loop, checks twisting and splits it.
pub fn factorize_text(text: &str, cfg: &IwasawaConfig) -> Result<IwasawaResult, LoopFileError> {
    let l = parse_loop(text)?;
    let l = l.into_twisted(cfg.twist_tol).map_err(FactorizationError::NotTwisted)?;
    Ok(iwasawa(&l, cfg)?)
}
