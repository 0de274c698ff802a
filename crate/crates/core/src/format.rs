//! Plain-text tables for forms and G2 structures.
//!
//! ```text
//! # comments and blank lines are ignored
//! kform 7 3
//! 0 1 2 1
//! 0 3 4 1
//! 1 4 6 -1
//! ```
//!
//! The header is `kform <dim> <degree>` (or `g2point 7 3` for a structure,
//! whose body is its 3-form). Each body line is a strictly increasing list of
//! `degree` zero-based indices followed by the coefficient. Missing
//! multi-indices are zero; a repeated multi-index is an error. Coefficients
//! are written in the shortest form that parses back to the same `f64`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::error::GeometryError;
use crate::exterior::{binomial, index_of, KForm};
use crate::g2::G2Point;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("expected a {expected} table, found {found}")]
    WrongKind {
        expected: &'static str,
        found: String,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn write_table(kind: &str, form: &KForm) -> String {
    let mut out = format!("{kind} {} {}\n", form.dim(), form.degree());
    for (idx, c) in form.terms() {
        if c == 0.0 {
            continue;
        }
        for i in idx {
            write!(out, "{i} ").expect("string write");
        }
        writeln!(out, "{c:?}").expect("string write");
    }
    out
}

pub fn kform_to_text(form: &KForm) -> String {
    write_table("kform", form)
}

pub fn g2point_to_text(point: &G2Point) -> String {
    write_table("g2point", point.rho())
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_table(text: &str) -> Result<(String, KForm), FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(FormatError::MissingHeader)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(syntax(hline, "header must be `<kind> <dim> <degree>`"));
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| syntax(hline, format!("bad integer `{s}`")))
    };
    let (dim, degree) = (parse_usize(fields[1])?, parse_usize(fields[2])?);
    let mut form = KForm::zero(dim, degree)?;
    let mut seen = vec![false; binomial(dim, degree)];
    for (n, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != degree + 1 {
            return Err(syntax(
                n,
                format!("expected {} indices and a coefficient", degree),
            ));
        }
        let mut mask = 0u16;
        let mut last: Option<usize> = None;
        for t in &tokens[..degree] {
            let i: usize = t
                .parse()
                .map_err(|_| syntax(n, format!("bad index `{t}`")))?;
            if i >= dim {
                return Err(syntax(
                    n,
                    format!("index {i} out of range for dimension {dim}"),
                ));
            }
            if last.is_some_and(|l| i <= l) {
                return Err(syntax(n, "indices must be strictly increasing"));
            }
            last = Some(i);
            mask |= 1 << i;
        }
        let c: f64 = tokens[degree]
            .parse()
            .map_err(|_| syntax(n, format!("bad coefficient `{}`", tokens[degree])))?;
        if !c.is_finite() {
            return Err(syntax(n, "coefficient is not finite"));
        }
        let k = index_of(dim, mask);
        if seen[k] {
            return Err(syntax(n, "repeated multi-index"));
        }
        seen[k] = true;
        form.coeffs_mut()[k] = c;
    }
    Ok((fields[0].to_string(), form))
}

pub fn kform_from_text(text: &str) -> Result<KForm, FormatError> {
    let (kind, form) = parse_table(text)?;
    if kind != "kform" {
        return Err(FormatError::WrongKind {
            expected: "kform",
            found: kind,
        });
    }
    Ok(form)
}

pub fn g2point_from_text(text: &str) -> Result<G2Point, FormatError> {
    let (kind, form) = parse_table(text)?;
    if kind != "g2point" {
        return Err(FormatError::WrongKind {
            expected: "g2point",
            found: kind,
        });
    }
    Ok(G2Point::new(form)?)
}
