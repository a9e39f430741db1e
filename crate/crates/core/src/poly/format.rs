//! Text format: one term per line, `coef * x[3]*rho[2]^2`; a constant term is
//! just `coef`; the zero polynomial is the single line `0`.

use std::fmt::Write;

use super::{Family, IndexedPolynomial, Monomial, Var};
use crate::error::{Error, Result};

pub(super) fn to_text(p: &IndexedPolynomial) -> String {
    if p.is_zero() {
        return "0\n".to_string();
    }
    let mut out = String::new();
    for (m, c) in p.terms() {
        if m.degree() == 0 {
            writeln!(out, "{c}").unwrap();
        } else {
            writeln!(out, "{c} * {m}").unwrap();
        }
    }
    out
}

/// Parses the output of [`IndexedPolynomial::to_text`]. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_polynomial(text: &str) -> Result<IndexedPolynomial> {
    let mut terms = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::PolyParse { line: i + 1, message };
        let (coef, mono) = match line.split_once(" * ") {
            Some((c, m)) => (c, Some(m)),
            None => (line, None),
        };
        let c: f64 = coef.trim().parse().map_err(|_| err(format!("bad coefficient {coef:?}")))?;
        let m = match mono {
            None => Monomial::one(),
            Some(m) => parse_monomial(m).map_err(err)?,
        };
        terms.push((m, c));
    }
    Ok(IndexedPolynomial::from_terms(terms))
}

fn parse_monomial(s: &str) -> std::result::Result<Monomial, String> {
    let mut factors = Vec::new();
    for factor in s.split('*') {
        let factor = factor.trim();
        let (base, exp) = match factor.split_once('^') {
            Some((b, e)) => (b, e.parse::<u32>().map_err(|_| format!("bad exponent in {factor:?}"))?),
            None => (factor, 1),
        };
        let open = base.find('[').ok_or_else(|| format!("missing index in {factor:?}"))?;
        let close = base.strip_suffix(']').ok_or_else(|| format!("missing ']' in {factor:?}"))?;
        let family = match &base[..open] {
            "x" => Family::X,
            "rho" => Family::Rho,
            other => return Err(format!("unknown family {other:?}")),
        };
        let index: u32 = close[open + 1..].parse().map_err(|_| format!("bad index in {factor:?}"))?;
        factors.push((Var { family, index }, exp));
    }
    Ok(Monomial::from_factors(factors))
}
