//! Mechanical derivation of the chain's binding drift.
//!
//! Starting from `ζ₁ = ρ_{k*−1}`, each level is `ζ_{l+1} = L ζ_l + ζ_l` where
//! `L` is the Lie derivative along the noise-free, binding-free joint field in
//! the variables `(x, ρ)` (with `y = x + ρ` eliminated). The forcing is then
//! fixed by the closing identity `ζ̇_{k*} = −ζ_{k*}`; this works because
//! `∂ζ_{k*}/∂ρ₀ = 1` and `ρ₀` is the only coordinate the noise reaches.

use std::fmt::Write;

use log::warn;

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::poly::{parse_polynomial, CompiledPolynomial, IndexedPolynomial, PolyVectorField, Var};

/// Smallest `k > 0` with `k² − a² ≥ 3`.
pub fn k_star(a_squared: f64) -> usize {
    let mut k = 1usize;
    while ((k * k) as f64) - a_squared < 3.0 {
        k += 1;
    }
    k
}

/// Joint drift of `(x, ρ)` for the truncated chain without noise or binding.
///
/// `ẋ_k = (a² − k²)x_k + x_{k−1} + x_{k+1} − x_k³` and
/// `ρ̇_k = (a² − k²)ρ_k + ρ_{k−1} + ρ_{k+1} − (3x_k²ρ_k + 3x_kρ_k² + ρ_k³)`,
/// with `x_{−1} = x_M = 0` and likewise for `ρ`.
pub fn chain_field(a_squared: f64, truncation: usize) -> Result<PolyVectorField> {
    let m = truncation as u32;
    let mut rows = Vec::with_capacity(2 * truncation);
    for k in 0..m {
        let lin = a_squared - (k * k) as f64;
        let (x, r) = (IndexedPolynomial::x(k), IndexedPolynomial::rho(k));
        let mut xr = x.scale(lin) - x.pow(3);
        let mut rr = r.scale(lin) - (&x.pow(2) * &r).scale(3.0) - (&x * &r.pow(2)).scale(3.0) - r.pow(3);
        for j in [k.checked_sub(1), Some(k + 1).filter(|&j| j < m)].into_iter().flatten() {
            xr = xr + IndexedPolynomial::x(j);
            rr = rr + IndexedPolynomial::rho(j);
        }
        rows.push((Var::x(k), xr));
        rows.push((Var::rho(k), rr));
    }
    PolyVectorField::new(rows, m)
}

/// Builds the cascade for a chain model.
pub fn build_zeta_cascade(model: &ModelSpec) -> Result<ZetaCascade> {
    ZetaCascade::for_model(model)
}

#[derive(Debug, Clone)]
pub struct ZetaCascade {
    pub a_squared: f64,
    pub truncation: usize,
    pub k_star: usize,
    /// Linear coefficient of `ρ_{k*−1}` in `ζ̇₁`, i.e. `a² − (k*−1)²`.
    pub c1: f64,
    /// `ζ₁ … ζ_{k*}`.
    pub zetas: Vec<IndexedPolynomial>,
    /// `𝒬_l = ζ_l − ρ_{k*−l}` for each level.
    pub remainders: Vec<IndexedPolynomial>,
    /// `G` as a polynomial in `(x, ρ)`.
    pub g_poly: IndexedPolynomial,
    compiled_zetas: Vec<CompiledPolynomial>,
    compiled_g: CompiledPolynomial,
}

impl ZetaCascade {
    pub fn new(a_squared: f64, truncation: usize) -> Result<Self> {
        if !(a_squared >= 0.0) {
            return Err(Error::Config(format!("a² must be ≥ 0, got {a_squared}")));
        }
        let last = truncation.saturating_sub(1) as f64;
        if a_squared >= last * last {
            return Err(Error::Config(format!(
                "a² = {a_squared} ≥ (M−1)² = {} for truncation M = {truncation}",
                last * last
            )));
        }
        let ks = k_star(a_squared);
        if truncation < ks + 2 {
            return Err(Error::TruncationOverflow(format!(
                "chain truncation M = {truncation} < k* + 2 = {}",
                ks + 2
            )));
        }
        let field = chain_field(a_squared, truncation)?;
        let mut zetas = vec![IndexedPolynomial::rho((ks - 1) as u32)];
        for _ in 1..ks {
            let z = zetas.last().unwrap();
            let next = &z.lie_derivative(&field)? + z;
            zetas.push(next);
        }
        let top = zetas.last().unwrap();
        let g_poly = -&(top + &top.lie_derivative(&field)?);
        let remainders =
            zetas.iter().enumerate().map(|(i, z)| z - &IndexedPolynomial::rho((ks - 1 - i) as u32)).collect();
        for (l, z) in zetas.iter().enumerate() {
            if !z.has_dyadic_coefficients() {
                warn!("zeta[{}] has coefficients that are not exact dyadic rationals", l + 1);
            }
        }
        if !g_poly.has_dyadic_coefficients() {
            warn!("G has coefficients that are not exact dyadic rationals");
        }
        let slot = |v: Var| {
            let i = v.index as usize;
            (i < truncation).then_some(match v.family {
                crate::poly::Family::X => i,
                crate::poly::Family::Rho => truncation + i,
            })
        };
        let compiled_zetas = zetas.iter().map(|z| z.compile(slot)).collect::<Result<_>>()?;
        let compiled_g = g_poly.compile(slot)?;
        Ok(Self {
            a_squared,
            truncation,
            k_star: ks,
            c1: a_squared - ((ks - 1) * (ks - 1)) as f64,
            zetas,
            remainders,
            g_poly,
            compiled_zetas,
            compiled_g,
        })
    }

    pub fn for_model(model: &ModelSpec) -> Result<Self> {
        let a2 = model.a_squared().ok_or_else(|| {
            Error::Config(format!("cascade needs the chain model, got {}", model.id.as_str()))
        })?;
        Self::new(a2, model.dim)
    }

    /// Packs `(x, ρ)` into the slot layout used by the compiled polynomials.
    pub fn pack(&self, x: &[f64], rho: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(x);
        buf.extend_from_slice(rho);
    }

    /// `G(x, x + ρ)` from a packed `[x, ρ]` slice.
    pub fn eval_g(&self, packed: &[f64]) -> Result<f64> {
        self.check_len(packed)?;
        self.compiled_g.eval(packed)
    }

    /// `ζ_{k*}` from a packed `[x, ρ]` slice.
    pub fn eval_top(&self, packed: &[f64]) -> Result<f64> {
        self.check_len(packed)?;
        self.compiled_zetas.last().expect("k* ≥ 1").eval(packed)
    }

    /// `ζ_l` values for `l = 1..=k*` from a packed `[x, ρ]` slice.
    pub fn eval_zetas(&self, packed: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(packed)?;
        for (o, z) in out.iter_mut().zip(&self.compiled_zetas) {
            *o = z.eval(packed)?;
        }
        Ok(())
    }

    fn check_len(&self, packed: &[f64]) -> Result<()> {
        if packed.len() != 2 * self.truncation {
            return Err(Error::UnboundVariable(format!(
                "state of length {} does not match cascade truncation {}",
                packed.len() / 2,
                self.truncation
            )));
        }
        Ok(())
    }

    /// Text dump: header comments, then `## name` sections holding one
    /// polynomial each in the polynomial text format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# a^2 = {}", self.a_squared).unwrap();
        writeln!(out, "# M = {}", self.truncation).unwrap();
        writeln!(out, "# k* = {}", self.k_star).unwrap();
        writeln!(out, "# c1 = {}", self.c1).unwrap();
        for (l, z) in self.zetas.iter().enumerate() {
            writeln!(out, "## zeta[{}]", l + 1).unwrap();
            out.push_str(&z.to_text());
        }
        for (l, q) in self.remainders.iter().enumerate() {
            writeln!(out, "## Q[{}]", l + 1).unwrap();
            out.push_str(&q.to_text());
        }
        out.push_str("## G\n");
        out.push_str(&self.g_poly.to_text());
        out
    }

    /// Re-derives the structural identities symbolically; each entry is a
    /// description and whether it holds exactly.
    pub fn verify_identities(&self) -> Result<Vec<(String, bool)>> {
        let field = chain_field(self.a_squared, self.truncation)?;
        let ks = self.k_star;
        let mut out = vec![(
            format!("zeta[1] = rho[{}]", ks - 1),
            self.zetas[0] == IndexedPolynomial::rho((ks - 1) as u32),
        )];
        for (i, q) in self.remainders.iter().enumerate() {
            let l = i + 1;
            let lo_ok = q.min_index().is_none_or(|lo| lo as usize + l > ks);
            let rho_ok = q.terms().all(|(m, _)| m.contains_family(crate::poly::Family::Rho));
            out.push((
                format!("Q[{l}] vanishes at rho = 0 and involves only indices >= {}", ks + 1 - l),
                lo_ok && rho_ok,
            ));
        }
        for l in 0..ks - 1 {
            let lhs = &self.zetas[l].lie_derivative(&field)? + &self.zetas[l];
            out.push((
                format!("d/dt zeta[{}] = -zeta[{}] + zeta[{}]", l + 1, l + 1, l + 2),
                lhs == self.zetas[l + 1],
            ));
        }
        let top = self.zetas.last().expect("k* ≥ 1");
        out.push((
            "d zeta[k*] / d rho[0] = 1".into(),
            top.derivative(Var::rho(0)) == IndexedPolynomial::constant(1.0),
        ));
        let closed = &(&top.lie_derivative(&field)? + &self.g_poly) + top;
        out.push(("with G, d/dt zeta[k*] = -zeta[k*]".into(), closed.is_zero()));
        Ok(out)
    }
}

/// Splits a cascade dump back into `(section name, polynomial)` pairs.
pub fn parse_cascade_dump(text: &str) -> Result<Vec<(String, IndexedPolynomial)>> {
    let mut sections: Vec<(String, usize, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(name) = line.strip_prefix("## ") {
            sections.push((name.trim().to_string(), i, String::new()));
        } else if let Some(cur) = sections.last_mut() {
            cur.2.push_str(line);
            cur.2.push('\n');
        }
    }
    sections
        .into_iter()
        .map(|(name, start, body)| {
            parse_polynomial(&body).map(|p| (name, p)).map_err(|e| match e {
                Error::PolyParse { line, message } => Error::PolyParse { line: line + start + 1, message },
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Family;

    #[test]
    fn k_star_values() {
        assert_eq!(k_star(0.0), 2);
        assert_eq!(k_star(2.0), 3);
        assert_eq!(k_star(5.0), 3);
        assert_eq!(k_star(1.0), 2);
        assert_eq!(k_star(6.0), 3);
        assert_eq!(k_star(6.5), 4);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(ZetaCascade::new(5.0, 4), Err(Error::TruncationOverflow(_))));
        assert!(matches!(ZetaCascade::new(9.0, 4), Err(Error::Config(_))));
        assert!(ZetaCascade::new(5.0, 5).is_ok());
    }

    #[test]
    fn first_levels_match_closed_form() {
        for a2 in [0.0, 2.0, 5.0] {
            let c = ZetaCascade::new(a2, 12).unwrap();
            let k = (c.k_star - 1) as u32;
            assert_eq!(c.zetas[0], IndexedPolynomial::rho(k));
            assert_eq!(c.c1, a2 - (k * k) as f64);
            // ζ₂ = (c₁+1)ρ_{k*−1} + ρ_{k*} + ρ_{k*−2} − ρ_{k*−1}(x² + xy + y²), y = x + ρ.
            let (x, r) = (IndexedPolynomial::x(k), IndexedPolynomial::rho(k));
            let y = &x + &r;
            let quad = &(&x.pow(2) + &(&x * &y)) + &y.pow(2);
            let expected = &(&(&r.scale(c.c1 + 1.0) + &IndexedPolynomial::rho(k + 1))
                + &IndexedPolynomial::rho(k - 1))
                - &(&r * &quad);
            assert_eq!(c.zetas[1], expected);
        }
    }

    #[test]
    fn remainder_shape() {
        for a2 in [0.0, 2.0, 5.0] {
            let c = ZetaCascade::new(a2, 12).unwrap();
            let ks = c.k_star as u32;
            assert!(c.remainders[0].is_zero());
            for (i, q) in c.remainders.iter().enumerate() {
                let l = i as u32 + 1;
                if let Some(lo) = q.min_index() {
                    assert!(lo + l > ks, "level {l}");
                }
                assert!(q.terms().all(|(m, _)| m.contains_family(Family::Rho)));
            }
        }
    }

    #[test]
    fn symbolic_level_identity() {
        let c = ZetaCascade::new(2.0, 10).unwrap();
        let field = chain_field(2.0, 10).unwrap();
        for l in 0..c.k_star - 1 {
            let lhs = &c.zetas[l].lie_derivative(&field).unwrap() + &c.zetas[l];
            assert_eq!(lhs, c.zetas[l + 1]);
        }
        // Closing identity: with G entering ρ̇₀, ζ̇_{k*} = −ζ_{k*}.
        let top = c.zetas.last().unwrap();
        assert_eq!(top.derivative(Var::rho(0)), IndexedPolynomial::constant(1.0));
        let closed = &(&top.lie_derivative(&field).unwrap() + &c.g_poly) + top;
        assert!(closed.is_zero());
    }

    #[test]
    fn identities_all_hold() {
        for a2 in [0.0, 2.0, 5.0] {
            let c = ZetaCascade::new(a2, 4 * k_star(a2)).unwrap();
            let checks = c.verify_identities().unwrap();
            assert!(checks.len() > 2 * c.k_star);
            assert!(checks.iter().all(|(_, ok)| *ok), "{checks:?}");
        }
    }

    #[test]
    fn g_vanishes_on_diagonal() {
        let c = ZetaCascade::new(5.0, 12).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut buf = Vec::new();
        c.pack(&x, &[0.0; 12], &mut buf);
        assert_eq!(c.eval_g(&buf).unwrap(), 0.0);
        assert!(c.eval_g(&buf[..10]).is_err());
    }

    #[test]
    fn dump_round_trips() {
        let c = ZetaCascade::new(5.0, 12).unwrap();
        let text = c.dump();
        assert!(text.contains("# k* = 3"));
        let parsed = parse_cascade_dump(&text).unwrap();
        assert_eq!(parsed.len(), 2 * c.k_star + 1);
        for (l, z) in c.zetas.iter().enumerate() {
            assert_eq!(parsed[l].0, format!("zeta[{}]", l + 1));
            assert_eq!(&parsed[l].1, z);
        }
        assert_eq!(parsed.last().unwrap().1, c.g_poly);
    }

    #[test]
    fn field_agrees_with_model_drift() {
        use rand::{Rng, SeedableRng};
        let m = ModelSpec::chain(5.0, 12, 2.0).unwrap();
        let field = chain_field(5.0, 12).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
            let d = m.drift(&x).unwrap();
            for k in 0..12u32 {
                let row = field.row(Var::x(k)).unwrap();
                let v = row.evaluate(|v| (v.family == Family::X).then(|| x[v.index as usize])).unwrap();
                assert!((v - d[k as usize]).abs() < 1e-12);
            }
        }
    }
}
