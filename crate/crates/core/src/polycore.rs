//! Sparse multivariate polynomials over the complex numbers.
//!
//! A [`Polynomial`] maps exponent vectors ([`Monomial`]) to complex
//! coefficients. Terms are kept in graded-lexicographic order so that
//! iteration, display and serialization are deterministic. A
//! [`PolySystem`] is an ordered list of polynomials over a shared set of
//! named variables, and [`CompiledSystem`] is a flattened form of a system
//! used in the hot loops of path tracking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex scalar used throughout the crate.
pub type Complex = Complex64;

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const PRUNE_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },
    #[error("system text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// An exponent vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn one(nvars: usize) -> Self {
        Self { exps: vec![0; nvars] }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    /// Total degree.
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
        }
    }

    fn evaluate(&self, point: &[Complex]) -> Complex {
        self.exps
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .fold(Complex::new(1.0, 0.0), |acc, (&e, x)| acc * x.powu(e))
    }
}

/// Graded lexicographic: total degree first, then exponent vectors compared
/// lexicographically.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A sparse polynomial in `nvars` variables. No stored coefficient is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, Complex>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Complex) -> Self {
        let mut p = Self::zero(nvars);
        if c != Complex::new(0.0, 0.0) {
            p.terms.insert(Monomial::one(nvars), c);
        }
        p
    }

    /// The polynomial `x_index`.
    pub fn variable(nvars: usize, index: usize) -> Result<Self, PolyError> {
        if index >= nvars {
            return Err(PolyError::VariableOutOfRange { index, nvars });
        }
        let mut exps = vec![0; nvars];
        exps[index] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(Monomial::new(exps), Complex::new(1.0, 0.0));
        Ok(p)
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs. Repeated
    /// monomials are summed; exactly-zero results are dropped.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, Complex)>,
    {
        let mut acc: BTreeMap<Monomial, Complex> = BTreeMap::new();
        for (exps, c) in terms {
            if exps.len() != nvars {
                return Err(PolyError::LengthMismatch {
                    expected: nvars,
                    got: exps.len(),
                });
            }
            *acc.entry(Monomial::new(exps)).or_default() += c;
        }
        acc.retain(|_, c| *c != Complex::new(0.0, 0.0));
        Ok(Self { nvars, terms: acc })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// Terms in descending graded-lex order (leading term first).
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex)> {
        self.terms.iter().rev()
    }

    pub fn coefficient(&self, m: &Monomial) -> Complex {
        self.terms.get(m).copied().unwrap_or_default()
    }

    /// Maximum total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Set of total degrees that occur.
    pub fn term_degrees(&self) -> BTreeSet<u32> {
        self.terms.keys().map(Monomial::degree).collect()
    }

    fn check_len(&self, n: usize) -> Result<(), PolyError> {
        if n != self.nvars {
            return Err(PolyError::LengthMismatch {
                expected: self.nvars,
                got: n,
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, point: &[Complex]) -> Result<Complex, PolyError> {
        self.check_len(point.len())?;
        Ok(self
            .terms
            .iter()
            .map(|(m, c)| c * m.evaluate(point))
            .sum())
    }

    /// Formal partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Result<Polynomial, PolyError> {
        if var >= self.nvars {
            return Err(PolyError::VariableOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let e = m.exps[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps.clone();
            exps[var] -= 1;
            terms.insert(Monomial::new(exps), c * e as f64);
        }
        Ok(Polynomial {
            nvars: self.nvars,
            terms,
        })
    }

    /// Monomials carrying a nonzero coefficient.
    pub fn support(&self) -> BTreeSet<Monomial> {
        self.terms.keys().cloned().collect()
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_len(other.nvars)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_default() += c;
        }
        Ok(Polynomial::pruned(self.nvars, terms))
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_len(other.nvars)?;
        let mut terms: BTreeMap<Monomial, Complex> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *terms.entry(ma.mul(mb)).or_default() += ca * cb;
            }
        }
        Ok(Polynomial::pruned(self.nvars, terms))
    }

    pub fn scale(&self, s: Complex) -> Polynomial {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect();
        Polynomial::pruned(self.nvars, terms)
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::constant(self.nvars, Complex::new(1.0, 0.0));
        for _ in 0..e {
            acc = acc.mul(self).expect("same nvars");
        }
        acc
    }

    fn pruned(nvars: usize, mut terms: BTreeMap<Monomial, Complex>) -> Polynomial {
        terms.retain(|_, c| c.norm() >= PRUNE_EPS);
        Polynomial { nvars, terms }
    }

    /// Renders with the given variable names, e.g. `5*a1*b1^2 - 7*b1`.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        PolyDisplay { poly: self, names }
    }
}

struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    names: &'a [String],
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.poly.terms().enumerate() {
            let coeff = if c.im == 0.0 {
                if k > 0 {
                    write!(f, " {} ", if c.re < 0.0 { '-' } else { '+' })?;
                } else if c.re < 0.0 {
                    write!(f, "-")?;
                }
                format!("{}", c.re.abs())
            } else {
                if k > 0 {
                    write!(f, " + ")?;
                }
                format!("({}{:+}i)", c.re, c.im)
            };
            let vars: Vec<String> = m
                .exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    let name = self.names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1));
                    if e == 1 {
                        name
                    } else {
                        format!("{name}^{e}")
                    }
                })
                .collect();
            if vars.is_empty() {
                write!(f, "{coeff}")?;
            } else if coeff == "1" {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{coeff}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// An ordered list of polynomials over common named variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySystem {
    polys: Vec<Polynomial>,
    nvars: usize,
    var_names: Vec<String>,
}

impl PolySystem {
    pub fn new(polys: Vec<Polynomial>, var_names: Vec<String>) -> Result<Self, PolyError> {
        let nvars = var_names.len();
        for p in &polys {
            p.check_len(nvars)?;
        }
        Ok(Self {
            polys,
            nvars,
            var_names,
        })
    }

    /// Variables named `x1..xn`.
    pub fn with_default_names(polys: Vec<Polynomial>, nvars: usize) -> Result<Self, PolyError> {
        Self::new(polys, (1..=nvars).map(|i| format!("x{i}")).collect())
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn is_square(&self) -> bool {
        self.polys.len() == self.nvars
    }

    /// Total degree of each polynomial (0 for the zero polynomial).
    pub fn degrees(&self) -> Vec<u32> {
        self.polys.iter().map(|p| p.degree().unwrap_or(0)).collect()
    }

    pub fn evaluate(&self, point: &[Complex]) -> Result<Vec<Complex>, PolyError> {
        self.polys.iter().map(|p| p.evaluate(point)).collect()
    }

    /// Jacobian rows (one per polynomial) through formal differentiation.
    pub fn jacobian(&self, point: &[Complex]) -> Result<Vec<Vec<Complex>>, PolyError> {
        self.polys
            .iter()
            .map(|p| {
                (0..self.nvars)
                    .map(|j| p.differentiate(j)?.evaluate(point))
                    .collect()
            })
            .collect()
    }

    pub fn supports(&self) -> Vec<BTreeSet<Monomial>> {
        self.polys.iter().map(Polynomial::support).collect()
    }

    pub fn compile(&self) -> CompiledSystem {
        CompiledSystem::new(self)
    }

    /// Text form: a `vars` header line, then one polynomial per line with
    /// space-separated terms `re,im:e1,...,eN` (`0` for the zero polynomial).
    /// Floats use the shortest representation that parses back bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("vars");
        for name in &self.var_names {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');
        for p in &self.polys {
            if p.is_zero() {
                out.push('0');
            } else {
                let terms: Vec<String> = p
                    .terms()
                    .map(|(m, c)| {
                        let exps: Vec<String> = m.exps.iter().map(u32::to_string).collect();
                        format!("{},{}:{}", c.re, c.im, exps.join(","))
                    })
                    .collect();
                out.push_str(&terms.join(" "));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PolyError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(PolyError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("vars") {
            return Err(PolyError::Parse {
                line: 1,
                msg: "expected `vars` header".into(),
            });
        }
        let var_names: Vec<String> = fields.map(str::to_string).collect();
        let nvars = var_names.len();
        let mut polys = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "0" {
                polys.push(Polynomial::zero(nvars));
                continue;
            }
            let err = |msg: String| PolyError::Parse { line: line_no, msg };
            let mut terms = Vec::new();
            for tok in line.split_whitespace() {
                let (coeff, exps) = tok
                    .split_once(':')
                    .ok_or_else(|| err(format!("term `{tok}` lacks ':'")))?;
                let (re, im) = coeff
                    .split_once(',')
                    .ok_or_else(|| err(format!("coefficient `{coeff}` lacks ','")))?;
                let re: f64 = re.parse().map_err(|_| err(format!("bad float `{re}`")))?;
                let im: f64 = im.parse().map_err(|_| err(format!("bad float `{im}`")))?;
                let exps: Vec<u32> = exps
                    .split(',')
                    .map(|e| e.parse().map_err(|_| err(format!("bad exponent `{e}`"))))
                    .collect::<Result<_, _>>()?;
                if exps.len() != nvars {
                    return Err(err(format!(
                        "term has {} exponents, header declares {nvars} variables",
                        exps.len()
                    )));
                }
                terms.push((exps, Complex::new(re, im)));
            }
            polys.push(Polynomial::from_terms(nvars, terms)?);
        }
        PolySystem::new(polys, var_names)
    }
}

/// Flattened, allocation-free evaluator for a system and its Jacobian.
#[derive(Clone, Debug)]
pub struct CompiledSystem {
    nvars: usize,
    npolys: usize,
    degrees: Vec<u32>,
    max_exp: Vec<u32>,
    pow_offset: Vec<usize>,
    // per polynomial: range into `terms`
    poly_ranges: Vec<(usize, usize)>,
    // per term: coefficient and range into `factors`
    terms: Vec<(Complex, usize, usize)>,
    // (variable, index of its power in the scratch tables)
    factors: Vec<(usize, usize)>,
}

/// Scratch space for [`CompiledSystem`] evaluation; one per worker.
#[derive(Clone, Debug)]
pub struct EvalScratch {
    pows: Vec<Complex>,
    // `e x^{e-1}` at the index of `x^e`
    dpows: Vec<Complex>,
    vals: Vec<Complex>,
}

impl CompiledSystem {
    pub fn new(system: &PolySystem) -> Self {
        let nvars = system.nvars();
        let mut max_exp = vec![0u32; nvars];
        for p in system.polys() {
            for (m, _) in p.terms() {
                for (mx, &e) in max_exp.iter_mut().zip(m.exponents()) {
                    *mx = (*mx).max(e);
                }
            }
        }
        let mut pow_offset = Vec::with_capacity(nvars);
        let mut off = 0;
        for &e in &max_exp {
            pow_offset.push(off);
            off += e as usize + 1;
        }
        let mut poly_ranges = Vec::with_capacity(system.len());
        let mut terms = Vec::new();
        let mut factors = Vec::new();
        for p in system.polys() {
            let start = terms.len();
            for (m, c) in p.terms() {
                let fstart = factors.len();
                for (v, &e) in m.exponents().iter().enumerate() {
                    if e > 0 {
                        factors.push((v, pow_offset[v] + e as usize));
                    }
                }
                terms.push((*c, fstart, factors.len()));
            }
            poly_ranges.push((start, terms.len()));
        }
        Self {
            nvars,
            npolys: system.len(),
            degrees: system.degrees(),
            max_exp,
            pow_offset,
            poly_ranges,
            terms,
            factors,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn npolys(&self) -> usize {
        self.npolys
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn scratch(&self) -> EvalScratch {
        let len = self.max_exp.iter().map(|&e| e as usize + 1).sum();
        EvalScratch {
            pows: vec![Complex::default(); len],
            dpows: vec![Complex::default(); len],
            vals: Vec::with_capacity(8),
        }
    }

    fn fill_powers(&self, x: &[Complex], s: &mut EvalScratch) {
        for v in 0..self.nvars {
            let off = self.pow_offset[v];
            let mut acc = Complex::new(1.0, 0.0);
            s.pows[off] = acc;
            for e in 1..=self.max_exp[v] as usize {
                s.dpows[off + e] = acc * e as f64;
                acc *= x[v];
                s.pows[off + e] = acc;
            }
        }
    }

    /// Values of all polynomials at `x`.
    pub fn evaluate(&self, x: &[Complex], out: &mut [Complex], s: &mut EvalScratch) {
        debug_assert_eq!(x.len(), self.nvars);
        self.fill_powers(x, s);
        for (i, &(a, b)) in self.poly_ranges.iter().enumerate() {
            let mut acc = Complex::default();
            for &(c, fa, fb) in &self.terms[a..b] {
                let mut t = c;
                for &(_, k) in &self.factors[fa..fb] {
                    t *= s.pows[k];
                }
                acc += t;
            }
            out[i] = acc;
        }
    }

    /// For each polynomial, the sum of absolute term values at `x`; the scale
    /// against which residuals are judged.
    pub fn term_magnitudes(&self, x: &[Complex], out: &mut [f64], s: &mut EvalScratch) {
        self.fill_powers(x, s);
        for (i, &(a, b)) in self.poly_ranges.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, fa, fb) in &self.terms[a..b] {
                let mut t = c.norm();
                for &(_, k) in &self.factors[fa..fb] {
                    t *= s.pows[k].norm();
                }
                acc += t;
            }
            out[i] = acc;
        }
    }

    /// Values and the row-major Jacobian (`npolys x nvars`) at `x`.
    pub fn evaluate_with_jacobian(
        &self,
        x: &[Complex],
        out: &mut [Complex],
        jac: &mut [Complex],
        s: &mut EvalScratch,
    ) {
        debug_assert_eq!(jac.len(), self.npolys * self.nvars);
        self.fill_powers(x, s);
        jac.iter_mut().for_each(|j| *j = Complex::default());
        for (i, &(a, b)) in self.poly_ranges.iter().enumerate() {
            let row = &mut jac[i * self.nvars..(i + 1) * self.nvars];
            let mut acc = Complex::default();
            for &(c, fa, fb) in &self.terms[a..b] {
                let fs = &self.factors[fa..fb];
                // vals[k] = c * (product of the factors before k)
                s.vals.clear();
                let mut t = c;
                for &(_, k) in fs {
                    s.vals.push(t);
                    t *= s.pows[k];
                }
                acc += t;
                let mut suffix = Complex::new(1.0, 0.0);
                for (&(v, k), &before) in fs.iter().zip(&s.vals).rev() {
                    row[v] += before * suffix * s.dpows[k];
                    suffix *= s.pows[k];
                }
            }
            out[i] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    fn poly(nvars: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        Polynomial::from_terms(nvars, terms.iter().map(|(e, v)| (e.to_vec(), c(*v)))).unwrap()
    }

    #[test]
    fn evaluate_at_all_ones() {
        let p = poly(2, &[(&[1, 2], 5.0)]);
        assert_eq!(p.evaluate(&[c(1.0), c(1.0)]).unwrap(), c(5.0));
    }

    #[test]
    fn evaluate_length_mismatch() {
        let p = poly(2, &[(&[1, 2], 5.0)]);
        assert_eq!(
            p.evaluate(&[c(1.0)]),
            Err(PolyError::LengthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn power_rule() {
        let p = poly(2, &[(&[1, 2], 5.0)]);
        assert_eq!(p.differentiate(0).unwrap(), poly(2, &[(&[0, 2], 5.0)]));
        let lin = poly(2, &[(&[1, 0], 4.0)]);
        assert!(lin.differentiate(1).unwrap().is_zero());
        assert!(matches!(p.differentiate(2), Err(PolyError::VariableOutOfRange { .. })));
    }

    #[test]
    fn ring_identities() {
        let a = Polynomial::variable(2, 0).unwrap();
        let b = Polynomial::variable(2, 1).unwrap();
        let p = a.add(&b).unwrap();
        assert!(p.add(&p.scale(c(-1.0))).unwrap().is_zero());
        let prod = a.add(&b).unwrap().mul(&a.sub(&b).unwrap()).unwrap();
        assert_eq!(prod, poly(2, &[(&[2, 0], 1.0), (&[0, 2], -1.0)]));
        assert!(a.add(&Polynomial::zero(3)).is_err());
    }

    #[test]
    fn support_and_scaling() {
        assert!(Polynomial::zero(3).support().is_empty());
        let p = poly(2, &[(&[1, 2], 5.0), (&[0, 1], -7.0), (&[1, 0], 4.0)]);
        assert_eq!(p.support(), p.scale(c(2.0)).support());
        assert_eq!(p.support().len(), 3);
    }

    #[test]
    fn zero_terms_dropped_on_construction() {
        let p = poly(1, &[(&[1], 2.0), (&[1], -2.0), (&[0], 0.0)]);
        assert!(p.is_zero());
    }

    #[test]
    fn leading_term_first() {
        let p = poly(2, &[(&[0, 1], 1.0), (&[2, 1], 1.0), (&[1, 0], 1.0)]);
        let degs: Vec<u32> = p.terms().map(|(m, _)| m.degree()).collect();
        assert_eq!(degs, vec![3, 1, 1]);
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(p.display_with(&names).to_string(), "a^2*b + a + b");
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let p = Polynomial::from_terms(
            3,
            vec![
                (vec![1, 0, 2], Complex::new(0.1 + 0.2, -1e-300)),
                (vec![0, 0, 0], Complex::new(-0.0, 3.0)),
                (vec![0, 1, 0], Complex::new(1.0 / 3.0, 0.0)),
            ],
        )
        .unwrap();
        let sys = PolySystem::new(
            vec![p, Polynomial::zero(3)],
            vec!["u".into(), "v".into(), "w".into()],
        )
        .unwrap();
        let text = sys.to_text();
        let back = PolySystem::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        for (p, q) in sys.polys().iter().zip(back.polys()) {
            for ((m1, c1), (m2, c2)) in p.terms().zip(q.terms()) {
                assert_eq!(m1, m2);
                assert_eq!(c1.re.to_bits(), c2.re.to_bits());
                assert_eq!(c1.im.to_bits(), c2.im.to_bits());
            }
        }
    }

    #[test]
    fn malformed_text_rejected() {
        assert!(PolySystem::from_text("").is_err());
        assert!(PolySystem::from_text("vars a b\n1,0:1").is_err());
        assert!(PolySystem::from_text("nope a\n").is_err());
        assert!(PolySystem::from_text("vars a\n1;0:1").is_err());
    }

    #[test]
    fn compiled_matches_formal_jacobian() {
        let p = poly(3, &[(&[1, 2, 0], 5.0), (&[0, 1, 3], -2.0), (&[1, 0, 0], 4.0)]);
        let q = poly(3, &[(&[2, 0, 1], 1.5), (&[0, 0, 0], 1.0)]);
        let sys = PolySystem::with_default_names(vec![p, q], 3).unwrap();
        let x = [Complex::new(0.3, -0.2), Complex::new(-1.1, 0.4), Complex::new(0.7, 0.9)];
        let comp = sys.compile();
        let mut s = comp.scratch();
        let mut vals = vec![Complex::default(); 2];
        let mut jac = vec![Complex::default(); 6];
        comp.evaluate_with_jacobian(&x, &mut vals, &mut jac, &mut s);
        let want = sys.evaluate(&x).unwrap();
        let want_j = sys.jacobian(&x).unwrap();
        for i in 0..2 {
            assert!((vals[i] - want[i]).norm() < 1e-12);
            for j in 0..3 {
                assert!((jac[i * 3 + j] - want_j[i][j]).norm() < 1e-12);
            }
        }
    }
}
