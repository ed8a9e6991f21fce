//! Exact arithmetic for the algebraic domains: prime fields F_p, extension
//! fields GF(p^m) with explicit polynomial arithmetic, and finite Abelian
//! products ⊗_i Z_{m_i}.
//!
//! Elements are canonical `u64` indices (residue for F_p, base-p digits for
//! GF(p^m), mixed-radix tuple for products). Characters are exact phases:
//! tuples of root-of-unity exponents, converted to complex doubles only at
//! summation time.

use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{KlinError, Result};

/// Canonical element of a fixed domain; meaning depends on the `GroupSpec`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Elem(pub u64);

/// Exact root-of-unity phase: exponent tuple (e_1..e_r) with e_i in [0, m_i),
/// encoded mixed-radix over the spec's phase moduli. Value is ∏_i ω_{m_i}^{e_i}.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Phase(pub u64);

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum GroupKind {
    PrimeField { p: u64 },
    ExtensionField { p: u64, m: u32, poly: Vec<u64> },
    AbelianProduct { moduli: Vec<u64> },
}

/// An algebraic domain: field or finite Abelian group, with cached order and
/// exponent (lcm of component orders, used for phase arithmetic).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub order: u64,
    pub exponent: u64,
}

/// Subgroup of an Abelian product in multiplier form ⊗_i μ_i Z_{m_i}
/// (μ_i = 1 is the full component, μ_i = m_i the zero component).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SubgroupDesc {
    pub multipliers: Vec<u64>,
    pub order: u64,
}

/// Which case of the quotient-search lemma applies to the returned subgroup.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum QuotientCase {
    /// |G/H| <= t.
    SmallQuotient,
    /// |G/H| > t and G/H has prime order.
    PrimeQuotient,
    /// t < |G/H| <= t^2 and every nontrivial subgroup of G/H has size >= |G/H|/t.
    RobustQuotient,
}

pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub const MAX_FIELD_ORDER: u64 = 1024;

// ---------------------------------------------------------------------------
// Polynomial helpers over F_p (little-endian coefficient vectors)
// ---------------------------------------------------------------------------

fn poly_trim(c: &mut Vec<u64>) {
    while c.last() == Some(&0) {
        c.pop();
    }
}

fn poly_mul_mod_p(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + ai * bj) % p;
        }
    }
    poly_trim(&mut out);
    out
}

/// Remainder of `a` modulo monic `m`, over F_p.
fn poly_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r: Vec<u64> = a.to_vec();
    poly_trim(&mut r);
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        for (i, &mi) in m.iter().enumerate() {
            let idx = i + shift;
            let sub = (lead * mi) % p;
            r[idx] = (r[idx] + p - sub) % p;
        }
        poly_trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    r
}

/// Irreducibility over F_p by trial division against all monic polynomials of
/// degree 1..=deg/2.
fn poly_is_irreducible(f: &[u64], p: u64) -> bool {
    let deg = f.len() - 1;
    if deg == 0 {
        return false;
    }
    for d in 1..=deg / 2 {
        let count = p.pow(d as u32);
        for code in 0..count {
            let mut g = vec![0u64; d + 1];
            let mut c = code;
            for gi in g.iter_mut().take(d) {
                *gi = c % p;
                c /= p;
            }
            g[d] = 1;
            if poly_rem(f, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

/// Smallest monic irreducible of degree m over F_p, ordered by the base-p
/// value of the non-leading coefficient vector.
fn smallest_irreducible(p: u64, m: u32) -> Vec<u64> {
    let count = p.pow(m);
    for code in 0..count {
        let mut f = vec![0u64; m as usize + 1];
        let mut c = code;
        for fi in f.iter_mut().take(m as usize) {
            *fi = c % p;
            c /= p;
        }
        f[m as usize] = 1;
        if poly_is_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("an irreducible polynomial of every degree exists over F_p")
}

// ---------------------------------------------------------------------------
// GroupSpec
// ---------------------------------------------------------------------------

impl GroupSpec {
    pub fn prime_field(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(KlinError::InvalidSpec(format!("{p} is not prime")));
        }
        if p > MAX_FIELD_ORDER {
            return Err(KlinError::InvalidSpec(format!(
                "field order {p} exceeds cap {MAX_FIELD_ORDER}"
            )));
        }
        Ok(GroupSpec { kind: GroupKind::PrimeField { p }, order: p, exponent: p })
    }

    /// GF(p^m). `poly` is the monic irreducible modulus as little-endian
    /// coefficients; when absent the lowest one in base-p value order is used.
    pub fn extension_field(p: u64, m: u32, poly: Option<Vec<u64>>) -> Result<Self> {
        if !is_prime(p) {
            return Err(KlinError::InvalidSpec(format!("{p} is not prime")));
        }
        if m < 2 {
            return Err(KlinError::InvalidSpec("extension degree must be >= 2".into()));
        }
        let order = p
            .checked_pow(m)
            .filter(|&o| o <= MAX_FIELD_ORDER)
            .ok_or_else(|| {
                KlinError::InvalidSpec(format!("field order p^m exceeds cap {MAX_FIELD_ORDER}"))
            })?;
        let poly = match poly {
            Some(f) => {
                if f.len() != m as usize + 1 {
                    return Err(KlinError::InvalidSpec(format!(
                        "modulus must have degree {m} ({} coefficients)",
                        m + 1
                    )));
                }
                if f[m as usize] != 1 {
                    return Err(KlinError::InvalidSpec("modulus must be monic".into()));
                }
                if f.iter().any(|&c| c >= p) {
                    return Err(KlinError::InvalidSpec("modulus coefficient out of range".into()));
                }
                if !poly_is_irreducible(&f, p) {
                    return Err(KlinError::InvalidSpec("modulus is reducible".into()));
                }
                f
            }
            None => smallest_irreducible(p, m),
        };
        Ok(GroupSpec { kind: GroupKind::ExtensionField { p, m, poly }, order, exponent: p })
    }

    pub fn abelian_product(moduli: Vec<u64>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(KlinError::InvalidSpec("empty modulus list".into()));
        }
        if moduli.iter().any(|&m| m < 2) {
            return Err(KlinError::InvalidSpec("all moduli must be >= 2".into()));
        }
        let mut order: u64 = 1;
        let mut exponent: u64 = 1;
        for &m in &moduli {
            order = order
                .checked_mul(m)
                .ok_or_else(|| KlinError::InvalidSpec("group order overflow".into()))?;
            exponent = lcm(exponent, m);
        }
        Ok(GroupSpec { kind: GroupKind::AbelianProduct { moduli }, order, exponent })
    }

    /// Parse the domain grammar: `p=<prime>` | `gf p=<prime> m=<deg>
    /// poly=<digits little-endian, optional>` | `zm=<m1>,<m2>,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("zm=") {
            let moduli = rest
                .split(',')
                .map(|t| t.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| KlinError::InvalidSpec(format!("bad modulus list in {s:?}")))?;
            return Self::abelian_product(moduli);
        }
        if let Some(rest) = s.strip_prefix("gf") {
            let mut p = None;
            let mut m = None;
            let mut poly = None;
            for tok in rest.split_whitespace() {
                if let Some(v) = tok.strip_prefix("p=") {
                    p = Some(v.parse::<u64>().map_err(|_| {
                        KlinError::InvalidSpec(format!("bad p in {s:?}"))
                    })?);
                } else if let Some(v) = tok.strip_prefix("m=") {
                    m = Some(v.parse::<u32>().map_err(|_| {
                        KlinError::InvalidSpec(format!("bad m in {s:?}"))
                    })?);
                } else if let Some(v) = tok.strip_prefix("poly=") {
                    let digits = v
                        .chars()
                        .map(|c| c.to_digit(10).map(u64::from))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| KlinError::InvalidSpec(format!("bad poly in {s:?}")))?;
                    poly = Some(digits);
                } else {
                    return Err(KlinError::InvalidSpec(format!("unknown token {tok:?}")));
                }
            }
            let p = p.ok_or_else(|| KlinError::InvalidSpec("gf requires p=".into()))?;
            let m = m.ok_or_else(|| KlinError::InvalidSpec("gf requires m=".into()))?;
            return Self::extension_field(p, m, poly);
        }
        if let Some(rest) = s.strip_prefix("p=") {
            let p = rest
                .parse::<u64>()
                .map_err(|_| KlinError::InvalidSpec(format!("bad prime in {s:?}")))?;
            return Self::prime_field(p);
        }
        Err(KlinError::InvalidSpec(format!("unrecognized domain string {s:?}")))
    }

    pub fn spec_string(&self) -> String {
        match &self.kind {
            GroupKind::PrimeField { p } => format!("p={p}"),
            GroupKind::ExtensionField { p, m, poly } => {
                let digits: String =
                    poly.iter().map(|c| char::from_digit(*c as u32, 10).unwrap()).collect();
                format!("gf p={p} m={m} poly={digits}")
            }
            GroupKind::AbelianProduct { moduli } => {
                let list: Vec<String> = moduli.iter().map(|m| m.to_string()).collect();
                format!("zm={}", list.join(","))
            }
        }
    }

    pub fn is_field(&self) -> bool {
        !matches!(self.kind, GroupKind::AbelianProduct { .. })
    }

    /// Characteristic for fields, 0 for products.
    pub fn characteristic(&self) -> u64 {
        match &self.kind {
            GroupKind::PrimeField { p } | GroupKind::ExtensionField { p, .. } => *p,
            GroupKind::AbelianProduct { .. } => 0,
        }
    }

    /// Number of nonzero elements |G \ {0}| (the scalar range of β sums).
    pub fn units(&self) -> u64 {
        self.order - 1
    }

    pub fn zero(&self) -> Elem {
        Elem(0)
    }

    pub fn one(&self) -> Elem {
        match &self.kind {
            GroupKind::AbelianProduct { .. } => {
                // (1, 1, ..., 1) in mixed radix.
                let moduli = self.moduli();
                let mut acc = 0u64;
                let mut radix = 1u64;
                for &m in moduli {
                    acc += radix; // digit 1
                    radix *= m;
                }
                Elem(acc)
            }
            _ => Elem(1),
        }
    }

    pub fn moduli(&self) -> &[u64] {
        match &self.kind {
            GroupKind::AbelianProduct { moduli } => moduli,
            _ => std::slice::from_ref(match &self.kind {
                GroupKind::PrimeField { p } | GroupKind::ExtensionField { p, .. } => p,
                GroupKind::AbelianProduct { .. } => unreachable!(),
            }),
        }
    }

    pub fn elems(&self) -> impl Iterator<Item = Elem> {
        (0..self.order).map(Elem)
    }

    pub fn nonzero_elems(&self) -> impl Iterator<Item = Elem> {
        (1..self.order).map(Elem)
    }

    fn ext_digits(&self, e: Elem) -> Vec<u64> {
        match &self.kind {
            GroupKind::ExtensionField { p, m, .. } => {
                let mut d = vec![0u64; *m as usize];
                let mut v = e.0;
                for di in d.iter_mut() {
                    *di = v % p;
                    v /= p;
                }
                d
            }
            _ => unreachable!(),
        }
    }

    fn ext_encode(&self, digits: &[u64]) -> Elem {
        match &self.kind {
            GroupKind::ExtensionField { p, .. } => {
                let mut acc = 0u64;
                for &d in digits.iter().rev() {
                    acc = acc * p + d;
                }
                Elem(acc)
            }
            _ => unreachable!(),
        }
    }

    /// Components of a product element (or the single residue for fields of
    /// prime order; panics for extension fields where tuples are meaningless).
    pub fn components(&self, e: Elem) -> Vec<u64> {
        match &self.kind {
            GroupKind::AbelianProduct { moduli } => {
                let mut out = Vec::with_capacity(moduli.len());
                let mut v = e.0;
                for &m in moduli {
                    out.push(v % m);
                    v /= m;
                }
                out
            }
            GroupKind::PrimeField { .. } => vec![e.0],
            GroupKind::ExtensionField { .. } => {
                panic!("components() is not defined for extension fields")
            }
        }
    }

    pub fn from_components(&self, comps: &[u64]) -> Elem {
        match &self.kind {
            GroupKind::AbelianProduct { moduli } => {
                assert_eq!(comps.len(), moduli.len());
                let mut acc = 0u64;
                let mut radix = 1u64;
                for (&c, &m) in comps.iter().zip(moduli) {
                    debug_assert!(c < m);
                    acc += c * radix;
                    radix *= m;
                }
                Elem(acc)
            }
            _ => {
                assert_eq!(comps.len(), 1);
                Elem(comps[0])
            }
        }
    }

    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        match &self.kind {
            GroupKind::PrimeField { p } => Elem((a.0 + b.0) % p),
            GroupKind::ExtensionField { p, .. } => {
                let (da, db) = (self.ext_digits(a), self.ext_digits(b));
                let sum: Vec<u64> =
                    da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                self.ext_encode(&sum)
            }
            GroupKind::AbelianProduct { moduli } => {
                let (ca, cb) = (self.components(a), self.components(b));
                let sum: Vec<u64> = ca
                    .iter()
                    .zip(&cb)
                    .zip(moduli)
                    .map(|((x, y), m)| (x + y) % m)
                    .collect();
                self.from_components(&sum)
            }
        }
    }

    pub fn neg(&self, a: Elem) -> Elem {
        match &self.kind {
            GroupKind::PrimeField { p } => Elem((p - a.0 % p) % p),
            GroupKind::ExtensionField { p, .. } => {
                let da = self.ext_digits(a);
                let neg: Vec<u64> = da.iter().map(|x| (p - x) % p).collect();
                self.ext_encode(&neg)
            }
            GroupKind::AbelianProduct { moduli } => {
                let ca = self.components(a);
                let neg: Vec<u64> =
                    ca.iter().zip(moduli).map(|(x, m)| (m - x) % m).collect();
                self.from_components(&neg)
            }
        }
    }

    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    /// Ring multiplication: field product, or componentwise product mod m_i.
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        match &self.kind {
            GroupKind::PrimeField { p } => Elem((a.0 * b.0) % p),
            GroupKind::ExtensionField { p, poly, .. } => {
                let prod = poly_mul_mod_p(&self.ext_digits(a), &self.ext_digits(b), *p);
                let rem = poly_rem(&prod, poly, *p);
                let mut digits = rem;
                digits.resize(self.ext_digits(Elem(0)).len(), 0);
                self.ext_encode(&digits)
            }
            GroupKind::AbelianProduct { moduli } => {
                let (ca, cb) = (self.components(a), self.components(b));
                let prod: Vec<u64> = ca
                    .iter()
                    .zip(&cb)
                    .zip(moduli)
                    .map(|((x, y), m)| (x * y) % m)
                    .collect();
                self.from_components(&prod)
            }
        }
    }

    pub fn pow(&self, a: Elem, mut e: u64) -> Elem {
        let mut base = a;
        let mut acc = self.mul_identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn mul_identity(&self) -> Elem {
        self.one()
    }

    /// Multiplicative inverse. Defined for nonzero field elements and for
    /// product elements whose every component is a unit mod m_i.
    pub fn inverse(&self, a: Elem) -> Option<Elem> {
        match &self.kind {
            GroupKind::PrimeField { p } => {
                if a.0 == 0 {
                    None
                } else {
                    Some(self.pow(a, p - 2))
                }
            }
            GroupKind::ExtensionField { .. } => {
                if a.0 == 0 {
                    None
                } else {
                    Some(self.pow(a, self.order - 2))
                }
            }
            GroupKind::AbelianProduct { moduli } => {
                let ca = self.components(a);
                let mut inv = Vec::with_capacity(ca.len());
                for (&x, &m) in ca.iter().zip(moduli) {
                    if gcd(x, m) != 1 {
                        return None;
                    }
                    // Euler inverse on the unit group of Z_m.
                    let phi = euler_phi(m);
                    let mut acc = 1u64;
                    let mut base = x % m;
                    let mut e = phi - 1;
                    while e > 0 {
                        if e & 1 == 1 {
                            acc = acc * base % m;
                        }
                        base = base * base % m;
                        e >>= 1;
                    }
                    inv.push(acc);
                }
                Some(self.from_components(&inv))
            }
        }
    }

    pub fn is_unit(&self, a: Elem) -> bool {
        self.inverse(a).is_some()
    }

    // -- trace, characters, phases -------------------------------------------

    /// Trace map of F over F_p: Σ_{j<m} e^{p^j}, returned as an F_p residue.
    /// For prime fields the trace is the identity.
    pub fn trace(&self, e: Elem) -> Result<u64> {
        match &self.kind {
            GroupKind::PrimeField { .. } => Ok(e.0),
            GroupKind::ExtensionField { p, m, .. } => {
                let mut acc = Elem(0);
                let mut fr = e;
                for _ in 0..*m {
                    acc = self.add(acc, fr);
                    fr = self.pow(fr, *p);
                }
                let digits = self.ext_digits(acc);
                debug_assert!(digits[1..].iter().all(|&d| d == 0), "trace must land in F_p");
                Ok(digits[0])
            }
            GroupKind::AbelianProduct { .. } => Err(KlinError::DomainMismatch(
                "trace is defined for field domains only".into(),
            )),
        }
    }

    /// Moduli of the phase exponent tuple: [p] for fields, the m_i for products.
    pub fn phase_moduli(&self) -> Vec<u64> {
        match &self.kind {
            GroupKind::PrimeField { p } | GroupKind::ExtensionField { p, .. } => vec![*p],
            GroupKind::AbelianProduct { moduli } => moduli.clone(),
        }
    }

    pub fn phase_one(&self) -> Phase {
        Phase(0)
    }

    pub fn phase_from_exponents(&self, exps: &[u64]) -> Phase {
        let moduli = self.phase_moduli();
        assert_eq!(exps.len(), moduli.len());
        let mut acc = 0u64;
        let mut radix = 1u64;
        for (&e, &m) in exps.iter().zip(&moduli) {
            acc += (e % m) * radix;
            radix *= m;
        }
        Phase(acc)
    }

    pub fn phase_exponents(&self, ph: Phase) -> Vec<u64> {
        let moduli = self.phase_moduli();
        let mut out = Vec::with_capacity(moduli.len());
        let mut v = ph.0;
        for &m in &moduli {
            out.push(v % m);
            v /= m;
        }
        out
    }

    pub fn phase_mul(&self, a: Phase, b: Phase) -> Phase {
        let (ea, eb) = (self.phase_exponents(a), self.phase_exponents(b));
        let sum: Vec<u64> = ea
            .iter()
            .zip(&eb)
            .zip(self.phase_moduli())
            .map(|((x, y), m)| (x + y) % m)
            .collect();
        self.phase_from_exponents(&sum)
    }

    pub fn phase_conj(&self, a: Phase) -> Phase {
        let ea = self.phase_exponents(a);
        let neg: Vec<u64> = ea
            .iter()
            .zip(self.phase_moduli())
            .map(|(x, m)| (m - x) % m)
            .collect();
        self.phase_from_exponents(&neg)
    }

    pub fn phase_to_complex(&self, a: Phase) -> Complex64 {
        let exps = self.phase_exponents(a);
        let moduli = self.phase_moduli();
        let mut theta = 0.0f64;
        for (&e, &m) in exps.iter().zip(&moduli) {
            theta += e as f64 / m as f64;
        }
        let ang = 2.0 * std::f64::consts::PI * theta;
        Complex64::new(ang.cos(), ang.sin())
    }

    /// χ_α(x): for fields ω_p^{Tr(α·x)}; for products ∏_i ω_{m_i}^{α_i x_i}.
    pub fn character(&self, alpha: Elem, x: Elem) -> Phase {
        match &self.kind {
            GroupKind::PrimeField { .. } | GroupKind::ExtensionField { .. } => {
                let t = self.trace(self.mul(alpha, x)).expect("field trace");
                self.phase_from_exponents(&[t])
            }
            GroupKind::AbelianProduct { moduli } => {
                let (ca, cx) = (self.components(alpha), self.components(x));
                let exps: Vec<u64> = ca
                    .iter()
                    .zip(&cx)
                    .zip(moduli)
                    .map(|((a, x), m)| (a * x) % m)
                    .collect();
                self.phase_from_exponents(&exps)
            }
        }
    }

    // -- element literals -----------------------------------------------------

    /// Element literal syntax: integer for prime fields, little-endian base-p
    /// digit string for extension fields, comma tuple for products.
    pub fn parse_elem(&self, s: &str) -> Result<Elem> {
        let s = s.trim();
        match &self.kind {
            GroupKind::PrimeField { p } => {
                let v = s
                    .parse::<u64>()
                    .map_err(|_| KlinError::InvalidSpec(format!("bad element literal {s:?}")))?;
                if v >= *p {
                    return Err(KlinError::InvalidSpec(format!(
                        "element {v} out of range for p={p}"
                    )));
                }
                Ok(Elem(v))
            }
            GroupKind::ExtensionField { p, m, .. } => {
                let digits = s
                    .chars()
                    .map(|c| c.to_digit(10).map(u64::from))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| KlinError::InvalidSpec(format!("bad element literal {s:?}")))?;
                if digits.len() != *m as usize || digits.iter().any(|&d| d >= *p) {
                    return Err(KlinError::InvalidSpec(format!(
                        "element literal {s:?} must be {m} base-{p} digits"
                    )));
                }
                Ok(self.ext_encode(&digits))
            }
            GroupKind::AbelianProduct { moduli } => {
                let comps = s
                    .split(',')
                    .map(|t| t.trim().parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| KlinError::InvalidSpec(format!("bad element literal {s:?}")))?;
                if comps.len() != moduli.len()
                    || comps.iter().zip(moduli).any(|(&c, &m)| c >= m)
                {
                    return Err(KlinError::InvalidSpec(format!(
                        "element literal {s:?} out of range"
                    )));
                }
                Ok(self.from_components(&comps))
            }
        }
    }

    pub fn elem_string(&self, e: Elem) -> String {
        match &self.kind {
            GroupKind::PrimeField { .. } => e.0.to_string(),
            GroupKind::ExtensionField { .. } => self
                .ext_digits(e)
                .iter()
                .map(|d| char::from_digit(*d as u32, 10).unwrap())
                .collect(),
            GroupKind::AbelianProduct { .. } => {
                let comps = self.components(e);
                comps.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
            }
        }
    }

    // -- canonical prime-power decomposition and quotients ---------------------

    /// Prime-power cyclic factors of an Abelian product, sorted by decreasing
    /// prime then decreasing exponent. Each factor records which original
    /// component it came from.
    pub fn canonical_factors(&self) -> Vec<PrimePowerFactor> {
        let moduli = match &self.kind {
            GroupKind::AbelianProduct { moduli } => moduli.clone(),
            GroupKind::PrimeField { p } => vec![*p],
            GroupKind::ExtensionField { .. } => {
                panic!("canonical factors are not defined for extension fields")
            }
        };
        let mut factors = Vec::new();
        for (ci, &m) in moduli.iter().enumerate() {
            let mut rem = m;
            let mut d = 2u64;
            while d * d <= rem {
                if rem % d == 0 {
                    let mut pe = 1u64;
                    while rem % d == 0 {
                        pe *= d;
                        rem /= d;
                    }
                    factors.push(PrimePowerFactor { prime: d, power: pe, component: ci });
                }
                d += 1;
            }
            if rem > 1 {
                factors.push(PrimePowerFactor { prime: rem, power: rem, component: ci });
            }
        }
        factors.sort_by(|a, b| b.prime.cmp(&a.prime).then(b.power.cmp(&a.power)));
        factors
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimePowerFactor {
    pub prime: u64,
    pub power: u64,
    pub component: usize,
}

fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            while n % d == 0 {
                n /= d;
            }
            result -= result / d;
        }
        d += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.spec_string())
    }
}

// ---------------------------------------------------------------------------
// Subgroups, thinness, robustness
// ---------------------------------------------------------------------------

impl SubgroupDesc {
    /// Trivial subgroup {0} of the given spec (μ_i = m_i).
    pub fn trivial(spec: &GroupSpec) -> Self {
        let multipliers = spec.moduli().to_vec();
        SubgroupDesc { multipliers, order: 1 }
    }

    /// Full group (μ_i = 1).
    pub fn full(spec: &GroupSpec) -> Self {
        let multipliers = vec![1; spec.moduli().len()];
        SubgroupDesc { multipliers, order: spec.order }
    }
}

/// Representative group H(v) = ⊗_i μ_i Z_{m_i} with μ_i = gcd(m_i, {v_j^{(i)}}),
/// where the gcd over an empty coefficient set is m_i (trivial component).
/// For fields any nonzero coefficient set generates the full group.
pub fn representative_group(spec: &GroupSpec, coeffs: &[Elem]) -> SubgroupDesc {
    let nonzero: Vec<Elem> = coeffs.iter().copied().filter(|e| e.0 != 0).collect();
    if spec.is_field() {
        return if nonzero.is_empty() {
            SubgroupDesc::trivial(spec)
        } else {
            SubgroupDesc::full(spec)
        };
    }
    let moduli = spec.moduli().to_vec();
    let mut multipliers = Vec::with_capacity(moduli.len());
    let mut order = 1u64;
    for (i, &m) in moduli.iter().enumerate() {
        let mut g = m; // gcd with the empty set is the modulus
        for e in &nonzero {
            let c = spec.components(*e)[i];
            g = gcd(g, c.max(0));
            if g == 1 {
                break;
            }
        }
        // gcd(m, 0) = m handled since components may be 0
        multipliers.push(g);
        order *= m / g;
    }
    SubgroupDesc { multipliers, order }
}

/// Thinness λ(v) = |H(v)| / |G| as an exact rational.
pub fn thinness(spec: &GroupSpec, coeffs: &[Elem]) -> Ratio<u64> {
    let h = representative_group(spec, coeffs);
    Ratio::new(h.order, spec.order)
}

/// Robustness of an equation: minimum thinness over all ⌊k/2⌋-subsets of its
/// (formal) coefficient positions. Errors when fewer than ⌊k/2⌋ coefficients
/// are available.
pub fn robustness(spec: &GroupSpec, coeffs: &[Elem], k: usize) -> Result<Ratio<u64>> {
    let half = k / 2;
    if coeffs.len() < half {
        return Err(KlinError::InvalidParams(format!(
            "robustness needs at least {half} coefficients, got {}",
            coeffs.len()
        )));
    }
    let mut best: Option<Ratio<u64>> = None;
    crate::combin::for_each_subset(coeffs.len(), half, |s| {
        let sub: Vec<Elem> = s.iter().map(|&i| coeffs[i as usize]).collect();
        let lam = thinness(spec, &sub);
        best = Some(match best {
            None => lam,
            Some(b) => b.min(lam),
        });
    });
    Ok(best.unwrap_or_else(|| Ratio::new(1, 1)))
}

/// Search for a subgroup H of G with quotient behavior controlled by t:
/// either |G/H| <= t, or G/H is prime of order > t, or t < |G/H| <= t^2 with
/// no thin subgroups. Field specs are returned unchanged.
pub fn find_quotient_subgroup(spec: &GroupSpec, t: u64) -> Result<(SubgroupDesc, QuotientCase)> {
    if spec.is_field() {
        let case = if spec.order <= t {
            QuotientCase::SmallQuotient
        } else {
            QuotientCase::PrimeQuotient
        };
        return Ok((SubgroupDesc::trivial(spec), case));
    }
    if spec.order <= t {
        return Ok((SubgroupDesc::trivial(spec), QuotientCase::SmallQuotient));
    }
    let factors = spec.canonical_factors();
    // A prime factor larger than t yields a prime quotient directly:
    // H keeps every other component whole and quotients one component by p
    // (Z_m / pZ_m ≅ Z_p whenever p | m).
    if factors[0].prime > t {
        let f = factors[0];
        let moduli = spec.moduli();
        let mut multipliers = vec![1u64; moduli.len()];
        multipliers[f.component] = f.prime;
        let order: u64 = moduli
            .iter()
            .zip(&multipliers)
            .map(|(&m, &mu)| m / mu)
            .product();
        return Ok((SubgroupDesc { multipliers, order }, QuotientCase::PrimeQuotient));
    }
    // All primes <= t: scan candidates (m_1, ..., m_{s-1}, p_s^{e'}, 1, ..., 1)
    // written as quotient sizes over the canonical factor chain. Quotient size
    // increases along the chain; take the first candidate reaching t.
    let mut best: Option<(Vec<u64>, u64)> = None; // (canonical multipliers, quotient size)
    let mut prefix: u64 = 1;
    'outer: for (s, f) in factors.iter().enumerate() {
        let mut pe = 1u64;
        loop {
            pe *= f.prime;
            let q = prefix * pe;
            if q >= t {
                let mut mult = Vec::with_capacity(factors.len());
                for (j, fj) in factors.iter().enumerate() {
                    mult.push(if j < s {
                        fj.power
                    } else if j == s {
                        pe
                    } else {
                        1
                    });
                }
                best = Some((mult, q));
                break 'outer;
            }
            if pe == f.power {
                break;
            }
        }
        prefix *= f.power;
    }
    let (canon_mult, q) = best.expect("|G| > t guarantees a candidate");
    // Fold canonical multipliers back into the original components: the
    // multiplier on an original Z_m is the product of the multipliers of its
    // prime-power factors (CRT).
    let moduli = spec.moduli();
    let mut multipliers = vec![1u64; moduli.len()];
    for (f, mu) in factors.iter().zip(&canon_mult) {
        multipliers[f.component] *= mu;
    }
    let order: u64 = moduli.iter().zip(&multipliers).map(|(&m, &mu)| m / mu).product();
    let case = if q <= t { QuotientCase::SmallQuotient } else { QuotientCase::RobustQuotient };
    Ok((SubgroupDesc { multipliers, order }, case))
}

/// Quotient spec G/H for a multiplier-form subgroup: ⊗ Z_{μ_i} over the
/// components with μ_i > 1. A fully trivial quotient is rejected.
pub fn quotient_spec(_spec: &GroupSpec, h: &SubgroupDesc) -> Result<(GroupSpec, Vec<usize>)> {
    let moduli: Vec<u64> = h.multipliers.iter().copied().filter(|&mu| mu > 1).collect();
    let kept: Vec<usize> = h
        .multipliers
        .iter()
        .enumerate()
        .filter(|(_, &mu)| mu > 1)
        .map(|(i, _)| i)
        .collect();
    if moduli.is_empty() {
        return Err(KlinError::InvalidParams(
            "quotient by the full group is trivial".into(),
        ));
    }
    Ok((GroupSpec::abelian_product(moduli)?, kept))
}

/// Project an element of G onto G/H (componentwise mod μ_i over kept components).
pub fn project_elem(spec: &GroupSpec, h: &SubgroupDesc, kept: &[usize], e: Elem) -> Elem {
    let comps = spec.components(e);
    let projected: Vec<u64> = kept.iter().map(|&i| comps[i] % h.multipliers[i]).collect();
    // Re-encode in the quotient's mixed radix.
    let mut acc = 0u64;
    let mut radix = 1u64;
    for (&c, &i) in projected.iter().zip(kept) {
        acc += c * radix;
        radix *= h.multipliers[i];
    }
    Elem(acc)
}

/// Exhaustively enumerate all subgroups of a small Abelian product by closing
/// generator sets (BFS over the subgroup lattice). Intended for |G| <= 64.
pub fn enumerate_subgroups(spec: &GroupSpec) -> Vec<Vec<Elem>> {
    let n = spec.order as usize;
    let close = |gens: &[Elem]| -> Vec<Elem> {
        let mut in_set = vec![false; n];
        in_set[0] = true;
        let mut frontier = vec![Elem(0)];
        while let Some(x) = frontier.pop() {
            for g in gens {
                let y = spec.add(x, *g);
                if !in_set[y.0 as usize] {
                    in_set[y.0 as usize] = true;
                    frontier.push(y);
                }
            }
        }
        (0..n as u64).map(Elem).filter(|e| in_set[e.0 as usize]).collect()
    };
    let mut seen: Vec<Vec<Elem>> = vec![close(&[])];
    let mut queue = vec![vec![]];
    while let Some(gens) = queue.pop() {
        for g in spec.nonzero_elems() {
            let mut next = gens.clone();
            next.push(g);
            let sub = close(&next);
            if !seen.contains(&sub) {
                seen.push(sub);
                queue.push(next);
            }
        }
    }
    seen.sort_by_key(|s| (s.len(), s.iter().map(|e| e.0).collect::<Vec<_>>()));
    seen
}
