//! k-LIN instance model: sparse equations over a domain, seeded generators,
//! exact evaluation, the advantage polynomial, and the line-oriented file
//! format.

use num_complex::Complex64;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Elem, GroupSpec};
use crate::error::{KlinError, Result};

/// Sorted sparse vector over the ambient domain: strictly increasing indices,
/// no stored zeros.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct SparseVec {
    pub n: usize,
    pub entries: Vec<(u32, Elem)>,
}

impl SparseVec {
    pub fn new(n: usize, mut entries: Vec<(u32, Elem)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(KlinError::InvalidParams(format!(
                    "duplicate index {} in sparse vector",
                    w[0].0
                )));
            }
        }
        if entries.iter().any(|&(i, v)| i as usize >= n || v.0 == 0) {
            return Err(KlinError::InvalidParams(
                "sparse vector entry out of range or zero".into(),
            ));
        }
        Ok(SparseVec { n, entries })
    }

    pub fn zero(n: usize) -> Self {
        SparseVec { n, entries: vec![] }
    }

    pub fn wt(&self) -> usize {
        self.entries.len()
    }

    pub fn support(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn get(&self, i: u32) -> Elem {
        self.entries
            .iter()
            .find(|&&(j, _)| j == i)
            .map(|&(_, v)| v)
            .unwrap_or(Elem(0))
    }

    /// Coefficient list in index order.
    pub fn values(&self) -> Vec<Elem> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn scale(&self, spec: &GroupSpec, beta: Elem) -> SparseVec {
        let entries: Vec<(u32, Elem)> = self
            .entries
            .iter()
            .map(|&(i, v)| (i, spec.mul(beta, v)))
            .filter(|&(_, v)| v.0 != 0)
            .collect();
        SparseVec { n: self.n, entries }
    }

    pub fn add(&self, spec: &GroupSpec, other: &SparseVec) -> SparseVec {
        debug_assert_eq!(self.n, other.n);
        let mut entries = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let pick_left = j >= other.entries.len()
                || (i < self.entries.len() && self.entries[i].0 < other.entries[j].0);
            if pick_left {
                entries.push(self.entries[i]);
                i += 1;
            } else if i >= self.entries.len() || other.entries[j].0 < self.entries[i].0 {
                entries.push(other.entries[j]);
                j += 1;
            } else {
                let sum = spec.add(self.entries[i].1, other.entries[j].1);
                if sum.0 != 0 {
                    entries.push((self.entries[i].0, sum));
                }
                i += 1;
                j += 1;
            }
        }
        SparseVec { n: self.n, entries }
    }

    pub fn neg(&self, spec: &GroupSpec) -> SparseVec {
        SparseVec {
            n: self.n,
            entries: self.entries.iter().map(|&(i, v)| (i, spec.neg(v))).collect(),
        }
    }

    pub fn sub(&self, spec: &GroupSpec, other: &SparseVec) -> SparseVec {
        self.add(spec, &other.neg(spec))
    }

    /// `u ⊑ v`: u agrees with v on all of supp(u).
    pub fn is_prefix_of(&self, v: &SparseVec) -> bool {
        self.entries.iter().all(|&(i, val)| v.get(i) == val)
    }

    /// Restriction to an index set (sorted).
    pub fn restrict(&self, idxs: &[u32]) -> SparseVec {
        let entries: Vec<(u32, Elem)> = self
            .entries
            .iter()
            .filter(|&&(i, _)| idxs.binary_search(&i).is_ok())
            .copied()
            .collect();
        SparseVec { n: self.n, entries }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Equation {
    pub lhs: SparseVec,
    pub rhs: Elem,
}

/// A k-LIN instance: ordered multiset of equations over a fixed domain. The
/// equation order is the canonical identity of the instance; decompositions
/// reference equations by position.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct KLinInstance {
    pub spec: GroupSpec,
    pub n: usize,
    pub k: usize,
    pub equations: Vec<Equation>,
    pub provenance: String,
}

impl KLinInstance {
    pub fn new(spec: GroupSpec, n: usize, k: usize, equations: Vec<Equation>) -> Result<Self> {
        for (pos, eq) in equations.iter().enumerate() {
            if eq.lhs.n != n {
                return Err(KlinError::InvalidParams(format!(
                    "equation {pos} has ambient size {} != {n}",
                    eq.lhs.n
                )));
            }
            if eq.lhs.wt() > k {
                return Err(KlinError::InvalidParams(format!(
                    "equation {pos} has weight {} > k={k}",
                    eq.lhs.wt()
                )));
            }
        }
        Ok(KLinInstance { spec, n, k, equations, provenance: String::new() })
    }

    pub fn m(&self) -> usize {
        self.equations.len()
    }

    /// Exact satisfied fraction at a dense assignment.
    pub fn val_at(&self, x: &[Elem]) -> Result<Ratio<u64>> {
        if x.len() != self.n {
            return Err(KlinError::DomainMismatch(format!(
                "assignment has {} coordinates, instance has {}",
                x.len(),
                self.n
            )));
        }
        let sat = self.count_satisfied(x);
        Ok(Ratio::new(sat, self.m() as u64))
    }

    pub fn count_satisfied(&self, x: &[Elem]) -> u64 {
        let spec = &self.spec;
        self.equations
            .iter()
            .filter(|eq| {
                let mut acc = Elem(0);
                for &(i, v) in &eq.lhs.entries {
                    acc = spec.add(acc, spec.mul(v, x[i as usize]));
                }
                acc == eq.rhs
            })
            .count() as u64
    }

    /// Exhaustive maximum over all assignments, with the lexicographically
    /// first maximizer. Errors when |G|^n exceeds the cap.
    pub fn brute_force_val(&self, cap: u128) -> Result<(Ratio<u64>, Vec<Elem>)> {
        let total = (self.spec.order as u128)
            .checked_pow(self.n as u32)
            .ok_or_else(|| KlinError::ResourceCap("assignment space overflows".into()))?;
        if total > cap {
            return Err(KlinError::ResourceCap(format!(
                "|G|^n = {total} exceeds brute-force cap {cap}"
            )));
        }
        let mut best = 0u64;
        let mut best_x = vec![Elem(0); self.n];
        let mut x = vec![Elem(0); self.n];
        loop {
            let sat = self.count_satisfied(&x);
            if sat > best {
                best = sat;
                best_x = x.clone();
            }
            // lexicographic successor with the last coordinate fastest
            let mut pos = self.n;
            loop {
                if pos == 0 {
                    return Ok((Ratio::new(best, self.m() as u64), best_x));
                }
                pos -= 1;
                if x[pos].0 + 1 < self.spec.order {
                    x[pos].0 += 1;
                    for xi in x.iter_mut().skip(pos + 1) {
                        *xi = Elem(0);
                    }
                    break;
                }
            }
        }
    }

    /// Advantage polynomial Φ(x): the character-sum deviation of the satisfied
    /// fraction from 1/|G|; `val_at(x) = 1/|G| + Re Φ(x)` exactly.
    pub fn phi_advantage(&self, x: &[Elem]) -> Complex64 {
        let spec = &self.spec;
        let mut sum = Complex64::new(0.0, 0.0);
        for eq in &self.equations {
            for beta in spec.nonzero_elems() {
                // χ_β(b_v) · conj(χ_{βv}(x))
                let mut ph = spec.character(beta, eq.rhs);
                for &(i, v) in &eq.lhs.entries {
                    let c = spec.character(spec.mul(beta, v), x[i as usize]);
                    ph = spec.phase_mul(ph, spec.phase_conj(c));
                }
                sum += spec.phase_to_complex(ph);
            }
        }
        sum / (self.m() as f64 * spec.order as f64)
    }

    // -- text format ----------------------------------------------------------

    pub fn serialize_text(&self) -> String {
        let mut out = String::new();
        out.push_str("klin v1\n");
        out.push_str(&format!("group: {}\n", self.spec.spec_string()));
        out.push_str(&format!("n: {}\n", self.n));
        out.push_str(&format!("k: {}\n", self.k));
        for eq in &self.equations {
            let lhs: Vec<String> = eq
                .lhs
                .entries
                .iter()
                .map(|&(i, v)| format!("{}:{}", i, self.spec.elem_string(v)))
                .collect();
            out.push_str(&format!("{} = {}\n", lhs.join(" "), self.spec.elem_string(eq.rhs)));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter_map(|(ln, raw)| {
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                None
            } else {
                Some((ln + 1, s.to_string()))
            }
        });
        let perr = |line: usize, reason: &str| KlinError::Parse { line, reason: reason.into() };

        let (ln, header) =
            lines.next().ok_or_else(|| perr(1, "empty file"))?;
        if header != "klin v1" {
            return Err(perr(ln, "expected header 'klin v1'"));
        }
        let (ln, group) = lines.next().ok_or_else(|| perr(ln, "missing group line"))?;
        let spec_str = group
            .strip_prefix("group:")
            .ok_or_else(|| perr(ln, "expected 'group: <domain>'"))?;
        let spec = GroupSpec::parse(spec_str)
            .map_err(|e| perr(ln, &e.to_string()))?;
        let (ln, nline) = lines.next().ok_or_else(|| perr(ln, "missing n line"))?;
        let n: usize = nline
            .strip_prefix("n:")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| perr(ln, "expected 'n: <int>'"))?;
        let (ln, kline) = lines.next().ok_or_else(|| perr(ln, "missing k line"))?;
        let k: usize = kline
            .strip_prefix("k:")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| perr(ln, "expected 'k: <int>'"))?;

        let mut equations = Vec::new();
        for (ln, line) in lines {
            let (lhs_str, rhs_str) = line
                .split_once('=')
                .ok_or_else(|| perr(ln, "equation line must contain '='"))?;
            let rhs = spec
                .parse_elem(rhs_str.trim())
                .map_err(|e| perr(ln, &e.to_string()))?;
            let mut entries = Vec::new();
            for tok in lhs_str.split_whitespace() {
                let (idx_str, val_str) = tok
                    .split_once(':')
                    .ok_or_else(|| perr(ln, "lhs term must be index:value"))?;
                let idx: u32 = idx_str
                    .parse()
                    .map_err(|_| perr(ln, "bad index"))?;
                if idx as usize >= n {
                    return Err(perr(ln, &format!("index {idx} >= n = {n}")));
                }
                let val = spec
                    .parse_elem(val_str)
                    .map_err(|e| perr(ln, &e.to_string()))?;
                if val.0 == 0 {
                    return Err(perr(ln, "zero coefficient is not allowed"));
                }
                entries.push((idx, val));
            }
            let lhs = SparseVec::new(n, entries).map_err(|e| perr(ln, &e.to_string()))?;
            if lhs.wt() > k {
                return Err(perr(ln, &format!("equation weight {} > k = {k}", lhs.wt())));
            }
            equations.push(Equation { lhs, rhs });
        }
        KLinInstance::new(spec, n, k, equations)
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Random instance: supports uniform over k-subsets, coefficients uniform over
/// nonzero elements, right-hand sides uniform over the whole domain.
pub fn gen_random(
    spec: &GroupSpec,
    n: usize,
    k: usize,
    m: usize,
    seed: u64,
) -> Result<KLinInstance> {
    if k > n || m == 0 {
        return Err(KlinError::InvalidParams(format!("need k <= n and m >= 1, got k={k} n={n} m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut equations = Vec::with_capacity(m);
    for _ in 0..m {
        let lhs = random_sparse_lhs(spec, n, k, &mut rng);
        let rhs = Elem(rng.gen_range(0..spec.order));
        equations.push(Equation { lhs, rhs });
    }
    let mut inst = KLinInstance::new(spec.clone(), n, k, equations)?;
    inst.provenance = format!("random seed={seed}");
    Ok(inst)
}

fn random_sparse_lhs(spec: &GroupSpec, n: usize, k: usize, rng: &mut ChaCha8Rng) -> SparseVec {
    let mut idxs: Vec<u32> = (0..n as u32).collect();
    idxs.shuffle(rng);
    let mut support: Vec<u32> = idxs[..k].to_vec();
    support.sort_unstable();
    let entries: Vec<(u32, Elem)> = support
        .into_iter()
        .map(|i| (i, Elem(rng.gen_range(1..spec.order))))
        .collect();
    SparseVec { n, entries }
}

/// Left-hand-side source for semirandom generation.
pub enum LhsSource<'a> {
    /// Take the lhs vectors of an existing instance verbatim.
    Instance(&'a KLinInstance),
    /// Adversarial clustered pattern: supports uniform inside the first
    /// `window` coordinates.
    Cluster { n: usize, k: usize, m: usize, window: usize },
}

/// Semirandom instance: the given left-hand sides with freshly random
/// right-hand sides.
pub fn gen_semirandom(source: LhsSource<'_>, spec: &GroupSpec, seed: u64) -> Result<KLinInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, k, lhs_list) = match source {
        LhsSource::Instance(inst) => {
            if inst.spec != *spec {
                return Err(KlinError::DomainMismatch(
                    "lhs source domain differs from requested domain".into(),
                ));
            }
            (inst.n, inst.k, inst.equations.iter().map(|e| e.lhs.clone()).collect::<Vec<_>>())
        }
        LhsSource::Cluster { n, k, m, window } => {
            if window < k || window > n {
                return Err(KlinError::InvalidParams(format!(
                    "cluster window must satisfy k <= window <= n, got {window}"
                )));
            }
            let mut list = Vec::with_capacity(m);
            for _ in 0..m {
                let mut idxs: Vec<u32> = (0..window as u32).collect();
                idxs.shuffle(&mut rng);
                let mut support: Vec<u32> = idxs[..k].to_vec();
                support.sort_unstable();
                let entries: Vec<(u32, Elem)> = support
                    .into_iter()
                    .map(|i| (i, Elem(rng.gen_range(1..spec.order))))
                    .collect();
                list.push(SparseVec { n, entries });
            }
            (n, k, list)
        }
    };
    let equations: Vec<Equation> = lhs_list
        .into_iter()
        .map(|lhs| Equation { lhs, rhs: Elem(rng.gen_range(0..spec.order)) })
        .collect();
    let mut inst = KLinInstance::new(spec.clone(), n, k, equations)?;
    inst.provenance = format!("semirandom seed={seed}");
    Ok(inst)
}

/// All assignments in G^n in lexicographic order (first coordinate slowest).
pub fn all_assignments(spec: &GroupSpec, n: usize) -> impl Iterator<Item = Vec<Elem>> + '_ {
    let order = spec.order;
    let total = (order as u128).pow(n as u32);
    (0..total).map(move |mut code| {
        let mut x = vec![Elem(0); n];
        for xi in x.iter_mut().rev() {
            *xi = Elem((code % order as u128) as u64);
            code /= order as u128;
        }
        x
    })
}
