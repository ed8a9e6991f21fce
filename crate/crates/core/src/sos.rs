//! Max-entropy pseudo-expectations for k-LIN over a field: construction by
//! degree-bounded closure, exact and spectral verification, reduction to
//! indicator (Boolean) moments, the expansion predicate, and the exhaustive
//! refutation oracle.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Elem, GroupSpec, Phase};
use crate::combin::{binomial, for_each_subset};
use crate::error::{KlinError, Result};
use crate::instance::{KLinInstance, SparseVec};

pub const DEFAULT_ENTRY_CAP: usize = 1 << 20;

/// One closure step: entry `child` was set from Ẽ[u]·conj(Ẽ[v]).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivationStep {
    pub child: SparseVec,
    pub u: SparseVec,
    pub v: SparseVec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PeStatus {
    Complete,
    /// Two derivations disagreed at this representative vector.
    Inconsistent { at: SparseVec },
}

/// A partial map from representative vectors to unit-modulus phases, seeded by
/// the instance constraints and closed under degree-bounded differences.
/// Absent entries are zero.
#[derive(Clone, Debug)]
pub struct PseudoExpectation {
    pub spec: GroupSpec,
    pub n: usize,
    pub degree: usize,
    pub entries: HashMap<SparseVec, Phase>,
    /// Insertion order of `entries`, for deterministic scans.
    pub order: Vec<SparseVec>,
    pub derivations: Vec<DerivationStep>,
    pub status: PeStatus,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ClosureOrder {
    Fifo,
    Lifo,
}

impl PseudoExpectation {
    pub fn get(&self, v: &SparseVec) -> Option<Phase> {
        self.entries.get(v).copied()
    }

    pub fn is_complete(&self) -> bool {
        self.status == PeStatus::Complete
    }

    /// Dump format: one `repvec-sparse => exponent-tuple` line per defined
    /// entry (the zero vector prints as `-`), preceded by a header.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "pe v1 domain={} n={} d={}\n",
            self.spec.spec_string(),
            self.n,
            self.degree
        );
        for v in &self.order {
            let ph = self.entries[v];
            let lhs = if v.wt() == 0 {
                "-".to_string()
            } else {
                v.entries
                    .iter()
                    .map(|&(i, val)| format!("{}:{}", i, self.spec.elem_string(val)))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let exps: Vec<String> =
                self.spec.phase_exponents(ph).iter().map(|e| e.to_string()).collect();
            out.push_str(&format!("{} => {}\n", lhs, exps.join(",")));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| KlinError::Parse { line: 1, reason: "empty dump".into() })?;
        let mut domain = None;
        let mut n = None;
        let mut d = None;
        for tok in header.split_whitespace().skip(2) {
            if let Some(v) = tok.strip_prefix("domain=") {
                domain = Some(v.to_string());
            } else if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse().ok();
            } else if let Some(v) = tok.strip_prefix("d=") {
                d = v.parse().ok();
            }
        }
        // the domain string itself may contain spaces (extension fields); fall
        // back to re-scanning the header
        let header_rest = header.strip_prefix("pe v1 ").unwrap_or(header);
        let domain = match domain {
            Some(dm) if !dm.contains(' ') && header_rest.starts_with("domain=") => dm,
            _ => {
                let start = header.find("domain=").ok_or_else(|| KlinError::Parse {
                    line: 1,
                    reason: "missing domain".into(),
                })? + "domain=".len();
                let end = header.find(" n=").ok_or_else(|| KlinError::Parse {
                    line: 1,
                    reason: "missing n".into(),
                })?;
                header[start..end].to_string()
            }
        };
        let spec = GroupSpec::parse(&domain)?;
        let n = n.ok_or_else(|| KlinError::Parse { line: 1, reason: "missing n".into() })?;
        let d = d.ok_or_else(|| KlinError::Parse { line: 1, reason: "missing d".into() })?;
        let mut entries = HashMap::new();
        let mut order = Vec::new();
        for (ln, line) in lines.enumerate() {
            let (lhs, rhs) = line.split_once("=>").ok_or_else(|| KlinError::Parse {
                line: ln + 2,
                reason: "expected '=>'".into(),
            })?;
            let lhs = lhs.trim();
            let vec = if lhs == "-" {
                SparseVec::zero(n)
            } else {
                let mut ents = Vec::new();
                for tok in lhs.split_whitespace() {
                    let (i, val) = tok.split_once(':').ok_or_else(|| KlinError::Parse {
                        line: ln + 2,
                        reason: "expected index:value".into(),
                    })?;
                    let idx: u32 = i.parse().map_err(|_| KlinError::Parse {
                        line: ln + 2,
                        reason: "bad index".into(),
                    })?;
                    ents.push((idx, spec.parse_elem(val)?));
                }
                SparseVec::new(n, ents)?
            };
            let exps: Vec<u64> = rhs
                .trim()
                .split(',')
                .map(|t| t.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| KlinError::Parse { line: ln + 2, reason: "bad exponent".into() })?;
            let ph = spec.phase_from_exponents(&exps);
            entries.insert(vec.clone(), ph);
            order.push(vec);
        }
        Ok(PseudoExpectation {
            spec,
            n,
            degree: d,
            entries,
            order,
            derivations: vec![],
            status: PeStatus::Complete,
        })
    }
}

/// Max-entropy construction: seed the constraint phases Ẽ[y_{βv}] = χ_β(b_v),
/// then close under Ẽ[y_{U-V}] = Ẽ[y_U]·conj(Ẽ[y_V]) for differences of
/// weight at most d. A disagreement between two derivations surfaces as
/// `PeStatus::Inconsistent`.
pub fn build_max_entropy(inst: &KLinInstance, d: usize) -> Result<PseudoExpectation> {
    build_max_entropy_with_order(inst, d, ClosureOrder::Fifo, DEFAULT_ENTRY_CAP)
}

pub fn build_max_entropy_with_order(
    inst: &KLinInstance,
    d: usize,
    order_kind: ClosureOrder,
    entry_cap: usize,
) -> Result<PseudoExpectation> {
    let spec = &inst.spec;
    if !spec.is_field() {
        return Err(KlinError::DomainMismatch(
            "pseudo-expectations are constructed over field domains".into(),
        ));
    }
    if d < inst.k {
        return Err(KlinError::InvalidParams(format!(
            "degree {d} is below the arity {}",
            inst.k
        )));
    }
    let mut pe = PseudoExpectation {
        spec: spec.clone(),
        n: inst.n,
        degree: d,
        entries: HashMap::new(),
        order: Vec::new(),
        derivations: Vec::new(),
        status: PeStatus::Complete,
    };
    let zero = SparseVec::zero(inst.n);
    pe.entries.insert(zero.clone(), spec.phase_one());
    pe.order.push(zero);

    let mut queue: VecDeque<SparseVec> = VecDeque::new();
    let insert = |pe: &mut PseudoExpectation,
                      queue: &mut VecDeque<SparseVec>,
                      vec: SparseVec,
                      ph: Phase|
     -> Result<bool> {
        match pe.entries.get(&vec) {
            Some(&old) if old == ph => Ok(false),
            Some(_) => {
                pe.status = PeStatus::Inconsistent { at: vec };
                Ok(false)
            }
            None => {
                if pe.entries.len() >= entry_cap {
                    return Err(KlinError::ResourceCap(format!(
                        "pseudo-expectation exceeded {entry_cap} entries"
                    )));
                }
                pe.entries.insert(vec.clone(), ph);
                pe.order.push(vec.clone());
                queue.push_back(vec);
                Ok(true)
            }
        }
    };

    // seed the constraint phases
    for eq in &inst.equations {
        for beta in spec.nonzero_elems() {
            let w = eq.lhs.scale(spec, beta);
            let ph = spec.character(beta, eq.rhs);
            insert(&mut pe, &mut queue, w, ph)?;
            if pe.status != PeStatus::Complete {
                return Ok(pe);
            }
        }
    }

    // fixed-point closure over pairs of defined entries
    while let Some(w) = match order_kind {
        ClosureOrder::Fifo => queue.pop_front(),
        ClosureOrder::Lifo => queue.pop_back(),
    } {
        let ph_w = pe.entries[&w];
        let snapshot: Vec<SparseVec> = pe.order.clone();
        for u in snapshot {
            let ph_u = pe.entries[&u];
            for (a, pa, b, pb) in [(&u, ph_u, &w, ph_w), (&w, ph_w, &u, ph_u)] {
                let diff = a.sub(spec, b);
                if diff.wt() > d {
                    continue;
                }
                let ph = spec.phase_mul(pa, spec.phase_conj(pb));
                let fresh = insert(&mut pe, &mut queue, diff.clone(), ph)?;
                if fresh {
                    pe.derivations.push(DerivationStep { child: diff, u: a.clone(), v: b.clone() });
                }
                if pe.status != PeStatus::Complete {
                    return Ok(pe);
                }
            }
        }
    }
    Ok(pe)
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub normalization_ok: bool,
    pub conjugation_ok: bool,
    pub derivations_replay_ok: bool,
    pub validity_spot_ok: bool,
    pub consistency_spot_ok: bool,
    pub equivalence_ok: bool,
    pub objective_ok: bool,
    pub class_count: usize,
    pub min_eigenvalue: f64,
    pub rank_one_max_residual: f64,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.normalization_ok
            && self.conjugation_ok
            && self.derivations_replay_ok
            && self.validity_spot_ok
            && self.consistency_spot_ok
            && self.equivalence_ok
            && self.objective_ok
            && self.min_eigenvalue >= -1e-8
            && self.rank_one_max_residual <= 1e-8
    }
}

/// Full verification of a complete pseudo-expectation against its instance:
/// exact normalization, conjugation and constraint phases, derivation replay,
/// representative-arithmetic spot checks, and per-class moment-matrix
/// positivity with the rank-one factorization.
pub fn verify_pe(pe: &PseudoExpectation, inst: &KLinInstance, spot_seed: u64) -> Result<VerifyReport> {
    if !pe.is_complete() {
        return Err(KlinError::InvalidParams(
            "only complete pseudo-expectations can be verified".into(),
        ));
    }
    let spec = &pe.spec;
    let zero = SparseVec::zero(pe.n);
    let normalization_ok = pe.get(&zero) == Some(spec.phase_one());

    let conjugation_ok = pe.order.iter().all(|w| {
        let neg = w.neg(spec);
        pe.get(&neg) == Some(spec.phase_conj(pe.entries[w]))
    });

    let derivations_replay_ok = pe.derivations.iter().all(|step| {
        let ph = spec.phase_mul(pe.entries[&step.u], spec.phase_conj(pe.entries[&step.v]));
        pe.get(&step.child) == Some(ph)
    });

    // objective: every constraint phase must be present exactly
    let mut objective_ok = true;
    for eq in &inst.equations {
        for beta in spec.nonzero_elems() {
            let w = eq.lhs.scale(spec, beta);
            if pe.get(&w) != Some(spec.character(beta, eq.rhs)) {
                objective_ok = false;
            }
        }
    }

    // validity / consistency spot checks at the representative level
    let mut rng = ChaCha8Rng::seed_from_u64(spot_seed);
    let p = spec.characteristic();
    let mut validity_spot_ok = true;
    let mut consistency_spot_ok = true;
    for _ in 0..500 {
        // random representative built from up to d coordinates
        let mut acc = SparseVec::zero(pe.n);
        for _ in 0..rng.gen_range(0..=pe.degree.min(pe.n)) {
            let i = rng.gen_range(0..pe.n) as u32;
            let a = Elem(rng.gen_range(0..spec.order));
            let one_term = SparseVec {
                n: pe.n,
                entries: if a.0 == 0 { vec![] } else { vec![(i, a)] },
            };
            acc = acc.add(spec, &one_term);
        }
        let i = rng.gen_range(0..pe.n) as u32;
        let alpha = Elem(rng.gen_range(1..spec.order));
        let beta = Elem(rng.gen_range(1..spec.order));
        // validity: adding p copies of alpha at coordinate i is a no-op
        let mut with_p = acc.clone();
        for _ in 0..p {
            let t = SparseVec { n: pe.n, entries: vec![(i, alpha)] };
            with_p = with_p.add(spec, &t);
        }
        if with_p != acc {
            validity_spot_ok = false;
        }
        // consistency: y_{i,alpha}·conj(y_{i,beta}) contributes alpha - beta
        let diff = spec.sub(alpha, beta);
        let lhs = {
            let t1 = SparseVec { n: pe.n, entries: vec![(i, alpha)] };
            let t2 = SparseVec { n: pe.n, entries: vec![(i, beta)] };
            acc.add(spec, &t1).sub(spec, &t2)
        };
        let rhs = {
            let t = SparseVec {
                n: pe.n,
                entries: if diff.0 == 0 { vec![] } else { vec![(i, diff)] },
            };
            acc.add(spec, &t)
        };
        if lhs != rhs {
            consistency_spot_ok = false;
        }
    }

    // equivalence classes over entries of weight <= d/2
    let half: Vec<&SparseVec> =
        pe.order.iter().filter(|v| v.wt() <= pe.degree / 2).collect();
    let related = |a: &SparseVec, b: &SparseVec| pe.get(&a.sub(spec, b)).is_some();
    let mut class_of: Vec<usize> = (0..half.len()).collect();
    for i in 0..half.len() {
        for j in 0..i {
            if class_of[j] == j && related(half[i], half[j]) {
                class_of[i] = j;
                break;
            }
        }
    }
    // exhaustive relation sanity: reflexive, symmetric, transitive
    let mut equivalence_ok = true;
    for (i, &a) in half.iter().enumerate() {
        if !related(a, a) {
            equivalence_ok = false;
        }
        for &b in half.iter().skip(i + 1) {
            if related(a, b) != related(b, a) {
                equivalence_ok = false;
            }
        }
    }
    for &a in &half {
        for &b in &half {
            for &c in &half {
                if related(a, b) && related(b, c) && !related(a, c) {
                    equivalence_ok = false;
                }
            }
        }
    }

    // per-class moment matrices: positive semidefinite and rank one
    let mut classes: HashMap<usize, Vec<&SparseVec>> = HashMap::new();
    for (i, &v) in half.iter().enumerate() {
        classes.entry(class_of[i]).or_default().push(v);
    }
    let mut min_eigenvalue = f64::INFINITY;
    let mut rank_one_max_residual: f64 = 0.0;
    for (_, members) in classes.iter() {
        let s = members.len();
        let mut moment = DMatrix::<Complex64>::zeros(s, s);
        for (a, &ua) in members.iter().enumerate() {
            for (b, &ub) in members.iter().enumerate() {
                let ph = pe
                    .get(&ua.sub(spec, ub))
                    .expect("entries of one class must have defined differences");
                moment[(a, b)] = spec.phase_to_complex(ph);
            }
        }
        let eig = moment.clone().symmetric_eigen();
        for ev in eig.eigenvalues.iter() {
            min_eigenvalue = min_eigenvalue.min(*ev);
        }
        // rank-one structure: M = w w† with w_u = Ẽ[y_{u - w0}]
        let w0 = members[0];
        let w: Vec<Complex64> = members
            .iter()
            .map(|&u| spec.phase_to_complex(pe.get(&u.sub(spec, w0)).unwrap()))
            .collect();
        let mut frob = 0.0f64;
        for a in 0..s {
            for b in 0..s {
                frob += (moment[(a, b)] - w[a] * w[b].conj()).norm_sqr();
            }
        }
        rank_one_max_residual = rank_one_max_residual.max(frob.sqrt());
    }
    if !min_eigenvalue.is_finite() {
        min_eigenvalue = 1.0; // no classes at all
    }

    Ok(VerifyReport {
        normalization_ok,
        conjugation_ok,
        derivations_replay_ok,
        validity_spot_ok,
        consistency_spot_ok,
        equivalence_ok,
        objective_ok,
        class_count: classes.len(),
        min_eigenvalue,
        rank_one_max_residual,
    })
}

// ---------------------------------------------------------------------------
// Boolean (indicator) reduction
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BooleanReport {
    pub booleanity_ok: bool,
    pub sum_rule_ok: bool,
    pub realness_ok: bool,
    pub objective: f64,
}

impl BooleanReport {
    pub fn ok(&self) -> bool {
        self.booleanity_ok
            && self.sum_rule_ok
            && self.realness_ok
            && (self.objective - 1.0).abs() <= 1e-9
    }
}

/// Indicator moment Ẽ'[∏_{i∈S} x_{i,a_i}]: expand each indicator through the
/// character sum and read the resulting representative vectors off the
/// complex pseudo-expectation.
pub fn boolean_moment(pe: &PseudoExpectation, monomial: &[(u32, Elem)]) -> Complex64 {
    let spec = &pe.spec;
    let s = monomial.len();
    let order = spec.order;
    let total = (order as u128).pow(s as u32);
    let mut acc = Complex64::new(0.0, 0.0);
    for code in 0..total {
        let mut c = code;
        let mut rep = SparseVec::zero(pe.n);
        let mut ph = spec.phase_one();
        for &(i, alpha) in monomial {
            let w = Elem((c % order as u128) as u64);
            c /= order as u128;
            if w.0 != 0 {
                // ω_p^{-Tr(w α)} · y_{i, w}
                let chi = spec.character(w, alpha);
                ph = spec.phase_mul(ph, spec.phase_conj(chi));
                let t = SparseVec { n: pe.n, entries: vec![(i, w)] };
                rep = rep.add(spec, &t);
            }
        }
        if let Some(val) = pe.get(&rep) {
            acc += spec.phase_to_complex(ph) * spec.phase_to_complex(val);
        }
    }
    acc / (order as f64).powi(s as i32)
}

/// Reduce a complete pseudo-expectation to indicator moments of degree <= d
/// and check booleanity, the per-coordinate sum rule, realness, and the
/// instance objective.
pub fn to_boolean_pe(pe: &PseudoExpectation, inst: &KLinInstance, d: usize) -> Result<BooleanReport> {
    if !pe.is_complete() {
        return Err(KlinError::InvalidParams("the pseudo-expectation must be complete".into()));
    }
    if pe.degree < d {
        return Err(KlinError::InvalidParams(format!(
            "degree shortfall: reduction at degree {d} needs a basis of degree >= {d}, have {}",
            pe.degree
        )));
    }
    let spec = &pe.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // sum rule: for sampled monomials P and coordinates i,
    // Σ_α Ẽ'[P·x_{i,α}] = Ẽ'[P]
    let mut sum_rule_ok = true;
    let mut realness_ok = true;
    for _ in 0..40 {
        let deg = rng.gen_range(0..d.min(pe.n));
        let mut idxs: Vec<u32> = (0..pe.n as u32).collect();
        for j in (1..idxs.len()).rev() {
            idxs.swap(j, rng.gen_range(0..=j));
        }
        let mono: Vec<(u32, Elem)> = idxs[..deg]
            .iter()
            .map(|&i| (i, Elem(rng.gen_range(0..spec.order))))
            .collect();
        let base = boolean_moment(pe, &mono);
        if base.im.abs() > 1e-9 {
            realness_ok = false;
        }
        let i = rng.gen_range(0..pe.n) as u32;
        let mut sum = Complex64::new(0.0, 0.0);
        for alpha in spec.elems() {
            let mut ext = mono.clone();
            ext.push((i, alpha));
            sum += boolean_moment(pe, &ext);
        }
        if (sum - base).norm() > 1e-9 {
            sum_rule_ok = false;
        }
    }

    // booleanity: a repeated variable collapses to its multilinear image;
    // check by expanding the square explicitly
    let mut booleanity_ok = true;
    for _ in 0..20 {
        let i = rng.gen_range(0..pe.n) as u32;
        let alpha = Elem(rng.gen_range(0..spec.order));
        let squared = boolean_moment_with_repeat(pe, i, alpha);
        let collapsed = boolean_moment(pe, &[(i, alpha)]);
        if (squared - collapsed).norm() > 1e-9 {
            booleanity_ok = false;
        }
    }

    // objective: sum the moments of all satisfying patterns per equation
    let mut objective = 0.0f64;
    for eq in &inst.equations {
        let sup = eq.lhs.support();
        let kk = sup.len();
        let total = (spec.order as u128).pow(kk as u32);
        for code in 0..total {
            let mut c = code;
            let mut assign: Vec<(u32, Elem)> = Vec::with_capacity(kk);
            let mut acc = Elem(0);
            for &i in &sup {
                let a = Elem((c % spec.order as u128) as u64);
                c /= spec.order as u128;
                acc = spec.add(acc, spec.mul(eq.lhs.get(i), a));
                assign.push((i, a));
            }
            if acc == eq.rhs {
                let v = boolean_moment(pe, &assign);
                if v.im.abs() > 1e-9 {
                    realness_ok = false;
                }
                objective += v.re;
            }
        }
    }
    objective /= inst.m() as f64;

    Ok(BooleanReport { booleanity_ok, sum_rule_ok, realness_ok, objective })
}

/// Ẽ'[x_{i,α}²] by direct expansion of the squared indicator.
fn boolean_moment_with_repeat(pe: &PseudoExpectation, i: u32, alpha: Elem) -> Complex64 {
    let spec = &pe.spec;
    let order = spec.order;
    let mut acc = Complex64::new(0.0, 0.0);
    for w1 in 0..order {
        for w2 in 0..order {
            let mut rep = SparseVec::zero(pe.n);
            let mut ph = spec.phase_one();
            for w in [Elem(w1), Elem(w2)] {
                if w.0 != 0 {
                    let chi = spec.character(w, alpha);
                    ph = spec.phase_mul(ph, spec.phase_conj(chi));
                    let t = SparseVec { n: pe.n, entries: vec![(i, w)] };
                    rep = rep.add(spec, &t);
                }
            }
            if let Some(val) = pe.get(&rep) {
                acc += spec.phase_to_complex(ph) * spec.phase_to_complex(val);
            }
        }
    }
    acc / (order as f64 * order as f64)
}

// ---------------------------------------------------------------------------
// Expansion predicate and refutation oracle
// ---------------------------------------------------------------------------

/// True iff every nonempty subset of at most `l` vectors and every nonzero
/// coefficient choice combines to a vector of weight > beta·|V|. On failure
/// the violating subset and coefficients are returned.
pub fn expansion_check(
    spec: &GroupSpec,
    vectors: &[SparseVec],
    l: usize,
    beta: f64,
    cap: u128,
) -> Result<(bool, Option<(Vec<u32>, Vec<Elem>)>)> {
    if !spec.is_field() {
        return Err(KlinError::DomainMismatch("expansion runs over fields".into()));
    }
    let units = spec.units() as u128;
    let mut work: u128 = 0;
    for s in 1..=l.min(vectors.len()) {
        work = work.saturating_add(
            binomial(vectors.len() as u64, s as u64).saturating_mul(units.pow(s as u32)),
        );
    }
    if work > cap {
        return Err(KlinError::ResourceCap(format!(
            "expansion check needs {work} combinations, cap is {cap}"
        )));
    }
    let n = vectors.first().map(|v| v.n).unwrap_or(0);
    for s in 1..=l.min(vectors.len()) {
        let mut witness: Option<(Vec<u32>, Vec<Elem>)> = None;
        for_each_subset(vectors.len(), s, |subset| {
            if witness.is_some() {
                return;
            }
            // weight is scale-invariant, so the first coefficient is pinned
            let combos = units.pow((s - 1) as u32);
            for code in 0..combos {
                let mut coeffs = vec![Elem(1)];
                let mut c = code;
                for _ in 1..s {
                    coeffs.push(Elem((c % units) as u64 + 1));
                    c /= units;
                }
                let mut acc = SparseVec::zero(n);
                for (&pos, &a) in subset.iter().zip(&coeffs) {
                    acc = acc.add(spec, &vectors[pos as usize].scale(spec, a));
                }
                if (acc.wt() as f64) <= beta * s as f64 {
                    witness = Some((subset.to_vec(), coeffs));
                    return;
                }
            }
        });
        if let Some(w) = witness {
            return Ok((false, Some(w)));
        }
    }
    Ok((true, None))
}

/// A refutation witness: coefficients with Σ α_v·v = 0 and Σ α_v·b_v ≠ 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refutation {
    pub terms: Vec<(u32, Elem)>,
    pub rhs_combination: Elem,
}

/// Smallest refutation by exhaustive search, or definitive `None`.
pub fn find_refutation_exhaustive(
    inst: &KLinInstance,
    max_size: usize,
    cap: u128,
) -> Result<Option<Refutation>> {
    let spec = &inst.spec;
    if !spec.is_field() {
        return Err(KlinError::DomainMismatch("refutation search runs over fields".into()));
    }
    let m = inst.m();
    let units = spec.units() as u128;
    let mut work: u128 = 0;
    for s in 2..=max_size.min(m) {
        work = work
            .saturating_add(binomial(m as u64, s as u64).saturating_mul(units.pow(s as u32)));
    }
    if work > cap {
        return Err(KlinError::ResourceCap(format!(
            "refutation search needs {work} combinations, cap is {cap}"
        )));
    }
    for s in 2..=max_size.min(m) {
        let mut found: Option<Refutation> = None;
        for_each_subset(m, s, |subset| {
            if found.is_some() {
                return;
            }
            let combos = units.pow((s - 1) as u32);
            for code in 0..combos {
                let mut coeffs = vec![Elem(1)];
                let mut c = code;
                for _ in 1..s {
                    coeffs.push(Elem((c % units) as u64 + 1));
                    c /= units;
                }
                let mut acc = SparseVec::zero(inst.n);
                let mut rhs = Elem(0);
                for (&pos, &a) in subset.iter().zip(&coeffs) {
                    let eq = &inst.equations[pos as usize];
                    acc = acc.add(spec, &eq.lhs.scale(spec, a));
                    rhs = spec.add(rhs, spec.mul(a, eq.rhs));
                }
                if acc.wt() == 0 && rhs.0 != 0 {
                    found = Some(Refutation {
                        terms: subset.iter().zip(&coeffs).map(|(&p, &a)| (p, a)).collect(),
                        rhs_combination: rhs,
                    });
                    return;
                }
            }
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Exhaustive multi-valued derivation simulation: saturate the closure while
/// tracking every derivable phase per representative vector. Returns true iff
/// some vector acquires two phases, which is exactly when the single-valued
/// builder must error.
pub fn simulate_derivation_conflict(inst: &KLinInstance, d: usize, entry_cap: usize) -> Result<bool> {
    let spec = &inst.spec;
    if !spec.is_field() {
        return Err(KlinError::DomainMismatch("derivation simulation runs over fields".into()));
    }
    let mut table: HashMap<SparseVec, HashSet<Phase>> = HashMap::new();
    let zero = SparseVec::zero(inst.n);
    table.insert(zero, HashSet::from([spec.phase_one()]));
    for eq in &inst.equations {
        for beta in spec.nonzero_elems() {
            let w = eq.lhs.scale(spec, beta);
            table.entry(w).or_default().insert(spec.character(beta, eq.rhs));
        }
    }
    loop {
        if table.iter().any(|(_, phs)| phs.len() > 1) {
            return Ok(true);
        }
        let snapshot: Vec<(SparseVec, Phase)> = table
            .iter()
            .map(|(v, phs)| (v.clone(), *phs.iter().next().unwrap()))
            .collect();
        let mut changed = false;
        for (u, pu) in &snapshot {
            for (v, pv) in &snapshot {
                let diff = u.sub(spec, v);
                if diff.wt() > d {
                    continue;
                }
                let ph = spec.phase_mul(*pu, spec.phase_conj(*pv));
                let set = table.entry(diff).or_default();
                if set.insert(ph) {
                    changed = true;
                }
            }
        }
        if table.len() > entry_cap {
            return Err(KlinError::ResourceCap("derivation simulation exceeded cap".into()));
        }
        if !changed {
            return Ok(false);
        }
    }
}
