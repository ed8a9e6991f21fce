//! Vertex index spaces and their rank/unrank bijections.
//!
//! Ranking conventions: support sets in colexicographic order, values in
//! mixed-radix order (nonzero elements mapped onto [0, |units|) for field-side
//! sparse vectors, full element indices for group-side (U, S) pairs). Pair
//! spaces are blocked by the weight of the first side.

use serde::{Deserialize, Serialize};

use crate::algebra::{Elem, GroupSpec, Phase};
use crate::combin::{binomial, colex_rank, colex_unrank};
use crate::error::{KlinError, Result};
use crate::instance::SparseVec;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum VertexKind {
    /// ℓ-sparse vectors in F^n; N = |F*|^ℓ C(n, ℓ).
    EvenField,
    /// Pairs (U, S) with supp(U) ⊆ S, |S| = ℓ; N = |G|^ℓ C(n, ℓ).
    EvenGroup,
    /// Pairs (U¹, U²) with wt(U¹) + wt(U²) = ℓ; N = |F*|^ℓ C(2n, ℓ).
    OddPair,
    /// Pairs ((U¹,S¹), (U²,S²)) with |S¹| + |S²| = ℓ; N = |G|^ℓ C(2n, ℓ).
    OddGroupPair,
}

impl VertexKind {
    pub fn name(&self) -> &'static str {
        match self {
            VertexKind::EvenField => "even-field",
            VertexKind::EvenGroup => "even-group",
            VertexKind::OddPair => "odd",
            VertexKind::OddGroupPair => "odd-group",
        }
    }
}

/// A decoded vertex.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Vertex {
    Sparse(SparseVec),
    /// (U, S): S sorted, supp(U) ⊆ S.
    Pair(SparseVec, Vec<u32>),
    TwoSided(SparseVec, SparseVec),
    TwoSidedGroup((SparseVec, Vec<u32>), (SparseVec, Vec<u32>)),
}

#[derive(Clone, Debug)]
pub struct VertexSpace {
    pub spec: GroupSpec,
    pub n: usize,
    pub l: usize,
    pub kind: VertexKind,
    pub size: u128,
}

impl VertexSpace {
    pub fn even_field(spec: GroupSpec, n: usize, l: usize) -> Result<Self> {
        let units = spec.units() as u128;
        let size = units.pow(l as u32) * binomial(n as u64, l as u64);
        Self::check_cap(size)?;
        Ok(VertexSpace { spec, n, l, kind: VertexKind::EvenField, size })
    }

    pub fn even_group(spec: GroupSpec, n: usize, l: usize) -> Result<Self> {
        let order = spec.order as u128;
        let size = order.pow(l as u32) * binomial(n as u64, l as u64);
        Self::check_cap(size)?;
        Ok(VertexSpace { spec, n, l, kind: VertexKind::EvenGroup, size })
    }

    pub fn odd_pair(spec: GroupSpec, n: usize, l: usize) -> Result<Self> {
        let units = spec.units() as u128;
        let size = units.pow(l as u32) * binomial(2 * n as u64, l as u64);
        Self::check_cap(size)?;
        Ok(VertexSpace { spec, n, l, kind: VertexKind::OddPair, size })
    }

    pub fn odd_group_pair(spec: GroupSpec, n: usize, l: usize) -> Result<Self> {
        let order = spec.order as u128;
        let size = order.pow(l as u32) * binomial(2 * n as u64, l as u64);
        Self::check_cap(size)?;
        Ok(VertexSpace { spec, n, l, kind: VertexKind::OddGroupPair, size })
    }

    fn check_cap(size: u128) -> Result<()> {
        let cap = crate::cap_n();
        if size > cap {
            return Err(KlinError::ResourceCap(format!(
                "vertex space of size {size} exceeds cap {cap} (KLIN_CAP_N)"
            )));
        }
        Ok(())
    }

    /// Rank of a sparse vector with nonzero values: support colex-major,
    /// values mixed-radix minor.
    fn rank_sparse(&self, v: &SparseVec) -> u128 {
        let units = self.spec.units() as u128;
        let support: Vec<u32> = v.support();
        let mut val_rank = 0u128;
        for (j, &(_, val)) in v.entries.iter().enumerate() {
            debug_assert!(val.0 >= 1);
            val_rank += (val.0 as u128 - 1) * units.pow(j as u32);
        }
        colex_rank(&support) * units.pow(v.wt() as u32) + val_rank
    }

    fn unrank_sparse(&self, rank: u128, w: usize) -> SparseVec {
        let units = self.spec.units() as u128;
        let block = units.pow(w as u32);
        let support = colex_unrank(rank / block, w);
        let mut val_code = rank % block;
        let entries: Vec<(u32, Elem)> = support
            .into_iter()
            .map(|i| {
                let val = Elem((val_code % units) as u64 + 1);
                val_code /= units;
                (i, val)
            })
            .collect();
        SparseVec { n: self.n, entries }
    }

    /// Rank of one (U, S) side with |S| = w: S colex-major, full element
    /// indices minor.
    fn rank_group_side(&self, u: &SparseVec, s: &[u32]) -> u128 {
        let order = self.spec.order as u128;
        let mut val_rank = 0u128;
        for (j, &i) in s.iter().enumerate() {
            val_rank += (u.get(i).0 as u128) * order.pow(j as u32);
        }
        colex_rank(s) * order.pow(s.len() as u32) + val_rank
    }

    fn unrank_group_side(&self, rank: u128, w: usize) -> (SparseVec, Vec<u32>) {
        let order = self.spec.order as u128;
        let block = order.pow(w as u32);
        let s = colex_unrank(rank / block, w);
        let mut val_code = rank % block;
        let mut entries = Vec::new();
        for &i in &s {
            let val = (val_code % order) as u64;
            val_code /= order;
            if val != 0 {
                entries.push((i, Elem(val)));
            }
        }
        (SparseVec { n: self.n, entries }, s)
    }

    pub fn rank(&self, v: &Vertex) -> u128 {
        match (&self.kind, v) {
            (VertexKind::EvenField, Vertex::Sparse(u)) => {
                debug_assert_eq!(u.wt(), self.l);
                self.rank_sparse(u)
            }
            (VertexKind::EvenGroup, Vertex::Pair(u, s)) => {
                debug_assert_eq!(s.len(), self.l);
                self.rank_group_side(u, s)
            }
            (VertexKind::OddPair, Vertex::TwoSided(u1, u2)) => {
                debug_assert_eq!(u1.wt() + u2.wt(), self.l);
                let w1 = u1.wt();
                let offset = self.odd_block_offset(w1);
                let side2 = self.side_count(self.l - w1);
                offset + self.rank_sparse(u1) * side2 + self.rank_sparse(u2)
            }
            (VertexKind::OddGroupPair, Vertex::TwoSidedGroup((u1, s1), (u2, s2))) => {
                debug_assert_eq!(s1.len() + s2.len(), self.l);
                let w1 = s1.len();
                let offset = self.odd_group_block_offset(w1);
                let side2 = self.group_side_count(self.l - w1);
                offset + self.rank_group_side(u1, s1) * side2 + self.rank_group_side(u2, s2)
            }
            _ => panic!("vertex shape does not match the space kind"),
        }
    }

    pub fn unrank(&self, rank: u128) -> Vertex {
        debug_assert!(rank < self.size);
        match self.kind {
            VertexKind::EvenField => Vertex::Sparse(self.unrank_sparse(rank, self.l)),
            VertexKind::EvenGroup => {
                let (u, s) = self.unrank_group_side(rank, self.l);
                Vertex::Pair(u, s)
            }
            VertexKind::OddPair => {
                let mut w1 = 0usize;
                let mut rem = rank;
                loop {
                    let block = self.side_count(w1) * self.side_count(self.l - w1);
                    if rem < block {
                        break;
                    }
                    rem -= block;
                    w1 += 1;
                }
                let side2 = self.side_count(self.l - w1);
                let u1 = self.unrank_sparse(rem / side2, w1);
                let u2 = self.unrank_sparse(rem % side2, self.l - w1);
                Vertex::TwoSided(u1, u2)
            }
            VertexKind::OddGroupPair => {
                let mut w1 = 0usize;
                let mut rem = rank;
                loop {
                    let block = self.group_side_count(w1) * self.group_side_count(self.l - w1);
                    if rem < block {
                        break;
                    }
                    rem -= block;
                    w1 += 1;
                }
                let side2 = self.group_side_count(self.l - w1);
                let s1 = self.unrank_group_side(rem / side2, w1);
                let s2 = self.unrank_group_side(rem % side2, self.l - w1);
                Vertex::TwoSidedGroup(s1, s2)
            }
        }
    }

    /// #(w-sparse vectors over F^n) = C(n, w) |F*|^w.
    fn side_count(&self, w: usize) -> u128 {
        let units = self.spec.units() as u128;
        binomial(self.n as u64, w as u64) * units.pow(w as u32)
    }

    /// #((U, S) pairs with |S| = w) = C(n, w) |G|^w.
    fn group_side_count(&self, w: usize) -> u128 {
        let order = self.spec.order as u128;
        binomial(self.n as u64, w as u64) * order.pow(w as u32)
    }

    fn odd_block_offset(&self, w1: usize) -> u128 {
        (0..w1).map(|w| self.side_count(w) * self.side_count(self.l - w)).sum()
    }

    fn odd_group_block_offset(&self, w1: usize) -> u128 {
        (0..w1).map(|w| self.group_side_count(w) * self.group_side_count(self.l - w)).sum()
    }

    /// χ evaluated at the vertex with rank `r`: the y-vector entry of the
    /// quadratic-form identity.
    pub fn vertex_character(&self, r: u128, x: &[Elem]) -> Phase {
        let spec = &self.spec;
        let char_of = |v: &SparseVec| -> Phase {
            let mut ph = spec.phase_one();
            for &(i, val) in &v.entries {
                ph = spec.phase_mul(ph, spec.character(val, x[i as usize]));
            }
            ph
        };
        match self.unrank(r) {
            Vertex::Sparse(u) => char_of(&u),
            Vertex::Pair(u, _) => char_of(&u),
            Vertex::TwoSided(u1, u2) => spec.phase_mul(char_of(&u1), char_of(&u2)),
            Vertex::TwoSidedGroup((u1, _), (u2, _)) => {
                spec.phase_mul(char_of(&u1), char_of(&u2))
            }
        }
    }
}
