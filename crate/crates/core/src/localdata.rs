// SPDX-License-Identifier: Apache-2.0

//! Tame local monodromy data and symbolic middle-extension sheaves on `A^1`.
//!
//! A [`TameBlock`] `(n, l, chi, alpha)` at a closed point `s` stands for
//! `J_n ⊗ Ind(L_chi ⊗ F)` where `chi` is a character of `F_{q_s^l}` and `alpha`
//! is the Frobenius scalar of `F` on the inertia eigenspace. Characters at a
//! point of degree `d` are stored as exponents relative to the generator of
//! `F_{q^{d l}}`, with `k(s)` identified with `F_{q^d}` by sending `x` to the least
//! root of the point's polynomial.
//!
//! Local data at infinity is written in the uniformizer `t = 1/x`: the sheaf
//! `L_eta(P(x))` with `deg P = d` has character `eta^{-d}` and scalar 1 there.
//!
//! Some refilled invariant blocks have scalars that are only known as a product.
//! Such blocks carry [`Scalar::Pooled`]; all pooled blocks of one [`LocalData`]
//! share one shape `(n, l, chi)` and one `pooled_product`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cyclo::{CycloError, CycloNum};
use crate::field::{FieldDescriptor, FieldError, FieldSpec, MulChar};

/// Errors raised by local-data operations.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LocalError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Cyclo(#[from] CycloError),
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("polynomial {0:?} is not monic irreducible over the base field")]
    NotIrreducible(Vec<u32>),
    #[error("point {y} lies on the closed point {point:?}")]
    PointCollision { y: u32, point: Vec<u32> },
    #[error("unramified twist by zero")]
    ZeroScalar,
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("pooled scalars are inconsistent: {0}")]
    PooledMismatch(String),
    #[error("a Frobenius scalar needed here is unknown: {0}")]
    UnknownScalar(String),
    #[error("sheaf is defined over a different base field")]
    BaseMismatch,
}

/// Frobenius scalar of a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scalar {
    Known(CycloNum),
    /// Member of the point's pooled group; only the product over the group is tracked.
    Pooled,
}

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Known(c) => c.serialize(s),
            Scalar::Pooled => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match Option::<CycloNum>::deserialize(d)? {
            Some(c) => Scalar::Known(c),
            None => Scalar::Pooled,
        })
    }
}

impl Scalar {
    pub fn known(&self) -> Option<&CycloNum> {
        match self {
            Scalar::Known(c) => Some(c),
            Scalar::Pooled => None,
        }
    }
}

/// One indecomposable tame constituent `J_n ⊗ Ind(L_chi ⊗ F)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TameBlock {
    pub n: u32,
    pub l: u32,
    pub chi_e: u64,
    pub alpha: Scalar,
}

impl TameBlock {
    pub fn new(n: u32, l: u32, chi_e: u64, alpha: CycloNum) -> Self {
        TameBlock { n, l, chi_e, alpha: Scalar::Known(alpha) }
    }

    /// The block character as a character of `F_{q^{deg * l}}`.
    pub fn character(&self, deg: u32) -> MulChar {
        MulChar { l: deg * self.l, e: self.chi_e }
    }

    pub fn is_unipotent(&self) -> bool {
        self.chi_e == 0
    }

    /// Dimension over the residue field of the point.
    pub fn dim(&self) -> u32 {
        self.n * self.l
    }
}

/// Position of the inertia eigenspace inside a Jordan block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EigenspaceWeight {
    /// The eigenspace is the lowest graded piece `j = 0`.
    #[serde(rename = "0")]
    Zero,
    /// The eigenspace is the top graded piece `j = n - 1`.
    #[serde(rename = "top")]
    Top,
}

/// Global conventions for unipotent blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conventions {
    pub eigenspace_weight: EigenspaceWeight,
    /// Quotient twist `t`: `J_n` modulo invariants becomes `J_{n-1}` with scalar times `q_s^t`.
    pub quotient_twist: u8,
}

impl Default for Conventions {
    /// The combination singled out by the oracle.
    fn default() -> Self {
        Conventions { eigenspace_weight: EigenspaceWeight::Zero, quotient_twist: 0 }
    }
}

impl Conventions {
    /// All four combinations, default first.
    pub fn all() -> [Conventions; 4] {
        [
            Conventions { eigenspace_weight: EigenspaceWeight::Zero, quotient_twist: 0 },
            Conventions { eigenspace_weight: EigenspaceWeight::Zero, quotient_twist: 1 },
            Conventions { eigenspace_weight: EigenspaceWeight::Top, quotient_twist: 0 },
            Conventions { eigenspace_weight: EigenspaceWeight::Top, quotient_twist: 1 },
        ]
    }

    pub fn label(&self) -> String {
        let w = match self.eigenspace_weight {
            EigenspaceWeight::Zero => "0",
            EigenspaceWeight::Top => "top",
        };
        format!("eigenspace_weight={w},quotient_twist={}", self.quotient_twist)
    }
}

/// Local data at one closed point: a multiset of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalData {
    #[serde(default = "one_u32")]
    pub degree: u32,
    pub blocks: Vec<TameBlock>,
    /// Product of the scalars of all [`Scalar::Pooled`] blocks, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_product: Option<CycloNum>,
}

fn one_u32() -> u32 {
    1
}

impl LocalData {
    pub fn new(degree: u32, blocks: Vec<TameBlock>) -> Self {
        LocalData { degree, blocks, pooled_product: None }
    }

    pub fn empty(degree: u32) -> Self {
        Self::new(degree, Vec::new())
    }

    /// `sum n_i l_i`.
    pub fn rank(&self) -> u32 {
        self.blocks.iter().map(TameBlock::dim).sum()
    }

    /// Number of unipotent blocks, i.e. the inertia-invariant dimension.
    pub fn invariant_dim(&self) -> u32 {
        self.blocks.iter().filter(|b| b.is_unipotent()).count() as u32
    }

    pub fn pooled_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.alpha == Scalar::Pooled).count()
    }

    /// A representative pooled block and the size of the pooled group.
    pub fn pooled_group(&self) -> Option<(&TameBlock, usize)> {
        let first = self.blocks.iter().find(|b| b.alpha == Scalar::Pooled)?;
        Some((first, self.pooled_count()))
    }

    /// `q_s = q^deg`.
    pub fn residue_size(&self, f: &FieldSpec) -> u64 {
        f.q_pow(self.degree)
    }

    /// Check the block invariants and the pooled-group shape.
    ///
    /// Pooled blocks of different shapes are allowed only while their product is
    /// unknown: a known product is consumed as `product^n` and needs one shape.
    pub fn validate(&self, f: &FieldSpec) -> Result<(), LocalError> {
        let mut pooled_char = None;
        let mut mixed = false;
        for b in &self.blocks {
            if b.n == 0 || b.l == 0 {
                return Err(LocalError::InvalidBlock(format!("n and l must be positive: {b:?}")));
            }
            if b.chi_e == 0 && b.l != 1 {
                return Err(LocalError::InvalidBlock("unipotent blocks must have l = 1".into()));
            }
            let modulus = f.q_pow(self.degree * b.l) - 1;
            if b.chi_e >= modulus {
                return Err(LocalError::InvalidBlock(format!("exponent {} not reduced mod {modulus}", b.chi_e)));
            }
            match &b.alpha {
                Scalar::Known(a) if a.is_zero() => {
                    return Err(LocalError::InvalidBlock("alpha must be nonzero".into()))
                }
                Scalar::Pooled => {
                    let shape = (b.n, b.l, b.chi_e);
                    mixed |= pooled_char.is_some_and(|c| c != shape);
                    pooled_char = Some(shape);
                }
                _ => {}
            }
        }
        if pooled_char.is_none() && self.pooled_product.is_some() {
            return Err(LocalError::PooledMismatch("pooled product without pooled blocks".into()));
        }
        if mixed && self.pooled_product.is_some() {
            return Err(LocalError::PooledMismatch("a known pooled product needs one block shape".into()));
        }
        Ok(())
    }

    /// Product of all block scalars raised to their multiplicities on the eigenspaces,
    /// `prod alpha_i` over blocks with pooled groups contributing their product.
    pub fn scalar_product(&self) -> Result<CycloNum, LocalError> {
        let mut acc = CycloNum::one();
        for b in &self.blocks {
            if let Scalar::Known(a) = &b.alpha {
                acc = acc.mul(a);
            }
        }
        if self.pooled_count() > 0 {
            let p = self
                .pooled_product
                .as_ref()
                .ok_or_else(|| LocalError::UnknownScalar("pooled product".into()))?;
            acc = acc.mul(p);
        }
        Ok(acc)
    }
}

/// Graded pieces of `Gr^M` of a block: `(character, scalar)` for `j = 0..n-1`.
pub fn gr_m(f: &FieldSpec, b: &TameBlock, degree: u32, conv: Conventions) -> Result<Vec<(MulChar, CycloNum)>, LocalError> {
    let alpha = b
        .alpha
        .known()
        .ok_or_else(|| LocalError::UnknownScalar("pooled block has no individual scalar".into()))?;
    let qsl = f.q_pow(degree * b.l);
    let shift = match conv.eigenspace_weight {
        EigenspaceWeight::Zero => 0i64,
        EigenspaceWeight::Top => (b.n as i64) - 1,
    };
    Ok((0..b.n as i64)
        .map(|j| (b.character(degree), alpha.mul(&CycloNum::int_pow(qsl, j - shift))))
        .collect())
}

/// Quotient of local data by its inertia invariants.
pub fn quotient_by_invariants(f: &FieldSpec, data: &LocalData, conv: Conventions) -> LocalData {
    let qs = f.q_pow(data.degree);
    let mut blocks = Vec::new();
    for b in &data.blocks {
        if !b.is_unipotent() {
            blocks.push(b.clone());
        } else if b.n >= 2 {
            let alpha = match &b.alpha {
                Scalar::Known(a) => Scalar::Known(a.mul(&CycloNum::int_pow(qs, conv.quotient_twist as i64))),
                Scalar::Pooled => Scalar::Pooled,
            };
            blocks.push(TameBlock { n: b.n - 1, l: 1, chi_e: 0, alpha });
        }
    }
    let kept = blocks.iter().filter(|b| b.alpha == Scalar::Pooled).count() as i64;
    let shifted = data.pooled_group().is_some_and(|(b, _)| b.is_unipotent());
    let pooled_product = if kept > 0 {
        let factor = if shifted {
            CycloNum::int_pow(qs, conv.quotient_twist as i64 * kept)
        } else {
            CycloNum::one()
        };
        data.pooled_product.as_ref().map(|p| p.mul(&factor))
    } else {
        None
    };
    LocalData { degree: data.degree, blocks, pooled_product }
}

/// The full unipotent block whose quotient by invariants is the given quotient block.
pub fn lift_quotient_block(f: &FieldSpec, quotient: &TameBlock, degree: u32, conv: Conventions) -> TameBlock {
    let qs = f.q_pow(degree);
    let alpha = match &quotient.alpha {
        Scalar::Known(a) => Scalar::Known(a.mul(&CycloNum::int_pow(qs, -(conv.quotient_twist as i64)))),
        Scalar::Pooled => Scalar::Pooled,
    };
    TameBlock { n: quotient.n + 1, l: 1, chi_e: 0, alpha }
}

/// Tate twist `(m)` of local data: scalars times `q_s^{-m l}`.
pub fn tate_twist_local(f: &FieldSpec, data: &LocalData, m: i64) -> LocalData {
    let qs = f.q_pow(data.degree);
    let blocks = data
        .blocks
        .iter()
        .map(|b| TameBlock {
            alpha: match &b.alpha {
                Scalar::Known(a) => Scalar::Known(a.mul(&CycloNum::int_pow(qs, -m * b.l as i64))),
                Scalar::Pooled => Scalar::Pooled,
            },
            ..b.clone()
        })
        .collect();
    let kl = data.pooled_group().map_or(0, |(b, k)| (b.l as usize * k) as i64);
    LocalData {
        degree: data.degree,
        blocks,
        pooled_product: data
            .pooled_product
            .as_ref()
            .map(|p| p.mul(&CycloNum::int_pow(qs, -m * kl))),
    }
}

/// Tate twist of a scalar over `F_q`.
pub fn tate_twist_scalar(f: &FieldSpec, z: &CycloNum, m: i64) -> CycloNum {
    z.mul(&CycloNum::int_pow(f.q(), -m))
}

/// Twist by the unramified line with Frobenius `beta`: `alpha_i -> alpha_i beta^{l_i}`.
pub fn twist_unramified(data: &LocalData, beta: &CycloNum) -> Result<LocalData, LocalError> {
    if beta.is_zero() {
        return Err(LocalError::ZeroScalar);
    }
    let mut blocks = Vec::with_capacity(data.blocks.len());
    for b in &data.blocks {
        let alpha = match &b.alpha {
            Scalar::Known(a) => Scalar::Known(a.mul(&beta.pow(b.l as i64)?)),
            Scalar::Pooled => Scalar::Pooled,
        };
        blocks.push(TameBlock { alpha, ..b.clone() });
    }
    let kl = data.pooled_group().map_or(0, |(b, k)| (b.l as usize * k) as i64);
    let pooled_product = match &data.pooled_product {
        Some(p) => Some(p.mul(&beta.pow(kl)?)),
        None => None,
    };
    Ok(LocalData { degree: data.degree, blocks, pooled_product })
}

/// A closed point of `A^1` given by its monic irreducible polynomial (low degree first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointOrbit {
    pub coeffs: Vec<u32>,
}

impl PointOrbit {
    /// The rational point `x = a`.
    pub fn rational(f: &FieldSpec, a: u32) -> Self {
        PointOrbit { coeffs: vec![f.base().neg(a), 1] }
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.len() as u32 - 1
    }

    /// The root `a` of a degree-1 point.
    pub fn rational_root(&self, f: &FieldSpec) -> Option<u32> {
        (self.degree() == 1).then(|| f.base().neg(self.coeffs[0]))
    }

    pub fn validate(&self, f: &FieldSpec) -> Result<(), LocalError> {
        let q = f.q();
        let ok = self.coeffs.len() >= 2
            && *self.coeffs.last().unwrap() == 1
            && self.coeffs.iter().all(|&c| (c as u64) < q)
            && f.is_irreducible_over_base(&self.coeffs)?;
        if ok {
            Ok(())
        } else {
            Err(LocalError::NotIrreducible(self.coeffs.clone()))
        }
    }

    /// The root used to identify `k(s)` with `F_{q^d}`: the least root by element code.
    pub fn chosen_root(&self, f: &FieldSpec) -> Result<u32, LocalError> {
        let roots = f.roots_in(&self.coeffs, self.degree())?;
        roots
            .first()
            .copied()
            .ok_or_else(|| LocalError::NotIrreducible(self.coeffs.clone()))
    }

    /// `P_s(y)` for `y` in the base field.
    pub fn eval_base(&self, f: &FieldSpec, y: u32) -> u32 {
        let b = f.base();
        self.coeffs.iter().rev().fold(0, |acc, &c| b.add(b.mul(acc, y), c))
    }

    /// Coefficients of the derivative `P_s'`.
    pub fn derivative(&self, f: &FieldSpec) -> Vec<u32> {
        let b = f.base();
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| b.mul(b.from_prime(i as u64), c))
            .collect()
    }
}

/// Orientation of the convolution kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `L_chi(y0 - x)`.
    YMinusX,
    /// `L_chi(x - y0)`.
    XMinusY,
}

/// Unramified value of `L_chi(y0 - x)` (or `L_chi(x - y0)`) at the closed point `s`,
/// i.e. `chi(N_{k(s)/k}(y0 - x_s)) = chi(P_s(y0))` for the default orientation.
pub fn kummer_scalar_at(
    f: &FieldSpec,
    chi: MulChar,
    s: &PointOrbit,
    y0: u32,
    orientation: Orientation,
) -> Result<CycloNum, LocalError> {
    if chi.l != 1 {
        return Err(FieldError::DegreeMismatch { expected: 1, found: chi.l }.into());
    }
    let v = s.eval_base(f, y0);
    if v == 0 {
        return Err(LocalError::PointCollision { y: y0, point: s.coeffs.clone() });
    }
    let b = f.base();
    let v = match orientation {
        Orientation::YMinusX => v,
        Orientation::XMinusY if s.degree() % 2 == 1 => b.neg(v),
        Orientation::XMinusY => v,
    };
    Ok(f.char_eval_code(chi, v)?)
}

/// A singular point with its full local data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub point: PointOrbit,
    pub blocks: Vec<TameBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_product: Option<CycloNum>,
}

impl SingularPoint {
    pub fn local(&self) -> LocalData {
        LocalData {
            degree: self.point.degree(),
            blocks: self.blocks.clone(),
            pooled_product: self.pooled_product.clone(),
        }
    }

    pub fn from_local(point: PointOrbit, data: LocalData) -> Self {
        SingularPoint { point, blocks: data.blocks, pooled_product: data.pooled_product }
    }
}

/// Infinity data in the JSON form (degree is always 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfinityData {
    pub blocks: Vec<TameBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_product: Option<CycloNum>,
}

/// A symbolic middle-extension sheaf on `A^1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheafData {
    pub base: FieldDescriptor,
    pub singular: Vec<SingularPoint>,
    pub infinity: InfinityData,
    pub rank: u32,
    /// `det(Frob_q, (j_* F)_y)` at rational points `y` (element codes of `F_q`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stalk_det_hint: BTreeMap<u32, CycloNum>,
}

impl SheafData {
    pub fn infinity_local(&self) -> LocalData {
        LocalData {
            degree: 1,
            blocks: self.infinity.blocks.clone(),
            pooled_product: self.infinity.pooled_product.clone(),
        }
    }

    pub fn set_infinity(&mut self, data: LocalData) {
        self.infinity = InfinityData { blocks: data.blocks, pooled_product: data.pooled_product };
    }

    /// `sum_{s in S} deg(s)`.
    pub fn total_degree(&self) -> u32 {
        self.singular.iter().map(|s| s.point.degree()).sum()
    }

    /// Whether `y` (a base-field code) is a root of some singular point.
    pub fn is_singular_at(&self, f: &FieldSpec, y: u32) -> bool {
        self.singular.iter().any(|s| s.point.eval_base(f, y) == 0)
    }

    /// Index of the rational singular point at `y`.
    pub fn singular_index_at(&self, f: &FieldSpec, y: u32) -> Option<usize> {
        self.singular
            .iter()
            .position(|s| s.point.degree() == 1 && s.point.rational_root(f) == Some(y))
    }

    /// Check field, points, block shapes and ranks.
    pub fn validate(&self, f: &FieldSpec) -> Result<(), LocalError> {
        if self.base != f.descriptor() {
            return Err(LocalError::BaseMismatch);
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.singular {
            s.point.validate(f)?;
            if !seen.insert(s.point.clone()) {
                return Err(LocalError::InvalidBlock(format!("duplicate point {:?}", s.point.coeffs)));
            }
            let local = s.local();
            local.validate(f)?;
            if local.rank() != self.rank {
                return Err(LocalError::RankMismatch(format!(
                    "point {:?} has local rank {} but the sheaf has rank {}",
                    s.point.coeffs,
                    local.rank(),
                    self.rank
                )));
            }
        }
        let inf = self.infinity_local();
        inf.validate(f)?;
        if inf.rank() != self.rank {
            return Err(LocalError::RankMismatch(format!(
                "infinity has rank {} but the sheaf has rank {}",
                inf.rank(),
                self.rank
            )));
        }
        Ok(())
    }

    /// Standard situation with respect to `chi`: infinity is `(1,1,chi,·)` blocks only.
    pub fn is_standard(&self, chi: MulChar) -> bool {
        chi.l == 1
            && !self.infinity.blocks.is_empty()
            && self
                .infinity
                .blocks
                .iter()
                .all(|b| b.n == 1 && b.l == 1 && b.chi_e == chi.e)
    }

    /// The scalar character at infinity, if the infinity data is scalar.
    pub fn infinity_character(&self) -> Option<u64> {
        let first = self.infinity.blocks.first()?;
        self.infinity
            .blocks
            .iter()
            .all(|b| b.n == 1 && b.l == 1 && b.chi_e == first.chi_e)
            .then_some(first.chi_e)
    }

    /// `det(Frob_inf, F_inf)` as the product of infinity block scalars.
    pub fn det_infinity(&self) -> Result<CycloNum, LocalError> {
        self.infinity_local().scalar_product()
    }

    /// Tate twist `(m)` of every local datum and every determinant hint.
    pub fn tate_twist(&self, f: &FieldSpec, m: i64) -> SheafData {
        let mut out = self.clone();
        out.singular = self
            .singular
            .iter()
            .map(|s| SingularPoint::from_local(s.point.clone(), tate_twist_local(f, &s.local(), m)))
            .collect();
        out.set_infinity(tate_twist_local(f, &self.infinity_local(), m));
        let factor = CycloNum::int_pow(f.q(), -m * self.rank as i64);
        out.stalk_det_hint = self.stalk_det_hint.iter().map(|(y, d)| (*y, d.mul(&factor))).collect();
        out
    }
}

/// Build the symbolic data of a rank-1 Kummer product `c^deg ⊗ ⊗_i L_{eta_i}(P_i(x))`.
///
/// `factors` are `(point, exponent of a base character)`; equal points are merged
/// and trivial factors dropped. `constant` is the Frobenius scalar `c` of a
/// geometrically constant twist (use 1 for none).
pub fn kummer_sheaf_data(
    f: &FieldSpec,
    factors: &[(PointOrbit, u64)],
    constant: &CycloNum,
) -> Result<SheafData, LocalError> {
    let merged = merge_factors(f, factors)?;
    let qm1 = f.q() - 1;
    let mut singular = Vec::new();
    for (i, (pt, e)) in merged.iter().enumerate() {
        let d = pt.degree();
        let a = pt.chosen_root(f)?;
        let mut alpha = constant.pow(d as i64)?;
        for (j, (other, e2)) in merged.iter().enumerate() {
            if i == j {
                continue;
            }
            let v = f.eval_poly(&other.coeffs, a, d)?;
            let nv = f.norm(v, d, 1)?;
            alpha = alpha.mul(&f.char_eval_code(MulChar { l: 1, e: *e2 }, nv)?);
        }
        let chi = f.pullback(MulChar { l: 1, e: *e }, d)?;
        singular.push(SingularPoint {
            point: pt.clone(),
            blocks: vec![TameBlock::new(1, 1, chi.e, alpha)],
            pooled_product: None,
        });
    }
    let inf_e = merged
        .iter()
        .fold(0i128, |acc, (pt, e)| acc - (*e as i128) * pt.degree() as i128)
        .rem_euclid(qm1 as i128) as u64;
    let mut hints = BTreeMap::new();
    for y in 0..f.q() as u32 {
        let mut v = constant.clone();
        let mut zero = false;
        for (pt, e) in &merged {
            let w = pt.eval_base(f, y);
            if w == 0 {
                zero = true;
                break;
            }
            v = v.mul(&f.char_eval_code(MulChar { l: 1, e: *e }, w)?);
        }
        if !zero {
            hints.insert(y, v);
        }
    }
    Ok(SheafData {
        base: f.descriptor(),
        singular,
        infinity: InfinityData {
            blocks: vec![TameBlock::new(1, 1, inf_e, constant.clone())],
            pooled_product: None,
        },
        rank: 1,
        stalk_det_hint: hints,
    })
}

/// Merge factors at equal points and drop trivial ones; the order of first appearance is kept.
pub fn merge_factors(f: &FieldSpec, factors: &[(PointOrbit, u64)]) -> Result<Vec<(PointOrbit, u64)>, LocalError> {
    let qm1 = f.q() - 1;
    let mut merged: Vec<(PointOrbit, u64)> = Vec::new();
    for (pt, e) in factors {
        pt.validate(f)?;
        if let Some(slot) = merged.iter_mut().find(|(p, _)| p == pt) {
            slot.1 = (slot.1 + e) % qm1;
        } else {
            merged.push((pt.clone(), e % qm1));
        }
    }
    merged.retain(|(_, e)| *e != 0);
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    #[test]
    fn gr_m_examples() {
        let f = make_field(5, 1).unwrap();
        let b = TameBlock::new(2, 1, 0, CycloNum::one());
        let pieces = gr_m(&f, &b, 1, Conventions::default()).unwrap();
        assert_eq!(pieces[0].1, CycloNum::one());
        assert_eq!(pieces[1].1, CycloNum::from_int(5));
        let b3 = TameBlock::new(3, 1, 1, CycloNum::from_int(2));
        let pieces = gr_m(&f, &b3, 2, Conventions::default()).unwrap();
        let scal: Vec<CycloNum> = pieces.into_iter().map(|p| p.1).collect();
        assert_eq!(scal, vec![CycloNum::from_int(2), CycloNum::from_int(50), CycloNum::from_int(1250)]);
    }

    #[test]
    fn quotient_examples() {
        let f = make_field(3, 1).unwrap();
        let unram = LocalData::new(1, vec![TameBlock::new(1, 1, 0, CycloNum::from_int(2))]);
        assert!(quotient_by_invariants(&f, &unram, Conventions::default()).blocks.is_empty());
        let j2 = LocalData::new(1, vec![TameBlock::new(2, 1, 0, CycloNum::one())]);
        let c1 = Conventions { quotient_twist: 1, ..Conventions::default() };
        let qd = quotient_by_invariants(&f, &j2, c1);
        assert_eq!(qd.blocks, vec![TameBlock::new(1, 1, 0, CycloNum::from_int(3))]);
    }

    #[test]
    fn kummer_scalar_degree_two() {
        let f = make_field(3, 1).unwrap();
        let chi = f.quadratic(1).unwrap();
        let s = PointOrbit { coeffs: vec![1, 0, 1] };
        assert_eq!(kummer_scalar_at(&f, chi, &s, 0, Orientation::YMinusX).unwrap(), CycloNum::one());
        let r = PointOrbit::rational(&f, 1);
        assert_eq!(kummer_scalar_at(&f, chi, &r, 0, Orientation::YMinusX).unwrap(), CycloNum::from_int(-1));
        assert!(matches!(
            kummer_scalar_at(&f, chi, &r, 1, Orientation::YMinusX),
            Err(LocalError::PointCollision { .. })
        ));
    }
}
