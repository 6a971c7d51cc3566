// SPDX-License-Identifier: Apache-2.0

//! Middle convolution `MC_chi` on symbolic sheaf data.
//!
//! At each singular point the quotient `F_s / F_s^{I_s}` is rewritten blockwise:
//!
//! | input character `mu` | output block |
//! |---|---|
//! | `mu ∉ {1, chi^-1}` | `(n, l, chi mu, -J(chi, mu) alpha)` |
//! | `mu = 1` | `(n, 1, chi, alpha)` |
//! | `mu = chi^-1` | `(n, 1, 1, chi(-1) alpha)` as a quotient block |
//!
//! and the invariants of the output are refilled with unipotent blocks up to the
//! new rank. Scalars that the local rewrite does not determine are recovered from
//! global determinants where possible (see [`mc_sheaf`]).

use std::collections::BTreeMap;

use crate::charsum::{chi_minus_one, jacobi_sum};
use crate::cyclo::CycloNum;
use crate::epsilon::{derivative_at_root, det_mc, det_mc_at_singular, EpsilonContext};
use crate::error::{Error, Result};
use crate::field::{FieldSpec, MulChar};
use crate::localdata::{
    lift_quotient_block, quotient_by_invariants, Conventions, InfinityData, LocalData, Scalar, SheafData,
    SingularPoint, TameBlock,
};

/// `chi^-1(P'(a))` at the level of a block, converting scalars between the
/// local parameter `P(x)` and `x - a`. Equal to one at rational points.
fn derivative_correction(f: &FieldSpec, b: &TameBlock, degree: u32, chi: MulChar, deriv: u32) -> Result<CycloNum> {
    let level = degree * b.l;
    let lifted = f.embed(deriv, degree, level)?;
    Ok(f.char_eval_code(f.char_inv(f.pullback(chi, level)?), lifted)?)
}

/// Image of one quotient block at a point of the given degree, where `deriv`
/// is `P'(a)` at the chosen root (as a code of `F_{q^degree}`).
///
/// Returns the output block and whether it is a case-(iii) quotient block that
/// still has to be lifted to the full unipotent block.
pub fn mc_block(f: &FieldSpec, b: &TameBlock, degree: u32, chi: MulChar, deriv: u32) -> Result<(TameBlock, bool)> {
    if chi.is_trivial() {
        return Err(Error::TrivialConvolutionChar);
    }
    let factor = mc_block_factor(f, b, degree, chi, deriv)?;
    let alpha = match &b.alpha {
        Scalar::Known(a) => Scalar::Known(a.mul(&factor)),
        Scalar::Pooled => Scalar::Pooled,
    };
    let mu = b.character(degree);
    if mu.is_trivial() {
        let chi_d = f.pullback(chi, degree)?;
        return Ok((TameBlock { n: b.n, l: 1, chi_e: chi_d.e, alpha }, false));
    }
    let prod = f.char_mul(mu, f.pullback(chi, degree * b.l)?)?;
    if prod.is_trivial() {
        if b.l != 1 {
            return Err(Error::Unsupported("induced block with character chi^-1".into()));
        }
        return Ok((TameBlock { n: b.n, l: 1, chi_e: 0, alpha }, true));
    }
    Ok((TameBlock { n: b.n, l: b.l, chi_e: prod.e, alpha }, false))
}

/// Scalar by which [`mc_block`] multiplies `alpha`: `1`, `chi(-1)` or `-J(chi, mu)`
/// in the three cases, times the derivative correction.
fn mc_block_factor(f: &FieldSpec, b: &TameBlock, degree: u32, chi: MulChar, deriv: u32) -> Result<CycloNum> {
    let mu = b.character(degree);
    let corr = derivative_correction(f, b, degree, chi, deriv)?;
    if mu.is_trivial() {
        return Ok(corr);
    }
    let chi_l = f.pullback(chi, degree * b.l)?;
    let prod = f.char_mul(mu, chi_l)?;
    let base = if prod.is_trivial() { chi_minus_one(f, chi_l)? } else { jacobi_sum(f, chi_l, mu)?.neg() };
    Ok(base.mul(&corr))
}

/// Rank of `MC_chi(F)`: `r sum deg(s)` minus the invariants at `S` (weighted by
/// degree) and the `chi`-isotypic part at infinity.
pub fn mc_rank(f: &SheafData, chi: MulChar) -> Result<u32> {
    if chi.is_trivial() {
        return Err(Error::TrivialConvolutionChar);
    }
    let d = f.rank * f.total_degree();
    let inv: u32 = f.singular.iter().map(|s| s.point.degree() * s.local().invariant_dim()).sum();
    let at_inf = f.infinity.blocks.iter().filter(|b| b.chi_e == chi.e && b.l == 1).count() as u32;
    Ok(d.saturating_sub(inv + at_inf))
}

/// Whether `F` is geometrically a translate `L_{chi^-1}(x - a)`.
pub fn is_kummer_translate(f: &FieldSpec, sheaf: &SheafData, chi: MulChar) -> bool {
    let inv = f.char_inv(chi);
    sheaf.rank == 1
        && sheaf.singular.len() == 1
        && sheaf.singular[0].point.degree() == 1
        && sheaf.singular[0].blocks.len() == 1
        && sheaf.singular[0].blocks[0].n == 1
        && sheaf.singular[0].blocks[0].chi_e == inv.e
}

/// Exponent of the determinant character of local data, as a character of `k(s)^*`.
fn det_character(f: &FieldSpec, data: &LocalData) -> MulChar {
    let m = f.q_pow(data.degree) - 1;
    let e = data
        .blocks
        .iter()
        .fold(0u128, |acc, b| (acc + b.n as u128 * (b.chi_e as u128 % m as u128)) % m as u128);
    MulChar { l: data.degree, e: e as u64 }
}

/// `delta_s(y - a_s)` for the determinant character `delta_s` at `s` and rational `y`.
pub(crate) fn det_character_value(f: &FieldSpec, sp: &SingularPoint, data: &LocalData, y: u32) -> Result<CycloNum> {
    let d = sp.point.degree();
    let delta = det_character(f, data);
    let a = sp.point.chosen_root(f)?;
    let t = f.level(d)?;
    let diff = t.sub(f.embed(y, 1, d)?, a);
    Ok(f.char_eval_code(delta, diff)?)
}

/// Infinity data of `MC_chi(F)` when `F` has scalar monodromy `rho != chi` at infinity.
///
/// Each input block `(n, 1, rho)` becomes `(n, 1, rho chi^-1)`, lengthened to
/// `J_{n+1}` when `rho` is trivial; the remaining rank is filled with
/// `(1, 1, chi^-1)`. The determinant formulas do not apply here, so every
/// scalar is left unknown.
fn infinity_off_standard(f: &FieldSpec, sheaf: &SheafData, chi: MulChar, rank: u32) -> Result<InfinityData> {
    let inv = f.char_inv(chi);
    let mut blocks = Vec::new();
    for b in &sheaf.infinity.blocks {
        let e = f.char_mul(b.character(1), inv)?.e;
        let n = if b.chi_e == 0 { b.n + 1 } else { b.n };
        blocks.push(TameBlock { n, l: 1, chi_e: e, alpha: Scalar::Pooled });
    }
    let used: u32 = blocks.iter().map(TameBlock::dim).sum();
    let refill = rank
        .checked_sub(used)
        .ok_or_else(|| Error::CrossCheckFailed(format!("infinity rank {used} exceeds output rank {rank}")))?;
    blocks.extend((0..refill).map(|_| TameBlock { n: 1, l: 1, chi_e: inv.e, alpha: Scalar::Pooled }));
    Ok(InfinityData { blocks, pooled_product: None })
}

/// `MC_chi(F)` as symbolic data, with determinant hints propagated.
///
/// Refilled invariant blocks at a point form a pooled group whose product is the
/// stalk determinant divided by the eigenspace scalars of the lifted Jordan blocks;
/// it is known at rational points when the stalk determinant is. When the infinity
/// character of `F` is `chi`, the infinity data of the output is `rank` copies of
/// `(1, 1, chi^-1, ·)` whose product is fixed by matching `det MC_chi(F)` against
/// the determinant characters at the singular points. Any other scalar infinity
/// is handled by the local rule of [`infinity_off_standard`] without scalars.
pub fn mc_sheaf(f: &FieldSpec, sheaf: &SheafData, chi: MulChar, conv: Conventions) -> Result<SheafData> {
    if chi.is_trivial() {
        return Err(Error::TrivialConvolutionChar);
    }
    let Some(rho) = sheaf.infinity_character() else {
        return Err(Error::NotStandardSituation("local monodromy at infinity is not scalar".into()));
    };
    if is_kummer_translate(f, sheaf, chi) {
        return Err(Error::ExcludedKummerTranslate);
    }
    let rank = mc_rank(sheaf, chi)?;
    if rank == 0 {
        return Err(Error::ExcludedKummerTranslate);
    }
    let ctx = EpsilonContext { field: f, conventions: conv };

    let mut hints = BTreeMap::new();
    for y in 0..f.q() as u32 {
        let v = if sheaf.is_singular_at(f, y) {
            det_mc_at_singular(ctx, sheaf, chi, y)
        } else {
            det_mc(ctx, sheaf, chi, y)
        };
        if let Ok(v) = v {
            hints.insert(y, v);
        }
    }

    let mut singular = Vec::with_capacity(sheaf.singular.len());
    for sp in &sheaf.singular {
        let deg = sp.point.degree();
        let quotient = quotient_by_invariants(f, &sp.local(), conv);
        let deriv = derivative_at_root(f, &sp.point.coeffs, deg)?;
        let mut blocks = Vec::new();
        let mut eigen_known = CycloNum::one();
        for b in &quotient.blocks {
            let (out, lift) = mc_block(f, b, deg, chi, deriv)?;
            let out = if lift { lift_quotient_block(f, &out, deg, conv) } else { out };
            if let (true, Scalar::Known(a)) = (lift, &out.alpha) {
                eigen_known = eigen_known.mul(a);
            }
            blocks.push(out);
        }
        let mut pooled_product = match quotient.pooled_group() {
            Some((b, k)) => {
                let factor = mc_block_factor(f, b, deg, chi, deriv)?.pow(k as i64)?;
                let lifted = f.char_mul(b.character(deg), f.pullback(chi, deg * b.l)?)?.is_trivial();
                let twist = if lifted {
                    CycloNum::int_pow(f.q_pow(deg), -(conv.quotient_twist as i64) * k as i64)
                } else {
                    CycloNum::one()
                };
                quotient.pooled_product.as_ref().map(|p| p.mul(&factor).mul(&twist))
            }
            None => None,
        };
        let mut eigen_unknown = false;
        if lift_pooled_eigen(&blocks) {
            match &pooled_product {
                Some(p) => eigen_known = eigen_known.mul(p),
                None => eigen_unknown = true,
            }
        }
        let used: u32 = blocks.iter().map(TameBlock::dim).sum();
        let refill = rank
            .checked_sub(used)
            .ok_or_else(|| Error::CrossCheckFailed(format!("local rank {used} exceeds output rank {rank}")))?;
        if refill > 0 {
            let stalk = sp.point.rational_root(f).and_then(|y| hints.get(&y)).cloned();
            let refill_product = match (stalk, eigen_unknown) {
                (Some(det), false) => Some(det.div(&eigen_known)?),
                _ => None,
            };
            if refill == 1 && refill_product.is_some() {
                blocks.push(TameBlock::new(1, 1, 0, refill_product.unwrap()));
            } else if quotient.pooled_group().is_some() {
                // Two pooled groups of different shapes: only their joint product
                // would be meaningful, and it is not tracked.
                for _ in 0..refill {
                    blocks.push(TameBlock { n: 1, l: 1, chi_e: 0, alpha: Scalar::Pooled });
                }
                pooled_product = None;
            } else {
                for _ in 0..refill {
                    blocks.push(TameBlock { n: 1, l: 1, chi_e: 0, alpha: Scalar::Pooled });
                }
                pooled_product = refill_product;
            }
        }
        let data = LocalData { degree: deg, blocks, pooled_product };
        data.validate(f)?;
        singular.push(SingularPoint::from_local(sp.point.clone(), data));
    }

    let inv = f.char_inv(chi);
    let mut infinity_product = None;
    for (&y, det) in &hints {
        if sheaf.is_singular_at(f, y) {
            continue;
        }
        let mut denom = CycloNum::one();
        for sp in &singular {
            denom = denom.mul(&det_character_value(f, sp, &sp.local(), y)?);
        }
        let c = det.div(&denom)?;
        match &infinity_product {
            None => infinity_product = Some(c),
            Some(prev) if *prev != c => {
                return Err(Error::CrossCheckFailed(format!(
                    "determinant at infinity differs between sample points ({prev} vs {c})"
                )))
            }
            _ => {}
        }
    }
    let infinity = if rho != chi.e {
        infinity_off_standard(f, sheaf, chi, rank)?
    } else if rank == 1 {
        match infinity_product {
            Some(c) => InfinityData { blocks: vec![TameBlock::new(1, 1, inv.e, c)], pooled_product: None },
            None => InfinityData {
                blocks: vec![TameBlock { n: 1, l: 1, chi_e: inv.e, alpha: Scalar::Pooled }],
                pooled_product: None,
            },
        }
    } else {
        InfinityData {
            blocks: (0..rank).map(|_| TameBlock { n: 1, l: 1, chi_e: inv.e, alpha: Scalar::Pooled }).collect(),
            pooled_product: infinity_product,
        }
    };

    let out = SheafData { base: sheaf.base.clone(), singular, infinity, rank, stalk_det_hint: hints };
    out.validate(f)?;
    Ok(out)
}

/// Whether the pooled group of freshly mapped blocks consists of lifted unipotent blocks.
fn lift_pooled_eigen(blocks: &[TameBlock]) -> bool {
    blocks.iter().any(|b| b.alpha == Scalar::Pooled && b.is_unipotent())
}

/// Character of a block at a point as an element of `Q/Z` with its Galois orbit,
/// expressed at the common level `m`.
fn orbit_at_level(f: &FieldSpec, b: &TameBlock, degree: u32, m: u32) -> Vec<u64> {
    let level = degree * b.l;
    let big = f.q_pow(m) - 1;
    let scale = big / (f.q_pow(level) - 1);
    let qs = f.q_pow(degree) as u128;
    let mut out = Vec::with_capacity(b.l as usize);
    let mut e = (b.chi_e as u128 * scale as u128) % big as u128;
    for _ in 0..b.l {
        out.push(e as u64);
        e = e * qs % big as u128;
    }
    out
}

/// Dimension of the centralizer of the geometric local monodromy.
fn centralizer_dim(f: &FieldSpec, data: &LocalData) -> u64 {
    let m = data
        .blocks
        .iter()
        .fold(1u32, |acc, b| num_integer::lcm(acc, data.degree * b.l));
    let mut by_char: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for b in &data.blocks {
        for e in orbit_at_level(f, b, data.degree, m) {
            by_char.entry(e).or_default().push(b.n as u64);
        }
    }
    by_char
        .values()
        .map(|sizes| sizes.iter().flat_map(|a| sizes.iter().map(move |b| (*a).min(*b))).sum::<u64>())
        .sum()
}

/// Katz rigidity index `(2 - m) r^2 + sum deg(s) dim Z(s)` over `S` and infinity.
pub fn rigidity_index(f: &FieldSpec, sheaf: &SheafData) -> i64 {
    let r = sheaf.rank as i64;
    let m = 1 + sheaf.total_degree() as i64;
    let mut total = (2 - m) * r * r;
    for sp in &sheaf.singular {
        total += sp.point.degree() as i64 * centralizer_dim(f, &sp.local()) as i64;
    }
    total + centralizer_dim(f, &sheaf.infinity_local()) as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;
    use crate::localdata::{kummer_sheaf_data, PointOrbit};

    #[test]
    fn block_cases() {
        let f = make_field(3, 1).unwrap();
        let chi = f.quadratic(1).unwrap();
        let a = CycloNum::from_int(5);
        let (b, lift) = mc_block(&f, &TameBlock::new(1, 1, 0, a.clone()), 1, chi, 1).unwrap();
        assert_eq!((b, lift), (TameBlock::new(1, 1, chi.e, a.clone()), false));
        let (b, lift) = mc_block(&f, &TameBlock::new(1, 1, chi.e, a.clone()), 1, chi, 1).unwrap();
        assert_eq!((b, lift), (TameBlock::new(1, 1, 0, a.neg()), true));
        assert_eq!(
            mc_block(&f, &TameBlock::new(1, 1, 0, a), 1, MulChar::trivial(1), 1),
            Err(Error::TrivialConvolutionChar)
        );
    }

    #[test]
    fn legendre_shape() {
        let f = make_field(5, 1).unwrap();
        let chi = f.quadratic(1).unwrap();
        let factors: Vec<_> = (0..3).map(|a| (PointOrbit::rational(&f, a), chi.e)).collect();
        let k = kummer_sheaf_data(&f, &factors, &CycloNum::one()).unwrap();
        assert!(k.is_standard(chi));
        let g = mc_sheaf(&f, &k, chi, Conventions::default()).unwrap();
        assert_eq!(g.rank, 2);
        assert!(g.is_standard(f.char_inv(chi)));
        for sp in &g.singular {
            assert_eq!(sp.blocks, vec![TameBlock { n: 2, l: 1, chi_e: 0, alpha: sp.blocks[0].alpha.clone() }]);
        }
        assert_eq!(rigidity_index(&f, &g), 2);
        assert_eq!(rigidity_index(&f, &k), 2);
    }

    #[test]
    fn legendre_family_with_unipotent_infinity() {
        let f = make_field(5, 1).unwrap();
        let chi = f.quadratic(1).unwrap();
        let factors: Vec<_> = (0..2).map(|a| (PointOrbit::rational(&f, a), chi.e)).collect();
        let k = kummer_sheaf_data(&f, &factors, &CycloNum::one()).unwrap();
        assert_eq!(k.infinity_character(), Some(0));
        let g = mc_sheaf(&f, &k, chi, Conventions::default()).unwrap();
        assert_eq!(g.rank, 2);
        for sp in &g.singular {
            assert_eq!((sp.blocks.len(), sp.blocks[0].n, sp.blocks[0].chi_e), (1, 2, 0));
        }
        assert_eq!(g.infinity.blocks, vec![TameBlock { n: 2, l: 1, chi_e: chi.e, alpha: Scalar::Pooled }]);
        assert_eq!(rigidity_index(&f, &g), 2);
        assert!(matches!(mc_sheaf(&f, &g, chi, Conventions::default()), Err(Error::NotStandardSituation(_))));
    }
}
