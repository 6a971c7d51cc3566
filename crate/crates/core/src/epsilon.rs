// SPDX-License-Identifier: Apache-2.0

//! Local epsilon factors of tame data and the Frobenius determinants of
//! `H^1_c` and of the middle convolution.
//!
//! Block factors use the normalization with respect to `d(pi)` for a local
//! uniformizer `pi`:
//! `eps_0(J_n ⊗ Ind(L_mu ⊗ F)) = q_s^{l n(n-1)/2} (-mu(-1) g(mu) alpha)^n`.
//! The global formulas use the differential `omega_0 = -dx`; relative to the
//! uniformizer `P_s(x)` at `s` this multiplies every block factor by
//! `mu(-P_s'(a))^n` where `a` is the chosen root of `P_s`.
//!
//! For `H = F ⊗ L_chi(y - x)` with `F` in standard situation with respect to
//! `chi` and `y` outside the singular locus `S`:
//!
//! `det(Frob, H^1_c) = (-1)^{d+r} q^{-r} det(Frob_inf, H_inf)^{-1} eps_y prod_s eps_s`
//!
//! with `d = r sum deg(s)`, `det(Frob_inf, H_inf) = det(Frob_inf, F_inf) chi(-1)^r`,
//! `eps_y = (-chi(-1) g(chi))^r det(F_y)`, and `eps_s` the `omega_0` factor of
//! `F_s ⊗ chi(P_s(y))`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::charsum::{chi_minus_one, gauss_sum};
use crate::cyclo::CycloNum;
use crate::error::{Error, Result};
use crate::field::{FieldSpec, MulChar};
use crate::localdata::{
    gr_m, kummer_scalar_at, twist_unramified, Conventions, EigenspaceWeight, LocalData, Orientation, Scalar,
    SheafData, TameBlock,
};

/// Context fixing the base field, the differential `omega_0 = -dx`, and the unipotent conventions.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonContext<'a> {
    pub field: &'a FieldSpec,
    pub conventions: Conventions,
}

/// `-mu(-1) g(mu)` for a character of `F_{q^l}`.
fn unit_factor(f: &FieldSpec, mu: MulChar) -> Result<CycloNum> {
    Ok(chi_minus_one(f, mu)?.mul(&gauss_sum(f, mu)?).neg())
}

/// Closed-form `eps_0(T, V, d pi)` of one block at a point of the given degree.
pub fn epsilon0_block(f: &FieldSpec, b: &TameBlock, degree: u32, conv: Conventions) -> Result<CycloNum> {
    let alpha = b
        .alpha
        .known()
        .ok_or_else(|| Error::UnknownInvariantScalar("pooled block in epsilon0_block".into()))?;
    Ok(block_factor_without_scalar(f, b, degree, conv)?.mul(&alpha.pow(b.n as i64)?))
}

/// `q_s^{l n(n-1)/2} (-mu(-1) g(mu))^n` (sign of the exponent set by the conventions).
fn block_factor_without_scalar(f: &FieldSpec, b: &TameBlock, degree: u32, conv: Conventions) -> Result<CycloNum> {
    let mu = b.character(degree);
    let qsl = f.q_pow(degree * b.l);
    let tri = (b.n as i64) * (b.n as i64 - 1) / 2;
    let e = match conv.eigenspace_weight {
        EigenspaceWeight::Zero => tri,
        EigenspaceWeight::Top => -tri,
    };
    Ok(CycloNum::int_pow(qsl, e).mul(&unit_factor(f, mu)?.pow(b.n as i64)?))
}

/// The same factor expanded over the graded pieces of the monodromy filtration.
pub fn epsilon0_block_graded(f: &FieldSpec, b: &TameBlock, degree: u32, conv: Conventions) -> Result<CycloNum> {
    let mut acc = CycloNum::one();
    for (mu, scalar) in gr_m(f, b, degree, conv)? {
        acc = acc.mul(&unit_factor(f, mu)?.mul(&scalar));
    }
    Ok(acc)
}

/// Product of block factors over `L ⊗ beta` (pooled blocks enter through their product).
pub fn epsilon0_point(f: &FieldSpec, data: &LocalData, beta: &CycloNum, conv: Conventions) -> Result<CycloNum> {
    let twisted = twist_unramified(data, beta)?;
    local_factor(f, &twisted, conv, None)
}

/// Product of block factors; with `omega_deriv = Some(P_s'(a))` each block gets the `omega_0` correction.
fn local_factor(f: &FieldSpec, data: &LocalData, conv: Conventions, omega_deriv: Option<u32>) -> Result<CycloNum> {
    let d = data.degree;
    let mut acc = CycloNum::one();
    for b in &data.blocks {
        let corr = match omega_deriv {
            Some(deriv) => {
                let t = f.level(d)?;
                let lifted = f.embed(t.neg(deriv), d, d * b.l)?;
                f.char_eval_code(b.character(d), lifted)?.pow(b.n as i64)?
            }
            None => CycloNum::one(),
        };
        acc = acc.mul(&block_factor_without_scalar(f, b, d, conv)?.mul(&corr));
        if let Scalar::Known(a) = &b.alpha {
            acc = acc.mul(&a.pow(b.n as i64)?);
        }
    }
    if let Some((b, k)) = data.pooled_group() {
        let p = data
            .pooled_product
            .as_ref()
            .ok_or_else(|| Error::UnknownInvariantScalar(format!("pooled product of {k} blocks")))?;
        acc = acc.mul(&p.pow(b.n as i64)?);
    }
    Ok(acc)
}

/// `P_s'(a)` for the chosen root `a` of a singular point, as a code in `F_{q^deg}`.
pub(crate) fn derivative_at_root(f: &FieldSpec, coeffs: &[u32], deg: u32) -> Result<u32> {
    let pt = crate::localdata::PointOrbit { coeffs: coeffs.to_vec() };
    let a = pt.chosen_root(f)?;
    let dp = pt.derivative(f);
    Ok(f.eval_poly(&dp, a, deg)?)
}

fn check_standard(f: &SheafData, chi: MulChar) -> Result<()> {
    if chi.is_trivial() {
        return Err(Error::TrivialConvolutionChar);
    }
    if !f.is_standard(chi) {
        return Err(Error::NotStandardSituation(format!(
            "infinity blocks {:?} are not all (1,1,chi={},·)",
            f.infinity.blocks, chi.e
        )));
    }
    Ok(())
}

/// `d = r sum_s deg(s)`, the dimension of `H^1_c(U_y, F ⊗ L_chi(y - x))`.
pub fn h1c_dimension(f: &SheafData) -> u32 {
    f.rank * f.total_degree()
}

fn sign_pow(e: u32) -> CycloNum {
    CycloNum::from_int(if e % 2 == 0 { 1 } else { -1 })
}

/// `det(Frob_q, H^1_c(U_y ⊗ kbar, F ⊗ L_chi(y - x)))` for rational `y` outside `S`.
pub fn det_h1c(ctx: EpsilonContext<'_>, sheaf: &SheafData, chi: MulChar, y: u32) -> Result<CycloNum> {
    let f = ctx.field;
    check_standard(sheaf, chi)?;
    if sheaf.is_singular_at(f, y) {
        return Err(Error::PointInS(y));
    }
    let r = sheaf.rank;
    let d = h1c_dimension(sheaf);
    let det_y = sheaf.stalk_det_hint.get(&y).ok_or(Error::MissingStalkDet(y))?;
    let cm1 = chi_minus_one(f, chi)?;
    let g = gauss_sum(f, chi)?;
    let eps_y = cm1.mul(&g).neg().pow(r as i64)?.mul(det_y);
    let det_inf_h = sheaf.det_infinity().map_err(|_| Error::UnknownInvariantScalar("infinity".into()))?;
    let det_inf_h = det_inf_h.mul(&cm1.pow(r as i64)?);
    let mut acc = sign_pow(d + r)
        .mul(&CycloNum::int_pow(f.q(), -(r as i64)))
        .mul(&det_inf_h.inv()?)
        .mul(&eps_y);
    for s in &sheaf.singular {
        let c = kummer_scalar_at(f, chi, &s.point, y, Orientation::YMinusX)?;
        let twisted = twist_unramified(&s.local(), &c)?;
        let deriv = derivative_at_root(f, &s.point.coeffs, s.point.degree())?;
        acc = acc.mul(&local_factor(f, &twisted, ctx.conventions, Some(deriv))?);
    }
    Ok(acc)
}

/// Frobenius determinant of the kernel of `H^1_c -> MC_chi(F)_y`: invariants at every
/// singular point except `skip`, and at infinity.
fn kernel_det(ctx: EpsilonContext<'_>, sheaf: &SheafData, chi: MulChar, y: u32, skip: Option<usize>) -> Result<CycloNum> {
    let f = ctx.field;
    let mut acc = CycloNum::one();
    for (i, s) in sheaf.singular.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let data = s.local();
        if data.invariant_dim() == 0 {
            continue;
        }
        let c = kummer_scalar_at(f, chi, &s.point, y, Orientation::YMinusX)?;
        let sign = if s.point.degree() % 2 == 1 { 1 } else { -1 };
        let mut pooled = 0i64;
        for b in data.blocks.iter().filter(|b| b.is_unipotent()) {
            match &b.alpha {
                Scalar::Known(a) => acc = acc.mul(&a.mul(&c).mul_int(sign)),
                Scalar::Pooled => pooled += 1,
            }
        }
        if pooled > 0 {
            let p = data.pooled_product.as_ref().ok_or_else(|| {
                Error::UnknownInvariantScalar(format!("pooled invariants at {:?}", s.point.coeffs))
            })?;
            acc = acc.mul(p).mul(&c.mul_int(sign).pow(pooled)?);
        }
    }
    let cm1 = chi_minus_one(f, chi)?;
    let inf = sheaf.infinity_local();
    let mut pooled = 0i64;
    for b in inf.blocks.iter().filter(|b| b.l == 1 && b.chi_e == chi.e) {
        match &b.alpha {
            Scalar::Known(a) => acc = acc.mul(&a.mul(&cm1)),
            Scalar::Pooled => pooled += 1,
        }
    }
    if pooled > 0 {
        let p = inf
            .pooled_product
            .as_ref()
            .ok_or_else(|| Error::UnknownInvariantScalar("pooled scalars at infinity".into()))?;
        acc = acc.mul(p).mul(&cm1.pow(pooled)?);
    }
    Ok(acc)
}

/// `det(Frob_q, MC_chi(F)_y)` for rational `y` outside `S`.
pub fn det_mc(ctx: EpsilonContext<'_>, sheaf: &SheafData, chi: MulChar, y: u32) -> Result<CycloNum> {
    let h = det_h1c(ctx, sheaf, chi, y)?;
    Ok(h.div(&kernel_det(ctx, sheaf, chi, y, None)?)?)
}

/// `det(Frob_q, MC_chi(F)_s)` on the middle-extension stalk at a rational singular point `s`.
///
/// The stalk is `H^1_c(A^1 - (S - s), j_*(F ⊗ L_chi(s - x)))` modulo the kernel at the
/// other points and at infinity; the block factors at `s` are those of `F_s ⊗ L_chi(s - x)`,
/// whose characters are multiplied by `chi` and whose scalars pick up `chi(-1)^l`.
pub fn det_mc_at_singular(ctx: EpsilonContext<'_>, sheaf: &SheafData, chi: MulChar, y: u32) -> Result<CycloNum> {
    let f = ctx.field;
    check_standard(sheaf, chi)?;
    let idx = sheaf
        .singular_index_at(f, y)
        .ok_or_else(|| Error::Unsupported(format!("y = {y} is not a rational singular point")))?;
    let r = sheaf.rank;
    let d = r * (sheaf.total_degree() - 1);
    let cm1 = chi_minus_one(f, chi)?;
    let det_inf_h = sheaf
        .det_infinity()
        .map_err(|_| Error::UnknownInvariantScalar("infinity".into()))?
        .mul(&cm1.pow(r as i64)?);
    let mut acc = sign_pow(d + r)
        .mul(&CycloNum::int_pow(f.q(), -(r as i64)))
        .mul(&det_inf_h.inv()?);
    for (i, s) in sheaf.singular.iter().enumerate() {
        if i == idx {
            let twisted = twist_at_own_point(f, &s.local(), chi)?;
            acc = acc.mul(&local_factor(f, &twisted, ctx.conventions, Some(1))?);
        } else {
            let c = kummer_scalar_at(f, chi, &s.point, y, Orientation::YMinusX)?;
            let twisted = twist_unramified(&s.local(), &c)?;
            let deriv = derivative_at_root(f, &s.point.coeffs, s.point.degree())?;
            acc = acc.mul(&local_factor(f, &twisted, ctx.conventions, Some(deriv))?);
        }
    }
    Ok(acc.div(&kernel_det(ctx, sheaf, chi, y, Some(idx))?)?)
}

/// Local data of `F_s ⊗ L_chi(s - x)` at a rational point `s`.
fn twist_at_own_point(f: &FieldSpec, data: &LocalData, chi: MulChar) -> Result<LocalData> {
    let cm1 = chi_minus_one(f, chi)?;
    let mut blocks = Vec::with_capacity(data.blocks.len());
    let mut pooled = 0i64;
    for b in &data.blocks {
        let pulled = f.pullback(chi, b.l)?;
        let mu = f.char_mul(b.character(1), pulled)?;
        if mu.is_trivial() && b.l != 1 {
            return Err(Error::Unsupported("induced block becoming unramified under the twist".into()));
        }
        let alpha = match &b.alpha {
            Scalar::Known(a) => Scalar::Known(a.mul(&cm1.pow(b.l as i64)?)),
            Scalar::Pooled => {
                pooled += 1;
                Scalar::Pooled
            }
        };
        blocks.push(TameBlock { n: b.n, l: b.l, chi_e: mu.e, alpha });
    }
    let pooled_product = match &data.pooled_product {
        Some(p) => Some(p.mul(&cm1.pow(pooled)?)),
        None => None,
    };
    Ok(LocalData { degree: data.degree, blocks, pooled_product })
}

/// Outcome of the hypotheses of the quadratic determinant theorem on one sheaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuadraticHypotheses {
    pub rank: u32,
    /// Number of singular points whose graded characters were checked for self-duality.
    pub self_dual_points: usize,
    /// Sampled stalk determinants written as `sign * q^exponent`.
    pub samples: Vec<SignedPowerSample>,
    /// Sample points whose stalk determinant is not derivable from the data.
    pub unresolved: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignedPowerSample {
    pub y: u32,
    pub singular: bool,
    pub sign: i8,
    pub exponent: i64,
}

/// Hypotheses checked on the input and again on `MC_{-1}` of the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuadraticDetReport {
    pub input: QuadraticHypotheses,
    pub output: QuadraticHypotheses,
    pub output_sheaf: SheafData,
}

fn hypothesis(clause: &str, detail: String) -> Error {
    Error::HypothesisFailed { clause: clause.into(), detail }
}

/// Smallest exponent in the Frobenius orbit `e, e q_s, e q_s^2, ...` modulo `q_s^l - 1`.
fn orbit_key(f: &FieldSpec, b: &TameBlock, degree: u32, e: u64) -> (u32, u32, u64) {
    let qs = f.q_pow(degree) as u128;
    let m = f.q_pow(degree * b.l) as u128 - 1;
    let mut cur = e as u128 % m;
    let mut best = cur;
    for _ in 1..b.l {
        cur = cur * qs % m;
        best = best.min(cur);
    }
    (b.n, b.l, best as u64)
}

/// Multiset of graded characters at a point closed under inversion.
fn is_self_dual(f: &FieldSpec, data: &LocalData) -> bool {
    let mut counts: BTreeMap<(u32, u32, u64), i64> = BTreeMap::new();
    for b in &data.blocks {
        let m = f.q_pow(data.degree * b.l) - 1;
        *counts.entry(orbit_key(f, b, data.degree, b.chi_e)).or_default() += 1;
        *counts.entry(orbit_key(f, b, data.degree, (m - b.chi_e % m) % m)).or_default() -= 1;
    }
    counts.values().all(|&c| c == 0)
}

/// `det(Frob_q, (j_* F)_y)` from a hint, or from the invariant scalars at a rational singular point.
fn stalk_det(f: &FieldSpec, sheaf: &SheafData, y: u32) -> Option<CycloNum> {
    if let Some(d) = sheaf.stalk_det_hint.get(&y) {
        return Some(d.clone());
    }
    let idx = sheaf.singular_index_at(f, y)?;
    let data = sheaf.singular[idx].local();
    let mut acc = CycloNum::one();
    let mut pooled = false;
    for b in data.blocks.iter().filter(|b| b.is_unipotent()) {
        match &b.alpha {
            Scalar::Known(a) => acc = acc.mul(a),
            Scalar::Pooled => pooled = true,
        }
    }
    if pooled {
        acc = acc.mul(data.pooled_product.as_ref()?);
    }
    Some(acc)
}

fn check_quadratic_hypotheses(f: &FieldSpec, sheaf: &SheafData, quad: MulChar, ys: &[u32]) -> Result<QuadraticHypotheses> {
    if !sheaf.is_standard(quad) {
        return Err(hypothesis(
            "i",
            format!("infinity blocks {:?} are not scalar with the quadratic character", sheaf.infinity.blocks),
        ));
    }
    if crate::mc::is_kummer_translate(f, sheaf, quad) {
        return Err(hypothesis("i", "the sheaf is geometrically a translate of the quadratic Kummer sheaf".into()));
    }
    for sp in &sheaf.singular {
        if !is_self_dual(f, &sp.local()) {
            return Err(hypothesis(
                "ii",
                format!("graded characters at {:?} are not closed under inversion", sp.point.coeffs),
            ));
        }
    }
    let mut samples = Vec::new();
    let mut unresolved = Vec::new();
    for &y in ys {
        let Some(det) = stalk_det(f, sheaf, y) else {
            unresolved.push(y);
            continue;
        };
        match det.is_signed_q_power(f.q())? {
            Some((sign, exponent)) => {
                samples.push(SignedPowerSample { y, singular: sheaf.is_singular_at(f, y), sign, exponent })
            }
            None => return Err(hypothesis("iii", format!("det(Frob_y) at y = {y} is {det}, not a signed power of q"))),
        }
    }
    Ok(QuadraticHypotheses { rank: sheaf.rank, self_dual_points: sheaf.singular.len(), samples, unresolved })
}

/// Check the hypotheses of the quadratic determinant theorem on `F` and on `MC_{-1}(F)`.
///
/// `ys` are base-field codes of the sampled points; singular rational points are
/// allowed and use the Frobenius determinant on the invariants. Points without a
/// derivable determinant are listed as unresolved rather than failing.
pub fn quadratic_det_check(ctx: EpsilonContext<'_>, sheaf: &SheafData, ys: &[u32]) -> Result<QuadraticDetReport> {
    let f = ctx.field;
    let quad = f
        .quadratic(1)
        .ok_or_else(|| Error::Unsupported("the quadratic character needs odd q".into()))?;
    let input = check_quadratic_hypotheses(f, sheaf, quad, ys)?;
    let out = crate::mc::mc_sheaf(f, sheaf, quad, ctx.conventions)?;
    let output = check_quadratic_hypotheses(f, &out, quad, ys)?;
    Ok(QuadraticDetReport { input, output, output_sheaf: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    #[test]
    fn block_examples() {
        let f = make_field(3, 1).unwrap();
        let conv = Conventions::default();
        let a = CycloNum::from_int(2);
        assert_eq!(epsilon0_block(&f, &TameBlock::new(1, 1, 0, a.clone()), 1, conv).unwrap(), a.neg());
        let chi = f.quadratic(1).unwrap();
        let g = gauss_sum(&f, chi).unwrap();
        assert_eq!(epsilon0_block(&f, &TameBlock::new(1, 1, chi.e, CycloNum::one()), 1, conv).unwrap(), g);
        assert_eq!(
            epsilon0_block(&f, &TameBlock::new(2, 1, 0, CycloNum::one()), 1, conv).unwrap(),
            CycloNum::from_int(3)
        );
    }

    #[test]
    fn point_examples() {
        let f = make_field(5, 1).unwrap();
        let conv = Conventions::default();
        let one = CycloNum::one();
        assert_eq!(epsilon0_point(&f, &LocalData::empty(1), &one, conv).unwrap(), one);
        let b1 = TameBlock::new(1, 1, 1, CycloNum::from_int(3));
        let b2 = TameBlock::new(2, 1, 2, CycloNum::root_of_unity(4, 1));
        let e1 = epsilon0_block(&f, &b1, 1, conv).unwrap();
        let e2 = epsilon0_block(&f, &b2, 1, conv).unwrap();
        let both = LocalData::new(1, vec![b1, b2]);
        assert_eq!(epsilon0_point(&f, &both, &one, conv).unwrap(), e1.mul(&e2));
    }

    fn three_point_quadratic(p: u64) -> (std::sync::Arc<FieldSpec>, SheafData) {
        let f = make_field(p, 1).unwrap();
        let quad = f.quadratic(1).unwrap();
        let factors: Vec<_> = (0..3).map(|a| (crate::localdata::PointOrbit::rational(&f, a), quad.e)).collect();
        let k = crate::localdata::kummer_sheaf_data(&f, &factors, &CycloNum::one()).unwrap();
        (f, k)
    }

    #[test]
    fn quadratic_check_passes_on_three_point_kummer() {
        for p in [3, 5, 7] {
            let (f, k) = three_point_quadratic(p);
            let ctx = EpsilonContext { field: &f, conventions: Conventions::default() };
            let ys: Vec<u32> = (0..f.q() as u32).collect();
            let rep = quadratic_det_check(ctx, &k, &ys).unwrap();
            assert_eq!(rep.output.rank, 2);
            assert!(rep.input.unresolved.is_empty());
            assert!(rep.output.unresolved.is_empty(), "q={p}: {:?}", rep.output.unresolved);
            assert_eq!(rep.output.samples.len(), ys.len());
        }
    }

    #[test]
    fn quadratic_check_rejects_non_self_dual_data() {
        let (f, mut k) = three_point_quadratic(5);
        let extra = TameBlock::new(1, 1, 1, CycloNum::one());
        k.rank = 2;
        for sp in &mut k.singular {
            sp.blocks.push(extra.clone());
        }
        k.infinity.blocks.push(TameBlock::new(1, 1, 2, CycloNum::one()));
        let ctx = EpsilonContext { field: &f, conventions: Conventions::default() };
        match quadratic_det_check(ctx, &k, &[3]) {
            Err(Error::HypothesisFailed { clause, .. }) => assert_eq!(clause, "ii"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quadratic_check_rejects_non_signed_power() {
        let (f, mut k) = three_point_quadratic(5);
        k.stalk_det_hint.insert(3, CycloNum::root_of_unity(3, 1).mul_int(5));
        let ctx = EpsilonContext { field: &f, conventions: Conventions::default() };
        match quadratic_det_check(ctx, &k, &[3]) {
            Err(Error::HypothesisFailed { clause, .. }) => assert_eq!(clause, "iii"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quadratic_check_rejects_wrong_infinity() {
        let (f, mut k) = three_point_quadratic(5);
        k.infinity.blocks[0].chi_e = 1;
        let ctx = EpsilonContext { field: &f, conventions: Conventions::default() };
        match quadratic_det_check(ctx, &k, &[3]) {
            Err(Error::HypothesisFailed { clause, .. }) => assert_eq!(clause, "i"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
