// SPDX-License-Identifier: Apache-2.0

//! Brute-force ground truth.
//!
//! An [`ExplicitSheaf`] is a rank-1 Kummer product `c^deg ⊗ ⊗_i L_{eta_i}(P_i(x))`
//! followed by a history of middle convolutions, Kummer twists and constant
//! twists. Frobenius traces of every stage are computed over `F_{q^k}` by the
//! Grothendieck trace formula; characteristic polynomials follow from Newton's
//! identities.
//!
//! All characters involved are characters of `F_q` composed with norms, so every
//! trace is `scalar_k * v` with `v` in `Z[zeta_{q-1}]` stored as an `i64` vector and
//! `scalar_k` the `k`-th power of the accumulated constant twists.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::cyclo::CycloNum;
use crate::enumerate;
use crate::error::{Error, Result};
use crate::field::{FieldDescriptor, FieldSpec, GfTables, MulChar};
use crate::localdata::{kummer_sheaf_data, merge_factors, PointOrbit, SheafData};

/// One factor `L_eta(P(x))` of the base Kummer product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KummerFactor {
    pub point: PointOrbit,
    pub chi_e: u64,
}

/// A transformation applied on top of the base product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum HistoryStep {
    /// `MC_chi` for the base character with exponent `chi_e`.
    Mc { chi_e: u64 },
    /// Middle tensor with `L_eta(P(x))`.
    Mt { point: PointOrbit, eta_e: u64 },
    /// Geometrically constant twist with Frobenius scalar `scalar`.
    Twist { scalar: CycloNum },
}

fn one() -> CycloNum {
    CycloNum::one()
}

fn is_one(c: &CycloNum) -> bool {
    c.is_one()
}

/// A sheaf given by an explicit construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitSheaf {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<FieldDescriptor>,
    pub factors: Vec<KummerFactor>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub constant: CycloNum,
    #[serde(default)]
    pub history: Vec<HistoryStep>,
}

impl ExplicitSheaf {
    /// The Kummer product `c^deg ⊗ ⊗ L_{eta_i}(P_i(x))` without history.
    pub fn kummer(f: &FieldSpec, factors: Vec<KummerFactor>, constant: CycloNum) -> Self {
        ExplicitSheaf { base: Some(f.descriptor()), factors, constant, history: Vec::new() }
    }

    pub fn with_step(&self, step: HistoryStep) -> Self {
        let mut out = self.clone();
        out.history.push(step);
        out
    }

    /// Symbolic data of the history-free base product.
    pub fn base_data(&self, f: &FieldSpec) -> Result<SheafData> {
        let factors: Vec<(PointOrbit, u64)> = self.factors.iter().map(|k| (k.point.clone(), k.chi_e)).collect();
        Ok(kummer_sheaf_data(f, &factors, &self.constant)?)
    }
}

/// Level-`k` values of one stage over all of `F_{q^k}`.
struct Table {
    m: usize,
    vals: Vec<i64>,
    known: Vec<bool>,
}

impl Table {
    fn get(&self, x: u32) -> Option<&[i64]> {
        let x = x as usize;
        self.known[x].then(|| &self.vals[x * self.m..(x + 1) * self.m])
    }
}

/// Per-stage structural facts the trace recursion needs.
#[derive(Debug, Clone)]
struct Stage {
    singular: Vec<PointOrbit>,
    /// Character exponent at infinity when the infinity monodromy is scalar.
    inf_char: Option<u64>,
}

/// Trace evaluator for one explicit sheaf.
pub struct Oracle<'a> {
    f: &'a FieldSpec,
    sheaf: ExplicitSheaf,
    factors: Vec<(PointOrbit, u64)>,
    stages: Vec<Stage>,
    m: usize,
    tables: Mutex<HashMap<(usize, u32), Arc<Table>>>,
}

fn rotate_add(acc: &mut [i64], v: &[i64], shift: usize, sign: i64) {
    let m = acc.len();
    for (j, &c) in v.iter().enumerate() {
        if c != 0 {
            acc[(j + shift) % m] += sign * c;
        }
    }
}

fn horner(t: &GfTables, coeffs: &[u32], x: u32) -> u32 {
    coeffs.iter().rev().fold(0, |acc, &c| t.add(t.mul(acc, x), c))
}

impl<'a> Oracle<'a> {
    pub fn new(f: &'a FieldSpec, sheaf: &ExplicitSheaf) -> Result<Self> {
        if let Some(b) = &sheaf.base {
            if *b != f.descriptor() {
                return Err(Error::Schema("explicit sheaf is defined over a different base field".into()));
            }
        }
        let raw: Vec<(PointOrbit, u64)> = sheaf.factors.iter().map(|k| (k.point.clone(), k.chi_e)).collect();
        let factors = merge_factors(f, &raw)?;
        let m = (f.q() - 1).max(1) as usize;
        let inf0 = factors
            .iter()
            .fold(0i128, |acc, (pt, e)| acc - *e as i128 * pt.degree() as i128)
            .rem_euclid(m as i128) as u64;
        let mut stages = vec![Stage { singular: factors.iter().map(|(p, _)| p.clone()).collect(), inf_char: Some(inf0) }];
        for step in &sheaf.history {
            let prev = stages.last().unwrap().clone();
            let next = match step {
                HistoryStep::Mc { chi_e } => {
                    let e = chi_e % m as u64;
                    if e == 0 {
                        return Err(Error::TrivialConvolutionChar);
                    }
                    let inf_char = match prev.inf_char {
                        Some(c) if c == e => Some((m as u64 - e) % m as u64),
                        Some(_) => None,
                        None => return Err(Error::Unsupported("convolution of a sheaf with non-scalar infinity".into())),
                    };
                    Stage { singular: prev.singular, inf_char }
                }
                HistoryStep::Mt { point, eta_e } => {
                    point.validate(f)?;
                    let e = eta_e % m as u64;
                    let mut singular = prev.singular;
                    if e != 0 && !singular.contains(point) {
                        singular.push(point.clone());
                    }
                    let inf_char = prev.inf_char.map(|c| {
                        (c as i128 - e as i128 * point.degree() as i128).rem_euclid(m as i128) as u64
                    });
                    Stage { singular, inf_char }
                }
                HistoryStep::Twist { scalar } => {
                    if scalar.is_zero() {
                        return Err(Error::Schema("constant twist by zero".into()));
                    }
                    prev
                }
            };
            stages.push(next);
        }
        Ok(Oracle { f, sheaf: sheaf.clone(), factors, stages, m, tables: Mutex::new(HashMap::new()) })
    }

    /// Number of stages (base plus history).
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    /// Singular points of the final stage.
    pub fn singular_points(&self) -> &[PointOrbit] {
        &self.stages.last().unwrap().singular
    }

    fn top(&self) -> usize {
        self.stages.len() - 1
    }

    /// `scalar_k` of stage `h`: the `k`-th power of all constant twists so far.
    fn scalar(&self, h: usize, k: u32) -> Result<CycloNum> {
        let mut s = self.sheaf.constant.clone();
        for step in &self.sheaf.history[..h] {
            if let HistoryStep::Twist { scalar } = step {
                s = s.mul(scalar);
            }
        }
        Ok(s.pow(k as i64)?)
    }

    fn to_cyclo(&self, v: &[i64], h: usize, k: u32) -> Result<CycloNum> {
        Ok(CycloNum::from_histogram(self.m as u64, v).mul(&self.scalar(h, k)?))
    }

    fn embedded(&self, coeffs: &[u32], k: u32) -> Result<Vec<u32>> {
        coeffs.iter().map(|&c| Ok(self.f.embed(c, 1, k)?)).collect()
    }

    /// Exponent of `chi_k(z)` in `Z/(q-1)` for a base character exponent `e`; `None` at zero.
    fn char_shift(&self, t: &GfTables, e: u64, z: u32) -> Option<usize> {
        t.log(z).map(|lg| ((e as u128 * lg as u128) % self.m as u128) as usize)
    }

    fn is_singular(&self, h: usize, t: &GfTables, k: u32, x: u32) -> Result<bool> {
        for pt in &self.stages[h].singular {
            if horner(t, &self.embedded(&pt.coeffs, k)?, x) == 0 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn base_value(&self, t: &GfTables, emb: &[(Vec<u32>, u64)], x: u32) -> Vec<i64> {
        let mut v = vec![0i64; self.m];
        let mut shift = 0usize;
        for (c, e) in emb {
            match self.char_shift(t, *e, horner(t, c, x)) {
                Some(s) => shift = (shift + s) % self.m,
                None => return v,
            }
        }
        v[shift] = 1;
        v
    }

    /// Table of stage `h` over `F_{q^k}`, computed once.
    fn table(&self, h: usize, k: u32) -> Result<Arc<Table>> {
        if let Some(t) = self.tables.lock().unwrap().get(&(h, k)) {
            return Ok(t.clone());
        }
        let built = Arc::new(self.build_table(h, k)?);
        self.tables.lock().unwrap().insert((h, k), built.clone());
        Ok(built)
    }

    fn build_table(&self, h: usize, k: u32) -> Result<Table> {
        let t = self.f.level(k)?;
        let m = self.m;
        let size = t.size() as usize;
        if h == 0 {
            let emb: Vec<(Vec<u32>, u64)> = self
                .factors
                .iter()
                .map(|(p, e)| Ok((self.embedded(&p.coeffs, k)?, *e)))
                .collect::<Result<_>>()?;
            let rows = enumerate::current().map_collect(t.size(), &|x| self.base_value(&t, &emb, x));
            return Ok(Table { m, vals: rows.concat(), known: vec![true; size] });
        }
        let prev = self.table(h - 1, k)?;
        match &self.sheaf.history[h - 1] {
            HistoryStep::Twist { .. } => Ok(Table { m, vals: prev.vals.clone(), known: prev.known.clone() }),
            HistoryStep::Mt { point, eta_e } => {
                let emb = self.embedded(&point.coeffs, k)?;
                let in_prev = self.stages[h - 1].singular.contains(point);
                let mut vals = vec![0i64; size * m];
                let mut known = vec![false; size];
                for x in 0..size {
                    let pa = horner(&t, &emb, x as u32);
                    let Some(pv) = prev.get(x as u32) else { continue };
                    match self.char_shift(&t, *eta_e, pa) {
                        Some(s) => {
                            rotate_add(&mut vals[x * m..(x + 1) * m], pv, s, 1);
                            known[x] = true;
                        }
                        None if eta_e % m as u64 == 0 => {
                            vals[x * m..(x + 1) * m].copy_from_slice(pv);
                            known[x] = true;
                        }
                        None => known[x] = !in_prev,
                    }
                }
                Ok(Table { m, vals, known })
            }
            HistoryStep::Mc { chi_e } => {
                let rows = enumerate::current().map_collect(t.size(), &|y| {
                    match self.mc_value(h, k, &t, &prev, *chi_e, y) {
                        Ok(Some(mut v)) => {
                            v.push(1);
                            v
                        }
                        _ => vec![0i64; m + 1],
                    }
                });
                let mut vals = Vec::with_capacity(size * m);
                let mut known = Vec::with_capacity(size);
                for mut r in rows {
                    known.push(r.pop() == Some(1));
                    vals.extend(r);
                }
                Ok(Table { m, vals, known })
            }
        }
    }

    /// Trace at infinity `T_k` of stage `h` on the scalar infinity fibre.
    fn infinity_trace(&self, h: usize, k: u32) -> Result<Option<Vec<i64>>> {
        if h == 0 {
            let mut v = vec![0i64; self.m];
            v[0] = 1;
            return Ok(Some(v));
        }
        match &self.sheaf.history[h - 1] {
            HistoryStep::Mc { .. } => {
                let prev = self.table(h - 1, k)?;
                if prev.known.iter().any(|b| !b) {
                    return Ok(None);
                }
                let mut acc = vec![0i64; self.m];
                for c in prev.vals.chunks(self.m) {
                    for (a, b) in acc.iter_mut().zip(c) {
                        *a -= b;
                    }
                }
                Ok(Some(acc))
            }
            _ => self.infinity_trace(h - 1, k),
        }
    }

    /// Trace of stage `h = MC_chi(stage h-1)` at `y` over `F_{q^k}`, or `None` when not derivable.
    fn mc_value(&self, h: usize, k: u32, t: &GfTables, prev: &Table, chi_e: u64, y: u32) -> Result<Option<Vec<i64>>> {
        let m = self.m;
        let mut acc = vec![0i64; m];
        for u in 0..t.size() {
            if u == y {
                continue;
            }
            let Some(pv) = prev.get(u) else { return Ok(None) };
            if let Some(s) = self.char_shift(t, chi_e, t.sub(y, u)) {
                rotate_add(&mut acc, pv, s, -1);
            }
        }
        if self.stages[h - 1].inf_char == Some(chi_e % m as u64) {
            let Some(ti) = self.infinity_trace(h - 1, k)? else { return Ok(None) };
            let sign = self.char_shift(t, chi_e, t.neg(1)).unwrap_or(0);
            rotate_add(&mut acc, &ti, sign, -1);
        }
        Ok(Some(acc))
    }

    fn value(&self, h: usize, k: u32, y: u32) -> Result<Option<Vec<i64>>> {
        let t = self.f.level(k)?;
        if h == 0 {
            return Ok(self.table(0, k)?.get(y).map(<[i64]>::to_vec));
        }
        match &self.sheaf.history[h - 1] {
            HistoryStep::Mc { chi_e } => {
                let prev = self.table(h - 1, k)?;
                self.mc_value(h, k, &t, &prev, *chi_e, y)
            }
            _ => Ok(self.table(h, k)?.get(y).map(<[i64]>::to_vec)),
        }
    }

    /// Frobenius trace of the final stage at a point `x` of `F_{q^k}` (the middle-extension stalk at singular points).
    pub fn trace_point(&self, k: u32, x: u32) -> Result<CycloNum> {
        let h = self.top();
        match self.value(h, k, x)? {
            Some(v) => self.to_cyclo(&v, h, k),
            None => Err(Error::UnknownStalk(format!("stage {h}, level {k}, point {x}"))),
        }
    }

    /// Traces of `Frob_{q^k}` on the stalk at a rational point `y`, for `k = 1..=kmax`.
    pub fn stalk_power_sums(&self, y: u32, kmax: u32) -> Result<Vec<CycloNum>> {
        (1..=kmax).map(|k| self.trace_point(k, self.f.embed(y, 1, k)?)).collect()
    }

    /// `Tr(Frob_{q^k} | H^1_c(U_y, G ⊗ L_chi(y - x)))` for the final stage `G`, `k = 1..=kmax`.
    pub fn h1c_power_sums(&self, chi: MulChar, y: u32, kmax: u32) -> Result<Vec<CycloNum>> {
        if chi.l != 1 {
            return Err(Error::Unsupported("convolution characters live on the base field".into()));
        }
        let h = self.top();
        let base = self.f.base();
        if self.is_singular(h, base, 1, y)? {
            return Err(Error::PointInS(y));
        }
        let mut out = Vec::with_capacity(kmax as usize);
        for k in 1..=kmax {
            let t = self.f.level(k)?;
            let tab = self.table(h, k)?;
            let yk = self.f.embed(y, 1, k)?;
            let sing: Vec<Vec<u32>> = self
                .singular_points()
                .iter()
                .map(|p| self.embedded(&p.coeffs, k))
                .collect::<Result<_>>()?;
            if (0..t.size()).any(|u| tab.get(u).is_none() && !sing.iter().any(|c| horner(&t, c, u) == 0)) {
                return Err(Error::UnknownStalk(format!("stage {h} has unknown smooth values at level {k}")));
            }
            let hist = enumerate::current().accumulate(t.size(), self.m, &|u, acc| {
                if u == yk || sing.iter().any(|c| horner(&t, c, u) == 0) {
                    return;
                }
                if let (Some(pv), Some(s)) = (tab.get(u), self.char_shift(&t, chi.e, t.sub(yk, u))) {
                    rotate_add(acc, pv, s, -1);
                }
            });
            out.push(self.to_cyclo(&hist, h, k)?);
        }
        Ok(out)
    }

    /// `det(Frob_q)` on the stalk at rational `y` of the final stage, assuming dimension `d`.
    pub fn stalk_det(&self, y: u32, d: usize) -> Result<CycloNum> {
        det_from_power_sums(&self.stalk_power_sums(y, d as u32)?, d)
    }

    /// `det(Frob_q | H^1_c(U_y, G ⊗ L_chi(y - x)))` assuming dimension `d`.
    pub fn h1c_det(&self, chi: MulChar, y: u32, d: usize) -> Result<CycloNum> {
        det_from_power_sums(&self.h1c_power_sums(chi, y, d as u32)?, d)
    }
}

/// Elementary symmetric functions `e_0..e_n` of the eigenvalues from power sums `p_1..p_n`.
pub fn newton_elementary(p: &[CycloNum]) -> Result<Vec<CycloNum>> {
    let mut e = vec![CycloNum::one()];
    for k in 1..=p.len() {
        let mut acc = CycloNum::zero();
        for i in 1..=k {
            let term = e[k - i].mul(&p[i - 1]);
            acc = if i % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
        }
        e.push(acc.div(&CycloNum::from_int(k as i64))?);
    }
    Ok(e)
}

/// Coefficients of `det(1 - t Frob)` from the first `d` power sums.
pub fn charpoly_from_power_sums(p: &[CycloNum], d: usize) -> Result<Vec<CycloNum>> {
    if p.len() < d {
        return Err(Error::InconsistentTraces(d));
    }
    let e = newton_elementary(&p[..d])?;
    Ok(e.into_iter().enumerate().map(|(k, c)| if k % 2 == 0 { c } else { c.neg() }).collect())
}

/// `det(Frob) = e_d`.
pub fn det_from_power_sums(p: &[CycloNum], d: usize) -> Result<CycloNum> {
    if p.len() < d {
        return Err(Error::InconsistentTraces(d));
    }
    Ok(newton_elementary(&p[..d])?.pop().unwrap())
}

/// Smallest `d` whose Newton reconstruction from `p_1..p_d` predicts every
/// remaining supplied power sum.
///
/// `p` must contain at least `2 * bound` power sums for the search to reach
/// `bound`; supplying more makes the recovery stricter.
pub fn recover_dimension(p: &[CycloNum], bound: usize) -> Result<usize> {
    for d in 0..=bound {
        if (2 * d).max(d + 1) > p.len() {
            return Err(Error::DimensionOverflow { dim: d, bound: p.len() / 2 });
        }
        let e = newton_elementary(&p[..d])?;
        if d > 0 && e[d].is_zero() {
            continue;
        }
        let consistent = (d + 1..=p.len()).all(|k| {
            let mut pred = CycloNum::zero();
            for i in 1..=d {
                let term = e[i].mul(&p[k - i - 1]);
                pred = if i % 2 == 1 { pred.add(&term) } else { pred.sub(&term) };
            }
            pred == p[k - 1]
        });
        if consistent {
            return Ok(d);
        }
    }
    Err(Error::InconsistentTraces(bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    fn factor(f: &FieldSpec, a: u32, e: u64) -> KummerFactor {
        KummerFactor { point: PointOrbit::rational(f, a), chi_e: e }
    }

    #[test]
    fn base_traces() {
        let f5 = make_field(5, 1).unwrap();
        let e = ExplicitSheaf::kummer(&f5, vec![factor(&f5, 0, 2)], CycloNum::one());
        let o = Oracle::new(&f5, &e).unwrap();
        assert_eq!(o.trace_point(1, 4).unwrap(), CycloNum::one());
        let f3 = make_field(3, 1).unwrap();
        let e = ExplicitSheaf::kummer(&f3, vec![factor(&f3, 0, 1), factor(&f3, 1, 1)], CycloNum::one());
        let o = Oracle::new(&f3, &e).unwrap();
        assert_eq!(o.trace_point(1, 2).unwrap(), CycloNum::from_int(-1));
        assert_eq!(o.trace_point(1, 0).unwrap(), CycloNum::zero());
    }

    #[test]
    fn newton_round_trip() {
        let roots = [CycloNum::from_int(2), CycloNum::from_int(-3), CycloNum::root_of_unity(4, 1)];
        let p: Vec<CycloNum> = (1..=6)
            .map(|k| roots.iter().fold(CycloNum::zero(), |acc, r| acc.add(&r.pow(k).unwrap())))
            .collect();
        assert_eq!(recover_dimension(&p, 3).unwrap(), 3);
        let det = det_from_power_sums(&p, 3).unwrap();
        assert_eq!(det, roots.iter().fold(CycloNum::one(), |a, r| a.mul(r)));
    }

    #[test]
    fn rank_one_h1c() {
        let f = make_field(5, 1).unwrap();
        let e = ExplicitSheaf::kummer(&f, vec![factor(&f, 0, 1)], CycloNum::one());
        let o = Oracle::new(&f, &e).unwrap();
        let chi = MulChar { l: 1, e: 2 };
        let p = o.h1c_power_sums(chi, 1, 4).unwrap();
        assert_eq!(recover_dimension(&p, 2).unwrap(), 1);
    }
}
