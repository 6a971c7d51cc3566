// SPDX-License-Identifier: Apache-2.0

//! A naive brute-force reference shared by the integration tests. It avoids the
//! crate's oracle module and evaluates every character through explicit norms.

#![allow(dead_code)]

use mcconv::cyclo::CycloNum;
use mcconv::field::FieldSpec;
pub use mcconv::grids::KummerInstance;

/// `chi(N_{F_{q^k}/F_q}(z))` as an exponent of `zeta_{q-1}`.
fn char_exp(f: &FieldSpec, e: u64, z: u32, k: u32) -> Option<u64> {
    let n = f.norm(z, k, 1).unwrap();
    let lg = f.base().log(n)?;
    Some((e * lg as u64) % (f.q() - 1))
}

/// Naive `E_k(u)` exponent for a rank-1 product; `None` on the singular locus.
fn kummer_exp(f: &FieldSpec, inst: &KummerInstance, u: u32, k: u32) -> Option<u64> {
    let mut acc = 0u64;
    for (p, e) in &inst.factors {
        let v = f.eval_poly(&p.coeffs, u, k).unwrap();
        acc += char_exp(f, *e, v, k)?;
    }
    Some(acc % (f.q() - 1))
}

/// `Tr(Frob_{q^k} | H^1_c(U_y, E ⊗ L_chi(y - x)))` by direct summation.
pub fn naive_h1c_trace(f: &FieldSpec, inst: &KummerInstance, y: u32, k: u32) -> CycloNum {
    let t = f.level(k).unwrap();
    let m = (f.q() - 1) as usize;
    let yk = f.embed(y, 1, k).unwrap();
    let mut hist = vec![0i64; m];
    for u in 0..t.size() {
        if let (Some(a), Some(b)) = (kummer_exp(f, inst, u, k), char_exp(f, inst.chi.e, t.sub(yk, u), k)) {
            hist[((a + b) % m as u64) as usize] -= 1;
        }
    }
    CycloNum::from_histogram(m as u64, &hist).mul(&inst.constant.pow(k as i64).unwrap())
}

/// Trace of `MC_chi(E)` at rational `y` outside `S`: the `H^1_c` trace minus the
/// infinity invariant `chi(-1)^k c^k` (no invariants at finite points for nontrivial factors).
pub fn naive_mc_trace(f: &FieldSpec, inst: &KummerInstance, y: u32, k: u32) -> CycloNum {
    let t = f.level(k).unwrap();
    let sign = char_exp(f, inst.chi.e, t.neg(1), k).unwrap();
    let m = f.q() - 1;
    let inf = CycloNum::root_of_unity(m, sign as i64).mul(&inst.constant.pow(k as i64).unwrap());
    naive_h1c_trace(f, inst, y, k).sub(&inf)
}

/// `det` from power sums by Newton's identities.
pub fn newton_det(p: &[CycloNum]) -> CycloNum {
    let mut e = vec![CycloNum::one()];
    for k in 1..=p.len() {
        let mut acc = CycloNum::zero();
        for i in 1..=k {
            let term = e[k - i].mul(&p[i - 1]);
            acc = if i % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
        }
        e.push(acc.div(&CycloNum::from_int(k as i64)).unwrap());
    }
    e.pop().unwrap()
}
