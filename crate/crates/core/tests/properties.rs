// SPDX-License-Identifier: Apache-2.0

//! Property tests for the exact-arithmetic and epsilon invariants.

use mcconv::cyclo::CycloNum;
use mcconv::epsilon::{det_h1c, epsilon0_block, epsilon0_block_graded, epsilon0_point, h1c_dimension, EpsilonContext};
use mcconv::field::{make_field, FieldSpec, MulChar};
use mcconv::grids::determinant_grid;
use mcconv::localdata::{tate_twist_local, twist_unramified, Conventions, LocalData, SheafData, TameBlock};
use mcconv::mc::{mc_rank, mc_sheaf};
use proptest::prelude::*;

const PRIMES: [u64; 3] = [3, 5, 7];

fn unit(f: &FieldSpec, k: i64, j: i64) -> CycloNum {
    CycloNum::root_of_unity(f.q() - 1, k).mul(&CycloNum::int_pow(f.q(), j))
}

/// A valid tame block from raw draws, or `None` when the induced character is not regular.
fn block(f: &FieldSpec, deg: u32, n: u32, induced: bool, e_raw: u64, k: i64, j: i64) -> Option<TameBlock> {
    let l = if induced { 2 } else { 1 };
    let modulus = f.q_pow(deg * l) - 1;
    let e = e_raw % modulus;
    if induced && (e as u128 * f.q_pow(deg) as u128 % modulus as u128) as u64 == e {
        return None;
    }
    Some(TameBlock::new(n, l, e, unit(f, k, j)))
}

prop_compose! {
    fn raw_block()(n in 1u32..=3, induced in any::<bool>(), e in 0u64..10_000, k in 0i64..12, j in -2i64..=2)
        -> (u32, bool, u64, i64, i64) { (n, induced, e, k, j) }
}

fn local(f: &FieldSpec, deg: u32, raws: &[(u32, bool, u64, i64, i64)]) -> Option<LocalData> {
    let blocks: Option<Vec<_>> = raws.iter().map(|&(n, i, e, k, j)| block(f, deg, n, i, e, k, j)).collect();
    Some(LocalData::new(deg, blocks?))
}

fn conv() -> Conventions {
    Conventions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cyclo_field_axioms(a in -50i64..50, b in 1i64..50, k in 0i64..24, n in prop::sample::select(vec![3u64, 4, 8, 12])) {
        let x = CycloNum::root_of_unity(n, k).mul_int(a).add(&CycloNum::frac(1, b));
        let y = CycloNum::root_of_unity(n, k + 1).add(&CycloNum::from_int(b));
        prop_assert_eq!(x.mul(&y), y.mul(&x));
        prop_assert_eq!(x.add(&y).sub(&y), x.clone());
        if !x.is_zero() {
            prop_assert_eq!(x.mul(&x.inv().unwrap()), CycloNum::one());
        }
        let json = serde_json::to_string(&x).unwrap();
        prop_assert_eq!(serde_json::from_str::<CycloNum>(&json).unwrap(), x);
    }

    #[test]
    fn signed_q_powers_round_trip(pi in 0usize..3, m in -6i64..6, neg in any::<bool>()) {
        let q = PRIMES[pi];
        let v = CycloNum::int_pow(q, m).mul_int(if neg { -1 } else { 1 });
        prop_assert_eq!(v.is_signed_q_power(q).unwrap(), Some((if neg { -1 } else { 1 }, m)));
        prop_assert_eq!(v.mul(&CycloNum::root_of_unity(3, 1)).is_signed_q_power(q).unwrap(), None);
    }

    #[test]
    fn epsilon_closed_form_matches_graded(pi in 0usize..3, deg in 1u32..=2, raw in raw_block()) {
        let f = make_field(PRIMES[pi], 1).unwrap();
        let (n, i, e, k, j) = raw;
        let Some(b) = block(&f, deg, n, i, e, k, j) else { return Ok(()) };
        prop_assert_eq!(epsilon0_block(&f, &b, deg, conv()).unwrap(), epsilon0_block_graded(&f, &b, deg, conv()).unwrap());
    }

    #[test]
    fn epsilon_is_multiplicative(pi in 0usize..3, deg in 1u32..=2,
                                 a in prop::collection::vec(raw_block(), 1..3),
                                 b in prop::collection::vec(raw_block(), 1..3)) {
        let f = make_field(PRIMES[pi], 1).unwrap();
        let (Some(la), Some(lb)) = (local(&f, deg, &a), local(&f, deg, &b)) else { return Ok(()) };
        let both = LocalData::new(deg, la.blocks.iter().chain(&lb.blocks).cloned().collect());
        let one = CycloNum::one();
        let ea = epsilon0_point(&f, &la, &one, conv()).unwrap();
        let eb = epsilon0_point(&f, &lb, &one, conv()).unwrap();
        prop_assert_eq!(epsilon0_point(&f, &both, &one, conv()).unwrap(), ea.mul(&eb));
    }

    #[test]
    fn epsilon_tate_twist_law(pi in 0usize..3, deg in 1u32..=2, m in -2i64..=2,
                              a in prop::collection::vec(raw_block(), 1..4)) {
        let f = make_field(PRIMES[pi], 1).unwrap();
        let Some(l) = local(&f, deg, &a) else { return Ok(()) };
        let one = CycloNum::one();
        let base = epsilon0_point(&f, &l, &one, conv()).unwrap();
        let tw = epsilon0_point(&f, &tate_twist_local(&f, &l, m), &one, conv()).unwrap();
        prop_assert_eq!(tw, base.mul(&CycloNum::int_pow(f.q_pow(deg), -m * l.rank() as i64)));
    }

    #[test]
    fn epsilon_unramified_twist_law(pi in 0usize..3, deg in 1u32..=2, k in 0i64..12, j in -1i64..=1,
                                    a in prop::collection::vec(raw_block(), 1..4)) {
        let f = make_field(PRIMES[pi], 1).unwrap();
        let Some(l) = local(&f, deg, &a) else { return Ok(()) };
        let beta = unit(&f, k, j);
        let one = CycloNum::one();
        let base = epsilon0_point(&f, &l, &one, conv()).unwrap();
        prop_assert_eq!(epsilon0_point(&f, &l, &beta, conv()).unwrap(), base.mul(&beta.pow(l.rank() as i64).unwrap()));
        let twisted = twist_unramified(&l, &beta).unwrap();
        prop_assert_eq!(epsilon0_point(&f, &twisted, &one, conv()).unwrap(), epsilon0_point(&f, &l, &beta, conv()).unwrap());
    }

    #[test]
    fn sheaf_json_round_trip(idx in 0usize..30) {
        let grid = determinant_grid();
        let inst = &grid[idx % grid.len()];
        let f = inst.field();
        let sym = inst.explicit(&f).base_data(&f).unwrap();
        let g = mc_sheaf(&f, &sym, inst.chi, conv()).unwrap();
        for s in [&sym, &g] {
            let json = serde_json::to_string(s).unwrap();
            let back: SheafData = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, s);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), json);
        }
    }
}

/// `det_h1c(F(1)) = det_h1c(F) q^{-d}` over the whole determinant grid.
#[test]
fn det_h1c_tate_twist_law() {
    for inst in determinant_grid() {
        let f = inst.field();
        let sym = inst.explicit(&f).base_data(&f).unwrap();
        let ctx = EpsilonContext { field: &f, conventions: conv() };
        let twisted = sym.tate_twist(&f, 1);
        let d = h1c_dimension(&sym) as i64;
        for &y in &inst.samples {
            let a = det_h1c(ctx, &twisted, inst.chi, y).unwrap();
            let b = det_h1c(ctx, &sym, inst.chi, y).unwrap().mul(&CycloNum::int_pow(f.q(), -d));
            assert_eq!(a, b, "{} y={y}", inst.label());
        }
    }
}

/// Convolving with a character and then its inverse returns to rank 1.
#[test]
fn rank_returns_after_inverse_convolution() {
    for inst in determinant_grid() {
        let f = inst.field();
        let sym = inst.explicit(&f).base_data(&f).unwrap();
        let g = mc_sheaf(&f, &sym, inst.chi, conv()).unwrap();
        let inv: MulChar = f.char_inv(inst.chi);
        assert_eq!(mc_rank(&g, inv).unwrap(), 1, "{}", inst.label());
    }
}
