// SPDX-License-Identifier: Apache-2.0

//! Gauss and Jacobi sums.
//!
//! `g(chi) = -sum_{x != 0} chi(x) psi(x)` with `psi = zeta_p^{Tr}` and
//! `g(trivial) = 1`; `J(chi, chi') = sum_a chi(a) chi'(1 - a)` with every
//! character sending 0 to 0.

use num_integer::Integer;

use crate::cyclo::CycloNum;
use crate::enumerate;
use crate::field::{FieldError, FieldSpec, MulChar};

/// Exact Gauss sum of a character of `F_{q^l}`.
pub fn gauss_sum(f: &FieldSpec, chi: MulChar) -> Result<CycloNum, FieldError> {
    f.cached_sum((0, chi, chi), || gauss_sum_uncached(f, chi))
}

/// [`gauss_sum`] without memoization.
pub fn gauss_sum_uncached(f: &FieldSpec, chi: MulChar) -> Result<CycloNum, FieldError> {
    if chi.is_trivial() {
        return Ok(CycloNum::one());
    }
    let t = f.level(chi.l)?;
    let big = f.q_pow(chi.l) - 1;
    let g = chi.e.gcd(&big);
    let ord = big / g;
    let step = chi.e / g;
    let p = f.p() as u64;
    let n = p * ord;
    let hist = enumerate::current().accumulate(t.size(), n as usize, &|x, acc| {
        if let Some(lg) = t.log(x) {
            let a = (step as u128 * lg as u128 % ord as u128) as u64;
            let tr = t.trace(x) as u64;
            acc[((a * p + tr * ord) % n) as usize] -= 1;
        }
    });
    Ok(CycloNum::from_histogram(n, &hist))
}

/// Exact Jacobi sum of two characters of the same field.
pub fn jacobi_sum(f: &FieldSpec, chi: MulChar, chi2: MulChar) -> Result<CycloNum, FieldError> {
    f.cached_sum((1, chi, chi2), || jacobi_sum_uncached(f, chi, chi2))
}

/// [`jacobi_sum`] without memoization.
pub fn jacobi_sum_uncached(f: &FieldSpec, chi: MulChar, chi2: MulChar) -> Result<CycloNum, FieldError> {
    if chi.l != chi2.l {
        return Err(FieldError::DegreeMismatch { expected: chi.l, found: chi2.l });
    }
    let t = f.level(chi.l)?;
    let big = f.q_pow(chi.l) - 1;
    let o1 = big / chi.e.gcd(&big);
    let o2 = big / chi2.e.gcd(&big);
    let n = o1.lcm(&o2);
    let s1 = chi.e / (big / o1) * (n / o1);
    let s2 = chi2.e / (big / o2) * (n / o2);
    let hist = enumerate::current().accumulate(t.size(), n as usize, &|a, acc| {
        let b = t.sub(1, a);
        if let (Some(la), Some(lb)) = (t.log(a), t.log(b)) {
            let k = (s1 as u128 * la as u128 + s2 as u128 * lb as u128) % n as u128;
            acc[k as usize] += 1;
        }
    });
    Ok(CycloNum::from_histogram(n, &hist))
}

/// `chi(-1)` as `+1` or `-1`.
pub fn chi_minus_one(f: &FieldSpec, chi: MulChar) -> Result<CycloNum, FieldError> {
    let t = f.level(chi.l)?;
    f.char_eval_code(chi, t.neg(1))
}

/// Verdict of `g(chi) g(chi^-1) = chi(-1) q^l` for nontrivial `chi`.
pub fn gauss_pair_identity_check(f: &FieldSpec, chi: MulChar) -> Result<bool, FieldError> {
    let lhs = gauss_sum(f, chi)?.mul(&gauss_sum(f, f.char_inv(chi))?);
    let rhs = chi_minus_one(f, chi)?.mul(&CycloNum::int_pow(f.q_pow(chi.l), 1));
    Ok(lhs == rhs)
}

/// Verdict of `J(chi, chi') g(chi chi') = -g(chi) g(chi')` when all three characters are nontrivial.
pub fn jacobi_gauss_relation_check(f: &FieldSpec, chi: MulChar, chi2: MulChar) -> Result<bool, FieldError> {
    let prod = f.char_mul(chi, chi2)?;
    let lhs = jacobi_sum(f, chi, chi2)?.mul(&gauss_sum(f, prod)?);
    let rhs = gauss_sum(f, chi)?.mul(&gauss_sum(f, chi2)?).neg();
    Ok(lhs == rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    #[test]
    fn quadratic_gauss_sum_over_f3() {
        let f = make_field(3, 1).unwrap();
        let chi = f.quadratic(1).unwrap();
        let g = gauss_sum(&f, chi).unwrap();
        let expected = CycloNum::root_of_unity(3, 2).sub(&CycloNum::root_of_unity(3, 1));
        assert_eq!(g, expected);
        assert_eq!(g.mul(&g), CycloNum::from_int(-3));
    }

    #[test]
    fn jacobi_small_cases() {
        let f = make_field(5, 1).unwrap();
        assert_eq!(jacobi_sum(&f, MulChar::trivial(1), MulChar::trivial(1)).unwrap(), CycloNum::from_int(3));
        let f3 = make_field(3, 1).unwrap();
        let chi = f3.quadratic(1).unwrap();
        assert_eq!(jacobi_sum(&f3, chi, chi).unwrap(), CycloNum::one());
    }

    #[test]
    fn pair_identity_small_fields() {
        let f5 = make_field(5, 1).unwrap();
        let chi = MulChar { l: 1, e: 1 };
        let prod = gauss_sum(&f5, chi).unwrap().mul(&gauss_sum(&f5, f5.char_inv(chi)).unwrap());
        assert_eq!(prod, CycloNum::from_int(-5));
        assert!(gauss_pair_identity_check(&f5, chi).unwrap());
        let f7 = make_field(7, 1).unwrap();
        let q = f7.quadratic(1).unwrap();
        let g = gauss_sum(&f7, q).unwrap();
        assert_eq!(g.mul(&g), CycloNum::from_int(-7));
    }
}
