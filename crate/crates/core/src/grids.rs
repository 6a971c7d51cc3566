// SPDX-License-Identifier: Apache-2.0

//! Deterministic instance grids for the check suites.
//!
//! Every grid is drawn from a fixed-seed ChaCha stream, so two runs (and two
//! enumeration backends) see the same instances in the same order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cyclo::CycloNum;
use crate::field::{make_field, FieldSpec, MulChar};
use crate::localdata::PointOrbit;
use crate::oracle::{ExplicitSheaf, KummerFactor};

/// A rank-1 Kummer product `c^deg ⊗ ⊗_i L_{e_i}(P_i(x))` paired with a convolution character.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KummerInstance {
    pub p: u64,
    pub m: u32,
    pub factors: Vec<(PointOrbit, u64)>,
    pub constant: CycloNum,
    pub chi: MulChar,
    /// Rational points outside the singular locus.
    pub samples: Vec<u32>,
}

impl KummerInstance {
    pub fn field(&self) -> std::sync::Arc<FieldSpec> {
        make_field(self.p, self.m).expect("grid fields are valid")
    }

    pub fn kummer_factors(&self) -> Vec<KummerFactor> {
        self.factors
            .iter()
            .map(|(p, e)| KummerFactor { point: p.clone(), chi_e: *e })
            .collect()
    }

    pub fn explicit(&self, f: &FieldSpec) -> ExplicitSheaf {
        ExplicitSheaf::kummer(f, self.kummer_factors(), self.constant.clone())
    }

    pub fn total_degree(&self) -> u32 {
        self.factors.iter().map(|(p, _)| p.degree()).sum()
    }

    pub fn has_degree_two_point(&self) -> bool {
        self.factors.iter().any(|(p, _)| p.degree() == 2)
    }

    /// Short human-readable identifier.
    pub fn label(&self) -> String {
        let pts: Vec<String> = self
            .factors
            .iter()
            .map(|(p, e)| format!("{:?}^{e}", p.coeffs))
            .collect();
        let q = self.p.pow(self.m);
        format!("q={q} chi={} [{}] c={}", self.chi.e, pts.join(","), self.constant)
    }
}

/// All monic irreducible polynomials of degree `d` over `F_q`, in code order.
pub fn irreducibles(f: &FieldSpec, d: u32) -> Vec<PointOrbit> {
    let q = f.q();
    (0..q.pow(d))
        .filter_map(|mut code| {
            let mut coeffs = Vec::with_capacity(d as usize + 1);
            for _ in 0..d {
                coeffs.push((code % q) as u32);
                code /= q;
            }
            coeffs.push(1);
            let pt = PointOrbit { coeffs };
            pt.validate(f).is_ok().then_some(pt)
        })
        .collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn samples_outside(f: &FieldSpec, factors: &[(PointOrbit, u64)]) -> Vec<u32> {
    (0..f.q() as u32)
        .filter(|&y| factors.iter().all(|(p, _)| p.eval_base(f, y) != 0))
        .collect()
}

/// Draw a standard-situation instance: the last factor is rational and absorbs
/// the infinity constraint `-sum e_i deg_i = e_chi`. `first` pins the exponent
/// of the first factor. Returns `None` on a degenerate draw.
fn draw(
    f: &FieldSpec,
    chi: MulChar,
    degrees: &[u32],
    first: Option<u64>,
    min_samples: usize,
    r: &mut ChaCha8Rng,
) -> Option<KummerInstance> {
    let m = f.q() - 1;
    let mut factors: Vec<(PointOrbit, u64)> = Vec::new();
    let mut sum = 0u64;
    for (i, &d) in degrees.iter().enumerate() {
        let last = i + 1 == degrees.len();
        let pool: Vec<PointOrbit> = irreducibles(f, d)
            .into_iter()
            .filter(|p| factors.iter().all(|(u, _)| u != p))
            .collect();
        let pt = pool.choose(r)?.clone();
        let e = match (i, first) {
            _ if last => {
                if d != 1 {
                    return None;
                }
                (2 * m * m - chi.e - sum) % m
            }
            (0, Some(e)) => e % m,
            _ => r.gen_range(1..m),
        };
        if e == 0 {
            return None;
        }
        sum = (sum + e * d as u64) % m;
        factors.push((pt, e));
    }
    let samples = samples_outside(f, &factors);
    if samples.len() < min_samples || (factors.len() == 1 && factors[0].0.degree() == 1) {
        return None;
    }
    let d = f.descriptor();
    Some(KummerInstance { p: d.p as u64, m: d.m, factors, constant: CycloNum::one(), chi, samples })
}

/// Characters of order 2 and (when `4 | q - 1`) of order 4.
fn order_two_and_four(f: &FieldSpec) -> Vec<MulChar> {
    let q = f.q();
    let mut chis = vec![f.quadratic(1).expect("odd q")];
    if (q - 1) % 4 == 0 {
        chis.push(MulChar { l: 1, e: (q - 1) / 4 });
        chis.push(MulChar { l: 1, e: 3 * (q - 1) / 4 });
    }
    chis
}

/// Rank-1 standard instances over `q in {3, 5, 7, 9}` with total degree at most 4,
/// characters of order 2 and 4, and several degree-2 closed points.
pub fn determinant_grid() -> Vec<KummerInstance> {
    let mut out: Vec<KummerInstance> = Vec::new();
    let specs: &[(u64, u32, &[&[u32]])] = &[
        (3, 1, &[&[3]]),
        (5, 1, &[&[1, 1], &[2, 1], &[1, 1, 1], &[2, 1, 1], &[1, 2, 1]]),
        (7, 1, &[&[1, 1], &[2, 1], &[1, 1, 1]]),
        (3, 2, &[&[1, 1], &[2, 1], &[1, 1, 1]]),
    ];
    let mut r = rng(0x4d43);
    for &(p, m, shapes) in specs {
        let f = make_field(p, m).expect("grid field");
        let q = f.q();
        for shape in shapes {
            for chi in order_two_and_four(&f) {
                let want = match q {
                    3 => 3,
                    7 => 2,
                    _ => 1,
                };
                let mut got = 0;
                let mut tries = 0;
                while got < want && tries < 200 {
                    tries += 1;
                    if shape == &[3] {
                        // A single cubic point: -3e = e_chi holds for e = e_chi when chi is quadratic.
                        let pt = irreducibles(&f, 3).choose(&mut r).expect("cubics exist").clone();
                        let factors = vec![(pt, chi.e)];
                        if out.iter().any(|i| i.factors == factors) {
                            continue;
                        }
                        let samples = samples_outside(&f, &factors);
                        out.push(KummerInstance { p, m, factors, constant: CycloNum::one(), chi, samples });
                        got += 1;
                        continue;
                    }
                    if let Some(inst) = draw(&f, chi, shape, None, 3, &mut r) {
                        out.push(inst);
                        got += 1;
                    }
                }
            }
        }
    }
    out
}

/// Standard instances with a rational factor of exponent `-e_chi`, so that the
/// convolution carries a unipotent `J_2` block there.
pub fn jordan_grid() -> Vec<KummerInstance> {
    let mut out = Vec::new();
    let mut r = rng(0x4a32);
    for &(p, want) in &[(3u64, 2usize), (5, 2), (7, 2)] {
        let f = make_field(p, 1).expect("grid field");
        let m = f.q() - 1;
        for chi in order_two_and_four(&f) {
            let mut got = 0;
            let mut tries = 0;
            while got < want && tries < 200 {
                tries += 1;
                let shape: &[u32] = if tries % 2 == 0 { &[1, 1, 1] } else { &[1, 2, 1] };
                if let Some(inst) = draw(&f, chi, shape, Some(m - chi.e), 2, &mut r) {
                    if !out.contains(&inst) {
                        out.push(inst);
                        got += 1;
                    }
                }
            }
        }
    }
    out
}

/// Quadratic-character instances satisfying the hypotheses of the quadratic
/// determinant theorem: every exponent quadratic, odd total degree, constant `±1`.
pub fn quadratic_grid() -> Vec<KummerInstance> {
    let mut out = Vec::new();
    for &(p, per_q) in &[(3u64, 4usize), (5, 4), (7, 4)] {
        let f = make_field(p, 1).expect("grid field");
        let quad = f.quadratic(1).expect("odd q");
        let rational: Vec<PointOrbit> = (0..f.q() as u32).map(|a| PointOrbit::rational(&f, a)).collect();
        let quadrics = irreducibles(&f, 2);
        let mut cands: Vec<Vec<PointOrbit>> = vec![
            rational[..3].to_vec(),
            vec![rational[0].clone(), quadrics[0].clone()],
            vec![rational[1].clone(), quadrics[quadrics.len() - 1].clone()],
        ];
        if f.q() >= 5 {
            cands.push(rational[..5].to_vec());
        } else {
            cands.push(vec![rational[2].clone(), quadrics[1].clone()]);
        }
        for (i, pts) in cands.into_iter().take(per_q).enumerate() {
            let factors: Vec<(PointOrbit, u64)> = pts.into_iter().map(|pt| (pt, quad.e)).collect();
            let constant = CycloNum::from_int(if i % 2 == 0 { 1 } else { -1 });
            let samples = samples_outside(&f, &factors);
            out.push(KummerInstance { p, m: 1, factors, constant, chi: quad, samples });
        }
    }
    out
}

/// Rank-1 standard instances for the involution test: small `q` so that the
/// second convolution stays cheap, mixing `chi(-1) = 1` and `chi(-1) = -1`.
pub fn involution_grid() -> Vec<KummerInstance> {
    let mut out = Vec::new();
    let mut r = rng(0x4976);
    let specs: &[(u64, &[&[u32]])] = &[(3, &[&[2, 1], &[1, 1, 1]]), (5, &[&[1, 1], &[2, 1], &[1, 1, 1]]), (7, &[&[1, 1]])];
    for &(p, shapes) in specs {
        let f = make_field(p, 1).expect("grid field");
        for shape in shapes {
            for chi in order_two_and_four(&f) {
                for _ in 0..50 {
                    if let Some(inst) = draw(&f, chi, shape, None, 1, &mut r) {
                        out.push(inst);
                        break;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_reproducible_and_large_enough() {
        let a = determinant_grid();
        assert_eq!(a, determinant_grid());
        assert!(a.len() >= 30, "{}", a.len());
        assert!(a.iter().filter(|i| i.has_degree_two_point()).count() >= 5);
        assert!(a.iter().all(|i| i.total_degree() <= 4 && i.samples.len() >= 3));
        assert!(jordan_grid().len() >= 5);
        assert!(quadratic_grid().len() >= 10);
        assert!(involution_grid().len() >= 5);
    }
}
