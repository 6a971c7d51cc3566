// SPDX-License-Identifier: Apache-2.0

//! Named check suites behind one trait, run by the `check` command and by the
//! acceptance tests.
//!
//! Every check walks a deterministic grid (see [`crate::grids`]) and compares
//! exact values. Outcomes carry no timing except in `approx_*` fields, so two
//! runs on different enumeration backends serialize identically.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::charsum::{chi_minus_one, gauss_pair_identity_check, jacobi_gauss_relation_check};
use crate::cyclo::CycloNum;
use crate::enumerate;
use crate::epsilon::{
    det_h1c, det_mc, epsilon0_block, epsilon0_block_graded, epsilon0_point, h1c_dimension, quadratic_det_check,
    EpsilonContext,
};
use crate::error::Result;
use crate::field::{make_field, FieldSpec, MulChar};
use crate::grids::{determinant_grid, involution_grid, jordan_grid, quadratic_grid};
use crate::localdata::{tate_twist_local, Conventions, LocalData, SheafData, TameBlock};
use crate::mc::{mc_rank, mc_sheaf};
use crate::oracle::{recover_dimension, HistoryStep, Oracle};
use crate::pipeline::{associativity_probe, cross_check, PipelineConfig};

/// Settings shared by every check.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SuiteConfig {
    pub conventions: Conventions,
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub name: String,
    pub criterion: String,
    pub passed: bool,
    pub instances: usize,
    pub evaluations: usize,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub approx_metrics: BTreeMap<String, f64>,
}

impl Outcome {
    /// The outcome without its timing fields, for identity comparisons.
    pub fn exact_part(&self) -> Outcome {
        Outcome { approx_metrics: BTreeMap::new(), ..self.clone() }
    }

    /// One-line summary: `NAME PASS|FAIL instances=.. evaluations=.. failures=..`.
    pub fn line(&self) -> String {
        format!(
            "{} {} instances={} evaluations={} failures={}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.instances,
            self.evaluations,
            self.failures.len()
        )
    }
}

/// A named, self-contained check.
pub trait Check: Send + Sync {
    fn name(&self) -> &'static str;
    /// What the check establishes, in one line.
    fn criterion(&self) -> &'static str;
    fn run(&self, cfg: &SuiteConfig) -> Outcome;
}

/// Accumulator for instance counts and failures.
struct Tally {
    instances: usize,
    evaluations: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

/// Failures beyond this count are summarized rather than listed.
const MAX_LISTED_FAILURES: usize = 20;

impl Tally {
    fn new() -> Self {
        Tally { instances: 0, evaluations: 0, failures: Vec::new(), notes: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.evaluations += 1;
        if !ok {
            self.fail(what());
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    /// Record `Err` values as failures and pass `Ok` values through.
    fn ok<T>(&mut self, r: Result<T>, ctx: impl FnOnce() -> String) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.evaluations += 1;
                self.fail(format!("{}: {}: {e}", ctx(), e.code()));
                None
            }
        }
    }

    fn finish(self, c: &dyn Check, extra_pass: bool) -> Outcome {
        let mut failures = self.failures;
        let total = failures.len();
        if total > MAX_LISTED_FAILURES {
            failures.truncate(MAX_LISTED_FAILURES);
            failures.push(format!("... and {} more", total - MAX_LISTED_FAILURES));
        }
        Outcome {
            name: c.name().into(),
            criterion: c.criterion().into(),
            passed: total == 0 && extra_pass && self.evaluations > 0,
            instances: self.instances,
            evaluations: self.evaluations,
            failures,
            notes: self.notes,
            approx_metrics: BTreeMap::new(),
        }
    }
}

fn ctx(f: &FieldSpec, conv: Conventions) -> EpsilonContext<'_> {
    EpsilonContext { field: f, conventions: conv }
}

/// Stalk dimension at rational `y` recovered from `kmax` oracle power sums.
fn oracle_dim(o: &Oracle<'_>, y: u32, kmax: u32) -> Result<usize> {
    recover_dimension(&o.stalk_power_sums(y, kmax)?, kmax as usize / 2)
}

/// Largest `k` with `q^k <= limit`.
fn levels_within(f: &FieldSpec, limit: u64) -> u32 {
    let mut k = 0;
    while f.q().pow(k + 1) <= limit {
        k += 1;
    }
    k
}

// ---------------------------------------------------------------------------

/// Gauss and Jacobi sum identities over every character of the listed fields.
pub struct GaussJacobi;

impl Check for GaussJacobi {
    fn name(&self) -> &'static str {
        "AC-1"
    }
    fn criterion(&self) -> &'static str {
        "orthogonality, g(chi)g(chi^-1) = chi(-1)q and J = -g g'/g(chi chi') for q in {3,5,7,9,11,13,25,27,49}"
    }
    fn run(&self, _cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        for (p, m) in [(3, 1), (5, 1), (7, 1), (3, 2), (11, 1), (13, 1), (5, 2), (3, 3), (7, 2)] {
            let f = make_field(p, m).expect("fixed field list");
            let q = f.q();
            let n = q - 1;
            t.instances += 1;
            let base = f.base().clone();
            for e in 0..n {
                let chi = MulChar { l: 1, e };
                let mut sum = CycloNum::zero();
                for x in 0..q as u32 {
                    sum = sum.add(&f.char_eval_code(chi, x).expect("base character"));
                }
                let want = if e == 0 { CycloNum::from_int(n as i64) } else { CycloNum::zero() };
                t.expect(sum == want, || format!("q={q}: sum_x chi_{e}(x) = {sum}"));
            }
            for x in 1..q as u32 {
                let mut sum = CycloNum::zero();
                for e in 0..n {
                    sum = sum.add(&f.char_eval_code(MulChar { l: 1, e }, x).expect("base character"));
                }
                let want = if x == base.exp(0) { CycloNum::from_int(n as i64) } else { CycloNum::zero() };
                t.expect(sum == want, || format!("q={q}: sum_chi chi({x}) = {sum}"));
            }
            for e in 1..n {
                let chi = MulChar { l: 1, e };
                let ok = gauss_pair_identity_check(&f, chi).unwrap_or(false);
                t.expect(ok, || format!("q={q}: g(chi)g(chi^-1) != chi(-1)q for e={e}"));
                for e2 in 1..n {
                    if (e + e2) % n == 0 {
                        continue;
                    }
                    let ok = jacobi_gauss_relation_check(&f, chi, MulChar { l: 1, e: e2 }).unwrap_or(false);
                    t.expect(ok, || format!("q={q}: Jacobi relation fails for ({e},{e2})"));
                }
            }
        }
        t.finish(self, true)
    }
}

// ---------------------------------------------------------------------------

/// Local epsilon calculus on generated blocks.
pub struct EpsilonCalculus;

/// A random tame block at a point of degree `deg` over `F_q`.
fn random_block(f: &FieldSpec, deg: u32, r: &mut ChaCha8Rng) -> TameBlock {
    let n = r.gen_range(1..=3u32);
    let qm1 = f.q() - 1;
    let unit = |r: &mut ChaCha8Rng| {
        CycloNum::root_of_unity(qm1, r.gen_range(0..qm1 as i64)).mul(&CycloNum::int_pow(f.q(), r.gen_range(-1..=1)))
    };
    if r.gen_bool(0.25) {
        return TameBlock::new(n, 1, 0, unit(r));
    }
    let l = if r.gen_bool(0.3) { 2 } else { 1 };
    let qs = f.q_pow(deg) as u128;
    let modulus = f.q_pow(deg * l) - 1;
    loop {
        let e = r.gen_range(1..modulus);
        // An induced block needs a character whose Frobenius orbit has full length.
        if l == 1 || (e as u128 * qs % modulus as u128) as u64 != e {
            return TameBlock::new(n, l, e, unit(r));
        }
    }
}

impl Check for EpsilonCalculus {
    fn name(&self) -> &'static str {
        "AC-2"
    }
    fn criterion(&self) -> &'static str {
        "epsilon multiplicativity, Tate-twist and unramified-twist laws, closed form vs graded expansion on >= 200 blocks"
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        let conv = cfg.conventions;
        let mut r = ChaCha8Rng::seed_from_u64(0x4532);
        let one = CycloNum::one();
        for &p in &[3u64, 5, 7] {
            let f = make_field(p, 1).expect("small prime field");
            for _ in 0..40 {
                let deg = if r.gen_bool(0.3) { 2 } else { 1 };
                let blocks: Vec<TameBlock> = (0..r.gen_range(2..=4)).map(|_| random_block(&f, deg, &mut r)).collect();
                t.instances += blocks.len();
                for b in &blocks {
                    let closed = t.ok(epsilon0_block(&f, b, deg, conv), || format!("closed {b:?}"));
                    let graded = t.ok(epsilon0_block_graded(&f, b, deg, conv), || format!("graded {b:?}"));
                    if let (Some(c), Some(g)) = (closed, graded) {
                        t.expect(c == g, || format!("q={p} deg={deg} {b:?}: closed {c} vs graded {g}"));
                    }
                }
                let cut = r.gen_range(1..blocks.len());
                let l1 = LocalData::new(deg, blocks[..cut].to_vec());
                let l2 = LocalData::new(deg, blocks[cut..].to_vec());
                let all = LocalData::new(deg, blocks.clone());
                let e = |d: &LocalData, t: &mut Tally| t.ok(epsilon0_point(&f, d, &one, conv), || "epsilon0_point".into());
                let (Some(e1), Some(e2), Some(e12)) = (e(&l1, &mut t), e(&l2, &mut t), e(&all, &mut t)) else {
                    continue;
                };
                t.expect(e12 == e1.mul(&e2), || format!("q={p}: multiplicativity fails on {blocks:?}"));
                let m = r.gen_range(-2..=2i64);
                let qs = f.q_pow(deg);
                if let Some(tw) = e(&tate_twist_local(&f, &all, m), &mut t) {
                    let want = e12.mul(&CycloNum::int_pow(qs, -m * all.rank() as i64));
                    t.expect(tw == want, || format!("q={p}: Tate twist ({m}) law fails on {blocks:?}"));
                }
                let beta = CycloNum::root_of_unity(f.q() - 1, r.gen_range(0..(f.q() - 1) as i64))
                    .mul(&CycloNum::int_pow(f.q(), r.gen_range(-1..=1)));
                if let Some(tw) = t.ok(epsilon0_point(&f, &all, &beta, conv), || "twisted epsilon".into()) {
                    let want = e12.mul(&beta.pow(all.rank() as i64).expect("nonzero beta"));
                    t.expect(tw == want, || format!("q={p}: unramified twist law fails on {blocks:?}"));
                }
            }
        }
        let enough = t.instances >= 200;
        t.notes.push(format!("{} generated blocks", t.instances));
        t.finish(self, enough)
    }
}

// ---------------------------------------------------------------------------

/// `det_h1c` and `det_mc` against the oracle's Newton-identity determinants.
pub struct DeterminantOracle;

impl Check for DeterminantOracle {
    fn name(&self) -> &'static str {
        "AC-3"
    }
    fn criterion(&self) -> &'static str {
        "det_h1c and det_mc equal the oracle determinant at >= 3 points on >= 30 Kummer configurations"
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        let grid = determinant_grid();
        let degree_two = grid.iter().filter(|i| i.has_degree_two_point()).count();
        for inst in &grid {
            t.instances += 1;
            let f = inst.field();
            let c = ctx(&f, cfg.conventions);
            let e = inst.explicit(&f);
            let label = inst.label();
            let Some(sym) = t.ok(e.base_data(&f), || label.clone()) else { continue };
            let Some(o) = t.ok(Oracle::new(&f, &e), || label.clone()) else { continue };
            let Some(og) = t.ok(Oracle::new(&f, &e.with_step(HistoryStep::Mc { chi_e: inst.chi.e })), || label.clone())
            else {
                continue;
            };
            let d = h1c_dimension(&sym) as usize;
            let Some(r) = t.ok(mc_rank(&sym, inst.chi), || label.clone()) else { continue };
            for &y in inst.samples.iter().take(3) {
                let a = t.ok(det_h1c(c, &sym, inst.chi, y), || format!("{label} y={y} det_h1c"));
                let b = t.ok(o.h1c_det(inst.chi, y, d), || format!("{label} y={y} oracle h1c"));
                if let (Some(a), Some(b)) = (a, b) {
                    t.expect(a == b, || format!("{label} y={y}: det_h1c {a} vs oracle {b}"));
                }
                let a = t.ok(det_mc(c, &sym, inst.chi, y), || format!("{label} y={y} det_mc"));
                let b = t.ok(og.stalk_det(y, r as usize), || format!("{label} y={y} oracle mc"));
                if let (Some(a), Some(b)) = (a, b) {
                    t.expect(a == b, || format!("{label} y={y}: det_mc {a} vs oracle {b}"));
                }
            }
        }
        let shape_ok = grid.len() >= 30 && degree_two >= 5;
        t.notes.push(format!("{} configurations, {degree_two} with a degree-2 point", grid.len()));
        t.finish(self, shape_ok)
    }
}

// ---------------------------------------------------------------------------

/// Ranks and local data of `MC_chi` probed through oracle traces.
pub struct RankAndLocalData;

/// Local blocks of `MC_chi` of a rank-1 Kummer product at `s`, from the case table alone.
fn expected_blocks(f: &FieldSpec, sym: &SheafData, idx: usize, chi: MulChar, rank: u32) -> Vec<(u32, u32, u64)> {
    let sp = &sym.singular[idx];
    let deg = sp.point.degree();
    let modulus = f.q_pow(deg) - 1;
    let chi_s = chi.e * (modulus / (f.q() - 1));
    let mut out = Vec::new();
    for b in &sp.blocks {
        let e = (b.chi_e + chi_s) % modulus;
        out.push(if e == 0 { (b.n + 1, 1, 0) } else { (b.n, b.l, e) });
    }
    let used: u32 = out.iter().map(|(n, l, _)| n * l).sum();
    out.extend((used..rank).map(|_| (1, 1, 0)));
    out.sort_unstable();
    out
}

fn block_shapes(blocks: &[TameBlock]) -> Vec<(u32, u32, u64)> {
    let mut v: Vec<_> = blocks.iter().map(|b| (b.n, b.l, b.chi_e)).collect();
    v.sort_unstable();
    v
}

/// Oracle budget for the second-convolution character probe.
const PROBE_FIELD_LIMIT: u64 = 2401;

impl Check for RankAndLocalData {
    fn name(&self) -> &'static str {
        "AC-4"
    }
    fn criterion(&self) -> &'static str {
        "mc_rank equals the recovered H^1_c dimension minus corrections; local characters at s match the case table under oracle probes"
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        let conv = cfg.conventions;
        let mut probes = 0usize;
        for inst in &determinant_grid() {
            t.instances += 1;
            let f = inst.field();
            let e = inst.explicit(&f);
            let label = inst.label();
            let Some(sym) = t.ok(e.base_data(&f), || label.clone()) else { continue };
            let Some(o) = t.ok(Oracle::new(&f, &e), || label.clone()) else { continue };
            let ge = e.with_step(HistoryStep::Mc { chi_e: inst.chi.e });
            let Some(og) = t.ok(Oracle::new(&f, &ge), || label.clone()) else { continue };
            let Some(rank) = t.ok(mc_rank(&sym, inst.chi), || label.clone()) else { continue };
            let Some(g) = t.ok(mc_sheaf(&f, &sym, inst.chi, conv), || label.clone()) else { continue };
            let y = inst.samples[0];

            let d = h1c_dimension(&sym);
            let h1c = o.h1c_power_sums(inst.chi, y, 2 * d).and_then(|p| recover_dimension(&p, d as usize));
            let corrections: u32 = sym.singular.iter().map(|s| s.point.degree() * s.local().invariant_dim()).sum::<u32>()
                + sym.infinity.blocks.iter().filter(|b| b.chi_e == inst.chi.e && b.l == 1).count() as u32;
            if let Some(dr) = t.ok(h1c, || format!("{label} h1c dimension")) {
                t.expect(dr as u32 == d && rank + corrections == dr as u32, || {
                    format!("{label}: recovered H^1_c dimension {dr}, formula {d}, mc_rank {rank} + corrections {corrections}")
                });
            }
            if let Some(dr) = t.ok(oracle_dim(&og, y, 2 * rank), || format!("{label} MC stalk dimension")) {
                t.expect(dr as u32 == rank, || format!("{label}: MC stalk dimension {dr} vs mc_rank {rank}"));
            }

            for (idx, sp) in g.singular.iter().enumerate() {
                let want = expected_blocks(&f, &sym, idx, inst.chi, rank);
                let got = block_shapes(&sp.blocks);
                t.expect(got == want, || format!("{label} at {:?}: blocks {got:?}, case table {want:?}", sp.point.coeffs));
                let Some(s) = sp.point.rational_root(&f) else { continue };
                let inv = sp.local().invariant_dim();
                let kmax = (2 * inv).max(2).min(levels_within(&f, 1 << 20));
                if let Some(dr) = t.ok(oracle_dim(&og, s, kmax), || format!("{label} stalk at {s}")) {
                    t.expect(dr as u32 == inv, || format!("{label}: stalk dimension at {s} is {dr}, invariants {inv}"));
                }
                if let Some(h) = g.stalk_det_hint.get(&s) {
                    if let Some(od) = t.ok(og.stalk_det(s, inv as usize), || format!("{label} stalk det at {s}")) {
                        t.expect(*h == od, || format!("{label}: stalk det at {s} {h} vs oracle {od}"));
                    }
                }
                // Characters at s: the invariants of MC_chi' (G) at s count the blocks of G
                // with character chi'^-1 (and the unipotent ones), for every chi'.
                for e2 in 1..f.q() - 1 {
                    let chi2 = MulChar { l: 1, e: e2 };
                    let Some(g2) = t.ok(mc_sheaf(&f, &g, chi2, conv), || format!("{label} second MC_{e2}")) else {
                        continue;
                    };
                    let Some(pred) = g2.singular.iter().find(|p| p.point == sp.point).map(|p| p.local().invariant_dim())
                    else {
                        continue;
                    };
                    let kmax = (2 * pred).max(2);
                    if f.q().pow(kmax) > PROBE_FIELD_LIMIT {
                        continue;
                    }
                    let Some(o2) = t.ok(Oracle::new(&f, &ge.with_step(HistoryStep::Mc { chi_e: e2 })), || label.clone())
                    else {
                        continue;
                    };
                    probes += 1;
                    if let Some(dr) = t.ok(oracle_dim(&o2, s, kmax), || format!("{label} probe MC_{e2} at {s}")) {
                        t.expect(dr as u32 == pred, || {
                            format!("{label}: MC_{e2}(MC) invariants at {s}: oracle {dr}, predicted {pred}")
                        });
                    }
                }
            }
        }
        t.notes.push(format!("{probes} second-convolution character probes"));
        t.finish(self, probes > 0)
    }
}

// ---------------------------------------------------------------------------

/// The unipotent conventions singled out by the oracle.
pub struct ConventionPinning;

/// Run the Jordan-block comparisons under one convention; returns the number of mismatches.
fn jordan_mismatches(conv: Conventions, t: &mut Tally) -> usize {
    let before = t.failures.len();
    for inst in &jordan_grid() {
        let f = inst.field();
        let c = ctx(&f, conv);
        let e = inst.explicit(&f);
        let label = format!("[{}] {}", conv.label(), inst.label());
        let Some(sym) = t.ok(e.base_data(&f), || label.clone()) else { continue };
        let Some(mut g) = t.ok(mc_sheaf(&f, &sym, inst.chi, conv), || label.clone()) else { continue };
        let ge = e.with_step(HistoryStep::Mc { chi_e: inst.chi.e });
        let Some(og) = t.ok(Oracle::new(&f, &ge), || label.clone()) else { continue };
        // Pooled products at degree-2 points are only known to the oracle.
        let pcfg = PipelineConfig { conventions: conv, ..PipelineConfig::default() };
        if t.ok(cross_check(&f, &mut g, &ge, &pcfg), || format!("{label} cross-check")).is_none() {
            continue;
        }
        for sp in &g.singular {
            let Some(s) = sp.point.rational_root(&f) else { continue };
            let Some(h) = g.stalk_det_hint.get(&s) else { continue };
            let inv = sp.local().invariant_dim() as usize;
            if let Some(od) = t.ok(og.stalk_det(s, inv), || format!("{label} stalk at {s}")) {
                t.expect(*h == od, || format!("{label}: stalk det at {s} {h} vs oracle {od}"));
            }
        }
        let inv = f.char_inv(inst.chi);
        let Some(r2) = t.ok(mc_rank(&g, inv), || label.clone()) else { continue };
        let Some(o2) = t.ok(Oracle::new(&f, &ge.with_step(HistoryStep::Mc { chi_e: inv.e })), || label.clone()) else {
            continue;
        };
        for &y in inst.samples.iter().take(2) {
            let a = t.ok(det_mc(c, &g, inv, y), || format!("{label} y={y} second det_mc"));
            let b = t.ok(o2.stalk_det(y, r2 as usize), || format!("{label} y={y} oracle"));
            if let (Some(a), Some(b)) = (a, b) {
                t.expect(a == b, || format!("{label} y={y}: second det_mc {a} vs oracle {b}"));
            }
        }
    }
    t.failures.len() - before
}

impl Check for ConventionPinning {
    fn name(&self) -> &'static str {
        "AC-5"
    }
    fn criterion(&self) -> &'static str {
        "exactly one of the four unipotent conventions reproduces the oracle on instances with a J_2 block"
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut outer = Tally::new();
        outer.instances = jordan_grid().len();
        let mut passing = Vec::new();
        for conv in Conventions::all() {
            let mut t = Tally::new();
            let bad = jordan_mismatches(conv, &mut t);
            outer.evaluations += t.evaluations;
            outer.notes.push(format!("{}: {bad} mismatches", conv.label()));
            if let Some(first) = t.failures.first() {
                outer.notes.push(format!("  first: {first}"));
            }
            if bad == 0 && t.evaluations > 0 {
                passing.push(conv);
            }
        }
        if passing.len() != 1 {
            outer.fail(format!("{} conventions pass", passing.len()));
        } else if passing[0] != cfg.conventions {
            outer.fail(format!("the passing convention {} differs from the configured one", passing[0].label()));
        }
        outer.finish(self, true)
    }
}

// ---------------------------------------------------------------------------

/// Signed powers of `q` as determinants survive `MC_{-1}`.
pub struct QuadraticPreservation;

impl Check for QuadraticPreservation {
    fn name(&self) -> &'static str {
        "AC-6"
    }
    fn criterion(&self) -> &'static str {
        "MC_{-1} of inputs meeting hypotheses (i)-(iii) has det(Frob_y) = +-q^m at every sampled y and meets (i)-(iii) again"
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        for inst in &quadratic_grid() {
            t.instances += 1;
            let f = inst.field();
            let label = inst.label();
            let e = inst.explicit(&f);
            let Some(sym) = t.ok(e.base_data(&f), || label.clone()) else { continue };
            let ys: Vec<u32> = (0..f.q() as u32).collect();
            let Some(rep) = t.ok(quadratic_det_check(ctx(&f, cfg.conventions), &sym, &ys), || label.clone()) else {
                continue;
            };
            t.expect(rep.input.unresolved.is_empty() && rep.output.unresolved.is_empty(), || {
                format!("{label}: unresolved samples {:?} / {:?}", rep.input.unresolved, rep.output.unresolved)
            });
            t.expect(rep.output.samples.len() == ys.len(), || format!("{label}: only {} output samples", rep.output.samples.len()));
            let out = &rep.output_sheaf;
            let ge = e.with_step(HistoryStep::Mc { chi_e: inst.chi.e });
            let Some(og) = t.ok(Oracle::new(&f, &ge), || label.clone()) else { continue };
            for s in &rep.output.samples {
                let dim = match out.singular_index_at(&f, s.y) {
                    Some(i) => out.singular[i].local().invariant_dim(),
                    None => out.rank,
                };
                let sym_det = CycloNum::int_pow(f.q(), s.exponent).mul_int(s.sign as i64);
                if let Some(od) = t.ok(og.stalk_det(s.y, dim as usize), || format!("{label} y={}", s.y)) {
                    t.expect(od == sym_det, || format!("{label} y={}: symbolic {sym_det} vs oracle {od}", s.y));
                }
            }
        }
        let enough = t.instances >= 10;
        t.finish(self, enough)
    }
}

// ---------------------------------------------------------------------------

/// `MC_{chi^-1}(MC_chi(E))` against `E(-1)` on the stalk characteristic polynomial.
pub struct Involution {
    /// Compare with `chi(-1) ⊗ E(-1)` instead of `E(-1)`.
    pub signed: bool,
}

impl Check for Involution {
    fn name(&self) -> &'static str {
        if self.signed {
            "AC-7-signed"
        } else {
            "AC-7"
        }
    }
    fn criterion(&self) -> &'static str {
        if self.signed {
            "charpoly of MC_{chi^-1}(MC_chi(E)) equals that of chi(-1) ⊗ E(-1) at >= 3 points on >= 5 instances"
        } else {
            "charpoly of MC_{chi^-1}(MC_chi(E)) equals that of E(-1) at >= 3 points on >= 5 instances"
        }
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        let mut sign_counts = [0usize; 2];
        for inst in &involution_grid() {
            t.instances += 1;
            let f = inst.field();
            let label = inst.label();
            let inv = f.char_inv(inst.chi);
            let e = inst.explicit(&f);
            let he = e.with_step(HistoryStep::Mc { chi_e: inst.chi.e }).with_step(HistoryStep::Mc { chi_e: inv.e });
            let (Some(oe), Some(oh)) = (t.ok(Oracle::new(&f, &e), || label.clone()), t.ok(Oracle::new(&f, &he), || label.clone()))
            else {
                continue;
            };
            let Some(cm1) = t.ok(chi_minus_one(&f, inst.chi).map_err(Into::into), || label.clone()) else { continue };
            sign_counts[usize::from(cm1 != CycloNum::one())] += 1;
            let factor = if self.signed { cm1.mul_int(f.q() as i64) } else { CycloNum::from_int(f.q() as i64) };
            let sym = e.base_data(&f).ok();
            let g = sym.as_ref().and_then(|s| mc_sheaf(&f, s, inst.chi, cfg.conventions).ok());
            let mut points = 0;
            for y in 0..f.q() as u32 {
                let (Some(pe), Some(ph)) = (
                    t.ok(oe.stalk_power_sums(y, 2), || format!("{label} y={y}")),
                    t.ok(oh.stalk_power_sums(y, 2), || format!("{label} y={y}")),
                ) else {
                    continue;
                };
                points += 1;
                let target: Vec<CycloNum> = pe
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v.mul(&factor.pow(k as i64 + 1).expect("nonzero")))
                    .collect();
                t.expect(ph == target, || {
                    let show = |v: &[CycloNum]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
                    format!("{label} y={y}: power sums [{}] vs twisted input [{}]", show(&ph), show(&target))
                });
                // The symbolic determinant of the second convolution must agree as well.
                if let Some(g) = &g {
                    if !g.is_singular_at(&f, y) {
                        if let Ok(det) = det_mc(ctx(&f, cfg.conventions), g, inv, y) {
                            t.expect(det == ph[0], || format!("{label} y={y}: symbolic {det} vs oracle {}", ph[0]));
                        }
                    }
                }
            }
            t.expect(points >= 3, || format!("{label}: only {points} points"));
        }
        t.notes.push(format!("chi(-1) = 1 on {} instances, -1 on {}", sign_counts[0], sign_counts[1]));
        let enough = t.instances >= 5;
        t.finish(self, enough)
    }
}

// ---------------------------------------------------------------------------

/// Two convolutions against one, through the Jacobi-sum twist.
pub struct Associativity;

impl Check for Associativity {
    fn name(&self) -> &'static str {
        "associativity"
    }
    fn criterion(&self) -> &'static str {
        "MC_chi2 MC_chi1 = MC_{chi1 chi2} ⊗ (-J(chi1,chi2)), or chi1(-1) q ⊗ F when chi1 chi2 is trivial"
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        let pcfg = PipelineConfig { conventions: cfg.conventions, ..PipelineConfig::default() };
        let f = make_field(5, 1).expect("F_5");
        let factors = [(0, 1u64), (1, 1), (2, 1)];
        let e = crate::oracle::ExplicitSheaf::kummer(
            &f,
            factors
                .iter()
                .map(|&(a, c)| crate::oracle::KummerFactor { point: crate::localdata::PointOrbit::rational(&f, a), chi_e: c })
                .collect(),
            CycloNum::one(),
        );
        let Some(sym) = t.ok(e.base_data(&f), || "base".into()) else { return t.finish(self, false) };
        for chi2 in 1..4 {
            t.instances += 1;
            let rep = associativity_probe(&f, &sym, Some(&e), MulChar { l: 1, e: 1 }, MulChar { l: 1, e: chi2 }, &pcfg);
            t.expect(rep.agree, || format!("chi1=1 chi2={chi2}: {rep:?}"));
        }
        t.finish(self, true)
    }
}

// ---------------------------------------------------------------------------

/// Wall-clock budget and backend independence of the whole suite.
pub struct Performance;

/// Single-threaded budget for the full suite.
pub const SERIAL_BUDGET_SECONDS: f64 = 300.0;
/// Required speedup of the four-way backend.
pub const REQUIRED_SPEEDUP: f64 = 2.0;

fn timed_suite(backend: &str, cfg: &SuiteConfig) -> (Vec<Outcome>, f64) {
    enumerate::set_current(enumerate::by_name(backend).expect("registered backend"));
    let start = Instant::now();
    let outs: Vec<Outcome> = registry()
        .iter()
        .filter(|c| c.name() != "AC-8")
        .map(|c| c.run(cfg).exact_part())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    enumerate::set_current(enumerate::by_name("serial").expect("serial backend"));
    (outs, secs)
}

impl Check for Performance {
    fn name(&self) -> &'static str {
        "AC-8"
    }
    fn criterion(&self) -> &'static str {
        "full suite under 300 s single-threaded, >= 2x faster on 4 threads, bit-identical outcomes"
    }
    fn run(&self, cfg: &SuiteConfig) -> Outcome {
        let mut t = Tally::new();
        t.instances = 1;
        let (serial, ts) = timed_suite("serial", cfg);
        let (parallel, tp) = timed_suite("partitioned-4", cfg);
        let a = serde_json::to_string(&serial).expect("outcomes serialize");
        let b = serde_json::to_string(&parallel).expect("outcomes serialize");
        t.expect(a == b, || "serial and partitioned-4 outcomes differ".into());
        t.expect(ts < SERIAL_BUDGET_SECONDS, || format!("serial suite took {ts:.1} s"));
        let speedup = ts / tp.max(1e-9);
        t.expect(speedup >= REQUIRED_SPEEDUP, || format!("four-way speedup {speedup:.2}"));
        let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
        t.notes.push(format!("available parallelism: {cpus}"));
        let mut out = t.finish(self, true);
        out.approx_metrics.insert("approx_serial_seconds".into(), ts);
        out.approx_metrics.insert("approx_partitioned_4_seconds".into(), tp);
        out.approx_metrics.insert("approx_speedup".into(), speedup);
        out
    }
}

// ---------------------------------------------------------------------------

/// Every registered check, acceptance criteria first.
pub fn registry() -> Vec<Box<dyn Check>> {
    vec![
        Box::new(GaussJacobi),
        Box::new(EpsilonCalculus),
        Box::new(DeterminantOracle),
        Box::new(RankAndLocalData),
        Box::new(ConventionPinning),
        Box::new(QuadraticPreservation),
        Box::new(Involution { signed: false }),
        Box::new(Involution { signed: true }),
        Box::new(Associativity),
        Box::new(Performance),
    ]
}

/// Registry names in run order.
pub fn names() -> Vec<&'static str> {
    registry().iter().map(|c| c.name()).collect()
}

/// Look up one check by name (case-insensitive).
pub fn by_name(name: &str) -> Option<Box<dyn Check>> {
    registry().into_iter().find(|c| c.name().eq_ignore_ascii_case(name))
}

/// Instances of the grids, for reports.
pub fn grid_sizes() -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    m.insert("determinant", determinant_grid().len());
    m.insert("jordan", jordan_grid().len());
    m.insert("quadratic", quadratic_grid().len());
    m.insert("involution", involution_grid().len());
    m
}
