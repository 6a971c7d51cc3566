// SPDX-License-Identifier: Apache-2.0

//! Convolution sequences: alternating middle tensors with translated Kummer
//! sheaves and middle convolutions, run on the symbolic data and, optionally,
//! on an explicit sheaf evaluated by the trace oracle.
//!
//! When both tracks are present every step ends with exact cross-checks. Values
//! that the symbolic track cannot derive (pooled scalar products, determinant
//! hints) are filled from the oracle, and values known on both sides must agree.

use serde::{Deserialize, Serialize};

use crate::charsum::{chi_minus_one, jacobi_sum};
use crate::cyclo::CycloNum;
use crate::error::{Error, Result};
use crate::field::{FieldDescriptor, FieldSpec, MulChar};
use crate::localdata::{
    twist_unramified, Conventions, LocalData, PointOrbit, Scalar, SheafData, SingularPoint, TameBlock,
};
use crate::mc::{det_character_value, mc_sheaf, rigidity_index};
use crate::oracle::{det_from_power_sums, recover_dimension, ExplicitSheaf, HistoryStep, Oracle};

/// One step of a convolution sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PipelineStep {
    /// Middle tensor with `L_eta(P(x))`, `eta` the base character with exponent `eta_e`.
    Mt { eta_e: u64, point: PointOrbit },
    /// `MC_chi` for the base character with exponent `chi_e`.
    Mc { chi_e: u64 },
}

impl PipelineStep {
    fn history(&self) -> HistoryStep {
        match self {
            PipelineStep::Mt { eta_e, point } => HistoryStep::Mt { point: point.clone(), eta_e: *eta_e },
            PipelineStep::Mc { chi_e } => HistoryStep::Mc { chi_e: *chi_e },
        }
    }
}

/// Knobs for the oracle cross-checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub conventions: Conventions,
    /// Number of smooth rational sample points checked per step.
    pub samples: usize,
    /// Largest extension field `F_{q^k}` the oracle may enumerate.
    pub oracle_size_limit: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { conventions: Conventions::default(), samples: 2, oracle_size_limit: 4096 }
    }
}

impl PipelineConfig {
    /// Largest `k` with `q^(degree k)` inside the oracle budget.
    fn max_levels(&self, f: &FieldSpec, degree: u32) -> u32 {
        let mut k = 0;
        while k < 64 && f.q().checked_pow(degree * (k + 1)).is_some_and(|s| s <= self.oracle_size_limit) {
            k += 1;
        }
        k
    }
}

/// The symbolic track and the optional explicit track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineState {
    pub sheaf: SheafData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitSheaf>,
}

impl PipelineState {
    /// Start from a history-free explicit sheaf, keeping it as the oracle track when asked.
    pub fn from_explicit(f: &FieldSpec, explicit: &ExplicitSheaf, with_oracle: bool) -> Result<Self> {
        if !explicit.history.is_empty() {
            return Err(Error::Schema("a pipeline start must be a plain Kummer product".into()));
        }
        Ok(PipelineState { sheaf: explicit.base_data(f)?, explicit: with_oracle.then(|| explicit.clone()) })
    }
}

/// Outcome of one cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Filled,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckRecord {
    fn new(name: impl Into<String>, status: CheckStatus, detail: impl Into<String>) -> Self {
        CheckRecord { name: name.into(), status, detail: detail.into() }
    }
}

/// What one step did and which checks it ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: PipelineStep,
    pub rank: u32,
    pub rigidity_index: i64,
    pub checks: Vec<CheckRecord>,
}

/// `eta(N(P_a(root_s)))`: the Frobenius of `L_eta(P_a(x))` at the closed point `s`.
fn unramified_value(f: &FieldSpec, eta: MulChar, a: &PointOrbit, s: &PointOrbit) -> Result<CycloNum> {
    let d = s.degree();
    let root = s.chosen_root(f)?;
    let v = f.eval_poly(&a.coeffs, root, d)?;
    if v == 0 {
        return Err(Error::Local(crate::localdata::LocalError::PointCollision { y: root, point: a.coeffs.clone() }));
    }
    Ok(f.char_eval_code(f.pullback(eta, d)?, v)?)
}

/// Symbolic middle tensor `F ⊗ L_eta(P_a(x))`.
///
/// Block characters at `a` are multiplied by `eta` (pulled back to each block's
/// field) with scalars unchanged; every other point is twisted by the unramified
/// value of `L_eta(P_a)`; infinity characters are multiplied by `eta^{-deg a}`.
/// A new point `a` receives `rank` blocks `(1, 1, eta)` whose product is the stalk
/// determinant of `F` at `a` when that is known. A point where every block
/// becomes `(1, 1, 1)` is smooth afterwards and leaves the singular locus.
pub fn middle_tensor(f: &FieldSpec, sheaf: &SheafData, eta: MulChar, point: &PointOrbit) -> Result<SheafData> {
    if eta.l != 1 {
        return Err(Error::Unsupported("twist characters live on the base field".into()));
    }
    point.validate(f)?;
    if eta.is_trivial() {
        return Ok(sheaf.clone());
    }
    let d = point.degree();
    let mut singular = Vec::with_capacity(sheaf.singular.len() + 1);
    let mut hit = false;
    let mut smooth_scalar = None;
    for sp in &sheaf.singular {
        let data = sp.local();
        if sp.point == *point {
            hit = true;
            let blocks = data
                .blocks
                .iter()
                .map(|b| Ok(TameBlock { chi_e: f.char_mul(b.character(d), f.pullback(eta, d * b.l)?)?.e, ..b.clone() }))
                .collect::<Result<Vec<_>>>()?;
            let out = LocalData { degree: d, blocks, pooled_product: data.pooled_product.clone() };
            if out.blocks.iter().all(|b| b.n == 1 && b.is_unipotent()) {
                smooth_scalar = out.scalar_product().ok();
                continue;
            }
            singular.push(SingularPoint::from_local(sp.point.clone(), out));
        } else {
            let beta = unramified_value(f, eta, point, &sp.point)?;
            singular.push(SingularPoint::from_local(sp.point.clone(), twist_unramified(&data, &beta)?));
        }
    }
    if !hit {
        let chi = f.pullback(eta, d)?;
        let det = point.rational_root(f).and_then(|a| sheaf.stalk_det_hint.get(&a)).cloned();
        let data = match det {
            Some(c) if sheaf.rank == 1 => LocalData::new(d, vec![TameBlock::new(1, 1, chi.e, c)]),
            det => LocalData {
                degree: d,
                blocks: (0..sheaf.rank).map(|_| TameBlock { n: 1, l: 1, chi_e: chi.e, alpha: Scalar::Pooled }).collect(),
                pooled_product: det,
            },
        };
        singular.push(SingularPoint::from_local(point.clone(), data));
    }

    let at_inf = f.char_pow(eta, -(d as i64));
    let mut infinity = sheaf.infinity.clone();
    for b in &mut infinity.blocks {
        b.chi_e = f.char_mul(b.character(1), f.pullback(at_inf, b.l)?)?.e;
    }

    let mut hints = std::collections::BTreeMap::new();
    for (&y, v) in &sheaf.stalk_det_hint {
        let w = point.eval_base(f, y);
        if w == 0 {
            continue;
        }
        let dim = match sheaf.singular_index_at(f, y) {
            Some(i) => sheaf.singular[i].local().invariant_dim(),
            None => sheaf.rank,
        };
        hints.insert(y, v.mul(&f.char_eval_code(eta, w)?.pow(dim as i64)?));
    }
    if let (Some(a), Some(c)) = (point.rational_root(f), smooth_scalar) {
        hints.insert(a, c);
    }

    let out = SheafData { base: sheaf.base.clone(), singular, infinity, rank: sheaf.rank, stalk_det_hint: hints };
    out.validate(f)?;
    Ok(out)
}

/// Frobenius power sums over `k(s)` of the stalk at the chosen root of `s`, levels `1..=kmax`.
fn point_power_sums(f: &FieldSpec, oracle: &Oracle, s: &PointOrbit, kmax: u32) -> Result<Vec<CycloNum>> {
    let d = s.degree();
    let a = s.chosen_root(f)?;
    (1..=kmax).map(|k| oracle.trace_point(d * k, f.embed(a, d, d * k)?)).collect()
}

fn mismatch(what: String, symbolic: &CycloNum, oracle: &CycloNum) -> Error {
    Error::CrossCheckFailed(format!("{what}: symbolic {symbolic} vs oracle {oracle}"))
}

/// Fill the scalars of a freshly created twist point from the stalk of the previous stage.
fn fill_new_point(
    f: &FieldSpec,
    sheaf: &mut SheafData,
    previous: &ExplicitSheaf,
    point: &PointOrbit,
    cfg: &PipelineConfig,
) -> Result<Option<CheckRecord>> {
    let Some(i) = sheaf.singular.iter().position(|sp| sp.point == *point) else { return Ok(None) };
    let sp = &sheaf.singular[i];
    if sp.pooled_product.is_some() || !sp.blocks.iter().all(|b| b.alpha == Scalar::Pooled) {
        return Ok(None);
    }
    let name = format!("twist point {:?} scalars", point.coeffs);
    let r = sheaf.rank;
    if cfg.max_levels(f, point.degree()) < r {
        return Ok(Some(CheckRecord::new(name, CheckStatus::Skipped, "stalk determinant beyond the oracle budget")));
    }
    let oracle = Oracle::new(f, previous)?;
    let det = match point_power_sums(f, &oracle, point, r).and_then(|p| det_from_power_sums(&p, r as usize)) {
        Ok(det) => det,
        Err(Error::UnknownStalk(why)) => return Ok(Some(CheckRecord::new(name, CheckStatus::Skipped, why))),
        Err(e) => return Err(e),
    };
    let mut data = sp.local();
    if r == 1 {
        data.blocks[0].alpha = Scalar::Known(det.clone());
    } else {
        data.pooled_product = Some(det.clone());
    }
    sheaf.singular[i] = SingularPoint::from_local(point.clone(), data);
    Ok(Some(CheckRecord::new(name, CheckStatus::Filled, format!("stalk determinant {det}"))))
}

/// Check the singular stalks: dimension equals the invariant count and the
/// determinant matches the invariant scalars, filling an unknown refill product.
fn check_singular(
    f: &FieldSpec,
    sheaf: &mut SheafData,
    oracle: &Oracle,
    cfg: &PipelineConfig,
    out: &mut Vec<CheckRecord>,
) -> Result<()> {
    for i in 0..sheaf.singular.len() {
        let sp = sheaf.singular[i].clone();
        let data = sp.local();
        let inv = data.invariant_dim();
        let d = sp.point.degree();
        let name = format!("stalk at {:?}", sp.point.coeffs);
        let levels = cfg.max_levels(f, d).min(2 * inv + 1);
        if levels < inv.max(1) {
            out.push(CheckRecord::new(name, CheckStatus::Skipped, "beyond the oracle budget"));
            continue;
        }
        let ps = match point_power_sums(f, oracle, &sp.point, levels) {
            Ok(ps) => ps,
            Err(Error::UnknownStalk(why)) => {
                out.push(CheckRecord::new(name, CheckStatus::Skipped, why));
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut detail = Vec::new();
        if levels >= 2 * inv {
            let dim = recover_dimension(&ps, inv as usize)?;
            if dim != inv as usize {
                return Err(Error::CrossCheckFailed(format!("{name}: dimension {dim}, expected {inv}")));
            }
            detail.push(format!("dimension {inv}"));
        }
        if inv == 0 {
            out.push(CheckRecord::new(name, CheckStatus::Pass, detail.join(", ")));
            continue;
        }
        let det = det_from_power_sums(&ps, inv as usize)?;
        let mut status = CheckStatus::Pass;
        let mut known = CycloNum::one();
        let mut pooled_invariants = 0;
        let mut pooled_other = 0;
        for b in &data.blocks {
            match (&b.alpha, b.is_unipotent()) {
                (Scalar::Known(a), true) => known = known.mul(a),
                (Scalar::Pooled, true) => pooled_invariants += 1,
                (Scalar::Pooled, false) => pooled_other += 1,
                _ => {}
            }
        }
        if pooled_invariants == 0 {
            if known != det {
                return Err(mismatch(format!("{name} determinant"), &known, &det));
            }
            detail.push(format!("determinant {det}"));
        } else if pooled_other == 0 {
            let product = det.div(&known)?;
            match &data.pooled_product {
                Some(p) if *p != product => return Err(mismatch(format!("{name} refill product"), p, &product)),
                Some(_) => detail.push(format!("refill product {product}")),
                None => {
                    let mut filled = data.clone();
                    filled.pooled_product = Some(product.clone());
                    if filled.validate(f).is_ok() {
                        sheaf.singular[i] = SingularPoint::from_local(sp.point.clone(), filled);
                        status = CheckStatus::Filled;
                        detail.push(format!("refill product {product}"));
                    }
                }
            }
        } else {
            detail.push("invariant scalars pooled with other blocks".into());
        }
        if let Some(y) = sp.point.rational_root(f) {
            match sheaf.stalk_det_hint.get(&y) {
                Some(h) if *h != det => return Err(mismatch(format!("{name} hint"), h, &det)),
                Some(_) => {}
                None => {
                    sheaf.stalk_det_hint.insert(y, det.clone());
                }
            }
        }
        out.push(CheckRecord::new(name, status, detail.join(", ")));
    }
    Ok(())
}

/// Rank and determinant at smooth rational sample points.
fn check_samples(
    f: &FieldSpec,
    sheaf: &mut SheafData,
    oracle: &Oracle,
    cfg: &PipelineConfig,
    out: &mut Vec<CheckRecord>,
) -> Result<()> {
    let r = sheaf.rank;
    let levels = cfg.max_levels(f, 1).min(2 * r + 1);
    let samples: Vec<u32> = (0..f.q() as u32).filter(|&y| !sheaf.is_singular_at(f, y)).take(cfg.samples).collect();
    for y in samples {
        let name = format!("stalk at y = {y}");
        if levels < r {
            out.push(CheckRecord::new(name, CheckStatus::Skipped, "beyond the oracle budget"));
            continue;
        }
        let ps = oracle.stalk_power_sums(y, levels)?;
        let mut detail = Vec::new();
        if levels >= 2 * r {
            let dim = recover_dimension(&ps, r as usize)?;
            if dim != r as usize {
                return Err(Error::CrossCheckFailed(format!("{name}: oracle rank {dim}, symbolic {r}")));
            }
            detail.push(format!("rank {r}"));
        }
        let det = det_from_power_sums(&ps, r as usize)?;
        let status = match sheaf.stalk_det_hint.get(&y) {
            Some(h) if *h != det => return Err(mismatch(format!("{name} determinant"), h, &det)),
            Some(_) => CheckStatus::Pass,
            None => {
                sheaf.stalk_det_hint.insert(y, det.clone());
                CheckStatus::Filled
            }
        };
        detail.push(format!("determinant {det}"));
        out.push(CheckRecord::new(name, status, detail.join(", ")));
    }
    Ok(())
}

/// The infinity determinant implied by the smooth determinant hints, if they agree.
fn infinity_product_from_hints(f: &FieldSpec, sheaf: &SheafData) -> Result<Option<CycloNum>> {
    let mut c: Option<CycloNum> = None;
    for (&y, det) in &sheaf.stalk_det_hint {
        if sheaf.is_singular_at(f, y) {
            continue;
        }
        let mut denom = CycloNum::one();
        for sp in &sheaf.singular {
            denom = denom.mul(&det_character_value(f, sp, &sp.local(), y)?);
        }
        let v = det.div(&denom)?;
        match &c {
            Some(prev) if *prev != v => {
                return Err(Error::CrossCheckFailed(format!(
                    "determinant hints imply different infinity determinants ({prev} vs {v})"
                )))
            }
            _ => c = Some(v),
        }
    }
    Ok(c)
}

/// Global determinant consistency, filling the infinity product when it is unknown.
fn check_infinity(f: &FieldSpec, sheaf: &mut SheafData, out: &mut Vec<CheckRecord>) -> Result<()> {
    let name = "determinant at infinity";
    let Some(c) = infinity_product_from_hints(f, sheaf)? else {
        out.push(CheckRecord::new(name, CheckStatus::Skipped, "no smooth determinant hints"));
        return Ok(());
    };
    let inf = sheaf.infinity_local();
    if inf.blocks.iter().any(|b| b.n != 1) {
        out.push(CheckRecord::new(name, CheckStatus::Skipped, "infinity has Jordan blocks"));
        return Ok(());
    }
    match inf.scalar_product() {
        Ok(p) if p == c => out.push(CheckRecord::new(name, CheckStatus::Pass, format!("{c}"))),
        Ok(p) => return Err(mismatch(name.to_string(), &p, &c)),
        Err(_) => {
            let known = inf.blocks.iter().filter_map(|b| b.alpha.known()).fold(CycloNum::one(), |a, b| a.mul(b));
            let mut filled = inf.clone();
            filled.pooled_product = Some(c.div(&known)?);
            if filled.validate(f).is_ok() {
                sheaf.set_infinity(filled);
                out.push(CheckRecord::new(name, CheckStatus::Filled, format!("{c}")));
            } else {
                out.push(CheckRecord::new(name, CheckStatus::Skipped, "pooled blocks of several shapes"));
            }
        }
    }
    Ok(())
}

/// Run every oracle cross-check on `sheaf`, filling what only the oracle knows.
pub fn cross_check(
    f: &FieldSpec,
    sheaf: &mut SheafData,
    explicit: &ExplicitSheaf,
    cfg: &PipelineConfig,
) -> Result<Vec<CheckRecord>> {
    let oracle = Oracle::new(f, explicit)?;
    let mut out = Vec::new();
    check_singular(f, sheaf, &oracle, cfg, &mut out)?;
    check_samples(f, sheaf, &oracle, cfg, &mut out)?;
    check_infinity(f, sheaf, &mut out)?;
    sheaf.validate(f)?;
    Ok(out)
}

/// Apply one step to both tracks and cross-check them.
pub fn apply_step(
    f: &FieldSpec,
    state: &PipelineState,
    step: &PipelineStep,
    cfg: &PipelineConfig,
) -> Result<(PipelineState, StepReport)> {
    let m = f.q() - 1;
    let mut checks = Vec::new();
    let mut sheaf = match step {
        PipelineStep::Mt { eta_e, point } => {
            let eta = MulChar { l: 1, e: eta_e % m };
            let mut out = middle_tensor(f, &state.sheaf, eta, point)?;
            if let Some(prev) = &state.explicit {
                checks.extend(fill_new_point(f, &mut out, prev, point, cfg)?);
            }
            out
        }
        PipelineStep::Mc { chi_e } => mc_sheaf(f, &state.sheaf, MulChar { l: 1, e: chi_e % m }, cfg.conventions)?,
    };
    let mut explicit = state.explicit.as_ref().map(|e| e.with_step(step.history()));
    if let Some(e) = &explicit {
        match cross_check(f, &mut sheaf, e, cfg) {
            Ok(c) => checks.extend(c),
            Err(Error::Unsupported(why)) => {
                checks.push(CheckRecord::new("oracle track", CheckStatus::Skipped, why));
                explicit = None;
            }
            Err(e) => return Err(e),
        }
    }
    let report = StepReport { step: step.clone(), rank: sheaf.rank, rigidity_index: rigidity_index(f, &sheaf), checks };
    Ok((PipelineState { sheaf, explicit }, report))
}

/// A recorded convolution sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    /// Starting Kummer product; the constant sheaf when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<ExplicitSheaf>,
    pub steps: Vec<PipelineStep>,
}

/// Reproducible record of a pipeline run with every exact value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub base: FieldDescriptor,
    pub with_oracle: bool,
    pub start: ExplicitSheaf,
    pub initial: SheafData,
    pub steps: Vec<StepReport>,
    pub final_state: SheafData,
    pub rigidity_index: i64,
}

/// Run a script from its start sheaf.
pub fn run_script(f: &FieldSpec, script: &Script, with_oracle: bool, cfg: &PipelineConfig) -> Result<Transcript> {
    let start = script.start.clone().unwrap_or_else(|| ExplicitSheaf::kummer(f, Vec::new(), CycloNum::one()));
    let mut state = PipelineState::from_explicit(f, &start, with_oracle)?;
    let initial = state.sheaf.clone();
    let mut steps = Vec::with_capacity(script.steps.len());
    for step in &script.steps {
        let (next, report) = apply_step(f, &state, step, cfg)?;
        state = next;
        steps.push(report);
    }
    Ok(Transcript {
        base: f.descriptor(),
        with_oracle,
        start,
        initial,
        steps,
        rigidity_index: rigidity_index(f, &state.sheaf),
        final_state: state.sheaf,
    })
}

/// One sampled determinant of the two convolution orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetSample {
    pub y: u32,
    pub left: Option<CycloNum>,
    pub right: Option<CycloNum>,
}

/// Comparison of `MC_chi2(MC_chi1(F))` with `MC_{chi1 chi2}(F) ⊗ (-J(chi1, chi2))`,
/// or with `chi1(-1) ⊗ F(-1)` when `chi1 chi2` is trivial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociativityReport {
    pub chi1: u64,
    pub chi2: u64,
    pub left_rank: Option<u32>,
    pub right_rank: Option<u32>,
    /// Frobenius scalar of the geometrically constant factor between the two sides.
    pub constant: Option<CycloNum>,
    pub local_diffs: Vec<String>,
    pub det_samples: Vec<DetSample>,
    pub agree: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Block shapes `(n, l, chi_e)` of local data, sorted.
fn shapes(data: &LocalData) -> Vec<(u32, u32, u64)> {
    let mut v: Vec<_> = data.blocks.iter().map(|b| (b.n, b.l, b.chi_e)).collect();
    v.sort_unstable();
    v
}

fn local_diffs(left: &SheafData, right: &SheafData) -> Vec<String> {
    let mut diffs = Vec::new();
    let mut points: Vec<&PointOrbit> = left.singular.iter().chain(&right.singular).map(|s| &s.point).collect();
    points.sort();
    points.dedup();
    let find = |s: &SheafData, p: &PointOrbit| s.singular.iter().find(|sp| sp.point == *p).map(|sp| shapes(&sp.local()));
    for p in points {
        let (a, b) = (find(left, p), find(right, p));
        if a != b {
            diffs.push(format!("point {:?}: {a:?} vs {b:?}", p.coeffs));
        }
    }
    let (a, b) = (shapes(&left.infinity_local()), shapes(&right.infinity_local()));
    if a != b {
        diffs.push(format!("infinity: {a:?} vs {b:?}"));
    }
    diffs
}

/// Compare the two convolution orders. Never fails: problems are reported.
///
/// Determinants come from the oracle when `explicit` is given (and fits the
/// budget), otherwise from the symbolic determinant hints.
pub fn associativity_probe(
    f: &FieldSpec,
    sheaf: &SheafData,
    explicit: Option<&ExplicitSheaf>,
    chi1: MulChar,
    chi2: MulChar,
    cfg: &PipelineConfig,
) -> AssociativityReport {
    let mut report = AssociativityReport {
        chi1: chi1.e,
        chi2: chi2.e,
        left_rank: None,
        right_rank: None,
        constant: None,
        local_diffs: Vec::new(),
        det_samples: Vec::new(),
        agree: false,
        error: None,
    };
    if let Err(e) = probe_inner(f, sheaf, explicit, chi1, chi2, cfg, &mut report) {
        report.error = Some(format!("{}: {e}", e.code()));
        report.agree = false;
    }
    report
}

fn probe_inner(
    f: &FieldSpec,
    sheaf: &SheafData,
    explicit: Option<&ExplicitSheaf>,
    chi1: MulChar,
    chi2: MulChar,
    cfg: &PipelineConfig,
    report: &mut AssociativityReport,
) -> Result<()> {
    let conv = cfg.conventions;
    let left = mc_sheaf(f, &mc_sheaf(f, sheaf, chi1, conv)?, chi2, conv)?;
    report.left_rank = Some(left.rank);
    let prod = f.char_mul(chi1, chi2)?;
    let (right, constant, right_explicit) = if prod.is_trivial() {
        let c = chi_minus_one(f, chi1)?.mul(&CycloNum::from_int(f.q() as i64));
        let tw = explicit.map(|e| e.with_step(HistoryStep::Twist { scalar: c.clone() }));
        (sheaf.clone(), c, tw)
    } else {
        let c = jacobi_sum(f, chi1, chi2)?.neg();
        let r = mc_sheaf(f, sheaf, prod, conv)?;
        let tw = explicit.map(|e| {
            e.with_step(HistoryStep::Mc { chi_e: prod.e }).with_step(HistoryStep::Twist { scalar: c.clone() })
        });
        (r, c, tw)
    };
    report.right_rank = Some(right.rank);
    report.constant = Some(constant.clone());
    report.local_diffs = local_diffs(&left, &right);
    let left_explicit = explicit.map(|e| e.with_step(HistoryStep::Mc { chi_e: chi1.e }).with_step(HistoryStep::Mc { chi_e: chi2.e }));
    let r = left.rank;
    let budget = cfg.max_levels(f, 1) >= r;
    let left_oracle = match (&left_explicit, budget) {
        (Some(e), true) => Some(Oracle::new(f, e)?),
        _ => None,
    };
    let right_oracle = match (&right_explicit, budget) {
        (Some(e), true) => Some(Oracle::new(f, e)?),
        _ => None,
    };
    let scaled = |c: Option<&CycloNum>, apply: bool| -> Result<Option<CycloNum>> {
        Ok(match c {
            Some(v) if apply => Some(v.mul(&constant.pow(r as i64)?)),
            Some(v) => Some(v.clone()),
            None => None,
        })
    };
    let mut all_ok = left.rank == right.rank && report.local_diffs.is_empty();
    let samples: Vec<u32> = (0..f.q() as u32).filter(|&y| !left.is_singular_at(f, y)).take(cfg.samples).collect();
    for y in samples {
        let l = match &left_oracle {
            Some(o) => Some(o.stalk_det(y, r as usize)?),
            None => left.stalk_det_hint.get(&y).cloned(),
        };
        let rr = match &right_oracle {
            Some(o) => Some(o.stalk_det(y, r as usize)?),
            None => scaled(right.stalk_det_hint.get(&y), true)?,
        };
        if let (Some(a), Some(b)) = (&l, &rr) {
            all_ok &= a == b;
        }
        report.det_samples.push(DetSample { y, left: l, right: rr });
    }
    report.agree = all_ok && report.det_samples.iter().any(|s| s.left.is_some() && s.right.is_some());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;
    use crate::oracle::KummerFactor;

    fn rational(f: &FieldSpec, a: u32) -> PointOrbit {
        PointOrbit::rational(f, a)
    }

    #[test]
    fn trivial_twist_is_identity() {
        let f = make_field(5, 1).unwrap();
        let e = ExplicitSheaf::kummer(&f, vec![KummerFactor { point: rational(&f, 0), chi_e: 1 }], CycloNum::one());
        let state = PipelineState::from_explicit(&f, &e, true).unwrap();
        let step = PipelineStep::Mt { eta_e: 0, point: rational(&f, 2) };
        let (next, _) = apply_step(&f, &state, &step, &PipelineConfig::default()).unwrap();
        assert_eq!(next.sheaf, state.sheaf);
    }

    #[test]
    fn legendre_from_the_constant_sheaf() {
        let f = make_field(5, 1).unwrap();
        let script = Script {
            start: None,
            steps: vec![
                PipelineStep::Mt { eta_e: 2, point: rational(&f, 0) },
                PipelineStep::Mt { eta_e: 2, point: rational(&f, 1) },
                PipelineStep::Mc { chi_e: 2 },
            ],
        };
        let t = run_script(&f, &script, true, &PipelineConfig::default()).unwrap();
        let g = &t.final_state;
        assert_eq!(g.rank, 2);
        assert_eq!(t.rigidity_index, 2);
        for sp in &g.singular {
            assert_eq!(shapes(&sp.local()), vec![(2, 1, 0)]);
        }
        assert_eq!(shapes(&g.infinity_local()), vec![(2, 1, 2)]);
        let last = t.steps.last().unwrap();
        assert!(last.checks.iter().any(|c| c.name == "stalk at y = 2" && c.detail.contains("rank 2")));
    }

    #[test]
    fn both_orders_agree() {
        let f = make_field(5, 1).unwrap();
        let factors = (0..3).map(|a| KummerFactor { point: rational(&f, a), chi_e: 1 }).collect();
        let e = ExplicitSheaf::kummer(&f, factors, CycloNum::one());
        let s = e.base_data(&f).unwrap();
        let chi1 = MulChar { l: 1, e: 1 };
        let cfg = PipelineConfig { oracle_size_limit: 1 << 16, ..PipelineConfig::default() };
        for e2 in 1..4 {
            let r = associativity_probe(&f, &s, Some(&e), chi1, MulChar { l: 1, e: e2 }, &cfg);
            assert!(r.agree, "{r:?}");
        }
        let r = associativity_probe(&f, &s, None, chi1, MulChar { l: 1, e: 2 }, &cfg);
        assert!(r.error.is_none() && r.local_diffs.is_empty());
    }
}
