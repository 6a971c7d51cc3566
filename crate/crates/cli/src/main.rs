// SPDX-License-Identifier: Apache-2.0

//! `mcconv`: exact middle convolution, epsilon factors and trace-oracle checks
//! from the command line. Every command prints one JSON report to stdout.

mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use mcconv::charsum::{chi_minus_one, gauss_pair_identity_check, gauss_sum, jacobi_gauss_relation_check, jacobi_sum};
use mcconv::checks::{self, Outcome, SuiteConfig};
use mcconv::cyclo::CycloNum;
use mcconv::enumerate;
use mcconv::epsilon::{
    det_h1c, det_mc, det_mc_at_singular, epsilon0_block, epsilon0_point, quadratic_det_check, EpsilonContext,
};
use mcconv::error::Error;
use mcconv::field::{FieldDescriptor, FieldSpec, MulChar, DEFAULT_SIZE_LIMIT};
use mcconv::localdata::{Conventions, EigenspaceWeight, LocalData, PointOrbit, Scalar, SheafData};
use mcconv::mc::{mc_rank, mc_sheaf, rigidity_index};
use mcconv::oracle::{charpoly_from_power_sums, det_from_power_sums, recover_dimension, ExplicitSheaf, Oracle};
use mcconv::pipeline::{run_script, PipelineConfig, Script};

use report::{ErrorBody, Exact, Maybe, Report};

#[derive(Parser)]
#[command(name = "mcconv", version, about = "Exact middle convolution over finite fields")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weight {
    #[value(name = "0")]
    Zero,
    Top,
}

#[derive(Args)]
struct Global {
    /// Graded piece carrying the inertia eigenspace of a Jordan block.
    #[arg(long, global = true, value_enum, default_value = "0")]
    eigenspace_weight: Weight,
    /// Twist exponent on the quotient of a unipotent block by its invariants.
    #[arg(long, global = true, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    quotient_twist: u8,
    /// Largest field the engine may enumerate.
    #[arg(long, global = true, default_value_t = DEFAULT_SIZE_LIMIT)]
    size_limit: u64,
}

impl Global {
    fn conventions(&self) -> Conventions {
        let eigenspace_weight = match self.eigenspace_weight {
            Weight::Zero => EigenspaceWeight::Zero,
            Weight::Top => EigenspaceWeight::Top,
        };
        Conventions { eigenspace_weight, quotient_twist: self.quotient_twist }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Gauss and Jacobi sums of base-field characters.
    Charsum {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        m: u32,
        /// Character by exponent of the dual generator.
        #[arg(long, conflicts_with = "chi_order")]
        chi: Option<u64>,
        /// Character by order (the one with exponent (q-1)/order).
        #[arg(long)]
        chi_order: Option<u64>,
        /// Second character for the Jacobi sum.
        #[arg(long)]
        chi2: Option<u64>,
    },
    /// Local epsilon factor of one point of a sheaf.
    Eps {
        #[arg(long)]
        input: PathBuf,
        /// `inf`, a rational point code `a` (meaning x - a), or comma-separated monic coefficients, low degree first.
        #[arg(long)]
        point: String,
    },
    /// Frobenius determinants of H^1_c and of the middle convolution at a rational point.
    Det {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        chi: u64,
        #[arg(long)]
        y: u32,
        /// Also run the quadratic-character hypotheses on the input and its convolution (needs chi quadratic).
        #[arg(long)]
        quadratic: bool,
    },
    /// Middle convolution of a symbolic sheaf.
    Mc {
        #[arg(long)]
        chi: u64,
        #[arg(long)]
        input: PathBuf,
        /// Where to write the output sheaf JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Brute-force traces of an explicit sheaf.
    Oracle {
        #[arg(long, visible_alias = "input")]
        sheaf: PathBuf,
        /// Base field as `p,m` when the explicit sheaf carries no descriptor.
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        y: u32,
        #[arg(long, default_value_t = 4)]
        kmax: u32,
        /// Report H^1_c of the sheaf tensored with L_chi(y - x) instead of the stalk.
        #[arg(long)]
        chi: Option<u64>,
        /// Also report the characteristic polynomial and determinant.
        #[arg(long)]
        charpoly: bool,
    },
    /// Run a convolution script, optionally cross-checked against the oracle.
    Pipeline {
        #[arg(long)]
        script: PathBuf,
        /// Base field as `p,m`.
        #[arg(long)]
        base: String,
        #[arg(long)]
        with_oracle: bool,
        #[arg(long, default_value_t = 4096)]
        oracle_size_limit: u64,
    },
    /// Rank, rigidity index and convolution ranks of a sheaf.
    Rigidity {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run named check suites (all by default).
    Check {
        /// Comma-separated check names.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Field-enumeration backend.
        #[arg(long, default_value = "serial")]
        backend: String,
        /// List the registered checks and exit.
        #[arg(long)]
        list: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Charsum { .. } => "charsum",
            Command::Eps { .. } => "eps",
            Command::Det { .. } => "det",
            Command::Mc { .. } => "mc",
            Command::Oracle { .. } => "oracle",
            Command::Pipeline { .. } => "pipeline",
            Command::Rigidity { .. } => "rigidity",
            Command::Check { .. } => "check",
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn field_from(desc: &FieldDescriptor, limit: u64) -> Result<Arc<FieldSpec>, Error> {
    let f = FieldSpec::new(desc.p as u64, desc.m, limit)?;
    if f.descriptor() != *desc {
        return Err(Error::Schema(format!("base descriptor does not match the canonical F_{}^{}", desc.p, desc.m)));
    }
    Ok(f)
}

fn load_sheaf(path: &Path, limit: u64) -> Result<(Arc<FieldSpec>, SheafData), Error> {
    let sheaf: SheafData = read_json(path)?;
    let f = field_from(&sheaf.base, limit)?;
    sheaf.validate(&f)?;
    Ok((f, sheaf))
}

fn base_char(f: &FieldSpec, e: u64) -> MulChar {
    MulChar { l: 1, e: e % (f.q() - 1) }
}

fn charsum(g: &Global, p: u64, m: u32, chi: Option<u64>, order: Option<u64>, chi2: Option<u64>) -> Result<Value, Error> {
    let f = FieldSpec::new(p, m, g.size_limit)?;
    let q = f.q();
    let e = match (chi, order) {
        (Some(e), _) => e % (q - 1),
        (None, Some(o)) if o > 0 && (q - 1) % o == 0 => (q - 1) / o,
        (None, Some(o)) => return Err(Error::Schema(format!("no character of order {o} on F_{q}"))),
        (None, None) => return Err(Error::Schema("give --chi or --chi-order".into())),
    };
    let c = MulChar { l: 1, e };
    let gs = gauss_sum(&f, c)?;
    let mut out = json!({
        "q": q,
        "chi": e,
        "order": f.char_order(c),
        "gauss_sum": Exact::from(&gs),
        "gauss_sum_squared": Exact::from(gs.mul(&gs)),
        "chi_minus_one": Exact::from(chi_minus_one(&f, c)?),
        "pair_identity_holds": !c.is_trivial() && gauss_pair_identity_check(&f, c)?,
    });
    if let Some(e2) = chi2 {
        let c2 = base_char(&f, e2);
        let j = jacobi_sum(&f, c, c2)?;
        let all_nontrivial = !c.is_trivial() && !c2.is_trivial() && !f.char_mul(c, c2)?.is_trivial();
        out["jacobi"] = json!({
            "chi2": c2.e,
            "value": Exact::from(&j),
            "relation_holds": if all_nontrivial { Some(jacobi_gauss_relation_check(&f, c, c2)?) } else { None },
        });
    }
    Ok(out)
}

/// The local data named by `--point`.
fn pick_point(f: &FieldSpec, sheaf: &SheafData, point: &str) -> Result<(Value, LocalData), Error> {
    if point == "inf" || point == "infinity" {
        return Ok((json!("infinity"), sheaf.infinity_local()));
    }
    let parsed: Result<Vec<u32>, _> = point.split(',').map(|s| s.trim().parse::<u32>()).collect();
    let coeffs = parsed.map_err(|_| Error::Schema(format!("cannot parse point {point:?}")))?;
    let pt = match coeffs.as_slice() {
        [a] => PointOrbit::rational(f, *a),
        _ => PointOrbit { coeffs },
    };
    pt.validate(f)?;
    let sp = sheaf
        .singular
        .iter()
        .find(|s| s.point == pt)
        .ok_or_else(|| Error::Schema(format!("{:?} is not a singular point of the input", pt.coeffs)))?;
    Ok((to_value(&pt), sp.local()))
}

fn eps(g: &Global, input: &Path, point: &str) -> Result<Value, Error> {
    let conv = g.conventions();
    let (f, sheaf) = load_sheaf(input, g.size_limit)?;
    let (label, data) = pick_point(&f, &sheaf, point)?;
    let blocks: Vec<Value> = data
        .blocks
        .iter()
        .map(|b| {
            let v: Maybe = match b.alpha {
                Scalar::Known(_) => epsilon0_block(&f, b, data.degree, conv).into(),
                Scalar::Pooled => Err(Error::UnknownInvariantScalar("pooled block".into())).into(),
            };
            json!({ "block": b, "epsilon0": v })
        })
        .collect();
    Ok(json!({
        "point": label,
        "degree": data.degree,
        "blocks": blocks,
        "epsilon0": Maybe::from(epsilon0_point(&f, &data, &CycloNum::one(), conv)),
    }))
}

fn det(g: &Global, input: &Path, chi: u64, y: u32, quadratic: bool) -> Result<Value, Error> {
    let (f, sheaf) = load_sheaf(input, g.size_limit)?;
    let c = base_char(&f, chi);
    let ctx = EpsilonContext { field: &f, conventions: g.conventions() };
    if y as u64 >= f.q() {
        return Err(Error::Schema(format!("y = {y} is not an element code of F_{}", f.q())));
    }
    let mut out = json!({ "chi": c.e, "y": y, "singular": sheaf.is_singular_at(&f, y) });
    if sheaf.is_singular_at(&f, y) {
        out["det_mc"] = to_value(&Maybe::from(det_mc_at_singular(ctx, &sheaf, c, y)));
    } else {
        out["det_h1c"] = to_value(&Maybe::from(det_h1c(ctx, &sheaf, c, y)));
        out["det_mc"] = to_value(&Maybe::from(det_mc(ctx, &sheaf, c, y)));
    }
    if quadratic {
        if f.quadratic(1) != Some(c) {
            return Err(Error::Schema("--quadratic needs the quadratic character".into()));
        }
        let ys: Vec<u32> = (0..f.q() as u32).collect();
        out["quadratic"] = match quadratic_det_check(ctx, &sheaf, &ys) {
            Ok(rep) => json!({ "input": rep.input, "output": rep.output }),
            Err(err @ Error::HypothesisFailed { .. }) => json!({ "unavailable": ErrorBody::from(&err) }),
            Err(err) => return Err(err),
        };
    }
    Ok(out)
}

fn mc(g: &Global, chi: u64, input: &Path, output: Option<&Path>) -> Result<Value, Error> {
    let (f, sheaf) = load_sheaf(input, g.size_limit)?;
    let out = mc_sheaf(&f, &sheaf, base_char(&f, chi), g.conventions())?;
    if let Some(path) = output {
        let text = serde_json::to_string_pretty(&out).expect("sheaf serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    }
    Ok(json!({
        "chi": chi % (f.q() - 1),
        "rank": out.rank,
        "rigidity_index": rigidity_index(&f, &out),
        "sheaf": out,
    }))
}

fn parse_base(base: &str, limit: u64) -> Result<Arc<FieldSpec>, Error> {
    let bad = || Error::Schema(format!("--base expects p,m, got {base:?}"));
    let (p, m) = base.split_once(',').ok_or_else(bad)?;
    let p = p.trim().parse::<u64>().map_err(|_| bad())?;
    let m = m.trim().parse::<u32>().map_err(|_| bad())?;
    Ok(FieldSpec::new(p, m, limit)?)
}

struct OracleArgs<'a> {
    sheaf: &'a Path,
    base: Option<&'a str>,
    y: u32,
    kmax: u32,
    chi: Option<u64>,
    charpoly: bool,
}

fn oracle(g: &Global, a: OracleArgs<'_>) -> Result<Value, Error> {
    let OracleArgs { sheaf, base, y, kmax, chi, charpoly } = a;
    let e: ExplicitSheaf = read_json(sheaf)?;
    let f = match (&e.base, base) {
        (Some(desc), None) => field_from(desc, g.size_limit)?,
        (None, Some(b)) => parse_base(b, g.size_limit)?,
        (Some(desc), Some(b)) => {
            let f = parse_base(b, g.size_limit)?;
            if f.descriptor() != *desc {
                return Err(Error::Schema("--base disagrees with the descriptor in the sheaf".into()));
            }
            f
        }
        (None, None) => return Err(Error::Schema("explicit sheaf has no base descriptor; pass --base p,m".into())),
    };
    let o = Oracle::new(&f, &e)?;
    let sums = match chi {
        Some(c) => o.h1c_power_sums(base_char(&f, c), y, kmax)?,
        None => o.stalk_power_sums(y, kmax)?,
    };
    let dim = recover_dimension(&sums, kmax as usize / 2);
    let mut out = json!({
        "y": y,
        "target": if chi.is_some() { "h1c" } else { "stalk" },
        "power_sums": sums.iter().map(Exact::from).collect::<Vec<_>>(),
    });
    match dim {
        Ok(d) => {
            out["dimension"] = json!(d);
            if !charpoly {
                return Ok(out);
            }
            let cp = charpoly_from_power_sums(&sums, d)?;
            out["charpoly"] = to_value(&cp.iter().map(Exact::from).collect::<Vec<_>>());
            out["det"] = to_value(&Exact::from(det_from_power_sums(&sums, d)?));
        }
        Err(err) => out["dimension"] = json!({ "unavailable": ErrorBody::from(&err) }),
    }
    Ok(out)
}

fn pipeline(g: &Global, script: &Path, base: &str, with_oracle: bool, limit: u64) -> Result<Value, Error> {
    let f = parse_base(base, g.size_limit)?;
    let mut s: Script = read_json(script)?;
    if let Some(start) = &mut s.start {
        start.base.get_or_insert_with(|| f.descriptor());
    }
    let cfg = PipelineConfig { conventions: g.conventions(), oracle_size_limit: limit, ..PipelineConfig::default() };
    Ok(to_value(&run_script(&f, &s, with_oracle, &cfg)?))
}

fn rigidity(g: &Global, input: &Path) -> Result<Value, Error> {
    let (f, sheaf) = load_sheaf(input, g.size_limit)?;
    let ranks: Vec<Value> = (1..f.q() - 1)
        .map(|e| match mc_rank(&sheaf, MulChar { l: 1, e }) {
            Ok(r) => json!({ "chi": e, "mc_rank": r }),
            Err(err) => json!({ "chi": e, "unavailable": ErrorBody::from(&err) }),
        })
        .collect();
    Ok(json!({
        "rank": sheaf.rank,
        "rigidity_index": rigidity_index(&f, &sheaf),
        "infinity_character": sheaf.infinity_character(),
        "convolution_ranks": ranks,
    }))
}

#[derive(Serialize)]
struct SuiteReport {
    backend: String,
    all_passed: bool,
    outcomes: Vec<Outcome>,
}

fn check(g: &Global, only: &[String], backend: &str, list: bool) -> Result<(Value, bool), Error> {
    if list {
        let names: Vec<Value> = checks::registry()
            .iter()
            .map(|c| json!({ "name": c.name(), "criterion": c.criterion() }))
            .collect();
        return Ok((json!({ "checks": names, "grid_sizes": checks::grid_sizes() }), true));
    }
    let e = enumerate::by_name(backend)
        .ok_or_else(|| Error::Schema(format!("unknown backend {backend:?}; known: {:?}", enumerate::registry_names())))?;
    enumerate::set_current(e);
    let selected: Vec<Box<dyn checks::Check>> = if only.is_empty() {
        checks::registry()
    } else {
        only.iter()
            .map(|n| checks::by_name(n).ok_or_else(|| Error::Schema(format!("unknown check {n:?}; known: {:?}", checks::names()))))
            .collect::<Result<_, _>>()?
    };
    let cfg = SuiteConfig { conventions: g.conventions() };
    let outcomes: Vec<Outcome> = selected
        .iter()
        .map(|c| {
            let o = c.run(&cfg);
            eprintln!("{}", o.line());
            o
        })
        .collect();
    let all_passed = outcomes.iter().all(|o| o.passed);
    Ok((to_value(&SuiteReport { backend: backend.into(), all_passed, outcomes }), all_passed))
}

fn dispatch(g: &Global, cmd: &Command) -> Result<(Value, bool), Error> {
    let ok = |v: Result<Value, Error>| v.map(|v| (v, true));
    match cmd {
        Command::Charsum { p, m, chi, chi_order, chi2 } => ok(charsum(g, *p, *m, *chi, *chi_order, *chi2)),
        Command::Eps { input, point } => ok(eps(g, input, point)),
        Command::Det { input, chi, y, quadratic } => ok(det(g, input, *chi, *y, *quadratic)),
        Command::Mc { chi, input, output } => ok(mc(g, *chi, input, output.as_deref())),
        Command::Oracle { sheaf, base, y, kmax, chi, charpoly } => ok(oracle(
            g,
            OracleArgs { sheaf, base: base.as_deref(), y: *y, kmax: *kmax, chi: *chi, charpoly: *charpoly },
        )),
        Command::Pipeline { script, base, with_oracle, oracle_size_limit } => {
            ok(pipeline(g, script, base, *with_oracle, *oracle_size_limit))
        }
        Command::Rigidity { input } => ok(rigidity(g, input)),
        Command::Check { only, backend, list } => check(g, only, backend, *list),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let conventions = cli.global.conventions();
    let command = cli.command.name();
    let (report, code) = match dispatch(&cli.global, &cli.command) {
        Ok((v, passed)) => (
            Report { command, conventions, result: Some(v), error: None },
            if passed { ExitCode::SUCCESS } else { ExitCode::from(1) },
        ),
        Err(e) => (Report { command, conventions, result: None, error: Some(ErrorBody::from(&e)) }, ExitCode::from(2)),
    };
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    // A closed pipe on stdout is not worth a panic; the exit code still reports the outcome.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    code
}
