//! `dirichlet-lab`: command-line front end.
//!
//! Every command writes one report to standard output. Exit status is 0 for
//! determinate results, 2 when the answer is undetermined and 1 on errors,
//! which are reported on standard error as a single line `error CODE: message`.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use dirichlet_lab::approx::{self, CaloricSide, Construction, ConvergenceVerdict};
use dirichlet_lab::classify::{self, RegimeTag};
use dirichlet_lab::hardy::{self, Operator};
use dirichlet_lab::space::{self, DirichletFunction};
use dirichlet_lab::varmin::{self, ConstraintSide, MinimizerProblem};
use dirichlet_lab::weights::{interpolate_weights, parse_weight, WeightProfile};
use dirichlet_lab::{Error, Side, Ternary};
use serde::Serialize;
use serde_json::{json, Value};

const SCHEMA: &str = "dirichlet-lab/1";
const VERSION: &str = env!("CARGO_PKG_VERSION");
const MORREY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Endpoint conditions, regime and closure of compactly supported functions.
    Classify,
    /// Endpoint moduli on a t-grid. CSV columns: t,omega0,omega_inf.
    Omega,
    /// Trace of --function at --side. CSV columns: probe,value,bound.
    Trace,
    /// Closed-form minimizer against the discrete oracle. CSV columns: t,phi,discrete.
    Minimize,
    /// Approximation sequence diagnostic. CSV columns: n,s_n,t_n,gap,predicted_gap,verdict.
    Approx,
    /// Hardy-type boundedness conditions for --weight and --h.
    Hardy,
    /// Weighted Morrey modulus of --function over --grid.
    Morrey,
    /// Interpolated weight between (--weight, --p) and (--weight1, --p1).
    Interp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Output {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Endpoint {
    Zero,
    Infinity,
}

impl From<Endpoint> for Side {
    fn from(e: Endpoint) -> Side {
        match e {
            Endpoint::Zero => Side::Zero,
            Endpoint::Infinity => Side::Infinity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Constraint {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConstructionArg {
    TruncationZero,
    TruncationInfinity,
    CaloricTail,
    CaloricHead,
    ZeroMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OperatorArg {
    Hardy,
    Conjugate,
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "dirichlet-lab", version, about = "Numerical toolkit for weighted Dirichlet spaces")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Weight in the expression DSL, e.g. "t^0.5*(1+t)".
    #[arg(long, default_value = "1")]
    weight: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Target exponent for `hardy` (defaults to --p).
    #[arg(long)]
    q: Option<f64>,
    /// Left end of the minimization interval.
    #[arg(long)]
    k: Option<f64>,
    /// Right end of the minimization interval.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    big_k: Option<f64>,
    /// Nonzero boundary value for `minimize`.
    #[arg(long)]
    a: Option<f64>,
    /// Grid size for `minimize` (default 256); schedule length for `approx`
    /// (n = 2, 4, ..., 2^N; default 10).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Comma-separated points in (0, inf).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Path to a Dirichlet function JSON file, or the JSON text itself.
    #[arg(long)]
    function: Option<String>,
    /// Defaults to csv for `approx` and json otherwise.
    #[arg(long, value_enum)]
    output: Option<Output>,
    #[arg(long, default_value_t = hardy::DEFAULT_SEED)]
    seed: u64,
    /// Target weight of the Hardy inequality.
    #[arg(long)]
    h: Option<String>,
    #[arg(long, value_enum, default_value = "hardy")]
    operator: OperatorArg,
    /// Number of random candidates; enables the constant estimate in `hardy`.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    weight1: Option<String>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long, value_enum, default_value = "zero")]
    side: Endpoint,
    #[arg(long, value_enum, default_value = "left")]
    constraint: Constraint,
    #[arg(long, value_enum)]
    construction: Option<ConstructionArg>,
    /// Cut point of the caloric construction.
    #[arg(long, default_value_t = 1.0)]
    cut: f64,
}

/// A finished command: its report and whether the answer is determinate.
struct Report {
    result: Value,
    csv: Option<String>,
    determinate: bool,
}

#[derive(Debug)]
struct Failure {
    code: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: "E_USAGE",
        message: message.into(),
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn require<T: Copy>(value: Option<T>, flag: &str, command: Command) -> Outcome<T> {
    value.ok_or_else(|| usage(format!("{command:?} needs --{flag}").to_lowercase()))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// Finite floats stay numbers; the rest become strings.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("NaN")
    } else if x > 0.0 {
        json!("Infinity")
    } else {
        json!("-Infinity")
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn weight(args: &Args) -> Outcome<WeightProfile> {
    Ok(parse_weight(&args.weight)?)
}

fn function(args: &Args) -> Outcome<DirichletFunction> {
    let src = args
        .function
        .as_deref()
        .ok_or_else(|| usage(format!("{:?} needs --function", args.command).to_lowercase()))?;
    let text = if src.trim_start().starts_with('{') {
        src.to_string()
    } else {
        std::fs::read_to_string(PathBuf::from(src)).map_err(|e| Failure {
            code: "E_IO",
            message: format!("cannot read {src}: {e}"),
        })?
    };
    Ok(DirichletFunction::from_json(&text)?)
}

fn default_grid() -> Vec<f64> {
    (-6..=6).map(|k| 10f64.powf(0.5 * k as f64)).collect()
}

fn classify_cmd(args: &Args) -> Outcome<Report> {
    let report = classify::density_report(&weight(args)?, args.p)?;
    let mut result = to_value(&report);
    result["regime"] = to_value(&report.regime.tag);
    result["d0"] = to_value(&report.d0_characterization);
    result["bp_zero"] = to_value(&report.regime.zero);
    result["bp_infinity"] = to_value(&report.regime.infinity);
    Ok(Report {
        csv: None,
        determinate: report.regime.tag != RegimeTag::Unknown,
        result,
    })
}

fn omega_cmd(args: &Args) -> Outcome<Report> {
    let w = weight(args)?;
    let grid = args.grid.clone().unwrap_or_else(default_grid);
    let zero = classify::bp_zero(&w, args.p)?;
    let inf = classify::bp_infinity(&w, args.p)?;
    let column = |member: Ternary, side: Side, t: f64| -> Outcome<Value> {
        Ok(match member {
            Ternary::Yes => num(space::omega(&w, args.p, side, t)?),
            Ternary::No => json!("undefined"),
            Ternary::Unknown => json!("undetermined"),
        })
    };
    let mut rows = Vec::new();
    let mut csv = String::from("t,omega0,omega_inf\n");
    for &t in &grid {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage(format!("grid points must lie in (0, inf), got {t}")));
        }
        let o0 = column(zero.member, Side::Zero, t)?;
        let oi = column(inf.member, Side::Infinity, t)?;
        let cell = |v: &Value| v.as_f64().map(fmt_f64).unwrap_or_else(|| v.as_str().unwrap_or("").to_string());
        csv.push_str(&format!("{},{},{}\n", fmt_f64(t), cell(&o0), cell(&oi)));
        rows.push(json!({"t": t, "omega0": o0, "omega_inf": oi}));
    }
    Ok(Report {
        result: json!({
            "bp_zero": to_value(&zero),
            "bp_infinity": to_value(&inf),
            "rows": rows,
        }),
        csv: Some(csv),
        determinate: zero.member != Ternary::Unknown && inf.member != Ternary::Unknown,
    })
}

fn trace_cmd(args: &Args) -> Outcome<Report> {
    let w = weight(args)?;
    let u = function(args)?;
    let (tr, probes) = space::trace_with_probes(&u, &w, args.p, args.side.into(), args.tol)?;
    let energy = space::energy_outcome(&u, &w, args.p, 0.0, f64::INFINITY)?;
    let mut csv = String::from("probe,value,bound\n");
    for pr in &probes {
        csv.push_str(&format!("{},{},{}\n", fmt_f64(pr.probe), fmt_f64(pr.value), fmt_f64(pr.bound)));
    }
    Ok(Report {
        result: json!({
            "trace": to_value(&tr),
            "probes": to_value(&probes),
            "provenance": {"energy": to_value(&energy)},
        }),
        csv: Some(csv),
        determinate: tr.converged,
    })
}

fn minimize_cmd(args: &Args) -> Outcome<Report> {
    let c = args.command;
    let side = match args.constraint {
        Constraint::Left => ConstraintSide::LeftConstraint,
        Constraint::Right => ConstraintSide::RightConstraint,
    };
    let prob = MinimizerProblem::new(
        require(args.k, "k", c)?,
        require(args.big_k, "K", c)?,
        require(args.a, "a", c)?,
        side,
        args.p,
        weight(args)?,
    )?;
    let n = args.n.unwrap_or(256) as usize;
    let sol = varmin::closed_form_minimizer(&prob)?;
    let normalizer = space::sigma_integral(&prob.weight, prob.p, prob.k, prob.big_k)?;
    let oracle = varmin::discrete_minimizer(&prob, n)?;
    let mut csv = String::from("t,phi,discrete\n");
    let mut profile = Vec::with_capacity(n);
    for (t, d) in oracle.nodes.iter().zip(&oracle.values) {
        let phi = sol.evaluate(*t)?;
        csv.push_str(&format!("{},{},{}\n", fmt_f64(*t), fmt_f64(phi), fmt_f64(*d)));
        profile.push(json!({"t": t, "phi": phi, "discrete": d}));
    }
    Ok(Report {
        result: json!({
            "side": to_value(&side),
            "energy": sol.minimal_energy,
            "normalizer": sol.normalizer,
            "oracle_energy": oracle.energy,
            "oracle_relative_excess": (oracle.energy - sol.minimal_energy) / sol.minimal_energy,
            "oracle_nodes": n,
            "oracle_iterations": oracle.iterations,
            "oracle_gradient_norm": oracle.gradient_norm,
            "euler_lagrange_flux": sol.euler_lagrange_flux(prob.k),
            "profile": profile,
            "provenance": {"normalizer": to_value(&normalizer)},
        }),
        csv: Some(csv),
        determinate: true,
    })
}

fn approx_cmd(args: &Args) -> Outcome<Report> {
    let w = weight(args)?;
    let u = function(args)?;
    let construction = match require(args.construction, "construction", args.command)? {
        ConstructionArg::TruncationZero => Construction::Truncation(Side::Zero),
        ConstructionArg::TruncationInfinity => Construction::Truncation(Side::Infinity),
        ConstructionArg::CaloricTail => Construction::Caloric {
            side: CaloricSide::TailToInfinity,
            cut: args.cut,
        },
        ConstructionArg::CaloricHead => Construction::Caloric {
            side: CaloricSide::HeadToZero,
            cut: args.cut,
        },
        ConstructionArg::ZeroMean => Construction::ZeroMean,
    };
    let len = args.n.unwrap_or(10);
    if !(1..=62).contains(&len) {
        return Err(usage(format!("schedule length must lie in 1..=62, got {len}")));
    }
    let schedule: Vec<u64> = (1..=len).map(|k| 1u64 << k).collect();
    let d = approx::convergence_diagnostic(&u, construction, &w, args.p, &schedule, args.tol)?;
    Ok(Report {
        result: json!({
            "construction": to_value(&construction),
            "diagnostic": to_value(&d),
        }),
        csv: Some(approx::diagnostic_csv(&d)),
        determinate: d.verdict != ConvergenceVerdict::Undecided,
    })
}

fn hardy_cmd(args: &Args) -> Outcome<Report> {
    let w = weight(args)?;
    let h_src = args
        .h
        .as_deref()
        .ok_or_else(|| usage("hardy needs --h"))?;
    let h = parse_weight(h_src)?;
    let q = args.q.unwrap_or(args.p);
    let op = match args.operator {
        OperatorArg::Hardy => Operator::Hardy,
        OperatorArg::Conjugate => Operator::Conjugate,
    };
    let report = hardy::condition(&w, &h, args.p, q, op)?;
    let mut result = json!({"condition": to_value(&report)});
    match report.bounded {
        Ternary::Yes => {
            if let Some(trials) = args.trials {
                let est = hardy::estimate_best_constant(&w, &h, args.p, q, op, trials, args.seed)?;
                result["constant_estimate"] = to_value(&est);
            }
        }
        Ternary::No if report.offending_endpoint.is_some() => {
            let witness = hardy::divergence_witness(&w, &h, args.p, q, &report)?;
            result["divergence_witness"] = to_value(&witness);
        }
        _ => {}
    }
    Ok(Report {
        result,
        csv: None,
        determinate: report.bounded != Ternary::Unknown,
    })
}

fn morrey_cmd(args: &Args) -> Outcome<Report> {
    let w = weight(args)?;
    let u = function(args)?;
    let grid = args.grid.clone().ok_or_else(|| usage("morrey needs --grid"))?;
    let m = space::morrey_modulus(&u, &w, args.p, &grid)?;
    let energy = space::energy_outcome(&u, &w, args.p, 0.0, f64::INFINITY)?;
    let s = space::seminorm(&u, &w, args.p)?;
    Ok(Report {
        result: json!({
            "modulus": to_value(&m),
            "seminorm": s,
            "within_bound": m.value <= s + MORREY_SLACK,
            "provenance": {"energy": to_value(&energy)},
        }),
        csv: None,
        determinate: true,
    })
}

fn interp_cmd(args: &Args) -> Outcome<Report> {
    let c = args.command;
    let w0 = weight(args)?;
    let src1 = args.weight1.as_deref().ok_or_else(|| usage("interp needs --weight1"))?;
    let w1 = parse_weight(src1)?;
    let (wt, pt) = interpolate_weights(&w0, args.p, &w1, require(args.p1, "p1", c)?, require(args.theta, "theta", c)?)?;
    Ok(Report {
        result: json!({
            "weight_theta": wt.render(),
            "label": wt.label(),
            "p_theta": pt,
        }),
        csv: None,
        determinate: true,
    })
}

fn dispatch(args: &Args) -> Outcome<Report> {
    if !(args.tol > 0.0) {
        return Err(usage(format!("--tol must be positive, got {}", args.tol)));
    }
    match args.command {
        Command::Classify => classify_cmd(args),
        Command::Omega => omega_cmd(args),
        Command::Trace => trace_cmd(args),
        Command::Minimize => minimize_cmd(args),
        Command::Approx => approx_cmd(args),
        Command::Hardy => hardy_cmd(args),
        Command::Morrey => morrey_cmd(args),
        Command::Interp => interp_cmd(args),
    }
}

/// Writes every float with 17 significant digits.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
}

fn render_json(args: &Args, result: Value) -> Outcome<String> {
    let mut config = to_value(args);
    if let Some(src) = &args.function {
        config["function_spec"] = to_value(&function(args)?.to_spec()?);
        config["function"] = json!(src);
    }
    let doc = json!({
        "schema": SCHEMA,
        "version": VERSION,
        "command": to_value(&args.command),
        "config": config,
        "result": result,
    });
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    doc.serialize(&mut ser).map_err(|e| Failure {
        code: "E_JSON",
        message: e.to_string(),
    })?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

fn fail(f: &Failure) -> ExitCode {
    let message = f.message.lines().next().unwrap_or("").trim();
    eprintln!("error {}: {}", f.code, message);
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let mut args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return fail(&usage(line));
        }
    };
    args.output.get_or_insert(if args.command == Command::Approx {
        Output::Csv
    } else {
        Output::Json
    });
    let report = match dispatch(&args) {
        Ok(r) => r,
        Err(f) => return fail(&f),
    };
    let text = match (args.output.unwrap_or(Output::Json), &report.csv) {
        (Output::Csv, Some(csv)) => csv.clone(),
        (Output::Csv, None) => return fail(&usage(format!("{:?} has no CSV output", args.command).to_lowercase())),
        (Output::Json, _) => match render_json(&args, report.result) {
            Ok(t) => t,
            Err(f) => return fail(&f),
        },
    };
    let mut out = io::stdout().lock();
    if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
        return ExitCode::from(1);
    }
    if report.determinate {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
