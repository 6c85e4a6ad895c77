use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use unruh_otto::cycle::{self, EngineParams, EntangledState, ScenarioGrid};
use unruh_otto::oracle::{self, Checkpoint, QuadratureConfig, TIntegration};
use unruh_otto::scan::{self, Axis, Output, Param, ScanSpec};
use unruh_otto::MotionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "unruh-otto",
    version,
    about = "Unruh-effect quantum Otto engine numerics"
)]
struct Cli {
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid and oracle evaluation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat key = value settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one engine configuration.
    Eval(EvalArgs),
    /// Sweep a parameter grid.
    Scan(ScanArgs),
    /// Reproduce the weakly entangled reference table.
    Table1 {
        #[arg(long = "alpha-h", default_value_t = 2.0)]
        alpha_h: f64,
    },
    /// Classify engine scenarios over the default grid.
    Table2 {
        #[arg(long = "a-steps")]
        a_steps: Option<usize>,
        #[arg(long = "w-steps")]
        w_steps: Option<usize>,
    },
    /// Compare closed forms against direct quadrature.
    Oracle(OracleArgs),
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    #[arg(long, value_parser = parse_motion)]
    motion: MotionKind,
    #[arg(long = "A", allow_negative_numbers = true)]
    a: f64,
    #[arg(long = "W", allow_negative_numbers = true)]
    w: f64,
    #[arg(long = "alpha-h", allow_negative_numbers = true)]
    alpha_h: f64,
    #[arg(long = "alpha-c", allow_negative_numbers = true)]
    alpha_c: f64,
    #[arg(long, allow_negative_numbers = true)]
    b2: f64,
    /// Defaults to the non-negative root of b1² + b2² = 1.
    #[arg(long, allow_negative_numbers = true)]
    b1: Option<f64>,
}

#[derive(Debug, clap::Args)]
struct ScanArgs {
    /// JSON scan spec; flags below are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// `name=min:max:steps` or `name=v1,v2,...`.
    #[arg(long = "axis", allow_hyphen_values = true)]
    axes: Vec<String>,
    /// `name=value`.
    #[arg(long = "fixed", allow_hyphen_values = true)]
    fixed: Vec<String>,
    #[arg(long, value_parser = parse_motion)]
    motion: Option<MotionKind>,
    /// Comma-separated subset of traces, eta_ratio, eta_E, feasible.
    #[arg(long)]
    outputs: Option<String>,
}

#[derive(Debug, clap::Args)]
struct OracleArgs {
    /// JSON array or JSON-lines checkpoint file; defaults to the built-in set.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    /// Comma-separated regulator schedule, strictly decreasing.
    #[arg(long)]
    epsilon_schedule: Option<String>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    domain_half_width: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long, value_parser = ["numeric", "analytic"])]
    t_integration: Option<String>,
    /// Disable the analytic tail of the image sum.
    #[arg(long)]
    no_image_tail: bool,
}

fn parse_motion(s: &str) -> Result<MotionKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self {
            code: 2,
            message: format!("{}: {e}", path.display()),
        }
    }
}

struct Settings {
    format: Option<Format>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let file = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
                scan::parse_config(&text).map_err(Failure::usage)?
            }
            None => BTreeMap::new(),
        };
        let format = match (cli.format, file.get("format")) {
            (Some(f), _) => Some(f),
            (None, Some(v)) => Some(
                Format::from_str(v, true).map_err(|_| Failure::usage(format!("format: `{v}`")))?,
            ),
            (None, None) => None,
        };
        let workers = match (cli.workers, file.get("workers")) {
            (Some(n), _) => Some(n),
            (None, Some(v)) => Some(
                v.parse()
                    .map_err(|_| Failure::usage(format!("workers: `{v}`")))?,
            ),
            (None, None) => None,
        };
        if workers == Some(0) {
            return Err(Failure::usage("workers must be at least 1"));
        }
        let out = cli
            .out
            .clone()
            .or_else(|| file.get("out").map(PathBuf::from));
        Ok(Self {
            format,
            out,
            workers,
            file,
        })
    }

    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

/// Output sink that only leaves a file behind on success.
enum Sink {
    Stdout(io::Stdout),
    File {
        tmp: PathBuf,
        dest: PathBuf,
        file: fs::File,
    },
}

impl Sink {
    fn open(out: Option<&Path>) -> Result<Self, Failure> {
        match out {
            None => Ok(Sink::Stdout(io::stdout())),
            Some(dest) => {
                let mut name = dest.file_name().unwrap_or_default().to_os_string();
                name.push(".partial");
                let tmp = dest.with_file_name(name);
                let file = fs::File::create(&tmp).map_err(|e| Failure::io(&tmp, e))?;
                Ok(Sink::File {
                    tmp,
                    dest: dest.to_path_buf(),
                    file,
                })
            }
        }
    }

    fn write(&mut self, text: &str) -> Result<(), Failure> {
        let r = match self {
            Sink::Stdout(s) => s
                .lock()
                .write_all(text.as_bytes())
                .and_then(|_| io::stdout().flush()),
            Sink::File { file, .. } => file.write_all(text.as_bytes()),
        };
        r.map_err(|e| Failure {
            code: 2,
            message: format!("write failed: {e}"),
        })
    }

    fn finish(self) -> Result<(), Failure> {
        if let Sink::File { tmp, dest, file } = self {
            file.sync_all().map_err(|e| Failure::io(&tmp, e))?;
            drop(file);
            fs::rename(&tmp, &dest).map_err(|e| Failure::io(&dest, e))?;
        }
        Ok(())
    }

    fn abandon(self) {
        if let Sink::File { tmp, file, .. } = self {
            drop(file);
            let _ = fs::remove_file(tmp);
        }
    }
}

/// Writes everything at once, or nothing.
fn emit(settings: &Settings, text: &str) -> Result<(), Failure> {
    let mut sink = Sink::open(settings.out.as_deref())?;
    match sink.write(text) {
        Ok(()) => sink.finish(),
        Err(e) => {
            sink.abandon();
            Err(e)
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn run_eval(settings: &Settings, args: &EvalArgs) -> Result<(), Failure> {
    let state = match args.b1 {
        Some(b1) => EntangledState::new(b1, args.b2),
        None => EntangledState::from_b2(args.b2),
    }
    .map_err(Failure::usage)?;
    let params = EngineParams {
        motion: args.motion,
        a: args.a,
        w: args.w,
        alpha_h: args.alpha_h,
        alpha_c: args.alpha_c,
        state,
    };
    let assessment = cycle::assess(&params).map_err(Failure::usage)?;
    let text = match settings.format_or(Format::Text) {
        Format::Text => scan::render_assessment_text(&params, &assessment),
        Format::Json => to_json(&serde_json::json!({ "params": params, "assessment": assessment })),
        Format::Csv => {
            let spec = ScanSpec {
                axes: vec![],
                fixed: BTreeMap::new(),
                motion: params.motion,
                outputs: Output::ALL.into(),
            };
            let mut s = String::from("A,W,alpha_H,alpha_C,b2,");
            let body = scan::render_csv(
                &spec,
                &[scan::ScanRow {
                    coords: vec![],
                    result: Ok(assessment),
                }],
            );
            let mut lines = body.lines().filter(|l| !l.starts_with('#'));
            s.push_str(lines.next().unwrap_or_default());
            s.push('\n');
            let coords = [
                params.a,
                params.w,
                params.alpha_h,
                params.alpha_c,
                params.state.b2,
            ];
            s.push_str(&coords.map(scan::fmt_num).join(","));
            s.push(',');
            s.push_str(lines.next().unwrap_or_default());
            s.push('\n');
            s
        }
    };
    emit(settings, &text)
}

fn scan_spec(args: &ScanArgs) -> Result<ScanSpec, Failure> {
    if let Some(path) = &args.spec {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        return serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())));
    }
    let axes = args
        .axes
        .iter()
        .map(|a| a.parse::<Axis>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::usage)?;
    let mut fixed = BTreeMap::new();
    for f in &args.fixed {
        let (k, v) = f
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("fixed `{f}` needs name=value")))?;
        let p: Param = k.parse().map_err(Failure::usage)?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("fixed `{f}`: bad value")))?;
        fixed.insert(p, v);
    }
    let outputs: BTreeSet<Output> = match &args.outputs {
        Some(list) => list
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(Failure::usage)?,
        None => Output::ALL.into(),
    };
    let motion = args
        .motion
        .ok_or_else(|| Failure::usage("scan needs --motion or --spec"))?;
    Ok(ScanSpec {
        axes,
        fixed,
        motion,
        outputs,
    })
}

fn run_scan(settings: &Settings, args: &ScanArgs) -> Result<(), Failure> {
    let spec = scan_spec(args)?;
    spec.validate().map_err(Failure::usage)?;
    let rows = scan::run_scan(&spec, settings.workers).map_err(Failure::usage)?;
    let text = match settings.format_or(Format::Csv) {
        Format::Csv | Format::Text => scan::render_csv(&spec, &rows),
        Format::Json => to_json(&scan::render_scan_json(&spec, &rows)),
    };
    emit(settings, &text)
}

fn run_table1(settings: &Settings, alpha_h: f64) -> Result<(), Failure> {
    let rows = scan::table1(alpha_h).map_err(Failure::usage)?;
    let text = match settings.format_or(Format::Text) {
        Format::Text => scan::render_table1_text(&rows),
        Format::Csv => scan::render_table1_csv(&rows),
        Format::Json => to_json(&rows),
    };
    emit(settings, &text)?;
    if rows.iter().all(|r| r.epsilon0_pass && r.trace_pass) {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "table1: reference mismatch".into(),
        })
    }
}

fn run_table2(
    settings: &Settings,
    a_steps: Option<usize>,
    w_steps: Option<usize>,
) -> Result<(), Failure> {
    let mut grid = ScenarioGrid::default();
    if let Some(n) = a_steps {
        grid.a_values = cycle::linspace(grid.a_values[0], *grid.a_values.last().unwrap(), n.max(2));
    }
    if let Some(n) = w_steps {
        grid.w_values = cycle::linspace(grid.w_values[0], *grid.w_values.last().unwrap(), n.max(2));
    }
    let rows = scan::table2(&grid, settings.workers).map_err(Failure::usage)?;
    let text = match settings.format_or(Format::Text) {
        Format::Text => scan::render_table2_text(&grid, &rows),
        Format::Csv => scan::render_table2_csv(&grid, &rows),
        Format::Json => to_json(&serde_json::json!({ "grid": grid, "rows": rows })),
    };
    emit(settings, &text)?;
    if rows
        .iter()
        .all(|r| scan::expected_scenario(r.motion, r.state_class) == r.any_feasible)
    {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "table2: scenario pattern mismatch".into(),
        })
    }
}

fn oracle_config(settings: &Settings, args: &OracleArgs) -> Result<QuadratureConfig, Failure> {
    let mut cfg = QuadratureConfig::default();
    scan::apply_oracle_config(&mut cfg, &settings.file).map_err(Failure::usage)?;
    if let Some(list) = &args.epsilon_schedule {
        cfg.epsilon_schedule = list
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::usage(format!("epsilon schedule `{list}`")))?;
    }
    if let Some(v) = args.n_max {
        cfg.n_max = v;
    }
    if let Some(v) = args.domain_half_width {
        cfg.domain_half_width = v;
    }
    if let Some(v) = args.abs_tol {
        cfg.abs_tol = v;
    }
    if let Some(v) = args.rel_tol {
        cfg.rel_tol = v;
    }
    if let Some(v) = &args.t_integration {
        cfg.t_integration = if v == "analytic" {
            TIntegration::Analytic
        } else {
            TIntegration::Numeric
        };
    }
    if args.no_image_tail {
        cfg.image_tail = false;
    }
    cfg.validate().map_err(Failure::usage)?;
    Ok(cfg)
}

fn run_oracle(settings: &Settings, args: &OracleArgs) -> Result<(), Failure> {
    let cfg = oracle_config(settings, args)?;
    let points: Vec<Checkpoint> = match &args.checkpoints {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            scan::parse_checkpoints(&text).map_err(Failure::usage)?
        }
        None => oracle::builtin_checkpoints()
            .into_iter()
            .chain(oracle::antiparallel_checkpoints())
            .collect(),
    };
    for cp in &points {
        cp.point().validate().map_err(Failure::usage)?;
    }
    let pool = scan::thread_pool(settings.workers).map_err(Failure::usage)?;
    let chunk = pool.current_num_threads().max(1);
    let text_mode = settings.format_or(Format::Json) == Format::Text;
    let mut sink = Sink::open(settings.out.as_deref())?;
    let mut all_pass = true;
    let mut failure = None;
    for batch in points.chunks(chunk) {
        let results: Vec<_> = pool.install(|| {
            batch
                .par_iter()
                .map(|cp| oracle::run_checkpoint(cp, &cfg))
                .collect()
        });
        let mut text = String::new();
        for (cp, r) in batch.iter().zip(results) {
            let line = match r {
                Ok(rec) => {
                    all_pass &= rec.pass;
                    if text_mode {
                        format!(
                            "{:<9} A={} W={} alpha={} {:<13} closed={} oracle={} err={} rel={} {}",
                            rec.kind.as_str(),
                            scan::fmt_num(cp.a),
                            scan::fmt_num(cp.w),
                            scan::fmt_num(cp.alpha),
                            cp.motion.as_str(),
                            scan::fmt_num(rec.closed_form),
                            scan::fmt_num(rec.oracle_value),
                            scan::fmt_num(rec.est_error),
                            scan::fmt_num(rec.rel_dev),
                            if rec.pass { "pass" } else { "FAIL" }
                        )
                    } else {
                        serde_json::to_string(&rec).expect("serializable")
                    }
                }
                Err(e) => {
                    all_pass = false;
                    serde_json::json!({ "checkpoint": cp, "error": e.to_string() }).to_string()
                }
            };
            text.push_str(&line);
            text.push('\n');
        }
        if let Err(e) = sink.write(&text) {
            failure = Some(e);
            break;
        }
    }
    if let Some(e) = failure {
        sink.abandon();
        return Err(e);
    }
    sink.finish()?;
    if all_pass {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "oracle: closed form disagrees with quadrature".into(),
        })
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let settings = Settings::load(cli)?;
    match &cli.command {
        Command::Eval(args) => run_eval(&settings, args),
        Command::Scan(args) => run_scan(&settings, args),
        Command::Table1 { alpha_h } => run_table1(&settings, *alpha_h),
        Command::Table2 { a_steps, w_steps } => run_table2(&settings, *a_steps, *w_steps),
        Command::Oracle(args) => run_oracle(&settings, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
