use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use semicocycle_lab::algebra::{CVector, MapExpr, C64};
use semicocycle_lab::linearize::{verify_cohomology, DEFAULT_T_GRID};
use semicocycle_lab::report::{cocycle_csv, flow_csv, run_pipeline, samples_csv, MethodChoice, RunOptions};
use semicocycle_lab::scenario::{builtin, Scenario, BUILTINS};
use semicocycle_lab::semicocycle::{check_invertible, evolve, growth_fit, GrowthFit};
use semicocycle_lab::spectra::SpectraBlock;
use semicocycle_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "semicocycle-lab", version, about = "Linearization of holomorphic semicocycles")]
struct Cli {
    /// Write the JSON report here instead of stdout (a directory for `simulate`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-sample work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Omit timing fields so reports are byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,
    /// Tolerance overrides, given as `--tol.KEY VALUE`.
    #[arg(long = "tol-set", global = true, hide = true, value_name = "KEY=VALUE")]
    tol_set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario JSON file or built-in example name.
    scenario: String,
    /// Truncation of sequence-space examples.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Built-in examples.
    #[command(subcommand)]
    Examples(ExamplesCmd),
    /// Lyapunov indices, characteristic ratio and resonances.
    Indices(ScenarioArg),
    /// Compute a linearizing map on the sample grid.
    Linearize {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        /// Corrector or Taylor degree.
        #[arg(long)]
        degree: Option<u32>,
        /// Also write the sampled M values as CSV.
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Check a gauge against the cohomology equation.
    Verify {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// MapExpr JSON file, or `identity` / `reference`.
        #[arg(long)]
        gauge: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Integrate flow and cocycle from one point and write CSVs.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Initial point: comma-separated coordinates, each `re` or `re:im`.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0.1)]
        dt_out: f64,
    },
}

#[derive(Subcommand)]
enum ExamplesCmd {
    List,
    /// Print the scenario JSON of a builtin.
    Show {
        name: String,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Write every builtin as `<name>.json` into a directory.
    Export { dir: PathBuf },
    /// Full pipeline on a builtin.
    Run {
        name: String,
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Naive,
    Corrected,
    Taylor,
    Auto,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Naive => MethodChoice::Naive,
            MethodArg::Corrected => MethodChoice::Corrected,
            MethodArg::Taylor => MethodChoice::Taylor,
            MethodArg::Auto => MethodChoice::Auto,
        }
    }
}

/// Rewrites `--tol.KEY VALUE` and `--tol.KEY=VALUE` into the hidden `--tol-set KEY=VALUE`.
fn rewrite_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.strip_prefix("--tol.") {
            Some(rest) if rest.contains('=') => {
                out.push("--tol-set".into());
                out.push(rest.to_string());
            }
            Some(rest) => {
                out.push("--tol-set".into());
                out.push(format!("{rest}={}", it.next().unwrap_or_default()));
            }
            None => out.push(a),
        }
    }
    out
}

struct Context {
    out: Option<PathBuf>,
    seed: Option<u64>,
    timing: bool,
    overrides: Vec<(String, f64)>,
}

impl Context {
    fn scenario(&self, arg: &ScenarioArg) -> Result<Scenario> {
        let path = Path::new(&arg.scenario);
        let sc = if path.exists() {
            Scenario::load(path)?
        } else if BUILTINS.iter().any(|b| b.name == arg.scenario) {
            builtin(&arg.scenario, arg.n)?
        } else {
            return Err(Error::Scenario(format!(
                "`{}` is neither a file nor a built-in example",
                arg.scenario
            )));
        };
        self.adjust(sc)
    }

    fn adjust(&self, mut sc: Scenario) -> Result<Scenario> {
        if let Some(seed) = self.seed {
            sc.sample.seed = seed;
        }
        if self.overrides.is_empty() {
            return Ok(sc);
        }
        for (k, v) in &self.overrides {
            sc.tolerances.set(k, *v)?;
        }
        sc.prepared()
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => Ok(std::fs::write(p, text)?),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn parse_point(s: &str, dim: usize) -> Result<CVector> {
    let bad = || Error::Precondition(format!("cannot parse point `{s}`"));
    let coords = s
        .split(',')
        .map(|c| {
            let mut parts = c.trim().splitn(2, ':');
            let re: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let im: f64 = match parts.next() {
                Some(p) => p.parse().map_err(|_| bad())?,
                None => 0.0,
            };
            Ok(C64::new(re, im))
        })
        .collect::<Result<Vec<_>>>()?;
    if coords.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: coords.len(),
        });
    }
    Ok(CVector::from_vec(coords))
}

#[derive(Serialize)]
struct VerifyReport {
    scenario: String,
    gauge: String,
    residual: f64,
    tol: f64,
    pass: bool,
    min_singular: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    scenario: String,
    #[serde(with = "semicocycle_lab::algebra::serde_complex::vector")]
    x: CVector,
    t_max: f64,
    points: usize,
    #[serde(with = "semicocycle_lab::algebra::serde_complex::vector")]
    x_final: CVector,
    growth: GrowthFit,
    flow_csv: String,
    cocycle_csv: String,
}

/// An error already rendered for the terminal.
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(format!("io: {e}"))
    }
}

fn run(cli: Cli) -> std::result::Result<i32, Failure> {
    let overrides = cli
        .tol_set
        .iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Scenario(format!("bad tolerance override `{kv}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Scenario(format!("tolerance `{k}`: `{v}` is not a number")))?;
            Ok((k.to_string(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = Context {
        out: cli.out,
        seed: cli.seed,
        timing: !cli.no_timing,
        overrides,
    };
    match cli.command {
        Command::Examples(ExamplesCmd::List) => {
            let mut text = String::new();
            for b in &BUILTINS {
                text.push_str(&format!("{:<12} {}\n", b.name, b.summary));
            }
            ctx.emit(&text)?;
            Ok(0)
        }
        Command::Examples(ExamplesCmd::Show { name, n }) => {
            let sc = ctx.adjust(builtin(&name, n)?)?;
            ctx.emit(&format!("{}\n", sc.to_json()))?;
            Ok(0)
        }
        Command::Examples(ExamplesCmd::Export { dir }) => {
            std::fs::create_dir_all(&dir)?;
            for b in &BUILTINS {
                let sc = ctx.adjust(builtin(b.name, None)?)?;
                std::fs::write(dir.join(format!("{}.json", b.name)), format!("{}\n", sc.to_json()))?;
            }
            Ok(0)
        }
        Command::Examples(ExamplesCmd::Run { name, n }) => {
            let sc = ctx.adjust(builtin(&name, n)?)?;
            let opts = RunOptions {
                full: true,
                timing: ctx.timing,
                ..Default::default()
            };
            let rep = with_context(&sc.name, run_pipeline(&sc, &opts))?;
            ctx.emit(&rep.to_json())?;
            Ok(rep.exit_code())
        }
        Command::Indices(arg) => {
            let sc = ctx.scenario(&arg)?;
            let block: Result<SpectraBlock> = (|| {
                let a = sc.semigroup.linear_part()?;
                semicocycle_lab::spectra::spectra_block(&a, sc.semicocycle.b0(), &sc.tolerances)
            })();
            ctx.emit(&to_json(&with_context(&sc.name, block)?))?;
            Ok(0)
        }
        Command::Linearize {
            scenario,
            method,
            degree,
            samples_csv: csv_path,
        } => {
            let sc = ctx.scenario(&scenario)?;
            let opts = RunOptions {
                method: method.into(),
                degree,
                full: false,
                timing: ctx.timing,
            };
            let rep = with_context(&sc.name, run_pipeline(&sc, &opts))?;
            if let (Some(p), Some(last)) = (csv_path, rep.linearization.last()) {
                std::fs::write(p, samples_csv(last))?;
            }
            ctx.emit(&rep.to_json())?;
            Ok(rep.exit_code())
        }
        Command::Verify { scenario, gauge, tol } => {
            let sc = ctx.scenario(&scenario)?;
            let (n, m) = (sc.semigroup.dim, sc.semicocycle.algebra_dim());
            let g = match gauge.as_str() {
                "identity" => MapExpr::identity(n, m),
                "reference" => sc
                    .semicocycle
                    .reference_m
                    .clone()
                    .ok_or_else(|| Error::Scenario("scenario declares no reference gauge".into()))?,
                file => {
                    let text = std::fs::read_to_string(file)?;
                    serde_json::from_str::<MapExpr>(&text)
                        .map_err(|e| Error::Scenario(format!("{file}: line {}, column {}: {e}", e.line(), e.column())))?
                }
            }
            .centered_default(&sc.semigroup.x0)
            .with_denom_floor(sc.tolerances.denom_floor);
            let samples = sc.samples()?;
            let result: Result<(f64, f64)> = (|| {
                let min_singular = check_invertible(&g, &samples, sc.tolerances.inv_floor)?;
                let r = verify_cohomology(
                    &sc.semigroup,
                    &sc.semicocycle,
                    &g,
                    sc.semicocycle.b0(),
                    &samples,
                    &DEFAULT_T_GRID,
                    &sc.tolerances,
                )?;
                Ok((r, min_singular))
            })();
            let (residual, min_singular) = with_context(&sc.name, result)?;
            let rep = VerifyReport {
                scenario: sc.name.clone(),
                gauge,
                residual,
                tol,
                pass: residual <= tol,
                min_singular,
            };
            ctx.emit(&to_json(&rep))?;
            Ok(if rep.pass { 0 } else { 2 })
        }
        Command::Simulate {
            scenario,
            x,
            t_max,
            dt_out,
        } => {
            let sc = ctx.scenario(&scenario)?;
            if !(t_max > 0.0 && dt_out > 0.0 && t_max.is_finite()) {
                return Err(Error::Precondition("--t-max and --dt-out must be positive".into()).into());
            }
            let x = parse_point(&x, sc.semigroup.dim)?;
            let steps = (t_max / dt_out).round() as usize;
            let times: Vec<f64> = (0..=steps).map(|k| (k as f64 * dt_out).min(t_max)).collect();
            let path = with_context(
                &sc.name,
                evolve(&sc.semigroup, &sc.semicocycle, &x, &times, &sc.tolerances),
            )?;
            let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir)?;
            let (fp, cp) = (dir.join("flow.csv"), dir.join("cocycle.csv"));
            std::fs::write(&fp, flow_csv(&path))?;
            std::fs::write(&cp, cocycle_csv(&path))?;
            let rep = SimulateReport {
                scenario: sc.name.clone(),
                x_final: path.flow_states.last().cloned().unwrap_or_else(|| x.clone()),
                x,
                t_max,
                points: path.times.len(),
                growth: growth_fit(std::slice::from_ref(&path), sc.semigroup.norm),
                flow_csv: fp.display().to_string(),
                cocycle_csv: cp.display().to_string(),
            };
            print!("{}", to_json(&rep));
            Ok(0)
        }
    }
}

fn with_context<T>(name: &str, r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure(format!("scenario `{name}`: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(rewrite_args(std::env::args()));
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
