use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use idexp::harness::{
    parse_key_values, run_convergence, write_coeff_csv, write_field_csv, ExperimentPlan,
};
use idexp::mlf::{mlf, MlfParams};
use idexp::oracle::{ode_oracle, OracleConfig, OracleScheme};
use idexp::resolvent::{KernelSpec, ModeResolvent, Resolvent};
use idexp::solvers::{Builtin, Method, Trajectory};
use idexp::spectral::SpectralSpace;
use idexp::tableau::{
    erk2_coefficients, linear_weights, order_condition_residuals, LinearQuadratureRule,
};
use idexp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "idexp",
    version,
    about = "Exponential integrators for integro-differential equations with memory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Mittag-Leffler function E_{alpha,beta}(x).
    Mlf {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
    /// Print the largest order-condition residual per condition.
    CheckOrderConditions {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = 64)]
        modes: usize,
        #[arg(long, default_value_t = 32)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        tmax: f64,
        #[arg(long, default_value_t = 0.5)]
        c2: f64,
    },
    /// Solve a built-in problem and write the trajectory as CSV.
    Solve(SolveArgs),
    /// Run a convergence study and write the error report as CSV.
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug)]
enum KernelKind {
    Riesz,
    Exp,
}

#[derive(Args, Clone)]
struct KernelArgs {
    #[arg(long, value_enum, default_value = "riesz")]
    kernel: KernelKind,
    /// Riesz exponent, 1 < rho < 2.
    #[arg(long, default_value_t = 1.75)]
    rho: f64,
    /// Exponential kernel rate, 0 < a <= 2.
    #[arg(long, default_value_t = 2.0)]
    rate: f64,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec> {
        match self.kernel {
            KernelKind::Riesz => KernelSpec::riesz(self.rho),
            KernelKind::Exp => KernelSpec::exponential(self.rate),
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug)]
enum OutputFormat {
    /// t,x,u on the collocation grid
    Field,
    /// t,k,coeff
    Coeffs,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value_t = 64)]
    modes: usize,
    /// Collocation points (default 4 * modes).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 64)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    tmax: f64,
    /// euler, erk2, quad1, quad2, quad3 or oracle-pt
    #[arg(long, default_value = "erk2")]
    method: String,
    #[arg(long, default_value_t = 0.5)]
    c2: f64,
    /// Fine steps per step for oracle-pt.
    #[arg(long, default_value_t = 64)]
    substeps: usize,
    #[arg(long, default_value = "builtin:sine")]
    problem: String,
    #[arg(long, value_enum, default_value = "field")]
    format: OutputFormat,
    /// Output times (comma separated); all steps if omitted.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ConvergenceArgs {
    /// key=value file mirroring the flags; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    steps_list: Option<Vec<usize>>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    problem: Option<String>,
    /// Reference step = smallest step / divisor.
    #[arg(long)]
    reference_divisor: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mlf { alpha, beta, x } => run_mlf(alpha, beta, x),
        Command::CheckOrderConditions {
            kernel,
            modes,
            steps,
            tmax,
            c2,
        } => check_order_conditions(&kernel, modes, steps, tmax, c2),
        Command::Solve(args) => solve(&args),
        Command::Convergence(args) => convergence(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run_mlf(alpha: f64, beta: f64, x: f64) -> Result<()> {
    let v = mlf(MlfParams::new(alpha, beta)?, x)?;
    println!("{v:.16e}");
    Ok(())
}

fn check_order_conditions(
    kernel: &KernelArgs,
    modes: usize,
    steps: usize,
    tmax: f64,
    c2: f64,
) -> Result<()> {
    if steps == 0 || modes == 0 || tmax.is_nan() || tmax <= 0.0 {
        return Err(Error::InvalidParameter(
            "modes, steps and tmax must be positive".into(),
        ));
    }
    let family = Resolvent::new(kernel.spec()?)?;
    let space = SpectralSpace::with_modes(modes)?;
    let h = tmax / steps as f64;
    let rules: Vec<LinearQuadratureRule> = (1..=3)
        .map(LinearQuadratureRule::standard)
        .collect::<Result<_>>()?;
    let mut linear = [[0.0f64; 3]; 3];
    let mut two_stage = [0.0f64; 5];
    for k in 1..=modes {
        let mr = ModeResolvent::new(family.clone(), space.eigenvalue(k))?;
        for l in 1..=steps {
            let t = l as f64 * h;
            for (s, rule) in rules.iter().enumerate() {
                let w = linear_weights(rule, &mr, h, t)?;
                let r = order_condition_residuals(&w, rule.nodes(), &mr, h, t, rule.order())?;
                for (slot, v) in linear[s].iter_mut().zip(r) {
                    *slot = slot.max(v.abs());
                }
            }
            let w = erk2_coefficients(c2, &mr, h, t)?;
            let r = order_condition_residuals(&w, &[0.0, c2], &mr, h, t, 2)?;
            for (slot, v) in two_stage.iter_mut().zip(r) {
                *slot = slot.max(v.abs());
            }
        }
    }
    println!(
        "kernel={} modes={modes} steps={steps} h={h}",
        kernel.spec()?.label()
    );
    for (s, row) in linear.iter().enumerate() {
        for (k, v) in row.iter().take(s + 1).enumerate() {
            println!("quadrature s={} M_{} {:.3e}", s + 1, k + 1, v);
        }
    }
    let names = [
        "b1+b2=phi1",
        "c2*b2=phi2",
        "a21=c2*phi1(c2h)",
        "b1s+b2s=phi1(t+c2h)",
        "c2*b2s=phi2(t+c2h)",
    ];
    for (name, v) in names.iter().zip(two_stage) {
        println!("erk2 c2={c2} {name} {v:.3e}");
    }
    Ok(())
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::Io {
                context: format!("creating {}", p.display()),
                source: e,
            })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

fn solve(args: &SolveArgs) -> Result<()> {
    let kernel = args.kernel.spec()?;
    let space = SpectralSpace::new(args.modes, args.grid.unwrap_or(4 * args.modes))?;
    let builtin: Builtin = args.problem.parse()?;
    let problem = builtin.build(kernel, space, args.tmax)?;
    let traj = if args.method == "oracle-pt" {
        let cfg = OracleConfig::new(args.substeps, OracleScheme::ProductTrapezoidal)?;
        let sol = ode_oracle(&problem, &cfg, args.steps)?;
        Trajectory {
            times: sol.times,
            states: sol.states,
            stage_history: Vec::new(),
        }
    } else {
        Method::parse(&args.method, args.c2)?.solve(&problem, args.steps)?
    };
    let mut out = open_output(&args.output)?;
    match args.format {
        OutputFormat::Field => write_field_csv(&problem, &traj, &args.times, &mut out)?,
        OutputFormat::Coeffs => write_coeff_csv(&traj, &args.times, &mut out)?,
    }
    out.flush().map_err(|e| Error::Io {
        context: "flushing output".into(),
        source: e,
    })
}

fn lookup<T: std::str::FromStr>(
    cli: Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = cli {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(s) => s
            .parse()
            .map_err(|e| Error::Parse(format!("config key '{key}': {e}"))),
        None => Ok(default),
    }
}

fn convergence(args: ConvergenceArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                context: format!("reading {}", p.display()),
                source: e,
            })?;
            parse_key_values(&text)?
        }
        None => BTreeMap::new(),
    };
    let kernel_kind = match args.kernel {
        Some(k) => k,
        None => match cfg.get("kernel").map(String::as_str) {
            None | Some("riesz") => KernelKind::Riesz,
            Some("exp") => KernelKind::Exp,
            Some(other) => return Err(Error::Parse(format!("unknown kernel '{other}'"))),
        },
    };
    let kernel = KernelArgs {
        kernel: kernel_kind,
        rho: lookup(args.rho, &cfg, "rho", 1.75)?,
        rate: lookup(args.rate, &cfg, "rate", 2.0)?,
    }
    .spec()?;
    let c2 = lookup(args.c2, &cfg, "c2", 0.5)?;
    let method = Method::parse(
        &lookup(args.method, &cfg, "method", "euler".to_string())?,
        c2,
    )?;
    let steps_list = match args.steps_list {
        Some(v) => v,
        None => match cfg.get("steps-list") {
            Some(s) => s
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("steps-list: {e}")))
                })
                .collect::<Result<Vec<_>>>()?,
            None => vec![16, 32, 64, 128, 256, 512],
        },
    };
    let modes = lookup(args.modes, &cfg, "modes", 256)?;
    let grid = lookup(args.grid, &cfg, "grid", 4 * modes)?;
    let tmax = lookup(args.tmax, &cfg, "tmax", 1.0)?;
    let builtin: Builtin =
        lookup(args.problem, &cfg, "problem", "builtin:sine".to_string())?.parse()?;
    let divisor = lookup(args.reference_divisor, &cfg, "reference-divisor", 2)?;
    let output: Option<PathBuf> = match args.output {
        Some(p) => Some(p),
        None => cfg.get("output").map(PathBuf::from),
    };

    let problem = builtin.build(kernel, SpectralSpace::new(modes, grid)?, tmax)?;
    let plan = ExperimentPlan::new(problem, method, steps_list)?.with_reference_divisor(divisor)?;
    let mut report = run_convergence(&plan)?;
    report
        .metadata
        .insert("problem".into(), builtin.name().into());
    let csv = report.to_csv();
    match output {
        Some(p) => {
            std::fs::write(&p, &csv).map_err(|e| Error::Io {
                context: format!("writing {}", p.display()),
                source: e,
            })?;
            eprint!("{csv}");
        }
        None => print!("{csv}"),
    }
    Ok(())
}
