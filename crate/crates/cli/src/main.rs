use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pwlnet_core::compile::{
    compile_expr, compile_min_depth, homogenize, richer_witness, CompileError, ReluNetwork,
};
use pwlnet_core::cpwl::{
    check_convex_sampled, enumerate_pieces, parse_expr, sample_points, CpwlError, CpwlExpr,
};
use pwlnet_core::decompose::{convexify, decompose_expr, split_by_sign, DecomposeError};
use pwlnet_core::depthgate::{
    basis_table, build_mip, build_mip_analog_2d, decode, emit_mps, parse_mps, phi_on,
    solve_mip_with, Checkpoint, DepthgateError, MipStatus, SolverConfig,
};
use pwlnet_core::geometry::{newton_pair_of_network, GeometryError};
use pwlnet_core::{RatVector, Rational};

#[derive(Parser)]
#[command(
    name = "pwlnet",
    version,
    about = "Exact piecewise-linear functions, ReLU networks and polytopes"
)]
struct Cli {
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of samples for sampled checks.
    #[arg(long, global = true, default_value_t = 1000)]
    samples: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an expression at a point.
    Eval {
        expr: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// List the affine pieces of an expression.
    Pieces { expr: PathBuf },
    /// Rewrite every max term as a sum of maxima of at most n + 1 terms.
    Decompose {
        expr: PathBuf,
        #[arg(long)]
        max_terms: Option<usize>,
        /// Output expression; the subset coefficients go to the same path with `.json` appended.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write an expression as a difference of two convex ones.
    Convexify {
        expr: PathBuf,
        /// Use the pairwise-max construction over all pieces.
        #[arg(long, alias = "paper")]
        pieces: bool,
    },
    /// Compile an expression into a ReLU network.
    Compile {
        expr: PathBuf,
        #[arg(long)]
        min_depth: bool,
        /// With --min-depth, convexify over pieces instead of splitting by sign.
        #[arg(long, alias = "paper")]
        pieces: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Network utilities.
    Net {
        #[command(subcommand)]
        command: NetCommand,
    },
    /// Build the witness network for n = 2^k inputs.
    Witness {
        #[arg(long)]
        n: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// The neuron MIP.
    Mip {
        #[command(subcommand)]
        command: MipCommand,
    },
}

#[derive(Subcommand)]
enum NetCommand {
    Eval {
        net: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Zero every bias.
    Homogenize {
        net: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Polytopes P, Q with f = h_P - h_Q for a bias-free network.
    Newton {
        net: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Graphviz rendering.
    Dot { net: PathBuf },
}

#[derive(Subcommand)]
enum MipCommand {
    /// Emit the model for R^4 in MPS format.
    Build {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit the two-dimensional analog in MPS format.
    Analog2d {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve an MPS model exactly by branch and bound.
    Solve {
        model: PathBuf,
        #[arg(long)]
        nodes: Option<u64>,
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Where to write the checkpoint; defaults to the --resume path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        best_bound: bool,
    },
    /// Print the basis table and phi of every basis function.
    Table,
}

enum Failure {
    Input(String),
    Contract(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Contract(_) => 2,
        }
    }
}

impl From<CpwlError> for Failure {
    fn from(e: CpwlError) -> Self {
        match e {
            CpwlError::Parse { .. } => Failure::Input(e.to_string()),
            _ => Failure::Contract(e.to_string()),
        }
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Json(_) | CompileError::MultiOutput | CompileError::LayerShape { .. } => {
                Failure::Input(e.to_string())
            }
            CompileError::Expr(inner) => inner.into(),
            _ => Failure::Contract(e.to_string()),
        }
    }
}

macro_rules! contract {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Contract(e.to_string())
            }
        }
    )*};
}

contract!(DecomposeError, GeometryError, DepthgateError);

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_expr(path: &Path) -> Result<CpwlExpr, Failure> {
    load_expr_with_dim(path, None)
}

fn load_expr_with_dim(path: &Path, dim: Option<usize>) -> Result<CpwlExpr, Failure> {
    parse_expr(&read(path)?, dim).map_err(|e| match e {
        CpwlError::Parse { .. } => Failure::Input(format!("{}:{e}", path.display())),
        other => other.into(),
    })
}

fn load_net(path: &Path) -> Result<ReluNetwork, Failure> {
    ReluNetwork::from_json(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_point(s: &str) -> Result<RatVector, Failure> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<Rational>()
                .map_err(|e| Failure::Input(format!("--at: {e}")))
        })
        .collect()
}

fn check_dim(expected: usize, x: &RatVector) -> Result<(), Failure> {
    if x.dim() == expected {
        Ok(())
    } else {
        Err(Failure::Contract(format!(
            "dimension mismatch: expected {expected}, found {}",
            x.dim()
        )))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Eval { expr, at } => {
            let x = parse_point(&at)?;
            let e = load_expr_with_dim(&expr, Some(x.dim()))?;
            println!("{}", e.eval(&x)?);
        }
        Command::Pieces { expr } => {
            for p in enumerate_pieces(&load_expr(&expr)?) {
                println!("{p}");
            }
        }
        Command::Decompose {
            expr,
            max_terms,
            output,
        } => {
            let e = load_expr(&expr)?;
            let (reduced, sidecar) = decompose_expr(&e, max_terms)?;
            let out = output.unwrap_or_else(|| expr.with_extension("decomposed.expr"));
            write(&out, &format!("{reduced}\n"))?;
            let mut side = out.clone().into_os_string();
            side.push(".json");
            let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            write(Path::new(&side), &format!("{json}\n"))?;
            println!("{reduced}");
            let steps: usize = sidecar.iter().map(|s| s.steps).sum();
            let worst = sidecar
                .iter()
                .flat_map(|s| s.subsets.iter().map(|c| c.c.abs()))
                .max()
                .unwrap_or(0);
            eprintln!("steps {steps} max |c_S| {worst}");
        }
        Command::Convexify { expr, pieces } => {
            let f = load_expr(&expr)?;
            let (g, h) = if pieces {
                convexify(&f, &enumerate_pieces(&f))?
            } else {
                split_by_sign(&f)
            };
            println!("g = {g}");
            println!("h = {h}");
            for (name, side) in [("g", &g), ("h", &h)] {
                println!(
                    "convex({name}) = {} ({} samples, seed {})",
                    check_convex_sampled(side, cli.samples, cli.seed),
                    cli.samples,
                    cli.seed
                );
            }
        }
        Command::Compile {
            expr,
            min_depth,
            pieces,
            output,
        } => {
            let e = load_expr(&expr)?;
            let net = if min_depth {
                compile_min_depth(&e, pieces)?
            } else {
                compile_expr(&e)
            };
            for x in sample_points(e.dim(), cli.samples, cli.seed) {
                let (a, b) = (net.eval(&x)?, e.eval(&x)?);
                if a != b {
                    return Err(Failure::Contract(format!(
                        "network disagrees at {x}: {a} != {b}"
                    )));
                }
            }
            write(&output, &format!("{}\n", net.to_json()))?;
            println!("{}", net.stats());
        }
        Command::Net { command } => match command {
            NetCommand::Eval { net, at } => {
                let net = load_net(&net)?;
                let x = parse_point(&at)?;
                check_dim(net.input_dim(), &x)?;
                println!("{}", net.eval(&x)?);
            }
            NetCommand::Homogenize { net, output } => {
                let h = homogenize(&load_net(&net)?);
                emit(output.as_deref(), &format!("{}\n", h.to_json()))?;
            }
            NetCommand::Newton { net, output } => {
                let (p, q) = newton_pair_of_network(&load_net(&net)?)?;
                let pair = serde_json::json!({ "P": p, "Q": q });
                let text = serde_json::to_string_pretty(&pair).expect("pair serializes");
                emit(output.as_deref(), &format!("{text}\n"))?;
                if output.is_some() {
                    println!("|P| = {} |Q| = {}", p.len(), q.len());
                }
            }
            NetCommand::Dot { net } => print!("{}", load_net(&net)?.to_dot()),
        },
        Command::Witness { n, output } => {
            let (expr, net) = richer_witness(n)?;
            println!("f = {expr}");
            println!("{}", net.stats());
            if let Some(p) = output {
                write(&p, &format!("{}\n", net.to_json()))?;
            }
        }
        Command::Mip { command } => run_mip(command)?,
    }
    Ok(())
}

fn run_mip(command: MipCommand) -> Result<(), Failure> {
    match command {
        MipCommand::Build { output } => {
            let text = emit_mps(&build_mip()).map_err(|e| Failure::Contract(e.to_string()))?;
            emit(output.as_deref(), &text)?;
        }
        MipCommand::Analog2d { output } => {
            let text =
                emit_mps(&build_mip_analog_2d()).map_err(|e| Failure::Contract(e.to_string()))?;
            emit(output.as_deref(), &text)?;
        }
        MipCommand::Table => {
            let table = basis_table();
            print!("{}", table.render());
            println!();
            for (k, m) in table.functions.iter().enumerate() {
                println!(
                    "phi(g{}) = {}",
                    m.digits(),
                    phi_on(&table.rays, &table.column(k))?
                );
            }
            println!("rank = {}", table.rank());
        }
        MipCommand::Solve {
            model,
            nodes,
            resume,
            checkpoint,
            best_bound,
        } => {
            let text = read(&model)?;
            let m = parse_mps(&text)
                .map_err(|e| Failure::Input(format!("{}: {e}", model.display())))?;
            let resume_state = match &resume {
                Some(p) => Some(
                    Checkpoint::from_json(&read(p)?)
                        .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
                ),
                None => None,
            };
            let mut config = SolverConfig::default();
            if let Some(n) = nodes {
                config.node_budget = n;
            }
            if best_bound {
                config.selection = pwlnet_core::depthgate::NodeSelection::BestBound;
            }
            let sol = solve_mip_with(&m, &config, resume_state)
                .map_err(|e| Failure::Contract(e.to_string()))?;
            let status = match &sol.status {
                MipStatus::Optimal => "optimal",
                MipStatus::BudgetExhausted => "budget exhausted",
                MipStatus::Infeasible { .. } => "infeasible",
                MipStatus::RelaxationUnbounded => "relaxation unbounded",
            };
            let show =
                |v: &Option<Rational>| v.as_ref().map_or("none".to_string(), ToString::to_string);
            println!("status {status}");
            println!("bound {}", show(&sol.bound));
            println!("incumbent {}", show(&sol.incumbent_value));
            println!(
                "nodes {} (total {}) sessions {} open {}",
                sol.session_nodes,
                sol.checkpoint.nodes,
                sol.checkpoint.sessions,
                sol.checkpoint.open.len()
            );
            if let Some(x) = &sol.incumbent {
                match decode(&m, x) {
                    Ok(d) => {
                        let coeffs: Vec<String> = d
                            .coefficients
                            .iter()
                            .map(|(s, a)| format!("a{}={a}", s.digits()))
                            .collect();
                        println!("decoded phi {} [{}]", d.phi, coeffs.join(" "));
                    }
                    Err(DepthgateError::UnrecognizedColumn(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            if !sol.checkpoint.trace_is_monotone() {
                return Err(Failure::Contract("bound trace is not monotone".into()));
            }
            if let Some(p) = checkpoint.or(resume) {
                write(&p, &format!("{}\n", sol.checkpoint.to_json()))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Input(m) | Failure::Contract(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
