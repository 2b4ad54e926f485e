use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pvem::assembly::{Formulation, TauPolicy};
use pvem::bench_cli::{self, BenchResult};
use pvem::coefficients::builtin_coefficient;
use pvem::mesh_geometry::{resolve_mesh, validate_mesh, Mesh};
use pvem::{Problem, StabKind};

#[derive(Parser)]
#[command(name = "pvem", version, about = "p-version virtual element benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in mesh name (quad, voronoi5, octagon, bezier4) or mesh file path.
    #[arg(long, default_value = "quad")]
    mesh: String,
    #[arg(long, default_value = "laplace")]
    problem: Problem,
    /// Order range `a..b` (inclusive) or a single order.
    #[arg(long, default_value = "1..8")]
    k: String,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs formulations over a range of orders.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated formulations.
        #[arg(long, default_value = "S3")]
        formulation: String,
        /// Comma-separated stabilization parameters or `mean`.
        #[arg(long)]
        tau: Option<String>,
        /// Comma-separated multiples of the default rank tolerance.
        #[arg(long)]
        tol_mult: Option<String>,
        /// Coefficient of the bilinear form.
        #[arg(long)]
        coefficient: Option<String>,
    },
    /// Stabilization parameter study.
    SweepTau {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "S1")]
        formulation: String,
        #[arg(long)]
        tau: Option<String>,
    },
    /// Rank tolerance study for a self-stabilized formulation.
    SweepTol {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "V3")]
        formulation: String,
        #[arg(long, default_value = "1,10,100,1000,10000")]
        tol_mult: String,
    },
    /// All stabilized and self-stabilized formulations side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        formulation: Option<String>,
    },
    /// Standard against coefficient-aware formulations.
    CompareVc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "trig")]
        coefficient: String,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
}

#[derive(Subcommand)]
enum MeshAction {
    /// Checks a mesh and reports every issue.
    Validate { mesh: String },
    /// Prints a summary and the mesh document.
    Show {
        mesh: String,
        #[arg(long)]
        json: bool,
    },
}

fn parse_k(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().context("order range start")?;
        let b: usize = b.trim().parse().context("order range end")?;
        if a > b {
            bail!("empty order range {s}");
        }
        Ok((a..=b).collect())
    } else {
        s.split(',')
            .map(|x| x.trim().parse().context("order"))
            .collect()
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("number `{x}`"))
        })
        .collect()
}

fn parse_taus(s: &str) -> Result<Vec<TauPolicy>> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            if x.eq_ignore_ascii_case("mean") {
                Ok(TauPolicy::Mean)
            } else {
                x.parse::<f64>()
                    .map(TauPolicy::Value)
                    .with_context(|| format!("tau `{x}`"))
            }
        })
        .collect()
}

fn parse_formulations(s: &str) -> Result<Vec<Formulation>> {
    s.split(',')
        .map(|x| x.parse::<Formulation>().map_err(anyhow::Error::msg))
        .collect()
}

fn load(common: &Common) -> Result<(Mesh, String, Vec<usize>)> {
    let mesh =
        resolve_mesh(&common.mesh).with_context(|| format!("loading mesh `{}`", common.mesh))?;
    Ok((mesh, common.mesh.clone(), parse_k(&common.k)?))
}

fn emit(rows: &[BenchResult], out: &Option<PathBuf>) -> Result<ExitCode> {
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            bench_cli::write_csv(rows, BufWriter::new(f))?;
        }
        None => bench_cli::write_csv(rows, io::stdout().lock())?,
    }
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "{} {} k={}: {}",
            r.problem,
            r.formulation,
            r.k,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(if rows.iter().any(|r| r.diverged) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            common,
            formulation,
            tau,
            tol_mult,
            coefficient,
        } => {
            let (mesh, name, ks) = load(&common)?;
            let forms = parse_formulations(&formulation)?;
            let taus = tau
                .as_deref()
                .map(parse_taus)
                .transpose()?
                .unwrap_or_default();
            let tols = tol_mult
                .as_deref()
                .map(parse_list)
                .transpose()?
                .unwrap_or_default();
            let coef = coefficient
                .as_deref()
                .map(builtin_coefficient)
                .transpose()?;
            let rows = bench_cli::run(
                &mesh,
                &name,
                common.problem,
                &forms,
                &ks,
                &taus,
                &tols,
                coef,
            );
            emit(&rows, &common.out)
        }
        Command::SweepTau {
            common,
            formulation,
            tau,
        } => {
            let (mesh, name, ks) = load(&common)?;
            let stab: StabKind = formulation.parse().map_err(anyhow::Error::msg)?;
            let taus = match tau {
                Some(t) => parse_taus(&t)?,
                None => bench_cli::default_taus(),
            };
            emit(
                &bench_cli::sweep_tau(&mesh, &name, common.problem, stab, &ks, &taus),
                &common.out,
            )
        }
        Command::SweepTol {
            common,
            formulation,
            tol_mult,
        } => {
            let (mesh, name, ks) = load(&common)?;
            let version = match formulation
                .parse::<Formulation>()
                .map_err(anyhow::Error::msg)?
            {
                Formulation::SelfStabilized { version, vc: false } => version,
                other => bail!("sweep-tol needs V1..V6, got {other}"),
            };
            emit(
                &bench_cli::sweep_tol(
                    &mesh,
                    &name,
                    common.problem,
                    version,
                    &ks,
                    &parse_list(&tol_mult)?,
                ),
                &common.out,
            )
        }
        Command::Compare {
            common,
            formulation,
        } => {
            let (mesh, name, ks) = load(&common)?;
            let forms = match formulation {
                Some(f) => parse_formulations(&f)?,
                None => Formulation::standard_set(),
            };
            emit(
                &bench_cli::compare_formulations(&mesh, &name, common.problem, &ks, &forms),
                &common.out,
            )
        }
        Command::CompareVc {
            common,
            coefficient,
        } => {
            let (mesh, name, ks) = load(&common)?;
            let coef = builtin_coefficient(&coefficient)?;
            emit(
                &bench_cli::compare_vc(&mesh, &name, common.problem, &ks, coef),
                &common.out,
            )
        }
        Command::Mesh {
            action: MeshAction::Validate { mesh },
        } => {
            let m = resolve_mesh(&mesh).with_context(|| format!("loading mesh `{mesh}`"))?;
            let report = validate_mesh(&m);
            if report.issues.is_empty() {
                println!(
                    "{mesh}: ok ({} elements, {} vertices)",
                    m.elements.len(),
                    m.vertices.len()
                );
                Ok(ExitCode::SUCCESS)
            } else {
                for issue in &report.issues {
                    match issue.element {
                        Some(e) => println!("element {e}: {}", issue.message),
                        None => println!("mesh: {}", issue.message),
                    }
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Mesh {
            action: MeshAction::Show { mesh, json },
        } => {
            let m = resolve_mesh(&mesh).with_context(|| format!("loading mesh `{mesh}`"))?;
            if json {
                println!("{}", m.to_json());
            } else {
                println!(
                    "mesh {}: {} vertices, {} edges, {} elements, area {}",
                    m.name,
                    m.vertices.len(),
                    m.edges.len(),
                    m.elements.len(),
                    m.total_area()
                );
                for (i, el) in m.elements.iter().enumerate() {
                    println!(
                        "  element {i}: {} edges ({} curved), area {}, diameter {}",
                        el.edges.len(),
                        el.edges.iter().filter(|e| e.degree() > 1).count(),
                        el.area,
                        el.diameter
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
