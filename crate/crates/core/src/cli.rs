//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::control::navigate;
use crate::error::{Error, Result};
use crate::moduli::{diagonals, reconstruct_strict, Configuration, Linkage};
use crate::potential::{global_min_convex, ChargeVector};
use crate::service::serve;
use crate::stabilizer::{quad_residual, stabilize_pentagon, stabilize_quad};
use crate::verify::{run_all, run_suite, VerifyOptions, SUITES};

#[derive(Debug, Parser)]
#[command(name = "penta-coulomb", version, about = "Coulomb control of convex pentagonal linkages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unique convex minimum of the potential for the given charges.
    Minimize {
        /// Sidelengths: JSON array, {"sides": [...]}, or a file containing either.
        #[arg(long)]
        linkage: String,
        /// Five vertex charges: JSON array, comma list, or file.
        #[arg(long)]
        charges: String,
        #[command(flatten)]
        output: Output,
    },
    /// Stabilizing charges of a convex configuration.
    Stabilize {
        #[arg(long)]
        linkage: Option<String>,
        /// Vertex list (JSON or file) or {"b2": .., "b4": ..}.
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        b2: Option<f64>,
        #[arg(long)]
        b4: Option<f64>,
        /// Fixed charges q1, q2, q4 (pentagons only).
        #[arg(long, default_value = "1,1,1")]
        charges: String,
        #[command(flatten)]
        output: Output,
    },
    /// Steer from one convex configuration to another.
    Navigate {
        #[arg(long)]
        linkage: Option<String>,
        /// Start, then target.
        #[arg(long)]
        config: Vec<String>,
        /// Start then target `b2`, used with `--b4`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        b2: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        b4: Vec<f64>,
        /// Fixed charges q1, q2, q4.
        #[arg(long, default_value = "1,1,1")]
        charges: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Run the property suites.
    Verify {
        /// Run a single suite.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Acceptance-scale sample counts.
        #[arg(long)]
        full: bool,
        /// Grid size for the uniqueness suite (overrides the default).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Serve the line-delimited JSON control protocol.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
}

/// Inline JSON if the text looks like JSON, otherwise the contents of a file.
fn load_json(arg: &str) -> Result<Value> {
    let t = arg.trim_start();
    let text = if t.starts_with('{') || t.starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::InvalidArgument(format!("cannot read `{arg}`: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("malformed JSON in `{arg}`: {e}")))
}

pub fn parse_linkage(arg: &str) -> Result<Linkage> {
    let t = arg.trim();
    if !t.starts_with(['{', '[']) && !std::path::Path::new(t).exists() {
        return Linkage::new(parse_numbers(t)?);
    }
    let v = load_json(t)?;
    let sides = v.get("sides").unwrap_or(&v);
    let sides: Vec<f64> =
        serde_json::from_value(sides.clone()).map_err(|e| Error::InvalidLinkage(e.to_string()))?;
    Linkage::new(sides)
}

pub fn parse_numbers(arg: &str) -> Result<Vec<f64>> {
    let t = arg.trim();
    if t.contains('[') || !t.contains(',') && std::path::Path::new(t).exists() {
        let v = load_json(t)?;
        return serde_json::from_value(v).map_err(|e| Error::InvalidArgument(e.to_string()));
    }
    t.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("`{s}` is not a finite number")))
        })
        .collect()
}

fn parse_fixed(arg: &str) -> Result<[f64; 3]> {
    let v = parse_numbers(arg)?;
    v.try_into()
        .map_err(|v: Vec<f64>| Error::InvalidArgument(format!("expected 3 fixed charges, got {}", v.len())))
}

/// Vertex list, `{"vertices": [...]}` or `{"b2": .., "b4": ..}`.
pub fn parse_config(arg: &str, linkage: Option<&Linkage>) -> Result<Configuration> {
    let v = load_json(arg)?;
    if let (Some(b2), Some(b4)) = (v.get("b2").and_then(Value::as_f64), v.get("b4").and_then(Value::as_f64)) {
        let l = linkage.ok_or_else(|| Error::InvalidArgument("(b2, b4) input needs --linkage".into()))?;
        return reconstruct_strict(l, b2, b4);
    }
    let vertices = v.get("vertices").unwrap_or(&v);
    let c: Configuration =
        serde_json::from_value(vertices.clone()).map_err(|e| Error::InvalidConfiguration(e.to_string()))?;
    if let Some(l) = linkage {
        c.check_realizes(l)?;
    }
    Ok(c)
}

fn emit(output: &Output, text: &str, stdout: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("cannot write output: {e}"));
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => stdout.write_all(text.as_bytes()).map_err(io),
    }
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn vertex_header(n: usize) -> String {
    (1..=n).map(|i| format!("x{i},y{i}")).collect::<Vec<_>>().join(",")
}

fn flat_vertices(c: &Configuration) -> Vec<f64> {
    c.vertices().iter().flat_map(|p| [p[0], p[1]]).collect()
}

fn minimize(linkage: &str, charges: &str, output: &Output, stdout: &mut dyn Write) -> Result<()> {
    let l = parse_linkage(linkage)?;
    let q = ChargeVector::new(parse_numbers(charges)?)?;
    let m = global_min_convex(&l, &q)?;
    let b = diagonals(&m.configuration)?.lengths();
    let text = match output.format {
        Format::Json => {
            let v = json!({
                "configuration": m.configuration,
                "E": m.energy,
                "diagonals": b,
                "residual": m.residual,
            });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("serializable"))
        }
        Format::Csv => {
            let mut row = vec![m.energy];
            row.extend(b);
            row.extend(flat_vertices(&m.configuration));
            format!("E,b1,b2,b3,b4,b5,{}\n{}\n", vertex_header(5), csv_row(&row))
        }
    };
    emit(output, &text, stdout)
}

fn resolve_config(
    linkage: Option<&Linkage>,
    config: Option<&String>,
    b2: Option<f64>,
    b4: Option<f64>,
) -> Result<Configuration> {
    match (config, b2, b4) {
        (Some(c), None, None) => parse_config(c, linkage),
        (None, Some(b2), Some(b4)) => {
            let l = linkage.ok_or_else(|| Error::InvalidArgument("--b2/--b4 need --linkage".into()))?;
            reconstruct_strict(l, b2, b4)
        }
        _ => Err(Error::InvalidArgument(
            "give a configuration with --config or with both --b2 and --b4".into(),
        )),
    }
}

fn stabilize(
    linkage: Option<&String>,
    config: Option<&String>,
    b2: Option<f64>,
    b4: Option<f64>,
    charges: &str,
    output: &Output,
    stdout: &mut dyn Write,
) -> Result<()> {
    let l = linkage.map(|s| parse_linkage(s)).transpose()?;
    let p = resolve_config(l.as_ref(), config, b2, b4)?;
    let (v, header, row) = match p.n() {
        5 => {
            let fixed = parse_fixed(charges)?;
            let sol = stabilize_pentagon(&p, fixed)?;
            let c = sol.coeffs;
            (
                json!({"s": sol.s, "t": sol.t, "residual": sol.residual, "coeffs": c}),
                "s,t,residual,A,B,C",
                vec![sol.s, sol.t, sol.residual, c.a, c.b, c.c],
            )
        }
        4 => {
            let t = stabilize_quad(&p)?;
            let residual = quad_residual(&p, &ChargeVector::new(vec![1.0, t, 1.0, 1.0])?)?;
            (json!({"t": t, "residual": residual}), "t,residual", vec![t, residual])
        }
        n => return Err(Error::InvalidArgument(format!("stabilize supports n = 4, 5, got {n}"))),
    };
    let text = match output.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&v).expect("serializable")),
        Format::Csv => format!("{header}\n{}\n", csv_row(&row)),
    };
    emit(output, &text, stdout)
}

#[allow(clippy::too_many_arguments)]
fn navigate_cmd(
    linkage: Option<&String>,
    configs: &[String],
    b2: &[f64],
    b4: &[f64],
    charges: &str,
    steps: usize,
    output: &Output,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidArgument("--steps must be at least 1".into()));
    }
    let l = linkage.map(|s| parse_linkage(s)).transpose()?;
    let (p0, p1) = match (configs, b2, b4) {
        ([a, b], [], []) => (parse_config(a, l.as_ref())?, parse_config(b, l.as_ref())?),
        ([], [u0, u1], [v0, v1]) => {
            let l = l.as_ref().ok_or_else(|| Error::InvalidArgument("--b2/--b4 need --linkage".into()))?;
            (reconstruct_strict(l, *u0, *v0)?, reconstruct_strict(l, *u1, *v1)?)
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give start and target with two --config values or two --b2/--b4 pairs".into(),
            ))
        }
    };
    let l = match l {
        Some(l) => l,
        None => p0.linkage()?,
    };
    let fixed = parse_fixed(charges)?;
    let tr = navigate(&l, &p0, &p1, fixed, steps)?;
    let text = match output.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&tr.to_json()).expect("serializable")),
        Format::Csv => tr.to_csv(),
    };
    emit(output, &text, stdout)?;
    let _ = writeln!(
        stderr,
        "navigated {} steps ({} attempt(s)), endpoint error {:.3e}",
        tr.increments(),
        tr.attempts,
        tr.last().distance(&p1)
    );
    Ok(())
}

fn verify_cmd(suite: Option<&str>, seed: u64, full: bool, grid: Option<usize>, stdout: &mut dyn Write) -> Result<bool> {
    if grid.is_some_and(|g| g < 3) {
        return Err(Error::InvalidArgument("--grid must be at least 3".into()));
    }
    let opts = VerifyOptions { seed, full, grid };
    let reports = match suite {
        Some(name) => vec![run_suite(name, opts)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{name}`")))?],
        None => run_all(opts),
    };
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.line());
        text.push('\n');
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    text.push_str(&format!("{passed}/{} suites passed (seed {seed})\n", reports.len()));
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(passed == reports.len())
}

/// Runs a parsed command; returns the process exit code. Errors are written
/// to `stderr` as `{"error": {"code", "message"}}`.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Minimize {
            linkage,
            charges,
            output,
        } => minimize(linkage, charges, output, stdout).map(|_| true),
        Command::Stabilize {
            linkage,
            config,
            b2,
            b4,
            charges,
            output,
        } => stabilize(linkage.as_ref(), config.as_ref(), *b2, *b4, charges, output, stdout).map(|_| true),
        Command::Navigate {
            linkage,
            config,
            b2,
            b4,
            charges,
            steps,
            output,
        } => navigate_cmd(linkage.as_ref(), config, b2, b4, charges, *steps, output, stdout, stderr).map(|_| true),
        Command::Verify {
            suite,
            seed,
            full,
            grid,
        } => verify_cmd(suite.as_deref(), *seed, *full, *grid, stdout),
        Command::Serve { port } => match std::net::TcpListener::bind(("127.0.0.1", *port)) {
            Ok(listener) => {
                if let Ok(addr) = listener.local_addr() {
                    let _ = writeln!(stdout, "listening on {addr}");
                    let _ = stdout.flush();
                }
                serve(listener)
                    .map(|_| true)
                    .map_err(|e| Error::InvalidArgument(format!("service failed: {e}")))
            }
            Err(e) => Err(Error::InvalidArgument(format!("cannot bind port {port}: {e}"))),
        },
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(stderr, "{}", json!({"error": {"code": e.code(), "message": e.to_string()}}));
            1
        }
    }
}
