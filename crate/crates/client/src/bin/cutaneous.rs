//! `cutaneous` command-line front end. Every subcommand except `serve` talks
//! to a server: the one given by `--server`, or one started in-process.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cutaneous_client::Client;
use cutaneous_core::config::Config;
use cutaneous_core::harness::Condition;
use cutaneous_core::patterns::PatternKind;
use cutaneous_core::session::CommandLog;
use cutaneous_core::{Finger, Mechanism};
use cutaneous_service::api::{
    ForwardRequest, InverseRequest, OperatorKind, PatternRequest, TrialsRequest, WorkspaceRequest,
};
use cutaneous_service::{Server, ServerOptions};

#[derive(Parser)]
#[command(name = "cutaneous", version, about = "Teleoperated pivoting with cutaneous feedback")]
struct Cli {
    /// Server to talk to. Without it an embedded server is started.
    #[arg(long, global = true)]
    server: Option<String>,
    /// TOML configuration for an embedded or served simulation.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the service until interrupted.
    Serve(ServeArgs),
    /// Forward kinematics of one mechanism.
    Fk {
        #[arg(long, value_enum, default_value = "index")]
        finger: FingerArg,
        #[arg(long, value_enum, default_value = "lower")]
        mechanism: MechanismArg,
        #[arg(long, allow_negative_numbers = true)]
        theta1: f64,
        #[arg(long, allow_negative_numbers = true)]
        theta2: f64,
    },
    /// Inverse kinematics of one mechanism.
    Ik {
        #[arg(long, value_enum, default_value = "index")]
        finger: FingerArg,
        #[arg(long, value_enum, default_value = "lower")]
        mechanism: MechanismArg,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
    },
    /// Rasterise a station's reachable workspace.
    Workspace {
        #[arg(long, value_enum, default_value = "index")]
        finger: FingerArg,
        /// Cell size, mm.
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        #[arg(long, default_value = "workspace.csv")]
        out: PathBuf,
    },
    /// Sample a deformation pattern.
    Patterns {
        /// stretch, slip or twist.
        #[arg(long)]
        kind: PatternKind,
        #[arg(long, value_enum, default_value = "index")]
        finger: FingerArg,
        /// Sample rate, Hz.
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = "pattern.csv")]
        out: PathBuf,
        /// Also drive the simulated device through the pattern and write its log here.
        #[arg(long)]
        device_log: Option<PathBuf>,
    },
    /// Run the trial protocol headless with a scripted operator.
    RunTrials {
        /// Comma-separated conditions, or `all`.
        #[arg(long, default_value = "all")]
        conditions: String,
        #[arg(long, value_enum, default_value = "scripted")]
        operator: OperatorArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Per-condition statistics. Defaults to summary.json next to `--out`.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Per-tick history of every trial.
        #[arg(long)]
        tick_log: Option<PathBuf>,
    },
    /// Re-run a recorded session command log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "replay.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Seed of the live session's trial schedule.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "VF+GF+TF")]
    condition: Condition,
    /// Static files (the web UI) served at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// Write the live session's command log here.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FingerArg {
    Index,
    Thumb,
}

impl From<FingerArg> for Finger {
    fn from(f: FingerArg) -> Self {
        match f {
            FingerArg::Index => Finger::Index,
            FingerArg::Thumb => Finger::Thumb,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Lower,
    Upper,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Lower => Mechanism::Lower,
            MechanismArg::Upper => Mechanism::Upper,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OperatorArg {
    Scripted,
    Ideal,
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };

    if let Command::Serve(args) = cli.command {
        if cli.server.is_some() {
            bail!("`serve` starts a server; it cannot be combined with --server");
        }
        return serve(config, args).await;
    }

    let (client, embedded) = match &cli.server {
        Some(url) => {
            if cli.config.is_some() {
                bail!("--config applies to embedded servers only; configure the remote server instead");
            }
            (Client::new(url.clone()), None)
        }
        None => {
            let options = ServerOptions {
                config,
                ..ServerOptions::default()
            };
            let server = Server::start(SocketAddr::from(([127, 0, 0, 1], 0)), options).await?;
            (Client::new(server.url()), Some(server))
        }
    };
    let outcome = run(&client, cli.command).await;
    if let Some(server) = embedded {
        server.shutdown().await?;
    }
    outcome
}

async fn serve(config: Config, args: ServeArgs) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", args.host, args.port))?;
    let options = ServerOptions {
        config,
        seed: args.seed,
        condition: args.condition,
        ui_dir: args.ui_dir,
        record: args.record,
    };
    let server = Server::start(addr, options).await?;
    eprintln!(
        "serving on {} (session socket at ws://{}/session)",
        server.url(),
        server.addr()
    );
    server
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn run(client: &Client, command: Command) -> Result<()> {
    match command {
        Command::Serve(_) => unreachable!("handled before connecting"),
        Command::Fk {
            finger,
            mechanism,
            theta1,
            theta2,
        } => {
            let p = client
                .forward(&ForwardRequest {
                    finger: finger.into(),
                    mechanism: mechanism.into(),
                    theta1_deg: theta1,
                    theta2_deg: theta2,
                })
                .await?;
            println!("x = {:.4} mm, y = {:.4} mm", p.x_mm, p.y_mm);
        }
        Command::Ik {
            finger,
            mechanism,
            x,
            y,
        } => {
            let q = client
                .inverse(&InverseRequest {
                    finger: finger.into(),
                    mechanism: mechanism.into(),
                    x_mm: x,
                    y_mm: y,
                })
                .await?;
            println!("theta1 = {:.4} deg, theta2 = {:.4} deg", q.theta1_deg, q.theta2_deg);
        }
        Command::Workspace {
            finger,
            resolution,
            out,
        } => {
            let finger: Finger = finger.into();
            let ws = client
                .workspace(&WorkspaceRequest {
                    finger,
                    resolution_mm: resolution,
                })
                .await?;
            write(&out, ws.csv)?;
            let s = ws.summary;
            println!(
                "{finger}: {}x{} cells at {} mm, lower {:.1} mm², upper {:.1} mm², intersection {:.1} mm², \
                 target cells outside intersection {}/{}",
                s.nx,
                s.ny,
                s.resolution_mm,
                s.lower_area_mm2,
                s.upper_area_mm2,
                s.intersection_area_mm2,
                s.target_cells_outside_intersection,
                s.target_cells
            );
        }
        Command::Patterns {
            kind,
            finger,
            rate,
            amplitude,
            duration,
            out,
            device_log,
        } => {
            let resp = client
                .patterns(&PatternRequest {
                    kind,
                    finger: finger.into(),
                    rate_hz: rate,
                    amplitude_mm: amplitude,
                    duration_s: duration,
                    device_log: device_log.is_some(),
                })
                .await?;
            let mut csv = String::from("t_s,up_x_mm,up_y_mm,lo_x_mm,lo_y_mm\n");
            for s in &resp.samples {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.t, s.upper.x, s.upper.y, s.lower.x, s.lower.y
                ));
            }
            write(&out, csv)?;
            if let (Some(path), Some(log)) = (device_log, resp.device_log) {
                write(&path, log)?;
            }
            match (resp.classified, resp.classify_error) {
                (Some(k), _) => println!("{} samples of {kind}, classified as {k}", resp.samples.len()),
                (None, e) => println!(
                    "{} samples of {kind}, not classified: {}",
                    resp.samples.len(),
                    e.unwrap_or_default()
                ),
            }
        }
        Command::RunTrials {
            conditions,
            operator,
            seed,
            out,
            summary,
            tick_log,
        } => {
            let resp = client
                .trials(&TrialsRequest {
                    conditions: parse_conditions(&conditions)?,
                    seed,
                    operator: match operator {
                        OperatorArg::Scripted => OperatorKind::Scripted,
                        OperatorArg::Ideal => OperatorKind::Ideal,
                    },
                    tick_log: tick_log.is_some(),
                })
                .await?;
            write(&out, resp.csv)?;
            let summary_path = summary.unwrap_or_else(|| sibling(&out, "summary.json"));
            write(&summary_path, serde_json::to_string_pretty(&resp.summary)?)?;
            if let (Some(path), Some(log)) = (tick_log, resp.tick_log) {
                write(&path, log)?;
            }
            println!("condition   trials  success%  |error| deg (sd)  time s");
            for g in &resp.summary.groups {
                println!(
                    "{:<10} {:>7} {:>9.1} {:>10.2} ({:.2}) {:>7.2}",
                    g.key.condition.label(),
                    g.trials,
                    g.success_ratio_pct,
                    g.mean_abs_error_deg,
                    g.std_abs_error_deg,
                    g.mean_time_s
                );
            }
        }
        Command::Replay { log, out } => {
            let text = fs::read(&log).with_context(|| format!("reading {}", log.display()))?;
            let log = CommandLog::read_jsonl(text.as_slice())?;
            let resp = client.replay(log).await?;
            write(&out, resp.csv)?;
            println!("replayed {} trials", resp.results.len());
        }
    }
    Ok(())
}

fn parse_conditions(text: &str) -> Result<Vec<Condition>> {
    if text.trim().eq_ignore_ascii_case("all") {
        return Ok(Condition::ALL.to_vec());
    }
    let list = text
        .split(',')
        .map(|c| c.trim().parse::<Condition>().map_err(anyhow::Error::msg))
        .collect::<Result<Vec<_>>>()?;
    if list.is_empty() {
        bail!("no conditions given");
    }
    Ok(list)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |dir| dir.join(name))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
