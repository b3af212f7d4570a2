use std::net::SocketAddr;
use std::path::PathBuf;

use aclrag::fixtures::{lisa_replica, ml_breathing, polis, to_ndjson};
use aclrag::repository::{Capability, FixtureGrant};
use aclrag::UserId;
use aclrag_service::{serve, Models, Service, ServiceConfig};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aclrag", about = "Permission-aware search and chat over a research data repository")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Lisa,
    Polis,
    Breathing,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// TOML configuration file; environment variables override it.
        #[arg(long, env = "ACLRAG_CONFIG")]
        config: Option<PathBuf>,
        /// Listen address, overriding the configuration.
        #[arg(long)]
        bind: Option<String>,
        /// NDJSON fixture to import at startup, overriding the configuration.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[arg(long, env = "ACLRAG_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Write one of the built-in demonstration datasets as NDJSON.
    Fixture {
        #[arg(value_enum)]
        dataset: Dataset,
        /// USER or USER:write; grants on every record. Repeatable.
        #[arg(long = "grant")]
        grants: Vec<String>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grant(spec: &str) -> Result<FixtureGrant> {
    let (user, cap) = spec.split_once(':').unwrap_or((spec, "read"));
    let capability = match cap {
        "read" => Capability::Read,
        "write" => Capability::Write,
        other => bail!("unknown capability {other:?} in {spec:?}"),
    };
    if user.is_empty() {
        bail!("empty user in {spec:?}");
    }
    Ok(FixtureGrant { user: UserId::new(user), capability })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();

    match Cli::parse().command {
        Command::Serve { config, bind, fixture } => {
            let mut cfg = ServiceConfig::load(config.as_deref())?;
            if let Some(b) = bind {
                cfg.bind = b;
            }
            if let Some(f) = fixture {
                cfg.fixture = Some(f);
            }
            let addr: SocketAddr = cfg.bind.parse().with_context(|| format!("bad bind address {:?}", cfg.bind))?;
            let service = Service::new(cfg.clone(), Models::from_config(&cfg))?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                tracing::info!(%addr, users = cfg.users.len(), "listening");
                serve(service, listener, shutdown_signal()).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
        Command::Config { config } => {
            let cfg = ServiceConfig::load(config.as_deref())?;
            print!("{}", toml::to_string(&cfg)?);
        }
        Command::Fixture { dataset, grants, out } => {
            let mut lines = match dataset {
                Dataset::Lisa => lisa_replica(),
                Dataset::Polis => polis(),
                Dataset::Breathing => ml_breathing(),
            };
            let grants = grants.iter().map(|g| parse_grant(g)).collect::<Result<Vec<_>>>()?;
            for l in &mut lines {
                l.grants.extend(grants.iter().cloned());
            }
            let text = to_ndjson(&lines);
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
