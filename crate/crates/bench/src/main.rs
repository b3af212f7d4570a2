use std::path::PathBuf;

use aclrag::index::HnswParams;
use aclrag_bench::{
    default_checkpoints, run_latency_sweep, run_memory_experiment, write_latency_csv, write_memory_csv, BenchConfig,
    FitKind, MemoryConfig, RecordMode, FULL_N_MAX, REFERENCE_INDEX_KB_PER_VECTOR, REFERENCE_TOTAL_KB_PER_VECTOR,
};
use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bench", about = "Scaling experiments for access-filtered k-NN search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    FixedTwo,
    VectorsPerRecord,
}

#[derive(Subcommand)]
enum Command {
    /// Time filtered k-NN searches at growing corpus sizes.
    ///
    /// CSV columns: n, fraction, record_mode, records, accessible_records,
    /// accessible_vectors, trials, mean_ms, std_ms, oracle_checks,
    /// oracle_recall. Latency covers fetching the reader's readable record
    /// ids plus the filtered search; oracle_recall is the mean recall of the
    /// trials re-checked against brute force (empty if none were).
    Latency {
        /// Largest corpus size.
        #[arg(long, default_value_t = aclrag_bench::DEFAULT_N_MAX)]
        n_max: usize,
        /// Use the full one-million-vector corpus (overrides --n-max).
        #[arg(long)]
        full: bool,
        /// Comma-separated checkpoints; defaults to 1k, 5k, 10k, 50k, ... up to n-max.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1.0")]
        fractions: Vec<f64>,
        #[arg(long, value_enum, default_value = "fixed-two")]
        record_mode: ModeArg,
        /// Comma-separated; one sweep per value with --record-mode vectors-per-record.
        #[arg(long, value_delimiter = ',', default_value = "10")]
        vectors_per_record: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1024)]
        dim: usize,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long)]
        ef_search: Option<usize>,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Record graph and table bytes at several corpus sizes.
    ///
    /// CSV columns: n, graph_bytes, rows_bytes, total_bytes,
    /// graph_kb_per_vector, total_kb_per_vector (kB = 1000 bytes).
    Memory {
        #[arg(long, value_delimiter = ',', default_value = "10000,50000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1024)]
        dim: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "mem.csv")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Latency {
            n_max,
            full,
            checkpoints,
            fractions,
            record_mode,
            vectors_per_record,
            trials,
            seed,
            dim,
            k,
            ef_search,
            out,
        } => {
            let n_max = if full { FULL_N_MAX } else { n_max };
            let modes: Vec<RecordMode> = match record_mode {
                ModeArg::FixedTwo => vec![RecordMode::FixedTwo],
                ModeArg::VectorsPerRecord => {
                    if vectors_per_record.is_empty() {
                        bail!("--vectors-per-record needs at least one value");
                    }
                    vectors_per_record.into_iter().map(RecordMode::VectorsPerRecord).collect()
                }
            };
            let mut params = HnswParams::default();
            if let Some(ef) = ef_search {
                params.ef_search = ef;
            }
            let cfg = BenchConfig {
                n_max,
                checkpoints: checkpoints.unwrap_or_else(|| default_checkpoints(n_max)),
                dim,
                k,
                access_fractions: fractions,
                record_mode: modes[0],
                trials,
                seed,
                params,
                ..BenchConfig::default()
            };
            let result = run_latency_sweep(&cfg, &modes)?;
            write_latency_csv(&result.latency, &out)?;
            for c in &result.latency_fits {
                let f = c.fit;
                let shape = match f.kind {
                    FitKind::Logarithmic => format!("{:.4} ln(N) + {:.4}", f.a, f.b),
                    _ => format!("{:.3e} N + {:.4}", f.a, f.b),
                };
                println!("{} fraction {}: latency_ms = {shape} (R² {:.4})", c.record_mode, c.fraction, f.r2);
            }
            println!("wrote {}", out.display());
        }
        Command::Memory { sizes, dim, seed, out } => {
            let cfg = MemoryConfig { sizes, dim, seed, ..MemoryConfig::default() };
            let result = run_memory_experiment(&cfg)?;
            write_memory_csv(&result.memory, &out)?;
            if let Some(fits) = result.memory_fits {
                let (g, t) = fits.kb_per_vector();
                println!(
                    "graph: {g:.3} kB/vector + {:.0} B (R² {:.5}); reference {REFERENCE_INDEX_KB_PER_VECTOR} kB/vector",
                    fits.graph.b, fits.graph.r2
                );
                println!(
                    "total: {t:.3} kB/vector + {:.0} B (R² {:.5}); reference {REFERENCE_TOTAL_KB_PER_VECTOR} kB/vector",
                    fits.total.b, fits.total.r2
                );
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
