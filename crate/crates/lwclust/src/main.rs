//! Command-line front end: cluster matrices, cut dendrograms, benchmark
//! speedup versus worker count.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lwclust::bench::{bench_csv, run_bench, BenchConfig};
use lwclust::io::{self, InputFormat, OutputFormat};
use lwclust::transport::InProcTransport;
use lwclust::{
    run_distributed, serial_cluster, Dendrogram, EngineOptions, Error, Execution, LinkageScheme,
};

#[derive(Parser)]
#[command(
    name = "lwclust",
    about = "Hierarchical agglomerative clustering over distance matrices",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a distance matrix (or point set) into a dendrogram.
    Cluster(ClusterArgs),
    /// Cut a dendrogram into k flat clusters.
    Cut(CutArgs),
    /// Measure wall time and message traffic across worker counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ClusterArgs {
    /// Input file.
    #[arg(long)]
    input: PathBuf,
    /// Input layout: square-csv, condensed-csv or points-csv.
    #[arg(long, default_value = "square-csv")]
    input_format: String,
    /// Distance metric for points-csv input (euclidean only).
    #[arg(long, default_value = "euclidean")]
    metric: String,
    /// Linkage scheme: single, complete, average, weighted, centroid, ward.
    #[arg(long, default_value = "complete")]
    scheme: String,
    /// Worker count; 1 runs the serial path, more run the threaded engine.
    #[arg(long, default_value_t = 1)]
    procs: usize,
    /// Output rendering: csv, json or newick.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file; '-' for stdout.
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct CutArgs {
    /// Merge-list CSV produced by `cluster --format csv`.
    #[arg(long)]
    input: PathBuf,
    /// Number of flat clusters.
    #[arg(long)]
    k: usize,
    /// Output file; '-' for stdout.
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Optional input matrix; synthetic matrices are generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input layout for --input.
    #[arg(long, default_value = "square-csv")]
    input_format: String,
    /// Synthetic problem sizes.
    #[arg(long, value_delimiter = ',', default_value = "500")]
    bench_sizes: Vec<usize>,
    /// Linkage scheme.
    #[arg(long, default_value = "complete")]
    scheme: String,
    /// Worker counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    procs: Vec<usize>,
    /// Repeats per configuration; the median wall time is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Seed for synthetic matrix generation.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output file; '-' for stdout.
    #[arg(long, default_value = "-")]
    output: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(args) => cluster_command(args),
        Command::Cut(args) => cut_command(args),
        Command::Bench(args) => bench_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(if error.is_internal() { 2 } else { 1 })
        }
    }
}

fn parse_metric(metric: &str) -> Result<(), Error> {
    if metric == "euclidean" {
        Ok(())
    } else {
        Err(Error::Parse {
            line: 0,
            message: format!("unknown metric '{metric}'; only euclidean is supported"),
        })
    }
}

fn cluster_command(args: ClusterArgs) -> Result<(), Error> {
    let input_format: InputFormat = args.input_format.parse()?;
    parse_metric(&args.metric)?;
    let scheme: LinkageScheme = args.scheme.parse()?;
    let output_format: OutputFormat = args.format.parse()?;
    if args.procs == 0 {
        return Err(Error::NoWorkers);
    }
    let matrix = io::read_matrix(&args.input, input_format)?;
    let dendrogram = cluster_matrix(&matrix, scheme, args.procs)?;
    emit(&args.output, &io::render_dendrogram(&dendrogram, output_format))
}

fn cluster_matrix(
    matrix: &lwclust::CondensedMatrix,
    scheme: LinkageScheme,
    procs: usize,
) -> Result<Dendrogram, Error> {
    if procs == 1 {
        return Ok(serial_cluster(matrix, scheme));
    }
    let transport = InProcTransport::new(procs);
    let options = EngineOptions { execution: Execution::Threaded, trace: false };
    Ok(run_distributed(matrix, scheme, &transport, &options)?.dendrogram)
}

fn cut_command(args: CutArgs) -> Result<(), Error> {
    let dendrogram = io::read_merge_list(&args.input)?;
    let labels = io::labels_csv(&dendrogram, args.k)?;
    emit(&args.output, &labels)
}

fn bench_command(args: BenchArgs) -> Result<(), Error> {
    let scheme: LinkageScheme = args.scheme.parse()?;
    if args.procs.is_empty() || args.procs.contains(&0) {
        return Err(Error::NoWorkers);
    }
    let input = match &args.input {
        Some(path) => Some(io::read_matrix(path, args.input_format.parse()?)?),
        None => None,
    };
    let config = BenchConfig {
        sizes: args.bench_sizes,
        scheme,
        procs: args.procs,
        repeats: args.repeats,
        seed: args.seed,
    };
    let rows = run_bench(&config, input.as_ref())?;
    emit(&args.output, &bench_csv(&rows))
}

fn emit(output: &str, content: &str) -> Result<(), Error> {
    if output == "-" {
        std::io::stdout().write_all(content.as_bytes())?;
        Ok(())
    } else {
        std::fs::write(output, content)?;
        Ok(())
    }
}
