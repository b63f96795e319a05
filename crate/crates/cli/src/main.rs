use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cloudpg_core::pipeline::GraphStats;
use cloudpg_core::query::DEFAULT_STAR_MAX;
use cloudpg_core::{evaluate, explain, export_graph, import_graph, parse_query, EvalOptions, Ontology, PropertyGraph};

/// Exit status of `query --fail-if-found` when the query matched.
const FOUND_EXIT: u8 = 3;

#[derive(Parser)]
#[command(name = "cloudpg", version, about = "Build and query cloud property graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph from a manifest and write its export.
    Build {
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Do not print the build report.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Run a query against an exported graph.
    Query {
        graph: PathBuf,
        /// Query text, or `@path` to read it from a file.
        query: String,
        #[arg(long, value_enum, default_value_t = Format::Paths)]
        format: Format,
        /// Upper bound for `*` relationships without an explicit maximum.
        #[arg(long, default_value_t = DEFAULT_STAR_MAX)]
        star_max: u32,
        /// Exit with status 3 when the query has results.
        #[arg(long)]
        fail_if_found: bool,
        /// Print the evaluation plan before the results.
        #[arg(long)]
        explain: bool,
        /// Ontology the graph was built with; defaults to the bundled one.
        #[arg(long)]
        ontology: Option<PathBuf>,
    },
    /// Print node counts per class and edge counts per type.
    Stats {
        graph: PathBuf,
        #[arg(long)]
        ontology: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Paths,
    Count,
}

fn load_graph(path: &Path, ontology: Option<&Path>) -> Result<PropertyGraph> {
    let ontology = match ontology {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ontology::load(&text, &[] as &[&str]).with_context(|| format!("loading ontology {}", p.display()))?
        }
        None => Ontology::bundled(),
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    import_graph(&text, Arc::new(ontology)).with_context(|| format!("importing {}", path.display()))
}

fn query_text(arg: &str) -> Result<String> {
    match arg.strip_prefix('@') {
        Some(file) => fs::read_to_string(file).with_context(|| format!("reading query file {file}")),
        None => Ok(arg.to_string()),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Build { manifest, out, quiet } => {
            let outcome = cloudpg_core::build(&manifest).with_context(|| format!("building {}", manifest.display()))?;
            fs::write(&out, export_graph(&outcome.graph)).with_context(|| format!("writing {}", out.display()))?;
            if !quiet {
                print!("{}", outcome.report);
            }
            for w in &outcome.report.warnings {
                log::warn!("{w}");
            }
        }
        Command::Query {
            graph,
            query,
            format,
            star_max,
            fail_if_found,
            explain: show_plan,
            ontology,
        } => {
            let graph = load_graph(&graph, ontology.as_deref())?;
            let text = query_text(&query)?;
            let ast = parse_query(&text).context("parsing query")?;
            let options = EvalOptions { star_max };
            if show_plan {
                print!("{}", explain(&graph, &ast, &options));
            }
            let results = evaluate(&graph, &ast, &options);
            if let Format::Paths = format {
                for result in &results {
                    match (&result.path, result.bindings.get(&ast.return_item)) {
                        (Some(path), _) => println!("{}", graph.render_path(path)),
                        (None, Some(id)) => {
                            let node = graph.node(*id).expect("bound node exists");
                            println!("{}({})", node.name, node.class);
                        }
                        (None, None) => bail!("RETURN `{}` is not bound by the pattern", ast.return_item),
                    }
                }
            }
            match results.len() {
                1 => println!("1 result"),
                n => println!("{n} results"),
            }
            if fail_if_found && !results.is_empty() {
                return Ok(ExitCode::from(FOUND_EXIT));
            }
        }
        Command::Stats { graph, ontology } => {
            let graph = load_graph(&graph, ontology.as_deref())?;
            print!("{}", GraphStats::of(&graph));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
