use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cocr_core::config::AppConfig;
use cocr_core::distill::distill_graphs;
use cocr_core::eval::{self, acc_by_k, fill_comparisons, read_curve_csv, EvalSummary};
use cocr_core::penman::{parse_penman_records, serialize_penman, split_sentences};
use cocr_core::pipeline::{
    read_dataset, read_results, run_records, score_results, screen, write_results, AmrParser,
    HttpAmrParser, Method, RunContext,
};
use cocr_core::reconstruct::{build_backend, build_reconstruction_prompt, reconstruct_documents};

const EXIT_PARTIAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "cocr", version, about = "Concept distillation and context reconstruction for RAG")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log at debug level.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Overrides the number of records and requests in flight.
    #[arg(long, global = true)]
    max_in_flight: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a PENMAN file and print a summary of each graph.
    ParseAmr {
        file: PathBuf,
        /// Print the re-serialized graphs instead of a summary.
        #[arg(long)]
        round_trip: bool,
    },
    /// Distill the concept list of one document.
    Distill {
        /// PENMAN file holding the document's graphs.
        amr: PathBuf,
        /// Source text of the document.
        #[arg(long)]
        source: PathBuf,
        /// Stoplist file (one label per line) replacing the configured one.
        #[arg(long)]
        stoplist: Option<PathBuf>,
        /// Print one concept per line instead of JSON.
        #[arg(long)]
        plain: bool,
    },
    /// Distill one document and reconstruct its context.
    Reconstruct {
        amr: PathBuf,
        #[arg(long)]
        source: PathBuf,
        /// Print the reconstruction prompt without calling a backend.
        #[arg(long)]
        prompt_only: bool,
    },
    /// Run the question-answering pipeline over a JSONL dataset.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// JSONL results file, written sorted by id.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        method: Option<Method>,
        /// Skip records already present in the output file.
        #[arg(long)]
        resume: bool,
        /// Reconstruct all documents' concepts in one call.
        #[arg(long)]
        pooled: bool,
        /// Keep only records whose documents contain a gold answer.
        #[arg(long)]
        screen: bool,
    },
    /// Score results files against the dataset's gold answers.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// One or more results files.
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        /// Model label for the summary rows.
        #[arg(long)]
        model: Option<String>,
        /// Write the summary CSV here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Recompute AUC, delta and sigma from accuracy CSVs and print a table.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "debug"
    } else {
        "warn"
    }))
    .init();

    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(n) = cli.max_in_flight {
        if n == 0 {
            bail!("--max-in-flight must be positive");
        }
        cfg.run.max_in_flight = n;
        cfg.reconstructor.max_in_flight = n;
        cfg.answerer.max_in_flight = n;
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn dispatch(cli: Cli) -> Result<u8> {
    let cfg = load_config(&cli)?;
    let mut out = io::stdout().lock();
    match cli.command {
        Command::ParseAmr { file, round_trip } => {
            let graphs = parse_penman_records(&read(&file)?)?;
            for (i, g) in graphs.iter().enumerate() {
                if round_trip {
                    if i > 0 {
                        writeln!(out)?;
                    }
                    writeln!(out, "{}", serialize_penman(g)?)?;
                } else {
                    writeln!(
                        out,
                        "graph {}: root={} nodes={} edges={} sentences={}",
                        i + 1,
                        g.root,
                        g.nodes.len(),
                        g.edge_count(),
                        split_sentences(g).len()
                    )?;
                }
            }
        }
        Command::Distill {
            amr,
            source,
            stoplist,
            plain,
        } => {
            let mut dc = cfg.resolved_distill()?;
            if let Some(p) = stoplist {
                dc = dc.with_stoplist_text(&read(&p)?);
            }
            let graphs = parse_penman_records(&read(&amr)?)?;
            let list = distill_graphs(&graphs, &read(&source)?, &dc)?;
            if plain {
                for c in &list.concepts {
                    writeln!(out, "{c}")?;
                }
            } else {
                writeln!(out, "{}", serde_json::to_string_pretty(&list)?)?;
            }
        }
        Command::Reconstruct {
            amr,
            source,
            prompt_only,
        } => {
            let graphs = parse_penman_records(&read(&amr)?)?;
            let list = distill_graphs(&graphs, &read(&source)?, &cfg.resolved_distill()?)?;
            if prompt_only {
                writeln!(out, "{}", build_reconstruction_prompt(&list)?)?;
            } else {
                let backend = build_backend(&cfg.reconstructor)?;
                let rc = reconstruct_documents(std::slice::from_ref(&list), backend.as_ref())?;
                writeln!(out, "{}", rc.joined)?;
            }
        }
        Command::Run {
            dataset,
            output,
            method,
            resume,
            pooled,
            screen: do_screen,
        } => {
            let method = method.unwrap_or(cfg.run.method);
            let mut records = read_dataset(&dataset)?;
            if do_screen || cfg.run.screen {
                let (report, kept) = screen(records, cfg.eval.case_mode);
                eprintln!(
                    "screening: {} records, {} with an answer in some document, {} in every document",
                    report.total, report.any_doc, report.every_doc
                );
                records = kept;
            }
            let mut existing = if resume { read_results(&output)? } else { Vec::new() };
            existing.retain(|r| r.method == method);
            let done: std::collections::HashSet<&str> =
                existing.iter().map(|r| r.id.as_str()).collect();
            let pending: Vec<_> = records
                .into_iter()
                .filter(|r| !done.contains(r.id.as_str()))
                .collect();
            log::info!("{} records pending, {} already done", pending.len(), done.len());

            let distill = cfg.resolved_distill()?;
            let reconstructor = build_backend(&cfg.reconstructor)?;
            let answerer = build_backend(&cfg.answerer)?;
            let amr_parser = match &cfg.run.amr_endpoint {
                Some(url) => Some(HttpAmrParser::new(
                    url.clone(),
                    Duration::from_secs_f64(cfg.run.amr_timeout_secs),
                )?),
                None => None,
            };
            let ctx = RunContext {
                distill: &distill,
                reconstructor: reconstructor.as_ref(),
                answerer: answerer.as_ref(),
                amr_parser: amr_parser.as_ref().map(|p| p as &dyn AmrParser),
                pooled: pooled || cfg.run.pooled,
            };
            let run = run_records(&pending, method, &ctx, cfg.run.max_in_flight);
            let mut all = existing;
            all.extend(run.results);
            write_results(&output, &all)?;
            for f in &run.failures {
                eprintln!("failed: {f}");
            }
            eprintln!(
                "{} results written to {}, {} failures",
                all.len(),
                output.display(),
                run.failures.len()
            );
            if !run.failures.is_empty() {
                return Ok(EXIT_PARTIAL);
            }
        }
        Command::Evaluate {
            dataset,
            results,
            model,
            output,
        } => {
            let records = read_dataset(&dataset)?;
            let model = model.unwrap_or_else(|| cfg.eval.model.clone());
            let mut by_method: BTreeMap<Method, Vec<_>> = BTreeMap::new();
            for path in &results {
                for r in read_results(path)? {
                    by_method.entry(r.method).or_default().push(r);
                }
            }
            let mut summaries = Vec::new();
            for method in Method::ALL {
                let Some(rs) = by_method.get(&method) else { continue };
                let scored = score_results(rs, &records, cfg.eval.case_mode)?;
                let curve = acc_by_k(&scored);
                summaries.push(
                    EvalSummary::new(&model, method.as_str(), curve, cfg.eval.interval)
                        .with_context(|| format!("method {method}"))?,
                );
            }
            finish_report(&mut summaries, output.as_deref(), &mut out)?;
        }
        Command::Report { inputs, output } => {
            let mut summaries = Vec::new();
            for path in &inputs {
                let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                for row in read_curve_csv(file).with_context(|| path.display().to_string())? {
                    summaries.push(
                        EvalSummary::new(row.model, row.method, row.curve, cfg.eval.interval)
                            .with_context(|| path.display().to_string())?,
                    );
                }
            }
            finish_report(&mut summaries, output.as_deref(), &mut out)?;
        }
    }
    Ok(0)
}

fn finish_report(summaries: &mut [EvalSummary], csv_out: Option<&Path>, out: &mut impl Write) -> Result<()> {
    fill_comparisons(summaries);
    if let Some(p) = csv_out {
        let file = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        eval::write_csv(summaries, file)?;
    }
    write!(out, "{}", eval::render_table(summaries))?;
    Ok(())
}
