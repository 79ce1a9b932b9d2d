use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use branchgraph::graph::{self, jaccard_agreement, BranchGraph, ValidationIssue};
use branchgraph::pipeline::{compile_manifest, CompileConfig, CompileError};
use branchgraph::simulate::{load_script, simulate, Policy};

const EXIT_INPUT: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_PROVIDER_WARNING: u8 = 3;

#[derive(Parser)]
#[command(
    name = "branchgraph",
    version,
    about = "Compile 360° videos into branching narrative graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a project manifest into a graph.
    Compile {
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to graph.json next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a JSON compile report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a graph document against every structural invariant.
    Validate { graph: PathBuf },
    /// Print a readable summary of a graph.
    Inspect {
        graph: PathBuf,
        /// 0-based scene index.
        #[arg(long)]
        scene: Option<usize>,
    },
    /// Play a graph headlessly and print the trace.
    Simulate {
        graph: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyArg,
        /// Script or recorded trace, required for `--policy script`.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Jaccard agreement between two sets of branching-point times.
    EvalTiming {
        /// Graph file or a list with one time in seconds per line.
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = graph::DEFAULT_TOLERANCE_S)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    DefaultOnly,
    SocialArgmax,
    Script,
}

struct Failure {
    code: u8,
    body: serde_json::Value,
}

impl Failure {
    fn input(message: impl std::fmt::Display, input: Option<&str>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            body: json!({"kind": "input", "input": input, "message": message.to_string()}),
        }
    }

    fn invalid(issues: &[ValidationIssue]) -> Failure {
        Failure {
            code: EXIT_INVALID,
            body: json!({
                "kind": "validation",
                "message": format!("{} invariant violation(s)", issues.len()),
                "issues": issues.iter().map(|i| json!({"path": i.path, "message": i.message})).collect::<Vec<_>>(),
            }),
        }
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::input(format!("{}: {e}", p.display()), Some("output"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_text(path: &Path, input: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display()), Some(input)))
}

fn load_graph(path: &Path) -> Result<BranchGraph, Failure> {
    let text = read_text(path, "graph")?;
    graph::validate_document(&text).map_err(|issues| Failure::invalid(&issues))
}

fn run_compile(
    manifest: &Path,
    config: Option<&Path>,
    out: Option<&Path>,
    report: Option<&Path>,
    jobs: Option<usize>,
) -> Result<u8, Failure> {
    let mut cfg = match config {
        Some(p) => CompileConfig::load(p).map_err(|e| Failure::input(e, Some("config")))?,
        None => CompileConfig::default(),
    };
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    let output = compile_manifest(manifest, &cfg).map_err(|e| match &e {
        CompileError::Ingest(ie) => Failure::input(&e, Some(ie.input())),
        CompileError::Config(_) => Failure::input(&e, Some("config")),
        CompileError::Provider(_) => Failure::input(&e, Some("provider")),
        _ => Failure::input(&e, None),
    })?;
    let text = graph::emit(&output.graph).map_err(|e| Failure::invalid(e.issues()))?;
    let out_path = out.map(Path::to_path_buf).unwrap_or_else(|| {
        manifest
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("graph.json")
    });
    write_or_print(Some(&out_path), &text)?;
    if let Some(r) = report {
        let mut body = serde_json::to_string_pretty(&output.report).expect("report serializes");
        body.push('\n');
        write_or_print(Some(r), &body)?;
    }

    let g = &output.graph;
    println!(
        "compiled {} scene(s), {} branch point(s) -> {}",
        g.scenes.len(),
        g.branch_points.len(),
        out_path.display()
    );
    for w in &output.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if output.report.provider_warnings() {
        EXIT_PROVIDER_WARNING
    } else {
        0
    })
}

fn run_inspect(path: &Path, only: Option<usize>) -> Result<u8, Failure> {
    let g = load_graph(path)?;
    if let Some(i) = only {
        if i >= g.scenes.len() {
            return Err(Failure::input(
                format!("scene {i} out of range for {} scenes", g.scenes.len()),
                Some("scene"),
            ));
        }
    }
    println!(
        "{}: {:.1} s, {} frames, {} scene(s)",
        g.version,
        g.video.duration_s,
        g.video.frame_count,
        g.scenes.len()
    );
    let times: Vec<String> = g
        .branch_points
        .iter()
        .map(|p| format!("{:.2}", p.time))
        .collect();
    println!("branch points: [{}]", times.join(", "));
    for (si, scene) in g.scenes.iter().enumerate() {
        if only.is_some_and(|i| i != si) {
            continue;
        }
        println!(
            "scene {si} \"{}\" [{:.2}, {:.2}) frames {}..={} candidates {} D={:.3}{}",
            scene.title,
            scene.span.start_s,
            scene.span.end_s,
            scene.span.first_frame,
            scene.span.last_frame,
            scene.candidate_count,
            scene.diversity.overall,
            if scene.degenerate { " (fallback)" } else { "" }
        );
        for (bi, br) in scene.branches.iter().enumerate() {
            let f = br.focus();
            println!(
                "  {}branch {bi} \"{}\" social {:.3} focus yaw {:.1} pitch {:.1}",
                if bi == scene.default_branch { "*" } else { " " },
                br.title,
                br.social_score,
                f.yaw,
                f.pitch
            );
            let slot = &br.narration;
            if slot.unplaceable {
                println!("      narration: unplaceable");
            } else {
                println!(
                    "      narration [{:.2}, {:.2}] budget {}: {}",
                    slot.start_s,
                    slot.end_s,
                    slot.word_budget,
                    slot.text.as_deref().unwrap_or("-")
                );
            }
            if let Some(c) = g.cue(si, bi) {
                println!("      cue: {}", c.announcement());
            }
        }
    }
    Ok(0)
}

fn run_simulate(
    path: &Path,
    policy: PolicyArg,
    script: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let g = load_graph(path)?;
    let policy = match (policy, script) {
        (PolicyArg::DefaultOnly, _) => Policy::DefaultOnly,
        (PolicyArg::SocialArgmax, _) => Policy::SocialArgmax,
        (PolicyArg::Script, Some(p)) => {
            Policy::Script(load_script(p).map_err(|e| Failure::input(e, Some("script")))?)
        }
        (PolicyArg::Script, None) => {
            return Err(Failure::input(
                "--policy script needs --script",
                Some("script"),
            ))
        }
    };
    let trace = simulate(&g, &policy).map_err(|e| Failure::input(e, Some("graph")))?;
    write_or_print(out, &trace.to_json())?;
    Ok(0)
}

fn read_times(path: &Path, input: &str) -> Result<Vec<f64>, Failure> {
    let text = read_text(path, input)?;
    if text.trim_start().starts_with('{') {
        let g = graph::parse(&text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()), Some(input)))?;
        return Ok(g.branch_point_times());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => out.push(t),
            _ => {
                return Err(Failure::input(
                    format!(
                        "{}:{}: expected a time in seconds, got {line:?}",
                        path.display(),
                        i + 1
                    ),
                    Some(input),
                ))
            }
        }
    }
    Ok(out)
}

fn run_eval(a: &Path, b: &Path, tol: f64) -> Result<u8, Failure> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Failure::input(
            "tolerance must be non-negative",
            Some("tol"),
        ));
    }
    let ta = read_times(a, "a")?;
    let tb = read_times(b, "b")?;
    let r = jaccard_agreement(&ta, &tb, tol);
    println!("J = {:.3}", r.value);
    for (x, y) in &r.matches {
        println!("  {x:.2} <-> {y:.2}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compile {
            manifest,
            config,
            out,
            report,
            jobs,
        } => run_compile(
            manifest,
            config.as_deref(),
            out.as_deref(),
            report.as_deref(),
            *jobs,
        ),
        Command::Validate { graph } => load_graph(graph).map(|g| {
            println!(
                "ok: {} scene(s), {} branch point(s)",
                g.scenes.len(),
                g.branch_points.len()
            );
            0
        }),
        Command::Inspect { graph, scene } => run_inspect(graph, *scene),
        Command::Simulate {
            graph,
            policy,
            script,
            out,
        } => run_simulate(graph, *policy, script.as_deref(), out.as_deref()),
        Command::EvalTiming { a, b, tol } => run_eval(a, b, *tol),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", json!({ "error": f.body }));
            ExitCode::from(f.code)
        }
    }
}
