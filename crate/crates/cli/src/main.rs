use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lifeline_core::pra::{eval_event_tree, eval_fault_tree, iim_and_equivalence, iim_eta_equivalence, iim_or_equivalence, FaultNode};
use lifeline_core::scenario::{bundled_names, export_plot_data, export_report, load_bundled, ReportFormat};
use lifeline_core::{importance_series, load_scenario, solve_system, validate_topology, AutonomyMode, Error, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest disagreement tolerated between the cascade and the trees.
const EQUIVALENCE_TOLERANCE: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "lifeline-iim", version, about = "Cascading-failure risk of interdependent lifeline networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario's topology and references.
    Validate(ScenarioArg),
    /// Run a scenario and write the probability report.
    Run(RunArgs),
    /// Change in a target's failure probability when a node cannot fail by itself.
    Importance(ImportanceArgs),
    /// Compare the cascade with fault-tree and event-tree evaluations.
    ComparePra(CompareArgs),
    /// List the bundled scenarios.
    ListScenarios,
    /// Write one CSV per plotted series into a directory.
    ExportPlotData(PlotArgs),
}

#[derive(Args)]
struct ScenarioArg {
    /// Bundled scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
}

#[derive(Args)]
struct TimelineArgs {
    /// Override the time step (hours).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    autonomy_mode: Option<Mode>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    timeline: TimelineArgs,
    /// Output file; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format; guessed from the output extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ImportanceArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    timeline: TimelineArgs,
    /// Node made immune; defaults to the scenario's importance pairs.
    #[arg(long, requires = "target")]
    node: Option<String>,
    #[arg(long, requires = "node")]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Also compare on random failure probabilities drawn from this seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    timeline: TimelineArgs,
    /// Directory receiving the CSV files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Expected,
    Dominant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failure carrying the exit code it should produce.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Validate(args) => validate(&args),
        Command::Run(args) => run(&args),
        Command::Importance(args) => importance(&args),
        Command::ComparePra(args) => compare_pra(&args),
        Command::ListScenarios => list_scenarios(),
        Command::ExportPlotData(args) => plot_data(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(arg: &ScenarioArg) -> Result<Scenario, Failure> {
    let doc = load_scenario(&arg.scenario)?;
    doc.resolve().map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn load_with(arg: &ScenarioArg, timeline: &TimelineArgs) -> Result<(Scenario, Option<AutonomyMode>), Failure> {
    let mut sc = load(arg)?;
    if let Some(dt) = timeline.dt {
        sc.timeline.dt = dt;
    }
    let mode = timeline.autonomy_mode.map(|m| match m {
        Mode::Expected => AutonomyMode::Expected,
        Mode::Dominant => AutonomyMode::Dominant,
    });
    Ok((sc, mode))
}

fn write_or_print(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| io_failure(path, e)),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn validate(arg: &ScenarioArg) -> Result<(), Failure> {
    let sc = load(arg)?;
    let report = validate_topology(&sc.model);
    let mut problems: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
    if let Err(e) = sc.curves.check_references(&sc.model.nodes) {
        problems.push(e.to_string());
    }
    if problems.is_empty() {
        println!(
            "{}: valid ({} networks, {} nodes)",
            sc.name(),
            sc.model.networks.len(),
            sc.model.nodes.len()
        );
        return Ok(());
    }
    for p in &problems {
        println!("{p}");
    }
    Err(Failure {
        code: 1,
        message: format!("{}: {} violation(s)", sc.name(), problems.len()),
    })
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let (sc, mode) = load_with(&args.scenario, &args.timeline)?;
    let report = sc.run(&sc.run_options(mode))?;
    let format = match args.format {
        Some(Format::Json) => ReportFormat::Json,
        Some(Format::Csv) => ReportFormat::Csv,
        None if args.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json")) => ReportFormat::Json,
        None => ReportFormat::Csv,
    };
    write_or_print(args.out.as_deref(), &export_report(&report, format))?;
    if let Some(path) = &args.out {
        eprintln!("wrote {} ({} steps)", path.display(), report.steps.len());
    }
    Ok(())
}

fn importance(args: &ImportanceArgs) -> Result<(), Failure> {
    let (sc, mode) = load_with(&args.scenario, &args.timeline)?;
    let pairs: Vec<(String, String)> = match (&args.node, &args.target) {
        (Some(n), Some(t)) => vec![(n.clone(), t.clone())],
        _ => sc
            .document
            .analysis
            .importance_pairs
            .iter()
            .map(|p| (p.node.clone(), p.target.clone()))
            .collect(),
    };
    if pairs.is_empty() {
        return Err(Failure {
            code: 2,
            message: format!("{} defines no importance pairs; pass --node and --target", sc.name()),
        });
    }
    let options = sc.run_options(mode);
    let mut csv = String::from("time_h,node,target,delta_p_f\n");
    for (node, target) in &pairs {
        for (t, d) in importance_series(&sc.model, &sc.curves, &sc.timeline, &options, node, target)? {
            csv.push_str(&format!("{t:?},{node},{target},{d:?}\n"));
        }
    }
    write_or_print(args.out.as_deref(), csv.as_bytes())
}

fn basic_events(tree: &FaultNode) -> Option<Vec<(String, f64)>> {
    match tree {
        FaultNode::And { children, .. } | FaultNode::Or { children, .. } => children
            .iter()
            .map(|c| match c {
                FaultNode::Basic { id, probability } => Some((id.clone(), *probability)),
                _ => None,
            })
            .collect(),
        FaultNode::Basic { .. } => None,
    }
}

fn compare_pra(args: &CompareArgs) -> Result<(), Failure> {
    let sc = load(&args.scenario)?;
    let report = sc.run(&sc.run_options(None))?;
    let mut max_diff: f64 = 0.0;
    let mut compared = 0usize;

    for net in &sc.model.networks {
        let mut net_max: f64 = 0.0;
        let mut outcome = Ok(());
        for step in &report.steps {
            let record = step.network(&net.id).expect("report covers every network");
            let p_sf: Vec<f64> = net.nodes.iter().map(|id| record.node(id).map_or(0.0, |n| n.p_sf)).collect();
            match iim_eta_equivalence(&sc.model, &net.id, &p_sf) {
                Ok(c) => net_max = net_max.max(c.max_diff),
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        match outcome {
            Ok(()) => {
                println!("event tree vs layer occupancy, network {}: max diff {net_max:.3e}", net.id);
                max_diff = max_diff.max(net_max);
                compared += 1;
            }
            Err(Error::StructuralMismatch { reason, .. }) => {
                println!("event tree vs layer occupancy, network {}: skipped ({reason})", net.id);
            }
            Err(e) => return Err(e.into()),
        }
    }

    if let Some(pra) = &sc.document.pra {
        for tree in &pra.fault_trees {
            let top = eval_fault_tree(&tree.root)?;
            println!("fault tree '{}': top event {top:.6e}", tree.name);
            let Some(events) = basic_events(&tree.root) else { continue };
            let probabilities: Vec<f64> = events.iter().map(|(_, p)| *p).collect();
            let gate = match &tree.root {
                FaultNode::Or { .. } => iim_or_equivalence(&probabilities)?,
                _ => iim_and_equivalence(&probabilities)?,
            };
            println!("  gate vs cascade chain: max diff {:.3e}", gate.diff);
            max_diff = max_diff.max(gate.diff);
            compared += 1;

            // When the basic events are nodes of the scenario, the tree
            // must also agree with the scenario's own networks.
            if matches!(tree.root, FaultNode::Or { .. }) && events.iter().all(|(id, _)| sc.model.node(id).is_some()) {
                let mut p_sf = vec![0.0; sc.model.nodes.len()];
                for (id, p) in &events {
                    p_sf[sc.model.node_index(id).expect("checked above")] = *p;
                }
                let state = solve_system(&sc.model, &p_sf)?;
                let mut diff: f64 = 0.0;
                for net in &sc.model.networks {
                    for t in &net.targets {
                        diff = diff.max((state.p_f[sc.model.node_index(t).expect("targets are nodes")] - top).abs());
                    }
                }
                println!("  tree vs scenario targets: max diff {diff:.3e}");
                max_diff = max_diff.max(diff);
            }
        }
        for tree in &pra.event_trees {
            println!("event tree '{}':", tree.name);
            for seq in eval_event_tree(tree)? {
                println!("  {:<40} p = {:.6e}  f = {:.6e}/yr", seq.label(), seq.probability, seq.frequency);
            }
        }
    }

    if let Some(seed) = args.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut random_max: f64 = 0.0;
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let events: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            random_max = random_max.max(iim_or_equivalence(&events)?.diff);
            random_max = random_max.max(iim_and_equivalence(&events)?.diff);
            for net in &sc.model.networks {
                let p_sf: Vec<f64> = net.nodes.iter().map(|_| rng.random::<f64>()).collect();
                match iim_eta_equivalence(&sc.model, &net.id, &p_sf) {
                    Ok(c) => random_max = random_max.max(c.max_diff),
                    Err(Error::StructuralMismatch { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        println!("random draws (seed {seed}): max diff {random_max:.3e}");
        max_diff = max_diff.max(random_max);
        compared += 1;
    }

    if compared == 0 {
        return Err(Failure {
            code: 1,
            message: format!("{} has nothing the trees can be compared with", sc.name()),
        });
    }
    println!("max diff {max_diff:.3e}");
    if max_diff > EQUIVALENCE_TOLERANCE {
        return Err(Failure {
            code: 1,
            message: format!("max diff {max_diff:.3e} exceeds {EQUIVALENCE_TOLERANCE:e}"),
        });
    }
    Ok(())
}

fn list_scenarios() -> Result<(), Failure> {
    for name in bundled_names() {
        let doc = load_bundled(name)?;
        println!("{name:<22} {}", doc.description);
    }
    Ok(())
}

fn plot_data(args: &PlotArgs) -> Result<(), Failure> {
    let (sc, mode) = load_with(&args.scenario, &args.timeline)?;
    let report = sc.run(&sc.run_options(mode))?;
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    for (name, body) in export_plot_data(&report) {
        let path = args.out.join(&name);
        fs::write(&path, body).map_err(|e| io_failure(&path, e))?;
        println!("{}", path.display());
    }
    Ok(())
}
