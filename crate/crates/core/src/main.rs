use std::io::{self, BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hera::commands::{self, CliError, Report};
use hera::dataset::Preset;
use hera::workspace::{WorkspaceConfig, WORKSPACE_ENV};

#[derive(Parser)]
#[command(name = "hera", version, about = "Packet captures to labelled flow datasets")]
struct Cli {
    /// Workspace file (key = value). Defaults to $HERA_WORKSPACE.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Inputs processed in parallel.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ExportFlags {
    /// Capture files, directories or glob patterns.
    #[arg(long, num_args = 1..)]
    pcap: Vec<String>,
    /// Status interval in seconds.
    #[arg(long, allow_negative_numbers = true)]
    interval: Option<f64>,
    /// Idle timeout in seconds (default: the interval).
    #[arg(long, allow_negative_numbers = true)]
    idle_timeout: Option<f64>,
    /// How late a packet may be and still be accepted, in seconds.
    #[arg(long, allow_negative_numbers = true)]
    reorder_slack: Option<f64>,
    /// Do not emit management records.
    #[arg(long)]
    no_management: bool,
}

#[derive(Args, Default)]
struct DatasetFlags {
    /// default, all, unsw-nb15, bot-iot, cic-ids2017, or name,name,...
    #[arg(long)]
    features: Option<String>,
    /// ra or racluster.
    #[arg(long)]
    mode: Option<String>,
    /// Keep management records as rows.
    #[arg(long)]
    keep_management: bool,
    /// Flows in the Ssaddr/Sdaddr window.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args, Default)]
struct LabelFlags {
    /// Ground-truth CSV.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Also match ground truth with source and destination swapped.
    #[arg(long)]
    bidirectional: bool,
    #[arg(long)]
    benign_label: Option<String>,
    /// Match every row against every entry, without the time-range filter.
    #[arg(long)]
    no_prefilter: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate captures into .hera flow files.
    Export {
        #[command(flatten)]
        export: ExportFlags,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build CSV datasets from .hera files.
    Dataset {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        dataset: DatasetFlags,
    },
    /// Label dataset CSVs against ground truth.
    Label {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<String>,
        /// Output directory (default: next to each input).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        label: LabelFlags,
    },
    /// Export, build datasets and label in one step.
    Run {
        #[command(flatten)]
        export: ExportFlags,
        #[command(flatten)]
        dataset: DatasetFlags,
        #[command(flatten)]
        label: LabelFlags,
        /// Directory for datasets, stats and summaries.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for .hera files (default: --out).
        #[arg(long)]
        hera_dir: Option<PathBuf>,
    },
    /// Print the feature catalog, or one preset's mapping.
    Features {
        #[arg(long)]
        preset: Option<String>,
    },
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl ExportFlags {
    fn apply(self, ws: &mut WorkspaceConfig) {
        ws.pcap_paths = self.pcap;
        ws.interval = self.interval;
        ws.idle_timeout = self.idle_timeout;
        ws.reorder_slack = self.reorder_slack;
        ws.emit_management = self.no_management.then_some(false);
    }
}

impl DatasetFlags {
    fn apply(self, ws: &mut WorkspaceConfig) {
        ws.features = self.features;
        ws.mode = self.mode;
        ws.keep_management = flag(self.keep_management);
        ws.window = self.window;
    }
}

impl LabelFlags {
    fn apply(self, ws: &mut WorkspaceConfig) {
        ws.ground_truth = self.gt;
        ws.bidirectional = flag(self.bidirectional);
        ws.benign_label = self.benign_label;
        ws.prefilter = self.no_prefilter.then_some(false);
    }
}

/// Asks for a missing value when a person is at the terminal.
fn prompt(question: &str) -> Option<String> {
    if !io::stdin().is_terminal() {
        return None;
    }
    eprint!("{question}: ");
    io::stderr().flush().ok()?;
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line).ok()?;
    Some(line.trim().to_string()).filter(|s| !s.is_empty())
}

fn fill_capture_prompts(ws: &mut WorkspaceConfig, dir_question: &str, hera: bool) {
    if ws.pcap_paths.is_empty() {
        if let Some(p) = prompt("Capture files or directory") {
            ws.pcap_paths = p.split_whitespace().map(str::to_string).collect();
        }
    }
    let dir = if hera { &mut ws.hera_dir } else { &mut ws.csv_dir };
    if dir.is_none() {
        *dir = prompt(dir_question).map(PathBuf::from);
    }
}

fn run(cli: Cli) -> Result<Option<Report>, CliError> {
    let file = match cli.config.or_else(|| std::env::var_os(WORKSPACE_ENV).map(PathBuf::from)) {
        Some(p) => WorkspaceConfig::load(&p)?,
        None => WorkspaceConfig::default(),
    };
    let mut ws = WorkspaceConfig { jobs: cli.jobs, force: flag(cli.force), ..Default::default() };
    let report = match cli.command {
        Command::Export { export, out } => {
            export.apply(&mut ws);
            ws.hera_dir = out;
            let mut ws = ws.or(file);
            ws.export_config()?;
            fill_capture_prompts(&mut ws, "Output directory for .hera files", true);
            commands::cmd_export(&ws)?
        }
        Command::Dataset { inputs, out, dataset } => {
            dataset.apply(&mut ws);
            ws.csv_dir = out;
            let mut ws = ws.or(file);
            if ws.csv_dir.is_none() {
                ws.csv_dir = prompt("Output directory for datasets").map(PathBuf::from);
            }
            commands::cmd_dataset(&ws, &inputs)?
        }
        Command::Label { inputs, out, label } => {
            label.apply(&mut ws);
            ws.csv_dir = out;
            commands::cmd_label(&ws.or(file), &inputs)?
        }
        Command::Run { export, dataset, label, out, hera_dir } => {
            export.apply(&mut ws);
            dataset.apply(&mut ws);
            label.apply(&mut ws);
            ws.csv_dir = out;
            ws.hera_dir = hera_dir;
            let mut ws = ws.or(file);
            ws.export_config()?;
            fill_capture_prompts(&mut ws, "Output directory", false);
            commands::cmd_run(&ws)?
        }
        Command::Features { preset } => {
            let text = match preset {
                None => commands::feature_catalog_csv(),
                Some(name) => {
                    let p = Preset::parse(&name).ok_or_else(|| CliError::Usage(format!("unknown preset {name:?}")))?;
                    commands::preset_mapping_csv(p)
                }
            };
            print!("{text}");
            return Ok(None);
        }
    };
    Ok(Some(report))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(report) => {
            for r in report.into_iter() {
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
                for p in &r.written {
                    println!("{}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hera: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
