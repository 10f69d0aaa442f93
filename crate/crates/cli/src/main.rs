//! `csi-graphlab`: ground-truth graph objects, discovery, classification,
//! transfer tests and the law suite from the command line.

mod output;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use csi_graphlab::classify::{classify_changes, Mode, UnionInput};
use csi_graphlab::corpus::{get_example, list_examples};
use csi_graphlab::discovery::{discover, DetectOptions, DiscoveryReport, ExactTester, GTestTester};
use csi_graphlab::exact::{draw_samples, Dataset};
use csi_graphlab::laws::{run_suite, RandomScmSpec};
use csi_graphlab::objects::{CheckReport, GraphObjectSet, GroundTruth, DEFAULT_STRONG_FAITHFULNESS_CAP};
use csi_graphlab::transfer::{transfer_evidence, TransferConfig};
use csi_graphlab::{load_scm, DirectedGraph, Error, Scm, UndirectedSkeleton};

use output::{read_input, slug, stdout, OutDir};

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_LAW: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn other(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_OTHER,
            message: message.into(),
        }
    }

    /// Wraps a library error, prefixed with the flag or file it came from.
    fn core(context: &str) -> impl FnOnce(Error) -> CliError + '_ {
        move |e| {
            let code = match e {
                Error::Io(_) | Error::Overflow(_) | Error::CapExceeded(_) => EXIT_OTHER,
                _ => EXIT_VALIDATION,
            };
            CliError {
                code,
                message: format!("{context}: {e}"),
            }
        }
    }
}

#[derive(Parser)]
#[command(name = "csi-graphlab", version, about = "Multi-context causal graph objects for categorical SCMs")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArgs {
    /// Write files into this directory instead of printing to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow replacing existing files in --out.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Exact graph objects, predicates and a per-edge membership table.
    GroundTruth {
        /// SCM document, or `-` for stdin.
        scm: String,
        /// Also write counterfactual and ident DOT files.
        #[arg(long)]
        all_graphs: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Pooled, masked, intersection and detect skeletons.
    Discover {
        /// Exact oracle from an SCM document.
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        exact: Option<String>,
        /// Categorical CSV with a header row.
        #[arg(long)]
        data: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Context column for --data.
        #[arg(long, default_value = "R")]
        context: String,
        /// Restrict to these regimes (repeatable).
        #[arg(long = "regime")]
        regimes: Vec<String>,
        /// Largest conditioning set for the detect graph.
        #[arg(long)]
        max_set_size: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Classify vanished edges of a discovery report.
    Classify {
        /// Report written by `discover`, or `-`.
        report: String,
        #[arg(long, default_value = "skeleton")]
        mode: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bootstrap evidence that a vanished link is a mechanism change.
    TransferTest {
        csv: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Conditioning columns, comma separated.
        #[arg(long, value_delimiter = ',')]
        z: Vec<String>,
        #[arg(long, default_value = "R")]
        context: String,
        #[arg(long)]
        r0: String,
        #[arg(long = "K", default_value_t = 200)]
        k: usize,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, env = "CSI_GRAPHLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        min_power: f64,
        /// Learn the null mechanism from every row, not just rows outside r0.
        #[arg(long)]
        pooled_null: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Draw i.i.d. samples as CSV.
    Sample {
        scm: String,
        #[arg(long)]
        n: usize,
        #[arg(long, env = "CSI_GRAPHLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the law suite on random SCMs and the corpus.
    Verify {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, env = "CSI_GRAPHLAB_SEED", default_value_t = 1)]
        seed: u64,
        /// JSON random-SCM spec; missing fields take defaults.
        #[arg(long)]
        spec: Option<String>,
        /// Skip the built-in examples.
        #[arg(long)]
        no_corpus: bool,
        /// Include every model's outcomes in the summary.
        #[arg(long)]
        detailed: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Built-in worked examples.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Names with a one-line description.
    List,
    /// Print an example as an SCM document.
    Export { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(EXIT_OTHER);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::GroundTruth { scm, all_graphs, out } => ground_truth(&scm, all_graphs, &out),
        Command::Discover {
            exact,
            data,
            alpha,
            context,
            regimes,
            max_set_size,
            out,
        } => discover_cmd(exact, data, alpha, &context, &regimes, max_set_size, &out),
        Command::Classify { report, mode, out } => classify_cmd(&report, &mode, &out),
        Command::TransferTest {
            csv,
            x,
            y,
            z,
            context,
            r0,
            k,
            n,
            alpha,
            seed,
            min_power,
            pooled_null,
            out,
        } => {
            let cfg = TransferConfig {
                k,
                n,
                alpha,
                seed,
                min_power,
                pooled_null,
            };
            transfer_cmd(&csv, &x, &y, &z, &context, &r0, &cfg, &out)
        }
        Command::Sample { scm, n, seed, out } => {
            let s = load(&scm)?;
            let d = draw_samples(&s, n, seed).map_err(CliError::core("sample"))?;
            emit(&out, vec![("samples.csv".into(), d.to_csv_string())], 0)
        }
        Command::Verify {
            count,
            seed,
            spec,
            no_corpus,
            detailed,
            out,
        } => verify_cmd(count, seed, spec.as_deref(), !no_corpus, detailed, &out),
        Command::Corpus { action } => match action {
            CorpusAction::List => {
                let mut text = String::new();
                for (name, about) in list_examples() {
                    text.push_str(&format!("{name}\t{about}\n"));
                }
                stdout(&text)?;
                Ok(0)
            }
            CorpusAction::Export { name } => {
                let s = get_example(&name).map_err(CliError::core("corpus export"))?;
                stdout(&s.to_document())?;
                Ok(0)
            }
        },
    }
}

fn load(path: &str) -> Result<Scm, CliError> {
    let text = read_input(path, "scm")?;
    load_scm(&text).map_err(|e| CliError::validation(format!("{path}: {e}")))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

/// Writes `files` into `--out`, or prints the first one to stdout.
fn emit(out: &OutArgs, files: Vec<(String, String)>, code: u8) -> Result<u8, CliError> {
    match &out.out {
        Some(dir) => {
            let dir = OutDir::new(dir, out.force)?;
            dir.claim(&files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>())?;
            for (name, text) in &files {
                dir.write(name, text)?;
            }
        }
        None => stdout(&files[0].1)?,
    }
    Ok(code)
}

#[derive(Serialize)]
struct Predicates {
    weakly_regime_acyclic: bool,
    strongly_regime_acyclic: bool,
    regularity: CheckReport,
    r_faithfulness: CheckReport,
    strong_r_faithfulness: CheckReport,
}

#[derive(Serialize)]
struct Membership {
    edge: (String, String),
    graphs: Vec<String>,
}

#[derive(Serialize)]
struct GroundTruthReport {
    context: String,
    regimes: Vec<String>,
    graphs: GraphObjectSet,
    predicates: Predicates,
    membership: Vec<Membership>,
}

fn named_graphs(g: &GraphObjectSet) -> Vec<(String, &DirectedGraph)> {
    let mut out = vec![("mechanism".to_string(), &g.mechanism), ("union".to_string(), &g.union)];
    for (r, rg) in &g.per_regime {
        out.push((format!("descriptive[{r}]"), &rg.descriptive));
        out.push((format!("physical[{r}]"), &rg.physical));
        out.push((format!("counterfactual[{r}]"), &rg.counterfactual));
        out.push((format!("ident[{r}]"), &rg.ident));
    }
    out
}

fn membership_csv(graphs: &[(String, &DirectedGraph)], rows: &[Membership]) -> String {
    let mut text = String::from("edge");
    for (name, _) in graphs {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for m in rows {
        text.push_str(&format!("{}->{}", m.edge.0, m.edge.1));
        for (name, _) in graphs {
            text.push_str(if m.graphs.contains(name) { ",1" } else { ",0" });
        }
        text.push('\n');
    }
    text
}

fn ground_truth(path: &str, all_graphs: bool, out: &OutArgs) -> Result<u8, CliError> {
    let scm = load(path)?;
    let gt = GroundTruth::new(&scm).map_err(CliError::core(path))?;
    let graphs = gt.objects().map_err(CliError::core(path))?;
    let named = named_graphs(&graphs);
    let edges: BTreeSet<(String, String)> = named.iter().flat_map(|(_, g)| g.edges().iter().cloned()).collect();
    let membership: Vec<Membership> = edges
        .into_iter()
        .map(|edge| Membership {
            graphs: named
                .iter()
                .filter(|(_, g)| g.contains_edge(&edge.0, &edge.1))
                .map(|(n, _)| n.clone())
                .collect(),
            edge,
        })
        .collect();
    let csv = membership_csv(&named, &membership);
    let report = GroundTruthReport {
        context: gt.context_name().to_string(),
        regimes: gt.regime_labels(),
        predicates: Predicates {
            weakly_regime_acyclic: gt.is_weakly_regime_acyclic(),
            strongly_regime_acyclic: gt.is_strongly_regime_acyclic(),
            regularity: gt.regularity(),
            r_faithfulness: gt.r_faithfulness(),
            strong_r_faithfulness: gt.strong_r_faithfulness(DEFAULT_STRONG_FAITHFULNESS_CAP),
        },
        membership,
        graphs,
    };
    let g = &report.graphs;
    let mut files = vec![
        ("report.json".to_string(), json(&report)),
        ("membership.csv".to_string(), csv),
        ("mechanism.dot".to_string(), g.mechanism.to_dot("mechanism")),
        ("union.dot".to_string(), g.union.to_dot("union")),
        ("union_acyclified.dot".to_string(), g.union.acyclify().to_dot("union_acyclified")),
    ];
    for (r, rg) in &g.per_regime {
        let s = slug(r);
        files.push((format!("descriptive_{s}.dot"), rg.descriptive.to_dot(&format!("descriptive_{s}"))));
        files.push((format!("physical_{s}.dot"), rg.physical.to_dot(&format!("physical_{s}"))));
        if all_graphs {
            files.push((
                format!("counterfactual_{s}.dot"),
                rg.counterfactual.to_dot(&format!("counterfactual_{s}")),
            ));
            files.push((format!("ident_{s}.dot"), rg.ident.to_dot(&format!("ident_{s}"))));
        }
    }
    emit(out, files, 0)
}

#[allow(clippy::too_many_arguments)]
fn discover_cmd(
    exact: Option<String>,
    data: Option<String>,
    alpha: f64,
    context: &str,
    regimes: &[String],
    max_set_size: Option<usize>,
    out: &OutArgs,
) -> Result<u8, CliError> {
    let opts = DetectOptions {
        max_set_size,
        ..Default::default()
    };
    let report = match (exact, data) {
        (Some(path), _) => {
            let scm = load(&path)?;
            let gt = GroundTruth::new(&scm).map_err(CliError::core(&path))?;
            let t = ExactTester::from_ground_truth(&gt);
            let mut rep = discover(&t, regimes, opts, "exact").map_err(CliError::core("--regime"))?;
            rep.ground_truth_union = Some(gt.union().clone());
            rep
        }
        (None, Some(path)) => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::validation(format!("--alpha {alpha}: must be in (0,1)")));
            }
            let text = read_input(&path, "--data")?;
            let d = Dataset::read_csv(text.as_bytes(), &HashMap::new()).map_err(CliError::core(&path))?;
            let t = GTestTester::new(d, context, alpha).map_err(CliError::core("--context"))?;
            discover(&t, regimes, opts, "g-test").map_err(CliError::core("--regime"))?
        }
        (None, None) => return Err(CliError::validation("one of --exact or --data is required")),
    };
    let mut files = vec![
        ("discovery.json".to_string(), json(&report)),
        ("pooled.dot".to_string(), report.pooled.skeleton.to_dot("pooled")),
        (
            "union_reconstruction.dot".to_string(),
            report.union_reconstruction.to_dot("union_reconstruction"),
        ),
    ];
    for (r, rd) in &report.per_regime {
        let s = slug(r);
        let dots: [(&str, &UndirectedSkeleton); 3] = [
            ("masked", &rd.masked.skeleton),
            ("intersection", &rd.intersection),
            ("detect", &rd.detect.skeleton),
        ];
        for (kind, g) in dots {
            files.push((format!("{kind}_{s}.dot"), g.to_dot(&format!("{kind}_{s}"))));
        }
    }
    emit(out, files, 0)
}

fn classify_cmd(path: &str, mode: &str, out: &OutArgs) -> Result<u8, CliError> {
    let mode: Mode = mode.parse().map_err(CliError::core("--mode"))?;
    let text = read_input(path, "report")?;
    let rep: DiscoveryReport =
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{path}: {e}")))?;
    let detect: BTreeMap<String, UndirectedSkeleton> = rep
        .per_regime
        .iter()
        .map(|(r, d)| (r.clone(), d.detect.skeleton.clone()))
        .collect();
    let union = match (mode, &rep.ground_truth_union) {
        (Mode::Oriented, Some(g)) => UnionInput::Oriented(g),
        (Mode::Oriented, None) => {
            return Err(CliError::validation(format!(
                "{path}: field `ground_truth_union` is required for --mode oriented (run discover --exact)"
            )))
        }
        (Mode::Skeleton, _) => UnionInput::Skeleton(&rep.union_reconstruction),
    };
    let changes = classify_changes(union, &detect, &rep.context, mode).map_err(CliError::core(path))?;
    emit(
        out,
        vec![
            ("changes.json".to_string(), json(&changes)),
            ("changes.csv".to_string(), changes.to_csv()),
        ],
        0,
    )
}

#[allow(clippy::too_many_arguments)]
fn transfer_cmd(
    path: &str,
    x: &str,
    y: &str,
    z: &[String],
    context: &str,
    r0: &str,
    cfg: &TransferConfig,
    out: &OutArgs,
) -> Result<u8, CliError> {
    let text = read_input(path, "csv")?;
    let d = Dataset::read_csv(text.as_bytes(), &HashMap::new()).map_err(CliError::core(path))?;
    let v = transfer_evidence(&d, x, y, z, context, r0, cfg).map_err(CliError::core("transfer-test"))?;
    emit(
        out,
        vec![
            ("transfer.json".to_string(), json(&v)),
            ("replicates.csv".to_string(), v.replicates_csv()),
        ],
        0,
    )
}

fn verify_cmd(
    count: usize,
    seed: u64,
    spec: Option<&str>,
    corpus: bool,
    detailed: bool,
    out: &OutArgs,
) -> Result<u8, CliError> {
    let spec: RandomScmSpec = match spec {
        Some(path) => {
            let text = read_input(path, "--spec")?;
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("--spec {path}: {e}")))?
        }
        None => RandomScmSpec::default(),
    };
    let mut summary = run_suite(count, &spec, seed, corpus);
    let code = if summary.passed() { 0 } else { EXIT_LAW };
    if !summary.errors.is_empty() && summary.failures.is_empty() {
        for e in &summary.errors {
            eprintln!("error: {e}");
        }
    }
    if !detailed {
        summary.models.clear();
    }
    for f in &summary.failures {
        eprintln!("law failure: {} {}: {}", f.model, f.law, f.witness);
    }
    emit(out, vec![("verify.json".to_string(), json(&summary))], code)
}
