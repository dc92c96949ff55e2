//! Command-line front-end: validation, display checks, hybrid numbers,
//! minimum-weight sequences, network construction and extraction, the
//! balanced family generator, and DOT export.
//!
//! Exit codes: 0 = computed / true, 1 = computed / false or infeasible,
//! 2 = input error, 3 = resource limit hit.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use forkpick::construct;
use forkpick::display;
use forkpick::dot;
use forkpick::forkops::{self, CherryPickingSequence, ForkPickingSequence, LcaScope};
use forkpick::model::{PhyloNetwork, PhyloTree};
use forkpick::netcheck;
use forkpick::newick;
use forkpick::oracle::{self, HybridKind};
use forkpick::search::{self, Limits, Outcome};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Duration;

const EXIT_TRUE: i32 = 0;
const EXIT_FALSE: i32 = 1;
const EXIT_INPUT: i32 = 2;
const EXIT_LIMIT: i32 = 3;

#[derive(Parser)]
#[command(name = "forkpick", version, about = "exact display and hybrid-number computations for pairs of rooted binary phylogenetic trees")]
struct Cli {
    /// Worker threads for oracle scans (solvers are sequential).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural and class report for a network file.
    Validate { net: PathBuf },
    /// Display predicates for trees in a network.
    Check(CheckArgs),
    /// Hybrid numbers: rigid (fork-picking solver), temporal (cherry-picking
    /// solver), weak (network enumeration oracle).
    Hybrid(HybridArgs),
    /// Minimum-weight fork- or cherry-picking sequence for two trees.
    Sequence(SequenceArgs),
    /// Build a temporal tree-child network from a fork-picking sequence.
    Construct(ConstructArgs),
    /// Extract a fork-picking sequence from a rigidly displaying network.
    Extract { net: PathBuf, t1: PathBuf, t2: PathBuf },
    /// Generate the balanced-block tree family with its witness.
    GenThmbig {
        #[arg(long)]
        m: u32,
    },
    /// Enumerate all networks on the given leaves with exactly the given
    /// reticulation count, one representative per isomorphism class.
    Enumerate(EnumerateArgs),
    /// DOT export of a tree (.nwk) or network (.enwk).
    Dot { file: PathBuf },
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["weak", "display", "rigid"])))]
struct CheckArgs {
    /// Weak display of TREE in NET.
    #[arg(long)]
    weak: bool,
    /// Ordinary display of TREE in NET.
    #[arg(long)]
    display: bool,
    /// Rigid display of T1 and T2 in NET.
    #[arg(long)]
    rigid: bool,
    /// TREE NET, or with --rigid: T1 T2 NET.
    files: Vec<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("quantity").required(true).args(["rigid", "temporal", "weak"])))]
struct HybridArgs {
    #[arg(long)]
    rigid: bool,
    #[arg(long)]
    temporal: bool,
    #[arg(long)]
    weak: bool,
    t1: PathBuf,
    t2: PathBuf,
    /// Reticulation budget for the weak-hybrid oracle.
    #[arg(long, default_value_t = 2)]
    cap: usize,
    /// Wall-clock limit in seconds; exceeding it exits with code 3.
    #[arg(long)]
    timeout: Option<u64>,
}

#[derive(Args)]
struct SequenceArgs {
    t1: PathBuf,
    t2: PathBuf,
    #[arg(long, value_enum, default_value_t = SeqMode::Fork)]
    mode: SeqMode,
    #[arg(long)]
    timeout: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeqMode {
    Fork,
    Cherry,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Comma-separated leaf labels.
    #[arg(long)]
    labels: String,
    #[arg(long, default_value_t = 1)]
    reticulations: usize,
    #[arg(long, value_enum, default_value_t = ClassArg::General)]
    class: ClassArg,
    /// Print only the number of networks.
    #[arg(long)]
    count_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    General,
    TreeChild,
    TemporalTreeChild,
}

impl ClassArg {
    fn to_class(self) -> oracle::NetClass {
        match self {
            ClassArg::General => oracle::NetClass::General,
            ClassArg::TreeChild => oracle::NetClass::TreeChild,
            ClassArg::TemporalTreeChild => oracle::NetClass::TemporalTreeChild,
        }
    }
}

#[derive(Args)]
struct ConstructArgs {
    t1: PathBuf,
    t2: PathBuf,
    /// JSON file holding a fork-picking sequence.
    #[arg(long)]
    seq: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            std::process::exit(EXIT_INPUT);
        }
    }
}

fn read_tree(path: &Path) -> Result<PhyloTree> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    newick::parse_tree(text.trim()).with_context(|| format!("parsing tree {}", path.display()))
}

fn read_network(path: &Path) -> Result<PhyloNetwork> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    newick::parse_network(text.trim())
        .with_context(|| format!("parsing network {}", path.display()))
}

fn limits(timeout: Option<u64>) -> Limits {
    Limits {
        time_limit: timeout.map(Duration::from_secs),
        ..Limits::default()
    }
}

fn run(cli: Cli) -> Result<i32> {
    let jobs = cli.jobs.max(1);
    match cli.command {
        Command::Validate { net } => {
            let text = std::fs::read_to_string(&net)
                .with_context(|| format!("reading {}", net.display()))?;
            let dag = newick::parse_network_raw(text.trim())
                .with_context(|| format!("parsing network {}", net.display()))?;
            let report = netcheck::validate(&dag);
            let h = if report.is_valid_network {
                let net = PhyloNetwork::from_dag(dag).expect("validated");
                Some(net.reticulation_count())
            } else {
                None
            };
            let mut val = serde_json::to_value(&report)?;
            if let Some(h) = h {
                val["reticulation_count"] = json!(h);
            }
            println!("{}", serde_json::to_string_pretty(&val)?);
            Ok(if report.is_valid_network { EXIT_TRUE } else { EXIT_FALSE })
        }
        Command::Check(args) => run_check(args),
        Command::Hybrid(args) => run_hybrid(args, jobs),
        Command::Sequence(args) => run_sequence(args),
        Command::Construct(args) => run_construct(args),
        Command::Extract { net, t1, t2 } => run_extract(&net, &t1, &t2),
        Command::GenThmbig { m } => {
            let fam = oracle::gen_balanced_family(m)?;
            let out = json!({
                "m": m,
                "t1": newick::serialize_tree(&fam.t1),
                "t2": newick::serialize_tree(&fam.t2),
                "network": fam.network.canonical_form(),
                "witness": fam.witness,
                "witness_weight": fam.witness.weight(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(EXIT_TRUE)
        }
        Command::Enumerate(args) => {
            let labels: Vec<String> = args
                .labels
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            let nets = oracle::enumerate_networks(&labels, args.reticulations, args.class.to_class())?;
            if args.count_only {
                println!("{}", nets.len());
            } else {
                for n in &nets {
                    println!("{}", n.canonical_form());
                }
            }
            Ok(EXIT_TRUE)
        }
        Command::Dot { file } => {
            let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
            let text = if ext == "enwk" {
                dot::network_to_dot(&read_network(&file)?)
            } else {
                dot::tree_to_dot(&read_tree(&file)?)
            };
            print!("{}", text);
            Ok(EXIT_TRUE)
        }
    }
}

fn run_check(args: CheckArgs) -> Result<i32> {
    if args.rigid {
        let [t1p, t2p, netp] = args.files.as_slice() else {
            return Err(anyhow!("check --rigid expects T1 T2 NET"));
        };
        let t1 = read_tree(t1p)?;
        let t2 = read_tree(t2p)?;
        let net = read_network(netp)?;
        let found = display::rigidly_displays(&net, &t1, &t2)?;
        match found {
            Some((m1, m2)) => {
                let out = json!({
                    "rigidly_displays": true,
                    "map_first": m1.to_json(&t1),
                    "map_second": m2.to_json(&t2),
                    "gamma": display::gamma_pair(&net, &m1, &m2),
                });
                println!("{}", serde_json::to_string_pretty(&out)?);
                Ok(EXIT_TRUE)
            }
            None => {
                println!("{}", json!({"rigidly_displays": false}));
                Ok(EXIT_FALSE)
            }
        }
    } else {
        let [treep, netp] = args.files.as_slice() else {
            return Err(anyhow!("check expects TREE NET"));
        };
        let tree = read_tree(treep)?;
        let net = read_network(netp)?;
        if args.display {
            let ok = display::displays(&tree, &net)?;
            println!("{}", json!({ "displays": ok }));
            Ok(if ok { EXIT_TRUE } else { EXIT_FALSE })
        } else {
            let search = display::find_display_maps(&tree, &net, display::DEFAULT_MAP_LIMIT)?;
            let ok = !search.maps.is_empty();
            let out = json!({
                "weakly_displays": ok,
                "display_maps": search.maps.len(),
                "truncated": search.truncated,
                "first_map": search.maps.first().map(|m| m.to_json(&tree)),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(if ok { EXIT_TRUE } else { EXIT_FALSE })
        }
    }
}

fn run_hybrid(args: HybridArgs, jobs: usize) -> Result<i32> {
    let t1 = read_tree(&args.t1)?;
    let t2 = read_tree(&args.t2)?;
    let lim = limits(args.timeout);
    if args.weak {
        if args.cap > 2 {
            eprintln!(
                "warning: cap {} exceeds the default budget of 2; enumeration cost grows steeply",
                args.cap
            );
        }
        let hint = weak_hint(&t1, &t2, lim);
        let cert = oracle::brute_hybrid(&t1, &t2, HybridKind::WeakHybrid, args.cap, jobs, hint.as_ref())?;
        let ok = cert.verify(&t1, &t2);
        let mut out = serde_json::to_value(cert.to_json(&t1, &t2))?;
        out["witness_verified"] = json!(ok);
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(if cert.value.is_some() { EXIT_TRUE } else { EXIT_FALSE });
    }
    if args.temporal {
        let res = search::min_weight_cherry_picking(&t1, &t2, lim)?;
        return emit_outcome(res.outcome.map_witness(|w| json!(w)), res.stats);
    }
    // rigid hybrid number via the fork-picking solver
    let res = search::min_weight_fork_picking(&t1, &t2, lim)?;
    match &res.outcome {
        Outcome::Optimal { optimum, witness } => {
            let trace = construct::build_network(&t1, &t2, witness)?;
            let out = json!({
                "optimum": optimum,
                "witness": witness,
                "network": trace.network.canonical_form(),
                "network_reticulations": trace.network.reticulation_count(),
                "stats": res.stats,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(EXIT_TRUE)
        }
        Outcome::Infeasible => {
            println!("{}", json!({"optimum": "infeasible", "stats": res.stats}));
            Ok(EXIT_FALSE)
        }
        Outcome::Unknown => {
            println!("{}", json!({"optimum": "unknown", "stats": res.stats}));
            Ok(EXIT_LIMIT)
        }
    }
}

/// Constructive weak-hybrid hint: when a fork-picking sequence exists, the
/// built network rigidly (hence weakly) displays both trees.
fn weak_hint(t1: &PhyloTree, t2: &PhyloTree, lim: Limits) -> Option<PhyloNetwork> {
    let res = search::min_weight_fork_picking(t1, t2, lim).ok()?;
    match res.outcome {
        Outcome::Optimal { witness, .. } => {
            let trace = construct::build_network(t1, t2, &witness).ok()?;
            Some(trace.network)
        }
        _ => None,
    }
}

trait MapWitness {
    type Out;
    fn map_witness<F: FnOnce(&CherryPickingSequence) -> serde_json::Value>(
        &self,
        f: F,
    ) -> Outcome<serde_json::Value>;
}

impl MapWitness for Outcome<CherryPickingSequence> {
    type Out = Outcome<serde_json::Value>;
    fn map_witness<F: FnOnce(&CherryPickingSequence) -> serde_json::Value>(
        &self,
        f: F,
    ) -> Outcome<serde_json::Value> {
        match self {
            Outcome::Optimal { optimum, witness } => Outcome::Optimal {
                optimum: *optimum,
                witness: f(witness),
            },
            Outcome::Infeasible => Outcome::Infeasible,
            Outcome::Unknown => Outcome::Unknown,
        }
    }
}

fn emit_outcome(outcome: Outcome<serde_json::Value>, stats: search::SearchStats) -> Result<i32> {
    match outcome {
        Outcome::Optimal { optimum, witness } => {
            let out = json!({"optimum": optimum, "witness": witness, "stats": stats});
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(EXIT_TRUE)
        }
        Outcome::Infeasible => {
            println!("{}", json!({"optimum": "infeasible", "stats": stats}));
            Ok(EXIT_FALSE)
        }
        Outcome::Unknown => {
            println!("{}", json!({"optimum": "unknown", "stats": stats}));
            Ok(EXIT_LIMIT)
        }
    }
}

fn run_sequence(args: SequenceArgs) -> Result<i32> {
    let t1 = read_tree(&args.t1)?;
    let t2 = read_tree(&args.t2)?;
    let lim = limits(args.timeout);
    match args.mode {
        SeqMode::Fork => {
            let res = search::min_weight_fork_picking(&t1, &t2, lim)?;
            let out = match &res.outcome {
                Outcome::Optimal { optimum, witness } => Outcome::Optimal {
                    optimum: *optimum,
                    witness: serde_json::to_value(witness)?,
                },
                Outcome::Infeasible => Outcome::Infeasible,
                Outcome::Unknown => Outcome::Unknown,
            };
            emit_outcome(out, res.stats)
        }
        SeqMode::Cherry => {
            let res = search::min_weight_cherry_picking(&t1, &t2, lim)?;
            emit_outcome(res.outcome.map_witness(|w| json!(w)), res.stats)
        }
    }
}

fn run_construct(args: ConstructArgs) -> Result<i32> {
    let t1 = read_tree(&args.t1)?;
    let t2 = read_tree(&args.t2)?;
    let text = std::fs::read_to_string(&args.seq)
        .with_context(|| format!("reading {}", args.seq.display()))?;
    let seq: ForkPickingSequence =
        serde_json::from_str(&text).context("parsing the sequence JSON")?;
    let trace = construct::build_network(&t1, &t2, &seq)?;
    println!("{}", serde_json::to_string_pretty(&trace.to_json(&t1, &t2))?);
    Ok(EXIT_TRUE)
}

fn run_extract(netp: &Path, t1p: &Path, t2p: &Path) -> Result<i32> {
    let net = read_network(netp)?;
    let t1 = read_tree(t1p)?;
    let t2 = read_tree(t2p)?;
    let witnesses = display::rigidly_displays(&net, &t1, &t2)?
        .ok_or_else(|| anyhow!("the network does not rigidly display the trees"))?;
    let seq = search::extract_fork_picking(&net, &t1, &t2, &witnesses)?;
    let check = forkops::check_fork_picking_sequence(&t1, &t2, &seq, LcaScope::BlockStart)?;
    let out = json!({
        "sequence": seq,
        "weight": seq.weight(),
        "reticulation_count": net.reticulation_count(),
        "valid": check.ok,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(EXIT_TRUE)
}
