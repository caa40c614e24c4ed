//! `era`: build, query, verify and inspect disk-based suffix tree indexes.
//!
//! Exit codes: 0 success, 1 no match or other failure, 2 usage or input
//! error, 3 memory budget too small, 4 corrupt or unsupported index,
//! 5 verification failed.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use era_core::oracle::{naive_tree, suffix_order, trees_equal};
use era_core::parallel::TraceFn;
use era_core::tree::{validate_structure, validate_subtree};
use era_core::{build_index, open_index, Alphabet, BuildConfig, EraError, Index, PrepSnapshot, Text, DEFAULT_SENTINEL};
use serde::Serialize;

const EXIT_NO_MATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_CORRUPT: u8 = 4;
const EXIT_VERIFY: u8 = 5;

/// Texts up to this many symbols are verified against the brute-force
/// oracles; longer ones get structural checks only.
const ORACLE_LIMIT: u64 = 20_000;

#[derive(Parser)]
#[command(name = "era", version, about = "Disk-based suffix tree construction and search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a text file.
    Build(BuildArgs),
    /// Print the sorted positions where a pattern occurs.
    Query(QueryArgs),
    /// Check an index against its text.
    Verify(VerifyArgs),
    /// Print a JSON summary of an index.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphabetName {
    Dna,
    Protein,
    Ascii,
}

#[derive(Args)]
struct BuildArgs {
    /// Text file of one-byte symbols, optionally ending with the sentinel.
    #[arg(long)]
    input: PathBuf,
    /// Index file to write.
    #[arg(long)]
    output: PathBuf,
    /// Total memory budget, e.g. 512M or 2G.
    #[arg(long, value_parser = parse_size, default_value = "1G")]
    memory: u64,
    /// Prefetch buffer size; chosen from the alphabet size by default.
    #[arg(long, value_parser = parse_size)]
    r_size: Option<u64>,
    /// Input block size; 1 MiB by default.
    #[arg(long, value_parser = parse_size)]
    block_size: Option<u64>,
    /// Bytes per tree node assumed when sizing sub-trees.
    #[arg(long, value_parser = parse_size, default_value = "32")]
    node_size: u64,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip blocks with nothing to read; on by default for one worker only.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    skip_seek: Option<bool>,
    /// dna, protein, ascii, or a file listing the symbols.
    #[arg(long, default_value = "dna")]
    alphabet: String,
    /// Where to write the build report; `<output>.stats.json` by default.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    /// Index file.
    #[arg(long)]
    index: PathBuf,
    /// The indexed text; needed whenever the match ends inside a sub-tree.
    #[arg(long)]
    input: Option<PathBuf>,
    pattern: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<EraError> for Failure {
    fn from(e: EraError) -> Self {
        let code = match &e {
            EraError::InvalidSymbol { .. } | EraError::DuplicateSentinel { .. } | EraError::InvalidAlphabet(_) => {
                EXIT_USAGE
            }
            EraError::BudgetTooSmall(_) => EXIT_BUDGET,
            EraError::UnsupportedFormat(_) | EraError::CorruptIndex(_) => EXIT_CORRUPT,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(1, e.to_string())
    }
}

/// Accepts plain bytes or a K, M or G suffix (binary multiples), with an
/// optional trailing `B` or `iB`.
fn parse_size(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let t = t.strip_suffix("iB").or_else(|| t.strip_suffix('B')).unwrap_or(t);
    let (num, shift) = match t.chars().last() {
        Some('k' | 'K') => (&t[..t.len() - 1], 10),
        Some('m' | 'M') => (&t[..t.len() - 1], 20),
        Some('g' | 'G') => (&t[..t.len() - 1], 30),
        _ => (t, 0),
    };
    let n: u64 = num.trim().parse().map_err(|_| format!("invalid size {s:?}"))?;
    n.checked_mul(1 << shift).ok_or_else(|| format!("size {s:?} is too large"))
}

fn load_alphabet(spec: &str) -> Result<Alphabet, Failure> {
    match AlphabetName::from_str(spec, true) {
        Ok(AlphabetName::Dna) => Ok(Alphabet::dna()),
        Ok(AlphabetName::Protein) => Ok(Alphabet::protein()),
        Ok(AlphabetName::Ascii) => Ok(Alphabet::ascii()),
        Err(_) => {
            let raw = std::fs::read(spec).map_err(|e| {
                Failure::new(EXIT_USAGE, format!("alphabet {spec:?} is not a preset and not a readable file: {e}"))
            })?;
            let symbols: Vec<u8> = raw.into_iter().filter(|b| !b.is_ascii_whitespace()).collect();
            Ok(Alphabet::new(&symbols, DEFAULT_SENTINEL)?)
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.as_os_str().is_empty() {
        return Err(Failure::new(EXIT_USAGE, format!("{what} path is empty")));
    }
    if !path.is_file() {
        return Err(Failure::new(EXIT_USAGE, format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn open_checked(path: &Path) -> Result<Index, Failure> {
    require_file(path, "index")?;
    Ok(open_index(path)?)
}

fn default_stats_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".stats.json");
    output.with_file_name(name)
}

fn print_snapshot(group: usize, s: &PrepSnapshot) {
    let show = |v: &[Option<u32>]| {
        v.iter().map(|x| x.map_or("-".to_string(), |x| x.to_string())).collect::<Vec<_>>().join(" ")
    };
    let r =
        s.r.iter()
            .map(|x| x.as_ref().map_or("-".to_string(), |x| String::from_utf8_lossy(x).into_owned()))
            .collect::<Vec<_>>()
            .join(" ");
    let b = s.b.iter().map(|x| x.map_or("-".to_string(), |x| x.to_string())).collect::<Vec<_>>().join(" ");
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "trace group {group} member {} iteration {} start {} range {}\n  I: {}\n  A: {}\n  R: {}\n  P: {}\n  L: {}\n  B: {}",
        s.member,
        s.iteration,
        s.start,
        s.range,
        show(&s.i),
        show(&s.a),
        r,
        s.p.iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
        s.l.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
        b
    );
}

fn cmd_build(args: BuildArgs) -> Result<u8, Failure> {
    require_file(&args.input, "input")?;
    if args.output.as_os_str().is_empty() {
        return Err(Failure::new(EXIT_USAGE, "output path is empty"));
    }
    let alphabet = load_alphabet(&args.alphabet)?;
    let text = Text::open(&args.input, &alphabet)?;
    let workers = if args.workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        args.workers
    };
    let mut config = BuildConfig::new(args.memory);
    config.r_size = args.r_size;
    config.block_size = args.block_size;
    config.node_size = args.node_size;
    config.workers = workers;
    config.skip_seek = args.skip_seek;
    if std::env::var("ERA_TRACE").is_ok_and(|v| v == "1") {
        let f: TraceFn = Arc::new(print_snapshot);
        config.trace = Some(f);
    }
    let report = build_index(&text, &args.output, &config)?;
    let stats_path = args.stats.unwrap_or_else(|| default_stats_path(&args.output));
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::new(1, e.to_string()))?;
    std::fs::write(&stats_path, json)?;
    println!(
        "indexed {} symbols into {} sub-trees ({} groups, {} passes, peak {} bytes); report in {}",
        report.text_len,
        report.records.len(),
        report.group_count,
        report.total_stats.passes,
        report.peak_memory,
        stats_path.display()
    );
    Ok(0)
}

fn cmd_query(args: QueryArgs) -> Result<u8, Failure> {
    let mut index = open_checked(&args.index)?;
    if let Some(input) = &args.input {
        require_file(input, "input")?;
        let text = Text::open(input, index.alphabet())?;
        index.attach_text(text).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    }
    let pattern = args.pattern.as_bytes();
    if pattern.is_empty() {
        return Err(Failure::new(EXIT_USAGE, "empty pattern"));
    }
    let hits = match index.find(pattern) {
        Ok(h) => h,
        Err(EraError::Precondition(m)) if index.text().is_none() => {
            return Err(Failure::new(EXIT_USAGE, format!("{m}: pass --input")));
        }
        Err(e) => return Err(e.into()),
    };
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    for h in &hits {
        writeln!(out, "{h}")?;
    }
    out.flush()?;
    Ok(if hits.is_empty() { EXIT_NO_MATCH } else { 0 })
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Failure> {
    let mut index = open_checked(&args.index)?;
    require_file(&args.input, "input")?;
    let text = Text::open(&args.input, index.alphabet())?;
    index.attach_text(text.clone()).map_err(|e| Failure::new(EXIT_VERIFY, e.to_string()))?;
    let n1 = index.text_len();
    let small = n1 <= ORACLE_LIMIT;
    let bytes = if small { Some(text.to_vec()?) } else { None };
    let mut problems = Vec::new();
    let mut seen = vec![false; n1 as usize];
    let mut prefix_buf = Vec::new();
    for (r, entry) in index.trie().entries().iter().enumerate() {
        let tree = index.load_subtree(r)?;
        let name = String::from_utf8_lossy(&entry.prefix).into_owned();
        for v in validate_structure(&tree, n1, Some(entry.frequency)) {
            problems.push(format!("{name}: {v}"));
        }
        for leaf in tree.leaves() {
            if leaf >= n1 || std::mem::replace(&mut seen[leaf as usize], true) {
                problems.push(format!("{name}: suffix {leaf} is out of range or listed twice"));
                continue;
            }
            prefix_buf.resize(entry.prefix.len(), 0);
            let got = text.read_at(leaf, &mut prefix_buf)?;
            if prefix_buf[..got] != entry.prefix[..] {
                problems.push(format!("{name}: suffix {leaf} does not start with the prefix"));
            }
        }
        if let Some(b) = &bytes {
            for v in validate_subtree(&tree, b, index.alphabet()) {
                problems.push(format!("{name}: {v}"));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        problems.push(format!("suffix {missing} is not in the index"));
    }
    if let Some(b) = &bytes {
        let order: Vec<u64> = index.enumerate_suffixes().collect::<Result<_, _>>()?;
        if order != suffix_order(b, index.alphabet()) {
            problems.push("suffix enumeration differs from the sorted suffixes".into());
        }
        if !trees_equal(&index.assemble_full_tree()?, &naive_tree(b, index.alphabet()), b) {
            problems.push("assembled tree differs from the reference tree".into());
        }
    } else {
        println!("notice: text has {n1} symbols, above the oracle limit of {ORACLE_LIMIT}; ran structural checks only");
    }
    if problems.is_empty() {
        println!("ok: {} sub-trees, {} suffixes", index.trie().len(), n1);
        Ok(0)
    } else {
        for p in problems.iter().take(50) {
            eprintln!("{p}");
        }
        Err(Failure::new(EXIT_VERIFY, format!("{} problems found", problems.len())))
    }
}

#[derive(Serialize)]
struct SubtreeStats {
    prefix: String,
    frequency: u64,
    nodes: u64,
    bytes: u64,
}

#[derive(Serialize)]
struct IndexStats {
    format_version: u32,
    text_len: u64,
    alphabet: String,
    /// Sub-trees stored in the index.
    groups: usize,
    trie_entries: usize,
    header_bytes: u64,
    index_bytes: u64,
    total_leaves: u64,
    total_nodes: u64,
    subtrees: Vec<SubtreeStats>,
}

fn cmd_stats(args: StatsArgs) -> Result<u8, Failure> {
    let index = open_checked(&args.index)?;
    let mut subtrees = Vec::with_capacity(index.trie().len());
    for (r, e) in index.trie().entries().iter().enumerate() {
        subtrees.push(SubtreeStats {
            prefix: String::from_utf8_lossy(&e.prefix).into_owned(),
            frequency: e.frequency,
            nodes: index.node_count(r)?,
            bytes: index.sections()[r].length,
        });
    }
    let stats = IndexStats {
        format_version: index.version(),
        text_len: index.text_len(),
        alphabet: String::from_utf8_lossy(index.alphabet().base_symbols()).into_owned(),
        groups: subtrees.len(),
        trie_entries: index.trie().len(),
        header_bytes: index.header_len(),
        index_bytes: index.file_len(),
        total_leaves: subtrees.iter().map(|s| s.frequency).sum(),
        total_nodes: subtrees.iter().map(|s| s.nodes).sum(),
        subtrees,
    };
    println!("{}", serde_json::to_string_pretty(&stats).map_err(|e| Failure::new(1, e.to_string()))?);
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("era: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(parse_size("8M"), Ok(8 << 20));
        assert_eq!(parse_size("8MiB"), Ok(8 << 20));
        assert_eq!(parse_size("2g"), Ok(2 << 30));
        assert_eq!(parse_size("4096"), Ok(4096));
        assert_eq!(parse_size("64KB"), Ok(64 << 10));
        assert!(parse_size("x").is_err());
        assert!(parse_size("").is_err());
    }
}
