//! `kbpt`: authenticated key-value store on a KZG-committed B+ tree.
//!
//! Exit codes: 0 success or accepted proof, 1 rejected proof or missing
//! key, 2 usage error, 3 I/O or storage error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use kzg_bptree::algebra::hash;
use kzg_bptree::authtree::RootRecord;
use kzg_bptree::bench;
use kzg_bptree::btree::{BPlusTree, Key};
use kzg_bptree::polycommit::PublicParams;
use kzg_bptree::proofs::{verify_membership, verify_nonmembership, verify_range, Proof};
use kzg_bptree::store::Store;
use kzg_bptree::Error;

#[derive(Parser)]
#[command(name = "kbpt", version, about = "Authenticated B+ tree key-value store with KZG node commitments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StoreArgs {
    /// Store directory, created on first write
    #[arg(long, default_value = "kbpt-store")]
    store: PathBuf,
    /// Public parameter file
    #[arg(long, default_value = "params.bin")]
    params: PathBuf,
    /// Branching factor for a new store (defaults to the parameter degree bound)
    #[arg(long)]
    q: Option<usize>,
    /// Keys and values are hex instead of UTF-8
    #[arg(long)]
    hex: bool,
}

#[derive(Args)]
struct OutputArg {
    /// Write the hex blob here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate public parameters supporting branching factor q
    Setup {
        #[arg(long)]
        q: usize,
        /// Derive the trapdoor from this seed (test mode; the trapdoor is known)
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "params.bin")]
        params: PathBuf,
    },
    /// Insert or overwrite a key
    Insert {
        #[command(flatten)]
        store: StoreArgs,
        key: String,
        value: String,
    },
    /// Print the value stored under a key
    Get {
        #[command(flatten)]
        store: StoreArgs,
        key: String,
    },
    /// Remove a key
    Delete {
        #[command(flatten)]
        store: StoreArgs,
        key: String,
    },
    /// List entries with lo <= key <= hi
    Range {
        #[command(flatten)]
        store: StoreArgs,
        lo: String,
        hi: String,
    },
    /// Membership proof for a key, as hex
    Prove {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        out: OutputArg,
        key: String,
    },
    /// Non-membership proof for a key, as hex
    ProveAbsent {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        out: OutputArg,
        key: String,
    },
    /// Range proof for lo..=hi, as hex
    ProveRange {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        out: OutputArg,
        lo: String,
        hi: String,
    },
    /// Check a proof against a root record. Needs no store.
    Verify {
        #[arg(long, default_value = "params.bin")]
        params: PathBuf,
        /// Root record as hex, or @path to a file holding it
        #[arg(long)]
        root: String,
        /// Proof as hex, or @path to a file holding it
        #[arg(long)]
        proof: String,
        #[arg(long)]
        hex: bool,
        /// Queried key (lower bound for range proofs)
        key: String,
        /// Value for membership proofs, upper bound for range proofs
        second: Option<String>,
    },
    /// Print the current root record as hex
    Root {
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        out: OutputArg,
    },
    /// List all published root records, oldest first
    History {
        #[command(flatten)]
        store: StoreArgs,
    },
    /// Proof-size sweep over random trees, as CSV
    Bench {
        /// Parameter file; test-mode parameters from --seed when absent
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        q: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Measured tree sizes
        #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_SIZES)]
        sizes: Vec<u64>,
        /// Sizes reported from the model only
        #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_EXTRAPOLATED)]
        extrapolate: Vec<u64>,
        /// Proofs measured per size
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Reject(String),
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::CorruptStore(_) | Error::MalformedParams(_) | Error::InconsistentParams(_) => {
                Failure::Io(e.to_string())
            }
            Error::KeyAbsent | Error::KeyPresent | Error::RootNotFound(_) => Failure::Reject(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn parse_bytes(s: &str, hex: bool) -> Result<Vec<u8>, Failure> {
    if hex {
        hex::decode(s).map_err(|e| Failure::Usage(format!("bad hex {s:?}: {e}")))
    } else {
        Ok(s.as_bytes().to_vec())
    }
}

fn parse_key(s: &str, hex: bool) -> Result<Key, Failure> {
    Ok(Key::new(parse_bytes(s, hex)?)?)
}

fn show(bytes: &[u8], hex: bool) -> String {
    if hex {
        hex::encode(bytes)
    } else {
        String::from_utf8_lossy(bytes).into_owned()
    }
}

/// Reads a hex argument given inline or as `@path`.
fn hex_arg(arg: &str, what: &str) -> Result<Vec<u8>, Failure> {
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)?,
        None => arg.to_string(),
    };
    hex::decode(text.trim()).map_err(|e| Failure::Usage(format!("{what} is not valid hex: {e}")))
}

fn load_params(path: &Path) -> Result<Arc<PublicParams>, Failure> {
    Ok(Arc::new(PublicParams::read_file(path)?))
}

fn open_store(args: &StoreArgs) -> Result<Store, Failure> {
    let params = load_params(&args.params)?;
    if args.store.join("roots.dat").exists() {
        return Ok(Store::open(&args.store, params)?);
    }
    let q = args.q.unwrap_or(params.degree_bound());
    Ok(Store::create(&args.store, params, q)?)
}

fn emit(out: &OutputArg, text: &str) -> CliResult {
    match &out.output {
        Some(path) => fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_proof(out: &OutputArg, proof: Proof) -> CliResult {
    emit(out, &hex::encode(proof.to_bytes()))
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Setup { q, seed, params } => {
            BPlusTree::<()>::new(q)?;
            let p = PublicParams::test_mode(q, seed)?;
            p.write_file(&params)?;
            eprintln!("warning: test-mode parameters; anyone who knows seed {seed} can forge proofs");
            println!("wrote {} (degree bound {q}, {} G1 powers)", params.display(), p.g1_powers().len());
        }
        Command::Insert { store, key, value } => {
            let mut s = open_store(&store)?;
            let record = s.insert(parse_key(&key, store.hex)?, &parse_bytes(&value, store.hex)?)?;
            println!("{}", hex::encode(record.root_hash));
        }
        Command::Get { store, key } => {
            let mut s = open_store(&store)?;
            match s.get(&parse_key(&key, store.hex)?)? {
                Some(v) => println!("{}", show(&v, store.hex)),
                None => return Err(Failure::Reject("key not found".into())),
            }
        }
        Command::Delete { store, key } => {
            let mut s = open_store(&store)?;
            let key = parse_key(&key, store.hex)?;
            if s.tree().get(&key).is_none() {
                return Err(Failure::Reject("key not found".into()));
            }
            let record = s.delete(key)?;
            println!("{}", hex::encode(record.root_hash));
        }
        Command::Range { store, lo, hi } => {
            let mut s = open_store(&store)?;
            let entries = s.snapshot().range_scan(&parse_key(&lo, store.hex)?, &parse_key(&hi, store.hex)?)?;
            let mut stdout = io::stdout().lock();
            for (key, _) in entries {
                let value = s.get(&key)?.unwrap_or_default();
                writeln!(stdout, "{}\t{}", show(key.as_bytes(), store.hex), show(&value, store.hex))?;
            }
        }
        Command::Prove { store, out, key } => {
            let s = open_store(&store)?;
            let proof = s.snapshot().prove_membership(&parse_key(&key, store.hex)?)?;
            emit_proof(&out, proof.into())?;
        }
        Command::ProveAbsent { store, out, key } => {
            let s = open_store(&store)?;
            let proof = s.snapshot().prove_nonmembership(&parse_key(&key, store.hex)?)?;
            emit_proof(&out, proof.into())?;
        }
        Command::ProveRange { store, out, lo, hi } => {
            let s = open_store(&store)?;
            let proof = s.snapshot().prove_range(&parse_key(&lo, store.hex)?, &parse_key(&hi, store.hex)?)?;
            emit_proof(&out, proof.into())?;
        }
        Command::Verify { params, root, proof, hex, key, second } => {
            let params = load_params(&params)?;
            let root = RootRecord::from_bytes(&hex_arg(&root, "root record")?)
                .map_err(|e| Failure::Usage(format!("root record: {e}")))?;
            let proof = match Proof::from_bytes(&hex_arg(&proof, "proof")?) {
                Ok(p) => p,
                Err(e) => return Err(Failure::Reject(format!("malformed proof: {e}"))),
            };
            let key = parse_key(&key, hex)?;
            let accepted = match (&proof, second) {
                (Proof::Membership(p), Some(value)) => {
                    verify_membership(&params, &root, &key, &hash(&parse_bytes(&value, hex)?), p)
                }
                (Proof::NonMembership(p), None) => verify_nonmembership(&params, &root, &key, p),
                (Proof::Range(p), Some(hi)) => verify_range(&params, &root, &key, &parse_key(&hi, hex)?, p),
                (Proof::Membership(_), None) => return Err(Failure::Usage("membership proofs need a value".into())),
                (Proof::NonMembership(_), Some(_)) => {
                    return Err(Failure::Usage("non-membership proofs take only a key".into()))
                }
                (Proof::Range(_), None) => return Err(Failure::Usage("range proofs need lo and hi".into())),
            };
            if !accepted {
                return Err(Failure::Reject("proof rejected".into()));
            }
            println!("accepted");
        }
        Command::Root { store, out } => {
            let s = open_store(&store)?;
            emit(&out, &hex::encode(s.record().to_bytes()))?;
        }
        Command::History { store } => {
            let s = open_store(&store)?;
            let mut stdout = io::stdout().lock();
            for (i, r) in s.history().iter().enumerate() {
                writeln!(stdout, "{i}\t{}\t{}", hex::encode(r.root_hash), r.element_count)?;
            }
        }
        Command::Bench { params, q, seed, sizes, extrapolate, samples, output } => {
            BPlusTree::<()>::new(q)?;
            let params = match params {
                Some(path) => load_params(&path)?,
                None => Arc::new(PublicParams::test_mode(q, seed)?),
            };
            let rows = bench::run(params, q, &sizes, &extrapolate, samples, seed)?;
            match output {
                Some(path) => bench::write_csv(&rows, fs::File::create(path)?)?,
                None => bench::write_csv(&rows, io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Reject(msg)) => {
            eprintln!("rejected: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
