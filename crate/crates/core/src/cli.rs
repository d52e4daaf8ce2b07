//! Command-line front end: `train-lm`, `decode` and `eval`.
//!
//! Exit codes are 0 on success, 2 for usage, validation and input errors,
//! and 1 for internal failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{ArgGroup, Parser, Subcommand};

use crate::decoding::{decode_batch, inter_sentence_dbs, DecodeConfig, StoryDocument};
use crate::decoding::{DEFAULT_BEAM_WIDTH, DEFAULT_LAMBDA, DEFAULT_MAX_LEN};
use crate::diversity::penalty_by_name;
use crate::metrics::diversity_report;
use crate::scoring::{
    load_table_scorer, train_ngram, Condition, NGramModel, StepScorer, TableScorer,
};
use crate::vocab::{build_vocabulary, Corpus, Vocabulary, DEFAULT_MIN_COUNT, NUM_SPECIALS};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "storybeam",
    version,
    about = "Diverse multi-segment beam search decoding"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a Laplace-smoothed n-gram model on a one-sentence-per-line corpus
    TrainLm(TrainArgs),
    /// Decode a story with one segment per condition
    Decode(DecodeArgs),
    /// Report repetition statistics for a decoded story
    Eval(EvalArgs),
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Corpus file, one sentence per line
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: u32,
    /// Where to write the model
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
#[command(group(ArgGroup::new("input").required(true).args(["conditions", "batch"])))]
pub struct DecodeArgs {
    /// N-gram model or table scorer file
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated condition keys; `@path` reads one key per line
    #[arg(long, value_delimiter = ',')]
    pub conditions: Vec<String>,
    /// File with one story per line, each a comma-separated list of keys
    #[arg(long, conflicts_with = "conditions", requires = "out")]
    pub batch: Option<PathBuf>,
    /// Worker threads for --batch
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH as i64, allow_negative_numbers = true)]
    pub beam_width: i64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN as i64, allow_negative_numbers = true)]
    pub max_len: i64,
    #[arg(long, default_value = "hamming")]
    pub penalty: String,
    /// Expected n-gram order; decoding fails if the model differs
    #[arg(long)]
    pub order: Option<usize>,
    /// Output file (a directory with --batch); stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Story JSON written by `decode`
    pub story: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs the selected command, returning the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::TrainLm(args) => cmd_train_lm(&args, stdout, stderr),
        Command::Decode(args) => cmd_decode(&args, stdout),
        Command::Eval(args) => cmd_eval(&args, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a sibling temp file so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => stdout
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

pub fn cmd_train_lm(
    args: &TrainArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    if args.order < 1 {
        return Err(CliError::Usage("--order must be at least 1".into()));
    }
    if !(args.alpha > 0.0 && args.alpha.is_finite()) {
        return Err(CliError::Usage("--alpha must be positive".into()));
    }
    if args.min_count < 1 {
        return Err(CliError::Usage("--min-count must be at least 1".into()));
    }
    let corpus = Corpus::from_text(&read_input(&args.corpus)?);
    let vocab = build_vocabulary(&corpus, args.min_count)?;
    if vocab.len() == NUM_SPECIALS {
        let _ = writeln!(
            stderr,
            "warning: no token occurs {} or more times; vocabulary holds reserved tokens only",
            args.min_count
        );
    }
    let model = train_ngram(&corpus, &vocab, args.order, args.alpha)?;
    write_atomic(&args.out, &(model.to_json()? + "\n"))?;
    writeln!(stdout, "vocabulary size: {}", vocab.len())
        .and_then(|_| writeln!(stdout, "contexts: {}", model.num_contexts()))
        .map_err(|e| CliError::Internal(e.to_string()))
}

enum LoadedModel {
    NGram(NGramModel),
    Table(TableScorer),
}

impl LoadedModel {
    fn load(path: &Path) -> CliResult<Self> {
        let text = read_input(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if value.get("default_row").is_some() {
            Ok(LoadedModel::Table(load_table_scorer(&text)?))
        } else if value.get("counts").is_some() {
            Ok(LoadedModel::NGram(NGramModel::from_json(&text)?))
        } else {
            Err(CliError::Usage(format!(
                "{} is neither an n-gram model nor a table scorer",
                path.display()
            )))
        }
    }

    fn scorer(&self) -> &dyn StepScorer {
        match self {
            LoadedModel::NGram(m) => m,
            LoadedModel::Table(t) => t,
        }
    }

    fn vocab(&self) -> &Vocabulary {
        match self {
            LoadedModel::NGram(m) => m.vocab(),
            LoadedModel::Table(t) => t.vocab(),
        }
    }
}

fn parse_conditions(raw: &[String]) -> CliResult<Vec<Condition>> {
    let mut keys = Vec::new();
    for item in raw {
        match item.strip_prefix('@') {
            Some(path) => {
                let text = read_input(Path::new(path))?;
                keys.extend(
                    text.lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(str::to_owned),
                );
            }
            None => keys.push(item.trim().to_owned()),
        }
    }
    if keys.is_empty() {
        return Err(CliError::Usage("at least one condition is required".into()));
    }
    keys.into_iter()
        .map(|k| Condition::new(k).map_err(CliError::from))
        .collect()
}

pub fn cmd_decode(args: &DecodeArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if args.beam_width < 1 {
        return Err(CliError::Usage("--beam-width must be at least 1".into()));
    }
    if !(args.lambda >= 0.0 && args.lambda.is_finite()) {
        return Err(CliError::Usage(format!(
            "--lambda must be >= 0, got {}",
            args.lambda
        )));
    }
    if args.max_len < 1 {
        return Err(CliError::Usage("--max-len must be at least 1".into()));
    }
    let penalty = penalty_by_name(&args.penalty).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown penalty {:?} (expected hamming or binary)",
            args.penalty
        ))
    })?;

    let model = LoadedModel::load(&args.model)?;
    match (&model, args.order) {
        (LoadedModel::NGram(m), Some(order)) if m.order() != order => {
            return Err(CliError::Usage(format!(
                "model has order {}, --order asked for {order}",
                m.order()
            )));
        }
        (LoadedModel::Table(_), Some(_)) => {
            return Err(CliError::Usage(
                "--order given but the model is a table scorer".into(),
            ));
        }
        _ => {}
    }

    let base = DecodeConfig {
        beam_width: args.beam_width as usize,
        lambda: args.lambda,
        max_len: args.max_len as usize,
        num_segments: 1,
    };

    if let Some(batch) = &args.batch {
        return decode_batch_file(&model, batch, args, &base, penalty.as_ref());
    }

    let conditions = parse_conditions(&args.conditions)?;
    let config = DecodeConfig {
        num_segments: conditions.len(),
        ..base
    };
    let story = inter_sentence_dbs(
        model.scorer(),
        &conditions,
        model.vocab(),
        &config,
        penalty.as_ref(),
    )?;
    let json = story.to_document(model.vocab())?.to_json()?;
    emit(args.out.as_deref(), &json, stdout)
}

fn decode_batch_file(
    model: &LoadedModel,
    batch: &Path,
    args: &DecodeArgs,
    config: &DecodeConfig,
    penalty: &dyn crate::diversity::DiversityPenalty,
) -> CliResult<()> {
    let out_dir = args
        .out
        .as_deref()
        .expect("clap requires --out with --batch");
    let stories = read_input(batch)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse_conditions(&l.split(',').map(str::to_owned).collect::<Vec<_>>()))
        .collect::<CliResult<Vec<_>>>()?;
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out_dir.display())))?;
    let workers = args
        .workers
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()));
    let results = decode_batch(
        model.scorer(),
        &stories,
        model.vocab(),
        config,
        penalty,
        workers,
    );
    for (i, result) in results.into_iter().enumerate() {
        let json = result?.to_document(model.vocab())?.to_json()?;
        write_atomic(&out_dir.join(format!("story_{i:04}.json")), &json)?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let doc = StoryDocument::from_json(&read_input(&args.story)?)?;
    let segments: Vec<Vec<String>> = doc.segments.into_iter().map(|s| s.tokens).collect();
    let report = diversity_report(&segments);
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(stdout, "{json}").map_err(|e| CliError::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("storybeam").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_args(&[]).0, EXIT_USAGE);
        assert_eq!(run_args(&["bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["decode", "--model", "m.json"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn condition_parsing() {
        let c = parse_conditions(&["a".into(), " b ".into()]).unwrap();
        assert_eq!(
            c.iter().map(Condition::as_str).collect::<Vec<_>>(),
            ["a", "b"]
        );
        assert!(parse_conditions(&[]).is_err());
        assert!(parse_conditions(&["".into()]).is_err());
    }
}
