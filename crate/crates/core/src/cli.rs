//! Command-line front end. Exit codes: 0 success, 1 runtime or numeric
//! failure, 2 usage or input error.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpusgen::{corpus_stats, synth_corpus, TemplateSet};
use crate::da::corpus::{load_corpus, write_corpus};
use crate::da::{lexicalise, parse_da, Ontology};
use crate::decoder::DecodeConfig;
use crate::error::{Error, Result};
use crate::experiment::{evaluate_baseline, evaluate_model, generator, train_model, Dataset, ModelSpec, MultiSeedReport};
use crate::net::gradcheck::{gradcheck, GradcheckConfig};
use crate::net::io::{encode_model, load_model, SavedModel};
use crate::net::GatingMode;
use crate::numkit::Rng;
use crate::trainer::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "sclstm", version, about = "Dialogue-act conditioned sentence generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic (DA, utterance) corpus and print its statistics.
    Synth(SynthArgs),
    /// Split a corpus 3:1:1 and train one model per seed.
    Train(TrainArgs),
    /// Read DAs (one per line) and print reranked realisations.
    Generate(GenerateArgs),
    /// Score models or the kNN baseline on the test split.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    /// Bundled ontology and templates: restaurant or hotel.
    #[arg(long, default_value = "restaurant")]
    pub domain: String,
    /// Ontology file overriding the bundled one.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
}

impl DomainArgs {
    fn ontology(&self) -> Result<Ontology> {
        match &self.ontology {
            Some(p) => Ontology::load(p),
            None => Ontology::preset(&self.domain).ok_or_else(|| unknown_domain(&self.domain)),
        }
    }
}

fn unknown_domain(d: &str) -> Error {
    Error::Input(format!("unknown domain `{d}` (expected restaurant or hotel)"))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Template file overriding the bundled one.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Chance of one synonym swap per sentence.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, short, default_value = "corpus.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 80)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// Inverted dropout on non-recurrent connections, including the output.
    #[arg(long, default_value_t = 0.4)]
    pub dropout: f64,
    /// learned, heuristic or none.
    #[arg(long, default_value = "learned")]
    pub gating: GatingMode,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        ModelSpec {
            hidden: self.hidden,
            layers: self.layers,
            dropout: self.dropout,
            gating: self.gating,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Train on the split as is, without replicating small DA groups.
    #[arg(long)]
    pub no_upsample: bool,
}

impl TrainingArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        let mut c = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        if let Some(e) = self.epochs {
            c.max_epochs = e;
        }
        if let Some(lr) = self.lr {
            c.learning_rate = lr;
        }
        if let Some(p) = self.patience {
            c.patience = p;
        }
        c.upsample = !self.no_upsample;
        c
    }
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long, default_value_t = 20)]
    pub n_overgen: usize,
    #[arg(long, default_value_t = 5)]
    pub n_best: usize,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 60)]
    pub max_len: usize,
}

impl DecodeArgs {
    fn config(&self) -> Result<DecodeConfig> {
        let c = DecodeConfig {
            n_overgen: self.n_overgen,
            n_best: self.n_best,
            lambda: self.lambda,
            max_len: self.max_len,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value = "models")]
    pub out: PathBuf,
    /// Comma-separated initialisation seeds, one model each.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub split_seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// DA file, one per line; standard input when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Directory of `seed-<n>.sclm` checkpoints. Without it, models are
    /// trained per seed first.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Score the nearest-neighbour baseline instead of a network.
    #[arg(long, value_parser = ["knn"])]
    pub baseline: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub split_seed: u64,
    /// Score the training split instead of the test split.
    #[arg(long)]
    pub on_train: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn checkpoint(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed-{seed}.sclm"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let ont = a.domain.ontology()?;
    let templates = match &a.templates {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::preset(&a.domain.domain).ok_or_else(|| unknown_domain(&a.domain.domain))?,
    };
    if !(0.0..=1.0).contains(&a.noise) {
        return Err(Error::Input("--noise must be in [0, 1]".into()));
    }
    let records = synth_corpus(&ont, &templates, a.n, &mut Rng::seed(a.seed), a.noise)?;
    let mut bytes = Vec::new();
    write_corpus(&mut bytes, &records).map_err(|e| Error::io(&a.out, e))?;
    write_file(&a.out, &bytes)?;

    let das: Vec<_> = records.iter().map(|r| parse_da(&r.da, &ont)).collect::<std::result::Result<_, _>>()?;
    let stats = corpus_stats(&das);
    let summary = format!(
        "sentences {}\ndistinct_das {}\nmean_slots_per_da {:.4}\n",
        stats.sentences, stats.distinct_das, stats.mean_slots_per_da
    );
    write_file(&a.out.with_extension("stats"), summary.as_bytes())?;
    write!(out, "wrote {}\n{summary}", a.out.display()).map_err(stdout_err)?;
    Ok(0)
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn dataset(corpus: &Path, domain: &DomainArgs, split_seed: u64) -> Result<Dataset> {
    let ont = domain.ontology()?;
    let examples = load_corpus(corpus, &ont)?;
    if examples.len() < 5 {
        return Err(Error::Input(format!("{}: need at least 5 examples to split", corpus.display())));
    }
    Ok(Dataset::from_examples(ont, examples, split_seed))
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    if a.seeds.is_empty() {
        return Err(Error::Input("--seeds must not be empty".into()));
    }
    let ds = dataset(&a.corpus, &a.domain, a.split_seed)?;
    writeln!(
        out,
        "split train {} valid {} test {}, vocab {}",
        ds.split.train.len(),
        ds.split.valid.len(),
        ds.split.test.len(),
        ds.vocab.len()
    )
    .map_err(stdout_err)?;
    for &seed in &a.seeds {
        let tcfg = a.training.config(seed);
        let mut log = String::new();
        let (mut model, history) = train_model(&ds, &a.model.spec(), &tcfg, |e| log.push_str(&format!("{e}\n")))?;
        model.meta.insert("split_seed".into(), a.split_seed.to_string());
        let path = checkpoint(&a.out, seed);
        write_file(&path, &encode_model(&model))?;
        write_file(&path.with_extension("log"), log.as_bytes())?;
        writeln!(
            out,
            "seed {seed}: best epoch {} valid cost {:.4} -> {}",
            history.best_epoch,
            history.best_valid_cost,
            path.display()
        )
        .map_err(stdout_err)?;
    }
    Ok(0)
}

fn cmd_generate(a: &GenerateArgs, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let model = load_model(&a.model)?;
    let dcfg = a.decode.config()?;
    let tcfg = TrainConfig::default();
    let gen = generator(&model, &tcfg);
    let mut rng = Rng::seed(a.seed);
    let mut bad = 0;
    let lines: Vec<String> = match &a.input {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?.lines().map(String::from).collect(),
        None => input
            .lines()
            .collect::<io::Result<_>>()
            .map_err(|e| Error::io("<stdin>", e))?,
    };
    for (i, line) in lines.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let da = match parse_da(line, &model.ontology) {
            Ok(da) => da,
            Err(e) => {
                writeln!(err, "line {}: {e}", i + 1).map_err(stdout_err)?;
                bad += 1;
                continue;
            }
        };
        for c in gen.rerank(&da, &dcfg, &mut rng)? {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.4}",
                lexicalise(&c.tokens, &da).text,
                c.score,
                c.f_cost,
                c.b_cost,
                c.err
            )
            .map_err(stdout_err)?;
        }
    }
    Ok(if bad > 0 { 2 } else { 0 })
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    if a.seeds.is_empty() {
        return Err(Error::Input("--seeds must not be empty".into()));
    }
    let mut ds = dataset(&a.corpus, &a.domain, a.split_seed)?;
    if a.on_train {
        ds.split.test = ds.split.train.clone();
    }
    writeln!(out, "test DAs {}", ds.split.test.len()).map_err(stdout_err)?;
    if a.baseline.is_some() {
        let r = evaluate_baseline(&ds)?;
        writeln!(
            out,
            "[knn]\nbleu4 {:.4}\nerr% {:.3}",
            r.bleu4, r.corpus_err_percent
        )
        .map_err(stdout_err)?;
        return Ok(0);
    }
    let dcfg = a.decode.config()?;
    let spec = a.model.spec();
    let mut report = MultiSeedReport {
        label: format!("sc-lstm gating={} layers={}", spec.gating, spec.layers),
        per_seed: Vec::new(),
    };
    for &seed in &a.seeds {
        let tcfg = a.training.config(seed);
        let model: SavedModel = match &a.models {
            Some(dir) => {
                let m = load_model(checkpoint(dir, seed))?;
                if m.vocab != ds.vocab {
                    return Err(Error::Input(format!(
                        "{}: vocabulary does not match this corpus and split",
                        checkpoint(dir, seed).display()
                    )));
                }
                if m.config.gating != spec.gating {
                    return Err(Error::Input(format!(
                        "checkpoint uses gating {} but --gating is {}",
                        m.config.gating, spec.gating
                    )));
                }
                m
            }
            None => train_model(&ds, &spec, &tcfg, |_| {})?.0,
        };
        let r = evaluate_model(&model, &ds, &tcfg, &dcfg, seed)?;
        report.push(seed, &r);
    }
    writeln!(out, "{report}").map_err(stdout_err)?;
    Ok(0)
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = GradcheckConfig {
        tolerance: a.tolerance,
        ..GradcheckConfig::default()
    };
    let report = gradcheck(&cfg, &mut Rng::seed(a.seed));
    writeln!(out, "{report}").map_err(stdout_err)?;
    Ok(if report.passed() { 0 } else { 1 })
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. } | Error::Diverged { .. } | Error::Shape(_) => 1,
        _ => 2,
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Generate(a) => cmd_generate(a, input, out, err),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
