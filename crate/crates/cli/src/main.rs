use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ipsift::classifier::{kfold_cv, train, write_cv_csv, Confusion, Hyperparams, Metrics, Model, TrainingExample};
use ipsift::corpus::{
    corpus_stats, load_forum_dump, load_labels, write_forum_dump, write_labels, ExampleKey, Forum, Label, LabelKind,
    LabeledExample,
};
use ipsift::extraction::WordRange;
use ipsift::features::FeatureSet;
use ipsift::pipeline::synthetic::{generate_multi_source, SyntheticSpec};
use ipsift::pipeline::{
    aggregate_report, characterization_examples, characterization_targets, compare_addresses, forum_candidates,
    identification_examples, identification_targets, identified_address_keys, read_mentions_csv, read_report_csv,
    run_characterization, run_identification, write_mentions_csv, write_report_csv, FileBlacklist, Identified,
};
use ipsift::transfer::{multi_source_cross_seed, Prediction, TargetInstance, TransferConfig};

#[derive(Parser)]
#[command(name = "ipsift", version, about = "Find, vet and characterize IPv4 addresses in forum dumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Window {
    /// Context words kept on each side of a candidate.
    #[arg(long, default_value_t = 2)]
    word_range: usize,
}

impl Window {
    fn range(self) -> Result<WordRange> {
        Ok(WordRange::new(self.word_range)?)
    }
}

#[derive(Args, Clone, Copy)]
struct Training {
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

impl Training {
    fn hyperparams(self) -> Result<Hyperparams<f64>> {
        let hp = Hyperparams {
            l2_lambda: self.l2,
            learning_rate: self.learning_rate,
            max_epochs: self.epochs,
            tolerance: self.tolerance,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a forum dump and print its post, thread and user counts.
    Ingest {
        input: PathBuf,
        /// Write the validated dump back out, sorted by thread and time.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List every dot-decimal candidate as `post_id,span_start,span_end,raw`.
    Extract {
        forum: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train an identification model (genuine address vs look-alike).
    TrainIdent {
        forum: PathBuf,
        labels: PathBuf,
        #[command(flatten)]
        window: Window,
        /// textinfo, decimalval or mixed.
        #[arg(long, default_value = "mixed")]
        feature_set: FeatureSet,
        #[command(flatten)]
        training: Training,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train a characterization model (malicious vs benign mention).
    TrainChar {
        forum: PathBuf,
        labels: PathBuf,
        /// posttext or contextinfo.
        #[arg(long, default_value = "posttext")]
        feature_set: FeatureSet,
        #[command(flatten)]
        training: Training,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train a target-forum model from labeled source forums and an unlabeled target.
    CrossSeed {
        /// Labeled source forum dump; repeat for several sources.
        #[arg(long, required = true)]
        source: Vec<PathBuf>,
        /// Label CSV for each `--source`, in the same order.
        #[arg(long, required = true)]
        source_labels: Vec<PathBuf>,
        #[arg(long)]
        target: PathBuf,
        /// Target labels, used only to score the run.
        #[arg(long)]
        target_labels: Option<PathBuf>,
        /// Identification model choosing which target mentions to characterize.
        #[arg(long)]
        ident_model: Option<PathBuf>,
        #[arg(long, default_value = "mixed")]
        ident_feature_set: FeatureSet,
        #[arg(long, default_value = "posttext")]
        feature_set: FeatureSet,
        #[command(flatten)]
        window: Window,
        #[arg(long, default_value_t = 0.85)]
        threshold: f64,
        #[arg(long, default_value_t = 10)]
        min_seed: usize,
        #[command(flatten)]
        training: Training,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score every candidate of a forum with an identification model.
    Identify {
        forum: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long, default_value = "mixed")]
        feature_set: FeatureSet,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score identified addresses as malicious or benign, writing a mentions CSV.
    Characterize {
        forum: PathBuf,
        /// Output of `identify`.
        #[arg(long)]
        identified: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "posttext")]
        feature_set: FeatureSet,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Aggregate a mentions CSV into one row per address.
    Report {
        mentions: PathBuf,
        /// Forum dump supplying mention timestamps.
        #[arg(long)]
        forum: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the malicious addresses of a report against a blacklist file.
    CompareBlacklist {
        report: PathBuf,
        #[arg(long)]
        blacklist: PathBuf,
        /// Compare every reported address, benign verdicts included.
        #[arg(long)]
        all: bool,
    },
    /// Generate synthetic labeled forums.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2000)]
        posts: usize,
        #[arg(long, default_value_t = 24)]
        vocab_size: usize,
        /// Fraction of signal words a source does not share with the target.
        #[arg(long, default_value_t = 0.0)]
        shift: f64,
        #[arg(long, default_value_t = 0.0)]
        label_noise: f64,
        #[arg(long, default_value_t = 1)]
        sources: usize,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
    },
    /// Stratified k-fold cross-validation, written as a CV CSV.
    Eval {
        forum: PathBuf,
        labels: PathBuf,
        #[arg(long, default_value = "mixed")]
        feature_set: FeatureSet,
        #[command(flatten)]
        window: Window,
        #[arg(long, default_value_t = 10)]
        kfold: usize,
        #[command(flatten)]
        training: Training,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { input, output } => ingest(&input, output.as_deref()),
        Command::Extract { forum, output } => extract(&forum, output.as_deref()),
        Command::TrainIdent { forum, labels, window, feature_set, training, model } => {
            let forum = load_forum_dump(&forum)?;
            let labels = load_labels(&labels, LabelKind::Identification)?;
            let examples = identification_examples(&forum, &labels, window.range()?, feature_set)?;
            fit(&examples, training, &model)
        }
        Command::TrainChar { forum, labels, feature_set, training, model } => {
            let forum = load_forum_dump(&forum)?;
            let labels = load_labels(&labels, LabelKind::Characterization)?;
            let examples = characterization_examples(&forum, &labels, feature_set)?;
            fit(&examples, training, &model)
        }
        Command::CrossSeed {
            source,
            source_labels,
            target,
            target_labels,
            ident_model,
            ident_feature_set,
            feature_set,
            window,
            threshold,
            min_seed,
            training,
            out_dir,
        } => {
            if source.len() != source_labels.len() {
                bail!("{} --source dumps but {} --source-labels files", source.len(), source_labels.len());
            }
            let config = TransferConfig {
                threshold,
                min_seed_per_class: min_seed,
                per_class_cap: None,
                hyperparams: training.hyperparams()?,
                rng_seed: training.rng_seed,
            };
            config.validate()?;
            let job = CrossSeedJob {
                sources: source.iter().zip(&source_labels).collect(),
                target: &target,
                target_labels: target_labels.as_deref(),
                ident_model: ident_model.as_deref(),
                ident_feature_set,
                feature_set,
                range: window.range()?,
            };
            cross_seed(&job, &config, &out_dir)
        }
        Command::Identify { forum, model, window, feature_set, output } => {
            let forum = load_forum_dump(&forum)?;
            let model = Model::<f64>::load(&model)?;
            let identified = run_identification(&forum, &model, window.range()?, feature_set)?;
            let mut w = csv::Writer::from_writer(sink(output.as_deref())?);
            w.write_record(["post_id", "span_start", "span_end", "raw", "p_is_ip"])?;
            for i in &identified {
                let c = &i.candidate;
                w.write_record([&c.post_id, &c.span.0.to_string(), &c.span.1.to_string(), &c.raw, &i.p_is_ip.to_string()])?;
            }
            w.flush()?;
            let accepted = identified.iter().filter(|i| i.p_is_ip >= 0.5).count();
            eprintln!("{accepted} of {} candidates identified as addresses", identified.len());
            Ok(())
        }
        Command::Characterize { forum, identified, model, feature_set, output } => {
            let forum = load_forum_dump(&forum)?;
            let identified = read_identified(&forum, &identified)?;
            let model = Model::<f64>::load(&model)?;
            let mentions = run_characterization(&identified, &forum, &model, feature_set)?;
            write_mentions_csv(&mentions, sink(output.as_deref())?)?;
            let malicious = mentions.iter().filter(|m| m.p_malicious >= 0.5).count();
            eprintln!("{malicious} of {} mentions scored malicious", mentions.len());
            Ok(())
        }
        Command::Report { mentions, forum, output } => {
            let forum = forum.map(load_forum_dump).transpose()?;
            let file = File::open(&mentions).with_context(|| format!("opening {}", mentions.display()))?;
            let mentions = read_mentions_csv::<f64, _>(file, forum.as_ref())?;
            let reports = aggregate_report(&mentions);
            write_report_csv(&reports, sink(output.as_deref())?)?;
            eprintln!("{} addresses from {} mentions", reports.len(), mentions.len());
            Ok(())
        }
        Command::CompareBlacklist { report, blacklist, all } => {
            let file = File::open(&report).with_context(|| format!("opening {}", report.display()))?;
            let rows = read_report_csv(file)?;
            let addresses = rows.iter().filter(|r| all || r.verdict == Label::Positive).map(|r| r.address.as_str());
            let overlap = compare_addresses(addresses, &FileBlacklist::new(blacklist))?;
            println!("{}", serde_json::to_string_pretty(&overlap)?);
            Ok(())
        }
        Command::Synth { out_dir, posts, vocab_size, shift, label_noise, sources, rng_seed } => {
            let spec = SyntheticSpec {
                vocab_size,
                posts_per_forum: posts,
                vocabulary_shift: shift,
                label_noise,
                rng_seed,
            };
            let corpus = generate_multi_source(&spec, sources)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            for f in corpus.sources.iter().chain([&corpus.target]) {
                let id = &f.forum.forum_id;
                write_forum_dump(&f.forum, create(&out_dir.join(format!("{id}.jsonl")))?)?;
                let ident = create(&out_dir.join(format!("{id}.ident.csv")))?;
                write_labels(&f.identification, LabelKind::Identification, ident)?;
                let charac = create(&out_dir.join(format!("{id}.char.csv")))?;
                write_labels(&f.characterization, LabelKind::Characterization, charac)?;
                eprintln!("{id}: {} posts, {} candidates", f.forum.len(), f.identification.len());
            }
            Ok(())
        }
        Command::Eval { forum, labels, feature_set, window, kfold, training, output } => {
            let forum = load_forum_dump(&forum)?;
            let examples = if feature_set.is_identification() {
                let labels = load_labels(&labels, LabelKind::Identification)?;
                identification_examples(&forum, &labels, window.range()?, feature_set)?
            } else {
                let labels = load_labels(&labels, LabelKind::Characterization)?;
                characterization_examples(&forum, &labels, feature_set)?
            };
            let report = kfold_cv(&examples, kfold, &training.hyperparams()?, training.rng_seed)?;
            write_cv_csv(&report, sink(output.as_deref())?)?;
            let m = report.mean;
            eprintln!("{feature_set}: precision {:.4} recall {:.4} accuracy {:.4}", m.precision, m.recall, m.accuracy);
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// A file when `path` is given, stdout otherwise.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn ingest(input: &Path, output: Option<&Path>) -> Result<()> {
    let forum = load_forum_dump(input)?;
    let stats = corpus_stats(&forum);
    println!(
        "{}",
        serde_json::json!({ "forum_id": forum.forum_id, "posts": stats.posts, "threads": stats.threads, "users": stats.users })
    );
    if let Some(out) = output {
        write_forum_dump(&forum, create(out)?)?;
    }
    Ok(())
}

fn extract(forum: &Path, output: Option<&Path>) -> Result<()> {
    let forum = load_forum_dump(forum)?;
    let mut w = csv::Writer::from_writer(sink(output)?);
    w.write_record(["post_id", "span_start", "span_end", "raw"])?;
    for c in forum_candidates(&forum, WordRange::default()) {
        w.write_record([&c.post_id, &c.span.0.to_string(), &c.span.1.to_string(), &c.raw])?;
    }
    w.flush()?;
    Ok(())
}

fn fit(examples: &[TrainingExample<f64>], training: Training, path: &Path) -> Result<()> {
    let model = train(examples, &training.hyperparams()?, training.rng_seed)?;
    model.save(path)?;
    eprintln!(
        "trained on {} examples, {} dimensions, {} epochs",
        examples.len(),
        model.weights().len(),
        model.epochs()
    );
    Ok(())
}

/// Rebuild `identify` output against the forum's candidates.
fn read_identified(forum: &Forum, path: &Path) -> Result<Vec<Identified<f64>>> {
    let mut by_span: HashMap<(String, usize, usize), _> = forum_candidates(forum, WordRange::default())
        .into_iter()
        .map(|c| ((c.post_id.clone(), c.span.0, c.span.1), c))
        .collect();
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).with_context(|| format!("row {}: missing column {}", i + 2, j + 1));
        let key = (field(0)?.to_string(), field(1)?.parse()?, field(2)?.parse()?);
        let p_is_ip: f64 = field(4)?.parse()?;
        let candidate = by_span
            .remove(&key)
            .with_context(|| format!("row {}: no candidate at {}[{}..{}]", i + 2, key.0, key.1, key.2))?;
        out.push(Identified { candidate, p_is_ip });
    }
    Ok(out)
}

struct CrossSeedJob<'a> {
    sources: Vec<(&'a PathBuf, &'a PathBuf)>,
    target: &'a Path,
    target_labels: Option<&'a Path>,
    ident_model: Option<&'a Path>,
    ident_feature_set: FeatureSet,
    feature_set: FeatureSet,
    range: WordRange,
}

fn cross_seed(job: &CrossSeedJob, config: &TransferConfig<f64>, out_dir: &Path) -> Result<()> {
    let kind = if job.feature_set.is_identification() {
        LabelKind::Identification
    } else {
        LabelKind::Characterization
    };
    let mut sources = Vec::with_capacity(job.sources.len());
    for (dump, labels) in &job.sources {
        let forum = load_forum_dump(dump)?;
        let labels = load_labels(labels, kind)?;
        sources.push(match kind {
            LabelKind::Identification => identification_examples(&forum, &labels, job.range, job.feature_set)?,
            LabelKind::Characterization => characterization_examples(&forum, &labels, job.feature_set)?,
        });
    }

    let target = load_forum_dump(job.target)?;
    let targets: Vec<TargetInstance<f64>> = match kind {
        LabelKind::Identification => identification_targets(&target, job.range, job.feature_set)?,
        LabelKind::Characterization => {
            let keys = match job.ident_model {
                Some(path) => {
                    let model = Model::<f64>::load(path)?;
                    identified_address_keys(&run_identification(&target, &model, job.range, job.ident_feature_set)?)
                }
                None => candidate_address_keys(&target),
            };
            characterization_targets(&target, &keys, job.feature_set)?
        }
    };

    let outcome = multi_source_cross_seed(&sources, &targets, config)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    outcome.model.save(out_dir.join("model.json"))?;
    outcome.seed.write_csv(create(&out_dir.join("seed.csv"))?)?;
    serde_json::to_writer_pretty(create(&out_dir.join("manifest.json"))?, &outcome.manifest)?;
    write_predictions(&outcome.predictions, kind, create(&out_dir.join("predictions.csv"))?)?;
    let m = &outcome.manifest;
    eprintln!(
        "seed {} positive / {} negative at threshold {} over {} target instances",
        m.seed_positive, m.seed_negative, m.final_threshold, m.target_instances
    );

    if let Some(path) = job.target_labels {
        let truth: BTreeMap<ExampleKey, Label> =
            load_labels(path, kind)?.into_iter().map(|l: LabeledExample| (l.key, l.label)).collect();
        let mut w = csv::Writer::from_writer(create(&out_dir.join("eval.csv"))?);
        w.write_record(["run", "precision", "recall", "accuracy"])?;
        for (run, preds) in [("cross-port", &outcome.cross_port), ("cross-seed", &outcome.predictions)] {
            let m = score(preds, &truth);
            w.write_record([run, &m.precision.to_string(), &m.recall.to_string(), &m.accuracy.to_string()])?;
            eprintln!("{run}: precision {:.4} recall {:.4} accuracy {:.4}", m.precision, m.recall, m.accuracy);
        }
        w.flush()?;
    }
    Ok(())
}

/// Every distinct `(post, address)` pair among the forum's candidates.
fn candidate_address_keys(forum: &Forum) -> Vec<ExampleKey> {
    let mut seen = HashSet::new();
    forum_candidates(forum, WordRange::default())
        .into_iter()
        .map(|c| ExampleKey::Address { address: c.address(), post_id: c.post_id })
        .filter(|k| seen.insert(k.clone()))
        .collect()
}

/// Metrics over the predictions whose key has a label.
fn score(predictions: &[Prediction<f64>], truth: &BTreeMap<ExampleKey, Label>) -> Metrics {
    let mut c = Confusion::default();
    for p in predictions {
        if let Some(&actual) = truth.get(&p.key) {
            c.add(p.label, actual);
        }
    }
    Metrics::from(c)
}

fn write_predictions(predictions: &[Prediction<f64>], kind: LabelKind, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "p_positive", "label"])?;
    for p in predictions {
        w.write_record([p.key.to_string(), p.p.to_string(), kind.token(p.label).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
