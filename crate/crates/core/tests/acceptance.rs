//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! with the measured numbers and wall time, and exits non-zero if any fails.
//!
//! Run with `cargo test -p ipsift-core --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ipsift::classifier::{
    evaluate, gradient, kfold_cv, objective, train, Hyperparams, Model, TrainingExample,
};
use ipsift::corpus::{balanced_sample, ExampleKey, Forum, Label, LabeledExample, Post};
use ipsift::extraction::{extract_candidates, parse_dotted_quad, WordRange};
use ipsift::features::{build_space, Dimension, FeatureSet, FeatureSpace, FeatureVector, SpaceOptions};
use ipsift::pipeline::synthetic::{generate_multi_source, generate_synthetic, SyntheticForum, SyntheticSpec};
use ipsift::pipeline::{
    aggregate_report, characterization_examples, characterization_targets, identification_examples,
    read_mentions_csv, read_report_csv, run_characterization, run_identification, write_mentions_csv,
    write_report_csv,
};
use ipsift::transfer::{
    cross_seed, multi_source_cross_seed, seed_candidates, select_seed, Prediction, TargetInstance,
    TransferConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 10] = [
        ("1 gradient vs finite differences", Duration::from_secs(5), gradient_check),
        ("2 tf-idf vs brute-force oracle", Duration::from_secs(1), tfidf_oracle),
        ("3 extraction vs brute-force scan", Duration::from_secs(60), extraction_fuzz),
        ("4 identification in-domain", Duration::from_secs(60), identification_in_domain),
        ("5 word-range ordering", Duration::from_secs(60), word_range_ordering),
        ("6 cross-seed beats cross-port", Duration::from_secs(120), cross_seed_vs_port),
        ("7 multi-source gain", Duration::from_secs(120), multi_source_gain),
        ("8 seed-set properties", Duration::from_secs(30), seed_properties),
        ("9 pipeline determinism", Duration::from_secs(120), pipeline_determinism),
        ("10 metrics vs brute-force counting", Duration::from_secs(60), metrics_oracle),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {name}: {} ({:.2}s, limit {}s{})",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" },
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn word_space(dims: usize) -> Arc<FeatureSpace<f64>> {
    let doc: Vec<String> = (0..dims).map(|i| format!("w{i}")).collect();
    Arc::new(build_space(&[doc], SpaceOptions::default()).unwrap())
}

fn span_key(i: usize) -> ExampleKey {
    ExampleKey::Span {
        post_id: format!("p{i}"),
        start: 0,
        end: 0,
    }
}

fn random_entries(rng: &mut ChaCha8Rng, dims: usize, density: f64, bound: f64) -> Vec<(usize, f64)> {
    let mut entries = Vec::new();
    for j in 0..dims {
        if rng.gen_bool(density) {
            entries.push((j, rng.gen_range(-bound..bound)));
        }
    }
    entries
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances = 200;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dims = rng.gen_range(1..=10);
        let n = rng.gen_range(1..=20);
        let space = word_space(dims);
        let data: Vec<TrainingExample<f64>> = (0..n)
            .map(|i| {
                let entries = random_entries(&mut rng, dims, 0.7, 3.0);
                TrainingExample {
                    key: span_key(i),
                    label: Label::from_bool(rng.gen_bool(0.5)),
                    vector: FeatureVector::from_entries(Arc::clone(&space), entries).unwrap(),
                }
            })
            .collect();
        let w: Vec<f64> = (0..dims).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let lambda = rng.gen_range(0.0..0.1);
        let (gw, gb) = gradient(&w, b, &data, lambda);

        let h = 1e-5;
        let mut fd = Vec::with_capacity(dims + 1);
        for j in 0..dims {
            let (mut hi, mut lo) = (w.clone(), w.clone());
            hi[j] += h;
            lo[j] -= h;
            fd.push((objective(&hi, b, &data, lambda) - objective(&lo, b, &data, lambda)) / (2.0 * h));
        }
        fd.push((objective(&w, b + h, &data, lambda) - objective(&w, b - h, &data, lambda)) / (2.0 * h));
        let analytic: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        let diff = analytic.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|f| f * f).sum::<f64>().sqrt());
        worst = worst.max(diff / norm.max(1e-12));
    }
    Outcome::new(worst <= 1e-5, format!("{instances} instances, worst relative error {worst:.2e}"))
}

/// Characterization documents are whole posts minus the address, so a post
/// built from space-separated lowercase words has an obvious bag of words.
fn tfidf_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vocab = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta"];
    let mut corpora = 0;
    let mut worst: f64 = 0.0;
    let mut structural = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let docs: Vec<Vec<&str>> = (0..n)
            .map(|_| (0..rng.gen_range(1..8)).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect())
            .collect();
        let posts: Vec<Post> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| Post {
                forum_id: "f".into(),
                thread_id: "t".into(),
                post_id: format!("p{i}"),
                author_id: "u".into(),
                timestamp: i as u64,
                body: format!("{} 10.0.0.{i}", d.join(" ")),
            })
            .collect();
        let forum = Forum::new("f", posts).unwrap();
        let labels: Vec<LabeledExample> = (0..n)
            .map(|i| LabeledExample {
                key: ExampleKey::Address {
                    post_id: format!("p{i}"),
                    address: format!("10.0.0.{i}"),
                },
                label: Label::Positive,
            })
            .collect();
        let examples = characterization_examples::<f64>(&forum, &labels, FeatureSet::PostText).unwrap();
        corpora += 1;

        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            for w in d.iter().collect::<BTreeSet<_>>() {
                *df.entry(w).or_default() += 1;
            }
        }
        for (d, ex) in docs.iter().zip(&examples) {
            if ex.vector.nnz() != d.iter().collect::<BTreeSet<_>>().len() {
                structural += 1;
            }
            for w in d {
                let tf = d.iter().filter(|x| *x == w).count() as f64;
                let idf = (n as f64 / (1.0 + df[w] as f64)).ln() + 1.0;
                let got = ex.vector.get(&Dimension::Word(w.to_string())).unwrap_or(f64::NAN);
                let err = (got - tf * idf).abs();
                worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && structural == 0,
        format!("{corpora} corpora, max abs error {worst:.1e}, {structural} dimension mismatches"),
    )
}

fn fuzz_string(rng: &mut ChaCha8Rng) -> String {
    let words = ["see", "host", "at", "Clockworkmod", "v", "ip", "x", "über", "build"];
    let mut parts = Vec::new();
    for _ in 0..rng.gen_range(1..=5) {
        let piece = match rng.gen_range(0..9) {
            0 => format!("{}.{}.{}.{}", rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(0..256)),
            1 => format!("{}.{}.{}.{}", rng.gen_range(0..400), rng.gen_range(0..999), rng.gen_range(0..300), rng.gen_range(250..1000)),
            2 => format!("{}.{}", rng.gen_range(0..20), rng.gen_range(0..100)),
            3 => format!("{}.{}.{}", rng.gen_range(0..20), rng.gen_range(0..100), rng.gen_range(0..999)),
            4 => format!("{}.{}.{}.{}.{}", rng.gen_range(0..9), rng.gen_range(0..9), rng.gen_range(0..99), rng.gen_range(0..99), rng.gen_range(0..9)),
            5 => format!("http://{}.{}.{}.{}:{}/index.php?id=1", rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(1..9000)),
            6 => format!("00{}.0{}.{}.{}", rng.gen_range(0..10), rng.gen_range(0..99), rng.gen_range(0..256), rng.gen_range(0..256)),
            7 => format!("{}{}.{}.{}.{}", words[rng.gen_range(0..words.len())], rng.gen_range(0..9), rng.gen_range(0..9), rng.gen_range(0..9), rng.gen_range(0..9)),
            _ => words[rng.gen_range(0..words.len())].to_string(),
        };
        parts.push(piece);
    }
    let seps = [" ", ", ", ". ", " (", ") ", "\n", "/", "-", "..", " \u{2014} "];
    let mut s = String::new();
    for p in parts {
        s.push_str(&p);
        s.push_str(seps[rng.gen_range(0..seps.len())]);
    }
    if rng.gen_bool(0.5) {
        s.pop();
    }
    s
}

/// Every `[i, j)` char range that reads as four dot-separated digit runs of
/// value at most 255, bounded on both sides by neither an alphanumeric nor a
/// dot that continues a number.
fn scan_oracle(s: &str) -> Vec<(usize, usize, String)> {
    let cs: Vec<(usize, char)> = s.char_indices().collect();
    let byte = |k: usize| cs.get(k).map_or(s.len(), |&(b, _)| b);
    let digit = |k: usize| cs.get(k).is_some_and(|&(_, c)| c.is_ascii_digit());
    let mut out = Vec::new();
    for i in 0..cs.len() {
        for j in i + 1..=cs.len() {
            let text = &s[byte(i)..byte(j)];
            let fields: Vec<&str> = text.split('.').collect();
            let quad = fields.len() == 4
                && fields.iter().all(|f| {
                    !f.is_empty()
                        && f.chars().all(|c| c.is_ascii_digit())
                        && f.trim_start_matches('0').len() <= 3
                        && f.parse::<u64>().is_ok_and(|v| v <= 255)
                });
            if !quad {
                continue;
            }
            let left_open = i == 0
                || !(cs[i - 1].1.is_alphanumeric() || (cs[i - 1].1 == '.' && i >= 2 && digit(i - 2)));
            let right_open = j == cs.len() || !(cs[j].1.is_alphanumeric() || (cs[j].1 == '.' && digit(j + 1)));
            if left_open && right_open {
                out.push((byte(i), byte(j), text.to_string()));
            }
        }
    }
    out
}

fn extract(s: &str) -> Vec<(usize, usize, String)> {
    let post = Post {
        forum_id: "f".into(),
        thread_id: "t".into(),
        post_id: "p".into(),
        author_id: "u".into(),
        timestamp: 0,
        body: s.to_string(),
    };
    extract_candidates(&post, WordRange::default())
        .into_iter()
        .map(|c| (c.span.0, c.span.1, c.raw))
        .collect()
}

fn extraction_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut corpus: Vec<String> = vec![
        "Edit the hosts file and add 64.91.255.87 to it".into(),
        "Clockworkmod 2.25.100.15".into(),
        "256.1.1.1".into(),
    ];
    while corpus.len() < 500 {
        corpus.push(fuzz_string(&mut rng));
    }
    let mut discrepancies = 0;
    let mut found = 0;
    for s in &corpus {
        let (got, want) = (extract(s), scan_oracle(s));
        found += want.len();
        if got != want {
            discrepancies += 1;
        }
    }
    let literal = extract(&corpus[0]).iter().any(|c| c.2 == "64.91.255.87")
        && extract(&corpus[1]).iter().any(|c| c.2 == "2.25.100.15")
        && extract(&corpus[2]).is_empty()
        && parse_dotted_quad("256.1.1.1").is_none();
    Outcome::new(
        discrepancies == 0 && literal,
        format!(
            "{} strings, {found} oracle candidates, {discrepancies} discrepancies, literal examples {}",
            corpus.len(),
            if literal { "ok" } else { "WRONG" }
        ),
    )
}

fn cv_accuracy(forum: &SyntheticForum, set: FeatureSet, w: usize, seed: u64) -> f64 {
    let labels = balanced_sample(&forum.identification, seed).unwrap();
    let examples =
        identification_examples::<f64>(&forum.forum, &labels, WordRange::new(w).unwrap(), set).unwrap();
    kfold_cv(&examples, 10, &Hyperparams::default(), seed).unwrap().mean.accuracy
}

fn identification_in_domain() -> Outcome {
    let seeds = 5;
    let (mut mixed, mut decimal) = (0.0, 0.0);
    let mut fewest = usize::MAX;
    for seed in 0..seeds {
        let spec = SyntheticSpec {
            posts_per_forum: 2200,
            label_noise: 0.02,
            rng_seed: seed,
            ..SyntheticSpec::default()
        };
        let corpus = generate_synthetic(&spec).unwrap();
        let forum = corpus.source();
        fewest = fewest.min(balanced_sample(&forum.identification, seed).unwrap().len());
        mixed += cv_accuracy(forum, FeatureSet::Mixed, 2, seed) / seeds as f64;
        decimal += cv_accuracy(forum, FeatureSet::DecimalVal, 2, seed) / seeds as f64;
    }
    Outcome::new(
        fewest >= 2000 && mixed >= 0.95 && mixed >= decimal && decimal >= 0.5,
        format!("min {fewest} balanced candidates; mean accuracy Mixed {mixed:.4}, DecimalVal {decimal:.4}"),
    )
}

fn word_range_ordering() -> Outcome {
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 0..5 {
        let spec = SyntheticSpec {
            posts_per_forum: 1000,
            label_noise: 0.02,
            rng_seed: 100 + seed,
            ..SyntheticSpec::default()
        };
        let corpus = generate_synthetic(&spec).unwrap();
        let acc: Vec<f64> = [1, 2, 10]
            .iter()
            .map(|&w| cv_accuracy(corpus.source(), FeatureSet::TextInfo, w, seed))
            .collect();
        if acc[0] >= acc[2] && acc[1] >= acc[2] {
            wins += 1;
        }
        rows.push(format!("{:.3}/{:.3}/{:.3}", acc[0], acc[1], acc[2]));
    }
    Outcome::new(
        wins >= 4,
        format!("W=1,2 >= W=10 in {wins}/5 seeds; accuracy W1/W2/W10 per seed {}", rows.join(" ")),
    )
}

fn precision_recall(preds: &[Prediction<f64>], truth: &BTreeMap<ExampleKey, Label>) -> (f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for p in preds {
        match (p.label, truth[&p.key]) {
            (Label::Positive, Label::Positive) => tp += 1.0,
            (Label::Positive, Label::Negative) => fp += 1.0,
            (Label::Negative, Label::Positive) => fn_ += 1.0,
            _ => {}
        }
    }
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    (ratio(tp, tp + fp), ratio(tp, tp + fn_))
}

fn truth(forum: &SyntheticForum) -> BTreeMap<ExampleKey, Label> {
    forum.characterization.iter().map(|l| (l.key.clone(), l.label)).collect()
}

fn char_targets(forum: &SyntheticForum) -> Vec<TargetInstance<f64>> {
    let keys: Vec<ExampleKey> = forum.characterization.iter().map(|l| l.key.clone()).collect();
    characterization_targets(&forum.forum, &keys, FeatureSet::PostText).unwrap()
}

fn char_examples(forum: &SyntheticForum) -> Vec<TrainingExample<f64>> {
    characterization_examples(&forum.forum, &forum.characterization, FeatureSet::PostText).unwrap()
}

fn transfer_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        posts_per_forum: 1200,
        vocabulary_shift: 0.5,
        rng_seed: 1000 + seed,
        ..SyntheticSpec::default()
    }
}

fn cross_seed_vs_port() -> Outcome {
    let trials = 10;
    let (mut port, mut seeded) = ((0.0, 0.0), (0.0, 0.0));
    let mut worst_gap = f64::INFINITY;
    for t in 0..trials {
        let corpus = generate_synthetic(&transfer_spec(t)).unwrap();
        let truth = truth(&corpus.target);
        let out = cross_seed(&char_examples(corpus.source()), &char_targets(&corpus.target), &TransferConfig::default())
            .unwrap();
        let (pp, pr) = precision_recall(&out.cross_port, &truth);
        let (sp, sr) = precision_recall(&out.predictions, &truth);
        worst_gap = worst_gap.min((sp - pp).min(sr - pr));
        port = (port.0 + pp / trials as f64, port.1 + pr / trials as f64);
        seeded = (seeded.0 + sp / trials as f64, seeded.1 + sr / trials as f64);
    }
    let pass = seeded.0 - port.0 >= 0.05 && seeded.1 - port.1 >= 0.05 && worst_gap >= -0.01;
    Outcome::new(
        pass,
        format!(
            "precision {:.3} vs {:.3}, recall {:.3} vs {:.3} (cross-seed vs cross-port), worst per-trial gap {:+.3}",
            seeded.0, port.0, seeded.1, port.1, worst_gap
        ),
    )
}

fn multi_source_gain() -> Outcome {
    let trials = 10;
    let (mut multi_mean, mut single_mean) = (0.0, 0.0);
    let mut every = true;
    let mut rows = Vec::new();
    for t in 0..trials {
        let corpus = generate_multi_source(&transfer_spec(t), 2).unwrap();
        let truth = truth(&corpus.target);
        let targets = char_targets(&corpus.target);
        let sources: Vec<Vec<TrainingExample<f64>>> = corpus.sources.iter().map(char_examples).collect();
        let cfg = TransferConfig::default();
        let best_single = sources
            .iter()
            .map(|s| precision_recall(&cross_seed(s, &targets, &cfg).unwrap().predictions, &truth).0)
            .fold(0.0, f64::max);
        let multi = precision_recall(&multi_source_cross_seed(&sources, &targets, &cfg).unwrap().predictions, &truth).0;
        every &= multi >= best_single - 0.01;
        multi_mean += multi / trials as f64;
        single_mean += best_single / trials as f64;
        rows.push(format!("{multi:.3}/{best_single:.3}"));
    }
    Outcome::new(
        every && multi_mean > single_mean,
        format!(
            "mean precision multi {multi_mean:.4} vs best single {single_mean:.4}; per trial {}",
            rows.join(" ")
        ),
    )
}

fn seed_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for _ in 0..100 {
        let dims = rng.gen_range(1..=6);
        let space = word_space(dims);
        let weights: Vec<f64> = (0..dims).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let model = Model::from_parts(Arc::clone(&space), weights, rng.gen_range(-1.0..1.0)).unwrap();
        let targets: Vec<TargetInstance<f64>> = (0..rng.gen_range(1..60))
            .map(|i| TargetInstance {
                key: span_key(i),
                vector: FeatureVector::from_entries(
                    Arc::clone(&space),
                    random_entries(&mut rng, dims, 0.6, 2.0),
                )
                .unwrap(),
            })
            .collect();
        let preds = ipsift::transfer::cross_port(&model, &targets);
        let strict: BTreeSet<usize> = seed_candidates(&preds, 0.90).into_iter().collect();
        let loose: BTreeSet<usize> = seed_candidates(&preds, 0.85).into_iter().collect();
        if !strict.is_subset(&loose) {
            violations += 1;
        }
    }

    // One negative lies far from the boundary, the rest sit near it, so the
    // ladder has to walk down before both classes reach the minimum.
    let space = word_space(1);
    let model = Model::from_parts(Arc::clone(&space), vec![1.0], 0.0).unwrap();
    let xs = [-3.0, -0.5, -0.45, 0.4, 2.5, 3.0];
    let targets: Vec<TargetInstance<f64>> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| TargetInstance {
            key: span_key(i),
            vector: FeatureVector::from_entries(Arc::clone(&space), vec![(0, x)]).unwrap(),
        })
        .collect();
    let cfg = TransferConfig {
        min_seed_per_class: 2,
        ..TransferConfig::default()
    };
    let seed = select_seed(&model, &targets, &cfg, "ladder").unwrap();
    let ladder_ok = (seed.threshold - 0.6).abs() < 1e-12 && seed.requested_threshold == 0.85;

    let corpus = generate_synthetic(&SyntheticSpec {
        posts_per_forum: 1200,
        rng_seed: 8,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let forum = corpus.source();
    let all = char_examples(forum);
    let (train_set, test_set): (Vec<_>, Vec<_>) = all.into_iter().enumerate().partition(|(i, _)| i % 2 == 0);
    let train_set: Vec<TrainingExample<f64>> = train_set.into_iter().map(|(_, e)| e).collect();
    let test_set: Vec<TrainingExample<f64>> = test_set.into_iter().map(|(_, e)| e).collect();
    let direct = evaluate(&train(&train_set, &Hyperparams::default(), 0).unwrap(), &test_set).unwrap().accuracy;
    let targets: Vec<TargetInstance<f64>> = test_set
        .iter()
        .map(|e| TargetInstance {
            key: e.key.clone(),
            vector: e.vector.clone(),
        })
        .collect();
    let out = cross_seed(&train_set, &targets, &TransferConfig::with_threshold(0.55).unwrap()).unwrap();
    let truth: BTreeMap<ExampleKey, Label> = test_set.iter().map(|e| (e.key.clone(), e.label)).collect();
    let transferred =
        out.predictions.iter().filter(|p| p.label == truth[&p.key]).count() as f64 / out.predictions.len() as f64;

    Outcome::new(
        violations == 0 && ladder_ok && (transferred - direct).abs() <= 0.05,
        format!(
            "{violations} subset violations in 100 instances; ladder stopped at {:.2} (requested {:.2}); self-transfer accuracy {transferred:.4} vs direct {direct:.4}",
            seed.threshold, seed.requested_threshold
        ),
    )
}

fn pipeline_run(seed: u64) -> (Vec<u8>, Vec<u8>, Forum) {
    let corpus = generate_synthetic(&SyntheticSpec {
        posts_per_forum: 600,
        label_noise: 0.02,
        rng_seed: seed,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let src = corpus.source();
    let range = WordRange::default();
    let ident = identification_examples::<f64>(&src.forum, &src.identification, range, FeatureSet::Mixed).unwrap();
    let ident_model = train(&ident, &Hyperparams::default(), seed).unwrap();
    let charac = characterization_examples::<f64>(&src.forum, &src.characterization, FeatureSet::PostText).unwrap();
    let char_model = train(&charac, &Hyperparams::default(), seed).unwrap();

    let identified = run_identification(&src.forum, &ident_model, range, FeatureSet::Mixed).unwrap();
    let mentions = run_characterization(&identified, &src.forum, &char_model, FeatureSet::PostText).unwrap();
    let (mut m, mut r) = (Vec::new(), Vec::new());
    write_mentions_csv(&mentions, &mut m).unwrap();
    write_report_csv(&aggregate_report(&mentions), &mut r).unwrap();
    (m, r, src.forum.clone())
}

fn pipeline_determinism() -> Outcome {
    let (m1, r1, forum) = pipeline_run(9);
    let (m2, r2, _) = pipeline_run(9);
    let identical = m1 == m2 && r1 == r2;
    let mentions = read_mentions_csv::<f64, _>(m1.as_slice(), Some(&forum)).unwrap();
    let recomputed: Vec<(String, Label)> = aggregate_report(&mentions).into_iter().map(|r| (r.address, r.verdict)).collect();
    let emitted: Vec<(String, Label)> = read_report_csv(r1.as_slice()).unwrap().into_iter().map(|r| (r.address, r.verdict)).collect();
    // Independent majority count straight from the mentions rows.
    let mut votes: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for m in &mentions {
        let e = votes.entry(m.address.clone()).or_default();
        if m.p_malicious >= 0.5 {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let by_hand = emitted.iter().all(|(a, v)| Label::from_bool(votes[a].0 >= votes[a].1) == *v);
    Outcome::new(
        identical && recomputed == emitted && by_hand && !emitted.is_empty(),
        format!(
            "{} mentions, {} addresses; byte-identical reruns {identical}; recomputed verdicts match {}",
            mentions.len(),
            emitted.len(),
            recomputed == emitted && by_hand
        ),
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let space = word_space(1);
    let model = Model::from_parts(Arc::clone(&space), vec![1.0], 0.0).unwrap();
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..50);
        let mut predicted = Vec::with_capacity(n);
        let test: Vec<TrainingExample<f64>> = (0..n)
            .map(|i| {
                let positive = rng.gen_bool(0.5);
                predicted.push(positive);
                let x = if positive { rng.gen_range(0.0..3.0) } else { -rng.gen_range(0.01..3.0) };
                TrainingExample {
                    key: span_key(i),
                    label: Label::from_bool(rng.gen_bool(0.5)),
                    vector: FeatureVector::from_entries(Arc::clone(&space), vec![(0, x)]).unwrap(),
                }
            })
            .collect();
        let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for (p, e) in predicted.iter().zip(&test) {
            match (*p, e.label == Label::Positive) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let m = evaluate(&model, &test).unwrap();
        let c = m.confusion;
        if (c.tp, c.fp, c.tn, c.fn_) != (tp, fp, tn, fn_)
            || m.precision != div(tp, tp + fp)
            || m.recall != div(tp, tp + fn_)
            || m.accuracy != div(tp + tn, n)
        {
            mismatches += 1;
        }
    }
    Outcome::new(mismatches == 0, format!("1000 random sets, {mismatches} mismatches"))
}
