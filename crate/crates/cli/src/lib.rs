//! The `cbtnlu` command line: each subcommand reads its inputs, runs one
//! pipeline stage and writes its outputs with a run manifest beside them.

pub mod args;
pub mod error;
pub mod manifest;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use cbtnlu_core::corpus::{split_folds, synth_generate};
use cbtnlu_core::embeddings::{
    build_cooccurrence, corpus_streams, train_word_vectors, write_sentence_vectors, GloveConfig,
};
use cbtnlu_core::evaluation::{
    aggregate, analytic_f1, cross_validate, evaluate_predictions, CvConfig, CvResources, KappaMode,
};
use cbtnlu_core::models::{fit_bundle, Features, ModelBundle, ModelKind, TrainConfig};
use cbtnlu_core::textprep::SentenceSeq;
use cbtnlu_core::{
    Category, Dataset, EmbeddingMatrix, LabelCatalog, OversampleSpec, SentenceVectorProvider, Vocabulary,
};
use cbtnlu_service::store::POSTS_FILE;
use cbtnlu_service::AnnotationStore;
use serde_json::json;

pub use args::Cli;
use args::{Command, FeatureArgs, KappaModeArg, LabelScope, ModelArg, TrainOverrides};
pub use error::{CliError, Result};
use manifest::RunManifest;

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Cnn => ModelKind::Cnn,
            ModelArg::Gru => ModelKind::Gru,
            ModelArg::Lr => ModelKind::Lr,
            ModelArg::Svm => ModelKind::Svm,
            ModelArg::Chance => ModelKind::Chance,
            ModelArg::Majority => ModelKind::Majority,
        }
    }
}

struct Ctx {
    seed: u64,
    base: TrainConfig,
    config_path: Option<PathBuf>,
    data_dir: Option<PathBuf>,
    catalog: LabelCatalog,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn manifest(&self, command: &str, config: serde_json::Value) -> Result<RunManifest> {
        let mut m = RunManifest::new(command, config);
        m.seed("seed", self.seed);
        if let Some(c) = &self.config_path {
            m.input(c)?;
        }
        Ok(m)
    }

    fn train_config(&self, ratio: &str, o: &TrainOverrides) -> Result<TrainConfig> {
        let mut cfg = self.base.clone();
        cfg.seed = self.seed;
        cfg.ratio = parse_ratio(ratio, o.any_ratio)?;
        if let Some(e) = o.max_epochs {
            cfg.max_epochs = e;
        }
        if let Some(p) = o.patience {
            cfg.patience = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn scope(&self, scope: &LabelScope) -> Result<Vec<String>> {
        if !scope.labels.is_empty() {
            for l in &scope.labels {
                if !self.catalog.contains(l) {
                    return Err(cbtnlu_core::Error::UnknownLabel(l.clone()).into());
                }
            }
            return Ok(scope.labels.clone());
        }
        Ok(match &scope.category {
            Some(c) => {
                let category = Category::from_str(c)?;
                self.catalog.labels_of(category).iter().map(|l| l.id.clone()).collect()
            }
            None => self.catalog.ids().map(str::to_string).collect(),
        })
    }

    fn features(&self, kind: ModelKind, f: &FeatureArgs, dataset: &Dataset, m: &mut RunManifest) -> Result<Features> {
        let vectors = |m: &mut RunManifest| -> Result<Option<Arc<EmbeddingMatrix>>> {
            f.vectors
                .as_ref()
                .map(|p| {
                    let p = self.path(p);
                    m.input(&p)?;
                    Ok(Arc::new(EmbeddingMatrix::load(&p, None)?))
                })
                .transpose()
        };
        Ok(match kind {
            ModelKind::Cnn => Features::Words(vectors(m)?.ok_or_else(|| usage("cnn needs --vectors"))?),
            ModelKind::Gru => match &f.sentences {
                Some(p) => {
                    let p = self.path(p);
                    m.input(&p)?;
                    Features::Sentences(SentenceVectorProvider::load(&p)?)
                }
                None => Features::Sentences(SentenceVectorProvider::mean_pool(
                    vectors(m)?.ok_or_else(|| usage("gru needs --sentences or --vectors"))?,
                )),
            },
            ModelKind::Lr | ModelKind::Svm => Features::Bow(Vocabulary::from_dataset(dataset, 1)?),
            ModelKind::Chance | ModelKind::Majority => Features::Nothing,
        })
    }

    fn corpus(&self, path: &Path, m: &mut RunManifest) -> Result<Dataset> {
        let path = self.path(path);
        m.input(&path)?;
        Ok(Dataset::ingest(&path, &self.catalog)?)
    }
}

fn usage(msg: &str) -> CliError {
    CliError::Usage(msg.to_string())
}

fn parse_ratio(s: &str, any: bool) -> Result<OversampleSpec> {
    Ok(if any { s.parse()? } else { OversampleSpec::parse_explored(s)? })
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str, m: &mut RunManifest) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text)?;
    m.output(path);
    Ok(())
}

fn finish(mut m: RunManifest, primary: &Path, started: Instant) -> Result<()> {
    m.wall_time_secs = started.elapsed().as_secs_f64();
    m.write_beside(primary)?;
    Ok(())
}

fn ratio_tag(r: OversampleSpec) -> String {
    format!("{}-{}", r.pos_units, r.neg_units)
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let base: TrainConfig = match &cli.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(base.seed),
        base,
        config_path: cli.config.clone(),
        data_dir: cli.data_dir.clone(),
        catalog: LabelCatalog::load(),
    };
    let started = Instant::now();
    match cli.command {
        Command::Synth { n, out } => {
            let out = ctx.path(&out);
            let mut m = ctx.manifest("synth", json!({ "n": n }))?;
            let dataset = synth_generate(&ctx.catalog, n, ctx.seed);
            ensure_parent(&out)?;
            dataset.export(&out)?;
            m.output(&out);
            finish(m, &out, started)
        }
        Command::Embed { corpus, dim, epochs, window, min_count, out, sentences } => {
            let out = ctx.path(&out);
            let cfg = GloveConfig { dim, epochs, seed: ctx.seed, ..Default::default() };
            let mut m = ctx.manifest("embed", json!({ "glove": cfg, "window": window, "min_count": min_count }))?;
            let dataset = ctx.corpus(&corpus, &mut m)?;
            let vocab = Vocabulary::from_dataset(&dataset, min_count)?;
            let table = build_cooccurrence(corpus_streams(&dataset), &vocab, window);
            let run = train_word_vectors(&table, &vocab, &cfg)?;
            log::info!("glove objective {:?}", run.objective.last());
            ensure_parent(&out)?;
            run.embeddings.save(&out)?;
            m.output(&out);
            if let Some(path) = sentences {
                let path = ctx.path(&path);
                let provider = SentenceVectorProvider::mean_pool(Arc::new(run.embeddings));
                let mut unique: BTreeMap<Vec<String>, ()> = BTreeMap::new();
                for post in &dataset.posts {
                    for s in SentenceSeq::of_post(post).sentences() {
                        unique.insert(s.clone(), ());
                    }
                }
                let entries = unique
                    .keys()
                    .map(|s| Ok((s.as_slice(), provider.embed_sentence(s)?)))
                    .collect::<Result<Vec<_>>>()?;
                ensure_parent(&path)?;
                write_sentence_vectors(&path, entries)?;
                m.output(&path);
            }
            finish(m, &out, started)
        }
        Command::Train { model, scope, corpus, features, ratio, folds, overrides, out } => {
            let kind = ModelKind::from(model);
            let out = ctx.path(&out);
            let cfg = ctx.train_config(&ratio, &overrides)?;
            let labels = ctx.scope(&scope)?;
            let mut m = ctx.manifest("train", json!({ "model": kind, "train": cfg, "folds": folds, "labels": labels }))?;
            let dataset = ctx.corpus(&corpus, &mut m)?.labelled();
            let feats = ctx.features(kind, &features, &dataset, &mut m)?;
            let plan = split_folds(&dataset, folds, ctx.seed)?;
            let fold = &plan.folds[0];
            let (bundle, reports) = fit_bundle(kind, feats, &dataset, &labels, &fold.train, &fold.validation, &cfg)?;
            fs::create_dir_all(&out)?;
            bundle.save(&out)?;
            m.output(&out);
            write_text(&out.join("train-report.json"), &(serde_json::to_string_pretty(&reports)? + "\n"), &mut m)?;
            finish(m, &out, started)
        }
        Command::Cv { model, corpus, features, scope, folds, ratios, jobs, analytic, overrides, out } => {
            let kind = ModelKind::from(model);
            let out = ctx.path(&out);
            let labels = ctx.scope(&scope)?;
            let ratios = ratios.iter().map(|r| parse_ratio(r, overrides.any_ratio)).collect::<Result<Vec<_>>>()?;
            let cfg = ctx.train_config(&ratios[0].to_string(), &TrainOverrides { any_ratio: true, ..overrides })?;
            let mut m = ctx.manifest(
                "cv",
                json!({ "model": kind, "train": cfg, "folds": folds, "ratios": ratios, "labels": labels, "analytic": analytic }),
            )?;
            fs::create_dir_all(&out)?;
            if analytic {
                let f1 = analytic_f1(kind, &ctx.catalog).map_err(|e| usage(&e.to_string()))?;
                let agg = aggregate(&f1, &ctx.catalog, Some(&labels));
                let mut csv = String::from("label,model,expected_f1\n");
                for l in &labels {
                    csv.push_str(&format!("{l},{kind},{:.3}\n", f1[l]));
                }
                for (c, v) in &agg.per_category {
                    csv.push_str(&format!("avg_{c},{kind},{v:.3}\n"));
                }
                csv.push_str(&format!("avg,{kind},{:.3}\nweighted_avg,{kind},{:.3}\n", agg.macro_f1, agg.weighted_f1));
                write_text(&out.join("analytic.csv"), &csv, &mut m)?;
                println!("{kind} analytic: macro F1 {:.3}, weighted F1 {:.3}", agg.macro_f1, agg.weighted_f1);
            }
            match (corpus, analytic) {
                (None, true) => {}
                (None, false) => return Err(usage("cv needs --corpus unless --analytic is given")),
                (Some(corpus), _) => {
                    let dataset = ctx.corpus(&corpus, &mut m)?.labelled();
                    let res = match ctx.features(kind, &features, &dataset, &mut m)? {
                        Features::Words(e) => CvResources { embeddings: Some(e), ..Default::default() },
                        Features::Sentences(p) => CvResources { sentences: Some(p), ..Default::default() },
                        Features::Bow(v) => CvResources { vocab: Some(v), ..Default::default() },
                        Features::Nothing => CvResources::default(),
                    };
                    let cv = CvConfig { kind, folds, fold_seed: ctx.seed, labels, ratios, train: cfg, jobs: jobs.max(1) };
                    let report = cross_validate(&dataset, &ctx.catalog, &cv, &res)?;
                    for r in &report.ratios {
                        let tag = ratio_tag(r.ratio);
                        write_text(&out.join(format!("report_{tag}.csv")), &r.table.to_csv(), &mut m)?;
                        let text = r.table.to_text();
                        write_text(&out.join(format!("report_{tag}.txt")), &text, &mut m)?;
                        println!("ratio {}\n{text}", r.ratio);
                    }
                    write_text(&out.join("sweep.csv"), &report.sweep_csv(), &mut m)?;
                    write_text(&out.join("folds.json"), &(report.plan.to_json()? + "\n"), &mut m)?;
                    let audit = json!({
                        "clean": report.audit_clean(),
                        "audits": report.audits,
                        "failures": report.failures,
                    });
                    write_text(&out.join("audit.json"), &(serde_json::to_string_pretty(&audit)? + "\n"), &mut m)?;
                    for f in &report.failures {
                        log::warn!("fold {} label {} ratio {} failed: {}", f.fold, f.label, f.ratio, f.error);
                    }
                }
            }
            finish(m, &out, started)
        }
        Command::Eval { models, corpus, scope, threshold, report } => {
            let report = ctx.path(&report);
            let mut m = ctx.manifest("eval", json!({ "threshold": threshold }))?;
            let dataset = ctx.corpus(&corpus, &mut m)?.labelled();
            let explicit = !scope.labels.is_empty() || scope.category.is_some();
            let mut csv = String::new();
            let mut text = String::new();
            for dir in &models {
                let dir = ctx.path(dir);
                m.input(&dir)?;
                let bundle = ModelBundle::load(&dir)?;
                let labels: Vec<String> =
                    if explicit { ctx.scope(&scope)? } else { bundle.labels().map(str::to_string).collect() };
                let mut predictions = BTreeMap::new();
                for post in &dataset.posts {
                    let p = bundle.predict(post, &ctx.catalog, threshold)?;
                    predictions.insert(post.id.clone(), p.labels);
                }
                let table = evaluate_predictions(bundle.kind.as_str(), &predictions, &dataset.gold, &ctx.catalog, Some(&labels))?;
                let rows = table.to_csv();
                if csv.is_empty() {
                    csv.push_str(&rows);
                } else {
                    csv.extend(rows.lines().skip(1).map(|l| format!("{l}\n")));
                }
                text.push_str(&table.to_text());
                text.push('\n');
            }
            write_text(&report, &csv, &mut m)?;
            write_text(&report.with_extension("txt"), &text, &mut m)?;
            print!("{text}");
            finish(m, &report, started)
        }
        Command::Kappa { store, a, b, mode, out } => {
            let store_dir = ctx.path(&store);
            let store = AnnotationStore::open(&store_dir, ctx.catalog.clone())?;
            let mode = match mode {
                KappaModeArg::Pooled => KappaMode::Pooled,
                KappaModeArg::PerLabelMean => KappaMode::PerLabelMean,
            };
            let report = store.agreement(&a, &b, mode)?;
            println!("posts annotated by both: {}", report.posts);
            for c in &report.categories {
                println!(
                    "{:<15} kappa {:.3}  95% CI [{:.3}, {:.3}]",
                    c.category.as_str(),
                    c.result.kappa,
                    c.result.ci_low,
                    c.result.ci_high
                );
            }
            if let Some(out) = out {
                let out = ctx.path(&out);
                let mut m = ctx.manifest("kappa", json!({ "a": a, "b": b, "mode": mode }))?;
                m.input(&store_dir)?;
                write_text(&out, &(serde_json::to_string_pretty(&report)? + "\n"), &mut m)?;
                finish(m, &out, started)?;
            }
            Ok(())
        }
        Command::Predict { models, input, out, threshold } => {
            let out = ctx.path(&out);
            let models = ctx.path(&models);
            let mut m = ctx.manifest("predict", json!({ "threshold": threshold }))?;
            m.input(&models)?;
            let bundle = ModelBundle::load(&models)?;
            let dataset = ctx.corpus(&input, &mut m)?;
            ensure_parent(&out)?;
            let mut w = BufWriter::new(File::create(&out)?);
            for post in &dataset.posts {
                let p = bundle.predict(post, &ctx.catalog, threshold)?;
                writeln!(w, "{}", serde_json::to_string(&p)?)?;
            }
            w.flush()?;
            m.output(&out);
            finish(m, &out, started)
        }
        Command::Serve { store, corpus, host, port } => {
            let dir = ctx.path(&store);
            let store = if dir.join(POSTS_FILE).exists() {
                AnnotationStore::open(&dir, ctx.catalog.clone())?
            } else {
                let corpus = corpus.ok_or_else(|| usage("the store does not exist yet; pass --corpus to create it"))?;
                let dataset = Dataset::ingest(ctx.path(&corpus), &ctx.catalog)?;
                AnnotationStore::create(&dir, dataset.posts, ctx.catalog.clone())?
            };
            let addr = format!("{host}:{port}")
                .parse()
                .map_err(|e| usage(&format!("bad listen address: {e}")))?;
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on http://{addr}", dir.display());
            runtime.block_on(cbtnlu_service::serve(store, addr))?;
            Ok(())
        }
    }
}

