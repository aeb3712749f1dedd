use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use egoctx::evaluation::{
    rf_train, svm_train, Classifier, ForestConfig, LabeledDataset, ManifoldVoter, NeuronAssignments, SomVoter, Split,
    SvmConfig, Task,
};
use egoctx::features::{DescriptorConfig, Extractor, FeatureKind, ImageFrame};
use egoctx::fusion::{family_scores, rank_dimensions, stepwise_curve, FusionConfig, FusionEvaluator};
use egoctx::handswitch::{evaluate_detection, train_multimodel, HandswitchConfig, MultiModelDetector};
use egoctx::io::{
    labeled_dataset, load_manifest, load_model, model_kind, report, save_model, synth_generate, FeatureStore, Manifest,
    SynthConfig,
};
use egoctx::manifold::{isomap_fit, pca_fit, som_fit, FeatureMatrix, IsomapModel, PcaModel, SomConfig, SomGrid};
use egoctx::selection::{pick_knee, sweep_isomap_neighbors, sweep_som_sizes};

use crate::{
    Cli, Command, DataArgs, DescriptorArgs, EvalMethod, FitMethod, HanddetArgs, ModelArgs, SweepKind, SynthArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Extract(a) => extract(&ctx, &a.manifest, a.feature, &a.descriptor),
        Command::Fit { method, data, model } => fit(&ctx, method, &data, &model),
        Command::Sweep {
            what,
            data,
            k_values,
            sizes,
            components,
        } => sweep(&ctx, what, &data, &k_values, &sizes, components),
        Command::EvalContext {
            data,
            model,
            method,
            task,
        } => eval_context(&ctx, &data, &model, &method, &task.tasks()),
        Command::Fuse {
            data,
            som_size,
            step,
            max_dims,
            task,
        } => fuse(&ctx, &data, som_size, step, max_dims, task.into()),
        Command::HanddetTrain(a) => handdet_train(&ctx, &a),
        Command::HanddetEval { common, model } => handdet_eval(&ctx, &common, model),
        Command::Report { data, model } => report_model(&ctx, &data, &model),
    }
}

struct Ctx {
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = report::write_text(self.path(name), text)?;
        println!("wrote {}", p.display());
        Ok(())
    }

    fn som_config(&self) -> SomConfig {
        SomConfig::with_seed(self.seed)
    }

    fn title(&self, what: &str) -> String {
        format!("{what} (seed {})", self.seed)
    }
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let config = match &a.config {
        Some(p) => {
            let mut c: SynthConfig =
                serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                    .with_context(|| format!("parsing {}", p.display()))?;
            c.seed = ctx.seed;
            c
        }
        None => {
            let mut c = SynthConfig::standard(a.locations, a.frames, a.indoor_fraction, ctx.seed);
            c.width = a.width;
            c.height = a.height;
            c
        }
    };
    let manifest = synth_generate(&config, &ctx.out)?;
    println!(
        "wrote {} frames and {}",
        manifest.len(),
        ctx.path("manifest.csv").display()
    );
    Ok(())
}

fn descriptor_config(d: &DescriptorArgs) -> DescriptorConfig {
    let mut c = DescriptorConfig::default();
    if let Some(b) = d.bins {
        c.bins_per_channel = b;
    }
    if let Some(r) = d.gist_resize {
        c.gist_resize = r;
    }
    c
}

fn load_frames(manifest: &Manifest) -> Result<Vec<ImageFrame>> {
    use rayon::prelude::*;
    manifest
        .entries
        .par_iter()
        .map(|e| ImageFrame::load(manifest.resolve(e)).map_err(anyhow::Error::from))
        .collect()
}

fn extract_matrix(
    manifest: &Manifest,
    kind: FeatureKind,
    config: DescriptorConfig,
) -> Result<(Extractor, FeatureMatrix)> {
    let ex = Extractor::new(kind, config)?;
    let frames = load_frames(manifest)?;
    let x = ex.extract_matrix(&frames)?;
    Ok((ex, x))
}

fn feature_file(kind: FeatureKind) -> String {
    format!("{}.features", feature_name(kind))
}

fn feature_name(kind: FeatureKind) -> String {
    format!("{kind:?}").to_lowercase()
}

fn extract(ctx: &Ctx, manifest_path: &Path, kind: FeatureKind, d: &DescriptorArgs) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let (ex, x) = extract_matrix(&manifest, kind, descriptor_config(d))?;
    let store = FeatureStore::new(
        kind.descriptor_id(),
        ex.config().clone(),
        &manifest,
        ctx.seed,
        ex.provenance(),
        x,
    )?;
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let path = ctx.path(&feature_file(kind));
    store.save(&path)?;
    println!(
        "wrote {} ({} x {})",
        path.display(),
        store.header.count,
        store.header.dim
    );
    Ok(())
}

struct Loaded {
    manifest: Manifest,
    store: FeatureStore,
    dataset: LabeledDataset,
}

fn load_data(ctx: &Ctx, d: &DataArgs) -> Result<Loaded> {
    let manifest = load_manifest(&d.manifest)?;
    let path = d.features.clone().unwrap_or_else(|| ctx.path(&feature_file(d.feature)));
    let store = FeatureStore::load(&path).with_context(|| format!("loading features from {}", path.display()))?;
    store
        .verify(&manifest)
        .with_context(|| format!("{} was not extracted from {}", path.display(), d.manifest.display()))?;
    let dataset = labeled_dataset(&manifest, store.features.clone())?;
    Ok(Loaded {
        manifest,
        store,
        dataset,
    })
}

fn fit(ctx: &Ctx, method: FitMethod, d: &DataArgs, m: &ModelArgs) -> Result<()> {
    let data = load_data(ctx, d)?;
    let train = data.dataset.features_for(Split::Train);
    let name = feature_name(d.feature);
    match method {
        FitMethod::Pca => {
            let model = pca_fit(&train, m.components)?;
            save(ctx, &format!("pca_{name}.json"), &model)
        }
        FitMethod::Isomap => {
            let model = isomap_fit(&train, m.k_neighbors, m.components)?;
            println!("residual variance {:.6}", model.residual_variance);
            save(ctx, &format!("isomap_{name}.json"), &model)
        }
        FitMethod::Som => {
            let grid = som_fit(&train, m.som_size, m.som_size, &ctx.som_config())?;
            println!(
                "quantization error {:.6}, TCQ {:.4}",
                grid.quantization_error(&train)?,
                egoctx::manifold::tcq(&grid, &train)?.tcq
            );
            save(ctx, &format!("som{}_{name}.json", m.som_size), &grid)
        }
    }
}

fn save<M: egoctx::io::PersistedModel>(ctx: &Ctx, file: &str, model: &M) -> Result<()> {
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    let path = ctx.path(file);
    save_model(&path, model, ctx.seed)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(ctx: &Ctx, what: SweepKind, d: &DataArgs, ks: &[usize], sizes: &[usize], components: usize) -> Result<()> {
    let data = load_data(ctx, d)?;
    let train = data.dataset.features_for(Split::Train);
    let (curve, stem) = match what {
        SweepKind::IsomapK => (sweep_isomap_neighbors(&train, ks, components)?, "sweep_isomap_k"),
        SweepKind::SomSize => (sweep_som_sizes(&train, sizes, &ctx.som_config())?, "sweep_som_size"),
    };
    let knee = pick_knee(&curve)?;
    let mut csv = report::curve_csv(&curve, ctx.seed);
    let _ = writeln!(csv, "# knee={knee}");
    ctx.write(&format!("{stem}.csv"), &csv)?;
    ctx.write(&format!("{stem}.svg"), &report::curve_svg(&curve, &ctx.title(stem)))?;
    println!("knee at {knee}");
    Ok(())
}

fn classifier(
    ctx: &Ctx,
    method: EvalMethod,
    train: &FeatureMatrix,
    labels: &[String],
    m: &ModelArgs,
) -> Result<Box<dyn Classifier>> {
    Ok(match method {
        EvalMethod::Som => {
            let grid = som_fit(train, m.som_size, m.som_size, &ctx.som_config())?;
            Box::new(SomVoter::new(grid, train, labels)?)
        }
        EvalMethod::Pca => Box::new(ManifoldVoter::new(
            pca_fit(train, m.components)?,
            train,
            labels,
            m.vote_k,
        )?),
        EvalMethod::Isomap => {
            let model = isomap_fit(train, m.k_neighbors, m.components)?;
            let embedding = (0..model.n_train).map(|i| model.embedding_row(i).to_vec()).collect();
            Box::new(ManifoldVoter::from_embedding(model, embedding, labels, m.vote_k)?)
        }
        EvalMethod::Rf => Box::new(rf_train(train, labels, &ForestConfig::with_seed(ctx.seed))?),
        EvalMethod::Svm => Box::new(svm_train(
            train,
            labels,
            &SvmConfig {
                seed: ctx.seed,
                ..Default::default()
            },
        )?),
    })
}

fn method_name(method: EvalMethod, m: &ModelArgs) -> String {
    match method {
        EvalMethod::Som => format!("som{}", m.som_size),
        EvalMethod::Pca => "pca".into(),
        EvalMethod::Isomap => format!("isomap_k{}", m.k_neighbors),
        EvalMethod::Rf => "rf".into(),
        EvalMethod::Svm => "svm".into(),
    }
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::IndoorOutdoor => "indoor_outdoor",
        Task::Location => "location",
    }
}

fn eval_context(ctx: &Ctx, d: &DataArgs, m: &ModelArgs, methods: &[EvalMethod], tasks: &[Task]) -> Result<()> {
    let data = load_data(ctx, d)?;
    let ds = &data.dataset;
    let (train, test) = (ds.features_for(Split::Train), ds.features_for(Split::Test));
    for &task in tasks {
        let labels = ds.labels_for(task, Split::Train);
        let truth = ds.labels_for(task, Split::Test);
        for &method in methods {
            let c = classifier(ctx, method, &train, &labels, m)?;
            let predicted = test
                .iter_rows()
                .map(|r| c.predict(r))
                .collect::<egoctx::Result<Vec<_>>>()?;
            let file = format!(
                "eval_{}_{}_{}.csv",
                feature_name(d.feature),
                method_name(method, m),
                task_name(task)
            );
            if let Some(r) = report::emit_eval(ctx.path(&file), &truth, &predicted, ctx.seed)? {
                println!(
                    "{} {}: accuracy {:.4} -> {}",
                    method_name(method, m),
                    task_name(task),
                    r.accuracy,
                    ctx.path(&file).display()
                );
            }
        }
    }
    Ok(())
}

fn fuse(ctx: &Ctx, d: &DataArgs, som_size: usize, step: usize, max_dims: usize, task: Task) -> Result<()> {
    let data = load_data(ctx, d)?;
    let ds = &data.dataset;
    if data.store.header.provenance.segments.len() < 2 {
        log::warn!("feature file has a single descriptor family; fusion composition is trivial");
    }
    let config = FusionConfig {
        evaluators: vec![FusionEvaluator::SomVote { size: som_size }, FusionEvaluator::Forest],
        step,
        max_dims,
        som: ctx.som_config(),
        forest: ForestConfig::with_seed(ctx.seed),
    };
    let (train, test) = (ds.features_for(Split::Train), ds.features_for(Split::Test));
    let (ytr, yte) = (ds.labels_for(task, Split::Train), ds.labels_for(task, Split::Test));
    let ranking = rank_dimensions(&train, &ytr, &config.forest)?;
    let trace = stepwise_curve(
        &ranking,
        &data.store.header.provenance,
        &train,
        &ytr,
        &test,
        &yte,
        &config,
    )?;
    ctx.write("fusion_trace.csv", &report::trace_csv(&trace, ctx.seed))?;
    ctx.write("fusion_trace.svg", &report::trace_svg(&trace, &ctx.title("fusion")))?;
    let families = family_scores(&data.store.header.provenance, &train, &ytr, &test, &yte, &config)?;
    let mut csv = format!("# seed={}\nfamily,evaluator,accuracy\n", ctx.seed);
    for (family, scores) in &families {
        for (e, acc) in scores {
            let _ = writeln!(csv, "{},{e},{acc}", family.as_str());
        }
    }
    ctx.write("fusion_families.csv", &csv)?;
    for e in &config.evaluators {
        if let Some(best) = trace.best_score(&e.name()) {
            println!("{}: best prefix accuracy {best:.4}", e.name());
        }
    }
    Ok(())
}

struct HandData {
    manifest: Manifest,
    hog: FeatureMatrix,
    context: FeatureMatrix,
    hands: Vec<Option<bool>>,
}

fn hand_data(a: &HanddetArgs, hog_config: &DescriptorConfig) -> Result<HandData> {
    let manifest = load_manifest(&a.manifest)?;
    let frames = load_frames(&manifest)?;
    let hog = Extractor::new(FeatureKind::Hog, hog_config.clone())?.extract_matrix(&frames)?;
    let context = Extractor::new(a.feature, descriptor_config(&a.descriptor))?.extract_matrix(&frames)?;
    let hands = manifest.entries.iter().map(|e| e.hands.known()).collect();
    Ok(HandData {
        manifest,
        hog,
        context,
        hands,
    })
}

fn labeled_rows(h: &HandData, split: Split) -> (Vec<usize>, Vec<bool>) {
    (0..h.manifest.len())
        .filter(|&i| h.manifest.entries[i].split == split)
        .filter_map(|i| h.hands[i].map(|v| (i, v)))
        .unzip()
}

fn handdet_train(ctx: &Ctx, a: &HanddetArgs) -> Result<()> {
    let hog_config = DescriptorConfig::default();
    let h = hand_data(a, &hog_config)?;
    let (rows, hands) = labeled_rows(&h, Split::Train);
    if rows.is_empty() {
        bail!("no training frames with YES/NO hand labels");
    }
    let context = h.context.select_rows(&rows);
    let som = som_fit(&context, a.som_size, a.som_size, &ctx.som_config())?;
    let mut config = HandswitchConfig::default();
    config.svm.seed = ctx.seed;
    if let Some(m) = a.min_train {
        config.min_train = m;
    }
    let det = train_multimodel(&h.hog.select_rows(&rows), &hands, &context, som, hog_config, &config)?;
    println!(
        "{} of {} neurons degraded to the global model",
        det.degraded_count(),
        det.locals.len()
    );
    save(ctx, "multimodel_detector.json", &det)
}

fn handdet_eval(ctx: &Ctx, a: &HanddetArgs, model: Option<PathBuf>) -> Result<()> {
    let path = model.unwrap_or_else(|| ctx.path("multimodel_detector.json"));
    let (mut det, _): (MultiModelDetector, u64) =
        load_model(&path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(m) = a.min_train {
        det = det.with_min_train(m);
    }
    let h = hand_data(a, &det.hog_config)?;
    if h.context.cols() != det.som.dim {
        bail!(
            "context descriptor has {} dims but the detector's SOM expects {}; pass the --feature/--bins used for training",
            h.context.cols(),
            det.som.dim
        );
    }
    let (rows, hands) = labeled_rows(&h, Split::Test);
    if rows.is_empty() {
        bail!("no test frames with YES/NO hand labels");
    }
    let locations: Vec<String> = rows.iter().map(|&i| h.manifest.entries[i].location.clone()).collect();
    let eval = evaluate_detection(
        &det,
        &h.hog.select_rows(&rows),
        &h.context.select_rows(&rows),
        &hands,
        &locations,
    )?;
    ctx.write("detection.csv", &report::detection_csv(&eval, ctx.seed))?;
    ctx.write("neurons.csv", &report::neuron_csv(&eval.per_neuron, ctx.seed))?;
    for (name, svg) in report::neuron_panels(&det.som, &eval.per_neuron) {
        ctx.write(&format!("neurons_{name}.svg"), &svg)?;
    }
    println!(
        "total F1 {:.4} (baseline {:.4})",
        eval.total.multimodel.f1(),
        eval.total.baseline.f1()
    );
    Ok(())
}

fn report_model(ctx: &Ctx, d: &DataArgs, model: &Path) -> Result<()> {
    let data = load_data(ctx, d)?;
    let x = &data.store.features;
    let locations: Vec<String> = data.manifest.entries.iter().map(|e| e.location.clone()).collect();
    let stem = model
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    match model_kind(model)?.as_str() {
        "pca" => {
            let (m, _): (PcaModel, u64) = load_model(model)?;
            let pts = m.transform_matrix(x)?;
            ctx.write(
                &format!("{stem}_embedding.svg"),
                &report::embedding_svg(&pts, &locations, &ctx.title("PCA embedding")),
            )
        }
        "isomap" => {
            let (m, _): (IsomapModel, u64) = load_model(model)?;
            let pts = m.transform_matrix(x)?;
            ctx.write(
                &format!("{stem}_embedding.svg"),
                &report::embedding_svg(&pts, &locations, &ctx.title("Isomap embedding")),
            )
        }
        "som" => {
            let (grid, _): (SomGrid, u64) = load_model(model)?;
            let ds = &data.dataset;
            let train = ds.features_for(Split::Train);
            let assignments = NeuronAssignments::build(&grid, &train, &ds.labels_for(Task::Location, Split::Train))?;
            let hits: Vec<usize> = (0..grid.neurons()).map(|n| assignments.hits(n)).collect();
            ctx.write(
                &format!("{stem}_hitmap.svg"),
                &report::som_hitmap_svg(
                    &grid,
                    &assignments.majority_labels(),
                    &hits,
                    &ctx.title("SOM hits by location"),
                ),
            )?;
            // one trajectory per location, frames in sequence order
            let mut names: Vec<&String> = locations.iter().collect();
            names.sort();
            names.dedup();
            for loc in names {
                let mut idx: Vec<usize> = (0..locations.len()).filter(|&i| &locations[i] == loc).collect();
                idx.sort_by_key(|&i| data.manifest.entries[i].sequence_index);
                let bmus = grid.bmus(&x.select_rows(&idx))?;
                ctx.write(
                    &format!("{stem}_trajectory_{}.svg", safe_name(loc)),
                    &report::trajectory_svg(&grid, &bmus, &ctx.title(&format!("SOM trajectory {loc}"))),
                )?;
            }
            Ok(())
        }
        other => bail!("report does not draw '{other}' models; use handdet-eval for detectors"),
    }
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
