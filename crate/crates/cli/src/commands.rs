use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use triadic::dataset::{
    build_samples, course_holdouts, holdout_course_split, random_split, split_by_two_paths,
    ClassScheme, Example, Label, Labeled, PredictorSet, RelationSample, Split,
};
use triadic::deep::{train_deep, DeepConfig};
use triadic::embedding::{
    balance_with_smote, biased_walks, embed_graph, train_skipgram, walk_locality, write_walks,
    EmbeddingTable, LocalitySummary, Merge, UndirectedView, WalkConfig,
};
use triadic::eval::{bacc_histogram, cross_validate, summarize, write_reports, EvalReport, RunMeta};
use triadic::forest::{train_forest, ForestConfig};
use triadic::graph::edge_triads;
use triadic::io::{load_network_files, write_edges, write_nodes};
use triadic::mlp::{
    probability_curve, probability_surface, train, train_ensemble, MlpModel, Oscillation, TrainConfig,
};
use triadic::rng::child_seed;
use triadic::stats::{
    mean_nominations_by_prosociality, prosociality_distribution, relation_type_distribution,
    two_path_histogram, write_distribution, write_nominations, Direction, Sign,
};
use triadic::synth::{
    block_corpus, generate, nucleate, planted_threshold_network, write_ground_truth, BlockConfig,
    SynthConfig,
};
use triadic::{Error, Prosociality, SignedDigraph};

use crate::args::*;
use crate::{Failure, Output};

type Res<T = ()> = Result<T, Failure>;

pub(crate) fn dispatch(cmd: &Command, out: &mut Output) -> Res {
    match cmd {
        Command::Stats(a) => stats(&a.input, out),
        Command::Influence(a) => influence(a, out),
        Command::TrainLocal(a) => train_local(a, out),
        Command::Curves(a) => curves(a, out),
        Command::Embed(a) => embed(a, out),
        Command::TrainGlobal(a) => train_global(a, out),
        Command::Simulate(a) => simulate(a, out),
    }
}

fn load(input: &InputArgs) -> Res<SignedDigraph> {
    let loaded = load_network_files(&input.nodes, &input.edges)?;
    let r = loaded.report;
    if !r.dropped_students.is_empty() || r.dropped_edges > 0 {
        log::warn!(
            "dropped {} students with missing attributes ({}) and {} of their relationships",
            r.dropped_students.len(),
            r.dropped_students.join(" "),
            r.dropped_edges
        );
    }
    log::info!("loaded {} students, {} relationships", loaded.graph.node_count(), loaded.graph.edge_count());
    Ok(loaded.graph)
}

fn class_scheme(s: Scheme) -> ClassScheme {
    match s {
        Scheme::Strict => ClassScheme::strict(),
        Scheme::Merged => ClassScheme::merged(),
    }
}

fn derived_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| child_seed(base, i)).collect()
}

fn stats(input: &InputArgs, out: &mut Output) -> Res {
    let g = load(input)?;
    write_distribution(out.create("relation_types.csv")?, ["weight", "fraction"], &relation_type_distribution(&g)?)?;
    write_distribution(out.create("two_paths.csv")?, ["two_paths", "fraction"], &two_path_histogram(&g)?)?;
    let pro: BTreeMap<String, f64> =
        prosociality_distribution(&g)?.into_iter().map(|(p, f)| (p.value().to_string(), f)).collect();
    write_distribution(out.create("prosociality.csv")?, ["prosociality", "fraction"], &pro)?;
    for (sign, sname) in [(Sign::Positive, "positive"), (Sign::Negative, "negative")] {
        for (dir, dname) in [(Direction::Out, "out"), (Direction::In, "in")] {
            let table = mean_nominations_by_prosociality(&g, sign, dir)?;
            write_nominations(out.create(&format!("nominations_{sname}_{dname}.csv"))?, &table)?;
        }
    }
    Ok(())
}

fn influence(input: &InputArgs, out: &mut Output) -> Res {
    let g = load(input)?;
    let mut w = out.create("influence.csv")?;
    writeln!(w, "src,dst,weight,influence,two_path_count")?;
    for t in edge_triads(&g) {
        writeln!(
            w,
            "{},{},{},{},{}",
            g.student(t.src).student_id,
            g.student(t.dst).student_id,
            t.weight,
            t.influence,
            t.two_paths
        )?;
    }
    w.flush()?;
    Ok(())
}

fn local_config(t: &LocalTraining) -> TrainConfig {
    TrainConfig {
        hidden: t.hidden,
        lr0: t.lr,
        lr_decay: t.lr_decay,
        minibatch: t.minibatch,
        steps: t.steps,
        dynamical: t.dynamical.then_some(Oscillation { amplitude: 10.0, period: 5.0 }),
        standardize: true,
        seed: t.seed,
    }
}

fn parse_predictors(names: &[String]) -> Res<Vec<PredictorSet>> {
    names
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<PredictorSet>().map_err(Failure::from))
        .collect()
}

fn predict_all<S: Labeled>(model: &MlpModel, test: &[S]) -> Res<Vec<Label>> {
    Ok(test.iter().map(|s| model.predict(s.features())).collect::<triadic::Result<Vec<_>>>()?)
}

struct SummaryRow {
    predictors: String,
    subset: &'static str,
    reports: Vec<EvalReport>,
}

fn write_summary(out: &mut Output, rows: &[SummaryRow]) -> Res {
    let mut w = out.create("summary.csv")?;
    writeln!(w, "predictors,subset,mean_bacc,sem_bacc,runs,degenerate")?;
    for r in rows {
        match summarize(&r.reports) {
            Ok(s) => writeln!(w, "{},{},{},{},{},{}", r.predictors, r.subset, s.mean, s.sem, s.n, s.degenerate)?,
            Err(Error::EmptyInput(_)) => {
                writeln!(w, "{},{},,,0,{}", r.predictors, r.subset, r.reports.len())?
            }
            Err(e) => return Err(e.into()),
        }
    }
    w.flush()?;
    Ok(())
}

fn train_local(a: &TrainLocalArgs, out: &mut Output) -> Res {
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(Failure::Usage(format!("--test-fraction must be in (0, 1), got {}", a.test_fraction)));
    }
    let g = load(&a.input)?;
    let scheme = class_scheme(a.training.scheme);
    let base = local_config(&a.training);
    base.validate()?;
    let seeds = derived_seeds(a.training.seed, a.training.seeds);
    out.record_seeds(&seeds);

    let mut summary = Vec::new();
    let mut connected_reports = Vec::new();
    for p in parse_predictors(&a.predictors)? {
        let (connected, _) = split_by_two_paths(build_samples(&g, &scheme, p, None)?);
        if connected.len() < 2 {
            return Err(Error::EmptyInput("fewer than two relationships with a 2-path").into());
        }
        let split = random_split(connected.len(), a.test_fraction, a.training.seed)?;
        let (tr, te) = split.select(&connected);
        let models = train_ensemble(&tr, &base, &seeds)?;
        let labels: Vec<Label> = te.iter().map(|s| s.label).collect();
        let mut reports = Vec::new();
        for (m, &seed) in models.iter().zip(&seeds) {
            let meta = RunMeta { predictors: p.name(), treatment: "connected".into(), seed, split: "holdout".into() };
            reports.push(EvalReport::new(&predict_all(m, &te)?, &labels, meta)?);
        }
        log_summary(&p.name(), "connected", &reports);
        connected_reports.extend(reports.iter().cloned());
        summary.push(SummaryRow { predictors: p.name(), subset: "connected", reports });
    }
    write_reports(&connected_reports, out.create("reports.csv")?)?;

    let mut isolated_reports = Vec::new();
    for p in parse_predictors(&a.isolated_predictors)? {
        let (_, isolated) = split_by_two_paths(build_samples(&g, &scheme, p, None)?);
        if isolated.len() < a.folds.max(2) {
            log::warn!("{} isolated relationships, too few for {}-fold validation of {p}", isolated.len(), a.folds);
            continue;
        }
        let meta = RunMeta { predictors: p.name(), treatment: "isolated".into(), ..RunMeta::default() };
        let reports = cross_validate(&isolated, a.folds, a.training.seed, &meta, |tr, te, seed| {
            let m = train(tr, &base.clone().with_seed(seed))?;
            te.iter().map(|s| m.predict(s.features())).collect()
        })?;
        log_summary(&p.name(), "isolated", &reports);
        isolated_reports.extend(reports.iter().cloned());
        summary.push(SummaryRow { predictors: p.name(), subset: "isolated", reports });
    }
    if !isolated_reports.is_empty() {
        write_reports(&isolated_reports, out.create("reports_isolated.csv")?)?;
    }
    write_summary(out, &summary)
}

fn log_summary(name: &str, subset: &str, reports: &[EvalReport]) {
    match summarize(reports) {
        Ok(s) => log::info!("{name} ({subset}): bAcc {:.4} +- {:.4} over {} runs", s.mean, s.sem, s.n),
        Err(_) => log::warn!("{name} ({subset}): every test set was single-class"),
    }
}

fn curves(a: &CurvesArgs, out: &mut Output) -> Res {
    let g = load(&a.input)?;
    let scheme = class_scheme(a.training.scheme);
    let base = local_config(&a.training);
    base.validate()?;
    let seeds = derived_seeds(a.training.seed, a.training.seeds);
    out.record_seeds(&seeds);

    let ensemble = |p: PredictorSet, all: bool| -> Res<Vec<MlpModel>> {
        let samples = build_samples(&g, &scheme, p, None)?;
        let samples = if all { samples } else { split_by_two_paths(samples).0 };
        let mut models = train_ensemble(&samples, &base, &seeds)?;
        for m in &mut models {
            m.predictors = Some(p);
        }
        Ok(models)
    };

    let models = ensemble(PredictorSet::InfluenceOnly, false)?;
    let curve = probability_curve(&models, (a.min_influence, a.max_influence), a.points)?;
    match curve.crossing() {
        Some(x) => log::info!("friend probability reaches 0.5 at influence {x:.3}"),
        None => log::info!("friend probability stays below 0.5 on the sweep"),
    }
    curve.write_csv(out.create("curve.csv")?)?;

    let models = ensemble(PredictorSet::ProsocialityOnly, a.surface_all)?;
    let grid: Vec<f64> = Prosociality::LEVELS.iter().map(|p| p.value()).collect();
    probability_surface(&models, &grid)?.write_csv(out.create("surface.csv")?)?;
    Ok(())
}

fn walk_config(w: &WalkArgs) -> WalkConfig {
    WalkConfig {
        p: w.p,
        q: w.q,
        walks_per_node: w.walks_per_node,
        walk_length: w.walk_length,
        dimension: w.dimension,
        window: w.window,
        negatives: w.negatives,
        epochs: w.epochs,
        learning_rate: w.learning_rate,
        hogwild: w.hogwild,
        seed: w.walk_seed,
    }
}

fn embed(a: &EmbedArgs, out: &mut Output) -> Res {
    let g = load(&a.input)?;
    let cfg = walk_config(&a.walks);
    cfg.validate()?;
    out.record_seeds(&[cfg.seed]);
    if cfg.hogwild {
        log::warn!("hogwild updates are not reproducible; rerun will not match byte for byte");
    }
    let view = UndirectedView::from_graph(&g);
    let table = if a.export_walks {
        let walks = biased_walks(&view, &cfg);
        write_walks(&walks, view.ids(), out.create("walks.txt")?)?;
        let loc = LocalitySummary::new(&walk_locality(&walks, &view));
        log::info!("walk locality: mean distance {:.3} +- {:.3}", loc.mean, loc.sem);
        write_distribution(out.create("locality.csv")?, ["distance", "fraction"], &loc.histogram)?;
        train_skipgram(&walks, view.ids(), &cfg)?
    } else {
        embed_graph(&view, &cfg)?
    };
    table.write_csv(out.create("embeddings.csv")?)?;
    table.write_binary(out.create("embeddings.bin")?)?;
    Ok(())
}

fn global_splits(a: &TrainGlobalArgs, samples: &[RelationSample]) -> Res<Vec<(String, Split, u64)>> {
    match a.treatment {
        Treatment::I => {
            let runs = if a.runs == 0 { 390 } else { a.runs };
            derived_seeds(a.seed, runs)
                .into_iter()
                .enumerate()
                .map(|(r, s)| Ok((format!("run{r}"), random_split(samples.len(), 0.2, s)?, s)))
                .collect()
        }
        Treatment::II => {
            let mut holdouts = course_holdouts(samples);
            if holdouts.len() < 2 {
                return Err(Error::Config("treatment II needs at least two school courses".into()).into());
            }
            if a.runs > 0 {
                holdouts.truncate(a.runs);
            }
            if a.per_course == 0 {
                return Err(Failure::Usage("--per-course must be at least 1".into()));
            }
            let mut out = Vec::new();
            for (r, (school, course)) in holdouts.into_iter().enumerate() {
                let split = holdout_course_split(samples, &school, course)?;
                for rep in 0..a.per_course {
                    let seed = child_seed(a.seed, (r * a.per_course + rep) as u64);
                    out.push((format!("{school}:{course}#{rep}"), split.clone(), seed));
                }
            }
            Ok(out)
        }
    }
}

/// Training examples with the minority class topped up by SMOTE.
fn smote_balanced(train: &[&RelationSample], k: usize, seed: u64) -> Res<Vec<Example>> {
    let mut examples: Vec<Example> =
        train.iter().map(|s| Example { features: s.features.clone(), label: s.label }).collect();
    let friends = examples.iter().filter(|e| e.label == Label::Friend).count();
    let enemies = examples.len() - friends;
    let minority = if friends < enemies { Label::Friend } else { Label::Enemy };
    let points: Vec<Vec<f64>> =
        examples.iter().filter(|e| e.label == minority).map(|e| e.features.clone()).collect();
    let k = k.min(points.len().saturating_sub(1));
    if k == 0 {
        log::warn!("minority class has {} training samples; SMOTE skipped", points.len());
        return Ok(examples);
    }
    let synthetic = balance_with_smote(friends.max(enemies), &points, k, seed)?;
    examples.extend(synthetic.into_iter().map(|features| Example { features, label: minority }));
    Ok(examples)
}

fn train_global(a: &TrainGlobalArgs, out: &mut Output) -> Res {
    let g = load(&a.input)?;
    let merge: Merge = a.merge.parse()?;
    let table = match &a.embeddings {
        Some(path) => EmbeddingTable::read_csv(std::fs::File::open(path)?)?,
        None => {
            let cfg = walk_config(&a.walks);
            cfg.validate()?;
            out.record_seeds(&[cfg.seed]);
            embed_graph(&UndirectedView::from_graph(&g), &cfg)?
        }
    };
    let predictors = PredictorSet::EmbeddingPair(merge);
    let samples = build_samples(&g, &class_scheme(a.scheme), predictors, Some(&table))?;
    let splits = global_splits(a, &samples)?;
    out.record_seeds(&splits.iter().map(|s| s.2).collect::<Vec<_>>());
    let treatment = match a.treatment {
        Treatment::I => "I",
        Treatment::II => "II",
    };

    let reports = splits
        .par_iter()
        .map(|(name, split, seed)| -> Res<EvalReport> {
            let (tr, te) = split.select(&samples);
            let examples = smote_balanced(&tr, a.smote_k, child_seed(*seed, 1))?;
            let preds: Vec<Label> = match a.model {
                GlobalModel::Deep => {
                    let cfg = DeepConfig { epochs: a.deep_epochs, seed: *seed, ..DeepConfig::default() };
                    let m = train_deep(&examples, &cfg)?;
                    te.iter().map(|s| m.predict(&s.features)).collect::<triadic::Result<_>>()?
                }
                GlobalModel::Forest => {
                    let cfg = ForestConfig { n_trees: a.trees, seed: *seed, ..ForestConfig::default() };
                    let m = train_forest(&examples, &cfg)?;
                    te.iter().map(|s| m.vote(&s.features).map(|v| v.label)).collect::<triadic::Result<_>>()?
                }
            };
            let labels: Vec<Label> = te.iter().map(|s| s.label).collect();
            let meta =
                RunMeta { predictors: predictors.name(), treatment: treatment.into(), seed: *seed, split: name.clone() };
            Ok(EvalReport::new(&preds, &labels, meta)?)
        })
        .collect::<Res<Vec<_>>>()?;

    log_summary(&predictors.name(), treatment, &reports);
    write_reports(&reports, out.create("reports.csv")?)?;
    match bacc_histogram(&reports, a.bins) {
        Ok(h) => h.write_csv(out.create("histogram.csv")?)?,
        Err(Error::EmptyInput(_)) => log::warn!("no two-class test set; histogram skipped"),
        Err(e) => return Err(e.into()),
    }
    write_summary(out, &[SummaryRow { predictors: predictors.name(), subset: treatment, reports }])
}

fn simulate(a: &SimulateArgs, out: &mut Output) -> Res {
    out.record_seeds(&[a.seed]);
    let synth = |base: SynthConfig| SynthConfig {
        n_schools: a.schools,
        courses_per_school: a.courses,
        students_per_course: a.students,
        mean_out_degree: a.degree,
        noise: a.noise,
        resign_rate: a.resign_rate,
        seed: a.seed,
        ..base
    };
    let g = match a.preset {
        Preset::Calibrated => generate(&synth(SynthConfig::default()))?,
        Preset::Nucleation => nucleate(&synth(SynthConfig::nucleation_anchored()))?,
        Preset::Blocks => block_corpus(&BlockConfig {
            n_schools: a.schools,
            courses_per_school: a.courses,
            noise: a.noise,
            seed: a.seed,
            ..BlockConfig::default()
        })?,
        Preset::Planted => {
            let p = planted_threshold_network(a.planted_n, a.theta, a.eta, a.seed)?;
            write_ground_truth(&p, out.create("ground_truth.csv")?)?;
            p.graph
        }
    };
    log::info!("generated {} students, {} relationships", g.node_count(), g.edge_count());
    write_nodes(&g, out.create("nodes.csv")?)?;
    write_edges(&g, out.create("edges.csv")?)?;
    Ok(())
}
