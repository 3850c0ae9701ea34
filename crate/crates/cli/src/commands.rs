use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::{info, warn};
use rand::Rng;

use greed::direction::{gradcheck as run_gradcheck, load_checkpoint, save_checkpoint};
use greed::evaluate::{
    evaluate_link_prediction, precision_recall_for_queries, sample_query_nodes, Recommender,
    ScoringMode,
};
use greed::graph::{
    build_direction_pairs, build_test_sets, generate_walks, load_edge_list, read_dense_edge_list,
    read_pairs, split_edges, validation_split, write_edge_list, write_id_map, write_pairs,
};
use greed::proximity::{
    load_embeddings, pick_proximity_threshold, save_embeddings, train_skipgram,
};
use greed::seed::{item_seed, stage_seed};
use greed::{
    DatasetType, DirectionModel, LabeledPair, ModelConfig, SkipGramConfig, SplitSpec, WalkConfig,
};

use crate::config::write_config;
use crate::{
    DirectionArgs, EvaluateLpArgs, EvaluateNrArgs, ExportArgs, GradcheckArgs, ProximityArgs,
    SplitArgs,
};

type Recorded = [(String, String)];

pub const TRAIN_FILE: &str = "train.txt";
pub const ID_MAP_FILE: &str = "id_map.txt";

fn test_file(t: DatasetType) -> String {
    format!("test_{t}.txt")
}

/// `<path><suffix>`, e.g. `emb.txt` -> `emb.txt.config`.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

pub fn split(a: &SplitArgs, recorded: &Recorded) -> Result<()> {
    let spec_seed = stage_seed(a.seed, "split");
    let loaded = load_edge_list(&a.edges)?;
    info!(
        "loaded {} nodes, {} edges ({} self-loops, {} duplicates dropped)",
        loaded.graph.node_count(),
        loaded.graph.edge_count(),
        loaded.self_loops,
        loaded.duplicates
    );
    let spec = SplitSpec::new(a.test_frac, item_seed(spec_seed, 0))?;
    let (train, test_pos) = split_edges(&loaded.graph, &spec)?;
    let sets = build_test_sets(&loaded.graph, &test_pos, item_seed(spec_seed, 1))?;
    create_dir(&a.out)?;
    write_edge_list(&train, a.out.join(TRAIN_FILE))?;
    for (t, pairs) in &sets {
        write_pairs(pairs, a.out.join(test_file(*t)))?;
        let positives = pairs.iter().filter(|p| p.is_positive()).count();
        info!(
            "{t}: {positives} positive, {} negative pairs",
            pairs.len() - positives
        );
    }
    write_id_map(&loaded.ids, a.out.join(ID_MAP_FILE))?;
    write_config(a.out.join("split.config"), "split", recorded)?;
    info!(
        "train graph has {} edges, {} held out",
        train.edge_count(),
        test_pos.len()
    );
    Ok(())
}

pub fn write_threshold(path: &Path, value: f64, youden_j: f64) -> Result<()> {
    fs::write(
        path,
        format!("threshold {value:.16e}\nyouden_j {youden_j:.16e}\n"),
    )
    .with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_threshold(path: &Path) -> Result<f64> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("threshold ") {
            return v
                .trim()
                .parse()
                .with_context(|| format!("{}: bad threshold '{v}'", path.display()));
        }
    }
    bail!("{}: no threshold line", path.display())
}

pub fn train_proximity(a: &ProximityArgs, recorded: &Recorded) -> Result<()> {
    let seed = stage_seed(a.seed, "proximity");
    let train = read_dense_edge_list(&a.train)?;
    let (fit, validation) = validation_split(&train, a.validation_frac, item_seed(seed, 2))?;
    info!(
        "fitting on {} of {} training edges, {} validation pairs",
        fit.edge_count(),
        train.edge_count(),
        validation.len()
    );
    let walk_cfg = WalkConfig {
        num_walks_per_node: a.walks as usize,
        walk_length: a.walk_len as usize,
        rng_seed: item_seed(seed, 0),
        ..WalkConfig::default()
    };
    walk_cfg.validate()?;
    let sg = SkipGramConfig {
        dim: a.dim as usize,
        window: a.window as usize,
        negatives_per_positive: a.negatives as usize,
        epochs: a.epochs as usize,
        learning_rate: a.lr,
        rng_seed: item_seed(seed, 1),
    };
    info!(
        "skip-gram: dim {}, {} walks of length {} per node, window {}",
        sg.dim, walk_cfg.num_walks_per_node, walk_cfg.walk_length, sg.window
    );
    let walks = generate_walks(&fit, &walk_cfg, !a.directed_walks);
    let table = train_skipgram(walks, fit.node_count(), &sg)?;
    let threshold = pick_proximity_threshold(&table, &validation)?;
    info!(
        "proximity threshold {:.6} (Youden J {:.4})",
        threshold.value, threshold.youden_j
    );
    create_parent(&a.out)?;
    save_embeddings(&table, &a.out)?;
    write_threshold(
        &sidecar(&a.out, ".threshold"),
        threshold.value,
        threshold.youden_j,
    )?;
    write_config(sidecar(&a.out, ".config"), "train-proximity", recorded)
}

fn tiny_gradcheck(
    input_dim: usize,
    hidden: Vec<usize>,
    embed_dim: usize,
    nodes: usize,
    draws: usize,
    step: f64,
    seed: u64,
) -> Result<greed::direction::GradcheckReport> {
    let model = DirectionModel::new(
        nodes,
        ModelConfig {
            input_dim,
            hidden_dims: hidden,
            embed_dim,
            rng_seed: item_seed(seed, 0),
            ..ModelConfig::default()
        },
    )?;
    let mut rng = greed::seed::rng(item_seed(seed, 1));
    let pairs: Vec<LabeledPair> = (0..draws)
        .map(|_| {
            let s = rng.random_range(0..nodes);
            let t = (s + rng.random_range(1..nodes)) % nodes;
            LabeledPair::new(s, t, u8::from(rng.random_bool(0.5))).expect("distinct nodes")
        })
        .collect();
    Ok(run_gradcheck(&model, &pairs, step)?)
}

pub fn train_direction(a: &DirectionArgs, recorded: &Recorded) -> Result<()> {
    let seed = stage_seed(a.seed, "direction");
    if a.gradcheck {
        let r = tiny_gradcheck(
            5,
            vec![7],
            a.embed_dim as usize,
            10,
            20,
            1e-6,
            item_seed(seed, 2),
        )?;
        ensure!(
            r.max_relative_error < 1e-5,
            "gradient check failed: relative error {:.3e} at {:?}",
            r.max_relative_error,
            r.worst
        );
        info!(
            "gradient check passed: {} parameters, max relative error {:.3e}",
            r.parameters_checked, r.max_relative_error
        );
    }
    let train = read_dense_edge_list(&a.train)?;
    let walk_cfg = WalkConfig {
        num_walks_per_node: a.walks as usize,
        walk_length: a.walk_len as usize,
        max_hop_for_direction: a.max_hop as usize,
        rng_seed: item_seed(seed, 0),
    };
    walk_cfg.validate()?;
    let pairs = build_direction_pairs(&train, &walk_cfg);
    let positives = pairs.iter().filter(|p| p.is_positive()).count();
    info!(
        "{} direction pairs ({positives} positive) within {} hops",
        pairs.len(),
        walk_cfg.max_hop_for_direction
    );
    let (mut model, id_map) = match &a.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            ensure!(
                ckpt.model.node_count() == train.node_count(),
                "checkpoint {} has {} nodes, training graph has {}",
                path.display(),
                ckpt.model.node_count(),
                train.node_count()
            );
            let mut model = ckpt.model;
            model.set_training_params(a.lr, a.batch as usize, a.epochs as usize)?;
            info!(
                "resumed {} at epoch {}: mean loss {:.6}",
                path.display(),
                model.epochs_trained(),
                model.mean_loss(&pairs)?
            );
            (model, ckpt.id_map)
        }
        None => {
            let config = ModelConfig {
                input_dim: a.input_dim as usize,
                hidden_dims: a.hidden.clone(),
                embed_dim: a.embed_dim as usize,
                margin: a.margin,
                threshold: a.threshold,
                learning_rate: a.lr,
                batch_size: a.batch as usize,
                epochs: a.epochs as usize,
                rng_seed: item_seed(seed, 1),
                reference_seed: a.reference_seed,
            };
            (DirectionModel::new(train.node_count(), config)?, None)
        }
    };
    let id_map = a
        .id_map
        .as_ref()
        .map(|p| p.display().to_string())
        .or(id_map);
    let c = model.config();
    info!(
        "model: input {}, hidden {:?}, N = {}, margin {}, lr {}, batch {}",
        c.input_dim, c.hidden_dims, c.embed_dim, c.margin, c.learning_rate, c.batch_size
    );
    model.train(&pairs)?;
    create_parent(&a.out)?;
    save_checkpoint(&model, id_map.as_deref(), &a.out)?;
    write_config(sidecar(&a.out, ".config"), "train-direction", recorded)
}

fn check_sizes(prox: &greed::EmbeddingTable, model: &DirectionModel) -> Result<()> {
    ensure!(
        prox.node_count() == model.node_count(),
        "proximity embeddings cover {} nodes, model has {}",
        prox.node_count(),
        model.node_count()
    );
    Ok(())
}

pub fn evaluate_lp(a: &EvaluateLpArgs, recorded: &Recorded) -> Result<()> {
    let prox = load_embeddings(&a.proximity)?;
    let model = load_checkpoint(&a.model)?.model;
    check_sizes(&prox, &model)?;
    let mode = match a.mode.as_str() {
        "proximity" => ScoringMode::ProximityOnly,
        _ => ScoringMode::TwoStep,
    };
    let threshold_path = a
        .threshold_file
        .clone()
        .unwrap_or_else(|| sidecar(&a.proximity, ".threshold"));
    let threshold = match mode {
        ScoringMode::TwoStep => read_threshold(&threshold_path)?,
        ScoringMode::ProximityOnly => 0.0,
    };
    let mut sets = BTreeMap::new();
    for t in &a.types {
        let t: DatasetType = t.parse()?;
        sets.insert(t, read_pairs(a.split_dir.join(test_file(t)))?);
    }
    let report = evaluate_link_prediction(&prox, threshold, &model, &sets, mode)?;
    for (t, auc) in &report.auc {
        info!("{t}: ROC-AUC {auc:.4} ({})", mode.as_str());
    }
    create_dir(&a.out)?;
    write_text(&a.out.join("lp_metrics.csv"), &report.to_csv())?;
    write_text(&a.out.join("lp_metrics.txt"), &report.to_table())?;
    write_config(a.out.join("lp.config"), "evaluate-lp", recorded)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn evaluate_nr(a: &EvaluateNrArgs, recorded: &Recorded) -> Result<()> {
    let seed = stage_seed(a.seed, "recommend");
    let prox = load_embeddings(&a.proximity)?;
    let model = load_checkpoint(&a.model)?.model;
    check_sizes(&prox, &model)?;
    let train = read_dense_edge_list(a.split_dir.join(TRAIN_FILE))?;
    ensure!(
        train.node_count() == model.node_count(),
        "training graph has {} nodes, model has {}",
        train.node_count(),
        model.node_count()
    );
    let test: Vec<LabeledPair> = read_pairs(a.split_dir.join(test_file(DatasetType::Type2)))?
        .into_iter()
        .filter(LabeledPair::is_positive)
        .collect();
    let gate = if a.gate {
        let path = a
            .threshold_file
            .clone()
            .unwrap_or_else(|| sidecar(&a.proximity, ".threshold"));
        Some(read_threshold(&path)?)
    } else {
        None
    };
    let queries = sample_query_nodes(&test, a.sample, item_seed(seed, 0))?;
    let k_max = a.k.iter().copied().max().unwrap_or(0);
    ensure!(k_max > 0, "k must be positive");
    let recommender = Recommender::new(&prox, &model, &train, model.config().threshold, gate);
    let recs = recommender.recommend_all(&queries, k_max)?;
    let report = precision_recall_for_queries(&recs, &test, &a.k, &queries)?;
    for (k, p) in &report.precision_at {
        info!("P@{k} {p:.4}  R@{k} {:.4}", report.recall_at[k]);
    }
    if recs.values().any(|r| r.len() < k_max) {
        warn!("some queries have fewer than {k_max} candidates");
    }
    create_dir(&a.out)?;
    write_text(&a.out.join("nr_metrics.csv"), &report.to_csv())?;
    write_text(&a.out.join("nr_metrics.txt"), &report.to_table())?;
    let mut lines = String::new();
    for (q, r) in &recs {
        let items: Vec<String> = r.iter().map(usize::to_string).collect();
        lines.push_str(&format!("{q} {}\n", items.join(" ")));
    }
    write_text(&a.out.join("recommendations.txt"), &lines)?;
    write_config(a.out.join("nr.config"), "evaluate-nr", recorded)
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    let r = tiny_gradcheck(
        a.input_dim as usize,
        a.hidden.clone(),
        a.embed_dim as usize,
        a.nodes as usize,
        a.draws as usize,
        a.step,
        stage_seed(a.seed, "gradcheck"),
    )?;
    info!(
        "{} parameter checks, max relative error {:.3e} (pair {}, group {}, offset {})",
        r.parameters_checked, r.max_relative_error, r.worst.0, r.worst.1, r.worst.2
    );
    ensure!(
        r.max_relative_error < a.tolerance,
        "relative error {:.3e} exceeds {:.1e}",
        r.max_relative_error,
        a.tolerance
    );
    Ok(())
}

pub fn export_embeddings(a: &ExportArgs, recorded: &Recorded) -> Result<()> {
    let model = load_checkpoint(&a.model)?.model;
    create_parent(&a.out)?;
    save_embeddings(&model.embed_all(), &a.out)?;
    write_config(sidecar(&a.out, ".config"), "export-embeddings", recorded)
}
