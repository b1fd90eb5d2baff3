//! `cfm`: command-line front end for the feature-masking pipeline.
//!
//! Reports go to stdout as JSON; binary artifacts are only written to paths
//! given with `--out`/`--out-dir`. Failures print `{"error": ...}` on stderr
//! and exit with status 1; usage errors exit with status 2.

mod corpus;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use cfm_core::cfm::project_mask;
use cfm_core::io::{
    load_feature_map, load_label_map, load_mask, load_proposals, save_feature_map, save_label_map, save_mask,
};
use cfm_core::netgeom::{compose_geometry, feature_extent, LayerSpec, NetGeometry};
use cfm_core::pipeline::{
    benchmark, mean_iou, paste, segment_image, train_models, Design, PipelineConfig, ScoredRegion, TrainingConfig,
    TrainingScene,
};
use cfm_core::pursuit::{stuff_samples, PursuitConfig, PursuitMode};
use cfm_core::spp::{design_a_from_parts, design_b_from_parts, spp_pool, PooledFeature, PyramidSpec};
use cfm_core::toynet::{init_toynet, ToyNetSpec};
use cfm_core::LinearModel;

use corpus::{load_corpus, save_corpus, ModelIndex};

#[derive(Parser)]
#[command(
    name = "cfm",
    version,
    about = "Convolutional feature masking on a desk-scale toy network"
)]
struct Cli {
    /// Worker threads for internal parallelism; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose layer geometry and print {S, RF, O}.
    Geometry {
        /// JSON list of layers, or a toy-net spec with a "layers" field.
        #[arg(long)]
        layers: PathBuf,
    },
    /// Run the toy network over a CFMT image and write the conv map.
    Forward {
        /// Toy-net spec JSON; the built-in default when omitted.
        #[arg(long)]
        net: Option<PathBuf>,
        /// Input image (CFMT).
        #[arg(long)]
        image: PathBuf,
        /// Output path.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the weight seed of the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Project an image mask onto a feature grid and write it as PGM.
    MaskProject {
        /// Layer list or toy-net spec defining the geometry.
        #[arg(long)]
        geometry: PathBuf,
        /// Image-domain mask (PGM).
        #[arg(long)]
        mask: PathBuf,
        /// Feature-map height.
        #[arg(long)]
        fh: usize,
        /// Feature-map width.
        #[arg(long)]
        fw: usize,
        /// Output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool proposal features from a conv map.
    Pool {
        /// Conv feature map (CFMT).
        #[arg(long)]
        features: PathBuf,
        /// Layer list or toy-net spec defining the geometry.
        #[arg(long)]
        geometry: PathBuf,
        /// Proposal index JSON; masks must match the image the map came from.
        #[arg(long)]
        proposals: PathBuf,
        /// Feature design.
        #[arg(long, value_enum, default_value = "a")]
        design: DesignArg,
        #[command(flatten)]
        pyramid: PyramidArg,
        /// One `<id>.cfmt` (plus `.json` sidecar) per proposal goes here.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Select stuff training segments by pursuit and list the negatives.
    Pursue {
        /// Proposal index JSON.
        #[arg(long)]
        proposals: PathBuf,
        /// Stuff mask (PGM) of one category.
        #[arg(long)]
        stuff: PathBuf,
        /// Pursuit variant.
        #[arg(long, value_enum, default_value = "deterministic")]
        mode: ModeArg,
        /// Purity a candidate must exceed.
        #[arg(long, default_value_t = 0.6)]
        purity_pos: f64,
        /// Purity below which a segment is a negative.
        #[arg(long, default_value_t = 0.3)]
        purity_neg: f64,
        /// IoU above which later candidates are suppressed.
        #[arg(long, default_value_t = 0.2)]
        inhibit_iou: f64,
        /// Seed for all randomness.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic corpus: images, label maps, segments, proposals.
    Synth {
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
        /// Number of scenes.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Image width.
        #[arg(long, default_value_t = 96)]
        width: usize,
        /// Image height.
        #[arg(long, default_value_t = 96)]
        height: usize,
        /// Scene `i` uses seed `seed + i`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one linear model per category on a synthetic corpus.
    Train {
        /// corpus.json written by `synth`.
        #[arg(long)]
        corpus: PathBuf,
        /// Toy-net spec JSON; the built-in default when omitted.
        #[arg(long)]
        net: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// SVM regularization strength.
        #[arg(long, default_value_t = 1e-5)]
        reg: f64,
        /// Passes over the training samples.
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Pursuit variant for stuff positives.
        #[arg(long, value_enum, default_value = "deterministic")]
        pursuit: ModeArg,
        /// Random negatives per image and category besides the hard ones.
        #[arg(long, default_value_t = 8)]
        easy_negatives: usize,
        /// Seed for all randomness.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Receives models.json plus one model per category.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score proposals, paste labels, and optionally evaluate.
    Infer {
        /// models.json written by `train`.
        #[arg(long)]
        models: PathBuf,
        /// Toy-net spec JSON; the built-in default when omitted.
        #[arg(long)]
        net: Option<PathBuf>,
        /// Input image (CFMT).
        #[arg(long)]
        image: PathBuf,
        /// Proposal index JSON.
        #[arg(long)]
        proposals: PathBuf,
        #[command(flatten)]
        pipeline: PipelineOverrides,
        /// Predicted label map (CFML).
        #[arg(long)]
        out: PathBuf,
        /// Scored regions as JSON.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Ground-truth label map to evaluate against.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Number of categories including background.
        #[arg(long, default_value_t = cfm_core::synth::NUM_CATEGORIES)]
        num_categories: usize,
    },
    /// Paste scored regions into a label map.
    Paste {
        /// JSON list of {"id", "category", "score"}.
        #[arg(long)]
        scores: PathBuf,
        /// Proposal index JSON.
        #[arg(long)]
        proposals: PathBuf,
        /// IoU above which later candidates are suppressed.
        #[arg(long, default_value_t = 0.3)]
        inhibit_iou: f64,
        /// Output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean IoU of predicted against ground-truth label maps.
    Eval {
        /// Predicted label maps, paired in order with `--gt`.
        #[arg(long, required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        /// Ground-truth label maps (CFML).
        #[arg(long, required = true, num_args = 1..)]
        gt: Vec<PathBuf>,
        /// Number of categories including background.
        #[arg(long, default_value_t = cfm_core::synth::NUM_CATEGORIES)]
        num_categories: usize,
    },
    /// Time conv-once masking against per-region forward passes.
    Bench {
        /// Input image (CFMT).
        #[arg(long)]
        image: PathBuf,
        /// Proposal index JSON.
        #[arg(long)]
        proposals: PathBuf,
        /// Toy-net spec JSON; the built-in default when omitted.
        #[arg(long)]
        net: Option<PathBuf>,
        /// Proposal counts to time; proposals are cycled when fewer exist.
        #[arg(long, value_delimiter = ',', default_value = "1,10,50,200")]
        counts: Vec<usize>,
        /// Side of the square each region is warped to in the per-region path.
        #[arg(long)]
        warp_side: Option<usize>,
        /// Timed repetitions; the median is reported.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[command(flatten)]
        pyramid: PyramidArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    A,
    B,
    /// Box features only (no masking).
    Box,
}

impl From<DesignArg> for Design {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::A => Design::A,
            DesignArg::B => Design::B,
            DesignArg::Box => Design::Box,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Deterministic,
    Stochastic,
}

impl From<ModeArg> for PursuitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Deterministic => PursuitMode::Deterministic,
            ModeArg::Stochastic => PursuitMode::Stochastic,
        }
    }
}

#[derive(Args)]
struct PyramidArg {
    /// Pyramid levels, finest first.
    #[arg(long, value_delimiter = ',', default_value = "6,3,2,1")]
    pyramid: Vec<usize>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Shorter-edge scales, ascending.
    #[arg(long, value_delimiter = ',', default_value = "480,576,688,864,1200")]
    scales: Vec<usize>,
    /// Feature design.
    #[arg(long, value_enum, default_value = "a")]
    design: DesignArg,
    #[command(flatten)]
    pyramid: PyramidArg,
    /// IoU above which a lower-scored region is suppressed while pasting.
    #[arg(long, default_value_t = 0.3)]
    inhibit_iou: f64,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            scales: self.scales.clone(),
            paste_inhibit_iou: self.inhibit_iou,
            design: self.design.into(),
            pyramid: PyramidSpec::new(self.pyramid.pyramid.clone())?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Optional overrides of the configuration stored with the models.
#[derive(Args)]
struct PipelineOverrides {
    /// Shorter-edge scales, ascending.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<usize>>,
    /// IoU above which later candidates are suppressed.
    #[arg(long)]
    inhibit_iou: Option<f64>,
}

/// Either a bare layer list or any object with a `layers` list.
#[derive(Deserialize)]
#[serde(untagged)]
enum LayersFile {
    List(Vec<LayerSpec>),
    Net(ToyNetSpec),
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_geometry(path: &Path) -> Result<NetGeometry> {
    let layers = match read_json::<LayersFile>(path)? {
        LayersFile::List(l) => l,
        LayersFile::Net(n) => n.layer_specs(),
    };
    Ok(compose_geometry(&layers)?)
}

fn load_net_spec(path: Option<&Path>) -> Result<ToyNetSpec> {
    match path {
        Some(p) => read_json(p),
        None => Ok(ToyNetSpec::default()),
    }
}

/// Writes `value` to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print(value: serde_json::Value) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(&value)?).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreEntry {
    id: String,
    category: u16,
    score: f64,
}

fn scores_json(scored: &[ScoredRegion<'_>]) -> Vec<ScoreEntry> {
    scored
        .iter()
        .map(|r| ScoreEntry {
            id: r.proposal.id().to_string(),
            category: r.category,
            score: r.score,
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Geometry { layers } => {
            let g = load_geometry(&layers)?;
            print(serde_json::to_value(g)?)
        }
        Command::Forward { net, image, out, seed } => {
            let mut spec = load_net_spec(net.as_deref())?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let f = init_toynet(&spec)?.forward(&load_feature_map(&image)?)?;
            save_feature_map(&out, &f)?;
            print(json!({"channels": f.channels(), "height": f.height(), "width": f.width()}))
        }
        Command::MaskProject {
            geometry,
            mask,
            fh,
            fw,
            out,
        } => {
            let g = load_geometry(&geometry)?;
            let m = project_mask(&g, &load_mask(&mask)?, fh, fw)?;
            save_mask(&out, &m.to_binary_mask())?;
            print(json!({"height": fh, "width": fw, "set": m.count()}))
        }
        Command::Pool {
            features,
            geometry,
            proposals,
            design,
            pyramid,
            out_dir,
        } => {
            let g = load_geometry(&geometry)?;
            let conv = load_feature_map(&features)?;
            let props = load_proposals(&proposals)?;
            let pyr = PyramidSpec::new(pyramid.pyramid)?;
            let mut written = Vec::new();
            for p in &props {
                let window = feature_extent(&g, p.bbox(), conv.height(), conv.width())?;
                let pooled = match Design::from(design) {
                    Design::Box => spp_pool(&conv, window, &pyr)?,
                    d => {
                        let m = cfm_core::project_proposal(&g, p, conv.height(), conv.width())?;
                        if d == Design::B {
                            design_b_from_parts(&conv, window, &m, &pyr)?
                        } else {
                            let (b, s) = design_a_from_parts(&conv, window, &m, &pyr)?;
                            let mut values = b.values;
                            values.extend(s.values);
                            PooledFeature {
                                values,
                                pyramid: pyr.clone(),
                                channels: 2 * conv.channels(),
                            }
                        }
                    }
                };
                let path = out_dir.join(format!("{}.cfmt", p.id()));
                pooled.save(&path)?;
                written.push(json!({"id": p.id(), "length": pooled.values.len()}));
            }
            print(json!({"proposals": written}))
        }
        Command::Pursue {
            proposals,
            stuff,
            mode,
            purity_pos,
            purity_neg,
            inhibit_iou,
            seed,
        } => {
            let props = load_proposals(&proposals)?;
            let cfg = PursuitConfig {
                purity_pos,
                purity_neg,
                inhibit_iou,
            };
            let s = stuff_samples(&props, &load_mask(&stuff)?, &cfg, mode.into(), seed)?;
            let ids = |v: &[usize]| v.iter().map(|&i| props[i].id().to_string()).collect::<Vec<_>>();
            print(json!({"positives": ids(&s.positives), "negatives": ids(&s.negatives)}))
        }
        Command::Synth {
            out_dir,
            count,
            width,
            height,
            seed,
        } => {
            let corpus = cfm_core::synth::synthetic_corpus(
                count,
                width,
                height,
                seed,
                &cfm_core::synth::ProposalParams::default(),
            )?;
            let index = save_corpus(&out_dir, &corpus, width, height)?;
            print(json!({"scenes": count, "index": index.display().to_string()}))
        }
        Command::Train {
            corpus,
            net,
            pipeline,
            reg,
            epochs,
            pursuit,
            easy_negatives,
            seed,
            out_dir,
        } => {
            let cfg = pipeline.config()?;
            let spec = load_net_spec(net.as_deref())?;
            let toy = init_toynet(&spec)?;
            let scenes: Vec<TrainingScene> = load_corpus(&corpus)?;
            let mut tcfg = TrainingConfig {
                pursuit_mode: pursuit.into(),
                easy_negatives,
                seed,
                ..TrainingConfig::default()
            };
            tcfg.svm.reg = reg;
            tcfg.svm.epochs = epochs;
            let models = train_models(&scenes, &toy, &cfg, &tcfg)?;
            let mut files = Vec::new();
            for m in &models {
                let stem = format!("model_{}", m.category);
                m.save(&out_dir, &stem)?;
                files.push(format!("{stem}.json"));
            }
            let index = ModelIndex {
                config: cfg,
                models: files,
            };
            write_json(&out_dir.join("models.json"), &index)?;
            print(json!({"scenes": scenes.len(), "models": models.len()}))
        }
        Command::Infer {
            models,
            net,
            image,
            proposals,
            pipeline,
            out,
            scores,
            gt,
            num_categories,
        } => {
            let index: ModelIndex = read_json(&models)?;
            let dir = models.parent().unwrap_or(Path::new("."));
            let loaded: Vec<LinearModel> = index
                .models
                .iter()
                .map(|f| LinearModel::load(dir.join(f)))
                .collect::<cfm_core::Result<_>>()?;
            let mut cfg = index.config;
            if let Some(s) = pipeline.scales {
                cfg.scales = s;
            }
            if let Some(t) = pipeline.inhibit_iou {
                cfg.paste_inhibit_iou = t;
            }
            let toy = init_toynet(&load_net_spec(net.as_deref())?)?;
            let img = load_feature_map(&image)?;
            let props = load_proposals(&proposals)?;
            let seg = segment_image(&loaded, &props, &img, &toy, &cfg)?;
            save_label_map(&out, &seg.labels)?;
            if let Some(path) = scores {
                write_json(&path, &scores_json(&seg.scored))?;
            }
            let eval = match gt {
                Some(path) => Some(mean_iou(
                    std::slice::from_ref(&seg.labels),
                    &[load_label_map(&path)?],
                    num_categories,
                )?),
                None => None,
            };
            print(json!({
                "regions": seg.scored.len(),
                "maps_computed": seg.maps_computed,
                "eval": eval,
            }))
        }
        Command::Paste {
            scores,
            proposals,
            inhibit_iou,
            out,
        } => {
            if !(inhibit_iou > 0.0 && inhibit_iou < 1.0) {
                bail!("--inhibit-iou must lie in (0,1)");
            }
            let props = load_proposals(&proposals)?;
            let Some(first) = props.first() else {
                bail!("proposal index is empty");
            };
            let (w, h) = (first.mask().width(), first.mask().height());
            let entries: Vec<ScoreEntry> = read_json(&scores)?;
            let by_id: std::collections::HashMap<&str, &cfm_core::SegmentProposal> =
                props.iter().map(|p| (p.id(), p)).collect();
            let scored = entries
                .iter()
                .map(|e| {
                    let p = by_id
                        .get(e.id.as_str())
                        .with_context(|| format!("unknown proposal id {}", e.id))?;
                    Ok(ScoredRegion {
                        proposal: p,
                        category: e.category,
                        score: e.score,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let labels = paste(&scored, w, h, inhibit_iou)?;
            save_label_map(&out, &labels)?;
            let labeled = labels.labels().iter().filter(|&&l| l != cfm_core::BACKGROUND).count();
            print(json!({"width": w, "height": h, "labeled_pixels": labeled}))
        }
        Command::Eval {
            pred,
            gt,
            num_categories,
        } => {
            let p = pred.iter().map(load_label_map).collect::<cfm_core::Result<Vec<_>>>()?;
            let g = gt.iter().map(load_label_map).collect::<cfm_core::Result<Vec<_>>>()?;
            print(serde_json::to_value(mean_iou(&p, &g, num_categories)?)?)
        }
        Command::Bench {
            image,
            proposals,
            net,
            counts,
            warp_side,
            repeats,
            pyramid,
        } => {
            let toy = init_toynet(&load_net_spec(net.as_deref())?)?;
            let img = load_feature_map(&image)?;
            let props = load_proposals(&proposals)?;
            let pyr = PyramidSpec::new(pyramid.pyramid)?;
            let side = warp_side.unwrap_or(img.width().min(img.height()));
            let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
            let reports = counts
                .iter()
                .map(|&n| benchmark(&img, &props, n, &toy, &pyr, side, repeats, threads))
                .collect::<cfm_core::Result<Vec<_>>>()?;
            print(serde_json::to_value(reports)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": format!("{e:#}")}));
            ExitCode::from(1)
        }
    }
}
