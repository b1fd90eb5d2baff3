//! On-disk layout of synthetic corpora and trained model sets.
//!
//! ```text
//! corpus.json
//! scene_0000/image.cfmt      3-channel image
//! scene_0000/gt.cfml         label map
//! scene_0000/segments.json   [{"category", "mask"}], masks under segments/
//! scene_0000/proposals.json  proposal index, masks under proposals/
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use cfm_core::io::{
    load_feature_map, load_mask, load_proposals, save_feature_map, save_label_map, save_mask, save_proposals,
};
use cfm_core::pipeline::{PipelineConfig, TrainingScene};
use cfm_core::synth::SyntheticImage;
use cfm_core::GtSegment;

#[derive(Serialize, Deserialize)]
pub struct CorpusIndex {
    pub width: usize,
    pub height: usize,
    pub scenes: Vec<SceneEntry>,
}

#[derive(Serialize, Deserialize)]
pub struct SceneEntry {
    pub image: String,
    pub gt: String,
    pub segments: String,
    pub proposals: String,
}

#[derive(Serialize, Deserialize)]
struct SegmentEntry {
    category: u16,
    mask: String,
}

#[derive(Serialize, Deserialize)]
pub struct ModelIndex {
    pub config: PipelineConfig,
    /// Model JSON files relative to the index.
    pub models: Vec<String>,
}

fn write_pretty(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes every scene and returns the path of `corpus.json`.
pub fn save_corpus(dir: &Path, corpus: &[SyntheticImage], width: usize, height: usize) -> Result<PathBuf> {
    let mut scenes = Vec::with_capacity(corpus.len());
    for (i, item) in corpus.iter().enumerate() {
        let name = format!("scene_{i:04}");
        let sdir = dir.join(&name);
        save_feature_map(sdir.join("image.cfmt"), &item.scene.image)?;
        save_label_map(sdir.join("gt.cfml"), &item.scene.gt)?;
        let mut segs = Vec::new();
        for (k, g) in item.scene.gt_segments.iter().enumerate() {
            let rel = format!("segments/{k:03}.pgm");
            save_mask(sdir.join(&rel), &g.mask)?;
            segs.push(SegmentEntry {
                category: g.category,
                mask: rel,
            });
        }
        write_pretty(&sdir.join("segments.json"), &segs)?;
        save_proposals(sdir.join("proposals.json"), "proposals", &item.proposals)?;
        scenes.push(SceneEntry {
            image: format!("{name}/image.cfmt"),
            gt: format!("{name}/gt.cfml"),
            segments: format!("{name}/segments.json"),
            proposals: format!("{name}/proposals.json"),
        });
    }
    let index = dir.join("corpus.json");
    write_pretty(&index, &CorpusIndex { width, height, scenes })?;
    Ok(index)
}

pub fn load_corpus(index: &Path) -> Result<Vec<TrainingScene>> {
    let text = std::fs::read_to_string(index).with_context(|| format!("reading {}", index.display()))?;
    let corpus: CorpusIndex = serde_json::from_str(&text)?;
    let base = index.parent().unwrap_or(Path::new("."));
    corpus
        .scenes
        .iter()
        .map(|s| {
            let seg_path = base.join(&s.segments);
            let seg_dir = seg_path.parent().unwrap_or(base);
            let entries: Vec<SegmentEntry> = serde_json::from_str(&std::fs::read_to_string(&seg_path)?)?;
            let gt_segments = entries
                .iter()
                .map(|e| {
                    Ok(GtSegment {
                        category: e.category,
                        mask: load_mask(seg_dir.join(&e.mask))?,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(TrainingScene {
                image: load_feature_map(base.join(&s.image))?,
                gt_segments,
                proposals: load_proposals(base.join(&s.proposals))?,
            })
        })
        .collect()
}
