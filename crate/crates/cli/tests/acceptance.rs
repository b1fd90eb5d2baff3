//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p cfm-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cfm_core::cfm::{brute_force_project, project_mask};
use cfm_core::io::{
    decode_feature_map, decode_label_map, decode_mask_pgm, encode_feature_map, encode_label_map, encode_mask_pgm,
    load_proposals, save_proposals,
};
use cfm_core::netgeom::{brute_force_geometry, compose_geometry, LayerKind};
use cfm_core::pipeline::{
    benchmark, mean_iou, paste, score_proposals, train_models, ImageFeatures, TrainingConfig, TrainingScene,
};
use cfm_core::pursuit::{
    area_proportional_pick, candidate_set, classify_overlap, deterministic_pursuit, stochastic_pursuit, Candidate,
    SampleLabel,
};
use cfm_core::spp::{design_a_features, design_a_from_parts, spp_pool};
use cfm_core::synth::{synthetic_corpus, ProposalParams, SyntheticImage, NUM_CATEGORIES};
use cfm_core::{
    init_toynet, BinaryMask, CellBox, Design, FeatureMap, FeatureMask, LabelMap, LayerSpec, NetGeometry,
    PipelineConfig, PixelBox, PursuitConfig, PyramidSpec, SegmentProposal, ToyNetSpec,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
/// Output files by relative path, concatenated stdout, bench digests.
type CliRun = (BTreeMap<PathBuf, Vec<u8>>, Vec<u8>, Vec<String>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_layers(rng: &mut ChaCha8Rng) -> Vec<LayerSpec> {
    let depth = rng.gen_range(1..=5);
    (0..depth)
        .map(|_| LayerSpec {
            kind: if rng.gen_bool(0.5) {
                LayerKind::Conv
            } else {
                LayerKind::Pool
            },
            kernel: rng.gen_range(1..=7),
            stride: rng.gen_range(1..=3),
            pad: rng.gen_range(0..=3),
        })
        .collect()
}

/// Input indices feeding top-level index `u`, enumerated layer by layer.
fn support(layers: &[LayerSpec], u: i64) -> BTreeSet<i64> {
    let mut set = BTreeSet::from([u]);
    for l in layers.iter().rev() {
        set = set
            .iter()
            .flat_map(|&v| (0..l.kernel as i64).map(move |t| v * l.stride as i64 - l.pad as i64 + t))
            .collect();
    }
    set
}

fn c1_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = Instant::now();
    for case in 0..1000 {
        let layers = random_layers(&mut rng);
        let g = compose_geometry(&layers).map_err(|e| format!("case {case}: {e}"))?;
        let s0 = support(&layers, 0);
        let s1 = support(&layers, 1);
        let (lo, hi) = (*s0.first().unwrap(), *s0.last().unwrap());
        let want = (s1.first().unwrap() - lo, hi - lo + 1, lo + hi);
        check((g.stride(), g.rf_size(), g.offset2()) == want, || {
            format!("case {case} {layers:?}: got {g:?}, enumeration gives (S, RF, 2O) = {want:?}")
        })?;
        check(brute_force_geometry(&layers).ok() == Some(g), || {
            format!("case {case}: brute force disagrees")
        })?;
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("1000 stacks match support-set enumeration in {secs:.3}s"))
}

fn c2_cfm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Instant::now();
    let toy = ToyNetSpec::default().geometry().map_err(|e| e.to_string())?;
    let mut special = 0;
    for case in 0..500 {
        let g = if case % 5 == 4 {
            toy
        } else {
            let s = rng.gen_range(1..=8);
            NetGeometry::new(s, s + rng.gen_range(0..=8), rng.gen_range(-6..=10)).map_err(|e| e.to_string())?
        };
        let (w, h) = (rng.gen_range(1..=40), rng.gen_range(1..=40));
        let m = match case % 10 {
            0 => BinaryMask::full(w, h),
            1 => BinaryMask::new(w, h),
            2 => {
                let (px, py) = (rng.gen_range(0..w), rng.gen_range(0..h));
                BinaryMask::from_fn(w, h, |x, y| x == px && y == py)
            }
            _ => {
                let density = rng.gen_range(0.05..0.95);
                let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
                BinaryMask::from_bits(w, h, bits)
            }
        }
        .map_err(|e| e.to_string())?;
        special += usize::from(case % 10 < 3);
        let (fh, fw) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let fast = project_mask(&g, &m, fh, fw).map_err(|e| e.to_string())?;
        let oracle = brute_force_project(&g, &m, fh, fw).map_err(|e| e.to_string())?;
        check(fast == oracle, || {
            format!("case {case}: {g:?} {w}x{h} -> {fh}x{fw} differs from oracle")
        })?;
        if m.is_empty() {
            check(fast.count() == 0, || format!("case {case}: empty mask set cells"))?;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "500 projections match the oracle ({special} all-ones/all-zeros/single-pixel) in {secs:.3}s"
    ))
}

fn c3_spp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pyr = PyramidSpec::default();
    for case in 0..100 {
        let c = rng.gen_range(1..=4);
        let (h, w) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
        let vals: Vec<f32> = (0..c * h * w).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let f = FeatureMap::new(c, h, w, vals).map_err(|e| e.to_string())?;
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let window = CellBox {
            x0,
            y0,
            x1: rng.gen_range(x0..w),
            y1: rng.gen_range(y0..h),
        };
        let p = spp_pool(&f, window, &pyr).map_err(|e| e.to_string())?;
        check(p.values.len() == 50 * c, || {
            format!("case {case}: length {} for C={c}", p.values.len())
        })?;

        let k = rng.gen_range(-2.0f32..2.0);
        let flat = FeatureMap::new(c, h, w, vec![k; c * h * w]).map_err(|e| e.to_string())?;
        let p = spp_pool(&flat, window, &pyr).map_err(|e| e.to_string())?;
        check(p.values.iter().all(|&v| v == k), || {
            format!("case {case}: constant {k} not preserved")
        })?;

        let full = FeatureMask::full(h, w).map_err(|e| e.to_string())?;
        let (boxed, seg) = design_a_from_parts(&f, window, &full, &pyr).map_err(|e| e.to_string())?;
        check(boxed == seg, || {
            format!("case {case}: full mask changed the segment pathway")
        })?;
    }
    // Whole-image proposals on real conv maps: every cell projects as set.
    let net = init_toynet(&ToyNetSpec::default()).map_err(|e| e.to_string())?;
    for (i, side) in [(0, 32), (1, 48), (2, 61)] {
        let img = FeatureMap::new(
            3,
            side,
            side + 7,
            (0..3 * side * (side + 7)).map(|v| (v % 17) as f32 / 17.0).collect(),
        )
        .map_err(|e| e.to_string())?;
        let conv = net.forward(&img).map_err(|e| e.to_string())?;
        let p = SegmentProposal::new("all", BinaryMask::full(side + 7, side).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let (boxed, seg) = design_a_features(&conv, &p, &net.geometry(), &pyr).map_err(|e| e.to_string())?;
        check(boxed == seg, || {
            format!("image {i}: full proposal differs between pathways")
        })?;
    }
    Ok("100 windows pool to 50*C, constants preserved, full mask leaves the segment pathway equal to the box".into())
}

fn random_rects(n: usize, rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<SegmentProposal> {
    (0..n)
        .map(|i| {
            let x0 = rng.gen_range(0..w);
            let y0 = rng.gen_range(0..h);
            let r = PixelBox {
                x0,
                y0,
                x1: rng.gen_range(x0..w),
                y1: rng.gen_range(y0..h),
            };
            SegmentProposal::new(format!("r{i:02}"), BinaryMask::from_box(w, h, r).unwrap()).unwrap()
        })
        .collect()
}

fn iou(a: &Candidate<'_>, b: &Candidate<'_>) -> f64 {
    a.proposal.mask().iou(b.proposal.mask()).unwrap()
}

fn check_selection(cands: &[Candidate<'_>], sel: &[Candidate<'_>], cfg: &PursuitConfig) -> Result<(), String> {
    if cands.is_empty() {
        return check(sel.is_empty(), || "selection from no candidates".into());
    }
    let mean = cands.iter().map(|c| c.area as f64).sum::<f64>() / cands.len() as f64;
    for (i, a) in sel.iter().enumerate() {
        check(a.purity > cfg.purity_pos, || {
            format!("{} purity {}", a.proposal.id(), a.purity)
        })?;
        check(a.area as f64 >= mean, || {
            format!("{} area {} below mean {mean}", a.proposal.id(), a.area)
        })?;
        for b in &sel[i + 1..] {
            check(iou(a, b) <= cfg.inhibit_iou, || {
                format!("{} and {} overlap", a.proposal.id(), b.proposal.id())
            })?;
        }
    }
    for c in cands.iter().filter(|c| c.area as f64 >= mean) {
        let kept = sel.iter().any(|s| s.proposal.id() == c.proposal.id());
        let blocked = sel.iter().any(|s| iou(s, c) > cfg.inhibit_iou);
        check(kept || blocked, || {
            format!("{} eligible but neither kept nor blocked", c.proposal.id())
        })?;
    }
    Ok(())
}

/// Every subset S of the eligible candidates with "c in S iff no earlier
/// member of S overlaps c", earlier meaning larger area then smaller id.
fn fixed_point_selection<'a>(cands: &[Candidate<'a>], cfg: &PursuitConfig) -> Vec<Vec<Candidate<'a>>> {
    let mean_num: usize = cands.iter().map(|c| c.area).sum();
    let mut eligible: Vec<Candidate<'a>> = cands
        .iter()
        .copied()
        .filter(|c| c.area * cands.len() >= mean_num)
        .collect();
    eligible.sort_by(|a, b| b.area.cmp(&a.area).then(a.proposal.id().cmp(b.proposal.id())));
    let n = eligible.len();
    let mut found = Vec::new();
    for bits in 0u32..(1 << n) {
        let inside = |i: usize| bits & (1 << i) != 0;
        let consistent = (0..n).all(|i| {
            let suppressed = (0..i).any(|j| inside(j) && iou(&eligible[j], &eligible[i]) > cfg.inhibit_iou);
            inside(i) == !suppressed
        });
        if consistent {
            found.push((0..n).filter(|&i| inside(i)).map(|i| eligible[i]).collect());
        }
    }
    found
}

fn c4_pursuit() -> Outcome {
    let cfg = PursuitConfig::default();
    let (w, h) = (16, 16);
    let stuff = BinaryMask::from_fn(w, h, |x, y| x + y < 18).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut nonempty = 0;
    for run in 0..1000u64 {
        let props = random_rects(rng.gen_range(1..=20), &mut rng, w, h);
        let cands = candidate_set(&props, &stuff, &cfg).map_err(|e| e.to_string())?;
        let sel = stochastic_pursuit(&cands, &cfg, run).map_err(|e| e.to_string())?;
        check_selection(&cands, &sel, &cfg).map_err(|e| format!("stochastic run {run}: {e}"))?;
        let again = stochastic_pursuit(&cands, &cfg, run).map_err(|e| e.to_string())?;
        check(again == sel, || format!("stochastic run {run} not reproducible"))?;
        nonempty += usize::from(!sel.is_empty());
    }
    let mut compared = 0;
    for run in 0..500 {
        let n = if run % 2 == 0 {
            rng.gen_range(1..=6)
        } else {
            rng.gen_range(1..=20)
        };
        let props = random_rects(n, &mut rng, w, h);
        let cands = candidate_set(&props, &stuff, &cfg).map_err(|e| e.to_string())?;
        let sel = deterministic_pursuit(&cands, &cfg).map_err(|e| e.to_string())?;
        check_selection(&cands, &sel, &cfg).map_err(|e| format!("deterministic run {run}: {e}"))?;
        if cands.len() <= 6 {
            let fixed = fixed_point_selection(&cands, &cfg);
            check(fixed.len() == 1, || format!("run {run}: {} fixed points", fixed.len()))?;
            check(fixed[0] == sel, || {
                format!("run {run}: pursuit differs from the brute-force reference")
            })?;
            compared += 1;
        }
    }
    Ok(format!(
        "1000 stochastic runs ({nonempty} non-empty) and 500 deterministic runs hold; {compared} match brute force"
    ))
}

fn c5_pick_frequency() -> Outcome {
    let p = SegmentProposal::new("x", BinaryMask::full(1, 1).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let cands: Vec<Candidate<'_>> = [100, 50, 50]
        .iter()
        .map(|&area| Candidate {
            proposal: &p,
            area,
            purity: 1.0,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    let hits = (0..draws)
        .filter(|_| area_proportional_pick(&cands, &mut rng) == 0)
        .count();
    let freq = hits as f64 / draws as f64;
    check((freq - 0.5).abs() <= 0.01, || format!("first pick frequency {freq:.4}"))?;
    Ok(format!("area-100 candidate first in {freq:.4} of {draws} draws"))
}

fn c6_labels() -> Outcome {
    use SampleLabel::*;
    let cases = [
        (0.09, Excluded),
        (0.1, Negative),
        (0.3, Negative),
        (0.31, Excluded),
        (0.49, Excluded),
        (0.5, Positive),
        (1.0, Positive),
    ];
    for (v, want) in cases {
        let got = classify_overlap(v);
        check(got == want, || format!("IoU {v}: got {got:?}, want {want:?}"))?;
    }
    Ok("7 boundary IoUs labeled as expected".into())
}

fn to_scene(s: &SyntheticImage) -> TrainingScene {
    TrainingScene {
        image: s.scene.image.clone(),
        gt_segments: s.scene.gt_segments.clone(),
        proposals: s.proposals.clone(),
    }
}

fn c7_end_to_end() -> Outcome {
    let t = Instant::now();
    let side = 96;
    let params = ProposalParams::default();
    let train = synthetic_corpus(200, side, side, 0, &params).map_err(|e| e.to_string())?;
    let test = synthetic_corpus(50, side, side, 1000, &params).map_err(|e| e.to_string())?;
    let scenes: Vec<TrainingScene> = train.iter().map(to_scene).collect();
    let net = init_toynet(&ToyNetSpec::default()).map_err(|e| e.to_string())?;
    let mut means = BTreeMap::new();
    for design in [Design::A, Design::Box] {
        let cfg = PipelineConfig {
            scales: vec![side],
            design,
            ..Default::default()
        };
        let models = train_models(&scenes, &net, &cfg, &TrainingConfig::default()).map_err(|e| e.to_string())?;
        let mut preds = Vec::new();
        let mut gts = Vec::new();
        for s in &test {
            let feats = ImageFeatures::new(&net, &s.scene.image, &cfg).map_err(|e| e.to_string())?;
            let scored = score_proposals(&models, &s.proposals, &feats).map_err(|e| e.to_string())?;
            preds.push(paste(&scored, side, side, cfg.paste_inhibit_iou).map_err(|e| e.to_string())?);
            gts.push(s.scene.gt.clone());
        }
        let r = mean_iou(&preds, &gts, NUM_CATEGORIES).map_err(|e| e.to_string())?;
        means.insert(format!("{design:?}"), r.mean);
    }
    let (a, b) = (means["A"], means["Box"]);
    let secs = t.elapsed().as_secs_f64();
    let summary = format!("masked mIoU {a:.3}, box-only {b:.3}, {secs:.1}s");
    check(a >= 0.5, || format!("{summary}: below 0.5"))?;
    check(a - b >= 0.05, || format!("{summary}: gap below 5 points"))?;
    check(secs < 600.0, || format!("{summary}: over 10 minutes"))?;
    Ok(summary)
}

fn c8_speed() -> Outcome {
    let side = 96;
    let img = &synthetic_corpus(1, side, side, 4242, &ProposalParams::default()).map_err(|e| e.to_string())?[0];
    let net = init_toynet(&ToyNetSpec::default()).map_err(|e| e.to_string())?;
    let pyr = PyramidSpec::default();
    let mut ratios = Vec::new();
    for n in [1, 10, 50, 200] {
        let r = benchmark(&img.scene.image, &img.proposals, n, &net, &pyr, side, 3, 1).map_err(|e| e.to_string())?;
        ratios.push((n, r.ratio));
    }
    let text = ratios
        .iter()
        .map(|(n, r)| format!("{n}:{r:.1}"))
        .collect::<Vec<_>>()
        .join(" ");
    check(ratios[3].1 >= 10.0, || format!("ratio at 200 below 10 ({text})"))?;
    for pair in ratios.windows(2) {
        check(pair[1].1 >= 0.9 * pair[0].1, || {
            format!("ratio drops from {} to {} ({text})", pair[0].0, pair[1].0)
        })?;
    }
    Ok(format!("per-region / conv-once ratios {text}"))
}

fn cfm(dir: &Path, threads: usize, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cfm"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("cfm {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path)?);
        }
    }
    Ok(())
}

/// Runs every subcommand in a fresh directory.
fn cli_run(threads: usize) -> Result<CliRun, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    std::fs::write(
        dir.join("net.json"),
        serde_json::to_vec(&ToyNetSpec::default()).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let s0 = "corpus/scene_0000";
    let steps: Vec<Vec<String>> = [
        "synth --out-dir corpus --count 6 --width 64 --height 64 --seed 11".to_string(),
        "geometry --layers net.json".into(),
        format!("forward --image {s0}/image.cfmt --out conv.cfmt"),
        format!("mask-project --geometry net.json --mask {s0}/segments/000.pgm --fh 16 --fw 16 --out cells.pgm"),
        format!("pool --features conv.cfmt --geometry net.json --proposals {s0}/proposals.json --out-dir pooled"),
        format!("pursue --proposals {s0}/proposals.json --stuff {s0}/segments/000.pgm --mode stochastic --seed 3"),
        "train --corpus corpus/corpus.json --scales 64 --out-dir models".into(),
        format!(
            "infer --models models/models.json --image {s0}/image.cfmt --proposals {s0}/proposals.json \
             --out pred.cfml --scores scores.json --gt {s0}/gt.cfml"
        ),
        format!("paste --scores scores.json --proposals {s0}/proposals.json --out pasted.cfml"),
        format!("eval --pred pred.cfml pasted.cfml --gt {s0}/gt.cfml {s0}/gt.cfml"),
    ]
    .iter()
    .map(|s| s.split_whitespace().map(String::from).collect())
    .collect();
    let mut stdout = Vec::new();
    for step in &steps {
        let args: Vec<&str> = step.iter().map(String::as_str).collect();
        stdout.extend(cfm(dir, threads, &args)?);
    }
    let bench = cfm(
        dir,
        threads,
        &[
            "bench",
            "--image",
            &format!("{s0}/image.cfmt"),
            "--proposals",
            &format!("{s0}/proposals.json"),
            "--counts",
            "1,7",
            "--repeats",
            "1",
        ],
    )?;
    let reports: serde_json::Value = serde_json::from_slice(&bench).map_err(|e| e.to_string())?;
    let digests = reports
        .as_array()
        .ok_or("bench output is not a list")?
        .iter()
        .map(|r| r["digest"].as_str().unwrap_or_default().to_string())
        .collect();
    let mut files = BTreeMap::new();
    collect_files(dir, dir, &mut files).map_err(|e| e.to_string())?;
    Ok((files, stdout, digests))
}

fn c9_cli_determinism() -> Outcome {
    let first = cli_run(1)?;
    for (label, other) in [("repeat", cli_run(1)?), ("--threads 4", cli_run(4)?)] {
        check(first.0.keys().eq(other.0.keys()), || {
            format!("{label}: file sets differ")
        })?;
        for (path, bytes) in &first.0 {
            check(other.0[path] == *bytes, || {
                format!("{label}: {} differs", path.display())
            })?;
        }
        check(first.1 == other.1, || format!("{label}: stdout differs"))?;
        check(first.2 == other.2, || format!("{label}: bench digests differ"))?;
    }
    Ok(format!(
        "{} files and all stdout identical across runs and thread counts",
        first.0.len()
    ))
}

fn c10_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for case in 0..200 {
        let (c, h, w) = (rng.gen_range(1..=4), rng.gen_range(1..=12), rng.gen_range(1..=12));
        let vals: Vec<f32> = (0..c * h * w)
            .map(|_| f32::from_bits(rng.gen::<u32>() & 0x7f7f_ffff))
            .collect();
        let f = FeatureMap::new(c, h, w, vals).map_err(|e| e.to_string())?;
        let bytes = encode_feature_map(&f);
        let back = decode_feature_map(&bytes).map_err(|e| format!("CFMT case {case}: {e}"))?;
        let same = back
            .values()
            .iter()
            .zip(f.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        check(
            same && (back.channels(), back.height(), back.width()) == (c, h, w),
            || format!("CFMT case {case}"),
        )?;

        let bits = (0..w * h).map(|_| rng.gen_bool(0.5)).collect();
        let m = BinaryMask::from_bits(w, h, bits).map_err(|e| e.to_string())?;
        check(decode_mask_pgm(&encode_mask_pgm(&m)).ok() == Some(m), || {
            format!("PGM case {case}")
        })?;

        let labels = (0..w * h).map(|_| rng.gen()).collect();
        let l = LabelMap::new(w, h, labels).map_err(|e| e.to_string())?;
        check(decode_label_map(&encode_label_map(&l)).ok() == Some(l), || {
            format!("label map case {case}")
        })?;
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for case in 0..20 {
        let props = random_rects(rng.gen_range(1..=15), &mut rng, 20, 14);
        let index = tmp.path().join(format!("set{case}/index.json"));
        save_proposals(&index, "masks", &props).map_err(|e| e.to_string())?;
        let back = load_proposals(&index).map_err(|e| e.to_string())?;
        check(back == props, || format!("proposal index case {case}"))?;
    }
    Ok("200 CFMT/PGM/label-map and 20 proposal-index round trips exact".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("C1 geometry", c1_geometry),
        ("C2 feature-mask projection", c2_cfm),
        ("C3 pyramid pooling", c3_spp),
        ("C4 pursuit", c4_pursuit),
        ("C5 stochastic first pick", c5_pick_frequency),
        ("C6 overlap labels", c6_labels),
        ("C7 end-to-end mIoU", c7_end_to_end),
        ("C8 extraction speed", c8_speed),
        ("C9 CLI determinism", c9_cli_determinism),
        ("C10 file round trips", c10_round_trips),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
