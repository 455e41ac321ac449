use std::path::{Path, PathBuf};
use std::process::Command;

use jointstream::checkpoint::read_checkpoint;
use jointstream::commands::{self, Overrides};
use jointstream::fbag::read_bag;
use jointstream::manifest::{Manifest, Record, Split};
use jointstream::png_io::{save_mask, save_rgb};
use jointstream::synth::SynthConfig;
use jointstream::Error;
use jointstream_core::imaging::PatchConfig;
use jointstream_core::metrics::predict;
use jointstream_core::{Domain, HeadKind, HeadParams, RasterImage, RawLabels, RoiMask};
use jointstream_oracles as oracle;
use sha2::{Digest, Sha256};

const TISSUE: [u8; 3] = [170, 80, 150];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jointstream"))
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn labels(tokens: [&str; 6]) -> RawLabels {
    RawLabels::parse(tokens).unwrap()
}

/// Writes a slide PNG with a textured tissue block and its mask.
fn slide(dir: &Path, id: &str, w: usize, h: usize, mask: &RoiMask) -> (String, String) {
    let mut bytes = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let t = ((x * 7 + y * 13) % 31) as u8;
            bytes.extend_from_slice(&[TISSUE[0] - t, TISSUE[1] + t, TISSUE[2] - t / 2]);
        }
    }
    let img = RasterImage::from_rgb8_interleaved(w, h, &bytes).unwrap();
    let (image, mask_file) = (format!("{id}.png"), format!("{id}_mask.png"));
    save_rgb(&img, &dir.join(&image)).unwrap();
    save_mask(mask, &dir.join(&mask_file)).unwrap();
    (image, mask_file)
}

fn record(id: &str, files: (String, String), split: Split) -> Record {
    Record { wsi_id: id.into(), image: files.0, mask: files.1, labels: labels(["pos", "neg", "neg", "G3", "LumA", "N0"]), split }
}

fn write_manifest(dir: &Path, records: Vec<Record>) -> PathBuf {
    let path = dir.join("manifest.csv");
    Manifest::new(dir, records).write(&path).unwrap();
    path
}

#[test]
fn empty_manifest_gives_empty_index() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path(), vec![]);
    let out = dir.path().join("patches");
    let status = bin().args(["extract", "--manifest"]).arg(&manifest).arg("--out").arg(&out).output().unwrap().status;
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(out.join("index.csv")).unwrap(), "wsi_id,x,y,file\n");
}

#[test]
fn extraction_is_named_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let files = slide(dir.path(), "w1", 640, 640, &RoiMask::filled(640, 640, true));
    let manifest = write_manifest(dir.path(), vec![record("w1", files, Split::Train)]);
    let out = dir.path().join("p");
    let first = commands::cmd_extract(&manifest, &out, &PatchConfig::default()).unwrap();
    assert!(first.failures.is_empty());
    assert_eq!(first.index.len(), 1);
    assert_eq!(first.index[0].file, "w1_x0_y0.png");
    let before = [digest(&out.join("w1_x0_y0.png")), digest(&out.join("index.csv"))];
    commands::cmd_extract(&manifest, &out, &PatchConfig::default()).unwrap();
    assert_eq!(before, [digest(&out.join("w1_x0_y0.png")), digest(&out.join("index.csv"))]);
}

#[test]
fn record_errors_exit_nonzero_and_name_the_slide() {
    let dir = tempfile::tempdir().unwrap();
    let good = slide(dir.path(), "good", 64, 64, &RoiMask::filled(64, 64, true));
    let (image, _) = slide(dir.path(), "bad", 64, 64, &RoiMask::filled(64, 64, true));
    save_mask(&RoiMask::filled(64, 60, true), &dir.path().join("bad_mask.png")).unwrap();
    let manifest =
        write_manifest(dir.path(), vec![record("good", good, Split::Train), record("bad", (image, "bad_mask.png".into()), Split::Val)]);
    let out = dir.path().join("p");
    let run = bin()
        .args(["extract", "--patch-size", "32", "--stride", "32", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(!run.status.success());
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("bad"), "{stderr}");
    assert!(!stderr.contains("good:"), "{stderr}");
    let index = commands::read_index(&out.join("index.csv")).unwrap();
    assert_eq!(index.len(), 4);
    assert!(index.iter().all(|r| r.wsi_id == "good"));
}

#[test]
fn features_write_one_bag_per_domain() {
    let dir = tempfile::tempdir().unwrap();
    let a = slide(dir.path(), "a", 32, 32, &RoiMask::filled(32, 32, true));
    let b = slide(dir.path(), "b", 64, 32, &RoiMask::filled(64, 32, true));
    let manifest = write_manifest(dir.path(), vec![record("a", a, Split::Train), record("b", b, Split::Test)]);
    let patches = dir.path().join("p");
    let cfg = PatchConfig { stride: 32, ..PatchConfig::with_patch_size(32) };
    commands::cmd_extract(&manifest, &patches, &cfg).unwrap();
    let index = patches.join("index.csv");

    let rgb = dir.path().join("rgb");
    let out = commands::cmd_features(&index, &manifest, &[Domain::Rgb], 4, &rgb).unwrap();
    assert_eq!(out.files.len(), 2);
    let bag = read_bag(&rgb.join("a.rgb.fbag")).unwrap();
    assert_eq!((bag.len(), bag.dim()), (1, 240));
    assert_eq!(read_bag(&rgb.join("b.rgb.fbag")).unwrap().len(), 2);

    let all = dir.path().join("all");
    let out = commands::cmd_features(&index, &manifest, &[Domain::Rgb, Domain::Dft, Domain::Dwt], 4, &all).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.files.len(), 6);
    for f in &out.files {
        assert_eq!(read_bag(f).unwrap().dim(), 240);
    }
    let digests: Vec<String> = out.files.iter().map(|f| digest(f)).collect();
    commands::cmd_features(&index, &manifest, &[Domain::Rgb, Domain::Dft, Domain::Dwt], 4, &all).unwrap();
    assert_eq!(digests, out.files.iter().map(|f| digest(f)).collect::<Vec<_>>());
}

#[test]
fn slides_without_patches_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let a = slide(dir.path(), "a", 32, 32, &RoiMask::filled(32, 32, true));
    let tiny = slide(dir.path(), "tiny", 32, 32, &RoiMask::rect(32, 32, 0, 0, 8, 8));
    let manifest = write_manifest(dir.path(), vec![record("a", a, Split::Train), record("tiny", tiny, Split::Train)]);
    let patches = dir.path().join("p");
    commands::cmd_extract(&manifest, &patches, &PatchConfig::with_patch_size(32)).unwrap();
    let out = commands::cmd_features(&patches.join("index.csv"), &manifest, &[Domain::Rgb], 4, &dir.path().join("f")).unwrap();
    assert_eq!(out.files.len(), 1);
    assert_eq!(out.failures.iter().map(|f| f.wsi_id.as_str()).collect::<Vec<_>>(), ["tiny"]);
}

fn synth(dir: &Path, n: usize) -> SynthConfig {
    let cfg = SynthConfig { seed: 3, n_wsis: n, d: 8, difficulty: 3.0, two_domain: false };
    commands::cmd_synth(&cfg, dir).unwrap();
    cfg
}

#[test]
fn synth_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    synth(&a, 20);
    synth(&b, 20);
    let m = Manifest::load(&a.join("manifest.csv")).unwrap();
    assert_eq!(m.records.len(), 20);
    assert_eq!(digest(&a.join("manifest.csv")), digest(&b.join("manifest.csv")));
    for r in &m.records {
        let name = format!("features/{}.rgb.fbag", r.wsi_id);
        assert_eq!(digest(&a.join(&name)), digest(&b.join(&name)));
        assert_eq!(read_bag(&a.join(&name)).unwrap().labels(), r.labels.to_binary());
    }
}

#[test]
fn zero_epochs_writes_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 20);
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "[train]\nepochs = 0\nseed = 9\n[model]\nhidden = 4\n").unwrap();
    let cfg = commands::load_config(&config, &Overrides::default()).unwrap();
    let run = commands::cmd_train(&cfg).unwrap();
    let (kind, params) = read_checkpoint(&run.checkpoint).unwrap();
    assert_eq!(kind, HeadKind::Mrl);
    assert_eq!(params, HeadParams::init(4, 8, 6, 9));
    let meta = std::fs::read_to_string(&run.metadata).unwrap();
    assert!(meta.contains("seed = 9"));
    assert_eq!(meta.matches("sha256 = ").count(), 20);
}

#[test]
fn unknown_config_keys_fail_the_command() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 10);
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "[train]\nepoch = 3\n").unwrap();
    let run = bin().args(["train", "--config"]).arg(&config).output().unwrap();
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("epoch"));
}

#[test]
fn missing_bags_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 10);
    std::fs::remove_file(dir.path().join("features/syn0004.rgb.fbag")).unwrap();
    let cfg = commands::load_config(&dir.path().join("config.toml"), &Overrides::default()).unwrap();
    match commands::cmd_train(&cfg) {
        Err(Error::Partial { ids }) => assert_eq!(ids, ["syn0004"]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn eval_report_matches_oracles() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 40);
    let config = dir.path().join("config.toml");
    let run = bin().args(["train", "--seed", "2", "--head", "gmil", "--config"]).arg(&config).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let run = bin().args(["eval", "--seed", "2", "--head", "gmil", "--split", "test", "--config"]).arg(&config).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let o = Overrides { seed: Some(2), head: Some(HeadKind::GatedMil), ..Default::default() };
    let cfg = commands::load_config(&config, &o).unwrap();
    let data = commands::load_dataset(&cfg).unwrap();
    let (_, params) = read_checkpoint(&cfg.output.join("model.mrlp")).unwrap();
    let probs = predict(&cfg.train.head, &params, &data.test).unwrap();
    let csv = std::fs::read_to_string(cfg.output.join("eval_test/report.csv")).unwrap();
    for (k, line) in csv.lines().skip(1).take(6).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let s: Vec<f64> = probs.iter().map(|p| p[k]).collect();
        let y: Vec<bool> = data.test.iter().map(|b| b.labels().get(k)).collect();
        let check = |cell: &str, want: Option<f64>| match want {
            Some(w) => assert!((cell.parse::<f64>().unwrap() - w).abs() <= 1e-12, "{line}"),
            None => assert_eq!(cell, "undefined"),
        };
        check(cells[1], oracle::rank_walk_ap(&s, &y));
        check(cells[2], oracle::pairwise_auc(&s, &y));
        let tp = s.iter().zip(&y).filter(|(&p, &t)| p >= 0.5 && t).count();
        assert_eq!(cells[9], tp.to_string());
    }
    assert!(cfg.output.join("eval_test/report.txt").exists());
}

#[test]
fn image_to_report_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut records = Vec::new();
    let tokens = [["pos", "pos", "neg", "G2", "LumA", "N0"], ["neg", "neg", "pos", "G3", "HER2+", "N2+"]];
    for i in 0..6 {
        let id = format!("s{i}");
        let files = slide(d, &id, 48 + 16 * (i % 3), 48, &RoiMask::filled(48 + 16 * (i % 3), 48, true));
        let split = [Split::Train, Split::Train, Split::Val, Split::Val, Split::Test, Split::Test][i];
        records.push(Record { labels: labels(tokens[i % 2]), ..record(&id, files, split) });
    }
    let manifest = write_manifest(d, records);
    let ok = |cmd: &mut Command| {
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    ok(bin().args(["extract", "--patch-size", "32", "--max-blank", "0.3", "--manifest"]).arg(&manifest).arg("--out").arg(d.join("p")));
    ok(bin()
        .args(["features", "--domains", "rgb,dft,dwt", "--index"])
        .arg(d.join("p/index.csv"))
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(d.join("features")));
    std::fs::write(d.join("config.toml"), "[data]\ndomains = [\"rgb\", \"dft\", \"dwt\"]\n[train]\nepochs = 2\n[model]\nhidden = 8\n").unwrap();
    ok(bin().args(["train", "--stream-mode", "instance-concat", "--config"]).arg(d.join("config.toml")));
    ok(bin().args(["eval", "--stream-mode", "instance-concat", "--split", "val", "--config"]).arg(d.join("config.toml")));
    let report = std::fs::read_to_string(d.join("run/eval_val/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 8);
}
