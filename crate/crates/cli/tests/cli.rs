use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rrcnn_cli::config::{resolve, FoldSelection, Layers};
use rrcnn_core::data::RasterStack;
use rrcnn_core::formats::{read_labels, write_labels, write_raster};
use rrcnn_core::kv::KvMap;
use rrcnn_core::metrics::{read_png_rgb, ChangeCategory};

fn rrcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrcnn"))
        .args(args)
        .env_remove("RRCNN_THREADS")
        .env_remove("RRCNN_OUT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Small run: 256x256 scene with seven acquisitions, 64x64 tiles and a
/// narrowed U-Net, a few epochs.
fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "out = {}\nsynth.height = 256\nsynth.width = 256\nsynth.timesteps = 7\ntile_h = 64\ntile_w = 64\n\
         patch_size = 32\neval_stride = 16\nwidth_divisor = 8\nbatch_size = 16\nmax_epochs = 2\naugment = false\n\
         arch = unet\n{extra}",
        dir.join("run").display()
    );
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn ok(args: &[&str]) -> Output {
    let o = rrcnn(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    o
}

#[test]
fn synth_train_predict_evaluate_render() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let run = dir.path().join("run");
    ok(&["synth", "-c", c, "--deterministic"]);
    ok(&["train", "-c", c, "--deterministic"]);
    ok(&["predict", "-c", c, "--deterministic"]);
    let eval = ok(&["evaluate", "-c", c]);
    assert!(stdout(&eval).contains("16 of 16 tiles"));
    ok(&["render", "-c", c, "--output", run.join("rendered.png").to_str().unwrap()]);

    for f in 0..6 {
        assert!(run.join(format!("fold{f}/model.rrcw")).is_file());
        let history = std::fs::read_to_string(run.join(format!("fold{f}/history.csv"))).unwrap();
        assert_eq!(history.lines().count(), 3);
    }
    assert_eq!(std::fs::read_dir(run.join("probs")).unwrap().count(), 16);
    let pred = read_labels(&run.join("prediction.sarl")).unwrap();
    assert_eq!((pred.height, pred.width), (256, 256));
    assert!(pred.codes.iter().all(|&c| c <= 1));

    let csv = std::fs::read_to_string(run.join("confusion.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(rrcnn_cli::commands::CONFUSION_HEADER));
    assert_eq!(csv.lines().count(), 1 + 16 + 6 + 1);
    let report = KvMap::read(&run.join("report.txt")).unwrap();
    let total: u64 = report.require("pixels_evaluated").unwrap();
    let labels = read_labels(&run.join("labels.sarl")).unwrap();
    assert_eq!(total, labels.codes.iter().filter(|&&c| c != 2).count() as u64);

    // both renderings agree and use only legend colors
    assert_eq!(std::fs::read(run.join("changemap.png")).unwrap(), std::fs::read(run.join("rendered.png")).unwrap());
    let (_, _, rgb) = read_png_rgb(&run.join("changemap.png")).unwrap();
    let legend: Vec<[u8; 3]> = ChangeCategory::ALL.iter().map(|c| c.rgb()).collect();
    assert!(rgb.chunks(3).all(|p| legend.contains(&[p[0], p[1], p[2]])));

    for cmd in ["synth", "train", "predict", "evaluate", "render"] {
        let m = KvMap::read(&run.join(format!("manifest-{cmd}.txt"))).unwrap();
        assert_eq!(m.get_str("command"), Some(cmd));
        assert!(run.join(format!("config-{cmd}.txt")).is_file());
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn deterministic_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fold = 2\n");
    let c = cfg.to_str().unwrap();
    let run = dir.path().join("run");
    let copy = dir.path().join("first");
    for pass in 0..2 {
        for cmd in ["synth", "train", "predict", "evaluate"] {
            ok(&[cmd, "-c", c, "--deterministic"]);
        }
        if pass == 0 {
            std::fs::rename(&run, &copy).unwrap();
        }
    }
    let (a, b) = (files_under(&copy), files_under(&run));
    assert_eq!(a, b);
    assert!(a.iter().any(|p| p.ends_with("model.rrcw")));
    for f in &a {
        assert_eq!(std::fs::read(copy.join(f)).unwrap(), std::fs::read(run.join(f)).unwrap(), "{}", f.display());
    }
}

#[test]
fn manifest_records_input_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fold = 0\n");
    let c = cfg.to_str().unwrap();
    ok(&["synth", "-c", c]);
    ok(&["train", "-c", c, "--seed", "0", "--set", "max_epochs=1"]);
    let run = dir.path().join("run");
    let m = KvMap::read(&run.join("manifest-train.txt")).unwrap();
    let raster = std::fs::read(run.join("scene.sarc")).unwrap();
    assert_eq!(m.get_str("input.0.name"), Some("raster"));
    assert_eq!(m.get_str("input.0.crc32").unwrap(), format!("{:08x}", crc32fast::hash(&raster)));
    // the config snapshot alone reproduces the resolved configuration
    let snapshot = KvMap::read(&run.join("config-train.txt")).unwrap();
    let again = resolve(&Layers {
        file: Some(run.join("config-train.txt")),
        ..Layers::default()
    })
    .unwrap();
    assert_eq!(again.resolved, snapshot);
}

#[test]
fn params_lists_published_targets_with_deviation() {
    let o = ok(&["params"]);
    let text = stdout(&o);
    assert!(text.contains("deviation"));
    let unet = text.lines().find(|l| l.starts_with("U-Net ") && l.contains(" 4 ")).unwrap();
    assert!(unet.contains("868,483"), "{unet}");
    assert!(unet.contains("-0.01%") && unet.ends_with("yes"), "{unet}");
    assert!(text.contains("2,880"));
    assert!(text.contains("6,400"));
}

#[test]
fn precedence_is_defaults_file_env_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.cfg");
    std::fs::write(&file, "threads = 2\nout = from-file\nseed = 5\nfold = 1\n").unwrap();
    let mut flags = KvMap::new();
    flags.set("seed", 9);
    let layers = Layers {
        file: Some(file.clone()),
        env: vec![("threads".into(), "3".into()), ("out".into(), "from-env".into())],
        flags,
    };
    let cfg = resolve(&layers).unwrap();
    assert_eq!(cfg.threads, 3);
    assert_eq!(cfg.out, PathBuf::from("from-env"));
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.fold, FoldSelection::One(1));
    assert_eq!(cfg.experiment.train.seed, 9);
    assert_eq!(cfg.raster, PathBuf::from("from-env/scene.sarc"));
    // untouched keys keep their defaults
    assert_eq!(cfg.experiment.train.optim.batch_size, 32);
    assert_eq!(cfg.experiment.patch_size, 128);

    let args = rrcnn_cli::RunArgs {
        set: vec!["seed=4".into(), "net.t_steps = 3".into()],
        seed: Some(6),
        ..Default::default()
    };
    let m = args.flag_layer().unwrap();
    assert_eq!(m.get_str("seed"), Some("6"), "named flag beats --set");
    assert_eq!(m.get_str("net.t_steps"), Some("3"));
}

fn expect_code(args: &[&str], code: i32, kind: &str) {
    let o = rrcnn(args);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
    let last = stderr(&o).lines().last().unwrap_or_default().to_string();
    assert!(last.starts_with(&format!("rrcnn-error code={code} kind={kind}:")), "{last}");
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    expect_code(&["frobnicate"], 1, "usage");
    expect_code(&["train", "--set", "bogus=1", "--out", o], 1, "config");
    expect_code(&["train", "--set", "nokeyvalue", "--out", o], 1, "config");
    expect_code(&["train", "--fold", "6", "--out", o], 1, "config");
    expect_code(&["train", "--arch", "vgg", "--out", o], 1, "config");
    expect_code(&["train", "--out", o], 1, "config");
    expect_code(&["train", "--config", dir.path().join("missing.cfg").to_str().unwrap()], 1, "config");
    assert!(rrcnn(&["--help"]).status.success());
}

#[test]
fn corrupted_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fold = 0\n");
    let c = cfg.to_str().unwrap();
    ok(&["synth", "-c", c]);
    let raster = dir.path().join("run/scene.sarc");
    let mut bytes = std::fs::read(&raster).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&raster, bytes).unwrap();
    expect_code(&["train", "-c", c], 2, "format");
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "fold = 0\n");
    let c = cfg.to_str().unwrap();
    ok(&["synth", "-c", c]);
    // keep the labels, replace one acquisition with NaN
    let run = dir.path().join("run");
    let stack = rrcnn_core::formats::read_raster(&run.join("scene.sarc")).unwrap();
    let mut data = stack.data.clone();
    let plane = stack.plane();
    data[..2 * plane].iter_mut().for_each(|v| *v = f32::NAN);
    let tags = (0..stack.timesteps()).map(|t| format!("t{t}")).collect();
    write_raster(&run.join("scene.sarc"), &RasterStack::new(stack.height, stack.width, data, tags).unwrap()).unwrap();
    let labels = read_labels(&run.join("labels.sarl")).unwrap();
    write_labels(&run.join("labels.sarl"), &labels).unwrap();
    expect_code(&["train", "-c", c], 3, "diverged");
}

#[test]
fn gradcheck_single_architecture_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ok(&["gradcheck", "--arch", "unet", "--width-divisor", "8", "--samples", "10", "--out", out]);
    let text = stdout(&o);
    assert!(text.contains("conv3x3"));
    assert_eq!(text.matches("PASS").count(), text.lines().filter(|l| l.starts_with("  ")).count());
    assert!(dir.path().join("gradcheck.txt").is_file());
}
