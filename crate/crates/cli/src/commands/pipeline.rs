//! synth, train, predict, evaluate and render.

use std::path::Path;

use rrcnn_core::data::{assign_folds, make_tiles, LabelRaster, RasterStack, TileGrid};
use rrcnn_core::experiment::tile_labels;
use rrcnn_core::formats::{read_labels, read_raster, write_labels, write_raster, Checkpoint};
use rrcnn_core::kv::KvMap;
use rrcnn_core::metrics::{threshold, ChangeMap, ConfusionCounts, Mosaic, Scores};
use rrcnn_core::synth::{describe, generate};
use rrcnn_core::{Error, Result};

use crate::config::{require_file, RunConfig};
use crate::manifest::{create_dir, write_text, Manifest};

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let scene = generate(&cfg.scene)?;
    for p in [&cfg.raster, &cfg.labels] {
        if let Some(dir) = p.parent() {
            create_dir(dir)?;
        }
    }
    write_raster(&cfg.raster, &scene.stack)?;
    write_labels(&cfg.labels, &scene.labels)?;
    let record = describe(&cfg.scene, &scene);
    write_text(&cfg.out.join("scene.txt"), &record.to_string())?;
    let mut m = Manifest::new("synth", cfg.scene.seed, &cfg.resolved);
    m.set("output.raster", cfg.raster.display());
    m.set("output.labels", cfg.labels.display());
    m.write(&cfg.out)?;
    println!(
        "scene {}x{} with {} acquisitions -> {} and {}",
        scene.stack.height,
        scene.stack.width,
        scene.stack.timesteps(),
        cfg.raster.display(),
        cfg.labels.display()
    );
    println!(
        "realized deforestation fraction {}",
        record.get_str("realized.deforestation_fraction").unwrap_or("?")
    );
    Ok(())
}

fn load_inputs(cfg: &RunConfig) -> Result<(RasterStack, LabelRaster)> {
    require_file(&cfg.raster, "raster")?;
    require_file(&cfg.labels, "label raster")?;
    let stack = read_raster(&cfg.raster)?;
    let labels = read_labels(&cfg.labels)?;
    if (stack.height, stack.width) != (labels.height, labels.width) {
        return Err(Error::invalid(
            "load",
            format!(
                "raster is {}x{} but labels are {}x{}",
                stack.height, stack.width, labels.height, labels.width
            ),
        ));
    }
    Ok((stack, labels))
}

fn total_folds(cfg: &RunConfig, height: usize, width: usize) -> Result<usize> {
    let grid = make_tiles(height, width, cfg.experiment.tile_h, cfg.experiment.tile_w)?;
    Ok(assign_folds(grid.len(), cfg.experiment.folds, cfg.experiment.fold_seed)?.folds)
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let (stack, labels) = load_inputs(cfg)?;
    let mut manifest = Manifest::new("train", cfg.seed, &cfg.resolved);
    manifest.input("raster", &cfg.raster)?;
    manifest.input("labels", &cfg.labels)?;
    let e = &cfg.experiment;
    for fold in cfg.fold.folds(total_folds(cfg, stack.height, stack.width)?) {
        eprintln!("fold {fold}: training {} ({})", e.arch.display_name(), e.mode);
        let trained = e.train_fold(&stack, &labels, fold, |r| {
            eprintln!(
                "  epoch {:>3}  train {:.5}  val {:.5}  {:.1}s",
                r.epoch, r.train_loss, r.val_loss, r.seconds
            )
        })?;
        let dir = cfg.fold_dir(fold);
        create_dir(&dir)?;
        trained.checkpoint.write(&cfg.checkpoint_path(fold))?;
        trained.fit.history.write_csv(&dir.join("history.csv"))?;
        let mut summary = KvMap::new();
        summary.set("fold", fold);
        summary.set("arch", e.arch.as_str());
        summary.set("mode", e.mode);
        summary.set("params", trained.checkpoint.param_count());
        summary.set("train_patches", trained.train_patches);
        summary.set("val_patches", trained.val_patches);
        summary.set("epochs", trained.fit.history.len());
        summary.set("best_epoch", trained.fit.best_epoch);
        summary.set("best_val_loss", trained.fit.best_val_loss);
        summary.set("stopped_early", trained.fit.stopped_early);
        summary.set(
            "test_tiles",
            trained.test_tiles.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
        );
        write_text(&dir.join("summary.txt"), &summary.to_string())?;
        manifest.set(&format!("output.fold{fold}"), cfg.checkpoint_path(fold).display());
        println!(
            "fold {fold}: best epoch {} of {}, val loss {:.5}, {} train / {} val patches",
            trained.fit.best_epoch,
            trained.fit.history.len(),
            trained.fit.best_val_loss,
            trained.train_patches,
            trained.val_patches
        );
    }
    manifest.write(&cfg.out)
}

/// Probabilities stored as a two-channel raster: no change, deforestation.
fn tile_raster(grid: &TileGrid, probs: &[f32]) -> Result<RasterStack> {
    let mut data: Vec<f32> = probs.iter().map(|p| 1.0 - p).collect();
    data.extend_from_slice(probs);
    RasterStack::new(grid.tile_h, grid.tile_w, data, vec!["probability".into()])
}

fn read_tile_probs(path: &Path, grid: &TileGrid) -> Result<Vec<f32>> {
    let r = read_raster(path)?;
    if (r.height, r.width, r.channels()) != (grid.tile_h, grid.tile_w, 2) {
        return Err(Error::invalid(
            "tile probabilities",
            format!(
                "{} is {}x{}x{}, expected {}x{}x2",
                path.display(),
                r.height,
                r.width,
                r.channels(),
                grid.tile_h,
                grid.tile_w
            ),
        ));
    }
    Ok(r.channel(1).to_vec())
}

/// Stored tile probabilities, by tile id, for every tile that has a file.
fn stored_tiles(cfg: &RunConfig, grid: &TileGrid) -> Result<Vec<(usize, Vec<f32>)>> {
    let mut out = Vec::new();
    for t in grid.tiles() {
        let p = cfg.tile_probs_path(t.id);
        if p.is_file() {
            out.push((t.id, read_tile_probs(&p, grid)?));
        }
    }
    Ok(out)
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    require_file(&cfg.raster, "raster")?;
    let stack = read_raster(&cfg.raster)?;
    let e = &cfg.experiment;
    let grid = e.grid(&stack)?;
    let mut manifest = Manifest::new("predict", cfg.seed, &cfg.resolved);
    manifest.input("raster", &cfg.raster)?;
    create_dir(&cfg.probs_dir())?;
    for fold in cfg.fold.folds(total_folds(cfg, stack.height, stack.width)?) {
        let path = cfg.checkpoint_path(fold);
        require_file(&path, "checkpoint")?;
        manifest.input(&format!("checkpoint.fold{fold}"), &path)?;
        let ck = Checkpoint::read(&path)?;
        let tiles = e.predict_fold(&stack, &ck, fold)?;
        for (t, probs) in &tiles {
            write_raster(&cfg.tile_probs_path(*t), &tile_raster(&grid, probs)?)?;
        }
        println!("fold {fold}: predicted {} tiles", tiles.len());
    }
    let stored = stored_tiles(cfg, &grid)?;
    let mut mosaic = Mosaic::new(grid);
    for (t, probs) in stored {
        mosaic.insert(t, probs)?;
    }
    match mosaic.assemble() {
        Ok(probs) => {
            let labels = LabelRaster::new(mosaic.height(), mosaic.width(), threshold(&probs))?;
            write_labels(&cfg.prediction_path(), &labels)?;
            manifest.set("output.mosaic", cfg.prediction_path().display());
            println!("mosaic {}x{} -> {}", mosaic.height(), mosaic.width(), cfg.prediction_path().display());
        }
        Err(Error::MissingTile { row, col }) => {
            eprintln!("mosaic skipped: tile at row {row}, col {col} has no prediction yet");
        }
        Err(e) => return Err(e),
    }
    manifest.write(&cfg.out)
}

/// Reference codes over the tiled area, which is what mosaics cover.
fn crop(labels: &LabelRaster, height: usize, width: usize) -> Vec<u8> {
    (0..height)
        .flat_map(|r| labels.codes[r * labels.width..r * labels.width + width].iter().copied())
        .collect()
}

fn score_row(scope: &str, c: &ConfusionCounts) -> String {
    let s = c.scores();
    format!("{scope},{},{:.6},{:.6},{:.6}", c.csv_row(), s.precision, s.recall, s.f1)
}

pub const CONFUSION_HEADER: &str = "scope,tp,tn,fp,fn,precision,recall,f1";

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    require_file(&cfg.labels, "label raster")?;
    let labels = read_labels(&cfg.labels)?;
    let e = &cfg.experiment;
    let grid = make_tiles(labels.height, labels.width, e.tile_h, e.tile_w)?;
    let plan = assign_folds(grid.len(), e.folds, e.fold_seed)?;
    let stored = stored_tiles(cfg, &grid)?;
    if stored.is_empty() {
        return Err(Error::Config(format!("no tile predictions under {}", cfg.probs_dir().display())));
    }
    let mut manifest = Manifest::new("evaluate", cfg.seed, &cfg.resolved);
    manifest.input("labels", &cfg.labels)?;

    let mut per_fold = vec![ConfusionCounts::default(); plan.folds];
    let mut total = ConfusionCounts::default();
    let mut rows = vec![CONFUSION_HEADER.to_string()];
    for (t, probs) in &stored {
        manifest.input(&format!("tile{t:03}"), &cfg.tile_probs_path(*t))?;
        let c = ConfusionCounts::from_labels(&threshold(probs), &tile_labels(&labels, &grid, *t))?;
        rows.push(score_row(&format!("tile{t:03}"), &c));
        per_fold[plan.tile_fold[*t]].merge(&c);
        total.merge(&c);
    }
    for (f, c) in per_fold.iter().enumerate() {
        if plan.test_tiles(f).iter().any(|t| stored.iter().any(|s| s.0 == *t)) {
            rows.push(score_row(&format!("fold{f}"), c));
        }
    }
    rows.push(score_row("total", &total));
    write_text(&cfg.out.join("confusion.csv"), &(rows.join("\n") + "\n"))?;

    let scores = Scores::from_counts(&total);
    let mut report = KvMap::new();
    report.set("tiles_evaluated", stored.len());
    report.set("tiles_total", grid.len());
    report.set("pixels_evaluated", total.total());
    report.set("tp", total.tp);
    report.set("tn", total.tn);
    report.set("fp", total.fp);
    report.set("fn", total.fn_);
    report.set("precision", format!("{:.6}", scores.precision));
    report.set("recall", format!("{:.6}", scores.recall));
    report.set("f1", format!("{:.6}", scores.f1));
    report.set("degenerate", scores.any_degenerate());
    write_text(&cfg.out.join("report.txt"), &report.to_string())?;
    println!("{} of {} tiles: {scores}", stored.len(), grid.len());

    if stored.len() == grid.len() {
        let mut mosaic = Mosaic::new(grid);
        for (t, probs) in stored {
            mosaic.insert(t, probs)?;
        }
        let pred = threshold(&mosaic.assemble()?);
        let reference = crop(&labels, mosaic.height(), mosaic.width());
        let png = cfg.out.join("changemap.png");
        ChangeMap::new(mosaic.height(), mosaic.width(), &pred, &reference)?.write_png(&png)?;
        println!("change map -> {}", png.display());
    } else {
        eprintln!("change map skipped: {} of {} tiles predicted", stored.len(), grid.len());
    }
    manifest.write(&cfg.out)
}

pub fn render(cfg: &RunConfig, output: Option<&Path>) -> Result<()> {
    let pred_path = cfg.prediction_path();
    require_file(&pred_path, "prediction mosaic")?;
    require_file(&cfg.labels, "label raster")?;
    let pred = read_labels(&pred_path)?;
    let labels = read_labels(&cfg.labels)?;
    if pred.height > labels.height || pred.width > labels.width {
        return Err(Error::invalid(
            "render",
            format!(
                "prediction {}x{} exceeds labels {}x{}",
                pred.height, pred.width, labels.height, labels.width
            ),
        ));
    }
    let mut manifest = Manifest::new("render", cfg.seed, &cfg.resolved);
    manifest.input("prediction", &pred_path)?;
    manifest.input("labels", &cfg.labels)?;
    let reference = crop(&labels, pred.height, pred.width);
    let png = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join("changemap.png"));
    if let Some(dir) = png.parent() {
        create_dir(dir)?;
    }
    ChangeMap::new(pred.height, pred.width, &pred.codes, &reference)?.write_png(&png)?;
    println!("change map -> {}", png.display());
    manifest.write(&cfg.out)
}
