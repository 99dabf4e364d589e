//! params, gradcheck and benchmark.

use std::fmt::Write as _;

use rrcnn_core::arch::reconcile::{self, BITEMPORAL_CHANNELS, MULTITEMPORAL_CHANNELS, TOLERANCE};
use rrcnn_core::arch::{build, param_count, ArchConfig, ArchitectureId};
use rrcnn_core::{Error, Result};

use crate::benchmark::{self, BenchConfig, BenchRow, BenchSummary};
use crate::checks::{self, NetworkCheckConfig, LAYER_TOLERANCE, NETWORK_TOLERANCE};
use crate::manifest::write_text;
use crate::{BenchmarkArgs, GradcheckArgs, ParamsArgs};

/// Thousands separators, e.g. 868,483.
pub fn grouped(n: i64) -> String {
    let digits = n.unsigned_abs().to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if n < 0 {
        out.insert(0, '-');
    }
    out
}

#[derive(Clone, Debug)]
pub struct CountRow {
    pub arch: ArchitectureId,
    pub channels: usize,
    pub params: usize,
    pub target: usize,
}

impl CountRow {
    pub fn deviation(&self) -> f64 {
        reconcile::rel(self.params, self.target)
    }
}

/// Counts of the built networks for both input widths.
pub fn count_rows() -> Result<Vec<CountRow>> {
    let mut rows = Vec::new();
    for arch in ArchitectureId::ALL {
        let (tb, tm) = arch.published_counts();
        for (channels, target) in [(BITEMPORAL_CHANNELS, tb), (MULTITEMPORAL_CHANNELS, tm)] {
            let net = build::<f32>(arch, channels, &ArchConfig::reconciled(arch), 0)?;
            rows.push(CountRow {
                arch,
                channels,
                params: param_count(&net),
                target,
            });
        }
    }
    Ok(rows)
}

pub fn params_table(rows: &[CountRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>8} {:>11} {:>11} {:>9}  within {:.0}%",
        "arch",
        "channels",
        "params",
        "target",
        "deviation",
        TOLERANCE * 100.0
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>11} {:>11} {:>+8.2}%  {}",
            r.arch.display_name(),
            r.channels,
            grouped(r.params as i64),
            grouped(r.target as i64),
            100.0 * r.deviation(),
            if r.deviation().abs() <= TOLERANCE { "yes" } else { "no" }
        );
    }
    let _ = writeln!(s, "\n{:<10} {:>11} {:>11}  exact", "arch", "14ch - 4ch", "target");
    for pair in rows.chunks(2) {
        let (b, m) = (&pair[0], &pair[1]);
        let (got, want) = (m.params as i64 - b.params as i64, m.target as i64 - b.target as i64);
        let _ = writeln!(
            s,
            "{:<10} {:>11} {:>11}  {}",
            b.arch.display_name(),
            grouped(got),
            grouped(want),
            if got == want { "yes" } else { "no" }
        );
    }
    s
}

pub fn params(args: &ParamsArgs) -> Result<()> {
    let rows = count_rows()?;
    print!("{}", params_table(&rows));
    if args.report {
        println!("\n{}", reconcile::report());
    }
    if let Some(dir) = &args.out {
        let mut csv = String::from("arch,channels,params,target,deviation,within_tolerance\n");
        for r in &rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{:.6},{}",
                r.arch.as_str(),
                r.channels,
                r.params,
                r.target,
                r.deviation(),
                r.deviation().abs() <= TOLERANCE
            );
        }
        write_text(&dir.join("params.csv"), &csv)?;
        write_text(&dir.join("reconciliation.md"), &reconcile::report())?;
    }
    Ok(())
}

fn parse_archs(names: &[String]) -> Result<Vec<ArchitectureId>> {
    if names.is_empty() {
        return Ok(ArchitectureId::ALL.to_vec());
    }
    names.iter().map(|n| n.trim().parse()).collect()
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<()> {
    if args.width_divisor == 0 || args.samples == 0 || !(args.eps > 0.0) {
        return Err(Error::Config("width_divisor, samples and eps must be positive".into()));
    }
    let archs = parse_archs(args.arch.as_slice())?;
    let mut text = String::new();
    let mut failures = Vec::new();
    if !args.no_layers {
        let _ = writeln!(text, "layers (tolerance {LAYER_TOLERANCE:e}, worst block or input)");
        for l in checks::layer_suite()? {
            let verdict = if l.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(
                text,
                "  {:<24} {:>10.2e}  {:>5} coords  {:>2} on kinks  {verdict}",
                l.name, l.rel_err, l.coordinates, l.kinks
            );
            if !l.passed() {
                failures.push((l.name.clone(), l.rel_err, LAYER_TOLERANCE));
            }
        }
        print!("{text}");
    }
    let head = format!(
        "networks at 16x16, widths / {} (tolerance {NETWORK_TOLERANCE:e} on the pooled error, eps {:e})\n",
        args.width_divisor, args.eps
    );
    print!("{head}");
    text.push_str(&head);
    let cfg = NetworkCheckConfig {
        width_divisor: args.width_divisor,
        eps: args.eps,
        samples_per_block: args.samples,
        input_samples: args.samples,
    };
    checks::network_suite(&archs, &cfg, |r| {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        let line = format!(
            "  {:<9} {:>2}ch  pooled {:>9.2e}  worst block {} {:.2e}  {} coords  {} on kinks  {:.0}s  {verdict}\n",
            r.arch.display_name(),
            r.channels,
            r.pooled,
            r.worst_block,
            r.worst_block_err,
            r.coordinates,
            r.kinks,
            r.seconds
        );
        print!("{line}");
        text.push_str(&line);
        if !r.passed() {
            failures.push((format!("{} {}ch", r.arch.as_str(), r.channels), r.pooled, NETWORK_TOLERANCE));
        }
    })?;
    if let Some(dir) = &args.out {
        write_text(&dir.join("gradcheck.txt"), &text)?;
    }
    match failures.into_iter().max_by(|a, b| (a.1 / a.2).total_cmp(&(b.1 / b.2))) {
        Some((block, rel_err, tolerance)) => Err(Error::GradCheck {
            block,
            rel_err,
            tolerance,
        }),
        None => Ok(()),
    }
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    let cfg = BenchConfig {
        scene_size: args.size,
        seeds: args.seeds.clone(),
        archs: parse_archs(&args.archs)?,
        width_divisor: args.width_divisor,
        max_epochs: args.max_epochs,
        recovery_db: args.recovery_db,
        train_stride: Some(args.train_stride),
        ..BenchConfig::default()
    };
    if cfg.seeds.is_empty() || cfg.width_divisor == 0 || cfg.max_epochs == 0 || args.train_stride == 0 {
        return Err(Error::Config("seeds, width_divisor, max_epochs and train_stride must be non-empty/positive".into()));
    }
    let mut csv = vec![BenchRow::CSV_HEADER.to_string()];
    let rows = benchmark::run(&cfg, |r| {
        let line = r.csv_row();
        println!("{line}");
        csv.push(line);
    })?;
    let summary = BenchSummary::from_rows(&rows).render();
    print!("{summary}");
    write_text(&args.out.join("benchmark.csv"), &(csv.join("\n") + "\n"))?;
    write_text(&args.out.join("summary.txt"), &summary)
}
