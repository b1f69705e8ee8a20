//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error
//! (clap's own parse failures also exit 2). Every subcommand is
//! deterministic for fixed flags and inputs: reruns produce byte-identical
//! files and stdout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use gaitedge::align::{gait_align, gait_align_backward};
use gaitedge::config::PipelineConfig;
use gaitedge::datagen::{generate_domain, DomainSpec};
use gaitedge::error::Error;
use gaitedge::eval::{run_cross_domain, run_single_domain};
use gaitedge::gradcheck::{check_gradient, GradReport, DEFAULT_STEP};
use gaitedge::grid::{GradGrid, Grid, StructuringElement, TargetSize};
use gaitedge::io::{frame_file_name, load_sequence, save_grid, scan_dataset};
use gaitedge::morphology::preprocess;
use gaitedge::synthesis::{bce_loss, reconstruct, synthesize_backward};

#[derive(Parser)]
#[command(
    name = "gaitedge",
    version,
    about = "Silhouette edge/interior synthesis, differentiable alignment, and gait evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic silhouette dataset tree from a JSON spec.
    Gen(GenArgs),
    /// Decompose every frame of a dataset into edge and interior masks.
    Preprocess(PreprocessArgs),
    /// Run the gallery/probe evaluation described by a config file.
    Eval(EvalArgs),
    /// Compare an analytic gradient against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Verify built-in defaults and run a miniature end-to-end pipeline.
    Selftest,
}

#[derive(Args)]
struct GenArgs {
    /// Domain spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output dataset root.
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input dataset root.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output root for edge/interior masks (may equal the input root; the
    /// scanner ignores the extra files).
    #[arg(long)]
    out: PathBuf,
    /// Structuring element size (odd, >= 3).
    #[arg(long, conflicts_with = "sweep")]
    se_size: Option<usize>,
    /// Comma-separated list of sizes; each writes under out/se-N.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for report files.
    #[arg(long)]
    out: PathBuf,
    /// Evaluate domain_a and domain_b as the 2x2 cross-domain table.
    #[arg(long)]
    cross: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    se_size: Option<usize>,
    /// Target size as HxW, e.g. 64x44.
    #[arg(long)]
    target_size: Option<String>,
    /// Force alignment on.
    #[arg(long, conflicts_with = "no_align")]
    align: bool,
    /// Force alignment off (frames must already be target-sized).
    #[arg(long)]
    no_align: bool,
    /// Enable frame disturbance.
    #[arg(long)]
    disturb: bool,
    /// Maximum disturbance offset in pixels.
    #[arg(long)]
    max_offset: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Which operator to check.
    target: GradTarget,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradTarget {
    Synthesize,
    Bce,
    Align,
}

/// Usage/config problems exit 2, runtime failures exit 1.
enum Failure {
    Usage(String),
    Runtime(String),
}

type CmdResult = std::result::Result<(), Failure>;

fn usage<T>(r: gaitedge::error::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

fn runtime<T>(r: gaitedge::error::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Selftest => cmd_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| Failure::Usage(format!("cannot read spec {}: {e}", args.spec.display())))?;
    let mut spec: DomainSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("bad spec {}: {e}", args.spec.display())))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let summary = runtime(generate_domain(&spec, &args.out))?;
    // Resolved spec (with any --seed override) next to the data, so a tree
    // is reproducible from its own contents.
    let snapshot = args.out.join("domain.json");
    let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
    std::fs::write(&snapshot, json + "\n")
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", snapshot.display())))?;
    println!(
        "generated {} sequences / {} frames under {}",
        summary.sequences,
        summary.frames,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PreprocessSummary {
    se_sizes: Vec<usize>,
    sequences: usize,
    frames: usize,
    /// Total foreground pixels across all edge masks, one entry per size.
    edge_pixels: Vec<u64>,
    interior_pixels: Vec<u64>,
}

fn cmd_preprocess(args: PreprocessArgs) -> CmdResult {
    let sizes: Vec<usize> = match (&args.se_size, &args.sweep) {
        (Some(n), None) => vec![*n],
        (None, Some(list)) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Failure::Usage(format!("bad sweep entry {s:?}")))
            })
            .collect::<std::result::Result<_, _>>()?,
        (None, None) => vec![3],
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    // Validate every size before touching any file.
    let elements: Vec<StructuringElement> = sizes
        .iter()
        .map(|&n| usage(StructuringElement::new(n)))
        .collect::<std::result::Result<_, _>>()?;
    let sweep_mode = args.sweep.is_some();
    let layout = runtime(scan_dataset(&args.input))?;
    let mut summary = PreprocessSummary {
        se_sizes: sizes.clone(),
        sequences: layout.entries.len(),
        frames: 0,
        edge_pixels: vec![0; sizes.len()],
        interior_pixels: vec![0; sizes.len()],
    };
    for (i, (&size, &se)) in sizes.iter().zip(&elements).enumerate() {
        let out_root = if sweep_mode {
            args.out.join(format!("se-{size}"))
        } else {
            args.out.clone()
        };
        let mut frames = 0;
        for entry in &layout.entries {
            let seq = runtime(load_sequence(entry))?;
            let dir = out_root
                .join(&entry.subject)
                .join(entry.condition.label())
                .join(&entry.view);
            std::fs::create_dir_all(&dir)
                .map_err(|e| Failure::Runtime(Error::io(&dir, e).to_string()))?;
            for (t, frame) in seq.frames.iter().enumerate() {
                let pair = runtime(preprocess(&frame.binarized(), se))?;
                summary.edge_pixels[i] += pair.edge.count_foreground() as u64;
                summary.interior_pixels[i] += pair.interior.count_foreground() as u64;
                let stem = frame_file_name(t);
                let stem = stem.trim_end_matches(".pgm");
                runtime(save_grid(&pair.edge, &dir.join(format!("{stem}_edge.pgm"))))?;
                runtime(save_grid(
                    &pair.interior,
                    &dir.join(format!("{stem}_interior.pgm")),
                ))?;
                frames += 1;
            }
        }
        summary.frames = frames;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let summary_path = args.out.join("summary.json");
    std::fs::write(&summary_path, format!("{json}\n"))
        .map_err(|e| Failure::Runtime(Error::io(&summary_path, e).to_string()))?;
    println!("{json}");
    Ok(())
}

fn parse_target_size(text: &str) -> std::result::Result<TargetSize, Failure> {
    let parts: Vec<&str> = text.split('x').collect();
    let bad = || Failure::Usage(format!("bad target size {text:?}, expected HxW like 64x44"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let h = parts[0].parse::<usize>().map_err(|_| bad())?;
    let w = parts[1].parse::<usize>().map_err(|_| bad())?;
    usage(TargetSize::new(h, w))
}

fn write_file(path: &Path, content: &str) -> CmdResult {
    std::fs::write(path, content).map_err(|e| Failure::Runtime(Error::io(path, e).to_string()))
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let mut cfg = usage(PipelineConfig::load(&args.config))?;
    if let Some(seed) = args.seed {
        cfg.pipeline.seed = seed;
    }
    if let Some(se) = args.se_size {
        cfg.pipeline.se_size = se;
    }
    if let Some(text) = &args.target_size {
        let size = parse_target_size(text)?;
        cfg.pipeline.target_height = size.height;
        cfg.pipeline.target_width = size.width;
    }
    if args.align {
        cfg.pipeline.align = true;
    }
    if args.no_align {
        cfg.pipeline.align = false;
    }
    if args.disturb {
        cfg.disturb.enabled = true;
    }
    if let Some(m) = args.max_offset {
        cfg.disturb.max_offset = Some(m);
    }
    usage(cfg.validate())?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(Error::io(&args.out, e).to_string()))?;
    let domain_a = cfg
        .data
        .domain_a
        .clone()
        .ok_or_else(|| Failure::Usage("config has no data.domain_a".into()))?;
    if args.cross {
        let domain_b = cfg
            .data
            .domain_b
            .clone()
            .ok_or_else(|| Failure::Usage("cross-domain run needs data.domain_b".into()))?;
        let report = runtime(run_cross_domain(&domain_a, &domain_b, &cfg))?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&args.out.join("cross_report.json"), &format!("{json}\n"))?;
        let csv = report.to_csv();
        write_file(&args.out.join("cross_report.csv"), &csv)?;
        print!("{csv}");
    } else {
        let report = runtime(run_single_domain(&domain_a, &cfg))?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&args.out.join("report.json"), &format!("{json}\n"))?;
        let csv = report.to_csv();
        write_file(&args.out.join("report.csv"), &csv)?;
        print!("{csv}");
    }
    Ok(())
}

#[derive(Serialize)]
struct GradcheckOutput {
    target: String,
    seed: u64,
    metric: &'static str,
    tolerance: f64,
    pass: bool,
    report: GradReport,
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, density: f64) -> Grid {
    let values = (0..h * w)
        .map(|_| if rng.random_bool(density) { 1.0 } else { 0.0 })
        .collect();
    Grid::binary(h, w, values).expect("zeros and ones")
}

fn gradcheck_synthesize(seed: u64) -> gaitedge::error::Result<(GradReport, f64, &'static str)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = random_mask(&mut rng, 16, 12, 0.45);
    let se = StructuringElement::new(3)?;
    let pair = preprocess(&mask, se)?;
    let prob_values: Vec<f64> = (0..16 * 12).map(|_| rng.random_range(0.05..0.95)).collect();
    let prob = Grid::float(16, 12, prob_values)?;
    let weights: Vec<f64> = (0..16 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let forward = reconstruct(&pair, &prob)?;
    let upstream = GradGrid::new(16, 12, weights.clone())?;
    let analytic = synthesize_backward(&forward, &upstream)?;
    let f = |p: &Grid| -> gaitedge::error::Result<f64> {
        let out = reconstruct(&pair, p)?;
        Ok(out
            .composite
            .values()
            .iter()
            .zip(&weights)
            .map(|(&v, &w)| v * w)
            .sum())
    };
    let report = check_gradient(f, &analytic, &prob, DEFAULT_STEP, None)?;
    Ok((report, 1e-8, "max_abs_error"))
}

fn gradcheck_bce(seed: u64) -> gaitedge::error::Result<(GradReport, f64, &'static str)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = random_mask(&mut rng, 8, 8, 0.5);
    let prob_values: Vec<f64> = (0..64).map(|_| rng.random_range(0.1..0.9)).collect();
    let prob = Grid::float(8, 8, prob_values)?;
    let (_, analytic) = bce_loss(&prob, &target)?;
    let f = |p: &Grid| -> gaitedge::error::Result<f64> { Ok(bce_loss(p, &target)?.0) };
    let report = check_gradient(f, &analytic, &prob, DEFAULT_STEP, None)?;
    Ok((report, 1e-6, "max_rel_error"))
}

fn gradcheck_align(seed: u64) -> gaitedge::error::Result<(GradReport, f64, &'static str)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (16usize, 12usize);
    let size = TargetSize::new(8, 6)?;
    // A solid blob over weak background, away from the 0.5 threshold, so
    // the crop box is stable under the probe step.
    let values: Vec<f64> = (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            if (3..13).contains(&r) && (4..9).contains(&c) {
                rng.random_range(0.62..0.95)
            } else {
                rng.random_range(0.02..0.38)
            }
        })
        .collect();
    let at = Grid::float(h, w, values)?;
    let weights: Vec<f64> = (0..size.height * size.width)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let (_, ctx) = gait_align(&at, None, size)?;
    let upstream = GradGrid::new(size.height, size.width, weights.clone())?;
    let analytic = gait_align_backward(&ctx, &upstream)?;
    let f = |g: &Grid| -> gaitedge::error::Result<f64> {
        let (out, _) = gait_align(g, None, size)?;
        Ok(out
            .values()
            .iter()
            .zip(&weights)
            .map(|(&v, &wt)| v * wt)
            .sum())
    };
    let skip_values: Vec<f64> = at
        .values()
        .iter()
        .map(|&v| {
            if (v - 0.5).abs() <= DEFAULT_STEP * 1.01 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let skip = Grid::binary(h, w, skip_values)?;
    let report = check_gradient(f, &analytic, &at, DEFAULT_STEP, Some(&skip))?;
    Ok((report, 1e-5, "max_rel_error"))
}

fn cmd_gradcheck(args: GradcheckArgs) -> CmdResult {
    let (name, built) = match args.target {
        GradTarget::Synthesize => ("synthesize", gradcheck_synthesize(args.seed)),
        GradTarget::Bce => ("bce", gradcheck_bce(args.seed)),
        GradTarget::Align => ("align", gradcheck_align(args.seed)),
    };
    let (report, tolerance, metric) = runtime(built)?;
    let observed = match metric {
        "max_abs_error" => report.max_abs_error,
        _ => report.max_rel_error,
    };
    let out = GradcheckOutput {
        target: name.to_string(),
        seed: args.seed,
        metric,
        tolerance,
        pass: observed < tolerance,
        report,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("report serializes")
    );
    if out.pass {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "gradient check {name} failed: {metric} {observed:e} >= {tolerance:e}"
        )))
    }
}

fn selftest_check(name: &str, ok: bool, detail: &str) -> CmdResult {
    if ok {
        println!("ok: {name}");
        Ok(())
    } else {
        Err(Failure::Runtime(format!("selftest {name}: {detail}")))
    }
}

fn cmd_selftest() -> CmdResult {
    // Built-in defaults are the canonical operating point.
    let cfg = usage(PipelineConfig::from_toml(""))?;
    let p = &cfg.pipeline;
    selftest_check(
        "defaults",
        p.se_size == 3
            && p.target_height == 64
            && p.target_width == 44
            && p.lambda_seg == 10.0
            && p.align
            && !cfg.disturb.enabled
            && cfg.protocol.gallery == ["NM#01", "NM#02", "NM#03", "NM#04"]
            && cfg.protocol.exclude_identical_view
            && cfg.protocol.probes.len() == 3,
        "built-in defaults drifted from the canonical values",
    )?;

    // Compositing the silhouette's own mask reproduces it bitwise.
    let walker = gaitedge::datagen::WalkerParams::baseline("s001");
    let frame = runtime(gaitedge::datagen::render_frame(&walker, 1.1))?;
    let se = usage(cfg.structuring_element())?;
    let pair = runtime(preprocess(&frame, se))?;
    let synth = runtime(reconstruct(&pair, &frame.as_float()))?;
    selftest_check(
        "identity-reconstruction",
        synth.composite.values() == frame.values(),
        "synthesize(preprocess(M), P=M) != M",
    )?;

    // Alignment lands the body in the canonical frame.
    let target = usage(cfg.target_size())?;
    let (aligned, _) = runtime(gait_align(&frame.as_float(), None, target))?;
    let mask = aligned.binarized();
    let top_lit = (0..44).any(|c| mask.get(0, c) == 1.0);
    let bottom_lit = (0..44).any(|c| mask.get(63, c) == 1.0);
    selftest_check(
        "alignment",
        aligned.height() == 64 && aligned.width() == 44 && top_lit && bottom_lit,
        "aligned body does not fill the target frame",
    )?;

    // Miniature end-to-end evaluation, twice, bit-identical.
    let dir = tempfile::tempdir()
        .map_err(|e| Failure::Runtime(format!("cannot create temp dir: {e}")))?;
    let mut spec = DomainSpec::clean("selftest", 5, 3);
    spec.conditions = vec!["NM#01".into(), "NM#02".into()];
    spec.frames_per_sequence = Some(8);
    runtime(generate_domain(&spec, dir.path()))?;
    let mini = usage(PipelineConfig::from_toml(
        r#"
        [protocol]
        gallery = ["NM#01"]
        [[protocol.probes]]
        name = "NM"
        conditions = ["NM#02"]
        "#,
    ))?;
    let report = runtime(run_single_domain(dir.path(), &mini))?;
    let again = runtime(run_single_domain(dir.path(), &mini))?;
    selftest_check(
        "end-to-end",
        (0.0..=100.0).contains(&report.overall) && report == again,
        "miniature evaluation failed or was not deterministic",
    )?;
    println!("selftest passed");
    Ok(())
}
