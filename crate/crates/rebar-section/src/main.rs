//! Command-line front end: `analyze` runs the full pipeline over one or
//! more images and writes JSON reports (plus optional overlays), `synth`
//! renders test fixtures with analytic ground truth.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::{Path, PathBuf};

use rebar_section::image_io::{
    generate_synthetic, load_grayscale, save_png, FixtureIntensities, SyntheticShape,
    SyntheticSpec,
};
use rebar_section::report::{
    analyze, emit_json, round_json_numbers, write_overlay_png, AnalysisConfig, WeightMode,
};
use rebar_section::segmentation::SegmentationConfig;
use rebar_section::weights::MaterialDensities;

#[derive(Parser)]
#[command(
    name = "rebar-section",
    about = "Cross-section analysis of FRP rebar images",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze cross-section images and write JSON reports.
    Analyze(AnalyzeArgs),
    /// Render a synthetic fixture image with a ground-truth sidecar.
    Synth(SynthArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input images (PNG or TIFF, 8-bit).
    #[arg(required = true)]
    images: Vec<PathBuf>,

    /// Pixel scale in mm/px; overrides any scale stored in the image.
    #[arg(long)]
    scale: Option<f64>,

    /// Material densities as FIBRE,EPOXY in kg/m^3.
    #[arg(long, value_parser = parse_densities)]
    densities: Option<MaterialDensities>,

    /// Weight assignment mode.
    #[arg(long, value_enum, default_value_t = WeightModeArg::Global)]
    weight_mode: WeightModeArg,

    /// Window size for local weight mode (odd, >= 3).
    #[arg(long, default_value_t = 7)]
    window: usize,

    /// Explicit fibre threshold for global mode (default: from histogram).
    #[arg(long)]
    fibre_threshold: Option<u8>,

    /// Radius of the rough-stage smoothing filter, px.
    #[arg(long, default_value_t = SegmentationConfig::default().rough_radius)]
    rough_radius: u32,

    /// Closing radius of the fine stage, px.
    #[arg(long, default_value_t = SegmentationConfig::default().fine_close_radius)]
    fine_close: u32,

    /// Opening radius of the fine stage, px.
    #[arg(long, default_value_t = SegmentationConfig::default().fine_open_radius)]
    fine_open: u32,

    /// Number of intensity classes for thresholding (2-4).
    #[arg(long, default_value_t = SegmentationConfig::default().otsu_classes)]
    otsu_classes: usize,

    /// Keep every fine-stage component instead of only the largest.
    #[arg(long)]
    no_largest_component: bool,

    /// Tensile load in kN; enables the stress section of the report.
    #[arg(long)]
    force: Option<f64>,

    /// Declared bar diameter in mm (for the nominal-area stress).
    #[arg(long)]
    diameter: Option<f64>,

    /// Output directory for reports and overlays.
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Also write an annotated overlay PNG per image.
    #[arg(long)]
    overlay: bool,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum WeightModeArg {
    Global,
    Local,
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    shape: SynthShape,
}

#[derive(Subcommand)]
enum SynthShape {
    /// Disc textured with fibre dots in an epoxy matrix.
    Disc {
        /// Disc radius, px.
        #[arg(long)]
        radius: f64,
        #[command(flatten)]
        common: SynthCommon,
    },
    /// Uniform ellipse.
    Ellipse {
        /// Semi-axis along the rotated major direction, px.
        #[arg(long)]
        a: f64,
        /// Semi-axis perpendicular to it, px.
        #[arg(long)]
        b: f64,
        /// Rotation of the `a` axis from horizontal, degrees.
        #[arg(long, default_value_t = 0.0)]
        rotation: f64,
        #[command(flatten)]
        common: SynthCommon,
    },
    /// Disc with fibre-density and epoxy-density halves.
    HalfDisc {
        /// Disc radius, px.
        #[arg(long)]
        radius: f64,
        /// Direction from the centre toward the fibre half, degrees.
        #[arg(long, default_value_t = 90.0)]
        split_angle: f64,
        #[command(flatten)]
        common: SynthCommon,
    },
}

#[derive(Args)]
struct SynthCommon {
    /// Canvas width, px.
    #[arg(long, default_value_t = 512)]
    width: usize,

    /// Canvas height, px.
    #[arg(long, default_value_t = 512)]
    height: usize,

    /// Pixel scale, mm/px.
    #[arg(long, default_value_t = 0.01)]
    scale: f64,

    /// Intensities as BACKGROUND,EPOXY,FIBRE.
    #[arg(long, value_parser = parse_intensities)]
    intensities: Option<FixtureIntensities>,

    /// Peak amplitude of additive uniform noise.
    #[arg(long, default_value_t = 0)]
    noise: u8,

    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output PNG path; the ground truth goes next to it as .truth.json.
    #[arg(long)]
    out: PathBuf,
}

fn parse_densities(s: &str) -> std::result::Result<MaterialDensities, String> {
    let (fibre, epoxy) = s
        .split_once(',')
        .ok_or_else(|| "expected FIBRE,EPOXY".to_string())?;
    let fibre_kg_m3: f64 = fibre.trim().parse().map_err(|e| format!("fibre: {e}"))?;
    let epoxy_kg_m3: f64 = epoxy.trim().parse().map_err(|e| format!("epoxy: {e}"))?;
    Ok(MaterialDensities {
        fibre_kg_m3,
        epoxy_kg_m3,
    })
}

fn parse_intensities(s: &str) -> std::result::Result<FixtureIntensities, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected BACKGROUND,EPOXY,FIBRE".to_string());
    }
    let parse = |t: &str| t.trim().parse::<u8>().map_err(|e| e.to_string());
    Ok(FixtureIntensities {
        background: parse(parts[0])?,
        epoxy: parse(parts[1])?,
        fibre: parse(parts[2])?,
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Analyze(args) => run_analyze(args),
        Command::Synth(args) => run_synth(args),
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let config = AnalysisConfig {
        segmentation: SegmentationConfig {
            rough_radius: args.rough_radius,
            fine_close_radius: args.fine_close,
            fine_open_radius: args.fine_open,
            otsu_classes: args.otsu_classes,
            keep_largest_component: !args.no_largest_component,
        },
        densities: args.densities.unwrap_or_default(),
        weight_mode: match args.weight_mode {
            WeightModeArg::Global => WeightMode::Global {
                fibre_threshold: args.fibre_threshold,
            },
            WeightModeArg::Local => WeightMode::Local {
                window: args.window,
            },
        },
        scale_override_mm_per_px: args.scale,
        force_kn: args.force,
        declared_diameter_mm: args.diameter,
    };
    config.validate().context("invalid configuration")?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;

    for path in &args.images {
        let sample_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sample".to_string());
        let image = load_grayscale(path, args.scale)
            .with_context(|| format!("loading {}", path.display()))?;
        let report = analyze(&image, &config, &sample_id)
            .with_context(|| format!("analyzing {}", path.display()))?;

        let json_path = args.out.join(format!("{sample_id}.json"));
        write_atomic(&json_path, emit_json(&report).as_bytes())
            .with_context(|| format!("writing {}", json_path.display()))?;

        if args.overlay {
            let overlay_path = args.out.join(format!("{sample_id}_overlay.png"));
            let tmp = temp_sibling(&overlay_path);
            write_overlay_png(&tmp, &image, &report)
                .with_context(|| format!("writing {}", overlay_path.display()))?;
            fs::rename(&tmp, &overlay_path)
                .with_context(|| format!("writing {}", overlay_path.display()))?;
        }

        let shift = report.section.shift;
        let mut line = format!(
            "{sample_id}: area {:.4} mm^2, shift {:.4} mm at {:.2} deg",
            report.section.area_mm2, shift.magnitude_mm, shift.angle_deg
        );
        if let Some(stress) = &report.stress {
            line.push_str(&format!(", sigma_C {:.2} MPa", stress.sigma_c_mpa));
            if let Some(e) = stress.sigma_e_mpa {
                line.push_str(&format!(", sigma_E {:.2} MPa", e));
            }
        }
        for warning in &report.warnings {
            line.push_str(&format!(" [warning: {warning}]"));
        }
        println!("{line}");
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let (shape, common) = match args.shape {
        SynthShape::Disc { radius, common } => {
            (SyntheticShape::Disc { radius_px: radius }, common)
        }
        SynthShape::Ellipse {
            a,
            b,
            rotation,
            common,
        } => (
            SyntheticShape::Ellipse {
                a_px: a,
                b_px: b,
                rotation_deg: rotation,
            },
            common,
        ),
        SynthShape::HalfDisc {
            radius,
            split_angle,
            common,
        } => (
            SyntheticShape::HalfDensityDisc {
                radius_px: radius,
                split_angle_deg: split_angle,
            },
            common,
        ),
    };

    let spec = SyntheticSpec {
        shape,
        intensities: common.intensities.unwrap_or_default(),
        noise_amplitude: common.noise,
        noise_seed: common.seed,
    };
    let (image, truth) = generate_synthetic(&spec, common.width, common.height, common.scale)
        .context("generating fixture")?;

    if let Some(dir) = common.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    let tmp = temp_sibling(&common.out);
    save_png(&tmp, &image).with_context(|| format!("writing {}", common.out.display()))?;
    fs::rename(&tmp, &common.out)
        .with_context(|| format!("writing {}", common.out.display()))?;

    let truth_path = common.out.with_extension("truth.json");
    let mut value = serde_json::json!({
        "spec": spec,
        "scale_mm_per_px": common.scale,
        "truth": truth,
    });
    round_json_numbers(&mut value);
    let mut text = serde_json::to_string_pretty(&value).expect("truth serializes");
    text.push('\n');
    write_atomic(&truth_path, text.as_bytes())
        .with_context(|| format!("writing {}", truth_path.display()))?;

    println!(
        "{}: {}x{} px at {} mm/px, truth in {}",
        common.out.display(),
        common.width,
        common.height,
        common.scale,
        truth_path.display()
    );
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    name.push_str(".tmp");
    path.with_file_name(name)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
