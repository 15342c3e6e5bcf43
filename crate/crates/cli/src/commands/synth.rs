use myoinr_core::objective::with_workers;
use myoinr_core::synth::{generate_dataset, SynthConfig};

use crate::cli::SynthArgs;
use crate::config::RunConfig;
use crate::dataset::{create_dir, write_dataset, DatasetManifest, GeneratorEcho};
use crate::error::{CliError, CliResult};

pub fn synth_config(args: &SynthArgs) -> SynthConfig {
    let mut cfg = SynthConfig {
        frame_count: args.frames,
        image_size: args.image_size,
        pixel_spacing_mm: args.spacing,
        ..SynthConfig::default()
    };
    if args.motionless {
        cfg = cfg.motionless();
    }
    let overrides = [
        (&mut cfg.midwall_shrink, args.shrink),
        (&mut cfg.twist, args.twist),
        (&mut cfg.drift, args.drift),
        (&mut cfg.t_es, args.t_es),
        (&mut cfg.noise_sigma, args.noise),
        (&mut cfg.tag_spacing_px, args.tag_spacing),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if args.thickening.is_some() {
        cfg.thickening = args.thickening;
    }
    cfg
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<DatasetManifest> {
    let cfg = synth_config(args);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.cases == 0 {
        return Err(CliError::Usage("--cases must be at least 1".into()));
    }
    let cases = with_workers(args.workers, || {
        generate_dataset(args.seed, args.first_case, args.cases, &cfg)
    })??;
    create_dir(&args.out)?;
    let manifest = write_dataset(
        &args.out,
        &cases,
        Some(GeneratorEcho {
            seed: args.seed,
            first_case: args.first_case,
            config: cfg,
        }),
        None,
    )?;
    RunConfig::new(
        "synth",
        &args.out,
        myoinr_core::Precision::F64,
        args.workers,
    )
    .option("seed", args.seed)
    .option("cases", args.cases)
    .option("first_case", args.first_case)
    .write()?;
    Ok(manifest)
}
