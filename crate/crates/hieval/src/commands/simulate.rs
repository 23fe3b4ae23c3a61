//! `hieval simulate`.

use hieval_core::simulate::{simulate, GeneratorSpec};

use super::*;
use crate::cli::{Preset, SimulateArgs};

pub const RECORDS_CSV: &str = "records.csv";
pub const TRUTH_JSON: &str = "truth.json";
pub const GENERATOR_JSON: &str = "generator.json";

pub fn preset(p: Preset) -> GeneratorSpec {
    match p {
        Preset::TwoDomains => GeneratorSpec::two_domains(),
        Preset::Gaia => GeneratorSpec::gaia_shaped(),
        Preset::Bimodal => GeneratorSpec::BimodalTasks {
            model: "llm".into(),
            tasks: 165,
            repeats: 10,
            alpha: 0.2,
            beta: 0.2,
        },
        Preset::Nested => GeneratorSpec::Nested {
            models: 2,
            domains: 2,
            subdomains: 2,
            n: 60,
            overall: 0.5,
            sigma_model: 0.5,
            sigma_domain: 0.5,
            sigma_subdomain: 0.5,
        },
    }
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let spec = match (&args.generator, args.preset) {
        (Some(path), _) => io::read_json::<GeneratorSpec>(path).input()?,
        (None, Some(p)) => preset(p),
        (None, None) => return Err(CliError::input(anyhow::anyhow!("give --preset or --generator"))),
    };
    let (records, truth) = simulate(&spec, args.seed).input()?;
    let out = &args.out;
    let write = || -> anyhow::Result<()> {
        io::write_atomic(&out.join(RECORDS_CSV), &io::records_csv(&records)?)?;
        io::write_json(&out.join(TRUTH_JSON), &truth)?;
        io::write_json(&out.join(GENERATOR_JSON), &spec)
    };
    write().context("writing simulation outputs").input()?;
    println!("{} records ({}) written to {}", records.len(), spec.kind(), out.display());
    Ok(())
}
