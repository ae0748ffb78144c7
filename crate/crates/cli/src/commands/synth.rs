use std::path::Path;

use anyhow::Context;
use oprank_core::ingest;
use oprank_core::synth::{self, SynthConfig};

use crate::manifest::RunManifest;

pub fn run(config_path: Option<&Path>, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let mut cfg = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<SynthConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }

    let bundle = synth::generate(&cfg)?;
    ingest::write_bundle(&bundle, out).with_context(|| format!("writing {}", out.display()))?;

    RunManifest::new("synth", out)
        .input("config", config_path)
        .param("seed", cfg.seed)
        .param("n_stocks", cfg.n_stocks)
        .param("n_days", cfg.n_days)
        .param("n_opinions", cfg.n_opinions)
        .param("horizon_days", cfg.horizon_days)
        .param("strength_return_coupling", cfg.strength_return_coupling)
        .param("fsd_noise", cfg.fsd_noise)
        .param("event_rate", cfg.event_rate)
        .param("flow_agreement_rate", cfg.flow_agreement_rate)
        .write(out)?;

    println!(
        "wrote {} opinions, {} stocks, {} trading days to {}",
        bundle.opinions.len(),
        bundle.prices.len(),
        bundle.calendar.len(),
        out.display()
    );
    Ok(())
}
