//! Writing datasets as inline JSON or as JSON with a binary array companion.

use landauer_lab::cli::{simulate, Dataset, RunConfig};
use landauer_lab::io::OutputFormat;

fn main() -> landauer_lab::Result<()> {
    let mut config = RunConfig::default();
    config.protocol.shots_per_time = 100;
    let dataset = simulate(&config, false)?;
    let dir = std::env::temp_dir().join("landauer-lab-formats");
    for (name, format) in [
        ("inline.json", OutputFormat::Json),
        ("packed.json", OutputFormat::Binary),
    ] {
        let path = dir.join(name);
        dataset.write(&path, format)?;
        let back = Dataset::read(&path)?;
        assert_eq!(back.shots, dataset.shots);
        let size = |p: &std::path::Path| std::fs::metadata(p).map(|m| m.len()).unwrap_or(0);
        println!(
            "{format:?}: {} JSON bytes, {} binary bytes",
            size(&path),
            size(&path.with_extension("bin"))
        );
    }
    println!("config hash {}", config.hash());
    Ok(())
}
