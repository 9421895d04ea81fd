//! Regenerates the bundled mini collection under `data/mini`.

use std::path::Path;

fn main() -> Result<(), qrelcmp::Error> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    qrelcmp::fixture::write_mini_collection(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
