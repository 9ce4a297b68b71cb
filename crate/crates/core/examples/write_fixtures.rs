//! Write the synthetic glyph fixtures and their ground-truth masks as PNGs.
//!
//! cargo run --example write_fixtures -- <dir>

use std::path::PathBuf;

use textscrub::fixtures::glyph_fixtures;
use textscrub::io::{ensure_dir, write_image, write_mask};

fn main() -> textscrub::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".to_string()));
    let masks = dir.join("truth");
    ensure_dir(&masks)?;
    for f in glyph_fixtures() {
        write_image(&dir.join(format!("{}.png", f.name)), &f.image)?;
        write_mask(&masks.join(format!("{}.png", f.name)), &f.glyphs)?;
    }
    println!("wrote {} fixtures to {}", glyph_fixtures().len(), dir.display());
    Ok(())
}
