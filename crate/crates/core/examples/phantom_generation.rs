//! Generates a phantom and writes it with its masks to a directory
//! (default `phantom_out`).

use refsim::harness::{generate_phantom, PhantomParams};
use refsim::io::{save_image, ImageFormat};

fn main() -> refsim::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "phantom_out".into());
    std::fs::create_dir_all(&dir).expect("create output directory");
    let p = generate_phantom(42, &PhantomParams::default())?;
    let s = p.image.stats();
    println!(
        "seed {} dims {} tumor in {} half: {} tumor px, {} foreground px, intensities {:.1}..{:.1}",
        p.seed,
        p.image.dims(),
        p.tumor_half,
        p.tumor_mask.count(),
        p.foreground_mask.count(),
        s.min,
        s.max
    );
    let dir = std::path::Path::new(&dir);
    save_image(&p.image, dir.join("phantom.raw"), ImageFormat::RawF32)?;
    save_image(&p.tumor_mask.to_image().map(|v| v * 255.0)?.with_declared_range(0.0, 255.0)?, dir.join("tumor.pgm"), ImageFormat::Pgm)?;
    println!("wrote {}", dir.display());
    Ok(())
}
