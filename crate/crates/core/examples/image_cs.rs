//! Block-wise DCT compressive sensing of an image.
//!
//! `cargo run --release --example image_cs [input.pgm]`; without an argument a
//! 128x128 synthetic test card is used.

use mcc_cs::{reconstruct_image, ImageCsConfig, ImageGrid, NoiseModel};

fn main() -> mcc_cs::Result<()> {
    let img = match std::env::args().nth(1) {
        Some(path) => ImageGrid::load_pgm(std::path::Path::new(&path))?,
        None => ImageGrid::synthetic(128, 128),
    };
    let cfg = ImageCsConfig::new(Some(NoiseModel::Gmm { c: 0.02, sigma_a_sq: 0.04, m: 500.0, sigma_b_sq: 10.0 }));
    let out = reconstruct_image(&img, &cfg, 1)?;
    println!(
        "{}x{} image, {} blocks, PSNR {:.2} dB, {} diverged",
        img.height(),
        img.width(),
        out.report.blocks.len(),
        out.report.psnr_db,
        out.report.diverged_blocks
    );
    out.image.write_pgm(std::fs::File::create("reconstructed.pgm")?)?;
    Ok(())
}
