//! A mirrored phantom looks similar to image metrics but loses its tumor, which
//! the proxy segmentation task exposes.

use refsim::distort::{mirror_replace, Axis};
use refsim::downstream::{task_similarity, threshold_segment, SegmenterParams};
use refsim::harness::{generate_phantom, PhantomParams, TumorHalf};
use refsim::metrics::{ssim, SsimParams};

fn main() -> refsim::Result<()> {
    let params = PhantomParams::default().with_half(TumorHalf::Lower);
    let seg = SegmenterParams::default();
    for seed in 0..5 {
        let phantom = generate_phantom(seed, &params)?;
        let mirrored = mirror_replace(&phantom.image, Axis::Y)?;
        let s = ssim(&phantom.image, &mirrored, &SsimParams::default())?.value;
        let d = task_similarity(&phantom.image, &mirrored, &seg)?.value;
        let found = threshold_segment(&phantom.image, &seg)?.count();
        println!("seed {seed}: ssim {s:.4}  dice {d:.4}  (tumor pixels found in reference: {found})");
    }
    Ok(())
}
