//! Small translations: SSIM drops quickly, CW-SSIM is more forgiving.

use refsim::distort::translate;
use refsim::harness::{generate_phantom, PhantomParams};
use refsim::metrics::{cw_ssim, ssim, CwSsimParams, SsimParams};

fn main() -> refsim::Result<()> {
    let phantom = generate_phantom(3, &PhantomParams::default())?;
    println!("shift  ssim    cw_ssim");
    for dx in 0..=4 {
        let moved = translate(&phantom.image, &[dx, 0])?;
        let s = ssim(&phantom.image, &moved, &SsimParams::default())?.value;
        let c = cw_ssim(&phantom.image, &moved, &CwSsimParams::default())?.value;
        println!("{dx:>4}px  {s:.4}  {c:.4}");
    }
    Ok(())
}
