//! Blurring a noisy image raises SSIM and lowers MSE even though detail is
//! lost; NMI is the metric that registers the blur.

use refsim::distort::{add_gaussian_noise, gaussian_blur};
use refsim::harness::{generate_phantom, PhantomParams};
use refsim::metrics::{mse, nmi, ssim, HistogramParams, SsimParams};

fn main() -> refsim::Result<()> {
    let phantom = generate_phantom(5, &PhantomParams::default())?;
    let r = &phantom.image;
    let noisy = add_gaussian_noise(r, 0.05, 11)?;
    let h = HistogramParams::default();
    println!("{:>14}  {:>7}  {:>11}  {:>6}", "test", "ssim", "mse", "nmi");
    for (name, t) in [
        ("reference", r.clone()),
        ("blur1", gaussian_blur(r, 1.0)?),
        ("noise", noisy.clone()),
        ("noise+blur1", gaussian_blur(&noisy, 1.0)?),
    ] {
        println!(
            "{name:>14}  {:>7.4}  {:>11.3}  {:>6.4}",
            ssim(r, &t, &SsimParams::default())?.value,
            mse(r, &t)?.value,
            nmi(r, &t, &h)?.value
        );
    }
    Ok(())
}
