//! PSNR and SSIM depend on the data range `L`; the same pair scores very
//! differently under the joint, per-image and fixed policies.

use refsim::distort::Chain;
use refsim::harness::{generate_phantom, PhantomParams};
use refsim::metrics::{psnr, ssim, SsimParams};
use refsim::DataRangePolicy;

fn main() -> refsim::Result<()> {
    let phantom = generate_phantom(1, &PhantomParams::default())?;
    let test = "gamma(gamma=0.4)>linear_scale(factor=1.2)".parse::<Chain>()?.apply(&phantom.image)?;
    let joint = refsim::normalize::resolve_data_range(&phantom.image, &test, DataRangePolicy::Joint)?;

    let policies = [
        DataRangePolicy::Joint,
        DataRangePolicy::PerReference,
        DataRangePolicy::PerTest,
        DataRangePolicy::fixed(joint * 10.0)?,
        DataRangePolicy::fixed(65535.0)?,
    ];
    println!("{:>18}  {:>9}  {:>7}", "L policy", "psnr", "ssim");
    for policy in policies {
        let p = psnr(&phantom.image, &test, policy)?.value;
        let s = ssim(&phantom.image, &test, &SsimParams::with_range(policy))?.value;
        println!("{:>18}  {p:>9.4}  {s:>7.4}", policy.to_string());
    }
    Ok(())
}
