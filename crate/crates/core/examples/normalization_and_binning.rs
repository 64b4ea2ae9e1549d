//! Normalization and bin quantization change error metrics and SSIM, while
//! PCC and NMI barely move.

use refsim::distort::Chain;
use refsim::harness::{generate_phantom, PhantomParams};
use refsim::metrics::{MetricOptions, MetricSpec};
use refsim::normalize::{NormMethod, Preprocess};

fn main() -> refsim::Result<()> {
    let phantom = generate_phantom(2, &PhantomParams::default())?;
    let test = "gamma(gamma=0.4)>linear_scale(factor=1.2)".parse::<Chain>()?.apply(&phantom.image)?;
    let ids = ["mae", "psnr", "ssim", "pcc", "nmi"];
    let specs: Vec<MetricSpec> = ids
        .iter()
        .map(|id| MetricSpec::from_id(id, MetricOptions::default()))
        .collect::<refsim::Result<_>>()?;

    println!("{:>8}  {}", "prep", ids.map(|id| format!("{id:>9}")).join("  "));
    for pre in [
        Preprocess::Norm(NormMethod::None),
        Preprocess::Norm(NormMethod::MinMax),
        Preprocess::Norm(NormMethod::ZScore),
        Preprocess::Bin(256),
    ] {
        let (r, t) = (pre.apply(&phantom.image)?, pre.apply(&test)?);
        let row: Vec<String> = specs
            .iter()
            .map(|s| s.evaluate(&r, &t).map(|v| format!("{:>9.4}", v.value)))
            .collect::<refsim::Result<_>>()?;
        println!("{:>8}  {}", pre.to_string(), row.join("  "));
    }
    Ok(())
}
