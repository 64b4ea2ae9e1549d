//! Scores a distorted phantom against its reference with every built-in metric.

use refsim::distort::Chain;
use refsim::harness::{generate_phantom, PhantomParams};
use refsim::metrics::MetricRegistry;

fn main() -> refsim::Result<()> {
    let phantom = generate_phantom(7, &PhantomParams::default())?;
    let chain: Chain = "gaussian_noise(sigma_rel=0.05,seed=3)>gaussian_blur(sigma=1)".parse()?;
    let test = chain.apply(&phantom.image)?;

    let registry = MetricRegistry::with_builtins();
    println!("test image: {chain}");
    for id in registry.ids() {
        let metric = registry.get(id).expect("listed id");
        let score = metric.evaluate(&phantom.image, &test)?;
        println!("{id:>8}  {score:>12.6}  {}", metric.fingerprint());
    }
    Ok(())
}
